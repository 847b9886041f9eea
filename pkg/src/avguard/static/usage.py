"""Syntactic resource usage and manifest/program consistency."""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import bus
from ..findings import REJECT, WARN, Finding, sort_findings
from ..ir.program import AppProgram, NetSend, Publish, ReadField, Store
from ..manifest import ACTUATORS, AppManifest, Category, Direction


@dataclass(frozen=True)
class ResourceUsage:
    subscribed: frozenset[str] = frozenset()
    published: frozenset[str] = frozenset()
    net_hosts: frozenset[str] = frozenset()
    reads_location: bool = False
    storage_keys: frozenset[str] = field(default=frozenset())


def collect_resource_usage(p: AppProgram) -> ResourceUsage:
    # every instruction counts, reachable or not
    published, hosts, keys = set(), set(), set()
    reads_location = False
    for h, _, _, ins in p.all_instructions():
        if isinstance(ins, Publish):
            published.add(ins.kind)
        elif isinstance(ins, NetSend):
            hosts.add(ins.host)
        elif isinstance(ins, Store):
            keys.add(ins.key)
        elif isinstance(ins, ReadField):
            if h.trigger == bus.VEHICLE_REPORT and ins.path.startswith("position."):
                reads_location = True
    return ResourceUsage(
        subscribed=frozenset(p.handlers),
        published=frozenset(published),
        net_hosts=frozenset(hosts),
        reads_location=reads_location,
        storage_keys=frozenset(keys),
    )


def check_manifest_consistency(p: AppProgram, m: AppManifest) -> list[Finding]:
    usage = collect_resource_usage(p)
    findings = []
    for kind in sorted(usage.published):
        res = bus.KIND_RESOURCE[kind]
        if not m.declares(res, Direction.CONTROL):
            findings.append(
                Finding(f"publish:{kind}", "undeclared_control", REJECT,
                        f"publishes {kind} without declaring control of {res}")
            )
    for kind in sorted(usage.subscribed):
        res = bus.KIND_RESOURCE[kind]
        if not m.declares(res, Direction.SUBSCRIBE):
            findings.append(
                Finding(f"subscribe:{kind}", "undeclared_subscription", REJECT,
                        f"handles {kind} without declaring a subscription")
            )
    if usage.net_hosts and not m.declares("network", Direction.CONTROL):
        hosts = ",".join(sorted(usage.net_hosts))
        findings.append(
            Finding("network", "undeclared_network", REJECT, f"sends to {hosts} without declaring network")
        )
    if usage.storage_keys and not m.declares("storage", Direction.CONTROL):
        findings.append(Finding("storage", "undeclared_storage", REJECT, "writes storage without declaring it"))

    # commodity-component rule: only driving apps may hold actuators
    if m.category != Category.DRIVING:
        for i, r in enumerate(m.resources):
            if r.direction == Direction.CONTROL and r.resource in ACTUATORS:
                findings.append(
                    Finding(f"resources[{i}]", "category_actuator", REJECT,
                            f"{m.category.value} apps may not control {r.resource}")
                )

    used_subscriptions = {bus.KIND_RESOURCE[k] for k in usage.subscribed}
    used_controls = {bus.KIND_RESOURCE[k] for k in usage.published}
    if usage.net_hosts:
        used_controls.add("network")
    if usage.storage_keys:
        used_controls.add("storage")
    if usage.reads_location:
        used_subscriptions.add("location")
    for i, r in enumerate(m.resources):
        used = used_controls if r.direction == Direction.CONTROL else used_subscriptions
        if r.resource not in used:
            findings.append(
                Finding(f"resources[{i}]", "unused_resource", WARN,
                        f"{r.resource} ({r.direction.value}) declared but never used")
            )
    return sort_findings(findings)
