from __future__ import annotations

import json
import shutil
from types import SimpleNamespace

from avguard.evaluation.traces import read_traces
from avguard.pipeline.cli import ERROR, OK, REJECTED, main
from avguard.pipeline.corpus import MODEL_CONFIG, SCENARIOS, TRACES, package_path
from avguard.pipeline.market import APPROVED, MarketRegistry
from avguard.pipeline.package import SIGNATURE, load_package


def _copy(name, tmp_path):
    dest = tmp_path / f"{name}.avpkg"
    shutil.copytree(package_path(name), dest)
    return dest


def test_vet_static_rejection(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["vet", str(package_path("privacy_leak")), "--out", str(out)]) == REJECTED
    text = capsys.readouterr().out
    assert "privacy_leak" in text and "rejected_static" in text
    assert json.loads(out.read_text())["final_verdict"] == "rejected_static"
    assert main(["report", str(out)]) == REJECTED
    assert "rejected_static" in capsys.readouterr().out


def test_vet_records_outcome_in_market(tmp_path):
    market = tmp_path / "m"
    main(["vet", str(package_path("red_light_violator")), "--market", str(market)])
    (record,) = MarketRegistry.open(market).approvals.values()
    assert record["final_verdict"] == "rejected_static"
    assert main(["sign", str(package_path("red_light_violator")), "--market", str(market)]) == REJECTED


def test_missing_inputs_exit_2(tmp_path, capsys):
    assert main(["report", str(tmp_path / "none.json")]) == ERROR
    assert main(["vet", str(tmp_path / "none.avpkg")]) == ERROR
    assert main(["install", str(package_path("privacy_leak")), "--vehicle", str(tmp_path / "v")]) == ERROR
    assert "error:" in capsys.readouterr().err


def test_sign_install_and_tamper(tmp_path, capsys):
    market = tmp_path / "m"
    vehicle = tmp_path / "car"
    pkg_dir = _copy("path_follower_corrected", tmp_path)
    reg = MarketRegistry.open(market)
    reg.record_vetting(load_package(pkg_dir), SimpleNamespace(final_verdict=APPROVED))

    assert main(["sign", str(pkg_dir), "--market", str(market)]) == OK
    assert (pkg_dir / SIGNATURE).exists()
    assert main(["install", str(pkg_dir), "--market-key", str(reg.public_key_path),
                 "--vehicle", str(vehicle)]) == OK
    assert (vehicle / "apps" / "path_follower_corrected.xml").exists()

    # a second exclusive steering app conflicts with the one just installed
    other = _copy("path_follower_faithful", tmp_path)
    reg.record_vetting(load_package(other), SimpleNamespace(final_verdict=APPROVED))
    assert main(["sign", str(other), "--market", str(market)]) == OK
    assert main(["install", str(other), "--market", str(market), "--vehicle", str(vehicle)]) == REJECTED
    assert "Conflict" in capsys.readouterr().err

    prog = pkg_dir / "program.avir"
    prog.write_text(prog.read_text() + "\n")
    assert main(["install", str(pkg_dir), "--market", str(market), "--vehicle", str(tmp_path / "car2")]) == REJECTED
    assert "Tampered" in capsys.readouterr().err


def test_unsigned_install_rejected(tmp_path, capsys):
    MarketRegistry.open(tmp_path / "m")
    assert main(["install", str(package_path("aggressive_follower")), "--market", str(tmp_path / "m"),
                 "--vehicle", str(tmp_path / "v")]) == REJECTED
    assert "BadSignature" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path, capsys):
    scenario = str(SCENARIOS / "highway_brake.json")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    pkg = str(package_path("aggressive_follower"))
    assert main(["simulate", pkg, "--scenario", scenario, "--seed", "3", "--export", str(a)]) == OK
    assert main(["simulate", pkg, "--scenario", scenario, "--seed", "3", "--export", str(b)]) == OK
    assert a.read_bytes() == b.read_bytes()
    assert "no crash" in capsys.readouterr().out
    assert main(["simulate", pkg, "--scenario", scenario, "--no-watchdog"]) == REJECTED
    assert "crash at" in capsys.readouterr().out


def test_gen_traces(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["gen-traces", "--model", str(MODEL_CONFIG), "--n", "50", "--seed", "4", "--out", str(out)]) == OK
    assert len(read_traces(out)) == 50
    assert main(["gen-traces", "--model", str(MODEL_CONFIG), "--n", "50", "--seed", "4"]) == OK
    assert capsys.readouterr().out == out.read_text()


def test_estimate_aggressive(capsys):
    # about half a minute
    code = main(["estimate", str(package_path("aggressive_follower")), "--traces", str(TRACES), "--n", "1000"])
    text = capsys.readouterr().out
    assert code == REJECTED
    values = dict(line.split("=", 1) for line in text.split("[values]\n")[1].splitlines())
    assert float(values["p_hat"]) > 1e-4
    assert float(values["acceleration_factor"]) >= 100
