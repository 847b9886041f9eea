"""Command-line front end.

Exit codes: 0 pass/success, 1 reject, 2 error.  Every random choice flows
from ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import AVGuardError, BadSignature, Conflict, DuplicateAppId, NotApproved, Tampered
from ..evaluation.dynamic import DynamicConfig, run_dynamic_vetting
from ..evaluation.traces import generate_traces, read_traces, traces_csv
from ..manifest import parse_manifest, serialize_manifest
from ..sim.episode import EpisodeConfig, run_episode
from ..sim.export import trajectory_csv
from ..sim.scenario import load_scenario
from .market import MarketRegistry, load_public_key, verify_and_install
from .package import SIGNATURE, load_package, load_raw
from .vet import APPROVED, VetReport, vet_package

OK, REJECTED, ERROR = 0, 1, 2


def _dynamic_config(args) -> DynamicConfig:
    cfg = DynamicConfig(seed=args.seed)
    for name in ("threshold", "ce_iters", "ce_n", "is_n"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def cmd_vet(args) -> int:
    pkg = load_package(args.package)
    traces = read_traces(args.traces) if args.traces else None
    report = vet_package(pkg, traces, dynamic=_dynamic_config(args))
    print(report.render(), end="")
    if args.out:
        Path(args.out).write_text(report.to_json())
    if args.market:
        MarketRegistry.open(args.market).record_vetting(pkg, report)
    return OK if report.final_verdict == APPROVED else REJECTED


def cmd_sign(args) -> int:
    pkg = load_package(args.package)
    try:
        signed = MarketRegistry.open(args.market).sign(pkg)
    except NotApproved as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return REJECTED
    target = Path(args.package)
    if not target.is_dir():
        raise AVGuardError("sign writes signature.bin into a package directory")
    (target / SIGNATURE).write_bytes(signed.signature)
    print(f"signed {signed.app_id} {signed.version}")
    return OK


def _installed(vehicle: Path):
    apps = vehicle / "apps"
    if not apps.is_dir():
        return []
    return [parse_manifest(p.read_text()) for p in sorted(apps.glob("*.xml"))]


def cmd_install(args) -> int:
    if args.market_key:
        key = load_public_key(args.market_key)
    elif args.market:
        key = MarketRegistry.open(args.market, create=False).public_key()
    else:
        raise AVGuardError("install needs --market or --market-key")
    vehicle = Path(args.vehicle)
    raw = load_raw(args.package)
    try:
        outcome = verify_and_install(raw, key, _installed(vehicle))
    except (BadSignature, Tampered, Conflict, DuplicateAppId) as exc:
        print(f"rejected: {type(exc).__name__}: {exc}", file=sys.stderr)
        return REJECTED
    manifest = outcome.installed[-1]
    (vehicle / "apps").mkdir(parents=True, exist_ok=True)
    (vehicle / "apps" / f"{manifest.app_id}.xml").write_text(serialize_manifest(manifest))
    print(f"installed {outcome.app_id} {outcome.version}")
    return OK


def cmd_simulate(args) -> int:
    pkgs = [load_package(p) for p in [args.package, *args.with_app]]
    assets = {}
    for p in pkgs:
        assets.update(p.assets)
    scenario = load_scenario(args.scenario, assets)
    cfg = EpisodeConfig(scenario, pkgs, dt=args.dt, watchdog_enabled=not args.no_watchdog, seed=args.seed)
    result = run_episode(cfg)
    if args.export:
        Path(args.export).write_text(trajectory_csv(result.trajectory), newline="")
    crash = f"crash at t={result.crash_time:.2f} s" if result.crashed else "no crash"
    print(f"{crash}; min gap {result.min_gap:.3f} m; min ttc {result.min_ttc:.3f} s; "
          f"max cross-track {result.max_cross_track_error:.3f} m; loss of control {result.loss_of_control}; "
          f"{len(result.interventions)} watchdog actions; {len(result.app_faults)} app faults; {result.steps} steps")
    return REJECTED if result.crashed else OK


def cmd_estimate(args) -> int:
    pkg = load_package(args.package)
    cfg = _dynamic_config(args)
    cfg.is_n = args.n
    report = run_dynamic_vetting(pkg, read_traces(args.traces), cfg)
    print(report.render(), end="")
    return OK if report.verdict == "pass" else REJECTED


def cmd_gen_traces(args) -> int:
    text = traces_csv(generate_traces(args.model, args.n, args.seed))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return OK


def cmd_report(args) -> int:
    report = VetReport.load(args.report)
    print(report.render(), end="")
    return OK if report.final_verdict == APPROVED else REJECTED


def _add_eval_options(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, help="maximum tolerated crash probability per episode")
    p.add_argument("--ce-iters", type=int)
    p.add_argument("--ce-n", type=int, help="episodes per cross-entropy iteration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avguard", description="Vet, sign, install and simulate vehicle apps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vet", help="static then dynamic vetting of a package")
    p.add_argument("package")
    p.add_argument("--traces", help="trace CSV (default: the shipped corpus traces)")
    p.add_argument("--is-n", type=int, help="importance samples")
    p.add_argument("--out", help="write the report as JSON")
    p.add_argument("--market", help="record the outcome in this market registry")
    _add_eval_options(p)
    p.set_defaults(func=cmd_vet)

    p = sub.add_parser("sign", help="sign an approved package with the market key")
    p.add_argument("package")
    p.add_argument("--market", required=True)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("install", help="verify a signed package and install it on a vehicle")
    p.add_argument("package")
    p.add_argument("--market", help="registry whose public key to trust")
    p.add_argument("--market-key", help="PEM public key to trust")
    p.add_argument("--vehicle", default="vehicle", help="vehicle state directory")
    p.set_defaults(func=cmd_install)

    p = sub.add_parser("simulate", help="run one episode")
    p.add_argument("package")
    p.add_argument("--scenario", required=True)
    p.add_argument("--with", dest="with_app", action="append", default=[], help="another app package to run")
    p.add_argument("--no-watchdog", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--export", help="trajectory CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="crash probability by cross-entropy tuned importance sampling")
    p.add_argument("package")
    p.add_argument("--traces", required=True)
    p.add_argument("--n", type=int, required=True, help="importance samples")
    _add_eval_options(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gen-traces", help="draw synthetic naturalistic traces")
    p.add_argument("--model", required=True, help="ground-truth model JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("report", help="print a saved vetting report")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AVGuardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
