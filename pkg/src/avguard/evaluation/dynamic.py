"""Trace-driven dynamic vetting: fit, tilt, estimate, decide."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .. import bus
from ..errors import ZeroHits
from ..sim.episode import EpisodeConfig, run_episode
from ..sim.scenario import CAR_FOLLOWING, PATH, ScenarioParams, car_following, path_following
from .cross_entropy import Proposal, cross_entropy_search
from .distributions import ScenarioModel
from .estimators import Estimate, acceleration_factor, is_estimate
from .indicators import Indicator
from .traces import FIELDS, fit_model, select_traces

PASS = "pass"
REJECT = "reject"


def episode_seed(base_seed: int, values) -> int:
    """Sub-seed of one episode, a function of the scenario draw only."""
    data = struct.pack(f"<Q{len(values)}d", base_seed & 0xFFFFFFFFFFFFFFFF, *map(float, values))
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "little")


class CrashIndicator(Indicator):
    """Runs one episode per scenario row; severity is the episode's crash
    proximity (minimum gap or remaining lane margin)."""

    def __init__(self, apps, kind: str = CAR_FOLLOWING, fields=FIELDS, path=None, base: ScenarioParams | None = None,
                 watchdog_enabled: bool = False, dt: float = 0.05, duration: float | None = None, seed: int = 0):
        self.apps = list(apps)
        self.kind = kind
        self.fields = tuple(fields)
        self.path = path
        self.base = base or ScenarioParams(30.0, 20.0, 20.0, 0.0, 5.0)
        self.watchdog_enabled = watchdog_enabled
        self.dt = dt
        self.duration = duration if duration is not None else (20.0 if kind == CAR_FOLLOWING else 40.0)
        self.seed = seed
        self.episodes = 0
        self._cache: dict[tuple, float] = {}

    def params(self, row) -> ScenarioParams:
        vals = dict(zip(ScenarioParams.FIELDS, self.base.as_tuple()))
        vals.update(zip(self.fields, map(float, row)))
        return ScenarioParams(**vals)

    def scenario(self, row):
        p = self.params(row)
        if self.kind == PATH:
            return path_following(self.path, p.ego_speed, self.duration)
        return car_following(p, self.duration)

    def run(self, row, record: bool = False):
        cfg = EpisodeConfig(self.scenario(row), self.apps, dt=self.dt, watchdog_enabled=self.watchdog_enabled,
                            seed=episode_seed(self.seed, row), record=record)
        self.episodes += 1
        return run_episode(cfg)

    def severity(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            key = tuple(row)
            sev = self._cache.get(key)
            if sev is None:
                sev = self.run(row).severity
                self._cache[key] = sev
            out[i] = sev
        return out


@dataclass
class DynamicConfig:
    threshold: float = 1e-4  # maximum tolerated crash probability per episode
    ce_iters: int = 8
    ce_n: int = 300
    rho: float = 0.1
    is_n: int = 1000
    seed: int = 0
    target_rel_err: float = 0.1
    watchdog_enabled: bool = False
    dt: float = 0.05
    min_scale_ratio: float = 0.5
    bounds: dict | None = None


@dataclass
class DynamicReport:
    app_id: str
    scenario_kind: str
    circumstances: tuple[str, ...]
    n_traces: int
    nominal: ScenarioModel
    proposal: Proposal
    estimate: Estimate
    acceleration_factor: float | None
    threshold: float
    episodes: int
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return REJECT if self.estimate.ci95[1] > self.threshold else PASS

    def key_values(self) -> dict:
        e = self.estimate
        return {
            "app_id": self.app_id,
            "scenario": self.scenario_kind,
            "p_hat": e.p_hat,
            "std_err": e.std_err,
            "ci_lo": e.ci95[0],
            "ci_hi": e.ci95[1],
            "n": e.n,
            "hits": e.hits,
            "acceleration_factor": self.acceleration_factor if self.acceleration_factor is not None else "nan",
            "threshold": self.threshold,
            "episodes": self.episodes,
            "verdict": self.verdict,
        }

    def render(self) -> str:
        e = self.estimate
        lines = [
            f"dynamic-report {self.app_id}",
            f"scenario family {self.scenario_kind}, circumstances {','.join(self.circumstances)}, "
            f"{self.n_traces} matching traces",
            "nominal model:",
        ]
        lines += [f"  {k}: {_fmt_params(v)}" for k, v in self.nominal.to_dict().items()]
        lines.append(f"proposal after {self.proposal.iterations} cross-entropy iterations "
                     f"(levels {', '.join(f'{g:.4g}' for g in self.proposal.levels)}):")
        lines += [f"  {k}: {_fmt_params(v)}" for k, v in self.proposal.model.to_dict().items()]
        lines.append(f"crash probability {e.p_hat:.4g} (95% CI {e.ci95[0]:.4g} .. {e.ci95[1]:.4g}), "
                     f"{e.hits} hits in {e.n} importance samples")
        lines += [f"note: {n}" for n in self.notes]
        lines.append("[values]")
        lines += [f"{k}={_fmt_value(v)}" for k, v in self.key_values().items()]
        return "\n".join(lines) + "\n"


def _fmt_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _fmt_params(d: dict) -> str:
    return " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items())


def scenario_family(pkg) -> tuple[str, object]:
    """Path following for apps that ship a path and ignore lead vehicles,
    car following otherwise."""
    program = pkg.program
    if bus.LEAD_VEHICLE_REPORT not in program.handlers:
        for table in program.tables.values():
            if table.rows:
                return PATH, table.rows
    return CAR_FOLLOWING, None


def run_dynamic_vetting(pkg, traces, cfg: DynamicConfig | None = None) -> DynamicReport:
    cfg = cfg or DynamicConfig()
    circumstances = tuple(pkg.manifest.allowable_circumstances)
    records = select_traces(traces, circumstances)
    nominal = fit_model(records, cfg.bounds)
    kind, path = scenario_family(pkg)
    if kind == PATH:
        nominal = nominal.subset(("ego_speed",))
    ind = CrashIndicator([pkg], kind, nominal.fields, path=path, watchdog_enabled=cfg.watchdog_enabled,
                         dt=cfg.dt, seed=cfg.seed)
    proposal = cross_entropy_search(ind, nominal, cfg.ce_iters, cfg.ce_n, cfg.rho, seed=cfg.seed,
                                    min_scale_ratio=cfg.min_scale_ratio)
    est = is_estimate(ind, nominal, proposal, cfg.is_n, seed=cfg.seed + 1)
    notes = []
    try:
        factor = acceleration_factor(est, cfg.target_rel_err)
    except ZeroHits:
        factor = None
        notes.append("no crash was observed under the tilted proposal")
    if proposal.no_elite_progress:
        notes.append("cross-entropy search did not reach the crash level")
    return DynamicReport(pkg.manifest.app_id, kind, circumstances, len(records), nominal, proposal, est, factor,
                         cfg.threshold, ind.episodes, notes)


