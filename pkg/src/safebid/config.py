"""Experiment configuration: strict JSON parsing and the bundled defaults.

The config file is plain JSON. Unknown keys anywhere are rejected;
missing optional keys take the documented defaults. The bundled default
describes the six-unit case-study fleet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParseError, ValidationError
from .market import UnitParams
from .safety import FilterConfig

DEFAULT_BID_LEVELS = (1.0, 1.25, 1.5, 1.75, 2.0)

_UNIT_KEYS = {
    "id": None,
    "marginal_cost": None,
    "g_max": None,
    "g_min": 5.0,
    "ramp_up": float("inf"),
    "ramp_down": float("inf"),
    "maint_cost": None,
    "maint_block": 1,
    "maint_required": 1,
    "k_max": 2.0,
}

_DEMAND_KEYS = {
    "low": 60.0,
    "high": 160.0,
    "period": 30,
    "amplitude": 40.0,
    "noise": 10.0,
}

_FILTER_KEYS = {
    "mode": "intent",
    "max_concurrent": 2,
    "window": 100,
}

_LEARNER_KEYS = {
    "kind": "ddpg",
    # shared
    "gamma": 0.95,
    # ddpg
    "lr_critic": 2e-3,
    "lr_actor": 2e-2,
    "tau_critic": 0.99,
    "tau_actor": 0.99,
    "batch_size": 100,
    "buffer_capacity": 10_000,
    "hidden": 64,
    "sigma_start": 0.3,
    "sigma_end": 0.02,
    "reward_scale": 1e-2,
    "init": "fan_in",
    # tabular
    "alpha": 0.1,
    "epsilon_start": 0.3,
    "epsilon_end": 0.02,
    "price_bins": 10,
    "demand_bins": 10,
    "bid_levels": list(DEFAULT_BID_LEVELS),
}

_TOP_KEYS = {
    "seed": 0,
    "episodes": 100,
    "steps_per_episode": 30,
    "out_dir": "runs/out",
    "ramps_enabled": False,
    "units": None,
    "demand": {},
    "filter": {},
    "learner": {},
    "learner_overrides": {},
}


@dataclass(frozen=True)
class DemandConfig:
    low: float = 60.0
    high: float = 160.0
    period: int = 30
    amplitude: float = 40.0
    noise: float = 10.0


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "ddpg"
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    units: list[UnitParams]
    episodes: int = 100
    steps_per_episode: int = 30
    demand: DemandConfig = field(default_factory=DemandConfig)
    filter_mode: str = "intent"
    max_concurrent: int = 2
    window: int = 100
    learners: list[LearnerConfig] = field(default_factory=list)
    seed: int = 0
    out_dir: str = "runs/out"
    ramps_enabled: bool = False

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def horizon(self) -> int:
        return self.episodes * self.steps_per_episode

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            n_units=self.n_units,
            max_concurrent=self.max_concurrent,
            window=self.window,
            min_block=tuple(u.maint_block for u in self.units),
            required_days=tuple(u.maint_required for u in self.units),
            horizon=self.horizon,
            mode=self.filter_mode,
        )


def demand_band_limits(units: list[UnitParams], max_concurrent: int) -> tuple[float, float]:
    """Feasible demand interval: all-units minimum output up to the worst-case
    available capacity with the ``max_concurrent`` largest units out."""
    lo = sum(u.g_min for u in units)
    caps = sorted((u.g_max for u in units), reverse=True)
    hi = sum(caps) - sum(caps[:max_concurrent])
    return lo, hi


def _merge(section: str, raw: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for key, val in raw.items():
        if key not in defaults:
            raise ParseError(f"unknown key '{section}{key}'")
        out[key] = val
    missing = [k for k, v in out.items() if v is None]
    if missing:
        raise ParseError(f"missing required key(s) {missing} in '{section.rstrip('.') or 'top level'}'")
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config from a parsed JSON object."""
    if not isinstance(raw, dict):
        raise ParseError("config root must be an object")
    top = _merge("", raw, _TOP_KEYS)
    if not isinstance(top["units"], list) or not top["units"]:
        raise ParseError("'units' must be a non-empty list")
    units = []
    for j, u_raw in enumerate(top["units"]):
        u = _merge(f"units[{j}].", u_raw, _UNIT_KEYS)
        u["ramp_up"] = float("inf") if u["ramp_up"] is None else u["ramp_up"]
        units.append(UnitParams(
            id=int(u["id"]), marginal_cost=float(u["marginal_cost"]),
            g_max=float(u["g_max"]), g_min=float(u["g_min"]),
            ramp_up=float(u["ramp_up"]), ramp_down=float(u["ramp_down"]),
            maint_cost=float(u["maint_cost"]), maint_block=int(u["maint_block"]),
            maint_required=int(u["maint_required"]), k_max=float(u["k_max"]),
        ))
    demand = DemandConfig(**{k: (int(v) if k == "period" else float(v))
                             for k, v in _merge("demand.", top["demand"], _DEMAND_KEYS).items()})
    filt = _merge("filter.", top["filter"], _FILTER_KEYS)
    learner = _merge("learner.", top["learner"], _LEARNER_KEYS)
    overrides = top["learner_overrides"]
    if not isinstance(overrides, dict):
        raise ParseError("'learner_overrides' must be an object keyed by unit id")
    learners = []
    for u in units:
        params = dict(learner)
        ov = overrides.get(str(u.id), {})
        params.update(_merge(f"learner_overrides.{u.id}.", ov, learner))
        kind = params.pop("kind")
        learners.append(LearnerConfig(kind=kind, params=params))

    cfg = ExperimentConfig(
        units=units,
        episodes=int(top["episodes"]),
        steps_per_episode=int(top["steps_per_episode"]),
        demand=demand,
        filter_mode=str(filt["mode"]),
        max_concurrent=int(filt["max_concurrent"]),
        window=int(filt["window"]),
        learners=learners,
        seed=int(top["seed"]),
        out_dir=str(top["out_dir"]),
        ramps_enabled=bool(top["ramps_enabled"]),
    )
    violations = validate_config(cfg)
    if violations:
        raise ValidationError(violations)
    return cfg


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Structural invariants; returns the list of violations (empty = valid)."""
    bad = []
    if cfg.episodes < 1:
        bad.append("episodes must be >= 1")
    if cfg.steps_per_episode < 1:
        bad.append("steps_per_episode must be >= 1")
    for u in cfg.units:
        bad.extend(u.check())
    ids = [u.id for u in cfg.units]
    if len(set(ids)) != len(ids):
        bad.append("unit ids must be unique")
    n = cfg.n_units
    if not 1 <= cfg.max_concurrent <= n:
        bad.append(f"max_concurrent {cfg.max_concurrent} outside [1, {n}]")
    for u in cfg.units:
        if u.maint_required > cfg.window:
            bad.append(f"unit {u.id}: maint_required {u.maint_required} exceeds window {cfg.window}")
        if u.maint_block > cfg.window:
            bad.append(f"unit {u.id}: maint_block {u.maint_block} exceeds window {cfg.window}")
    if cfg.filter_mode not in ("intent", "literal"):
        bad.append(f"filter mode {cfg.filter_mode!r} not one of intent, literal")
    lo, hi = demand_band_limits(cfg.units, cfg.max_concurrent)
    if cfg.demand.low < lo or cfg.demand.high > hi:
        bad.append(f"demand band [{cfg.demand.low}, {cfg.demand.high}] exits the "
                   f"feasible interval [{lo}, {hi}]")
    if cfg.demand.low > cfg.demand.high:
        bad.append("demand band low exceeds high")
    for u, lc in zip(cfg.units, cfg.learners):
        if lc.kind not in ("ddpg", "qlearn"):
            bad.append(f"learner kind {lc.kind!r} not one of ddpg, qlearn")
        if not 0 <= lc.params["gamma"] < 1:
            bad.append("gamma must lie in [0, 1)")
        if lc.params["init"] not in ("fan_in", "uniform", "wide"):
            bad.append(f"init {lc.params['init']!r} not one of fan_in, uniform, wide")
        if lc.kind == "qlearn":
            for level in lc.params["bid_levels"]:
                if not 1.0 <= level <= u.k_max:
                    bad.append(f"unit {u.id}: bid level {level} outside [1, {u.k_max}]")
    return bad


def parse_config(path) -> ExperimentConfig:
    """Load, strictly parse, and validate a JSON config file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return config_from_dict(raw)


def default_config() -> ExperimentConfig:
    """The bundled six-unit fleet and case-study settings."""
    with resources.files("safebid.data").joinpath("default_config.json").open() as fh:
        return config_from_dict(json.load(fh))
