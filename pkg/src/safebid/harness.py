"""End-to-end training loop: agents act, the filter projects, the market
clears, rewards flow back, learners update.

The environment clock never resets: episodes are contiguous 30-step blocks
of one long horizon, so the coverage window spans episode boundaries. All
randomness is derived from the master seed (per-purpose, per-unit child
streams plus a per-step demand stream), which makes every run byte
reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DemandConfig, ExperimentConfig, LearnerConfig, demand_band_limits
from .ddpg import (AgentBrain, Experience, Hyper, actor_update, critic_update,
                   make_brain, normalize_state, replay_push, replay_sample,
                   save_checkpoint, select_action, soft_update_targets)
from .errors import BadBand, InfeasibleDemand
from .market import MarketInstance, MarketOutcome, UnitParams, clear_market
from .qlearn import (QTable, discretize_state, epsilon_greedy_action, make_edges,
                     q_update, save_table)
from .safety import FilterConfig, SafetyState, advance_state, filter_project, fresh_state


def compute_reward(price: float, gen: float, unit: UnitParams, maint: int) -> float:
    """Market revenue minus generation cost minus maintenance charge."""
    return price * gen - unit.marginal_cost * gen - unit.maint_cost * maint


class DemandModel:
    """Sinusoid plus bounded uniform noise, clipped into the demand band.

    Each step draws from its own (seed, step)-derived stream, so the value
    at step t does not depend on how many draws happened before it.
    """

    _STREAM_TAG = 104729

    def __init__(self, demand: DemandConfig, units: list[UnitParams],
                 max_concurrent: int, seed: int):
        lo, hi = demand_band_limits(units, max_concurrent)
        if demand.low < lo or demand.high > hi:
            raise BadBand(
                f"band [{demand.low}, {demand.high}] exits feasible interval [{lo}, {hi}]"
            )
        self.demand = demand
        self.seed = seed

    def value(self, t: int) -> float:
        d = self.demand
        mid = 0.5 * (d.low + d.high)
        base = mid + d.amplitude * math.sin(2.0 * math.pi * (t - 1) / d.period)
        if d.noise > 0:
            rng = np.random.default_rng([self.seed, self._STREAM_TAG, t])
            base += rng.uniform(-d.noise, d.noise)
        return float(np.clip(base, d.low, d.high))


def demand_profile(t: int, cfg: ExperimentConfig, seed: int) -> float:
    """Demand at step t for the given config and seed (standalone form)."""
    return DemandModel(cfg.demand, cfg.units, cfg.max_concurrent, seed).value(t)


@dataclass
class StepRecord:
    episode: int
    t: int
    bids: np.ndarray
    u_request: np.ndarray
    u_applied: np.ndarray
    gen: np.ndarray
    rewards: np.ndarray
    price: float
    demand: float
    filter_distance: int
    demand_infeasible: bool = False   # ablation bookkeeping, not part of the trace schema


@dataclass
class World:
    cfg: ExperimentConfig
    fcfg: FilterConfig
    demand_model: DemandModel
    safety: SafetyState
    t: int = 0
    price: float = 0.0
    demand_prev: float = 0.0
    prev_gen: np.ndarray | None = None
    bypass_filter: bool = False

    def state(self) -> tuple[float, float]:
        return (self.price, self.demand_prev)


def make_world(cfg: ExperimentConfig, bypass_filter: bool = False) -> World:
    model = DemandModel(cfg.demand, cfg.units, cfg.max_concurrent, cfg.seed)
    prev = np.array([u.g_min for u in cfg.units]) if cfg.ramps_enabled else None
    return World(
        cfg=cfg,
        fcfg=cfg.filter_config(),
        demand_model=model,
        safety=fresh_state(cfg.n_units),
        t=0,
        price=min(u.marginal_cost for u in cfg.units),
        demand_prev=0.5 * (cfg.demand.low + cfg.demand.high),
        prev_gen=prev,
        bypass_filter=bypass_filter,
    )


def _curtailed_outcome(inst: MarketInstance) -> MarketOutcome:
    """Best-effort dispatch when unfiltered outages make demand unreachable:
    every operating unit runs flat out and the price sits at the highest
    operating offer (zero if nothing operates)."""
    operating = inst.maint == 0
    gen = np.where(operating, [u.g_max for u in inst.units], 0.0)
    offers = inst.offer_prices()
    price = float(offers[operating].max()) if operating.any() else 0.0
    return MarketOutcome(gen=gen, price=price, total_cost=float(offers @ gen))


def env_step(world: World, actions) -> tuple[tuple[float, float], np.ndarray, StepRecord]:
    """Execute one step: filter the joint request, clear the market, pay out.

    ``actions`` is one (maintenance request, bid multiplier) pair per unit.
    The returned state is (price, demand) of the step just executed.
    """
    cfg = world.cfg
    t = world.t + 1
    demand = world.demand_model.value(t)
    u_req = np.array([a[0] for a in actions], dtype=int)
    bids = np.array([a[1] for a in actions], dtype=float)

    if world.bypass_filter:
        u_exec = u_req.copy()
        distance = 0
    else:
        decision = filter_project(u_req, world.safety, world.fcfg)
        u_exec = decision.u_f
        distance = decision.distance

    inst = MarketInstance(
        units=cfg.units, bids=bids, maint=u_exec, demand=demand,
        prev_gen=world.prev_gen, ramps_enabled=cfg.ramps_enabled,
    )
    infeasible = False
    try:
        outcome = clear_market(inst)
    except InfeasibleDemand:
        if not world.bypass_filter:
            raise   # impossible under a validated band; treat as fatal config error
        outcome = _curtailed_outcome(inst)
        infeasible = True

    rewards = np.array([
        compute_reward(outcome.price, outcome.gen[i], cfg.units[i], int(u_exec[i]))
        for i in range(cfg.n_units)
    ])
    world.safety = advance_state(world.safety, u_exec, world.fcfg)
    world.t = t
    if cfg.ramps_enabled:
        world.prev_gen = outcome.gen.copy()
    next_state = (outcome.price, demand)
    world.price, world.demand_prev = next_state

    record = StepRecord(
        episode=(t - 1) // cfg.steps_per_episode + 1,
        t=t,
        bids=bids,
        u_request=u_req,
        u_applied=u_exec,
        gen=outcome.gen,
        rewards=rewards,
        price=outcome.price,
        demand=demand,
        filter_distance=distance,
        demand_infeasible=infeasible,
    )
    return next_state, rewards, record


# --- agents -------------------------------------------------------------------


def _linear(start: float, end: float, frac: float) -> float:
    return start + (end - start) * frac


class DdpgAgent:
    kind = "ddpg"

    def __init__(self, unit: UnitParams, lc: LearnerConfig, price_scale: float,
                 demand_scale: float, seed: int):
        names = {f.name for f in dataclasses.fields(Hyper)}
        self.hyper = Hyper(**{k: v for k, v in lc.params.items() if k in names})
        self.unit = unit
        init_rng = np.random.default_rng([seed, 11, unit.id])
        self.brain = make_brain(unit.k_max, price_scale, demand_scale, self.hyper, init_rng)
        self.noise_rng = np.random.default_rng([seed, 12, unit.id])
        self.sample_rng = np.random.default_rng([seed, 13, unit.id])

    def act(self, state: tuple[float, float], explore: bool, frac: float) -> tuple[int, float]:
        self.brain.sigma = _linear(self.hyper.sigma_start, self.hyper.sigma_end, frac)
        s = normalize_state(self.brain, *state)
        return select_action(self.brain, s, explore=explore, rng=self.noise_rng)

    def observe(self, state, action, reward, next_state) -> None:
        s = tuple(normalize_state(self.brain, *state))
        s2 = tuple(normalize_state(self.brain, *next_state))
        replay_push(self.brain, Experience(state=s, next_state=s2,
                                           action=(int(action[0]), float(action[1])),
                                           reward=float(reward)))

    def update(self) -> None:
        if len(self.brain.buffer) < self.hyper.batch_size:
            return
        batch = replay_sample(self.brain, self.hyper.batch_size, self.sample_rng)
        critic_update(self.brain, batch)
        actor_update(self.brain, batch)
        soft_update_targets(self.brain)

    def save(self, path: Path) -> Path:
        out = path / f"unit_{self.unit.id}_ddpg.npz"
        save_checkpoint(self.brain, out)
        return out


class QAgent:
    kind = "qlearn"

    def __init__(self, unit: UnitParams, lc: LearnerConfig, price_scale: float,
                 demand_scale: float, seed: int, price_band: tuple[float, float],
                 demand_band: tuple[float, float]):
        p = lc.params
        self.unit = unit
        self.price_scale = price_scale
        self.demand_scale = demand_scale
        self.eps_start = p["epsilon_start"]
        self.eps_end = p["epsilon_end"]
        self.table = QTable(
            price_edges=make_edges(price_band[0] / price_scale, price_band[1] / price_scale,
                                   p["price_bins"]),
            demand_edges=make_edges(demand_band[0] / demand_scale, demand_band[1] / demand_scale,
                                    p["demand_bins"]),
            bid_levels=tuple(p["bid_levels"]),
            alpha=p["alpha"],
            gamma=p["gamma"],
            epsilon=p["epsilon_start"],
        )
        self.rng = np.random.default_rng([seed, 21, unit.id])

    def _index(self, state) -> int:
        return discretize_state(self.table, state[0] / self.price_scale,
                                state[1] / self.demand_scale)

    def act(self, state, explore: bool, frac: float) -> tuple[int, float]:
        eps = _linear(self.eps_start, self.eps_end, frac) if explore else 0.0
        self.table.epsilon = eps
        a = epsilon_greedy_action(self.table, self._index(state), eps, self.rng)
        self._last_action = a
        u, k = self.table.action_pair(a)
        return u, k

    def observe(self, state, action, reward, next_state) -> None:
        q_update(self.table, self._index(state), self._last_action, float(reward),
                 self._index(next_state))

    def update(self) -> None:
        pass   # tabular learning happens in observe

    def save(self, path: Path) -> Path:
        out = path / f"unit_{self.unit.id}_qtable.txt"
        save_table(self.table, out)
        return out


def make_agents(cfg: ExperimentConfig):
    price_scale = max(u.k_max * u.marginal_cost for u in cfg.units)
    demand_scale = sum(u.g_max for u in cfg.units)
    price_band = (min(u.marginal_cost for u in cfg.units), price_scale)
    demand_band = (cfg.demand.low, cfg.demand.high)
    agents = []
    for unit, lc in zip(cfg.units, cfg.learners):
        if lc.kind == "ddpg":
            agents.append(DdpgAgent(unit, lc, price_scale, demand_scale, cfg.seed))
        else:
            agents.append(QAgent(unit, lc, price_scale, demand_scale, cfg.seed,
                                 price_band, demand_band))
    return agents


# --- full runs ------------------------------------------------------------------


@dataclass
class RunResult:
    cfg: ExperimentConfig
    records: list[StepRecord]
    episodes: np.ndarray            # 1..M
    avg_reward: np.ndarray          # episodes x units
    sum_avg_reward: np.ndarray      # episodes
    mean_bid: np.ndarray            # episodes x units
    total_maint_cost: np.ndarray    # episodes
    raster: np.ndarray              # steps x units, executed maintenance
    agents: list = field(default_factory=list)
    violations: dict | None = None  # ablation only


def _summarize(cfg: ExperimentConfig, records: list[StepRecord], agents,
               violations=None) -> RunResult:
    n, eps, spe = cfg.n_units, cfg.episodes, cfg.steps_per_episode
    rewards = np.array([r.rewards for r in records]).reshape(eps, spe, n)
    bids = np.array([r.bids for r in records]).reshape(eps, spe, n)
    applied = np.array([r.u_applied for r in records])
    costs = np.array([u.maint_cost for u in cfg.units])
    avg_reward = rewards.mean(axis=1)
    return RunResult(
        cfg=cfg,
        records=records,
        episodes=np.arange(1, eps + 1),
        avg_reward=avg_reward,
        sum_avg_reward=avg_reward.sum(axis=1),
        mean_bid=bids.mean(axis=1),
        total_maint_cost=(applied.reshape(eps, spe, n) * costs).sum(axis=(1, 2)),
        raster=applied,
        agents=agents,
        violations=violations,
    )


def run_training(cfg: ExperimentConfig, *, explore: bool = True) -> RunResult:
    """Full nested episode/step loop with per-step learner updates."""
    world = make_world(cfg)
    agents = make_agents(cfg)
    return _run_loop(cfg, world, agents, explore)


def run_unsafe_ablation(cfg: ExperimentConfig, *, explore: bool = True) -> RunResult:
    """Same loop with the filter bypassed; violations are recorded, not prevented."""
    world = make_world(cfg, bypass_filter=True)
    agents = make_agents(cfg)
    result = _run_loop(cfg, world, agents, explore)
    from .safety import schedule_violations

    audit = schedule_violations(result.raster, cfg.filter_config())
    infeasible_steps = [r.t for r in result.records if r.demand_infeasible]
    coverage_steps = sorted({t for _, t in audit["coverage"]})
    result.violations = {
        "over_cap_steps": audit["over_cap"],
        "coverage_short": audit["coverage"],
        "coverage_steps": coverage_steps,
        "short_blocks": audit["short_blocks"],
        "demand_infeasible_steps": infeasible_steps,
    }
    return result


def _run_loop(cfg: ExperimentConfig, world: World, agents, explore: bool) -> RunResult:
    total = cfg.horizon
    records: list[StepRecord] = []
    state = world.state()
    for _episode in range(1, cfg.episodes + 1):
        for _ in range(cfg.steps_per_episode):
            frac = world.t / (total - 1) if total > 1 else 0.0
            actions = [agent.act(state, explore, frac) for agent in agents]
            next_state, rewards, record = env_step(world, actions)
            for i, (agent, reward) in enumerate(zip(agents, rewards)):
                # the executed decision replaces the request before clearing,
                # so that is the action the transition carries
                executed = (int(record.u_applied[i]), actions[i][1])
                agent.observe(state, executed, reward, next_state)
            for agent in agents:
                agent.update()
            records.append(record)
            state = next_state
    return _summarize(cfg, records, agents,
                      violations=None)


# --- delimited outputs ----------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_run_outputs(result: RunResult, out_dir) -> dict[str, Path]:
    """Emit the run's delimited artifacts and checkpoints; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.cfg
    n = cfg.n_units
    ids = [u.id for u in cfg.units]
    paths = {}

    header = (["episode", "sum_avg_reward"]
              + [f"avg_reward_{i}" for i in ids]
              + [f"mean_bid_{i}" for i in ids]
              + ["total_maint_cost"])
    rows = [
        [int(e), result.sum_avg_reward[j], *result.avg_reward[j], *result.mean_bid[j],
         result.total_maint_cost[j]]
        for j, e in enumerate(result.episodes)
    ]
    paths["metrics"] = out / "metrics_episode.csv"
    _write_csv(paths["metrics"], header, rows)

    header = (["episode", "t"]
              + [f"k_{i}" for i in ids]
              + [f"u_req_{i}" for i in ids]
              + [f"u_f_{i}" for i in ids]
              + [f"g_{i}" for i in ids]
              + [f"r_{i}" for i in ids]
              + ["price", "demand", "filter_distance"])
    rows = [
        [r.episode, r.t, *r.bids, *r.u_request, *r.u_applied, *r.gen, *r.rewards,
         r.price, r.demand, r.filter_distance]
        for r in result.records
    ]
    paths["trace"] = out / "trace_steps.csv"
    _write_csv(paths["trace"], header, rows)

    header = ["day"] + [f"unit_{i}" for i in ids]
    rows = [[t + 1, *result.raster[t]] for t in range(result.raster.shape[0])]
    paths["raster"] = out / "maintenance_raster.csv"
    _write_csv(paths["raster"], header, rows)

    if result.violations is not None:
        over = set(result.violations["over_cap_steps"])
        cov = {}
        for i, t in result.violations["coverage_short"]:
            cov[t] = cov.get(t, 0) + 1
        infeasible = set(result.violations["demand_infeasible_steps"])
        header = ["t", "over_cap", "coverage_short_units", "demand_infeasible"]
        rows = [
            [t, 1 if t in over else 0, cov.get(t, 0), 1 if t in infeasible else 0]
            for t in range(1, result.raster.shape[0] + 1)
        ]
        paths["violations"] = out / "violations.csv"
        _write_csv(paths["violations"], header, rows)

    ck_dir = out / "checkpoints"
    ck_dir.mkdir(exist_ok=True)
    for agent in result.agents:
        agent.save(ck_dir)
    return paths
