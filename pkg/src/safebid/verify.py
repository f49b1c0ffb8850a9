"""Self-check suite behind the ``verify`` CLI subcommand.

Each check returns (name, passed, detail). The random-instance generators
here are also used by the test suite.
"""

from __future__ import annotations

import numpy as np

from .ddpg import Experience, Hyper, ReplayBuffer, make_brain, select_action
from .errors import NoFeasibleCompletion
from .market import (MarketInstance, UnitParams, clear_market, lp_dispatch_oracle,
                     merit_order_conditions)
from .milp import z_interval
from .nn import MlpParams, init_mlp, mlp_forward, mlp_gradients, soft_update
from .safety import (FilterConfig, SafetyState, UnitSafety, advance_state,
                     brute_force_filter_oracle, filter_project, fresh_state)

COST_TOL = 1e-9


def random_market_instance(rng: np.random.Generator, n_max: int = 6,
                           allow_ramps: bool = True) -> MarketInstance:
    """Random feasible clearing instance, biased toward ties and edge demands."""
    n = int(rng.integers(2, n_max + 1))
    costs = []
    for _ in range(n):
        if costs and rng.random() < 0.3:
            costs.append(costs[int(rng.integers(0, len(costs)))])  # force ties
        else:
            costs.append(round(float(rng.uniform(0.5, 4.0)), 2))
    units = []
    for i, c in enumerate(costs):
        g_min = round(float(rng.uniform(0.0, 10.0)), 1)
        g_max = g_min + round(float(rng.uniform(5.0, 95.0)), 1)
        units.append(UnitParams(
            id=i + 1, marginal_cost=c, g_max=g_max, g_min=g_min,
            ramp_up=float(rng.uniform(5.0, 60.0)), ramp_down=float(rng.uniform(5.0, 60.0)),
            maint_cost=float(rng.uniform(50.0, 200.0)),
        ))
    maint = (rng.random(n) < 0.2).astype(int)
    if maint.all():
        maint[int(rng.integers(0, n))] = 0
    bids = rng.uniform(1.0, 2.0, size=n)
    ramps = bool(allow_ramps and rng.random() < 0.5)
    prev = None
    if ramps:
        prev = np.array([
            float(rng.uniform(0.0, min(u.ramp_down, u.g_max))) if m
            else float(rng.uniform(u.g_min, u.g_max))
            for u, m in zip(units, maint)
        ])
    inst = MarketInstance(units=units, bids=bids, maint=maint, demand=0.0,
                          prev_gen=prev, ramps_enabled=ramps)
    from .market import effective_bounds

    lo, hi = effective_bounds(inst)
    roll = rng.random()
    if roll < 0.1:
        inst.demand = float(lo.sum())
    elif roll < 0.2:
        inst.demand = float(hi.sum())
    else:
        inst.demand = float(lo.sum() + rng.random() * (hi.sum() - lo.sum()))
    return inst


def random_filter_case(rng: np.random.Generator):
    """Small (request, state, cfg) triple within the enumeration oracle's bounds."""
    while True:
        n = int(rng.integers(2, 4))
        window = int(rng.integers(2, 9))
        horizon = int(rng.integers(2, 9))
        min_block = tuple(int(rng.integers(1, min(2, window) + 1)) for _ in range(n))
        required = tuple(int(rng.integers(1, min(2, window) + 1)) for _ in range(n))
        mode = "literal" if rng.random() < 0.25 else "intent"
        cfg = FilterConfig(
            n_units=n, max_concurrent=int(rng.integers(1, n + 1)), window=window,
            min_block=min_block, required_days=required, horizon=horizon, mode=mode,
        )
        state = fresh_state(n)
        for _ in range(int(rng.integers(0, 4))):
            if state.t >= horizon - 1:
                break
            row = rng.integers(0, 2, size=n)
            for i in range(n):   # respect in-progress blocks
                if 0 < state.units[i].run_length < cfg.min_block[i]:
                    row[i] = 1
            while row.sum() > cfg.max_concurrent:
                ones = np.nonzero(row)[0]
                free = [i for i in ones if not 0 < state.units[i].run_length < cfg.min_block[i]]
                if not free:
                    break
                row[free[-1]] = 0
            state = advance_state(state, row, cfg)
        if state.t >= horizon:
            continue
        request = rng.integers(0, 2, size=n)
        return request, state, cfg


def _instances_agree(rng, count):
    worst = 0.0
    for _ in range(count):
        inst = random_market_instance(rng)
        fast = clear_market(inst)
        slow = lp_dispatch_oracle(inst)
        worst = max(worst, abs(fast.total_cost - slow.total_cost))
        if abs(fast.total_cost - slow.total_cost) > COST_TOL:
            return False, f"cost gap {abs(fast.total_cost - slow.total_cost):.3e}"
        bad = merit_order_conditions(inst, fast)
        if bad:
            return False, f"merit-order conditions violated: {bad[0]}"
    return True, f"max cost gap {worst:.3e} over {count} instances"


def check_dispatch_oracle(rng: np.random.Generator, count: int = 200):
    ok, detail = _instances_agree(rng, count)
    return "dispatch-oracle-equivalence", ok, detail


def check_filter_oracle(rng: np.random.Generator, count: int = 60):
    for j in range(count):
        request, state, cfg = random_filter_case(rng)
        try:
            fast = filter_project(request, state, cfg)
            fast_result = (fast.distance, tuple(fast.u_f))
        except NoFeasibleCompletion:
            fast_result = None
        try:
            slow = brute_force_filter_oracle(request, state, cfg)
            slow_result = (slow.distance, tuple(slow.u_f))
        except NoFeasibleCompletion:
            slow_result = None
        if fast_result != slow_result:
            return ("filter-oracle-agreement", False,
                    f"case {j}: filter {fast_result} vs oracle {slow_result}")
    return "filter-oracle-agreement", True, f"{count} cases agree"


def check_big_m(x_max: int = 100, big_m: float = 1000.0):
    for u in (0, 1):
        for x in range(x_max + 1):
            lo, hi = z_interval(u, x, big_m)
            want = float(u * x)
            if not (abs(lo - want) < 1e-12 and abs(hi - want) < 1e-12):
                return ("big-m-exactness", False,
                        f"(u={u}, x={x}) admits z in [{lo}, {hi}], expected {{{want}}}")
    return "big-m-exactness", True, f"exact for u in {{0,1}}, x in 0..{x_max}"


def gradient_gap(p: MlpParams, x: np.ndarray, upstream: np.ndarray, h: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    grads, _ = mlp_gradients(p, x, upstream)
    flat = p.ravel()
    analytic = grads.ravel()

    def value(vec):
        return float(np.sum(upstream * mlp_forward(p.with_ravel(vec), x)))

    worst = 0.0
    for j in range(flat.size):
        e = np.zeros_like(flat)
        e[j] = h
        num = (value(flat + e) - value(flat - e)) / (2 * h)
        denom = max(1.0, abs(num), abs(analytic[j]))
        worst = max(worst, abs(num - analytic[j]) / denom)
    return worst


def _safe_random_net(sizes, rng):
    """Random network/input pair with pre-activations clear of the rectifier kink."""
    while True:
        p = init_mlp(sizes, rng, -1.0, 1.0)
        x = rng.uniform(-1.0, 1.0, size=sizes[0])
        pre, _, _ = _forward_pre(p, x)
        if min(np.abs(z).min() for z in pre) > 5e-4:
            return p, x


def _forward_pre(p, x):
    from .nn import _forward_cache

    return _forward_cache(p, x)


def check_gradients(rng: np.random.Generator, count: int = 20, tol: float = 1e-5):
    worst = 0.0
    for shape in ((2, 5, 4, 2), (4, 5, 4, 1)):   # actor-like and critic-like
        for _ in range(count):
            p, x = _safe_random_net(shape, rng)
            upstream = rng.uniform(-1.0, 1.0, size=shape[-1])
            worst = max(worst, gradient_gap(p, x, upstream))
            if worst > tol:
                return "gradient-check", False, f"relative error {worst:.2e} > {tol}"
    return "gradient-check", True, f"worst relative error {worst:.2e}"


def check_soft_update(rng: np.random.Generator):
    p = init_mlp((3, 4, 4, 2), rng)
    q = init_mlp((3, 4, 4, 2), rng)
    for tau in (0.0, 0.25, 1.0):
        blended = soft_update(p, q, tau)
        for bw, tw, nw in zip(p.weights, q.weights, blended.weights):
            if not np.array_equal(nw, (1.0 - tau) * bw + tau * tw):
                return "soft-update-algebra", False, f"mismatch at tau={tau}"
    return "soft-update-algebra", True, "exact for tau in {0, 0.25, 1}"


def check_state_recursion(rng: np.random.Generator, trials: int = 50):
    """The stored idle counter must follow x' = (1 - u) (x + 1) exactly."""
    cfg = FilterConfig(n_units=1, max_concurrent=1, window=6, min_block=(1,),
                       required_days=(1,), horizon=10_000)
    for _ in range(trials):
        state = fresh_state(1)
        x = 0
        for _ in range(int(rng.integers(1, 30))):
            u = int(rng.integers(0, 2))
            state = advance_state(state, [u], cfg)
            x = (1 - u) * (x + 1)
            if state.since_maint(0) != x:
                return ("idle-counter-recursion", False,
                        f"counter {state.since_maint(0)} != recursion {x}")
    return "idle-counter-recursion", True, f"{trials} random sequences match"


def check_action_bounds(rng: np.random.Generator, trials: int = 200):
    brain = make_brain(2.0, 6.5, 335.0, Hyper(hidden=8), rng)
    for _ in range(trials):
        s = rng.uniform(-2.0, 2.0, size=2)
        u, k = select_action(brain, s, explore=True, rng=rng, sigma=3.0)
        if u not in (0, 1) or not 1.0 <= k <= 2.0:
            return "action-bounds", False, f"emitted (u={u}, k={k})"
    return "action-bounds", True, f"{trials} noisy actions inside bounds"


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    return [
        check_dispatch_oracle(np.random.default_rng([seed, 1])),
        check_filter_oracle(np.random.default_rng([seed, 2])),
        check_big_m(),
        check_gradients(np.random.default_rng([seed, 3])),
        check_soft_update(np.random.default_rng([seed, 4])),
        check_state_recursion(np.random.default_rng([seed, 5])),
        check_action_bounds(np.random.default_rng([seed, 6])),
    ]
