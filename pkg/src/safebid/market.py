"""Single-step market clearing with uniform pricing.

The operator picks the cheapest dispatch that balances demand, given each
unit's offered price (bid multiplier times marginal cost), maintenance
outages, power bounds, and optional ramp limits against the previous
dispatch. The market price is the dual of the balance constraint, i.e. the
offered price of the marginal unit.

Tie-break and degenerate-price rules are part of the contract:

* units with equal offered price are dispatched in ascending unit-index
  order;
* if demand equals the sum of operating minimums the price is the minimum
  offer among operating units; if it equals the sum of maximums, the
  maximum offer.

``clear_market`` is the production path (merit-order fill, exact for this
box-constrained problem); ``lp_dispatch_oracle`` re-solves the same LP with
an independent solver and is meant for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, InfeasibleDemand

BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class UnitParams:
    """Static parameters of one generation unit."""

    id: int
    marginal_cost: float          # money per MWh
    g_max: float                  # MW
    g_min: float                  # MW
    ramp_up: float = float("inf")     # MW per step
    ramp_down: float = float("inf")   # MW per step
    maint_cost: float = 0.0       # money per maintenance step
    maint_block: int = 1          # minimum block length, steps
    maint_required: int = 1       # required maintenance steps per window
    k_max: float = 2.0            # bid multiplier cap, >= 1

    def check(self) -> list[str]:
        """Return a list of violated parameter invariants (empty if valid)."""
        bad = []
        if not 0 <= self.g_min <= self.g_max:
            bad.append(f"unit {self.id}: need 0 <= g_min <= g_max, got [{self.g_min}, {self.g_max}]")
        if not self.marginal_cost > 0:
            bad.append(f"unit {self.id}: marginal_cost must be positive")
        if self.maint_cost < 0:
            bad.append(f"unit {self.id}: maint_cost must be nonnegative")
        if self.maint_block < 1:
            bad.append(f"unit {self.id}: maint_block must be >= 1")
        if self.maint_required < 1:
            bad.append(f"unit {self.id}: maint_required must be >= 1")
        if self.k_max < 1:
            bad.append(f"unit {self.id}: k_max must be >= 1")
        if self.ramp_up < 0 or self.ramp_down < 0:
            bad.append(f"unit {self.id}: ramp limits must be nonnegative")
        return bad


@dataclass
class MarketInstance:
    """One clearing problem: fleet, bids, outages, demand, optional ramps."""

    units: list[UnitParams]
    bids: np.ndarray              # multiplier k_i in [1, k_max]
    maint: np.ndarray             # 1 = unit in maintenance
    demand: float                 # MW
    prev_gen: np.ndarray | None = None
    ramps_enabled: bool = False

    def __post_init__(self):
        self.bids = np.asarray(self.bids, dtype=float)
        self.maint = np.asarray(self.maint, dtype=int)
        if self.prev_gen is not None:
            self.prev_gen = np.asarray(self.prev_gen, dtype=float)

    @property
    def n(self) -> int:
        return len(self.units)

    def offer_prices(self) -> np.ndarray:
        """Effective offered price per unit: bid multiplier times marginal cost."""
        costs = np.array([u.marginal_cost for u in self.units])
        return self.bids * costs


@dataclass
class MarketOutcome:
    gen: np.ndarray               # MW per unit
    price: float                  # money per MWh, dual of the balance constraint
    total_cost: float             # bid-weighted dispatch cost (the LP objective)
    bounds: tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)


def _check_dims(inst: MarketInstance) -> None:
    n = inst.n
    if inst.bids.shape != (n,):
        raise DimensionMismatch(f"bids has shape {inst.bids.shape}, expected ({n},)")
    if inst.maint.shape != (n,):
        raise DimensionMismatch(f"maint has shape {inst.maint.shape}, expected ({n},)")
    if inst.prev_gen is not None and inst.prev_gen.shape != (n,):
        raise DimensionMismatch(f"prev_gen has shape {inst.prev_gen.shape}, expected ({n},)")


def effective_bounds(inst: MarketInstance) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit dispatch box after masking outages and folding ramp limits.

    A unit in maintenance is pinned to zero output. With ramps enabled the
    box tightens to what the unit can reach from ``prev_gen`` in one step;
    an empty box means the instance is infeasible.
    """
    _check_dims(inst)
    operating = 1 - inst.maint
    lo = operating * np.array([u.g_min for u in inst.units], dtype=float)
    hi = operating * np.array([u.g_max for u in inst.units], dtype=float)
    if inst.ramps_enabled:
        if inst.prev_gen is None:
            raise DimensionMismatch("ramps_enabled requires prev_gen")
        ru = np.array([u.ramp_up for u in inst.units])
        rd = np.array([u.ramp_down for u in inst.units])
        lo = np.maximum(lo, inst.prev_gen - rd)
        hi = np.minimum(hi, inst.prev_gen + ru)
        lo = np.maximum(lo, 0.0)
    if np.any(lo > hi + BALANCE_TOL):
        bad = int(np.argmax(lo > hi + BALANCE_TOL))
        raise InfeasibleDemand(
            f"unit {inst.units[bad].id} has empty dispatch range "
            f"[{lo[bad]}, {hi[bad]}] under ramp/outage constraints"
        )
    return lo, np.maximum(hi, lo)


def validate_instance(inst: MarketInstance) -> list[str]:
    """Structural validity report; empty list iff the instance is well-formed."""
    report = []
    n = inst.n
    if n == 0:
        report.append("instance has no units")
    for u in inst.units:
        report.extend(u.check())
    for name, vec, length in (
        ("bids", inst.bids, n),
        ("maint", inst.maint, n),
        ("prev_gen", inst.prev_gen, n),
    ):
        if vec is None:
            continue
        if np.asarray(vec).shape != (length,):
            report.append(f"{name} has length {np.asarray(vec).size}, expected {length}")
    if inst.bids.shape == (n,):
        for u, k in zip(inst.units, inst.bids):
            if not 1.0 <= k <= u.k_max:
                report.append(f"unit {u.id}: bid multiplier {k} outside [1, {u.k_max}]")
    if inst.maint.shape == (n,) and not np.isin(inst.maint, (0, 1)).all():
        report.append("maint vector must be binary")
    if inst.ramps_enabled and inst.prev_gen is None:
        report.append("ramps_enabled requires prev_gen")
    if inst.demand < 0:
        report.append(f"demand {inst.demand} is negative")
    return report


def _check_feasible(inst: MarketInstance, lo: np.ndarray, hi: np.ndarray) -> None:
    if inst.demand < lo.sum() - BALANCE_TOL or inst.demand > hi.sum() + BALANCE_TOL:
        raise InfeasibleDemand(
            f"demand {inst.demand} outside reachable range [{lo.sum()}, {hi.sum()}]"
        )


def clear_market(inst: MarketInstance) -> MarketOutcome:
    """Cost-minimal dispatch meeting demand, plus the uniform clearing price.

    Merit-order fill: every operating unit starts at its effective lower
    bound; the remainder is assigned in ascending offer order (ties by
    ascending unit index). The price is the offer of the last unit that
    received an increment; the degenerate all-at-minimum / all-at-maximum
    cases use the documented endpoint rules.
    """
    lo, hi = effective_bounds(inst)
    _check_feasible(inst, lo, hi)
    offers = inst.offer_prices()
    operating = inst.maint == 0

    gen = lo.copy()
    remaining = inst.demand - lo.sum()

    if not operating.any():
        # only reachable when demand is ~0 and every unit is out
        return MarketOutcome(gen=gen, price=0.0, total_cost=0.0, bounds=(lo, hi))

    op_offers = offers[operating]
    if remaining <= BALANCE_TOL:
        # demand equals the sum of minimums: dual is an interval, pick the
        # merit-order-consistent lower endpoint
        return MarketOutcome(
            gen=gen, price=float(op_offers.min()),
            total_cost=float(offers @ gen), bounds=(lo, hi),
        )

    order = sorted(np.nonzero(operating)[0], key=lambda i: (offers[i], inst.units[i].id))
    price = None
    for i in order:
        if remaining <= 0.0:
            break
        step = min(hi[i] - lo[i], remaining)
        if step > 0.0:
            gen[i] += step
            remaining -= step
            price = float(offers[i])
    if price is None:
        price = float(op_offers.min())
    if abs(inst.demand - hi.sum()) <= BALANCE_TOL:
        price = float(op_offers.max())
    return MarketOutcome(gen=gen, price=price, total_cost=float(offers @ gen), bounds=(lo, hi))


def lp_dispatch_oracle(inst: MarketInstance) -> MarketOutcome:
    """Independent LP solution of the same clearing problem (test oracle).

    Delegates to scipy's HiGHS simplex; the balance dual comes from the
    solver. Intended for small fleets in tests, not the simulation path.
    """
    lo, hi = effective_bounds(inst)
    _check_feasible(inst, lo, hi)
    offers = inst.offer_prices()
    res = linprog(
        c=offers,
        A_eq=np.ones((1, inst.n)),
        b_eq=[inst.demand],
        bounds=list(zip(lo, hi)),
        method="highs",
    )
    if not res.success:
        raise InfeasibleDemand(f"LP solver reports status {res.status}: {res.message}")
    # scipy reports d(objective)/d(rhs) for equality constraints, which is
    # exactly the uniform price here
    price = float(res.eqlin.marginals[0])
    return MarketOutcome(gen=res.x, price=price, total_cost=float(res.fun), bounds=(lo, hi))


def merit_order_conditions(inst: MarketInstance, out: MarketOutcome, tol: float = 1e-7) -> list[str]:
    """Check balance, box, and marginal-price optimality conditions.

    Returns a list of violated conditions (empty if the outcome is a valid
    optimum at the reported price): operating units offering below the
    price sit at their effective upper bound, units offering above it at
    their effective lower bound.
    """
    lo, hi = out.bounds if out.bounds is not None else effective_bounds(inst)
    offers = inst.offer_prices()
    bad = []
    if abs(out.gen.sum() - inst.demand) > BALANCE_TOL:
        bad.append(f"balance violated: sum {out.gen.sum()} vs demand {inst.demand}")
    if np.any(out.gen < lo - tol) or np.any(out.gen > hi + tol):
        bad.append("dispatch outside effective bounds")
    for i in range(inst.n):
        if inst.maint[i]:
            if abs(out.gen[i]) > tol:
                bad.append(f"unit {inst.units[i].id} generates during maintenance")
            continue
        if offers[i] < out.price - tol and out.gen[i] < hi[i] - tol:
            bad.append(f"unit {inst.units[i].id} offers below price but is not at its upper bound")
        if offers[i] > out.price + tol and out.gen[i] > lo[i] + tol:
            bad.append(f"unit {inst.units[i].id} offers above price but is not at its lower bound")
    return bad
