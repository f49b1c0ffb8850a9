"""Projection of maintenance requests onto the feasible schedule set.

Agents request a joint binary maintenance vector each step. The filter
returns the nearest (Hamming distance) current-step decision from which the
remaining horizon can still be completed without breaking any of:

* concurrency: at most ``max_concurrent`` units down per step;
* block length: every maintenance run lasts at least ``min_block[i]`` steps
  and must fit before the horizon ends;
* coverage (intent mode): every unit accrues at least ``required_days[i]``
  maintenance days inside every window of ``window`` consecutive steps.

Two constraint semantics are supported. ``intent`` (default) is the
rolling-window coverage reading above. ``literal`` instead checks the
idle-run-length recursion x(t+1) = (1-u(t))(x(t)+1) with the terminal
requirement x(horizon) >= required_days[i], which amounts to forbidding
maintenance during the final ``required_days[i]`` steps; see the milp
module for the matching integer-programming export.

Extendability is judged over a bounded lookahead ending at
min(t + window, horizon): constraints further out are not yet binding.
``filter_project`` uses deadline-driven greedy search with an exact
backtracking fallback; ``brute_force_filter_oracle`` re-derives the answer
by enumeration and exists to cross-check it on small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InstanceTooLarge, NoFeasibleCompletion

_SEARCH_NODE_BUDGET = 500_000


@dataclass(frozen=True)
class UnitSafety:
    """Maintenance bookkeeping for one unit."""

    run_length: int = 0        # consecutive maintenance steps ending now (0 = idle)
    last_maint: int = 0        # step of the most recent maintenance day (0 = never)
    recent_days: tuple[int, ...] = ()  # maintenance-day steps still inside the window


@dataclass(frozen=True)
class SafetyState:
    """Joint maintenance bookkeeping after ``t`` executed steps."""

    t: int = 0
    units: tuple[UnitSafety, ...] = ()

    @property
    def n(self) -> int:
        return len(self.units)

    def since_maint(self, i: int) -> int:
        """Steps elapsed since unit i's last maintenance day (t if never)."""
        u = self.units[i]
        return self.t - u.last_maint if u.last_maint else self.t

    def block_progress(self, i: int) -> int:
        return self.units[i].run_length

    def window_coverage(self, i: int, window: int) -> int:
        """Maintenance days of unit i inside the current window (t-window, t]."""
        return sum(1 for d in self.units[i].recent_days if d > self.t - window)


def fresh_state(n: int) -> SafetyState:
    return SafetyState(t=0, units=tuple(UnitSafety() for _ in range(n)))


@dataclass(frozen=True)
class FilterConfig:
    """Safety-filter parameters; per-unit tuples are indexed like the fleet."""

    n_units: int
    max_concurrent: int            # cap on simultaneous maintenance
    window: int                    # coverage window length, steps
    min_block: tuple[int, ...]     # minimum maintenance-run length per unit
    required_days: tuple[int, ...]  # required maintenance days per window per unit
    horizon: int                   # total steps of the simulation
    mode: str = "intent"

    def __post_init__(self):
        if not 1 <= self.max_concurrent <= self.n_units:
            raise ValueError("max_concurrent must be in [1, n_units]")
        if self.mode not in ("intent", "literal"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if len(self.min_block) != self.n_units or len(self.required_days) != self.n_units:
            raise DimensionMismatch("per-unit tuples must match n_units")
        for d, h in zip(self.min_block, self.required_days):
            if not 1 <= d <= self.window:
                raise ValueError("min_block entries must be in [1, window]")
            if not 1 <= h <= self.window:
                raise ValueError("required_days entries must be in [1, window]")


@dataclass(frozen=True)
class SafeDecision:
    u_f: np.ndarray                # executed maintenance vector for the current step
    distance: int                  # Hamming distance to the request
    witness: np.ndarray            # feasible completion, rows = steps t+1..lookahead end


def advance_state(state: SafetyState, applied, cfg: FilterConfig) -> SafetyState:
    """Bookkeeping update after executing ``applied`` at step t+1.

    Days that left the coverage window are dropped from ``recent_days``;
    ``last_maint`` is kept so the idle-run counter x(t+1) = (1-u)(x(t)+1)
    stays exact for arbitrarily long idle stretches.
    """
    applied = np.asarray(applied, dtype=int)
    if applied.shape != (state.n,):
        raise DimensionMismatch(f"applied has shape {applied.shape}, expected ({state.n},)")
    step = state.t + 1
    units = []
    for u, a in zip(state.units, applied):
        days = tuple(d for d in u.recent_days if d > step - cfg.window)
        if a:
            units.append(UnitSafety(run_length=u.run_length + 1, last_maint=step,
                                    recent_days=days + (step,)))
        else:
            units.append(UnitSafety(run_length=0, last_maint=u.last_maint,
                                    recent_days=days))
    return SafetyState(t=step, units=tuple(units))


def candidate_order(request: np.ndarray, state: SafetyState, cfg: FilterConfig):
    """Valid current-step assignments in contractual preference order.

    Ordered by Hamming distance to the request; equal distances prefer
    flipping the highest-index units first, then the lexicographically
    smallest assignment. Assignments violating the concurrency cap or an
    in-progress block (run shorter than its minimum length must continue)
    are excluded.
    """
    n = cfg.n_units
    must_continue = [
        0 < state.units[i].run_length < cfg.min_block[i] for i in range(n)
    ]
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if sum(bits) > cfg.max_concurrent:
            continue
        if any(m and not b for m, b in zip(must_continue, bits)):
            continue
        flips = [i for i in range(n) if bits[i] != request[i]]
        key = (len(flips), tuple(-i for i in sorted(flips, reverse=True)), bits)
        out.append((key, bits))
    out.sort(key=lambda kv: kv[0])
    return [np.array(bits, dtype=int) for _, bits in out]


# --- intent-mode completion search -----------------------------------------
#
# Search nodes carry per-unit (run, days) tuples; ``days`` holds the
# maintenance-day steps still inside the window at the node's time.


def _trim(days: tuple[int, ...], step: int, window: int) -> tuple[int, ...]:
    return tuple(d for d in days if d > step - window)


def _coverage_ok(days: tuple[int, ...], step: int, cfg: FilterConfig, i: int) -> bool:
    if step < cfg.window:
        return True
    return len(days) >= cfg.required_days[i]


def _next_violation(days: tuple[int, ...], now: int, cfg: FilterConfig, i: int) -> int:
    """First future step whose window goes short if unit i never maintains again."""
    h = cfg.required_days[i]
    if len(days) >= h:
        v = days[-h] + cfg.window
    else:
        v = cfg.window
    return max(v, now + 1)


def _apply_row(units, row, step, cfg):
    new = []
    for (run, days), a in zip(units, row):
        days = _trim(days, step, cfg.window)
        if a:
            new.append((run + 1, days + (step,)))
        else:
            new.append((0, days))
    return tuple(new)


def _row_valid(units, row, step, cfg) -> bool:
    if sum(row) > cfg.max_concurrent:
        return False
    for i, ((run, days), a) in enumerate(zip(units, row)):
        d_i = cfg.min_block[i]
        if 0 < run < d_i and not a:
            return False                      # mid-block, must continue
        if a and run == 0 and step + d_i - 1 > cfg.horizon:
            return False                      # new block cannot fit before the horizon
        if not _coverage_ok(_trim(days, step, cfg.window) + ((step,) if a else ()), step, cfg, i):
            return False
    return True


def _greedy_completion(units, start: int, end: int, cfg: FilterConfig):
    """Deadline-ordered constructive completion; None if it dead-ends."""
    rows = []
    for step in range(start, end + 1):
        row = [0] * cfg.n_units
        slots = cfg.max_concurrent
        pending = []
        for i, (run, days) in enumerate(units):
            if 0 < run < cfg.min_block[i]:
                row[i] = 1
                slots -= 1
                continue
            dl = _next_violation(_trim(days, step - 1, cfg.window), step - 1, cfg, i)
            if dl <= end:
                if step + cfg.min_block[i] - 1 > cfg.horizon:
                    return None               # obliged but can never fit a block
                pending.append((dl, i))
        if slots < 0:
            return None
        pending.sort()
        for dl, i in pending:
            if slots == 0:
                if dl <= step:
                    return None               # deadline missed for lack of slots
                continue
            row[i] = 1
            slots -= 1
        if not _row_valid(units, row, step, cfg):
            return None
        units = _apply_row(units, row, step, cfg)
        rows.append(row)
        settled = all(
            not (0 < run < cfg.min_block[i])
            and _next_violation(days, step, cfg, i) > end
            for i, (run, days) in enumerate(units)
        )
        if settled:
            rows.extend([[0] * cfg.n_units] * (end - step))
            break
    return rows


def _dfs_completion(units, start: int, end: int, cfg: FilterConfig):
    """Exact backtracking over the lookahead; complements the greedy path.

    Only units with an obligation inside the lookahead are ever started
    (starting an unobligated unit consumes capacity without relaxing any
    constraint), which keeps the branching factor small.
    """
    memo: dict = {}
    budget = [_SEARCH_NODE_BUDGET]

    def rec(units, step):
        if step > end:
            return []
        key = (step, units)
        if key in memo:
            return memo[key]
        budget[0] -= 1
        if budget[0] < 0:
            raise RuntimeError("completion search budget exceeded")
        forced = []
        optional = []
        for i, (run, days) in enumerate(units):
            if 0 < run < cfg.min_block[i]:
                forced.append(i)
            elif _next_violation(_trim(days, step - 1, cfg.window), step - 1, cfg, i) <= end:
                if step + cfg.min_block[i] - 1 <= cfg.horizon:
                    optional.append(i)
        free = cfg.max_concurrent - len(forced)
        result = None
        if free >= 0:
            optional.sort(key=lambda i: _next_violation(
                _trim(units[i][1], step - 1, cfg.window), step - 1, cfg, i))
            for k in range(min(free, len(optional)), -1, -1):
                for chosen in itertools.combinations(optional, k):
                    row = [0] * cfg.n_units
                    for i in forced:
                        row[i] = 1
                    for i in chosen:
                        row[i] = 1
                    if not _row_valid(units, row, step, cfg):
                        continue
                    tail = rec(_apply_row(units, row, step, cfg), step + 1)
                    if tail is not None:
                        result = [row] + tail
                        break
                if result is not None:
                    break
        memo[key] = result
        return result

    return rec(units, start)


# --- literal-mode completion (constructive) ---------------------------------


def _literal_completion(state: SafetyState, committed, cfg: FilterConfig):
    """Completion under the idle-run-length semantics.

    After the committed step, every open block is run to its minimum length
    and nothing else is scheduled. Fails if any maintenance day would land
    inside a unit's terminal no-maintenance zone (the last required_days
    steps before the horizon, which the terminal idle-run requirement
    forbids) or a block cannot fit before the horizon.
    """
    s0 = state.t + 1
    end = min(state.t + cfg.window, cfg.horizon)
    rows = np.zeros((end - state.t, cfg.n_units), dtype=int)
    rows[0] = committed
    for i in range(cfg.n_units):
        zone_start = cfg.horizon - cfg.required_days[i]  # [zone_start, horizon-1] must be idle
        if committed[i]:
            run = state.units[i].run_length + 1
            last_day = s0 + max(cfg.min_block[i] - run, 0)
            if last_day > cfg.horizon:
                return None
            if max(s0, zone_start) <= min(last_day, cfg.horizon - 1):
                return None
            for s in range(s0 + 1, min(last_day, end) + 1):
                rows[s - s0, i] = 1
        elif 0 < state.units[i].run_length < cfg.min_block[i]:
            return None
    if np.any(rows.sum(axis=1) > cfg.max_concurrent):
        return None
    return rows


# --- public operations -------------------------------------------------------


def feasible_completion(state: SafetyState, committed, cfg: FilterConfig):
    """Feasible schedule over the lookahead starting with ``committed``.

    Returns an array whose first row is the committed step, or None when no
    completion exists. The committed vector must already respect the
    concurrency cap and in-progress blocks.
    """
    committed = np.asarray(committed, dtype=int)
    if committed.shape != (cfg.n_units,):
        raise DimensionMismatch(f"committed has shape {committed.shape}")
    if cfg.mode == "literal":
        return _literal_completion(state, committed, cfg)

    s0 = state.t + 1
    end = min(state.t + cfg.window, cfg.horizon)
    units = tuple(
        (u.run_length, _trim(u.recent_days, state.t, cfg.window)) for u in state.units
    )
    if not _row_valid(units, tuple(committed), s0, cfg):
        return None
    units = _apply_row(units, tuple(committed), s0, cfg)
    tail = _greedy_completion(units, s0 + 1, end, cfg)
    if tail is None:
        tail = _dfs_completion(units, s0 + 1, end, cfg)
    if tail is None:
        return None
    tail_rows = np.array(tail, dtype=int).reshape(len(tail), cfg.n_units)
    return np.vstack([committed[None, :], tail_rows])


def filter_project(request, state: SafetyState, cfg: FilterConfig) -> SafeDecision:
    """Nearest feasible current-step decision to the requested vector.

    Candidates are tried in the contractual preference order; the first one
    admitting a feasible completion wins, so a feasible request passes
    through unchanged with distance zero.
    """
    request = np.asarray(request, dtype=int)
    if request.shape != (cfg.n_units,):
        raise DimensionMismatch(f"request has shape {request.shape}, expected ({cfg.n_units},)")
    for cand in candidate_order(request, state, cfg):
        witness = feasible_completion(state, cand, cfg)
        if witness is not None:
            return SafeDecision(
                u_f=cand,
                distance=int(np.sum(cand != request)),
                witness=witness,
            )
    raise NoFeasibleCompletion(
        f"no current-step decision at t={state.t} admits a feasible completion"
    )


def brute_force_filter_oracle(request, state: SafetyState, cfg: FilterConfig) -> SafeDecision:
    """Enumerative re-derivation of filter_project for small instances.

    Walks every binary schedule over the lookahead (recursion over steps,
    abandoning prefixes that already violate a constraint) instead of the
    deadline-guided search, so it provides an independent answer for the
    same contract. Bounded to 3 units and a lookahead span of 8 steps.
    """
    request = np.asarray(request, dtype=int)
    s0 = state.t + 1
    end = min(state.t + cfg.window, cfg.horizon)
    span = end - state.t
    if cfg.n_units > 3 or span > 8:
        raise InstanceTooLarge(f"oracle limited to 3 units and span 8, got N={cfg.n_units} span={span}")

    rows_all = list(itertools.product((0, 1), repeat=cfg.n_units))

    def ok(units, row, step):
        if sum(row) > cfg.max_concurrent:
            return False
        for i, ((run, days), a) in enumerate(zip(units, row)):
            if 0 < run < cfg.min_block[i] and not a:
                return False
            if a and run == 0 and step + cfg.min_block[i] - 1 > cfg.horizon:
                return False
            if cfg.mode == "literal":
                zone_start = cfg.horizon - cfg.required_days[i]
                if a and zone_start <= step <= cfg.horizon - 1:
                    return False
            else:
                days2 = tuple(d for d in days if d > step - cfg.window)
                if a:
                    days2 += (step,)
                if step >= cfg.window and len(days2) < cfg.required_days[i]:
                    return False
        return True

    def step_units(units, row, step):
        out = []
        for (run, days), a in zip(units, row):
            days = tuple(d for d in days if d > step - cfg.window)
            out.append((run + 1, days + (step,)) if a else (0, days))
        return tuple(out)

    seen: dict = {}

    def extendable(units, step):
        if step > end:
            return True
        key = (step, units)
        if key in seen:
            return seen[key]
        found = False
        for row in rows_all:
            if ok(units, row, step) and extendable(step_units(units, row, step), step + 1):
                found = True
                break
        seen[key] = found
        return found

    units0 = tuple(
        (u.run_length, tuple(d for d in u.recent_days if d > state.t - cfg.window))
        for u in state.units
    )
    for cand in candidate_order(request, state, cfg):
        row = tuple(cand)
        if ok(units0, row, s0) and extendable(step_units(units0, row, s0), s0 + 1):
            return SafeDecision(
                u_f=cand,
                distance=int(np.sum(cand != request)),
                witness=cand[None, :].copy(),
            )
    raise NoFeasibleCompletion("oracle found no extendable current-step decision")


# --- schedule audits ----------------------------------------------------------


def schedule_violations(schedule: np.ndarray, cfg: FilterConfig) -> dict:
    """Audit a full executed schedule (rows = steps, columns = units).

    Returns step lists for the three safety rules: concurrency cap breaches,
    maintenance runs shorter than the unit minimum (runs truncated by the
    end of the schedule count), and window-coverage shortfalls at each step
    from ``window`` onward (intent semantics).
    """
    schedule = np.asarray(schedule, dtype=int)
    steps, n = schedule.shape
    over_cap = [t + 1 for t in range(steps) if schedule[t].sum() > cfg.max_concurrent]

    short_blocks = []
    for i in range(n):
        run = 0
        for t in range(steps):
            if schedule[t, i]:
                run += 1
            else:
                if 0 < run < cfg.min_block[i]:
                    short_blocks.append((i, t - run + 1, run))
                run = 0
        if 0 < run < cfg.min_block[i]:
            short_blocks.append((i, steps - run + 1, run))

    coverage = []
    cum = np.vstack([np.zeros((1, n), dtype=int), np.cumsum(schedule, axis=0)])
    for t in range(cfg.window, steps + 1):
        counts = cum[t] - cum[t - cfg.window]
        for i in range(n):
            if counts[i] < cfg.required_days[i]:
                coverage.append((i, t))
    return {"over_cap": over_cap, "short_blocks": short_blocks, "coverage": coverage}
