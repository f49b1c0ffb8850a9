"""Integer-programming form of the literal-mode maintenance projection.

Builds the projection problem as an explicit mixed-integer linear system:
decision variables ``u`` (maintenance), state variables ``x`` (idle-run
counter), and auxiliary ``z`` standing in for the product u*x through the
classic three-inequality big-M linearization. The system can be exported as
CPLEX LP text so third-party solvers can cross-check the filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadBigM
from .safety import FilterConfig, SafetyState, fresh_state


@dataclass(frozen=True)
class LinearRow:
    """One constraint: sum(coeffs[v] * v) (sense) rhs."""

    coeffs: dict[str, float]
    sense: str              # "<=" or "=" or ">="
    rhs: float
    name: str


@dataclass
class MilpSystem:
    variables: list[str]
    objective: dict[str, float]
    objective_const: float
    rows: list[LinearRow]
    bounds: dict[str, tuple[float, float]]
    binaries: set[str] = field(default_factory=set)

    def as_arrays(self):
        """Dense (c, A_ub, b_ub, A_eq, b_eq, lb, ub, integrality) matrices."""
        idx = {v: j for j, v in enumerate(self.variables)}
        nv = len(self.variables)
        c = np.zeros(nv)
        for v, w in self.objective.items():
            c[idx[v]] = w
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for row in self.rows:
            vec = np.zeros(nv)
            for v, w in row.coeffs.items():
                vec[idx[v]] = w
            if row.sense == "<=":
                ub_rows.append(vec)
                ub_rhs.append(row.rhs)
            elif row.sense == ">=":
                ub_rows.append(-vec)
                ub_rhs.append(-row.rhs)
            else:
                eq_rows.append(vec)
                eq_rhs.append(row.rhs)
        lb = np.array([self.bounds[v][0] for v in self.variables])
        ub = np.array([self.bounds[v][1] for v in self.variables])
        integrality = np.array([1 if v in self.binaries else 0 for v in self.variables])
        A_ub = np.array(ub_rows) if ub_rows else np.zeros((0, nv))
        A_eq = np.array(eq_rows) if eq_rows else np.zeros((0, nv))
        return (c, A_ub, np.array(ub_rhs), A_eq, np.array(eq_rhs), lb, ub, integrality)

    def to_lp_text(self) -> str:
        """CPLEX LP file body for the system."""

        def term(w, v, first):
            sign = "-" if w < 0 else ("" if first else "+")
            return f"{sign} {abs(w):g} {v}"

        lines = ["\\ maintenance projection MILP"]
        if self.objective_const:
            lines.append(f"\\ objective constant (not in LP body): {self.objective_const:g}")
        lines.append("Minimize")
        obj_terms = [term(w, v, j == 0) for j, (v, w) in enumerate(sorted(self.objective.items()))]
        lines.append(" obj: " + (" ".join(obj_terms) if obj_terms else "0 " + self.variables[0]))
        lines.append("Subject To")
        for row in self.rows:
            terms = [term(w, v, j == 0) for j, (v, w) in enumerate(sorted(row.coeffs.items()))]
            op = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
            lines.append(f" {row.name}: " + " ".join(terms) + f" {op} {row.rhs:g}")
        lines.append("Bounds")
        for v in self.variables:
            lo, hi = self.bounds[v]
            if lo == hi:
                lines.append(f" {v} = {lo:g}")
            else:
                lines.append(f" {lo:g} <= {v} <= {hi:g}")
        if self.binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(v for v in self.variables if v in self.binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"


def product_rows(u: str, x: str, z: str, big_m: float, tag: str) -> list[LinearRow]:
    """Three inequalities pinning z = u * x for binary u and 0 <= x <= big_m."""
    return [
        LinearRow({z: 1.0, u: -big_m}, "<=", 0.0, f"zcap_{tag}"),
        LinearRow({x: 1.0, z: -1.0, u: big_m}, "<=", big_m, f"zlow_{tag}"),
        LinearRow({z: 1.0, x: -1.0, u: big_m}, "<=", big_m, f"zhigh_{tag}"),
    ]


def z_interval(u_val: int, x_val: float, big_m: float) -> tuple[float, float]:
    """Feasible interval for z implied by the product rows at fixed (u, x).

    Evaluates the same rows the export emits; the interval collapses to the
    single point u*x whenever big_m dominates x.
    """
    rows = product_rows("u", "x", "z", big_m, "probe")
    lo, hi = 0.0, np.inf   # z >= 0 is a variable bound
    fixed = {"u": float(u_val), "x": float(x_val)}
    for row in rows:
        zc = row.coeffs.get("z", 0.0)
        rest = sum(w * fixed[v] for v, w in row.coeffs.items() if v != "z")
        if zc > 0:
            hi = min(hi, (row.rhs - rest) / zc)
        elif zc < 0:
            lo = max(lo, (row.rhs - rest) / zc)
    return lo, hi


def big_m_expand(
    cfg: FilterConfig,
    big_m: float,
    state: SafetyState | None = None,
    request: np.ndarray | None = None,
) -> MilpSystem:
    """Literal-mode projection MILP over steps t+1 .. horizon.

    Variables per unit i and step s: u_i_s (binary), x_i_s (idle-run
    counter, with x at the first step fixed from the state), z_i_s (the
    linearized product). Constraints: the three big-M rows per (i, s), the
    counter recursion x(s+1) = x(s) - z(s) + 1 - u(s), the terminal
    idle-run requirement, the concurrency cap, and the block-completion
    inequalities with the pre-step history folded into the right-hand side.
    The squared distance objective reduces to a linear form on binaries.
    """
    if state is None:
        state = fresh_state(cfg.n_units)
    if request is None:
        request = np.zeros(cfg.n_units, dtype=int)
    request = np.asarray(request, dtype=int)
    t0 = state.t + 1
    T = cfg.horizon
    if big_m < T:
        raise BadBigM(f"big_m {big_m} must be at least the horizon {T}")

    def u(i, s):
        return f"u_{i + 1}_{s}"

    def x(i, s):
        return f"x_{i + 1}_{s}"

    def z(i, s):
        return f"z_{i + 1}_{s}"

    variables: list[str] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    rows: list[LinearRow] = []

    for i in range(cfg.n_units):
        for s in range(t0, T + 1):
            variables.append(u(i, s))
            bounds[u(i, s)] = (0.0, 1.0)
            binaries.add(u(i, s))
            variables.append(z(i, s))
            bounds[z(i, s)] = (0.0, float(big_m))
        for s in range(t0, T + 2):
            variables.append(x(i, s))
            bounds[x(i, s)] = (0.0, float(big_m))
        bounds[x(i, t0)] = (float(state.since_maint(i)),) * 2

    for i in range(cfg.n_units):
        for s in range(t0, T + 1):
            rows.extend(product_rows(u(i, s), x(i, s), z(i, s), big_m, f"{i + 1}_{s}"))
            # x(s+1) = x(s) - z(s) + 1 - u(s)
            rows.append(LinearRow(
                {x(i, s + 1): 1.0, x(i, s): -1.0, z(i, s): 1.0, u(i, s): 1.0},
                "=", 1.0, f"recur_{i + 1}_{s}",
            ))
        rows.append(LinearRow(
            {x(i, T): 1.0}, ">=", float(cfg.required_days[i]), f"terminal_{i + 1}",
        ))
        prev_on = 1 if state.units[i].run_length > 0 else 0
        for s in range(t0, T + 1):
            coeffs = {u(i, s): 1.0}
            rhs = 0.0
            if s == t0:
                rhs += prev_on          # history term moves to the rhs
            else:
                coeffs[u(i, s - 1)] = coeffs.get(u(i, s - 1), 0.0) - 1.0
            tail = s + cfg.min_block[i] - 1
            if tail <= T:
                coeffs[u(i, tail)] = coeffs.get(u(i, tail), 0.0) - 1.0
            rows.append(LinearRow(coeffs, "<=", rhs, f"block_{i + 1}_{s}"))

    for s in range(t0, T + 1):
        rows.append(LinearRow(
            {u(i, s): 1.0 for i in range(cfg.n_units)},
            "<=", float(cfg.max_concurrent), f"cap_{s}",
        ))

    # ||u(t0) - request||^2 = sum (1 - 2 r_i) u_i(t0) + sum r_i^2 on binaries
    objective = {u(i, t0): 1.0 - 2.0 * float(request[i]) for i in range(cfg.n_units)}
    const = float(np.sum(request * request))
    return MilpSystem(
        variables=variables,
        objective=objective,
        objective_const=const,
        rows=rows,
        bounds=bounds,
        binaries=binaries,
    )
