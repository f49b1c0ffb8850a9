"""Tabular temporal-difference baseline over a discretized state grid.

States are (price bin, demand bin) on a fixed grid of edges; actions pair a
discrete bid level with a maintenance request bit. The update blends the
one-step lookup target into the table at rate alpha, so alpha = 1 recovers
the plain replacement rule Q(s,a) = r + gamma * max_a' Q(s',a').
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadBinning, IndexOutOfRange


def make_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    """Interior bin edges for `bins` equal-width bins on [lo, hi]."""
    return np.linspace(lo, hi, bins + 1)[1:-1]


def discretize(value: float, edges: np.ndarray) -> int:
    """Bin index for a value; clamps outside the range, upper bin on a tie."""
    edges = np.asarray(edges, dtype=float)
    if edges.size and np.any(np.diff(edges) <= 0):
        raise BadBinning("edges must be strictly increasing")
    return int(np.searchsorted(edges, value, side="right"))


@dataclass
class QTable:
    price_edges: np.ndarray          # interior edges over normalized price
    demand_edges: np.ndarray         # interior edges over normalized demand
    bid_levels: tuple[float, ...]
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon: float = 0.3
    values: np.ndarray = None
    visits: np.ndarray = None

    def __post_init__(self):
        self.price_edges = np.asarray(self.price_edges, dtype=float)
        self.demand_edges = np.asarray(self.demand_edges, dtype=float)
        if self.values is None:
            self.values = np.zeros((self.n_states, self.n_actions))
        if self.visits is None:
            self.visits = np.zeros((self.n_states, self.n_actions), dtype=int)

    @property
    def n_price_bins(self) -> int:
        return self.price_edges.size + 1

    @property
    def n_demand_bins(self) -> int:
        return self.demand_edges.size + 1

    @property
    def n_states(self) -> int:
        return self.n_price_bins * self.n_demand_bins

    @property
    def n_actions(self) -> int:
        return 2 * len(self.bid_levels)

    def action_pair(self, a: int) -> tuple[int, float]:
        """Decode an action index into (maintenance request, bid level)."""
        if not 0 <= a < self.n_actions:
            raise IndexOutOfRange(f"action {a} outside 0..{self.n_actions - 1}")
        return a % 2, self.bid_levels[a // 2]


def discretize_state(table: QTable, price: float, demand: float) -> int:
    """Flat state index for a normalized (price, demand) pair."""
    pb = discretize(price, table.price_edges)
    db = discretize(demand, table.demand_edges)
    return pb * table.n_demand_bins + db


def q_update(table: QTable, s: int, a: int, r: float, s_next: int) -> float:
    """Blend the lookup target into Q(s, a) at rate alpha; returns the new value."""
    if not 0 <= s < table.n_states or not 0 <= s_next < table.n_states:
        raise IndexOutOfRange(f"state index outside 0..{table.n_states - 1}")
    if not 0 <= a < table.n_actions:
        raise IndexOutOfRange(f"action {a} outside 0..{table.n_actions - 1}")
    target = r + table.gamma * table.values[s_next].max()
    table.values[s, a] = (1.0 - table.alpha) * table.values[s, a] + table.alpha * target
    table.visits[s, a] += 1
    return float(table.values[s, a])


def epsilon_greedy_action(table: QTable, s: int, epsilon: float,
                          rng: np.random.Generator) -> int:
    """Uniform random action with probability epsilon, else lowest-index argmax."""
    if not 0 <= s < table.n_states:
        raise IndexOutOfRange(f"state {s} outside 0..{table.n_states - 1}")
    if rng.random() < epsilon:
        return int(rng.integers(0, table.n_actions))
    return int(np.argmax(table.values[s]))


def save_table(table: QTable, path) -> None:
    """Plain-text checkpoint: `key=value` header lines, then the value matrix."""
    header = [
        f"price_edges={','.join(repr(float(e)) for e in table.price_edges)}",
        f"demand_edges={','.join(repr(float(e)) for e in table.demand_edges)}",
        f"bid_levels={','.join(repr(float(b)) for b in table.bid_levels)}",
        f"alpha={table.alpha!r}",
        f"gamma={table.gamma!r}",
        f"epsilon={table.epsilon!r}",
    ]
    np.savetxt(path, table.values, fmt="%.17g", header="\n".join(header))


def load_table(path) -> QTable:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
    values = np.loadtxt(path)

    def floats(s):
        return tuple(float(v) for v in s.split(",")) if s else ()

    table = QTable(
        price_edges=np.array(floats(meta["price_edges"])),
        demand_edges=np.array(floats(meta["demand_edges"])),
        bid_levels=floats(meta["bid_levels"]),
        alpha=float(meta["alpha"]),
        gamma=float(meta["gamma"]),
        epsilon=float(meta["epsilon"]),
        values=np.atleast_2d(values),
    )
    return table
