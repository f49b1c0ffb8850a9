"""Per-unit deterministic policy-gradient learner.

Each unit owns four networks: behaviour and target copies of an actor
(state -> [maintenance logit, raw bid]) and a critic (state, action ->
value). Actions are mapped to the environment's space by a logistic squash
plus 0.5 threshold on the maintenance head and by clipping the bid head
into [1, k_max]. Updates follow the textbook recipe: mean-squared error of
the critic against bootstrapped targets from the target networks, the
negated critic value as the actor loss, plain gradient-descent steps, and
elementwise soft target blending.

A unit's update touches only its own networks, its own rewards, and the
public (price, demand) state; nothing about other units is read.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, ShapeMismatch
from .nn import MlpParams, init_mlp, mlp_forward, mlp_gradients, sgd_step, soft_update

CHECKPOINT_VERSION = "safebid-ddpg-1"


@dataclass(frozen=True)
class Experience:
    """One stored transition; states are normalized (price, demand) pairs."""

    state: tuple[float, float]
    next_state: tuple[float, float]
    action: tuple[int, float]      # (maintenance request, bid multiplier)
    reward: float


class ReplayBuffer:
    """Bounded FIFO with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: deque[Experience] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, e: Experience) -> None:
        self._items.append(e)

    def sample(self, n: int, rng: np.random.Generator) -> list[Experience]:
        if len(self._items) < n:
            raise InsufficientSamples(f"buffer holds {len(self._items)} < {n}")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


@dataclass
class Hyper:
    gamma: float = 0.95
    lr_critic: float = 2e-3
    lr_actor: float = 2e-2
    tau_critic: float = 0.99       # target keeps 99% of itself per blend
    tau_actor: float = 0.99
    batch_size: int = 100
    buffer_capacity: int = 10_000
    hidden: int = 64
    sigma_start: float = 0.3
    sigma_end: float = 0.02
    reward_scale: float = 1e-2     # rewards are scaled before entering the critic
    init: str = "fan_in"           # fan_in | uniform | wide


@dataclass
class AgentBrain:
    actor: MlpParams
    actor_target: MlpParams
    critic: MlpParams
    critic_target: MlpParams
    buffer: ReplayBuffer
    hyper: Hyper
    k_max: float
    price_scale: float
    demand_scale: float
    sigma: float = 0.0             # current exploration noise, managed by the trainer
    updates: int = field(default=0)


def _init_net(sizes, rng: np.random.Generator, scheme: str) -> MlpParams:
    if scheme == "wide":
        return init_mlp(sizes, rng, 1.0, 3.0)
    if scheme == "uniform":
        return init_mlp(sizes, rng, -0.1, 0.1)
    if scheme != "fan_in":
        raise ValueError(f"unknown init scheme {scheme!r}")
    p = init_mlp(sizes, rng)
    for j, w in enumerate(p.weights):
        bound = 1.0 / np.sqrt(w.shape[1])
        p.weights[j] = rng.uniform(-bound, bound, size=w.shape)
        p.biases[j] = rng.uniform(-bound, bound, size=w.shape[0])
    return p


def make_brain(k_max: float, price_scale: float, demand_scale: float,
               hyper: Hyper, rng: np.random.Generator) -> AgentBrain:
    h = hyper.hidden
    actor = _init_net((2, h, h, 2), rng, hyper.init)
    critic = _init_net((4, h, h, 1), rng, hyper.init)
    if hyper.init != "wide":
        # start the bid head inside the clip range so its gradient is alive
        actor.biases[-1][1] = 0.5 * (1.0 + k_max)
    return AgentBrain(
        actor=actor,
        actor_target=actor.copy(),
        critic=critic,
        critic_target=critic.copy(),
        buffer=ReplayBuffer(hyper.buffer_capacity),
        hyper=hyper,
        k_max=k_max,
        price_scale=price_scale,
        demand_scale=demand_scale,
        sigma=hyper.sigma_start,
    )


def normalize_state(brain: AgentBrain, price: float, demand: float) -> np.ndarray:
    return np.array([price / brain.price_scale, demand / brain.demand_scale])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _greedy_action(p: MlpParams, states: np.ndarray, k_max: float) -> np.ndarray:
    """Deterministic (u, k) columns for a batch of states."""
    out = mlp_forward(p, states)
    u = (_sigmoid(out[:, 0]) > 0.5).astype(float)
    k = np.clip(out[:, 1], 1.0, k_max)
    return np.column_stack([u, k])


def select_action(brain: AgentBrain, state: np.ndarray, explore: bool = False,
                  rng: np.random.Generator | None = None,
                  sigma: float | None = None) -> tuple[int, float]:
    """Map the actor output to an executable action.

    The bid head is clipped into [1, k_max] (with Gaussian noise of scale
    ``sigma`` added first when exploring); the maintenance head goes through
    a logistic squash and is thresholded at 0.5, or sampled from the
    squashed probability when exploring.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (2,):
        raise ShapeMismatch(f"state shape {state.shape}, expected (2,)")
    out = mlp_forward(brain.actor, state)
    p_maint = _sigmoid(out[0])
    raw_k = out[1]
    if explore:
        if rng is None:
            raise ValueError("explore=True requires an rng")
        s = brain.sigma if sigma is None else sigma
        raw_k = raw_k + rng.normal(0.0, s)
        u = int(rng.random() < p_maint)
    else:
        u = int(p_maint > 0.5)
    k = float(np.clip(raw_k, 1.0, brain.k_max))
    return u, k


def _batch_arrays(batch: list[Experience]):
    s = np.array([e.state for e in batch])
    s2 = np.array([e.next_state for e in batch])
    a = np.array([e.action for e in batch], dtype=float)
    r = np.array([e.reward for e in batch])
    return s, s2, a, r


def critic_update(brain: AgentBrain, batch: list[Experience]) -> float:
    """One mean-squared-error descent step on the behaviour critic.

    Targets are scaled reward plus the discounted target-critic value at the
    target actor's action in the next state; target parameters stay fixed.
    Returns the loss before the step.
    """
    if len(batch) == 0:
        raise InsufficientSamples("empty minibatch")
    s, s2, a, r = _batch_arrays(batch)
    n = len(batch)
    a2 = _greedy_action(brain.actor_target, s2, brain.k_max)
    q_next = mlp_forward(brain.critic_target, np.hstack([s2, a2]))[:, 0]
    y = brain.hyper.reward_scale * r + brain.hyper.gamma * q_next
    x = np.hstack([s, a])
    q = mlp_forward(brain.critic, x)[:, 0]
    loss = float(np.mean((y - q) ** 2))
    upstream = (2.0 / n) * (q - y)
    grads, _ = mlp_gradients(brain.critic, x, upstream[:, None])
    sgd_step(brain.critic, grads, brain.hyper.lr_critic)
    brain.updates += 1
    return loss


def actor_update(brain: AgentBrain, batch: list[Experience]) -> float:
    """One descent step on the actor against the behaviour critic.

    The loss is the negated batch-mean critic value at the actor's mapped
    action; the gradient flows through the critic input into the actor,
    with the logistic derivative on the maintenance head and a unit
    pass-through inside the bid clip (zero outside).
    """
    if len(batch) == 0:
        raise InsufficientSamples("empty minibatch")
    s, _, _, _ = _batch_arrays(batch)
    n = len(batch)
    out = mlp_forward(brain.actor, s)
    p_maint = _sigmoid(out[:, 0])
    raw_k = out[:, 1]
    k = np.clip(raw_k, 1.0, brain.k_max)
    x = np.hstack([s, p_maint[:, None], k[:, None]])
    q = mlp_forward(brain.critic, x)[:, 0]
    loss = float(-np.mean(q))
    upstream = np.full((n, 1), -1.0 / n)
    _, dx = mlp_gradients(brain.critic, x, upstream)
    d_action = dx[:, 2:4]
    d_logit = d_action[:, 0] * p_maint * (1.0 - p_maint)
    d_raw = d_action[:, 1] * ((raw_k >= 1.0) & (raw_k <= brain.k_max))
    grads, _ = mlp_gradients(brain.actor, s, np.column_stack([d_logit, d_raw]))
    sgd_step(brain.actor, grads, brain.hyper.lr_actor)
    return loss


def soft_update_targets(brain: AgentBrain) -> None:
    brain.critic_target = soft_update(brain.critic, brain.critic_target, brain.hyper.tau_critic)
    brain.actor_target = soft_update(brain.actor, brain.actor_target, brain.hyper.tau_actor)


def replay_push(brain: AgentBrain, e: Experience) -> None:
    brain.buffer.push(e)


def replay_sample(brain: AgentBrain, n: int, rng: np.random.Generator) -> list[Experience]:
    return brain.buffer.sample(n, rng)


# --- checkpointing ------------------------------------------------------------


def save_checkpoint(brain: AgentBrain, path) -> None:
    """Versioned npz container: all four networks bit-exact plus metadata."""
    arrays = {}
    for name, net in (("actor", brain.actor), ("actor_target", brain.actor_target),
                      ("critic", brain.critic), ("critic_target", brain.critic_target)):
        for j, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}_w{j}"] = w
            arrays[f"{name}_b{j}"] = b
    meta = {
        "version": CHECKPOINT_VERSION,
        "k_max": brain.k_max,
        "price_scale": brain.price_scale,
        "demand_scale": brain.demand_scale,
        "sigma": brain.sigma,
        "updates": brain.updates,
        "buffer_capacity": brain.buffer.capacity,
        "buffer_size": len(brain.buffer),
        "hyper": vars(brain.hyper),
        "layers": {name: len(net.weights) for name, net in
                   (("actor", brain.actor), ("actor_target", brain.actor_target),
                    ("critic", brain.critic), ("critic_target", brain.critic_target))},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> AgentBrain:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']!r}")
        nets = {}
        for name in ("actor", "actor_target", "critic", "critic_target"):
            n_layers = meta["layers"][name]
            nets[name] = MlpParams(
                [data[f"{name}_w{j}"].copy() for j in range(n_layers)],
                [data[f"{name}_b{j}"].copy() for j in range(n_layers)],
            )
    hyper = Hyper(**meta["hyper"])
    brain = AgentBrain(
        actor=nets["actor"], actor_target=nets["actor_target"],
        critic=nets["critic"], critic_target=nets["critic_target"],
        buffer=ReplayBuffer(meta["buffer_capacity"]),
        hyper=hyper, k_max=meta["k_max"],
        price_scale=meta["price_scale"], demand_scale=meta["demand_scale"],
        sigma=meta["sigma"], updates=meta["updates"],
    )
    return brain
