"""Value-based agents and their training / evaluation loops."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional, Union

import numpy as np

from . import neural
from .env import EnvConfig, HighwayEnv, MetaAction, action_count
from .errors import ConfigError, UnderfullError

TABULAR, DQN, DDQN, REFERENCE = "tabular", "dqn", "ddqn", "reference"
ALGORITHMS = (TABULAR, DQN, DDQN, REFERENCE)

# independent RNG streams derived from one master seed
TRAIN_ENV_STREAM, EVAL_ENV_STREAM, AGENT_STREAM, INIT_STREAM = 0, 1, 2, 3


def derive_seed(master_seed: int, stream: int, index: int = 0) -> int:
    return int(np.random.SeedSequence([int(master_seed), stream, index]).generate_state(1)[0])


class Transition(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self):
        return len(self.a)

    def __iter__(self) -> Iterator[Transition]:
        for i in range(len(self)):
            yield Transition(self.s[i], int(self.a[i]), float(self.r[i]), self.s_next[i],
                             bool(self.done[i]))

    @classmethod
    def from_transitions(cls, transitions) -> "TransitionBatch":
        ts = list(transitions)
        return cls(np.array([t.s for t in ts], dtype=float), np.array([t.a for t in ts]),
                   np.array([t.r for t in ts], dtype=float),
                   np.array([t.s_next for t in ts], dtype=float),
                   np.array([t.done for t in ts], dtype=bool))


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, obs_size: int):
        if capacity <= 0:
            raise ConfigError("replay capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_size))
        self.s_next = np.zeros((capacity, obs_size))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s_next[i], self.done[i] = t
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def contents(self) -> list:
        """Stored transitions, oldest first."""
        start = self._next if self.size == self.capacity else 0
        idx = [(start + k) % self.capacity for k in range(self.size)]
        return list(self._take(np.array(idx, dtype=np.int64)))

    def _take(self, idx) -> TransitionBatch:
        return TransitionBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx],
                               self.done[idx])

    def sample(self, batch: int, rng: np.random.Generator) -> TransitionBatch:
        if self.size < batch:
            raise UnderfullError(f"buffer holds {self.size} transitions, {batch} requested")
        return self._take(rng.integers(0, self.size, size=batch))


def replay_push(buf: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buf.push(t)
    return buf


def replay_sample(buf: ReplayBuffer, batch: int, rng: np.random.Generator) -> TransitionBatch:
    return buf.sample(batch, rng)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 6000

    def __post_init__(self):
        if not self.start >= self.end >= 0 or self.decay_steps < 0:
            raise ConfigError(f"invalid epsilon schedule {self}")


def epsilon(step: int, sched: EpsilonSchedule = EpsilonSchedule()) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    if sched.decay_steps == 0 or step >= sched.decay_steps:
        return sched.end
    return sched.start + (sched.end - sched.start) * step / sched.decay_steps


def select_action(q_values, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy 0-based action index.

    Both random draws happen on every call so the generator advances the
    same way whichever branch is taken.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    q_values = np.asarray(q_values)
    explore = rng.random() < eps
    random_action = int(rng.integers(len(q_values)))
    return random_action if explore else neural.argmax_action(q_values)


# -- tabular baseline -------------------------------------------------------

class QTable(defaultdict):
    """Map state -> vector of action values, zero-initialised on first access."""

    def __init__(self, n_actions: int):
        super().__init__(lambda: np.zeros(n_actions))
        self.n_actions = n_actions


def tabular_q_update(q: QTable, s, a: int, r: float, s_next, alpha: float, gamma: float,
                     terminal: bool = False) -> QTable:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    boot = 0.0 if terminal else gamma * float(np.max(q[s_next]))
    q[s][a] += alpha * (r + boot - q[s][a])
    return q


# -- deep agents ------------------------------------------------------------

@dataclass(frozen=True)
class AgentConfig:
    algorithm: str = DDQN
    gamma: float = 0.8
    tabular_alpha: float = 0.2
    nn_lr: float = 5e-4
    batch: int = 32
    target_sync_steps: int = 500
    buffer_capacity: int = 10000
    episodes: int = 2000
    hidden: int = 128
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 6000
    train_every: int = 1
    grad_clip: Optional[float] = 10.0  # global-norm clip; None disables
    dueling_agg: str = neural.MAX_AGG
    checkpoint_every: int = 100

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tabular_alpha <= 1.0:
            raise ConfigError("tabular_alpha must lie in [0, 1]")
        if self.nn_lr <= 0 or self.batch <= 0 or self.target_sync_steps <= 0:
            raise ConfigError("nn_lr, batch and target_sync_steps must be positive")
        if self.batch > self.buffer_capacity:
            raise ConfigError("batch must not exceed buffer_capacity")
        if self.episodes < 0 or self.hidden <= 0 or self.train_every <= 0:
            raise ConfigError("episodes must be >= 0, hidden and train_every positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive when set")
        if self.dueling_agg not in (neural.MAX_AGG, neural.MEAN_AGG):
            raise ConfigError("dueling_agg must be 'max' or 'mean'")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")
        EpsilonSchedule(self.eps_start, self.eps_end, self.eps_decay_steps)

    @property
    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_end, self.eps_decay_steps)


def build_network(algorithm: str, obs_size: int, rng: np.random.Generator, hidden: int = 128,
                  aggregation: str = neural.MAX_AGG) -> neural.Params:
    n = action_count()
    if algorithm == DQN:
        return neural.init_mlp([obs_size, hidden, hidden, n], rng)
    if algorithm == DDQN:
        return neural.init_dueling(obs_size, n, rng, hidden, aggregation)
    raise ConfigError(f"algorithm {algorithm!r} has no network")


class DQNAgent:
    """Online network plus a lagged target copy, trained by plain SGD.

    Works with either parameter family, so DQN and dueling DQN differ only
    in the network passed in.
    """

    def __init__(self, params: neural.Params, gamma: float = 0.8, lr: float = 5e-4,
                 target_sync_steps: int = 500, grad_clip: Optional[float] = 10.0):
        self.online = params
        self.target = neural.copy_params(params)
        self.gamma = gamma
        self.lr = lr
        self.target_sync_steps = target_sync_steps
        self.grad_clip = grad_clip
        self.grad_steps = 0
        self.last_td_error = 0.0

    def q_values(self, obs) -> np.ndarray:
        return neural.forward(self.online, obs)[0]

    def greedy(self, obs) -> int:
        return neural.argmax_action(self.q_values(obs))

    def sync_target(self) -> "DQNAgent":
        self.target = neural.copy_params(self.online)
        return self

    def train_step(self, batch: Union[TransitionBatch, list]) -> float:
        """One gradient step on the batch; returns the loss before the update."""
        if not isinstance(batch, TransitionBatch):
            batch = TransitionBatch.from_transitions(batch)
        q_next, _ = neural.forward(self.target, batch.s_next)
        y = neural.td_target(batch.r, q_next, self.gamma, batch.done)
        q, cache = neural.forward(self.online, batch.s)
        rows = np.arange(len(batch))
        pred = q[rows, batch.a]
        loss = neural.mse_loss(pred, y)
        self.last_td_error = float(np.mean(np.abs(y - pred)))

        upstream = np.zeros_like(q)
        upstream[rows, batch.a] = neural.mse_grad(pred, y)
        grads = neural.backward(self.online, cache, upstream)
        if self.grad_clip is not None:
            norm = neural.global_norm(grads)
            if norm > self.grad_clip:
                grads = neural.scale(grads, self.grad_clip / norm)
        self.online = neural.sgd_step(self.online, grads, self.lr)
        self.grad_steps += 1
        if self.grad_steps % self.target_sync_steps == 0:
            self.sync_target()
        return loss


def train_step(agent: DQNAgent, batch) -> float:
    return agent.train_step(batch)


def sync_target(agent: DQNAgent) -> DQNAgent:
    return agent.sync_target()


# -- episodes and metrics -----------------------------------------------------

@dataclass
class EpisodeMetrics:
    episode: int
    ret: float
    steps: int
    collision: int
    mean_speed: float
    distance: float
    epsilon: float = 0.0
    mean_td_error: float = math.nan
    return_normalized: float = math.nan
    actions: list = field(default_factory=list)


@dataclass
class EvalMetrics:
    episodes: list

    @property
    def mean_return(self) -> float:
        return float(np.mean([e.ret for e in self.episodes])) if self.episodes else math.nan

    @property
    def mean_return_normalized(self) -> float:
        return float(np.mean([e.return_normalized for e in self.episodes])) if self.episodes else math.nan

    @property
    def collision_rate(self) -> float:
        return float(np.mean([e.collision for e in self.episodes])) if self.episodes else math.nan

    @property
    def mean_speed(self) -> float:
        return float(np.mean([e.mean_speed for e in self.episodes])) if self.episodes else math.nan

    @property
    def mean_distance(self) -> float:
        return float(np.mean([e.distance for e in self.episodes])) if self.episodes else math.nan

    def summary(self) -> dict:
        return {
            "episodes": len(self.episodes),
            "return": self.mean_return,
            "return_normalized": self.mean_return_normalized,
            "collision": self.collision_rate,
            "mean_speed": self.mean_speed,
            "distance": self.mean_distance,
        }


def normalize_returns(rows: list) -> None:
    """Min-max scale episode returns over the run into [0, 1] in place."""
    if not rows:
        return
    rets = [r.ret for r in rows]
    lo, hi = min(rets), max(rets)
    for r in rows:
        r.return_normalized = (r.ret - lo) / (hi - lo) if hi > lo else 1.0


Policy = Union[str, neural.Params]


def run_episode(env: HighwayEnv, seed: int, policy: Policy, episode: int = 0,
                tick_hook=None) -> EpisodeMetrics:
    """Greedy rollout of a fixed policy (network parameters or ``"reference"``)."""
    obs = env.reset(seed)
    total, done, info = 0.0, False, {}
    actions = []
    while not done:
        if isinstance(policy, str):
            if policy != REFERENCE:
                raise ConfigError(f"unknown policy {policy!r}")
            obs, r, done, info = env.step_reference(tick_hook=tick_hook)
        else:
            a = neural.argmax_action(neural.forward(policy, obs)[0])
            obs, r, done, info = env.step(MetaAction.from_index(a), tick_hook=tick_hook)
        actions.append(info["action"])
        total += r
    elapsed = env.world.time
    return EpisodeMetrics(episode, total, env.steps, int(info["collision"]),
                          env.distance / elapsed if elapsed > 0 else 0.0, env.distance,
                          actions=actions)


def evaluate(policy: Policy, env_cfg: EnvConfig, n_episodes: int = 10,
             master_seed: int = 0) -> EvalMetrics:
    env = HighwayEnv(env_cfg)
    rows = [run_episode(env, derive_seed(master_seed, EVAL_ENV_STREAM, i), policy, i)
            for i in range(n_episodes)]
    normalize_returns(rows)
    return EvalMetrics(rows)


@dataclass
class TrainingResult:
    params: Optional[neural.Params]
    metrics: list
    checkpoints: list


def run_training(cfg: AgentConfig, env_cfg: EnvConfig, master_seed: int = 0,
                 checkpoint_fn: Optional[Callable[[int, neural.Params], None]] = None,
                 progress: Optional[Callable[[EpisodeMetrics], None]] = None) -> TrainingResult:
    """Train on the highway environment; bit-reproducible for a given ``master_seed``.

    ``checkpoint_fn(episode, params)`` is called every ``cfg.checkpoint_every``
    episodes (1-based).
    """
    cfg.validate()
    if cfg.algorithm == TABULAR:
        raise ConfigError("the tabular baseline runs on the gridworld only (see gridworld module)")
    env = HighwayEnv(env_cfg)
    rows: list = []
    checkpoints: list = []

    if cfg.algorithm == REFERENCE:
        for ep in range(cfg.episodes):
            m = run_episode(env, derive_seed(master_seed, TRAIN_ENV_STREAM, ep), REFERENCE, ep)
            rows.append(m)
            if progress:
                progress(m)
        normalize_returns(rows)
        return TrainingResult(None, rows, checkpoints)

    rng = np.random.default_rng([int(master_seed), AGENT_STREAM])
    params = build_network(cfg.algorithm, env_cfg.obs_size,
                           np.random.default_rng([int(master_seed), INIT_STREAM]),
                           cfg.hidden, cfg.dueling_agg)
    agent = DQNAgent(params, cfg.gamma, cfg.nn_lr, cfg.target_sync_steps, cfg.grad_clip)
    buf = ReplayBuffer(cfg.buffer_capacity, env_cfg.obs_size)
    sched = cfg.schedule
    step = 0

    for ep in range(cfg.episodes):
        obs = env.reset(derive_seed(master_seed, TRAIN_ENV_STREAM, ep))
        total, done, info = 0.0, False, {}
        td_errors, actions = [], []
        while not done:
            eps = epsilon(step, sched)
            a = select_action(agent.q_values(obs), eps, rng)
            next_obs, r, done, info = env.step(MetaAction.from_index(a))
            buf.push(Transition(obs, a, r, next_obs, done))
            step += 1
            total += r
            actions.append(int(MetaAction.from_index(a)))
            if len(buf) >= cfg.batch and step % cfg.train_every == 0:
                agent.train_step(buf.sample(cfg.batch, rng))
                td_errors.append(agent.last_td_error)
            obs = next_obs
        elapsed = env.world.time
        m = EpisodeMetrics(ep, total, env.steps, int(info["collision"]),
                           env.distance / elapsed if elapsed > 0 else 0.0, env.distance,
                           epsilon(step, sched),
                           float(np.mean(td_errors)) if td_errors else math.nan,
                           actions=actions)
        rows.append(m)
        if progress:
            progress(m)
        if checkpoint_fn and cfg.checkpoint_every and (ep + 1) % cfg.checkpoint_every == 0:
            checkpoint_fn(ep + 1, agent.online)
            checkpoints.append(ep + 1)

    normalize_returns(rows)
    return TrainingResult(agent.online, rows, checkpoints)
