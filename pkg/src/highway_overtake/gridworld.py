"""Small deterministic gridworld for the tabular Q-learning baseline.

The highway observation space is continuous, so tabular Q-learning is
exercised here, where value iteration gives the exact optimum to compare
against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import QTable, select_action, tabular_q_update

UP, DOWN, LEFT, RIGHT = range(4)
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


@dataclass(frozen=True)
class GridWorld:
    size: int = 4
    goal: tuple = (3, 3)
    goal_reward: float = 1.0
    step_reward: float = 0.0

    @property
    def n_actions(self) -> int:
        return len(MOVES)

    def states(self) -> list:
        return [(r, c) for r in range(self.size) for c in range(self.size)]

    def is_terminal(self, s) -> bool:
        return tuple(s) == tuple(self.goal)

    def step(self, s, a):
        """Deterministic move; bumping into a wall leaves the agent in place."""
        dr, dc = MOVES[a]
        r = min(max(s[0] + dr, 0), self.size - 1)
        c = min(max(s[1] + dc, 0), self.size - 1)
        nxt = (r, c)
        done = self.is_terminal(nxt)
        return nxt, (self.goal_reward if done else self.step_reward), done


def value_iteration(world: GridWorld, gamma: float, tol: float = 1e-10, max_iter: int = 10000):
    """Exact optimal action values by synchronous Bellman backups.

    Returns ``(Q, residual)`` with ``Q`` a dict state -> action-value array.
    """
    states = world.states()
    v = {s: 0.0 for s in states}
    residual = np.inf
    for _ in range(max_iter):
        q = {}
        for s in states:
            if world.is_terminal(s):
                q[s] = np.zeros(world.n_actions)
                continue
            row = np.empty(world.n_actions)
            for a in range(world.n_actions):
                nxt, r, done = world.step(s, a)
                row[a] = r + (0.0 if done else gamma * v[nxt])
            q[s] = row
        new_v = {s: float(q[s].max()) for s in states}
        residual = max(abs(new_v[s] - v[s]) for s in states)
        v = new_v
        if residual <= tol:
            break
    return q, residual


def optimal_actions(q_row: np.ndarray, atol: float = 1e-9) -> set:
    return set(np.flatnonzero(q_row >= q_row.max() - atol).tolist())


def train_tabular(world: GridWorld, episodes: int = 5000, alpha: float = 0.2, gamma: float = 0.8,
                  eps: float = 0.2, max_steps: int = 100, seed: int = 0) -> QTable:
    """Epsilon-greedy Q-learning with uniformly random non-goal start states."""
    rng = np.random.default_rng(seed)
    q = QTable(world.n_actions)
    starts = [s for s in world.states() if not world.is_terminal(s)]
    for _ in range(episodes):
        s = starts[rng.integers(len(starts))]
        for _ in range(max_steps):
            a = select_action(q[s], eps, rng)
            nxt, r, done = world.step(s, a)
            tabular_q_update(q, s, a, r, nxt, alpha, gamma, terminal=done)
            s = nxt
            if done:
                break
    return q


def greedy_policy(q: QTable, world: GridWorld) -> dict:
    return {s: int(np.argmax(q[s])) for s in world.states() if not world.is_terminal(s)}
