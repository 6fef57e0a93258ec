# Tabular Q-learning against the exact optimum on a 4x4 grid.
import numpy as np

from highway_overtake.gridworld import (GridWorld, greedy_policy, optimal_actions, train_tabular,
                                        value_iteration)

world = GridWorld()
q_star, residual = value_iteration(world, gamma=0.8)
print("residual", residual)
print(np.array([[q_star[(r, c)].max() for c in range(4)] for r in range(4)]).round(4))

q = train_tabular(world, episodes=5000, alpha=0.2, gamma=0.8, seed=0)
policy = greedy_policy(q, world)
arrows = "^v<>"
for r in range(4):
    print(" ".join("G" if world.is_terminal((r, c)) else arrows[policy[(r, c)]] for c in range(4)))

agree = all(policy[s] in optimal_actions(q_star[s]) for s in policy)
print("greedy policy optimal everywhere:", agree)
print(max(abs(q[s].max() - q_star[s].max()) for s in policy))
