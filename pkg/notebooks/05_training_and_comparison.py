# Train DQN and dueling DQN on light traffic and set them beside the reference model.
# A few hundred episodes take about a minute per agent.
from dataclasses import replace

import numpy as np

from highway_overtake.agents import DDQN, DQN, REFERENCE, AgentConfig, evaluate, run_training
from highway_overtake.env import EnvConfig
from highway_overtake.sim import ScenarioConfig

env = EnvConfig(scenario=ScenarioConfig(vehicles_per_lane=3))
episodes = 300

results = {}
for algorithm in (DQN, DDQN):
    cfg = replace(AgentConfig(), algorithm=algorithm, episodes=episodes)
    results[algorithm] = run_training(cfg, env, master_seed=0)

for algorithm, res in results.items():
    rets = np.array([m.ret for m in res.metrics])
    steps = np.array([m.steps for m in res.metrics])
    crash = np.array([m.collision for m in res.metrics])
    print(algorithm)
    print("  return   first/last 30:", rets[:30].mean().round(1), rets[-30:].mean().round(1))
    print("  steps    first/last 30:", steps[:30].mean().round(1), steps[-30:].mean().round(1))
    print("  crashes  first/last 50:", crash[:50].mean(), crash[-50:].mean())

# greedy evaluation, ten episodes each
for name, policy in ((REFERENCE, REFERENCE), (DQN, results[DQN].params),
                     (DDQN, results[DDQN].params)):
    s = evaluate(policy, env, 10, master_seed=0).summary()
    print(name, {k: round(v, 3) for k, v in s.items()})

# the reward is negative every step unless the ego runs at 40 m/s in lane 1, and a crash
# costs only 1, so with gamma = 0.8 ending an episode early can look cheaper than
# driving on; the learned policies tend to find that out
