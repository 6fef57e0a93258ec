# The decision problem the agents see: five meta-actions at 1 Hz.
import numpy as np

from highway_overtake.env import EnvConfig, HighwayEnv, MetaAction, discounted_return
from highway_overtake.sim import ScenarioConfig

env = HighwayEnv(EnvConfig())
obs = env.reset(seed=0)
print(obs.shape)                 # 3 ego features + 5 neighbours x 4
print(np.round(obs[:3], 3))      # speed, lane, lateral offset
print(np.round(obs[3:].reshape(5, 4), 3))

# reward is zero only at 40 m/s in lane 1; everything else costs
plan = [MetaAction.LANE_LEFT, MetaAction.IDLE, MetaAction.FASTER, MetaAction.FASTER]
for a in plan:
    obs, r, done, info = env.step(a)
    print(a.name, round(r, 2), info["cause"], round(info["speed"], 2), env.world.ego.lane)
    if done:
        break

# the rule-based benchmark drives the ego with the same IDM + MOBIL stack as traffic
env.reset(seed=0)
rewards, labels = [], []
done = False
while not done:
    _, r, done, info = env.step_reference()
    rewards.append(r)
    labels.append(info["action"])
print(len(rewards), info["cause"], round(sum(rewards), 1), round(info["distance"], 1))
print(np.bincount(labels, minlength=6)[1:])   # counts of actions 1..5
print(discounted_return(rewards, 0.8))

# an empty road: the reference holds its spawn speed for the whole horizon
empty = HighwayEnv(EnvConfig(scenario=ScenarioConfig(vehicles_per_lane=0)))
empty.reset(seed=1)
steps = 0
done = False
while not done:
    *_, done, info = empty.step_reference()
    steps += 1
print(steps, empty.world.tick, round(info["speed"], 3))
