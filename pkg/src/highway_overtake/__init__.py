"""Highway overtaking decisions with value-based reinforcement learning.

Modules:

* ``sim``       - vehicle kinematics, collision checks, scenario spawning
* ``drivers``   - IDM car following, MOBIL lane changes, low-level controllers
* ``traffic``   - advancing the whole world one simulation tick
* ``env``       - the ego decision environment (meta-actions, observation, reward)
* ``neural``    - numpy networks with backpropagation, plain and dueling
* ``agents``    - replay, exploration, DQN/DDQN training and evaluation
* ``gridworld`` - tabular Q-learning against an exact value-iteration optimum
* ``config``, ``formats``, ``harness``, ``cli`` - run plumbing
"""
from .agents import AgentConfig, DQNAgent, evaluate, run_training
from .config import RunConfig, load_config, parse_config
from .drivers import DriverParams, IdmParams, MobilParams, idm_acceleration, mobil_incentive, \
    mobil_safety
from .env import EnvConfig, HighwayEnv, MetaAction
from .errors import ConfigError, InvalidInputError, ShapeError, StateError, UnderfullError, \
    WeightsFormatError

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "ConfigError", "DQNAgent", "DriverParams", "EnvConfig", "HighwayEnv",
    "IdmParams", "InvalidInputError", "MetaAction", "MobilParams", "RunConfig", "ShapeError",
    "StateError", "UnderfullError", "WeightsFormatError", "evaluate", "idm_acceleration",
    "load_config", "mobil_incentive", "mobil_safety", "parse_config", "run_training",
]
