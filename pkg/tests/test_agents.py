from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from highway_overtake import neural
from highway_overtake.agents import (DDQN, DQN, REFERENCE, TABULAR, AgentConfig, DQNAgent,
                                     EpsilonSchedule, QTable, ReplayBuffer, Transition,
                                     TransitionBatch,
                                     build_network, derive_seed, epsilon, evaluate,
                                     replay_push, replay_sample, run_training, select_action,
                                     sync_target, tabular_q_update, train_step)
from highway_overtake.env import EnvConfig
from highway_overtake.errors import ConfigError, UnderfullError
from highway_overtake.sim import ScenarioConfig

EMPTY = EnvConfig(scenario=ScenarioConfig(vehicles_per_lane=0))
SMALL = EnvConfig(scenario=ScenarioConfig(vehicles_per_lane=2))


def transition(rng, n=4, done=False, a=None):
    return Transition(rng.normal(size=n), int(rng.integers(5)) if a is None else a,
                      float(rng.normal()), rng.normal(size=n), done)


# -- tabular -----------------------------------------------------------------

def test_tabular_update_examples():
    q = QTable(5)
    tabular_q_update(q, "s", 2, 1.0, "t", 0.2, 0.8)
    assert q["s"][2] == pytest.approx(0.2)
    q2 = QTable(5)
    q2["s"][:] = [1, 2, 3, 4, 5]
    tabular_q_update(q2, "s", 0, 9.0, "t", 0.0, 0.8)
    np.testing.assert_array_equal(q2["s"], [1, 2, 3, 4, 5])
    tabular_q_update(q2, "s", 0, -3.5, "s", 1.0, 0.0)
    assert q2["s"][0] == -3.5


def test_tabular_terminal_has_no_bootstrap():
    q = QTable(2)
    q["goal"][:] = 100.0
    tabular_q_update(q, "s", 0, 1.0, "goal", 1.0, 0.9, terminal=True)
    assert q["s"][0] == 1.0
    with pytest.raises(ValueError):
        tabular_q_update(q, "s", 0, 1.0, "goal", 1.5, 0.9)


# -- exploration -------------------------------------------------------------

def test_epsilon_examples():
    assert epsilon(0) == 1.0
    assert epsilon(6000) == pytest.approx(0.05)
    assert epsilon(3000) == pytest.approx(0.525)
    assert epsilon(10**6) == 0.05
    with pytest.raises(ConfigError):
        EpsilonSchedule(0.1, 0.5, 10)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 20000), st.integers(0, 20000))
def test_epsilon_monotone_and_bounded(s1, s2):
    lo, hi = sorted((s1, s2))
    assert epsilon(hi) <= epsilon(lo)
    assert 0.05 <= epsilon(lo) <= 1.0


def test_greedy_when_epsilon_zero(rng):
    q = np.array([0.1, 0.5, 0.3, 0.5, -1])
    assert all(select_action(q, 0.0, rng) == 1 for _ in range(100))


def test_uniform_when_epsilon_one():
    rng = np.random.default_rng(2024)
    n = 100_000
    counts = np.bincount([select_action(np.zeros(5), 1.0, rng) for _ in range(n)], minlength=5)
    sigma = np.sqrt(n * 0.2 * 0.8)
    assert np.all(np.abs(counts - n * 0.2) <= 3 * sigma)


def test_selection_reproducible():
    q = np.arange(5.0)
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    s1 = [select_action(q, 0.5, r1) for _ in range(200)]
    s2 = [select_action(q, 0.5, r2) for _ in range(200)]
    assert s1 == s2


def test_draw_count_independent_of_branch():
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    select_action(np.zeros(5), 0.0, r1)
    select_action(np.zeros(5), 1.0, r2)
    assert r1.random() == r2.random()


# -- replay ------------------------------------------------------------------

def test_replay_push_and_evict(rng):
    buf = ReplayBuffer(2, 4)
    t1, t2, t3 = (transition(rng) for _ in range(3))
    replay_push(buf, t1)
    assert len(buf) == 1
    replay_push(buf, t2)
    replay_push(buf, t3)
    kept = buf.contents()
    assert len(kept) == 2
    np.testing.assert_array_equal(kept[0].s, t2.s)
    np.testing.assert_array_equal(kept[1].s, t3.s)


def test_replay_sample_reproducible(rng):
    buf = ReplayBuffer(10, 4)
    for _ in range(6):
        buf.push(transition(rng))
    a = replay_sample(buf, 6, np.random.default_rng(1))
    b = replay_sample(buf, 6, np.random.default_rng(1))
    np.testing.assert_array_equal(a.s, b.s)
    np.testing.assert_array_equal(a.a, b.a)


def test_replay_underfull(rng):
    buf = ReplayBuffer(10, 4)
    buf.push(transition(rng))
    with pytest.raises(UnderfullError):
        buf.sample(2, rng)


@settings(max_examples=50, deadline=None)
@given(cap=st.integers(1, 20), n=st.integers(0, 60))
def test_replay_keeps_latest(cap, n):
    rng = np.random.default_rng(n)
    buf = ReplayBuffer(cap, 3)
    pushed = [transition(rng, 3) for _ in range(n)]
    for t in pushed:
        buf.push(t)
    kept = buf.contents()
    assert len(kept) == min(cap, n)
    for got, want in zip(kept, pushed[-cap:] if n else []):
        np.testing.assert_array_equal(got.s, want.s)
        assert got.a == want.a and got.r == want.r and got.done == want.done


# -- DQN updates -------------------------------------------------------------

def small_agent(rng, algorithm=DQN, lr=1e-2, sync=10**9):
    return DQNAgent(build_network(algorithm, 4, rng, hidden=16), gamma=0.8, lr=lr,
                    target_sync_steps=sync, grad_clip=None)


@pytest.mark.parametrize("algorithm", [DQN, DDQN])
def test_fixed_point_batch(rng, algorithm):
    agent = small_agent(rng, algorithm)
    ts = [transition(rng) for _ in range(8)]
    # choose rewards so every target equals the current prediction
    fixed = []
    for t in ts:
        q = agent.q_values(t.s)[t.a]
        boot = 0.8 * neural.forward(agent.target, t.s_next)[0].max()
        fixed.append(t._replace(r=float(q - boot)))
    before = [a.copy() for a in agent.online.arrays()]
    loss = train_step(agent, fixed)
    assert loss == pytest.approx(0.0, abs=1e-20)
    for a, b in zip(agent.online.arrays(), before):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


@pytest.mark.parametrize("algorithm", [DQN, DDQN])
def test_single_transition_descends(rng, algorithm):
    agent = small_agent(rng, algorithm, lr=1e-3)
    t = [transition(rng)]
    before = agent.train_step(t)
    after = agent.train_step(t)
    assert after <= before


def test_regression_with_frozen_target(rng):
    agent = small_agent(rng, DDQN, lr=5e-3)
    batch = [transition(rng, done=True) for _ in range(8)]
    loss = None
    for _ in range(5000):
        loss = agent.train_step(batch)
        if loss < 1e-4:
            break
    assert loss < 1e-4


def test_supervised_capacity():
    rng = np.random.default_rng(11)
    states = rng.uniform(-1, 1, size=(100, 4))
    target_net = neural.init_mlp([4, 8, 5], np.random.default_rng(99))
    targets = neural.forward(target_net, states)[0]
    agent = DQNAgent(build_network(DDQN, 4, rng, hidden=64), lr=0.05, grad_clip=None,
                     target_sync_steps=10**9)
    batches = [[Transition(s, a, float(targets[i, a]), s, True) for i, s in enumerate(states)]
               for a in range(5)]
    full = TransitionBatch.from_transitions([t for b in batches for t in b])
    loss = np.inf
    for _ in range(6000):
        loss = agent.train_step(full)
        if loss < 1e-3:
            break
    assert loss < 1e-3


def test_sync_target(rng):
    agent = small_agent(rng, DDQN)
    init = neural.params_digest(agent.online)
    assert neural.params_digest(agent.target) == init
    agent.train_step([transition(rng) for _ in range(4)])
    assert neural.params_digest(agent.target) == init
    sync_target(agent)
    x = rng.normal(size=4)
    np.testing.assert_array_equal(neural.forward(agent.target, x)[0],
                                  neural.forward(agent.online, x)[0])
    d = neural.params_digest(agent.target)
    sync_target(agent)
    assert neural.params_digest(agent.target) == d
    assert agent.target is not agent.online


def test_periodic_sync(rng):
    agent = small_agent(rng, DQN, sync=3)
    batch = [transition(rng) for _ in range(4)]
    for _ in range(3):
        agent.train_step(batch)
    assert neural.params_digest(agent.target) == neural.params_digest(agent.online)
    agent.train_step(batch)
    assert neural.params_digest(agent.target) != neural.params_digest(agent.online)


def test_gradient_clip_bounds_step(rng):
    agent = DQNAgent(build_network(DQN, 4, rng, hidden=8), lr=1.0, grad_clip=0.5)
    before = [a.copy() for a in agent.online.arrays()]
    agent.train_step([Transition(np.ones(4), 0, 1e6, np.ones(4), True)])
    step = np.sqrt(sum(np.sum((a - b) ** 2) for a, b in zip(agent.online.arrays(), before)))
    assert step == pytest.approx(0.5, rel=1e-9)


def test_network_layouts(rng):
    dqn = build_network(DQN, 23, rng)
    assert dqn.layer_dims == [23, 128, 128, 5]
    ddqn = build_network(DDQN, 23, rng)
    assert isinstance(ddqn, neural.DuelingParams) and ddqn.output_dim == 5
    with pytest.raises(ConfigError):
        build_network(REFERENCE, 23, rng)


# -- configuration -----------------------------------------------------------

def test_agent_config_defaults():
    c = AgentConfig()
    assert (c.gamma, c.tabular_alpha, c.batch, c.buffer_capacity, c.target_sync_steps) == \
        (0.8, 0.2, 32, 10000, 500)
    assert c.episodes == 2000 and c.nn_lr == 5e-4


@pytest.mark.parametrize("bad", [dict(gamma=1.5), dict(batch=20000), dict(algorithm="sarsa"),
                                 dict(nn_lr=0.0), dict(dueling_agg="median")])
def test_agent_config_validation(bad):
    with pytest.raises(ConfigError):
        replace(AgentConfig(), **bad).validate()


def test_seed_streams_are_distinct():
    seeds = {derive_seed(0, s, i) for s in range(4) for i in range(50)}
    assert len(seeds) == 200
    assert derive_seed(7, 1, 3) == derive_seed(7, 1, 3)


# -- training and evaluation loops -------------------------------------------

def test_one_episode_on_empty_road():
    res = run_training(replace(AgentConfig(), episodes=1), EMPTY, master_seed=0)
    assert len(res.metrics) == 1
    m = res.metrics[0]
    assert m.collision == 0 and m.steps == 100 and m.distance > 0


def test_reference_training_has_no_parameters():
    res = run_training(replace(AgentConfig(), algorithm=REFERENCE, episodes=2), SMALL, 0)
    assert res.params is None and len(res.metrics) == 2
    assert all(np.isnan(m.mean_td_error) for m in res.metrics)


def test_tabular_not_run_on_highway():
    with pytest.raises(ConfigError):
        run_training(replace(AgentConfig(), algorithm=TABULAR, episodes=1), SMALL, 0)


def test_training_deterministic_and_checkpoints():
    cfg = replace(AgentConfig(), episodes=4, checkpoint_every=2)
    seen = []
    a = run_training(cfg, SMALL, 3, checkpoint_fn=lambda ep, p: seen.append(ep))
    b = run_training(cfg, SMALL, 3)
    assert seen == [2, 4] and a.checkpoints == [2, 4]
    assert neural.params_digest(a.params) == neural.params_digest(b.params)
    assert [m.ret for m in a.metrics] == [m.ret for m in b.metrics]
    norm = [m.return_normalized for m in a.metrics]
    assert min(norm) == 0.0 and max(norm) == 1.0


def test_epsilon_logged_per_episode():
    res = run_training(replace(AgentConfig(), episodes=3), SMALL, 1)
    eps = [m.epsilon for m in res.metrics]
    assert eps == sorted(eps, reverse=True) and all(0.05 <= e <= 1 for e in eps)


def test_evaluate_reference_on_empty_road():
    m = evaluate(REFERENCE, EMPTY, n_episodes=3, master_seed=0)
    assert len(m.episodes) == 3
    assert m.collision_rate == 0.0
    for e in m.episodes:
        assert 23 <= e.mean_speed <= 25


def test_evaluate_defaults_to_ten_episodes():
    assert evaluate.__defaults__[0] == 10


def test_evaluate_is_side_effect_free(rng):
    params = build_network(DDQN, SMALL.obs_size, rng, hidden=16)
    digest = neural.params_digest(params)
    a = evaluate(params, SMALL, 2, 5)
    b = evaluate(params, SMALL, 2, 5)
    assert neural.params_digest(params) == digest
    assert a.summary() == b.summary()
