"""Policy tests.

Covers: replay buffer FIFO eviction and sampling, the linear epsilon
schedule, epsilon-greedy selection, the three heuristic baselines against
hand-worked action choices, and the DqnAgent estimator (hyperparameter
round-trip, micro-training determinism, fitted attributes, predict).
"""

import numpy as np
import pytest
from sklearn.base import clone

from uav_aoi.environment import JointAction, Move, UavState
from uav_aoi.errors import ConfigError
from uav_aoi.network import Mlp
from uav_aoi.policies import (
    BASELINES,
    DqnAgent,
    EpsilonSchedule,
    GreedyAgePolicy,
    NearestClusterPolicy,
    RandomWalkPolicy,
    ReplayBuffer,
    TransitionRecord,
    dqn_select,
)

from helpers import square_env


def record(i, dim=3):
    return TransitionRecord(
        state=np.full(dim, float(i)), action=i % 5, reward=float(-i),
        next_state=np.full(dim, float(i) + 0.5), done=(i % 7 == 0),
    )


# --------------------------------------------------------------- buffer


def test_buffer_fifo_eviction():
    buf = ReplayBuffer(capacity=8, state_dim=3)
    for i in range(100):
        buf.push(record(i))
        assert len(buf) == min(i + 1, 8)
    got = buf.records()
    assert [int(r.state[0]) for r in got] == list(range(92, 100))
    assert [r.action for r in got] == [i % 5 for i in range(92, 100)]


def test_buffer_sample_without_replacement():
    buf = ReplayBuffer(capacity=50, state_dim=2)
    for i in range(20):
        buf.push(record(i, dim=2))
    batch = buf.sample(20, np.random.default_rng(0))
    # all 20 distinct records must appear exactly once
    assert sorted(batch.states[:, 0].astype(int).tolist()) == list(range(20))
    assert batch.states.dtype == np.float64
    assert batch.dones.dtype == bool


def test_buffer_sample_too_large_rejected():
    buf = ReplayBuffer(capacity=10, state_dim=2)
    buf.push(record(0, dim=2))
    with pytest.raises(ConfigError):
        buf.sample(2, np.random.default_rng(0))


def test_buffer_sample_returns_copies():
    buf = ReplayBuffer(capacity=4, state_dim=2)
    for i in range(4):
        buf.push(record(i, dim=2))
    batch = buf.sample(4, np.random.default_rng(1))
    batch.states[:] = -1.0
    assert not np.any(buf.sample(4, np.random.default_rng(2)).states == -1.0)


# ------------------------------------------------------------- schedule


def test_epsilon_schedule_endpoints():
    s = EpsilonSchedule(start=1.0, floor=0.05, decay_fraction=0.5)
    assert s.value(0, 3000) == 1.0
    assert s.value(750, 3000) == pytest.approx(0.525)
    assert s.value(1500, 3000) == 0.05
    assert s.value(2999, 3000) == 0.05


def test_epsilon_schedule_monotone():
    s = EpsilonSchedule()
    values = [s.value(e, 200) for e in range(200)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert min(values) == 0.05


def test_epsilon_schedule_rejects_bad_range():
    with pytest.raises(ConfigError):
        EpsilonSchedule(start=0.1, floor=0.5).value(0, 10)


# -------------------------------------------------------------- selection


def test_dqn_select_greedy_takes_argmax():
    # identity-ish net: Q = state @ W, pick weights to order actions
    net = Mlp(weights=[np.array([[1.0, 3.0, 2.0]])], biases=[np.zeros(3)])
    a = dqn_select(net, np.array([1.0]), epsilon=0.0, rng=None)
    assert a == 1
    a = dqn_select(net, np.array([-1.0]), epsilon=0.0, rng=None)
    assert a == 0  # -1, -3, -2: argmax is action 0


def test_dqn_select_explores_uniformly():
    net = Mlp(weights=[np.array([[1.0, 3.0, 2.0]])], biases=[np.zeros(3)])
    rng = np.random.default_rng(3)
    seen = {dqn_select(net, np.array([1.0]), 1.0, rng) for _ in range(200)}
    assert seen == {0, 1, 2}
    with pytest.raises(ConfigError):
        dqn_select(net, np.array([1.0]), 0.5, rng=None)


# -------------------------------------------------------------- baselines


def test_greedy_age_targets_and_moves():
    env = square_env(n_uavs=2)
    env.reset()
    # ages tied at 1: tie breaks to cluster 1 for UAV 0, cluster 2 for UAV 1
    idx = GreedyAgePolicy().select_action(env, env.state)
    action = env.decode_action(idx)
    assert action.schedules == (1, 2)
    # UAV 0 at (-5,-5), cluster 1 centroid cell (0,0): x first -> EAST
    # UAV 1 at (5,-5), cluster 2 centroid cell (3,0): x first -> WEST
    assert action.moves == (Move.EAST, Move.WEST)


def test_greedy_age_prefers_oldest():
    env = square_env(n_uavs=1)
    env.reset()
    env.step(JointAction((Move.HOVER,), (1,)))  # ages now (1, 2)
    idx = GreedyAgePolicy().select_action(env, env.state)
    assert env.decode_action(idx).schedules == (2,)


def test_greedy_age_hovers_on_target():
    env = square_env(n_uavs=1)
    env.reset()
    state = env.state
    # rebuild the state with the UAV parked on cluster 1's centroid cell
    parked = type(state)(
        uavs=(UavState(cell=(0, 0), battery=200, home_depot=0),),
        aoi=(5, 1), beta=state.beta, t=0,
    )
    idx = GreedyAgePolicy().select_action(env, parked)
    action = env.decode_action(idx)
    assert action == JointAction((Move.HOVER,), (1,))


def test_greedy_age_wraps_when_more_uavs_than_clusters():
    env = square_env(n_uavs=3)
    env.reset()
    idx = GreedyAgePolicy().select_action(env, env.state)
    action = env.decode_action(idx)
    assert action.schedules == (1, 2, 1)  # third UAV wraps around


def test_nearest_cluster_schedules_closest():
    env = square_env(n_uavs=2)
    env.reset()
    rng = np.random.default_rng(0)
    idx = NearestClusterPolicy().select_action(env, env.state, rng)
    action = env.decode_action(idx)
    # UAV 0 at (-500,-500): cluster 1 centroid (0,50) is nearer
    # UAV 1 at (500,-500): cluster 2 centroid (300,50) is nearer
    assert action.schedules == (1, 2)
    assert all(0 <= m <= 4 for m in action.moves)


def test_nearest_cluster_tie_takes_lower_id():
    env = square_env(n_uavs=1)
    env.reset()
    # (1.5, 0.5) cells = (150, 50) m is equidistant from both centroids
    state = type(env.state)(
        uavs=(UavState(cell=(1, 0), battery=200, home_depot=0),),
        aoi=(1, 1), beta=(200,), t=0,
    )
    # (100,0): d1^2 = 100^2+50^2 = 12500; d2^2 = 200^2+50^2 -> cluster 1
    idx = NearestClusterPolicy().select_action(env, state, np.random.default_rng(0))
    assert env.decode_action(idx).schedules == (1,)


def test_random_walk_covers_space():
    env = square_env(n_uavs=1)
    env.reset()
    rng = np.random.default_rng(11)
    policy = RandomWalkPolicy()
    picks = {policy.select_action(env, env.state, rng) for _ in range(2000)}
    assert len(picks) > 0.9 * env.n_actions
    assert all(0 <= a < env.n_actions for a in picks)


def test_baseline_registry():
    assert set(BASELINES) == {"ga", "nn", "rw"}


# ------------------------------------------------------------------ agent


def micro_agent(seed=0, episodes=3):
    return DqnAgent(episodes=episodes, warmup=8, batch_size=8, target_sync=5,
                    buffer_capacity=500, hidden_sizes=(16, 16),
                    learning_rate=1e-3, random_state=seed)


def test_agent_estimator_roundtrip():
    agent = micro_agent(seed=9)
    params = agent.get_params()
    assert params["random_state"] == 9 and params["hidden_sizes"] == (16, 16)
    twin = clone(agent)
    assert twin.get_params() == params


def test_agent_fit_sets_state_and_history():
    env = square_env(n_uavs=1, t_max=30)
    agent = micro_agent().fit(env)
    assert agent.network_.layer_sizes == [3 * 1 + 2, 16, 16, env.n_actions]
    assert len(agent.history_) == 3
    for row in agent.history_:
        assert row["length"] >= 1
        assert row["reward"] <= 0.0
    assert agent.n_actions_ == env.n_actions


def test_agent_fit_deterministic_per_seed():
    a = micro_agent(seed=4).fit(square_env(t_max=30))
    b = micro_agent(seed=4).fit(square_env(t_max=30))
    for x, y in zip(a.network_.weights, b.network_.weights):
        assert np.array_equal(x, y)
    assert a.history_ == b.history_
    c = micro_agent(seed=5).fit(square_env(t_max=30))
    assert not all(
        np.array_equal(x, y) for x, y in zip(a.network_.weights, c.network_.weights)
    )


def test_agent_predict_and_select():
    env = square_env(n_uavs=1, t_max=30)
    agent = micro_agent().fit(env)
    env.reset()
    X = np.stack([env.encode_state(env.state)] * 4)
    acts = agent.predict(X)
    assert acts.shape == (4,)
    assert len(set(acts.tolist())) == 1
    direct = agent.select_action(env, env.state)
    assert direct == acts[0]


def test_agent_rejects_bad_hyper():
    env = square_env()
    with pytest.raises(ConfigError):
        DqnAgent(gamma=1.0).fit(env)
    with pytest.raises(ConfigError):
        DqnAgent(batch_size=100, buffer_capacity=10).fit(env)
    with pytest.raises(ConfigError):
        DqnAgent(warmup=4, batch_size=8).fit(env)


def test_unfitted_agent_refuses_predict():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        DqnAgent().predict(np.zeros((1, 5)))
