"""Decision policies: the deep Q-learner and the heuristic baselines.

All policies expose ``select_action(env, state, rng) -> int`` returning a
joint action index; only DqnAgent learns. The agent follows the sklearn
estimator convention (constructor holds hyperparameters verbatim, fitted
state lands on trailing-underscore attributes) so it clones cleanly across
the points of a trade-off sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .environment import JointAction, Move, RelayGridEnv
from .errors import ConfigError
from .network import (
    AdamState,
    Minibatch,
    Mlp,
    copy_params,
    td_targets,
    train_step,
)


@dataclass(frozen=True)
class TransitionRecord:
    """One (s, a, r, s', done) tuple in encoded form."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling.

    Backed by preallocated arrays; once full, each push overwrites the
    oldest record. Sampling is without replacement.
    """

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._states = np.empty((capacity, state_dim), dtype=np.float64)
        self._actions = np.empty(capacity, dtype=np.int64)
        self._rewards = np.empty(capacity, dtype=np.float64)
        self._next_states = np.empty((capacity, state_dim), dtype=np.float64)
        self._dones = np.empty(capacity, dtype=bool)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, record: TransitionRecord) -> None:
        i = self._cursor
        self._states[i] = record.state
        self._actions[i] = record.action
        self._rewards[i] = record.reward
        self._next_states[i] = record.next_state
        self._dones[i] = record.done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Minibatch:
        if batch_size > self._size:
            raise ConfigError(f"cannot sample {batch_size} from {self._size} stored")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return Minibatch(
            states=self._states[idx].copy(),
            actions=self._actions[idx].copy(),
            rewards=self._rewards[idx].copy(),
            next_states=self._next_states[idx].copy(),
            dones=self._dones[idx].copy(),
        )

    def records(self) -> list[TransitionRecord]:
        """Stored transitions, oldest first (test and debug aid)."""
        if self._size < self.capacity:
            order = range(self._size)
        else:
            order = [(self._cursor + k) % self.capacity for k in range(self.capacity)]
        return [
            TransitionRecord(
                state=self._states[i].copy(), action=int(self._actions[i]),
                reward=float(self._rewards[i]), next_state=self._next_states[i].copy(),
                done=bool(self._dones[i]),
            )
            for i in order
        ]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear exploration decay: start -> floor over the first
    ``decay_fraction`` of training episodes, flat floor afterwards."""

    start: float = 1.0
    floor: float = 0.05
    decay_fraction: float = 0.5

    def value(self, episode: int, total_episodes: int) -> float:
        if not 0.0 <= self.floor <= self.start <= 1.0:
            raise ConfigError(f"need 0 <= floor <= start <= 1, got {self}")
        horizon = self.decay_fraction * total_episodes
        if horizon <= 0 or episode >= horizon:
            return self.floor
        return self.start + (self.floor - self.start) * (episode / horizon)


def dqn_select(net: Mlp, encoding: np.ndarray, epsilon: float,
               rng: np.random.Generator | None) -> int:
    """Epsilon-greedy action from a Q-network; greedy ties take the lowest index."""
    n_actions = net.weights[-1].shape[1]
    if epsilon > 0.0:
        if rng is None:
            raise ConfigError("epsilon > 0 needs an rng")
        if rng.random() < epsilon:
            return int(rng.integers(n_actions))
    q = net.forward(encoding)
    return int(np.argmax(q[0]))


# -------------------------------------------------------------- baselines


def _step_toward(cell: tuple[int, int], target: tuple[int, int]) -> Move:
    """Manhattan-reducing move, x-axis first; hover on arrival."""
    if cell[0] != target[0]:
        return Move.EAST if target[0] > cell[0] else Move.WEST
    if cell[1] != target[1]:
        return Move.NORTH if target[1] > cell[1] else Move.SOUTH
    return Move.HOVER


class GreedyAgePolicy:
    """Each UAV u targets the (u+1)-th oldest cluster (age ties: lower id),
    flies toward its centroid cell, and schedules it every slot."""

    name = "ga"

    def select_action(self, env: RelayGridEnv, state, rng=None) -> int:
        order = sorted(range(1, env.n_clusters + 1),
                       key=lambda cid: (-state.aoi[cid - 1], cid))
        moves, schedules = [], []
        for u, uav in enumerate(state.uavs):
            target = order[u % env.n_clusters]
            schedules.append(target)
            moves.append(_step_toward(uav.cell, env.centroid_cell(target)))
        return env.encode_action(JointAction(tuple(moves), tuple(schedules)))


class NearestClusterPolicy:
    """Each UAV schedules its nearest centroid (Euclidean from its cell
    center, ties: lower id) and moves uniformly at random."""

    name = "nn"

    def select_action(self, env: RelayGridEnv, state, rng: np.random.Generator) -> int:
        moves, schedules = [], []
        for uav in state.uavs:
            ux, uy = env.grid.cell_xy(uav.cell)
            d2 = [
                (cx - ux) ** 2 + (cy - uy) ** 2
                for cx, cy in env.assignment.centroids
            ]
            schedules.append(int(np.argmin(d2)) + 1)
            moves.append(int(rng.integers(5)))
        return env.encode_action(JointAction(tuple(moves), tuple(schedules)))


class RandomWalkPolicy:
    """Uniform over the whole joint action space."""

    name = "rw"

    def select_action(self, env: RelayGridEnv, state, rng: np.random.Generator) -> int:
        return int(rng.integers(env.n_actions))


BASELINES = {
    GreedyAgePolicy.name: GreedyAgePolicy,
    NearestClusterPolicy.name: NearestClusterPolicy,
    RandomWalkPolicy.name: RandomWalkPolicy,
}


# ------------------------------------------------------------------ agent


class DqnAgent(BaseEstimator):
    """Deep Q-learner over the joint move/schedule action space.

    fit(env) runs the whole training loop on the given environment:
    epsilon-greedy rollouts into a replay buffer, uniform minibatch
    regression onto one-step TD targets, and a hard target-network sync
    every ``target_sync`` gradient steps. Fitted state: ``network_``,
    ``target_network_``, ``adam_``, ``history_`` (one dict per episode).

    predict(X) maps encoded states to greedy action indices, which is as
    close to the sklearn predictor contract as a control policy gets.
    """

    name = "dqn"

    def __init__(self, episodes: int = 3000, gamma: float = 0.99,
                 learning_rate: float = 1e-4, batch_size: int = 64,
                 buffer_capacity: int = 100_000, warmup: int = 1000,
                 target_sync: int = 1000, epsilon_start: float = 1.0,
                 epsilon_floor: float = 0.05, epsilon_decay_fraction: float = 0.5,
                 hidden_sizes: tuple[int, ...] = (64, 128, 256, 128, 128),
                 huber_delta: float | None = None, grad_clip: float | None = None,
                 random_state: int | None = None):
        self.episodes = episodes
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.buffer_capacity = buffer_capacity
        self.warmup = warmup
        self.target_sync = target_sync
        self.epsilon_start = epsilon_start
        self.epsilon_floor = epsilon_floor
        self.epsilon_decay_fraction = epsilon_decay_fraction
        self.hidden_sizes = hidden_sizes
        self.huber_delta = huber_delta
        self.grad_clip = grad_clip
        self.random_state = random_state

    def _check_hyper(self) -> None:
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.batch_size < 1 or self.batch_size > self.buffer_capacity:
            raise ConfigError("need 1 <= batch_size <= buffer_capacity")
        if self.target_sync < 1:
            raise ConfigError("target_sync must be >= 1")
        if self.warmup < self.batch_size:
            raise ConfigError("warmup must be >= batch_size")

    def fit(self, env: RelayGridEnv, y=None):
        """Train on ``env`` (which is reset repeatedly and consumed)."""
        self._check_hyper()
        seed_seq = np.random.SeedSequence(self.random_state)
        init_rng, act_rng, sample_rng = map(np.random.default_rng, seed_seq.spawn(3))

        sizes = [env.encoding_size, *map(int, self.hidden_sizes), env.n_actions]
        net = Mlp.create(sizes, init_rng)
        target = copy_params(net)
        adam = AdamState.for_network(net, lr=self.learning_rate)
        buffer = ReplayBuffer(self.buffer_capacity, env.encoding_size)
        schedule = EpsilonSchedule(self.epsilon_start, self.epsilon_floor,
                                   self.epsilon_decay_fraction)

        history = []
        grad_steps = 0
        for episode in range(self.episodes):
            epsilon = schedule.value(episode, self.episodes)
            state = env.reset()
            encoded = env.encode_state(state)
            ep_reward = 0.0
            ep_age = 0.0
            ep_power = 0.0
            losses = 0.0
            n_losses = 0
            length = 0
            done = False
            while not done:
                action = dqn_select(net, encoded, epsilon, act_rng)
                out = env.step(env.decode_action(action))
                next_encoded = env.encode_state(out.state)
                buffer.push(TransitionRecord(encoded, action, out.reward,
                                             next_encoded, out.done))
                if len(buffer) >= self.warmup:
                    batch = buffer.sample(self.batch_size, sample_rng)
                    targets = td_targets(batch, target, self.gamma)
                    losses += train_step(net, adam, batch, targets,
                                         self.huber_delta, self.grad_clip)
                    n_losses += 1
                    grad_steps += 1
                    if grad_steps % self.target_sync == 0:
                        target = copy_params(net)
                ep_reward += out.reward
                ep_age += out.info["device_age_mean"]
                ep_power += out.info["device_power_sum"] / env.n_devices
                length += 1
                encoded = next_encoded
                state = out.state
                done = out.done
            history.append({
                "episode": episode,
                "reward": ep_reward,
                "length": length,
                "mean_device_age": ep_age / length,
                "mean_device_power": ep_power / length,
                "epsilon": epsilon,
                "mean_loss": losses / n_losses if n_losses else float("nan"),
            })

        self.network_ = net
        self.target_network_ = target
        self.adam_ = adam
        self.history_ = history
        self.n_actions_ = env.n_actions
        self.encoding_size_ = env.encoding_size
        return self

    def predict(self, X) -> np.ndarray:
        """Greedy action indices for a batch of encoded states."""
        check_is_fitted(self, "network_")
        q = self.network_.forward(np.asarray(X, dtype=np.float64))
        return np.argmax(q, axis=1)

    def select_action(self, env: RelayGridEnv, state, rng=None,
                      epsilon: float = 0.0) -> int:
        check_is_fitted(self, "network_")
        return dqn_select(self.network_, env.encode_state(state), epsilon, rng)
