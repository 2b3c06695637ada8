"""DQN and DDPG agents over the recurrent network engine.

Both agents keep a local and a target copy of each network, sample uniform
minibatches from a shared-format replay buffer, and explore with a decaying
noise source: DQN overrides its greedy action with probability epsilon, DDPG
adds zero-mean Gaussian noise to its continuous action.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .nn import Adam, Network, TrainingError, soft_update

N_ACTIONS = 7          # discrete actions 0..6 (CW exponents)
ACTION_LOW, ACTION_HIGH = 0.0, 6.0
REPLAY_CAPACITY = 18_000
BATCH_SIZE = 32
GAMMA = 0.7
SOFT_UPDATE_TAU = 4e-3
DQN_LR = 4e-4
DDPG_ACTOR_LR = 4e-4
DDPG_CRITIC_LR = 4e-3


class Transition(NamedTuple):
    """One interaction: (state, action, reward, next state)."""

    state: np.ndarray
    action: float
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """FIFO store of past transitions with uniform minibatch sampling."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        self._data: deque[Transition] = deque(maxlen=capacity)
        self.capacity = capacity

    def push(self, transition: Transition) -> None:
        self._data.append(transition)

    def __len__(self) -> int:
        return len(self._data)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sample without replacement inside the batch."""
        if len(self._data) < batch_size:
            raise ValueError(f"need at least {batch_size} stored transitions")
        idx = rng.choice(len(self._data), size=batch_size, replace=False)
        return [self._data[i] for i in idx]


def batch_arrays(batch: list[Transition]):
    """Stack a sampled batch into (states, actions, rewards, next_states)."""
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch], dtype=float)
    rewards = np.array([t.reward for t in batch], dtype=float)
    next_states = np.stack([t.next_state for t in batch])
    return states, actions, rewards, next_states


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear decay of the exploration level across the learning phase."""

    initial: float
    final: float
    steps: int

    def level(self, step: int) -> float:
        if step < 0:
            raise ValueError("step must be >= 0")
        if self.steps <= 0 or step >= self.steps:
            return self.final
        frac = step / self.steps
        return self.initial + (self.final - self.initial) * frac


# exploration endpoints; the control loop sets `steps` to the number of
# learning-phase interactions it will actually run
DQN_EPSILON_RANGE = (1.0, 0.001)
DDPG_SIGMA_RANGE = (0.4, 0.001)


class DqnAgent:
    """Value-based agent: 7 Q-values, epsilon-greedy action choice."""

    def __init__(self, *, gamma: float = GAMMA, lr: float = DQN_LR,
                 tau: float = SOFT_UPDATE_TAU, batch_size: int = BATCH_SIZE,
                 buffer_capacity: int = REPLAY_CAPACITY, seed=None,
                 rng: np.random.Generator | None = None):
        self.gamma = gamma
        self.lr = lr
        self.tau = tau
        self.batch_size = batch_size
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.local = Network(N_ACTIONS, rng=self.rng)
        self.target = self.local.copy()
        self.optimizer = Adam(self.local)
        self.replay = ReplayBuffer(buffer_capacity)

    def act(self, obs: np.ndarray, epsilon: float) -> int:
        """Greedy action, overridden uniformly at random w.p. ``epsilon``.

        Ties break toward the smallest action index.
        """
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if epsilon > 0.0 and self.rng.random() < epsilon:
            return int(self.rng.integers(N_ACTIONS))
        q = self.local.forward(obs)
        return int(np.argmax(q))

    def remember(self, transition: Transition) -> None:
        self.replay.push(transition)

    @property
    def ready(self) -> bool:
        return len(self.replay) >= self.batch_size

    def train_step(self, batch: list[Transition]) -> float:
        """One TD(0) regression step toward r + gamma * max_a' Q_target(s').

        Returns the pre-step minibatch loss; the target network is softly
        pulled toward the local one afterwards.
        """
        states, actions, rewards, next_states = batch_arrays(batch)
        action_idx = actions.astype(int)
        b = len(batch)
        q_next = self.target.forward(next_states).max(axis=1)
        target = rewards + self.gamma * q_next
        q_all = self.local.forward(states)
        q_taken = q_all[np.arange(b), action_idx]
        error = q_taken - target
        loss = float(np.mean(error ** 2))
        if not np.isfinite(loss):
            raise TrainingError("non-finite DQN loss")
        upstream = np.zeros_like(q_all)
        upstream[np.arange(b), action_idx] = 2.0 * error / b
        grads, _ = self.local.backward(upstream)
        self.optimizer.step(self.local, grads, self.lr)
        soft_update(self.target, self.local, self.tau)
        return loss

    def train_from_replay(self) -> float:
        return self.train_step(self.replay.sample(self.batch_size, self.rng))

    def save(self, prefix) -> None:
        self.local.save(f"{prefix}_dqn_local.npz")
        self.target.save(f"{prefix}_dqn_target.npz")

    def load(self, prefix) -> None:
        self.local.load(f"{prefix}_dqn_local.npz")
        self.target.load(f"{prefix}_dqn_target.npz")


def squash_action(x: np.ndarray) -> np.ndarray:
    """Map a raw actor output onto [0, 6] via a scaled sigmoid."""
    return ACTION_HIGH / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


class DdpgAgent:
    """Actor-critic agent emitting a continuous action in [0, 6]."""

    def __init__(self, *, gamma: float = GAMMA, actor_lr: float = DDPG_ACTOR_LR,
                 critic_lr: float = DDPG_CRITIC_LR, tau: float = SOFT_UPDATE_TAU,
                 batch_size: int = BATCH_SIZE, buffer_capacity: int = REPLAY_CAPACITY,
                 seed=None, rng: np.random.Generator | None = None):
        self.gamma = gamma
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.tau = tau
        self.batch_size = batch_size
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.actor_local = Network(1, rng=self.rng)
        self.actor_target = self.actor_local.copy()
        self.critic_local = Network(1, extra_dim=1, rng=self.rng)
        self.critic_target = self.critic_local.copy()
        self.actor_optimizer = Adam(self.actor_local)
        self.critic_optimizer = Adam(self.critic_local)
        self.replay = ReplayBuffer(buffer_capacity)

    def policy(self, obs: np.ndarray) -> float:
        """Deterministic (noiseless) action for an observation."""
        return float(squash_action(self.actor_local.forward(obs))[0])

    def act(self, obs: np.ndarray, sigma: float) -> float:
        """Policy action plus N(0, sigma^2) noise, clamped to [0, 6]."""
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        action = self.policy(obs)
        if sigma > 0:
            action += sigma * self.rng.standard_normal()
        return float(min(max(action, ACTION_LOW), ACTION_HIGH))

    def remember(self, transition: Transition) -> None:
        self.replay.push(transition)

    @property
    def ready(self) -> bool:
        return len(self.replay) >= self.batch_size

    def _actor_ascent(self, states: np.ndarray, dq_da) -> None:
        """Climb the critic's action-gradient through the actor.

        ``dq_da`` maps the batch of squashed actions (B, 1) to dQ/da; the
        chain rule through the sigmoid squash turns it into parameter
        gradients of -mean(Q), which Adam then minimizes.
        """
        b = states.shape[0]
        raw = self.actor_local.forward(states)
        sig = squash_action(raw) / ACTION_HIGH
        grad_q = np.asarray(dq_da(ACTION_HIGH * sig), dtype=float).reshape(b, 1)
        upstream = -grad_q * ACTION_HIGH * sig * (1.0 - sig) / b
        grads, _ = self.actor_local.backward(upstream)
        self.actor_optimizer.step(self.actor_local, grads, self.actor_lr)

    def train_step(self, batch: list[Transition]) -> tuple[float, float]:
        """One critic regression + one actor ascent + soft target updates.

        Returns (critic loss, actor objective), both evaluated before their
        respective updates.
        """
        states, actions, rewards, next_states = batch_arrays(batch)
        b = len(batch)

        next_actions = squash_action(self.actor_target.forward(next_states))
        q_next = self.critic_target.forward(next_states, extra=next_actions)[:, 0]
        target = rewards + self.gamma * q_next
        q = self.critic_local.forward(states, extra=actions.reshape(-1, 1))[:, 0]
        error = q - target
        critic_loss = float(np.mean(error ** 2))
        if not np.isfinite(critic_loss):
            raise TrainingError("non-finite DDPG critic loss")
        upstream = (2.0 * error / b).reshape(-1, 1)
        critic_grads, _ = self.critic_local.backward(upstream)
        self.critic_optimizer.step(self.critic_local, critic_grads, self.critic_lr)

        actor_objective = 0.0

        def critic_dq_da(acted):
            nonlocal actor_objective
            q_of_pi = self.critic_local.forward(states, extra=acted)
            actor_objective = float(np.mean(q_of_pi))
            _, extra_grad = self.critic_local.backward(np.ones((b, 1)))
            return extra_grad

        self._actor_ascent(states, critic_dq_da)

        soft_update(self.actor_target, self.actor_local, self.tau)
        soft_update(self.critic_target, self.critic_local, self.tau)
        return critic_loss, actor_objective

    def train_from_replay(self) -> tuple[float, float]:
        return self.train_step(self.replay.sample(self.batch_size, self.rng))

    def save(self, prefix) -> None:
        self.actor_local.save(f"{prefix}_ddpg_actor_local.npz")
        self.actor_target.save(f"{prefix}_ddpg_actor_target.npz")
        self.critic_local.save(f"{prefix}_ddpg_critic_local.npz")
        self.critic_target.save(f"{prefix}_ddpg_critic_target.npz")

    def load(self, prefix) -> None:
        self.actor_local.load(f"{prefix}_ddpg_actor_local.npz")
        self.actor_target.load(f"{prefix}_ddpg_actor_target.npz")
        self.critic_local.load(f"{prefix}_ddpg_critic_local.npz")
        self.critic_target.load(f"{prefix}_ddpg_critic_target.npz")


def save_checkpoint(agent, prefix, step: int) -> None:
    """Dump all of an agent's networks plus its noise-schedule position."""
    agent.save(prefix)
    np.savez(f"{prefix}_meta.npz", step=np.array(step, dtype=np.int64))


def load_checkpoint(agent, prefix) -> int:
    """Restore an agent's networks; returns the saved schedule step."""
    agent.load(prefix)
    with np.load(f"{prefix}_meta.npz") as data:
        return int(data["step"])


__all__ = [
    "ACTION_HIGH",
    "ACTION_LOW",
    "BATCH_SIZE",
    "DDPG_ACTOR_LR",
    "DDPG_CRITIC_LR",
    "DDPG_SIGMA_RANGE",
    "DQN_EPSILON_RANGE",
    "DQN_LR",
    "DdpgAgent",
    "DqnAgent",
    "GAMMA",
    "N_ACTIONS",
    "NoiseSchedule",
    "REPLAY_CAPACITY",
    "ReplayBuffer",
    "SOFT_UPDATE_TAU",
    "Transition",
    "batch_arrays",
    "load_checkpoint",
    "save_checkpoint",
    "squash_action",
]
