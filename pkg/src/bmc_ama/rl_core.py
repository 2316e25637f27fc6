"""Tabular value-learning primitives.

Q-table, the three bootstrapped return targets used by the epsilon-BMC
learner (greedy, uniform, expected-SARSA), the TD update and the
epsilon-greedy action law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

StateId = Hashable
ActionId = Hashable


class QTable:
    """Sparse (state, action) -> value map with a default for unseen pairs."""

    def __init__(self, default: float = 0.0):
        if not math.isfinite(default):
            raise ValueError("default value must be finite")
        self.default = float(default)
        self._values: dict[tuple[StateId, ActionId], float] = {}

    def __getitem__(self, key: tuple[StateId, ActionId]) -> float:
        return self._values.get(key, self.default)

    def __setitem__(self, key: tuple[StateId, ActionId], value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise FloatingPointError(f"refusing to store non-finite Q value {value!r}")
        self._values[key] = value

    def __contains__(self, key) -> bool:
        return key in self._values

    def __len__(self) -> int:
        return len(self._values)

    def values_at(self, s: StateId, actions: Sequence[ActionId]) -> np.ndarray:
        return np.array([self[(s, a)] for a in actions], dtype=float)

    def items(self):
        return self._values.items()


@dataclass(frozen=True)
class LearningConfig:
    gamma: float = 0.95
    eta: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class Transition:
    state: StateId
    action: ActionId
    reward: float
    next_state: StateId
    next_action_space: tuple

    def __post_init__(self):
        if len(self.next_action_space) == 0:
            raise ValueError("next_action_space must be nonempty")
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        object.__setattr__(self, "next_action_space", tuple(self.next_action_space))


def _check_actions(actions: Sequence[ActionId]) -> None:
    if len(actions) == 0:
        raise ValueError("action list is empty")


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")


def _tie_mask(values: np.ndarray) -> np.ndarray:
    return values == values.max()


def greedy_action(q: QTable, s: StateId, actions: Sequence[ActionId],
                  tie_rng: np.random.Generator) -> ActionId:
    """Return an action maximising Q(s, .), breaking ties uniformly at random."""
    _check_actions(actions)
    ties = np.flatnonzero(_tie_mask(q.values_at(s, actions)))
    if len(ties) == 1:
        return actions[ties[0]]
    return actions[ties[tie_rng.integers(len(ties))]]


def epsilon_greedy_probabilities(q: QTable, s: StateId, actions: Sequence[ActionId],
                                 epsilon: float) -> np.ndarray:
    """Action probabilities of the epsilon-greedy policy, aligned with `actions`.

    Every action receives epsilon/|A|; the remaining 1 - epsilon is shared
    equally by the actions tied for the maximum Q value.
    """
    _check_actions(actions)
    _check_epsilon(epsilon)
    ties = _tie_mask(q.values_at(s, actions))
    n = len(actions)
    probs = np.full(n, epsilon / n)
    probs[ties] += (1.0 - epsilon) / ties.sum()
    return probs


def epsilon_greedy_sample(q: QTable, s: StateId, actions: Sequence[ActionId],
                          epsilon: float, rng: np.random.Generator) -> ActionId:
    # Explore/exploit coin first, so epsilon=0 reduces to greedy_action on the same rng.
    _check_actions(actions)
    _check_epsilon(epsilon)
    if epsilon > 0.0 and rng.random() < epsilon:
        return actions[rng.integers(len(actions))]
    return greedy_action(q, s, actions, rng)


def _next_values(q: QTable, t: Transition) -> np.ndarray:
    return q.values_at(t.next_state, t.next_action_space)


def target_q(q: QTable, t: Transition, gamma: float) -> float:
    """Q-learning target r + gamma * max_a' Q(s', a')."""
    return t.reward + gamma * float(_next_values(q, t).max())


def target_uniform(q: QTable, t: Transition, gamma: float) -> float:
    """Uniform-policy target r + gamma * mean_a' Q(s', a')."""
    return t.reward + gamma * float(_next_values(q, t).mean())


def target_expected_sarsa(q: QTable, t: Transition, gamma: float, epsilon: float) -> float:
    """Expected-SARSA target under the epsilon-greedy policy at s'."""
    _check_epsilon(epsilon)
    values = _next_values(q, t)
    # Endpoints are computed through the same reductions as the other two
    # targets so that the interpolation limits hold bit-exactly.
    if epsilon == 0.0:
        return t.reward + gamma * float(values.max())
    if epsilon == 1.0:
        return t.reward + gamma * float(values.mean())
    probs = epsilon_greedy_probabilities(q, t.next_state, t.next_action_space, epsilon)
    return t.reward + gamma * float(probs @ values)


def td_update(q: QTable, s: StateId, a: ActionId, target: float, eta: float) -> float:
    """Move Q(s, a) a fraction eta toward `target`; returns the new value."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not math.isfinite(target):
        raise FloatingPointError(f"non-finite TD target {target!r}")
    old = q[(s, a)]
    new = old + eta * (target - old)
    q[(s, a)] = new
    return new
