"""Continuous-force Mountain Car and Acrobot with sparse goal reward, a hard
time limit with a -1 penalty, and a per-step actuation cost of 0.05 * |force|.

The normalised remaining time is part of the state so the time limit stays
Markovian. Dynamics follow the canonical textbook formulations; the applied
force scales the classic unit-force term linearly, so forces of +/-1 reproduce
classic bang-bang behaviour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, UsageError

TIME_LIMIT = 500
ACTUATION_COST = 0.05


@dataclass(frozen=True)
class ControlState:
    physical: tuple[float, ...]
    t: int
    t_max: int = TIME_LIMIT

    @property
    def remaining(self) -> float:
        return (self.t_max - self.t) / self.t_max


@dataclass(frozen=True)
class StepOutcome:
    state: ControlState
    reward: float
    done: bool
    reached_goal: bool


class _ControlEnv:
    feature_dim: int

    def reset(self, rng: np.random.Generator) -> ControlState:
        raise NotImplementedError

    def goal(self, state: ControlState) -> bool:
        raise NotImplementedError

    def _advance(self, physical: tuple[float, ...], force: float) -> tuple[float, ...]:
        raise NotImplementedError

    def step(self, state: ControlState, force: float) -> StepOutcome:
        if not (-1.0 <= force <= 1.0):
            raise ConfigError(f"force {force} outside [-1, 1]")
        if state.t >= state.t_max or self.goal(state):
            raise UsageError("step called on a finished episode")
        nxt = ControlState(
            physical=self._advance(state.physical, force),
            t=state.t + 1,
            t_max=state.t_max,
        )
        reached = self.goal(nxt)
        timeout = nxt.t == nxt.t_max and not reached
        reward = -ACTUATION_COST * abs(force)
        if reached:
            reward += 1.0
        elif timeout:
            reward -= 1.0
        return StepOutcome(state=nxt, reward=reward, done=reached or timeout, reached_goal=reached)


class MountainCar(_ControlEnv):
    """Classic under-powered car: position in [-1.2, 0.6], velocity clamp 0.07,
    velocity += 0.001 * force - 0.0025 * cos(3 * position). Goal at x >= 0.5."""

    feature_dim = 3

    X_MIN, X_MAX = -1.2, 0.6
    V_MAX = 0.07
    GOAL_X = 0.5

    def reset(self, rng: np.random.Generator) -> ControlState:
        x = float(rng.uniform(-0.6, -0.4))
        return ControlState(physical=(x, 0.0), t=0)

    def goal(self, state: ControlState) -> bool:
        return state.physical[0] >= self.GOAL_X

    def _advance(self, physical, force):
        x, v = physical
        v = v + 0.001 * force - 0.0025 * math.cos(3.0 * x)
        v = min(max(v, -self.V_MAX), self.V_MAX)
        x = x + v
        if x <= self.X_MIN:
            x, v = self.X_MIN, 0.0
        elif x > self.X_MAX:
            x = self.X_MAX
        return (x, v)

    def features(self, state: ControlState) -> np.ndarray:
        x, v = state.physical
        return np.array([x, v / self.V_MAX, state.remaining])


class Acrobot(_ControlEnv):
    """Two-link underactuated pendulum, torque on the middle joint.

    Euler integration, four substeps of dt = 0.05 per env step. The goal is
    the tip rising above one link length: -cos(t1) - cos(t1 + t2) > 1.
    """

    feature_dim = 7

    DT = 0.05
    SUBSTEPS = 4
    M1 = M2 = 1.0
    L1 = 1.0
    LC1 = LC2 = 0.5
    I1 = I2 = 1.0
    G = 9.8
    W1_MAX = 4.0 * math.pi
    W2_MAX = 9.0 * math.pi

    def reset(self, rng: np.random.Generator) -> ControlState:
        t1, t2 = rng.uniform(-0.1, 0.1, size=2)
        return ControlState(physical=(float(t1), float(t2), 0.0, 0.0), t=0)

    def goal(self, state: ControlState) -> bool:
        t1, t2 = state.physical[0], state.physical[1]
        return -math.cos(t1) - math.cos(t1 + t2) > 1.0

    def _accel(self, t1, t2, w1, w2, torque):
        m1, m2, l1, lc1, lc2, i1, i2, g = (
            self.M1, self.M2, self.L1, self.LC1, self.LC2, self.I1, self.I2, self.G,
        )
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(t2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(t2)) + i2
        phi2 = m2 * lc2 * g * math.cos(t1 + t2 - math.pi / 2)
        phi1 = (
            -m2 * l1 * lc2 * w2**2 * math.sin(t2)
            - 2 * m2 * l1 * lc2 * w2 * w1 * math.sin(t2)
            + (m1 * lc1 + m2 * l1) * g * math.cos(t1 - math.pi / 2)
            + phi2
        )
        a2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * w1**2 * math.sin(t2) - phi2) / (
            m2 * lc2**2 + i2 - d2**2 / d1
        )
        a1 = -(d2 * a2 + phi1) / d1
        return a1, a2

    @staticmethod
    def _wrap(angle: float) -> float:
        return (angle + math.pi) % (2.0 * math.pi) - math.pi

    def _advance(self, physical, force):
        t1, t2, w1, w2 = physical
        for _ in range(self.SUBSTEPS):
            a1, a2 = self._accel(t1, t2, w1, w2, force)
            t1 = self._wrap(t1 + w1 * self.DT)
            t2 = self._wrap(t2 + w2 * self.DT)
            w1 = min(max(w1 + a1 * self.DT, -self.W1_MAX), self.W1_MAX)
            w2 = min(max(w2 + a2 * self.DT, -self.W2_MAX), self.W2_MAX)
        return (t1, t2, w1, w2)

    def features(self, state: ControlState) -> np.ndarray:
        t1, t2, w1, w2 = state.physical
        return np.array(
            [
                math.cos(t1),
                math.sin(t1),
                math.cos(t2),
                math.sin(t2),
                w1 / self.W1_MAX,
                w2 / self.W2_MAX,
                state.remaining,
            ]
        )


def make_control_env(task: str) -> _ControlEnv:
    if task == "mountain_car":
        return MountainCar()
    if task == "acrobot":
        return Acrobot()
    raise ConfigError(f"unknown control task {task!r}")
