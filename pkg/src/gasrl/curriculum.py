"""Linear curriculum on the action-space mixing parameter.

The mixing parameter alpha walks from 0 to the deepest level over training;
the behaviour level for an episode is sampled from alpha's two neighbouring
integers so that E[level] = alpha exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class CurriculumSchedule:
    lead_in: int          # steps held at alpha = 0
    growth: int           # steps per unit increase of alpha
    max_level: int        # alpha is clamped to [0, max_level]
    unit: str = "env_steps"  # "env_steps" (control) or "updates" (queue learner)

    def __post_init__(self):
        if self.lead_in < 0:
            raise ConfigError("lead_in must be >= 0")
        if self.growth <= 0:
            raise ConfigError("growth must be > 0")
        if self.max_level < 0:
            raise ConfigError("max_level must be >= 0")
        if self.unit not in ("env_steps", "updates"):
            raise ConfigError(f"unknown schedule unit {self.unit!r}")


def alpha_at(schedule: CurriculumSchedule, step: int) -> float:
    """Piecewise-linear, non-decreasing mixing parameter at a step counter."""
    if step < 0:
        raise ConfigError("step must be >= 0")
    if step <= schedule.lead_in:
        return 0.0
    return min(float(schedule.max_level), (step - schedule.lead_in) / schedule.growth)


def sample_level(alpha: float, rng: np.random.Generator) -> int:
    """Draw floor(alpha) with probability ceil(alpha) - alpha, else ceil(alpha)."""
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    lo = math.floor(alpha)
    frac = alpha - lo
    if frac == 0.0:
        return lo
    return lo + int(rng.random() < frac)
