import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasrl.curriculum import CurriculumSchedule, alpha_at, sample_level
from gasrl.errors import ConfigError


def schedule(lead_in=25000, growth=25000, max_level=2, unit="env_steps"):
    return CurriculumSchedule(lead_in=lead_in, growth=growth, max_level=max_level, unit=unit)


def test_alpha_zero_at_start():
    assert alpha_at(schedule(), 0) == 0.0
    assert alpha_at(schedule(), 25000) == 0.0


def test_alpha_linear_after_lead_in():
    s = schedule()
    assert alpha_at(s, 50000) == 1.0
    assert alpha_at(s, 37500) == 0.5


def test_alpha_clamps_at_max_level():
    s = schedule()
    assert alpha_at(s, 25000 + 10 * 25000) == 2.0


def test_alpha_monotone_piecewise_linear():
    s = schedule(lead_in=100, growth=50, max_level=3)
    values = [alpha_at(s, t) for t in range(0, 500, 7)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_schedule_validation():
    with pytest.raises(ConfigError):
        CurriculumSchedule(lead_in=-1, growth=10, max_level=1)
    with pytest.raises(ConfigError):
        CurriculumSchedule(lead_in=0, growth=0, max_level=1)
    with pytest.raises(ConfigError):
        CurriculumSchedule(lead_in=0, growth=1, max_level=1, unit="episodes")


def test_sample_level_integer_alpha_is_deterministic(rng):
    assert all(sample_level(2.0, rng) == 2 for _ in range(100))
    assert all(sample_level(0.0, rng) == 0 for _ in range(100))


def test_sample_level_probabilities():
    rng = np.random.default_rng(1)
    draws = np.array([sample_level(1.3, rng) for _ in range(100000)])
    assert set(np.unique(draws)) <= {1, 2}
    p2 = (draws == 2).mean()
    assert abs(p2 - 0.3) < 0.01


def test_sample_level_half(rng):
    draws = np.array([sample_level(0.5, rng) for _ in range(100000)])
    p0 = (draws == 0).mean()
    assert 0.49 <= p0 <= 0.51


@given(st.floats(min_value=0.0, max_value=5.0, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_sample_level_support(alpha):
    rng = np.random.default_rng(3)
    for _ in range(20):
        l = sample_level(alpha, rng)
        assert l in (int(np.floor(alpha)), int(np.ceil(alpha)))
