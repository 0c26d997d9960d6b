"""Noise schedules: construction invariants, visited-time grids, validation."""

import numpy as np
import pytest

from ddsmc.schedules import (
    NoiseSchedule,
    build_power_schedule,
    build_vp_schedule,
    ddim_times,
    with_times,
)


def test_vp_schedule_basic_invariants():
    s = build_vp_schedule(100)
    assert s.kind == "vp"
    assert s.T == 100
    assert s.beta[0] == 0.0
    assert s.alpha_bar[0] == 1.0
    assert np.all(np.diff(s.alpha_bar) < 0.0)
    np.testing.assert_allclose(
        s.alpha_bar, np.concatenate([[1.0], np.cumprod(1.0 - s.beta[1:])]), rtol=1e-15
    )
    assert s.beta[1] == pytest.approx(1e-4)
    assert s.beta[-1] == pytest.approx(0.02)
    assert s.times[0] == 100 and s.times[-1] == 0


def test_power_schedule_endpoints():
    s = build_power_schedule(50, t_min=0.1, t_max=100.0, power=7.0)
    assert s.kind == "ve"
    sigma = np.sqrt(s.sigma2)
    assert sigma[0] == 0.0
    assert sigma[1] == pytest.approx(0.1, rel=1e-12)
    assert sigma[-1] == pytest.approx(100.0, rel=1e-12)
    assert np.all(np.diff(s.sigma2) > 0.0)
    # fine spacing near t_min: increments grow with t
    assert sigma[2] - sigma[1] < sigma[-1] - sigma[-2]


@pytest.mark.parametrize("T,n", [(1000, 20), (1000, 7), (10, 10), (10, 25), (5, 1)])
def test_ddim_times_grid(T, n):
    t = ddim_times(T, n)
    assert t[0] == T and t[-1] == 0
    assert np.all(np.diff(t) < 0)
    assert len(t) == min(n, T) + 1
    assert len(np.unique(t)) == len(t)


def test_ddim_times_even_spacing():
    t = ddim_times(1000, 20)
    np.testing.assert_array_equal(t, np.round(np.linspace(1000, 0, 21)).astype(int))


def test_with_times_preserves_noise_content():
    s = build_vp_schedule(200)
    s20 = with_times(s, 20)
    np.testing.assert_array_equal(s20.beta, s.beta)
    np.testing.assert_array_equal(s20.alpha_bar, s.alpha_bar)
    assert len(s20.times) == 21
    assert set(s20.times.tolist()) <= set(range(201))


def test_next_time_above_and_times_below():
    s = with_times(build_vp_schedule(100), 4)  # times 100, 75, 50, 25, 0
    np.testing.assert_array_equal(s.times, [100, 75, 50, 25, 0])
    assert s.next_time_above(0) == 25
    assert s.next_time_above(25) == 50
    assert s.next_time_above(60) == 75
    assert s.next_time_above(99) == 100
    with pytest.raises(ValueError):
        s.next_time_above(100)
    np.testing.assert_array_equal(s.times_below(50), [25, 0])
    np.testing.assert_array_equal(s.times_below(101), s.times)


def test_from_beta_ve_cumsum():
    beta = np.array([0.5, 1.0, 2.0])
    s = NoiseSchedule.from_beta("ve", beta)
    np.testing.assert_allclose(s.sigma2, [0.0, 0.5, 1.5, 3.5], rtol=1e-15)


def test_validation_errors():
    with pytest.raises(ValueError):
        build_vp_schedule(1)
    with pytest.raises(ValueError):
        build_vp_schedule(10, beta_lo=0.5, beta_hi=0.1)
    with pytest.raises(ValueError):
        NoiseSchedule.from_beta("vp", np.array([0.1, 1.5]))  # beta >= 1
    with pytest.raises(ValueError):
        NoiseSchedule.from_beta("ve", np.array([0.1, -0.2]))
    with pytest.raises(ValueError):
        NoiseSchedule.from_beta("bogus", np.array([0.1]))
    s = build_vp_schedule(10)
    with pytest.raises(ValueError):
        NoiseSchedule("vp", s.beta, s.alpha_bar * 1.01, None, s.times)
    with pytest.raises(ValueError):
        NoiseSchedule("vp", s.beta, s.alpha_bar, None, np.array([10, 5, 1]))
    with pytest.raises(ValueError):
        ddim_times(100, 0)
