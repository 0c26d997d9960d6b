"""SMC engine: substreams, weight normalization, per-run resampling."""

import numpy as np
import pytest

from ddsmc.engine import (
    DOMAIN_INIT,
    DOMAIN_PROPOSE,
    ParticleEnsemble,
    ess,
    multinomial_resample,
    normalize,
    run_smc,
    substream,
)


def test_substream_determinism_and_separation():
    a = substream(1, 2, 3).standard_normal(8)
    b = substream(1, 2, 3).standard_normal(8)
    np.testing.assert_array_equal(a, b)
    for other in [(2, 2, 3), (1, 0, 3), (1, 2, 0)]:
        assert not np.array_equal(a, substream(*other).standard_normal(8))


def test_normalize_hand_example():
    w, logz = normalize(np.log([[1.0, 3.0]]))
    np.testing.assert_allclose(w, [[0.25, 0.75]], rtol=1e-15)
    assert logz[0] == pytest.approx(np.log(2.0), rel=1e-12)


def test_normalize_shift_invariance():
    logw = np.random.default_rng(0).standard_normal((3, 5))
    w1, z1 = normalize(logw)
    w2, z2 = normalize(logw + 123.0)
    np.testing.assert_allclose(w1, w2, rtol=1e-12)
    np.testing.assert_allclose(z2, z1 + 123.0, rtol=1e-12)


def test_normalize_all_dead_run_raises():
    logw = np.array([[0.0, 0.0], [-np.inf, -np.inf]])
    with pytest.raises(FloatingPointError):
        normalize(logw)


def test_ess_limits():
    assert ess(np.full(10, 0.1)) == pytest.approx(10.0)
    onehot = np.zeros(10)
    onehot[3] = 1.0
    assert ess(onehot) == pytest.approx(1.0)


def test_resample_runs_do_not_mix():
    states = np.arange(6, dtype=np.float64).reshape(2, 3, 1)
    aux = {"tag": states.copy()[..., 0]}
    ens = ParticleEnsemble(states=states, logw=np.zeros((2, 3)), aux=aux)
    w = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    out = multinomial_resample(ens, w, substream(0, 2, 0))
    np.testing.assert_array_equal(out.states[0], np.zeros((3, 1)))
    np.testing.assert_array_equal(out.states[1], np.full((3, 1), 5.0))
    np.testing.assert_array_equal(out.aux["tag"], out.states[..., 0])
    assert np.all(out.logw == 0.0)


def test_resample_single_particle_is_identity():
    states = np.array([[[7.0]], [[9.0]]])
    ens = ParticleEnsemble(states=states, logw=np.zeros((2, 1)))
    out = multinomial_resample(ens, np.ones((2, 1)), substream(0, 2, 0))
    np.testing.assert_array_equal(out.states, states)


def test_resample_frequencies_follow_weights():
    states = np.arange(4, dtype=np.float64).reshape(1, 4, 1)
    ens = ParticleEnsemble(states=np.repeat(states, 1, axis=0), logw=np.zeros((1, 4)))
    w = np.array([[0.1, 0.2, 0.3, 0.4]])
    counts = np.zeros(4)
    for step in range(200):
        out = multinomial_resample(ens, w, substream(5, 2, step))
        for v in range(4):
            counts[v] += np.sum(out.states[0, :, 0] == v)
    freq = counts / counts.sum()
    np.testing.assert_allclose(freq, w[0], atol=0.03)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ParticleEnsemble(states=np.zeros((2, 3)), logw=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ParticleEnsemble(states=np.zeros((2, 3, 1)), logw=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ParticleEnsemble(
            states=np.zeros((2, 3, 1)),
            logw=np.zeros((2, 3)),
            aux={"bad": np.zeros((3, 2))},
        )


def test_run_smc_plumbing_and_trace():
    times = np.array([2, 1, 0])
    calls = []

    def init(rng):
        assert isinstance(rng, np.random.Generator)
        return ParticleEnsemble(states=np.zeros((2, 4, 1)), logw=np.zeros((2, 4)))

    def weigh(ens, j, t):
        calls.append(("w", j, t))
        return np.zeros((2, 4))

    def propose(ens, j, t_hi, t_lo, rng):
        calls.append(("p", j, t_hi, t_lo))
        return ParticleEnsemble(states=ens.states + 1.0, logw=ens.logw)

    ens, w, trace = run_smc(init, weigh, propose, times, seed=0)
    assert calls == [("w", 0, 2), ("p", 0, 2, 1), ("w", 1, 1), ("p", 1, 1, 0), ("w", 2, 0)]
    np.testing.assert_array_equal(ens.states, np.full((2, 4, 1), 2.0))
    np.testing.assert_allclose(w, 0.25)
    assert trace.shape == (6,)  # 2 runs x 3 steps
    np.testing.assert_allclose(trace["ess"], 4.0)
    np.testing.assert_allclose(trace["logz_inc"], 0.0)
    np.testing.assert_array_equal(trace["time"][::2], [2, 1, 0])


def test_run_smc_deterministic_rngs():
    seen = {}

    def init(rng):
        seen["init"] = rng.standard_normal(3)
        return ParticleEnsemble(states=np.zeros((1, 2, 1)), logw=np.zeros((1, 2)))

    def weigh(ens, j, t):
        return np.zeros((1, 2))

    def propose(ens, j, t_hi, t_lo, rng):
        seen[f"prop{j}"] = rng.standard_normal(2)
        return ens

    run_smc(init, weigh, propose, np.array([1, 0]), seed=42)
    np.testing.assert_array_equal(seen["init"], substream(42, DOMAIN_INIT, 0).standard_normal(3))
    np.testing.assert_array_equal(seen["prop0"], substream(42, DOMAIN_PROPOSE, 0).standard_normal(2))
