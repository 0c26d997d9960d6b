"""Sampler-level behavior.

Covers the reconstruction-noise schedules, the proposal algebra (including
the uninformative-measurement limit where the proposal must coincide with
the prior transition kernel), a full hand replay of a three-step run that
pins down each incremental-weight kind, and end-to-end determinism and
accuracy checks against the closed-form mixture posterior.
"""

import numpy as np
import pytest

from ddsmc import engine, gmm, metrics, reconstruct, sampler, schedules
from ddsmc import measurement as ms


def vp20():
    return schedules.with_times(schedules.build_vp_schedule(1000), 20)


def whitened_setup(d_x=2, d_y=2, seed=0, scale=1.0, sigma_y=1.0):
    prob = gmm.generate_problem(d_x, d_y, seed=seed, scale=scale, sigma_y=sigma_y)
    w = ms.whiten(prob.meas, prob.y)
    return prob, w


# --- rho schedules ---------------------------------------------------------


def test_rho_gmm_default_values():
    sched = vp20()
    rho = sampler.rho_schedule(sched, sampler.GmmDefault())
    want = np.sqrt((1.0 - sched.alpha_bar[sched.times[:-1]]) / np.sqrt(2.0))
    np.testing.assert_allclose(rho[:-1], want, rtol=1e-15)
    assert rho[-1] == 0.0


def test_rho_gmm_default_needs_vp():
    sched = schedules.with_times(schedules.build_power_schedule(1000), 20)
    with pytest.raises(ValueError):
        sampler.rho_schedule(sched, sampler.GmmDefault())


def test_rho_power_interp_endpoints():
    sched = vp20()
    spec = sampler.PowerInterp(rho_min=0.03, rho_max=50.0, power=7.0)
    rho = sampler.rho_schedule(sched, spec)
    np.testing.assert_allclose(rho[0], 50.0, rtol=1e-12)
    np.testing.assert_allclose(rho[-2], 0.03, rtol=1e-12)
    assert rho[-1] == 0.0
    assert np.all(np.diff(rho[:-1]) < 0.0)


def test_rho_power_two_point_grid():
    sched = schedules.with_times(schedules.build_vp_schedule(1000), 1)
    rho = sampler.rho_schedule(sched, sampler.PowerInterp(rho_max=7.0))
    assert rho[0] == 7.0
    assert rho[1] == 0.0


def test_rho_power_validation():
    sched = vp20()
    with pytest.raises(ValueError):
        sampler.rho_schedule(sched, sampler.PowerInterp(rho_min=0.0))
    with pytest.raises(ValueError):
        sampler.rho_schedule(sched, sampler.PowerInterp(rho_min=2.0, rho_max=1.0))


def test_rho_unknown_spec_raises():
    with pytest.raises(TypeError):
        sampler.rho_schedule(vp20(), object())


# --- proposal algebra ------------------------------------------------------


def test_proposal_coefficients_vp_eta0_closed_form():
    sched = vp20()
    t_hi, t_lo = sched.times[4], sched.times[5]
    c_f, c_x, prior_var = sampler.proposal_coefficients(sched, t_lo, t_hi, 0.0)
    assert c_x == 0.0
    np.testing.assert_allclose(c_f, np.sqrt(sched.alpha_bar[t_lo]), rtol=1e-12)
    np.testing.assert_allclose(prior_var, 1.0 - sched.alpha_bar[t_lo], rtol=1e-12)


@pytest.mark.parametrize("kind", ["vp", "ve"])
@pytest.mark.parametrize("eta", [0.0, 0.5, 1.0])
def test_proposal_coefficients_match_prior_transition(kind, eta):
    if kind == "vp":
        sched = vp20()
    else:
        sched = schedules.with_times(schedules.build_power_schedule(1000), 20)
    t_hi, t_lo = sched.times[7], sched.times[8]
    rng = np.random.default_rng(3)
    x_next = rng.standard_normal((5, 3))
    x0hat = rng.standard_normal((5, 3))
    mean, var = reconstruct.prior_transition(x_next, x0hat, t_lo, eta, sched)
    c_f, c_x, prior_var = sampler.proposal_coefficients(sched, t_lo, t_hi, eta)
    np.testing.assert_allclose(c_f * x0hat + c_x * x_next, mean, rtol=1e-12)
    np.testing.assert_allclose(prior_var, var, rtol=1e-12)


def test_lambda_sq_matched_and_daps():
    sched = vp20()
    t_hi, t_lo = sched.times[3], sched.times[4]
    c_f, _, prior_var = sampler.proposal_coefficients(sched, t_lo, t_hi, 1.0)

    small = 1e-3
    lam2, clamped = sampler.lambda_sq(sched, t_lo, t_hi, 1.0, small, "matched")
    assert not clamped
    np.testing.assert_allclose(lam2, prior_var - (c_f * small) ** 2, rtol=1e-12)

    lam2, clamped = sampler.lambda_sq(sched, t_lo, t_hi, 1.0, 1e3, "matched")
    assert clamped
    assert lam2 == 0.0

    lam2, clamped = sampler.lambda_sq(sched, t_lo, t_hi, 1.0, 1e3, "daps")
    assert not clamped
    np.testing.assert_allclose(lam2, 1.0 - sched.alpha_bar[t_lo], rtol=1e-12)

    ve = schedules.with_times(schedules.build_power_schedule(1000), 20)
    tv_hi, tv_lo = ve.times[3], ve.times[4]
    lam2, _ = sampler.lambda_sq(ve, tv_lo, tv_hi, 1.0, 1e3, "daps")
    np.testing.assert_allclose(lam2, ve.sigma2[tv_lo], rtol=1e-12)

    with pytest.raises(ValueError):
        sampler.lambda_sq(sched, t_lo, t_hi, 1.0, small, "nope")


@pytest.mark.parametrize("eta", [0.0, 0.5, 1.0])
def test_proposal_uninformative_limit_matches_kernel(eta):
    # with sigma_y huge the x0-posterior collapses onto the reconstruction
    # and matched lambda^2 makes the proposal equal the transition kernel
    prob, w = whitened_setup(sigma_y=1e6)
    sched = vp20()
    j = 5
    t_hi, t_lo = sched.times[j], sched.times[j + 1]
    rho = sampler.rho_schedule(sched, sampler.GmmDefault())
    rng = np.random.default_rng(11)
    x_next = rng.standard_normal((6, 2))
    x0hat = rng.standard_normal((6, 2))
    prop, clamped = sampler.proposal(sched, x_next, x0hat, t_lo, t_hi, eta, rho[j], w)
    assert not clamped
    mean, var = reconstruct.prior_transition(x_next, x0hat, t_lo, eta, sched)
    np.testing.assert_allclose(prop.mean, mean, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(prop.var, var, rtol=1e-5)


def test_log_weight_kinds():
    ll = np.array([1.0, 2.0])
    prev = np.array([0.5, -1.0])
    lp = np.array([0.25, 0.5])
    lq = np.array([0.125, 4.0])
    np.testing.assert_array_equal(sampler.log_weight("first", ll), ll)
    np.testing.assert_array_equal(
        sampler.log_weight("middle", ll, ll_prev=prev, log_prior=lp, log_prop=lq),
        ll + lp - prev - lq,
    )
    np.testing.assert_array_equal(
        sampler.log_weight("final", ll, ll_prev=prev), ll - prev
    )
    with pytest.raises(ValueError):
        sampler.log_weight("warmup", ll)


def test_config_validation():
    sched = vp20()
    with pytest.raises(ValueError):
        sampler.DdsmcConfig(sched=sched, eta=1.5)
    with pytest.raises(ValueError):
        sampler.DdsmcConfig(sched=sched, eta=-0.1)
    with pytest.raises(ValueError):
        sampler.DdsmcConfig(sched=sched, n_particles=0)
    with pytest.raises(ValueError):
        sampler.DdsmcConfig(sched=sched, lambda_mode="sideways")
    with pytest.raises(TypeError):
        sampler.DdsmcConfig(sched=sched, recon="tweedie")


# --- full replay of a three-step run ---------------------------------------


def test_trace_replays_the_three_weight_kinds():
    # T = 2 visits times [2, 1, 0]: one "first" weight, one "middle", one
    # "final". With a single particle per run, resampling is the identity
    # and each normalized log-evidence increment equals the raw
    # incremental log weight, so the whole run can be replayed by hand
    # from the seed substreams.
    sched = schedules.build_vp_schedule(2)
    np.testing.assert_array_equal(sched.times, [2, 1, 0])
    prior = gmm.GmmPrior(weights=np.array([1.0]), means=np.array([[0.5]]))
    meas = ms.MeasurementModel(A=np.array([[1.0]]), sigma_y=1.0)
    y = np.array([0.3])
    w = ms.whiten(meas, y)
    score = gmm.gmm_score_source(gmm.whitened_prior(prior, w), sched)
    cfg = sampler.DdsmcConfig(sched=sched, recon=reconstruct.Tweedie(), eta=1.0,
                              rho=sampler.GmmDefault(), n_particles=1)
    seed = 77
    res = sampler.run_ddsmc(score, w, cfg, seed=seed, runs=1)

    rho = sampler.rho_schedule(sched, cfg.rho)

    # first weight at t = 2: the reconstruction likelihood of the draw
    x2 = engine.substream(seed, engine.DOMAIN_INIT, 0).standard_normal((1, 1, 1))
    x2 = x2.reshape(1, 1)
    x0hat2 = reconstruct.reconstruct(cfg.recon, score, x2, 2, sched)
    ll2 = ms.approx_loglik(w, x0hat2, rho[0])[0]

    # middle weight at t = 1: likelihood ratio times kernel/proposal ratio
    prop, _ = sampler.proposal(sched, x2, x0hat2, 1, 2, cfg.eta, rho[0], w)
    eps = engine.substream(seed, engine.DOMAIN_PROPOSE, 0).standard_normal((1, 1))
    x1 = prop.mean + np.sqrt(prop.var) * eps
    c_f, c_x, prior_var = sampler.proposal_coefficients(sched, 1, 2, cfg.eta)
    kernel = ms.DiagGaussian(mean=c_f * x0hat2 + c_x * x2, var=np.full(1, prior_var))
    x0hat1 = reconstruct.reconstruct(cfg.recon, score, x1, 1, sched)
    ll1 = ms.approx_loglik(w, x0hat1, rho[1])[0]
    logw_mid = ll1 + kernel.logpdf(x1)[0] - ll2 - prop.logpdf(x1)[0]

    # final weight at t = 0: exact likelihood of the posterior-mean move
    x0 = sampler.proposal_t0(x1, x0hat1, rho[1], w)
    logw_fin = ms.exact_loglik_whitened(w, x0)[0] - ll1

    assert res.trace.shape == (3,)
    np.testing.assert_array_equal(res.trace["time"], [2.0, 1.0, 0.0])
    np.testing.assert_array_equal(res.trace["step"], [0, 1, 2])
    np.testing.assert_array_equal(res.trace["ess"], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(
        res.trace["logz_inc"], [ll2, logw_mid, logw_fin], rtol=1e-12, atol=1e-12
    )
    np.testing.assert_allclose(
        res.states, ms.unwhiten(w, x0).reshape(1, 1, 1), rtol=1e-14
    )
    np.testing.assert_array_equal(res.weights, np.ones((1, 1)))
    np.testing.assert_array_equal(res.draws, res.states[:, 0])


# --- end-to-end runs -------------------------------------------------------


def run_small(seed, runs=2, n_particles=8, eta=0.5, lambda_mode="matched"):
    prob, w = whitened_setup()
    sched = vp20()
    score = gmm.gmm_score_source(gmm.whitened_prior(prob.prior, w), sched)
    cfg = sampler.DdsmcConfig(
        sched=sched,
        recon=reconstruct.OdeSolve(),
        eta=eta,
        rho=sampler.GmmDefault(),
        n_particles=n_particles,
        lambda_mode=lambda_mode,
    )
    return sampler.run_ddsmc(score, w, cfg, seed=seed, runs=runs)


def test_same_seed_bitwise_deterministic():
    a = run_small(5)
    b = run_small(5)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.draws, b.draws)
    assert np.array_equal(a.trace, b.trace)
    c = run_small(6)
    assert not np.array_equal(a.states, c.states)


def test_trace_shape_and_ess_bounds():
    res = run_small(9, runs=3, n_particles=8)
    assert res.trace.shape == (3 * 20 + 3,)
    assert np.all(res.trace["ess"] >= 1.0 - 1e-12)
    assert np.all(res.trace["ess"] <= 8.0 + 1e-12)
    assert res.ess_min == res.trace["ess"].min()
    np.testing.assert_allclose(res.weights.sum(axis=1), 1.0, rtol=1e-12)


def test_resampled_outputs_shapes_and_membership():
    res = run_small(13, runs=3, n_particles=16)
    out = res.resampled_outputs()
    assert out.shape == (3 * 16, 2)
    assert np.array_equal(out, res.resampled_outputs())
    small = res.resampled_outputs(n_per_run=5)
    assert small.shape == (15, 2)
    for r in range(3):
        block = small[5 * r : 5 * (r + 1)]
        for row in block:
            assert any(np.array_equal(row, s) for s in res.states[r])


def test_clamping_counted_and_absent_in_daps():
    prob, w = whitened_setup()
    sched = vp20()
    score = gmm.gmm_score_source(gmm.whitened_prior(prob.prior, w), sched)
    # at eta = 0 the kernel variance drops below (c_f rho_hi)^2 on several
    # interior transitions, so matched mode must clamp there
    rho = sampler.PowerInterp(rho_min=0.03, rho_max=50.0)
    matched = sampler.DdsmcConfig(
        sched=sched, recon=reconstruct.Tweedie(), eta=0.0, rho=rho, n_particles=4
    )
    res = sampler.run_ddsmc(score, w, matched, seed=0)
    assert res.n_clamped > 0
    daps = sampler.DdsmcConfig(
        sched=sched, recon=reconstruct.Tweedie(), eta=0.0, rho=rho,
        n_particles=4, lambda_mode="daps",
    )
    assert sampler.run_ddsmc(score, w, daps, seed=0).n_clamped == 0


def test_sigma_zero_rejected():
    prob, _ = whitened_setup()
    noiseless = ms.MeasurementModel(A=prob.meas.A, sigma_y=0.0)
    w = ms.whiten(noiseless, prob.y)
    sched = vp20()
    score = gmm.gmm_score_source(gmm.whitened_prior(prob.prior, w), sched)
    cfg = sampler.DdsmcConfig(sched=sched, n_particles=4)
    with pytest.raises(ValueError):
        sampler.run_ddsmc(score, w, cfg, seed=0)


def test_end_to_end_matches_exact_posterior():
    prob, w = whitened_setup()
    sched = vp20()
    score = gmm.gmm_score_source(gmm.whitened_prior(prob.prior, w), sched)
    cfg = sampler.DdsmcConfig(
        sched=sched, recon=reconstruct.OdeSolve(), eta=0.5,
        rho=sampler.GmmDefault(), n_particles=64,
    )
    res = sampler.run_ddsmc(score, w, cfg, seed=0, runs=8)
    out = res.resampled_outputs()
    ref = gmm.gmm_exact_posterior_sample(prob, len(out), seed=1)
    assert metrics.sliced_wasserstein(out, ref, seed=1234) < 0.35
