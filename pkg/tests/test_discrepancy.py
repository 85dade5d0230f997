import math

import numpy as np
import pytest

from filterlab import (
    PerturbedInputs,
    RngSpec,
    expected_dp,
    expected_dx,
    mc_discrepancy_moments,
    po_mean_identity_check,
    po_variance_penalty,
    second_moment_dp,
    second_moment_dx,
    skf_closed_form,
)
from filterlab.discrepancy import dp_spec, dx_spec, po_gain_spec
from conftest import make_trajectory


def base_inputs(**kw):
    args = dict(p0=1.0, x0=0.0, p_tilde0=1.0, x_tilde0=0.0, alpha=4.0, r=1.0)
    args.update(kw)
    return PerturbedInputs(**args)


def test_inputs_validation():
    with pytest.raises(ValueError, match="positive"):
        base_inputs(p0=0.0)
    with pytest.raises(ValueError, match="positive"):
        base_inputs(p_tilde0=-1.0)
    with pytest.raises(ValueError, match="alpha"):
        base_inputs(alpha=1.0)


def test_moments_match_monte_carlo():
    # independent oracle: library gamma draws through both filters' closed
    # analysis forms
    for seed, steps, alpha in ((7, 10, 4.0), (8, 25, 3.0), (9, 40, 10.0)):
        traj = make_trajectory(seed, steps)
        inp = base_inputs(alpha=alpha, p_tilde0=1.4, x_tilde0=0.3, x0=0.1)
        i = steps // 2
        mc = mc_discrepancy_moments(traj, inp, i, 400_000, RngSpec(seed, 2))
        assert abs(mc.mean_dp - expected_dp(traj, inp, i)) < 4 * mc.mean_dp_se
        assert abs(mc.mean_dp2 - second_moment_dp(traj, inp, i)) \
            < 4 * mc.mean_dp2_se
        assert abs(mc.mean_dx - expected_dx(traj, inp, i)) < 4 * mc.mean_dx_se
        assert abs(mc.mean_dx2 - second_moment_dx(traj, inp, i)) \
            < 4 * mc.mean_dx2_se


def test_variance_nonnegative():
    rng = np.random.default_rng(55)
    traj = make_trajectory(55, 30)
    for _ in range(50):
        inp = base_inputs(alpha=rng.uniform(2.5, 40.0),
                          p0=rng.uniform(0.2, 3.0),
                          p_tilde0=rng.uniform(0.2, 3.0),
                          x0=rng.uniform(-1, 1), x_tilde0=rng.uniform(-1, 1))
        i = int(rng.integers(0, 31))
        vp = second_moment_dp(traj, inp, i) - expected_dp(traj, inp, i) ** 2
        vx = second_moment_dx(traj, inp, i) - expected_dx(traj, inp, i) ** 2
        assert vp >= -1e-12
        assert vx >= -1e-12


def test_dp_vanishes_at_large_alpha():
    traj = make_trajectory(3, 10)
    i = 5
    inp = base_inputs(alpha=1e6)
    pa = skf_closed_form(traj, 0.0, 1.0, i).var_analysis
    assert abs(expected_dp(traj, inp, i)) <= 1e-4 * pa
    # matched means: dx also vanishes
    assert abs(expected_dx(traj, inp, i)) <= 1e-4 * max(abs(pa), 1.0)


def test_discrepancy_decays_for_stable_models():
    # |m| <= 1: both discrepancy moments sink below 1e-3 * p0^2 by i = 200
    for m in (1.0, 0.8, -0.95):
        traj = make_trajectory(41, 200, kind="constant", m=m)
        inp = base_inputs(p_tilde0=1.5, alpha=4.0)
        assert abs(expected_dp(traj, inp, 200)) < 1e-3
        assert second_moment_dp(traj, inp, 200) < 1e-3


def test_dx_exceedance_probability_decays():
    # P(|dx_i| > eps) shrinks with i for a constant model
    traj = make_trajectory(62, 200, kind="constant", m=1.0)
    inp = base_inputs(p_tilde0=2.0, x_tilde0=0.5, alpha=3.0)
    rng = np.random.default_rng(62)
    x = rng.gamma(inp.alpha, inp.p_tilde0 / inp.alpha, 200_000)
    probs = []
    for i in (2, 20, 200):
        u = inp.r * math.exp(-traj.log_S[i])
        mbs = (traj.sign_M[i] * traj.sign_B[i]
               * math.exp(traj.log_abs_M[i] + traj.log_abs_B[i]
                          - traj.log_S[i]))
        ms = traj.M_over_S(i)
        xa_exact = (inp.p0 * mbs + ms * inp.r * inp.x0) / (inp.p0 + u)
        xa_hat = (x * mbs + ms * inp.r * inp.x_tilde0) / (x + u)
        probs.append(np.mean(np.abs(xa_hat - xa_exact) > 0.05))
    assert probs[0] > probs[1] > probs[2]


def test_dx_degenerate_branch():
    # when B_i/S_i equals x_tilde0 the ratio collapses to a constant
    traj = make_trajectory(5, 8)
    i = 4
    inp = base_inputs(x_tilde0=traj.B_over_S(i), x0=-0.7)
    with pytest.raises(ValueError, match="constant"):
        dx_spec(traj, inp, i)
    const = expected_dx(traj, inp, i)
    assert second_moment_dx(traj, inp, i) == pytest.approx(const * const,
                                                           rel=1e-14)
    u = inp.r * math.exp(-traj.log_S[i])
    want = inp.r * traj.M_over_S(i) * (traj.B_over_S(i) - inp.x0) \
        / (inp.p0 + u)
    assert const == pytest.approx(want, rel=1e-14)


def test_specs_are_well_scaled_for_unstable_models():
    # |m| up to 2 over 300 steps: raw M, S overflow but the assembled
    # ratio-spec coefficients stay finite and the moments evaluate
    traj = make_trajectory(77, 300, low=1.2, high=2.0, signed=False)
    inp = base_inputs(alpha=5.0, p_tilde0=1.3)
    for i in (150, 300):
        sp = dp_spec(traj, inp, i)
        for v in (sp.a, sp.b, sp.c, sp.d):
            assert math.isfinite(v)
        assert math.isfinite(expected_dp(traj, inp, i))
        assert math.isfinite(second_moment_dp(traj, inp, i))


def test_po_penalty_examples():
    traj = make_trajectory(1, 10, kind="constant", m=1.0)
    # E[(R-r)^2] = r^2/alpha exactly: r=2, alpha=4 -> 1.0
    rep = po_mean_identity_check(traj, 1.0, 4.0, 2.0, 5, 100_000,
                                 RngSpec(10, 0))
    assert rep.exact_second_R == 1.0
    assert abs(rep.second_R - 1.0) < 4.0 * rep.second_R_se
    # mean identity and zero covariance
    assert abs(rep.mean_P - rep.analytic_mean_rK) < 4.0 * rep.mean_P_se
    assert abs(rep.cov_cross) < 4.0 * rep.cov_cross_se
    # alpha = 4 sits on the fourth-moment order boundary
    assert math.isnan(rep.penalty)
    rep2 = po_mean_identity_check(traj, 1.0, 6.0, 2.0, 5, 50_000,
                                  RngSpec(10, 1))
    assert rep2.penalty > 0.0


def test_po_penalty_matches_monte_carlo():
    traj = make_trajectory(2, 12, kind="constant", m=1.0)
    p0, alpha, r, i = 1.0, 6.0, 1.0, 4
    rng = np.random.default_rng(17)
    n = 1_000_000
    x = rng.gamma(alpha, p0 / alpha, n)
    rr = rng.gamma(alpha, r / alpha, n)
    gs = po_gain_spec(traj, p0, alpha, r, i)
    k = gs.a * x / (gs.c * x + gs.d)
    term = k * k * (rr - r)
    est = np.var(term)
    se = math.sqrt(np.var((term - np.mean(term)) ** 2) / n)
    want = po_variance_penalty(traj, p0, alpha, r, i)
    # Var(K^2 (R-r)) = E[K^4] r^2/alpha since E[R-r] = 0 and K, R independent
    assert abs(est - want) < 4.0 * se


def test_po_penalty_shrinks_with_alpha():
    traj = make_trajectory(4, 10, kind="constant", m=1.0)
    p10 = po_variance_penalty(traj, 1.0, 10.0, 1.0, 5)
    p1000 = po_variance_penalty(traj, 1.0, 1000.0, 1.0, 5)
    assert p10 / p1000 > 50.0


def test_po_degenerate_noise_is_exact():
    # r_hat identically r: the perturbation term is exactly zero and the
    # update reduces to r*K per draw
    traj = make_trajectory(6, 8, kind="constant", m=1.0)
    gs = po_gain_spec(traj, 1.0, 4.0, 1.0, 3)
    x = np.random.default_rng(3).gamma(4.0, 0.25, 1000)
    k = gs.a * x / (gs.c * x + gs.d)
    p_var = 1.0 * k + k * k * (1.0 - 1.0)
    np.testing.assert_array_equal(p_var, k)
