"""Scalar Kalman filter: recursion, per-step closed forms, and error moments.

With observation variance r, prior (x0, p0) and model multipliers m_i, the
analysis variance and mean at step i have the closed forms

    p_i = M_i^2 p0 r / (S_i p0 + r) = r k_i
    x_i = M_i (B_i p0 + r x0) / (S_i p0 + r)

which the recursion must reproduce exactly up to roundoff.  All closed
forms are evaluated through the ratio ledger of the trajectory, so they do
not degrade when M_i and S_i overflow.
"""

from dataclasses import dataclass

import math

import numpy as np

from .propagators import ModelTrajectory
from .rng import RngSpec, normal_polar

__all__ = [
    "SkfState",
    "ErrorMoments",
    "skf_start",
    "skf_step",
    "skf_run",
    "skf_closed_form",
    "skf_error_moments",
]


@dataclass(frozen=True)
class SkfState:
    step: int
    mean_forecast: float
    var_forecast: float
    gain: float
    mean_analysis: float
    var_analysis: float


def _analyze(step, xf, pf, y, r):
    k = pf / (pf + r)
    return SkfState(
        step=step,
        mean_forecast=xf,
        var_forecast=pf,
        gain=k,
        mean_analysis=xf + k * (y - xf),
        var_analysis=(1.0 - k) * pf,
    )


def skf_start(x0, p0, y0, r):
    """Step-0 state: forecast is the prior, followed by the first analysis."""
    if not (p0 > 0.0 and r > 0.0):
        raise ValueError("variances must be positive")
    return _analyze(0, float(x0), float(p0), float(y0), float(r))


def skf_step(prev: SkfState, m, y, r):
    """Forecast through multiplier m, then assimilate observation y."""
    if m == 0.0:
        raise ValueError("model multiplier must be nonzero")
    xf = m * prev.mean_analysis
    pf = m * m * prev.var_analysis
    return _analyze(prev.step + 1, xf, pf, float(y), float(r))


def skf_run(traj: ModelTrajectory, x0, p0):
    """The full recursion along a trajectory; returns one state per step."""
    r = traj.obs_variance
    states = [skf_start(x0, p0, traj.observations[0], r)]
    for i, m in enumerate(traj.model.values):
        states.append(skf_step(states[-1], m, traj.observations[i + 1], r))
    return states


def _closed_analysis(traj, x0, p0, i):
    r = traj.obs_variance
    u = traj.r_over_S(i)
    pa = r * p0 * traj.M2_over_S(i) / (p0 + u)
    # M_i B_i / S_i = sign * exp(log|M| + log|B| - log S), kept ratio-safe
    mb_over_s = traj.sign_M[i] * traj.sign_B[i] * math.exp(
        traj.log_abs_M[i] + traj.log_abs_B[i] - traj.log_S[i]
    )
    xa = (p0 * mb_over_s + traj.M_over_S(i) * r * x0) / (p0 + u)
    return xa, pa


def skf_closed_form(traj: ModelTrajectory, x0, p0, i):
    """SkfState at step i straight from the closed forms (no recursion)."""
    i = int(i)
    xa, pa = _closed_analysis(traj, x0, p0, i)
    if i == 0:
        xf, pf = float(x0), float(p0)
    else:
        xa_prev, pa_prev = _closed_analysis(traj, x0, p0, i - 1)
        m = traj.model.values[i - 1]
        xf, pf = m * xa_prev, m * m * pa_prev
    return SkfState(
        step=i,
        mean_forecast=xf,
        var_forecast=pf,
        gain=pa / traj.obs_variance,
        mean_analysis=xa,
        var_analysis=pa,
    )


@dataclass(frozen=True)
class ErrorMoments:
    mean: float
    mean_se: float
    var: float
    var_se: float


def skf_error_moments(traj: ModelTrajectory, x0, p0, i, replicates, spec: RngSpec):
    """Monte Carlo moments of the analysis error x_i - truth_i at step i.

    Each replicate redraws the initial truth from the prior N(x0, p0) and
    the observation noise of every assimilated observation, so the sample
    variance is calibrated against the closed-form analysis variance.
    Returns sample mean/variance of the error with their standard errors.
    """
    i = int(i)
    r = traj.obs_variance
    u = traj.r_over_S(i)
    # weights v_l = M_i M_l / S_i applied to each observation replicate
    logs = traj.log_abs_M[i] + traj.log_abs_M[: i + 1] - traj.log_S[i]
    v = traj.sign_M[i] * traj.sign_M[: i + 1] * np.exp(logs)
    gen = spec.generator()
    nrep = int(replicates)
    errs = np.empty(nrep)
    chunk = max(1, min(nrep, 4_000_000 // (i + 2)))
    done = 0
    sq = math.sqrt(r)
    sp = math.sqrt(p0)
    mi_over_si = traj.M_over_S(i)
    while done < nrep:
        b = min(chunk, nrep - done)
        noise = normal_polar(gen, b * (i + 2)).reshape(b, i + 2)
        # error = [ (M_i/S_i) r (x0 - x0_truth) + p0 sqrt(r) v.n ] / (p0 + u)
        prior_dev = sp * noise[:, 0]
        obs_part = noise[:, 1:] @ v
        errs[done : done + b] = (
            -mi_over_si * r * prior_dev + p0 * sq * obs_part
        ) / (p0 + u)
        done += b
    mean = float(np.mean(errs))
    var = float(np.var(errs, ddof=1))
    mean_se = math.sqrt(var / nrep)
    # SE of the sample variance from the fourth central moment
    m4 = float(np.mean((errs - mean) ** 4))
    var_se = math.sqrt(max(m4 - var * var, 0.0) / nrep)
    return ErrorMoments(mean=mean, mean_se=mean_se, var=var, var_se=var_se)
