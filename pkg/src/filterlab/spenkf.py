"""Stochastically initialized scalar ensemble filter and its exact inflation.

The filter carries an N-member ensemble whose only stochasticity is the
initial draw: the analysis update rescales anomalies deterministically by
(pa/pf)^(1/2), so the sampled initial variance

    phat0 = (1/N) a.a  ~  Gamma(alpha, p0/alpha),  alpha = N/2

propagates through the same closed forms as the exact filter.  That makes
the optimal multiplicative inflation computable in closed form: theta_i
solves E[inflated analysis variance] = exact analysis variance, via the
inverse of the scaled exponential integral, and the sequential factors
(phi_i, psi_i) convert the one-shot theta_i into a per-step correction of
the forecast variance and mean.
"""

import math
from dataclasses import dataclass

import numpy as np

from .expint import expint_scaled_inverse_shifted
from .propagators import ModelTrajectory
from .rng import RngSpec, normal_polar

__all__ = [
    "EnsembleState",
    "InflationSchedule",
    "sample_initial_ensemble",
    "spenkf_analyze",
    "spenkf_forecast",
    "spenkf_step",
    "spenkf_run",
    "theta_star",
    "theta_step",
    "inflation_schedule",
    "inflated_reference_run",
]


@dataclass(frozen=True)
class EnsembleState:
    """Ensemble mean and anomalies after a forecast or analysis.

    sampled_var is the divisor-N variance (1/N) a.a, matching the
    stochastic-initialization convention; phase is "forecast" or
    "analysis"; gain is the gain of the producing analysis (nan for
    forecast states).
    """

    step: int
    phase: str
    mean: float
    anomalies: np.ndarray
    sampled_var: float
    gain: float = math.nan

    @property
    def size(self):
        return len(self.anomalies)

    @property
    def alpha(self):
        return 0.5 * len(self.anomalies)


def _svar(anoms):
    return float(np.dot(anoms, anoms) / len(anoms))


def sample_initial_ensemble(n_members, p0, x0, spec: RngSpec):
    """Initial forecast-phase ensemble: anomalies i.i.d. N(0, p0).

    The sampled variance (not p0 itself) is what the filter propagates:
    phat0 = (1/N) a.a is exactly Gamma(N/2) scaled to mean p0.  The mean
    is carried separately, so the anomalies are not recentred; recentring
    would change the sampled-variance law to a chi-square with N-1 degrees
    of freedom.
    """
    n = int(n_members)
    if n < 3:
        raise ValueError("need at least 3 ensemble members")
    if not (p0 > 0.0):
        raise ValueError("p0 must be positive")
    anoms = math.sqrt(p0) * normal_polar(spec.generator(), n)
    if _svar(anoms) == 0.0:
        raise ValueError("degenerate initial ensemble: all anomalies zero")
    return EnsembleState(step=0, phase="forecast", mean=float(x0),
                         anomalies=anoms, sampled_var=_svar(anoms))


def spenkf_analyze(state: EnsembleState, y, r):
    """Assimilate observation y: gain from the sampled forecast variance,
    anomalies rescaled by (pa/pf)^(1/2)."""
    if state.phase != "forecast":
        raise ValueError("can only analyze a forecast-phase state")
    pf = state.sampled_var
    if pf < 1e-300:
        raise ValueError("degenerate ensemble: sampled variance underflowed")
    k = pf / (pf + r)
    pa = (1.0 - k) * pf
    anoms = state.anomalies * math.sqrt(pa / pf)
    return EnsembleState(
        step=state.step,
        phase="analysis",
        mean=state.mean + k * (y - state.mean),
        anomalies=anoms,
        sampled_var=_svar(anoms),
        gain=k,
    )


def spenkf_forecast(state: EnsembleState, m, phi=1.0, psi=0.0):
    """Propagate through multiplier m, then apply the variance inflation phi
    (anomalies scaled by sqrt(phi)) and the mean shift psi, in that order,
    before the next analysis."""
    if state.phase != "analysis":
        raise ValueError("can only forecast from an analysis-phase state")
    if m == 0.0:
        raise ValueError("model multiplier must be nonzero")
    anoms = state.anomalies * (m * math.sqrt(phi))
    return EnsembleState(
        step=state.step + 1,
        phase="forecast",
        mean=m * state.mean + psi,
        anomalies=anoms,
        sampled_var=_svar(anoms),
    )


def spenkf_step(state: EnsembleState, m, y, r, phi=1.0, psi=0.0):
    return spenkf_analyze(spenkf_forecast(state, m, phi, psi), y, r)


def spenkf_run(traj: ModelTrajectory, initial: EnsembleState,
               inflation: "InflationSchedule | None" = None):
    """Run the filter along a trajectory; returns analysis states per step.

    With a schedule, phi_0 scales the initial anomalies before the first
    analysis and (phi_i, psi_i) correct every later forecast.
    """
    r = traj.obs_variance
    state = initial
    if inflation is not None:
        anoms = state.anomalies * math.sqrt(inflation.phi[0])
        state = EnsembleState(step=0, phase="forecast", mean=state.mean,
                              anomalies=anoms, sampled_var=_svar(anoms))
    states = [spenkf_analyze(state, traj.observations[0], r)]
    for i, m in enumerate(traj.model.values):
        phi = inflation.phi[i + 1] if inflation is not None else 1.0
        psi = inflation.psi[i + 1] if inflation is not None else 0.0
        states.append(spenkf_step(states[-1], m, traj.observations[i + 1], r,
                                  phi=phi, psi=psi))
    return states


def theta_star(alpha):
    """Limit of the optimal inflation as r/(S_i p0) -> 0."""
    if not (alpha > 1.0):
        raise ValueError("need alpha > 1")
    return alpha / (alpha - 1.0)


def _theta_from_u(alpha, p0, u):
    # u = r / S_i.  theta = alpha*r / (S_i p0 z*) with z* the inverse of the
    # scaled expint at order alpha+1 evaluated at S_i p0 / (alpha (S_i p0 + r)).
    # The target sits near its z = 0 limit 1/alpha for small u, so the
    # inverse is driven by the shift 1/alpha - y = u / (alpha (p0 + u)),
    # formed here without cancellation.
    delta = u / (alpha * (p0 + u))
    z = expint_scaled_inverse_shifted(alpha, delta)
    if z == 0.0:
        # delta underflowed: the u -> 0 limit applies
        return theta_star(alpha)
    th = alpha * u / (p0 * z)
    # roundoff guard: theta lies in [1, theta_star] by monotonicity
    return min(max(th, 1.0), theta_star(alpha))


def theta_step(alpha, S_i, p0, r):
    """One-shot optimal inflation theta_i from raw S_i (may overflow; prefer
    inflation_schedule, which uses the trajectory's ratio ledger)."""
    return _theta_from_u(float(alpha), float(p0), float(r) / float(S_i))


@dataclass(frozen=True)
class InflationSchedule:
    """Per-step correction factors for an inflated run.

    theta[i] is the one-shot factor making the expected inflated analysis
    variance exact at step i; phi[i]/psi[i] are the sequential forecast
    corrections that realize theta[i] given theta[i-1] was realized, with
    phi[0] = theta[0] applied to the initial ensemble.  x_init is the mean
    the filter was started from; the mean shifts psi are relative to it.
    """

    alpha: float
    p0: float
    r: float
    x_init: float
    theta_star: float
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray


def inflation_schedule(traj: ModelTrajectory, alpha, p0, x_init):
    """Exact inflation schedule along a trajectory.

    The mean shifts depend on the realized observations through B_i, so the
    schedule is trajectory-specific, not just model-specific.
    """
    alpha, p0, x_init = float(alpha), float(p0), float(x_init)
    n = traj.n_steps
    theta = np.empty(n + 1)
    phi = np.empty(n + 1)
    psi = np.zeros(n + 1)
    for i in range(n + 1):
        theta[i] = _theta_from_u(alpha, p0, traj.r_over_S(i))
    phi[0] = theta[0]
    for i in range(n):
        u = traj.r_over_S(i)
        th0, th1 = theta[i], theta[i + 1]
        phi[i + 1] = th1 * (th0 * p0 + u) / (th0 * (th1 * p0 + u))
        psi[i + 1] = (
            traj.M_next_over_S(i)
            * (traj.B_over_S(i) - x_init)
            * (th1 - th0) * p0 * traj.obs_variance
            / ((th1 * p0 + u) * (th0 * p0 + u))
        )
    return InflationSchedule(alpha=alpha, p0=p0, r=traj.obs_variance,
                             x_init=x_init,
                             theta_star=theta_star(alpha),
                             theta=theta, phi=phi, psi=psi)


def inflated_reference_run(traj: ModelTrajectory, x_init, p_init,
                           schedule: InflationSchedule):
    """Deterministic mean/variance recursion under a schedule.

    Runs the exact filter recursion seeded at (x_init, p_init) with the
    schedule's phi multiplying each forecast variance and psi added to each
    forecast mean.  Feeding the sampled (phat0, xhat0) reproduces the
    inflated ensemble run's statistics exactly; feeding (theta[i]-free)
    means gives the expected-value bootstrap identity its reference.
    Returns (means, variances) arrays over analysis states.
    """
    r = traj.obs_variance
    n = traj.n_steps
    means = np.empty(n + 1)
    variances = np.empty(n + 1)
    xf = float(x_init)
    pf = float(p_init) * schedule.phi[0]
    for i in range(n + 1):
        y = traj.observations[i]
        k = pf / (pf + r)
        xa = xf + k * (y - xf)
        pa = (1.0 - k) * pf
        means[i], variances[i] = xa, pa
        if i < n:
            m = traj.model.values[i]
            xf = m * xa + schedule.psi[i + 1]
            pf = m * m * pa * schedule.phi[i + 1]
    return means, variances
