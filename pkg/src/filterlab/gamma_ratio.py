"""Moments and density of Y = (aX + b) / (cX + d) for X ~ Gamma(alpha, p/alpha).

X has shape alpha and mean p (scale p/alpha).  Every sampling-error
statistic of the stochastically initialized scalar filter is a variable of
this form, so its exact moments reduce to evaluations of the scaled
exponential integral at z = alpha*d/(c*p):

    E[X^n / (cX + d)^n] -> linear combinations of scaled(alpha+j, z).

The closed forms below are exact for all alpha > 1 (alpha > 2, > 4 where
the respective moment requires it); their floating-point accuracy degrades
at very large alpha because the expint combinations cancel, roughly one
digit per decade of alpha for the second moment and three per decade for
the fourth.  Callers probing the alpha -> infinity regime should compare
against the degenerate limit Y -> (a*p + b)/(c*p + d) directly.
"""

import math
from dataclasses import dataclass

from .expint import expint_scaled

__all__ = [
    "GammaRatioSpec",
    "ratio_support",
    "ratio_pdf",
    "ratio_mean",
    "ratio_second_moment",
    "ratio_variance",
    "ratio_fourth_moment",
]


@dataclass(frozen=True)
class GammaRatioSpec:
    """Coefficients of Y = (aX+b)/(cX+d) and the law of X.

    Requires c > 0 and d > 0 so the denominator is bounded away from zero
    on X > 0, a*d != b*c so Y is non-degenerate, alpha > 1 and p > 0.
    """

    a: float
    b: float
    c: float
    d: float
    alpha: float
    p: float

    def __post_init__(self):
        if not (self.c > 0.0 and self.d > 0.0):
            raise ValueError("need c > 0 and d > 0")
        if self.a * self.d == self.b * self.c:
            raise ValueError("a*d == b*c makes Y constant")
        if not (self.alpha > 1.0):
            raise ValueError("need alpha > 1")
        if not (self.p > 0.0):
            raise ValueError("need p > 0")

    @property
    def z(self):
        return self.alpha * self.d / (self.c * self.p)


def ratio_support(spec: GammaRatioSpec):
    """Open interval swept by (aX+b)/(cX+d) as X runs over (0, inf)."""
    lo = spec.b / spec.d
    hi = spec.a / spec.c
    return (lo, hi) if lo < hi else (hi, lo)


def ratio_pdf(spec: GammaRatioSpec, y):
    """Density of Y at y (zero outside the support), formed in log space."""
    a, b, c, d, alpha, p = spec.a, spec.b, spec.c, spec.d, spec.alpha, spec.p
    lo, hi = ratio_support(spec)
    if not (lo < y < hi):
        return 0.0
    x = (d * y - b) / (a - c * y)
    lf = (
        math.log(abs(b * c - a * d))
        + alpha * math.log(alpha * x / p)
        - alpha * x / p
        - math.log(abs(d * y - b))
        - math.log(abs(a - c * y))
        - math.lgamma(alpha)
    )
    return math.exp(lf)


def _scaled_orders(spec: GammaRatioSpec, need_down=False, need_up2=False):
    # scaled expint at orders alpha-1 .. alpha+2 as needed.  Adjacent orders
    # obey nu*scaled(nu+1) + z*scaled(nu) = 1; the upward direction is used
    # only when z dominates the amplification factor, the downward one only
    # when it does not, otherwise the order is evaluated directly.
    alpha, z = spec.alpha, spec.z
    e1 = expint_scaled(alpha, z)
    e2 = expint_scaled(alpha + 1.0, z)
    e0 = e3 = None
    if need_down:
        if z >= alpha:
            e0 = (1.0 - (alpha - 1.0) * e1) / z
        else:
            e0 = expint_scaled(alpha - 1.0, z)
    if need_up2:
        e3 = (1.0 - z * e2) / (alpha + 1.0)
    return e0, e1, e2, e3


def ratio_mean(spec: GammaRatioSpec):
    """E[Y], exact for alpha > 1."""
    a, b, c, p, alpha = spec.a, spec.b, spec.c, spec.p, spec.alpha
    _, e1, e2, _ = _scaled_orders(spec)
    return (alpha / c) * ((b / p) * e1 + a * e2)


def ratio_second_moment(spec: GammaRatioSpec):
    """E[Y^2], exact for alpha > 2."""
    a, b, c, p, alpha = spec.a, spec.b, spec.c, spec.p, spec.alpha
    if not (alpha > 2.0):
        raise ValueError("second moment needs alpha > 2")
    e0, e1, e2, e3 = _scaled_orders(spec, need_down=True, need_up2=True)
    c2 = c * c
    t0 = (alpha * alpha * b * b / (c2 * p * p)) * e0
    t1 = (alpha * alpha * b * (2.0 * a * p - b) / (c2 * p * p)) * e1
    t2 = (alpha * a * ((alpha + 1.0) * a * p - 2.0 * alpha * b) / (c2 * p)) * e2
    t3 = -(alpha * (alpha + 1.0) * a * a / c2) * e3
    return t0 + t1 + t2 + t3


def ratio_variance(spec: GammaRatioSpec):
    m = ratio_mean(spec)
    return ratio_second_moment(spec) - m * m


def ratio_fourth_moment(spec: GammaRatioSpec):
    """E[Y^4] for the pure-ratio case b = 0, exact for alpha > 4."""
    a, b, c, d, alpha, p = spec.a, spec.b, spec.c, spec.d, spec.alpha, spec.p
    if b != 0.0:
        raise ValueError("fourth moment implemented for b = 0 only")
    if not (alpha > 4.0):
        raise ValueError("fourth moment needs alpha > 4")
    z = spec.z
    e1 = expint_scaled(alpha, z)
    cp = c * p
    ad = alpha * d
    poly = p * (
        cp * (cp * (6.0 * cp + alpha * (alpha * (alpha + 7.0) + 18.0) * d)
              + (2.0 * alpha + 9.0) * alpha * alpha * d * d)
        + alpha ** 3 * d ** 3
    )
    nest = (
        (alpha + 3.0) * cp * (
            (alpha + 2.0) * cp * ((alpha + 1.0) * cp + 3.0 * ad)
            + 3.0 * alpha * alpha * d * d
        )
        + alpha ** 3 * d ** 3
    )
    bracket = poly - (ad / c) * nest * e1
    return a ** 4 / (6.0 * p ** 4 * c ** 7) * bracket
