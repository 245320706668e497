"""Asymptotic bias/variance equivalents for the three estimators.

Given a spectrum, a signal measure, a sample count n and a noise level, this
module evaluates the deterministic equivalents of the excess risk for ridge
regression, minimum-norm least squares, and minimum-norm least squares on
randomly projected covariates, plus the exact finite-sample fixed-design
ridge formula.  Variance terms never depend on the signal and bias terms
never depend on the noise level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .selfconsistent import (
    REGIME_CRITICAL,
    REGIME_OVER,
    REGIME_UNDER,
    kappa_at_dof,
    kappa_of_lambda,
)
from .spectrum import SignalMeasure, Spectrum, df1, df2, signal_functional

__all__ = [
    "RiskBreakdown",
    "fixed_design_ridge_risk",
    "ridge_risk",
    "minnorm_risk",
    "rp_risk",
    "DIVERGENCE_FLOOR",
]

# Relative floor below which a risk denominator is treated as divergent.
DIVERGENCE_FLOOR = 1e-9


@dataclass(frozen=True)
class RiskBreakdown:
    """Excess-risk decomposition at one operating point.

    total is always bias + variance; diverged marks operating points where a
    denominator (n - df2, |m - n|) fell below the relative floor and the
    values are reported as infinities rather than garbage.
    """

    bias: float
    variance: float
    total: float
    kappa: float
    df1_at_kappa: float
    df2_at_kappa: float
    regime: str
    diverged: bool = False


def _breakdown(bias, variance, kappa, s: Spectrum, regime, diverged=False) -> RiskBreakdown:
    return RiskBreakdown(
        bias=bias,
        variance=variance,
        total=bias + variance,
        kappa=kappa,
        df1_at_kappa=df1(s, kappa) if math.isfinite(kappa) else 0.0,
        df2_at_kappa=df2(s, kappa) if math.isfinite(kappa) else 0.0,
        regime=regime,
        diverged=diverged,
    )


def _diverged(s: Spectrum, regime: str, kappa: float = 0.0) -> RiskBreakdown:
    return _breakdown(math.inf, math.inf, kappa, s, regime, diverged=True)


def fixed_design_ridge_risk(
    empirical_spec: Spectrum,
    empirical_signal: SignalMeasure,
    n: int,
    sigma: float,
    lam: float,
) -> RiskBreakdown:
    """Exact fixed-design ridge risk on an empirical covariance spectrum.

    bias = lam^2 * theta' (Shat + lam I)^-2 Shat theta and
    variance = (sigma^2 / n) * tr[Shat^2 (Shat + lam I)^-2]; no asymptotics
    are involved.  lam = 0 requires a full-rank spectrum.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    lam = float(lam)
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if lam == 0.0 and empirical_spec.rank < empirical_spec.d:
        raise ValueError("lambda = 0 requires a full-rank empirical covariance")
    regime = (
        REGIME_UNDER
        if empirical_spec.d < n
        else (REGIME_OVER if empirical_spec.d > n else REGIME_CRITICAL)
    )
    bias = lam**2 * signal_functional(empirical_spec, empirical_signal, lam, 2)
    variance = sigma**2 / n * df2(empirical_spec, lam)
    return _breakdown(bias, variance, lam, empirical_spec, regime)


def ridge_risk(s: Spectrum, v: SignalMeasure, n: int, sigma: float, lam: float) -> RiskBreakdown:
    """Random-design ridge risk equivalent.

    The fixed-design formula evaluated at the implicit parameter kappa(lam),
    inflated by 1 / (1 - df2(kappa)/n) on both terms.
    """
    sol = kappa_of_lambda(s, n, lam)
    if sol.diverged:
        return _diverged(s, sol.regime, kappa=sol.kappa)
    kappa = sol.kappa
    d2 = df2(s, kappa)
    denom = 1.0 - d2 / n
    if denom <= DIVERGENCE_FLOOR:
        return _diverged(s, sol.regime, kappa=kappa)
    inflation = 1.0 / denom
    variance = sigma**2 / n * d2 * inflation
    bias = kappa**2 * signal_functional(s, v, kappa, 2) * inflation
    return _breakdown(bias, variance, kappa, s, sol.regime)


def minnorm_risk(s: Spectrum, v: SignalMeasure, n: int, sigma: float) -> RiskBreakdown:
    """Minimum-norm least-squares risk equivalent (ridgeless limit).

    Below the interpolation threshold this is the ordinary least-squares
    equivalent (zero bias, variance sigma^2 d / (n - d)); above it, the
    ridge equivalent at lambda = 0 with df1(kappa) = n.  At d = n the risk
    diverges and is reported flagged.
    """
    return ridge_risk(s, v, n, sigma, 0.0)


def rp_risk(s: Spectrum, v: SignalMeasure, n: int, m: int, sigma: float) -> RiskBreakdown:
    """Risk equivalent for min-norm least squares on m random projections.

    Below m = n the variance is sigma^2 m / (n - m) and the bias combines the
    dof-matched parameter kappa_m (df1(kappa_m) = m) with the 1/(1 - m/n)
    inflation; above m = n both terms are the ridgeless equivalents plus
    excess-projection terms proportional to n / (m - n).  With m >= d and
    d < n the projection spans the whole space almost surely and the
    estimator collapses to ordinary least squares.
    """
    if n < 1 or m < 1:
        raise ValueError(f"n and m must be >= 1, got n={n} m={m}")
    d = s.rank
    if m == n:
        return _diverged(s, REGIME_CRITICAL)

    if m < n:
        if m >= d:
            if d < n:
                return minnorm_risk(s, v, n, sigma)
            return _diverged(s, REGIME_UNDER)
        denom = (n - m) / n
        if denom <= DIVERGENCE_FLOOR:
            return _diverged(s, REGIME_UNDER)
        km = kappa_at_dof(s, float(m)).kappa
        variance = sigma**2 * m / (n - m)
        bias = km * signal_functional(s, v, km, 1) / denom
        return _breakdown(bias, variance, km, s, REGIME_UNDER)

    # m > n
    if d < n:
        return minnorm_risk(s, v, n, sigma)
    if d == n:
        return _diverged(s, REGIME_OVER)
    denom_m = (m - n) / n
    if denom_m <= DIVERGENCE_FLOOR:
        return _diverged(s, REGIME_OVER)
    kn = kappa_at_dof(s, float(n)).kappa
    d2 = df2(s, kn)
    denom = 1.0 - d2 / n
    if denom <= DIVERGENCE_FLOOR:
        return _diverged(s, REGIME_OVER, kappa=kn)
    inflation = 1.0 / denom
    variance = sigma**2 / n * d2 * inflation + sigma**2 * n / (m - n)
    bias = (
        kn**2 * signal_functional(s, v, kn, 2) * inflation
        + kn * signal_functional(s, v, kn, 1) * n / (m - n)
    )
    return _breakdown(bias, variance, kn, s, REGIME_OVER)
