"""Solvers for the implicit regularization parameter kappa.

Going from explicit ridge regularization lambda to the population-level
equivalent requires the larger parameter kappa solving

    kappa * (1 - df1(kappa) / n) = lambda,

together with the companion problem df1(kappa) = target used by the
projection formulas.  Both maps are monotone on the relevant branch, so
bisection with a guaranteed bracket is used throughout, followed by a couple
of guarded Newton steps to polish the residual.  Closed forms are provided
for the isotropic and two-atom spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .spectrum import Spectrum, df1

__all__ = [
    "KappaSolution",
    "kappa_of_lambda",
    "kappa_at_dof",
    "kappa_isotropic_closed",
    "kappa_two_dirac_closed",
    "REGIME_UNDER",
    "REGIME_OVER",
    "REGIME_CRITICAL",
]

REGIME_UNDER = "under_parameterized"
REGIME_OVER = "over_parameterized"
REGIME_CRITICAL = "critical"

_BISECT_REL_WIDTH = 1e-13
_MAX_ITER = 200


@dataclass(frozen=True)
class KappaSolution:
    """Solved implicit regularization parameter with diagnostics.

    residual is the defect of the defining equation at kappa; diverged marks
    the boundary case where the derivative of kappa(lambda) blows up at zero
    and downstream risk formulas are infinite.
    """

    kappa: float
    residual: float
    iterations: int
    regime: str
    diverged: bool = False


def _regime(d: float, n: int) -> str:
    if d < n:
        return REGIME_UNDER
    if d > n:
        return REGIME_OVER
    return REGIME_CRITICAL


def kappa_of_lambda(s: Spectrum, n: int, lam: float) -> KappaSolution:
    """Solve kappa * (1 - df1(kappa)/n) = lam for the unique root >= lam.

    At lam = 0 the equation degenerates: with rank(Sigma) < n the root is
    exactly zero, with rank(Sigma) > n it is the positive solution of
    df1(kappa) = n, and with rank(Sigma) = n the root is zero but sits on a
    square-root branch, reported as a flagged critical solution.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    lam = float(lam)
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    rank = s.rank
    regime = _regime(rank, n)

    if lam == 0.0:
        if rank < n:
            return KappaSolution(kappa=0.0, residual=0.0, iterations=0, regime=regime)
        if rank == n:
            return KappaSolution(
                kappa=0.0, residual=0.0, iterations=0, regime=REGIME_CRITICAL, diverged=True
            )
        sol = kappa_at_dof(s, float(n))
        return KappaSolution(
            kappa=sol.kappa, residual=sol.residual, iterations=sol.iterations, regime=regime
        )

    def defect(k: float) -> float:
        return k * (1.0 - df1(s, k) / n) - lam

    lo = lam
    hi = lam + s.trace / n
    it = 0
    # The upper endpoint is a proven bound; nudge for roundoff.
    while defect(hi) < 0.0 and it < 64:
        hi *= 1.0 + 1e-12
        it += 1
    for _ in range(_MAX_ITER):
        it += 1
        mid = 0.5 * (lo + hi)
        if defect(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_REL_WIDTH * hi:
            break
    kappa = 0.5 * (lo + hi)
    return KappaSolution(
        kappa=kappa, residual=defect(kappa), iterations=it, regime=regime
    )


def kappa_at_dof(s: Spectrum, target: float) -> KappaSolution:
    """Solve df1(kappa) = target for 0 < target < rank(Sigma).

    df1 is strictly decreasing, so bisection on [0, tr(Sigma)/target] always
    brackets the root; two Newton polishing steps push the residual to
    roundoff level.
    """
    target = float(target)
    rank = s.rank
    if not target > 0:
        raise ValueError(f"target must be positive, got {target}")
    if target >= rank:
        raise ValueError(
            f"target {target} exceeds spectrum rank {rank}; no positive solution exists"
        )
    lo = 0.0
    hi = s.trace / target
    bracket_hi = hi
    it = 0
    for _ in range(_MAX_ITER):
        it += 1
        mid = 0.5 * (lo + hi)
        if df1(s, mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_REL_WIDTH * max(hi, 1e-300):
            break
    kappa = 0.5 * (lo + hi)
    # Newton polish on f(k) = df1(k) - target, f'(k) = -sum w e / (e+k)^2,
    # guarded by the original bracket.
    e, w = s.eigenvalues, s.weights
    for _ in range(3):
        f = df1(s, kappa) - target
        fp = -float((w * e / (e + kappa) ** 2).sum())
        if fp == 0.0:
            break
        cand = kappa - f / fp
        if not 0.0 < cand < bracket_hi or cand == kappa:
            break
        kappa = cand
    # Inverting df1 only arises when the dof constraint binds, i.e. the
    # effective model dimension exceeds the target.
    return KappaSolution(
        kappa=kappa, residual=df1(s, kappa) - target, iterations=it, regime=REGIME_OVER
    )


def kappa_isotropic_closed(sigma: float, gamma: float, lam: float) -> float:
    """Closed-form kappa(lambda) for a single-atom spectrum at sigma.

    Solves the quadratic kappa * (1 - gamma*sigma/(sigma+kappa)) = lambda.
    """
    if sigma < 0 or gamma < 0 or lam < 0:
        raise ValueError(
            f"arguments must be nonnegative, got sigma={sigma} gamma={gamma} lambda={lam}"
        )
    b = sigma * (1.0 - gamma) - lam
    return 0.5 * (lam - sigma * (1.0 - gamma) + math.sqrt(b * b + 4.0 * lam * sigma))


def kappa_two_dirac_closed(
    pi1: float, pi2: float, sigma1: float, sigma2: float, gamma: float, delta: float
) -> float:
    """Closed-form kappa with df1(kappa) = delta * n for a two-atom spectrum.

    gamma is d/n and delta = m/n must satisfy delta < gamma for a positive
    root; delta = 0 is the infinite-regularization limit and returns inf.
    """
    if abs(pi1 + pi2 - 1.0) > 1e-12:
        raise ValueError(f"atom fractions must sum to 1, got {pi1} + {pi2}")
    if not (0.0 <= pi1 <= 1.0):
        raise ValueError(f"pi1 must lie in [0, 1], got {pi1}")
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError(f"eigenvalues must be positive, got {sigma1}, {sigma2}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if delta == 0.0:
        return math.inf
    ratio = gamma / delta
    if ratio < 1.0:
        raise ValueError(
            f"delta = {delta} meets or exceeds gamma = {gamma}; no positive solution exists"
        )
    if ratio == 1.0:
        return 0.0
    b = ratio * (pi1 * sigma1 + pi2 * sigma2) - sigma1 - sigma2
    disc = b * b + 4.0 * sigma1 * sigma2 * (ratio - 1.0)
    return 0.5 * (b + math.sqrt(disc))
