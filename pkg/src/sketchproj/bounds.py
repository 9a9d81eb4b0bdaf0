"""Closed-form per-iteration contraction factors and noise horizons for the
sketch-and-project variants, used as comparators for empirical traces.

Each calculator returns a `RateBound` rather than raising on out-of-regime
inputs, so the harness can annotate output with whichever bounds hold.  The
``source`` tags (thm1, thm2, thm3, thm4, thm5, prop1) name the summary-CSV
columns that expose them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .linalg import SpectralSummary
from .sketch import collection_cardinality_bounds


@dataclass(frozen=True)
class RateBound:
    """A guaranteed expected contraction factor ``beta`` per iteration plus,
    for inconsistent systems, the additive error floor ``horizon`` that the
    expected squared error plateaus at."""

    source: str
    beta: float
    horizon: float = 0.0
    applicable: bool = True
    reason: str = ""
    per_step_noise: float | None = None
    collection_feasible: bool | None = None


def _check_dims(m: int | None, s: int) -> None:
    if s < 1:
        raise ParameterError(f"sketch size must be >= 1, got {s}")
    if m is not None and m < 1:
        raise ParameterError(f"row count must be >= 1, got {m}")


def _rank_deficient(source: str) -> RateBound:
    return RateBound(source=source, beta=1.0, applicable=False, reason="matrix is rank deficient")


def rate_condition_number(summary: SpectralSummary, m: int, s: int) -> RateBound:
    """Contraction ``1 - s / (15 m kappa^2)`` for fresh Gaussian sketches,
    valid while ``kappa^2 <= e^{m/4} / 3``."""
    _check_dims(m, s)
    if summary.sigma_min <= 0:
        return _rank_deficient("thm1")
    if math.log(3.0 * summary.kappa2) > m / 4.0:
        return RateBound(
            source="thm1",
            beta=1.0,
            applicable=False,
            reason=f"kappa2={summary.kappa2:.3g} exceeds exp(m/4)/3",
        )
    beta = 1.0 - s / (15.0 * m * summary.kappa2)
    return RateBound(source="thm1", beta=beta)


def rate_norm_ratio(summary: SpectralSummary, s: int) -> RateBound:
    """Condition-number-free contraction
    ``1 - (1/80) [sqrt(s) sigma_min / (sqrt(s) ||A|| + ||A||_F)]^2``."""
    _check_dims(None, s)
    if summary.sigma_min <= 0:
        return _rank_deficient("thm2")
    rs = math.sqrt(s)
    ratio = rs * summary.sigma_min / (rs * summary.sigma_max + summary.frob)
    beta = 1.0 - ratio * ratio / 80.0
    return RateBound(source="thm2", beta=beta)


def rate_finite_collection(summary: SpectralSummary, m: int, s: int, c: float = 4.0) -> RateBound:
    """Contraction ``1 - s / (36 m kappa^2)`` when sketches are drawn with
    replacement from a fixed quality collection; carries the feasibility of
    the guaranteed cardinality range ``64 c m^2 ln m <= N <= e^{m/3}``."""
    _check_dims(m, s)
    feasible = collection_cardinality_bounds(m, c).feasible if m >= 2 else None
    if summary.sigma_min <= 0:
        return _rank_deficient("thm3")
    beta = 1.0 - s / (36.0 * m * summary.kappa2)
    return RateBound(source="thm3", beta=beta, collection_feasible=feasible)


def rate_one_step(summary: SpectralSummary, m: int, s: int) -> RateBound:
    """Sharpest single-step expected contraction
    ``1 - s / (10 m kappa^2) - e^{-m/4} / (10 m)``; the preferred comparator
    for Monte-Carlo contraction checks."""
    _check_dims(m, s)
    if summary.sigma_min <= 0:
        return _rank_deficient("prop1")
    beta = 1.0 - s / (10.0 * m * summary.kappa2) - math.exp(-m / 4.0) / (10.0 * m)
    return RateBound(source="prop1", beta=beta)


def horizon_finite_collection(
    summary: SpectralSummary, m: int, n: int, s: int, e_norm: float
) -> RateBound:
    """Noise floor ``300 m kappa^2 ||e||^2 / (sigma_min^2 (sqrt(n)-sqrt(s))^2)``
    for finite-collection sketching on an inconsistent system, alongside the
    per-step noise bound ``8 s ||e||^2 / ((sqrt(n)-sqrt(s))^2 sigma_min^2)``."""
    _check_dims(m, s)
    if e_norm < 0:
        raise ParameterError("noise norm must be non-negative")
    if summary.sigma_min <= 0:
        return _rank_deficient("thm4")
    if s >= n:
        return RateBound(
            source="thm4",
            beta=1.0,
            applicable=False,
            reason=f"sketch size {s} must be below n={n}; the horizon diverges as s -> n",
        )
    beta = 1.0 - s / (36.0 * m * summary.kappa2)
    gap2 = (math.sqrt(n) - math.sqrt(s)) ** 2
    smin2 = summary.sigma_min**2
    horizon = 300.0 * m * summary.kappa2 * e_norm**2 / (smin2 * gap2)
    per_step = 8.0 * s * e_norm**2 / (gap2 * smin2)
    return RateBound(source="thm4", beta=beta, horizon=horizon, per_step_noise=per_step)


def horizon_fresh_gaussian(
    summary: SpectralSummary, n: int, s: int, e_norm: float, alpha: float = 0.99
) -> RateBound:
    """Noise floor
    ``1600 (sqrt(s)||A|| + ||A||_F)^2 ||e||^2 / (sigma_min^4 (sqrt(n)-sqrt(s))^2)``
    for fresh Gaussian sketching, valid for ``s <= alpha n`` with ``alpha < 1``;
    the per-step noise bound ``20 s ||e||^2 / ((sqrt(n)-sqrt(s))^2 sigma_min^2)``
    rides along for Monte-Carlo verification of the bounded-noise event."""
    _check_dims(None, s)
    if e_norm < 0:
        raise ParameterError("noise norm must be non-negative")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if summary.sigma_min <= 0:
        return _rank_deficient("thm5")
    if s > alpha * n:
        return RateBound(
            source="thm5",
            beta=1.0,
            applicable=False,
            reason=f"sketch size {s} exceeds alpha*n = {alpha * n:.1f}",
        )
    rs = math.sqrt(s)
    ratio = rs * summary.sigma_min / (rs * summary.sigma_max + summary.frob)
    beta = 1.0 - ratio * ratio / 80.0
    gap2 = (math.sqrt(n) - math.sqrt(s)) ** 2
    mix = (rs * summary.sigma_max + summary.frob) ** 2
    horizon = 1600.0 * mix * e_norm**2 / (summary.sigma_min**4 * gap2)
    per_step = 20.0 * s * e_norm**2 / (gap2 * summary.sigma_min**2)
    return RateBound(source="thm5", beta=beta, horizon=horizon, per_step_noise=per_step)


def predicted_iterations(bound: RateBound, initial_rel_error: float, target: float) -> int:
    """Iterations guaranteed (in expectation) to bring the squared relative
    error from ``initial_rel_error`` down to ``target``."""
    if not bound.applicable:
        raise ParameterError(f"bound {bound.source} is not applicable: {bound.reason}")
    if initial_rel_error <= 0 or target <= 0:
        raise ParameterError("errors must be positive")
    if target >= initial_rel_error:
        return 0
    if bound.beta >= 1.0:
        raise ParameterError("bound guarantees no progress (beta >= 1)")
    return math.ceil(math.log(target / initial_rel_error) / math.log(bound.beta))
