"""Near-maturity laws of the early-exercise boundary: regime detection,
closed-form rate constants, and log-log fits of extracted boundary curves
against the predicted laws.

Every supported model falls into exactly one regime.  When the drift
balance d_+ = r - delta - integral (e^y - 1)_+ nu(dy) is negative the
boundary limit sits strictly below the strike and the gap K - b has a
theta-independent leading term.  Otherwise the limit is the strike and
the leading gap depends on the path regularity at maturity:

* diffusion part present (finite-variation jumps):
      K - b(theta) ~ sigma K sqrt(theta |ln theta|)
* no diffusion, finite variation:
      K / b(theta) - 1 ~ theta * integral (e^y - 1)_- nu(dy)
* no diffusion, negative tempered-stable tail of index 1 < alpha < 2:
      K - b(theta) ~ K (eta0 Gamma(2 - alpha) / (alpha - 1))^{1/alpha}
                       * theta^{1/alpha} |ln theta|^{1 - 1/alpha}
* remaining infinite-variation models: (K/b - 1)/theta diverges but has
  no closed-form constant; only the divergence itself is checkable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .models import (
    ConvergenceError,
    DomainError,
    LevyModel,
    MarketParams,
    ModelError,
    TemperedStableNegative,
    d_plus,
    limit_critical_price,
)
from .american import BoundaryCurve


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------


class RegimeTag(Enum):
    """Mutually exclusive near-maturity behaviours of the boundary."""

    DIFFUSION_DOMINATED = "DiffusionDominated"
    FINITE_VARIATION = "FiniteVariation"
    TEMPERED_STABLE = "TemperedStable"
    INFINITE_VARIATION_OTHER = "InfiniteVariationOther"
    LIMIT_BELOW_STRIKE = "LimitBelowStrike"


@dataclass(frozen=True)
class Regime:
    """Detected regime tag plus the constants its rate law needs."""

    tag: RegimeTag
    params: Dict[str, float]


def stable_rate_constant(alpha: float, eta0: float) -> float:
    """(eta0 Gamma(2 - alpha) / (alpha - 1))^{1/alpha}, the per-unit-strike
    coefficient of the tempered-stable boundary law."""
    return (eta0 * special.gamma(2.0 - alpha) / (alpha - 1.0)) ** (1.0 / alpha)


def detect_regime(model: LevyModel) -> Regime:
    """Classify a model by the near-maturity law its boundary follows.

    The sub-strike test comes first: whenever d_+ < 0 the boundary limit
    is the root of phi0(xi) = r K regardless of path regularity.  The
    three rate regimes additionally require d_+ > 0 (their proofs do);
    the knife edge d_+ = 0 has no closed-form law and lands in the
    divergence-only bucket together with general infinite-variation
    models.
    """
    dp = d_plus(model)
    if dp < 0.0:
        return Regime(RegimeTag.LIMIT_BELOW_STRIKE,
                      {"d_plus": dp, "xi": limit_critical_price(model)})
    nu = model.nu
    if model.sigma > 0.0:
        if nu.finite_variation and dp > 0.0:
            return Regime(RegimeTag.DIFFUSION_DOMINATED,
                          {"d_plus": dp, "sigma": model.sigma})
        return Regime(RegimeTag.INFINITE_VARIATION_OTHER, {"d_plus": dp})
    if isinstance(nu, TemperedStableNegative) and 1.0 < nu.alpha < 2.0 and dp > 0.0:
        return Regime(RegimeTag.TEMPERED_STABLE,
                      {"d_plus": dp, "alpha": nu.alpha, "eta0": nu.eta0,
                       "rate_constant": stable_rate_constant(nu.alpha, nu.eta0)})
    if nu.finite_variation and dp > 0.0:
        return Regime(RegimeTag.FINITE_VARIATION,
                      {"d_plus": dp, "slope": nu.exp_neg_integral()})
    return Regime(RegimeTag.INFINITE_VARIATION_OTHER, {"d_plus": dp})


# ---------------------------------------------------------------------------
# predicted rate laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatePrediction:
    """Leading near-maturity law of the boundary gap.

    ``constant`` multiplies theta^exponent |ln theta|^log_exponent in the
    regime's natural gap variable: currency K - b for the diffusion and
    tempered-stable regimes, dimensionless K/b - 1 for the
    finite-variation regime, and the constant K - xi (exponents zero)
    for the sub-strike regime.  ``gap`` always evaluates the currency
    form K - b.
    """

    constant: float
    exponent: float
    log_exponent: float
    gap: Callable[[float], float] = field(compare=False)


def rate_prediction(regime: Regime, market: MarketParams) -> RatePrediction:
    """Closed-form law for the regime, or DomainError when none exists."""
    return _prediction(regime, market.strike)


def _prediction(regime: Regime, K: float) -> RatePrediction:
    tag = regime.tag
    if tag is RegimeTag.DIFFUSION_DOMINATED:
        c = regime.params["sigma"] * K

        def gap(theta, c=c):
            return c * np.sqrt(theta * np.abs(np.log(theta)))

        return RatePrediction(constant=c, exponent=0.5, log_exponent=0.5, gap=gap)
    if tag is RegimeTag.FINITE_VARIATION:
        c = regime.params["slope"]

        def gap(theta, c=c, K=K):
            return K * c * theta / (1.0 + c * theta)

        return RatePrediction(constant=c, exponent=1.0, log_exponent=0.0, gap=gap)
    if tag is RegimeTag.TEMPERED_STABLE:
        al = regime.params["alpha"]
        c = K * regime.params["rate_constant"]

        def gap(theta, c=c, al=al):
            return c * theta ** (1.0 / al) * np.abs(np.log(theta)) ** (1.0 - 1.0 / al)

        return RatePrediction(constant=c, exponent=1.0 / al,
                              log_exponent=1.0 - 1.0 / al, gap=gap)
    if tag is RegimeTag.LIMIT_BELOW_STRIKE:
        c = K - regime.params["xi"]

        def gap(theta, c=c):
            return c + 0.0 * np.asarray(theta, dtype=float)

        return RatePrediction(constant=c, exponent=0.0, log_exponent=0.0, gap=gap)
    raise DomainError(
        "no closed-form boundary law for this regime; use divergence_check")


def predicted_gap(regime: Regime, theta: float, market: MarketParams) -> float:
    """Predicted currency gap K - b(theta) of the regime's leading law.

    theta must lie in (0, T/2]: the laws describe the maturity end of the
    curve and are meaningless at O(T) distances.
    """
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0.0) or np.any(th > 0.5 * market.maturity):
        raise DomainError("theta must lie in (0, T/2]")
    pred = rate_prediction(regime, market)
    out = pred.gap(th)
    return float(out) if np.ndim(theta) == 0 else out


# ---------------------------------------------------------------------------
# tempered-stable constants
# ---------------------------------------------------------------------------


def stable_constants(alpha: float, eta0: float,
                     eta_sup_fn: Optional[Callable[[float], float]] = None,
                     a_values: Sequence[float] = ()) -> Dict[str, object]:
    """Constants of the tempered-stable boundary law.

    Returns I_alpha = integral_0^inf (e^{-z} - 1 + z) z^{-1-alpha} dz,
    evaluated both by the Gamma identity Gamma(2-alpha)/(alpha(alpha-1))
    and by adaptive quadrature (the two must agree to 1e-8 relative,
    else ConvergenceError), the rate constant
    (eta0 Gamma(2-alpha)/(alpha-1))^{1/alpha}, and the tail coefficients
    J_alpha(a) = (alpha-1) / (alpha^{alpha/(alpha-1)}
    (eta*(a) I_alpha)^{1/(alpha-1)}) for each requested a, where
    eta*(a) = sup of the tail density slope on (a, 0) (constant eta0 by
    default).
    """
    if not (1.0 < alpha < 2.0):
        raise ModelError("alpha must lie in (1, 2)")
    if not (eta0 > 0.0):
        raise ModelError("eta0 must be positive")
    if alpha - 1.0 <= 1e-3 or 2.0 - alpha <= 1e-3:
        warnings.warn("alpha within 1e-3 of an endpoint: Gamma(2-alpha) or "
                      "1/(alpha-1) blows up and the constants lose meaning")
    i_formula = float(special.gamma(2.0 - alpha) / (alpha * (alpha - 1.0)))

    def integrand(z):
        return (np.expm1(-z) + z) * z ** (-1.0 - alpha)

    head, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12,
                             limit=200)
    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=0.0, epsrel=1e-12,
                             limit=200)
    i_quad = head + tail
    if abs(i_quad - i_formula) > 1e-8 * abs(i_formula):
        raise ConvergenceError(
            "quadrature %.17g disagrees with the Gamma identity %.17g"
            % (i_quad, i_formula))
    if eta_sup_fn is None:
        eta_sup_fn = lambda a: eta0
    j_alpha = {}
    for a in a_values:
        eta_star = float(eta_sup_fn(a))
        if not (eta_star > 0.0):
            raise ModelError("eta*(a) must be positive")
        j_alpha[a] = float(
            (alpha - 1.0)
            / (alpha ** (alpha / (alpha - 1.0))
               * (eta_star * i_formula) ** (1.0 / (alpha - 1.0))))
    return {
        "I_alpha": i_formula,
        "I_alpha_quad": float(i_quad),
        "rate_constant": stable_rate_constant(alpha, eta0),
        "J_alpha": j_alpha,
    }


# ---------------------------------------------------------------------------
# fitting extracted boundaries
# ---------------------------------------------------------------------------


@dataclass
class RateFit:
    """Log-log fit of a boundary gap against the regime's law.

    The exponent comes from a free regression of ln z on ln theta, where
    z is the gap with the regime's |ln theta| factor divided out.  The
    constant is the least-squares amplitude of the law itself, i.e. the
    geometric mean of z / theta^p at the theoretical exponent p: on a
    finite theta window the free intercept extrapolates to theta = 1
    through the fitted slope, so a small slope error moves it by a
    factor |window|^(slope error), while the fixed-slope amplitude stays
    put.  ``intercept_constant`` records the free-fit intercept anyway.
    """

    window: Tuple[float, float]
    fitted_exponent: float
    fitted_constant: float
    r_squared: float
    residuals: np.ndarray
    intercept_constant: float
    theory_exponent: float
    theory_constant: float
    n_points: int


def fit_boundary_rate(curve: BoundaryCurve, regime: Regime,
                      window: Tuple[float, float],
                      strike: Optional[float] = None) -> RateFit:
    """Fit the extracted boundary against the regime's predicted law.

    The gap variable follows the regime: K/b - 1 for the
    finite-variation law, K - b otherwise.  The regime's |ln theta|
    power is divided out before regressing, so the fitted exponent is
    directly comparable with the theoretical theta power.
    """
    K = strike if strike is not None else curve.surface.strike
    pred = _prediction(regime, K)
    if pred.exponent == 0.0:
        raise DomainError("the sub-strike regime has no rate to fit; "
                          "compare b(theta_min) with xi instead")
    lo, hi = float(window[0]), float(window[1])
    th_all = np.asarray(curve.thetas, dtype=float)
    if lo < th_all[0] * (1.0 - 1e-12) or hi > th_all[-1] * (1.0 + 1e-12):
        raise DomainError("fit window extends beyond the resolved theta range")
    mask = (th_all >= lo) & (th_all <= hi) & np.isfinite(curve.b)
    if int(mask.sum()) < 8:
        raise DomainError("fit window must contain at least 8 boundary points")
    th = th_all[mask]
    b = np.asarray(curve.b, dtype=float)[mask]
    if regime.tag is RegimeTag.FINITE_VARIATION:
        gaps = K / b - 1.0
    else:
        gaps = K - b
    if np.any(gaps <= 0.0):
        raise DomainError("nonpositive boundary gaps in the window "
                          "(b >= K numerically); cannot fit a rate")
    lth = np.log(th)
    lz = np.log(gaps) - pred.log_exponent * np.log(np.abs(lth))
    slope, inter = np.polyfit(lth, lz, 1)
    fitted = inter + slope * lth
    resid = lz - fitted
    ss_tot = float(np.sum((lz - lz.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    amplitude = float(np.exp(np.mean(lz - pred.exponent * lth)))
    return RateFit(
        window=(lo, hi),
        fitted_exponent=float(slope),
        fitted_constant=amplitude,
        r_squared=min(max(r2, 0.0), 1.0),
        residuals=resid,
        intercept_constant=float(np.exp(inter)),
        theory_exponent=pred.exponent,
        theory_constant=pred.constant,
        n_points=int(mask.sum()),
    )


# ---------------------------------------------------------------------------
# divergence of the relative gap rate
# ---------------------------------------------------------------------------


@dataclass
class DivergenceReport:
    """g(theta) = (K/b - 1)/theta on a decreasing theta ladder.

    For infinite-variation models g diverges at maturity; for
    finite-variation models it settles at integral (e^y - 1)_- nu(dy).
    ``growth_factor`` is g at the smallest theta over g at the largest;
    ``spread`` is max(g)/min(g) - 1, the flatness measure for negative
    controls.
    """

    thetas: np.ndarray
    g: np.ndarray
    growth_factor: float
    increasing: bool
    spread: float


def divergence_check(curve: BoundaryCurve,
                     window: Optional[Tuple[float, float]] = None,
                     n_points: int = 9,
                     strike: Optional[float] = None) -> DivergenceReport:
    """Evaluate g(theta) = (K/b - 1)/theta along a decreasing ladder.

    The default window spans two decades up from the smallest resolved
    theta (clipped to the curve range).  Values are read off the curve
    by linear interpolation of ln(K/b - 1) in ln theta.
    """
    K = strike if strike is not None else curve.surface.strike
    th_all = np.asarray(curve.thetas, dtype=float)
    ok = np.isfinite(curve.b)
    th_res = th_all[ok]
    b_res = np.asarray(curve.b, dtype=float)[ok]
    if th_res.size < 2:
        raise DomainError("curve has fewer than two resolved boundary points")
    if window is None:
        window = (th_res[0], min(100.0 * th_res[0], th_res[-1]))
    lo, hi = float(window[0]), float(window[1])
    if lo < th_res[0] * (1.0 - 1e-12) or hi > th_res[-1] * (1.0 + 1e-12):
        raise DomainError("ladder window extends beyond the resolved range")
    rel = K / b_res - 1.0
    if np.any(rel <= 0.0):
        raise DomainError("K/b - 1 must be positive to take logs")
    ladder = np.geomspace(hi, lo, int(n_points))
    lrel = np.interp(np.log(ladder), np.log(th_res), np.log(rel))
    g = np.exp(lrel) / ladder
    return DivergenceReport(
        thetas=ladder,
        g=g,
        growth_factor=float(g[-1] / g[0]),
        increasing=bool(np.all(np.diff(g) > 0.0)),
        spread=float(g.max() / g.min() - 1.0),
    )
