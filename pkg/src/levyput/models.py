"""Exponential Levy market models.

The asset follows S_t = S_0 * exp((r - delta) t + X_t) where X is a Levy
process with triplet (sigma^2, gamma, nu) whose drift gamma is always solved
from the martingale condition

    sigma^2 / 2 + gamma + integral (e^x - 1 - x 1_{|x|<=1}) nu(dx) = 0,

so that E[e^{X_t}] = 1 and discounted-dividend-adjusted prices are
martingales.  Jump measures come from a small set of parametric families,
each exposing exact masses, moments, characteristic-function terms and
samplers, so every downstream consumer (quadrature pricer, finite-difference
operator, Monte Carlo) works against one measure object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special
from scipy.optimize import brentq


class ModelError(ValueError):
    """Raised for parameter sets outside the supported model class."""


class DomainError(ValueError):
    """Raised when a characteristic exponent is evaluated outside its strip."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative numerical routine fails its tolerance."""


_LEGGAUSS_CACHE: dict = {}


def _leggauss(n: int):
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEGGAUSS_CACHE[n]


def _gl_nodes(a: float, b: float, n: int):
    """Gauss-Legendre nodes/weights on (a, b)."""
    x, w = _leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _expm1_c(w: np.ndarray) -> np.ndarray:
    """e^w - 1 for complex w without cancellation in the real part."""
    a, b = np.real(w), np.imag(w)
    return np.expm1(a) * np.cos(b) - 2.0 * np.sin(0.5 * b) ** 2 + 1j * np.exp(a) * np.sin(b)

def _expm1m_c(w: np.ndarray) -> np.ndarray:
    """e^w - 1 - w for complex w, series-stabilized near zero."""
    out = _expm1_c(w) - w
    small = np.abs(w) < 0.25
    if np.any(small):
        ws = w[small]
        term = 0.5 * ws * ws
        acc = np.zeros_like(ws)
        for k in range(2, 13):
            acc = acc + term
            term = term * ws / (k + 1.0)
        out[small] = acc
    return out


@dataclass(frozen=True)
class MarketParams:
    """Market constants: short rate, dividend yield, strike, maturity."""

    r: float
    delta: float
    strike: float
    maturity: float

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "strike", float(self.strike))
        object.__setattr__(self, "maturity", float(self.maturity))
        if not (self.r >= 0.0 and np.isfinite(self.r)):
            raise ModelError("short rate r must be finite and >= 0")
        if not (self.delta >= 0.0 and np.isfinite(self.delta)):
            raise ModelError("dividend yield delta must be finite and >= 0")
        if not (self.strike > 0.0 and np.isfinite(self.strike)):
            raise ModelError("strike must be positive")
        if not (self.maturity > 0.0 and np.isfinite(self.maturity)):
            raise ModelError("maturity must be positive")


# ---------------------------------------------------------------------------
# jump measures
# ---------------------------------------------------------------------------


class JumpMeasure:
    """Levy jump measure interface.

    Concrete families implement exact (closed-form where possible) masses,
    partial moments, exponential moments, the characteristic-function term

        cf_term(z) = integral (e^{izy} - 1 - izy 1_{|y|<=1}) nu(dy),

    and conditional jump-size sampling above a resolution cutoff.
    """

    # -- structure flags ----------------------------------------------------
    @property
    def finite_activity(self) -> bool:
        return np.isfinite(self.total_mass())

    @property
    def finite_variation(self) -> bool:
        return np.isfinite(self.small_abs_moment())

    def atom_list(self) -> Tuple[Tuple[float, float], ...]:
        """Atomic part as ((y, intensity), ...); empty for pure densities."""
        return ()

    def has_density(self) -> bool:
        return False

    # -- masses and moments --------------------------------------------------
    def total_mass(self) -> float:
        raise NotImplementedError

    def small_abs_moment(self) -> float:
        """integral_{|y|<=1} |y| nu(dy); inf for infinite variation."""
        raise NotImplementedError

    def mass_between(self, a: float, b: float) -> float:
        """nu((a, b)) for a < b, excluding any atom exactly at the endpoints."""
        raise NotImplementedError

    def mean_between(self, a: float, b: float) -> float:
        """integral_a^b y nu(dy)."""
        raise NotImplementedError

    def var_within(self, eps: float) -> float:
        """integral_{|y|<eps} y^2 nu(dy) (small-jump quadratic variation)."""
        raise NotImplementedError

    def unit_mean(self) -> float:
        """integral_{|y|<=1} y nu(dy); -inf/+inf when not absolutely convergent."""
        if not self.finite_variation:
            return -math.inf
        return self.mean_between(-1.0, 0.0) + self.mean_between(0.0, 1.0)

    def exp_pos_integral(self) -> float:
        """integral (e^y - 1)_+ nu(dy), finite for every admissible measure."""
        raise NotImplementedError

    def exp_neg_integral(self) -> float:
        """integral (e^y - 1)_- nu(dy); inf when downward jumps have
        infinite variation."""
        raise NotImplementedError

    def compensator_integral(self) -> float:
        """integral (e^y - 1 - y 1_{|y|<=1}) nu(dy)."""
        val = self.cf_term(np.array([-1j]))[0]
        return float(val.real)

    def exercise_integral(self, x: float, strike: float) -> float:
        """integral (x e^y - strike)_+ nu(dy) for 0 < x < strike."""
        raise NotImplementedError

    # -- characteristic function ---------------------------------------------
    def strip(self) -> Tuple[float, float]:
        """Open interval of admissible Im(z) for cf_term."""
        return (-math.inf, math.inf)

    def cf_term(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cf_term_smooth(self, z: np.ndarray) -> np.ndarray:
        """cf_term with bounded-oscillation atom terms dropped (tail
        asymptotics for Fourier quadrature); equals cf_term for densities."""
        return self.cf_term(z)

    def linear_phase_coefficient(self) -> float:
        """Linear-in-z part of cf_term beyond decaying/oscillating terms,
        i.e. c with cf_term(z) = izc + (sublinear or oscillation-bounded)."""
        raise NotImplementedError

    def phase_scale(self) -> float:
        """Characteristic oscillation frequency scale of cf_term in Re z."""
        raise NotImplementedError

    # -- truncation helpers ---------------------------------------------------
    def pos_exp_tail(self, y_cut: float) -> float:
        """integral_{y > y_cut} e^y nu(dy)."""
        raise NotImplementedError

    def support_bounds(self) -> Tuple[float, float]:
        """(lowest, highest) jump sizes carrying mass (may be +-inf)."""
        raise NotImplementedError

    # -- sampling --------------------------------------------------------------
    def resolved_intensity(self, eps: float) -> float:
        return self.mass_between(-math.inf, -eps) + self.mass_between(eps, math.inf)

    def sample_sizes(self, rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
        """n i.i.d. jump sizes from nu conditioned on |y| >= eps."""
        raise NotImplementedError

    def density(self, y: np.ndarray) -> np.ndarray:
        """Levy density at y (absolutely continuous part only)."""
        raise ModelError("this measure has no absolutely continuous part")

    def density_support(self) -> Tuple[float, float]:
        """Support of the absolutely continuous part."""
        return self.support_bounds()

    def integrate_resolved(self, f: Callable[[float], float], eps: float) -> float:
        """integral_{|y| >= eps} f(y) nu(dy) by adaptive quadrature plus
        exact atom sums (relative tolerance 1e-10)."""
        total = 0.0
        for y, lam in self.atom_list():
            if abs(y) >= eps:
                total += lam * f(y)
        if self.has_density():
            lo, hi = self.density_support()
            for a, b in ((lo, -eps), (eps, hi)):
                if b <= a:
                    continue
                val, _ = integrate.quad(
                    lambda y: f(y) * float(self.density(np.asarray([y]))[0]),
                    a,
                    b,
                    epsrel=1e-10,
                    epsabs=1e-14,
                    limit=500,
                )
                total += val
        return total


class NoJumps(JumpMeasure):
    """Empty jump measure (pure diffusion)."""

    def total_mass(self) -> float:
        return 0.0

    def small_abs_moment(self) -> float:
        return 0.0

    def mass_between(self, a, b) -> float:
        return 0.0

    def mean_between(self, a, b) -> float:
        return 0.0

    def var_within(self, eps) -> float:
        return 0.0

    def exp_pos_integral(self) -> float:
        return 0.0

    def exp_neg_integral(self) -> float:
        return 0.0

    def exercise_integral(self, x, strike) -> float:
        return 0.0

    def cf_term(self, z):
        return np.zeros_like(np.asarray(z, dtype=np.complex128))

    def linear_phase_coefficient(self) -> float:
        return 0.0

    def phase_scale(self) -> float:
        return 0.0

    def pos_exp_tail(self, y_cut) -> float:
        return 0.0

    def support_bounds(self):
        return (0.0, 0.0)

    def sample_sizes(self, rng, n, eps):
        if n:
            raise ModelError("no jumps to sample")
        return np.empty(0)


class CompoundPoisson(JumpMeasure):
    """Finite-activity atomic measure: nu = sum_j lam_j delta_{y_j}."""

    def __init__(self, atoms: Sequence[Tuple[float, float]]):
        pairs = []
        for y, lam in atoms:
            y, lam = float(y), float(lam)
            if not np.isfinite(y) or y == 0.0:
                raise ModelError("atom locations must be finite and nonzero")
            if not (lam > 0.0 and np.isfinite(lam)):
                raise ModelError("atom intensities must be positive and finite")
            pairs.append((y, lam))
        if not pairs:
            raise ModelError("need at least one atom (use NoJumps otherwise)")
        pairs.sort()
        self._y = np.array([p[0] for p in pairs])
        self._lam = np.array([p[1] for p in pairs])

    def atom_list(self):
        return tuple((float(y), float(l)) for y, l in zip(self._y, self._lam))

    def total_mass(self) -> float:
        return float(self._lam.sum())

    def small_abs_moment(self) -> float:
        m = np.abs(self._y) <= 1.0
        return float((np.abs(self._y[m]) * self._lam[m]).sum())

    def mass_between(self, a, b) -> float:
        m = (self._y > a) & (self._y < b)
        return float(self._lam[m].sum())

    def mean_between(self, a, b) -> float:
        m = (self._y > a) & (self._y < b)
        return float((self._y[m] * self._lam[m]).sum())

    def var_within(self, eps) -> float:
        m = np.abs(self._y) < eps
        return float((self._y[m] ** 2 * self._lam[m]).sum())

    def exp_pos_integral(self) -> float:
        v = np.expm1(self._y)
        return float((self._lam * np.clip(v, 0.0, None)).sum())

    def exp_neg_integral(self) -> float:
        v = np.expm1(self._y)
        return float((self._lam * np.clip(-v, 0.0, None)).sum())

    def exercise_integral(self, x, strike) -> float:
        v = np.clip(x * np.exp(self._y) - strike, 0.0, None)
        return float((self._lam * v).sum())

    def cf_term(self, z):
        z = np.asarray(z, dtype=np.complex128)
        zz = z[..., None]
        comp = np.where(np.abs(self._y) <= 1.0, self._y, 0.0)
        t = np.exp(1j * zz * self._y) - 1.0 - 1j * zz * comp
        return (t * self._lam).sum(axis=-1)

    def cf_term_smooth(self, z):
        z = np.asarray(z, dtype=np.complex128)
        comp = float((np.where(np.abs(self._y) <= 1.0, self._y, 0.0) * self._lam).sum())
        return -self.total_mass() - 1j * z * comp

    def linear_phase_coefficient(self) -> float:
        comp = np.where(np.abs(self._y) <= 1.0, self._y, 0.0)
        return -float((comp * self._lam).sum())

    def phase_scale(self) -> float:
        return float(np.abs(self._y).max())

    def pos_exp_tail(self, y_cut) -> float:
        m = self._y > y_cut
        return float((np.exp(self._y[m]) * self._lam[m]).sum())

    def support_bounds(self):
        return (float(self._y.min()), float(self._y.max()))

    def sample_sizes(self, rng, n, eps):
        m = np.abs(self._y) >= eps
        if not m.any():
            raise ModelError("no atoms at or above the resolution cutoff")
        y, lam = self._y[m], self._lam[m]
        p = lam / lam.sum()
        return y[rng.choice(len(y), size=n, p=p)]


class DoubleExponential(JumpMeasure):
    """Finite-activity double-exponential (asymmetric) jump density

        nu(dy) = lam [ p a_plus e^{-a_plus y} 1_{y>0}
                       + (1-p) a_minus e^{a_minus y} 1_{y<0} ] dy,

    with a_plus > 1 so the exponential moment exists.
    """

    def __init__(self, lam: float, p_up: float, alpha_plus: float, alpha_minus: float):
        self.lam = float(lam)
        self.p = float(p_up)
        self.ap = float(alpha_plus)
        self.am = float(alpha_minus)
        if not (self.lam > 0):
            raise ModelError("intensity must be positive")
        if not (0.0 <= self.p <= 1.0):
            raise ModelError("upward probability must lie in [0, 1]")
        if not (self.ap > 1.0):
            raise ModelError("alpha_plus must exceed 1 (exponential moment)")
        if not (self.am > 0.0):
            raise ModelError("alpha_minus must be positive")

    def has_density(self) -> bool:
        return True

    def total_mass(self) -> float:
        return self.lam

    def small_abs_moment(self) -> float:
        pos = self.p * ((1 - math.exp(-self.ap)) / self.ap - math.exp(-self.ap))
        # by symmetry of the truncated exponential mean
        neg = (1 - self.p) * ((1 - math.exp(-self.am)) / self.am - math.exp(-self.am))
        return self.lam * (pos + neg)

    def mass_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, 0.0), b
        if hi > lo:
            total += self.lam * self.p * (math.exp(-self.ap * lo) - (0.0 if hi == math.inf else math.exp(-self.ap * hi)))
        lo, hi = a, min(b, 0.0)
        if hi > lo:
            lo_m = -hi, -lo
            total += self.lam * (1 - self.p) * (math.exp(-self.am * lo_m[0]) - (0.0 if lo_m[1] == math.inf else math.exp(-self.am * lo_m[1])))
        return total

    def _mean_pos(self, lo, hi):
        # integral_lo^hi y a e^{-a y} dy
        a = self.ap

        def prim(y):
            if y == math.inf:
                return 0.0
            return -(y + 1.0 / a) * math.exp(-a * y)

        return prim(hi) - prim(lo)

    def mean_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, 0.0), b
        if hi > lo:
            total += self.lam * self.p * self._mean_pos(lo, hi)
        lo, hi = a, min(b, 0.0)
        if hi > lo:
            am = self.am

            def prim(y):  # integral of y a e^{a y}
                return (y - 1.0 / am) * math.exp(am * y)

            total += self.lam * (1 - self.p) * (prim(hi) - prim(-math.inf if lo == -math.inf else lo))
        return total

    def var_within(self, eps) -> float:
        def second(a, e):
            # integral_0^e y^2 a e^{-a y} dy
            return 2.0 / a**2 - math.exp(-a * e) * (e * e + 2 * e / a + 2.0 / a**2)

        return self.lam * (self.p * second(self.ap, eps) + (1 - self.p) * second(self.am, eps))

    def exp_pos_integral(self) -> float:
        return self.lam * self.p / (self.ap - 1.0)

    def exp_neg_integral(self) -> float:
        return self.lam * (1 - self.p) / (self.am + 1.0)

    def exercise_integral(self, x, strike) -> float:
        if x <= 0:
            return 0.0
        y0 = max(0.0, math.log(strike / x))
        a = self.ap
        # integral_{y0}^inf (x e^y - strike) a e^{-a y} dy
        val = x * a / (a - 1.0) * math.exp((1.0 - a) * y0) - strike * math.exp(-a * y0)
        return self.lam * self.p * val

    def strip(self):
        return (-self.ap, self.am)

    def _check_strip(self, z):
        v = np.imag(z)
        if np.any(v <= -self.ap) or np.any(v >= self.am):
            raise DomainError("Im(z) outside (-alpha_plus, alpha_minus)")

    def cf_term(self, z):
        z = np.asarray(z, dtype=np.complex128)
        self._check_strip(z)
        jump_cf = self.p * self.ap / (self.ap - 1j * z) + (1 - self.p) * self.am / (self.am + 1j * z)
        return self.lam * (jump_cf - 1.0) - 1j * z * self.unit_mean()

    def linear_phase_coefficient(self) -> float:
        return -self.unit_mean()

    def phase_scale(self) -> float:
        return 3.0 / min(self.ap, self.am)

    def pos_exp_tail(self, y_cut) -> float:
        y0 = max(y_cut, 0.0)
        return self.lam * self.p * self.ap / (self.ap - 1.0) * math.exp((1.0 - self.ap) * y0)

    def support_bounds(self):
        return (-math.inf, math.inf)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        pos = self.lam * self.p * self.ap * np.exp(-self.ap * np.clip(y, 0.0, None))
        neg = self.lam * (1 - self.p) * self.am * np.exp(self.am * np.clip(y, None, 0.0))
        return np.where(y > 0, pos, np.where(y < 0, neg, 0.0))

    def sample_sizes(self, rng, n, eps):
        w_pos = self.p * math.exp(-self.ap * eps)
        w_neg = (1 - self.p) * math.exp(-self.am * eps)
        up = rng.random(n) < w_pos / (w_pos + w_neg)
        out = np.empty(n)
        n_up = int(up.sum())
        out[up] = eps + rng.exponential(1.0 / self.ap, size=n_up)
        out[~up] = -(eps + rng.exponential(1.0 / self.am, size=n - n_up))
        return out


class TemperedStableNegative(JumpMeasure):
    """One-sided stable-like density on (a0, 0),

        nu(dy) = eta(y) / |y|^{1+alpha} dy,   a0 < y < 0,

    with eta bounded, eta(0-) = eta0 > 0 (default: constant eta0), plus an
    optional finite list of positive atoms.  alpha in (0, 2), alpha != 1.
    """

    def __init__(
        self,
        alpha: float,
        eta0: float = 1.0,
        a0: float = -1.0,
        eta: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        eta_sup: Optional[Callable[[float, float], float]] = None,
        positive_atoms: Sequence[Tuple[float, float]] = (),
    ):
        self.alpha = float(alpha)
        self.eta0 = float(eta0)
        self.a0 = float(a0)
        if not (0.0 < self.alpha < 2.0):
            raise ModelError("alpha must lie in (0, 2)")
        if self.alpha == 1.0:
            raise ModelError("alpha = 1 is not supported (log-degenerate case)")
        if not (self.eta0 > 0.0):
            raise ModelError("eta0 must be positive")
        if not (self.a0 < 0.0 and np.isfinite(self.a0)):
            raise ModelError("a0 must be a finite negative cutoff")
        self.eta_fn = eta
        self.eta_sup_fn = eta_sup
        if eta is not None and eta_sup is None:
            raise ModelError("a custom eta must declare eta_sup(a, b) for envelopes")
        atoms = []
        for y, lam in positive_atoms:
            y, lam = float(y), float(lam)
            if not (y > 0.0 and np.isfinite(y) and lam > 0.0):
                raise ModelError("positive atoms need y > 0 and intensity > 0")
            atoms.append((y, lam))
        self._pos = CompoundPoisson(atoms) if atoms else None

    # eta evaluated at negative arguments, vectorized
    def _eta(self, y: np.ndarray) -> np.ndarray:
        if self.eta_fn is None:
            return np.full_like(np.asarray(y, dtype=float), self.eta0)
        return np.asarray(self.eta_fn(y), dtype=float)

    def _eta_sup(self, a: float, b: float) -> float:
        if self.eta_fn is None:
            return self.eta0
        return float(self.eta_sup_fn(a, b))

    @property
    def _A(self) -> float:
        return abs(self.a0)

    def has_density(self) -> bool:
        return True

    def atom_list(self):
        return self._pos.atom_list() if self._pos else ()

    def _neg_quad(self, f_scaled: Callable[[np.ndarray], np.ndarray], m: float, lo: float, hi: float, n: int = 600) -> float:
        """integral_lo^hi f(y) eta(y)/|y|^{1+alpha} dy on (a0, 0) where
        f(y) = f_scaled(y) |y|^m with f_scaled bounded near zero.

        When the interval touches zero, the substitution |y| = w^p with
        p = 2/(m - alpha) makes the transformed integrand vanish linearly at
        the endpoint; powers are folded analytically so no intermediate
        blows up even for p large.
        """
        lo, hi = max(lo, self.a0), min(hi, 0.0)
        if hi <= lo:
            return 0.0
        al = self.alpha
        if hi >= -1e-300:
            if m <= al:
                return math.inf
            p = max(1.0, 2.0 / (m - al))
            w, wt = _gl_nodes(0.0, (-lo) ** (1.0 / p), n)
            u = w**p
            y = -u
            vals = f_scaled(y) * self._eta(y) * p * w ** (p * (m - al) - 1.0)
            return float((vals * wt).sum())
        y, wt = _gl_nodes(lo, hi, n)
        vals = f_scaled(y) * self._eta(y) * np.abs(y) ** (m - 1.0 - al)
        return float((vals * wt).sum())

    def total_mass(self) -> float:
        return math.inf

    def small_abs_moment(self) -> float:
        if self.alpha >= 1.0:
            return math.inf
        lo = max(self.a0, -1.0)
        if self.eta_fn is None:
            base = self.eta0 * (-lo) ** (1.0 - self.alpha) / (1.0 - self.alpha)
        else:
            base = self._neg_quad(lambda y: np.ones_like(y), 1.0, lo, 0.0)
        extra = 0.0
        if self._pos:
            extra = self._pos.small_abs_moment()
        return base + extra

    def mass_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, self.a0), min(b, 0.0)
        if hi > lo:
            if hi >= 0.0:
                return math.inf
            if self.eta_fn is None:
                al = self.alpha
                total += self.eta0 * ((-hi) ** (-al) - (-lo) ** (-al)) / al
            else:
                total += self._neg_quad(lambda y: np.ones_like(y), 0.0, lo, hi)
        if self._pos:
            total += self._pos.mass_between(a, b)
        return total

    def mean_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, self.a0), min(b, 0.0)
        if hi > lo:
            if hi >= 0.0 and self.alpha >= 1.0:
                return -math.inf
            if self.eta_fn is None:
                al = self.alpha
                if hi >= 0.0:
                    total += -self.eta0 * (-lo) ** (1.0 - al) / (1.0 - al)
                else:
                    total += -self.eta0 * ((-lo) ** (1.0 - al) - (-hi) ** (1.0 - al)) / (1.0 - al)
            else:
                total += self._neg_quad(lambda y: -np.ones_like(y), 1.0, lo, hi)
        if self._pos:
            total += self._pos.mean_between(a, b)
        return total

    def var_within(self, eps) -> float:
        e = min(eps, self._A)
        al = self.alpha
        if self.eta_fn is None:
            total = self.eta0 * e ** (2.0 - al) / (2.0 - al)
        else:
            total = self._neg_quad(lambda y: np.ones_like(y), 2.0, -e, 0.0)
        if self._pos:
            total += self._pos.var_within(eps)
        return total

    def exp_pos_integral(self) -> float:
        return self._pos.exp_pos_integral() if self._pos else 0.0

    def exp_neg_integral(self) -> float:
        if self.alpha >= 1.0:
            return math.inf

        def scaled(y):
            # (1 - e^y)/|y|, bounded near zero
            return np.where(y < -1e-250, np.expm1(y) / y, 1.0)

        return self._neg_quad(scaled, 1.0, self.a0, 0.0)

    def exercise_integral(self, x, strike) -> float:
        return self._pos.exercise_integral(x, strike) if self._pos else 0.0

    # -- characteristic function ----------------------------------------------
    def _tail_integral(self, s: np.ndarray) -> np.ndarray:
        """T(s) = integral_A^inf e^{-su} u^{-1-alpha} du for Re s >= 0, s != 0.

        The ray is rotated to u = A + w conj(s)/|s| (Cauchy, integrand
        analytic and arc-decaying in Re u > 0), making e^{-su} a real decay
        e^{-|s| w}; truncating at |s| w = 45 leaves the integrand smooth and
        Gauss-Legendre polishes it off to near machine precision.
        """
        q, qw = _gl_nodes(0.0, 1.0, 160)
        decay = np.exp(-45.0 * q) * qw
        s = np.atleast_1d(s)
        out = np.empty(s.shape, dtype=np.complex128)
        A = self._A
        for i0 in range(0, s.size, 10000):
            sc = s[i0 : i0 + 10000]
            mag = np.abs(sc)
            rot = np.conj(sc) / mag
            span = 45.0 / mag
            nodes = A + np.outer(rot * span, q)
            vals = nodes ** (-1.0 - self.alpha)
            out[i0 : i0 + 10000] = np.exp(-sc * A) * rot * span * (vals * decay).sum(axis=1)
        return out

    def _core_numeric(self, s: np.ndarray, compensated: bool) -> np.ndarray:
        """Direct quadrature of integral_0^A (e^{-su} - 1 [+ su]) u^{-1-a} eta du
        (used off the closed-form branch; accurate for moderate |s|).

        The integrand behaves like u^m near zero (m = 2 compensated, 1 not),
        so it is evaluated in the scaled form f/u^m with the powers folded
        into the substitution u = w^p, p = 2/(m - alpha).
        """
        al = self.alpha
        m = 2.0 if compensated else 1.0
        p = max(1.0, 2.0 / (m - al))
        w, wt = _gl_nodes(0.0, self._A ** (1.0 / p), 2000)
        u = w**p
        base = self._eta(-u) * p * w ** (p * (m - al) - 1.0) * wt
        tiny = u < 1e-60
        u_safe = np.where(tiny, 1.0, u)
        s = np.atleast_1d(s)
        out = np.empty(s.shape, dtype=np.complex128)
        for i0 in range(0, s.size, 2000):
            sc = s[i0 : i0 + 2000, None]
            if compensated:
                f = np.where(tiny, 0.5 * sc * sc + 0j, _expm1m_c(-sc * u_safe) / (u_safe * u_safe))
            else:
                f = np.where(tiny, -sc + 0j, _expm1_c(-sc * u_safe) / u_safe)
            out[i0 : i0 + 2000] = (f * base).sum(axis=1)
        return out

    def cf_term(self, z):
        z = np.asarray(z, dtype=np.complex128)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        s = 1j * z  # e^{izy} = e^{-su} with u = -y
        al, A = self.alpha, self._A
        out = np.zeros(z.shape, dtype=np.complex128)
        nz = np.abs(s) > 0
        sn = s[nz]
        usable = np.real(sn) >= 0.0
        if self.eta_fn is None and usable.all():
            T = self._tail_integral(sn)
            if al > 1.0:
                ia = special.gamma(2.0 - al) / (al * (al - 1.0))
                core = self.eta0 * (
                    sn**al * ia
                    - sn * A ** (1.0 - al) / (al - 1.0)
                    + A ** (-al) / al
                    - T
                )
                # switch from full compensation on (a0,0) to the |y|<=1 cut
                if A > 1.0:
                    m_corr = self.mean_between(self.a0, -1.0)
                    core = core + 1j * z[nz] * m_corr
            else:
                core = self.eta0 * (
                    -(sn**al) * special.gamma(1.0 - al) / al - T + A ** (-al) / al
                )
                core = core - 1j * z[nz] * self.mean_between(max(self.a0, -1.0), 0.0)
            out[nz] = core
        else:
            if np.any(np.abs(z) > 1000.0):
                raise DomainError(
                    "characteristic exponent limited to |z| <= 1000 for custom eta "
                    "or Im(z) > 0 on the stable-like family"
                )
            comp = al > 1.0
            core = self._core_numeric(sn, compensated=comp)
            if comp:
                if A > 1.0:
                    core = core + 1j * z[nz] * self.mean_between(self.a0, -1.0)
            else:
                core = core - 1j * z[nz] * self.mean_between(max(self.a0, -1.0), 0.0)
            out[nz] = core
        if self._pos:
            out = out + self._pos.cf_term(z)
        return out[0] if scalar else out

    def cf_term_smooth(self, z):
        z = np.asarray(z, dtype=np.complex128)
        s = 1j * z
        al, A = self.alpha, self._A
        if self.eta_fn is not None:
            raise DomainError("smooth tail asymptotics need the constant-eta form")
        if al > 1.0:
            ia = special.gamma(2.0 - al) / (al * (al - 1.0))
            core = self.eta0 * (s**al * ia - s * A ** (1.0 - al) / (al - 1.0) + A ** (-al) / al)
            if A > 1.0:
                core = core + 1j * z * self.mean_between(self.a0, -1.0)
        else:
            core = self.eta0 * (-(s**al) * special.gamma(1.0 - al) / al + A ** (-al) / al)
            core = core - 1j * z * self.mean_between(max(self.a0, -1.0), 0.0)
        if self._pos:
            core = core + self._pos.cf_term_smooth(z)
        return core

    def linear_phase_coefficient(self) -> float:
        al, A = self.alpha, self._A
        if al > 1.0:
            c = -self.eta0 * A ** (1.0 - al) / (al - 1.0)
            if A > 1.0:
                c += self.mean_between(self.a0, -1.0)
        else:
            c = -self.mean_between(max(self.a0, -1.0), 0.0)
        if self._pos:
            c += self._pos.linear_phase_coefficient()
        return c

    def phase_scale(self) -> float:
        sc = self._A
        if self._pos:
            sc = max(sc, self._pos.phase_scale())
        return sc

    def pos_exp_tail(self, y_cut) -> float:
        return self._pos.pos_exp_tail(y_cut) if self._pos else 0.0

    def support_bounds(self):
        hi = max((y for y, _ in self.atom_list()), default=0.0)
        return (self.a0, hi)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y > self.a0) & (y < 0.0)
        ys = np.where(inside, y, -1.0)
        vals = self._eta(ys) * np.abs(ys) ** (-1.0 - self.alpha)
        return np.where(inside, vals, 0.0)

    def density_support(self):
        return (self.a0, 0.0)

    def sample_sizes(self, rng, n, eps):
        eps = min(eps, self._A)
        lam_neg = self.mass_between(-self._A, -eps)
        lam_pos = self._pos.resolved_intensity(eps) if self._pos else 0.0
        out = np.empty(n)
        neg = rng.random(n) < lam_neg / (lam_neg + lam_pos) if lam_pos else np.ones(n, bool)
        n_neg = int(neg.sum())
        if self.eta_fn is None:
            al = self.alpha
            u01 = rng.random(n_neg)
            lo, hi = eps ** (-al), self._A ** (-al)
            out[neg] = -((lo + u01 * (hi - lo)) ** (-1.0 / al))
        else:
            # rejection from the constant-envelope inverse-cdf proposal
            sup = self._eta_sup(self.a0, -eps)
            got = 0
            buf = np.empty(n_neg)
            al = self.alpha
            lo, hi = eps ** (-al), self._A ** (-al)
            while got < n_neg:
                m = max(1024, 2 * (n_neg - got))
                cand = -((lo + rng.random(m) * (hi - lo)) ** (-1.0 / al))
                acc = rng.random(m) * sup <= self._eta(cand)
                take = cand[acc][: n_neg - got]
                buf[got : got + take.size] = take
                got += take.size
            out[neg] = buf
        if lam_pos:
            out[~neg] = self._pos.sample_sizes(rng, n - n_neg, eps)
        return out


class GammaLike(JumpMeasure):
    """Two-sided finite-variation, infinite-activity density

        nu(dy) = c_neg e^{-g |y|} / |y| 1_{y<0} + c_pos e^{-m y} / y 1_{y>0},

    with m > 1 so the exponential moment exists.
    """

    def __init__(self, c_neg: float, g: float, c_pos: float, m: float):
        self.cn, self.g = float(c_neg), float(g)
        self.cp, self.m = float(c_pos), float(m)
        if self.cn < 0 or self.cp < 0 or self.cn + self.cp == 0:
            raise ModelError("need nonnegative c_neg/c_pos, not both zero")
        if self.cn > 0 and not (self.g > 0):
            raise ModelError("g must be positive")
        if self.cp > 0 and not (self.m > 1.0):
            raise ModelError("m must exceed 1 (exponential moment)")

    def has_density(self) -> bool:
        return True

    def total_mass(self) -> float:
        return math.inf

    def small_abs_moment(self) -> float:
        pos = self.cp * (1.0 - math.exp(-self.m)) / self.m if self.cp else 0.0
        neg = self.cn * (1.0 - math.exp(-self.g)) / self.g if self.cn else 0.0
        return pos + neg

    @staticmethod
    def _e1_diff(scale: float, lo: float, hi: float) -> float:
        # integral_lo^hi e^{-scale u} / u du, 0 < lo < hi <= inf
        hi_term = 0.0 if hi == math.inf else special.exp1(scale * hi)
        return float(special.exp1(scale * lo) - hi_term)

    def mass_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, 0.0), b
        if hi > lo and self.cp:
            if lo <= 0.0:
                return math.inf
            total += self.cp * self._e1_diff(self.m, lo, hi)
        lo, hi = a, min(b, 0.0)
        if hi > lo and self.cn:
            if hi >= 0.0:
                return math.inf
            total += self.cn * self._e1_diff(self.g, -hi, math.inf if lo == -math.inf else -lo)
        return total

    def mean_between(self, a, b) -> float:
        total = 0.0
        lo, hi = max(a, 0.0), b
        if hi > lo and self.cp:
            hi_t = 0.0 if hi == math.inf else math.exp(-self.m * hi)
            total += self.cp * (math.exp(-self.m * lo) - hi_t) / self.m
        lo, hi = a, min(b, 0.0)
        if hi > lo and self.cn:
            lo_t = 0.0 if lo == -math.inf else math.exp(self.g * lo)
            total -= self.cn * (math.exp(self.g * hi) - lo_t) / self.g
        return total

    def var_within(self, eps) -> float:
        def part(c, a):
            if not c:
                return 0.0
            return c * (1.0 - math.exp(-a * eps) * (1.0 + a * eps)) / a**2

        return part(self.cp, self.m) + part(self.cn, self.g)

    def exp_pos_integral(self) -> float:
        if not self.cp:
            return 0.0
        return self.cp * math.log(self.m / (self.m - 1.0))

    def exp_neg_integral(self) -> float:
        if not self.cn:
            return 0.0
        return self.cn * math.log((self.g + 1.0) / self.g)

    def exercise_integral(self, x, strike) -> float:
        if not self.cp or x <= 0:
            return 0.0
        y0 = max(0.0, math.log(strike / x))
        if y0 == 0.0:
            return math.inf
        # integral_{y0}^inf (x e^y - strike) c e^{-m y} / y dy
        return self.cp * (x * self._e1_diff(self.m - 1.0, y0, math.inf) - strike * self._e1_diff(self.m, y0, math.inf))

    def strip(self):
        return (-self.m, self.g)

    def cf_term(self, z):
        z = np.asarray(z, dtype=np.complex128)
        v = np.imag(z)
        if np.any(v <= -self.m) or np.any(v >= self.g):
            raise DomainError("Im(z) outside (-m, g)")
        out = np.zeros(z.shape, dtype=np.complex128)
        if self.cn:
            out = out - self.cn * np.log1p(1j * z / self.g)
        if self.cp:
            out = out - self.cp * np.log1p(-1j * z / self.m)
        return out - 1j * z * self.unit_mean()

    def linear_phase_coefficient(self) -> float:
        return -self.unit_mean()

    def phase_scale(self) -> float:
        scales = []
        if self.cn:
            scales.append(3.0 / self.g)
        if self.cp:
            scales.append(3.0 / self.m)
        return max(scales) + 1.0

    def pos_exp_tail(self, y_cut) -> float:
        if not self.cp:
            return 0.0
        y0 = max(y_cut, 1e-12)
        return self.cp * self._e1_diff(self.m - 1.0, y0, math.inf)

    def support_bounds(self):
        return (-math.inf if self.cn else 0.0, math.inf if self.cp else 0.0)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        ay = np.abs(np.where(y == 0.0, 1.0, y))
        pos = self.cp * np.exp(-self.m * ay) / ay
        neg = self.cn * np.exp(-self.g * ay) / ay
        return np.where(y > 0, pos, np.where(y < 0, neg, 0.0))

    def sample_sizes(self, rng, n, eps):
        lam_pos = self.cp * self._e1_diff(self.m, eps, math.inf) if self.cp else 0.0
        lam_neg = self.cn * self._e1_diff(self.g, eps, math.inf) if self.cn else 0.0
        pos = rng.random(n) < lam_pos / (lam_pos + lam_neg)
        out = np.empty(n)
        out[pos] = self._sample_side(rng, int(pos.sum()), eps, self.m)
        out[~pos] = -self._sample_side(rng, n - int(pos.sum()), eps, self.g)
        return out

    @staticmethod
    def _sample_side(rng, n, eps, rate):
        """Sample density prop. to e^{-rate u}/u on (eps, inf) by a two-piece
        envelope: log-uniform on (eps, c) and shifted exponential beyond."""
        if n == 0:
            return np.empty(0)
        c = max(1.0 / rate, 2.0 * eps)
        w1 = math.log(c / eps)            # envelope mass of 1/u on (eps, c)
        w2 = math.exp(-rate * c) / (rate * c)  # envelope mass of e^{-ru}/c on (c, inf)
        out = np.empty(n)
        got = 0
        while got < n:
            m = max(2048, 2 * (n - got))
            pick1 = rng.random(m) < w1 / (w1 + w2)
            cand = np.empty(m)
            n1 = int(pick1.sum())
            cand[pick1] = eps * (c / eps) ** rng.random(n1)
            cand[~pick1] = c + rng.exponential(1.0 / rate, size=m - n1)
            acc_p = np.where(pick1, np.exp(-rate * cand), c / cand)
            acc = rng.random(m) < acc_p
            take = cand[acc][: n - got]
            out[got : got + take.size] = take
            got += take.size
        return out


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------


class LevyType(Enum):
    """Path-regularity classes: A finite activity, B infinite activity with
    finite variation, C diffusion part or infinite variation."""

    A = "A"
    B = "B"
    C = "C"


@dataclass(frozen=True)
class LevyModel:
    """Market parameters plus the Levy triplet (sigma^2, gamma, nu); gamma is
    derived from the martingale condition, never user-set."""

    market: MarketParams
    sigma: float
    nu: JumpMeasure
    gamma: float = field(default=0.0)

    @property
    def strike(self) -> float:
        return self.market.strike


def make_model(market: MarketParams, sigma: float, nu: Optional[JumpMeasure] = None) -> LevyModel:
    """Build a martingale exponential-Levy model.

    Rejects parameter sets without the exponential moment (enforced by the
    measure families), and degenerate sets where the put could be worthless
    to hold: sigma = 0 with no downward jumps and a finite-variation
    positive part.
    """
    nu = nu if nu is not None else NoJumps()
    sigma = float(sigma)
    if not (sigma >= 0.0 and np.isfinite(sigma)):
        raise ModelError("sigma must be finite and >= 0")
    neg_mass = nu.mass_between(-math.inf, 0.0)
    if sigma == 0.0 and neg_mass == 0.0:
        if nu.total_mass() == 0.0:
            raise ModelError("degenerate model: no diffusion and no jumps")
        pos_small = nu.mean_between(0.0, 1.0)
        if np.isfinite(pos_small):
            raise ModelError(
                "degenerate model: sigma = 0, no downward jumps and a "
                "finite-variation upward part"
            )
    gamma = -0.5 * sigma * sigma - nu.compensator_integral()
    return LevyModel(market=market, sigma=sigma, nu=nu, gamma=float(gamma))


def characteristic_exponent(model: LevyModel, z) -> np.ndarray:
    """Levy exponent phi with E[e^{izX_t}] = e^{t phi(z)}; accepts complex z
    inside the measure's analyticity strip (DomainError outside)."""
    z_arr = np.asarray(z, dtype=np.complex128)
    lo, hi = model.nu.strip()
    v = np.imag(z_arr)
    if np.any(v <= lo) or np.any(v >= hi):
        raise DomainError(f"Im(z) must lie in ({lo}, {hi})")
    out = (
        -0.5 * model.sigma**2 * z_arr * z_arr
        + 1j * model.gamma * z_arr
        + model.nu.cf_term(z_arr)
    )
    return out


def martingale_residual(model: LevyModel) -> float:
    """|phi(-i)|: zero iff e^{X} has unit mean (discounted martingale)."""
    return float(abs(characteristic_exponent(model, -1j)))


def classify(model: LevyModel) -> LevyType:
    """Type A: sigma=0, finite activity; B: sigma=0, infinite activity with
    finite variation; C: everything else (diffusion part or infinite
    variation)."""
    if model.sigma > 0.0:
        return LevyType.C
    if model.nu.finite_activity:
        return LevyType.A
    if model.nu.finite_variation:
        return LevyType.B
    return LevyType.C


def d_plus(model: LevyModel) -> float:
    """d_+ = r - delta - integral (e^y - 1)_+ nu(dy); its sign separates the
    boundary limit K (>= 0) from the sub-strike limit (< 0)."""
    mk = model.market
    return mk.r - mk.delta - model.nu.exp_pos_integral()


def phi0(model: LevyModel, x) -> np.ndarray:
    """phi0(x) = delta x + integral (x e^y - K)_+ nu(dy) for x in (0, K);
    the equation phi0(xi) = r K pins the sub-strike boundary limit."""
    mk = model.market
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([mk.delta * xv + model.nu.exercise_integral(xv, mk.strike) for xv in x_arr])
    return out if np.ndim(x) else float(out[0])


def limit_critical_price(model: LevyModel) -> float:
    """Limit of the exercise boundary at maturity: K when d_+ >= 0, else the
    root of phi0(xi) = r K in (0, K)."""
    mk = model.market
    if d_plus(model) >= 0.0:
        return mk.strike
    if mk.r <= 0.0:
        raise ModelError("sub-strike boundary limit needs r > 0")
    target = mk.r * mk.strike
    hi = mk.strike * (1.0 - 1e-12)
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if phi0(model, lo) < target:
            break
    else:
        raise ModelError("failed to bracket the boundary limit")
    return float(brentq(lambda v: phi0(model, v) - target, lo, hi, xtol=1e-12 * mk.strike, rtol=1e-14))


@dataclass(frozen=True)
class ExpMoments:
    """integral (e^y - 1)_+ nu(dy) and integral (e^y - 1)_- nu(dy); the
    negative side is inf for measures whose downward jumps have infinite
    variation."""

    pos: float
    neg: float


def exp_moment_integrals(model: LevyModel) -> ExpMoments:
    return ExpMoments(pos=model.nu.exp_pos_integral(), neg=model.nu.exp_neg_integral())


def fv_drift(model: LevyModel) -> float:
    """gamma0 = gamma - integral_{|y|<=1} y nu(dy), the natural drift of a
    finite-variation process (equals -integral (e^y - 1) nu(dy) under the
    martingale condition); raises for infinite variation."""
    if not model.nu.finite_variation:
        raise ModelError("gamma0 requires a finite-variation jump part")
    return model.gamma - model.nu.unit_mean()


def linear_phase_gamma(model: LevyModel) -> float:
    """Coefficient c such that phi(z) - izc has sublinear or pure-oscillation
    phase growth; used to fold the linear Fourier phase into the log-moneyness."""
    return model.gamma + model.nu.linear_phase_coefficient()
