"""Monte Carlo sampling of Levy increments and small-time law checks.

Jumps below the resolution cutoff epsilon are replaced by an independent
Gaussian with the matching variance t * integral_{|y|<eps} y^2 nu(dy); the
replacement keeps the martingale property to the cubic small-jump moment.
Sampling is chunked with independently spawned substreams so results for a
given (seed, n) never depend on how work is batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .models import (
    DomainError,
    LevyModel,
    ModelError,
    TemperedStableNegative,
    _expm1m_c,
    _gl_nodes,
)

_CHUNK = 1 << 20


@dataclass(frozen=True)
class CheckReport:
    """One simulation check at one horizon: estimate vs analytic target."""

    name: str
    t: float
    estimate: float
    stderr: float
    target: float

    @property
    def zscore(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if abs(self.estimate - self.target) < 1e-12 * max(1.0, abs(self.target)) else math.inf
        return (self.estimate - self.target) / self.stderr


class IncrementSampler:
    """Draws X_t for a fixed model: drift + diffusion + Gaussian small-jump
    proxy + compound-Poisson jumps above the cutoff."""

    def __init__(
        self,
        model: LevyModel,
        epsilon: float = 1e-3,
        chunk: int = _CHUNK,
        proxy_cap: float = 0.5,
    ):
        if not (epsilon > 0.0):
            raise ModelError("epsilon must be positive")
        self.model = model
        self.epsilon = float(epsilon)
        self.chunk = int(chunk)
        nu = model.nu
        self.sigma_eps = math.sqrt(nu.var_within(self.epsilon))
        total_qv = model.sigma**2 + nu.var_within(50.0)
        if self.sigma_eps**2 > proxy_cap * total_qv and self.sigma_eps > 0.0:
            raise DomainError(
                "small-jump proxy variance %.3g exceeds %.0f%% of the total "
                "quadratic variation %.3g; lower epsilon" % (self.sigma_eps**2, 100 * proxy_cap, total_qv)
            )
        self.lam_eps = nu.resolved_intensity(self.epsilon)
        resolved_unit = nu.mean_between(-1.0, -self.epsilon) + nu.mean_between(self.epsilon, 1.0)
        self.gamma_eff = model.gamma - resolved_unit
        self._resolved_unit = resolved_unit

    def _rngs(self, n: int, seed) -> List[Tuple[int, np.random.Generator]]:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        n_chunks = max(1, math.ceil(n / self.chunk))
        children = ss.spawn(n_chunks)
        out = []
        start = 0
        for child in children:
            size = min(self.chunk, n - start)
            out.append((size, np.random.Generator(np.random.PCG64(child))))
            start += size
        return out

    def sample(self, t: float, n: int, seed=0, return_jumps: bool = False):
        """n draws of X_t; with return_jumps also the resolved jump sizes and
        their path indices (for path-functional checks)."""
        if not (t > 0.0):
            raise ModelError("t must be positive")
        xs = np.empty(n)
        all_sizes: List[np.ndarray] = []
        all_idx: List[np.ndarray] = []
        start = 0
        sig_d = self.model.sigma * math.sqrt(t)
        sig_e = self.sigma_eps * math.sqrt(t)
        for size, rng in self._rngs(n, seed):
            counts = rng.poisson(self.lam_eps * t, size) if self.lam_eps > 0 else np.zeros(size, dtype=int)
            total = int(counts.sum())
            jumps = self.model.nu.sample_sizes(rng, total, self.epsilon) if total else np.empty(0)
            path_of = np.repeat(np.arange(size), counts)
            jsum = np.zeros(size)
            np.add.at(jsum, path_of, jumps)
            x = self.gamma_eff * t + jsum
            if sig_d > 0.0:
                x = x + sig_d * rng.standard_normal(size)
            if sig_e > 0.0:
                x = x + sig_e * rng.standard_normal(size)
            xs[start : start + size] = x
            if return_jumps:
                all_sizes.append(jumps)
                all_idx.append(path_of + start)
            start += size
        if return_jumps:
            sizes = np.concatenate(all_sizes) if all_sizes else np.empty(0)
            idx = np.concatenate(all_idx) if all_idx else np.empty(0, dtype=int)
            return xs, sizes, idx
        return xs

    def sample_compensated_jump_part(self, t: float, n: int, seed=0) -> np.ndarray:
        """Y_t: the jump martingale part of X (resolved jumps minus their
        unit-ball compensator, plus the Gaussian small-jump proxy).  The
        Brownian component is simply never drawn, so any sigma is allowed."""
        if not (t > 0.0):
            raise ModelError("t must be positive")
        ys = np.empty(n)
        sig_e = self.sigma_eps * math.sqrt(t)
        start = 0
        for size, rng in self._rngs(n, seed):
            counts = rng.poisson(self.lam_eps * t, size) if self.lam_eps > 0 else np.zeros(size, dtype=int)
            total = int(counts.sum())
            jumps = self.model.nu.sample_sizes(rng, total, self.epsilon) if total else np.empty(0)
            jsum = np.zeros(size)
            np.add.at(jsum, np.repeat(np.arange(size), counts), jumps)
            y = jsum - self._resolved_unit * t
            if sig_e > 0.0:
                y = y + sig_e * rng.standard_normal(size)
            ys[start : start + size] = y
            start += size
        return ys


def budget_epsilon(model: LevyModel, t: float, epsilon: float = 1e-3, budget: float = 50.0) -> float:
    """Widen the small-jump cutoff until the expected resolved-jump count per
    path over horizon t stays below the budget; the dropped jumps fold into
    the Gaussian proxy (second moments match, so the law is preserved at
    Monte Carlo resolution)."""
    eps = float(epsilon)
    while model.nu.resolved_intensity(eps) * t > budget and eps < 0.3:
        eps *= 2.0
    return eps


def sample_terminal(model: LevyModel, t: float, n: int, seed=0, epsilon: float = 1e-3) -> np.ndarray:
    """Convenience wrapper: n draws of X_t (cutoff widened per the jump
    budget when the requested one would resolve too many jumps)."""
    return IncrementSampler(model, epsilon=budget_epsilon(model, t, epsilon)).sample(t, n, seed)


def compensation_check(
    model: LevyModel,
    f: Callable[[float], float],
    t: float,
    n: int = 200_000,
    seed=0,
    epsilon: float = 1e-3,
) -> CheckReport:
    """Compare the sample mean of sum_{s<=t} f(Delta X_s) over resolved jumps
    with its compensator t integral_{|y|>=eps} f(y) nu(dy)."""
    sampler = IncrementSampler(model, epsilon=epsilon)
    _, sizes, idx = sampler.sample(t, n, seed, return_jumps=True)
    per_path = np.zeros(n)
    if sizes.size:
        try:
            fv = np.asarray(f(sizes), dtype=float)
            if fv.shape != sizes.shape:
                raise ValueError
        except (TypeError, ValueError):
            fv = np.asarray([f(v) for v in sizes], dtype=float)
        np.add.at(per_path, idx, fv)
    target = t * model.nu.integrate_resolved(f, epsilon)
    est = float(per_path.mean())
    se = float(per_path.std(ddof=1) / math.sqrt(n))
    return CheckReport(name="compensation", t=t, estimate=est, stderr=se, target=target)


def martingale_check(model: LevyModel, t: float, n: int = 400_000, seed=0, epsilon: float = 1e-3) -> CheckReport:
    """E[e^{X_t}] should be 1 under the derived drift."""
    x = sample_terminal(model, t, n, seed, epsilon)
    ex = np.exp(x)
    est = float(ex.mean())
    se = float(ex.std(ddof=1) / math.sqrt(n))
    return CheckReport(name="martingale", t=t, estimate=est, stderr=se, target=1.0)


def _median_report(name: str, t: float, vals: np.ndarray, target: float) -> CheckReport:
    vals = np.sort(vals)
    n = vals.size
    med = float(np.median(vals))
    half = int(math.ceil(1.96 * math.sqrt(n) / 2.0))
    lo = vals[max(n // 2 - half, 0)]
    hi = vals[min(n // 2 + half, n - 1)]
    se = float((hi - lo) / 3.92)
    return CheckReport(name=name, t=t, estimate=med, stderr=se, target=target)


def small_time_drift_check(
    model: LevyModel,
    t_ladder: Sequence[float],
    n: int = 100_000,
    seed=0,
    epsilon: float = 1e-3,
) -> List[CheckReport]:
    """Mean and median of Y_t / t per rung, with Y the compensated jump
    martingale part of X.  The almost-sure small-time limit of Y_t / t is
    -integral_{|x|<=1} x nu(dx); the mean is identically 0 (martingale), so
    the median carries the law.  Each rung yields a mean report (target 0)
    and a median report (target the limit).  Requires finite variation; a
    Brownian component is fine because Y excludes it by construction."""
    if not model.nu.finite_variation:
        raise ModelError("the drift law needs a finite-variation jump part")
    target = -model.nu.unit_mean()
    sampler = IncrementSampler(model, epsilon=epsilon)
    out = []
    for k, t in enumerate(t_ladder):
        t = float(t)
        y = sampler.sample_compensated_jump_part(t, n, np.random.SeedSequence((seed, k)))
        scaled = y / t
        mean = float(scaled.mean())
        se = float(scaled.std(ddof=1) / math.sqrt(n))
        out.append(CheckReport(name="drift_mean", t=t, estimate=mean, stderr=se, target=0.0))
        out.append(_median_report("drift_median", t, scaled, target))
    return out


def positive_part_growth(
    model: LevyModel,
    t_ladder: Sequence[float],
    n: int = 100_000,
    seed=0,
    epsilon: float = 1e-3,
) -> Tuple[List[CheckReport], float]:
    """E[(X_t/t)_+] per horizon with the Gaussian reference sigma/sqrt(2 pi t)
    as target when sigma > 0 (the positive-part mean of the dominant
    diffusion), the finite-variation plateau (gamma0)_+ when sigma = 0 and
    the jumps have finite variation, and no closed target (NaN) otherwise;
    returns the fitted log-log growth exponent alongside."""
    if model.sigma > 0.0:
        ref = lambda t: model.sigma / math.sqrt(2.0 * math.pi * t)
    elif model.nu.finite_variation:
        from .models import fv_drift

        g0 = fv_drift(model)
        ref = lambda t: max(g0, 0.0)
    else:
        ref = lambda t: math.nan
    reports = []
    for k, t in enumerate(t_ladder):
        sampler = IncrementSampler(model, epsilon=budget_epsilon(model, float(t), epsilon))
        x = sampler.sample(float(t), n, np.random.SeedSequence((seed, 7, k)))
        pos = np.clip(x / t, 0.0, None)
        est = float(pos.mean())
        se = float(pos.std(ddof=1) / math.sqrt(n))
        reports.append(CheckReport(name="positive_part", t=float(t), estimate=est, stderr=se, target=ref(float(t))))
    ts = np.log([r.t for r in reports])
    ms = np.log([max(r.estimate, 1e-300) for r in reports])
    slope = float(np.polyfit(ts, ms, 1)[0])
    return reports, slope


@dataclass(frozen=True)
class StableLimitReport:
    """Empirical vs limiting characteristic function of X_t / t^{1/alpha}."""

    t: float
    u: np.ndarray
    emp: np.ndarray
    lim: np.ndarray

    @property
    def sup_diff(self) -> float:
        return float(np.abs(self.emp - self.lim).max())


def stable_cf_exponent(u: np.ndarray, alpha: float, eta0: float) -> np.ndarray:
    """log E e^{iuZ} for the one-sided stable limit of a negative stable-like
    jump part, alpha in (1,2), by quadrature:

        eta0 * integral_0^inf (e^{-iuz} - 1 + iuz) z^{-1-alpha} dz.

    Split at 1; the inner part is power-transformed, the outer oscillatory
    piece integrates cos/sin weights; the linear compensator tail is exact.
    """
    if not (1.0 < alpha < 2.0):
        raise ModelError("the stable limit needs alpha in (1, 2)")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    p = 2.0 / (2.0 - alpha)
    w, wt = _gl_nodes(0.0, 1.0, 400)
    z_in = w**p
    base = p * w ** (p * (2.0 - alpha) - 1.0) * wt
    out = np.empty(u.shape, dtype=np.complex128)
    for i, uu in enumerate(u):
        s = 1j * uu
        inner = (_expm1m_c(-s * z_in) / (z_in * z_in) * base).sum()
        cos_t, _ = integrate.quad(lambda z: z ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=abs(uu), epsabs=1e-12, limit=200, limlst=200)
        sin_t, _ = integrate.quad(lambda z: z ** (-1.0 - alpha), 1.0, np.inf, weight="sin", wvar=abs(uu), epsabs=1e-12, limit=200, limlst=200)
        osc = cos_t - 1j * math.copysign(1.0, uu) * sin_t
        outer = osc - 1.0 / alpha + s / (alpha - 1.0)
        out[i] = inner + outer
    return eta0 * out


def stable_limit_check(
    model: LevyModel,
    t_ladder: Sequence[float],
    n: int = 100_000,
    u_grid: Optional[np.ndarray] = None,
    seed=0,
) -> List[StableLimitReport]:
    """X_t / t^{1/alpha} against its stable limit law, compared through
    characteristic functions on a fixed u grid.

    The resolution cutoff scales with the horizon (eps = 0.01 t^{1/alpha}) so
    the Gaussian proxy's contribution stays uniformly negligible on the
    comparison grid.
    """
    nu = model.nu
    if not isinstance(nu, TemperedStableNegative):
        raise ModelError("the stable limit check needs the stable-like family")
    if model.sigma > 0.0:
        raise ModelError("a diffusion part would dominate the stable scaling")
    alpha, eta0 = nu.alpha, nu.eta0
    if u_grid is None:
        u_grid = np.linspace(0.25, 3.0, 12)
    lim = np.exp(stable_cf_exponent(u_grid, alpha, eta0))
    out = []
    for k, t in enumerate(t_ladder):
        t = float(t)
        eps_t = min(1e-3, 0.01 * t ** (1.0 / alpha))
        sampler = IncrementSampler(model, epsilon=eps_t)
        x = sampler.sample(t, n, np.random.SeedSequence((seed, 11, k)))
        scaled = x / t ** (1.0 / alpha)
        ph = np.exp(1j * np.outer(u_grid, scaled))
        emp = ph.mean(axis=1)
        out.append(StableLimitReport(t=t, u=u_grid, emp=emp, lim=lim))
    return out
