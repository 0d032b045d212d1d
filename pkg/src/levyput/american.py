"""American put pricing under exponential Levy models.

Solves the variational inequality for the American put on a log-price
lattice by backward induction in time-to-maturity: implicit treatment of
the local diffusion/drift/discount part, explicit lagged application of
the jump integral, and a policy-iteration (primal-dual active set) solve
of the linear complementarity problem at every step.  A European
companion surface is marched with the same discretisation so that
early-exercise quantities (premium, critical prices) are internally
consistent node by node.

Jumps below a resolution floor are folded into an effective diffusion
matching their second moment; the resolved part of the measure is
deposited on the lattice preserving mass and first moment cell by cell,
so the discrete generator satisfies the martingale identity exactly once
the drift is taken from the discrete weights.  Far negative jumps beyond
the padded domain enter through closed-form deep-in-the-money values.

Pure-jump models whose measure is a finite set of atoms are marched with
exact lattice-shift advection for the compensated drift (no numerical
diffusion), which is what makes the near-maturity boundary law of
finite-variation models resolvable at theta ~ 1e-4 of maturity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import fftconvolve

from .models import (
    ConvergenceError,
    DomainError,
    JumpMeasure,
    LevyModel,
    LevyType,
    ModelError,
    classify,
    fv_drift,
)
from .simulation import IncrementSampler, budget_epsilon

_LN8 = math.log(8.0)


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


@dataclass
class Grid:
    """Log-price/time lattice plus the discretised jump measure.

    ``jump_offsets`` are integer multiples of ``dx``; ``jump_weights`` are
    the intensities deposited there (mass and first moment of each source
    cell are preserved).  Jumps with |y| below ``epsilon_jump`` are carried
    by the diffusion proxy ``sigma_eps``; negative jumps beyond
    ``tail_edge`` are applied analytically through ``tail_mass`` and
    ``tail_expint`` (the tail's exponential moment)."""

    x_nodes: np.ndarray
    t_nodes: np.ndarray
    dx: float
    i_strike: int
    epsilon_jump: float
    sigma_eps: float
    jump_offsets: np.ndarray
    jump_weights: np.ndarray
    tail_edge: float
    tail_mass: float
    tail_expint: float
    branch: str
    transport_drift: float
    jump_budget: float
    substep_budget: float
    drop_protect: float
    martingale_defect: float


def _time_ladder(maturity: float, theta_min: float, n_t: int, theta_marks) -> np.ndarray:
    """Geometric ladder from theta_min to maturity plus halved lead-in
    nodes reaching down to 1e-4 of maturity (at least four halvings)."""
    nodes = {0.0, float(maturity)}
    h = theta_min
    halvings = 0
    while halvings < 4 or h > 1e-4 * maturity * (1.0 + 1e-12):
        h *= 0.5
        halvings += 1
        nodes.add(h)
        if h < 1e-13 * maturity:
            break
    nodes.update(float(v) for v in np.geomspace(theta_min, maturity, n_t))
    for m in theta_marks:
        m = float(m)
        if 0.0 < m <= maturity * (1.0 + 1e-12):
            nodes.add(min(m, maturity))
    arr = np.array(sorted(nodes))
    keep = np.concatenate([[True], np.diff(arr) > 1e-12 * maturity])
    return arr[keep]


def _deposit_cells(nu: JumpMeasure, dx: float, eps_floor: float, k_lim: int,
                   side: int, atoms, w_acc: Dict[int, float]) -> None:
    """Deposit the density part of nu on one side of the lattice.

    Each geometric cell between consecutive lattice edges contributes its
    exact mass at its exact centre of mass, split linearly between the two
    neighbouring lattice offsets (preserves mass and first moment)."""
    k0 = max(1, int(math.ceil(eps_floor / dx - 0.5 - 1e-12)))
    for k in range(k0, k_lim + 1):
        lo_e = (k - 0.5) * dx
        hi_e = (k + 0.5) * dx
        if k == k0:
            lo_e = eps_floor
        if side < 0:
            a, b = -hi_e, -lo_e
        else:
            a, b = lo_e, hi_e
        m = nu.mass_between(a, b)
        mu = nu.mean_between(a, b)
        for y_a, lam_a in atoms:
            if a < y_a < b:
                m -= lam_a
                mu -= lam_a * y_a
        if m <= 1e-300:
            continue
        ybar = min(max(mu / m, a + 1e-300), b - 1e-300)
        pos = ybar / dx
        j = int(math.floor(pos))
        f = pos - j
        w_acc[j] = w_acc.get(j, 0.0) + m * (1.0 - f)
        if f > 0.0:
            w_acc[j + 1] = w_acc.get(j + 1, 0.0) + m * f


def build_grid(model: LevyModel, n_x: int = 2001, n_t: int = 120,
               theta_min: Optional[float] = None, epsilon_jump: float = 1e-3,
               *, span: Optional[Tuple[float, float]] = None,
               theta_marks=(), jump_budget: float = 5.0,
               substep_budget: float = 0.5,
               drop_protect: float = 0.0) -> Grid:
    """Build the solve lattice for a model.

    ``n_x`` is a resolution target: the actual node count aligns the
    strike (and the largest atom, if any) exactly onto the lattice.  The
    domain spans at least a factor of 8 in price on each side of the
    strike; ``span`` overrides the automatic reach (one log-distance for
    both sides, or a (left, right) pair) but is still clamped to that
    minimum, and exactly-advected models keep their drift corridor on top
    of it.  Raises a
    configuration error when the small-jump proxy at ``epsilon_jump``
    would carry more than half the total quadratic variation.

    For rungs ending at or below ``drop_protect`` the per-rung jump
    budget is met purely by substepping; beyond it, rungs may exchange
    the smallest resolved jumps for extra proxy diffusion.  Protecting a
    fit window keeps the boundary there free of exchange-induced
    diffusion (later rungs cannot influence earlier ones)."""
    mkt = model.market
    T, K, r, dl = mkt.maturity, mkt.strike, mkt.r, mkt.delta
    if theta_min is None:
        theta_min = 1e-4 * T
    theta_min = float(theta_min)
    if n_x < 200:
        raise ModelError("n_x must be at least 200")
    if n_t < 100:
        raise ModelError("n_t must be at least 100")
    if not (0.0 < theta_min < T):
        raise ModelError("theta_min must lie in (0, maturity)")
    nu = model.nu
    atoms = list(nu.atom_list())
    atom_only = bool(atoms) and not nu.has_density()

    # span heuristic: core dispersion plus physical drift, with an extra
    # translation allowance when the compensated drift is advected exactly
    mean_big = nu.mean_between(-50.0, -1.0) + nu.mean_between(1.0, 50.0)
    drift_phys = model.gamma + mean_big
    core_std = math.sqrt((model.sigma ** 2 + nu.var_within(1.0)) * T)
    a_trans = 0.0
    if atom_only and model.sigma == 0.0:
        a_trans = r - dl - sum(lam * math.expm1(y) for y, lam in atoms)
    reach_l = 4.0 * core_std + max(0.0, -drift_phys) * T + 0.35
    reach_r = 4.0 * core_std + max(0.0, drift_phys) * T + 0.35
    if span is not None:
        try:
            reach_l, reach_r = float(span[0]), float(span[1])
        except TypeError:
            reach_l = reach_r = float(span)
    reach_l = max(reach_l, _LN8 + 0.02)
    reach_r = max(reach_r, _LN8 + 0.02)
    # the exactly-advected corridor rides on top of the minimum span (plus
    # a decay margin) so pad reads stay clear of the checked domain
    if a_trans > 0.0:
        reach_r += a_trans * T + 0.25
    elif a_trans < 0.0:
        reach_l += -a_trans * T + 0.25

    dx = (reach_l + reach_r) / (n_x - 1)
    if atoms:
        y_star = max((abs(y) for y, _ in atoms))
        m_star = max(1, int(round(y_star / dx)))
        dx = y_star / m_star
    n_l = int(math.ceil(reach_l / dx - 1e-9))
    n_r = int(math.ceil(reach_r / dx - 1e-9))
    x_nodes = math.log(K) + dx * np.arange(-n_l, n_r + 1, dtype=float)
    i_strike = n_l

    t_nodes = _time_ladder(T, theta_min, n_t, theta_marks)

    # small-jump floor and diffusion proxy
    eps_floor = max(float(epsilon_jump), 0.75 * dx)
    sig_eps2 = nu.var_within(eps_floor)
    qv = model.sigma ** 2 + nu.var_within(50.0)
    if sig_eps2 > 0.0 and sig_eps2 > 0.5 * qv:
        raise DomainError(
            "small-jump proxy variance at epsilon=%.3g carries %.0f%% of the "
            "total quadratic variation; lower epsilon_jump"
            % (eps_floor, 100.0 * sig_eps2 / qv))

    # resolved kernel: atoms exactly, density mass-and-mean per cell
    w_acc: Dict[int, float] = {}
    for y_a, lam_a in atoms:
        if abs(y_a) >= eps_floor and lam_a > 0.0:
            k_a = int(round(y_a / dx))
            k_a = max(-n_l, min(n_r, k_a))
            w_acc[k_a] = w_acc.get(k_a, 0.0) + lam_a
    tail_edge = 0.0
    tail_mass = 0.0
    tail_expint = 0.0
    if nu.has_density():
        # positive side: truncate where the exponential tail is negligible
        k_pos = 0
        if nu.mass_between(eps_floor, math.inf) > 0.0:
            lo_k, hi_k = 1, n_l + n_r
            if nu.pos_exp_tail(hi_k * dx) >= 1e-10:
                k_pos = hi_k
            else:
                while hi_k - lo_k > 1:
                    mid = (lo_k + hi_k) // 2
                    if nu.pos_exp_tail(mid * dx) >= 1e-10:
                        lo_k = mid
                    else:
                        hi_k = mid
                k_pos = hi_k
            _deposit_cells(nu, dx, eps_floor, k_pos, +1, atoms, w_acc)
        # negative side: cover the padded reach, remainder analytic
        tail_edge = (n_l + 0.5) * dx
        if nu.mass_between(-math.inf, -eps_floor) > 0.0:
            _deposit_cells(nu, dx, eps_floor, n_l, -1, atoms, w_acc)
            tail_mass = nu.mass_between(-math.inf, -tail_edge)
            if tail_mass > 0.0:
                tail_expint = nu.integrate_resolved(
                    lambda y: math.exp(y) if y < -tail_edge else 0.0, eps_floor)
            else:
                tail_mass = 0.0
    if w_acc:
        ks = np.array(sorted(w_acc))
        ws = np.array([w_acc[int(k)] for k in ks])
        keep = ws > 0.0
        ks, ws = ks[keep], ws[keep]
    else:
        ks = np.zeros(0, dtype=int)
        ws = np.zeros(0)

    # internal martingale identity of the discretised model (held exactly
    # by construction: the solver derives its drift from these weights)
    sigma_tot2 = model.sigma ** 2 + sig_eps2
    c1_disc = float(np.sum(ws * np.expm1(ks * dx))) + (tail_expint - tail_mass)
    a_drift = r - dl - 0.5 * sigma_tot2 - c1_disc
    defect = abs(0.5 * sigma_tot2 + a_drift + c1_disc - (r - dl))

    branch = "tridiag"
    if (atom_only and model.sigma == 0.0 and sig_eps2 == 0.0
            and a_trans != 0.0 and dx / abs(a_trans) <= 1e-4 * T):
        branch = "transport"

    return Grid(x_nodes=x_nodes, t_nodes=t_nodes, dx=dx, i_strike=i_strike,
                epsilon_jump=eps_floor, sigma_eps=math.sqrt(max(sig_eps2, 0.0)),
                jump_offsets=ks, jump_weights=ws, tail_edge=tail_edge,
                tail_mass=tail_mass, tail_expint=tail_expint, branch=branch,
                transport_drift=a_trans if branch == "transport" else 0.0,
                jump_budget=float(jump_budget),
                substep_budget=float(substep_budget),
                drop_protect=float(drop_protect),
                martingale_defect=defect)


# ---------------------------------------------------------------------------
# price surface
# ---------------------------------------------------------------------------


@dataclass
class PriceSurface:
    """American and European put values on the lattice, one row per
    stored time-to-maturity (row 0 is the payoff at theta = 0)."""

    grid: Grid
    thetas: np.ndarray
    american: np.ndarray
    european: np.ndarray
    strike: float
    diagnostics: Dict[str, object]

    @property
    def payoff(self) -> np.ndarray:
        return np.maximum(self.strike - np.exp(self.grid.x_nodes), 0.0)

    @property
    def premium(self) -> np.ndarray:
        """Early-exercise premium surface (American minus European)."""
        return self.american - self.european

    def _interp(self, values: np.ndarray, theta: float, spot) -> np.ndarray:
        th = min(max(float(theta), 0.0), float(self.thetas[-1]))
        xq = np.log(np.clip(np.asarray(spot, dtype=float),
                            math.exp(self.grid.x_nodes[0]),
                            math.exp(self.grid.x_nodes[-1])))
        j = int(np.searchsorted(self.thetas, th))
        if j == 0:
            return np.interp(xq, self.grid.x_nodes, values[0])
        j = min(j, len(self.thetas) - 1)
        t0, t1 = self.thetas[j - 1], self.thetas[j]
        lam = 0.0 if t1 == t0 else (th - t0) / (t1 - t0)
        row = (1.0 - lam) * values[j - 1] + lam * values[j]
        return np.interp(xq, self.grid.x_nodes, row)

    def value(self, theta: float, spot):
        """American put value, bilinear in (theta, ln spot)."""
        out = self._interp(self.american, theta, spot)
        return float(out) if np.isscalar(spot) else out

    def european_value(self, theta: float, spot):
        """European companion value on the same lattice."""
        out = self._interp(self.european, theta, spot)
        return float(out) if np.isscalar(spot) else out


# ---------------------------------------------------------------------------
# helpers shared by both marching branches
# ---------------------------------------------------------------------------


def _put_jump_value(nu: JumpMeasure, s: float, strike: float) -> float:
    """Single-jump landing value integral((strike - s e^y)_+ nu(dy)):
    the leading term of a deep out-of-the-money put."""
    yc = math.log(strike / s)
    if nu.mass_between(-math.inf, yc) <= 0.0:
        return 0.0
    eps = min(0.5 * abs(yc), 1e-4) if yc < 0.0 else 1e-6
    return nu.integrate_resolved(
        lambda y: max(strike - s * math.exp(y), 0.0) if y < yc else 0.0, eps)


def _left_pad_american(xp: np.ndarray, K: float, r: float, dl: float,
                       th: float) -> np.ndarray:
    intrinsic = K - np.exp(xp)
    euro = K * math.exp(-r * th) - np.exp(xp) * math.exp(-dl * th)
    return np.maximum(intrinsic, euro)


def _left_pad_european(xp: np.ndarray, K: float, r: float, dl: float,
                       th: float) -> np.ndarray:
    return K * math.exp(-r * th) - np.exp(xp) * math.exp(-dl * th)


def _policy_solve(lo: np.ndarray, di: np.ndarray, up: np.ndarray,
                  rhs: np.ndarray, psi: np.ndarray, active0: np.ndarray,
                  strike: float, cap: int = 200):
    """Solve the tridiagonal linear complementarity problem
    min(T p - rhs, p - psi) = 0 by primal-dual active-set iteration.

    Rows in the active (exercise) set are replaced by identity rows at the
    payoff; the set is updated from feasibility of the solution and the
    sign of the unconstrained residual.  The iteration terminates when the
    set is stable, or as soon as the complementarity measure reaches
    roundoff scale (marginal cells can cycle between equally feasible
    sets without that affecting the solution).

    The warm start from the caller's previous set settles in one or two
    sweeps when the set barely moves, but a large shrink releases cells
    one per sweep (an exercised cell's residual only turns negative once
    its neighbour has been released).  If the set has not stabilised
    after a few sweeps the iteration restarts from the empty set, from
    which activation proceeds in parallel batches and convergence is
    monotone."""
    n = rhs.size
    active = active0.copy()
    active[0] = active[-1] = False
    # tolerances live on the price scale: the residual is diagonally
    # normalised before use, so stiff rungs (large dt/dx^2) do not
    # inflate what counts as "satisfied"
    tol_p = 1e-12 * strike
    tol_r = 1e-12 * strike
    tol_feas = 1e-10 * strike
    restart_at = 8
    ab = np.empty((3, n))
    for it in range(cap):
        if it == restart_at:
            active = np.zeros_like(active)
        sup = up.copy()
        sub = lo.copy()
        dg = di.copy()
        sup[active] = 0.0
        sub[active] = 0.0
        dg[active] = 1.0
        ab[0, 0] = 0.0
        ab[0, 1:] = sup[:-1]
        ab[1] = dg
        ab[2, :-1] = sub[1:]
        ab[2, -1] = 0.0
        rhs_eff = rhs.copy()
        rhs_eff[active] = psi[active]
        p = solve_banded((1, 1), ab, rhs_eff, check_finite=False,
                         overwrite_ab=True, overwrite_b=True)
        res = di * p - rhs
        res[1:] += lo[1:] * p[:-1]
        res[:-1] += up[:-1] * p[1:]
        res /= di
        # inactive rows are solved rows, so a dip below the payoff there is
        # a genuine violation; active rows are identity rows whose solution
        # is psi up to roundoff, so their membership is decided by the
        # residual (multiplier) sign alone
        new_active = (~active & (p < psi - tol_p)) | (active & (res >= -tol_r))
        new_active[0] = new_active[-1] = False
        comp = float(np.max(np.abs(np.minimum(p - psi, res))[1:-1])) if n > 2 else 0.0
        if np.array_equal(new_active, active) or comp <= tol_feas:
            return np.maximum(p, psi), new_active, it + 1, comp
        active = new_active
    raise ConvergenceError(
        "complementarity iteration did not stabilise within %d sweeps "
        "(worst feasibility gap %.3g)" % (cap, float(np.min(p - psi))))


# ---------------------------------------------------------------------------
# implicit tridiagonal march (diffusive / proxy branch)
# ---------------------------------------------------------------------------


def _march_tridiag(model: LevyModel, grid: Grid) -> PriceSurface:
    mkt = model.market
    r, dl, K = mkt.r, mkt.delta, mkt.strike
    x = grid.x_nodes
    n = x.size
    dx = grid.dx
    expx = np.exp(x)
    psi = np.maximum(K - expx, 0.0)
    nu = model.nu

    offs = grid.jump_offsets
    w = grid.jump_weights
    has_kernel = offs.size > 0
    atom_mode = has_kernel and offs.size <= 8
    L_l = int(max(0, -offs[0])) if has_kernel else 0
    L_r = int(max(0, offs[-1])) if has_kernel else 0
    if has_kernel and not atom_mode:
        # dense kernel over the contiguous offset range for convolution
        o_min = int(offs[0])
        n_dense = int(offs[-1]) - o_min + 1
        dense_idx = offs - o_min
        conv_start = L_l + o_min
    else:
        o_min = n_dense = conv_start = 0
        dense_idx = None

    if has_kernel:
        order = np.argsort(np.abs(offs), kind="stable")
        y_off = offs * dx
        cum_lam = np.cumsum(w[order])
        cum_var = np.cumsum((w * y_off ** 2)[order])
        cum_c1 = np.cumsum((w * np.expm1(y_off))[order])
        abs_sorted = np.abs(y_off)[order]
        drop_cap = int(np.searchsorted(abs_sorted, 0.3, side="right"))
        lam_all = float(cum_lam[-1]) + grid.tail_mass
        c1_all = float(cum_c1[-1]) + (grid.tail_expint - grid.tail_mass)
    else:
        lam_all = c1_all = 0.0
        drop_cap = 0

    xpad_l = x[0] - dx * np.arange(L_l, 0, -1) if L_l else np.zeros(0)
    xpad_r = x[-1] + dx * np.arange(1, L_r + 1) if L_r else np.zeros(0)
    jr_edge = _put_jump_value(nu, float(expx[-1]), K)
    jr_pad = (np.array([_put_jump_value(nu, math.exp(xq), K) for xq in xpad_r])
              if L_r else np.zeros(0))

    thetas = grid.t_nodes
    n_rows = thetas.size
    american = np.empty((n_rows, n))
    european = np.empty((n_rows, n))
    american[0] = psi
    european[0] = psi
    P = psi.copy()
    Pe = psi.copy()
    active = psi > 0.0

    diag_rows: List[Dict[str, float]] = []
    comp_max = 0.0
    iters_max = 0

    for j in range(1, n_rows):
        th_a, th_b = float(thetas[j - 1]), float(thetas[j])
        dth = th_b - th_a
        # per-rung small-jump schedule: drop interior weights until the
        # resolved intensity fits the per-rung budget; protected rungs
        # meet the budget by substepping instead
        protected = th_b <= grid.drop_protect * (1.0 + 1e-12)
        if has_kernel and not protected and lam_all * dth > grid.jump_budget:
            need = lam_all - grid.jump_budget / dth
            ndrop = min(int(np.searchsorted(cum_lam, need, side="left")) + 1,
                        drop_cap)
        else:
            ndrop = 0
        if ndrop > 0:
            lam_live = lam_all - float(cum_lam[ndrop - 1])
            c1_live = c1_all - float(cum_c1[ndrop - 1])
            var_drop = float(cum_var[ndrop - 1])
            eps_rung = float(abs_sorted[ndrop - 1]) + 0.5 * dx
            w_live = w.copy()
            w_live[order[:ndrop]] = 0.0
        else:
            lam_live, c1_live, var_drop = lam_all, c1_all, 0.0
            eps_rung = grid.epsilon_jump
            w_live = w
        sig2 = model.sigma ** 2 + grid.sigma_eps ** 2 + var_drop
        a = r - dl - 0.5 * sig2 - c1_live

        # hybrid central/upwind split keeps the stencil an M-matrix
        a_lim = sig2 / dx if sig2 > 0.0 else 0.0
        ac = min(max(a, -a_lim), a_lim)
        au = a - ac
        # upwind-dominated stencils couple one-sidedly, so the active-set
        # release front advances about one cell per sweep: cap the drift
        # traversed per implicit solve at ~25 cells
        n_sub = max(1, int(math.ceil(lam_live * dth / grid.substep_budget)),
                    int(math.ceil(abs(au) * dth / (25.0 * dx))))
        if not protected:
            n_sub = min(n_sub, 400)
        dts = dth / n_sub
        lo_c = -dts * (0.5 * sig2 / dx ** 2 - 0.5 * ac / dx + max(-au, 0.0) / dx)
        up_c = -dts * (0.5 * sig2 / dx ** 2 + 0.5 * ac / dx + max(au, 0.0) / dx)
        di_c = 1.0 + dts * (r + lam_live) + dts * (sig2 / dx ** 2 + abs(au) / dx)
        lo = np.full(n, lo_c)
        up = np.full(n, up_c)
        di = np.full(n, di_c)
        lo[0] = up[0] = lo[-1] = up[-1] = 0.0
        di[0] = di[-1] = 1.0
        ab_plain = np.zeros((3, n))
        ab_plain[0, 1:] = up[:-1]
        ab_plain[1] = di
        ab_plain[2, :-1] = lo[1:]

        if has_kernel and not atom_mode:
            w_dense = np.zeros(n_dense)
            w_dense[dense_idx] = w_live
            w_rev = w_dense[::-1]
        else:
            w_rev = None
        rung_comp = 0.0
        rung_iters = 0
        for s_i in range(n_sub):
            th_old = th_a + s_i * dts
            th_new = th_old + dts
            if has_kernel:
                pl_am = _left_pad_american(xpad_l, K, r, dl, th_old)
                pl_eu = _left_pad_european(xpad_l, K, r, dl, th_old)
                pr = th_old * math.exp(-r * th_old) * jr_pad
                ext_am = np.concatenate([pl_am, P, pr])
                ext_eu = np.concatenate([pl_eu, Pe, pr])
                if atom_mode:
                    Jp_am = np.zeros(n)
                    Jp_eu = np.zeros(n)
                    for k_o, w_o in zip(offs, w_live):
                        if w_o <= 0.0:
                            continue
                        sl = slice(L_l + k_o, L_l + k_o + n)
                        Jp_am += w_o * ext_am[sl]
                        Jp_eu += w_o * ext_eu[sl]
                else:
                    Jp_am = fftconvolve(ext_am, w_rev, mode="valid")[
                        conv_start:conv_start + n]
                    Jp_eu = fftconvolve(ext_eu, w_rev, mode="valid")[
                        conv_start:conv_start + n]
                if grid.tail_mass > 0.0:
                    tam_i = K * grid.tail_mass - expx * grid.tail_expint
                    tam_e = (K * math.exp(-r * th_old) * grid.tail_mass
                             - expx * math.exp(-dl * th_old) * grid.tail_expint)
                    Jp_am += np.maximum(tam_i, tam_e)
                    Jp_eu += tam_e
                rhs_am = P + dts * Jp_am
                rhs_eu = Pe + dts * Jp_eu
            else:
                rhs_am = P.copy()
                rhs_eu = Pe.copy()
            val_r = th_new * math.exp(-r * th_new) * jr_edge
            rhs_am[0] = max(K - expx[0],
                            K * math.exp(-r * th_new) - expx[0] * math.exp(-dl * th_new))
            rhs_eu[0] = K * math.exp(-r * th_new) - expx[0] * math.exp(-dl * th_new)
            rhs_am[-1] = rhs_eu[-1] = val_r
            Pe = solve_banded((1, 1), ab_plain, rhs_eu, check_finite=False)
            P, active, iters, comp = _policy_solve(lo, di, up, rhs_am, psi, active, K)
            rung_comp = max(rung_comp, comp)
            rung_iters = max(rung_iters, iters)
        american[j] = P
        european[j] = Pe
        comp_max = max(comp_max, rung_comp)
        iters_max = max(iters_max, rung_iters)
        diag_rows.append({"theta": th_b, "n_sub": n_sub, "eps": eps_rung,
                          "lam": lam_live, "comp_resid": rung_comp,
                          "policy_iters": rung_iters})

    diagnostics = {"branch": "tridiag", "rungs": diag_rows,
                   "comp_resid_max": comp_max, "policy_iters_max": iters_max,
                   "martingale_defect": grid.martingale_defect,
                   "short_rate": r}
    return PriceSurface(grid=grid, thetas=thetas.copy(), american=american,
                        european=european, strike=K, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# exact lattice-advection march (pure-atom transport branch)
# ---------------------------------------------------------------------------


def _poisson_weights(mu: float, tail: float = 1e-14) -> np.ndarray:
    """Poisson(mu) probabilities truncated where the tail drops below
    ``tail`` and renormalised to unit mass (so constants are preserved
    exactly by the mixture)."""
    ws = [math.exp(-mu)]
    k = 0
    total = ws[0]
    while total < 1.0 - tail:
        k += 1
        ws.append(ws[-1] * mu / k)
        total += ws[-1]
        if k > 400:
            break
    arr = np.array(ws)
    return arr / arr.sum()


def _transport_pad_values(offs, wts, dx: float, a: float, r: float, K: float,
                          theta: float, x_query: np.ndarray) -> np.ndarray:
    """Put continuation values of the discretised pure-atom model at
    log-prices outside the lattice.

    The value is the exact Poisson-mixture European price built from the
    lattice jump offsets, floored at intrinsic.  Advection and mixture
    reads past the right edge land far out of the money, where the early
    exercise premium is far below lattice accuracy, so the European
    value is the correct fill."""
    if x_query.size == 0:
        return np.zeros(0)
    sizes = np.array([0.0])
    probs = np.array([1.0])
    for k_o, w_o in zip(offs, wts):
        pw = _poisson_weights(w_o * theta)
        sh = np.arange(len(pw)) * (k_o * dx)
        sizes = (sizes[:, None] + sh[None, :]).ravel()
        probs = (probs[:, None] * pw[None, :]).ravel()
        keep = probs > 1e-18
        sizes, probs = sizes[keep], probs[keep]
    fwd = np.exp(x_query + a * theta)
    pay = np.clip(K - fwd[:, None] * np.exp(sizes[None, :]), 0.0, None)
    val = math.exp(-r * theta) * (pay @ probs)
    return np.maximum(val, K - np.exp(x_query))


def _march_transport(model: LevyModel, grid: Grid) -> PriceSurface:
    """Exact-propagation march for pure-atom models: over one step the
    value is the discounted expectation over the compensated drift shift
    composed with independent Poisson numbers of each atomic jump.  All
    displacements are integer lattice shifts, so apart from the payoff
    projection (Bermudan-style, at step ends) the update is exact."""
    mkt = model.market
    r, dl, K = mkt.r, mkt.delta, mkt.strike
    x = grid.x_nodes
    n = x.size
    dx = grid.dx
    expx = np.exp(x)
    psi = np.maximum(K - expx, 0.0)

    offs = [int(k) for k in grid.jump_offsets]
    wts = [float(v) for v in grid.jump_weights]
    lam = sum(wts)
    a = grid.transport_drift
    sgn = 1 if a > 0 else -1
    quantum = dx / abs(a)

    P = psi.copy()
    Pe = psi.copy()
    th = 0.0
    stored_t = [0.0]
    rows_am = [psi.copy()]
    rows_eu = [psi.copy()]
    diag_rows: List[Dict[str, float]] = []

    for target in grid.t_nodes[1:]:
        dth_req = float(target) - th
        if dth_req < 0.5 * quantum:
            continue
        n_sub = max(1, int(math.ceil(lam * dth_req / grid.substep_budget)))
        m = max(1, int(round(abs(a) * dth_req / (n_sub * dx))))
        dts = m * dx / abs(a)
        disc = math.exp(-r * dts)
        # per-atom Poisson mixtures and the pad reach they need
        mixtures = [(k_o, _poisson_weights(w_o * dts)) for k_o, w_o in zip(offs, wts)]
        pad_l = sum((len(pw) - 1) * (-k_o) for k_o, pw in mixtures if k_o < 0)
        pad_r = sum((len(pw) - 1) * k_o for k_o, pw in mixtures if k_o > 0)
        rung_proj = 0.0
        for _ in range(n_sub):
            th_old = th
            # exact advection: P(th+dt, x) = P(th, x + a dt); reads past
            # the right edge take the exact mixture European value of
            # the discretised model (no premium at those moneyness levels)
            if sgn > 0:
                pad = _transport_pad_values(
                    offs, wts, dx, a, r, K, th_old,
                    x[-1] + dx * np.arange(1, m + pad_r + 1))
                fill, pr = pad[:m], pad[m:]
                P_adv = np.concatenate([P[m:], fill])
                Pe_adv = np.concatenate([Pe[m:], fill])
            else:
                fill_am = _left_pad_american(x[0] - dx * np.arange(m, 0, -1), K, r, dl, th_old)
                fill_eu = _left_pad_european(x[0] - dx * np.arange(m, 0, -1), K, r, dl, th_old)
                P_adv = np.concatenate([fill_am, P[:-m]])
                Pe_adv = np.concatenate([fill_eu, Pe[:-m]])
                pr = _transport_pad_values(
                    offs, wts, dx, a, r, K, th_old,
                    x[-1] - m * dx + dx * np.arange(1, pad_r + 1))
            if mixtures:
                # the mixture acts on the post-advection field, so pad
                # coordinates carry the same shift as the interior reads
                adv = sgn * m * dx
                xp_l = (x[0] + adv - dx * np.arange(pad_l, 0, -1)
                        if pad_l else np.zeros(0))
                ext_am = np.concatenate([_left_pad_american(xp_l, K, r, dl, th_old),
                                         P_adv, pr])
                ext_eu = np.concatenate([_left_pad_european(xp_l, K, r, dl, th_old),
                                         Pe_adv, pr])
                for k_o, pw in mixtures:
                    out_am = pw[0] * ext_am
                    out_eu = pw[0] * ext_eu
                    for kk in range(1, len(pw)):
                        sh = kk * k_o
                        if sh < 0:
                            out_am[-sh:] += pw[kk] * ext_am[:sh]
                            out_eu[-sh:] += pw[kk] * ext_eu[:sh]
                        else:
                            out_am[:-sh] += pw[kk] * ext_am[sh:]
                            out_eu[:-sh] += pw[kk] * ext_eu[sh:]
                    ext_am = out_am
                    ext_eu = out_eu
                P_un = disc * ext_am[pad_l:pad_l + n]
                Pe = disc * ext_eu[pad_l:pad_l + n]
            else:
                P_un = disc * P_adv
                Pe = disc * Pe_adv
            P = np.maximum(P_un, psi)
            rung_proj = max(rung_proj, float(np.max(psi - P_un)))
            th = th_old + dts
        stored_t.append(th)
        rows_am.append(P.copy())
        rows_eu.append(Pe.copy())
        diag_rows.append({"theta": th, "n_sub": n_sub, "eps": grid.epsilon_jump,
                          "lam": lam, "comp_resid": 0.0, "policy_iters": 0,
                          "shift_cells": m, "proj_depth": rung_proj})

    diagnostics = {"branch": "transport", "rungs": diag_rows,
                   "comp_resid_max": 0.0, "policy_iters_max": 0,
                   "martingale_defect": grid.martingale_defect,
                   "quantum": quantum, "short_rate": r}
    return PriceSurface(grid=grid, thetas=np.array(stored_t),
                        american=np.array(rows_am), european=np.array(rows_eu),
                        strike=K, diagnostics=diagnostics)


def solve_variational_inequality(model: LevyModel, grid: Grid) -> PriceSurface:
    """March the American put variational inequality (and its European
    companion) backward in time-to-maturity on the given grid."""
    if grid.branch == "transport":
        return _march_transport(model, grid)
    return _march_tridiag(model, grid)


# ---------------------------------------------------------------------------
# boundary extraction
# ---------------------------------------------------------------------------


@dataclass
class BoundaryCurve:
    """Early-exercise boundary b plus the European critical price b_e
    (extracted from the companion surface with the same rule) and
    zeta = K / b_e - 1."""

    thetas: np.ndarray
    b: np.ndarray
    b_e: np.ndarray
    zeta: np.ndarray
    surface: PriceSurface


def _cross_level(x: np.ndarray, g: np.ndarray, i_hi: int, level: float) -> float:
    """First up-crossing of g through ``level`` scanning left to right up
    to index ``i_hi`` (exclusive); nan when g starts above the level or
    never crosses."""
    seg = g[:i_hi]
    above = seg > level
    if above[0] or not above.any():
        return math.nan
    idx = int(np.argmax(above))
    g0, g1 = seg[idx - 1], seg[idx]
    frac = 0.0 if g1 == g0 else (level - g0) / (g1 - g0)
    return float(x[idx - 1] + frac * (x[idx] - x[idx - 1]))


def extract_boundary(surface: PriceSurface, tol: float = 1e-8) -> BoundaryCurve:
    """Locate the exercise boundary on every stored slice: the sub-cell
    position where American minus payoff first exceeds tol * strike, and
    the matching critical price of the European companion."""
    grid = surface.grid
    K = surface.strike
    x = grid.x_nodes
    psi = surface.payoff
    level = tol * K
    i_hi = min(grid.i_strike + 2, x.size)
    thetas = surface.thetas[1:]
    b = np.empty(thetas.size)
    be = np.empty(thetas.size)
    misses = 0
    for i in range(thetas.size):
        g_am = surface.american[i + 1, :i_hi] - psi[:i_hi]
        g_eu = surface.european[i + 1, :i_hi] - psi[:i_hi]
        xb = _cross_level(x, g_am, i_hi, level)
        xe = _cross_level(x, g_eu, i_hi, level)
        b[i] = math.exp(xb) if math.isfinite(xb) else math.nan
        be[i] = math.exp(xe) if math.isfinite(xe) else math.nan
        if not math.isfinite(xb):
            misses += 1
    if misses:
        warnings.warn(
            "no exercise region found on %d of %d slices; boundary recorded "
            "as absent (grid lower edge may be too high)" % (misses, thetas.size))
    zeta = K / be - 1.0
    return BoundaryCurve(thetas=thetas.copy(), b=b, b_e=be, zeta=zeta,
                         surface=surface)


# ---------------------------------------------------------------------------
# early-exercise premium cross-validation
# ---------------------------------------------------------------------------


@dataclass
class EepEstimate:
    """Monte Carlo estimate of the early-exercise premium (raw estimate:
    small negative values are within statistical noise of zero)."""

    value: float
    stderr: float
    n_paths: int
    seed: int

    def __float__(self) -> float:
        return self.value


def _positive_buckets(grid: Grid, cap: int = 32):
    """Aggregate positive-side kernel weights into at most ``cap`` buckets
    preserving mass and mean offset (for the premium kernel integral)."""
    mask = grid.jump_offsets > 0
    ks = grid.jump_offsets[mask]
    ws = grid.jump_weights[mask]
    if ks.size == 0:
        return np.zeros(0), np.zeros(0)
    ys = ks * grid.dx
    if ks.size <= cap:
        return ys, ws
    edges = np.linspace(0, ks.size, cap + 1).astype(int)
    yb, wb = [], []
    for a, bnd in zip(edges[:-1], edges[1:]):
        wm = ws[a:bnd].sum()
        if wm <= 0.0:
            continue
        yb.append(float((ys[a:bnd] * ws[a:bnd]).sum() / wm))
        wb.append(float(wm))
    return np.array(yb), np.array(wb)


def eep_premium(model: LevyModel, boundary: BoundaryCurve, theta: float,
                spot: float, n_paths: int = 10000, seed: int = 0) -> EepEstimate:
    """Monte Carlo early-exercise premium from the kernel representation:
    e = E int_0^theta e^{-rs} [rK - delta S_s - I_+(theta - s, S_s)]
    1_{S_s < b(theta - s)} ds, with I_+ the positive-jump give-back term
    read off the solved surface.  Valid for models with a diffusion part
    or infinite-activity jumps; finite-activity models are refused (the
    representation is not established there)."""
    kind = classify(model)
    if kind == LevyType.A:
        raise ModelError(
            "early-exercise premium representation requires an infinite "
            "activity or diffusion component; finite-activity model refused")
    mkt = model.market
    r, dl, K = mkt.r, mkt.delta, mkt.strike
    theta = float(theta)
    if not (0.0 < theta <= boundary.thetas[-1] * (1.0 + 1e-9)):
        raise DomainError("theta outside the solved boundary range")
    surface = boundary.surface
    ts = surface.thetas[(surface.thetas > 0.0) & (surface.thetas <= theta * (1.0 + 1e-12))]
    s_pts = theta - ts[::-1]
    if s_pts.size == 0 or s_pts[0] > 1e-12 * theta:
        s_pts = np.concatenate([[0.0], s_pts])
    used = np.interp(theta - s_pts, boundary.thetas, boundary.b)
    if not np.all(np.isfinite(used)):
        raise DomainError("boundary has gaps on the requested window")
    y_pos, w_pos = _positive_buckets(surface.grid)

    eps = budget_epsilon(model, theta, budget=2000.0)
    sampler = IncrementSampler(model, epsilon=eps)
    rng_seeds = np.random.SeedSequence(seed).spawn(s_pts.size)
    ln_s = np.full(n_paths, math.log(spot))
    acc = np.zeros(n_paths)
    for i in range(s_pts.size - 1):
        s_lo = float(s_pts[i])
        ds = float(s_pts[i + 1] - s_pts[i])
        th_rem = theta - s_lo
        S = np.exp(ln_s)
        b_here = float(np.interp(th_rem, boundary.thetas, boundary.b))
        kern = r * K - dl * S
        if y_pos.size:
            for y_q, w_q in zip(y_pos, w_pos):
                s_up = S * math.exp(y_q)
                kern = kern - w_q * (surface.value(th_rem, s_up) - (K - s_up))
        acc += math.exp(-r * s_lo) * ds * np.where(S < b_here, kern, 0.0)
        inc = sampler.sample(ds, n_paths, seed=rng_seeds[i])
        ln_s = ln_s + inc
    est = float(np.mean(acc))
    se = float(np.std(acc, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return EepEstimate(value=est, stderr=se, n_paths=n_paths, seed=seed)


@dataclass
class EepBoundReport:
    """Surface-wide checks of the premium bounds: min of (P - P_e), max
    of (P - P_e - r K theta), and the largest violation of the premium
    being nonincreasing in log-price."""

    min_gap: float
    max_excess: float
    monotone_violation: float


def eep_bound_check(surface: PriceSurface) -> EepBoundReport:
    """Check 0 <= P - P_e <= r K theta and x-monotonicity of the premium
    on every stored node; returns the raw extremes."""
    diff = surface.american - surface.european
    K = surface.strike
    r = float(surface.diagnostics["short_rate"])
    bound = r * K * surface.thetas
    excess = diff - bound[:, None]
    mono = diff[:, 1:] - diff[:, :-1]
    return EepBoundReport(min_gap=float(diff.min()),
                          max_excess=float(excess.max()),
                          monotone_violation=float(max(mono.max(), 0.0)))


# ---------------------------------------------------------------------------
# binomial oracle (used by the command-line verifier)
# ---------------------------------------------------------------------------


def binomial_american_put(spot: float, strike: float, r: float, delta: float,
                          sigma: float, maturity: float, steps: int = 2000) -> float:
    """Cox-Ross-Rubinstein American put (no jumps), vectorised backward
    induction; reference for the diffusion-only solver path."""
    if sigma <= 0.0 or maturity <= 0.0 or steps < 1:
        raise ModelError("binomial oracle needs sigma > 0, maturity > 0, steps >= 1")
    dt = maturity / steps
    u = math.exp(sigma * math.sqrt(dt))
    d = 1.0 / u
    growth = math.exp((r - delta) * dt)
    p = (growth - d) / (u - d)
    if not (0.0 < p < 1.0):
        raise ModelError("binomial oracle unstable: risk-neutral weight outside (0, 1)")
    disc = math.exp(-r * dt)
    j = np.arange(steps + 1)
    s_nodes = spot * u ** (steps - 2.0 * j)
    v = np.maximum(strike - s_nodes, 0.0)
    for m in range(steps - 1, -1, -1):
        v = disc * (p * v[:-1] + (1.0 - p) * v[1:])
        s_nodes = spot * u ** (m - 2.0 * np.arange(m + 1))
        v = np.maximum(v, strike - s_nodes)
    return float(v[0])
