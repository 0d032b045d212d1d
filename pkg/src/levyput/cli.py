"""Batch front-end: load an experiment config, run it, and emit CSV
artifacts plus a machine-readable summary.

Subcommands: ``price``, ``boundary``, ``asympt``, ``simcheck``,
``verify``.  Every run writes ``summary.json`` listing each assertion it
evaluated with the measured value, target, and tolerance; CSV artifacts
follow fixed column orders with floats at 17 significant digits, so
reruns with the same config and seed are byte-identical.

Exit codes: 0 all assertions pass; 1 at least one assertion fails;
2 configuration error; 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .models import (
    ConvergenceError,
    DomainError,
    ModelError,
    NoJumps,
    TemperedStableNegative,
    d_plus,
    limit_critical_price,
    martingale_residual,
)
from .european import FourierPutPricer, black_scholes_put
from .american import (
    BoundaryCurve,
    PriceSurface,
    binomial_american_put,
    build_grid,
    eep_bound_check,
    extract_boundary,
    solve_variational_inequality,
)
from .asymptotics import (
    RegimeTag,
    detect_regime,
    divergence_check,
    fit_boundary_rate,
    rate_prediction,
)
from .simulation import (
    compensation_check,
    martingale_check,
    positive_part_growth,
    small_time_drift_check,
    stable_limit_check,
)
from .config import ConfigError, ExperimentConfig, load_config

_NUMERIC_ERRORS = (ConvergenceError, DomainError, FloatingPointError,
                   np.linalg.LinAlgError, ZeroDivisionError, ValueError)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------


def _g(v) -> str:
    return "%.17g" % float(v)


def _write_csv(out_dir: str, name: str, header: Sequence[str],
               rows) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_g(v) for v in row) + "\n")
    return name


def _thin(n: int, target: int) -> np.ndarray:
    """Deterministic index subset: fixed stride plus the last point."""
    stride = max(1, (n - 1) // max(target, 1))
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def _write_boundary(out_dir: str, curve: BoundaryCurve) -> str:
    rows = zip(curve.thetas, curve.b, curve.b_e, curve.zeta)
    return _write_csv(out_dir, "boundary.csv", ("theta", "b", "b_e", "zeta"), rows)


def _write_surface(out_dir: str, surface: PriceSurface) -> str:
    x = surface.grid.x_nodes
    ith = _thin(surface.thetas.size, 80)
    ix = _thin(x.size, 160)

    def rows():
        for j in ith:
            th = surface.thetas[j]
            for i in ix:
                am = surface.american[j, i]
                eu = surface.european[j, i]
                yield (th, x[i], am, eu, am - eu)

    return _write_csv(out_dir, "surface.csv",
                      ("theta", "x", "american", "european", "premium"), rows())


def _write_summary(out_dir: str, payload: Dict[str, object]) -> None:
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# assertion plumbing
# ---------------------------------------------------------------------------


class _Suite:
    """Collects named assertions with measured value, target, tolerance."""

    def __init__(self):
        self.records: List[Dict[str, object]] = []

    def close(self, name: str, value: float, target: float, tol: float) -> bool:
        ok = math.isfinite(float(value)) and abs(value - target) <= tol
        return self._add(name, value, target, tol, ok)

    def at_most(self, name: str, value: float, bound: float, tol: float = 0.0) -> bool:
        ok = math.isfinite(float(value)) and value <= bound + tol
        return self._add(name, value, bound, tol, ok)

    def at_least(self, name: str, value: float, bound: float, tol: float = 0.0) -> bool:
        ok = math.isfinite(float(value)) and value >= bound - tol
        return self._add(name, value, bound, tol, ok)

    def _add(self, name, value, target, tol, ok) -> bool:
        self.records.append({
            "name": name,
            "value": float(value),
            "target": float(target),
            "tolerance": float(tol),
            "pass": bool(ok),
        })
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.records)


def _surface_assertions(suite: _Suite, surface: PriceSurface,
                        curve: BoundaryCurve) -> None:
    """Structural invariants every solved surface must satisfy."""
    K = surface.strike
    x = surface.grid.x_nodes
    s_nodes = np.exp(x)
    psi = surface.payoff
    am, eu = surface.american, surface.european
    slack = 1e-9 * K

    suite.at_least("payoff_dominance_min", float((am - psi).min()), 0.0, slack)
    rep = eep_bound_check(surface)
    suite.at_least("premium_nonnegative_min", rep.min_gap, 0.0, slack)
    suite.at_most("premium_cap_excess", rep.max_excess, 0.0, slack)
    suite.at_most("theta_monotonicity_violation", rep.monotone_violation,
                  0.0, 1e-7 * K)
    dS = np.diff(s_nodes)
    suite.at_most("spot_monotonicity_violation",
                  float(np.diff(am, axis=1).max()), 0.0, slack)
    # convexity in spot: each interior value must sit at or below the
    # chord through its neighbours (excess measured in currency)
    w = dS[1:] / (s_nodes[2:] - s_nodes[:-2])
    chord = w * am[:, :-2] + (1.0 - w) * am[:, 2:]
    suite.at_most("spot_convexity_violation",
                  float((am[:, 1:-1] - chord).max()), 0.0, slack)
    comp = float(surface.diagnostics.get("comp_resid_max", 0.0))
    suite.at_most("complementarity_residual", comp, 1e-8 * K)
    suite.at_most("martingale_defect",
                  float(surface.grid.martingale_defect), 0.0, 1e-10)

    fin = np.isfinite(curve.b) & np.isfinite(curve.b_e)
    if fin.any():
        b, be = curve.b[fin], curve.b_e[fin]
        cell = math.expm1(surface.grid.dx)
        suite.at_least("boundary_positive_min", float(b.min()), 0.0, 0.0)
        suite.at_most("boundary_vs_european_max",
                      float((b - be).max()), 0.0, cell * K)
        suite.at_most("boundary_below_strike_max", float(b.max()), K, slack)
        if b.size > 1:
            suite.at_most("boundary_nonincreasing_violation",
                          float(np.diff(b).max()), 0.0, cell * K)


def _diagnostics(surface: PriceSurface) -> Dict[str, object]:
    keep = {}
    for key in ("branch", "comp_resid_max", "policy_iters_max"):
        if key in surface.diagnostics:
            val = surface.diagnostics[key]
            keep[key] = val if isinstance(val, str) else float(val)
    rungs = surface.diagnostics.get("rungs")
    if rungs:
        keep["time_rungs"] = len(rungs)
        keep["substeps"] = int(sum(int(row.get("n_sub", 1)) for row in rungs))
    keep["martingale_defect"] = float(surface.grid.martingale_defect)
    keep["n_x"] = int(surface.grid.x_nodes.size)
    keep["n_thetas_stored"] = int(surface.thetas.size)
    return keep


def _solve(cfg: ExperimentConfig) -> Tuple[PriceSurface, BoundaryCurve]:
    try:
        grid = build_grid(cfg.model, **cfg.grid_options)
    except ModelError as exc:
        # grid parameters come straight from the [grid] section, so a
        # rejected combination is a configuration problem, not a numeric one
        raise ConfigError("%s: [grid] %s" % (cfg.path, exc)) from exc
    surface = solve_variational_inequality(cfg.model, grid)
    return surface, extract_boundary(surface)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _default_spots(K: float) -> Tuple[float, ...]:
    return (0.8 * K, K, 1.2 * K)


def _run_price(cfg: ExperimentConfig, suite: _Suite, out_dir: str):
    mk = cfg.model.market
    theta = float(cfg.options.get("theta", mk.maturity))
    if not (0.0 < theta <= mk.maturity):
        raise ConfigError("%s: [experiment] theta must lie in (0, maturity]"
                          % cfg.path)
    spots = cfg.options.get("spots", _default_spots(mk.strike))
    surface, curve = _solve(cfg)
    pricer = FourierPutPricer(cfg.model, theta)
    quotes = []
    for s in spots:
        am = surface.value(theta, s)
        eu_pde = surface.european_value(theta, s)
        eu = pricer.price(s)
        quotes.append({"spot": float(s), "american": am, "european": eu,
                       "premium": am - eu})
        tag = _g(s)
        suite.at_least("american_above_intrinsic[%s]" % tag,
                       am - max(mk.strike - s, 0.0), 0.0, 1e-9 * mk.strike)
        suite.at_least("premium_nonnegative[%s]" % tag, am - eu, 0.0,
                       5e-3 * mk.strike)
        suite.at_most("premium_cap[%s]" % tag, am - eu,
                      mk.r * mk.strike * theta, 5e-3 * mk.strike)
        suite.close("european_pde_vs_fourier[%s]" % tag, eu_pde, eu,
                    5e-3 * mk.strike)
    artifacts = [_write_surface(out_dir, surface)]
    return {"quotes": quotes, "theta": theta}, artifacts, surface, curve


def _run_boundary(cfg: ExperimentConfig, suite: _Suite, out_dir: str):
    surface, curve = _solve(cfg)
    _surface_assertions(suite, surface, curve)
    artifacts = [_write_boundary(out_dir, curve),
                 _write_surface(out_dir, surface)]
    return {}, artifacts, surface, curve


def _run_asympt(cfg: ExperimentConfig, suite: _Suite, out_dir: str):
    mk = cfg.model.market
    surface, curve = _solve(cfg)
    _surface_assertions(suite, surface, curve)
    regime = detect_regime(cfg.model)
    th = curve.thetas
    lo = float(cfg.options.get("window_lo", max(1e-4 * mk.maturity, th[0])))
    hi = float(cfg.options.get("window_hi", min(1e-2 * mk.maturity, th[-1])))
    exp_tol = float(cfg.options.get("exponent_tol", 0.1))
    const_rtol = float(cfg.options.get("constant_rtol", 0.3))
    extra: Dict[str, object] = {"regime": regime.tag.value}
    fit_rows = []
    if regime.tag is RegimeTag.LIMIT_BELOW_STRIKE:
        xi = regime.params["xi"]
        b0 = float(curve.b[np.isfinite(curve.b)][0])
        suite.close("boundary_limit_vs_xi", b0, xi, 0.02 * xi)
        fit_rows.append((0.0, float(th[0]), 0.0, mk.strike - b0,
                         mk.strike - xi, 1.0))
        extra["xi"] = xi
    elif regime.tag is RegimeTag.INFINITE_VARIATION_OTHER:
        rep = divergence_check(curve, window=(lo, hi))
        growth_min = float(cfg.options.get("growth_min", 3.0))
        suite.at_least("relative_gap_rate_growth", rep.growth_factor,
                       growth_min)
        suite.at_least("relative_gap_rate_increasing",
                       1.0 if rep.increasing else 0.0, 1.0)
        lg = np.polyfit(np.log(rep.thetas), np.log(rep.g), 1)
        fit_rows.append((lo, hi, float(lg[0]), float(rep.g[-1]),
                         math.nan, math.nan))
        extra["growth_factor"] = rep.growth_factor
    else:
        fit = fit_boundary_rate(curve, regime, (lo, hi))
        suite.close("fitted_exponent", fit.fitted_exponent,
                    fit.theory_exponent, exp_tol)
        suite.close("fitted_constant_ratio",
                    fit.fitted_constant / fit.theory_constant, 1.0, const_rtol)
        suite.at_least("fit_r_squared", fit.r_squared, 0.9)
        fit_rows.append((fit.window[0], fit.window[1], fit.fitted_exponent,
                         fit.fitted_constant, fit.theory_constant,
                         fit.r_squared))
        extra["fit"] = {
            "fitted_exponent": fit.fitted_exponent,
            "fitted_constant": fit.fitted_constant,
            "intercept_constant": fit.intercept_constant,
            "theory_exponent": fit.theory_exponent,
            "theory_constant": fit.theory_constant,
            "n_points": fit.n_points,
        }

    def rows():
        for row in fit_rows:
            yield row

    path = os.path.join(out_dir, "fits.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("regime,window_lo,window_hi,exponent,constant,target,r2\n")
        for row in fit_rows:
            fh.write(regime.tag.value + "," + ",".join(_g(v) for v in row) + "\n")
    artifacts = ["fits.csv", _write_boundary(out_dir, curve)]
    return extra, artifacts, surface, curve


def _run_simcheck(cfg: ExperimentConfig, suite: _Suite, out_dir: str):
    model = cfg.model
    mk = model.market
    seed = cfg.seed
    n = int(cfg.options.get("n_paths", 200_000))
    t_values = cfg.options.get("t_values", (1e-3, 1e-4))
    eps = float(cfg.grid_options.get("epsilon_jump", 1e-3))
    reports = []
    names = []

    def push(name: str, rep, z_tol: Optional[float]) -> None:
        names.append(name)
        reports.append(rep)
        if z_tol is not None:
            suite.at_most("zscore[%s]" % name, abs(rep.zscore), z_tol)

    if model.nu.total_mass() != 0.0:
        rep = compensation_check(
            model, lambda y: np.square(np.expm1(y)), t=mk.maturity,
            n=n, seed=seed, epsilon=eps)
        push("compensation", rep, 3.0)
    push("martingale", martingale_check(model, t=mk.maturity, n=n,
                                        seed=seed, epsilon=eps), 4.0)
    if model.nu.finite_variation and model.nu.total_mass() != 0.0:
        for rep in small_time_drift_check(model, t_values, n=n, seed=seed,
                                          epsilon=eps):
            push("%s[t=%s]" % (rep.name, _g(rep.t)), rep, 3.5)
    pp_reports, growth = positive_part_growth(model, t_values, n=n, seed=seed,
                                              epsilon=eps)
    for rep in pp_reports:
        z_tol = None
        if isinstance(model.nu, NoJumps) and model.sigma > 0.0:
            name = "positive_part[t=%s]" % _g(rep.t)
            names.append(name)
            reports.append(rep)
            suite.close("positive_part_ratio[t=%s]" % _g(rep.t),
                        rep.estimate / rep.target, 1.0, 0.05)
            continue
        push("positive_part[t=%s]" % _g(rep.t), rep, z_tol)
    extra: Dict[str, object] = {"positive_part_growth_exponent": growth,
                                "rows": names}
    rows = [(r.t, r.estimate, r.stderr, r.target, r.zscore) for r in reports]

    if isinstance(model.nu, TemperedStableNegative) and model.sigma == 0.0 \
            and 1.0 < model.nu.alpha < 2.0:
        t_st = min(t_values)
        st = stable_limit_check(model, (t_st,), n=max(n, 100_000), seed=seed)
        sup = st[0].sup_diff
        suite.at_most("stable_limit_sup_error", sup, 0.05)
        names.append("stable_limit[t=%s]" % _g(t_st))
        rows.append((t_st, sup, 0.0, 0.0, 0.0))
        extra["rows"] = names
    artifacts = [_write_csv(out_dir, "simreport.csv",
                            ("t", "estimate", "stderr", "target", "zscore"),
                            rows)]
    return extra, artifacts, None, None


def _run_verify(cfg: ExperimentConfig, suite: _Suite, out_dir: str):
    model = cfg.model
    mk = model.market
    spots = cfg.options.get("spots", _default_spots(mk.strike))
    surface, curve = _solve(cfg)
    _surface_assertions(suite, surface, curve)
    suite.at_most("martingale_residual", martingale_residual(model), 0.0, 1e-10)
    theta = mk.maturity
    pricer = FourierPutPricer(model, theta, abs_tol=1e-9)
    is_bs = isinstance(model.nu, NoJumps) and model.sigma > 0.0
    for s in spots:
        tag = _g(s)
        eu = pricer.price(s)
        suite.close("european_pde_vs_fourier[%s]" % tag,
                    surface.european_value(theta, s), eu, 5e-3 * mk.strike)
        if is_bs:
            cf = black_scholes_put(s, mk.strike, mk.r, mk.delta,
                                   model.sigma, theta)
            suite.close("fourier_vs_closed_form[%s]" % tag, eu, cf, 1e-8)
            crr = binomial_american_put(s, mk.strike, mk.r, mk.delta,
                                        model.sigma, theta, 2000)
            am = surface.value(theta, s)
            suite.close("american_vs_binomial_rel[%s]" % tag,
                        am / crr if crr > 0 else am, 1.0, 5e-3)
    if d_plus(model) < 0.0:
        xi = limit_critical_price(model)
        b0 = float(curve.b[np.isfinite(curve.b)][0])
        suite.close("boundary_limit_vs_xi", b0, xi, 0.02 * xi)
    artifacts = [_write_boundary(out_dir, curve),
                 _write_surface(out_dir, surface)]
    return {"is_black_scholes": is_bs}, artifacts, surface, curve


_RUNNERS = {
    "price": _run_price,
    "boundary": _run_boundary,
    "asympt": _run_asympt,
    "simcheck": _run_simcheck,
    "verify": _run_verify,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit code."""
    out_dir = cfg.output_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output directory %r is not writable: %s"
                          % (out_dir, exc)) from exc
    suite = _Suite()
    try:
        extra, artifacts, surface, _ = _RUNNERS[cfg.kind](cfg, suite, out_dir)
    except ConfigError:
        raise
    except _NUMERIC_ERRORS as exc:
        diag = {"error": "%s: %s" % (type(exc).__name__, exc)}
        _write_summary(out_dir, {
            "assertions": suite.records, "config": cfg.raw,
            "diagnostics": diag, "experiment": cfg.kind, "passed": False,
            "seed": cfg.seed, "status": "numerical-failure",
        })
        print("numerical failure: %s" % diag["error"], file=sys.stderr)
        return 3
    payload: Dict[str, object] = {
        "artifacts": sorted(artifacts),
        "assertions": suite.records,
        "config": cfg.raw,
        "experiment": cfg.kind,
        "passed": suite.passed,
        "seed": cfg.seed,
        "status": "ok" if suite.passed else "assertions-failed",
    }
    payload.update({k: v for k, v in extra.items()})
    if surface is not None:
        payload["diagnostics"] = _diagnostics(surface)
    _write_summary(out_dir, payload)
    n_fail = sum(0 if r["pass"] else 1 for r in suite.records)
    print("%s: %d assertion(s), %d failed -> %s" %
          (cfg.kind, len(suite.records), n_fail, os.path.join(out_dir, "summary.json")))
    return 0 if suite.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="levyput",
        description="American put pricing and boundary asymptotics harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("price", "price the configured model at requested spots"),
            ("boundary", "solve and extract the exercise boundary"),
            ("asympt", "fit the boundary against its near-maturity law"),
            ("simcheck", "Monte Carlo checks of the probabilistic limits"),
            ("verify", "full oracle and invariant battery")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=1,
                       help="reserved; single-threaded either way")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.command, out=args.out,
                          seed=args.seed)
        return run(cfg)
    except ConfigError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
