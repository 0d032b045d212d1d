"""Linear boundary law for a finite-variation pure-jump model.

With no diffusion and a single negative jump atom the relative gap
K/b(theta) - 1 is asymptotically linear in theta, with slope equal to
the negative-part integral of (e^y - 1) against the jump measure.  The
solver takes its exact lattice-advection branch here, so the only
discretisation error is the Bermudan projection at rung ends.
"""

import numpy as np

from levyput import (
    CompoundPoisson,
    MarketParams,
    build_grid,
    detect_regime,
    extract_boundary,
    fit_boundary_rate,
    make_model,
    rate_prediction,
    solve_variational_inequality,
)


def main():
    market = MarketParams(r=0.06, delta=0.0, strike=100.0, maturity=0.5)
    model = make_model(market, sigma=0.0, nu=CompoundPoisson([(-0.2, 5.0)]))

    regime = detect_regime(model)
    pred = rate_prediction(regime, market)
    print("regime: %s" % regime.tag.value)
    print("theoretical slope of K/b - 1 in theta: %.6f" % pred.constant)

    grid = build_grid(model, n_x=133501, n_t=120, theta_min=5e-4)
    surface = solve_variational_inequality(model, grid)
    curve = extract_boundary(surface)

    print()
    print("%10s %12s %14s %12s" % ("theta", "b(theta)", "(K/b-1)/theta",
                                   "(K/b_e-1)/theta"))
    for th in np.geomspace(5e-4, 2.5e-3, 5):
        b = float(np.interp(th, curve.thetas, curve.b))
        be = float(np.interp(th, curve.thetas, curve.b_e))
        K = market.strike
        print("%10.2e %12.4f %14.4f %12.4f"
              % (th, b, (K / b - 1.0) / th, (K / be - 1.0) / th))

    fit = fit_boundary_rate(curve, regime, window=(5e-4, 2.5e-3))
    print()
    print("log-log fit over theta in [5e-4, 2.5e-3]:")
    print("  exponent  %.4f   (theory %.1f)" % (fit.fitted_exponent,
                                                fit.theory_exponent))
    print("  constant  %.4f   (theory %.4f)" % (fit.fitted_constant,
                                                fit.theory_constant))
    print("  r-squared %.5f" % fit.r_squared)


if __name__ == "__main__":
    main()
