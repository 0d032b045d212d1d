"""Fractional boundary law for a negative tempered-stable model.

In the infinite-variation regime with stability index alpha in (1, 2)
and no diffusion, the boundary gap follows

    K - b(theta) ~ C * theta^(1/alpha) * |ln theta|^(1 - 1/alpha),

with C = K (eta0 Gamma(2 - alpha) / (alpha - 1))^(1/alpha).  This demo
uses a deliberately reduced grid so it finishes in about half a minute;
the bundled config configs/ts_asympt.ini carries the production
resolution.  Expect the fitted exponent within a few percent of 1/alpha
at this resolution.
"""

import numpy as np

from levyput import (
    MarketParams,
    TemperedStableNegative,
    build_grid,
    detect_regime,
    extract_boundary,
    fit_boundary_rate,
    make_model,
    solve_variational_inequality,
    stable_constants,
)


def main():
    alpha, eta0 = 1.5, 1.0
    market = MarketParams(r=0.06, delta=0.0, strike=100.0, maturity=0.5)
    model = make_model(market, sigma=0.0,
                       nu=TemperedStableNegative(alpha=alpha, eta0=eta0,
                                                 a0=-1.0))

    consts = stable_constants(alpha, eta0)
    print("alpha=%.2f  I_alpha=%.6f  rate constant C=%.4f"
          % (alpha, consts["I_alpha"], consts["rate_constant"]))

    regime = detect_regime(model)
    grid = build_grid(model, n_x=20001, n_t=120, theta_min=2e-4,
                      epsilon_jump=4e-4, drop_protect=2e-2)
    surface = solve_variational_inequality(model, grid)
    curve = extract_boundary(surface)

    print()
    print("%10s %12s %10s" % ("theta", "b(theta)", "K-b"))
    for th in np.geomspace(4e-4, 2e-2, 6):
        b = float(np.interp(th, curve.thetas, curve.b))
        print("%10.2e %12.4f %10.4f" % (th, b, market.strike - b))

    fit = fit_boundary_rate(curve, regime, window=(4e-4, 2e-2))
    print()
    print("log-log fit of (K-b)/|ln theta|^(1-1/alpha) over [4e-4, 2e-2]:")
    print("  exponent  %.4f   (theory %.4f)" % (fit.fitted_exponent,
                                                fit.theory_exponent))
    print("  constant  %.2f   (theory %.2f)" % (fit.fitted_constant,
                                                fit.theory_constant))
    print("  r-squared %.5f" % fit.r_squared)


if __name__ == "__main__":
    main()
