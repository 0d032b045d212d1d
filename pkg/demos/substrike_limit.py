"""Boundary limit below the strike under heavy upward jumps.

When d_plus = r - delta - integral of (e^y - 1)_+ is negative, waiting
near maturity stays profitable even with the spot below the strike, and
the exercise boundary converges to the root xi of phi0(x) = r K instead
of to K.  Here a single upward atom makes d_plus negative and xi has a
closed form.
"""

import numpy as np

from levyput import (
    CompoundPoisson,
    MarketParams,
    build_grid,
    d_plus,
    extract_boundary,
    limit_critical_price,
    make_model,
    phi0,
    solve_variational_inequality,
)


def main():
    market = MarketParams(r=0.03, delta=0.0, strike=100.0, maturity=0.5)
    model = make_model(market, sigma=0.3, nu=CompoundPoisson([(0.3, 1.2)]))

    dp = d_plus(model)
    xi = limit_critical_price(model)
    print("d_plus = %.4f  (negative: boundary limit sits below K)" % dp)
    print("xi = %.6f   phi0(xi) = %.6f   r K = %.6f"
          % (xi, phi0(model, xi), market.r * market.strike))

    grid = build_grid(model, n_x=4001, n_t=160, theta_min=5e-5)
    surface = solve_variational_inequality(model, grid)
    curve = extract_boundary(surface)

    print()
    print("%10s %12s %14s" % ("theta", "b(theta)", "b/xi - 1"))
    for th in (1e-1, 1e-2, 1e-3, 1e-4, 5e-5):
        b = float(np.interp(th, curve.thetas, curve.b))
        print("%10.1e %12.4f %14.5f" % (th, b, b / xi - 1.0))


if __name__ == "__main__":
    main()
