"""American put pricing in the pure-diffusion special case.

Solves the variational inequality on a modest lattice, then checks the
European leg against the closed form and the American leg against a
2000-step binomial tree.  Also prints the early-exercise boundary at a
few times to maturity: for a diffusion the gap K - b(theta) shrinks
like sigma K sqrt(theta |ln theta|).
"""

import math

import numpy as np

from levyput import (
    MarketParams,
    binomial_american_put,
    black_scholes_put,
    build_grid,
    extract_boundary,
    make_model,
    solve_variational_inequality,
)


def main():
    market = MarketParams(r=0.05, delta=0.0, strike=100.0, maturity=0.5)
    model = make_model(market, sigma=0.3)

    grid = build_grid(model, n_x=2001, n_t=600)
    surface = solve_variational_inequality(model, grid)
    curve = extract_boundary(surface)

    theta = market.maturity
    print("--- American put, sigma=0.30, r=5%, K=100, T=0.5 ---")
    print("%8s %12s %12s %12s %12s" % ("spot", "american", "binomial",
                                       "european", "closed-form"))
    for spot in (80.0, 90.0, 100.0, 110.0, 120.0):
        am = surface.value(theta, spot)
        crr = binomial_american_put(spot, market.strike, market.r,
                                    market.delta, model.sigma, theta, 2000)
        eu = surface.european_value(theta, spot)
        cf = black_scholes_put(spot, market.strike, market.r, market.delta,
                               model.sigma, theta)
        print("%8.1f %12.6f %12.6f %12.6f %12.6f" % (spot, am, crr, eu, cf))

    print()
    print("--- exercise boundary vs the diffusion gap law ---")
    print("%10s %12s %14s %10s" % ("theta", "b(theta)", "K-b", "gap/law"))
    for th in (1e-1, 1e-2, 1e-3, 1e-4):
        b = float(np.interp(th, curve.thetas, curve.b))
        law = model.sigma * market.strike * math.sqrt(th * abs(math.log(th)))
        print("%10.1e %12.4f %14.4f %10.3f"
              % (th, b, market.strike - b, (market.strike - b) / law))


if __name__ == "__main__":
    main()
