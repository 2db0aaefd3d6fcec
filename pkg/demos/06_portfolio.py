"""Turning covariance forecasts into portfolios.

Builds global minimum variance weights (unconstrained and long-only)
from a random-walk forecast path and reports realized volatility and
turnover against an equal-weight benchmark.

Run with:  python3 demos/06_portfolio.py
"""

import numpy as np

from spdcast import (
    WeightPath,
    annualized_std,
    avg_turnover,
    evaluate_portfolio,
    forecast_rw,
    gmv_long_only,
    gmv_weights,
    naive_weights,
    portfolio_returns,
    simulate_market,
)

WINDOW = 150


def main():
    series, returns = simulate_market(n=5, n_days=350, persistence=0.93, df=11, seed=9)
    test = range(WINDOW, len(series))
    dates = series.dates[WINDOW:]
    realized = returns[WINDOW:]

    print("example weights from one forecast")
    sigma = forecast_rw(series, WINDOW)
    w = gmv_weights(sigma)
    w_plus = gmv_long_only(sigma)
    print("  unconstrained:", np.round(w, 4), " sum", w.sum())
    print("  long-only:    ", np.round(w_plus, 4))
    if (w < 0).any():
        print("  (short position clipped by the long-only rule)")

    paths = {
        "gmv": WeightPath(dates, np.array([gmv_weights(forecast_rw(series, t)) for t in test])),
        "gmv_long": WeightPath(dates, np.array([gmv_long_only(forecast_rw(series, t)) for t in test])),
        "naive": WeightPath(dates, np.tile(naive_weights(5), (len(dates), 1))),
    }

    print()
    print(f"{'portfolio':<10} {'ann. vol':>9} {'turnover':>9}")
    for name, path in paths.items():
        stats = evaluate_portfolio(path, realized)
        print(f"{name:<10} {stats.annualized_std:>9.4f} {stats.avg_turnover:>9.4f}")

    print()
    r = portfolio_returns(paths["gmv"], realized)
    print("gmv daily return summary: mean {:.5f}, std {:.5f}".format(r.mean(), r.std()))
    print("annualized_std agrees with stats:",
          np.isclose(annualized_std(r), evaluate_portfolio(paths["gmv"], realized).annualized_std))
    print("static naive turnover is zero:",
          avg_turnover(paths["naive"], np.zeros_like(realized)) == 0.0)


if __name__ == "__main__":
    main()
