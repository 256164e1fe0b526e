"""Risk-return profiles of the optimal, DN and CN strategies.

Usage: python scripts/risk_return.py [n_paths] [gross|log]
"""

import sys

from varreins.market import BASE_BENCHMARK, BASE_MARKET, BASE_PRODUCT
from varreins.simulate import SimConfig, risk_return_profile
from varreins.strategy import OptimalStrategy, constant_mix, solve_dn


def main(argv) -> int:
    n = int(float(argv[0])) if argv else 1_000_000
    convention = argv[1] if len(argv) > 1 else "gross"
    m, spec = BASE_MARKET, BASE_PRODUCT
    cfg = SimConfig(n_paths=n, n_steps=1)
    strategies = [("optimal", OptimalStrategy.solve(m, spec, BASE_BENCHMARK)), ("DN", solve_dn(m, spec)),
                  ("CN", constant_mix(m, spec))]
    print(f"{'':<10}{'return':>10}{'std':>10}{'shortfall':>12}")
    for name, s in strategies:
        rr = risk_return_profile(s, cfg, spec, m, std_convention=convention)
        print(f"{name:<10}{100 * rr.annual_return:>9.2f}%{100 * rr.annual_std:>9.2f}%{100 * rr.shortfall:>11.5f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
