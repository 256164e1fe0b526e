"""Print the base-case policy, welfare comparisons and PELC."""

import sys

from varreins import analysis, cli
from varreins.simulate import SimConfig, pelc
from varreins.strategy import constant_mix, solve_dn


def main() -> int:
    cfg = cli.RunConfig()
    rep = cli.run_report(cfg)
    m, spec = cfg.market, cfg.product
    for name, ref in (("DN", solve_dn(m, spec)), ("CN", constant_mix(m, spec))):
        r = analysis.compare(ref, m, spec)
        print(f"vs {name}: WEUL {1e4 * r.weul:.2f}bp, GEUG {100 * r.geug:.2f}%"
              f" ({100 * r.diagnostics['annualized_guarantee']:.2f}%/yr)")
    res = pelc(rep["strategy"], SimConfig(n_paths=cfg.paths, n_steps=1, seed=cfg.seed))
    lo, hi = res.ci
    print(f"PELC0 {100 * res.pelc:.2f}% (95% CI {100 * lo:.2f}..{100 * hi:.2f}), rho*PELC0 {100 * res.rho_pelc:.2f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
