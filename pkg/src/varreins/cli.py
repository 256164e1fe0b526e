"""Command-line front end.

    varreins report                      base-case policy at t = 0
    varreins weul|geug --against dn|cn   welfare comparison
    varreins pelc --paths N              loss-coverage ratio by Monte Carlo
    varreins profile                     risk-return table (optimal, DN, CN)
    varreins sweep --axis A [--grid ..]  one CSV row per grid point

Parameters come from built-in defaults, then ``--config FILE`` (``key = value``
lines, ``#`` comments), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import analysis, simulate
from .errors import ConfigError, InvariantViolation, ParseError, UnknownKey, VarReinsError
from .market import BASE_BENCHMARK, BASE_MARKET, BASE_PRODUCT, BenchmarkSpec, MarketParams, ProductSpec
from .strategy import OptimalStrategy, constant_mix, solve_dn

COMMANDS = ("report", "weul", "geug", "pelc", "profile", "sweep")
AXES = ("b", "epsilon", "pi_B", "r", "T", "G_T")

# key -> (section, field, type); sections: m = market, p = product, k = benchmark, s = run settings
KEYS = {
    "r": ("m", "r", float), "mu1": ("m", "mu1", float), "mu2": ("m", "mu2", float),
    "sigma1": ("m", "sigma1", float), "sigma2": ("m", "sigma2", float), "rho": ("m", "rho", float),
    "v0": ("p", "v0", float), "T": ("p", "T", float), "G": ("p", "G_T", float), "epsilon": ("p", "epsilon", float),
    "b": ("p", "b", float), "pi_b": ("k", "pi_B", float),
    "paths": ("s", "paths", int), "steps": ("s", "steps", int), "seed": ("s", "seed", int), "out": ("s", "out", str),
    "against": ("s", "against", str), "axis": ("s", "axis", str), "grid": ("s", "grid", str),
    "jobs": ("s", "jobs", int), "welfare": ("s", "welfare", bool),
}
ALIASES = {"G_T": "G", "pi_B": "pi_b", "pi-b": "pi_b"}


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams = BASE_MARKET
    product: ProductSpec = BASE_PRODUCT
    benchmark: BenchmarkSpec = BASE_BENCHMARK
    command: str = "report"
    against: str = "dn"
    axis: str | None = None
    grid: tuple[float, ...] | None = None
    welfare: bool = False
    paths: int = 1_000_000
    steps: int = 1
    seed: int = 20240607
    out: str | None = None
    jobs: int = 1


def _convert(key: str, raw, typ):
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ParseError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ParseError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def read_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            key = ALIASES.get(key, key)
            if key not in KEYS:
                raise UnknownKey(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, val, KEYS[key][2])
    return values


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for key in ("r", "mu1", "mu2", "sigma1", "sigma2", "rho", "v0", "T", "G", "epsilon", "b"):
        common.add_argument(f"--{key}", type=float, default=argparse.SUPPRESS)
    common.add_argument("--pi-b", dest="pi_b", type=float, default=argparse.SUPPRESS)
    common.add_argument("--paths", type=int, default=argparse.SUPPRESS)
    common.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="CSV output path")
    common.add_argument("--config", default=None, help="key = value parameter file")

    p = argparse.ArgumentParser(prog="varreins", description=__doc__.splitlines()[0] if __doc__ else None,
                                parents=[common])
    sub = p.add_subparsers(dest="command")
    sub.add_parser("report", parents=[common])
    for name in ("weul", "geug"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--against", choices=("dn", "cn"), default=argparse.SUPPRESS)
    sub.add_parser("pelc", parents=[common])
    sub.add_parser("profile", parents=[common])
    sw = sub.add_parser("sweep", parents=[common])
    sw.add_argument("--axis", choices=AXES, default=argparse.SUPPRESS)
    sw.add_argument("--grid", default=argparse.SUPPRESS, help="comma-separated values")
    sw.add_argument("--welfare", action="store_true", default=argparse.SUPPRESS,
                    help="add WEUL/GEUG columns against DN and CN")
    sw.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    return p


def parse_config(args=None) -> RunConfig:
    """Build a RunConfig: defaults < config file < flags."""
    try:
        ns = _parser().parse_args(list(args) if args is not None else None)
    except SystemExit as exc:
        if exc.code == 0:  # --help
            raise
        raise ParseError("invalid command line (see usage above)") from None
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    values = read_config_file(ns.config) if ns.config else {}
    values.update(flags)
    return build_config(values, ns.command or "report")


def build_config(values: dict, command: str = "report") -> RunConfig:
    sections = {"m": {}, "p": {}, "k": {}, "s": {}}
    for key, val in values.items():
        key = ALIASES.get(key, key)
        if key not in KEYS:
            raise UnknownKey(f"unknown key {key!r}")
        sec, name, typ = KEYS[key]
        sections[sec][name] = _convert(key, val, typ)
    market = replace(BASE_MARKET, **sections["m"])
    product = replace(BASE_PRODUCT, **sections["p"])
    bench = replace(BASE_BENCHMARK, **sections["k"])
    s = dict(sections["s"])
    if "grid" in s:
        try:
            s["grid"] = tuple(float(x) for x in s["grid"].split(",") if x.strip())
        except ValueError:
            raise ParseError(f"grid: cannot parse {s['grid']!r}") from None
        if not s["grid"]:
            raise InvariantViolation("grid", "must not be empty")
    if s.get("against", "dn") not in ("dn", "cn"):
        raise InvariantViolation("against", "must be 'dn' or 'cn'")
    if "axis" in s and s["axis"] not in AXES:
        s["axis"] = {"pi_b": "pi_B", "G": "G_T"}.get(s["axis"], s["axis"])
        if s["axis"] not in AXES:
            raise InvariantViolation("axis", f"must be one of {', '.join(AXES)}")
    for key in ("paths", "steps", "jobs"):
        if key in s and s[key] < 1:
            raise InvariantViolation(key, "must be >= 1")
    if command == "sweep" and "axis" not in s:
        raise InvariantViolation("axis", "sweep needs --axis")
    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}")
    return RunConfig(market=market, product=product, benchmark=bench, command=command, **s)


# ------------------------------------------------------------------ formatting


def fmt(x) -> str:
    """6 significant digits, locale-independent."""
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.6g}"


def write_csv(rows, header, path: str | None, stream=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif stream is not None:
        stream.write(text)
    return text


# ------------------------------------------------------------------ commands


def base_case(cfg: RunConfig) -> dict:
    strat = OptimalStrategy.solve(cfg.market, cfg.product, cfg.benchmark)
    sol = strat.solution
    pol = strat.initial_policy()
    verdict = analysis.reinsurance_is_optimal(cfg.market, cfg.product.b)
    return {
        "strategy": strat,
        "lambda1": sol.lambda_star.lam[0], "lambda2": sol.lambda_star.lam[1],
        "pi_hat1": sol.pi_hat.pi_hat[0], "pi_hat2": sol.pi_hat.pi_hat[1],
        "v_f": sol.v_f, "k_eps": sol.k_eps, "regime": sol.binding.value,
        "alpha0": float(sol.exposure_multiplier(0.0, sol.v_f)),
        "pi_bar0": pol.pi_bar0, "pi_bar1": pol.pi_bar[0], "pi_bar2": pol.pi_bar[1],
        "phi_bar0": pol.phi_bar[0], "phi_bar1": pol.phi_bar[1], "phi_bar2": pol.phi_bar[2],
        "put_price": pol.put_price, "reinsurance_optimal": verdict.optimal,
        "sharpe1": verdict.sharpe1, "sharpe2": verdict.sharpe2,
        "expected_utility": sol.expected_utility(),
    }


def run_report(cfg: RunConfig, out=None) -> dict:
    out = out or sys.stdout
    rep = base_case(cfg)
    p = lambda x: f"{100 * x:.2f}%"  # noqa: E731
    lines = [
        f"regime: {rep['regime']}",
        f"lambda*: ({rep['lambda1']:.4g}, {rep['lambda2']:.4g})",
        f"pi_hat: ({rep['pi_hat1']:.4f}, {rep['pi_hat2']:.4f})",
        f"v_f = {rep['v_f']:.4f}, k_eps = {rep['k_eps']:.4f}, alpha(0) = {rep['alpha0']:.4f}",
        f"pi_bar(0): bond {p(rep['pi_bar0'])}, fund {p(rep['pi_bar1'])}, put {p(rep['pi_bar2'])}",
        f"phi_bar(0): ({rep['phi_bar0']:.2f}, {rep['phi_bar1']:.2f}, {rep['phi_bar2']:.2f})",
        f"put price: {rep['put_price']:.4f}",
        f"reinsurance optimal: {str(rep['reinsurance_optimal']).lower()}"
        f" (SR1 = {rep['sharpe1']:.4f}, SR2 = {rep['sharpe2']:.4f}, rho = {cfg.market.rho:.4f})",
        f"expected utility: {rep['expected_utility']:.4e}",
    ]
    out.write("\n".join(lines) + "\n")
    if cfg.out:
        keys = [k for k in rep if k != "strategy"]
        write_csv([(k, rep[k] if not isinstance(rep[k], bool) else str(rep[k]).lower()) for k in keys],
                  ["quantity", "value"], cfg.out)
    return rep


def _reference(cfg: RunConfig, which: str):
    if which == "dn":
        return solve_dn(cfg.market, cfg.product)
    return constant_mix(cfg.market, cfg.product)


def run_welfare(cfg: RunConfig, out=None) -> float:
    out = out or sys.stdout
    ref = _reference(cfg, cfg.against)
    if cfg.command == "weul":
        res = analysis.weul_root(ref, cfg.market, cfg.product)
        out.write(f"WEUL vs {cfg.against.upper()}: {1e4 * res.root:.2f}bp"
                  f" (iterations {res.iterations}, residual {res.residual:.1e})\n")
        rows = [("weul", res.root)]
    else:
        res = analysis.geug_root(ref, cfg.market, cfg.product)
        ann = analysis.annualized_guarantee(res.root, cfg.product.G_T, cfg.product.v0, cfg.product.T)
        out.write(f"GEUG vs {cfg.against.upper()}: {100 * res.root:.2f}%"
                  f" (annualized guarantee {100 * ann:.2f}%/yr; iterations {res.iterations},"
                  f" residual {res.residual:.1e})\n")
        rows = [("geug", res.root), ("annualized_guarantee", ann)]
    if cfg.out:
        write_csv(rows, ["quantity", "value"], cfg.out)
    return res.root


def _sim(cfg: RunConfig) -> simulate.SimConfig:
    return simulate.SimConfig(n_paths=cfg.paths, n_steps=cfg.steps, seed=cfg.seed)


def run_pelc(cfg: RunConfig, out=None) -> simulate.PelcResult:
    out = out or sys.stdout
    strat = OptimalStrategy.solve(cfg.market, cfg.product, cfg.benchmark)
    res = simulate.pelc(strat, _sim(cfg))
    lo, hi = res.ci
    out.write(f"PELC0 = {100 * res.pelc:.2f}% (95% CI {100 * lo:.2f}%..{100 * hi:.2f}%),"
              f" rho*PELC0 = {100 * res.rho_pelc:.2f}%\n")
    if cfg.out:
        write_csv([("pelc0", res.pelc), ("rho_pelc0", res.rho_pelc), ("numerator", res.numerator),
                   ("denominator", res.denominator), ("denominator_se", res.denominator_se)],
                  ["quantity", "value"], cfg.out)
    return res


def run_profile(cfg: RunConfig, out=None) -> list:
    out = out or sys.stdout
    m, spec = cfg.market, cfg.product
    strategies = [("optimal", OptimalStrategy.solve(m, spec, cfg.benchmark)), ("DN", solve_dn(m, spec)),
                  ("CN", constant_mix(m, spec))]
    rows = []
    for name, s in strategies:
        rr = simulate.risk_return_profile(s, _sim(cfg), spec, m)
        rows.append((name, rr.annual_return, rr.annual_std, rr.shortfall))
    out.write(f"{'strategy':<10}{'return':>10}{'std':>10}{'shortfall':>12}\n")
    for name, a, b, c in rows:
        out.write(f"{name:<10}{100 * a:>9.2f}%{100 * b:>9.2f}%{100 * c:>11.4f}%\n")
    if cfg.out:
        write_csv(rows, ["strategy", "annual_return", "annual_std", "shortfall"], cfg.out)
    return rows


# ------------------------------------------------------------------ sweep

SWEEP_COLUMNS = ["pi_bar0", "pi_bar1", "pi_bar2", "phi_bar2", "put_price", "pelc0", "expected_utility"]
WELFARE_COLUMNS = ["weul_dn", "weul_cn", "geug_dn", "geug_cn"]


def default_grid(axis: str, cfg: RunConfig) -> tuple[float, ...]:
    v0 = cfg.product.v0
    if axis == "b":
        return tuple(1.0 - rra for rra in (5.0, 7.5, 10.0, 12.5, 15.0))
    if axis == "epsilon":
        return tuple(round(0.001 * i, 6) for i in range(16))
    if axis == "pi_B":
        anchor = solve_dn(cfg.market, cfg.product).initial_weight()
        return tuple(anchor + d for d in (-0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15))
    if axis == "r":
        return (-0.02, -0.01, 0.0, 0.01, 0.02)
    if axis == "T":
        return (1.0, 5.0, 10.0, 15.0, 20.0)
    if axis == "G_T":
        return tuple(round(f * v0, 6) for f in (0.7, 0.8, 0.9, 1.0, 1.1))
    raise InvariantViolation("axis", f"unknown axis {axis!r}")


def _point_config(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "r":
        return replace(cfg, market=replace(cfg.market, r=value))
    if axis == "pi_B":
        return replace(cfg, benchmark=replace(cfg.benchmark, pi_B=value))
    return replace(cfg, product=replace(cfg.product, **{axis: value}))


def sweep_point(cfg: RunConfig, axis: str, value: float) -> list:
    """One CSV row; failures are caught and reported in the error column."""
    n_extra = len(WELFARE_COLUMNS) if cfg.welfare else 0
    try:
        pc = _point_config(cfg, axis, value)
        rep = base_case(pc)
        strat = rep["strategy"]
        errors = []
        try:
            pl = simulate.pelc(strat, _sim(pc)).pelc
        except VarReinsError as exc:  # e.g. no shortfall at all under portfolio insurance
            pl = None
            errors.append(f"pelc0: {type(exc).__name__}: {exc}")
        row = [value] + [rep[c] for c in SWEEP_COLUMNS[:5]] + [pl, rep["expected_utility"]]
        if cfg.welfare:
            dn, cn = solve_dn(pc.market, pc.product), constant_mix(pc.market, pc.product)
            for fn, ref, name in ((analysis.weul, dn, "weul_dn"), (analysis.weul, cn, "weul_cn"),
                                  (analysis.geug, dn, "geug_dn"), (analysis.geug, cn, "geug_cn")):
                try:
                    row.append(fn(ref, pc.market, pc.product))
                except VarReinsError as exc:
                    row.append(None)
                    errors.append(f"{name}: {type(exc).__name__}: {exc}")
        return row + ["; ".join(errors)]
    except (VarReinsError, ValueError) as exc:
        return [value] + [None] * (len(SWEEP_COLUMNS) + n_extra) + [f"{type(exc).__name__}: {exc}"]


def _sweep_task(job):
    return sweep_point(*job)


def run_sweep(cfg: RunConfig, out=None) -> tuple[list, bool]:
    out = out or sys.stdout
    axis = cfg.axis
    grid = cfg.grid or default_grid(axis, cfg)
    header = [axis] + SWEEP_COLUMNS + (WELFARE_COLUMNS if cfg.welfare else []) + ["error"]
    jobs = [(cfg, axis, v) for v in grid]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            rows = list(ex.map(_sweep_task, jobs))  # map preserves grid order
    else:
        rows = [_sweep_task(j) for j in jobs]
    write_csv(rows, header, cfg.out, stream=out)
    ok = all(row[-1] == "" for row in rows)
    return rows, ok


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    try:
        if cfg.command == "report":
            run_report(cfg)
        elif cfg.command in ("weul", "geug"):
            run_welfare(cfg)
        elif cfg.command == "pelc":
            run_pelc(cfg)
        elif cfg.command == "profile":
            run_profile(cfg)
        else:
            _, ok = run_sweep(cfg)
            if not ok:
                sys.stderr.write("error: some grid points failed, see the error column\n")
                return 1
    except VarReinsError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
