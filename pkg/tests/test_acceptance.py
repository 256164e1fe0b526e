"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Tolerances are the stated ones.  Criteria that the model cannot meet are left
failing (see the decisions ledger for the analysis).
"""

import filecmp
import math
import time

import numpy as np
from scipy.special import ndtr

import conftest
from varreins import analysis, cli
from varreins.dual import merton_policy, optimal_dual_vector
from varreins.market import BASE_BENCHMARK, BASE_MARKET, BASE_PRODUCT, put_delta, put_price
from varreins.simulate import Put, SimConfig, generate, pelc, replication_check, risk_return_profile, terminal_wealth
from varreins.strategy import OptimalStrategy, constant_mix, solve_dn

M, PROD, BENCH = BASE_MARKET, BASE_PRODUCT, BASE_BENCHMARK


def record(n, title, checks):
    """checks: list of (label, ok, detail).  Emits one line and returns overall success."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} {d}{'' if good else ' [miss]'}" for label, good, d in checks)
    line = f"criterion {n} {title}: {'PASS' if ok else 'FAIL'} -- {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def within(x, target, tol):
    return abs(x - target) <= tol


def test_criterion_1_base_case_policy():
    t0 = time.perf_counter()
    strat = OptimalStrategy.solve(M, PROD, BENCH)
    pol = strat.initial_policy()
    elapsed = time.perf_counter() - t0
    w = pol.weights
    checks = [
        ("pi_bar0", within(w[0], 0.6395, 0.0010), f"{100 * w[0]:.4f}% (63.95 +-0.10pp)"),
        ("pi_bar1", within(w[1], 0.3348, 0.0010), f"{100 * w[1]:.4f}% (33.48 +-0.10pp)"),
        ("pi_bar2", within(w[2], 0.0257, 0.0010), f"{100 * w[2]:.4f}% (2.57 +-0.10pp)"),
        ("phi_bar1", within(pol.phi_bar[1], 33.48, 0.05), f"{pol.phi_bar[1]:.4f} (33.48 +-0.05)"),
        ("phi_bar2", within(pol.phi_bar[2], 0.67, 0.01), f"{pol.phi_bar[2]:.4f} (0.67 +-0.01)"),
        ("put", within(pol.put_price, 3.85, 0.02), f"{pol.put_price:.4f} (3.85 +-0.02)"),
        ("runtime", elapsed < 1.0, f"{elapsed:.3f}s (<1s)"),
    ]
    assert record(1, "base-case policy", checks)


def test_criterion_2_dn_anchor():
    t0 = time.perf_counter()
    w = solve_dn(M, PROD).initial_weight()
    elapsed = time.perf_counter() - t0
    checks = [("DN weight", within(w, 0.2947, 0.0005), f"{100 * w:.4f}% (29.47 +-0.05pp)"),
              ("runtime", elapsed < 1.0, f"{elapsed:.3f}s (<1s)")]
    assert record(2, "DN anchor", checks)


def test_criterion_3_weul():
    t0 = time.perf_counter()
    l_dn = analysis.weul(solve_dn(M, PROD), M, PROD)
    l_cn = analysis.weul(constant_mix(M, PROD), M, PROD)
    elapsed = time.perf_counter() - t0
    checks = [("vs DN", within(l_dn, 0.0025, 0.0003), f"{1e4 * l_dn:.2f}bp (25 +-3bp)"),
              ("vs CN", within(l_cn, 0.0588, 0.0010), f"{1e4 * l_cn:.2f}bp (588 +-10bp)"),
              ("runtime", elapsed < 10.0, f"{elapsed:.2f}s (<10s)")]
    assert record(3, "WEUL", checks)


def test_criterion_4_geug():
    t0 = time.perf_counter()
    g_dn = analysis.geug(solve_dn(M, PROD), M, PROD)
    g_cn = analysis.geug(constant_mix(M, PROD), M, PROD)
    elapsed = time.perf_counter() - t0
    a_dn = analysis.annualized_guarantee(g_dn, PROD.G_T, PROD.v0, PROD.T)
    a_cn = analysis.annualized_guarantee(g_cn, PROD.G_T, PROD.v0, PROD.T)
    identity = all(math.isclose(a, ((1 + g) * PROD.G_T / PROD.v0) ** (1 / PROD.T) - 1, rel_tol=1e-12)
                   for a, g in ((a_dn, g_dn), (a_cn, g_cn)))
    checks = [("vs DN", within(g_dn, 0.1008, 0.0015), f"{100 * g_dn:.3f}% (10.08 +-0.15pp)"),
              ("vs CN", within(g_cn, 0.2809, 0.003), f"{100 * g_cn:.3f}% (28.09 +-0.3pp)"),
              # quoted figures are rounded to two (0.96) and one (2.5) decimals
              ("annualized DN", within(a_dn, 0.0096, 0.0001), f"{100 * a_dn:.4f}%/yr (0.96)"),
              ("annualized CN", within(a_cn, 0.025, 0.0005), f"{100 * a_cn:.4f}%/yr (~2.5)"),
              ("(1+g)^(1/T) identity", identity, "checked"),
              ("runtime", elapsed < 10.0, f"{elapsed:.2f}s (<10s)")]
    assert record(4, "GEUG", checks)


def test_criterion_5_risk_return_shortfall():
    n = 1_000_000
    cfg = SimConfig(n_paths=n, n_steps=1)
    ens = generate(cfg, M, PROD)
    strat, dn, cn = OptimalStrategy.solve(M, PROD, BENCH), solve_dn(M, PROD), constant_mix(M, PROD)
    se = math.sqrt(0.005 * 0.995 / n)
    checks = []
    for name, s in (("opt", strat), ("DN", dn)):
        exact = s.solution.shortfall()
        mc = float((terminal_wealth(s, ens) < PROD.G_T).mean())
        checks.append((f"{name} exact", within(exact, 0.005, 1e-10), f"{100 * exact:.6f}%"))
        checks.append((f"{name} MC", within(mc, 0.005, 3 * se), f"{100 * mc:.4f}% (0.5 +-3se={100 * 3 * se:.4f}pp)"))
    q_cn = cn.shortfall()
    checks.append(("CN closed form", within(q_cn, 0.0011e-2, 1e-5), f"{100 * q_cn:.5f}% (0.0011% +-1e-5)"))
    assert record(5, "shortfall probabilities", checks)


def test_criterion_5_risk_return_profile_informational():
    # return/std lines are reported against +-0.3pp but not gated
    cfg = SimConfig(n_paths=1_000_000, n_steps=1)
    reported = {"opt": (0.0611, 0.1285), "DN": (0.0606, 0.1271), "CN": (0.0356, 0.0505)}
    parts = []
    for name, s in (("opt", OptimalStrategy.solve(M, PROD, BENCH)), ("DN", solve_dn(M, PROD)),
                    ("CN", constant_mix(M, PROD))):
        rr = risk_return_profile(s, cfg, PROD, M)
        tr, ts = reported[name]
        ok = within(rr.annual_return, tr, 0.003) and within(rr.annual_std, ts, 0.003)
        parts.append(f"{name} {100 * rr.annual_return:.2f}%/{100 * rr.annual_std:.2f}%"
                     f" ({100 * tr:.2f}/{100 * ts:.2f}){'' if ok else ' [outside 0.3pp]'}")
    line = "criterion 5 return/std (not gated): INFO -- " + "; ".join(parts)
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_6_pelc():
    t0 = time.perf_counter()
    res = pelc(OptimalStrategy.solve(M, PROD, BENCH), SimConfig(n_paths=1_000_000, n_steps=1))
    elapsed = time.perf_counter() - t0
    lo, hi = res.ci
    checks = [("PELC0", within(res.pelc, 1.3852, 0.03),
               f"{100 * res.pelc:.2f}% [CI {100 * lo:.1f}..{100 * hi:.1f}] (138.52 +-3pp)"),
              ("rho*PELC0", within(res.rho_pelc, 1.1082, 0.03), f"{100 * res.rho_pelc:.2f}% (110.82 +-3pp)"),
              ("runtime", elapsed < 60.0, f"{elapsed:.2f}s (<60s)")]
    assert record(6, "PELC", checks)


def _sweep(axis, grid, **over):
    cfg = cli.build_config({"paths": 1_000_000, "axis": axis, **over}, "sweep")
    return [cli.sweep_point(cfg, axis, v) for v in grid]


def _strictly(xs, sign):
    return all(sign * (b - a) > 0 for a, b in zip(xs, xs[1:]))


def test_criterion_7_sensitivity_directions():
    cfg = cli.RunConfig()
    rows_b = _sweep("b", cli.default_grid("b", cfg))  # RRA increasing along the grid
    rows_e = _sweep("epsilon", cli.default_grid("epsilon", cfg), T=5.0)
    rows_g = _sweep("G_T", cli.default_grid("G_T", cfg))
    rows_r = _sweep("r", cli.default_grid("r", cfg))
    pi1_b = [r[2] for r in rows_b]
    pi2_e = [r[3] for r in rows_e]
    # PELC is undefined at eps = 0 (portfolio insurance leaves no expected shortfall)
    pelc_e = [r[6] for r in rows_e if r[6] is not None]
    pi2_g = [r[3] for r in rows_g]
    risky_r = [r[2] for r in rows_r]
    checks = [("pi_bar1 down in RRA", _strictly(pi1_b, -1), " ".join(f"{x:.4f}" for x in pi1_b)),
              ("pi_bar2 up in eps (T=5)", _strictly(pi2_e, +1), f"{pi2_e[0]:.5f}..{pi2_e[-1]:.5f}"),
              ("PELC0 down in eps (T=5)", _strictly(pelc_e, -1) and len(pelc_e) == len(rows_e) - 1,
               f"{len(pelc_e)} defined points, {pelc_e[0]:.3f}..{pelc_e[-1]:.3f}"),
              ("pi_bar2 up in G_T", _strictly(pi2_g, +1), " ".join(f"{x:.5f}" for x in pi2_g)),
              ("risky weight down in r", _strictly(risky_r, -1), " ".join(f"{x:.4f}" for x in risky_r))]
    assert record(7, "sensitivity directions", checks)


def test_criterion_8_property_suite(tmp_path):
    t0 = time.perf_counter()
    strat = OptimalStrategy.solve(M, PROD, BENCH)
    sol = strat.solution
    checks = []

    res = sol.residuals()
    checks.append(("residuals", res["budget"] < 1e-10 and res["probability"] < 1e-10,
                   f"{res['budget']:.1e}/{res['probability']:.1e}"))
    n = 1_000_000
    ens = generate(SimConfig(n_paths=n, n_steps=1), M, PROD)
    f = terminal_wealth(sol, ens)
    x = ens.kernel()[:, -1] * f
    budget_ok = abs(x.mean() - PROD.v0) < 3 * x.std() / math.sqrt(n)
    short_ok = abs((f < PROD.G_T).mean() - PROD.epsilon) < 3 * math.sqrt(PROD.epsilon * (1 - PROD.epsilon) / n)
    checks.append(("MC budget/shortfall", budget_ok and short_ok, f"{x.mean():.3f}/{(f < PROD.G_T).mean():.5f}"))

    V = np.linspace(0.2 * PROD.G_T, 5 * PROD.G_T, 200)
    grid_ok = True
    for t in (0.0, PROD.T / 4, PROD.T / 2, 3 * PROD.T / 4, 0.99 * PROD.T):
        a = sol.exposure_multiplier(t, V)
        pi = sol.optimal_basic_policy(t, V)
        grid_ok &= bool(np.all(a > 0) and np.all(pi[:, 0] >= 0) and np.all(pi[:, 1] <= 0))
    checks.append(("alpha>0, pi* in K", grid_ok, "5x200 grid"))

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        r = rng.uniform(-0.03, 0.05)
        mk = type(M)(r=r, mu1=rng.uniform(-0.1, 0.25), mu2=rng.uniform(-0.1, 0.25), sigma1=rng.uniform(0.05, 0.6),
                     sigma2=rng.uniform(0.05, 0.6), rho=rng.uniform(-0.95, 0.95))
        lam = optimal_dual_vector(mk)
        worst = max(worst, abs(float(lam.vec @ merton_policy(mk, lam, PROD.b).vec)))
    checks.append(("slackness", worst < 1e-10, f"max {worst:.1e} over 1e3 markets"))

    fd_err = 0.0
    for vb in (60.0, 80.0, 100.0, 120.0, 160.0):
        for ttm in (0.5, 1.0, 5.0, 10.0):
            h = 1e-4 * vb
            fd = (put_price(vb + h, ttm, BENCH, M, 100.0) - put_price(vb - h, ttm, BENCH, M, 100.0)) / (2 * h)
            fd_err = max(fd_err, abs(put_delta(vb, ttm, BENCH, M, 100.0) - fd))
    checks.append(("delta vs FD", fd_err < 1e-6, f"max {fd_err:.1e}"))

    e100 = replication_check(Put(100.0), SimConfig(n_paths=4000, n_steps=100), M, PROD, BENCH).mean_abs
    e400 = replication_check(Put(100.0), SimConfig(n_paths=4000, n_steps=400), M, PROD, BENCH).mean_abs
    order = math.log(e100 / e400) / math.log(4.0)
    checks.append(("replication order", 0.35 < order < 0.65, f"{order:.2f} ({e100:.3f}->{e400:.3f})"))

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--axis", "epsilon", "--grid", "0.003,0.005,0.01", "--paths", "100000"]
    cli.main(args + ["--out", str(a)])
    cli.main(args + ["--out", str(b)])
    checks.append(("byte-identical reruns", filecmp.cmp(a, b, shallow=False), "sweep CSV"))

    elapsed = time.perf_counter() - t0
    checks.append(("runtime", elapsed < 300.0, f"{elapsed:.1f}s (<5min)"))
    assert record(8, "property suite", checks)


def test_criterion_9_inconsistency_regressions():
    sol = OptimalStrategy.solve(M, PROD, BENCH).solution
    ker = sol.kernels
    # probability equation: the shifted form equals the lognormal quantile of V(T) and delivers eps,
    # the unshifted form does not
    mean, sd = sol.terminal_log_law()
    oracle = float(ndtr((math.log(sol.k_eps) - mean) / sd))
    unshifted = float(ndtr(-ker.d2(sol.k_eps, sol.v_f, 0.0)))
    form_ok = math.isclose(oracle, PROD.epsilon, rel_tol=1e-9) and abs(unshifted - PROD.epsilon) > 1e-3
    # initial bond holding: units times unit bond price must close the budget, giving 63.95 rather than 65.85
    pol = OptimalStrategy.solve(M, PROD, BENCH).initial_policy()
    closure = PROD.v0 - pol.phi_bar[1] - pol.phi_bar[2] * pol.put_price
    bond_ok = within(pol.phi_bar[0], 63.95, 0.005) and math.isclose(pol.phi_bar[0], closure, abs_tol=1e-10)
    checks = [("probability form", form_ok, f"oracle {oracle:.6f}, unshifted {unshifted:.6f}"),
              ("bond units", bond_ok and not within(pol.phi_bar[0], 65.85, 0.5), f"{pol.phi_bar[0]:.4f} (63.95)")]
    assert record(9, "inconsistency regressions", checks)

