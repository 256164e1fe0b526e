"""Welfare comparisons: reinsurance-optimality criterion, WEUL and GEUG.

WEUL l: the fraction of initial wealth the optimal strategy may give up and
still match the reference expected utility.  GEUG g: the relative increase in
the guarantee it can support at full wealth with the same expected utility.
Both left-hand sides re-solve the whole VaR problem at every evaluation since
the value function is not homothetic with a fixed guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.optimize import bisect

from .dual import optimal_dual_vector
from .errors import Infeasible, NoConvergence
from .market import MarketParams, ProductSpec
from .var_solver import kernels, minimal_budget, solve_var_parameters

BISECT_MAXITER = 100
BISECT_XTOL = 1e-13
BRACKET_PAD = 1e-6
GEUG_LOWER = -0.5
VERDICT_TOL = 1e-12


@dataclass(frozen=True)
class ReinsuranceVerdict:
    optimal: bool
    sharpe1: float
    sharpe2: float
    rho: float

    def __bool__(self) -> bool:
        return self.optimal


def reinsurance_is_optimal(m: MarketParams, b: float | None = None) -> ReinsuranceVerdict:
    """Partial reinsurance is optimal iff SR2 < rho SR1 in the auxiliary market.

    The dual vector does not depend on ``b``; the argument is accepted for
    symmetry with the other solvers.
    """
    lam = optimal_dual_vector(m).vec
    sr1 = (m.mu1 + lam[0] - m.r) / m.sigma1
    sr2 = (m.mu2 + lam[1] - m.r) / m.sigma2
    # on the face lambda_2 != 0 the two sides agree exactly; keep rounding noise from flipping the verdict
    margin = VERDICT_TOL * (abs(sr1) + abs(sr2))
    return ReinsuranceVerdict(optimal=bool(sr2 < m.rho * sr1 - margin), sharpe1=float(sr1), sharpe2=float(sr2),
                              rho=m.rho)


def optimal_expected_utility(m: MarketParams, spec: ProductSpec) -> float:
    return solve_var_parameters(m, optimal_dual_vector(m), spec).expected_utility()


def _reference_utility(ref) -> float:
    if isinstance(ref, (int, float)):
        return float(ref)
    return float(ref.expected_utility())


def _safe_gap(m, spec, target):
    """EU_opt(spec) - target; a problem pushed past feasibility counts as worst possible."""
    try:
        return optimal_expected_utility(m, spec) - target
    except (Infeasible, NoConvergence):
        return -math.inf


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float  # |EU_opt - EU_ref| / |EU_ref|
    iterations: int
    bracket: tuple[float, float]


def _bisect(f, lo, hi, target, what) -> RootResult:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return RootResult(lo, 0.0, 0, (lo, hi))
    if flo * fhi > 0 or math.isnan(flo) or math.isnan(fhi):
        raise NoConvergence(f"{what}: root not bracketed on [{lo:.6g}, {hi:.6g}]", {"lo": flo, "hi": fhi})
    # bisect cannot evaluate -inf gracefully; clamp to a large finite value with the right sign
    def g(x):
        v = f(x)
        return max(v, -1e300)

    x, res = bisect(g, lo, hi, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER, full_output=True, disp=False)
    resid = abs(f(x)) / abs(target)
    return RootResult(float(x), float(resid), res.iterations, (lo, hi))


def _feasibility_floor(m: MarketParams, spec: ProductSpec, G_T: float) -> float:
    return minimal_budget(kernels(m, optimal_dual_vector(m), spec.b, spec), G_T, spec.epsilon)


def weul_root(ref, m: MarketParams, spec: ProductSpec) -> RootResult:
    target = _reference_utility(ref)
    l_max = 1.0 - _feasibility_floor(m, spec, spec.G_T) / spec.v0 - BRACKET_PAD
    if l_max <= 0.0:
        raise Infeasible("the guarantee is unreachable for every wealth fraction")
    return _bisect(lambda l: _safe_gap(m, replace(spec, v0=spec.v0 * (1.0 - l)), target), 0.0, l_max, target, "WEUL")


def geug_root(ref, m: MarketParams, spec: ProductSpec) -> RootResult:
    target = _reference_utility(ref)
    if spec.G_T <= 0.0:
        raise Infeasible("a relative guarantee gain needs a positive guarantee")
    g_max = spec.v0 / _feasibility_floor(m, spec, spec.G_T) - 1.0 - BRACKET_PAD
    if g_max <= GEUG_LOWER:
        raise Infeasible("no guarantee level above half the current one is attainable")
    return _bisect(lambda g: _safe_gap(m, replace(spec, G_T=spec.G_T * (1.0 + g)), target),
                   GEUG_LOWER, g_max, target, "GEUG")


def weul(ref, m: MarketParams, spec: ProductSpec) -> float:
    """Wealth-equivalent utility loss versus ``ref`` (strategy or expected-utility value)."""
    return weul_root(ref, m, spec).root


def geug(ref, m: MarketParams, spec: ProductSpec) -> float:
    """Guarantee-equivalent utility gain versus ``ref``."""
    return geug_root(ref, m, spec).root


def annualized_guarantee(g: float, G_T: float, v0: float, T: float) -> float:
    """Annual guaranteed return implied by the raised guarantee (1 + g) G_T."""
    return ((1.0 + g) * G_T / v0) ** (1.0 / T) - 1.0


@dataclass(frozen=True)
class ComparisonReport:
    weul: float
    geug: float
    against: str
    diagnostics: dict = field(default_factory=dict)


def compare(ref, m: MarketParams, spec: ProductSpec, against: str | None = None) -> ComparisonReport:
    lw = weul_root(ref, m, spec)
    gg = geug_root(ref, m, spec)
    name = against or getattr(getattr(ref, "kind", None), "value", "custom")
    diag = {
        "weul_iterations": lw.iterations, "weul_residual": lw.residual,
        "geug_iterations": gg.iterations, "geug_residual": gg.residual,
        "annualized_guarantee": annualized_guarantee(gg.root, spec.G_T, spec.v0, spec.T),
    }
    return ComparisonReport(weul=lw.root, geug=gg.root, against=name, diagnostics=diag)
