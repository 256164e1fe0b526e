"""VaR-constrained optimal terminal payoff in the auxiliary market.

The unconstrained optimal wealth ``V`` is lognormal; the VaR-optimal payoff
lifts it to the guarantee on ``[k, G]``:

    f(V) = V + (G - V) 1{k <= V <= G}.

The fictitious budget ``v_f`` and threshold ``k`` are pinned by the budget
equation (price of f equals v0) and the shortfall equation
(P(V(T) < k) = eps).  Everything downstream -- claim value, exposure
multiplier, value function -- is closed form in the kernels Gamma, d1, d2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .dual import DualVector, MertonPolicy, gamma_lambda, merton_policy
from .errors import DegenerateHorizon, Infeasible, NoConvergence
from .market import MarketParams, ProductSpec, std_normal_pdf

RESIDUAL_TOL = 1e-10
MAX_ITER = 200
K_BRACKET = (1e-12, 1.0 - 1e-12)  # fractions of G
VF_LOWER = 1e-6  # fraction of v0


class Regime(enum.Enum):
    NonBinding = "NonBinding"
    PortfolioInsurance = "PortfolioInsurance"
    Binding = "Binding"


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class Kernels:
    """Gamma(t), d1(x, V, t), d2(x, V, t) for risk-free rate ``r``, CRRA ``b``, horizon ``T``
    and auxiliary market-price-of-risk norm ``gamma_norm``."""

    r: float
    b: float
    T: float
    gamma_norm: float

    def Gamma(self, t):
        g2 = self.gamma_norm**2
        c = self.b / (1.0 - self.b)
        return _out((c * (self.r + 0.5 * g2) + c * c * 0.5 * g2) * (self.T - np.asarray(t, dtype=float)))

    def _ttm(self, t):
        ttm = self.T - np.asarray(t, dtype=float)
        if np.any(ttm <= 0.0):
            raise DegenerateHorizon("d1/d2 requested at or beyond the horizon")
        if self.gamma_norm <= 0.0:
            raise DegenerateHorizon("d1/d2 undefined when the market price of risk vanishes")
        return ttm

    def d2(self, x, V, t):
        ttm = self._ttm(t)
        g = self.gamma_norm
        b = self.b
        with np.errstate(divide="ignore"):
            log_ratio = np.log(np.asarray(x, dtype=float) / np.asarray(V, dtype=float))
        # log_ratio = -inf at x = 0 gives d2 = +inf (b - 1 < 0), the portfolio-insurance limit
        out = ((b - 1.0) * log_ratio + (b - 1.0) * self.Gamma(t) + (self.r - 0.5 * g * g) * ttm) / (g * np.sqrt(ttm))
        return _out(out)

    def d1(self, x, V, t):
        ttm = self._ttm(t)
        return _out(self.d2(x, V, t) + self.gamma_norm * np.sqrt(ttm) / (1.0 - self.b))


def kernels(m: MarketParams, lam: DualVector, b: float, spec: ProductSpec) -> Kernels:
    return Kernels(r=m.r, b=b, T=spec.T, gamma_norm=float(np.linalg.norm(gamma_lambda(m, lam))))


def truncated_mgf(p: float, l: float, u: float) -> float:
    """E[exp(pX) 1{l < X <= u}] for standard normal X."""
    return math.exp(0.5 * p * p) * (float(ndtr(u - p)) - float(ndtr(l - p)))


def constrained_payoff(V, k_eps: float, G_T: float):
    V = np.asarray(V, dtype=float)
    return _out(np.where((V >= k_eps) & (V <= G_T), G_T, V))


def budget_value(v_f, k_eps, ker: Kernels, G_T: float):
    """Time-0 price of the payoff f(V(T)) when V starts from ``v_f``."""
    if ker.T <= 0:
        raise DegenerateHorizon("horizon must be positive")
    d1G, d1k = ker.d1(G_T, v_f, 0.0), ker.d1(k_eps, v_f, 0.0)
    d2G, d2k = ker.d2(G_T, v_f, 0.0), ker.d2(k_eps, v_f, 0.0)
    return _out(v_f * (1.0 + ndtr(d1G) - ndtr(d1k)) + math.exp(-ker.r * ker.T) * G_T * (ndtr(d2k) - ndtr(d2G)))


def shortfall_probability(v_f, k_eps, ker: Kernels):
    """Real-world probability that V(T) < k_eps, i.e. that the payoff misses the guarantee."""
    if ker.T <= 0:
        raise DegenerateHorizon("horizon must be positive")
    return _out(ndtr(-ker.d2(k_eps, v_f, 0.0) - ker.gamma_norm * math.sqrt(ker.T)))


def riskneutral_shortfall_bound(ker: Kernels, epsilon: float) -> float:
    """Risk-neutral probability of V(T) < k when its real-world probability is ``epsilon``.

    A threshold at real-world level eps sits Phi^-1(eps) standard deviations
    below the mean; under the pricing measure the mean moves down by
    |gamma| sqrt(T), so the risk-neutral mass is Phi(Phi^-1(eps) + |gamma| sqrt(T)).
    """
    if epsilon <= 0.0:
        return 0.0
    if epsilon >= 1.0:
        return 1.0
    return float(ndtr(ndtri(epsilon) + ker.gamma_norm * math.sqrt(ker.T)))


def minimal_budget(ker: Kernels, G_T: float, epsilon: float) -> float:
    """Infimum over v_f of the cost of the VaR payoff: G e^{-rT} (1 - q~)."""
    return G_T * math.exp(-ker.r * ker.T) * (1.0 - riskneutral_shortfall_bound(ker, epsilon))


@dataclass(frozen=True)
class VarSolution:
    lambda_star: DualVector
    pi_hat: MertonPolicy
    v_f: float
    k_eps: float
    binding: Regime
    kernels: Kernels
    v0: float
    G_T: float
    epsilon: float
    gamma_vec: tuple[float, float]
    iterations: dict = field(default_factory=dict, compare=False)

    @property
    def T(self) -> float:
        return self.kernels.T

    @property
    def b(self) -> float:
        return self.kernels.b

    @property
    def r(self) -> float:
        return self.kernels.r

    @property
    def gamma_norm(self) -> float:
        return self.kernels.gamma_norm

    @property
    def trivial_payoff(self) -> bool:
        # k = G encodes an empty payoff modification
        return self.k_eps >= self.G_T

    def payoff(self, V):
        return constrained_payoff(V, self.k_eps, self.G_T)

    def unconstrained_wealth(self, t, w):
        """V(t) = v_f Z_lam(t)^{1/(b-1)} e^{Gamma(t) - Gamma(0)} given W(t) = ``w`` (shape (..., 2))."""
        ker = self.kernels
        g = np.asarray(self.gamma_vec)
        w = np.asarray(w, dtype=float)
        log_z = -(ker.r + 0.5 * ker.gamma_norm**2) * np.asarray(t, dtype=float) - w @ g
        return _out(self.v_f * np.exp(log_z / (ker.b - 1.0) + ker.Gamma(t) - ker.Gamma(0.0)))

    def terminal_log_law(self) -> tuple[float, float]:
        """Mean and standard deviation of ln V(T) under the real-world measure."""
        ker = self.kernels
        g, b, T = ker.gamma_norm, ker.b, ker.T
        mean = math.log(self.v_f) - ker.Gamma(0.0) + (ker.r + 0.5 * g * g) * T / (1.0 - b)
        return mean, g * math.sqrt(T) / (1.0 - b)

    def _check_t(self, t):
        if np.any(np.asarray(t) >= self.T):
            raise DegenerateHorizon("use the terminal payoff at t = T")

    def claim_value(self, t, V):
        """Arbitrage-free value at time ``t`` of f(V(T)) given current unconstrained wealth ``V``."""
        self._check_t(t)
        V = np.asarray(V, dtype=float)
        if self.trivial_payoff:
            return _out(V.copy())
        ker, G, k = self.kernels, self.G_T, self.k_eps
        disc = np.exp(-ker.r * (self.T - np.asarray(t, dtype=float)))
        put_G = V * ndtr(-ker.d1(G, V, t)) - G * disc * ndtr(-ker.d2(G, V, t))
        put_k = V * ndtr(-ker.d1(k, V, t)) - G * disc * ndtr(-ker.d2(k, V, t))
        return _out(V - put_G + put_k)

    def exposure_multiplier(self, t, V):
        """alpha(t, V) = V D_V / D, the factor scaling the Merton policy."""
        self._check_t(t)
        V = np.asarray(V, dtype=float)
        if self.trivial_payoff:
            return _out(np.ones_like(V))
        ker, G, k = self.kernels, self.G_T, self.k_eps
        ttm = self.T - np.asarray(t, dtype=float)
        disc = np.exp(-ker.r * ttm)
        D = self.claim_value(t, V)
        d2G, d2k = ker.d2(G, V, t), ker.d2(k, V, t)
        jump = (1.0 - ker.b) * (G - k) * disc * std_normal_pdf(d2k) / (D * ker.gamma_norm * np.sqrt(ttm))
        return _out(1.0 - G * disc * (ndtr(-d2G) - ndtr(-d2k)) / D + jump)

    def optimal_basic_policy(self, t, V) -> np.ndarray:
        """pi*(t) = alpha(t, V) pi_hat; shape (..., 2)."""
        a = np.asarray(self.exposure_multiplier(t, V))
        return a[..., None] * self.pi_hat.vec

    def expected_utility(self) -> float:
        """Closed-form E[U(f(V(T)))] with U(x) = x^b / b."""
        ker, b, vf, G, k = self.kernels, self.b, self.v_f, self.G_T, self.k_eps
        head = vf**b / b * math.exp((1.0 - b) * ker.Gamma(0.0))
        if self.trivial_payoff:
            return head
        s = ker.gamma_norm * math.sqrt(ker.T)
        d1G, d1k = ker.d1(G, vf, 0.0), ker.d1(k, vf, 0.0)
        d2G, d2k = ker.d2(G, vf, 0.0), ker.d2(k, vf, 0.0)
        return float(head * (1.0 - ndtr(d1k) + ndtr(d1G)) + G**b / b * (ndtr(d2k + s) - ndtr(d2G + s)))

    def shortfall(self) -> float:
        """P(f(V(T)) < G)."""
        if self.gamma_norm == 0.0:
            return float(self.v_f * math.exp(self.r * self.T) < self.k_eps)
        return shortfall_probability(self.v_f, self.k_eps, self.kernels) if self.k_eps > 0 else 0.0

    def residuals(self) -> dict:
        """Relative budget residual and (when binding) absolute probability residual."""
        if self.gamma_norm == 0.0:
            return {"budget": 0.0, "probability": 0.0}
        if self.trivial_payoff:
            budget = abs(self.v_f - self.v0) / self.v0
        else:
            budget = abs(budget_value(self.v_f, self.k_eps, self.kernels, self.G_T) - self.v0) / self.v0
        prob = abs(self.shortfall() - self.epsilon) if self.binding is Regime.Binding else 0.0
        return {"budget": budget, "probability": prob}


def expected_utility(solution: VarSolution, spec: ProductSpec | None = None) -> float:
    return solution.expected_utility()


def _brent(f, lo, hi, what, **kw):
    try:
        x, res = brentq(f, lo, hi, maxiter=MAX_ITER, full_output=True, **kw)
    except (ValueError, RuntimeError) as exc:
        raise NoConvergence(f"{what}: {exc}", {"lo": f(lo), "hi": f(hi)}) from exc
    return x, res.iterations


def _solve_core(ker: Kernels, v0: float, G_T: float, epsilon: float):
    """Return (regime, v_f, k_eps, iterations) for given kernels."""
    T, r = ker.T, ker.r
    if ker.gamma_norm == 0.0:
        # deterministic wealth v0 e^{rT}
        if v0 * math.exp(r * T) >= G_T or epsilon >= 1.0:
            return Regime.NonBinding, v0, G_T, {}
        raise Infeasible(f"riskless wealth {v0 * math.exp(r * T):.6g} cannot reach the guarantee {G_T:.6g}")

    if G_T <= 0.0 or shortfall_probability(v0, G_T, ker) <= epsilon:
        return Regime.NonBinding, v0, G_T, {}

    floor = minimal_budget(ker, G_T, epsilon)
    if floor >= v0:
        raise Infeasible(
            f"guarantee {G_T:.6g} not attainable: cheapest VaR-compliant payoff costs {floor:.6g} >= v0 = {v0:.6g}"
        )

    lo_vf = VF_LOWER * v0
    if epsilon == 0.0:
        def resid(vf):
            return budget_value(vf, 0.0, ker, G_T) - v0

        v_f, it = _brent(resid, lo_vf, v0, "portfolio-insurance budget", xtol=1e-14 * v0, rtol=1e-15)
        return Regime.PortfolioInsurance, v_f, 0.0, {"outer": it}

    inner_its = []

    def k_of(vf):
        def f(logk):
            return shortfall_probability(vf, math.exp(logk), ker) - epsilon

        logk, it = _brent(f, math.log(K_BRACKET[0] * G_T), math.log(K_BRACKET[1] * G_T), "shortfall equation",
                          xtol=1e-15, rtol=1e-15)
        inner_its.append(it)
        return math.exp(logk)

    def resid(vf):
        return budget_value(vf, k_of(vf), ker, G_T) - v0

    v_f, it = _brent(resid, lo_vf, v0, "budget equation", xtol=1e-14 * v0, rtol=1e-15)
    return Regime.Binding, v_f, k_of(v_f), {"outer": it, "inner_max": max(inner_its)}


def solve_with_kernels(ker: Kernels, v0: float, G_T: float, epsilon: float, *, lambda_star: DualVector,
                       pi_hat: MertonPolicy, gamma_vec) -> VarSolution:
    regime, v_f, k, its = _solve_core(ker, v0, G_T, epsilon)
    sol = VarSolution(lambda_star=lambda_star, pi_hat=pi_hat, v_f=float(v_f), k_eps=float(k), binding=regime,
                      kernels=ker, v0=v0, G_T=G_T, epsilon=epsilon,
                      gamma_vec=(float(gamma_vec[0]), float(gamma_vec[1])), iterations=its)
    res = sol.residuals()
    if res["budget"] > 1e-8 or res["probability"] > RESIDUAL_TOL:
        raise NoConvergence("solved parameters fail the residual check", res)
    return sol


def solve_var_parameters(m: MarketParams, lam_star: DualVector, spec: ProductSpec) -> VarSolution:
    ker = kernels(m, lam_star, spec.b, spec)
    return solve_with_kernels(ker, spec.v0, spec.G_T, spec.epsilon, lambda_star=lam_star,
                              pi_hat=merton_policy(m, lam_star, spec.b), gamma_vec=gamma_lambda(m, lam_star))
