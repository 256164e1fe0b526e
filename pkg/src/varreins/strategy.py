"""Traded (bond, fund, put) policies and the two reference strategies.

The basic-asset policy pi* = (pi*_1, pi*_2) lives in the market (S0, S1, S2)
with pi*_2 <= 0.  A short S2 position is realised by a long put on the
constant-mix benchmark: the put weight is A22 * pi*_2 with the negative
factor A22 = P / (pi_B V_B delta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .dual import DualVector, MertonPolicy, optimal_dual_vector
from .errors import DegenerateOption, ZeroPrice
from .market import BenchmarkSpec, MarketParams, ProductSpec, benchmark_value, put_delta, put_price
from .var_solver import Kernels, VarSolution, solve_var_parameters, solve_with_kernels

FREEZE_WINDOW = 1e-6  # years before expiry at which the traded policy stops updating
CN_WEIGHTS = (0.15, 0.0)
DELTA_FLOOR = 1e-200  # a put whose delta is above -DELTA_FLOOR is treated as worthless and not held


def transform_matrix(t: float, V_B: float, put_price: float, put_delta: float, pi_B: float,
                     T: float | None = None) -> np.ndarray:
    """diag(1, P / (pi_B V_B delta)) mapping basic-asset weights to (fund, put) weights."""
    if T is not None and t >= T:
        raise DegenerateOption("transform matrix undefined at expiry")
    if not put_delta < 0.0 or pi_B <= 0.0 or V_B <= 0.0:
        raise DegenerateOption("put delta must be negative and the benchmark risky")
    return np.diag([1.0, put_price / (pi_B * V_B * put_delta)])


@dataclass(frozen=True)
class TradedPolicy:
    pi_bar: tuple[float, float]  # weights in (S1, P)
    phi_bar: tuple[float, float, float]  # units in (S0, S1, P)
    put_price: float
    wealth: float

    @property
    def pi_bar0(self) -> float:
        return 1.0 - self.pi_bar[0] - self.pi_bar[1]

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.pi_bar0, *self.pi_bar)


def units_from_weights(weights, wealth: float, prices) -> np.ndarray:
    """Holdings phi_i = pi_i * wealth / price_i for (bond, fund, put)."""
    weights = np.asarray(weights, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if np.any(prices <= 0.0):
        raise ZeroPrice(f"non-positive price in {prices.tolist()}")
    return weights * wealth / prices


@dataclass(frozen=True)
class OptimalStrategy:
    """Solved VaR problem plus the benchmark needed to express it in traded assets."""

    market: MarketParams
    product: ProductSpec
    benchmark: BenchmarkSpec
    solution: VarSolution

    @classmethod
    def solve(cls, m: MarketParams, spec: ProductSpec, bench: BenchmarkSpec) -> "OptimalStrategy":
        return cls(m, spec, bench, solve_var_parameters(m, optimal_dual_vector(m), spec))

    def expected_utility(self) -> float:
        return self.solution.expected_utility()

    def traded_policy(self, t: float, V_hat: float, V_B: float, S1: float = 1.0) -> TradedPolicy:
        return traded_policy(self.solution, self.benchmark, self.market, t, V_hat, V_B, S1=S1)

    def initial_policy(self) -> TradedPolicy:
        return self.traded_policy(0.0, self.solution.v_f, self.product.v0)


def traded_policy(sol: VarSolution, bench: BenchmarkSpec, m: MarketParams, t: float, V_hat: float, V_B: float,
                  S1: float = 1.0) -> TradedPolicy:
    """pi_bar = A(t) pi*(t) at state (t, V_hat, V_B); bond price e^{rt}, fund price ``S1``.

    Within ``FREEZE_WINDOW`` of expiry the policy is evaluated at the edge of
    the window, since A(t) degenerates with the put delta.
    """
    T, G = sol.T, sol.G_T
    t_eval = min(t, T - FREEZE_WINDOW)
    wealth = float(sol.claim_value(t_eval, V_hat)) if t < T else float(sol.payoff(V_hat))
    pi_star = sol.optimal_basic_policy(t_eval, V_hat)
    ttm = T - t_eval
    P = put_price(V_B, ttm, bench, m, G)
    delta = put_delta(V_B, ttm, bench, m, G) if bench.pi_B > 0.0 and V_B > 0.0 else 0.0
    if pi_star[1] == 0.0 or (bench.pi_B > 0.0 and delta >= -DELTA_FLOOR):
        pi_bar = (float(pi_star[0]), 0.0)
    else:
        A = transform_matrix(t_eval, V_B, P, delta, bench.pi_B, T)
        pi_bar = tuple(float(x) for x in A @ pi_star)
    weights = (1.0 - pi_bar[0] - pi_bar[1], *pi_bar)
    if pi_bar[1] == 0.0 and P <= 0.0:
        prices = (math.exp(m.r * t), S1, 1.0)  # no put held, its price is irrelevant
    else:
        prices = (math.exp(m.r * t), S1, P)
    phi = units_from_weights(weights, wealth, prices)
    return TradedPolicy(pi_bar=pi_bar, phi_bar=tuple(float(x) for x in phi), put_price=float(P), wealth=wealth)


class ReferenceKind(enum.Enum):
    DN = "DN"
    CN = "CN"


@dataclass(frozen=True)
class ReferenceStrategy:
    """DN: optimal VaR strategy trading only bond and S1.  CN: constant weights in (S1, S2)."""

    kind: ReferenceKind
    market: MarketParams
    product: ProductSpec
    weights: tuple[float, float] = CN_WEIGHTS
    solution: VarSolution | None = None

    def expected_utility(self) -> float:
        if self.kind is ReferenceKind.DN:
            return self.solution.expected_utility()
        return cn_expected_utility(self.weights, self.market, self.product)

    def shortfall(self) -> float:
        if self.kind is ReferenceKind.DN:
            return self.solution.shortfall()
        return cn_shortfall(self.weights, self.market, self.product)

    def initial_weight(self) -> float:
        """Initial proportion of wealth in S1."""
        if self.kind is ReferenceKind.CN:
            return self.weights[0]
        sol = self.solution
        return float(sol.exposure_multiplier(0.0, sol.v_f)) * sol.pi_hat.pi_hat[0]


def dn_market_price_of_risk(m: MarketParams) -> float:
    return max(m.mu1 - m.r, 0.0) / m.sigma1


def solve_dn(m: MarketParams, spec: ProductSpec) -> ReferenceStrategy:
    """Optimal VaR strategy in the one-risky-asset market (bond, S1) with no short sales.

    With mu1 <= r the no-short constraint binds and the risky weight is zero.
    """
    g = dn_market_price_of_risk(m)
    w = g / ((1.0 - spec.b) * m.sigma1)
    lam = DualVector((max(m.r - m.mu1, 0.0), 0.0))
    ker = Kernels(r=m.r, b=spec.b, T=spec.T, gamma_norm=g)
    sol = solve_with_kernels(ker, spec.v0, spec.G_T, spec.epsilon, lambda_star=lam,
                             pi_hat=MertonPolicy((w, 0.0)), gamma_vec=(g, 0.0))
    return ReferenceStrategy(kind=ReferenceKind.DN, market=m, product=spec, weights=(w, 0.0), solution=sol)


def constant_mix(m: MarketParams, spec: ProductSpec, weights=CN_WEIGHTS) -> ReferenceStrategy:
    return ReferenceStrategy(kind=ReferenceKind.CN, market=m, product=spec, weights=tuple(weights))


def _cn_moments(weights, m: MarketParams) -> tuple[float, float]:
    pi = np.asarray(weights, dtype=float)
    drift = m.r + float(pi @ m.excess)
    s = float(np.linalg.norm(m.sigma.T @ pi))
    return drift, s


def cn_expected_utility(weights, m: MarketParams, spec: ProductSpec) -> float:
    """E[V(T)^b / b] for a constant-mix portfolio (terminal wealth lognormal)."""
    drift, s = _cn_moments(weights, m)
    b, T = spec.b, spec.T
    return spec.v0**b / b * math.exp(b * (drift - 0.5 * s * s) * T + 0.5 * b * b * s * s * T)


def cn_shortfall(weights, m: MarketParams, spec: ProductSpec) -> float:
    """P(V(T) < G) for a constant-mix portfolio."""
    drift, s = _cn_moments(weights, m)
    log_gap = math.log(spec.G_T / spec.v0) if spec.G_T > 0 else -math.inf
    mean = (drift - 0.5 * s * s) * spec.T
    if s == 0.0:
        return float(mean < log_gap)
    return float(ndtr((log_gap - mean) / (s * math.sqrt(spec.T))))


def initial_benchmark(bench: BenchmarkSpec, m: MarketParams, spec: ProductSpec) -> float:
    return benchmark_value(bench, m, spec.v0, 0.0, np.zeros(2))
