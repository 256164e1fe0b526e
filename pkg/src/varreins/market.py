"""Two-asset Black-Scholes market, constant-mix benchmark and the put written on it.

All rates and volatilities are per-year decimals, time is in years.  Functions
accept scalars or numpy arrays wherever that is natural; scalar branches
(``ttm``, ``pi_B``) are resolved before any array arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateOption, InvariantViolation, SingularVolatility


@dataclass(frozen=True)
class MarketParams:
    r: float
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise InvariantViolation("sigma1", "must be > 0")
        if not self.sigma2 > 0:
            raise InvariantViolation("sigma2", "must be > 0")
        if not -1.0 <= self.rho <= 1.0:
            raise InvariantViolation("rho", "must lie in [-1, 1]")
        if self.mu1 == self.r and self.mu2 == self.r:
            raise InvariantViolation("mu1", "excess returns must not both vanish")

    @property
    def excess(self) -> np.ndarray:
        return np.array([self.mu1 - self.r, self.mu2 - self.r])

    @property
    def sigma(self) -> np.ndarray:
        """Lower-triangular volatility matrix (rows: assets, columns: Brownian drivers)."""
        s1, s2, rho = self.sigma1, self.sigma2, self.rho
        return np.array([[s1, 0.0], [s2 * rho, s2 * math.sqrt(1.0 - rho * rho)]])

    @property
    def sigma_inv(self) -> np.ndarray:
        s1, s2, rho = self.sigma1, self.sigma2, self.rho
        if abs(rho) >= 1.0:
            raise SingularVolatility(f"rho = {rho} makes the volatility matrix singular")
        c = math.sqrt(1.0 - rho * rho)
        return np.array([[1.0 / s1, 0.0], [-rho / (s1 * c), 1.0 / (s2 * c)]])

    @property
    def cov_inv(self) -> np.ndarray:
        """Closed-form inverse of C = sigma sigma'."""
        s1, s2, rho = self.sigma1, self.sigma2, self.rho
        if abs(rho) >= 1.0:
            raise SingularVolatility(f"rho = {rho} makes the covariance matrix singular")
        det = s1 * s1 * s2 * s2 * (1.0 - rho * rho)
        return np.array([[s2 * s2, -s1 * s2 * rho], [-s1 * s2 * rho, s1 * s1]]) / det


@dataclass(frozen=True)
class ProductSpec:
    v0: float
    T: float
    G_T: float
    epsilon: float
    b: float

    def __post_init__(self):
        if not self.v0 > 0:
            raise InvariantViolation("v0", "must be > 0")
        if not self.T > 0:
            raise InvariantViolation("T", "must be > 0")
        if not self.G_T >= 0:
            raise InvariantViolation("G_T", "must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvariantViolation("epsilon", "must lie in [0, 1]")
        if not (self.b < 1 and self.b != 0):
            raise InvariantViolation("b", "CRRA exponent must satisfy b < 1, b != 0")

    def utility(self, x):
        return np.power(x, self.b) / self.b


@dataclass(frozen=True)
class BenchmarkSpec:
    pi_B: float

    def __post_init__(self):
        if not 0.0 <= self.pi_B <= 1.0:
            raise InvariantViolation("pi_B", "must lie in [0, 1]")

    def vol(self, m: MarketParams) -> float:
        return self.pi_B * m.sigma2

    def drift(self, m: MarketParams) -> float:
        return m.r + self.pi_B * (m.mu2 - m.r)


# Base-case calibration: money-market rate, two equity indices, 10-year guarantee of the premium.
BASE_MARKET = MarketParams(r=0.0102, mu1=0.1752, mu2=0.1237, sigma1=0.2366, sigma2=0.2198, rho=0.8012)
BASE_PRODUCT = ProductSpec(v0=100.0, T=10.0, G_T=100.0, epsilon=0.005, b=-9.0)
BASE_BENCHMARK = BenchmarkSpec(pi_B=0.2947)


def std_normal_cdf(x):
    """Standard normal CDF; ndtr is erfc-based and accurate to double precision in both tails."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def market_price_of_risk(m: MarketParams) -> np.ndarray:
    return m.sigma_inv @ m.excess


def benchmark_value(spec: BenchmarkSpec, m: MarketParams, v0: float, t, w):
    """Constant-mix benchmark value at time ``t`` given Brownian vector ``w = W(t)``.

    ``w`` may be shaped ``(2,)`` or ``(..., 2)``.
    """
    w = np.asarray(w, dtype=float)
    vol = spec.vol(m)
    rho = m.rho
    noise = w[..., 0] * rho + w[..., 1] * math.sqrt(1.0 - rho * rho)
    out = v0 * np.exp((spec.drift(m) - 0.5 * vol * vol) * t + vol * noise)
    return float(out) if np.ndim(out) == 0 else out


def d_plus(v_b, ttm: float, spec: BenchmarkSpec, m: MarketParams, g_t: float):
    vol = spec.vol(m)
    if ttm <= 0.0:
        raise DegenerateOption("d_plus undefined at zero time to maturity")
    if vol == 0.0:
        raise DegenerateOption("d_plus undefined for a riskless benchmark (pi_B = 0)")
    with np.errstate(divide="ignore"):
        log_m = np.log(np.asarray(v_b, dtype=float) / g_t)
    out = (log_m + (m.r + 0.5 * vol * vol) * ttm) / (vol * math.sqrt(ttm))
    return float(out) if np.ndim(out) == 0 else out


def put_price(v_b, ttm: float, spec: BenchmarkSpec, m: MarketParams, g_t: float):
    """Black-Scholes put with strike ``g_t`` on the benchmark, ``ttm`` years before expiry."""
    v_b = np.asarray(v_b, dtype=float)
    if g_t <= 0.0:
        out = np.zeros_like(v_b)
    elif ttm <= 0.0:
        out = np.maximum(g_t - v_b, 0.0)
    elif spec.vol(m) == 0.0:
        out = np.maximum(g_t * math.exp(-m.r * ttm) - v_b, 0.0)
    else:
        dp = d_plus(v_b, ttm, spec, m, g_t)
        dm = dp - spec.vol(m) * math.sqrt(ttm)
        out = g_t * math.exp(-m.r * ttm) * ndtr(-dm) - v_b * ndtr(-dp)
        # clip rounding noise to the no-arbitrage band
        out = np.clip(out, np.maximum(g_t * math.exp(-m.r * ttm) - v_b, 0.0), g_t * math.exp(-m.r * ttm))
    return float(out) if out.ndim == 0 else out


def put_delta(v_b, ttm: float, spec: BenchmarkSpec, m: MarketParams, g_t: float):
    if ttm <= 0.0:
        raise DegenerateOption("put delta undefined at expiry")
    if spec.vol(m) == 0.0:
        v_b = np.asarray(v_b, dtype=float)
        out = np.where(g_t * math.exp(-m.r * ttm) > v_b, -1.0, 0.0)
        return float(out) if out.ndim == 0 else out
    # -Phi(-d) == Phi(d) - 1 without cancellation for deep out-of-the-money puts
    out = -ndtr(-np.asarray(d_plus(v_b, ttm, spec, m, g_t)))
    return float(out) if np.ndim(out) == 0 else out


def pricing_kernel(m: MarketParams, t, w, gamma=None):
    """State-price density exp(-(r + |gamma|^2/2) t - gamma'W(t)).

    ``gamma`` defaults to the market price of risk of ``m``; pass a shifted
    vector to get the kernel of an auxiliary market.
    """
    g = market_price_of_risk(m) if gamma is None else np.asarray(gamma, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.exp(-(m.r + 0.5 * float(g @ g)) * t - w @ g)
    return float(out) if np.ndim(out) == 0 else out
