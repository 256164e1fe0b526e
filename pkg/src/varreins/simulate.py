"""Monte Carlo engine.

Brownian increments come from counter-based Philox streams, one independent
stream per block of ``BLOCK_SIZE`` paths keyed by ``SeedSequence(seed,
spawn_key=(block,))``.  The increments of a path therefore depend only on
(seed, path index, n_steps), never on how the work is split across workers.

All geometric Brownian quantities are stepped exactly from W(t); only
rollouts of wealth under discretely rebalanced holdings carry
discretisation error.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from .errors import ZeroDenominator
from .market import (BenchmarkSpec, MarketParams, ProductSpec, benchmark_value, market_price_of_risk,
                     put_delta, put_price)
from .strategy import DELTA_FLOOR, OptimalStrategy, ReferenceKind, ReferenceStrategy, cn_shortfall
from .var_solver import VarSolution

BLOCK_SIZE = 4096


class Measure(enum.Enum):
    RealWorld = "RealWorld"
    RiskNeutral = "RiskNeutral"


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    n_steps: int
    seed: int = 20240607
    measure: Measure = Measure.RealWorld

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def brownian_increments(config: SimConfig, dt: float, blocks=None) -> np.ndarray:
    """Standard Brownian increments, shape (n_paths, n_steps, 2), each N(0, dt)."""
    n_blocks = -(-config.n_paths // BLOCK_SIZE)
    out = np.empty((config.n_paths, config.n_steps, 2))
    sd = math.sqrt(dt)
    for blk in range(n_blocks) if blocks is None else blocks:
        lo = blk * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, config.n_paths)
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed, spawn_key=(blk,))))
        # always draw a full block so a path's numbers do not depend on n_paths
        z = gen.standard_normal((BLOCK_SIZE, config.n_steps, 2))
        out[lo:hi] = z[: hi - lo] * sd
    return out


@dataclass(frozen=True)
class PathEnsemble:
    """Real-world Brownian paths W on a uniform grid, with W(0) = 0.

    Under ``Measure.RiskNeutral`` the generated motion is the risk-neutral one
    and the stored real-world W is shifted by -gamma t, so that every
    quantity below is written in real-world coordinates.
    """

    config: SimConfig
    market: MarketParams
    T: float
    dW: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.T / self.config.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.config.n_steps + 1)

    @cached_property
    def W(self) -> np.ndarray:
        n = self.config.n_paths
        return np.concatenate([np.zeros((n, 1, 2)), np.cumsum(self.dW, axis=1)], axis=1)

    @property
    def W_T(self) -> np.ndarray:
        return self.W[:, -1, :]

    def stock(self, i: int) -> np.ndarray:
        """S_i(t) / S_i(0) for i in {1, 2}, shape (n_paths, n_steps + 1)."""
        m = self.market
        mu, sig = (m.mu1, m.sigma1) if i == 1 else (m.mu2, m.sigma2)
        noise = self.W @ m.sigma[i - 1]
        return np.exp((mu - 0.5 * sig * sig) * self.times + noise)

    def bond(self) -> np.ndarray:
        return np.exp(self.market.r * self.times)

    def benchmark(self, bench: BenchmarkSpec, v0: float) -> np.ndarray:
        return benchmark_value(bench, self.market, v0, self.times, self.W)

    def kernel(self, gamma=None) -> np.ndarray:
        m = self.market
        g = market_price_of_risk(m) if gamma is None else np.asarray(gamma, dtype=float)
        return np.exp(-(m.r + 0.5 * float(g @ g)) * self.times - self.W @ g)

    def unconstrained_wealth(self, sol: VarSolution) -> np.ndarray:
        return sol.unconstrained_wealth(self.times, self.W)


def generate(config: SimConfig, m: MarketParams, spec: ProductSpec) -> PathEnsemble:
    dt = spec.T / config.n_steps
    dW = brownian_increments(config, dt)
    if config.measure is Measure.RiskNeutral:
        dW = dW - market_price_of_risk(m) * dt
    return PathEnsemble(config=config, market=m, T=spec.T, dW=dW)


# ---------------------------------------------------------------- policies


class ConstantMixPolicy:
    """Constant weights in (S1, S2); bond takes the rest."""

    assets = "basic"

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)

    def weights_at(self, k, ens, cache):
        return np.broadcast_to(self.weights, (ens.config.n_paths, 2))


class OptimalBasicPolicy:
    """pi*(t) = alpha(t, V_hat(t)) pi_hat evaluated along the exact unconstrained-wealth path."""

    assets = "basic"

    def __init__(self, sol: VarSolution):
        self.sol = sol

    def weights_at(self, k, ens, cache):
        if "V_hat" not in cache:
            cache["V_hat"] = ens.unconstrained_wealth(self.sol)
        return self.sol.optimal_basic_policy(ens.times[k], cache["V_hat"][:, k])


class OptimalTradedPolicy(OptimalBasicPolicy):
    """The optimal policy executed in (bond, S1, put on the benchmark).

    ``weights_at`` still returns basic-asset weights; ``rollout`` maps the S2
    weight to put units through the put delta.
    """

    assets = "traded"

    def __init__(self, strat: OptimalStrategy):
        super().__init__(strat.solution)
        self.strat = strat


def policy_for(strategy) -> object:
    """Basic-asset rollout policy for a solved strategy."""
    if isinstance(strategy, OptimalStrategy):
        return OptimalBasicPolicy(strategy.solution)
    if isinstance(strategy, ReferenceStrategy):
        if strategy.kind is ReferenceKind.CN:
            return ConstantMixPolicy(strategy.weights)
        return OptimalBasicPolicy(strategy.solution)
    if isinstance(strategy, VarSolution):
        return OptimalBasicPolicy(strategy)
    return ConstantMixPolicy(strategy)


@dataclass(frozen=True)
class RolloutResult:
    terminal: np.ndarray
    bankrupt: np.ndarray
    wealth: np.ndarray | None = field(default=None, repr=False)

    @property
    def bankruptcy_rate(self) -> float:
        return float(self.bankrupt.mean())


def rollout(policy, ens: PathEnsemble, v0: float, rebalance_every: int = 1, keep_paths: bool = False,
            bench: BenchmarkSpec | None = None, G_T: float | None = None) -> RolloutResult:
    """Self-financing discrete rebalancing.

    Holdings are reset at grid indices ``0, rebalance_every, 2 rebalance_every, ...``
    and held fixed in between; wealth is marked to model prices each step.
    Traded policies hold (bond, S1, put) and need ``bench`` and ``G_T``; the put
    is marked by its Black-Scholes value and pays (G_T - V_B(T))^+ at T.
    Wealth that hits zero is flagged bankrupt and frozen at zero.
    """
    n, N = ens.config.n_paths, ens.config.n_steps
    traded = policy.assets == "traded"
    S0 = ens.bond()
    S1 = ens.stock(1)
    if traded:
        if bench is None or G_T is None:
            raise ValueError("traded rollouts need the benchmark and the strike")
        VB = ens.benchmark(bench, v0)
        third = np.empty_like(VB)
        for k in range(N):
            third[:, k] = put_price(VB[:, k], ens.T - ens.times[k], bench, ens.market, G_T)
        third[:, N] = np.maximum(G_T - VB[:, N], 0.0)
    else:
        third = ens.stock(2)
    prices = np.stack([np.broadcast_to(S0, S1.shape), S1, third], axis=-1)  # (n, N+1, 3)

    wealth = np.empty((n, N + 1)) if keep_paths else None
    W = np.full(n, float(v0))
    bankrupt = np.zeros(n, dtype=bool)
    cache = {}
    units = np.zeros((n, 3))
    if keep_paths:
        wealth[:, 0] = W
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(N):
            if k % rebalance_every == 0:
                w12 = np.asarray(policy.weights_at(k, ens, cache), dtype=float)
                if traded:
                    # put units from the basic weight directly: phi = pi*_2 W / (pi_B V_B delta);
                    # once the delta underflows the put is worthless and is not held
                    delta = put_delta(VB[:, k], ens.T - ens.times[k], bench, ens.market, G_T)
                    live = delta < -DELTA_FLOOR
                    phi2 = np.where(live, w12[:, 1] * W / (bench.pi_B * VB[:, k] * np.where(live, delta, -1.0)), 0.0)
                    phi1 = w12[:, 0] * W / prices[:, k, 1]
                    phi0 = (W - phi1 * prices[:, k, 1] - phi2 * prices[:, k, 2]) / prices[:, k, 0]
                    units = np.stack([phi0, phi1, phi2], axis=-1)
                else:
                    wts = np.column_stack([1.0 - w12.sum(axis=1), w12])
                    units = wts * W[:, None] / prices[:, k, :]
                units[bankrupt] = 0.0
            W = np.einsum("ij,ij->i", units, prices[:, k + 1, :])
            newly = (W <= 0.0) & ~bankrupt
            bankrupt |= newly
            W = np.where(bankrupt, 0.0, W)
            units[newly] = 0.0
            if keep_paths:
                wealth[:, k + 1] = W
    return RolloutResult(terminal=W, bankrupt=bankrupt, wealth=wealth)


# ---------------------------------------------------------------- terminal laws


def terminal_wealth(strategy, ens: PathEnsemble) -> np.ndarray:
    """Exact terminal wealth of a solved strategy on the ensemble's W(T)."""
    m, T = ens.market, ens.T
    if isinstance(strategy, OptimalStrategy):
        strategy = strategy.solution
    if isinstance(strategy, ReferenceStrategy):
        if strategy.kind is ReferenceKind.DN:
            strategy = strategy.solution
        else:
            pi = np.asarray(strategy.weights)
            drift = m.r + float(pi @ m.excess)
            s2 = float(np.sum((m.sigma.T @ pi) ** 2))
            return strategy.product.v0 * np.exp((drift - 0.5 * s2) * T + ens.W_T @ (m.sigma.T @ pi))
    if isinstance(strategy, VarSolution):
        return strategy.payoff(strategy.unconstrained_wealth(T, ens.W_T))
    raise TypeError(f"no terminal law for {type(strategy).__name__}")


# ---------------------------------------------------------------- PELC


def expected_benchmark_put_payoff(bench: BenchmarkSpec, m: MarketParams, v0: float, G_T: float, T: float) -> float:
    """E[(G - V_B(T))^+] under the real-world benchmark drift r + pi_B (mu2 - r)."""
    if G_T <= 0.0:
        return 0.0
    s = bench.vol(m)
    drift = bench.drift(m)
    fwd = v0 * math.exp(drift * T)
    if s == 0.0:
        return max(G_T - fwd, 0.0)
    d1 = (math.log(v0 / G_T) + (drift + 0.5 * s * s) * T) / (s * math.sqrt(T))
    d2 = d1 - s * math.sqrt(T)
    return G_T * float(ndtr(-d2)) - fwd * float(ndtr(-d1))


def expected_guarantee_gap(sol: VarSolution) -> float:
    """Closed form of E[(G - f(V(T)))^+] = E[(G - V(T)) 1{V(T) < k}]."""
    if sol.k_eps <= 0.0 or sol.G_T <= 0.0:
        return 0.0
    mean, sd = sol.terminal_log_law()
    if sd == 0.0:
        vT = math.exp(mean)
        return max(sol.G_T - vT, 0.0) if vT < sol.k_eps else 0.0
    z = (math.log(sol.k_eps) - mean) / sd
    return sol.G_T * float(ndtr(z)) - math.exp(mean + 0.5 * sd * sd) * float(ndtr(z - sd))


@dataclass(frozen=True)
class PelcResult:
    pelc: float
    rho_pelc: float
    numerator: float
    denominator: float
    denominator_se: float

    @property
    def ci(self) -> tuple[float, float]:
        """Delta-method 95% band on PELC from the denominator's standard error."""
        half = 1.96 * self.pelc * self.denominator_se / self.denominator
        return self.pelc - half, self.pelc + half


def pelc(strat: OptimalStrategy, config: SimConfig, t: float = 0.0) -> PelcResult:
    """Expected reinsurance coverage over expected shortfall below the guarantee at time 0.

    Numerator phi_2(0) E[(G - V_B(T))^+] in closed form; denominator
    E[(G - f(V_hat(T)))^+] by Monte Carlo on the ensemble's terminal W.
    """
    if t != 0.0:
        raise NotImplementedError("PELC is implemented at t = 0")
    spec, m = strat.product, strat.market
    # f(V_hat(T)) depends on W(T) only, so a single exact step suffices
    ens = generate(replace(config, n_steps=1), m, spec)
    gap = np.maximum(spec.G_T - terminal_wealth(strat, ens), 0.0)
    den = float(gap.mean())
    se = float(gap.std(ddof=1) / math.sqrt(gap.size)) if gap.size > 1 else math.inf
    if den == 0.0:
        raise ZeroDenominator(f"no path fell below the guarantee {spec.G_T:.6g} (se {se:.3g})")
    phi2 = strat.initial_policy().phi_bar[2]
    num = phi2 * expected_benchmark_put_payoff(strat.benchmark, m, spec.v0, spec.G_T, spec.T)
    ratio = num / den
    return PelcResult(pelc=ratio, rho_pelc=m.rho * ratio, numerator=num, denominator=den, denominator_se=se)


# ---------------------------------------------------------------- risk-return


@dataclass(frozen=True)
class RiskReturn:
    annual_return: float
    annual_std: float
    shortfall: float
    shortfall_exact: bool


def profile_from_terminal(terminal, v0: float, T: float, G_T: float, std_convention: str = "gross") -> RiskReturn:
    """Annualised risk-return figures of a terminal-wealth sample.

    Return is geometric: (E[V(T)] / v0)^{1/T} - 1.  ``std_convention='gross'``
    scales the std of the gross return V(T)/v0 by 1/sqrt(T); ``'log'`` uses the
    log return ln(V(T)/v0) instead.
    """
    x = np.asarray(terminal, dtype=float)
    ret = (x.mean() / v0) ** (1.0 / T) - 1.0
    if std_convention == "gross":
        sd = float(np.std(x / v0)) / math.sqrt(T)
    elif std_convention == "log":
        with np.errstate(divide="ignore"):
            sd = float(np.std(np.log(x / v0))) / math.sqrt(T)
    else:
        raise ValueError(f"unknown std convention {std_convention!r}")
    return RiskReturn(float(ret), sd, float((x < G_T).mean()), False)


def risk_return_profile(strategy, config: SimConfig, spec: ProductSpec, m: MarketParams | None = None,
                        std_convention: str = "gross") -> RiskReturn:
    """Risk-return profile of a solved strategy (optimal, DN or CN) or constant weights.

    Shortfall is closed form for all three solved strategies.
    """
    if m is None:
        m = getattr(strategy, "market", None)
        if m is None:
            raise ValueError("market parameters required")
    if not isinstance(strategy, (OptimalStrategy, ReferenceStrategy, VarSolution)):
        from .strategy import constant_mix
        strategy = constant_mix(m, spec, tuple(strategy))
    ens = generate(config, m, spec)
    out = profile_from_terminal(terminal_wealth(strategy, ens), spec.v0, spec.T, spec.G_T, std_convention)
    if isinstance(strategy, ReferenceStrategy) and strategy.kind is ReferenceKind.CN:
        q = cn_shortfall(strategy.weights, m, spec)
    else:
        sol = strategy.solution if hasattr(strategy, "solution") else strategy
        q = sol.shortfall()
    return RiskReturn(out.annual_return, out.annual_std, q, True)


# ---------------------------------------------------------------- replication


@dataclass(frozen=True)
class Put:
    strike: float

    def value(self, VB, ttm, bench, m):
        return put_price(VB, ttm, bench, m, self.strike)

    def delta(self, VB, ttm, bench, m):
        return put_delta(VB, ttm, bench, m, self.strike)

    def payoff(self, VB):
        return np.maximum(self.strike - VB, 0.0)


@dataclass(frozen=True)
class Forward:
    strike: float

    def value(self, VB, ttm, bench, m):
        return VB - self.strike * math.exp(-m.r * ttm)

    def delta(self, VB, ttm, bench, m):
        return np.ones_like(np.asarray(VB, dtype=float))

    def payoff(self, VB):
        return VB - self.strike


@dataclass(frozen=True)
class ReplicationStats:
    mean_abs: float
    max_abs: float
    rmse: float


def replication_check(claim, config: SimConfig, m: MarketParams, spec: ProductSpec,
                      bench: BenchmarkSpec) -> ReplicationStats:
    """Delta-hedge ``claim`` on the benchmark with the bond; report terminal hedge errors."""
    ens = generate(config, m, spec)
    VB = ens.benchmark(bench, spec.v0)
    B = ens.bond()
    N = config.n_steps
    H = np.full(config.n_paths, float(claim.value(spec.v0, spec.T, bench, m)))
    for k in range(N):
        ttm = ens.T - ens.times[k]
        d = np.asarray(claim.delta(VB[:, k], ttm, bench, m), dtype=float)
        bond_units = (H - d * VB[:, k]) / B[k]
        H = bond_units * B[k + 1] + d * VB[:, k + 1]
    err = np.abs(H - claim.payoff(VB[:, N]))
    return ReplicationStats(float(err.mean()), float(err.max()), float(np.sqrt(np.mean(err**2))))
