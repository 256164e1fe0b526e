"""Optimal investment-reinsurance policies under VaR and no-short-selling constraints."""

from .dual import DualVector, MertonPolicy, optimal_dual_vector, merton_policy
from .errors import Infeasible, NoConvergence, VarReinsError
from .market import BASE_BENCHMARK, BASE_MARKET, BASE_PRODUCT, BenchmarkSpec, MarketParams, ProductSpec
from .var_solver import Regime, VarSolution, solve_var_parameters

__all__ = [
    "BASE_BENCHMARK", "BASE_MARKET", "BASE_PRODUCT", "BenchmarkSpec", "DualVector", "Infeasible",
    "MarketParams", "MertonPolicy", "NoConvergence", "ProductSpec", "Regime", "VarReinsError",
    "VarSolution", "merton_policy", "optimal_dual_vector", "solve_var_parameters",
]
__version__ = "0.1.0"
