"""Auxiliary-market machinery for the allocation cone K = [0, inf) x (-inf, 0].

A constant dual vector ``lam`` in K shifts the drifts to ``mu + lam``; the
optimal one minimises the norm of the shifted market price of risk over K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import MarketParams, market_price_of_risk

CONE_TOL = 1e-12


def in_cone(x, tol: float = CONE_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(x[0] >= -tol and x[1] <= tol)


@dataclass(frozen=True)
class DualVector:
    lam: tuple[float, float]

    def __post_init__(self):
        if not in_cone(self.lam):
            raise ValueError(f"dual vector {self.lam} outside the cone [0,inf) x (-inf,0]")

    @classmethod
    def zero(cls) -> "DualVector":
        return cls((0.0, 0.0))

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.lam, dtype=float)


@dataclass(frozen=True)
class MertonPolicy:
    pi_hat: tuple[float, float]

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.pi_hat, dtype=float)


def gamma_lambda(m: MarketParams, lam: DualVector) -> np.ndarray:
    return m.sigma_inv @ (m.excess + lam.vec)


def _objective(m: MarketParams, x: np.ndarray) -> float:
    e = m.excess + x
    return float(e @ m.cov_inv @ e)


def optimal_dual_vector(m: MarketParams) -> DualVector:
    """Minimiser of |gamma + sigma^-1 x|^2 over the cone, by enumerating the KKT cases.

    The objective is the convex quadratic (mu - r + x)' C^-1 (mu - r + x).  The
    candidates are the vertex, the stationary point on each face and the
    unconstrained stationary point ``x = r - mu``; the best feasible one wins.
    Candidates are tried vertex first and only replaced on strict improvement,
    so ties resolve toward exact zeros.
    """
    e1, e2 = m.excess
    s1, s2, rho = m.sigma1, m.sigma2, m.rho
    m.cov_inv  # raises SingularVolatility for |rho| = 1

    candidates = [
        np.zeros(2),
        np.array([s1 * rho * e2 / s2 - e1, 0.0]),  # face x2 = 0
        np.array([0.0, s2 * rho * e1 / s1 - e2]),  # face x1 = 0
        np.array([-e1, -e2]),  # interior: risk-neutralising shift
    ]
    best = candidates[0]
    best_val = _objective(m, best)
    for x in candidates[1:]:
        if x[0] < 0.0 or x[1] > 0.0:
            continue
        val = _objective(m, x)
        if val < best_val * (1.0 - 1e-12):
            best, best_val = x, val
    return DualVector((float(best[0]) + 0.0, float(best[1]) + 0.0))


def merton_policy(m: MarketParams, lam: DualVector, b: float) -> MertonPolicy:
    if not (b < 1 and b != 0):
        raise ValueError("b must satisfy b < 1, b != 0")
    pi = m.cov_inv @ (m.excess + lam.vec) / (1.0 - b)
    return MertonPolicy((float(pi[0]), float(pi[1])))


def check_condition_b(pi, lam: DualVector, tol: float = 1e-10) -> bool:
    """True iff every sampled policy lies in the cone and is orthogonal to ``lam``.

    ``pi`` is either an array of policy vectors shaped ``(n, 2)`` / ``(2,)`` or
    a zero-argument callable returning such an array.
    """
    pts = np.atleast_2d(np.asarray(pi() if callable(pi) else pi, dtype=float))
    if np.any(pts[:, 0] < -CONE_TOL) or np.any(pts[:, 1] > CONE_TOL):
        return False
    return bool(np.all(np.abs(pts @ lam.vec) <= tol))
