"""Risk/return measures: portfolio moments, mean-variance frontier, Sharpe
ratio and the per-personality daily objective."""

from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SHARPE_CAP = 1e12
_STD_FLOOR = 1e-12
GOLDEN = 0.618


class Personality(str, enum.Enum):
    CRAZY = "crazy"
    STABLE = "stable"
    MIDDLE = "middle"


@dataclass(frozen=True)
class AllocationWeights:
    """Long-only weights over (cash, gold, bitcoin)."""

    e: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.e, dtype=float)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise ValueError(f"weights must be non-negative and sum to 1: {self.e}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.e, dtype=float)


@dataclass(frozen=True)
class RiskParams:
    personality: Personality = Personality.MIDDLE
    delta: float = 0.0
    y_f: float = 0.0
    golden: float = GOLDEN

    def __post_init__(self):
        object.__setattr__(self, "personality", Personality(self.personality))
        if not 0 <= self.delta <= 1:
            raise ValueError(f"cash floor must be in [0, 1], got {self.delta}")
        if self.golden <= 0:
            raise ValueError("risk weight must be positive")


def portfolio_moments(returns_matrix, weights) -> tuple[float, float]:
    """Mean and variance of the weighted portfolio return.

    ``returns_matrix`` has one column per asset and one row per sample.
    """
    R = np.asarray(returns_matrix, dtype=float)
    w = weights.as_array() if isinstance(weights, AllocationWeights) else np.asarray(weights, float)
    if R.ndim != 2 or R.shape[1] != len(w):
        raise ValueError(f"returns matrix {R.shape} does not match {len(w)} weights")
    if R.shape[0] < 2:
        raise ValueError("need at least 2 samples per asset")
    mu = R.mean(axis=0)
    cov = np.cov(R, rowvar=False, bias=True)
    return float(w @ mu), float(w @ np.atleast_2d(cov) @ w)


def weight_grid(n_assets: int, step: float) -> np.ndarray:
    """All long-only weight vectors whose entries are multiples of ``step``."""
    if not 0 < step <= 0.5:
        raise ValueError("grid step must lie in (0, 0.5]")
    m = int(round(1.0 / step))
    rows = [c for c in itertools.product(range(m + 1), repeat=n_assets - 1) if sum(c) <= m]
    grid = np.array([list(c) + [m - sum(c)] for c in rows], dtype=float) / m
    return grid


def markowitz_sweep(returns_matrix, grid_step: float = 0.05):
    """Pareto-efficient long-only allocations, sorted by variance.

    Returns a list of ``(AllocationWeights, mean, variance)`` where no entry
    has both a lower-or-equal variance and a higher-or-equal mean than
    another (with at least one strict).
    """
    R = np.asarray(returns_matrix, dtype=float)
    grid = weight_grid(R.shape[1], grid_step)
    mu = R.mean(axis=0)
    cov = np.atleast_2d(np.cov(R, rowvar=False, bias=True))
    means = grid @ mu
    variances = np.einsum("ij,jk,ik->i", grid, cov, grid)
    order = np.lexsort((-means, variances))
    frontier = []
    best_mean = -np.inf
    for i in order:
        if means[i] > best_mean + 1e-15:
            frontier.append((AllocationWeights(tuple(grid[i])), float(means[i]),
                             float(variances[i])))
            best_mean = means[i]
    return frontier


def write_frontier_csv(frontier, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w_cash", "w_gold", "w_btc", "mean", "variance"])
        for weights, mean, var in frontier:
            w.writerow([*weights.e, mean, var])


def sharpe_ratio(returns, y_f: float = 0.0) -> float:
    """``(mean - y_f) / std`` with population std.

    A (numerically) zero std gives 0 when the excess is also zero and
    ``+-SHARPE_CAP`` otherwise.
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("Sharpe ratio needs at least 2 returns")
    return float(sharpe_rows(r[None, :], y_f)[0])


def sharpe_rows(R: np.ndarray, y_f: float = 0.0) -> np.ndarray:
    """Row-wise Sharpe ratio of a 2-D array of return samples."""
    excess = R.mean(axis=1) - y_f
    sd = R.std(axis=1)
    flat = sd < _STD_FLOOR
    out = np.empty(len(R))
    out[~flat] = excess[~flat] / sd[~flat]
    ex = np.where(np.abs(excess[flat]) < _STD_FLOOR, 0.0, excess[flat])
    out[flat] = np.sign(ex) * SHARPE_CAP
    return out


def objective_rows(personality: Personality, trajectories, sigma, y_f: float = 0.0,
                   golden: float = GOLDEN) -> np.ndarray:
    """Daily objective for many planned value paths at once.

    ``trajectories`` is ``(n, 4)``: value today and after each of the next
    three days. ``sigma`` is the risk assessment, scalar or ``(n,)``.
    """
    V = np.atleast_2d(np.asarray(trajectories, dtype=float))
    personality = Personality(personality)
    if personality is Personality.CRAZY:
        return V[:, -1].copy()
    if personality is Personality.STABLE:
        return sharpe_rows(V[:, 1:] / V[:, :-1] - 1.0, y_f)
    return (V[:, -1] - V[:, 0]) - golden * np.asarray(sigma, dtype=float)


def objective(personality: Personality, trajectory, sigma_i: float = 0.0, y_f: float = 0.0,
              golden: float = GOLDEN) -> float:
    """Objective of one 3-day value path ``[V_i, V_i+1, V_i+2, V_i+3]``.

    crazy: terminal value. stable: Sharpe ratio of the three daily returns.
    middle: value gained minus ``golden`` times the risk assessment.
    """
    V = np.asarray(trajectory, dtype=float)
    if V.shape != (4,):
        raise ValueError("trajectory must hold 4 values")
    if np.any(V <= 0):
        raise ValueError("trajectory values must be positive")
    return float(objective_rows(personality, V[None, :], sigma_i, y_f, golden)[0])
