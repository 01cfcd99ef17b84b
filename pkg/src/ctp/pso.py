"""Global-best particle swarm optimiser (maximisation) with a repair step.

Positions outside the feasible region are projected back by a caller-
supplied ``repair`` function rather than penalised. Objectives are
evaluated on the whole swarm at once when ``vectorized=True``; otherwise
they are called row by row. All random draws come from one generator in
the driver loop, so results do not depend on how evaluations are
scheduled.
"""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InfeasibleError

Objective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 100
    omega_start: float = 0.9
    omega_end: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    max_iters: int = 200
    seed: int = 0
    v_max_frac: float = 0.5
    improve_tol: float = 1e-12

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if not self.omega_start >= self.omega_end > 0:
            raise ValueError("inertia must decay from omega_start to omega_end > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def omega(self, t: int) -> float:
        if self.max_iters == 1:
            return self.omega_start
        return self.omega_start + (self.omega_end - self.omega_start) * t / (self.max_iters - 1)


@dataclass
class Swarm:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_scores: np.ndarray
    global_best_position: np.ndarray
    global_best_score: float
    lo: np.ndarray
    hi: np.ndarray
    v_max: np.ndarray
    rng: np.random.Generator = field(repr=False)
    iteration: int = 0

    def copy(self) -> "Swarm":
        return copy.deepcopy(self)


def _evaluate(objective: Objective, X: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(objective(X), dtype=float)
    return np.array([float(objective(x)) for x in X])


def _identity(X):
    return X


def initialize(bounds, objective: Objective, config: PsoConfig = PsoConfig(),
               repair: Callable[[np.ndarray], np.ndarray] | None = None,
               feasible: Callable[[np.ndarray], np.ndarray] | None = None,
               seeds=None, vectorized: bool = False) -> Swarm:
    """Scatter particles uniformly in ``bounds`` and score them.

    ``bounds`` is ``(lo, hi)`` arrays. ``seeds`` optionally pins the first
    particles to given positions (e.g. a warm start). Particles that are
    still infeasible after repair are redrawn, up to 1000 times.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("bounds must satisfy lo <= hi per dimension")
    repair = repair or _identity
    rng = np.random.default_rng(config.seed)
    n, dim = config.n_particles, len(lo)
    span = hi - lo

    X = lo + rng.random((n, dim)) * span
    if seeds is not None:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=float))[:n]
        X[: len(seeds)] = np.clip(seeds, lo, hi)
    X = repair(X)
    if feasible is not None:
        bad = ~feasible(X)
        attempts = 0
        while np.any(bad):
            attempts += 1
            if attempts > 1000:
                raise InfeasibleError("could not sample a feasible starting swarm")
            X[bad] = repair(lo + rng.random((int(bad.sum()), dim)) * span)
            bad = ~feasible(X)
    V = (rng.random((n, dim)) * 2 - 1) * 0.1 * span
    scores = _evaluate(objective, X, vectorized)
    # ties (within the improvement tolerance) go to the earliest particle, so a
    # seeded position wins over random ones that only match it up to rounding
    top = np.max(scores)
    g = int(np.argmax(scores >= top - config.improve_tol * max(1.0, abs(top))))
    return Swarm(X, V, X.copy(), scores.copy(), X[g].copy(), float(scores[g]), lo, hi,
                 config.v_max_frac * span, rng)


def step(swarm: Swarm, objective: Objective, config: PsoConfig = PsoConfig(),
         repair: Callable[[np.ndarray], np.ndarray] | None = None,
         vectorized: bool = False) -> Swarm:
    """One velocity/position update of every particle, in place; returns the swarm."""
    t = swarm.iteration
    n, dim = swarm.positions.shape
    r1 = swarm.rng.random((n, dim))
    r2 = swarm.rng.random((n, dim))
    X = swarm.positions
    V = (config.omega(t) * swarm.velocities
         + config.c1 * r1 * (swarm.best_positions - X)
         + config.c2 * r2 * (swarm.global_best_position - X))
    V = np.clip(V, -swarm.v_max, swarm.v_max)
    X = np.clip(X + V, swarm.lo, swarm.hi)
    if repair is not None:
        X = repair(X)
    scores = _evaluate(objective, X, vectorized)

    tol = config.improve_tol
    better = scores > swarm.best_scores + tol * np.maximum(1.0, np.abs(swarm.best_scores))
    swarm.best_positions[better] = X[better]
    swarm.best_scores[better] = scores[better]
    g = int(np.argmax(swarm.best_scores))
    gb = swarm.global_best_score
    if swarm.best_scores[g] > gb + tol * max(1.0, abs(gb)):
        swarm.global_best_score = float(swarm.best_scores[g])
        swarm.global_best_position = swarm.best_positions[g].copy()
    swarm.positions, swarm.velocities = X, V
    swarm.iteration = t + 1
    return swarm


@dataclass(frozen=True)
class PsoResult:
    position: np.ndarray
    score: float
    trace: np.ndarray


def optimize(objective: Objective, bounds, config: PsoConfig = PsoConfig(),
             repair=None, feasible=None, seeds=None, vectorized: bool = False) -> PsoResult:
    """Maximise ``objective`` over ``bounds``; ``trace[t]`` is the best score after t steps."""
    swarm = initialize(bounds, objective, config, repair, feasible, seeds, vectorized)
    trace = [swarm.global_best_score]
    for _ in range(config.max_iters):
        step(swarm, objective, config, repair, vectorized)
        trace.append(swarm.global_best_score)
    return PsoResult(swarm.global_best_position.copy(), swarm.global_best_score, np.array(trace))


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "best_score"])
        for i, s in enumerate(trace):
            w.writerow([i, repr(float(s))])
