"""Robustness checks for an optimised trading schedule.

``perturb_schedule`` jitters every committed trade by a small random
multiplicative amount and replays the schedule; ``parameter_sensitivity``
re-optimises the whole backtest with one input (starting cash or a
commission rate) nudged.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backtest import (
    HORIZON,
    BacktestConfig,
    BacktestReport,
    plan_scores,
    replay,
    report_window,
    run,
    simulate_plans,
)
from .errors import CTPError, UsageError
from .market_data import PriceSeries, TradingCalendar
from .portfolio import CommissionRates

BASELINE_LABEL = "+0%"


@dataclass(frozen=True)
class PerturbationSpec:
    rel_range: tuple = (0.01, 0.03)
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.rel_range
        if not 0 <= lo <= hi < 1:
            raise UsageError(f"perturbation range must satisfy 0 <= lo <= hi < 1: {self.rel_range}")
        if self.trials < 1:
            raise UsageError("need at least one perturbation trial")


@dataclass(frozen=True)
class PerturbationResult:
    """Final values and mean daily objectives, baseline and per trial.

    ``trial_objectives[k]`` averages, over the optimised days, the daily
    objective the optimiser maximised, evaluated with that day's trade
    replaced by trial ``k``'s perturbed trade (state and forecasts as in
    the baseline run).
    """

    baseline_value: float
    trial_values: np.ndarray
    baseline_objective: float
    trial_objectives: np.ndarray
    flagged: np.ndarray

    @property
    def beat_fraction(self) -> float:
        """Share of trials whose objective is strictly above the baseline's."""
        tol = 1e-12 * max(1.0, abs(self.baseline_objective))
        return float(np.mean(self.trial_objectives > self.baseline_objective + tol))


@dataclass(frozen=True)
class SensitivityRow:
    label: str
    final_value: float


@dataclass(frozen=True)
class ParameterDelta:
    label: str
    parameter: str  # initial_cash | alpha | beta
    change: float


DEFAULT_DELTAS = (
    ParameterDelta(BASELINE_LABEL, "initial_cash", 0.0),
    ParameterDelta("+0.1%V0", "initial_cash", 0.001),
    ParameterDelta("+0.1%α", "alpha", 0.001),
    ParameterDelta("+0.1%β", "beta", 0.001),
    ParameterDelta("-0.1%α", "alpha", -0.001),
    ParameterDelta("-0.1%β", "beta", -0.001),
)


def _optimised_days(report: BacktestReport) -> np.ndarray:
    return np.array([i for i, r in enumerate(report.records)
                     if r.status in ("optimized", "flat_forecast")], dtype=int)


def _day_objective(report: BacktestReport, k: int, pairs: np.ndarray, gold_mark: float,
                   btc_mark: float, tradable) -> np.ndarray:
    """Objective of day ``k`` with its first-day trade replaced by each row of ``pairs``."""
    r = report.records[k]
    cfg = report.config
    plans = np.tile(np.asarray(r.plan, dtype=float), (len(pairs), 1))
    plans[:, :2] = pairs
    gold_path = np.r_[gold_mark, r.gold_forecast]
    btc_path = np.r_[btc_mark, r.btc_forecast]
    _, V, gu, bu = simulate_plans(r.state, plans, gold_path, btc_path, tradable, cfg.rates,
                                  cfg.risk.delta)
    return plan_scores(cfg.risk, V, gu, bu, r.gold_sigma, r.btc_sigma)


def perturb_schedule(report: BacktestReport, gold: PriceSeries, btc: PriceSeries,
                     calendar: TradingCalendar,
                     spec: PerturbationSpec = PerturbationSpec()) -> PerturbationResult:
    """Multiply each committed ``(x, y)`` by ``1 +- u``, ``u ~ U[rel_range]``.

    Signs are drawn independently per entry. Perturbed trades are repaired
    to feasibility and replayed against the realised prices. Trial ``k``
    uses its own random stream derived from ``(seed, k)``.
    """
    if not report.records:
        raise UsageError("report has no records to perturb")
    gm, bm, trad, i0 = report_window(report, gold, btc, calendar)
    D = report.decisions
    cfg = report.config
    base_values, _, _ = replay(D, gm, bm, trad, cfg.rates, cfg.initial_cash, cfg.risk.delta)
    days = _optimised_days(report)
    n = len(D)
    lo, hi = spec.rel_range

    factors = np.empty((spec.trials, n, 2))
    for t in range(spec.trials):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, t]))
        u = rng.uniform(lo, hi, (n, 2))
        sign = rng.choice([-1.0, 1.0], (n, 2))
        factors[t] = 1.0 + sign * u

    values = np.empty(spec.trials)
    flagged = np.zeros(spec.trials, dtype=bool)
    for t in range(spec.trials):
        try:
            v, _, _ = replay(D * factors[t], gm, bm, trad, cfg.rates, cfg.initial_cash,
                             cfg.risk.delta, fix=True)
            values[t] = v[-1]
            flagged[t] = not np.isfinite(v[-1]) or v[-1] <= 0
        except CTPError:
            values[t] = np.nan
            flagged[t] = True

    base_obj = 0.0
    trial_obj = np.zeros(spec.trials)
    for k in days:
        tradable = [calendar.gold_tradable_at(i0 + k + j) for j in range(HORIZON)]
        pairs = np.vstack([D[k], D[k] * factors[:, k]])
        scores = _day_objective(report, k, pairs, gm[k], bm[k], tradable)
        base_obj += scores[0]
        trial_obj += scores[1:]
    if len(days):
        base_obj /= len(days)
        trial_obj /= len(days)
    return PerturbationResult(float(base_values[-1]), values, float(base_obj), trial_obj, flagged)


def scaled_replay(report: BacktestReport, gold: PriceSeries, btc: PriceSeries,
                  calendar: TradingCalendar, factor: float) -> float:
    """Final value of the report's frozen decisions replayed from ``factor * V0``."""
    gm, bm, trad, _ = report_window(report, gold, btc, calendar)
    cfg = report.config
    v, _, _ = replay(report.decisions, gm, bm, trad, cfg.rates, factor * cfg.initial_cash,
                     cfg.risk.delta)
    return float(v[-1])


def apply_delta(config: BacktestConfig, delta: ParameterDelta,
                absolute: bool = False) -> BacktestConfig:
    """Config with one parameter nudged.

    Relative by default: ``p * (1 + change)``. With ``absolute`` the change
    is added instead (for rates, in fractional units: 0.001 = 0.1 point).
    """
    def nudge(v):
        return v + delta.change if absolute else v * (1.0 + delta.change)

    if delta.parameter == "initial_cash":
        return dataclasses.replace(config, initial_cash=nudge(config.initial_cash))
    if delta.parameter in ("alpha", "beta"):
        r = config.rates
        new = CommissionRates(
            alpha=nudge(r.alpha) if delta.parameter == "alpha" else r.alpha,
            beta=nudge(r.beta) if delta.parameter == "beta" else r.beta,
            symmetric=r.symmetric)
        return dataclasses.replace(config, rates=new)
    raise UsageError(f"unknown sensitivity parameter {delta.parameter!r}")


def parameter_sensitivity(config: BacktestConfig, gold: PriceSeries, btc: PriceSeries,
                          calendar: TradingCalendar, deltas=DEFAULT_DELTAS,
                          absolute: bool = False, runner=run,
                          cache: dict | None = None) -> list[SensitivityRow]:
    """Re-run (and re-optimise) the backtest once per delta."""
    deltas = list(deltas)
    if not deltas:
        raise UsageError("no parameter deltas given")
    cache = {} if cache is None else cache
    rows = []
    for d in deltas:
        rep = runner(gold, btc, calendar, apply_delta(config, d, absolute), cache=cache)
        rows.append(SensitivityRow(d.label, rep.final_value))
    return rows


def write_trials_csv(result: PerturbationResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "final_value", "mean_objective", "flagged"])
        w.writerow(["baseline", repr(result.baseline_value), repr(result.baseline_objective), 0])
        for t, (v, o, f) in enumerate(zip(result.trial_values, result.trial_objectives,
                                          result.flagged), start=1):
            w.writerow([t, repr(float(v)), repr(float(o)), int(f)])


def write_rows_csv(rows, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "final_value"])
        for r in rows:
            w.writerow([r.label, repr(float(r.final_value))])
