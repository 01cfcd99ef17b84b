"""Daily decision loop.

Each day ``i`` the engine

1. builds each asset's price history up to and including day ``i``,
2. picks a window length and fits ARIMA per asset,
3. forecasts the next three prices,
4. searches the six trade fractions ``[x_i, y_i, x_i+1, y_i+1, x_i+2, y_i+2]``
   with PSO, valuing each candidate plan along the forecast prices,
5. commits ``(x_i, y_i)`` and settles it at the realised day ``i + 1`` prices.

Gold is settled at its last traded price on days it does not trade, and
its decision-time history is gap-filled using only prices already seen, so
nothing dated after day ``i`` reaches the day-``i`` decision.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import forecaster as fc
from .errors import CTPError, DataError, DegenerateSeriesError, NumericalError
from .market_data import PriceSeries, TradingCalendar, hermite_eval, shape_preserving_slopes
from .portfolio import (
    FEAS_TOL,
    CommissionRates,
    PortfolioState,
    TradeDecision,
    cash_after,
    commission_cost,
    feasible_mask,
    repair,
    transition,
)
from .pso import PsoConfig, optimize
from .risk import RiskParams, objective_rows, portfolio_moments

logger = logging.getLogger(__name__)

HORIZON = 3

FULL_START = "2016-09-11"
FULL_END = "2021-09-10"


@dataclass(frozen=True)
class WindowPolicy:
    """``fixed``: always ``length`` days. ``adaptive``: hill-climb from ``length``."""

    mode: str = "adaptive"
    length: int = 60
    max_steps: int = 50

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown window mode {self.mode!r}")

    @property
    def history_needed(self) -> int:
        return self.length + (self.max_steps + 1 if self.mode == "adaptive" else 0)


@dataclass(frozen=True)
class MarkowitzParams:
    lookback: int = 60
    grid_step: float = 0.05
    risk_aversion: float = 1.0


@dataclass(frozen=True)
class BacktestConfig:
    start_date: str | None = None
    end_date: str | None = None
    initial_cash: float = 1000.0
    rates: CommissionRates = CommissionRates()
    risk: RiskParams = RiskParams()
    window: WindowPolicy = WindowPolicy()
    pso: PsoConfig = PsoConfig()
    spec: fc.ArimaSpec = fc.ArimaSpec()
    markowitz: MarkowitzParams = MarkowitzParams()

    def __post_init__(self):
        if self.initial_cash <= 0:
            raise ValueError("initial cash must be positive")
        if self.start_date and self.end_date and \
                np.datetime64(self.start_date) >= np.datetime64(self.end_date):
            raise ValueError("start date must precede end date")

    @property
    def seed(self) -> int:
        return self.pso.seed

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self), default=str))


@dataclass(frozen=True)
class DailyRecord:
    date: np.datetime64
    state: PortfolioState
    decision: TradeDecision
    gold_forecast: tuple
    btc_forecast: tuple
    gold_sigma: float
    btc_sigma: float
    plan: tuple
    value_after: float
    gold_window: int = 0
    btc_window: int = 0
    status: str = "optimized"
    score: float = float("nan")


@dataclass(frozen=True)
class BacktestReport:
    records: tuple
    final_value: float
    personality: str
    config: BacktestConfig
    seed: int
    strategy: str = "pso"

    @property
    def values(self) -> np.ndarray:
        """Portfolio value on each decision date, then the final value."""
        return np.array([r.state.value for r in self.records] + [self.final_value])

    @property
    def decisions(self) -> np.ndarray:
        return np.array([[r.decision.x, r.decision.y] for r in self.records]).reshape(-1, 2)


# --- market access -----------------------------------------------------

def settlement_prices(gold: PriceSeries, btc: PriceSeries) -> tuple[np.ndarray, np.ndarray]:
    """Prices used to value the portfolio each day.

    Gold uses the last observed price on non-observed days.
    """
    if len(gold) != len(btc) or np.any(gold.dates != btc.dates):
        raise DataError("gold and bitcoin series are not aligned")
    # leading days before the first observation keep their filled value
    first = int(np.argmax(gold.observed)) if gold.observed.any() else len(gold)
    idx = np.where(gold.observed | (np.arange(len(gold)) < first), np.arange(len(gold)), 0)
    np.maximum.accumulate(idx, out=idx)
    return gold.prices[idx].copy(), btc.prices.copy()


class _Market:
    """Aligned price arrays plus decision-time (causal) history views."""

    def __init__(self, gold: PriceSeries, btc: PriceSeries, calendar: TradingCalendar):
        self.dates = gold.dates
        self.gold_mark, self.btc_mark = settlement_prices(gold, btc)
        self.calendar = calendar
        self.knot_idx = np.flatnonzero(gold.observed)
        self.knot_price = gold.prices[gold.observed]
        self.btc_prices = btc.prices

    def __len__(self):
        return len(self.dates)

    def gold_history(self, day: int, length: int) -> tuple[np.ndarray, int]:
        """Gold prices for days ``day-length+1..day`` built from knots up to ``day``.

        Returns the prices and the index of the latest knot used.
        """
        first = day - length + 1
        k_hi = int(np.searchsorted(self.knot_idx, day, side="right"))
        k_first = int(np.searchsorted(self.knot_idx, first, side="right")) - 1
        k_lo = max(0, k_first - 2)
        t = self.knot_idx[k_lo:k_hi].astype(float)
        y = self.knot_price[k_lo:k_hi]
        if len(t) == 0 or t[0] > first:
            raise DataError(f"gold history before day {day} is too short")
        last = int(t[-1])
        days = np.arange(first, day + 1, dtype=float)
        if len(t) < 3:
            return np.interp(days, t, y), last
        out = hermite_eval(t, y, shape_preserving_slopes(t, y), np.minimum(days, t[-1]))
        out[days >= t[-1]] = y[-1]
        hit = np.isin(days, t)
        out[hit] = y[np.searchsorted(t, days[hit])]
        return out, last

    def history(self, asset: str, day: int, length: int) -> tuple[np.ndarray, int]:
        if asset == "gold":
            return self.gold_history(day, length)
        return self.btc_prices[day - length + 1: day + 1].copy(), day

    def mark(self, asset: str, day: int) -> tuple[float, int]:
        if asset == "gold":
            # carried-forward mark: the source index is the latest knot <= day
            k = int(self.knot_idx[max(0, np.searchsorted(self.knot_idx, day, side="right") - 1)])
            return float(self.gold_mark[day]), min(k, day)
        return float(self.btc_mark[day]), day


class DayView:
    """Everything a decision on one day may read.

    ``on_read(day, asset, last_index)`` is called for every price read,
    which lets tests audit that nothing beyond ``day`` is touched.
    """

    def __init__(self, market: _Market, day: int, on_read=None):
        self._m = market
        self.day = day
        self._on_read = on_read

    def _note(self, asset, last):
        if last > self.day:
            raise AssertionError(f"day {self.day} decision read {asset} at index {last}")
        if self._on_read is not None:
            self._on_read(self.day, asset, last)

    def history(self, asset: str, length: int) -> np.ndarray:
        values, last = self._m.history(asset, self.day, min(length, self.day + 1))
        self._note(asset, last)
        return values

    def price(self, asset: str) -> float:
        value, last = self._m.mark(asset, self.day)
        self._note(asset, last)
        return value

    def available(self) -> int:
        return self.day + 1

    def gold_tradable(self, offset: int = 0) -> bool:
        # the exchange calendar is known in advance; it carries no price information
        return self._m.calendar.gold_tradable_at(self.day + offset)


# --- forecasting step --------------------------------------------------

@dataclass(frozen=True)
class AssetForecast:
    points: np.ndarray
    sigma: float
    window: int
    flat: bool = False


def forecast_asset(history: np.ndarray, policy: WindowPolicy,
                   spec: fc.ArimaSpec = fc.ArimaSpec()) -> AssetForecast:
    """Choose a window, fit and forecast ``HORIZON`` days ahead.

    A window with no variance after differencing is forecast as flat
    (the zero-innovation limit of any ARIMA with no drift).
    """
    if policy.mode == "fixed":
        T = min(policy.length, len(history))
    else:
        T = fc.adaptive_window(history, spec, policy.length, policy.max_steps).T
    window = history[-T:]
    try:
        f = fc.fit(window, spec)
    except DegenerateSeriesError:
        pts = np.full(HORIZON, window[-1])
        return AssetForecast(pts, 0.0, T, flat=True)
    out = fc.forecast(f, window, HORIZON)
    if not np.all(np.isfinite(out.points)) or np.any(out.points <= 0):
        raise DataError(f"non-positive forecast {out.points}")
    return AssetForecast(out.points, out.sigma, T)


# --- plan evaluation ---------------------------------------------------

def simulate_plans(state: PortfolioState, plans: np.ndarray, gold_path: np.ndarray,
                   btc_path: np.ndarray, tradable, rates: CommissionRates,
                   delta: float = 0.0, fix: bool = True):
    """Push many 3-day plans through the value recursion along a price path.

    ``gold_path``/``btc_path`` hold 4 prices (today and the next 3 days).
    With ``fix`` each day's trade is projected onto the feasible set of the
    state it meets. Returns ``(plans, values, gold_units, btc_units)``:
    values is ``(n, 4)``; units are holdings after each day's trade.
    """
    plans = np.array(np.atleast_2d(plans), dtype=float)
    n = len(plans)
    r_g = gold_path[1:] / gold_path[:-1] - 1.0
    r_b = btc_path[1:] / btc_path[:-1] - 1.0
    c = np.full(n, state.c)
    g = np.full(n, state.g)
    b = np.full(n, state.b)
    V = np.empty((n, HORIZON + 1))
    V[:, 0] = state.value
    gu = np.empty((n, HORIZON))
    bu = np.empty((n, HORIZON))
    for k in range(HORIZON):
        x, y = plans[:, 2 * k], plans[:, 2 * k + 1]
        if fix:
            x, y = repair(c, g, b, x, y, rates, tradable[k], delta)
            plans[:, 2 * k], plans[:, 2 * k + 1] = x, y
        gu[:, k] = V[:, k] * (g + x) / gold_path[k]
        bu[:, k] = V[:, k] * (b + y) / btc_path[k]
        c, g, b, f = transition(c, g, b, x, y, r_g[k], r_b[k], rates)
        V[:, k + 1] = V[:, k] * f
    return plans, V, gu, bu


def plan_scores(risk: RiskParams, V: np.ndarray, gold_units: np.ndarray,
                btc_units: np.ndarray, gold_sigma: float, btc_sigma: float) -> np.ndarray:
    """Daily objective of simulated plans.

    The risk assessment for the middle personality is the forecast spread
    of each asset weighted by the units the plan holds, averaged over the
    three days, so it is in the same currency units as the value change.
    """
    sigma = np.mean(gold_units * gold_sigma + btc_units * btc_sigma, axis=1)
    return objective_rows(risk.personality, V, sigma, risk.y_f, risk.golden)


def plan_bounds(state: PortfolioState, tradable, rates: CommissionRates, delta: float):
    """Search box for the 6 decision variables."""
    a_sell, b_sell = ((1 - rates.alpha, 1 - rates.beta) if rates.symmetric
                      else (1 + rates.alpha, 1 + rates.beta))
    lo = np.full(2 * HORIZON, -1.0)
    hi = np.full(2 * HORIZON, 1.0 + max(rates.alpha, rates.beta))
    lo[0], lo[1] = -state.g, -state.b
    hi[0] = max(0.0, (state.c + state.b * b_sell - delta) / (1 + rates.alpha))
    hi[1] = max(0.0, (state.c + (state.g * a_sell if tradable[0] else 0.0) - delta)
                / (1 + rates.beta))
    for k in range(HORIZON):
        if not tradable[k]:
            lo[2 * k] = hi[2 * k] = 0.0
    return lo, hi


# --- engine ------------------------------------------------------------

def _day_seed(seed: int, day: int) -> int:
    return int(np.random.SeedSequence([seed, day]).generate_state(1)[0])


def _resolve_range(market: _Market, config: BacktestConfig) -> tuple[int, int]:
    dates = market.dates
    s = np.datetime64(config.start_date, "D") if config.start_date else dates[0]
    e = np.datetime64(config.end_date, "D") if config.end_date else dates[-1]
    if s < dates[0] or e > dates[-1]:
        raise DataError(f"range {s}..{e} is outside the data ({dates[0]}..{dates[-1]})")
    if s >= e:
        raise DataError(f"start {s} must precede end {e}")
    return int(np.searchsorted(dates, s)), int(np.searchsorted(dates, e))


def _forecast_both(view: DayView, config: BacktestConfig, cache=None):
    key = (view.day, config.window, config.spec)
    if cache is not None and key in cache:
        return cache[key]
    need = config.window.history_needed
    gold = forecast_asset(view.history("gold", need), config.window, config.spec)
    btc = forecast_asset(view.history("bitcoin", need), config.window, config.spec)
    if cache is not None:
        cache[key] = (gold, btc)
    return gold, btc


def _decide_pso(view: DayView, state: PortfolioState, config: BacktestConfig, warm,
                cache=None):
    gold, btc = _forecast_both(view, config, cache)
    tradable = [view.gold_tradable(k) for k in range(HORIZON)]
    gold_path = np.r_[view.price("gold"), gold.points]
    btc_path = np.r_[view.price("bitcoin"), btc.points]
    rates, risk = config.rates, config.risk

    def fix(X):
        return simulate_plans(state, X, gold_path, btc_path, tradable, rates, risk.delta)[0]

    def score(X):
        _, V, gu, bu = simulate_plans(state, X, gold_path, btc_path, tradable, rates,
                                      risk.delta, fix=False)
        return plan_scores(risk, V, gu, bu, gold.sigma, btc.sigma)

    seeds = [np.zeros(2 * HORIZON)]
    if warm is not None:
        seeds.append(np.r_[warm[2:], 0.0, 0.0])
    pso_cfg = dataclasses.replace(config.pso, seed=_day_seed(config.pso.seed, view.day))
    res = optimize(score, plan_bounds(state, tradable, rates, risk.delta), pso_cfg,
                   repair=fix, seeds=np.array(seeds), vectorized=True)
    status = "flat_forecast" if (gold.flat and btc.flat) else "optimized"
    return res.position, res.score, gold, btc, status


def _markowitz_candidates(state: PortfolioState, tradable: bool, rates: CommissionRates,
                          delta: float, step: float) -> np.ndarray:
    """Hold first, then bitcoin swept down from its maximum and gold up from its minimum."""
    lo, hi = plan_bounds(state, [tradable] * HORIZON, rates, delta)
    ys = np.r_[hi[1] - step * np.arange(int(np.floor((hi[1] - lo[1]) / step)) + 1), lo[1]]
    xs = np.r_[lo[0] + step * np.arange(int(np.floor((hi[0] - lo[0]) / step)) + 1), hi[0]]
    grid = np.array([[0.0, 0.0]] + [[x, y] for y in ys for x in xs])
    x, y = repair(state.c, state.g, state.b, grid[:, 0], grid[:, 1], rates, tradable, delta)
    cand = np.column_stack([x, y])
    _, first = np.unique(np.round(cand, 12), axis=0, return_index=True)
    return cand[np.sort(first)]


def _decide_markowitz(view: DayView, state: PortfolioState, config: BacktestConfig, warm,
                      cache=None):
    gold, btc = _forecast_both(view, config, cache)
    mk = config.markowitz
    tradable = [view.gold_tradable(k) for k in range(HORIZON)]
    gold_path = np.r_[view.price("gold"), gold.points]
    btc_path = np.r_[view.price("bitcoin"), btc.points]
    cand = _markowitz_candidates(state, tradable[0], config.rates, config.risk.delta,
                                 mk.grid_step)

    plans = np.zeros((len(cand), 2 * HORIZON))
    plans[:, :2] = cand
    _, V, _, _ = simulate_plans(state, plans, gold_path, btc_path, tradable, config.rates,
                                config.risk.delta, fix=False)
    mean = V[:, -1] / V[:, 0] - 1.0

    gh = view.history("gold", mk.lookback + 1)
    bh = view.history("bitcoin", mk.lookback + 1)
    if len(gh) >= 3:
        R = np.column_stack([np.zeros(len(gh) - 1), gh[1:] / gh[:-1] - 1, bh[1:] / bh[:-1] - 1])
        x, y = cand[:, 0], cand[:, 1]
        post = 1.0 - commission_cost(x, y, config.rates)
        W = np.column_stack([cash_after(state.c, x, y, config.rates), state.g + x,
                             state.b + y]) / post[:, None]
        var = np.array([portfolio_moments(R, w)[1] for w in W])
    else:
        var = np.zeros(len(cand))
    score = mean - mk.risk_aversion * HORIZON * var
    best = int(np.argmax(score))
    plan = plans[best]
    status = "flat_forecast" if (gold.flat and btc.flat) else "optimized"
    return plan, float(score[best]), gold, btc, status


def _run(gold: PriceSeries, btc: PriceSeries, calendar: TradingCalendar,
         config: BacktestConfig, decide, label: str, strategy: str,
         on_read=None, progress: Callable[[int, int], None] | None = None,
         cache: dict | None = None) -> BacktestReport:
    market = _Market(gold, btc, calendar)
    s, e = _resolve_range(market, config)
    rates = config.rates
    state = PortfolioState.all_cash(config.initial_cash)
    records = []
    warm = None
    need = config.window.length
    for i in range(s, e):
        view = DayView(market, i, on_read)
        plan = np.zeros(2 * HORIZON)
        nan3 = (float("nan"),) * HORIZON
        gf, bf, gs, bs, gw, bw = nan3, nan3, float("nan"), float("nan"), 0, 0
        score = float("nan")
        if view.available() < max(need, config.spec.min_obs):
            status = "warmup"
        else:
            try:
                plan, score, g_fc, b_fc, status = decide(view, state, config, warm, cache)
                gf, bf = tuple(map(float, g_fc.points)), tuple(map(float, b_fc.points))
                gs, bs, gw, bw = g_fc.sigma, b_fc.sigma, g_fc.window, b_fc.window
            except (CTPError, FloatingPointError, np.linalg.LinAlgError) as exc:
                logger.warning("%s: forecast/optimisation failed (%s); holding",
                               market.dates[i], exc)
                plan, status = np.zeros(2 * HORIZON), "fallback"
        x, y = float(plan[0]), float(plan[1])
        tradable = market.calendar.gold_tradable_at(i)
        if not feasible_mask(state.c, state.g, state.b, x, y, rates, tradable,
                             config.risk.delta):
            xr, yr = repair(state.c, state.g, state.b, x, y, rates, tradable, config.risk.delta)
            x, y = float(xr), float(yr)
        # settlement at realised prices of day i + 1
        r_g = market.gold_mark[i + 1] / market.gold_mark[i] - 1.0
        r_b = market.btc_mark[i + 1] / market.btc_mark[i] - 1.0
        c1, g1, b1, f = transition(state.c, state.g, state.b, x, y, r_g, r_b, rates)
        if min(c1, g1, b1) < -FEAS_TOL or not f > 0:
            raise NumericalError(f"{market.dates[i]}: committed trade left a negative holding")
        c1, g1, b1 = max(c1, 0.0), max(g1, 0.0), max(b1, 0.0)
        s_ = c1 + g1 + b1
        nxt = PortfolioState(c1 / s_, g1 / s_, b1 / s_, float(state.value * f))
        records.append(DailyRecord(
            date=market.dates[i], state=state, decision=TradeDecision(x, y),
            gold_forecast=gf, btc_forecast=bf, gold_sigma=float(gs), btc_sigma=float(bs),
            plan=tuple(map(float, plan)), value_after=float(nxt.value),
            gold_window=int(gw), btc_window=int(bw), status=status, score=float(score)))
        state = nxt
        warm = plan if status in ("optimized", "flat_forecast") else None
        if progress is not None:
            progress(i - s + 1, e - s)
    return BacktestReport(tuple(records), float(state.value), label, config,
                          config.pso.seed, strategy)


def run(gold: PriceSeries, btc: PriceSeries, calendar: TradingCalendar,
        config: BacktestConfig = BacktestConfig(), on_read=None, progress=None,
        cache: dict | None = None) -> BacktestReport:
    """PSO-driven backtest for ``config.risk.personality``.

    One record per day from ``start_date`` (inclusive) to ``end_date``
    (exclusive); the final value is the portfolio on ``end_date``. Days
    without a full window of history hold cash and are marked ``warmup``.

    Forecasts depend only on the data, so runs over the same series may
    share a ``cache`` dict to skip refitting.
    """
    return _run(gold, btc, calendar, config, _decide_pso, config.risk.personality.value,
                "pso", on_read, progress, cache)


def run_markowitz(gold: PriceSeries, btc: PriceSeries, calendar: TradingCalendar,
                  config: BacktestConfig = BacktestConfig(), on_read=None,
                  progress=None, cache: dict | None = None) -> BacktestReport:
    """Mean-variance baseline: daily grid sweep over ``(x, y)``.

    Each candidate is scored by its 3-day forecast return (holding after
    the trade) minus ``risk_aversion`` times its 3-day variance estimated
    from the trailing ``lookback`` days of returns.
    """
    return _run(gold, btc, calendar, config, _decide_markowitz, "markowitz", "markowitz",
                on_read, progress, cache)


def markowitz_candidates(state: PortfolioState, gold_tradable: bool,
                         config: BacktestConfig = BacktestConfig()) -> np.ndarray:
    return _markowitz_candidates(state, gold_tradable, config.rates, config.risk.delta,
                                 config.markowitz.grid_step)


# --- replay ------------------------------------------------------------

def replay(decisions, gold_marks, btc_marks, gold_tradable, rates: CommissionRates,
           initial_value: float, delta: float = 0.0, fix: bool = False,
           start_state: PortfolioState | None = None):
    """Re-run a schedule of ``(x, y)`` against settlement prices.

    ``gold_marks``/``btc_marks`` cover the schedule plus one day. With ``fix``
    each decision is first projected onto the feasible set. Returns
    ``(values, states, applied)``: values has one more entry than decisions.
    """
    D = np.asarray(decisions, dtype=float).reshape(-1, 2)
    n = len(D)
    st = start_state or PortfolioState.all_cash(initial_value)
    c, g, b, v = st.c, st.g, st.b, float(initial_value)
    values = np.empty(n + 1)
    values[0] = v
    states = np.empty((n + 1, 3))
    states[0] = c, g, b
    applied = D.copy()
    for i in range(n):
        x, y = D[i]
        if fix:
            x, y = (float(z) for z in repair(c, g, b, x, y, rates, gold_tradable[i], delta))
        elif not feasible_mask(c, g, b, x, y, rates, gold_tradable[i], delta):
            raise DataError(f"step {i}: decision ({x}, {y}) is infeasible")
        applied[i] = x, y
        r_g = gold_marks[i + 1] / gold_marks[i] - 1.0
        r_b = btc_marks[i + 1] / btc_marks[i] - 1.0
        c, g, b, f = transition(c, g, b, x, y, r_g, r_b, rates)
        v *= f
        values[i + 1] = v
        states[i + 1] = c, g, b
    return values, states, applied


def report_window(report: BacktestReport, gold: PriceSeries, btc: PriceSeries,
                  calendar: TradingCalendar):
    """Settlement prices and gold tradability over the report's days (+1 day of prices)."""
    gm, bm = settlement_prices(gold, btc)
    i0 = int(np.searchsorted(gold.dates, report.records[0].date))
    n = len(report.records)
    trad = np.array([calendar.gold_tradable_at(i0 + k) for k in range(n)])
    return gm[i0:i0 + n + 1], bm[i0:i0 + n + 1], trad, i0


# --- export ------------------------------------------------------------

CSV_COLUMNS = ["date", "c", "g", "b", "V", "x", "y",
               "gold_forecast_1", "gold_forecast_2", "gold_forecast_3",
               "btc_forecast_1", "btc_forecast_2", "btc_forecast_3",
               "gold_sigma", "btc_sigma", "value_after", "gold_window", "btc_window",
               "status", "score", "plan_1", "plan_2", "plan_3", "plan_4", "plan_5", "plan_6"]


def export_report(report: BacktestReport, path, formats=("csv", "json")) -> list[Path]:
    """Write ``<path>.csv`` (one row per day) and/or ``<path>.json`` (summary)."""
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    written = []
    if "csv" in formats:
        out = base.with_suffix(".csv")
        with out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in report.records:
                s = r.state
                w.writerow([str(r.date), *(repr(float(v)) for v in (s.c, s.g, s.b, s.value,
                                                                   r.decision.x, r.decision.y)),
                            *(repr(float(v)) for v in r.gold_forecast + r.btc_forecast),
                            repr(float(r.gold_sigma)), repr(float(r.btc_sigma)),
                            repr(float(r.value_after)), r.gold_window, r.btc_window, r.status,
                            repr(float(r.score)), *(repr(float(v)) for v in r.plan)])
        written.append(out)
    if "json" in formats:
        out = base.with_suffix(".json")
        summary = {
            "final_value": report.final_value,
            "initial_value": report.config.initial_cash,
            "personality": report.personality,
            "strategy": report.strategy,
            "seed": report.seed,
            "n_days": len(report.records),
            "start_date": str(report.records[0].date) if report.records else None,
            "end_date": str(report.records[-1].date + np.timedelta64(1, "D"))
            if report.records else None,
            "status_counts": _status_counts(report),
            "config": report.config.to_dict(),
        }
        out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        written.append(out)
    return written


def _status_counts(report: BacktestReport) -> dict:
    counts: dict[str, int] = {}
    for r in report.records:
        counts[r.status] = counts.get(r.status, 0) + 1
    return counts


def load_report_csv(path) -> dict[str, np.ndarray]:
    """Read an exported report CSV back into columns."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out: dict[str, np.ndarray] = {}
    for col in CSV_COLUMNS:
        vals = [r[col] for r in rows]
        if col == "date":
            out[col] = np.array(vals, dtype="datetime64[D]")
        elif col == "status":
            out[col] = np.array(vals)
        elif col.endswith("_window"):
            out[col] = np.array(vals, dtype=int)
        else:
            out[col] = np.array([float(v) for v in vals])
    return out


def report_from_csv(path, config: BacktestConfig, personality: str | None = None,
                    strategy: str = "pso") -> BacktestReport:
    """Rebuild a report from its exported CSV and the config that produced it."""
    cols = load_report_csv(path)
    n = len(cols["date"])
    if n == 0:
        raise DataError(f"{path}: report has no rows")
    recs = []
    for i in range(n):
        state = PortfolioState(cols["c"][i], cols["g"][i], cols["b"][i], cols["V"][i])
        recs.append(DailyRecord(
            date=cols["date"][i], state=state,
            decision=TradeDecision(cols["x"][i], cols["y"][i]),
            gold_forecast=tuple(cols[f"gold_forecast_{k}"][i] for k in (1, 2, 3)),
            btc_forecast=tuple(cols[f"btc_forecast_{k}"][i] for k in (1, 2, 3)),
            gold_sigma=cols["gold_sigma"][i], btc_sigma=cols["btc_sigma"][i],
            plan=tuple(cols[f"plan_{k}"][i] for k in range(1, 7)),
            value_after=cols["value_after"][i], gold_window=int(cols["gold_window"][i]),
            btc_window=int(cols["btc_window"][i]), status=str(cols["status"][i]),
            score=cols["score"][i]))
    label = personality or (config.risk.personality.value if strategy == "pso" else strategy)
    return BacktestReport(tuple(recs), float(recs[-1].value_after), label, config,
                          config.pso.seed, strategy)
