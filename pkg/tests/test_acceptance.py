"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Criteria 1 and 7 need the full five-year competition files. Point
``CTP_GOLD_CSV`` and ``CTP_BTC_CSV`` at them; without them those two
criteria report FAIL rather than pass on a stand-in.
"""

import dataclasses
import os
import time

import numpy as np
import pytest

from ctp import backtest as bt
from ctp import config
from ctp import forecaster as fc
from ctp import sensitivity as sens
from ctp.market_data import (
    Asset,
    PriceSeries,
    hermite_eval,
    hermite_fill,
    load_price_csv,
    prepare,
    shape_preserving_slopes,
)
from ctp.portfolio import (
    CommissionRates,
    DayReturns,
    PortfolioState,
    TradeDecision,
    repair,
    state_step,
    value_step,
)
from ctp.pso import PsoConfig, optimize
from ctp.risk import Personality, RiskParams

from conftest import flat_market
from oracles import holdings_step, simulate_arima111

FULL_RUN_BUDGET = 30 * 60
CI_RUN_BUDGET = 60.0


def report(pytestconfig, n, ok, detail):
    line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line)
    assert ok, line


def real_market():
    g, b = os.environ.get("CTP_GOLD_CSV"), os.environ.get("CTP_BTC_CSV")
    if not (g and b):
        return None
    return prepare(load_price_csv(g, Asset.GOLD), load_price_csv(b, Asset.BITCOIN))


# --- shared optimised runs over the bundled 120-day preset -------------------

@pytest.fixture(scope="module")
def ci_runs(ci_market, ci_settings):
    """Middle first and uncached (it is also the runtime measurement)."""
    cache = {}
    base = ci_settings.backtest
    runs, seconds = {}, None
    for p in (Personality.MIDDLE, Personality.CRAZY, Personality.STABLE):
        cfg = dataclasses.replace(base, risk=dataclasses.replace(base.risk, personality=p))
        t0 = time.perf_counter()
        runs[p.value] = bt.run(*ci_market, cfg, cache=cache)
        if seconds is None:
            seconds = time.perf_counter() - t0
    runs["markowitz"] = bt.run_markowitz(*ci_market, base, cache=cache)
    return runs, seconds


# --- 1 -----------------------------------------------------------------------

def test_criterion_01_directional_and_runtime(pytestconfig, ci_runs):
    runs, ci_seconds = ci_runs
    parts = [f"ci preset {ci_seconds:.1f}s (budget {CI_RUN_BUDGET:.0f}s)"]
    ok = ci_seconds <= CI_RUN_BUDGET and len(runs["middle"].records) == 120
    market = real_market()
    if market is None:
        ok = False
        parts.append("five-year data not supplied (CTP_GOLD_CSV/CTP_BTC_CSV); "
                     "directional checks not run")
    else:
        settings = config.build(config.merge({"preset": "full"}))
        base = settings.backtest
        slowest = 0.0
        for seed in range(5):
            finals = {}
            for p in Personality:
                cfg = dataclasses.replace(base, risk=RiskParams(p),
                                          pso=dataclasses.replace(base.pso, seed=seed))
                t0 = time.perf_counter()
                finals[p.value] = bt.run(*market, cfg).final_value
                slowest = max(slowest, time.perf_counter() - t0)
            beat = finals["crazy"] > max(finals["stable"], finals["middle"])
            ok &= beat
            parts.append(f"seed {seed}: crazy {finals['crazy']:.2f} stable "
                         f"{finals['stable']:.2f} middle {finals['middle']:.2f}")
        mk = bt.run_markowitz(*market, base).final_value
        ok &= mk > base.initial_cash and slowest <= FULL_RUN_BUDGET
        parts.append(f"markowitz {mk:.2f}; slowest full run {slowest:.0f}s")
    report(pytestconfig, 1, ok, "; ".join(parts))


# --- 2 -----------------------------------------------------------------------

def test_criterion_02_portfolio_oracle(pytestconfig):
    rng = np.random.default_rng(2024)
    n = 10_000
    w = rng.dirichlet([1, 1, 1], n)
    raw = rng.uniform(-1, 1, (n, 2))
    rets = rng.uniform(-0.3, 0.3, (n, 2))
    sym = rng.random(n) < 0.5
    ab = rng.uniform(0, 0.05, (n, 2))
    trad = rng.random(n) < 0.8
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(n):
        rates = CommissionRates(ab[i, 0], ab[i, 1], bool(sym[i]))
        c, g, b = w[i]
        x, y = (float(v) for v in repair(c, g, b, raw[i, 0], raw[i, 1], rates, trad[i]))
        s = PortfolioState(c, g, b, 1000.0)
        d, r = TradeDecision(x, y), DayReturns(*rets[i])
        v = value_step(s, d, r, rates)
        s2 = state_step(s, d, r, rates)
        want = holdings_step(c, g, b, 1000.0, x, y, *rets[i], ab[i, 0], ab[i, 1], bool(sym[i]))
        worst = max(worst, abs(v - want[0]) / abs(want[0]),
                    *(abs(a - e) / max(1.0, abs(e)) for a, e in zip((s2.c, s2.g, s2.b), want[1:])))
    secs = time.perf_counter() - t0
    report(pytestconfig, 2, worst < 1e-9 and secs < 5.0,
           f"max rel error {worst:.2e} over {n} transitions in {secs:.2f}s")


# --- 3 -----------------------------------------------------------------------

def test_criterion_03_normalisation(pytestconfig, ci_runs, ci_market):
    runs, _ = ci_runs
    worst_sum, worst_min, n = 0.0, 0.0, 0
    for rep in runs.values():
        gm, bm, trad, _ = bt.report_window(rep, *ci_market)
        _, states, _ = bt.replay(rep.decisions, gm, bm, trad, rep.config.rates,
                                 rep.config.initial_cash)
        rows = np.vstack([[(r.state.c, r.state.g, r.state.b) for r in rep.records], states])
        worst_sum = max(worst_sum, float(np.max(np.abs(rows.sum(axis=1) - 1))))
        worst_min = min(worst_min, float(rows.min()))
        n += len(rows)
    report(pytestconfig, 3, worst_sum < 1e-9 and worst_min >= -1e-12,
           f"{n} states: max |c+g+b-1| {worst_sum:.1e}, min component {worst_min:.1e}")


# --- 4 -----------------------------------------------------------------------

def test_criterion_04_hermite(pytestconfig):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        t = np.cumsum(rng.integers(1, 4, 30)).astype(float)
        p = np.polynomial.Polynomial(rng.normal(size=4))
        y = p(t / t[-1]) + 10.0
        tq = np.linspace(t[0], t[-1], 500)
        got = hermite_eval(t, y, shape_preserving_slopes(t, y), tq)
        want = p(tq / t[-1]) + 10.0
        worst = max(worst, float(np.max(np.abs(got - want) / np.abs(want))))

    dates = np.datetime64("2020-01-06") + np.arange(200)
    keep = np.is_busday(dates) & (rng.random(200) > 0.1)
    keep[0] = keep[-1] = True
    prices = 1500 + np.cumsum(rng.normal(size=keep.sum()))
    filled = hermite_fill(PriceSeries(Asset.GOLD, dates[keep], prices, np.ones(keep.sum(), bool)))
    passthrough = np.array_equal(filled.prices[filled.observed], prices)

    in_range = True
    for _ in range(200):
        y = 100 + np.cumsum(rng.uniform(0, 3, 15))
        if rng.random() < 0.5:
            y = y[::-1].copy()
        t = np.cumsum(rng.integers(1, 5, 15)).astype(float)
        d = shape_preserving_slopes(t, y)
        for k in range(1, len(t) - 2):
            v = hermite_eval(t, y, d, np.linspace(t[k], t[k + 1], 25))
            lo, hi = min(y[k], y[k + 1]), max(y[k], y[k + 1])
            in_range &= bool(np.all(v >= lo - 1e-9 * hi) and np.all(v <= hi + 1e-9 * hi))
    report(pytestconfig, 4, worst < 1e-9 and passthrough and in_range,
           f"cubic max rel error {worst:.1e}; knots exact {passthrough}; "
           f"monotone range held {in_range}")


# --- 5 -----------------------------------------------------------------------

def test_criterion_05_arima_recovery(pytestconfig):
    t0 = time.perf_counter()
    dphi, dtheta, passed = [], [], 0
    for seed in range(20):
        f = fc.fit(simulate_arima111(2000, 0.5, 0.3, 1000 + seed))
        dphi.append(abs(f.phi[0] - 0.5))
        dtheta.append(abs(f.theta[0] - 0.3))
        passed += fc.white_noise_check(f.residuals, lags=20, n_params=2).passed
    secs = time.perf_counter() - t0
    ok = np.mean(dphi) <= 0.05 and np.mean(dtheta) <= 0.08 and passed >= 17 and secs < 60
    report(pytestconfig, 5, ok,
           f"mean |phi err| {np.mean(dphi):.4f}, mean |theta err| {np.mean(dtheta):.4f}, "
           f"Ljung-Box passed {passed}/20, {secs:.1f}s")


# --- 6 -----------------------------------------------------------------------

def test_criterion_06_r_squared(pytestconfig):
    a = np.array([1.0, 2.0, 3.0])
    vals = (fc.r_squared(a, a), fc.r_squared(a, np.full(3, 2.0)), fc.r_squared(a, [1.0, 2.0, 4.0]))
    report(pytestconfig, 6, vals == (1.0, 0.0, 0.5), f"perfect/mean/hand = {vals}")


# --- 7 -----------------------------------------------------------------------

def _never_below_start(series: np.ndarray, n_days: int, seed: int) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    days = rng.choice(np.arange(120, len(series)), size=n_days, replace=False)
    worse = 0
    for i in days:
        hist = series[: i + 1]
        worse += fc.adaptive_window(hist, T0=60).r2 < fc.window_r2(hist, 60)
    return n_days, worse


def test_criterion_07_adaptive_window(pytestconfig, ci_market):
    peak = fc.adaptive_window(np.zeros(200), T0=60, scorer=lambda T: -float(T - 57) ** 2).T
    parts = [f"synthetic landscape -> {peak}"]
    ok = peak == 57
    # the bundled sample only backs up the property; it is not the real-data check
    n, worse = _never_below_start(ci_market[1].prices, 50, 7)
    parts.append(f"bundled sample: {worse}/{n} days below start")
    ok &= worse == 0
    market = real_market()
    if market is None:
        ok = False
        parts.append("real data not supplied (CTP_GOLD_CSV/CTP_BTC_CSV)")
    else:
        n, worse = _never_below_start(market[1].prices, 50, 7)
        parts.append(f"real data: {worse}/{n} days below start")
        ok &= worse == 0
    report(pytestconfig, 7, ok, "; ".join(parts))


# --- 8 -----------------------------------------------------------------------

def test_criterion_08_pso_benchmark(pytestconfig):
    box = (np.full(6, -5.0), np.full(6, 5.0))

    def f(X):
        return -np.sum(np.atleast_2d(X) ** 2, axis=1)

    results = [optimize(f, box, PsoConfig(seed=s), vectorized=True) for s in range(10)]
    err = float(np.median([np.linalg.norm(r.position) for r in results]))
    monotone = all(np.all(np.diff(r.trace) >= 0) for r in results)
    same = np.array_equal(optimize(f, box, PsoConfig(seed=3), vectorized=True).trace,
                          results[3].trace)
    report(pytestconfig, 8, err < 1e-2 and monotone and same,
           f"median error {err:.1e}; traces non-decreasing {monotone}; reproducible {same}")


# --- 9 -----------------------------------------------------------------------

def test_criterion_09_flat_market(pytestconfig):
    gold, btc, cal = flat_market()
    finals = {}
    for p in Personality:
        cfg = bt.BacktestConfig(start_date=str(gold.dates[-11]), end_date=str(gold.dates[-1]),
                                risk=RiskParams(p))
        rep = bt.run(gold, btc, cal, cfg)
        assert len(rep.records) == 10
        finals[p.value] = rep.final_value
    ok = all(abs(v - 1000.0) <= 1e-6 for v in finals.values())
    report(pytestconfig, 9, ok, ", ".join(f"{k} {v:.6f}" for k, v in finals.items()))


# --- 10 ----------------------------------------------------------------------

def test_criterion_10_perturbation(pytestconfig, ci_runs, ci_market):
    runs, _ = ci_runs
    spec = sens.PerturbationSpec((0.01, 0.03), trials=50, seed=0)
    fractions = {}
    for name in ("crazy", "stable", "middle"):
        fractions[name] = sens.perturb_schedule(runs[name], *ci_market, spec).beat_fraction
    ok = all(f <= 0.2 for f in fractions.values())
    report(pytestconfig, 10, ok, "share of 50 trials beating baseline objective: "
           + ", ".join(f"{k} {v:.0%}" for k, v in fractions.items()))


# --- 11 ----------------------------------------------------------------------

def test_criterion_11_homogeneity(pytestconfig, ci_runs, ci_market):
    runs, _ = ci_runs
    worst = 0.0
    for rep in runs.values():
        v = sens.scaled_replay(rep, *ci_market, 1.001)
        worst = max(worst, abs(v / (1.001 * rep.final_value) - 1))
    report(pytestconfig, 11, worst < 1e-9, f"max rel deviation {worst:.1e} over {len(runs)} runs")


# --- 12 ----------------------------------------------------------------------

def test_criterion_12_no_lookahead(pytestconfig, ci_market, ci_settings):
    reads, violations = {}, []

    def hook(day, asset, last):
        reads.setdefault(day, -1)
        reads[day] = max(reads[day], last)
        if last > day:
            violations.append((day, asset, last))

    cfg = dataclasses.replace(ci_settings.backtest, risk=RiskParams(Personality.CRAZY))
    rep = bt.run(*ci_market, cfg, on_read=hook)
    gold, btc, _ = ci_market
    i0 = gold.index_of(rep.records[0].date)
    covered = all(i0 + k in reads for k, r in enumerate(rep.records) if r.status != "warmup")
    report(pytestconfig, 12, not violations and covered and bool(reads),
           f"{sum(1 for _ in reads)} audited days, {len(violations)} reads past the day")
