import dataclasses
import json

import numpy as np
import pytest

from ctp import backtest as bt
from ctp.errors import DataError, NumericalError
from ctp.market_data import PriceSeries, TradingCalendar, hermite_fill
from ctp.portfolio import CommissionRates, PortfolioState, feasible_mask
from ctp.pso import PsoConfig
from ctp.risk import Personality, RiskParams

from conftest import flat_market

FAST = bt.BacktestConfig(
    start_date="2016-05-24", end_date="2016-06-13",
    window=bt.WindowPolicy("fixed", 60), pso=PsoConfig(n_particles=20, max_iters=20, seed=5),
    risk=RiskParams(Personality.CRAZY))


@pytest.fixture(scope="module")
def fast_report(ci_market):
    return bt.run(*ci_market, FAST)


# --- flat market ----------------------------------------------------------

@pytest.mark.parametrize("personality", list(Personality))
def test_flat_market_holds(personality):
    gold, btc, cal = flat_market()
    cfg = bt.BacktestConfig(start_date=str(gold.dates[-11]), end_date=str(gold.dates[-1]),
                            risk=RiskParams(personality))
    rep = bt.run(gold, btc, cal, cfg)
    assert len(rep.records) == 10
    assert rep.final_value == pytest.approx(1000.0, abs=1e-6)
    assert all(r.decision.is_hold for r in rep.records)
    assert all(r.status == "flat_forecast" for r in rep.records)


def test_flat_market_markowitz_holds():
    gold, btc, cal = flat_market()
    cfg = bt.BacktestConfig(start_date=str(gold.dates[-11]), end_date=str(gold.dates[-1]))
    rep = bt.run_markowitz(gold, btc, cal, cfg)
    assert rep.final_value == pytest.approx(1000.0, abs=1e-6)
    assert all(r.decision.is_hold for r in rep.records)


def test_literal_commissions_let_stable_churn_on_flat_prices():
    # under the signed rule a round trip is free and the arithmetic mean of
    # its returns is positive, so the Sharpe objective prefers trading
    gold, btc, cal = flat_market()
    cfg = bt.BacktestConfig(start_date=str(gold.dates[-11]), end_date=str(gold.dates[-1]),
                            risk=RiskParams(Personality.STABLE),
                            rates=CommissionRates(symmetric=False))
    rep = bt.run(gold, btc, cal, cfg)
    assert not all(r.decision.is_hold for r in rep.records)


# --- loop contract ---------------------------------------------------------

def test_one_day_range_gives_one_record(ci_market):
    cfg = dataclasses.replace(FAST, start_date="2016-06-01", end_date="2016-06-02")
    rep = bt.run(*ci_market, cfg)
    assert len(rep.records) == 1
    assert str(rep.records[0].date) == "2016-06-01"


def test_range_outside_data_is_rejected(ci_market):
    with pytest.raises(DataError):
        bt.run(*ci_market, dataclasses.replace(FAST, start_date="2015-01-01"))
    with pytest.raises(ValueError):
        dataclasses.replace(FAST, start_date="2016-06-02", end_date="2016-06-01")


def test_warmup_days_hold(ci_market):
    cfg = dataclasses.replace(FAST, start_date="2016-01-04", end_date="2016-01-10")
    rep = bt.run(*ci_market, cfg)
    assert all(r.status == "warmup" and r.decision.is_hold for r in rep.records)
    assert rep.final_value == 1000.0


def test_records_are_consistent(fast_report, ci_market):
    gold, btc, cal = ci_market
    i0 = gold.index_of(fast_report.records[0].date)
    cfg = fast_report.config
    assert len(fast_report.records) == 20
    for k, r in enumerate(fast_report.records):
        s = r.state
        assert abs(s.c + s.g + s.b - 1) < 1e-9 and min(s.c, s.g, s.b) >= -1e-12
        assert (r.decision.x, r.decision.y) == r.plan[:2]
        assert feasible_mask(s.c, s.g, s.b, r.decision.x, r.decision.y, cfg.rates,
                             cal.gold_tradable_at(i0 + k), cfg.risk.delta)
        if not cal.gold_tradable_at(i0 + k):
            assert r.decision.x == 0
    vals = fast_report.values
    assert np.all(vals[1:] == [r.value_after for r in fast_report.records])


def test_value_chain_reproduces_final_value(fast_report, ci_market):
    gm, bm, trad, _ = bt.report_window(fast_report, *ci_market)
    vals, _, _ = bt.replay(fast_report.decisions, gm, bm, trad, fast_report.config.rates,
                           fast_report.config.initial_cash)
    assert vals[-1] == pytest.approx(fast_report.final_value, rel=1e-6)


def test_deterministic(fast_report, ci_market):
    again = bt.run(*ci_market, FAST)
    assert again.final_value == fast_report.final_value
    assert np.array_equal(again.decisions, fast_report.decisions)


def test_day_seeds_are_distinct():
    seeds = {bt._day_seed(s, d) for s in range(5) for d in range(200)}
    assert len(seeds) == 1000


def test_other_seed_still_trades_sensibly(ci_market, fast_report):
    # optima sit on box corners, so another seed should land on the same value
    cfg = dataclasses.replace(FAST, pso=dataclasses.replace(FAST.pso, seed=6))
    other = bt.run(*ci_market, cfg)
    assert other.final_value == pytest.approx(fast_report.final_value, rel=0.05)


def test_forecast_failure_falls_back_to_hold(ci_market, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("no fit")

    monkeypatch.setattr(bt, "forecast_asset", boom)
    rep = bt.run(*ci_market, dataclasses.replace(FAST, end_date="2016-05-27"))
    assert all(r.status == "fallback" and r.decision.is_hold for r in rep.records)


def test_cache_gives_identical_report(ci_market, fast_report):
    cache = {}
    a = bt.run(*ci_market, FAST, cache=cache)
    b = bt.run(*ci_market, FAST, cache=cache)
    assert a.final_value == b.final_value == fast_report.final_value


# --- no lookahead ------------------------------------------------------------

def test_reads_never_pass_the_decision_day(ci_market):
    reads = {}

    def hook(day, asset, last):
        reads[day] = max(reads.get(day, -1), last)

    cfg = dataclasses.replace(FAST, end_date="2016-05-31")
    bt.run(*ci_market, cfg, on_read=hook)
    assert reads and all(last <= day for day, last in reads.items())


def _tamper(series: PriceSeries, after: int, factor: float) -> PriceSeries:
    p = series.prices.copy()
    p[after + 1:] *= factor
    return PriceSeries(series.asset, series.dates, p, series.observed)


def test_future_prices_do_not_change_past_decisions(ci_market):
    gold, btc, cal = ci_market
    cfg = dataclasses.replace(FAST, end_date="2016-06-06")
    base = bt.run(gold, btc, cal, cfg)
    k = gold.index_of("2016-05-31")
    g2, b2 = _tamper(gold, k, 1.3), _tamper(btc, k, 0.6)
    alt = bt.run(g2, b2, cal, cfg)
    n_same = int((np.datetime64("2016-05-31") - base.records[0].date).astype(int)) + 1
    assert np.array_equal(base.decisions[:n_same], alt.decisions[:n_same])
    assert not np.array_equal(base.decisions[n_same:], alt.decisions[n_same:])


def test_causal_gold_history_uses_only_past_knots():
    dates = np.datetime64("2021-01-04") + np.arange(40)
    wd = np.is_busday(dates)
    prices = 1800 + np.cumsum(np.random.default_rng(0).normal(size=wd.sum()))
    g = hermite_fill(PriceSeries("gold", dates[wd], prices, np.ones(wd.sum(), bool)))
    b = PriceSeries("bitcoin", g.dates, np.full(len(g), 3e4), np.ones(len(g), bool))
    m = bt._Market(g, b, TradingCalendar(g.dates, g.observed))
    sat = int(np.flatnonzero(~g.observed)[-2])  # a Saturday with later knots
    hist, last = m.gold_history(sat, 20)
    assert last < sat
    assert hist[-1] == m.gold_mark[sat]  # carried forward from Friday
    # strictly interior days agree with a fill over the knots seen so far
    fri = last
    pre = m.gold_history(fri, 20)[0]
    assert np.allclose(hist[:-1], pre[1:])


# --- plans & bounds -----------------------------------------------------------

def test_simulate_hold_plan_on_flat_path():
    s = PortfolioState(0.2, 0.3, 0.5, 500.0)
    _, V, gu, bu = bt.simulate_plans(s, np.zeros((1, 6)), np.full(4, 10.0), np.full(4, 20.0),
                                     [True] * 3, CommissionRates())
    assert np.all(V == 500.0)
    assert np.allclose(gu, 500 * 0.3 / 10) and np.allclose(bu, 500 * 0.5 / 20)


def test_simulated_plan_matches_replay():
    rng = np.random.default_rng(1)
    gp = 1500 * np.cumprod(np.r_[1, 1 + 0.01 * rng.normal(size=3)])
    bp = 9000 * np.cumprod(np.r_[1, 1 + 0.05 * rng.normal(size=3)])
    plan = np.array([[0.3, 0.4, -0.1, 0.2, 0.05, -0.3]])
    s = PortfolioState.all_cash(1000.0)
    fixed, V, _, _ = bt.simulate_plans(s, plan, gp, bp, [True] * 3, CommissionRates())
    vals, _, _ = bt.replay(fixed[0].reshape(3, 2), gp, bp, [True] * 3, CommissionRates(), 1000.0)
    np.testing.assert_allclose(V[0], vals, rtol=1e-12)


def test_plan_freezes_gold_on_closed_days():
    s = PortfolioState(0.5, 0.5, 0.0, 1.0)
    lo, hi = bt.plan_bounds(s, [False, True, False], CommissionRates(), 0.0)
    assert lo[0] == hi[0] == 0 and lo[4] == hi[4] == 0
    assert lo[2] < hi[2]
    fixed, _, _, _ = bt.simulate_plans(s, np.array([[0.3, 0.1, 0.2, 0.1, 0.4, 0.0]]),
                                       np.full(4, 10.0), np.full(4, 10.0), [False, True, False],
                                       CommissionRates())
    assert fixed[0, 0] == 0 and fixed[0, 4] == 0


def test_markowitz_decisions_come_from_grid(ci_market):
    cfg = dataclasses.replace(FAST, markowitz=bt.MarkowitzParams(grid_step=0.5),
                              end_date="2016-06-01")
    rep = bt.run_markowitz(*ci_market, cfg)
    gold, btc, cal = ci_market
    i0 = gold.index_of(rep.records[0].date)
    for k, r in enumerate(rep.records):
        cand = bt.markowitz_candidates(r.state, cal.gold_tradable_at(i0 + k), cfg)
        assert len(cand) <= 16
        assert np.any(np.all(np.isclose(cand, [r.decision.x, r.decision.y], atol=1e-15), axis=1))


# --- export --------------------------------------------------------------------

def test_export_round_trip(fast_report, tmp_path):
    files = bt.export_report(fast_report, tmp_path / "rep")
    csv_path, json_path = files
    lines = csv_path.read_text().splitlines()
    assert len(lines) == len(fast_report.records) + 1
    cols = bt.load_report_csv(csv_path)
    assert np.array_equal(cols["V"], fast_report.values[:-1])
    assert np.array_equal(cols["value_after"], fast_report.values[1:])
    summary = json.loads(json_path.read_text())
    assert summary["final_value"] == fast_report.final_value
    assert summary["seed"] == 5
    back = bt.report_from_csv(csv_path, fast_report.config)
    assert back.final_value == fast_report.final_value
    assert back.records[3] == fast_report.records[3]
