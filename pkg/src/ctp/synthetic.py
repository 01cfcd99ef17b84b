"""Seeded synthetic gold and bitcoin price series.

Used for the bundled CI dataset and tests. Bitcoin trades every day; gold
only on weekdays, minus a few random closures. Log prices follow an
ARIMA(1,1,1)-style random walk with drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import Asset, PriceSeries


@dataclass(frozen=True)
class SyntheticParams:
    start: str = "2016-01-04"
    n_days: int = 260
    gold_price: float = 1300.0
    gold_drift: float = 0.0002
    gold_vol: float = 0.008
    btc_price: float = 600.0
    btc_drift: float = 0.002
    btc_vol: float = 0.035
    phi: float = 0.3
    theta: float = 0.2
    closures_per_year: int = 8


def _log_walk(rng, n, drift, vol, phi, theta) -> np.ndarray:
    e = rng.normal(0.0, vol, n)
    dz = np.empty(n)
    prev_dz, prev_e = 0.0, 0.0
    for t in range(n):
        dz[t] = drift * (1 - phi) + phi * prev_dz + e[t] + theta * prev_e
        prev_dz, prev_e = dz[t], e[t]
    dz[0] = 0.0
    return np.cumsum(dz)


def generate(params: SyntheticParams = SyntheticParams(), seed: int = 0):
    """Return ``(gold, btc)`` series; gold holds only its trading days."""
    rng = np.random.default_rng(seed)
    dates = np.datetime64(params.start, "D") + np.arange(params.n_days)
    g = params.gold_price * np.exp(_log_walk(rng, params.n_days, params.gold_drift,
                                             params.gold_vol, params.phi, params.theta))
    b = params.btc_price * np.exp(_log_walk(rng, params.n_days, params.btc_drift,
                                            params.btc_vol, params.phi, params.theta))
    open_days = np.is_busday(dates)
    n_close = int(params.closures_per_year * params.n_days / 365)
    candidates = np.flatnonzero(open_days)[1:-1]
    if n_close and len(candidates):
        shut = rng.choice(candidates, size=min(n_close, len(candidates)), replace=False)
        open_days[shut] = False
    open_days[0] = open_days[-1] = True
    gold = PriceSeries(Asset.GOLD, dates[open_days], np.round(g[open_days], 2),
                       np.ones(int(open_days.sum()), bool))
    btc = PriceSeries(Asset.BITCOIN, dates, np.round(b, 2), np.ones(len(dates), bool))
    return gold, btc
