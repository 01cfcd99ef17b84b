import numpy as np
import pytest

from ctp import config
from ctp.market_data import Asset, PriceSeries, load_price_csv, prepare


def series(asset, dates, prices):
    dates = np.asarray(dates, dtype="datetime64[D]")
    return PriceSeries(Asset(asset), dates, np.asarray(prices, float), np.ones(len(dates), bool))


def flat_market(n_days=80, gold=1500.0, btc=9000.0, start="2020-01-06"):
    """Constant prices; gold on weekdays only."""
    dates = np.datetime64(start) + np.arange(n_days)
    wd = np.is_busday(dates)
    wd[-1] = True
    return prepare(series("gold", dates[wd], np.full(wd.sum(), gold)),
                   series("bitcoin", dates, np.full(n_days, btc)))


@pytest.fixture(scope="session")
def ci_market():
    settings = config.build(config.merge({"preset": "ci"}))
    g, b = settings.require_data()
    return prepare(load_price_csv(g, Asset.GOLD), load_price_csv(b, Asset.BITCOIN))


@pytest.fixture(scope="session")
def ci_settings():
    return config.build(config.merge({"preset": "ci"}))


@pytest.fixture(scope="session")
def forecast_cache():
    """Shared between runs over the bundled data; forecasts depend only on it."""
    return {}
