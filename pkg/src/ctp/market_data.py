"""Daily gold and bitcoin price series: loading, gap filling and alignment.

Gold only trades on exchange days, so its raw file has holes on weekends
and holidays. Bitcoin trades every day. ``hermite_fill`` closes the gold
holes with a piecewise cubic Hermite interpolant, and ``align`` cuts both
series to a common contiguous range and records which days gold could
actually be traded.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

DAY = np.timedelta64(1, "D")


class Asset(str, enum.Enum):
    GOLD = "gold"
    BITCOIN = "bitcoin"


class Source(str, enum.Enum):
    OBSERVED = "observed"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class PricePoint:
    date: dt.date
    price: float
    source: Source = Source.OBSERVED


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Dated prices for one asset.

    Stored column-wise: ``dates`` is ``datetime64[D]``, ``prices`` float64 and
    ``observed`` a boolean mask (False where the value was interpolated).
    ``dropped_rows`` counts input rows discarded while loading.
    """

    asset: Asset
    dates: np.ndarray
    prices: np.ndarray
    observed: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        prices = np.asarray(self.prices, dtype=float)
        observed = np.asarray(self.observed, dtype=bool)
        if not (len(dates) == len(prices) == len(observed)):
            raise DataError("dates, prices and source flags differ in length")
        if len(dates) > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError(f"{self.asset.value}: dates must be strictly increasing")
        if np.any(~np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError(f"{self.asset.value}: prices must be finite and positive")
        for name, arr in (("dates", dates), ("prices", prices), ("observed", observed)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def points(self) -> list[PricePoint]:
        return [
            PricePoint(d.item(), float(p), Source.OBSERVED if o else Source.INTERPOLATED)
            for d, p, o in zip(self.dates, self.prices, self.observed)
        ]

    @property
    def first(self) -> np.datetime64:
        return self.dates[0]

    @property
    def last(self) -> np.datetime64:
        return self.dates[-1]

    def is_contiguous(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.dates) == DAY))

    def index_of(self, date) -> int:
        d = np.datetime64(date, "D")
        idx = int(np.searchsorted(self.dates, d))
        if idx >= len(self) or self.dates[idx] != d:
            raise DataError(f"{self.asset.value}: no price on {d}")
        return idx

    def between(self, start, end) -> "PriceSeries":
        """Inclusive date slice."""
        lo = np.searchsorted(self.dates, np.datetime64(start, "D"), side="left")
        hi = np.searchsorted(self.dates, np.datetime64(end, "D"), side="right")
        return PriceSeries(self.asset, self.dates[lo:hi], self.prices[lo:hi],
                           self.observed[lo:hi], self.dropped_rows)

    def observed_only(self) -> "PriceSeries":
        m = self.observed
        return PriceSeries(self.asset, self.dates[m], self.prices[m], self.observed[m])


_DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%y", "%m/%d/%Y")


def _detect_format(sample: str) -> str:
    for fmt in _DATE_FORMATS:
        try:
            dt.datetime.strptime(sample, fmt)
        except ValueError:
            continue
        return fmt
    raise DataError(f"unparseable date {sample!r}")


def load_price_csv(path, asset: Asset) -> PriceSeries:
    """Read a two-column ``date,price`` CSV with one header line.

    Dates may be ``YYYY-MM-DD`` or ``M/D/YY``; the format is detected from the
    first data row and then required for every row. Rows with an empty price
    are dropped; rows with a non-positive price are rejected. Both are
    counted in ``dropped_rows``. Output is sorted by date.
    """
    asset = Asset(asset)
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    if not body:
        raise DataError(f"{path}: no data rows")

    fmt = _detect_format(body[0][0].strip())
    dates, prices = [], []
    dropped = 0
    for lineno, row in enumerate(body, start=2):
        raw_date = row[0].strip()
        raw_price = row[1].strip() if len(row) > 1 else ""
        try:
            day = dt.datetime.strptime(raw_date, fmt).date()
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparseable date {raw_date!r}") from None
        if not raw_price:
            dropped += 1
            continue
        try:
            price = float(raw_price)
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad price {raw_price!r}") from None
        if not np.isfinite(price) or price <= 0:
            logger.warning("%s:%d: rejecting non-positive price %s", path, lineno, raw_price)
            dropped += 1
            continue
        dates.append(day)
        prices.append(price)
    if dropped:
        logger.info("%s: dropped %d row(s)", path, dropped)

    d = np.array(dates, dtype="datetime64[D]")
    p = np.array(prices, dtype=float)
    order = np.argsort(d, kind="stable")
    d, p = d[order], p[order]
    if len(d) > 1 and np.any(np.diff(d) == np.timedelta64(0, "D")):
        dup = d[1:][np.diff(d) == np.timedelta64(0, "D")][0]
        raise DataError(f"{path}: duplicate date {dup}")
    return PriceSeries(asset, d, p, np.ones(len(d), dtype=bool), dropped_rows=dropped)


def write_series_csv(series: PriceSeries, path) -> None:
    """Write ``date,price,source``; source is ``observed`` or ``interpolated``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "price", "source"])
        for d, p, o in zip(series.dates, series.prices, series.observed):
            w.writerow([str(d), repr(float(p)),
                        Source.OBSERVED.value if o else Source.INTERPOLATED.value])


# --- interpolation -------------------------------------------------------

def _node_derivative(t: np.ndarray, y: np.ndarray, k: int) -> float:
    """Derivative at node ``t[k]`` of the polynomial through all (t, y)."""
    diffs = t[k] - np.delete(t, k)
    others = np.delete(np.arange(len(t)), k)
    # barycentric weights
    w = np.array([1.0 / np.prod(t[j] - np.delete(t, j)) for j in range(len(t))])
    return float(np.sum(w[others] / w[k] * y[others] / diffs) + y[k] * np.sum(1.0 / diffs))


def _stencil_derivatives(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives that are exact for cubic data.

    Each interior knot averages the derivative of the two four-point local
    cubics that contain it; ends use the one-sided four-point cubic. With
    exactly three knots, the quadratic through them is used.
    """
    n = len(t)
    d = np.empty(n)
    if n == 3:
        for k in range(3):
            d[k] = _node_derivative(t, y, k)
        return d
    for k in range(n):
        vals = []
        for lo in (k - 2, k - 1):
            if lo < 0 or lo + 4 > n:
                continue
            vals.append(_node_derivative(t[lo:lo + 4], y[lo:lo + 4], k - lo))
        if not vals:
            lo = 0 if k < 2 else n - 4
            vals.append(_node_derivative(t[lo:lo + 4], y[lo:lo + 4], k - lo))
        d[k] = sum(vals) / len(vals)
    return d


def _hermite_in_range(h, y0, y1, d0, d1) -> bool:
    """Whether the cubic Hermite piece stays within [min(y0,y1), max(y0,y1)]."""
    delta = y1 - y0
    if delta == 0.0:
        return d0 == 0.0 and d1 == 0.0
    a = d0 * h / delta
    b = d1 * h / delta
    if a < 0 or b < 0:
        return False
    # normalised piece q(s) = (a+b-2)s^3 + (3-2a-b)s^2 + a s on [0, 1]
    c3, c2, c1 = a + b - 2.0, 3.0 - 2.0 * a - b, a
    roots = np.roots([3 * c3, 2 * c2, c1]) if (c3 or c2) else np.array([])
    for r in roots:
        if abs(r.imag) < 1e-14 and 0.0 < r.real < 1.0:
            s = r.real
            q = ((c3 * s + c2) * s + c1) * s
            if q < -1e-12 or q > 1 + 1e-12:
                return False
    return True


def shape_preserving_slopes(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot slopes for the Hermite interpolant.

    Starts from cubic-exact stencil slopes, then, on every interval whose
    neighbourhood is monotone (a secant with a same-sign secant on each
    side, or a flat secant), limits slopes into the Fritsch-Carlson box whenever the
    piece would leave the range of its two knots. The box is closed under
    shrinking, so the sweep terminates.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 3:
        raise DataError("Hermite fill needs at least 3 observed points")
    d = _stencil_derivatives(t, y)
    h = np.diff(t)
    sec = np.diff(y) / h
    sgn = np.sign(sec)
    n_int = len(sec)

    guarded = np.zeros(n_int, dtype=bool)
    for k in range(n_int):
        if sgn[k] == 0:
            guarded[k] = True
            continue
        # end intervals have only one neighbour, which cannot show that the
        # data keeps its direction across them
        if 0 < k < n_int - 1:
            guarded[k] = sgn[k - 1] == sgn[k] == sgn[k + 1]

    for _ in range(n_int + 1):
        changed = False
        for k in np.flatnonzero(guarded):
            if _hermite_in_range(h[k], y[k], y[k + 1], d[k], d[k + 1]):
                continue
            if sgn[k] == 0:
                d[k] = d[k + 1] = 0.0
            else:
                cap = 3.0 * abs(sec[k])
                for j in (k, k + 1):
                    d[j] = sgn[k] * min(max(0.0, sgn[k] * d[j]), cap)
            changed = True
        if not changed:
            break
    return d


def hermite_eval(t_knots, y_knots, slopes, t_query) -> np.ndarray:
    t_knots = np.asarray(t_knots, dtype=float)
    t_query = np.asarray(t_query, dtype=float)
    k = np.clip(np.searchsorted(t_knots, t_query, side="right") - 1, 0, len(t_knots) - 2)
    h = t_knots[k + 1] - t_knots[k]
    s = (t_query - t_knots[k]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return (h00 * y_knots[k] + h10 * h * slopes[k]
            + h01 * y_knots[k + 1] + h11 * h * slopes[k + 1])


def hermite_fill(series: PriceSeries) -> PriceSeries:
    """Fill every missing calendar day between the first and last observed date.

    Observed points are passed through untouched; filled days are marked
    interpolated. Previously interpolated points in the input are discarded
    and recomputed.
    """
    obs = series.observed_only()
    if len(obs) < 3:
        raise DataError(f"{series.asset.value}: Hermite fill needs at least 3 observed points")
    t = (obs.dates - obs.first).astype(np.int64).astype(float)
    slopes = shape_preserving_slopes(t, obs.prices)
    all_dates = np.arange(obs.first, obs.last + DAY, DAY)
    tq = (all_dates - obs.first).astype(np.int64).astype(float)
    prices = hermite_eval(t, obs.prices, slopes, tq)
    observed = np.isin(all_dates, obs.dates)
    # exact pass-through on knots
    prices[observed] = obs.prices
    return PriceSeries(series.asset, all_dates, prices, observed, series.dropped_rows)


# --- calendar & alignment ------------------------------------------------

@dataclass(frozen=True, eq=False)
class TradingCalendar:
    """Which days each asset may trade.

    Bitcoin trades every day. Gold trades exactly on the days it has an
    observed price in the raw file. Dates outside the calendar's range fall
    back to a Monday-Friday rule for gold.
    """

    dates: np.ndarray
    gold_mask: np.ndarray = field(repr=False)

    def tradable(self, asset: Asset, date) -> bool:
        if Asset(asset) is Asset.BITCOIN:
            return True
        d = np.datetime64(date, "D")
        idx = int(np.searchsorted(self.dates, d))
        if idx < len(self.dates) and self.dates[idx] == d:
            return bool(self.gold_mask[idx])
        return bool(np.is_busday(d))

    def gold_tradable_at(self, index: int) -> bool:
        """Gold tradability by position in the aligned range (out of range -> weekday rule)."""
        if 0 <= index < len(self.dates):
            return bool(self.gold_mask[index])
        return bool(np.is_busday(self.dates[0] + index * DAY))


def align(gold: PriceSeries, btc: PriceSeries) -> tuple[PriceSeries, PriceSeries, TradingCalendar]:
    """Truncate both (gap-filled) series to their common date range."""
    for s in (gold, btc):
        if not s.is_contiguous():
            raise DataError(f"{s.asset.value}: series has gaps; fill it before aligning")
    start = max(gold.first, btc.first)
    end = min(gold.last, btc.last)
    if start > end:
        raise DataError(f"gold ({gold.first}..{gold.last}) and bitcoin "
                        f"({btc.first}..{btc.last}) do not overlap")
    g = gold.between(start, end)
    b = btc.between(start, end)
    return g, b, TradingCalendar(g.dates.copy(), g.observed.copy())


def prepare(gold: PriceSeries, btc: PriceSeries):
    """Gap-fill raw series and align them: ``(gold, btc, calendar)``."""
    gold = hermite_fill(gold)
    if not btc.is_contiguous():
        btc = hermite_fill(btc)
    return align(gold, btc)


def load_market(gold_path, btc_path, start=None, end=None):
    """Load both files, fill gaps and align. Optional inclusive date bounds.

    Bounds cut away history; a backtest should get the full range and
    select its dates through its own configuration instead.
    """
    gold, btc, cal = prepare(load_price_csv(gold_path, Asset.GOLD),
                             load_price_csv(btc_path, Asset.BITCOIN))
    if start is not None or end is not None:
        lo = np.datetime64(start, "D") if start is not None else gold.first
        hi = np.datetime64(end, "D") if end is not None else gold.last
        gold, btc = gold.between(lo, hi), btc.between(lo, hi)
        if len(gold) == 0:
            raise DataError(f"no data between {lo} and {hi}")
        cal = TradingCalendar(gold.dates.copy(), gold.observed.copy())
    return gold, btc, cal
