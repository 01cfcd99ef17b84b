"""Normalised portfolio state and its one-day transition.

A portfolio is tracked as the fractions ``(c, g, b)`` of its total value
held in cash, gold and bitcoin, plus the value ``V`` itself. A trade moves
the fractions ``x`` (gold) and ``y`` (bitcoin) of ``V`` out of cash; negative
values are sales.

By default every trade pays ``rate * |trade|``: buying costs ``(1 + rate)``
per unit of value and selling returns ``(1 - rate)``, so any round trip
loses money. With ``CommissionRates(symmetric=False)`` the signed rule
``dC = -P_g dG (1 + alpha) - P_b dB (1 + beta)`` is applied as written,
under which a sale *receives* ``(1 + rate)`` times the sold value and a
round trip is free.

All transition helpers accept scalars or numpy arrays, so the optimiser
can push a whole swarm through them at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InfeasibleError, NumericalError

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class CommissionRates:
    alpha: float = 0.01
    beta: float = 0.02
    symmetric: bool = True

    def __post_init__(self):
        if not (0 <= self.alpha < 1 and 0 <= self.beta < 1):
            raise ValueError(f"commission rates must lie in [0, 1): {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class Holdings:
    cash: float
    gold: float
    bitcoin: float

    def __post_init__(self):
        if min(self.cash, self.gold, self.bitcoin) < 0:
            raise ValueError(f"holdings must be non-negative: {self}")


@dataclass(frozen=True)
class PortfolioState:
    c: float
    g: float
    b: float
    value: float

    def __post_init__(self):
        if abs(self.c + self.g + self.b - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1: {self}")
        if min(self.c, self.g, self.b) < -FEAS_TOL or not self.value > 0:
            raise ValueError(f"invalid portfolio state: {self}")

    @classmethod
    def all_cash(cls, value: float) -> "PortfolioState":
        return cls(1.0, 0.0, 0.0, float(value))


@dataclass(frozen=True)
class TradeDecision:
    x: float
    y: float

    @property
    def is_hold(self) -> bool:
        return self.x == 0.0 and self.y == 0.0


@dataclass(frozen=True)
class DayReturns:
    r_g: float
    r_b: float

    @classmethod
    def from_prices(cls, gold_today, gold_next, btc_today, btc_next) -> "DayReturns":
        return cls(gold_next / gold_today - 1.0, btc_next / btc_today - 1.0)


def normalize(holdings: Holdings, gold_price: float, btc_price: float) -> PortfolioState:
    if gold_price <= 0 or btc_price <= 0:
        raise DataError("prices must be positive")
    value = holdings.cash + holdings.gold * gold_price + holdings.bitcoin * btc_price
    if value <= 0:
        raise DataError("portfolio has zero total value")
    return PortfolioState(holdings.cash / value, holdings.gold * gold_price / value,
                          holdings.bitcoin * btc_price / value, value)


# --- array-level primitives --------------------------------------------

def commission_cost(x, y, rates: CommissionRates):
    """Value lost to commission, as a fraction of V (signed under the literal rule)."""
    if rates.symmetric:
        return rates.alpha * np.abs(x) + rates.beta * np.abs(y)
    return rates.alpha * x + rates.beta * y


def cash_after(c, x, y, rates: CommissionRates):
    """Cash fraction (relative to the pre-trade V) left after trading."""
    return c - x - y - commission_cost(x, y, rates)


def growth_factor(g, b, x, y, r_g, r_b, rates: CommissionRates):
    """V_{i+1} / V_i."""
    return 1.0 + r_g * (x + g) + r_b * (y + b) - commission_cost(x, y, rates)


def transition(c, g, b, x, y, r_g, r_b, rates: CommissionRates):
    """Next-day fractions and growth factor: ``(c', g', b', V'/V)``."""
    f = growth_factor(g, b, x, y, r_g, r_b, rates)
    c1 = cash_after(c, x, y, rates) / f
    g1 = (1.0 + r_g) * (x + g) / f
    b1 = (1.0 + r_b) * (y + b) / f
    return c1, g1, b1, f


def feasible_mask(c, g, b, x, y, rates: CommissionRates, gold_tradable, delta: float = 0.0,
                  tol: float = FEAS_TOL):
    ok = cash_after(c, x, y, rates) >= delta - tol
    ok &= x + g >= -tol
    ok &= y + b >= -tol
    ok &= np.asarray(gold_tradable) | (x == 0)
    return ok


def repair(c, g, b, x, y, rates: CommissionRates, gold_tradable, delta: float = 0.0):
    """Project ``(x, y)`` onto the feasible set.

    Sales are first clamped to the held amounts (and gold zeroed on days it
    cannot trade), then purchases are scaled down together until the cash
    floor holds. If the floor is still violated with no purchases at all,
    the remaining holdings are sold pro rata until it is met.
    """
    c, g, b = (np.asarray(v, dtype=float) for v in (c, g, b))
    x = np.where(np.asarray(gold_tradable), np.maximum(x, -g), 0.0)
    y = np.maximum(y, -b)
    a1, b1 = (1.0 - rates.alpha, 1.0 - rates.beta) if rates.symmetric else \
        (1.0 + rates.alpha, 1.0 + rates.beta)
    buy = np.maximum(x, 0) * (1 + rates.alpha) + np.maximum(y, 0) * (1 + rates.beta)
    proceeds = -np.minimum(x, 0) * a1 - np.minimum(y, 0) * b1
    room = c + proceeds - delta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = np.where(buy > 0, np.clip(room / np.where(buy > 0, buy, 1.0), 0.0, 1.0), 1.0)
    x = np.where(x > 0, x * scale, x)
    y = np.where(y > 0, y * scale, y)

    short = delta - (c + proceeds)
    if np.any(short > 0):
        gold_left = np.where(np.asarray(gold_tradable), g + np.minimum(x, 0), 0.0)
        btc_left = b + np.minimum(y, 0)
        avail = gold_left * a1 + btc_left * b1
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where((short > 0) & (avail > 0), np.clip(short / avail, 0.0, 1.0), 0.0)
        x = np.where(short > 0, np.minimum(x, 0) - frac * gold_left, x)
        y = np.where(short > 0, np.minimum(y, 0) - frac * btc_left, y)
    return x, y


# --- scalar API --------------------------------------------------------

def feasible(state: PortfolioState, decision: TradeDecision, rates: CommissionRates,
             gold_tradable: bool = True, delta: float = 0.0) -> bool:
    return bool(feasible_mask(state.c, state.g, state.b, decision.x, decision.y,
                              rates, gold_tradable, delta))


def value_step(state: PortfolioState, decision: TradeDecision, returns: DayReturns,
               rates: CommissionRates) -> float:
    """Total value after trading today and marking at tomorrow's prices."""
    v = state.value * growth_factor(state.g, state.b, decision.x, decision.y,
                                    returns.r_g, returns.r_b, rates)
    if not np.isfinite(v):
        raise NumericalError(f"non-finite portfolio value from {state}, {decision}")
    return float(v)


def state_step(state: PortfolioState, decision: TradeDecision, returns: DayReturns,
               rates: CommissionRates) -> PortfolioState:
    c1, g1, b1, f = transition(state.c, state.g, state.b, decision.x, decision.y,
                               returns.r_g, returns.r_b, rates)
    if min(c1, g1, b1) < -FEAS_TOL:
        raise InfeasibleError(f"decision {decision} is infeasible for {state}")
    if not np.isfinite(f) or f <= 0:
        raise NumericalError(f"non-positive value factor {f}")
    # tolerated float dust below zero is clipped, then renormalised
    c1, g1, b1 = max(c1, 0.0), max(g1, 0.0), max(b1, 0.0)
    s = c1 + g1 + b1
    return PortfolioState(float(c1 / s), float(g1 / s), float(b1 / s), float(state.value * f))


def trade_holdings(holdings: Holdings, d_gold: float, d_btc: float, gold_price: float,
                   btc_price: float, rates: CommissionRates) -> Holdings:
    """Apply a trade in units (ounces, coins) and settle cash with commission."""
    if rates.symmetric:
        cost = (gold_price * (d_gold + rates.alpha * abs(d_gold))
                + btc_price * (d_btc + rates.beta * abs(d_btc)))
    else:
        cost = gold_price * d_gold * (1 + rates.alpha) + btc_price * d_btc * (1 + rates.beta)
    return Holdings(holdings.cash - cost, holdings.gold + d_gold, holdings.bitcoin + d_btc)


def decision_to_units(state: PortfolioState, decision: TradeDecision, gold_price: float,
                      btc_price: float) -> tuple[float, float]:
    """Ounces and coins corresponding to the value fractions of a decision."""
    return (decision.x * state.value / gold_price, decision.y * state.value / btc_price)
