"""Run settings from a flat ``key = value`` file.

Recognised keys (all optional):

============================  ==========================================
preset                        ``ci`` (bundled sample) or ``full`` (five-year data)
gold_csv, btc_csv             price files (``date,price`` with a header)
start_date, end_date          ISO dates; empty means the data's edge
initial_cash                  starting cash, default 1000
alpha, beta                   gold / bitcoin commission rates
symmetric_commissions         true: ``rate * |trade|``; false: signed rule
personality                   crazy | stable | middle
delta                         minimum cash fraction after trading
risk_free                     risk-free daily return for the Sharpe ratio
golden                        risk weight of the middle personality
window                        fixed | adaptive
window_length                 fixed length, or adaptive starting length
window_max_steps              adaptive hill-climb step limit
pso_particles, pso_iterations swarm size and iteration count
pso_omega_start, pso_omega_end, pso_c1, pso_c2
seed                          master seed
arima_p, arima_d, arima_q     ARIMA order
markowitz_lookback            days of returns for the covariance
markowitz_step                grid step of the baseline sweep
risk_aversion                 variance penalty of the baseline
============================  ==========================================

Lines starting with ``#`` or ``;`` are comments.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backtest import BacktestConfig, MarkowitzParams, WindowPolicy
from .errors import UsageError
from .forecaster import ArimaSpec
from .portfolio import CommissionRates
from .pso import PsoConfig
from .risk import Personality, RiskParams

KEYS = (
    "preset", "gold_csv", "btc_csv", "start_date", "end_date", "initial_cash", "alpha", "beta",
    "symmetric_commissions", "personality", "delta", "risk_free", "golden", "window",
    "window_length", "window_max_steps", "pso_particles", "pso_iterations", "pso_omega_start",
    "pso_omega_end", "pso_c1", "pso_c2", "seed", "arima_p", "arima_d", "arima_q",
    "markowitz_lookback", "markowitz_step", "risk_aversion",
)

DEFAULTS = {
    "start_date": "", "end_date": "", "initial_cash": "1000", "alpha": "0.01", "beta": "0.02",
    "symmetric_commissions": "true", "personality": "middle", "delta": "0", "risk_free": "0",
    "golden": "0.618", "window": "adaptive", "window_length": "60", "window_max_steps": "50",
    "pso_particles": "100", "pso_iterations": "200", "pso_omega_start": "0.9",
    "pso_omega_end": "0.4", "pso_c1": "2", "pso_c2": "2", "seed": "0", "arima_p": "1",
    "arima_d": "1", "arima_q": "1", "markowitz_lookback": "60", "markowitz_step": "0.05",
    "risk_aversion": "1",
}


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("ctp") / "data" / name))


PRESETS = {
    # 120 trading days on bundled synthetic data, preceded by 120 days of history
    "ci": {"gold_csv": "<bundled>/ci_gold.csv", "btc_csv": "<bundled>/ci_btc.csv",
           "start_date": "2016-05-03", "end_date": "2016-08-31"},
    # the full five-year competition files; paths must be supplied
    "full": {"start_date": "", "end_date": "2021-09-10"},
}


@dataclass(frozen=True)
class RunSettings:
    backtest: BacktestConfig
    gold_csv: Path | None
    btc_csv: Path | None
    values: dict

    def require_data(self) -> tuple[Path, Path]:
        if self.gold_csv is None or self.btc_csv is None:
            raise UsageError("no price files: pass --gold/--btc or set gold_csv/btc_csv")
        return self.gold_csv, self.btc_csv


def read_config(path) -> dict[str, str]:
    """Parse a flat key=value file into a dict of strings."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        parser.read_string("[ctp]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc
    values = dict(parser["ctp"])
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise UsageError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return values


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _path(v: str | None) -> Path | None:
    if not v:
        return None
    if v.startswith("<bundled>/"):
        return bundled_path(v.split("/", 1)[1])
    return Path(v)


def merge(*layers: dict) -> dict[str, str]:
    """Later layers win; a ``preset`` key expands underneath its own layer."""
    out = dict(DEFAULTS)
    for layer in layers:
        layer = {k: v for k, v in layer.items() if v is not None}
        if "preset" in layer:
            name = layer["preset"]
            if name not in PRESETS:
                raise UsageError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
            out.update(PRESETS[name])
        out.update(layer)
    return out


def build(values: dict[str, str]) -> RunSettings:
    """Turn merged string settings into typed configuration."""
    v = dict(values)
    try:
        window = WindowPolicy(v["window"], int(v["window_length"]), int(v["window_max_steps"]))
        cfg = BacktestConfig(
            start_date=v["start_date"] or None,
            end_date=v["end_date"] or None,
            initial_cash=float(v["initial_cash"]),
            rates=CommissionRates(float(v["alpha"]), float(v["beta"]),
                                  _bool(v["symmetric_commissions"])),
            risk=RiskParams(Personality(v["personality"]), float(v["delta"]),
                            float(v["risk_free"]), float(v["golden"])),
            window=window,
            pso=PsoConfig(n_particles=int(v["pso_particles"]),
                          max_iters=int(v["pso_iterations"]),
                          omega_start=float(v["pso_omega_start"]),
                          omega_end=float(v["pso_omega_end"]),
                          c1=float(v["pso_c1"]), c2=float(v["pso_c2"]),
                          seed=int(v["seed"])),
            spec=ArimaSpec(int(v["arima_p"]), int(v["arima_d"]), int(v["arima_q"])),
            markowitz=MarkowitzParams(int(v["markowitz_lookback"]), float(v["markowitz_step"]),
                                      float(v["risk_aversion"])),
        )
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid setting: {exc}") from exc
    return RunSettings(cfg, _path(v.get("gold_csv")), _path(v.get("btc_csv")), v)
