"""Command-line front end.

Subcommands: ``interpolate``, ``forecast``, ``backtest``, ``sensitivity``.
Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
``CTP_SEED`` in the environment overrides the configured seed; command
line flags override both.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import backtest as bt
from . import config as cfgmod
from . import forecaster as fc
from . import sensitivity as sens
from .errors import CTPError, DataError, UsageError
from .market_data import Asset, hermite_fill, load_price_csv, prepare, write_series_csv
from .risk import Personality

logger = logging.getLogger("ctp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _atomic_write(path: Path, write) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        write(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _window_values(tokens) -> dict:
    if not tokens:
        return {}
    mode = tokens[0]
    if mode == "adaptive" and len(tokens) <= 2:
        out = {"window": "adaptive"}
        if len(tokens) == 2:
            out["window_length"] = tokens[1]
        return out
    if mode == "fixed" and len(tokens) == 2 and tokens[1].isdigit():
        return {"window": "fixed", "window_length": tokens[1]}
    raise UsageError("--window takes 'fixed N' or 'adaptive [T0]'")


def _settings(args, extra: dict | None = None) -> cfgmod.RunSettings:
    layers = []
    if getattr(args, "preset", None):
        layers.append({"preset": args.preset})
    if getattr(args, "config", None):
        layers.append(cfgmod.read_config(args.config))
    if os.environ.get("CTP_SEED"):
        layers.append({"seed": os.environ["CTP_SEED"]})
    flags = {
        "gold_csv": getattr(args, "gold", None),
        "btc_csv": getattr(args, "btc", None),
        "seed": None if getattr(args, "seed", None) is None else str(args.seed),
        "personality": getattr(args, "personality", None),
        "start_date": getattr(args, "start", None),
        "end_date": getattr(args, "end", None),
    }
    flags.update(_window_values(getattr(args, "window", None)))
    flags.update(extra or {})
    layers.append({k: v for k, v in flags.items() if v is not None})
    return cfgmod.build(cfgmod.merge(*layers))


def _load(settings: cfgmod.RunSettings):
    gold_path, btc_path = settings.require_data()
    return prepare(load_price_csv(gold_path, Asset.GOLD), load_price_csv(btc_path, Asset.BITCOIN))


def _manifest(out_dir: Path, command: str, args, settings: cfgmod.RunSettings | None,
              inputs: dict) -> None:
    data = {
        "command": command,
        "tool_version": __version__,
        "config_path": str(args.config) if getattr(args, "config", None) else None,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "output_dir": str(out_dir),
        "seed": settings.backtest.seed if settings else None,
        "settings": {k: str(v) for k, v in sorted(settings.values.items())} if settings else {},
    }
    _atomic_write(out_dir / "manifest.json",
                  lambda p: p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n"))


# --- subcommands -------------------------------------------------------

def cmd_interpolate(args) -> int:
    raw = load_price_csv(args.gold, Asset.GOLD)
    filled = hermite_fill(raw)
    out = Path(args.out)
    _atomic_write(out, lambda p: write_series_csv(filled, p))
    n_filled = int((~filled.observed).sum())
    print(f"filled {n_filled} day(s); wrote {len(filled)} rows to {out}")
    _manifest(out.parent, "interpolate", args, None, {"gold_csv": args.gold})
    return 0


def cmd_forecast(args) -> int:
    settings = _settings(args)
    gold, btc, cal = _load(settings)
    date = np.datetime64(args.date, "D")
    if date < gold.first or date > gold.last:
        raise DataError(f"date {date} is outside the data ({gold.first}..{gold.last})")
    day = int(np.searchsorted(gold.dates, date))
    cfg = settings.backtest
    view = bt.DayView(bt._Market(gold, btc, cal), day)
    asset = "gold" if args.asset == "gold" else "bitcoin"
    need = cfg.window.history_needed
    hist = view.history(asset, need)
    if len(hist) < max(cfg.window.length if cfg.window.mode == "fixed" else 0,
                       cfg.spec.min_obs):
        raise DataError(f"only {len(hist)} day(s) of history before {date}")
    if cfg.window.mode == "fixed":
        T = cfg.window.length
    else:
        T = fc.adaptive_window(hist, cfg.spec, cfg.window.length, cfg.window.max_steps).T
    window = hist[-T:]
    fit = fc.fit(window, cfg.spec)
    out = fc.forecast(fit, window, bt.HORIZON)
    r2 = fc.r_squared(fit.actual, fit.fitted)
    lags = min(20, len(fit.residuals) - 1)
    wn = fc.white_noise_check(fit.residuals, lags, cfg.spec.p + cfg.spec.q)
    print(f"asset={asset} date={date} window={T}")
    print("forecast=" + " ".join(f"{v:.6f}" for v in out.points))
    print(f"sigma={out.sigma:.6f}")
    print(f"r2={r2:.6f}")
    print(f"ljung_box_q={wn.q_stat:.4f} p={wn.p_value:.4f} "
          f"white_noise={'yes' if wn.passed else 'no'}")
    if args.diagnostics:
        d = Path(args.diagnostics)
        max_lag = min(20, len(fit.diffed) - 1)
        rho = fc.acf(fit.diffed, max_lag)
        phi = fc.pacf(fit.diffed, max_lag)

        def table(name, header, rows):
            def write(p):
                with p.open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(header)
                    w.writerows(rows)
            _atomic_write(d / name, write)

        table("acf.csv", ["lag", "acf"], [(k, repr(float(v))) for k, v in enumerate(rho)])
        table("pacf.csv", ["lag", "pacf"], [(k, repr(float(v))) for k, v in enumerate(phi)])
        table("residuals.csv", ["t", "actual", "fitted", "residual"],
              [(k, repr(float(a)), repr(float(f)), repr(float(e))) for k, (a, f, e)
               in enumerate(zip(fit.actual, fit.fitted, fit.residuals))])
        _manifest(d, "forecast", args, settings,
                  {"gold_csv": settings.gold_csv, "btc_csv": settings.btc_csv})
    return 0


def cmd_backtest(args) -> int:
    settings = _settings(args)
    gold, btc, cal = _load(settings)
    runner = bt.run_markowitz if args.baseline == "markowitz" else bt.run
    report = runner(gold, btc, cal, settings.backtest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bt.export_report(report, out / "report")
    _manifest(out, "backtest", args, settings,
              {"gold_csv": settings.gold_csv, "btc_csv": settings.btc_csv})
    print(f"strategy={report.strategy} personality={report.personality} "
          f"days={len(report.records)}")
    print(f"final_value={report.final_value:.2f}")
    return 0


def cmd_sensitivity(args) -> int:
    out = Path(args.out)
    if args.mode == "scheme":
        if args.trials is not None and args.trials < 1:
            raise UsageError("--trials must be at least 1")
        if not args.report:
            raise UsageError("--mode scheme needs --report <backtest output dir>")
        rep_dir = Path(args.report)
        try:
            manifest = json.loads((rep_dir / "manifest.json").read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read prior report in {rep_dir}: {exc}") from exc
        settings = cfgmod.build(manifest["settings"])
        summary = json.loads((rep_dir / "report.json").read_text())
        report = bt.report_from_csv(rep_dir / "report.csv", settings.backtest,
                                    strategy=summary.get("strategy", "pso"))
        gold, btc, cal = _load(settings)
        spec = sens.PerturbationSpec((args.low, args.high), args.trials or 50,
                                     args.seed if args.seed is not None else 0)
        res = sens.perturb_schedule(report, gold, btc, cal, spec)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "scheme_perturbation.csv", lambda p: sens.write_trials_csv(res, p))
        print(f"baseline={res.baseline_value:.4f} trials={spec.trials} "
              f"min={np.nanmin(res.trial_values):.4f} max={np.nanmax(res.trial_values):.4f} "
              f"beat_objective={res.beat_fraction:.2%}")
        _manifest(out, "sensitivity", args, settings,
                  {"report": rep_dir, "gold_csv": settings.gold_csv, "btc_csv": settings.btc_csv})
        return 0
    settings = _settings(args)
    gold, btc, cal = _load(settings)
    rows = sens.parameter_sensitivity(settings.backtest, gold, btc, cal,
                                      absolute=args.absolute)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "parameter_sensitivity.csv", lambda p: sens.write_rows_csv(rows, p))
    for r in rows:
        print(f"{r.label}\t{r.final_value:.4f}")
    _manifest(out, "sensitivity", args, settings,
              {"gold_csv": settings.gold_csv, "btc_csv": settings.btc_csv})
    return 0


# --- parser ------------------------------------------------------------

def _data_flags(p):
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    p.add_argument("--gold", help="gold price CSV")
    p.add_argument("--btc", help="bitcoin price CSV")
    p.add_argument("--window", nargs="+", metavar="MODE",
                   help="'fixed N' or 'adaptive [T0]'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ctp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("interpolate", help="fill gold's non-trading days")
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("forecast", help="3-day ARIMA forecast on a date")
    _data_flags(p)
    p.add_argument("--asset", required=True, choices=["gold", "bitcoin"])
    p.add_argument("--date", required=True)
    p.add_argument("--diagnostics", metavar="DIR", help="write ACF/PACF/residual CSVs")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("backtest", help="run the daily trading backtest")
    _data_flags(p)
    p.add_argument("--personality", choices=[x.value for x in Personality])
    p.add_argument("--baseline", choices=["markowitz"])
    p.add_argument("--seed", type=int)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sensitivity", help="schedule perturbation or parameter reruns")
    _data_flags(p)
    p.add_argument("--mode", required=True, choices=["scheme", "params"])
    p.add_argument("--report", help="backtest output directory (scheme mode)")
    p.add_argument("--trials", type=int)
    p.add_argument("--low", type=float, default=0.01)
    p.add_argument("--high", type=float, default=0.03)
    p.add_argument("--absolute", action="store_true",
                   help="nudge parameters by +-0.001 absolute instead of relative 0.1%%")
    p.add_argument("--personality", choices=[x.value for x in Personality])
    p.add_argument("--seed", type=int)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
