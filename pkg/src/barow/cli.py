"""Command-line entry point: ``barow generate|backtest|tune|compare``.

Exit codes: 0 success, 1 internal or numerical failure, 2 usage, config
or validation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

from . import config as cfgmod
from . import reports
from .backtest import run_backtest, select_r, tune_grid
from .data import (
    PanelDataset,
    generate_synthetic_panel,
    load_panel_csv,
    load_price_csv,
    panel_from_prices,
    prepare_panel,
    write_panel_csv,
    write_truth_csv,
)
from .errors import BarowError, NumericalError

logger = logging.getLogger("barow")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


@contextmanager
def run_directory(out: Path):
    """Yield a scratch directory that replaces ``out`` only if the block succeeds."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old-", dir=out.parent))
        os.replace(out, old / out.name)
        os.replace(tmp, out)
        shutil.rmtree(old, ignore_errors=True)
    else:
        os.replace(tmp, out)


def _load(args) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "model", None):
        overrides["backtest"] = {"models": list(dict.fromkeys(args.model))}
    return cfgmod.load_config(args.config, overrides)


def _load_panel(cfg: dict, config_path) -> PanelDataset:
    data = cfg["data"]
    if data["panel"] is None:
        raise cfgmod.ConfigError("data.panel", "a panel CSV path is required")
    path = Path(data["panel"])
    if not path.is_absolute() and config_path is not None:
        path = Path(config_path).parent / path
    if not path.exists():
        raise cfgmod.ConfigError("data.panel", f"file not found: {path}")
    panel = load_panel_csv(path)
    return prepare_panel(panel, neutralize=data["neutralize"], standardize=data["standardize_features"])


def cmd_generate(args) -> int:
    cfg = _load(args)
    manifest = reports.make_manifest(cfg, args.config)
    prices = cfg["data"]["prices"]
    if prices is not None:
        path = Path(prices)
        if not path.is_absolute() and args.config is not None:
            path = Path(args.config).parent / path
        m = cfg["macd"]
        panel = panel_from_prices(load_price_csv(path), m["fast"], m["slow"], m["signal"])
    else:
        panel = generate_synthetic_panel(cfgmod.regime_spec(cfg))
    with run_directory(args.out) as tmp:
        write_panel_csv(panel, tmp / "panel.csv")
        if panel.truth is not None:
            write_truth_csv(panel, tmp / "truth.csv")
        reports.write_manifest(tmp / "manifest.yaml", manifest)
    print(f"wrote {len(panel)} dates to {Path(args.out) / 'panel.csv'}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    cfg = _load(args)
    panel = _load_panel(cfg, args.config)
    burn_in = cfg["backtest"]["burn_in_days"]
    if burn_in >= len(panel):
        raise cfgmod.ConfigError(
            "backtest.burn_in_days", f"{burn_in} must be smaller than the panel length {len(panel)}"
        )
    manifest = reports.make_manifest(cfg, args.config)
    rows = []
    with run_directory(args.out) as tmp:
        for name in cfg["backtest"]["models"]:
            report = run_backtest(panel, cfgmod.backtest_config(cfg, name))
            reports.write_report_yaml(tmp / f"{name}.report.yaml", name, report, manifest)
            reports.write_daily_csv(tmp / f"{name}.daily.csv", report)
            rows.append((report.model_label, report.metrics))
        reports.write_metrics_csv(tmp / "metrics.csv", rows)
        reports.write_manifest(tmp / "manifest.yaml", manifest)
    print(reports.format_compare(rows))
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load(args)
    if args.model:
        cfg["tune"]["model"] = args.model[0]
        cfgmod.validate(cfg)
    panel = _load_panel(cfg, args.config)
    bt = cfgmod.backtest_config(cfg, cfg["tune"]["model"])
    window = cfgmod.tune_window(cfg)
    grid = cfg["tune"]["grid"]
    table = tune_grid(panel, grid, window, bt)
    best = select_r(table)
    manifest = reports.make_manifest(cfg, args.config)
    with run_directory(args.out) as tmp:
        reports.write_tune_csv(tmp / "tune.csv", table)
        doc = {"manifest": manifest, "model": cfg["tune"]["model"], "selected_r": best}
        (tmp / "tune.yaml").write_text(reports.dump_yaml(doc), encoding="utf-8")
    for r, m in table:
        print(f"r={r:g}  total_return={m.total_return:.6g}")
    print(f"selected r = {best:g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = []
    for path in args.reports:
        rows.extend(reports.read_metrics(path))
    print(reports.format_compare(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, default=Path(default_out), help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument(
            "--model", action="append", choices=cfgmod.MODEL_NAMES,
            help="model to run (repeatable); overrides backtest.models",
        )

    common(sub.add_parser("generate", help="write a synthetic or MACD panel CSV"), "runs/generate")
    common(sub.add_parser("backtest", help="walk-forward backtest of each model"), "runs/backtest")
    common(sub.add_parser("tune", help="grid search of r on the tuning window"), "runs/tune")
    p = sub.add_parser("compare", help="tabulate metrics from report files")
    p.add_argument("reports", nargs="+", type=Path)
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "backtest": cmd_backtest,
    "tune": cmd_tune,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (BarowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        logger.exception("internal error")
        return EXIT_FAILURE
