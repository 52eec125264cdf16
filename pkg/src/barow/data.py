"""Panel containers, CSV I/O, synthetic regime data and MACD features."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .model import Batch

logger = logging.getLogger(__name__)

__all__ = [
    "PanelDataset",
    "RegimeSpec",
    "format_float",
    "load_panel_csv",
    "write_panel_csv",
    "write_truth_csv",
    "generate_synthetic_panel",
    "neutralize_cross_section",
    "standardize_features",
    "prepare_panel",
    "ema",
    "macd",
    "load_price_csv",
    "macd_features",
    "panel_from_prices",
]

_DEGENERATE_STD = 1e-12


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


@dataclass
class PanelDataset:
    batches: list[Batch]
    dim: int
    universe: list[str] = field(default_factory=list)
    truth: list[np.ndarray] | None = None

    def __post_init__(self):
        for prev, cur in zip(self.batches, self.batches[1:]):
            if not prev.date < cur.date:
                raise InvalidArgumentError(
                    f"dates not strictly increasing: {prev.date} then {cur.date}"
                )
        for b in self.batches:
            if b.size and b.X.shape[1] != self.dim:
                raise InvalidArgumentError(
                    f"batch {b.date} has {b.X.shape[1]} features, expected {self.dim}"
                )
        if self.truth is not None and len(self.truth) != len(self.batches):
            raise InvalidArgumentError("truth must have one vector per date")
        if not self.universe:
            self.universe = sorted({s for b in self.batches for s in b.symbols})

    def __len__(self) -> int:
        return len(self.batches)

    @property
    def dates(self) -> list:
        return [b.date for b in self.batches]

    def head(self, n: int) -> "PanelDataset":
        """First ``n`` dates."""
        truth = None if self.truth is None else self.truth[:n]
        return PanelDataset(self.batches[:n], self.dim, list(self.universe), truth)

    def between(self, start=None, end=None) -> "PanelDataset":
        """Dates in the closed interval [start, end]; None leaves a side open."""
        keep = [
            i for i, b in enumerate(self.batches)
            if (start is None or b.date >= start) and (end is None or b.date <= end)
        ]
        truth = None if self.truth is None else [self.truth[i] for i in keep]
        return PanelDataset([self.batches[i] for i in keep], self.dim, list(self.universe), truth)

    def map_batches(self, fn) -> "PanelDataset":
        return replace(self, batches=[fn(b) for b in self.batches])


# -- CSV ---------------------------------------------------------------------

def _parse_date(text: str, row: int) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad date {text!r}, expected YYYY-MM-DD", row) from None


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} in column {column!r}", row) from None


def load_panel_csv(path) -> PanelDataset:
    """Read a ``date,symbol,y,x0,...`` panel; rows with non-finite cells are dropped."""
    path = Path(path)
    groups: dict[date, list[tuple[str, float, list[float]]]] = defaultdict(list)
    seen: set[tuple[date, str]] = set()
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", 1)
        if header[:3] != ["date", "symbol", "y"]:
            raise ParseError("header must start with date,symbol,y", 1)
        features = header[3:]
        if not features:
            raise ParseError("no feature columns x0,...", 1)
        if features != [f"x{i}" for i in range(len(features))]:
            raise ParseError(f"feature columns must be x0..x{len(features) - 1}", 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", row_no)
            d = _parse_date(row[0], row_no)
            sym = row[1]
            if not sym:
                raise ParseError("empty symbol", row_no)
            if (d, sym) in seen:
                raise ParseError(f"duplicate (date, symbol) pair ({d}, {sym})", row_no)
            seen.add((d, sym))
            y = _parse_float(row[2], "y", row_no)
            x = [_parse_float(v, c, row_no) for v, c in zip(row[3:], features)]
            if not all(math.isfinite(v) for v in [y, *x]):
                dropped += 1
                continue
            groups[d].append((sym, y, x))
    if dropped:
        logger.info("dropped %d rows with non-finite values from %s", dropped, path)
    dim = len(features)
    batches = []
    for d in sorted(groups):
        rows = sorted(groups[d], key=lambda t: t[0])
        X = np.array([r[2] for r in rows], dtype=float).reshape(len(rows), dim)
        Y = np.array([r[1] for r in rows], dtype=float)
        batches.append(Batch(X, Y, d, tuple(r[0] for r in rows)))
    return PanelDataset(batches, dim)


def write_panel_csv(panel: PanelDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "symbol", "y", *[f"x{i}" for i in range(panel.dim)]])
        for b in panel.batches:
            for sym, y, x in zip(b.symbols, b.Y, b.X):
                writer.writerow([str(b.date), sym, format_float(y), *map(format_float, x)])


def write_truth_csv(panel: PanelDataset, path) -> None:
    if panel.truth is None:
        raise InvalidArgumentError("panel has no ground-truth weights")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *[f"w{i}" for i in range(panel.dim)]])
        for b, w in zip(panel.batches, panel.truth):
            writer.writerow([str(b.date), *map(format_float, w)])


# -- synthetic data ----------------------------------------------------------

@dataclass(frozen=True)
class RegimeSpec:
    """Piecewise-constant true weights.

    ``segments`` is a list of ``(length_days, w)``. Features are drawn
    i.i.d. from ``feature_dist`` (``"normal"`` or ``"uniform"`` on
    ``uniform_bounds``) and targets are ``x^T w + N(0, noise_std^2)``.
    """

    segments: tuple
    noise_std: float = 1.0
    K: int = 100
    feature_dist: str = "normal"
    uniform_bounds: tuple[float, float] = (-1.0, 1.0)
    seed: int = 0
    start: date = date(2010, 1, 4)

    def __post_init__(self):
        if not self.segments:
            raise InvalidArgumentError("at least one segment is required")
        segs = []
        for length, w in self.segments:
            if int(length) != length or length < 1:
                raise InvalidArgumentError(f"segment length must be >= 1, got {length}")
            segs.append((int(length), tuple(float(v) for v in np.ravel(w))))
        dims = {len(w) for _, w in segs}
        if len(dims) != 1 or 0 in dims:
            raise InvalidArgumentError("all segment weights must share one positive dimension")
        object.__setattr__(self, "segments", tuple(segs))
        if not self.noise_std >= 0:
            raise InvalidArgumentError("noise_std must be >= 0")
        if self.K < 1:
            raise InvalidArgumentError("K must be >= 1")
        if self.feature_dist not in ("normal", "uniform"):
            raise InvalidArgumentError(f"unknown feature_dist {self.feature_dist!r}")
        lo, hi = self.uniform_bounds
        if self.feature_dist == "uniform" and not lo < hi:
            raise InvalidArgumentError("uniform_bounds must satisfy lo < hi")

    @property
    def dim(self) -> int:
        return len(self.segments[0][1])

    @property
    def n_days(self) -> int:
        return sum(length for length, _ in self.segments)


def _business_days(start: date, n: int) -> list[date]:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    days = np.busday_offset(first, np.arange(n), roll="forward")
    return [d.item() for d in days]


def generate_synthetic_panel(spec: RegimeSpec) -> PanelDataset:
    rng = np.random.default_rng(spec.seed)
    dates = _business_days(spec.start, spec.n_days)
    width = len(str(spec.K - 1))
    symbols = tuple(f"S{i:0{width}d}" for i in range(spec.K))
    batches, truth = [], []
    t = 0
    for length, w in spec.segments:
        w = np.array(w)
        for _ in range(length):
            if spec.feature_dist == "normal":
                X = rng.standard_normal((spec.K, spec.dim))
            else:
                X = rng.uniform(*spec.uniform_bounds, size=(spec.K, spec.dim))
            Y = X @ w
            if spec.noise_std > 0:
                Y = Y + rng.normal(0.0, spec.noise_std, spec.K)
            batches.append(Batch(X, Y, dates[t], symbols))
            truth.append(w.copy())
            t += 1
    return PanelDataset(batches, spec.dim, list(symbols), truth)


# -- cross-sectional transforms ---------------------------------------------

def neutralize_cross_section(batch: Batch) -> Batch:
    """Z-score the targets across the cross-section (population std).

    A simple stand-in for factor-model neutralization.
    """
    if batch.size < 2:
        raise InvalidArgumentError("neutralization needs at least 2 instruments")
    Y = batch.Y
    std = Y.std()
    if std < _DEGENERATE_STD:
        Y = np.zeros_like(Y)
    else:
        Y = (Y - Y.mean()) / std
    return Batch(batch.X, Y, batch.date, batch.symbols)


def standardize_features(batch: Batch) -> Batch:
    """Z-score each feature column across the cross-section; flat columns become 0."""
    X = batch.X
    if batch.size < 2:
        return batch
    std = X.std(axis=0)
    flat = std < _DEGENERATE_STD
    Z = (X - X.mean(axis=0)) / np.where(flat, 1.0, std)
    Z[:, flat] = 0.0
    return Batch(Z, batch.Y, batch.date, batch.symbols)


def prepare_panel(panel: PanelDataset, neutralize: bool = False, standardize: bool = False) -> PanelDataset:
    """Apply the optional per-date transforms; dates with fewer than 2 rows are dropped."""
    if not (neutralize or standardize):
        return panel
    keep = [i for i, b in enumerate(panel.batches) if b.size >= 2]
    if len(keep) < len(panel.batches):
        logger.info("dropped %d dates with fewer than 2 instruments", len(panel.batches) - len(keep))
    batches = []
    for i in keep:
        b = panel.batches[i]
        if standardize:
            b = standardize_features(b)
        if neutralize:
            b = neutralize_cross_section(b)
        batches.append(b)
    truth = None if panel.truth is None else [panel.truth[i] for i in keep]
    return PanelDataset(batches, panel.dim, list(panel.universe), truth)


# -- MACD --------------------------------------------------------------------

def ema(values, n: int) -> np.ndarray:
    """EMA with factor 2/(n+1), seeded by the mean of the first n values.

    Entries before index n-1 are NaN.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    if n < 1:
        raise InvalidArgumentError("EMA span must be >= 1")
    if values.size < n:
        return out
    alpha = 2.0 / (n + 1)
    level = values[:n].mean()
    out[n - 1] = level
    for i in range(n, values.size):
        level = alpha * values[i] + (1 - alpha) * level
        out[i] = level
    return out


def macd(close, fast: int = 12, slow: int = 26, signal: int = 9) -> np.ndarray:
    """Columns ``[macd, signal, macd - signal]``; rows without full history are NaN."""
    if not 1 <= fast < slow:
        raise InvalidArgumentError(f"need 1 <= fast < slow, got fast={fast}, slow={slow}")
    if signal < 1:
        raise InvalidArgumentError(f"signal span must be >= 1, got {signal}")
    close = np.asarray(close, dtype=float)
    line = ema(close, fast) - ema(close, slow)
    sig = np.full(close.shape, np.nan)
    start = slow - 1
    if close.size > start:
        sig[start:] = ema(line[start:], signal)
    return np.column_stack([line, sig, line - sig])


def load_price_csv(path) -> dict[str, tuple[list[date], np.ndarray]]:
    """Read a ``date,symbol,close`` file into per-symbol date-sorted series."""
    series: dict[str, list[tuple[date, float]]] = defaultdict(list)
    seen = set()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["date", "symbol", "close"]:
            raise ParseError("header must be date,symbol,close", 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", row_no)
            d = _parse_date(row[0], row_no)
            if (d, row[1]) in seen:
                raise ParseError(f"duplicate (date, symbol) pair ({d}, {row[1]})", row_no)
            seen.add((d, row[1]))
            series[row[1]].append((d, _parse_float(row[2], "close", row_no)))
    out = {}
    for sym, obs in series.items():
        obs.sort()
        out[sym] = ([d for d, _ in obs], np.array([p for _, p in obs]))
    return out


def macd_features(
    prices: Mapping[str, tuple[Sequence[date], Sequence[float]]],
    fast: int = 12,
    slow: int = 26,
    signal: int = 9,
) -> dict[date, dict[str, np.ndarray]]:
    """Per date, the MACD feature triple of every symbol with enough history."""
    out: dict[date, dict[str, np.ndarray]] = defaultdict(dict)
    for sym in sorted(prices):
        dates, close = prices[sym]
        feats = macd(close, fast, slow, signal)
        for d, row in zip(dates, feats):
            if np.all(np.isfinite(row)):
                out[d][sym] = row
    return dict(sorted(out.items()))


def panel_from_prices(
    prices: Mapping[str, tuple[Sequence[date], Sequence[float]]],
    fast: int = 12,
    slow: int = 26,
    signal: int = 9,
) -> PanelDataset:
    """MACD features at each close paired with the next close-to-close return.

    A row exists for (date, symbol) when the features are defined and the
    symbol also has a price on its next observation date.
    """
    feats = macd_features(prices, fast, slow, signal)
    forward: dict[tuple[date, str], float] = {}
    for sym, (dates, close) in prices.items():
        close = np.asarray(close, dtype=float)
        for i in range(len(dates) - 1):
            if close[i] != 0:
                forward[(dates[i], sym)] = close[i + 1] / close[i] - 1.0
    batches = []
    for d, rows in feats.items():
        syms = tuple(s for s in sorted(rows) if (d, s) in forward)
        if not syms:
            continue
        X = np.array([rows[s] for s in syms])
        Y = np.array([forward[(d, s)] for s in syms])
        if not np.all(np.isfinite(Y)):
            keep = np.isfinite(Y)
            X, Y, syms = X[keep], Y[keep], tuple(s for s, k in zip(syms, keep) if k)
        batches.append(Batch(X, Y, d, syms))
    return PanelDataset(batches, 3)
