"""Walk-forward evaluation of return predictors on a cross-sectional panel.

Each date: predict with the model fitted on strictly earlier dates, score
the prediction against the realized targets, then reveal the date to the
model. The daily strategy return is the cross-sectional correlation of
predictions and targets scaled by the targets' cross-sectional std.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
import scipy.stats

from .baselines import RollingConfig, rolling_fit, sequential_arow_day
from .data import PanelDataset
from .errors import InvalidArgumentError
from .model import Batch, BeliefState, Hyperparams, barow_update, init_belief, reset_covariance

logger = logging.getLogger(__name__)

__all__ = [
    "BarowModel",
    "SequentialArowModel",
    "RollingModel",
    "BacktestConfig",
    "Metrics",
    "BacktestReport",
    "estimate_daily_return",
    "compute_metrics",
    "run_backtest",
    "tune_grid",
    "tune_r",
    "select_r",
]


@dataclass(frozen=True)
class BarowModel:
    hp: Hyperparams = field(default_factory=Hyperparams)
    # scheduled covariance reset every N updates; None disables it
    reset_every: int | None = None
    label: str = "BAROW"

    def __post_init__(self):
        if self.reset_every is not None and self.reset_every < 1:
            raise InvalidArgumentError("reset_every must be >= 1")

    @property
    def r(self) -> float:
        return self.hp.r

    def with_r(self, r: float) -> "BarowModel":
        return replace(self, hp=replace(self.hp, r=r))


@dataclass(frozen=True)
class SequentialArowModel:
    r: float = 1.0
    sigma0_scale: float = 1.0
    # False feeds rows in the order given; True draws a fresh shuffle per date
    shuffle: bool = False
    label: str = "AROW"

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidArgumentError("r must be positive")
        if not self.sigma0_scale > 0:
            raise InvalidArgumentError("sigma0_scale must be positive")

    def with_r(self, r: float) -> "SequentialArowModel":
        return replace(self, r=r)


@dataclass(frozen=True)
class RollingModel:
    cfg: RollingConfig = field(default_factory=RollingConfig)
    label: str = "Linear"


ModelSpec = Union[BarowModel, SequentialArowModel, RollingModel]


@dataclass(frozen=True)
class BacktestConfig:
    model: ModelSpec = field(default_factory=BarowModel)
    burn_in_days: int = 252
    annualization: float = 252.0
    seed: int = 0
    rank_ic: bool = False

    def __post_init__(self):
        if self.burn_in_days < 0:
            raise InvalidArgumentError("burn_in_days must be >= 0")
        if not self.annualization > 0:
            raise InvalidArgumentError("annualization must be positive")


@dataclass(frozen=True)
class Metrics:
    total_return: float
    sharpe: float | None
    max_dd: float
    calmar: float | None


@dataclass
class BacktestReport:
    model_label: str
    dates: list
    daily_ic: np.ndarray
    daily_return: np.ndarray
    equity: np.ndarray
    metrics: Metrics
    predictions: list[np.ndarray] = field(default_factory=list, repr=False)


def _flat(v: np.ndarray) -> bool:
    return np.ptp(v) <= 1e-14 * max(1.0, float(np.max(np.abs(v))))


def estimate_daily_return(preds, realized, rank: bool = False) -> tuple[float, float]:
    """(ic, ic * std(realized)); both 0 when either side has no dispersion."""
    preds = np.asarray(preds, dtype=float).reshape(-1)
    realized = np.asarray(realized, dtype=float).reshape(-1)
    if preds.size != realized.size:
        raise InvalidArgumentError("preds and realized differ in length")
    if preds.size < 2:
        raise InvalidArgumentError("need at least 2 instruments")
    if _flat(preds) or _flat(realized):
        return 0.0, 0.0
    if rank:
        ic = float(scipy.stats.spearmanr(preds, realized)[0])
    else:
        ic = float(np.corrcoef(preds, realized)[0, 1])
    ic = min(1.0, max(-1.0, ic))
    return ic, ic * float(realized.std())


def compute_metrics(daily_return, annualization: float = 252.0) -> Metrics:
    r = np.asarray(daily_return, dtype=float)
    if r.size == 0:
        raise InvalidArgumentError("no returns to summarize")
    equity = np.cumsum(r)
    peak = np.maximum.accumulate(np.concatenate([[0.0], equity]))[1:]
    max_dd = float(min(0.0, np.min(equity - peak)))
    total = float(equity[-1])
    sharpe = None
    if np.ptp(r) > 0:
        sharpe = float(r.mean() / r.std() * math.sqrt(annualization))
    calmar = total / abs(max_dd) if max_dd < 0 else None
    return Metrics(total, sharpe, max_dd, calmar)


class _Barow:
    def __init__(self, spec: BarowModel, dim: int):
        self.spec = spec
        self.state = init_belief(dim, spec.hp.sigma0_scale)
        self.n_updates = 0

    def predict(self, X):
        return X @ self.state.mu

    def update(self, batch: Batch, t: int):
        if batch.size == 0:
            return
        self.state = barow_update(self.state, batch, self.spec.hp)
        self.n_updates += 1
        if self.spec.reset_every and self.n_updates % self.spec.reset_every == 0:
            self.state = reset_covariance(self.state, self.spec.hp.sigma0_scale)


class _SequentialArow:
    def __init__(self, spec: SequentialArowModel, dim: int, seed: int):
        self.spec = spec
        self.state = init_belief(dim, spec.sigma0_scale)
        self.seed = seed

    def predict(self, X):
        return X @ self.state.mu

    def update(self, batch: Batch, t: int):
        seed = None
        if self.spec.shuffle:
            seed = int(np.random.SeedSequence([self.seed, t]).generate_state(1)[0])
        self.state = sequential_arow_day(self.state, batch, self.spec.r, seed)


class _Rolling:
    def __init__(self, spec: RollingModel, dim: int, burn_in: int):
        self.spec = spec
        self.history: list[Batch] = []
        self.w = np.zeros(dim)
        self.burn_in = burn_in
        self.fitted = False

    def predict(self, X):
        return X @ self.w

    def update(self, batch: Batch, t: int):
        self.history.append(batch)
        cfg = self.spec.cfg
        del self.history[:-cfg.window_days]
        # the first prediction after burn-in is made at t = burn_in
        next_t = t + 1
        due = next_t >= self.burn_in and (next_t - self.burn_in) % cfg.refit_every == 0
        if due or not self.fitted:
            if any(b.size for b in self.history):
                self.w = rolling_fit(self.history, cfg)
                self.fitted = True


def _make_model(cfg: BacktestConfig, dim: int):
    spec = cfg.model
    if isinstance(spec, BarowModel):
        return _Barow(spec, dim)
    if isinstance(spec, SequentialArowModel):
        return _SequentialArow(spec, dim, cfg.seed)
    if isinstance(spec, RollingModel):
        return _Rolling(spec, dim, cfg.burn_in_days)
    raise InvalidArgumentError(f"unknown model spec {spec!r}")


def run_backtest(panel: PanelDataset, cfg: BacktestConfig) -> BacktestReport:
    if cfg.burn_in_days >= len(panel):
        raise InvalidArgumentError(
            f"burn-in of {cfg.burn_in_days} days leaves nothing to evaluate "
            f"in a {len(panel)}-day panel"
        )
    model = _make_model(cfg, panel.dim)
    dates, ics, rets, preds = [], [], [], []
    for t, batch in enumerate(panel.batches):
        if t >= cfg.burn_in_days:
            if batch.size >= 2:
                p = model.predict(batch.X)
                ic, ret = estimate_daily_return(p, batch.Y, rank=cfg.rank_ic)
            else:
                p, ic, ret = model.predict(batch.X), 0.0, 0.0
            dates.append(batch.date)
            ics.append(ic)
            rets.append(ret)
            preds.append(p)
        model.update(batch, t)
    rets = np.array(rets)
    return BacktestReport(
        model_label=cfg.model.label,
        dates=dates,
        daily_ic=np.array(ics),
        daily_return=rets,
        equity=np.cumsum(rets),
        metrics=compute_metrics(rets, cfg.annualization),
        predictions=preds,
    )


def tune_grid(
    panel: PanelDataset,
    grid: Sequence[float],
    tune_window: tuple | None,
    cfg: BacktestConfig,
) -> list[tuple[float, Metrics]]:
    """Backtest every distinct ``r`` in ``grid`` on ``tune_window``; sorted by r."""
    if not grid:
        raise InvalidArgumentError("grid is empty")
    if isinstance(cfg.model, RollingModel):
        raise InvalidArgumentError("the rolling model has no r to tune")
    values = sorted({float(r) for r in grid})
    if values[0] <= 0:
        raise InvalidArgumentError("grid values must be positive")
    sub = panel if tune_window is None else panel.between(*tune_window)
    table = []
    for r in values:
        report = run_backtest(sub, replace(cfg, model=cfg.model.with_r(r)))
        table.append((r, report.metrics))
    return table


def tune_r(
    panel: PanelDataset,
    grid: Sequence[float],
    tune_window: tuple | None,
    cfg: BacktestConfig,
) -> float:
    """Grid value with the highest total return; ties go to the smallest r."""
    return select_r(tune_grid(panel, grid, tune_window, cfg))


def select_r(table: Sequence[tuple[float, Metrics]]) -> float:
    best_r, best = table[0][0], table[0][1].total_return
    for r, m in table[1:]:
        if m.total_return > best:
            best_r, best = r, m.total_return
    return best_r
