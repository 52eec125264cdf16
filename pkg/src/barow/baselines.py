"""Comparison models: rolling-window regression and per-sample AROW.

Also hosts :func:`ridge_closed_form`, a direct ridge solver kept free of
any dependency on :mod:`barow.model` so it can serve as an oracle for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, RankDeficiencyError
from .model import Batch, BeliefState, arow_update

__all__ = [
    "RollingConfig",
    "rolling_fit",
    "sequential_arow_day",
    "ridge_closed_form",
]


@dataclass(frozen=True)
class RollingConfig:
    window_days: int = 252
    refit_every: int = 1
    ridge_eps: float = 1e-8

    def __post_init__(self):
        if self.window_days < 1:
            raise InvalidArgumentError("window_days must be >= 1")
        if self.refit_every < 1:
            raise InvalidArgumentError("refit_every must be >= 1")
        if not self.ridge_eps >= 0:
            raise InvalidArgumentError("ridge_eps must be >= 0")


def _stack(history: Sequence[Batch]) -> tuple[np.ndarray, np.ndarray]:
    rows = [b for b in history if b.size]
    if not rows:
        raise InvalidArgumentError("rolling window contains no rows")
    return np.vstack([b.X for b in rows]), np.concatenate([b.Y for b in rows])


def rolling_fit(history: Sequence[Batch], cfg: RollingConfig) -> np.ndarray:
    """Least squares (plus ``ridge_eps`` penalty) over the last ``window_days`` batches."""
    if not history:
        raise InvalidArgumentError("history is empty")
    X, Y = _stack(list(history)[-cfg.window_days:])
    d = X.shape[1]
    if cfg.ridge_eps > 0:
        # augmented least squares avoids squaring the condition number
        X = np.vstack([X, np.sqrt(cfg.ridge_eps) * np.eye(d)])
        Y = np.concatenate([Y, np.zeros(d)])
    w, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    if rank < d:
        raise RankDeficiencyError(
            f"design of rank {rank} < {d}; set ridge_eps > 0"
        )
    return w


def sequential_arow_day(
    state: BeliefState,
    batch: Batch,
    r: float,
    seed: int | None = None,
) -> BeliefState:
    """Feed the rows of ``batch`` one at a time through :func:`arow_update`.

    Rows go in the given order when ``seed`` is None, otherwise in a
    permutation drawn from ``numpy.random.default_rng(seed)``.
    """
    batch.check_finite()
    order = np.arange(batch.size)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(batch.size)
    for i in order:
        state = arow_update(state, batch.X[i], batch.Y[i], r)
    return state


def ridge_closed_form(X, Y, lam: float) -> np.ndarray:
    """``(X^T X + lam I)^-1 X^T Y`` by Cholesky of the normal matrix."""
    if not lam > 0:
        raise InvalidArgumentError(f"lam must be positive, got {lam}")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != Y.size:
        raise InvalidArgumentError("X and Y shapes disagree")
    normal = X.T @ X + lam * np.eye(X.shape[1])
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), X.T @ Y)
