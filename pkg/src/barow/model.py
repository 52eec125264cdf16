"""Gaussian belief over regression weights and the batched AROW update.

The belief is N(mu, sigma). One update consumes a whole cross-section
(X, Y) at once and returns the minimizer of

    KL(N(mu, sigma) || N(mu_prev, sigma_prev))
        + (1 / 2R) * (||Y - X mu||^2 + tr(X sigma X^T))

whose closed form is a rank-K correction of the previous covariance.
Two algebraically equivalent routes are provided: the dispersion form
(K x K solve) and the information form (d x d solve, via precisions).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date as _date
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, InvalidDataError, NumericalError

__all__ = [
    "BeliefState",
    "Batch",
    "RScaling",
    "Hyperparams",
    "init_belief",
    "predict",
    "barow_update",
    "barow_update_dispersion_form",
    "barow_update_information_form",
    "arow_update",
    "cost",
    "kl_gaussian",
    "reset_covariance",
]

# smallest eigenvalue / largest eigenvalue below which sigma is not inverted
_SINGULAR_RATIO = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BeliefState:
    """Mean ``mu`` (d,) and covariance ``sigma`` (d, d) of the weight belief.

    Arrays are copied and made read-only so a state can be shared freely.
    """

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise InvalidArgumentError("mu must be a non-empty vector")
        if sigma.shape != (mu.size, mu.size):
            raise InvalidArgumentError(
                f"sigma shape {sigma.shape} does not match dim {mu.size}"
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise InvalidDataError("belief state contains non-finite values")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def dim(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class Batch:
    """One date's synchronous cross-section: K rows of features and targets."""

    X: np.ndarray
    Y: np.ndarray
    date: _date | int | None = None
    symbols: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, 0)
        if X.ndim != 2:
            raise InvalidArgumentError("X must be a 2-D matrix")
        if X.shape[0] != Y.size:
            raise InvalidArgumentError(
                f"X has {X.shape[0]} rows but Y has {Y.size} entries"
            )
        symbols = tuple(str(s) for s in self.symbols)
        if symbols and len(symbols) != Y.size:
            raise InvalidArgumentError(
                f"{len(symbols)} symbols for {Y.size} rows"
            )
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return self.Y.size

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise InvalidDataError(f"batch {self.date!r} contains non-finite values")

    def permuted(self, order: Sequence[int]) -> "Batch":
        order = np.asarray(order, dtype=int)
        symbols = tuple(self.symbols[i] for i in order) if self.symbols else ()
        return Batch(self.X[order], self.Y[order], self.date, symbols)


class RScaling(str, enum.Enum):
    PER_BATCH = "per_batch"
    FIXED = "fixed"


@dataclass(frozen=True)
class Hyperparams:
    """Update hyperparameters.

    ``r`` is the per-sample regularization. The batch regularizer is
    ``R = r * K`` where K is the current batch size (``PER_BATCH``) or
    ``k_ref`` (``FIXED``).
    """

    r: float = 1.0
    sigma0_scale: float = 1.0
    r_scaling: RScaling = RScaling.PER_BATCH
    k_ref: int = 1

    def __post_init__(self):
        object.__setattr__(self, "r_scaling", RScaling(self.r_scaling))
        if not self.r > 0:
            raise InvalidArgumentError(f"r must be positive, got {self.r}")
        if not self.sigma0_scale > 0:
            raise InvalidArgumentError(
                f"sigma0_scale must be positive, got {self.sigma0_scale}"
            )
        if self.k_ref < 1:
            raise InvalidArgumentError(f"k_ref must be >= 1, got {self.k_ref}")

    def batch_R(self, k: int) -> float:
        if self.r_scaling is RScaling.FIXED:
            return self.r * self.k_ref
        return self.r * k


def init_belief(d: int, a: float = 1.0) -> BeliefState:
    """Zero mean, covariance ``a * I``."""
    if int(d) != d or d < 1:
        raise InvalidArgumentError(f"dimension must be a positive integer, got {d}")
    if not a > 0:
        raise InvalidArgumentError(f"covariance scale must be positive, got {a}")
    d = int(d)
    return BeliefState(np.zeros(d), a * np.eye(d))


def predict(state: BeliefState, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != state.dim:
        raise InvalidArgumentError(
            f"X of shape {X.shape} incompatible with dim {state.dim}"
        )
    return X @ state.mu


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _check_update_inputs(state: BeliefState, batch: Batch) -> None:
    if batch.size and batch.X.shape[1] != state.dim:
        raise InvalidArgumentError(
            f"batch has {batch.X.shape[1]} features, state has dim {state.dim}"
        )
    batch.check_finite()


def barow_update_dispersion_form(state: BeliefState, batch: Batch, R: float) -> BeliefState:
    """Covariance-space update; factors the K x K matrix ``R I + X S X^T``."""
    _check_update_inputs(state, batch)
    if not R > 0:
        raise InvalidArgumentError(f"R must be positive, got {R}")
    if batch.size == 0:
        return state
    X, S = batch.X, state.sigma
    SXt = S @ X.T
    resid = X @ state.mu - batch.Y
    # gain^T = (R I + X S X^T)^-1 X S
    if batch.size == 1:
        gain_t = SXt.T / (R + float(X[0] @ SXt[:, 0]))
    else:
        gram = R * np.eye(batch.size) + X @ SXt
        try:
            factor = scipy.linalg.cho_factor(_symmetrize(gram), lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Cholesky of innovation matrix failed: {exc}") from exc
        gain_t = scipy.linalg.cho_solve(factor, SXt.T)
    sigma = _symmetrize(S - SXt @ gain_t)
    mu = state.mu - gain_t.T @ resid
    return BeliefState(mu, sigma)


def barow_update_information_form(state: BeliefState, batch: Batch, R: float) -> BeliefState:
    """Precision-space update; factors the d x d matrix ``S^-1 + X^T X / R``.

    Raises NumericalError if the prior covariance is too close to singular
    to be inverted, in which case the dispersion form should be used.
    """
    _check_update_inputs(state, batch)
    if not R > 0:
        raise InvalidArgumentError(f"R must be positive, got {R}")
    if batch.size == 0:
        return state
    S = state.sigma
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= _SINGULAR_RATIO * eig[-1]:
        raise NumericalError(
            f"covariance is near-singular (eigenvalue ratio {eig[0] / eig[-1]:.3g})"
        )
    d = state.dim
    try:
        prior = scipy.linalg.cho_factor(S, lower=True)
        precision_prev = _symmetrize(scipy.linalg.cho_solve(prior, np.eye(d)))
        X = batch.X
        precision = precision_prev + (X.T @ X) / R
        post = scipy.linalg.cho_factor(_symmetrize(precision), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of precision failed: {exc}") from exc
    sigma = _symmetrize(scipy.linalg.cho_solve(post, np.eye(d)))
    mu = scipy.linalg.cho_solve(post, precision_prev @ state.mu + (X.T @ batch.Y) / R)
    return BeliefState(mu, sigma)


def _well_conditioned(sigma: np.ndarray) -> bool:
    eig = np.linalg.eigvalsh(sigma)
    return eig[0] > _SINGULAR_RATIO * eig[-1]


def barow_update(
    state: BeliefState,
    batch: Batch,
    hp: Hyperparams,
    method: str = "auto",
) -> BeliefState:
    """Batched AROW update of ``state`` on one cross-section.

    ``method`` is ``"dispersion"``, ``"information"`` or ``"auto"``; the
    latter solves the smaller system (K x K when K <= d, else d x d) and
    falls back to the dispersion form when sigma is near-singular.
    An empty batch returns ``state`` unchanged.
    """
    _check_update_inputs(state, batch)
    if batch.size == 0:
        return state
    R = hp.batch_R(batch.size)
    if method == "auto":
        if batch.size > state.dim and _well_conditioned(state.sigma):
            method = "information"
        else:
            method = "dispersion"
    if method == "dispersion":
        return barow_update_dispersion_form(state, batch, R)
    if method == "information":
        return barow_update_information_form(state, batch, R)
    raise InvalidArgumentError(f"unknown update method {method!r}")


def arow_update(state: BeliefState, x, y: float, r: float) -> BeliefState:
    """Single-instance AROW update; the K = 1 case of :func:`barow_update`."""
    if not r > 0:
        raise InvalidArgumentError(f"r must be positive, got {r}")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    batch = Batch(x, np.array([y], dtype=float))
    return barow_update(state, batch, Hyperparams(r=r))


def _spd_factor(sigma: np.ndarray, name: str):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix")
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-14):
        raise InvalidArgumentError(f"{name} is not symmetric")
    try:
        return scipy.linalg.cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError(f"{name} is not positive definite") from exc


def _logdet(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def kl_gaussian(mu1, sigma1, mu2, sigma2) -> float:
    """KL(N(mu1, sigma1) || N(mu2, sigma2))."""
    mu1 = np.asarray(mu1, dtype=float).reshape(-1)
    mu2 = np.asarray(mu2, dtype=float).reshape(-1)
    f1 = _spd_factor(sigma1, "sigma1")
    f2 = _spd_factor(sigma2, "sigma2")
    d = mu1.size
    if mu2.size != d or f1[0].shape[0] != d or f2[0].shape[0] != d:
        raise InvalidArgumentError("dimension mismatch between the two Gaussians")
    diff = mu2 - mu1
    trace = float(np.trace(scipy.linalg.cho_solve(f2, np.asarray(sigma1, dtype=float))))
    maha = float(diff @ scipy.linalg.cho_solve(f2, diff))
    return 0.5 * (_logdet(f2) - _logdet(f1) + trace + maha - d)


def cost(
    prev: BeliefState,
    mu,
    sigma,
    batch: Batch,
    R: float,
    lam1: float | None = None,
    lam2: float | None = None,
) -> float:
    """Objective minimized by :func:`barow_update`, evaluated at (mu, sigma).

    With ``lam1``/``lam2`` unset both loss weights are ``1 / (2R)`` on the
    summed squared error and summed variance term. Setting them evaluates
    the general form ``(lam1 / K) * sum(loss) + (lam2 / K) * sum(x^T S x)``.
    """
    if not R > 0:
        raise InvalidArgumentError(f"R must be positive, got {R}")
    mu = np.asarray(mu, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float)
    value = kl_gaussian(mu, sigma, prev.mu, prev.sigma)
    if batch.size == 0:
        return value
    X = batch.X
    sq_err = float(np.sum((batch.Y - X @ mu) ** 2))
    spread = float(np.trace(X @ sigma @ X.T))
    k = batch.size
    w1 = 1.0 / (2.0 * R) if lam1 is None else lam1 / k
    w2 = 1.0 / (2.0 * R) if lam2 is None else lam2 / k
    return value + w1 * sq_err + w2 * spread


def reset_covariance(state: BeliefState, a: float = 1.0) -> BeliefState:
    """Replace the covariance by ``a * I`` keeping the mean."""
    if not a > 0:
        raise InvalidArgumentError(f"covariance scale must be positive, got {a}")
    return BeliefState(state.mu, a * np.eye(state.dim))
