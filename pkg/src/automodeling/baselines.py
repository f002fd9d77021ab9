"""Classical comparison estimators: MLE, James-Stein, ridge and lasso with CV.

The penalized regressions minimize
``(1/2n) * sum (y - b0 - x'b)^2 + penalty(b)`` with the intercept left
unpenalized, and return ``(b0, b_1, ..., b_k)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .core import Dataset


class DegenerateSpreadWarning(UserWarning):
    """All observations equal; James-Stein shrinks fully to the mean."""


class ConvergenceError(RuntimeError):
    pass


def mle_means(y):
    y = np.array(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a nonempty vector")
    return y


def james_stein(y):
    """Shrink each observation toward the grand mean by ``1 - (n-3)/SS``.

    The plain (not positive-part) form, so the factor may be negative.
    With zero spread every estimate is the mean and a
    :class:`DegenerateSpreadWarning` is issued.
    """
    y = mle_means(y)
    n = y.size
    if n < 4:
        raise ValueError("James-Stein needs at least 4 observations")
    ybar = y.mean()
    dev = y - ybar
    ss = np.dot(dev, dev)
    if ss == 0:
        warnings.warn("zero spread, returning the grand mean", DegenerateSpreadWarning, stacklevel=2)
        return np.full(n, ybar)
    return ybar + (1.0 - (n - 3) / ss) * dev


def js_expected_mpe(A, n):
    """Expected mean prediction error of James-Stein when ``mu ~ N(0, A)``."""
    if A < 0:
        raise ValueError("A must be nonnegative")
    if n < 1:
        raise ValueError("n must be at least 1")
    if np.isinf(A):
        return 1.0
    shrink = A / (A + 1.0)
    return shrink + 3.0 / n * (1.0 - shrink)


def _centered(train: Dataset):
    if train.x is None:
        raise ValueError("regression needs covariates")
    xm = train.x.mean(axis=0)
    ym = train.y.mean()
    return train.x - xm, train.y - ym, xm, ym


def ridge_fit(train: Dataset, lam):
    """Ridge solution via the primal or dual normal equations, whichever is smaller."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, y, xm, ym = _centered(train)
    n, k = X.shape
    if lam == 0:
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
    elif k <= n:
        beta = np.linalg.solve(X.T @ X + 2 * n * lam * np.eye(k), X.T @ y)
    else:
        beta = X.T @ np.linalg.solve(X @ X.T + 2 * n * lam * np.eye(n), y)
    return np.concatenate([[ym - xm @ beta], beta])


@nb.njit(cache=True)
def _sweep(X, r, lam, beta, colsq, cols):
    n = X.shape[0]
    biggest = 0.0
    for j in cols:
        if colsq[j] == 0.0:
            continue
        old = beta[j]
        rho = X[:, j] @ r / n + colsq[j] * old
        new = np.sign(rho) * max(abs(rho) - lam, 0.0) / colsq[j]
        if new != old:
            r -= X[:, j] * (new - old)
            beta[j] = new
            change = abs(new - old) * np.sqrt(colsq[j])
            if change > biggest:
                biggest = change
    return biggest


@nb.njit(cache=True)
def _cd_sweeps(X, y, lam, beta, colsq, tol, max_sweeps):
    """Full sweeps alternating with sweeps over the nonzero coordinates only.

    Returns the number of sweeps used, or -1 if ``max_sweeps`` ran out.
    """
    k = X.shape[1]
    everything = np.arange(k)
    r = y - X @ beta
    sweeps = 0
    while sweeps < max_sweeps:
        biggest = _sweep(X, r, lam, beta, colsq, everything)
        sweeps += 1
        if biggest < tol:
            return sweeps
        active = np.flatnonzero(beta)
        while sweeps < max_sweeps:
            sweeps += 1
            if _sweep(X, r, lam, beta, colsq, active) < tol:
                break
    return -1


_KKT_CHUNK = 500


def lasso_max_lambda(train: Dataset):
    """Smallest penalty at which every lasso coefficient is zero."""
    X, y, _, _ = _centered(train)
    return float(np.max(np.abs(X.T @ y)) / X.shape[0])


def _kkt_ok(X, y, beta, lam, atol=1e-6):
    g = X.T @ (y - X @ beta) / X.shape[0]
    active = beta != 0
    return (np.all(np.abs(g[~active]) <= lam + atol)
            and np.all(np.abs(g[active] - lam * np.sign(beta[active])) <= atol))


def lasso_fit(train: Dataset, lam, beta0=None, max_sweeps=100_000):
    """Coordinate-descent lasso, checked against its optimality conditions.

    Raises
    ------
    ConvergenceError
        If ``max_sweeps`` sweeps pass without meeting the KKT conditions
        to within ``1e-6``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, y, xm, ym = _centered(train)
    X = np.asfortranarray(X)
    colsq = np.einsum("ij,ij->j", X, X) / X.shape[0]
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0[1:], dtype=float)
    # Near-singular active sets make coordinate movement decay slowly long
    # after the optimality conditions hold, so those are checked between chunks.
    used, tol = 0, 1e-9
    while used < max_sweeps:
        chunk = min(_KKT_CHUNK, max_sweeps - used)
        done = _cd_sweeps(X, y, float(lam), beta, colsq, tol, chunk)
        used += chunk if done < 0 else done
        if _kkt_ok(X, y, beta, lam):
            return np.concatenate([[ym - xm @ beta], beta])
        if done >= 0:
            tol *= 0.01
    raise ConvergenceError(f"lasso did not converge in {max_sweeps} sweeps at lambda={lam}")


@dataclass(frozen=True)
class CvConfig:
    """K-fold cross-validation settings.

    ``lambda_grid`` defaults to ``n_lambda`` log-spaced values from the
    largest useful penalty down to ``ratio`` times it.
    """

    folds: int = 10
    lambda_grid: Optional[tuple] = None
    seed: int = 0
    n_lambda: int = 50
    ratio: float = 1e-3

    def __post_init__(self):
        if int(self.folds) != self.folds or self.folds < 2:
            raise ValueError("folds must be an integer of at least 2")
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=float)
            if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
                raise ValueError("lambda_grid must be positive and strictly descending")
            object.__setattr__(self, "lambda_grid", tuple(grid))


# Ridge never zeroes coefficients, so its grid starts well above the lasso's
# zeroing point and ends at the same small penalty.
RIDGE_GRID_FACTOR = 500.0


def default_grid(train: Dataset, fitter, cfg: CvConfig):
    if cfg.lambda_grid is not None:
        return np.array(cfg.lambda_grid)
    top = max(lasso_max_lambda(train), 1e-12)
    start = top * RIDGE_GRID_FACTOR if fitter == "ridge" else top
    return np.geomspace(start, top * cfg.ratio, cfg.n_lambda)


def fold_ids(n, folds, seed):
    """Seeded shuffle, then folds assigned round-robin."""
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, int)
    ids[perm] = np.arange(n) % folds
    return ids


def _fit(fitter, data, lam, warm):
    if fitter == "ridge":
        return ridge_fit(data, lam)
    if fitter == "lasso":
        return lasso_fit(data, lam, warm)
    raise ValueError(f"unknown fitter {fitter!r}")


def cv_select(train: Dataset, fitter, cfg: CvConfig = None):
    """Choose the penalty by pooled held-out squared error.

    Returns
    -------
    best : float
        The minimizing penalty; ties go to the larger value.
    curve : ndarray of shape (len(grid), 2)
        Penalty and mean held-out squared error.
    coef : ndarray
        Refit on all of ``train`` at ``best``.
    """
    cfg = cfg or CvConfig()
    if train.n < cfg.folds:
        raise ValueError("need at least as many observations as folds")
    grid = default_grid(train, fitter, cfg)
    ids = fold_ids(train.n, cfg.folds, cfg.seed)
    sse = np.zeros(grid.size)
    for f in range(cfg.folds):
        tr, te = np.flatnonzero(ids != f), np.flatnonzero(ids == f)
        fold_train, held = train.take(tr), train.take(te)
        warm = None
        for i, lam in enumerate(grid):
            warm = _fit(fitter, fold_train, lam, warm)
            r = held.y - warm[0] - held.x @ warm[1:]
            sse[i] += np.dot(r, r)
    err = sse / train.n
    best = int(np.flatnonzero(err <= err.min())[0])
    warm = None
    for lam in grid[:best + 1]:
        warm = _fit(fitter, train, lam, warm)
    return float(grid[best]), np.column_stack([grid, err]), warm
