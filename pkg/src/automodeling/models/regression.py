"""Gaussian linear regression on standardized covariates."""

import warnings
from dataclasses import dataclass

import numpy as np

from ..core import HALF_LOG_2PI, Dataset, ModelSpec

ACTIVE_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Column centering and scaling learned on training covariates.

    Columns with zero variance are dropped; ``keep`` lists the surviving
    original column indices.
    """

    mean: np.ndarray
    scale: np.ndarray
    keep: np.ndarray
    n_features: int

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d array")
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        keep = np.flatnonzero(scale > 1e-12 * np.maximum(1.0, np.abs(mean)))
        dropped = x.shape[1] - keep.size
        if dropped:
            warnings.warn(f"dropped {dropped} zero-variance column(s)", stacklevel=2)
        return cls(mean[keep], scale[keep], keep, x.shape[1])

    @property
    def dropped(self):
        return np.setdiff1d(np.arange(self.n_features), self.keep)

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise ValueError(f"x has {x.shape[1]} columns, expected {self.n_features}")
        return (x[:, self.keep] - self.mean) / self.scale

    def destandardize(self, theta):
        """Intercept and full-length coefficients on the raw covariate scale."""
        theta = np.asarray(theta, dtype=float)
        beta = theta[1:] / self.scale
        coef = np.zeros(self.n_features)
        coef[self.keep] = beta
        return theta[0] - np.dot(beta, self.mean), coef


def reg_predict(theta, x):
    """``beta_0 + x'beta``; ``x`` may be one row or a matrix of rows."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != theta.size - 1:
        raise ValueError(f"x has {x.shape[-1]} columns, expected {theta.size - 1}")
    return theta[0] + x @ theta[1:]


def reg_loss(theta, x, y):
    r = y - reg_predict(theta, x)
    return 0.5 * r * r + HALF_LOG_2PI


def reg_grad(theta, x, y):
    r = y - reg_predict(theta, x)
    return -r * np.concatenate([[1.0], np.asarray(x, dtype=float)])


def classify(pred):
    """1 where the prediction reaches 0.5, else 0."""
    return (np.asarray(pred) >= 0.5).astype(int)


def active_counts(coef, threshold=ACTIVE_THRESHOLD):
    """Number of coefficients above ``threshold`` in magnitude and number nonzero."""
    a = np.abs(np.asarray(coef, dtype=float))
    return int(np.sum(a > threshold)), int(np.sum(a > 0))


def t_score_screen(train: Dataset, labels, top_k):
    """Columns with the largest two-sample pooled-variance t-statistics.

    Returns ``top_k`` column indices ordered by decreasing ``|t|``, ties
    going to the lower index.
    """
    if train.x is None:
        raise ValueError("screening needs covariates")
    labels = np.asarray(labels)
    if labels.shape != (train.n,):
        raise ValueError("labels must match the number of rows")
    if not set(np.unique(labels)) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    k = train.k
    if int(top_k) != top_k or not 1 <= top_k <= k:
        raise ValueError(f"top_k must be in [1, {k}]")
    x0, x1 = train.x[labels == 0], train.x[labels == 1]
    n0, n1 = len(x0), len(x1)
    if n0 < 2 or n1 < 2:
        raise ValueError("each class needs at least 2 samples")
    pooled = ((n0 - 1) * x0.var(axis=0, ddof=1) + (n1 - 1) * x1.var(axis=0, ddof=1)) / (n0 + n1 - 2)
    gap = np.abs(x0.mean(axis=0) - x1.mean(axis=0))
    se = np.sqrt(pooled * (1.0 / n0 + 1.0 / n1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, gap / se, np.where(gap > 0, np.inf, 0.0))
    order = np.lexsort((np.arange(k), -t))
    return order[:int(top_k)]


class LinearRegressionModel(ModelSpec):
    """Unit-variance Gaussian linear model with an unpenalized intercept.

    ``theta = (beta_0, beta_1, ..., beta_k)`` acts on standardized
    covariates. Build with :meth:`from_training` to learn the
    standardization from raw data.
    """

    def __init__(self, k, standardizer=None):
        self.k = int(k)
        self.p = self.k + 1
        self.standardizer = standardizer

    def __repr__(self):
        return f"LinearRegressionModel(k={self.k})"

    @classmethod
    def from_training(cls, x, y):
        """Return ``(model, standardized training Dataset)``."""
        std = Standardizer.fit(x)
        return cls(std.keep.size, std), Dataset(y, std.transform(x))

    def standardize(self, x):
        return x if self.standardizer is None else self.standardizer.transform(x)

    @property
    def penalized_mask(self):
        mask = np.ones(self.p, bool)
        mask[0] = False
        return mask

    def loss(self, theta, x, y):
        return float(reg_loss(theta, x, y))

    def grad(self, theta, x, y):
        return reg_grad(theta, x, y)

    def _residuals(self, theta, data):
        if data.k != self.k:
            raise ValueError(f"data has {data.k} columns, model expects {self.k}")
        return data.y - theta[0] - data.x @ theta[1:]

    def losses(self, theta, data):
        r = self._residuals(theta, data)
        return 0.5 * r * r + HALF_LOG_2PI

    def mean_loss_grad(self, theta, data, with_grad=True):
        r = self._residuals(theta, data)
        w = data.normalized_weights
        wr = w * r
        loss = 0.5 * np.dot(wr, r) + HALF_LOG_2PI
        if not with_grad:
            return loss, None
        return loss, -np.concatenate([[wr.sum()], data.x.T @ wr])

    def initial_theta(self, data):
        theta = np.zeros(self.p)
        theta[0] = np.dot(data.normalized_weights, data.y)
        return theta

    def predictive_params(self, theta, data):
        r = self._residuals(theta, data)
        return {"sigma2": max(float(np.dot(r, r)) / data.n, 1e-8)}

    def sample_predictive(self, theta, x, rng, sigma2=1.0, **params):
        return float(reg_predict(theta, x)) + np.sqrt(sigma2) * rng.standard_normal()

    def sample_predictive_batch(self, theta, x, count, rng, sigma2=1.0, **params):
        return reg_predict(theta, x) + np.sqrt(sigma2) * rng.standard_normal(len(x))

    def predict(self, theta, x_raw):
        """Predictions for raw (unstandardized) covariate rows."""
        return reg_predict(theta, self.standardize(np.atleast_2d(x_raw)))
