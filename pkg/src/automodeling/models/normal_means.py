"""Discrete-prior model for the many-normal-means problem.

Each observation is ``Y = mu + z`` with ``z ~ N(0, 1)`` and ``mu`` drawn
from a prior on ``m`` ordered support points ``eta_1 <= ... <= eta_m``
with probabilities ``alpha``. The parameter vector has length ``2m``::

    theta[0]        = eta_1
    theta[1:m]      = eta_k - eta_{k-1}    (gaps, >= 0, penalized)
    theta[m:2m]     = alpha                (on the probability simplex)

A gap that reaches exactly zero merges two support points.
"""

import numba as nb
import numpy as np
from scipy.special import logsumexp, softmax

from ..core import HALF_LOG_2PI, Dataset, ModelSpec

_FAST = {"reassoc", "contract", "arcp"}


def to_eta_alpha(theta, m):
    """Split a parameter vector into support points and weights."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2 * m,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({2 * m},)")
    return np.cumsum(theta[:m]), theta[m:].copy()


def from_eta_alpha(eta, alpha):
    """Inverse of :func:`to_eta_alpha`; ``eta`` must be nondecreasing."""
    eta = np.asarray(eta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if eta.ndim != 1 or eta.shape != alpha.shape:
        raise ValueError("eta and alpha must be vectors of equal length")
    if np.any(np.diff(eta) < 0):
        raise ValueError("eta must be nondecreasing")
    return np.concatenate([eta[:1], np.diff(eta), alpha])


@nb.njit(cache=True)
def _simplex_inplace(v):
    u = np.sort(v)[::-1]
    css = 0.0
    tau = 0.0
    for j in range(u.size):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0:
            tau = t
    for j in range(v.size):
        v[j] = max(v[j] - tau, 0.0)


def project_simplex(v):
    """Euclidean projection onto ``{a : a >= 0, sum(a) = 1}``."""
    v = np.array(v, dtype=float)
    _simplex_inplace(v)
    return v


@nb.njit(cache=True)
def _project_inplace(theta, m):
    for k in range(1, m):
        if theta[k] < 0.0:
            theta[k] = 0.0
    _simplex_inplace(theta[m:])


@nb.njit(cache=True)
def _groups(theta, m):
    # atoms separated by exactly-zero gaps share a location
    gid = np.empty(m, np.int64)
    n_groups = 0
    for k in range(m):
        if k > 0 and theta[k] == 0.0:
            gid[k] = n_groups - 1
        else:
            gid[k] = n_groups
            n_groups += 1
    etag = np.empty(n_groups)
    ag = np.zeros(n_groups)
    eta = 0.0
    for k in range(m):
        eta += theta[k]
        etag[gid[k]] = eta
        ag[gid[k]] += theta[m + k]
    lag = np.empty(n_groups)
    for g in range(n_groups):
        lag[g] = np.log(ag[g]) if ag[g] > 0.0 else -np.inf
    return gid, etag, ag, lag


@nb.njit(cache=True, fastmath=_FAST)
def _shifted_log_density(y, etag, lag, V, c):
    # V[i, g] = log phi(y_i - eta_g) - c_i with c_i = max_g (log alpha_g + log phi)
    for i in range(y.shape[0]):
        mx = -np.inf
        for g in range(etag.shape[0]):
            r = y[i] - etag[g]
            v = -0.5 * r * r
            V[i, g] = v
            mx = max(mx, v + lag[g])
        c[i] = mx
        for g in range(etag.shape[0]):
            V[i, g] = min(V[i, g] - mx, 700.0)


@nb.njit(cache=True, fastmath=_FAST)
def _accumulate(y, w, etag, ag, E, c, rsum, rrsum, with_grad):
    n_groups = etag.shape[0]
    loss = 0.0
    for g in range(n_groups):
        rsum[g] = 0.0
        rrsum[g] = 0.0
    for i in range(y.shape[0]):
        if w[i] == 0.0:
            continue
        s = 0.0
        for g in range(n_groups):
            s += ag[g] * E[i, g]
        loss -= w[i] * (c[i] + np.log(s))
        if with_grad:
            f = w[i] / s
            for g in range(n_groups):
                t = E[i, g] * f
                rsum[g] += t
                rrsum[g] += t * (y[i] - etag[g])
    return loss


@nb.njit(cache=True)
def _scatter_grad(theta, m, gid, rsum, rrsum, out):
    acc = 0.0
    for k in range(m - 1, -1, -1):
        acc -= theta[m + k] * rrsum[gid[k]]
        out[k] = acc
        out[m + k] = -rsum[gid[k]]


def _mean_loss_grad(theta, y, w, m, with_grad=True):
    theta = np.ascontiguousarray(theta, dtype=float)
    gid, etag, ag, lag = _groups(theta, m)
    if not ag.max() > 0:
        raise ValueError("mixture weights are all zero")
    V = np.empty((y.size, etag.size))
    c = np.empty(y.size)
    _shifted_log_density(y, etag, lag, V, c)
    # exp outside the compiled loops: numpy's vectorized exp is much faster
    np.exp(V, out=V)
    rsum = np.empty(etag.size)
    rrsum = np.empty(etag.size)
    loss = _accumulate(y, w, etag, ag, V, c, rsum, rrsum, with_grad) + HALF_LOG_2PI
    if not with_grad:
        return loss, None
    g = np.empty(2 * m)
    _scatter_grad(theta, m, gid, rsum, rrsum, g)
    return loss, g


def _infer_m(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size % 2:
        raise ValueError("theta must have even length 2m")
    return theta.size // 2


def mnm_loss(theta, y):
    """Negative log mixture density of one observation, in nats."""
    m = _infer_m(theta)
    return float(_mean_loss_grad(theta, np.array([float(y)]), np.ones(1), m, False)[0])


def mnm_grad(theta, y):
    """Gradient of :func:`mnm_loss` with respect to all ``2m`` coordinates."""
    m = _infer_m(theta)
    return _mean_loss_grad(theta, np.array([float(y)]), np.ones(1), m)[1]


def mnm_posterior_mean(theta, y):
    """Posterior mean of ``mu`` given ``y``; vectorized over ``y``."""
    m = _infer_m(theta)
    eta, alpha = to_eta_alpha(theta, m)
    if not np.any(alpha > 0):
        raise ValueError("mixture weights are all zero")
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        log_a = np.log(alpha)
    logits = log_a - 0.5 * (y[..., None] - eta) ** 2
    post = softmax(logits, axis=-1) @ eta
    return float(post) if post.ndim == 0 else post


def mnm_log_density(eta, alpha, y):
    """Log mixture density from unordered ``(eta, alpha)`` pairs."""
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        log_a = np.log(np.asarray(alpha, dtype=float))
    y = np.asarray(y, dtype=float)
    return logsumexp(log_a - 0.5 * (y[..., None] - eta) ** 2, axis=-1) - HALF_LOG_2PI


def mnm_initial_theta(data: Dataset, m):
    """Support points at evenly spaced order statistics, equal weights.

    ``eta_k`` is the sorted response at position ``ceil((k - 1/2) n / m) - 1``,
    so ``m = n`` gives the sorted sample and ``m = 1`` the median.
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    ys = np.sort(data.y)
    idx = np.ceil((np.arange(1, m + 1) - 0.5) * ys.size / m).astype(int) - 1
    eta = ys[np.clip(idx, 0, ys.size - 1)]
    return from_eta_alpha(eta, np.full(m, 1.0 / m))


def mnm_sample_predictive(theta, rng, size=None):
    """Draw ``Y = eta_k + z`` with ``k ~ Categorical(alpha)``."""
    m = _infer_m(theta)
    eta, alpha = to_eta_alpha(theta, m)
    k = rng.choice(m, size=size, p=alpha / alpha.sum())
    return eta[k] + rng.standard_normal(size)


class ManyNormalMeansModel(ModelSpec):
    """Discrete-prior Gaussian location mixture with ``m`` support points.

    Parameters
    ----------
    m : int
        Number of support points; the usual choice is the sample size.
    """

    def __init__(self, m):
        if int(m) != m or m < 1:
            raise ValueError("m must be a positive integer")
        self.m = int(m)
        self.p = 2 * self.m
        lb = np.zeros(self.p)
        lb[0] = -np.inf
        self._lower = lb
        mask = np.zeros(self.p, bool)
        mask[1:self.m] = True
        self._mask = mask

    def __repr__(self):
        return f"ManyNormalMeansModel(m={self.m})"

    @property
    def lower_bounds(self):
        return self._lower

    @property
    def penalized_mask(self):
        return self._mask.copy()

    def project(self, theta):
        out = np.array(theta, dtype=float)
        _project_inplace(out, self.m)
        return out

    def loss(self, theta, x, y):
        return mnm_loss(theta, y)

    def grad(self, theta, x, y):
        return mnm_grad(theta, y)

    def losses(self, theta, data):
        eta, alpha = to_eta_alpha(theta, self.m)
        return -mnm_log_density(eta, alpha, data.y)

    def mean_loss_grad(self, theta, data, with_grad=True):
        return _mean_loss_grad(theta, data.y, data.normalized_weights, self.m, with_grad)

    def initial_theta(self, data):
        return mnm_initial_theta(data, self.m)

    def sample_predictive(self, theta, x, rng, **params):
        return float(mnm_sample_predictive(theta, rng))

    def sample_predictive_batch(self, theta, x, count, rng, **params):
        return mnm_sample_predictive(theta, rng, size=count)

    def posterior_mean(self, theta, y):
        return mnm_posterior_mean(theta, y)
