"""Unit-variance Gaussian location model with exact reference results."""

import numpy as np
from scipy.stats import norm

from ..core import HALF_LOG_2PI, Dataset, ModelSpec


class SimpleMeanModel(ModelSpec):
    """``y = theta + z`` with ``z ~ N(0, 1)``; one parameter."""

    p = 1

    def loss(self, theta, x, y):
        r = float(theta[0]) - y
        return 0.5 * r * r + HALF_LOG_2PI

    def grad(self, theta, x, y):
        return np.array([float(theta[0]) - y])

    def losses(self, theta, data):
        r = theta[0] - data.y
        return 0.5 * r * r + HALF_LOG_2PI

    def mean_loss_grad(self, theta, data, with_grad=True):
        w = data.normalized_weights
        r = theta[0] - data.y
        loss = 0.5 * np.dot(w, r * r) + HALF_LOG_2PI
        if not with_grad:
            return loss, None
        return loss, np.array([np.dot(w, r)])

    def initial_theta(self, data: Dataset):
        return np.array([np.dot(data.normalized_weights, data.y)])

    def sample_predictive(self, theta, x, rng, **params):
        return float(theta[0]) + rng.standard_normal()

    def sample_predictive_batch(self, theta, x, count, rng, **params):
        return float(theta[0]) + rng.standard_normal(count)


def simple_closed_form(boot_mean, data_mean):
    """Equilibrium of the scalar model with a bootstrap sample as observed data.

    Returns ``boot_mean`` when it is no larger in magnitude than
    ``data_mean`` and has the same sign, ``data_mean`` when it is larger,
    and 0 when the signs differ. A zero mean matches either sign.
    """
    if boot_mean * data_mean < 0:
        return 0.0
    return float(boot_mean) if abs(boot_mean) <= abs(data_mean) else float(data_mean)


def exact_simple_expectation(data_mean, n):
    """Expected bootstrap-replicate estimate on the scalar model.

    Averages :func:`simple_closed_form` over the sampling distribution of
    the bootstrap mean, ``N(ybar, 1/n)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    ybar = float(data_mean)
    rn = np.sqrt(n)
    a = -rn * abs(ybar)
    return float((1 - norm.cdf(a)) * ybar
                 - abs(norm.pdf(a) - norm.pdf(0.0)) * np.sign(ybar) / rn)
