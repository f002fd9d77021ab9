"""scikit-learn compatible wrappers around the library's estimators."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y, column_or_1d

from .baselines import james_stein
from .core import Dataset, SolverOptions
from .imputation import ImputationConfig, am_estimate
from .models import LinearRegressionModel, ManyNormalMeansModel, mnm_posterior_mean, to_eta_alpha


class _AMParams:
    def _config(self):
        solver = SolverOptions(theta_step=self.theta_step, max_iters=self.max_iters,
                               tol=self.tol, step_rule=self.step_rule)
        return ImputationConfig(B=self.B, draws_per_replicate=self.draws, seed=self.seed,
                                solver=solver, kind=self.duality, n_jobs=self.n_jobs)


class AutoModelingRegressor(_AMParams, RegressorMixin, BaseEstimator):
    """Linear regression with an adaptively fitted coefficient penalty.

    Covariates are standardized internally; the penalty multipliers are
    chosen so the penalized training loss tracks the loss on bootstrap
    imputations of future data, so no tuning parameter is cross-validated.

    Parameters
    ----------
    B : int, default=100
        Bootstrap replicates used to build the imputation pool.
    draws : int, optional
        Imputed observations per replicate; defaults to the sample size.
    duality : {"l1", "l2"}, default="l1"
    seed : int, default=0
    tol, theta_step, max_iters, step_rule
        Solver settings, see :class:`~automodeling.core.SolverOptions`.
    n_jobs : int, optional

    Attributes
    ----------
    coef_, intercept_ : raw-scale coefficients and intercept.
    standardized_coef_ : coefficients on the standardized scale.
    lambda_ : fitted penalty multipliers (intercept first).
    """

    def __init__(self, B=100, draws=None, duality="l1", seed=0, tol=1e-7,
                 theta_step=0.01, max_iters=5000, step_rule="bb", n_jobs=None):
        self.B = B
        self.draws = draws
        self.duality = duality
        self.seed = seed
        self.tol = tol
        self.theta_step = theta_step
        self.max_iters = max_iters
        self.step_rule = step_rule
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        model, data = LinearRegressionModel.from_training(X, y)
        sol = am_estimate(model, data, self._config())
        self.model_ = model
        self.theta_ = sol.theta
        self.lambda_ = sol.lam
        self.n_iter_ = sol.iterations
        self.converged_ = sol.converged
        self.standardized_coef_ = np.zeros(X.shape[1])
        self.standardized_coef_[model.standardizer.keep] = sol.theta[1:]
        self.intercept_, self.coef_ = model.standardizer.destandardize(sol.theta)
        return self

    def predict(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.intercept_ + X @ self.coef_


class NormalMeansAM(_AMParams, TransformerMixin, BaseEstimator):
    """Estimate many normal means by posterior means under a fitted discrete prior.

    ``fit`` learns the prior from a vector of unit-variance observations;
    ``transform`` maps observations to posterior means under that prior.

    Attributes
    ----------
    eta_, alpha_ : support points and their prior probabilities.
    """

    def __init__(self, m_support=None, B=100, draws=None, duality="l1", seed=0,
                 tol=1e-7, theta_step=0.01, max_iters=5000, step_rule="bb", n_jobs=None):
        self.m_support = m_support
        self.B = B
        self.draws = draws
        self.duality = duality
        self.seed = seed
        self.tol = tol
        self.theta_step = theta_step
        self.max_iters = max_iters
        self.step_rule = step_rule
        self.n_jobs = n_jobs

    def fit(self, y, _=None):
        y = column_or_1d(check_array(np.asarray(y).reshape(-1, 1), ensure_min_samples=1))
        m = y.size if self.m_support is None else self.m_support
        model = ManyNormalMeansModel(m)
        sol = am_estimate(model, Dataset(y), self._config())
        self.theta_ = sol.theta
        self.lambda_ = sol.lam
        self.converged_ = sol.converged
        self.eta_, self.alpha_ = to_eta_alpha(sol.theta, m)
        return self

    def transform(self, y):
        check_is_fitted(self, "theta_")
        y = column_or_1d(check_array(np.asarray(y).reshape(-1, 1)))
        return mnm_posterior_mean(self.theta_, y)


class JamesSteinShrinker(TransformerMixin, BaseEstimator):
    """Stateless James-Stein shrinkage toward the grand mean."""

    def fit(self, y, _=None):
        return self

    def transform(self, y):
        return james_stein(column_or_1d(y))
