"""Simulation studies for the many-normal-means problem and a regression benchmark."""

from __future__ import annotations

import dataclasses
import enum
import os
from dataclasses import dataclass, field

import numpy as np

from .baselines import CvConfig, cv_select, james_stein, mle_means
from .core import Dataset, SolverOptions
from .imputation import ImputationConfig, am_estimate
from .models import (
    LinearRegressionModel,
    ManyNormalMeansModel,
    active_counts,
    classify,
    mnm_posterior_mean,
    t_score_screen,
)

# Mixture fits have slowly drifting flat directions (near-empty atoms); a
# looser tolerance and an iteration cap bound runtime without measurably
# changing the posterior means.
STUDY_SOLVER = SolverOptions(tol=1e-5, max_iters=150)
STUDY_B = 50

MEANS_METHODS = ("mle", "js", "am")
REGRESSION_METHODS = ("am", "lasso", "ridge")


class StudyKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BIMODAL = "bimodal"
    ZERO_INFLATED = "zeroinf"


@dataclass(frozen=True)
class StudySpec:
    """One simulation study: prior family, sample sizes, replications."""

    kind: StudyKind = StudyKind.GAUSSIAN
    n: tuple = (10, 20, 50)
    K: int = 200
    A: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", StudyKind(self.kind))
        n = (self.n,) if np.isscalar(self.n) else tuple(self.n)
        if not n or any(int(v) != v or v < 4 for v in n):
            raise ValueError("every n must be an integer of at least 4")
        object.__setattr__(self, "n", tuple(int(v) for v in n))
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.A < 0:
            raise ValueError("A must be nonnegative")


@dataclass(frozen=True, eq=False)
class StudyResult:
    """Mean MPE and its standard error per method, one entry per sample size."""

    n: tuple
    mean: dict
    se: dict
    config: dict = field(default_factory=dict)

    def table(self):
        """Rows of ``(method, mean per n...)``."""
        return [(name, *self.mean[name]) for name in self.mean]


def simulate_means(kind, n, rng, A=0.01):
    """Draw true means and one unit-variance observation of each.

    Returns
    -------
    mu, y : ndarray of shape (n,)
    """
    kind = StudyKind(kind)
    if kind is StudyKind.GAUSSIAN:
        mu = rng.normal(0.0, np.sqrt(A), n)
    elif kind is StudyKind.BIMODAL:
        # odd n puts the extra unit in the negative component
        mu = np.concatenate([rng.normal(-2.0, 0.1, n - n // 2), rng.normal(2.0, 0.1, n // 2)])
    else:
        mu = np.where(rng.random(n) < 0.9, 0.0, rng.normal(-3.0, 1.0, n))
    return mu, mu + rng.standard_normal(n)


def mpe(mu, mu_hat):
    """Mean squared deviation between true and estimated means."""
    mu = np.asarray(mu, dtype=float)
    mu_hat = np.asarray(mu_hat, dtype=float)
    if mu.shape != mu_hat.shape:
        raise ValueError("length mismatch")
    return float(np.mean((mu - mu_hat) ** 2))


def _stream(*keys):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def _derived_seed(*keys):
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def default_study_config(seed=0, **overrides):
    return ImputationConfig(**{"B": STUDY_B, "seed": seed, "solver": STUDY_SOLVER, **overrides})


def am_means(y, cfg: ImputationConfig, m=None):
    """Posterior-mean estimates from a discrete-prior model fitted with bootstrap imputation."""
    y = np.asarray(y, dtype=float)
    model = ManyNormalMeansModel(y.size if m is None else m)
    sol = am_estimate(model, Dataset(y), cfg)
    return mnm_posterior_mean(sol.theta, y), sol


def _replication(spec, n, k, methods, am_cfg):
    mu, y = simulate_means(spec.kind, n, _stream(spec.seed, n, k), spec.A)
    out = {}
    for name in methods:
        if name == "mle":
            est = mle_means(y)
        elif name == "js":
            est = james_stein(y)
        else:
            cfg = dataclasses.replace(am_cfg, seed=_derived_seed(am_cfg.seed, spec.seed, n, k))
            est = am_means(y, cfg)[0]
        out[name] = mpe(mu, est)
    return out


def run_study(spec: StudySpec, methods=MEANS_METHODS, am_cfg: ImputationConfig = None,
              n_jobs=None) -> StudyResult:
    """Mean MPE over ``K`` simulated data sets for each method and sample size.

    Replication ``k`` at size ``n`` draws from a stream keyed by
    ``(seed, n, k)``, so results do not depend on ``n_jobs``.
    """
    methods = tuple(dict.fromkeys(methods))
    unknown = set(methods) - set(MEANS_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    am_cfg = am_cfg or default_study_config()
    jobs = n_jobs or int(os.environ.get("AM_THREADS", "1"))
    mean = {name: [] for name in methods}
    se = {name: [] for name in methods}
    for n in spec.n:
        tasks = range(spec.K)
        if jobs > 1:
            from joblib import Parallel, delayed

            rows = Parallel(n_jobs=jobs)(delayed(_replication)(spec, n, k, methods, am_cfg) for k in tasks)
        else:
            rows = [_replication(spec, n, k, methods, am_cfg) for k in tasks]
        for name in methods:
            vals = np.array([r[name] for r in rows])
            mean[name].append(float(vals.mean()))
            se[name].append(float(vals.std(ddof=1) / np.sqrt(spec.K)) if spec.K > 1 else 0.0)
    config = {"kind": spec.kind.value, "n": list(spec.n), "K": spec.K, "A": spec.A,
              "seed": spec.seed, "B": am_cfg.B, "duality": am_cfg.kind.value}
    return StudyResult(spec.n, mean, se, config)


def _binary(v):
    v = np.asarray(v)
    return v.size > 0 and set(np.unique(v)) <= {0, 1}


def run_regression(train: Dataset, test: Dataset, methods=REGRESSION_METHODS,
                   am_cfg: ImputationConfig = None, cv_cfg: CvConfig = None,
                   screen_top=None, labels=None, test_labels=None):
    """Fit each method on ``train`` and score it on ``test``.

    Covariates are optionally screened to the ``screen_top`` columns with the
    largest two-sample t-statistics (computed on the training labels only).
    The response is regressed directly; when labels are binary, a
    prediction of at least 0.5 classifies as 1.

    Returns
    -------
    dict
        Per method: ``test_error`` (misclassification count, or None
        without binary test labels), ``test_mse``, ``active`` (standardized
        coefficients above 1e-4 in magnitude), ``nonzero`` and, for the CV
        baselines, the chosen ``lambda``.
    """
    methods = tuple(dict.fromkeys(methods))
    unknown = set(methods) - set(REGRESSION_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    if train.x is None or test.x is None:
        raise ValueError("regression needs covariates")
    if labels is None and _binary(train.y):
        labels = train.y.astype(int)
    if test_labels is None and _binary(test.y):
        test_labels = test.y.astype(int)
    cols = np.arange(train.k)
    if screen_top is not None:
        if labels is None:
            raise ValueError("screening needs binary training labels")
        cols = np.sort(t_score_screen(train, labels, min(int(screen_top), train.k)))
    model, std_train = LinearRegressionModel.from_training(train.x[:, cols], train.y)
    x_test = model.standardize(test.x[:, cols])
    am_cfg = am_cfg or ImputationConfig(B=STUDY_B)
    cv_cfg = cv_cfg or CvConfig()

    out = {}
    for name in methods:
        record = {}
        if name == "am":
            sol = am_estimate(model, std_train, am_cfg)
            theta = sol.theta
            record["converged"] = sol.converged
        else:
            lam, _, theta = cv_select(std_train, name, cv_cfg)
            record["lambda"] = lam
        pred = theta[0] + x_test @ theta[1:]
        record["test_mse"] = float(np.mean((test.y - pred) ** 2))
        record["test_error"] = (None if test_labels is None
                                else int(np.sum(classify(pred) != np.asarray(test_labels))))
        record["active"], record["nonzero"] = active_counts(theta[1:])
        out[name] = record
    out["_screened"] = cols
    return out
