"""Bootstrap imputation of future observations and the final combined estimate.

Each replicate fits the model with a bootstrap resample as the observed
data and the original sample as the future data, then simulates new
responses from the fitted predictive model. The simulated responses from
all replicates form the imputation pool, which stands in for the future
data when the model is finally fitted to the original sample.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, DualityKind, ModelSpec, Solution, SolverOptions
from .solver import solve_equilibrium


class ReplicateError(RuntimeError):
    """A bootstrap replicate failed; ``replicate`` is its index."""

    def __init__(self, replicate, cause):
        super().__init__(f"bootstrap replicate {replicate} failed: {cause}")
        self.replicate = replicate


@dataclass(frozen=True)
class ImputationConfig:
    """Settings for building the imputation pool.

    Parameters
    ----------
    B : int
        Number of bootstrap replicates.
    draws_per_replicate : int, optional
        Imputed observations per replicate; defaults to the sample size.
    seed : int
        Master seed. Replicate ``b`` draws from a stream seeded by ``(seed, b)``.
    solver : SolverOptions
    kind : DualityKind
    n_jobs : int, optional
        Worker threads for the replicate loop. Defaults to the
        ``AM_THREADS`` environment variable, else 1. Results do not depend
        on this value.
    """

    B: int = 100
    draws_per_replicate: Optional[int] = None
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    kind: DualityKind = DualityKind.WEIGHTED_L1
    n_jobs: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DualityKind(self.kind))
        if int(self.B) != self.B or self.B < 1:
            raise ValueError("B must be a positive integer")
        d = self.draws_per_replicate
        if d is not None and (int(d) != d or d < 1):
            raise ValueError("draws_per_replicate must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def draws_for(self, data: Dataset) -> int:
        return data.n if self.draws_per_replicate is None else int(self.draws_per_replicate)


@dataclass(frozen=True, eq=False)
class ImputationPool:
    samples: Dataset
    replicate_thetas: list
    replicate_converged: np.ndarray

    @property
    def B(self):
        return len(self.replicate_thetas)


def replicate_rng(seed, b) -> np.random.Generator:
    """Counter-based stream for replicate ``b``, independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(b)])))


def bootstrap_resample(data: Dataset, rng) -> Dataset:
    """``n`` rows drawn uniformly with replacement; weights reset to one."""
    return data.take(rng.integers(0, data.n, data.n))


def fit_bootstrap_replicate(model: ModelSpec, data: Dataset, cfg: ImputationConfig, rng,
                            resample: Dataset = None) -> np.ndarray:
    """Fit with a bootstrap resample as observed data and ``data`` as future data."""
    if resample is None:
        resample = bootstrap_resample(data, rng)
    return solve_equilibrium(model, resample, data, cfg.kind, cfg.solver).theta


def generate_imputations(model: ModelSpec, theta, data: Dataset, count, rng, **params) -> Dataset:
    """Simulate ``count`` observations from the fitted predictive model.

    Covariate rows, if any, are drawn uniformly with replacement from
    ``data``. Extra predictive parameters (a noise variance, say) default
    to ``model.predictive_params(theta, data)``.
    """
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    count = int(count)
    if not params:
        params = model.predictive_params(theta, data)
    x = None
    if data.x is not None:
        x = data.x[rng.integers(0, data.n, count)]
    y = model.sample_predictive_batch(theta, x, count, rng, **params)
    return Dataset(y, x)


def _run_replicate(model, data, cfg, b):
    try:
        rng = replicate_rng(cfg.seed, b)
        resample = bootstrap_resample(data, rng)
        sol = solve_equilibrium(model, resample, data, cfg.kind, cfg.solver)
        params = model.predictive_params(sol.theta, resample)
        draws = generate_imputations(model, sol.theta, data, cfg.draws_for(data), rng, **params)
    except Exception as exc:
        raise ReplicateError(b, exc) from exc
    return sol.theta, sol.converged, draws


def _workers(cfg):
    if cfg.n_jobs is not None:
        return max(1, int(cfg.n_jobs))
    return max(1, int(os.environ.get("AM_THREADS", "1")))


def build_pool(model: ModelSpec, data: Dataset, cfg: ImputationConfig) -> ImputationPool:
    """Run ``B`` bootstrap replicates and pool their imputations in replicate order."""
    jobs = _workers(cfg)
    if jobs > 1 and cfg.B > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs, prefer="threads")(
            delayed(_run_replicate)(model, data, cfg, b) for b in range(cfg.B))
    else:
        results = [_run_replicate(model, data, cfg, b) for b in range(cfg.B)]
    thetas = [r[0] for r in results]
    converged = np.array([r[1] for r in results])
    return ImputationPool(Dataset.concat(r[2] for r in results), thetas, converged)


def am_estimate(model: ModelSpec, data: Dataset, cfg: ImputationConfig,
                pool: ImputationPool = None) -> Solution:
    """Fit ``model`` to ``data`` against the imputation pool.

    The pool is built from ``cfg`` unless supplied; it is returned in
    ``solution.extras["pool"]``.
    """
    if pool is None:
        pool = build_pool(model, data, cfg)
    sol = solve_equilibrium(model, data, pool.samples, cfg.kind, cfg.solver)
    sol.extras["pool"] = pool
    return sol
