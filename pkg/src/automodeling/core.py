"""Shared data model: datasets, model interface, duality functions, solver settings."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class NonFiniteError(FloatingPointError):
    """A loss or gradient evaluated to NaN or infinity.

    ``index`` names the offending observation, ``iteration`` the solver
    sweep (either may be None when unknown).
    """

    def __init__(self, message, index=None, iteration=None):
        super().__init__(message)
        self.index = index
        self.iteration = iteration


class DualityKind(str, enum.Enum):
    WEIGHTED_L1 = "l1"
    WEIGHTED_L2 = "l2"


class LambdaNorm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


class StepRule(str, enum.Enum):
    FIXED = "fixed"
    BB = "bb"


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable sample of (covariate row, response) pairs.

    Parameters
    ----------
    y : array-like of shape (n,)
        Responses.
    x : array-like of shape (n, k), optional
        Covariates; ``None`` for covariate-free models.
    weights : array-like of shape (n,), optional
        Nonnegative observation weights, all ones by default. Zero weights
        exclude an observation from every empirical average.
    """

    y: np.ndarray
    x: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if y.ndim != 1:
            raise ValueError(f"y must be one-dimensional, got shape {y.shape}")
        if y.size < 1:
            raise ValueError("dataset must contain at least one observation")
        x = self.x
        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.ndim != 2 or x.shape[0] != y.size:
                raise ValueError(
                    f"x has shape {x.shape}, expected ({y.size}, k)")
        w = self.weights
        if w is None:
            w = np.ones(y.size)
        else:
            w = np.asarray(w, dtype=float)
            if w.shape != y.shape:
                raise ValueError(f"weights have shape {w.shape}, expected {y.shape}")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and nonnegative")
            if not np.any(w > 0):
                raise ValueError("weights must not all be zero")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "x", None if x is None else _readonly(x))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def k(self) -> int:
        return 0 if self.x is None else self.x.shape[1]

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def row(self, i):
        return (None if self.x is None else self.x[i]), self.y[i]

    def take(self, idx) -> "Dataset":
        """Rows at ``idx`` with weights reset to one."""
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.y[idx], None if self.x is None else self.x[idx])

    @classmethod
    def concat(cls, parts) -> "Dataset":
        parts = list(parts)
        x = None
        if parts[0].x is not None:
            x = np.vstack([p.x for p in parts])
        return cls(np.concatenate([p.y for p in parts]), x,
                   np.concatenate([p.weights for p in parts]))


@dataclass(frozen=True, eq=False)
class DualitySpec:
    """Duality function family with per-coordinate multipliers.

    Coordinates with ``penalized_mask`` false are exempt and must carry a
    zero multiplier.
    """

    kind: DualityKind
    lam: np.ndarray
    penalized_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = DualityKind(self.kind)
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        mask = self.penalized_mask
        mask = np.ones(lam.size, bool) if mask is None else np.asarray(mask, bool)
        if mask.shape != lam.shape:
            raise ValueError("penalized_mask and lam differ in length")
        if np.any(lam < 0) or np.any(np.isnan(lam)):
            raise ValueError("multipliers must be nonnegative")
        if np.any(lam[~mask] != 0):
            raise ValueError("unpenalized coordinates must have zero multiplier")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lam", _readonly(lam))
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "penalized_mask", mask)

    @property
    def p(self) -> int:
        return self.lam.size


def _check_dim(spec, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.p,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({spec.p},)")
    return theta


def duality_value(spec: DualitySpec, theta) -> float:
    theta = _check_dim(spec, theta)
    if spec.kind is DualityKind.WEIGHTED_L1:
        return float(np.sum(spec.lam * np.abs(theta)))
    return float(np.sum(spec.lam * theta * theta))


def duality_grad(spec: DualitySpec, theta) -> np.ndarray:
    """Gradient of the duality function; the L1 subgradient at zero is 0."""
    theta = _check_dim(spec, theta)
    if spec.kind is DualityKind.WEIGHTED_L1:
        return spec.lam * np.sign(theta)
    return 2.0 * spec.lam * theta


class ModelSpec:
    """A statistical model the solver can fit.

    Subclasses implement the per-observation ``loss``, ``grad`` and
    ``sample_predictive``; the batch methods below fall back to loops over
    those and should be overridden when a vectorized form exists.

    Losses are negative log-likelihoods in nats, normalizing constants
    included.
    """

    p: int

    def loss(self, theta, x, y) -> float:
        raise NotImplementedError

    def grad(self, theta, x, y) -> np.ndarray:
        raise NotImplementedError

    def sample_predictive(self, theta, x, rng, **params) -> float:
        raise NotImplementedError

    def initial_theta(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    @property
    def lower_bounds(self) -> Optional[np.ndarray]:
        return None

    @property
    def param_bounds(self) -> Optional[np.ndarray]:
        return self.lower_bounds

    @property
    def penalized_mask(self) -> np.ndarray:
        return np.ones(self.p, bool)

    def project(self, theta) -> np.ndarray:
        """Map a trial parameter back onto the feasible set.

        The solver calls this on the raw proximal step, so models with
        constraints beyond coordinate bounds (a probability simplex, say)
        should apply the Euclidean projection onto the full feasible set.
        """
        lb = self.lower_bounds
        return theta if lb is None else np.maximum(theta, lb)

    def losses(self, theta, data: Dataset) -> np.ndarray:
        return np.array([self.loss(theta, *data.row(i)) for i in range(data.n)])

    def mean_loss_grad(self, theta, data: Dataset, with_grad=True):
        """Weighted mean loss and (optionally) gradient over ``data``."""
        w = data.normalized_weights
        keep = np.flatnonzero(w > 0)
        loss = sum(w[i] * self.loss(theta, *data.row(i)) for i in keep)
        if not with_grad:
            return loss, None
        g = np.zeros(self.p)
        for i in keep:
            g += w[i] * self.grad(theta, *data.row(i))
        return loss, g

    def predictive_params(self, theta, data: Dataset) -> dict:
        """Extra parameters the predictive sampler needs, estimated on ``data``."""
        return {}

    def sample_predictive_batch(self, theta, x, count, rng, **params) -> np.ndarray:
        if x is None:
            return np.array([self.sample_predictive(theta, None, rng, **params)
                             for _ in range(count)])
        return np.array([self.sample_predictive(theta, row, rng, **params) for row in x])


def _locate_nonfinite(model, theta, data):
    w = data.normalized_weights
    vals = model.losses(theta, data)
    bad = np.flatnonzero(~np.isfinite(vals) & (w > 0))
    return int(bad[0]) if bad.size else None


def empirical_loss(model: ModelSpec, theta, data: Dataset) -> float:
    theta = np.asarray(theta, dtype=float)
    loss, _ = model.mean_loss_grad(theta, data, with_grad=False)
    if not np.isfinite(loss):
        idx = _locate_nonfinite(model, theta, data)
        raise NonFiniteError(f"non-finite loss at observation {idx}", index=idx)
    return float(loss)


def empirical_grad(model: ModelSpec, theta, data: Dataset) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    loss, g = model.mean_loss_grad(theta, data)
    if not (np.isfinite(loss) and np.all(np.isfinite(g))):
        idx = _locate_nonfinite(model, theta, data)
        raise NonFiniteError(f"non-finite loss or gradient at observation {idx}", index=idx)
    return g


@dataclass(frozen=True)
class SolverOptions:
    """Settings for the equilibrium solver.

    ``theta_step`` is the fixed step (``step_rule="fixed"``) or the initial
    trial step of the Barzilai-Borwein rule with backtracking
    (``step_rule="bb"``). Iteration stops once the step-normalized
    movement ``max|theta_new - theta| / step`` drops to ``tol``.
    """

    theta_step: float = 0.01
    max_iters: int = 5000
    tol: float = 1e-7
    lambda_norm: LambdaNorm = LambdaNorm.L1
    lambda_cap: float = 1e6
    zero_eps: float = 1e-10
    step_rule: StepRule = StepRule.BB

    def __post_init__(self):
        object.__setattr__(self, "lambda_norm", LambdaNorm(self.lambda_norm))
        object.__setattr__(self, "step_rule", StepRule(self.step_rule))
        for name in ("theta_step", "tol", "lambda_cap", "zero_eps"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.tol >= 1:
            raise ValueError("tol must be below 1")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")


@dataclass(frozen=True, eq=False)
class Solution:
    theta: np.ndarray
    lam: np.ndarray
    iterations: int
    converged: bool
    residual_g: float
    residual_v: float
    kind: DualityKind = DualityKind.WEIGHTED_L1
    extras: dict = field(default_factory=dict)
