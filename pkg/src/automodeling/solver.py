"""Equilibrium solver alternating closed-form multiplier updates with proximal steps.

Each sweep evaluates the loss gradient under the observed data and under
the future (imputation) data at the current parameter, sets the duality
multipliers so the generalization-gap gradient is as small as possible,
then takes one proximal step on the penalized empirical loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    DualityKind,
    LambdaNorm,
    ModelSpec,
    NonFiniteError,
    Solution,
    SolverOptions,
    StepRule,
)

_ARMIJO = 1e-4
_MIN_STEP = 1e-12
_MAX_STEP = 1e6
_HALVING_PATIENCE = 10


@dataclass(frozen=True, eq=False)
class GradientPair:
    """Loss gradients under the future and the observed distribution."""

    g_fut: np.ndarray
    g_obs: np.ndarray

    def __post_init__(self):
        g_fut = np.asarray(self.g_fut, dtype=float)
        g_obs = np.asarray(self.g_obs, dtype=float)
        if g_fut.shape != g_obs.shape:
            raise ValueError("gradient vectors differ in length")
        if not (np.all(np.isfinite(g_fut)) and np.all(np.isfinite(g_obs))):
            raise NonFiniteError("non-finite gradient")
        object.__setattr__(self, "g_fut", g_fut)
        object.__setattr__(self, "g_obs", g_obs)

    @property
    def difference(self) -> np.ndarray:
        return self.g_fut - self.g_obs


def _mask_for(theta, mask):
    if mask is None:
        return np.ones(theta.shape, bool)
    mask = np.asarray(mask, bool)
    if mask.shape != theta.shape:
        raise ValueError("mask and theta differ in length")
    return mask


def _check_pair(gp, theta):
    theta = np.asarray(theta, dtype=float)
    if gp.g_obs.shape != theta.shape:
        raise ValueError(
            f"theta has shape {theta.shape}, gradients have {gp.g_obs.shape}")
    return theta


def lambda_update_l1(gp: GradientPair, theta, opts: SolverOptions = None, mask=None) -> np.ndarray:
    """Closed-form multipliers for the weighted-L1 duality function.

    At a nonzero coordinate the multiplier is ``max(0, d*sign(theta))``; at
    a zero coordinate it is ``|d|`` so the subgradient cancels ``d`` exactly.
    """
    opts = opts or SolverOptions()
    theta = _check_pair(gp, theta)
    return _lam_l1(gp.difference, theta, opts, _mask_for(theta, mask))


def _lam_l1(d, theta, opts, mask):
    lam = np.where(np.abs(theta) > opts.zero_eps, np.maximum(0.0, d * np.sign(theta)), np.abs(d))
    lam[~mask] = 0.0
    return lam


def lambda_update_l2(gp: GradientPair, theta, opts: SolverOptions = None, mask=None) -> np.ndarray:
    """Closed-form multipliers for the weighted-L2 duality function, capped at ``lambda_cap``."""
    opts = opts or SolverOptions()
    theta = _check_pair(gp, theta)
    return _lam_l2(gp.difference, theta, opts, _mask_for(theta, mask))


def _lam_l2(d, theta, opts, mask):
    nonzero = np.abs(theta) > opts.zero_eps
    safe = np.where(nonzero, theta, 1.0)
    lam = np.where(nonzero, np.clip(d / (2.0 * safe), 0.0, opts.lambda_cap), 0.0)
    lam[~mask] = 0.0
    return lam


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(0.0, np.abs(z) - t)


def theta_step_l1(theta, g_obs, lam, step, lower=None) -> np.ndarray:
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=float)
    out = soft_threshold(theta - step * np.asarray(g_obs), step * np.asarray(lam))
    return out if lower is None else np.maximum(out, lower)


def theta_step_l2(theta, g_obs, lam, step, lower=None) -> np.ndarray:
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=float)
    out = theta - step * (np.asarray(g_obs) + 2.0 * np.asarray(lam) * theta)
    return out if lower is None else np.maximum(out, lower)


def _penalty(kind, theta, lam):
    if kind is DualityKind.WEIGHTED_L1:
        return float(np.dot(lam, np.abs(theta)))
    return float(np.dot(lam, theta * theta))


def v_gradient(kind, d, theta, lam, mask, zero_eps=1e-10) -> np.ndarray:
    """Gradient of the modified generalization gap, subgradient chosen at zero."""
    if kind is DualityKind.WEIGHTED_L2:
        return d - 2.0 * lam * theta
    nonzero = np.abs(theta) > zero_eps
    at_zero = np.sign(d) * np.maximum(0.0, np.abs(d) - lam)
    v = np.where(nonzero, d - lam * np.sign(theta), at_zero)
    return np.where(mask, v, d)


def stationarity_residual(model: ModelSpec, theta, g_obs, lam, kind, step) -> float:
    """Infinity norm of the proximal-gradient mapping of the penalized loss.

    Away from zero this equals ``|g + dpi/dtheta|``; at an unbounded zero
    L1 coordinate it equals ``max(0, |g| - lam)``.
    """
    stepper = theta_step_l1 if kind is DualityKind.WEIGHTED_L1 else theta_step_l2
    nxt = model.project(stepper(theta, g_obs, lam, step))
    return float(np.max(np.abs(nxt - theta)) / step)


def _finite(loss, g):
    # a NaN or infinity anywhere propagates into the sum
    return math.isfinite(loss) and math.isfinite(loss + float(np.sum(g)))


def _evaluate(model, theta, data, iteration, role):
    loss, g = model.mean_loss_grad(theta, data)
    if not (_finite(loss, g) and np.all(np.isfinite(g))):
        raise NonFiniteError(
            f"non-finite {role} loss or gradient at iteration {iteration}",
            iteration=iteration)
    return loss, g


def solve_equilibrium(model: ModelSpec, obs: Dataset, fut: Dataset,
                      kind=DualityKind.WEIGHTED_L1, opts: SolverOptions = None,
                      theta0=None) -> Solution:
    """Find ``(theta, lambda)`` where the penalized loss on ``obs`` is
    stationary and the gap gradient between ``fut`` and ``obs`` is minimal.

    Parameters
    ----------
    model : ModelSpec
    obs : Dataset
        The observed sample; its penalized empirical loss is minimized.
    fut : Dataset
        Stand-in for future observations (the original data during
        bootstrap imputation, the imputation pool during final estimation).
    kind : DualityKind or {"l1", "l2"}
    opts : SolverOptions, optional
    theta0 : array-like, optional
        Starting point; defaults to ``model.initial_theta(obs)``.

    Returns
    -------
    Solution
        ``lam`` is recomputed at the returned ``theta``. ``converged`` is
        set only if the movement test passed and the final stationarity
        residual is at most ``10 * tol``.
    """
    opts = opts or SolverOptions()
    kind = DualityKind(kind)
    mask = np.asarray(model.penalized_mask, bool)
    lower = model.lower_bounds
    theta = model.initial_theta(obs) if theta0 is None else np.array(theta0, dtype=float)
    if theta.shape != (model.p,):
        raise ValueError(f"theta0 has shape {theta.shape}, expected ({model.p},)")
    if lower is not None and np.any(theta < lower - 1e-12):
        raise ValueError("theta0 violates the model's lower bounds")
    theta = model.project(theta)

    if kind is DualityKind.WEIGHTED_L1:
        update, stepper = _lam_l1, theta_step_l1
    else:
        update, stepper = _lam_l2, theta_step_l2

    f_obs, g_obs = _evaluate(model, theta, obs, 0, "observed")
    step = used = opts.theta_step
    rising = 0
    moved_little = False
    iterations = 0
    for it in range(1, opts.max_iters + 1):
        iterations = it
        _, g_fut = _evaluate(model, theta, fut, it, "future")
        lam = update(g_fut - g_obs, theta, opts, mask)
        g_old = f_obs + _penalty(kind, theta, lam)

        if opts.step_rule is StepRule.BB:
            while True:
                trial = model.project(stepper(theta, g_obs, lam, step))
                f_new, g_new = model.mean_loss_grad(trial, obs)
                delta = trial - theta
                ok = _finite(f_new, g_new)
                if ok and f_new + _penalty(kind, trial, lam) <= g_old - _ARMIJO / step * np.dot(delta, delta):
                    break
                if step <= _MIN_STEP:
                    break
                step = max(0.5 * step, _MIN_STEP)
            if not ok:
                raise NonFiniteError(
                    f"non-finite observed loss at iteration {it}", iteration=it)
            used = step
            sy = np.dot(delta, g_new - g_obs)
            step = np.dot(delta, delta) / sy if sy > 0 else 2.0 * step
            step = float(np.clip(step, _MIN_STEP, _MAX_STEP))
        else:
            used = step
            trial = model.project(stepper(theta, g_obs, lam, step))
            f_new, g_new = _evaluate(model, trial, obs, it, "observed")
            delta = trial - theta
            rising = rising + 1 if f_new + _penalty(kind, trial, lam) > g_old else 0
            if rising >= _HALVING_PATIENCE:
                step *= 0.5
                rising = 0

        theta, f_obs, g_obs = trial, f_new, g_new
        if np.max(np.abs(delta)) / used <= opts.tol:
            moved_little = True
            break

    _, g_fut = _evaluate(model, theta, fut, iterations, "future")
    gp = GradientPair(g_fut, g_obs)
    lam = update(gp.difference, theta, opts, mask)
    residual_g = stationarity_residual(model, theta, g_obs, lam, kind, used)
    v = v_gradient(kind, gp.difference, theta, lam, mask, opts.zero_eps)
    if opts.lambda_norm is LambdaNorm.L1:
        residual_v = float(np.sum(np.abs(v)))
    else:
        residual_v = float(np.sqrt(np.dot(v, v)))
    return Solution(
        theta=theta,
        lam=lam,
        iterations=iterations,
        converged=bool(moved_little and residual_g <= 10 * opts.tol),
        residual_g=residual_g,
        residual_v=residual_v,
        kind=kind,
        extras={"g_obs": g_obs, "g_fut": g_fut, "step": used, "loss_obs": f_obs},
    )
