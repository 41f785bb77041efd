"""Scalar Kalman filtering for a bank of independent random walks.

Each flow volume follows x_i(t) = x_i(t-1) + eps_i(t) with innovation
variance sigma2_i, and each period delivers a fused observation of x_i
with inverse variance (information) m_i. Working in information form,

    info(t) = info(t-1) / (1 + sigma2 * info(t-1)) + m,

which is the usual variance recursion rewritten so the diffuse prior
info = 0 needs no special casing. Under constant m the recursion has a
unique nonnegative fixed point, the steady-state information, available
in closed form from the quadratic sigma2*u^2 - sigma2*m*u - m = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FlowDesignError, FlowModel, ValidationError


class ConvergenceError(FlowDesignError):
    """Fixed-point iteration ran out of iterations; carries the last iterate."""

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class FilterState:
    """Posterior of the filter bank at time ``t``.

    ``info[i]`` is the posterior information 1/var of flow i (0 encodes
    the diffuse prior) and ``mean[i]`` the posterior mean. Value object;
    updates return new instances.
    """

    info: np.ndarray
    mean: np.ndarray
    t: int = 0

    def __post_init__(self):
        info = np.atleast_1d(np.asarray(self.info, dtype=float))
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if info.shape != mean.shape or info.ndim != 1:
            raise ValidationError("info and mean must be 1-D arrays of equal length")
        if np.any(info < 0) or not np.all(np.isfinite(info)):
            raise ValidationError("posterior information must be finite and >= 0")
        if np.any(~np.isfinite(mean) & (info > 0)):
            raise ValidationError("mean must be finite wherever info > 0")
        object.__setattr__(self, "info", info)
        object.__setattr__(self, "mean", mean)


def diffuse_state(n_r: int, mean0=None) -> FilterState:
    """Diffuse prior (zero information). ``mean0`` defaults to NaN, which is
    fine because the first observed update overwrites the mean entirely."""
    mean = np.full(n_r, np.nan) if mean0 is None else np.asarray(mean0, dtype=float).copy()
    return FilterState(info=np.zeros(n_r), mean=mean, t=0)


def predicted_info(info: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """One-step-ahead information: inverse of (1/info + sigma2)."""
    info = np.asarray(info, dtype=float)
    return info / (1.0 + np.asarray(sigma2, dtype=float) * info)


def predict_update(state: FilterState, fm: FlowModel, m, y=None) -> FilterState:
    """Advance the filter bank by one period.

    ``m`` is the per-flow information delivered this period and ``y`` the
    corresponding fused observations; ``y[i]`` is only read where
    ``m[i] > 0`` (pass NaN or anything else elsewhere). Flows with
    ``m[i] = 0`` do a pure prediction step: the mean is unchanged and the
    information shrinks.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if m.shape != (fm.n_r,) or state.info.shape != (fm.n_r,):
        raise ValidationError("state, flow model and information vector disagree on n_r")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValidationError("per-period information must be finite and >= 0")
    prior = predicted_info(state.info, fm.sigma2)
    info_new = prior + m
    observed = m > 0
    if np.any(observed):
        if y is None:
            raise ValidationError("observations required for flows with m > 0")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (fm.n_r,):
            raise ValidationError("observation vector must have one entry per flow")
        if np.any(~np.isfinite(y[observed])):
            raise ValidationError("observations must be finite where m > 0")
    mean_new = state.mean.copy()
    if np.any(observed):
        gain = np.zeros(fm.n_r)
        gain[observed] = m[observed] / info_new[observed]
        resid = np.where(observed & np.isnan(mean_new), 0.0, mean_new)
        # diffuse prior with an observation: gain is 1, mean becomes y
        mean_new = np.where(observed, resid + gain * (y - resid), mean_new)
        first = observed & (state.info == 0)
        mean_new = np.where(first, y, mean_new)
    return FilterState(info=info_new, mean=mean_new, t=state.t + 1)


def steady_state_info(m, sigma2):
    """Steady-state information of the filter under constant per-period ``m``.

    Unique nonnegative root of sigma2*u^2 - sigma2*m*u - m = 0, evaluated
    as m/2 + sqrt(m^2/4 + m/sigma2) which is immune to the subtractive
    cancellation the textbook quadratic formula suffers at large sigma2.
    Accepts scalars or arrays (broadcast together).
    """
    m = np.asarray(m, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0) or not np.all(np.isfinite(sigma2)):
        raise ValidationError("sigma2 must be finite and > 0 (static parameters have no steady state)")
    if np.any(m < 0):
        raise ValidationError("information must be >= 0")
    out = 0.5 * m + np.sqrt(0.25 * m * m + m / sigma2)
    if out.ndim == 0:
        return float(out)
    return out


def iterate_to_steady_state(fm: FlowModel, m, tol: float = 1e-10,
                            max_iter: int = 10 ** 6) -> np.ndarray:
    """Run the information recursion from the diffuse prior to its limit.

    Iterates info <- info/(1 + sigma2*info) + m until the relative change
    of every flow drops below ``tol``. Exists mainly as an independent
    cross-check of :func:`steady_state_info`; raises
    :class:`ConvergenceError` (carrying the last iterate) if ``max_iter``
    is exhausted.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if m.shape != (fm.n_r,):
        raise ValidationError("information vector must have one entry per flow")
    if np.any(m < 0):
        raise ValidationError("information must be >= 0")
    info = np.zeros(fm.n_r)
    for _ in range(max_iter):
        new = info / (1.0 + fm.sigma2 * info) + m
        denom = np.maximum(np.abs(new), np.finfo(float).tiny)
        if np.all(np.abs(new - info) <= tol * denom):
            return new
        info = new
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations", last_iterate=info
    )
