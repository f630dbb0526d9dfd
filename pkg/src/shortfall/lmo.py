"""Linear minimization oracle over achievable loss distributions.

For a level gamma the oracle solves

    min_w  sum_i l((y_i - w.x_i)^2 - gamma)       subject to ||w|| <= B3

by projected gradient descent with backtracking line search.  The objective
is convex in w (convex nondecreasing l composed with a convex quadratic), so
the first-order stationary point found here is the global minimum over the
ball.  The objective uses the plain sum over rows; whenever a per-sample
mean is reported it is this sum divided by the row count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .utility import UtilityFunction

logger = logging.getLogger(__name__)

_SUFFICIENT_DECREASE = 1e-4
_MIN_STEP = 1e-20


@dataclass(frozen=True)
class RegressionDataset:
    """Feature matrix [m x d] with targets [m]; all entries finite."""

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("features must be a nonempty m x d matrix")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("targets must be a vector matching the row count")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def bounds(self) -> tuple[float, float]:
        """Advisory data bounds: max feature norm, max |target|."""
        return (
            float(np.linalg.norm(self.features, axis=1).max()),
            float(np.abs(self.targets).max()),
        )

    def rows(self, idx) -> "RegressionDataset":
        return RegressionDataset(self.features[idx], self.targets[idx])


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    norm_bound: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size < 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a nonempty finite vector")
        if self.norm_bound is not None and np.linalg.norm(w) > self.norm_bound + 1e-9:
            raise ValueError("weights exceed the declared norm bound")
        object.__setattr__(self, "weights", w)

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[1] != self.weights.size:
            raise ValueError(
                f"feature dimension {x.shape[1]} does not match weights ({self.weights.size})"
            )
        return x @ self.weights


@dataclass(frozen=True)
class LmoSettings:
    grad_tol: float = 1e-8  # scaled by (1 + |objective|)
    max_iter: int = 50_000


@dataclass(frozen=True)
class LmoResult:
    model: LinearModel
    objective: float
    iterations: int
    grad_norm: float


def _project(w: np.ndarray, bound: float | None) -> np.ndarray:
    if bound is None:
        return w
    nrm = np.linalg.norm(w)
    if nrm <= bound:
        return w
    return w * (bound / nrm)


def surrogate_loss(
    data: RegressionDataset, u: UtilityFunction, gamma: float, model
) -> float:
    """sum_i l((y_i - w.x_i)^2 - gamma) for a LinearModel or weight vector."""
    w = model.weights if isinstance(model, LinearModel) else np.asarray(model, dtype=float).ravel()
    if w.size != data.d:
        raise ValueError(f"weight dimension {w.size} does not match data ({data.d})")
    r = data.targets - data.features @ w
    return float(np.sum(u.value(r * r - gamma)))


def surrogate_gradient(
    data: RegressionDataset, u: UtilityFunction, gamma: float, w: np.ndarray
) -> np.ndarray:
    """Gradient sum_i l'((y_i - w.x_i)^2 - gamma) * 2 r_i * (-x_i)."""
    w = np.asarray(w, dtype=float).ravel()
    r = data.targets - data.features @ w
    coeff = u.derivative(r * r - gamma) * r
    return -2.0 * (data.features.T @ coeff)


def solve(
    data: RegressionDataset,
    u: UtilityFunction,
    gamma: float,
    norm_bound: float | None = None,
    settings: LmoSettings | None = None,
) -> LmoResult:
    """Minimize the surrogate over the (optionally norm-bounded) linear class.

    Starts from the better of w = 0 and the projected least-squares solution,
    then runs projected gradient descent with backtracking (step halved from
    1 until the sufficient-decrease test holds).  Stops once the projected
    gradient norm falls below grad_tol * (1 + |objective|) or at max_iter.
    The returned objective is never above either warm start.
    """
    if settings is None:
        settings = LmoSettings()
    b1, b2 = data.bounds()
    logger.debug("data bounds: max||x||=%.6g, max|y|=%.6g (advisory)", b1, b2)

    def f(w):
        with np.errstate(over="ignore", invalid="ignore"):
            val = surrogate_loss(data, u, gamma, w)
        if not np.isfinite(val):
            raise FloatingPointError(
                f"surrogate loss overflowed at ||w||={np.linalg.norm(w):.3g}, gamma={gamma:.6g}"
            )
        return val

    w = np.zeros(data.d)
    f_w = f(w)
    ls, *_ = np.linalg.lstsq(data.features, data.targets, rcond=None)
    ls = _project(ls, norm_bound)
    f_ls = f(ls)
    if f_ls < f_w:
        w, f_w = ls, f_ls

    grad = surrogate_gradient(data, u, gamma, w)
    pg = w - _project(w - grad, norm_bound)
    pg_norm = float(np.linalg.norm(pg))
    iterations = 0
    while pg_norm > settings.grad_tol * (1.0 + abs(f_w)) and iterations < settings.max_iter:
        step = 1.0
        while True:
            cand = _project(w - step * grad, norm_bound)
            move = cand - w
            f_cand = f(cand)
            if f_cand <= f_w + _SUFFICIENT_DECREASE * float(grad @ move):
                break
            step *= 0.5
            if step < _MIN_STEP:
                cand, f_cand = w, f_w  # no descent direction at float resolution
                break
        if f_cand >= f_w and np.array_equal(cand, w):
            break
        w, f_w = cand, f_cand
        grad = surrogate_gradient(data, u, gamma, w)
        pg = w - _project(w - grad, norm_bound)
        pg_norm = float(np.linalg.norm(pg))
        iterations += 1

    model = LinearModel(w, norm_bound)
    return LmoResult(model, f_w, iterations, pg_norm)
