"""Bisection over candidate shortfall-risk levels, driven by the LMO.

Each iteration halves the interval [alpha, beta] around the minimal
achievable risk: the midpoint gamma_t is handed to the linear minimization
oracle, the returned model's risk is estimated on the held-out half, and the
half-interval that must contain the optimum is kept.  The model of the final
iteration is returned (both branches keep the fresh oracle model).

Interval endpoints are tracked as exact dyadic fractions of the initial
upper bound beta0: fractions with denominator 2^t are exact in binary
floating point for every t used here, so the halving law
beta_t - alpha_t = beta0 * 2^-t holds exactly in the fraction coordinates.
The float endpoints reported in the trace are beta0 times those fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import estimator, lmo
from .lmo import LinearModel, LmoResult, LmoSettings, RegressionDataset
from .utility import UtilityFunction


@dataclass(frozen=True)
class BisectionConfig:
    iterations_T: int
    lam: float
    utility: UtilityFunction
    norm_bound: float | None = None
    estimator_tol: float | None = None  # None: estimator default
    lmo_settings: LmoSettings = field(default_factory=LmoSettings)
    beta0_margin: float = 0.0
    return_best: bool = False  # off by default: return h_T, not best-so-far

    def __post_init__(self):
        if self.iterations_T < 1:
            raise ValueError("iterations_T must be >= 1")
        if not self.utility.strictly_increasing:
            raise ValueError(
                "bisection requires a strictly increasing utility "
                "(hinge has zero left slope at the origin)"
            )


@dataclass(frozen=True)
class TraceRow:
    t: int
    alpha: float
    beta: float
    gamma: float
    gamma_hat: float
    branch: str  # "lower" iff gamma_hat < gamma (strict)
    lmo_objective: float
    lmo_iterations: int
    lmo_grad_norm: float
    weights: np.ndarray
    frac_alpha: float  # exact dyadic interval coordinates in [0, 1]
    frac_beta: float


@dataclass(frozen=True)
class BisectionTrace:
    beta0: float
    rows: tuple[TraceRow, ...]
    final_model: LinearModel
    beta0_margin: float
    exceeded_beta0: bool  # final risk estimate above beta0: initial bound undershot


def split_dataset(
    data: RegressionDataset, shuffle_seed: int | None = None
) -> tuple[RegressionDataset, RegressionDataset]:
    """First-half / second-half index split; optional seeded shuffle first."""
    m = data.m
    idx = np.arange(m)
    if shuffle_seed is not None:
        idx = np.random.Generator(np.random.Philox(int(shuffle_seed))).permutation(m)
    half = m // 2
    return data.rows(idx[:half]), data.rows(idx[half:])


def squared_losses(model: LinearModel, data: RegressionDataset) -> np.ndarray:
    r = model.predict(data.features) - data.targets
    return r * r


def ubsr_of_model(
    model: LinearModel,
    data: RegressionDataset,
    u: UtilityFunction,
    lam: float,
    tol: float | None = None,
) -> estimator.UbsrEstimate:
    """Estimated shortfall risk of the model's squared losses on ``data``."""
    z = squared_losses(model, data)
    prob = estimator.default_problem(z, lam)
    return estimator.estimate_ubsr(z, u, prob, tol)


def train(
    train_half: RegressionDataset,
    estimate_half: RegressionDataset,
    cfg: BisectionConfig,
) -> tuple[LinearModel, BisectionTrace]:
    """Run the level bisection and return the final model with its trace."""
    if train_half.d != estimate_half.d:
        raise ValueError("train and estimate halves must share the feature dimension")
    u = cfg.utility

    zero = LinearModel(np.zeros(train_half.d), cfg.norm_bound)
    beta0 = (
        ubsr_of_model(zero, estimate_half, u, cfg.lam, cfg.estimator_tol).value
        + cfg.beta0_margin
    )

    frac_lo, frac_hi = 0.0, 1.0
    rows: list[TraceRow] = []
    model = zero
    best: tuple[float, LinearModel] | None = None
    for t in range(1, cfg.iterations_T + 1):
        frac_mid = 0.5 * (frac_lo + frac_hi)
        gamma = beta0 * frac_mid
        try:
            res: LmoResult = lmo.solve(
                train_half, u, gamma, cfg.norm_bound, cfg.lmo_settings
            )
            gamma_hat = ubsr_of_model(
                res.model, estimate_half, u, cfg.lam, cfg.estimator_tol
            ).value
        except Exception as err:
            raise RuntimeError(f"bisection iteration {t} failed: {err}") from err
        if gamma_hat < gamma:
            branch = "lower"
            frac_hi = frac_mid
        else:  # ties take the upper branch (strict comparison above)
            branch = "upper"
            frac_lo = frac_mid
        model = res.model
        rows.append(
            TraceRow(
                t=t,
                alpha=beta0 * frac_lo,
                beta=beta0 * frac_hi,
                gamma=gamma,
                gamma_hat=gamma_hat,
                branch=branch,
                lmo_objective=res.objective,
                lmo_iterations=res.iterations,
                lmo_grad_norm=res.grad_norm,
                weights=res.model.weights.copy(),
                frac_alpha=frac_lo,
                frac_beta=frac_hi,
            )
        )
        if best is None or gamma_hat < best[0]:
            best = (gamma_hat, res.model)

    if cfg.return_best and best is not None:
        model = best[1]
    exceeded = bool(rows and rows[-1].gamma_hat > beta0)
    trace = BisectionTrace(
        beta0=beta0,
        rows=tuple(rows),
        final_model=model,
        beta0_margin=cfg.beta0_margin,
        exceeded_beta0=exceeded,
    )
    return model, trace
