"""Structural property checks: non-convexity of the risk over distributions,
monotonicity along mixture lines, the mixture-direction derivative formula,
acceptance-set closure under randomization, and Monte-Carlo coverage of the
concentration bounds.

Each check returns a machine-readable report whose details carry every
number the check asserted; a failing check names the violated inequality and
the measured slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimator
from .distributions import (
    DistributionModel,
    Exponential,
    FiniteDiscrete,
    Gaussian,
    Mixture,
    PointMass,
    Uniform,
    l_f_derivative_exact,
    l_f_exact,
    ubsr_exact,
)
from .estimator import SrProblem, TailSpec
from .utility import UtilityFunction, blend, hinge, linear


@dataclass
class VerificationReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "skipped": self.skipped,
            "details": self.details,
        }


def _mix_pair(f1, f2, a: float) -> Mixture:
    return Mixture(((f1, a), (f2, 1.0 - a)))


def check_nonconvexity() -> VerificationReport:
    """The half/half blend of two uniform losses is riskier than the average.

    Uses the hinge utility at threshold 2 with Uniform(0,10), Uniform(10,20):
    the exact values are 10-sqrt(40), 20-sqrt(40) and 20-sqrt(80) for the
    blend, so the risk of the mixture exceeds the mixture of risks.
    """
    u = hinge()
    lam = 2.0
    f1 = Uniform(0.0, 10.0)
    f2 = Uniform(10.0, 20.0)
    sr1 = ubsr_exact(f1, u, lam)
    sr2 = ubsr_exact(f2, u, lam)
    sr_mix = ubsr_exact(_mix_pair(f1, f2, 0.5), u, lam)
    expected = {
        "sr1_expected": 10.0 - math.sqrt(40.0),
        "sr2_expected": 20.0 - math.sqrt(40.0),
        "sr_mix_expected": 20.0 - math.sqrt(80.0),
    }
    gap = sr_mix - 0.5 * (sr1 + sr2)
    closed_ok = (
        abs(sr1 - expected["sr1_expected"]) <= 1e-8
        and abs(sr2 - expected["sr2_expected"]) <= 1e-8
        and abs(sr_mix - expected["sr_mix_expected"]) <= 1e-8
    )
    passed = closed_ok and gap > 0.0
    return VerificationReport(
        "nonconvexity",
        passed,
        {
            "sr1": sr1,
            "sr2": sr2,
            "sr_mix": sr_mix,
            "gap": gap,
            "closed_form_ok": closed_ok,
            **expected,
        },
    )


def check_pseudolinearity(
    f1: DistributionModel,
    f2: DistributionModel,
    u: UtilityFunction,
    lam: float,
    grid: int = 101,
    slack: float = 1e-8,
) -> VerificationReport:
    """Risk along the mixture segment between two laws is monotone in the weight."""
    alphas = np.linspace(0.0, 1.0, grid)
    values = np.array(
        [ubsr_exact(_mix_pair(f1, f2, float(a)), u, lam) for a in alphas]
    )
    diffs = np.diff(values)
    nondecreasing = bool(np.all(diffs >= -slack))
    nonincreasing = bool(np.all(diffs <= slack))
    passed = nondecreasing or nonincreasing
    worst = float(np.min(diffs)) if not nondecreasing else float(np.max(diffs))
    return VerificationReport(
        "pseudolinearity",
        passed,
        {
            "grid": grid,
            "slack": slack,
            "first": float(values[0]),
            "last": float(values[-1]),
            "nondecreasing": nondecreasing,
            "nonincreasing": nonincreasing,
            "worst_violation": 0.0 if passed else worst,
        },
    )


def check_gradient(
    f: DistributionModel,
    f_prime: DistributionModel,
    u: UtilityFunction,
    lam: float,
    eps_grid: tuple[float, ...] = (1e-3, 1e-4, 1e-5),
    rel_tol: float = 1e-3,
    solver_tol: float = 1e-12,
) -> VerificationReport:
    """Mixture-direction derivative of the risk against finite differences.

    The predicted derivative along u = F' - F is
    -(L_{F'}(t*) - L_F(t*)) / L_F'(t*) evaluated at t* = SR[F]; the finite
    difference uses SR[(1-eps) F + eps F'].
    """
    t_star = ubsr_exact(f, u, lam, tol=solver_tol)
    slope = l_f_derivative_exact(f, u, t_star)
    if slope == 0.0:
        return VerificationReport(
            "gradient",
            False,
            {"t_star": t_star, "reason": "level curve is flat at t*; derivative undefined"},
        )
    predicted = -(l_f_exact(f_prime, u, t_star) - l_f_exact(f, u, t_star)) / slope
    fd = {}
    for eps in eps_grid:
        mixed = ubsr_exact(_mix_pair(f_prime, f, float(eps)), u, lam, tol=solver_tol)
        fd[eps] = (mixed - t_star) / eps
    smallest = min(eps_grid)
    scale = max(abs(predicted), 1e-12)
    rel_err = abs(fd[smallest] - predicted) / scale
    passed = rel_err <= rel_tol
    return VerificationReport(
        "gradient",
        passed,
        {
            "t_star": t_star,
            "predicted": predicted,
            "finite_differences": {f"{eps:g}": fd[eps] for eps in eps_grid},
            "rel_err_at_smallest_eps": rel_err,
            "rel_tol": rel_tol,
        },
    )


def check_randomization_invariance(
    f1: DistributionModel,
    f2: DistributionModel,
    u: UtilityFunction,
    lam: float,
    alphas: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 0.9),
    slack: float = 1e-9,
) -> VerificationReport:
    """Acceptable laws stay acceptable under mixing.

    Vacuous (reported as skipped) when either input law is itself
    unacceptable at the threshold.
    """
    sr1 = ubsr_exact(f1, u, lam)
    sr2 = ubsr_exact(f2, u, lam)
    if sr1 > 0.0 or sr2 > 0.0:
        return VerificationReport(
            "randomization_invariance",
            True,
            {"sr1": sr1, "sr2": sr2, "reason": "precondition SR <= 0 not met"},
            skipped=True,
        )
    mix_sr = {float(a): ubsr_exact(_mix_pair(f1, f2, float(a)), u, lam) for a in alphas}
    worst = max(mix_sr.values())
    passed = worst <= slack
    return VerificationReport(
        "randomization_invariance",
        passed,
        {
            "sr1": sr1,
            "sr2": sr2,
            "mixture_sr": {f"{a:g}": v for a, v in mix_sr.items()},
            "worst": worst,
            "slack": slack,
        },
    )


@dataclass(frozen=True)
class TrialRecord:
    n: int
    delta: float
    trial: int
    abs_error: float
    bound: float
    covered: bool


def coverage_slack(delta: float, trials: int) -> float:
    """Monte-Carlo slack keeping the coverage test non-flaky."""
    return 2.0 * math.sqrt(delta * (1.0 - delta) / trials)


def run_concentration_suite(
    tail: TailSpec,
    d: DistributionModel,
    u: UtilityFunction,
    prob: SrProblem,
    n_grid: tuple[int, ...],
    delta_grid: tuple[float, ...],
    trials: int,
    seed: int,
) -> tuple[VerificationReport, list[TrialRecord]]:
    """Empirical coverage of the deviation bound over seeded trials.

    Trial i draws with seed ``seed + i`` (the stream-splitting rule), so the
    suite is order-independent and reproducible.  Coverage per (n, delta)
    must reach 1 - 2*delta minus Monte-Carlo slack; the report also carries
    the log-log slope of the median error against n.
    """
    t_star = ubsr_exact(d, u, prob.lam)
    G = u.lipschitz_G
    bounds = {
        (n, delta): estimator.bound_for(tail, G, prob, n, delta)
        for n in n_grid
        for delta in delta_grid
    }
    errors = np.empty((len(n_grid), trials))
    for trial in range(trials):
        trial_seed = seed + trial
        for i, n in enumerate(n_grid):
            z = d.sample(n, trial_seed)
            est = estimator.estimate_ubsr(z, u, prob)
            errors[i, trial] = abs(est.value - t_star)

    records: list[TrialRecord] = []
    for i, n in enumerate(n_grid):
        for delta in delta_grid:
            b = bounds[(n, delta)]
            for trial in range(trials):
                err = float(errors[i, trial])
                records.append(TrialRecord(n, delta, trial, err, b, err <= b))

    cells = []
    all_covered = True
    for i, n in enumerate(n_grid):
        for delta in delta_grid:
            b = bounds[(n, delta)]
            cov = float(np.mean(errors[i] <= b))
            threshold = 1.0 - 2.0 * delta - coverage_slack(delta, trials)
            ok = cov >= threshold
            all_covered = all_covered and ok
            cells.append(
                {
                    "n": n,
                    "delta": delta,
                    "bound": b,
                    "coverage": cov,
                    "threshold": threshold,
                    "ok": ok,
                }
            )

    medians = {int(n): float(np.median(errors[i])) for i, n in enumerate(n_grid)}
    slope = None
    if len(n_grid) >= 2:
        slope = float(
            np.polyfit(np.log(list(n_grid)), np.log(list(medians.values())), 1)[0]
        )

    report = VerificationReport(
        "concentration",
        all_covered,
        {
            "tail": tail.spec(),
            "distribution": d.spec(),
            "utility": u.spec(),
            "t_star": t_star,
            "trials": trials,
            "seed": seed,
            "cells": cells,
            "median_abs_error": medians,
            "median_error_slope": slope,
        },
    )
    return report, records


def random_distribution(rng: np.random.Generator, allow_mixture: bool = True) -> DistributionModel:
    """A tame random law for randomized property checks."""
    kinds = ["uniform", "gauss", "exp", "point", "discrete"]
    if allow_mixture:
        kinds.append("mix")
    kind = kinds[rng.integers(len(kinds))]
    if kind == "uniform":
        lo = float(rng.uniform(-4.0, 3.0))
        return Uniform(lo, lo + float(rng.uniform(0.5, 6.0)))
    if kind == "gauss":
        return Gaussian(float(rng.uniform(-3.0, 3.0)), float(rng.uniform(0.3, 2.5)))
    if kind == "exp":
        return Exponential(float(rng.uniform(0.3, 3.0)))
    if kind == "point":
        return PointMass(float(rng.uniform(-4.0, 4.0)))
    if kind == "discrete":
        k = int(rng.integers(2, 5))
        vals = tuple(float(v) for v in rng.uniform(-4.0, 4.0, size=k))
        raw = rng.uniform(0.2, 1.0, size=k)
        probs = tuple(float(p) for p in raw / raw.sum())
        return FiniteDiscrete(vals, probs)
    c1 = random_distribution(rng, allow_mixture=False)
    c2 = random_distribution(rng, allow_mixture=False)
    w = float(rng.uniform(0.2, 0.8))
    return Mixture(((c1, w), (c2, 1.0 - w)))


def default_checks(seed: int = 0, trials: int = 200, pairs: int = 20) -> list[VerificationReport]:
    """The battery run by ``verify --check all`` with CLI-scale defaults."""
    rng = np.random.Generator(np.random.Philox(seed))
    reports = [check_nonconvexity()]

    utilities = [hinge(), linear(), blend()]
    pseudo_ok = True
    worst_detail = None
    for k in range(pairs):
        f1 = random_distribution(rng)
        f2 = random_distribution(rng)
        u = utilities[k % len(utilities)]
        lam = float(rng.uniform(0.2, 3.0))
        rep = check_pseudolinearity(f1, f2, u, lam)
        if not rep.passed:
            pseudo_ok = False
            worst_detail = {"pair": k, **rep.details}
            break
    reports.append(
        VerificationReport(
            "pseudolinearity_random_pairs",
            pseudo_ok,
            {"pairs": pairs, "violation": worst_detail},
        )
    )

    grad_ok = True
    grad_detail = None
    for k in range(pairs):
        f = random_distribution(rng)
        f_prime = random_distribution(rng)
        u = blend(a=float(rng.uniform(0.3, 0.9)), tau=float(rng.uniform(0.5, 2.0)))
        lam = float(rng.uniform(0.3, 2.0))
        rep = check_gradient(f, f_prime, u, lam)
        if not rep.passed:
            grad_ok = False
            grad_detail = {"triple": k, **rep.details}
            break
    reports.append(
        VerificationReport("gradient_random_triples", grad_ok, {"triples": pairs, "violation": grad_detail})
    )

    reports.append(
        check_randomization_invariance(
            Uniform(0.0, 10.0), Uniform(0.0, 4.0), hinge(), lam=6.0
        )
    )

    d = Uniform(0.0, 10.0)
    u = hinge()
    prob = estimator.certify_problem(d, u, 2.0, 0.0, 10.0)
    report, _ = run_concentration_suite(
        TailSpec("subgauss", 5.0), d, u, prob, (100, 1000), (0.05, 0.1), trials, seed
    )
    reports.append(report)
    return reports
