"""Monotone crossing localisation shared by the exact and sample-based solvers.

Both the analytic shortfall-risk value and its sample estimate are the
leftmost point where a nonincreasing function drops to (or below) zero.
Bisection on the predicate f(t) <= 0 converges to that infimum even when the
function has flat segments at the zero level, which plain root finding on
f(t) == 0 would not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

EXPANSION_CAP = 2.0 ** 60


class BracketExpansionError(RuntimeError):
    """Raised when symmetric doubling cannot produce a sign change."""

    def __init__(self, message: str, always_positive: bool):
        super().__init__(message)
        # True: f > 0 everywhere up to the cap (no acceptable t);
        # False: f <= 0 everywhere up to the cap (infimum unbounded below).
        self.always_positive = always_positive


@dataclass(frozen=True)
class CrossingResult:
    root: float
    iterations: int
    bracket: tuple[float, float]  # post-expansion bracket actually bisected
    expanded: bool
    f_at_root: float


def leftmost_crossing(
    f: Callable[[float], float],
    lo: float = -1.0,
    hi: float = 1.0,
    tol: float = 1e-10,
    cap: float = EXPANSION_CAP,
) -> CrossingResult:
    """Smallest t with f(t) <= 0, for nonincreasing f, to bracket width tol.

    The initial bracket is expanded by symmetric doubling until
    f(lo) > 0 >= f(hi); expansion beyond ``cap`` raises
    BracketExpansionError.
    """
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got [{lo}, {hi}]")
    f_lo = f(lo)
    f_hi = f(hi)
    expanded = False
    width = hi - lo
    while f_lo <= 0.0 or f_hi > 0.0:
        if width > cap or max(abs(lo), abs(hi)) > cap:
            if f_hi > 0.0:
                raise BracketExpansionError(
                    f"f(t) > 0 for all t up to {hi:.6g}: no acceptable level exists",
                    always_positive=True,
                )
            raise BracketExpansionError(
                f"f(t) <= 0 for all t down to {lo:.6g}: crossing unbounded below",
                always_positive=False,
            )
        lo -= width
        hi += width
        width *= 2.0
        expanded = True
        f_lo = f(lo)
        f_hi = f(hi)
    bracket = (lo, hi)
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # float resolution exhausted
            break
        f_mid = f(mid)
        if f_mid <= 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo = mid
        iterations += 1
    return CrossingResult(hi, iterations, bracket, expanded, f_hi)
