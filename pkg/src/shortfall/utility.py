"""Convex nondecreasing utility functions with exact derivatives and constants.

Three families are supported:

* ``linear``   l(x) = x
* ``hinge``    l(x) = max(0, x)
* ``blend``    l(x) = a*x + (1-a)*h_tau(x)  with a in (0,1], tau > 0, where
  h_tau is the quadratic smoothing of the hinge: 0 below -tau,
  (x+tau)^2/(4*tau) on [-tau, tau], x above tau.

All three are convex, nondecreasing and 1-Lipschitz.  ``hinge`` is not
strictly increasing (its left slope at 0 is zero); it is accepted by the
estimator and verification routines but rejected by the bisection optimizer,
which needs a strictly positive slope at the origin.  At the hinge kink the
derivative is reported as the right derivative 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLEND_DEFAULT_A = 0.5
BLEND_DEFAULT_TAU = 1.0


@dataclass(frozen=True)
class UtilityFunction:
    kind: str  # "linear" | "hinge" | "blend"
    a: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "hinge", "blend"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "blend":
            if not 0.0 < self.a <= 1.0:
                raise ValueError("blend weight a must lie in (0, 1]")
            if self.tau <= 0.0:
                raise ValueError("blend width tau must be positive")

    @property
    def lipschitz_G(self) -> float:
        """Global Lipschitz constant (the maximal slope, 1 for all families)."""
        return 1.0

    @property
    def slope_at_zero_U(self) -> float:
        """Slope at the origin; hinge reports the right derivative 1."""
        if self.kind == "blend":
            return self.a + (1.0 - self.a) * 0.5
        return 1.0

    @property
    def strictly_increasing(self) -> bool:
        return self.kind != "hinge"

    def value(self, x):
        """Evaluate l(x); accepts scalars or arrays."""
        xa = np.asarray(x, dtype=float)
        if self.kind == "linear":
            out = xa
        elif self.kind == "hinge":
            out = np.maximum(xa, 0.0)
        else:
            quad = (xa + self.tau) ** 2 / (4.0 * self.tau)
            h = np.where(xa <= -self.tau, 0.0, np.where(xa >= self.tau, xa, quad))
            out = self.a * xa + (1.0 - self.a) * h
        return float(out) if np.isscalar(x) or xa.ndim == 0 else out

    __call__ = value

    def derivative(self, x):
        """Evaluate l'(x); the hinge kink returns the right derivative 1."""
        xa = np.asarray(x, dtype=float)
        if self.kind == "linear":
            out = np.ones_like(xa)
        elif self.kind == "hinge":
            out = np.where(xa >= 0.0, 1.0, 0.0)
        else:
            hprime = np.clip((xa + self.tau) / (2.0 * self.tau), 0.0, 1.0)
            out = self.a + (1.0 - self.a) * hprime
        return float(out) if np.isscalar(x) or xa.ndim == 0 else out

    def kink_points(self) -> tuple[float, ...]:
        """Abscissae where l' is discontinuous or only piecewise smooth."""
        if self.kind == "linear":
            return ()
        if self.kind == "hinge":
            return (0.0,)
        return (-self.tau, self.tau)

    def spec(self) -> str:
        """Round-trippable grammar string (see parse_utility)."""
        if self.kind == "blend":
            return f"blend:a={self.a!r},tau={self.tau!r}"
        return self.kind


def linear() -> UtilityFunction:
    return UtilityFunction("linear")


def hinge() -> UtilityFunction:
    return UtilityFunction("hinge")


def blend(a: float = BLEND_DEFAULT_A, tau: float = BLEND_DEFAULT_TAU) -> UtilityFunction:
    return UtilityFunction("blend", a=a, tau=tau)


def parse_utility(text: str) -> UtilityFunction:
    """Parse the CLI/JSON utility grammar: linear | hinge | blend:a=<r>,tau=<r>.

    Bare ``blend`` selects the default a=0.5, tau=1 training utility.
    """
    text = text.strip()
    if text == "linear":
        return linear()
    if text == "hinge":
        return hinge()
    if text == "blend":
        return blend()
    if text.startswith("blend:"):
        params = {"a": BLEND_DEFAULT_A, "tau": BLEND_DEFAULT_TAU}
        for part in text[len("blend:"):].split(","):
            if "=" not in part:
                raise ValueError(f"bad blend parameter {part!r}; grammar is blend:a=<r>,tau=<r>")
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in params:
                raise ValueError(f"unknown blend parameter {key!r}; grammar is blend:a=<r>,tau=<r>")
            params[key] = float(val)
        return blend(**params)
    raise ValueError(
        f"bad utility spec {text!r}; grammar is linear | hinge | blend:a=<r>,tau=<r>"
    )
