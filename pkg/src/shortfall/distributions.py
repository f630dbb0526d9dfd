"""Analytic distribution models with exact tail functionals and seeded sampling.

Every model computes L_F(t) = E[l(Z - t)] in closed form.  For the linear and
hinge utilities this is elementary; for the smooth hinge blend it reduces to
restricted moments of Z over the smoothing window [t - tau, t + tau], which
are available in closed form for every supported kind (no quadrature).

Sampling uses numpy's Philox counter-based 64-bit generator; a draw is fully
determined by (model, n, seed).  Parallel experiments split streams by the
rule "trial i uses seed = base_seed + i".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rootfind import BracketExpansionError, leftmost_crossing
from .utility import UtilityFunction

RNG_IDENTITY = "numpy-philox4x64"

_WEIGHT_TOL = 1e-12


class EmptyAcceptanceSetError(RuntimeError):
    """L_F(t) stays above the threshold for every t up to the expansion cap."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SampleVector:
    """An i.i.d. sample with the seed that produced it (None if file-loaded)."""

    values: np.ndarray
    seed: int | None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("sample must be a nonempty 1-d vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sample contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


def as_values(z) -> np.ndarray:
    """Accept a SampleVector or a plain array-like of sample values."""
    vals = np.asarray(getattr(z, "values", z), dtype=float)
    if vals.ndim != 1 or vals.size < 1:
        raise ValueError("sample must be a nonempty 1-d vector")
    return vals


class DistributionModel:
    """Base class; concrete kinds implement draws, means and moment slices."""

    def sample(self, n: int, seed: int) -> SampleVector:
        if n < 1:
            raise ValueError("sample size must be >= 1")
        rng = make_rng(seed)
        return SampleVector(self._draw(rng, int(n)), int(seed))

    def _draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        m0, m1, m2 = self.partial_moments(-math.inf, math.inf)
        return m2 - m1 * m1

    def partial_moments(self, lo: float, hi: float) -> tuple[float, float, float]:
        """(mass, first, second moment) of Z restricted to [lo, hi]."""
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(DistributionModel):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform requires lo < hi")

    def _draw(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def partial_moments(self, lo, hi):
        a = max(lo, self.lo)
        b = min(hi, self.hi)
        if b <= a:
            return 0.0, 0.0, 0.0
        dens = 1.0 / (self.hi - self.lo)
        return (
            (b - a) * dens,
            0.5 * (b * b - a * a) * dens,
            (b ** 3 - a ** 3) / 3.0 * dens,
        )

    def spec(self):
        return f"uniform:{self.lo!r},{self.hi!r}"


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _x_pdf(x: float) -> float:
    # x * phi(x), with the x = +-inf limit taken to 0
    if math.isinf(x):
        return 0.0
    return x * _norm_pdf(x)


@dataclass(frozen=True)
class Gaussian(DistributionModel):
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("gaussian requires sigma > 0")

    def _draw(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)

    def mean(self):
        return self.mu

    def partial_moments(self, lo, hi):
        a = lo if math.isinf(lo) else (lo - self.mu) / self.sigma
        b = hi if math.isinf(hi) else (hi - self.mu) / self.sigma
        if b <= a:
            return 0.0, 0.0, 0.0
        ca = 0.0 if a == -math.inf else _norm_cdf(a)
        cb = 1.0 if b == math.inf else _norm_cdf(b)
        pa = 0.0 if math.isinf(a) else _norm_pdf(a)
        pb = 0.0 if math.isinf(b) else _norm_pdf(b)
        m0 = cb - ca
        s1 = pa - pb                      # E[S; a<=S<=b] for standard S
        s2 = m0 + _x_pdf(a) - _x_pdf(b)   # E[S^2; a<=S<=b]
        m1 = self.mu * m0 + self.sigma * s1
        m2 = self.mu ** 2 * m0 + 2.0 * self.mu * self.sigma * s1 + self.sigma ** 2 * s2
        return m0, m1, m2

    def spec(self):
        return f"gauss:{self.mu!r},{self.sigma!r}"


@dataclass(frozen=True)
class Exponential(DistributionModel):
    rate: float

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("exponential requires rate > 0")

    def _draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)

    def mean(self):
        return 1.0 / self.rate

    def _tail_terms(self, z: float) -> tuple[float, float, float]:
        # antiderivative values -F_k(z) with F_k(z) -> 0 as z -> inf
        if math.isinf(z):
            return 0.0, 0.0, 0.0
        r = self.rate
        e = math.exp(-r * z)
        return e, (z + 1.0 / r) * e, (z * z + 2.0 * z / r + 2.0 / (r * r)) * e

    def partial_moments(self, lo, hi):
        a = max(lo, 0.0)
        b = hi
        if b <= a:
            return 0.0, 0.0, 0.0
        ta = self._tail_terms(a)
        tb = self._tail_terms(b)
        return ta[0] - tb[0], ta[1] - tb[1], ta[2] - tb[2]

    def spec(self):
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class PointMass(DistributionModel):
    z: float

    def _draw(self, rng, n):
        return np.full(n, float(self.z))

    def mean(self):
        return float(self.z)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([self.z], dtype=float), np.array([1.0])

    def partial_moments(self, lo, hi):
        if lo <= self.z <= hi:
            return 1.0, self.z, self.z * self.z
        return 0.0, 0.0, 0.0

    def spec(self):
        return f"point:{self.z!r}"


@dataclass(frozen=True)
class FiniteDiscrete(DistributionModel):
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 1 or len(self.values) != len(self.probs):
            raise ValueError("discrete law needs matching nonempty values/probs")
        if any(p < 0.0 for p in self.probs):
            raise ValueError("discrete probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > _WEIGHT_TOL:
            raise ValueError("discrete probabilities must sum to 1")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def _draw(self, rng, n):
        return rng.choice(np.asarray(self.values), size=n, p=np.asarray(self.probs))

    def mean(self):
        return float(np.dot(self.values, self.probs))

    def atoms(self):
        return np.asarray(self.values, dtype=float), np.asarray(self.probs, dtype=float)

    def partial_moments(self, lo, hi):
        v, p = self.atoms()
        mask = (v >= lo) & (v <= hi)
        return (
            float(p[mask].sum()),
            float((p[mask] * v[mask]).sum()),
            float((p[mask] * v[mask] ** 2).sum()),
        )

    def spec(self):
        return "discrete:" + ",".join(f"{v!r}:{p!r}" for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class Mixture(DistributionModel):
    components: tuple[tuple[DistributionModel, float], ...]

    def __post_init__(self):
        comps = tuple((c, float(w)) for c, w in self.components)
        if len(comps) < 1:
            raise ValueError("mixture needs at least one component")
        if any(w < 0.0 for _, w in comps):
            raise ValueError("mixture weights must be nonnegative")
        if abs(sum(w for _, w in comps) - 1.0) > _WEIGHT_TOL:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    def _draw(self, rng, n):
        weights = np.array([w for _, w in self.components])
        idx = rng.choice(len(self.components), size=n, p=weights)
        out = np.empty(n)
        for k, (comp, _) in enumerate(self.components):
            mask = idx == k
            cnt = int(mask.sum())
            if cnt:
                out[mask] = comp._draw(rng, cnt)
        return out

    def mean(self):
        return sum(w * c.mean() for c, w in self.components)

    def partial_moments(self, lo, hi):
        m0 = m1 = m2 = 0.0
        for comp, w in self.components:
            c0, c1, c2 = comp.partial_moments(lo, hi)
            m0 += w * c0
            m1 += w * c1
            m2 += w * c2
        return m0, m1, m2

    def spec(self):
        return "mix:" + "|".join(f"{w!r}*{c.spec()}" for c, w in self.components)


def mixture(*components: tuple[DistributionModel, float]) -> Mixture:
    return Mixture(tuple(components))


def l_f_exact(d: DistributionModel, u: UtilityFunction, t: float) -> float:
    """L_F(t) = E[l(Z - t)], exactly.

    Mixtures reduce by linearity of L_F in F; discrete laws by direct
    summation; continuous kinds via restricted moments.
    """
    if isinstance(d, Mixture):
        return sum(w * l_f_exact(c, u, t) for c, w in d.components)
    if isinstance(d, (PointMass, FiniteDiscrete)):
        v, p = d.atoms()
        return float(np.dot(p, u.value(v - t)))
    if u.kind == "linear":
        return d.mean() - t
    if u.kind == "hinge":
        m0, m1, _ = d.partial_moments(t, math.inf)
        return m1 - t * m0
    # blend: a*(mean - t) + (1-a)*E[h_tau(Z - t)]
    a, tau = u.a, u.tau
    left = t - tau
    right = t + tau
    q0, q1, q2 = d.partial_moments(left, right)
    r0, r1, _ = d.partial_moments(right, math.inf)
    quad = (q2 - 2.0 * left * q1 + left * left * q0) / (4.0 * tau)
    lin = r1 - t * r0
    return a * (d.mean() - t) + (1.0 - a) * (quad + lin)


def l_f_derivative_exact(d: DistributionModel, u: UtilityFunction, t: float) -> float:
    """d/dt L_F(t) = -E[l'(Z - t)], exactly (right derivative at kinks)."""
    if isinstance(d, Mixture):
        return sum(w * l_f_derivative_exact(c, u, t) for c, w in d.components)
    if isinstance(d, (PointMass, FiniteDiscrete)):
        v, p = d.atoms()
        return -float(np.dot(p, u.derivative(v - t)))
    if u.kind == "linear":
        return -1.0
    if u.kind == "hinge":
        m0, _, _ = d.partial_moments(t, math.inf)
        return -m0
    a, tau = u.a, u.tau
    left = t - tau
    right = t + tau
    q0, q1, _ = d.partial_moments(left, right)
    r0, _, _ = d.partial_moments(right, math.inf)
    ramp = (q1 - left * q0) / (2.0 * tau)
    return -(a + (1.0 - a) * (r0 + ramp))


def _hinge_closed_form(d: DistributionModel, lam: float) -> float | None:
    """Closed-form inf{t : E[(Z-t)+] <= lam} for the kinds that admit one."""
    if lam < 0.0:
        raise EmptyAcceptanceSetError(
            "hinge tail expectation is nonnegative; no level meets a negative threshold"
        )
    if isinstance(d, PointMass):
        return d.z - lam
    if isinstance(d, Uniform):
        span = d.hi - d.lo
        if lam == 0.0:
            return d.hi
        if lam <= 0.5 * span:
            return d.hi - math.sqrt(2.0 * lam * span)
        return d.mean() - lam
    if isinstance(d, Exponential):
        if lam == 0.0:
            raise EmptyAcceptanceSetError(
                "exponential hinge tail is positive for every level"
            )
        if lam <= 1.0 / d.rate:
            return -math.log(lam * d.rate) / d.rate
        return 1.0 / d.rate - lam
    return None


def ubsr_exact(
    d: DistributionModel,
    u: UtilityFunction,
    lam: float,
    tol: float = 1e-10,
) -> float:
    """inf{t : L_F(t) <= lam}; closed form where available, else bisection.

    Bisection brackets expand by doubling from [-1, 1]; when L_F has a flat
    segment at the threshold (possible under hinge) the leftmost crossing is
    returned.
    """
    if u.kind == "linear":
        return d.mean() - lam
    if u.kind == "hinge":
        closed = _hinge_closed_form(d, lam)
        if closed is not None:
            return closed
    try:
        res = leftmost_crossing(lambda t: l_f_exact(d, u, t) - lam, tol=tol)
    except BracketExpansionError as err:
        if err.always_positive:
            raise EmptyAcceptanceSetError(str(err)) from err
        raise
    return res.root


_GRAMMAR = "uniform:lo,hi | gauss:mu,sigma | exp:rate | point:z | discrete:v1:p1,... | mix:w1*<spec>|w2*<spec>"


def parse_distribution(text: str) -> DistributionModel:
    """Parse the CLI/JSON distribution grammar.

    Mixture components are split on top-level '|'; nested mixtures are not
    expressible in the string grammar (construct them programmatically).
    """
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "uniform":
        lo, hi = (float(p) for p in rest.split(","))
        return Uniform(lo, hi)
    if head == "gauss":
        mu, sigma = (float(p) for p in rest.split(","))
        return Gaussian(mu, sigma)
    if head == "exp":
        return Exponential(float(rest))
    if head == "point":
        return PointMass(float(rest))
    if head == "discrete":
        values, probs = [], []
        for pair in rest.split(","):
            v, _, p = pair.partition(":")
            if not p:
                raise ValueError(f"bad discrete atom {pair!r}; grammar is {_GRAMMAR}")
            values.append(float(v))
            probs.append(float(p))
        return FiniteDiscrete(tuple(values), tuple(probs))
    if head == "mix":
        comps = []
        for part in rest.split("|"):
            w, sep, sub = part.partition("*")
            if not sep:
                raise ValueError(f"bad mixture component {part!r}; grammar is {_GRAMMAR}")
            comps.append((parse_distribution(sub), float(w)))
        return Mixture(tuple(comps))
    raise ValueError(f"bad distribution spec {text!r}; grammar is {_GRAMMAR}")
