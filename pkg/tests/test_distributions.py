import math

import numpy as np
import pytest

from oracles import quad_l_f, quad_ubsr
from shortfall.distributions import (
    EmptyAcceptanceSetError,
    Exponential,
    FiniteDiscrete,
    Gaussian,
    Mixture,
    PointMass,
    SampleVector,
    Uniform,
    l_f_derivative_exact,
    l_f_exact,
    parse_distribution,
    ubsr_exact,
)
from shortfall.utility import blend, hinge, linear

HALF_HALF_MIX = Mixture(((Uniform(0.0, 10.0), 0.5), (Uniform(10.0, 20.0), 0.5)))

SOME_MODELS = [
    Uniform(-2.0, 3.0),
    Gaussian(1.0, 2.0),
    Exponential(0.7),
    PointMass(1.5),
    FiniteDiscrete((-1.0, 0.5, 4.0), (0.2, 0.5, 0.3)),
    Mixture(((Gaussian(0.0, 1.0), 0.3), (Exponential(2.0), 0.7))),
]
SOME_UTILITIES = [linear(), hinge(), blend(), blend(a=0.4, tau=0.3)]


# ------------------------------------------------------------------ sampling

def test_point_mass_sample():
    z = PointMass(4.0).sample(3, seed=123)
    assert list(z.values) == [4.0, 4.0, 4.0]
    assert z.seed == 123


def test_sampling_deterministic_and_seed_sensitive():
    d = Mixture(((Uniform(0.0, 1.0), 0.5), (Gaussian(5.0, 1.0), 0.5)))
    a = d.sample(1000, seed=7).values
    b = d.sample(1000, seed=7).values
    c = d.sample(1000, seed=8).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_uniform_sample_mean():
    z = Uniform(0.0, 10.0).sample(10 ** 6, seed=1)
    # CLT tolerance 3 * (10/sqrt(12)) / sqrt(n) ~= 0.0087 < 0.02
    assert abs(z.values.mean() - 5.0) <= 0.02


def test_mixture_sample_fractions():
    d = Mixture(((PointMass(0.0), 0.5), (PointMass(1.0), 0.5)))
    z = d.sample(10 ** 5, seed=7)
    assert abs(z.values.mean() - 0.5) <= 0.01


def test_sample_vector_validation():
    with pytest.raises(ValueError):
        SampleVector(np.array([1.0, np.nan]), seed=0)
    with pytest.raises(ValueError):
        SampleVector(np.array([]), seed=0)
    with pytest.raises(ValueError):
        Uniform(0.0, 10.0).sample(0, seed=1)


# ------------------------------------------------------------------ L_F

def test_l_f_closed_form_values():
    assert l_f_exact(Uniform(0.0, 10.0), hinge(), 4.0) == pytest.approx(1.8, abs=1e-12)
    assert l_f_exact(PointMass(3.0), linear(), 1.0) == pytest.approx(2.0, abs=1e-15)
    assert l_f_exact(HALF_HALF_MIX, hinge(), 12.0) == pytest.approx(1.6, abs=1e-12)


@pytest.mark.parametrize("d", SOME_MODELS)
@pytest.mark.parametrize("u", SOME_UTILITIES)
def test_l_f_matches_quadrature(d, u):
    for t in (-3.0, -0.5, 0.0, 0.8, 2.5, 6.0):
        assert l_f_exact(d, u, t) == pytest.approx(quad_l_f(d, u, t), abs=1e-9)


@pytest.mark.parametrize("d", SOME_MODELS)
@pytest.mark.parametrize("u", SOME_UTILITIES)
def test_l_f_derivative_matches_finite_differences(d, u):
    h = 1e-6
    for t in (-2.3, 0.4, 1.9):
        if any(abs(t - k) < 1e-3 for k in u.kink_points()):
            continue
        fd = (l_f_exact(d, u, t + h) - l_f_exact(d, u, t - h)) / (2.0 * h)
        assert l_f_derivative_exact(d, u, t) == pytest.approx(fd, abs=5e-6)


def test_l_f_monotone_in_t():
    grid = np.linspace(-5.0, 25.0, 61)
    for u in SOME_UTILITIES:
        vals = [l_f_exact(HALF_HALF_MIX, u, t) for t in grid]
        diffs = np.diff(vals)
        assert np.all(diffs <= 1e-12)
        if u.strictly_increasing:
            assert np.all(diffs < 0.0)


def test_l_f_mixture_linearity():
    comps = [Uniform(0.0, 10.0), Gaussian(2.0, 1.0), Exponential(1.0)]
    weights = [0.5, 0.3, 0.2]
    mix = Mixture(tuple(zip(comps, weights)))
    for u in SOME_UTILITIES:
        for t in (-1.0, 0.5, 3.0):
            direct = sum(w * l_f_exact(c, u, t) for c, w in zip(comps, weights))
            assert l_f_exact(mix, u, t) == pytest.approx(direct, abs=1e-12)


# ------------------------------------------------------------------ exact risk

def test_ubsr_closed_form_values():
    assert ubsr_exact(Uniform(0.0, 10.0), hinge(), 2.0) == pytest.approx(
        10.0 - math.sqrt(40.0), abs=1e-10
    )
    assert ubsr_exact(Uniform(10.0, 20.0), hinge(), 2.0) == pytest.approx(
        20.0 - math.sqrt(40.0), abs=1e-10
    )
    assert ubsr_exact(HALF_HALF_MIX, hinge(), 2.0) == pytest.approx(
        20.0 - math.sqrt(80.0), abs=1e-9
    )
    for c in (-2.0, 0.0, 5.0):
        assert ubsr_exact(PointMass(c), linear(), 1.5) == pytest.approx(c - 1.5, abs=1e-15)


@pytest.mark.parametrize("d", SOME_MODELS)
@pytest.mark.parametrize("u", SOME_UTILITIES)
def test_ubsr_matches_quadrature_oracle(d, u):
    lam = 0.8
    assert ubsr_exact(d, u, lam) == pytest.approx(quad_ubsr(d, u, lam), abs=1e-6)


def test_ubsr_infimum_on_flat_segments():
    d = FiniteDiscrete((0.0, 1.0, 3.0), (0.25, 0.5, 0.25))
    # hinge tail hits 0 exactly at the largest atom and stays there
    assert ubsr_exact(d, hinge(), 0.0) == pytest.approx(3.0, abs=1e-9)
    assert ubsr_exact(Uniform(2.0, 5.0), hinge(), 0.0) == pytest.approx(5.0, abs=1e-12)


def test_ubsr_empty_acceptance_set():
    with pytest.raises(EmptyAcceptanceSetError):
        ubsr_exact(Uniform(0.0, 10.0), hinge(), -1.0)
    with pytest.raises(EmptyAcceptanceSetError):
        ubsr_exact(Exponential(1.0), hinge(), 0.0)


def test_exponential_hinge_closed_form_branches():
    d = Exponential(2.0)
    # tail branch: exp(-2 t)/2 = lam
    assert ubsr_exact(d, hinge(), 0.1) == pytest.approx(-math.log(0.2) / 2.0, abs=1e-12)
    # linear branch: mean - lam for lam >= mean
    assert ubsr_exact(d, hinge(), 2.0) == pytest.approx(0.5 - 2.0, abs=1e-12)


def test_monte_carlo_matches_l_f():
    d = Mixture(((Uniform(0.0, 10.0), 0.6), (Exponential(0.5), 0.4)))
    u = blend()
    t = 1.5
    exact = l_f_exact(d, u, t)
    n = 20000
    failures = 0
    seeds = range(40)
    for seed in seeds:
        z = d.sample(n, seed)
        emp = float(np.mean(u.value(z.values - t)))
        tol = 4.0 * u.lipschitz_G * z.values.std() / math.sqrt(n)
        if abs(emp - exact) > tol:
            failures += 1
    assert failures <= len(seeds) * 0.05


# ------------------------------------------------------------------ grammar

def test_parse_round_trip():
    for d in SOME_MODELS[:5]:
        assert parse_distribution(d.spec()) == d
    mix = parse_distribution("mix:0.5*uniform:0,10|0.5*uniform:10,20")
    assert mix == HALF_HALF_MIX
    assert parse_distribution("discrete:1:0.5,2:0.5") == FiniteDiscrete((1.0, 2.0), (0.5, 0.5))


@pytest.mark.parametrize(
    "bad",
    [
        "triangle:0,1",
        "uniform:5,1",
        "gauss:0,-1",
        "exp:0",
        "discrete:1:0.4,2:0.4",
        "mix:0.5*point:0|0.6*point:1",
        "discrete:1,2",
    ],
)
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_distribution(bad)
