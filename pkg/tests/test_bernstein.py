import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpclt import bernstein as B
from mpclt.errors import DomainError
from mpclt.functions import builtin, constant
from mpclt.mp_core import MPModel


def unit_map(eps=0.1):
    # a_l = eps, b_r = 1 - eps gives L = 1, c = 0: u = x
    return B.AffineMap(eps, 1.0 - eps, eps)


def direct_sum(coefs, u):
    m = len(coefs) - 1
    return sum(c * math.comb(m, k) * u**k * (1 - u) ** (m - k) for k, c in enumerate(coefs))


@pytest.fixture
def interval():
    m = MPModel(0.25)
    return B.default_interval(m.a, m.b)


def test_affine_map_constants():
    amap = B.AffineMap(0.2, 2.5, 0.25)
    assert amap.forward(0.2) == pytest.approx(0.25, abs=1e-15)
    assert amap.forward(2.5) == pytest.approx(0.75, abs=1e-15)
    assert amap.inverse(amap.forward(1.3)) == pytest.approx(1.3)
    lo, hi = amap.sample_range
    assert amap.forward(lo) == pytest.approx(0.0, abs=1e-15)
    assert amap.forward(hi) == pytest.approx(1.0)
    m = unit_map()
    assert m.L == pytest.approx(1.0) and m.c == pytest.approx(0.0, abs=1e-16)


@pytest.mark.parametrize("kwargs", [dict(a_l=1.0, b_r=1.0, eps=0.2), dict(a_l=0.1, b_r=1.0, eps=0.5),
                                    dict(a_l=0.1, b_r=1.0, eps=0.0)])
def test_affine_map_rejects(kwargs):
    with pytest.raises(DomainError):
        B.AffineMap(**kwargs)


def test_default_interval():
    a_l, b_r = B.default_interval(0.25, 2.25)
    assert 0 < a_l < 0.25 and b_r > 2.25
    with pytest.raises(DomainError):
        B.default_interval(0.0, 4.0)


@pytest.mark.parametrize("n,m", [(2, 1), (1000, 9), (1024, 9), (10**6, 89)])
def test_default_degree(n, m):
    assert B.default_degree(n) == m


@given(st.integers(2, 10**7))
@settings(max_examples=200)
def test_default_degree_is_floor(n):
    m = B.default_degree(n)
    assert m**40 <= n**13 < (m + 1) ** 40
    assert B.default_degree(n + 1) >= m


def test_default_degree_rejects_small():
    with pytest.raises(DomainError):
        B.default_degree(1)


@pytest.mark.parametrize("m", [1, 5, 40])
def test_constants_reproduced(m, interval):
    f = B.build(constant(2.5), *interval, 0.25, m)
    x = np.linspace(*interval, 50)
    assert np.max(np.abs(f(x) - 2.5)) <= 1e-14


@pytest.mark.parametrize("m", [1, 3, 64])
def test_affine_functions_exact(m, interval):
    f = builtin("poly1")
    fm = B.build(f, *interval, 0.25, m)
    x = np.linspace(*interval, 50)
    assert np.max(np.abs(fm(x) - x)) <= 1e-13
    assert np.max(np.abs(B.correction(f, *interval, 0.25, m)(x))) == 0.0


@pytest.mark.parametrize("m", [1, 2, 7, 30])
def test_square_on_unit_map(m):
    # B_m(u^2) = u^2 + u (1 - u) / m
    amap = unit_map()
    f = builtin("poly2")
    fm = B.build(f, amap.a_l, amap.b_r, amap.eps, m)
    u = np.linspace(amap.a_l, amap.b_r, 1000)
    expected = u**2 + u * (1 - u) / m
    assert np.max(np.abs(fm(u) - expected)) <= 1e-13
    assert np.max(np.abs(fm(u) - direct_sum((np.arange(m + 1) / m) ** 2, u))) <= 1e-13


def test_correction_of_square():
    # h~ = u (1 - u) * 2 / L^2 and B_m(u (1 - u)) = (1 - 1/m) u (1 - u)
    a_l, b_r, eps, m = 0.3, 2.0, 0.2, 25
    h = B.correction(builtin("poly2"), a_l, b_r, eps, m)
    x = np.linspace(a_l, b_r, 200)
    u = h.map.forward(x)
    expected = 2.0 / h.map.L**2 * (1 - 1 / m) * u * (1 - u)
    assert np.max(np.abs(h(x) - expected)) <= 1e-12


def test_endpoint_matches_direct_sum(interval):
    f = builtin("exp")
    fm = B.build(f, *interval, 0.25, 20)
    for x in interval:
        assert fm(x) == pytest.approx(direct_sum(fm.samples, fm.map.forward(x)), rel=1e-13)


def test_evaluate_outside_interval(interval):
    fm = B.build(builtin("poly2"), *interval, 0.25, 8)
    with pytest.raises(DomainError):
        fm(interval[1] + 0.1)


def test_log_needs_small_eps(interval):
    f = builtin("log")
    a_l, b_r = B.default_interval(MPModel(0.5).a, MPModel(0.5).b)
    with pytest.raises(DomainError):
        B.build(f, a_l, b_r, 0.25, 16)
    eps = B.fit_eps(f, a_l, b_r)
    assert 0 < eps < 0.25
    lo, _ = B.AffineMap(a_l, b_r, eps).sample_range
    assert lo == pytest.approx(a_l / 2)
    B.build(f, a_l, b_r, eps, 16)
    assert B.fit_eps(builtin("exp"), a_l, b_r) == 0.25


def test_convexity_preserved():
    f = builtin("exp")
    fm = B.build(f, 0.2, 3.0, 0.25, 20)
    rng = np.random.default_rng(1)
    x1 = rng.uniform(0.2, 3.0, 10**6)
    x2 = rng.uniform(0.2, 3.0, 10**6)
    t = rng.uniform(0, 1, 10**6)
    lhs = fm(t * x1 + (1 - t) * x2)
    rhs = t * fm(x1) + (1 - t) * fm(x2)
    assert np.all(lhs <= rhs + 1e-12)


@pytest.mark.parametrize("name", ["poly3", "exp"])
def test_first_order_rate(name, interval):
    f = builtin(name)
    x = np.linspace(*interval, 1000)
    e = [np.max(np.abs(B.build(f, *interval, 0.25, m)(x) - f(x))) for m in (64, 128)]
    assert 1.8 <= e[0] / e[1] <= 2.2


@pytest.mark.parametrize("name", ["poly3", "poly4", "exp"])
def test_second_order_rate(name, interval):
    f = builtin(name)
    x = np.linspace(*interval, 1000)
    e = [np.max(np.abs(B.corrected(f, *interval, 0.25, m)(x) - f(x))) for m in (64, 128)]
    assert 3.5 <= e[0] / e[1] <= 4.5


def test_corrected_is_difference(interval):
    f = builtin("poly3")
    fm = B.build(f, *interval, 0.25, 30)
    hm = B.correction(f, *interval, 0.25, 30)
    c = B.corrected(f, *interval, 0.25, 30)
    assert np.allclose(c.samples, (fm - hm.scaled(1 / 60)).samples, rtol=0, atol=1e-14)


def test_derivative_against_finite_difference(interval):
    fm = B.corrected(builtin("exp"), *interval, 0.25, 40)
    d = fm.derivative()
    x = np.linspace(interval[0] + 0.01, interval[1] - 0.01, 50)
    h = 1e-5
    fd = (fm(x + h) - fm(x - h)) / (2 * h)
    assert np.max(np.abs(d(x) - fd)) <= 1e-6


def test_samples_read_only(interval):
    fm = B.build(builtin("poly2"), *interval, 0.25, 4)
    with pytest.raises(ValueError):
        fm.samples[0] = 1.0
    with pytest.raises(DomainError):
        B.BernsteinApprox(4, np.zeros(3), fm.map)


# -- complex evaluation ---------------------------------------------------------


@pytest.mark.parametrize("m", [4, 64, 256])
def test_complex_agrees_with_real(m, interval):
    fm = B.build(builtin("exp"), *interval, 0.25, m)
    x = np.linspace(*interval, 101)
    assert np.max(np.abs(fm(x + 0j) - fm(x))) <= 1e-12 * np.max(np.abs(fm(x)))


def test_complex_square_exact():
    # polynomial identity: B_m(u^2) = u^2 + u(1-u)/m also off the real line
    amap = unit_map()
    m = 16
    fm = B.build(builtin("poly2"), amap.a_l, amap.b_r, amap.eps, m)
    z = np.array([0.3 + 0.2j, 0.7 - 0.1j, 0.5 + 0.25j])
    assert np.max(np.abs(fm(z) - (z**2 + z * (1 - z) / m))) <= 1e-13


def test_complex_conjugate_symmetry(interval):
    fm = B.corrected(builtin("poly4"), *interval, 0.25, 32)
    z = np.linspace(*interval, 30) + 0.1j
    assert np.allclose(fm(z.conj()), np.conj(fm(z)), rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", ["poly3", "exp", "log"])
@pytest.mark.parametrize("m", [16, 64, 256])
def test_strip_bound(name, m, interval):
    f = builtin(name)
    eps = B.fit_eps(f, *interval)
    fm = B.build(f, *interval, eps, m)
    v = B.strip_halfwidth(m)
    z = np.linspace(*interval, 50)[:, None] + 1j * np.linspace(-v, v, 10)[None, :]
    assert np.max(np.abs(fm(z))) <= 1.05 * fm.strip_bound()


def test_strip_violation(interval):
    fm = B.build(builtin("poly2"), *interval, 0.25, 16)
    with pytest.raises(DomainError):
        fm(1.0 + 0.3j)
    with pytest.raises(DomainError):
        fm(interval[0] - 0.1 + 0.1j)
