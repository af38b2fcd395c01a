import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lemlab.critical import expand_coefficients
from lemlab.ensembles import EnsembleSpec, SeedPolicy, sample_polynomial
from lemlab.errors import MultipleRootError, NearRootError, ValidationError
from lemlab.poly import (
    RootedPolynomial,
    derivative_ratio_at_root,
    elementary_symmetric,
    eval_quotient_at_root,
    log_abs_eval,
    log_abs_many,
    log_derivative_at_roots,
    power_sums,
)

from conftest import poly

coord = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
cpoint = st.builds(complex, coord, coord)


def test_rooted_polynomial_is_immutable_and_validated():
    p = poly(1, -1)
    assert p.degree == 2
    with pytest.raises(ValueError):
        p.roots[0] = 3
    with pytest.raises(ValidationError):
        RootedPolynomial([])
    with pytest.raises(ValidationError):
        RootedPolynomial([1.0, np.nan])
    assert p == poly(1, -1)
    assert p != poly(1, 1)


def test_log_abs_single_factor():
    assert log_abs_eval(poly(0), 2).log_abs == pytest.approx(math.log(2), abs=1e-15)


def test_log_abs_symmetric_pair():
    assert log_abs_eval(poly(1, -1), 0).log_abs == pytest.approx(0.0, abs=1e-15)


def test_log_abs_exact_root_hit():
    ev = log_abs_eval(poly(1, 2j), 2j)
    assert ev.log_abs == -math.inf and ev.at_root


def test_log_abs_phase_range():
    ev = log_abs_eval(poly(1, 1j, -1), 0.3 - 2j)
    assert -math.pi < ev.phase <= math.pi
    z = 0.3 - 2j
    direct = np.prod(z - np.array([1, 1j, -1]))
    assert ev.phase == pytest.approx(np.angle(direct), abs=1e-12)


def test_log_abs_large_degree_no_overflow():
    p = RootedPolynomial(np.full(2000, 3.0) + 1j * np.arange(2000) * 1e-3)
    assert np.isfinite(log_abs_eval(p, -5.0).log_abs)


def test_log_abs_monte_carlo_mean_disk_origin():
    vals = np.array([log_abs_eval(sample_polynomial(EnsembleSpec("disk", 1.0, 250), SeedPolicy(31, t)), 0).log_abs
                     for t in range(10_000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - (-125.0)) < 3 * se


@given(st.lists(cpoint, min_size=1, max_size=50), cpoint)
def test_log_abs_matches_direct_product(roots, z):
    d = np.abs(z - np.array(roots))
    if d.min() < 1e-6:
        return
    p = RootedPolynomial(roots)
    assert math.exp(log_abs_eval(p, z).log_abs) == pytest.approx(float(np.prod(d)), rel=1e-10)
    assert log_abs_many(p, np.array([z]))[0] == pytest.approx(log_abs_eval(p, z).log_abs, abs=1e-9)


def test_power_sums_symmetric_cancellation():
    s = power_sums(poly(1, -1), 0, 2)
    assert s[0] == pytest.approx(0.0, abs=1e-15)
    assert s[1] == pytest.approx(2.0)


def test_power_sums_single_root():
    assert power_sums(poly(0), 3, 1)[0] == pytest.approx(1 / 3)


def _fd_log_derivative(roots, z, h=1e-6):
    roots = np.asarray(roots, dtype=complex)
    return np.sum(np.log((z + h - roots) / (z - h - roots))) / (2 * h)


def test_power_sums_finite_difference():
    roots = [0.5, -0.5j]
    s = power_sums(poly(*roots), 1, 2)
    assert abs(s[0] - _fd_log_derivative(roots, 1.0)) < 1e-6


@given(st.lists(cpoint, min_size=1, max_size=20), cpoint)
def test_power_sums_first_is_log_derivative(roots, z):
    if np.abs(z - np.array(roots)).min() < 0.1:
        return
    s1 = power_sums(RootedPolynomial(roots), z, 1)[0]
    assert abs(s1 - _fd_log_derivative(roots, z)) < 1e-5


def test_power_sums_near_root_names_index():
    with pytest.raises(NearRootError) as exc:
        power_sums(poly(3, 1, 2), 1 + 1e-16, 1)
    assert exc.value.index == 1


def test_power_sums_K_range():
    with pytest.raises(ValidationError):
        power_sums(poly(1, 2), 0, 3)
    with pytest.raises(ValidationError):
        power_sums(poly(1, 2), 0, 0)


def test_esym_definition():
    a, b = 1.5 - 2j, 0.25 + 1j
    e = elementary_symmetric([a, b], 2)
    assert e[0] == pytest.approx(a + b)
    assert e[1] == pytest.approx(a * b)


def test_esym_binomial():
    np.testing.assert_allclose(elementary_symmetric([1, 1, 1], 3), [3, 3, 1], rtol=1e-15)


@pytest.mark.parametrize("method", ["newton", "product"])
def test_esym_matches_convolution(method):
    rng = np.random.default_rng(8)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    # prod (t - v_i) = sum_k (-1)^k e_k t^(n-k)
    c = np.array([1.0 + 0j])
    for x in v:
        c = np.convolve(c, [1.0, -x])
    signed = np.array([(-1) ** k * c[k] for k in range(1, 9)])
    e = elementary_symmetric(v, 8, method=method)
    np.testing.assert_allclose(e, signed, rtol=1e-10)


@given(st.lists(cpoint, min_size=2, max_size=12), st.randoms(use_true_random=False))
def test_esym_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    K = len(values)
    a = elementary_symmetric(values, K)
    b = elementary_symmetric(shuffled, K)
    scale = np.maximum(np.abs(a), 1e-300)
    # relative agreement against the size of the terms that were summed
    mags = elementary_symmetric(np.abs(values), K).real
    assert np.all(np.abs(a - b) <= 1e-12 * np.maximum(mags, scale))


def test_esym_rejects_bad_K():
    with pytest.raises(ValidationError):
        elementary_symmetric([1, 2], 3)
    with pytest.raises(ValidationError):
        elementary_symmetric([1, 2], 1, method="bogus")


def test_derivative_ratio_hand_value():
    assert derivative_ratio_at_root(poly(0, 1), 0, 2) == pytest.approx(1.0)


def test_derivative_ratio_symmetric_zero():
    assert derivative_ratio_at_root(poly(0, 2, -2), 0, 2) == pytest.approx(0.0, abs=1e-16)


def _synthetic_derivative(c, k):
    # c ascending
    for _ in range(k):
        c = c[1:] * np.arange(1, c.size)
    return c


def test_derivative_ratio_coefficient_oracle():
    rng = np.random.default_rng(6)
    roots = rng.uniform(-1, 1, 6) + 1j * rng.uniform(-1, 1, 6)
    c = expand_coefficients(roots)
    x = roots[0]
    d1 = np.polynomial.polynomial.polyval(x, _synthetic_derivative(c, 1))
    d3 = np.polynomial.polynomial.polyval(x, _synthetic_derivative(c, 3))
    expect = abs(d3 / d1) / math.factorial(3)
    assert derivative_ratio_at_root(RootedPolynomial(roots), 0, 3) == pytest.approx(expect, rel=1e-8)


@pytest.mark.parametrize("n", [2, 5, 12, 30])
def test_derivative_ratio_top_order_consistency(n):
    p = sample_polynomial(EnsembleSpec("disk", 1.0, n), SeedPolicy(4, n))
    for i in range(0, n, max(1, n // 4)):
        e = derivative_ratio_at_root(p, i, n)
        assert e * math.exp(eval_quotient_at_root(p, i).log_abs) == pytest.approx(1.0, rel=1e-8)


def test_derivative_ratio_requires_simple_root():
    with pytest.raises(MultipleRootError):
        derivative_ratio_at_root(poly(0, 1e-13, 1), 0, 2)


def test_quotient_examples():
    assert eval_quotient_at_root(poly(1, -1), 0).log_abs == pytest.approx(math.log(2))
    assert eval_quotient_at_root(poly(0, 1, 1j), 0).log_abs == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(MultipleRootError):
        eval_quotient_at_root(poly(0, 0, 1), 0)


def test_quotient_matches_direct_product_low_degree():
    x = sample_polynomial(EnsembleSpec("circle", 1.0, 100), SeedPolicy(9, 0)).roots[:20] * 1.3
    p = RootedPolynomial(x)
    for i in range(20):
        direct = np.prod(np.abs(x[i] - np.delete(x, i)))
        assert math.exp(eval_quotient_at_root(p, i).log_abs) == pytest.approx(direct, rel=1e-10)
    np.testing.assert_allclose(log_derivative_at_roots(p), [eval_quotient_at_root(p, i).log_abs for i in range(20)],
                               atol=1e-12)
