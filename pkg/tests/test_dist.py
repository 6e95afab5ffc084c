"""Density and distribution kernels against high-precision oracles.

The mpmath comparisons recompute every formula from scratch at 50 digits,
so agreement is evidence the double-precision forms (in particular the
overflow-safe exp/cosh split) are implemented correctly.
"""

import math

import mpmath
import numpy as np
import pytest

from nearsim.dist import (
    folded_normal_cdf,
    folded_normal_pdf,
    inner_integral,
    noncentrality,
    ordered_abs,
    ordered_abs_pdf2,
    ordered_abs_pdf_k,
    std_normal_cdf,
    std_normal_quantile,
)
from nearsim.errors import (
    DomainError,
    InvalidProbabilityError,
    UnsupportedDimensionError,
)
from nearsim.quadrature import integrate

mpmath.mp.dps = 50


def mp_phi(x):
    return float(mpmath.ncdf(x))


def mp_folded_pdf(t, mu):
    t, mu = mpmath.mpf(t), mpmath.mpf(mu)
    return float(
        mpmath.sqrt(2 / mpmath.pi)
        * mpmath.exp(-(t**2 + mu**2) / 2)
        * mpmath.cosh(mu * t)
    )


def mp_ordered_pdf2(t1, t2, m1, m2):
    t1, t2, m1, m2 = (mpmath.mpf(v) for v in (t1, t2, m1, m2))
    e = lambda t, m: mpmath.exp(-(t**2 + m**2) / 2) * mpmath.cosh(m * t)  # noqa: E731
    return float((2 / mpmath.pi) * (e(t1, m1) * e(t2, m2) + e(t1, m2) * e(t2, m1)))


# --- normal CDF / quantile ---------------------------------------------------


def test_cdf_anchors():
    assert std_normal_cdf(0.0) == 0.5
    np.testing.assert_allclose(std_normal_cdf(1.95996), 0.975, atol=5e-7)


def test_cdf_against_mpmath_sweep():
    xs = np.concatenate([np.linspace(-8, 8, 33), [-30.0, 30.0]])
    for x in xs:
        assert abs(std_normal_cdf(float(x)) - mp_phi(x)) < 1e-12


def test_cdf_symmetry_random():
    rng = np.random.default_rng(7)
    x = rng.normal(scale=3.0, size=200)
    np.testing.assert_allclose(std_normal_cdf(-x), 1.0 - std_normal_cdf(x), atol=1e-15)


def test_cdf_rejects_nonfinite():
    with pytest.raises(DomainError):
        std_normal_cdf(np.inf)


def test_quantile_roundtrip_and_anchors():
    assert std_normal_quantile(0.5) == 0.0
    np.testing.assert_allclose(std_normal_quantile(0.975), 1.959963984540054, atol=1e-12)
    np.testing.assert_allclose(std_normal_quantile(0.525), 0.06270677794321385, atol=1e-12)
    ps = np.linspace(0.001, 0.999, 97)
    np.testing.assert_allclose(std_normal_cdf(std_normal_quantile(ps)), ps, atol=1e-10)


def test_quantile_rejects_out_of_range():
    for p in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(InvalidProbabilityError):
            std_normal_quantile(p)


# --- canonicalizers ----------------------------------------------------------


def test_noncentrality_sorts_absolute_values():
    np.testing.assert_array_equal(noncentrality([-3.0, 1.0, -2.0]), [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        noncentrality([np.nan, 1.0])
    with pytest.raises(DomainError):
        noncentrality([])


def test_ordered_abs_validates():
    np.testing.assert_array_equal(ordered_abs([0.0, 1.0, 1.0]), [0.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        ordered_abs([1.0, 0.5])
    with pytest.raises(DomainError):
        ordered_abs([-0.1, 0.5])


# --- folded normal -----------------------------------------------------------


def test_folded_pdf_anchors():
    np.testing.assert_allclose(folded_normal_pdf(0.0, 0.0), math.sqrt(2.0 / math.pi), rtol=1e-15)
    np.testing.assert_allclose(
        folded_normal_pdf(1.0, 0.0), math.sqrt(2.0 / math.pi) * math.exp(-0.5), rtol=1e-15
    )


def test_folded_pdf_against_mpmath_including_large_arguments():
    rng = np.random.default_rng(11)
    cases = [(rng.uniform(0, 6), rng.uniform(0, 6)) for _ in range(40)]
    cases += [(40.0, 35.0), (25.0, 0.0), (0.0, 25.0)]  # cosh overflow territory
    for t, mu in cases:
        np.testing.assert_allclose(
            folded_normal_pdf(t, mu), mp_folded_pdf(t, mu), rtol=1e-12, atol=1e-300
        )


def test_folded_pdf_normalizes():
    for mu in (0.0, 1.0, 3.0):
        val, _ = integrate(lambda t: folded_normal_pdf(t, mu), [0.0, mu + 2.0, mu + 12.0], tol=1e-11)
        np.testing.assert_allclose(val, 1.0, atol=1e-9)


def test_folded_cdf_matches_pdf_integral():
    rng = np.random.default_rng(13)
    for _ in range(20):
        b, mu = rng.uniform(0.1, 5), rng.uniform(0, 4)
        val, _ = integrate(lambda t: folded_normal_pdf(t, mu), [0.0, b], tol=1e-12)
        np.testing.assert_allclose(folded_normal_cdf(b, mu), val, atol=1e-10)


def test_folded_rejects_negative_arguments():
    with pytest.raises(DomainError):
        folded_normal_pdf(-1.0, 0.0)
    with pytest.raises(DomainError):
        folded_normal_cdf(1.0, -2.0)


# --- ordered densities -------------------------------------------------------


def test_pdf2_origin_value():
    np.testing.assert_allclose(ordered_abs_pdf2([0.0, 0.0], [0.0, 0.0]), 4.0 / math.pi, rtol=1e-15)


def test_pdf2_symmetric_in_mu():
    assert ordered_abs_pdf2([0.3, 1.7], [2.0, 0.5]) == ordered_abs_pdf2([0.3, 1.7], [0.5, 2.0])


def test_pdf2_against_mpmath():
    rng = np.random.default_rng(17)
    for _ in range(30):
        t1 = rng.uniform(0, 3)
        t2 = t1 + rng.uniform(0, 3)
        m = np.sort(rng.uniform(0, 4, size=2))
        np.testing.assert_allclose(
            ordered_abs_pdf2([t1, t2], m), mp_ordered_pdf2(t1, t2, m[0], m[1]), rtol=1e-12
        )


def test_pdf2_matches_permanent_form():
    rng = np.random.default_rng(19)
    for _ in range(100):
        t = np.sort(rng.uniform(0, 4, size=2))
        mu = rng.uniform(-4, 4, size=2)
        a = ordered_abs_pdf2(t, mu)
        b = ordered_abs_pdf_k(t, mu)
        np.testing.assert_allclose(a, b, rtol=1e-12)


def test_pdf2_normalizes_on_octant():
    # integrate the closed-form t1 slice over t2; equals the octant mass
    for mu in ((0.0, 0.0), (1.0, 2.0), (3.0, 5.0)):
        upper = max(mu) + 10.0

        def marginal(t2):
            return inner_integral(t2, t2, mu)

        val, _ = integrate(marginal, [0.0, mu[1], upper], tol=1e-9)
        np.testing.assert_allclose(val, 1.0, atol=1e-6)


def test_pdf2_rejects_unsorted():
    with pytest.raises(DomainError):
        ordered_abs_pdf2([2.0, 1.0], [0.0, 0.0])


def test_pdfk_reduces_to_folded_at_k1():
    rng = np.random.default_rng(23)
    for _ in range(20):
        t, mu = rng.uniform(0, 4), rng.uniform(0, 4)
        np.testing.assert_allclose(ordered_abs_pdf_k([t], [mu]), folded_normal_pdf(t, mu), rtol=1e-14)


def test_pdfk_constant_matrix_permanent():
    # all entries equal: permanent = K! * sqrt(2/pi)^K
    val = ordered_abs_pdf_k([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(val, 6.0 * (2.0 / math.pi) ** 1.5, rtol=1e-14)
    np.testing.assert_allclose(val, 3.047695, atol=5e-6)


def test_pdfk_invariant_under_mu_permutation():
    rng = np.random.default_rng(29)
    t = np.sort(rng.uniform(0, 3, size=3))
    mu = rng.uniform(-3, 3, size=3)
    base = ordered_abs_pdf_k(t, mu)
    for perm in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
        assert ordered_abs_pdf_k(t, mu[list(perm)]) == pytest.approx(base, rel=1e-14)


def test_pdfk_dimension_cap():
    with pytest.raises(UnsupportedDimensionError):
        ordered_abs_pdf_k(np.linspace(0, 1, 7), np.zeros(7))


# --- inner integral ----------------------------------------------------------


def test_inner_integral_zero_at_b_zero():
    assert inner_integral(0.0, 1.3, (0.7, 2.0)) == 0.0


def test_inner_integral_anchor():
    expected = 2.0 * math.sqrt(2.0 / math.pi) * math.exp(-0.5) * (2.0 * std_normal_cdf(1.0) - 1.0)
    np.testing.assert_allclose(inner_integral(1.0, 1.0, (0.0, 0.0)), expected, rtol=1e-14)
    np.testing.assert_allclose(inner_integral(1.0, 1.0, (0.0, 0.0)), 0.660763, atol=5e-7)


def test_inner_integral_matches_quadrature_of_density():
    rng = np.random.default_rng(31)
    for _ in range(50):
        t2 = rng.uniform(0.2, 5)
        b = rng.uniform(0, t2)
        mu = rng.uniform(0, 4, size=2)

        def f(t1):
            return np.array([ordered_abs_pdf2([v, t2], mu) for v in t1])

        val, _ = integrate(f, [0.0, b], tol=1e-12)
        np.testing.assert_allclose(inner_integral(b, t2, mu), val, atol=1e-9)


def test_inner_integral_monotone_in_b():
    bs = np.linspace(0.0, 4.0, 41)
    vals = inner_integral(bs, 2.0, (1.0, 2.0))
    assert np.all(np.diff(vals) >= 0.0)


def test_inner_integral_broadcasts():
    b = np.array([[0.5], [1.0]])
    t2 = np.array([1.0, 2.0, 3.0])
    out = inner_integral(b, t2, (0.5, 1.5))
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[1, 0], inner_integral(1.0, 1.0, (0.5, 1.5)), rtol=1e-15)


def test_inner_integral_rejects_negative_b():
    with pytest.raises(DomainError):
        inner_integral(-0.5, 1.0, (0.0, 0.0))
