"""Densities and distribution functions of ordered absolute normal statistics.

For T ~ N(mu, I_K), the sorted absolute values |T|_(1) <= ... <= |T|_(K) form
the maximal invariant under coordinate sign changes and permutations.  Each
|T_k| is folded normal with density

    f(t, mu) = sqrt(2/pi) * exp(-(t^2 + mu^2)/2) * cosh(mu t),  t >= 0,

and the joint density of the ordered vector is the permanent of the K x K
matrix with entries f(t_i, mu_j), restricted to the ordered octant.  The
exponential-cosh product is evaluated as half the sum of two Gaussian
kernels, exp(-(t-mu)^2/2) + exp(-(t+mu)^2/2), which is algebraically the same
and immune to cosh overflow.

All functions are pure and accept scalars or arrays (numpy broadcasting);
nothing here holds state, so concurrent use is safe.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import (
    DomainError,
    InvalidProbabilityError,
    UnsupportedDimensionError,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

#: Largest supported dimension; the permanent is enumerated over K! terms.
MAX_K = 6


def noncentrality(values):
    """Canonical noncentrality vector: absolute values, sorted ascending.

    The distribution of the ordered |T| depends on mu only through the
    multiset of |mu_k|, so any real vector is accepted and mapped onto the
    canonical representative.
    """
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("noncentrality expects a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("noncentrality entries must be finite")
    return np.sort(np.abs(arr))


def ordered_abs(values):
    """Validate an ordered absolute statistic vector (nonnegative, ascending)."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("ordered_abs expects a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("ordered statistic entries must be finite")
    if np.any(arr < 0.0):
        raise DomainError("ordered statistic entries must be nonnegative")
    if np.any(np.diff(arr) < 0.0):
        raise DomainError("ordered statistic must be sorted ascending")
    return arr


def _ecosh(t, mu):
    # exp(-(t^2+mu^2)/2) * cosh(mu t), overflow-safe form
    t = np.asarray(t, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return 0.5 * (np.exp(-0.5 * (t - mu) ** 2) + np.exp(-0.5 * (t + mu) ** 2))


def std_normal_cdf(x):
    """Standard normal CDF, absolute error below 1e-12 on the real line."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("std_normal_cdf requires finite arguments")
    out = ndtr(arr)
    return float(out) if np.ndim(x) == 0 else out


def std_normal_quantile(p):
    """Inverse standard normal CDF for p in (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise InvalidProbabilityError("quantile requires 0 < p < 1")
    out = ndtri(arr)
    return float(out) if np.ndim(p) == 0 else out


def folded_normal_pdf(t, mu):
    """Density of |T| for T ~ N(mu, 1): the noncentral chi with 1 df."""
    t_arr = np.asarray(t, dtype=float)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(t_arr < 0.0) or np.any(mu_arr < 0.0):
        raise DomainError("folded_normal_pdf requires t >= 0 and mu >= 0")
    out = SQRT_2_OVER_PI * _ecosh(t_arr, mu_arr)
    return float(out) if np.ndim(out) == 0 else out


def folded_normal_cdf(b, mu):
    """P[|T| <= b] = Phi(b - mu) + Phi(b + mu) - 1 for T ~ N(mu, 1)."""
    b_arr = np.asarray(b, dtype=float)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(b_arr < 0.0) or np.any(mu_arr < 0.0):
        raise DomainError("folded_normal_cdf requires b >= 0 and mu >= 0")
    out = ndtr(b_arr - mu_arr) + ndtr(b_arr + mu_arr) - 1.0
    return float(out) if np.ndim(out) == 0 else out


def ordered_abs_pdf2(t, mu):
    """Joint density of (|T|_(1), |T|_(2)) at an ordered point, K = 2.

    With e(t, m) = exp(-(t^2+m^2)/2) cosh(t m), the density on
    0 <= t1 <= t2 is

        (2/pi) * [e(t1, mu1) e(t2, mu2) + e(t1, mu2) e(t2, mu1)].
    """
    t = ordered_abs(t)
    if t.size != 2:
        raise DomainError("ordered_abs_pdf2 requires exactly two statistics")
    m = noncentrality(mu)
    if m.size != 2:
        raise DomainError("ordered_abs_pdf2 requires exactly two mu entries")
    return float(
        (2.0 / math.pi)
        * (
            _ecosh(t[0], m[0]) * _ecosh(t[1], m[1])
            + _ecosh(t[0], m[1]) * _ecosh(t[1], m[0])
        )
    )


def ordered_abs_pdf_k(t, mu):
    """Joint density of the ordered absolute vector for K <= 6.

    Evaluates the permanent of the matrix [f(t_i, mu_j)] by direct
    enumeration of the K! permutations; at K = 2 this reduces exactly to
    :func:`ordered_abs_pdf2`.
    """
    t = ordered_abs(t)
    m = noncentrality(mu)
    k = t.size
    if m.size != k:
        raise DomainError("t and mu must have the same length")
    if k > MAX_K:
        raise UnsupportedDimensionError(
            "K=%d not supported; permanent enumeration is capped at K=%d" % (k, MAX_K)
        )
    kernel = SQRT_2_OVER_PI * _ecosh(t[:, None], m[None, :])
    total = 0.0
    for perm in itertools.permutations(range(k)):
        total += math.prod(kernel[i, perm[i]] for i in range(k))
    return float(total)


def inner_integral(b, t2, mu):
    """Closed form of the cumulative slice integral of the K = 2 density.

    For fixed t2 and the ordered density f(t1, t2), the mass of
    {0 <= t1 <= b} equals

        sqrt(2/pi) * [ e(t2, mu2) * (Phi(b-mu1) + Phi(b+mu1) - 1)
                     + e(t2, mu1) * (Phi(b-mu2) + Phi(b+mu2) - 1) ],

    i.e. folded-normal CDF factors paired with the complementary kernel.
    ``b`` and ``t2`` broadcast, so a grid of slice bounds is one call.
    """
    b_arr = np.asarray(b, dtype=float)
    t2_arr = np.asarray(t2, dtype=float)
    if np.any(b_arr < 0.0):
        raise DomainError("inner_integral requires b >= 0")
    if np.any(t2_arr < 0.0):
        raise DomainError("inner_integral requires t2 >= 0")
    m = noncentrality(mu)
    if m.size != 2:
        raise DomainError("inner_integral requires exactly two mu entries")
    out = SQRT_2_OVER_PI * (
        _ecosh(t2_arr, m[1]) * (ndtr(b_arr - m[0]) + ndtr(b_arr + m[0]) - 1.0)
        + _ecosh(t2_arr, m[0]) * (ndtr(b_arr - m[1]) + ndtr(b_arr + m[1]) - 1.0)
    )
    return float(out) if np.ndim(out) == 0 else out
