"""Rejection probabilities of boundary tests: quadrature and Monte Carlo.

The rejection probability of a boundary test at noncentrality mu is

    pi_g(mu) = 1 - integral_0^inf [ mass of {0 <= t1 <= g(t2)} at t2 ] dt2,

where the inner t1 integral has the closed form of
:func:`nearsim.dist.inner_integral`, so only a one-dimensional outer
quadrature remains.  The outer integral is truncated at max(mu) + 9; the
folded-normal mass beyond that point is below 1e-17 and the truncation is
covered by a doubling test.  In three dimensions the innermost integral is
again analytic and a nested two-dimensional quadrature over the ordered
(t2, t3) triangle remains.

A counter-based Monte Carlo oracle (Philox streams, one per fixed-size
chunk) provides an independent check; estimates are deterministic for a
given seed no matter how many workers run the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .boundary import (
    GBoundary,
    StepBoundary,
    WeightedBoundary3D,
    published_optimal_boundary,
)
from .dist import (
    SQRT_2_OVER_PI,
    _ecosh,
    folded_normal_cdf,
    noncentrality,
    std_normal_quantile,
)
from .errors import AccuracyError, DomainError
from .quadrature import fixed_panels, integrate, subdivide
from .runtime import worker_count

#: Outer integration runs on [0, max(mu) + TRUNCATION].
TRUNCATION = 9.0

_MC_CHUNK = 1 << 19


@dataclass(frozen=True)
class RPGrid:
    """Rejection probabilities on a grid of noncentrality points.

    ``errors`` holds per-point absolute error estimates (quadrature) or an
    analogous accuracy proxy; ``boundary_id`` is a short label of the rule
    that produced the values.
    """

    points: tuple
    values: tuple
    errors: tuple
    boundary_id: str

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        vals = tuple(float(v) for v in self.values)
        errs = tuple(float(e) for e in self.errors)
        if not (len(pts) == len(vals) == len(errs)):
            raise DomainError("points, values, errors must have equal length")
        if any((v < -1e-8) or (v > 1.0 + 1e-8) for v in vals):
            raise DomainError("rejection probabilities must lie in [0, 1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "errors", errs)


class _WaldBound:
    """Acceptance frontier of the Wald test in the ordered octant.

    Accept iff t1 <= b(t2) with b(t2) = t2 up to sqrt(2c) and
    sqrt(c) * t2 / sqrt(t2^2 - c) beyond it (c the chi-square critical
    value).  The frontier decreases toward sqrt(c), so it is not a
    GBoundary; it only exists for power computations.
    """

    def __init__(self, alpha=0.05):
        z = std_normal_quantile(1.0 - alpha / 2.0)
        self.c = z * z
        self.alpha = alpha

    def eval(self, t2):
        t2 = np.asarray(t2, dtype=float)
        tsq = t2 * t2
        with np.errstate(divide="ignore", invalid="ignore"):
            frontier = np.sqrt(self.c) * t2 / np.sqrt(tsq - self.c)
        return np.where(tsq <= 2.0 * self.c, t2, frontier)

    def kink_points(self):
        return np.array([math.sqrt(2.0 * self.c)])


def _inner_pair(b, t2, m1, m2):
    # closed-form t1 mass of {t1 <= b} at height t2, K = 2 (no validation)
    return SQRT_2_OVER_PI * (
        _ecosh(t2, m2) * (ndtr(b - m1) + ndtr(b + m1) - 1.0)
        + _ecosh(t2, m1) * (ndtr(b - m2) + ndtr(b + m2) - 1.0)
    )


def _breakpoints(kinks, extra, upper):
    pts = np.concatenate([[0.0, upper], np.asarray(kinks, dtype=float).ravel(),
                          np.asarray(extra, dtype=float).ravel()])
    pts = pts[(pts >= 0.0) & (pts <= upper)]
    return np.unique(pts)


def rejection_prob(boundary, mu, tol=1e-8, truncation=TRUNCATION):
    """P[reject | mu] for a two-dimensional boundary test by quadrature.

    Absolute error at most ``tol`` (adaptive Gauss-Kronrod with panels split
    at every boundary kink).  Raises :class:`AccuracyError` carrying the
    achieved estimate if the tolerance cannot be met.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    m = noncentrality(mu)
    if m.size != 2:
        raise DomainError("rejection_prob expects a 2-dimensional mu")
    upper = m[-1] + truncation

    def integrand(t2):
        b = np.minimum(boundary.eval(t2), t2)
        return _inner_pair(b, t2, m[0], m[1])

    pts = _breakpoints(boundary.kink_points(), m, upper)
    try:
        acc, _err = integrate(integrand, pts, tol)
    except AccuracyError as exc:
        raise AccuracyError(
            str(exc),
            estimate=None if exc.estimate is None else 1.0 - float(exc.estimate),
            error_estimate=exc.error_estimate,
        ) from exc
    return 1.0 - float(acc)


def _rejection_prob_with_error(boundary, mu, tol):
    m = noncentrality(mu)
    upper = m[-1] + TRUNCATION

    def integrand(t2):
        b = np.minimum(boundary.eval(t2), t2)
        return _inner_pair(b, t2, m[0], m[1])

    pts = _breakpoints(boundary.kink_points(), m, upper)
    acc, err = integrate(integrand, pts, tol)
    return 1.0 - float(acc), float(np.max(err))


def nrp_curve(boundary, mu0_grid, tol=1e-8, boundary_id=None):
    """Null rejection probabilities along mu = (0, mu0) for a grid of mu0."""
    grid = [float(v) for v in np.atleast_1d(np.asarray(mu0_grid, dtype=float))]
    label = boundary_id if boundary_id is not None else _default_label(boundary)

    def one(mu0):
        return _rejection_prob_with_error(boundary, (0.0, mu0), tol)

    workers = worker_count()
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(mu0) for mu0 in grid]
    return RPGrid(
        points=tuple((0.0, mu0) for mu0 in grid),
        values=tuple(r[0] for r in results),
        errors=tuple(r[1] for r in results),
        boundary_id=label,
    )


def _default_label(boundary):
    if isinstance(boundary, GBoundary):
        return "linear-boundary(alpha=%g,knots=%d)" % (boundary.alpha, len(boundary.knots))
    if isinstance(boundary, StepBoundary):
        return "step-boundary(alpha=%g)" % boundary.level
    return type(boundary).__name__


def wald_rp(mu, alpha=0.05, tol=1e-8):
    """Rejection probability of the Wald test via its acceptance frontier."""
    return rejection_prob(_WaldBound(alpha), mu, tol)


def rejection_prob_3d(mu, tol=1e-8, bound=None, truncation=TRUNCATION):
    """P[reject | mu] in dimension 3 by nested quadrature.

    ``bound`` is the acceptance cutoff for t1: a
    :class:`~nearsim.boundary.WeightedBoundary3D` (the default uses the
    published base boundary), or a plain 2-d boundary meaning "ignore t3".
    The innermost t1 integral is closed form (folded-normal CDF factors
    against 2x2 permanents), leaving an adaptive outer integral over t3 of
    adaptive inner integrals over t2 <= t3.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    m = noncentrality(mu)
    if m.size != 3:
        raise DomainError("rejection_prob_3d expects a 3-dimensional mu")
    if bound is None:
        bound = WeightedBoundary3D(published_optimal_boundary())
    if isinstance(bound, WeightedBoundary3D):
        bound_eval = bound.eval
        t2_kinks = bound.t2_kinks()
        t3_kinks = bound.t3_kinks()
    else:
        bound_eval = lambda t2, t3: bound.eval(t2)  # noqa: E731 - tiny adapter
        t2_kinks = bound.kink_points()
        t3_kinks = np.array([])
    upper = m[-1] + truncation

    # chi(t, m_j) for the three mu entries; 2x2 permanent over a
    # complementary pair (p, q) evaluated at heights (t2, t3)
    def chi(t, mj):
        return SQRT_2_OVER_PI * _ecosh(t, mj)

    pairs = ((1, 2), (0, 2), (0, 1))  # complements of j = 0, 1, 2

    inner_tol = tol / (4.0 * upper)

    def slice_mass(t3):
        # integral over 0 <= t2 <= t3 of the closed-form t1 mass
        if t3 <= 0.0:
            return 0.0

        def integrand(t2):
            b = np.minimum(bound_eval(t2, t3), t2)
            total = 0.0
            for j, (p, q) in enumerate(pairs):
                cdf_j = ndtr(b - m[j]) + ndtr(b + m[j]) - 1.0
                perm2 = chi(t2, m[p]) * chi(t3, m[q]) + chi(t2, m[q]) * chi(t3, m[p])
                total = total + cdf_j * perm2
            return total

        pts = _breakpoints(t2_kinks, m, t3)
        val, _err = integrate(integrand, pts, inner_tol)
        return float(val)

    def outer(t3_nodes):
        return np.array([slice_mass(t3) for t3 in t3_nodes])

    pts3 = _breakpoints(t3_kinks, np.concatenate([m, t2_kinks]), upper)
    try:
        acc, _err = integrate(outer, pts3, tol / 2.0)
    except AccuracyError as exc:
        raise AccuracyError(
            str(exc),
            estimate=None if exc.estimate is None else 1.0 - float(exc.estimate),
            error_estimate=exc.error_estimate,
        ) from exc
    return 1.0 - float(acc)


def _rp_grid_fixed(bound_eval, kinks, mus, t_end, tail, width=0.25):
    """Rejection probabilities for many mu pairs in one non-adaptive pass.

    The hot path of boundary optimization.  Quadrature covers only
    [0, t_end] (panels split at every kink, width capped); beyond the last
    knot the boundary is the constant ``tail`` <= t_end, where the
    acceptance mass has the closed form

        P[max > t_end] - P[min > tail, max > t_end]
          = 1 - I(t_end,mu1) I(t_end,mu2)
            - (1 - I(tail,mu1)) (1 - I(tail,mu2))
            + (I(t_end,mu1) - I(tail,mu1)) (I(t_end,mu2) - I(tail,mu2))

    with I the folded-normal CDF.  Returns ``(values, error_estimates)``
    with one entry per row of ``mus``.
    """
    mus = np.asarray(mus, dtype=float)
    if mus.ndim != 2 or mus.shape[1] != 2:
        raise DomainError("mus must have shape (n, 2)")
    t_end = float(t_end)
    tail = float(tail)
    if tail > t_end + 1e-12:
        raise DomainError("constant tail must start at or below the last knot")
    pts = subdivide(_breakpoints(kinks, mus.ravel(), t_end), width)
    m1 = mus[:, 0][None, :]
    m2 = mus[:, 1][None, :]

    def f(t2):
        b = np.minimum(bound_eval(t2), t2)
        bb = b[:, None]
        tt = t2[:, None]
        return SQRT_2_OVER_PI * (
            _ecosh(tt, m2) * (ndtr(bb - m1) + ndtr(bb + m1) - 1.0)
            + _ecosh(tt, m1) * (ndtr(bb - m2) + ndtr(bb + m2) - 1.0)
        )

    val, err = fixed_panels(f, pts)

    i_end_1 = folded_normal_cdf(t_end, mus[:, 0])
    i_end_2 = folded_normal_cdf(t_end, mus[:, 1])
    i_tail_1 = folded_normal_cdf(tail, mus[:, 0])
    i_tail_2 = folded_normal_cdf(tail, mus[:, 1])
    accept_beyond = (
        1.0
        - i_end_1 * i_end_2
        - (1.0 - i_tail_1) * (1.0 - i_tail_2)
        + (i_end_1 - i_tail_1) * (i_end_2 - i_tail_2)
    )
    return 1.0 - val - accept_beyond, err


def g_rule(boundary):
    """Vectorized decision rule: reject iff |t|_(1) > g(|t|_(2)).

    Works on sorted-absolute rows of any dimension >= 2 by looking only at
    the two smallest entries, which is also the "ignore t3" rule in 3D.
    """

    def rule(sorted_abs):
        return sorted_abs[:, 0] > boundary.eval(sorted_abs[:, 1])

    return rule


def lr_rule(alpha=0.05):
    """Reject iff min |t| exceeds the two-sided critical value."""
    z = std_normal_quantile(1.0 - alpha / 2.0)

    def rule(sorted_abs):
        return sorted_abs[:, 0] > z

    return rule


def wald_rule(alpha=0.05):
    """Reject iff t1^2 t2^2 / (t1^2 + t2^2) exceeds the chi-square cutoff."""
    z = std_normal_quantile(1.0 - alpha / 2.0)
    c = z * z

    def rule(sorted_abs):
        a = sorted_abs[:, 0] ** 2
        b = sorted_abs[:, 1] ** 2
        denom = a + b
        stat = np.divide(a * b, denom, out=np.zeros_like(denom), where=denom > 0.0)
        return stat > c

    return rule


def g3d_rule(weighted=None):
    """Reject iff |t|_(1) > g(|t|_(2), |t|_(3)) for the weighted 3D boundary."""
    if weighted is None:
        weighted = WeightedBoundary3D(published_optimal_boundary())

    def rule(sorted_abs):
        return sorted_abs[:, 0] > weighted.eval(sorted_abs[:, 1], sorted_abs[:, 2])

    return rule


def monte_carlo_rp(rule, mu, n_draws, seed):
    """Monte Carlo rejection rate of a vectorized decision rule.

    Draws T ~ N(mu, I_K) in fixed chunks, each from its own jumped Philox
    stream, applies ``rule`` to the sorted absolute rows and returns
    ``(estimate, standard_error)``.  Deterministic given ``seed`` and
    independent of the worker count.
    """
    m = noncentrality(mu)
    n_draws = int(n_draws)
    if n_draws < 10_000:
        raise DomainError("monte_carlo_rp requires at least 10^4 draws")

    base = np.random.Philox(key=int(seed))
    n_chunks = (n_draws + _MC_CHUNK - 1) // _MC_CHUNK

    def chunk_count(i):
        size = min(_MC_CHUNK, n_draws - i * _MC_CHUNK)
        rng = np.random.Generator(base.jumped(i))
        t = rng.standard_normal((size, m.size)) + m[None, :]
        return int(np.count_nonzero(rule(np.sort(np.abs(t), axis=1))))

    workers = worker_count()
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(chunk_count, range(n_chunks)))
    else:
        counts = [chunk_count(i) for i in range(n_chunks)]
    hits = sum(counts)
    p = hits / n_draws
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / n_draws)
    return p, se
