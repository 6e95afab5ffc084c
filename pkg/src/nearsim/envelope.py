"""Discretized power envelopes over a cell partition of the ordered octant.

The triangle {0 <= t1 <= t2 <= t_max} is cut into square cells of side
``cell_size`` (cells on the diagonal are the triangular halves), and a
randomized invariant test is a per-cell selection phi in [0, 1].  Mass under
any noncentrality pair is then linear in phi, so the largest power
attainable at one alternative subject to cell-sum similarity constraints at
the null points is a linear program.  The relaxed optimum is the
discretized envelope value; deterministic rounding with repair turns the
relaxed solution into a 0/1 selection whose reported power is the verified
post-rounding cell sum.

Truncation at t_max and the finite cell size both bias the envelope; the
defaults keep those effects below the tolerances of the comparisons made
against it (choose t_max so the alternative's mass beyond it is
negligible).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from .dist import inner_integral, noncentrality
from .errors import (
    AccuracyError,
    DomainError,
    InfeasibleConstraintsError,
    InvalidProbabilityError,
    NumericError,
)
from .quadrature import fixed_panels, subdivide
from .rp import RPGrid
from .runtime import worker_count

# Cell-sum feasibility slack for the rounded selection; at the LP solver's
# own tolerance scale, far below one cell's worth of probability.
_LP_TOL = 1e-9


@dataclass(frozen=True)
class EnvelopeProblem:
    """One point-optimal selection problem on the truncated triangle.

    ``null_points`` are nuisance values mu0 (the null distributions are
    (0, mu0)); ``alt_point`` is the (mu1, mu2) pair whose power is
    maximized, and may be left None on a template that only feeds
    :func:`power_envelope`.  With ``nonsimilar`` set, the lower similarity
    bounds are dropped and only size <= alpha is enforced.
    """

    t_max: float
    cell_size: float
    null_points: tuple
    alt_point: tuple | None = None
    epsilon: float = 1e-5
    alpha: float = 0.05
    nonsimilar: bool = False

    def __post_init__(self):
        t_max = float(self.t_max)
        h = float(self.cell_size)
        if not np.isfinite(t_max) or t_max <= 0.0:
            raise DomainError("t_max must be positive and finite")
        if not np.isfinite(h) or h <= 0.0 or h > t_max:
            raise DomainError("cell_size must lie in (0, t_max]")
        n = t_max / h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise DomainError("cell_size must divide t_max evenly")
        object.__setattr__(self, "t_max", t_max)
        object.__setattr__(self, "cell_size", h)
        nulls = tuple(float(v) for v in self.null_points)
        if any(not np.isfinite(v) or v < 0.0 for v in nulls):
            raise DomainError("null points must be finite and nonnegative")
        object.__setattr__(self, "null_points", nulls)
        if self.alt_point is not None:
            alt = tuple(float(noncentrality(self.alt_point)[i]) for i in range(2))
            object.__setattr__(self, "alt_point", alt)
        if not (0.0 < self.alpha < 1.0):
            raise InvalidProbabilityError("alpha must be in (0, 1)")
        if not (0.0 <= self.epsilon <= self.alpha):
            raise DomainError("epsilon must lie in [0, alpha]")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "nonsimilar", bool(self.nonsimilar))

    @property
    def n_cols(self):
        return int(round(self.t_max / self.cell_size))

    @property
    def cell_count(self):
        n = self.n_cols
        return n * (n + 1) // 2

    def cell_edges(self):
        return np.arange(self.n_cols + 1) * self.cell_size

    def cell_indices(self):
        """(i, j) integer arrays for the valid cells, in canonical order.

        Canonical order is column-major over the upper triangle: cell
        (i, j) with i <= j sits at flat position j(j+1)/2 + i.  All flat
        selection vectors use this order.
        """
        n = self.n_cols
        js = np.repeat(np.arange(n), np.arange(1, n + 1))
        cum = np.concatenate([[0], np.cumsum(np.arange(1, n + 1))])
        is_ = np.arange(js.size) - cum[js]
        return is_, js


def cell_probabilities(mu, problem):
    """Per-cell mass of the ordered-absolute-t density at ``mu``.

    Returns an (n, n) matrix, upper triangle populated; entry (i, j) is the
    mass of cell s_ij.  Column j is one quadrature pass over the cell's t2
    extent of differences of the cumulative slice integral at the cell
    edges (the diagonal edge clips at t1 = t2 automatically).
    """
    m = noncentrality(mu)
    if m.size != 2:
        raise DomainError("cell probabilities require a two-dimensional mu")
    n = problem.n_cols
    edges = problem.cell_edges()
    out = np.zeros((n, n))
    err_total = 0.0
    for j in range(n):
        col_edges = edges[: j + 2]

        def slice_masses(t2, col_edges=col_edges):
            b = np.minimum(col_edges[None, :], t2[:, None])
            return np.diff(inner_integral(b, t2[:, None], m), axis=1)

        pts = subdivide([edges[j], edges[j + 1]], 0.25)
        val, err = fixed_panels(slice_masses, pts)
        out[: j + 1, j] = np.maximum(val, 0.0)
        err_total += float(np.sum(err))
    if err_total > 1e-8:
        raise AccuracyError(
            "cell probability quadrature error %g exceeds 1e-8" % err_total,
            estimate=out,
            error_estimate=err_total,
        )
    return out


def _flat(matrix, problem):
    n = problem.n_cols
    return np.concatenate([matrix[: j + 1, j] for j in range(n)])


def _unflat(flat, problem):
    n = problem.n_cols
    out = np.zeros((n, n), dtype=flat.dtype)
    pos = 0
    for j in range(n):
        out[: j + 1, j] = flat[pos : pos + j + 1]
        pos += j + 1
    return out


def _null_matrix(problem):
    """Stack flattened null cell probabilities, one row per null point."""
    nulls = problem.null_points
    if not nulls:
        return np.zeros((0, problem.cell_count))

    def one(mu0):
        return _flat(cell_probabilities((0.0, mu0), problem), problem)

    workers = worker_count()
    if workers > 1 and len(nulls) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, nulls))
    else:
        rows = [one(mu0) for mu0 in nulls]
    return np.vstack(rows)


def _solve_lp(p_alt, null_mat, problem):
    """Relaxed selection maximizing p_alt' phi under the similarity band."""
    m_cells = p_alt.size
    if null_mat.shape[0] == 0:
        return np.ones(m_cells), float(np.sum(p_alt))
    if problem.nonsimilar:
        a_ub = null_mat
        b_ub = np.full(null_mat.shape[0], problem.alpha)
    else:
        a_ub = np.vstack([null_mat, -null_mat])
        b_ub = np.concatenate([
            np.full(null_mat.shape[0], problem.alpha),
            np.full(null_mat.shape[0], -(problem.alpha - problem.epsilon)),
        ])
    res = linprog(-p_alt, A_ub=a_ub, b_ub=b_ub, bounds=(0.0, 1.0), method="highs")
    if res.status == 2:
        raise InfeasibleConstraintsError(
            "no selection satisfies the similarity band (epsilon=%g, %d null points)"
            % (problem.epsilon, null_mat.shape[0])
        )
    if not res.success:
        raise NumericError("linear program failed: %s" % res.message)
    return np.clip(res.x, 0.0, 1.0), float(-res.fun)


def _round_selection(phi, p_alt, null_mat, problem):
    """Deterministic 0/1 rounding of a relaxed selection, with repair.

    Solid cells (phi ~ 1) are kept; the remaining cells are tried in
    descending alternative-per-null-mass ratio (ties by cell index), each
    kept only if every size constraint still holds.  When the lower
    similarity bounds apply, a second pass in the same order adds cells
    until no null sum is below the band floor or no addition fits; the
    bounds are then satisfied as far as the cell resolution allows.
    """
    alpha = problem.alpha
    sel = phi >= 1.0 - _LP_TOL
    if null_mat.shape[0] == 0:
        return np.ones_like(sel, dtype=bool)
    null_sums = null_mat @ sel.astype(float)

    with np.errstate(divide="ignore"):
        worst = null_mat.max(axis=0)
        ratio = np.where(worst > 0.0, p_alt / np.where(worst > 0.0, worst, 1.0), np.inf)

    def additions(candidates):
        nonlocal null_sums
        order = candidates[np.lexsort((candidates, -ratio[candidates]))]
        for idx in order:
            trial = null_sums + null_mat[:, idx]
            if np.all(trial <= alpha + _LP_TOL):
                sel[idx] = True
                null_sums = trial

    additions(np.flatnonzero((phi > _LP_TOL) & ~sel))
    if not problem.nonsimilar:
        floor = alpha - problem.epsilon
        if np.any(null_sums < floor - _LP_TOL):
            additions(np.flatnonzero(~sel & (p_alt + worst > 0.0)))
    return sel


def point_optimal_cr(problem):
    """Best 0/1 cell selection for the problem's alternative point.

    Returns ``(selection, power)``: an (n, n) 0/1 matrix over the cell grid
    and the verified post-rounding power, i.e. the selection's alternative
    cell sum.  Raises :class:`InfeasibleConstraintsError` when no relaxed
    selection satisfies the similarity band.
    """
    if problem.alt_point is None:
        raise DomainError("problem has no alternative point")
    p_alt = _flat(cell_probabilities(problem.alt_point, problem), problem)
    null_mat = _null_matrix(problem)
    phi, _ = _solve_lp(p_alt, null_mat, problem)
    sel = _round_selection(phi, p_alt, null_mat, problem)
    power = float(p_alt @ sel.astype(float))
    return _unflat(sel.astype(np.int8), problem), power


def power_envelope(alt_grid, problem):
    """Discretized power envelope over a grid of alternatives.

    ``problem`` serves as the template (its own alt_point is ignored); one
    linear program runs per grid point over shared null cell matrices.
    ``values`` holds the relaxed optimum, the envelope's upper-bound
    reading; ``errors`` holds the relaxed-minus-rounded gap, a proxy for
    how much of the value rests on fractional cells.
    """
    alts = [tuple(float(noncentrality(p)[i]) for i in range(2)) for p in alt_grid]
    if not alts:
        raise DomainError("alternative grid must be nonempty")
    null_mat = _null_matrix(problem)

    def one_p_alt(point):
        return _flat(cell_probabilities(point, problem), problem)

    workers = worker_count()
    if workers > 1 and len(alts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            p_alts = list(pool.map(one_p_alt, alts))
    else:
        p_alts = [one_p_alt(point) for point in alts]

    values, gaps = [], []
    for point, p_alt in zip(alts, p_alts):
        sub = replace(problem, alt_point=point)
        phi, relaxed = _solve_lp(p_alt, null_mat, sub)
        sel = _round_selection(phi, p_alt, null_mat, sub)
        rounded = float(p_alt @ sel.astype(float))
        values.append(min(relaxed, 1.0))
        gaps.append(max(relaxed - rounded, 0.0))
    label = "envelope-nonsimilar" if problem.nonsimilar else "envelope-similar"
    return RPGrid(points=tuple(alts), values=tuple(values), errors=tuple(gaps), boundary_id=label)
