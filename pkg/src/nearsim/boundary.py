"""Critical-region boundary functions on the ordered absolute octant.

A test of the product null rejects when the smaller ordered statistic clears
a boundary evaluated at the larger one: |t|_(1) > g(|t|_(2)).  Two boundary
families live here: piecewise-linear splines with a constant tail
(:class:`GBoundary`, covering the published optimal boundary and the LR
boundary) and right-continuous step functions (:class:`StepBoundary`, the
exact similar construction).  Both are immutable and evaluate on |t|.

The step construction: an exact similar test at level alpha exists precisely
when 1/alpha is an integer R, in which case the boundary is the step function
g(t) = c_j on [c_j, c_{j+1}) with c_0 = 0 and c_j = Phi^-1(1/2 + j alpha/2),
j = 1..R-1.  Its defining identity is F(t) = Phi(g^-1(t)) - Phi(g(t))
- alpha/2 = 0 for all t >= 0, where g^-1 is the generalized inverse
inf{x : g(x) > t}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import std_normal_quantile
from .errors import (
    BoundaryInvariantError,
    InvalidProbabilityError,
    MalformedBoundaryFileError,
    NoSimilarTestError,
)

# Published optimal boundary at level 0.05: 17 knots plus constant tail.
# The final ordinate and the tail are Phi^-1(0.975) exactly, not its 5-decimal
# rendering 1.95996: a tail below the critical value leaks rejection mass for
# large |t|_(2) and pushes the limiting null rejection probability above the
# level by ~5e-7.
_PUBLISHED_T = (
    0.0, 0.1, 0.11, 0.13, 0.14, 0.15, 1.35, 1.36, 1.37,
    1.44, 1.45, 2.05, 2.06, 2.07, 2.08, 2.09, 2.1,
)
_PUBLISHED_G = (
    0.0, 0.1, 0.106723, 0.106723, 0.106724, 0.106724, 1.30583, 1.31286,
    1.3131, 1.3131, 1.3175, 1.9175, 1.9275, 1.9375, 1.9475, 1.9575,
)
_PUBLISHED_TAIL = float(std_normal_quantile(0.975))

# Stored tails may be printed-precision roundings of Phi^-1(1 - alpha/2);
# coherence with the level is enforced only up to this slack.
_TAIL_TOL = 1e-4


def _check_level(alpha):
    if not (0.0 < alpha < 1.0):
        raise InvalidProbabilityError("level alpha must be in (0, 1)")
    return float(alpha)


@dataclass(frozen=True)
class GBoundary:
    """Piecewise-linear boundary: knots (t_j, g_j) plus a constant tail.

    Invariants: knot abscissae strictly increasing from 0, ordinates
    nonnegative, weakly increasing, below the 45-degree line, and a tail
    within printed-precision slack of the two-sided critical value for
    ``alpha``.  Evaluation applies |t|, interpolates linearly between knots
    and returns ``tail`` beyond the last knot.
    """

    alpha: float
    knots: tuple
    tail: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_level(self.alpha))
        try:
            knots = tuple((float(t), float(g)) for t, g in self.knots)
        except (TypeError, ValueError) as exc:
            raise BoundaryInvariantError("knots must be (t, g) pairs") from exc
        if not knots:
            raise BoundaryInvariantError("knot list is empty")
        ts = np.array([k[0] for k in knots])
        gs = np.array([k[1] for k in knots])
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(gs))):
            raise BoundaryInvariantError("knots must be finite")
        if ts[0] < 0.0:
            raise BoundaryInvariantError("knot abscissae must be nonnegative")
        if np.any(np.diff(ts) <= 0.0):
            raise BoundaryInvariantError("knot abscissae must strictly increase")
        if np.any(gs < 0.0):
            raise BoundaryInvariantError("knot ordinates must be nonnegative")
        if np.any(np.diff(gs) < 0.0):
            raise BoundaryInvariantError("knot ordinates must be weakly increasing")
        if np.any(gs > ts + 1e-12):
            raise BoundaryInvariantError("boundary must satisfy g(t) <= t at knots")
        tail = float(self.tail)
        if not np.isfinite(tail) or tail < gs[-1] - 1e-12:
            raise BoundaryInvariantError("tail must be finite and >= last ordinate")
        z = std_normal_quantile(1.0 - self.alpha / 2.0)
        if abs(tail - z) > _TAIL_TOL:
            raise BoundaryInvariantError(
                "tail %.10g is not coherent with level alpha=%g (expected ~%.10g)"
                % (tail, self.alpha, z)
            )
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "tail", tail)

    def eval(self, t):
        """g(|t|): linear interpolation on the knots, ``tail`` beyond them."""
        at = np.abs(np.asarray(t, dtype=float))
        ts = np.array([k[0] for k in self.knots])
        gs = np.array([k[1] for k in self.knots])
        out = np.interp(at, ts, gs)
        out = np.where(at > ts[-1], self.tail, out)
        return float(out) if np.ndim(t) == 0 else out

    def kink_points(self):
        """Abscissae where the boundary is not smooth (for quadrature panels)."""
        return np.array([k[0] for k in self.knots])


@dataclass(frozen=True)
class StepBoundary:
    """Right-continuous step boundary of the exact similar test.

    ``steps`` holds the interior step points c_1 < ... < c_{R-1} for level
    1/R; g(t) = c_j on [c_j, c_{j+1}) with c_0 = 0, and g(t) = c_{R-1} from
    the last step on.  The constructor checks the steps against the defining
    quantile formula, so only genuine exact-similar boundaries inhabit the
    type.
    """

    level: float
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "level", _check_level(self.level))
        steps = tuple(float(c) for c in self.steps)
        if not steps:
            raise BoundaryInvariantError("step list is empty")
        arr = np.array(steps)
        if not np.all(np.isfinite(arr)) or arr[0] <= 0.0 or np.any(np.diff(arr) <= 0.0):
            raise BoundaryInvariantError("steps must be finite, positive, increasing")
        r = 1.0 / self.level
        if abs(r - round(r)) > 1e-9 * r:
            raise NoSimilarTestError(
                "no exact similar test at alpha=%g: 1/alpha is not an integer"
                % self.level
            )
        expected = std_normal_quantile(
            0.5 + np.arange(1, len(steps) + 1) * self.level / 2.0
        )
        if len(steps) != round(r) - 1 or np.max(np.abs(arr - expected)) > 1e-8:
            raise BoundaryInvariantError(
                "steps do not match the exact similar construction at alpha=%g"
                % self.level
            )
        object.__setattr__(self, "steps", steps)

    def eval(self, t):
        """g(|t|): the largest step point at or below |t| (0 before the first)."""
        at = np.abs(np.asarray(t, dtype=float))
        arr = np.array(self.steps)
        idx = np.searchsorted(arr, at, side="right")
        padded = np.concatenate([[0.0], arr])
        out = padded[idx]
        return float(out) if np.ndim(t) == 0 else out

    def kink_points(self):
        return np.array(self.steps)


def eval_boundary(boundary, t):
    """Common evaluation entry point for both boundary kinds."""
    return boundary.eval(t)


def published_optimal_boundary():
    """The level-0.05 optimal boundary: 17 knots, constant tail z_{0.025}."""
    return GBoundary(
        alpha=0.05,
        knots=tuple(zip(_PUBLISHED_T, _PUBLISHED_G + (_PUBLISHED_TAIL,))),
        tail=_PUBLISHED_TAIL,
    )


def lr_boundary(alpha=0.05):
    """Boundary of the likelihood-ratio test: g(t) = min(t, z_{alpha/2})."""
    alpha = _check_level(alpha)
    z = std_normal_quantile(1.0 - alpha / 2.0)
    return GBoundary(alpha=alpha, knots=((0.0, 0.0), (z, z)), tail=z)


def exact_similar_boundary(alpha):
    """Construct the unique exact similar step boundary at level alpha.

    Exists iff 1/alpha is an integer R (checked to relative tolerance 1e-9);
    the R-1 interior steps are c_j = Phi^-1(1/2 + j alpha/2), ending at the
    two-sided critical value Phi^-1(1 - alpha/2).
    """
    alpha = _check_level(alpha)
    r = 1.0 / alpha
    if abs(r - round(r)) > 1e-9 * r:
        raise NoSimilarTestError(
            "no exact similar test at alpha=%g: 1/alpha is not an integer" % alpha
        )
    r = int(round(r))
    steps = std_normal_quantile(0.5 + np.arange(1, r) * alpha / 2.0)
    return StepBoundary(level=alpha, steps=tuple(steps))


def generalized_inverse(boundary, t):
    """g^-1(t) = inf{x : g(x) > t} for a step boundary.

    Equals the smallest step point strictly above t, and +inf once t reaches
    the final step Phi^-1(1 - alpha/2).
    """
    at = np.asarray(t, dtype=float)
    if np.any(at < 0.0):
        raise BoundaryInvariantError("generalized_inverse requires t >= 0")
    arr = np.array(boundary.steps)
    idx = np.searchsorted(arr, at, side="right")
    padded = np.concatenate([arr, [np.inf]])
    out = padded[idx]
    return float(out) if np.ndim(t) == 0 else out


# Weight spline of the three-dimensional boundary: one linear spline through
# these knots, constant 1 beyond the last.  The 3D boundary blends the LR
# boundary (conservative) with the 2D optimal boundary (liberal if t3 is
# ignored) according to the largest absolute statistic.
_WEIGHT_T = np.array([0.0, 1.35, 2.025, 2.7])
_WEIGHT_W = np.array([0.0, 0.959, 0.842, 1.0])


@dataclass(frozen=True)
class WeightedBoundary3D:
    """Dimension-3 boundary g(t2, t3) = (1-w(t3)) g_LR(t2) + w(t3) g(t2).

    ``base`` is the 2-dimensional boundary used at large t3; w(t3) is the
    fixed linear weight spline, so the rule reduces exactly to the base
    boundary once t3 >= 2.7 (dimensional coherence).
    """

    base: GBoundary

    def weight(self, t3):
        at = np.abs(np.asarray(t3, dtype=float))
        out = np.interp(at, _WEIGHT_T, _WEIGHT_W)
        return float(out) if np.ndim(t3) == 0 else out

    def eval(self, t2, t3):
        at2 = np.abs(np.asarray(t2, dtype=float))
        z = std_normal_quantile(1.0 - self.base.alpha / 2.0)
        w = self.weight(t3)
        g_lr = np.minimum(at2, z)
        out = (1.0 - w) * g_lr + w * self.base.eval(at2)
        return float(out) if (np.ndim(t2) == 0 and np.ndim(t3) == 0) else out

    def t2_kinks(self):
        z = std_normal_quantile(1.0 - self.base.alpha / 2.0)
        return np.unique(np.concatenate([self.base.kink_points(), [z]]))

    def t3_kinks(self):
        return _WEIGHT_T.copy()


def serialize_boundary(boundary):
    """Render a boundary as structured text with exact round-trip floats.

    Format: ``alpha`` line, ``kind`` line (linear | step), ``knots`` count,
    one ``t g`` pair per line, ``tail`` line.  Floats are written with
    shortest exact decimal rendering (full double precision), so
    deserialization reproduces the object bit for bit.
    """
    if isinstance(boundary, GBoundary):
        kind = "linear"
        alpha = boundary.alpha
        pairs = boundary.knots
        tail = boundary.tail
    elif isinstance(boundary, StepBoundary):
        kind = "step"
        alpha = boundary.level
        pairs = tuple((c, c) for c in boundary.steps)
        tail = boundary.steps[-1]
    else:
        raise TypeError("not a boundary: %r" % (boundary,))
    lines = ["alpha %s" % repr(alpha), "kind %s" % kind, "knots %d" % len(pairs)]
    lines.extend("%s %s" % (repr(t), repr(g)) for t, g in pairs)
    lines.append("tail %s" % repr(tail))
    return "\n".join(lines) + "\n"


def deserialize_boundary(text):
    """Parse the structured text format back into a boundary object."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    try:
        if not lines[0].startswith("alpha "):
            raise MalformedBoundaryFileError("first line must declare alpha")
        alpha = float(lines[0].split()[1])
        kind = lines[1].split()
        if kind[0] != "kind" or kind[1] not in ("linear", "step"):
            raise MalformedBoundaryFileError("second line must declare kind")
        kind = kind[1]
        head = lines[2].split()
        if head[0] != "knots":
            raise MalformedBoundaryFileError("third line must declare knot count")
        n = int(head[1])
        if n <= 0:
            raise MalformedBoundaryFileError("empty knot list")
        pairs = []
        for ln in lines[3:3 + n]:
            t_str, g_str = ln.split()
            pairs.append((float(t_str), float(g_str)))
        if len(pairs) != n:
            raise MalformedBoundaryFileError("knot count does not match data")
        tail_line = lines[3 + n].split()
        if tail_line[0] != "tail":
            raise MalformedBoundaryFileError("missing tail line")
        tail = float(tail_line[1])
    except MalformedBoundaryFileError:
        raise
    except (IndexError, ValueError) as exc:
        raise MalformedBoundaryFileError("unparseable boundary file: %s" % exc) from exc
    if kind == "linear":
        return GBoundary(alpha=alpha, knots=tuple(pairs), tail=tail)
    for t, g in pairs:
        if t != g:
            raise MalformedBoundaryFileError("step knots must have t == g")
    return StepBoundary(level=alpha, steps=tuple(t for t, _ in pairs))


def save_boundary(boundary, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_boundary(boundary))


def load_boundary(path):
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize_boundary(fh.read())
