"""Decision procedures for the no-mediation null and their OLS front-end.

The null theta1 * theta2 = 0 is tested through the pair of t-ratios
(T1, T2) of the mediator path: T1 from the mediator-on-treatment
regression, T2 from the outcome-on-mediator slope.  Rules implemented:

* g-test: reject when the smaller ordered |t| clears a boundary evaluated
  at the larger one,
* its three-statistic extension with a weight-spline boundary,
* likelihood ratio: reject when min(|t1|, |t2|) clears the two-sided
  critical value,
* Sobel/Wald: reject when t1^2 t2^2 / (t1^2 + t2^2) clears the chi-square
  critical value (equivalently, its square root clears the normal one).

``ols_mediation`` turns raw data into the t-ratios: all variables are
demeaned, optional controls are partialed out of y, m and x, and the two
regressions y ~ x + m and m ~ x are fit by least squares.  Degrees of
freedom count the demeaning and the partialed-out controls, so the
t-ratios agree with running the full regressions with intercept and
controls included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import WeightedBoundary3D, published_optimal_boundary
from .dist import std_normal_quantile
from .errors import DomainError, SingularDesignError, UndefinedStatisticError

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class MediationData:
    """Raw inputs: outcome y, mediator m, treatment x, optional controls."""

    y: tuple
    m: tuple
    x: tuple
    controls: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        m = np.asarray(self.m, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or m.ndim != 1 or x.ndim != 1:
            raise DomainError("y, m, x must be one-dimensional")
        n = y.size
        if m.size != n or x.size != n:
            raise DomainError("y, m, x must have equal length")
        if not (np.isfinite(y).all() and np.isfinite(m).all() and np.isfinite(x).all()):
            raise DomainError("data must be finite")
        if self.controls is None:
            c = None
            p = 0
        else:
            c = np.asarray(self.controls, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.ndim != 2 or c.shape[0] != n:
                raise DomainError("controls must be an (n, p) matrix")
            if not np.isfinite(c).all():
                raise DomainError("controls must be finite")
            p = c.shape[1]
        if n <= p + 3:
            raise DomainError(
                "need n > p + 3 observations (n=%d, p=%d)" % (n, p)
            )
        object.__setattr__(self, "y", tuple(y))
        object.__setattr__(self, "m", tuple(m))
        object.__setattr__(self, "x", tuple(x))
        object.__setattr__(
            self, "controls", None if c is None else tuple(map(tuple, c))
        )

    @property
    def n_obs(self):
        return len(self.y)

    @property
    def n_controls(self):
        return 0 if self.controls is None else len(self.controls[0])


@dataclass(frozen=True)
class MediationEstimates:
    """OLS output of the three mediation regressions.

    ``tau`` and ``theta2`` come from y ~ x + m, ``theta1`` from m ~ x,
    ``tau_star`` from y ~ x; ``sigma11`` and ``sigma22`` are the residual
    variance estimates of the first two.  The decomposition
    tau_star = tau + theta1 * theta2 is an algebraic identity of the three
    fits and is enforced here (scaled 1e-10).
    """

    tau: float
    theta1: float
    theta2: float
    tau_star: float
    t1: float
    t2: float
    sigma11: float
    sigma22: float

    def __post_init__(self):
        if self.sigma11 < 0.0 or self.sigma22 < 0.0:
            raise DomainError("residual variances must be nonnegative")
        gap = abs(self.tau_star - self.tau - self.theta1 * self.theta2)
        if gap > 1e-10 * max(1.0, abs(self.tau_star)):
            raise DomainError(
                "effect decomposition violated: tau* - tau - theta1*theta2 = %g"
                % gap
            )


@dataclass(frozen=True)
class TestReport:
    """One decision: rule name, inputs, statistic, cutoff, reject/accept."""

    name: str
    inputs: tuple
    statistic: float | None
    boundary_value: float | None
    decision: str
    alpha: float

    def __post_init__(self):
        if self.decision not in ("reject", "accept"):
            raise DomainError("decision must be 'reject' or 'accept'")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must be in (0, 1)")
        object.__setattr__(self, "inputs", tuple(float(v) for v in self.inputs))

    @property
    def reject(self):
        return self.decision == "reject"


def _residualize(v, basis):
    # least-squares residual of v on the columns of basis
    coef, _, _, _ = np.linalg.lstsq(basis, v, rcond=None)
    return v - basis @ coef


def _check_rank(mat, label):
    rank = np.linalg.matrix_rank(mat, tol=None)
    if rank < mat.shape[1]:
        raise SingularDesignError("%s design is rank deficient" % label)


def ols_mediation(data, ml_variance=False):
    """Fit the three mediation regressions and return the estimates.

    Variables are demeaned; controls, if present, are partialed out of
    y, m and x before the fits (coefficients then match the full
    regressions including controls).  Residual variances divide by the
    full-model degrees of freedom n - p - 3 and n - p - 2; with
    ``ml_variance`` they divide by n instead.
    """
    if not isinstance(data, MediationData):
        data = MediationData(*data) if isinstance(data, tuple) else MediationData(**data)
    y = np.array(data.y, dtype=float)
    m = np.array(data.m, dtype=float)
    x = np.array(data.x, dtype=float)
    n = y.size
    p = data.n_controls

    y = y - y.mean()
    m = m - m.mean()
    x = x - x.mean()
    if p:
        c = np.array(data.controls, dtype=float)
        c = c - c.mean(axis=0)
        _check_rank(c, "controls")
        y = _residualize(y, c)
        m = _residualize(m, c)
        x = _residualize(x, c)

    design = np.column_stack([x, m])
    _check_rank(design, "outcome-equation")

    # y ~ x + m
    beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    tau, theta2 = float(beta[0]), float(beta[1])
    resid1 = y - design @ beta
    df1 = n if ml_variance else n - p - 3
    sigma11 = float(resid1 @ resid1) / df1
    xtx_inv = np.linalg.inv(design.T @ design)
    t2 = theta2 / math.sqrt(sigma11 * xtx_inv[1, 1])

    # m ~ x
    sxx = float(x @ x)
    theta1 = float(x @ m) / sxx
    resid2 = m - theta1 * x
    df2 = n if ml_variance else n - p - 2
    sigma22 = float(resid2 @ resid2) / df2
    t1 = theta1 / math.sqrt(sigma22 / sxx)

    # y ~ x
    tau_star = float(x @ y) / sxx

    return MediationEstimates(
        tau=tau,
        theta1=theta1,
        theta2=theta2,
        tau_star=tau_star,
        t1=t1,
        t2=t2,
        sigma11=sigma11,
        sigma22=sigma22,
    )


def g_test(t1, t2, boundary=None):
    """Reject when the smaller |t| exceeds the boundary at the larger |t|."""
    if boundary is None:
        boundary = published_optimal_boundary()
    lo, hi = np.sort(np.abs([float(t1), float(t2)]))
    bval = float(boundary.eval(hi))
    return TestReport(
        name="g",
        inputs=(t1, t2),
        statistic=float(lo),
        boundary_value=bval,
        decision="reject" if lo > bval else "accept",
        alpha=boundary.alpha,
    )


def g_test_3d(t1, t2, t3, weighted=None):
    """Three-statistic rule: smallest |t| against the weighted boundary.

    The boundary blends min(t, z) toward the two-statistic boundary as the
    largest |t| grows; at |t|_(3) >= 2.7 the weight is one and the decision
    coincides with :func:`g_test` on the two smaller statistics.
    """
    if weighted is None:
        weighted = WeightedBoundary3D(published_optimal_boundary())
    a1, a2, a3 = np.sort(np.abs([float(t1), float(t2), float(t3)]))
    bval = float(weighted.eval(a2, a3))
    return TestReport(
        name="g3d",
        inputs=(t1, t2, t3),
        statistic=float(a1),
        boundary_value=bval,
        decision="reject" if a1 > bval else "accept",
        alpha=weighted.base.alpha,
    )


def lr_test(t1, t2, t3=None, alpha=0.05):
    """Likelihood ratio: reject when the smallest |t| clears z_{alpha/2}.

    The same form covers the three-link product null when ``t3`` is given.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must be in (0, 1)")
    inputs = (t1, t2) if t3 is None else (t1, t2, t3)
    stat = float(min(abs(t) for t in inputs))
    z = float(std_normal_quantile(1.0 - alpha / 2.0))
    return TestReport(
        name="lr",
        inputs=inputs,
        statistic=stat,
        boundary_value=z,
        decision="reject" if stat > z else "accept",
        alpha=float(alpha),
    )


def sobel_wald_test(t1, t2, t3=None, alpha=0.05):
    """Sobel/Wald: reject when t1^2 t2^2 / (t1^2 + t2^2) clears chi2_1.

    The reported statistic is the square root (the Sobel z-value), compared
    against z_{alpha/2}; this is the same rejection region.  The harmonic
    form 1 / sqrt(sum t_k^-2), which the two-argument statistic equals, is
    the delta-method statistic for any product of coefficients, so ``t3``
    extends it to the three-link null.  Undefined when every t is zero.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must be in (0, 1)")
    inputs = tuple(float(t) for t in ((t1, t2) if t3 is None else (t1, t2, t3)))
    if any(t == 0.0 for t in inputs):
        if all(t == 0.0 for t in inputs):
            raise UndefinedStatisticError("Sobel/Wald statistic undefined at t = 0")
        stat = 0.0  # a zero coordinate kills the product estimate exactly
    else:
        stat = 1.0 / math.sqrt(sum(1.0 / (t * t) for t in inputs))
    z = float(std_normal_quantile(1.0 - alpha / 2.0))
    return TestReport(
        name="sobel-wald",
        inputs=inputs,
        statistic=stat,
        boundary_value=z,
        decision="reject" if stat > z else "accept",
        alpha=float(alpha),
    )
