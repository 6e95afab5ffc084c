"""HTTP facade over the bounded-time operations.

Each handler is a plain function from request model to response model, so
the command line can call them in process; :func:`create_app` wires the
same handlers into a FastAPI application.  Domain violations map to 400,
numeric failures to 500, both with a machine-parseable error name.
"""

from __future__ import annotations

from . import __version__
from .boundary import exact_similar_boundary, lr_boundary, published_optimal_boundary
from .errors import DomainError, NumericError
from .mediation import g_test, g_test_3d, lr_test, sobel_wald_test
from .rp import nrp_curve, wald_rp
from .schemas import (
    BoundaryValueRequest,
    BoundaryValueResponse,
    ExactRequest,
    ExactResponse,
    HealthResponse,
    NrpRequest,
    NrpResponse,
    TestReportModel,
    TestRequest,
    TestResponse,
)


def get_health():
    return HealthResponse(status="ok", version=__version__)


def _select_boundary(name, alpha):
    if name == "published":
        if alpha != 0.05:
            raise DomainError("the published boundary is level 0.05 only")
        return published_optimal_boundary()
    if name == "lr":
        return lr_boundary(alpha)
    if name == "exact":
        return exact_similar_boundary(alpha)
    raise DomainError("unknown boundary selector: %r" % (name,))


def post_test(req: TestRequest):
    """The g-test decision plus the LR and Sobel/Wald comparisons."""
    if req.t3 is None:
        if req.alpha != 0.05:
            raise DomainError("g-test boundaries are published for level 0.05 only")
        reports = [
            g_test(req.t1, req.t2),
            lr_test(req.t1, req.t2, alpha=req.alpha),
            sobel_wald_test(req.t1, req.t2, alpha=req.alpha),
        ]
    else:
        if req.alpha != 0.05:
            raise DomainError("the three-dimensional boundary is level 0.05 only")
        reports = [
            g_test_3d(req.t1, req.t2, req.t3),
            lr_test(req.t1, req.t2, req.t3, alpha=req.alpha),
            sobel_wald_test(req.t1, req.t2, req.t3, alpha=req.alpha),
        ]
    return TestResponse(reports=[TestReportModel.from_report(r) for r in reports])


def post_boundary_value(req: BoundaryValueRequest):
    bound = _select_boundary(req.boundary, req.alpha)
    values = [float(bound.eval(t)) for t in req.t]
    return BoundaryValueResponse(values=values, boundary_id=req.boundary)


def post_exact(req: ExactRequest):
    bound = exact_similar_boundary(req.alpha)
    return ExactResponse(level=bound.level, steps=list(bound.steps))


def post_nrp(req: NrpRequest):
    if req.boundary == "wald":
        values = [wald_rp((0.0, mu0), alpha=req.alpha, tol=req.tol) for mu0 in req.grid]
        return NrpResponse(
            points=[[0.0, mu0] for mu0 in req.grid],
            values=values,
            errors=[req.tol] * len(values),
            boundary_id="wald",
        )
    bound = _select_boundary(req.boundary, req.alpha)
    grid = nrp_curve(bound, req.grid, tol=req.tol, boundary_id=req.boundary)
    return NrpResponse(
        points=[list(p) for p in grid.points],
        values=list(grid.values),
        errors=list(grid.errors),
        boundary_id=grid.boundary_id,
    )


def create_app():
    """FastAPI application exposing the handlers above."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="nearsim", version=__version__)

    def _payload(exc):
        return {"error": type(exc).__name__, "message": str(exc)}

    @app.exception_handler(DomainError)
    async def _domain(request: Request, exc: DomainError):
        return JSONResponse(status_code=400, content=_payload(exc))

    @app.exception_handler(NumericError)
    async def _numeric(request: Request, exc: NumericError):
        return JSONResponse(status_code=500, content=_payload(exc))

    @app.get("/health", response_model=HealthResponse)
    async def health():
        return get_health()

    @app.post("/test", response_model=TestResponse)
    async def test(req: TestRequest):
        return post_test(req)

    @app.post("/boundary/value", response_model=BoundaryValueResponse)
    async def boundary_value(req: BoundaryValueRequest):
        return post_boundary_value(req)

    @app.post("/exact", response_model=ExactResponse)
    async def exact(req: ExactRequest):
        return post_exact(req)

    @app.post("/nrp", response_model=NrpResponse)
    async def nrp(req: NrpRequest):
        return post_nrp(req)

    return app
