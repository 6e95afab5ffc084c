"""Request/response models of the HTTP service.

Bounded-time operations only: test decisions, boundary evaluation, exact
similar construction, and NRP curves capped at MAX_GRID points per request.
The long-running constructions (optimize, envelope) are batch workflows and
stay on the command line.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

#: Largest NRP grid a single request may carry.
MAX_GRID = 256


class HealthResponse(BaseModel):
    status: str
    version: str


class TestRequest(BaseModel):
    t1: float
    t2: float
    t3: Optional[float] = None
    alpha: float = Field(0.05, gt=0.0, lt=1.0)


class TestReportModel(BaseModel):
    name: str
    inputs: list[float]
    statistic: float
    boundary_value: float
    decision: Literal["reject", "accept"]
    alpha: float

    @classmethod
    def from_report(cls, report):
        return cls(
            name=report.name,
            inputs=list(report.inputs),
            statistic=report.statistic,
            boundary_value=report.boundary_value,
            decision=report.decision,
            alpha=report.alpha,
        )


class TestResponse(BaseModel):
    reports: list[TestReportModel]


class BoundaryValueRequest(BaseModel):
    t: list[float] = Field(min_length=1, max_length=MAX_GRID)
    boundary: Literal["published", "lr", "exact"] = "published"
    alpha: float = Field(0.05, gt=0.0, lt=1.0)

    @field_validator("t")
    @classmethod
    def _finite_nonnegative(cls, v):
        for x in v:
            if not (x == x and abs(x) != float("inf")) or x < 0.0:
                raise ValueError("t values must be finite and nonnegative")
        return v


class BoundaryValueResponse(BaseModel):
    values: list[float]
    boundary_id: str


class ExactRequest(BaseModel):
    alpha: float = Field(0.05, gt=0.0, lt=1.0)


class ExactResponse(BaseModel):
    level: float
    steps: list[float]


class NrpRequest(BaseModel):
    boundary: Literal["published", "lr", "exact", "wald"] = "published"
    grid: list[float] = Field(min_length=1, max_length=MAX_GRID)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    tol: float = Field(1e-8, gt=0.0)

    @field_validator("grid")
    @classmethod
    def _finite_nonnegative(cls, v):
        for x in v:
            if not (x == x and abs(x) != float("inf")) or x < 0.0:
                raise ValueError("grid values must be finite and nonnegative")
        return v


class NrpResponse(BaseModel):
    points: list[list[float]]
    values: list[float]
    errors: list[float]
    boundary_id: str


class ErrorResponse(BaseModel):
    error: str
    message: str
