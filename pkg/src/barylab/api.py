"""HTTP service exposing the laboratory; the command line is a thin client.

Every computation lives in the core modules; this layer only validates
requests (pydantic), dispatches to `sweeps`, and shapes responses.  Errors
map to status codes the client can act on:

* DomainError               -> 400 (bad parameters)
* QuadratureRefinementError -> 422 (grid cannot reach the accuracy target)
* ConsistencyError          -> 409 (an internal cross-check failed)

The service is stateless, so it can also be mounted in process through an
ASGI transport with identical behavior, which is how the CLI talks to it by
default (no sockets involved).
"""

from __future__ import annotations

from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import sweeps
from ._version import __version__
from .errors import ConsistencyError, DomainError, QuadratureRefinementError

app = FastAPI(
    title="barylab",
    version=__version__,
    description=(
        "Numerical laboratory for the Gaussian isoperimetric functional "
        "with barycenter repulsion."
    ),
)


@app.exception_handler(DomainError)
async def _domain_error(request: Request, exc: DomainError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(QuadratureRefinementError)
async def _refinement_error(request: Request, exc: QuadratureRefinementError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(ConsistencyError)
async def _consistency_error(request: Request, exc: ConsistencyError) -> JSONResponse:
    return JSONResponse(status_code=409, content={"detail": str(exc)})


# ---------------------------------------------------------------------------
# models


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class TableResponse(BaseModel):
    """One task's output: fixed column order plus one record per grid point."""

    columns: list[str]
    rows: list[dict[str, Any]]


class GridRequest(BaseModel):
    s_values: list[float] = Field(min_length=1)
    eps0_values: list[float] = Field(default=[1.3], min_length=1)


class SValuesRequest(BaseModel):
    s_values: list[float] = Field(min_length=1)


class CompareBallRequest(BaseModel):
    volume: float = Field(default=0.5, gt=0.0, lt=1.0)


class SweepRequest(BaseModel):
    s_values: list[float] = Field(min_length=1)
    eps0_values: list[float] = Field(default=[1.3], min_length=1)
    tasks: list[str] = Field(default=["phase"], min_length=1)
    seed: int = 0
    volume: float = Field(default=0.5, gt=0.0, lt=1.0)


class SweepResponse(BaseModel):
    version: str
    spec: dict[str, Any]
    tasks: dict[str, TableResponse]


class Solve1DRequest(BaseModel):
    s: float = Field(gt=0.0)
    eps0: float = Field(ge=0.0)
    n_grid: int = Field(default=10_000, ge=100)
    brute_force_k: int | None = Field(default=None, ge=1, le=3)
    brute_grid: int = Field(default=9, ge=3)


class CensusModel(BaseModel):
    window: list[float]
    g_at_a: float
    decreasing: bool
    sign_changes: int
    interior_minima: list[float]
    warning: bool


class BruteForceModel(BaseModel):
    intervals: list[list[float | None]]  # null endpoint = unbounded side
    energy: float
    p_hat: float
    b_hat: float
    n_intervals: int
    is_single_interval: bool
    is_half_line: bool


class Solve1DResponse(BaseModel):
    s: float
    eps0: float
    winner: str
    t_star: float | None
    energies: dict[str, float]
    family_min_t: float
    family_min_f: float
    family_min_at_boundary: bool
    threshold_eps0: float
    warning: bool
    census: CensusModel
    brute_force: BruteForceModel | None = None


class StabilityRequest(BaseModel):
    s: float = Field(gt=0.0)
    eps0: float = Field(ge=0.0)
    candidate: Literal["strip", "half_space"] = "strip"
    basis_size: int = Field(default=16, ge=4)
    locate_critical: bool = True


class StabilityResponse(BaseModel):
    s: float
    eps0: float
    candidate: str
    basis_size: int
    eigenvalues: list[float]
    min_eigenvalue: float
    rotation_eigenvalue: float
    critical_eps0: float | None
    converged: bool
    doubling_change: float
    eps0_stab: float


class FlowRequest(BaseModel):
    s: float = Field(gt=0.0)
    eps0: float = Field(ge=0.0)
    topology: Literal["single", "double"] = "single"
    seed: int = 0
    amplitude: float = Field(default=0.1, ge=0.0)
    n_nodes: int = Field(default=257, ge=64)
    half_width: float = Field(default=8.0, ge=8.0)
    max_steps: int = Field(default=5000, ge=1)
    grad_tol: float = Field(default=1e-8, gt=0.0)
    include_profile: bool = False


class ProfileModel(BaseModel):
    topology: str
    grid: list[float]
    values: list[list[float]]


class FlowResponse(BaseModel):
    s: float
    eps0: float
    topology: str
    seed: int
    converged: bool
    line_search_failed: bool
    steps: int
    grad_norm: float
    flatness: float
    F_hat: float
    p_hat: float
    barycenter_term: float
    volume_deficit: float
    reference_F_hat: float
    abs_err: float
    euler_lambda: float
    euler_residual_norm: float
    energy_initial: float
    energy_final: float
    history_length: int
    profile: ProfileModel | None = None


# ---------------------------------------------------------------------------
# endpoints


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def _table(task: str, spec: sweeps.SweepSpec) -> TableResponse:
    rows = sweeps.run_task(task, spec)
    return TableResponse(columns=list(sweeps.TASK_COLUMNS[task]), rows=rows)


@app.post("/phase", response_model=TableResponse)
def phase(req: GridRequest) -> TableResponse:
    spec = sweeps.SweepSpec(
        s_values=tuple(req.s_values), eps0_values=tuple(req.eps0_values), tasks=("phase",)
    )
    return _table("phase", spec)


@app.post("/asymptotics", response_model=TableResponse)
def asymptotics(req: SValuesRequest) -> TableResponse:
    spec = sweeps.SweepSpec(s_values=tuple(req.s_values), tasks=("asymptotics",))
    return _table("asymptotics", spec)


@app.post("/threshold", response_model=TableResponse)
def threshold(req: SValuesRequest) -> TableResponse:
    rows = sweeps.threshold_rows(req.s_values)
    return TableResponse(columns=list(sweeps.TASK_COLUMNS["threshold"]), rows=rows)


@app.post("/compare-ball", response_model=TableResponse)
def compare_ball(req: CompareBallRequest) -> TableResponse:
    rows = sweeps.compare_ball_rows(req.volume)
    return TableResponse(columns=list(sweeps.TASK_COLUMNS["compare-ball"]), rows=rows)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    spec = sweeps.SweepSpec(
        s_values=tuple(req.s_values),
        eps0_values=tuple(req.eps0_values),
        tasks=tuple(req.tasks),
        seed=req.seed,
        volume=req.volume,
    )
    payload = sweeps.run(spec)
    return SweepResponse(
        version=payload["version"],
        spec=payload["spec"],
        tasks={
            name: TableResponse(columns=t["columns"], rows=t["rows"])
            for name, t in payload["tasks"].items()
        },
    )


@app.post("/solve1d", response_model=Solve1DResponse)
def solve1d_endpoint(req: Solve1DRequest) -> Solve1DResponse:
    report = sweeps.solve1d_report(
        req.s,
        req.eps0,
        n_grid=req.n_grid,
        brute_force_k=req.brute_force_k,
        brute_grid=req.brute_grid,
    )
    return Solve1DResponse(**report)


@app.post("/stability", response_model=StabilityResponse)
def stability_endpoint(req: StabilityRequest) -> StabilityResponse:
    report = sweeps.stability_report(
        req.s,
        req.eps0,
        candidate=req.candidate,
        basis_size=req.basis_size,
        locate_critical=req.locate_critical,
    )
    return StabilityResponse(**report)


@app.post("/flow", response_model=FlowResponse)
def flow_endpoint(req: FlowRequest) -> FlowResponse:
    report = sweeps.flow_report(
        req.s,
        req.eps0,
        topology=req.topology,
        seed=req.seed,
        amplitude=req.amplitude,
        n_nodes=req.n_nodes,
        half_width=req.half_width,
        max_steps=req.max_steps,
        grad_tol=req.grad_tol,
        include_profile=req.include_profile,
    )
    return FlowResponse(**report)
