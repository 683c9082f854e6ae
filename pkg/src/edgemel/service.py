"""HTTP service wrapping the allocation solvers and simulator.

Stateless compute endpoints: requests carry scenario/manifest text, responses
carry result payloads (including complete CSV bodies), so the service never
touches the filesystem and any number of clients can share one instance.
Domain errors map to a machine-readable ``kind`` that clients (notably the
CLI) translate into exit codes.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .allocation import solve_allocation
from .errors import (
    ContractViolation,
    InfeasibleError,
    ScenarioError,
    SolverConvergenceError,
    SolverUnboundedError,
)
from .scenario import parse_manifest, parse_scenario
from .sim import build_problem, generate_learners, run_experiment
from .suite import (
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    compare_report,
    rows_to_csv,
    run_suite,
    summary_row,
    trace_filename,
    trace_to_rows,
    validate_trace,
)

app = FastAPI(
    title="edgemel",
    version=__version__,
    description="Task allocation and training simulation for heterogeneous edge learners",
)


ERROR_KINDS = {
    ScenarioError: "parse_error",
    InfeasibleError: "infeasible",
    SolverConvergenceError: "non_convergence",
    SolverUnboundedError: "non_convergence",
    ContractViolation: "contract_violation",
}


@app.exception_handler(ScenarioError)
@app.exception_handler(InfeasibleError)
@app.exception_handler(SolverConvergenceError)
@app.exception_handler(SolverUnboundedError)
@app.exception_handler(ContractViolation)
async def _domain_error_handler(_request: Request, exc: Exception):
    return JSONResponse(
        status_code=400,
        content={"kind": ERROR_KINDS[type(exc)], "detail": str(exc)},
    )


class ScenarioRequest(BaseModel):
    scenario: str = Field(description="scenario file content (YAML)")
    scheme: str | None = None
    staleness: int | None = None
    seed: int | None = None


class LearnerInfo(BaseModel):
    id: int
    cpu_freq_hz: float
    tx_power_w: float
    channel_gain: float
    energy_cap_j: float
    distance_m: float


class AllocateResponse(BaseModel):
    scenario_id: str
    scheme: str
    objective: float
    staleness: int
    tau: list[int]
    d: list[int]
    predicted_time_s: list[float]
    predicted_energy_j: list[float]
    continuous_objective: float | None
    dual_bound: float | None
    learners: list[LearnerInfo]


class FilePayload(BaseModel):
    name: str
    content: str


class SimulateResponse(BaseModel):
    scenario_id: str
    files: list[FilePayload]
    summary: dict
    stopping: str


class SuiteRequest(BaseModel):
    manifest: str = Field(description="manifest file content (YAML)")


class SuiteResponse(BaseModel):
    suite_id: str
    tool_version: str
    content_hash: str
    scenario_count: int
    files: list[FilePayload]
    failures: list[tuple[str, str]]


class CompareRequest(BaseModel):
    summaries: list[str]


class CompareResponse(BaseModel):
    report_csv: str
    rows: list[dict]


class ValidateRequest(BaseModel):
    scenario: str
    trace_csv: str


class ValidateResponse(BaseModel):
    ok: bool
    violations: list[str]


def _apply_overrides(spec, req: ScenarioRequest):
    updates = {}
    if req.scheme is not None:
        updates["scheme"] = req.scheme
    if req.staleness is not None:
        updates["c"] = req.staleness
    if req.seed is not None:
        updates["seed"] = req.seed
    if updates:
        spec = dataclasses.replace(spec, **updates)
        if spec.scheme not in ("ha-sync", "ha-asyn", "hu-sync", "hu-asyn"):
            raise ScenarioError(f"unknown scheme {spec.scheme!r}", path="scheme")
        if spec.c < 0:
            raise ScenarioError("staleness must be >= 0", path="staleness")
    return spec


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


@app.post("/allocate", response_model=AllocateResponse)
def allocate(req: ScenarioRequest):
    spec = _apply_overrides(parse_scenario(req.scenario), req)
    profiles, distances = generate_learners(spec)
    problem = build_problem(spec, profiles)
    report = solve_allocation(problem, spec.scheme, suggest=spec.suggest)
    alloc = report.allocation
    return AllocateResponse(
        scenario_id=spec.id,
        scheme=spec.scheme,
        objective=alloc.objective,
        staleness=alloc.staleness,
        tau=[int(v) for v in alloc.tau],
        d=[int(v) for v in alloc.d],
        predicted_time_s=[float(v) for v in alloc.predicted_time_s],
        predicted_energy_j=[float(v) for v in alloc.predicted_energy_j],
        continuous_objective=report.continuous_objective,
        dual_bound=report.dual_bound_tau,
        learners=[
            LearnerInfo(
                id=p.id,
                cpu_freq_hz=p.cpu_freq_hz,
                tx_power_w=p.tx_power_w,
                channel_gain=p.channel_gain,
                energy_cap_j=p.energy_cap_j,
                distance_m=float(distances[k]),
            )
            for k, p in enumerate(profiles)
        ],
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: ScenarioRequest):
    spec = _apply_overrides(parse_scenario(req.scenario), req)
    trace = run_experiment(spec)
    if trace.error:
        raise InfeasibleError(trace.error)
    row = summary_row(trace)
    files = [
        FilePayload(name=trace_filename(spec), content=rows_to_csv(TRACE_COLUMNS, trace_to_rows(trace))),
        FilePayload(name="summary.csv", content=rows_to_csv(SUMMARY_COLUMNS, [row])),
    ]
    clean = {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in row.items()}
    return SimulateResponse(scenario_id=spec.id, files=files, summary=clean, stopping=trace.stopping)


@app.post("/suite", response_model=SuiteResponse)
def suite(req: SuiteRequest):
    manifest = parse_manifest(req.manifest)
    result = run_suite(manifest)
    return SuiteResponse(
        suite_id=result.suite_id,
        tool_version=manifest.tool_version,
        content_hash=manifest.content_hash,
        scenario_count=len(manifest.scenarios),
        files=[FilePayload(name=n, content=c) for n, c in result.files.items()],
        failures=result.failures,
    )


@app.post("/compare", response_model=CompareResponse)
def compare(req: CompareRequest):
    report_csv, rows = compare_report(req.summaries)
    return CompareResponse(report_csv=report_csv, rows=rows)


@app.post("/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    spec = parse_scenario(req.scenario)
    violations = validate_trace(spec, req.trace_csv)
    return ValidateResponse(ok=not violations, violations=violations)
