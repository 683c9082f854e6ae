"""Task allocation and training simulation for heterogeneous edge learners."""

__version__ = "0.1.0"

from .allocation import (
    Allocation,
    AsyncProblem,
    brute_force_small,
    floor_and_repair,
    hu_equal_allocation,
    improve_cd,
    solve_allocation,
    staleness,
)
from .costs import (
    CostCoeffs,
    LearnerProfile,
    SystemParams,
    achievable_rate,
    cost_coeffs,
    dbm_to_watts,
    energy_coeffs,
    path_loss_gain,
    predict_energy,
    predict_time,
    time_coeffs,
)
from .qcqp import QcqpForm, assemble_qcqp
from .scenario import ScenarioSpec, SuiteManifest, parse_any, parse_manifest, parse_scenario
from .sim import run_experiment
from .sync import (
    DualMultipliers,
    SyncSolution,
    assemble_dual_functions,
    bisection_oracle,
    extract_candidate,
    project_feasible,
    solve_dual_sdp,
)

__all__ = [
    "Allocation",
    "AsyncProblem",
    "CostCoeffs",
    "DualMultipliers",
    "LearnerProfile",
    "QcqpForm",
    "ScenarioSpec",
    "SuiteManifest",
    "SyncSolution",
    "SystemParams",
    "achievable_rate",
    "assemble_dual_functions",
    "assemble_qcqp",
    "bisection_oracle",
    "brute_force_small",
    "cost_coeffs",
    "dbm_to_watts",
    "energy_coeffs",
    "extract_candidate",
    "floor_and_repair",
    "hu_equal_allocation",
    "improve_cd",
    "parse_any",
    "parse_manifest",
    "parse_scenario",
    "path_loss_gain",
    "predict_energy",
    "predict_time",
    "project_feasible",
    "run_experiment",
    "solve_allocation",
    "solve_dual_sdp",
    "staleness",
    "time_coeffs",
]
