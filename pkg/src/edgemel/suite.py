"""Suite execution, CSV emission, comparison reports, trace validation.

CSV schemas are fixed:

* trace:   cycle, learner, tau, d, time_s, energy_j, staleness, loss, acc
* summary: scenario_id, scheme, c, T, E, obj_mean_tau, dual_bound,
           cycles_to_threshold, final_loss, final_acc

Bodies are emitted with '\n' line endings and shortest round-trip float
formatting, so rerunning a manifest reproduces byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .costs import predict_energy, predict_time
from .errors import ScenarioError
from .scenario import ScenarioSpec, SuiteManifest
from .sim import SimTrace, build_problem, generate_learners, run_experiment

TRACE_COLUMNS = ("cycle", "learner", "tau", "d", "time_s", "energy_j", "staleness", "loss", "acc")
SUMMARY_COLUMNS = (
    "scenario_id", "scheme", "c", "T", "E", "obj_mean_tau", "dual_bound",
    "cycles_to_threshold", "final_loss", "final_acc",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        return []
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def trace_filename(spec: ScenarioSpec) -> str:
    return f"{spec.id}__{spec.scheme}__c{spec.c}__trace.csv"


def trace_to_rows(trace: SimTrace) -> list[dict]:
    rows = []
    for ledger in trace.ledgers:
        for k in range(trace.spec.K):
            rows.append(
                {
                    "cycle": ledger.cycle,
                    "learner": k,
                    "tau": int(ledger.tau[k]),
                    "d": int(ledger.d[k]),
                    "time_s": float(ledger.time_s[k]),
                    "energy_j": float(ledger.energy_j[k]),
                    "staleness": ledger.staleness,
                    "loss": ledger.global_loss,
                    "acc": ledger.val_acc,
                }
            )
    return rows


def cycles_to_threshold(trace: SimTrace) -> int | None:
    """1-based count of cycles until a configured threshold is reached."""
    spec = trace.spec
    if spec.loss_threshold is None and spec.acc_threshold is None:
        return None
    for ledger in trace.ledgers:
        hit_loss = spec.loss_threshold is not None and ledger.global_loss <= spec.loss_threshold
        hit_acc = (
            spec.acc_threshold is not None
            and ledger.val_acc is not None
            and ledger.val_acc >= spec.acc_threshold
        )
        if hit_loss or hit_acc:
            return ledger.cycle + 1
    return None


def summary_row(trace: SimTrace) -> dict:
    spec = trace.spec
    ledgers = trace.ledgers
    dual = next((l.dual_bound for l in ledgers if l.dual_bound is not None), None)
    return {
        "scenario_id": spec.id,
        "scheme": spec.scheme,
        "c": spec.c,
        "T": spec.T,
        "E": spec.E,
        "obj_mean_tau": (sum(l.objective for l in ledgers) / len(ledgers)) if ledgers else None,
        "dual_bound": dual,
        "cycles_to_threshold": cycles_to_threshold(trace),
        "final_loss": ledgers[-1].global_loss if ledgers else None,
        "final_acc": ledgers[-1].val_acc if ledgers else None,
    }


@dataclass
class SuiteResult:
    """In-memory suite output: callers decide where the bytes land."""

    suite_id: str
    files: dict = field(default_factory=dict)     # name -> CSV body
    summary_rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (scenario_id, message)


def run_suite(manifest: SuiteManifest) -> SuiteResult:
    """Run every scenario of a manifest; failures are recorded, not fatal."""
    result = SuiteResult(suite_id=manifest.suite_id)
    for spec in manifest.scenarios:
        try:
            trace = run_experiment(spec)
        except Exception as exc:  # noqa: BLE001 - suite must survive bad rows
            result.failures.append((spec.id, f"{type(exc).__name__}: {exc}"))
            result.summary_rows.append(
                {
                    "scenario_id": spec.id, "scheme": spec.scheme, "c": spec.c,
                    "T": spec.T, "E": spec.E, "obj_mean_tau": None, "dual_bound": None,
                    "cycles_to_threshold": None, "final_loss": None, "final_acc": None,
                }
            )
            continue
        if trace.error:
            result.failures.append((spec.id, trace.error))
        result.files[trace_filename(spec)] = rows_to_csv(TRACE_COLUMNS, trace_to_rows(trace))
        result.summary_rows.append(summary_row(trace))
    result.files["summary.csv"] = rows_to_csv(SUMMARY_COLUMNS, result.summary_rows)
    if result.failures:
        lines = ["scenario_id,error"]
        lines += [f"{sid},{msg.replace(',', ';')}" for sid, msg in result.failures]
        result.files["errors.csv"] = "\n".join(lines) + "\n"
    return result


COMPARE_COLUMNS = (
    "T", "E", "ha_sync_cycles", "ha_asyn_cycles", "ha_asyn_best_c",
    "cycles_reduction_pct", "ha_sync_obj", "ha_asyn_obj", "obj_gain_pct",
    "hu_sync_obj", "hu_asyn_obj",
)


def _to_float(cell: str | None):
    if cell is None or cell == "":
        return None
    return float(cell)


def compare_report(summary_texts: list[str]) -> tuple[str, list[dict]]:
    """Per-(T, E) deltas of the asynchronous scheme over its baselines.

    Every (T, E) cell must contain each scheme appearing anywhere in the
    input; otherwise the missing cells are listed in a ScenarioError.
    """
    rows = []
    for text in summary_texts:
        rows.extend(parse_csv(text))
    if not rows:
        raise ScenarioError("no summary rows to compare")
    cells: dict = {}
    schemes_seen = set()
    for row in rows:
        key = (row["T"], row["E"])
        schemes_seen.add(row["scheme"])
        cells.setdefault(key, {}).setdefault(row["scheme"], []).append(row)

    required = {s for s in ("ha-sync", "ha-asyn") if s in schemes_seen} or {"ha-sync", "ha-asyn"}
    missing = []
    for key, by_scheme in sorted(cells.items()):
        for scheme in sorted(required):
            if scheme not in by_scheme:
                missing.append(f"(T={key[0]}, E={key[1]}, scheme={scheme})")
    if missing:
        raise ScenarioError("missing cells: " + ", ".join(missing))

    def best_row(candidates):
        def rank(row):
            cyc = _to_float(row.get("cycles_to_threshold"))
            obj = _to_float(row.get("obj_mean_tau"))
            return (cyc if cyc is not None else float("inf"), -(obj or 0.0))
        return min(candidates, key=rank)

    report_rows = []
    for key, by_scheme in sorted(cells.items(), key=lambda kv: (float(kv[0][0]), float(kv[0][1]))):
        sync = best_row(by_scheme["ha-sync"])
        asyn = best_row(by_scheme["ha-asyn"])
        sync_cyc = _to_float(sync.get("cycles_to_threshold"))
        asyn_cyc = _to_float(asyn.get("cycles_to_threshold"))
        sync_obj = _to_float(sync.get("obj_mean_tau"))
        asyn_obj = _to_float(asyn.get("obj_mean_tau"))
        reduction = None
        if sync_cyc is not None and asyn_cyc is not None and sync_cyc > 0:
            reduction = (sync_cyc - asyn_cyc) / sync_cyc * 100.0
        gain = None
        if sync_obj not in (None, 0.0) and asyn_obj is not None:
            gain = (asyn_obj - sync_obj) / sync_obj * 100.0
        hu_sync = by_scheme.get("hu-sync")
        hu_asyn = by_scheme.get("hu-asyn")
        report_rows.append(
            {
                "T": key[0],
                "E": key[1],
                "ha_sync_cycles": sync_cyc,
                "ha_asyn_cycles": asyn_cyc,
                "ha_asyn_best_c": asyn.get("c"),
                "cycles_reduction_pct": reduction,
                "ha_sync_obj": sync_obj,
                "ha_asyn_obj": asyn_obj,
                "obj_gain_pct": gain,
                "hu_sync_obj": _to_float(best_row(hu_sync).get("obj_mean_tau")) if hu_sync else None,
                "hu_asyn_obj": _to_float(best_row(hu_asyn).get("obj_mean_tau")) if hu_asyn else None,
            }
        )
    return rows_to_csv(COMPARE_COLUMNS, report_rows), report_rows


def validate_trace(spec: ScenarioSpec, trace_csv: str, tol: float = 1e-6) -> list[str]:
    """Re-derive costs from the scenario and re-check every trace row."""
    profiles, _ = generate_learners(spec)
    problem = build_problem(spec, profiles)
    rows = parse_csv(trace_csv)
    violations = []
    by_cycle: dict = {}
    for i, row in enumerate(rows):
        try:
            cycle = int(row["cycle"])
            k = int(row["learner"])
            tau = int(row["tau"])
            d = int(row["d"])
            time_s = float(row["time_s"])
            energy_j = float(row["energy_j"])
            stale = int(row["staleness"])
        except (KeyError, ValueError) as exc:
            violations.append(f"row {i}: malformed ({exc})")
            continue
        if not 0 <= k < spec.K:
            violations.append(f"row {i}: learner index {k} out of range")
            continue
        expected_t = predict_time(problem.coeffs[k], tau, d)
        expected_e = predict_energy(problem.coeffs[k], tau, d)
        if abs(expected_t - time_s) > tol * max(1.0, expected_t):
            violations.append(f"row {i}: time {time_s} != modeled {expected_t}")
        if abs(expected_e - energy_j) > tol * max(1.0, expected_e):
            violations.append(f"row {i}: energy {energy_j} != modeled {expected_e}")
        if time_s > spec.T + tol:
            violations.append(f"row {i}: time exceeds deadline {spec.T}")
        if energy_j > problem.energy_caps_j[k] + tol:
            violations.append(f"row {i}: energy exceeds cap {problem.energy_caps_j[k]}")
        entry = by_cycle.setdefault(cycle, {"tau": {}, "d_sum": 0, "stale": stale})
        entry["tau"][k] = tau
        entry["d_sum"] += d
        if entry["stale"] != stale:
            violations.append(f"row {i}: inconsistent staleness column in cycle {cycle}")
    for cycle, entry in sorted(by_cycle.items()):
        taus = list(entry["tau"].values())
        if len(taus) == spec.K:
            realized = max(taus) - min(taus)
            if realized != entry["stale"]:
                violations.append(
                    f"cycle {cycle}: staleness column {entry['stale']} != realized {realized}"
                )
            if realized > spec.c:
                violations.append(f"cycle {cycle}: staleness {realized} exceeds cap {spec.c}")
        if spec.mode == "PL" and entry["d_sum"] != spec.d:
            violations.append(f"cycle {cycle}: batch sum {entry['d_sum']} != {spec.d}")
    return violations
