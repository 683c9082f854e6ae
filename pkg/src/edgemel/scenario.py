"""Scenario and suite-manifest files: schema, validation, canonical form.

Scenario files are flat UTF-8 YAML mappings with a fixed, documented key
set; unknown keys are rejected so typos fail loudly.  A manifest file adds a
``suite`` id and generates scenarios from an explicit list, a cartesian
``sweep`` block, or both.  Radio defaults follow the standard cellular
profile (5 MHz channel, 23 dBm transmitters, -174 dBm/Hz noise, learners
within 500 m, CPU classes {6.0, 2.4, 1.4, 0.7} GHz).
"""

from __future__ import annotations

import hashlib
import itertools
import time
from dataclasses import dataclass, field, fields

import yaml

from .costs import SystemParams, dbm_to_watts
from .errors import ScenarioError

TOOL_VERSION = "0.1.0"

SCHEME_VALUES = ("ha-sync", "ha-asyn", "hu-sync", "hu-asyn")
SUGGEST_VALUES = ("bisection", "sdp")
MODE_VALUES = ("PL", "FL")


@dataclass
class DatasetSpec:
    backend: str = "classification"
    features: int = 16
    hidden: int = 8
    eta: float = 0.3
    noise: float = 0.15
    separation: float = 2.0
    val_samples: int = 400


@dataclass
class ScenarioSpec:
    """One fully resolved simulation scenario."""

    K: int
    T: float
    E: float
    d: int
    id: str = "scenario"
    E_jitter: float = 2.5
    d_lb: int = 1
    c: int = 0
    scheme: str = "ha-asyn"
    mode: str = "PL"
    cycles: int = 12
    seed: int = 0
    suggest: str = "bisection"
    bandwidth_hz: float = 5e6
    noise_dbm_per_hz: float = -174.0
    tx_power_dbm: float = 23.0
    max_distance_m: float = 500.0
    cpu_classes_ghz: list = field(default_factory=lambda: [6.0, 2.4, 1.4, 0.7])
    model_complexity: float = 2e7
    model_size: float = 2e4
    data_model_factor: float = 2.0
    precision_model_bits: float = 32.0
    precision_data_bits: float = 32.0
    chip_capacitance: float = 1e-19
    compute_exponent: float = 2.0
    fl_data_cap: int | None = None
    loss_threshold: float | None = None
    acc_threshold: float | None = None
    dataset: DatasetSpec = field(default_factory=DatasetSpec)

    def system_params(self) -> SystemParams:
        return SystemParams(
            bandwidth_hz=self.bandwidth_hz,
            noise_density_w_per_hz=dbm_to_watts(self.noise_dbm_per_hz),
            model_complexity=self.model_complexity,
            model_size=self.model_size,
            data_model_factor=self.data_model_factor,
            precision_model_bits=self.precision_model_bits,
            precision_data_bits=self.precision_data_bits,
            feature_count=float(self.dataset.features),
            chip_capacitance=self.chip_capacitance,
            compute_exponent=self.compute_exponent,
            transfer_mode=self.mode,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "dataset":
                out["dataset"] = {df.name: getattr(value, df.name) for df in fields(DatasetSpec)}
            else:
                out[f.name] = value
        return out


@dataclass
class SuiteManifest:
    """Expanded suite: ordered scenarios plus reproducibility metadata."""

    suite_id: str
    scenarios: list[ScenarioSpec]
    out_dir: str
    created_at: float
    tool_version: str
    content_hash: str


def _require(condition: bool, message: str, path: str):
    if not condition:
        raise ScenarioError(message, path=path)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", path=path)
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", path=path)
    return float(value)


def _as_choice(value, choices, path: str) -> str:
    if value not in choices:
        raise ScenarioError(f"expected one of {list(choices)}, got {value!r}", path=path)
    return value


def _build_dataset(raw: dict, path: str) -> DatasetSpec:
    if not isinstance(raw, dict):
        raise ScenarioError("dataset section must be a mapping", path=path)
    known = {f.name for f in fields(DatasetSpec)}
    for key in raw:
        if key not in known:
            raise ScenarioError(f"unknown key {key!r}", path=f"{path}.{key}")
    ds = DatasetSpec()
    if "backend" in raw:
        ds.backend = _as_choice(raw["backend"], ("classification", "regression"), f"{path}.backend")
    for key in ("features", "hidden", "val_samples"):
        if key in raw:
            value = _as_int(raw[key], f"{path}.{key}")
            _require(value > 0 if key != "val_samples" else value >= 0,
                     f"{key} out of range: {value}", f"{path}.{key}")
            setattr(ds, key, value)
    for key in ("eta", "noise", "separation"):
        if key in raw:
            setattr(ds, key, _as_float(raw[key], f"{path}.{key}"))
    _require(0.0 < ds.eta < 1.0, f"eta must lie in (0, 1), got {ds.eta}", f"{path}.eta")
    return ds


def build_scenario(raw: dict, path: str = "scenario") -> ScenarioSpec:
    """Validate a raw mapping into a ScenarioSpec, applying defaults."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping", path=path)
    known = {f.name for f in fields(ScenarioSpec)}
    for key in raw:
        if key not in known:
            raise ScenarioError(f"unknown key {key!r}", path=f"{path}.{key}")
    for key in ("K", "T", "E", "d"):
        _require(key in raw, f"missing required key {key!r}", path)

    kw: dict = {}
    kw["K"] = _as_int(raw["K"], f"{path}.K")
    _require(kw["K"] >= 1, f"K must be >= 1, got {kw['K']}", f"{path}.K")
    kw["T"] = _as_float(raw["T"], f"{path}.T")
    _require(kw["T"] > 0, f"T must be > 0, got {kw['T']}", f"{path}.T")
    kw["E"] = _as_float(raw["E"], f"{path}.E")
    _require(kw["E"] > 0, f"E must be > 0, got {kw['E']}", f"{path}.E")
    kw["d"] = _as_int(raw["d"], f"{path}.d")
    _require(kw["d"] >= 1, f"d must be >= 1, got {kw['d']}", f"{path}.d")

    if "id" in raw:
        _require(isinstance(raw["id"], str) and raw["id"] != "", "id must be a nonempty string",
                 f"{path}.id")
        kw["id"] = raw["id"]
    for key in ("d_lb", "c", "cycles", "seed"):
        if key in raw:
            kw[key] = _as_int(raw[key], f"{path}.{key}")
    _require(kw.get("d_lb", 1) >= 1, "d_lb must be >= 1", f"{path}.d_lb")
    _require(kw.get("c", 0) >= 0, "c must be >= 0", f"{path}.c")
    _require(kw.get("cycles", 12) >= 1, "cycles must be >= 1", f"{path}.cycles")
    _require(kw["d"] >= kw["K"] * kw.get("d_lb", 1),
             "d must be >= K * d_lb", f"{path}.d")

    if "scheme" in raw:
        kw["scheme"] = _as_choice(raw["scheme"], SCHEME_VALUES, f"{path}.scheme")
    if "mode" in raw:
        kw["mode"] = _as_choice(raw["mode"], MODE_VALUES, f"{path}.mode")
    if "suggest" in raw:
        kw["suggest"] = _as_choice(raw["suggest"], SUGGEST_VALUES, f"{path}.suggest")

    float_keys = (
        "E_jitter", "bandwidth_hz", "noise_dbm_per_hz", "tx_power_dbm", "max_distance_m",
        "model_complexity", "model_size", "data_model_factor", "precision_model_bits",
        "precision_data_bits", "chip_capacitance", "compute_exponent",
    )
    for key in float_keys:
        if key in raw:
            kw[key] = _as_float(raw[key], f"{path}.{key}")
    for key, value in (("E_jitter", kw.get("E_jitter", 2.5)),):
        _require(value >= 0, f"{key} must be >= 0", f"{path}.{key}")

    if "cpu_classes_ghz" in raw:
        classes = raw["cpu_classes_ghz"]
        _require(isinstance(classes, list) and len(classes) > 0,
                 "cpu_classes_ghz must be a nonempty list", f"{path}.cpu_classes_ghz")
        kw["cpu_classes_ghz"] = [
            _as_float(v, f"{path}.cpu_classes_ghz[{i}]") for i, v in enumerate(classes)
        ]
        for i, v in enumerate(kw["cpu_classes_ghz"]):
            _require(v > 0, "cpu class must be > 0 GHz", f"{path}.cpu_classes_ghz[{i}]")

    for key in ("loss_threshold", "acc_threshold"):
        if key in raw and raw[key] is not None:
            kw[key] = _as_float(raw[key], f"{path}.{key}")
    if "fl_data_cap" in raw and raw["fl_data_cap"] is not None:
        kw["fl_data_cap"] = _as_int(raw["fl_data_cap"], f"{path}.fl_data_cap")
        _require(kw["fl_data_cap"] >= 1, "fl_data_cap must be >= 1", f"{path}.fl_data_cap")

    kw["dataset"] = _build_dataset(raw.get("dataset", {}), f"{path}.dataset")

    spec = ScenarioSpec(**kw)
    if "id" not in raw:
        spec.id = f"K{spec.K}_T{spec.T:g}_E{spec.E:g}_c{spec.c}_{spec.scheme}"
    return spec


def _load_yaml(text: str):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from exc
    if data is None:
        raise ScenarioError("file is empty")
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a mapping")
    return data


def parse_scenario(text: str) -> ScenarioSpec:
    return build_scenario(_load_yaml(text))


MANIFEST_KEYS = {"suite", "out", "defaults", "scenarios", "sweep"}


def parse_manifest(text: str) -> SuiteManifest:
    data = _load_yaml(text)
    for key in data:
        if key not in MANIFEST_KEYS:
            raise ScenarioError(f"unknown key {key!r}", path=f"manifest.{key}")
    if "suite" not in data or not isinstance(data["suite"], str) or not data["suite"]:
        raise ScenarioError("missing or empty suite id", path="manifest.suite")
    defaults = data.get("defaults", {})
    if not isinstance(defaults, dict):
        raise ScenarioError("defaults must be a mapping", path="manifest.defaults")

    raw_scenarios: list[tuple[dict, str]] = []
    for i, entry in enumerate(data.get("scenarios", []) or []):
        if not isinstance(entry, dict):
            raise ScenarioError("scenario entries must be mappings", path=f"manifest.scenarios[{i}]")
        raw_scenarios.append(({**defaults, **entry}, f"manifest.scenarios[{i}]"))

    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not sweep:
            raise ScenarioError("sweep must be a nonempty mapping", path="manifest.sweep")
        keys = sorted(sweep.keys())
        for key in keys:
            if not isinstance(sweep[key], list) or not sweep[key]:
                raise ScenarioError("sweep values must be nonempty lists", path=f"manifest.sweep.{key}")
        for combo in itertools.product(*(sweep[k] for k in keys)):
            entry = {**defaults, **dict(zip(keys, combo))}
            entry.setdefault(
                "id", "_".join(f"{k}{v}" for k, v in zip(keys, combo))
            )
            raw_scenarios.append((entry, "manifest.sweep"))

    if not raw_scenarios:
        raise ScenarioError("manifest generates no scenarios", path="manifest")

    scenarios = [build_scenario(raw, path) for raw, path in raw_scenarios]
    seen = set()
    for spec in scenarios:
        if spec.id in seen:
            raise ScenarioError(f"duplicate scenario id {spec.id!r}", path="manifest")
        seen.add(spec.id)

    return SuiteManifest(
        suite_id=data["suite"],
        scenarios=scenarios,
        out_dir=str(data.get("out", "results")),
        created_at=time.time(),
        tool_version=TOOL_VERSION,
        content_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


def parse_any(text: str):
    """Parse either a single scenario or a suite manifest."""
    data = _load_yaml(text)
    if "suite" in data:
        return parse_manifest(text)
    return parse_scenario(text)


def canonical_yaml(spec: ScenarioSpec) -> str:
    """Stable text form with every default resolved; reparses to an equal spec."""
    return yaml.safe_dump(spec.to_dict(), sort_keys=True, default_flow_style=False)
