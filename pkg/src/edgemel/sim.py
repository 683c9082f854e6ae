"""Discrete-event simulation of the orchestrator/learner training loop.

Virtual time only: each global cycle solves the allocation from the current
learner reports, charges every learner the exact modeled send/compute/report
time and energy, runs the scheduled local updates on its batch, and
aggregates by sample count.  Budgets are hard-asserted every cycle, and the
whole trace is a pure function of the scenario (seed included).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationReport, AsyncProblem, solve_allocation, staleness
from .costs import LearnerProfile, cost_coeffs, dbm_to_watts, path_loss_gain, predict_energy, predict_time
from .errors import ContractViolation, InfeasibleError
from .learning import aggregate_models, local_update, make_backend, make_classification_data, make_regression_data
from .scenario import ScenarioSpec


@dataclass
class CycleLedger:
    """Exact bookkeeping of one global cycle."""

    cycle: int
    tau: np.ndarray
    d: np.ndarray
    time_s: np.ndarray
    energy_j: np.ndarray
    agg_timestamp: float
    global_loss: float
    val_acc: float | None
    staleness: int
    objective: float
    dual_bound: float | None = None


@dataclass
class SimTrace:
    """Ordered cycle ledgers plus the reason the run stopped."""

    spec: ScenarioSpec
    profiles: list[LearnerProfile]
    distances_m: np.ndarray
    ledgers: list[CycleLedger] = field(default_factory=list)
    stopping: str = ""
    error: str | None = None


def generate_learners(spec: ScenarioSpec):
    """Seed-deterministic learner population.

    Per learner, in fixed order: distance uniform in (0, max], CPU class
    choice, energy jitter magnitude U ~ Uniform(0,1), then a fair sign, so
    E_k = E +/- jitter * U symmetric around the configured mean.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(3)[0])
    tx_power_w = dbm_to_watts(spec.tx_power_dbm)
    profiles = []
    distances = np.zeros(spec.K)
    for k in range(spec.K):
        distance = max(1e-6, rng.uniform(0.0, spec.max_distance_m))
        freq_ghz = spec.cpu_classes_ghz[int(rng.integers(0, len(spec.cpu_classes_ghz)))]
        u = rng.uniform(0.0, 1.0)
        sign = 1.0 if rng.integers(0, 2) == 1 else -1.0
        cap = spec.E + sign * spec.E_jitter * u
        cap = max(cap, 0.01 * spec.E)  # keep degenerate jitter configs runnable
        distances[k] = distance
        profiles.append(
            LearnerProfile(
                id=k,
                cpu_freq_hz=freq_ghz * 1e9,
                tx_power_w=tx_power_w,
                channel_gain=path_loss_gain(distance),
                energy_cap_j=cap,
            )
        )
    return profiles, distances


def build_problem(spec: ScenarioSpec, profiles: list[LearnerProfile]) -> AsyncProblem:
    sys_params = spec.system_params()
    coeffs = [cost_coeffs(p, sys_params) for p in profiles]
    return AsyncProblem(
        coeffs=coeffs,
        deadline_s=spec.T,
        energy_caps_j=np.array([p.energy_cap_j for p in profiles]),
        total_batch=spec.d,
        batch_floor=spec.d_lb,
        staleness_cap=spec.c,
    )


class Experiment:
    """Holds the mutable state of one simulated training run."""

    def __init__(self, spec: ScenarioSpec, allocator=None):
        self.spec = spec
        self.profiles, self.distances = generate_learners(spec)
        self.problem = build_problem(spec, self.profiles)
        self.allocator = allocator or (
            lambda prob: solve_allocation(prob, spec.scheme, suggest=spec.suggest)
        )

        seeds = np.random.SeedSequence(spec.seed).spawn(3)
        data_rng_seed = seeds[1]
        ds = spec.dataset
        n_total = spec.d + ds.val_samples
        data_seed = int(np.random.default_rng(data_rng_seed).integers(0, 2**31 - 1))
        if ds.backend == "classification":
            full = make_classification_data(data_seed, n_total, ds.features,
                                            separation=ds.separation, spread=1.0)
        else:
            full = make_regression_data(data_seed, n_total, ds.features, noise=ds.noise)
        self.train_X = full.X[: spec.d]
        self.train_y = full.y[: spec.d]
        self.val_X = full.X[spec.d :]
        self.val_y = full.y[spec.d :]
        self.backend = make_backend(ds.backend, ds.features, hidden=ds.hidden)
        self.eta = ds.eta
        self.w = self.backend.init_weights(seed=data_seed)

        self.cycle_rng = np.random.default_rng(seeds[2])
        if spec.mode == "FL":
            owner_perm = np.random.default_rng(data_seed + 1).permutation(spec.d)
            self.shards = np.array_split(owner_perm, spec.K)
        else:
            self.shards = None

    def _cycle_batches(self, d: np.ndarray):
        """Per-learner training indices for this cycle."""
        if self.spec.mode == "PL":
            perm = self.cycle_rng.permutation(self.spec.d)
            batches, start = [], 0
            for k in range(self.spec.K):
                batches.append(perm[start : start + int(d[k])])
                start += int(d[k])
            return batches
        batches = []
        for k in range(self.spec.K):
            shard = self.shards[k]
            take = min(int(d[k]), len(shard))
            if self.spec.fl_data_cap is not None:
                take = min(take, self.spec.fl_data_cap)
            order = self.cycle_rng.permutation(len(shard))
            batches.append(shard[order[:take]])
        return batches

    def run_global_cycle(self, g: int) -> CycleLedger:
        report: AllocationReport = self.allocator(self.problem)
        alloc = report.allocation
        batches = self._cycle_batches(alloc.d)

        K = self.spec.K
        times = np.zeros(K)
        energies = np.zeros(K)
        used = np.zeros(K, dtype=int)
        models = []
        for k in range(K):
            idx = batches[k]
            used[k] = len(idx)
            times[k] = predict_time(self.problem.coeffs[k], int(alloc.tau[k]), used[k])
            energies[k] = predict_energy(self.problem.coeffs[k], int(alloc.tau[k]), used[k])
            if times[k] > self.spec.T + 1e-9:
                raise ContractViolation(
                    f"cycle {g}: learner {k} modeled time {times[k]:.9g} exceeds deadline"
                )
            if energies[k] > self.profiles[k].energy_cap_j + 1e-9:
                raise ContractViolation(
                    f"cycle {g}: learner {k} modeled energy {energies[k]:.9g} exceeds cap"
                )
            wk = self.w.copy()
            if used[k] > 0:
                Xk, yk = self.train_X[idx], self.train_y[idx]
                for _ in range(int(alloc.tau[k])):
                    wk = local_update(self.backend, wk, Xk, yk, self.eta)
            models.append(wk)

        weights = np.where(used > 0, used, 0)
        if weights.sum() == 0:
            raise ContractViolation(f"cycle {g}: no learner received data")
        self.w = aggregate_models(models, weights)

        loss = self.backend.loss(self.w, self.train_X, self.train_y)
        acc = self.backend.accuracy(self.w, self.val_X, self.val_y) if len(self.val_X) else None
        return CycleLedger(
            cycle=g,
            tau=alloc.tau.copy(),
            d=used,
            time_s=times,
            energy_j=energies,
            agg_timestamp=float(times.max()),
            global_loss=float(loss),
            val_acc=acc,
            staleness=staleness(alloc.tau),
            objective=alloc.objective,
            dual_bound=report.dual_bound_tau,
        )

    def run(self) -> SimTrace:
        trace = SimTrace(spec=self.spec, profiles=self.profiles, distances_m=self.distances)
        for g in range(self.spec.cycles):
            try:
                ledger = self.run_global_cycle(g)
            except InfeasibleError as exc:
                trace.error = str(exc)
                trace.stopping = "aborted: infeasible allocation"
                return trace
            trace.ledgers.append(ledger)
            if (
                self.spec.loss_threshold is not None
                and ledger.global_loss <= self.spec.loss_threshold
            ):
                trace.stopping = "loss threshold"
                return trace
            if (
                self.spec.acc_threshold is not None
                and ledger.val_acc is not None
                and ledger.val_acc >= self.spec.acc_threshold
            ):
                trace.stopping = "accuracy threshold"
                return trace
        trace.stopping = "cycle budget"
        return trace


def run_experiment(spec: ScenarioSpec, allocator=None) -> SimTrace:
    """Simulate one scenario end to end."""
    return Experiment(spec, allocator=allocator).run()
