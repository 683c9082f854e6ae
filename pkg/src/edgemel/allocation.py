"""Staleness-constrained improve step, integer rounding, and baselines.

The asynchronous allocation problem: choose integer update counts tau_k and
integer batches d_k maximizing mean(tau) subject to per-learner deadline and
energy budgets, sum(d_k) == d, d_k >= d_lb, and a mutual staleness cap
max|tau_k - tau_l| <= c.

Pipeline: a synchronous solution seeds coordinate descent on the continuous
relaxation (``improve_cd``), the result is floored and repaired back onto
the integer feasible set (``floor_and_repair``), and a greedy pass claims
any whole updates the flooring left on the table.  The heterogeneity-unaware
equal split and a small exhaustive oracle provide baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostCoeffs, predict_energy, predict_time
from .errors import ContractViolation, InfeasibleError
from .sync import SyncSolution, suggest_sync, tau_ceiling

SCHEMES = ("ha-sync", "ha-asyn", "hu-sync", "hu-asyn")


@dataclass
class AsyncProblem:
    """One asynchronous allocation instance."""

    coeffs: list[CostCoeffs]
    deadline_s: float
    energy_caps_j: np.ndarray
    total_batch: int
    batch_floor: int
    staleness_cap: int

    def __post_init__(self):
        self.energy_caps_j = np.asarray(self.energy_caps_j, dtype=float)
        K = len(self.coeffs)
        if self.energy_caps_j.shape != (K,):
            raise ValueError("energy_caps_j must have one entry per learner")
        if self.staleness_cap < 0:
            raise ValueError("staleness cap must be >= 0")
        if self.batch_floor < 1:
            raise ValueError("batch floor must be >= 1 (zero-batch updates are meaningless)")
        if self.total_batch < K * self.batch_floor:
            raise ValueError("total batch smaller than K * batch_floor")
        self._c2 = np.array([c.c2 for c in self.coeffs])
        self._c1 = np.array([c.c1 for c in self.coeffs])
        self._c0 = np.array([c.c0 for c in self.coeffs])
        self._g2 = np.array([c.g2 for c in self.coeffs])
        self._g1 = np.array([c.g1 for c in self.coeffs])
        self._g0 = np.array([c.g0 for c in self.coeffs])

    @property
    def K(self) -> int:
        return len(self.coeffs)

    def ceilings(self, d: np.ndarray) -> np.ndarray:
        """Per-learner largest sustainable real tau at batch sizes d (d > 0)."""
        t_lim = (self.deadline_s - self._c0 - self._c1 * d) / (self._c2 * d)
        e_lim = (self.energy_caps_j - self._g0 - self._g1 * d) / (self._g2 * d)
        return np.minimum(t_lim, e_lim)

    def times(self, tau, d) -> np.ndarray:
        return self._c2 * tau * d + self._c1 * d + self._c0

    def energies(self, tau, d) -> np.ndarray:
        return self._g2 * tau * d + self._g1 * d + self._g0


@dataclass
class Allocation:
    """Integer allocation plus its predicted per-learner costs."""

    tau: np.ndarray
    d: np.ndarray
    predicted_time_s: np.ndarray
    predicted_energy_j: np.ndarray

    @property
    def objective(self) -> float:
        return float(self.tau.mean())

    @property
    def staleness(self) -> int:
        return staleness(self.tau)


def staleness(tau) -> int:
    """Largest pairwise difference in update counts (0 for one learner)."""
    tau = np.asarray(tau)
    if tau.size < 1:
        raise ValueError("need at least one learner")
    return int(tau.max() - tau.min())


def build_allocation(tau, d, prob: AsyncProblem) -> Allocation:
    tau = np.asarray(tau, dtype=int)
    d = np.asarray(d, dtype=int)
    return Allocation(
        tau=tau,
        d=d,
        predicted_time_s=prob.times(tau, d),
        predicted_energy_j=prob.energies(tau, d),
    )


def allocation_violations(alloc: Allocation, prob: AsyncProblem, tol: float = 1e-9) -> list[str]:
    """Independent feasibility check, re-deriving costs from the coefficients."""
    problems = []
    K = prob.K
    for k in range(K):
        t = predict_time(prob.coeffs[k], float(alloc.tau[k]), float(alloc.d[k]))
        e = predict_energy(prob.coeffs[k], float(alloc.tau[k]), float(alloc.d[k]))
        if t > prob.deadline_s + tol * max(1.0, prob.deadline_s):
            problems.append(f"learner {k}: time {t:.9g} > deadline {prob.deadline_s:.9g}")
        if e > prob.energy_caps_j[k] + tol * max(1.0, prob.energy_caps_j[k]):
            problems.append(f"learner {k}: energy {e:.9g} > cap {prob.energy_caps_j[k]:.9g}")
        if alloc.d[k] < prob.batch_floor:
            problems.append(f"learner {k}: batch {alloc.d[k]} < floor {prob.batch_floor}")
        if alloc.tau[k] < 0:
            problems.append(f"learner {k}: negative update count {alloc.tau[k]}")
    if int(alloc.d.sum()) != prob.total_batch:
        problems.append(f"batch sum {int(alloc.d.sum())} != {prob.total_batch}")
    if staleness(alloc.tau) > prob.staleness_cap:
        problems.append(
            f"staleness {staleness(alloc.tau)} > cap {prob.staleness_cap}"
        )
    return problems


def validate_allocation(alloc: Allocation, prob: AsyncProblem, tol: float = 1e-9) -> None:
    problems = allocation_violations(alloc, prob, tol)
    if problems:
        raise ContractViolation("; ".join(problems))


def _continuous_violations(tau, d, prob: AsyncProblem, tol: float) -> list[str]:
    problems = []
    scale_t = max(1.0, prob.deadline_s)
    times = prob.times(tau, d)
    energies = prob.energies(tau, d)
    if (times > prob.deadline_s + tol * scale_t).any():
        problems.append("deadline exceeded")
    if (energies > prob.energy_caps_j + tol * np.maximum(1.0, prob.energy_caps_j)).any():
        problems.append("energy cap exceeded")
    if abs(float(d.sum()) - prob.total_batch) > tol * max(1.0, prob.total_batch):
        problems.append("batch sum off")
    if (d < prob.batch_floor - tol * max(1.0, prob.batch_floor)).any():
        problems.append("batch floor violated")
    if (np.asarray(tau) < -tol).any():
        problems.append("negative tau")
    if tau.max() - tau.min() > prob.staleness_cap + tol:
        problems.append("staleness cap violated")
    return problems


def _transfer_value_fn(prob: AsyncProblem, ceil: np.ndarray, src: int, rcv: int, d, c: float):
    """Fast evaluator of the post-transfer objective sum(min(ceil, min+c)).

    Only the src/rcv ceilings move, so the other learners' contribution is
    reduced to a sorted prefix-sum lookup.
    """
    others = np.delete(ceil, [src, rcv])
    others_sorted = np.sort(others)
    prefix = np.concatenate([[0.0], np.cumsum(others_sorted)])
    others_min = float(others_sorted[0]) if others.size else math.inf
    cs, cr = prob.coeffs[src], prob.coeffs[rcv]
    T, Es, Er = prob.deadline_s, prob.energy_caps_j[src], prob.energy_caps_j[rcv]
    d_src, d_rcv = float(d[src]), float(d[rcv])

    def value(delta: float) -> float:
        ci = tau_ceiling(cs, T, Es, d_src - delta)
        cj = tau_ceiling(cr, T, Er, d_rcv + delta)
        cap = min(ci, cj, others_min) + c
        pos = int(np.searchsorted(others_sorted, cap, side="right"))
        total = float(prefix[pos]) + (others_sorted.size - pos) * cap
        return total + min(ci, cap) + min(cj, cap)

    return value


def _maximize_transfer(value, delta_max: float, current: float):
    """Deterministic grid + golden-section search for the best transfer size."""
    grid = np.linspace(0.0, delta_max, 13)
    values = [value(x) for x in grid]
    best = int(np.argmax(values))
    if values[best] <= current + 1e-12:
        return 0.0, current
    lo = grid[max(0, best - 1)]
    hi = grid[min(len(grid) - 1, best + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = value(x1), value(x2)
    for _ in range(32):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = value(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = value(x2)
    candidates = [(values[best], grid[best]), (f1, x1), (f2, x2)]
    best_val, best_delta = max(candidates, key=lambda t: t[0])
    return best_delta, best_val


def _candidate_pairs(prob: AsyncProblem, d: np.ndarray, ceil: np.ndarray):
    """Donor/receiver pairs worth trying for a batch transfer.

    Mixes two notions of constrainedness: the ceiling level (the argmin
    learner pins the common floor, the argmax has the most slack) and the
    ceiling derivative (fast risers shed cheaply, slow fallers absorb
    cheaply).  The derivative pairs are what break the exact tie a
    water-filled synchronous start arrives in.
    """
    K = prob.K
    if K < 2:
        return []
    cap = float(ceil.min()) + prob.staleness_cap
    h = np.maximum(1e-9, 1e-6 * d)
    shed = (prob.ceilings(np.maximum(d - h, 1e-12)) - ceil) / h
    add = (ceil - prob.ceilings(d + h)) / h
    # a donor's rise only pays while its ceiling sits below the staleness cap
    eligible = (d > prob.batch_floor + 1e-12) & (ceil < cap - 1e-12)
    shed = np.where(eligible, shed, -np.inf)

    lo = int(np.argmin(ceil))
    hi = int(np.argmax(ceil))
    candidates = []
    if lo != hi:
        candidates.append((lo, hi))
    riser = int(np.argmax(shed))
    if np.isfinite(shed[riser]):
        add2 = add.copy()
        add2[riser] = np.inf
        faller = int(np.argmin(add2))
        for rcv in (faller, hi):
            if rcv != riser:
                candidates.append((riser, rcv))
    out = []
    for pair in candidates:
        if pair not in out:
            out.append(pair)
    return out


def improve_cd(
    init,
    prob: AsyncProblem,
    max_sweeps: int = 200,
    tol: float = 1e-6,
):
    """Coordinate-descent improve step on the continuous relaxation.

    ``init`` is a SyncSolution or a (tau_vector, d_vector) pair feasible for
    the problem.  For fixed batches the update counts have a closed-form
    optimum, tau_k = min(ceiling_k, min ceiling + c), which dominates every
    feasible tau vector pointwise; each sweep applies it, then rebalances
    batch mass through pairwise transfers chosen to maximize the resulting
    objective.  Individual tau_k may drop when a learner absorbs batch mass,
    but the sweep objective never decreases.
    """
    K = prob.K
    c = float(prob.staleness_cap)
    if isinstance(init, SyncSolution):
        tau = np.full(K, float(init.tau))
        d = np.asarray(init.d, dtype=float).copy()
    else:
        tau = np.asarray(init[0], dtype=float).copy()
        d = np.asarray(init[1], dtype=float).copy()
    problems = _continuous_violations(tau, d, prob, tol=1e-6)
    if problems:
        raise ContractViolation(f"infeasible CD start: {'; '.join(problems)}")

    def tau_phase():
        ceil = prob.ceilings(d)
        return np.minimum(ceil, ceil.min() + c)

    prev = float(tau.mean())
    for _sweep in range(max_sweeps):
        for _move in range(K):
            ceil = prob.ceilings(d)
            current = float(np.minimum(ceil, ceil.min() + c).sum())
            best_move = None
            for src, rcv in _candidate_pairs(prob, d, ceil):
                delta_max = d[src] - prob.batch_floor
                if delta_max <= 1e-12:
                    continue
                value = _transfer_value_fn(prob, ceil, src, rcv, d, c)
                delta, val = _maximize_transfer(value, delta_max, current)
                if delta > 0.0 and (best_move is None or val > best_move[0]):
                    best_move = (val, src, rcv, delta)
            if best_move is None:
                break
            _, src, rcv, delta = best_move
            d[src] -= delta
            d[rcv] += delta
        tau = tau_phase()
        obj = float(tau.mean())
        if obj < prev - 1e-9 * max(1.0, abs(prev)):
            raise ContractViolation(f"CD objective decreased: {prev} -> {obj}")
        if obj - prev < tol:
            break
        prev = obj
    return tau, d


def floor_and_repair(tau_cont, d_cont, prob: AsyncProblem) -> Allocation:
    """Round a continuous allocation down and repair the batch-sum equality.

    Flooring preserves every budget and the staleness cap; the batch deficit
    is then placed one sample at a time on the learner with the most
    remaining capacity.  When nobody can absorb a sample, the largest update
    count is decremented (all of them under a zero staleness cap, to keep
    the counts equal) and placement is retried.
    """
    K = prob.K
    tau = np.floor(np.asarray(tau_cont, dtype=float)).astype(int)
    d = np.floor(np.asarray(d_cont, dtype=float)).astype(int)
    if (d < prob.batch_floor).any():
        raise ContractViolation("continuous batches below the floor before rounding")
    remaining = prob.total_batch - int(d.sum())
    if remaining < 0:
        raise ContractViolation("floored batches exceed the total batch")

    for _ in range(10_000_000):
        if remaining == 0:
            break
        time_slack = prob.deadline_s - prob.times(tau, d)
        energy_slack = prob.energy_caps_j - prob.energies(tau, d)
        t_cost = prob._c2 * tau + prob._c1
        e_cost = prob._g2 * tau + prob._g1
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.minimum(
                np.where(t_cost > 0, time_slack / t_cost, np.inf),
                np.where(e_cost > 0, energy_slack / e_cost, np.inf),
            )
        can_take = (
            (prob.times(tau, d + 1) <= prob.deadline_s)
            & (prob.energies(tau, d + 1) <= prob.energy_caps_j)
        )
        if can_take.any():
            masked = np.where(can_take, score, -np.inf)
            j = int(np.argmax(masked))
            d[j] += 1
            remaining -= 1
            continue
        if prob.staleness_cap == 0:
            if tau[0] <= 0:
                raise InfeasibleError("batch cannot be placed even at tau = 0")
            tau -= 1
        else:
            j = int(np.argmax(tau))
            if tau[j] <= 0:
                raise InfeasibleError("batch cannot be placed even at tau = 0")
            tau[j] -= 1
    else:  # pragma: no cover
        raise ContractViolation("repair loop failed to terminate")
    return build_allocation(tau, d, prob)


def _max_integer_batch(prob: AsyncProblem, k: int, tau_k: int) -> int:
    """Largest integer batch learner k can carry at tau_k updates."""
    ck = prob.coeffs[k]
    t_den = ck.c2 * tau_k + ck.c1
    e_den = ck.g2 * tau_k + ck.g1
    t_lim = (prob.deadline_s - ck.c0) / t_den if t_den > 0 else math.inf
    e_lim = (prob.energy_caps_j[k] - ck.g0) / e_den if e_den > 0 else math.inf
    cap = min(t_lim, e_lim)
    if math.isinf(cap):
        return prob.total_batch
    d = max(0, int(math.floor(cap)))
    while (
        predict_time(ck, tau_k, d + 1) <= prob.deadline_s
        and predict_energy(ck, tau_k, d + 1) <= prob.energy_caps_j[k]
    ):
        d += 1
    while d > 0 and (
        predict_time(ck, tau_k, d) > prob.deadline_s
        or predict_energy(ck, tau_k, d) > prob.energy_caps_j[k]
    ):
        d -= 1
    return d


def polish_integer(alloc: Allocation, prob: AsyncProblem) -> Allocation:
    """Greedy upgrades on the integer lattice.

    Repeatedly raises some learner's update count by one, shedding exactly
    the batch overflow this causes onto learners with spare capacity at
    their current update counts.  Flooring a near-integer continuous point
    wastes up to one whole update per learner; this pass claims those back.
    Deterministic: cheapest upgrade first, largest-slack receivers first,
    index tie-breaks, and the objective rises by 1/K per accepted move.
    """
    tau = alloc.tau.astype(int).copy()
    d = alloc.d.astype(int).copy()
    K = prob.K
    for _ in range(100_000):
        caps_now = np.array([_max_integer_batch(prob, k, int(tau[k])) for k in range(K)])
        slack = caps_now - d
        candidates = []
        for k in range(K):
            if K > 1:
                others_min = int(np.min(np.delete(tau, k)))
                if tau[k] + 1 - others_min > prob.staleness_cap:
                    continue
            cap_up = _max_integer_batch(prob, k, int(tau[k]) + 1)
            if cap_up < prob.batch_floor:
                continue
            shed = max(0, int(d[k]) - cap_up)
            others_slack = int(slack.sum() - slack[k])
            if shed <= others_slack:
                candidates.append((shed, k))
        if not candidates:
            break
        shed, k = min(candidates)
        tau[k] += 1
        if shed > 0:
            d[k] -= shed
            order = np.argsort(-slack, kind="stable")
            for l in order:
                if l == k or shed <= 0:
                    continue
                take = min(shed, int(slack[l]))
                if take > 0:
                    d[l] += take
                    shed -= take
            if shed > 0:  # pragma: no cover - guarded by the slack test
                raise ContractViolation("integer polish lost batch mass")
    else:  # pragma: no cover
        raise ContractViolation("integer polish failed to terminate")
    return build_allocation(tau, d, prob)


def _max_integer_tau(prob: AsyncProblem, k: int, d_k: int) -> int:
    ceil = tau_ceiling(prob.coeffs[k], prob.deadline_s, prob.energy_caps_j[k], d_k)
    if ceil < 0:
        raise InfeasibleError("equal share infeasible at tau = 0", learner=k)
    t = max(0, int(math.floor(ceil)))
    while (
        predict_time(prob.coeffs[k], t + 1, d_k) <= prob.deadline_s
        and predict_energy(prob.coeffs[k], t + 1, d_k) <= prob.energy_caps_j[k]
    ):
        t += 1
    while t > 0 and (
        predict_time(prob.coeffs[k], t, d_k) > prob.deadline_s
        or predict_energy(prob.coeffs[k], t, d_k) > prob.energy_caps_j[k]
    ):
        t -= 1
    return t


def hu_equal_allocation(prob: AsyncProblem, mode: str) -> Allocation:
    """Heterogeneity-unaware equal batch split.

    Remainder samples go to the lowest-index learners.  "sync" runs every
    learner at the worst learner's feasible update count; "async" lets each
    learner run at its own maximum, clipped to the staleness cap above the
    slowest one.
    """
    if mode not in ("sync", "async"):
        raise ValueError(f"mode must be 'sync' or 'async', got {mode!r}")
    K = prob.K
    if prob.total_batch < K:
        raise InfeasibleError("fewer samples than learners")
    base, rem = divmod(prob.total_batch, K)
    d = np.full(K, base, dtype=int)
    d[:rem] += 1
    tmax = np.array([_max_integer_tau(prob, k, int(d[k])) for k in range(K)])
    if mode == "sync":
        tau = np.full(K, int(tmax.min()))
    else:
        tau = np.minimum(tmax, tmax.min() + prob.staleness_cap)
    return build_allocation(tau, d, prob)


def brute_force_small(prob: AsyncProblem, tau_max: int, d_step: int = 1) -> Allocation:
    """Exhaustive oracle for K <= 3.

    Enumerates every batch composition on the d_step lattice and every
    integer update vector in [0, tau_max]^K, refusing when the lattice holds
    more than 1e7 points.  First-found wins on objective ties, which makes
    the result lexicographically deterministic.
    """
    K = prob.K
    if K > 3:
        raise ValueError("exhaustive search is limited to K <= 3")
    floor = prob.batch_floor
    spare = prob.total_batch - K * floor
    if spare < 0:
        raise InfeasibleError("batch floor exceeds total batch")

    def compositions():
        if K == 1:
            yield (prob.total_batch,)
            return
        head_range = range(0, spare + 1, d_step)
        if K == 2:
            for a in head_range:
                yield (floor + a, prob.total_batch - floor - a)
        else:
            for a in head_range:
                for b in range(0, spare - a + 1, d_step):
                    yield (floor + a, floor + b, prob.total_batch - 2 * floor - a - b)

    n_comp = sum(1 for _ in compositions())
    n_tau = (tau_max + 1) ** K
    if n_comp * n_tau > 10_000_000:
        raise ValueError(
            f"search space {n_comp} x {n_tau} exceeds the 1e7 point budget; refuse"
        )

    grids = np.meshgrid(*[np.arange(tau_max + 1)] * K, indexing="ij")
    tau_grid = np.stack([g.ravel() for g in grids], axis=1)
    stale_ok = (tau_grid.max(axis=1) - tau_grid.min(axis=1)) <= prob.staleness_cap
    means = tau_grid.mean(axis=1)

    best_obj = -1.0
    best = None
    for comp in compositions():
        d = np.array(comp, dtype=int)
        caps = np.array([_max_integer_tau(prob, k, int(d[k])) for k in range(K)])
        mask = stale_ok & (tau_grid <= caps).all(axis=1)
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        local = idx[int(np.argmax(means[idx]))]
        if means[local] > best_obj:
            best_obj = float(means[local])
            best = (tau_grid[local].copy(), d)
    if best is None:
        raise InfeasibleError("no feasible point on the search lattice")
    return build_allocation(best[0], best[1], prob)


@dataclass
class AllocationReport:
    """Allocation plus solver diagnostics for logging and CSV columns."""

    allocation: Allocation
    scheme: str
    continuous_objective: float | None = None
    dual_bound_tau: float | None = None
    suggest_source: str | None = None
    fell_back: bool = False


def solve_allocation(
    prob: AsyncProblem,
    scheme: str,
    suggest: str = "bisection",
    barrier_params=None,
) -> AllocationReport:
    """Scheme dispatcher producing a validated integer allocation.

    The heterogeneity-aware schemes follow suggest-and-improve; the
    asynchronous one warm-starts each staleness level from the previous one
    and keeps the best allocation seen (including the synchronous one), so
    its objective is non-decreasing in the cap by construction.  Every
    result passes the independent feasibility validator before returning.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")

    if scheme == "hu-sync":
        report = AllocationReport(hu_equal_allocation(prob, "sync"), scheme)
    elif scheme == "hu-asyn":
        report = AllocationReport(hu_equal_allocation(prob, "async"), scheme)
    else:
        sol, dual, fell_back = suggest_sync(
            prob.coeffs,
            prob.deadline_s,
            prob.energy_caps_j,
            prob.total_batch,
            prob.batch_floor,
            method=suggest,
            barrier_params=barrier_params,
        )
        sync_prob = AsyncProblem(
            coeffs=prob.coeffs,
            deadline_s=prob.deadline_s,
            energy_caps_j=prob.energy_caps_j,
            total_batch=prob.total_batch,
            batch_floor=prob.batch_floor,
            staleness_cap=0,
        )
        sync_alloc = polish_integer(
            floor_and_repair(np.full(prob.K, sol.tau), sol.d, sync_prob), sync_prob
        )
        # the equal split is always a feasible fallback; never return worse
        try:
            hu_sync = hu_equal_allocation(sync_prob, "sync")
            if hu_sync.objective > sync_alloc.objective:
                sync_alloc = hu_sync
        except InfeasibleError:
            pass
        dual_bound = dual.dual_bound_tau if dual is not None else None

        if scheme == "ha-sync":
            report = AllocationReport(
                sync_alloc,
                scheme,
                continuous_objective=sol.tau,
                dual_bound_tau=dual_bound,
                suggest_source=sol.source,
                fell_back=fell_back,
            )
        else:  # ha-asyn
            best = sync_alloc
            cont = (np.full(prob.K, float(sol.tau)), np.asarray(sol.d, dtype=float))
            cont_obj = float(sol.tau)
            for cap in range(prob.staleness_cap + 1):
                level = AsyncProblem(
                    coeffs=prob.coeffs,
                    deadline_s=prob.deadline_s,
                    energy_caps_j=prob.energy_caps_j,
                    total_batch=prob.total_batch,
                    batch_floor=prob.batch_floor,
                    staleness_cap=cap,
                )
                cont = improve_cd(cont, level)
                cont_obj = float(cont[0].mean())
                alloc = polish_integer(floor_and_repair(cont[0], cont[1], level), level)
                if alloc.objective > best.objective:
                    best = alloc
            report = AllocationReport(
                best,
                scheme,
                continuous_objective=cont_obj,
                dual_bound_tau=dual_bound,
                suggest_source=sol.source,
                fell_back=fell_back,
            )
    validate_allocation(report.allocation, prob)
    return report
