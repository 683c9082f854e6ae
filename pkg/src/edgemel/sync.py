"""Solvers for the relaxed synchronous allocation problem.

Two routes to the same optimum:

* ``bisection_oracle`` exploits the monotone structure directly: for a fixed
  update count tau, each learner's admissible batch is an interval, so
  feasibility of tau reduces to a sum test and the optimal tau is found by
  bisection.  This is exact (up to tolerance) and fast.

* ``solve_dual_sdp`` + ``extract_candidate`` follow the Lagrangian-dual
  route: maximize the dual lower bound subject to an arrow-structured linear
  matrix inequality, then read a primal candidate off the dual multipliers.
  The quadratic blocks of this family have zero diagonal, so the exact LMI
  admits no strictly feasible point; the solve therefore runs on an
  eigenvalue-shifted LMI (shift 5e-9, certificate min-eig >= -1e-8) and the
  candidate formula routinely degenerates, in which case callers fall back
  to the bisection oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import CostCoeffs
from .errors import DegenerateDualError, InfeasibleError, SolverConvergenceError
from .qcqp import QcqpForm, assemble_qcqp
from .sdp import BarrierParams, LmiProblem, pseudo_inverse, solve_lmi_barrier

BISECTION_TOL = 1e-9
LMI_SHIFT = 5e-9
CERT_TOL = 1e-8


@dataclass
class SyncSolution:
    """Relaxed synchronous allocation: one real tau, real batches."""

    tau: float
    d: np.ndarray
    source: str

    @property
    def objective(self) -> float:
        return self.tau


@dataclass
class DualMultipliers:
    """Lagrange multipliers and the dual objective of the shifted SDP."""

    lam: np.ndarray
    gam: np.ndarray
    nu: np.ndarray
    alpha: float
    alpha_bar: float
    omega: float
    zeta: float
    lmi_min_eig: float = 0.0           # of the unshifted LMI at the solution
    outer_objectives: list[float] = field(default_factory=list)
    newton_steps: int = 0

    @property
    def dual_bound_tau(self) -> float:
        """Upper bound on the optimal synchronous tau (may be loose)."""
        return -self.zeta


def tau_ceiling(coeffs: CostCoeffs, deadline_s: float, energy_cap_j: float, d: float) -> float:
    """Largest real tau a learner can sustain for batch size d.

    Infinite when d == 0 (an idle learner constrains nothing), negative when
    even tau = 0 violates a budget at this batch size.
    """
    if d <= 0:
        return math.inf
    t_lim = (deadline_s - coeffs.c0 - coeffs.c1 * d) / (coeffs.c2 * d)
    e_lim = (energy_cap_j - coeffs.g0 - coeffs.g1 * d) / (coeffs.g2 * d)
    return min(t_lim, e_lim)


def batch_capacity(
    coeffs: CostCoeffs, deadline_s: float, energy_cap_j: float, tau: float, cap: float
) -> float:
    """Largest batch a learner can process at a given tau, clipped to ``cap``."""
    td = coeffs.c2 * tau + coeffs.c1
    ed = coeffs.g2 * tau + coeffs.g1
    t_lim = (deadline_s - coeffs.c0) / td if td > 0 else math.inf
    e_lim = (energy_cap_j - coeffs.g0) / ed if ed > 0 else math.inf
    return min(t_lim, e_lim, cap)


def _water_fill(caps: np.ndarray, total: float, floor: float) -> np.ndarray:
    """Assign d_k = min(caps_k, level) with the level solving sum d_k = total.

    Requires caps_k >= floor for all k and K*floor <= total <= sum(caps).
    Lowering a common level is the deterministic equivalent of trimming the
    largest-slack learners first.
    """
    K = caps.size
    order = np.argsort(caps, kind="stable")
    sorted_caps = caps[order]
    cum = np.cumsum(sorted_caps)
    level = total / K
    if level > sorted_caps[0]:
        for i in range(1, K):
            candidate = (total - cum[i - 1]) / (K - i)
            if sorted_caps[i - 1] <= candidate <= sorted_caps[i] or i == K - 1:
                if candidate <= sorted_caps[i]:
                    level = candidate
                    break
        else:  # pragma: no cover - loop always breaks for valid inputs
            level = (total - cum[K - 2]) / 1.0
    d = np.minimum(caps, level)
    # absorb float residue on the largest-cap learner (lowest index on ties)
    residue = total - d.sum()
    if residue != 0.0:
        j = int(np.argmax(caps))
        d[j] = min(caps[j], d[j] + residue)
    return np.maximum(d, floor)


def bisection_oracle(
    coeffs: list[CostCoeffs],
    deadline_s: float,
    energy_caps_j,
    total_batch: float,
    batch_floor: float,
    tol: float = BISECTION_TOL,
) -> SyncSolution:
    """Exact solution of the relaxed synchronous problem.

    The feasibility predicate for a fixed tau is monotone non-increasing,
    so the supremum of feasible tau is found by doubling then bisecting to
    absolute tolerance ``tol``.
    """
    K = len(coeffs)
    energy_caps_j = np.asarray(energy_caps_j, dtype=float)
    if K * batch_floor > total_batch:
        raise InfeasibleError(
            f"batch floor {batch_floor} x {K} learners exceeds total batch {total_batch}"
        )
    for k, ck in enumerate(coeffs):
        if deadline_s <= ck.c0:
            raise InfeasibleError("fixed exchange time exceeds deadline", learner=k)
        if energy_caps_j[k] <= ck.g0:
            raise InfeasibleError("fixed exchange energy exceeds cap", learner=k)

    def capacities(tau: float) -> np.ndarray:
        return np.array(
            [
                batch_capacity(coeffs[k], deadline_s, energy_caps_j[k], tau, total_batch)
                for k in range(K)
            ]
        )

    def feasible(tau: float) -> bool:
        caps = capacities(tau)
        return bool((caps >= batch_floor).all() and caps.sum() >= total_batch)

    if not feasible(0.0):
        raise InfeasibleError("no feasible tau >= 0: batch does not fit even without updates")

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if not feasible(hi):
            break
        lo, hi = hi, hi * 2.0
    else:  # pragma: no cover - tau is provably bounded for total_batch > 0
        raise SolverConvergenceError("tau bracket did not close")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    d = _water_fill(capacities(lo), total_batch, batch_floor)
    return SyncSolution(tau=lo, d=d, source="bisection")


def assemble_dual_functions(gm: DualMultipliers, form: QcqpForm):
    """(F2, f1, f0) of the dual: quadratic, linear and constant parts.

    f1 includes the primal objective vector, matching the Lagrangian term by
    term (the -tau objective contributes the leading -1 entry).
    """
    F2 = np.tensordot(gm.lam, form.P, axes=1) + np.tensordot(gm.gam, form.Q, axes=1)
    f1 = (
        form.f
        + form.p.T @ gm.lam
        + form.q.T @ gm.gam
        + form.v.T @ gm.nu
        + gm.alpha * form.a
        + gm.alpha_bar * form.abar
        + gm.omega * form.u
    )
    f0 = float(
        gm.lam @ form.p0
        + gm.gam @ form.q0
        + gm.nu @ form.v0
        + gm.alpha * form.a0
        + gm.alpha_bar * form.abar0
    )
    return F2, f1, f0


def _embed(block: np.ndarray, vec: np.ndarray, corner: float) -> np.ndarray:
    """[[block, vec/2], [vec^T/2, corner]] as a dense symmetric matrix."""
    n = block.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = block
    M[:n, n] = 0.5 * vec
    M[n, :n] = 0.5 * vec
    M[n, n] = corner
    return M


def build_dual_lmi(form: QcqpForm, shift: float = LMI_SHIFT) -> tuple[LmiProblem, np.ndarray]:
    """Shifted dual LMI and a strictly feasible start point.

    Variable order: [lam (K), gam (K), nu (K), s, omega, zeta] where s is
    the free difference alpha - alpha_bar.  The batch-sum pair enters every
    dual function only through that difference (their coefficient matrices
    are exact negatives), so keeping both would make the Newton system
    singular; the split is recovered as alpha = max(s, 0) afterwards.
    """
    K, n = form.K, form.n
    m = 3 * K + 3
    mats = np.zeros((m, n + 1, n + 1))
    for k in range(K):
        mats[k] = _embed(form.P[k], form.p[k], form.p0[k])
        mats[K + k] = _embed(form.Q[k], form.q[k], form.q0[k])
        mats[2 * K + k] = _embed(np.zeros((n, n)), form.v[k], form.v0[k])
    zero = np.zeros((n, n))
    mats[3 * K] = _embed(zero, form.a, form.a0)
    mats[3 * K + 1] = _embed(zero, form.u, form.u0)
    mats[3 * K + 2] = np.zeros((n + 1, n + 1))
    mats[3 * K + 2][n, n] = -1.0

    M0 = _embed(zero, form.f, form.f0) + shift * np.eye(n + 1)

    c = np.zeros(m)
    c[-1] = 1.0
    nonneg = np.zeros(m, dtype=bool)
    nonneg[: 3 * K] = True
    nonneg[3 * K + 1] = True  # omega

    # Unboundedness guard: the dual objective can never exceed the constant
    # part evaluated on a generous multiplier box (only the terms with
    # positive constants contribute to the maximum).
    box = 1e6
    cap = box * (float(form.v0.sum()) + abs(form.abar0)) + 1.0

    prob = LmiProblem(M0=M0, mats=mats, c=c, nonneg=nonneg, objective_cap=cap)

    # Start point: multipliers small enough that the arrow block stays well
    # inside the shift, zeta just below the Schur boundary.
    z0 = np.zeros(m)
    for k in range(K):
        z0[k] = shift / (8.0 * K * max(form.coeffs[k].c2, 1e-300))
        z0[K + k] = shift / (8.0 * K * max(form.coeffs[k].g2, 1e-300))
        z0[2 * K + k] = 1e-3
    z0[3 * K] = 0.0    # s
    z0[3 * K + 1] = 1e-3  # omega
    gm0 = _unpack(z0, K)
    F2, f1, f0v = assemble_dual_functions(gm0, form)
    block = F2 + shift * np.eye(n)
    schur = float(f1 @ np.linalg.solve(block, f1)) / 4.0
    z0[-1] = f0v + shift - 2.0 * schur - 1.0
    for _ in range(60):
        try:
            np.linalg.cholesky(prob.matrix(z0))
            break
        except np.linalg.LinAlgError:
            z0[-1] = z0[-1] * 2.0 - 1.0
    else:  # pragma: no cover - the Schur bound guarantees termination
        raise SolverConvergenceError("could not construct a strictly feasible dual start")
    return prob, z0


def _unpack(z: np.ndarray, K: int) -> DualMultipliers:
    s = float(z[3 * K])
    return DualMultipliers(
        lam=z[:K].copy(),
        gam=z[K : 2 * K].copy(),
        nu=z[2 * K : 3 * K].copy(),
        alpha=max(s, 0.0),
        alpha_bar=max(-s, 0.0),
        omega=float(z[3 * K + 1]),
        zeta=float(z[-1]),
    )


def bordered_min_eig(arrow_row: np.ndarray, border: np.ndarray, corner: float) -> float:
    """Exact-to-precision smallest eigenvalue of the dual LMI matrix.

    The unshifted LMI has nonzeros only in its first and last rows/columns:
    M[0, 1:n] = arrow_row, M[:n, n] = border/2, M[n, n] = corner.  Its
    spectrum therefore lives on a <= 4 dimensional invariant subspace plus
    an exact zero eigenspace, so the minimum eigenvalue reduces to a tiny
    symmetric problem that mpmath evaluates far below float64 noise, which
    matters because corner is huge (~1/shift) at the dual optimum.
    """
    import mpmath as mp

    n = arrow_row.size + 1            # x-block order (tau + K batches)
    N = n + 1
    with mp.workdps(50):
        w = [mp.mpf(float(v)) for v in arrow_row]
        b = [mp.mpf(float(v)) * mp.mpf("0.5") for v in border]
        cc = mp.mpf(float(corner))

        def apply(q):
            out = [mp.mpf(0)] * N
            out[0] = sum(w[j - 1] * q[j] for j in range(1, n)) + b[0] * q[N - 1]
            for j in range(1, n):
                out[j] = w[j - 1] * q[0] + b[j] * q[N - 1]
            out[N - 1] = b[0] * q[0] + sum(b[j] * q[j] for j in range(1, n)) + cc * q[N - 1]
            return out

        basis = []
        cand = [
            [mp.mpf(1) if i == 0 else mp.mpf(0) for i in range(N)],
            [mp.mpf(1) if i == N - 1 else mp.mpf(0) for i in range(N)],
            [mp.mpf(0)] + w[:] + [mp.mpf(0)],
            [mp.mpf(0)] + b[1:n] + [mp.mpf(0)],
        ]
        for v in cand:
            u = v[:]
            for q in basis:
                dot = sum(a * c for a, c in zip(u, q))
                u = [a - dot * c for a, c in zip(u, q)]
            norm = mp.sqrt(sum(a * a for a in u))
            if norm > mp.mpf("1e-40"):
                basis.append([a / norm for a in u])
        m = len(basis)
        B = mp.matrix(m, m)
        images = [apply(q) for q in basis]
        for i in range(m):
            for j in range(m):
                B[i, j] = sum(basis[i][t] * images[j][t] for t in range(N))
        for i in range(m):
            for j in range(i + 1, m):
                avg = (B[i, j] + B[j, i]) / 2
                B[i, j] = B[j, i] = avg
        eigs = mp.eigsy(B, eigvals_only=True)
        low = min(float(e) for e in eigs)
    if N > m:
        low = min(low, 0.0)  # the untouched complement is an exact kernel
    return low


def _dual_certificate(gm: DualMultipliers, form: QcqpForm) -> float:
    F2, f1, f0 = assemble_dual_functions(gm, form)
    return bordered_min_eig(F2[0, 1:], f1, f0 - gm.zeta)


def solve_dual_sdp(
    form: QcqpForm,
    params: BarrierParams | None = None,
    shift: float = LMI_SHIFT,
    cert_tol: float = CERT_TOL,
) -> DualMultipliers:
    """Maximize the dual objective over the shifted arrow LMI.

    The returned multipliers carry a certificate: the exact (unshifted) LMI
    at them has min-eigenvalue >= -cert_tol, verified in high precision.
    When the barrier's last iterate misses that bar by float noise, zeta is
    walked down until the certificate holds; lowering zeta only raises the
    LMI's smallest eigenvalue and only loosens the reported bound, which
    stays a valid upper bound on the optimal synchronous tau (typically a
    very loose one, a direct consequence of the indefinite arrow blocks).
    """
    prob, z0 = build_dual_lmi(form, shift=shift)
    result = solve_lmi_barrier(prob, z0, params)
    gm = _unpack(result.z, form.K)
    gm.outer_objectives = result.outer_objectives
    gm.newton_steps = result.newton_steps
    gm.lmi_min_eig = _dual_certificate(gm, form)
    target = -0.75 * cert_tol
    step = max(1.0, abs(gm.zeta))
    for _ in range(200):
        if gm.lmi_min_eig >= target:
            break
        gm.zeta -= step
        step *= 2.0
        gm.lmi_min_eig = _dual_certificate(gm, form)
    if gm.lmi_min_eig < -cert_tol:
        raise SolverConvergenceError(
            f"dual certificate failed: min eig {gm.lmi_min_eig:.3e} < -{cert_tol:.1e}",
            iterate=result.z,
            residual=gm.lmi_min_eig,
        )
    return gm


def extract_candidate(gm: DualMultipliers, form: QcqpForm) -> SyncSolution:
    """Primal candidate -1/4 * pinv(F2) * f1, repaired to feasibility.

    F2 is an arrow matrix of rank <= 2 and generically singular, hence the
    minimum-norm pseudo-inverse.  When F2 vanishes while f1 does not, the
    formula carries no information and a DegenerateDualError asks the caller
    to fall back to the bisection oracle.
    """
    F2, f1, _ = assemble_dual_functions(gm, form)
    norm_f2 = float(np.linalg.norm(F2))
    norm_f1 = float(np.linalg.norm(f1))
    if norm_f2 <= 1e-7 * max(1.0, norm_f1) and norm_f1 > 1e-12:
        raise DegenerateDualError(
            f"dual quadratic form vanished (|F2|={norm_f2:.3e}, |f1|={norm_f1:.3e})"
        )
    xhat = -0.25 * pseudo_inverse(F2, cutoff=1e-12) @ f1
    return project_feasible(
        xhat,
        form.coeffs,
        form.deadline_s,
        form.energy_caps_j,
        form.total_batch,
        form.batch_floor,
        source="sdp_candidate",
    )


def project_feasible(
    x,
    coeffs: list[CostCoeffs],
    deadline_s: float,
    energy_caps_j,
    total_batch: float,
    batch_floor: float,
    source: str = "projected",
) -> SyncSolution:
    """Repair a raw point onto the relaxed feasible set.

    Batches are clamped to the floor and rescaled in their slack above it so
    they sum to the total batch exactly; tau is then raised to the largest
    value every learner can sustain, so the projection never shrinks tau of
    an already-feasible input.
    """
    x = np.asarray(x, dtype=float)
    K = len(coeffs)
    if x.shape != (K + 1,):
        raise ValueError(f"expected point of length {K + 1}, got {x.shape}")
    energy_caps_j = np.asarray(energy_caps_j, dtype=float)
    if K * batch_floor > total_batch:
        raise InfeasibleError("batch floor exceeds total batch")

    d = np.maximum(x[1:], batch_floor)
    d = np.minimum(d, total_batch)  # tame wild candidates before rescaling
    slack = d - batch_floor
    target = total_batch - K * batch_floor
    slack_sum = slack.sum()
    if target <= 0:
        d = np.full(K, batch_floor)
    elif slack_sum <= 0:
        d = np.full(K, total_batch / K)
    else:
        d = batch_floor + slack * (target / slack_sum)

    tau = math.inf
    for k in range(K):
        tau = min(tau, tau_ceiling(coeffs[k], deadline_s, energy_caps_j[k], d[k]))
    if tau < 0:
        raise InfeasibleError("projected batches infeasible even at tau = 0")
    if math.isinf(tau):  # all-zero batches can only happen when total_batch == 0
        tau = 0.0
    return SyncSolution(tau=float(tau), d=d, source=source)


def suggest_sync(
    coeffs: list[CostCoeffs],
    deadline_s: float,
    energy_caps_j,
    total_batch: float,
    batch_floor: float,
    method: str = "bisection",
    barrier_params: BarrierParams | None = None,
):
    """Produce the synchronous starting solution for the improve step.

    Returns (solution, dual_multipliers_or_None, fell_back).  With
    ``method="sdp"`` the dual bound is computed and the candidate formula is
    attempted; any degenerate or non-converged dual falls back to the exact
    bisection oracle, which is also the default method.
    """
    if method == "bisection":
        return (
            bisection_oracle(coeffs, deadline_s, energy_caps_j, total_batch, batch_floor),
            None,
            False,
        )
    if method != "sdp":
        raise ValueError(f"unknown suggest method {method!r}")
    form = assemble_qcqp(coeffs, deadline_s, energy_caps_j, total_batch, batch_floor)
    dual = None
    try:
        dual = solve_dual_sdp(form, params=barrier_params)
        candidate = extract_candidate(dual, form)
        return candidate, dual, False
    except (DegenerateDualError, SolverConvergenceError):
        sol = bisection_oracle(coeffs, deadline_s, energy_caps_j, total_batch, batch_floor)
        return sol, dual, True
