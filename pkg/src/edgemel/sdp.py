"""Small dense semidefinite kernel: eigen utilities and a log-det barrier.

Solves problems of the form

    maximize    c^T z
    subject to  M(z) = M0 + sum_i z_i * A_i  >= 0   (PSD)
                z_i >= 0 for flagged variables

with one dense LMI of modest order (tens to low hundreds).  The solver is
a classic path-following barrier: damped Newton steps on

    phi_t(z) = -t * c^T z - log det M(z) - sum log z_i

with the barrier weight multiplied by a fixed factor per outer stage.
Everything is deterministic: fixed iteration order, no randomized pivots,
so identical inputs produce bitwise-identical iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SolverConvergenceError, SolverUnboundedError


def min_eigenvalue(M: np.ndarray, tol: float = 1e-9) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Rejects matrices whose asymmetry exceeds 1e-12 relative to their largest
    entry.  ``tol`` documents the accuracy demanded of the result; the dense
    symmetric eigensolver used here is far more accurate than any tolerance
    a caller would pass.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > 1e-12 * scale:
        raise ContractViolation("matrix is not symmetric within 1e-12")
    return float(np.linalg.eigvalsh(M)[0])


def pseudo_inverse(M: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigendecomposition.

    Eigenvalues with magnitude at most ``cutoff`` times the largest magnitude
    are treated as exact zeros, which is what makes the minimum-norm inverse
    of rank-deficient arrow matrices well defined.
    """
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > 1e-12 * scale:
        raise ContractViolation("matrix is not symmetric within 1e-12")
    w, V = np.linalg.eigh(M)
    if w.size == 0:
        return M.copy()
    wmax = float(np.abs(w).max())
    if wmax == 0.0:
        return np.zeros_like(M)
    inv = np.where(np.abs(w) > cutoff * wmax, 1.0 / np.where(w != 0, w, 1.0), 0.0)
    return (V * inv) @ V.T


@dataclass
class LmiProblem:
    """maximize c^T z s.t. M0 + sum z_i A_i >= 0, z_i >= 0 where flagged."""

    M0: np.ndarray                 # (n, n) constant block
    mats: np.ndarray               # (m, n, n) coefficient matrices
    c: np.ndarray                  # (m,) objective (maximized)
    nonneg: np.ndarray             # (m,) bool, sign-constrained variables
    objective_cap: float | None = None   # unboundedness guard

    def matrix(self, z: np.ndarray) -> np.ndarray:
        return self.M0 + np.tensordot(z, self.mats, axes=1)


@dataclass
class BarrierParams:
    t0: float | None = None        # auto-scaled from the start point if None
    mu: float = 10.0               # outer barrier growth factor
    gap_tol: float = 1e-7          # stop when nu/t <= gap_tol * max(1, |obj|)
    newton_tol: float = 1e-10      # half squared Newton decrement
    max_newron_fallback: int = 0   # unused; kept for config compatibility
    max_newton: int = 60
    max_outer: int = 60
    min_step: float = 1e-14


@dataclass
class BarrierResult:
    z: np.ndarray
    objective: float
    outer_objectives: list[float] = field(default_factory=list)
    newton_steps: int = 0
    lmi_min_eig: float = 0.0


def _chol_or_none(M: np.ndarray):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _strictly_feasible(prob: LmiProblem, z: np.ndarray):
    if prob.nonneg.any() and not (z[prob.nonneg] > 0).all():
        return None
    return _chol_or_none(prob.matrix(z))


def solve_lmi_barrier(
    prob: LmiProblem, z0: np.ndarray, params: BarrierParams | None = None
) -> BarrierResult:
    """Run the barrier method from a strictly feasible start point ``z0``.

    Raises SolverConvergenceError when Newton stalls with a large residual
    and SolverUnboundedError when the objective passes ``objective_cap``.
    """
    params = params or BarrierParams()
    z = np.asarray(z0, dtype=float).copy()
    m = z.size
    mats = prob.mats
    nonneg = np.asarray(prob.nonneg, dtype=bool)
    if mats.shape[0] != m or prob.c.shape != (m,):
        raise ContractViolation("inconsistent LMI problem dimensions")
    if _strictly_feasible(prob, z) is None:
        raise ContractViolation("barrier start point is not strictly feasible")

    n = prob.M0.shape[0]
    nu = n + int(nonneg.sum())
    obj0 = float(prob.c @ z)
    t = params.t0 if params.t0 is not None else max(1e-8, nu / max(1.0, abs(obj0)))

    flat = mats.reshape(m, -1)
    outer_objectives: list[float] = []
    total_newton = 0

    def phi(zv: np.ndarray, L: np.ndarray) -> float:
        val = -t * float(prob.c @ zv) - 2.0 * float(np.log(np.diag(L)).sum())
        if nonneg.any():
            val -= float(np.log(zv[nonneg]).sum())
        return val

    for _outer in range(params.max_outer):
        for _inner in range(params.max_newton):
            L = _chol_or_none(prob.matrix(z))
            if L is None:
                raise SolverConvergenceError("iterate left the PSD cone", iterate=z)
            W = np.linalg.inv(prob.matrix(z))
            W = 0.5 * (W + W.T)
            grad = -t * prob.c - flat @ W.ravel()
            V = W @ mats @ W                      # batched (m, n, n)
            H = V.reshape(m, -1) @ flat.T
            if nonneg.any():
                grad[nonneg] -= 1.0 / z[nonneg]
                H[nonneg, nonneg] += 1.0 / z[nonneg] ** 2
            # Jacobi equilibration keeps the Newton system solvable when the
            # objective variable and the multipliers live on wildly different
            # scales.
            dscale = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
            Hs = H * dscale[:, None] * dscale[None, :]
            gs = grad * dscale
            ridge = 0.0
            while True:
                try:
                    dz = -np.linalg.solve(Hs + ridge * np.eye(m), gs)
                    break
                except np.linalg.LinAlgError:
                    ridge = max(1e-12, ridge * 100.0)
                    if ridge > 1.0:
                        raise SolverConvergenceError(
                            "Newton system is singular", iterate=z, residual=float(np.abs(grad).max())
                        )
            dz = dz * dscale
            decrement = -float(grad @ dz)
            total_newton += 1
            if decrement / 2.0 <= params.newton_tol:
                break
            step = 1.0
            phi0 = phi(z, L)
            accepted = False
            while step >= params.min_step:
                z_new = z + step * dz
                L_new = _strictly_feasible(prob, z_new)
                if L_new is not None and phi(z_new, L_new) <= phi0 - 0.25 * step * decrement:
                    z = z_new
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                # Near the cone boundary the predicted decrement drops below
                # float resolution of phi; accept the centering and move on.
                if decrement / 2.0 <= 1e-3 * (1.0 + abs(t * float(prob.c @ z))):
                    break
                raise SolverConvergenceError(
                    "Newton step stalled", iterate=z, residual=decrement / 2.0
                )
        obj = float(prob.c @ z)
        if prob.objective_cap is not None and obj > prob.objective_cap:
            raise SolverUnboundedError(
                f"objective {obj:.6g} exceeded cap {prob.objective_cap:.6g}; "
                "dual problem looks unbounded"
            )
        if outer_objectives and obj < outer_objectives[-1] - 1e-7 * (1.0 + abs(obj)):
            raise ContractViolation(
                f"barrier objective decreased across outer iterations: "
                f"{outer_objectives[-1]:.12g} -> {obj:.12g}"
            )
        outer_objectives.append(obj)
        if nu / t <= params.gap_tol * max(1.0, abs(obj)):
            break
        t *= params.mu
    else:
        raise SolverConvergenceError("barrier did not reach its gap target", iterate=z)

    final = prob.matrix(z)
    return BarrierResult(
        z=z,
        objective=float(prob.c @ z),
        outer_objectives=outer_objectives,
        newton_steps=total_newton,
        lmi_min_eig=min_eigenvalue(final),
    )
