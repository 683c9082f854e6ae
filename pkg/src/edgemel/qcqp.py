"""Matrix form of the relaxed synchronous allocation problem.

The relaxed problem (single real update count ``tau`` shared by all K
learners, real batch sizes ``d_k``) is a nonconvex QCQP over the stacked
variable x = [tau, d_1, ..., d_K]:

    minimize    f^T x                       (f = [-1, 0, ..., 0])
    subject to  x^T P_k x + p_k^T x + p_k0 <= 0     (time,   per learner)
                x^T Q_k x + q_k^T x + q_k0 <= 0     (energy, per learner)
                a^T x + a0 <= 0,  abar^T x + abar0 <= 0   (sum d_k == d)
                u^T x <= 0                          (tau >= 0)
                v_k^T x + v_k0 <= 0                 (d_k >= d_lb)

P_k and Q_k are "arrow" matrices with exactly two symmetric nonzeros
coupling tau with d_k; they have one positive and one negative eigenvalue,
which is what makes the relaxation nonconvex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostCoeffs
from .errors import InfeasibleError


@dataclass
class QcqpForm:
    """Assembled matrices/vectors of the relaxed synchronous problem."""

    K: int
    n: int
    P: np.ndarray        # (K, n, n) time quadratics
    Q: np.ndarray        # (K, n, n) energy quadratics
    f: np.ndarray        # (n,) objective vector
    p: np.ndarray        # (K, n) time linear parts
    q: np.ndarray        # (K, n) energy linear parts
    a: np.ndarray        # (n,)
    abar: np.ndarray     # (n,)
    u: np.ndarray        # (n,)
    v: np.ndarray        # (K, n)
    p0: np.ndarray       # (K,)
    q0: np.ndarray       # (K,)
    a0: float
    abar0: float
    u0: float
    v0: np.ndarray       # (K,)
    f0: float
    # problem data kept for candidate extraction / projection
    coeffs: list[CostCoeffs] = field(default_factory=list)
    deadline_s: float = 0.0
    energy_caps_j: np.ndarray = field(default_factory=lambda: np.zeros(0))
    total_batch: float = 0.0
    batch_floor: float = 0.0


def assemble_qcqp(
    coeffs: list[CostCoeffs],
    deadline_s: float,
    energy_caps_j,
    total_batch: float,
    batch_floor: float,
) -> QcqpForm:
    """Build the QCQP data for K learners.

    Raises InfeasibleError naming the learner whose fixed exchange overhead
    alone already exceeds its deadline or energy budget.
    """
    K = len(coeffs)
    if K < 1:
        raise ValueError("need at least one learner")
    energy_caps_j = np.asarray(energy_caps_j, dtype=float)
    if energy_caps_j.shape != (K,):
        raise ValueError("energy_caps_j must have one entry per learner")
    for k, ck in enumerate(coeffs):
        if deadline_s <= ck.c0:
            raise InfeasibleError(
                f"fixed exchange time {ck.c0:.6g}s >= deadline {deadline_s:.6g}s", learner=k
            )
        if energy_caps_j[k] <= ck.g0:
            raise InfeasibleError(
                f"fixed exchange energy {ck.g0:.6g}J >= cap {energy_caps_j[k]:.6g}J", learner=k
            )

    n = K + 1
    P = np.zeros((K, n, n))
    Q = np.zeros((K, n, n))
    p = np.zeros((K, n))
    q = np.zeros((K, n))
    v = np.zeros((K, n))
    for k, ck in enumerate(coeffs):
        P[k, 0, k + 1] = P[k, k + 1, 0] = 0.5 * ck.c2
        Q[k, 0, k + 1] = Q[k, k + 1, 0] = 0.5 * ck.g2
        p[k, k + 1] = ck.c1
        q[k, k + 1] = ck.g1
        v[k, k + 1] = -1.0

    f = np.zeros(n)
    f[0] = -1.0
    a = np.ones(n)
    a[0] = 0.0
    abar = -a.copy()
    u = np.zeros(n)
    u[0] = -1.0

    return QcqpForm(
        K=K,
        n=n,
        P=P,
        Q=Q,
        f=f,
        p=p,
        q=q,
        a=a,
        abar=abar,
        u=u,
        v=v,
        p0=np.array([ck.c0 - deadline_s for ck in coeffs]),
        q0=np.array([ck.g0 - energy_caps_j[k] for k, ck in enumerate(coeffs)]),
        a0=-float(total_batch),
        abar0=float(total_batch),
        u0=0.0,
        v0=np.full(K, float(batch_floor)),
        f0=0.0,
        coeffs=list(coeffs),
        deadline_s=float(deadline_s),
        energy_caps_j=energy_caps_j,
        total_batch=float(total_batch),
        batch_floor=float(batch_floor),
    )


def time_residual(form: QcqpForm, k: int, x: np.ndarray) -> float:
    """x^T P_k x + p_k^T x + p_k0; equals predicted time minus deadline."""
    return float(x @ form.P[k] @ x + form.p[k] @ x + form.p0[k])


def energy_residual(form: QcqpForm, k: int, x: np.ndarray) -> float:
    """x^T Q_k x + q_k^T x + q_k0; equals predicted energy minus the cap."""
    return float(x @ form.Q[k] @ x + form.q[k] @ x + form.q0[k])
