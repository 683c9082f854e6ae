"""Gradient-descent learning backends and the model-divergence checker.

Two small backends share one interface over a flat parameter vector:

* ``RidgelessRegression`` - linear least squares, convex, with an exact
  smoothness constant from the data Gram matrix.
* ``TanhMlpClassifier`` - one hidden tanh layer with softmax cross-entropy,
  the non-convex counterpart.

The divergence checker replays a multi-learner training interval against an
auxiliary centralized trajectory and verifies the exponential drift bound

    ||w_k[t] - w_aux[t]|| <= (delta_k / beta) * ((eta*beta + 1)^t - 1)

where beta is the smoothness constant and delta_k the largest gap between
learner k's gradient and the full-data gradient along the trajectory.  For
convex losses with eta*beta <= 1 the bound is a theorem; for the MLP it is
only tallied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


@dataclass
class Dataset:
    """Feature matrix, targets and the generator settings that made them."""

    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D (samples x features)")
        if len(self.y) != len(self.X):
            raise ValueError("X and y disagree on the sample count")
        if not np.isfinite(self.X).all():
            raise ValueError("X contains non-finite values")

    def __len__(self):
        return len(self.X)


@dataclass
class ModelState:
    """Flat parameter vector plus its training configuration."""

    w: np.ndarray
    arch: str
    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"learning rate must lie in (0, 1), got {self.eta}")


def make_regression_data(seed: int, n: int, features: int, noise: float = 0.1) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, features))
    w_true = rng.standard_normal(features)
    y = X @ w_true + noise * rng.standard_normal(n)
    return Dataset(X=X, y=y, meta={"seed": seed, "noise": noise, "w_true": w_true})


def make_classification_data(
    seed: int, n: int, features: int, separation: float = 2.0, spread: float = 1.0
) -> Dataset:
    """Two Gaussian blobs with integer labels {0, 1}."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((2, features))
    centers *= separation / max(1e-12, np.linalg.norm(centers[0] - centers[1]))
    labels = rng.integers(0, 2, size=n)
    X = centers[labels] + spread * rng.standard_normal((n, features))
    return Dataset(X=X, y=labels, meta={"seed": seed, "separation": separation})


class RidgelessRegression:
    """Mean squared error linear model: F(w) = mean((Xw - y)^2)."""

    arch = "regression"

    def __init__(self, features: int):
        self.features = features
        self.dim = features

    def init_weights(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return 0.01 * rng.standard_normal(self.dim)

    def loss(self, w, X, y) -> float:
        r = X @ w - y
        return float(r @ r / len(y))

    def grad(self, w, X, y) -> np.ndarray:
        return 2.0 / len(y) * (X.T @ (X @ w - y))

    def accuracy(self, w, X, y):
        return None


class TanhMlpClassifier:
    """Two-class MLP: tanh hidden layer, softmax cross-entropy output."""

    arch = "mlp"

    def __init__(self, features: int, hidden: int = 8):
        self.features = features
        self.hidden = hidden
        self.classes = 2
        self.dim = hidden * features + hidden + self.classes * hidden + self.classes

    def _unpack(self, w):
        F, H, C = self.features, self.hidden, self.classes
        i = 0
        W1 = w[i : i + H * F].reshape(H, F); i += H * F
        b1 = w[i : i + H]; i += H
        W2 = w[i : i + C * H].reshape(C, H); i += C * H
        b2 = w[i : i + C]
        return W1, b1, W2, b2

    def init_weights(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return 0.5 * rng.standard_normal(self.dim) / np.sqrt(self.features)

    def _forward(self, w, X):
        W1, b1, W2, b2 = self._unpack(w)
        hidden = np.tanh(X @ W1.T + b1)
        logits = hidden @ W2.T + b2
        logits = logits - logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=1, keepdims=True)
        return hidden, probs

    def loss(self, w, X, y) -> float:
        _, probs = self._forward(w, X)
        picked = probs[np.arange(len(y)), y]
        return float(-np.log(np.maximum(picked, 1e-300)).mean())

    def grad(self, w, X, y) -> np.ndarray:
        W1, b1, W2, b2 = self._unpack(w)
        n = len(y)
        hidden, probs = self._forward(w, X)
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        gW2 = dlogits.T @ hidden
        gb2 = dlogits.sum(axis=0)
        dhidden = (dlogits @ W2) * (1.0 - hidden**2)
        gW1 = dhidden.T @ X
        gb1 = dhidden.sum(axis=0)
        return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])

    def accuracy(self, w, X, y) -> float:
        _, probs = self._forward(w, X)
        return float((probs.argmax(axis=1) == y).mean())


def make_backend(kind: str, features: int, hidden: int = 8):
    if kind == "regression":
        return RidgelessRegression(features)
    if kind == "classification":
        return TanhMlpClassifier(features, hidden=hidden)
    raise ValueError(f"unknown backend {kind!r}")


def local_update(backend, w: np.ndarray, X: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    """One full-batch gradient step on the learner's local loss."""
    if len(X) == 0:
        raise ValueError("empty batch")
    g = backend.grad(w, X, y)
    if not np.isfinite(g).all():
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise ContractViolation(
            f"non-finite gradient (first bad component {bad}); loss={backend.loss(w, X, y)}"
        )
    return w - eta * g


def local_loss(backend, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    if len(X) == 0:
        raise ValueError("empty batch")
    return backend.loss(w, X, y)


def aggregate_models(models: list[np.ndarray], counts) -> np.ndarray:
    """Sample-count weighted average of parameter vectors."""
    counts = np.asarray(counts, dtype=float)
    if counts.sum() <= 0:
        raise ValueError("total sample count must be positive")
    if len(models) != len(counts):
        raise ContractViolation("model and count lists disagree")
    dim = models[0].shape
    for m in models:
        if m.shape != dim:
            raise ContractViolation("model dimension mismatch")
    stacked = np.stack(models, axis=0)
    return (counts[:, None] * stacked).sum(axis=0) / counts.sum()


def estimate_beta(X: np.ndarray) -> float:
    """Exact smoothness constant of the mean-squared loss on X."""
    n = len(X)
    gram = 2.0 / n * (X.T @ X)
    return float(np.linalg.eigvalsh(gram)[-1])


def estimate_delta(backend, partitions, points, X, y) -> np.ndarray:
    """Largest local-vs-global gradient gap per learner over given points."""
    deltas = np.zeros(len(partitions))
    for w in points:
        g_full = backend.grad(w, X, y)
        for k, idx in enumerate(partitions):
            gk = backend.grad(w, X[idx], y[idx])
            deltas[k] = max(deltas[k], float(np.linalg.norm(gk - g_full)))
    return deltas


def divergence_bound(delta_k: float, beta: float, eta: float, t: int) -> float:
    """Drift allowance t steps after an aggregation boundary."""
    if t < 0:
        raise ValueError("step offset must be nonnegative")
    if beta <= 0:
        raise ValueError("smoothness constant must be positive")
    return delta_k / beta * ((eta * beta + 1.0) ** t - 1.0)


@dataclass
class DivergenceReport:
    """Observed drifts versus their bounds for one training run."""

    beta: float
    eta: float
    delta: np.ndarray
    rho: float                      # gradient-norm estimate; recorded only
    gaps_local: list                # per interval: (K, tau_k+1) observed drifts
    bounds_local: list              # same shape, allowed drifts
    gaps_global: list               # per interval: virtual aggregate drift per step
    bounds_global: list             # accumulated allowance, max-tau reading
    violations_local: int = 0
    violations_global: int = 0


def check_divergence(
    backend,
    dataset: Dataset,
    partitions: list[np.ndarray],
    tau_schedule: np.ndarray,
    eta: float,
    intervals: int,
    beta: float | None = None,
    tol: float = 1e-9,
) -> DivergenceReport:
    """Replay training and verify the drift bounds.

    Each interval runs every learner for its scheduled update count from the
    shared aggregation point while an auxiliary model trains on the full
    dataset with the same learning rate.  The per-learner bound is checked
    at every step; the accumulated whole-model reading (computed at the
    maximum update count) is tallied alongside.
    """
    X, y = dataset.X, dataset.y
    K = len(partitions)
    tau_schedule = np.asarray(tau_schedule, dtype=int)
    if tau_schedule.shape != (K,):
        raise ContractViolation("tau schedule must have one entry per learner")
    counts = np.array([len(p) for p in partitions], dtype=float)
    tau_max = int(tau_schedule.max())

    if beta is None:
        candidates = [estimate_beta(X)] + [estimate_beta(X[idx]) for idx in partitions]
        beta = max(candidates)

    w_global = backend.init_weights(seed=0)
    all_points = []
    interval_traces = []
    for _g in range(intervals):
        aux = [w_global.copy()]
        w_aux = w_global.copy()
        for _ in range(tau_max):
            w_aux = local_update(backend, w_aux, X, y, eta)
            aux.append(w_aux.copy())
        locals_ = []
        for k in range(K):
            idx = partitions[k]
            traj = [w_global.copy()]
            wk = w_global.copy()
            for _ in range(int(tau_schedule[k])):
                wk = local_update(backend, wk, X[idx], y[idx], eta)
                traj.append(wk.copy())
            locals_.append(traj)
        interval_traces.append((aux, locals_))
        all_points.extend(aux)
        for traj in locals_:
            all_points.extend(traj)
        finals = [locals_[k][-1] for k in range(K)]
        w_global = aggregate_models(finals, counts)

    delta = estimate_delta(backend, partitions, all_points, X, y)
    rho = max(float(np.linalg.norm(backend.grad(w, X, y))) for w in all_points)

    report = DivergenceReport(
        beta=float(beta), eta=eta, delta=delta, rho=rho,
        gaps_local=[], bounds_local=[], gaps_global=[], bounds_global=[],
    )
    for aux, locals_ in interval_traces:
        gaps = np.zeros((K, tau_max + 1))
        bounds = np.zeros((K, tau_max + 1))
        for k in range(K):
            traj = locals_[k]
            for t in range(len(traj)):
                gaps[k, t] = float(np.linalg.norm(traj[t] - aux[t]))
                bounds[k, t] = divergence_bound(float(delta[k]), beta, eta, t)
                if gaps[k, t] > bounds[k, t] + tol:
                    report.violations_local += 1
        report.gaps_local.append(gaps)
        report.bounds_local.append(bounds)

        virtual = np.zeros(tau_max + 1)
        allowance = np.zeros(tau_max + 1)
        acc = 0.0
        for t in range(tau_max + 1):
            clamped = [locals_[k][min(t, len(locals_[k]) - 1)] for k in range(K)]
            w_virtual = aggregate_models(clamped, counts)
            virtual[t] = float(np.linalg.norm(w_virtual - aux[t]))
            allowance[t] = acc
            if virtual[t] > allowance[t] + tol:
                report.violations_global += 1
            acc += eta * beta / counts.sum() * sum(
                divergence_bound(float(delta[k]), beta, eta, t) for k in range(K)
            )
        report.gaps_global.append(virtual)
        report.bounds_global.append(allowance)
    return report
