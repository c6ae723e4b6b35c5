"""Epsilon-SVR on a precomputed kernel, solved by SMO, plus error metrics.

The dual is written over ``a = [alpha; alpha*]`` (length 2l)::

    min 1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a <= C

with ``y = [1..1, -1..-1]``, ``Q = [[K, -K], [-K, K]]`` and
``p = [eps - z; eps + z]``. The regression function is
``f(x) = sum_i (alpha_i - alpha*_i) k(x_i, x) + b``.
"""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field

import numpy as np

TAU = 1e-12
GRID_C = (0.1, 1.0, 10.0, 100.0)
GRID_EPS = (0.01, 0.1, 0.5, 1.0)


class ConvergenceError(RuntimeError):
    def __init__(self, message, kkt_residual):
        super().__init__(f"{message} (KKT residual {kkt_residual:.3e})")
        self.kkt_residual = kkt_residual


class IndefiniteKernelError(ValueError):
    pass


@dataclass(frozen=True)
class SvrModel:
    dual_coefficients: np.ndarray
    bias: float
    C: float
    epsilon: float
    training_ids: tuple = ()
    n_iter: int = 0
    kkt_residual: float = 0.0

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dual_coefficients != 0)

    def dumps(self) -> str:
        out = io.StringIO()
        out.write(f"# epsilon-SVR, precomputed kernel\nC = {self.C!r}\nepsilon = {self.epsilon!r}\n")
        out.write(f"bias = {self.bias!r}\nn_iter = {self.n_iter}\nkkt_residual = {self.kkt_residual!r}\n")
        out.write("sequence_id,dual_coefficient\n")
        ids = self.training_ids or tuple(str(i) for i in range(len(self.dual_coefficients)))
        for sid, c in zip(ids, self.dual_coefficients):
            out.write(f"{sid},{float(c)!r}\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str) -> "SvrModel":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        head = {}
        k = 0
        while "=" in lines[k]:
            key, val = lines[k].split("=", 1)
            head[key.strip()] = val.strip()
            k += 1
        ids, coefs = [], []
        for ln in lines[k + 1 :]:
            sid, c = ln.rsplit(",", 1)
            ids.append(sid)
            coefs.append(float(c))
        return cls(np.array(coefs), float(head["bias"]), float(head["C"]), float(head["epsilon"]),
                   tuple(ids), int(head.get("n_iter", 0)), float(head.get("kkt_residual", 0.0)))


def dual_objective(K, labels, beta, epsilon) -> float:
    """``1/2 b^T K b - z^T b + eps * |b|_1`` (the dual objective, minimised)."""
    K, z, beta = np.asarray(K, float), np.asarray(labels, float), np.asarray(beta, float)
    return float(0.5 * beta @ K @ beta - z @ beta + epsilon * np.abs(beta).sum())


def _check_kernel(K, n, psd_tol):
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    scale = max(1.0, float(np.abs(K).max()))
    if not np.allclose(K, K.T, rtol=0, atol=1e-8 * scale):
        raise ValueError("training kernel is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (K + K.T))
    if ev[0] < -psd_tol * max(abs(ev[-1]), 1e-300):
        raise IndefiniteKernelError(
            f"training kernel is indefinite (min eigenvalue {ev[0]:.3e}, max {ev[-1]:.3e}); "
            "inspect the kernel diagnostics or add jitter"
        )


def train_svr(
    K_train,
    labels,
    C: float = 1.0,
    epsilon: float = 0.1,
    *,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
    training_ids=(),
    psd_tol: float = 1e-6,
) -> SvrModel:
    """SMO with second-order working-set selection until the maximal KKT
    violation ``m(a) - M(a)`` drops below ``tol``."""
    K = np.asarray(K_train, dtype=float)
    z = np.asarray(labels, dtype=float)
    l = len(z)
    if l < 2:
        raise ValueError("need at least 2 training points")
    if not C > 0 or epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    _check_kernel(K, l, psd_tol)

    y = np.concatenate([np.ones(l), -np.ones(l)])
    idx = np.concatenate([np.arange(l), np.arange(l)])
    Q = y[:, None] * y[None, :] * K[np.ix_(idx, idx)]
    QD = np.diag(Q).copy()
    a = np.zeros(2 * l)
    G = np.concatenate([epsilon - z, epsilon + z])

    n_iter = 0
    while True:
        up = ((y > 0) & (a < C)) | ((y < 0) & (a > 0))
        low = ((y > 0) & (a > 0)) | ((y < 0) & (a < C))
        v = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(v[up])])
        g_max = v[i]
        g_min = v[low].min()
        gap = g_max - g_min
        if gap < tol:
            break
        if n_iter >= max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", gap)

        cand = low & (v < g_max)
        b = g_max - v[cand]
        quad = QD[i] + QD[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        quad = np.where(quad > 0, quad, TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / quad)])

        # two-variable subproblem, as in LIBSVM
        Qi, Qj = Q[i], Q[j]
        ai, aj = a[i], a[j]
        if y[i] != y[j]:
            qd = max(QD[i] + QD[j] + 2 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / qd
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            qd = max(QD[i] + QD[j] - 2 * Qi[j], TAU)
            delta = (G[i] - G[j]) / qd
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C and ai > C:
                ai, aj = C, total - C
            elif total <= C and aj < 0:
                aj, ai = 0.0, total
            if total > C and aj > C:
                aj, ai = C, total - C
            elif total <= C and ai < 0:
                ai, aj = 0.0, total
        d_i, d_j = ai - a[i], aj - a[j]
        a[i], a[j] = ai, aj
        G += Qi * d_i + Qj * d_j
        n_iter += 1

    beta = a[:l] - a[l:]
    return SvrModel(beta, -_rho(a, y, G, C), float(C), float(epsilon), tuple(training_ids), n_iter, float(gap))


def _rho(a, y, G, C):
    """Offset from free variables, or the midpoint of the feasible interval."""
    yG = y * G
    at_ub, at_lb = a >= C, a <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_ub & (y < 0)) | (at_lb & (y > 0))
    lb_mask = (at_ub & (y > 0)) | (at_lb & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def predict(model: SvrModel, k_rows) -> np.ndarray:
    """``k_rows[t, i]`` is the kernel between test item ``t`` and training item ``i``."""
    k_rows = np.atleast_2d(np.asarray(k_rows, float))
    if k_rows.shape[1] != len(model.dual_coefficients):
        raise ValueError(f"kernel rows have {k_rows.shape[1]} columns, model has {len(model.dual_coefficients)}")
    return k_rows @ model.dual_coefficients + model.bias


def _pair(y, x):
    y, x = np.asarray(y, float).ravel(), np.asarray(x, float).ravel()
    if y.shape != x.shape:
        raise ValueError(f"length mismatch: {y.size} vs {x.size}")
    if y.size == 0:
        raise ValueError("empty input")
    return y, x


def mae(y, x) -> float:
    y, x = _pair(y, x)
    return float(np.mean(np.abs(y - x)))


def rmse(y, x) -> float:
    y, x = _pair(y, x)
    return float(np.sqrt(np.mean((y - x) ** 2)))


@dataclass
class PredictionReport:
    """Pooled test predictions. ``predicted`` is raw, ``clipped`` lies in [0, 10]."""

    sequence_ids: list
    true: np.ndarray
    predicted: np.ndarray
    subject_ids: list = field(default_factory=list)
    folds: list = field(default_factory=list)

    def __post_init__(self):
        self.true = np.asarray(self.true, float)
        self.predicted = np.asarray(self.predicted, float)

    @property
    def clipped(self):
        return np.clip(self.predicted, 0.0, 10.0)

    @property
    def mae(self):
        return mae(self.true, self.predicted)

    @property
    def rmse(self):
        return rmse(self.true, self.predicted)

    @property
    def mae_clipped(self):
        return mae(self.true, self.clipped)

    @property
    def mae_rounded(self):
        return mae(self.true, np.round(self.clipped))

    def __len__(self):
        return len(self.true)


def grid_search(K, labels, *, seed=0, grid_C=GRID_C, grid_eps=GRID_EPS, val_fraction=0.2, **kw):
    """Pick (C, epsilon) by validation MAE on a seeded split of the given
    (training) items only, then refit on all of them."""
    z = np.asarray(labels, float)
    n = len(z)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n)))
    if n - n_val < 2:
        return train_svr(K, z, **kw), (kw.get("C", 1.0), kw.get("epsilon", 0.1))
    val, fit = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    kw_fit = {k: v for k, v in kw.items() if k != "training_ids"}
    best = None
    for C, eps in itertools.product(grid_C, grid_eps):
        m = train_svr(K[np.ix_(fit, fit)], z[fit], C, eps, **kw_fit)
        score = mae(z[val], predict(m, K[np.ix_(val, fit)]))
        if best is None or score < best[0]:
            best = (score, C, eps)
    _, C, eps = best
    return train_svr(K, z, C, eps, **kw), (C, eps)
