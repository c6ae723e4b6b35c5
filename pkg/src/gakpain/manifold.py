"""Quotient geometry of fixed-rank PSD matrices.

A point ``G = A A^T`` of PSD(d, m) is carried by any factor ``A`` (m x d);
factors that differ by a right orthogonal transform represent the same
point. Distances are the Frobenius distance between the two equivalence
classes, minimised over ``O(d)`` (``group="O"``) or over rotations only
(``group="SO"``). For d = 2 the rotation-only minimum has a closed form and
is the default used by the pipeline; the two agree whenever
``det(A_i^T A_j) >= 0``.

Note the squared distance equals ``tr G_i + tr G_j - 2 tr((G_i^1/2 G_j G_i^1/2)^1/2)``;
all functions here return the (unsquared) Frobenius value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GROUP = "SO"
# radicands in [-RADICAND_TOL * scale, 0) are rounding noise
RADICAND_TOL = 1e-9


@dataclass(frozen=True)
class AlignmentRotation:
    Q: np.ndarray
    det_sign: int


@dataclass(frozen=True)
class TangentVector:
    """Horizontal lift ``direction`` at ``base_factor``."""

    base_factor: np.ndarray
    direction: np.ndarray

    def __mul__(self, s):
        return TangentVector(self.base_factor, s * self.direction)

    __rmul__ = __mul__

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.direction))


@dataclass(frozen=True)
class ManifoldPoint:
    """Factor returned by :func:`exp_map`; ``rank_deficient`` flags leaving the rank-d stratum."""

    A: np.ndarray
    rank_deficient: bool = False


def _factor(x) -> np.ndarray:
    return np.asarray(getattr(x, "A", x), dtype=float)


def _check_group(group):
    if group not in ("O", "SO"):
        raise ValueError(f"group must be 'O' or 'SO', got {group!r}")


def optimal_rotation(A_i, A_j, group: str = DEFAULT_GROUP) -> AlignmentRotation:
    """Orthogonal ``Q`` minimising ``||A_j Q - A_i||_F``.

    With ``A_i^T A_j = U S V^T`` the O(d) optimum is ``V U^T``; for SO(d) the
    last column of ``V`` is negated when that product is a reflection.
    """
    _check_group(group)
    A_i, A_j = _factor(A_i), _factor(A_j)
    U, _, Vt = np.linalg.svd(A_i.T @ A_j)
    V = Vt.T
    Q = V @ U.T
    if group == "SO" and np.linalg.det(Q) < 0:
        V = V.copy()
        V[:, -1] *= -1
        Q = V @ U.T
    return AlignmentRotation(Q, int(np.sign(np.linalg.det(Q))))


def _sum_singular_values(M, group):
    """Max of ``tr(M Q)`` over the group, batched over leading axes."""
    if M.shape[-1] == 2 and group == "SO":
        a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
        return np.hypot(a + d, c - b)
    s = np.linalg.svd(M, compute_uv=False)
    if group == "SO":
        det = np.linalg.det(M)
        s = s.copy()
        s[..., -1] = np.where(det < 0, -s[..., -1], s[..., -1])
    return s.sum(axis=-1)


# below this fraction of tr G_i + tr G_j the trace form loses all digits
REFINE_FRACTION = 1e-6


def _finish(tr_i, tr_j, cross, strict=False):
    rad = tr_i + tr_j - 2.0 * cross
    floor = -RADICAND_TOL * np.maximum(1.0, tr_i + tr_j)
    if strict and np.any(rad < floor):
        raise FloatingPointError(f"negative radicand {np.min(rad):.3e} in distance")
    return np.sqrt(np.maximum(rad, 0.0))


def _rotations(M, group):
    """Batched optimal ``Q`` for cross products ``M = A_i^T A_j``."""
    U, _, Vt = np.linalg.svd(M)
    V = np.swapaxes(Vt, -1, -2)
    if group == "SO":
        flip = np.linalg.det(V @ np.swapaxes(U, -1, -2)) < 0
        V = V.copy()
        V[flip, ..., -1] *= -1
    return V @ np.swapaxes(U, -1, -2)


def _residuals(Ai, Aj, group):
    """``||A_j Q* - A_i||_F`` evaluated directly (accurate near zero)."""
    Q = _rotations(np.swapaxes(Ai, -1, -2) @ Aj, group)
    r = np.linalg.norm(Aj @ Q - Ai, axis=(-2, -1))
    # residuals at rounding level (e.g. A_i == A_j) are exact zeros
    noise = 64 * np.finfo(float).eps * np.sqrt(np.sum(Ai * Ai, axis=(-2, -1)) + np.sum(Aj * Aj, axis=(-2, -1)))
    return np.where(r <= noise, 0.0, r)


def distance(A_i, A_j, group: str = DEFAULT_GROUP) -> float:
    """``min_Q ||A_j Q - A_i||_F`` over ``group``."""
    _check_group(group)
    A_i, A_j = _factor(A_i), _factor(A_j)
    if A_i.shape != A_j.shape:
        raise ValueError(f"shape mismatch {A_i.shape} vs {A_j.shape}")
    tr = np.sum(A_i * A_i) + np.sum(A_j * A_j)
    d = float(_finish(np.sum(A_i * A_i), np.sum(A_j * A_j), _sum_singular_values(A_i.T @ A_j, group)))
    if d * d < REFINE_FRACTION * tr:
        d = float(_residuals(A_i, A_j, group))
    return d


def distance_2d(A_i, A_j) -> float:
    """Closed-form rotation-only distance for d = 2.

    With ``A_i^T A_j = [[a, b], [c, d]]`` this is
    ``sqrt(tr G_i + tr G_j - 2 sqrt((a + d)^2 + (c - b)^2))``.
    """
    A_i, A_j = _factor(A_i), _factor(A_j)
    if A_i.shape != A_j.shape or A_i.shape[1] != 2:
        raise ValueError("distance_2d needs two m x 2 factors")
    (a, b), (c, d) = A_i.T @ A_j
    cross = np.sqrt((a + d) ** 2 + (c - b) ** 2)
    return float(_finish(np.sum(A_i * A_i), np.sum(A_j * A_j), cross, strict=True))


def pairwise_distances(F1, F2, group: str = DEFAULT_GROUP) -> np.ndarray:
    """Distance between every factor of ``F1`` (t1, m, d) and of ``F2`` (t2, m, d)."""
    _check_group(group)
    F1, F2 = np.asarray(F1, float), np.asarray(F2, float)
    if F1.shape[1:] != F2.shape[1:]:
        raise ValueError(f"factor shapes differ: {F1.shape[1:]} vs {F2.shape[1:]}")
    M = np.einsum("imk,jml->ijkl", F1, F2)
    tr1 = np.einsum("imk,imk->i", F1, F1)
    tr2 = np.einsum("imk,imk->i", F2, F2)
    D = _finish(tr1[:, None], tr2[None, :], _sum_singular_values(M, group))
    # nearly coincident pairs: recompute from the aligned residual
    ii, jj = np.nonzero(D * D < REFINE_FRACTION * (tr1[:, None] + tr2[None, :]))
    if ii.size:
        D[ii, jj] = _residuals(F1[ii], F2[jj], group)
    return D


def log_map(base, target, group: str = DEFAULT_GROUP) -> TangentVector:
    """Horizontal lift ``A_j Q* - A_i`` of the minimising geodesic from base to target."""
    A_i, A_j = _factor(base), _factor(target)
    if A_i.shape != A_j.shape:
        raise ValueError(f"shape mismatch {A_i.shape} vs {A_j.shape}")
    Q = optimal_rotation(A_i, A_j, group).Q
    return TangentVector(A_i, A_j @ Q - A_i)


def exp_map(base, tangent: TangentVector) -> ManifoldPoint:
    A = _factor(base)
    direction = tangent.direction if isinstance(tangent, TangentVector) else np.asarray(tangent, float)
    if direction.shape != A.shape:
        raise ValueError("tangent and base shapes differ")
    out = A + direction
    deficient = np.linalg.matrix_rank(out) < min(out.shape)
    return ManifoldPoint(out, bool(deficient))


def log_many(base, targets, group: str = DEFAULT_GROUP) -> np.ndarray:
    """Batched :func:`log_map` directions for a stack of targets (k, m, d)."""
    A = _factor(base)
    T = np.asarray(targets, float)
    Q = _rotations(np.einsum("mk,jml->jkl", A, T), group)
    return T @ Q - A
