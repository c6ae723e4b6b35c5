"""Centered coordinate/velocity configurations and their Gram matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .landmark_io import LandmarkSequence


@dataclass(frozen=True)
class FacialConfiguration:
    """Factor ``A`` (2n x 2): centered coordinates stacked on centered velocities."""

    A: np.ndarray
    frame_index: int = 0

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.A))

    @property
    def degenerate(self) -> bool:
        return self.rank < self.A.shape[1]


@dataclass(frozen=True)
class GramTrajectory:
    """Time-indexed factors ``factors[i]`` of the Gram matrices ``G_i``.

    ``factors`` has shape (length, m, d); ``times`` defaults to 0, 1, ...
    """

    factors: np.ndarray
    times: np.ndarray | None = None
    sequence_id: str = ""
    subject_id: str = ""
    vas_label: float = float("nan")

    def __post_init__(self):
        factors = np.asarray(self.factors, dtype=float)
        if factors.ndim != 3 or factors.shape[0] < 1:
            raise ValueError(f"factors must have shape (length>=1, m, d), got {factors.shape}")
        times = np.arange(factors.shape[0], dtype=float) if self.times is None else np.asarray(self.times, float)
        if times.shape != (factors.shape[0],) or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing, one per factor")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "times", times)

    def __len__(self):
        return self.factors.shape[0]

    @property
    def configurations(self) -> list[FacialConfiguration]:
        return [FacialConfiguration(a, i) for i, a in enumerate(self.factors)]

    def grams(self) -> np.ndarray:
        return np.einsum("tik,tjk->tij", self.factors, self.factors)

    def replace_factors(self, factors, times=None) -> "GramTrajectory":
        return GramTrajectory(factors, times, self.sequence_id, self.subject_id, self.vas_label)


def center(matrix) -> np.ndarray:
    """Subtract the column-wise mean of the rows."""
    matrix = np.asarray(matrix, dtype=float)
    return matrix - matrix.mean(axis=-2, keepdims=True)


def compute_velocities(seq: LandmarkSequence) -> np.ndarray:
    """Forward differences ``Z[f+1] - Z[f]``, shape (frames-1, n, 2)."""
    frames = seq.frames if isinstance(seq, LandmarkSequence) else np.asarray(seq, float)
    if frames.shape[0] < 2:
        raise ValueError("velocities need at least 2 frames")
    return np.diff(frames, axis=0)


def configuration_factors(frames) -> np.ndarray:
    """Stacked factors for a raw (T, n, 2) frame array; shape (T-1, 2n, 2).

    The last frame has no forward velocity and is dropped.
    """
    frames = np.asarray(frames, dtype=float)
    vel = np.diff(frames, axis=0)
    return np.concatenate([center(frames[:-1]), center(vel)], axis=1)


def build_trajectory(seq: LandmarkSequence) -> GramTrajectory:
    compute_velocities(seq)  # length check
    return GramTrajectory(
        configuration_factors(seq.frames),
        sequence_id=seq.sequence_id,
        subject_id=seq.subject_id,
        vas_label=seq.vas_label,
    )


def gram(config) -> np.ndarray:
    """``A @ A.T`` for a configuration or a raw factor."""
    A = config.A if isinstance(config, FacialConfiguration) else np.asarray(config, float)
    if not np.all(np.isfinite(A)):
        raise ValueError("factor has non-finite entries")
    return A @ A.T
