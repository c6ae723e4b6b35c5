"""Smoothing of Gram trajectories by blended composite cubic Bezier curves.

For every data point ``G_i`` the trajectory is lifted to the tangent space
at ``G_i`` (``x_j = log_{G_i}(G_j)``) and a composite cubic Bezier curve
``c_i`` with C2 joints at the data times is fitted there by minimising::

    lam * sum_j ||c_i(t_j) - x_j||^2 + integral ||c_i''(t)||^2 dt

This is the natural cubic smoothing spline, solved in closed form by the
Reinsch banded system. On ``[t_i, t_{i+1}]`` the output blends ``c_i`` with
``c_{i+1}`` (moved to ``G_i`` through its manifold point) using weights
``1 - s`` and ``s``.

Large ``lam`` interpolates the data; ``lam -> 0`` tends to the least-squares
straight line in each tangent space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import manifold
from .representation import GramTrajectory

DEFAULT_LAMBDA = 1000.0


@dataclass(frozen=True)
class FittingConfig:
    """``window`` limits each tangent-space fit to ``i - window .. i + window``
    (``None`` uses the whole trajectory)."""

    lam: float = DEFAULT_LAMBDA
    samples_per_interval: int = 1
    window: int | None = None
    group: str = manifold.DEFAULT_GROUP

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if self.samples_per_interval < 1:
            raise ValueError("samples_per_interval must be >= 1")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class FittedTrajectory:
    trajectory: GramTrajectory
    proximity_error: float
    msa: float

    def __len__(self):
        return len(self.trajectory)

    @property
    def factors(self):
        return self.trajectory.factors


class CompositeBezier:
    """Piecewise cubic Bezier curve; ``control[j]`` holds the 4 control points
    of the piece on ``[knots[j], knots[j+1]]``."""

    def __init__(self, knots, control):
        self.knots = np.asarray(knots, float)
        self.control = np.asarray(control, float)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, float))
        j = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        h = self.knots[j + 1] - self.knots[j]
        u = ((t - self.knots[j]) / h)[:, None]
        w = np.concatenate([(1 - u) ** 3, 3 * u * (1 - u) ** 2, 3 * u**2 * (1 - u), u**3], axis=1)
        return np.einsum("tk,tk...->t...", w, self.control[j])


def smoothing_spline(t, y, lam) -> CompositeBezier:
    """Natural cubic smoothing spline through samples ``y`` (n, ...) at knots ``t``.

    Minimises ``lam * sum ||c(t_j) - y_j||^2 + int ||c''||^2``.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    n = len(t)
    shape = y.shape[1:]
    Y = y.reshape(n, -1)
    h = np.diff(t)
    if n == 2:
        g, gam = Y, np.zeros_like(Y)
    else:
        Q = np.zeros((n, n - 2))
        R = np.zeros((n - 2, n - 2))
        for k in range(n - 2):
            Q[k, k] = 1 / h[k]
            Q[k + 1, k] = -1 / h[k] - 1 / h[k + 1]
            Q[k + 2, k] = 1 / h[k + 1]
            R[k, k] = (h[k] + h[k + 1]) / 3
            if k + 1 < n - 2:
                R[k, k + 1] = R[k + 1, k] = h[k + 1] / 6
        alpha = 1.0 / lam
        inner = np.linalg.solve(R + alpha * Q.T @ Q, Q.T @ Y)
        g = Y - alpha * Q @ inner
        gam = np.vstack([np.zeros((1, Y.shape[1])), inner, np.zeros((1, Y.shape[1]))])
    hh = h[:, None]
    slope = (g[1:] - g[:-1]) / hh
    d_left = slope - hh * (2 * gam[:-1] + gam[1:]) / 6
    d_right = slope + hh * (gam[:-1] + 2 * gam[1:]) / 6
    ctrl = np.stack([g[:-1], g[:-1] + hh * d_left / 3, g[1:] - hh * d_right / 3, g[1:]], axis=1)
    return CompositeBezier(t, ctrl.reshape((n - 1, 4) + shape))


def tangent_curves(traj: GramTrajectory, cfg: FittingConfig) -> list[CompositeBezier]:
    """The fitted curve ``c_i`` in the tangent space of each data point."""
    F, times = traj.factors, traj.times
    n = len(F)
    w = n if cfg.window is None else cfg.window
    curves = []
    for i in range(n):
        lo, hi = max(0, i - w), min(n - 1, i + w)
        X = manifold.log_many(F[i], F[lo : hi + 1], cfg.group)
        curves.append(smoothing_spline(times[lo : hi + 1], X, cfg.lam))
    return curves


def fit_trajectory(traj: GramTrajectory, cfg: FittingConfig | None = None) -> FittedTrajectory:
    """Blended spline smoothing of ``traj``, resampled ``samples_per_interval`` times per step."""
    cfg = cfg or FittingConfig()
    F = traj.factors
    if not np.all(np.isfinite(F)):
        raise ValueError(f"trajectory {traj.sequence_id!r} has non-finite factors")
    if len(F) == 1:
        return FittedTrajectory(traj, 0.0, 0.0)

    curves = tangent_curves(traj, cfg)
    spi = cfg.samples_per_interval
    times = traj.times
    out, out_t = [], []
    for i in range(len(F) - 1):
        for k in range(spi):
            s = k / spi
            t = times[i] + s * (times[i + 1] - times[i])
            v_i = curves[i](t)[0]
            if k == 0:
                out.append(F[i] + v_i)
            else:
                p_next = F[i + 1] + curves[i + 1](t)[0]
                v_next = manifold.log_map(F[i], p_next, cfg.group).direction
                out.append(F[i] + (1 - s) * v_i + s * v_next)
            out_t.append(t)
    out.append(F[-1] + curves[-1](times[-1])[0])
    out_t.append(times[-1])

    fitted = traj.replace_factors(np.array(out), np.array(out_t))
    at_data = fitted.factors[::spi]
    prox = float(sum(manifold.distance(b, a, cfg.group) ** 2 for b, a in zip(at_data, F)))
    msa = mean_square_acceleration(fitted, cfg.group) if len(fitted) >= 3 else 0.0
    return FittedTrajectory(fitted, prox, msa)


def mean_square_acceleration(traj, group: str = manifold.DEFAULT_GROUP) -> float:
    """Mean over interior points of ``||log_i(G_{i+1}) + log_i(G_{i-1})||_F^2``.

    Differences are per sample step (no division by the step size).
    """
    F = traj.factors if hasattr(traj, "factors") else np.asarray(traj, float)
    if len(F) < 3:
        raise ValueError("mean square acceleration needs at least 3 points")
    acc = [
        np.sum(manifold.log_many(F[i], F[[i - 1, i + 1]], group).sum(axis=0) ** 2)
        for i in range(1, len(F) - 1)
    ]
    return float(np.mean(acc))


def fit_all(trajectories, cfg: FittingConfig | None = None) -> list[GramTrajectory]:
    return [fit_trajectory(t, cfg).trajectory for t in trajectories]
