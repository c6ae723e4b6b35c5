"""
Smoothing a trajectory: the lambda trade-off
============================================

Each data point gets a cubic smoothing curve in its tangent space; the
output blends neighbouring curves. Large ``lam`` follows the data, small
``lam`` flattens the path.
"""

import numpy as np

from gakpain.fitting import FittingConfig, fit_trajectory
from gakpain.landmark_io import GeneratorConfig, downsample, generate_synthetic
from gakpain.representation import build_trajectory

ds = generate_synthetic(GeneratorConfig(subjects=1, seqs_per_subject=1, frames_min=80, frames_max=80, seed=2))
traj = build_trajectory(downsample(ds[0], 4))
print(f"sequence {traj.sequence_id}: {len(traj)} configurations of shape {traj.factors.shape[1:]}")

print(f"{'lambda':>8} {'proximity':>12} {'msa':>12}")
for lam in (0.1, 1.0, 10.0, 1000.0, 1e6):
    fit = fit_trajectory(traj, FittingConfig(lam=lam))
    print(f"{lam:>8g} {fit.proximity_error:>12.5g} {fit.msa:>12.5g}")

# denser resampling between the original frames
dense = fit_trajectory(traj, FittingConfig(lam=1000.0, samples_per_interval=4))
print("resampled length:", len(dense), "times", np.round(dense.trajectory.times[:6], 2), "...")
