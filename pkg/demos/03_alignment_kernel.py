"""
Global alignment kernel between sequences
=========================================

The similarity sums, over every monotone alignment of two trajectories,
the product of local kernels ``k = k~ / (1 - k~)`` with
``k~ = exp(-D / sigma^2) / 2``. It is computed in the log domain.
"""

import numpy as np

from gakpain import gak
from gakpain.evaluation import ProtocolSpec, compute_kernel
from gakpain.landmark_io import GeneratorConfig, generate_synthetic

A = np.random.default_rng(0).standard_normal((6, 2))
T = np.stack([A, A])
print("two identical frames vs themselves:", gak.gak_similarity(T, T))  # three paths, each 1

ds = generate_synthetic(GeneratorConfig(subjects=4, seqs_per_subject=3, frames_min=40, frames_max=60, seed=4))

# raw distances with sigma = 0.8: cross similarities vanish next to self similarities
raw = compute_kernel(ds, ProtocolSpec(frame_stride=4))
L = raw.log_K
print("log self similarity (first 3):", np.round(np.diag(L)[:3], 1))
print("log cross similarity (0,1), (0,2):", np.round([L[0, 1], L[0, 2]], 1))

# dividing distances by (median frame distance x median length) and
# cosine-normalising gives a usable unit-diagonal kernel
ker = compute_kernel(ds, ProtocolSpec(frame_stride=4, normalize_distances="median-length", normalize_kernel=True))
print("distance scale:", round(ker.distance_scale, 3))
print("eigenvalues min/max:", ker.min_eigenvalue, ker.max_eigenvalue)
order = np.argsort(ds.labels)
print("labels:", ds.labels[order].astype(int))
print(np.round(ker.K[np.ix_(order, order)], 2))
