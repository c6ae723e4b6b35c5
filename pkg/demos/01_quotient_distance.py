"""
Distances between faces on the Gram-matrix manifold
===================================================

A centered configuration ``A`` (landmarks stacked on velocities) represents
the Gram matrix ``G = A A^T``. Rotating the face leaves ``G`` unchanged, so
distances are taken between rotation classes of factors.
"""

import numpy as np

from gakpain import manifold

rng = np.random.default_rng(0)
A = rng.standard_normal((6, 2))
B = A + 0.3 * rng.standard_normal((6, 2))


def rot(theta):
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


# rotating either factor does not move the point
print("d(A, B)           =", manifold.distance(A, B))
print("d(A R1, B R2)     =", manifold.distance(A @ rot(0.4), B @ rot(2.1)))

# the 2D closed form agrees with the SVD path when det(A^T B) >= 0
print("det(A^T B)        =", np.linalg.det(A.T @ B))
print("closed form       =", manifold.distance_2d(A, B))
print("SVD, O(2)         =", manifold.distance(A, B, group="O"))

# with a mirrored target the rotation-only distance is larger
M = B @ np.diag([1.0, -1.0])
print("mirrored: SO(2) =", manifold.distance_2d(A, M), " O(2) =", manifold.distance(A, M, group="O"))

# log and exp walk along the geodesic
v = manifold.log_map(A, B)
for s in (0.0, 0.5, 1.0):
    P = manifold.exp_map(A, s * v).A
    print(f"s={s:.1f}  d(A, P)={manifold.distance(A, P):.6f}  d(P, B)={manifold.distance(P, B):.6f}")
