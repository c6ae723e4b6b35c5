import numpy as np
import pytest

from conftest import REFLECT, rotation
from gakpain import manifold
from gakpain.landmark_io import LandmarkSequence
from gakpain.representation import (
    FacialConfiguration,
    build_trajectory,
    center,
    compute_velocities,
    gram,
)


def _seq(frames, sid="a"):
    return LandmarkSequence(sid, "s", np.asarray(frames, float), 1.0)


def test_constant_sequence_has_zero_velocity():
    frames = np.repeat(np.random.default_rng(0).standard_normal((1, 5, 2)), 4, axis=0)
    assert np.all(compute_velocities(_seq(frames)) == 0)


def test_uniform_shift_velocity():
    Z0 = np.random.default_rng(0).standard_normal((5, 2))
    v = compute_velocities(_seq([Z0, Z0 + [1.0, 2.0]]))
    np.testing.assert_allclose(v[0], np.tile([1.0, 2.0], (5, 1)))


def test_velocities_match_finite_differences(rng):
    frames = rng.standard_normal((3, 6, 2))
    v = compute_velocities(_seq(frames))
    assert v.shape == (2, 6, 2)
    for f in range(2):
        for k in range(6):
            for c in range(2):
                assert v[f, k, c] == frames[f + 1, k, c] - frames[f, k, c]


def test_center_examples():
    out = center([[0, 0], [2, 0], [1, 3]])
    np.testing.assert_allclose(out, [[-1, -1], [1, -1], [0, 2]])
    np.testing.assert_allclose(center(out), out, atol=1e-15)
    x = np.random.default_rng(1).standard_normal((7, 2))
    np.testing.assert_allclose(center(x + [3.5, -8.0]), center(x), atol=1e-12)


def test_trajectory_shapes_and_blocks(rng):
    n = 5
    frames = rng.standard_normal((2, n, 2))
    traj = build_trajectory(_seq(frames))
    assert len(traj) == 1 and traj.factors.shape == (1, 2 * n, 2)
    A = traj.factors[0]
    np.testing.assert_allclose(A[:n].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(A[n:].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(A[:n], center(frames[0]))
    np.testing.assert_allclose(A[n:], center(frames[1] - frames[0]))


def test_constant_sequence_trajectory_rank_two(rng):
    frames = np.repeat(rng.standard_normal((1, 5, 2)), 3, axis=0)
    traj = build_trajectory(_seq(frames))
    assert len(traj) == 2
    assert np.all(traj.factors[:, 5:] == 0)
    assert all(c.rank == 2 and not c.degenerate for c in traj.configurations)


def test_labels_and_ids_propagate(rng):
    seq = LandmarkSequence("q1", "subj", rng.standard_normal((4, 3, 2)), 7.0)
    traj = build_trajectory(seq)
    assert (traj.sequence_id, traj.subject_id, traj.vas_label) == ("q1", "subj", 7.0)
    np.testing.assert_array_equal(traj.times, [0, 1, 2])


def test_translation_invariance(rng):
    frames = rng.standard_normal((6, 5, 2))
    offsets = rng.standard_normal((6, 1, 2)) * 100
    a = build_trajectory(_seq(frames)).factors
    b = build_trajectory(_seq(frames + offsets)).factors
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_rotating_face_distances_invariant_to_global_rotation(rng):
    Z = rng.standard_normal((5, 2))
    R = rotation(0.1)
    frames = np.stack([Z @ np.linalg.matrix_power(R, f).T for f in range(6)])
    g = rotation(1.3)
    F1 = build_trajectory(_seq(frames)).factors
    F2 = build_trajectory(_seq(frames @ g.T)).factors
    D1 = manifold.pairwise_distances(F1, F1)
    D2 = manifold.pairwise_distances(F2, F2)
    np.testing.assert_allclose(D1, D2, atol=1e-10)


def test_single_frame_rejected():
    with pytest.raises(ValueError):
        compute_velocities(np.zeros((1, 3, 2)))


def test_gram_examples(rng):
    np.testing.assert_array_equal(gram(np.eye(2)), np.eye(2))
    A = rng.standard_normal((6, 2))
    for Q in (rotation(0.7), rotation(2.0) @ REFLECT):
        np.testing.assert_allclose(gram(A @ Q), gram(A), atol=1e-10)
    G = gram(FacialConfiguration(A))
    np.testing.assert_allclose(G, G.T)
    ev = np.linalg.eigvalsh(G)
    assert np.all(np.abs(ev[:-2]) < 1e-10 * ev[-1])
    assert np.all(ev[-2:] > 0)
    np.testing.assert_allclose(ev.sum(), np.sum(A**2))
    np.testing.assert_allclose(np.trace(G), np.linalg.norm(A) ** 2)


def test_gram_rejects_non_finite():
    with pytest.raises(ValueError):
        gram(np.array([[np.nan, 0.0], [0.0, 1.0]]))
