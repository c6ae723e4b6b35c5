"""Global Alignment Kernel between Gram trajectories and kernel assembly.

The local kernel between elements ``i`` and ``j`` is::

    k~ = 0.5 * exp(-D(i, j) / sigma^2),      k = k~ / (1 - k~)

and the similarity is the last cell of the table ``M`` of shape
``(t1 + 1, t2 + 1)`` with ``M[0, 0] = 1``, zero elsewhere on the borders
and ``M[i, j] = (M[i, j-1] + M[i-1, j-1] + M[i-1, j]) * k(i, j)``, i.e. the
sum over all monotone alignment paths of the product of local kernels.
The recursion runs in the log domain.
"""
from __future__ import annotations

import json
import logging
import math
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from . import manifold

log = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.8
CACHE_MAGIC = b"GAKCACHE"
CACHE_VERSION = 1


def cross_distance_matrix(T1, T2, group: str = manifold.DEFAULT_GROUP) -> np.ndarray:
    """``D[i, j] = d(G1_i, G2_j)``; arguments are trajectories or factor stacks."""
    F1 = np.asarray(getattr(T1, "factors", T1), float)
    F2 = np.asarray(getattr(T2, "factors", T2), float)
    if len(F1) == 0 or len(F2) == 0:
        raise ValueError("trajectories must be nonempty")
    if F1.shape[1:] != F2.shape[1:]:
        raise ValueError(f"factor shapes differ: {F1.shape[1:]} vs {F2.shape[1:]}")
    return manifold.pairwise_distances(F1, F2, group)


def local_kernel(D, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    kt = 0.5 * np.exp(-np.asarray(D, float) / sigma**2)
    return kt / (1.0 - kt)


def log_local_kernel(D, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """``log k`` computed without underflow for large distances."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    z = -np.asarray(D, float) / sigma**2
    return z - math.log(2.0) - np.log1p(-0.5 * np.exp(z))


@numba.njit(cache=True, nogil=True)
def _log_dp(logk):
    t1, t2 = logk.shape
    M = np.full((t1 + 1, t2 + 1), -np.inf)
    M[0, 0] = 0.0
    for i in range(1, t1 + 1):
        for j in range(1, t2 + 1):
            a, b, c = M[i, j - 1], M[i - 1, j - 1], M[i - 1, j]
            m = max(a, max(b, c))
            if m == -np.inf:
                continue
            M[i, j] = m + math.log(math.exp(a - m) + math.exp(b - m) + math.exp(c - m)) + logk[i - 1, j - 1]
    return M[t1, t2]


def log_gak_from_distances(D, sigma: float = DEFAULT_SIGMA) -> float:
    v = _log_dp(np.ascontiguousarray(log_local_kernel(D, sigma)))
    if math.isnan(v):
        raise FloatingPointError("NaN in alignment recursion")
    return float(v)


@numba.njit(cache=True, nogil=True)
def _linear_dp(k):
    t1, t2 = k.shape
    M = np.zeros((t1 + 1, t2 + 1))
    M[0, 0] = 1.0
    for i in range(1, t1 + 1):
        for j in range(1, t2 + 1):
            M[i, j] = (M[i, j - 1] + M[i - 1, j - 1] + M[i - 1, j]) * k[i - 1, j - 1]
    return M[t1, t2]


def gak_linear(D, sigma: float = DEFAULT_SIGMA) -> float:
    """Plain-domain recursion; underflows for long or distant sequences."""
    return float(_linear_dp(np.ascontiguousarray(local_kernel(D, sigma))))


def log_gak_similarity(T1, T2, sigma: float = DEFAULT_SIGMA, group=manifold.DEFAULT_GROUP, scale: float = 1.0) -> float:
    """Log of :func:`gak_similarity`; ``scale`` divides the distances first."""
    return log_gak_from_distances(cross_distance_matrix(T1, T2, group) / scale, sigma)


def gak_similarity(T1, T2, sigma: float = DEFAULT_SIGMA, group=manifold.DEFAULT_GROUP, scale: float = 1.0) -> float:
    """Sum over all monotone alignment paths of the product of local kernels.

    Uses the plain recursion when its result is a normal float and the
    log-domain one otherwise.
    """
    D = cross_distance_matrix(T1, T2, group) / scale
    v = gak_linear(D, sigma)
    if np.isfinite(v) and v > 1e-300:
        return v
    return math.exp(log_gak_from_distances(D, sigma))


def median_frame_distance(trajectories, group=manifold.DEFAULT_GROUP, max_frames: int = 2000) -> float:
    """Median distance between all pairs of frames pooled over ``trajectories``.

    Pools at most ``max_frames`` frames, taken at evenly spaced positions.
    """
    F = np.concatenate([np.asarray(getattr(t, "factors", t), float) for t in trajectories])
    if len(F) > max_frames:
        F = F[np.linspace(0, len(F) - 1, max_frames).round().astype(int)]
    D = manifold.pairwise_distances(F, F, group)
    iu = np.triu_indices(len(F), 1)
    med = float(np.median(D[iu]))
    if not med > 0:
        raise ValueError("median frame distance is zero; cannot normalise")
    return med


@dataclass
class SimilarityKernel:
    """GAK similarities between all sequences.

    ``K`` is what the regressor consumes; ``log_K`` keeps the raw log
    similarities. With ``normalized`` the kernel is ``K_pq / sqrt(K_pp K_qq)``.
    """

    K: np.ndarray
    sigma: float
    sequence_ids: list[str]
    log_K: np.ndarray | None = None
    jitter: float = 0.0
    distance_scale: float = 1.0
    normalized: bool = False
    min_eigenvalue: float = field(init=False)
    max_eigenvalue: float = field(init=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.K = np.asarray(self.K, float)
        ev = np.linalg.eigvalsh(self.K - self.jitter * np.eye(len(self.K)))
        self.min_eigenvalue, self.max_eigenvalue = float(ev[0]), float(ev[-1])

    def is_psd(self, rel_tol: float = 1e-6) -> bool:
        return self.min_eigenvalue >= -rel_tol * abs(self.max_eigenvalue)

    def index(self, ids) -> np.ndarray:
        pos = {s: i for i, s in enumerate(self.sequence_ids)}
        return np.array([pos[s] for s in ids], dtype=int)

    def subset(self, ids) -> "SimilarityKernel":
        idx = self.index(ids)
        sub = SimilarityKernel(
            self.K[np.ix_(idx, idx)], self.sigma, list(ids),
            None if self.log_K is None else self.log_K[np.ix_(idx, idx)],
            self.jitter, self.distance_scale, self.normalized, metadata=dict(self.metadata),
        )
        return sub


def _pair_task(trajs, sigma, group, scale):
    def run(pq):
        p, q = pq
        try:
            return log_gak_similarity(trajs[p], trajs[q], sigma, group, scale)
        except FloatingPointError as exc:
            raise FloatingPointError(f"pair ({p}, {q}): {exc}") from None
    return run


def log_kernel_matrix(trajectories, sigma=DEFAULT_SIGMA, group=manifold.DEFAULT_GROUP, scale=1.0, workers=1, others=None):
    """Matrix of log similarities; square over ``trajectories`` unless ``others`` is given."""
    trajs = list(trajectories)
    if others is None:
        pairs = [(p, q) for p in range(len(trajs)) for q in range(p, len(trajs))]
        table = trajs
    else:
        others = list(others)
        table = trajs + others
        pairs = [(p, len(trajs) + q) for p in range(len(trajs)) for q in range(len(others))]
    run = _pair_task(table, sigma, group, scale)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            values = list(ex.map(run, pairs, chunksize=64))
    else:
        values = [run(pq) for pq in pairs]
    if others is None:
        L = np.empty((len(trajs), len(trajs)))
        for (p, q), v in zip(pairs, values):
            L[p, q] = L[q, p] = v
    else:
        L = np.array(values).reshape(len(trajs), len(others))
    if np.isnan(L).any():
        p, q = np.argwhere(np.isnan(L))[0]
        raise FloatingPointError(f"NaN similarity for pair ({p}, {q})")
    return L


def normalize_log_kernel(L) -> np.ndarray:
    d = np.diag(L)
    return np.exp(L - 0.5 * (d[:, None] + d[None, :]))


def distance_scale(trajectories, mode, group=manifold.DEFAULT_GROUP) -> float:
    """Divisor applied to all distances before the local kernel.

    ``None``/``"none"``: 1. ``"median"``: median inter-frame distance.
    ``"median-length"``: that median times the median trajectory length,
    which keeps alignment sums of sequences of typical length in a range
    where cross similarities do not vanish next to self similarities.
    A number is used as is.
    """
    if mode is None or mode is False or mode == "none":
        return 1.0
    if mode is True or mode == "median":
        return median_frame_distance(trajectories, group)
    if mode == "median-length":
        lengths = [len(getattr(t, "factors", t)) for t in trajectories]
        return median_frame_distance(trajectories, group) * float(np.median(lengths))
    if isinstance(mode, (int, float)) and mode > 0:
        return float(mode)
    raise ValueError(f"unknown distance normalisation {mode!r}")


def build_kernel_matrix(
    trajectories,
    sigma: float = DEFAULT_SIGMA,
    *,
    group: str = manifold.DEFAULT_GROUP,
    normalize_distances=None,
    normalize: bool = False,
    workers: int = 1,
    psd_tol: float = 1e-6,
) -> SimilarityKernel:
    """Assemble the GAK matrix over ``trajectories``.

    ``normalize_distances`` selects a distance divisor (see
    :func:`distance_scale`). ``normalize`` returns the cosine-normalised
    kernel ``K_pq / sqrt(K_pp K_qq)`` (unit diagonal, still PSD). If the
    smallest eigenvalue is below ``-psd_tol * max eigenvalue`` a diagonal
    jitter lifting it to zero is added and logged.
    """
    trajs = list(trajectories)
    if len(trajs) < 2:
        raise ValueError("need at least 2 trajectories")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    scale = distance_scale(trajs, normalize_distances, group)
    L = log_kernel_matrix(trajs, sigma, group, scale, workers)
    if normalize:
        K = normalize_log_kernel(L)
    else:
        with np.errstate(over="raise"):
            try:
                K = np.exp(L)
            except FloatingPointError:
                raise OverflowError("similarities overflow float64; use normalize=True") from None
    ids = [getattr(t, "sequence_id", str(i)) for i, t in enumerate(trajs)]
    ker = SimilarityKernel(K, sigma, ids, L, 0.0, scale, normalize)
    if ker.min_eigenvalue < -psd_tol * abs(ker.max_eigenvalue):
        jitter = -ker.min_eigenvalue
        log.warning("kernel min eigenvalue %.3e < 0; adding diagonal jitter %.3e", ker.min_eigenvalue, jitter)
        ker = SimilarityKernel(K + jitter * np.eye(len(K)), sigma, ids, L, jitter, scale, normalize)
    return ker


# -- cache --------------------------------------------------------------------

def save_kernel(kernel: SimilarityKernel, path) -> None:
    """Binary cache: magic, u32 header length, JSON header, then row-major
    little-endian float64 ``K`` (and ``log_K`` when present). Written atomically."""
    n = len(kernel.K)
    header = {
        "version": CACHE_VERSION,
        "sigma": kernel.sigma,
        "n_seq": n,
        "sequence_ids": list(kernel.sequence_ids),
        "jitter": kernel.jitter,
        "distance_scale": kernel.distance_scale,
        "normalized": kernel.normalized,
        "has_log": kernel.log_K is not None,
        "metadata": kernel.metadata,
    }
    blob = json.dumps(header).encode("utf-8")
    payload = CACHE_MAGIC + struct.pack("<I", len(blob)) + blob
    payload += np.ascontiguousarray(kernel.K, dtype="<f8").tobytes()
    if kernel.log_K is not None:
        payload += np.ascontiguousarray(kernel.log_K, dtype="<f8").tobytes()
    _atomic_write(path, payload)


def load_kernel(path) -> SimilarityKernel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CACHE_MAGIC:
        raise ValueError(f"{path}: not a kernel cache file")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    if header["version"] != CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {header['version']}")
    n = header["n_seq"]
    off = 12 + hlen
    K = np.frombuffer(data, dtype="<f8", count=n * n, offset=off).reshape(n, n).astype(float)
    L = None
    if header.get("has_log"):
        L = np.frombuffer(data, dtype="<f8", count=n * n, offset=off + 8 * n * n).reshape(n, n).astype(float)
    return SimilarityKernel(
        K, header["sigma"], header["sequence_ids"], L, header["jitter"],
        header.get("distance_scale", 1.0), header.get("normalized", False),
        metadata=header.get("metadata", {}),
    )


def export_kernel_csv(kernel: SimilarityKernel, stream) -> None:
    stream.write("sequence_id," + ",".join(kernel.sequence_ids) + "\n")
    for sid, row in zip(kernel.sequence_ids, kernel.K):
        stream.write(sid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def _atomic_write(path, payload: bytes):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
