"""Cross-validation protocols and the end-to-end pipeline.

Pipeline per protocol: downsample -> trajectories -> curve fitting ->
one GAK matrix over the whole dataset -> for every fold, train the SVR on
the train/train block and predict the test/train rows. Errors are pooled
over all test predictions.
"""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gak, manifold
from .fitting import FittingConfig, fit_trajectory
from .landmark_io import Dataset, downsample
from .regression import PredictionReport, SvrModel, grid_search, mae, predict, rmse, train_svr
from .representation import build_trajectory

log = logging.getLogger(__name__)

PROTOCOLS = {
    "loso-seq": "Leave-One-Sequence-Out",
    "loso-subject": "Leave-One-Subject-Out",
    "5fold": "5-fold cross validation",
}
PAPER_STRIDES = (1, 4)


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str = "5fold"
    frame_stride: int = 4
    fitting: FittingConfig = field(default_factory=FittingConfig)
    sigma: float = gak.DEFAULT_SIGMA
    C: float = 1.0
    epsilon: float = 0.1
    grid: bool = False
    normalize_distances: object = None
    normalize_kernel: bool = False
    aggregate: str = "pooled"
    seed: int = 0
    workers: int = 1
    group: str = manifold.DEFAULT_GROUP

    def __post_init__(self):
        if self.kind not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.kind!r}; valid: {', '.join(PROTOCOLS)}")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.aggregate not in ("pooled", "macro"):
            raise ValueError("aggregate must be 'pooled' or 'macro'")

    @property
    def nonstandard_stride(self) -> bool:
        return self.frame_stride not in PAPER_STRIDES

    @property
    def percent_frames(self) -> float:
        return 100.0 / self.frame_stride


@dataclass(frozen=True)
class Fold:
    train_ids: tuple
    test_ids: tuple


@dataclass(frozen=True)
class FoldPlan:
    kind: str
    folds: tuple
    irregular: bool = False

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def make_folds(dataset: Dataset, kind: str) -> FoldPlan:
    """Folds for ``kind`` in {'loso-seq', 'loso-subject', '5fold'}.

    '5fold' tests on 5 consecutive subjects at a time in dataset order; when
    the subject count is not a multiple of 5 the last fold takes the rest
    and the plan is flagged ``irregular``.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    ids = dataset.sequence_ids
    subject_of = {s.sequence_id: s.subject_id for s in dataset}
    if kind == "loso-seq":
        groups = [[sid] for sid in ids]
        irregular = False
    elif kind in ("loso-subject", "5fold"):
        subjects = list(dataset.subjects)
        if kind == "loso-subject":
            blocks = [[s] for s in subjects]
            irregular = False
        else:
            if len(subjects) < 5:
                raise ValueError("5-fold-by-subject needs at least 5 subjects")
            blocks = [subjects[k : k + 5] for k in range(0, len(subjects), 5)]
            irregular = len(subjects) % 5 != 0
            if irregular:
                log.warning("%d subjects is not a multiple of 5; last fold has %d", len(subjects), len(blocks[-1]))
        groups = [[sid for sid in ids if subject_of[sid] in set(b)] for b in blocks]
    else:
        raise ValueError(f"unknown protocol {kind!r}; valid: {', '.join(PROTOCOLS)}")
    folds = []
    for k, test in enumerate(groups):
        t = set(test)
        train = tuple(sid for sid in ids if sid not in t)
        if len(train) < 2:
            raise ValueError(f"{PROTOCOLS[kind]}: fold {k} leaves {len(train)} training sequences (need 2)")
        folds.append(Fold(train, tuple(test)))
    return FoldPlan(kind, tuple(folds), irregular)


def check_fold_plan(plan: FoldPlan, dataset: Dataset) -> None:
    """Raise if test sets do not partition the data or train and test overlap."""
    seen = []
    subject_of = {s.sequence_id: s.subject_id for s in dataset}
    for k, f in enumerate(plan):
        if set(f.train_ids) & set(f.test_ids):
            raise AssertionError(f"fold {k}: train and test overlap")
        if plan.kind != "loso-seq":
            tr = {subject_of[s] for s in f.train_ids}
            te = {subject_of[s] for s in f.test_ids}
            if tr & te:
                raise AssertionError(f"fold {k}: subjects {sorted(tr & te)} in train and test")
        seen.extend(f.test_ids)
    if sorted(seen) != sorted(dataset.sequence_ids) or len(seen) != len(set(seen)):
        raise AssertionError("test sets do not partition the dataset")


# -- pipeline -----------------------------------------------------------------

def prepare_trajectories(dataset: Dataset, spec: ProtocolSpec):
    """Downsampled, fitted trajectories and the fitting diagnostics."""
    trajs, diags = [], []
    for s in dataset:
        traj = build_trajectory(downsample(s, spec.frame_stride))
        fitted = fit_trajectory(traj, spec.fitting)
        trajs.append(fitted.trajectory)
        diags.append((fitted.proximity_error, fitted.msa))
    return trajs, np.array(diags).reshape(-1, 2)


def compute_kernel(dataset: Dataset, spec: ProtocolSpec) -> gak.SimilarityKernel:
    trajs, diags = prepare_trajectories(dataset, spec)
    ker = gak.build_kernel_matrix(
        trajs, spec.sigma, group=spec.group, normalize_distances=spec.normalize_distances,
        normalize=spec.normalize_kernel, workers=spec.workers,
    )
    ker.metadata.update(
        stride=spec.frame_stride, lam=spec.fitting.lam, group=spec.group,
        mean_proximity_error=float(diags[:, 0].mean()), mean_msa=float(diags[:, 1].mean()),
    )
    return ker


@dataclass
class FoldResult:
    fold: int
    train_ids: tuple
    test_ids: tuple
    predictions: np.ndarray
    baseline: np.ndarray
    model: SvrModel
    hyperparameters: tuple


@dataclass
class ProtocolResult:
    spec: ProtocolSpec
    report: PredictionReport
    baseline: PredictionReport
    folds: list
    kernel: gak.SimilarityKernel

    @property
    def mae(self) -> float:
        if self.spec.aggregate == "macro":
            return float(np.mean([mae(self._truth(f), f.predictions) for f in self.folds]))
        return self.report.mae

    @property
    def rmse(self) -> float:
        if self.spec.aggregate == "macro":
            return float(np.mean([rmse(self._truth(f), f.predictions) for f in self.folds]))
        return self.report.rmse

    @property
    def baseline_mae(self) -> float:
        return self.baseline.mae

    def _truth(self, fold):
        pos = {s: i for i, s in enumerate(self.report.sequence_ids)}
        return self.report.true[[pos[s] for s in fold.test_ids]]

    def summary_row(self) -> dict:
        return {
            "protocol": PROTOCOLS[self.spec.kind],
            "percent_frames": self.spec.percent_frames,
            "mae": self.mae,
            "rmse": self.rmse,
        }


def _run_fold(k, fold, K, index, labels, spec):
    # the solver path depends on item order; sorting ids makes results
    # independent of the dataset order
    train_ids = tuple(sorted(fold.train_ids))
    tr, te = index(train_ids), index(fold.test_ids)
    if np.intersect1d(tr, te).size:
        raise AssertionError(f"fold {k}: kernel rows leak between train and test")
    K_train = K[np.ix_(tr, tr)]
    y_train = labels[tr]
    try:
        if spec.grid:
            model, hp = grid_search(K_train, y_train, seed=spec.seed + k, training_ids=train_ids)
        else:
            model = train_svr(K_train, y_train, spec.C, spec.epsilon, training_ids=train_ids)
            hp = (spec.C, spec.epsilon)
    except Exception as exc:
        raise type(exc)(f"fold {k}: {exc}") from exc
    pred = predict(model, K[np.ix_(te, tr)])
    base = np.full(len(te), y_train.mean())
    return FoldResult(k, train_ids, fold.test_ids, pred, base, model, hp)


def run_protocol(dataset: Dataset, spec: ProtocolSpec, kernel: gak.SimilarityKernel | None = None) -> ProtocolResult:
    """Evaluate ``spec`` on ``dataset``; ``kernel`` reuses a precomputed GAK matrix."""
    if spec.nonstandard_stride:
        log.warning("frame stride %d is not one of the reference settings %s", spec.frame_stride, PAPER_STRIDES)
    plan = make_folds(dataset, spec.kind)
    check_fold_plan(plan, dataset)
    if kernel is None:
        kernel = compute_kernel(dataset, spec)
    elif sorted(kernel.sequence_ids) != sorted(dataset.sequence_ids):
        raise ValueError("kernel sequence ids do not match the dataset")
    pos = {s: i for i, s in enumerate(kernel.sequence_ids)}

    def index(ids):
        return np.array([pos[s] for s in ids], dtype=int)

    labels = np.empty(len(kernel.sequence_ids))
    for s in dataset:
        labels[pos[s.sequence_id]] = s.vas_label

    log.info("%s: %d folds", PROTOCOLS[spec.kind], len(plan))
    args = [(k, f, kernel.K, index, labels, spec) for k, f in enumerate(plan)]
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as ex:
            folds = list(ex.map(lambda a: _run_fold(*a), args))
    else:
        folds = [_run_fold(*a) for a in args]

    subject_of = {s.sequence_id: s.subject_id for s in dataset}
    ids, true, pred, base, fold_of = [], [], [], [], []
    for f in folds:
        ids.extend(f.test_ids)
        true.extend(labels[index(f.test_ids)])
        pred.extend(f.predictions)
        base.extend(f.baseline)
        fold_of.extend([f.fold] * len(f.test_ids))
    subj = [subject_of[s] for s in ids]
    report = PredictionReport(ids, true, pred, subj, fold_of)
    baseline = PredictionReport(ids, true, base, subj, fold_of)
    return ProtocolResult(spec, report, baseline, folds, kernel)


def permutation_control(dataset: Dataset, spec: ProtocolSpec, kernel=None, seed: int = 0) -> ProtocolResult:
    """Same protocol with labels shuffled across sequences (leakage sanity check)."""
    perm = np.random.default_rng(seed).permutation(len(dataset))
    shuffled = dataset.with_labels(dataset.labels[perm])
    return run_protocol(shuffled, spec, kernel)


# -- reports ------------------------------------------------------------------

def least_squares_line(true, predicted):
    """``(slope, intercept)`` of predicted against true, or ``None`` if degenerate."""
    x, y = np.asarray(true, float), np.asarray(predicted, float)
    if len(x) < 2 or np.ptp(x) == 0:
        return None
    xm, ym = x.mean(), y.mean()
    slope = np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2)
    return float(slope), float(ym - slope * xm)


def export_predictions(report: PredictionReport, stream=None) -> str:
    """Predicted-vs-true CSV, with the least-squares line as a comment header."""
    if len(report) == 0:
        raise ValueError("empty report")
    out = io.StringIO()
    line = least_squares_line(report.true, report.predicted)
    if line is None:
        out.write("# least_squares degenerate (fewer than 2 distinct true values)\n")
    else:
        out.write(f"# least_squares slope={line[0]!r} intercept={line[1]!r}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["sequence_id", "subject_id", "true_vas", "predicted_raw", "predicted_clipped", "fold"])
    subj = report.subject_ids or [""] * len(report)
    folds = report.folds or [""] * len(report)
    for row in zip(report.sequence_ids, subj, report.true, report.predicted, report.clipped, folds):
        sid, s, t, p, c, f = row
        w.writerow([sid, s, repr(float(t)), repr(float(p)), repr(float(c)), f])
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def summary_table(results) -> str:
    """Fixed-width table with columns Protocol, % of frames, MAE, RMSE."""
    rows = [r.summary_row() if isinstance(r, ProtocolResult) else r for r in results]
    lines = [f"{'Protocol':<40} {'% of frames':>11} {'MAE':>8} {'RMSE':>8}"]
    for r in rows:
        pct = f"{r['percent_frames']:g}%"
        lines.append(f"{r['protocol']:<40} {pct:>11} {r['mae']:>8.4f} {r['rmse']:>8.4f}")
    return "\n".join(lines) + "\n"
