"""Landmark sequence containers, CSV import/export, downsampling and a
synthetic dataset generator.

Landmark CSV layout (UTF-8, any row order)::

    sequence_id,subject_id,frame_index,landmark_index,x,y

Label CSV layout::

    sequence_id,vas

Frame and landmark indices are 0-based.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from typing import Mapping, TextIO

import numpy as np

LANDMARK_HEADER = ["sequence_id", "subject_id", "frame_index", "landmark_index", "x", "y"]
LABEL_HEADER = ["sequence_id", "vas"]
VAS_MIN, VAS_MAX = 0.0, 10.0


class ParseError(ValueError):
    """Malformed landmark or label input.

    ``sequence_id``/``frame`` locate the offending record when known.
    """

    def __init__(self, message, sequence_id=None, frame=None, line=None):
        where = []
        if sequence_id is not None:
            where.append(f"sequence {sequence_id!r}")
        if frame is not None:
            where.append(f"frame {frame}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.sequence_id = sequence_id
        self.frame = frame
        self.line = line


@dataclass(frozen=True)
class LandmarkSequence:
    """One video: ``frames`` has shape (frames, n, 2)."""

    sequence_id: str
    subject_id: str
    frames: np.ndarray
    vas_label: float

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[2] != 2:
            raise ValueError(f"frames must have shape (T, n, 2), got {frames.shape}")
        if frames.shape[0] < 2:
            raise ValueError(f"sequence {self.sequence_id!r} needs at least 2 frames")
        if frames.shape[1] < 3:
            raise ValueError(f"sequence {self.sequence_id!r} needs n >= 3 landmarks")
        if not VAS_MIN <= float(self.vas_label) <= VAS_MAX:
            raise ValueError(f"VAS label {self.vas_label} outside [0, 10]")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "vas_label", float(self.vas_label))

    @property
    def n(self) -> int:
        return self.frames.shape[1]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LandmarkSequence):
            return NotImplemented
        return (
            self.sequence_id == other.sequence_id
            and self.subject_id == other.subject_id
            and self.vas_label == other.vas_label
            and np.array_equal(self.frames, other.frames)
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    sequences: tuple[LandmarkSequence, ...]
    subjects: tuple[str, ...] = ()

    def __post_init__(self):
        seqs = tuple(self.sequences)
        ids = [s.sequence_id for s in seqs]
        if len(set(ids)) != len(ids):
            raise ValueError("sequence ids must be unique")
        subjects = tuple(self.subjects) or tuple(dict.fromkeys(s.subject_id for s in seqs))
        owned = {s.subject_id for s in seqs}
        missing = [s for s in owned if s not in subjects]
        if missing:
            raise ValueError(f"sequences reference unknown subjects {sorted(missing)}")
        empty = [s for s in subjects if s not in owned]
        if empty:
            raise ValueError(f"subjects without sequences: {empty}")
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "subjects", subjects)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    @property
    def sequence_ids(self) -> list[str]:
        return [s.sequence_id for s in self.sequences]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.vas_label for s in self.sequences])

    def with_labels(self, labels) -> "Dataset":
        """Copy of the dataset with labels replaced (same order)."""
        labels = list(labels)
        if len(labels) != len(self.sequences):
            raise ValueError("one label per sequence required")
        seqs = tuple(
            LandmarkSequence(s.sequence_id, s.subject_id, s.frames, float(v))
            for s, v in zip(self.sequences, labels)
        )
        return Dataset(seqs, self.subjects)


# -- CSV ----------------------------------------------------------------------

def _text(source) -> TextIO:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, io.BufferedIOBase) or (
        hasattr(source, "read") and "b" in getattr(source, "mode", "")
    ):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_label_csv(source) -> dict[str, float]:
    reader = csv.reader(_text(source))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != LABEL_HEADER:
        raise ParseError(f"label header must be {','.join(LABEL_HEADER)}", line=1)
    labels = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError("expected 2 columns", line=lineno)
        sid = row[0].strip()
        try:
            vas = float(row[1])
        except ValueError:
            raise ParseError(f"bad VAS value {row[1]!r}", sequence_id=sid, line=lineno) from None
        if not VAS_MIN <= vas <= VAS_MAX:
            raise ParseError(f"VAS {vas} outside [0, 10]", sequence_id=sid, line=lineno)
        if sid in labels:
            raise ParseError("duplicate label", sequence_id=sid, line=lineno)
        labels[sid] = vas
    return labels


def parse_landmark_csv(source, labels: Mapping[str, float] | None = None) -> Dataset:
    """Read a landmark CSV into a :class:`Dataset`.

    ``source`` may be bytes, a str of CSV text, or a (binary or text) file
    object. ``labels`` maps sequence id to VAS; a label CSV can be read with
    :func:`parse_label_csv`. Rows may come in any order.
    """
    reader = csv.reader(_text(source))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:6]] != LANDMARK_HEADER:
        raise ParseError(f"landmark header must be {','.join(LANDMARK_HEADER)}", line=1)

    points: dict[str, dict[int, dict[int, tuple[float, float]]]] = {}
    subject_of: dict[str, str] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 6:
            raise ParseError("expected 6 columns", line=lineno)
        sid, subj = row[0].strip(), row[1].strip()
        try:
            f, k = int(row[2]), int(row[3])
            x, y = float(row[4]), float(row[5])
        except ValueError as exc:
            raise ParseError(f"bad numeric field: {exc}", sequence_id=sid, line=lineno) from None
        if f < 0 or k < 0:
            raise ParseError("negative index", sequence_id=sid, frame=f, line=lineno)
        if subject_of.setdefault(sid, subj) != subj:
            raise ParseError("sequence assigned to two subjects", sequence_id=sid, line=lineno)
        frame = points.setdefault(sid, {}).setdefault(f, {})
        if k in frame:
            raise ParseError(f"duplicate landmark {k}", sequence_id=sid, frame=f, line=lineno)
        frame[k] = (x, y)

    labels = dict(labels or {})
    sequences = []
    for sid, frames in points.items():
        order = sorted(frames)
        if order != list(range(len(order))):
            gap = next(i for i, f in enumerate(order) if f != i)
            raise ParseError("missing frame", sequence_id=sid, frame=gap)
        n = max(len(fr) for fr in frames.values())
        arr = np.empty((len(order), n, 2))
        for f in order:
            fr = frames[f]
            if sorted(fr) != list(range(n)):
                if len(fr) < n:
                    raise ParseError(f"missing landmark ({len(fr)} of {n})", sequence_id=sid, frame=f)
                raise ParseError("landmark indices not contiguous", sequence_id=sid, frame=f)
            for k, xy in fr.items():
                arr[f, k] = xy
        if sid not in labels:
            raise ParseError("no VAS label", sequence_id=sid)
        try:
            sequences.append(LandmarkSequence(sid, subject_of[sid], arr, labels[sid]))
        except ValueError as exc:
            raise ParseError(str(exc), sequence_id=sid) from None
    ns = {s.n for s in sequences}
    if len(ns) > 1:
        raise ParseError(f"inconsistent landmark count across sequences: {sorted(ns)}")
    # sequences and subjects keep their order of first appearance in the file
    subjects = tuple(dict.fromkeys(s.subject_id for s in sequences))
    return Dataset(tuple(sequences), subjects)


def write_landmark_csv(dataset: Dataset, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LANDMARK_HEADER)
    for s in dataset:
        for f, frame in enumerate(s.frames):
            for k, (x, y) in enumerate(frame):
                w.writerow([s.sequence_id, s.subject_id, f, k, repr(float(x)), repr(float(y))])


def write_label_csv(dataset: Dataset, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LABEL_HEADER)
    for s in dataset:
        w.writerow([s.sequence_id, repr(s.vas_label)])


def load_dataset(landmark_path, label_path) -> Dataset:
    """Read both CSV files; parse errors are prefixed with the file path."""
    try:
        with open(label_path, newline="", encoding="utf-8") as fh:
            labels = parse_label_csv(fh)
    except ParseError as exc:
        raise _with_path(exc, label_path) from None
    try:
        with open(landmark_path, newline="", encoding="utf-8") as fh:
            return parse_landmark_csv(fh, labels)
    except ParseError as exc:
        raise _with_path(exc, landmark_path) from None


def _with_path(exc: ParseError, path) -> ParseError:
    err = ParseError(f"{path}: {exc}")
    err.sequence_id, err.frame, err.line = exc.sequence_id, exc.frame, exc.line
    return err


# -- downsampling -------------------------------------------------------------

def downsample(seq: LandmarkSequence, stride: int) -> LandmarkSequence:
    """Keep frames whose index is a multiple of ``stride``.

    ``stride=4`` keeps a quarter of the frames.
    """
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return seq
    kept = seq.frames[::stride]
    if kept.shape[0] < 2:
        raise ValueError(
            f"downsampling {seq.sequence_id!r} ({seq.n_frames} frames) by {stride} "
            "leaves fewer than 2 frames"
        )
    return LandmarkSequence(seq.sequence_id, seq.subject_id, kept, seq.vas_label)


# -- synthetic data -----------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic face-motion generator.

    Each subject gets a template face (an ellipse of landmarks with a
    per-subject deformation of scale ``shape_sigma``) and a rigid pose
    offset. Each sequence oscillates a fixed subset of "mouth/brow"
    landmarks with amplitude ``amplitude_per_vas * vas``, plus i.i.d.
    Gaussian noise of scale ``noise_sigma`` on every coordinate.
    """

    subjects: int = 25
    seqs_per_subject: int = 8
    frames_min: int = 60
    frames_max: int = 160
    n: int = 10
    noise_sigma: float = 0.05
    seed: int = 0
    shape_sigma: float = 0.1
    amplitude_per_vas: float = 0.1
    period_min: float = 24.0
    period_max: float = 40.0
    face_scale: float = 5.0
    random_phase: bool = True
    seqs_jitter: int = 0

    def validate(self):
        if self.subjects < 1:
            raise ValueError("subjects must be >= 1")
        if self.seqs_per_subject < 1:
            raise ValueError("seqs_per_subject must be >= 1")
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if not 2 <= self.frames_min <= self.frames_max:
            raise ValueError("need 2 <= frames_min <= frames_max")
        if self.noise_sigma < 0 or self.shape_sigma < 0:
            raise ValueError("noise scales must be >= 0")
        if not 0 < self.period_min <= self.period_max:
            raise ValueError("need 0 < period_min <= period_max")
        if not 0 <= self.seqs_jitter < self.seqs_per_subject:
            raise ValueError("seqs_jitter must be in [0, seqs_per_subject)")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "GeneratorConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown generator key {key!r}")
            t = types[key]
            if t == "bool":
                kwargs[key] = raw if isinstance(raw, bool) else str(raw).strip().lower() in ("1", "true", "yes")
            elif t == "int":
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


def read_keyvalue(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _template(n, scale):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([scale * np.cos(theta), 1.3 * scale * np.sin(theta)])


def generate_synthetic(config: GeneratorConfig, seed: int | None = None) -> Dataset:
    """Deterministic synthetic dataset whose motion amplitude encodes VAS.

    Labels are integers 0..10 assigned round-robin over a seeded
    permutation of all sequences, so every value appears once the dataset
    has at least 11 sequences.
    """
    config.validate()
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = config.n

    counts = np.full(config.subjects, config.seqs_per_subject)
    if config.seqs_jitter:
        counts = counts + rng.integers(-config.seqs_jitter, config.seqs_jitter + 1, config.subjects)
    total = int(counts.sum())
    labels = (np.arange(total) % 11)[rng.permutation(total)].astype(float)

    base = _template(n, config.face_scale)
    # landmarks driven by the label: every other point in the lower half
    moving = np.arange(n)[base[:, 1] < 0][::2]
    if moving.size == 0:
        moving = np.array([0])
    direction = np.zeros((n, 2))
    direction[moving, 1] = 1.0
    direction[moving, 0] = 0.3

    sequences = []
    k = 0
    width = len(str(config.subjects - 1))
    for s in range(config.subjects):
        subject_id = f"S{s:0{width}d}"
        shape = base + config.shape_sigma * rng.standard_normal((n, 2))
        angle = rng.uniform(-np.pi / 6, np.pi / 6)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        shift = rng.uniform(-50, 50, 2) + 200.0
        for q in range(counts[s]):
            vas = labels[k]
            k += 1
            T = int(rng.integers(config.frames_min, config.frames_max + 1))
            period = rng.uniform(config.period_min, config.period_max)
            phase = rng.uniform(0, 2 * np.pi) if config.random_phase else 0.0
            t = np.arange(T)
            wave = np.sin(2 * np.pi * t / period + phase)
            amp = config.amplitude_per_vas * vas
            frames = shape[None] + amp * wave[:, None, None] * direction[None]
            frames = frames @ rot.T + shift
            if config.noise_sigma:
                frames = frames + config.noise_sigma * rng.standard_normal(frames.shape)
            sequences.append(LandmarkSequence(f"{subject_id}_q{q:02d}", subject_id, frames, vas))
    return Dataset(tuple(sequences), tuple(dict.fromkeys(s.subject_id for s in sequences)))


def serialize(dataset: Dataset) -> tuple[str, str]:
    """Landmark CSV text and label CSV text for ``dataset``."""
    lm, lb = io.StringIO(), io.StringIO()
    write_landmark_csv(dataset, lm)
    write_label_csv(dataset, lb)
    return lm.getvalue(), lb.getvalue()
