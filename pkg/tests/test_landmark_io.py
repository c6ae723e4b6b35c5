import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gakpain.landmark_io import (
    Dataset,
    GeneratorConfig,
    LandmarkSequence,
    ParseError,
    downsample,
    generate_synthetic,
    load_dataset,
    parse_label_csv,
    parse_landmark_csv,
    read_keyvalue,
    serialize,
)

HEADER = "sequence_id,subject_id,frame_index,landmark_index,x,y\n"


def _rows(sid, subj, frames):
    out = []
    for f, frame in enumerate(frames):
        for k, (x, y) in enumerate(frame):
            out.append(f"{sid},{subj},{f},{k},{x},{y}\n")
    return out


def test_smallest_legal_input():
    frames = np.arange(12, dtype=float).reshape(2, 3, 2)
    ds = parse_landmark_csv(HEADER + "".join(_rows("a", "s", frames)), {"a": 0.0})
    assert len(ds) == 1
    assert ds[0].n_frames == 2 and ds[0].n == 3
    assert ds[0].vas_label == 0.0
    np.testing.assert_array_equal(ds[0].frames, frames)


def test_rows_in_any_order_are_sorted():
    frames = np.random.default_rng(0).standard_normal((4, 5, 2))
    rows = _rows("a", "s", frames)
    np.random.default_rng(1).shuffle(rows)
    ds = parse_landmark_csv((HEADER + "".join(rows)).encode(), {"a": 3.0})
    np.testing.assert_array_equal(ds[0].frames, frames)


def test_missing_landmark_names_frame():
    frames = np.zeros((7, 4, 2))
    rows = [r for r in _rows("a", "s", frames) if not r.startswith("a,s,5,2,")]
    with pytest.raises(ParseError, match="missing landmark") as exc:
        parse_landmark_csv(HEADER + "".join(rows), {"a": 1.0})
    assert exc.value.frame == 5
    assert "frame 5" in str(exc.value)


def test_inconsistent_landmark_count_across_sequences():
    text = HEADER + "".join(_rows("a", "s", np.zeros((2, 3, 2))) + _rows("b", "s", np.zeros((2, 4, 2))))
    with pytest.raises(ParseError, match="inconsistent"):
        parse_landmark_csv(text, {"a": 1.0, "b": 2.0})


def test_absent_label_is_an_error():
    with pytest.raises(ParseError, match="no VAS label"):
        parse_landmark_csv(HEADER + "".join(_rows("a", "s", np.zeros((2, 3, 2)))), {})


@pytest.mark.parametrize("vas", ["-0.5", "10.01", "abc"])
def test_bad_label_values(vas):
    with pytest.raises(ParseError):
        parse_label_csv(f"sequence_id,vas\na,{vas}\n")


def test_sequence_must_not_change_subject():
    text = HEADER + "a,s1,0,0,0,0\na,s2,0,1,0,0\n"
    with pytest.raises(ParseError, match="two subjects"):
        parse_landmark_csv(text, {"a": 1.0})


def test_sequence_invariants():
    with pytest.raises(ValueError):
        LandmarkSequence("a", "s", np.zeros((1, 3, 2)), 1.0)
    with pytest.raises(ValueError):
        LandmarkSequence("a", "s", np.zeros((2, 2, 2)), 1.0)
    with pytest.raises(ValueError):
        LandmarkSequence("a", "s", np.zeros((2, 3, 2)), 11.0)


def test_dataset_rejects_duplicate_ids():
    s = LandmarkSequence("a", "s", np.zeros((2, 3, 2)), 1.0)
    with pytest.raises(ValueError):
        Dataset((s, s), ("s",))


def test_synthetic_export_reparses_to_200_sequences(tmp_path):
    cfg = GeneratorConfig(subjects=25, seqs_per_subject=8, frames_min=4, frames_max=6, n=5, seed=1)
    ds = generate_synthetic(cfg)
    lm, lb = serialize(ds)
    (tmp_path / "lm.csv").write_text(lm)
    (tmp_path / "lb.csv").write_text(lb)
    back = load_dataset(tmp_path / "lm.csv", tmp_path / "lb.csv")
    assert len(back) == 200 and len(back.subjects) == 25
    assert back.sequence_ids == ds.sequence_ids
    for a, b in zip(ds, back):
        assert a == b


def test_downsample_examples():
    seq = LandmarkSequence("a", "s", np.arange(8 * 3 * 2, dtype=float).reshape(8, 3, 2), 1.0)
    np.testing.assert_array_equal(downsample(seq, 4).frames, seq.frames[[0, 4]])
    assert downsample(seq, 1) == seq
    seq9 = LandmarkSequence("a", "s", np.zeros((9, 3, 2)), 1.0)
    assert downsample(seq9, 4).n_frames == 3
    with pytest.raises(ValueError):
        downsample(seq, 8)
    with pytest.raises(ValueError):
        downsample(seq, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(1, 5), st.integers(1, 5))
def test_downsample_composes(n_frames, a, b):
    frames = np.arange(n_frames, dtype=float)[:, None, None] * np.ones((1, 3, 2))
    seq = LandmarkSequence("a", "s", frames, 1.0)
    if len(range(0, n_frames, a * b)) < 2:
        return
    twice = downsample(downsample(seq, a), b)
    once = downsample(seq, a * b)
    np.testing.assert_array_equal(twice.frames[:, 0, 0], once.frames[:, 0, 0])


def test_generator_is_deterministic():
    cfg = GeneratorConfig(subjects=4, seqs_per_subject=3, frames_min=10, frames_max=20, n=6, seed=7)
    assert serialize(generate_synthetic(cfg)) == serialize(generate_synthetic(cfg))
    assert serialize(generate_synthetic(cfg, seed=8)) != serialize(generate_synthetic(cfg))


def test_generator_counts_and_label_span():
    cfg = GeneratorConfig(subjects=25, seqs_per_subject=8, frames_min=5, frames_max=6, n=5, seed=7)
    ds = generate_synthetic(cfg)
    assert len(ds) == 200 and len(ds.subjects) == 25
    assert set(range(9)) <= set(ds.labels.astype(int))
    assert ds.labels.min() >= 0 and ds.labels.max() <= 10


def test_generator_uneven_subject_counts():
    cfg = GeneratorConfig(subjects=6, seqs_per_subject=5, seqs_jitter=3, frames_min=5, frames_max=6, n=5, seed=2)
    counts = [sum(s.subject_id == subj for s in generate_synthetic(cfg)) for subj in generate_synthetic(cfg).subjects]
    assert min(counts) >= 1 and len(set(counts)) > 1


@pytest.mark.parametrize("kw", [{"subjects": 0}, {"n": 2}, {"seqs_per_subject": 0}, {"frames_min": 1}])
def test_degenerate_generator_config(kw):
    with pytest.raises(ValueError):
        generate_synthetic(GeneratorConfig(**kw))


def test_generator_config_from_keyvalue_text():
    values = read_keyvalue("# comment\nsubjects = 3\nseqs_per_subject=2\nnoise_sigma = 0.5  # inline\n")
    cfg = GeneratorConfig.from_mapping(values)
    assert (cfg.subjects, cfg.seqs_per_subject, cfg.noise_sigma) == (3, 2, 0.5)
    with pytest.raises(ParseError):
        read_keyvalue("no equals sign")


def test_parse_from_binary_stream():
    frames = np.ones((2, 3, 2))
    stream = io.BytesIO((HEADER + "".join(_rows("a", "s", frames))).encode())
    assert parse_landmark_csv(stream, {"a": 2.0})[0].n == 3


def test_frames_are_read_only():
    seq = LandmarkSequence("a", "s", np.zeros((2, 3, 2)), 1.0)
    with pytest.raises(ValueError):
        seq.frames[0, 0, 0] = 1.0
