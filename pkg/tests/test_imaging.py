import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from activepoly.errors import IngestionError, ValidationError
from activepoly.imaging import (EchoSequence, Frame, Landmarks, load_sequence, read_frame,
                                smooth, write_frame, write_frames, write_landmarks)

LM = Landmarks(start=(20, 90), end=(80, 90), apex_seed=(50, 10))


def _frames(n, shape=(100, 120), seed=0):
    r = np.random.default_rng(seed)
    return [Frame(r.integers(0, 256, shape, dtype=np.uint8)) for _ in range(n)]


def test_frame_is_immutable_copy():
    src = np.zeros((4, 5), dtype=np.uint8)
    f = Frame(src)
    src[0, 0] = 9
    assert f.pixels[0, 0] == 0
    with pytest.raises(ValueError):
        f.pixels[0, 0] = 1
    assert (f.width, f.height) == (5, 4)


def test_frame_converts_and_rejects():
    assert Frame(np.full((2, 2), 3.6)).pixels[0, 0] == 4
    for bad in (np.zeros(5), np.zeros((0, 3)), np.full((2, 2), 300.0), np.full((2, 2), np.nan)):
        with pytest.raises(ValidationError):
            Frame(bad)


def test_landmark_checks():
    with pytest.raises(ValidationError):
        Landmarks(start=(80, 90), end=(20, 90), apex_seed=(50, 10))
    with pytest.raises(ValidationError):
        Landmarks(start=(20, 90), end=(80, 90), apex_seed=(50, 95))
    with pytest.raises(ValidationError):
        LM.check_bounds(60, 100)
    assert LM.base_y == 90
    assert LM.translated(3, -2).start == (23, 88)


def test_sequence_validation():
    frames = _frames(3)
    seq = EchoSequence(frames, 25, LM)
    assert len(seq) == 3 and seq.width == 120
    with pytest.raises(ValidationError):
        EchoSequence(frames[:1], 25, LM)
    with pytest.raises(ValidationError):
        EchoSequence(frames + _frames(1, (90, 120)), 25, LM)
    with pytest.raises(ValidationError):
        EchoSequence(frames, 0, LM)


def test_round_trip_23_frames(tmp_path):
    frames = _frames(23)
    write_frames(frames, tmp_path)
    write_landmarks(LM, 30.0, tmp_path / "landmarks.json")
    seq = load_sequence(tmp_path)
    assert len(seq) == 23
    assert all(a == b for a, b in zip(seq.frames, frames))
    assert seq.landmarks == LM and seq.fps == 30.0 and seq.id == tmp_path.name


def test_pgm_round_trip(tmp_path):
    f = _frames(1)[0]
    assert read_frame(write_frame(f, tmp_path / "a.pgm")) == f


def test_frames_load_in_lexicographic_order(tmp_path):
    frames = _frames(3)
    for name, f in zip(("b.png", "c.png", "a.png"), frames):
        write_frame(f, tmp_path / name)
    write_landmarks(LM, 25, tmp_path / "landmarks.json")
    seq = load_sequence(tmp_path)
    assert seq[0] == frames[2] and seq[1] == frames[0]


def test_empty_and_missing_directories(tmp_path):
    write_landmarks(LM, 25, tmp_path / "landmarks.json")
    with pytest.raises(IngestionError):
        load_sequence(tmp_path)
    with pytest.raises(IngestionError):
        load_sequence(tmp_path / "absent")


def test_bad_landmark_files(tmp_path):
    write_frames(_frames(2), tmp_path)
    path = tmp_path / "landmarks.json"
    path.write_text("{not json")
    with pytest.raises(IngestionError):
        load_sequence(tmp_path)
    path.write_text(json.dumps({"fps": 25, "start": [20, 90], "end": [80, 90]}))
    with pytest.raises(ValidationError):
        load_sequence(tmp_path)
    path.write_text(json.dumps({"fps": 25, "start": [80, 90], "end": [20, 90],
                                "apex_seed": [50, 10]}))
    with pytest.raises(ValidationError):
        load_sequence(tmp_path)


def test_rgb_frame_is_rejected(tmp_path):
    from PIL import Image
    Image.fromarray(np.zeros((10, 10, 3), dtype=np.uint8)).save(tmp_path / "rgb.png")
    with pytest.raises(IngestionError):
        read_frame(tmp_path / "rgb.png")


def test_smooth_identity_and_constant():
    f = _frames(1)[0]
    assert smooth(f, 0) is f
    const = Frame(np.full((30, 40), 77, dtype=np.uint8))
    assert smooth(const, 2.5) == const
    with pytest.raises(ValidationError):
        smooth(f, -1)


@given(sigma=st.floats(0.5, 4.0), seed=st.integers(0, 1000))
def test_smooth_roughly_preserves_mass(sigma, seed):
    f = _frames(1, (40, 50), seed)[0]
    out = smooth(f, sigma)
    # nearest-mode borders keep the mean up to rounding and edge effects
    assert abs(out.as_float().mean() - f.as_float().mean()) < 3.0
    assert out.as_float().std() <= f.as_float().std()
