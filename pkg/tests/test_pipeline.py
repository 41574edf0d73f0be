import numpy as np
import pytest

from activepoly import motion, phantom, pipeline
from activepoly.errors import ConfigError, UnprocessableFrameError
from activepoly.imaging import EchoSequence, Frame


@pytest.fixture(scope="module")
def frame0(frozen_echo):
    seq, truth = frozen_echo
    return seq, truth, pipeline.process_frame(seq[0], seq.landmarks)


def test_process_frame_matches_truth(frame0):
    seq, truth, res = frame0
    left, right = truth.centerlines[0]
    ok = []
    for wall, poly in ((left, res.aps.left), (right, res.aps.right)):
        ok.append(np.abs(poly(wall[:, 1]) - wall[:, 0]) <= 3.0)
    assert np.mean(np.concatenate(ok)) >= 0.95


def test_process_frame_area_and_segments(frame0):
    _, truth, res = frame0
    assert res.area == pytest.approx(truth.areas[0], rel=0.05)
    assert len(res.segments.segments) == 7
    segs, area, wall = res
    assert area == res.area and wall is res.wall_frame
    assert set(res.timing_ms) == set(pipeline.STAGES)


def test_painted_wall_is_bright(frame0):
    seq, _, res = frame0
    rows, xl, xr = pipeline.ridge.wall_columns(res.rps)
    mid = len(rows) // 2
    assert res.wall_frame.pixels[rows[mid], xl[mid]] == 200
    assert res.wall_frame.pixels[rows[mid], xl[mid] - 5] == 255


def test_uniform_frame_fails_at_ridge(frozen_echo):
    seq, _ = frozen_echo
    flat = Frame(np.full(seq[0].shape, 90, dtype=np.uint8))
    with pytest.raises(UnprocessableFrameError) as info:
        pipeline.process_frame(flat, seq.landmarks, frame_index=3)
    assert info.value.stage == "ridge" and info.value.frame_index == 3


def test_run_snake_crop_offset(frame0):
    seq, _, res = frame0
    cfg = pipeline.PipelineConfig()
    field, offset = pipeline.run_snake(res.wall_frame, res.rps, res.apex, cfg)
    assert field.shape[0] < seq.height and field.shape[1] < seq.width
    assert offset[0] > 0 and offset[1] > 0


def test_frozen_echo_report(frozen_report, frozen_echo):
    _, truth = frozen_echo
    d = frozen_report.diagnosis
    assert d.gate == "motion_analysis" and d.echo_label == motion.MI
    assert [v.segment_id for v in d.verdicts if v.label == motion.INFARCTED] == [2]
    assert d.lvef == pytest.approx(truth.true_lvef, abs=0.05)
    assert frozen_report.processed == 8 and frozen_report.ok
    # the peak of the contraction is frame 4
    for sid, t in frozen_report.max_frames().items():
        if sid != 2:
            assert abs(t - 4) <= 2
    assert len(frozen_report.frames) == 8


def test_report_dict(frozen_report):
    d = frozen_report.to_dict()
    assert d["schema"] == 1 and d["id"] == "frozen_seg2"
    assert [s["id"] for s in d["segments"]] == [1, 2, 3, 5, 6, 7]
    assert d["failures"] == [] and d["error"] is None
    table = frozen_report.curve_table()
    assert len(table) == 8 and table[0][1:] == [0.0] * 6


def test_weak_contraction_hits_low_gate():
    cfg = phantom.PhantomConfig(frames=4, contraction_amplitude=0.05)
    seq, _ = phantom.generate_phantom(cfg)
    d = pipeline.process_echo(seq).diagnosis
    assert d.gate == "lvef_low" and d.echo_label == motion.MI


def test_threads_do_not_change_report():
    seq, _ = phantom.generate_phantom(phantom.PhantomConfig(frames=4, noise_sigma=10,
                                                            contraction_amplitude=0.4))
    a = pipeline.process_echo(seq).to_dict()
    b = pipeline.process_echo(seq, n_jobs=2).to_dict()
    a.pop("timing_ms")
    b.pop("timing_ms")
    assert a == b


def test_failed_end_diastole_gives_no_diagnosis(frozen_echo):
    seq, _ = frozen_echo
    frames = (Frame(np.full(seq[0].shape, 90, dtype=np.uint8)),) + seq.frames[1:4]
    broken = EchoSequence(frames, seq.fps, seq.landmarks, "broken")
    rep = pipeline.process_echo(broken)
    assert rep.diagnosis is None and not rep.ok
    assert rep.failures[0][0] == "ridge"
    assert "end-diastolic" in rep.error
    assert rep.areas[0] is None and rep.areas[1] > 0


def test_config_round_trip_and_errors():
    cfg = pipeline.PipelineConfig(threshold=0.25, norm="L1")
    assert pipeline.PipelineConfig.from_dict(cfg.to_dict()) == cfg
    back = pipeline.PipelineConfig.from_dict({"chanvese": {"iterations": 50}})
    assert back.chanvese.iterations == 50 and back.chanvese.converge_window == 30
    for bad in ({"threshold": 1.5}, {"norm": "L7"}, {"lvef_low": 0.6}, {"pairing": [[1, 2]]},
                {"colour": 1}, {"lambda_rp": -1}):
        with pytest.raises(ConfigError):
            pipeline.PipelineConfig.from_dict(bad)
