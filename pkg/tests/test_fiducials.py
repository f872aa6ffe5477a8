import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecggraph.fiducials import FiducialConfig, locate_fiducials, match_detections, pan_tompkins
from ecggraph.preprocess import remove_baseline
from ecggraph.synthetic import synth_record

FS = 360


def bump(n, centre, amp, width):
    t = np.arange(n)
    return amp * np.exp(-0.5 * ((t - centre) / width) ** 2)


def planted_segment():
    x = np.zeros(217)
    x += bump(217, 30, 0.15, 6)     # P
    x += bump(217, 75, -0.2, 2)     # Q
    x += bump(217, 86, 1.0, 3)      # R
    x += bump(217, 100, -0.3, 2.5)  # S
    x += bump(217, 150, 0.35, 12)   # T
    return x


# ---------------------------------------------------------------- locate_fiducials

def test_planted_extrema_recovered():
    f = locate_fiducials(planted_segment())
    assert f.offsets == (30, 75, 86, 100, 150)
    assert not f.degenerate
    x = planted_segment()
    assert (f.a_p, f.a_q, f.a_r, f.a_s, f.a_t) == (x[30], x[75], x[86], x[100], x[150])


def test_zero_segment_falls_back_to_window_edges():
    f = locate_fiducials(np.zeros(217))
    assert f.degenerate
    assert f.q == 86 - 18 and f.s == 86 + 28
    assert f.p == 86 - 72 and f.t == min(f.s + 108, 216)
    assert f.a_p == f.a_q == f.a_r == f.a_s == f.a_t == 0.0


def test_empty_window_after_clamping_is_degenerate():
    cfg = FiducialConfig(p_before_r=10, p_gap_before_q=12)  # P window ends before it starts
    f = locate_fiducials(planted_segment(), cfg)
    assert f.degenerate
    assert 0 <= f.p <= 216


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_offsets_invariant_to_affine_amplitude(c, k, seed):
    rng = np.random.default_rng(seed)
    x = planted_segment() + 0.01 * rng.standard_normal(217)
    base = locate_fiducials(x).offsets
    assert locate_fiducials(x * k).offsets == base
    assert locate_fiducials(x + c).offsets == base


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ordering_on_random_segments(seed):
    x = np.random.default_rng(seed).standard_normal(217)
    f = locate_fiducials(x)
    assert all(0 <= o <= 216 for o in f.offsets)
    if not f.degenerate:
        assert f.p < f.q < f.r == 86 < f.s < f.t


# ---------------------------------------------------------------- Pan-Tompkins

def test_flat_signal_has_no_detections():
    assert pan_tompkins(np.zeros(FS * 10)).size == 0


def test_short_signal_returns_empty():
    assert pan_tompkins(np.ones(20)).size == 0


def test_gaussian_pulse_train():
    n = FS * 60
    centres = np.arange(FS // 2, n, FS)
    x = sum(bump(n, c, 1.0, 4) for c in centres)
    det = pan_tompkins(x)
    assert abs(det.size - 60) <= 1
    for c in centres:
        assert np.min(np.abs(det - c)) <= 30


def test_refractory_never_violated(rng):
    x = rng.standard_normal(FS * 30)
    det = pan_tompkins(x)
    assert det.size == 0 or np.min(np.diff(det)) >= 72


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synthetic_ecg_detection_rate(seed):
    x, beats = synth_record(300, np.random.default_rng(seed), noise_mv=0.05)
    det = pan_tompkins(remove_baseline(x))
    ref = [b[0] for b in beats]
    assert match_detections(det, ref, 18) >= 0.95 * len(ref)
    assert np.min(np.diff(det)) >= 72


def test_match_detections_one_to_one():
    assert match_detections([100, 300], [95, 102, 500], 10) == 1
    assert match_detections([], [1, 2], 5) == 0
