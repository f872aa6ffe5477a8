"""Baseline removal, FIR bandpass and fixed-window beat segmentation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

WINDOW_BEFORE = 86
WINDOW_AFTER = 130
SEGMENT_LENGTH = WINDOW_BEFORE + 1 + WINDOW_AFTER


@dataclass(frozen=True)
class FilterSpec:
    ma_window_1: int = 72
    ma_window_2: int = 216
    fir_order: int = 12
    low_hz: float = 0.5
    high_hz: float = 35.0
    sampling_rate: float = 360.0
    # "delay" shifts a single causal pass back by the group delay, "zero_phase" runs forward-backward
    phase: str = "delay"


@dataclass(frozen=True)
class BeatSegment:
    samples: np.ndarray
    record_id: str
    r_sample_index: int
    label: str
    beat_index: int
    r_offset: int = WINDOW_BEFORE


def moving_average(x, w: int) -> np.ndarray:
    """Centered moving average with reflect-padded edges.

    For even ``w`` the window of sample ``i`` is ``[i - w/2, i + w/2 - 1]``.
    """
    if w < 1:
        raise ValueError(f"window length must be >= 1, got {w}")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    if w == 1:
        return x.copy()
    left = w // 2
    right = w - 1 - left
    # offset by the first sample so constant inputs come back bit-exact
    ref = x[0]
    xp = np.pad(x - ref, (left, right), mode="reflect")
    c = np.concatenate(([0.0], np.cumsum(xp)))
    return (c[w:] - c[:-w]) / w + ref


def remove_baseline(x, w1: int = 72, w2: int = 216) -> np.ndarray:
    """Subtract the cascaded MA(w1) -> MA(w2) trend from ``x``.

    The second average runs on the time-reversed signal so that the
    half-sample offsets of two even windows cancel and linear trends are
    removed exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size <= w2:
        raise ValueError(f"signal of length {x.size} is too short for baseline window {w2}")
    baseline = moving_average(moving_average(x, w1)[::-1], w2)[::-1]
    return x - baseline


def design_fir_bandpass(spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Hamming-windowed sinc bandpass with ``fir_order + 1`` symmetric taps."""
    fs, lo, hi = spec.sampling_rate, spec.low_hz, spec.high_hz
    if not 0 < lo < hi < fs / 2:
        raise ValueError(f"band edges must satisfy 0 < {lo} < {hi} < {fs / 2}")
    if spec.fir_order < 2 or spec.fir_order % 2:
        raise ValueError("fir_order must be even and >= 2 for a type-I linear-phase filter")
    n = np.arange(spec.fir_order + 1) - spec.fir_order / 2

    def lowpass(fc):
        return 2 * fc / fs * np.sinc(2 * fc / fs * n)

    h = np.hamming(spec.fir_order + 1) * (lowpass(hi) - lowpass(lo))
    return 0.5 * (h + h[::-1])


def filter_signal(x, h, phase: str = "delay") -> np.ndarray:
    """Apply FIR ``h`` with reflect-padded edges; output is aligned with the input."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    if phase == "zero_phase":
        return filter_signal(filter_signal(x, h)[::-1], h)[::-1].copy()
    if phase != "delay":
        raise ValueError(f"unknown phase mode {phase!r}")
    d = (h.size - 1) // 2
    xp = np.pad(x, (d, h.size - 1 - d), mode="reflect")
    return np.convolve(xp, h, mode="valid")


def preprocess_signal(x, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    y = remove_baseline(x, spec.ma_window_1, spec.ma_window_2)
    return filter_signal(y, design_fir_bandpass(spec), spec.phase)


def segment_beats(x, r_positions: Sequence[int], labels: Sequence[str | None], record_id: str = "",
                  beat_indices: Sequence[int] | None = None) -> tuple[list[BeatSegment], int]:
    """Cut a 217-sample window around every labelled R position.

    Beats without a label or whose window leaves the signal are skipped.
    Returns the segments and the number of skipped beats.
    """
    x = np.asarray(x, dtype=np.float64)
    if beat_indices is None:
        beat_indices = range(len(r_positions))
    segments = []
    skipped = 0
    for r, lab, bi in zip(r_positions, labels, beat_indices):
        lo, hi = r - WINDOW_BEFORE, r + WINDOW_AFTER
        if lab is None or lo < 0 or hi >= x.size:
            skipped += 1
            continue
        seg = x[lo:hi + 1].copy()
        seg.setflags(write=False)
        segments.append(BeatSegment(seg, record_id, int(r), lab, int(bi)))
    return segments, skipped
