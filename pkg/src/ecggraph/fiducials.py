"""QRS detection (Pan-Tompkins) and single-point PQRST localization per beat."""
from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .preprocess import WINDOW_BEFORE, moving_average


@dataclass(frozen=True)
class FiducialConfig:
    """Search windows in samples at 360 Hz."""

    q_before_r: int = 18     # 50 ms
    s_after_r: int = 28      # ~78 ms
    t_after_s: int = 9       # 25 ms
    t_end_after_s: int = 108  # 300 ms
    p_before_r: int = 72     # 200 ms
    p_gap_before_q: int = 9  # 25 ms


@dataclass(frozen=True)
class Fiducials:
    p: int
    q: int
    r: int
    s: int
    t: int
    a_p: float
    a_q: float
    a_r: float
    a_s: float
    a_t: float
    degenerate: bool = False

    @property
    def offsets(self) -> tuple[int, int, int, int, int]:
        return self.p, self.q, self.r, self.s, self.t


def _extremum(x: np.ndarray, lo: int, hi: int, kind: str, fallback: str) -> tuple[int, bool]:
    """Index of the min/max of ``x[lo:hi+1]`` and whether the search degenerated.

    A window that is empty after clamping or completely flat yields its
    ``fallback`` boundary ("lo" or "hi").
    """
    n = x.size
    lo_c, hi_c = max(lo, 0), min(hi, n - 1)
    if lo_c > hi_c:
        edge = lo_c if fallback == "lo" else hi_c
        return int(min(max(edge, 0), n - 1)), True
    w = x[lo_c:hi_c + 1]
    if w.max() == w.min():
        return (lo_c if fallback == "lo" else hi_c), True
    i = int(np.argmin(w) if kind == "min" else np.argmax(w))
    return lo_c + i, False


def locate_fiducials(segment, config: FiducialConfig = FiducialConfig(), r: int = WINDOW_BEFORE) -> Fiducials:
    """Locate P, Q, S and T around the R peak at offset ``r``.

    Q and S are the minima just before and after R, T the maximum after S
    and P the maximum preceding Q.  Each search runs on the window left by
    the previous one, so ``p < q < r < s < t`` whenever no search degenerates.
    """
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    last = x.size - 1
    q, dq = _extremum(x, r - config.q_before_r, r - 1, "min", "lo")
    s, ds = _extremum(x, r + 1, r + config.s_after_r, "min", "hi")
    t, dt = _extremum(x, s + config.t_after_s, min(s + config.t_end_after_s, last), "max", "hi")
    p, dp = _extremum(x, r - config.p_before_r, q - config.p_gap_before_q, "max", "lo")
    return Fiducials(p, q, r, s, t, x[p], x[q], x[r], x[s], x[t], dq or ds or dt or dp)


def pan_tompkins(x, fs: float = 360.0) -> np.ndarray:
    """Detect QRS complexes and return R-peak sample indices.

    Bandpass 5-15 Hz, five-point derivative, squaring and 150 ms moving-window
    integration, followed by the adaptive signal/noise peak thresholds with a
    200 ms refractory period, T-wave rejection and search-back.  The
    filtering stages are zero-phase so indices need no delay correction.
    """
    x = np.asarray(x, dtype=np.float64)
    win = int(round(0.150 * fs))
    if x.size < max(win, 16):
        return np.empty(0, dtype=np.int64)
    refractory = int(round(0.200 * fs))
    t_wave_window = int(round(0.360 * fs))

    b, a = sps.butter(1, [5.0, 15.0], btype="bandpass", fs=fs)
    bp = sps.filtfilt(b, a, x)
    xp = np.pad(bp, 2, mode="edge")
    deriv = (2 * xp[3:-1] + xp[4:] - xp[:-4] - 2 * xp[1:-3]) * (fs / 8.0)
    mwi = moving_average(deriv ** 2, win)
    if not np.any(mwi > 0):
        return np.empty(0, dtype=np.int64)

    peaks, _ = sps.find_peaks(mwi)
    learn = mwi[: int(2 * fs)]
    spki = 0.25 * learn.max()
    npki = 0.5 * learn.mean()
    thr1 = npki + 0.25 * (spki - npki)

    def slope(p):
        lo = max(p - win, 0)
        return float(np.max(np.abs(deriv[lo:p + 1])))

    qrs: list[int] = []
    qrs_slope = 0.0
    rr = deque(maxlen=8)

    for p in peaks:
        val = mwi[p]
        # search back for a missed beat once 166% of the average RR has elapsed
        if qrs and len(rr) >= 2 and p - qrs[-1] > 1.66 * np.mean(rr):
            thr2 = 0.5 * thr1
            i0 = np.searchsorted(peaks, qrs[-1] + refractory)
            i1 = np.searchsorted(peaks, p - refractory, side="right")
            cand = peaks[i0:i1]
            cand = cand[mwi[cand] > thr2]
            if cand.size:
                c = int(cand[np.argmax(mwi[cand])])
                rr.append(c - qrs[-1])
                qrs.append(int(c))
                qrs_slope = slope(c)
                spki = 0.25 * mwi[c] + 0.75 * spki
                thr1 = npki + 0.25 * (spki - npki)

        if qrs and p - qrs[-1] < refractory:
            continue
        is_qrs = val > thr1
        if is_qrs and qrs and p - qrs[-1] < t_wave_window and slope(p) < 0.5 * qrs_slope:
            is_qrs = False
        if is_qrs:
            if qrs:
                rr.append(p - qrs[-1])
            qrs.append(int(p))
            qrs_slope = slope(p)
            spki = 0.125 * val + 0.875 * spki
        else:
            npki = 0.125 * val + 0.875 * npki
        thr1 = npki + 0.25 * (spki - npki)

    # move each integrator peak onto the dominant deflection of the bandpassed signal
    half = win // 2
    cand = set()
    for p in qrs:
        lo, hi = max(p - half, 0), min(p + half, x.size - 1)
        cand.add(lo + int(np.argmax(np.abs(bp[lo:hi + 1]))))
    # strongest first, so the refractory period holds on the final indices
    kept: list[int] = []
    for r in sorted(cand, key=lambda i: (-abs(bp[i]), i)):
        j = bisect.bisect_left(kept, r)
        if (j == 0 or r - kept[j - 1] >= refractory) and (j == len(kept) or kept[j] - r >= refractory):
            kept.insert(j, r)
    return np.asarray(kept, dtype=np.int64)


def match_detections(detected, reference, tolerance: int) -> int:
    """Number of reference beats with a detection within ``tolerance`` samples (one-to-one)."""
    detected = np.sort(np.asarray(detected))
    used = np.zeros(detected.size, dtype=bool)
    hits = 0
    for ref in np.asarray(reference):
        j = np.searchsorted(detected, ref)
        best = None
        for k in (j - 1, j):
            if 0 <= k < detected.size and not used[k] and abs(detected[k] - ref) <= tolerance:
                if best is None or abs(detected[k] - ref) < abs(detected[best] - ref):
                    best = k
        if best is not None:
            used[best] = True
            hits += 1
    return hits
