"""Synthetic MIT-BIH-style records for tests and dry runs.

Beats are sums of Gaussian bumps (P, Q, R, S, T).  Supraventricular beats
arrive early with an altered P wave; ventricular beats arrive early with a
wide QRS, no P wave and an inverted T wave, followed by a compensatory pause.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .wfdb_ingest import write_record

# (amplitude mV, centre relative to R in s, width s)
TEMPLATES = {
    "N": [(0.15, -0.20, 0.025), (-0.12, -0.030, 0.008), (1.20, 0.0, 0.010),
          (-0.25, 0.030, 0.010), (0.30, 0.28, 0.045)],
    "S": [(-0.10, -0.16, 0.020), (-0.12, -0.030, 0.008), (1.10, 0.0, 0.010),
          (-0.25, 0.030, 0.010), (0.28, 0.26, 0.045)],
    "V": [(-0.30, -0.045, 0.020), (1.60, 0.0, 0.028), (-0.70, 0.070, 0.030),
          (-0.45, 0.34, 0.070)],
}
SYMBOLS = {"N": "N", "S": "A", "V": "V"}


def beat_waveform(kind: str, t: np.ndarray, scale: float = 1.0) -> np.ndarray:
    y = np.zeros_like(t)
    for amp, mu, sd in TEMPLATES[kind]:
        y += scale * amp * np.exp(-0.5 * ((t - mu) / sd) ** 2)
    return y


def synth_record(duration_s: float, rng: np.random.Generator, fs: int = 360, heart_rate: float | None = None,
                 p_s: float = 0.05, p_v: float = 0.08, p_f: float = 0.01,
                 noise_mv: float = 0.02) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """Lead-II signal in mV and its beat annotations."""
    n = int(duration_s * fs)
    hr = heart_rate if heart_rate is not None else rng.uniform(60, 90)
    rr0 = 60.0 / hr
    scale = rng.uniform(0.8, 1.2)
    x = np.zeros(n)
    beats = []
    t_r = rng.uniform(0.3, 0.8)
    last_kind = "N"
    while t_r < duration_s - 0.3:
        u = rng.random()
        kind = "V" if u < p_v else "S" if u < p_v + p_s else "N"
        if last_kind != "N":
            kind = "N"
        sym = SYMBOLS[kind]
        if kind == "N" and rng.random() < p_f:
            sym = "F"
        r = int(round(t_r * fs))
        lo, hi = max(r - int(0.5 * fs), 0), min(r + int(0.6 * fs), n)
        tt = (np.arange(lo, hi) - r) / fs
        x[lo:hi] += beat_waveform(kind, tt, scale)
        beats.append((r, sym))
        last_kind = kind
        nxt = rr0 * rng.normal(1.0, 0.03)
        u = rng.random()
        # the next beat is premature if ectopic; after an ectopic beat the pause is compensatory
        if u < p_v:
            nxt *= 0.7
        elif u < p_v + p_s:
            nxt *= 0.65
        if kind == "V":
            nxt = rr0 * 1.3
        t_r += nxt
    t = np.arange(n) / fs
    x += 0.15 * np.sin(2 * np.pi * rng.uniform(0.1, 0.3) * t + rng.uniform(0, 2 * np.pi))
    x += noise_mv * rng.standard_normal(n)
    return x, beats


def write_synthetic_record(root: str | Path, record_id: str, duration_s: float, rng: np.random.Generator,
                           lead_ii_channel: int = 0, **kwargs):
    lead, beats = synth_record(duration_s, rng, **kwargs)
    other = 0.6 * lead + 0.02 * rng.standard_normal(lead.size)
    gain, zero = 200.0, 1024
    dig = np.clip(np.round(np.stack([lead, other], axis=1) * gain + zero), -2048, 2047).astype(np.int64)
    names = ["MLII", "V1"]
    if lead_ii_channel == 1:
        dig, names = dig[:, ::-1], names[::-1]
    return write_record(root, record_id, dig, names, beats, gain=gain, adc_zero=zero)


def write_corpus(root: str | Path, record_ids: Iterable[str], duration_s: float = 60.0, seed: int = 0,
                 mlii_second: Iterable[str] = ("114",)) -> list[str]:
    """Write one synthetic record per id; ids in ``mlii_second`` carry MLII on channel 1."""
    rng = np.random.default_rng(seed)
    mlii_second = set(mlii_second)
    ids = sorted(record_ids)
    for rid in ids:
        write_synthetic_record(root, rid, duration_s, rng, lead_ii_channel=1 if rid in mlii_second else 0)
    return ids
