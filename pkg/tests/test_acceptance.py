"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Criteria that need the MIT-BIH Arrhythmia Database read it from
``$ECG_DATA_DIR``; without it they fail with a "data unavailable" verdict.
Run with ``pytest tests/test_acceptance.py -v`` and read the
"acceptance criteria" section at the end of the output.
"""
import json
import time

import numpy as np
import pytest
import wfdb

from conftest import ACCEPTANCE, mitbih_dir
from test_model import finite_difference_check, scalar_grads, scalar_params, separable, two_step_reference

from ecggraph.cli import main
from ecggraph.features import fit_standardization, standardize
from ecggraph.fiducials import match_detections, pan_tompkins
from ecggraph.graph import build_graph_spec, pearson_matrix, threshold_adjacency
from ecggraph.model import AdamState, ModelConfig, adam_step, predict, train
from ecggraph.pipeline import PUBLISHED_ROWS, PipelineConfig, run_features, run_ingest
from ecggraph.preprocess import FilterSpec, design_fir_bandpass, filter_signal, remove_baseline
from ecggraph.wfdb_ingest import INTER_PATIENT_SPLIT, decode_format212, encode_format212, load_record

NO_DATA = "MIT-BIH data unavailable (set ECG_DATA_DIR to a directory with 100.hea/.dat/.atr)"


def verdict(n: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {n:>2} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE[n] = line
    print(line)
    if not ok:
        pytest.fail(line, pytrace=False)


def require_data(n: int, title: str):
    root = mitbih_dir()
    if root is None:
        verdict(n, title, False, NO_DATA)
    return root


# ---------------------------------------------------------------- 1


@pytest.mark.mitbih
def test_criterion_1_dataset_rows(tmp_path):
    title = "feature matrices within 1% of 50,557 / 49,273 rows, ingest+features < 5 min"
    root = require_data(1, title)
    cfg = PipelineConfig(data_dir=str(root), out_dir=str(tmp_path))
    t0 = time.perf_counter()
    run_ingest(cfg)
    summary = run_features(cfg)
    elapsed = time.perf_counter() - t0
    rows = summary["rows"]
    dev = {k: abs(rows[k] - PUBLISHED_ROWS[k]) / PUBLISHED_ROWS[k] for k in rows}
    ok = all(d <= 0.01 for d in dev.values()) and elapsed < 300
    verdict(1, title, ok, f"train={rows['train']} ({dev['train']:.2%}), test={rows['test']} "
                          f"({dev['test']:.2%}), {elapsed:.0f} s")


# ---------------------------------------------------------------- 2


@pytest.mark.mitbih
@pytest.mark.slow
def test_criterion_2_end_to_end_band(tmp_path):
    title = "default run-all: all six metrics >= 45%, N precision >= 94%, N recall >= 92%, < 30 min"
    root = require_data(2, title)
    t0 = time.perf_counter()
    code = main(["run-all", "--data-dir", str(root), "--out-dir", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    if code != 0:
        verdict(2, title, False, f"run-all exited with {code}")
    rep = json.loads((tmp_path / "report.json").read_text())
    p, r = rep["precision"], rep["recall"]
    ok = min(p + r) >= 45 and p[0] >= 94 and r[0] >= 92 and elapsed < 1800
    verdict(2, title, ok, "precision N/S/V " + "/".join(f"{v:.2f}" for v in p)
            + ", recall N/S/V " + "/".join(f"{v:.2f}" for v in r) + f", {elapsed / 60:.1f} min")


# ---------------------------------------------------------------- 3


def test_criterion_3_correlation_adjacency():
    rng = np.random.default_rng(3)
    worst_sym = worst_inv = 0.0
    ok = True
    for _ in range(50):
        n = int(rng.integers(2, 500))
        X = rng.standard_normal((n, 20)) @ rng.standard_normal((20, 20))
        X = X * rng.uniform(1e-3, 1e3, 20) + rng.uniform(-100, 100, 20)
        c = pearson_matrix(X)
        a = threshold_adjacency(c, 0.9)
        worst_sym = max(worst_sym, float(np.max(np.abs(c - c.T))))
        worst_inv = max(worst_inv, float(np.max(np.abs(
            pearson_matrix(standardize(X, fit_standardization(X))) - c))))
        ok &= bool(np.all(np.diag(c) == 1.0) and np.all((c >= -1) & (c <= 1)))
        ok &= bool(set(np.unique(a)) <= {0, 1} and np.array_equal(a, a.T) and np.all(np.diag(a) == 1))
        ok &= build_graph_spec(X).adjacency.tolist() == a.tolist()
    ok &= worst_sym <= 1e-12 and worst_inv <= 1e-10
    verdict(3, "Pearson/adjacency properties", ok,
            f"max asymmetry {worst_sym:.1e}, max standardization drift {worst_inv:.1e}")


# ---------------------------------------------------------------- 4


def test_criterion_4_gradient_oracle():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = max_abs = 0.0
    n_configs = 24
    for _ in range(n_configs):
        hg, hl, batch = (int(v) for v in rng.integers(1, 5, size=3))
        rel, err = finite_difference_check(rng, hg, hl, batch)
        worst, max_abs = max(worst, rel), max(max_abs, err)
    elapsed = time.perf_counter() - t0
    verdict(4, "analytic gradients vs central differences", worst <= 1e-4 and elapsed < 60,
            f"{n_configs} configs, worst relative error above the 1e-7 floor {worst:.1e}, "
            f"max absolute error {max_abs:.1e}, {elapsed:.1f} s")


# ---------------------------------------------------------------- 5


def test_criterion_5_adam_oracle():
    errs = []
    for theta, g1, g2 in [(0.5, 1.0, -1.0), (-1.2, 0.3, 2.5), (0.0, -7.0, -7.0), (3.0, 1e-3, 4.0)]:
        ref = two_step_reference(theta, g1, g2)
        p = scalar_params(theta)
        s = AdamState.zeros_like(p)
        p1, s = adam_step(p, scalar_grads(p, g1), s)
        p2, s = adam_step(p1, scalar_grads(p1, g2), s)
        errs += [abs(p1.b_out[0] - ref[0]), abs(p2.b_out[0] - ref[1])]
    # |step| = lr |g| / (|g| + eps), so it falls short of lr by at most lr eps / |g|
    excess = []
    for g in (1e-3, 0.7, -5.0, 1e4):
        p = scalar_params(0.0)
        q, _ = adam_step(p, scalar_grads(p, g), AdamState.zeros_like(p), lr=0.01)
        excess.append(abs(abs(q.b_out[0]) - 0.01) - 0.01 * 1e-8 / abs(g))
    ok = max(errs) <= 1e-12 and max(excess) <= 4 * np.spacing(0.01)
    verdict(5, "Adam one- and two-step recurrences, |first step| = lr", ok,
            f"max recurrence error {max(errs):.1e}, first-step deviation beyond lr*eps/|g| {max(excess):.1e}")


# ---------------------------------------------------------------- 6


@pytest.mark.mitbih
def test_criterion_6_pan_tompkins_record_100():
    title = "Pan-Tompkins on record 100: >= 95% beats within 50 ms, no detections within 200 ms"
    root = require_data(6, title)
    rec = load_record(root, "100")
    det = pan_tompkins(rec.lead_ii, rec.header.sampling_rate)
    ref = [b.sample_index for b in rec.beats]
    tol = int(round(0.050 * rec.header.sampling_rate))
    rate = match_detections(det, ref, tol) / len(ref)
    gap = int(np.min(np.diff(det))) if det.size > 1 else 10**9
    ok = rate >= 0.95 and gap >= int(round(0.2 * rec.header.sampling_rate))
    verdict(6, title, ok, f"{rate:.2%} of {len(ref)} beats matched, min spacing {gap} samples")


# ---------------------------------------------------------------- 7


def brute_filter(x, h):
    n, d = len(x), (len(h) - 1) // 2

    def reflect(j):
        return -j if j < 0 else (2 * (n - 1) - j if j > n - 1 else j)

    return np.array([sum(h[k] * x[reflect(i + d - k)] for k in range(len(h))) for i in range(n)])


def test_criterion_7_filter_properties():
    rng = np.random.default_rng(7)
    const_ok = all(np.all(remove_baseline(np.full(2000, c)) == 0) for c in (0.0, 1.0, -3.7, 1e3, 0.123456789))
    h = design_fir_bandpass(FilterSpec())
    sym_ok = bool(np.array_equal(h, h[::-1])) and h.size == 13
    worst = 0.0
    for n in (13, 50, 777):
        x = rng.standard_normal(n)
        worst = max(worst, float(np.max(np.abs(filter_signal(x, h) - brute_filter(x, h)))))
    ok = const_ok and sym_ok and worst <= 1e-10
    verdict(7, "filter properties", ok,
            f"constant->0 exact: {const_ok}, FIR symmetric: {sym_ok}, max |conv - brute| {worst:.1e}")


# ---------------------------------------------------------------- 8


@pytest.mark.mitbih
def test_criterion_8_format212_decoder(tmp_path):
    title = "format-212 decode vs reference reader on every record, round trip on 1e5 pairs"
    rng = np.random.default_rng(8)
    a = rng.integers(-2048, 2048, 100_000)
    b = rng.integers(-2048, 2048, 100_000)
    s0, s1 = decode_format212(encode_format212(a, b), a.size)
    roundtrip = bool(np.array_equal(s0, a) and np.array_equal(s1, b))

    root = mitbih_dir()
    if root is None:
        verdict(8, title, False, f"round trip {'ok' if roundtrip else 'BROKEN'}; reference comparison "
                                 f"on real records not run: {NO_DATA}")
    mismatched = []
    for rid in sorted(INTER_PATIENT_SPLIT.all_ids):
        ref = wfdb.rdrecord(str(root / rid), sampto=1000, physical=False).d_signal
        raw = (root / f"{rid}.dat").read_bytes()[:1500]
        d0, d1 = decode_format212(raw, 1000)
        if not (np.array_equal(d0, ref[:, 0]) and np.array_equal(d1, ref[:, 1])):
            mismatched.append(rid)
    ok = roundtrip and not mismatched
    verdict(8, title, ok, f"round trip {'ok' if roundtrip else 'BROKEN'}, "
                          f"{len(INTER_PATIENT_SPLIT.all_ids) - len(mismatched)}/{len(INTER_PATIENT_SPLIT.all_ids)} "
                          f"records match" + (f" (mismatch: {mismatched})" if mismatched else ""))


# ---------------------------------------------------------------- 9


@pytest.mark.slow
def test_criterion_9_determinism(synthetic_corpus, tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = main(["run-all", "--data-dir", str(synthetic_corpus), "--out-dir", str(out), "--seed", "11"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        report.pop("created")
        runs.append(((out / "checkpoint.json").read_text(), report))
    same_ckpt = runs[0][0] == runs[1][0]
    same_report = runs[0][1] == runs[1][1]
    verdict(9, "two seeded run-all invocations give identical checkpoint and report",
            same_ckpt and same_report,
            f"synthetic corpus, default config; checkpoint identical: {same_ckpt}, report identical: {same_report}")


# ---------------------------------------------------------------- 10


def test_criterion_10_synthetic_separable():
    X, y = separable(0, n=200)
    spec = build_graph_spec(X)
    res = train(X, y, spec, ModelConfig(epochs=100, seed=0))
    acc = float(np.mean(predict(res.params, spec, X) == y))
    verdict(10, "linearly separable 200-sample set, >= 99% training accuracy in 100 epochs", acc >= 0.99,
            f"accuracy {acc:.2%}")
