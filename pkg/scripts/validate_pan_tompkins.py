"""Score the QRS detector against reference beat annotations, per record.

    python3 scripts/validate_pan_tompkins.py --data-dir $ECG_DATA_DIR 100 101 103
"""
import argparse
import os

import numpy as np

from ecggraph.fiducials import match_detections, pan_tompkins
from ecggraph.wfdb_ingest import load_record


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("records", nargs="+")
    parser.add_argument("--data-dir", default=os.environ.get("ECG_DATA_DIR"))
    parser.add_argument("--tolerance-ms", type=float, default=50.0)
    args = parser.parse_args(argv)
    if not args.data_dir:
        parser.error("no data directory (use --data-dir or ECG_DATA_DIR)")
    print(f"{'record':>6} {'beats':>6} {'detected':>8} {'matched':>8} {'sens':>7} {'ppv':>7} {'min gap ms':>10}")
    for rid in args.records:
        rec = load_record(args.data_dir, rid)
        fs = rec.header.sampling_rate
        det = pan_tompkins(rec.lead_ii, fs)
        ref = [b.sample_index for b in rec.beats]
        hit = match_detections(det, ref, int(round(args.tolerance_ms * fs / 1000)))
        gap = np.min(np.diff(det)) * 1000 / fs if det.size > 1 else float("nan")
        print(f"{rid:>6} {len(ref):>6} {det.size:>8} {hit:>8} {100 * hit / max(len(ref), 1):>6.2f}% "
              f"{100 * hit / max(det.size, 1):>6.2f}% {gap:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
