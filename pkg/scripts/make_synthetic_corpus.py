"""Write synthetic stand-ins for the 44 split records in WFDB format.

The recordings are Gaussian-bump beats with premature S and V beats,
baseline wander and noise. They exercise every pipeline stage without
the real database; metrics on them say nothing about MIT-BIH.

    python3 scripts/make_synthetic_corpus.py synth --duration 300
    ecggraph run-all --data-dir synth --out-dir out_synth --epochs 50
"""
import argparse
from pathlib import Path

from ecggraph.synthetic import write_corpus
from ecggraph.wfdb_ingest import INTER_PATIENT_SPLIT


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dest", type=Path)
    parser.add_argument("--duration", type=float, default=300.0, help="seconds per record")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    ids = write_corpus(args.dest, sorted(INTER_PATIENT_SPLIT.all_ids), args.duration, args.seed)
    print(f"wrote {len(ids)} records to {args.dest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
