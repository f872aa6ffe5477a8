"""Download the MIT-BIH Arrhythmia Database (records, headers, annotations).

Needs network access to physionet.org and the ``wfdb`` package
(``pip install -e .[data]``).

    python3 scripts/fetch_mitdb.py data/mitdb
    export ECG_DATA_DIR=data/mitdb
"""
import argparse
from pathlib import Path

import wfdb

from ecggraph.wfdb_ingest import MITBIH_RECORDS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dest", type=Path)
    args = parser.parse_args(argv)
    args.dest.mkdir(parents=True, exist_ok=True)
    wfdb.dl_database("mitdb", str(args.dest), records=sorted(MITBIH_RECORDS), annotators=["atr"])
    missing = [r for r in sorted(MITBIH_RECORDS) if not (args.dest / f"{r}.hea").exists()]
    if missing:
        print(f"missing after download: {missing}")
        return 1
    print(f"{len(MITBIH_RECORDS)} records in {args.dest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
