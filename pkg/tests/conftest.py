import os
from pathlib import Path

import numpy as np
import pytest

from ecggraph.wfdb_ingest import INTER_PATIENT_SPLIT
from ecggraph.synthetic import write_corpus

DATA = Path(__file__).parent / "data"


def mitbih_dir() -> Path | None:
    """MIT-BIH directory from $ECG_DATA_DIR, if it holds the database."""
    d = os.environ.get("ECG_DATA_DIR")
    if d and (Path(d) / "100.hea").exists():
        return Path(d)
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    """All 44 split records as short synthetic recordings."""
    root = tmp_path_factory.mktemp("synthetic_mitdb")
    write_corpus(root, INTER_PATIENT_SPLIT.all_ids, duration_s=40.0, seed=3)
    return root


# acceptance verdict lines, printed once at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
