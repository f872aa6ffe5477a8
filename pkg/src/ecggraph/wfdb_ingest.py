"""Reading MIT-BIH records: WFDB headers, format-212 signals, MIT annotations.

Only what the arrhythmia database needs is supported: two-signal records
stored in format 212 and annotation files in the MIT binary format.  The
inverse encoders are provided so synthetic records can be written in the
same layout.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

AAMI_CLASSES = ("N", "S", "V")

# beat annotation codes (WFDB ecgcodes.h); every other code is a non-beat label
BEAT_CODES = {
    1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A",
    9: "S", 10: "E", 11: "j", 12: "/", 13: "Q", 30: "n", 34: "e", 38: "f",
}
SYMBOL_CODES = {sym: code for code, sym in BEAT_CODES.items()}

AAMI_MAP = {
    "N": "N", "L": "N", "R": "N", "e": "N", "j": "N",
    "A": "S", "a": "S", "J": "S", "S": "S",
    "V": "V", "E": "V",
}

SKIP, NUM, SUB, CHN, AUX = 59, 60, 61, 62, 63

LEAD_II = "MLII"


class WfdbError(ValueError):
    """Malformed or unsupported WFDB input."""


class MissingRecordError(FileNotFoundError):
    pass


class DatasetError(RuntimeError):
    """Raised when one or more records of a split cannot be loaded."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__(f"{len(errors)} record(s) failed to load:\n" + "\n".join(errors))


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    storage_format: int
    gain: float
    adc_resolution: int
    adc_zero: int
    initial_value: int
    checksum: int
    block_size: int
    lead_name: str


@dataclass(frozen=True)
class RecordHeader:
    record_id: str
    n_signals: int
    sampling_rate: float
    n_samples: int
    signals: tuple[SignalSpec, ...]

    @property
    def lead_names(self) -> list[str]:
        return [s.lead_name for s in self.signals]


@dataclass(frozen=True)
class AnnotatedBeat:
    sample_index: int
    symbol: str

    @property
    def aami_class(self) -> str | None:
        return map_symbol(self.symbol)


@dataclass(frozen=True)
class EcgRecord:
    header: RecordHeader
    lead_ii: np.ndarray
    beats: tuple[AnnotatedBeat, ...]
    lead_index: int = 0

    @property
    def record_id(self) -> str:
        return self.header.record_id


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: frozenset[str]
    test_ids: frozenset[str]

    def __post_init__(self):
        if self.train_ids & self.test_ids:
            raise ValueError("train and test record sets overlap")

    @property
    def all_ids(self) -> frozenset[str]:
        return self.train_ids | self.test_ids


# inter-patient split of the 44 non-paced records
INTER_PATIENT_SPLIT = DatasetSplit(
    train_ids=frozenset("101 106 108 109 112 114 115 116 118 119 122 124 "
                        "201 203 205 207 208 209 215 220 223 230".split()),
    test_ids=frozenset("100 103 105 111 113 117 121 123 200 202 210 212 "
                       "213 214 219 221 222 228 231 232 233 234".split()),
)

MITBIH_RECORDS = frozenset(
    "100 101 102 103 104 105 106 107 108 109 111 112 113 114 115 116 117 118 "
    "119 121 122 123 124 200 201 202 203 205 207 208 209 210 212 213 214 215 "
    "217 219 220 221 222 223 228 230 231 232 233 234".split()
)


def map_symbol(symbol: str) -> str | None:
    """AAMI class of an annotation symbol, or None outside N/S/V."""
    return AAMI_MAP.get(symbol)


# ---------------------------------------------------------------- header

_NUM_PREFIX = re.compile(r"^[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?")


def _number(token: str, what: str, record_id: str) -> float:
    m = _NUM_PREFIX.match(token)
    if m is None:
        raise WfdbError(f"record {record_id}: non-numeric {what} field {token!r}")
    return float(m.group(0))


def parse_header(text: str) -> RecordHeader:
    """Parse the contents of a ``.hea`` file.

    Comment lines (``#``) and blank lines are ignored.  Gains written as
    ``200(0)/mV`` are accepted; any storage format other than 212 is rejected.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise WfdbError("empty header")
    rec = lines[0].split()
    record_id = rec[0].split("/")[0] if rec else "?"
    if len(rec) < 4:
        raise WfdbError(f"record {record_id}: record line needs 'ID nsig fs nsamples', got {lines[0]!r}")
    n_signals = int(_number(rec[1], "signal count", record_id))
    sampling_rate = _number(rec[2].split("/")[0], "sampling rate", record_id)
    n_samples = int(_number(rec[3], "sample count", record_id))

    sig_lines = lines[1:]
    if len(sig_lines) != n_signals:
        raise WfdbError(
            f"record {record_id}: header declares {n_signals} signals but has {len(sig_lines)} signal lines")

    signals = []
    for ln in sig_lines:
        tok = ln.split()
        if len(tok) < 9:
            raise WfdbError(f"record {record_id}: signal line has {len(tok)} fields, expected 9: {ln!r}")
        fmt = int(_number(tok[1].split("x")[0].split(":")[0], "format", record_id))
        if fmt != 212:
            raise WfdbError(f"record {record_id}: unsupported storage format {fmt}")
        signals.append(SignalSpec(
            file_name=tok[0],
            storage_format=fmt,
            gain=_number(tok[2], "gain", record_id),
            adc_resolution=int(_number(tok[3], "adc resolution", record_id)),
            adc_zero=int(_number(tok[4], "adc zero", record_id)),
            initial_value=int(_number(tok[5], "initial value", record_id)),
            checksum=int(_number(tok[6], "checksum", record_id)),
            block_size=int(_number(tok[7], "block size", record_id)),
            lead_name=tok[-1],
        ))
    return RecordHeader(record_id, n_signals, sampling_rate, n_samples, tuple(signals))


def format_header(header: RecordHeader) -> str:
    fs = int(header.sampling_rate) if float(header.sampling_rate).is_integer() else header.sampling_rate
    out = [f"{header.record_id} {header.n_signals} {fs} {header.n_samples}"]
    for s in header.signals:
        gain = int(s.gain) if float(s.gain).is_integer() else s.gain
        out.append(f"{s.file_name} {s.storage_format} {gain} {s.adc_resolution} {s.adc_zero} "
                   f"{s.initial_value} {s.checksum} {s.block_size} {s.lead_name}")
    return "\n".join(out) + "\n"


def select_lead_ii(header: RecordHeader) -> int:
    for i, name in enumerate(header.lead_names):
        if name == LEAD_II:
            return i
    raise WfdbError(f"record {header.record_id}: no {LEAD_II} channel (leads: {header.lead_names})")


# ---------------------------------------------------------------- format 212

def decode_format212(data: bytes, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Unpack two interleaved 12-bit two's-complement channels.

    Each 3-byte group holds one sample of each signal.
    """
    need = 3 * n_samples
    if len(data) < need:
        raise WfdbError(
            f"format 212 stream truncated at byte offset {len(data)}: "
            f"{n_samples} samples per signal need {need} bytes")
    b = np.frombuffer(data, dtype=np.uint8, count=need).reshape(-1, 3).astype(np.int16)
    s0 = ((b[:, 1] & 0x0F) << 8) | b[:, 0]
    s1 = ((b[:, 1] & 0xF0) << 4) | b[:, 2]
    s0 = np.where(s0 > 2047, s0 - 4096, s0)
    s1 = np.where(s1 > 2047, s1 - 4096, s1)
    return s0.astype(np.int16), s1.astype(np.int16)


def encode_format212(s0: Sequence[int], s1: Sequence[int]) -> bytes:
    s0 = np.asarray(s0, dtype=np.int64)
    s1 = np.asarray(s1, dtype=np.int64)
    if s0.shape != s1.shape:
        raise ValueError("channels must have equal length")
    lo, hi = -2048, 2047
    if s0.size and (s0.min() < lo or s0.max() > hi or s1.min() < lo or s1.max() > hi):
        raise ValueError("format 212 samples must lie in [-2048, 2047]")
    u0 = s0 & 0xFFF
    u1 = s1 & 0xFFF
    out = np.empty((s0.size, 3), dtype=np.uint8)
    out[:, 0] = u0 & 0xFF
    out[:, 1] = ((u0 >> 8) & 0x0F) | ((u1 >> 4) & 0xF0)
    out[:, 2] = u1 & 0xFF
    return out.tobytes()


def to_physical(digital, gain: float, adc_zero: float):
    """Convert ADC units to mV."""
    if gain == 0:
        raise ValueError("gain must be non-zero")
    return (np.asarray(digital, dtype=np.float64) - adc_zero) / gain


# ---------------------------------------------------------------- annotations

def parse_annotations(data: bytes) -> list[tuple[int, str]]:
    """Decode an MIT-format annotation stream into ``(sample, symbol)`` beats.

    Non-beat annotations advance the clock but are not returned.
    """
    out = []
    t = 0
    pos = 0
    n = len(data)
    while True:
        if pos + 2 > n:
            raise WfdbError(f"annotation stream ended at byte offset {pos} without terminator")
        word = data[pos] | (data[pos + 1] << 8)
        pos += 2
        code, interval = word >> 10, word & 0x3FF
        if code == 0 and interval == 0:
            break
        if code == SKIP:
            if pos + 4 > n:
                raise WfdbError(f"truncated SKIP at byte offset {pos}")
            hi = data[pos] | (data[pos + 1] << 8)
            lo = data[pos + 2] | (data[pos + 3] << 8)
            pos += 4
            skip = (hi << 16) | lo
            if skip >= 1 << 31:
                skip -= 1 << 32
            t += skip
        elif code in (NUM, SUB, CHN):
            pass
        elif code == AUX:
            pos += interval + (interval & 1)
            if pos > n:
                raise WfdbError(f"truncated AUX payload ending at byte offset {pos}")
        else:
            t += interval
            sym = BEAT_CODES.get(code)
            if sym is not None:
                out.append((t, sym))
    return out


def encode_annotations(samples: Sequence[int], symbols: Sequence[str]) -> bytes:
    """Encode beats as an MIT annotation stream, inserting SKIP words as needed."""
    buf = bytearray()
    prev = 0
    for s, sym in zip(samples, symbols):
        code = SYMBOL_CODES[sym]
        d = int(s) - prev
        if d < 0:
            raise ValueError("annotation samples must be non-decreasing")
        if d > 0x3FF:
            buf += (SKIP << 10).to_bytes(2, "little")
            v = d & 0xFFFFFFFF
            buf += (v >> 16).to_bytes(2, "little") + (v & 0xFFFF).to_bytes(2, "little")
            d = 0
        buf += ((code << 10) | d).to_bytes(2, "little")
        prev = int(s)
    buf += b"\x00\x00"
    return bytes(buf)


# ---------------------------------------------------------------- records

def _read(path: Path, record_id: str, mode: str = "rb"):
    if not path.exists():
        raise MissingRecordError(f"record {record_id}: missing file {path.name}")
    return path.read_bytes() if mode == "rb" else path.read_text()


def load_record(root: str | Path, record_id: str) -> EcgRecord:
    """Load lead II (in mV) and the beat annotations of one record."""
    root = Path(root)
    header = parse_header(_read(root / f"{record_id}.hea", record_id, "r"))
    lead = select_lead_ii(header)
    spec = header.signals[lead]
    if len(header.signals) != 2 or header.signals[0].file_name != header.signals[1].file_name:
        raise WfdbError(f"record {record_id}: expected two signals sharing one format-212 file")
    raw = _read(root / spec.file_name, record_id)
    try:
        channels = decode_format212(raw, header.n_samples)
    except WfdbError as e:
        raise WfdbError(f"record {record_id}: {e}") from None
    lead_ii = to_physical(channels[lead], spec.gain, spec.adc_zero)
    lead_ii.setflags(write=False)

    ann = parse_annotations(_read(root / f"{record_id}.atr", record_id))
    beats = tuple(AnnotatedBeat(s, sym) for s, sym in ann)
    idx = [b.sample_index for b in beats]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise WfdbError(f"record {record_id}: annotation samples not strictly increasing")
    if idx and (idx[0] < 0 or idx[-1] >= header.n_samples):
        raise WfdbError(f"record {record_id}: annotation outside [0, {header.n_samples})")
    return EcgRecord(header, lead_ii, beats, lead)


def load_records(root: str | Path, ids: Iterable[str]) -> list[EcgRecord]:
    records, errors = [], []
    for rid in sorted(ids):
        try:
            records.append(load_record(root, rid))
        except (WfdbError, MissingRecordError) as e:
            errors.append(str(e))
    if errors:
        raise DatasetError(errors)
    return records


def load_dataset(root: str | Path, split: DatasetSplit = INTER_PATIENT_SPLIT) -> tuple[list[EcgRecord], list[EcgRecord]]:
    """Load the train and test records of ``split``.

    All failures across both splits are collected before raising.
    """
    errors = []
    out = []
    for ids in (split.train_ids, split.test_ids):
        try:
            out.append(load_records(root, ids))
        except DatasetError as e:
            errors.extend(e.errors)
            out.append([])
    if errors:
        raise DatasetError(errors)
    return out[0], out[1]


def write_record(root: str | Path, record_id: str, digital: np.ndarray, lead_names: Sequence[str],
                 beats: Sequence[tuple[int, str]], fs: int = 360, gain: float = 200.0,
                 adc_zero: int = 1024) -> RecordHeader:
    """Write a two-signal format-212 record plus ``.atr`` annotations."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    digital = np.asarray(digital, dtype=np.int64)
    if digital.ndim != 2 or digital.shape[1] != 2:
        raise ValueError("digital must have shape (n_samples, 2)")
    fname = f"{record_id}.dat"
    (root / fname).write_bytes(encode_format212(digital[:, 0], digital[:, 1]))
    signals = []
    for ch in range(2):
        col = digital[:, ch]
        checksum = int(np.sum(col)) & 0xFFFF
        if checksum >= 1 << 15:
            checksum -= 1 << 16
        signals.append(SignalSpec(fname, 212, gain, 11, adc_zero, int(col[0]) if col.size else 0,
                                  checksum, 0, lead_names[ch]))
    header = RecordHeader(record_id, 2, fs, digital.shape[0], tuple(signals))
    (root / f"{record_id}.hea").write_text(format_header(header))
    samples = [b[0] for b in beats]
    symbols = [b[1] for b in beats]
    (root / f"{record_id}.atr").write_bytes(encode_annotations(samples, symbols))
    return header


def write_annotation_audit(path: str | Path, record: EcgRecord) -> None:
    """Per-record CSV of (sample_index, symbol, aami_class)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample_index", "symbol", "aami_class"])
        for b in record.beats:
            w.writerow([b.sample_index, b.symbol, b.aami_class or ""])
