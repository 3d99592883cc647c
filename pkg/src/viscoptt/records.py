"""Record text files and per-beat feature rows.

Record format::

    # fs=125 subject=s001
    time_s,ecg,ppg,sbp_ref,dbp_ref
    0,0.0123,0.51,121.5,78.2
    ...

Reference pressures are held constant over each beat (or vary per sample).
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import HeaderMismatch, MissingColumn, ParseError
from .signal import Channel, Waveform, validate_and_load

COLUMNS = ("time_s", "ecg", "ppg", "sbp_ref", "dbp_ref")
HEADER_RE = re.compile(r"^#\s*fs=(?P<fs>\S+)\s+subject=(?P<subject>\S+)\s*$")
TIME_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RecordFile:
    subject_id: str
    fs: float
    time_s: np.ndarray
    ecg: np.ndarray
    ppg: np.ndarray
    sbp_ref: np.ndarray
    dbp_ref: np.ndarray

    def __len__(self):
        return self.time_s.size

    def waveforms(self) -> tuple[Waveform, Waveform]:
        t0 = float(self.time_s[0])
        return (
            validate_and_load(self.ecg, self.fs, Channel.ECG, t0),
            validate_and_load(self.ppg, self.fs, Channel.PPG, t0),
        )


def ingest(path) -> RecordFile:
    """Parse and validate one record file; errors carry 1-based line numbers."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline()
        m = HEADER_RE.match(header.strip())
        if not m:
            raise HeaderMismatch(f"{path}: first line must be '# fs=<Hz> subject=<id>'")
        try:
            fs = float(m["fs"])
        except ValueError:
            raise HeaderMismatch(f"{path}: bad sampling rate {m['fs']!r}") from None
        if not math.isfinite(fs) or fs <= 0:
            raise HeaderMismatch(f"{path}: sampling rate must be positive")
        reader = csv.reader(fh)
        try:
            names = [c.strip() for c in next(reader)]
        except StopIteration:
            raise MissingColumn(COLUMNS[0]) from None
        for col in COLUMNS:
            if col not in names:
                raise MissingColumn(col)
        pos = [names.index(c) for c in COLUMNS]
        rows = []
        for lineno, row in enumerate(reader, start=3):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise ParseError(lineno, f"expected {len(names)} fields, got {len(row)}")
            try:
                vals = [float(row[p]) for p in pos]
            except ValueError:
                raise ParseError(lineno, "non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(lineno, "non-finite value")
            if rows:
                dt = vals[0] - rows[-1][0]
                if dt <= 0:
                    raise ParseError(lineno, "time column is not increasing")
                if abs(dt - 1.0 / fs) > TIME_TOL:
                    raise ParseError(lineno, f"time step {dt:.9g} s does not match fs={fs:g}")
            rows.append(vals)
    if len(rows) < 2:
        raise ParseError(3, "record needs at least 2 samples")
    data = np.array(rows, dtype=np.float64)
    return RecordFile(m["subject"], fs, *data.T)


def dump_record(path, subject_id: str, fs: float, ecg, ppg, sbp_ref, dbp_ref, t0: float = 0.0):
    """Write a record file; floats use 17 significant digits (lossless)."""
    ecg = np.asarray(ecg, dtype=np.float64)
    n = ecg.size
    t = t0 + np.arange(n) / fs
    cols = [t, ecg, np.asarray(ppg, float), np.asarray(sbp_ref, float), np.asarray(dbp_ref, float)]
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# fs={fs:.17g} subject={subject_id}\n")
        fh.write(",".join(COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ----------------------------------------------------------------------------
# beat rows

@dataclass(frozen=True)
class BeatRecord:
    subject: str
    beat_time: float
    ptt_s: float
    inv_ptt: float
    v_visco: float
    hr: float
    amp: float
    sbp_ref: float
    dbp_ref: float

    def features(self, names) -> list[float]:
        return [getattr(self, n) for n in names]


BEAT_FIELDS = tuple(f.name for f in fields(BeatRecord))


def feature_matrix(beats, names) -> np.ndarray:
    return np.array([b.features(names) for b in beats], dtype=np.float64).reshape(len(beats), len(names))


def write_beats(path, beats, split_labels=None):
    """beats.csv: one row per beat plus its train/test label."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BEAT_FIELDS + ("split",))
        for i, b in enumerate(beats):
            label = split_labels[i] if split_labels is not None else ""
            w.writerow([b.subject] + [repr(float(v)) for v in astuple(b)[1:]] + [label])


def read_beats(path) -> tuple[list[BeatRecord], list[str]]:
    beats, labels = [], []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            beats.append(BeatRecord(row["subject"], *(float(row[k]) for k in BEAT_FIELDS[1:])))
            labels.append(row.get("split", ""))
    return beats, labels
