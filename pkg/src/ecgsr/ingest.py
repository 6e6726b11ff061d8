"""WFDB format-16 reader/writer, metadata index and train/validation split.

Only the subset of the WFDB header grammar used by PTB-XL is understood::

    <record> <n_signals> <fs> <n_samples>
    <file> 16 <gain>(<baseline>)/mV <adc_res> <adc_zero> <init> <checksum> <block> <lead>

Signal files hold little-endian int16 samples interleaved frame by frame.
"""

from __future__ import annotations

import ast
import csv
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DatasetError, WfdbError
from .signal import LEADS, N_LEADS, SUPERCLASSES, MultiLeadRecord, make_record

_GAIN_RE = re.compile(r"^(?P<gain>[-+0-9.eE]+)(?:\((?P<baseline>-?\d+)\))?(?:/(?P<units>\S+))?$")
_LEAD_LOOKUP = {name.upper(): i for i, name in enumerate(LEADS)}


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    format_code: int
    gain: float
    baseline: int
    lead_name: str
    units: str = "mV"
    adc_res: int = 16
    adc_zero: int = 0
    init_value: int = 0
    checksum: int = 0
    block_size: int = 0


@dataclass(frozen=True)
class WfdbHeader:
    record_name: str
    n_signals: int
    fs: float
    n_samples: int
    signals: tuple[SignalSpec, ...]


def parse_header(header_text: bytes | str) -> WfdbHeader:
    if isinstance(header_text, bytes):
        try:
            header_text = header_text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WfdbError("BAD_HEADER", "header is not UTF-8") from exc
    lines = [ln.strip() for ln in header_text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise WfdbError("BAD_HEADER", "empty header")
    head = lines[0].split()
    if len(head) < 4:
        raise WfdbError("BAD_HEADER", f"record line needs 4 fields: {lines[0]!r}")
    try:
        name = head[0].split("/")[0]
        n_signals = int(head[1])
        fs = float(head[2].split("/")[0])
        n_samples = int(head[3])
    except ValueError as exc:
        raise WfdbError("BAD_HEADER", f"malformed record line {lines[0]!r}") from exc
    if n_signals < 1 or fs <= 0 or n_samples < 0:
        raise WfdbError("BAD_HEADER", "non-positive signal count or rate")
    if len(lines) - 1 < n_signals:
        raise WfdbError("BAD_HEADER", f"expected {n_signals} signal lines, found {len(lines) - 1}")

    signals = []
    for ln in lines[1:1 + n_signals]:
        tok = ln.split()
        if len(tok) < 3:
            raise WfdbError("BAD_HEADER", f"malformed signal line {ln!r}")
        try:
            fmt = int(re.match(r"\d+", tok[1]).group(0))
        except (AttributeError, ValueError) as exc:
            raise WfdbError("BAD_HEADER", f"bad format field {tok[1]!r}") from exc
        if fmt != 16:
            raise WfdbError("UNSUPPORTED_FORMAT", f"format {fmt} (only 16 is supported)")
        m = _GAIN_RE.match(tok[2])
        if m is None:
            raise WfdbError("BAD_HEADER", f"bad gain field {tok[2]!r}")
        gain = float(m.group("gain"))
        if gain <= 0:
            raise WfdbError("BAD_HEADER", f"gain must be positive, got {gain}")
        ints = []
        for t in tok[3:8]:
            try:
                ints.append(int(t))
            except ValueError:
                break
        adc_res, adc_zero, init_value, checksum, block_size = (ints + [16, 0, 0, 0, 0][len(ints):])
        baseline = int(m.group("baseline")) if m.group("baseline") is not None else adc_zero
        lead = tok[3 + len(ints)] if len(tok) > 3 + len(ints) else f"sig{len(signals)}"
        signals.append(SignalSpec(
            tok[0], fmt, gain, baseline, lead, m.group("units") or "mV",
            adc_res, adc_zero, init_value, checksum, block_size,
        ))
    return WfdbHeader(name, n_signals, fs, n_samples, tuple(signals))


def _lead_order(header: WfdbHeader) -> list[int]:
    """Row permutation mapping header signal order onto canonical lead order."""
    if header.n_signals != N_LEADS:
        raise WfdbError("BAD_HEADER", f"expected {N_LEADS} signals, header declares {header.n_signals}")
    idx = [_LEAD_LOOKUP.get(s.lead_name.upper()) for s in header.signals]
    if None in idx or len(set(idx)) != N_LEADS:
        # unrecognised lead names: trust the file order
        return list(range(N_LEADS))
    order = [0] * N_LEADS
    for sig_pos, lead_pos in enumerate(idx):
        order[lead_pos] = sig_pos
    return order


def decode_raw(header: WfdbHeader, signal_bytes: bytes) -> np.ndarray:
    """Raw ADC samples as an (n_signals, n_samples) int16 array."""
    expected = 2 * header.n_signals * header.n_samples
    if len(signal_bytes) != expected:
        raise WfdbError("SIZE_MISMATCH", f"expected {expected} bytes, got {len(signal_bytes)}")
    frames = np.frombuffer(signal_bytes, dtype="<i2").reshape(header.n_samples, header.n_signals)
    return frames.T


def read_wfdb16(header_text: bytes | str, signal_bytes: bytes) -> MultiLeadRecord:
    header = parse_header(header_text)
    order = _lead_order(header)
    raw = decode_raw(header, signal_bytes).astype(np.float64)
    gain = np.array([s.gain for s in header.signals])[:, None]
    base = np.array([s.baseline for s in header.signals], dtype=np.float64)[:, None]
    mv = (raw - base) / gain
    return make_record(mv[order], header.fs, header.record_name)


def encode_wfdb16(record: MultiLeadRecord, header: WfdbHeader) -> bytes:
    """Quantise ``record`` with the gains/baselines of ``header``."""
    order = _lead_order(header)
    if record.n != header.n_samples:
        raise WfdbError("SIZE_MISMATCH", f"record has {record.n} samples, header {header.n_samples}")
    inv = np.argsort(order)
    rows = record.samples[inv]
    gain = np.array([s.gain for s in header.signals])[:, None]
    base = np.array([s.baseline for s in header.signals], dtype=np.float64)[:, None]
    raw = np.rint(rows * gain + base)
    if raw.min(initial=0) < -32768 or raw.max(initial=0) > 32767:
        raise WfdbError("OVERFLOW", "amplitudes exceed the int16 range at this gain")
    return raw.astype("<i2").T.tobytes()


def make_header(record_name: str, fs: float, n_samples: int, raw: np.ndarray | None = None,
                gain: float = 1000.0, baseline: int = 0, file_name: str | None = None) -> WfdbHeader:
    file_name = file_name or f"{record_name}.dat"
    sigs = []
    for i, lead in enumerate(LEADS):
        init = checksum = 0
        if raw is not None and raw.shape[1]:
            init = int(raw[i, 0])
            checksum = int(((int(raw[i].astype(np.int64).sum()) + 32768) % 65536) - 32768)
        sigs.append(SignalSpec(file_name, 16, gain, baseline, lead, "mV", 16, baseline, init, checksum, 0))
    return WfdbHeader(record_name, N_LEADS, fs, n_samples, tuple(sigs))


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def format_header(header: WfdbHeader) -> str:
    lines = [f"{header.record_name} {header.n_signals} {_fmt_number(header.fs)} {header.n_samples}"]
    for s in header.signals:
        lines.append(
            f"{s.file_name} {s.format_code} {_fmt_number(s.gain)}({s.baseline})/{s.units} "
            f"{s.adc_res} {s.adc_zero} {s.init_value} {s.checksum} {s.block_size} {s.lead_name}"
        )
    return "\n".join(lines) + "\n"


def write_wfdb16(record: MultiLeadRecord, base_path: str | Path, gain: float = 1000.0) -> Path:
    """Write ``<base_path>.hea`` and ``<base_path>.dat``; returns the header path."""
    base_path = Path(base_path)
    base_path.parent.mkdir(parents=True, exist_ok=True)
    name = base_path.name
    draft = make_header(name, record.fs, record.n, gain=gain)
    data = encode_wfdb16(record, draft)
    raw = np.frombuffer(data, dtype="<i2").reshape(record.n, N_LEADS).T
    header = make_header(name, record.fs, record.n, raw=raw, gain=gain)
    base_path.with_name(name + ".dat").write_bytes(data)
    hea = base_path.with_name(name + ".hea")
    hea.write_text(format_header(header))
    return hea


def read_wfdb16_files(base_path: str | Path) -> MultiLeadRecord:
    base_path = Path(base_path)
    hea = base_path.with_name(base_path.name + ".hea") if base_path.suffix != ".hea" else base_path
    try:
        text = hea.read_bytes()
    except OSError as exc:
        raise WfdbError("MISSING_FILE", f"cannot read {hea}") from exc
    header = parse_header(text)
    dat = hea.parent / header.signals[0].file_name
    try:
        data = dat.read_bytes()
    except OSError as exc:
        raise WfdbError("MISSING_FILE", f"cannot read {dat}") from exc
    return read_wfdb16(text, data)


# -- metadata ---------------------------------------------------------------

SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class IndexRow:
    record_id: str
    superclass: str
    path: str
    split: Optional[str] = None
    path_lr: Optional[str] = None
    path_hr: Optional[str] = None


@dataclass(frozen=True)
class DatasetIndex:
    rows: tuple[IndexRow, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.rows)

    def by_split(self, split: str) -> list[IndexRow]:
        return [r for r in self.rows if r.split == split]


REQUIRED_COLUMNS = ("record_id", "superclass", "path")


def read_metadata(csv_text: str) -> DatasetIndex:
    reader = csv.DictReader(io.StringIO(csv_text))
    cols = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in cols]
    if missing:
        raise DatasetError("BAD_COLUMNS", f"missing columns {missing}")
    rows = []
    for line in reader:
        cls = (line["superclass"] or "").strip()
        if cls not in SUPERCLASSES:
            raise DatasetError("UNKNOWN_CLASS", f"record {line['record_id']!r}: {cls!r}")
        rows.append(IndexRow(
            line["record_id"].strip(), cls, line["path"].strip(),
            path_lr=(line.get("path_lr") or None), path_hr=(line.get("path_hr") or None),
        ))
    return DatasetIndex(tuple(rows))


def format_metadata(index: DatasetIndex) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REQUIRED_COLUMNS)
    for r in index.rows:
        w.writerow([r.record_id, r.superclass, r.path])
    return buf.getvalue()


def assign_split(index: DatasetIndex, train_class: str, train_fraction: float, seed: int) -> DatasetIndex:
    """Seeded shuffle of ``train_class`` records into train/validation; the rest go to test."""
    if not 0 < train_fraction < 1:
        raise DatasetError("BAD_FRACTION", f"train_fraction must be in (0, 1), got {train_fraction}")
    members = [i for i, r in enumerate(index.rows) if r.superclass == train_class]
    if not members:
        raise DatasetError("EMPTY_CLASS", f"no records of class {train_class}")
    perm = np.random.default_rng(seed).permutation(len(members))
    n_train = int(np.floor(train_fraction * len(members) + 1e-9))
    split = {}
    for rank, j in enumerate(perm):
        split[members[j]] = "train" if rank < n_train else "validation"
    rows = tuple(replace(r, split=split.get(i, "test")) for i, r in enumerate(index.rows))
    return DatasetIndex(rows)


def ptbxl_metadata(database_csv: str, statements_csv: str) -> str:
    """``metadata.csv`` text for a PTB-XL checkout.

    Each record takes the diagnostic superclass of its most likely
    diagnostic SCP code; records without one are left out. Paths point at
    the 100 Hz and 500 Hz files shipped with the dataset.
    """
    classes = {}
    for row in csv.DictReader(io.StringIO(statements_csv)):
        code = row.get("") or row.get("scp_code") or next(iter(row.values()))
        if row.get("diagnostic") in ("1", "1.0") and row.get("diagnostic_class") in SUPERCLASSES:
            classes[code] = row["diagnostic_class"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((*REQUIRED_COLUMNS, "path_lr", "path_hr"))
    for row in csv.DictReader(io.StringIO(database_csv)):
        codes = ast.literal_eval(row["scp_codes"] or "{}")
        ranked = sorted((c for c in codes if c in classes), key=lambda c: -float(codes[c]))
        if not ranked:
            continue
        rid = str(int(float(row["ecg_id"])))
        w.writerow((rid, classes[ranked[0]], row["filename_hr"], row["filename_lr"], row["filename_hr"]))
    return buf.getvalue()
