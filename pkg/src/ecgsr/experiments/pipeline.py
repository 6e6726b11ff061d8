"""Record -> window-pair preprocessing, plus on-disk pair sets."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .. import dsp
from ..errors import DatasetError, ExperimentError
from ..ingest import (
    DatasetIndex,
    IndexRow,
    assign_split,
    format_metadata,
    read_metadata,
    read_wfdb16_files,
    write_wfdb16,
)
from ..signal import SUPERCLASSES, MultiLeadRecord, WindowPair, make_record, split_windows
from ..synth import CorruptionPolicy, corrupt, synth_record_pair

SOURCES = ("synthetic", "wfdb-dir")


@dataclass(frozen=True)
class PipelineConfig:
    source: str = "synthetic"
    data_dir: Optional[str] = None
    n_records: int = 100
    record_seconds: float = 10.0
    synth_classes: tuple[str, ...] = SUPERCLASSES
    synth_seed: int = 0
    window_seconds: float = 5.0
    source_lr_fs: float = 100.0
    lr_fs: float = 50.0
    hr_fs: float = 500.0
    lr_highpass_hz: float = 0.05
    hr_band_hz: tuple[float, float] = (0.05, 150.0)
    corrupt_probability: float = 0.5
    kind_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    corruption_seed: int = 0
    train_class: str = "MI"
    train_fraction: float = 0.9
    split_seed: int = 0
    out_dir: Optional[str] = None

    def validate(self) -> None:
        if self.source not in SOURCES:
            raise ExperimentError("BAD_CONFIG", f"source must be one of {SOURCES}")
        if self.hr_fs != 10 * self.lr_fs:
            raise ExperimentError("BAD_CONFIG", "hr_fs must be exactly 10 x lr_fs")
        ratio = self.source_lr_fs / self.lr_fs
        if ratio != int(ratio) or ratio < 1:
            raise ExperimentError("BAD_CONFIG", "source_lr_fs must be an integer multiple of lr_fs")
        for c in self.synth_classes:
            if c not in SUPERCLASSES:
                raise ExperimentError("BAD_CONFIG", f"unknown superclass {c!r}")

    @property
    def policy(self) -> CorruptionPolicy:
        return CorruptionPolicy(self.corrupt_probability, tuple(self.kind_weights), self.corruption_seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["synth_classes"] = list(self.synth_classes)
        d["hr_band_hz"] = list(self.hr_band_hz)
        d["kind_weights"] = list(self.kind_weights)
        return d


# -- sources ----------------------------------------------------------------

def synthetic_index(config: PipelineConfig) -> DatasetIndex:
    """Record ids and superclasses for the synthetic source, cycling through ``synth_classes``."""
    classes = config.synth_classes
    rows = tuple(IndexRow(f"syn{i:05d}", classes[i % len(classes)], f"records/syn{i:05d}")
                 for i in range(config.n_records))
    return DatasetIndex(rows)


def _record_seed(config: PipelineConfig, i: int) -> int:
    return config.synth_seed * 1_000_003 + i


def write_synthetic_dataset(config: PipelineConfig, out_dir: str | Path) -> DatasetIndex:
    """Write ``<id>_lr``/``<id>_hr`` WFDB pairs under ``records/`` plus ``metadata.csv``."""
    out_dir = Path(out_dir)
    (out_dir / "records").mkdir(parents=True, exist_ok=True)
    index = synthetic_index(config)
    for i, row in enumerate(index.rows):
        lr, hr = synth_record_pair(row.record_id, row.superclass, _record_seed(config, i),
                                   config.record_seconds, config.source_lr_fs, config.hr_fs)
        write_wfdb16(lr, out_dir / f"{row.path}_lr")
        write_wfdb16(hr, out_dir / f"{row.path}_hr")
    (out_dir / "metadata.csv").write_text(format_metadata(index))
    return index


def _iter_source(config: PipelineConfig, index: DatasetIndex) -> Iterator[tuple[IndexRow, MultiLeadRecord, MultiLeadRecord]]:
    if config.source == "synthetic":
        for i, row in enumerate(index.rows):
            lr, hr = synth_record_pair(row.record_id, row.superclass, _record_seed(config, i),
                                       config.record_seconds, config.source_lr_fs, config.hr_fs)
            yield row, lr, hr
        return
    base = Path(config.data_dir)
    for row in index.rows:
        lr = read_wfdb16_files(base / (row.path_lr or f"{row.path}_lr"))
        hr = read_wfdb16_files(base / (row.path_hr or f"{row.path}_hr"))
        yield row, make_record(lr.samples, lr.fs, row.record_id, row.superclass), \
            make_record(hr.samples, hr.fs, row.record_id, row.superclass)


def load_index(config: PipelineConfig) -> DatasetIndex:
    if config.source == "synthetic":
        index = synthetic_index(config)
    else:
        if not config.data_dir:
            raise ExperimentError("SOURCE_EMPTY", "wfdb-dir source needs data_dir")
        meta = Path(config.data_dir) / "metadata.csv"
        if not meta.is_file():
            raise ExperimentError("SOURCE_EMPTY", f"{meta} not found")
        index = read_metadata(meta.read_text())
    if len(index) == 0:
        raise ExperimentError("SOURCE_EMPTY", "no records in source")
    return assign_split(index, config.train_class, config.train_fraction, config.split_seed)


# -- the pipeline -----------------------------------------------------------

def record_to_pairs(row: IndexRow, lr: MultiLeadRecord, hr: MultiLeadRecord, config: PipelineConfig) -> list[WindowPair]:
    if lr.fs != config.source_lr_fs or hr.fs != config.hr_fs:
        raise ExperimentError("FS_MISMATCH", f"{row.record_id}: got {lr.fs}/{hr.fs} Hz, "
                                             f"expected {config.source_lr_fs}/{config.hr_fs} Hz")
    hr = dsp.iir_filter(hr, dsp.bandpass(hr.fs, *config.hr_band_hz))
    lr = dsp.iir_filter(lr, dsp.highpass(lr.fs, config.lr_highpass_hz))
    lr_w = split_windows(lr, config.window_seconds)
    hr_w = split_windows(hr, config.window_seconds)
    if len(lr_w) != len(hr_w):
        raise ExperimentError("FS_MISMATCH", f"{row.record_id}: LR and HR durations differ")
    factor = int(config.source_lr_fs / config.lr_fs)
    policy = config.policy
    out = []
    for k, (a, b) in enumerate(zip(lr_w, hr_w)):
        if factor > 1:
            a = dsp.decimate(a, factor)
        pair = WindowPair(a, b, row.superclass, row.record_id, k, split=row.split)
        out.append(corrupt(pair, policy))
    return out


def run_preprocessing(config: PipelineConfig) -> list[WindowPair]:
    """Filter, window, decimate and corrupt every record of the configured source."""
    config.validate()
    index = load_index(config)
    pairs: list[WindowPair] = []
    for row, lr, hr in _iter_source(config, index):
        pairs.extend(record_to_pairs(row, lr, hr, config))
    if not pairs:
        raise ExperimentError("SOURCE_EMPTY", "source produced no windows")
    return pairs


def select(pairs: Sequence[WindowPair], split: str | None = None, superclass: str | None = None) -> list[WindowPair]:
    return [p for p in pairs if (split is None or p.split == split)
            and (superclass is None or p.superclass == superclass)]


# -- pair sets on disk ------------------------------------------------------
# Plain .npy arrays plus a CSV manifest: np.savez embeds zip timestamps,
# which would break byte-identical reruns.

PAIR_COLUMNS = ("source_record", "window_index", "superclass", "split", "corrupted", "artifact_kind",
                "lr_fs", "hr_fs")


def save_pairs(pairs: Sequence[WindowPair], out_dir: str | Path) -> Path:
    if not pairs:
        raise ExperimentError("EMPTY_SET", "no pairs to save")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / "lr.npy", np.stack([p.lr.samples for p in pairs]))
    np.save(out_dir / "lr_clean.npy", np.stack([p.lr_clean.samples for p in pairs]))
    np.save(out_dir / "hr.npy", np.stack([p.hr.samples for p in pairs]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAIR_COLUMNS)
    for p in pairs:
        w.writerow([p.source_record, p.window_index, p.superclass or "", p.split or "",
                    int(p.corrupted), p.artifact_kind or "", repr(p.lr.fs), repr(p.hr.fs)])
    (out_dir / "pairs.csv").write_text(buf.getvalue())
    return out_dir


def load_pairs(in_dir: str | Path) -> list[WindowPair]:
    in_dir = Path(in_dir)
    try:
        lr = np.load(in_dir / "lr.npy")
        lr_clean = np.load(in_dir / "lr_clean.npy")
        hr = np.load(in_dir / "hr.npy")
        rows = list(csv.DictReader(io.StringIO((in_dir / "pairs.csv").read_text())))
    except FileNotFoundError as exc:
        raise DatasetError("MISSING_FILE", str(exc)) from exc
    if not len(rows) == len(lr) == len(lr_clean) == len(hr):
        raise DatasetError("SIZE_MISMATCH", f"{in_dir}: array and manifest lengths differ")
    out = []
    for i, r in enumerate(rows):
        cls = r["superclass"] or None
        wid = f"{r['source_record']}_w{r['window_index']}"
        lr_fs, hr_fs = float(r["lr_fs"]), float(r["hr_fs"])
        out.append(WindowPair(
            make_record(lr[i], lr_fs, wid, cls), make_record(hr[i], hr_fs, wid, cls), cls,
            r["source_record"], int(r["window_index"]), bool(int(r["corrupted"])),
            r["artifact_kind"] or None, make_record(lr_clean[i], lr_fs, wid, cls), r["split"] or None,
        ))
    return out
