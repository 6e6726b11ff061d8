"""Multi-lead record and window-pair types used by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import RecordError

LEADS: tuple[str, ...] = (
    "I", "II", "III", "aVR", "aVL", "aVF",
    "V1", "V2", "V3", "V4", "V5", "V6",
)
N_LEADS = len(LEADS)
SUPERCLASSES: tuple[str, ...] = ("NORM", "MI", "CD", "HYP", "STTC")
ARTIFACT_KINDS: tuple[str, ...] = ("BW", "EMG", "EDA")


@dataclass(frozen=True)
class Lead:
    name: str
    index: int

    @classmethod
    def from_name(cls, name: str) -> "Lead":
        try:
            return cls(name, LEADS.index(name))
        except ValueError:
            raise RecordError("UNKNOWN_LEAD", f"unknown lead {name!r}") from None

    @classmethod
    def from_index(cls, index: int) -> "Lead":
        if not 0 <= index < N_LEADS:
            raise RecordError("UNKNOWN_LEAD", f"lead index {index} out of range")
        return cls(LEADS[index], index)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultiLeadRecord:
    """A 12 x N matrix of amplitudes in mV sampled at ``fs`` Hz.

    Build instances with :func:`make_record`, which validates and copies.
    The sample buffer is read-only.
    """

    samples: np.ndarray
    fs: float
    record_id: str
    superclass: Optional[str] = None

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n / self.fs

    def with_samples(self, samples: np.ndarray, fs: float | None = None) -> "MultiLeadRecord":
        """Validated copy carrying new samples (and optionally a new rate)."""
        return make_record(samples, self.fs if fs is None else fs, self.record_id, self.superclass)


def make_record(samples, fs: float, record_id: str, superclass: str | None = None) -> MultiLeadRecord:
    if not isinstance(samples, np.ndarray):
        rows = list(samples)
        if len(rows) != N_LEADS:
            raise RecordError("ROW_COUNT", f"expected {N_LEADS} rows, got {len(rows)}")
        if len({len(r) for r in rows}) > 1:
            raise RecordError("RAGGED", "rows have unequal lengths")
    a = np.array(samples, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != N_LEADS:
        rows = a.shape[0] if a.ndim >= 1 else 0
        raise RecordError("ROW_COUNT", f"expected {N_LEADS} rows, got {rows}")
    if a.shape[1] < 1:
        raise RecordError("RAGGED", "rows must hold at least one sample")
    if not np.all(np.isfinite(a)):
        raise RecordError("NON_FINITE", "samples contain NaN or Inf")
    if not (np.isfinite(fs) and fs > 0):
        raise RecordError("BAD_FS", f"sampling rate must be positive, got {fs}")
    if superclass is not None and superclass not in SUPERCLASSES:
        raise RecordError("UNKNOWN_CLASS", f"unknown superclass {superclass!r}")
    return MultiLeadRecord(_frozen(a), float(fs), str(record_id), superclass)


def split_windows(record: MultiLeadRecord, window_seconds: float) -> list[MultiLeadRecord]:
    """Cut consecutive non-overlapping windows; a short tail is dropped."""
    width = window_seconds * record.fs
    if abs(width - round(width)) > 1e-9 or round(width) < 1:
        raise RecordError("NON_INTEGER_WINDOW", f"{window_seconds} s at {record.fs} Hz is not a whole number of samples")
    width = int(round(width))
    if record.n < width:
        raise RecordError("TOO_SHORT", f"record has {record.n} samples, window needs {width}")
    return [
        make_record(
            record.samples[:, i * width:(i + 1) * width],
            record.fs,
            f"{record.record_id}_w{i}",
            record.superclass,
        )
        for i in range(record.n // width)
    ]


@dataclass(frozen=True, eq=False)
class WindowPair:
    """Aligned LR (50 Hz) / HR (500 Hz) windows.

    ``lr`` is what the model sees and may carry an artifact; ``lr_clean`` is
    the same window before corruption and is the denoising target.
    """

    lr: MultiLeadRecord
    hr: MultiLeadRecord
    superclass: Optional[str]
    source_record: str
    window_index: int
    corrupted: bool = False
    artifact_kind: Optional[str] = None
    lr_clean: Optional[MultiLeadRecord] = field(default=None)
    split: Optional[str] = None

    def __post_init__(self):
        if self.lr.n * 10 != self.hr.n:
            raise RecordError("PAIR_LENGTH", f"hr length {self.hr.n} is not 10 x lr length {self.lr.n}")
        if self.corrupted != (self.artifact_kind is not None):
            raise RecordError("PAIR_FLAGS", "artifact_kind must be set iff corrupted")
        if self.artifact_kind is not None and self.artifact_kind not in ARTIFACT_KINDS:
            raise RecordError("PAIR_FLAGS", f"unknown artifact kind {self.artifact_kind!r}")
        if self.lr_clean is None:
            object.__setattr__(self, "lr_clean", self.lr)

    @property
    def window_id(self) -> str:
        return f"{self.source_record}_w{self.window_index}"

    def clean(self) -> "WindowPair":
        """The uncorrupted version of this pair."""
        return replace(self, lr=self.lr_clean, corrupted=False, artifact_kind=None)

    def with_split(self, split: str) -> "WindowPair":
        return replace(self, split=split)
