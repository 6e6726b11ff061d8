"""Experiment reports: metric rows plus grouped aggregates, written as CSV + JSON."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .. import __version__
from ..metrics import MetricRow, rows_to_csv

METRICS = ("mse", "rmse", "ssim", "snr_db", "psnr_db")


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _stats(values: Sequence[float]) -> dict[str, float]:
    a = np.asarray(values, dtype=np.float64)
    finite = a[np.isfinite(a)]
    if len(finite) != len(a):
        # inf/nan entries make mean/std meaningless; report them explicitly
        return {"min": float(np.min(a)), "max": float(np.max(a)), "mean": float(np.mean(a)),
                "std": math.nan, "n_nonfinite": int(len(a) - len(finite))}
    return {"min": float(a.min()), "max": float(a.max()), "mean": float(a.mean()), "std": float(a.std())}


def aggregate(rows: Iterable[MetricRow], group_by: Sequence[str] = ("superclass",)) -> list[dict]:
    """min/max/mean/std of every metric per group (population std)."""
    def key(r: MetricRow):
        return tuple("" if getattr(r, k) is None else str(getattr(r, k)) for k in group_by)

    out = []
    for k, grp in groupby(sorted(rows, key=key), key=key):
        grp = list(grp)
        entry = {"group": dict(zip(group_by, k)), "n": len(grp)}
        for m in METRICS:
            entry[m] = _stats([getattr(r, m) for r in grp])
        out.append(entry)
    return out


@dataclass
class ExperimentReport:
    rows: list[MetricRow]
    group_by: tuple[str, ...] = ("superclass",)
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    outliers: list[dict] = field(default_factory=list)
    runtime: float = 0.0  # seconds; kept out of the serialised report so reruns stay byte-identical

    @property
    def aggregates(self) -> list[dict]:
        return aggregate(self.rows, self.group_by)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.config)

    def mean(self, metric: str = "mse", **where) -> float:
        vals = [getattr(r, metric) for r in self.rows if all(getattr(r, k) == v for k, v in where.items())]
        if not vals:
            raise KeyError(f"no rows match {where}")
        return float(np.mean(vals))

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def to_json(self) -> str:
        doc = {
            "version": __version__,
            "fingerprint": self.fingerprint,
            "config": self.config,
            "group_by": list(self.group_by),
            "aggregates": self.aggregates,
            "outliers": self.outliers,
            "notes": self.notes,
        }
        return json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        c, j = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
        c.write_text(self.to_csv())
        j.write_text(self.to_json())
        return c, j

    def merged(self, other: "ExperimentReport") -> "ExperimentReport":
        return ExperimentReport(self.rows + other.rows, self.group_by, self.config,
                                self.notes + [n for n in other.notes if n not in self.notes],
                                self.outliers + other.outliers, self.runtime + other.runtime)
