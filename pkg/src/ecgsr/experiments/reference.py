"""Full-scale reference numbers for PTB-XL runs.

These come from a full-width model trained 20 epochs on PTB-XL. Desk-scale
synthetic runs are not expected to reach them; they exist so a full-scale
run can be checked against a declared band.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ReferenceTarget:
    metric: str
    value: float
    unit: str
    band: float | None = None  # relative tolerance; None means informational only
    scope: str = "all"

    def accepts(self, measured: float) -> bool:
        if self.band is None:
            raise ValueError(f"{self.metric} has no acceptance band")
        return abs(measured - self.value) <= self.band * abs(self.value)


REFERENCE_TARGETS: tuple[ReferenceTarget, ...] = (
    ReferenceTarget("snr_db", 12.20, "dB", band=0.5),
    ReferenceTarget("mse", 0.0044, "mV^2"),
    ReferenceTarget("rmse_percent", 4.86, "%"),
    ReferenceTarget("mse", 0.0081, "mV^2", scope="CD"),
    ReferenceTarget("mse", 0.0079, "mV^2", scope="HYP"),
    ReferenceTarget("mse", 0.0030, "mV^2", scope="NORM"),
    ReferenceTarget("mse", 0.0040, "mV^2", scope="MI"),
    ReferenceTarget("mse", 0.0034, "mV^2", scope="STTC"),
)


def target(metric: str, scope: str = "all") -> ReferenceTarget:
    for t in REFERENCE_TARGETS:
        if t.metric == metric and t.scope == scope:
            return t
    raise KeyError((metric, scope))
