"""Reconstruction quality measures: MSE, RMSE, SSIM, SNR and PSNR.

Inputs are ``12 x N`` arrays (prediction ``x``, reference ``y``). SNR and
PSNR follow the prediction-referenced forms: signal power and peak are
taken from ``x``. Zero residuals map to ``+inf``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MetricError

SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise MetricError("SHAPE_MISMATCH", f"{x.shape} vs {y.shape}")
    return x, y


def mse_metric(x, y) -> float:
    x, y = _pair(x, y)
    d = x - y
    return float(np.mean(d * d))


def rmse_metric(x, y) -> float:
    return math.sqrt(mse_metric(x, y))


def rmse_percent(x, y) -> float:
    """RMSE as a percentage of the reference's peak-to-peak range."""
    _, y2 = _pair(x, y)
    span = float(y2.max() - y2.min())
    if span == 0:
        raise MetricError("ZERO_RANGE", "reference is constant")
    return 100.0 * rmse_metric(x, y) / span


def ssim_metric(x, y, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all length-``window`` positions of every lead.

    Uniform window weights, population statistics; the dynamic range R is
    the peak-to-peak range of the reference lead.
    """
    x, y = _pair(x, y)
    if x.shape[1] < window:
        raise MetricError("TOO_SHORT", f"need at least {window} samples, got {x.shape[1]}")
    rng = y.max(axis=1) - y.min(axis=1)
    rng = np.where(rng > 0, rng, 1.0)[:, None]
    # SSIM is invariant to a common rescale when C1, C2 scale with R**2.
    # Each lead is brought to unit peak, then the luminance and the
    # contrast-structure factors are each scaled by their largest term, so
    # extreme magnitudes cannot under/overflow into 0/0 or inf/inf.
    peak = np.maximum(np.maximum(np.abs(x).max(axis=1, keepdims=True),
                                 np.abs(y).max(axis=1, keepdims=True)), rng)
    x, y, rng = x / peak, y / peak, rng / peak
    wx = sliding_window_view(x, window, axis=1)
    wy = sliding_window_view(y, window, axis=1)
    mx = wx.mean(axis=2)
    my = wy.mean(axis=2)
    lum = _scaled_ratio(mx, my, SSIM_K1 * rng)
    dx = wx - mx[..., None]
    dy = wy - my[..., None]
    b = np.maximum(np.maximum(np.abs(dx).max(axis=2), np.abs(dy).max(axis=2)), SSIM_K2 * rng)
    b = np.where(b > 0, b, 1.0)[..., None]
    dx, dy = dx / b, dy / b
    c2 = (SSIM_K2 * rng / b[..., 0]) ** 2
    den = (dx * dx).mean(axis=2) + (dy * dy).mean(axis=2) + c2
    # an exactly flat window with an underflowed C2 is the C-dominated limit, 1
    cs = np.where(den > 0, (2 * (dx * dy).mean(axis=2) + c2) / np.where(den > 0, den, 1.0), 1.0)
    s = lum * cs
    return float(s.mean())


def _scaled_ratio(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(2ab + c^2) / (a^2 + b^2 + c^2), evaluated in units of max(|a|, |b|, c)."""
    u = np.maximum(np.maximum(np.abs(a), np.abs(b)), c)
    zero = u == 0
    u = np.where(zero, 1.0, u)
    a, b, c = a / u, b / u, c / u
    return np.where(zero, 1.0, (2 * a * b + c * c) / np.where(zero, 1.0, a * a + b * b + c * c))


def snr_metric(x, y, convention: str = "prediction") -> float:
    """10 log10(sum x^2 / sum (x - y)^2); ``convention='reference'`` uses sum y^2."""
    if convention not in ("prediction", "reference"):
        raise MetricError("BAD_CONVENTION", convention)
    x, y = _pair(x, y)
    d = x - y
    noise = float(np.sum(d * d))
    sig = float(np.sum((x if convention == "prediction" else y) ** 2))
    if noise == 0:
        return math.inf
    if sig == 0:
        return -math.inf
    return 10.0 * math.log10(sig / noise)


def psnr_metric(x, y) -> float:
    x, y = _pair(x, y)
    m = mse_metric(x, y)
    if m == 0:
        return math.inf
    peak = float(x.max())
    if peak <= 0:
        raise MetricError("NONPOSITIVE_PEAK", f"max(x) = {peak}")
    return 20.0 * math.log10(peak) - 10.0 * math.log10(m)


CSV_COLUMNS = ("window_id", "superclass", "method", "condition", "mse", "rmse", "ssim", "snr_db", "psnr_db")


@dataclass(frozen=True)
class MetricRow:
    window_id: str
    superclass: Optional[str]
    method: str
    condition: str
    mse: float
    rmse: float
    ssim: float
    snr_db: float
    psnr_db: float

    def values(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("mse", "rmse", "ssim", "snr_db", "psnr_db")}


def metric_row(x, y, window_id: str, superclass: str | None, method: str, condition: str,
               snr_convention: str = "prediction") -> MetricRow:
    m = mse_metric(x, y)
    try:
        p = psnr_metric(x, y)
    except MetricError:
        p = math.nan
    return MetricRow(window_id, superclass, method, condition, m, math.sqrt(m),
                     ssim_metric(x, y), snr_metric(x, y, snr_convention), p)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[MetricRow]:
    out = []
    for d in csv.DictReader(io.StringIO(text)):
        out.append(MetricRow(
            d["window_id"], d["superclass"] or None, d["method"], d["condition"],
            *(float(d[c]) for c in CSV_COLUMNS[4:]),
        ))
    return out
