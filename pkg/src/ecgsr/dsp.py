"""Classical DSP: zero-phase Butterworth filtering, decimation and the
non-learned upsampling / denoising baselines.

All operations act on every lead independently and return new records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pywt
from scipy import interpolate
from scipy import signal as sps

from .errors import FilterError
from .signal import MultiLeadRecord

DEFAULT_ORDER = 4
DECIMATE_PASSBAND = 0.8


@dataclass(frozen=True)
class IirFilterSpec:
    kind: str  # "highpass" | "lowpass" | "bandpass"
    cutoffs: tuple[float, ...]
    fs: float
    order: int = DEFAULT_ORDER

    def validate(self, fs: float | None = None) -> None:
        fs = self.fs if fs is None else fs
        if fs != self.fs:
            raise FilterError("BAD_SPEC", f"spec designed for {self.fs} Hz, record is {fs} Hz")
        if self.order < 1:
            raise FilterError("BAD_SPEC", f"order must be >= 1, got {self.order}")
        want = 2 if self.kind == "bandpass" else 1
        if self.kind not in ("highpass", "lowpass", "bandpass"):
            raise FilterError("BAD_SPEC", f"unknown filter kind {self.kind!r}")
        if len(self.cutoffs) != want:
            raise FilterError("BAD_SPEC", f"{self.kind} needs {want} cutoff(s)")
        nyq = fs / 2
        for c in self.cutoffs:
            if not 0 < c < nyq:
                raise FilterError("BAD_SPEC", f"cutoff {c} Hz outside (0, {nyq}) Hz")
        if want == 2 and not self.cutoffs[0] < self.cutoffs[1]:
            raise FilterError("BAD_SPEC", "bandpass needs low < high")

    def sos(self) -> np.ndarray:
        self.validate()
        wn = self.cutoffs[0] if len(self.cutoffs) == 1 else list(self.cutoffs)
        btype = {"highpass": "highpass", "lowpass": "lowpass", "bandpass": "bandpass"}[self.kind]
        return sps.butter(self.order, wn, btype=btype, fs=self.fs, output="sos")


def highpass(fs: float, cutoff: float = 0.05, order: int = DEFAULT_ORDER) -> IirFilterSpec:
    return IirFilterSpec("highpass", (cutoff,), fs, order)


def bandpass(fs: float, low: float = 0.05, high: float = 150.0, order: int = DEFAULT_ORDER) -> IirFilterSpec:
    return IirFilterSpec("bandpass", (low, high), fs, order)


def filtfilt_array(x: np.ndarray, spec: IirFilterSpec) -> np.ndarray:
    """Zero-phase SOS filtering along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    sos = spec.sos()
    n = x.shape[-1]
    padlen = min(n - 1, 3 * (2 * len(sos) + 1))
    return sps.sosfiltfilt(sos, x, axis=-1, padlen=padlen)


def iir_filter(record: MultiLeadRecord, spec: IirFilterSpec) -> MultiLeadRecord:
    spec.validate(record.fs)
    return record.with_samples(filtfilt_array(record.samples, spec))


def _check_factor(factor) -> int:
    if int(factor) != factor or factor < 2:
        raise FilterError("BAD_FACTOR", f"factor must be an integer >= 2, got {factor}")
    return int(factor)


def decimate_array(x: np.ndarray, factor: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    # cycles/sample relative to the post-decimation Nyquist (0.5 / factor)
    rel = (np.arange(n // 2 + 1) / n) / (0.5 / factor)
    gain = np.zeros_like(rel)
    gain[rel <= DECIMATE_PASSBAND] = 1.0
    taper = (rel > DECIMATE_PASSBAND) & (rel < 1.0)
    gain[taper] = 0.5 * (1 + np.cos(np.pi * (rel[taper] - DECIMATE_PASSBAND) / (1 - DECIMATE_PASSBAND)))
    smooth = np.fft.irfft(np.fft.rfft(x, axis=-1) * gain, n=n, axis=-1)
    return smooth[..., ::factor]


def decimate(record: MultiLeadRecord, factor: int) -> MultiLeadRecord:
    """Low-pass below 0.8x the new Nyquist (frequency domain), then keep every ``factor``-th sample."""
    factor = _check_factor(factor)
    if record.n % factor or record.n < 2 * factor:
        raise FilterError("BAD_FACTOR", f"factor {factor} does not divide N={record.n}")
    return record.with_samples(decimate_array(record.samples, factor), record.fs / factor)


def cubic_upsample_array(x: np.ndarray, factor: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    knots = np.arange(n, dtype=np.float64)
    spline = interpolate.CubicSpline(knots, x, axis=-1, bc_type="natural")
    return spline(np.arange(n * factor) / factor)


def cubic_upsample(record: MultiLeadRecord, factor: int) -> MultiLeadRecord:
    factor = _check_factor(factor)
    if record.n < 4:
        raise FilterError("TOO_SHORT", f"cubic spline needs >= 4 samples, got {record.n}")
    return record.with_samples(cubic_upsample_array(record.samples, factor), record.fs * factor)


def fft_upsample_array(x: np.ndarray, factor: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    m = n * factor
    spec = np.fft.fft(x, axis=-1)
    out = np.zeros(x.shape[:-1] + (m,), dtype=complex)
    half = n // 2
    if n % 2 == 0:
        out[..., :half] = spec[..., :half]
        out[..., m - half + 1:] = spec[..., half + 1:]
        out[..., half] = spec[..., half] / 2
        out[..., m - half] = spec[..., half] / 2
    else:
        out[..., :half + 1] = spec[..., :half + 1]
        out[..., m - half:] = spec[..., half + 1:]
    return np.fft.ifft(out, axis=-1).real * factor


def fft_upsample(record: MultiLeadRecord, factor: int) -> MultiLeadRecord:
    factor = _check_factor(factor)
    return record.with_samples(fft_upsample_array(record.samples, factor), record.fs * factor)


def soft_threshold(c: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - thr, 0.0)


def wavelet_denoise_array(x: np.ndarray, levels: int, wavelet: str = "db4") -> np.ndarray:
    x = np.array(x, dtype=np.float64)  # pywt rejects read-only buffers
    n = x.shape[-1]
    out = np.empty_like(x)
    for idx in np.ndindex(x.shape[:-1]):
        coeffs = pywt.wavedec(x[idx], wavelet, mode="periodization", level=levels)
        sigma = np.median(np.abs(coeffs[-1])) / 0.6745
        thr = sigma * np.sqrt(2 * np.log(n))
        coeffs = [coeffs[0]] + [soft_threshold(d, thr) for d in coeffs[1:]]
        out[idx] = pywt.waverec(coeffs, wavelet, mode="periodization")[:n]
    return out


def wavelet_denoise(record: MultiLeadRecord, levels: int = 3, threshold_rule: str = "universal") -> MultiLeadRecord:
    """Daubechies-4 soft-threshold denoising with the universal threshold."""
    if threshold_rule != "universal":
        raise FilterError("BAD_SPEC", f"unsupported threshold rule {threshold_rule!r}")
    if levels < 1 or record.n < 2 ** levels:
        raise FilterError("TOO_SHORT", f"N={record.n} too short for {levels} levels")
    return record.with_samples(wavelet_denoise_array(record.samples, levels))


def fft_bandpass_array(x: np.ndarray, fs: float, low: float, high: float) -> np.ndarray:
    """Zero every DFT bin outside [low, high] Hz."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1 / fs)
    keep = (freqs >= low) & (freqs <= high)
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * keep, n=n, axis=-1)
