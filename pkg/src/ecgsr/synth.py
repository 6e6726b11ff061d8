"""Synthetic 12-lead ECG and the three artifact families (BW, EMG, EDA).

The beat model is a sum of five Gaussian bumps (P, Q, R, S, T) per beat,
scaled per lead. Artifacts are generated procedurally so corruption is
reproducible from a seed alone.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import dsp
from .errors import SynthError
from .signal import ARTIFACT_KINDS, N_LEADS, MultiLeadRecord, WindowPair, make_record

WAVES = ("P", "Q", "R", "S", "T")

# (center offset from R in s, width sigma in s, amplitude in mV)
DEFAULT_WAVES: dict[str, tuple[float, float, float]] = {
    "P": (-0.200, 0.025, 0.12),
    "Q": (-0.035, 0.010, -0.10),
    "R": (0.000, 0.012, 1.00),
    "S": (0.035, 0.012, -0.25),
    "T": (0.280, 0.050, 0.30),
}

# mild morphology changes per superclass, enough to make per-class scores differ
CLASS_WAVE_OVERRIDES: dict[str, dict[str, tuple[float, float, float]]] = {
    "NORM": {},
    "MI": {"Q": (-0.040, 0.014, -0.30), "T": (0.280, 0.055, -0.20)},
    "CD": {"Q": (-0.050, 0.018, -0.10), "R": (0.000, 0.022, 0.90), "S": (0.060, 0.022, -0.30)},
    "HYP": {"R": (0.000, 0.013, 1.60), "S": (0.038, 0.013, -0.50)},
    "STTC": {"T": (0.300, 0.070, 0.06), "S": (0.040, 0.030, -0.15)},
}

DEFAULT_LEAD_GAINS: tuple[float, ...] = (1.0, 1.2, 0.4, -0.9, 0.5, 0.8, -0.6, -0.3, 0.4, 1.1, 1.3, 1.0)

DEFAULT_AMPLITUDES: dict[str, float] = {"BW": 0.3, "EMG": 0.2, "EDA": 0.15}


def class_waves(superclass: str | None) -> dict[str, tuple[float, float, float]]:
    waves = dict(DEFAULT_WAVES)
    waves.update(CLASS_WAVE_OVERRIDES.get(superclass or "NORM", {}))
    return waves


@dataclass(frozen=True)
class EcgSynthSpec:
    fs: float
    duration: float
    heart_rate: float = 60.0
    lead_gains: Sequence[float] = DEFAULT_LEAD_GAINS
    wave_params: Mapping[str, tuple[float, float, float]] = field(default_factory=lambda: dict(DEFAULT_WAVES))
    seed: int = 0
    rr_jitter: float = 0.03

    def n_samples(self) -> int:
        n = self.fs * self.duration
        if self.fs <= 0 or self.duration <= 0 or abs(n - round(n)) > 1e-9:
            raise SynthError("BAD_SPEC", f"fs*duration must be a positive integer, got {n}")
        return int(round(n))

    def validate(self) -> None:
        self.n_samples()
        if not 30 <= self.heart_rate <= 220:
            raise SynthError("BAD_SPEC", f"heart rate {self.heart_rate} outside [30, 220] bpm")
        if len(self.lead_gains) != N_LEADS:
            raise SynthError("BAD_SPEC", f"need {N_LEADS} lead gains")
        if set(self.wave_params) != set(WAVES):
            raise SynthError("BAD_SPEC", f"wave_params must define {WAVES}")
        if any(w <= 0 for _, w, _ in self.wave_params.values()):
            raise SynthError("BAD_SPEC", "wave widths must be positive")


def beat_times(spec: EcgSynthSpec) -> np.ndarray:
    """R-peak times (s), including one beat either side of the window."""
    rng = np.random.default_rng(spec.seed)
    rr = 60.0 / spec.heart_rate
    t = rng.uniform(0, rr) - rr
    times = []
    while t < spec.duration + rr:
        times.append(t)
        t += rr * (1 + rng.uniform(-spec.rr_jitter, spec.rr_jitter))
    return np.array(times)


def synth_trace(spec: EcgSynthSpec) -> np.ndarray:
    """Single unit-gain trace; leads are scaled copies of it."""
    n = spec.n_samples()
    t = np.arange(n) / spec.fs
    out = np.zeros(n)
    for tb in beat_times(spec):
        for offset, width, amp in spec.wave_params.values():
            out += amp * np.exp(-0.5 * ((t - tb - offset) / width) ** 2)
    return out


def synth_ecg(spec: EcgSynthSpec, record_id: str = "synthetic", superclass: str | None = None) -> MultiLeadRecord:
    spec.validate()
    trace = synth_trace(spec)
    gains = np.asarray(spec.lead_gains, dtype=np.float64)[:, None]
    return make_record(gains * trace[None, :], spec.fs, record_id, superclass)


# -- artifacts --------------------------------------------------------------

@dataclass(frozen=True)
class ArtifactSpec:
    kind: str
    amplitude: float
    band: Optional[tuple[float, float]] = None
    seed: int = 0

    def resolved_band(self, fs: float) -> tuple[float, float]:
        if self.band is not None:
            return tuple(self.band)
        if self.kind == "BW":
            return (0.05, 0.5)
        if self.kind == "EMG":
            return (20.0, min(150.0, fs / 2 * 0.9))
        return (0.01, 1.0)

    def validate(self, fs: float) -> None:
        if self.kind not in ARTIFACT_KINDS:
            raise SynthError("BAD_SPEC", f"unknown artifact kind {self.kind!r}")
        if not self.amplitude >= 0:
            raise SynthError("BAD_SPEC", "amplitude must be >= 0")
        lo, hi = self.resolved_band(fs)
        if not 0 < lo < hi < fs / 2:
            raise SynthError("BAD_SPEC", f"band ({lo}, {hi}) Hz not inside (0, {fs / 2}) Hz")


def _burst_envelope(rng: np.random.Generator, fs: float, n: int) -> np.ndarray:
    env = np.zeros(n)
    i = 0
    on = bool(rng.random() < 0.6)
    while i < n:
        seg = max(1, int(rng.uniform(0.2, 1.0) * fs))
        if on:
            env[i:i + seg] = 1.0
        on = not on
        i += seg
    if not env.any():
        env[:] = 1.0
    ramp = max(1, int(0.02 * fs))
    if ramp > 1:
        win = np.hanning(2 * ramp + 1)
        env = np.convolve(env, win / win.sum(), mode="same")
    return env


def gen_artifact(spec: ArtifactSpec, fs: float, n: int) -> np.ndarray:
    spec.validate(fs)
    if spec.amplitude == 0:
        return np.zeros(n)
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.resolved_band(fs)
    t = np.arange(n) / fs
    if spec.kind == "BW":
        freqs = rng.uniform(lo, hi, size=3)
        phases = rng.uniform(0, 2 * np.pi, size=3)
        amps = rng.uniform(0.5, 1.0, size=3)
        x = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])).sum(0)
    elif spec.kind == "EMG":
        noise = rng.standard_normal(n)
        x = dsp.filtfilt_array(noise, dsp.IirFilterSpec("bandpass", (lo, hi), fs))
        x = x * _burst_envelope(rng, fs, n)
    else:
        walk = np.cumsum(rng.standard_normal(n))
        x = dsp.filtfilt_array(walk, dsp.IirFilterSpec("lowpass", (hi,), fs))
        x = x - x.mean()
    peak = np.abs(x).max()
    if peak == 0:
        return np.zeros(n)
    return x * (spec.amplitude / peak)


@dataclass(frozen=True)
class CorruptionPolicy:
    corrupt_probability: float = 0.5
    kind_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0
    amplitudes: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_AMPLITUDES))
    common_mode: bool = True

    def validate(self) -> None:
        if not 0 <= self.corrupt_probability <= 1:
            raise SynthError("BAD_SPEC", "corrupt_probability must be in [0, 1]")
        w = np.asarray(self.kind_weights, dtype=np.float64)
        if w.shape != (3,) or (w < 0).any() or w.sum() == 0:
            raise SynthError("BAD_SPEC", "kind_weights must be 3 non-negative numbers, not all zero")


def _pair_rng(seed: int, source_record: str, window_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(source_record.encode()), window_index])


def corrupt(pair: WindowPair, policy: CorruptionPolicy) -> WindowPair:
    """Maybe add one artifact (kind drawn by weight) to every lead of the LR window."""
    if pair.corrupted:
        raise SynthError("ALREADY_CORRUPTED", f"pair {pair.window_id} is already corrupted")
    policy.validate()
    rng = _pair_rng(policy.seed, pair.source_record, pair.window_index)
    if not rng.random() < policy.corrupt_probability:
        return pair
    w = np.asarray(policy.kind_weights, dtype=np.float64)
    kind = ARTIFACT_KINDS[int(rng.choice(3, p=w / w.sum()))]
    amp = float(policy.amplitudes[kind])
    lr = pair.lr
    if policy.common_mode:
        art = gen_artifact(ArtifactSpec(kind, amp, seed=int(rng.integers(2**32))), lr.fs, lr.n)
        noisy = lr.samples + art[None, :]
    else:
        seeds = rng.integers(2**32, size=N_LEADS)
        noisy = lr.samples + np.stack([gen_artifact(ArtifactSpec(kind, amp, seed=int(s)), lr.fs, lr.n) for s in seeds])
    return replace(pair, lr=lr.with_samples(noisy), lr_clean=lr, corrupted=True, artifact_kind=kind)


# -- record-level generation ------------------------------------------------

def random_record_spec(seed: int, fs: float, duration: float, superclass: str | None) -> EcgSynthSpec:
    """Per-record heart rate and lead gains drawn from ``seed``; independent of ``fs``."""
    rng = np.random.default_rng([seed, 7])
    hr = float(rng.uniform(50, 100))
    gains = np.asarray(DEFAULT_LEAD_GAINS) * rng.uniform(0.8, 1.2, size=N_LEADS)
    return EcgSynthSpec(fs=fs, duration=duration, heart_rate=hr, lead_gains=tuple(gains),
                        wave_params=class_waves(superclass), seed=seed)


def synth_record_pair(record_id: str, superclass: str | None, seed: int, duration: float = 10.0,
                      lr_fs: float = 100.0, hr_fs: float = 500.0) -> tuple[MultiLeadRecord, MultiLeadRecord]:
    """The same synthetic heart sampled at the low and high rate."""
    lr = synth_ecg(random_record_spec(seed, lr_fs, duration, superclass), record_id, superclass)
    hr = synth_ecg(random_record_spec(seed, hr_fs, duration, superclass), record_id, superclass)
    return lr, hr
