"""Scoring harnesses: model evaluation, baselines, missing channels, ablations, saliency."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np

from .. import dsp
from ..errors import ExperimentError, ModelError, ShapeError
from ..metrics import MetricRow, metric_row
from ..model import DcaeSr, DcaeSrConfig, build, train
from ..signal import LEADS, N_LEADS, Lead, WindowPair
from .report import ExperimentReport

UPSCALE = 10
OUTLIER_FRACTION = 0.01
MASKING_NOTE = ("channel masked when its uniform draw is < p (probability p); "
                "the opposite reading (draw >= p) would mask almost every channel at p=0")


class SuperResolver(Protocol):
    def infer(self, lr_window) -> tuple[np.ndarray, np.ndarray]: ...


# -- shared scoring path ----------------------------------------------------

def score(pairs: Sequence[WindowPair], estimates: Iterable[np.ndarray], method: str, condition: str,
          snr_convention: str = "prediction") -> tuple[list[MetricRow], list[dict]]:
    """Metric rows for estimates against HR targets, plus top-1% MSE outliers.

    Every harness goes through here, so only the ``method`` label differs
    between a model and a baseline.
    """
    rows, peaks = [], []
    for p, est in zip(pairs, estimates):
        est = np.asarray(est, dtype=np.float64)
        if est.shape != p.hr.samples.shape:
            raise ShapeError("SHAPE_MISMATCH", f"{method}: estimate {est.shape} vs target {p.hr.samples.shape}")
        rows.append(metric_row(est, p.hr.samples, p.window_id, p.superclass, method, condition, snr_convention))
        lead, idx = np.unravel_index(int(np.argmax(np.abs(est - p.hr.samples))), est.shape)
        peaks.append((LEADS[lead], int(idx)))
    if len(rows) != len(pairs):
        raise ExperimentError("SHAPE_MISMATCH", "fewer estimates than pairs")
    k = max(1, math.ceil(OUTLIER_FRACTION * len(rows)))
    order = sorted(range(len(rows)), key=lambda i: (-rows[i].mse, rows[i].window_id))[:k]
    outliers = [{"window_id": rows[i].window_id, "method": method, "condition": condition,
                 "mse": rows[i].mse, "peak_lead": peaks[i][0], "peak_index": peaks[i][1]} for i in order]
    return rows, outliers


def _need(pairs: Sequence[WindowPair]) -> None:
    if not pairs:
        raise ExperimentError("EMPTY_SET", "no pairs to evaluate")


def predictions(model: SuperResolver, pairs: Sequence[WindowPair], masked: Optional[Sequence[Optional[int]]] = None):
    for i, p in enumerate(pairs):
        x = p.lr.samples
        ch = None if masked is None else masked[i]
        if ch is not None:
            x = x.copy()
            x[ch] = 0.0
        yield model.infer(x)[1]


def evaluate(model: SuperResolver, pairs: Sequence[WindowPair], group_by: Optional[str] = "superclass",
             method: str = "dcae-sr", condition: str = "test", config: dict | None = None) -> ExperimentReport:
    _need(pairs)
    t0 = time.perf_counter()
    rows, outliers = score(pairs, predictions(model, pairs), method, condition)
    groups = (group_by,) if group_by else ()
    return ExperimentReport(rows, groups, dict(config or {}), [], outliers, time.perf_counter() - t0)


# -- baselines --------------------------------------------------------------

def _cubic(x: np.ndarray, fs: float) -> np.ndarray:
    return dsp.cubic_upsample_array(x, UPSCALE)


def _bandpass_cubic(x: np.ndarray, fs: float) -> np.ndarray:
    # 0.5-150 Hz Butterworth; at fs=50 the upper edge is past Nyquist, leaving a 0.5 Hz high-pass
    hi = 150.0
    spec = dsp.bandpass(fs, 0.5, hi) if hi < fs / 2 else dsp.highpass(fs, 0.5)
    return dsp.cubic_upsample_array(dsp.filtfilt_array(x, spec), UPSCALE)


def _fft(x: np.ndarray, fs: float) -> np.ndarray:
    return dsp.fft_upsample_array(x, UPSCALE)


def _wavelet_cubic(x: np.ndarray, fs: float) -> np.ndarray:
    return dsp.cubic_upsample_array(dsp.wavelet_denoise_array(x, 3), UPSCALE)


def _fftfilter_cubic(x: np.ndarray, fs: float) -> np.ndarray:
    return dsp.cubic_upsample_array(dsp.fft_bandpass_array(x, fs, 0.5, 150.0), UPSCALE)


BASELINES: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "cubic": _cubic,
    "bandpass+cubic": _bandpass_cubic,
    "fft_upsample": _fft,
    "wavelet+cubic": _wavelet_cubic,
    "fftfilter+cubic": _fftfilter_cubic,
}


def run_baselines(pairs: Sequence[WindowPair], methods: Sequence[str] = ("cubic", "bandpass+cubic"),
                  condition: str = "test", group_by: Optional[str] = None,
                  config: dict | None = None) -> ExperimentReport:
    unknown = [m for m in methods if m not in BASELINES]
    if unknown:
        raise ExperimentError("UNKNOWN_METHOD", f"unknown baseline(s) {unknown}; choose from {sorted(BASELINES)}")
    _need(pairs)
    t0 = time.perf_counter()
    rows, outliers = [], []
    for m in methods:
        fn = BASELINES[m]
        r, o = score(pairs, (fn(p.lr.samples, p.lr.fs) for p in pairs), m, condition)
        rows += r
        outliers += o
    groups = ("method",) + ((group_by,) if group_by else ())
    return ExperimentReport(rows, groups, dict(config or {}), [], outliers, time.perf_counter() - t0)


# -- missing channels -------------------------------------------------------

@dataclass(frozen=True)
class MissingChannelConfig:
    missing_rate: float = 0.0
    seed: int = 0
    max_missing_per_signal: int = 1
    target_channel: Optional[str] = None

    def validate(self) -> None:
        if not 0 <= self.missing_rate <= 1:
            raise ExperimentError("BAD_CONFIG", f"missing_rate must be in [0, 1], got {self.missing_rate}")
        if self.max_missing_per_signal != 1:
            raise ExperimentError("BAD_CONFIG", "at most one channel per signal can be masked")
        if self.target_channel is not None:
            Lead.from_name(self.target_channel)


def draw_masks(pairs: Sequence[WindowPair], config: MissingChannelConfig) -> list[Optional[int]]:
    """Index of the masked lead per pair, or None.

    Each lead gets a seeded uniform draw; a draw below p marks it missing.
    With several candidates the one with the lowest draw wins.
    """
    config.validate()
    p = config.missing_rate
    target = None if config.target_channel is None else Lead.from_name(config.target_channel).index
    out = []
    for pair in pairs:
        u = np.random.default_rng([config.seed, zlib.crc32(pair.window_id.encode())]).random(N_LEADS)
        if target is not None:
            out.append(target if u[target] < p else None)
            continue
        hits = np.flatnonzero(u < p)
        out.append(int(hits[np.argmin(u[hits])]) if len(hits) else None)
    return out


def missing_channel_experiment(model: SuperResolver, pairs: Sequence[WindowPair], config: MissingChannelConfig,
                               method: str = "dcae-sr") -> ExperimentReport:
    """Zero-mask at most one LR lead per window and score the SR output.

    Rows carry ``condition = "p=<rate>|masked=<lead or none>"`` so the report
    groups by masked channel and rate at once.
    """
    _need(pairs)
    t0 = time.perf_counter()
    masks = draw_masks(pairs, config)
    rows, outliers = [], []
    for pair, ch, est in zip(pairs, masks, predictions(model, pairs, masks)):
        cond = f"p={config.missing_rate!r}|masked={'none' if ch is None else LEADS[ch]}"
        r, o = score([pair], [est], method, cond)
        rows += r
        outliers += o
    k = max(1, math.ceil(OUTLIER_FRACTION * len(rows)))
    outliers = sorted(outliers, key=lambda d: (-d["mse"], d["window_id"]))[:k]
    cfg = {"missing_rate": config.missing_rate, "seed": config.seed,
           "target_channel": config.target_channel, "max_missing_per_signal": config.max_missing_per_signal}
    return ExperimentReport(rows, ("condition",), cfg, [MASKING_NOTE], outliers, time.perf_counter() - t0)


def channel_sweep(model: SuperResolver, pairs: Sequence[WindowPair], rate: float, seed: int = 0) -> ExperimentReport:
    """Each lead in turn as the only candidate at one rate."""
    report = None
    for lead in LEADS:
        r = missing_channel_experiment(model, pairs, MissingChannelConfig(rate, seed, 1, lead))
        report = r if report is None else report.merged(r)
    report.config = {"missing_rate": rate, "seed": seed, "sweep": "channel"}
    return report


def rate_sweep(model: SuperResolver, pairs: Sequence[WindowPair], lead: str, rates: Sequence[float],
               seed: int = 0) -> ExperimentReport:
    report = None
    for p in rates:
        r = missing_channel_experiment(model, pairs, MissingChannelConfig(p, seed, 1, lead))
        report = r if report is None else report.merged(r)
    report.config = {"target_channel": lead, "rates": list(rates), "seed": seed, "sweep": "rate"}
    return report


# -- ablations --------------------------------------------------------------

ABLATION_AXES: dict[str, tuple] = {
    "denoising": (True, False),
    "use_sr_decoder": (True, False),
    "loss_mode": ("LR_PLUS_HR", "LR", "HR"),
    "final_tanh": (False, True),
}


def variant_label(settings: Mapping[str, object]) -> str:
    return ",".join(f"{k}={v}" for k, v in settings.items())


def ablation_variants(base: DcaeSrConfig, axes: Mapping[str, Sequence] | Sequence[str]) -> list[tuple[str, DcaeSrConfig]]:
    """Valid configs of the Cartesian product; invalid combinations are skipped."""
    if not axes:
        raise ExperimentError("EMPTY_AXES", "no ablation axes given")
    if not isinstance(axes, Mapping):
        axes = {a: ABLATION_AXES.get(a, ()) for a in axes}
    unknown = [a for a in axes if a not in ABLATION_AXES]
    if unknown:
        raise ExperimentError("BAD_CONFIG", f"unknown ablation axis {unknown}; choose from {sorted(ABLATION_AXES)}")
    names = list(axes)
    out = []
    for combo in itertools.product(*(axes[n] for n in names)):
        settings = dict(zip(names, combo))
        cfg = replace(base, **settings)
        try:
            cfg.validate()
        except ModelError:
            continue
        out.append((variant_label(settings), cfg))
    return out


def ablation_suite(base: DcaeSrConfig, axes: Mapping[str, Sequence] | Sequence[str],
                   train_pairs: Sequence[WindowPair], test_pairs: Sequence[WindowPair],
                   log: Callable[[dict], None] | None = None,
                   models: dict | None = None) -> ExperimentReport:
    """Train every variant from the same seed; score on corrupted and clean test windows.

    Pass a dict as ``models`` to receive the trained models by label.
    """
    variants = ablation_variants(base, axes)
    _need(test_pairs)
    clean = [p.clean() for p in test_pairs]
    t0 = time.perf_counter()
    rows, outliers = [], []
    for label, cfg in variants:
        model = build(cfg)
        train(model, train_pairs, log=None if log is None else (lambda e, _l=label: log({"variant": _l, **e})))
        for cond, ps in (("corrupted", test_pairs), ("clean", clean)):
            r, o = score(ps, predictions(model, ps), label, cond)
            rows += r
            outliers += o
        if models is not None:
            models[label] = model
    cfg = {"base": base.to_dict(), "variants": [label for label, _ in variants]}
    return ExperimentReport(rows, ("method", "condition"), cfg, [], outliers, time.perf_counter() - t0)


# -- activation maps --------------------------------------------------------

def resample_trace(trace: np.ndarray, length: int) -> np.ndarray:
    """Linear resampling of a 1D trace onto ``length`` points spanning the same interval."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 1 or len(trace) == 0:
        raise ShapeError("SHAPE_MISMATCH", f"expected a non-empty 1D trace, got {trace.shape}")
    if len(trace) == 1:
        return np.full(length, trace[0])
    src = np.linspace(0.0, 1.0, len(trace))
    return np.interp(np.linspace(0.0, 1.0, length), src, trace)


def activation_maps(model: DcaeSr, window: WindowPair | np.ndarray) -> dict[str, np.ndarray]:
    """Per-layer saliency: mean |activation| over channels, on the LR time base."""
    x = window.lr.samples if isinstance(window, WindowPair) else np.asarray(window, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != N_LEADS:
        raise ShapeError("SHAPE_MISMATCH", f"expected 12 x N input, got {x.shape}")
    trace: dict[str, np.ndarray] = {}
    model.infer(x, trace=trace)
    n = x.shape[1]
    return {name: resample_trace(np.abs(a).mean(axis=0), n) for name, a in trace.items()}


def activation_csv(maps: Mapping[str, np.ndarray], lr_input: np.ndarray, fs: float) -> str:
    n = lr_input.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", *(f"input_{l}" for l in LEADS), *maps])
    for i in range(n):
        w.writerow([repr(i / fs), *(repr(float(v)) for v in lr_input[:, i]),
                    *(repr(float(m[i])) for m in maps.values())])
    return buf.getvalue()


# -- qualitative exports ----------------------------------------------------

def triplet_csv(pair: WindowPair, prediction: np.ndarray) -> str:
    """(input, target, prediction) per lead on the HR time base; input cells are blank off its grid."""
    hr_fs = pair.hr.fs
    n = pair.hr.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", *(f"{kind}_{l}" for kind in ("input", "target", "pred") for l in LEADS)])
    x = pair.lr.samples
    for i in range(n):
        inp = [repr(float(v)) for v in x[:, i // UPSCALE]] if i % UPSCALE == 0 else [""] * N_LEADS
        w.writerow([repr(i / hr_fs), *inp, *(repr(float(v)) for v in pair.hr.samples[:, i]),
                    *(repr(float(v)) for v in prediction[:, i])])
    return buf.getvalue()


def export_triplets(model: SuperResolver | str, pairs: Sequence[WindowPair], out_dir: str | Path,
                    limit: int | None = None) -> list[Path]:
    """Write one CSV per window; ``model`` may be a baseline name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = list(pairs)[:limit]
    if isinstance(model, str):
        if model not in BASELINES:
            raise ExperimentError("UNKNOWN_METHOD", model)
        preds = (BASELINES[model](p.lr.samples, p.lr.fs) for p in pairs)
    else:
        preds = predictions(model, pairs)
    paths = []
    for p, est in zip(pairs, preds):
        path = out_dir / f"{p.window_id}.csv"
        path.write_text(triplet_csv(p, est))
        paths.append(path)
    return paths
