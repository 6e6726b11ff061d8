"""DCAE-SR: a convolutional encoder with two decoders.

The encoder maps a 12 x 250 LR window (50 Hz) to a latent of 768 x 250.
``decoder_lr`` reconstructs the (denoised) LR window; ``decoder_sr`` uses
strided transposed convolutions to produce a 12 x 2500 window at 500 Hz.

Channel counts other than the 12 lead channels scale with
``width_multiplier``; kernels, strides and dropout follow the reference
layer table unchanged.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import dsp
from .errors import ModelError, ShapeError
from .nn import checkpoint as ckpt
from .nn import ops
from .nn.optim import AdamState, adam_step
from .nn.tensor import Tensor, backward
from .signal import N_LEADS, WindowPair

LOSS_MODES = ("LR", "HR", "LR_PLUS_HR")
UPSCALE = 10


@dataclass(frozen=True)
class LayerSpec:
    name: str
    group: str  # encoder | decoder_lr | decoder_sr
    transposed: bool
    c_in: int
    c_out: int
    kernel: int
    stride: int
    padding: int
    dropout: Optional[float]
    final: bool = False


# name, in, out, kernel, stride, dropout  (reference widths)
_TABLE = {
    "encoder": [
        ("enc1a", 12, 12, 3, 1, 0.1), ("enc1b", 12, 192, 3, 1, 0.1),
        ("enc2a", 192, 384, 3, 1, 0.1), ("enc2b", 384, 768, 3, 1, 0.1),
    ],
    "decoder_lr": [
        ("dec1a", 768, 768, 3, 1, 0.1), ("dec1b", 768, 384, 3, 1, 0.1),
        ("dec2a", 384, 192, 3, 1, 0.1), ("dec2b", 192, 12, 3, 1, None),
    ],
    "decoder_sr": [
        ("sr1a", 768, 768, 30, 5, 0.1), ("sr1b", 768, 384, 30, 2, 0.1),
        ("sr2a", 384, 192, 10, 1, 0.1), ("sr2b", 192, 12, 4, 1, None),
    ],
}


@dataclass(frozen=True)
class DcaeSrConfig:
    width_multiplier: str = "1"
    denoising: bool = True
    use_sr_decoder: bool = True
    loss_mode: str = "LR_PLUS_HR"
    final_tanh: bool = False
    inner_activation: str = "relu"
    sr_inner_activation: Optional[str] = None
    dropout_rate: float = 0.1
    lr: float = 1e-4
    epochs: int = 20
    batch_size: int = 1
    seed: int = 0
    loss_weight_lr: float = 1.0
    loss_weight_sr: float = 1.0
    normalize: bool = False
    bias_init: str = "uniform"
    lr_length: int = 250

    @property
    def width(self) -> Fraction:
        return Fraction(str(self.width_multiplier))

    def validate(self) -> None:
        try:
            w = self.width
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError("BAD_WIDTH", f"unparseable width {self.width_multiplier!r}") from exc
        if w <= 0:
            raise ModelError("BAD_WIDTH", "width_multiplier must be positive")
        for layers in _TABLE.values():
            for _, ci, co, *_ in layers:
                for c in (ci, co):
                    if c != N_LEADS and (c * w).denominator != 1:
                        raise ModelError("BAD_WIDTH", f"{c} x {w} is not an integer channel count")
        if self.loss_mode not in LOSS_MODES:
            raise ModelError("BAD_CONFIG", f"loss_mode must be one of {LOSS_MODES}")
        if self.loss_mode == "HR" and not self.use_sr_decoder:
            raise ModelError("MODE_CONFLICT", "loss_mode HR needs the SR decoder")
        for act in (self.inner_activation, self.sr_inner_activation):
            if act is not None and act not in ops.ACTIVATIONS:
                raise ModelError("BAD_CONFIG", f"unknown activation {act!r}")
        if not 0 <= self.dropout_rate < 1:
            raise ModelError("BAD_CONFIG", "dropout_rate must be in [0, 1)")
        if self.batch_size != 1:
            raise ModelError("BAD_CONFIG", "only batch_size 1 is supported")
        if self.epochs < 0 or self.lr <= 0:
            raise ModelError("BAD_CONFIG", "epochs must be >= 0 and lr > 0")
        if self.bias_init not in ("uniform", "zero"):
            raise ModelError("BAD_CONFIG", "bias_init must be 'uniform' or 'zero'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DcaeSrConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ModelError("BAD_CONFIG", f"unknown config keys {sorted(unknown)}")
        return cls(**d)


def layer_specs(config: DcaeSrConfig) -> list[LayerSpec]:
    config.validate()
    w = config.width

    def scaled(c: int) -> int:
        return c if c == N_LEADS else int(c * w)

    specs = []
    for group, rows in _TABLE.items():
        for i, (name, ci, co, k, s, drop) in enumerate(rows):
            pad = (k - 1) // 2 if (s == 1 and k == 3) else 0
            if drop is not None:
                drop = config.dropout_rate
            specs.append(LayerSpec(name, group, group != "encoder", scaled(ci), scaled(co), k, s, pad, drop,
                                   final=(i == len(rows) - 1 and group != "encoder")))
    return specs


def _chain_length(specs: Iterable[LayerSpec], length: int) -> int:
    for sp in specs:
        f = ops.conv_transpose1d_out_len if sp.transposed else ops.conv1d_out_len
        length = f(length, sp.kernel, sp.stride, sp.padding)
    return length


@dataclass
class EpochStats:
    epoch: int
    loss_lr: Optional[float]
    loss_sr: Optional[float]
    seconds: float
    val_sr_mse: Optional[float] = None


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: list[tuple[int, Optional[float], Optional[float]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    def series(self, key: str) -> np.ndarray:
        return np.array([getattr(e, key) for e in self.epochs], dtype=float)


class DcaeSr:
    """Parameters, forward passes and the training step of the model."""

    def __init__(self, config: DcaeSrConfig):
        config.validate()
        self.config = config
        self.layers = layer_specs(config)
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng([config.seed, 1])
        for sp in self.layers:
            wshape = (sp.c_in, sp.c_out, sp.kernel) if sp.transposed else (sp.c_out, sp.c_in, sp.kernel)
            bound = np.sqrt(1.0 / (sp.c_in * sp.kernel))
            self.params[f"{sp.name}.weight"] = Tensor(rng.uniform(-bound, bound, wshape), True, f"{sp.name}.weight")
            b = rng.uniform(-bound, bound, sp.c_out)
            if config.bias_init == "zero":
                b = np.zeros(sp.c_out)
            self.params[f"{sp.name}.bias"] = Tensor(b, True, f"{sp.name}.bias")
        # parameters live in one flat buffer so the optimizer runs as a single vectorised update
        self._flat = np.concatenate([t.data.ravel() for t in self.params.values()])
        self._flat_grad = np.zeros_like(self._flat)
        self._slices = {}
        pos = 0
        for k, t in self.params.items():
            n = t.data.size
            self._slices[k] = slice(pos, pos + n)
            t.data = self._flat[pos:pos + n].reshape(t.shape)
            pos += n
        self.dropout_rng = np.random.default_rng([config.seed, 2])
        self.adam = AdamState.for_params([self._flat])
        raw = _chain_length(self.group("encoder"), config.lr_length)
        self.latent_length = raw
        self.sr_raw_length = _chain_length(self.group("decoder_sr"), raw)
        excess = self.sr_raw_length - UPSCALE * config.lr_length
        if excess < 0 or excess % 2:
            raise ModelError("BAD_GEOMETRY", f"SR chain yields {self.sr_raw_length} samples, cannot centre-crop to {UPSCALE * config.lr_length}")
        self.sr_crop = excess // 2

    # -- structure ----------------------------------------------------------

    def group(self, name: str) -> list[LayerSpec]:
        return [sp for sp in self.layers if sp.group == name]

    @property
    def latent_channels(self) -> int:
        return self.group("encoder")[-1].c_out

    def param_count(self) -> int:
        return int(sum(t.data.size for t in self.params.values()))

    def shape_report(self) -> dict:
        rows = []
        for sp in self.layers:
            rows.append({
                "name": sp.name, "group": sp.group, "transposed": sp.transposed,
                "in": sp.c_in, "out": sp.c_out, "kernel": sp.kernel, "stride": sp.stride,
                "padding": sp.padding, "dropout": sp.dropout,
                "params": int(self.params[f"{sp.name}.weight"].data.size + sp.c_out),
            })
        return {
            "width_multiplier": str(self.config.width),
            "input": [N_LEADS, self.config.lr_length],
            "latent": [self.latent_channels, self.latent_length],
            "sr_raw_length": self.sr_raw_length,
            "sr_crop_each_side": self.sr_crop,
            "sr_output": [N_LEADS, self.sr_raw_length - 2 * self.sr_crop],
            "param_count": self.param_count(),
            "layers": rows,
        }

    # -- forward ------------------------------------------------------------

    def _activation(self, sp: LayerSpec) -> Optional[str]:
        if sp.final:
            return "tanh" if self.config.final_tanh else None
        if sp.group == "decoder_sr" and self.config.sr_inner_activation:
            return self.config.sr_inner_activation
        return self.config.inner_activation

    def _run(self, x: Tensor, specs: Sequence[LayerSpec], training: bool, trace: dict | None) -> Tensor:
        for sp in specs:
            w, b = self.params[f"{sp.name}.weight"], self.params[f"{sp.name}.bias"]
            op = ops.conv_transpose1d if sp.transposed else ops.conv1d
            x = op(x, w, b, sp.stride, sp.padding)
            act = self._activation(sp)
            if act:
                x = ops.activation(x, act)
            if trace is not None:
                trace[sp.name] = x.data
            if sp.dropout:
                x = ops.dropout(x, sp.dropout, training, self.dropout_rng)
        return x

    def _check_input(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        if x.shape != (N_LEADS, self.config.lr_length):
            raise ShapeError("SHAPE_MISMATCH", f"expected LR window {(N_LEADS, self.config.lr_length)}, got {x.shape}")
        return x

    def encode(self, lr_window, training: bool = False, trace: dict | None = None) -> Tensor:
        return self._run(self._check_input(lr_window), self.group("encoder"), training, trace)

    def _check_latent(self, latent: Tensor) -> None:
        if latent.shape != (self.latent_channels, self.latent_length):
            raise ShapeError("SHAPE_MISMATCH", f"latent must be {(self.latent_channels, self.latent_length)}, got {latent.shape}")

    def decode_lr(self, latent: Tensor, training: bool = False, trace: dict | None = None) -> Tensor:
        self._check_latent(latent)
        return self._run(latent, self.group("decoder_lr"), training, trace)

    def decode_sr(self, latent: Tensor, training: bool = False, trace: dict | None = None, raw: bool = False) -> Tensor:
        if not self.config.use_sr_decoder:
            raise ModelError("NO_SR_DECODER", "model was built without the SR decoder")
        self._check_latent(latent)
        out = self._run(latent, self.group("decoder_sr"), training, trace)
        if raw:
            return out
        return ops.crop(out, self.sr_crop, self.sr_raw_length - self.sr_crop)

    # -- normalisation ------------------------------------------------------

    def _affine(self, lr_input: np.ndarray) -> tuple[float, float]:
        if not self.config.normalize:
            return 0.0, 1.0
        hi, lo = float(lr_input.max()), float(lr_input.min())
        half = (hi - lo) / 2
        return (hi + lo) / 2, (half if half > 0 else 1.0)

    # -- training -----------------------------------------------------------

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def loss_and_grads(self, lr_input, lr_target, hr_target, training: bool = True,
                       loss_mode: str | None = None) -> tuple[Optional[float], Optional[float]]:
        """Forward + backward without an optimizer step; gradients land in ``params[*].grad``."""
        mode = loss_mode or self.config.loss_mode
        use_sr = self.config.use_sr_decoder and mode in ("HR", "LR_PLUS_HR")
        use_lr = mode in ("LR", "LR_PLUS_HR")
        if mode == "HR" and not self.config.use_sr_decoder:
            raise ModelError("MODE_CONFLICT", "loss_mode HR needs the SR decoder")
        lr_input = np.asarray(lr_input, dtype=np.float64)
        lr_target = np.asarray(lr_target, dtype=np.float64)
        hr_target = np.asarray(hr_target, dtype=np.float64)
        if lr_target.shape != (N_LEADS, self.config.lr_length) or hr_target.shape != (N_LEADS, UPSCALE * self.config.lr_length):
            raise ShapeError("SHAPE_MISMATCH", f"targets {lr_target.shape}, {hr_target.shape}")
        c, h = self._affine(lr_input)
        latent = self.encode((lr_input - c) / h, training)
        total, loss_lr, loss_sr = None, None, None
        if use_lr:
            t = ops.mse(self.decode_lr(latent, training), (lr_target - c) / h)
            loss_lr = t.item()
            total = t * self.config.loss_weight_lr
        if use_sr:
            t = ops.mse(self.decode_sr(latent, training), (hr_target - c) / h)
            loss_sr = t.item()
            t = t * self.config.loss_weight_sr
            total = t if total is None else total + t
        self.zero_grad()
        backward(total)
        return loss_lr, loss_sr

    def train_step(self, lr_input, lr_target, hr_target) -> tuple[Optional[float], Optional[float]]:
        loss_lr, loss_sr = self.loss_and_grads(lr_input, lr_target, hr_target, training=True)
        g = self._flat_grad
        for k, t in self.params.items():
            g[self._slices[k]] = 0.0 if t.grad is None else t.grad.ravel()
        adam_step([self._flat], [g], self.adam, self.config.lr)
        return loss_lr, loss_sr

    # -- inference ----------------------------------------------------------

    def infer(self, lr_window, trace: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(LR reconstruction 12x250, SR estimate 12x2500), dropout disabled."""
        x = np.asarray(lr_window.data if isinstance(lr_window, Tensor) else lr_window, dtype=np.float64)
        self._check_input(x)
        c, h = self._affine(x)
        latent = self.encode((x - c) / h, False, trace)
        lr_rec = self.decode_lr(latent, False, trace).data * h + c
        if self.config.use_sr_decoder:
            sr = self.decode_sr(latent, False, trace).data * h + c
        else:
            sr = dsp.cubic_upsample_array(lr_rec, UPSCALE)
        return lr_rec, sr

    # -- persistence --------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            raise ModelError("BAD_CHECKPOINT", "checkpoint parameter names do not match the model")
        for k, arr in state.items():
            if arr.shape != self.params[k].shape:
                raise ModelError("BAD_CHECKPOINT", f"{k}: {arr.shape} vs {self.params[k].shape}")
            self.params[k].data[...] = arr

    def save(self, path: str | Path, extra: dict | None = None) -> Path:
        meta = {"config": self.config.to_dict(), **(extra or {})}
        return ckpt.save(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path) -> "DcaeSr":
        params, meta = ckpt.load(path)
        model = cls(DcaeSrConfig.from_dict(meta["config"]))
        model.load_state_dict(params)
        return model


def build(config: DcaeSrConfig) -> DcaeSr:
    return DcaeSr(config)


def training_inputs(pair: WindowPair, denoising: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(encoder input, LR target, HR target) for one pair.

    With denoising the model maps the (possibly corrupted) LR window to clean
    targets; without it the model is a plain autoencoder on clean windows.
    """
    clean = pair.lr_clean.samples
    if denoising:
        return pair.lr.samples, clean, pair.hr.samples
    return clean, clean, pair.hr.samples


def sr_mse(model: DcaeSr, pairs: Sequence[WindowPair]) -> float:
    errs = [np.mean((model.infer(p.lr.samples)[1] - p.hr.samples) ** 2) for p in pairs]
    return float(np.mean(errs))


def train(model: DcaeSr, pairs: Sequence[WindowPair], epochs: int | None = None,
          val_pairs: Sequence[WindowPair] | None = None, checkpoint_dir: str | Path | None = None,
          log: Callable[[dict], None] | None = None, log_steps: bool = False,
          stop_when: Callable[[EpochStats], bool] | None = None) -> TrainHistory:
    """Seeded-shuffle epochs of single-example Adam steps.

    ``stop_when`` sees each epoch's stats and ends training early when it returns True.
    """
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    history = TrainHistory()
    if epochs == 0:
        return history
    if not pairs:
        raise ModelError("EMPTY_DATASET", "no training pairs")
    best = np.inf
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([cfg.seed, 3, epoch]).permutation(len(pairs))
        lr_losses, sr_losses = [], []
        for i in order:
            loss_lr, loss_sr = model.train_step(*training_inputs(pairs[i], cfg.denoising))
            if loss_lr is not None:
                lr_losses.append(loss_lr)
            if loss_sr is not None:
                sr_losses.append(loss_sr)
            if log_steps:
                history.steps.append((epoch, loss_lr, loss_sr))
        stats = EpochStats(
            epoch,
            float(np.mean(lr_losses)) if lr_losses else None,
            float(np.mean(sr_losses)) if sr_losses else None,
            time.perf_counter() - t0,
        )
        if val_pairs:
            stats.val_sr_mse = sr_mse(model, val_pairs)
        history.epochs.append(stats)
        if checkpoint_dir is not None:
            d = Path(checkpoint_dir)
            model.save(d / "last.ckpt", {"epoch": epoch})
            score = stats.val_sr_mse if stats.val_sr_mse is not None else stats.loss_sr
            if score is not None and score < best:
                best = score
                model.save(d / "best.ckpt", {"epoch": epoch})
        if log is not None:
            log({"event": "epoch", **asdict(stats)})
        if stop_when is not None and stop_when(stats):
            break
    return history
