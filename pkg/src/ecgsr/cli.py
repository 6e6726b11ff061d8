"""``ecgsr`` command line: config-driven runs of the whole pipeline.

Every subcommand resolves a flat snake_case config (defaults < config file
< ``--set key=value`` < dedicated flags), writes ``manifest.json`` into the
output directory, then does its work. Log lines are JSON objects on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import MISSING, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from ._runtime import tune_allocator
from .errors import (
    ConfigError,
    DatasetError,
    EcgsrError,
    RecordError,
    WfdbError,
)
from .experiments import (
    BASELINES,
    MissingChannelConfig,
    PipelineConfig,
    ablation_suite,
    activation_csv,
    activation_maps,
    channel_sweep,
    evaluate,
    export_triplets,
    load_pairs,
    missing_channel_experiment,
    rate_sweep,
    run_baselines,
    run_preprocessing,
    save_pairs,
    select,
    write_synthetic_dataset,
)
from .model import DcaeSr, DcaeSrConfig, build, train
from .nn.checkpoint import CheckpointError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4, 5
OUT_ENV = "ECGSR_OUT"
DEFAULT_OUT = "ecgsr-out"
SUBCOMMANDS = ("synth", "preprocess", "train", "eval", "baseline", "missing", "ablate", "explain")
EVAL_SPLITS = ("train", "validation", "test", "heldout", "all")

CONFIG_CODES = {"BAD_CONFIG", "BAD_WIDTH", "MODE_CONFLICT", "UNKNOWN_KEY", "BAD_VALUE", "UNKNOWN_METHOD",
                "EMPTY_AXES", "BAD_FRACTION", "BAD_SPEC", "UNKNOWN_LEAD", "UNKNOWN_CLASS", "BAD_CONFIG_FILE"}


# -- config keys ------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    name: str
    kind: str  # bool | int | float | str | optional-str | str-list | float-list
    default: Any
    help: str
    owner: str  # "pipeline", "model" or "run"


_PIPELINE_HELP = {
    "source": "synthetic | wfdb-dir",
    "data_dir": "directory holding metadata.csv and WFDB records (wfdb-dir source)",
    "n_records": "number of synthetic records",
    "record_seconds": "synthetic record duration",
    "synth_classes": "superclasses cycled over synthetic records",
    "synth_seed": "seed of the synthetic generator",
    "window_seconds": "window length",
    "source_lr_fs": "sampling rate of the stored low-rate stream",
    "lr_fs": "model input rate after decimation",
    "hr_fs": "target rate (10 x lr_fs)",
    "lr_highpass_hz": "high-pass cutoff for the low-rate stream",
    "hr_band_hz": "band-pass edges for the high-rate stream",
    "corrupt_probability": "probability that a window gets an artifact",
    "kind_weights": "relative weights of BW, EMG, EDA artifacts",
    "corruption_seed": "seed of the corruption draws",
    "train_class": "superclass split into train/validation; others become test",
    "train_fraction": "share of train_class records used for training",
    "split_seed": "seed of the record split",
    "out_dir": "output directory (flag --out, env " + OUT_ENV + ")",
}
_MODEL_HELP = {
    "width_multiplier": "channel scale, e.g. 1, 1/4, 1/8",
    "denoising": "train corrupted input -> clean targets",
    "use_sr_decoder": "use the super-resolution decoder (else cubic upsampling of the LR branch)",
    "loss_mode": "LR | HR | LR_PLUS_HR",
    "final_tanh": "tanh after the last layer of each decoder",
    "inner_activation": "relu | tanh",
    "sr_inner_activation": "override activation inside the SR decoder",
    "dropout_rate": "dropout rate of the dropout layers",
    "lr": "Adam learning rate",
    "epochs": "training epochs",
    "batch_size": "examples per step (only 1)",
    "seed": "model init / dropout / shuffle seed (flag --seed)",
    "loss_weight_lr": "weight of the LR loss term",
    "loss_weight_sr": "weight of the SR loss term",
    "normalize": "scale each input window to [-1, 1] before the network",
    "bias_init": "uniform | zero",
    "lr_length": "LR window length in samples",
}
_RUN_KEYS = [
    Key("pairs_dir", "optional-str", None, "pair set written by `preprocess` (else preprocess in-process)", "run"),
    Key("checkpoint", "optional-str", None, "model checkpoint for eval/missing/explain (flag --checkpoint)", "run"),
    Key("eval_split", "str", "heldout", "split scored by eval/baseline/missing/ablate: " + " | ".join(EVAL_SPLITS), "run"),
    Key("group_by", "optional-str", "superclass", "eval grouping column (empty for none)", "run"),
    Key("methods", "str-list", ["cubic", "bandpass+cubic"], "baselines: " + ", ".join(BASELINES), "run"),
    Key("missing_rate", "float", 0.0, "probability of masking a lead", "run"),
    Key("missing_seed", "int", 0, "seed of the masking draws", "run"),
    Key("target_channel", "optional-str", None, "only this lead may be masked", "run"),
    Key("sweep", "str", "none", "missing: none | channel (every lead at missing_rate) | rate (rates on target_channel)", "run"),
    Key("rates", "float-list", [0.0, 0.2, 0.4, 0.6, 0.8, 0.9], "missing-rate sweep values", "run"),
    Key("axes", "str-list", ["denoising", "use_sr_decoder"], "ablation axes: denoising, use_sr_decoder, loss_mode, final_tanh", "run"),
    Key("window_index", "int", 0, "explain: position of the window within the scored split", "run"),
    Key("triplets", "int", 0, "export this many (input, target, prediction) CSVs", "run"),
]


def _kind(owner_cls, f) -> str:
    t = str(f.type)
    if "tuple" in t:
        return "float-list" if "float" in t else "str-list"
    if t.startswith("Optional"):
        return "optional-str"
    return {"bool": "bool", "int": "int", "float": "float"}.get(t, "str")


def _dataclass_keys(cls, owner: str, helps: dict) -> list[Key]:
    out = []
    for f in fields(cls):
        default = f.default if f.default is not MISSING else f.default_factory()
        if isinstance(default, tuple):
            default = list(default)
        out.append(Key(f.name, _kind(cls, f), default, helps.get(f.name, ""), owner))
    return out


KEYS: dict[str, Key] = {k.name: k for k in (
    _dataclass_keys(PipelineConfig, "pipeline", _PIPELINE_HELP)
    + _dataclass_keys(DcaeSrConfig, "model", _MODEL_HELP)
    + _RUN_KEYS
)}


def keys_help() -> str:
    lines = ["config keys (config file or --set key=value):"]
    for k in KEYS.values():
        lines.append(f"  {k.name:<20} {k.kind:<12} default={json.dumps(k.default)}  {k.help}")
    return "\n".join(lines)


def coerce(name: str, value: Any) -> Any:
    """Convert a config-file or command-line value to the key's type."""
    if name not in KEYS:
        raise ConfigError("UNKNOWN_KEY", f"unknown config key {name!r}")
    kind = KEYS[name].kind
    try:
        if kind == "bool":
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if kind == "optional-str":
            return None if value is None or str(value).strip() in ("", "none", "None") else str(value)
        if kind in ("str-list", "float-list"):
            items = value if isinstance(value, (list, tuple)) else [v for v in str(value).split(",") if v.strip()]
            conv = float if kind == "float-list" else (lambda v: str(v).strip())
            return [conv(v) for v in items]
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError("BAD_VALUE", f"{name}: cannot read {value!r} as {kind}") from exc


def read_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError("BAD_CONFIG_FILE", f"cannot read {path}: {exc.strerror}") from exc
    try:
        if path.suffix == ".toml":
            doc = tomllib.loads(raw.decode())
        else:
            doc = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError("BAD_CONFIG_FILE", f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("BAD_CONFIG_FILE", f"{path}: top level must be a table")
    if "subcommand" in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]  # a manifest from an earlier run
    return doc


def resolve_config(file_values: dict, overrides: Sequence[str], flags: dict) -> dict:
    cfg = {k.name: k.default for k in KEYS.values()}
    for k, v in file_values.items():
        cfg[k] = coerce(k, v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("BAD_VALUE", f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = coerce(k.strip(), v)
    for k, v in flags.items():
        if v is not None:
            cfg[k] = coerce(k, v)
    if cfg["eval_split"] not in EVAL_SPLITS:
        raise ConfigError("BAD_VALUE", f"eval_split must be one of {EVAL_SPLITS}")
    return cfg


def pipeline_config(cfg: dict) -> PipelineConfig:
    vals = {k: cfg[k] for k, key in KEYS.items() if key.owner == "pipeline"}
    for k in ("synth_classes", "hr_band_hz", "kind_weights"):
        vals[k] = tuple(vals[k])
    return PipelineConfig(**vals)


def model_config(cfg: dict) -> DcaeSrConfig:
    c = DcaeSrConfig(**{k: cfg[k] for k, key in KEYS.items() if key.owner == "model"})
    c.validate()
    return c


# -- run plumbing -----------------------------------------------------------

def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_hashes(cfg: dict, config_path: str | None) -> dict[str, str]:
    paths: list[Path] = []
    if config_path:
        paths.append(Path(config_path))
    if cfg.get("checkpoint"):
        paths.append(Path(cfg["checkpoint"]))
    if cfg.get("pairs_dir"):
        d = Path(cfg["pairs_dir"])
        paths += [d / n for n in ("pairs.csv", "lr.npy", "lr_clean.npy", "hr.npy")]
    if cfg.get("source") == "wfdb-dir" and cfg.get("data_dir"):
        paths.append(Path(cfg["data_dir"]) / "metadata.csv")
    return {str(p): _hash_file(p) for p in paths if p.is_file()}


def write_manifest(out: Path, subcommand: str, cfg: dict, config_path: str | None) -> Path:
    doc = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "inputs": input_hashes(cfg, config_path),
    }
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


class JsonLog:
    def __init__(self, stream=None, path: Path | None = None):
        self.stream = stream if stream is not None else sys.stderr
        self.fh = open(path, "w") if path is not None else None

    def __call__(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, default=str)
        print(line, file=self.stream, flush=True)
        if self.fh:
            self.fh.write(line + "\n")
            self.fh.flush()

    def close(self) -> None:
        if self.fh:
            self.fh.close()


def _pairs(cfg: dict):
    if cfg["pairs_dir"]:
        return load_pairs(cfg["pairs_dir"])
    return run_preprocessing(pipeline_config(cfg))


def _split(pairs, split: str):
    if split == "all":
        return list(pairs)
    if split == "heldout":
        return [p for p in pairs if p.split != "train"]
    return select(pairs, split)


def _load_model(cfg: dict) -> DcaeSr:
    if not cfg["checkpoint"]:
        raise ConfigError("BAD_VALUE", "this subcommand needs --checkpoint")
    return DcaeSr.load(cfg["checkpoint"])


# -- subcommands ------------------------------------------------------------

def cmd_synth(cfg: dict, out: Path, log: JsonLog) -> None:
    index = write_synthetic_dataset(pipeline_config(cfg), out)
    log({"event": "synth", "records": len(index), "out": str(out)})


def cmd_preprocess(cfg: dict, out: Path, log: JsonLog) -> None:
    pairs = run_preprocessing(pipeline_config(cfg))
    save_pairs(pairs, out / "pairs")
    log({"event": "preprocess", "pairs": len(pairs), "corrupted": sum(p.corrupted for p in pairs)})


def cmd_train(cfg: dict, out: Path, log: JsonLog) -> None:
    mc = model_config(cfg)
    pairs = _pairs(cfg)
    tr, val = select(pairs, "train"), select(pairs, "validation")
    if not tr:
        raise DatasetError("EMPTY_SET", "no training pairs in the train split")
    model = build(mc)
    log({"event": "train_start", "train_pairs": len(tr), "val_pairs": len(val), "params": model.param_count()})
    history = train(model, tr, val_pairs=val or None, checkpoint_dir=out / "checkpoints", log=log)
    model.save(out / "model.ckpt", {"epoch": len(history) - 1})
    lines = ["epoch,loss_lr,loss_sr,val_sr_mse"]
    for e in history.epochs:
        lines.append(",".join("" if v is None else repr(v) for v in (e.epoch, e.loss_lr, e.loss_sr, e.val_sr_mse)))
    (out / "history.csv").write_text("\n".join(lines) + "\n")
    log({"event": "train_done", "checkpoint": str(out / "model.ckpt")})


def _finish(report, out: Path, stem: str, log: JsonLog, cfg: dict) -> None:
    # reports identify inputs by content, not location, so reruns elsewhere match byte for byte
    run = {k: cfg[k] for k in sorted(cfg) if k not in ("out_dir", "checkpoint")}
    if cfg["checkpoint"]:
        run["checkpoint_sha256"] = _hash_file(Path(cfg["checkpoint"]))
    report.config = {**report.config, "run": run}
    c, j = report.write(out, stem)
    log({"event": "report", "csv": str(c), "json": str(j), "rows": len(report.rows),
         "seconds": round(report.runtime, 3)})


def cmd_eval(cfg: dict, out: Path, log: JsonLog) -> None:
    model = _load_model(cfg)
    pairs = _split(_pairs(cfg), cfg["eval_split"])
    report = evaluate(model, pairs, cfg["group_by"] or None)
    _finish(report, out, "eval", log, cfg)
    if cfg["triplets"]:
        export_triplets(model, pairs, out / "triplets", cfg["triplets"])


def cmd_baseline(cfg: dict, out: Path, log: JsonLog) -> None:
    pairs = _split(_pairs(cfg), cfg["eval_split"])
    report = run_baselines(pairs, cfg["methods"], group_by=cfg["group_by"] or None)
    _finish(report, out, "baselines", log, cfg)
    if cfg["triplets"]:
        for m in cfg["methods"]:
            export_triplets(m, pairs, out / "triplets" / m.replace("+", "_"), cfg["triplets"])


def cmd_missing(cfg: dict, out: Path, log: JsonLog) -> None:
    model = _load_model(cfg)
    pairs = _split(_pairs(cfg), cfg["eval_split"])
    if cfg["sweep"] == "channel":
        report = channel_sweep(model, pairs, cfg["missing_rate"], cfg["missing_seed"])
    elif cfg["sweep"] == "rate":
        if not cfg["target_channel"]:
            raise ConfigError("BAD_VALUE", "sweep=rate needs target_channel")
        report = rate_sweep(model, pairs, cfg["target_channel"], cfg["rates"], cfg["missing_seed"])
    elif cfg["sweep"] == "none":
        mcc = MissingChannelConfig(cfg["missing_rate"], cfg["missing_seed"], 1, cfg["target_channel"])
        report = missing_channel_experiment(model, pairs, mcc)
    else:
        raise ConfigError("BAD_VALUE", "sweep must be none, channel or rate")
    _finish(report, out, "missing", log, cfg)


def cmd_ablate(cfg: dict, out: Path, log: JsonLog) -> None:
    base = model_config(cfg)
    pairs = _pairs(cfg)
    tr = select(pairs, "train")
    test = _split(pairs, cfg["eval_split"])
    report = ablation_suite(base, cfg["axes"], tr, test, log=log)
    _finish(report, out, "ablation", log, cfg)


def cmd_explain(cfg: dict, out: Path, log: JsonLog) -> None:
    model = _load_model(cfg)
    pairs = _split(_pairs(cfg), cfg["eval_split"])
    i = cfg["window_index"]
    if not 0 <= i < len(pairs):
        raise DatasetError("EMPTY_SET", f"window_index {i} out of range (0..{len(pairs) - 1})")
    pair = pairs[i]
    for tag, p in (("input", pair), ("clean", pair.clean())):
        maps = activation_maps(model, p)
        path = out / f"activations_{pair.window_id}_{tag}.csv"
        path.write_text(activation_csv(maps, p.lr.samples, p.lr.fs))
        log({"event": "activation_map", "window_id": pair.window_id, "variant": tag, "path": str(path),
             "corrupted": p.corrupted, "artifact_kind": p.artifact_kind})


COMMANDS: dict[str, Callable[[dict, Path, JsonLog], None]] = {
    "synth": cmd_synth, "preprocess": cmd_preprocess, "train": cmd_train, "eval": cmd_eval,
    "baseline": cmd_baseline, "missing": cmd_missing, "ablate": cmd_ablate, "explain": cmd_explain,
}

_DESCRIPTIONS = {
    "synth": "write synthetic WFDB record pairs and metadata.csv",
    "preprocess": "filter, window, decimate and corrupt records into a pair set",
    "train": "train a model on the train split",
    "eval": "score a checkpoint, grouped by superclass",
    "baseline": "score the interpolation baselines",
    "missing": "missing-channel robustness experiment",
    "ablate": "train and score each ablation variant",
    "explain": "export per-layer activation maps for one window",
}


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="ecgsr", description=__doc__.splitlines()[0],
                                     epilog=keys_help(), formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"ecgsr {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_DESCRIPTIONS[name], description=_DESCRIPTIONS[name],
                           epilog=keys_help(), formatter_class=fmt)
        p.add_argument("--config", help="TOML or JSON file of config keys (a previous manifest.json works too)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=int, help="model seed")
        if name in ("eval", "missing", "explain"):
            p.add_argument("--checkpoint", help="model checkpoint file")
        if name == "synth":
            p.add_argument("--records", type=int, help="number of synthetic records")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    tune_allocator()
    log = JsonLog()
    try:
        flags = {"seed": args.seed, "checkpoint": getattr(args, "checkpoint", None),
                 "n_records": getattr(args, "records", None)}
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(file_values, args.overrides, flags)
        out = Path(args.out or cfg["out_dir"] or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        cfg["out_dir"] = str(out)
        write_manifest(out, args.subcommand, cfg, args.config)
        log = JsonLog(path=out / "log.jsonl")
        log({"event": "start", "subcommand": args.subcommand, "version": __version__})
        t0 = time.perf_counter()
        COMMANDS[args.subcommand](cfg, out, log)
        log({"event": "done", "subcommand": args.subcommand, "seconds": round(time.perf_counter() - t0, 3)})
        return EXIT_OK
    except Exception as exc:  # mapped to exit codes below
        code = exit_code(exc)
        log({"event": "error", "exit_code": code, "error": type(exc).__name__,
             "code": getattr(exc, "code", None), "message": str(exc)})
        return code
    finally:
        log.close()


def exit_code(exc: BaseException) -> int:
    code = getattr(exc, "code", None)
    if isinstance(exc, EcgsrError):
        if isinstance(exc, ConfigError) or code in CONFIG_CODES:
            return EXIT_CONFIG
        if isinstance(exc, (DatasetError, WfdbError, RecordError, CheckpointError)) or code in (
                "SOURCE_EMPTY", "FS_MISMATCH", "EMPTY_SET", "EMPTY_DATASET"):
            return EXIT_DATA
        return EXIT_RUNTIME
    if isinstance(exc, OSError):
        return EXIT_DATA
    return EXIT_RUNTIME


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
