from __future__ import annotations

import csv
import hashlib
import io
import json

import pytest

from ecgsr import cli
from ecgsr.errors import ConfigError

TINY = ["--set", "n_records=4", "--set", "synth_classes=MI", "--set", "train_fraction=0.5",
        "--set", "width_multiplier=1/48", "--set", "epochs=1"]


def sha(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert cli.main(["train", *TINY, "--out", str(out)]) == 0
    return out


class TestHelp:
    @pytest.mark.parametrize("sub", [None, *cli.SUBCOMMANDS])
    def test_help_lists_every_key(self, sub, capsys):
        argv = ["--help"] if sub is None else [sub, "--help"]
        assert cli.main(argv) == 0
        text = capsys.readouterr().out
        for key in cli.KEYS:
            assert key in text, key

    def test_usage_error(self, capsys):
        assert cli.main(["frobnicate"]) == 2
        assert cli.main([]) == 2


class TestConfig:
    def test_unknown_key_exit(self, tmp_path):
        assert cli.main(["baseline", "--set", "widht=1", "--out", str(tmp_path)]) == 3

    def test_bad_value_exit(self, tmp_path):
        assert cli.main(["baseline", "--set", "n_records=many", "--out", str(tmp_path)]) == 3

    def test_unknown_key_in_file(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"nope": 1}))
        assert cli.main(["baseline", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 3

    def test_coerce(self):
        assert cli.coerce("denoising", "false") is False
        assert cli.coerce("synth_classes", "MI,NORM") == ("MI", "NORM") or \
            list(cli.coerce("synth_classes", "MI,NORM")) == ["MI", "NORM"]
        assert cli.coerce("lr", "1e-3") == 1e-3
        with pytest.raises(ConfigError):
            cli.coerce("epochs", "1.5")

    def test_toml_and_override_precedence(self, tmp_path):
        (tmp_path / "c.toml").write_text('epochs = 3\nlr = 0.001\n')
        file_values = cli.read_config_file(tmp_path / "c.toml")
        cfg = cli.resolve_config(file_values, ["epochs=5"], {"seed": 9})
        assert (cfg["epochs"], cfg["lr"], cfg["seed"]) == (5, 0.001, 9)

    def test_env_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
        assert cli.main(["baseline", "--set", "n_records=2", "--set", "synth_classes=MI"]) == 0
        assert (tmp_path / "envout" / "baselines.csv").is_file()


class TestSubcommands:
    def test_synth(self, tmp_path):
        assert cli.main(["synth", "--records", "3", "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(io.StringIO((tmp_path / "metadata.csv").read_text())))
        assert len(rows) == 3
        for suffix in ("_lr.hea", "_lr.dat", "_hr.hea", "_hr.dat"):
            assert len(list((tmp_path / "records").glob(f"*{suffix}"))) == 3

    def test_manifest_written(self, trained):
        m = json.loads((trained / "manifest.json").read_text())
        assert m["subcommand"] == "train" and m["config"]["epochs"] == 1
        assert "version" in m and "seed" in m

    def test_train_outputs(self, trained):
        for name in ("model.ckpt", "history.csv", "log.jsonl", "checkpoints/last.ckpt"):
            assert (trained / name).is_file(), name
        events = [json.loads(l)["event"] for l in (trained / "log.jsonl").read_text().splitlines()]
        assert "epoch" in events and events[-1] == "done"

    def test_train_rerun_identical(self, trained, tmp_path):
        assert cli.main(["train", *TINY, "--out", str(tmp_path)]) == 0
        assert sha(tmp_path / "model.ckpt") == sha(trained / "model.ckpt")

    def test_rerun_from_manifest(self, trained, tmp_path):
        assert cli.main(["train", "--config", str(trained / "manifest.json"), "--out", str(tmp_path)]) == 0
        assert sha(tmp_path / "model.ckpt") == sha(trained / "model.ckpt")

    def test_eval_and_missing(self, trained, tmp_path):
        ck = str(trained / "model.ckpt")
        assert cli.main(["eval", *TINY, "--checkpoint", ck, "--set", "triplets=1", "--out", str(tmp_path / "e")]) == 0
        assert (tmp_path / "e" / "eval.json").is_file()
        assert len(list((tmp_path / "e" / "triplets").glob("*.csv"))) == 1
        assert cli.main(["missing", *TINY, "--checkpoint", ck, "--set", "missing_rate=0.5",
                         "--out", str(tmp_path / "m")]) == 0
        assert (tmp_path / "m" / "missing.csv").is_file()

    def test_eval_deterministic(self, trained, tmp_path):
        ck = str(trained / "model.ckpt")
        for d in ("a", "b"):
            assert cli.main(["eval", *TINY, "--checkpoint", ck, "--out", str(tmp_path / d)]) == 0
        for name in ("eval.csv", "eval.json"):
            assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)

    def test_explain(self, trained, tmp_path):
        assert cli.main(["explain", *TINY, "--checkpoint", str(trained / "model.ckpt"), "--out", str(tmp_path)]) == 0
        assert len(list(tmp_path.glob("activations_*_input.csv"))) == 1
        assert len(list(tmp_path.glob("activations_*_clean.csv"))) == 1

    def test_missing_checkpoint(self, tmp_path, capsys):
        code = cli.main(["eval", "--checkpoint", str(tmp_path / "missing.bin"), "--out", str(tmp_path)])
        assert code == 4
        assert "missing.bin" in capsys.readouterr().err

    def test_preprocess_then_baseline(self, tmp_path):
        assert cli.main(["preprocess", *TINY, "--out", str(tmp_path / "p")]) == 0
        assert cli.main(["baseline", "--set", f"pairs_dir={tmp_path / 'p' / 'pairs'}",
                         "--set", "methods=cubic,fft_upsample", "--out", str(tmp_path / "b")]) == 0
        doc = json.loads((tmp_path / "b" / "baselines.json").read_text())
        assert {a["group"]["method"] for a in doc["aggregates"]} == {"cubic", "fft_upsample"}

    def test_ablate_deterministic(self, tmp_path):
        argv = ["ablate", *TINY, "--set", "axes=final_tanh"]
        for d in ("a", "b"):
            assert cli.main([*argv, "--out", str(tmp_path / d)]) == 0
        for name in ("ablation.csv", "ablation.json"):
            assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)

    def test_unknown_baseline_exit(self, tmp_path):
        assert cli.main(["baseline", "--set", "methods=magic", "--out", str(tmp_path)]) == 3
