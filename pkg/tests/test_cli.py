"""End-to-end CLI behavior: commands, file outputs, exit codes."""

import json
import os

import numpy as np
import pytest

from equisr.cli import main
from equisr.data import read_image, write_image
from equisr.image import Image
from equisr.inr import ModelConfig, build_model
from equisr.training import save_checkpoint


def _write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestGenData:
    def test_writes_count_files_and_manifest(self, tmp_path):
        cfg = _write_config(tmp_path, {
            "data": {"kind": "shapes", "count": 3, "size": 16,
                     "scale_range": [1.0, 1.0]},
        })
        out = tmp_path / "corpus"
        assert main(["gen-data", "--config", cfg, "--out", str(out)]) == 0
        files = sorted(os.listdir(out))
        assert files == ["img_00000.ppm", "img_00001.ppm", "img_00002.ppm",
                         "manifest.csv"]
        # files decode as valid P6
        img = read_image(str(out / "img_00000.ppm"))
        assert (img.h, img.w, img.c) == (16, 16, 3)

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = _write_config(tmp_path, {
            "data": {"kind": "stripes", "count": 2, "size": 12,
                     "scale_range": [1.0, 1.0]},
        })
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["gen-data", "--config", cfg, "--out", str(out1)])
        main(["gen-data", "--config", cfg, "--out", str(out2)])
        for name in os.listdir(out1):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestEvalEquiv:
    def test_equivariant_model_quarter_turn(self, tmp_path):
        cfg = _write_config(tmp_path, {
            "model": {"t": 4, "encoder": {"blocks": 1, "n": 2, "p": 3}},
            "eval": {"angles_deg": [90.0], "scales": [2.0], "resolutions": [12],
                     "seeds": [0], "eps": 0.0},
        })
        out = tmp_path / "r.csv"
        assert main(["eval-equiv", "--config", cfg, "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("# equisr ")
        row = lines[2].split(",")
        assert float(row[7]) <= 1e-6  # nmse_mean

    def test_empty_angle_list_is_usage_error(self, tmp_path):
        cfg = _write_config(tmp_path, {"eval": {"angles_deg": []}})
        assert main(["eval-equiv", "--config", cfg, "--out",
                     str(tmp_path / "r.csv")]) == 1

    def test_error_maps_written(self, tmp_path):
        cfg = _write_config(tmp_path, {
            "model": {"t": 2, "encoder": {"blocks": 1, "n": 2, "p": 3}},
            "eval": {"angles_deg": [180.0], "scales": [2.0], "resolutions": [8],
                     "seeds": [0], "eps": 0.0},
        })
        maps_dir = tmp_path / "maps"
        assert main(["eval-equiv", "--config", cfg, "--out",
                     str(tmp_path / "r.csv"), "--error-maps", str(maps_dir)]) == 0
        files = sorted(os.listdir(maps_dir))
        assert "scales.csv" in files
        assert any(f.endswith(".pgm") for f in files)

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = _write_config(tmp_path, {"modle": {}})
        assert main(["eval-equiv", "--config", cfg, "--out",
                     str(tmp_path / "r.csv")]) == 1


class TestTrainAndSr:
    def test_train_then_eval_preserves_equivariance(self, tmp_path):
        cfg = _write_config(tmp_path, {
            "model": {"t": 4, "encoder": {"blocks": 1, "n": 2, "p": 3},
                      "inr": {"widths": [8, 8]}},
            "data": {"kind": "stripes", "count": 2, "size": 48},
            "train": {"steps": 3, "batch": 1, "patch": 12},
            "eval": {"angles_deg": [90.0], "scales": [2.0], "resolutions": [12],
                     "seeds": [0], "eps": 0.0},
        })
        out = tmp_path / "run"
        assert main(["train", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "ckpt.json").exists() and (out / "ckpt.bin").exists()
        loss_lines = (out / "loss.csv").read_text().strip().split("\n")
        assert loss_lines[1] == "step,loss,lr" and len(loss_lines) == 5

        result = tmp_path / "after.csv"
        assert main(["eval-equiv", "--config", cfg, "--ckpt",
                     str(out / "ckpt.json"), "--out", str(result)]) == 0
        row = result.read_text().strip().split("\n")[2].split(",")
        assert float(row[7]) <= 1e-6

    def test_sr_shape_contract(self, tmp_path):
        model = build_model(ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3,
                                        width=8, psi_widths=(8,)), seed=0)
        ckpt, _ = save_checkpoint(str(tmp_path / "m"), model)
        rng = np.random.default_rng(0)
        write_image(str(tmp_path / "in.ppm"),
                    Image(rng.integers(0, 256, (20, 20, 3)) / 255.0))
        out = tmp_path / "out.ppm"
        assert main(["sr", "--ckpt", ckpt, "--in", str(tmp_path / "in.ppm"),
                     "--scale", "2.5", "--out", str(out)]) == 0
        img = read_image(str(out))
        assert (img.h, img.w) == (50, 50)

    def test_sr_missing_input_is_io_error(self, tmp_path):
        model = build_model(ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3,
                                        width=8, psi_widths=(8,)), seed=0)
        ckpt, _ = save_checkpoint(str(tmp_path / "m"), model)
        assert main(["sr", "--ckpt", ckpt, "--in", str(tmp_path / "nope.ppm"),
                     "--scale", "2", "--out", str(tmp_path / "o.ppm")]) == 2

    def test_corrupt_checkpoint_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"version": "equisr-ckpt-1"}))
        assert main(["sr", "--ckpt", str(bad), "--in", "x.ppm",
                     "--scale", "2", "--out", "y.ppm"]) == 3


class TestGradcheckAndDefaults:
    def test_gradcheck_module_exits_zero(self, capsys):
        assert main(["gradcheck", "--module", "filters"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_gradcheck_unknown_module_usage_error(self):
        assert main(["gradcheck", "--module", "nonsense"]) == 1

    def test_defaults_json(self, tmp_path):
        out = tmp_path / "defaults.json"
        assert main(["defaults", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"model", "data", "train", "eval"}

    def test_usage_error_exit_code(self):
        assert main(["no-such-command"]) == 1

    def test_help_available(self, capsys):
        assert main(["--help"]) == 0
        assert "equisr" in capsys.readouterr().out
        assert main(["train", "--help"]) == 0
        assert "--config" in capsys.readouterr().out
