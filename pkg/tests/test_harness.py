"""Metrics, equivariance evaluation, sweeps, Adam, training, checkpoints."""

import numpy as np
import pytest

from equisr.data import DatasetSpec
from equisr.diff import Tensor
from equisr.errors import CheckpointError, ConfigError, EvaluationError, MetricError
from equisr.groups import rotate_image
from equisr.image import Image
from equisr.inr import ModelConfig, build_model, super_resolve
from equisr.metrics import (
    aggregate,
    equivariance_error,
    nmae,
    nmse,
    psnr,
    sweep,
)
from equisr.training import (
    TrainState,
    adam_step,
    init_train_state,
    load_checkpoint,
    loss_log_csv,
    save_checkpoint,
    train,
)


class TestNormMetrics:
    def test_identical_images_give_zero(self):
        img = Image(np.random.default_rng(0).random((4, 4, 3)))
        assert nmse(img, img) == 0.0
        assert nmae(img, img) == 0.0

    def test_doubling_gives_one(self):
        img = Image(np.random.default_rng(1).random((4, 4, 3)) + 0.1)
        double = Image(2.0 * img.data)
        assert abs(nmse(double, img) - 1.0) <= 1e-12
        assert abs(nmae(double, img) - 1.0) <= 1e-12

    def test_three_four_vector(self):
        x0 = Image(np.array([[3.0, 4.0]])[:, :, None])
        xr = Image(np.zeros((1, 2, 1)))
        assert abs(nmse(xr, x0) - 1.0) <= 1e-15  # ||(-3,-4)||_2 / 5
        assert abs(nmae(xr, x0) - 1.0) <= 1e-15  # 7 / 7

    def test_zero_reference_rejected(self):
        z = Image(np.zeros((2, 2, 1)))
        with pytest.raises(MetricError):
            nmse(Image(np.ones((2, 2, 1))), z)

    def test_masked_metric(self):
        x0 = Image(np.ones((4, 4, 1)))
        xr = Image(np.ones((4, 4, 1)))
        xr.data[0, 0, 0] = 5.0  # corrupted corner
        mask = np.ones((4, 4), dtype=bool)
        mask[0, 0] = False
        assert nmse(xr, x0, mask) == 0.0
        assert nmse(xr, x0) > 0.0


class TestPsnr:
    def test_definition(self):
        a = Image(np.zeros((10, 10, 1)))
        b = Image(np.full((10, 10, 1), 0.1))  # MSE = 0.01
        assert abs(psnr(a, b) - 20.0) <= 1e-12

    def test_identical_is_inf(self):
        img = Image(np.random.default_rng(2).random((3, 3, 3)))
        assert psnr(img, img) == float("inf")

    def test_uniform_noise_matches_direct_mse(self):
        rng = np.random.default_rng(3)
        a = Image(rng.random((16, 16, 3)))
        noise = rng.uniform(-0.1, 0.1, size=a.data.shape)
        b = Image(np.clip(a.data + noise, 0, 1))
        mse = float(np.mean((a.data - b.data) ** 2))
        assert abs(psnr(a, b) - 10 * np.log10(1 / mse)) <= 1e-12


def _tiny_model(t=4, seed=0, eps=0.0):
    cfg = ModelConfig(variant="liif", t=t, n=8 // max(t // 4, 1) if t >= 4 else 8,
                      blocks=1, p=3, width=8, psi_widths=(8,), eps=eps)
    return build_model(cfg, seed=seed)


class TestEquivarianceError:
    def test_identity_rotation_is_exact_zero(self):
        model = _tiny_model()
        img = Image(np.random.default_rng(4).random((12, 12, 3)))
        entry = equivariance_error(model, img, 0.0, 2.0)
        assert entry.nmse == 0.0 and entry.nmae == 0.0

    def test_equivariant_model_quarter_turn(self):
        model = _tiny_model()
        img = Image(np.random.default_rng(5).random((16, 16, 3)))
        entry = equivariance_error(model, img, np.pi / 2, 2.0, eps=0.0)
        assert entry.nmse <= 1e-6

    def test_plain_model_quarter_turn_large_error(self):
        cfg = ModelConfig(variant="liif", t=1, n=32, blocks=2, p=5, eps=0.0)
        model = build_model(cfg, seed=6)
        img = Image(np.random.default_rng(6).random((16, 16, 3)))
        entry = equivariance_error(model, img, np.pi / 2, 2.0)
        assert entry.nmse >= 0.3

    def test_symmetry_under_inverse_rotation(self):
        model = _tiny_model(seed=7)
        img = Image(np.random.default_rng(7).random((12, 12, 3)))
        fwd = equivariance_error(model, img, np.pi / 2, 2.0, eps=0.0)
        back = equivariance_error(model, rotate_image(img, np.pi / 2), -np.pi / 2,
                                  2.0, eps=0.0)
        assert abs(fwd.nmse - back.nmse) <= 1e-10

    def test_error_map_shape(self):
        model = _tiny_model(seed=8)
        img = Image(np.random.default_rng(8).random((8, 8, 3)))
        entry = equivariance_error(model, img, np.pi, 2.0)
        assert entry.err_map.data.shape == (16, 16, 1)


class TestSweep:
    def _cfgs(self):
        return [("eq", ModelConfig(variant="liif", t=4, n=2, blocks=1, p=3,
                                   width=8, psi_widths=(8,), eps=0.0))]

    def test_single_point_grid(self):
        csv = sweep(self._cfgs(), [np.pi / 2], [2.0], [12], seeds=[0],
                    data=DatasetSpec(kind="shapes", count=1, size=48))
        lines = csv.strip().split("\n")
        assert lines[0].startswith("# equisr ")
        assert lines[1].startswith("model,variant,t,angle_rad")
        assert len(lines) == 3

    def test_full_cross_product(self):
        csv = sweep(self._cfgs(), [np.pi / 4, np.pi / 8], [2.0, 4.0], [12],
                    t_values=[4, 8], seeds=[0],
                    data=DatasetSpec(kind="shapes", count=1, size=48))
        lines = csv.strip().split("\n")
        assert len(lines) == 2 + 2 * 2 * 2  # header rows + t x angle x scale

    def test_byte_identical_across_runs(self):
        kw = dict(angles=[np.pi / 2], scales=[2.0], resolutions=[12],
                  seeds=[0, 1], data=DatasetSpec(kind="stripes", count=1, size=48))
        assert sweep(self._cfgs(), **kw) == sweep(self._cfgs(), **kw)

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            sweep(self._cfgs(), [], [2.0], [12], seeds=[0])

    def test_aggregate_mean_std(self):
        from equisr.metrics import EquivEntry
        dummy = Image(np.zeros((1, 1, 1)))
        entries = [EquivEntry(0, 2, 1.0, 2.0, dummy), EquivEntry(0, 2, 3.0, 4.0, dummy)]
        rep = aggregate(entries)
        assert rep.nmse_mean == 2.0 and abs(rep.nmse_std - np.sqrt(2.0)) <= 1e-12


class TestAdam:
    def test_zero_gradients_leave_parameters(self):
        params = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
        state = init_train_state(params)
        before = params["w"].data.copy()
        adam_step(state, {"w": np.zeros(2)}, lr=0.1)
        assert np.array_equal(params["w"].data, before)

    def test_first_step_is_signed_lr(self):
        g = np.array([0.3, -2.0, 5.0])
        params = {"w": Tensor(np.zeros(3), requires_grad=True)}
        state = init_train_state(params)
        adam_step(state, {"w": g}, lr=0.01)
        # bias correction makes the first update -lr * g/(|g| + eps')
        assert np.max(np.abs(params["w"].data + 0.01 * np.sign(g))) <= 1e-5

    def test_quadratic_descent_oracle(self):
        # independent scalar recurrence for f(w) = w^2 from w = 1
        w = np.array([1.0])
        params = {"w": Tensor(w.copy(), requires_grad=True)}
        state = init_train_state(params)
        w_ref, m_ref, v_ref = 1.0, 0.0, 0.0
        for step in range(100):
            g = 2.0 * params["w"].data.copy()
            adam_step(state, {"w": g}, lr=0.1)
            # reference recurrence
            g_ref = 2.0 * w_ref
            m_ref = 0.9 * m_ref + 0.1 * g_ref
            v_ref = 0.999 * v_ref + 0.001 * g_ref * g_ref
            mh = m_ref / (1 - 0.9 ** (step + 1))
            vh = v_ref / (1 - 0.999 ** (step + 1))
            w_ref -= 0.1 * mh / (np.sqrt(vh) + 1e-8)
            assert abs(params["w"].data[0] - w_ref) <= 1e-12
        assert abs(params["w"].data[0]) < 0.5


def _train_setup():
    cfg = ModelConfig(variant="liif", t=2, n=4, blocks=1, p=3, width=8,
                      psi_widths=(8,))
    data = DatasetSpec(kind="stripes", count=4, size=48, seed=0,
                       scale_lo=2.0, scale_hi=4.0)
    return cfg, data


class TestTrain:
    def test_bit_identical_loss_logs(self):
        cfg, data = _train_setup()
        a = train(cfg, data, steps=4, lr=1e-4, batch=2, patch=12, seed=3)
        b = train(cfg, data, steps=4, lr=1e-4, batch=2, patch=12, seed=3)
        assert loss_log_csv(a.loss_rows) == loss_log_csv(b.loss_rows)

    def test_learning_rate_never_increases(self):
        cfg, data = _train_setup()
        res = train(cfg, data, steps=7, lr=1e-3, decay_steps=3, batch=1,
                    patch=12, seed=0)
        lrs = [r[2] for r in res.loss_rows]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))
        assert lrs[0] == 1e-3 and lrs[-1] == 1e-3 * 0.25

    def test_non_finite_loss_aborts_with_step(self, monkeypatch):
        import equisr.training as training_mod
        cfg, data = _train_setup()
        real = training_mod.l1_loss
        calls = []

        def poisoned(pred, target):
            out = real(pred, target)
            calls.append(1)
            if len(calls) >= 3:  # third batch item = step index 2 at batch=1
                out.data = np.array(np.inf)
            return out

        monkeypatch.setattr(training_mod, "l1_loss", poisoned)
        with pytest.raises(EvaluationError) as exc:
            train(cfg, data, steps=6, batch=1, patch=12, seed=0)
        assert "step 2" in str(exc.value)

    def test_loss_history_matches_steps(self):
        cfg, data = _train_setup()
        res = train(cfg, data, steps=3, batch=1, patch=12, seed=1)
        assert len(res.state.loss_history) == res.state.step == 3


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = build_model(ModelConfig(variant="lte", t=2, n=4, blocks=1, p=3,
                                        width=8, psi_widths=(8,), K=4), seed=9)
        prefix = str(tmp_path / "ckpt")
        save_checkpoint(prefix, model)
        back = load_checkpoint(prefix + ".json")
        for name, p in model.named_parameters().items():
            assert np.array_equal(p.data, back.named_parameters()[name].data)
        assert back.cfg == model.cfg

    def test_missing_key_names_field(self, tmp_path):
        import json
        model = build_model(ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3,
                                        width=4, psi_widths=()), seed=0)
        prefix = str(tmp_path / "c")
        json_path, _ = save_checkpoint(prefix, model)
        from pathlib import Path
        doc = json.loads(Path(json_path).read_text())
        del doc["params"]
        Path(json_path).write_text(json.dumps(doc))
        with pytest.raises(CheckpointError) as exc:
            load_checkpoint(json_path)
        assert exc.value.field == "params"

    def test_shape_mismatch_names_parameter(self, tmp_path):
        import json
        model = build_model(ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3,
                                        width=4, psi_widths=()), seed=0)
        json_path, _ = save_checkpoint(str(tmp_path / "c"), model)
        from pathlib import Path
        doc = json.loads(Path(json_path).read_text())
        doc["params"][0]["shape"] = [1, 2, 3]
        Path(json_path).write_text(json.dumps(doc))
        with pytest.raises(CheckpointError) as exc:
            load_checkpoint(json_path)
        assert exc.value.field == doc["params"][0]["name"]

    def test_wrong_version_rejected(self, tmp_path):
        import json
        model = build_model(ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3,
                                        width=4, psi_widths=()), seed=0)
        json_path, _ = save_checkpoint(str(tmp_path / "c"), model)
        from pathlib import Path
        doc = json.loads(Path(json_path).read_text())
        doc["version"] = "equisr-ckpt-0"
        Path(json_path).write_text(json.dumps(doc))
        with pytest.raises(CheckpointError) as exc:
            load_checkpoint(json_path)
        assert exc.value.field == "version"
