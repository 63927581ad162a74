"""Finite-difference gradient suite covering every primitive and layer.

Each check builds a small scalar-valued function, runs the central-difference
comparison from `diff.check_gradients` at three seeds, and reports the worst
relative error against the 1e-4 tolerance.  The CLI `gradcheck` command exits
nonzero if any check fails.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import diff
from .encoder import EncoderParams, encode_t
from .filters import ParamFilter, group_conv_t, lifting_conv_t, synthesize_kernel
from .groups import make_group
from .inr import (
    INRModel,
    Latents,
    ModelConfig,
    _eval_local_batch,
    build_model,
    compute_latents,
    eval_global_batch,
)
from .training import l1_loss

GRAD_TOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= self.tol


def _check(name, fn, inputs, seeds=(0, 1, 2), tol=GRAD_TOL, step=1e-5):
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        tensors = [diff.Tensor(make(rng)) for make in inputs]
        worst = max(worst, diff.check_gradients(fn, tensors, step=step, seed=seed))
    return CheckResult(name, worst, tol)


def _primitive_checks() -> list[CheckResult]:
    def n(*s):
        return lambda rng: rng.standard_normal(s)

    idx = np.array([2, 0, 1, 0])
    cases = [
        ("add", lambda a, b: diff.reduce_sum(diff.mul(diff.add(a, b), diff.add(a, b))),
         [n(3, 4), n(3, 4)]),
        ("add.broadcast", lambda a, b: diff.reduce_sum(diff.sin(diff.add(a, b))),
         [n(3, 4), n(1, 4)]),
        ("sub", lambda a, b: diff.reduce_sum(diff.mul(diff.sub(a, b), diff.sub(a, b))),
         [n(3, 4), n(4,)]),
        ("mul", lambda a, b: diff.reduce_sum(diff.mul(a, b)), [n(5,), n(5,)]),
        ("matmul", lambda a, b: diff.reduce_sum(diff.sin(diff.matmul(a, b))),
         [n(3, 4), n(4, 2)]),
        ("matmul.vec", lambda a, b: diff.reduce_sum(diff.matmul(a, b)), [n(3, 4), n(4,)]),
        ("conv2d.valid", lambda x, k: diff.reduce_sum(diff.sin(diff.conv2d(x, k, pad="valid"))),
         [n(6, 6, 2), n(3, 2, 3, 3)]),
        ("conv2d.same", lambda x, k: diff.reduce_sum(diff.sin(diff.conv2d(x, k, pad="same"))),
         [n(5, 5, 2), n(2, 2, 3, 3)]),
        ("relu", lambda x: diff.reduce_sum(diff.mul(diff.relu(x), diff.relu(x))), [n(4, 4)]),
        ("sin", lambda x: diff.reduce_sum(diff.sin(x)), [n(7,)]),
        ("cos", lambda x: diff.reduce_sum(diff.cos(x)), [n(7,)]),
        ("concat", lambda a, b: diff.reduce_sum(diff.sin(diff.concat([a, b], axis=1))),
         [n(2, 3), n(2, 4)]),
        ("sum.axes", lambda x: diff.reduce_sum(diff.sin(diff.reduce_sum(x, axes=1))),
         [n(3, 4, 2)]),
        ("scale", lambda x: diff.reduce_sum(diff.scale(diff.sin(x), 2.5)), [n(6,)]),
        ("gather", lambda x: diff.reduce_sum(diff.sin(diff.gather(x, idx, axis=0))), [n(3, 4)]),
        ("reshape", lambda x: diff.reduce_sum(diff.sin(diff.reshape(x, (6, 2)))), [n(3, 4)]),
        ("transpose", lambda x: diff.reduce_sum(diff.sin(diff.transpose(x, (1, 0, 2)))),
         [n(3, 4, 2)]),
        ("abs", lambda x: diff.reduce_sum(diff.absolute(x)), [n(9,)]),
    ]
    return [_check(name, fn, inputs) for name, fn, inputs in cases]


def _filter_checks() -> list[CheckResult]:
    g4, g2 = make_group(4), make_group(2)
    c45, s45 = np.cos(np.pi / 4), np.sin(np.pi / 4)
    A45 = np.array([[c45, s45], [-s45, c45]])

    def synth(coeffs):
        return diff.reduce_sum(diff.sin(synthesize_kernel(ParamFilter(coeffs), A45)))

    def lift(x, coeffs):
        return diff.reduce_sum(diff.sin(lifting_conv_t(x, ParamFilter(coeffs), g4, pad="same")))

    def gconv(x, coeffs):
        return diff.reduce_sum(diff.sin(group_conv_t(x, ParamFilter(coeffs), g2, pad="valid")))

    return [
        _check("filters.synthesize", synth, [lambda r: r.standard_normal((2, 1, 1, 5, 5))]),
        _check("filters.lifting_conv", lift, [lambda r: r.standard_normal((6, 6, 3)),
                                              lambda r: r.standard_normal((2, 1, 3, 3, 3))]),
        _check("filters.group_conv", gconv, [lambda r: r.standard_normal((5, 5, 2, 2)),
                                             lambda r: r.standard_normal((2, 2, 2, 3, 3))]),
    ]


def _layer_checks() -> list[CheckResult]:
    x_loc = np.random.default_rng(99).uniform(-1, 1, size=(3, 2))
    out = []
    for variant in ("liif", "ope", "lte"):
        cfg = ModelConfig(variant=variant, t=4, n=2, blocks=1, p=3, width=6,
                          psi_widths=(6,), K=2, k_max=1, L=1 if variant == "liif" else 0)
        model = build_model(cfg, seed=0)

        if variant == "lte":
            def local(amp, freq, _m=model):
                lat = Latents("lte", amp=amp, freq=freq)
                return diff.reduce_sum(diff.sin(_eval_local_batch(_m.inr, lat, x_loc)))

            inputs = [lambda r: r.standard_normal((3, cfg.t, 2 * cfg.K)),
                      lambda r: r.standard_normal((3, cfg.t, 2 * cfg.K))]
        else:
            n_lat = cfg.n if variant == "liif" else 3 * (2 * cfg.k_max + 1) ** 2

            def local(latq, _m=model, _v=variant):
                lat = Latents(_v, main=latq)
                return diff.reduce_sum(diff.sin(_eval_local_batch(_m.inr, lat, x_loc)))

            inputs = [lambda r, nl=n_lat: r.standard_normal((3, cfg.t, nl))]
        out.append(_check(f"inr.local.{variant}", local, inputs))
    return out


def _composite_checks() -> list[CheckResult]:
    cfg = ModelConfig(variant="liif", t=2, n=2, blocks=1, p=3, width=4,
                      psi_widths=(4,), eps=1e-7)
    model = build_model(cfg, seed=0)
    rng = np.random.default_rng(5)
    img = rng.random((6, 6, 3))
    coords = rng.uniform(-0.9, 0.9, size=(8, 2))
    targets = rng.random((8, 3))

    def swap_encoder(head_w, block_w) -> EncoderParams:
        filters = dict(model.encoder.filters)
        filters["head"] = ParamFilter(head_w)
        filters["block0.conv0"] = ParamFilter(block_w)
        return EncoderParams(model.encoder.cfg, model.encoder.group,
                             filters, model.encoder.biases)

    def encoder_loss(head_w, block_w):
        feat = encode_t(swap_encoder(head_w, block_w), diff.constant(img))
        return diff.reduce_sum(diff.sin(feat))

    def pipeline_loss(head_w, w_in, psi0_w):
        enc = swap_encoder(head_w, model.encoder.filters["block0.conv0"].coeffs)
        psi = [(psi0_w, model.inr.psi[0][1])] + model.inr.psi[1:]
        inr = replace(model.inr, W_in=w_in, psi=psi)
        m2 = INRModel(cfg, model.group, enc, inr)
        feat = encode_t(enc, diff.constant(img))
        lats = compute_latents(m2, feat)
        pred = eval_global_batch(m2, lats, coords)
        return l1_loss(pred, targets)

    scale = 0.4  # keep pre-activations away from systematic kinks
    return [
        _check("encoder.encode", encoder_loss,
               [lambda r: r.standard_normal((2, 1, 3, 3, 3)) * scale,
                lambda r: r.standard_normal((2, 2, 2, 3, 3)) * scale]),
        _check("pipeline.l1", pipeline_loss,
               [lambda r: r.standard_normal((2, 1, 3, 3, 3)) * scale,
                lambda r: r.standard_normal((cfg.t, cfg.width, cfg.n + 2)) * scale,
                lambda r: r.standard_normal((cfg.psi_widths[0], cfg.width)) * scale]),
    ]


def run_all(module: str | None = None) -> list[CheckResult]:
    groups = {
        "diff": _primitive_checks,
        "filters": _filter_checks,
        "inr": _layer_checks,
        "encoder": _composite_checks,
    }
    if module is not None:
        if module not in groups:
            raise KeyError(f"unknown gradcheck module {module!r} (choose from {sorted(groups)})")
        return groups[module]()
    results = []
    for fn in groups.values():
        results.extend(fn())
    return results
