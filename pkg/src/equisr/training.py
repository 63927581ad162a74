"""Adam optimizer, the patch-sampling training loop, and checkpoints.

Training minimizes the mean L1 error on sampled query pixels.  The learning
rate halves every `decay_steps` steps and never increases.  Runs are pure
functions of (config, seed): the per-step batch is drawn from a generator
seeded with (seed, step), so identical seeds give bit-identical loss logs.

Checkpoints are a JSON manifest (version "equisr-ckpt-1", model config, and
one record per parameter with name/shape/dtype/byte offset) plus a single
little-endian raw blob; the round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__, diff
from .data import DatasetSpec, sample_patch_pairs
from .diff import Tape, Tensor, backward
from .encoder import encode_t
from .errors import CheckpointError, ContractError, EvaluationError
from .inr import (
    INRModel,
    ModelConfig,
    build_model,
    compute_latents,
    eval_global_batch,
    slice_latents,
)


@dataclass
class TrainState:
    """Optimizer state; moments are shaped like the parameters."""

    step: int
    params: dict[str, Tensor]
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    loss_history: list[float] = field(default_factory=list)
    seed: int = 0


def init_train_state(params: dict[str, Tensor], seed: int = 0) -> TrainState:
    return TrainState(
        step=0,
        params=params,
        m={k: np.zeros(p.shape) for k, p in params.items()},
        v={k: np.zeros(p.shape) for k, p in params.items()},
        seed=seed,
    )


def adam_step(state: TrainState, grads: dict[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps_a: float = 1e-8) -> TrainState:
    """One bias-corrected Adam update (parameters updated in place)."""
    t = state.step + 1
    for name, p in state.params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        elif isinstance(g, Tensor):
            g = g.data
        if g.shape != p.shape:
            raise ContractError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / (1.0 - beta1 ** t)
        v_hat = state.v[name] / (1.0 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps_a)
    state.step = t
    return state


def l1_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean absolute error as a differentiable scalar."""
    d = diff.sub(pred, diff.constant(target))
    return diff.scale(diff.reduce_sum(diff.absolute(d)), 1.0 / d.size)


@dataclass
class TrainResult:
    model: INRModel
    state: TrainState
    loss_rows: list[tuple[int, float, float]]  # (step, loss, lr)


def train(cfg: ModelConfig, data: DatasetSpec, steps: int, lr: float = 1e-4,
          decay_steps: int = 500, batch: int = 4, patch: int = 24,
          seed: int = 0) -> TrainResult:
    """Train a model on sampled patch pairs with L1 loss."""
    if steps < 1:
        raise ContractError("steps must be >= 1")
    model = build_model(cfg, seed=seed)
    params = model.named_parameters()
    state = init_train_state(params, seed=seed)
    rows: list[tuple[int, float, float]] = []
    for step in range(steps):
        lr_t = lr * 0.5 ** (step // decay_steps)
        pairs = sample_patch_pairs(data, patch, (data.scale_lo, data.scale_hi),
                                   batch, seed=(seed, step))
        with Tape() as tape:
            lr_stack = np.stack([pair.lr.data for pair in pairs])
            feat = encode_t(model.encoder, diff.constant(lr_stack))
            lats = compute_latents(model, feat)
            total = None
            for i, pair in enumerate(pairs):
                pred = eval_global_batch(model, slice_latents(lats, i), pair.coords)
                term = l1_loss(pred, pair.targets)
                total = term if total is None else diff.add(total, term)
            loss = diff.scale(total, 1.0 / len(pairs))
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise EvaluationError(f"non-finite loss at step {step}")
        grads = backward(tape, loss)
        by_name = {name: grads[p] for name, p in params.items() if p in grads}
        adam_step(state, by_name, lr_t)
        state.loss_history.append(loss_val)
        rows.append((step, loss_val, lr_t))
    return TrainResult(model, state, rows)


def loss_log_csv(rows) -> str:
    lines = [f"# equisr {__version__}", "step,loss,lr"]
    lines += [f"{s},{l:.10e},{r:.10e}" for s, l, r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CKPT_VERSION = "equisr-ckpt-1"


def _atomic_write(path: str, payload: bytes) -> None:
    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(prefix: str, model: INRModel) -> tuple[str, str]:
    """Write `<prefix>.json` (manifest) and `<prefix>.bin` (raw blob)."""
    json_path, bin_path = prefix + ".json", prefix + ".bin"
    records = []
    chunks = []
    offset = 0
    for name, p in sorted(model.named_parameters().items()):
        raw = np.ascontiguousarray(p.data).astype("<f8").tobytes()
        records.append({
            "name": name,
            "shape": list(p.shape),
            "dtype": "<f8",
            "offset": offset,
        })
        chunks.append(raw)
        offset += len(raw)
    cfg = dict(model.cfg.__dict__)
    cfg["psi_widths"] = list(cfg["psi_widths"])
    manifest = {
        "version": CKPT_VERSION,
        "blob": os.path.basename(bin_path),
        "model": cfg,
        "params": records,
    }
    _atomic_write(bin_path, b"".join(chunks))
    _atomic_write(json_path, json.dumps(manifest, indent=1).encode())
    return json_path, bin_path


def load_checkpoint(json_path: str) -> INRModel:
    """Rebuild a model from a manifest + blob pair (bit-exact)."""
    with open(json_path, "rb") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"manifest is not valid JSON: {e}", field="<root>")
    for key in ("version", "blob", "model", "params"):
        if key not in manifest:
            raise CheckpointError("manifest key missing", field=key)
    if manifest["version"] != CKPT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {manifest['version']!r}", field="version")
    try:
        cfg_dict = dict(manifest["model"])
        cfg_dict["psi_widths"] = tuple(cfg_dict.get("psi_widths", ()))
        cfg = ModelConfig(**cfg_dict)
    except TypeError as e:
        raise CheckpointError(f"bad model config: {e}", field="model")
    model = build_model(cfg, seed=0)
    params = model.named_parameters()
    blob_path = os.path.join(os.path.dirname(os.path.abspath(json_path)), manifest["blob"])
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    seen = set()
    for rec in manifest["params"]:
        name = rec.get("name")
        if name not in params:
            raise CheckpointError("unknown parameter in manifest", field=str(name))
        p = params[name]
        shape = tuple(rec.get("shape", ()))
        if shape != p.shape:
            raise CheckpointError(
                f"shape {shape} does not match model shape {p.shape}", field=name)
        if rec.get("dtype") != "<f8":
            raise CheckpointError(f"unsupported dtype {rec.get('dtype')!r}", field=name)
        offset = int(rec.get("offset", -1))
        nbytes = int(np.prod(shape)) * 8 if shape else 8
        if offset < 0 or offset + nbytes > len(blob):
            raise CheckpointError("blob offset out of range", field=name)
        p.data[...] = np.frombuffer(blob[offset:offset + nbytes], dtype="<f8").reshape(shape)
        seen.add(name)
    missing = set(params) - seen
    if missing:
        raise CheckpointError("parameters missing from manifest", field=sorted(missing)[0])
    return model
