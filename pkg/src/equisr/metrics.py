"""Equivariance-error metrics, per-case evaluation, and grid sweeps.

The equivariance error of a model Phi on image I under rotation angle a
compares x_r = Phi(rotate(I, a)) against x_0 = rotate(Phi(I), a):

    NMSE = ||x_r - x_0||_2 / ||x_0||_2,   NMAE = ||x_r - x_0||_1 / ||x_0||_1.

For angles that are not quarter turns the comparison is masked to an
inscribed disk by default (margin of 3 LR cells), because the zero fill
outside a rotated frame is not itself equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import __version__
from .data import DatasetSpec, bicubic_resize, gen_synthetic
from .errors import ConfigError, MetricError, ShapeError
from .groups import _right_angle_quarter_turns, rotate_image
from .image import Image, disk_mask
from .inr import INRModel, ModelConfig, build_model, super_resolve

MASK_MARGIN_LR_CELLS = 3.0


def _norm_ratio(x_r: Image, x_0: Image, mask: np.ndarray | None, ord_: int) -> float:
    if x_r.data.shape != x_0.data.shape:
        raise ShapeError(f"metric operands differ: {x_r.data.shape} vs {x_0.data.shape}")
    d = x_r.data - x_0.data
    ref = x_0.data
    if mask is not None:
        if mask.shape != x_0.data.shape[:2]:
            raise ShapeError(f"mask shape {mask.shape} does not match image {x_0.data.shape[:2]}")
        d, ref = d[mask], ref[mask]
    if ord_ == 2:
        denom = np.linalg.norm(ref.ravel())
        num = np.linalg.norm(d.ravel())
    else:
        denom = np.abs(ref).sum()
        num = np.abs(d).sum()
    if denom == 0.0:
        raise MetricError("reference image has zero norm; metric undefined")
    return float(num / denom)


def nmse(x_r: Image, x_0: Image, mask: np.ndarray | None = None) -> float:
    """L2 norm ratio ||x_r - x_0||_2 / ||x_0||_2 (optionally masked)."""
    return _norm_ratio(x_r, x_0, mask, 2)


def nmae(x_r: Image, x_0: Image, mask: np.ndarray | None = None) -> float:
    """L1 norm ratio ||x_r - x_0||_1 / ||x_0||_1 (optionally masked)."""
    return _norm_ratio(x_r, x_0, mask, 1)


def psnr(a: Image, b: Image) -> float:
    """10 log10(1 / MSE) over all channels; identical images give inf."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"psnr operands differ: {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


@dataclass(frozen=True)
class EquivEntry:
    angle: float
    scale: float
    nmse: float
    nmae: float
    err_map: Image  # per-pixel channel-max absolute difference


@dataclass(frozen=True)
class EquivReport:
    entries: tuple[EquivEntry, ...]
    nmse_mean: float
    nmse_std: float
    nmae_mean: float
    nmae_std: float


def aggregate(entries) -> EquivReport:
    """Mean and sample standard deviation over a list of entries."""
    entries = tuple(entries)
    ns = np.array([e.nmse for e in entries])
    na = np.array([e.nmae for e in entries])
    std = (lambda v: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
    return EquivReport(entries, float(ns.mean()), std(ns), float(na.mean()), std(na))


def _auto_mask(angle: float, hr_h: int, hr_w: int, lr_h: int) -> np.ndarray | None:
    if _right_angle_quarter_turns(angle) is not None:
        return None
    return disk_mask(hr_h, hr_w, margin_cells=MASK_MARGIN_LR_CELLS, delta=2.0 / lr_h)


def equivariance_error(model: INRModel, img: Image, angle: float, scale: float,
                       eps: float | None = None, mask="auto",
                       mode: str | None = None) -> EquivEntry:
    """One (image, angle, scale) equivariance measurement.

    `mask` is "auto" (inscribed disk for non-right angles, none otherwise),
    None, or an explicit boolean (h, w) array on the HR raster.
    """
    y0 = super_resolve(model, img, scale, mode=mode, eps=eps)
    y1 = super_resolve(model, rotate_image(img, angle), scale, mode=mode, eps=eps)
    ref = rotate_image(y0, angle)
    if isinstance(mask, str):
        if mask != "auto":
            raise ConfigError(f"unknown mask spec {mask!r}")
        mask = _auto_mask(angle, ref.h, ref.w, img.h)
    err_map = Image(np.max(np.abs(y1.data - ref.data), axis=2, keepdims=True))
    return EquivEntry(angle, scale, nmse(y1, ref, mask), nmae(y1, ref, mask), err_map)


# ---------------------------------------------------------------------------
# grid sweeps
# ---------------------------------------------------------------------------

SWEEP_HEADER = ("model,variant,t,angle_rad,scale,resolution,seed_count,"
                "nmse_mean,nmse_std,nmae_mean,nmae_std")


def _budget_config(cfg: ModelConfig, t: int) -> ModelConfig:
    """Override the group order, preserving the n*t channel budget."""
    budget = cfg.n * cfg.t
    if budget % t != 0:
        raise ConfigError(f"channel budget {budget} not divisible by t={t}")
    return ModelConfig(**{**cfg.__dict__, "t": t, "n": budget // t})


def sweep_image(data: DatasetSpec, resolution: int, seed: int) -> Image:
    """Corpus image for one grid point: generate at spec size, resize."""
    spec = DatasetSpec(**{**data.__dict__, "seed": seed})
    img = gen_synthetic(spec, 0)
    return bicubic_resize(img, resolution, resolution)


def sweep(model_cfgs, angles, scales, resolutions, t_values=None, seeds=(0,),
          data: DatasetSpec | None = None, mask="auto", eps: float | None = None,
          mode: str | None = None, model: INRModel | None = None) -> str:
    """Evaluate an equivariance-error grid, returning a deterministic CSV.

    `model_cfgs` is a list of (name, ModelConfig); `t_values` optionally
    re-runs each config at several group orders with the channel budget
    held fixed.  When `model` is given (a trained checkpoint), it is used
    as-is for every grid point and seeds only vary the test image.

    One row per (config, t, angle, scale, resolution) with mean +- sample
    std over seeds; grids must be non-empty.
    """
    angles, scales = list(angles), list(scales)
    resolutions, seeds = list(resolutions), list(seeds)
    for grid_name, grid in (("angles", angles), ("scales", scales),
                            ("resolutions", resolutions), ("seeds", seeds)):
        if not grid:
            raise ConfigError(f"sweep grid {grid_name!r} is empty")
    if data is None:
        data = DatasetSpec(kind="shapes", count=1, size=64)
    lines = [f"# equisr {__version__}", SWEEP_HEADER]
    for name, cfg in model_cfgs:
        for t in (t_values if t_values else [cfg.t]):
            run_cfg = _budget_config(cfg, t) if t != cfg.t else cfg
            for angle in angles:
                for scale_ in scales:
                    for res in resolutions:
                        entries = []
                        for seed in seeds:
                            m = model if model is not None else build_model(run_cfg, seed=seed)
                            img = sweep_image(data, res, seed)
                            entries.append(equivariance_error(
                                m, img, angle, scale_, eps=eps, mask=mask, mode=mode))
                        rep = aggregate(entries)
                        lines.append(
                            f"{name},{run_cfg.variant},{run_cfg.t},{angle:.12g},"
                            f"{scale_:.12g},{res},{len(seeds)},"
                            f"{rep.nmse_mean:.10e},{rep.nmse_std:.10e},"
                            f"{rep.nmae_mean:.10e},{rep.nmae_std:.10e}"
                        )
    return "\n".join(lines) + "\n"
