"""Feature encoders: a plain CNN baseline and its rotation-equivariant twin.

Both variants share one mini-EDSR layout -- head convolution, `blocks`
residual blocks (conv, relu, conv, skip add), tail convolution, and a global
skip from the head output to the tail output.  No batch normalization.

The equivariant variant uses a lifting convolution for the head and group
convolutions elsewhere; the plain variant is simply the same code path with
group order t = 1.  Channel budgets are compared as n * t, so a plain
encoder with n = 32 matches an equivariant one with t = 4, n = 8.

Biases are per-channel and shared across group slots, which keeps the bias
add equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diff
from .diff import Tensor
from .errors import ConfigError, ShapeError
from .filters import (
    ParamFilter,
    group_conv_t,
    lifting_conv_t,
    make_param_filter,
    _feat_to_public,
)
from .groups import GroupFeatureMap, RotationGroup, make_group
from .image import Image


@dataclass(frozen=True)
class EncoderConfig:
    variant: str = "equivariant"  # "plain" | "equivariant"
    t: int = 4
    blocks: int = 4
    n: int = 8  # channels per group slot
    p: int = 5
    c_in: int = 3
    bias: bool = True

    def __post_init__(self):
        if self.variant not in ("plain", "equivariant"):
            raise ConfigError(f"unknown encoder variant {self.variant!r}")
        if self.variant == "plain" and self.t != 1:
            raise ConfigError("plain encoder variant forces t = 1")
        if self.blocks < 1 or self.n < 1:
            raise ConfigError("encoder needs blocks >= 1 and n >= 1")
        if self.p % 2 == 0 or self.p < 1:
            raise ConfigError(f"filter size must be odd and positive, got {self.p}")


@dataclass
class EncoderParams:
    cfg: EncoderConfig
    group: RotationGroup
    filters: dict[str, ParamFilter]
    biases: dict[str, Tensor] = field(default_factory=dict)

    def named_parameters(self) -> dict[str, Tensor]:
        params = {f"{name}.w": pf.coeffs for name, pf in self.filters.items()}
        params.update({f"{name}.b": b for name, b in self.biases.items()})
        return params


def build_encoder(cfg: EncoderConfig, seed: int = 0) -> EncoderParams:
    """Initialize encoder parameters (He-uniform fan-in scaling, seeded)."""
    rng = np.random.default_rng(seed)
    group = make_group(cfg.t)
    t, n, p = cfg.t, cfg.n, cfg.p
    filters: dict[str, ParamFilter] = {}
    biases: dict[str, Tensor] = {}

    def add_conv(name: str, g_in: int, c_in: int, c_out: int):
        filters[name] = make_param_filter(c_out, g_in, c_in, p, rng=rng)
        if cfg.bias:
            biases[name] = diff.parameter(np.zeros(c_out))

    add_conv("head", 1, cfg.c_in, n)
    for b in range(cfg.blocks):
        add_conv(f"block{b}.conv0", t, n, n)
        add_conv(f"block{b}.conv1", t, n, n)
    add_conv("tail", t, n, n)
    return EncoderParams(cfg, group, filters, biases)


def _conv(params: EncoderParams, name: str, x: Tensor, lifting: bool = False) -> Tensor:
    pf = params.filters[name]
    if lifting:
        y = lifting_conv_t(x, pf, params.group, pad="same")
    else:
        y = group_conv_t(x, pf, params.group, pad="same")
    b = params.biases.get(name)
    if b is not None:
        y = diff.add(y, diff.reshape(b, (1, 1, 1, pf.c_out)))
    return y


def encode_t(params: EncoderParams, x: Tensor) -> Tensor:
    """Image tensor (h, w, c_in) -> feature tensor (h, w, t, n)."""
    head = _conv(params, "head", x, lifting=True)
    y = head
    for b in range(params.cfg.blocks):
        r = _conv(params, f"block{b}.conv0", y)
        r = diff.relu(r)
        r = _conv(params, f"block{b}.conv1", r)
        y = diff.add(y, r)
    y = _conv(params, "tail", y)
    return diff.add(y, head)


def encode(params: EncoderParams, img: Image) -> GroupFeatureMap:
    """Encode an image into an h x w x n x t group feature map."""
    if img.c != params.cfg.c_in:
        raise ShapeError(f"encoder expects {params.cfg.c_in} channels, image has {img.c}")
    y = encode_t(params, diff.constant(img.data))
    return _feat_to_public(y.data)


def count_weight_params(params: EncoderParams) -> int:
    """Number of convolution weight coefficients (biases excluded)."""
    return sum(pf.coeffs.size for pf in params.filters.values())
