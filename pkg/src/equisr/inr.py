"""Rotation-equivariant implicit neural representation layers and models.

The INR maps one latent code (one pixel of a group feature map, an n x t
matrix F with one column per group slot) plus a local coordinate to a pixel
value, through three layer types:

* input layer:   H(x, B) = sum_A phi(W_in^{B^{-1}A}, F^A, A^{-1} x);
* intermediate:  H'(x, A) = sum_B W^{A^{-1}B} . H(x, B);
* output layer:  f(x) = psi(sum_A W_out1 . H(x, A)).

Cyclic weight sharing (indices B^{-1}A resp. A^{-1}B) makes every layer
commute with "cyclically shift the group axis, rotate the coordinate", so a
cyclic shift of F produces exactly the rotated local function.

Three phi variants are provided:

* liif: phi(W, F, x) = W . [F; x]           (MLP-style INR)
* ope:  phi(W, F, x) = F^T . P(x)           (parameter-free Fourier INR)
* lte:  phi(W, (Fa, Ff), x) = Fa (*) [cos(pi Ff x); sin(pi Ff x)]

where P is the orthonormal 2-D Fourier basis on [-1, 1]^2 and the LTE
amplitude/frequency pair comes from two pointwise equivariant heads on the
encoder output.  The non-equivariant baselines are the same code paths with
t = 1.

Local coordinates are offsets from the chosen latent's pixel center rescaled
so one LR cell spans [-1, 1].  The global function evaluates, per query, the
local function of the nearest latent ("nearest" mode) or the area-weighted
blend of the four surrounding latents ("ensemble" mode, with stabilizer eps
added to the absolute offsets that form the areas).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diff
from .diff import Tensor
from .encoder import EncoderConfig, EncoderParams, build_encoder, encode_t
from .errors import ConfigError, DomainError, ShapeError
from .filters import ParamFilter, group_conv_t, make_param_filter, _feat_to_internal
from .groups import GroupFeatureMap, RotationGroup, make_group
from .image import Image

_CHUNK = 1 << 16


def lift_coordinate(x: np.ndarray, group: RotationGroup) -> np.ndarray:
    """Rotate a 2-vector by every inverse group element: entry k = A_k^{-1} x."""
    x = np.asarray(x, dtype=np.float64)
    # A^{-1} = A^T for rotation matrices, so (A^{-1} x)^T = x^T A
    return x @ group.matrices


# ---------------------------------------------------------------------------
# configuration and parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Full model description: encoder trunk plus INR head."""

    variant: str = "liif"  # liif | ope | lte
    t: int = 4
    blocks: int = 4
    n: int = 8  # encoder channels per group slot
    p: int = 5
    c_in: int = 3
    L: int = 0  # intermediate INR layers (liif only)
    width: int = 32  # H-value width m
    psi_widths: tuple[int, ...] = (64,)
    k_max: int = 3  # ope maximum frequency
    K: int = 16  # lte frequency count
    eps: float = 1e-7  # local-ensemble stabilizer
    mode: str = "ensemble"  # ensemble | nearest
    relu_after_input: bool | None = None  # None = auto (liif with L > 0)
    bias: bool = True

    def __post_init__(self):
        if self.variant not in ("liif", "ope", "lte"):
            raise ConfigError(f"unknown INR variant {self.variant!r}")
        if self.mode not in ("ensemble", "nearest"):
            raise ConfigError(f"unknown evaluation mode {self.mode!r}")
        if self.L < 0 or self.eps < 0:
            raise ConfigError("L and eps must be non-negative")
        if self.variant in ("ope", "lte") and self.L != 0:
            raise ConfigError(f"{self.variant} uses no intermediate layers (L = 0)")
        if self.t < 1:
            raise ConfigError("group order must be >= 1")

    @property
    def out_channels(self) -> int:
        return self.c_in

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            variant="plain" if self.t == 1 else "equivariant",
            t=self.t, blocks=self.blocks, n=self.n, p=self.p,
            c_in=self.c_in, bias=self.bias,
        )

    def relu_in(self) -> bool:
        if self.relu_after_input is not None:
            return self.relu_after_input
        return self.variant == "liif" and self.L > 0


@dataclass
class INRParams:
    """Learnable state of the INR head (variant-dependent subset used)."""

    cfg: ModelConfig
    group: RotationGroup
    W_in: Tensor | None = None  # (t, m, n+2) input-layer blocks
    W_mid: list[Tensor] = field(default_factory=list)  # each (t, m, m)
    W_out1: Tensor | None = None  # (m_psi, m), constant (1/t) I for ope
    psi: list[tuple[Tensor, Tensor]] = field(default_factory=list)  # (W (out,in), b)
    heads: dict[str, ParamFilter] = field(default_factory=dict)
    head_biases: dict[str, Tensor] = field(default_factory=dict)

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if self.W_in is not None:
            out["W_in"] = self.W_in
        for i, w in enumerate(self.W_mid):
            out[f"mid{i}"] = w
        if self.W_out1 is not None and self.W_out1.requires_grad:
            out["W_out1"] = self.W_out1
        for i, (w, b) in enumerate(self.psi):
            out[f"psi{i}.w"] = w
            out[f"psi{i}.b"] = b
        for name, pf in self.heads.items():
            out[f"{name}.w"] = pf.coeffs
        for name, b in self.head_biases.items():
            out[f"{name}.b"] = b
        return out


def ope_basis(x: np.ndarray, k_max: int) -> np.ndarray:
    """Orthonormal 2-D Fourier basis values P(x) for queries x (Q, 2).

    Per axis the family is [1, sqrt(2) cos(j pi u), sqrt(2) sin(j pi u)] for
    j = 1..k_max; the 2-D basis is the tensor product, ordered x1-major
    (index = alpha * (2 k_max + 1) + beta with the per-axis order above).
    The family is orthonormal w.r.t. the normalized measure on [-1, 1]^2.
    """
    x = np.asarray(x, dtype=np.float64)
    q = x.shape[0]
    d = 2 * k_max + 1

    def axis_values(u):
        vals = np.empty((q, d))
        vals[:, 0] = 1.0
        for j in range(1, k_max + 1):
            vals[:, 2 * j - 1] = np.sqrt(2.0) * np.cos(j * np.pi * u)
            vals[:, 2 * j] = np.sqrt(2.0) * np.sin(j * np.pi * u)
        return vals

    return (axis_values(x[:, 0])[:, :, None] * axis_values(x[:, 1])[:, None, :]).reshape(q, d * d)


def _mlp_init(rng, widths: list[int]) -> list[tuple[Tensor, Tensor]]:
    layers = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / n_in)
        layers.append((
            diff.parameter(rng.uniform(-bound, bound, size=(n_out, n_in))),
            diff.parameter(np.zeros(n_out)),
        ))
    return layers


def build_inr(cfg: ModelConfig, group: RotationGroup,
              rng: np.random.Generator) -> INRParams:
    t, n, m, n0 = cfg.t, cfg.n, cfg.width, cfg.out_channels
    params = INRParams(cfg, group)
    if cfg.variant == "liif":
        bound = np.sqrt(6.0 / (t * (n + 2)))
        params.W_in = diff.parameter(rng.uniform(-bound, bound, size=(t, m, n + 2)))
        for _ in range(cfg.L):
            b_mid = np.sqrt(6.0 / (t * m))
            params.W_mid.append(diff.parameter(rng.uniform(-b_mid, b_mid, size=(t, m, m))))
        b_out = np.sqrt(6.0 / (t * m))
        params.W_out1 = diff.parameter(rng.uniform(-b_out, b_out, size=(m, m)))
        params.psi = _mlp_init(rng, [m, *cfg.psi_widths, n0])
    elif cfg.variant == "ope":
        n_lat = n0 * (2 * cfg.k_max + 1) ** 2
        params.heads["ope_head"] = make_param_filter(n_lat, t, n, 1, rng=rng)
        params.head_biases["ope_head"] = diff.parameter(np.zeros(n_lat))
        params.W_out1 = diff.constant(np.eye(n0) / t)
    else:  # lte
        two_k = 2 * cfg.K
        for name in ("amp_head", "freq_head"):
            params.heads[name] = make_param_filter(two_k, t, n, 1, rng=rng)
            params.head_biases[name] = diff.parameter(np.zeros(two_k))
        b_out = np.sqrt(6.0 / (t * two_k))
        params.W_out1 = diff.parameter(rng.uniform(-b_out, b_out, size=(m, two_k)))
        params.psi = _mlp_init(rng, [m, *cfg.psi_widths, n0])
    return params


@dataclass
class INRModel:
    cfg: ModelConfig
    group: RotationGroup
    encoder: EncoderParams
    inr: INRParams

    def named_parameters(self) -> dict[str, Tensor]:
        out = {f"enc.{k}": v for k, v in self.encoder.named_parameters().items()}
        out.update({f"inr.{k}": v for k, v in self.inr.named_parameters().items()})
        return out


def build_model(cfg: ModelConfig, seed: int = 0) -> INRModel:
    """Build a model with seeded He-uniform initialization (bit reproducible)."""
    group = make_group(cfg.t)
    enc = build_encoder(cfg.encoder_config(), seed=seed)
    inr = build_inr(cfg, group, np.random.default_rng((seed, 1)))
    return INRModel(cfg, group, enc, inr)


# ---------------------------------------------------------------------------
# latent production
# ---------------------------------------------------------------------------

@dataclass
class Latents:
    """Per-variant latent tensors in internal (h, w, t, c) layout."""

    kind: str
    main: Tensor | None = None  # liif: encoder features; ope: coefficients
    amp: Tensor | None = None  # lte amplitudes (h, w, t, 2K)
    freq: Tensor | None = None  # lte frequencies (h, w, t, 2K)

    @property
    def h(self) -> int:
        ref = self.main if self.main is not None else self.amp
        return ref.shape[0]

    @property
    def w(self) -> int:
        ref = self.main if self.main is not None else self.amp
        return ref.shape[1]


def _head(model: INRModel, name: str, feat: Tensor) -> Tensor:
    pf = model.inr.heads[name]
    y = group_conv_t(feat, pf, model.group, pad="same")
    b = model.inr.head_biases.get(name)
    if b is not None:
        y = diff.add(y, diff.reshape(b, (1, 1, 1, pf.c_out)))
    return y


def compute_latents(model: INRModel, feat: Tensor) -> Latents:
    """Turn encoder features (h, w, t, n) into the variant's latent codes."""
    v = model.cfg.variant
    if v == "liif":
        return Latents(v, main=feat)
    if v == "ope":
        return Latents(v, main=_head(model, "ope_head", feat))
    return Latents(v, amp=_head(model, "amp_head", feat),
                   freq=_head(model, "freq_head", feat))


def _gather_pixels(lat: Tensor, flat_idx: np.ndarray) -> Tensor:
    h, w, t, c = lat.shape
    return diff.gather(diff.reshape(lat, (h * w, t, c)), flat_idx, axis=0)


def slice_latents(lats: Latents, i: int) -> Latents:
    """Select item i from latents with a leading batch axis."""

    def pick(x: Tensor | None) -> Tensor | None:
        if x is None:
            return None
        return diff.reshape(diff.gather(x, np.array([i]), axis=0), x.shape[1:])

    return Latents(lats.kind, main=pick(lats.main), amp=pick(lats.amp),
                   freq=pick(lats.freq))


def _gather_latents(model: INRModel, lats: Latents, flat_idx: np.ndarray) -> Latents:
    if lats.kind == "lte":
        return Latents("lte", amp=_gather_pixels(lats.amp, flat_idx),
                       freq=_gather_pixels(lats.freq, flat_idx))
    return Latents(lats.kind, main=_gather_pixels(lats.main, flat_idx))


# ---------------------------------------------------------------------------
# batched layer cores (queries stacked along the leading axis)
# ---------------------------------------------------------------------------

def _slot(x: Tensor, a: int) -> Tensor:
    """(Q, t, c) -> (Q, c) slice of group slot a."""
    q, _, c = x.shape
    return diff.reshape(diff.gather(x, np.array([a]), axis=1), (q, c))


def _cyclic_block_matrix(blocks: Tensor, index) -> Tensor:
    """Assemble [[blocks[index(a, b)]^T]]_{a,b} into one (t*in, t*out) matrix.

    `blocks` is (t, out, in); row-block a, column-block b of the result is
    blocks[index(a, b)] transposed, ready to right-multiply (Q, t*in) stacks.
    """
    t, n_out, n_in = blocks.shape
    bt = [diff.transpose(diff.reshape(diff.gather(blocks, np.array([k]), axis=0),
                                      (n_out, n_in)), (1, 0)) for k in range(t)]
    cols = [diff.concat([bt[index(a, b)] for a in range(t)], axis=0) for b in range(t)]
    return diff.concat(cols, axis=1)


def _input_layer_liif(params: INRParams, F_q: Tensor, X: np.ndarray) -> Tensor:
    """H(x, B) = sum_A W_in^{B^{-1}A} . [F^A; A^{-1}x]  ->  (Q, t, m)."""
    group, cfg = params.group, params.cfg
    t, m = cfg.t, cfg.width
    q, _, n = F_q.shape
    pieces = []
    for a in range(t):
        xrot = X @ group.matrix(a)  # rows are A_a^{-1} x
        pieces.append(diff.concat([_slot(F_q, a), diff.constant(xrot)], axis=1))
    u = diff.concat(pieces, axis=1)  # (Q, t*(n+2))
    wmat = _cyclic_block_matrix(params.W_in, lambda a, b: (a - b) % t)
    return diff.reshape(diff.matmul(u, wmat), (q, t, m))


def _intermediate_core(H: Tensor, W: Tensor) -> Tensor:
    """H'(x, A) = sum_B W^{A^{-1}B} . H(x, B) on a (Q, t, m) stack."""
    q, t, m_in = H.shape
    m_out = W.shape[1]
    wmat = _cyclic_block_matrix(W, lambda a, b: (a - b) % t)  # row-block B, col-block A
    return diff.reshape(diff.matmul(diff.reshape(H, (q, t * m_in)), wmat), (q, t, m_out))


def _apply_psi(psi: list[tuple[Tensor, Tensor]], z: Tensor) -> Tensor:
    for i, (w, b) in enumerate(psi):
        z = diff.add(diff.matmul(z, diff.transpose(w, (1, 0))), diff.reshape(b, (1, w.shape[0])))
        if i + 1 < len(psi):
            z = diff.relu(z)
    return z


def _input_sum_ope(params: INRParams, lat: Latents, X: np.ndarray) -> Tensor:
    """sum_A (F^A)^T P(A^{-1} x); H(x, B) is this value for every B."""
    cfg, group = params.cfg, params.group
    n0, kb = cfg.out_channels, (2 * cfg.k_max + 1) ** 2
    q = X.shape[0]
    acc = None
    for a in range(group.t):
        p_a = ope_basis(X @ group.matrix(a), cfg.k_max)
        f_a = diff.reshape(_slot(lat.main, a), (q, n0, kb))
        term = diff.reduce_sum(diff.mul(f_a, diff.reshape(diff.constant(p_a), (q, 1, kb))), axes=2)
        acc = term if acc is None else diff.add(acc, term)
    return acc  # (Q, n0)


def _input_sum_lte(params: INRParams, lat: Latents, X: np.ndarray) -> Tensor:
    """sum_A Fa^A (*) [cos(pi Ff^A A^{-1}x); sin(pi Ff^A A^{-1}x)] -> (Q, 2K)."""
    cfg, group = params.cfg, params.group
    K = cfg.K
    q = X.shape[0]
    acc = None
    for a in range(group.t):
        xrot = X @ group.matrix(a)
        fr = diff.reshape(_slot(lat.freq, a), (q, K, 2))
        ang = diff.scale(
            diff.reduce_sum(diff.mul(fr, diff.reshape(diff.constant(xrot), (q, 1, 2))), axes=2),
            np.pi,
        )
        cs = diff.concat([diff.cos(ang), diff.sin(ang)], axis=1)
        term = diff.mul(_slot(lat.amp, a), cs)
        acc = term if acc is None else diff.add(acc, term)
    return acc


def _eval_local_batch(params: INRParams, lat_q: Latents, X: np.ndarray) -> Tensor:
    """Local functions of Q latent codes at Q normalized offsets -> (Q, n0)."""
    cfg = params.cfg
    if cfg.variant == "ope":
        # output layer with W_out1 = (1/t) I and identity psi collapses to
        # the plain average over the t identical H slots
        return _input_sum_ope(params, lat_q, X)
    if cfg.variant == "lte":
        h_sum = _input_sum_lte(params, lat_q, X)  # equals (1/t) sum_B H(x,B) * t
        z = diff.scale(diff.matmul(h_sum, diff.transpose(params.W_out1, (1, 0))), cfg.t)
        return _apply_psi(params.psi, z)
    # liif
    h = _input_layer_liif(params, lat_q.main, X)
    if cfg.relu_in():
        h = diff.relu(h)
    for w_mid in params.W_mid:
        h = diff.relu(_intermediate_core(h, w_mid))
    q = X.shape[0]
    z = diff.reduce_sum(h, axes=1)  # sum over group slots
    z = diff.matmul(z, diff.transpose(params.W_out1, (1, 0)))
    return _apply_psi(params.psi, z)


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------

def _snap(x: np.ndarray, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-pixel flat indices and centers for coordinates x (Q, 2)."""
    u = (1.0 - x[:, 1]) * (h / 2.0)
    v = (x[:, 0] + 1.0) * (w / 2.0)
    i = np.clip(np.ceil(u).astype(np.int64) - 1, 0, h - 1)
    j = np.clip(np.ceil(v).astype(np.int64) - 1, 0, w - 1)
    centers = np.stack([-1.0 + (j + 0.5) * (2.0 / w), 1.0 - (i + 0.5) * (2.0 / h)], axis=1)
    return i * w + j, centers


def _eval_global_chunk(model: INRModel, lats: Latents, X: np.ndarray,
                       mode: str, eps: float) -> Tensor:
    h, w = lats.h, lats.w
    if mode == "nearest":
        flat, centers = _snap(X, h, w)
        off = (X - centers) * np.array([w, h])  # one LR cell spans [-1, 1]
        return _eval_local_batch(model.inr, _gather_latents(model, lats, flat), off)

    # local ensemble over the four surrounding latents
    q = X.shape[0]
    rx, ry = 1.0 / w, 1.0 / h  # half cell
    shifts = [(-rx, -ry), (-rx, ry), (rx, -ry), (rx, ry)]
    flats, offs, areas = [], [], []
    for sx, sy in shifts:
        flat, centers = _snap(X + np.array([sx, sy]), h, w)
        rel = (X - centers) * np.array([w, h])
        flats.append(flat)
        offs.append(rel)
        areas.append((np.abs(rel[:, 0]) + eps) * (np.abs(rel[:, 1]) + eps))
    areas = np.stack(areas)  # (4, Q)
    # weight of corner q is the area spanned toward the diagonally opposite
    # corner; a zero total (all four snaps clamped onto one border pixel)
    # degenerates to identical predictions, blended uniformly
    weights = areas[::-1]
    total = weights.sum(axis=0)
    safe = np.where(total > 0.0, total, 1.0)
    weights = np.where(total > 0.0, weights / safe, 0.25)

    lat_q = _gather_latents(model, lats, np.concatenate(flats))
    preds = _eval_local_batch(model.inr, lat_q, np.concatenate(offs, axis=0))
    n0 = preds.shape[1]
    preds = diff.reshape(preds, (4, q, n0))
    preds = diff.mul(preds, diff.constant(weights[:, :, None]))
    return diff.reduce_sum(preds, axes=0)


def eval_global_batch(model: INRModel, lats: Latents, X: np.ndarray,
                      mode: str | None = None, eps: float | None = None) -> Tensor:
    """Evaluate the global continuous function at queries X (Q, 2)."""
    mode = model.cfg.mode if mode is None else mode
    eps = model.cfg.eps if eps is None else eps
    if mode not in ("ensemble", "nearest"):
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    q = X.shape[0]
    if q <= _CHUNK:
        return _eval_global_chunk(model, lats, X, mode, eps)
    parts = [
        _eval_global_chunk(model, lats, X[s:s + _CHUNK], mode, eps)
        for s in range(0, q, _CHUNK)
    ]
    return diff.concat(parts, axis=0)


def super_resolve(model: INRModel, img: Image, scale: float,
                  mode: str | None = None, eps: float | None = None) -> Image:
    """Arbitrary-scale super-resolution: encode, then query every HR cell center."""
    if scale < 1.0:
        raise DomainError(f"scale must be >= 1, got {scale}")
    h_out = int(np.floor(scale * img.h + 0.5))
    w_out = int(np.floor(scale * img.w + 0.5))
    feat = encode_t(model.encoder, diff.constant(img.data))
    lats = compute_latents(model, feat)
    x1 = -1.0 + (np.arange(w_out) + 0.5) * (2.0 / w_out)
    x2 = 1.0 - (np.arange(h_out) + 0.5) * (2.0 / h_out)
    xx = np.stack([np.broadcast_to(x1, (h_out, w_out)),
                   np.broadcast_to(x2[:, None], (h_out, w_out))], axis=-1)
    out = eval_global_batch(model, lats, xx.reshape(-1, 2), mode=mode, eps=eps)
    return Image(out.data.reshape(h_out, w_out, model.cfg.out_channels))


# ---------------------------------------------------------------------------
# per-pixel public layer API (thin wrappers over the batched cores)
# ---------------------------------------------------------------------------

def _latent_to_batch(latent, variant: str) -> Latents:
    if variant == "lte":
        amp, freq = latent
        amp = np.asarray(amp, dtype=np.float64)  # (2K, t)
        freq = np.asarray(freq, dtype=np.float64)  # (K, 2, t)
        t = amp.shape[-1]
        lat_a = diff.constant(np.ascontiguousarray(amp.T)[None, :, :])  # (1, t, 2K)
        lat_f = diff.constant(np.moveaxis(freq, -1, 0).reshape(t, -1)[None, :, :])
        return Latents("lte", amp=lat_a, freq=lat_f)
    lat = np.asarray(latent, dtype=np.float64)  # (n, t)
    return Latents(variant, main=diff.constant(np.ascontiguousarray(lat.T)[None, :, :]))


def input_layer(latent, x, params: INRParams) -> np.ndarray:
    """H(x, B) for all B as a (t, width) array.

    `latent` is an (n, t) slot-column matrix, or an (amp (2K, t),
    freq (K, 2, t)) pair for the lte variant.
    """
    cfg = params.cfg
    X = np.asarray(x, dtype=np.float64)[None, :]
    lat = _latent_to_batch(latent, cfg.variant)
    if cfg.variant == "liif":
        h = _input_layer_liif(params, lat.main, X)
        return h.data[0]
    if cfg.variant == "ope":
        row = _input_sum_ope(params, lat, X).data[0]
    else:
        row = _input_sum_lte(params, lat, X).data[0]
    return np.tile(row, (cfg.t, 1))  # phi ignores W, so H is constant in B


def intermediate_layer(H: np.ndarray, W) -> np.ndarray:
    """Apply the cyclic-sharing linear layer to H (t, m_in) -> (t, m_out)."""
    Wt = W if isinstance(W, Tensor) else diff.constant(np.asarray(W, dtype=np.float64))
    out = _intermediate_core(diff.constant(np.asarray(H)[None]), Wt)
    return out.data[0]


def output_layer(Hhat: np.ndarray, W_out1, psi=None) -> np.ndarray:
    """Collapse the group axis with the shared matrix, then apply psi."""
    Hhat = np.asarray(Hhat, dtype=np.float64)
    w1 = W_out1.data if isinstance(W_out1, Tensor) else np.asarray(W_out1)
    z = diff.constant(Hhat.sum(axis=0)[None, :] @ w1.T)
    if psi:
        z = _apply_psi(psi, z)
    return z.data[0]


def eval_local(latent, x_local, params: INRParams) -> np.ndarray:
    """One latent code's local function at one normalized offset."""
    lat = _latent_to_batch(latent, params.cfg.variant)
    X = np.asarray(x_local, dtype=np.float64)[None, :]
    return _eval_local_batch(params, lat, X).data[0]


def eval_global(model: INRModel, F: GroupFeatureMap, x, mode: str | None = None,
                eps: float | None = None) -> np.ndarray:
    """Evaluate the assembled continuous function at one coordinate."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0):
        raise DomainError(f"query {x} outside [-1, 1]^2")
    feat = diff.constant(_feat_to_internal(F))
    lats = compute_latents(model, feat)
    return eval_global_batch(model, lats, x[None, :], mode=mode, eps=eps).data[0]
