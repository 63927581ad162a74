"""Bicubic filter parametrization and rotation-equivariant convolutions.

A p x p filter is stored as coefficients of the separable bicubic basis

    phi_{a,b}(x) = phi_bic(x1 - a) * phi_bic(x2 - b),
    a, b in {-(p-1)/2, ..., (p-1)/2}   (filter mesh size 1),

where phi_bic is the classic three-branch piecewise cubic interpolation
kernel.  Because the basis interpolates (phi_{a,b} is 1 at its own grid node
and 0 at every other node), the coefficient grid *is* the filter at the
identity rotation, and the filter at any rotation A is obtained by
resampling the continuous function at A^{-1} u over the grid nodes u.

Resampling is a fixed linear map per (p, A); the matrices are precomputed
and cached, so kernel synthesis is one matrix product that is trivially
differentiable w.r.t. the coefficients.

Synthesized taps (and the coefficients themselves) outside the disk of
radius (p+1)/2 cells are zeroed so that rotated filters never lose mass off
the corner of the grid; for p in {3, 5} this mask is all ones.

Two layer types are built on top:

* `lifting_conv` takes an image to a group feature map by convolving with
  every rotated copy of one filter;
* `group_conv` maps group features to group features, pairing spatial
  rotation with a cyclic shift of the filter's own group index.  With p = 1
  it degenerates to the equivariant pointwise (1x1) layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diff
from .diff import Tensor
from .errors import GroupError, MatrixError, ShapeError
from .groups import GroupFeatureMap, RotationGroup
from .image import Image


def phi_bic(y):
    """Piecewise cubic interpolation kernel (support |y| <= 2)."""
    y = np.abs(np.asarray(y, dtype=np.float64))
    out = np.where(
        y <= 1.0,
        (1.5 * y - 2.5) * y * y + 1.0,
        np.where(y <= 2.0, ((-0.5 * y + 2.5) * y - 4.0) * y + 2.0, 0.0),
    )
    return float(out) if out.ndim == 0 else out


def _grid_nodes(p: int) -> np.ndarray:
    """(p*p, 2) coordinates of the filter grid nodes, row-major.

    Row r, column c sits at (x1, x2) = (c - (p-1)/2, (p-1)/2 - r), matching
    the image coordinate orientation (x1 right, x2 up).
    """
    half = (p - 1) / 2.0
    r, c = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    return np.stack([c.ravel() - half, half - r.ravel()], axis=-1)


def coeff_disk_mask(p: int) -> np.ndarray:
    """Boolean (p, p) mask of grid nodes within radius (p+1)/2 cells."""
    nodes = _grid_nodes(p)
    return (np.hypot(nodes[:, 0], nodes[:, 1]) <= (p + 1) / 2.0).reshape(p, p)


@dataclass(frozen=True)
class BicubicBasis:
    """The p*p separable bicubic basis on the unit-mesh filter grid."""

    p: int

    def design_matrix(self, points: np.ndarray) -> np.ndarray:
        """Evaluate all basis functions at `points` (N, 2) -> (N, p*p)."""
        nodes = _grid_nodes(self.p)
        d1 = points[:, None, 0] - nodes[None, :, 0]
        d2 = points[:, None, 1] - nodes[None, :, 1]
        return phi_bic(d1) * phi_bic(d2)


def _check_orthogonal(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (2, 2) or np.max(np.abs(A.T @ A - np.eye(2))) > 1e-9:
        raise MatrixError(f"rotation matrix is not orthogonal: {A!r}")
    return A


_RM_CACHE: dict[tuple, np.ndarray] = {}


def resample_matrix(p: int, A: np.ndarray) -> np.ndarray:
    """(p^2, p^2) map from basis coefficients to the kernel rotated by A.

    Row u of the matrix evaluates the basis at A^{-1} u; rows and columns of
    out-of-disk nodes are zeroed.  At the identity the matrix is the disk
    mask itself (the interpolation property).
    """
    A = _check_orthogonal(A)
    key = (p, A.tobytes())
    cached = _RM_CACHE.get(key)
    if cached is not None:
        return cached
    nodes = _grid_nodes(p)
    src = nodes @ A  # row-vector form of A^{-1} u for orthogonal A
    M = BicubicBasis(p).design_matrix(src)
    mask = coeff_disk_mask(p).ravel()
    M[~mask, :] = 0.0
    M[:, ~mask] = 0.0
    _RM_CACHE[key] = M
    return M


@dataclass(frozen=True)
class ParamFilter:
    """Coefficient grids [c_out, g_in, c_in, p, p] for parametrized filters.

    g_in is 1 for lifting filters and t for group filters.  Coefficients are
    stored pre-masked to the filter disk.
    """

    coeffs: Tensor

    def __post_init__(self):
        if self.coeffs.ndim != 5 or self.coeffs.shape[3] != self.coeffs.shape[4]:
            raise ShapeError(
                f"filter coefficients must be [c_out, g_in, c_in, p, p], got {self.coeffs.shape}"
            )
        if self.p % 2 == 0:
            raise ShapeError(f"filter size must be odd, got {self.p}")

    @property
    def c_out(self) -> int:
        return self.coeffs.shape[0]

    @property
    def g_in(self) -> int:
        return self.coeffs.shape[1]

    @property
    def c_in(self) -> int:
        return self.coeffs.shape[2]

    @property
    def p(self) -> int:
        return self.coeffs.shape[3]


def make_param_filter(c_out: int, g_in: int, c_in: int, p: int,
                      data: np.ndarray | None = None,
                      rng: np.random.Generator | None = None,
                      gain: float = 1.0,
                      requires_grad: bool = True) -> ParamFilter:
    """Create a filter from explicit coefficients or He-uniform init."""
    shape = (c_out, g_in, c_in, p, p)
    if data is None:
        if rng is None:
            raise ShapeError("make_param_filter needs either data or an rng")
        fan_in = g_in * c_in * p * p
        bound = gain * np.sqrt(6.0 / fan_in)
        data = rng.uniform(-bound, bound, size=shape)
    else:
        data = np.asarray(data, dtype=np.float64)
        if data.shape != shape:
            raise ShapeError(f"coefficient data has shape {data.shape}, expected {shape}")
    data = data * coeff_disk_mask(p)
    return ParamFilter(Tensor(data, requires_grad=requires_grad))


def _resample_coeffs(coeffs: Tensor, p: int, M: np.ndarray) -> Tensor:
    lead = coeffs.shape[:-2]
    flat = diff.reshape(coeffs, (int(np.prod(lead)), p * p))
    out = diff.matmul(flat, diff.constant(M.T))
    return diff.reshape(out, lead + (p, p))


def synthesize_kernel(f: ParamFilter, A: np.ndarray) -> Tensor:
    """Discrete kernel of the filter rotated by A, same shape as the coeffs."""
    M = resample_matrix(f.p, A)
    return _resample_coeffs(f.coeffs, f.p, M)


# ---------------------------------------------------------------------------
# convolution layers (internal tensor layout: features are (h, w, t, n))
# ---------------------------------------------------------------------------

def lifting_kernel(f: ParamFilter, group: RotationGroup) -> Tensor:
    """Stacked rotated kernels (t*c_out, c_in, p, p); slot k is rotation A_k."""
    if f.g_in != 1:
        raise ShapeError(f"lifting filter must have g_in=1, got {f.g_in}")
    blocks = []
    for k in range(group.t):
        kern = synthesize_kernel(f, group.matrix(k))
        blocks.append(diff.reshape(kern, (f.c_out, f.c_in, f.p, f.p)))
    return diff.concat(blocks, axis=0)


def group_kernel(f: ParamFilter, group: RotationGroup) -> Tensor:
    """Assembled group-convolution kernel (t*c_out, t*c_in, p, p).

    The block for output slot a and input slot b holds the filter at group
    index (b - a) mod t spatially rotated by A_a.
    """
    if f.g_in != group.t:
        raise GroupError(f"group filter has g_in={f.g_in} but group order is {group.t}")
    t = group.t
    blocks = []
    for a in range(t):
        perm = np.array([(b - a) % t for b in range(t)], dtype=np.int64)
        ga = diff.gather(f.coeffs, perm, axis=1)
        kern = _resample_coeffs(ga, f.p, resample_matrix(f.p, group.matrix(a)))
        blocks.append(diff.reshape(kern, (f.c_out, t * f.c_in, f.p, f.p)))
    return diff.concat(blocks, axis=0)


def lifting_conv_t(x: Tensor, f: ParamFilter, group: RotationGroup,
                   pad: str = "same", kernel: Tensor | None = None) -> Tensor:
    """Image tensor ([b,] h, w, c_in) -> group feature tensor ([b,] h', w', t, n)."""
    if x.ndim not in (3, 4) or x.shape[-1] != f.c_in:
        raise ShapeError(f"lifting_conv: image shape {x.shape} vs filter c_in {f.c_in}")
    big = lifting_kernel(f, group) if kernel is None else kernel
    y = diff.conv2d(x, big, pad=pad)
    return diff.reshape(y, y.shape[:-1] + (group.t, f.c_out))


def group_conv_t(x: Tensor, f: ParamFilter, group: RotationGroup,
                 pad: str = "same", kernel: Tensor | None = None) -> Tensor:
    """Group feature tensor ([b,] h, w, t, n_in) -> ([b,] h', w', t, n_out).

    Output slot a sums, over input slots b, the convolution of slot b with
    the filter at group index (b - a) mod t spatially rotated by A_a.
    """
    if x.ndim not in (4, 5) or x.shape[-2] != group.t:
        raise GroupError(f"feature tensor {x.shape} does not match group order {group.t}")
    if x.shape[-1] != f.c_in:
        raise ShapeError(f"group_conv: feature channels {x.shape[-1]} vs filter c_in {f.c_in}")
    t = group.t
    x_flat = diff.reshape(x, x.shape[:-2] + (t * f.c_in,))
    big = group_kernel(f, group) if kernel is None else kernel
    y = diff.conv2d(x_flat, big, pad=pad)
    return diff.reshape(y, y.shape[:-1] + (t, f.c_out))


# public wrappers on the h x w x n x t container types

def _feat_to_public(data: np.ndarray) -> GroupFeatureMap:
    return GroupFeatureMap(np.ascontiguousarray(data.transpose(0, 1, 3, 2)))


def _feat_to_internal(f: GroupFeatureMap) -> np.ndarray:
    return np.ascontiguousarray(f.data.transpose(0, 1, 3, 2))


def lifting_conv(img: Image, f: ParamFilter, group: RotationGroup,
                 pad: str = "same") -> GroupFeatureMap:
    y = lifting_conv_t(diff.constant(img.data), f, group, pad=pad)
    return _feat_to_public(y.data)


def group_conv(f_in: GroupFeatureMap, f: ParamFilter, group: RotationGroup,
               pad: str = "same") -> GroupFeatureMap:
    x = diff.constant(_feat_to_internal(f_in))
    y = group_conv_t(x, f, group, pad=pad)
    return _feat_to_public(y.data)
