"""Cyclic rotation groups and their action on images and group feature maps.

The group of order t consists of the matrices

    A_k = [[ cos(2*pi*k/t), sin(2*pi*k/t)],
           [-sin(2*pi*k/t), cos(2*pi*k/t)]],   k = 0..t-1.

A_k composes cyclically (A_k A_j = A_{k+j mod t}).  Acting on a 2-D function
by f -> f(A_k^{-1} x), the element k rotates the picture clockwise by
2*pi*k/t; in the counter-clockwise-positive angle convention used by
`rotate_image` this is an angle of -2*pi*k/t (see `element_image_angle`).

A group feature map stacks t feature images along a trailing group axis;
rotating it combines the spatial rotation of every slot with a cyclic shift
of the slot index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GroupIndexError, InvalidOrderError, ShapeError
from .image import Image, bilinear_sample, pixel_coords

RIGHT_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class RotationGroup:
    """Cyclic rotation group of order t with its 2x2 matrices."""

    t: int
    matrices: np.ndarray  # (t, 2, 2)

    def compose(self, k: int, j: int) -> int:
        return (k + j) % self.t

    def inverse(self, k: int) -> int:
        return (self.t - k) % self.t

    def matrix(self, k: int) -> np.ndarray:
        return self.matrices[k % self.t]


def make_group(t: int) -> RotationGroup:
    """Build the cyclic rotation group of order t."""
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise InvalidOrderError(f"group order must be a positive integer, got {t!r}")
    angles = 2.0 * np.pi * np.arange(t) / t
    c, s = np.cos(angles), np.sin(angles)
    # snap quarter-turn entries so p4 algebra is bit-exact
    for v in (c, s):
        v[np.abs(v) < 1e-15] = 0.0
        v[np.abs(v - 1.0) < 1e-15] = 1.0
        v[np.abs(v + 1.0) < 1e-15] = -1.0
    mats = np.empty((t, 2, 2))
    mats[:, 0, 0] = c
    mats[:, 0, 1] = s
    mats[:, 1, 0] = -s
    mats[:, 1, 1] = c
    return RotationGroup(int(t), mats)


def element_image_angle(group: RotationGroup, k: int) -> float:
    """Counter-clockwise image-rotation angle realizing element k's action."""
    return -2.0 * np.pi * (k % group.t) / group.t


def _right_angle_quarter_turns(angle: float) -> int | None:
    k = round(angle / (np.pi / 2.0))
    if abs(angle - k * (np.pi / 2.0)) < RIGHT_ANGLE_TOL:
        return k % 4
    return None


def _rotate_array(data: np.ndarray, angle: float) -> np.ndarray:
    """Rotate an (h, w, c) array CCW by `angle` about the domain center."""
    k = _right_angle_quarter_turns(angle)
    if k is not None:
        if k % 2 == 1 and data.shape[0] != data.shape[1]:
            raise ShapeError(
                "exact right-angle rotation by an odd quarter turn requires a "
                f"square image, got {data.shape[0]}x{data.shape[1]}"
            )
        return np.ascontiguousarray(np.rot90(data, k, axes=(0, 1)))
    # generic angle: output pixel at x takes the input value at R(-angle) x
    h, w = data.shape[:2]
    c, s = np.cos(angle), np.sin(angle)
    xy = pixel_coords(h, w)
    src = np.empty_like(xy)
    src[..., 0] = c * xy[..., 0] + s * xy[..., 1]
    src[..., 1] = -s * xy[..., 0] + c * xy[..., 1]
    return bilinear_sample(data, src)


def rotate_image(img: Image, angle: float | None = None, *,
                 group: RotationGroup | None = None, k: int | None = None) -> Image:
    """Rotate an image CCW by `angle` radians, or by group element k.

    Multiples of pi/2 (within 1e-12) are exact index permutations; any other
    angle uses bilinear interpolation with out-of-domain samples set to 0.
    Passing `group` and `k` applies element k's image action instead of an
    explicit angle.
    """
    if (angle is None) == (group is None):
        raise ShapeError("rotate_image needs either an angle or (group, k)")
    if group is not None:
        if k is None or not 0 <= k < group.t:
            raise GroupIndexError(f"group index {k} outside [0, {group.t})")
        angle = element_image_angle(group, k)
    return Image(_rotate_array(img.data, float(angle)))


@dataclass(frozen=True)
class GroupFeatureMap:
    """h x w x n x t feature tensor; the 4th axis indexes group elements."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeError(f"feature data must be h x w x n x t, got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def n(self) -> int:
        return self.data.shape[2]

    @property
    def t(self) -> int:
        return self.data.shape[3]

    def slot(self, k: int) -> np.ndarray:
        return self.data[:, :, :, k]


def rotate_feature(f: GroupFeatureMap, group: RotationGroup, k: int) -> GroupFeatureMap:
    """Apply group element k to a feature map.

    Output slot j holds the spatially rotated input slot (j - k) mod t; the
    spatial rotation is element k's image action (exact permutation for
    quarter turns, bilinear otherwise).
    """
    if f.t != group.t:
        raise ShapeError(f"feature has t={f.t} but group has t={group.t}")
    if not 0 <= k < group.t:
        raise GroupIndexError(f"group index {k} outside [0, {group.t})")
    perm = [(j - k) % group.t for j in range(group.t)]
    shifted = f.data[:, :, :, perm]
    h, w, n, t = shifted.shape
    rotated = _rotate_array(shifted.reshape(h, w, n * t), element_image_angle(group, k))
    return GroupFeatureMap(rotated.reshape(h, w, n, t))
