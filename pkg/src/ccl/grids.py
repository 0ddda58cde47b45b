"""Uniform tensor-product grids, finite-difference stencils and grid I/O.

Fields are stored with the grid axes first: a scalar field has shape
``grid.shape`` and a 2-tensor field ``grid.shape + (n, n)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CCLG"
FORMAT_VERSION = 1
MIN_NODES = 8


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Axis-aligned grid; periodic axes omit the duplicate endpoint."""

    shape: tuple
    lower: tuple
    upper: tuple
    periodic: tuple

    def __post_init__(self):
        if not len(self.shape) == len(self.lower) == len(self.upper) == len(self.periodic):
            raise GridError("shape, bounds and periodic flags must have equal length")
        for m, a, b in zip(self.shape, self.lower, self.upper):
            if m < MIN_NODES:
                raise GridError(f"grid too coarse: {m} nodes on an axis, need >= {MIN_NODES}")
            if not b > a:
                raise GridError("grid spacings must be positive")

    @classmethod
    def torus(cls, n, m, length=2 * np.pi):
        return cls((m,) * n, (0.0,) * n, (float(length),) * n, (True,) * n)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def h(self):
        return tuple(
            (b - a) / (m if p else m - 1)
            for m, a, b, p in zip(self.shape, self.lower, self.upper, self.periodic)
        )

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axis(self, i):
        m, a, h = self.shape[i], self.lower[i], self.h[i]
        return a + h * np.arange(m)

    def coords(self):
        return np.meshgrid(*[self.axis(i) for i in range(self.ndim)], indexing="ij")

    def boundary_mask(self):
        """True on nodes that lie on a non-periodic face."""
        mask = np.zeros(self.shape, dtype=bool)
        for i, p in enumerate(self.periodic):
            if not p:
                idx = [slice(None)] * self.ndim
                idx[i] = 0
                mask[tuple(idx)] = True
                idx[i] = -1
                mask[tuple(idx)] = True
        return mask

    # -- stencils --------------------------------------------------------------

    def diff(self, f, axis, order=2):
        """First derivative along a grid axis."""
        h = self.h[axis]
        if self.periodic[axis]:
            if order == 2:
                return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
            if order == 4:
                return (
                    -np.roll(f, -2, axis)
                    + 8 * np.roll(f, -1, axis)
                    - 8 * np.roll(f, 1, axis)
                    + np.roll(f, 2, axis)
                ) / (12 * h)
            raise ValueError(f"unsupported stencil order {order}")
        if order == 2:
            return np.gradient(f, h, axis=axis, edge_order=2)
        if order == 4:
            return _diff4_bounded(f, h, axis)
        raise ValueError(f"unsupported stencil order {order}")

    def diff2(self, f, axis, order=2):
        """Second derivative along a grid axis."""
        h = self.h[axis]
        if self.periodic[axis]:
            if order == 2:
                return (np.roll(f, -1, axis) - 2 * f + np.roll(f, 1, axis)) / h**2
            if order == 4:
                return (
                    -np.roll(f, -2, axis)
                    + 16 * np.roll(f, -1, axis)
                    - 30 * f
                    + 16 * np.roll(f, 1, axis)
                    - np.roll(f, 2, axis)
                ) / (12 * h**2)
            raise ValueError(f"unsupported stencil order {order}")
        if order == 4:
            return self.diff(self.diff(f, axis, 4), axis, 4)
        f = np.moveaxis(f, axis, 0)
        out = np.empty_like(f)
        out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
        return np.moveaxis(out, 0, axis)

    def gradient(self, f, order=2):
        """Stack of first derivatives, shape ``f.shape + (ndim,)``."""
        return np.stack([self.diff(f, a, order) for a in range(self.ndim)], axis=-1)

    def hessian(self, f, order=2):
        """Coordinate second derivatives, shape ``f.shape + (ndim, ndim)``."""
        n = self.ndim
        out = np.empty(f.shape + (n, n))
        first = [self.diff(f, a, order) for a in range(n)]
        for a in range(n):
            out[..., a, a] = self.diff2(f, a, order)
            for b in range(a + 1, n):
                out[..., a, b] = out[..., b, a] = self.diff(first[a], b, order)
        return out

    def to_dict(self):
        return {
            "shape": list(self.shape),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "periodic": list(self.periodic),
        }


def _diff4_bounded(f, h, axis):
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    # one-sided fourth-order closures
    c = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    out[0] = np.tensordot(c, f[:5], axes=1)
    out[-1] = -np.tensordot(c, f[::-1][:5], axes=1)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    out[1] = np.tensordot(c1, f[:5], axes=1)
    out[-2] = -np.tensordot(c1, f[::-1][:5], axes=1)
    return np.moveaxis(out, 0, axis)


# -- binary grid format -----------------------------------------------------------


def encode_grid_field(grid: Grid, field: np.ndarray) -> bytes:
    """Header (dims, h, component count) followed by row-major little-endian doubles."""
    field = np.ascontiguousarray(field, dtype="<f8")
    comp_shape = field.shape[grid.ndim :]
    if field.shape[: grid.ndim] != grid.shape:
        raise GridError("field does not match grid shape")
    ncomp = int(np.prod(comp_shape)) if comp_shape else 1
    return b"".join(
        [
            MAGIC,
            struct.pack("<II", FORMAT_VERSION, grid.ndim),
            struct.pack(f"<{grid.ndim}I", *grid.shape),
            struct.pack(f"<{grid.ndim}d", *grid.h),
            struct.pack("<I", ncomp),
            field.tobytes(order="C"),
        ]
    )


def write_grid_field(path, grid: Grid, field: np.ndarray):
    Path(path).write_bytes(encode_grid_field(grid, field))


def read_grid_field(path):
    """Return ``(dims, h, ncomp, data)`` with data shaped ``dims + (ncomp,)`` or ``dims``."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise GridError(f"{path}: not a ccl grid file")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise GridError(f"{path}: unsupported version {version}")
    off = 12
    dims = struct.unpack_from(f"<{ndim}I", raw, off)
    off += 4 * ndim
    h = struct.unpack_from(f"<{ndim}d", raw, off)
    off += 8 * ndim
    (ncomp,) = struct.unpack_from("<I", raw, off)
    off += 4
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    expected = int(np.prod(dims)) * ncomp
    if data.size != expected:
        raise GridError(f"{path}: expected {expected} values, found {data.size}")
    shape = tuple(dims) + ((ncomp,) if ncomp > 1 else ())
    return tuple(dims), tuple(h), ncomp, data.reshape(shape).copy()


def csv_slice(grid: Grid, field: np.ndarray, axes=(0, 1), index=None) -> str:
    """2D slice through ``axes`` at ``index`` (default mid-grid) as CSV text."""
    a, b = axes
    idx = [s // 2 for s in grid.shape] if index is None else list(index)
    sl = list(idx)
    sl[a] = slice(None)
    sl[b] = slice(None)
    plane = field[tuple(sl)]
    if plane.ndim > 2:
        plane = plane.reshape(plane.shape[:2] + (-1,))[..., 0]
    xa, xb = grid.axis(a), grid.axis(b)
    lines = [f"x{a},x{b},value"]
    for i, x in enumerate(xa):
        for j, y in enumerate(xb):
            lines.append(f"{x:.17g},{y:.17g},{plane[i, j]:.17g}")
    return "\n".join(lines) + "\n"


def write_csv_slice(path, grid: Grid, field: np.ndarray, axes=(0, 1), index=None):
    Path(path).write_text(csv_slice(grid, field, axes, index))
