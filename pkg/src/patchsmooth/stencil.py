"""The constant-coefficient 7-point stencil and its dense matrix forms.

The default coefficients realise the scaled 3-d Poisson operator

    (A u)[i,j,k] = 6 u[i,j,k] - u[i-1,j,k] - u[i+1,j,k]
                             - u[i,j-1,k] - u[i,j+1,k]
                             - u[i,j,k-1] - u[i,j,k+1]

acting on a patch whose ghost cells carry the boundary and interface
values.  Two dense assemblies exist side by side:

* ``assemble_block_matrix`` builds the operator restricted to a block,
  keeping only couplings between cells of that block.  It depends on the
  block extent alone, never on where the block sits, which is what makes
  one inverse per block shape sufficient.
* ``assemble_patch_matrix`` builds the full interior operator of a single
  patch with the physical ghost rule (ghost = -interior) folded into the
  diagonal.  It is the reference operator for oracle tests and spectral
  estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import BlockRange, PatchDims, _int3

__all__ = [
    "Stencil7",
    "apply_stencil",
    "block_residual",
    "assemble_block_matrix",
    "assemble_patch_matrix",
]

# Dense patch assembly refuses anything bigger than this many unknowns.
_MAX_DENSE = 32768

# Neighbour offsets in the fixed face order -x, +x, -y, +y, -z, +z.
_OFFSETS = (
    (-1, 0, 0),
    (1, 0, 0),
    (0, -1, 0),
    (0, 1, 0),
    (0, 0, -1),
    (0, 0, 1),
)


@dataclass(frozen=True)
class Stencil7:
    """Center coefficient plus six face coefficients (-x,+x,-y,+y,-z,+z)."""

    center: float = 6.0
    faces: tuple = (-1.0, -1.0, -1.0, -1.0, -1.0, -1.0)

    def __post_init__(self):
        object.__setattr__(self, "center", float(self.center))
        faces = tuple(float(c) for c in self.faces)
        object.__setattr__(self, "faces", faces)
        if len(faces) != 6:
            raise ValueError(f"need exactly 6 face coefficients, got {len(faces)}")
        if not np.isfinite([self.center, *faces]).all():
            raise ValueError("stencil coefficients must be finite")
        if not self.center > 0:
            raise ValueError(f"center coefficient must be positive, got {self.center}")


def apply_stencil(stencil, patch, coords):
    """Pointwise A u at one interior cell, ghosts read as stored."""
    if patch.dims.ghost_width != 1:
        raise ValueError("stencil application requires ghost_width == 1")
    i, j, k = _int3(coords, "coords")
    nx, ny, nz = patch.dims.shape
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise ValueError(f"coords {coords!r} outside the interior box")
    u = patch.u
    g = patch.dims.ghost_width
    val = stencil.center * u[i + g, j + g, k + g]
    for c, (di, dj, dk) in zip(stencil.faces, _OFFSETS):
        val += c * u[i + g + di, j + g + dj, k + g + dk]
    return float(val)


def _shifted(slices, offset):
    return tuple(
        slice(s.start + d, s.stop + d) for s, d in zip(slices, offset)
    )


def block_residual(stencil, patch, block):
    """f - A u restricted to a block, flattened x fastest.

    Reads the current ghost values, so couplings that leave the block (to
    other blocks, to neighbour patches, or to the physical boundary) are all
    taken from u as stored.
    """
    if patch.dims.ghost_width != 1:
        raise ValueError("block residual requires ghost_width == 1")
    if not isinstance(block, BlockRange):
        raise TypeError(f"block must be a BlockRange, got {type(block).__name__}")
    if any(h > n for h, n in zip(block.hi, patch.dims.shape)):
        raise ValueError(f"block {block} leaves the interior {patch.dims.shape}")
    u = patch.u
    center = block.slices(patch.dims.ghost_width)
    acc = stencil.center * u[center]
    for c, off in zip(stencil.faces, _OFFSETS):
        acc += c * u[_shifted(center, off)]
    r = patch.f[block.slices(0)] - acc
    return np.ravel(r, order="F")


def assemble_block_matrix(stencil, extent):
    """Dense operator of one block, couplings inside the block only.

    The result depends on the extent alone: couplings that leave the block
    are not part of the matrix (the residual supplies them), and no boundary
    closure is applied, so every block of a given shape shares this matrix
    no matter where it sits in a patch.
    """
    ex, ey, ez = _int3(extent, "extent")
    if min(ex, ey, ez) < 1:
        raise ValueError(f"extent must be positive, got {(ex, ey, ez)}")
    n = ex * ey * ez
    a = np.zeros((n, n), dtype=np.float64, order="F")
    for z in range(ez):
        for y in range(ey):
            for x in range(ex):
                row = x + ex * (y + ey * z)
                a[row, row] = stencil.center
                for c, (di, dj, dk) in zip(stencil.faces, _OFFSETS):
                    p, q, r = x + di, y + dj, z + dk
                    if 0 <= p < ex and 0 <= q < ey and 0 <= r < ez:
                        col = p + ex * (q + ey * r)
                        a[row, col] = c
    return a


def assemble_patch_matrix(stencil, dims):
    """Dense interior operator of a single patch, all faces physical.

    The ghost rule ghost = -interior turns each out-of-patch coupling into a
    diagonal contribution: row diagonal = center - sum of face coefficients
    whose neighbour falls outside.  With the default coefficients that is
    6 plus the number of physical faces of the cell.
    """
    if not isinstance(dims, PatchDims):
        raise TypeError(f"dims must be a PatchDims, got {type(dims).__name__}")
    m = dims.interior_cells
    if m > _MAX_DENSE:
        raise ValueError(f"patch has {m} cells, dense assembly capped at {_MAX_DENSE}")
    nx, ny, nz = dims.shape
    a = np.zeros((m, m), dtype=np.float64, order="F")
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                row = x + nx * (y + ny * z)
                diag = stencil.center
                for c, (di, dj, dk) in zip(stencil.faces, _OFFSETS):
                    p, q, r = x + di, y + dj, z + dk
                    if 0 <= p < nx and 0 <= q < ny and 0 <= r < nz:
                        a[row, p + nx * (q + ny * r)] = c
                    else:
                        diag -= c
                a[row, row] = diag
    return a
