"""Structured patches with ghost layers and their block decompositions.

A patch is a box of nx x ny x nz interior cells surrounded by a one-cell
ghost layer.  The solution field u lives on the padded box (ghosts included),
while the right-hand side f and the Jacobi staging field v live on the
interior only.  Storage is a single contiguous array per field, lexicographic
with x fastest, which in numpy terms is a Fortran-ordered 3-d array indexed
``a[i, j, k]``::

      ^ j
      |      +---+---+---+---+
      |      | g | g | g | g |      g = ghost cell
      |      +---+---+---+---+
      |      | g |interior| g |     one ghost ring around the
      |      +---+---+---+---+     nx*ny*nz interior box
      |      | g | g | g | g |
      |      +---+---+---+---+
      +------------------------> i

A ``Level`` is a set of non-overlapping patches in a shared integer index
space plus the face-abutment adjacency between them.  Ghost cells that face
an abutting neighbour are filled by copying the neighbour's interior values;
all remaining (physical) ghosts are filled by reflecting the adjacent
interior value with a sign flip, which realises a homogeneous Dirichlet
condition on the face.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PatchDims",
    "Patch",
    "BlockRange",
    "BlockDecomposition",
    "InterfaceCopy",
    "Level",
    "global_index",
    "block_cell",
    "ghost_overhead",
    "decompose_blocks",
    "fill_physical_ghosts",
    "exchange_interface_ghosts",
]

# Linear index space must stay addressable with signed 64-bit offsets.
_MAX_LINEAR = 2**62


def _int3(value, name):
    try:
        triple = tuple(int(c) for c in value)
    except TypeError:
        raise ValueError(f"{name} must be a triple of integers, got {value!r}") from None
    if len(triple) != 3:
        raise ValueError(f"{name} must have exactly 3 entries, got {value!r}")
    return triple


@dataclass(frozen=True)
class PatchDims:
    """Interior extents of a patch plus the ghost width.

    Parameters
    ----------
    nx, ny, nz : int
        Interior cell counts along each axis, all >= 1.
    ghost_width : int
        Ghost ring width.  Only 0 (bare box, no smoothing possible) and 1
        (matches the 7-point stencil's reach) are accepted.
    """

    nx: int
    ny: int
    nz: int
    ghost_width: int = 1

    def __post_init__(self):
        for name, n in (("nx", self.nx), ("ny", self.ny), ("nz", self.nz)):
            if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
                raise ValueError(f"{name} must be a positive integer, got {n!r}")
        if self.ghost_width not in (0, 1):
            raise ValueError(
                f"ghost_width must be 0 or 1, got {self.ghost_width!r}"
            )
        if self.total_cells > _MAX_LINEAR:
            raise ValueError("padded patch exceeds the linear index space")

    @property
    def shape(self):
        """Interior shape (nx, ny, nz)."""
        return (self.nx, self.ny, self.nz)

    @property
    def padded_shape(self):
        g = 2 * self.ghost_width
        return (self.nx + g, self.ny + g, self.nz + g)

    @property
    def interior_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def total_cells(self):
        """Cell count of the padded box, ghosts included."""
        px, py, pz = self.padded_shape
        return px * py * pz


def global_index(dims, coords, with_ghost=False):
    """Linear offset of a cell in the patch's storage.

    With ``with_ghost=False`` the coordinates address the interior box and
    the offset is relative to interior-only storage (used for f and v).
    With ``with_ghost=True`` the coordinates may extend one ghost ring
    outside and the offset is relative to the padded storage of u.
    """
    i, j, k = _int3(coords, "coords")
    g = dims.ghost_width
    if with_ghost:
        lo, nx, ny, nz = -g, *dims.padded_shape
        if not (lo <= i < dims.nx + g and lo <= j < dims.ny + g and lo <= k < dims.nz + g):
            raise ValueError(f"coords {coords!r} outside the padded box")
        return (i + g) + nx * ((j + g) + ny * (k + g))
    if not (0 <= i < dims.nx and 0 <= j < dims.ny and 0 <= k < dims.nz):
        raise ValueError(f"coords {coords!r} outside the interior box")
    return i + dims.nx * (j + dims.ny * k)


def block_cell(block_index, block_dims, local):
    """Interior coordinates of a cell addressed block-wise.

    ``block_index`` counts blocks per axis, ``block_dims`` is the nominal
    block extent and ``local`` is the in-block offset, so the cell sits at
    ``block_index * block_dims + local`` on each axis.
    """
    b = _int3(block_index, "block_index")
    d = _int3(block_dims, "block_dims")
    t = _int3(local, "local")
    return tuple(bi * di + ti for bi, di, ti in zip(b, d, t))


def ghost_overhead(dims):
    """Ghost cell count and its fraction of the interior cell count."""
    ghosts = dims.total_cells - dims.interior_cells
    return ghosts, ghosts / dims.interior_cells


class Patch:
    """One structured box of cells: padded solution u, interior f and v.

    Two padded buffers back the patch.  ``u`` always refers to the active
    buffer (ghosts included) and ``v`` to the interior view of the inactive
    one, so a Jacobi step can stage its update into v and then promote it
    with :meth:`swap_buffers` without copying any field contents.  The ghost
    ring of the freshly promoted buffer is stale until the next ghost
    refresh.

    ``origin`` places the patch's interior cell (0, 0, 0) in the shared
    integer index space of a :class:`Level`, which is what face abutment is
    matched against.

    All structure is fixed after construction; only field contents mutate.
    """

    __slots__ = ("dims", "origin", "f", "_bufs", "_active")

    def __init__(self, dims, origin=(0, 0, 0)):
        if not isinstance(dims, PatchDims):
            raise TypeError(f"dims must be a PatchDims, got {type(dims).__name__}")
        self.dims = dims
        self.origin = _int3(origin, "origin")
        self._bufs = (
            np.zeros(dims.padded_shape, dtype=np.float64, order="F"),
            np.zeros(dims.padded_shape, dtype=np.float64, order="F"),
        )
        self._active = 0
        self.f = np.zeros(dims.shape, dtype=np.float64, order="F")

    @property
    def u(self):
        """Active padded field, indexed [i, j, k] with ghost offset +1."""
        return self._bufs[self._active]

    @property
    def v(self):
        """Interior view of the inactive (staging) buffer."""
        return self._bufs[1 - self._active][self._interior_slices]

    @property
    def interior(self):
        """Interior view of the active field."""
        return self.u[self._interior_slices]

    @property
    def _interior_slices(self):
        g = self.dims.ghost_width
        return tuple(slice(g, g + n) for n in self.dims.shape)

    def swap_buffers(self):
        """Exchange the roles of the active and staging buffers."""
        self._active = 1 - self._active

    @property
    def global_box(self):
        """Half-open interior box [origin, origin + shape) per axis."""
        return tuple(
            (o, o + n) for o, n in zip(self.origin, self.dims.shape)
        )

    def __repr__(self):
        nx, ny, nz = self.dims.shape
        return f"Patch({nx}x{ny}x{nz} at {self.origin})"


@dataclass(frozen=True)
class BlockRange:
    """Half-open cell range [lo, lo + extent) inside a patch interior."""

    lo: tuple
    extent: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", _int3(self.lo, "lo"))
        object.__setattr__(self, "extent", _int3(self.extent, "extent"))
        if any(c < 0 for c in self.lo):
            raise ValueError(f"block lo must be non-negative, got {self.lo}")
        if any(e < 1 for e in self.extent):
            raise ValueError(f"block extent must be positive, got {self.extent}")

    @property
    def hi(self):
        return tuple(l + e for l, e in zip(self.lo, self.extent))

    @property
    def cells(self):
        return self.extent[0] * self.extent[1] * self.extent[2]

    def slices(self, offset=0):
        """Index slices for this range, shifted by ``offset`` per axis.

        offset=0 addresses interior-only arrays (f, v); offset equal to the
        ghost width addresses the padded array u.
        """
        return tuple(
            slice(l + offset, l + e + offset) for l, e in zip(self.lo, self.extent)
        )


@dataclass(frozen=True)
class BlockDecomposition:
    """All block ranges of one patch interior, lexicographic with x fastest.

    ``counts`` holds the number of blocks per axis; trailing blocks are
    truncated when the interior extent is not a multiple of the block size.
    Blocks never overlap.
    """

    block_dims: tuple
    counts: tuple
    ranges: tuple

    @property
    def shapes(self):
        """Distinct block extents, in first-seen (lexicographic) order."""
        seen = {}
        for r in self.ranges:
            seen.setdefault(r.extent, None)
        return tuple(seen)

    def block_of(self, coords):
        """Lexicographic index of the block containing an interior cell."""
        i, j, k = _int3(coords, "coords")
        bx, by, bz = self.block_dims
        cx, cy, cz = self.counts
        ix, iy, iz = i // bx, j // by, k // bz
        if not (0 <= ix < cx and 0 <= iy < cy and 0 <= iz < cz):
            raise ValueError(f"coords {coords!r} outside the decomposed interior")
        return ix + cx * (iy + cy * iz)


def decompose_blocks(dims, block_dims):
    """Split a patch interior into blocks of at most ``block_dims`` cells.

    Every axis is covered by ceil(n/b) ranges of extent b, except the last
    range which is truncated to the remainder when b does not divide n.
    """
    if not isinstance(dims, PatchDims):
        raise TypeError(f"dims must be a PatchDims, got {type(dims).__name__}")
    b = _int3(block_dims, "block_dims")
    n = dims.shape
    if any(c < 1 for c in b):
        raise ValueError(f"block_dims must be positive, got {b}")
    counts = tuple(-(-ni // bi) for ni, bi in zip(n, b))
    ranges = []
    for kz in range(counts[2]):
        for ky in range(counts[1]):
            for kx in range(counts[0]):
                lo = (kx * b[0], ky * b[1], kz * b[2])
                ext = tuple(
                    min(bi, ni - li) for bi, ni, li in zip(b, n, lo)
                )
                ranges.append(BlockRange(lo, ext))
    return BlockDecomposition(block_dims=b, counts=counts, ranges=tuple(ranges))


def fill_physical_ghosts(patch):
    """Extrapolate every ghost cell from the adjacent interior value.

    ghost = -interior realises a zero face value (homogeneous Dirichlet).
    The rule is applied per axis, x then y then z, so edge and corner ghosts
    pick up the already-filled face values of earlier passes.  Interface
    ghosts are overwritten afterwards by :func:`exchange_interface_ghosts`;
    running the physical fill over the whole ring first keeps the pass order
    fixed and the result a function of interior values only.
    """
    if patch.dims.ghost_width != 1:
        raise ValueError("ghost fill requires ghost_width == 1")
    u = patch.u
    u[0, :, :] = -u[1, :, :]
    u[-1, :, :] = -u[-2, :, :]
    u[:, 0, :] = -u[:, 1, :]
    u[:, -1, :] = -u[:, -2, :]
    u[:, :, 0] = -u[:, :, 1]
    u[:, :, -1] = -u[:, :, -2]
    return patch


@dataclass(frozen=True)
class InterfaceCopy:
    """One directed ghost fill: src interior layer -> dst ghost layer.

    ``src_lo`` addresses the source patch interior, ``dst_lo`` the ghost
    position in destination interior coordinates (exactly one coordinate is
    -1 or the interior extent), and both boxes span ``extent`` cells and the
    same region of the shared index space.
    """

    src: int
    dst: int
    src_lo: tuple
    dst_lo: tuple
    extent: tuple

    def __post_init__(self):
        object.__setattr__(self, "src_lo", _int3(self.src_lo, "src_lo"))
        object.__setattr__(self, "dst_lo", _int3(self.dst_lo, "dst_lo"))
        object.__setattr__(self, "extent", _int3(self.extent, "extent"))


def _mirror(copy, patches):
    """The opposite-direction copy implied by a face abutment."""
    axis = _ghost_axis(copy, patches)
    src_dims = patches[copy.src].dims.shape
    dst_dims = patches[copy.dst].dims.shape
    new_src_lo = list(copy.dst_lo)
    new_dst_lo = list(copy.src_lo)
    if copy.dst_lo[axis] == -1:
        # dst's low ghost came from src's high layer; mirrored copy feeds
        # src's high ghost from dst's low layer.
        new_src_lo[axis] = 0
        new_dst_lo[axis] = src_dims[axis]
    else:
        new_src_lo[axis] = dst_dims[axis] - 1
        new_dst_lo[axis] = -1
    return InterfaceCopy(
        src=copy.dst,
        dst=copy.src,
        src_lo=tuple(new_src_lo),
        dst_lo=tuple(new_dst_lo),
        extent=copy.extent,
    )


def _ghost_axis(copy, patches):
    dst = patches[copy.dst]
    ghost_axes = [
        ax
        for ax in range(3)
        if copy.dst_lo[ax] == -1 or copy.dst_lo[ax] == dst.dims.shape[ax]
    ]
    if len(ghost_axes) != 1:
        raise ValueError(
            f"interface copy must target exactly one ghost face, got {copy}"
        )
    return ghost_axes[0]


def _validate_adjacency(patches, adjacency):
    seen = set()
    for copy in adjacency:
        if not (0 <= copy.src < len(patches) and 0 <= copy.dst < len(patches)):
            raise ValueError(f"interface copy references unknown patch: {copy}")
        if copy.src == copy.dst:
            raise ValueError(f"patch cannot abut itself: {copy}")
        src, dst = patches[copy.src], patches[copy.dst]
        axis = _ghost_axis(copy, patches)
        if copy.extent[axis] != 1:
            raise ValueError(f"ghost layer must be one cell thick: {copy}")
        for ax in range(3):
            if copy.src_lo[ax] < 0 or copy.src_lo[ax] + copy.extent[ax] > src.dims.shape[ax]:
                raise ValueError(f"source range leaves the interior: {copy}")
            if ax != axis and (
                copy.dst_lo[ax] < 0
                or copy.dst_lo[ax] + copy.extent[ax] > dst.dims.shape[ax]
            ):
                raise ValueError(f"ghost range leaves the face: {copy}")
        src_global = tuple(o + l for o, l in zip(src.origin, copy.src_lo))
        dst_global = tuple(o + l for o, l in zip(dst.origin, copy.dst_lo))
        if src_global != dst_global:
            raise ValueError(
                f"interface copy is not aligned in the shared index space: {copy}"
            )
        seen.add(copy)
    for copy in adjacency:
        if _mirror(copy, patches) not in seen:
            raise ValueError(f"adjacency is not symmetric: no mirror for {copy}")


def _overlap_1d(a_lo, a_hi, b_lo, b_hi):
    lo, hi = max(a_lo, b_lo), min(a_hi, b_hi)
    return (lo, hi) if lo < hi else None


def _find_abutments(patches):
    copies = []
    for ia, ib in itertools.combinations(range(len(patches)), 2):
        a, b = patches[ia], patches[ib]
        boxes = list(zip(a.global_box, b.global_box))
        overlaps = [_overlap_1d(*ax_a, *ax_b) for ax_a, ax_b in boxes]
        if all(o is not None for o in overlaps):
            raise ValueError(f"patches {ia} and {ib} overlap in the index space")
        for axis in range(3):
            (a_lo, a_hi), (b_lo, b_hi) = boxes[axis]
            trans = [overlaps[ax] for ax in range(3) if ax != axis]
            if any(t is None for t in trans):
                continue
            if a_hi == b_lo:
                low, high, ilow, ihigh = a, b, ia, ib
            elif b_hi == a_lo:
                low, high, ilow, ihigh = b, a, ib, ia
            else:
                continue
            # low patch's last interior layer feeds high patch's low ghost
            # and vice versa, over the transverse overlap box.
            src_lo, dst_lo, ext = [0] * 3, [0] * 3, [0] * 3
            src_lo[axis] = low.dims.shape[axis] - 1
            dst_lo[axis] = -1
            ext[axis] = 1
            t = iter(trans)
            for ax in range(3):
                if ax == axis:
                    continue
                t_lo, t_hi = next(t)
                src_lo[ax] = t_lo - low.origin[ax]
                dst_lo[ax] = t_lo - high.origin[ax]
                ext[ax] = t_hi - t_lo
            fwd = InterfaceCopy(ilow, ihigh, tuple(src_lo), tuple(dst_lo), tuple(ext))
            copies.append(fwd)
            copies.append(_mirror(fwd, patches))
    return copies


class Level:
    """Non-overlapping patches plus their face-abutment adjacency.

    When ``adjacency`` is omitted it is derived from the patch origins and
    dims; an explicitly supplied list is validated for symmetry and
    geometric consistency instead.
    """

    def __init__(self, patches, adjacency=None):
        patches = tuple(patches)
        if not patches:
            raise ValueError("a level needs at least one patch")
        for p in patches:
            if not isinstance(p, Patch):
                raise TypeError(f"level entries must be Patch, got {type(p).__name__}")
        if adjacency is None:
            adjacency = _find_abutments(patches)
        else:
            adjacency = list(adjacency)
            for ia, ib in itertools.combinations(range(len(patches)), 2):
                overlaps = [
                    _overlap_1d(*ax_a, *ax_b)
                    for ax_a, ax_b in zip(patches[ia].global_box, patches[ib].global_box)
                ]
                if all(o is not None for o in overlaps):
                    raise ValueError(f"patches {ia} and {ib} overlap in the index space")
            _validate_adjacency(patches, adjacency)
        self.patches = patches
        self.adjacency = tuple(adjacency)

    @property
    def interior_cells(self):
        return sum(p.dims.interior_cells for p in self.patches)

    @property
    def allocated_cells(self):
        """Cells actually allocated: two padded buffers plus f per patch."""
        return sum(2 * p.dims.total_cells + p.dims.interior_cells for p in self.patches)

    def refresh_ghosts(self):
        """Fill physical ghosts, then overwrite interface ghosts.

        Interface values are snapshots of the neighbour interiors taken
        before any ghost is written, so the result does not depend on patch
        order.
        """
        for p in self.patches:
            fill_physical_ghosts(p)
        exchange_interface_ghosts(self)
        return self

    def __repr__(self):
        return f"Level({len(self.patches)} patches, {len(self.adjacency)} interface copies)"


def exchange_interface_ghosts(level):
    """Copy abutting neighbour interiors into interface ghost cells.

    All source layers are read before any ghost cell is written (snapshot
    semantics), so concurrent-looking exchanges of many patches agree with
    any sequential order.
    """
    staged = []
    for copy in level.adjacency:
        src = level.patches[copy.src]
        g = src.dims.ghost_width
        if g != 1:
            raise ValueError("interface exchange requires ghost_width == 1")
        sl = tuple(
            slice(l + g, l + e + g) for l, e in zip(copy.src_lo, copy.extent)
        )
        staged.append((copy, src.u[sl].copy()))
    for copy, data in staged:
        dst = level.patches[copy.dst]
        g = dst.dims.ghost_width
        sl = tuple(
            slice(l + g, l + e + g) for l, e in zip(copy.dst_lo, copy.extent)
        )
        dst.u[sl] = data
    return level
