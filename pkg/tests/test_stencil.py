import numpy as np
import pytest

from patchsmooth.grid import BlockRange, Level, Patch, PatchDims, decompose_blocks
from patchsmooth.stencil import (
    Stencil7,
    apply_stencil,
    assemble_block_matrix,
    assemble_patch_matrix,
    block_residual,
)


def _random_patch(shape, seed=0):
    p = Patch(PatchDims(*shape))
    rng = np.random.default_rng(seed)
    p.interior[...] = rng.random(shape)
    p.f[...] = rng.random(shape)
    Level([p]).refresh_ghosts()
    return p


def test_stencil_defaults():
    st = Stencil7()
    assert st.center == 6.0
    assert st.faces == (-1.0,) * 6


def test_stencil_validation():
    with pytest.raises(ValueError):
        Stencil7(center=0.0)
    with pytest.raises(ValueError):
        Stencil7(center=-2.0)
    with pytest.raises(ValueError):
        Stencil7(faces=(-1.0,) * 5)


def test_apply_stencil_constant_field():
    p = Patch(PatchDims(3, 3, 3))
    p.u[...] = 1.0
    assert apply_stencil(Stencil7(), p, (1, 1, 1)) == 0.0


def test_apply_stencil_deltas():
    st = Stencil7()
    p = Patch(PatchDims(3, 3, 3))
    p.interior[1, 1, 1] = 1.0
    assert apply_stencil(st, p, (1, 1, 1)) == 6.0
    p.u[...] = 1.0
    p.interior[1, 1, 1] = 0.0
    assert apply_stencil(st, p, (1, 1, 1)) == -6.0


def test_apply_stencil_range_checks():
    p = Patch(PatchDims(2, 2, 2))
    with pytest.raises(ValueError):
        apply_stencil(Stencil7(), p, (2, 0, 0))


def test_block_residual_zero_cases():
    st = Stencil7()
    p = Patch(PatchDims(4, 4, 4))
    full = BlockRange((0, 0, 0), (4, 4, 4))
    assert not block_residual(st, p, full).any()
    # constant one everywhere, ghosts included, annihilates the stencil
    p.u[...] = 1.0
    assert not block_residual(st, p, full).any()


def test_block_residual_matches_dense_restriction():
    """Residual of a block equals f - A u restricted to the block's cells."""
    st = Stencil7()
    p = _random_patch((4, 4, 4), seed=5)
    a = assemble_patch_matrix(st, p.dims)
    full = p.f.ravel(order="F") - a @ p.interior.ravel(order="F")
    dec = decompose_blocks(p.dims, (2, 2, 2))
    for r in dec.ranges:
        got = block_residual(st, p, r)
        idx = [
            i + 4 * (j + 4 * k)
            for k in range(r.lo[2], r.lo[2] + r.extent[2])
            for j in range(r.lo[1], r.lo[1] + r.extent[1])
            for i in range(r.lo[0], r.lo[0] + r.extent[0])
        ]
        np.testing.assert_allclose(got, full[idx], rtol=0, atol=1e-13)


@pytest.mark.parametrize(
    "shape,block",
    [
        ((8, 8, 8), (2, 2, 2)),
        ((8, 8, 8), (8, 8, 8)),
        ((7, 6, 5), (4, 4, 4)),
        ((5, 5, 5), (2, 3, 4)),
    ],
)
def test_concatenated_block_residuals_equal_patch_residual(shape, block):
    st = Stencil7()
    p = _random_patch(shape, seed=shape[0])
    a = assemble_patch_matrix(st, p.dims)
    want = p.f.ravel(order="F") - a @ p.interior.ravel(order="F")
    got = np.full(p.dims.interior_cells, np.nan)
    for r in decompose_blocks(p.dims, block).ranges:
        vals = block_residual(st, p, r).reshape(r.extent, order="F")
        box = np.zeros(p.dims.shape, dtype=bool)
        box[r.slices(0)] = True
        got[box.ravel(order="F")] = vals.ravel(order="F")
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-13)


def test_block_matrix_single_cell():
    a = assemble_block_matrix(Stencil7(), (1, 1, 1))
    np.testing.assert_array_equal(a, [[6.0]])


def test_block_matrix_pair():
    a = assemble_block_matrix(Stencil7(), (2, 1, 1))
    np.testing.assert_array_equal(a, [[6.0, -1.0], [-1.0, 6.0]])


def test_block_matrix_2x2x2():
    a = assemble_block_matrix(Stencil7(), (2, 2, 2))
    assert a.shape == (8, 8)
    np.testing.assert_array_equal(a, a.T)
    for row in a:
        assert row[row != 0.0].tolist().count(-1.0) == 3
    np.testing.assert_array_equal(np.diag(a), np.full(8, 6.0))


def test_block_matrix_excludes_out_of_block_couplings():
    # same extent, different position: the matrix depends on shape only
    a = assemble_block_matrix(Stencil7(), (3, 2, 1))
    assert a.shape == (6, 6)
    # row sums show how many neighbors stayed inside the block
    sums = a.sum(axis=1)
    assert sums.min() >= 6.0 - 3.0
    np.testing.assert_array_equal(a, a.T)


def test_patch_matrix_boundary_closure():
    st = Stencil7()
    np.testing.assert_array_equal(assemble_patch_matrix(st, PatchDims(1, 1, 1)), [[12.0]])
    np.testing.assert_array_equal(
        assemble_patch_matrix(st, PatchDims(2, 1, 1)), [[11.0, -1.0], [-1.0, 11.0]]
    )


def test_patch_matrix_row_sums():
    """Interior rows sum to zero, boundary rows to 2 per closed face."""
    st = Stencil7()
    dims = PatchDims(4, 3, 5)
    a = assemble_patch_matrix(st, dims)
    sums = a.sum(axis=1)
    ell = 0
    for k in range(5):
        for j in range(3):
            for i in range(4):
                faces = sum(
                    (c == 0) + (c == n - 1)
                    for c, n in zip((i, j, k), dims.shape)
                )
                assert sums[ell] == 2.0 * faces
                ell += 1


def test_patch_matrix_symmetry():
    a = assemble_patch_matrix(Stencil7(), PatchDims(3, 4, 2))
    np.testing.assert_array_equal(a, a.T)


def test_patch_matrix_matches_stencil_application():
    """Dense assembly realizes ghost fill followed by stencil application."""
    st = Stencil7()
    dims = PatchDims(4, 4, 4)
    a = assemble_patch_matrix(st, dims)
    rng = np.random.default_rng(123)
    p = Patch(dims)
    for _ in range(100):
        x = rng.standard_normal(dims.shape)
        p.interior[...] = x
        Level([p]).refresh_ghosts()
        want = np.array(
            [
                apply_stencil(st, p, (i, j, k))
                for k in range(4)
                for j in range(4)
                for i in range(4)
            ]
        )
        got = a @ x.ravel(order="F")
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_patch_matrix_size_guard():
    with pytest.raises(ValueError):
        assemble_patch_matrix(Stencil7(), PatchDims(33, 32, 32))
