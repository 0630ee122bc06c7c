from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannhole.assembly import (apply_hamiltonian, assemble, export_coo, local_matrices, norm0,
                                  norm1, norm2, norms)
from neumannhole.eigen import solve_lowest
from neumannhole.errors import AssemblyError
from neumannhole.geometry import Mesh, triangulate
from neumannhole.potential import PotentialModel, gauge_shift


def _reference_triangle():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=np.array([[0, 1], [1, 2], [2, 0]]),
                boundary_tags=np.zeros(3, dtype=np.int8), h=1.0, grid=(0, 0, 1, 1, 1, 1),
                cell_tri=np.array([0, -1]))


def test_reference_triangle_stiffness():
    stiff, mass, lap = local_matrices(_reference_triangle(), PotentialModel())
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(lap[0], expected)
    assert np.allclose(stiff[0].real, expected) and np.all(stiff[0].imag == 0)
    assert mass[0].sum() == pytest.approx(0.5)


def test_degenerate_triangle_named():
    mesh = _reference_triangle()
    mesh.nodes[2] = [2.0, 0.0]
    with pytest.raises(AssemblyError, match="triangle 0"):
        assemble(mesh, PotentialModel())


def test_mass_sums_to_area(coarse_parent, coarse_disk):
    for mesh in (coarse_parent, coarse_disk):
        fp = assemble(mesh, PotentialModel.uniform(1.0))
        assert fp.M.sum() == pytest.approx(mesh.areas().sum(), rel=1e-10)
    assert assemble(coarse_parent).M.sum() == pytest.approx(1.0, rel=1e-10)


def test_constant_is_ground_state(coarse_parent):
    fp = assemble(coarse_parent, PotentialModel())
    u = np.ones(fp.n)
    assert abs(fp.form(u)) < 1e-12


@pytest.mark.parametrize("b0", [0.0, 1.0, 5.0])
def test_formpair_invariants(coarse_disk, b0):
    fp = assemble(coarse_disk, gauge_shift(PotentialModel.uniform(b0), "xy", 0.5))
    inv = fp.invariants()
    assert inv["hermitian_defect"] <= 1e-12
    assert inv["mass_min_diag"] > 0
    assert abs((fp.M - fp.M.T)).max() == 0
    sol = solve_lowest(fp, 1)
    assert sol.eigenvalues[0] >= -1e-9


def test_apply_hamiltonian_eigenvector(fp_square_b1):
    sol = solve_lowest(fp_square_b1, 3)
    for lam, x in zip(sol.eigenvalues, sol.eigenvectors.T):
        assert np.allclose(apply_hamiltonian(fp_square_b1, x), lam * x, atol=1e-7)


def test_apply_hamiltonian_zero(fp_square_b1):
    assert np.all(apply_hamiltonian(fp_square_b1, np.zeros(fp_square_b1.n)) == 0)


def test_self_adjoint_identity(fp_square_b1, rng):
    u = rng.normal(size=fp_square_b1.n) + 1j * rng.normal(size=fp_square_b1.n)
    w = apply_hamiltonian(fp_square_b1, u)
    a = np.vdot(u, fp_square_b1.M @ w)
    b = np.vdot(u, fp_square_b1.K @ u)
    assert abs(a - b) <= 1e-10 * abs(b)


def test_norms_zero(fp_square_b1):
    z = np.zeros(fp_square_b1.n)
    assert [norms(fp_square_b1, z, k) for k in range(3)] == [0.0, 0.0, 0.0]


def test_norms_of_eigenpair(fp_square_b1):
    sol = solve_lowest(fp_square_b1, 4)
    for lam, x in zip(sol.eigenvalues, sol.eigenvectors.T):
        assert norm0(fp_square_b1, x) == pytest.approx(1.0, rel=1e-8)
        assert norm1(fp_square_b1, x) == pytest.approx(np.sqrt(1 + lam), rel=1e-8)
        assert norm2(fp_square_b1, x) == pytest.approx(1 + lam, rel=1e-7)


def test_norm_chain_random(fp_square_b1, rng):
    sol = solve_lowest(fp_square_b1, 6)
    for _ in range(100):
        u = rng.normal(size=fp_square_b1.n) + 1j * rng.normal(size=fp_square_b1.n)
        assert norm0(fp_square_b1, u) <= norm1(fp_square_b1, u)
        c = rng.normal(size=6) + 1j * rng.normal(size=6)
        v = sol.eigenvectors @ c
        assert norm1(fp_square_b1, v) <= norm2(fp_square_b1, v) * (1 + 1e-10)


@given(scale=st.complex_numbers(min_magnitude=0.0, max_magnitude=1e3, allow_nan=False,
                                allow_infinity=False), seed=st.integers(0, 1000))
def test_norms_homogeneous(fp_square_b1, scale, seed):
    u = np.random.default_rng(seed).normal(size=fp_square_b1.n).astype(complex)
    for k in range(3):
        assert norms(fp_square_b1, scale * u, k) == pytest.approx(abs(scale) * norms(fp_square_b1, u, k),
                                                                  rel=1e-9, abs=1e-12)


def test_form_monotone_under_removal(coarse_parent, coarse_disk, rng):
    pot = PotentialModel.uniform(1.0)
    fo = assemble(coarse_parent, pot)
    fh = assemble(coarse_disk, pot)
    for _ in range(10):
        f = rng.normal(size=fo.n) + 1j * rng.normal(size=fo.n)
        g = f[coarse_disk.parent_map]
        assert fh.form(g).real <= fo.form(f).real + 1e-12
        assert norm0(fh, g) <= norm0(fo, f)


def test_export_coo(tmp_path, coarse_parent):
    fp = assemble(coarse_parent, PotentialModel.uniform(1.0))
    path = tmp_path / "k.txt"
    export_coo(fp.K, path)
    lines = path.read_text().splitlines()
    assert len(lines) == fp.K.nnz
    r, c, re, im = lines[0].split()
    assert complex(fp.K[int(r), int(c)]) == complex(float(re), float(im))


def test_assembly_deterministic(coarse_disk):
    pot = PotentialModel.uniform(2.0)
    a = assemble(coarse_disk, pot).K
    b = assemble(coarse_disk, pot).K
    assert (a != b).nnz == 0
