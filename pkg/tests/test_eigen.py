from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from neumannhole.assembly import FormPair, assemble
from neumannhole.eigen import solve_lowest
from neumannhole.errors import InvalidSpecError
from neumannhole.experiments import rectangle_eigenvalues
from neumannhole.geometry import DomainSpec, triangulate
from neumannhole.potential import PotentialModel


def test_two_by_two_trivial():
    K = sp.csr_matrix(np.array([[2.0, 0.0], [0.0, 5.0]], dtype=complex))
    M = sp.csr_matrix(np.eye(2))
    fp = FormPair(None, PotentialModel(), K, M, K.real)
    # mesh is only read for h
    fp.mesh = type("M", (), {"h": 1.0})()
    sol = solve_lowest(fp, 1)
    assert sol.eigenvalues[0] == pytest.approx(2.0)
    assert abs(abs(sol.eigenvectors[0, 0]) - 1) < 1e-12


def test_m_too_large(fp_square_b1):
    with pytest.raises(InvalidSpecError):
        solve_lowest(fp_square_b1, fp_square_b1.n)


@pytest.mark.parametrize("tol", [1e-13, 1e-3])
def test_tol_range(fp_square_b1, tol):
    with pytest.raises(InvalidSpecError):
        solve_lowest(fp_square_b1, 2, tol=tol)


@pytest.mark.parametrize("b0", [0.0, 1.0, 5.0])
def test_result_invariants(coarse_disk, b0):
    fp = assemble(coarse_disk, PotentialModel.uniform(b0))
    sol = solve_lowest(fp, 6)
    lam, X = sol.eigenvalues, sol.eigenvectors
    assert np.all(np.diff(lam) >= 0) and lam[0] >= -1e-9
    gram = X.conj().T @ (fp.M @ X)
    assert np.allclose(gram, np.eye(6), atol=1e-8)
    rq = np.einsum("ij,ij->j", X.conj(), fp.K @ X).real
    assert np.allclose(rq, lam, rtol=1e-8, atol=1e-12)
    assert np.all(sol.residuals <= 1e-8 * (1 + lam))


def test_dense_and_sparse_agree():
    mesh = triangulate(DomainSpec.unit_square(), None, 1 / 16)  # 289 nodes: dense path
    fp = assemble(mesh, PotentialModel.uniform(1.0))
    dense = solve_lowest(fp, 5).eigenvalues
    from neumannhole import eigen
    old = eigen.DENSE_LIMIT
    eigen.DENSE_LIMIT = 0
    try:
        sparse = solve_lowest(fp, 5).eigenvalues
    finally:
        eigen.DENSE_LIMIT = old
    assert np.allclose(dense, sparse, rtol=1e-9, atol=1e-10)


def test_refinement_improves_accuracy():
    exact = rectangle_eigenvalues(DomainSpec.unit_square(), 6)
    errs = []
    for n in (16, 32):
        mesh = triangulate(DomainSpec.unit_square(), None, 1 / n)
        lam = solve_lowest(assemble(mesh), 6).eigenvalues
        errs.append(np.max(np.abs(lam - exact)))
    assert errs[1] < errs[0]


def test_deterministic_output(fp_square_b1):
    a = solve_lowest(fp_square_b1, 4)
    b = solve_lowest(fp_square_b1, 4)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
