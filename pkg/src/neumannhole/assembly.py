"""P1 assembly of the magnetic Neumann form and the mass matrix.

The sesquilinear form is

    a(u, v) = integral of (i grad u + A u) . conj(i grad v + A v)

and ``K`` is stored so that ``a(u, v) = v^* K u``.  No boundary condition is
imposed anywhere: the Neumann condition is natural for this form.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, LinearSolveError
from .geometry import Mesh
from .potential import PotentialModel, eval_potential

# mid-edge rule: quadrature point q sits on the edge opposite vertex (q + 2) % 3
_PHI_Q = np.array([[0.5, 0.5, 0.0],
                   [0.0, 0.5, 0.5],
                   [0.5, 0.0, 0.5]])


def _geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    bad = np.flatnonzero(area <= 0.0)
    if len(bad):
        raise AssemblyError(f"degenerate or clockwise triangle {int(bad[0])} "
                            f"(nodes {mesh.triangles[bad[0]].tolist()}, area {area[bad[0]]:g})")
    # gradients of the barycentric coordinates, shape (T, 3, 2)
    g = np.empty((len(p), 3, 2))
    g[:, 1, 0] = d2[:, 1] / det
    g[:, 1, 1] = -d2[:, 0] / det
    g[:, 2, 0] = -d1[:, 1] / det
    g[:, 2, 1] = d1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    qpts = np.einsum("qk,tkd->tqd", _PHI_Q, p)
    return area, g, qpts


def local_matrices(mesh: Mesh, potential: PotentialModel):
    """Element stiffness (complex, ``(T, 3, 3)``), mass and A-free stiffness.

    Entry ``[t, k, j]`` couples test function ``k`` with trial function ``j``.
    """
    area, g, qpts = _geometry(mesh)
    lap = area[:, None, None] * np.einsum("tjd,tkd->tkj", g, g)
    mass = area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    if potential.is_zero:
        return lap.astype(complex), mass, lap
    ax, ay = eval_potential(potential, qpts[..., 0], qpts[..., 1])
    w = area / 3.0
    # A(q) . grad phi_j
    agrad = ax[:, :, None] * g[:, None, :, 0] + ay[:, :, None] * g[:, None, :, 1]
    # sum_q w phi_k(q) A(q).grad phi_j
    t1 = w[:, None, None] * np.einsum("qk,tqj->tkj", _PHI_Q, agrad)
    a2 = ax * ax + ay * ay
    t3 = w[:, None, None] * np.einsum("tq,qk,qj->tkj", a2, _PHI_Q, _PHI_Q)
    stiff = lap + t3 + 1j * (t1 - np.transpose(t1, (0, 2, 1)))
    return stiff, mass, lap


def _scatter(mesh: Mesh, local: np.ndarray, mask: np.ndarray | None = None) -> sp.csr_matrix:
    tris = mesh.triangles
    if mask is not None:
        tris = tris[mask]
        local = local[mask]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_nodes
    m = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return m.tocsr()


class FormPair:
    """Stiffness ``K`` (Hermitian) and consistent mass ``M`` (SPD) on one mesh."""

    def __init__(self, mesh: Mesh, potential: PotentialModel, K: sp.csr_matrix,
                 M: sp.csr_matrix, K0: sp.csr_matrix, local=None):
        self.mesh = mesh
        self.potential = potential
        self.K = K
        self.M = M
        self.K0 = K0  # A = 0 stiffness, i.e. the plain Dirichlet integral
        self._local = local

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @cached_property
    def _mass_lu(self):
        return spla.splu(self.M.tocsc())

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return self._mass_lu.solve(np.ascontiguousarray(rhs.real)) + \
                1j * self._mass_lu.solve(np.ascontiguousarray(rhs.imag))
        return self._mass_lu.solve(rhs)

    def restricted(self, mask: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        """``(K, M, K0)`` assembled over the elements selected by ``mask`` only."""
        stiff, mass, lap = self._local
        return (_scatter(self.mesh, stiff, mask), _scatter(self.mesh, mass, mask),
                _scatter(self.mesh, lap, mask))

    def form(self, u: np.ndarray, v: np.ndarray | None = None) -> complex:
        """``a(u, v) = v^* K u``."""
        v = u if v is None else v
        return complex(np.vdot(v, self.K @ u))

    def invariants(self) -> dict[str, float]:
        K = self.K
        kmax = abs(K).max()
        herm = abs(K - K.conj().T).max()
        return {
            "hermitian_defect": float(herm / kmax) if kmax else 0.0,
            "mass_sum": float(self.M.sum()),
            "mesh_area": self.mesh.area(),
            "mass_min_diag": float(self.M.diagonal().min()),
        }


def assemble(mesh: Mesh, potential: PotentialModel | None = None) -> FormPair:
    potential = potential or PotentialModel()
    stiff, mass, lap = local_matrices(mesh, potential)
    K = _scatter(mesh, stiff)
    M = _scatter(mesh, mass)
    K0 = _scatter(mesh, lap)
    return FormPair(mesh, potential, K, M, K0, local=(stiff, mass, lap))


def apply_hamiltonian(fp: FormPair, u: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """``w`` with ``M w = K u``: the discrete surrogate of ``(i grad + A)^2 u``."""
    ku = fp.K @ u
    nk = np.linalg.norm(ku)
    if nk == 0.0:
        return np.zeros(fp.n, dtype=complex)
    w = fp.solve_mass(ku)
    res = np.linalg.norm(fp.M @ w - ku)
    if res > rtol * nk:
        raise LinearSolveError(f"mass solve residual {res:.3e} exceeds {rtol:g}*|Ku|", residual=res)
    return w


def norm0(fp: FormPair, u: np.ndarray) -> float:
    return float(np.sqrt(max(np.vdot(u, fp.M @ u).real, 0.0)))


def norm1(fp: FormPair, u: np.ndarray) -> float:
    val = np.vdot(u, fp.K @ u).real + np.vdot(u, fp.M @ u).real
    return float(np.sqrt(max(val, 0.0)))


def norm2(fp: FormPair, u: np.ndarray) -> float:
    return norm0(fp, apply_hamiltonian(fp, u) + u)


def norms(fp: FormPair, u: np.ndarray, k: int) -> float:
    """Discrete scale norms ``||(H + 1)^{k/2} u||`` for ``k`` in 0, 1, 2."""
    if k == 0:
        return norm0(fp, u)
    if k == 1:
        return norm1(fp, u)
    if k == 2:
        return norm2(fp, u)
    raise ValueError(f"norm order must be 0, 1 or 2, got {k}")


def export_coo(matrix: sp.spmatrix, path) -> None:
    """Write ``row col re im`` lines for debugging."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            v = complex(v)
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
