"""Finite-element operators for the linearized implicit Euler step.

All matrices are scipy CSR matrices sharing the Q1 node-adjacency pattern of
the mesh. Element contributions are summed with ``np.bincount`` over a fixed
scatter map, so repeated assemblies of identical input are bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .linsolve import solve_cg
from .mesh import MeshGrid, basis_tables, gauss_2x2


@dataclass
class ScalarField:
    """Nodal Q1 coefficients on a mesh."""

    mesh: MeshGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"field has {self.values.shape} values, mesh has {self.mesh.n_nodes} nodes"
            )

    def grid(self) -> np.ndarray:
        """Values reshaped to (ny+1, nx+1)."""
        return self.values.reshape(self.mesh.shape)

    def evaluate(self, x: float, y: float) -> float:
        """Q1 interpolant at a physical point."""
        m = self.mesh
        fx = (x - m.domain_min[0]) / m.h_x
        fy = (y - m.domain_min[1]) / m.h_y
        i = min(max(int(np.floor(fx)), 0), m.nx - 1)
        j = min(max(int(np.floor(fy)), 0), m.ny - 1)
        s, t = fx - i, fy - j
        g = self.grid()
        return float(
            (1 - s) * (1 - t) * g[j, i]
            + s * (1 - t) * g[j, i + 1]
            + s * t * g[j + 1, i + 1]
            + (1 - s) * t * g[j + 1, i]
        )


def nodal_values(field, mesh: MeshGrid) -> np.ndarray:
    """Coefficient vector of `field` (ScalarField or array), checked against `mesh`."""
    if isinstance(field, ScalarField):
        if not field.mesh.same_as(mesh):
            raise ValueError("field lives on a different mesh")
        return field.values
    vals = np.asarray(field, dtype=float)
    if vals.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {vals.shape}")
    return vals


class _Pattern:
    """Cached element tables and the CSR scatter map of one mesh."""

    def __init__(self, mesh: MeshGrid):
        rule = gauss_2x2()
        self.rule = rule
        conn = mesh.connectivity
        n = mesh.n_nodes
        self.vals, ref_grads = basis_tables(rule.points)  # (4q, 4a), (4q, 4a, 2)
        inv_j = np.array([2.0 / mesh.h_x, 2.0 / mesh.h_y])
        self.grads = ref_grads * inv_j  # physical gradients, constant Jacobian
        det_j = mesh.h_x * mesh.h_y / 4.0
        self.qweights = rule.weights * det_j  # (4q,)

        # Per-quadrature-point local matrices, shape (4q, 4, 4).
        self.mass_q = self.qweights[:, None, None] * self.vals[:, :, None] * self.vals[:, None, :]
        self.stiff_q = self.qweights[:, None, None] * np.einsum(
            "qad,qbd->qab", self.grads, self.grads
        )

        rows = np.repeat(conn, 4, axis=1).ravel()
        cols = np.tile(conn, (1, 4)).ravel()
        pattern = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(n, n)
        )
        pattern.sort_indices()
        self.indptr = pattern.indptr
        self.indices = pattern.indices
        # Position of each (row, col) element entry inside the CSR data array.
        lookup = sp.csr_matrix(
            (np.arange(pattern.nnz, dtype=float), self.indices, self.indptr), shape=(n, n)
        )
        self.slot = np.asarray(lookup[rows, cols]).ravel().astype(np.int64)
        self.n = n

    def build(self, element_blocks: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.slot, weights=element_blocks.ravel(), minlength=self.indices.size)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


@lru_cache(maxsize=16)
def _pattern(mesh: MeshGrid) -> _Pattern:
    return _Pattern(mesh)


def quadrature_values(mesh: MeshGrid, field) -> np.ndarray:
    """Q1 interpolant of a nodal field at the 2x2 Gauss points, shape (ne, 4)."""
    vals = nodal_values(field, mesh)
    pat = _pattern(mesh)
    return vals[mesh.connectivity] @ pat.vals.T


def assemble_mass(mesh: MeshGrid, lumped: bool = False) -> sp.csr_matrix:
    """Consistent mass matrix, or its row-sum lumped diagonal."""
    pat = _pattern(mesh)
    local = pat.mass_q.sum(axis=0)
    blocks = np.broadcast_to(local, (mesh.n_elements, 4, 4))
    M = pat.build(blocks)
    if lumped:
        return sp.diags(np.asarray(M.sum(axis=1)).ravel(), format="csr")
    return M


def assemble_stiffness(mesh: MeshGrid, coefficient_field, kappa: float = 1.0, delta: float = 0.0) -> sp.csr_matrix:
    """A_ij = int (kappa*w_h + delta) grad(phi_i).grad(phi_j), w_h the Q1 interpolant.

    The coefficient is sampled at the Gauss points, so nonnegative nodal values
    give a positive semidefinite matrix. Negative coefficients are allowed and
    produce an indefinite matrix.
    """
    coef = kappa * quadrature_values(mesh, coefficient_field) + delta  # (ne, nq)
    pat = _pattern(mesh)
    blocks = np.einsum("eq,qab->eab", coef, pat.stiff_q)
    return pat.build(blocks)


def assemble_convection(mesh: MeshGrid, velocity) -> sp.csr_matrix:
    """C_ij = -int phi_j u.grad(phi_i) for a velocity callable u(x, y) -> (u1, u2).

    Plain Galerkin, no upwinding; the caller is responsible for div(u) = 0 and
    for keeping the cell Peclet number moderate.
    """
    pat = _pattern(mesh)
    pts = mesh.map_points(pat.rule.points)  # (ne, nq, 2)
    u1, u2 = velocity(pts[..., 0], pts[..., 1])
    u1 = np.broadcast_to(np.asarray(u1, dtype=float), pts.shape[:2])
    u2 = np.broadcast_to(np.asarray(u2, dtype=float), pts.shape[:2])
    # u . grad(phi_i) at each (e, q, i)
    adv = u1[..., None] * pat.grads[None, :, :, 0] + u2[..., None] * pat.grads[None, :, :, 1]
    blocks = -np.einsum("q,eqi,qj->eij", pat.qweights, adv, pat.vals)
    return pat.build(blocks)


def load_vector(mesh: MeshGrid, f, subdivisions: int = 1) -> np.ndarray:
    """b_i = int f phi_i with 2x2 Gauss on each element (optionally on sub-cells)."""
    pat = _pattern(mesh)
    k = int(subdivisions)
    if k < 1:
        raise ValueError("subdivisions must be >= 1")
    centers = -1.0 + (2.0 * np.arange(k) + 1.0) / k
    cx, cy = np.meshgrid(centers, centers, indexing="xy")
    cells = np.column_stack([cx.ravel(), cy.ravel()])
    ref = (cells[:, None, :] + pat.rule.points[None, :, :] / k).reshape(-1, 2)
    weights = np.tile(pat.rule.weights, k * k) / (k * k) * (mesh.h_x * mesh.h_y / 4.0)
    vals, _ = basis_tables(ref)
    pts = mesh.map_points(ref)
    fv = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2])
    local = (fv * weights) @ vals  # (ne, 4)
    return np.bincount(mesh.connectivity.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def l2_project(mesh: MeshGrid, f, lumped: bool = False, subdivisions: int = 1) -> ScalarField:
    """L2 projection of f(x, y) onto the Q1 space.

    With ``lumped=True`` the consistent mass matrix is replaced by its row-sum
    diagonal; nodal values are then weighted averages of f, so bounds on f
    carry over to the nodes (no Gibbs over/undershoot at jumps).
    """
    b = load_vector(mesh, f, subdivisions)
    if lumped:
        m = np.asarray(assemble_mass(mesh).sum(axis=1)).ravel()
        return ScalarField(mesh, b / m)
    M = assemble_mass(mesh)
    x, report = solve_cg(M, b, np.zeros_like(b), rtol=1e-14, atol=0.0)
    if not report.success:
        raise RuntimeError(f"L2 projection solve failed: {report}")
    return ScalarField(mesh, x)


def apply_dirichlet(system: sp.spmatrix, rhs: np.ndarray, mesh: MeshGrid, boundary_value: float):
    """Symmetric elimination of the boundary nodes.

    Boundary rows and columns become identity, the eliminated column couplings
    move into the right-hand side, and boundary entries of the rhs carry the
    prescribed value.
    """
    bnd = mesh.boundary_nodes
    g = np.where(bnd, float(boundary_value), 0.0)
    interior = (~bnd).astype(float)
    K = sp.csr_matrix(system)
    new_rhs = interior * (np.asarray(rhs, dtype=float) - K @ g) + g
    D_i = sp.diags(interior)
    K_c = (D_i @ K @ D_i + sp.diags(bnd.astype(float))).tocsr()
    K_c.eliminate_zeros()
    K_c.sort_indices()
    return K_c, new_rhs
