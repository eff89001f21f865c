"""Assembly of discrete operators for piecewise-linear Lagrange elements.

Coefficient vectors for a field with image dimension ``d_prime`` use a
block layout per node with the image dimension as the fast index: the
coefficient of image component r at node k sits at ``d_prime * k + r``.

The derivative matrices map such a coefficient vector to the (constant)
derivative of one image component in one spatial direction on every
element.  The interior mass matrix uses the 3-point edge-midpoint rule on
triangles and 2-point Gauss on segments, the boundary mass 2-point Gauss
on edges; all are exact for products of piecewise linears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import NEUMANN, Mesh, signed_areas


@dataclass(frozen=True)
class FemOperators:
    """Assembled discrete operators of one mesh / image dimension.

    Attributes
    ----------
    d_mats : dict[(j, r), csr_matrix]
        Derivative matrices of shape (m, n * d_prime); key (j, r) is the
        0-based spatial direction and image dimension.
    weights : (m,) array
        Element volumes.
    mass : csr_matrix
        Interior mass matrix, shape (n * d_prime,) ** 2.
    boundary_mass : csr_matrix
        Neumann-boundary mass matrix, same shape, supported on
        Neumann-boundary node blocks only.
    free_dofs : (nf,) int array
        Coefficient indices whose node is on no Dirichlet edge.
    """

    d_mats: dict
    weights: np.ndarray
    mass: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    free_dofs: np.ndarray
    n: int
    m: int
    d: int
    d_prime: int

    @property
    def n_dofs(self) -> int:
        return self.n * self.d_prime

    def jr_pairs(self):
        return [(j, r) for j in range(self.d) for r in range(self.d_prime)]


def _p1_gradients_2d(mesh: Mesh):
    """Per-element gradients of the three nodal basis functions.

    Returns (grads, areas) with grads of shape (m, 2, 3): grads[i, j, a]
    is the x_j derivative of the basis of local vertex a on element i.
    """
    pts = mesh.nodes[mesh.elements]
    areas = signed_areas(mesh)
    if np.any(areas <= 0.0):
        raise ValueError("degenerate element (non-positive area)")
    x = pts[:, :, 0]
    y = pts[:, :, 1]
    inv2a = 1.0 / (2.0 * areas)
    grads = np.empty((mesh.n_elements, 2, 3))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, 0, a] = (y[:, b] - y[:, c]) * inv2a
        grads[:, 1, a] = (x[:, c] - x[:, b]) * inv2a
    return grads, areas


def _expand_block(scalar: sp.spmatrix, d_prime: int) -> sp.csr_matrix:
    """Scalar (n x n) matrix acting identically on each image dimension."""
    if d_prime == 1:
        return sp.csr_matrix(scalar)
    return sp.csr_matrix(sp.kron(scalar, sp.eye(d_prime), format="csr"))


def _scalar_mass(mesh: Mesh, areas: np.ndarray) -> sp.csr_matrix:
    n = mesh.n_nodes
    if mesh.dim == 2:
        local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    else:
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    k = local.shape[0]
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    vals = (areas[:, None, None] * local[None, :, :]).reshape(len(areas), -1).ravel()
    return sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def _scalar_boundary_mass(mesh: Mesh) -> sp.csr_matrix:
    n = mesh.n_nodes
    neumann = mesh.boundary_markers == NEUMANN
    edges = mesh.boundary_edges[neumann]
    if len(edges) == 0:
        return sp.csr_matrix((n, n))
    rows, cols, vals = [], [], []
    if mesh.dim == 2:
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        for a, b in edges:
            length = float(np.linalg.norm(mesh.nodes[b] - mesh.nodes[a]))
            for la, ga in enumerate((a, b)):
                for lb, gb in enumerate((a, b)):
                    rows.append(ga)
                    cols.append(gb)
                    vals.append(length * local[la, lb])
    else:
        # 0-dimensional boundary: point evaluation with unit weight
        for a, _ in edges:
            rows.append(a)
            cols.append(a)
            vals.append(1.0)
    return sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def assemble(mesh: Mesh, d_prime: int) -> FemOperators:
    """Assemble derivative, mass and boundary-mass matrices.

    Parameters
    ----------
    mesh : Mesh
    d_prime : int
        Image dimension of the unknown field, 1 or mesh.dim.

    Raises
    ------
    ValueError
        If the mesh contains a degenerate (zero area) element.
    """
    if d_prime not in (1, mesh.dim):
        raise ValueError(f"d_prime must be 1 or {mesh.dim}, got {d_prime}")
    n = mesh.n_nodes
    m = mesh.n_elements
    d = mesh.dim

    if d == 2:
        grads, areas = _p1_gradients_2d(mesh)
    else:
        areas = signed_areas(mesh)
        if np.any(areas <= 0.0):
            raise ValueError("degenerate element (non-positive length)")
        grads = np.empty((m, 1, 2))
        grads[:, 0, 0] = -1.0 / areas
        grads[:, 0, 1] = 1.0 / areas

    nloc = mesh.elements.shape[1]
    row_idx = np.repeat(np.arange(m), nloc)
    d_mats = {}
    for j in range(d):
        vals = grads[:, j, :].ravel()
        for r in range(d_prime):
            cols = (d_prime * mesh.elements + r).ravel()
            mat = sp.coo_matrix((vals, (row_idx, cols)), shape=(m, n * d_prime))
            d_mats[(j, r)] = sp.csr_matrix(mat)

    mass = _expand_block(_scalar_mass(mesh, areas), d_prime)
    bmass = _expand_block(_scalar_boundary_mass(mesh), d_prime)

    fixed = mesh.dirichlet_nodes()
    free_nodes = np.setdiff1d(np.arange(n), fixed)
    free_dofs = (d_prime * free_nodes[:, None] + np.arange(d_prime)[None, :]).ravel()

    return FemOperators(
        d_mats=d_mats,
        weights=np.asarray(areas, dtype=float),
        mass=mass,
        boundary_mass=bmass,
        free_dofs=free_dofs,
        n=n,
        m=m,
        d=d,
        d_prime=d_prime,
    )


def apply_gradient_norms(ops: FemOperators, coeffs: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of the discrete Jacobian on each element."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (ops.n_dofs,):
        raise ValueError(f"expected coefficient vector of length {ops.n_dofs}")
    out = np.zeros(ops.m)
    for key in ops.jr_pairs():
        deriv = ops.d_mats[key] @ coeffs
        out += deriv * deriv
    return out


def xp_norm_p(ops: FemOperators, coeffs: np.ndarray, p: float) -> float:
    """Discrete p-th power of the gradient p-norm, sum_i w_i |J_i|^(p/2)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    norms = apply_gradient_norms(ops, coeffs)
    return float(np.dot(ops.weights, norms ** (p / 2.0)))
