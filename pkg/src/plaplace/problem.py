"""Discrete convex reformulation of the p-Laplace minimization.

Builds the linear cost and search-set parameters of the epigraph form:
minimize <c, (u, s)> subject to, per element i,

    s_i >= (sum_{j,r} [D^(j,r) (u+g)]_i^2)^(p/2)   and   w_i s_i <= R.

The Dirichlet datum g is sampled at Dirichlet-boundary nodes and
prolonged by zero to all other nodes, which keeps its discrete gradient
norm (and with it the bound R) as small as the data allow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from . import femops
from .femops import FemOperators
from .mesh import Mesh

# growth factor applied to R when an iterate approaches the tau wall
R_GROWTH = 4.0

DataTerm = Union[None, Callable, np.ndarray]


@dataclass(frozen=True)
class ContinuousData:
    """Problem data: exponent plus source and boundary terms.

    ``f``, ``h`` and ``g`` may be callables mapping an (N, 2) array of
    points to per-point values (scalar or length-``d_prime``), explicit
    nodal arrays, or None for zero.  ``h`` is only read on
    Neumann-boundary nodes, ``g`` only on Dirichlet-boundary nodes.
    """

    p: float
    f: DataTerm = None
    h: DataTerm = None
    g: DataTerm = None
    d_prime: int = 1


@dataclass
class DiscreteProblem:
    """Cost and feasible-set parameters of the discrete convex program.

    Instances are treated as immutable once a solve has started, with one
    exception: ``R`` may be enlarged (never shrunk) to keep the canonical
    initial point strictly feasible.
    """

    ops: FemOperators
    c_u: np.ndarray
    c_s: np.ndarray
    R: float
    g_coeffs: np.ndarray
    p: float
    r_growth: float = field(default=R_GROWTH)

    @property
    def n_free(self) -> int:
        return len(self.ops.free_dofs)

    def full_coefficients(self, u: np.ndarray) -> np.ndarray:
        """Embed free-dof values into a full vector carrying g elsewhere."""
        full = self.g_coeffs.copy()
        full[self.ops.free_dofs] += u
        return full


class RBound(NamedTuple):
    value: float
    growth: float


def _sample_nodal(term: DataTerm, points: np.ndarray, d_prime: int,
                  node_idx: np.ndarray | None = None,
                  n_total: int | None = None) -> np.ndarray:
    """Evaluate a data term at points, returning an (N, d_prime) array.

    Explicit arrays may cover either exactly the given points or all
    ``n_total`` mesh nodes, in which case the rows ``node_idx`` are taken.
    """
    n = len(points)
    if term is None:
        return np.zeros((n, d_prime))
    if callable(term):
        values = np.asarray(term(points), dtype=float)
    else:
        values = np.asarray(term, dtype=float)
        if n_total is not None and node_idx is not None and n_total != n:
            if values.ndim == 2 and len(values) == n_total:
                values = values[node_idx]
            elif values.ndim == 1 and len(values) == n_total and d_prime == 1:
                values = values[node_idx]
            elif values.ndim == 1 and len(values) == n_total * d_prime:
                values = values.reshape(n_total, d_prime)[node_idx]
    if values.ndim == 0:
        values = np.full((n, d_prime), float(values))
    if values.ndim == 1:
        if d_prime == 1 and len(values) == n:
            values = values[:, None]
        elif len(values) == n * d_prime:
            values = values.reshape(n, d_prime)
        else:
            raise ValueError(f"cannot interpret data term of length {len(values)}")
    if values.shape != (n, d_prime):
        raise ValueError(f"data term has shape {values.shape}, expected ({n}, {d_prime})")
    if not np.all(np.isfinite(values)):
        raise ValueError("data term produced non-finite nodal values")
    return values


def _lq_norm_q(mesh: Mesh, ops: FemOperators, nodal: np.ndarray, q: float) -> float:
    """Integral of |f_h|_2^q for a piecewise-linear field, by the interior rule."""
    values = nodal.reshape(ops.n, ops.d_prime)[mesh.elements]  # (m, nloc, dp)
    if mesh.dim == 2:
        # 3-point edge-midpoint rule
        quad = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        weights = np.full(3, 1.0 / 3.0)
    else:
        t = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
        quad = np.column_stack([1.0 - t, t])
        weights = np.full(2, 0.5)
    at_quad = np.einsum("qa,mac->mqc", quad, values)
    norms = np.linalg.norm(at_quad, axis=2)
    per_elem = (norms**q) @ weights
    return float(np.dot(ops.weights, per_elem))


def heuristic_R(data: ContinuousData, ops: FemOperators, g_coeffs: np.ndarray,
                mesh: Mesh) -> RBound:
    """Initial bound on w_i s_i and the factor used to grow it on restart.

    Uses 2 (1 + |g|_{X^p}^p) + 8 (p-1) L^q |f|_{L^q}^q, dropping the
    Neumann contribution (its trace constant is not computable); the
    path-following restarts with R multiplied by ``growth`` whenever an
    iterate approaches the wall.
    """
    p = float(data.p)
    base = 2.0 * (1.0 + femops.xp_norm_p(ops, g_coeffs, p))
    if data.f is not None:
        q = p / (p - 1.0) if p > 1.0 else np.inf
        span = mesh.nodes.max(axis=0) - mesh.nodes.min(axis=0)
        length = float(span.max())
        f_nodal = _sample_nodal(data.f, mesh.nodes, ops.d_prime)
        base += 8.0 * (p - 1.0) * length**q * _lq_norm_q(mesh, ops, f_nodal, q)
    return RBound(base, R_GROWTH)


def discretize(mesh: Mesh, data: ContinuousData) -> DiscreteProblem:
    """Assemble the discrete convex program for the given mesh and data."""
    if not 2.0 <= data.p < np.inf:
        raise ValueError(f"p must lie in [2, inf), got {data.p}")
    dirichlet = mesh.dirichlet_nodes()
    if len(dirichlet) == 0:
        raise ValueError(
            "mesh has no Dirichlet boundary; the minimization has a translation kernel"
        )
    ops = femops.assemble(mesh, data.d_prime)
    dp = ops.d_prime

    g_nodal = np.zeros((ops.n, dp))
    g_nodal[dirichlet] = _sample_nodal(
        data.g, mesh.nodes[dirichlet], dp, node_idx=dirichlet, n_total=ops.n
    )
    g_coeffs = g_nodal.ravel()

    f_full = _sample_nodal(data.f, mesh.nodes, dp).ravel()
    h_full = np.zeros((ops.n, dp))
    neumann = mesh.neumann_nodes()
    if len(neumann):
        h_full[neumann] = _sample_nodal(
            data.h, mesh.nodes[neumann], dp, node_idx=neumann, n_total=ops.n
        )
    load = ops.mass @ f_full + ops.boundary_mass @ h_full.ravel()

    c_u = -load[ops.free_dofs]
    c_s = ops.weights / data.p
    bound = heuristic_R(data, ops, g_coeffs, mesh)
    return DiscreteProblem(
        ops=ops,
        c_u=c_u,
        c_s=c_s,
        R=bound.value,
        g_coeffs=g_coeffs,
        p=float(data.p),
        r_growth=bound.growth,
    )


def initial_point(prob: DiscreteProblem):
    """Canonical strictly feasible start: u = 0, s_i = 1 + |grad g|_i^p.

    Grows ``prob.R`` (in place, by the problem's growth factor) in the
    rare case the heuristic bound does not leave the start strictly
    feasible, making this total.
    """
    ops = prob.ops
    u = np.zeros(prob.n_free)
    grad_norms = femops.apply_gradient_norms(ops, prob.g_coeffs)
    s = 1.0 + grad_norms ** (prob.p / 2.0)
    while np.min(prob.R - ops.weights * s) <= 0.0:
        prob.R *= prob.r_growth
    return u, s


def objective(prob: DiscreteProblem, u: np.ndarray) -> float:
    """The p-Laplace energy J_p at free-dof coefficients u."""
    full = prob.full_coefficients(u)
    return femops.xp_norm_p(prob.ops, full, prob.p) / prob.p + float(np.dot(prob.c_u, u))
