"""Logarithmic barrier for the epigraph search set and its derivatives.

For an iterate (u, s) the per-element caches are

    y^(j,r) = D^(j,r) (u + g),
    z_i     = s_i^(2/p) - sum_{j,r} (y_i^(j,r))^2,
    tau_i   = R - w_i s_i,

and the barrier value is F(u, s) = -sum_i log z_i - sum_i log tau_i,
a (4 m)-self-concordant barrier.  The constraint s_i >= 0 carries no
barrier term: z_i <= s_i^(2/p) forces s_i > 0 on the component of the
feasible set tracked here, and the solver's line search never accepts a
point with s_i <= 0.

Hessian solves eliminate the s block first (its diagonal is available in
closed form) and factor the remaining u block, which has finite-element
sparsity, with a sparse LU.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import DiscreteProblem

# s values below this are treated as infeasible rather than risking
# overflowing powers
_S_FLOOR = 1e-300


class InfeasiblePointError(RuntimeError):
    """Raised when a barrier evaluation is requested outside the domain."""


class HessianFactorError(RuntimeError):
    """Raised when the reduced Hessian is not positive definite.

    On the feasible set the Hessian is SPD; failure indicates cache
    corruption or infeasibility drift.
    """


def _free_d_mats(prob: DiscreteProblem):
    """Derivative matrices restricted to free columns, cached per problem."""
    cache = getattr(prob, "_dfree_cache", None)
    if cache is None:
        free = prob.ops.free_dofs
        cache = {key: sp.csr_matrix(mat[:, free]) for key, mat in prob.ops.d_mats.items()}
        prob._dfree_cache = cache
    return cache


class BarrierPoint:
    """Iterate (u, s) with cached y, z, tau and a feasibility flag.

    Immutable by convention; all evaluation routines are pure functions
    of the point.
    """

    def __init__(self, prob: DiscreteProblem, u: np.ndarray, s: np.ndarray):
        self.prob = prob
        self.u = np.asarray(u, dtype=float)
        self.s = np.asarray(s, dtype=float)
        if self.u.shape != (prob.n_free,):
            raise ValueError(f"u must have length {prob.n_free}")
        if self.s.shape != (prob.ops.m,):
            raise ValueError(f"s must have length {prob.ops.m}")

        ops = prob.ops
        full = prob.full_coefficients(self.u)
        self.y = {key: ops.d_mats[key] @ full for key in ops.jr_pairs()}
        self._ysq = sum(y * y for y in self.y.values())
        self.tau = prob.R - ops.weights * self.s

        s_ok = bool(np.all(self.s > _S_FLOOR)) and np.all(np.isfinite(self.s))
        if s_ok:
            self._s_pow = self.s ** (2.0 / prob.p)  # s^(2/p)
            self.z = self._s_pow - self._ysq
        else:
            self._s_pow = None
            self.z = np.full(ops.m, -np.inf)
        self.feasible = bool(
            s_ok and np.all(self.z > 0.0) and np.all(self.tau > 0.0)
        )
        self._G = None

    def _require_feasible(self):
        if not self.feasible:
            raise InfeasiblePointError("barrier evaluated at an infeasible point")

    @property
    def gradient_mat(self) -> sp.csr_matrix:
        """G = sum_{j,r} diag(y^(j,r)) D^(j,r) on free columns, shape (m, nf)."""
        if self._G is None:
            dfree = _free_d_mats(self.prob)
            acc = None
            for key, mat in dfree.items():
                term = mat.multiply(self.y[key][:, None])
                acc = term if acc is None else acc + term
            self._G = sp.csr_matrix(acc)
        return self._G


def eval_F(pt: BarrierPoint) -> float:
    """Barrier value -sum log z - sum log tau."""
    pt._require_feasible()
    return float(-np.sum(np.log(pt.z)) - np.sum(np.log(pt.tau)))


def eval_grad(pt: BarrierPoint):
    """Gradient (F_u, F_s), with F_u restricted to free dofs."""
    pt._require_feasible()
    prob = pt.prob
    p = prob.p
    inv_z = 1.0 / pt.z
    f_u = 2.0 * (pt.gradient_mat.T @ inv_z)
    s_pow_m1 = pt._s_pow / pt.s  # s^(2/p - 1)
    f_s = -(2.0 / p) * inv_z * s_pow_m1 + prob.ops.weights / pt.tau
    return f_u, f_s


def _hess_pieces(pt: BarrierPoint):
    """Shared second-derivative diagonals.

    Returns (e, fss, alpha): F_us = G^T diag(e); F_ss = diag(fss); the
    Schur complement of the s block is 2 sum D^T Z^-1 D + G^T diag(alpha) G.
    alpha is computed in the cancellation-free form (4/z^2) * b / (a + b)
    with a the rank-coupling part of fss and b the remainder, both
    nonnegative with b > 0 strictly.
    """
    prob = pt.prob
    p = prob.p
    z = pt.z
    s = pt.s
    inv_z = 1.0 / z
    s_pow = pt._s_pow
    s_pow_m1 = s_pow / s
    w_over_tau = prob.ops.weights / pt.tau

    e = -(4.0 / p) * s_pow_m1 * inv_z**2
    a = (4.0 / p**2) * (s_pow_m1**2) * inv_z**2
    b = (2.0 / p) * (1.0 - 2.0 / p) * (s_pow / s**2) * inv_z + w_over_tau**2
    fss = a + b
    alpha = (4.0 * inv_z**2) * (b / fss)
    return e, fss, alpha


def eval_hess_apply(pt: BarrierPoint, v_u: np.ndarray, v_s: np.ndarray):
    """Hessian-vector product F'' (v_u, v_s) -> (w_u, w_s)."""
    pt._require_feasible()
    dfree = _free_d_mats(pt.prob)
    inv_z = 1.0 / pt.z
    G = pt.gradient_mat
    e, fss, _ = _hess_pieces(pt)
    gv = G @ v_u
    w_u = 4.0 * (G.T @ (inv_z**2 * gv)) + G.T @ (e * v_s)
    for key, mat in dfree.items():
        w_u += 2.0 * (mat.T @ (inv_z * (mat @ v_u)))
    w_s = e * gv + fss * v_s
    return w_u, w_s


class HessianFactor:
    """Factorized barrier Hessian supporting solves via s-block elimination."""

    def __init__(self, pt: BarrierPoint):
        pt._require_feasible()
        self.pt = pt
        e, fss, alpha = _hess_pieces(pt)
        if not (np.all(np.isfinite(fss)) and np.all(fss > 0.0) and np.all(alpha > 0.0)):
            raise HessianFactorError("s-block diagonal not positive")
        self.e = e
        self.fss = fss
        G = pt.gradient_mat
        inv_z = 1.0 / pt.z
        nf = pt.prob.n_free
        if nf:
            H = G.T @ G.multiply(alpha[:, None])
            for mat in _free_d_mats(pt.prob).values():
                H = H + 2.0 * (mat.T @ mat.multiply(inv_z[:, None]))
            try:
                self._lu = spla.splu(sp.csc_matrix(H))
            except RuntimeError as exc:  # singular factorization
                raise HessianFactorError(str(exc)) from exc
        else:
            self._lu = None
        self._g_mat = G

    def solve(self, r_u: np.ndarray, r_s: np.ndarray):
        """Solve F'' (du, ds) = (r_u, r_s)."""
        G = self._g_mat
        rhs_u = r_u - (G.T @ (self.e * r_s / self.fss))
        du = self._lu.solve(rhs_u) if self._lu is not None else np.zeros(0)
        ds = (r_s - self.e * (G @ du)) / self.fss
        return du, ds


def eval_hess_factor(pt: BarrierPoint) -> HessianFactor:
    """Factor the Hessian at pt for repeated solves."""
    return HessianFactor(pt)


def newton_decrement(pt: BarrierPoint, rhs, factor: HessianFactor | None = None) -> float:
    """Local dual norm sqrt(<rhs, [F'']^-1 rhs>) of a gradient-like pair."""
    r_u, r_s = rhs
    if factor is None:
        factor = eval_hess_factor(pt)
    du, ds = factor.solve(r_u, r_s)
    val = float(np.dot(r_u, du) + np.dot(r_s, ds))
    return np.sqrt(max(val, 0.0))
