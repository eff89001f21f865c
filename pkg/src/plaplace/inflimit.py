"""Experimental direct solver for the p -> infinity limit problem.

The limit energy replaces the integral gradient term by the sup of the
gradient norm, which after discretization collapses the per-element
bounds to a single scalar sigma: minimize sigma * |Omega| - <load, u>
subject to the chosen inner norm of the element Jacobians staying below
sigma.  With Neumann data present, sigma >= 1 is enforced so the free
boundary attains unit slope instead of collapsing to zero.

Two inner norms are supported: "frobenius" (one second-order-cone style
constraint per element) and "supremum" (two-sided bounds on every
directional derivative of every component).  This mode is experimental;
it reproduces the documented negative results (it is not an AMLE
solver), and is kept out of the default solve paths.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import solver as solver_mod
from .barrier import HessianFactorError, _free_d_mats
from .femops import FemOperators
from .mesh import Mesh
from .problem import ContinuousData, R_GROWTH, _sample_nodal
from .solver import SolveReport, SolverConfig, SolverError

INNER_NORMS = ("frobenius", "supremum")


@dataclass
class InfProblem:
    """Discrete limit problem: cost, inner-norm choice and sigma bounds."""

    ops: FemOperators
    c_u: np.ndarray
    inner_norm: str
    sigma_floor: float
    R: float
    g_coeffs: np.ndarray
    r_growth: float = R_GROWTH

    @property
    def n_free(self) -> int:
        return len(self.ops.free_dofs)

    def full_coefficients(self, u: np.ndarray) -> np.ndarray:
        full = self.g_coeffs.copy()
        full[self.ops.free_dofs] += u
        return full


def inf_problem(mesh: Mesh, data: ContinuousData, R: float | None = None) -> InfProblem:
    """Assemble the limit problem; ``data.p`` is ignored.

    ``inner_norm`` defaults to "frobenius"; pass the desired one on the
    returned object or via dataclasses.replace.
    """
    from . import femops

    dirichlet = mesh.dirichlet_nodes()
    if len(dirichlet) == 0:
        raise ValueError("mesh has no Dirichlet boundary")
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

    sigma_floor = 1.0 if len(neumann) else 0.0
    g_norms = femops.apply_gradient_norms(ops, g_coeffs)
    sigma0 = max(float(np.sqrt(g_norms.max())) if len(g_norms) else 0.0, sigma_floor) + 1.0
    if R is None:
        R = 2.0 * (sigma0 + 1.0)
    while R <= sigma0 + 1.0:
        R *= R_GROWTH
    return InfProblem(
        ops=ops,
        c_u=c_u,
        inner_norm="frobenius",
        sigma_floor=sigma_floor,
        R=float(R),
        g_coeffs=g_coeffs,
    )


class _InfPoint:
    def __init__(self, prob: InfProblem, u: np.ndarray, sigma: float):
        self.prob = prob
        self.u = u
        self.sigma = float(sigma)
        ops = prob.ops
        full = prob.full_coefficients(u)
        self.y = {key: ops.d_mats[key] @ full for key in ops.jr_pairs()}
        self.lo = self.sigma - prob.sigma_floor
        self.hi = prob.R - self.sigma
        if prob.inner_norm == "frobenius":
            ysq = sum(y * y for y in self.y.values())
            self.z = self.sigma**2 - ysq  # (m,)
        else:
            ys = np.stack([self.y[key] for key in ops.jr_pairs()])
            self.z = self.sigma**2 - ys * ys  # (njr, m)
        self.feasible = bool(
            self.lo > 0.0 and self.hi > 0.0 and np.all(self.z > 0.0)
        )
        self._G = None

    def gradient_mat(self):
        # frobenius mode only: G = sum diag(y) D on free columns
        if self._G is None:
            acc = None
            for key, mat in _free_d_mats(self.prob).items():
                term = mat.multiply(self.y[key][:, None])
                acc = term if acc is None else acc + term
            self._G = sp.csr_matrix(acc)
        return self._G


class _InfOracle:
    """Path-following adapter for the limit barrier, x = [u_free; sigma]."""

    def __init__(self, prob: InfProblem):
        if prob.inner_norm not in INNER_NORMS:
            raise ValueError(f"inner_norm must be one of {INNER_NORMS}")
        self.prob = prob
        m = prob.ops.m
        njr = len(prob.ops.jr_pairs())
        self.nu = (2.0 * m if prob.inner_norm == "frobenius" else 2.0 * m * njr) + 2.0
        self.c = np.concatenate([prob.c_u, [float(np.sum(prob.ops.weights))]])
        self.nf = prob.n_free

    def initial(self) -> np.ndarray:
        prob = self.prob
        from . import femops

        g_norms = femops.apply_gradient_norms(prob.ops, prob.g_coeffs)
        if prob.inner_norm == "frobenius":
            base = float(np.sqrt(g_norms.max()))
        else:
            base = max(float(np.abs(prob.ops.d_mats[key] @ prob.g_coeffs).max())
                       for key in prob.ops.jr_pairs())
        sigma0 = max(base, prob.sigma_floor) + 1.0
        while prob.R <= sigma0 + 0.5:
            prob.R *= prob.r_growth
        return np.concatenate([np.zeros(self.nf), [sigma0]])

    def scale_reference(self) -> np.ndarray:
        return self.c

    def point(self, x):
        return _InfPoint(self.prob, x[: self.nf], x[self.nf])

    def barrier_value(self, pt) -> float:
        if not pt.feasible:
            raise SolverError("limit barrier evaluated at infeasible point")
        return float(-np.sum(np.log(pt.z)) - np.log(pt.lo) - np.log(pt.hi))

    def grad(self, pt) -> np.ndarray:
        prob = self.prob
        bdry = -1.0 / pt.lo + 1.0 / pt.hi
        if prob.inner_norm == "frobenius":
            inv_z = 1.0 / pt.z
            f_u = 2.0 * (pt.gradient_mat().T @ inv_z)
            f_sig = -2.0 * pt.sigma * float(np.sum(inv_z)) + bdry
        else:
            inv_z = 1.0 / pt.z
            f_u = np.zeros(self.nf)
            for idx, (key, mat) in enumerate(_free_d_mats(prob).items()):
                f_u += mat.T @ (2.0 * pt.y[key] * inv_z[idx])
            f_sig = -2.0 * pt.sigma * float(np.sum(inv_z)) + bdry
        return np.concatenate([f_u, [f_sig]])

    def factor(self, pt):
        prob = self.prob
        sigma = pt.sigma
        bdry2 = 1.0 / pt.lo**2 + 1.0 / pt.hi**2
        if prob.inner_norm == "frobenius":
            inv_z = 1.0 / pt.z
            G = pt.gradient_mat()
            H = 4.0 * (G.T @ G.multiply((inv_z**2)[:, None]))
            for mat in _free_d_mats(prob).values():
                H = H + 2.0 * (mat.T @ mat.multiply(inv_z[:, None]))
            f_us = -4.0 * sigma * (G.T @ inv_z**2)
            ysq = sigma**2 - pt.z
            f_ss = float(np.sum((2.0 * sigma**2 + 2.0 * ysq) * inv_z**2)) + bdry2
        else:
            inv_z = 1.0 / pt.z
            H = None
            f_us = np.zeros(self.nf)
            f_ss = bdry2
            for idx, (key, mat) in enumerate(_free_d_mats(prob).items()):
                y = pt.y[key]
                w = 2.0 * inv_z[idx] + 4.0 * y * y * inv_z[idx] ** 2
                term = mat.T @ mat.multiply(w[:, None])
                H = term if H is None else H + term
                f_us += mat.T @ (-4.0 * sigma * y * inv_z[idx] ** 2)
                f_ss += float(np.sum((2.0 * sigma**2 + 2.0 * y * y) * inv_z[idx] ** 2))
        try:
            lu = spla.splu(sp.csc_matrix(H)) if self.nf else None
        except RuntimeError as exc:
            raise HessianFactorError(str(exc)) from exc

        def solve(r):
            r_u, r_sig = r[: self.nf], r[self.nf]
            if lu is None:
                dsig = r_sig / f_ss
                return np.array([dsig])
            w = lu.solve(r_u)
            v = lu.solve(f_us)
            denom = f_ss - float(np.dot(f_us, v))
            if denom <= 0.0:
                raise HessianFactorError("rank-1 Schur complement not positive")
            dsig = (r_sig - float(np.dot(f_us, w))) / denom
            du = w - v * dsig
            return np.concatenate([du, [dsig]])

        return solve

    def max_linear_step(self, pt, dx) -> float:
        dsig = dx[self.nf]
        alpha = np.inf
        if dsig < 0.0:
            alpha = min(alpha, pt.lo / -dsig)
        if dsig > 0.0:
            alpha = min(alpha, pt.hi / dsig)
        return float(alpha)

    def near_wall(self, pt) -> bool:
        # the analytic center of this barrier sits within O(R / nu) of the
        # sigma cap, so mid-path proximity is normal; whether R truly
        # truncated the problem is decided from the converged sigma instead
        return False


def inner_norms(prob: InfProblem, full_coeffs: np.ndarray) -> np.ndarray:
    """Per-element value of the chosen inner norm of the Jacobian."""
    from . import femops

    if prob.inner_norm == "frobenius":
        return np.sqrt(femops.apply_gradient_norms(prob.ops, full_coeffs))
    ys = np.stack([np.abs(prob.ops.d_mats[key] @ full_coeffs)
                   for key in prob.ops.jr_pairs()])
    return ys.max(axis=0)


def solve_inf(prob: InfProblem, cfg: SolverConfig | None = None) -> SolveReport:
    """Path-following solve of the limit problem.

    The report's ``sigma`` carries the optimized gradient bound; its
    ``objective`` is the discrete limit energy sigma |Omega| - <load, u>.
    """
    if cfg is None:
        cfg = SolverConfig()
    work = prob
    restarts = 0
    while True:
        counter = solver_mod._StepCounter(cfg.max_newton)
        history: list = []
        oracle = _InfOracle(work)
        x, t_final = solver_mod._run_path(oracle, cfg, counter, history)
        sigma_cap_gap = work.R - float(x[work.n_free])
        if sigma_cap_gap >= solver_mod._WALL_FRACTION * work.R:
            break
        # the converged sigma pressed the cap: enlarge R and re-solve
        restarts += 1
        if restarts > cfg.max_restarts:
            raise SolverError(
                f"exceeded {cfg.max_restarts} restarts while growing R"
            )
        grown = dataclasses.replace(work, R=work.R * work.r_growth)
        if hasattr(work, "_dfree_cache"):
            grown._dfree_cache = work._dfree_cache
        work = grown

    u_free = x[: work.n_free]
    sigma = float(x[work.n_free])
    objective = sigma * float(np.sum(work.ops.weights)) + float(np.dot(work.c_u, u_free))
    return SolveReport(
        u=work.full_coefficients(u_free),
        newton_iters_aux=counter.aux,
        newton_iters_main=counter.main,
        t_final=t_final,
        gap_bound=solver_mod.certified_gap(oracle.nu, cfg.beta_center, t_final),
        restarts=restarts,
        objective=objective,
        sigma=sigma,
        history=history,
    )
