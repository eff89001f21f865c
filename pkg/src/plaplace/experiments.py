"""Canonical experiment setups: validation, iteration sweeps, mesh
deformation and the 1D high-p limit study.

The named cases bundle the closed-form data used throughout:

* ``scalar-hat``   - scalar field, hat(x) = sin(2 pi x1) - sin(2 pi x2)
                     as Neumann source on the free left/top boundary
* ``hat-normal``   - vector field, hat(x) times the outward unit normal
* ``hat-ones``     - vector field, hat(x) times [1, 1]
* ``manufactured`` - Dirichlet-only validation problem with known exact
                     solution v*(x) = 0.5 |x|^2 [1, 1]
* ``oned-const``   - 1D, f = 1, Dirichlet endpoints
* ``oned-sign``    - 1D, sign-changing source (qualitative only)
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import problem as problem_mod
from . import solver as solver_mod
from .mesh import (
    DIRICHLET,
    NEUMANN,
    Mesh,
    QualityReport,
    element_min_angles,
    quality,
    unit_interval,
    unit_square,
    with_nodes,
)
from .problem import ContinuousData, DiscreteProblem
from .solver import SolveReport, SolverConfig

FREE_SIDES = ("left", "top")


def hat_source(points: np.ndarray) -> np.ndarray:
    """sin(2 pi x1) - sin(2 pi x2); one sine cycle per free side, the top
    one inverted so both positive humps sit next to the upper-left corner."""
    pts = np.atleast_2d(points)
    return np.sin(2.0 * np.pi * pts[:, 0]) - np.sin(2.0 * np.pi * pts[:, 1])


def boundary_normals(mesh: Mesh) -> np.ndarray:
    """Outward unit normals at Neumann-boundary nodes, zero elsewhere.

    Nodes get the average of the adjacent Neumann-edge normals,
    normalized; at junctions with the Dirichlet part only the single
    Neumann edge contributes.
    """
    acc = np.zeros((mesh.n_nodes, 2))
    for (a, b), marker in zip(mesh.boundary_edges, mesh.boundary_markers):
        if marker != NEUMANN:
            continue
        tang = mesh.nodes[b] - mesh.nodes[a]
        normal = np.array([tang[1], -tang[0]])
        normal /= np.linalg.norm(normal)
        acc[a] += normal
        acc[b] += normal
    norms = np.linalg.norm(acc, axis=1)
    nz = norms > 0
    acc[nz] /= norms[nz, None]
    return acc


def manufactured_solution(points: np.ndarray) -> np.ndarray:
    """v*(x) = 0.5 |x|^2 [1, 1], the exact solution of the validation case."""
    pts = np.atleast_2d(points)
    val = 0.5 * np.sum(pts**2, axis=1)
    return np.column_stack([val, val])


def manufactured_source(points: np.ndarray, p: float) -> np.ndarray:
    """f = -p 2^((p-2)/2) |x|^(p-2) [1, 1], matching the validation datum."""
    pts = np.atleast_2d(points)
    r = np.linalg.norm(pts, axis=1)
    val = -p * 2.0 ** ((p - 2.0) / 2.0) * r ** (p - 2.0)
    return np.column_stack([val, val])


@dataclass(frozen=True)
class ExperimentCase:
    """A named mesh/data recipe; ``make_data`` may depend on the mesh
    (for nodal normal fields) and on p (for manufactured sources)."""

    name: str
    dim: int
    d_prime: int
    free_sides: tuple
    make_data: Callable[[Mesh, float], ContinuousData]

    def build(self, k: int, p: float):
        if self.dim == 2:
            mesh = unit_square(k, free_boundary=self.free_sides)
        else:
            mesh = unit_interval(k)
        return mesh, self.make_data(mesh, p)


def _scalar_hat_data(mesh, p):
    return ContinuousData(p=p, h=hat_source, d_prime=1)


def _hat_normal_data(mesh, p):
    normals = boundary_normals(mesh)
    h_nodal = hat_source(mesh.nodes)[:, None] * normals
    return ContinuousData(p=p, h=h_nodal, d_prime=2)


def _hat_ones_data(mesh, p):
    def h(points):
        v = hat_source(points)
        return np.column_stack([v, v])

    return ContinuousData(p=p, h=h, d_prime=2)


def _manufactured_data(mesh, p):
    return ContinuousData(
        p=p,
        f=lambda pts: manufactured_source(pts, p),
        g=manufactured_solution,
        d_prime=2,
    )


def _oned_const_data(mesh, p):
    return ContinuousData(p=p, f=lambda pts: np.ones(len(pts)), d_prime=1)


def _oned_sign_data(mesh, p):
    def f(points):
        pts = np.atleast_2d(points)
        return np.where(pts[:, 0] > 0.15, 1.0, -1.0)

    return ContinuousData(p=p, f=f, d_prime=1)


CASES = {
    case.name: case
    for case in (
        ExperimentCase("scalar-hat", 2, 1, FREE_SIDES, _scalar_hat_data),
        ExperimentCase("hat-normal", 2, 2, FREE_SIDES, _hat_normal_data),
        ExperimentCase("hat-ones", 2, 2, FREE_SIDES, _hat_ones_data),
        ExperimentCase("manufactured", 2, 2, (), _manufactured_data),
        ExperimentCase("oned-const", 1, 1, (), _oned_const_data),
        ExperimentCase("oned-sign", 1, 1, (), _oned_sign_data),
    )
}


def case_names():
    return sorted(CASES)


def get_case(name: str) -> ExperimentCase:
    try:
        return CASES[name]
    except KeyError:
        known = ", ".join(case_names())
        raise KeyError(f"unknown case {name!r}; known cases: {known}") from None


def k_for_nodes(n: int) -> int:
    """Subdivision count whose square mesh has (about) n nodes."""
    k = int(round(math.sqrt(n))) - 1
    return max(k, 1)


def case_problem(name: str, k: int, p: float):
    """Build (mesh, DiscreteProblem) for a named case."""
    case = get_case(name)
    mesh, data = case.build(k, p)
    return mesh, problem_mod.discretize(mesh, data)


# ---------------------------------------------------------------------------
# validation by manufactured solutions

@dataclass
class ValidationResult:
    p: float
    n: int
    max_error: np.ndarray          # per image component
    error_field: np.ndarray        # (n_nodes, d_prime)
    solution: np.ndarray           # (n_nodes, d_prime)
    mesh: Mesh
    report: SolveReport

    @property
    def component_asymmetry(self) -> float:
        return float(np.max(np.abs(self.error_field[:, 0] - self.error_field[:, 1])))


def run_validation(n_target: int, p: float, eps: float = 1e-6,
                   cfg: SolverConfig | None = None) -> ValidationResult:
    """Solve the manufactured case and report nodal errors against v*."""
    k = k_for_nodes(n_target)
    mesh, prob = case_problem("manufactured", k, p)
    if cfg is None:
        cfg = SolverConfig(eps=eps)
    report = solver_mod.solve(prob, cfg)
    exact = manufactured_solution(mesh.nodes)
    sol = report.u.reshape(mesh.n_nodes, 2)
    err = np.abs(sol - exact)
    return ValidationResult(
        p=p,
        n=mesh.n_nodes,
        max_error=err.max(axis=0),
        error_field=err,
        solution=sol,
        mesh=mesh,
        report=report,
    )


# ---------------------------------------------------------------------------
# Newton-iteration sweeps

@dataclass
class TableResult:
    case_list: list
    p_list: list
    n_list: list
    cells: dict = field(default_factory=dict)  # (case, p, n) -> SolveReport | str

    def counts(self, case, p, n):
        cell = self.cells.get((case, p, n))
        if isinstance(cell, SolveReport):
            return cell.newton_iters_total
        return None

    def write_counts_csv(self, path):
        """Iteration-count table: one row per p, one column per (case, n)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["p"] + [f"{case}:n={n}" for case in self.case_list for n in self.n_list]
            writer.writerow(header)
            for p in self.p_list:
                row = [_fmt(p)]
                for case in self.case_list:
                    for n in self.n_list:
                        count = self.counts(case, p, n)
                        row.append("" if count is None else str(count))
                writer.writerow(row)

    def write_details_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["case", "p", "n", "aux", "main", "total", "restarts",
                 "t_final", "gap_bound", "objective", "error"]
            )
            for case in self.case_list:
                for p in self.p_list:
                    for n in self.n_list:
                        cell = self.cells.get((case, p, n))
                        if isinstance(cell, SolveReport):
                            writer.writerow(
                                [case, _fmt(p), n, cell.newton_iters_aux,
                                 cell.newton_iters_main, cell.newton_iters_total,
                                 cell.restarts, _fmt(cell.t_final),
                                 _fmt(cell.gap_bound), _fmt(cell.objective), ""]
                            )
                        else:
                            writer.writerow([case, _fmt(p), n, "", "", "", "", "", "", "",
                                             cell if cell is not None else "missing"])


def _fmt(x) -> str:
    return f"{x:.12g}"


def _solve_cell(case_name: str, p: float, n: int, eps: float) -> SolveReport:
    _, prob = case_problem(case_name, k_for_nodes(n), p)
    return solver_mod.solve(prob, SolverConfig(eps=eps))


def run_table(case_list: Iterable[str], p_list: Iterable[float], n_list: Iterable[int],
              eps: float = 1e-6, jobs: int = 1) -> TableResult:
    """Solve every (case, p, n) cell; failures are recorded, not raised."""
    case_list = list(case_list)
    p_list = list(p_list)
    n_list = list(n_list)
    for name in case_list:
        get_case(name)
    result = TableResult(case_list, p_list, n_list)
    keys = [(case, p, n) for case in case_list for p in p_list for n in n_list]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                key: pool.submit(_solve_cell, key[0], key[1], key[2], eps) for key in keys
            }
            for key, fut in futures.items():
                try:
                    result.cells[key] = fut.result()
                except Exception as exc:  # per-cell failure, sweep continues
                    result.cells[key] = f"{type(exc).__name__}: {exc}"
    else:
        for key in keys:
            try:
                result.cells[key] = _solve_cell(key[0], key[1], key[2], eps)
            except Exception as exc:
                result.cells[key] = f"{type(exc).__name__}: {exc}"
    return result


# ---------------------------------------------------------------------------
# mesh deformation by perturbation of identity

@dataclass
class DeformationResult:
    p: float
    step: float
    mesh: Mesh
    deformed: Mesh
    quality_before: QualityReport
    quality_after: QualityReport
    endpoint_min_angle: float
    max_displacement: float
    report: SolveReport


def free_boundary_endpoints(mesh: Mesh) -> np.ndarray:
    """Nodes incident to both a Dirichlet and a Neumann edge."""
    dirichlet = set(mesh.dirichlet_nodes())
    neumann = set(mesh.neumann_nodes())
    return np.array(sorted(dirichlet & neumann), dtype=np.int64)


def _elements_near(mesh: Mesh, centers: np.ndarray, radius: float) -> np.ndarray:
    if len(centers) == 0:
        return np.arange(mesh.n_elements)
    keep = []
    for i, elem in enumerate(mesh.elements):
        pts = mesh.nodes[elem]
        dists = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        if np.any(dists < radius):
            keep.append(i)
    return np.array(keep, dtype=np.int64)


def run_deformation(case_name: str, p_list: Iterable[float], t: float = 1.0,
                    k: int = 49, eps: float = 1e-6,
                    endpoint_radius: float = 0.12) -> list[DeformationResult]:
    """Deform the case mesh by x -> x + t v(x) for each p.

    ``endpoint_min_angle`` is the minimum deformed-element angle over
    elements near the fixed endpoints of the free boundary, where the
    low-p solutions bend the mesh hardest.  Inverted elements show up as
    ``quality_after.min_element_area <= 0``.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError("deformation step t must lie in (0, 1]")
    case = get_case(case_name)
    if case.d_prime != 2 or case.dim != 2:
        raise ValueError("deformation requires a 2D vector-valued case")
    results = []
    for p in p_list:
        mesh, prob = case_problem(case_name, k, p)
        report = solver_mod.solve(prob, SolverConfig(eps=eps))
        v = report.u.reshape(mesh.n_nodes, 2)
        deformed = with_nodes(mesh, mesh.nodes + t * v)
        endpoints = mesh.nodes[free_boundary_endpoints(mesh)]
        near = _elements_near(mesh, endpoints, endpoint_radius)
        angles = element_min_angles(deformed)
        results.append(
            DeformationResult(
                p=p,
                step=t,
                mesh=mesh,
                deformed=deformed,
                quality_before=quality(mesh),
                quality_after=quality(deformed),
                endpoint_min_angle=float(angles[near].min()),
                max_displacement=float(np.linalg.norm(v, axis=1).max()),
                report=report,
            )
        )
    return results


# ---------------------------------------------------------------------------
# 1D solutions and their distance to the slope-1 limit profile

@dataclass
class OneDResult:
    xs: np.ndarray
    p_list: list
    solutions: dict                 # p -> nodal values
    tent_distance: dict             # p -> float, or None if f changes sign
    tent: np.ndarray
    sign: Optional[float]


def oned_limit(f, p_list: Iterable[float], k: int = 200,
               eps: float = 1e-6) -> OneDResult:
    """Solve the 1D problem for each p and measure sup distance to the tent.

    For constant-sign f the analytic p -> inf limit is sign(f) times
    dist(x, {0, 1}); for sign-changing f no distance is reported and the
    solutions are returned for inspection only.
    """
    mesh = unit_interval(k)
    xs = mesh.nodes[:, 0]
    f_nodal = problem_mod._sample_nodal(f, mesh.nodes, 1).ravel()
    if np.all(f_nodal >= 0.0):
        sign = 1.0
    elif np.all(f_nodal <= 0.0):
        sign = -1.0
    else:
        sign = None
    tent = np.minimum(xs, 1.0 - xs)

    solutions = {}
    distances = {}
    for p in p_list:
        data = ContinuousData(p=p, f=f, d_prime=1)
        prob = problem_mod.discretize(mesh, data)
        report = solver_mod.solve(prob, SolverConfig(eps=eps))
        u = report.u
        solutions[p] = u
        distances[p] = (
            float(np.max(np.abs(u - sign * tent))) if sign is not None else None
        )
    return OneDResult(
        xs=xs,
        p_list=list(p_list),
        solutions=solutions,
        tent_distance=distances,
        tent=tent,
        sign=sign,
    )


def write_oned_csv(result: OneDResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"] + [f"p={_fmt(p)}" for p in result.p_list] + ["tent"])
        for i, x in enumerate(result.xs):
            row = [_fmt(x)]
            row += [_fmt(result.solutions[p][i]) for p in result.p_list]
            row.append(_fmt(result.tent[i]))
            writer.writerow(row)


def write_validation_csv(results: Iterable[ValidationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "n", "max_error_c0", "max_error_c1",
                         "component_asymmetry", "newton_iters", "gap_bound"])
        for res in results:
            writer.writerow(
                [_fmt(res.p), res.n, _fmt(res.max_error[0]), _fmt(res.max_error[1]),
                 _fmt(res.component_asymmetry), res.report.newton_iters_total,
                 _fmt(res.report.gap_bound)]
            )


def write_deformation_csv(results: Iterable[DeformationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "t", "min_angle_before", "min_angle_after",
                         "endpoint_min_angle", "min_area_after",
                         "max_displacement", "newton_iters"])
        for res in results:
            writer.writerow(
                [_fmt(res.p), _fmt(res.step), _fmt(res.quality_before.min_angle),
                 _fmt(res.quality_after.min_angle), _fmt(res.endpoint_min_angle),
                 _fmt(res.quality_after.min_element_area),
                 _fmt(res.max_displacement), res.report.newton_iters_total]
            )
