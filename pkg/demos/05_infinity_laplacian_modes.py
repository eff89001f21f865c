"""Experimental direct solves of the p = inf limit problem.

Instead of per-element epigraph variables, the limit formulation bounds
every element Jacobian by a single scalar sigma and minimizes it (with
sigma >= 1 enforced when Neumann data is present, so the free boundary
reaches unit slope).  Both documented shortcomings are reproduced here:

* with the Frobenius inner norm the solver does NOT recover the unique
  Lipschitz extension of the classical datum x1^(4/3) - x2^(4/3) -- the
  minimizer of the elementwise bound is a different function;
* with the elementwise supremum inner norm the free boundary does reach
  slope 1, but the interior mesh is still not deformed uniformly.

This mode is a negative-result exhibit, not a production solver.

Run:  python3 demos/05_infinity_laplacian_modes.py
"""

import pathlib

import numpy as np

from plaplace import experiments, inflimit
from plaplace.mesh import export_vtk, unit_square
from plaplace.problem import ContinuousData
from plaplace.solver import SolverConfig

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)


def reference(pts):
    return pts[:, 0] ** (4.0 / 3.0) - pts[:, 1] ** (4.0 / 3.0)


print("pure-Dirichlet extension problem, Frobenius inner norm")
mesh = unit_square(24)
prob = inflimit.inf_problem(mesh, ContinuousData(p=2.0, g=reference, d_prime=1))
rep = inflimit.solve_inf(prob, SolverConfig(eps=1e-6))
err = np.abs(rep.u - reference(mesh.nodes)).max()
print(f"  sigma = {rep.sigma:.4f}, max deviation from the unique extension = {err:.3f}")
print("  (a correct limit solver would drive this to the mesh error; this one cannot)")
export_vtk(mesh, {"solution": rep.u, "reference": reference(mesh.nodes)},
           OUT / "inf_extension.vtk")

print("\nfree-boundary deformation, both inner norms")
mesh2 = unit_square(24, free_boundary=("left", "top"))
normals = experiments.boundary_normals(mesh2)
h_nodal = experiments.hat_source(mesh2.nodes)[:, None] * normals
for inner in ("frobenius", "supremum"):
    prob2 = inflimit.inf_problem(mesh2, ContinuousData(p=2.0, h=h_nodal, d_prime=2))
    prob2.inner_norm = inner
    rep2 = inflimit.solve_inf(prob2, SolverConfig(eps=1e-6))
    norms = inflimit.inner_norms(prob2, rep2.u)
    print(f"  {inner:>9}: sigma = {rep2.sigma:.4f}, "
          f"max element norm = {norms.max():.4f}, "
          f"iterations = {rep2.newton_iters_total}")
    export_vtk(mesh2, {"displacement": rep2.u.reshape(-1, 2)},
               OUT / f"inf_deformation_{inner}.vtk")
print(f"\nwrote VTK fields to {OUT}")
