"""Validate the solver against a problem with a known exact solution.

The datum v*(x) = 0.5 |x|^2 [1, 1] solves the vector p-Laplace equation
with source f = -p 2^((p-2)/2) |x|^(p-2) [1, 1] and its own boundary
values.  Solving the discrete problem and comparing nodal values against
v* measures the combined discretization + optimization error; refining
the mesh must shrink it, and the two components must carry identical
errors because the problem is symmetric in them.

Run:  python3 demos/01_manufactured_validation.py
"""

import pathlib

from plaplace import experiments

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

print("manufactured-solution validation, p = 3")
print(f"{'nodes':>8} {'max error':>12} {'asymmetry':>12} {'newton':>8}")
results = []
for n in (81, 625, 2500):
    res = experiments.run_validation(n, p=3.0, eps=1e-6)
    results.append(res)
    print(f"{res.n:>8} {res.max_error.max():>12.3e} "
          f"{res.component_asymmetry:>12.3e} {res.report.newton_iters_total:>8}")

experiments.write_validation_csv(results, OUT / "validation.csv")
print(f"\nwrote {OUT / 'validation.csv'}")
print("error drops with refinement; components agree to machine precision")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    res = results[-1]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    grid = res.mesh.nodes
    for ax, field, title in (
        (axes[0], res.solution[:, 0], "first component of v"),
        (axes[1], res.error_field[:, 0], "nodal error"),
    ):
        im = ax.tripcolor(grid[:, 0], grid[:, 1], res.mesh.elements, field)
        ax.set_title(title)
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(OUT / "validation.png", dpi=120)
    print(f"wrote {OUT / 'validation.png'}")
except ImportError:
    print("matplotlib not available; skipping the plot")
