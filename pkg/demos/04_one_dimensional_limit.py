"""Watch 1D solutions approach the slope-1 tent as p grows.

On [0, 1] with zero boundary values and constant source, the p -> inf
limit is the distance function dist(x, {0, 1}) with slope exactly 1; its
height depends only on the interval, not on the source magnitude.  The
finite-p solutions do depend on the magnitude, which is why moderate p
can be a poor stand-in for the limit.  A sign-changing source close to
one endpoint shows the other documented effect: the limit ignores the
small negative region while finite-p solutions still feel it.

Run:  python3 demos/04_one_dimensional_limit.py
"""

import pathlib

import numpy as np

from plaplace import experiments

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

p_list = [2.0, 5.0, 15.0, 25.0]

print("constant source f = 1")
res1 = experiments.oned_limit(lambda q: np.ones(len(q)), p_list, k=200)
for p in p_list:
    print(f"  p = {p:>4g}: sup distance to tent = {res1.tent_distance[p]:.4f}")

print("\nconstant source f = 10 (same limit, different finite-p solutions)")
res10 = experiments.oned_limit(lambda q: 10.0 * np.ones(len(q)), p_list, k=200)
for p in p_list:
    print(f"  p = {p:>4g}: sup distance to tent = {res10.tent_distance[p]:.4f}")

print("\nsign-changing source (qualitative: no analytic distance reported)")
res_sign = experiments.oned_limit(
    lambda q: np.where(q[:, 0] > 0.15, 1.0, -1.0), p_list, k=200
)

experiments.write_oned_csv(res1, OUT / "oned_f1.csv")
experiments.write_oned_csv(res10, OUT / "oned_f10.csv")
experiments.write_oned_csv(res_sign, OUT / "oned_sign.csv")
print(f"\nwrote nodal profiles to {OUT}/oned_*.csv")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharey=True)
    for ax, res, title in (
        (axes[0], res1, "f = 1"),
        (axes[1], res10, "f = 10"),
        (axes[2], res_sign, "sign-changing f"),
    ):
        for p in p_list:
            ax.plot(res.xs, res.solutions[p], label=f"p = {p:g}")
        ax.plot(res.xs, res.tent, "k--", label="slope-1 tent")
        ax.set_title(title)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(OUT / "oned_limit.png", dpi=120)
    print(f"wrote {OUT / 'oned_limit.png'}")
except ImportError:
    print("matplotlib not available; skipping the plot")
