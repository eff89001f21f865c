"""Command-line front end for the experiments and single solves.

Subcommands: validate, solve, table, deform, oned, inf.  Every run
writes its outputs plus a ``manifest.txt`` (resolved configuration and
library versions; byte-stable across identical runs) into the output
directory.  Exit codes: 0 success, 1 solver failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

__all__ = ["main"]

_ENV_OUT = "PLAPLACE_OUT"


class _UsageError(Exception):
    pass


def _parse_p_list(values) -> list[float]:
    out = []
    for chunk in values:
        for item in str(chunk).split(","):
            item = item.strip()
            if item:
                out.append(float(item))
    if not out:
        raise _UsageError("at least one --p value required")
    return out


def _parse_n_list(values) -> list[int]:
    out = []
    for chunk in values:
        for item in str(chunk).split(","):
            item = item.strip()
            if item:
                out.append(int(item))
    return out


def _load_config_file(path) -> dict:
    settings = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise _UsageError(f"bad config line (want key=value): {line!r}")
            key, value = line.split("=", 1)
            settings[key.strip()] = value.strip()
    return settings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plaplace",
        description="p-Laplace interior-point solver and experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, mesh=True):
        sp.add_argument("--config", help="key=value file pre-setting any flag")
        if mesh:
            group = sp.add_mutually_exclusive_group()
            group.add_argument("--k", type=int, help="cells per side")
            group.add_argument("--n", type=int, help="approximate node count")
        sp.add_argument("--eps", type=float, default=1e-6, help="target accuracy")
        sp.add_argument("--out", help="output directory (default: env %s or ./plaplace-out)" % _ENV_OUT)
        sp.add_argument("--verbose", action="store_true", help="log one line per Newton step")

    sp = sub.add_parser("validate", help="manufactured-solution validation")
    add_common(sp)
    sp.add_argument("--p", action="append", default=None, help="exponent(s), repeatable or comma-separated")

    sp = sub.add_parser("solve", help="single solve of a named case")
    add_common(sp)
    sp.add_argument("--case", required=True)
    sp.add_argument("--p", action="append", default=None)

    sp = sub.add_parser("table", help="Newton-iteration sweep over cases, p and n")
    add_common(sp, mesh=False)
    sp.add_argument("--case", action="append", default=None, help="repeatable")
    sp.add_argument("--p", action="append", default=None)
    sp.add_argument("--n", action="append", default=None, help="node counts, repeatable or comma-separated")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    sp = sub.add_parser("deform", help="perturbation-of-identity mesh deformation")
    add_common(sp)
    sp.add_argument("--case", default="hat-normal")
    sp.add_argument("--p", action="append", default=None)
    sp.add_argument("--t", type=float, default=1.0, help="deformation step in (0, 1]")

    sp = sub.add_parser("oned", help="1D high-p limit study")
    add_common(sp)
    sp.add_argument("--case", default="oned-const")
    sp.add_argument("--p", action="append", default=None)

    sp = sub.add_parser("inf", help="experimental p=inf mode")
    add_common(sp)
    sp.add_argument("--case", default="hat-normal")
    sp.add_argument("--inner-norm", choices=("frobenius", "sup"), default="frobenius")

    return parser


def _resolve(args) -> dict:
    """Merge config file and flags; flags win."""
    resolved = {k: v for k, v in vars(args).items() if k != "config"}
    if getattr(args, "config", None):
        # config pre-sets only values the command line left at default
        parser = _build_parser()
        defaults = vars(parser.parse_args(_rebuild_default_argv(args)))
        file_cfg = _load_config_file(args.config)
        for key, value in file_cfg.items():
            attr = key.replace("-", "_")
            if attr not in resolved:
                raise _UsageError(f"unknown config key: {key}")
            if resolved[attr] == defaults.get(attr):
                current = defaults.get(attr)
                if attr in ("p", "n", "case") and not isinstance(current, (int, float)):
                    resolved[attr] = value.split(",")
                elif isinstance(current, bool) or value in ("true", "false"):
                    resolved[attr] = value == "true"
                elif isinstance(current, int) and current is not None:
                    resolved[attr] = int(value)
                elif isinstance(current, float) and current is not None:
                    resolved[attr] = float(value)
                else:
                    resolved[attr] = value
    return resolved


def _rebuild_default_argv(args):
    return [args.command]


def _out_dir(resolved) -> Path:
    out = resolved.get("out") or os.environ.get(_ENV_OUT) or "plaplace-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _write_manifest(out: Path, resolved: dict) -> None:
    import scipy

    from . import __version__

    lines = [f"{key}={_fmt(value)}" for key, value in sorted(resolved.items())
             if value is not None]
    lines.append(f"version.numpy={np.__version__}")
    lines.append(f"version.plaplace={__version__}")
    lines.append(f"version.python={sys.version.split()[0]}")
    lines.append(f"version.scipy={scipy.__version__}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _mesh_size(resolved, default_k) -> int:
    from . import experiments

    if resolved.get("k"):
        return int(resolved["k"])
    if resolved.get("n"):
        return experiments.k_for_nodes(int(resolved["n"]))
    return default_k


def _solver_config(resolved):
    from .solver import SolverConfig

    return SolverConfig(eps=float(resolved["eps"]), verbose=bool(resolved.get("verbose")))


def _cmd_validate(resolved, out: Path) -> int:
    from . import experiments
    from .mesh import export_vtk

    p_list = _parse_p_list(resolved.get("p") or ["3"])
    k = _mesh_size(resolved, default_k=49)
    results = []
    for p in p_list:
        res = experiments.run_validation((k + 1) ** 2, p, eps=float(resolved["eps"]),
                                         cfg=_solver_config(resolved))
        results.append(res)
        export_vtk(
            res.mesh,
            {"solution": res.solution, "error": res.error_field},
            out / f"validate_p{_fmt(p)}.vtk",
        )
        print(f"p={_fmt(p)}: max nodal error = {_fmt(float(res.max_error.max()))} "
              f"({res.report.newton_iters_total} Newton iterations)")
    experiments.write_validation_csv(results, out / "validate.csv")
    return 0


def _cmd_solve(resolved, out: Path) -> int:
    from . import experiments, solver
    from .mesh import export_vtk

    case = _require_case(resolved["case"])
    p_list = _parse_p_list(resolved.get("p") or ["2"])
    k = _mesh_size(resolved, default_k=49)
    cfg = _solver_config(resolved)
    for p in p_list:
        mesh, prob = experiments.case_problem(case.name, k, p)
        report = solver.solve(prob, cfg)
        fields = {"solution": report.u.reshape(mesh.n_nodes, -1)}
        export_vtk(mesh, fields, out / f"solve_{case.name}_p{_fmt(p)}.vtk")
        summary = out / f"solve_{case.name}_p{_fmt(p)}.txt"
        summary.write_text(
            "\n".join(
                [
                    f"case={case.name}",
                    f"p={_fmt(p)}",
                    f"n={mesh.n_nodes}",
                    f"newton_iters_aux={report.newton_iters_aux}",
                    f"newton_iters_main={report.newton_iters_main}",
                    f"newton_iters_total={report.newton_iters_total}",
                    f"t_final={_fmt(report.t_final)}",
                    f"gap_bound={_fmt(report.gap_bound)}",
                    f"restarts={report.restarts}",
                    f"objective={_fmt(report.objective)}",
                ]
            )
            + "\n"
        )
        print(f"{case.name} p={_fmt(p)}: objective={_fmt(report.objective)} "
              f"iters={report.newton_iters_total} gap={_fmt(report.gap_bound)}")
    return 0


def _cmd_table(resolved, out: Path) -> int:
    from . import experiments

    cases = resolved.get("case") or ["scalar-hat", "hat-normal", "hat-ones"]
    cases = [c for chunk in cases for c in str(chunk).split(",") if c]
    for name in cases:
        _require_case(name)
    p_list = _parse_p_list(resolved.get("p") or ["2,3,5,8,15,25"])
    n_list = _parse_n_list(resolved.get("n") or ["2500"])
    result = experiments.run_table(cases, p_list, n_list, eps=float(resolved["eps"]),
                                   jobs=int(resolved.get("jobs") or 1))
    result.write_counts_csv(out / "table.csv")
    result.write_details_csv(out / "table_details.csv")
    failures = [key for key, cell in result.cells.items() if not hasattr(cell, "u")]
    for key in failures:
        print(f"cell {key} failed: {result.cells[key]}", file=sys.stderr)
    print(f"wrote {out / 'table.csv'} ({len(result.cells) - len(failures)}/"
          f"{len(result.cells)} cells solved)")
    return 1 if failures else 0


def _cmd_deform(resolved, out: Path) -> int:
    from . import experiments
    from .mesh import export_vtk

    case = _require_case(resolved["case"])
    p_list = _parse_p_list(resolved.get("p") or ["2,5,15"])
    k = _mesh_size(resolved, default_k=49)
    results = experiments.run_deformation(case.name, p_list, t=float(resolved["t"]),
                                          k=k, eps=float(resolved["eps"]))
    for res in results:
        v = res.report.u.reshape(res.mesh.n_nodes, 2)
        export_vtk(res.mesh, {"displacement": v}, out / f"deform_{case.name}_p{_fmt(res.p)}_before.vtk")
        export_vtk(res.deformed, {}, out / f"deform_{case.name}_p{_fmt(res.p)}_after.vtk")
        print(f"p={_fmt(res.p)}: min_angle {_fmt(res.quality_before.min_angle)} -> "
              f"{_fmt(res.quality_after.min_angle)} (endpoints {_fmt(res.endpoint_min_angle)}), "
              f"max displacement {_fmt(res.max_displacement)}")
    experiments.write_deformation_csv(results, out / f"deform_{case.name}.csv")
    return 0


def _cmd_oned(resolved, out: Path) -> int:
    from . import experiments

    case = _require_case(resolved["case"])
    if case.dim != 1:
        raise _UsageError(f"case {case.name!r} is not one-dimensional")
    p_list = _parse_p_list(resolved.get("p") or ["2,5,15,25"])
    k = _mesh_size(resolved, default_k=200)
    mesh, data = case.build(k, p_list[0])
    result = experiments.oned_limit(data.f, p_list, k=k, eps=float(resolved["eps"]))
    experiments.write_oned_csv(result, out / f"oned_{case.name}.csv")
    for p in p_list:
        dist = result.tent_distance[p]
        msg = _fmt(dist) if dist is not None else "n/a (sign-changing source)"
        print(f"p={_fmt(p)}: sup distance to tent = {msg}")
    return 0


def _cmd_inf(resolved, out: Path) -> int:
    from . import experiments, inflimit
    from .mesh import export_vtk

    print("warning: p=inf mode is experimental; it reproduces documented "
          "negative results and is not an AMLE solver", file=sys.stderr)
    case = _require_case(resolved["case"])
    k = _mesh_size(resolved, default_k=24)
    inner = "supremum" if resolved["inner_norm"] == "sup" else "frobenius"
    mesh, data = case.build(k, 2.0)
    prob = inflimit.inf_problem(mesh, data)
    prob.inner_norm = inner
    report = inflimit.solve_inf(prob, _solver_config(resolved))
    fields = {"solution": report.u.reshape(mesh.n_nodes, -1)}
    export_vtk(mesh, fields, out / f"inf_{case.name}_{inner}.vtk")
    print(f"{case.name} inner={inner}: sigma={_fmt(report.sigma)} "
          f"objective={_fmt(report.objective)} iters={report.newton_iters_total}")
    return 0


def _require_case(name):
    from . import experiments

    try:
        return experiments.get_case(str(name))
    except KeyError as exc:
        raise _UsageError(str(exc)) from None


_COMMANDS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "table": _cmd_table,
    "deform": _cmd_deform,
    "oned": _cmd_oned,
    "inf": _cmd_inf,
}


def main(argv=None) -> int:
    from .barrier import InfeasiblePointError
    from .solver import SolverError

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        resolved = _resolve(args)
        out = _out_dir(resolved)
        _write_manifest(out, resolved)
        started = time.time()
        code = _COMMANDS[args.command](resolved, out)
        with open(out / "run.log", "a") as fh:
            fh.write(f"command={args.command} elapsed={time.time() - started:.3f}s\n")
        return code
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, InfeasiblePointError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
