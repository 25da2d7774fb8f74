"""Command-line driver: ``multitime-games <command> --spec FILE [options]``.

Every command prints one ``key=value ...`` summary line on standard output;
warnings and reports go to standard error or to files. Exit codes: 0 ok,
1 usage or load error, 2 validation failure, 3 numeric failure. CSV files
are written through a temporary file and renamed, so a failed run leaves
nothing partial behind.

Command-specific settings may live in the spec document under a key named
after the command (``simulate``, ``value``, ``hji``, ``represent``,
``crosscheck``); flags override them.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from ._io import csv_text, fmt, write_atomic
from .dynamics import ControlSignal, IntegrationError, Trajectory, curvilinear_integral, integrate_flow
from .expr import ExprError
from .gamespec import (GameSpec, SpecError, check_cic, check_closedness, halton, load_spec,
                       validate_bounds)
from .hamiltonian import (HamiltonianForm, MarchError, crosscheck_value_vs_hj, hj_march,
                          pde_residual)
from .lattice import IncreasingPath, LatticeError, StateGrid, canonical_path
from .representation import (RepresentationError, build_affine_rep, build_homogeneous_rep,
                             certify_representation, sample_points)
from .values import SPILL_WARN, BudgetError, ValueGrid, check_value_bounds, solve_values

EXIT_OK, EXIT_LOAD, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_STEPS = 8
DEFAULT_POINTS = 41


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _summary(**items) -> str:
    parts = []
    for k, v in items.items():
        if isinstance(v, (float, np.floating)):
            v = fmt(v)
        elif isinstance(v, (list, tuple, np.ndarray)):
            v = ",".join(fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in np.ravel(v))
        parts.append(f"{k}={v}")
    return " ".join(parts)


def _section(spec: GameSpec, name: str) -> dict:
    sec = spec.extra.get(name) or {}
    if not isinstance(sec, dict):
        raise UsageError(f"section {name!r} must be a mapping")
    return sec


def _lattice(spec: GameSpec, args):
    if args.steps:
        return spec.lattice(args.steps)
    if spec.lattice_steps is not None:
        return spec.lattice()
    return spec.lattice(DEFAULT_STEPS)


def _state_grid(spec: GameSpec, args) -> StateGrid:
    if args.points:
        pts = np.broadcast_to(args.points, (spec.n,))
        return StateGrid(spec.state_box[0], spec.state_box[1], tuple(int(p) for p in pts))
    if spec.state_grid is not None:
        return spec.state_grid
    return StateGrid(spec.state_box[0], spec.state_box[1], (DEFAULT_POINTS,) * spec.n)


def _path(spec: GameSpec, lattice, section: dict) -> IncreasingPath:
    axes = section.get("path", "canonical")
    if axes == "canonical":
        return canonical_path(lattice.box, lattice)
    return IncreasingPath.from_axes(lattice.box.lo, [int(a) for a in axes], lattice.spacing)


def _hamiltonian(spec: GameSpec, section: dict, kind: str) -> HamiltonianForm:
    trees = section.get("hamiltonian")
    if trees is None:
        return HamiltonianForm.induced(spec, kind)
    K = section.get("K")
    return HamiltonianForm.from_exprs(trees, spec.n, K=K, T=spec.T, state_box=spec.state_box)


def _write(path, text: str | None):
    if path and text is not None:
        write_atomic(path, text)


# commands

def cmd_validate(spec: GameSpec, args) -> int:
    sec = _section(spec, "validate")
    samples = int(args.samples or sec.get("samples", 4096))
    tol = float(sec.get("tolerance", args.tol))
    rep = validate_bounds(spec, samples, seed=args.seed)
    lines = [f"A_est={','.join(fmt(v) for v in rep.A_est)}", f"B_est={fmt(rep.B_est)}",
             f"C_est={','.join(fmt(v) for v in rep.C_est)}"]
    lines += [f"bound violation: {v}" for v in rep.violations]
    fd_samples = int(sec.get("fd_samples", 32))
    s = halton(spec.m + spec.n + 2, fd_samples, args.seed)
    t = s[:, :spec.m] * spec.T
    lo, hi = spec.state_box
    x = lo + s[:, spec.m:spec.m + spec.n] * (hi - lo)
    Ug, Vg = spec.U_grid, spec.V_grid
    iu = np.minimum((s[:, -2] * len(Ug)).astype(int), len(Ug) - 1)
    iv = np.minimum((s[:, -1] * len(Vg)).astype(int), len(Vg) - 1)
    worst_closed, worst_cic = (0.0, None), (0.0, None)
    for k in range(fd_samples):
        r = np.abs(check_closedness(spec, t[k], x[k], Ug[iu[k]], Vg[iv[k]]))
        if r.max() > worst_closed[0]:
            a, b = np.unravel_index(int(np.argmax(r)), r.shape)
            worst_closed = (float(r.max()), (int(a), int(b), k))
        c = np.linalg.norm(check_cic(spec, t[k], x[k], Ug[iu[k]], Vg[iv[k]]), axis=-1)
        if c.max() > worst_cic[0]:
            a, b = np.unravel_index(int(np.argmax(c)), c.shape)
            worst_cic = (float(c.max()), (int(a), int(b), k))
    for name, (val, where) in (("closedness", worst_closed), ("cic", worst_cic)):
        line = f"{name}_max={fmt(val)}"
        if where:
            a, b, k = where
            line += f" alpha={a} beta={b} sample={k} t={t[k].tolist()} x={x[k].tolist()}"
        lines.append(line)
    closed_ok = worst_closed[0] <= tol
    cic_ok = worst_cic[0] <= tol
    report = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, report)
    else:
        sys.stderr.write(report)
    ok = rep.ok and closed_ok and cic_ok
    print(_summary(ok=str(ok).lower(), bound_violations=len(rep.violations),
                   closedness=worst_closed[0], cic=worst_cic[0], bounds_estimated=str(
                       spec.bounds is None or spec.bounds.estimated).lower()))
    return EXIT_OK if ok else EXIT_INVALID


def cmd_simulate(spec: GameSpec, args) -> int:
    sec = _section(spec, "simulate")
    lattice = _lattice(spec, args)
    path = _path(spec, lattice, sec)
    x0 = args.x0 if args.x0 is not None else sec.get("x0", [0.0] * spec.n)

    def signal(key, grid):
        val = sec.get(key)
        if val is None:
            return ControlSignal.constant(grid[0], path.n_segments)
        arr = np.asarray(val, dtype=float)
        if arr.ndim <= 1 and arr.size == spec.q:
            return ControlSignal.constant(arr, path.n_segments)
        return ControlSignal(arr.reshape(path.n_segments, spec.q))

    u, v = signal("u", spec.U_grid), signal("v", spec.V_grid)
    traj = integrate_flow(spec, path, u, v, x0, args.substeps)
    costs = [0.0]
    for k in range(path.n_segments):
        sub = IncreasingPath(path.vertices[k:k + 2], (path.axes[k],))
        part = Trajectory(traj.states[k:k + 2], sub)
        costs.append(costs[-1] + curvilinear_integral(spec, part, ControlSignal(u.values[k:k + 1]),
                                                      ControlSignal(v.values[k:k + 1]), args.substeps))
    g = float(spec.eval_g(traj.final))
    if not np.isfinite(g):
        raise IntegrationError("terminal cost is non-finite")
    header = [f"t^{i + 1}" for i in range(spec.m)] + [f"x^{i + 1}" for i in range(spec.n)] + ["cost"]
    rows = [[fmt(a) for a in path.vertices[k]] + [fmt(a) for a in traj.states[k]] + [fmt(costs[k])]
            for k in range(path.n_segments + 1)]
    _write(args.out, csv_text(header, rows))
    print(_summary(payoff=costs[-1] + g, running_cost=costs[-1], terminal_cost=g,
                   final_x=traj.final, segments=path.n_segments))
    return EXIT_OK


def cmd_value(spec: GameSpec, args) -> int:
    sec = _section(spec, "value")
    kind = args.kind or sec.get("kind", "upper")
    lattice = _lattice(spec, args)
    sg = _state_grid(spec, args)
    path = _path(spec, lattice, sec)
    grid = solve_values(spec, lattice, sg, path, kind, substeps=args.substeps,
                        full_lattice=bool(args.full_lattice or sec.get("full_lattice", False)),
                        workers=args.workers)
    if not np.all(np.isfinite(grid.values)):
        raise FloatingPointError("value grid has non-finite entries")
    _write(args.out, grid.csv_text())
    x0 = args.x0 if args.x0 is not None else sec.get("x0", [0.0] * spec.n)
    items = dict(kind=kind, value_at_x0=grid.value_at(path.start, x0),
                 max_abs_value=float(np.max(np.abs(grid.values))), spill=grid.spill_fraction)
    if spec.bounds is not None:
        b = check_value_bounds(grid, spec)
        items.update(D=b.D_used, bound_violations=len(b.violations), E_meas=b.E_meas, F_meas=b.F_meas)
    items["unreliable"] = str(grid.unreliable).lower()
    if grid.unreliable:
        sys.stderr.write(f"warning: {grid.spill_fraction:.2%} of flow images left the state grid "
                         f"(threshold {SPILL_WARN:.0%}); values near the boundary are unreliable\n")
    print(_summary(**items))
    return EXIT_OK


def cmd_hji(spec: GameSpec, args) -> int:
    sec = _section(spec, "hji")
    kind = args.kind or sec.get("kind", "upper")
    direction = args.direction or sec.get("direction", "backward")
    lattice = _lattice(spec, args)
    sg = _state_grid(spec, args)
    path = _path(spec, lattice, sec)
    H = _hamiltonian(spec, sec, kind)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        grid = hj_march(H, spec.g, lattice, sg, path, direction=direction,
                        substeps=sec.get("substeps"))
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    res = pde_residual(grid, H)
    _write(args.out, grid.csv_text())
    _write(args.residual_out, res.csv_text())
    finite = res.values[np.isfinite(res.values)]
    print(_summary(direction=direction, provenance=H.provenance,
                   max_residual=float(finite.max()) if finite.size else float("nan"),
                   K=H.K, max_abs_value=float(np.max(np.abs(grid.values)))))
    return EXIT_OK


def cmd_represent(spec: GameSpec, args) -> int:
    sec = _section(spec, "represent")
    form = args.form or sec.get("form", "affine")
    P = float(args.P or sec.get("P", 2.0))
    pts = int(sec.get("points_per_axis", 33 if spec.n == 1 else 17))
    count = int(args.samples or sec.get("samples", 256))
    H = _hamiltonian(spec, sec, sec.get("kind", "upper"))
    if form == "affine":
        rep = build_affine_rep(H, P, pts)
        samples = sample_points(H, count, P, seed=args.seed)
        bound = float(np.max(rep.K)) * rep.v_spacing
    elif form == "homogeneous":
        rep = build_homogeneous_rep(H, pts, seed=args.seed)
        samples = sample_points(H, count, 1.0, seed=args.seed, sphere=True)
        bound = float(np.max(rep.K)) * rep.v_spacing
    else:
        raise UsageError(f"unknown form {form!r}; use affine or homogeneous")
    tol = float(sec.get("tolerance", bound))
    cert = certify_representation(rep, samples)
    _write(args.out, cert.csv_text())
    ok = cert.max_abs_error <= tol
    print(_summary(form=form, cert_error=cert.max_abs_error, tolerance=tol, ok=str(ok).lower(),
                   K=rep.K, out_of_region=cert.out_of_region_count))
    return EXIT_OK if ok else EXIT_INVALID


def cmd_crosscheck(spec: GameSpec, args) -> int:
    sec = _section(spec, "crosscheck")
    kind = args.kind or sec.get("kind", "upper")
    lattice = _lattice(spec, args)
    sg = _state_grid(spec, args)
    path = _path(spec, lattice, sec)
    rep = crosscheck_value_vs_hj(spec, lattice, sg, path, kind, margin=sec.get("margin", "auto"),
                                 substeps=args.substeps, workers=args.workers)
    diff = ValueGrid(lattice, sg, rep.dpp.nodes, np.abs(rep.dpp.values - rep.march.values), kind,
                     path=path, column="discrepancy")
    _write(args.out, diff.csv_text())
    print(_summary(kind=kind, max_discrepancy=rep.max_discrepancy, h=rep.h,
                   ratio_to_h=rep.max_discrepancy / rep.h if rep.h > 0 else 0.0,
                   trusted_nodes=rep.trusted_nodes, margin=rep.reach))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "value": cmd_value,
    "hji": cmd_hji,
    "represent": cmd_represent,
    "crosscheck": cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multitime-games", description="Multitime differential games toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "") + " workflow")
        p.add_argument("--spec", required=True, help="game document (.json, .yaml or .yml)")
        p.add_argument("--out", help="output file (CSV, or the text report for validate)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None, help="scrambles the quasi-random samples")
        p.add_argument("--steps", type=_ints, help="lattice steps per axis, comma separated")
        p.add_argument("--points", type=_ints, help="state grid points per axis, comma separated")
        p.add_argument("--substeps", type=int, default=None)
        p.add_argument("--x0", type=_floats, default=None)
        if name in ("value", "hji", "crosscheck"):
            p.add_argument("--kind", choices=("lower", "upper"))
        if name == "value":
            p.add_argument("--full-lattice", action="store_true")
        if name == "hji":
            p.add_argument("--direction", choices=("forward", "backward"))
            p.add_argument("--residual-out", help="CSV of per-node residuals")
        if name == "validate":
            p.add_argument("--samples", type=int)
            p.add_argument("--tol", type=float, default=1e-6)
        if name == "represent":
            p.add_argument("--form", choices=("affine", "homogeneous"))
            p.add_argument("--P", type=float)
            p.add_argument("--samples", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        for name in ("workers", "substeps"):
            val = getattr(args, name, None)
            if val is not None and val <= 0:
                raise UsageError(f"--{name} must be positive")
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_LOAD
    try:
        spec = load_spec(args.spec)
    except FileNotFoundError as exc:
        sys.stderr.write(f"load error: {exc}\n")
        return EXIT_LOAD
    except SpecError as exc:
        sys.stderr.write("load error: invalid spec\n")
        for path, msg in exc.errors:
            sys.stderr.write(f"  {path}: {msg}\n")
        return EXIT_LOAD
    except (ExprError, ValueError, TypeError, KeyError, OSError) as exc:
        sys.stderr.write(f"load error: {exc}\n")
        return EXIT_LOAD
    try:
        return COMMANDS[args.command](spec, args)
    except (UsageError, LatticeError, SpecError, ExprError, RepresentationError, KeyError, TypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_LOAD
    except (IntegrationError, MarchError, BudgetError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_LOAD


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
