"""Lower and upper value functions by multitime dynamic programming.

The backward recursion runs cell by cell along a staircase path. With frozen
controls on a cell, the upper value takes ``min_v max_u`` of the one-cell
cost plus the interpolated next slice (the maximizing team answers the
minimizer's control), and the lower value takes ``max_u min_v``.

:func:`brute_force_value` is the independent oracle: exact backward induction
over the full game tree with no state grid at all.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _io
from .dynamics import IntegrationError, flow_cell
from .gamespec import GameSpec
from .lattice import IncreasingPath, Lattice, LatticeError, StateGrid, path_length, suborder_points

__all__ = [
    "KINDS",
    "ValueGrid",
    "DiscreteStrategy",
    "dpp_step",
    "solve_values",
    "dpp_consistency",
    "brute_force_value",
    "BudgetError",
    "ValueBoundsReport",
    "check_value_bounds",
    "StateGrid",
]

KINDS = ("lower", "upper")
SPILL_WARN = 0.01
_CHUNK = 1 << 21


class BudgetError(RuntimeError):
    """The game tree is larger than the allowed node budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"game tree needs {required} nodes, budget is {budget}")


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"kind must be 'lower' or 'upper', got {kind!r}")
    return kind


def _minmax(Q: np.ndarray, kind: str) -> np.ndarray:
    """Reduce a ``(..., Nu, Nv)`` table: upper = min_v max_u, lower = max_u min_v."""
    if kind == "upper":
        return Q.max(axis=-2).min(axis=-1)
    return Q.min(axis=-1).max(axis=-1)


@dataclass
class ValueGrid:
    """Sampled values over (multitime node) x (state node).

    ``nodes[k]`` is a lattice node and ``values[k]`` the flat state slice there
    (state order as :meth:`StateGrid.nodes`). In path mode the rows follow the
    path's vertices; a full-lattice solve stores every node.
    """

    lattice: Lattice
    state_grid: StateGrid
    nodes: np.ndarray
    values: np.ndarray
    kind: str
    path: IncreasingPath | None = None
    spill_fraction: float = 0.0
    substeps: int | None = None
    column: str = "value"
    _rows: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self._rows = {}
        for k, node in enumerate(self.nodes):
            self._rows.setdefault(self.lattice.index_of(node), k)

    @property
    def unreliable(self) -> bool:
        return self.spill_fraction > SPILL_WARN

    def has(self, node) -> bool:
        try:
            return self.lattice.index_of(node) in self._rows
        except LatticeError:
            return False

    def row(self, node) -> int:
        idx = self.lattice.index_of(node)
        if idx not in self._rows:
            raise LatticeError(f"node {np.asarray(node).tolist()} is not stored in this grid")
        return self._rows[idx]

    def slice(self, node) -> np.ndarray:
        return self.values[self.row(node)]

    def slice_nd(self, node) -> np.ndarray:
        return self.slice(node).reshape(self.state_grid.shape)

    def value_at(self, node, x):
        """Multilinear interpolation of the slice at ``node`` (clamped to the grid)."""
        pts = np.asarray(x, dtype=float)
        out, _ = _interpolate(self.state_grid, self.slice(node), pts.reshape(-1, self.state_grid.n))
        return float(out[0]) if pts.ndim <= 1 else out

    def csv_text(self) -> str:
        m, n = self.lattice.m, self.state_grid.n
        header = [f"t^{a + 1}" for a in range(m)] + [f"x^{i + 1}" for i in range(n)] + [self.column]
        xs = self.state_grid.nodes()
        xs_txt = [[_io.fmt(c) for c in x] for x in xs]
        rows = []
        for node, vals in zip(self.nodes, self.values):
            t_txt = [_io.fmt(c) for c in node]
            rows.extend(t_txt + xt + [_io.fmt(val)] for xt, val in zip(xs_txt, vals))
        return _io.csv_text(header, rows)

    def to_csv(self, path) -> None:
        _io.write_atomic(path, self.csv_text())


@dataclass(frozen=True)
class DiscreteStrategy:
    """Nonanticipating map from an opponent's control-index history to an own index.

    ``table`` maps a tuple ``(j_1, ..., j_k)`` of opponent indices for steps
    ``1..k`` to the own index at step ``k``; only the prefix up to the current
    step is ever consulted.
    """

    table: dict

    def __call__(self, history) -> int:
        return self.table[tuple(history)]

    def respond(self, opponent) -> list[int]:
        return [self(opponent[: k + 1]) for k in range(len(opponent))]


def _interpolate(state_grid: StateGrid, values: np.ndarray, points: np.ndarray):
    """Clamped multilinear interpolation; returns ``(values, spilled_mask)``."""
    lo, hi = state_grid.lo, state_grid.hi
    tol = 1e-9 * state_grid.spacing
    spilled = np.any((points < lo - tol) | (points > hi + tol), axis=-1)
    pts = np.clip(points, lo, hi)
    interp = RegularGridInterpolator(state_grid.axes, values.reshape(state_grid.shape),
                                     method="linear", bounds_error=False, fill_value=None)
    flat = pts.reshape(-1, state_grid.n)
    return interp(flat).reshape(pts.shape[:-1]), spilled


def _step_chunk(spec, state_grid, node, axis, length, next_values, kind, substeps, xs):
    U, V = spec.U_grid, spec.V_grid
    x = xs[:, None, None, :]
    u = U[None, :, None, :]
    v = V[None, None, :, :]
    images, cost = flow_cell(spec, axis, node, length, x, u, v, substeps)
    if not (np.all(np.isfinite(images)) and np.all(np.isfinite(cost))):
        raise IntegrationError(f"non-finite flow image from node {np.asarray(node).tolist()} along axis {axis}")
    nxt, spilled = _interpolate(state_grid, next_values, images)
    out = _minmax(cost + nxt, kind)
    return out, np.any(spilled, axis=(1, 2))


def dpp_step(spec: GameSpec, lattice: Lattice, state_grid: StateGrid, node, axis: int,
             next_values, kind: str, substeps: int | None = None, workers: int = 1,
             return_spill: bool = False):
    """One backward cell of the recursion.

    ``next_values`` is the flat slice at ``node + e_axis``. Returns the slice at
    ``node``; with ``return_spill`` also the boolean mask of state nodes whose
    flow image left the grid for some control pair (such images are clamped).
    """
    _check_kind(kind)
    node = np.asarray(node, dtype=float)
    lattice.index_of(node)
    nxt = node.copy()
    nxt[axis] += lattice.spacing[axis]
    lattice.index_of(nxt)
    next_values = np.asarray(next_values, dtype=float).reshape(-1)
    if next_values.size != state_grid.size:
        raise ValueError(f"next_values has {next_values.size} entries, state grid has {state_grid.size}")
    xs = state_grid.nodes()
    per = max(1, _CHUNK // max(1, len(spec.U_grid) * len(spec.V_grid) * max(spec.n, 1)))
    chunks = [xs[i : i + per] for i in range(0, len(xs), per)]
    args = (spec, state_grid, node, axis, float(lattice.spacing[axis]), next_values, kind, substeps)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _step_chunk(*args, c), chunks))
    else:
        parts = [_step_chunk(*args, c) for c in chunks]
    out = np.concatenate([p[0] for p in parts])
    spill = np.concatenate([p[1] for p in parts])
    return (out, spill) if return_spill else out


def _terminal_slice(spec: GameSpec, state_grid: StateGrid) -> np.ndarray:
    return np.array(spec.eval_g(state_grid.nodes()), dtype=float)


def solve_values(spec: GameSpec, lattice: Lattice, state_grid: StateGrid, path: IncreasingPath,
                 kind: str, substeps: int | None = None, full_lattice: bool = False,
                 workers: int = 1) -> ValueGrid:
    """Backward recursion from ``g`` at the end of ``path`` to its start.

    ``path`` must be a unit-step staircase on ``lattice``. In path mode the
    result has one row per vertex. With ``full_lattice`` every node of
    ``[path.start, T]`` is solved, stepping along the path's own axis on path
    vertices and along the lowest unfinished axis elsewhere.
    """
    _check_kind(kind)
    for k, node in enumerate(path.vertices):
        lattice.index_of(node)
    if np.any(np.abs(path.segment_lengths() - lattice.spacing[list(path.axes)]) >
              1e-9 * np.maximum(1.0, lattice.spacing[list(path.axes)])):
        raise LatticeError("solve_values needs a path made of single lattice steps")
    terminal = _terminal_slice(spec, state_grid)
    spills = []
    if not full_lattice:
        vals = [None] * (path.n_segments + 1)
        vals[-1] = terminal
        for k in range(path.n_segments - 1, -1, -1):
            vals[k], sp = dpp_step(spec, lattice, state_grid, path.vertices[k], path.axes[k], vals[k + 1],
                                   kind, substeps, workers, return_spill=True)
            spills.append(sp.mean())
        nodes = path.vertices
        values = np.array(vals)
    else:
        if not np.allclose(path.end, lattice.box.hi):
            raise LatticeError("full-lattice solve needs a path ending at T")
        on_path = {lattice.index_of(v): a for v, a in zip(path.vertices[:-1], path.axes)}
        store: dict = {}
        order = suborder_points(lattice, path.start)
        for node in order:
            idx = lattice.index_of(node)
            if idx == tuple(lattice.steps):
                store[idx] = terminal
                continue
            axis = on_path.get(idx)
            if axis is None:
                axis = next(a for a in range(lattice.m) if idx[a] < lattice.steps[a])
            nxt = list(idx)
            nxt[axis] += 1
            store[idx], sp = dpp_step(spec, lattice, state_grid, node, axis, store[tuple(nxt)], kind,
                                      substeps, workers, return_spill=True)
            spills.append(sp.mean())
        # path vertices first, in path order, then the remaining nodes
        keys = [lattice.index_of(v) for v in path.vertices]
        seen = set(keys)
        keys += [k for k in (lattice.index_of(p) for p in order[::-1]) if k not in seen]
        nodes = np.array([lattice.point(k) for k in keys])
        values = np.array([store[k] for k in keys])
    return ValueGrid(lattice, state_grid, nodes, values, kind, path=path,
                     spill_fraction=float(np.mean(spills)) if spills else 0.0,
                     substeps=substeps)


def dpp_consistency(spec: GameSpec, grid: ValueGrid, node, h, order=None,
                    substeps: int | None = None) -> float:
    """Largest gap between ``grid`` at ``node`` and a lookahead from ``node + h``.

    The lookahead composes :func:`dpp_step` backward over a staircase from
    ``node`` to ``node + h`` whose axis sequence is ``order``. By default the
    grid's own path between the two nodes is used, which reproduces the
    recursion exactly; any other order tests path independence.
    """
    node = np.asarray(node, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("increment must be nonnegative")
    target = node + h
    if not grid.has(node) or not grid.has(target):
        raise LatticeError("both nodes must be stored in the solved grid")
    lat = grid.lattice
    i0, i1 = np.array(lat.index_of(node)), np.array(lat.index_of(target))
    counts = i1 - i0
    if order is None:
        order = _path_order(grid, i0, i1)
        if order is None:
            order = [a for a in range(lat.m) for _ in range(int(counts[a]))]
    order = [int(a) for a in order]
    if np.any(np.bincount(order, minlength=lat.m) != counts):
        raise ValueError(f"order {order} does not connect the two nodes")
    sub = IncreasingPath.from_axes(node, order, lat.spacing)
    vals = grid.slice(target)
    sub_steps = grid.substeps if substeps is None else substeps
    for k in range(sub.n_segments - 1, -1, -1):
        vals = dpp_step(spec, lat, grid.state_grid, sub.vertices[k], sub.axes[k], vals, grid.kind, sub_steps)
    return float(np.max(np.abs(grid.slice(node) - vals))) if vals.size else 0.0


def _path_order(grid: ValueGrid, i0, i1):
    if grid.path is None:
        return None
    keys = [grid.lattice.index_of(v) for v in grid.path.vertices]
    try:
        a, b = keys.index(tuple(i0)), keys.index(tuple(i1))
    except ValueError:
        return None
    return list(grid.path.axes[a:b]) if a <= b else None


def brute_force_value(spec: GameSpec, path: IncreasingPath, x0, kind: str, max_nodes: int = 2_000_000,
                      substeps: int | None = None) -> float:
    """Exact discrete game value at ``x0`` by backward induction on the game tree.

    The tree branches over every pair of control points on every segment, with
    the exact (grid-free) per-cell flow and cost. For the lower kind the
    minimizer answers each maximizer move within the same cell
    (``max_u min_v`` at every level); for the upper kind the roles swap.
    Optimizing a nonanticipating strategy against open-loop controls is the
    same as this alternating induction because strategy choices at distinct
    histories are independent.
    """
    _check_kind(kind)
    nu, nv, ns = len(spec.U_grid), len(spec.V_grid), path.n_segments
    required = ns * (nu * nv) ** ns
    if required > max_nodes:
        raise BudgetError(required, max_nodes)
    lengths = path.segment_lengths()
    states = np.asarray(x0, dtype=float).reshape(1, spec.n)
    costs = []
    for k, a in enumerate(path.axes):
        images, c = flow_cell(spec, a, path.vertices[k], lengths[k], states[:, None, None, :],
                              spec.U_grid[None, :, None, :], spec.V_grid[None, None, :, :], substeps)
        if not (np.all(np.isfinite(images)) and np.all(np.isfinite(c))):
            raise IntegrationError("non-finite state in the game tree", k)
        costs.append(c)
        states = images.reshape(-1, spec.n)
    vals = spec.eval_g(states)
    for c in reversed(costs):
        vals = _minmax(c + vals.reshape(c.shape), kind).reshape(-1)
    return float(vals[0])


@dataclass
class ValueBoundsReport:
    D_used: float
    D_path: float
    E_derived: float
    F_derived: float
    E_meas: float
    F_meas: float
    max_abs_value: float
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_value_bounds(grid: ValueGrid, spec: GameSpec, tol: float = 1e-9) -> ValueBoundsReport:
    """Compare a solved grid with the bound and continuity constants.

    ``D_used = |C| l(Gamma_0T) + B`` with Euclidean norms, and the candidates
    ``E = |C| + |C| l |A|``, ``F = |C| l + B``. ``D_path`` is the sharper
    staircase bound ``sum_a C_a (T^a - t0^a) + B``. ``E_meas`` and ``F_meas``
    are the largest difference quotients between neighbouring multitime and
    state nodes.
    """
    if spec.bounds is None:
        raise ValueError("spec has no bounds; run validate_bounds first")
    A, B, C = spec.bounds.A, spec.bounds.B, spec.bounds.C
    lat = grid.lattice
    if grid.path is not None:
        ell = path_length(grid.path)
        extent = grid.path.end - grid.path.start
    else:
        extent = lat.box.extent
        ell = float(np.sum(extent))
    nC, nA = float(np.linalg.norm(C)), float(np.linalg.norm(A))
    D_used = nC * ell + B
    D_path = float(np.dot(C, extent)) + B
    vals = grid.values
    abs_vals = np.abs(vals)
    violations = []
    for k in np.argwhere(abs_vals > D_used + tol):
        violations.append(dict(node=grid.nodes[k[0]].tolist(), state=int(k[1]), value=float(vals[k[0], k[1]])))
    E_meas = 0.0
    for k, node in enumerate(grid.nodes):
        for a in range(lat.m):
            nb = node.copy()
            nb[a] += lat.spacing[a]
            if lat.spacing[a] > 0 and grid.has(nb):
                dq = np.abs(grid.slice(nb) - vals[k]) / lat.spacing[a]
                E_meas = max(E_meas, float(dq.max()))
    F_meas = 0.0
    sg = grid.state_grid
    for k in range(len(vals)):
        v = vals[k].reshape(sg.shape)
        for i in range(sg.n):
            d = np.abs(np.diff(v, axis=i)) / sg.spacing[i]
            F_meas = max(F_meas, float(d.max()))
    return ValueBoundsReport(D_used=D_used, D_path=D_path, E_derived=nC + nC * ell * nA, F_derived=nC * ell + B,
                             E_meas=E_meas, F_meas=F_meas, max_abs_value=float(abs_vals.max()),
                             violations=violations)
