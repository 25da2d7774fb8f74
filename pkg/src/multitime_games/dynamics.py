"""Controlled m-flow along staircase paths and the curvilinear payoff.

On a segment along axis ``a`` the flow reduces to the ODE
``dx/ds = X_a(s, x, u_a, v_a)`` with the cell's frozen controls. It is
advanced with classical RK4, and ``int L_a ds^a`` is taken by composite
Simpson on the same substep nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gamespec import ControlSet, GameSpec
from .lattice import IncreasingPath, Lattice

__all__ = [
    "IntegrationError",
    "ControlSignal",
    "Trajectory",
    "flow_cell",
    "integrate_flow",
    "curvilinear_integral",
    "payoff",
]


class IntegrationError(ArithmeticError):
    """Non-finite state or integrand; ``segment`` names the failing segment."""

    def __init__(self, message: str, segment: int | None = None):
        self.segment = segment
        super().__init__(message if segment is None else f"segment {segment}: {message}")


@dataclass(frozen=True)
class ControlSignal:
    """One control point per path segment, shape ``(n_segments, q)``."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, point, n_segments: int) -> "ControlSignal":
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(np.tile(p, (n_segments, 1)))

    @classmethod
    def from_cell_grid(cls, cell_grid, path: IncreasingPath, lattice: Lattice) -> "ControlSignal":
        """Read a grid-wide signal along ``path``.

        ``cell_grid[i_0, ..., i_{m-1}, a]`` is the control on the lattice edge
        leaving node ``i`` along axis ``a``.
        """
        cell_grid = np.asarray(cell_grid, dtype=float)
        rows = []
        for k, a in enumerate(path.axes):
            idx = lattice.index_of(path.vertices[k])
            rows.append(cell_grid[idx + (a,)])
        q = cell_grid.shape[-1] if cell_grid.ndim > lattice.m + 1 else 1
        return cls(np.array(rows).reshape(len(rows), q))

    def __len__(self):
        return self.values.shape[0]

    def check(self, control_set: ControlSet, name: str = "control") -> None:
        for k, row in enumerate(self.values):
            if not control_set.in_grid(row):
                raise ValueError(f"{name} on segment {k} is not a point of the control discretization: {row}")


@dataclass(frozen=True)
class Trajectory:
    """States at the vertices of ``path``; ``states[0]`` is the initial condition."""

    states: np.ndarray
    path: IncreasingPath

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def flow_cell(spec: GameSpec, axis: int, s0, length: float, x, u, v, substeps: int | None = None,
              with_cost: bool = True):
    """Advance ``x`` along one axis-``axis`` segment of ``length`` from multitime ``s0``.

    ``x`` (``(..., n)``), ``u`` and ``v`` (``(..., q)``) broadcast together, so a
    whole table of states and control pairs can be pushed through at once.
    Returns ``(x_end, cost)`` where ``cost`` is the Simpson value of
    ``int L_axis ds`` along the RK4 nodes (``None`` if ``with_cost`` is false).
    """
    N = spec.substeps if substeps is None else int(substeps)
    if N < 2 or N % 2:
        raise ValueError("substeps must be a positive even integer")
    s0 = np.asarray(s0, dtype=float)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    lead = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], v.shape[:-1])
    x = np.broadcast_to(x, lead + x.shape[-1:]).copy()
    if length == 0.0:
        return x, (np.zeros(lead) if with_cost else None)
    d = length / N
    e = np.zeros_like(s0)
    e[axis] = 1.0

    def f(sig, y):
        return spec.eval_X(axis, s0 + sig * e, y, u, v)

    def cost(sig, y):
        return np.broadcast_to(spec.eval_L(axis, s0 + sig * e, y, u, v), lead)

    acc = cost(0.0, x) if with_cost else None
    for k in range(N):
        sig = k * d
        k1 = f(sig, x)
        k2 = f(sig + d / 2, x + (d / 2) * k1)
        k3 = f(sig + d / 2, x + (d / 2) * k2)
        k4 = f(sig + d, x + d * k3)
        x = x + (d / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if with_cost:
            w = 1.0 if k == N - 1 else (4.0 if k % 2 == 0 else 2.0)
            acc = acc + w * cost(sig + d, x)
    if with_cost:
        acc = acc * (d / 3)
    return x, acc


def _check_signals(spec, path, u, v):
    if len(u) != path.n_segments or len(v) != path.n_segments:
        raise ValueError(
            f"signals cover {len(u)}/{len(v)} segments, path has {path.n_segments}"
        )
    u.check(spec.U, "u")
    v.check(spec.V, "v")


def integrate_flow(spec: GameSpec, path: IncreasingPath, u: ControlSignal, v: ControlSignal,
                   x0, substeps: int | None = None) -> Trajectory:
    """Solve the m-flow from ``x0`` along ``path`` with per-segment controls."""
    _check_signals(spec, path, u, v)
    x = np.asarray(x0, dtype=float).reshape(spec.n)
    states = [x.copy()]
    lengths = path.segment_lengths()
    for k, a in enumerate(path.axes):
        x, _ = flow_cell(spec, a, path.vertices[k], lengths[k], x, u.values[k], v.values[k],
                         substeps, with_cost=False)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("state became non-finite", k)
        states.append(x.copy())
    return Trajectory(np.array(states), path)


def curvilinear_integral(spec: GameSpec, traj: Trajectory, u: ControlSignal, v: ControlSignal,
                         substeps: int | None = None) -> float:
    """``sum_k int L_a ds^a`` over the segments of the trajectory's path."""
    path = traj.path
    _check_signals(spec, path, u, v)
    lengths = path.segment_lengths()
    total = 0.0
    for k, a in enumerate(path.axes):
        _, c = flow_cell(spec, a, path.vertices[k], lengths[k], traj.states[k], u.values[k],
                         v.values[k], substeps)
        if not np.isfinite(c):
            raise IntegrationError("running cost became non-finite", k)
        total += float(c)
    return total


def payoff(spec: GameSpec, path: IncreasingPath, u: ControlSignal, v: ControlSignal, x0,
           substeps: int | None = None) -> float:
    """Work of the running cost along ``path`` plus the terminal cost."""
    traj = integrate_flow(spec, path, u, v, x0, substeps)
    g = float(spec.eval_g(traj.final))
    if not np.isfinite(g):
        raise IntegrationError("terminal cost is non-finite")
    return curvilinear_integral(spec, traj, u, v, substeps) + g
