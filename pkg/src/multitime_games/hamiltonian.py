"""Hamiltonian 1-forms, HJIU residuals and a Lax-Friedrichs marcher.

For a game the upper and lower Hamiltonians are

    H+_a(t, x, p) = min_v max_u { <p, X_a(t, x, u, v)> + L_a(t, x, u, v) }
    H-_a(t, x, p) = max_u min_v { ... }

over the discretized control sets; ``H- <= H+`` always. The value functions
should satisfy ``dV/dt^a + H_a(t, x, dV/dx) = 0`` for every axis, which
:func:`hjiu_residual` measures on solved grids and :func:`hj_march` solves
directly along a staircase, one axis per segment.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .expr import FieldExpr, as_field
from .gamespec import GameSpec, halton
from .lattice import IncreasingPath, Lattice, StateGrid
from .values import KINDS, ValueGrid, _minmax, solve_values

__all__ = [
    "HamiltonianForm",
    "eval_upper",
    "eval_lower",
    "GapReport",
    "isaacs_gap",
    "pde_residual",
    "hjiu_residual",
    "hj_march",
    "CrosscheckReport",
    "crosscheck_value_vs_hj",
    "MarchError",
]

_CHUNK = 1 << 21


class MarchError(ArithmeticError):
    pass


def _table(spec: GameSpec, alpha: int, t, x, p) -> np.ndarray:
    """``<p, X_a> + L_a`` over all control pairs, shape ``(..., Nu, Nv)``."""
    t = np.asarray(t, dtype=float)[..., None, None, :]
    x = np.asarray(x, dtype=float)[..., None, None, :]
    p = np.asarray(p, dtype=float)[..., None, None, :]
    u = spec.U_grid[:, None, :]
    v = spec.V_grid[None, :, :]
    X = spec.eval_X(alpha, t, x, u, v)
    return np.sum(p * X, axis=-1) + spec.eval_L(alpha, t, x, u, v)


def _induced(spec: GameSpec, alpha: int, t, x, p, kind: str) -> np.ndarray:
    t, x, p = (np.asarray(a, dtype=float) for a in (t, x, p))
    lead = np.broadcast_shapes(t.shape[:-1], x.shape[:-1], p.shape[:-1])
    pairs = len(spec.U_grid) * len(spec.V_grid) * max(spec.n, 1)
    total = math.prod(lead)
    if total * pairs <= _CHUNK or not lead:
        return _minmax(_table(spec, alpha, t, x, p), kind)
    t = np.broadcast_to(t, lead + t.shape[-1:]).reshape(-1, t.shape[-1])
    x = np.broadcast_to(x, lead + x.shape[-1:]).reshape(-1, x.shape[-1])
    p = np.broadcast_to(p, lead + p.shape[-1:]).reshape(-1, p.shape[-1])
    per = max(1, _CHUNK // pairs)
    out = np.concatenate([_minmax(_table(spec, alpha, t[i:i + per], x[i:i + per], p[i:i + per]), kind)
                          for i in range(0, total, per)])
    return out.reshape(lead)


def eval_upper(spec: GameSpec, t, x, p) -> np.ndarray:
    """``H+_a(t, x, p)`` for every axis; trailing axis of the result indexes ``a``."""
    return np.stack([_induced(spec, a, t, x, p, "upper") for a in range(spec.m)], axis=-1)


def eval_lower(spec: GameSpec, t, x, p) -> np.ndarray:
    """``H-_a(t, x, p)`` for every axis."""
    return np.stack([_induced(spec, a, t, x, p, "lower") for a in range(spec.m)], axis=-1)


class HamiltonianForm:
    """An evaluable 1-form ``H_a(t, x, p)``.

    ``components[a]`` is called as ``f(t, x, p)`` with broadcasting arrays and
    returns the leading shape. ``K`` holds Lipschitz constants in ``p``; they
    steer the marcher's dissipation and the affine representation.
    """

    def __init__(self, components: Sequence[Callable], n: int, K=None, provenance: str = "user",
                 T=None, state_box=None):
        self.components = tuple(components)
        self.m = len(self.components)
        self.n = int(n)
        self.provenance = provenance
        self.T = np.ones(self.m) if T is None else np.atleast_1d(np.asarray(T, dtype=float))
        if state_box is None:
            state_box = (-np.ones(self.n), np.ones(self.n))
        self.state_box = tuple(np.broadcast_to(np.asarray(b, dtype=float), (self.n,)).copy() for b in state_box)
        self._K = None if K is None else np.broadcast_to(np.asarray(K, dtype=float), (self.m,)).copy()

    @classmethod
    def induced(cls, spec: GameSpec, kind: str = "upper", samples: int = 512) -> "HamiltonianForm":
        """The upper (``min_v max_u``) or lower (``max_u min_v``) form of a game."""
        if kind not in KINDS:
            raise ValueError(f"kind must be 'lower' or 'upper', got {kind!r}")
        comps = [lambda t, x, p, a=a: _induced(spec, a, t, x, p, kind) for a in range(spec.m)]
        form = cls(comps, spec.n, provenance=f"induced-{kind}", T=spec.T, state_box=spec.state_box)
        form.spec = spec
        form._K = _sup_X(spec, samples)
        return form

    @classmethod
    def from_exprs(cls, trees, n: int, K=None, T=None, state_box=None) -> "HamiltonianForm":
        """Components given as expression trees over ``t``, ``x`` and ``p``."""
        m = len(trees)
        dims = {"t": m, "x": n, "p": n}
        exprs = [FieldExpr(tree, dims, f"hamiltonian[{a}]") for a, tree in enumerate(trees)]
        for a, e in enumerate(exprs):
            if e.size != 1:
                raise ValueError(f"hamiltonian[{a}] must be scalar, has size {e.size}")
        comps = [lambda t, x, p, e=e: e(t=t, x=x, p=p)[..., 0] for e in exprs]
        form = cls(comps, n, K=K, provenance="user", T=T, state_box=state_box)
        form.exprs = exprs
        return form

    def component(self, alpha: int, t, x, p) -> np.ndarray:
        t, x, p = (np.asarray(a, dtype=float) for a in (t, x, p))
        lead = np.broadcast_shapes(t.shape[:-1], x.shape[:-1], p.shape[:-1])
        return np.broadcast_to(np.asarray(self.components[alpha](t, x, p), dtype=float), lead)

    def __call__(self, t, x, p) -> np.ndarray:
        return np.stack([self.component(a, t, x, p) for a in range(self.m)], axis=-1)

    @property
    def K(self) -> np.ndarray:
        if self._K is None:
            self._K = self.estimate_K()
        return self._K

    def estimate_K(self, P: float = 2.0, samples: int = 2048, seed: int | None = None) -> np.ndarray:
        """Sampled Lipschitz constants in ``p`` over ``[0, T] x state_box x [-P, P]^n``."""
        m, n = self.m, self.n
        s = halton(m + 3 * n, samples, seed)
        t = s[:, :m] * self.T
        lo, hi = self.state_box
        x = lo + s[:, m:m + n] * (hi - lo)
        p1 = -P + 2 * P * s[:, m + n:m + 2 * n]
        p2 = -P + 2 * P * s[:, m + 2 * n:]
        # close pairs resolve kinks that far-apart pairs average out
        p3 = p1 + 1e-3 * (p2 - p1)
        K = np.zeros(m)
        for a in range(m):
            h1 = self.component(a, t, x, p1)
            for q in (p2, p3):
                dp = np.linalg.norm(p1 - q, axis=-1)
                ok = dp > 1e-14
                K[a] = max(K[a], float(np.max(np.abs(h1 - self.component(a, t, x, q))[ok] / dp[ok], initial=0.0)))
        return K


def _sup_X(spec: GameSpec, samples: int) -> np.ndarray:
    s = halton(spec.m + spec.n, samples)
    t = s[:, :spec.m] * spec.T
    lo, hi = spec.state_box
    x = lo + s[:, spec.m:] * (hi - lo)
    out = np.zeros(spec.m)
    u = spec.U_grid[:, None, :]
    v = spec.V_grid[None, :, :]
    for a in range(spec.m):
        X = spec.eval_X(a, t[:, None, None, :], x[:, None, None, :], u, v)
        out[a] = float(np.max(np.linalg.norm(X, axis=-1)))
    return out


@dataclass
class GapReport:
    max_gap: float
    min_gap: float
    alpha: int
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray


def isaacs_gap(spec: GameSpec, sample_count: int = 1024, P: float = 2.0, seed: int | None = None) -> GapReport:
    """Largest sampled ``H+_a - H-_a`` over ``[0, T] x state_box x [-P, P]^n``.

    Zero (up to rounding) means the Isaacs condition holds on the samples and
    the two value functions solve the same equations.
    """
    m, n = spec.m, spec.n
    s = halton(m + 2 * n, sample_count, seed)
    t = s[:, :m] * spec.T
    lo, hi = spec.state_box
    x = lo + s[:, m:m + n] * (hi - lo)
    p = -P + 2 * P * s[:, m + n:]
    gap = eval_upper(spec, t, x, p) - eval_lower(spec, t, x, p)
    k, a = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return GapReport(float(gap.max()), float(gap.min()), int(a), t[k], x[k], p[k])


def _state_gradient(state_grid: StateGrid, slice_nd: np.ndarray, pad_odd: bool):
    """Central differences (and second differences) in every state direction.

    With ``pad_odd`` the field is extended by odd reflection so boundary nodes
    get one-sided slopes; otherwise boundary nodes come back as NaN.
    """
    n = state_grid.n
    dx = state_grid.spacing
    if pad_odd:
        V = np.pad(slice_nd, 1, mode="reflect", reflect_type="odd")
    else:
        V = np.pad(slice_nd, 1, mode="constant", constant_values=np.nan)
    core = tuple(slice(1, -1) for _ in range(n))
    grads, second = [], []
    for i in range(n):
        up = list(core)
        dn = list(core)
        up[i] = slice(2, None)
        dn[i] = slice(None, -2)
        a, b = V[tuple(up)], V[tuple(dn)]
        grads.append((a - b) / (2 * dx[i]))
        second.append(a - 2 * slice_nd + b)
    return np.stack([g.reshape(-1) for g in grads], axis=-1), [s_.reshape(-1) for s_ in second]


def pde_residual(grid: ValueGrid, H: HamiltonianForm) -> ValueGrid:
    """Per-node ``max_a |D_t^a V + H_a(t, x, D_x V)|``.

    ``D_t^a`` is the forward lattice difference to ``node + e_a`` (used only
    where that node is stored) and ``D_x`` the central state difference. Nodes
    without a full stencil get NaN.
    """
    lat, sg = grid.lattice, grid.state_grid
    xs = sg.nodes()
    out = np.full(grid.values.shape, np.nan)
    for k, node in enumerate(grid.nodes):
        p, _ = _state_gradient(sg, grid.values[k].reshape(sg.shape), pad_odd=False)
        inner = np.all(np.isfinite(p), axis=-1)
        best = np.full(sg.size, np.nan)
        for a in range(lat.m):
            nb = node.copy()
            nb[a] += lat.spacing[a]
            if lat.spacing[a] <= 0 or not grid.has(nb):
                continue
            dt = (grid.slice(nb) - grid.values[k]) / lat.spacing[a]
            r = np.full(sg.size, np.nan)
            r[inner] = np.abs(dt[inner] + H.component(a, node, xs[inner], p[inner]))
            best = np.fmax(best, r)
        out[k] = best
    return ValueGrid(lat, sg, grid.nodes, out, grid.kind, path=grid.path, column="residual")


def hjiu_residual(grid: ValueGrid, spec: GameSpec, kind: str | None = None) -> ValueGrid:
    """Residual of the upper or lower HJIU system on a solved value grid."""
    return pde_residual(grid, HamiltonianForm.induced(spec, kind or grid.kind))


def _initial_slice(g, state_grid: StateGrid) -> np.ndarray:
    if isinstance(g, np.ndarray) and g.size == state_grid.size:
        return g.astype(float).reshape(-1).copy()
    field = as_field(g, {"x": state_grid.n}, 1, "g")
    return np.asarray(field(x=state_grid.nodes()), dtype=float)[:, 0].copy()


def hj_march(H: HamiltonianForm, g, lattice: Lattice, state_grid: StateGrid, path: IncreasingPath,
             direction: str = "backward", substeps: int | None = None, theta=None) -> ValueGrid:
    """Solve ``dV/dt^a + H_a(t, x, dV/dx) = 0`` along ``path`` with Lax-Friedrichs.

    ``direction="forward"`` starts from ``V = g`` at the path's first vertex
    (initial-value form); ``"backward"`` starts from ``V = g`` at the last
    vertex (terminal-value form). Each segment along axis ``a`` takes the
    update ``V -/+ dt H_a(t, x, D_x V) + dt sum_i theta_a / (2 dx_i) D2_i V``
    with ``theta_a = K_a`` and ``dt`` small enough for the CFL bound
    ``dt sum_i theta_a / dx_i <= 1``. An explicit ``substeps`` that violates
    the bound only warns. State boundaries use odd reflection.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    theta = H.K if theta is None else np.broadcast_to(np.asarray(theta, dtype=float), (H.m,))
    dx = state_grid.spacing
    xs = state_grid.nodes()
    lengths = path.segment_lengths()
    V = _initial_slice(g, state_grid)
    slices = {0 if direction == "forward" else path.n_segments: V.copy()}
    order = range(path.n_segments) if direction == "forward" else range(path.n_segments - 1, -1, -1)
    sign = 1.0 if direction == "forward" else -1.0
    for k in order:
        a = path.axes[k]
        h = lengths[k]
        cfl = h * float(np.sum(theta[a] / dx))
        nsub = max(1, math.ceil(cfl - 1e-12)) if substeps is None else int(substeps)
        if substeps is not None and cfl / nsub > 1 + 1e-12:
            warnings.warn(f"CFL bound violated on segment {k}: dt*sum(theta/dx) = {cfl / nsub:.3g}",
                          RuntimeWarning, stacklevel=2)
        dt = h / nsub
        start = path.vertices[k] if direction == "forward" else path.vertices[k + 1]
        e = np.zeros(path.m)
        e[a] = 1.0
        for j in range(nsub):
            t = start + sign * j * dt * e
            p, second = _state_gradient(state_grid, V.reshape(state_grid.shape), pad_odd=True)
            diss = sum(theta[a] / (2 * dx[i]) * second[i] for i in range(state_grid.n))
            V = V - sign * dt * H.component(a, t, xs, p) + dt * diss
            if not np.all(np.isfinite(V)):
                bad = int(np.flatnonzero(~np.isfinite(V))[0])
                raise MarchError(f"non-finite value on segment {k} at state {xs[bad].tolist()}")
        slices[k + 1 if direction == "forward" else k] = V.copy()
    values = np.array([slices[k] for k in range(path.n_segments + 1)])
    return ValueGrid(lattice, state_grid, path.vertices, values, "march", path=path)


@dataclass
class CrosscheckReport:
    max_discrepancy: float
    h: float
    trusted_nodes: int
    reach: float
    dpp: ValueGrid
    march: ValueGrid


def crosscheck_value_vs_hj(spec: GameSpec, lattice: Lattice, state_grid: StateGrid, path: IncreasingPath,
                           kind: str, margin: float | str = "auto", substeps: int | None = None,
                           workers: int = 1) -> CrosscheckReport:
    """Compare the recursion's value grid with the marched HJIU solution.

    Both start from ``g`` at ``T``. Values near the state boundary are
    distorted by clamping in one solver and reflection in the other, so the
    comparison is restricted to nodes farther than ``margin`` from every face.
    ``"auto"`` uses the domain-of-dependence distance ``sum_k K_{a_k} h_k``
    plus one state cell.
    """
    dpp = solve_values(spec, lattice, state_grid, path, kind, substeps=substeps, workers=workers)
    H = HamiltonianForm.induced(spec, kind)
    march = hj_march(H, spec.g, lattice, state_grid, path, direction="backward")
    if margin == "auto":
        reach = float(np.sum(H.K[list(path.axes)] * path.segment_lengths())) + float(np.max(state_grid.spacing))
    else:
        reach = float(margin)
    mask = state_grid.interior_mask(reach)
    if not mask.any():
        raise ValueError(f"no state node lies {reach:.3g} inside the grid; enlarge the grid or lower margin")
    diff = np.abs(dpp.values - march.values)[:, mask]
    h = float(np.max(lattice.spacing[list(path.axes)])) if path.n_segments else 0.0
    return CrosscheckReport(float(diff.max()), h, int(mask.sum()), reach, dpp, march)

