"""Game declaration and validation of its structural hypotheses.

A :class:`GameSpec` bundles the dynamics 1-form ``X_a``, the running cost
1-form ``L_a``, the terminal cost ``g`` and the control sets of both teams.
The checks here are numerical: sup-norm and Lipschitz estimates on quasi-random
samples, and finite-difference residuals of the closedness and complete
integrability conditions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .expr import ExprError, as_field
from .lattice import Lattice, MultitimeBox, StateGrid

__all__ = [
    "SpecError",
    "FiniteDifferenceError",
    "ControlSet",
    "Bounds",
    "GameSpec",
    "BoundsReport",
    "validate_bounds",
    "check_closedness",
    "check_cic",
    "load_spec",
    "parse_spec",
    "halton",
]

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-4
DEFAULT_BOUND_SAMPLES = 4096


class SpecError(ValueError):
    """Schema problems in a game document; ``errors`` holds ``(path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{p}: {m}" if p else m for p, m in self.errors)
        super().__init__(lines)


class FiniteDifferenceError(ArithmeticError):
    pass


def halton(dim: int, count: int, seed: int | None = None) -> np.ndarray:
    """``count`` points of the Halton sequence in ``[0, 1)^dim``.

    Unscrambled (fully deterministic) unless a seed is given. Either way a
    larger ``count`` extends the smaller sample as a prefix.
    """
    if dim == 0:
        return np.zeros((count, 0))
    sampler = qmc.Halton(d=dim, scramble=seed is not None, seed=seed)
    return sampler.random(count)


@dataclass(frozen=True)
class ControlSet:
    """A per-axis control set in R^q and its finite discretization.

    ``kind`` is ``"ball"`` (centered at the origin), ``"box"`` or
    ``"finite-grid"``. For balls the grid is a uniform per-axis grid
    intersected with the ball, with the center and the ``+-radius`` axis points
    always included.
    """

    kind: str
    dim: int
    radius: float = 1.0
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    points_per_axis: int = 5
    points: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        kind = {"finite": "finite-grid", "grid": "finite-grid"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in ("ball", "box", "finite-grid"):
            raise ValueError(f"unknown control set kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("control dimension must be positive")
        if kind == "ball" and not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if kind == "box":
            if self.lo is None or self.hi is None:
                raise ValueError("box control set needs lo and hi")
            lo, hi = np.broadcast_to(self.lo, self.dim), np.broadcast_to(self.hi, self.dim)
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("box control set needs lo <= hi")
            object.__setattr__(self, "lo", tuple(float(a) for a in lo))
            object.__setattr__(self, "hi", tuple(float(a) for a in hi))
        if kind == "finite-grid":
            if not self.points:
                raise ValueError("finite-grid control set must list its points")
            pts = np.array(self.points, dtype=float).reshape(len(self.points), -1)
            if pts.shape[1] != self.dim:
                raise ValueError(f"finite-grid points have dimension {pts.shape[1]}, expected {self.dim}")
            object.__setattr__(self, "points", tuple(tuple(r) for r in pts.tolist()))
        elif self.points_per_axis < 1:
            raise ValueError("points_per_axis must be at least 1")

    @classmethod
    def finite(cls, points) -> "ControlSet":
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls("finite-grid", pts.shape[1], points=tuple(map(tuple, pts.tolist())))

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0, points_per_axis: int = 5) -> "ControlSet":
        return cls("ball", dim, radius=radius, points_per_axis=points_per_axis)

    @classmethod
    def box(cls, lo, hi, points_per_axis: int = 5) -> "ControlSet":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        return cls("box", lo.size, lo=tuple(lo), hi=tuple(np.broadcast_to(hi, lo.shape)),
                   points_per_axis=points_per_axis)

    @cached_property
    def grid(self) -> np.ndarray:
        """Discretized points, shape ``(K, dim)``, in a fixed deterministic order."""
        if self.kind == "finite-grid":
            return np.array(self.points, dtype=float)
        k = self.points_per_axis
        if self.kind == "box":
            axes = [np.linspace(a, b, k) if k > 1 else np.array([(a + b) / 2])
                    for a, b in zip(self.lo, self.hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            return np.stack([g.reshape(-1) for g in mesh], axis=-1)
        r = self.radius
        ax = np.linspace(-r, r, k) if k > 1 else np.zeros(1)
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        pts = pts[np.linalg.norm(pts, axis=-1) <= r * (1 + 1e-12)]
        extras = [np.zeros(self.dim)]
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = r
            extras += [e, -e]
        # the cube's outer shell pushed radially onto the sphere, so the support
        # function is resolved in every direction and not only along the axes
        shell = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        shell = shell[np.isclose(np.max(np.abs(shell), axis=-1), r)] if k > 1 else shell[:0]
        shell = r * shell / np.linalg.norm(shell, axis=-1, keepdims=True)
        pts = np.unique(np.round(np.vstack([pts, np.array(extras), shell]), 15), axis=0)
        pts.setflags(write=False)
        return pts

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        if self.kind == "ball":
            return bool(np.linalg.norm(p) <= self.radius * (1 + tol) + tol)
        if self.kind == "box":
            return bool(np.all(p >= np.array(self.lo) - tol) and np.all(p <= np.array(self.hi) + tol))
        return bool(np.any(np.all(np.abs(self.grid - p) <= tol, axis=-1)))

    def in_grid(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        return bool(np.any(np.all(np.abs(self.grid - p) <= tol * max(1.0, float(np.max(np.abs(p)))), axis=-1)))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "ball":
            out.update(radius=self.radius, points=self.points_per_axis)
        elif self.kind == "box":
            out.update(lo=list(self.lo), hi=list(self.hi), points=self.points_per_axis)
        else:
            out["points"] = [list(p) for p in self.points]
        return out


@dataclass(frozen=True)
class Bounds:
    """Constants with ``|X_a| <= A[a]``, ``|g| <= B``, ``|L_a| <= C[a]`` (and Lipschitz)."""

    A: np.ndarray
    B: float
    C: np.ndarray
    estimated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_1d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "C", np.atleast_1d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "B", float(self.B))


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A two-team multitime game.

    ``X[a]`` maps ``(t, x, u, v)`` to R^n, ``L[a]`` to R, ``g`` maps ``x`` to R;
    ``u`` and ``v`` are the controls of axis ``a``, each in R^q. Fields may be
    expression trees, :class:`~multitime_games.expr.FieldExpr` objects or
    callables taking keyword arrays.
    """

    m: int
    n: int
    q: int
    T: np.ndarray
    X: tuple
    L: tuple
    g: object
    U: ControlSet
    V: ControlSet
    bounds: Bounds | None = None
    state_box: tuple[np.ndarray, np.ndarray] | None = None
    lattice_steps: tuple[int, ...] | None = None
    state_grid: StateGrid | None = None
    substeps: int = 16
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        errors = []
        T = np.atleast_1d(np.asarray(self.T, dtype=float))
        if T.size != self.m:
            errors.append(("T", f"expected {self.m} entries, got {T.size}"))
        if np.any(T < 0):
            errors.append(("T", "multitime horizon must be nonnegative"))
        object.__setattr__(self, "T", T)
        dims = {"t": self.m, "x": self.n, "u": self.q, "v": self.q}
        if len(self.X) != self.m:
            errors.append(("X", f"expected {self.m} vector fields, got {len(self.X)}"))
        if len(self.L) != self.m:
            errors.append(("L", f"expected {self.m} cost components, got {len(self.L)}"))
        Xf, Lf = [], []
        for a, e in enumerate(self.X):
            try:
                Xf.append(as_field(e, dims, self.n, f"X[{a}]"))
            except ExprError as exc:
                errors.append((exc.where or f"X[{a}]", str(exc).split(": ", 1)[-1]))
        for a, e in enumerate(self.L):
            try:
                Lf.append(as_field(e, dims, 1, f"L[{a}]"))
            except ExprError as exc:
                errors.append((exc.where or f"L[{a}]", str(exc).split(": ", 1)[-1]))
        try:
            gf = as_field(self.g, {"x": self.n}, 1, "g")
        except ExprError as exc:
            errors.append((exc.where or "g", str(exc).split(": ", 1)[-1]))
            gf = None
        for name, cs in (("U", self.U), ("V", self.V)):
            if cs.dim != self.q:
                errors.append((name, f"control dimension {cs.dim} differs from q={self.q}"))
        if self.bounds is not None:
            for name, val in (("A", self.bounds.A), ("C", self.bounds.C)):
                if val.size != self.m:
                    errors.append((f"bounds.{name}", f"expected {self.m} entries"))
            if not self.bounds.estimated:
                vals = np.concatenate([self.bounds.A, [self.bounds.B], self.bounds.C])
                if np.any(vals <= 0):
                    errors.append(("bounds", "declared bounds must be positive"))
        if self.substeps < 2 or self.substeps % 2:
            errors.append(("substeps", "substeps must be a positive even integer"))
        if errors:
            raise SpecError(errors)
        object.__setattr__(self, "X", tuple(Xf))
        object.__setattr__(self, "L", tuple(Lf))
        object.__setattr__(self, "g", gf)
        if self.state_box is None:
            box = (-np.ones(self.n), np.ones(self.n))
        else:
            box = (np.asarray(self.state_box[0], dtype=float).reshape(self.n),
                   np.asarray(self.state_box[1], dtype=float).reshape(self.n))
        object.__setattr__(self, "state_box", box)

    # evaluation helpers, all broadcasting over leading axes

    def eval_X(self, alpha: int, t, x, u, v) -> np.ndarray:
        return self.X[alpha](t=t, x=x, u=u, v=v)

    def eval_L(self, alpha: int, t, x, u, v) -> np.ndarray:
        return self.L[alpha](t=t, x=x, u=u, v=v)[..., 0]

    def eval_g(self, x) -> np.ndarray:
        return self.g(x=x)[..., 0]

    @property
    def U_grid(self) -> np.ndarray:
        return self.U.grid

    @property
    def V_grid(self) -> np.ndarray:
        return self.V.grid

    @property
    def box(self) -> MultitimeBox:
        return MultitimeBox.from_T(self.T)

    def lattice(self, steps=None) -> Lattice:
        steps = steps if steps is not None else self.lattice_steps
        if steps is None:
            raise ValueError("no lattice steps given and the spec declares none")
        return Lattice(self.box, tuple(np.broadcast_to(np.atleast_1d(steps), (self.m,))))

    def with_bounds(self, bounds: Bounds) -> "GameSpec":
        return _replace(self, bounds=bounds)

    def with_g(self, g) -> "GameSpec":
        return _replace(self, g=g)


def _replace(spec: GameSpec, **changes) -> GameSpec:
    kw = dict(m=spec.m, n=spec.n, q=spec.q, T=spec.T, X=spec.X, L=spec.L, g=spec.g,
              U=spec.U, V=spec.V, bounds=spec.bounds, state_box=spec.state_box,
              lattice_steps=spec.lattice_steps, state_grid=spec.state_grid,
              substeps=spec.substeps, extra=spec.extra)
    kw.update(changes)
    return GameSpec(**kw)


@dataclass
class BoundsReport:
    A_est: np.ndarray
    B_est: float
    C_est: np.ndarray
    sup_X: np.ndarray
    lip_X: np.ndarray
    sup_g: float
    lip_g: float
    sup_L: np.ndarray
    lip_L: np.ndarray
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_domain(spec: GameSpec, count: int, seed: int | None):
    """Quasi-random samples of (t, x, x', u index, v index)."""
    m, n = spec.m, spec.n
    s = halton(m + 2 * n + 2, count, seed)
    t = s[:, :m] * spec.T
    lo, hi = spec.state_box
    x1 = lo + s[:, m : m + n] * (hi - lo)
    x2 = lo + s[:, m + n : m + 2 * n] * (hi - lo)
    nu, nv = len(spec.U_grid), len(spec.V_grid)
    iu = np.minimum((s[:, -2] * nu).astype(int), nu - 1)
    iv = np.minimum((s[:, -1] * nv).astype(int), nv - 1)
    return t, x1, x2, spec.U_grid[iu], spec.V_grid[iv]


def _lipschitz(f1, f2, x1, x2) -> np.ndarray:
    dx = np.linalg.norm(x1 - x2, axis=-1)
    df = np.abs(f1 - f2) if f1.ndim == 1 else np.linalg.norm(f1 - f2, axis=-1)
    ok = dx > 1e-12
    return np.where(ok, df / np.where(ok, dx, 1.0), 0.0)


def validate_bounds(spec: GameSpec, sample_count: int = DEFAULT_BOUND_SAMPLES,
                    seed: int | None = None, bound_tol: float = 1e-9) -> BoundsReport:
    """Estimate the bound and Lipschitz constants of ``X``, ``L`` and ``g``.

    Samples are a Halton sequence over ``[0, T] x state_box x U x V``, so the
    estimates never decrease as ``sample_count`` grows. Each estimate is the
    larger of the sampled sup-norm and the sampled Lipschitz quotient in
    ``x``, matching the single constant the hypotheses use for both. Samples
    exceeding declared bounds are listed in ``violations``.
    """
    if sample_count <= 0:
        raise ValueError("sample_count must be positive")
    t, x1, x2, u, v = _sample_domain(spec, sample_count, seed)
    m = spec.m
    sup_X, lip_X, sup_L, lip_L = (np.zeros(m) for _ in range(4))
    violations = []
    declared = spec.bounds if spec.bounds is not None and not spec.bounds.estimated else None
    for a in range(m):
        X1 = spec.eval_X(a, t, x1, u, v)
        X2 = spec.eval_X(a, t, x2, u, v)
        L1 = spec.eval_L(a, t, x1, u, v)
        L2 = spec.eval_L(a, t, x2, u, v)
        nX = np.linalg.norm(X1, axis=-1)
        qX = _lipschitz(X1, X2, x1, x2)
        qL = _lipschitz(L1, L2, x1, x2)
        sup_X[a], lip_X[a] = nX.max(), qX.max()
        sup_L[a], lip_L[a] = np.abs(L1).max(), qL.max()
        if declared is not None:
            for name, vals, bound in (("|X|", nX, declared.A[a]), ("lip X", qX, declared.A[a]),
                                      ("|L|", np.abs(L1), declared.C[a]), ("lip L", qL, declared.C[a])):
                k = int(np.argmax(vals))
                if vals[k] > bound * (1 + bound_tol) + bound_tol:
                    violations.append(dict(quantity=name, alpha=a, value=float(vals[k]), bound=float(bound),
                                           t=t[k].tolist(), x=x1[k].tolist()))
    g1, g2 = spec.eval_g(x1), spec.eval_g(x2)
    qg = _lipschitz(g1, g2, x1, x2)
    sup_g, lip_g = float(np.abs(g1).max()), float(qg.max())
    if declared is not None:
        for name, vals in (("|g|", np.abs(g1)), ("lip g", qg)):
            k = int(np.argmax(vals))
            if vals[k] > declared.B * (1 + bound_tol) + bound_tol:
                violations.append(dict(quantity=name, alpha=None, value=float(vals[k]), bound=declared.B,
                                       t=None, x=x1[k].tolist()))
    return BoundsReport(
        A_est=np.maximum(sup_X, lip_X), B_est=max(sup_g, lip_g), C_est=np.maximum(sup_L, lip_L),
        sup_X=sup_X, lip_X=lip_X, sup_g=sup_g, lip_g=lip_g, sup_L=sup_L, lip_L=lip_L,
        violations=violations,
    )


def _fd_step(step: float, *arrays) -> float:
    scale = max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])
    h = step * scale
    if not (np.isfinite(h) and h > 0) or scale + h == scale:
        raise FiniteDifferenceError(f"finite-difference step {step} underflows at scale {scale}")
    return h


def _controls(spec: GameSpec, u, v):
    u = np.broadcast_to(np.asarray(u, dtype=float), (spec.m, spec.q))
    v = np.broadcast_to(np.asarray(v, dtype=float), (spec.m, spec.q))
    return u, v


def check_closedness(spec: GameSpec, t, x, u, v, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Antisymmetric ``(m, m)`` residual ``D_b L_a - D_a L_b`` at one point.

    ``u`` and ``v`` hold the frozen control of every axis, shape ``(m, q)``.
    ``D_b`` is the total derivative along the flow of axis ``b``, taken by a
    central difference of ``L_a`` along the linearized flow line (the
    curvature terms cancel in the symmetric stencil, so this is second order).
    """
    t = np.asarray(t, dtype=float).reshape(spec.m)
    x = np.asarray(x, dtype=float).reshape(spec.n)
    u, v = _controls(spec, u, v)
    h = _fd_step(step, t, x)

    def total_derivative(a, b):
        Xb = spec.eval_X(b, t, x, u[b], v[b])
        e = np.zeros(spec.m)
        e[b] = h
        plus = spec.eval_L(a, t + e, x + h * Xb, u[a], v[a])
        minus = spec.eval_L(a, t - e, x - h * Xb, u[a], v[a])
        return float((plus - minus) / (2 * h))

    r = np.zeros((spec.m, spec.m))
    for a in range(spec.m):
        for b in range(a + 1, spec.m):
            r[a, b] = total_derivative(a, b) - total_derivative(b, a)
            r[b, a] = -r[a, b]
    return r


def _jacobian(f, z, h):
    """Central-difference Jacobian of ``f`` at ``z``; columns are ``d f / d z_j``."""
    cols = []
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        cols.append((f(z + e) - f(z - e)) / (2 * h))
    return np.stack(cols, axis=-1) if cols else np.zeros((0, 0))


def check_cic(spec: GameSpec, t, x, u, v, du=None, dv=None, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Residual of the complete integrability conditions, shape ``(m, m, n)``.

    Entry ``[a, b]`` is the control-derivative side minus
    ``[X_a, X_b] + dX_b/ds^a - dX_a/ds^b`` with the bracket
    ``[X, Y] = (DY) X - (DX) Y``. ``du[l, k, c]`` is ``d u_l^k / d s^c``
    (shape ``(m, q, m)``); it defaults to zero, the piecewise-constant case.
    """
    t = np.asarray(t, dtype=float).reshape(spec.m)
    x = np.asarray(x, dtype=float).reshape(spec.n)
    u, v = _controls(spec, u, v)
    du = np.zeros((spec.m, spec.q, spec.m)) if du is None else np.asarray(du, dtype=float)
    dv = np.zeros((spec.m, spec.q, spec.m)) if dv is None else np.asarray(dv, dtype=float)
    h = _fd_step(step, t, x, u, v)

    X = [spec.eval_X(a, t, x, u[a], v[a]) for a in range(spec.m)]
    Jx = [_jacobian(lambda z, a=a: spec.eval_X(a, t, z, u[a], v[a]), x, h) for a in range(spec.m)]
    Jt = [_jacobian(lambda s, a=a: spec.eval_X(a, s, x, u[a], v[a]), t, h) for a in range(spec.m)]
    need_u, need_v = np.any(du), np.any(dv)
    Ju = [_jacobian(lambda w, a=a: spec.eval_X(a, t, x, w, v[a]), u[a].copy(), h) if need_u else None
          for a in range(spec.m)]
    Jv = [_jacobian(lambda w, a=a: spec.eval_X(a, t, x, u[a], w), v[a].copy(), h) if need_v else None
          for a in range(spec.m)]

    r = np.zeros((spec.m, spec.m, spec.n))
    for a in range(spec.m):
        for b in range(a + 1, spec.m):
            bracket = Jx[b] @ X[a] - Jx[a] @ X[b]
            rhs = bracket + Jt[b][:, a] - Jt[a][:, b]
            lhs = np.zeros(spec.n)
            if need_u:
                lhs += Ju[a] @ du[a, :, b] - Ju[b] @ du[b, :, a]
            if need_v:
                lhs += Jv[a] @ dv[a, :, b] - Jv[b] @ dv[b, :, a]
            r[a, b] = lhs - rhs
            r[b, a] = -r[a, b]
    return r


# ---------------------------------------------------------------------------
# documents

def _control_from_doc(doc, where, errors):
    if not isinstance(doc, dict):
        errors.append((where, "control set must be a mapping"))
        return None
    try:
        kind = doc.get("kind", "ball")
        dim = int(doc.get("dim", 1))
        if kind in ("finite", "finite-grid", "grid"):
            pts = np.array(doc["points"], dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            return ControlSet("finite-grid", dim if "dim" in doc else pts.shape[1],
                              points=tuple(map(tuple, pts.tolist())))
        k = int(doc.get("points", doc.get("discretization", 5)))
        if kind == "box":
            return ControlSet("box", dim, lo=tuple(np.broadcast_to(doc["lo"], dim)),
                              hi=tuple(np.broadcast_to(doc["hi"], dim)), points_per_axis=k)
        return ControlSet(kind, dim, radius=float(doc.get("radius", 1.0)), points_per_axis=k)
    except (KeyError, TypeError, ValueError) as exc:
        errors.append((where, str(exc)))
        return None


def parse_spec(doc: dict, estimate_samples: int = DEFAULT_BOUND_SAMPLES) -> GameSpec:
    """Build a validated :class:`GameSpec` from a parsed document.

    Missing ``bounds`` are estimated with :func:`validate_bounds`. All schema
    problems are collected and raised together as a :class:`SpecError`.
    """
    errors = []
    if not isinstance(doc, dict):
        raise SpecError([("", "document must be a mapping")])
    for key in ("m", "n", "X", "L", "g"):
        if key not in doc:
            errors.append((key, "required key missing"))
    if errors:
        raise SpecError(errors)
    m, n = int(doc["m"]), int(doc["n"])
    if m <= 0 or n <= 0:
        raise SpecError([("m" if m <= 0 else "n", "must be a positive integer")])
    T = doc.get("T", [1.0] * m)
    U = _control_from_doc(doc.get("U", {"kind": "finite-grid", "points": [[0.0]]}), "U", errors)
    V = _control_from_doc(doc.get("V", {"kind": "finite-grid", "points": [[0.0]]}), "V", errors)
    q = int(doc.get("q", U.dim if U is not None else 1))
    bounds = None
    if "bounds" in doc:
        b = doc["bounds"]
        try:
            bounds = Bounds(np.broadcast_to(b["A"], m), float(b["B"]), np.broadcast_to(b["C"], m))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(("bounds", f"expected A, B, C entries ({exc})"))
    state_box = None
    if "state_box" in doc:
        sb = doc["state_box"]
        try:
            state_box = (np.broadcast_to(np.asarray(sb["lo"], dtype=float), n).copy(),
                         np.broadcast_to(np.asarray(sb["hi"], dtype=float), n).copy())
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(("state_box", str(exc)))
    lattice_steps = None
    if "lattice" in doc:
        try:
            lattice_steps = tuple(int(s) for s in np.broadcast_to(doc["lattice"]["steps"], m))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(("lattice.steps", str(exc)))
    state_grid = None
    if "state_grid" in doc:
        sg = doc["state_grid"]
        try:
            state_grid = StateGrid(np.broadcast_to(sg["lo"], n), np.broadcast_to(sg["hi"], n),
                                   tuple(np.broadcast_to(sg["points"], n)))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(("state_grid", str(exc)))
    if state_box is None and state_grid is not None:
        state_box = (state_grid.lo.copy(), state_grid.hi.copy())
    if errors or U is None or V is None:
        raise SpecError(errors)
    X, L = doc["X"], doc["L"]
    if not isinstance(X, list) or not isinstance(L, list):
        raise SpecError([("X" if not isinstance(X, list) else "L", "must be a list of expressions")])
    extra = {k: v for k, v in doc.items() if k not in
             ("m", "n", "q", "T", "X", "L", "g", "U", "V", "bounds", "state_box", "lattice",
              "state_grid", "substeps")}
    spec = GameSpec(m=m, n=n, q=q, T=T, X=tuple(X), L=tuple(L), g=doc["g"], U=U, V=V,
                    bounds=bounds, state_box=state_box, lattice_steps=lattice_steps,
                    state_grid=state_grid, substeps=int(doc.get("substeps", 16)), extra=extra)
    if bounds is None:
        rep = validate_bounds(spec, estimate_samples)
        logger.info("bounds estimated from %d samples", estimate_samples)
        spec = spec.with_bounds(Bounds(rep.A_est, rep.B_est, rep.C_est, estimated=True))
    return spec


def load_spec(source, estimate_samples: int = DEFAULT_BOUND_SAMPLES) -> GameSpec:
    """Load a game document from a path (``.json``/``.yaml``/``.yml``), text or mapping."""
    if isinstance(source, dict):
        return parse_spec(source, estimate_samples)
    path = Path(source) if not isinstance(source, str) or "\n" not in source else None
    if path is not None and path.suffix.lower() in (".json", ".yaml", ".yml"):
        text = path.read_text()
        is_json = path.suffix.lower() == ".json"
    else:
        text = str(source)
        is_json = text.lstrip().startswith("{")
    if is_json:
        doc = json.loads(text)
    else:
        import yaml

        doc = yaml.safe_load(text)
    return parse_spec(doc, estimate_samples)
