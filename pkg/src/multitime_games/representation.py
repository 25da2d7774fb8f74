"""Max-min representations of Lipschitz Hamiltonians as games.

Affine form: for ``||p|| <= P``

    H_a(t, x, p) = max_{v in B(0,P)} min_{u in B(0,1)} { K_a <u, p> + H_a(t, x, v) - K_a <u, v> }

which is ``max_v { H_a(v) - K_a ||p - v|| }`` in disguise. Homogeneous form:
with 2n-dimensional controls ``u = (u1, u2)``, ``v = (v1, v2)`` in unit balls,

    X_a = K_a u1 + C_a v2 + (L_a(u1, v1) - C_a) u2,   H_a(p) = max_v min_u <X_a, p>.

:func:`value_representation` turns the affine form into a game whose upper
value reproduces the solution of ``dM/dt^a + H_a(t, x, dM/dx) = 0``,
``M(0, x) = g(x)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._io import csv_text, fmt, write_atomic
from .gamespec import ControlSet, GameSpec, halton
from .hamiltonian import HamiltonianForm, _state_gradient
from .lattice import IncreasingPath, Lattice, MultitimeBox, StateGrid, canonical_path, reversed_image
from .values import solve_values

__all__ = [
    "RepresentationError",
    "AffineRepresentation",
    "HomogeneousRepresentation",
    "build_affine_rep",
    "build_homogeneous_rep",
    "Certificate",
    "certify_representation",
    "sample_points",
    "value_representation",
]

SAFETY = 1.1
HOMOGENEITY_TOL = 1e-6
_CHUNK = 1 << 22


class RepresentationError(ValueError):
    pass


def _support(grid: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``max_{w in grid} <w, p>`` for a batch of ``p``."""
    return np.max(p @ grid.T, axis=-1)


def _affine_maxmin(H: HamiltonianForm, alpha: int, K: float, Ugrid, Vgrid, t, x, p) -> np.ndarray:
    """``max_v min_u { K<u, p> + H(v) - K<u, v> }`` by full table, batch over samples."""
    S = p.shape[0]
    out = np.empty(S)
    per = max(1, _CHUNK // (len(Ugrid) * len(Vgrid)))
    for i in range(0, S, per):
        sl = slice(i, i + per)
        tb, xb, pb = t[sl], x[sl], p[sl]
        Hv = H.component(alpha, tb[:, None, :], xb[:, None, :], Vgrid[None, :, :])  # (s, Nv)
        w = pb[:, None, :] - Vgrid[None, :, :]                                      # (s, Nv, n)
        Q = Hv[:, :, None] + K * np.einsum("svn,un->svu", w, Ugrid)                 # (s, Nv, Nu)
        out[sl] = Q.min(-1).max(-1)
    return out


@dataclass
class AffineRepresentation:
    """Affine max-min representation valid on ``||p|| <= P``."""

    H: HamiltonianForm
    P: float
    K: np.ndarray
    U: ControlSet
    V: ControlSet

    @property
    def v_spacing(self) -> float:
        k = self.V.points_per_axis
        return 2 * self.P / (k - 1) if k > 1 else 2 * self.P

    def maxmin(self, t, x, p) -> np.ndarray:
        """Max-min over the discretized balls, shape ``(S, m)`` for ``S`` samples."""
        t, x, p = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (t, x, p))
        S = max(len(t), len(x), len(p))
        t, x, p = (np.broadcast_to(a, (S, a.shape[-1])) for a in (t, x, p))
        return np.stack([_affine_maxmin(self.H, a, self.K[a], self.U.grid, self.V.grid, t, x, p)
                         for a in range(self.H.m)], axis=-1)

    def in_region(self, p) -> np.ndarray:
        return np.linalg.norm(np.atleast_2d(p), axis=-1) <= self.P * (1 + 1e-12)

    def game(self, T=None, state_box=None, reverse: bool = False, substeps: int = 16) -> GameSpec:
        """The induced game. ``reverse`` gives the time-reversed form used for the value formula.

        Forward: ``X_a = K_a u``, ``L_a = H_a(t, x, v) - K_a <u, v>``.
        Reversed: ``X_a = -K_a u``, ``L_a = -(H_a(T - t, x, v) - K_a <u, v>)``.
        """
        H, m, n = self.H, self.H.m, self.H.n
        T = np.asarray(H.T if T is None else T, dtype=float)
        sign = -1.0 if reverse else 1.0

        def make(a):
            K = self.K[a]

            def X(t, x, u, v):
                return sign * K * np.broadcast_to(u, np.broadcast_shapes(np.shape(t)[:-1], np.shape(x)[:-1],
                                                                           np.shape(u)[:-1], np.shape(v)[:-1])
                                                  + (n,))

            def L(t, x, u, v):
                tt = T - t if reverse else t
                val = H.component(a, tt, x, v) - K * np.sum(u * v, axis=-1)
                return sign * val
            return X, L

        pairs = [make(a) for a in range(m)]
        return GameSpec(m=m, n=n, q=n, T=T, X=tuple(p[0] for p in pairs), L=tuple(p[1] for p in pairs),
                        g=["const", 0.0], U=self.U, V=self.V,
                        state_box=state_box if state_box is not None else H.state_box, substeps=substeps)


def build_affine_rep(H: HamiltonianForm, P: float = 2.0, points_per_axis: int = 33,
                     u_points_per_axis: int | None = None, K=None) -> AffineRepresentation:
    """Affine representation with ``U = B(0,1)``, ``V = B(0,P)`` in R^n.

    ``K`` defaults to the sampled Lipschitz constants of ``H`` in ``p`` times a
    10% safety margin; underestimating it breaks the identity.
    """
    if not P > 0:
        raise RepresentationError(f"radius P must be positive, got {P}")
    if K is None:
        K = SAFETY * H.estimate_K(P=P)
    K = np.broadcast_to(np.asarray(K, dtype=float), (H.m,)).copy()
    U = ControlSet.ball(H.n, 1.0, u_points_per_axis or points_per_axis)
    V = ControlSet.ball(H.n, float(P), points_per_axis)
    return AffineRepresentation(H, float(P), K, U, V)


@dataclass
class HomogeneousRepresentation:
    """Representation of a positively homogeneous ``H`` with 2n-dimensional controls."""

    H: HamiltonianForm
    K: np.ndarray
    C: np.ndarray
    ball: ControlSet

    @property
    def v_spacing(self) -> float:
        k = self.ball.points_per_axis
        return 2.0 / (k - 1) if k > 1 else 2.0

    @property
    def control_set(self) -> ControlSet:
        """``B(0,1) x B(0,1)`` as a finite set in R^{2n}."""
        g = self.ball.grid
        pts = np.concatenate([np.repeat(g, len(g), axis=0), np.tile(g, (len(g), 1))], axis=-1)
        return ControlSet.finite(pts)

    def _L(self, a, t, x, u1, v1):
        """``L_a(u1, v1) = H_a(v1) - K_a <u1, v1>``, shape ``(S, Nu1, Nv1)``."""
        Hv = self.H.component(a, t[:, None, :], x[:, None, :], v1[None, :, :])  # (S, Nv1)
        return Hv[:, None, :] - self.K[a] * (u1 @ v1.T)[None, :, :]

    def X(self, a, t, x, u, v) -> np.ndarray:
        """The vector field, for single ``(t, x)`` and control arrays ``(..., 2n)``."""
        n = self.H.n
        u1, u2 = u[..., :n], u[..., n:]
        v1, v2 = v[..., :n], v[..., n:]
        L = self.H.component(a, t, x, v1) - self.K[a] * np.sum(u1 * v1, axis=-1)
        return self.K[a] * u1 + self.C[a] * v2 + (L - self.C[a])[..., None] * u2

    def maxmin(self, t, x, p, method: str = "separable") -> np.ndarray:
        """Max-min of ``<X_a, p>``.

        ``"separable"`` uses ``max_{v1} min_{u1} { K<u1,p> + L s(p) }`` with ``s`` the
        support function of the discretized ball; ``"nested"`` runs the
        four-fold ``max_{v1} min_{u1} max_{v2} min_{u2}`` order literally;
        ``"joint"`` optimizes over the full 2n-dimensional product grids.
        """
        t, x, p = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (t, x, p))
        S = max(len(t), len(x), len(p))
        t, x, p = (np.broadcast_to(a, (S, a.shape[-1])) for a in (t, x, p))
        B = self.ball.grid
        out = np.empty((S, self.H.m))
        for a in range(self.H.m):
            if method == "joint":
                cs = self.control_set.grid
                for s in range(S):
                    Xv = self.X(a, t[s], x[s], cs[:, None, :], cs[None, :, :])   # (Nu, Nv, n)
                    out[s, a] = (Xv @ p[s]).min(0).max()
                continue
            L = self._L(a, t, x, B, B)                                            # (S, Nu1, Nv1)
            Ku = self.K[a] * (p @ B.T)                                            # (S, Nu1)
            if method == "separable":
                sp = _support(B, p)                                               # (S,)
                Q = Ku[:, :, None] + L * sp[:, None, None]
            elif method == "nested":
                Bp = p @ B.T                                                      # (S, Nb): <w, p>
                Q = np.empty(L.shape)
                for s_ in range(S):
                    # innermost min over u2 for every (u1, v1), then max over v2
                    min_u2 = ((L[s_] - self.C[a])[..., None] * Bp[s_]).min(-1)   # (Nu1, Nv1)
                    max_v2 = np.max(self.C[a] * Bp[s_][None, None, :] + min_u2[..., None], axis=-1)
                    Q[s_] = Ku[s_][:, None] + max_v2
            else:
                raise ValueError(f"unknown method {method!r}")
            out[:, a] = Q.min(1).max(-1)
        return out


def build_homogeneous_rep(H: HamiltonianForm, points_per_axis: int = 33, samples: int = 512,
                          seed: int | None = None, K=None) -> HomogeneousRepresentation:
    """Representation for ``H`` positively homogeneous in ``p``.

    Homogeneity is checked at ``lambda in {0, 0.5, 2}`` on Halton samples and
    violations above 1e-6 are rejected. ``C_a`` is the sampled bound on
    ``|L_a|`` plus a 10% margin (1.0 if the bound is zero).
    """
    m, n = H.m, H.n
    s = halton(m + 2 * n, samples, seed)
    t = s[:, :m] * H.T
    lo, hi = H.state_box
    x = lo + s[:, m:m + n] * (hi - lo)
    p = -2.0 + 4.0 * s[:, m + n:]
    worst, where = 0.0, None
    for a in range(m):
        base = H.component(a, t, x, p)
        for lam in (0.0, 0.5, 2.0):
            err = np.abs(H.component(a, t, x, lam * p) - lam * base)
            k = int(np.argmax(err))
            if err[k] > worst:
                worst, where = float(err[k]), (a, lam, t[k], x[k], p[k])
    if worst > HOMOGENEITY_TOL:
        a, lam, tk, xk, pk = where
        raise RepresentationError(
            f"H[{a}] is not positively homogeneous: |H(lambda p) - lambda H(p)| = {worst:.3g} "
            f"at lambda={lam}, t={tk.tolist()}, x={xk.tolist()}, p={pk.tolist()}")
    if K is None:
        K = SAFETY * H.estimate_K(P=1.0)
    K = np.broadcast_to(np.asarray(K, dtype=float), (m,)).copy()
    ball = ControlSet.ball(n, 1.0, points_per_axis)
    B = ball.grid
    C = np.zeros(m)
    for a in range(m):
        Hv = H.component(a, t[:, None, :], x[:, None, :], B[None, :, :])
        sup = float(np.max(np.abs(Hv[:, None, :] - K[a] * (B @ B.T)[None])))
        C[a] = SAFETY * sup if sup > 0 else 1.0
    return HomogeneousRepresentation(H, K, C, ball)


@dataclass
class Certificate:
    max_abs_error: float
    worst: tuple | None
    out_of_region_max_error: float
    out_of_region_count: int
    rows: list = field(repr=False, default_factory=list)
    header: list = field(repr=False, default_factory=list)

    def csv_text(self) -> str:
        return csv_text(self.header, self.rows)

    def to_csv(self, path) -> None:
        write_atomic(path, self.csv_text())


def sample_points(H: HamiltonianForm, count: int, P: float = 2.0, seed: int | None = None,
                  sphere: bool = False):
    """Halton samples ``(t, x, p)`` with ``p`` in ``[-P, P]^n`` (or on the sphere of radius ``P``)."""
    m, n = H.m, H.n
    s = halton(m + 2 * n, count, seed)
    t = s[:, :m] * H.T
    lo, hi = H.state_box
    x = lo + s[:, m:m + n] * (hi - lo)
    p = -P + 2 * P * s[:, m + n:]
    if sphere:
        if n == 1:
            p = np.where(p >= 0, P, -P)
        else:
            nrm = np.linalg.norm(p, axis=-1, keepdims=True)
            p = P * p / np.where(nrm > 0, nrm, 1.0)
    return t, x, p


def certify_representation(rep, samples, method: str = "nested") -> Certificate:
    """Compare the representation's max-min with direct evaluation of ``H``.

    ``samples`` is ``(t, x, p)`` with a leading sample axis. For the affine
    form, points with ``||p|| > P`` are reported separately and excluded from
    ``max_abs_error``. ``method`` picks the homogeneous max-min order; the
    default runs the four-fold nesting literally.
    """
    t, x, p = (np.atleast_2d(np.asarray(a, dtype=float)) for a in samples)
    H = rep.H
    direct = H(t, x, p)
    if isinstance(rep, HomogeneousRepresentation):
        approx = rep.maxmin(t, x, p, method=method)
        inside = np.ones(len(p), dtype=bool)
    else:
        approx = rep.maxmin(t, x, p)
        inside = rep.in_region(p)
    err = np.abs(direct - approx)
    per = err.max(axis=-1)
    max_in = float(per[inside].max()) if inside.any() else 0.0
    max_out = float(per[~inside].max()) if (~inside).any() else 0.0
    worst = None
    if inside.any():
        k = int(np.flatnonzero(inside)[np.argmax(per[inside])])
        worst = (t[k], x[k], p[k])
    m, n = H.m, H.n
    header = ([f"t^{i + 1}" for i in range(m)] + [f"x^{i + 1}" for i in range(n)]
              + [f"p^{i + 1}" for i in range(n)] + ["H_direct", "H_maxmin", "abs_error", "in_region"])
    rows = []
    for k in range(len(p)):
        for a in range(m):
            rows.append([fmt(v) for v in t[k]] + [fmt(v) for v in x[k]] + [fmt(v) for v in p[k]]
                        + [fmt(direct[k, a]), fmt(approx[k, a]), fmt(err[k, a]), str(bool(inside[k])).lower()])
    return Certificate(max_in, worst, max_out, int((~inside).sum()), rows, header)


def value_representation(H: HamiltonianForm, g, lattice: Lattice, state_grid: StateGrid, t, x0,
                         path: IncreasingPath | None = None, P: float = 2.0, points_per_axis: int = 9,
                         substeps: int = 2, rep: AffineRepresentation | None = None) -> float:
    """Value at ``(t, x0)`` of the HJ solution with ``M(0, x) = g`` through the game formula.

    The affine representation game is run with negated dynamics ``-K_a u`` and
    time-reversed running cost ``-L_a(T - s, ...)`` along the reversed image
    (``s -> T - s``) of a staircase from 0 to ``t``; its upper value at
    ``T - t`` is returned. ``path`` defaults to the canonical staircase to
    ``t``. A warning is issued if the solved gradient exceeds ``P``, where the
    representation is no longer exact.
    """
    t = np.asarray(t, dtype=float).reshape(lattice.m)
    T = lattice.box.hi
    if path is None:
        path = canonical_path(MultitimeBox(lattice.box.lo, t), lattice)
    if rep is None:
        rep = build_affine_rep(H, P, points_per_axis)
    spec = rep.game(T=T, state_box=(state_grid.lo, state_grid.hi), reverse=True, substeps=substeps)
    spec = spec.with_g(g)
    rpath = reversed_image(path, T)
    grid = solve_values(spec, lattice, state_grid, rpath, "upper")
    first = grid.values[0]
    if state_grid.size > 2:
        grads, _ = _state_gradient(state_grid, first.reshape(state_grid.shape), pad_odd=False)
        gmax = float(np.nanmax(np.linalg.norm(grads, axis=-1)))
        if gmax > P * (1 + 1e-9):
            warnings.warn(f"solved gradient norm {gmax:.3g} exceeds representation radius P={P}",
                          RuntimeWarning, stacklevel=2)
    return grid.value_at(rpath.start, x0)
