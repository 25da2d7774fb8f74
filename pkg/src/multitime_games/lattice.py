"""Multitime domain geometry.

Multitimes are points of R^m_+ with the product order. The game is played
along increasing curves in a box ``[lo, hi]``; here those curves are
axis-aligned staircases on a uniform lattice, and every grid computation in
the package iterates over the lattice defined in this module.

Axis indices are zero-based throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeError",
    "MultitimeBox",
    "IncreasingPath",
    "Lattice",
    "StateGrid",
    "path_length",
    "canonical_path",
    "enumerate_staircases",
    "suborder_points",
    "reversed_image",
]

_REL_TOL = 1e-9


class LatticeError(ValueError):
    """Raised for malformed multitime geometry or off-lattice points."""


def _as_point(coords, name="point") -> np.ndarray:
    arr = np.array(coords, dtype=float).reshape(-1)
    if arr.size == 0:
        raise LatticeError(f"{name} must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise LatticeError(f"{name} has non-finite coordinates: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MultitimeBox:
    """The parallelepiped ``[lo, hi]`` in R^m_+."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_point(self.lo, "lo")
        hi = _as_point(self.hi, "hi")
        if lo.shape != hi.shape:
            raise LatticeError(f"box corners differ in dimension: {lo.shape} vs {hi.shape}")
        if np.any(lo < 0):
            raise LatticeError(f"multitime coordinates must be nonnegative, got lo={lo}")
        if np.any(lo > hi):
            raise LatticeError(f"box requires lo <= hi componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_T(cls, T) -> "MultitimeBox":
        T = _as_point(T, "T")
        return cls(np.zeros_like(T), T)

    @property
    def m(self) -> int:
        return self.lo.size

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True, eq=False)
class IncreasingPath:
    """Monotone staircase curve through multitime.

    ``vertices`` has shape ``(k + 1, m)``; segment ``j`` runs from
    ``vertices[j]`` to ``vertices[j + 1]`` along axis ``axes[j]`` only.
    """

    vertices: np.ndarray
    axes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim == 1:
            verts = verts.reshape(1, -1)
        if verts.ndim != 2 or verts.shape[0] == 0:
            raise LatticeError("path needs a (k+1, m) vertex array")
        if np.any(verts < 0) or not np.all(np.isfinite(verts)):
            raise LatticeError("path vertices must be finite and nonnegative")
        diffs = np.diff(verts, axis=0)
        axes = []
        for j, d in enumerate(diffs):
            moving = np.flatnonzero(d != 0)
            if moving.size != 1 or d[moving[0]] < 0:
                raise LatticeError(
                    f"segment {j} must advance exactly one coordinate forward, got step {d}"
                )
            axes.append(int(moving[0]))
        if self.axes and tuple(int(a) for a in self.axes) != tuple(axes):
            raise LatticeError(f"declared axes {tuple(self.axes)} disagree with vertices {tuple(axes)}")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "axes", tuple(axes))

    @classmethod
    def from_axes(cls, start, axes, spacing) -> "IncreasingPath":
        """Build a unit-step staircase from ``start`` following ``axes``."""
        start = _as_point(start, "start")
        spacing = np.asarray(spacing, dtype=float)
        verts = [start.copy()]
        cur = start.copy()
        for a in axes:
            cur = cur.copy()
            cur[a] += spacing[a]
            verts.append(cur)
        return cls(np.array(verts), tuple(int(a) for a in axes))

    @property
    def m(self) -> int:
        return self.vertices.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def n_segments(self) -> int:
        return len(self.axes)

    def segment_lengths(self) -> np.ndarray:
        if not self.axes:
            return np.zeros(0)
        d = np.diff(self.vertices, axis=0)
        return d[np.arange(len(self.axes)), list(self.axes)]

    def __eq__(self, other):
        if not isinstance(other, IncreasingPath):
            return NotImplemented
        return self.axes == other.axes and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((self.axes, self.vertices.tobytes()))

    def __repr__(self):
        return f"IncreasingPath(start={self.start.tolist()}, axes={self.axes})"


@dataclass(frozen=True)
class Lattice:
    """Uniform lattice on a multitime box with ``steps[a]`` cells along axis ``a``."""

    box: MultitimeBox
    steps: tuple[int, ...]

    def __post_init__(self):
        steps = tuple(int(s) for s in np.atleast_1d(self.steps))
        if len(steps) != self.box.m:
            raise LatticeError(f"steps {steps} do not match box dimension {self.box.m}")
        if any(s <= 0 for s in steps):
            raise LatticeError(f"steps must be positive integers, got {steps}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def uniform(cls, T, steps) -> "Lattice":
        return cls(MultitimeBox.from_T(T), tuple(np.atleast_1d(steps)))

    @property
    def m(self) -> int:
        return self.box.m

    @property
    def spacing(self) -> np.ndarray:
        return self.box.extent / np.array(self.steps, dtype=float)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(s + 1 for s in self.steps)

    @property
    def node_count(self) -> int:
        return math.prod(self.shape)

    def point(self, index) -> np.ndarray:
        idx = np.asarray(index, dtype=float)
        return self.box.lo + idx * self.spacing

    def index_of(self, point) -> tuple[int, ...]:
        """Integer lattice index of ``point``; raises if it is not a node."""
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.m:
            raise LatticeError(f"point {p} has dimension {p.size}, lattice has {self.m}")
        sp = self.spacing
        idx = []
        for a in range(self.m):
            if sp[a] == 0.0:
                if abs(p[a] - self.box.lo[a]) > _REL_TOL:
                    raise LatticeError(f"point {p.tolist()} is not a lattice node")
                idx.append(0)
                continue
            r = (p[a] - self.box.lo[a]) / sp[a]
            k = round(r)
            if abs(r - k) > _REL_TOL * max(1.0, abs(r)) or k < 0 or k > self.steps[a]:
                raise LatticeError(f"point {p.tolist()} is not a lattice node")
            idx.append(int(k))
        return tuple(idx)

    def is_node(self, point) -> bool:
        try:
            self.index_of(point)
        except LatticeError:
            return False
        return True

    def nodes(self) -> np.ndarray:
        """All nodes, lexicographic index order, shape ``(node_count, m)``."""
        idx = np.array(list(itertools.product(*(range(s) for s in self.shape))), dtype=float)
        return self.box.lo + idx * self.spacing


@dataclass(frozen=True)
class StateGrid:
    """Tensor grid on the state box: ``points[i]`` nodes on ``[lo[i], hi[i]]``."""

    lo: np.ndarray
    hi: np.ndarray
    points: tuple[int, ...]

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        pts = tuple(int(k) for k in np.broadcast_to(np.atleast_1d(self.points), lo.shape))
        if lo.shape != hi.shape:
            raise LatticeError("state grid bounds differ in dimension")
        if np.any(lo >= hi):
            raise LatticeError(f"state grid needs lo < hi per axis, got {lo} and {hi}")
        if any(k < 2 for k in pts):
            raise LatticeError(f"state grid needs at least 2 points per axis, got {pts}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.points, dtype=float) - 1.0)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(self.lo[i], self.hi[i], self.points[i]) for i in range(self.n))

    def nodes(self) -> np.ndarray:
        """Nodes in lexicographic order (first coordinate major), shape ``(size, n)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=-1)

    def interior_mask(self, margin) -> np.ndarray:
        """Flat mask of nodes at least ``margin`` (a distance) inside every face."""
        x = self.nodes()
        tol = 1e-12 * np.maximum(1.0, np.abs(self.hi - self.lo))
        inside = (x >= self.lo + margin - tol) & (x <= self.hi - margin + tol)
        return np.all(inside, axis=-1)


def path_length(path: IncreasingPath) -> float:
    """Euclidean arc length of a staircase, the sum of its segment lengths."""
    return float(np.sum(path.segment_lengths()))


def canonical_path(box: MultitimeBox, lattice: Lattice) -> IncreasingPath:
    """Axis-major staircase from ``box.lo`` to ``box.hi`` in unit lattice steps.

    Axis 0 is advanced fully first, then axis 1, and so on.
    """
    i0 = np.array(lattice.index_of(box.lo))
    i1 = np.array(lattice.index_of(box.hi))
    axes = []
    for a in range(lattice.m):
        axes.extend([a] * int(i1[a] - i0[a]))
    return IncreasingPath.from_axes(lattice.point(i0), axes, lattice.spacing)


def _multiset_permutations(counts: list[int]):
    """Distinct arrangements of ``counts[a]`` copies of ``a``, in lexicographic order."""
    total = sum(counts)
    seq: list[int] = []

    def rec():
        if len(seq) == total:
            yield tuple(seq)
            return
        for a, c in enumerate(counts):
            if c:
                counts[a] -= 1
                seq.append(a)
                yield from rec()
                seq.pop()
                counts[a] += 1

    yield from rec()


def enumerate_staircases(box: MultitimeBox, lattice: Lattice, limit: int) -> list[IncreasingPath]:
    """Up to ``limit`` distinct unit-step staircases from ``box.lo`` to ``box.hi``.

    Paths come in lexicographic order of their axis sequences.
    """
    if limit <= 0:
        raise LatticeError("limit must be a positive integer")
    i0 = np.array(lattice.index_of(box.lo))
    i1 = np.array(lattice.index_of(box.hi))
    counts = [int(c) for c in i1 - i0]
    start = lattice.point(i0)
    return [
        IncreasingPath.from_axes(start, axes, lattice.spacing)
        for axes in itertools.islice(_multiset_permutations(counts), limit)
    ]


def suborder_points(lattice: Lattice, t) -> np.ndarray:
    """Lattice nodes ``s`` with ``t <= s <= T``, ordered for a backward sweep.

    Every node appears after all nodes that dominate it, so the first entry is
    ``T`` and the last is ``t``.
    """
    i0 = lattice.index_of(t)
    ranges = [range(lattice.steps[a], i0[a] - 1, -1) for a in range(lattice.m)]
    idx = np.array(list(itertools.product(*ranges)), dtype=float)
    return lattice.box.lo + idx * lattice.spacing


def reversed_image(path: IncreasingPath, T) -> IncreasingPath:
    """Image of ``path`` under ``s -> T - s``, traversed in increasing order."""
    T = np.asarray(T, dtype=float)
    verts = T - path.vertices[::-1]
    # clean tiny negatives produced by the subtraction
    verts = np.where(np.abs(verts) < 1e-12 * max(1.0, float(np.max(np.abs(T)))), 0.0, verts)
    return IncreasingPath(verts, tuple(reversed(path.axes)))
