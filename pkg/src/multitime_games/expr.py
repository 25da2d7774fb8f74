"""Closed expression language for game fields.

Expressions are nested lists, e.g. ``["mul", ["const", 2.0], ["x", 0]]``, so a
game can be written down in a JSON/YAML document without code. Every node
evaluates to an array whose last axis is the node's vector size; leading axes
broadcast, which lets the solvers evaluate a field over whole state grids and
control tables in one call.

Variables: ``t`` (multitime), ``x`` (state), ``u`` and ``v`` (the controls of
the active axis), ``p`` (costate, used by user-supplied Hamiltonians).
``["x"]`` is the full vector and ``["x", i]`` its ``i``-th component.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping

import numpy as np

__all__ = [
    "ExprError",
    "FieldExpr",
    "FieldFunction",
    "register_primitive",
    "as_field",
    "VARIABLES",
]

VARIABLES = ("t", "x", "u", "v", "p")

_UNARY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
    "neg": np.negative,
}

_user_primitives: dict[str, Callable[[np.ndarray], np.ndarray]] = {}


class ExprError(ValueError):
    """Malformed expression; ``where`` is the document path of the bad node."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def register_primitive(name: str, fn: Callable[[np.ndarray], np.ndarray]) -> None:
    """Register an elementwise unary primitive usable as ``[name, expr]``."""
    if name in _UNARY or name in VARIABLES or name in _NARY_NAMES or name in _SPECIAL_NAMES:
        raise ExprError(f"cannot override built-in primitive {name!r}")
    _user_primitives[name] = fn


_NARY_NAMES = ("add", "sub", "mul", "max", "min")
_SPECIAL_NAMES = ("const", "dot", "norm", "lin", "vec", "idx", "sum")


def _check(node, dims: Mapping[str, int], where: str) -> int:
    """Validate ``node`` and return its output size."""
    if not isinstance(node, (list, tuple)) or not node or not isinstance(node[0], str):
        raise ExprError(f"expected [op, ...], got {node!r}", where)
    op, args = node[0], node[1:]
    if op == "const":
        if len(args) != 1:
            raise ExprError("const takes one value", where)
        val = np.atleast_1d(np.asarray(args[0], dtype=float))
        if val.ndim != 1 or not np.all(np.isfinite(val)):
            raise ExprError("const must be a finite scalar or flat list", where)
        return val.size
    if op in VARIABLES:
        if op not in dims:
            raise ExprError(f"variable {op!r} is not available here", where)
        size = dims[op]
        if not args:
            if size == 0:
                raise ExprError(f"variable {op!r} has dimension 0", where)
            return size
        if len(args) != 1 or not isinstance(args[0], int) or isinstance(args[0], bool):
            raise ExprError(f"{op} index must be a single integer", where)
        if not 0 <= args[0] < size:
            raise ExprError(f"{op} index {args[0]} out of range for dimension {size}", where)
        return 1
    if op in _UNARY or op in _user_primitives:
        if len(args) != 1:
            raise ExprError(f"{op} takes one argument", where)
        return _check(args[0], dims, f"{where}[1]")
    if op in _NARY_NAMES:
        if len(args) < 2 and op != "sub":
            raise ExprError(f"{op} takes at least two arguments", where)
        if op == "sub" and len(args) != 2:
            raise ExprError("sub takes exactly two arguments", where)
        sizes = [_check(a, dims, f"{where}[{k + 1}]") for k, a in enumerate(args)]
        big = {s for s in sizes if s != 1}
        if len(big) > 1:
            raise ExprError(f"{op} operands have incompatible sizes {sizes}", where)
        return big.pop() if big else 1
    if op == "dot":
        if len(args) != 2:
            raise ExprError("dot takes two arguments", where)
        a = _check(args[0], dims, f"{where}[1]")
        b = _check(args[1], dims, f"{where}[2]")
        if a != b:
            raise ExprError(f"dot operands have sizes {a} and {b}", where)
        return 1
    if op in ("norm", "sum"):
        if len(args) != 1:
            raise ExprError(f"{op} takes one argument", where)
        _check(args[0], dims, f"{where}[1]")
        return 1
    if op == "lin":
        if len(args) != 2:
            raise ExprError("lin takes a matrix and an argument", where)
        mat = np.asarray(args[0], dtype=float)
        if mat.ndim != 2 or not np.all(np.isfinite(mat)):
            raise ExprError("lin matrix must be a finite 2-d list", where)
        size = _check(args[1], dims, f"{where}[2]")
        if mat.shape[1] != size:
            raise ExprError(f"lin matrix has {mat.shape[1]} columns, argument has size {size}", where)
        return mat.shape[0]
    if op == "vec":
        if not args:
            raise ExprError("vec needs at least one argument", where)
        return sum(_check(a, dims, f"{where}[{k + 1}]") for k, a in enumerate(args))
    if op == "idx":
        if len(args) != 2 or not isinstance(args[1], int):
            raise ExprError("idx takes an expression and an integer", where)
        size = _check(args[0], dims, f"{where}[1]")
        if not 0 <= args[1] < size:
            raise ExprError(f"idx {args[1]} out of range for size {size}", where)
        return 1
    raise ExprError(f"unknown primitive {op!r}", where)


def _eval(node, env: Mapping[str, np.ndarray]) -> np.ndarray:
    op, args = node[0], node[1:]
    if op == "const":
        return np.atleast_1d(np.asarray(args[0], dtype=float))
    if op in VARIABLES:
        val = env[op]
        return val if not args else val[..., args[0] : args[0] + 1]
    if op in _UNARY:
        return _UNARY[op](_eval(args[0], env))
    if op in _user_primitives:
        return np.asarray(_user_primitives[op](_eval(args[0], env)), dtype=float)
    if op == "add":
        out = _eval(args[0], env)
        for a in args[1:]:
            out = out + _eval(a, env)
        return out
    if op == "sub":
        return _eval(args[0], env) - _eval(args[1], env)
    if op == "mul":
        out = _eval(args[0], env)
        for a in args[1:]:
            out = out * _eval(a, env)
        return out
    if op == "max":
        out = _eval(args[0], env)
        for a in args[1:]:
            out = np.maximum(out, _eval(a, env))
        return out
    if op == "min":
        out = _eval(args[0], env)
        for a in args[1:]:
            out = np.minimum(out, _eval(a, env))
        return out
    if op == "dot":
        a, b = _eval(args[0], env), _eval(args[1], env)
        return np.sum(a * b, axis=-1, keepdims=True)
    if op == "norm":
        return np.linalg.norm(_eval(args[0], env), axis=-1, keepdims=True)
    if op == "sum":
        return np.sum(_eval(args[0], env), axis=-1, keepdims=True)
    if op == "lin":
        mat = np.asarray(args[0], dtype=float)
        return _eval(args[1], env) @ mat.T
    if op == "vec":
        parts = [_eval(a, env) for a in args]
        shape = np.broadcast_shapes(*(p.shape[:-1] for p in parts))
        return np.concatenate([np.broadcast_to(p, shape + p.shape[-1:]) for p in parts], axis=-1)
    if op == "idx":
        return _eval(args[0], env)[..., args[1] : args[1] + 1]
    raise ExprError(f"unknown primitive {op!r}")  # pragma: no cover - rejected by _check


class FieldExpr:
    """A validated expression with a fixed output size.

    Call it with keyword arrays (``t=..., x=..., ...``); the result has shape
    ``broadcast(leading axes) + (size,)``.
    """

    def __init__(self, tree, dims: Mapping[str, int], where: str = ""):
        self.tree = _freeze(tree)
        self.dims = dict(dims)
        self.size = _check(self.tree, self.dims, where)

    def __call__(self, **env) -> np.ndarray:
        env = {k: np.asarray(v, dtype=float) for k, v in env.items() if v is not None}
        missing = _free_variables(self.tree) - env.keys()
        if missing:
            raise ExprError(f"missing variables {sorted(missing)}")
        out = _eval(self.tree, env)
        lead = np.broadcast_shapes(*(np.shape(v)[:-1] for v in env.values())) if env else ()
        return np.broadcast_to(out, lead + (self.size,)) if out.shape[:-1] != lead else out

    @property
    def is_zero(self) -> bool:
        return self.tree[0] == "const" and not np.any(np.asarray(self.tree[1], dtype=float))

    def to_list(self):
        return _thaw(self.tree)

    def __repr__(self):
        return f"FieldExpr({self.to_list()!r})"


class FieldFunction:
    """Adapter giving a plain Python callable the ``FieldExpr`` calling convention."""

    def __init__(self, fn: Callable[..., np.ndarray], size: int):
        self.fn = fn
        self.size = int(size)

    def __call__(self, **env) -> np.ndarray:
        out = np.asarray(self.fn(**env), dtype=float)
        if out.ndim == 0 or out.shape[-1] != self.size:
            out = out[..., None]
        return out

    is_zero = False


def as_field(obj, dims: Mapping[str, int], size: int | None = None, where: str = ""):
    """Coerce a tree, ``FieldExpr`` or callable into something field-callable."""
    if isinstance(obj, (FieldExpr, FieldFunction)):
        field = obj
    elif callable(obj):
        if size is None:
            raise ExprError("callable fields need an explicit output size", where)
        field = FieldFunction(obj, size)
    else:
        field = FieldExpr(obj, dims, where)
    if size is not None and field.size != size:
        raise ExprError(f"expected output dimension {size}, got {field.size}", where)
    return field


def _free_variables(node) -> set[str]:
    op = node[0]
    if op in VARIABLES:
        return {op}
    if op in ("const",):
        return set()
    out: set[str] = set()
    for a in node[1:]:
        if isinstance(a, tuple) and a and isinstance(a[0], str):
            out |= _free_variables(a)
    return out


def _freeze(node):
    if isinstance(node, (list, tuple)):
        return tuple(_freeze(a) for a in node)
    return node


def _thaw(node):
    if isinstance(node, tuple):
        return [_thaw(a) for a in node]
    return node
