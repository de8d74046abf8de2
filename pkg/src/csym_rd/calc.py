"""Second-order Taylor arithmetic over the four variables (t, x, u, v).

A :class:`Taylor` number carries a value, its gradient and the upper triangle
of its Hessian.  Every primitive propagates all three exactly, so evaluating an
expression tree on seeded variables yields machine-precision first and second
partial derivatives without symbolic manipulation.  All arrays carry an
arbitrary leading batch shape, which lets a single call evaluate a field at
many sample points.

Expression trees (:class:`Expr`) are built with ordinary Python operators and
the helpers :func:`exp`, :func:`log`, :func:`sin`, :func:`cos`, :func:`sqrt`.
The same tree evaluates either on plain floats/arrays (values only) or on
:class:`Taylor` numbers (values and derivatives).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, UnsupportedOrder

VARIABLES = ("t", "x", "u", "v")
_INDEX = {name: i for i, name in enumerate(VARIABLES)}

# upper-triangle storage of the symmetric Hessian
_PAIRS = [(i, j) for i in range(4) for j in range(i, 4)]
_I = np.array([p[0] for p in _PAIRS])
_J = np.array([p[1] for p in _PAIRS])
_PAIR_INDEX = np.zeros((4, 4), dtype=int)
for _k, (_a, _b) in enumerate(_PAIRS):
    _PAIR_INDEX[_a, _b] = _k
    _PAIR_INDEX[_b, _a] = _k

TINY = 1e-300


def _arr(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


class Taylor:
    """Truncated second-order Taylor number.

    Parameters
    ----------
    val : array_like
        Value, batch shape ``S``.
    grad : array_like
        Gradient with shape ``S + (4,)`` ordered as (t, x, u, v).
    hess : array_like or None
        Upper triangle of the Hessian, shape ``S + (10,)``.  ``None`` marks a
        first-order-only number.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = _arr(val)
        self.grad = _arr(grad)
        self.hess = None if hess is None else _arr(hess)

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "Taylor":
        c = _arr(c)
        return cls(c, np.zeros(c.shape + (4,)), np.zeros(c.shape + (10,)))

    @classmethod
    def variable(cls, name: str, value) -> "Taylor":
        value = _arr(value)
        grad = np.zeros(value.shape + (4,))
        grad[..., _INDEX[name]] = 1.0
        return cls(value, grad, np.zeros(value.shape + (10,)))

    # -- accessors ----------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.val

    @property
    def gradient(self) -> np.ndarray:
        return self.grad

    @property
    def hessian(self) -> np.ndarray | None:
        """Full symmetric 4x4 Hessian, built from the stored upper triangle."""
        if self.hess is None:
            return None
        return self.hess[..., _PAIR_INDEX]

    def d(self, *names: str) -> np.ndarray:
        """Partial derivative by variable names, e.g. ``d("u")`` or ``d("x", "u")``."""
        if len(names) == 0:
            return self.val
        if len(names) == 1:
            return self.grad[..., _INDEX[names[0]]]
        if len(names) == 2:
            if self.hess is None:
                raise UnsupportedOrder("second derivatives were not computed")
            return self.hess[..., _PAIR_INDEX[_INDEX[names[0]], _INDEX[names[1]]]]
        raise UnsupportedOrder("derivatives above second order are not tracked")

    def __repr__(self) -> str:
        return f"Taylor(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"

    # -- chain rule ---------------------------------------------------------
    def apply(self, f0, f1, f2) -> "Taylor":
        """Compose with a univariate function given its value and two derivatives."""
        g = self.grad
        grad = f1[..., None] * g
        if self.hess is None:
            return Taylor(f0, grad, None)
        hess = f1[..., None] * self.hess + f2[..., None] * g[..., _I] * g[..., _J]
        return Taylor(f0, grad, hess)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Taylor":
        if isinstance(other, Taylor):
            return other
        return Taylor.constant(other)

    def __add__(self, other):
        o = self._coerce(other)
        hess = None if self.hess is None or o.hess is None else self.hess + o.hess
        return Taylor(self.val + o.val, self.grad + o.grad, hess)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        a, b = self, o
        val = a.val * b.val
        grad = a.grad * b.val[..., None] + b.grad * a.val[..., None]
        if a.hess is None or b.hess is None:
            return Taylor(val, grad, None)
        hess = (a.hess * b.val[..., None] + b.hess * a.val[..., None]
                + a.grad[..., _I] * b.grad[..., _J] + a.grad[..., _J] * b.grad[..., _I])
        return Taylor(val, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Taylor":
        b = self.val
        _check_nonzero(b)
        r = 1.0 / b
        return self.apply(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, p):
        if isinstance(p, Taylor):
            return tpow_general(self, p)
        return tpow(self, float(p))

    def __rpow__(self, base):
        return tpow_general(self._coerce(base), self)


# ---------------------------------------------------------------------------
# elementary functions on floats/arrays and Taylor numbers
# ---------------------------------------------------------------------------

def _check_nonzero(b) -> None:
    if np.any(np.abs(b) < TINY):
        raise DomainError("division by a value with |denominator| < 1e-300")


def _check_positive(b, what: str) -> None:
    if np.any(~(np.asarray(b) > 0.0)):
        raise DomainError(f"{what} requires a strictly positive argument")


def _val(a):
    return a.val if isinstance(a, Taylor) else a


def _is_int(p: float) -> bool:
    return float(p).is_integer()


def tpow(a, p: float):
    """``a**p`` for a real constant exponent with the domain rules of the kernel."""
    b = _val(a)
    if _is_int(p):
        if p < 0:
            _check_nonzero(b)
    else:
        _check_positive(b, f"power with non-integer exponent {p}")
    if not isinstance(a, Taylor):
        return np.power(_arr(b), p)
    b = a.val
    f0 = np.power(b, p)
    if p == 0.0:
        z = np.zeros_like(b)
        return a.apply(np.ones_like(b), z, z)
    f1 = p * np.power(b, p - 1.0)
    if p == 1.0:
        f2 = np.zeros_like(b)
    else:
        f2 = p * (p - 1.0) * np.power(b, p - 2.0)
    return a.apply(f0, f1, f2)


def tpow_general(a, b):
    """``a**b`` with both operands variable; requires ``a > 0``."""
    _check_positive(_val(a), "power with variable exponent")
    return texp(b * tlog(a))


def texp(a):
    if not isinstance(a, Taylor):
        return np.exp(_arr(a))
    e = np.exp(a.val)
    return a.apply(e, e, e)


def tlog(a):
    _check_positive(_val(a), "log")
    if not isinstance(a, Taylor):
        return np.log(_arr(a))
    r = 1.0 / a.val
    return a.apply(np.log(a.val), r, -r * r)


def tsin(a):
    if not isinstance(a, Taylor):
        return np.sin(_arr(a))
    s, c = np.sin(a.val), np.cos(a.val)
    return a.apply(s, c, -s)


def tcos(a):
    if not isinstance(a, Taylor):
        return np.cos(_arr(a))
    s, c = np.sin(a.val), np.cos(a.val)
    return a.apply(c, -s, -c)


def tsqrt(a):
    _check_positive(_val(a), "sqrt")
    if not isinstance(a, Taylor):
        return np.sqrt(_arr(a))
    r = np.sqrt(a.val)
    return a.apply(r, 0.5 / r, -0.25 / (r * a.val))


def tdiv(a, b):
    if isinstance(a, Taylor) or isinstance(b, Taylor):
        if not isinstance(b, Taylor):
            _check_nonzero(b)
        return a / b if isinstance(a, Taylor) else Taylor.constant(a) / b
    _check_nonzero(b)
    return _arr(a) / b


_FUNCS = {"exp": texp, "log": tlog, "sin": tsin, "cos": tcos, "sqrt": tsqrt}


def compose(outer_value, outer_grad, outer_hess, args: Sequence):
    """Chain rule for a four-argument function evaluated at Taylor arguments.

    ``outer_grad`` has shape ``S + (4,)`` and ``outer_hess`` shape
    ``S + (4, 4)`` (or ``None``); ``args`` are four Taylor numbers (or plain
    arrays, treated as constants).
    """
    args = [a if isinstance(a, Taylor) else Taylor.constant(a) for a in args]
    jac = np.stack(np.broadcast_arrays(*[a.grad for a in args]), axis=-2)  # S+(4 args,4 vars)
    g = _arr(outer_grad)
    grad = np.einsum("...i,...ik->...k", g, jac)
    if outer_hess is None or any(a.hess is None for a in args):
        return Taylor(outer_value, grad, None)
    H = _arr(outer_hess)
    inner_h = np.stack(np.broadcast_arrays(*[a.hess for a in args]), axis=-2)  # S+(4,10)
    hess = (np.einsum("...ij,...ip,...jp->...p", H, jac[..., _I], jac[..., _J])
            + np.einsum("...i,...ip->...p", g, inner_h))
    return Taylor(outer_value, grad, hess)


# ---------------------------------------------------------------------------
# expression trees
# ---------------------------------------------------------------------------

def as_expr(obj) -> "Expr":
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return Const(float(obj))
    raise TypeError(f"cannot convert {type(obj).__name__} to an expression")


class Expr:
    """Node of a closed-form scalar field over (t, x, u, v)."""

    __slots__ = ()

    def ev(self, env: Mapping[str, object]):
        """Evaluate on an environment of floats/arrays or Taylor numbers."""
        raise NotImplementedError

    def __add__(self, o):
        return Add(self, as_expr(o))

    def __radd__(self, o):
        return Add(as_expr(o), self)

    def __sub__(self, o):
        return Sub(self, as_expr(o))

    def __rsub__(self, o):
        return Sub(as_expr(o), self)

    def __mul__(self, o):
        return Mul(self, as_expr(o))

    def __rmul__(self, o):
        return Mul(as_expr(o), self)

    def __truediv__(self, o):
        return Div(self, as_expr(o))

    def __rtruediv__(self, o):
        return Div(as_expr(o), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, p):
        if isinstance(p, Expr):
            return PowExpr(self, p)
        return Pow(self, float(p))

    def __rpow__(self, base):
        return PowExpr(as_expr(base), self)

    def subs(self, **mapping) -> "Expr":
        """Substitute expressions for variables, e.g. ``f.subs(u=Var("v"))``."""
        return Subst(self, {k: as_expr(v) for k, v in mapping.items()})


@dataclass(frozen=True, eq=False)
class Const(Expr):
    c: float

    def ev(self, env):
        return self.c

    def __repr__(self):
        return repr(self.c)


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    def __post_init__(self):
        if self.name not in _INDEX:
            raise ValueError(f"unknown variable {self.name!r}; use one of {VARIABLES}")

    def ev(self, env):
        return env[self.name]

    def __repr__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class Add(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) + self.b.ev(env)

    def __repr__(self):
        return f"({self.a!r} + {self.b!r})"


@dataclass(frozen=True, eq=False)
class Sub(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) - self.b.ev(env)

    def __repr__(self):
        return f"({self.a!r} - {self.b!r})"


@dataclass(frozen=True, eq=False)
class Mul(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) * self.b.ev(env)

    def __repr__(self):
        return f"{self.a!r}*{self.b!r}"


@dataclass(frozen=True, eq=False)
class Div(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return tdiv(self.a.ev(env), self.b.ev(env))

    def __repr__(self):
        return f"{self.a!r}/{self.b!r}"


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    a: Expr

    def ev(self, env):
        return -self.a.ev(env)

    def __repr__(self):
        return f"-{self.a!r}"


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    a: Expr
    p: float

    def ev(self, env):
        return tpow(self.a.ev(env), self.p)

    def __repr__(self):
        return f"{self.a!r}**{self.p!r}"


@dataclass(frozen=True, eq=False)
class PowExpr(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        a = self.a.ev(env)
        b = self.b.ev(env)
        if isinstance(a, Taylor) or isinstance(b, Taylor):
            return tpow_general(a, b)
        _check_positive(a, "power with variable exponent")
        return np.power(_arr(a), b)

    def __repr__(self):
        return f"{self.a!r}**({self.b!r})"


@dataclass(frozen=True, eq=False)
class Fn(Expr):
    name: str
    a: Expr

    def ev(self, env):
        return _FUNCS[self.name](self.a.ev(env))

    def __repr__(self):
        return f"{self.name}({self.a!r})"


@dataclass(frozen=True, eq=False)
class Univariate(Expr):
    """Univariate function node.

    ``fn(values)`` must return the triple ``(f, f', f'')`` as arrays.
    """

    a: Expr
    fn: Callable
    label: str = "g"

    def ev(self, env):
        arg = self.a.ev(env)
        if isinstance(arg, Taylor):
            f0, f1, f2 = (_arr(z) for z in self.fn(arg.val))
            return arg.apply(f0, f1, f2)
        return _arr(self.fn(_arr(arg))[0])

    def __repr__(self):
        return f"{self.label}({self.a!r})"


@dataclass(frozen=True, eq=False)
class Subst(Expr):
    """Composition: evaluate ``expr`` with some variables replaced by expressions."""

    expr: Expr
    mapping: Mapping[str, Expr]

    def ev(self, env):
        inner = dict(env)
        for name, e in self.mapping.items():
            inner[name] = e.ev(env)
        return self.expr.ev(inner)

    def __repr__(self):
        subs = ", ".join(f"{k}={v!r}" for k, v in self.mapping.items())
        return f"{self.expr!r}[{subs}]"


@dataclass(frozen=True, eq=False)
class CallableField(Expr):
    """Field backed by a user callable ``fn(t, x, u, v)``.

    With ``max_order = 0`` the callable returns the value.  With
    ``max_order = 1`` it returns ``(value, gradient)`` and with ``max_order = 2``
    ``(value, gradient, hessian)``, gradients of shape ``S + (4,)`` and Hessians
    of shape ``S + (4, 4)``.
    """

    fn: Callable
    max_order: int = 0
    label: str = "callable"

    def _raw(self, args):
        out = self.fn(*args)
        if self.max_order == 0:
            return _arr(out), None, None
        if self.max_order == 1:
            return _arr(out[0]), _arr(out[1]), None
        return _arr(out[0]), _arr(out[1]), _arr(out[2])

    def ev(self, env):
        args = [env[n] for n in VARIABLES]
        if not any(isinstance(a, Taylor) for a in args):
            return self._raw(args)[0]
        need = 2 if any(isinstance(a, Taylor) and a.hess is not None for a in args) else 1
        if self.max_order < need:
            raise UnsupportedOrder(
                f"{self.label} provides derivatives up to order {self.max_order}, "
                f"order {need} requested")
        f0, g, H = self._raw([_val(a) for a in args])
        return compose(f0, g, H, args)

    def __repr__(self):
        return self.label


def exp(a) -> Expr:
    return Fn("exp", as_expr(a))


def log(a) -> Expr:
    return Fn("log", as_expr(a))


def sin(a) -> Expr:
    return Fn("sin", as_expr(a))


def cos(a) -> Expr:
    return Fn("cos", as_expr(a))


def sqrt(a) -> Expr:
    return Fn("sqrt", as_expr(a))


t, x, u, v = (Var(n) for n in VARIABLES)


# ---------------------------------------------------------------------------
# evaluation entry points
# ---------------------------------------------------------------------------

def _point_env(point) -> dict:
    if isinstance(point, Mapping):
        vals = [point.get(n, 0.0) for n in VARIABLES]
    else:
        vals = list(point)
        if len(vals) != 4:
            raise ValueError("a point needs four coordinates (t, x, u, v)")
    vals = np.broadcast_arrays(*[_arr(v_) for v_ in vals])
    return dict(zip(VARIABLES, vals))


def evaluate(field, point) -> np.ndarray:
    """Value of ``field`` at ``point`` (sequence or mapping of t, x, u, v)."""
    env = _point_env(point)
    return _arr(as_expr(field).ev(env)) + np.zeros(env["t"].shape)


def taylor_eval(field, point, order: int = 2) -> Taylor:
    """Value and partial derivatives of ``field`` up to ``order`` at ``point``.

    Parameters
    ----------
    field : Expr or float
        The scalar field.
    point : sequence or mapping
        Coordinates (t, x, u, v); each may be a scalar or an array (batched).
    order : {0, 1, 2}
        Highest derivative order returned.

    Returns
    -------
    Taylor
        ``grad`` is ``None`` for order 0 and ``hess`` is ``None`` for order < 2.
    """
    if order not in (0, 1, 2):
        raise UnsupportedOrder(f"order must be 0, 1 or 2, got {order}")
    env = _point_env(point)
    shape = env["t"].shape
    if order == 0:
        val = _arr(as_expr(field).ev(env)) + np.zeros(shape)
        return _value_only(val)
    tenv = {n: Taylor.variable(n, env[n]) for n in VARIABLES}
    if order == 1:
        for n in VARIABLES:
            tenv[n].hess = None
    res = as_expr(field).ev(tenv)
    if not isinstance(res, Taylor):
        res = Taylor.constant(res)
    val = res.val + np.zeros(shape)
    grad = res.grad + np.zeros(shape + (4,))
    hess = None if order == 1 or res.hess is None else res.hess + np.zeros(shape + (10,))
    return Taylor(val, grad, hess)


def _value_only(val) -> Taylor:
    out = Taylor.__new__(Taylor)
    out.val = val
    out.grad = None
    out.hess = None
    return out


def fd_check(field, point, h: float) -> float:
    """Largest discrepancy between central differences and Taylor derivatives.

    Gradients use the two-point central stencil, pure second derivatives the
    three-point stencil and mixed ones the four-point stencil, all with step
    ``h``.  Batched points return the maximum over the batch.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    f = as_expr(field)
    env = _point_env(point)
    base = np.stack([env[n] for n in VARIABLES])

    def at(shift):
        p = base + np.reshape(shift, (4,) + (1,) * (base.ndim - 1))
        return evaluate(f, list(p))

    tv = taylor_eval(f, list(base), order=2)
    e = np.eye(4) * h
    f0 = at(np.zeros(4))
    worst = 0.0
    for i in range(4):
        fp, fm = at(e[i]), at(-e[i])
        g = (fp - fm) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - tv.grad[..., i]))))
        hii = (fp - 2 * f0 + fm) / (h * h)
        worst = max(worst, float(np.max(np.abs(hii - tv.hess[..., _PAIR_INDEX[i, i]]))))
        for j in range(i + 1, 4):
            hij = (at(e[i] + e[j]) - at(e[i] - e[j]) - at(-e[i] + e[j]) + at(-e[i] - e[j])) / (4 * h * h)
            worst = max(worst, float(np.max(np.abs(hij - tv.hess[..., _PAIR_INDEX[i, j]]))))
    return worst
