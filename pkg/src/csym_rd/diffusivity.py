"""Diffusivity families d(u) and reaction profiles f(omega)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import calc
from .calc import Const, Expr, Univariate, Var, as_expr
from .errors import DomainError, InvalidParams
from .ode import integrate_ivp

POWER = "PowerLaw"
EXPONENTIAL = "Exponential"
IMPLICIT3 = "ImplicitCaseIII"
CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class DiffusivityFamily:
    """A diffusivity d(w) of one dependent variable with its derivatives.

    Attributes
    ----------
    kind : str
        ``"PowerLaw"``, ``"Exponential"``, ``"ImplicitCaseIII"`` or ``"Custom"``.
    params : dict
        Kind parameters (``beta``, ``delta``, ``sign`` for power laws with
        ``d = delta*(sign*w)**beta``; ``delta``, ``rate`` for ``delta*exp(rate*w)``).
    var : str
        Name of the dependent variable the expressions are written in.
    d, d_u, d_uu : Expr
        The diffusivity and its first two derivatives.
    h : Expr or None
        ``d / d_u`` (``None`` when ``d_u`` vanishes identically).
    log_integral : Expr or None
        A primitive of ``d_uu / (d * d_u)``, used by the case II/III sources.
    """

    kind: str
    params: dict
    var: str
    d: Expr
    d_u: Expr
    d_uu: Expr
    h: Expr | None = None
    log_integral: Expr | None = None
    extras: dict = field(default_factory=dict, repr=False)

    def eval(self, w) -> dict:
        """Numeric values of d, d_u, d_uu and h at ``w``."""
        point = {"t": 0.0, "x": 0.0, "u": 0.0, "v": 0.0}
        point[self.var] = w
        out = {"d": calc.evaluate(self.d, point), "d_u": calc.evaluate(self.d_u, point),
               "d_uu": calc.evaluate(self.d_uu, point)}
        if self.h is not None:
            out["h"] = calc.evaluate(self.h, point)
        return out

    def on(self, var: str) -> "DiffusivityFamily":
        """The same family written in another variable (e.g. ``u`` -> ``v``)."""
        if var == self.var:
            return self
        m = {self.var: Var(var)}

        def sub(e):
            return None if e is None else e.subs(**m)

        return DiffusivityFamily(self.kind, dict(self.params), var, sub(self.d), sub(self.d_u),
                                 sub(self.d_uu), sub(self.h), sub(self.log_integral), self.extras)

    def __repr__(self):
        return f"DiffusivityFamily({self.kind}, {self.params}, var={self.var!r})"


def power_law(beta: float, delta: float = 1.0, var: str = "u", sign: float = 1.0,
              offset: float = 0.0) -> DiffusivityFamily:
    """``d(w) = delta * (sign*w)**beta`` on ``sign*w > 0``.

    ``offset`` is the additive constant of the logarithmic primitive used by
    the Kirchhoff substitution when ``beta = -1``; it does not change ``d``.
    """
    beta, delta, sign = float(beta), float(delta), float(sign)
    if not delta > 0:
        raise InvalidParams("power-law scale delta must be positive")
    if sign not in (1.0, -1.0):
        raise InvalidParams("power-law orientation sign must be +1 or -1")
    w = Var(var)
    s = w if sign > 0 else -w
    d = delta * s ** beta
    if beta == 0.0:
        zero = Const(0.0)
        return DiffusivityFamily(POWER, {"beta": beta, "delta": delta, "sign": sign}, var,
                                 Const(delta) + 0.0 * w, zero, zero, None, None)
    d_u = sign * delta * beta * s ** (beta - 1.0)
    d_uu = delta * beta * (beta - 1.0) * s ** (beta - 2.0) if beta != 1.0 else Const(0.0)
    h = w / beta
    params = {"beta": beta, "delta": delta, "sign": sign}
    if offset:
        params["offset"] = float(offset)
    # primitive of d_uu/(d d_u) = (beta-1)/(beta*delta) * (sign*w)**(-beta-1) * sign
    log_int = -((beta - 1.0) / (beta * delta)) * s ** (-beta)
    return DiffusivityFamily(POWER, params, var, d, d_u, d_uu, h, log_int)


def exponential(delta: float = 1.0, rate: float = 1.0, var: str = "u") -> DiffusivityFamily:
    """``d(w) = delta * exp(rate*w)``."""
    delta, rate = float(delta), float(rate)
    if not delta > 0:
        raise InvalidParams("exponential scale delta must be positive")
    if rate == 0.0:
        raise InvalidParams("exponential rate must be non-zero")
    w = Var(var)
    e = calc.exp(rate * w)
    d = delta * e
    h = Const(1.0 / rate) + 0.0 * w
    log_int = (-1.0 / delta) * calc.exp(-rate * w)
    return DiffusivityFamily(EXPONENTIAL, {"delta": delta, "rate": rate}, var,
                             d, delta * rate * e, delta * rate * rate * e, h, log_int)


def custom(d: Expr, d_u: Expr, d_uu: Expr, var: str = "u", h: Expr | None = None,
           log_integral: Expr | None = None, params: dict | None = None) -> DiffusivityFamily:
    """Wrap user expressions; ``h`` defaults to ``d/d_u``."""
    d, d_u, d_uu = as_expr(d), as_expr(d_u), as_expr(d_uu)
    if h is None:
        h = d / d_u
    return DiffusivityFamily(CUSTOM, dict(params or {}), var, d, d_u, d_uu, h, log_integral)


# ---------------------------------------------------------------------------
# implicit case III:  8 h h'' = 4 h' + 1,  d = exp(int du/h)
# ---------------------------------------------------------------------------

class _CaseIIISolution:
    """Dense solution of the augmented system for h, h', ln d and I.

    State ``(h, p, L, I)`` with ``h' = p``, ``p' = (4p + 1)/(8h)``,
    ``L' = 1/h`` (``d = exp(L)``) and ``I' = (1 - p)/(h d)``, the integrand
    ``d_uu/(d d_u)`` rewritten through ``d_u = d/h``.
    """

    def __init__(self, u0, h0, h0p, u_range, rtol, atol):
        self.u0 = u0
        self.u_range = u_range

        def rhs(_, y):
            h, p, L, _I = y
            if abs(h) < 1e-12:
                raise DomainError("h vanished while integrating the case III ODE")
            return np.array([p, (4 * p + 1) / (8 * h), 1.0 / h, (1 - p) / (h * np.exp(L))])

        y0 = [h0, h0p, 0.0, 0.0]
        self.branches = []
        for end in u_range:
            if end == u0:
                continue
            tr = integrate_ivp(rhs, (u0, end), y0, rtol=rtol, atol=atol)
            if tr.termination != "Completed":
                raise DomainError(
                    f"case III ODE left its domain before u = {end} (h crosses zero)")
            self.branches.append(tr)

    def state(self, w):
        w = np.asarray(w, dtype=float)
        lo, hi = self.u_range
        if np.any((w < lo) | (w > hi)):
            raise DomainError(f"u outside the integrated range [{lo}, {hi}]")
        out = np.empty(w.shape + (4,))
        for tr in self.branches:
            a, b = sorted((tr.t[0], tr.t[-1]))
            mask = (w >= a) & (w <= b)
            if np.any(mask):
                out[mask] = tr(w[mask])
        return out[..., 0], out[..., 1], out[..., 2], out[..., 3]


def implicit_case3(u0: float = 1.0, h0: float = 1.0, h0prime: float = 0.0,
                   u_range=(0.25, 4.0), var: str = "u", rtol: float = 1e-12,
                   atol: float = 1e-14) -> DiffusivityFamily:
    """Diffusivity defined through ``h = d/d_u`` solving ``8 h h'' = 4 h' + 1``.

    Parameters
    ----------
    u0, h0, h0prime : float
        Initial data ``h(u0) = h0``, ``h'(u0) = h0prime``; ``d(u0) = 1``.
    u_range : (float, float)
        Interval of ``u`` on which the solution is tabulated.
    """
    u0, h0, h0prime = float(u0), float(h0), float(h0prime)
    if h0prime == -0.25:
        raise InvalidParams("h0prime must differ from -1/4 (that choice gives the Lie case)")
    if h0 == 0.0:
        raise InvalidParams("h0 must be non-zero")
    lo, hi = float(u_range[0]), float(u_range[1])
    if not lo <= u0 <= hi or lo >= hi:
        raise InvalidParams("u_range must be an interval containing u0")
    sol = _CaseIIISolution(u0, h0, h0prime, (lo, hi), rtol, atol)

    def f_h(w):
        h, p, _, _ = sol.state(w)
        return h, p, (4 * p + 1) / (8 * h)

    def f_p(w):
        h, p, _, _ = sol.state(w)
        q = (4 * p + 1) / (8 * h)
        return p, q, (4 * q * h - (4 * p + 1) * p) / (8 * h * h)

    def f_d(w):
        h, p, L, _ = sol.state(w)
        d = np.exp(L)
        return d, d / h, d * (1 - p) / (h * h)

    def f_I(w):
        h, p, L, I = sol.state(w)
        d = np.exp(L)
        q = (4 * p + 1) / (8 * h)
        return I, (1 - p) / (h * d), (-q * h - (1 - p * p)) / (h * h * d)

    w = Var(var)
    H = Univariate(w, f_h, "h")
    P = Univariate(w, f_p, "h'")
    D = Univariate(w, f_d, "d")
    J = Univariate(w, f_I, "I")
    params = {"u0": u0, "h0": h0, "h0prime": h0prime, "u_range": (lo, hi)}
    return DiffusivityFamily(IMPLICIT3, params, var, D, D / H, D * (1.0 - P) / H ** 2, H, J,
                             extras={"h_prime": P, "solution": sol})


# ---------------------------------------------------------------------------
# reaction profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReactionProfile:
    """Profile f(arg) of a reaction term.

    ``kind`` is ``"PowerLaw"`` (``alpha * arg**k``), ``"Constant"`` or
    ``"Custom"`` (an expression in the placeholder variable ``u``).
    ``argument_kind`` records whether the argument is ``omega = v**4 d1(u)``
    or ``u``.
    """

    kind: str
    alpha: float = 0.0
    k: float = 0.0
    expr: Expr | None = None
    argument_kind: str = "omega"

    def of(self, arg) -> Expr:
        """The profile composed with an argument expression."""
        arg = as_expr(arg)
        if self.kind == "Constant" or (self.kind == POWER and self.k == 0.0):
            return Const(self.alpha) + 0.0 * arg
        if self.kind == POWER:
            return self.alpha * arg ** self.k
        return self.expr.subs(u=arg)

    def __call__(self, w):
        """Numeric evaluation on an array of arguments."""
        w = np.asarray(w, dtype=float)
        return calc.evaluate(self.of(Var("u")), (0.0, 0.0, w, 0.0))

    def scaled(self, c: float) -> "ReactionProfile":
        """The profile multiplied by a constant."""
        if self.kind in (POWER, "Constant"):
            return ReactionProfile(self.kind, c * self.alpha, self.k, None, self.argument_kind)
        return ReactionProfile("Custom", 0.0, 0.0, c * self.expr, self.argument_kind)

    def rescaled_argument(self, a: float) -> "ReactionProfile":
        """The profile ``w -> f(a*w)``."""
        if self.kind == "Constant":
            return self
        if self.kind == POWER:
            return ReactionProfile(POWER, self.alpha * a ** self.k, self.k, None, self.argument_kind)
        return ReactionProfile("Custom", 0.0, 0.0, self.expr.subs(u=a * Var("u")), self.argument_kind)


def power_profile(alpha: float, k: float, argument_kind: str = "omega") -> ReactionProfile:
    return ReactionProfile(POWER, float(alpha), float(k), None, argument_kind)


def constant_profile(alpha: float, argument_kind: str = "omega") -> ReactionProfile:
    return ReactionProfile("Constant", float(alpha), 0.0, None, argument_kind)


def custom_profile(expr: Expr, argument_kind: str = "omega") -> ReactionProfile:
    """Profile given as an expression in the placeholder variable ``u``."""
    return ReactionProfile("Custom", 0.0, 0.0, as_expr(expr), argument_kind)
