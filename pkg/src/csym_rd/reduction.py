"""Invariant ansätze, reduced ODE systems and their integration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import calc
from .calc import Expr, Var, exp, log, sin
from .catalog import RDSystem, SymmetryOperator, catalog_system
from .diffusivity import EXPONENTIAL, POWER, ReactionProfile
from .errors import DomainError, IncompatiblePair, InvalidParams, UnsupportedOperator
from .ode import Trajectory, integrate_ivp

t, x, u, v = Var("t"), Var("x"), Var("u"), Var("v")

ANSATZ_IDS = ("c3", "table1-row1", "table1-row2", "table1-row3", "table1-row4")


@dataclass(frozen=True)
class Ansatz:
    """Closed-form invariant solution shape ``u = U(x, phi(t))``, ``v = V(x, psi(t))``.

    ``u_expr`` and ``v_expr`` are expression trees in ``x`` with the ``u`` slot
    standing for ``phi`` and the ``v`` slot for ``psi``.

    Attributes
    ----------
    ansatz_id : str
        ``"c3"`` or ``"table1-row1"`` ... ``"table1-row4"``.
    operator_id : str
        Operator whose invariant-surface conditions the ansatz solves.
    x_domain : (float, float)
        Open interval of validity in ``x``.
    """

    ansatz_id: str
    operator_id: str
    u_expr: Expr
    v_expr: Expr
    x_domain: tuple = (-math.inf, math.inf)
    params: dict = field(default_factory=dict)

    def replace(self, **changes) -> "Ansatz":
        return dataclasses.replace(self, **changes)

    def check_domain(self, x_) -> None:
        x_ = np.asarray(x_, dtype=float)
        lo, hi = self.x_domain
        if np.any((x_ <= lo) | (x_ >= hi)):
            raise DomainError(f"x outside the ansatz validity interval ({lo}, {hi})")

    def evaluate(self, t_, x_, phi, psi, dphi=0.0, dpsi=0.0) -> dict:
        """``u, v`` and their derivatives ``_t, _x, _xx`` on the ansatz."""
        self.check_domain(x_)
        pt = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t_, x_, phi, psi)))
        U = calc.taylor_eval(self.u_expr, pt)
        V = calc.taylor_eval(self.v_expr, pt)
        return {"u": U.val, "v": V.val,
                "u_t": U.d("u") * dphi, "u_x": U.d("x"), "u_xx": U.d("x", "x"),
                "v_t": V.d("v") * dpsi, "v_x": V.d("x"), "v_xx": V.d("x", "x")}


def _ansatz_params(operator_id, params):
    p = dict(params or {})
    if operator_id in ("Q-T1-I", "c3"):
        return "T1-I", p
    if operator_id in ("Q-T1-II",) or operator_id.startswith("table1-row"):
        return "T1-II", p
    raise UnsupportedOperator(
        f"no closed-form ansatz for {operator_id!r}; supported: Q-T1-I, Q-T1-II, {', '.join(ANSATZ_IDS)}")


def build_ansatz(operator_id: str, params: dict | None = None) -> Ansatz:
    """Solve ``Q(u) = Q(v) = 0`` in closed form for a catalogued operator.

    Parameters
    ----------
    operator_id : str
        ``"Q-T1-I"`` (ansatz ``c3``), ``"Q-T1-II"`` (tabulated row chosen by
        ``d1`` and the sign of ``mu``) or an ansatz id from :data:`ANSATZ_IDS`.
    params : dict, optional
        System parameters: ``d1`` (``"power"`` or ``"exp"``), ``beta``,
        ``mu`` (``+4`` or ``-4``) and ``alpha``.
    """
    sid, p = _ansatz_params(operator_id, params)
    if operator_id.startswith("table1-row"):
        row = int(operator_id[-1])
        p.setdefault("d1", "exp" if row in (1, 2) else "power")
        p.setdefault("mu", 4.0 if row in (1, 3) else -4.0)
        if (p["d1"] == "exp") != (row in (1, 2)) or (p["mu"] > 0) != (row in (1, 3)):
            raise InvalidParams(f"parameters {p} do not match {operator_id}")
    p.setdefault("d1", "power")
    beta = float(p.get("beta", 3.0 if sid == "T1-II" else 2.0))
    if p["d1"] == "power" and beta == 0.0:
        raise InvalidParams("beta != 0 required")
    if sid == "T1-I":
        if p["d1"] == "power":
            U, X = u * exp((-4.0 / beta) * x), v * exp(x)
        else:
            U, X = u - 4.0 * x, v * exp(x)
        return Ansatz("c3", "Q-T1-I", U, X, (-math.inf, math.inf), {**p, "beta": beta})
    mu = float(p.get("mu", 4.0))
    alpha = float(p.get("alpha", 1.0))
    if mu == 4.0:
        E = exp(2.0 * x) + alpha * exp(-2.0 * x)
        lo = -math.inf if alpha >= 0 else math.log(-alpha) / 4.0
        dom = (lo, math.inf)
    elif mu == -4.0:
        E = sin(2.0 * x)
        dom = (0.0, math.pi / 2.0)
    else:
        raise UnsupportedOperator("closed-form T1-II ansatz needs mu = 4 or mu = -4")
    if p["d1"] == "exp":
        row = 1 if mu > 0 else 2
        U = u - 2.0 * log(E)
    else:
        row = 3 if mu > 0 else 4
        U = u * E ** (-2.0 / beta)
    return Ansatz(f"table1-row{row}", "Q-T1-II", U, v * E ** 0.5, dom,
                  {**p, "beta": beta, "mu": mu, "alpha": alpha})


def invariant_surface_residual(ansatz: Ansatz, Q: SymmetryOperator, t_, x_, phi, psi):
    """``(xi u_x - eta1, xi v_x - eta2)`` evaluated on the ansatz."""
    a = ansatz.evaluate(t_, x_, phi, psi)
    pt = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (t_, x_, a["u"], a["v"])))
    if np.any(calc.evaluate(Q.xi0, pt) != 0.0):
        raise UnsupportedOperator("invariant-surface residual implemented for xi0 = 0")
    xi = calc.evaluate(Q.xi, pt)
    return xi * a["u_x"] - calc.evaluate(Q.eta1, pt), xi * a["v_x"] - calc.evaluate(Q.eta2, pt)


# ---------------------------------------------------------------------------
# reduced systems
# ---------------------------------------------------------------------------

def _pow(base, e):
    base = np.asarray(base, dtype=float)
    if float(e).is_integer():
        if e < 0 and np.any(base == 0.0):
            raise DomainError("negative integer power of zero")
        return base ** e
    if np.any(base <= 0.0):
        raise DomainError(f"non-integer power {e} of a non-positive base")
    return base ** e


@dataclass(frozen=True)
class ReducedODESystem:
    """Reduced system for ``(phi, psi)``, solved for the derivatives.

    ``kind="power"``:  ``phi' = c_f phi F(chi) + c_s1 phi^(1-beta)``,
    ``chi = phi^beta psi^4``.
    ``kind="exp"``:  ``phi' = c_f F(chi) + c_s1 e^(-phi)``, ``chi = e^phi psi^4``.
    Both kinds share ``psi' = c_g psi G(chi) + c_s2 psi^5``.  ``kind="custom"``
    wraps an arbitrary right-hand side.
    """

    system_id: str
    ansatz_id: str
    kind: str
    coeffs: dict
    profile_f: ReactionProfile | None = None
    profile_g: ReactionProfile | None = None
    beta: float = 1.0
    custom_rhs: Callable | None = None
    custom_chi: Callable | None = None

    @classmethod
    def custom(cls, rhs: Callable, chi: Callable | None = None,
               system_id: str = "custom") -> "ReducedODESystem":
        """Wrap ``rhs(t, phi, psi) -> (phi', psi')``."""
        return cls(system_id, "custom", "custom", {}, custom_rhs=rhs, custom_chi=chi)

    def with_coeffs(self, **changes) -> "ReducedODESystem":
        unknown = set(changes) - set(self.coeffs)
        if unknown:
            raise InvalidParams(f"unknown coefficients {sorted(unknown)}; known {sorted(self.coeffs)}")
        return dataclasses.replace(self, coeffs={**self.coeffs, **changes})

    def chi(self, phi, psi):
        if self.kind == "custom":
            if self.custom_chi is None:
                raise InvalidParams("custom reduced system has no invariant argument")
            return self.custom_chi(phi, psi)
        lead = np.exp(phi) if self.kind == "exp" else _pow(phi, self.beta)
        return lead * np.asarray(psi, dtype=float) ** 4

    def derivatives(self, t_, phi, psi):
        """``(phi', psi')`` at the given state."""
        if self.kind == "custom":
            return self.custom_rhs(t_, phi, psi)
        c = self.coeffs
        phi, psi = np.asarray(phi, dtype=float), np.asarray(psi, dtype=float)
        chi = self.chi(phi, psi)
        F, G = self.profile_f(chi), self.profile_g(chi)
        if self.kind == "exp":
            dphi = c["f"] * F + c["s1"] * np.exp(-phi)
        else:
            dphi = c["f"] * phi * F + c["s1"] * _pow(phi, 1.0 - self.beta)
        dpsi = c["g"] * psi * G + c["s2"] * psi ** 5
        return dphi, dpsi

    def __call__(self, t_, y):
        dphi, dpsi = self.derivatives(t_, y[0], y[1])
        return np.array([dphi, dpsi], dtype=float)


def _profile_scale(sys: RDSystem) -> float:
    """Factor relating the system's ``f`` to the one in the reduced ODE."""
    if sys.catalog_id in ("S-c2", "S-c8") or sys.d1.kind == EXPONENTIAL:
        return 1.0
    return 1.0 / sys.d1.params["beta"]


def reduce(system, ansatz: Ansatz) -> ReducedODESystem:
    """Reduced ODE system of a compatible (system, ansatz) pair.

    Parameters
    ----------
    system : RDSystem or str
        ``S-c2``, ``S-c8`` or ``T1-I`` with the ``c3`` ansatz; ``T1-II`` with
        a tabulated-row ansatz.  A string id is built with the ansatz parameters.
    """
    if isinstance(system, str):
        keys = {"T1-I": ("d1", "beta"), "T1-II": ("d1", "beta", "mu", "alpha"),
                "S-c2": ("beta",), "S-c8": ("beta",)}.get(system, ())
        system = catalog_system(system, {k: ansatz.params[k] for k in keys if k in ansatz.params})
    sid = system.catalog_id
    a = ansatz.params
    d1 = system.d1
    kind = "exp" if d1.kind == EXPONENTIAL else "power"
    if d1.kind not in (POWER, EXPONENTIAL):
        raise IncompatiblePair(f"{sid} has no closed-form reduction")
    if kind != ("exp" if a.get("d1") == "exp" else "power"):
        raise IncompatiblePair(f"ansatz {ansatz.ansatz_id} was built for a different diffusivity")
    beta = float(d1.params.get("beta", 1.0))
    if kind == "power" and not math.isclose(beta, a["beta"]):
        raise IncompatiblePair(f"ansatz beta {a['beta']} differs from system beta {beta}")
    scale = _profile_scale(system)
    if ansatz.ansatz_id == "c3":
        if sid not in ("S-c2", "S-c8", "T1-I"):
            raise IncompatiblePair(f"ansatz c3 does not reduce {sid}")
        coeffs = {"f": -scale, "s1": 0.0, "g": -1.0, "s2": 0.0}
    else:
        if sid != "T1-II":
            raise IncompatiblePair(f"{ansatz.ansatz_id} reduces T1-II systems only, not {sid}")
        mu, alpha = system.params["mu"], system.params["alpha"]
        if mu != a["mu"] or (mu > 0 and alpha != a["alpha"]):
            raise IncompatiblePair("ansatz and system differ in mu or alpha")
        row = int(ansatz.ansatz_id[-1])
        s1 = {1: -32.0 * alpha, 2: 8.0,
              3: -32.0 * alpha * (2.0 + beta) / beta ** 2, 4: 8.0 * (2.0 + beta) / beta ** 2}[row]
        s2 = 4.0 * alpha if mu > 0 else -1.0
        coeffs = {"f": -scale, "s1": s1, "g": -1.0, "s2": s2}
    return ReducedODESystem(sid, ansatz.ansatz_id, kind, coeffs, system.profile_f,
                            system.profile_g, beta)


def reduction_residual(sys: RDSystem, ansatz: Ansatz, ode: ReducedODESystem, t_, x_, phi, psi,
                       normalized: bool = False):
    """PDE residuals ``u_xx - d1 u_t - C1`` and ``v_xx - d2 v_t - C2`` on the ansatz.

    Time derivatives come from the reduced ODE.  With ``normalized=True``
    each residual is divided by ``1 + max|term|``.
    """
    dphi, dpsi = ode.derivatives(t_, phi, psi)
    a = ansatz.evaluate(t_, x_, phi, psi, dphi, dpsi)
    pt = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (t_, x_, a["u"], a["v"])))
    out = []
    for w, fam, C in (("u", sys.d1, sys.C1), ("v", sys.d2, sys.C2)):
        terms = np.stack(np.broadcast_arrays(
            a[f"{w}_xx"], -calc.evaluate(fam.d, pt) * a[f"{w}_t"], -calc.evaluate(C, pt)))
        r = terms.sum(axis=0)
        out.append(np.abs(r) / (1.0 + np.max(np.abs(terms), axis=0)) if normalized else r)
    return tuple(out)


def table1_triple(row: int, params: dict | None = None):
    """``(system, ansatz, reduced ODE)`` for a tabulated reduction row (1-4)."""
    if row not in (1, 2, 3, 4):
        raise InvalidParams("row must be 1, 2, 3 or 4")
    p = dict(params or {})
    p["d1"] = "exp" if row in (1, 2) else "power"
    p["mu"] = 4.0 if row in (1, 3) else -4.0
    ans = build_ansatz(f"table1-row{row}", {k: val for k, val in p.items()
                                            if k in ("d1", "beta", "mu", "alpha")})
    sys = catalog_system("T1-II", p)
    return sys, ans, reduce(sys, ans)


def c3_triple(params: dict | None = None, system_id: str = "S-c2"):
    """``(system, ansatz, reduced ODE)`` for the exponential ansatz."""
    p = dict(params or {})
    sys = catalog_system(system_id, p)
    beta = sys.d1.params.get("beta", p.get("beta", 2.0))
    ans = build_ansatz("c3", {"d1": "power" if sys.d1.kind == POWER else "exp", "beta": beta})
    return sys, ans, reduce(sys, ans)


# ---------------------------------------------------------------------------
# integration and closed form
# ---------------------------------------------------------------------------

def integrate(ode, init, t_span, rtol: float = 1e-9, atol: float = 1e-12, **kw) -> Trajectory:
    """Integrate a reduced system (or any ``fun(t, y)``) from ``init = (phi0, psi0)``.

    Returns a :class:`Trajectory` with termination ``Completed``,
    ``BlowUpDetected`` (with extrapolated ``t_star``) or ``DomainExit``.
    """
    fun = ode if callable(ode) else ode.__call__
    if isinstance(ode, ReducedODESystem):
        ode.derivatives(t_span[0], init[0], init[1])  # domain check of the initial state
    return integrate_ivp(fun, t_span, init, rtol=rtol, atol=atol, **kw)


def _c6_params(params):
    p = {"alpha1": 1.0, "alpha2": 1.0, "beta": 2.0, "k": 1.0, "lambda1": 1.0, "t0": 0.0,
         **(params or {})}
    gamma = 4.0 * p["alpha2"] + p["beta"] * p["alpha1"]
    if gamma * p["k"] == 0.0:
        raise InvalidParams("(4 alpha2 + beta alpha1) k != 0 required")
    if p["lambda1"] <= 0.0 and not float(p["beta"] * p["k"]).is_integer():
        raise InvalidParams("lambda1 > 0 required for a non-integer beta*k")
    return p, gamma


def c6_argument(params: dict, t_):
    """``A = (4 alpha2 + beta alpha1) k lambda1^(beta k) (t - t0)``."""
    p, gamma = _c6_params(params)
    return gamma * p["k"] * p["lambda1"] ** (p["beta"] * p["k"]) * (np.asarray(t_, float) - p["t0"])


def closed_form_c6(params: dict, t_):
    """General solution ``(phi, psi)`` of the reduced system with power-law profiles.

    ``phi = lambda1 A^(-alpha1/(gamma k))``, ``psi = A^(-alpha2/(gamma k))`` with
    ``A`` from :func:`c6_argument` and ``gamma = 4 alpha2 + beta alpha1``.

    Raises
    ------
    DomainError
        ``A <= 0`` at some requested time.
    """
    p, gamma = _c6_params(params)
    A = c6_argument(p, t_)
    if np.any(A <= 0.0):
        raise DomainError("closed form needs a positive base (4 alpha2 + beta alpha1) k lambda1^(beta k) (t - t0)")
    gk = gamma * p["k"]
    return p["lambda1"] * A ** (-p["alpha1"] / gk), A ** (-p["alpha2"] / gk)


def power_reduced_system(params: dict) -> ReducedODESystem:
    """Reduced system with ``f = alpha1 chi^k``, ``g = alpha2 chi^k``, ``chi = phi^beta psi^4``."""
    from .diffusivity import power_profile
    p, _ = _c6_params(params)
    return ReducedODESystem("S-c8", "c3", "power", {"f": -1.0, "s1": 0.0, "g": -1.0, "s2": 0.0},
                            power_profile(p["alpha1"], p["k"]), power_profile(p["alpha2"], p["k"]),
                            float(p["beta"]))
