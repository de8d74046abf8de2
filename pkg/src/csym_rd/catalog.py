"""Catalogue of reaction-diffusion systems and their conditional symmetry operators.

Systems are stored in the post-Kirchhoff form

    u_xx = d1(u) u_t + C1(u, v),    v_xx = d2(v) v_t + C2(u, v),

and operators as Q = xi0 d_t + xi d_x + eta1 d_u + eta2 d_v.  Every
coefficient is a :class:`csym_rd.calc.Expr`, so exact derivatives are always
available.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import calc
from .calc import Const, Expr, Var, cos, exp, log, sin
from .diffusivity import (DiffusivityFamily, ReactionProfile, exponential, implicit_case3,
                          power_law, power_profile)
from .errors import InvalidParams

u, v, t, x = Var("u"), Var("v"), Var("t"), Var("x")


@dataclass(frozen=True, eq=False)
class RDSystem:
    """System ``u_xx = d1 u_t + C1``, ``v_xx = d2 v_t + C2``."""

    catalog_id: str
    d1: DiffusivityFamily
    d2: DiffusivityFamily
    C1: Expr
    C2: Expr
    profile_f: ReactionProfile | None = None
    profile_g: ReactionProfile | None = None
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def replace(self, **changes) -> "RDSystem":
        return dataclasses.replace(self, **changes)

    def __repr__(self):
        return f"RDSystem({self.catalog_id!r}, params={self.params})"


@dataclass(frozen=True, eq=False)
class PhysicalRDSystem:
    """System ``U_t = (D1(U) U_x)_x + F(U, V)``, ``V_t = (D2(V) V_x)_x + G(U, V)``.

    ``D1``/``D2`` are written in the variable slots ``u``/``v`` and ``F``/``G``
    are expressions in ``(u, v)`` standing for ``(U, V)``.  ``F_terms`` and
    ``G_terms`` optionally list the reactions as monomials
    ``(coef, pU, pV)``, enabling the compiled simulator path.
    """

    catalog_id: str
    D1: DiffusivityFamily
    D2: DiffusivityFamily
    F: Expr
    G: Expr
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    F_terms: tuple | None = None
    G_terms: tuple | None = None

    def __repr__(self):
        return f"PhysicalRDSystem({self.catalog_id!r}, params={self.params})"


@dataclass(frozen=True, eq=False)
class SymmetryOperator:
    """Operator ``Q = xi0 d_t + xi d_x + eta1 d_u + eta2 d_v``.

    ``manifold`` names the dependent variable whose invariant-surface
    condition defines the first-type manifold (``"U"`` for ``Q(u) = 0``,
    ``"V"`` for ``Q(v) = 0``).
    """

    catalog_id: str
    xi0: Expr
    xi: Expr
    eta1: Expr
    eta2: Expr
    params: dict = field(default_factory=dict)
    manifold: str = "U"

    def replace(self, **changes) -> "SymmetryOperator":
        return dataclasses.replace(self, **changes)

    def scaled(self, c: float) -> "SymmetryOperator":
        return self.replace(xi0=c * self.xi0, xi=c * self.xi, eta1=c * self.eta1,
                            eta2=c * self.eta2)

    def __repr__(self):
        return f"SymmetryOperator({self.catalog_id!r}, params={self.params})"


ZERO = Const(0.0)


def translation_x(catalog_id: str = "Q-translation-x") -> SymmetryOperator:
    """The Lie operator ``d_x``."""
    return SymmetryOperator(catalog_id, ZERO, Const(1.0), ZERO, ZERO, {}, "U")


# ---------------------------------------------------------------------------
# parameter schema
# ---------------------------------------------------------------------------

_PROFILE = {"alpha1": 1.0, "alpha2": -0.5, "k": 0.5}

SCHEMA: dict[str, dict] = {
    "T1-I": {"d1": "power", "beta": 2.0, **_PROFILE},
    "T1-I-scaled": {"d1": "power", "beta": 2.0, "mu": 16.0, "delta2": 1.0, **_PROFILE},
    "T1-II": {"d1": "power", "beta": 3.0, "mu": 4.0, "alpha": 1.0, **_PROFILE},
    "T1-III": {"mu": 4.0, "alpha": 1.0, "sign": 1.0, "u0": 1.0, "h0": 1.0, "h0prime": 0.0,
               "u_min": 0.25, "u_max": 4.0, **_PROFILE},
    "T2-I": {"d1": "power", "beta": 2.0, "alpha": 1.0, **_PROFILE},
    "T2-II": {"d1": "power", "beta": 2.0, **_PROFILE},
    "T2-III": {"d1": "power", "beta": 2.0, "alpha": 1.0, "variant": "verified", **_PROFILE},
    "S-c2": {"beta": 2.0, **_PROFILE},
    "S-c8": {"beta": 2.0, "alpha1": 1.0, "alpha2": 1.0, "k": 1.0},
    "S-c13": {"beta": 2.0, "kappa": None, "alpha1": 1.0, "alpha2": 1.0, "alpha1s": None,
              "alpha2s": None, "k": 1.0, "variant": "verified"},
}

DESCRIPTIONS = {
    "T1-I": "d1 arbitrary (power or exponential), d2 = v^-4, operator e^{2x}(d_x - 4h d_u + v d_v)",
    "T1-I-scaled": "unnormalised exponential-xi form with parameters mu > 0 and delta2",
    "T1-II": "d1 = u^beta or e^u, xi of exponential/sine type, mu-dependent sources",
    "T1-III": "d1 defined by 8 h h'' = 4 h' + 1 with h = d1/d1_u, xi squared-exponential/x^2/sine",
    "T2-I": "d2 = 1, C2 = v g(u) + alpha v ln v, operator e^{-alpha t}(2 d_x + alpha x v d_v)",
    "T2-II": "d2 = 1, C2 = v g(u), operator -2t d_x + x v d_v",
    "T2-III": "d2 = 1, C2 = e^v g(u) + alpha^2 e^{2v}, operator d_x + alpha e^v d_v",
    "S-c2": "power-law instance of T1-I: u_xx = u^beta u_t + f u^{beta+1} + 16u/beta^2",
    "S-c8": "S-c2 with f = alpha1 w^k, g = alpha2 w^k, w = v^4 u^beta",
    "S-c13": "physical power-law form U_t = (U^-kappa U_x)_x + ... obtained from S-c8",
}

OPERATOR_IDS = ("Q-T1-I", "Q-T1-I-scaled", "Q-T1-II", "Q-T1-III", "Q-T2-I", "Q-T2-II",
                "Q-T2-III")

# canonical operator of each system
PAIRING = {"T1-I": "Q-T1-I", "T1-I-scaled": "Q-T1-I-scaled", "T1-II": "Q-T1-II",
           "T1-III": "Q-T1-III", "T2-I": "Q-T2-I", "T2-II": "Q-T2-II", "T2-III": "Q-T2-III",
           "S-c2": "Q-T1-I", "S-c8": "Q-T1-I", "S-c13": "Q-T1-I"}

OBJECT_KEYS = ("f", "g")


def system_ids() -> tuple:
    return tuple(SCHEMA)


def _float(params, key):
    try:
        return float(params[key])
    except (TypeError, ValueError):
        raise InvalidParams(f"parameter {key!r} must be a number, got {params[key]!r}") from None


def resolve_params(catalog_id: str, params: dict | None = None) -> dict:
    """Merge ``params`` with the defaults of ``catalog_id`` and validate them.

    Raises
    ------
    InvalidParams
        Unknown id or key, or a violated constraint (the message names it).
    """
    if catalog_id not in SCHEMA:
        raise InvalidParams(f"unknown catalogue id {catalog_id!r}; known: {', '.join(SCHEMA)}")
    params = dict(params or {})
    allowed = set(SCHEMA[catalog_id]) | set(OBJECT_KEYS)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise InvalidParams(f"unknown parameter(s) {unknown} for {catalog_id}; "
                            f"allowed: {sorted(SCHEMA[catalog_id])}")
    if catalog_id == "S-c13" and params.get("kappa") is not None and params.get("beta") is not None:
        kb = float(params["kappa"]) / (1.0 - float(params["kappa"]))
        if not math.isclose(kb, float(params["beta"])):
            raise InvalidParams("beta and kappa are inconsistent (kappa = beta/(beta+1))")
    p = dict(SCHEMA[catalog_id])
    p.update({k: val for k, val in params.items() if val is not None})
    for key, val in list(p.items()):
        if key in ("d1", "variant") or key in OBJECT_KEYS or val is None:
            continue
        p[key] = _float(p, key)
    _validate(catalog_id, p)
    return p


def _validate(cid: str, p: dict) -> None:
    if "d1" in p and p["d1"] not in ("power", "exp"):
        raise InvalidParams(f"d1 must be 'power' or 'exp', got {p['d1']!r}")
    if "variant" in p and p["variant"] not in ("verified", "printed"):
        raise InvalidParams("variant must be 'verified' or 'printed'")
    beta = p.get("beta")
    if cid in ("T1-I", "T1-I-scaled", "T1-II") and p["d1"] == "power":
        if beta == -4.0:
            raise InvalidParams(f"{cid} requires beta != -4 (d1 = u^-4 is excluded)")
        if beta == 0.0:
            raise InvalidParams(f"{cid} requires beta != 0 (non-constant d1)")
    if cid.startswith("T2") and p["d1"] == "power" and beta == 0.0:
        raise InvalidParams(f"{cid} requires beta != 0 (non-constant d1)")
    if cid in ("T1-II", "T1-III", "T1-I-scaled"):
        mu = p["mu"]
        if cid == "T1-II" and mu == 0.0:
            raise InvalidParams("T1-II requires mu != 0")
        if cid == "T1-I-scaled" and not mu > 0:
            raise InvalidParams("T1-I-scaled requires mu > 0")
        if cid in ("T1-II", "T1-III") and mu > 0 and p["alpha"] == 0.0:
            raise InvalidParams(f"{cid} with mu > 0 requires alpha != 0")
    if cid == "T1-I-scaled" and not p["delta2"] > 0:
        raise InvalidParams("T1-I-scaled requires delta2 > 0")
    if cid == "T1-III":
        if p["h0prime"] == -0.25:
            raise InvalidParams("T1-III requires h0prime != -1/4")
        if p["mu"] < 0 and p["sign"] not in (1.0, -1.0):
            raise InvalidParams("T1-III with mu < 0 requires sign = +1 or -1")
    if cid in ("T2-I", "T2-III") and p["alpha"] == 0.0:
        raise InvalidParams(f"{cid} requires alpha != 0")
    if cid in ("S-c2", "S-c8") and beta in (0.0, -4.0):
        raise InvalidParams(f"{cid} requires beta != 0 and beta != -4")
    if cid == "S-c8":
        _check_c8(p)
    if cid == "S-c13":
        _resolve_c13(p)


def _check_c8(p):
    if p["k"] == 0.0:
        raise InvalidParams("k != 0 required (k = 0 gives the plane-wave case)")
    if 4 * p["alpha2"] + p["beta"] * p["alpha1"] == 0.0:
        raise InvalidParams("alpha1 != -4 alpha2 / beta required (plane-wave case)")


def _resolve_c13(p):
    if p.get("kappa") is not None:
        kappa = p["kappa"]
        if kappa == 1.0:
            raise InvalidParams("kappa != 1 required")
        p["beta"] = kappa / (1.0 - kappa)
    beta = p["beta"]
    if beta in (0.0, -1.0):
        raise InvalidParams("S-c13 requires beta != 0 and beta != -1")
    p["kappa"] = beta / (beta + 1.0)
    if p.get("alpha1s") is not None:
        p["alpha1"] = p["alpha1s"] / (beta + 1.0)
    if p.get("alpha2s") is not None:
        p["alpha2"] = p["alpha2s"] / 3.0
    p["alpha1s"] = (beta + 1.0) * p["alpha1"]
    p["alpha2s"] = 3.0 * p["alpha2"]
    _check_c8(p)


def _profiles(p, argument_kind="omega"):
    f = p.get("f") or power_profile(p["alpha1"], p["k"], argument_kind)
    g = p.get("g") or power_profile(p["alpha2"], p["k"], argument_kind)
    return f, g


def _d1(p) -> DiffusivityFamily:
    return power_law(p["beta"]) if p["d1"] == "power" else exponential()


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------

def catalog_system(catalog_id: str, params: dict | None = None) -> RDSystem:
    """Build a catalogued system.

    Parameters
    ----------
    catalog_id : str
        One of :data:`SCHEMA`'s keys.
    params : dict, optional
        Overrides of the defaults in :data:`SCHEMA`.  ``f`` and ``g`` may be
        :class:`ReactionProfile` objects; otherwise ``f = alpha1*w**k`` and
        ``g = alpha2*w**k``.
    """
    p = resolve_params(catalog_id, params)
    if catalog_id == "S-c13":
        from .equivalence import kirchhoff_forward
        phys = catalog_physical("S-c13", params)
        from .equivalence import kirchhoff_maps
        # sampling box: image of U, V in [0.5, 2] under the substitution
        box = {}
        for fam, name, var in ((phys.D1, "u", "u"), (phys.D2, "v", "v")):
            fwd, _ = kirchhoff_maps(fam, var)
            ends = [float(calc.evaluate(fwd, (0.0, 0.0, w, w))) for w in (0.5, 2.0)]
            box[name] = (min(ends), max(ends))
        return kirchhoff_forward(phys).replace(catalog_id="S-c13", params=phys.params,
                                              metadata={**phys.metadata, "sample_box": box})
    builder = _BUILDERS[catalog_id]
    return builder(catalog_id, p)


def _t1_common(cid, p, d1, C1_of, mu_v, d2=None, meta=None):
    d2 = d2 or power_law(-4.0, var="v")
    f, g = _profiles(p)
    omega = v ** 4 * d1.d
    C1 = C1_of(d1, f.of(omega))
    C2 = v ** -3.0 * g.of(omega) + mu_v * v
    return RDSystem(cid, d1, d2, C1, C2, f, g, p, dict(meta or {}))


def _build_t1_i(cid, p):
    d1 = _d1(p)

    def C1_of(d, f_w):
        return (d.d ** 2 / d.d_u) * f_w + 16.0 * (1.0 - d.d * d.d_uu / d.d_u ** 2) * (d.d / d.d_u)

    return _t1_common(cid, p, d1, C1_of, 1.0)


def _build_t1_i_scaled(cid, p):
    d1 = _d1(p)
    mu = p["mu"]

    def C1_of(d, f_w):
        return (d.d ** 2 / d.d_u) * f_w + 4 * mu * (1.0 - d.d * d.d_uu / d.d_u ** 2) * (d.d / d.d_u)

    return _t1_common(cid, p, d1, C1_of, mu / 4.0, d2=power_law(-4.0, p["delta2"], var="v"))


def _build_t1_ii(cid, p):
    d1 = _d1(p)
    mu = p["mu"]

    def C1_of(d, f_w):
        return (d.d ** 2 / d.d_u) * (f_w + 4 * mu / d.d + 4 * mu * d.log_integral)

    return _t1_common(cid, p, d1, C1_of, mu / 4.0)


def _build_t1_iii(cid, p):
    d1 = implicit_case3(p["u0"], p["h0"], p["h0prime"], (p["u_min"], p["u_max"]))
    mu = p["mu"]

    def C1_of(d, f_w):
        return (d.d ** 2 / d.d_u) * (f_w + 1.5 * mu / d.d + 2 * mu * d.log_integral)

    return _t1_common(cid, p, d1, C1_of, mu / 4.0)


def _build_t2(cid, p):
    d1 = _d1(p)
    f, g = _profiles(p, "u")
    C1 = f.of(u)
    if cid == "T2-I":
        C2 = v * g.of(u) + p["alpha"] * v * log(v)
    elif cid == "T2-II":
        C2 = v * g.of(u)
    else:
        a = p["alpha"]
        coef = a if p["variant"] == "printed" else a * a
        C2 = exp(v) * g.of(u) + coef * exp(2 * v)
    return RDSystem(cid, d1, power_law(0.0, var="v"), C1, C2, f, g, p, {})


def _build_s_c2(cid, p):
    beta = p["beta"]
    f, g = _profiles(p)
    omega = v ** 4 * u ** beta
    C1 = f.of(omega) * u ** (beta + 1) + (16.0 / beta ** 2) * u
    C2 = g.of(omega) * v ** -3.0 + v
    meta = {"T1-I_profile_scale": beta,
            "note": "equals T1-I with d1 = u^beta and f_T1-I = beta * f"}
    return RDSystem(cid, power_law(beta), power_law(-4.0, var="v"), C1, C2, f, g, p, meta)


def _build_s_c8(cid, p):
    beta, k, a1, a2 = p["beta"], p["k"], p["alpha1"], p["alpha2"]
    C1 = a1 * u ** (1 + beta * (1 + k)) * v ** (4 * k) + (16.0 / beta ** 2) * u
    C2 = a2 * u ** (beta * k) * v ** (-3 + 4 * k) + v
    f, g = power_profile(a1, k), power_profile(a2, k)
    meta = {"gamma": 4 * a2 + beta * a1}
    return RDSystem(cid, power_law(beta), power_law(-4.0, var="v"), C1, C2, f, g, p, meta)


_BUILDERS = {"T1-I": _build_t1_i, "T1-I-scaled": _build_t1_i_scaled, "T1-II": _build_t1_ii,
             "T1-III": _build_t1_iii, "T2-I": _build_t2, "T2-II": _build_t2, "T2-III": _build_t2,
             "S-c2": _build_s_c2, "S-c8": _build_s_c8}


def catalog_physical(catalog_id: str = "S-c13", params: dict | None = None) -> PhysicalRDSystem:
    """Physical-form power-law system obtained from S-c8 by ``U = u^(beta+1)``, ``V = v^-3``.

    ``variant="printed"`` keeps the ``+16/(beta*kappa) U^(1-kappa)`` sign of
    the published simplified form; the default ``"verified"`` uses the sign
    produced by the substitution (``-16/(beta*kappa)``).
    """
    if catalog_id != "S-c13":
        raise InvalidParams(f"no physical form catalogued for {catalog_id!r}")
    p = resolve_params("S-c13", params)
    beta, kappa, k = p["beta"], p["kappa"], p["k"]
    a1s, a2s = p["alpha1s"], p["alpha2s"]
    src = 16.0 / (beta * kappa)
    sign = 1.0 if p["variant"] == "printed" else -1.0
    U, V = u, v
    F = -a1s * U * (U ** kappa * V ** (-4.0 / 3.0)) ** k + sign * src * U ** (1.0 - kappa)
    G = a2s * V * (U ** kappa * V ** (-4.0 / 3.0)) ** k + 3.0 * V ** (-1.0 / 3.0)
    F_terms = ((-a1s, 1.0 + kappa * k, -4.0 * k / 3.0), (sign * src, 1.0 - kappa, 0.0))
    G_terms = ((a2s, kappa * k, 1.0 - 4.0 * k / 3.0), (3.0, 0.0, -1.0 / 3.0))
    meta = {"kappa_four_thirds_case": bool(math.isclose(kappa, 4.0 / 3.0)),
            "gamma": kappa * a1s + 4.0 * a2s / 3.0}
    return PhysicalRDSystem("S-c13", power_law(-kappa), power_law(-4.0 / 3.0, var="v"), F, G,
                            p, meta, F_terms, G_terms)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def _xi_t1_ii(mu, alpha):
    if mu > 0:
        r = math.sqrt(mu)
        return exp(r * x) + alpha * exp(-r * x), r * (exp(r * x) - alpha * exp(-r * x))
    r = math.sqrt(-mu)
    return sin(r * x), r * cos(r * x)


def _xi_t1_iii(mu, alpha, sign):
    if mu == 0:
        return x ** 2, 2.0 * x
    if mu > 0:
        r = math.sqrt(mu) / 2.0
        E = exp(r * x) + alpha * exp(-r * x)
        return E ** 2, 2.0 * r * E * (exp(r * x) - alpha * exp(-r * x))
    r = math.sqrt(-mu)
    return sin(r * x) + sign, r * cos(r * x)


def catalog_operator(catalog_id: str, params: dict | None = None,
                     system: RDSystem | None = None) -> SymmetryOperator:
    """Build a catalogued operator.

    ``params`` follow the schema of the matching system id (the ``Q-`` prefix
    dropped); ``system`` may supply the diffusivity used in ``h = d1/d1_u``.
    """
    if catalog_id not in OPERATOR_IDS:
        raise InvalidParams(f"unknown operator id {catalog_id!r}; known: {', '.join(OPERATOR_IDS)}")
    sid = catalog_id[2:]
    if system is not None:
        p = {**system.params, **(params or {})}
        d1 = system.d1
    else:
        p = resolve_params(sid, params)
        if sid == "T1-III":
            d1 = implicit_case3(p["u0"], p["h0"], p["h0prime"], (p["u_min"], p["u_max"]))
        else:
            d1 = _d1(p)
    xi0 = ZERO
    keep = {k: val for k, val in p.items() if k not in OBJECT_KEYS}
    if sid in ("T1-I",):
        e2 = exp(2.0 * x)
        return SymmetryOperator(catalog_id, xi0, e2, -4.0 * e2 * d1.h, e2 * v, keep)
    if sid == "T1-I-scaled":
        r = math.sqrt(p["mu"])
        e = exp(r * x)
        return SymmetryOperator(catalog_id, xi0, e, -2.0 * r * e * d1.h, 0.5 * r * e * v, keep)
    if sid in ("T1-II", "T1-III"):
        if sid == "T1-II":
            xi, xi_x = _xi_t1_ii(p["mu"], p["alpha"])
        else:
            xi, xi_x = _xi_t1_iii(p["mu"], p["alpha"], p["sign"])
        return SymmetryOperator(catalog_id, xi0, xi, -2.0 * xi_x * d1.h, 0.5 * xi_x * v, keep)
    if sid == "T2-I":
        a = p["alpha"]
        e = exp(-a * t)
        return SymmetryOperator(catalog_id, xi0, 2.0 * e, ZERO, a * x * v * e, keep)
    if sid == "T2-II":
        return SymmetryOperator(catalog_id, xi0, -2.0 * t, ZERO, x * v, keep)
    a = p["alpha"]
    if p.get("variant") == "printed":
        return SymmetryOperator(catalog_id, xi0, Const(1.0), a * exp(u), ZERO, keep, "U")
    return SymmetryOperator(catalog_id, xi0, Const(1.0), ZERO, a * exp(v), keep, "V")


def catalog_pair(system_id: str, params: dict | None = None):
    """The system and its canonical operator."""
    sys = catalog_system(system_id, params)
    return sys, catalog_operator(PAIRING[system_id], system=sys)


# ---------------------------------------------------------------------------
# residuals of candidate solutions
# ---------------------------------------------------------------------------

def system_residual(sys: RDSystem, u_sol: Expr, v_sol: Expr, t_pts, x_pts):
    """``(u_xx - d1 u_t - C1, v_xx - d2 v_t - C2)`` for closed-form ``u(t, x)``, ``v(t, x)``.

    ``u_sol`` and ``v_sol`` are expressions in the variables ``t`` and ``x``.
    Returns the raw residuals and the scale ``1 + max|term|`` of each.
    """
    pt = (t_pts, x_pts, 0.0, 0.0)
    U = calc.taylor_eval(u_sol, pt)
    W = calc.taylor_eval(v_sol, pt)
    q = (t_pts, x_pts, U.val, W.val)
    d1, d2 = calc.evaluate(sys.d1.d, q), calc.evaluate(sys.d2.d, q)
    c1, c2 = calc.evaluate(sys.C1, q), calc.evaluate(sys.C2, q)
    terms1 = (U.d("x", "x"), d1 * U.d("t"), c1)
    terms2 = (W.d("x", "x"), d2 * W.d("t"), c2)
    r1 = terms1[0] - terms1[1] - terms1[2]
    r2 = terms2[0] - terms2[1] - terms2[2]
    s1 = 1.0 + np.max(np.abs(np.stack(terms1)), axis=0)
    s2 = 1.0 + np.max(np.abs(np.stack(terms2)), axis=0)
    return r1, r2, s1, s2


def physical_residual(phys: PhysicalRDSystem, U_sol: Expr, V_sol: Expr, t_pts, x_pts):
    """``(U_t - (D1 U_x)_x - F, V_t - (D2 V_x)_x - G)`` with scales, as :func:`system_residual`."""
    pt = (t_pts, x_pts, 0.0, 0.0)
    U = calc.taylor_eval(U_sol, pt)
    W = calc.taylor_eval(V_sol, pt)
    q = (t_pts, x_pts, U.val, W.val)
    D1 = calc.taylor_eval(phys.D1.d, q, order=1)
    D2 = calc.taylor_eval(phys.D2.d, q, order=1)
    F, G = calc.evaluate(phys.F, q), calc.evaluate(phys.G, q)
    terms1 = (U.d("t"), D1.d("u") * U.d("x") ** 2, D1.val * U.d("x", "x"), F)
    terms2 = (W.d("t"), D2.d("v") * W.d("x") ** 2, D2.val * W.d("x", "x"), G)
    r1 = terms1[0] - terms1[1] - terms1[2] - terms1[3]
    r2 = terms2[0] - terms2[1] - terms2[2] - terms2[3]
    s1 = 1.0 + np.max(np.abs(np.stack(terms1)), axis=0)
    s2 = 1.0 + np.max(np.abs(np.stack(terms2)), axis=0)
    return r1, r2, s1, s2
