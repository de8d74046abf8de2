"""Closed-form exact solution families, the power change of variables and blow-up regimes."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import calc
from .calc import Expr, Var, exp
from .catalog import (PhysicalRDSystem, RDSystem, catalog_physical, catalog_system,
                      physical_residual, resolve_params, system_residual)
from .diffusivity import constant_profile, power_law
from .errors import BoundaryCase, DomainError, InvalidParams

t, x, u, v = Var("t"), Var("x"), Var("u"), Var("v")

FAMILY_IDS = ("C9", "C14", "PlaneWave", "PlaneWaveUV")


class Regime(str, Enum):
    BOTH_BLOW_UP = "BothBlowUp"
    U_BLOWS_V_VANISHES = "UBlowsVVanishes"
    V_BLOWS_U_VANISHES = "VBlowsUVanishes"
    BOTH_VANISH = "BothVanish"
    GLOBAL = "Global"


@dataclass(frozen=True)
class Separable:
    """Factorised component ``P (c (t - t0))^a e^(lam t) e^(b x)``; ``c = 0`` drops the power."""

    P: float
    c: float
    t0: float
    a: float
    lam: float
    b: float

    def __call__(self, t_, x_):
        t_ = np.asarray(t_, dtype=float)
        base = 1.0 if self.c == 0.0 else (self.c * (t_ - self.t0)) ** self.a
        return self.P * base * np.exp(self.lam * t_ + self.b * np.asarray(x_, dtype=float))


@dataclass(frozen=True)
class ExactSolutionFamily:
    """Closed-form solution ``(first, second)`` of a catalogued system.

    Attributes
    ----------
    family_id : str
        ``"C9"`` (variables ``u, v`` on ``S-c8``), ``"C14"`` (``U, V`` on
        ``S-c13``), ``"PlaneWave"`` (``u, v`` on ``S-c2`` with constant
        profiles) or ``"PlaneWaveUV"`` (its image in ``U, V``).
    params : dict
        Fully resolved parameters including ``lambda1`` and ``t0``.
    gamma : float
        ``4 alpha2 + beta alpha1`` (equal to ``kappa alpha1* + 4/3 alpha2*``).
    first, second : Expr
        Components as expression trees in ``t`` and ``x``.
    """

    family_id: str
    params: dict
    gamma: float
    first: Expr
    second: Expr
    names: tuple = ("u", "v")
    separable: tuple | None = None
    variant: str = "verified"
    meta: dict = field(default_factory=dict)

    @property
    def argument_sign(self) -> float:
        """Sign of ``A / (t - t0)``; valid times satisfy ``sign * (t - t0) > 0``."""
        if self.family_id.startswith("PlaneWave"):
            return 0.0
        p = self.params
        return math.copysign(1.0, self.gamma * p["k"] * p["lambda1"] ** (p["beta"] * p["k"]))

    def check_valid(self, t_) -> None:
        s = self.argument_sign
        if s == 0.0:
            return
        if np.any(s * (np.asarray(t_, dtype=float) - self.params["t0"]) <= 0.0):
            raise DomainError("time outside the family's validity set (non-positive power base or t = t0)")

    def system(self):
        """The system this family solves."""
        p = self.params
        if self.family_id == "C9":
            return catalog_system("S-c8", {k: p[k] for k in ("beta", "alpha1", "alpha2", "k")})
        if self.family_id == "C14":
            return catalog_physical("S-c13", {k: p[k] for k in ("beta", "alpha1", "alpha2", "k")}
                                    | {"variant": self.variant})
        if self.family_id == "PlaneWave":
            return catalog_system("S-c2", {"beta": p["beta"], "f": constant_profile(p["alpha1"]),
                                           "g": constant_profile(p["alpha2"])})
        return plane_wave_physical(p)

    def to_csv(self, path, ts, xs) -> None:
        """Write ``t, x, first, second`` on the tensor grid ``ts x xs``."""
        T, X = np.meshgrid(np.asarray(ts, float), np.asarray(xs, float), indexing="ij")
        vals = eval_family(self, T.ravel(), X.ravel())
        a, b = self.names
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", a.upper() if a.islower() else a, b.upper() if b.islower() else b])
            for row in zip(T.ravel(), X.ravel(), vals[a], vals[b]):
                w.writerow([f"{z:.17g}" for z in row])


def _base_params(params, keys):
    p = {"lambda1": 1.0, "t0": 0.0, **(params or {})}
    extra = {k: float(p.pop(k)) for k in ("lambda1", "t0")}
    lam_base = p.pop("lambda_base", None)
    if extra["lambda1"] <= 0.0:
        raise InvalidParams("lambda1 > 0 required")
    unknown = set(p) - set(keys)
    if unknown:
        raise InvalidParams(f"unknown family parameter(s) {sorted(unknown)}")
    return p, extra, lam_base


def c9_family(params: dict | None = None) -> ExactSolutionFamily:
    """Two-parameter family on ``S-c8``.

    ``u = lambda1 A^(-alpha1/(gamma k)) e^(-4x/beta)``, ``v = A^(-alpha2/(gamma k)) e^x``
    with ``A = gamma k lambda1^(beta k) (t - t0)``.  ``lambda_base`` replaces
    ``lambda1`` inside ``A`` only (used for negative controls).
    """
    p, extra, lam_base = _base_params(params, ("beta", "alpha1", "alpha2", "k"))
    r = resolve_params("S-c8", p)
    beta, a1, a2, k = r["beta"], r["alpha1"], r["alpha2"], r["k"]
    lam, t0 = extra["lambda1"], extra["t0"]
    gamma = 4.0 * a2 + beta * a1
    lb = lam if lam_base is None else float(lam_base)
    c = gamma * k * lb ** (beta * k)
    A = c * (t - t0)
    gk = gamma * k
    first = lam * A ** (-a1 / gk) * exp((-4.0 / beta) * x)
    second = A ** (-a2 / gk) * exp(x)
    sep = (Separable(lam, c, t0, -a1 / gk, 0.0, -4.0 / beta), Separable(1.0, c, t0, -a2 / gk, 0.0, 1.0))
    full = {"beta": beta, "alpha1": a1, "alpha2": a2, "k": k, **extra}
    return ExactSolutionFamily("C9", full, gamma, first, second, ("u", "v"), sep)


def c14_family(params: dict | None = None, variant: str = "verified") -> ExactSolutionFamily:
    """Family on the physical power-law system ``S-c13``.

    ``U = lambda1^(beta+1) A^(-alpha1*/(gamma k)) e^(-4x/kappa)`` and
    ``V = A^(alpha2*/(gamma k)) e^(-3x)``: the image of :func:`c9_family`
    under ``U = u^(beta+1)``, ``V = v^-3``.  ``variant="printed"`` uses the
    published form ``U = lambda1 A^(-alpha1*/(gamma k)) ...``,
    ``V = A^(-alpha2*/(gamma k)) ...``, which does not solve ``S-c13``.
    """
    if variant not in ("verified", "printed"):
        raise InvalidParams("variant must be 'verified' or 'printed'")
    p, extra, lam_base = _base_params(params, ("beta", "kappa", "alpha1", "alpha2", "alpha1s",
                                               "alpha2s", "k"))
    r = resolve_params("S-c13", p)
    beta, kappa, k = r["beta"], r["kappa"], r["k"]
    a1s, a2s = r["alpha1s"], r["alpha2s"]
    lam, t0 = extra["lambda1"], extra["t0"]
    gamma = kappa * a1s + 4.0 * a2s / 3.0
    lb = lam if lam_base is None else float(lam_base)
    c = gamma * k * lb ** (beta * k)
    A = c * (t - t0)
    gk = gamma * k
    if variant == "verified":
        P, aV = lam ** (beta + 1.0), a2s / gk
    else:
        P, aV = lam, -a2s / gk
    first = P * A ** (-a1s / gk) * exp((-4.0 / kappa) * x)
    second = A ** aV * exp(-3.0 * x)
    sep = (Separable(P, c, t0, -a1s / gk, 0.0, -4.0 / kappa), Separable(1.0, c, t0, aV, 0.0, -3.0))
    full = {"beta": beta, "kappa": kappa, "alpha1": r["alpha1"], "alpha2": r["alpha2"],
            "alpha1s": a1s, "alpha2s": a2s, "k": k, **extra}
    return ExactSolutionFamily("C14", full, gamma, first, second, ("U", "V"), sep, variant)


def plane_wave_family(params: dict | None = None) -> ExactSolutionFamily:
    """``u = lambda1 e^(-alpha1 t) e^(-4x/beta)``, ``v = e^(-alpha2 t) e^x`` (the ``k = 0`` case)."""
    p, extra, _ = _base_params(params, ("beta", "alpha1", "alpha2", "k"))
    p = {"beta": 2.0, "alpha1": 1.0, "alpha2": 1.0, **p}
    if p.pop("k", 0.0) != 0.0:
        raise InvalidParams("plane waves correspond to k = 0")
    beta, a1, a2 = (float(p[k]) for k in ("beta", "alpha1", "alpha2"))
    if beta in (0.0, -4.0):
        raise InvalidParams("beta != 0 and beta != -4 required")
    lam = extra["lambda1"]
    first = lam * exp(-a1 * t) * exp((-4.0 / beta) * x)
    second = exp(-a2 * t) * exp(x)
    sep = (Separable(lam, 0.0, 0.0, 0.0, -a1, -4.0 / beta), Separable(1.0, 0.0, 0.0, 0.0, -a2, 1.0))
    full = {"beta": beta, "alpha1": a1, "alpha2": a2, "k": 0.0, **extra}
    return ExactSolutionFamily("PlaneWave", full, 4.0 * a2 + beta * a1, first, second,
                               ("u", "v"), sep)


def plane_wave_uv_family(params: dict | None = None) -> ExactSolutionFamily:
    """Image of :func:`plane_wave_family` under ``U = u^(beta+1)``, ``V = v^-3``."""
    pw = plane_wave_family(params)
    p = pw.params
    beta, a1s, a2s = p["beta"], (p["beta"] + 1.0) * p["alpha1"], 3.0 * p["alpha2"]
    kappa = beta / (beta + 1.0)
    P = p["lambda1"] ** (beta + 1.0)
    first = P * exp(-a1s * t) * exp((-4.0 / kappa) * x)
    second = exp(a2s * t) * exp(-3.0 * x)
    sep = (Separable(P, 0.0, 0.0, 0.0, -a1s, -4.0 / kappa), Separable(1.0, 0.0, 0.0, 0.0, a2s, -3.0))
    full = {**p, "kappa": kappa, "alpha1s": a1s, "alpha2s": a2s}
    return ExactSolutionFamily("PlaneWaveUV", full, pw.gamma, first, second, ("U", "V"), sep)


def plane_wave_physical(params: dict) -> PhysicalRDSystem:
    """Physical system solved by :func:`plane_wave_uv_family` (the ``k = 0`` member of ``S-c13``)."""
    beta = params["beta"]
    kappa = beta / (beta + 1.0)
    a1s, a2s = (beta + 1.0) * params["alpha1"], 3.0 * params["alpha2"]
    src = 16.0 / (beta * kappa)
    F = -a1s * u - src * u ** (1.0 - kappa)
    G = a2s * v + 3.0 * v ** (-1.0 / 3.0)
    F_terms = ((-a1s, 1.0, 0.0), (-src, 1.0 - kappa, 0.0))
    G_terms = ((a2s, 0.0, 1.0), (3.0, 0.0, -1.0 / 3.0))
    p = {"beta": beta, "kappa": kappa, "alpha1s": a1s, "alpha2s": a2s, "k": 0.0}
    return PhysicalRDSystem("S-c13[k=0]", power_law(-kappa), power_law(-4.0 / 3.0, var="v"),
                            F, G, p, {}, F_terms, G_terms)


def make_family(family_id: str, params: dict | None = None, variant: str = "verified"):
    """Dispatch on :data:`FAMILY_IDS`."""
    if family_id == "C9":
        return c9_family(params)
    if family_id == "C14":
        return c14_family(params, variant)
    if family_id == "PlaneWave":
        return plane_wave_family(params)
    if family_id == "PlaneWaveUV":
        return plane_wave_uv_family(params)
    raise InvalidParams(f"unknown family {family_id!r}; known: {', '.join(FAMILY_IDS)}")


def eval_family(family: ExactSolutionFamily, t_, x_) -> dict:
    """Components and their exact ``_t``, ``_x``, ``_xx`` derivatives.

    Keys are the component names (``u, v`` or ``U, V``) and e.g. ``"U_t"``.

    Raises
    ------
    DomainError
        ``(t, x)`` outside the validity set.
    """
    family.check_valid(t_)
    pt = np.broadcast_arrays(np.asarray(t_, float), np.asarray(x_, float), 0.0, 0.0)
    out = {}
    for name, e in zip(family.names, (family.first, family.second)):
        T = calc.taylor_eval(e, pt)
        out[name] = T.val
        out[f"{name}_t"] = T.d("t")
        out[f"{name}_x"] = T.d("x")
        out[f"{name}_xx"] = T.d("x", "x")
    return out


def sample_valid(family: ExactSolutionFamily, n: int, rng: np.random.Generator,
                 span=(0.05, 1.0), x_range=(-1.0, 1.0)):
    """``n`` random ``(t, x)`` on the valid side of ``t0``."""
    s = family.argument_sign
    tau = rng.uniform(*span, size=n)
    t0 = family.params["t0"]
    t_ = t0 + (s if s != 0.0 else 1.0) * tau
    return t_, rng.uniform(*x_range, size=n)


def map_solution_c10(u_, v_, beta):
    """``U = u^(beta+1)``, ``V = v^-3`` for positive ``u, v``."""
    u_, v_ = np.asarray(u_, float), np.asarray(v_, float)
    if np.any(u_ <= 0) or np.any(v_ <= 0):
        raise DomainError("u > 0 and v > 0 required")
    return u_ ** (beta + 1.0), v_ ** -3.0


def inverse_c10(U_, V_, beta):
    """``u = U^(1/(beta+1))``, ``v = V^(-1/3)`` for positive ``U, V``."""
    U_, V_ = np.asarray(U_, float), np.asarray(V_, float)
    if np.any(U_ <= 0) or np.any(V_ <= 0):
        raise DomainError("U > 0 and V > 0 required")
    if beta == -1.0:
        raise InvalidParams("beta != -1 required")
    return U_ ** (1.0 / (beta + 1.0)), V_ ** (-1.0 / 3.0)


def solution_residual(system, family: ExactSolutionFamily, t_, x_, normalized: bool = True):
    """Residuals of ``system`` (default: the family's own) on the exact family.

    For an :class:`RDSystem` the residuals are ``u_xx - d1 u_t - C1`` etc.;
    for a :class:`PhysicalRDSystem` ``U_t - (D1 U_x)_x - F`` etc.  With
    ``normalized=True`` each is divided by ``1 + max|term|``.
    """
    family.check_valid(t_)
    system = family.system() if system is None else system
    fn = physical_residual if isinstance(system, PhysicalRDSystem) else system_residual
    if not isinstance(system, (PhysicalRDSystem, RDSystem)):
        raise InvalidParams("system must be an RDSystem or a PhysicalRDSystem")
    r1, r2, s1, s2 = fn(system, family.first, family.second, np.asarray(t_, float),
                        np.asarray(x_, float))
    if normalized:
        return np.abs(r1) / s1, np.abs(r2) / s2
    return r1, r2


# ---------------------------------------------------------------------------
# blow-up regimes
# ---------------------------------------------------------------------------

def _gamma(alpha1s, alpha2s, kappa, k):
    gk = (kappa * alpha1s + 4.0 * alpha2s / 3.0) * k
    if gk == 0.0:
        raise InvalidParams("gamma k != 0 required (gamma = kappa alpha1* + 4/3 alpha2*)")
    return gk


_BY_SIGNS = {(1, 1): Regime.BOTH_BLOW_UP, (1, -1): Regime.U_BLOWS_V_VANISHES,
             (-1, 1): Regime.V_BLOWS_U_VANISHES, (-1, -1): Regime.BOTH_VANISH}


def classify_regime(alpha1s: float, alpha2s: float, kappa: float, k: float, t0: float) -> Regime:
    """Regime from the signs of ``alpha1* gamma k``, ``alpha2* gamma k`` and ``t0``.

    ``t0 < 0`` gives ``Global``; for ``t0 > 0`` a positive product means the
    component blows up and a negative one that it vanishes.

    Raises
    ------
    InvalidParams
        ``gamma k = 0``.
    BoundaryCase
        ``t0 = 0`` or a vanishing product.
    """
    gk = _gamma(alpha1s, alpha2s, kappa, k)
    if t0 == 0.0:
        raise BoundaryCase("t0 = 0 is a boundary case of the regime list")
    if t0 < 0.0:
        return Regime.GLOBAL
    p1, p2 = alpha1s * gk, alpha2s * gk
    if p1 == 0.0 or p2 == 0.0:
        raise BoundaryCase("alpha1* gamma k = 0 or alpha2* gamma k = 0 is a boundary case")
    return _BY_SIGNS[(int(np.sign(p1)), int(np.sign(p2)))]


def regime_from_exponents(family: ExactSolutionFamily) -> Regime | None:
    """Regime read off the exponents of ``A`` in the family's components.

    A component ``~ A^a`` blows up as ``A -> 0`` for ``a < 0`` and vanishes
    for ``a > 0``.  For ``t0 < 0`` the result is ``Global`` when the family
    is real for all ``t >= 0`` and ``None`` when it is real only for
    ``t < t0``.
    """
    if family.separable is None or family.family_id.startswith("PlaneWave"):
        raise InvalidParams("regimes are defined for the C9/C14 families")
    t0 = family.params["t0"]
    if t0 == 0.0:
        raise BoundaryCase("t0 = 0 is a boundary case of the regime list")
    if t0 < 0.0:
        return Regime.GLOBAL if family.argument_sign > 0 else None
    a1, a2 = family.separable[0].a, family.separable[1].a
    if a1 == 0.0 or a2 == 0.0:
        raise BoundaryCase("a component does not depend on t")
    return _BY_SIGNS[(int(-np.sign(a1)), int(-np.sign(a2)))]


def probe_regime(family: ExactSolutionFamily, x0: float = 0.0,
                 offsets=(0.1, 0.01, 0.001), horizon=(0.0, 1.0, 10.0, 100.0)) -> Regime | None:
    """Numeric limit probe of a family's behaviour near ``t0``.

    For ``t0 > 0`` each component is evaluated at ``t0 +- offsets`` on the valid
    side: monotone growth means blow-up, monotone decay towards zero means
    vanishing.  For ``t0 < 0`` the family must be finite at every time in
    ``horizon``.  Returns ``None`` when the behaviour fits no regime.
    """
    t0 = family.params["t0"]
    if t0 < 0.0:
        try:
            vals = eval_family(family, np.array(horizon), np.full(len(horizon), x0))
        except DomainError:
            return None
        ok = all(np.all(np.isfinite(vals[n])) for n in family.names)
        return Regime.GLOBAL if ok else None
    s = family.argument_sign
    ts = t0 + s * np.array(offsets)
    vals = eval_family(family, ts, np.full(len(ts), x0))
    signs = []
    for n in family.names:
        w = np.abs(vals[n])
        if np.all(np.diff(w) > 0):
            signs.append(1)
        elif np.all(np.diff(w) < 0) and w[-1] < w[0]:
            signs.append(-1)
        else:
            return None
    return _BY_SIGNS[tuple(signs)]


def sign_grid(kappas=(2.0 / 3.0, 0.75), magnitudes=(3.0, 3.0, 1.0, 1.0)):
    """Cells ``(alpha1*, alpha2*, kappa, k, t0)`` of the exhaustive sign grid."""
    m1, m2, mk, mt = magnitudes
    for kappa, s1, s2, sk, st in itertools.product(kappas, (1, -1), (1, -1), (1, -1), (1, -1)):
        yield s1 * m1, s2 * m2, kappa, sk * mk, st * mt
