"""Equivalence transformations of the system class and the Kirchhoff substitution."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .calc import Expr, Var, exp, log
from .catalog import PhysicalRDSystem, RDSystem, SymmetryOperator
from .diffusivity import (EXPONENTIAL, POWER, DiffusivityFamily, exponential, power_law)
from .errors import InvalidParams, UnsupportedDiffusivity

t, x, u, v = Var("t"), Var("x"), Var("u"), Var("v")


@dataclass(frozen=True)
class EquivalenceTransform:
    """Affine change of variables followed by an optional swap of ``u`` and ``v``.

    New variables are ``T = C1 t + C2``, ``X = C3 x + C4``, ``U = C5 u + C6``,
    ``W = C7 v + C8``; with ``swap`` the new pair is ``(W, U)`` instead of
    ``(U, W)``.
    """

    C: tuple = (1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0)
    swap: bool = False

    def __post_init__(self):
        if len(self.C) != 8:
            raise InvalidParams("an equivalence transform needs eight constants C1..C8")
        object.__setattr__(self, "C", tuple(float(c) for c in self.C))
        for i in (0, 2, 4, 6):
            if self.C[i] == 0.0:
                raise InvalidParams(f"C{i + 1} must be non-zero")

    @classmethod
    def identity(cls) -> "EquivalenceTransform":
        return cls()

    @classmethod
    def discrete_swap(cls) -> "EquivalenceTransform":
        return cls(swap=True)

    def apply_point(self, t_, x_, u_, v_):
        c = self.C
        T, X = c[0] * t_ + c[1], c[2] * x_ + c[3]
        U, W = c[4] * u_ + c[5], c[6] * v_ + c[7]
        return (T, X, W, U) if self.swap else (T, X, U, W)

    def inverse(self) -> "EquivalenceTransform":
        c = self.C
        inv = [1 / c[0], -c[1] / c[0], 1 / c[2], -c[3] / c[2],
               1 / c[4], -c[5] / c[4], 1 / c[6], -c[7] / c[6]]
        if self.swap:
            inv = inv[:4] + inv[6:8] + inv[4:6]
        return EquivalenceTransform(tuple(inv), self.swap)

    def _old_in_new(self):
        """Old variables (t, x, u, v) as expressions of the new ones."""
        c = self.C
        T, X, U, W = t, x, u, v
        if self.swap:
            U, W = W, U
        return {"t": (T - c[1]) / c[0], "x": (X - c[3]) / c[2],
                "u": (U - c[5]) / c[4], "v": (W - c[7]) / c[6]}


def _family_image(fam: DiffusivityFamily, scale: float, cw: float, new_var: str,
                  old_of_new: Expr) -> DiffusivityFamily:
    """Family ``scale * fam(w(W))`` with ``w = old_of_new(W)`` and ``dw/dW = 1/cw``."""
    m = {fam.var: old_of_new}

    def sub(e):
        return None if e is None else e.subs(**m)

    h = None if fam.h is None else cw * sub(fam.h)
    log_int = None if fam.log_integral is None else sub(fam.log_integral) / scale
    return DiffusivityFamily("Custom", {"image_of": fam.kind, **fam.params}, new_var,
                             scale * sub(fam.d), (scale / cw) * sub(fam.d_u),
                             (scale / cw ** 2) * sub(fam.d_uu), h, log_int, fam.extras)


def apply_equivalence(sys: RDSystem, tr: EquivalenceTransform) -> RDSystem:
    """Image of ``sys`` under ``tr``: solutions are mapped to solutions."""
    c = tr.C
    old = tr._old_in_new()
    dscale = c[0] / c[2] ** 2
    # equation for the new first component comes from the old u (or v if swapped)
    eqs = [(sys.d1, sys.C1, c[4], "u"), (sys.d2, sys.C2, c[6], "v")]
    if tr.swap:
        eqs = eqs[::-1]
    new = []
    for (fam, C, cw, oldvar), newvar in zip(eqs, ("u", "v")):
        d = _family_image(fam, dscale, cw, newvar, old[oldvar])
        new.append((d, (cw / c[2] ** 2) * C.subs(**old)))
    meta = {**sys.metadata, "equivalence": {"C": c, "swap": tr.swap, "source": sys.catalog_id}}
    f, g = (sys.profile_g, sys.profile_f) if tr.swap else (sys.profile_f, sys.profile_g)
    return RDSystem(f"{sys.catalog_id}~", new[0][0], new[1][0], new[0][1], new[1][1], f, g,
                    dict(sys.params), meta)


def transform_operator(Q: SymmetryOperator, tr: EquivalenceTransform) -> SymmetryOperator:
    """Image of the operator under ``tr`` (coefficients pushed forward)."""
    c = tr.C
    old = tr._old_in_new()
    xi0 = c[0] * Q.xi0.subs(**old)
    xi = c[2] * Q.xi.subs(**old)
    e1 = c[4] * Q.eta1.subs(**old)
    e2 = c[6] * Q.eta2.subs(**old)
    manifold = Q.manifold
    if tr.swap:
        e1, e2 = e2, e1
        manifold = "V" if manifold == "U" else "U"
    return SymmetryOperator(f"{Q.catalog_id}~", xi0, xi, e1, e2, dict(Q.params), manifold)


def transform_solution(tr: EquivalenceTransform, u_sol: Expr, v_sol: Expr):
    """Image of a closed-form solution ``(u(t, x), v(t, x))`` in the new variables."""
    c = tr.C
    old = tr._old_in_new()
    m = {"t": old["t"], "x": old["x"]}
    U = c[4] * u_sol.subs(**m) + c[5]
    W = c[6] * v_sol.subs(**m) + c[7]
    return (W, U) if tr.swap else (U, W)


def normalising_rescaling(mu: float, delta2: float) -> EquivalenceTransform:
    """Rescaling taking the unnormalised exponential-xi form (``T1-I-scaled``) to ``T1-I``.

    ``X = (sqrt(mu)/2) x``, ``T = (mu/4) t`` (keeps ``d1`` unchanged) and
    ``W = delta2**(-1/4) v``.
    """
    if not mu > 0 or not delta2 > 0:
        raise InvalidParams("mu > 0 and delta2 > 0 required")
    return EquivalenceTransform((mu / 4.0, 0.0, math.sqrt(mu) / 2.0, 0.0, 1.0, 0.0,
                                 delta2 ** -0.25, 0.0))


# ---------------------------------------------------------------------------
# Kirchhoff substitution
# ---------------------------------------------------------------------------

def _kirchhoff_pair(fam: DiffusivityFamily, new_var: str):
    """Closed-form primitive ``w = int fam dW`` and the reciprocal diffusivity.

    Returns ``(new_family, w_of_W, W_of_w)`` where ``new_family(w) = 1/fam(W(w))``
    is written in ``new_var`` and the maps are expressions in ``fam.var`` and
    ``new_var`` respectively.  The same construction inverts itself.
    """
    W = Var(fam.var)
    w = Var(new_var)
    if fam.kind == POWER:
        m, delta, sigma = fam.params["beta"], fam.params["delta"], fam.params["sign"]
        sW = W if sigma > 0 else -W
        if m == -1.0:
            off = fam.params.get("offset", 0.0)
            w_of_W = (delta * sigma) * log(sW) + off
            W_of_w = sigma * exp((sigma / delta) * (w - off))
            new = exponential(math.exp(-sigma * off / delta) / delta, sigma / delta, var=new_var)
            return new, w_of_W, W_of_w
        p = m + 1.0
        c = sigma * delta / p
        w_of_W = c * sW ** p
        W_of_w = sigma * (w / c) ** (1.0 / p)
        new = power_law(-m / p, abs(c) ** (m / p) / delta, var=new_var, sign=math.copysign(1.0, c))
        return new, w_of_W, W_of_w
    if fam.kind == EXPONENTIAL:
        delta, r = fam.params["delta"], fam.params["rate"]
        w_of_W = (delta / r) * exp(r * W)
        W_of_w = log((r / delta) * w) / r
        # the offset makes the reciprocal construction return exactly this family
        new = power_law(-1.0, 1.0 / abs(r), var=new_var, sign=math.copysign(1.0, r),
                        offset=math.log(abs(r) / delta) / r)
        return new, w_of_W, W_of_w
    raise UnsupportedDiffusivity(
        f"{fam.kind} diffusivities have no closed-form antiderivative/inverse pair")


def kirchhoff_forward(phys: PhysicalRDSystem) -> RDSystem:
    """``u = int D1 dU``, ``v = int D2 dV``; ``d1(u) = 1/D1(U(u))``, ``C1 = -F``, ``C2 = -G``."""
    d1, _, U_of_u = _kirchhoff_pair(phys.D1, "u")
    d2, _, V_of_v = _kirchhoff_pair(phys.D2, "v")
    m = {"u": U_of_u, "v": V_of_v}
    C1 = -phys.F.subs(**m)
    C2 = -phys.G.subs(**m)
    meta = {**phys.metadata, "kirchhoff_of": phys.catalog_id}
    return RDSystem(f"kirchhoff({phys.catalog_id})", d1, d2, C1, C2, None, None,
                    dict(phys.params), meta)


def kirchhoff_inverse(sys: RDSystem) -> PhysicalRDSystem:
    """Physical form with ``D1(U) = 1/d1(u(U))``, ``F(U, V) = -C1(u(U), v(V))``."""
    D1, _, u_of_U = _kirchhoff_pair(sys.d1, "u")
    D2, _, v_of_V = _kirchhoff_pair(sys.d2, "v")
    m = {"u": u_of_U, "v": v_of_V}
    meta = {**sys.metadata, "kirchhoff_inverse_of": sys.catalog_id}
    return PhysicalRDSystem(f"kirchhoff_inverse({sys.catalog_id})", D1, D2, -sys.C1.subs(**m),
                            -sys.C2.subs(**m), dict(sys.params), meta)


def kirchhoff_maps(fam: DiffusivityFamily, new_var: str = "u"):
    """The primitive map ``w(W)`` and its inverse ``W(w)`` as expressions."""
    _, fwd, inv = _kirchhoff_pair(fam, new_var)
    return fwd, inv
