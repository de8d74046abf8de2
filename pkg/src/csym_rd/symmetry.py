"""Second prolongation, manifold projection and numeric certification of invariance."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import calc
from .calc import Taylor
from .catalog import RDSystem, SymmetryOperator
from .errors import DomainError, SingularManifold, UnsupportedOperator

DEFAULT_SEED = 20240611
DEFAULT_TOL = 1e-9
XI_FLOOR = 0.1
SINGULAR = 1e-12


def default_seed() -> int:
    """Seed from ``CSYM_RD_SEED`` or the built-in default."""
    env = os.environ.get("CSYM_RD_SEED")
    return int(env) if env not in (None, "") else DEFAULT_SEED


class ManifoldKind(str, Enum):
    LIE = "Lie"
    FIRST_U = "FirstTypeU"
    FIRST_V = "FirstTypeV"
    SECOND = "SecondType"
    FREE = "Free"


JET_FIELDS = ("t", "x", "u", "v", "u_t", "u_x", "v_t", "v_x", "u_xx", "v_xx", "u_tx", "v_tx")

FREE_COORDINATES = {
    ManifoldKind.LIE: ("u_t", "v_t", "u_x", "v_x", "u_tx", "v_tx"),
    ManifoldKind.FIRST_U: ("u_t", "v_t", "v_x", "v_tx"),
    ManifoldKind.FIRST_V: ("u_t", "v_t", "u_x", "u_tx"),
    ManifoldKind.SECOND: ("u_t", "v_t"),
    ManifoldKind.FREE: ("u_t", "v_t", "u_x", "v_x", "u_xx", "v_xx", "u_tx", "v_tx"),
}


@dataclass
class JetPoint:
    """Point of the second-order jet space (arrays broadcast over a batch)."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_t: np.ndarray
    u_x: np.ndarray
    v_t: np.ndarray
    v_x: np.ndarray
    u_xx: np.ndarray
    v_xx: np.ndarray
    u_tx: np.ndarray
    v_tx: np.ndarray
    constraint_tag: ManifoldKind = ManifoldKind.FREE

    @property
    def point(self):
        return (self.t, self.x, self.u, self.v)

    @classmethod
    def free(cls, **coords) -> "JetPoint":
        vals = [np.asarray(coords.get(k, 0.0), dtype=float) for k in JET_FIELDS]
        return cls(*np.broadcast_arrays(*vals), ManifoldKind.FREE)


@dataclass
class ProlongedCoefficients:
    rho1_t: np.ndarray
    rho1_x: np.ndarray
    rho2_t: np.ndarray
    rho2_x: np.ndarray
    sigma1_xx: np.ndarray
    sigma2_xx: np.ndarray

    def as_tuple(self):
        return (self.rho1_t, self.rho1_x, self.rho2_t, self.rho2_x, self.sigma1_xx, self.sigma2_xx)


def _taylor(e, pt, order=2) -> Taylor:
    return calc.taylor_eval(e, pt, order=order)


def _coefficients(Q: SymmetryOperator, pt):
    return {name: _taylor(getattr(Q, name), pt) for name in ("xi0", "xi", "eta1", "eta2")}


def _Dt(G: Taylor, j: JetPoint):
    return G.d("t") + j.u_t * G.d("u") + j.v_t * G.d("v")


def _Dx(G: Taylor, j: JetPoint):
    return G.d("x") + j.u_x * G.d("u") + j.v_x * G.d("v")


def _Dxx(G: Taylor, j: JetPoint):
    ux, vx = j.u_x, j.v_x
    return (G.d("x", "x") + 2 * ux * G.d("x", "u") + 2 * vx * G.d("x", "v")
            + ux * ux * G.d("u", "u") + 2 * ux * vx * G.d("u", "v") + vx * vx * G.d("v", "v")
            + j.u_xx * G.d("u") + j.v_xx * G.d("v"))


def _prolong(c, j: JetPoint) -> ProlongedCoefficients:
    xi0, xi = c["xi0"], c["xi"]
    Dt0, Dt1 = _Dt(xi0, j), _Dt(xi, j)
    Dx0, Dx1 = _Dx(xi0, j), _Dx(xi, j)
    Dxx0, Dxx1 = _Dxx(xi0, j), _Dxx(xi, j)
    out = []
    for eta, wt, wx, wtx, wxx in ((c["eta1"], j.u_t, j.u_x, j.u_tx, j.u_xx),
                                  (c["eta2"], j.v_t, j.v_x, j.v_tx, j.v_xx)):
        rho_t = _Dt(eta, j) - wt * Dt0 - wx * Dt1
        rho_x = _Dx(eta, j) - wt * Dx0 - wx * Dx1
        # sigma_xx = D_x(rho_x) - w_tx D_x xi0 - w_xx D_x xi
        sigma = _Dxx(eta, j) - 2 * wtx * Dx0 - wt * Dxx0 - 2 * wxx * Dx1 - wx * Dxx1
        out.append((rho_t, rho_x, sigma))
    (r1t, r1x, s1), (r2t, r2x, s2) = out
    return ProlongedCoefficients(r1t, r1x, r2t, r2x, s1, s2)


def prolong_second(Q: SymmetryOperator, jet: JetPoint) -> ProlongedCoefficients:
    """Coefficients ``rho^k_t``, ``rho^k_x`` and ``sigma^k_xx`` of the second prolongation.

    Total derivatives are taken at the jet point, so the result is exact up
    to rounding for expression-tree coefficients.
    """
    return _prolong(_coefficients(Q, jet.point), jet)


# ---------------------------------------------------------------------------
# manifold projection
# ---------------------------------------------------------------------------

def _need(base, keys):
    missing = [k for k in keys if k not in base]
    if missing:
        raise KeyError(f"base jet data is missing {missing}")
    return [np.asarray(base[k], dtype=float) for k in keys]


def _system_values(sys: RDSystem, pt):
    return (calc.evaluate(sys.d1.d, pt), calc.evaluate(sys.d2.d, pt),
            calc.evaluate(sys.C1, pt), calc.evaluate(sys.C2, pt))


def _project(sys, c, base, kind):
    kind = ManifoldKind(kind)
    t, x, u, v = _need(base, ("t", "x", "u", "v"))
    t, x, u, v = np.broadcast_arrays(t, x, u, v)
    pt = (t, x, u, v)
    free = dict(zip(FREE_COORDINATES[kind], _need(base, FREE_COORDINATES[kind])))
    u_t, v_t = free["u_t"], free["v_t"]
    d1, d2, C1, C2 = _system_values(sys, pt)
    jet = dict(t=t, x=x, u=u, v=v, u_t=u_t, v_t=v_t)
    if kind == ManifoldKind.FREE:
        jet.update(free)
        return JetPoint(*np.broadcast_arrays(*[jet[k] for k in JET_FIELDS]), kind)
    jet["u_xx"] = d1 * u_t + C1
    jet["v_xx"] = d2 * v_t + C2
    if kind == ManifoldKind.LIE:
        jet.update({k: free[k] for k in ("u_x", "v_x", "u_tx", "v_tx")})
    else:
        if np.any(c["xi0"].val != 0.0):
            raise UnsupportedOperator("first/second-type projection needs xi0 = 0")
        xi = c["xi"]
        if np.any(np.abs(xi.val) < SINGULAR):
            raise SingularManifold("xi vanishes at the point; Q(u) = 0 cannot be solved for u_x")
        Dt_xi = _Dt(xi, _PartialJet(u_t, v_t))
        for w, eta in (("u", c["eta1"]), ("v", c["eta2"])):
            tied = (kind == ManifoldKind.SECOND or (kind == ManifoldKind.FIRST_U and w == "u")
                    or (kind == ManifoldKind.FIRST_V and w == "v"))
            if tied:
                wx = eta.val / xi.val
                jet[f"{w}_x"] = wx
                # D_t of Q(w) = xi w_x - eta = 0
                jet[f"{w}_tx"] = (_Dt(eta, _PartialJet(u_t, v_t)) - wx * Dt_xi) / xi.val
            else:
                jet[f"{w}_x"] = free[f"{w}_x"]
                jet[f"{w}_tx"] = free[f"{w}_tx"]
    return JetPoint(*np.broadcast_arrays(*[jet[k] for k in JET_FIELDS]), kind)


@dataclass
class _PartialJet:
    u_t: np.ndarray
    v_t: np.ndarray


def project_manifold(sys: RDSystem, Q: SymmetryOperator, base: dict, kind) -> JetPoint:
    """Complete free jet coordinates to a point of the chosen manifold.

    Parameters
    ----------
    base : dict
        ``t, x, u, v`` plus the free coordinates of ``kind`` (see
        :data:`FREE_COORDINATES`); values may be arrays.
    kind : ManifoldKind or str
        For the first-type kinds ``u_x = eta1/xi`` (or ``v_x = eta2/xi``) and
        the mixed derivative follows from ``D_t`` of the invariant-surface
        condition; ``u_xx``, ``v_xx`` always come from the system.
    """
    t, x, u, v = _need(base, ("t", "x", "u", "v"))
    c = _coefficients(Q, np.broadcast_arrays(t, x, u, v))
    return _project(sys, c, base, kind)


# ---------------------------------------------------------------------------
# invariance and determining residuals
# ---------------------------------------------------------------------------

def _invariance_terms(sys: RDSystem, c, jet: JetPoint):
    pr = _prolong(c, jet)
    pt = jet.point
    d1, d2 = _taylor(sys.d1.d, pt, 1), _taylor(sys.d2.d, pt, 1)
    C1, C2 = _taylor(sys.C1, pt, 1), _taylor(sys.C2, pt, 1)
    xi0, xi, e1, e2 = (c[k].val for k in ("xi0", "xi", "eta1", "eta2"))
    terms = []
    for sigma, rho_t, d, dvar, wt, C in ((pr.sigma1_xx, pr.rho1_t, d1, "u", jet.u_t, C1),
                                         (pr.sigma2_xx, pr.rho2_t, d2, "v", jet.v_t, C2)):
        eta_w = e1 if dvar == "u" else e2
        terms.append([sigma, -d.val * rho_t, -eta_w * d.d(dvar) * wt, -xi0 * C.d("t"),
                      -xi * C.d("x"), -e1 * C.d("u"), -e2 * C.d("v")])
    return terms


def _sum_and_scale(terms):
    arr = np.stack(np.broadcast_arrays(*terms))
    return arr.sum(axis=0), 1.0 + np.max(np.abs(arr), axis=0)


def invariance_residual(sys: RDSystem, Q: SymmetryOperator, base: dict, kind="FirstTypeU",
                        normalized: bool = False):
    """``(r1, r2)``: the second prolongation applied to both equations on the manifold.

    ``r1 = sigma1_xx - d1 rho1_t - eta1 d1_u u_t - xi0 C1_t - xi C1_x - eta1 C1_u - eta2 C1_v``
    and analogously ``r2``.  With ``normalized=True`` each residual is divided
    by ``1 + max|term|``.
    """
    t, x, u, v = _need(base, ("t", "x", "u", "v"))
    c = _coefficients(Q, np.broadcast_arrays(t, x, u, v))
    jet = _project(sys, c, base, kind)
    out = []
    for terms in _invariance_terms(sys, c, jet):
        r, s = _sum_and_scale(terms)
        out.append(np.abs(r) / s if normalized else r)
    return tuple(out)


DETERMINING_LABELS = (
    "xi_u", "xi_v",
    "(d1-d2)*eta1_v", "(d1-d2)*eta2_u", "eta1_vv", "eta2_vv", "eta1_xv+eta1_uv*eta1/xi",
    "2*xi_x*d1+eta1*d1_u", "2*xi_x*d2+eta2*d2_v",
    "xi_t*d2+2*eta2_xv-xi_xx+2*(eta1/xi)*eta2_uv",
    "classification_C1", "classification_C2",
)


def _swap_pair(sys, Q):
    from .equivalence import EquivalenceTransform, apply_equivalence, transform_operator
    sw = EquivalenceTransform.discrete_swap()
    return apply_equivalence(sys, sw), transform_operator(Q, sw)


def _determining_terms(sys, Q, pt):
    c = _coefficients(Q, pt)
    xi, e1, e2 = c["xi"], c["eta1"], c["eta2"]
    d1, d2 = _taylor(sys.d1.d, pt, 1), _taylor(sys.d2.d, pt, 1)
    C1, C2 = _taylor(sys.C1, pt, 1), _taylor(sys.C2, pt, 1)
    if np.any(np.abs(xi.val) < SINGULAR):
        raise SingularManifold("xi vanishes at the point")
    r = e1.val / xi.val
    dd = d1.val - d2.val
    D = lambda G, *a: G.d(*a)  # noqa: E731
    return [
        [D(xi, "u")],
        [D(xi, "v")],
        [dd * D(e1, "v")],
        [dd * D(e2, "u")],
        [D(e1, "v", "v")],
        [D(e2, "v", "v")],
        [D(e1, "x", "v"), D(e1, "u", "v") * r],
        [2 * D(xi, "x") * d1.val, e1.val * d1.d("u")],
        [2 * D(xi, "x") * d2.val, e2.val * d2.d("v")],
        [D(xi, "t") * d2.val, 2 * D(e2, "x", "v"), -D(xi, "x", "x"), 2 * r * D(e2, "u", "v")],
        [e1.val * C1.d("u"), e2.val * C1.d("v"), -D(e1, "v") * C2.val,
         (2 * D(xi, "x") - D(e1, "u")) * C1.val, D(e1, "t") * d1.val, -D(e1, "x", "x"),
         -r * r * D(e1, "u", "u"),
         -r * (D(xi, "t") * d1.val + 2 * D(e1, "x", "u") - D(xi, "x", "x"))],
        [e1.val * C2.d("u"), e2.val * C2.d("v"), -D(e2, "u") * C1.val,
         (2 * D(xi, "x") - D(e2, "v")) * C2.val, D(e2, "t") * d2.val, -D(e2, "x", "x"),
         -r * r * D(e2, "u", "u"), -2 * r * D(e2, "x", "u")],
    ]


def determining_residuals(sys: RDSystem, Q: SymmetryOperator, point, normalized: bool = False):
    """Residuals of the first-type determining system on the ``Q(u) = 0`` manifold.

    Returns an array of shape ``(12,) + batch`` ordered as
    :data:`DETERMINING_LABELS`.  Operators whose manifold is ``Q(v) = 0`` are
    handled through the discrete swap ``u <-> v``.
    """
    if Q.manifold == "V":
        sys, Q = _swap_pair(sys, Q)
    pt = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in point])
    out = []
    for terms in _determining_terms(sys, Q, pt):
        r, s = _sum_and_scale(terms)
        out.append(np.abs(r) / s if normalized else r)
    return np.stack(np.broadcast_arrays(*out))


def lie_restriction_residuals(sys: RDSystem, Q: SymmetryOperator, point):
    """``(e1, e2) = (eta1_uu, xi_t d1 + 2 eta1_xu - xi_xx)``; both vanish for Lie operators."""
    if Q.manifold == "V":
        sys, Q = _swap_pair(sys, Q)
    pt = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in point])
    xi, e1 = _taylor(Q.xi, pt), _taylor(Q.eta1, pt)
    d1 = calc.evaluate(sys.d1.d, pt)
    return e1.d("u", "u"), xi.d("t") * d1 + 2 * e1.d("x", "u") - xi.d("x", "x")


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

DEFAULT_BOX = {"t": (0.0, 1.0), "x": (-1.0, 1.0), "u": (0.5, 2.0), "v": (0.5, 2.0),
               "deriv": (-1.0, 1.0)}


@dataclass
class CertificationReport:
    """Outcome of :func:`certify`."""

    system_id: str
    operator_id: str
    kind: str
    n_samples: int
    max_invariance_residual: float
    max_determining_residual: float
    is_lie: bool
    restriction_residuals: tuple
    verdict: str
    tol: float
    seed: int
    generator: str = "PCG64"
    per_equation: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"system": self.system_id, "operator": self.operator_id, "kind": self.kind,
                "n_samples": self.n_samples,
                "max_invariance_residual": self.max_invariance_residual,
                "max_determining_residual": self.max_determining_residual,
                "is_lie": self.is_lie, "restriction_residuals": list(self.restriction_residuals),
                "verdict": self.verdict, "tol": self.tol,
                "sampler": {"generator": self.generator, "seed": self.seed},
                "per_equation": self.per_equation, "failures": self.failures}


def sample_base(sys: RDSystem, Q: SymmetryOperator, n: int, rng: np.random.Generator,
                box: dict | None = None, xi_floor: float = XI_FLOOR) -> dict:
    """Draw ``n`` jet bases with every coordinate uniform in ``box`` and ``|xi| > xi_floor``.

    Points where a coefficient leaves its domain are rejected as well.
    """
    box = {**DEFAULT_BOX, **(box or {})}
    names = ("u_t", "v_t", "u_x", "v_x", "u_tx", "v_tx")
    chosen = {k: [] for k in ("t", "x", "u", "v") + names}
    have = 0
    for _ in range(200):
        m = max(2 * (n - have), 16)
        cand = {k: rng.uniform(*box[k], size=m) for k in ("t", "x", "u", "v")}
        for k in names:
            cand[k] = rng.uniform(*box["deriv"], size=m)
        keep = _admissible(sys, Q, cand, xi_floor)
        for k in chosen:
            chosen[k].append(cand[k][keep])
        have += int(keep.sum())
        if have >= n:
            break
    else:
        raise DomainError(f"could not draw {n} admissible points (|xi| > {xi_floor})")
    return {k: np.concatenate(val)[:n] for k, val in chosen.items()}


def _admissible(sys, Q, cand, xi_floor):
    pt = (cand["t"], cand["x"], cand["u"], cand["v"])
    exprs = (Q.xi, Q.eta1, Q.eta2, sys.d1.d, sys.d2.d, sys.C1, sys.C2)
    try:
        xi = calc.evaluate(Q.xi, pt)
        for e in exprs:
            calc.evaluate(e, pt)
        return np.abs(xi) > xi_floor
    except DomainError:
        pass
    keep = np.zeros(len(cand["t"]), dtype=bool)
    for i in range(len(keep)):
        p = tuple(a[i] for a in pt)
        try:
            xi = calc.evaluate(Q.xi, p)
            for e in exprs:
                calc.evaluate(e, p)
        except DomainError:
            continue
        keep[i] = abs(float(xi)) > xi_floor
    return keep


def certify(sys: RDSystem, Q: SymmetryOperator, n: int = 200, seed: int | None = None,
            tol: float = DEFAULT_TOL, box: dict | None = None, kind=None) -> CertificationReport:
    """Sample jet points and evaluate invariance, determining and restriction residuals.

    The verdict is ``Fails`` when a normalised residual reaches ``tol``,
    ``FirstType`` when both suites pass and a restriction residual exceeds
    ``10*tol`` somewhere (and the Lie-manifold check fails), ``Lie`` otherwise.
    """
    seed = default_seed() if seed is None else int(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind is None:
        kind = ManifoldKind.FIRST_V if Q.manifold == "V" else ManifoldKind.FIRST_U
    kind = ManifoldKind(kind)
    box = {**sys.metadata.get("sample_box", {}), **(box or {})}
    base = sample_base(sys, Q, n, rng, box)
    pt = (base["t"], base["x"], base["u"], base["v"])
    r1, r2 = invariance_residual(sys, Q, base, kind, normalized=True)
    inv = np.maximum(r1, r2)
    det = determining_residuals(sys, Q, pt, normalized=True)
    e1, e2 = lie_restriction_residuals(sys, Q, pt)
    l1, l2 = invariance_residual(sys, Q, base, ManifoldKind.LIE, normalized=True)
    lie_max = float(np.max(np.maximum(l1, l2)))
    max_inv, max_det = float(np.max(inv)), float(np.max(det))
    restr = (float(np.max(np.abs(e1))), float(np.max(np.abs(e2))))
    is_lie = lie_max < tol
    if max_inv >= tol or max_det >= tol or not np.isfinite(max_inv + max_det):
        verdict = "Fails"
    elif max(restr) > 10 * tol and not is_lie:
        verdict = "FirstType"
    else:
        verdict = "Lie"
    per_eq = {"invariance_r1": float(np.max(r1)), "invariance_r2": float(np.max(r2)),
              "lie_manifold_invariance": lie_max}
    per_eq.update({lab: float(np.max(det[i])) for i, lab in enumerate(DETERMINING_LABELS)})
    bad = np.nonzero((inv >= tol) | (np.max(det, axis=0) >= tol))[0]
    failures = [{"sample": int(i), "t": float(base["t"][i]), "x": float(base["x"][i]),
                 "u": float(base["u"][i]), "v": float(base["v"][i]),
                 "invariance": float(inv[i]), "determining": float(np.max(det[:, i]))}
                for i in bad[:20]]
    return CertificationReport(sys.catalog_id, Q.catalog_id, kind.value, n, max_inv, max_det,
                               bool(is_lie), restr, verdict, tol, seed, "PCG64", per_eq, failures)
