"""Ansatz construction, reduced systems, reduction residuals and the c6 closed form."""

import math

import numpy as np
import pytest

from csym_rd.catalog import catalog_operator, catalog_system
from csym_rd.calc import Var, exp
from csym_rd.diffusivity import constant_profile, power_profile
from csym_rd.errors import DomainError, IncompatiblePair, InvalidParams, UnsupportedOperator
from csym_rd.reduction import (ReducedODESystem, build_ansatz, c3_triple, c6_argument,
                               closed_form_c6, integrate, invariant_surface_residual,
                               power_reduced_system, reduce, reduction_residual, table1_triple)

rng = np.random.default_rng(21)

C6_SETS = [
    dict(alpha1=1, alpha2=1, beta=2, k=1, lambda1=1, t0=0),
    dict(alpha1=2, alpha2=0.5, beta=3, k=1, lambda1=1.5, t0=-1),
    dict(alpha1=1, alpha2=1, beta=2, k=2, lambda1=0.8, t0=0.5),
    dict(alpha1=-0.5, alpha2=1, beta=2, k=0.5, lambda1=1.2, t0=0),
    dict(alpha1=1, alpha2=-0.125, beta=1, k=1, lambda1=1, t0=2),
]


def _samples(ans, n=100):
    lo, hi = ans.x_domain
    lo, hi = max(lo, -1.0), min(hi, 1.0)
    pad = 1e-3 * (hi - lo)
    return (rng.uniform(0, 1, n), rng.uniform(lo + pad, hi - pad, n), rng.uniform(0.5, 2, n),
            rng.uniform(0.5, 2, n))


def test_c3_ansatz_example():
    a = build_ansatz("Q-T1-I", {"beta": 2}).evaluate(0.0, 0.0, 1.0, 1.0)
    assert (a["u"], a["v"], a["u_x"], a["v_x"]) == (1.0, 1.0, -2.0, 1.0)


def test_row2_sin_branch_at_quarter_pi():
    a = build_ansatz("table1-row2").evaluate(0.0, math.pi / 4, 1.3, 1.1)
    assert np.isclose(a["u"], 1.3, rtol=0, atol=1e-15) and np.isclose(a["v"], 1.1, rtol=0, atol=1e-15)


def test_row1_printed_form():
    alpha = 0.7
    ans = build_ansatz("table1-row1", {"alpha": alpha})
    x = np.linspace(-0.5, 0.5, 7)
    a = ans.evaluate(0.0, x, 0.4, 1.2)
    E = np.exp(2 * x) + alpha * np.exp(-2 * x)
    assert np.allclose(a["u"], 0.4 - 2 * np.log(E), rtol=1e-14)
    assert np.allclose(a["v"], 1.2 * np.sqrt(E), rtol=1e-14)


@pytest.mark.parametrize("row", [1, 2, 3, 4])
def test_invariant_surface_table1(row):
    s, ans, _ = table1_triple(row)
    Q = catalog_operator("Q-T1-II", system=s)
    t, x, ph, ps = _samples(ans, 50)
    r1, r2 = invariant_surface_residual(ans, Q, t, x, ph, ps)
    assert max(np.max(np.abs(r1)), np.max(np.abs(r2))) < 1e-12


def test_invariant_surface_c3_and_row3_point():
    ans = build_ansatz("Q-T1-I", {"beta": 2})
    Q = catalog_operator("Q-T1-I", {"beta": 2})
    t, x, ph, ps = _samples(ans, 50)
    r1, r2 = invariant_surface_residual(ans, Q, t, x, ph, ps)
    assert np.all(r1 == 0) or np.max(np.abs(r1)) < 1e-14
    s, ans3, _ = table1_triple(3, {"alpha": 1.0})
    Q3 = catalog_operator("Q-T1-II", system=s)
    r1, r2 = invariant_surface_residual(ans3, Q3, 0.0, 0.3, 1.1, 0.9)
    assert abs(r1) < 1e-12 and abs(r2) < 1e-12


def test_invariant_surface_negative_control():
    ans = build_ansatz("Q-T1-I", {"beta": 2})
    bad = ans.replace(v_expr=Var("v") * exp(2 * Var("x")))
    Q = catalog_operator("Q-T1-I", {"beta": 2})
    _, r2 = invariant_surface_residual(bad, Q, 0.0, 0.2, 1.0, 1.3)
    v = 1.3 * math.exp(0.4)
    assert np.isclose(r2, math.exp(0.4) * v)


def test_unsupported_operator():
    with pytest.raises(UnsupportedOperator):
        build_ansatz("Q-T2-II")


def test_domain_of_ansatz():
    ans = build_ansatz("table1-row2")
    with pytest.raises(DomainError):
        ans.evaluate(0.0, 2.0, 1.0, 1.0)
    ans1 = build_ansatz("table1-row1", {"alpha": -1.0})
    assert ans1.x_domain[0] == 0.0


def test_s_c2_reduced_system_example():
    s = catalog_system("S-c2", {"f": constant_profile(1.0), "g": constant_profile(1.0)})
    ode = reduce(s, build_ansatz("c3", {"beta": 2}))
    assert ode.derivatives(0.0, 1.0, 1.0) == (-1.0, -1.0)


def test_row1_reduced_example():
    _, _, ode = table1_triple(1, {"alpha": 1.0, "f": constant_profile(0.0),
                                  "g": constant_profile(0.0)})
    dphi, dpsi = ode.derivatives(0.0, 0.0, 1.0)
    assert (dphi, dpsi) == (-32.0, 4.0)


def test_row4_reduced_example():
    _, _, ode = table1_triple(4, {"beta": 2.0, "f": constant_profile(0.0),
                                  "g": constant_profile(0.0)})
    assert ode.derivatives(0.0, 1.0, 1.0)[0] == 8.0


def test_chi_is_x_free():
    for row in (1, 3):
        _, ans, ode = table1_triple(row, {"beta": 1.5})
        x = np.linspace(-0.5, 0.5, 11)
        a = ans.evaluate(0.0, x, 0.8, 1.2)
        lead = np.exp(a["u"]) if ode.kind == "exp" else a["u"] ** ode.beta
        # the argument v^4 d1(u) along x equals chi(phi, psi) times a fixed function of x
        omega = a["v"] ** 4 * lead
        ratio = omega / ode.chi(0.8, 1.2)
        a2 = ans.evaluate(0.0, x, 1.4, 0.7)
        lead2 = np.exp(a2["u"]) if ode.kind == "exp" else a2["u"] ** ode.beta
        assert np.allclose(a2["v"] ** 4 * lead2 / ode.chi(1.4, 0.7), ratio, rtol=1e-13)


TRIPLES = [("row", r) for r in (1, 2, 3, 4)] + [("c3", "S-c2"), ("c3", "S-c8"), ("c3", "T1-I")]


def _triple(kind, arg):
    f, g = power_profile(0.8, 0.5), power_profile(-0.3, 0.5)
    if kind == "row":
        return table1_triple(arg, {"beta": 2.5, "alpha": 0.6, "f": f, "g": g})
    if arg == "S-c8":
        return c3_triple({}, "S-c8")
    return c3_triple({"beta": 3.0, "f": f, "g": g}, arg)


@pytest.mark.parametrize("kind,arg", TRIPLES)
def test_reduction_residual_and_perturbation(kind, arg):
    s, ans, ode = _triple(kind, arg)
    t, x, ph, ps = _samples(ans)
    r1, r2 = reduction_residual(s, ans, ode, t, x, ph, ps, normalized=True)
    assert max(r1.max(), r2.max()) < 1e-10
    for key in ode.coeffs:
        bad = ode.with_coeffs(**{key: ode.coeffs[key] + 0.1})
        r1, r2 = reduction_residual(s, ans, bad, t, x, ph, ps, normalized=True)
        assert max(r1.max(), r2.max()) >= 1e-3, key


def test_dropped_source_term_negative_control():
    s, ans, ode = c3_triple({"beta": 2.0})
    beta = 2.0
    u = Var("u")
    s_bad = s.replace(C1=s.C1 - 16.0 * u / beta ** 2)
    t, x, ph, ps = _samples(ans, 20)
    r1, _ = reduction_residual(s_bad, ans, ode, t, x, ph, ps)
    uu = ans.evaluate(t, x, ph, ps)["u"]
    assert np.allclose(np.abs(r1), 16 * np.abs(uu) / beta ** 2, rtol=1e-12)


def test_incompatible_pairs():
    with pytest.raises(IncompatiblePair):
        reduce(catalog_system("T2-II"), build_ansatz("c3"))
    with pytest.raises(IncompatiblePair):
        reduce(catalog_system("S-c2", {"beta": 3.0}), build_ansatz("c3", {"beta": 2.0}))
    with pytest.raises(IncompatiblePair):
        reduce(catalog_system("T1-II", {"d1": "exp", "mu": -4.0}), build_ansatz("table1-row1"))


# ---------------------------------------------------------------------------
# closed form and integration
# ---------------------------------------------------------------------------

def test_c6_example():
    p = dict(alpha1=1, alpha2=1, beta=2, k=1, lambda1=1, t0=0)
    assert np.isclose(c6_argument(p, 1 / 6), 1.0)
    phi, psi = closed_form_c6(p, 1 / 6)
    assert np.isclose(phi, 1.0) and np.isclose(psi, 1.0)


@pytest.mark.parametrize("p", C6_SETS)
def test_c6_solves_reduced_system(p):
    ts = p["t0"] + rng.uniform(0.1, 2.0, 50)
    phi, psi = closed_form_c6(p, ts)
    g = 4 * p["alpha2"] + p["beta"] * p["alpha1"]
    gk = g * p["k"]
    A = c6_argument(p, ts)
    dA = gk * p["lambda1"] ** (p["beta"] * p["k"])
    dphi = -p["alpha1"] / gk * phi / A * dA
    dpsi = -p["alpha2"] / gk * psi / A * dA
    chi = phi ** p["beta"] * psi ** 4
    r1 = dphi + p["alpha1"] * chi ** p["k"] * phi
    r2 = dpsi + p["alpha2"] * chi ** p["k"] * psi
    assert np.max(np.abs(r1) / (1 + np.abs(dphi))) < 1e-10
    assert np.max(np.abs(r2) / (1 + np.abs(dpsi))) < 1e-10
    ode = power_reduced_system(p)
    e1, e2 = ode.derivatives(ts, phi, psi)
    assert np.allclose(e1, dphi, rtol=1e-12) and np.allclose(e2, dpsi, rtol=1e-12)


def test_c6_lambda_scaling():
    p = dict(alpha1=1, alpha2=0.5, beta=2, k=1.5, lambda1=1.0, t0=0.0)
    lam = 1.7
    ts = np.linspace(0.2, 1.0, 9)
    phi_l, _ = closed_form_c6({**p, "lambda1": lam}, ts)
    phi_1, _ = closed_form_c6(p, lam ** (p["beta"] * p["k"]) * ts)
    assert np.allclose(phi_l / lam, phi_1, rtol=1e-13)


def test_c6_errors():
    with pytest.raises(InvalidParams):
        closed_form_c6(dict(alpha1=1, alpha2=-0.5, beta=2, k=1), 1.0)
    with pytest.raises(DomainError):
        closed_form_c6(dict(alpha1=1, alpha2=1, beta=2, k=1, t0=0), -1.0)


@pytest.mark.parametrize("p", C6_SETS)
def test_integration_matches_c6(p):
    t0 = p["t0"]
    tr = integrate(power_reduced_system(p), closed_form_c6(p, t0 + 0.1), (t0 + 0.1, t0 + 2))
    ts = np.linspace(t0 + 0.1, t0 + 2, 400)
    phi, psi = closed_form_c6(p, ts)
    Y = tr(ts)
    assert tr.termination == "Completed"
    assert max(np.max(np.abs(Y[:, 0] - phi) / phi), np.max(np.abs(Y[:, 1] - psi) / psi)) < 1e-6


def test_integrator_order_on_c6():
    p = C6_SETS[1]
    t0 = p["t0"]
    exact = np.array(closed_form_c6(p, t0 + 2))
    res = []
    for rtol in (1e-5, 1e-8):
        tr = integrate(power_reduced_system(p), closed_form_c6(p, t0 + 0.1), (t0 + 0.1, t0 + 2),
                       rtol=rtol, atol=rtol * 1e-3)
        res.append((len(tr.t) - 1, np.max(np.abs(tr.y[-1] - exact) / exact)))
    (n1, e1), (n2, e2) = res
    assert e2 < e1
    assert math.log(e1 / e2) / math.log(n2 / n1) >= 4.0


def test_linear_decay_plane_wave_analog():
    ode = ReducedODESystem.custom(lambda t, a, b: (-a, -b))
    tr = integrate(ode, (1.0, 1.0), (0.0, 3.0))
    assert np.max(np.abs(tr(3.0) - math.exp(-3.0))) < 1e-9 * math.exp(-3.0) * 10


def test_quintic_blowup():
    ode = ReducedODESystem.custom(lambda t, a, b: (0.0 * a, b ** 5))
    tr = integrate(ode, (1.0, 1.0), (0.0, 1.0))
    assert tr.termination == "BlowUpDetected" and abs(tr.t_star - 0.25) < 1e-6


def test_domain_exit_on_fractional_power():
    _, _, ode = table1_triple(3, {"beta": 0.5})
    tr = integrate(ode, (0.05, 1.0), (0.0, 5.0))
    assert tr.termination == "DomainExit"
