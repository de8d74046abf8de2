"""Equivalence transformations, the discrete swap and the Kirchhoff substitution."""

import numpy as np
import pytest

from csym_rd import calc
from csym_rd.calc import Const, Var
from csym_rd.catalog import (PhysicalRDSystem, catalog_operator, catalog_system, system_residual)
from csym_rd.diffusivity import CUSTOM, custom, exponential, power_law, power_profile
from csym_rd.equivalence import (EquivalenceTransform, apply_equivalence, kirchhoff_forward,
                                 kirchhoff_inverse, kirchhoff_maps, normalising_rescaling,
                                 transform_operator, transform_solution)
from csym_rd.errors import InvalidParams, UnsupportedDiffusivity
from csym_rd.exact import c9_family, sample_valid
from csym_rd.symmetry import certify

rng = np.random.default_rng(11)
N = 30
PTS = (rng.uniform(0, 1, N), rng.uniform(-1, 1, N), rng.uniform(0.5, 2, N), rng.uniform(0.5, 2, N))


def fields(s, pt=PTS):
    return np.stack([calc.evaluate(e, pt) for e in (s.d1.d, s.d2.d, s.C1, s.C2)])


def test_identity_transform_leaves_system_unchanged():
    s = catalog_system("T2-I")
    out = apply_equivalence(s, EquivalenceTransform.identity())
    assert np.array_equal(fields(out), fields(s))


def test_inverse_composes_to_identity():
    tr = EquivalenceTransform((2.0, 0.3, -1.5, 0.2, 0.7, -0.1, 3.0, 0.4), swap=True)
    t, x, u, v = PTS
    back = tr.inverse().apply_point(*tr.apply_point(t, x, u, v))
    assert np.max(np.abs(np.stack(back) - np.stack(PTS))) < 1e-12
    with pytest.raises(InvalidParams):
        EquivalenceTransform((0.0, 0, 1, 0, 1, 0, 1, 0))


def test_swap_exchanges_equations():
    s = catalog_system("T2-I")
    sw = apply_equivalence(s, EquivalenceTransform.discrete_swap())
    swapped = (PTS[0], PTS[1], PTS[3], PTS[2])
    a, b = fields(sw), fields(s, swapped)
    assert np.allclose(a[0], b[1]) and np.allclose(a[1], b[0])
    assert np.allclose(a[2], b[3]) and np.allclose(a[3], b[2])


@pytest.mark.parametrize("swap", [False, True])
def test_solutions_map_to_solutions(swap):
    p = {"beta": 2.0, "k": 1.0, "alpha1": 1.0, "alpha2": 1.0, "lambda1": 1.2, "t0": -0.5}
    fam = c9_family(p)
    sys8 = fam.system()
    tr = EquivalenceTransform((1.7, -0.2, 0.8, 0.3, 2.0, 0.0, 0.5, 0.0), swap=swap)
    new = apply_equivalence(sys8, tr)
    U, W = transform_solution(tr, fam.first, fam.second)
    t, x = sample_valid(fam, 50, rng)
    T, X, _, _ = tr.apply_point(t, x, 0.0, 0.0)
    r1, r2, s1, s2 = system_residual(new, U, W, T, X)
    assert max(np.max(np.abs(r1) / s1), np.max(np.abs(r2) / s2)) < 1e-9


def test_rescaling_maps_scaled_form_to_t1_i():
    mu, d2, a1, a2, k = 9.0, 2.0, 0.6, -0.4, 1.5
    scaled = catalog_system("T1-I-scaled", {"mu": mu, "delta2": d2, "f": power_profile(a1, k),
                                            "g": power_profile(a2, k)})
    image = apply_equivalence(scaled, normalising_rescaling(mu, d2))
    # hand-derived profiles: f -> (4/mu) f(delta2 w), g -> 4/(mu delta2) g(delta2 w)
    target = catalog_system("T1-I", {"f": power_profile(4 / mu * a1 * d2 ** k, k),
                                     "g": power_profile(4 / (mu * d2) * a2 * d2 ** k, k)})
    assert np.allclose(fields(image), fields(target), rtol=1e-12)


def test_rescaled_solution_residual():
    # C9 solves S-c8, which is T1-I with f = beta*alpha1*w^k; pull it back to the scaled form
    beta, k, a1, a2, mu, d2 = 2.0, 1.0, 1.0, 1.0, 9.0, 2.0
    fam = c9_family({"beta": beta, "k": k, "alpha1": a1, "alpha2": a2, "lambda1": 1.1, "t0": -0.5})
    f = power_profile(beta * a1 * mu / 4 * d2 ** -k, k)
    g = power_profile(a2 * mu * d2 / 4 * d2 ** -k, k)
    scaled = catalog_system("T1-I-scaled", {"beta": beta, "mu": mu, "delta2": d2, "f": f, "g": g})
    tr = normalising_rescaling(mu, d2).inverse()
    U, W = transform_solution(tr, fam.first, fam.second)
    t, x = sample_valid(fam, 60, rng)
    T, X, _, _ = tr.apply_point(t, x, 0.0, 0.0)
    r1, r2, s1, s2 = system_residual(scaled, U, W, T, X)
    assert max(np.max(np.abs(r1) / s1), np.max(np.abs(r2) / s2)) < 1e-9


def test_transformed_operator_certifies_on_image():
    s = catalog_system("T2-II")
    Q = catalog_operator("Q-T2-II")
    tr = EquivalenceTransform((2.0, 0.0, 0.5, 0.1, 1.0, 0.0, 1.5, 0.0))
    rep = certify(apply_equivalence(s, tr), transform_operator(Q, tr), n=50)
    assert rep.verdict == "FirstType"


# Kirchhoff substitution

def test_kirchhoff_square_example():
    fwd, inv = kirchhoff_maps(power_law(2.0), "u")
    assert np.isclose(calc.evaluate(fwd, (0, 0, 2.0, 0)), 8 / 3)
    phys = PhysicalRDSystem("p", power_law(2.0), power_law(2.0, var="v"), Const(0.0), Const(0.0))
    s = kirchhoff_forward(phys)
    d = calc.evaluate(s.d1.d, (0, 0, 8 / 3, 1.0))
    assert np.isclose(d, 0.25, rtol=1e-14)
    assert np.isclose(d * 2.0 ** 2, 1.0, rtol=1e-14)


def test_kirchhoff_constant_diffusivity_is_identity():
    fwd, inv = kirchhoff_maps(power_law(0.0), "u")
    Us = np.linspace(0.5, 2, 7)
    assert np.allclose(calc.evaluate(fwd, (0, 0, Us, 0)), Us)
    phys = PhysicalRDSystem("p", power_law(0.0), power_law(0.0, var="v"), Var("u"), Var("v"))
    s = kirchhoff_forward(phys)
    assert np.allclose(calc.evaluate(s.d1.d, (0, 0, Us, 1.0)), 1.0)
    assert np.allclose(calc.evaluate(s.C1, (0, 0, Us, 1.0)), -Us)


@pytest.mark.parametrize("fam", [power_law(-3.0), power_law(-2.0), power_law(1.0), power_law(2.0),
                                 exponential(), exponential(0.5, 2.0)])
def test_kirchhoff_roundtrip(fam):
    other = power_law(-4.0 / 3.0, var="v")
    F = Var("u") * Var("v") + 1.0
    phys = PhysicalRDSystem("p", fam, other, F, -F)
    back = kirchhoff_inverse(kirchhoff_forward(phys))
    Us = np.linspace(0.5, 2.0, 50)
    pt = (0.0, 0.0, Us, 1.3)
    a, b = calc.evaluate(fam.d, pt), calc.evaluate(back.D1.d, pt)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-12
    fa, fb = calc.evaluate(F, pt), calc.evaluate(back.F, pt)
    assert np.max(np.abs(fa - fb)) < 1e-12
    fwd, inv = kirchhoff_maps(fam, "u")
    ws = calc.evaluate(fwd, pt)
    assert np.max(np.abs(calc.evaluate(inv, (0.0, 0.0, ws, 1.3)) - Us)) < 1e-12


def test_kirchhoff_custom_unsupported():
    u = Var("u")
    fam = custom(u ** 2 + 1, 2 * u, Const(2.0))
    assert fam.kind == CUSTOM
    phys = PhysicalRDSystem("p", fam, power_law(1.0, var="v"), Const(0.0), Const(0.0))
    with pytest.raises(UnsupportedDiffusivity):
        kirchhoff_forward(phys)
