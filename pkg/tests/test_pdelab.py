"""Finite-difference simulator, error measurement and convergence order."""

import numpy as np
import pytest

from csym_rd.calc import Const
from csym_rd.catalog import PhysicalRDSystem, catalog_physical
from csym_rd.diffusivity import power_law
from csym_rd.errors import DegenerateErrors, InvalidParams, PositivityLoss
from csym_rd.exact import plane_wave_uv_family
from csym_rd.pdelab import (DirichletExact, FixedValues, GridField, benchmark_family,
                            convergence_order, error_vs_exact, simulate)

S13 = {"beta": 2.0, "k": 1.0, "alpha1": 1.0, "alpha2": 1.0}


@pytest.mark.parametrize("engine", ["numba", "numpy"])
def test_constant_equilibrium(engine):
    s = PhysicalRDSystem("zero", power_law(0.0), power_law(0.0, var="v"), Const(0.0), Const(0.0),
                         F_terms=((0.0, 0.0, 0.0),), G_terms=((0.0, 0.0, 0.0),))
    res = simulate(s, GridField.constant((0.0, 1.0), 32, 1.5, 0.7), FixedValues(1.5, 1.5, 0.7, 0.7),
                   0.5, engine=engine)
    last = res.snapshots[-1]
    assert res.engine == engine and res.n_steps > 0
    assert np.max(np.abs(last.U - 1.5)) < 1e-12 and np.max(np.abs(last.V - 0.7)) < 1e-12


def test_zero_steps_zero_error():
    fam = benchmark_family()
    ic = GridField.from_family(fam, (0.0, 0.5), 32, 0.0)
    res = simulate(fam.system(), ic, DirichletExact(fam), 0.0)
    assert res.n_steps == 0
    e = error_vs_exact(res.snapshots, fam)[0]
    assert e["U_linf"] == 0.0 and e["V_linf"] == 0.0 and e["U_l2"] == 0.0


def test_plane_wave_uv_accuracy():
    fam = plane_wave_uv_family({"beta": 2.0, "alpha1": 0.5, "alpha2": 0.25})
    ic = GridField.from_family(fam, (0.0, 0.5), 128, 0.0)
    res = simulate(fam.system(), ic, DirichletExact(fam), 0.02)
    e = error_vs_exact(res.snapshots, fam)[-1]
    assert max(e["U_linf"], e["V_linf"]) < 1e-5


def test_engines_agree():
    fam = benchmark_family()
    s = catalog_physical("S-c13", S13)
    ic = GridField.from_family(fam, (0.0, 0.5), 16, 0.0)
    a = simulate(s, ic, DirichletExact(fam), 0.05, engine="numba", snapshot_times=[0.0, 0.02, 0.05])
    b = simulate(s, ic, DirichletExact(fam), 0.05, engine="numpy", snapshot_times=[0.0, 0.02, 0.05])
    assert a.n_steps == b.n_steps and len(a.snapshots) == 3
    for p, q in zip(a.snapshots, b.snapshots):
        assert p.t == q.t
        assert np.max(np.abs(p.U - q.U)) < 1e-10 and np.max(np.abs(p.V - q.V)) < 1e-10


def test_step_bound_respected():
    fam = benchmark_family()
    ic = GridField.from_family(fam, (0.0, 0.5), 32, 0.0)
    res = simulate(fam.system(), ic, DirichletExact(fam), 0.05, cfl=0.5)
    assert 0.0 < res.max_dt_ratio <= 1.0


@pytest.mark.parametrize("engine", ["auto", "numpy"])
def test_positivity_loss(engine):
    s = catalog_physical("S-c13", S13)
    with pytest.raises(PositivityLoss):
        simulate(s, GridField.constant((0.0, 1.0), 16, 1.0, 1.0), FixedValues(0.0, 1.0, 1.0, 1.0),
                 0.1, engine=engine)
    with pytest.raises(PositivityLoss):
        simulate(s, GridField.constant((0.0, 1.0), 16, -1.0, 1.0), FixedValues(1, 1, 1, 1), 0.1)


def test_invalid_inputs():
    fam = benchmark_family()
    ic = GridField.from_family(fam, (0.0, 0.5), 8, 0.0)
    with pytest.raises(InvalidParams):
        simulate(fam.system(), ic, DirichletExact(fam), 0.1, cfl=1.5)
    with pytest.raises(InvalidParams):
        GridField(0.0, 1.0, 4, np.ones(4), np.ones(5))


def test_convergence_order_examples():
    e = 1e-3
    assert np.isclose(convergence_order(4 * e, e, e / 4), 2.0, rtol=0, atol=1e-14)
    with pytest.raises(DegenerateErrors):
        convergence_order(e, e, e)
    with pytest.raises(DegenerateErrors):
        convergence_order(e, 0.0, e)


def test_benchmark_accuracy_and_ratio(benchmark_study):
    e64, e128, e256 = benchmark_study.errors
    assert e128 < 5e-4
    assert e64 / e128 >= 3.7 and e128 / e256 >= 3.7
    assert e64 > e128 > e256
    assert all(r <= 1.0 for r in benchmark_study.ratios)
