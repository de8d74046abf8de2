"""Explicit conservative finite-difference simulator for physical-form RD systems."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from . import calc
from .catalog import PhysicalRDSystem
from .diffusivity import POWER
from .errors import DegenerateErrors, DomainError, InvalidParams, PositivityLoss, StepCollapse
from .exact import ExactSolutionFamily, eval_family

MAX_STEPS = 50_000_000


@dataclass
class GridField:
    """Two components on the uniform grid ``x_i = x_left + i dx``, ``i = 0..n``."""

    x_left: float
    x_right: float
    n: int
    U: np.ndarray
    V: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.n < 2 or self.U.shape != (self.n + 1,) or self.V.shape != (self.n + 1,):
            raise InvalidParams(f"components must have length n + 1 = {self.n + 1}")
        if not self.x_right > self.x_left:
            raise InvalidParams("x_right > x_left required")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_left, self.x_right, self.n + 1)

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n

    @classmethod
    def from_family(cls, family: ExactSolutionFamily, x_range, n: int, t: float) -> "GridField":
        xs = np.linspace(x_range[0], x_range[1], n + 1)
        vals = eval_family(family, np.full_like(xs, t), xs)
        a, b = family.names
        return cls(x_range[0], x_range[1], n, vals[a], vals[b], t)

    @classmethod
    def constant(cls, x_range, n: int, U0: float, V0: float, t: float = 0.0) -> "GridField":
        return cls(x_range[0], x_range[1], n, np.full(n + 1, U0), np.full(n + 1, V0), t)


@dataclass(frozen=True)
class DirichletExact:
    """Boundary values taken from an exact family at every step."""

    family: ExactSolutionFamily


@dataclass(frozen=True)
class FixedValues:
    """Constant boundary values ``(U_left, U_right, V_left, V_right)``."""

    U_left: float
    U_right: float
    V_left: float
    V_right: float


@dataclass
class SimulationResult:
    """Snapshots plus step statistics; ``max_dt_ratio <= 1`` certifies the step bound."""

    snapshots: list
    n_steps: int
    max_dt_ratio: float
    engine: str
    runtime: float

    def to_csv(self, path) -> None:
        """Snapshot CSV with columns ``t, x, U, V``."""
        with open(path, "w") as fh:
            write_snapshots_csv(fh, self.snapshots)


def write_snapshots_csv(fh, snapshots) -> None:
    fh.write("t,x,U,V\n")
    for s in snapshots:
        for xi, a, b in zip(s.x, s.U, s.V):
            fh.write(f"{s.t:.17g},{xi:.17g},{a:.17g},{b:.17g}\n")


# ---------------------------------------------------------------------------
# compiled path
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _bval(b, t, x):
    # b = (P, c, t0, a, lam, bx)
    base = 1.0
    if b[1] != 0.0:
        base = (b[1] * (t - b[2])) ** b[3]
    return b[0] * base * math.exp(b[4] * t + b[5] * x)


@numba.njit(cache=True)
def _kernel(U, V, xL, xR, t, snap_times, dU, mU, dV, mV, Fc, FpU, FpV, Gc, GpU, GpV,
            bnd, cfl, guardU, guardV, max_steps):
    n = U.shape[0] - 1
    dx = (xR - xL) / n
    inv_dx2 = 1.0 / (dx * dx)
    out = np.empty((snap_times.shape[0], 2, n + 1))
    DU = np.empty(n + 1)
    DV = np.empty(n + 1)
    lU = np.empty(n + 1)
    lV = np.empty(n + 1)
    Un = U.copy()
    Vn = V.copy()
    steps = 0
    max_ratio = 0.0
    k = 0
    while k < snap_times.shape[0] and snap_times[k] <= t:
        out[k, 0] = U
        out[k, 1] = V
        k += 1
    while k < snap_times.shape[0]:
        dmax = 0.0
        for i in range(n + 1):
            if U[i] <= 0.0 and guardU:
                return out, steps, max_ratio, 1, t
            if V[i] <= 0.0 and guardV:
                return out, steps, max_ratio, 1, t
            lU[i] = math.log(U[i]) if U[i] > 0.0 else -np.inf
            lV[i] = math.log(V[i]) if V[i] > 0.0 else -np.inf
            DU[i] = dU * math.exp(mU * lU[i]) if mU != 0.0 else dU
            DV[i] = dV * math.exp(mV * lV[i]) if mV != 0.0 else dV
            if DU[i] > dmax:
                dmax = DU[i]
            if DV[i] > dmax:
                dmax = DV[i]
        if not (dmax > 0.0) or not math.isfinite(dmax):
            return out, steps, max_ratio, 2, t
        limit = cfl * dx * dx / (2.0 * dmax)
        dt = limit
        last = False
        if t + dt >= snap_times[k]:
            dt = snap_times[k] - t
            last = True
        if dt < 1e-300 or steps >= max_steps:
            return out, steps, max_ratio, 2, t
        ratio = dt / (cfl * dx * dx / (2.0 * dmax))
        if ratio > max_ratio:
            max_ratio = ratio
        for i in range(1, n):
            fr = 0.5 * (DU[i] + DU[i + 1]) * (U[i + 1] - U[i])
            fl = 0.5 * (DU[i] + DU[i - 1]) * (U[i] - U[i - 1])
            src = 0.0
            for j in range(Fc.shape[0]):
                src += Fc[j] * math.exp(FpU[j] * lU[i] + FpV[j] * lV[i])
            Un[i] = U[i] + dt * ((fr - fl) * inv_dx2 + src)
            fr = 0.5 * (DV[i] + DV[i + 1]) * (V[i + 1] - V[i])
            fl = 0.5 * (DV[i] + DV[i - 1]) * (V[i] - V[i - 1])
            src = 0.0
            for j in range(Gc.shape[0]):
                src += Gc[j] * math.exp(GpU[j] * lU[i] + GpV[j] * lV[i])
            Vn[i] = V[i] + dt * ((fr - fl) * inv_dx2 + src)
        t = snap_times[k] if last else t + dt
        Un[0] = _bval(bnd[0], t, xL)
        Un[n] = _bval(bnd[1], t, xR)
        Vn[0] = _bval(bnd[2], t, xL)
        Vn[n] = _bval(bnd[3], t, xR)
        U, Un = Un, U
        V, Vn = Vn, V
        steps += 1
        while k < snap_times.shape[0] and snap_times[k] <= t:
            out[k, 0] = U
            out[k, 1] = V
            k += 1
    return out, steps, max_ratio, 0, t


@numba.njit(cache=True)
def _spow(r, ir, e):
    # r**e for a small integer e, using the precomputed inverse ir = 1/r
    b = r if e >= 0 else ir
    m = e if e >= 0 else -e
    acc = 1.0
    for _ in range(m):
        acc *= b
    return acc


@numba.njit(cache=True)
def _root_update(r, ir, w, q, exact):
    # q-th root of w; one Newton step from the previous root is enough because
    # w changes by O(dt) per step, and an exact refresh bounds any drift
    if exact or r <= 0.0:
        return math.exp(math.log(w) / q)
    return r * ((q - 1) + w * _spow(r, ir, -q)) * (1.0 / q)


@numba.njit(cache=True)
def _kernel_rational(U, V, xL, xR, t, snap_times, dU, mU, dV, mV, Fc, FpU, FpV, Gc, GpU, GpV,
                     bnd, cfl, qU, qV, max_steps):
    # all exponents are integers in units of 1/qU (U) and 1/qV (V); U, V > 0
    n = U.shape[0] - 1
    dx = (xR - xL) / n
    inv_dx2 = 1.0 / (dx * dx)
    out = np.empty((snap_times.shape[0], 2, n + 1))
    DU = np.empty(n + 1)
    DV = np.empty(n + 1)
    rU = np.zeros(n + 1)
    rV = np.zeros(n + 1)
    iU = np.zeros(n + 1)
    iV = np.zeros(n + 1)
    Un = U.copy()
    Vn = V.copy()
    steps = 0
    max_ratio = 0.0
    k = 0
    while k < snap_times.shape[0] and snap_times[k] <= t:
        out[k, 0] = U
        out[k, 1] = V
        k += 1
    while k < snap_times.shape[0]:
        dmax = 0.0
        exact = steps % 256 == 0
        for i in range(n + 1):
            if U[i] <= 0.0 or V[i] <= 0.0:
                return out, steps, max_ratio, 1, t
            rU[i] = _root_update(rU[i], iU[i], U[i], qU, exact)
            rV[i] = _root_update(rV[i], iV[i], V[i], qV, exact)
            iU[i] = 1.0 / rU[i]
            iV[i] = 1.0 / rV[i]
            DU[i] = dU * _spow(rU[i], iU[i], mU)
            DV[i] = dV * _spow(rV[i], iV[i], mV)
            if DU[i] > dmax:
                dmax = DU[i]
            if DV[i] > dmax:
                dmax = DV[i]
        if not (dmax > 0.0) or not math.isfinite(dmax):
            return out, steps, max_ratio, 2, t
        limit = cfl * dx * dx / (2.0 * dmax)
        dt = limit
        last = False
        if t + dt >= snap_times[k]:
            dt = snap_times[k] - t
            last = True
        if dt < 1e-300 or steps >= max_steps:
            return out, steps, max_ratio, 2, t
        ratio = dt / (cfl * dx * dx / (2.0 * dmax))
        if ratio > max_ratio:
            max_ratio = ratio
        for i in range(1, n):
            fr = 0.5 * (DU[i] + DU[i + 1]) * (U[i + 1] - U[i])
            fl = 0.5 * (DU[i] + DU[i - 1]) * (U[i] - U[i - 1])
            src = 0.0
            for j in range(Fc.shape[0]):
                src += Fc[j] * _spow(rU[i], iU[i], FpU[j]) * _spow(rV[i], iV[i], FpV[j])
            Un[i] = U[i] + dt * ((fr - fl) * inv_dx2 + src)
            fr = 0.5 * (DV[i] + DV[i + 1]) * (V[i + 1] - V[i])
            fl = 0.5 * (DV[i] + DV[i - 1]) * (V[i] - V[i - 1])
            src = 0.0
            for j in range(Gc.shape[0]):
                src += Gc[j] * _spow(rU[i], iU[i], GpU[j]) * _spow(rV[i], iV[i], GpV[j])
            Vn[i] = V[i] + dt * ((fr - fl) * inv_dx2 + src)
        t = snap_times[k] if last else t + dt
        Un[0] = _bval(bnd[0], t, xL)
        Un[n] = _bval(bnd[1], t, xR)
        Vn[0] = _bval(bnd[2], t, xL)
        Vn[n] = _bval(bnd[3], t, xR)
        U, Un = Un, U
        V, Vn = Vn, V
        steps += 1
        while k < snap_times.shape[0] and snap_times[k] <= t:
            out[k, 0] = U
            out[k, 1] = V
            k += 1
    return out, steps, max_ratio, 0, t


def _common_denominator(exponents, max_q=12):
    """Smallest ``q <= max_q`` making every exponent an integer multiple of ``1/q``."""
    for q in range(1, max_q + 1):
        if all(abs(e * q - round(e * q)) < 1e-9 for e in exponents):
            return q
    return None


def _power_params(fam):
    """``(delta, m)`` with ``D = delta W^m`` or ``None``."""
    if fam.kind != POWER or fam.params.get("sign", 1.0) != 1.0 or fam.params.get("offset", 0.0):
        return None
    return float(fam.params["delta"]), float(fam.params["beta"])


def _boundary_rows(bc, ic):
    if isinstance(bc, FixedValues):
        vals = (bc.U_left, bc.U_right, bc.V_left, bc.V_right)
        return np.array([[val, 0.0, 0.0, 0.0, 0.0, 0.0] for val in vals])
    sep = bc.family.separable
    if sep is None:
        return None
    rows = []
    for s in sep:
        row = [s.P, s.c, s.t0, s.a, s.lam, s.b]
        rows += [row, row]
    return np.array(rows)


def _compiled_inputs(system, bc, ic):
    pu, pv = _power_params(system.D1), _power_params(system.D2)
    if pu is None or pv is None or system.F_terms is None or system.G_terms is None:
        return None
    bnd = _boundary_rows(bc, ic)
    if bnd is None:
        return None
    F = np.array(system.F_terms, dtype=float).reshape(-1, 3)
    G = np.array(system.G_terms, dtype=float).reshape(-1, 3)
    return pu, pv, F, G, bnd


def _needs_positive(system, which):
    fam = system.D1 if which == 0 else system.D2
    if fam.kind == POWER:
        m = float(fam.params.get("beta", 0.0))
        if m < 0 or not m.is_integer():
            return True
    if system.F_terms is None or system.G_terms is None:
        return True
    for terms in (system.F_terms, system.G_terms):
        for term in terms:
            p = term[1 + which]
            if p < 0 or not float(p).is_integer():
                return True
    return False


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def _boundary_values(bc, t, xL, xR):
    if isinstance(bc, FixedValues):
        return bc.U_left, bc.U_right, bc.V_left, bc.V_right
    vals = eval_family(bc.family, np.array([t, t]), np.array([xL, xR]))
    a, b = bc.family.names
    return vals[a][0], vals[a][1], vals[b][0], vals[b][1]


def _numpy_run(system, ic, bc, snap_times, cfl, guards, max_steps):
    U, V, t = ic.U.copy(), ic.V.copy(), ic.t
    x = ic.x
    dx = ic.dx
    out = []
    k = 0
    steps, max_ratio = 0, 0.0
    while k < len(snap_times) and snap_times[k] <= t:
        out.append((U.copy(), V.copy()))
        k += 1
    while k < len(snap_times):
        if (guards[0] and np.any(U <= 0)) or (guards[1] and np.any(V <= 0)):
            raise PositivityLoss(f"a component left the positive domain at t = {t:.17g}")
        pt = (np.full_like(x, t), x, U, V)
        try:
            DU = np.broadcast_to(calc.evaluate(system.D1.d, pt), U.shape)
            DV = np.broadcast_to(calc.evaluate(system.D2.d, pt), V.shape)
            F = calc.evaluate(system.F, pt)
            G = calc.evaluate(system.G, pt)
        except DomainError as exc:
            raise PositivityLoss(str(exc)) from exc
        dmax = max(np.max(DU), np.max(DV))
        if not (dmax > 0) or not np.isfinite(dmax):
            raise StepCollapse(f"diffusivity maximum {dmax} at t = {t:.17g}")
        limit = cfl * dx * dx / (2.0 * dmax)
        dt = min(limit, snap_times[k] - t)
        if dt < 1e-300 or steps >= max_steps:
            raise StepCollapse(f"time step collapsed at t = {t:.17g}")
        max_ratio = max(max_ratio, dt / limit)
        Dfu, Dfv = 0.5 * (DU[1:] + DU[:-1]), 0.5 * (DV[1:] + DV[:-1])
        fu, fv = Dfu * np.diff(U), Dfv * np.diff(V)
        Un, Vn = U.copy(), V.copy()
        Un[1:-1] += dt * (np.diff(fu) / dx ** 2 + np.broadcast_to(F, U.shape)[1:-1])
        Vn[1:-1] += dt * (np.diff(fv) / dx ** 2 + np.broadcast_to(G, V.shape)[1:-1])
        t = snap_times[k] if dt == snap_times[k] - t else t + dt
        Un[0], Un[-1], Vn[0], Vn[-1] = _boundary_values(bc, t, ic.x_left, ic.x_right)
        U, V = Un, Vn
        steps += 1
        while k < len(snap_times) and snap_times[k] <= t:
            out.append((U.copy(), V.copy()))
            k += 1
    return out, steps, max_ratio


def simulate(system: PhysicalRDSystem, ic: GridField, bc, t_end: float, cfl: float = 0.9,
             snapshot_times=None, engine: str = "auto", max_steps: int = MAX_STEPS) -> SimulationResult:
    """Integrate ``W_t = (D(W) W_x)_x + R`` with explicit conservative differences.

    Face diffusivities are arithmetic means of node values and the step is
    ``dt = cfl dx^2 / (2 max D)``, recomputed each step and shortened only to
    land on snapshot times.

    Parameters
    ----------
    system : PhysicalRDSystem
        Diffusivities ``D1(U)``, ``D2(V)`` and reactions ``F``, ``G``.
    ic : GridField
        Initial data at ``ic.t``.
    bc : DirichletExact or FixedValues
        Boundary values at both ends.
    snapshot_times : sequence of float, optional
        Defaults to ``[ic.t, t_end]``.
    engine : {"auto", "numba", "numpy"}
        ``"auto"`` uses the compiled kernel for power-law diffusivities with
        monomial reactions and separable boundary data.

    Raises
    ------
    PositivityLoss
        A component that must stay positive reached zero or below.
    StepCollapse
        The step bound degenerated or ``max_steps`` was exceeded.
    """
    if not 0.0 < cfl <= 1.0:
        raise InvalidParams("cfl must lie in (0, 1]")
    if not t_end >= ic.t:
        raise InvalidParams("t_end >= initial time required")
    snaps = np.array(sorted(set([ic.t, float(t_end)] if snapshot_times is None
                                else [float(s) for s in snapshot_times])), dtype=float)
    if snaps[0] < ic.t or snaps[-1] > t_end:
        raise InvalidParams("snapshot times must lie in [t_initial, t_end]")
    guards = (_needs_positive(system, 0), _needs_positive(system, 1))
    if (guards[0] and np.any(ic.U <= 0)) or (guards[1] and np.any(ic.V <= 0)):
        raise PositivityLoss("initial data must be positive")
    inputs = None if engine == "numpy" else _compiled_inputs(system, bc, ic)
    if engine == "numba" and inputs is None:
        raise InvalidParams("the compiled path needs power-law D, monomial reactions and separable boundaries")
    start = time.perf_counter()
    if inputs is not None:
        (dU, mU), (dV, mV), F, G, bnd = inputs
        qU = _common_denominator([mU, *F[:, 1], *G[:, 1]])
        qV = _common_denominator([mV, *F[:, 2], *G[:, 2]])
        if qU is not None and qV is not None and guards[0] and guards[1]:
            out, steps, ratio, status, t_fail = _kernel_rational(
                ic.U.copy(), ic.V.copy(), ic.x_left, ic.x_right, ic.t, snaps,
                dU, int(round(mU * qU)), dV, int(round(mV * qV)),
                F[:, 0].copy(), np.rint(F[:, 1] * qU).astype(np.int64),
                np.rint(F[:, 2] * qV).astype(np.int64), G[:, 0].copy(),
                np.rint(G[:, 1] * qU).astype(np.int64), np.rint(G[:, 2] * qV).astype(np.int64),
                bnd, cfl, qU, qV, max_steps)
        else:
            out, steps, ratio, status, t_fail = _kernel(
                ic.U.copy(), ic.V.copy(), ic.x_left, ic.x_right, ic.t, snaps, dU, mU, dV, mV,
                F[:, 0].copy(), F[:, 1].copy(), F[:, 2].copy(), G[:, 0].copy(), G[:, 1].copy(),
                G[:, 2].copy(), bnd, cfl, guards[0], guards[1], max_steps)
        if status == 1:
            raise PositivityLoss(f"a component left the positive domain at t = {t_fail:.17g}")
        if status == 2:
            raise StepCollapse(f"time step collapsed at t = {t_fail:.17g}")
        frames = [(out[i, 0], out[i, 1]) for i in range(len(snaps))]
        used = "numba"
    else:
        frames, steps, ratio = _numpy_run(system, ic, bc, snaps, cfl, guards, max_steps)
        used = "numpy"
    runtime = time.perf_counter() - start
    shots = [GridField(ic.x_left, ic.x_right, ic.n, a, b, float(s)) for s, (a, b) in zip(snaps, frames)]
    return SimulationResult(shots, int(steps), float(ratio), used, runtime)


# ---------------------------------------------------------------------------
# errors and convergence
# ---------------------------------------------------------------------------

def error_vs_exact(snapshots, family: ExactSolutionFamily) -> list:
    """Per-snapshot ``L_inf`` and discrete ``L2`` errors of both components."""
    rows = []
    a, b = family.names
    for s in snapshots:
        vals = eval_family(family, np.full(s.n + 1, s.t), s.x)
        row = {"t": s.t}
        for name, num, ex in (("U", s.U, vals[a]), ("V", s.V, vals[b])):
            e = np.abs(num - ex)
            row[f"{name}_linf"] = float(np.max(e))
            row[f"{name}_l2"] = float(np.sqrt(s.dx * np.sum(e ** 2)))
        rows.append(row)
    return rows


def convergence_order(e_n: float, e_2n: float, e_4n: float) -> float:
    """Mean of ``log2(e_n/e_2n)`` and ``log2(e_2n/e_4n)``.

    Raises
    ------
    DegenerateErrors
        An error is not positive or the sequence is not strictly decreasing.
    """
    errs = [float(e_n), float(e_2n), float(e_4n)]
    if any(not (e > 0 and math.isfinite(e)) for e in errs):
        raise DegenerateErrors("errors must be positive and finite")
    if not errs[0] > errs[1] > errs[2]:
        raise DegenerateErrors("errors must decrease strictly under refinement")
    return 0.5 * (math.log2(errs[0] / errs[1]) + math.log2(errs[1] / errs[2]))


@dataclass
class StudyResult:
    grids: list
    errors: list
    order: float
    runtime: float
    config: dict = field(default_factory=dict)
    ratios: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"grids": self.grids, "errors": self.errors, "order": self.order,
                "runtime": self.runtime, "max_dt_ratio": self.ratios, "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def convergence_study(system: PhysicalRDSystem, family: ExactSolutionFamily, grids=(64, 128, 256),
                      x_range=(0.0, 0.5), t_start: float = 0.0, t_end: float = 0.25,
                      cfl: float = 0.9, engine: str = "auto") -> StudyResult:
    """Run the simulator on successively refined grids against an exact family.

    The error of each run is the ``L_inf`` error over both components at
    ``t_end``; the order follows :func:`convergence_order`.
    """
    if len(grids) != 3 or grids[1] != 2 * grids[0] or grids[2] != 2 * grids[1]:
        raise InvalidParams("grids must be n, 2n, 4n")
    start = time.perf_counter()
    errors, ratios = [], []
    for n in grids:
        ic = GridField.from_family(family, x_range, n, t_start)
        res = simulate(system, ic, DirichletExact(family), t_end, cfl, engine=engine)
        e = error_vs_exact(res.snapshots[-1:], family)[0]
        errors.append(max(e["U_linf"], e["V_linf"]))
        ratios.append(res.max_dt_ratio)
    order = convergence_order(*errors)
    cfg = {"x_range": list(x_range), "t_start": t_start, "t_end": t_end, "cfl": cfl,
           "family": family.family_id, "family_params": family.params, "system": system.catalog_id}
    return StudyResult(list(grids), errors, order, time.perf_counter() - start, cfg, ratios)


def benchmark_family(params: dict | None = None) -> ExactSolutionFamily:
    """The smooth benchmark: ``beta = 2``, ``k = 1``, ``alpha1* = alpha2* = 3``, ``t0 = -1``."""
    from .exact import c14_family
    p = {"beta": 2.0, "k": 1.0, "alpha1s": 3.0, "alpha2s": 3.0, "t0": -1.0, **(params or {})}
    return c14_family(p)

