"""Adaptive Dormand-Prince 5(4) integrator with dense output and blow-up detection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, StiffnessFailure

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between 5th and embedded 4th order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic dense-output coefficients (Shampine's continuous extension)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

COMPLETED = "Completed"
BLOW_UP = "BlowUpDetected"
DOMAIN_EXIT = "DomainExit"

BLOWUP_NORM = 1e12
STEP_FLOOR = 1e-14


@dataclass
class Trajectory:
    """Accepted steps of an integration plus a dense interpolant.

    Attributes
    ----------
    t : ndarray, shape (n,)
        Accepted times (including the initial time).
    y : ndarray, shape (n, m)
        States at ``t``.
    h_log : ndarray
        Attempted step sizes, in order.
    accepted_log : ndarray of bool
        Whether each attempted step was accepted.
    termination : str
        ``"Completed"``, ``"BlowUpDetected"`` or ``"DomainExit"``.
    t_star : float or None
        Extrapolated blow-up time when ``termination == "BlowUpDetected"``.
    """

    t: np.ndarray
    y: np.ndarray
    h_log: np.ndarray
    accepted_log: np.ndarray
    termination: str
    t_star: float | None = None
    _Q: np.ndarray = field(default=None, repr=False)

    @property
    def phi(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def psi(self) -> np.ndarray:
        return self.y[:, 1]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def _locate(self, tq):
        tq = np.asarray(tq, dtype=float)
        direction = 1.0 if self.t[-1] >= self.t[0] else -1.0
        lo, hi = min(self.t[0], self.t[-1]), max(self.t[0], self.t[-1])
        if np.any((tq < lo - 1e-12 * max(1.0, abs(lo))) | (tq > hi + 1e-12 * max(1.0, abs(hi)))):
            raise DomainError("interpolation time outside the integrated span")
        keys = direction * self.t
        idx = np.searchsorted(keys, direction * tq, side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        theta = (tq - self.t[idx]) / h
        return idx, h, theta

    def __call__(self, tq) -> np.ndarray:
        """Interpolated state, shape ``tq.shape + (m,)``."""
        if len(self.t) < 2:
            return np.broadcast_to(self.y[0], np.shape(tq) + self.y.shape[1:]).copy()
        idx, h, theta = self._locate(tq)
        powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)
        return self.y[idx] + h[..., None] * np.einsum("...mk,...k->...m", self._Q[idx], powers)

    def derivative(self, tq) -> np.ndarray:
        """Time derivative of the dense interpolant."""
        idx, h, theta = self._locate(tq)
        powers = np.stack([np.ones_like(theta), 2 * theta, 3 * theta ** 2, 4 * theta ** 3], axis=-1)
        return np.einsum("...mk,...k->...m", self._Q[idx], powers)

    def to_csv(self, path, names=("phi", "psi")) -> None:
        """Write accepted states as CSV with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(fh, self, names)


def write_trajectory_csv(fh, traj: Trajectory, names=("phi", "psi")) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", *names])
    for ti, yi in zip(traj.t, traj.y):
        w.writerow([f"{ti:.17g}", *(f"{z:.17g}" for z in yi)])


def _rms(z) -> float:
    return float(np.sqrt(np.mean(np.square(z))))


def _initial_step(fun, t0, y0, f0, direction, rtol, atol, span) -> float:
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        f1 = np.asarray(fun(t0 + direction * h0, y0 + direction * h0 * f0), dtype=float)
        d2 = _rms((f1 - f0) / scale) / h0
    except DomainError:
        return h0 * 1e-3
    if not np.isfinite(d2):
        return h0 * 1e-3
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _blowup_time(ts, ys, fs) -> float:
    """Extrapolate the zero of N/N' (N = sum |y_i|) linearly from the last two steps.

    For a power-law singularity N ~ c (t* - t)^(-p) the ratio N/N' equals
    (t* - t)/p exactly, so the linear extrapolation is exact in that limit.
    """
    g = []
    for y, f in zip(ys, fs):
        n = np.sum(np.abs(y))
        dn = np.sum(np.sign(y) * f)
        g.append(n / dn if dn != 0 else np.inf)
    (t1, t2), (g1, g2) = ts, g
    if not np.isfinite(g1) or not np.isfinite(g2) or g1 == g2:
        return float(t2)
    return float(t2 + g2 * (t2 - t1) / (g1 - g2))


def integrate_ivp(fun: Callable, t_span, y0, rtol: float = 1e-9, atol: float = 1e-12,
                  max_step: float = np.inf, blowup_norm: float = BLOWUP_NORM,
                  step_floor: float = STEP_FLOOR, max_steps: int = 1_000_000) -> Trajectory:
    """Integrate ``y' = fun(t, y)`` over ``t_span`` with Dormand-Prince 5(4).

    Parameters
    ----------
    fun : callable
        Right-hand side; may raise :class:`DomainError` when the state leaves
        its domain, which is handled by shrinking the step.
    t_span : (float, float)
        Start and end time; integration backwards in time is allowed.
    y0 : array_like
        Initial state.
    rtol, atol : float
        Tolerances of the mixed error test.

    Returns
    -------
    Trajectory
        Terminates early with ``BlowUpDetected`` when ``sum |y|`` exceeds
        ``blowup_norm`` or the step collapses below ``step_floor`` while the
        solution grows, and with ``DomainExit`` when the step collapses against
        a domain boundary.

    Raises
    ------
    StiffnessFailure
        The step collapsed while the solution stayed bounded.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.array(y0, dtype=float)
    f = np.asarray(fun(t0, y), dtype=float)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    norm0 = float(np.sum(np.abs(y)))
    ts, ys, Qs, fs = [t0], [y.copy()], [], [f.copy()]
    h_log, acc_log = [], []
    if span == 0.0:
        return Trajectory(np.array(ts), np.array(ys), np.array(h_log), np.array(acc_log, bool),
                          COMPLETED, None, np.zeros((0, y.size, 4)))
    h = min(_initial_step(fun, t0, y, f, direction, rtol, atol, span), max_step)
    t = t0
    termination, t_star = COMPLETED, None
    domain_hit = False
    K = np.empty((7, y.size))
    for _ in range(max_steps):
        remaining = direction * (t1 - t)
        if remaining <= 0:
            break
        h = min(h, remaining, max_step)
        if h < step_floor and h < remaining:
            norm = float(np.sum(np.abs(y)))
            if domain_hit:
                termination = DOMAIN_EXIT
            elif norm > 10.0 * max(norm0, 1.0) and len(ts) >= 2:
                termination = BLOW_UP
                t_star = _blowup_time(ts[-2:], ys[-2:], fs[-2:])
            else:
                raise StiffnessFailure(
                    f"step size collapsed to {h:.3e} at t = {t:.17g} without growth")
            break
        hs = direction * h
        K[0] = f
        try:
            for s in range(1, 6):
                dy = np.dot(K[:s].T, _A[s]) * hs
                K[s] = fun(t + _C[s] * hs, y + dy)
            y_new = y + hs * np.dot(K[:6].T, _B)
            t_new = t + hs if h < remaining else t1
            f_new = np.asarray(fun(t_new, y_new), dtype=float)
        except DomainError:
            h_log.append(h)
            acc_log.append(False)
            domain_hit = True
            h *= 0.25
            continue
        K[6] = f_new
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            h_log.append(h)
            acc_log.append(False)
            h *= 0.25
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(hs * np.dot(K.T, _E) / scale)
        h_log.append(h)
        if err <= 1.0:
            acc_log.append(True)
            Qs.append(K.T @ _P)
            t, y, f = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f.copy())
            domain_hit = False
            factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            h *= factor
            if float(np.sum(np.abs(y))) > blowup_norm:
                termination = BLOW_UP
                t_star = _blowup_time(ts[-2:], ys[-2:], fs[-2:])
                break
        else:
            acc_log.append(False)
            h *= max(0.2, 0.9 * err ** -0.2)
    else:
        raise StiffnessFailure(f"exceeded {max_steps} steps before reaching t = {t1}")
    return Trajectory(np.array(ts), np.array(ys), np.array(h_log), np.array(acc_log, bool),
                      termination, t_star, np.array(Qs) if Qs else np.zeros((0, y.size, 4)))
