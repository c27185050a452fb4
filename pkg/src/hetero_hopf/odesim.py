"""Time integration of the weighted ODEs for the spatial means (u, v) and
classification of the long-time behaviour.

    E1 u' = u (E_m - u E2) - v ∫ e u/(1 + e u) dx
       v' = -r v + (l v / |Ω|) ∫ e u/(1 + e u) dx

u is a scalar, so the integral is a quadrature over the node values of e^{αm}.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import NonFiniteState
from .quad import DEFAULT_RULE, OMEGA, QuadRule, moments

MAX_SAMPLES = 100_000
CLAMP_SLACK = 1e-12
NEAR_THRESHOLD = 0.02


@dataclass(frozen=True)
class OdeState:
    u: float
    v: float
    t: float = 0.0


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    clamp_count: int = 0

    @property
    def final(self) -> OdeState:
        return OdeState(float(self.u[-1]), float(self.v[-1]), float(self.t[-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "u", "v"])
            for row in zip(self.t, self.u, self.v):
                writer.writerow([f"{x:.17g}" for x in row])


class Attractor(str, enum.Enum):
    EQUILIBRIUM = "Equilibrium"
    LIMIT_CYCLE = "LimitCycle"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class TrajectorySummary:
    attractor: Attractor
    final_state: OdeState
    amplitude: float
    period_estimate: float | None


@dataclass(frozen=True)
class _Coefficients:
    ew: np.ndarray
    w: np.ndarray
    E1: float
    E2: float
    Em: float
    r: float
    l: float


def _coefficients(profile, alpha, r, l, rule):
    wm = moments(profile, alpha, rule)
    return _Coefficients(
        np.ascontiguousarray(wm.ew), np.ascontiguousarray(wm.w), wm.E(1), wm.E(2), wm.E_m, r, l
    )


@numba.njit(cache=True)
def _rhs(u, v, ew, w, E1, E2, Em, r, l_per_omega):
    uptake = 0.0
    for i in range(ew.shape[0]):
        eu = ew[i] * u
        uptake += w[i] * eu / (1.0 + eu)
    du = (u * (Em - u * E2) - v * uptake) / E1
    dv = -r * v + l_per_omega * v * uptake
    return du, dv


@numba.njit(cache=True)
def _rk4(u, v, dt, n_steps, stride, ew, w, E1, E2, Em, r, l, slack):
    n_out = n_steps // stride + 1
    us = np.empty(n_out)
    vs = np.empty(n_out)
    us[0] = u
    vs[0] = v
    k = 1
    clamps = 0
    for step in range(1, n_steps + 1):
        a1, b1 = _rhs(u, v, ew, w, E1, E2, Em, r, l)
        a2, b2 = _rhs(u + 0.5 * dt * a1, v + 0.5 * dt * b1, ew, w, E1, E2, Em, r, l)
        a3, b3 = _rhs(u + 0.5 * dt * a2, v + 0.5 * dt * b2, ew, w, E1, E2, Em, r, l)
        a4, b4 = _rhs(u + dt * a3, v + dt * b3, ew, w, E1, E2, Em, r, l)
        u += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if not (np.isfinite(u) and np.isfinite(v)):
            return us[:k], vs[:k], clamps, step
        if u < 0.0 and u > -slack:
            u = 0.0
            clamps += 1
        if v < 0.0 and v > -slack:
            v = 0.0
            clamps += 1
        if step % stride == 0:
            us[k] = u
            vs[k] = v
            k += 1
    return us[:k], vs[:k], clamps, -1


def rhs(state: OdeState, profile, alpha: float, r: float, l: float, rule: QuadRule = DEFAULT_RULE):
    """(du/dt, dv/dt) of the weighted ODEs."""
    if state.u < 0 or state.v < 0:
        raise ValueError("state must be nonnegative")
    c = _coefficients(profile, alpha, r, l, rule)
    du, dv = _rhs(float(state.u), float(state.v), c.ew, c.w, c.E1, c.E2, c.Em, r, l / OMEGA)
    return du, dv


def default_dt(r: float, nu0: float | None = None) -> float:
    """10^-3 of the characteristic time 1 / max(r, ν0, 1)."""
    return 1e-3 / max(r, nu0 or 0.0, 1.0)


def integrate(
    initial: OdeState,
    profile,
    alpha: float,
    r: float,
    l: float,
    t_end: float,
    dt: float | None = None,
    rule: QuadRule = DEFAULT_RULE,
    max_samples: int = MAX_SAMPLES,
) -> Trajectory:
    """Fixed-step classical RK4; output decimated to at most ``max_samples`` points."""
    if dt is None:
        dt = default_dt(r)
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    stride = max(1, int(math.ceil(n_steps / (max_samples - 1))))
    c = _coefficients(profile, alpha, r, l, rule)
    us, vs, clamps, failed = _rk4(
        float(initial.u), float(initial.v), dt, n_steps, stride,
        c.ew, c.w, c.E1, c.E2, c.Em, r, l / OMEGA, CLAMP_SLACK,
    )
    if failed >= 0:
        raise NonFiniteState(f"state became non-finite at t={initial.t + failed * dt:.6g}")
    t = initial.t + dt * stride * np.arange(len(us))
    return Trajectory(t, us, vs, int(clamps))


def _local_maxima(y):
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.flatnonzero(inner) + 1


def classify(
    traj: Trajectory,
    transient_fraction: float = 0.5,
    amp_threshold: float = 1e-4,
    drift_tolerance: float = 0.05,
    hopf_distance: float | None = None,
) -> TrajectorySummary:
    """Classify the post-transient part of a trajectory.

    The retained samples are split into two windows. Equilibrium if the
    peak-to-peak amplitude of v in the second window is below
    ``amp_threshold`` relative to mean v; LimitCycle if the two window
    amplitudes agree within ``drift_tolerance``; otherwise Undetermined.

    ``hopf_distance`` is |l - l0| / l0 when known; runs closer than 2% to the
    threshold are reported Undetermined since criticality is not resolved.
    """
    start = int(len(traj.t) * transient_fraction)
    t, v = traj.t[start:], traj.v[start:]
    if len(t) < 1000:
        raise ValueError("need at least 1000 post-transient samples")
    half = len(t) // 2
    a1 = float(np.ptp(v[:half]))
    a2 = float(np.ptp(v[half:]))
    scale = max(abs(float(np.mean(v[half:]))), 1e-300)

    peaks = _local_maxima(v)
    period = float(np.mean(np.diff(t[peaks]))) if len(peaks) >= 3 else None

    if hopf_distance is not None and hopf_distance < NEAR_THRESHOLD:
        attractor = Attractor.UNDETERMINED
    elif a2 < amp_threshold * scale:
        attractor = Attractor.EQUILIBRIUM
        period = None
    elif a1 > 0 and abs(a2 - a1) / a1 < drift_tolerance and period is not None:
        attractor = Attractor.LIMIT_CYCLE
    else:
        attractor = Attractor.UNDETERMINED
    return TrajectorySummary(attractor, traj.final, a2, period)
