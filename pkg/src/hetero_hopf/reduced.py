"""Small-λ reduced theory: weighted-ODE equilibrium, the stability function S(l),
the Hopf threshold l0(α) with its frequency and eigenvectors, and the advection
indicators T(α), α*, H.

All integrals are over Ω = (0, 1) with the quadrature rule passed in (default
256 panels x 4 Gauss points). Notation used in the code:

    e      = e^{αm(x)}
    E1, E2 = ∫ e dx, ∫ e^2 dx
    E_m    = ∫ e m dx
    S1(c)  = ∫ e / (1 + c e) dx            (S1' = -∫ e^2 / (1 + c e)^2 dx)
    S3(c)  = S1'/S1 (E_m - c E2) + E2
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketExhausted,
    BracketFailure,
    ConfigError,
    NoRoot,
    RootToleranceNotMet,
)
from .quad import DEFAULT_RULE, OMEGA, QuadRule, moments

BRENT_RTOL = 1e-12
BRENT_MAXITER = 200
DERIV_STEP = 1e-5
S_TOLERANCE = 1e-8
ALPHA_HI_LIMIT = 1e6


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional parameters of the transformed model.

    ``lam`` is λ = 1/d1 (``lambda`` is reserved in Python).
    """

    alpha: float = 0.0
    theta: float = 1.0
    lam: float = 0.01
    r: float = 1.0
    l: float = 2.0

    def __post_init__(self):
        checks = (
            ("alpha", self.alpha >= 0),
            ("theta", self.theta > 0),
            ("lambda", self.lam >= 0),
            ("r", self.r > 0),
            ("l", self.l > 0),
        )
        for name, ok in checks:
            value = getattr(self, "lam" if name == "lambda" else name)
            if not (ok and math.isfinite(value)):
                raise ConfigError(f"invalid value {value!r}", key=name)

    def with_l(self, l: float) -> "ModelParams":
        return ModelParams(self.alpha, self.theta, self.lam, self.r, l)

    def with_lam(self, lam: float) -> "ModelParams":
        return ModelParams(self.alpha, self.theta, lam, self.r, self.l)


@dataclass(frozen=True)
class ReducedEquilibrium:
    c0: float
    q0: float
    l: float
    alpha: float
    r: float
    residual_predator: float
    coexistence: bool


@dataclass(frozen=True)
class HopfPoint:
    l0: float
    c0_at_l0: float
    q0_at_l0: float
    nu0: float
    delta0: float
    s20: float
    adj_delta0: float
    adj_s20: float
    transversality: float

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.nu0


class Classification(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_SPIRAL = "StableSpiral"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    UNSTABLE_NODE = "UnstableNode"
    HOPF_CRITICAL = "HopfCritical"


@dataclass(frozen=True)
class StabilityReport:
    trace: float
    det: float
    eigenvalues: tuple
    classification: Classification
    matrix: tuple


@dataclass(frozen=True)
class AlphaStar:
    """Outcome of the α* search.

    ``kind`` is ``"always"`` (T > 0 for every α > 0), ``"never"`` (T ≤ 0 for
    every α) or ``"crossing"`` with ``value`` the unique root of T.
    """

    kind: str
    value: float | None = None

    def __str__(self):
        return repr(self.value) if self.kind == "crossing" else self.kind


def _brent(f, a, b):
    scale = max(abs(a), abs(b), 1e-300)
    try:
        return brentq(f, a, b, xtol=1e-15 * scale, rtol=BRENT_RTOL, maxiter=BRENT_MAXITER)
    except ValueError as exc:
        raise BracketFailure(str(exc)) from None
    except RuntimeError as exc:
        raise RootToleranceNotMet(str(exc)) from None


# --- building blocks --------------------------------------------------------


def _S1(wm, c):
    return wm.holling(c, 1)


def _S1_prime(wm, c):
    return -wm.holling(c, 2)


def _uptake(wm, c):
    """∫ c e / (1 + c e) dx."""
    return c * _S1(wm, c)


def S3(profile, alpha: float, c: float, rule: QuadRule = DEFAULT_RULE) -> float:
    wm = moments(profile, alpha, rule)
    return _S3(wm, c)


def _S3(wm, c):
    return _S1_prime(wm, c) / _S1(wm, c) * (wm.E_m - c * wm.E(2)) + wm.E(2)


def _q0(wm, c, l, r):
    return l * c * (wm.E_m - c * wm.E(2)) / (r * OMEGA)


def tilde_c(profile, alpha: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """Prey mean of the predator-free reduced equilibrium: E_m / E2."""
    wm = moments(profile, alpha, rule)
    return wm.E_m / wm.E(2)


def tilde_l(profile, alpha: float, r: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """Critical conversion rate for predator invasion."""
    if r <= 0:
        raise ValueError("r must be positive")
    wm = moments(profile, alpha, rule)
    return r * OMEGA / _uptake(wm, wm.E_m / wm.E(2))


def V_alpha(profile, alpha: float, rule: QuadRule = DEFAULT_RULE) -> float:
    wm = moments(profile, alpha, rule)
    return wm.E_m * wm.E(1) / wm.E(2)


def big_T(profile, alpha: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """T(α) = ∫ e^{αm} (m - 1) dx."""
    return moments(profile, alpha, rule).T(0)


def solve_c0l(profile, alpha: float, r: float, l: float, rule: QuadRule = DEFAULT_RULE) -> ReducedEquilibrium:
    """Coexistence equilibrium (c0, q0) of the weighted ODEs.

    c0 solves ∫ c e/(1 + c e) dx = r|Ω|/l; the left side increases from 0 to |Ω|,
    so a root exists only for l > r.
    """
    if not l > r:
        raise NoRoot(f"no equilibrium for l={l} <= r={r}")
    wm = moments(profile, alpha, rule)
    target = r * OMEGA / l
    rho = r / l
    # uptake(c) >= |Ω| c e_min / (1 + c e_min); doubling keeps a strict sign change
    c_hi = 2.0 * rho / (1.0 - rho) / float(wm.ew.min())
    c0 = _brent(lambda c: _uptake(wm, c) - target, 0.0, c_hi)
    q0 = _q0(wm, c0, l, r)
    return ReducedEquilibrium(
        c0=c0,
        q0=q0,
        l=l,
        alpha=alpha,
        r=r,
        residual_predator=_uptake(wm, c0) - target,
        coexistence=bool(c0 > 0 and q0 > 0),
    )


def S_of_l(profile, alpha: float, r: float, l: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """S(l) evaluated as -c0 S3(c0) at the coexistence equilibrium."""
    eq = solve_c0l(profile, alpha, r, l, rule)
    return -eq.c0 * _S3(moments(profile, alpha, rule), eq.c0)


def S_direct(profile, alpha: float, r: float, l: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """S(l) = ∫ e M1 dx with M1 = m - 2 c0 e - q0 / (1 + c0 e)^2, integrated as is."""
    eq = solve_c0l(profile, alpha, r, l, rule)
    wm = moments(profile, alpha, rule)
    c, q, e = eq.c0, eq.q0, wm.ew
    return wm.integral(e * (wm.m - 2.0 * c * e - q / (1.0 + c * e) ** 2))


def _coefficient_integrals(wm, c, q, l):
    """(∫ e M2, ∫ M3) at the constant state (c, q)."""
    e = wm.ew
    int_e_m2 = -wm.integral(c * e / (1.0 + c * e))
    int_m3 = l * q * wm.integral(e / (1.0 + c * e) ** 2)
    return int_e_m2, int_m3


def find_hopf(profile, alpha: float, r: float, rule: QuadRule = DEFAULT_RULE) -> HopfPoint | None:
    """Hopf threshold l0 of the reduced system, or None when T(α) ≤ 0.

    l0 is located through its prey mean c0, the unique root of the strictly
    increasing S3 on (0, c~); S(l) itself is only used to verify the result.
    """
    wm = moments(profile, alpha, rule)
    if wm.T(0) <= 0:
        return None
    c_tilde = wm.E_m / wm.E(2)
    c0 = _brent(lambda c: _S3(wm, c), 0.0, c_tilde)
    l0 = r * OMEGA / _uptake(wm, c0)
    q0 = _q0(wm, c0, l0, r)

    check = S_of_l(profile, alpha, r, l0, rule)
    if abs(check) >= S_TOLERANCE:
        raise RootToleranceNotMet(f"|S(l0)| = {abs(check):.3g} at l0={l0}")

    int_e_m2, int_m3 = _coefficient_integrals(wm, c0, q0, l0)
    E1 = wm.E(1)
    nu0 = math.sqrt(-int_e_m2 * int_m3 / (OMEGA * E1))
    ratio = int_m3 / (nu0 * OMEGA)
    delta0 = math.sqrt(1.0 / (1.0 + ratio**2))
    s20 = -delta0 * ratio
    adj_ratio = nu0 * E1 / int_m3
    adj_delta0 = math.sqrt(1.0 / (1.0 + adj_ratio**2))
    adj_s20 = -adj_delta0 * adj_ratio

    h = DERIV_STEP * l0
    dS = (S_of_l(profile, alpha, r, l0 + h, rule) - S_of_l(profile, alpha, r, l0 - h, rule)) / (2 * h)
    return HopfPoint(
        l0=l0,
        c0_at_l0=c0,
        q0_at_l0=q0,
        nu0=nu0,
        delta0=delta0,
        s20=s20,
        adj_delta0=adj_delta0,
        adj_s20=adj_s20,
        transversality=dS / (2.0 * E1),
    )


def eigenvector_matrix(profile, alpha, r, l, nu, rule=DEFAULT_RULE, adjoint=False):
    """Complex 2x2 matrix whose kernel holds (δ, s1 + i s2) at frequency ν.

    The adjoint variant is the conjugate-transposed system used for the left
    eigenvector.
    """
    eq = solve_c0l(profile, alpha, r, l, rule)
    wm = moments(profile, alpha, rule)
    int_e_m2, int_m3 = _coefficient_integrals(wm, eq.c0, eq.q0, l)
    S = -eq.c0 * _S3(wm, eq.c0)
    E1 = wm.E(1)
    if adjoint:
        return np.array([[1j * nu * E1, int_m3], [int_e_m2, 1j * nu * OMEGA]])
    return np.array([[S - 1j * nu * E1, int_e_m2], [int_m3, -1j * nu * OMEGA]])


def reduced_jacobian(profile, alpha: float, r: float, l: float, rule: QuadRule = DEFAULT_RULE,
                     critical_tol: float = 1e-8) -> StabilityReport:
    eq = solve_c0l(profile, alpha, r, l, rule)
    wm = moments(profile, alpha, rule)
    E1 = wm.E(1)
    S = -eq.c0 * _S3(wm, eq.c0)
    int_e_m2, int_m3 = _coefficient_integrals(wm, eq.c0, eq.q0, l)
    a11, a12, a21 = S / E1, int_e_m2 / E1, int_m3 / OMEGA
    trace = a11
    det = -a12 * a21
    disc = cmath.sqrt(trace * trace - 4.0 * det)
    eigs = ((trace + disc) / 2.0, (trace - disc) / 2.0)
    eigs = tuple(sorted(eigs, key=lambda z: (-z.real, -z.imag)))

    discriminant = trace * trace - 4.0 * det
    if abs(trace) <= critical_tol * math.sqrt(abs(det)) and det > 0:
        cls = Classification.HOPF_CRITICAL
    elif trace < 0:
        cls = Classification.STABLE_SPIRAL if discriminant < 0 else Classification.STABLE_NODE
    else:
        cls = Classification.UNSTABLE_SPIRAL if discriminant < 0 else Classification.UNSTABLE_NODE
    return StabilityReport(
        trace=trace,
        det=det,
        eigenvalues=eigs,
        classification=cls,
        matrix=((a11, a12), (a21, 0.0)),
    )


def _T_sign(wm_m, w, alpha):
    """T(α) rescaled by e^{-α max m}: same sign, no overflow."""
    shift = float(wm_m.max())
    return float(w @ (np.exp(alpha * (wm_m - shift)) * (wm_m - 1.0)))


def find_alpha_star(profile, rule: QuadRule = DEFAULT_RULE, xtol: float = 1e-12) -> AlphaStar:
    """Critical advection rate where T changes sign.

    Bisection on [0, α_hi], α_hi doubled from 1 until T(α_hi) > 0.
    """
    wm = moments(profile, 0.0, rule)
    if wm.T(0) >= 0:
        return AlphaStar("always")
    if max(profile.max_sample, float(wm.m.max())) <= 1.0:
        return AlphaStar("never")
    m, w = wm.m, wm.w
    hi = 1.0
    while _T_sign(m, w, hi) <= 0:
        hi *= 2.0
        if hi > ALPHA_HI_LIMIT:
            raise BracketExhausted(f"T(alpha) still nonpositive at alpha={hi}")
    lo = 0.0
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _T_sign(m, w, mid) > 0:
            hi = mid
        else:
            lo = mid
    return AlphaStar("crossing", 0.5 * (lo + hi))


def H_indicator(profile, rule: QuadRule = DEFAULT_RULE) -> float:
    """H = 2 (∫m)^2 - |Ω| ∫m - |Ω| ∫m^2.

    At α = 0, ∂S3/∂α evaluated at c0 equals 2H / (∫m + |Ω|). Since S3 increases
    in c, H > 0 means c0(α) decreases at α = 0. (H does not fix the sign of
    l0'(0), see :func:`l0_derivative_at_zero`.)
    """
    wm = moments(profile, 0.0, rule)
    M1 = wm.integral(wm.m)
    M2 = wm.integral(wm.m**2)
    return 2.0 * M1**2 - OMEGA * M1 - OMEGA * M2


def l0_derivative_at_zero(profile, r: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """Closed form of dl0/dα at α = 0 (requires ∫(m - 1) > 0).

    l0 = r|Ω| / F(c0(α), α) with F(c, α) = ∫ c e/(1 + c e); differentiating both
    arguments gives

        l0'(0) = -r |Ω| (|Ω| ∫m^2 - (∫m)^2) / (2 |Ω|^2 (1 + c0)^2 F^2)

    which is negative for every non-constant m.
    """
    wm = moments(profile, 0.0, rule)
    M1 = wm.integral(wm.m)
    M2 = wm.integral(wm.m**2)
    if M1 <= OMEGA:
        raise ValueError("no Hopf point at alpha = 0 for this profile")
    c0 = (M1 - OMEGA) / (2.0 * OMEGA)
    F = OMEGA * c0 / (1.0 + c0)
    return -r * OMEGA * (OMEGA * M2 - M1**2) / (2.0 * OMEGA**2 * (1.0 + c0) ** 2 * F**2)


def tilde_l_derivative_at_zero(profile, r: float, rule: QuadRule = DEFAULT_RULE, step: float = DERIV_STEP) -> float:
    """Central difference of l~(α) at α = 0."""
    return (tilde_l(profile, step, r, rule) - tilde_l(profile, -step, r, rule)) / (2.0 * step)
