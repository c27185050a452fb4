"""Method-of-lines discretization of the transformed reaction-diffusion-advection
model on Ω = (0, 1):

    u_t = e^{-αm} (e^{αm} u_x)_x + λ u (m - e^{αm} u - v / (1 + e^{αm} u))
    v_t = θ v_xx + λ v (-r + l e^{αm} u / (1 + e^{αm} u))

with zero-flux boundaries. Cell-centred finite volumes, e^{αm} sampled at the
face midpoints for the fluxes. Provides time stepping, Newton steady states,
the linearization A_l(λ), its spectrum and the numerical Hopf value l_λ.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import linalg
from .errors import (
    CflViolation,
    NewtonDiverged,
    NonPositiveSolution,
    NoSignChange,
    UnstableStep,
)
from .reduced import ModelParams, solve_c0l, tilde_c, tilde_l

IMEX_DT_FACTOR = 100.0
BLOWUP_FACTOR = 1e10


@dataclass(frozen=True)
class Grid1D:
    n: int
    profile: object = field(repr=False)
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    x_faces: np.ndarray = field(init=False, repr=False)
    m: np.ndarray = field(init=False, repr=False)
    m_faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 cells")
        h = 1.0 / self.n
        x = (np.arange(self.n) + 0.5) * h
        xf = np.arange(1, self.n) * h  # interior faces only; boundary fluxes vanish
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_faces", xf)
        object.__setattr__(self, "m", np.asarray(self.profile(x), dtype=float))
        object.__setattr__(self, "m_faces", np.asarray(self.profile(xf), dtype=float))


@dataclass
class FieldPair:
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def constant(cls, grid, u, v):
        return cls(np.full(grid.n, float(u)), np.full(grid.n, float(v)))

    @classmethod
    def from_vector(cls, U):
        n = len(U) // 2
        return cls(np.array(U[:n]), np.array(U[n:]))

    def vector(self):
        return np.concatenate([self.u, self.v])

    def to_csv(self, path, grid) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "u", "v"])
            for row in zip(grid.x, self.u, self.v):
                writer.writerow([f"{val:.17g}" for val in row])


# --- operators --------------------------------------------------------------


def _laplacian_bands(grid, alpha):
    """(lower, diag, upper) of e^{-αm} (e^{αm} u')' with zero boundary flux.

    lower[i] multiplies u[i-1] and upper[i] multiplies u[i+1]; lower[0] and
    upper[-1] are zero.
    """
    h2 = grid.h * grid.h
    ew_c = np.exp(alpha * grid.m)
    k = np.exp(alpha * grid.m_faces) / h2
    lower = np.zeros(grid.n)
    upper = np.zeros(grid.n)
    upper[:-1] = k / ew_c[:-1]
    lower[1:] = k / ew_c[1:]
    return lower, -(lower + upper), upper


def _apply_bands(bands, u):
    lower, diag, upper = bands
    out = diag * u
    out[1:] += lower[1:] * u[:-1]
    out[:-1] += upper[:-1] * u[1:]
    return out


def _bands_to_dense(bands):
    lower, diag, upper = bands
    return np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)


def _bands_to_sparse(bands):
    lower, diag, upper = bands
    return sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], format="csc")


def assemble_weighted_laplacian(grid: Grid1D, alpha: float) -> np.ndarray:
    """Dense n x n matrix of e^{-αm} ∇·(e^{αm} ∇·); α = 0 gives the plain Laplacian."""
    return _bands_to_dense(_laplacian_bands(grid, alpha))


def flux_matrix(grid: Grid1D, alpha: float) -> np.ndarray:
    """∇·(e^{αm} ∇·) before the e^{-αm} row scaling; every row sums to zero."""
    return np.exp(alpha * grid.m)[:, None] * assemble_weighted_laplacian(grid, alpha)


class _Operators:
    """Per-(grid, params) precomputed pieces shared by rhs, Jacobian and steppers."""

    def __init__(self, grid, params):
        self.grid = grid
        self.params = params
        self.ew = np.exp(params.alpha * grid.m)
        self.Lu = _laplacian_bands(grid, params.alpha)
        lo, d, up = _laplacian_bands(grid, 0.0)
        self.Lv = (params.theta * lo, params.theta * d, params.theta * up)

    def reaction(self, u, v):
        p, e, m = self.params, self.ew, self.grid.m
        eu = e * u
        fu = p.lam * u * (m - eu - v / (1.0 + eu))
        fv = p.lam * v * (-p.r + p.l * eu / (1.0 + eu))
        return fu, fv

    def rhs(self, u, v):
        fu, fv = self.reaction(u, v)
        return _apply_bands(self.Lu, u) + fu, _apply_bands(self.Lv, v) + fv

    def coefficients(self, u, v):
        """Pointwise M1..M4 of the linearization at (u, v)."""
        p, e, m = self.params, self.ew, self.grid.m
        eu = e * u
        M1 = m - 2.0 * eu - v / (1.0 + eu) ** 2
        M2 = -u / (1.0 + eu)
        M3 = p.l * e * v / (1.0 + eu) ** 2
        M4 = -p.r + p.l * eu / (1.0 + eu)
        return M1, M2, M3, M4

    def jacobian(self, u, v):
        n = self.grid.n
        lam = self.params.lam
        M1, M2, M3, M4 = self.coefficients(u, v)
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = _bands_to_dense(self.Lu) + lam * np.diag(M1)
        J[:n, n:] = lam * np.diag(M2)
        J[n:, :n] = lam * np.diag(M3)
        J[n:, n:] = _bands_to_dense(self.Lv) + lam * np.diag(M4)
        return J


def rhs_semidiscrete(state: FieldPair, grid: Grid1D, params: ModelParams) -> FieldPair:
    du, dv = _Operators(grid, params).rhs(state.u, state.v)
    return FieldPair(du, dv)


def assemble_linearization(steady: FieldPair, grid: Grid1D, params: ModelParams) -> np.ndarray:
    """Dense 2n x 2n matrix [[L_α + λM1, λM2], [λM3, θΔ + λM4]] at ``steady``."""
    return _Operators(grid, params).jacobian(steady.u, steady.v)


# --- time stepping ----------------------------------------------------------


def stable_dt(grid: Grid1D, params: ModelParams) -> float:
    """Explicit stability limit 0.45 h^2 / max(e^{α max m}, θ)."""
    return 0.45 * grid.h**2 / max(math.exp(params.alpha * float(grid.m.max())), params.theta)


@dataclass
class PdeTrajectory:
    t: np.ndarray
    u: np.ndarray  # (samples, n)
    v: np.ndarray

    @property
    def final(self) -> FieldPair:
        return FieldPair(self.u[-1].copy(), self.v[-1].copy())

    def mean_v(self) -> np.ndarray:
        return self.v.mean(axis=1)

    def mean_u(self) -> np.ndarray:
        return self.u.mean(axis=1)


def time_step(
    state: FieldPair,
    grid: Grid1D,
    params: ModelParams,
    dt: float,
    t_end: float,
    method: str = "rk4",
    max_samples: int = 2000,
) -> PdeTrajectory:
    """Integrate from t = 0 to ``t_end``.

    ``method="rk4"``: classical RK4 on the full semidiscrete system, requires
    dt <= stable_dt. ``method="imex"``: Crank-Nicolson diffusion with explicit
    Euler reaction, dt up to 100 stable_dt.
    """
    limit = stable_dt(grid, params)
    if method == "rk4":
        if dt > limit:
            raise CflViolation(f"dt={dt:.3g} exceeds explicit limit {limit:.3g}")
    elif method == "imex":
        if dt > IMEX_DT_FACTOR * limit:
            raise CflViolation(f"dt={dt:.3g} exceeds IMEX limit {IMEX_DT_FACTOR * limit:.3g}")
    else:
        raise ValueError(f"unknown method {method!r}")
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")

    ops = _Operators(grid, params)
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    stride = max(1, int(math.ceil(n_steps / (max_samples - 1))))
    u = np.array(state.u, dtype=float)
    v = np.array(state.v, dtype=float)
    norm0 = max(np.abs(u).max(), np.abs(v).max(), 1.0)

    if method == "imex":
        eye = sp.identity(grid.n, format="csc")
        Au, Av = _bands_to_sparse(ops.Lu), _bands_to_sparse(ops.Lv)
        solve_u = splu((eye - 0.5 * dt * Au).tocsc()).solve
        solve_v = splu((eye - 0.5 * dt * Av).tocsc()).solve

        def step(u, v):
            fu, fv = ops.reaction(u, v)
            u_new = solve_u(u + 0.5 * dt * _apply_bands(ops.Lu, u) + dt * fu)
            v_new = solve_v(v + 0.5 * dt * _apply_bands(ops.Lv, v) + dt * fv)
            return u_new, v_new
    else:

        def step(u, v):
            a1, b1 = ops.rhs(u, v)
            a2, b2 = ops.rhs(u + 0.5 * dt * a1, v + 0.5 * dt * b1)
            a3, b3 = ops.rhs(u + 0.5 * dt * a2, v + 0.5 * dt * b2)
            a4, b4 = ops.rhs(u + dt * a3, v + dt * b3)
            return (
                u + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
                v + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4),
            )

    ts, us, vs = [0.0], [u.copy()], [v.copy()]
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            u, v = step(u, v)
        if k % stride == 0 or k == n_steps:
            size = max(np.abs(u).max(), np.abs(v).max())
            if not np.isfinite(size) or size > BLOWUP_FACTOR * norm0:
                raise UnstableStep(f"solution norm {size:.3g} at t={k * dt:.6g}")
            ts.append(k * dt)
            us.append(u.copy())
            vs.append(v.copy())
    return PdeTrajectory(np.array(ts), np.array(us), np.array(vs))


def weighted_mass(state: FieldPair, grid: Grid1D, alpha: float) -> float:
    """Σ e^{αm_i} u_i h, conserved by the u-diffusion."""
    return float(np.sum(np.exp(alpha * grid.m) * state.u) * grid.h)


# --- steady states ----------------------------------------------------------


@dataclass
class SteadyState:
    state: FieldPair
    iterations: int
    residual: float


def newton_steady_state(
    grid: Grid1D,
    params: ModelParams,
    initial_guess: FieldPair | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> SteadyState:
    """Damped Newton on the semidiscrete right-hand side with the exact Jacobian.

    Default guess is the constant reduced equilibrium (c0, q0). Converging to a
    state that is not strictly positive raises NonPositiveSolution with the
    state attached.
    """
    if not params.lam > 0:
        raise ValueError("Newton steady state requires lambda > 0")
    ops = _Operators(grid, params)
    if initial_guess is None:
        eq = solve_c0l(grid.profile, params.alpha, params.r, params.l)
        initial_guess = FieldPair.constant(grid, eq.c0, eq.q0)
    n = grid.n
    U = initial_guess.vector().astype(float)

    def residual(U):
        du, dv = ops.rhs(U[:n], U[n:])
        return np.concatenate([du, dv])

    F = residual(U)
    norm = float(np.abs(F).max())
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise NewtonDiverged(f"residual {norm:.3g} after {max_iter} iterations")
        it += 1
        d = linalg.lu_solve(ops.jacobian(U[:n], U[n:]), -F)
        s = 1.0
        while True:
            U_new = U + s * d
            F_new = residual(U_new)
            norm_new = float(np.abs(F_new).max())
            if norm_new < norm or s < 2.0**-30:
                break
            s *= 0.5
        if not np.isfinite(norm_new):
            raise NewtonDiverged("non-finite residual")
        U, F, norm = U_new, F_new, norm_new
    result = SteadyState(FieldPair.from_vector(U), it, norm)
    if U[:n].min() <= 0 or U[n:].min() <= 0:
        raise NonPositiveSolution(
            f"converged to a non-positive state (min u={U[:n].min():.3g}, min v={U[n:].min():.3g})",
            state=result,
        )
    return result


def semitrivial_steady_state(grid: Grid1D, params: ModelParams, tol: float = 1e-10, max_iter: int = 50) -> SteadyState:
    """Predator-free steady state (u~, 0) by Newton on the prey equation alone."""
    if not params.lam > 0:
        raise ValueError("requires lambda > 0")
    ops = _Operators(grid, params)
    zero = np.zeros(grid.n)
    u = np.full(grid.n, tilde_c(grid.profile, params.alpha))
    L = _bands_to_dense(ops.Lu)
    norm = np.inf
    for it in range(1, max_iter + 1):
        F = ops.rhs(u, zero)[0]
        norm = float(np.abs(F).max())
        if norm < tol:
            return SteadyState(FieldPair(u, zero), it - 1, norm)
        M1 = ops.coefficients(u, zero)[0]
        u = u + linalg.lu_solve(L + params.lam * np.diag(M1), -F)
    raise NewtonDiverged(f"semi-trivial residual {norm:.3g} after {max_iter} iterations")


# --- spectra ----------------------------------------------------------------


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class SpectrumReport:
    params: ModelParams
    eigenvalues: np.ndarray
    rightmost_pair: complex
    stability: Stability
    reaction_pair: tuple  # the two eigenvalues of smallest modulus

    @property
    def rightmost_over_lambda(self) -> complex:
        return self.rightmost_pair / self.params.lam

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["re", "im"])
            for z in self.eigenvalues:
                writer.writerow([f"{z.real:.17g}", f"{z.imag:.17g}"])


def criticality_tolerance(lam: float) -> float:
    return max(1e-3 * lam, 1e-9)


def spectrum(steady: FieldPair, grid: Grid1D, params: ModelParams) -> SpectrumReport:
    """Eigenvalues of A_l(λ) at ``steady``, rightmost first."""
    A = assemble_linearization(steady, grid, params)
    eigs = linalg.eigenvalues(A).eigenvalues
    top = complex(eigs[0])
    if top.imag < 0:
        top = top.conjugate()
    re = top.real
    tol = criticality_tolerance(params.lam)
    if abs(re) < tol:
        stability = Stability.CRITICAL
    elif re > 0:
        stability = Stability.UNSTABLE
    else:
        stability = Stability.STABLE
    small = eigs[np.argsort(np.abs(eigs), kind="stable")[:2]]
    pair = tuple(sorted((complex(z) for z in small), key=lambda z: (-z.real, -z.imag)))
    return SpectrumReport(params, eigs, top, stability, pair)


def semitrivial_invasion_eigenvalue(grid: Grid1D, params: ModelParams) -> float:
    """Rightmost eigenvalue of the predator block θΔ + λM4 at (u~, 0)."""
    st = semitrivial_steady_state(grid, params)
    ops = _Operators(grid, params)
    M4 = ops.coefficients(st.state.u, st.state.v)[3]
    block = _bands_to_dense(ops.Lv) + params.lam * np.diag(M4)
    return float(linalg.eigenvalues(block).eigenvalues[0].real)


@dataclass(frozen=True)
class HopfCurvePoint:
    lam: float
    l_lambda: float
    mu: complex
    transversality: float  # secant d Re(mu)/dl at l_lambda
    evaluations: int

    @property
    def nu_over_lambda(self) -> float:
        return abs(self.mu.imag) / self.lam


def _growth_rate(grid, params):
    steady = newton_steady_state(grid, params).state
    return spectrum(steady, grid, params).rightmost_pair


def find_l_lambda(
    grid: Grid1D,
    params: ModelParams,
    bracket: tuple[float, float] | None = None,
    eps: float = 0.05,
    tol_factor: float = 1e-4,
    secant_step: float = 1e-3,
    max_iter: int = 100,
) -> HopfCurvePoint:
    """Bisection in l for the zero of Re(rightmost eigenvalue of A_l(λ)).

    ``params.l`` is ignored. The default bracket is [l~ + eps, 1/eps]. Stops
    once |Re μ| < tol_factor λ.
    """
    if bracket is None:
        bracket = (tilde_l(grid.profile, params.alpha, params.r) + eps, 1.0 / eps)
    lo, hi = bracket
    tol = tol_factor * params.lam
    evaluations = 2
    mu_lo = _growth_rate(grid, params.with_l(lo))
    mu_hi = _growth_rate(grid, params.with_l(hi))
    if mu_lo.real * mu_hi.real > 0:
        raise NoSignChange(
            f"Re(mu) has the same sign at l={lo:.6g} ({mu_lo.real:.3g}) and l={hi:.6g} ({mu_hi.real:.3g})"
        )
    if mu_lo.real > 0:
        raise NoSignChange("stability indicator decreases across the bracket")
    mid, mu = lo, mu_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        mu = _growth_rate(grid, params.with_l(mid))
        evaluations += 1
        if abs(mu.real) < tol or hi - lo < 1e-12 * hi:
            break
        if mu.real < 0:
            lo = mid
        else:
            hi = mid
    d = secant_step * mid
    slope = (
        _growth_rate(grid, params.with_l(mid + d)).real
        - _growth_rate(grid, params.with_l(mid - d)).real
    ) / (2.0 * d)
    return HopfCurvePoint(params.lam, mid, mu, slope, evaluations + 2)
