import math

import numpy as np
import pytest

from hetero_hopf import odesim, pdesim
from hetero_hopf.errors import CflViolation, NonPositiveSolution, NoSignChange, UnstableStep
from hetero_hopf.linalg import eigenvalues
from hetero_hopf.pdesim import (
    FieldPair,
    Grid1D,
    Stability,
    assemble_linearization,
    assemble_weighted_laplacian,
    find_l_lambda,
    flux_matrix,
    newton_steady_state,
    rhs_semidiscrete,
    spectrum,
    stable_dt,
    time_step,
)
from hetero_hopf.reduced import ModelParams, reduced_jacobian, solve_c0l, tilde_l

from conftest import constant

BASE = ModelParams(alpha=0.0, theta=1.0, lam=0.01, r=1.0, l=4.0)


@pytest.fixture(scope="module")
def grid32(linear):
    return Grid1D(32, linear)


class TestGrid:
    def test_geometry(self, linear):
        g = Grid1D(16, linear)
        assert g.h * g.n == pytest.approx(1.0)
        assert g.x[0] == pytest.approx(0.5 / 16) and g.x[-1] == pytest.approx(1 - 0.5 / 16)
        np.testing.assert_allclose(g.m, 1 + g.x)
        np.testing.assert_allclose(g.m_faces, 1 + np.arange(1, 16) / 16)

    def test_minimum_size(self, linear):
        with pytest.raises(ValueError):
            Grid1D(8, linear)


class TestLaplacian:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, 3.0])
    def test_constants_in_kernel(self, grid32, alpha):
        L = assemble_weighted_laplacian(grid32, alpha)
        assert np.abs(L @ np.ones(32)).max() < 1e-9

    @pytest.mark.parametrize("alpha", [0.5, 2.0])
    def test_flux_form_rows_sum_to_zero(self, grid32, alpha):
        F = flux_matrix(grid32, alpha)
        assert np.abs(F.sum(axis=1)).max() <= 1e-9 * np.abs(F).max()
        np.testing.assert_allclose(F, F.T, rtol=1e-14)

    def test_neumann_spectrum(self, linear):
        for n in (32, 64):
            L = assemble_weighted_laplacian(Grid1D(n, linear), 0.0)
            eigs = np.sort(eigenvalues(L).eigenvalues.real)[::-1][:3]
            expected = -(np.arange(3) * np.pi) ** 2
            assert abs(eigs[0]) < 1e-9
            np.testing.assert_allclose(eigs[1:], expected[1:], rtol=2.0 / n**2 * 10)

    def test_standard_stencil(self, grid32):
        L = assemble_weighted_laplacian(grid32, 0.0) * grid32.h**2
        assert L[5, 4] == 1.0 and L[5, 5] == -2.0 and L[5, 6] == 1.0
        assert L[0, 0] == -1.0 and L[-1, -1] == -1.0


class TestRhs:
    def test_zero_state(self, grid32):
        out = rhs_semidiscrete(FieldPair.constant(grid32, 0, 0), grid32, BASE)
        assert not out.u.any() and not out.v.any()

    def test_constant_state_matches_ode(self):
        profile = constant(2.0)
        grid = Grid1D(16, profile)
        params = BASE.with_l(3.0)
        out = rhs_semidiscrete(FieldPair.constant(grid, 0.7, 0.4), grid, params)
        du, dv = odesim.rhs(odesim.OdeState(0.7, 0.4), profile, 0.0, 1.0, 3.0)
        np.testing.assert_allclose(out.u, params.lam * du, rtol=1e-13)
        np.testing.assert_allclose(out.v, params.lam * dv, rtol=1e-13)

    def test_pure_diffusion_without_reaction(self, grid32):
        params = ModelParams(alpha=0.8, theta=2.5, lam=0.0, r=1.0, l=4.0)
        rng = np.random.default_rng(0)
        state = FieldPair(rng.random(32), rng.random(32))
        out = rhs_semidiscrete(state, grid32, params)
        np.testing.assert_allclose(out.u, assemble_weighted_laplacian(grid32, 0.8) @ state.u, atol=1e-10)
        np.testing.assert_allclose(out.v, 2.5 * assemble_weighted_laplacian(grid32, 0.0) @ state.v, atol=1e-10)


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_jacobian_against_finite_differences(alpha, linear):
    grid = Grid1D(64, linear)
    params = ModelParams(alpha=alpha, theta=1.3, lam=0.05, r=1.0, l=6.0)
    steady = newton_steady_state(grid, params).state
    J = assemble_linearization(steady, grid, params)
    rng = np.random.default_rng(1)
    base = steady.vector()

    def F(U):
        out = rhs_semidiscrete(FieldPair.from_vector(U), grid, params)
        return out.vector()

    for _ in range(10):
        d = rng.standard_normal(base.size)
        h = 1e-6 * np.linalg.norm(base) / np.linalg.norm(d)
        fd = (F(base + h * d) - F(base - h * d)) / (2 * h)
        exact = J @ d
        assert np.linalg.norm(fd - exact) <= 1e-6 * np.linalg.norm(exact)


class TestTimeStepping:
    def test_cfl(self, grid32):
        limit = stable_dt(grid32, BASE)
        state = FieldPair.constant(grid32, 1, 1)
        with pytest.raises(CflViolation):
            time_step(state, grid32, BASE, 1.01 * limit, 1.0)
        with pytest.raises(CflViolation):
            time_step(state, grid32, BASE, 101 * limit, 1.0, method="imex")
        with pytest.raises(ValueError):
            time_step(state, grid32, BASE, limit, 1.0, method="euler")

    def test_stable_dt_formula(self, grid32):
        params = ModelParams(alpha=1.0, theta=0.5)
        assert stable_dt(grid32, params) == pytest.approx(0.45 / 32**2 / math.exp(grid32.m.max()))
        assert stable_dt(grid32, ModelParams(theta=10.0)) == pytest.approx(0.045 / 32**2)

    def test_unstable_step(self, grid32):
        params = ModelParams(lam=1.0)
        state = FieldPair.constant(grid32, -1.0, 0.0)
        with pytest.raises(UnstableStep):
            time_step(state, grid32, params, 100 * stable_dt(grid32, params), 5.0, method="imex")

    @pytest.mark.parametrize("method", ["rk4", "imex"])
    def test_weighted_mass_conserved(self, linear, method):
        grid = Grid1D(32, linear)
        params = ModelParams(alpha=1.5, theta=1.0, lam=0.0)
        state = FieldPair(1 + np.cos(3 * grid.x), np.ones(32))
        limit = stable_dt(grid, params)
        dt = limit if method == "rk4" else 50 * limit
        traj = time_step(state, grid, params, dt, 0.25, method=method)
        m0 = pdesim.weighted_mass(state, grid, 1.5)
        m1 = pdesim.weighted_mass(traj.final, grid, 1.5)
        assert abs(m1 - m0) < 1e-10 * traj.t[-1]
        # and diffusion actually happened
        assert np.ptp(traj.final.u) < 0.9 * np.ptp(state.u)

    def test_steady_state_does_not_drift(self, grid32):
        steady = newton_steady_state(grid32, BASE).state
        dt = 100 * stable_dt(grid32, BASE)
        traj = time_step(steady, grid32, BASE, dt, 10 / BASE.lam, method="imex")
        drift = max(np.abs(traj.u - steady.u).max(), np.abs(traj.v - steady.v).max())
        assert drift < 1e-8

    def test_extinction_below_tilde_l(self, grid32):
        params = BASE.with_l(1.0)
        dt = 100 * stable_dt(grid32, params)
        traj = time_step(FieldPair.constant(grid32, 1.5, 1.0), grid32, params, dt, 4000.0, method="imex")
        assert traj.v[-1].max() < 1e-4

    def test_sustained_oscillation_above_l0(self, linear):
        grid = Grid1D(16, linear)
        params = BASE.with_l(5.5)
        start = odesim.integrate(odesim.OdeState(0.3, 1.6), linear, 0.0, 1.0, 5.5, 200.0, dt=0.01).final
        dt = 100 * stable_dt(grid, params)
        traj = time_step(FieldPair.constant(grid, start.u, start.v), grid, params, dt, 3000.0, method="imex")
        tail = traj.mean_v()[len(traj.t) // 2:]
        assert np.ptp(tail) > 1e-2


class TestSteadyState:
    def test_small_lambda_limit(self, linear):
        grid = Grid1D(64, linear)
        params = BASE.with_lam(1e-3)
        eq = solve_c0l(linear, 0.0, 1.0, 4.0)
        u = newton_steady_state(grid, params).state.u
        assert np.abs(u - eq.c0).max() < 0.05 * eq.c0

    def test_below_tilde_l_reports_non_positive(self, grid32):
        with pytest.raises(NonPositiveSolution) as info:
            newton_steady_state(grid32, BASE.with_l(1.5))
        assert info.value.state.state.v.min() <= 0

    def test_unique_positive_state(self, grid32):
        rng = np.random.default_rng(2)
        ref = newton_steady_state(grid32, BASE).state
        for _ in range(5):
            guess = FieldPair(rng.uniform(0.1, 1.0, 32), rng.uniform(0.5, 3.0, 32))
            got = newton_steady_state(grid32, BASE, guess).state
            assert np.abs(got.vector() - ref.vector()).max() < 1e-6

    def test_requires_positive_lambda(self, grid32):
        with pytest.raises(ValueError):
            newton_steady_state(grid32, BASE.with_lam(0.0))

    def test_second_order_in_space(self, linear):
        params = ModelParams(alpha=0.5, theta=1.0, lam=0.5, r=1.0, l=4.0)
        sols = [newton_steady_state(Grid1D(n, linear), params).state.u for n in (32, 64, 128)]

        def restrict(u):
            return 0.5 * (u[0::2] + u[1::2])

        e1 = np.abs(sols[0] - restrict(sols[1])).max()
        e2 = np.abs(sols[1] - restrict(sols[2])).max()
        assert 1.7 <= math.log2(e1 / e2) <= 2.3

    def test_semitrivial_invasion(self, grid32, linear):
        lt = tilde_l(linear, 0.0, 1.0)
        assert pdesim.semitrivial_invasion_eigenvalue(grid32, BASE.with_l(0.8 * lt)) < 0
        assert pdesim.semitrivial_invasion_eigenvalue(grid32, BASE.with_l(1.2 * lt)) > 0


class TestSpectrum:
    def test_zero_lambda_double_zero(self, grid32):
        params = BASE.with_lam(0.0)
        report = spectrum(FieldPair.constant(grid32, 0.3, 1.0), grid32, params)
        top = report.eigenvalues[:3]
        assert abs(top[0]) < 1e-9 and abs(top[1]) < 1e-9 and top[2].real < -1
        assert report.stability is Stability.CRITICAL

    def test_reaction_pair_small_lambda(self, linear):
        grid = Grid1D(64, linear)
        params = BASE.with_lam(1e-3)
        report = spectrum(newton_steady_state(grid, params).state, grid, params)
        reduced_eigs = reduced_jacobian(linear, 0.0, 1.0, 4.0).eigenvalues
        for got, want in zip(report.reaction_pair, reduced_eigs):
            assert abs(got - params.lam * want) < 0.05 * params.lam * abs(want)

    def test_stable_below_l0(self, grid32):
        params = BASE.with_l(4.5)
        assert spectrum(newton_steady_state(grid32, params).state, grid32, params).stability is Stability.STABLE

    def test_unstable_above_l0(self, grid32):
        params = BASE.with_l(5.5)
        report = spectrum(newton_steady_state(grid32, params).state, grid32, params)
        assert report.stability is Stability.UNSTABLE
        assert report.rightmost_pair.imag > 0
        assert abs(report.rightmost_over_lambda.imag - 1.0) < 0.1

    def test_stable_when_T_negative(self, corpus):
        profile = corpus["1.6*x"]
        grid = Grid1D(32, profile)
        params = ModelParams(alpha=0.1, lam=0.01)
        lt = tilde_l(profile, 0.1, 1.0)
        for l in np.linspace(lt + 0.1, 20, 6):
            p = params.with_l(l)
            assert spectrum(newton_steady_state(grid, p).state, grid, p).stability is Stability.STABLE

    def test_criticality_tolerance_floor(self):
        assert pdesim.criticality_tolerance(0.01) == pytest.approx(1e-5)
        assert pdesim.criticality_tolerance(0.0) == 1e-9

    def test_no_sign_change(self, corpus):
        profile = corpus["1.6*x"]
        with pytest.raises(NoSignChange):
            find_l_lambda(Grid1D(16, profile), ModelParams(alpha=0.1, lam=0.01))

    def test_hopf_on_coarse_grid(self, linear):
        point = find_l_lambda(Grid1D(32, linear), BASE)
        assert 4.8 <= point.l_lambda <= 5.2
        assert point.transversality > 0
        assert abs(point.mu.real) < 1e-4 * BASE.lam


def test_csv_exports(tmp_path, grid32):
    steady = newton_steady_state(grid32, BASE).state
    steady.to_csv(tmp_path / "s.csv", grid32)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x,u,v" and len(lines) == 33
    spectrum(steady, grid32, BASE).to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == 65
