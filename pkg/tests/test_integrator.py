import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imexglm.integrator import (ExternalState, IntegrationError,
                                SemiDiscreteProblem, StageSolveConfig,
                                StageSolveError, StartingConfig,
                                ark_integrate, ark_step, derivative_weights,
                                glm_step, imex_euler_ark, initialize_external,
                                integrate, rescaling_matrix, solve_stage)
from imexglm.methods import ImexRkMethod, bundled_ark_path
from imexglm.problems import dahlquist_split_problem
from imexglm.stability import imex_stability_matrix


def quadrature_problem(fcoef, gcoef, t0=0.0, tF=1.0):
    """y' = pf(t) + pg(t) with polynomial parts; exact y by antiderivatives."""
    pf = np.polynomial.Polynomial(fcoef)
    pg = np.polynomial.Polynomial(gcoef)
    anti = (pf + pg).integ()
    return SemiDiscreteProblem(
        name="quadrature", d=1, t0=t0, tF=tF,
        y0=np.array([anti(t0)]),
        f=lambda t, y: np.array([pf(t)]),
        g=lambda t, y: np.array([pg(t)]),
        g_jacobian=lambda t, y: np.zeros((1, 1)),
        g_is_linear=True,
        exact=lambda t: np.array([anti(t)]),
    ), pf, pg


class TestDerivativeWeights:
    def test_r2(self):
        assert np.array_equal(derivative_weights(2)[0], [1.0, 0.0])
        assert np.allclose(derivative_weights(2)[1], [-1.0, 1.0], atol=1e-14)

    def test_r3(self):
        D = derivative_weights(3)
        assert np.array_equal(D[0], [1.0, 0.0, 0.0])
        assert np.allclose(D[1], [-1.5, 2.0, -0.5], atol=1e-13)
        assert np.allclose(D[2], [1.0, -2.0, 1.0], atol=1e-13)

    @given(seed=st.integers(0, 10 ** 6), r=st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_exact_on_polynomials(self, seed, r):
        # row k recovers x^(k)(0) from x' samples at 0..r-1, exactly for
        # x' of degree <= r-1
        rng = np.random.default_rng(seed)
        xp = np.polynomial.Polynomial(rng.uniform(-1, 1, size=r))
        D = derivative_weights(r)
        samples = xp(np.arange(r, dtype=float))
        for k in range(1, r + 1):
            want = xp.deriv(k - 1)(0.0)
            assert D[k - 1] @ samples == pytest.approx(want, rel=1e-9,
                                                       abs=1e-9)

    def test_bad_r(self):
        with pytest.raises(ValueError):
            derivative_weights(0)

    def test_ill_conditioned_warns(self):
        with pytest.warns(RuntimeWarning):
            derivative_weights(13)


class TestRescaling:
    def test_values(self):
        R = rescaling_matrix(0.1, 0.05, 3)
        assert np.allclose(np.diag(R), [2.0, 4.0, 8.0])

    def test_tau_positive(self):
        with pytest.raises(ValueError):
            rescaling_matrix(0.1, 0.0, 2)


class TestStartingProcedure:
    def test_polynomial_exactness(self, dimsim4, dimsim5):
        """For pure-time polynomial splittings of degree < r the starting
        vector must match the derivative expansion to roundoff."""
        rng = np.random.default_rng(7)
        for m in (dimsim4, dimsim5):
            r, h = m.r, 0.2
            prob, pf, pg = quadrature_problem(rng.uniform(-1, 1, r),
                                              rng.uniform(-1, 1, r))
            state = initialize_external(m, prob, h)
            y0 = prob.y0[0]
            for i in range(r):
                want = y0
                for k in range(1, m.p + 1):
                    want += h ** k * (m.Q[i, k] * pf.deriv(k - 1)(0.0)
                                      + m.Qhat[i, k] * pg.deriv(k - 1)(0.0))
                assert state.blocks[i, 0] == pytest.approx(want, abs=1e-11)

    def test_one_block_start_is_shifted_euler(self, euler_glm):
        prob = dahlquist_split_problem(-0.3, -2.0)
        h = 0.1
        state = initialize_external(euler_glm, prob, h)
        g0 = prob.g(prob.t0, prob.y0)
        assert np.allclose(state.blocks[0], prob.y0 - h * g0, atol=1e-15)

    def test_tau_equal_h_allowed(self, dimsim4):
        prob = dahlquist_split_problem(-0.3, -2.0)
        state = initialize_external(dimsim4, prob, 0.05,
                                    StartingConfig(tau_ratio=1.0))
        assert state.blocks.shape == (4, prob.d)

    def test_tau_out_of_range(self, dimsim4):
        prob = dahlquist_split_problem(-0.3, -2.0)
        with pytest.raises(ValueError, match="tau"):
            initialize_external(dimsim4, prob, 0.05, StartingConfig(tau=0.2))
        with pytest.raises(ValueError, match="tau"):
            initialize_external(dimsim4, prob, 0.05, StartingConfig(tau=0.0))

    def test_file_scheme(self, dimsim5):
        prob = dahlquist_split_problem(-0.3, -2.0)
        state = initialize_external(
            dimsim5, prob, 0.05, StartingConfig(scheme=bundled_ark_path(4)))
        assert state.blocks.shape == (5, prob.d)

    def test_bad_scheme_type(self, dimsim4):
        prob = dahlquist_split_problem(-0.3, -2.0)
        with pytest.raises(TypeError):
            initialize_external(dimsim4, prob, 0.05,
                                StartingConfig(scheme=42))


class TestStepLinearity:
    def test_step_matches_stability_matrix(self, dimsim4, dimsim5, euler_glm):
        """One step on y' = xi y + xihat y must act as the two-parameter
        stability matrix on the external blocks."""
        rng = np.random.default_rng(2)
        for m in (dimsim4, dimsim5, euler_glm):
            for _ in range(10):
                xi = rng.uniform(-0.8, 0.0)
                xihat = rng.uniform(-3.0, 0.0)
                prob = dahlquist_split_problem(xi, xihat)
                h = 0.5
                blocks = rng.standard_normal((m.r, prob.d))
                state = ExternalState(t=0.0, h=h, blocks=blocks)
                out = glm_step(m, prob, state)
                M = imex_stability_matrix(m, h * xi, h * xihat).real
                want = M @ blocks
                assert np.max(np.abs(out.blocks - want)) < 1e-12

    def test_superposition(self, dimsim4):
        prob = dahlquist_split_problem(-0.4, -1.5)
        rng = np.random.default_rng(3)
        b1 = rng.standard_normal((4, 1))
        b2 = rng.standard_normal((4, 1))
        a, b = 0.7, -1.3
        h = 0.3
        out1 = glm_step(dimsim4, prob, ExternalState(0.0, h, b1)).blocks
        out2 = glm_step(dimsim4, prob, ExternalState(0.0, h, b2)).blocks
        out12 = glm_step(dimsim4, prob,
                         ExternalState(0.0, h, a * b1 + b * b2)).blocks
        assert np.max(np.abs(out12 - (a * out1 + b * out2))) < 1e-12

    def test_block_count_mismatch(self, dimsim4):
        prob = dahlquist_split_problem(-0.4, -1.5)
        with pytest.raises(ValueError, match="blocks"):
            glm_step(dimsim4, prob, ExternalState(0.0, 0.1, np.zeros((3, 1))))


class TestStageSolves:
    def test_factorization_reuse_is_bitwise(self, dimsim4):
        prob = dahlquist_split_problem(-0.5, -8.0)
        res_frozen = integrate(dimsim4, prob, 20,
                               cfg=StageSolveConfig())
        res_fresh = integrate(dimsim4, prob, 20,
                              cfg=StageSolveConfig(jacobian_refresh="per-stage"))
        assert np.array_equal(res_frozen.y, res_fresh.y)
        assert np.array_equal(res_frozen.state.blocks, res_fresh.state.blocks)

    def test_newton_residual_contract(self, dimsim4):
        # stiff nonlinear g: the returned stage satisfies the implicit
        # relation to the configured tolerance
        prob = SemiDiscreteProblem(
            name="nl", d=2, t0=0.0, tF=1.0, y0=np.array([0.7, -0.2]),
            f=lambda t, y: np.zeros(2),
            g=lambda t, y: -4.0 * y ** 3,
            g_jacobian=lambda t, y: np.diag(-12.0 * y ** 2),
        )
        h, t, i = 0.2, 0.0, 2
        rhs = np.array([0.9, -0.4])
        cfg = StageSolveConfig()
        Y = solve_stage(i, rhs, dimsim4, prob, t, h, cfg)
        gamma = h * dimsim4.lam
        res = Y - gamma * prob.g(t + dimsim4.c[i] * h, Y) - rhs
        assert np.linalg.norm(res) <= cfg.newton_tol * max(
            1.0, np.linalg.norm(rhs))

    def test_newton_stall_reports_stage_and_residual(self, dimsim4):
        prob = SemiDiscreteProblem(
            name="nl", d=1, t0=0.0, tF=1.0, y0=np.array([0.7]),
            f=lambda t, y: np.zeros(1),
            g=lambda t, y: np.exp(y) - 1.0,
            g_jacobian=lambda t, y: np.diag(np.exp(y)),
        )
        cfg = StageSolveConfig(max_newton=1)
        with pytest.raises(StageSolveError) as info:
            solve_stage(1, np.array([2.0]), dimsim4, prob, 0.0, 0.5, cfg,
                        predictor=np.array([40.0]))
        assert info.value.stage == 1
        assert info.value.residual is not None

    def test_explicit_stage_is_passthrough(self, dimsim4):
        prob = dahlquist_split_problem(-0.5, -8.0)
        rhs = np.array([1.23])
        Y = solve_stage(0, rhs, dimsim4, prob, 0.0, 0.1)
        # dimsim4 has ahat_00 = lambda > 0 so stage 0 is implicit; the
        # explicit passthrough shows up with gamma = 0 via an ARK first stage
        assert not np.array_equal(Y, rhs)
        mrk = imex_euler_ark()
        y = ark_step(mrk, prob, np.array([1.0]), 0.0, 0.0)
        assert np.allclose(y, 1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            StageSolveConfig(newton_tol=0.0)
        with pytest.raises(ValueError):
            StageSolveConfig(jacobian_refresh="sometimes")


class TestFailurePropagation:
    def test_blowup_names_step(self, dimsim4):
        prob = SemiDiscreteProblem(
            name="blowup", d=1, t0=0.0, tF=2.0, y0=np.array([1.0]),
            f=lambda t, y: y ** 2,
            g=lambda t, y: np.zeros(1),
            g_jacobian=lambda t, y: np.zeros((1, 1)),
            g_is_linear=True,
        )
        with pytest.raises(IntegrationError, match=r"step \d+/\d+"):
            integrate(dimsim4, prob, 50)

    def test_nonfinite_state_rejected(self):
        with pytest.raises(IntegrationError):
            ExternalState(t=0.0, h=0.1, blocks=np.array([[np.nan]]))

    def test_integrate_needs_steps(self, dimsim4):
        prob = dahlquist_split_problem(-0.5, -2.0)
        with pytest.raises(ValueError):
            integrate(dimsim4, prob, 0)
        with pytest.raises(ValueError):
            ark_integrate(imex_euler_ark(), prob, 0)


def classical_rk4():
    return ImexRkMethod(
        name="rk4", c=np.array([0.0, 0.5, 0.5, 1.0]),
        A_explicit=np.array([[0.0, 0.0, 0.0, 0.0],
                             [0.5, 0.0, 0.0, 0.0],
                             [0.0, 0.5, 0.0, 0.0],
                             [0.0, 0.0, 1.0, 0.0]]),
        b_explicit=np.array([1, 2, 2, 1]) / 6.0,
        A_implicit=np.zeros((4, 4)),
        b_implicit=np.zeros(4),
    )


class TestArkStepper:
    def test_explicit_part_is_classical_rk4(self):
        prob = SemiDiscreteProblem(
            name="nl", d=1, t0=0.0, tF=1.0, y0=np.array([0.8]),
            f=lambda t, y: np.sin(t) - y ** 2,
            g=lambda t, y: np.zeros(1),
            g_jacobian=lambda t, y: np.zeros((1, 1)),
            g_is_linear=True,
        )
        y, t, h = np.array([0.8]), 0.3, 0.05
        out = ark_step(classical_rk4(), prob, y, t, h)
        k1 = prob.f(t, y)
        k2 = prob.f(t + h / 2, y + h / 2 * k1)
        k3 = prob.f(t + h / 2, y + h / 2 * k2)
        k4 = prob.f(t + h, y + h * k3)
        want = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert np.allclose(out, want, rtol=0, atol=1e-15)

    def test_implicit_part_matches_rational_function(self):
        base = _m4()
        mrk = ImexRkMethod(name="ark4-implicit-only",
                           c=np.asarray(base.c),
                           A_explicit=np.zeros_like(base.A_explicit),
                           b_explicit=np.zeros_like(base.b_explicit),
                           A_implicit=np.asarray(base.A_implicit),
                           b_implicit=np.asarray(base.b_implicit))
        xihat = -3.7
        prob = dahlquist_split_problem(0.0, xihat)
        h = 0.4
        z = h * xihat
        sig = mrk.sigma
        e = np.ones(sig)
        R = 1.0 + z * mrk.b_implicit @ np.linalg.solve(
            np.eye(sig) - z * mrk.A_implicit, e)
        out = ark_step(mrk, prob, prob.y0, 0.0, h)
        assert out[0] == pytest.approx(R * prob.y0[0], rel=1e-13)

    def test_euler_glm_equals_ark_shifted(self, euler_glm):
        prob = dahlquist_split_problem(-0.7, -2.5, t_final=1.0)
        N = 10
        res_glm = integrate(euler_glm, prob, N)
        res_ark = ark_integrate(imex_euler_ark(), prob, N,
                                record_trajectory=True)
        t_prev, y_prev = res_ark.trajectory[N - 2]
        assert res_glm.t_readout == pytest.approx(t_prev, abs=1e-12)
        assert np.allclose(res_glm.y, y_prev, rtol=1e-14, atol=0)


def _m4():
    from imexglm.methods import load_ark_method
    return load_ark_method(bundled_ark_path(4))


def observed_order(m_or_rk, prob, steps, start=None):
    errs = []
    for N in steps:
        if isinstance(m_or_rk, ImexRkMethod):
            res = ark_integrate(m_or_rk, prob, N)
        else:
            res = integrate(m_or_rk, prob, N, start=start)
        errs.append(np.linalg.norm(res.y - prob.exact(res.t_readout)))
    logs = np.log(errs)
    slope, _ = np.polyfit(np.log([1.0 / n for n in steps]), logs, 1)
    return slope, errs


class TestConvergenceOrders:
    def test_dimsim4_order_on_dahlquist(self, dimsim4):
        prob = dahlquist_split_problem(-1.0, -6.0, t_final=2.0)
        slope, _ = observed_order(dimsim4, prob, [20, 40, 80])
        assert slope >= 3.7

    def test_dimsim5_order_with_file_starter(self, dimsim5):
        prob = dahlquist_split_problem(-1.0, -6.0, t_final=2.0)
        start = StartingConfig(scheme=bundled_ark_path(4))
        slope, _ = observed_order(dimsim5, prob, [20, 40, 80], start=start)
        assert slope >= 4.7

    def test_tau_choice_does_not_change_order(self, dimsim4):
        prob = dahlquist_split_problem(-1.0, -6.0, t_final=2.0)
        s_half, _ = observed_order(dimsim4, prob, [20, 40, 80],
                                   start=StartingConfig(tau_ratio=0.5))
        s_full, _ = observed_order(dimsim4, prob, [20, 40, 80],
                                   start=StartingConfig(tau_ratio=1.0))
        assert abs(s_half - s_full) < 0.3

    def test_readout_time_semantics(self, dimsim4, euler_glm):
        prob = dahlquist_split_problem(-1.0, -6.0, t_final=1.0)
        N = 16
        res4 = integrate(dimsim4, prob, N)
        assert res4.t_readout == pytest.approx(1.0, abs=1e-12)
        rese = integrate(euler_glm, prob, N)
        assert rese.t_readout == pytest.approx(1.0 - 1.0 / N, abs=1e-12)
        err_at_readout = abs(rese.y[0] - prob.exact(rese.t_readout)[0])
        err_at_final = abs(rese.y[0] - prob.exact(1.0)[0])
        assert err_at_readout < err_at_final
