import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from bilinear_sliding.adapter import restart_plan, restarted_solve
from bilinear_sliding.instances import (NAMED_INSTANCES, InstanceSpec, block_parameters, chain_matrix,
                                        coupling_block_matrix, gen_bilinear_tridiag, gen_chain_gradient,
                                        gen_chain_matrices, gen_coupled_block, gen_random_quadratic, generate,
                                        named_instance, tridiag_matrix, validate_spectrum_E,
                                        validate_tridiag_spectrum)
from bilinear_sliding.oracles import OracleLedger
from bilinear_sliding.problem import (AssumptionViolation, ProblemParams, check_spectra, r2_metric,
                                      solve_exact_quadratic, validate_assumption5)

SCSC = ProblemParams(10.0, 10.0, 20.0, 1.0, 1.0)
BLOCK = ProblemParams(10.0, 10.0, 19.0, 0.5, 0.5, 1.0, 1.0)


class TestRandomQuadratic:
    def test_scalar(self):
        p = gen_random_quadratic(InstanceSpec("random-quadratic", SCSC, 1, 1))
        np.testing.assert_allclose(p.f.hessian, [[10.0]])
        np.testing.assert_allclose(np.abs(p.dense_B()), [[20.0]])

    def test_extreme_eigenvalues(self):
        p = gen_random_quadratic(InstanceSpec("random-quadratic", SCSC, 5, 4, seed=3))
        ef = scipy.linalg.eigvalsh(p.f.hessian)
        eg = scipy.linalg.eigvalsh(p.g.hessian)
        assert abs(ef[0] - 1.0) <= 1e-10 and abs(ef[-1] - 10.0) <= 1e-10
        assert abs(eg[0] - 1.0) <= 1e-10 and abs(eg[-1] - 10.0) <= 1e-10
        s = scipy.linalg.svdvals(p.dense_B())
        assert s[0] == pytest.approx(20.0, rel=1e-12)

    def test_deterministic(self):
        spec = InstanceSpec("random-quadratic", SCSC, 4, 3, seed=9)
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.f.hessian, b.f.hessian)
        assert np.array_equal(a.f.linear, b.f.linear)
        assert np.array_equal(a.dense_B(), b.dense_B())
        c = generate(InstanceSpec("random-quadratic", SCSC, 4, 3, seed=10))
        assert not np.array_equal(a.dense_B(), c.dense_B())

    def test_infeasible(self):
        with pytest.raises(AssumptionViolation):
            gen_random_quadratic(InstanceSpec("random-quadratic", ProblemParams(4.0, 10.0, 20.0, 1.0, 1.0)))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            InstanceSpec("bogus", SCSC)

    def test_regimes_pass_checks(self, regime_problem):
        assert validate_assumption5(regime_problem.params)
        assert check_spectra(regime_problem)


class TestChainMatrices:
    def test_d2(self):
        F1, F2, F = gen_chain_matrices(2)
        np.testing.assert_allclose(F1, [[1 / math.sqrt(2), -1 / math.sqrt(2)]])
        assert F2.shape == (0, 2)
        np.testing.assert_allclose(F, [[0.5, -0.5]])

    @pytest.mark.parametrize("d", range(2, 11))
    def test_norms_and_orthogonality(self, d):
        F1, F2, F = gen_chain_matrices(d)
        assert F1.shape == (d // 2, d) and F2.shape == ((d - 1) // 2, d)
        np.testing.assert_allclose(F1 @ F1.T, np.eye(F1.shape[0]), atol=1e-15)
        assert scipy.linalg.svdvals(F1)[0] == pytest.approx(1.0)
        if F2.shape[0]:
            np.testing.assert_allclose(F2 @ F2.T, np.eye(F2.shape[0]), atol=1e-15)
            assert scipy.linalg.svdvals(F2)[0] == pytest.approx(1.0)
        # every consecutive difference appears in exactly one of F1, F2
        assert F1.shape[0] + F2.shape[0] == F.shape[0]

    def test_too_small(self):
        with pytest.raises(ValueError):
            gen_chain_matrices(1)
        with pytest.raises(ValueError):
            chain_matrix(1)


class TestChainGradient:
    def test_square_case(self):
        p = gen_chain_gradient(ProblemParams(40.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0), 5)
        np.testing.assert_array_equal(p.dense_B(), np.eye(5))
        assert check_spectra(p)

    def test_row_vector_case(self):
        p = gen_chain_gradient(ProblemParams(40.0, 10.0, 19.0, 1.0, 1.0, 0.0, 1.0), 5)
        B = p.dense_B()
        assert B.shape == (1, 6)
        assert B[0, 5] == 1.0 and np.count_nonzero(B) == 1
        assert check_spectra(p)

    def test_zero_linear_term(self):
        p = gen_chain_gradient(ProblemParams(40.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0), 5, A=0.0)
        sol = solve_exact_quadratic(p)
        assert not np.any(sol.x_star) and not np.any(sol.y_star)

    def test_hessian_extremes(self):
        p = gen_chain_gradient(ProblemParams(40.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0), 8)
        e = scipy.linalg.eigvalsh(p.f.hessian)
        assert e[0] >= 1.0 - 1e-10 and e[-1] <= 40.0 + 1e-10


class TestCoupledBlock:
    def test_parameters_n3(self):
        n, a, b, g = block_parameters(ProblemParams(10.0, 10.0, 19.0, 0.5, 0.5, 1.0, 1.0))
        assert n == 3
        assert a == pytest.approx(9.5)
        assert b == pytest.approx(19 / 3)
        assert g == pytest.approx(2 / math.sqrt(3))

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_shapes(self, n):
        assert coupling_block_matrix(n, 1.0, 1.0, 1.0).shape == (3 * n, 3 * n)
        assert coupling_block_matrix(n, 1.0, 1.0, 0.0).shape == (3 * n - 1, 3 * n)

    def test_block_bounds_example(self):
        rep = validate_spectrum_E(coupling_block_matrix(3, 1.0, 1.0, 1.0), 1.0, 1.0, 1.0, 3)
        assert rep.lower_bound == pytest.approx(1 / 81)
        assert rep.upper_bound == pytest.approx(8.0)
        assert rep.ok
        s2 = scipy.linalg.svdvals(coupling_block_matrix(3, 1.0, 1.0, 1.0)) ** 2
        assert rep.sigma2_min == pytest.approx(s2[-1]) and rep.sigma2_max == pytest.approx(s2[0])

    @pytest.mark.parametrize("n", range(2, 9))
    @pytest.mark.parametrize("mu_xy", [1.0, 0.0])
    def test_block_bounds_grid(self, n, mu_xy):
        n_, a, b, g = block_parameters(ProblemParams(10.0, 10.0, 6.0 * n + 3.0, 0.5, 0.5, mu_xy, 1.0))
        assert n_ == n
        rep = validate_spectrum_E(coupling_block_matrix(n, a, b, g), a, b, g, n)
        assert rep.ok, rep.lines()

    @given(st.floats(0.1, 10), st.integers(2, 6))
    def test_homogeneity(self, c, n):
        E = coupling_block_matrix(n, 1.0, 1.0, 1.0)
        r1 = validate_spectrum_E(E, 1.0, 1.0, 1.0, n)
        r2 = validate_spectrum_E(c * E, c, c, c, n)
        assert r2.sigma2_max == pytest.approx(c * c * r1.sigma2_max, rel=1e-9)
        assert r2.lower_bound == pytest.approx(c * c * r1.lower_bound, rel=1e-12)

    def test_generated_problem(self):
        p = gen_coupled_block(BLOCK, 3)
        assert p.dx == 27 and p.dy == 27
        assert check_spectra(p)
        E = p.dense_B()[::3, ::3]
        np.testing.assert_allclose(p.dense_B(), np.kron(E, np.eye(3)))
        np.testing.assert_allclose(E, coupling_block_matrix(*block_parameters(BLOCK)))

    def test_gamma_zero_case(self):
        params = ProblemParams(10.0, 10.0, 19.0, 0.5, 0.5, 0.0, 1.0)
        p = gen_coupled_block(params, 2)
        assert p.dense_B().shape == (2 * 8, 2 * 9)
        assert p.g.hessian[0, 0] == params.mu_y
        assert check_spectra(p)

    def test_first_g_block(self):
        p = gen_coupled_block(BLOCK, 2)
        np.testing.assert_allclose(np.diag(p.g.hessian)[:2], BLOCK.L_y)
        np.testing.assert_allclose(np.diag(p.g.hessian)[2:], BLOCK.mu_y)

    def test_too_few_blocks(self):
        with pytest.raises(ValueError):
            block_parameters(ProblemParams(10.0, 10.0, 11.0, 0.5, 0.5, 0.5, 0.6))


class TestBilinearTridiag:
    def test_entries(self):
        B = tridiag_matrix(19.0, 1.0, 4)
        np.testing.assert_allclose(np.diag(B), 10.0)
        np.testing.assert_allclose(np.diag(B, 1), -9.0)
        assert np.count_nonzero(np.tril(B, -1)) == 0

    @pytest.mark.parametrize("d", range(2, 11))
    def test_bidiagonal_bounds(self, d):
        s = scipy.linalg.svdvals(tridiag_matrix(19.0, 1.0, d))
        assert 1.0 - 1e-10 <= s[-1] and s[0] <= 19.0 + 1e-10
        assert validate_tridiag_spectrum(19.0, 1.0, d).ok

    def test_zero_linear_term(self):
        p = gen_bilinear_tridiag(ProblemParams(10.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0), 5, A=0.0)
        sol = solve_exact_quadratic(p)
        assert not np.any(sol.x_star) and not np.any(sol.y_star)

    def test_needs_strong_convexity(self):
        with pytest.raises(ValueError):
            gen_bilinear_tridiag(ProblemParams(10.0, 10.0, 19.0, 0.0, 1.0, 1.0, 1.0), 4)

    def test_hardness_ratio(self):
        # L_xy x4 leaves delta unchanged and multiplies kappa_xy by 16
        def matvecs(L_xy):
            p = gen_bilinear_tridiag(ProblemParams(10.0, 10.0, L_xy, 1.0, 1.0, 1.0, 1.0), 6)
            sol = solve_exact_quadratic(p)
            R2 = r2_metric(p, sol, np.zeros(6), np.zeros(6))
            led = OracleLedger()
            restarted_solve(p, 1e-6 * R2, led, solution=sol, R2=R2)
            return p.condition_numbers().kappa_xy, led.matvec_B

        k1, m1 = matvecs(19.0)
        k2, m2 = matvecs(76.0)
        assert k2 / k1 == pytest.approx(16.0)
        assert 3.0 <= m2 / m1 <= 6.0


class TestNamed:
    @pytest.mark.parametrize("name", sorted(NAMED_INSTANCES))
    def test_valid_and_converges(self, name):
        p = named_instance(name)
        assert validate_assumption5(p.params)
        assert check_spectra(p)
        sol = solve_exact_quadratic(p)
        z = np.zeros
        R2 = r2_metric(p, sol, z(p.dx), z(p.dy))
        eps = 1e-4 * R2
        x, y, trace = restarted_solve(p, eps, solution=sol, R2=R2)
        assert r2_metric(p, sol, x, y) <= eps
        assert len(trace) - 1 == restart_plan(p, eps, R2).T_restarts

    def test_unknown(self):
        with pytest.raises(KeyError):
            named_instance("nope")

    def test_bilinear_1d(self):
        p = named_instance("bilinear_1d")
        assert p.dx == p.dy == 1
        sol = solve_exact_quadratic(p)
        assert sol.x_star[0] == 0.0 and sol.y_star[0] == 0.0
