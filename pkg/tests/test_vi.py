import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilinear_sliding.numerics import DiagWeight, weighted_norm
from bilinear_sliding.oracles import LinearOp, QuadraticFn
from bilinear_sliding.sliding import Schedule
from bilinear_sliding.vi import (FullSpace, InfeasiblePoint, PBall, VIComponent, VIProblem, gap, project,
                                 theorem3_rhs)


def one_dim(L=1.0):
    return VIProblem([VIComponent(QuadraticFn(L * np.eye(1)))])


class TestGap:
    def test_identity(self, rng):
        vi = one_dim()
        z = rng.normal(size=1)
        assert gap(vi, z, z) == 0.0

    def test_quadratic(self):
        assert gap(one_dim(), [1.0], [0.0]) == 0.5

    def test_skew_at_origin(self):
        vi = VIProblem([VIComponent(Q=LinearOp([[0.0, 1.0], [-1.0, 0.0]]))])
        assert gap(vi, [3.0, -2.0], [0.0, 0.0]) == 0.0

    def test_infeasible_probe(self):
        vi = VIProblem([VIComponent(QuadraticFn(np.eye(2)))], constraint=PBall(np.zeros(2), 1.0))
        with pytest.raises(InfeasiblePoint):
            gap(vi, [0.0, 0.0], [2.0, 0.0])

    def test_affine_in_output(self, rng):
        A = rng.normal(size=(3, 3))
        vi = VIProblem([VIComponent(QuadraticFn(A @ A.T), LinearOp(A - A.T))])
        z = rng.normal(size=3)
        a, b = rng.normal(size=3), rng.normal(size=3)
        # the gap is quadratic in z_out through p; its second difference equals a quadratic form
        mid = gap(vi, 0.5 * (a + b), z)
        d = a - b
        curv = 0.25 * float(d @ (A @ A.T) @ d)
        assert 0.5 * (gap(vi, a, z) + gap(vi, b, z)) - mid == pytest.approx(0.5 * curv, rel=1e-9)


class TestCertificateBound:
    def test_single_smooth(self):
        vi = one_dim(4.0)
        # 4 * 4 / 2^2 * 1/2
        assert theorem3_rhs(vi, [2], [1.0], [0.0]) == pytest.approx(2.0)

    def test_zero_radius(self, rng):
        vi = one_dim(4.0)
        z = rng.normal(size=1)
        assert theorem3_rhs(vi, [3], z, z) == 0.0

    def test_operator_only(self):
        S = np.array([[0.0, 1.0], [-1.0, 0.0]])
        vi = VIProblem([VIComponent(Q=LinearOp(S)), VIComponent(Q=LinearOp(S))])
        r = 1.7
        # (2/2 + 4/4) * r^2 / 2
        assert theorem3_rhs(vi, [2, 2], [r, 0.0], [0.0, 0.0]) == pytest.approx(r * r)

    def test_honours_order(self):
        vi = VIProblem([VIComponent(QuadraticFn(np.eye(1))), VIComponent(QuadraticFn(8 * np.eye(1)))])
        swapped = Schedule((2, 3), (1, 0))
        # level 1 handles L = 8 with T = 2, level 2 handles L = 1 with product 6
        expected = (4 * 8 / 4 + 16 * 1 / 36) * 0.5
        assert theorem3_rhs(vi, swapped, [1.0], [0.0]) == pytest.approx(expected)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            theorem3_rhs(one_dim(), [1, 2], [0.0], [0.0])

    @given(st.floats(0.01, 100))
    def test_quadratic_scaling(self, c):
        vi = one_dim(3.0)
        base = theorem3_rhs(vi, [4], [1.0], [0.0])
        assert theorem3_rhs(vi, [4], [c], [0.0]) == pytest.approx(c * c * base)


class TestProject:
    def test_full_space(self, rng):
        z = rng.normal(size=3)
        assert np.array_equal(project(FullSpace(), DiagWeight.identity(3), z), z)

    def test_ball_radial(self):
        # ||(1, 0)||_P = 2, so the point is scaled by 1/2
        np.testing.assert_allclose(project(PBall(np.zeros(2), 1.0), DiagWeight([4.0, 1.0]), [1.0, 0.0]), [0.5, 0.0])

    def test_inside(self):
        z = np.array([0.1, 0.1])
        assert np.array_equal(project(PBall(np.zeros(2), 1.0), DiagWeight([4.0, 1.0]), z), z)

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent_nonexpansive(self, seed):
        rng = np.random.default_rng(seed)
        P = DiagWeight(rng.uniform(0.2, 5.0, size=4))
        ball = PBall(rng.normal(size=4), 0.7)
        for _ in range(50):
            a, b = 3 * rng.normal(size=4), 3 * rng.normal(size=4)
            pa, pb = project(ball, P, a), project(ball, P, b)
            np.testing.assert_allclose(project(ball, P, pa), pa)
            assert weighted_norm(pa - pb, P) <= weighted_norm(a - b, P) * (1 + 1e-12)
            assert ball.contains(pa, P)


class TestVIProblem:
    def test_component_limits(self):
        comp = VIComponent(QuadraticFn(np.eye(1)))
        with pytest.raises(ValueError):
            VIProblem([])
        with pytest.raises(ValueError):
            VIProblem([comp] * 9)

    def test_zero_component_rejected(self):
        with pytest.raises(ValueError):
            VIProblem([VIComponent(dim=2)])

    def test_exact_constants_in_P_geometry(self):
        P = DiagWeight([4.0, 1.0])
        vi = VIProblem([VIComponent(QuadraticFn(np.diag([4.0, 0.5])))], P)
        # P^{-1/2} A P^{-1/2} = diag(1, 0.5)
        assert vi.L[0] == pytest.approx(1.0)

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            VIProblem([VIComponent(QuadraticFn(np.eye(2))), VIComponent(QuadraticFn(np.eye(3)))])
        with pytest.raises(ValueError):
            VIProblem([VIComponent(QuadraticFn(np.eye(2)))], DiagWeight([1.0]))
