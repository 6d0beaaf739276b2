import numpy as np
import pytest

from minkflow.errors import GeometryError
from minkflow.functionals import v_phi
from minkflow.geometry import assemble_state
from minkflow.oracle import (
    NewtonProblem,
    ellipse_oracle,
    ellipse_support,
    jacobian_fd_check,
    newton_solve,
)
from minkflow.orlicz import DensitySpec, PhiSpec
from minkflow.sphere import ScalarField, build_grid

PHI_SQ = PhiSpec.power(2.0, (0.05, 20.0))
F_ONE = DensitySpec("constant", {"value": 1.0}, even=True)


def quadratic_tail_ratios(history, res_tol):
    """Consecutive residual ratios before the iteration enters rounding floor.

    The floor is taken as 1000x the final residual (or the tolerance if
    larger); iterations beyond the first value under it only shuffle noise.
    """
    floor = 1e3 * max(history[-1], res_tol)
    kept = []
    for h in history:
        kept.append(h)
        if h <= floor:
            break
    return [kept[i + 1] / kept[i] for i in range(len(kept) - 1)]


class TestEllipseOracle:
    def test_circle_degenerate_case(self, circle_256):
        st = ellipse_oracle(1.3, 1.3, circle_256)
        assert np.max(np.abs(st.u.values - 1.3)) <= 1e-14
        assert np.max(np.abs(st.b.values[:, 0] - 1.3)) <= 1e-14

    def test_vertex_curvature_radius(self, circle_256):
        st = ellipse_oracle(1.5, 0.7, circle_256)
        assert st.b.values[0, 0] == pytest.approx(0.7 ** 2 / 1.5, abs=1e-15)

    def test_support_and_radial_maxima_agree(self, circle_256):
        st = ellipse_oracle(1.5, 0.7, circle_256)
        assert np.max(st.u.values) == pytest.approx(1.5, abs=1e-14)
        assert np.max(st.r.values) == pytest.approx(1.5, abs=1e-14)
        assert np.min(st.u.values) == pytest.approx(0.7, abs=1e-14)

    def test_positions_lie_on_ellipse(self, circle_256):
        a, b = 1.5, 0.7
        st = ellipse_oracle(a, b, circle_256)
        on_curve = (st.positions[:, 0] / a) ** 2 + (st.positions[:, 1] / b) ** 2
        assert np.max(np.abs(on_curve - 1.0)) <= 1e-13

    def test_matches_assembled_state_at_second_order(self, circle_512):
        g = circle_512
        u = ellipse_support(1.5, 0.7, g.angles[0])
        fd = assemble_state(ScalarField(g, u))
        ref = ellipse_oracle(1.5, 0.7, g)
        assert np.max(np.abs(fd.r.values - ref.r.values)) <= 5.0 * g.spacing ** 2
        assert np.max(np.abs(fd.positions - ref.positions)) <= 5.0 * g.spacing ** 2

    def test_invalid_axes(self, circle_256):
        with pytest.raises(ValueError):
            ellipse_oracle(-1.0, 0.5, circle_256)


class TestNewton:
    def test_unit_circle_square_weight(self, circle_256):
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=F_ONE, v_target=np.pi)
        res = newton_solve(problem, ScalarField(circle_256, np.full(256, 1.1)))
        assert res.converged
        assert np.max(np.abs(res.u - 1.0)) <= 1e-12
        assert res.lam == pytest.approx(1.0, abs=1e-12)

    def test_radial_closed_form_inverse_square_weight(self, circle_256):
        phi = PhiSpec.power(-2.0, (0.05, 20.0), base_point=1.0)
        target = v_phi(assemble_state(ScalarField(circle_256, np.full(256, 2.0))), phi)
        problem = NewtonProblem(grid=circle_256, phi=phi, density=F_ONE, v_target=target)
        res = newton_solve(problem, ScalarField(circle_256, np.full(256, 1.5)))
        assert res.converged
        assert np.max(np.abs(res.u - 2.0)) <= 1e-12
        assert res.lam == pytest.approx(0.25, abs=1e-12)  # phi(2)

    def test_nonconstant_density_quadratic_tail(self, circle_256):
        f = DensitySpec("harmonic", {"c0": 1.0, "terms": [{"k": 2, "cos": 0.2}]}, even=True)
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=f, v_target=np.pi)
        res = newton_solve(problem, ScalarField(circle_256, np.ones(256)))
        assert res.converged
        assert np.ptp(res.u) > 1e-3  # genuinely nonconstant solution
        ratios = quadratic_tail_ratios(res.residual_history, problem.res_tol)
        assert all(r <= 0.1 for r in ratios[-3:])

    def test_initialisation_robustness(self, circle_256):
        # two admissible starting bodies land on the same solution
        f = DensitySpec("harmonic", {"c0": 1.0, "terms": [{"k": 2, "cos": 0.2}]}, even=True)
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=f, v_target=np.pi)
        res_a = newton_solve(problem, ScalarField(circle_256, np.ones(256)))
        res_b = newton_solve(
            problem, ScalarField(circle_256, 1.15 + 0.05 * np.cos(2 * circle_256.angles[0]))
        )
        assert res_a.converged and res_b.converged
        assert np.max(np.abs(res_a.u - res_b.u)) <= 1e-10
        assert abs(res_a.lam - res_b.lam) <= 1e-10

    def test_bad_initial_guess_rejected(self, circle_256):
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=F_ONE, v_target=np.pi)
        with pytest.raises(GeometryError):
            newton_solve(problem, ScalarField(circle_256, 1.0 + 0.8 * np.cos(2 * circle_256.angles[0])))

    def test_oracle_is_circle_only(self, latlon_16_32):
        with pytest.raises(GeometryError, match="n=1 only"):
            NewtonProblem(grid=latlon_16_32, phi=PHI_SQ, density=F_ONE, v_target=1.0)


class TestJacobian:
    def test_fd_agreement_round_body(self, circle_256):
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=F_ONE, v_target=np.pi)
        err = jacobian_fd_check(problem, ScalarField(circle_256, np.ones(256)))
        assert err <= 1e-6

    def test_fd_agreement_ellipse(self, circle_256):
        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=F_ONE, v_target=np.pi)
        u = ellipse_support(1.2, 0.9, circle_256.angles[0])
        err = jacobian_fd_check(problem, ScalarField(circle_256, u))
        assert err <= 1e-5

    def test_zero_perturbation_is_exact(self, circle_256):
        from minkflow.oracle import _residual

        problem = NewtonProblem(grid=circle_256, phi=PHI_SQ, density=F_ONE, v_target=np.pi)
        u = np.ones(256)
        g1 = _residual(problem, u, 1.0)
        g2 = _residual(problem, u + 0.0, 1.0)
        assert np.array_equal(g1, g2)
