import numpy as np
import pytest

from shapemax import checks, derivatives, pde, problems
from shapemax.checks import (convergence_study, danskin_check,
                             reciprocity_check, smooth_field, taylor_test)
from shapemax.derivatives import tracking_cost
from shapemax.fem import VecField
from shapemax.geometry import make_disk_mesh, make_square_mesh


@pytest.fixture(scope="module")
def prob():
    return problems.sine_tracking()


@pytest.fixture(scope="module")
def spec(prob):
    return tracking_cost(prob.u_d, prob.grad_u_d)


@pytest.fixture(scope="module")
def law():
    return pde.constant_law()


class TestTaylor:
    def test_zero_field_zero_remainders(self, prob, spec, law):
        mesh = make_square_mesh(8)
        zero = VecField(mesh, np.zeros(2 * mesh.n_nodes))
        rep = taylor_test(mesh, prob.f, spec, law, "l2", zero,
                          grad_f=prob.grad_f)
        assert np.all(rep.remainders == 0.0)

    def test_l2_second_order(self, prob, spec, law):
        mesh = make_square_mesh(12)
        x = smooth_field(mesh, seed=3, amplitude=0.3)
        rep = taylor_test(mesh, prob.f, spec, law, "l2", x,
                          grad_f=prob.grad_f)
        assert rep.fitted_order >= 1.9

    def test_point_cost_second_order(self, prob, spec, law):
        mesh = make_square_mesh(12)
        x = smooth_field(mesh, seed=4, amplitude=0.3)
        state = pde.solve_state(mesh, prob.f, law)
        vals = derivatives.nodal_cost_values(state.u, spec)
        interior = np.flatnonzero(mesh.node_marker == 0)
        node = int(interior[np.argmax(vals[interior])])
        rep = taylor_test(mesh, prob.f, spec, law, "j_at_y", x, y_node=node,
                          grad_f=prob.grad_f)
        assert rep.fitted_order >= 1.9

    def test_point_cost_nonlinear_law(self, prob, spec):
        law = pde.saturating_law()
        mesh = make_square_mesh(10)
        x = smooth_field(mesh, seed=7, amplitude=0.3)
        state = pde.solve_state(mesh, prob.f, law)
        vals = derivatives.nodal_cost_values(state.u, spec)
        interior = np.flatnonzero(mesh.node_marker == 0)
        node = int(interior[np.argmax(vals[interior])])
        rep = taylor_test(mesh, prob.f, spec, law, "j_at_y", x, y_node=node,
                          grad_f=prob.grad_f)
        assert rep.fitted_order >= 1.9

    def test_step_shrinks_when_mesh_would_invert(self, prob, spec, law):
        mesh = make_square_mesh(8)
        x = smooth_field(mesh, seed=1, amplitude=20.0)
        rep = taylor_test(mesh, prob.f, spec, law, "l2", x, t0=1.0,
                          grad_f=prob.grad_f)
        assert rep.steps[0] < 1.0

    def test_steps_strictly_decreasing(self, prob, spec, law):
        mesh = make_square_mesh(8)
        x = smooth_field(mesh, seed=2, amplitude=0.2)
        rep = taylor_test(mesh, prob.f, spec, law, "l2", x,
                          grad_f=prob.grad_f)
        assert (np.diff(rep.steps) < 0).all()


class TestDanskin:
    def test_zero_field(self, prob, spec, law):
        mesh = make_square_mesh(8)
        zero = VecField(mesh, np.zeros(2 * mesh.n_nodes))
        assert danskin_check(mesh, prob.f, spec, law, zero, 1e-2,
                             grad_f=prob.grad_f) == 0.0

    def test_linear_decay_with_separated_argmax(self, prob, spec, law):
        # off-center disk: unique argmax with a healthy gap to the runner-up
        mesh = make_disk_mesh((0.53, 0.41), 1.2, 64, 0.15)
        state = pde.solve_state(mesh, prob.f, law)
        vals = derivatives.nodal_cost_values(state.u, spec)
        top = np.sort(vals)[-2:]
        assert top[1] - top[0] > 1e-3   # genuinely unique argmax
        x = smooth_field(mesh, seed=5, amplitude=0.3)
        gaps = [danskin_check(mesh, prob.f, spec, law, x, t,
                              grad_f=prob.grad_f)
                for t in (2e-2, 1e-2, 5e-3)]
        assert gaps[0] > gaps[1] > gaps[2]
        ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
        assert (ratios > 1.6).all()

    def test_symmetric_tie_takes_larger_branch(self):
        # f = 0 makes u vanish identically, so the max cost is a pure
        # geometric max of |u_d|^2 over moving nodes; two exactly tied
        # maximizers with opposite one-sided derivatives
        mesh = make_square_mesh(4)
        u_d = lambda x: (x[..., 0] - 0.5) * 4.0 * x[..., 1] * (1 - x[..., 1])

        def grad_u_d(x):
            gx = 4.0 * x[..., 1] * (1 - x[..., 1])
            gy = (x[..., 0] - 0.5) * (4.0 - 8.0 * x[..., 1])
            return np.stack([gx, gy], axis=-1)

        spec2 = tracking_cost(u_d, grad_u_d)
        law = pde.constant_law()
        f0 = lambda x: np.zeros(len(np.atleast_2d(x)))
        state = pde.solve_state(mesh, f0, law)
        value, argmax = derivatives.cost_linfty(mesh, state.u, spec2)
        assert len(argmax) == 2   # nodes (0, 0.5) and (1, 0.5)

        x_const = VecField.from_xy(mesh, np.tile([1.0, 0.0],
                                                 (mesh.n_nodes, 1)))
        # one-sided derivatives are -1 and +1; the max is +1
        djs = [derivatives.assemble_dj(mesh, state.u, None, mesh.nodes[n],
                                       f0, spec2, law, y_node=int(n))(x_const)
               for n in argmax]
        assert sorted(np.round(djs, 12)) == [-1.0, 1.0]
        gap = danskin_check(mesh, f0, spec2, law, x_const, 1e-3)
        assert gap < 2e-3


class TestReciprocity:
    def test_same_point_zero(self, prob):
        mesh = make_square_mesh(10)
        assert reciprocity_check(mesh, (0.4, 0.3), (0.4, 0.3)) == 0.0

    def test_random_interior_pairs(self):
        mesh = make_square_mesh(12)
        rng = np.random.default_rng(0)
        for _ in range(10):
            y1, y2 = rng.uniform(0.1, 0.9, size=(2, 2))
            assert reciprocity_check(mesh, y1, y2) <= 1e-9

    def test_boundary_point_both_zero(self):
        mesh = make_square_mesh(8)
        yb = mesh.nodes[mesh.boundary_nodes[2]]
        yi = (0.5, 0.5)
        from shapemax import fem
        matrix = fem.assemble_operator(mesh, 1.0, mass_coeff=1.0)
        system = fem.SparseSymSystem(matrix, np.zeros(mesh.n_nodes),
                                     mesh.dirichlet_nodes)
        solver = fem.FactorizedSystem(system)
        ub = solver.solve(fem.point_source_vector(mesh, yb, 1.0))
        ui = solver.solve(fem.point_source_vector(mesh, yi, 1.0))
        from shapemax.fem import ScalarField, eval_field
        assert eval_field(ScalarField(mesh, ub), yi) == 0.0
        assert eval_field(ScalarField(mesh, ui), yb) == 0.0
        assert reciprocity_check(mesh, yb, yi) == 0.0


class TestConvergence:
    def test_second_order_rate(self, prob):
        rep = convergence_study([8, 16, 32], prob.f, prob.u_d)
        assert rep.l2_rate >= 1.9
        assert rep.l2_errors[-1] < rep.l2_errors[0]

    def test_zero_source_zero_error(self):
        f0 = lambda x: np.zeros(len(np.atleast_2d(x)))
        exact0 = lambda x: np.zeros(np.shape(x)[:-1])
        rep = convergence_study([8, 16], f0, exact0)
        assert np.all(rep.l2_errors == 0.0)
        assert np.all(rep.max_errors == 0.0)

    def test_rejects_nonincreasing_levels(self, prob):
        with pytest.raises(ValueError):
            convergence_study([16, 8], prob.f, prob.u_d)


class TestSmoothField:
    def test_deterministic(self):
        mesh = make_square_mesh(6)
        a = smooth_field(mesh, seed=12)
        b = smooth_field(mesh, seed=12)
        assert np.array_equal(a.coeffs, b.coeffs)
        c = smooth_field(mesh, seed=13)
        assert not np.array_equal(a.coeffs, c.coeffs)
