import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapemax import fem
from shapemax.fem import (FactorizedSystem, PointLocationError, ScalarField,
                          SparseSymSystem, SolverError, VecField,
                          point_source_vector, solve_spd)
from shapemax.geometry import make_square_mesh


@pytest.fixture(scope="module")
def square2():
    return make_square_mesh(2)


@pytest.fixture(scope="module")
def square8():
    return make_square_mesh(8)


class TestAssembleOperator:
    def test_mass_sum_is_area(self, square8):
        m = fem.assemble_operator(square8, 0.0, mass_coeff=1.0)
        assert m.sum() == pytest.approx(1.0, abs=1e-13)

    def test_constants_in_stiffness_kernel(self, square8):
        k = fem.assemble_operator(square8, 1.0, mass_coeff=0.0)
        assert np.abs(k @ np.ones(square8.n_nodes)).max() < 1e-13

    def test_center_diagonal_hand_value(self, square2):
        # hand assembly over the 8 right triangles around (0.5, 0.5) gives 4
        k = fem.assemble_operator(square2, 1.0, mass_coeff=0.0)
        center = 4
        assert k[center, center] == pytest.approx(4.0, abs=1e-13)

    def test_center_diagonal_quadrature_oracle(self, square2):
        # independent oracle: finite-difference gradient of the hat function
        # on a fine grid, integrated by the rectangle rule
        n = 400
        xs = (np.arange(n) + 0.5) / n
        xx, yy = np.meshgrid(xs, xs, indexing="xy")

        def hat(px, py):
            # P1 hat at (0.5, 0.5) on the n=2 right-triangle mesh
            out = np.zeros_like(px)
            for t in square2.triangles:
                p = square2.nodes[t]
                if 4 not in t.tolist():
                    continue
                d1, d2 = p[1] - p[0], p[2] - p[0]
                det = d1[0] * d2[1] - d1[1] * d2[0]
                rx, ry = px - p[0][0], py - p[0][1]
                l1 = (rx * d2[1] - ry * d2[0]) / det
                l2 = (d1[0] * ry - d1[1] * rx) / det
                l0 = 1 - l1 - l2
                lams = [l0, l1, l2]
                inside = (l0 >= -1e-12) & (l1 >= -1e-12) & (l2 >= -1e-12)
                local = int(np.where(t == 4)[0][0])
                out = np.where(inside, lams[local], out)
            return out

        h = 1e-5
        gx = (hat(xx + h, yy) - hat(xx - h, yy)) / (2 * h)
        gy = (hat(xx, yy + h) - hat(xx, yy - h)) / (2 * h)
        integral = (gx ** 2 + gy ** 2).mean()
        assert integral == pytest.approx(4.0, rel=2e-2)

    def test_tensor_weight_matches_scalar(self, square8):
        m = len(square8.triangles)
        tensor = np.tile(2.5 * np.eye(2), (m, 1, 1))
        a = fem.assemble_operator(square8, tensor)
        b = fem.assemble_operator(square8, 2.5)
        assert abs(a - b).max() < 1e-13

    def test_symmetry_and_positivity(self, square8):
        a = fem.assemble_operator(square8, 1.0, mass_coeff=1.0)
        system = SparseSymSystem(a, np.zeros(square8.n_nodes),
                                 square8.dirichlet_nodes)
        assert system.symmetry_defect() < 1e-13
        free = system.free_nodes
        dense = a[free][:, free].toarray()
        np.linalg.cholesky(dense)   # raises if not SPD

    def test_degenerate_element_rejected(self, square2):
        nodes = square2.nodes.copy()
        nodes.setflags(write=True)
        nodes[4] = nodes[0]   # collapse the center onto a corner
        bad = object.__new__(type(square2))
        for name, val in vars(square2).items():
            object.__setattr__(bad, name, val)
        object.__setattr__(bad, "nodes", nodes)
        with pytest.raises(Exception):
            fem.assemble_operator(bad, 1.0)


class TestLoads:
    def test_zero_source(self, square8):
        b = fem.assemble_load(square8, lambda x: np.zeros(len(x)))
        assert np.all(b == 0)

    def test_unit_source_sums_to_area(self, square8):
        b = fem.assemble_load(square8, lambda x: np.ones(len(x)))
        assert b.sum() == pytest.approx(1.0, abs=1e-13)

    def test_linear_source_exact(self, square8):
        b = fem.assemble_load(square8, lambda x: x[..., 0])
        assert b.sum() == pytest.approx(0.5, abs=1e-13)

    def test_quadratic_exactness(self, square8):
        # midpoint rule integrates x^2 exactly: integral over square = 1/3
        b = fem.assemble_load(square8, lambda x: x[..., 0] ** 2)
        assert b.sum() == pytest.approx(1.0 / 3.0, abs=1e-13)


class TestPointSource:
    def test_vertex_gives_unit_vector(self, square2):
        b = point_source_vector(square2, (0.5, 0.5), 2.0)
        expected = np.zeros(9)
        expected[4] = 2.0
        assert np.array_equal(b, expected)

    def test_barycenter_gives_thirds(self, square2):
        tri = square2.triangles[0]
        bc = square2.nodes[tri].mean(axis=0)
        b = point_source_vector(square2, bc, 1.0)
        assert np.allclose(b[tri], 1.0 / 3.0, atol=1e-12)
        assert b.sum() == pytest.approx(1.0)

    def test_shared_edge_midpoint(self, square2):
        # midpoint of the diagonal edge shared by triangles 0 and 1
        a, c = square2.triangles[0][0], square2.triangles[0][2]
        mid = 0.5 * (square2.nodes[a] + square2.nodes[c])
        b = point_source_vector(square2, mid, 1.0)
        nz = np.flatnonzero(b)
        assert set(nz) == {a, c}
        assert np.allclose(b[nz], 0.5, atol=1e-12)

    def test_outside_point_raises(self, square2):
        with pytest.raises(PointLocationError):
            point_source_vector(square2, (2.0, 2.0), 1.0)

    @settings(max_examples=40, deadline=None)
    @given(x=st.floats(0.0, 1.0), y=st.floats(0.0, 1.0),
           scale=st.floats(0.1, 10.0))
    def test_partition_property(self, x, y, scale):
        mesh = make_square_mesh(4)
        b = point_source_vector(mesh, (x, y), scale)
        assert (b >= 0).all()
        assert b.sum() == pytest.approx(scale, rel=1e-12)


class TestEval:
    def test_vertex_evaluation(self, square2):
        field = ScalarField(square2, np.arange(9.0))
        assert fem.eval_field(field, (0.5, 0.5)) == 4.0

    def test_linear_reproduction(self, square8):
        a, bx, cy = 0.7, -1.3, 2.1
        coeffs = a + bx * square8.nodes[:, 0] + cy * square8.nodes[:, 1]
        field = ScalarField(square8, coeffs)
        for p in [(0.13, 0.77), (0.5, 0.01), (0.99, 0.99)]:
            assert fem.eval_field(field, p) == pytest.approx(
                a + bx * p[0] + cy * p[1], abs=1e-13)
        grads = fem.element_gradients(field)
        assert np.allclose(grads, [bx, cy], atol=1e-12)

    def test_constant_field_zero_gradient(self, square8):
        field = ScalarField(square8, np.full(square8.n_nodes, 3.3))
        assert np.abs(fem.element_gradients(field)).max() < 1e-13
        assert np.abs(fem.grad_on_element(field, 5)).max() < 1e-13


class TestSolve:
    def test_identity_system(self):
        import scipy.sparse as sp
        rng = np.random.default_rng(3)
        b = rng.normal(size=20)
        system = SparseSymSystem(sp.eye(20).tocsr(), b)
        assert np.allclose(solve_spd(system), b, atol=1e-12)

    def test_all_dirichlet_zero(self, square2):
        a = fem.assemble_operator(square2, 1.0, mass_coeff=1.0)
        system = SparseSymSystem(a, np.ones(9), np.arange(9))
        assert np.array_equal(solve_spd(system), np.zeros(9))

    def test_matches_dense_oracle(self, square8):
        from shapemax import problems
        prob = problems.sine_tracking()
        a = fem.assemble_operator(square8, 1.0, mass_coeff=1.0)
        b = fem.assemble_load(square8, prob.f)
        system = SparseSymSystem(a, b, square8.dirichlet_nodes)
        x = solve_spd(system, tol=1e-12)
        free = system.free_nodes
        dense = a[free][:, free].toarray()
        x_oracle = np.zeros(square8.n_nodes)
        x_oracle[free] = np.linalg.solve(dense, b[free])
        assert np.abs(x - x_oracle).max() < 1e-8

    def test_galerkin_orthogonality(self, square8):
        from shapemax import problems
        prob = problems.sine_tracking()
        a = fem.assemble_operator(square8, 1.0, mass_coeff=1.0)
        b = fem.assemble_load(square8, prob.f)
        system = SparseSymSystem(a, b, square8.dirichlet_nodes)
        x = solve_spd(system, tol=1e-10)
        free = system.free_nodes
        residual = (b - a @ x)[free]
        assert np.abs(residual).max() <= 1e-10 * np.linalg.norm(b)

    def test_dirichlet_values_exact(self, square8):
        a = fem.assemble_operator(square8, 1.0, mass_coeff=1.0)
        values = np.arange(len(square8.dirichlet_nodes), dtype=float)
        system = SparseSymSystem(a, np.zeros(square8.n_nodes),
                                 square8.dirichlet_nodes, values)
        x = solve_spd(system)
        assert np.array_equal(x[square8.dirichlet_nodes], values)

    def test_nonconvergence_reports_residual(self):
        import scipy.sparse as sp
        # an unreachable tolerance must fail with the residual attached
        n = 10_000
        lap = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)],
                       [-1, 0, 1]).tocsr()
        rng = np.random.default_rng(0)
        system = SparseSymSystem(lap, rng.normal(size=n))
        with pytest.raises(SolverError) as err:
            solve_spd(system, tol=1e-14)
        assert err.value.residual > 0

    def test_factorized_matches_pcg(self, square8):
        from shapemax import problems
        prob = problems.sine_tracking()
        a = fem.assemble_operator(square8, 1.0, mass_coeff=1.0)
        b = fem.assemble_load(square8, prob.f)
        system = SparseSymSystem(a, b, square8.dirichlet_nodes)
        assert np.abs(FactorizedSystem(system).solve(b)
                      - solve_spd(system, tol=1e-12)).max() < 1e-10


class TestFields:
    def test_scalar_size_check(self, square2):
        with pytest.raises(ValueError):
            ScalarField(square2, np.zeros(5))

    def test_vector_layout(self, square2):
        v = VecField.from_xy(square2, np.column_stack(
            [np.arange(9.0), 10 + np.arange(9.0)]))
        assert v.coeffs[0] == 0.0 and v.coeffs[1] == 10.0
        assert v.coeffs[2] == 1.0
        assert np.array_equal(v.xy[:, 1], 10 + np.arange(9.0))

    def test_nonfinite_rejected(self, square2):
        with pytest.raises(ValueError):
            ScalarField(square2, np.full(9, np.nan))
