import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapemax import geometry
from shapemax.fem import VecField
from shapemax.geometry import (GeometryError, Mesh, MeshQualityReport,
                               deform_mesh, make_disk_mesh, make_square_mesh)


def polygon_area(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class TestSquareMesh:
    def test_n2_counts(self):
        m = make_square_mesh(2)
        assert m.n_nodes == 9
        assert m.n_triangles == 8
        assert m.areas.sum() == pytest.approx(1.0, abs=1e-14)

    def test_n4_boundary_count(self):
        m = make_square_mesh(4)
        assert len(m.boundary_nodes) == 16

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_interior_markers(self, n):
        m = make_square_mesh(n)
        interior = set(range(m.n_nodes)) - set(m.boundary_nodes.tolist())
        assert all(m.node_marker[i] == geometry.INTERIOR for i in interior)
        assert all(m.node_marker[i] == geometry.DIRICHLET
                   for i in m.boundary_nodes)

    def test_h_max(self):
        m = make_square_mesh(4)
        assert m.h_max == pytest.approx(np.sqrt(2) / 4)

    def test_rejects_small_n(self):
        with pytest.raises(GeometryError):
            make_square_mesh(1)


class TestDiskMesh:
    def test_octagon_area(self):
        m = make_disk_mesh((0.0, 0.0), 1.0, 8, 0.5)
        # regular octagon inscribed in the unit circle
        assert m.areas.sum() == pytest.approx(2 * np.sqrt(2), rel=1e-12)

    def test_triangulation_partitions_polygon(self):
        m = make_disk_mesh((0.5, 0.5), 1.3, 48, 0.2)
        assert m.areas.sum() == pytest.approx(
            polygon_area(m.boundary_polygon()), abs=1e-12)

    def test_400_node_boundary_domain(self):
        m = make_disk_mesh((0.5, 0.5), np.sqrt(6), 400, 0.35)
        assert len(m.boundary_nodes) == 400
        assert m.quality().is_valid

    def test_boundary_is_regular_polygon(self):
        m = make_disk_mesh((0.0, 0.0), 2.0, 16, 0.5)
        radii = np.linalg.norm(m.boundary_polygon(), axis=1)
        assert np.allclose(radii, 2.0, atol=1e-13)

    def test_rejects_bad_inputs(self):
        with pytest.raises(GeometryError):
            make_disk_mesh((0, 0), -1.0, 16, 0.1)
        with pytest.raises(GeometryError):
            make_disk_mesh((0, 0), 1.0, 7, 0.1)


class TestDeform:
    def test_zero_step_is_identity(self):
        m = make_square_mesh(3)
        g = VecField(m, np.ones(2 * m.n_nodes))
        out = deform_mesh(m, g, 0.0)
        assert out is m

    def test_translation_preserves_areas(self):
        m = make_square_mesh(4)
        c = np.array([0.3, -0.2])
        g = VecField.from_xy(m, np.tile(c, (m.n_nodes, 1)))
        out = deform_mesh(m, g, 0.5, mode="direct")
        assert isinstance(out, Mesh)
        assert np.allclose(out.nodes, m.nodes + 0.5 * c, atol=1e-15)
        assert np.allclose(out.areas, m.areas, atol=1e-15)

    def test_harmonic_zero_boundary_displacement_identity(self):
        m = make_square_mesh(4)
        values = np.zeros((m.n_nodes, 2))
        values[m.node_marker == geometry.INTERIOR] = 7.7   # ignored
        g = VecField.from_xy(m, values)
        out = deform_mesh(m, g, 1.0, mode="harmonic")
        assert isinstance(out, Mesh)
        assert np.array_equal(out.nodes, m.nodes)

    def test_preserves_topology_and_markers(self):
        m = make_disk_mesh((0, 0), 1.0, 16, 0.4)
        rng = np.random.default_rng(0)
        g = VecField.from_xy(m, 0.05 * rng.normal(size=(m.n_nodes, 2)))
        out = deform_mesh(m, g, 1.0, mode="direct")
        assert isinstance(out, Mesh)
        assert np.array_equal(out.triangles, m.triangles)
        assert np.array_equal(out.boundary_nodes, m.boundary_nodes)
        assert np.array_equal(out.node_marker, m.node_marker)
        assert out.n_nodes == m.n_nodes

    def test_descent_field_inverts_at_large_step(self):
        # an actual descent-direction field from a run iterate, scaled until
        # elements invert; the oracle is the signed-area check itself
        from shapemax import bundle, pde, problems
        from shapemax.derivatives import Metric, tracking_cost

        mesh = make_disk_mesh((0.5, 0.5), 1.2, 16, 0.35)
        prob = problems.sine_tracking()
        law = pde.constant_law()
        spec = tracking_cost(prob.u_d, prob.grad_u_d)
        state = pde.solve_state(mesh, prob.f, law)
        active = bundle.select_active(mesh, state.u, spec, 10)
        grads = bundle.build_bundle(mesh, state.u, active,
                                    Metric("sobolev", mesh), spec, law,
                                    prob.f, grad_f=prob.grad_f)
        g = bundle.steepest_direction(grads).g
        assert g is not None
        t = mesh.h_max
        for _ in range(40):
            out = deform_mesh(mesh, g, t, mode="direct")
            if isinstance(out, MeshQualityReport):
                break
            t *= 2.0
        else:
            pytest.fail("no inversion up to enormous steps")
        assert not out.is_valid
        moved = mesh.nodes + t * g.xy
        assert geometry.signed_areas(moved, mesh.triangles).min() \
            == pytest.approx(out.min_area)
        assert out.min_area <= geometry.AREA_FLOOR \
            or out.min_angle <= geometry.ANGLE_FLOOR

    def test_quality_of_valid_mesh_reports_valid(self):
        for m in (make_square_mesh(5), make_disk_mesh((0, 0), 1.0, 24, 0.3)):
            assert m.quality().is_valid

    @settings(max_examples=25, deadline=None)
    @given(cx=st.floats(-5, 5), cy=st.floats(-5, 5),
           t=st.floats(0.0, 2.0))
    def test_translation_property(self, cx, cy, t):
        m = make_square_mesh(3)
        g = VecField.from_xy(m, np.tile([cx, cy], (m.n_nodes, 1)))
        out = deform_mesh(m, g, t, mode="direct")
        assert isinstance(out, Mesh)
        assert np.allclose(out.areas, m.areas, atol=1e-12)


class TestInvariants:
    def test_rejects_inverted_triangle(self):
        nodes = np.array([[0.0, 0], [1, 0], [0, 1]])
        tris = np.array([[0, 2, 1]])   # clockwise
        with pytest.raises(GeometryError):
            Mesh(nodes, tris, np.array([0, 1, 2]), np.array([1, 1, 1]))

    def test_rejects_wrong_boundary_polygon(self):
        m = make_square_mesh(2)
        bad = m.boundary_nodes.copy()
        bad[1], bad[3] = bad[3], bad[1]   # breaks consecutive edges
        with pytest.raises(GeometryError):
            Mesh(m.nodes, m.triangles, bad, m.node_marker)

    def test_rejects_dirichlet_marker_off_boundary(self):
        m = make_square_mesh(2)
        marker = m.node_marker.copy()
        interior = list(set(range(m.n_nodes)) - set(m.boundary_nodes.tolist()))
        marker[interior[0]] = geometry.DIRICHLET
        with pytest.raises(GeometryError):
            Mesh(m.nodes, m.triangles, m.boundary_nodes, marker)

    def test_simple_polygon_check(self):
        square = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
        assert geometry.polygon_is_simple(square)
        bowtie = np.array([[0.0, 0], [1, 1], [1, 0], [0, 1]])
        assert not geometry.polygon_is_simple(bowtie)
