"""Independent numerical oracles.

Every check here recomputes its reference value from scratch (perturbed
re-solves, finite differences, brute-force scans) rather than reusing the
assembled derivative code paths, so agreement is evidence and not tautology.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import derivatives, fem, geometry, pde
from .derivatives import CostSpec
from .fem import ScalarField, VecField
from .geometry import Mesh


@dataclass(frozen=True)
class TaylorReport:
    steps: np.ndarray
    remainders: np.ndarray
    fitted_order: float
    base_value: float
    derivative: float


@dataclass(frozen=True)
class CheckResult:
    name: str
    metric: str
    value: float
    passed: bool


def hausdorff_to_unit_square(polygon: np.ndarray,
                             samples: int = 200) -> float:
    """Hausdorff distance between a closed polygon and the unit-square
    boundary, sampling the square at `samples` points per side."""
    polygon = np.asarray(polygon, dtype=float)

    def to_square(p):
        x, y = p
        dx = max(0.0 - x, 0.0, x - 1.0)
        dy = max(0.0 - y, 0.0, y - 1.0)
        if dx > 0.0 or dy > 0.0:
            return float(np.hypot(dx, dy))
        return float(min(x, 1.0 - x, y, 1.0 - y))

    d_poly_to_square = max(to_square(p) for p in polygon)
    ts = np.linspace(0.0, 1.0, samples, endpoint=False)
    zeros = np.zeros_like(ts)
    square = np.concatenate([
        np.column_stack([ts, zeros]), np.column_stack([zeros + 1.0, ts]),
        np.column_stack([1.0 - ts, zeros + 1.0]),
        np.column_stack([zeros, 1.0 - ts])])
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    ab = b - a
    denom = np.maximum((ab ** 2).sum(axis=1), 1e-300)
    d_square_to_poly = 0.0
    for q in square:
        t = np.clip(((q - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
        dist = np.linalg.norm(a + t[:, None] * ab - q, axis=1).min()
        d_square_to_poly = max(d_square_to_poly, float(dist))
    return max(d_poly_to_square, d_square_to_poly)


def smooth_field(mesh: Mesh, seed: int = 0, amplitude: float = 1.0) -> VecField:
    """Deterministic smooth perturbation field sampled at the nodes."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(2, 4))
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    fx = a[0, 0] * np.sin(x + 2 * y) + a[0, 1] * np.cos(y) \
        + a[0, 2] * x * y + a[0, 3]
    fy = a[1, 0] * np.cos(2 * x - y) + a[1, 1] * np.sin(x) \
        + a[1, 2] * (x - y) + a[1, 3]
    return VecField.from_xy(mesh, amplitude * np.column_stack([fx, fy]))


def _fit_order(steps: np.ndarray, remainders: np.ndarray) -> float:
    mask = remainders > 1e-300
    if mask.sum() < 2:
        return float("inf")
    slope = np.polyfit(np.log(steps[mask]), np.log(remainders[mask]), 1)[0]
    return float(slope)


def taylor_test(mesh: Mesh, f: Callable, spec: CostSpec, law: pde.DiffusionLaw,
                cost: str, x_field: VecField, t0: float = 0.25,
                n_steps: int = 7, y_node: Optional[int] = None,
                grad_f: Optional[Callable] = None) -> TaylorReport:
    """First-order remainder decay of a cost under direct node motion.

    cost "l2" perturbs the integral cost; "j_at_y" tracks the pointwise cost
    at a node that moves with the mesh.  The perturbed values re-solve the
    state on the deformed mesh; only the derivative value comes from the
    assembled functional.
    """
    if cost not in ("l2", "j_at_y"):
        raise ValueError(f"unknown taylor cost {cost!r}")
    if cost == "j_at_y" and y_node is None:
        raise ValueError("j_at_y needs the tracked node index")

    state = pde.solve_state(mesh, f, law, tol=1e-12)

    if cost == "l2":
        base = derivatives.cost_l2(mesh, state.u, spec)
        p_hat = pde.solve_adjoint_l2(mesh, state.u, spec.u_d, law)
        dj = derivatives.assemble_dJ2(mesh, state.u, p_hat, f, spec,
                                      grad_f=grad_f)
    else:
        node = int(y_node)
        base = float(spec.psi(mesh.nodes[node], state.u.coeffs[node]))
        psi_u = float(spec.psi_z(mesh.nodes[node], state.u.coeffs[node]))
        p_y = pde.solve_adjoint_point(mesh, state.u, mesh.nodes[node], law,
                                      psi_u)
        dj = derivatives.assemble_dj(mesh, state.u, p_y, mesh.nodes[node], f,
                                     spec, law, grad_f=grad_f, y_node=node)
    slope = dj(x_field)

    displacement = x_field.xy
    # validity is not monotone in t, so the whole dyadic sequence is checked
    for _ in range(30):
        steps = t0 * 0.5 ** np.arange(n_steps)
        deformed_seq = [geometry.apply_displacement(mesh, displacement,
                                                    float(t)) for t in steps]
        if all(isinstance(d, Mesh) for d in deformed_seq):
            break
        t0 *= 0.5
    else:
        raise geometry.GeometryError("taylor perturbation inverts the mesh "
                                     "at every tried step size")
    remainders = np.empty(n_steps)
    for i, (t, deformed) in enumerate(zip(steps, deformed_seq)):
        moved = pde.solve_state(deformed, f, law, tol=1e-12)
        if cost == "l2":
            value = derivatives.cost_l2(deformed, moved.u, spec)
        else:
            value = float(spec.psi(deformed.nodes[node],
                                   moved.u.coeffs[node]))
        remainders[i] = abs(value - base - t * slope)
    return TaylorReport(steps=steps, remainders=remainders,
                        fitted_order=_fit_order(steps, remainders),
                        base_value=base, derivative=slope)


def danskin_check(mesh: Mesh, f: Callable, spec: CostSpec,
                  law: pde.DiffusionLaw, x_field: VecField, t: float,
                  grad_f: Optional[Callable] = None) -> float:
    """|one-sided difference quotient of the max cost - max over argmax dj|."""
    state = pde.solve_state(mesh, f, law, tol=1e-12)
    base, argmax = derivatives.cost_linfty(mesh, state.u, spec)

    solver = None
    best = -np.inf
    for node in argmax:
        node = int(node)
        if mesh.node_marker[node] == geometry.DIRICHLET:
            p_y = None
        else:
            if solver is None:
                solver = fem.FactorizedSystem(
                    pde.adjoint_system(mesh, state.u, law))
            psi_u = float(spec.psi_z(mesh.nodes[node], state.u.coeffs[node]))
            p_y = pde.solve_adjoint_point(mesh, state.u, mesh.nodes[node],
                                          law, psi_u, solver=solver)
        dj = derivatives.assemble_dj(mesh, state.u, p_y, mesh.nodes[node], f,
                                     spec, law, grad_f=grad_f, y_node=node)
        best = max(best, dj(x_field))

    deformed = geometry.apply_displacement(mesh, x_field.xy, t)
    if not isinstance(deformed, Mesh):
        raise geometry.GeometryError("danskin perturbation inverted mesh")
    moved = pde.solve_state(deformed, f, law, tol=1e-12)
    value, _ = derivatives.cost_linfty(deformed, moved.u, spec)
    return abs((value - base) / t - best)


def reciprocity_check(mesh: Mesh, y1, y2) -> float:
    """Symmetry defect of the discrete Green function for unit diffusion."""
    matrix = fem.assemble_operator(mesh, 1.0, mass_coeff=1.0)
    system = fem.SparseSymSystem(matrix, np.zeros(mesh.n_nodes),
                                 mesh.dirichlet_nodes)
    solver = fem.FactorizedSystem(system)
    u1 = ScalarField(mesh, solver.solve(fem.point_source_vector(mesh, y1, 1.0)))
    u2 = ScalarField(mesh, solver.solve(fem.point_source_vector(mesh, y2, 1.0)))
    return abs(fem.eval_field(u1, y2) - fem.eval_field(u2, y1))


@dataclass(frozen=True)
class ConvergenceReport:
    levels: np.ndarray
    h_values: np.ndarray
    l2_errors: np.ndarray
    max_errors: np.ndarray
    l2_rate: float


def convergence_study(levels, f: Callable, exact: Callable,
                      law: Optional[pde.DiffusionLaw] = None,
                      ) -> ConvergenceReport:
    """L2 and nodal-max errors of the state on refined unit-square meshes."""
    levels = np.asarray(list(levels), dtype=int)
    if (np.diff(levels) <= 0).any():
        raise ValueError("levels must be increasing")
    if law is None:
        law = pde.constant_law()
    h_values, l2_errors, max_errors = [], [], []
    for n in levels:
        mesh = geometry.make_square_mesh(int(n))
        state = pde.solve_state(mesh, f, law, tol=1e-12)
        mids = fem.edge_midpoints(mesh).reshape(-1, 2)
        diff = fem.field_at_midpoints(state.u) \
            - np.asarray(exact(mids), dtype=float).reshape(-1, 3)
        l2 = np.sqrt((mesh.areas / 3.0) @ (diff ** 2).sum(axis=1))
        nodal = np.abs(state.u.coeffs - np.asarray(exact(mesh.nodes)))
        h_values.append(mesh.h_max)
        l2_errors.append(float(l2))
        max_errors.append(float(nodal.max()))
    h_values = np.array(h_values)
    l2_errors = np.array(l2_errors)
    if (l2_errors > 0).all():
        rate = float(np.polyfit(np.log(h_values), np.log(l2_errors), 1)[0])
    else:
        rate = float("inf")
    return ConvergenceReport(levels=levels, h_values=h_values,
                             l2_errors=l2_errors,
                             max_errors=np.array(max_errors), l2_rate=rate)
