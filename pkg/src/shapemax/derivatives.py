"""Cost functionals, volume-form shape derivatives, and gradient metrics.

Shape derivatives are assembled in the distributed (volume) tensor form: for
the pointwise cost at a tracked point y the integrand pairs a rank-2 tensor
with the Jacobian of the perturbation field and a vector with the field
itself, plus a point term at y.  All varying data enters through the same
edge-midpoint quadrature used for loads, which makes the assembled value the
exact derivative of the computed discrete cost under direct node motion.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import fem
from .fem import ScalarField, VecField
from .geometry import Mesh
from .pde import DiffusionLaw


@dataclass(frozen=True)
class CostSpec:
    """Pointwise cost psi(x, z) with its partial derivatives.

    psi_z is d(psi)/dz, psi_x the spatial gradient (last axis 2).  For
    tracking costs the target u_d and its gradient are kept alongside.
    """
    psi: Callable
    psi_z: Callable
    psi_x: Callable
    u_d: Optional[Callable] = None
    grad_u_d: Optional[Callable] = None

    def check_consistency(self, xs: np.ndarray, zs: np.ndarray,
                          tol: float = 1e-6, step: float = 1e-6) -> None:
        """Finite-difference spot check of psi_z and psi_x."""
        xs = np.asarray(xs, dtype=float)
        zs = np.asarray(zs, dtype=float)
        scale = 1.0 + np.abs(self.psi(xs, zs))
        fd_z = (self.psi(xs, zs + step) - self.psi(xs, zs - step)) / (2 * step)
        if (np.abs(fd_z - self.psi_z(xs, zs)) > tol * scale).any():
            raise ValueError("psi_z inconsistent with psi")
        for c in range(2):
            e = np.zeros(2)
            e[c] = step
            fd_x = (self.psi(xs + e, zs) - self.psi(xs - e, zs)) / (2 * step)
            if (np.abs(fd_x - self.psi_x(xs, zs)[..., c]) > tol * scale).any():
                raise ValueError("psi_x inconsistent with psi")


def tracking_cost(u_d: Callable, grad_u_d: Callable) -> CostSpec:
    """psi(x, z) = |z - u_d(x)|^2."""
    def psi(x, z):
        return (np.asarray(z) - u_d(x)) ** 2

    def psi_z(x, z):
        return 2.0 * (np.asarray(z) - u_d(x))

    def psi_x(x, z):
        return -2.0 * (np.asarray(z) - u_d(x))[..., None] * grad_u_d(x)

    return CostSpec(psi, psi_z, psi_x, u_d=u_d, grad_u_d=grad_u_d)


@dataclass(frozen=True)
class DerivativeFunctional:
    """Values of a shape-derivative functional on all 2N nodal basis fields."""
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (2 * self.mesh.n_nodes,):
            raise ValueError("derivative functional size does not match mesh")
        if not np.isfinite(values).all():
            raise ValueError("non-finite derivative functional")

    def __call__(self, x: VecField) -> float:
        return float(self.values @ x.coeffs)


def nodal_cost_values(u: ScalarField, spec: CostSpec) -> np.ndarray:
    return np.asarray(spec.psi(u.mesh.nodes, u.coeffs), dtype=float)


def cost_linfty(mesh: Mesh, u: ScalarField,
                spec: CostSpec) -> tuple[float, np.ndarray]:
    """Max of psi over mesh nodes and the list of attaining nodes."""
    vals = nodal_cost_values(u, spec)
    value = float(vals.max())
    return value, np.flatnonzero(vals == value)


def cost_l2(mesh: Mesh, u: ScalarField, spec: CostSpec) -> float:
    """Integral of |u_h - u_d|^2 by the edge-midpoint rule."""
    if spec.u_d is None:
        raise ValueError("cost_l2 needs a tracking target u_d")
    mids = fem.edge_midpoints(mesh).reshape(-1, 2)
    diff = fem.field_at_midpoints(u) \
        - np.asarray(spec.u_d(mids), dtype=float).reshape(-1, 3)
    return float((mesh.areas / 3.0) @ (diff ** 2).sum(axis=1))


def fd_gradient(f: Callable, step: float) -> Callable:
    """Central finite-difference gradient of a scalar function of (.., 2)."""
    def grad(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for c in range(2):
            e = np.zeros(2)
            e[c] = step
            out[..., c] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) \
                / (2 * step)
        return out
    return grad


def _scatter(mesh: Mesh, tensors: np.ndarray, midvecs: np.ndarray,
             areas: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Assemble sum_K T_K : dV + midpoint-rule(w . V) over all basis fields.

    tensors: (M, 2, 2) per-element integrals of the tensor part (area
    included); midvecs: (M, 3, 2) vector integrand at edge midpoints.
    """
    out = np.zeros(2 * mesh.n_nodes)
    tris = mesh.triangles
    for i in range(3):
        grad_i = grads[:, i, :]                       # (M, 2)
        contrib = np.einsum("mcj,mj->mc", tensors, grad_i)
        contrib += (areas / 6.0)[:, None] * (
            midvecs[:, (i + 1) % 3, :] + midvecs[:, (i + 2) % 3, :])
        idx = 2 * tris[:, i]
        np.add.at(out, idx, contrib[:, 0])
        np.add.at(out, idx + 1, contrib[:, 1])
    return out


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, :, None] * b[:, None, :] + b[:, :, None] * a[:, None, :]


def assemble_dj(mesh: Mesh, u: ScalarField, p_y: Optional[ScalarField], y,
                f: Callable, spec: CostSpec, law: DiffusionLaw,
                grad_f: Optional[Callable] = None,
                y_node: Optional[int] = None) -> DerivativeFunctional:
    """Shape derivative of the pointwise cost tracked at y.

    p_y may be None (taken as zero) for Dirichlet boundary points, where the
    adjoint vanishes and only the point term survives.  grad_f defaults to a
    central finite difference with step h_max^2.
    """
    out = np.zeros(2 * mesh.n_nodes)

    if p_y is not None:
        if grad_f is None:
            grad_f = fd_gradient(f, mesh.h_max ** 2)
        areas, grads = fem.element_geometry(mesh)
        gu = fem.element_gradients(u)
        gp = fem.element_gradients(p_y)
        s = (gu ** 2).sum(axis=1)
        beta = np.asarray(law.beta(s), dtype=float)
        beta_p = np.asarray(law.beta_prime(s), dtype=float)
        dot_up = (gu * gp).sum(axis=1)

        mids = fem.edge_midpoints(mesh)
        flat = mids.reshape(-1, 2)
        u_m = fem.field_at_midpoints(u)
        p_m = fem.field_at_midpoints(p_y)
        f_m = np.asarray(f(flat), dtype=float).reshape(-1, 3)
        gf_m = np.asarray(grad_f(flat), dtype=float).reshape(-1, 3, 2)

        scalar = beta * dot_up + ((u_m - f_m) * p_m).mean(axis=1)
        tensors = scalar[:, None, None] * np.eye(2)[None] \
            - beta[:, None, None] * _sym_outer(gu, gp) \
            - (2.0 * beta_p * dot_up)[:, None, None] \
            * (gu[:, :, None] * gu[:, None, :])
        tensors *= areas[:, None, None]
        midvecs = -p_m[:, :, None] * gf_m
        out = _scatter(mesh, tensors, midvecs, areas, grads)

    if y_node is not None:
        node_idx = np.array([y_node])
        weights = np.array([1.0])
        u_y = float(u.coeffs[y_node])
        y = mesh.nodes[y_node]
    else:
        k, lam = fem.locate_point(mesh, y)
        node_idx = mesh.triangles[k]
        weights = lam
        u_y = float(u.coeffs[node_idx] @ lam)
    point_grad = np.asarray(spec.psi_x(np.asarray(y, dtype=float), u_y),
                            dtype=float).reshape(2)
    for i, w in zip(node_idx, weights):
        out[2 * i] += w * point_grad[0]
        out[2 * i + 1] += w * point_grad[1]
    return DerivativeFunctional(mesh, out)


def assemble_dJ2(mesh: Mesh, u: ScalarField, p_hat: ScalarField, f: Callable,
                 spec: CostSpec,
                 grad_f: Optional[Callable] = None) -> DerivativeFunctional:
    """Shape derivative of the integral tracking cost (linear diffusion)."""
    if spec.u_d is None or spec.grad_u_d is None:
        raise ValueError("assemble_dJ2 needs u_d and grad_u_d")
    if grad_f is None:
        grad_f = fd_gradient(f, mesh.h_max ** 2)
    areas, grads = fem.element_geometry(mesh)
    gu = fem.element_gradients(u)
    gp = fem.element_gradients(p_hat)

    mids = fem.edge_midpoints(mesh)
    flat = mids.reshape(-1, 2)
    u_m = fem.field_at_midpoints(u)
    p_m = fem.field_at_midpoints(p_hat)
    f_m = np.asarray(f(flat), dtype=float).reshape(-1, 3)
    gf_m = np.asarray(grad_f(flat), dtype=float).reshape(-1, 3, 2)
    ud_m = np.asarray(spec.u_d(flat), dtype=float).reshape(-1, 3)
    gud_m = np.asarray(spec.grad_u_d(flat), dtype=float).reshape(-1, 3, 2)

    scalar = (gu * gp).sum(axis=1) \
        + ((u_m - ud_m) ** 2 - f_m * p_m).mean(axis=1)
    tensors = scalar[:, None, None] * np.eye(2)[None] - _sym_outer(gu, gp)
    tensors *= areas[:, None, None]
    midvecs = -p_m[:, :, None] * gf_m \
        - 2.0 * (u_m - ud_m)[:, :, None] * gud_m
    return DerivativeFunctional(
        mesh, _scatter(mesh, tensors, midvecs, areas, grads))


class Metric:
    """Inner product on the discrete vector-field space.

    "sobolev" weighs fields by the componentwise H1 product (displacement
    free on the boundary); "euclidean" is the coefficient dot product in the
    fixed node-major basis.
    """

    def __init__(self, tag: str, mesh: Mesh):
        if tag not in ("sobolev", "euclidean"):
            raise ValueError(f"unknown metric {tag!r}")
        self.tag = tag
        self.mesh = mesh
        self._h1 = None
        self._solver = None

    @property
    def h1_matrix(self):
        if self._h1 is None:
            self._h1 = fem.assemble_operator(self.mesh, 1.0, mass_coeff=1.0)
        return self._h1

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._solver is None:
            system = fem.SparseSymSystem(self.h1_matrix,
                                         np.zeros(self.mesh.n_nodes))
            self._solver = fem.FactorizedSystem(system)
        return self._solver.solve(rhs)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Matrix of the metric applied to stacked coefficients (2N, ...)."""
        if self.tag == "euclidean":
            return coeffs
        flat = coeffs.reshape(2 * self.mesh.n_nodes, -1)
        out = np.empty_like(flat)
        out[0::2] = self.h1_matrix @ flat[0::2]
        out[1::2] = self.h1_matrix @ flat[1::2]
        return out.reshape(coeffs.shape)

    def inner(self, x: VecField, y: VecField) -> float:
        if x.mesh is not self.mesh or y.mesh is not self.mesh:
            raise ValueError("fields live on a different mesh than the metric")
        return float(x.coeffs @ self.apply(y.coeffs))

    def norm(self, x: VecField) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def gradient(self, dj: DerivativeFunctional) -> VecField:
        """Riesz representative of dj in this metric."""
        if dj.mesh is not self.mesh:
            raise ValueError("functional assembled on a different mesh")
        if self.tag == "euclidean":
            return VecField(self.mesh, dj.values.copy())
        out = np.empty_like(dj.values)
        out[0::2] = self._solve(dj.values[0::2])
        out[1::2] = self._solve(dj.values[1::2])
        return VecField(self.mesh, out)


def gradient(metric: Metric, dj: DerivativeFunctional) -> VecField:
    return metric.gradient(dj)


def inner(metric: Metric, x: VecField, y: VecField) -> float:
    return metric.inner(x, y)
