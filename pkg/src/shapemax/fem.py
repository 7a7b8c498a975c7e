"""P1 finite element primitives on triangle meshes.

Assembly uses exact per-element formulas: constant gradients for stiffness,
the exact P1 mass matrix, and the 3-point edge-midpoint rule (exact for
quadratics) for data integrals.  Dirichlet conditions are applied by
symmetric elimination, keeping the reduced operator SPD.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import Mesh, GeometryError


class PointLocationError(ValueError):
    """Raised when a query point lies outside the mesh."""


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ScalarField:
    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (self.mesh.n_nodes,):
            raise ValueError("scalar field size does not match mesh")
        if not np.isfinite(coeffs).all():
            raise ValueError("non-finite scalar field values")


@dataclass(frozen=True)
class VecField:
    """Vector field with node-major coefficients (x0, y0, x1, y1, ...)."""
    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (2 * self.mesh.n_nodes,):
            raise ValueError("vector field size does not match mesh")
        if not np.isfinite(coeffs).all():
            raise ValueError("non-finite vector field values")

    @property
    def xy(self) -> np.ndarray:
        return self.coeffs.reshape(-1, 2)

    @staticmethod
    def from_xy(mesh: Mesh, values: np.ndarray) -> "VecField":
        return VecField(mesh, np.asarray(values, dtype=float).reshape(-1))


@dataclass
class SparseSymSystem:
    """Symmetric sparse operator with right-hand side and Dirichlet rows."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_nodes: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.dirichlet_nodes = np.asarray(self.dirichlet_nodes, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        if self.dirichlet_values.size == 0 and self.dirichlet_nodes.size > 0:
            self.dirichlet_values = np.zeros(self.dirichlet_nodes.size)

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.matrix.shape[0], dtype=bool)
        mask[self.dirichlet_nodes] = False
        return np.flatnonzero(mask)

    def symmetry_defect(self) -> float:
        d = self.matrix - self.matrix.T
        denom = max(abs(self.matrix).max(), 1e-300)
        return float(abs(d).max() / denom)


def element_geometry(mesh: Mesh):
    """Per-element areas (M,) and barycentric gradients (M, 3, 2)."""
    p = mesh.nodes[mesh.triangles]  # (M, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if (det <= 0).any():
        raise GeometryError("degenerate or inverted element in assembly")
    grads = np.empty((len(mesh.triangles), 3, 2))
    # grad(lambda_k) = rot90(edge opposite k) / (2A)
    for k in range(3):
        a = p[:, (k + 1) % 3]
        b = p[:, (k + 2) % 3]
        grads[:, k, 0] = a[:, 1] - b[:, 1]
        grads[:, k, 1] = b[:, 0] - a[:, 0]
    grads /= det[:, None, None]
    return 0.5 * det, grads


def assemble_operator(mesh: Mesh, diffusion_weight=1.0,
                      mass_coeff: float = 0.0) -> sp.csr_matrix:
    """Sum_K  w_K grad(phi_i).grad(phi_j) + mass_coeff phi_i phi_j  over K.

    diffusion_weight may be a scalar, a per-element array (M,), or a
    per-element symmetric tensor array (M, 2, 2).
    """
    if mass_coeff < 0:
        raise ValueError("mass coefficient must be nonnegative")
    areas, grads = element_geometry(mesh)
    m = len(mesh.triangles)
    w = np.asarray(diffusion_weight, dtype=float)
    if not np.isfinite(w).all():
        raise ValueError("non-finite diffusion weight")
    if w.ndim == 0:
        wg = w * grads
    elif w.shape == (m,):
        wg = w[:, None, None] * grads
    elif w.shape == (m, 2, 2):
        wg = np.einsum("mab,mkb->mka", w, grads)
    else:
        raise ValueError(f"bad diffusion weight shape {w.shape}")
    local = np.einsum("mia,mja,m->mij", grads, wg, areas)
    if mass_coeff:
        mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = local + mass_coeff * areas[:, None, None] * mass
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return (matrix + matrix.T) * 0.5


def edge_midpoints(mesh: Mesh) -> np.ndarray:
    """Edge midpoints per element (M, 3, 2); midpoint e is opposite vertex e."""
    p = mesh.nodes[mesh.triangles]
    out = np.empty_like(p)
    for e in range(3):
        out[:, e] = 0.5 * (p[:, (e + 1) % 3] + p[:, (e + 2) % 3])
    return out


def field_at_midpoints(field: ScalarField) -> np.ndarray:
    """Values of a P1 field at the edge midpoints, (M, 3)."""
    c = field.coeffs[field.mesh.triangles]
    out = np.empty_like(c)
    for e in range(3):
        out[:, e] = 0.5 * (c[:, (e + 1) % 3] + c[:, (e + 2) % 3])
    return out


def assemble_load_from_values(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Load vector from integrand values at the edge midpoints (M, 3).

    The edge-midpoint rule gives b_i = sum_K A_K/3 sum_m values[K, m] * phi_i(m)
    with phi_i(m) = 1/2 at the two midpoints adjacent to vertex i.
    """
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        raise ValueError("non-finite load integrand")
    areas = mesh.areas
    b = np.zeros(mesh.n_nodes)
    for i in range(3):
        contrib = areas / 6.0 * (values[:, (i + 1) % 3] + values[:, (i + 2) % 3])
        np.add.at(b, mesh.triangles[:, i], contrib)
    return b


def assemble_load(mesh: Mesh, f: Callable) -> np.ndarray:
    """Load vector of f against the nodal basis, edge-midpoint quadrature."""
    mids = edge_midpoints(mesh)
    vals = np.asarray(f(mids.reshape(-1, 2)), dtype=float).reshape(-1, 3)
    return assemble_load_from_values(mesh, vals)


def _barycentric(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of x in every triangle, (M, 3)."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = x[None, :] - p[:, 0]
    lam = np.empty((len(p), 3))
    lam[:, 1] = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    lam[:, 2] = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    lam[:, 0] = 1.0 - lam[:, 1] - lam[:, 2]
    return lam


def locate_point(mesh: Mesh, x) -> tuple[int, np.ndarray]:
    """Containing triangle and barycentric weights; lowest index wins ties."""
    x = np.asarray(x, dtype=float)
    exact = np.flatnonzero((mesh.nodes == x).all(axis=1))
    if exact.size:
        node = int(exact[0])
        tris = np.flatnonzero((mesh.triangles == node).any(axis=1))
        k = int(tris[0])
        lam = (mesh.triangles[k] == node).astype(float)
        return k, lam
    lam = _barycentric(mesh, x)
    tol = 1e-12 * (1.0 + mesh.h_max)
    inside = np.flatnonzero(lam.min(axis=1) >= -tol)
    if inside.size == 0:
        raise PointLocationError(f"point {x.tolist()} outside mesh")
    k = int(inside[0])
    w = np.clip(lam[k], 0.0, None)
    return k, w / w.sum()


def point_source_vector(mesh: Mesh, y, scale: float) -> np.ndarray:
    """Dirac load at y tested against the basis: b_i = scale * phi_i(y)."""
    k, lam = locate_point(mesh, y)
    b = np.zeros(mesh.n_nodes)
    b[mesh.triangles[k]] = scale * lam
    return b


def eval_field(field: ScalarField, x) -> float:
    k, lam = locate_point(field.mesh, x)
    return float(field.coeffs[field.mesh.triangles[k]] @ lam)


def element_gradients(field: ScalarField) -> np.ndarray:
    """Constant P1 gradient per element, (M, 2)."""
    _, grads = element_geometry(field.mesh)
    c = field.coeffs[field.mesh.triangles]
    return np.einsum("mk,mka->ma", c, grads)


def grad_on_element(field: ScalarField, k: int) -> np.ndarray:
    _, grads = element_geometry(field.mesh)
    return field.coeffs[field.mesh.triangles[k]] @ grads[k]


def _eliminate(system: SparseSymSystem):
    free = system.free_nodes
    a_ff = system.matrix[free][:, free].tocsr()
    b = system.rhs[free]
    if system.dirichlet_nodes.size:
        a_fd = system.matrix[free][:, system.dirichlet_nodes]
        b = b - a_fd @ system.dirichlet_values
    return free, a_ff, b


def _compose(system: SparseSymSystem, free: np.ndarray,
             x_free: np.ndarray) -> np.ndarray:
    x = np.zeros(system.matrix.shape[0])
    x[free] = x_free
    x[system.dirichlet_nodes] = system.dirichlet_values
    return x


def solve_spd(system: SparseSymSystem, tol: float = 1e-10) -> np.ndarray:
    """Conjugate gradients with diagonal preconditioning.

    Solves the Dirichlet-eliminated system to a relative residual <= tol on
    the free nodes; iteration cap 20*sqrt(n_free).
    """
    free, a, b = _eliminate(system)
    n = len(free)
    if n == 0:
        return _compose(system, free, np.empty(0))
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return _compose(system, free, np.zeros(n))
    diag = a.diagonal()
    if (diag <= 0).any():
        raise SolverError("operator not positive definite on free nodes",
                          np.inf)
    x = np.zeros(n)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    cap = max(int(20 * np.sqrt(n)), 50)
    for _ in range(cap):
        ap = a @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * bnorm:
            return _compose(system, free, x)
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError("conjugate gradients did not converge",
                      float(np.linalg.norm(r) / bnorm))


class FactorizedSystem:
    """Sparse LU of the eliminated operator, for repeated right-hand sides."""

    def __init__(self, system: SparseSymSystem):
        self.system = system
        self.free, a_ff, _ = _eliminate(system)
        self._lu = splu(a_ff.tocsc()) if len(self.free) else None
        if system.dirichlet_nodes.size and len(self.free):
            self._shift = (system.matrix[self.free][:, system.dirichlet_nodes]
                           @ system.dirichlet_values)
        else:
            self._shift = 0.0

    def solve(self, rhs: np.ndarray,
              dirichlet_values: Optional[np.ndarray] = None) -> np.ndarray:
        sys = self.system
        values = (sys.dirichlet_values if dirichlet_values is None
                  else np.asarray(dirichlet_values, dtype=float))
        if dirichlet_values is None:
            shift = self._shift
        elif sys.dirichlet_nodes.size and len(self.free):
            shift = sys.matrix[self.free][:, sys.dirichlet_nodes] @ values
        else:
            shift = 0.0
        x = np.zeros(sys.matrix.shape[0])
        if len(self.free):
            x[self.free] = self._lu.solve(rhs[self.free] - shift)
        x[sys.dirichlet_nodes] = values
        return x
