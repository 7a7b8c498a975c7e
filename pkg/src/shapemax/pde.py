"""State and adjoint solves for the tracking problem.

The state equation is  -div(beta(|grad u|^2) grad u) + u = f  with zero
Dirichlet data on the marked boundary.  The linear case (beta constant) is a
single solve; otherwise a frozen-coefficient Picard iteration is used.
Adjoints solve the linearized operator, whose gradient block carries the
rank-one beta' correction, with either a point load or a distributed load.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import fem
from .fem import FactorizedSystem, ScalarField, SparseSymSystem
from .geometry import Mesh


class PicardError(RuntimeError):
    def __init__(self, message: str, increments):
        super().__init__(message)
        self.increments = list(increments)


@dataclass(frozen=True)
class DiffusionLaw:
    """Scalar diffusion coefficient beta acting on |grad u|^2.

    lo/hi bound beta; k_bound is an upper bound for the linearized
    coefficient beta(s) + 2 s beta'(s).  linear marks beta == lo constant.
    """
    name: str
    beta: Callable[[np.ndarray], np.ndarray]
    beta_prime: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    k_bound: float
    linear: bool = False

    def check(self, s_samples=None, pairs=200, rng_seed=0) -> None:
        """Sampled validation of the monotonicity and ellipticity bounds."""
        if s_samples is None:
            s_samples = np.geomspace(1e-8, 1e4, 200)
        s = np.asarray(s_samples)
        bs = np.asarray(self.beta(s), dtype=float)
        if not ((self.lo - 1e-12 <= bs).all() and (bs <= self.hi + 1e-12).all()):
            raise ValueError(f"law {self.name}: beta leaves [{self.lo}, {self.hi}]")
        if (np.diff(bs) < -1e-12).any():
            raise ValueError(f"law {self.name}: beta not nondecreasing")
        rng = np.random.default_rng(rng_seed)
        p = rng.normal(size=(pairs, 2)) * rng.uniform(0.1, 10, (pairs, 1))
        eta = rng.normal(size=(pairs, 2))
        s2 = (p ** 2).sum(axis=1)
        quad = (self.beta(s2) * (eta ** 2).sum(axis=1)
                + 2.0 * self.beta_prime(s2) * (p * eta).sum(axis=1) ** 2)
        eta2 = (eta ** 2).sum(axis=1)
        if (quad < self.lo * eta2 * (1 - 1e-10) - 1e-12).any():
            raise ValueError(f"law {self.name}: lower ellipticity bound fails")
        if (quad > self.k_bound * eta2 * (1 + 1e-10) + 1e-12).any():
            raise ValueError(f"law {self.name}: upper bound {self.k_bound} fails")


def constant_law(value: float = 1.0) -> DiffusionLaw:
    return DiffusionLaw(
        name="constant",
        beta=lambda s: np.full_like(np.asarray(s, dtype=float), value),
        beta_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        lo=value, hi=value, k_bound=value, linear=True)


def saturating_law() -> DiffusionLaw:
    """beta(s) = 1 + s/(1+s): bounded in [1, 2], monotone, K-bound 2.5."""
    return DiffusionLaw(
        name="saturating",
        beta=lambda s: 1.0 + s / (1.0 + s),
        beta_prime=lambda s: 1.0 / (1.0 + s) ** 2,
        lo=1.0, hi=2.0, k_bound=2.5, linear=False)


@dataclass(frozen=True)
class StateSolution:
    u: ScalarField
    picard_iterations: int
    final_increment: float


def _state_matrix(mesh: Mesh, u_coeffs: np.ndarray, law: DiffusionLaw):
    if law.linear:
        return fem.assemble_operator(mesh, law.lo, mass_coeff=1.0)
    grads = fem.element_gradients(ScalarField(mesh, u_coeffs))
    weights = law.beta((grads ** 2).sum(axis=1))
    return fem.assemble_operator(mesh, weights, mass_coeff=1.0)


def solve_state(mesh: Mesh, f: Callable, law: DiffusionLaw,
                tol: float = 1e-10, max_picard: int = 100,
                method: str = "direct") -> StateSolution:
    """Solve the state equation on the marked Dirichlet boundary.

    Nonlinear laws iterate frozen-coefficient linear solves until both the
    relative H1 increment and the nonlinear residual drop below tol.
    """
    if mesh.dirichlet_nodes.size == 0:
        raise ValueError("state equation needs a nonempty Dirichlet boundary")
    b = fem.assemble_load(mesh, f)

    def linear_solve(matrix):
        system = SparseSymSystem(matrix, b, mesh.dirichlet_nodes)
        if method == "pcg":
            return fem.solve_spd(system, tol=min(tol, 1e-10))
        return FactorizedSystem(system).solve(b)

    if law.linear:
        u = linear_solve(_state_matrix(mesh, None, law))
        return StateSolution(ScalarField(mesh, u), 1, 0.0)

    h1 = fem.assemble_operator(mesh, 1.0, mass_coeff=1.0)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[mesh.dirichlet_nodes] = False
    bnorm = max(np.linalg.norm(b[free]), 1e-300)
    u = np.zeros(mesh.n_nodes)
    increments = []
    for k in range(max_picard):
        matrix = _state_matrix(mesh, u, law)
        u_new = linear_solve(matrix)
        diff = u_new - u
        inc = np.sqrt(max(diff @ (h1 @ diff), 0.0))
        scale = max(np.sqrt(max(u_new @ (h1 @ u_new), 0.0)), 1e-300)
        increments.append(inc / scale)
        u = u_new
        residual = np.linalg.norm(
            (_state_matrix(mesh, u, law) @ u - b)[free]) / bnorm
        if increments[-1] <= tol and residual <= tol:
            return StateSolution(ScalarField(mesh, u), k + 1, increments[-1])
    raise PicardError(
        f"Picard iteration did not converge in {max_picard} steps", increments)


def linearized_weight(u: ScalarField, law: DiffusionLaw) -> np.ndarray:
    """Per-element tensor beta(s) I + 2 beta'(s) grad(u) x grad(u)."""
    grads = fem.element_gradients(u)
    s = (grads ** 2).sum(axis=1)
    eye = np.eye(2)[None, :, :]
    outer = grads[:, :, None] * grads[:, None, :]
    return law.beta(s)[:, None, None] * eye \
        + 2.0 * law.beta_prime(s)[:, None, None] * outer


def adjoint_system(mesh: Mesh, u: ScalarField,
                   law: DiffusionLaw) -> SparseSymSystem:
    """Linearized-operator system with zero rhs and zero Dirichlet data."""
    if law.linear:
        matrix = fem.assemble_operator(mesh, law.lo, mass_coeff=1.0)
    else:
        matrix = fem.assemble_operator(mesh, linearized_weight(u, law),
                                       mass_coeff=1.0)
    return SparseSymSystem(matrix, np.zeros(mesh.n_nodes),
                           mesh.dirichlet_nodes)


def solve_adjoint_point(mesh: Mesh, u: ScalarField, y, law: DiffusionLaw,
                        psi_u: float,
                        solver: Optional[FactorizedSystem] = None,
                        ) -> ScalarField:
    """Adjoint with point load -psi_u * delta_y and zero Dirichlet data."""
    b = fem.point_source_vector(mesh, y, -psi_u)
    if solver is None:
        solver = FactorizedSystem(adjoint_system(mesh, u, law))
    return ScalarField(mesh, solver.solve(b))


def solve_adjoint_l2(mesh: Mesh, u: ScalarField, u_d: Callable,
                     law: DiffusionLaw,
                     solver: Optional[FactorizedSystem] = None,
                     ) -> ScalarField:
    """Adjoint with distributed load -2(u_h - u_d), same quadrature as loads."""
    mids = fem.edge_midpoints(mesh).reshape(-1, 2)
    vals = -2.0 * (fem.field_at_midpoints(u)
                   - np.asarray(u_d(mids), dtype=float).reshape(-1, 3))
    b = fem.assemble_load_from_values(mesh, vals)
    if solver is None:
        solver = FactorizedSystem(adjoint_system(mesh, u, law))
    return ScalarField(mesh, solver.solve(b))
