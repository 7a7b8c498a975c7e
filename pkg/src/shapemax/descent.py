"""Descent loops: the epsilon-steepest-descent iteration for the max cost
and the plain gradient iteration for the integral cost.

Each iteration solves the state, evaluates both costs, builds the descent
direction, and steps the mesh by (id + t g) with the interior following the
harmonic extension of the boundary displacement.  Backtracking mode shrinks
t until the deformed mesh is valid and the driving cost decreases; constant
mode applies a fixed step and only rejects invalid meshes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import bundle as bundle_mod
from . import derivatives, geometry, pde, problems
from .derivatives import Metric, tracking_cost
from .fem import VecField
from .geometry import Mesh


class ConfigError(ValueError):
    """Raised for invalid run configuration values."""


@dataclass(frozen=True)
class RunConfig:
    problem: str = "sine_tracking"
    law: str = "constant"
    cost: str = "linfty"               # linfty | l2
    metric: str = "sobolev"            # sobolev | euclidean
    mesh_kind: str = "disk"            # disk | square
    disk_center: tuple = (0.5, 0.5)
    disk_radius: float = math.sqrt(6.0)
    n_boundary: int = 400
    target_nodes: int = 5500
    square_n: int = 16
    n_extra_active: int = 40           # bundle size beyond the argmax set
    gamma: float = 1e-6                # sufficient-decrease ratio
    t0: Optional[float] = None         # None -> 0.5 * h_max of initial mesh
    step_mode: str = "backtracking"    # backtracking | constant
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    max_iters: int = 2000
    snapshot_every: int = 0
    output_dir: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.problem not in problems.PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.law not in problems.LAWS:
            raise ConfigError(f"unknown law {self.law!r}")
        if self.cost not in ("linfty", "l2"):
            raise ConfigError(f"cost must be linfty or l2, got {self.cost!r}")
        if self.metric not in ("sobolev", "euclidean"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.mesh_kind not in ("disk", "square"):
            raise ConfigError(f"unknown mesh kind {self.mesh_kind!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.t0 is not None and self.t0 <= 0:
            raise ConfigError(f"t0 must be positive, got {self.t0}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ConfigError("backtrack factor must lie in (0, 1)")
        if self.step_mode not in ("backtracking", "constant"):
            raise ConfigError(f"unknown step mode {self.step_mode!r}")
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ConfigError("iteration counts must be positive")
        if self.n_extra_active < 0:
            raise ConfigError("n_extra_active must be nonnegative")
        return self


@dataclass(frozen=True)
class IterationRecord:
    n: int
    J_inf: float
    J_2: float
    n_active: int
    epsilon: float
    step: float
    psi: float
    wall_ms: float


@dataclass
class RunHistory:
    records: list = field(default_factory=list)
    termination: str = "max_iters"
    final_mesh: Optional[Mesh] = None
    final_J_inf: float = math.nan
    final_J_2: float = math.nan

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def initial_mesh(config: RunConfig) -> Mesh:
    if config.mesh_kind == "square":
        return geometry.make_square_mesh(config.square_n)
    area = math.pi * config.disk_radius ** 2
    target_h = math.sqrt(area / max(config.target_nodes, 16))
    return geometry.make_disk_mesh(config.disk_center, config.disk_radius,
                                   config.n_boundary, target_h)


def _snapshot(config: RunConfig, n: int, mesh: Mesh, active, state) -> None:
    if not config.output_dir or config.snapshot_every <= 0:
        return
    if n % config.snapshot_every != 0:
        return
    from . import output
    output.write_shape(mesh, active,
                       f"{config.output_dir}/shape_{n:04d}.csv")
    output.write_vtk(mesh, {"state": state.u.coeffs},
                     f"{config.output_dir}/shape_{n:04d}.vtk")


def _descend(config: RunConfig,
             direction_fn: Callable,
             driving_cost: str) -> RunHistory:
    """Shared loop for both costs.

    direction_fn(mesh, state, spec, law, problem) returns
    (g or None, psi, n_active, epsilon, active) with g a unit field in the
    configured metric; driving_cost selects which cost the line search must
    decrease.
    """
    config.validate()
    problem = problems.get_problem(config.problem)
    law = problems.get_law(config.law)
    spec = tracking_cost(problem.u_d, problem.grad_u_d)
    mesh = initial_mesh(config)
    t0 = config.t0 if config.t0 is not None else 0.5 * mesh.h_max

    history = RunHistory()
    state = pde.solve_state(mesh, problem.f, law)

    def costs(m, s):
        j_inf, _ = derivatives.cost_linfty(m, s.u, spec)
        return j_inf, derivatives.cost_l2(m, s.u, spec)

    first_decrease = None
    for n in range(config.max_iters):
        tic = time.perf_counter()
        j_inf, j_2 = costs(mesh, state)
        driving = j_inf if driving_cost == "linfty" else j_2

        g, psi, n_active, epsilon, active = direction_fn(mesh, state, spec,
                                                         law, problem)
        if g is None:
            history.records.append(IterationRecord(
                n, j_inf, j_2, n_active, epsilon, 0.0, psi,
                1e3 * (time.perf_counter() - tic)))
            history.termination = "stationary"
            break

        displacement = geometry.laplace_extension(
            mesh, g.xy[mesh.boundary_nodes])

        accepted = None
        t = t0
        if config.step_mode == "constant":
            candidate = geometry.apply_displacement(mesh, displacement, t)
            if isinstance(candidate, geometry.MeshQualityReport):
                history.records.append(IterationRecord(
                    n, j_inf, j_2, n_active, epsilon, 0.0, psi,
                    1e3 * (time.perf_counter() - tic)))
                history.termination = "mesh_invalid"
                break
            trial_state = pde.solve_state(candidate, problem.f, law)
            accepted = (candidate, trial_state,
                        costs(candidate, trial_state))
        else:
            for _ in range(config.max_backtracks):
                candidate = geometry.apply_displacement(mesh, displacement, t)
                if isinstance(candidate, geometry.MeshQualityReport):
                    t *= config.backtrack_factor
                    continue
                trial_state = pde.solve_state(candidate, problem.f, law)
                trial_costs = costs(candidate, trial_state)
                trial = trial_costs[0 if driving_cost == "linfty" else 1]
                if trial < driving:
                    accepted = (candidate, trial_state, trial_costs)
                    break
                t *= config.backtrack_factor
            if accepted is None:
                history.records.append(IterationRecord(
                    n, j_inf, j_2, n_active, epsilon, 0.0, psi,
                    1e3 * (time.perf_counter() - tic)))
                history.termination = "line_search_failed"
                break

        mesh, state, new_costs = accepted
        history.records.append(IterationRecord(
            n, j_inf, j_2, n_active, epsilon, t, psi,
            1e3 * (time.perf_counter() - tic)))
        _snapshot(config, n, mesh, active, state)

        if config.step_mode == "backtracking":
            decrease = driving - new_costs[0 if driving_cost == "linfty"
                                           else 1]
            if first_decrease is None:
                first_decrease = decrease
            elif decrease < config.gamma * first_decrease:
                history.termination = "no_sufficient_decrease"
                break
    history.final_mesh = mesh
    history.final_J_inf, history.final_J_2 = costs(mesh, state)
    return history


def run_linfty(config: RunConfig) -> RunHistory:
    """Epsilon-steepest descent on the max cost."""

    def direction(mesh, state, spec, law, problem):
        metric = Metric(config.metric, mesh)
        active = bundle_mod.select_active(mesh, state.u, spec,
                                          config.n_extra_active)
        grads = bundle_mod.build_bundle(mesh, state.u, active, metric, spec,
                                        law, problem.f, grad_f=problem.grad_f)
        direction = bundle_mod.steepest_direction(grads)
        return (direction.g, direction.psi, len(active), active.epsilon,
                active)

    return _descend(replace(config, cost="linfty"), direction, "linfty")


def run_l2(config: RunConfig) -> RunHistory:
    """Normalized gradient descent on the integral cost."""

    def direction(mesh, state, spec, law, problem):
        metric = Metric(config.metric, mesh)
        p_hat = pde.solve_adjoint_l2(mesh, state.u, problem.u_d, law)
        dj = derivatives.assemble_dJ2(mesh, state.u, p_hat, problem.f, spec,
                                      grad_f=problem.grad_f)
        grad = metric.gradient(dj)
        norm = metric.norm(grad)
        if norm <= 1e-8 * (1.0 + norm):
            return None, 0.0, 1, 0.0, None
        g = VecField(mesh, -grad.coeffs / norm)
        return g, -norm, 1, 0.0, None

    return _descend(replace(config, cost="l2"), direction, "l2")
