"""Near-active sets, gradient bundles, and min-norm descent directions.

The steepest descent direction for a max-type cost is the negative
normalization of the projection of the origin onto the convex hull of the
shape gradients of the near-active points.  The projection weights solve a
simplex-constrained quadratic program on the Gram matrix of the bundle; it
is computed with Wolfe's minimum-norm-point algorithm, which alternates
affine minimization over a corral with vertex insertion and deletion.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import derivatives, fem, pde
from .derivatives import CostSpec, Metric
from .fem import ScalarField, VecField
from .geometry import DIRICHLET, Mesh


class MinNormError(RuntimeError):
    def __init__(self, message: str, weights: np.ndarray, kkt_residual: float):
        super().__init__(f"{message} (KKT residual {kkt_residual:.3e})")
        self.weights = weights
        self.kkt_residual = kkt_residual


@dataclass(frozen=True)
class ActiveSet:
    """Nodes whose pointwise cost is within epsilon of the maximum.

    nodes are sorted by nondecreasing gap = J_max - psi(node); n_argmax
    counts the exact maximizers (gap zero), which are always members.
    """
    nodes: np.ndarray
    gaps: np.ndarray
    epsilon: float
    n_argmax: int

    def __post_init__(self):
        if (np.diff(self.gaps) < 0).any():
            raise ValueError("active-set gaps must be sorted nondecreasing")
        if self.gaps.size and self.gaps[-1] > self.epsilon:
            raise ValueError("active-set member beyond realized epsilon")

    def __len__(self) -> int:
        return len(self.nodes)


def select_active(mesh: Mesh, u: ScalarField, spec: CostSpec,
                  n_extra: int) -> ActiveSet:
    """Pick the argmax nodes plus up to n_extra nearest-gap nodes.

    The realized epsilon is the (n_argmax + n_extra)-th smallest gap; ties at
    that threshold are all included, so the bound may be exceeded by ties
    only.
    """
    if n_extra < 0:
        raise ValueError("n_extra must be nonnegative")
    vals = derivatives.nodal_cost_values(u, spec)
    gaps = vals.max() - vals
    order = np.argsort(gaps, kind="stable")
    sorted_gaps = gaps[order]
    n_argmax = int((sorted_gaps == 0.0).sum())
    cut = min(n_argmax + n_extra, len(order)) - 1
    epsilon = float(sorted_gaps[cut])
    n_members = int(np.searchsorted(sorted_gaps, epsilon, side="right"))
    members = order[:n_members]
    return ActiveSet(nodes=members, gaps=sorted_gaps[:n_members],
                     epsilon=epsilon, n_argmax=n_argmax)


@dataclass(frozen=True)
class GradientBundle:
    """Shape gradients of the active points with their Gram matrix."""
    active: ActiveSet
    gradients: list
    gram: np.ndarray
    metric_tag: str
    adjoint_solves: int

    def __len__(self) -> int:
        return len(self.gradients)

    def gram_defect(self) -> float:
        """Most negative Gram eigenvalue relative to the trace."""
        w = np.linalg.eigvalsh(self.gram)
        return float(w.min() / max(np.trace(self.gram), 1e-300))


def build_bundle(mesh: Mesh, u: ScalarField, active: ActiveSet,
                 metric: Metric, spec: CostSpec, law: pde.DiffusionLaw,
                 f: Callable, grad_f: Optional[Callable] = None,
                 ) -> GradientBundle:
    """Solve adjoints and assemble one shape gradient per active node.

    Dirichlet boundary members skip the adjoint solve: their adjoint state
    vanishes identically and the derivative reduces to the point term.
    """
    if len(active) == 0:
        raise ValueError("empty active set")
    solver = None
    adjoint_solves = 0
    gradients = []
    for node in active.nodes:
        node = int(node)
        try:
            if mesh.node_marker[node] == DIRICHLET:
                p_y = None
            else:
                if solver is None:
                    solver = fem.FactorizedSystem(
                        pde.adjoint_system(mesh, u, law))
                psi_u = float(spec.psi_z(mesh.nodes[node], u.coeffs[node]))
                p_y = pde.solve_adjoint_point(mesh, u, mesh.nodes[node], law,
                                              psi_u, solver=solver)
                adjoint_solves += 1
            dj = derivatives.assemble_dj(mesh, u, p_y, mesh.nodes[node], f,
                                         spec, law, grad_f=grad_f,
                                         y_node=node)
            gradients.append(metric.gradient(dj))
        except (RuntimeError, ValueError) as exc:
            raise RuntimeError(
                f"bundle member at node {node} "
                f"{mesh.nodes[node].tolist()} failed: {exc}") from exc
    coeffs = np.column_stack([g.coeffs for g in gradients])
    gram = coeffs.T @ metric.apply(coeffs)
    gram = 0.5 * (gram + gram.T)
    return GradientBundle(active=active, gradients=gradients, gram=gram,
                          metric_tag=metric.tag, adjoint_solves=adjoint_solves)


@dataclass(frozen=True)
class QPResult:
    """Solution of the simplex-constrained Gram quadratic program."""
    weights: np.ndarray
    value: float            # metric norm of the min-norm point
    kkt_residual: float
    g_hat: Optional[VecField] = None


def _affine_minimum(q_s: np.ndarray) -> np.ndarray:
    """Weights of the norm minimizer over the affine hull of a corral."""
    k = q_s.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = q_s
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def min_norm_point(gram: np.ndarray, kkt_tol: float = 1e-9,
                   max_iter: Optional[int] = None) -> QPResult:
    """Projection of the origin onto the convex hull, in Gram coordinates.

    Minimizes a^T Q a over the unit simplex (Wolfe's algorithm).  All
    geometry is expressed through Q: the current point is x = sum a_k p_k,
    |x|^2 = a^T Q a and (x, p_j) = (Q a)_j.  Ties break to the lowest index.
    """
    gram = np.asarray(gram, dtype=float)
    n = gram.shape[0]
    if gram.shape != (n, n) or n == 0:
        raise ValueError("Gram matrix must be square and nonempty")
    if max_iter is None:
        max_iter = 50 * n

    alpha = np.zeros(n)
    alpha[int(np.argmin(np.diag(gram)))] = 1.0
    corral = [int(np.argmin(np.diag(gram)))]

    def kkt_residual(a):
        qa = gram @ a
        val = float(a @ qa)
        active = a > 0
        comp = float(np.abs(qa[active] - val).max()) if active.any() else 0.0
        return max(0.0, val - float(qa.min()), comp)

    last_val = np.inf
    stalled = 0
    for _ in range(max_iter):
        qa = gram @ alpha
        val = float(alpha @ qa)
        j = int(np.argmin(qa))
        # stop on KKT optimality, or when rounding prevents further progress
        stalled = stalled + 1 if val >= last_val - 1e-17 * (1.0 + val) else 0
        last_val = min(last_val, val)
        if qa[j] >= val - kkt_tol or stalled > 3:
            return QPResult(weights=alpha,
                            value=float(np.sqrt(max(val, 0.0))),
                            kkt_residual=kkt_residual(alpha))
        if j not in corral:
            corral.append(j)
        # minor cycle: affine-minimize over the corral, walking back and
        # dropping vertices until the minimizer has no negative weight
        for _ in range(2 * n + 2):
            idx = np.array(corral)
            v = _affine_minimum(gram[np.ix_(idx, idx)])
            if (v > 1e-14).all():
                alpha = np.zeros(n)
                alpha[idx] = v
                break
            a_s = alpha[idx]
            shrink = a_s - v
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(v <= 1e-14, a_s / np.where(
                    shrink > 0, shrink, np.inf), np.inf)
            theta = min(1.0, float(ratios.min()))
            a_new = (1.0 - theta) * a_s + theta * v
            a_new[a_new < 1e-14] = 0.0
            alpha = np.zeros(n)
            alpha[idx] = a_new
            corral = [int(i) for i in idx[a_new > 0.0]]
            if not corral:
                corral = [int(idx[int(np.argmin(np.abs(shrink)))])]
                alpha[corral[0]] = 1.0
        total = alpha.sum()
        if total <= 0:
            raise MinNormError("corral collapsed", alpha, np.inf)
        alpha = alpha / total
    raise MinNormError("iteration cap exceeded", alpha, kkt_residual(alpha))


@dataclass(frozen=True)
class DescentDirection:
    g: Optional[VecField]
    psi: float
    stationary: bool
    qp: QPResult


def steepest_direction(bundle: GradientBundle,
                       stat_tol: Optional[float] = None) -> DescentDirection:
    """Unit steepest-descent direction from the bundle, or stationarity.

    The direction is -g_hat/|g_hat| for the min-norm point g_hat of the
    bundle hull; psi = max_k (X_k, g) = -|g_hat|.  When |g_hat| falls below
    stat_tol the origin lies in the hull and the iterate is stationary.
    """
    if len(bundle) == 0:
        raise ValueError("empty bundle")
    qp = min_norm_point(bundle.gram)
    coeffs = np.column_stack([g.coeffs for g in bundle.gradients])
    g_hat = VecField(bundle.gradients[0].mesh, coeffs @ qp.weights)
    qp = QPResult(qp.weights, qp.value, qp.kkt_residual, g_hat=g_hat)
    if stat_tol is None:
        norm0 = float(np.sqrt(max(bundle.gram[0, 0], 0.0)))
        stat_tol = 1e-8 * (1.0 + norm0)
    if qp.value <= stat_tol:
        return DescentDirection(g=None, psi=0.0, stationary=True, qp=qp)
    g = VecField(g_hat.mesh, -g_hat.coeffs / qp.value)
    return DescentDirection(g=g, psi=-qp.value, stationary=False, qp=qp)
