"""Variational solver for the discrete trace-embedding constant.

Minimizes ``J(u) = int G(|grad u|) + G(|u|)`` over P1 fields with unit
boundary modular and prescribed vanishing constraints (boundary window,
interior hole or explicit vertex clamps).  The descent direction is the
negative gradient projected onto the tangent space of the constraint,
optionally preconditioned by the linear stiffness-plus-mass operator; every
accepted step is followed by exact re-normalization of the boundary modular,
so iterates stay on the constraint manifold and the objective decreases
monotonically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DegenerateMultiplierError,
    InfeasibleConstraintError,
    MeshError,
    NormalizationError,
)
from .mesh import BoundarySubset, InteriorSubset
from .modular import (
    EDGE_POINTS,
    EDGE_WEIGHTS,
    TRI_POINTS,
    TRI_WEIGHTS,
    ScalarField,
    bulk_modular,
    gradient_modular,
    normalize_trace,
    trace_modular,
)

__all__ = [
    "VanishingConstraint",
    "SolverConfig",
    "TraceSolve",
    "objective",
    "objective_gradient",
    "constraint_gradient",
    "solve",
    "kkt_report",
]


class VanishingConstraint:
    """Vertex degrees of freedom forced to zero during a solve.

    * ``window``: all endpoints of the selected boundary edges vanish.
    * ``hole``: all vertices of the selected triangles and of every triangle
      sharing a vertex with them vanish (one-ring closure, the discrete
      stand-in for vanishing on a neighborhood of the hole).
    * ``dofs``: an explicit vertex set (used by capacity-style experiments).
    * ``none``: no constraint.
    """

    def __init__(self, kind, subset, zero_dofs):
        self.kind = kind
        self.subset = subset
        self.zero_dofs = np.asarray(sorted(set(int(i) for i in zero_dofs)),
                                    dtype=np.int64)

    @classmethod
    def none(cls):
        return cls("none", None, np.empty(0, dtype=np.int64))

    @classmethod
    def window(cls, mesh, subset):
        if not isinstance(subset, BoundarySubset):
            raise MeshError("window constraint needs a BoundarySubset")
        edges = mesh.boundary_edges[list(subset.edge_indices)]
        return cls("window", subset, edges.ravel())

    @classmethod
    def hole(cls, mesh, subset):
        if not isinstance(subset, InteriorSubset):
            raise MeshError("hole constraint needs an InteriorSubset")
        sel = list(subset.triangle_indices)
        core = np.unique(mesh.triangles[sel])
        touches = np.isin(mesh.triangles, core).any(axis=1)
        ring = np.unique(mesh.triangles[touches])
        return cls("hole", subset, np.union1d(core, ring))

    @classmethod
    def dofs(cls, mesh, vertex_indices):
        return cls("dofs", None, vertex_indices)

    def free_mask(self, mesh):
        mask = np.ones(len(mesh.vertices), dtype=bool)
        mask[self.zero_dofs] = False
        return mask


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the projected descent; all fields have working defaults."""

    eps_reg: float = 1e-8          # regularization scale, multiplied by mesh diameter
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_iters: int = 500
    tol_rel: float = 1e-10
    seed: int = 0
    precondition: bool = True
    stall_window: int = 10

    def __post_init__(self):
        if not (self.eps_reg > 0 and self.step0 > 0 and self.armijo_shrink > 0
                and self.max_iters > 0 and self.tol_rel > 0):
            raise ValueError("solver parameters must be positive")
        if not 0 < self.armijo_c <= 0.5:
            raise ValueError("armijo_c must lie in (0, 0.5]")


@dataclass(frozen=True)
class TraceSolve:
    """Result of one constrained minimization."""

    extremal: ScalarField
    S_value: float
    multiplier: float
    kkt_residual: float
    iterations: int
    converged: bool
    constraint: VanishingConstraint
    config: SolverConfig
    j_history: tuple = field(repr=False, default=())

    @property
    def achieved_measure(self):
        return self.constraint.subset.achieved_measure if self.constraint.subset else 0.0


def objective(G, u):
    """Shape objective ``int G(|grad u|) + G(|u|)`` of a field."""
    return gradient_modular(G, u) + bulk_modular(G, u)


def objective_gradient(G, u, eps_reg, zero_dofs=()):
    """Nodal gradient covector of the objective with a smoothed kernel.

    The singular quotients ``g(q)/q`` and ``g(|u|)/|u|`` are evaluated at
    ``sqrt(. ** 2 + eps_reg ** 2)``, and entries at constrained vertices are
    forced to zero.
    """
    mesh = u.mesh
    out = np.zeros(len(mesh.vertices))
    grads = u.triangle_gradients()
    q_eps = np.sqrt(grads[:, 0] ** 2 + grads[:, 1] ** 2 + eps_reg ** 2)
    coef = mesh.tri_areas * G.derivative(q_eps) / q_eps
    flux = np.einsum("tj,tij->ti", grads, mesh.shape_gradients)
    np.add.at(out, mesh.triangles.ravel(), (coef[:, None] * flux).ravel())

    uq = u.quad_values()
    u_eps = np.sqrt(uq ** 2 + eps_reg ** 2)
    dens = G.derivative(u_eps) / u_eps * uq
    weighted = mesh.tri_areas[:, None] * (dens * TRI_WEIGHTS[None, :])
    contrib = weighted @ TRI_POINTS
    np.add.at(out, mesh.triangles.ravel(), contrib.ravel())

    out[np.asarray(zero_dofs, dtype=np.int64)] = 0.0
    return out


def constraint_gradient(H, u, eps_reg, zero_dofs=()):
    """Nodal gradient covector of the boundary modular (same smoothing)."""
    mesh = u.mesh
    out = np.zeros(len(mesh.vertices))
    uq = u.edge_quad_values()
    u_eps = np.sqrt(uq ** 2 + eps_reg ** 2)
    dens = H.derivative(u_eps) / u_eps * uq
    weighted = mesh.edge_lengths[:, None] * (dens * EDGE_WEIGHTS[None, :])
    shapes = np.stack([1.0 - EDGE_POINTS, EDGE_POINTS])
    contrib = weighted @ shapes.T
    np.add.at(out, mesh.boundary_edges.ravel(), contrib.ravel())
    out[np.asarray(zero_dofs, dtype=np.int64)] = 0.0
    return out


def assemble_h1_matrix(mesh, zero_dofs=()):
    """Sparse stiffness-plus-consistent-mass matrix with clamped rows/columns."""
    n = len(mesh.vertices)
    tri = mesh.triangles
    grads = mesh.shape_gradients
    areas = mesh.tri_areas
    k_local = np.einsum("tia,tja->tij", grads, grads) * areas[:, None, None]
    m_local = (np.ones((3, 3)) + np.eye(3))[None, :, :] * (areas / 12.0)[:, None, None]
    local = k_local + m_local
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    zero_dofs = np.asarray(zero_dofs, dtype=np.int64)
    if len(zero_dofs):
        mask = np.ones(n, dtype=bool)
        mask[zero_dofs] = False
        diag = sp.diags(mask.astype(float))
        mat = diag @ mat @ diag + sp.diags((~mask).astype(float))
    return mat.tocsc()


def _has_free_boundary_edge(mesh, constraint):
    free = constraint.free_mask(mesh)
    edges = mesh.boundary_edges
    return bool(np.any(free[edges[:, 0]] & free[edges[:, 1]]))


def _initial_field(mesh, constraint, config):
    rng = np.random.default_rng(config.seed)
    vals = np.ones(len(mesh.vertices))
    vals += 1e-6 * rng.standard_normal(len(mesh.vertices))
    vals[constraint.zero_dofs] = 0.0
    return ScalarField(mesh, vals)


def solve(G, H, mesh, constraint=None, config=None, initial=None):
    """Minimize the objective over the unit-boundary-modular manifold.

    Returns a :class:`TraceSolve`; the ``converged`` flag reports whether the
    relative objective decrease stalled below ``config.tol_rel`` over
    ``config.stall_window`` iterations (line-search failure before that point
    leaves the flag unset).  The final extremal is replaced by its absolute
    value and re-normalized, which never changes the admissible class.
    """
    constraint = constraint or VanishingConstraint.none()
    config = config or SolverConfig()
    if not _has_free_boundary_edge(mesh, constraint):
        raise InfeasibleConstraintError(
            "constraint clamps every boundary edge; admissible class is empty")
    eps = config.eps_reg * max(mesh.diameter, 1e-30)
    zdofs = constraint.zero_dofs

    if initial is not None:
        vals = initial.values.copy()
        vals[zdofs] = 0.0
        u = normalize_trace(H, ScalarField(mesh, vals))
    else:
        u = normalize_trace(H, _initial_field(mesh, constraint, config))

    lu = None
    if config.precondition:
        lu = spla.splu(assemble_h1_matrix(mesh, zdofs))

    def project(vec):
        if lu is None:
            return vec
        out = lu.solve(vec)
        out[zdofs] = 0.0
        return out

    j_cur = objective(G, u)
    history = [j_cur]
    converged = False
    iterations = 0
    for it in range(config.max_iters):
        iterations = it + 1
        grad = objective_gradient(G, u, eps, zdofs)
        b = constraint_gradient(H, u, eps, zdofs)
        pg = project(grad)
        pb = project(b)
        denom = float(b @ pb)
        if denom <= 0.0:
            break
        mu_hat = float(grad @ pb) / denom
        direction = -(pg - mu_hat * pb)
        slope = float(grad @ direction)
        if not np.isfinite(slope) or slope >= 0.0:
            converged = True
            break
        sigma = config.step0
        accepted = False
        while sigma > 1e-14:
            try:
                trial = normalize_trace(H, ScalarField(mesh, u.values + sigma * direction))
            except NormalizationError:
                sigma *= config.armijo_shrink
                continue
            j_trial = objective(G, trial)
            if j_trial <= j_cur + config.armijo_c * sigma * slope:
                u, j_cur = trial, j_trial
                accepted = True
                break
            sigma *= config.armijo_shrink
        if not accepted:
            # Stalled line search at a first-order stationary point is success;
            # failing with a substantial descent slope is not.
            converged = abs(slope) <= 1e-8 * max(j_cur, 1e-300)
            break
        history.append(j_cur)
        w = config.stall_window
        if len(history) > w:
            drop = history[-w - 1] - history[-1]
            if drop < config.tol_rel * max(abs(history[-1]), 1e-300):
                converged = True
                break

    final = normalize_trace(H, abs(u))
    s_value = objective(G, final)
    try:
        multiplier, residual = _kkt(G, H, final, eps, zdofs)
    except DegenerateMultiplierError:
        multiplier, residual = float("nan"), float("nan")
    return TraceSolve(final, s_value, multiplier, residual, iterations, converged,
                      constraint, config, tuple(history))


def _kkt(G, H, u, eps, zdofs):
    r = objective_gradient(G, u, eps, zdofs)
    b = constraint_gradient(H, u, eps, zdofs)
    bb = float(b @ b)
    if bb <= 1e-300:
        raise DegenerateMultiplierError("boundary constraint gradient is numerically zero")
    mu = float(r @ b) / bb
    norm_r = float(np.linalg.norm(r))
    if norm_r == 0.0:
        return mu, 0.0
    residual = float(np.linalg.norm(r - mu * b)) / norm_r
    return mu, residual


def kkt_report(G, H, solve_result):
    """Least-squares multiplier and relative stationarity residual of a solve."""
    config = solve_result.config
    u = solve_result.extremal
    eps = config.eps_reg * max(u.mesh.diameter, 1e-30)
    return _kkt(G, H, u, eps, solve_result.constraint.zero_dofs)


def shape_digest(subset):
    """Stable hex digest of a subset's element indices (for shape histories)."""
    if isinstance(subset, BoundarySubset):
        payload = b"W" + np.asarray(subset.edge_indices, dtype=np.int64).tobytes()
    elif isinstance(subset, InteriorSubset):
        payload = b"A" + np.asarray(subset.triangle_indices, dtype=np.int64).tobytes()
    else:
        payload = b"-"
    return hashlib.sha256(payload).hexdigest()[:16]
