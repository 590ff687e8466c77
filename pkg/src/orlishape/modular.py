"""Nodal P1 fields and quadrature of bulk, gradient and trace modulars.

The bulk modular integrates ``G(|u_h|)`` with a symmetric order-4 triangle
rule, the gradient modular uses the elementwise-constant P1 gradient, and
the trace modular uses 3-point Gauss quadrature along boundary edges.  All
reductions run in fixed array order, so results are reproducible bit for
bit on identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError, NormalizationError

__all__ = [
    "ScalarField",
    "ModularReport",
    "bulk_modular",
    "gradient_modular",
    "trace_modular",
    "luxemburg_norm",
    "normalize_trace",
    "modular_report",
    "save_field",
    "load_field",
]

# order-4 symmetric triangle rule (6 points) in barycentric coordinates
_TRI_A = 0.816847572980459
_TRI_B = 0.091576213509771
_TRI_C = 0.108103018168070
_TRI_D = 0.445948490915965
TRI_POINTS = np.array([
    [_TRI_A, _TRI_B, _TRI_B],
    [_TRI_B, _TRI_A, _TRI_B],
    [_TRI_B, _TRI_B, _TRI_A],
    [_TRI_C, _TRI_D, _TRI_D],
    [_TRI_D, _TRI_C, _TRI_D],
    [_TRI_D, _TRI_D, _TRI_C],
])
TRI_WEIGHTS = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)

# 3-point Gauss-Legendre on [0, 1]
_G3 = 0.5 * np.sqrt(3.0 / 5.0)
EDGE_POINTS = np.array([0.5 - _G3, 0.5, 0.5 + _G3])
EDGE_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class ScalarField:
    """Nodal values of a continuous piecewise-linear function on a mesh."""

    def __init__(self, mesh, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (len(mesh.vertices),):
            raise MeshError("field length must equal the vertex count")
        if not np.all(np.isfinite(values)):
            raise MeshError("field values must be finite")
        self.mesh = mesh
        self.values = values

    @classmethod
    def constant(cls, mesh, c):
        return cls(mesh, np.full(len(mesh.vertices), float(c)))

    @classmethod
    def from_function(cls, mesh, fn):
        return cls(mesh, np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]),
                                    dtype=float))

    def scaled(self, factor):
        return ScalarField(self.mesh, self.values * float(factor))

    def __abs__(self):
        return ScalarField(self.mesh, np.abs(self.values))

    def triangle_gradients(self):
        """Per-triangle constant gradient of the interpolant, shape (T, 2)."""
        vals = self.values[self.mesh.triangles]
        return np.einsum("ti,tij->tj", vals, self.mesh.shape_gradients)

    def quad_values(self):
        """Field values at the order-4 triangle quadrature points, shape (T, 6)."""
        return self.values[self.mesh.triangles] @ TRI_POINTS.T

    def edge_quad_values(self):
        """Field values at the boundary-edge Gauss points, shape (E, 3)."""
        ends = self.values[self.mesh.boundary_edges]
        shapes = np.stack([1.0 - EDGE_POINTS, EDGE_POINTS])
        return ends @ shapes


@dataclass(frozen=True)
class ModularReport:
    """The three modulars of a field plus the shape objective."""

    grad_modular: float
    bulk_modular: float
    trace_modular: float

    @property
    def objective(self):
        return self.grad_modular + self.bulk_modular


def bulk_modular(G, u):
    """Integral of ``G(|u_h|)`` over the mesh (order-4 triangle quadrature)."""
    gv = G.eval(np.abs(u.quad_values()))
    return float(np.sum(u.mesh.tri_areas * (gv @ TRI_WEIGHTS)))


def gradient_modular(G, u):
    """Integral of ``G(|grad u_h|)`` over the mesh (exact for P1 magnitudes)."""
    grads = u.triangle_gradients()
    q = np.hypot(grads[:, 0], grads[:, 1])
    return float(np.sum(u.mesh.tri_areas * G.eval(q)))


def trace_modular(H, u):
    """Integral of ``H(|u_h|)`` along the boundary (3-point Gauss per edge)."""
    hv = H.eval(np.abs(u.edge_quad_values()))
    return float(np.sum(u.mesh.edge_lengths * (hv @ EDGE_WEIGHTS)))


def modular_report(G, H, u):
    return ModularReport(gradient_modular(G, u), bulk_modular(G, u), trace_modular(H, u))


def luxemburg_norm(G, u, domain="bulk"):
    """``inf { lam > 0 : Phi(u / lam) <= 1 }`` by bisection (1e-10 relative).

    ``domain`` selects the bulk modular over the mesh or the trace modular
    over the boundary.  A zero field has norm 0.
    """
    if domain == "bulk":
        phi = lambda lam: bulk_modular(G, u.scaled(1.0 / lam))
        relevant = u.values
    elif domain == "trace":
        phi = lambda lam: trace_modular(G, u.scaled(1.0 / lam))
        relevant = u.values[u.mesh.vertex_on_boundary]
    else:
        raise ValueError("domain must be 'bulk' or 'trace'")
    if not np.any(relevant != 0.0):
        return 0.0
    hi = 1.0
    for _ in range(3000):
        if phi(hi) < 1.0:
            break
        hi *= 2.0
    else:
        raise NormalizationError("no upper bracket for the Luxemburg norm")
    lo = 1e-14 * hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-11 * hi:
            break
    return float(hi)


def normalize_trace(H, u):
    """Rescale ``u`` so its boundary modular equals one.

    ``t -> trace_modular(H, t*u)`` is continuous, strictly increasing, 0 at 0
    and unbounded, so the scaling factor is found by bracketing and bisection.
    Fields vanishing identically on the boundary cannot be normalized.
    """
    boundary_vals = u.values[u.mesh.vertex_on_boundary]
    if not np.any(boundary_vals != 0.0):
        raise NormalizationError("field vanishes on the whole boundary")
    phi = lambda t: trace_modular(H, u.scaled(t))
    lo, hi = 1.0, 1.0
    if phi(1.0) < 1.0:
        for _ in range(3000):
            hi *= 2.0
            if phi(hi) >= 1.0:
                break
        else:
            raise NormalizationError("trace modular cannot reach one")
        lo = hi / 2.0
    else:
        for _ in range(3000):
            lo /= 2.0
            if phi(lo) <= 1.0:
                break
        else:
            raise NormalizationError("trace modular cannot shrink to one")
        hi = lo * 2.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if phi(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    t_star = 0.5 * (lo + hi)
    return u.scaled(t_star)


# -- plain-text field files -----------------------------------------------------


def save_field(u, path):
    """One nodal value per line after a vertex-count header (17 digits)."""
    with open(path, "w") as fh:
        fh.write(f"{len(u.values)}\n")
        fh.write("\n".join(f"{v:.17g}" for v in u.values) + "\n")


def load_field(mesh, path):
    with open(path) as fh:
        count = int(fh.readline())
        values = np.array([float(fh.readline()) for _ in range(count)])
    return ScalarField(mesh, values)
