"""Staggered finite-difference calculus on the warped torus.

Scalars sit on the nodes ``r_i``; radial vector components sit on the half
nodes ``r_{i+1/2}``.  Half-node metric values are edge averages of the
squared profiles, and the weighted Laplacian is ``div_w o grad`` with the
edge weight ``mean(rho phi e^-f)``.  That makes it symmetric with respect to
the nodal measure ``rho phi e^-f`` and conservative to rounding.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .geometry import WarpedTorus


def half_rho2(g: WarpedTorus) -> np.ndarray:
    return kernels.edge_mean(g.rho**2)


def half_phi2(g: WarpedTorus) -> np.ndarray:
    return kernels.edge_mean(g.phi**2)


def half_rho(g: WarpedTorus) -> np.ndarray:
    return np.sqrt(half_rho2(g))


def half_phi(g: WarpedTorus) -> np.ndarray:
    return np.sqrt(half_phi2(g))


def density_weight(g: WarpedTorus, f) -> np.ndarray:
    """Nodal ``rho phi e^-f``: the measure per unit ``dr dtheta``."""
    return g.rho * g.phi * np.exp(-np.asarray(f, dtype=float))


def to_nodes(e: np.ndarray) -> np.ndarray:
    return kernels.node_mean(np.ascontiguousarray(e, dtype=float))


def gradient(g: WarpedTorus, u: np.ndarray) -> np.ndarray:
    """Coordinate component ``u' / rho^2`` of ``grad u`` at half nodes."""
    return kernels.edge_diff(np.ascontiguousarray(u, dtype=float), g.h) / half_rho2(g)


def weighted_divergence(g: WarpedTorus, f, xi_r: np.ndarray) -> np.ndarray:
    """``div xi - <xi, grad f>`` for a radial field given at half nodes."""
    w = density_weight(g, f)
    flux = kernels.edge_mean(w) * xi_r
    return kernels.node_diff(flux, g.h) / w


def divergence(g: WarpedTorus, xi_r: np.ndarray) -> np.ndarray:
    return weighted_divergence(g, np.zeros(g.N), xi_r)


def laplacian(g: WarpedTorus, f, u: np.ndarray) -> np.ndarray:
    """Weighted Laplacian ``div_w grad u``; pass ``f = 0`` for Laplace-Beltrami."""
    w = density_weight(g, np.broadcast_to(f, (g.N,)))
    coef = kernels.edge_mean(w) / half_rho2(g)
    return kernels.flux_laplacian(np.ascontiguousarray(u, dtype=float), coef, w, g.h)


def edge_conductance(g: WarpedTorus, f=0.0) -> np.ndarray:
    """``2 pi mean(rho phi e^-f) / (h mean(rho^2))``: edge weight of ``int |grad u|^2 dw``."""
    w = density_weight(g, np.broadcast_to(f, (g.N,)))
    return 2.0 * math.pi * kernels.edge_mean(w) / (half_rho2(g) * g.h)


def node_mass(g: WarpedTorus, f=0.0) -> np.ndarray:
    return g.quadrature.weights * np.exp(-np.broadcast_to(np.asarray(f, dtype=float), (g.N,)))


def lie_frame(g: WarpedTorus, xi_r: np.ndarray) -> np.ndarray:
    """Frame components ``(rr, tt)`` of ``L_xi g`` at nodes; shape ``(N, 2)``."""
    rho2, phi2 = g.rho**2, g.phi**2
    xi_node = kernels.node_mean(xi_r)
    rr = (2.0 * rho2 * kernels.node_diff(xi_r, g.h) + xi_node * kernels.central_diff(rho2, g.h)) / rho2
    tt = xi_node * kernels.central_diff(phi2, g.h) / phi2
    return np.stack([rr, tt], axis=1)


def hessian_frame(g: WarpedTorus, u: np.ndarray) -> np.ndarray:
    """Frame components of ``Hess u = L_{grad u} g / 2``; shape ``(N, 2)``."""
    return 0.5 * lie_frame(g, gradient(g, u))


def gauss_curvature(g: WarpedTorus) -> np.ndarray:
    """``K = -(1/(rho phi)) d/dr (phi' / rho)`` with a compact stencil."""
    return kernels.gauss_curvature(np.ascontiguousarray(g.rho), np.ascontiguousarray(g.phi), g.h)


def kappa(g: WarpedTorus) -> np.ndarray:
    """Geodesic curvature ``phi' / (rho phi)`` of the circles ``r = const``."""
    return kernels.central_diff(np.ascontiguousarray(g.phi), g.h) / (g.rho * g.phi)


def radial_derivative(g: WarpedTorus, u: np.ndarray) -> np.ndarray:
    """Unit-speed radial derivative ``u' / rho`` at nodes."""
    return kernels.central_diff(np.ascontiguousarray(u, dtype=float), g.h) / g.rho


def half_norm2(g: WarpedTorus, xi) -> np.ndarray:
    """``|xi|^2`` at half nodes."""
    return half_rho2(g) * xi.data**2 + half_phi2(g) * xi.twist**2


def log_mean_gradient_norm2(g: WarpedTorus, f: np.ndarray) -> np.ndarray:
    """Nodal ``|grad f|^2`` whose ``dw``-integral equals ``int (Lap f) dw`` exactly.

    Each edge carries ``c (f_j - f_i)(e^-f_i - e^-f_j)``, the discrete
    counterpart of ``|f'|^2 e^-f``; half of it is assigned to each endpoint.
    """
    f = np.ascontiguousarray(f, dtype=float)
    c = kernels.edge_mean(g.rho * g.phi) / half_rho2(g)
    ef = np.exp(-f)
    edge = c * kernels.edge_diff(f, 1.0) * (-kernels.edge_diff(ef, 1.0)) / g.h**2
    return kernels.node_mean(edge) / (g.rho * g.phi * ef)
