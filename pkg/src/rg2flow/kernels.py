"""Periodic-grid stencil kernels with an optional numba backend.

Scalars live on the nodes ``r_i = i*h`` and radial vector components live
on the half nodes ``r_{i+1/2}``; index ``i`` of an edge array refers to the
edge between node ``i`` and node ``i+1`` (mod N).

The numba path is used when numba imports cleanly and the environment
variable ``RG2FLOW_DISABLE_NUMBA`` is not set to a truthy value.  Both
paths are always importable as ``NUMPY_KERNELS`` and ``NUMBA_KERNELS`` so
that tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _disabled_by_env() -> bool:
    flag = os.environ.get("RG2FLOW_DISABLE_NUMBA", "").strip().lower()
    return flag in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# pure numpy implementations


def _np_edge_mean(x):
    return 0.5 * (x + np.roll(x, -1))


def _np_node_mean(e):
    return 0.5 * (np.roll(e, 1) + e)


def _np_edge_diff(x, h):
    return (np.roll(x, -1) - x) / h


def _np_node_diff(e, h):
    return (e - np.roll(e, 1)) / h


def _np_central_diff(x, h):
    return (np.roll(x, -1) - np.roll(x, 1)) / (2.0 * h)


def _np_flux_laplacian(u, edge_coef, node_weight, h):
    flux = edge_coef * (np.roll(u, -1) - u)
    return (flux - np.roll(flux, 1)) / (node_weight * h * h)


def _np_gauss_curvature(rho, phi, h):
    rho_e = 0.5 * (rho + np.roll(rho, -1))
    slope = (np.roll(phi, -1) - phi) / (h * rho_e)
    return -(slope - np.roll(slope, 1)) / (h * rho * phi)


def _np_density_rhs(u, rho, phi, xi_edge, h):
    rp = rho * phi
    coef = 0.5 * (rp + np.roll(rp, -1)) / (0.5 * (rho * rho + np.roll(rho * rho, -1)))
    v = u / rp
    flux = coef * (np.roll(v, -1) - v) / h + xi_edge * 0.5 * (u + np.roll(u, -1))
    return (flux - np.roll(flux, 1)) / h


# ---------------------------------------------------------------------------
# explicit loops, compiled with numba when available


def _lp_edge_mean(x):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        out[i] = 0.5 * (x[i] + x[j])
    return out


def _lp_node_mean(e):
    n = e.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = 0.5 * (e[i - 1] + e[i])
    return out


def _lp_edge_diff(x, h):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        out[i] = (x[j] - x[i]) / h
    return out


def _lp_node_diff(e, h):
    n = e.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = (e[i] - e[i - 1]) / h
    return out


def _lp_central_diff(x, h):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        out[i] = (x[j] - x[i - 1]) / (2.0 * h)
    return out


def _lp_flux_laplacian(u, edge_coef, node_weight, h):
    n = u.shape[0]
    flux = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        flux[i] = edge_coef[i] * (u[j] - u[i])
    out = np.empty(n)
    for i in range(n):
        out[i] = (flux[i] - flux[i - 1]) / (node_weight[i] * h * h)
    return out


def _lp_gauss_curvature(rho, phi, h):
    n = rho.shape[0]
    slope = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        slope[i] = (phi[j] - phi[i]) / (h * 0.5 * (rho[i] + rho[j]))
    out = np.empty(n)
    for i in range(n):
        out[i] = -(slope[i] - slope[i - 1]) / (h * rho[i] * phi[i])
    return out


def _lp_density_rhs(u, rho, phi, xi_edge, h):
    n = u.shape[0]
    flux = np.empty(n)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        rp_i = rho[i] * phi[i]
        rp_j = rho[j] * phi[j]
        coef = 0.5 * (rp_i + rp_j) / (0.5 * (rho[i] * rho[i] + rho[j] * rho[j]))
        flux[i] = coef * (u[j] / rp_j - u[i] / rp_i) / h + xi_edge[i] * 0.5 * (u[i] + u[j])
    out = np.empty(n)
    for i in range(n):
        out[i] = (flux[i] - flux[i - 1]) / h
    return out


_NAMES = (
    "edge_mean",
    "node_mean",
    "edge_diff",
    "node_diff",
    "central_diff",
    "flux_laplacian",
    "gauss_curvature",
    "density_rhs",
)

NUMPY_KERNELS = SimpleNamespace(**{name: globals()[f"_np_{name}"] for name in _NAMES})

if njit is not None:
    NUMBA_KERNELS = SimpleNamespace(
        **{name: njit(cache=True)(globals()[f"_lp_{name}"]) for name in _NAMES}
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None

NUMBA_ENABLED = NUMBA_KERNELS is not None and not _disabled_by_env()
ACTIVE = NUMBA_KERNELS if NUMBA_ENABLED else NUMPY_KERNELS

edge_mean = ACTIVE.edge_mean
node_mean = ACTIVE.node_mean
edge_diff = ACTIVE.edge_diff
node_diff = ACTIVE.node_diff
central_diff = ACTIVE.central_diff
flux_laplacian = ACTIVE.flux_laplacian
gauss_curvature = ACTIVE.gauss_curvature
density_rhs = ACTIVE.density_rhs
