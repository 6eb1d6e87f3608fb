"""Measures with density: coupling, Helmholtz-Otto splitting and Fokker-Planck steps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from . import warped_ops as wo
from .errors import (
    LinearSolverError,
    PositivityError,
    RepresentationError,
    StepSizeError,
)
from .fields import DriftField, VectorField, as_scalar_field, as_vector_field
from .frames import FrameAlgebra
from .geometry import ConstantCurvature, Geometry, Homogeneous3, WarpedTorus, is_frame_class

__all__ = [
    "DensityData",
    "DriftField",
    "VectorField",
    "alpha_g",
    "check_frame_drift",
    "density_data",
    "fokker_planck_step",
    "fp_step_bound",
    "gauge_transform_measure",
    "helmholtz_otto",
    "total_mass",
]

KILLING_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DensityData:
    f: np.ndarray
    weights: np.ndarray
    alpha: float
    normalized: bool = False

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))


def total_mass(g: Geometry, f) -> float:
    """``int e^-f dmu``."""
    f = as_scalar_field(g, f, "f")
    return float(np.sum(g.quadrature.weights * np.exp(-f)))


def alpha_g(g: Geometry, f) -> float:
    """Coupling ``(int e^-f dmu)^(2/n)``."""
    return total_mass(g, f) ** (2.0 / g.dim)


def density_data(g: Geometry, f, normalized: bool = False) -> DensityData:
    f = as_scalar_field(g, f, "f")
    if is_frame_class(g) and np.ptp(f) != 0:
        raise RepresentationError("density exponent must be constant on frame classes")
    weights = g.quadrature.weights * np.exp(-f)
    alpha = float(np.sum(weights)) ** (2.0 / g.dim)
    if normalized:
        weights = weights / np.sum(weights)
    return DensityData(f, weights, alpha, normalized)


def check_frame_drift(g: Geometry, xi: VectorField) -> VectorField:
    """Frame classes carry only Killing drifts; reject anything else."""
    xi = as_vector_field(g, xi)
    if xi.is_zero():
        return xi
    if isinstance(g, ConstantCurvature):
        if g.K == 0 or (g.K > 0 and g.n % 2 == 1):
            return xi
        raise RepresentationError(
            "a constant-length Killing field needs an odd-dimensional sphere or a flat quotient"
        )
    if isinstance(g, Homogeneous3):
        alg = FrameAlgebra(g)
        u = xi.frame_components(g)
        scale = max(np.linalg.norm(u), 1.0) * max(np.abs(alg.C).max(), 1.0)
        if alg.killing_defect(u) > KILLING_TOL * scale:
            raise RepresentationError(
                "left-invariant drift is not Killing for these metric coefficients"
            )
    return xi


def _poisson_matrix(g: WarpedTorus, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness ``S`` with ``M Lap_w = -S`` and nodal masses ``m``."""
    c = wo.edge_conductance(g, f)
    N = g.N
    S = np.zeros((N, N))
    idx = np.arange(N)
    nxt = (idx + 1) % N
    np.add.at(S, (idx, idx), c)
    np.add.at(S, (nxt, nxt), c)
    np.add.at(S, (idx, nxt), -c)
    np.add.at(S, (nxt, idx), -c)
    return S, wo.node_mass(g, f)


def helmholtz_otto(g: Geometry, f, xi) -> DriftField:
    """Split ``xi = grad psi + perp`` with ``div_w perp = 0`` and ``int psi dw = 0``."""
    f = as_scalar_field(g, f, "f")
    v = as_vector_field(g, xi)
    if is_frame_class(g):
        check_frame_drift(g, v)
        return DriftField(v, np.zeros(g.npts), v)
    S, m = _poisson_matrix(g, f)
    rhs = m * wo.weighted_divergence(g, f, v.data)
    N = g.N
    A = np.zeros((N + 1, N + 1))
    A[:N, :N] = S
    A[:N, N] = m
    A[N, :N] = m
    b = np.concatenate([-rhs, [0.0]])
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise LinearSolverError(f"weighted Poisson solve failed: {exc}") from exc
    psi = sol[:N]
    residual = float(np.max(np.abs(S @ psi + rhs)))
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    if not np.isfinite(residual) or residual > 1e-8 * max(scale, 1.0):
        raise LinearSolverError(f"weighted Poisson residual {residual:.3e}")
    perp = VectorField(v.data - wo.gradient(g, psi), v.twist)
    return DriftField(v, psi, perp)


def gauge_transform_measure(g: Geometry, f, xi, alpha: float) -> np.ndarray:
    """Density exponent of ``(1 + alpha div_w xi) dw``."""
    f = as_scalar_field(g, f, "f")
    if is_frame_class(g):
        return f
    factor = 1.0 + alpha * wo.weighted_divergence(g, f, as_vector_field(g, xi).data)
    if np.any(factor <= 0):
        raise PositivityError("gauge factor is not positive")
    return f - np.log(factor)


def fp_step_bound(g: WarpedTorus, f: np.ndarray, xi_r: np.ndarray) -> float:
    """Largest admissible ``d_eta`` for the explicit density step.

    Diffusive limit ``h^2 / 4`` tightened by the cell Peclet number; the bound
    scales exactly like ``d_eta`` under ``g -> lam g``.
    """
    h_min = g.h * float(np.min(g.rho))
    grad_f = np.abs(kernels.edge_diff(np.ascontiguousarray(f), g.h)) / wo.half_rho(g)
    xi_norm = np.abs(xi_r) * wo.half_rho(g)
    peclet = h_min * max(float(grad_f.max()), float(xi_norm.max()))
    return 0.25 * h_min**2 / max(1.0, peclet)


def _density_rhs(g: WarpedTorus, u: np.ndarray, xi_r: np.ndarray) -> np.ndarray:
    return kernels.density_rhs(
        u, np.ascontiguousarray(g.rho), np.ascontiguousarray(g.phi), np.ascontiguousarray(xi_r), g.h
    )


def fp_rk4(
    u: np.ndarray,
    geoms: Sequence[WarpedTorus],
    xis: Sequence[np.ndarray],
    d_eta: float,
) -> np.ndarray:
    """One RK4 step of the conservative density equation.

    ``u = e^-f rho phi`` is the measure per unit ``dr dtheta``; ``geoms`` and
    ``xis`` hold the metric and radial drift at ``eta``, ``eta + d/2`` and
    ``eta + d``.
    """
    g0, gm, g1 = geoms
    x0, xm, x1 = xis
    k1 = _density_rhs(g0, u, x0)
    k2 = _density_rhs(gm, u + 0.5 * d_eta * k1, xm)
    k3 = _density_rhs(gm, u + 0.5 * d_eta * k2, xm)
    k4 = _density_rhs(g1, u + d_eta * k3, x1)
    return u + d_eta / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fokker_planck_step(
    g_eta: Geometry,
    f,
    xi,
    d_eta: float,
    g_next: Geometry | None = None,
    xi_next=None,
) -> np.ndarray:
    """Advance ``dw`` by ``d_eta`` under ``d/deta dw = Lap dw + div_w(xi) dw``.

    The metric moves linearly from ``g_eta`` to ``g_next`` (frozen when
    omitted) and likewise the drift.  Returns ``f`` relative to the metric at
    the end of the step.  Frame classes are exact: the measure is stationary
    because ``f`` is constant and the drift is Killing.
    """
    if not d_eta > 0:
        raise StepSizeError(f"step must be positive, got {d_eta}")
    g_next = g_eta if g_next is None else g_next
    f = as_scalar_field(g_eta, f, "f")
    v0 = as_vector_field(g_eta, xi)
    if is_frame_class(g_eta):
        check_frame_drift(g_eta, v0)
        mass = total_mass(g_eta, f)
        return np.array([math.log(g_next.quadrature.total / mass)])
    v1 = v0 if xi_next is None else as_vector_field(g_next, xi_next)
    bound = min(fp_step_bound(g_eta, f, v0.data), fp_step_bound(g_next, f, v1.data))
    if d_eta > bound * (1.0 + 1e-12):
        raise StepSizeError(f"d_eta={d_eta:.3e} exceeds the stability bound {bound:.3e}")
    gm = interpolate_warped(g_eta, g_next, 0.5)
    u = np.exp(-f) * g_eta.rho * g_eta.phi
    u_new = fp_rk4(u, (g_eta, gm, g_next), (v0.data, 0.5 * (v0.data + v1.data), v1.data), d_eta)
    return density_exponent(g_next, u_new)


def density_exponent(g: WarpedTorus, u: np.ndarray) -> np.ndarray:
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise PositivityError("measure density became non-positive")
    return -np.log(u / (g.rho * g.phi))


def interpolate_warped(g0: WarpedTorus, g1: WarpedTorus, s: float) -> WarpedTorus:
    """Linear interpolation of the squared profiles."""
    if g0 is g1 or s == 0.0:
        return g0
    if s == 1.0:
        return g1
    c = (1.0 - s) * g0.coefficients() + s * g1.coefficients()
    return g0.with_coefficients(c)

