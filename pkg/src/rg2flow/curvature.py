"""Curvature objects and weighted differential operators for every class.

Sign conventions are fixed in :mod:`rg2flow.frames`: sectional curvature of
the round sphere is positive and ``Rm2_ij = R_iklm R_j^klm`` so that
``tr_g Rm2 = |Rm|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from . import warped_ops as wo
from .errors import InvalidCouplingError, RepresentationError
from .fields import (
    DriftField,
    SymmetricTensorField,
    VectorField,
    as_scalar_field,
    as_vector_field,
)
from .frames import FrameAlgebra, rough_laplacian, sectional_pairs
from .geometry import ConstantCurvature, Geometry, WarpedTorus, is_frame_class

__all__ = [
    "CurvaturePackage",
    "HarnackResult",
    "SymmetricTensorField",
    "bakry_emery_ricci",
    "curvature_package",
    "divdiv_riemann",
    "drift_modified_rm2",
    "lie_derivative_metric",
    "rm_norm_variation",
    "scalar_laplacian",
    "weighted_divergence",
    "weighted_laplacian_apply",
]


@dataclass(frozen=True, eq=False)
class CurvaturePackage:
    ric: SymmetricTensorField
    scalar: np.ndarray
    rm2: SymmetricTensorField
    rm_norm2: np.ndarray
    k_min: float
    k_max: float
    sectional: np.ndarray


def curvature_package(g: Geometry) -> CurvaturePackage:
    """Ricci, scalar curvature, ``Rm2``, ``|Rm|^2`` and the sectional range."""
    if isinstance(g, ConstantCurvature):
        n, c = g.n, g.sectional
        ric = SymmetricTensorField.multiple_of_metric(g, (n - 1) * c)
        rm2 = SymmetricTensorField.multiple_of_metric(g, 2.0 * (n - 1) * c * c)
        sec = np.full((1, n * (n - 1) // 2), c)
        return CurvaturePackage(
            ric, np.array([n * (n - 1) * c]), rm2, np.array([2.0 * n * (n - 1) * c * c]), c, c, sec
        )
    if is_frame_class(g):
        alg = FrameAlgebra(g)
        sec = sectional_pairs(alg.R)[None, :]
        return CurvaturePackage(
            SymmetricTensorField(np.diag(alg.ric)[None, :]),
            np.array([np.trace(alg.ric)]),
            SymmetricTensorField(np.diag(alg.rm2)[None, :]),
            np.array([float(np.sum(alg.R**2))]),
            float(sec.min()),
            float(sec.max()),
            sec,
        )
    K = wo.gauss_curvature(g)
    return CurvaturePackage(
        SymmetricTensorField.multiple_of_metric(g, K),
        2.0 * K,
        SymmetricTensorField.multiple_of_metric(g, 2.0 * K * K),
        4.0 * K * K,
        float(K.min()),
        float(K.max()),
        K[:, None],
    )


def hessian(g: Geometry, u) -> SymmetricTensorField:
    u = as_scalar_field(g, u, "u")
    if is_frame_class(g):
        return SymmetricTensorField.zeros(g)
    return SymmetricTensorField(wo.hessian_frame(g, u))


def bakry_emery_ricci(g: Geometry, f, curv: CurvaturePackage | None = None) -> SymmetricTensorField:
    """``Ric + Hess f`` in the class representation."""
    curv = curv or curvature_package(g)
    return curv.ric + hessian(g, f)


def weighted_laplacian_apply(g: Geometry, f, u) -> np.ndarray:
    """``Lap u - <grad f, grad u>``."""
    f = as_scalar_field(g, f, "f")
    u = as_scalar_field(g, u, "u")
    if is_frame_class(g):
        return np.zeros(g.npts)
    return wo.laplacian(g, f, u)


def scalar_laplacian(g: Geometry, u) -> np.ndarray:
    return weighted_laplacian_apply(g, 0.0, u)


def weighted_divergence(g: Geometry, f, xi) -> np.ndarray:
    """``div xi - <xi, grad f>``; the twist and frame-class Killing fields are free."""
    f = as_scalar_field(g, f, "f")
    v = as_vector_field(g, xi)
    if is_frame_class(g):
        return np.zeros(g.npts)
    return wo.weighted_divergence(g, f, v.data)


def unweighted_divergence(g: Geometry, xi) -> np.ndarray:
    return weighted_divergence(g, 0.0, xi)


def lie_derivative_metric(g: Geometry, xi) -> SymmetricTensorField:
    """``L_xi g``; zero for the Killing fields that represent frame-class drifts."""
    v = as_vector_field(g, xi)
    if is_frame_class(g):
        return SymmetricTensorField.zeros(g)
    return SymmetricTensorField(wo.lie_frame(g, v.data))


def drift_modified_rm2(
    g: Geometry, xi, alpha: float, curv: CurvaturePackage | None = None
) -> SymmetricTensorField:
    """``alpha * Rm2(g, xi) = alpha * Rm2(g) - 2 L_xi g``."""
    if not alpha > 0:
        raise InvalidCouplingError(f"coupling must be positive, got {alpha}")
    curv = curv or curvature_package(g)
    return alpha * curv.rm2 - 2.0 * lie_derivative_metric(g, xi)


@dataclass(frozen=True, eq=False)
class HarnackResult:
    """Both sides of the div-div identity and their difference."""

    lhs: SymmetricTensorField
    rhs: SymmetricTensorField

    @property
    def residual(self) -> SymmetricTensorField:
        return self.lhs - self.rhs

    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual.data)))


def divdiv_riemann(g: Geometry, f) -> HarnackResult:
    """Evaluate ``div_w div_w Rm`` and the Bakry-Emery expression it equals.

    The right side is ``Lap_w Ric_BE - Ric_BE.Ric_BE + Rm(Ric_BE) - L_X g / 2``
    with ``X = grad(R_Per) / 2``.
    """
    f = as_scalar_field(g, f, "f")
    if is_frame_class(g):
        if np.ptp(f) != 0:
            raise RepresentationError("density exponent must be constant on frame classes")
        alg = FrameAlgebra(g)
        lhs = alg.divdiv_riemann()
        rhs = (
            rough_laplacian(alg.ric, alg.gamma)
            - alg.ric @ alg.ric
            + np.einsum("ijkl,il->jk", alg.R, alg.ric)
        )
        return HarnackResult(
            SymmetricTensorField(np.diag(lhs)[None, :]),
            SymmetricTensorField(np.diag(rhs)[None, :]),
        )
    K = wo.gauss_curvature(g)
    kap = wo.kappa(g)
    hess_f = wo.hessian_frame(g, f)
    hess_F = wo.hessian_frame(g, np.exp(-f) * K)
    ef = np.exp(f)
    lhs = np.stack([ef * hess_F[:, 1], ef * hess_F[:, 0]], axis=1)
    A = K + hess_f[:, 0]
    B = K + hess_f[:, 1]
    r_per = 2.0 * K + 2.0 * wo.laplacian(g, 0.0, f) - wo.log_mean_gradient_norm2(g, f)
    hess_r = wo.hessian_frame(g, r_per)
    mix = 2.0 * kap**2 * (A - B)
    rhs_rr = wo.laplacian(g, f, A) - mix - A * A + K * B - 0.5 * hess_r[:, 0]
    rhs_tt = wo.laplacian(g, f, B) + mix - B * B + K * A - 0.5 * hess_r[:, 1]
    return HarnackResult(
        SymmetricTensorField(lhs), SymmetricTensorField(np.stack([rhs_rr, rhs_tt], axis=1))
    )


def rm_norm_variation(g: WarpedTorus, v: SymmetricTensorField) -> np.ndarray:
    """Pointwise first variation of ``|Rm|^2`` along ``dg/ds = v`` on the torus.

    ``-4 R_ijkl nabla^i nabla^l v^jk - 2 Rm2_jk v^jk``, which in two
    dimensions reads ``-4K (Lap tr v - div div v) - 4K^2 tr v``.
    """
    if not isinstance(g, WarpedTorus):
        raise RepresentationError("the variation formula is discretised on the warped torus")
    a, b = v.data[:, 0], v.data[:, 1]
    K = wo.gauss_curvature(g)
    rho_e = wo.half_rho(g)
    phi_e = kernels.edge_mean(g.phi)
    kap_e = kernels.edge_diff(g.phi, g.h) / (rho_e * phi_e)
    div_v = kernels.edge_diff(a, g.h) / rho_e + kap_e * kernels.edge_mean(a - b)
    divdiv = kernels.node_diff(phi_e * div_v, g.h) / (g.rho * g.phi)
    lap_tr = wo.laplacian(g, 0.0, a + b)
    return -4.0 * K * (lap_tr - divdiv) - 4.0 * K * K * (a + b)
