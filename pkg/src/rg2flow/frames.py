"""Orthonormal-frame tensor algebra for the frame classes.

Conventions used throughout the package::

    R(X, Y) Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
    R_abce    = < R(E_a, E_b) E_c, E_e >
    K(a, b)   = R_abba            (round sphere positive)
    Ric_jk    = sum_i R_ijki
    Rm2_ij    = sum_klm R_iklm R_jklm

Tensors with constant frame components are plain numpy arrays indexed in an
orthonormal frame ``E_a``; ``gamma[a, b, c] = < nabla_{E_a} E_b, E_c >``.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import ConstantCurvature, Homogeneous3


def structure_tensor(g: Homogeneous3) -> np.ndarray:
    """``C[a, b, c] = <[E_a, E_b], E_c>`` in the frame ``E_i = e_i / sqrt(x_i)``."""
    x = np.asarray(g.coeffs)
    nu = np.asarray(g.structure) * x / math.sqrt(float(np.prod(x)))
    C = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        C[j, k, i] = nu[i]
        C[k, j, i] = -nu[i]
    return C


def levi_civita(C: np.ndarray) -> np.ndarray:
    """Connection coefficients from the Koszul formula."""
    return 0.5 * (
        C
        - np.transpose(C, (2, 0, 1))  # C[b, c, a] placed at [a, b, c]
        + np.transpose(C, (1, 2, 0))  # C[c, a, b] placed at [a, b, c]
    )


def riemann_from_frame(C: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return (
        np.einsum("bcd,ade->abce", gamma, gamma)
        - np.einsum("acd,bde->abce", gamma, gamma)
        - np.einsum("abd,dce->abce", C, gamma)
    )


def constant_curvature_riemann(n: int, c: float) -> np.ndarray:
    d = np.eye(n)
    return c * (np.einsum("il,jk->ijkl", d, d) - np.einsum("ik,jl->ijkl", d, d))


def ricci(R: np.ndarray) -> np.ndarray:
    return np.einsum("ijki->jk", R)


def rm_squared(R: np.ndarray) -> np.ndarray:
    return np.einsum("iklm,jklm->ij", R, R)


def sectional_pairs(R: np.ndarray) -> np.ndarray:
    """Sectional curvatures of the frame planes ``E_a ^ E_b`` with ``a < b``."""
    n = R.shape[0]
    return np.array([R[a, b, b, a] for a in range(n) for b in range(a + 1, n)])


def covariant_derivative(T: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``(nabla T)[a, i1, ..., ik]`` for a covariant tensor with constant components."""
    out = np.zeros(gamma.shape[:1] + T.shape)
    for s in range(T.ndim):
        moved = np.moveaxis(T, s, 0)
        term = np.tensordot(gamma, moved, axes=([2], [0]))
        out -= np.moveaxis(term, 1, s + 1)
    return out


def rough_laplacian(T: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    second = covariant_derivative(covariant_derivative(T, gamma), gamma)
    return np.trace(second, axis1=0, axis2=1)


class FrameAlgebra:
    """Curvature and connection data of a frame-class geometry."""

    def __init__(self, g):
        if isinstance(g, Homogeneous3):
            self.C = structure_tensor(g)
            self.gamma = levi_civita(self.C)
            self.R = riemann_from_frame(self.C, self.gamma)
        elif isinstance(g, ConstantCurvature):
            # curvature tensors of a space form are parallel, so a zero
            # connection gives the right covariant derivatives for them
            self.C = np.zeros((g.n,) * 3)
            self.gamma = np.zeros((g.n,) * 3)
            self.R = constant_curvature_riemann(g.n, g.sectional)
        else:
            raise TypeError(f"no frame algebra for {type(g).__name__}")
        self.n = self.R.shape[0]
        self.ric = ricci(self.R)
        self.rm2 = rm_squared(self.R)

    def killing_defect(self, u: np.ndarray) -> float:
        """Frame norm of ``L_X g`` for ``X = sum u_i E_i``."""
        nabla_x = covariant_derivative(np.asarray(u, dtype=float), self.gamma)
        return float(np.linalg.norm(nabla_x + nabla_x.T))

    def divdiv_riemann(self) -> np.ndarray:
        """``nabla^l nabla^i R_ijkl`` as a frame matrix."""
        d1 = covariant_derivative(self.R, self.gamma)
        s = np.einsum("iijkl->jkl", d1)
        d2 = covariant_derivative(s, self.gamma)
        return np.einsum("ljkl->jk", d2)
