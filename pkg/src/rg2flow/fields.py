"""Class-specific representations of scalar, vector and symmetric 2-tensor fields.

Scalar fields are arrays of shape ``(npts,)``: one value for the frame
classes (fields are spatially constant there) and one value per node on the
warped torus.

Symmetric 2-tensors are stored by their diagonal components in the
orthonormal frame, shape ``(npts, n)``.  Every tensor the package builds is
diagonal in that frame.

Vector fields on the frame classes are constant combinations of a fixed
basis (the Milnor frame ``e_i`` or a ``g0``-orthonormal frame); on the warped
torus they are ``xi^r(r) d/dr + twist d/dtheta`` with the coordinate
component ``xi^r`` sampled at half nodes ``r_{i+1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RepresentationError
from .geometry import ConstantCurvature, Geometry, Homogeneous3, WarpedTorus


def as_scalar_field(g: Geometry, u, name: str = "field") -> np.ndarray:
    """Validate ``u`` against the class representation and return ``(npts,)``."""
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full(g.npts, float(arr))
    arr = arr.reshape(-1)
    if arr.size != g.npts:
        raise RepresentationError(
            f"{name} has {arr.size} samples, {type(g).__name__} expects {g.npts}"
        )
    if not np.all(np.isfinite(arr)):
        raise RepresentationError(f"{name} contains non-finite values")
    return arr.copy()


@dataclass(frozen=True, eq=False)
class SymmetricTensorField:
    data: np.ndarray

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, g: Geometry) -> "SymmetricTensorField":
        return cls(np.zeros((g.npts, g.dim)))

    @classmethod
    def multiple_of_metric(cls, g: Geometry, c) -> "SymmetricTensorField":
        c = np.broadcast_to(np.asarray(c, dtype=float), (g.npts,))
        return cls(np.repeat(c[:, None], g.dim, axis=1))

    def trace(self) -> np.ndarray:
        return self.data.sum(axis=1)

    def norm2(self) -> np.ndarray:
        return np.sum(self.data**2, axis=1)

    def dot(self, other: "SymmetricTensorField") -> np.ndarray:
        return np.sum(self.data * other.data, axis=1)

    def min_eigenvalue(self) -> float:
        return float(self.data.min())

    def coordinate(self, g: Geometry) -> np.ndarray:
        """Components in the class's fixed coordinate basis."""
        if isinstance(g, ConstantCurvature):
            return self.data * g.sigma
        if isinstance(g, Homogeneous3):
            return self.data * np.asarray(g.coeffs)[None, :]
        return self.data * np.stack([g.rho**2, g.phi**2], axis=1)

    def _coerce(self, other):
        if isinstance(other, SymmetricTensorField):
            return other.data
        arr = np.asarray(other, dtype=float)
        return arr[:, None] if arr.ndim == 1 else arr

    def __add__(self, other):
        return SymmetricTensorField(self.data + self._coerce(other))

    def __sub__(self, other):
        return SymmetricTensorField(self.data - self._coerce(other))

    def __mul__(self, other):
        return SymmetricTensorField(self.data * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SymmetricTensorField(-self.data)

    def __truediv__(self, other):
        return SymmetricTensorField(self.data / self._coerce(other))


@dataclass(frozen=True, eq=False)
class VectorField:
    data: np.ndarray
    twist: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float).reshape(-1).copy())
        object.__setattr__(self, "twist", float(self.twist))

    @classmethod
    def zeros(cls, g: Geometry) -> "VectorField":
        return cls(np.zeros(g.npts if isinstance(g, WarpedTorus) else g.dim))

    def check(self, g: Geometry) -> "VectorField":
        expected = g.N if isinstance(g, WarpedTorus) else g.dim
        if self.data.size != expected:
            raise RepresentationError(
                f"vector field has {self.data.size} components, {type(g).__name__} expects {expected}"
            )
        if self.twist != 0.0 and not isinstance(g, WarpedTorus):
            raise RepresentationError("a twist component exists only on the warped torus")
        return self

    def frame_components(self, g: Geometry) -> np.ndarray:
        """Orthonormal-frame components; on the torus the radial ones at half nodes."""
        self.check(g)
        if isinstance(g, ConstantCurvature):
            return self.data * np.sqrt(g.sigma)
        if isinstance(g, Homogeneous3):
            return self.data * np.sqrt(np.asarray(g.coeffs))
        from .warped_ops import half_rho

        return self.data * half_rho(g)

    def norm2(self, g: Geometry) -> np.ndarray:
        """``|xi|^2`` as a scalar field; torus values are averaged to nodes."""
        if isinstance(g, WarpedTorus):
            from .warped_ops import half_norm2, to_nodes

            return to_nodes(half_norm2(g, self))
        return np.array([float(np.sum(self.frame_components(g) ** 2))])

    def is_zero(self) -> bool:
        return not np.any(self.data) and self.twist == 0.0

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.data + other.data, self.twist + other.twist)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.data - other.data, self.twist - other.twist)

    def __mul__(self, s: float) -> "VectorField":
        return VectorField(self.data * s, self.twist * s)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DriftField:
    """``xi = grad psi + perp``; ``psi`` is ``None`` when only ``xi`` is known."""

    xi: VectorField
    psi: np.ndarray | None = None
    perp: VectorField | None = None

    @classmethod
    def zero(cls, g: Geometry) -> "DriftField":
        return cls(VectorField.zeros(g), np.zeros(g.npts), VectorField.zeros(g))

    @classmethod
    def from_parts(cls, g: Geometry, psi=0.0, perp: VectorField | None = None) -> "DriftField":
        psi = as_scalar_field(g, psi, "psi")
        perp = VectorField.zeros(g) if perp is None else perp.check(g)
        if isinstance(g, WarpedTorus):
            from .warped_ops import gradient

            xi = VectorField(gradient(g, psi) + perp.data, perp.twist)
        else:
            xi = perp
        return cls(xi, psi, perp)

    def is_zero(self) -> bool:
        return self.xi.is_zero()


def as_vector_field(g: Geometry, xi) -> VectorField:
    if isinstance(xi, DriftField):
        xi = xi.xi
    if not isinstance(xi, VectorField):
        raise RepresentationError(f"expected a vector or drift field, got {type(xi).__name__}")
    return xi.check(g)
