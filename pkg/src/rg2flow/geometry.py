"""Symmetry-reduced metric classes, their quadrature and metric rescaling.

Three classes are supported:

``ConstantCurvature``
    ``g = sigma * g0`` where ``g0`` has constant sectional curvature ``K``.
    For ``K > 0`` the model is the round sphere of radius ``1/sqrt(K)``; for
    ``K <= 0`` it is a compact quotient whose ``g0``-volume is ``ref_volume``.
``Homogeneous3``
    Left-invariant metric ``a e1* ^2 + b e2* ^2 + c e3* ^2`` on a unimodular
    3-dimensional Lie group with ``[e2,e3] = l1 e1`` and cyclic permutations.
``WarpedTorus``
    ``rho(r)^2 dr^2 + phi(r)^2 dtheta^2`` on ``[0, L) x [0, 2 pi)`` sampled at
    ``r_i = i L / N``.

All geometry values are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Union

import numpy as np

from .errors import InvalidGeometryError, InvalidScaleError, ResolutionError

MIN_GRID_SIZE = 16


def sphere_volume(n: int) -> float:
    """Volume of the unit round n-sphere."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


@dataclass(frozen=True)
class QuadratureTable:
    """Per-node Riemannian volume weights and their total."""

    weights: np.ndarray
    total: float


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ConstantCurvature:
    n: int
    K: float
    sigma: float = 1.0
    ref_volume: float | None = None

    kind = "constant_curvature"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidGeometryError(f"dimension must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidGeometryError(f"scale sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.K):
            raise InvalidGeometryError("curvature K must be finite")
        if self.ref_volume is not None and not self.ref_volume > 0:
            raise InvalidGeometryError("ref_volume must be positive")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def npts(self) -> int:
        return 1

    @property
    def sectional(self) -> float:
        """Sectional curvature of ``g``."""
        return self.K / self.sigma

    @property
    def base_volume(self) -> float:
        """Volume of ``g0``."""
        if self.K > 0:
            return sphere_volume(self.n) * self.K ** (-self.n / 2.0)
        return 1.0 if self.ref_volume is None else float(self.ref_volume)

    @cached_property
    def quadrature(self) -> QuadratureTable:
        total = self.base_volume * self.sigma ** (self.n / 2.0)
        return QuadratureTable(_frozen([total]), total)

    def coefficients(self) -> np.ndarray:
        return np.array([[self.sigma]])

    def with_coefficients(self, coeffs) -> "ConstantCurvature":
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        return ConstantCurvature(self.n, self.K, float(coeffs[0]), self.ref_volume)

    def coefficient_names(self) -> list[str]:
        return ["sigma"]

    def coefficient_summary(self) -> list[float]:
        return [self.sigma]


@dataclass(frozen=True)
class Homogeneous3:
    structure: tuple[float, float, float]
    coeffs: tuple[float, float, float]
    ref_volume: float | None = None

    kind = "homogeneous3"

    def __post_init__(self):
        lam = tuple(float(x) for x in self.structure)
        abc = tuple(float(x) for x in self.coeffs)
        if len(lam) != 3 or len(abc) != 3:
            raise InvalidGeometryError("structure constants and coefficients need three entries")
        if not all(np.isfinite(lam)):
            raise InvalidGeometryError("structure constants must be finite")
        if not all(np.isfinite(x) and x > 0 for x in abc):
            raise InvalidGeometryError(f"metric coefficients must be positive, got {abc}")
        if self.ref_volume is not None and not self.ref_volume > 0:
            raise InvalidGeometryError("ref_volume must be positive")
        object.__setattr__(self, "structure", lam)
        object.__setattr__(self, "coeffs", abc)

    @property
    def dim(self) -> int:
        return 3

    @property
    def npts(self) -> int:
        return 1

    @property
    def is_su2(self) -> bool:
        l1, l2, l3 = self.structure
        return (l1 > 0 and l2 > 0 and l3 > 0) or (l1 < 0 and l2 < 0 and l3 < 0)

    @property
    def base_volume(self) -> float:
        """Volume at ``(a, b, c) = (1, 1, 1)``.

        For SU(2) this is ``16 pi^2 / |l1 l2 l3|``: writing ``e_i = c_i X_i``
        with ``X_i`` the unit-sphere frame gives ``c1 c2 c3 = |l1 l2 l3| / 8``.
        Other groups need a lattice, whose covolume is ``ref_volume``
        (default 1).
        """
        if self.is_su2:
            l1, l2, l3 = self.structure
            return 16.0 * math.pi**2 / abs(l1 * l2 * l3)
        return 1.0 if self.ref_volume is None else float(self.ref_volume)

    @cached_property
    def quadrature(self) -> QuadratureTable:
        a, b, c = self.coeffs
        total = self.base_volume * math.sqrt(a * b * c)
        return QuadratureTable(_frozen([total]), total)

    def coefficients(self) -> np.ndarray:
        return np.array([self.coeffs])

    def with_coefficients(self, coeffs) -> "Homogeneous3":
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        return Homogeneous3(self.structure, tuple(coeffs), self.ref_volume)

    def coefficient_names(self) -> list[str]:
        return ["a", "b", "c"]

    def coefficient_summary(self) -> list[float]:
        return list(self.coeffs)


@dataclass(frozen=True, eq=False)
class WarpedTorus:
    L: float
    rho: np.ndarray
    phi: np.ndarray

    kind = "warped_torus"

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).reshape(-1)
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if rho.shape != phi.shape:
            raise InvalidGeometryError("rho and phi must have the same number of samples")
        if rho.size < MIN_GRID_SIZE:
            raise ResolutionError(f"grid size must be >= {MIN_GRID_SIZE}, got {rho.size}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise InvalidGeometryError(f"domain length must be positive, got {self.L}")
        if not (np.all(np.isfinite(rho)) and np.all(rho > 0)):
            raise InvalidGeometryError("rho samples must be positive")
        if not (np.all(np.isfinite(phi)) and np.all(phi > 0)):
            raise InvalidGeometryError("phi samples must be positive")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "rho", _frozen(rho))
        object.__setattr__(self, "phi", _frozen(phi))

    def __eq__(self, other):
        if not isinstance(other, WarpedTorus):
            return NotImplemented
        return (
            self.L == other.L
            and np.array_equal(self.rho, other.rho)
            and np.array_equal(self.phi, other.phi)
        )

    __hash__ = None

    @property
    def dim(self) -> int:
        return 2

    @property
    def N(self) -> int:
        return self.rho.size

    @property
    def npts(self) -> int:
        return self.N

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    @cached_property
    def quadrature(self) -> QuadratureTable:
        w = 2.0 * math.pi * self.h * self.rho * self.phi
        return QuadratureTable(_frozen(w), float(np.sum(w)))

    def coefficients(self) -> np.ndarray:
        return np.stack([self.rho**2, self.phi**2], axis=1)

    def with_coefficients(self, coeffs) -> "WarpedTorus":
        coeffs = np.asarray(coeffs, dtype=float)
        if np.any(coeffs <= 0):
            raise InvalidGeometryError("metric coefficients must stay positive")
        return WarpedTorus(self.L, np.sqrt(coeffs[:, 0]), np.sqrt(coeffs[:, 1]))

    def coefficient_names(self) -> list[str]:
        return ["rho2_min", "rho2_max", "phi2_min", "phi2_max"]

    def coefficient_summary(self) -> list[float]:
        r2, p2 = self.rho**2, self.phi**2
        return [float(r2.min()), float(r2.max()), float(p2.min()), float(p2.max())]


Geometry = Union[ConstantCurvature, Homogeneous3, WarpedTorus]


def is_frame_class(g: Geometry) -> bool:
    return not isinstance(g, WarpedTorus)


def rescale_metric(g: Geometry, lam: float) -> Geometry:
    """Return the geometry of ``lam * g``."""
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidScaleError(f"scale factor must be positive, got {lam}")
    if lam == 1.0:
        return g
    if isinstance(g, WarpedTorus):
        s = math.sqrt(lam)
        return WarpedTorus(g.L, g.rho * s, g.phi * s)
    return g.with_coefficients(g.coefficients() * lam)


def fourier_profile(spec, r: np.ndarray, L: float) -> np.ndarray:
    """Evaluate ``mean + sum_k cos[k] cos(2 pi k r / L) + sin[k] sin(...)``.

    ``spec`` may be a number (constant profile), a sequence of samples, or a
    mapping with keys ``mean``, ``cos`` and ``sin``; mode ``k`` is the
    ``k``-th list entry counting from 1.
    """
    r = np.asarray(r, dtype=float)
    if isinstance(spec, Mapping):
        out = np.full_like(r, float(spec.get("mean", 0.0)))
        for key, fn in (("cos", np.cos), ("sin", np.sin)):
            for k, amp in enumerate(spec.get(key, ()), start=1):
                out = out + float(amp) * fn(2.0 * math.pi * k * r / L)
        return out
    if np.isscalar(spec):
        return np.full_like(r, float(spec))
    arr = np.asarray(spec, dtype=float).reshape(-1)
    if arr.shape != r.shape:
        raise InvalidGeometryError(f"profile has {arr.size} samples, grid has {r.size}")
    return arr.copy()


def build_geometry(spec: Mapping) -> Geometry:
    """Validate a geometry description and build the corresponding class.

    Recognised forms::

        {"kind": "constant_curvature", "n": 3, "K": 1.0, "sigma": 1.0}
        {"kind": "homogeneous3", "structure": [2, 2, 2], "coeffs": [1, 1, 1]}
        {"kind": "warped_torus", "N": 64, "L": 6.283, "rho": 1.0,
         "phi": {"mean": 1.0, "sin": [0.1]}}
    """
    kind = spec.get("kind")
    if kind == "constant_curvature":
        return ConstantCurvature(
            spec["n"], spec["K"], spec.get("sigma", 1.0), spec.get("ref_volume")
        )
    if kind == "homogeneous3":
        return Homogeneous3(
            tuple(spec["structure"]), tuple(spec["coeffs"]), spec.get("ref_volume")
        )
    if kind == "warped_torus":
        N = int(spec["N"])
        if N < MIN_GRID_SIZE:
            raise ResolutionError(f"grid size must be >= {MIN_GRID_SIZE}, got {N}")
        L = float(spec.get("L", 2.0 * math.pi))
        r = np.arange(N) * (L / N)
        return WarpedTorus(
            L, fourier_profile(spec.get("rho", 1.0), r, L), fourier_profile(spec.get("phi", 1.0), r, L)
        )
    raise InvalidGeometryError(f"unknown geometry kind {kind!r}")
