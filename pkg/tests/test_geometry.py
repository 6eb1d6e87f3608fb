import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bumpy_torus
from rg2flow.errors import InvalidGeometryError, InvalidScaleError, ResolutionError
from rg2flow.geometry import (
    ConstantCurvature,
    Homogeneous3,
    WarpedTorus,
    build_geometry,
    fourier_profile,
    rescale_metric,
    sphere_volume,
)

coef = st.floats(0.2, 5.0)
scale = st.floats(0.1, 10.0)


def test_round_sphere_volumes():
    assert sphere_volume(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_volume(3) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert ConstantCurvature(3, 1.0).quadrature.total == pytest.approx(2 * math.pi**2, rel=1e-15)
    # radius 1/sqrt(K), scaled by sigma^(n/2)
    assert ConstantCurvature(2, 4.0, 9.0).quadrature.total == pytest.approx(4 * math.pi * 9.0 / 4.0)


def test_torus_quadrature_is_trapezoidal():
    g = WarpedTorus(2 * math.pi, np.ones(32), np.full(32, 2.0))
    assert g.quadrature.total == pytest.approx(2 * math.pi * 2 * math.pi * 2.0, rel=1e-14)
    assert g.h == pytest.approx(2 * math.pi / 32)


@pytest.mark.parametrize(
    "make, err",
    [
        (lambda: WarpedTorus(1.0, np.ones(8), np.ones(8)), ResolutionError),
        (lambda: WarpedTorus(1.0, np.ones(32), -np.ones(32)), InvalidGeometryError),
        (lambda: WarpedTorus(-1.0, np.ones(32), np.ones(32)), InvalidGeometryError),
        (lambda: WarpedTorus(1.0, np.ones(32), np.ones(16)), InvalidGeometryError),
        (lambda: Homogeneous3((1.0, 1.0, 1.0), (1.0, 0.0, 1.0)), InvalidGeometryError),
        (lambda: Homogeneous3((1.0, 1.0), (1.0, 1.0, 1.0)), InvalidGeometryError),
        (lambda: build_geometry({"kind": "klein_bottle"}), InvalidGeometryError),
        (lambda: build_geometry({"kind": "warped_torus", "N": 4}), ResolutionError),
    ],
)
def test_invalid_geometries_are_rejected(make, err):
    with pytest.raises(err):
        make()


def test_geometries_are_immutable():
    g = bumpy_torus(32)
    with pytest.raises(ValueError):
        g.rho[0] = 2.0


@settings(max_examples=40, deadline=None)
@given(a=coef, b=coef, c=coef, lam=scale)
def test_homogeneous_volume_scales_with_half_dimension(a, b, c, lam):
    g = Homogeneous3((2.0, 2.0, 2.0), (a, b, c))
    gl = rescale_metric(g, lam)
    assert gl.quadrature.total == pytest.approx(lam**1.5 * g.quadrature.total, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(lam=scale, mu=scale)
def test_rescaling_composes(lam, mu):
    g = bumpy_torus(32)
    a = rescale_metric(rescale_metric(g, lam), mu)
    b = rescale_metric(g, lam * mu)
    assert np.allclose(a.coefficients(), b.coefficients(), rtol=1e-13)
    assert a.quadrature.total == pytest.approx(lam * mu * g.quadrature.total, rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, -1.0, float("nan"), float("inf")])
def test_rescaling_needs_positive_factor(lam):
    with pytest.raises(InvalidScaleError):
        rescale_metric(ConstantCurvature(3, 1.0), lam)


def test_fourier_profile_forms():
    r = np.linspace(0, 3, 7, endpoint=False)
    out = fourier_profile({"mean": 1.0, "cos": [0.5], "sin": [0.0, 0.25]}, r, 3.0)
    ref = 1.0 + 0.5 * np.cos(2 * math.pi * r / 3) + 0.25 * np.sin(4 * math.pi * r / 3)
    assert np.allclose(out, ref, atol=1e-15)
    assert np.array_equal(fourier_profile(2.0, r, 3.0), np.full(7, 2.0))
    with pytest.raises(InvalidGeometryError):
        fourier_profile([1.0, 2.0], r, 3.0)


def test_build_geometry_round_trip():
    g = build_geometry({"kind": "warped_torus", "N": 32, "rho": 1.0, "phi": {"mean": 1.0, "sin": [0.1]}})
    assert isinstance(g, WarpedTorus) and g.N == 32
    assert np.allclose(g.phi, 1 + 0.1 * np.sin(g.nodes))
    h = build_geometry({"kind": "homogeneous3", "structure": [2, 2, 2], "coeffs": [1, 1, 1.5]})
    assert h == Homogeneous3((2.0, 2.0, 2.0), (1.0, 1.0, 1.5))
    c = build_geometry({"kind": "constant_curvature", "n": 3, "K": 1.0, "sigma": 2.0})
    assert c.with_coefficients(c.coefficients() * 2).sigma == pytest.approx(4.0)
