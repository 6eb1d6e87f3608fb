"""Time integration of the metric, drift and measure flows.

Forward time ``t`` runs the metric flow ``dg/dt = -2 Ric - (alpha/2) Rm2``;
the drift and the measure are integrated in the backward time
``eta = T0 - t`` along the stored metric path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from . import warped_ops as wo
from .curvature import curvature_package, drift_modified_rm2
from .density import (
    alpha_g,
    check_frame_drift,
    density_exponent,
    fp_rk4,
    fp_step_bound,
    interpolate_warped,
    total_mass,
)
from .errors import (
    AlignmentError,
    BranchError,
    GaugeError,
    IllPosedError,
    InvalidCouplingError,
    InvalidGeometryError,
    InvalidScaleError,
    NotParabolicError,
    RepresentationError,
    SamplingError,
    StepSizeError,
)
from .fields import DriftField, SymmetricTensorField, VectorField, as_scalar_field
from .frames import FrameAlgebra, rough_laplacian
from .geometry import (
    ConstantCurvature,
    Geometry,
    Homogeneous3,
    WarpedTorus,
    is_frame_class,
    rescale_metric,
)

BLOWUP_COEFF_RATIO = 1e-8
BLOWUP_RHS_NORM = 1e8


# ---------------------------------------------------------------------------
# state containers


@dataclass(frozen=True, eq=False)
class FlowState:
    """One snapshot: metric, density exponent, drift, time and coupling."""

    g: Geometry
    f: np.ndarray | None
    drift: DriftField | None
    t: float
    alpha: float
    scale_invariant: bool = True

    @classmethod
    def initial(
        cls,
        g: Geometry,
        f=0.0,
        drift: DriftField | None = None,
        alpha: float | None = None,
        t: float = 0.0,
    ) -> "FlowState":
        """Build a starting state; ``alpha=None`` derives the coupling from ``dw``."""
        f = as_scalar_field(g, f, "f")
        if is_frame_class(g) and np.ptp(f) != 0:
            raise RepresentationError("density exponent must be constant on frame classes")
        if alpha is None:
            return cls(g, f, drift, t, alpha_g(g, f), True)
        if not alpha > 0:
            raise InvalidCouplingError(f"coupling must be positive, got {alpha}")
        return cls(g, f, drift, t, float(alpha), False)

    def replace(self, **kw) -> "FlowState":
        data = dict(
            g=self.g,
            f=self.f,
            drift=self.drift,
            t=self.t,
            alpha=self.alpha,
            scale_invariant=self.scale_invariant,
        )
        data.update(kw)
        return FlowState(**data)


@dataclass
class Trajectory:
    states: list[FlowState] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    halted: str | None = None
    mode: str = "plain"

    def append(self, state: FlowState, diag: dict) -> None:
        if self.states and not state.t > self.states[-1].t:
            raise SamplingError("trajectory timestamps must increase strictly")
        self.states.append(state)
        self.diagnostics.append(diag)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self) -> int:
        return len(self.states)

    def margins(self) -> np.ndarray:
        return np.array([d["margin"] for d in self.diagnostics])


class MetricPath:
    """Piecewise-linear interpolation of metric coefficients between snapshots."""

    def __init__(self, times, geoms, max_gap: float | None = None):
        self.times = np.asarray(times, dtype=float)
        self.geoms = list(geoms)
        if len(self.times) != len(self.geoms) or len(self.times) < 2:
            raise SamplingError("a metric path needs at least two snapshots")
        gaps = np.diff(self.times)
        if np.any(gaps <= 0):
            raise SamplingError("metric snapshots must have increasing times")
        if max_gap is not None and gaps.max() > max_gap * (1.0 + 1e-9):
            raise SamplingError(f"snapshot gap {gaps.max():.3e} exceeds {max_gap:.3e}")

    def at(self, t: float) -> Geometry:
        ts = self.times
        span = ts[-1] - ts[0]
        if t < ts[0] - 1e-12 * span or t > ts[-1] + 1e-12 * span:
            raise SamplingError(f"time {t} outside the stored path [{ts[0]}, {ts[-1]}]")
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
        s = (t - ts[k]) / (ts[k + 1] - ts[k])
        if s <= 1e-14:
            return self.geoms[k]
        if s >= 1.0 - 1e-14:
            return self.geoms[k + 1]
        g0, g1 = self.geoms[k], self.geoms[k + 1]
        if isinstance(g0, WarpedTorus):
            return interpolate_warped(g0, g1, s)
        return g0.with_coefficients((1.0 - s) * g0.coefficients() + s * g1.coefficients())


# ---------------------------------------------------------------------------
# metric right-hand side


def rg2_rhs(g: Geometry, alpha: float) -> SymmetricTensorField:
    """``-2 Ric - (alpha/2) Rm2`` in frame components."""
    if not alpha >= 0:
        raise InvalidCouplingError(f"coupling must be non-negative, got {alpha}")
    curv = curvature_package(g)
    return -2.0 * curv.ric - 0.5 * alpha * curv.rm2


def parabolicity_margin(g: Geometry, alpha: float) -> float:
    """``min (1 + alpha K)`` over the sectional range."""
    if not alpha > 0:
        raise InvalidCouplingError(f"coupling must be positive, got {alpha}")
    return 1.0 + alpha * curvature_package(g).k_min


def coefficient_rate(g: Geometry, v: SymmetricTensorField) -> np.ndarray:
    """Time derivative of the stored metric coefficients for ``dg/dt = v``."""
    c = g.coefficients()
    if isinstance(g, ConstantCurvature):
        return c * v.data[:, :1]
    return c * v.data


def scaling_defect(g: Geometry, alpha: float, lam: float) -> float:
    """Relative error of ``RG(lam g) = 2 Ric(g) + (alpha/2) Rm2(g) / lam`` in coordinates."""
    curv = curvature_package(g)
    expected = (2.0 * curv.ric + (0.5 * alpha / lam) * curv.rm2).coordinate(g)
    gl = rescale_metric(g, lam)
    got = (-rg2_rhs(gl, alpha)).coordinate(gl)
    return float(np.max(np.abs(got - expected)) / max(np.max(np.abs(expected)), 1e-300))


def _state_diagnostics(state: FlowState, mass0: float | None, rhs_norm: float) -> dict:
    curv = curvature_package(state.g)
    if state.f is not None:
        mass = total_mass(state.g, state.f)
        a_g = mass ** (2.0 / state.g.dim)
        mass_res = (mass - mass0) / mass0 if mass0 else float("nan")
    else:
        a_g = float("nan")
        mass_res = float("nan")
    return {
        "margin": 1.0 + state.alpha * curv.k_min,
        "R_min": float(np.min(curv.scalar)),
        "R_max": float(np.max(curv.scalar)),
        "alpha_g": a_g,
        "mass_residual": mass_res,
        "rhs_norm": rhs_norm,
    }


def _frame_density(g: Geometry, mass: float) -> np.ndarray:
    """Constant ``f`` giving total mass ``mass`` on a frame class."""
    return np.array([math.log(g.quadrature.total / mass)])


def _rk4_coefficients(
    c0: np.ndarray, rate: Callable[[np.ndarray], np.ndarray], dt: float
) -> np.ndarray:
    k1 = rate(c0)
    k2 = rate(c0 + 0.5 * dt * k1)
    k3 = rate(c0 + 0.5 * dt * k2)
    k4 = rate(c0 + dt * k3)
    return c0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rg2(
    state: FlowState, dt: float, steps: int, mode: str = "plain"
) -> Trajectory:
    """RK4 method of lines for the metric flow.

    ``mode="scale-invariant"`` uses ``alpha_g`` of the initial data;
    ``"plain"`` uses the stored fixed coupling.  On frame classes the density
    exponent follows the volume so that ``dw`` is preserved; on the torus the
    metric is evolved alone and ``f`` is carried unchanged (the measure needs
    the backward pass of :func:`seesaw_solve`).
    """
    if mode not in ("plain", "scale-invariant"):
        raise ValueError(f"unknown mode {mode!r}")
    if not dt > 0 or steps < 0:
        raise StepSizeError("dt must be positive and steps non-negative")
    alpha = state.alpha
    if mode == "scale-invariant":
        if state.f is None:
            raise RepresentationError("scale-invariant mode needs a density exponent")
        alpha = alpha_g(state.g, state.f)
    margin0 = parabolicity_margin(state.g, alpha)
    if margin0 <= 0:
        raise NotParabolicError(f"parabolicity margin {margin0:.6g} <= 0 at the start")
    state = state.replace(alpha=alpha, scale_invariant=(mode == "scale-invariant"))
    mass0 = total_mass(state.g, state.f) if state.f is not None else None
    traj = Trajectory(mode=mode)
    g = state.g
    rhs0 = float(np.max(np.abs(coefficient_rate(g, rg2_rhs(g, alpha)))))
    traj.append(state, _state_diagnostics(state, mass0, rhs0))
    coeff0 = g.coefficients()
    frame = is_frame_class(g)

    def rate(c):
        gc = g.with_coefficients(c)
        return coefficient_rate(gc, rg2_rhs(gc, alpha))

    for k in range(1, steps + 1):
        try:
            c_new = _rk4_coefficients(g.coefficients(), rate, dt)
            g_new = g.with_coefficients(c_new)
        except InvalidGeometryError:
            traj.halted = f"metric lost positivity during step {k}"
            break
        rhs_norm = float(np.max(np.abs(rate(c_new))))
        f_new = state.f
        if frame and state.f is not None:
            f_new = _frame_density(g_new, mass0)
        new_state = state.replace(g=g_new, f=f_new, t=state.t + dt * k)
        diag = _state_diagnostics(new_state, mass0, rhs_norm)
        traj.append(new_state, diag)
        g = g_new
        if diag["margin"] <= 0:
            traj.halted = f"parabolicity lost at t={new_state.t:.17g}"
            break
        if np.min(c_new / coeff0) < BLOWUP_COEFF_RATIO or rhs_norm > BLOWUP_RHS_NORM:
            traj.halted = f"blow-up detected at t={new_state.t:.17g}"
            break
    return traj


# ---------------------------------------------------------------------------
# constant-curvature exact solution


def _implicit_residual(sigma, t, K, n, alpha):
    arg = (2.0 * sigma + alpha * K) / (2.0 + alpha * K)
    return sigma + 2.0 * K * (n - 1) * t - 1.0 - 0.5 * alpha * K * math.log(abs(arg))


def constant_curvature_implicit_sigma(
    t: float, K: float, n: int, alpha: float, substeps: int | None = None
) -> float:
    """Solve the implicit relation for the scale factor by continued Newton steps.

    The solution is tracked from ``sigma(0) = 1`` along ``[0, t]`` so that the
    branch never jumps across the logarithmic singularity.
    """
    if K == 0 or t == 0:
        return 1.0
    if alpha * K == -2.0:
        raise BranchError("the branch through sigma=1 is singular when alpha K = -2")
    side = math.copysign(1.0, 2.0 + alpha * K)
    substeps = substeps or max(8, int(math.ceil(abs(t) * 200)))
    sigma = 1.0
    for j in range(1, substeps + 1):
        tj = t * j / substeps
        # Euler predictor from the ODE, then Newton corrector
        rate = -2.0 * K * (n - 1) - alpha * K * K * (n - 1) / sigma
        guess = sigma + rate * (t / substeps)
        s = guess
        for _ in range(60):
            denom = 2.0 * s + alpha * K
            if denom == 0 or math.copysign(1.0, denom) != side or s <= 0:
                raise BranchError(
                    f"Newton left the branch at t={tj:.6g}: bracket [{sigma:.6g}, {guess:.6g}]"
                )
            res = _implicit_residual(s, tj, K, n, alpha)
            deriv = 2.0 * s / denom
            if deriv == 0:
                raise BranchError(f"degenerate derivative at sigma={s:.6g}")
            step = res / deriv
            s -= step
            if abs(step) <= 1e-15 * max(1.0, abs(s)):
                break
        else:
            raise BranchError(f"Newton did not converge at t={tj:.6g}")
        sigma = s
    res = _implicit_residual(sigma, t, K, n, alpha)
    if abs(res) > 1e-12 * max(1.0, abs(sigma)):
        raise BranchError(f"implicit residual {res:.3e} too large")
    return sigma


def sigma_ode_rhs(sigma: float, K: float, n: int, alpha: float) -> float:
    return -2.0 * K * (n - 1) - alpha * K * K * (n - 1) / sigma


def sigma_ode_rk4(K: float, n: int, alpha: float, t_end: float, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Classic RK4 for the scale-factor ODE starting at ``sigma(0) = 1``."""
    ts = np.linspace(0.0, t_end, steps + 1)
    dt = t_end / steps
    out = np.empty(steps + 1)
    s = 1.0
    out[0] = s
    for k in range(steps):
        k1 = sigma_ode_rhs(s, K, n, alpha)
        k2 = sigma_ode_rhs(s + 0.5 * dt * k1, K, n, alpha)
        k3 = sigma_ode_rhs(s + 0.5 * dt * k2, K, n, alpha)
        k4 = sigma_ode_rhs(s + dt * k3, K, n, alpha)
        s = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = s
    return ts, out


# ---------------------------------------------------------------------------
# drift evolution in backward time


def _frame_xi_rate(g: Geometry, u: np.ndarray, alpha: float, sign: float = 1.0) -> np.ndarray:
    """``d/deta`` of fixed-basis components of a Killing drift (``sign=-1`` gives ``d/dt``)."""
    curv = curvature_package(g)
    ric = curv.ric.data[0]
    rm2 = curv.rm2.data[0]
    quartic = alpha * alpha / 64.0 * float(np.sum(rm2**2))
    if isinstance(g, Homogeneous3):
        scale = np.sqrt(np.asarray(g.coeffs))
        w = u * scale
        lap = rough_laplacian(w, FrameAlgebra(g).gamma)
    else:
        scale = math.sqrt(g.sigma)
        w = u * scale
        lap = -ric * w  # Killing fields satisfy Lap X = -Ric X
    rate = lap - (ric + 0.25 * alpha * rm2) * w - quartic * w
    return sign * rate / scale


def _half_profiles(g: WarpedTorus):
    rho_e = wo.half_rho(g)
    phi_e = wo.half_phi(g)
    kap_e = kernels.edge_diff(np.ascontiguousarray(g.phi), g.h) / (rho_e * phi_e)
    K_e = kernels.edge_mean(wo.gauss_curvature(g))
    return rho_e, phi_e, kap_e, K_e


def _warped_xi_rate(g: WarpedTorus, s: np.ndarray, alpha: float):
    """``d/deta`` of the frame component ``s = rho xi^r`` at half nodes.

    The flow equation for the metric turns the drift equation into
    ``s_t = Lap s - kappa^2 s + s s_sigma - q s`` with arclength derivative
    ``s_sigma`` and ``q = alpha^2 |Rm2(g, xi)|^2 / 64``.  Returns the rate and
    the largest forward-Euler step that keeps every update a convex
    combination of neighbouring values.
    """
    rho_e, phi_e, kap_e, K_e = _half_profiles(g)
    h = g.h
    a_up = np.roll(g.phi / g.rho, -1) / (rho_e * phi_e * h * h)  # weight of s_{j+1}
    a_dn = (g.phi / g.rho) / (rho_e * phi_e * h * h)  # weight of s_{j-1}
    s_up = np.roll(s, -1)
    s_dn = np.roll(s, 1)
    lap = a_up * (s_up - s) + a_dn * (s_dn - s)
    s_sigma = (s_up - s_dn) / (2.0 * h * rho_e)
    b = s / (2.0 * h * rho_e)
    q = ((2.0 * alpha * K_e**2 - 4.0 * s_sigma) ** 2 + (2.0 * alpha * K_e**2 - 4.0 * kap_e * s) ** 2) / 64.0
    rate = lap - kap_e**2 * s + s * s_sigma - q * s
    if np.any(a_up < np.abs(b)) or np.any(a_dn < np.abs(b)):
        bound = 0.0
    else:
        bound = 1.0 / float(np.max(a_up + a_dn + kap_e**2 + q))
    return rate, bound


def xi_step_bound(g: Geometry, xi: VectorField, alpha: float) -> float:
    if is_frame_class(g):
        return math.inf
    s = xi.data * wo.half_rho(g)
    return _warped_xi_rate(g, s, alpha)[1]


def _ssp_rk3(s, rate_at, d_eta):
    """Shu-Osher SSP-RK3; ``rate_at(s, frac)`` returns ``(rate, euler_bound)``."""
    r0, b0 = rate_at(s, 0.0)
    if d_eta > b0:
        raise StepSizeError(f"d_eta={d_eta:.3e} exceeds the drift step bound {b0:.3e}")
    s1 = s + d_eta * r0
    r1, b1 = rate_at(s1, 1.0)
    if d_eta > b1:
        raise StepSizeError(f"d_eta={d_eta:.3e} exceeds the drift step bound {b1:.3e}")
    s2 = 0.75 * s + 0.25 * (s1 + d_eta * r1)
    r2, b2 = rate_at(s2, 0.5)
    if d_eta > b2:
        raise StepSizeError(f"d_eta={d_eta:.3e} exceeds the drift step bound {b2:.3e}")
    return s / 3.0 + 2.0 / 3.0 * (s2 + d_eta * r2)


def _as_xi(state_or_drift) -> VectorField:
    d = state_or_drift
    if isinstance(d, DriftField):
        return d.xi
    return d


def xi_evolution_step(
    state: FlowState, d_eta: float, g_next: Geometry | None = None
) -> DriftField:
    """Advance the drift one step in backward time ``eta``.

    ``state.g`` is the metric at ``eta`` and ``g_next`` the metric at
    ``eta + d_eta`` (frozen when omitted).  Frame classes use classic RK4 on
    the exact ODE reduction; the torus uses SSP-RK3, which keeps the
    discrete maximum principle for ``|xi|^2``.
    """
    if not d_eta > 0:
        raise StepSizeError(f"step must be positive, got {d_eta}")
    g0 = state.g
    g1 = g0 if g_next is None else g_next
    xi = _as_xi(state.drift) if state.drift is not None else VectorField.zeros(g0)
    xi.check(g0)
    alpha = state.alpha
    if is_frame_class(g0):
        check_frame_drift(g0, xi)
        path = MetricPath([0.0, 1.0], [g0, g1]) if g1 is not g0 else None

        def rate(u, frac):
            g = g0 if path is None else path.at(frac)
            return _frame_xi_rate(g, u, alpha)

        u = xi.data
        k1 = rate(u, 0.0)
        k2 = rate(u + 0.5 * d_eta * k1, 0.5)
        k3 = rate(u + 0.5 * d_eta * k2, 0.5)
        k4 = rate(u + d_eta * k3, 1.0)
        new = VectorField(u + d_eta / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        check_frame_drift(g1, new)
        return DriftField(new)
    if xi.twist != 0.0:
        raise RepresentationError("an evolving drift on the torus must be radial (twist = 0)")
    gm = interpolate_warped(g0, g1, 0.5)
    geoms = {0.0: g0, 0.5: gm, 1.0: g1}
    s = xi.data * wo.half_rho(g0)
    s_new = _ssp_rk3(s, lambda v, frac: _warped_xi_rate(geoms[frac], v, alpha), d_eta)
    return DriftField(VectorField(s_new / wo.half_rho(g1)))


def xi_norm2_max(g: Geometry, xi: VectorField) -> float:
    if isinstance(g, WarpedTorus):
        return float(np.max(wo.half_norm2(g, xi)))
    return float(np.sum(xi.frame_components(g) ** 2))


def xi_norm2_min(g: Geometry, xi: VectorField) -> float:
    if isinstance(g, WarpedTorus):
        return float(np.min(wo.half_norm2(g, xi)))
    return float(np.sum(xi.frame_components(g) ** 2))


# ---------------------------------------------------------------------------
# DeTurck-modified system


def deturck_step(state: FlowState, dt: float) -> FlowState:
    """One RK4 step of the pulled-back system on a frame class.

    The metric follows ``-2 Ric_BE - (alpha/2) Rm2(g, xi)``, ``f`` follows the
    volume so that ``dw`` stays fixed, and the drift follows the backward
    parabolic equation, which on Killing drifts is an ODE.  On the torus the
    pulled-back system is not well posed as an initial-value problem and
    :class:`IllPosedError` is raised; use :func:`deturck_run` instead.
    """
    g = state.g
    if isinstance(g, WarpedTorus):
        raise IllPosedError(
            "the pulled-back drift equation is backward parabolic in t; "
            "integrate the see-saw form with deturck_run"
        )
    if state.f is None:
        raise RepresentationError("the DeTurck system needs a density exponent")
    if not dt > 0:
        raise StepSizeError(f"step must be positive, got {dt}")
    xi = _as_xi(state.drift) if state.drift is not None else VectorField.zeros(g)
    check_frame_drift(g, xi)
    alpha = state.alpha
    nc = g.coefficients().size

    def rate(y):
        gc = g.with_coefficients(y[:nc].reshape(g.coefficients().shape))
        # Killing drift: Rm2(g, xi) = Rm2(g); f constant: Ric_BE = Ric
        dc = coefficient_rate(gc, rg2_rhs(gc, alpha)).reshape(-1)
        du = _frame_xi_rate(gc, y[nc:], alpha, sign=-1.0)
        return np.concatenate([dc, du])

    y0 = np.concatenate([g.coefficients().reshape(-1), xi.data])
    y1 = _rk4_coefficients(y0, rate, dt)
    g_new = g.with_coefficients(y1[:nc].reshape(g.coefficients().shape))
    mass = total_mass(g, state.f)
    new_xi = VectorField(y1[nc:])
    check_frame_drift(g_new, new_xi)
    return state.replace(
        g=g_new, f=_frame_density(g_new, mass), drift=DriftField(new_xi), t=state.t + dt
    )


def harmonic_drift(g: WarpedTorus, f, c: float = 1.0) -> VectorField:
    """Radial field ``c / mean(rho phi e^-f)`` at half nodes: ``div_w`` of it vanishes."""
    f = as_scalar_field(g, f, "f")
    return VectorField(c / kernels.edge_mean(wo.density_weight(g, f)))


def deturck_run(
    state: FlowState,
    dt: float,
    steps: int,
    normalize: bool = True,
    max_norm_ratio: float = 1.01,
) -> Trajectory:
    """Integrate the DeTurck-modified system and return its trajectory.

    Frame classes step the pulled-back ODE system directly, after rescaling
    the drift so that ``|xi(t=0)|^2 = 1``.  On the torus the see-saw
    (metric forward, drift and measure backward) is solved in the original
    gauge; every functional checked on the result is invariant under the
    pull-back.  The drift given at ``eta = 0`` is rescaled so that
    ``min |xi|^2`` over the run lies in ``[1, max_norm_ratio]``.
    """
    if state.f is None:
        raise RepresentationError("the DeTurck system needs a density exponent")
    margin0 = parabolicity_margin(state.g, state.alpha)
    if margin0 <= 0:
        raise NotParabolicError(f"parabolicity margin {margin0:.6g} <= 0 at the start")
    if is_frame_class(state.g):
        xi = _as_xi(state.drift) if state.drift is not None else VectorField.zeros(state.g)
        if normalize and not xi.is_zero():
            xi = xi * (1.0 / math.sqrt(xi_norm2_min(state.g, xi)))
        cur = state.replace(drift=DriftField(xi))
        mass0 = total_mass(cur.g, cur.f)
        traj = Trajectory(mode="deturck")
        traj.append(cur, _state_diagnostics(cur, mass0, 0.0))
        for k in range(1, steps + 1):
            try:
                nxt = deturck_step(cur, dt)
            except InvalidGeometryError:
                traj.halted = f"metric lost positivity during step {k}"
                break
            rhs = float(np.max(np.abs(coefficient_rate(nxt.g, rg2_rhs(nxt.g, nxt.alpha)))))
            diag = _state_diagnostics(nxt, mass0, rhs)
            traj.append(nxt, diag)
            cur = nxt
            if diag["margin"] <= 0:
                traj.halted = f"parabolicity lost at t={cur.t:.17g}"
                break
        return traj
    forward = integrate_rg2(state, dt, steps, mode="scale-invariant")
    if len(forward) < 2:
        raise SamplingError(f"metric run stopped in its first step: {forward.halted}")
    xi0 = _initial_drift(state, forward.states[-1].g)
    if normalize:
        xi0 = _normalize_drift(forward, xi0, dt, max_norm_ratio)
    return _backward_pass(state, forward, xi0, dt, evolve=True, mode="deturck")


# ---------------------------------------------------------------------------
# see-saw


def _initial_drift(state: FlowState, g_end: Geometry) -> VectorField:
    """Assemble ``grad psi0 + perp0`` on the metric at ``eta = 0``."""
    d = state.drift
    if d is None:
        return VectorField.zeros(g_end)
    if d.psi is None:
        return d.xi.check(g_end)
    return DriftField.from_parts(g_end, d.psi, d.perp).xi


def _xi_pass(forward: Trajectory, xi0: VectorField, dt: float, alpha: float) -> list[VectorField]:
    """Evolve the drift in ``eta`` along the reversed metric path.

    Returns the drift at every stored snapshot, ordered by ``eta``.
    """
    geoms = [s.g for s in reversed(forward.states)]
    out = [xi0]
    xi = xi0
    for k in range(len(geoms) - 1):
        g0, g1 = geoms[k], geoms[k + 1]
        bound = min(xi_step_bound(g0, xi, alpha), xi_step_bound(g1, xi, alpha))
        if bound <= 0:
            raise StepSizeError("drift exceeds the cell Peclet limit; refine the grid")
        m = max(1, int(math.ceil(dt / (0.5 * bound))))
        sub = dt / m
        path = MetricPath([0.0, 1.0], [g0, g1]) if m > 1 else None
        for j in range(m):
            ga = g0 if path is None else path.at(j / m)
            gb = g1 if path is None else path.at((j + 1) / m)
            st = FlowState(ga, None, DriftField(xi), 0.0, alpha)
            xi = xi_evolution_step(st, sub, gb).xi
        out.append(xi)
    return out


def _normalize_drift(forward: Trajectory, xi0: VectorField, dt: float, max_ratio: float) -> VectorField:
    """Rescale ``xi0`` so that ``min |xi|^2`` over the backward pass is in ``[1, max_ratio]``."""
    geoms = [s.g for s in reversed(forward.states)]
    alpha = forward.states[0].alpha

    def min_norm(scale):
        xis = _xi_pass(forward, xi0 * scale, dt, alpha)
        return min(xi_norm2_min(g, x) for g, x in zip(geoms, xis))

    m0 = xi_norm2_min(geoms[0], xi0)
    if m0 <= 0:
        raise GaugeError("the drift vanishes somewhere; add a harmonic component")
    target = 0.5 * (1.0 + max_ratio)
    a = math.sqrt(target / m0)
    fa = min_norm(a) - target
    b = a * 1.05
    fb = min_norm(b) - target
    for _ in range(40):
        if 1.0 <= fa + target <= max_ratio:
            return xi0 * a
        if fb == fa:
            break
        a, fa, b = b, fb, b - fb * (b - a) / (fb - fa)
        if b <= 0:
            break
        fb = min_norm(b) - target
        a, fa, b, fb = b, fb, a, fa
    if 1.0 <= fa + target <= max_ratio:
        return xi0 * a
    raise GaugeError("could not normalise the drift to min |xi|^2 = 1")


def _backward_pass(
    state: FlowState,
    forward: Trajectory,
    xi0: VectorField,
    dt: float,
    evolve: bool,
    mode: str,
) -> Trajectory:
    """Drift and measure passes in ``eta`` along the stored forward run; a
    forward run that halted early is processed up to its last snapshot."""
    alpha = forward.states[0].alpha
    n_snap = len(forward.states)
    geoms_eta = [s.g for s in reversed(forward.states)]
    g_start = state.g
    mass0 = total_mass(g_start, state.f)
    if evolve:
        xis_eta = _xi_pass(forward, xi0, dt, alpha)
    else:
        xis_eta = [_frozen_drift(state, g) for g in geoms_eta]
    # measure at eta = 0: e^-f0 dmu on g(T0), rescaled to the initial mass
    frame = is_frame_class(g_start)
    fs_eta = []
    if frame:
        for g in geoms_eta:
            fs_eta.append(_frame_density(g, mass0))
    else:
        g_e = geoms_eta[0]
        u = np.exp(-state.f) * g_e.rho * g_e.phi
        u *= mass0 / (2.0 * math.pi * g_e.h * float(np.sum(u)))
        fs_eta.append(density_exponent(g_e, u))
        for k in range(n_snap - 1):
            g0, g1 = geoms_eta[k], geoms_eta[k + 1]
            x0, x1 = xis_eta[k].data, xis_eta[k + 1].data
            f_cur = density_exponent(g0, u)
            bound = min(fp_step_bound(g0, f_cur, x0), fp_step_bound(g1, f_cur, x1))
            m = max(1, int(math.ceil(dt / (0.9 * bound))))
            sub = dt / m
            for j in range(m):
                sa, sb = j / m, (j + 1) / m
                ga = interpolate_warped(g0, g1, sa)
                gm = interpolate_warped(g0, g1, 0.5 * (sa + sb))
                gb = interpolate_warped(g0, g1, sb)
                xa = (1 - sa) * x0 + sa * x1
                xm = (1 - 0.5 * (sa + sb)) * x0 + 0.5 * (sa + sb) * x1
                xb = (1 - sb) * x0 + sb * x1
                u = fp_rk4(u, (ga, gm, gb), (xa, xm, xb), sub)
            fs_eta.append(density_exponent(g1, u))
    traj = Trajectory(mode=mode)
    for k in range(n_snap):
        ke = n_snap - 1 - k
        fst = forward.states[k]
        st = fst.replace(f=fs_eta[ke], drift=DriftField(xis_eta[ke]))
        rhs = forward.diagnostics[k]["rhs_norm"]
        traj.append(st, _state_diagnostics(st, mass0, rhs))
    traj.halted = forward.halted
    return traj


def _frozen_drift(state: FlowState, g: Geometry) -> VectorField:
    """``grad_g psi0 + perp0`` with the divergence-free part held in coordinates."""
    d = state.drift
    if d is None:
        return VectorField.zeros(g)
    if d.psi is None:
        return d.xi.check(g)
    return DriftField.from_parts(g, d.psi, d.perp).xi


def seesaw_solve(
    initial: FlowState,
    T0: float,
    dt: float,
    drift: str = "evolve",
    metric_mode: str = "scale-invariant",
) -> Trajectory:
    """Forward metric run on ``[0, T0]`` then drift and measure passes in ``eta``.

    ``drift="evolve"`` integrates the drift equation in ``eta`` from the
    initial drift placed at ``eta = 0``; ``drift="frozen"`` keeps
    ``grad psi0 + perp0`` on the evolving metric, which is the choice that
    commutes exactly with parabolic rescaling.  ``metric_mode`` is passed
    to :func:`integrate_rg2`.
    """
    if drift not in ("evolve", "frozen"):
        raise ValueError(f"unknown drift mode {drift!r}")
    if initial.f is None:
        raise RepresentationError("the see-saw needs a density exponent")
    steps = int(round(T0 / dt))
    if steps < 1 or abs(steps * dt - T0) > 1e-9 * max(T0, dt):
        raise SamplingError("T0 must be a whole number of steps dt")
    forward = integrate_rg2(initial, dt, steps, mode=metric_mode)
    if len(forward) < 2:
        raise SamplingError(f"metric run stopped in its first step: {forward.halted}")
    MetricPath(forward.times, [s.g for s in forward.states], max_gap=dt)
    xi0 = _initial_drift(initial, forward.states[-1].g) if drift == "evolve" else None
    return _backward_pass(
        initial, forward, xi0, dt, evolve=(drift == "evolve"), mode=f"seesaw-{drift}"
    )


# ---------------------------------------------------------------------------
# parabolic scaling


def rescale_state(state: FlowState, lam: float) -> FlowState:
    """Initial data ``(lam g, same psi, perp / lam)`` with the same density exponent."""
    if not lam > 0:
        raise InvalidScaleError(f"scale factor must be positive, got {lam}")
    g = rescale_metric(state.g, lam)
    d = state.drift
    if d is not None:
        perp = None if d.perp is None else d.perp * (1.0 / lam)
        if d.psi is not None:
            d = DriftField.from_parts(g, d.psi, perp)
        else:
            d = DriftField(d.xi * (1.0 / lam))
    alpha = state.alpha * lam
    return FlowState(g, state.f, d, state.t * lam, alpha, state.scale_invariant)


def verify_scale_symmetry(traj: Trajectory, lam: float, traj_lam: Trajectory) -> dict:
    """Maximum relative deviations from ``(lam g(t/lam), xi/lam, lam^(n/2) dw)``."""
    if not lam > 0:
        raise InvalidScaleError(f"scale factor must be positive, got {lam}")
    if len(traj) != len(traj_lam):
        raise AlignmentError(f"trajectories have {len(traj)} and {len(traj_lam)} snapshots")
    t, tl = traj.times, traj_lam.times
    if not np.allclose(tl, lam * t, rtol=1e-10, atol=1e-12 * max(1.0, float(np.max(np.abs(tl))))):
        raise AlignmentError("snapshot times are not related by t -> lam t")
    dev_g = dev_xi = dev_w = 0.0
    for s, sl in zip(traj.states, traj_lam.states):
        n = s.g.dim
        c_ref = lam * s.g.coefficients()
        dev_g = max(dev_g, float(np.max(np.abs(sl.g.coefficients() - c_ref)) / np.max(np.abs(c_ref))))
        if s.drift is not None and sl.drift is not None:
            x_ref = np.append(s.drift.xi.data, s.drift.xi.twist) / lam
            x_got = np.append(sl.drift.xi.data, sl.drift.xi.twist)
            scale = max(float(np.max(np.abs(x_ref))), 1e-300)
            if np.max(np.abs(x_ref)) == 0 and np.max(np.abs(x_got)) == 0:
                d = 0.0
            else:
                d = float(np.max(np.abs(x_got - x_ref)) / scale)
            dev_xi = max(dev_xi, d)
        if s.f is not None and sl.f is not None:
            w_ref = lam ** (n / 2.0) * s.g.quadrature.weights * np.exp(-s.f)
            w_got = sl.g.quadrature.weights * np.exp(-sl.f)
            dev_w = max(dev_w, float(np.max(np.abs(w_got - w_ref)) / np.max(np.abs(w_ref))))
    return {
        "lambda": lam,
        "metric_deviation": dev_g,
        "drift_deviation": dev_xi,
        "measure_deviation": dev_w,
        "max_deviation": max(dev_g, dev_xi, dev_w),
    }
