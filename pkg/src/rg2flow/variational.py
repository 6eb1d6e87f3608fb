"""Entropy functionals, eigenvalue problems and monotonicity reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from . import warped_ops as wo
from .curvature import bakry_emery_ricci, curvature_package, drift_modified_rm2
from .density import total_mass
from .errors import (
    ConvergenceError,
    GaugeError,
    InsufficientDataError,
    InvalidCouplingError,
    InvalidGeometryError,
    UnsupportedGeometryError,
)
from .fields import DriftField, VectorField, as_scalar_field, as_vector_field
from .geometry import ConstantCurvature, Geometry, WarpedTorus, is_frame_class

ZONAL_CELLS = 256


# ---------------------------------------------------------------------------
# integrals


def _integrate(g: Geometry, f: np.ndarray, x) -> float:
    """``int x dw`` with nodal quadrature."""
    x = np.broadcast_to(np.asarray(x, dtype=float), (g.npts,))
    return float(np.sum(g.quadrature.weights * np.exp(-f) * x))


def _dirichlet(g: Geometry, f: np.ndarray, u: np.ndarray) -> float:
    """``int |grad u|^2 dw`` as an edge sum; zero on frame classes."""
    if is_frame_class(g):
        return 0.0
    du = kernels.edge_diff(np.ascontiguousarray(u), 1.0)
    return float(np.sum(wo.edge_conductance(g, f) * du * du))


def _drift_energy(g: Geometry, f: np.ndarray, xi: VectorField) -> float:
    """``int |xi|^2 dw``; torus components live on half nodes."""
    if is_frame_class(g):
        return float(np.sum(xi.frame_components(g) ** 2)) * total_mass(g, f)
    cell = 2.0 * math.pi * g.h * kernels.edge_mean(wo.density_weight(g, f))
    return float(np.sum(cell * wo.half_norm2(g, xi)))


def perelman_R(g: Geometry, f) -> np.ndarray:
    """Nodal ``R + 2 Lap f - |grad f|^2`` with the log-mean gradient square."""
    f = as_scalar_field(g, f, "f")
    R = curvature_package(g).scalar
    if is_frame_class(g):
        return R
    return R + 2.0 * wo.laplacian(g, 0.0, f) - wo.log_mean_gradient_norm2(g, f)


def perelman_F(g: Geometry, f) -> float:
    """``int (R + |grad f|^2) dw``."""
    f = as_scalar_field(g, f, "f")
    R = curvature_package(g).scalar
    if is_frame_class(g):
        return _integrate(g, f, R)
    return _integrate(g, f, R + wo.log_mean_gradient_norm2(g, f))


def extended_F(g: Geometry, f, psi=None, xi=None) -> float:
    """Perelman's energy plus ``int |grad psi|^2 dw`` or ``int |xi|^2 dw``."""
    if psi is not None and xi is not None:
        raise ValueError("pass either psi or xi, not both")
    f = as_scalar_field(g, f, "f")
    value = perelman_F(g, f)
    if psi is not None:
        value += _dirichlet(g, f, as_scalar_field(g, psi, "psi"))
    elif xi is not None:
        value += _drift_energy(g, f, as_vector_field(g, xi))
    return value


def f2_energy(g: Geometry, f, xi, alpha: float, weighted: bool = False) -> float:
    """``int (R_Per + (alpha/8)|Rm|^2 - div xi) dw``.

    ``weighted=True`` replaces ``div`` by ``div_w``, whose integral vanishes.
    """
    if not alpha > 0:
        raise InvalidCouplingError(f"coupling must be positive, got {alpha}")
    f = as_scalar_field(g, f, "f")
    v = as_vector_field(g, xi)
    curv = curvature_package(g)
    integrand = perelman_R(g, f) + alpha / 8.0 * curv.rm_norm2
    if not is_frame_class(g):
        integrand = integrand - wo.weighted_divergence(g, 0.0 if not weighted else f, v.data)
    return _integrate(g, f, integrand)


def extended_F_bound(g: Geometry, f, xi, alpha: float) -> float:
    """``2 int |Ric_BE + (alpha/8) Rm2(g, xi)|^2 dw``."""
    f = as_scalar_field(g, f, "f")
    curv = curvature_package(g)
    T = bakry_emery_ricci(g, f, curv) + drift_modified_rm2(g, xi, alpha, curv) / 8.0
    return 2.0 * _integrate(g, f, T.norm2())


def nash_entropy(state) -> tuple[float, float]:
    """Extended Nash entropy and its production integral.

    ``N = -int (f - n(n-1) t / alpha) dw`` so that ``dN/dt`` equals
    ``int (R_Per + (alpha/4)|Rm|^2 + n(n-1)/alpha) dw``.
    """
    g = state.g
    if state.drift is not None and not state.drift.is_zero():
        raise GaugeError("the entropy is defined in the gauge xi = 0")
    f = as_scalar_field(g, state.f, "f")
    n, a, t = g.dim, state.alpha, state.t
    N = -_integrate(g, f, f - n * (n - 1) * t / a)
    curv = curvature_package(g)
    prod = _integrate(g, f, perelman_R(g, f) + 0.25 * a * curv.rm_norm2 + n * (n - 1) / a)
    return N, prod


@dataclass(frozen=True)
class EntropyRecord:
    t: float
    N: float
    N_production: float
    F: float
    F_ext: float
    F2: float
    RHS_bound: float


def entropy_record(state) -> EntropyRecord:
    """All functionals at one snapshot; ``N`` is NaN away from the ``xi = 0`` gauge."""
    g, f, a = state.g, state.f, state.alpha
    xi = state.drift.xi if state.drift is not None else VectorField.zeros(g)
    try:
        N, prod = nash_entropy(state)
    except GaugeError:
        N = prod = float("nan")
    return EntropyRecord(
        t=float(state.t),
        N=N,
        N_production=prod,
        F=perelman_F(g, f),
        F_ext=extended_F(g, f, xi=xi),
        F2=f2_energy(g, f, xi, a),
        RHS_bound=extended_F_bound(g, f, xi, a),
    )


# ---------------------------------------------------------------------------
# reduced grids for the eigenvalue problems


@dataclass(frozen=True, eq=False)
class ReducedGrid:
    """Nodal masses, edge conductances and scalar curvature on a 1-D reduction."""

    mass: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cond: np.ndarray
    R: np.ndarray
    weight: np.ndarray  # maps a nodal density to the grid (ones on the torus)

    @property
    def size(self) -> int:
        return self.mass.size

    def stiffness(self, edge_weight: np.ndarray | None = None) -> np.ndarray:
        c = self.cond if edge_weight is None else self.cond * edge_weight
        S = np.zeros((self.size, self.size))
        i, j = self.left, self.right
        np.add.at(S, (i, i), c)
        np.add.at(S, (j, j), c)
        np.add.at(S, (i, j), -c)
        np.add.at(S, (j, i), -c)
        return S

    def edge_mean(self, u: np.ndarray) -> np.ndarray:
        return 0.5 * (u[self.left] + u[self.right])

    def edge_energy(self, u: np.ndarray) -> np.ndarray:
        d = u[self.right] - u[self.left]
        return self.cond * d * d


def reduced_grid(g: Geometry, cells: int = ZONAL_CELLS) -> ReducedGrid:
    """Radial functions on the torus; zonal functions on a round sphere."""
    if isinstance(g, WarpedTorus):
        idx = np.arange(g.N)
        return ReducedGrid(
            mass=wo.node_mass(g, 0.0),
            left=idx,
            right=(idx + 1) % g.N,
            cond=wo.edge_conductance(g, 0.0),
            R=curvature_package(g).scalar,
            weight=np.ones(g.N),
        )
    if isinstance(g, ConstantCurvature) and g.K > 0:
        h = math.pi / cells
        theta = (np.arange(cells) + 0.5) * h
        dens = np.sin(theta) ** (g.n - 1)
        scale = g.quadrature.total / (h * float(np.sum(dens)))
        radius2 = g.sigma / g.K
        idx = np.arange(cells - 1)
        theta_e = (idx + 1) * h
        return ReducedGrid(
            mass=scale * h * dens,
            left=idx,
            right=idx + 1,
            cond=scale * np.sin(theta_e) ** (g.n - 1) / (radius2 * h),
            R=np.full(cells, float(curvature_package(g).scalar[0])),
            weight=np.ones(cells),
        )
    raise UnsupportedGeometryError(
        f"eigenvalue problems are reduced to one dimension only on the warped torus "
        f"and round spheres, not on {type(g).__name__}"
    )


def _lowest_pair(A: np.ndarray, d: np.ndarray, count: int):
    try:
        w, v = scipy.linalg.eigh(A, np.diag(d), subset_by_index=[0, count - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"dense eigensolver failed: {exc}") from exc
    return w, v


def _orient(v: np.ndarray) -> np.ndarray:
    """Deterministic sign: positive at the first node of maximal modulus."""
    k = int(np.argmax(np.abs(v)))
    return v if v[k] > 0 else -v


def _target_mass(g: Geometry, alpha: float) -> float:
    if not alpha > 0:
        raise InvalidCouplingError(f"coupling must be positive, got {alpha}")
    return alpha ** (g.dim / 2.0)


def perelman_lambda(g: Geometry, alpha: float) -> tuple[float, np.ndarray]:
    """Ground state of ``-4 Lap + R`` with ``int h^2 dmu = alpha^(n/2)``.

    Constant scalar curvature gives ``lambda = R`` with constant ``h``.
    """
    A = _target_mass(g, alpha)
    curv = curvature_package(g)
    if is_frame_class(g):
        return float(curv.scalar[0]), np.array([math.sqrt(A / g.quadrature.total)])
    grid = reduced_grid(g)
    H = 4.0 * grid.stiffness() + np.diag(grid.mass * grid.R)
    w, v = _lowest_pair(H, grid.mass, 1)
    h = _orient(v[:, 0])
    h = h * math.sqrt(A / float(np.sum(grid.mass * h * h)))
    if np.any(h <= 0):
        raise ConvergenceError("ground state is not positive")
    return float(w[0]), h


def weighted_lambda2(g: Geometry, f=0.0) -> tuple[float, np.ndarray]:
    """First nonzero eigenvalue of ``-Lap_w`` on zero-mean functions.

    The eigenfunction is normalised by ``int psi^2 dw = int dw``.
    """
    grid = reduced_grid(g)
    if isinstance(g, WarpedTorus):
        w = np.exp(-as_scalar_field(g, f, "f"))
    else:
        fc = as_scalar_field(g, f, "f")
        w = np.full(grid.size, math.exp(-fc[0]))
    return _weighted_pair(grid, w)


def _weighted_pair(grid: ReducedGrid, w: np.ndarray) -> tuple[float, np.ndarray]:
    d = grid.mass * w
    vals, vecs = _lowest_pair(grid.stiffness(grid.edge_mean(w)), d, 2)
    psi = _orient(vecs[:, 1])
    psi = psi * math.sqrt(float(np.sum(d)) / float(np.sum(d * psi * psi)))
    return float(vals[1]), psi


@dataclass(frozen=True, eq=False)
class EigenResult:
    lambda1: float
    lambda2: float
    Lambda: float
    h0: np.ndarray
    psi0: np.ndarray
    el_residuals: tuple[float, float]
    constraint_residuals: tuple[float, float, float]
    objective: float
    sweeps: int
    history: tuple[float, ...] = field(default=())

    @property
    def equality_residual(self) -> float:
        return abs(self.objective - self.Lambda) / max(abs(self.Lambda), 1e-300)

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "Lambda": self.Lambda,
            "objective": self.objective,
            "equality_residual": self.equality_residual,
            "el_residual_h": self.el_residuals[0],
            "el_residual_psi": self.el_residuals[1],
            "constraint_mean": self.constraint_residuals[0],
            "constraint_psi_norm": self.constraint_residuals[1],
            "constraint_h_norm": self.constraint_residuals[2],
            "sweeps": self.sweeps,
        }


def _lambda_objective(grid: ReducedGrid, h: np.ndarray, A: float):
    """Objective at ``h`` with the optimal ``psi``, plus that ``psi`` and ``lambda2``."""
    w = h * h
    lam2, psi = _weighted_pair(grid, w)
    psi = psi * math.sqrt(A / float(np.sum(grid.mass * w)))
    base = 4.0 * float(np.sum(grid.edge_energy(h))) + float(np.sum(grid.mass * grid.R * w))
    dirichlet = float(np.sum(grid.edge_energy(psi) * grid.edge_mean(w)))
    return base + dirichlet, lam2, psi


def _gradient_potential(grid: ReducedGrid, psi: np.ndarray) -> np.ndarray:
    """Nodal ``|grad psi|^2``: each edge energy split evenly between its ends."""
    e = grid.edge_energy(psi)
    acc = np.zeros(grid.size)
    np.add.at(acc, grid.left, 0.5 * e)
    np.add.at(acc, grid.right, 0.5 * e)
    return acc / grid.mass


def capital_lambda(
    g: Geometry, alpha: float, tol: float = 1e-8, max_sweeps: int = 2000
) -> EigenResult:
    """Minimise ``int ((R + |grad psi|^2) h^2 + 4 |grad h|^2) dmu`` over the constraint set.

    For fixed ``h`` the optimal ``psi`` is the first nonzero eigenfunction of
    the ``h^2``-weighted Laplacian, so the problem reduces to ``h`` alone.
    The ``h`` update solves the Schrodinger problem with potential
    ``R + |grad psi|^2 - lambda2 psi^2`` and is damped by backtracking until
    the objective decreases.
    """
    A = _target_mass(g, alpha)
    grid = reduced_grid(g)
    S4 = 4.0 * grid.stiffness()
    m = grid.mass
    _, h = perelman_lambda(g, alpha) if isinstance(g, WarpedTorus) else (None, None)
    if h is None:
        h = np.full(grid.size, math.sqrt(A / float(np.sum(m))))
    E, lam2, psi = _lambda_objective(grid, h, A)
    history = [E]
    for sweep in range(1, max_sweeps + 1):
        V = grid.R + _gradient_potential(grid, psi) - lam2 * psi * psi
        H = S4 + np.diag(m * V)
        lam1 = float(h @ H @ h) / A
        res_h = float(np.linalg.norm(H @ h - lam1 * m * h)) / max(
            float(np.linalg.norm(m * h)) * max(abs(lam1), 1.0), 1e-300
        )
        if res_h < tol:
            break
        w, v = _lowest_pair(H, m, 1)
        cand = _orient(v[:, 0])
        cand = cand * math.sqrt(A / float(np.sum(m * cand * cand)))
        tau = 1.0
        while True:
            trial = (1.0 - tau) * h + tau * cand
            trial = trial * math.sqrt(A / float(np.sum(m * trial * trial)))
            E_t, lam2_t, psi_t = _lambda_objective(grid, trial, A)
            if E_t <= E + 1e-14 * abs(E):
                break
            tau *= 0.5
            if tau < 1e-10:
                raise ConvergenceError(
                    f"objective stopped decreasing after {sweep} sweeps; "
                    f"last values {history[-5:]}"
                )
        h, E, lam2, psi = trial, E_t, lam2_t, psi_t
        history.append(E)
    else:
        raise ConvergenceError(
            f"no convergence in {max_sweeps} sweeps; last values {history[-5:]}"
        )
    if np.any(h <= 0):
        raise ConvergenceError("minimising h is not positive")
    w2 = h * h
    S_h = grid.stiffness(grid.edge_mean(w2))
    res_psi = float(np.linalg.norm(S_h @ psi - lam2 * m * w2 * psi)) / max(
        float(np.linalg.norm(m * w2 * psi)) * max(lam2, 1.0), 1e-300
    )
    cons = (
        abs(float(np.sum(m * w2 * psi))) / A,
        abs(float(np.sum(m * w2 * psi * psi)) - A) / A,
        abs(float(np.sum(m * w2)) - A) / A,
    )
    return EigenResult(
        lambda1=lam1,
        lambda2=lam2,
        Lambda=A * (lam1 + lam2),
        h0=h,
        psi0=psi,
        el_residuals=(res_h, res_psi),
        constraint_residuals=cons,
        objective=E,
        sweeps=len(history) - 1,
        history=tuple(history),
    )


def futaki_bound(diam: float, C0: float) -> float:
    """``sup_{0<s<1} 4 s (1-s) a + s C0`` with ``a = pi^2 / diam^2``."""
    if not diam > 0:
        raise InvalidGeometryError(f"diameter must be positive, got {diam}")
    a = math.pi**2 / diam**2
    s = (4.0 * a + C0) / (8.0 * a)
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return C0
    return 4.0 * s * (1.0 - s) * a + s * C0


def diameter(g: Geometry) -> float:
    """Exact on round spheres; an upper bound on the torus."""
    if isinstance(g, ConstantCurvature) and g.K > 0:
        return math.pi * math.sqrt(g.sigma / g.K)
    if isinstance(g, WarpedTorus):
        return 0.5 * g.h * float(np.sum(g.rho)) + math.pi * float(np.max(g.phi))
    raise UnsupportedGeometryError(f"no diameter routine for {type(g).__name__}")


def bakry_emery_lower_bound(g: Geometry, f=0.0) -> float:
    """Largest ``C0`` with ``Ric_BE >= C0 g`` on the sampled points."""
    return bakry_emery_ricci(g, as_scalar_field(g, f, "f")).min_eigenvalue()


# ---------------------------------------------------------------------------
# monotonicity reporting


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    t0: float
    t1: float
    quotient: float
    bound: float
    slack: float
    tolerance: float
    passed: bool


@dataclass
class MonotonicityReport:
    checks: list[InequalityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst_slack(self, name: str) -> float:
        vals = [c.slack for c in self.checks if c.name == name]
        return min(vals) if vals else float("nan")

    def summary(self) -> dict:
        out = {}
        for name in dict.fromkeys(c.name for c in self.checks):
            rows = [c for c in self.checks if c.name == name]
            out[name] = {
                "count": len(rows),
                "failures": sum(not c.passed for c in rows),
                "min_slack": min(c.slack for c in rows),
                "max_slack": max(c.slack for c in rows),
                "pass": all(c.passed for c in rows),
            }
        return out

    def to_json(self) -> str:
        groups = []
        for name in dict.fromkeys(c.name for c in self.checks):
            rows = [c for c in self.checks if c.name == name]
            groups.append(
                {
                    "name": name,
                    "times": [[c.t0, c.t1] for c in rows],
                    "quotient": [c.quotient for c in rows],
                    "bound": [c.bound for c in rows],
                    "slack": [c.slack for c in rows],
                    "tolerance": [c.tolerance for c in rows],
                    "pass": all(c.passed for c in rows),
                }
            )
        return json.dumps({"inequalities": groups, "pass": self.passed}, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = list(asdict(self.checks[0]).keys()) if self.checks else ["name"]
        writer.writerow(cols)
        for c in self.checks:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) else v for v in asdict(c).values()]
            )
        return buf.getvalue()


def _fmt(x: float) -> str:
    return "%.17g" % x


def monotonicity_report(
    traj,
    records: list[EntropyRecord] | None = None,
    lambdas: list[float] | None = None,
    tolerance: float = 0.0,
) -> MonotonicityReport:
    """Difference quotients against the lower bounds, one check per snapshot pair.

    Nash quotients are checked against zero and the production against zero
    whenever the run is in the ``xi = 0`` gauge.  On DeTurck trajectories the
    extended energy quotient and an optional ``Lambda`` series are checked
    against the trapezoidal mean of the same bound.
    """
    if records is None:
        records = [entropy_record(s) for s in traj.states]
    if len(records) < 3:
        raise InsufficientDataError(f"need at least 3 snapshots, got {len(records)}")
    # the extended bound relies on the normalised drift of the DeTurck system
    extended = getattr(traj, "mode", None) == "deturck"
    checks = []
    for r in records:
        if math.isfinite(r.N_production):
            checks.append(
                InequalityCheck(
                    "nash_production", r.t, r.t, r.N_production, 0.0,
                    r.N_production, tolerance, r.N_production >= -tolerance,
                )
            )
    for a, b in zip(records[:-1], records[1:]):
        dt = b.t - a.t
        if math.isfinite(a.N) and math.isfinite(b.N):
            q = (b.N - a.N) / dt
            checks.append(InequalityCheck("nash_rate", a.t, b.t, q, 0.0, q, tolerance, q >= -tolerance))
        if extended:
            q = (b.F_ext - a.F_ext) / dt
            bound = 0.5 * (a.RHS_bound + b.RHS_bound)
            checks.append(
                InequalityCheck(
                    "extended_F", a.t, b.t, q, bound, q - bound, tolerance, q - bound >= -tolerance
                )
            )
    if lambdas is not None and extended:
        if len(lambdas) != len(records):
            raise InsufficientDataError("one Lambda value per snapshot is required")
        for a, b, la, lb in zip(records[:-1], records[1:], lambdas[:-1], lambdas[1:]):
            q = (lb - la) / (b.t - a.t)
            bound = 0.5 * (a.RHS_bound + b.RHS_bound)
            checks.append(
                InequalityCheck(
                    "capital_lambda", a.t, b.t, q, bound, q - bound, tolerance, q - bound >= -tolerance
                )
            )
    return MonotonicityReport(checks)
