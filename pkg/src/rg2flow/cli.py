"""Scenario runner: ``rg2flow {flow,entropy,eigen,verify,batch} --config FILE --out DIR``.

Exit codes: 0 when every verification passes, 2 when one fails, 1 on a
runtime or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .curvature import divdiv_riemann
from .errors import ConfigError, RG2Error
from .fields import DriftField, VectorField
from .flow import (
    FlowState,
    Trajectory,
    deturck_run,
    harmonic_drift,
    integrate_rg2,
    rescale_state,
    scaling_defect,
    seesaw_solve,
    verify_scale_symmetry,
)
from .geometry import WarpedTorus, build_geometry, fourier_profile, is_frame_class
from .variational import (
    bakry_emery_lower_bound,
    capital_lambda,
    diameter,
    entropy_record,
    futaki_bound,
    monotonicity_report,
    perelman_lambda,
)

MODES = ("plain", "scale-invariant", "deturck", "seesaw")
EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2

PROFILE_KEYS = {"mean", "cos", "sin"}
SCHEMA = {
    "name": None,
    "geometry": {
        "kind": None, "n": None, "K": None, "sigma": None, "ref_volume": None,
        "structure": None, "coeffs": None, "N": None, "L": None, "rho": PROFILE_KEYS, "phi": PROFILE_KEYS,
    },
    "density": {"f": PROFILE_KEYS},
    "drift": {"psi": PROFILE_KEYS, "harmonic": None, "components": None, "twist": None},
    "run": {"mode": None, "alpha": None, "dt": None, "steps": None, "T0": None},
    "verify": {
        "scaling": None, "monotonicity": None, "eigen": None, "harnack": None, "tolerance": None,
    },
}


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _check_keys(data: dict, schema, path: str) -> None:
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if isinstance(schema, dict):
            if key not in schema:
                raise ConfigError(sub, "unknown key")
            if isinstance(value, dict):
                if schema[key] is None:
                    raise ConfigError(sub, "expected a value, got a table")
                _check_keys(value, schema[key], sub)
        elif isinstance(schema, set):
            if key not in schema:
                raise ConfigError(sub, "unknown profile key; use mean, cos or sin")


@dataclass
class ScenarioConfig:
    name: str
    geometry: dict
    density: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    mode: str = "scale-invariant"
    alpha: float | None = None
    dt: float = 1e-3
    steps: int = 10
    T0: float | None = None
    scaling: list = field(default_factory=list)
    monotonicity: bool = True
    eigen: bool = False
    harnack: bool = False
    tolerance: float = 0.0

    @classmethod
    def from_dict(cls, data: dict, default_name: str = "scenario") -> "ScenarioConfig":
        _check_keys(data, SCHEMA, "")
        if "geometry" not in data:
            raise ConfigError("geometry", "missing table")
        run = data.get("run", {})
        ver = data.get("verify", {})
        cfg = cls(
            name=str(data.get("name", default_name)),
            geometry=dict(data["geometry"]),
            density=dict(data.get("density", {})),
            drift=dict(data.get("drift", {})),
            mode=run.get("mode", "scale-invariant"),
            alpha=run.get("alpha"),
            dt=run.get("dt", 1e-3),
            steps=run.get("steps", 10),
            T0=run.get("T0"),
            scaling=list(ver.get("scaling", [])),
            monotonicity=bool(ver.get("monotonicity", True)),
            eigen=bool(ver.get("eigen", False)),
            harnack=bool(ver.get("harnack", False)),
            tolerance=float(ver.get("tolerance", 0.0)),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(str(path), f"cannot read config: {exc}") from exc
        return cls.from_dict(data, path.stem)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError("run.mode", f"must be one of {', '.join(MODES)}")
        if self.mode == "plain" and self.alpha is None:
            raise ConfigError("run.alpha", "plain mode needs an explicit coupling")
        if self.mode != "plain" and self.alpha is not None:
            raise ConfigError("run.alpha", f"{self.mode} mode derives the coupling from the measure")
        if self.alpha is not None and not float(self.alpha) > 0:
            raise ConfigError("run.alpha", "must be positive")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError("run.steps", "must be a positive integer")
        if not float(self.dt) > 0:
            raise ConfigError("run.dt", "must be positive")
        if self.T0 is not None and self.dt * self.steps > self.T0 * (1.0 + 1e-12):
            raise ConfigError("run.steps", "dt * steps exceeds T0")
        for k, lam in enumerate(self.scaling):
            if not float(lam) > 0:
                raise ConfigError(f"verify.scaling[{k}]", "scale factors must be positive")
        if self.mode == "plain" and self.scaling:
            raise ConfigError("verify.scaling", "parabolic rescaling needs the derived coupling")

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# scenario assembly


def build_state(cfg: ScenarioConfig) -> FlowState:
    try:
        g = build_geometry(cfg.geometry)
    except KeyError as exc:
        raise ConfigError(f"geometry.{exc.args[0]}", "missing key") from exc
    except (RG2Error, TypeError, ValueError) as exc:
        raise ConfigError("geometry", str(exc)) from exc
    f_spec = cfg.density.get("f", 0.0)
    if isinstance(g, WarpedTorus):
        f = fourier_profile(f_spec, g.nodes, g.L)
    else:
        if isinstance(f_spec, dict) and (f_spec.get("cos") or f_spec.get("sin")):
            raise ConfigError("density.f", "frame classes take a constant density exponent")
        f = float(f_spec["mean"]) if isinstance(f_spec, dict) else float(f_spec)
    drift = _build_drift(cfg, g, f)
    alpha = None if cfg.alpha is None else float(cfg.alpha)
    return FlowState.initial(g, f, drift, alpha=alpha)


def _build_drift(cfg: ScenarioConfig, g, f) -> DriftField | None:
    d = cfg.drift
    if not d:
        return None
    if isinstance(g, WarpedTorus):
        if "components" in d:
            raise ConfigError("drift.components", "torus drifts use psi, harmonic and twist")
        psi = fourier_profile(d.get("psi", 0.0), g.nodes, g.L)
        perp = harmonic_drift(g, f, float(d.get("harmonic", 0.0)))
        perp = VectorField(perp.data, float(d.get("twist", 0.0)))
        return DriftField.from_parts(g, psi, perp)
    for key in ("psi", "harmonic", "twist"):
        if key in d:
            raise ConfigError(f"drift.{key}", "frame classes take Killing components only")
    comps = d.get("components")
    if comps is None:
        return None
    if len(comps) != g.dim:
        raise ConfigError("drift.components", f"expected {g.dim} entries")
    return DriftField(VectorField(np.asarray(comps, dtype=float)))


def run_flow(cfg: ScenarioConfig, state: FlowState) -> Trajectory:
    dt, steps = float(cfg.dt), cfg.steps
    if cfg.mode == "deturck":
        return deturck_run(state, dt, steps)
    frame = is_frame_class(state.g)
    if cfg.mode == "seesaw":
        return seesaw_solve(state, dt * steps, dt, drift="evolve")
    metric_mode = "plain" if cfg.mode == "plain" else "scale-invariant"
    if frame:
        traj = integrate_rg2(state, dt, steps, mode=metric_mode)
        if state.drift is not None:
            traj.states = [s.replace(drift=state.drift) for s in traj.states]
        return traj
    return seesaw_solve(state, dt * steps, dt, drift="frozen", metric_mode=metric_mode)


# ---------------------------------------------------------------------------
# output


def coefficient_columns(g) -> list[str]:
    if isinstance(g, WarpedTorus):
        return ["rho2_min", "rho2_max", "phi2_min", "phi2_max"]
    return g.coefficient_names()


TRAJ_TAIL = ["alpha_g", "margin", "R_min", "R_max", "mass_residual", "N", "F", "F_ext", "F2"]
ENTROPY_COLUMNS = ["t", "N", "N_production", "F", "F_ext", "F2", "RHS_bound"]


def write_trajectory(path: Path, traj: Trajectory, records) -> None:
    g0 = traj.states[0].g
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *coefficient_columns(g0), *TRAJ_TAIL])
        for s, d, r in zip(traj.states, traj.diagnostics, records):
            row = [s.t, *s.g.coefficient_summary(), d["alpha_g"], d["margin"], d["R_min"],
                   d["R_max"], d["mass_residual"], r.N, r.F, r.F_ext, r.F2]
            w.writerow([_fmt(float(x)) for x in row])


def write_entropy(path: Path, records) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENTROPY_COLUMNS)
        for r in records:
            w.writerow([_fmt(float(getattr(r, c))) for c in ENTROPY_COLUMNS])


def write_plot_data(path: Path, columns: list[str], rows) -> None:
    """Whitespace-separated columns with a ``#`` header, readable by gnuplot."""
    lines = ["# " + " ".join(columns)]
    lines += [" ".join(_fmt(float(x)) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def manifest(cfg: ScenarioConfig, command: str, halted: str | None) -> dict:
    return {
        "command": command,
        "config": cfg.as_dict(),
        "halted": halted,
        "versions": {
            "rg2flow": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


# ---------------------------------------------------------------------------
# verifications


def verify_scaling(cfg: ScenarioConfig, state: FlowState, traj: Trajectory) -> dict:
    out = {"pass": True, "cases": []}
    if cfg.mode == "plain":
        return out
    out["rhs_defect"] = scaling_defect(state.g, state.alpha, 2.0)
    for lam in cfg.scaling:
        lam = float(lam)
        scaled_cfg = ScenarioConfig(**{**cfg.as_dict(), "dt": cfg.dt * lam})
        scaled = rescale_state(state, lam)
        if cfg.mode in ("seesaw", "deturck"):
            # the quartic drift term breaks the symmetry; compare frozen-drift runs
            ref = _frozen_run(cfg, state)
            got = _frozen_run(scaled_cfg, scaled)
        else:
            ref, got = traj, run_flow(scaled_cfg, scaled)
        case = verify_scale_symmetry(ref, lam, got)
        case["pass"] = case["max_deviation"] < 1e-6
        out["pass"] &= case["pass"]
        out["cases"].append(case)
    return out


def _frozen_run(cfg: ScenarioConfig, state: FlowState) -> Trajectory:
    if is_frame_class(state.g):
        traj = integrate_rg2(state, float(cfg.dt), cfg.steps, mode="scale-invariant")
        if state.drift is not None:
            traj.states = [s.replace(drift=state.drift) for s in traj.states]
        return traj
    return seesaw_solve(state, cfg.dt * cfg.steps, float(cfg.dt), drift="frozen")


def verify_eigen(state: FlowState) -> dict:
    g, a = state.g, state.alpha
    res = capital_lambda(g, a)
    lam, _ = perelman_lambda(g, a)
    A = a ** (g.dim / 2.0)
    out = res.to_dict()
    out["perelman_lambda"] = lam
    out["lower_bound"] = A * lam
    checks = [
        max(res.constraint_residuals) < 1e-8,
        max(res.el_residuals) < 1e-8,
        res.equality_residual < 1e-8,
        res.Lambda >= A * lam,
    ]
    try:
        diam = diameter(g)
    except RG2Error:
        diam = None
    if diam is not None:
        C0 = bakry_emery_lower_bound(g, state.f)
        fb = futaki_bound(diam, C0)
        out.update(diameter=diam, C0=C0, futaki_bound=fb)
        checks.append(res.Lambda >= A * lam + fb)
    out["pass"] = all(checks)
    return out


def verify_harnack(state: FlowState) -> dict:
    g = state.g
    if is_frame_class(g):
        r = divdiv_riemann(g, state.f).max_residual()
        return {"residual": r, "pass": r < 1e-10}
    coarse = divdiv_riemann(g, state.f).max_residual()
    # refine by band-limited resampling of the stored profiles
    fine = WarpedTorus(g.L, _resample(g.rho, 2 * g.N), _resample(g.phi, 2 * g.N))
    ff = _resample(state.f, 2 * g.N)
    r_fine = divdiv_riemann(fine, ff).max_residual()
    order = math.log2(coarse / r_fine) if r_fine > 0 and coarse > 0 else float("inf")
    passed = coarse == 0.0 or order >= 1.9
    return {"residual": coarse, "residual_refined": r_fine, "order": order, "pass": passed}


def _resample(u: np.ndarray, n: int) -> np.ndarray:
    """Band-limited interpolation of a periodic sample to ``n`` points."""
    spec = np.fft.rfft(u)
    out = np.zeros(n // 2 + 1, dtype=complex)
    out[: spec.size] = spec
    if u.size % 2 == 0:
        out[u.size // 2] *= 0.5
    return np.fft.irfft(out, n) * (n / u.size)


# ---------------------------------------------------------------------------
# commands


def run_scenario(cfg: ScenarioConfig, out_dir: Path, command: str = "flow", check_level: str = "full") -> dict:
    """Run one scenario and write its artefacts; returns the verification summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    halted = None
    verification: dict = {}
    state = build_state(cfg)
    try:
        if command == "eigen":
            verification["eigen"] = verify_eigen(state)
            write_json(out_dir / "eigen.json", verification["eigen"])
        else:
            traj = run_flow(cfg, state)
            halted = traj.halted
            records = [entropy_record(s) for s in traj.states]
            write_trajectory(out_dir / "trajectory.csv", traj, records)
            write_entropy(out_dir / "entropy.csv", records)
            write_plot_data(
                out_dir / "entropy.dat",
                ["t", "F", "F_ext", "RHS_bound"],
                [(r.t, r.F, r.F_ext, r.RHS_bound) for r in records],
            )
            write_plot_data(
                out_dir / "margin.dat",
                ["t", "margin", "R_min", "R_max"],
                [(s.t, d["margin"], d["R_min"], d["R_max"]) for s, d in zip(traj.states, traj.diagnostics)],
            )
            if command in ("entropy", "verify") or cfg.monotonicity:
                if len(records) >= 3:
                    rep = monotonicity_report(traj, records, tolerance=cfg.tolerance)
                    (out_dir / "monotonicity.json").write_text(rep.to_json() + "\n")
                    (out_dir / "monotonicity.csv").write_text(rep.to_csv())
                    verification["monotonicity"] = {"pass": rep.passed, **rep.summary()}
            if command == "verify":
                if cfg.scaling:
                    lams = cfg.scaling if check_level == "full" else cfg.scaling[:1]
                    sub = ScenarioConfig(**{**cfg.as_dict(), "scaling": lams})
                    verification["scaling"] = verify_scaling(sub, state, traj)
                if cfg.eigen and check_level == "full":
                    verification["eigen"] = verify_eigen(state)
                if cfg.harnack:
                    verification["harnack"] = verify_harnack(state)
    except RG2Error as exc:
        halted = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        if halted:
            (out_dir / "HALTED").write_text(halted + "\n")
        write_json(out_dir / "manifest.json", manifest(cfg, command, halted))
        if verification:
            write_json(out_dir / "verification.json", verification)
    return verification


def _all_pass(verification: dict) -> bool:
    return all(v.get("pass", True) for v in verification.values() if isinstance(v, dict))


def _batch_worker(args) -> tuple[str, int, str]:
    path, out_dir, check_level = args
    try:
        cfg = ScenarioConfig.load(path)
        ver = run_scenario(cfg, Path(out_dir) / cfg.name, "verify", check_level)
        return cfg.name, EXIT_OK if _all_pass(ver) else EXIT_FAILED, ""
    except (RG2Error, OSError) as exc:
        return Path(path).stem, EXIT_ERROR, f"{type(exc).__name__}: {exc}"


def run_batch(batch_path: Path, out_dir: Path, check_level: str) -> int:
    try:
        data = tomllib.loads(batch_path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(batch_path), f"cannot read batch file: {exc}") from exc
    for key in data:
        if key not in ("scenarios", "workers"):
            raise ConfigError(key, "unknown key")
    if "scenarios" not in data:
        raise ConfigError("scenarios", "missing list of scenario files")
    paths = [str((batch_path.parent / p).resolve()) for p in data["scenarios"]]
    workers = int(data.get("workers", 1))
    jobs = [(p, str(out_dir), check_level) for p in paths]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_worker, jobs))
    else:
        results = [_batch_worker(j) for j in jobs]
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = [{"scenario": n, "exit_code": c, "error": e} for n, c, e in results]
    write_json(out_dir / "batch_summary.json", summary)
    codes = [c for _, c, _ in results]
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_FAILED if EXIT_FAILED in codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rg2flow", description="Two-loop RG flow scenarios")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (
        ("flow", "integrate a scenario and write trajectory and entropy tables"),
        ("entropy", "integrate and write the monotonicity report"),
        ("eigen", "solve the eigenvalue problems on the initial metric"),
        ("verify", "integrate and run every enabled verification"),
        ("batch", "run a list of scenarios in parallel"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="scenario (or batch) TOML file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--check-level", choices=("fast", "full"), default="full")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    out = Path(args.out)
    try:
        if args.command == "batch":
            code = run_batch(Path(args.config), out, args.check_level)
        else:
            cfg = ScenarioConfig.load(args.config)
            ver = run_scenario(cfg, out, args.command, args.check_level)
            code = EXIT_OK if _all_pass(ver) else EXIT_FAILED
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except RG2Error as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{args.command}: exit {code}, wall time {time.perf_counter() - start:.3f} s")
    return code


if __name__ == "__main__":
    sys.exit(main())
