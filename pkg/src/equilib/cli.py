"""Run orchestration: JSON config in, reports and plot data out.

Modes
-----
solve           calibrate the obstacle constants, extract the measure,
                write the report and requested field dumps.
verify          solve, then run every structural check; exit 0 only if
                all of them hold.
halfspace-scan  analytic concentration verdicts for a list of half-plane
                offsets.
oracle-compare  coarse-grid Frank-Wolfe cross-validation of the solver.

Exit codes: 0 success / verification passed, 1 verification failed,
2 invalid configuration, 3 numerical failure (non-convergence).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .extraction import ExtractedMeasure, extract_measure, run_property_checks
from .fields import Grid2D
from .geometry import (Region, circular_law_mass, region_from_config,
                       region_to_config)
from .halfspace import is_fully_singular
from .obstacle import (CalibrationError, CalibrationResult,
                       calibrate_constants)
from .oracle import (direct_minimize, kkt_check, lattice_nodes,
                     rasterize_extracted, SimplexMeasure)
from .potential import DiscreteMeasure, energy

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    region: Optional[Region] = None
    p: float = 1.0
    box_radius: float = 4.0
    n: int = 401
    omega: Optional[float] = None
    tol: float = 1e-8
    max_iter: Optional[int] = None
    tol_mass: float = 0.005
    output_dir: str = "out"
    emit: dict = field(default_factory=lambda: {
        "density_csv": True, "density_pgm": False, "singular_csv": True,
        "report_json": True, "fields_debug": False})
    scan_a_values: tuple = ()
    oracle_n: int = 32
    oracle_iters: int = 10000

    def echo(self) -> dict:
        d = {
            "mode": self.mode,
            "p": self.p,
            "grid": {"R": self.box_radius, "n": self.n},
            "solver": {"omega": self.omega, "tol": self.tol,
                       "max_iter": self.max_iter, "tol_mass": self.tol_mass},
            "emit": dict(self.emit),
        }
        if self.region is not None:
            d["region"] = region_to_config(self.region)
        if self.scan_a_values:
            d["scan"] = {"a_values": list(self.scan_a_values)}
        if self.mode == "oracle-compare":
            d["oracle"] = {"n": self.oracle_n, "iters": self.oracle_iters}
        return d


MODES = ("solve", "verify", "halfspace-scan", "oracle-compare")


def parse_config(raw: dict, mode: Optional[str] = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = RunConfig(mode=mode or raw.get("mode", ""))
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if "grid" in raw:
        cfg.box_radius = float(raw["grid"].get("R", cfg.box_radius))
        cfg.n = int(raw["grid"].get("n", cfg.n))
    solver = raw.get("solver", {})
    cfg.omega = solver.get("omega", None)
    if cfg.omega is not None:
        cfg.omega = float(cfg.omega)
    cfg.tol = float(solver.get("tol", cfg.tol))
    cfg.max_iter = solver.get("max_iter", None)
    if cfg.max_iter is not None:
        cfg.max_iter = int(cfg.max_iter)
    cfg.tol_mass = float(solver.get("tol_mass", cfg.tol_mass))
    cfg.output_dir = str(raw.get("output_dir", cfg.output_dir))
    cfg.emit.update(raw.get("emit", {}))

    if cfg.mode == "halfspace-scan":
        scan = raw.get("scan", {})
        if "a_values" not in scan:
            raise ConfigError("halfspace-scan needs scan.a_values")
        cfg.scan_a_values = tuple(float(a) for a in scan["a_values"])
        return cfg

    if "region" not in raw:
        raise ConfigError("config needs a region")
    try:
        cfg.region = region_from_config(raw["region"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid region: {exc}") from exc
    if "p" not in raw:
        raise ConfigError("config needs the constrained mass p")
    cfg.p = float(raw["p"])
    if not 0.0 < cfg.p <= 1.0:
        raise ConfigError("p must lie in (0, 1]")
    mass_u = circular_law_mass(cfg.region)
    if cfg.p <= mass_u:
        raise ConfigError(
            f"p={cfg.p} does not exceed the unconstrained mass of the "
            f"region ({mass_u:.6f}); the constraint would be inactive")
    if mass_u >= 1.0 - 1e-12:
        raise ConfigError("region covers the whole unit disk; no part of "
                          "the disk is left free")

    if cfg.mode == "oracle-compare":
        oracle = raw.get("oracle", {})
        cfg.oracle_n = int(oracle.get("n", cfg.oracle_n))
        cfg.oracle_iters = int(oracle.get("iters", cfg.oracle_iters))
    return cfg


def load_config(path: str, mode: Optional[str] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(raw, mode=mode)


# ---------------------------------------------------------------------------
# solve pipeline
# ---------------------------------------------------------------------------

@dataclass
class SolveBundle:
    calibration: CalibrationResult
    extracted: ExtractedMeasure
    report: dict


def _extracted_to_measure(extracted: ExtractedMeasure) -> DiscreteMeasure:
    grid = extracted.regular_density.grid
    cells = np.maximum(extracted.regular_density.values, 0.0) * grid.h ** 2
    boundary = [(s, float(gv * s.arc_weight))
                for s, gv in zip(extracted.samples, extracted.g)]
    return DiscreteMeasure(grid, cells, boundary).normalized()


def solve_pipeline(cfg: RunConfig) -> SolveBundle:
    timings = {}
    t0 = time.perf_counter()
    grid = Grid2D(cfg.box_radius, cfg.n)
    calib = calibrate_constants(cfg.region, cfg.p, grid,
                                tol_mass=cfg.tol_mass, omega=cfg.omega,
                                tol=cfg.tol, max_iter=cfg.max_iter)
    timings["calibrate_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    extracted = extract_measure(calib.result.H, cfg.region)
    props = run_property_checks(calib.result.H, extracted, cfg.region,
                                calib.c1, calib.c2, cfg.p,
                                calib.mass_in_region)
    timings["extract_s"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    e_value = energy(_extracted_to_measure(extracted))
    timings["energy_s"] = time.perf_counter() - t2

    report = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": cfg.echo(),
        "grid": {"R": cfg.box_radius, "n": cfg.n, "h": grid.h},
        "c1": calib.c1,
        "c2": "-inf" if math.isinf(calib.c2) else calib.c2,
        "far_field_center": list(calib.center),
        "iterations": calib.result.iterations,
        "residual": calib.result.complementarity_residual,
        "converged": calib.result.converged,
        "solve_count": calib.solve_count,
        "mass_total": calib.total_mass,
        "mass_in_region": calib.mass_in_region,
        "mass_regular": extracted.mass_regular,
        "mass_singular": extracted.mass_singular,
        "g_min_raw": extracted.g_min_raw,
        "energy": e_value,
        "property_report": props.to_dict(),
        "properties_ok": props.all_ok(),
        "region_kind": region_to_config(cfg.region)["type"],
        "approximate_boundary_hypothesis":
            region_to_config(cfg.region)["type"] == "polygon",
        "timings": timings,
    }
    return SolveBundle(calibration=calib, extracted=extracted, report=report)


# ---------------------------------------------------------------------------
# artifact writers (deterministic: fixed orders, repr floats)
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def write_report_json(report: dict, path: Path) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def write_density_csv(extracted: ExtractedMeasure, path: Path) -> None:
    grid = extracted.regular_density.grid
    xs = grid.xs
    vals = extracted.regular_density.values
    with path.open("w", encoding="utf-8") as f:
        f.write("x,y,rho\n")
        for i in range(grid.n):
            for j in range(grid.n):
                f.write(f"{_fmt(xs[i])},{_fmt(xs[j])},{_fmt(vals[i, j])}\n")


def write_density_pgm(extracted: ExtractedMeasure, path: Path) -> None:
    vals = extracted.regular_density.values
    top = float(vals.max())
    scale = 255.0 / top if top > 0 else 0.0
    pix = np.clip(np.rint(vals * scale), 0, 255).astype(int)
    n = pix.shape[0]
    lines = [f"P2\n{n} {n}\n255\n"]
    # rows scan decreasing y so the image is oriented like the plane
    for j in range(n - 1, -1, -1):
        lines.append(" ".join(str(pix[i, j]) for i in range(n)) + "\n")
    path.write_text("".join(lines), encoding="utf-8")


def write_singular_csv(extracted: ExtractedMeasure, path: Path) -> None:
    with path.open("w", encoding="utf-8") as f:
        f.write("s,x,y,g\n")
        s = 0.0
        for sample, gv in zip(extracted.samples, extracted.g):
            mid = s + 0.5 * sample.arc_weight
            f.write(f"{_fmt(mid)},{_fmt(sample.position.x)},"
                    f"{_fmt(sample.position.y)},{_fmt(gv)}\n")
            s += sample.arc_weight


def write_fields_debug(bundle: SolveBundle, outdir: Path) -> None:
    grid = bundle.calibration.result.H.grid
    xs = grid.xs
    H = bundle.calibration.result.H.values
    with (outdir / "potential.csv").open("w", encoding="utf-8") as f:
        f.write("x,y,H\n")
        for i in range(grid.n):
            for j in range(grid.n):
                f.write(f"{_fmt(xs[i])},{_fmt(xs[j])},{_fmt(H[i, j])}\n")


def emit_artifacts(cfg: RunConfig, bundle: SolveBundle, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.emit.get("report_json", True):
        write_report_json(bundle.report, outdir / "report.json")
    if cfg.emit.get("density_csv", True):
        write_density_csv(bundle.extracted, outdir / "density.csv")
    if cfg.emit.get("density_pgm", False):
        write_density_pgm(bundle.extracted, outdir / "density.pgm")
    if cfg.emit.get("singular_csv", True):
        write_singular_csv(bundle.extracted, outdir / "singular.csv")
    if cfg.emit.get("fields_debug", False):
        write_fields_debug(bundle, outdir)


# ---------------------------------------------------------------------------
# mode runners
# ---------------------------------------------------------------------------

def run_solve(cfg: RunConfig, outdir: Path) -> int:
    try:
        bundle = solve_pipeline(cfg)
    except CalibrationError as exc:
        outdir.mkdir(parents=True, exist_ok=True)
        write_report_json({"schema_version": SCHEMA_VERSION,
                           "config": cfg.echo(), "error": str(exc)},
                          outdir / "report.json")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    emit_artifacts(cfg, bundle, outdir)
    if not bundle.calibration.result.converged:
        print("solver did not converge; partial report written",
              file=sys.stderr)
        return EXIT_NUMERICS
    print(f"c1={bundle.report['c1']:.6f} c2={bundle.report['c2']} "
          f"mass={bundle.report['mass_total']:.6f} "
          f"in_region={bundle.report['mass_in_region']:.6f}")
    return EXIT_OK

def run_verify(cfg: RunConfig, outdir: Path) -> int:
    status = run_solve(cfg, outdir)
    if status != EXIT_OK:
        return status
    report = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    ok = bool(report["properties_ok"])
    for key, val in sorted(report["property_report"].items()):
        if key.endswith("_ok"):
            print(f"  {key:<18} {'pass' if val else 'FAIL'}")
    print("verification:", "pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def run_halfspace_scan(cfg: RunConfig, outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for a in cfg.scan_a_values:
        v = is_fully_singular(a)
        rows.append((a, v))
        print(f"a={a:g}: fully_singular={v.fully_singular} "
              f"worst_margin={v.worst_margin:.3e}")
    with (outdir / "halfspace_scan.csv").open("w", encoding="utf-8") as f:
        f.write("a,verdict,worst_margin,worst_b,worst_y\n")
        for a, v in rows:
            f.write(f"{_fmt(a)},{int(v.fully_singular)},"
                    f"{_fmt(v.worst_margin)},{_fmt(v.worst_b)},"
                    f"{_fmt(v.worst_y)}\n")
    if cfg.emit.get("report_json", True):
        write_report_json({
            "schema_version": SCHEMA_VERSION, "config": cfg.echo(),
            "verdicts": [{"a": a, "fully_singular": v.fully_singular,
                          "worst_margin": v.worst_margin,
                          "worst_b": v.worst_b, "worst_y": v.worst_y}
                         for a, v in rows]}, outdir / "report.json")
    return EXIT_OK


def run_oracle_compare(cfg: RunConfig, outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        bundle = solve_pipeline(cfg)
    except CalibrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    nodes = lattice_nodes(cfg.box_radius, cfg.oracle_n)
    mu, info = direct_minimize(cfg.region, cfg.p, nodes,
                               iters=cfg.oracle_iters)
    c1_est, c2_est, violation = kkt_check(mu)
    solver_masses = rasterize_extracted(bundle.extracted, nodes)
    solver_mu = SimplexMeasure(nodes=nodes, masses=solver_masses,
                               inside=mu.inside, p=cfg.p)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.echo(),
        "energy_oracle": info.energy,
        "energy_solver": solver_mu.energy(),
        "l1_distance": float(np.abs(mu.masses - solver_masses).sum()),
        "duality_gap": info.duality_gap,
        "c1_est": c1_est,
        "c2_est": "-inf" if math.isinf(c2_est) else c2_est,
        "kkt_violation": violation,
        "c1_solver": bundle.calibration.c1,
        "c2_solver": ("-inf" if math.isinf(bundle.calibration.c2)
                      else bundle.calibration.c2),
    }
    write_report_json(payload, outdir / "oracle_compare.json")
    print(f"energy oracle={payload['energy_oracle']:.6f} "
          f"solver={payload['energy_solver']:.6f} "
          f"l1={payload['l1_distance']:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="equilib",
        description="Constrained equilibrium measures via a two-constant "
                    "obstacle problem")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides config)")
    parser.add_argument("--omega", type=float, default=None,
                        help="PSOR relaxation factor override")
    parser.add_argument("--tol", type=float, default=None,
                        help="complementarity residual tolerance override")
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--tol-mass", type=float, default=None)
    args = parser.parse_args(argv)

    # EQUILIB_THREADS caps worker parallelism; every algorithm here runs
    # single-threaded, so any positive cap is honored as stated.
    threads = os.environ.get("EQUILIB_THREADS")
    if threads is not None and not threads.isdigit():
        print("EQUILIB_THREADS must be a positive integer", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = load_config(args.config, mode=args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.omega is not None:
        cfg.omega = args.omega
    if args.tol is not None:
        cfg.tol = args.tol
    if args.max_iter is not None:
        cfg.max_iter = args.max_iter
    if args.tol_mass is not None:
        cfg.tol_mass = args.tol_mass
    outdir = Path(args.out) if args.out else Path(cfg.output_dir)

    runner = {"solve": run_solve, "verify": run_verify,
              "halfspace-scan": run_halfspace_scan,
              "oracle-compare": run_oracle_compare}[cfg.mode]
    return runner(cfg, outdir)


if __name__ == "__main__":
    sys.exit(main())
