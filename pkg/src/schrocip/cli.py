"""Command-line surface.

Subcommands: forward, reconstruct, stability, carleman, geometry.  Every
run reads one YAML config, writes CSV/JSON outputs plus a manifest into
--out, and is reproducible from (config, seed) alone.  Exit codes: 0
success, 1 usage, 2 config or data validation, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from .carleman import admissible_ensemble, carleman_ratio, implied_psi_convexity
from .cbrec import _materialize, run_cbrec, true_potentials
from .config import config_from_dict
from .core import RunConfig, validate_config
from .forward import drift_sign_report, flux_at_right, mass_series, solve_forward
from .runio import (read_measurement, write_manifest, write_measurement,
                    write_report, write_series_csv, write_table_csv)
from .stability import EnsembleSpec, lipschitz_experiment
from .weights import CarlemanParams, ConvexBody, default_alpha, minkowski_mu, \
    normal_derivative_psi

_SUBCOMMANDS = ("forward", "reconstruct", "stability", "carleman", "geometry")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schrocip",
        description="Potential reconstruction for a 1-D Schrodinger equation "
                    "with a dynamic boundary condition, plus the weighted-"
                    "inequality and stability probes behind it.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "forward": "solve the forward problem and extract the boundary flux",
        "reconstruct": "run the iterative potential reconstruction",
        "stability": "flux-vs-potential perturbation ratio experiment",
        "carleman": "weighted-inequality ratio sweep on a test ensemble",
        "geometry": "classify the observation region of a convex body",
    }
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for ensemble evaluations")
        if name == "reconstruct":
            p.add_argument("--measurement", default=None,
                           help="flux CSV; default: synthesize from the "
                                "config's potentials")
    return parser


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"config file {args.config} does not contain a mapping")
        config = config_from_dict(raw)
    except (OSError, ValueError, TypeError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config.seed = args.seed
    violations = validate_config(
        config, reconstruction=(args.command == "reconstruct"))
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runner = {"forward": _cmd_forward, "reconstruct": _cmd_reconstruct,
              "stability": _cmd_stability, "carleman": _cmd_carleman,
              "geometry": _cmd_geometry}[args.command]
    start = time.perf_counter()
    try:
        outputs, extra = runner(args, config, raw, out)
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    outputs.append("manifest.json")
    write_manifest(out, config, config.seed, outputs,
                   time.perf_counter() - start, extra)
    return 0


def _cmd_forward(args, config: RunConfig, raw: dict, out: Path):
    grid, y0, y_gamma0, p1, sources = _materialize(config)
    pot = true_potentials(config)
    traj = solve_forward(grid, config.d, pot, sources, y0.astype(complex),
                         y_gamma0)
    flux = flux_at_right(traj)
    write_series_csv(out / "flux.csv", grid.t_half, flux)

    snap_idx = sorted(set(np.linspace(0, grid.nt_half, 5).astype(int)))
    rows = []
    for j in snap_idx:
        for i, xi in enumerate(grid.x):
            rows.append((float(grid.t_half[j]), float(xi),
                         float(traj.y[j, i].real), float(traj.y[j, i].imag)))
    write_table_csv(out / "snapshots.csv", ["t", "x", "re", "im"], rows)

    mass = mass_series(traj)
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0]) if mass[0] > 0 else 0.0
    write_report(out / "summary.json", {
        "grid": {"nx": grid.nx, "ell": grid.ell, "nt_half": grid.nt_half,
                 "T": grid.T},
        "mass_initial": float(mass[0]),
        "mass_final": float(mass[-1]),
        "mass_drift_rel": drift,
        "drift_sign_notes": drift_sign_report(pot),
    })
    return ["flux.csv", "snapshots.csv", "summary.json"], None


def _cmd_reconstruct(args, config: RunConfig, raw: dict, out: Path):
    grid = config.grid()
    measurement = None
    if args.measurement is not None:
        measurement = read_measurement(args.measurement, grid,
                                       sigma=config.sigma, seed=config.seed)
    report = run_cbrec(config, measurement=measurement)
    if measurement is None:
        # persist the synthesized measurement so the run is self-contained
        from .forward import synthesize_measurement
        mgrid, y0, y_gamma0, _, sources = _materialize(config)
        meas = synthesize_measurement(mgrid, config.d, true_potentials(config),
                                      sources, y0.astype(complex), y_gamma0,
                                      sigma=config.sigma, seed=config.seed)
        write_measurement(out / "measurement.csv", meas, grid)

    rows = [(r.k, r.error, r.error_gamma, r.j_value, r.el_residual,
             r.cg_iterations, r.step_norm) for r in report.records]
    write_table_csv(out / "iterations.csv",
                    ["k", "error", "error_gamma", "j_value", "el_residual",
                     "cg_iterations", "step_norm"], rows)
    write_table_csv(out / "final_p.csv", ["x", "p"],
                    [(float(xi), float(pi))
                     for xi, pi in zip(grid.x, report.final.p)])
    write_report(out / "report.json", {
        "config_hash": report.config_hash,
        "stopping_reason": report.stopping_reason,
        "rho": report.rho,
        "p_gamma": float(report.final.p_gamma),
        "errors": report.errors,
        "weighted_t0_errors": report.weighted_t0_errors,
        "warnings": list(report.warnings),
        "iterations": len(report.records),
    })
    outputs = ["iterations.csv", "final_p.csv", "report.json"]
    if measurement is None:
        outputs.append("measurement.csv")
    return outputs, {"config_hash": report.config_hash}


def _cmd_stability(args, config: RunConfig, raw: dict, out: Path):
    sect = raw.get("stability") or {}
    spec = EnsembleSpec(
        n_members=int(sect.get("n_members", 20)),
        amplitude=float(sect.get("amplitude", 0.1)),
        n_modes=int(sect.get("n_modes", 5)),
        seed=int(sect.get("seed", config.seed)))
    baseline = true_potentials(config)
    table = lipschitz_experiment(baseline, spec, config, threads=args.threads)
    ratios = table.ratios
    if ratios.size and (np.any(ratios <= 0) or np.any(~np.isfinite(ratios))):
        raise RuntimeError("nonpositive or non-finite stability ratio; "
                           "pipeline fault")
    write_table_csv(out / "ratios.csv",
                    ["member", "numerator", "denominator", "ratio", "flag"],
                    [(r.member, r.numerator, r.denominator, r.ratio, r.flag)
                     for r in table.rows])
    write_report(out / "summary.json", {
        "n_members": spec.n_members,
        "amplitude": spec.amplitude,
        "n_flagged": sum(1 for r in table.rows if r.flag),
        "ratio_min": float(ratios.min()) if ratios.size else None,
        "ratio_max": float(ratios.max()) if ratios.size else None,
        "fitted_lower": float(ratios.min()) if ratios.size else None,
        "fitted_upper": float(ratios.max()) if ratios.size else None,
    })
    return ["ratios.csv", "summary.json"], None


def _cmd_carleman(args, config: RunConfig, raw: dict, out: Path):
    # "carleman" holds the weight parameters; the ensemble knobs live in
    # their own section so config parsing stays strict.
    sect = raw.get("carleman_ensemble") or {}
    n_members = int(sect.get("n_members", 20))
    n_modes = int(sect.get("n_modes", 4))
    seed = int(sect.get("seed", config.seed))
    s_factors = [float(f) for f in sect.get("s_factors", [1.0, 2.0, 4.0])]
    grid = config.grid()
    alpha = config.alpha if config.alpha is not None else \
        default_alpha(config.lam, config.a, config.ell)
    pot = true_potentials(config)
    members = admissible_ensemble(grid, n_members, seed, n_modes=n_modes)

    rows = []
    max_ratio_by_s = {}
    for factor in s_factors:
        params = CarlemanParams(s=config.s * factor, lam=config.lam,
                                alpha=alpha, a=config.a)

        def eval_member(item):
            i, v = item
            return i, carleman_ratio(v, params, config.d, pot.p, pot.p1,
                                     pot.p_gamma, grid)

        results = _parallel_map(eval_member, enumerate(members), args.threads)
        defined = []
        for i, res in results:
            rows.append((i, params.s, config.lam, res.lhs, res.rhs, res.ratio))
            if res.ratio is not None:
                defined.append(res.ratio)
        max_ratio_by_s[params.s] = max(defined) if defined else None
    write_table_csv(out / "table.csv",
                    ["member", "s", "lambda", "lhs", "rhs", "ratio"], rows)

    s_sorted = sorted(max_ratio_by_s)
    s0_estimate = None
    for i, s in enumerate(s_sorted):
        base = max_ratio_by_s[s]
        if base is None:
            continue
        if all(max_ratio_by_s[s2] is not None
               and max_ratio_by_s[s2] <= 1.1 * base for s2 in s_sorted[i + 1:]):
            s0_estimate = s
            break
    write_report(out / "summary.json", {
        "fitted_C": max_ratio_by_s.get(config.s * s_factors[0]),
        "max_ratio_by_s": {f"{s:g}": v for s, v in max_ratio_by_s.items()},
        "s0_estimate": s0_estimate,
        "implied_psi_convexity": implied_psi_convexity(config.a),
    })
    return ["table.csv", "summary.json"], None


def _cmd_geometry(args, config: RunConfig, raw: dict, out: Path):
    sect = raw.get("geometry") or {}
    shape = sect.get("shape", "ball")
    radii = [float(r) for r in sect.get("radii", [1.0, 1.0])]
    n_points = int(sect.get("n_points", 360))
    center = [float(c) for c in sect.get("center", [0.0] * len(radii))]
    if len(radii) != 2:
        raise ValueError("geometry boundary sampling supports 2-D bodies; "
                         f"got {len(radii)} radii")
    if len(center) != 2:
        raise ValueError(f"center must have 2 components, got {len(center)}")
    body = ConvexBody(shape=shape, radii=tuple(radii))

    angles = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    points = np.column_stack([radii[0] * np.cos(angles),
                              radii[1] * np.sin(angles)])
    normals = np.column_stack([np.cos(angles) / radii[0],
                               np.sin(angles) / radii[1]])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    shifted = points - np.asarray(center)[None, :]
    mu = minkowski_mu(shifted, body)
    dnu = normal_derivative_psi(shifted, normals, body)
    in_star = dnu >= 0.0
    write_table_csv(out / "gamma_star.csv",
                    ["x1", "x2", "mu", "dnu_psi", "in_gamma_star"],
                    [(float(p[0]), float(p[1]), float(m), float(dv), int(f))
                     for p, m, dv, f in zip(points, mu, dnu, in_star)])
    write_report(out / "summary.json", {
        "shape": shape, "radii": radii, "center": center,
        "n_points": n_points,
        "n_gamma_star": int(np.sum(in_star)),
        "gamma_star_fraction": float(np.mean(in_star)),
    })
    return ["gamma_star.csv", "summary.json"], None


if __name__ == "__main__":
    sys.exit(main())
