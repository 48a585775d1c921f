"""Command-line front end.

Subcommands:
  solve   <config.json>   solve and write u.csv + diagnostics.json
  analyze <config.json>   solve (or load) and run the requested measurements
  sweep   <config.json>   refinement study; emits convergence.csv
  presets list            show the built-in presets

Exit codes: 0 ok, 1 config error, 2 solver failure, 3 all analyses failed.
Reports embed the fully resolved configuration and the package version;
identical config + seed gives byte-identical output. Output files are
written atomically (temp file + rename). The environment variable
OBSTAKL_THREADS caps the analysis thread pool (default: available cores).
"""

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .fields import Grid, ScalarField, read_field_csv, write_field_csv
from .freeboundary import (FreeBoundaryReport, bv_norm, energy_E_eps,
                           extract_free_boundary, growth_exponent_fit,
                           hausdorff_box_count, o_delta_measure,
                           perimeter_of_positivity, porosity_estimate,
                           w22_quotient_energy)
from .operator import OperatorSpec, StructuralConstants, divergence_of_flux
from .oracles import Exact1DObstacle, ExactRadial
from .presets import PRESETS, build_preset
from .solver import (SolveConfig, Solution, SolverError, complementarity_report,
                     solve_penalized, solve_vi)


class ConfigError(ValueError):
    pass


def _threads():
    env = os.environ.get("OBSTAKL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("OBSTAKL_THREADS: must be an integer") from None
    return os.cpu_count() or 1


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_field(path, field_obj):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        write_field_csv(field_obj, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path):
    with open(path) as fh:
        user = json.load(fh)
    return resolve_config(user)


def resolve_config(user):
    """Merge a preset (if named) under the user's explicit settings."""
    cfg = {}
    if "preset" in user:
        cfg = build_preset(user["preset"], user.get("preset_params"))
    for key, val in user.items():
        if key in ("preset", "preset_params"):
            continue
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            merged = dict(cfg[key])
            merged.update(val)
            cfg[key] = merged
        else:
            cfg[key] = val
    cfg.setdefault("output_dir", "obstakl-out")
    cfg.setdefault("seed", 0)
    cfg.setdefault("refinement_levels", 1)
    for required in ("grid", "operator", "f", "g"):
        if required not in cfg:
            raise ConfigError(f"{required}: required")
    return cfg


def _build_grid(cfg):
    gc = cfg["grid"]
    for key in ("lo", "hi", "n_cells"):
        if key not in gc:
            raise ConfigError(f"grid.{key}: required")
    try:
        return Grid(gc["lo"], gc["hi"], gc["n_cells"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _oracle_of(cfg):
    oc = cfg.get("oracle")
    if not oc:
        return None
    if oc["kind"] == "exact_1d":
        return Exact1DObstacle(p=oc["p"], lam=oc["lam"], g0=oc["g0"], g1=oc["g1"])
    if oc["kind"] == "exact_radial":
        return ExactRadial(p=oc["p"], c=oc["c"], dim=oc["dim"])
    raise ConfigError(f"oracle.kind: unknown {oc['kind']!r}")


def _build_field(desc, grid, cfg, role):
    mode = desc.get("mode")
    if mode == "constant":
        return ScalarField.constant(grid, desc["value"])
    if mode == "csv":
        f = read_field_csv(desc["path"])
        if not f.grid.is_compatible(grid):
            raise ConfigError(f"{role}: csv field grid does not match the run grid")
        return f
    if mode == "oracle":
        oracle = _oracle_of(cfg)
        if oracle is None:
            raise ConfigError(f"{role}: oracle mode needs an oracle preset")
        if role == "f":
            if isinstance(oracle, ExactRadial):
                return ScalarField.constant(grid, oracle.f_value)
            return ScalarField.constant(grid, oracle.lam)
        return oracle.sample(grid)
    raise ConfigError(f"{role}.mode: unknown {mode!r}")


def _build_problem(cfg, grid=None):
    grid = grid or _build_grid(cfg)
    try:
        spec = OperatorSpec.from_config(cfg["operator"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"operator: {exc}") from None
    f = _build_field(cfg["f"], grid, cfg, "f")
    g = _build_field(cfg["g"], grid, cfg, "g")
    sc = dict(cfg.get("solve", {}))
    sc.pop("coarsest_cells", None)
    try:
        solve_cfg = SolveConfig(**{k: (tuple(v) if k == "eps_schedule" else v)
                                   for k, v in sc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solve: {exc}") from None
    return grid, spec, f, g, solve_cfg


def _run_solve(cfg, grid=None):
    grid, spec, f, g, solve_cfg = _build_problem(cfg, grid)
    if solve_cfg.method == "penalized":
        constants = StructuralConstants.for_model(spec, grid)
        sol = solve_penalized(spec, constants, f, g, solve_cfg)
    else:
        sol = solve_vi(spec, f, g, solve_cfg)
    return grid, spec, f, g, sol


# ---------------------------------------------------------------------------
# analyses

def _auto_points(sol, count=3):
    fb = extract_free_boundary(sol)
    if fb.is_empty:
        return []
    centers = fb.cell_centers()
    stride = max(1, len(centers) // count)
    return [centers[i] for i in range(0, len(centers), stride)][:count]


def _default_radii(grid):
    h = float(grid.h.max())
    extent = float(np.min(grid.hi - grid.lo))
    radii = [k * h for k in (4, 6, 8, 12, 16, 24, 32)]
    return [r for r in radii if r < 0.35 * extent]


def _analysis_growth(cfg, params, sol, spec, f):
    points = params.get("points") or [list(map(float, p)) for p in _auto_points(sol)]
    radii = params.get("radii") or _default_radii(sol.grid)
    fits = []
    for pt in points:
        center = sol.grid.node_position(sol.grid.nearest_node(pt))
        usable = [r for r in radii if sol.grid.distance_to_boundary(center) >= r]
        expo, const = growth_exponent_fit(sol, pt, usable)
        fits.append({"point": list(map(float, np.atleast_1d(pt))),
                     "exponent": expo, "constant": const, "radii": usable})
    return {"growth_fits": fits}


def _analysis_porosity(cfg, params, sol, spec, f):
    fb = extract_free_boundary(sol)
    h = float(sol.grid.h.max())
    r_list = params.get("r_list") or [8 * h, 16 * h, 32 * h]
    r_list = [r for r in r_list
              if r >= 3 * h and r < 0.45 * float(np.min(sol.grid.hi - sol.grid.lo))]
    res = porosity_estimate(fb, r_list)
    return {"porosity": {"delta_hat": res.delta_hat,
                         "resolution_limited": res.resolution_limited,
                         "per_radius": res.per_radius}}


def _analysis_o_delta(cfg, params, sol, spec, f):
    points = params.get("x0")
    if points is None:
        auto = _auto_points(sol, count=1)
        if not auto:
            raise ValueError("no free boundary point available")
        points = list(map(float, auto[0]))
    r = params.get("r", 0.2 * float(np.min(sol.grid.hi - sol.grid.lo)))
    deltas = params.get("deltas") or [0.02, 0.05, 0.1, 0.2, 0.35, 0.5]
    out = o_delta_measure(sol, spec, points, r, deltas)
    out["x0"] = points
    out["r"] = r
    return {"o_delta_slopes": [out]}


def _analysis_e_eps(cfg, params, sol, spec, f):
    if sol.eps_final is None:
        raise ValueError("e_eps analysis needs a penalized solution")
    r = params.get("r", 0.25 * float(np.min(sol.grid.hi - sol.grid.lo)))
    val = energy_E_eps(sol, r, sol.eps_final)
    return {"e_eps": {"r": r, "eps": sol.eps_final, "value": val}}


def _analysis_hausdorff(cfg, params, sol, spec, f):
    fb = extract_free_boundary(sol)
    x0 = params.get("x0", 0.5 * (sol.grid.lo + sol.grid.hi))
    r = params.get("r", 0.3 * float(np.min(sol.grid.hi - sol.grid.lo)))
    count, est = hausdorff_box_count(fb, x0, r)
    return {"hausdorff": {"x0": list(map(float, np.atleast_1d(x0))), "r": r,
                          "count": count, "estimate": est,
                          "isotropy_factor": float(np.pi / 4.0)}}


def _analysis_w22(cfg, params, sol, spec, f):
    h = float(sol.grid.h.max())
    steps = params.get("h_steps") or [8 * h, 4 * h, 2 * h, h]
    return {"w22_energy": w22_quotient_energy(sol, steps)}


def _analysis_bv(cfg, params, sol, spec, f):
    Au = divergence_of_flux(spec, sol.u)
    interior = sol.grid.interior_mask()
    return {"perimeter": {
        "bv_norm_Au": bv_norm(Au, region=interior),
        "perimeter_positivity": perimeter_of_positivity(sol),
        "isotropy_factor": float(np.pi / 4.0),
    }}


def _analysis_complementarity(cfg, params, sol, spec, f):
    return {"complementarity": complementarity_report(spec, sol, f)}


_ANALYSES = {
    "growth": _analysis_growth,
    "porosity": _analysis_porosity,
    "o_delta": _analysis_o_delta,
    "e_eps": _analysis_e_eps,
    "hausdorff": _analysis_hausdorff,
    "w22": _analysis_w22,
    "bv": _analysis_bv,
    "complementarity": _analysis_complementarity,
}


def run_analyses(cfg, sol, spec, f):
    requested = cfg.get("analyses", [])
    results = {}
    errors = {}

    def one(item):
        name = item.get("name")
        if name not in _ANALYSES:
            return name, None, f"unknown analysis {name!r}"
        try:
            return name, _ANALYSES[name](cfg, item, sol, spec, f), None
        except Exception as exc:  # analysis errors must not abort the others
            return name, None, str(exc)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for name, payload, err in pool.map(one, requested):
            if err is not None:
                errors[name] = err
            else:
                results.update(payload)
    return results, errors


def _radius_table_rows(results):
    """Flatten per-radius quantities into (quantity, point_x, point_y, r, value)."""
    rows = []
    for fit in results.get("growth_fits", []):
        pt = fit["point"] + [0.0] * (2 - len(fit["point"]))
        for r in fit["radii"]:
            rows.append(("growth_exponent", pt[0], pt[1], r, fit["exponent"]))
    poro = results.get("porosity")
    if poro:
        for entry in poro["per_radius"]:
            rows.append(("porosity_delta", 0.0, 0.0, entry["r"], entry["delta"]))
    for od in results.get("o_delta_slopes", []):
        pt = list(od["x0"]) + [0.0] * (2 - len(od["x0"]))
        for d, m in zip(od["deltas"], od["measures"]):
            rows.append(("o_delta_measure", pt[0], pt[1], d, m))
    for e in results.get("w22_energy", []):
        rows.append((f"w22_axis{e['axis']}", 0.0, 0.0, e["tau"], e["energy"]))
    return rows


def _write_report(cfg, results, errors, out_dir):
    report = FreeBoundaryReport(
        growth_fits=results.get("growth_fits", []),
        porosity=results.get("porosity", {}),
        o_delta_slopes=results.get("o_delta_slopes", []),
        perimeter=results.get("perimeter", {}),
        w22_energy=results.get("w22_energy", []),
        complementarity=results.get("complementarity", {}),
    ).to_dict()
    for extra in ("hausdorff", "e_eps"):
        if extra in results:
            report[extra] = results[extra]
    doc = {"version": __version__, "config": cfg, "report": report,
           "analysis_errors": errors}
    _atomic_write(os.path.join(out_dir, "report.json"),
                  json.dumps(doc, indent=2, sort_keys=True) + "\n")
    rows = _radius_table_rows(results)
    if rows:
        lines = ["quantity,point_x,point_y,r,value"]
        lines += [f"{q},{x!r},{y!r},{r!r},{v!r}" for q, x, y, r, v in rows]
        _atomic_write(os.path.join(out_dir, "tables.csv"), "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg):
    out = cfg["output_dir"]
    try:
        grid, spec, f, g, sol = _run_solve(cfg)
    except ConfigError:
        raise
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    _atomic_write_field(os.path.join(out, "u.csv"), sol.u)
    diag = {
        "version": __version__,
        "config": cfg,
        "iterations": sol.iterations,
        "residual_history": [float(r) for r in sol.residual_history],
        "eps_final": sol.eps_final,
        "converged": sol.converged,
        "method": sol.method,
    }
    _atomic_write(os.path.join(out, "diagnostics.json"),
                  json.dumps(diag, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_analyze(cfg):
    out = cfg["output_dir"]
    try:
        if "load_u_csv" in cfg:
            grid, spec, f, g, solve_cfg = _build_problem(cfg)
            u = read_field_csv(cfg["load_u_csv"])
            if not u.grid.is_compatible(grid):
                raise ConfigError("load_u_csv: field grid does not match the run grid")
            sol = Solution(u=u, active_mask=u.values <= solve_cfg.tol_u_zero,
                           residual_history=[], iterations=0, eps_final=None,
                           converged=True, method="loaded", spec=spec,
                           f_sup=float(np.abs(f.values).max()),
                           g_sup=float(np.abs(g.values[grid.boundary_mask()]).max()),
                           tol_u_zero=solve_cfg.tol_u_zero)
        else:
            grid, spec, f, g, sol = _run_solve(cfg)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    results, errors = run_analyses(cfg, sol, spec, f)
    _write_report(cfg, results, errors, out)
    requested = cfg.get("analyses", [])
    if requested and len(errors) == len(requested):
        for name, msg in errors.items():
            print(f"analysis {name} failed: {msg}", file=sys.stderr)
        return 3
    return 0


_SWEEP_QUANTITIES_DECREASING = ("err_inf", "complementarity_r2")


def _sweep_level(cfg, level, n_base):
    lcfg = json.loads(json.dumps(cfg))
    lcfg["grid"]["n_cells"] = [n * 2 ** level for n in n_base]
    grid, spec, f, g, sol = _run_solve(lcfg)
    values = {}
    oracle = _oracle_of(cfg)
    if oracle is not None:
        exact = oracle.sample(grid)
        values["err_inf"] = float(np.abs(sol.u.values - exact.values).max())
    results, errors = run_analyses(lcfg, sol, spec, f)
    comp = results.get("complementarity")
    if comp:
        values["complementarity_r2"] = comp["r2"]
    poro = results.get("porosity")
    if poro:
        values["porosity_delta_hat"] = poro["delta_hat"]
    per = results.get("perimeter")
    if per:
        values["bv_norm_Au"] = per["bv_norm_Au"]
        values["perimeter_positivity"] = per["perimeter_positivity"]
    if "e_eps" in results:
        values["e_eps"] = results["e_eps"]["value"]
    if "hausdorff" in results:
        values["hausdorff_estimate"] = results["hausdorff"]["estimate"]
    for fit in results.get("growth_fits", [])[:1]:
        values["growth_exponent"] = fit["exponent"]
    return float(grid.h.max()), values


def observed_order(h_list, values):
    """Least-squares slope of log(value) against log(h) over a ladder.

    More robust than pairwise ratios for quantities whose error constant
    oscillates with the mesh alignment of the free boundary.
    """
    h_arr = np.asarray(h_list, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    keep = v_arr > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(h_arr[keep]), np.log(v_arr[keep]), 1)[0])


def cmd_sweep(cfg):
    levels = int(cfg.get("refinement_levels", 1))
    if levels < 2:
        print("refinement_levels must be >= 2", file=sys.stderr)
        return 1
    n_base = list(cfg["grid"]["n_cells"])
    rows = []
    seen = {}
    try:
        for level in range(levels):
            h, values = _sweep_level(cfg, level, n_base)
            for quantity, value in sorted(values.items()):
                hs, vs = seen.setdefault(quantity, ([], []))
                hs.append(h)
                vs.append(value)
                order = observed_order(hs, vs) if level > 0 else None
                order_txt = "" if order is None else repr(order)
                rows.append(f"{level},{h!r},{quantity},{value!r},{order_txt}")
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    out = cfg["output_dir"]
    text = "level,h,quantity,value,observed_order\n" + "\n".join(rows) + "\n"
    _atomic_write(os.path.join(out, "convergence.csv"), text)
    return 0


def cmd_presets_list():
    for name in sorted(PRESETS):
        print(f"{name:18s} {PRESETS[name][1]}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="obstakl",
        description="Obstacle-problem solver and free-boundary measurement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("solve", "analyze", "sweep"):
        pc = sub.add_parser(cmd)
        pc.add_argument("config", help="JSON run configuration")
    pp = sub.add_parser("presets")
    pp.add_argument("action", choices=["list"])
    args = parser.parse_args(argv)

    if args.command == "presets":
        return cmd_presets_list()
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        return cmd_sweep(cfg)
    except (ConfigError, KeyError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
