"""Command-line front end.

Subcommands: ``epsilon``, ``pressure``, ``compare``, ``window-roots`` and
``patch-check``.  Settings come from ``--config`` (JSON) and are then
overridden by explicit flags.  Outputs use 10 significant digits and LF
line endings so that repeated runs are byte-identical.

Exit codes: 0 success, 2 parse/configuration, 3 domain, 4 accuracy.
"""

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
from scipy.interpolate import CubicSpline

from . import __version__
from .comparison import band_cross_overlap, difference_analysis, patch_area_check, read_experiment
from .config import load_config, parse_config
from .errors import (AccuracyError, AlignmentError, CasimirError, ConfigurationError,
                     NearRootError, ParseError)
from .lifshitz import pressure_T0, pressure_matsubara
from .permittivity.window import WindowedModel, WindowParams, find_window_roots
from .roughness import RoughnessProfile, read_roughness_profile, rough_pressure

log = logging.getLogger("casimirlab")

EXIT_ACCURACY = AccuracyError.exit_code


def fmt(x):
    """Fixed 10-significant-digit rendering used in every output file."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return format(float(x), ".10g")


def _round_floats(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(path, payload):
    text = json.dumps(_round_floats(payload), indent=2, allow_nan=True) + "\n"
    path.write_bytes(text.encode("utf-8"))


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def _report_header(command, config, args):
    head = {
        "tool": {"name": "casimirlab", "version": __version__,
                 "numpy": np.__version__, "scipy": scipy.__version__},
        "command": command,
        "config": config.echo(),
    }
    if getattr(args, "timestamp", False):
        head["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return head


def _output_dir(config, tag, n_models):
    out = Path(config.output)
    if n_models > 1:
        out = out / tag
    out.mkdir(parents=True, exist_ok=True)
    return out


def _wants(config, kind):
    return config.format in (kind, "both")


# ---------------------------------------------------------------- epsilon

def cmd_epsilon(config, args):
    if not config.models:
        raise ConfigurationError("no permittivity model configured (use --model or config)")
    if config.xi_grid is None:
        raise ConfigurationError("epsilon needs xi values (--xi, --xi-grid or config xi_grid)")
    xi = config.xi_grid.points()
    for mc in config.models:
        model = mc.build()
        rows, warnings = [], []
        if isinstance(model, WindowedModel):
            for x in xi:
                try:
                    rows.append((x, model.eps_imag(float(x))))
                except NearRootError as exc:
                    warnings.append({"xi_eV": float(x), "warning": "near-root",
                                     "message": str(exc)})
                    log.warning("%s: %s (row omitted)", mc.label, exc)
        else:
            eps = np.atleast_1d(model.eps_imag(xi))
            rows = list(zip(xi, eps))
        out = _output_dir(config, mc.label, len(config.models))
        if _wants(config, "csv"):
            write_csv(out / "epsilon.csv", ["xi_eV", "eps"], rows)
        if _wants(config, "json"):
            report = _report_header("epsilon", config, args)
            report.update({"model": mc.label, "model_description": model.describe(),
                           "series": [{"xi_eV": x, "eps": e} for x, e in rows],
                           "warnings": warnings})
            write_json(out / "report.json", report)
        for x, e in rows:
            print(f"{mc.label}\t{fmt(x)}\t{fmt(e)}")
    return 0


# --------------------------------------------------------------- pressure

def _point_or_error(job):
    a, model, settings, temperature = job
    try:
        if temperature:
            return pressure_matsubara(a, temperature, model, settings), None
        return pressure_T0(a, model, settings), None
    except AccuracyError as exc:
        return None, exc


def _evaluate(grid, model, settings, temperature):
    jobs = [(float(a), model, settings, temperature) for a in grid]
    if settings.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            return list(pool.map(_point_or_error, jobs))
    return [_point_or_error(job) for job in jobs]


def _theory_series(grid, model, config):
    """Smooth (and, if profiles are given, rough) pressures on ``grid``."""
    settings = config.quadrature.settings()
    temperature = config.temperature_K
    results = _evaluate(grid, model, settings, temperature)
    cache = {float(a): r for a, r in zip(grid, results)}
    plate, sphere = _roughness(config)
    rough = None
    if plate is not None or sphere is not None:
        plate = plate or RoughnessProfile.flat()
        sphere = sphere or RoughnessProfile.flat()

        def smooth(a):
            if a not in cache:
                cache[a] = _evaluate([a], model, settings, temperature)[0]
            point, exc = cache[a]
            if exc is not None:
                raise exc
            return point.pressure_mPa

        rough = []
        for a, (point, exc) in zip(grid, results):
            try:
                rough.append(rough_pressure(float(a), plate, sphere, smooth))
            except AccuracyError as err:
                rough.append(float("nan"))
                log.error("rough pressure at a = %s nm: %s", fmt(a), err)
    return results, rough


def _roughness(config):
    plate = read_roughness_profile(config.plate_roughness) if config.plate_roughness else None
    sphere = read_roughness_profile(config.sphere_roughness) if config.sphere_roughness else None
    return plate, sphere


def _series_rows(grid, results, rough):
    rows, records, failed = [], [], 0
    for i, (a, (point, exc)) in enumerate(zip(grid, results)):
        if exc is None:
            p, err, status = point.pressure_mPa, point.error_mPa, "ok"
        else:
            failed += 1
            p = exc.estimate if np.ndim(exc.estimate) == 0 and exc.estimate is not None else float("nan")
            err = exc.error if np.ndim(exc.error) == 0 and exc.error is not None else float("nan")
            status = f"accuracy-error: {exc}"
            log.error("a = %s nm: %s", fmt(a), exc)
        row = [a, p, err]
        rec = {"a_nm": a, "P_mPa": p, "err_mPa": err, "status": status}
        if rough is not None:
            row.append(rough[i])
            rec["P_rough_mPa"] = rough[i]
        rows.append(row)
        records.append(rec)
    return rows, records, failed


def _diagnostics(model, results):
    errs = [p.error_mPa / abs(p.pressure_mPa) for p, e in results
            if e is None and p.pressure_mPa != 0]
    diag = {"max_relative_error": max(errs) if errs else 0.0}
    jump = getattr(model, "junction_jump", None)
    if jump is not None:
        diag["kk_junction_jump"] = jump
    return diag


def cmd_pressure(config, args):
    if not config.models:
        raise ConfigurationError("no permittivity model configured (use --model or config)")
    if config.grid is None:
        raise ConfigurationError("pressure needs a separation grid (--grid or config grid)")
    grid = config.grid.values()
    any_failed = False
    for mc in config.models:
        model = mc.build()
        results, rough = _theory_series(grid, model, config)
        rows, records, failed = _series_rows(grid, results, rough)
        any_failed |= failed > 0
        out = _output_dir(config, mc.label, len(config.models))
        header = ["a_nm", "P_mPa", "err_mPa"] + (["P_rough_mPa"] if rough is not None else [])
        if _wants(config, "csv"):
            write_csv(out / "pressure.csv", header, rows)
        if _wants(config, "json"):
            report = _report_header("pressure", config, args)
            report.update({"model": mc.label, "model_description": model.describe(),
                           "temperature_K": config.temperature_K, "series": records,
                           "diagnostics": _diagnostics(model, results)})
            write_json(out / "report.json", report)
        for row in rows:
            print(mc.label + "\t" + "\t".join(fmt(c) for c in row))
    return EXIT_ACCURACY if any_failed else 0


# ---------------------------------------------------------------- compare

def _theory_on_experiment(dataset, model, config):
    """Theory pressures at the experiment separations (rough if profiles given)."""
    target = dataset.a_nm
    if config.grid is None:
        grid = target
    else:
        grid = config.grid.values()
        aligned = grid.shape == target.shape and np.allclose(grid, target, rtol=0, atol=1e-9)
        if not aligned and not config.interpolate:
            unmatched = [float(a) for a in target
                         if not np.any(np.isclose(grid, a, rtol=0, atol=1e-9))]
            raise AlignmentError(
                f"theory grid does not match experiment separations; unmatched: {unmatched} "
                "(pass --interpolate to interpolate)", unmatched=unmatched)
        if not aligned and (target[0] < grid[0] or target[-1] > grid[-1]):
            raise AlignmentError("experiment separations extend beyond the theory grid")
    results, rough = _theory_series(grid, model, config)
    failed = [(a, e) for a, (p, e) in zip(grid, results) if e is not None]
    if failed:
        raise failed[0][1]
    values = np.array(rough if rough is not None else [p.pressure_mPa for p, _ in results])
    if grid is target or np.array_equal(grid, target):
        return values, []
    log.warning("interpolating theory onto experiment separations (cubic spline)")
    return CubicSpline(grid, values)(target), ["theory interpolated onto experiment grid"]


def cmd_compare(config, args):
    if not config.models:
        raise ConfigurationError("no permittivity model configured (use --model or config)")
    if config.experiment is None:
        raise ConfigurationError("compare needs an experiment file (--experiment)")
    dataset = read_experiment(config.experiment)
    specs = config.confidence_specs()
    for mc in config.models:
        model = mc.build()
        theory, warnings = _theory_on_experiment(dataset, model, config)
        report = difference_analysis(theory, dataset, specs, config.band_fraction,
                                     config.combination, model_tag=mc.label)
        overlaps = {s.key: band_cross_overlap(dataset.a_nm, theory, dataset, s,
                                              config.band_fraction, config.delta_a_nm)
                    for s in specs}
        out = _output_dir(config, mc.label, len(config.models))
        if _wants(config, "csv"):
            header = ["a_nm", "P_expt_mPa", "P_theory_mPa"]
            for k in overlaps:
                header += [f"band_low_{k}_mPa", f"band_high_{k}_mPa",
                           f"cross_low_{k}_mPa", f"cross_high_{k}_mPa", f"overlap_{k}"]
            rows = []
            for i, a in enumerate(dataset.a_nm):
                row = [a, dataset.pressure_mPa[i], theory[i]]
                for recs in overlaps.values():
                    r = recs[i]
                    row += [r.band_low, r.band_high, r.cross_low, r.cross_high, fmt(r.overlap)]
                rows.append(row)
            write_csv(out / "band_cross.csv", header, rows)
            header = ["a_nm", "diff_mPa"]
            for k in report.levels:
                header += [f"Xi_{k}_mPa", f"outside_{k}"]
            rows = []
            for i, a in enumerate(report.a_nm):
                row = [a, report.difference_mPa[i]]
                for lev in report.levels.values():
                    row += [lev.half_width[i], fmt(bool(lev.outside[i]))]
                rows.append(row)
            write_csv(out / "differences.csv", header, rows)
        if _wants(config, "json"):
            payload = _report_header("compare", config, args)
            payload.update(report.to_dict())
            payload["band_cross"] = {
                k: [{"a_nm": r.a_nm, "band_low_mPa": r.band_low, "band_high_mPa": r.band_high,
                     "cross_low_mPa": r.cross_low, "cross_high_mPa": r.cross_high,
                     "overlap": r.overlap} for r in recs]
                for k, recs in overlaps.items()}
            payload["model_description"] = model.describe()
            payload["warnings"] = warnings
            write_json(out / "report.json", payload)
        for key, lev in report.levels.items():
            spans = ", ".join(f"{fmt(lo)}-{fmt(hi)} nm" for lo, hi in lev.intervals) or "none"
            print(f"{mc.label}\t{key}\t{lev.spec.distribution}\t{lev.verdict}\t{spans}")
    return 0


# ------------------------------------------------------------ small tools

def cmd_window_roots(config, args):
    wr = config.window_roots
    params = WindowParams(complex(*wr.omega_c), wr.p, wr.q)
    roots = find_window_roots(params, (wr.xi_min, wr.xi_max))
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    if _wants(config, "csv"):
        write_csv(out / "window_roots.csv", ["root_eV"], [[r] for r in roots])
    if _wants(config, "json"):
        report = _report_header("window-roots", config, args)
        report["roots_eV"] = roots
        write_json(out / "window_roots.json", report)
    for r in roots:
        print(fmt(r))
    return 0


def cmd_patch_check(config, args):
    pc = config.patch
    res = patch_area_check(pc.grain_diameter_nm, pc.sphere_radius_um, pc.a_nm)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    fields = [("patch_area_um2", res.patch_area_um2),
              ("effective_area_um2", res.effective_area_um2),
              ("small_patch_regime", res.small_patch_regime)]
    if _wants(config, "csv"):
        write_csv(out / "patch_check.csv", [k for k, _ in fields],
                  [[v if not isinstance(v, bool) else fmt(v) for _, v in fields]])
    if _wants(config, "json"):
        report = _report_header("patch-check", config, args)
        report.update(dict(fields))
        write_json(out / "patch_check.json", report)
    print("\t".join(f"{k}={fmt(v)}" for k, v in fields))
    return 0


COMMANDS = {
    "epsilon": cmd_epsilon,
    "pressure": cmd_pressure,
    "compare": cmd_compare,
    "window-roots": cmd_window_roots,
    "patch-check": cmd_patch_check,
}


# ---------------------------------------------------------------- parsing

def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="JSON run configuration")
    g.add_argument("--output", help="output directory")
    g.add_argument("--format", choices=["csv", "json", "both"])
    g.add_argument("--confidence", choices=["0.95", "0.70", "both"])
    g.add_argument("--distribution", choices=["uniform", "normal"])
    g.add_argument("--timestamp", action="store_true",
                   help="record wall-clock time in JSON reports (breaks byte stability)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _model_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model options")
    g.add_argument("--model", choices=["drude", "plasma-like", "tabulated-kk", "windowed-kk"])
    g.add_argument("--tag")
    g.add_argument("--wp", type=float, dest="plasma_frequency_eV", help="plasma frequency, eV")
    g.add_argument("--gamma", type=float, dest="relaxation_eV", help="relaxation, eV")
    g.add_argument("--oscillators", help='JSON list of {"strength","frequency","width"}')
    g.add_argument("--table", dest="optical_table", help="optical table CSV")
    g.add_argument("--low-frequency", choices=["drude", "none"])
    g.add_argument("--tail", choices=["power-law", "cutoff"])
    g.add_argument("--omega-c", nargs=2, type=float, metavar=("RE", "IM"))
    g.add_argument("--p", type=int)
    g.add_argument("--q", type=int)
    g.add_argument("--guard", type=float)
    return p


def _theory_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pressure options")
    g.add_argument("--grid", nargs=3, metavar=("START", "STOP", "COUNT"))
    g.add_argument("--spacing", choices=["linear", "log"])
    g.add_argument("--temperature", type=float, help="kelvin; 0 selects the T = 0 integral")
    g.add_argument("--plate-roughness")
    g.add_argument("--sphere-roughness")
    g.add_argument("--workers", type=int)
    g.add_argument("--rtol-inner", type=float)
    g.add_argument("--rtol-outer", type=float)
    return p


def build_parser():
    parser = argparse.ArgumentParser(
        prog="casimirlab",
        description="Lifshitz-theory Casimir pressure and theory-experiment comparison.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, model, theory = _common_parser(), _model_parser(), _theory_parser()

    p = sub.add_parser("epsilon", parents=[common, model], help="eps(i xi) table")
    p.add_argument("--xi", nargs="+", type=float, help="explicit xi values, eV")
    p.add_argument("--xi-grid", nargs=3, metavar=("START", "STOP", "COUNT"),
                   help="log-spaced xi grid, eV")

    sub.add_parser("pressure", parents=[common, model, theory], help="pressure series")

    p = sub.add_parser("compare", parents=[common, model, theory],
                       help="compare theory with an experiment file")
    p.add_argument("--experiment")
    p.add_argument("--band-fraction", type=float)
    p.add_argument("--combination", choices=["rss", "linear-sum"])
    p.add_argument("--delta-a", type=float, dest="delta_a_nm")
    p.add_argument("--interpolate", action="store_true", default=None)

    p = sub.add_parser("window-roots", parents=[common], help="roots of f(i xi)")
    p.add_argument("--omega-c", nargs=2, type=float, metavar=("RE", "IM"))
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))

    p = sub.add_parser("patch-check", parents=[common], help="patch-area estimate")
    p.add_argument("--diameter", type=float, help="grain diameter, nm")
    p.add_argument("--radius", type=float, help="sphere radius, um")
    p.add_argument("--separation", type=float, help="separation, nm")
    return parser


_MODEL_FIELDS = ("tag", "plasma_frequency_eV", "relaxation_eV", "optical_table",
                 "low_frequency", "tail", "guard")


def _model_overrides(args):
    fields = {k: getattr(args, k, None) for k in _MODEL_FIELDS}
    fields = {k: v for k, v in fields.items() if v is not None}
    if getattr(args, "oscillators", None):
        try:
            fields["oscillators"] = json.loads(args.oscillators)
        except json.JSONDecodeError as exc:
            raise ParseError(f"--oscillators is not valid JSON: {exc.msg}") from None
    window = [getattr(args, k, None) for k in ("omega_c", "p", "q")]
    if any(w is not None for w in window):
        if any(w is None for w in window):
            raise ConfigurationError("--omega-c, --p and --q must be given together")
        fields["window"] = {"omega_c": list(args.omega_c), "p": args.p, "q": args.q}
    if fields.get("optical_table"):
        fields["optical_table"] = str(Path(fields["optical_table"]).resolve())
    return fields


def merge_arguments(args):
    """Effective :class:`RunConfig`: config file first, then explicit flags."""
    base = load_config(args.config).echo() if args.config else {}
    data = dict(base)
    cmd = args.command
    if cmd in ("epsilon", "pressure", "compare"):
        over = _model_overrides(args)
        if args.model is not None:
            data["models"] = [{"kind": args.model, **over}]
        elif over:
            models = data.get("models", [])
            if len(models) != 1:
                raise ConfigurationError("model flags without --model need exactly one configured model")
            data["models"] = [{**models[0], **over}]
    if cmd == "epsilon":
        if args.xi is not None:
            data["xi_grid"] = {"values": args.xi}
        elif args.xi_grid is not None:
            start, stop, count = args.xi_grid
            data["xi_grid"] = {"start": float(start), "stop": float(stop), "count": int(count)}
    if cmd in ("pressure", "compare"):
        if args.grid is not None:
            start, stop, count = args.grid
            data["grid"] = {"start": float(start), "stop": float(stop), "count": int(count),
                            "spacing": args.spacing or data.get("grid", {}).get("spacing", "linear")}
        elif args.spacing is not None and data.get("grid"):
            data["grid"] = {**data["grid"], "spacing": args.spacing}
        if args.temperature is not None:
            data["temperature_K"] = args.temperature
        for key in ("plate_roughness", "sphere_roughness"):
            if getattr(args, key) is not None:
                data[key] = str(Path(getattr(args, key)).resolve())
        quad = dict(data.get("quadrature", {}))
        for key in ("workers", "rtol_inner", "rtol_outer"):
            if getattr(args, key) is not None:
                quad[key] = getattr(args, key)
        data["quadrature"] = quad
    if cmd == "compare":
        if args.experiment is not None:
            data["experiment"] = str(Path(args.experiment).resolve())
        for key, attr in (("band_fraction", "band_fraction"), ("combination", "combination"),
                          ("delta_a_nm", "delta_a_nm"), ("interpolate", "interpolate")):
            if getattr(args, attr) is not None:
                data[key] = getattr(args, attr)
    if cmd == "window-roots":
        wr = dict(data.get("window_roots", {}))
        if args.omega_c is not None:
            wr["omega_c"] = list(args.omega_c)
        for key in ("p", "q"):
            if getattr(args, key) is not None:
                wr[key] = getattr(args, key)
        if args.range is not None:
            wr["xi_min"], wr["xi_max"] = args.range
        data["window_roots"] = wr
    if cmd == "patch-check":
        pc = dict(data.get("patch", {}))
        for key, attr in (("grain_diameter_nm", "diameter"), ("sphere_radius_um", "radius"),
                          ("a_nm", "separation")):
            if getattr(args, attr) is not None:
                pc[key] = getattr(args, attr)
        data["patch"] = pc
    if args.output is not None:
        data["output"] = args.output
    if args.format is not None:
        data["format"] = args.format
    if args.confidence is not None:
        data["confidence"] = [0.95, 0.70] if args.confidence == "both" else [float(args.confidence)]
    if args.distribution is not None:
        data["distribution"] = args.distribution
    return parse_config(data, args.config or "<command line>")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        config = merge_arguments(args)
        return COMMANDS[args.command](config, args)
    except CasimirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
