"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``metrics``, ``orientations``, ``fidelity``.
Each accepts ``--config FILE`` holding one flat JSON object; command-line
flags override config values. Exit status is 0 on success, 2 for
configuration or input errors and 3 when a fit does not converge.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fit import FitError, FitParams, fit_batch, invert_to_strain
from .geometry import fidelity_curve, standard_orientations
from .io import (
    CsvFormatError, dumps, read_json, read_spectrum_csv, write_json,
    write_spectrum_csv, write_table_csv,
)
from .spectrum import (
    DEFAULT_POINTS, DEFAULT_SPAN_GHZ, SpectrumModel, dip_weights, metrics, synthesize,
    default_grid,
)
from .spin import D_GS, DegeneratePhaseError, StrainAmplitudes, strain_phase
from .strain import COMPONENTS, SCENARIOS, StrainTensor, amplitudes_from_tensor, rotate_to_nv_frame, scenario

log = logging.getLogger("nvstrain")

EXIT_OK, EXIT_CONFIG, EXIT_NOCONVERGE = 0, 2, 3

AMPLITUDE_KEYS = ("m_z_ghz", "m_x_ghz", "m_y_ghz", "n_x_ghz", "n_y_ghz")

MODEL_KEYS = {
    "d_ghz": float, "phi_mw_rad": float, "gamma_ghz": float, "depth": float,
    "baseline": float, "phase_sign": int,
    "scenario": str, "scenario_args": list,
    "frame": str, "orientation": int,
    **{c: float for c in COMPONENTS},
    **{k: float for k in AMPLITUDE_KEYS},
}

SCHEMAS = {
    "simulate": {
        **MODEL_KEYS,
        "grid_center_ghz": float, "grid_span_ghz": float, "grid_points": int,
        "output_csv": str, "output_json": str,
    },
    "fit": {
        "input": str, "output_json": str, "output_dir": str, "residuals_csv": str,
        "d_ghz": float, "phi_mw_rad": float, "independent_widths": bool,
        "max_iter": int, "jobs": int,
    },
    "metrics": {**MODEL_KEYS, "fit_json": str, "output_json": str},
    "orientations": {"output_json": str},
    "fidelity": {
        "contrast": float, "n_min": float, "n_max": float, "n_points": int,
        "log_grid": bool, "output_csv": str,
    },
}


class ConfigError(ValueError):
    pass


def validate_config(command: str, cfg: dict) -> dict:
    """Check keys and value types against the command's flat schema."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    schema = SCHEMAS[command]
    out = {}
    for key, value in cfg.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for '{command}'")
        kind = schema[key]
        if value is None:
            continue
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"config key {key!r} must be a finite number")
            value = float(value)
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key!r} must be an integer")
        elif not isinstance(value, kind):
            raise ConfigError(f"config key {key!r} must be of type {kind.__name__}")
        out[key] = value
    return out


def _merge(command, args, flag_map):
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = read_json(args.config)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = validate_config(command, cfg)
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            cfg[key] = v
    return validate_config(command, cfg)


# -- model construction -------------------------------------------------------

def _amplitudes_from_config(cfg):
    has_scn = "scenario" in cfg
    has_tensor = any(c in cfg for c in COMPONENTS)
    has_amps = any(k in cfg for k in AMPLITUDE_KEYS)
    if has_scn + has_tensor + has_amps > 1:
        raise ConfigError("give exactly one of: scenario, strain tensor components, strain amplitudes")
    source = {}
    if has_scn:
        kind = cfg["scenario"]
        if kind not in SCENARIOS:
            raise ConfigError(f"unknown scenario {kind!r}; expected one of {sorted(SCENARIOS)}")
        args = cfg.get("scenario_args", [])
        if not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in args):
            raise ConfigError("scenario_args must be a list of numbers")
        try:
            eps = scenario(kind, *map(float, args))
        except TypeError:
            raise ConfigError(f"wrong number of scenario_args for {kind!r}") from None
        source = {"scenario": kind, "scenario_args": list(args), "tensor": eps.to_dict()}
        return amplitudes_from_tensor(eps), source
    if has_tensor:
        frame = cfg.get("frame", "NV")
        try:
            eps = StrainTensor(**{c: cfg.get(c, 0.0) for c in COMPONENTS}, frame=frame)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        source = {"tensor": eps.to_dict()}
        if frame == "LAB":
            if "orientation" not in cfg:
                raise ConfigError("LAB-frame tensor needs 'orientation' (1..4)")
            try:
                eps = rotate_to_nv_frame(eps, cfg["orientation"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            source["orientation"] = cfg["orientation"]
            source["tensor_nv"] = eps.to_dict()
        return amplitudes_from_tensor(eps), source
    amps = StrainAmplitudes(*(cfg.get(k, 0.0) for k in AMPLITUDE_KEYS))
    return amps, {"amplitudes": True}


def model_from_config(cfg) -> tuple[SpectrumModel, dict]:
    amps, source = _amplitudes_from_config(cfg)
    try:
        model = SpectrumModel.from_depth(
            cfg.get("depth", 0.2),
            cfg.get("gamma_ghz", 2e-3),
            amps=amps,
            d=cfg.get("d_ghz", D_GS),
            phi_mw=cfg.get("phi_mw_rad", 0.0),
            baseline=cfg.get("baseline", 1.0),
            phase_sign=cfg.get("phase_sign", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return model, source


def model_metrics(model: SpectrumModel) -> dict:
    m = metrics(model)
    nu_m, nu_p, ap, am, degenerate = dip_weights(model)
    try:
        phi_str = strain_phase(model.amps)
    except DegeneratePhaseError:
        phi_str = None
    return {
        "shift_ghz": m.shift,
        "splitting_ghz": m.splitting,
        "imbalance": m.imbalance,
        "degenerate": m.degenerate,
        "nu_plus_ghz": nu_p,
        "nu_minus_ghz": nu_m,
        "alpha_plus": None if degenerate else ap,
        "alpha_minus": None if degenerate else am,
        "phi_str_rad": phi_str,
        "depth_plus": model.depth * (1.0 if degenerate else ap),
        "depth_minus": 0.0 if degenerate else model.depth * am,
    }


def _meta(command, **extra):
    return {"version": __version__, "tool": f"nvstrain {command}", **extra}


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _merge("simulate", args, {
        "scenario": "scenario", "scenario_args": "scenario_args", "phi_mw": "phi_mw_rad",
        "gamma": "gamma_ghz", "depth": "depth", "d": "d_ghz", "points": "grid_points",
        "span": "grid_span_ghz", "out": "output_csv", "sidecar": "output_json",
    })
    model, source = model_from_config(cfg)
    try:
        grid = default_grid(
            cfg.get("grid_center_ghz", model.d),
            cfg.get("grid_span_ghz", DEFAULT_SPAN_GHZ),
            cfg.get("grid_points", DEFAULT_POINTS),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    samples = synthesize(model, grid)
    out_csv = Path(cfg.get("output_csv", "spectrum.csv"))
    out_json = Path(cfg.get("output_json", str(out_csv.with_suffix(".json"))))
    write_spectrum_csv(out_csv, samples)
    doc = {
        "model": {**model.to_dict(), "source": source},
        "metrics": model_metrics(model),
        "meta": _meta("simulate", grid={
            "center_ghz": float(grid[len(grid) // 2]) if len(grid) % 2 else float(grid.mean()),
            "span_ghz": float((grid[-1] - grid[0]) / 2), "points": int(len(grid)),
        }, output_csv=out_csv.name),
    }
    write_json(out_json, doc)
    log.info("wrote %s and %s", out_csv, out_json)
    return EXIT_OK


def fit_document(result, strain, input_name, d, phi_mw) -> dict:
    fit = {
        **result.params.to_dict(),
        "uncertainties": result.param_uncertainties.to_dict(),
        "residual_rms": result.residual_rms,
        "iterations": result.iterations,
        "converged": result.converged,
        "status": result.status,
        "jacobian_rank": result.jacobian_rank,
        "correlation": result.correlation,
        "warnings": list(result.warnings),
    }
    return {
        "fit": fit,
        "metrics": strain.to_dict() if strain is not None else None,
        "meta": _meta("fit", input=input_name, d_ghz=d, phi_mw_rad=phi_mw, n_points=result.n_points),
    }


def _residual_rows(samples, result):
    from .fit import model_curve

    model = model_curve(samples.nu, result.params)
    return zip(samples.nu, samples.pl, model, samples.pl - model)


def cmd_fit(args) -> int:
    cfg = _merge("fit", args, {
        "input": "input", "out": "output_json", "out_dir": "output_dir",
        "residuals": "residuals_csv", "d": "d_ghz", "phi_mw": "phi_mw_rad",
        "independent_widths": "independent_widths", "max_iter": "max_iter", "jobs": "jobs",
    })
    if "input" not in cfg:
        raise ConfigError("fit needs an input CSV file or directory")
    src = Path(cfg["input"])
    if src.is_dir():
        paths = sorted(src.glob("*.csv"))
        if not paths:
            raise ConfigError(f"no .csv files in {src}")
        out_dir = Path(cfg.get("output_dir", src))
        outputs = [out_dir / f"{p.stem}.fit.json" for p in paths]
    elif src.is_file():
        paths = [src]
        outputs = [Path(cfg.get("output_json", str(src.with_suffix(".fit.json"))))]
    else:
        raise ConfigError(f"input not found: {src}")
    spectra = [read_spectrum_csv(p) for p in paths]
    d = cfg.get("d_ghz", D_GS)
    phi_mw = cfg.get("phi_mw_rad")
    kw = {"shared_width": not cfg.get("independent_widths", False)}
    if "max_iter" in cfg:
        kw["max_iter"] = cfg["max_iter"]
    results = fit_batch(spectra, jobs=cfg.get("jobs"), **kw)
    status = EXIT_OK
    for path, out, samples, result in zip(paths, outputs, spectra, results):
        try:
            strain = invert_to_strain(result, d, phi_mw, require_converged=False)
        except FitError as exc:
            log.error("%s: %s", path, exc)
            strain = None
        write_json(out, fit_document(result, strain, path.name, d, phi_mw))
        if "residuals_csv" in cfg and len(paths) == 1:
            write_table_csv(cfg["residuals_csv"], ("nu_ghz", "pl", "model", "residual"),
                            _residual_rows(samples, result))
        if not result.converged:
            log.error("%s: fit did not converge (%s)", path, result.status)
            status = EXIT_NOCONVERGE
        log.info("wrote %s", out)
    return status


def _fmt_line(label, value, unit=""):
    return f"{label:<16} {value}{(' ' + unit) if unit else ''}"


def cmd_metrics(args) -> int:
    cfg = _merge("metrics", args, {"fit_json": "fit_json", "out": "output_json"})
    if "fit_json" in cfg:
        extra = set(cfg) - {"fit_json", "output_json", "d_ghz", "phi_mw_rad"}
        if extra:
            raise ConfigError(f"config key {sorted(extra)[0]!r} cannot be combined with fit_json")
        doc = read_json(cfg["fit_json"])
        try:
            params = FitParams.from_dict(doc["fit"])
            meta = doc.get("meta", {})
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"fit JSON missing field {exc}") from None
        d = cfg.get("d_ghz", meta.get("d_ghz") or D_GS)
        phi_mw = cfg.get("phi_mw_rad", meta.get("phi_mw_rad"))
        try:
            est = invert_to_strain(params, d, phi_mw)
        except FitError as exc:
            raise ConfigError(str(exc)) from None
        out = {
            "shift_ghz": est.m_z_hat,
            "splitting_ghz": 2.0 * est.m_perp_hat,
            "imbalance": est.imbalance_hat,
            "degenerate": False,
            **est.to_dict(),
        }
        source = {"fit_json": Path(cfg["fit_json"]).name}
    else:
        model, src = model_from_config(cfg)
        out = model_metrics(model)
        source = {"model": {**model.to_dict(), "source": src}}
    imb = out["imbalance"]
    print(_fmt_line("shift (dnu):", f"{out['shift_ghz'] * 1e3:.6f}", "MHz"))
    print(_fmt_line("splitting:", f"{out['splitting_ghz'] * 1e3:.6f}", "MHz"))
    print(_fmt_line("imbalance (I):", "undefined (degenerate)" if imb is None else f"{imb:.4f}"))
    if "output_json" in cfg:
        write_json(cfg["output_json"], {"metrics": out, **source, "meta": _meta("metrics")})
    return EXIT_OK


def cmd_orientations(args) -> int:
    cfg = _merge("orientations", args, {"out": "output_json"})
    doc = {"orientations": [o.to_dict() for o in standard_orientations()], "meta": _meta("orientations")}
    if "output_json" in cfg:
        write_json(cfg["output_json"], doc)
    else:
        sys.stdout.write(dumps(doc))
    return EXIT_OK


def cmd_fidelity(args) -> int:
    cfg = _merge("fidelity", args, {
        "contrast": "contrast", "n_min": "n_min", "n_max": "n_max", "n_points": "n_points",
        "log_grid": "log_grid", "out": "output_csv",
    })
    if "contrast" not in cfg:
        raise ConfigError("fidelity needs an explicit contrast")
    c = cfg["contrast"]
    if not 0.0 <= c <= 1.0:
        raise ConfigError(f"contrast must lie in [0, 1], got {c}")
    n_min, n_max = cfg.get("n_min", 1.0), cfg.get("n_max", 1000.0)
    npts = cfg.get("n_points", 100)
    if n_min < 0 or n_max <= n_min or npts < 2:
        raise ConfigError("need 0 <= n_min < n_max and n_points >= 2")
    if cfg.get("log_grid", True):
        if n_min <= 0:
            raise ConfigError("log grid needs n_min > 0")
        grid = np.geomspace(n_min, n_max, npts)
    else:
        grid = np.linspace(n_min, n_max, npts)
    rows = [(p.n_avg, p.fidelity) for p in fidelity_curve(c, grid)]
    out = cfg.get("output_csv", "fidelity.csv")
    write_table_csv(out, ("n_avg", "fidelity"), rows)
    log.info("wrote %s", out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvstrain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nvstrain {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize a zero-field ODMR spectrum")
    s.add_argument("--config")
    s.add_argument("--scenario", choices=sorted(SCENARIOS))
    s.add_argument("--args", dest="scenario_args", type=_float_list, metavar="EPS[,EPS...]",
                   help="comma-separated scenario strains, e.g. 2e-4,-1e-4,1e-4")
    s.add_argument("--phi-mw", type=float, help="microwave angle to the NV x axis (rad)")
    s.add_argument("--gamma", type=float, help="Lorentzian HWHM (GHz)")
    s.add_argument("--depth", type=float, help="full-weight dip depth a/gamma")
    s.add_argument("--d", type=float, help="zero-field splitting (GHz)")
    s.add_argument("--points", type=int)
    s.add_argument("--span", type=float, help="grid half-span (GHz)")
    s.add_argument("-o", "--out", help="spectrum CSV path")
    s.add_argument("--sidecar", help="JSON sidecar path (default: CSV path with .json)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit two Lorentzian dips and invert to strain observables")
    f.add_argument("input", nargs="?", help="spectrum CSV or directory of CSVs")
    f.add_argument("--config")
    f.add_argument("-o", "--out", help="result JSON (single input)")
    f.add_argument("--out-dir", help="output directory (directory input)")
    f.add_argument("--residuals", help="residuals CSV (single input)")
    f.add_argument("--d", type=float)
    f.add_argument("--phi-mw", type=float)
    f.add_argument("--independent-widths", action="store_true", default=None)
    f.add_argument("--max-iter", type=int)
    f.add_argument("--jobs", type=int)
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("metrics", help="print shift, splitting and imbalance")
    m.add_argument("--config", help="model parameters (same keys as simulate)")
    m.add_argument("--fit-json")
    m.add_argument("-o", "--out")
    m.set_defaults(func=cmd_metrics)

    o = sub.add_parser("orientations", help="NV axis and dipole vectors for a [100] surface")
    o.add_argument("--config")
    o.add_argument("-o", "--out")
    o.set_defaults(func=cmd_orientations)

    r = sub.add_parser("fidelity", help="readout fidelity versus photon number")
    r.add_argument("--config")
    r.add_argument("--contrast", type=float)
    r.add_argument("--n-min", type=float)
    r.add_argument("--n-max", type=float)
    r.add_argument("--n-points", type=int)
    r.add_argument("--linear", dest="log_grid", action="store_false", default=None)
    r.add_argument("-o", "--out")
    r.set_defaults(func=cmd_fidelity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError, FitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
