"""
TWINDOT Command Line
Config parsing, scan execution, CSV/SVG output and figure reproduction

Subcommands: spectrum | power | map | g2 | eigen | reproduce | selftest.
Exit codes: 0 success, 1 usage or configuration error, 2 physics non-convergence.
"""

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator  # noqa: E402
from pythonjsonlogger import jsonlogger  # noqa: E402

from .. import __version__  # noqa: E402
from ..core.data_models import FockPolicy, Params, ScanResult, ScanSpec, TargetState  # noqa: E402
from ..core.dynamics import fock_converged, property_report  # noqa: E402
from ..core.exceptions import ConfigError, ParameterError, SolverError, TwinDotError  # noqa: E402
from ..core.experiments import ScanEngine, merge_results, reflectivity  # noqa: E402
from ..core.model import detuned, list_presets, load_preset, with_separation  # noqa: E402
from ..core.run_log import RunLogger  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "twindot"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNCONVERGED = 2

UNITS: Dict[str, Dict[str, float]] = {
    "energy": {"ueV": 1.0, "meV": 1e3},
    "length": {"nm": 1.0, "um": 1e3},
    "power": {"pW": 1e-12, "nW": 1e-9, "uW": 1e-6, "mW": 1e-3, "W": 1.0},
    "time": {"ps": 1e-3, "ns": 1.0, "us": 1e3},
}

# config key -> value kind
KEY_KINDS: Dict[str, str] = {
    "preset": "str", "experiment": "str", "target": "str", "out": "str",
    "fock_policy": "str", "label": "str",
    "g": "energy", "kappa": "energy", "kappa_left": "energy", "kappa_right": "energy",
    "kappa_other": "energy", "gamma": "energy", "gamma_star": "energy",
    "omega1": "energy", "omega2": "energy", "omega_c": "energy", "omega_L": "energy",
    "Omega12": "energy", "gamma12": "energy", "delta12": "energy", "center": "energy",
    "d": "length", "lambda0": "length", "power": "power",
    "n_medium": "float",
    "fock_dim": "int", "n_emitters": "int", "jobs": "int", "fock_max": "int", "seed": "int",
    "svg": "bool", "check_convergence": "bool",
    "omega_grid": "energy_grid", "power_grid": "power_grid",
    "delta12_grid": "energy_grid", "tau_grid": "time_grid",
}

SWEEP_KEYS = {
    "omega_rel": "omega_grid", "omega": "omega_grid",
    "power": "power_grid", "P_laser": "power_grid",
    "delta12": "delta12_grid", "tau": "tau_grid",
}

_PARAM_KEYS = ("g", "kappa_left", "kappa_right", "kappa_other", "gamma", "gamma_star",
               "omega1", "omega2", "omega_c", "omega_L", "Omega12", "gamma12",
               "lambda0", "n_medium", "fock_dim", "n_emitters")

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]*)\s*$")


class RunConfig(BaseModel):
    """Validated run configuration; every quantity already in internal units"""
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    preset: str = "paper-default"
    experiment: Optional[Literal["spectrum", "power", "map", "g2", "eigen"]] = None

    g: Optional[float] = None
    kappa: Optional[float] = Field(None, description="Total loss, split evenly between the mirrors")
    kappa_left: Optional[float] = None
    kappa_right: Optional[float] = None
    kappa_other: Optional[float] = None
    gamma: Optional[float] = None
    gamma_star: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    omega_c: Optional[float] = None
    omega_L: Optional[float] = None
    Omega12: Optional[float] = None
    gamma12: Optional[float] = None
    delta12: Optional[float] = Field(None, description="Place the dots at center +/- delta12")
    center: Optional[float] = None
    d: Optional[float] = Field(None, description="Dot separation (nm); derives Omega12, gamma12")
    lambda0: Optional[float] = None
    n_medium: Optional[float] = None
    power: Optional[float] = Field(None, description="Laser power (W)")
    fock_dim: Optional[int] = Field(None, ge=2)
    n_emitters: Optional[int] = None

    omega_grid: Optional[List[float]] = None
    power_grid: Optional[List[float]] = None
    delta12_grid: Optional[List[float]] = None
    tau_grid: Optional[List[float]] = None
    target: Optional[TargetState] = None

    out: str = "results"
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    fock_policy: FockPolicy = FockPolicy.AUTO
    fock_max: int = Field(20, ge=2)
    check_convergence: bool = True
    svg: bool = False
    label: str = ""
    seed: Optional[int] = Field(None, description="Reserved; the solvers are deterministic")

    @model_validator(mode="after")
    def validate_sources(self):
        given = [k for k in ("Omega12", "gamma12") if getattr(self, k) is not None]
        if self.d is not None and given:
            raise ValueError(f"d and {', '.join(given)} are mutually exclusive")
        if self.experiment in ("power", "g2") and self.target is None:
            raise ValueError(f"target is required for the {self.experiment} experiment")
        return self


def parse_quantity(text: str, kind: str, key: str) -> float:
    """
    Parse a number with an optional unit suffix into internal units

    Bare numbers are taken as µeV, nm, W or ns according to `kind`.
    """
    match = _NUMBER.match(text)
    if not match:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number", [key])
    value, suffix = float(match.group(1)), match.group(2).replace("µ", "u")
    if not suffix:
        return value
    table = UNITS.get(kind, {})
    if suffix not in table:
        raise ConfigError(
            f"{key}: unit {suffix!r} not allowed (expected one of {sorted(table)})", [key]
        )
    return value * table[suffix]


def parse_range(text: str, kind: str, key: str) -> List[float]:
    """
    Grid from `start:stop:count`, `log:start:stop:count` or a comma-separated list
    """
    if "," in text:
        return [parse_quantity(part, kind, key) for part in text.split(",") if part.strip()]
    parts = [p.strip() for p in text.split(":")]
    logarithmic = parts[0] == "log"
    if logarithmic:
        parts = parts[1:]
    if len(parts) == 1:
        return [parse_quantity(parts[0], kind, key)]
    if len(parts) != 3:
        raise ConfigError(f"{key}: range must be start:stop:count or log:start:stop:count", [key])
    start, stop = parse_quantity(parts[0], kind, key), parse_quantity(parts[1], kind, key)
    try:
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"{key}: point count {parts[2]!r} is not an integer", [key])
    if count < 1:
        raise ConfigError(f"{key}: point count must be positive", [key])
    if logarithmic:
        if start <= 0 or stop <= 0:
            raise ConfigError(f"{key}: logarithmic range needs positive bounds", [key])
        return [float(v) for v in np.geomspace(start, stop, count)]
    return [float(v) for v in np.linspace(start, stop, count)]


def _convert(key: str, text: str) -> Any:
    kind = KEY_KINDS.get(key)
    if kind is None:
        raise ConfigError(f"unknown configuration key {key!r}", [key])
    text = text.strip().strip('"').strip("'")
    if kind == "str":
        return text
    if kind == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}", [key])
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}", [key])
    if kind == "float":
        return parse_quantity(text, "plain", key)
    if kind.endswith("_grid"):
        return parse_range(text, kind[:-len("_grid")], key)
    return parse_quantity(text, kind, key)


def read_config_file(path: str) -> Dict[str, str]:
    """Flat `key = value` or `key: value` lines, `#` starts a comment"""
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"config file {path} not found", ["config"])
    raw: Dict[str, str] = {}
    for number, line in enumerate(file.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise ConfigError(f"{path}:{number}: expected key = value", [line])
        key, value = line.split(sep, 1)
        raw[key.strip()] = value.strip()
    return raw


def _config_error(error: ValidationError) -> ConfigError:
    keys, messages = [], []
    for err in error.errors():
        loc = ".".join(str(x) for x in err["loc"])
        if loc:
            keys.append(loc)
        messages.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return ConfigError("; ".join(messages), keys)


def parse_config(path: Optional[str] = None,
                 overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Build a RunConfig from a config file and/or string overrides

    Raises:
        ConfigError: missing file, unknown key, bad unit or schema violation;
            `keys` names the offending entries
    """
    raw: Dict[str, str] = read_config_file(path) if path else {}
    raw.update(overrides or {})
    data = {key: _convert(key, value) for key, value in raw.items()}

    clashing = [k for k in ("Omega12", "gamma12") if k in data]
    if "d" in data and clashing:
        raise ConfigError(
            f"d and {', '.join(clashing)} are mutually exclusive parameter sources",
            ["d"] + clashing,
        )
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise _config_error(e)


def resolve_params(config: RunConfig) -> Params:
    """Preset plus overrides, dot placement and separation-derived rates"""
    try:
        params = load_preset(config.preset)
    except ParameterError as e:
        raise ConfigError(str(e), ["preset"])

    changes = {k: getattr(config, k) for k in _PARAM_KEYS if getattr(config, k) is not None}
    if config.kappa is not None:
        changes.setdefault("kappa_left", 0.5 * config.kappa)
        changes.setdefault("kappa_right", 0.5 * config.kappa)
    if config.power is not None:
        changes["P_laser"] = config.power
    try:
        params = params.replace(**changes)
        if config.delta12 is not None:
            params = detuned(params, config.delta12, center=config.center)
        if config.d is not None:
            params = with_separation(params, config.d)
    except ValidationError as e:
        raise _config_error(e)
    return params


DEFAULT_GRIDS = {
    "omega_grid": lambda: np.linspace(-150.0, 150.0, 601),
    "power_grid": lambda: np.geomspace(1e-13, 3e-8, 45),
    "delta12_grid": lambda: np.linspace(0.0, 50.0, 201),
    "tau_grid": lambda: np.linspace(0.0, 10.0, 401),
}


def _grid(config: RunConfig, key: str) -> List[float]:
    grid = getattr(config, key)
    return list(grid) if grid is not None else [float(v) for v in DEFAULT_GRIDS[key]()]


def build_spec(config: RunConfig, params: Params) -> ScanSpec:
    common = dict(params=params, target=config.target, label=config.label,
                  fock_policy=config.fock_policy, fock_max=config.fock_max,
                  check_convergence=config.check_convergence)
    try:
        if config.experiment == "spectrum":
            return ScanSpec(axis="omega_rel", grid=_grid(config, "omega_grid"), **common)
        if config.experiment == "power":
            return ScanSpec(axis="P_laser", grid=_grid(config, "power_grid"), **common)
        if config.experiment == "map":
            delta = config.delta12_grid or [float(v) for v in np.linspace(0.0, 50.0, 26)]
            powers = config.power_grid or [float(v) for v in np.geomspace(1e-13, 1e-8, 21)]
            return ScanSpec(axis="delta12", grid=delta, secondary_axis="P_laser",
                            secondary_grid=powers, **common)
        if config.experiment == "g2":
            return ScanSpec(axis="tau", grid=_grid(config, "tau_grid"), **common)
        if config.experiment == "eigen":
            return ScanSpec(axis="delta12", grid=_grid(config, "delta12_grid"), **common)
    except ValidationError as e:
        raise _config_error(e)
    raise ConfigError("no experiment selected", ["experiment"])


def _run_scan(engine: ScanEngine, kind: str, spec: ScanSpec) -> ScanResult:
    scans = {
        "spectrum": engine.spectrum_scan,
        "power": engine.power_scan,
        "map": engine.detuning_power_map,
        "g2": engine.g2_scan,
        "eigen": engine.coefficients_scan,
    }
    return scans[kind](spec)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, int, np.floating, np.integer)):
        return format(float(value), ".12g")
    return str(value)


def write_csv(result: ScanResult, path: Path) -> int:
    """
    Write a self-describing CSV

    `#` header lines carry the kind, label, code version and every metadata
    entry as JSON. Unconverged points are left out; the return value is how
    many were dropped.
    """
    with_flags = any(p.fock_dim is not None for p in result.points)
    kept = [p for p in result.points if p.converged]
    dropped = len(result.points) - len(kept)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# twindot {__version__}\n")
        f.write(f"# kind: {result.kind}\n")
        f.write(f"# label: {result.label}\n")
        for key in sorted(result.metadata):
            f.write(f"# {key}: {json.dumps(result.metadata[key], sort_keys=True, default=str)}\n")
        f.write(f"# excluded_unconverged: {dropped}\n")

        writer = csv.writer(f, lineterminator="\n")
        header = list(result.columns) + (["converged", "fock_dim"] if with_flags else [])
        writer.writerow(header)
        for point in kept:
            row = [_format(point.values[c]) for c in result.columns]
            if with_flags:
                row += ["1", str(point.fock_dim)]
            writer.writerow(row)
    return dropped


_AXES = {
    "spectrum": ("omega_rel_ueV", ["reflectivity"], "ω_L − (ω₁+ω₂)/2 (µeV)", "R", False),
    "power": ("P_laser_W", ["reflectivity"], "P_laser (W)", "R", True),
    "g2": ("tau_ns", ["g2"], "τ (ns)", "g₂(τ)", False),
    "eigen": ("delta12_ueV", ["mu", "nu", "mu_analytic", "nu_analytic"], "Δ₁₂ (µeV)",
              "coefficient modulus", False),
}


def write_svg(result: ScanResult, path: Path):
    """Plot a result with matplotlib; the SVG carries no date and a fixed hash salt"""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    kind = result.kind
    curves = sorted(set(result.column("curve"))) if "curve" in result.columns else [None]
    points = [p for p in result.points if p.converged]

    if kind == "map":
        deltas = sorted({p.values["delta12_ueV"] for p in points})
        powers = sorted({p.values["P_laser_W"] for p in points})
        grid = np.full((len(deltas), len(powers)), np.nan)
        for p in points:
            grid[deltas.index(p.values["delta12_ueV"]), powers.index(p.values["P_laser_W"])] = \
                p.values["reflectivity"]
        mesh = ax.pcolormesh(powers, deltas, grid, shading="nearest", vmin=0.0, vmax=1.0)
        ax.set_xscale("log")
        ax.set_xlabel("P_laser (W)")
        ax.set_ylabel("Δ₁₂ (µeV)")
        fig.colorbar(mesh, ax=ax, label="R")
    else:
        x_name, y_names, x_label, y_label, log_x = _AXES[kind]
        for curve in curves:
            rows = [p for p in points if curve is None or p.values.get("curve") == curve]
            x = [p.values[x_name] for p in rows]
            for y_name in y_names:
                if y_name not in result.columns:
                    continue
                label = y_name if curve is None else f"{curve} {y_name}"
                style = "--" if y_name.endswith("_analytic") else "-"
                ax.plot(x, [p.values[y_name] for p in rows], style, label=label, lw=1.2)
        if kind == "eigen":
            for guide in result.metadata.get("guides_ueV", []):
                ax.axvline(guide, color="0.5", lw=0.8, ls=":")
        if log_x:
            ax.set_xscale("log")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.legend(fontsize=7)

    ax.set_title(result.label or kind)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_outputs(result: ScanResult, out: Path, stem: str, svg: bool) -> List[str]:
    csv_path = out / f"{stem}.csv"
    dropped = write_csv(result, csv_path)
    outputs = [str(csv_path)]
    if dropped:
        logger.warning("left unconverged points out of the CSV",
                       extra={"excluded": dropped, "csv": str(csv_path)})
    if svg:
        svg_path = out / f"{stem}.svg"
        write_svg(result, svg_path)
        outputs.append(str(svg_path))
    for item in outputs:
        print(f"wrote {item}")
    return outputs


def run(config: RunConfig) -> int:
    """
    Execute one experiment and write its artifacts

    Returns:
        Exit code: 0 success, 1 configuration error, 2 non-convergence
    """
    out = Path(config.out)
    run_logger = RunLogger(str(out))
    kind = config.experiment or "unknown"
    try:
        params = resolve_params(config)
        spec = build_spec(config, params)
        run_logger.log_run_started(kind, params.model_dump(), {
            "fock_policy": config.fock_policy.value, "jobs": config.jobs,
            "n_points": len(spec.grid) * len(spec.secondary_grid or [None]),
        })
        logger.info("run started", extra={"experiment": kind, "points": len(spec.grid)})

        result = _run_scan(ScanEngine(config.jobs, run_logger), kind, spec)
        stem = kind + (f"_{config.label}" if config.label else "")
        outputs = _write_outputs(result, out, stem, config.svg)
    except (ConfigError, ParameterError) as e:
        logger.error("configuration rejected: %s", e)
        run_logger.log_run_failed(kind, e)
        return EXIT_USAGE
    except SolverError as e:
        logger.error("solver failed: %s", e, extra={"diagnostics": e.diagnostics})
        run_logger.log_run_failed(kind, e)
        return EXIT_UNCONVERGED

    unconverged = sum(not p.converged for p in result.points)
    run_logger.log_run_completed(kind, len(result.points), unconverged, outputs)
    logger.info("run completed", extra={"experiment": kind, "unconverged": unconverged})
    return EXIT_UNCONVERGED if unconverged else EXIT_OK


FIGURE_FOCK = {5: 6, 6: 6, 7: 6, 8: 4}
FIGURE_POWERS_W = (1e-12, 1e-9, 1e-8)


def _figure_result(figure: int, engine: ScanEngine, fock: Optional[int]) -> ScanResult:
    n = fock or FIGURE_FOCK.get(figure, 12)

    def preset(name: str, **changes) -> Params:
        return load_preset(name).replace(fock_dim=n, **changes)

    def spec(params: Params, axis: str, grid: Sequence[float], **kwargs) -> ScanSpec:
        return ScanSpec(params=params, axis=axis, grid=[float(v) for v in grid], **kwargs)

    if figure == 3:
        result = engine.coefficients_scan(
            spec(preset("paper-default"), "delta12", np.linspace(0.0, 50.0, 201), label="figure3"))
    elif figure == 4:
        result = engine.coefficients_scan(
            spec(preset("case-b"), "delta12", np.linspace(0.0, 50.0, 201), label="figure4"))
    elif figure == 5:
        curves = {}
        for case in ("case-a", "case-b", "case-c", "case-d", "case-e"):
            for P in FIGURE_POWERS_W:
                label = f"{case}@{P:g}W"
                curves[label] = engine.spectrum_scan(spec(
                    preset(case, P_laser=P), "omega_rel", np.linspace(-150.0, 150.0, 601),
                    label=label))
        result = merge_results(curves, "spectrum")
    elif figure == 6:
        powers = np.geomspace(1e-13, 3e-8, 45)
        setups = {
            "single-qd": (preset("single-qd"), TargetState.SINGLE_QD),
            "plus-dd@20": (preset("case-d"), TargetState.PLUS_DD),
            "minus-dd@20": (preset("case-d"), TargetState.MINUS_DD),
            "minus-dd@10": (preset("case-e"), TargetState.MINUS_DD),
        }
        result = merge_results({
            label: engine.power_scan(spec(p, "P_laser", powers, target=t, label=label))
            for label, (p, t) in setups.items()
        }, "power")
    elif figure == 7:
        result = engine.detuning_power_map(ScanSpec(
            params=preset("case-d"), axis="delta12",
            grid=[float(v) for v in np.linspace(0.0, 50.0, 26)],
            secondary_axis="P_laser",
            secondary_grid=[float(v) for v in np.geomspace(1e-13, 1e-8, 21)],
            label="figure7"))
    elif figure == 8:
        tau = np.linspace(0.0, 10.0, 501)
        setups = {
            "single-qd": (preset("single-qd", P_laser=1e-11), TargetState.SINGLE_QD),
            "plus-dd@20": (preset("case-d", P_laser=1e-11), TargetState.PLUS_DD),
            "minus-dd@20": (preset("case-d", P_laser=1e-11), TargetState.MINUS_DD),
            "minus-dd@10": (preset("case-e", P_laser=1e-11), TargetState.MINUS_DD),
        }
        result = merge_results({
            label: engine.g2_scan(spec(p, "tau", tau, target=t, label=label))
            for label, (p, t) in setups.items()
        }, "g2")
    else:
        raise ConfigError(f"no figure {figure}; choose 3 to 8", ["figure"])
    result.label = f"figure{figure}"
    return result


def reproduce(figure: int, out: str = "results", jobs: int = 1,
              fock: Optional[int] = None, svg: bool = True) -> int:
    """Regenerate one published figure as CSV + SVG"""
    run_logger = RunLogger(out)
    experiment = f"figure{figure}"
    try:
        run_logger.log_run_started(experiment, {}, {"jobs": jobs, "fock": fock})
        result = _figure_result(figure, ScanEngine(jobs, run_logger), fock)
        outputs = _write_outputs(result, Path(out), experiment, svg)
    except (ConfigError, ParameterError) as e:
        logger.error("reproduce rejected: %s", e)
        run_logger.log_run_failed(experiment, e)
        return EXIT_USAGE
    except SolverError as e:
        logger.error("solver failed: %s", e, extra={"diagnostics": e.diagnostics})
        run_logger.log_run_failed(experiment, e)
        return EXIT_UNCONVERGED
    unconverged = sum(not p.converged for p in result.points)
    run_logger.log_run_completed(experiment, len(result.points), unconverged, outputs)
    return EXIT_UNCONVERGED if unconverged else EXIT_OK


SELFTEST_LIMITS = {
    "residual": 1e-9,
    "trace_error": 1e-9,
    "dissipator_difference": 1e-12,
    "propagation_distance": 1e-6,
}


def selftest(out: str = "results", fock: Optional[int] = None,
             presets: Optional[Sequence[str]] = None) -> int:
    """
    Solver property suite on every preset

    Writes selftest.csv; exit 0 when every check passes, 2 otherwise.
    """
    rows = []
    for name in presets or list_presets():
        params = load_preset(name)
        if fock:
            params = params.replace(fock_dim=fock)
        try:
            report = property_report(params)
            fock_ok = all(
                fock_converged(reflectivity(p), reflectivity(p.replace(fock_dim=p.fock_dim + 2)))
                for p in (params.replace(P_laser=P) for P in FIGURE_POWERS_W)
            )
        except TwinDotError as e:
            logger.error("selftest failed on %s: %s", name, e)
            rows.append({"preset": name, "passed": False, "error": str(e)})
            continue
        passed = all(report[k] <= limit for k, limit in SELFTEST_LIMITS.items())
        passed = passed and report["min_eigenvalue"] > -1e-8 and fock_ok
        rows.append({"preset": name, **report, "fock_converged": fock_ok, "passed": passed})
        logger.info("selftest %s", "passed" if passed else "FAILED", extra={"preset": name})

    columns = ["preset", "residual", "trace_error", "min_eigenvalue", "generator_trace_error",
               "dissipator_difference", "propagation_distance", "fock_converged", "passed"]
    path = Path(out) / "selftest.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# twindot {__version__}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(c, "")) for c in columns])
    print(f"wrote {path}")
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_UNCONVERGED


def configure_logging(level: str = "INFO", json_format: bool = False):
    """Install one stderr handler on the twindot logger, JSON or plain text"""
    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(jsonlogger.JsonFormatter(
            "%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("twindot")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (default: results)")
    common.add_argument("--jobs", type=int, help="worker threads (default: all cores)")
    common.add_argument("--fock", type=int, help="cavity truncation N")
    common.add_argument("--svg", action="store_true", help="also write an SVG plot")
    common.add_argument("--log-level", default="INFO")
    common.add_argument("--log-json", action="store_true", help="JSON log lines on stderr")

    scan = _ArgumentParser(add_help=False)
    scan.add_argument("--preset", help=f"parameter preset, one of {list_presets()}")
    scan.add_argument("--target", choices=[t.value for t in TargetState])
    scan.add_argument("--sweep", action="append", default=[], metavar="NAME=RANGE",
                      help="grid for an axis, e.g. delta12=0:50:200 or power=log:1pW:10nW:41")
    scan.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                      help="override any config key, e.g. --set power=10nW")

    parser = _ArgumentParser(prog="twindot", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"twindot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "power", "map", "g2", "eigen"):
        sub.add_parser(name, parents=[common, scan], help=f"run the {name} experiment")
    reproduce_parser = sub.add_parser("reproduce", parents=[common], help="regenerate a figure")
    reproduce_parser.add_argument("--figure", type=int, required=True, choices=range(3, 9))
    sub.add_parser("selftest", parents=[common], help="solver property suite on all presets")
    return parser


def _split_pair(text: str, flag: str) -> List[str]:
    if "=" not in text:
        raise ConfigError(f"{flag} expects NAME=VALUE, got {text!r}", [flag])
    return [part.strip() for part in text.split("=", 1)]


def _overrides(args: argparse.Namespace) -> Dict[str, str]:
    overrides = {"experiment": args.command}
    for item in args.set:
        key, value = _split_pair(item, "--set")
        overrides[key] = value
    for item in args.sweep:
        name, value = _split_pair(item, "--sweep")
        if name not in SWEEP_KEYS:
            raise ConfigError(f"cannot sweep {name!r}; choose from {sorted(SWEEP_KEYS)}", [name])
        overrides[SWEEP_KEYS[name]] = value
    for key, value in (("preset", args.preset), ("target", args.target), ("out", args.out),
                       ("jobs", args.jobs), ("fock_dim", args.fock)):
        if value is not None:
            overrides[key] = str(value)
    if args.svg:
        overrides["svg"] = "true"
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"twindot: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level, args.log_json)
    out = args.out or "results"
    jobs = args.jobs or os.cpu_count() or 1

    if args.command == "reproduce":
        return reproduce(args.figure, out, jobs, args.fock, svg=True)
    if args.command == "selftest":
        return selftest(out, args.fock)

    try:
        config = parse_config(args.config, _overrides(args))
    except ConfigError as e:
        logger.error("configuration rejected: %s", e, extra={"keys": e.keys})
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
