"""Command-line scenario runner.

    sagnacsim run <scenario> [--preset NAME] [--config FILE] [--seed N]
                             [--output-dir DIR] [--workers N] [--<key> VALUE ...]
    sagnacsim validate <config.json>
    sagnacsim presets list

Configuration is one flat JSON object.  Values resolve with precedence
command-line flags > config file > preset > built-in defaults.  Unknown keys
are rejected.  ``--workers`` only sets parallelism and is not part of the
config: outputs are identical for any worker count.

Randomness: every random draw comes from a named substream of the top-level
seed, ``SeedSequence(seed, spawn_key=(index,))`` with the indices in
``SUBSTREAMS``.

Exit codes: 0 ok, 2 config/schema errors, 3 numerical failures, 4 I/O
errors.  Failures print one JSON line on standard error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from . import io as sio
from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    ResolutionError,
    SagnacSimError,
    StatisticsError,
    NoFringeError,
    UndefinedAngleError,
)
from .hybridstate import (
    DelayChirpParams,
    FacetReflection,
    HybridState,
    estimate_fringe_angle,
    fidelity_bound_vs_reflectivity,
    fringe_angle_analytic,
    polarization_density_matrix,
    polarization_resolved_jsi,
)
from .interference import heralded_idler_state, hom_scan, visibility_pol, FACET_PASSES_PER_HERALDED_IDLER
from .jsa import (
    PhasematchModel,
    PumpEnvelope,
    SpectralFilter,
    build_jsa,
    default_grid,
    jsi,
    schmidt_decompose,
    wavelength_to_omega,
)
from .statistics import (
    DetectorModel,
    LossBudget,
    RateRecord,
    SourceOperatingPoint,
    brightness_fit,
    expected_rates,
    heralded_g2_analytic,
    heralded_g2_monte_carlo,
    klyshko,
    linear_range,
    loss_budget_total,
)
from .tomography import (
    error_bars_monte_carlo,
    fidelity,
    mle_reconstruct,
    projector_set_overcomplete,
    simulate_counts,
    tangle,
    visibility_curve,
)

SCENARIOS = ("jsi", "fringes", "fidelity-vs-R", "hom-scan", "power-scan", "tomography", "g2", "loss-budget")
SUBSTREAMS = {"tomography-counts": 0, "tomography-resample": 1, "g2": 2, "power-noise": 3}

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


# -- schema -----------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    kind: str  # float | int | bool | str | list | budget
    default: Any
    check: Optional[Callable[[Any], Optional[str]]] = None
    help: str = ""


def _positive(v):
    return None if v > 0 else "must be > 0"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _unit(v):
    return None if 0 <= v <= 1 else "must lie in [0, 1]"


def _reflectivity(v):
    return None if 0 <= v < 1 else "must lie in [0, 1)"


def _min(n):
    return lambda v: None if v >= n else f"must be >= {n}"


def _one_of(*choices):
    return lambda v: None if v in choices else f"must be one of {', '.join(map(str, choices))}"


def _positive_list(v):
    if not v or any(not isinstance(x, (int, float)) or isinstance(x, bool) or not x > 0 for x in v):
        return "must be a non-empty list of positive numbers"
    return None


def _budget(v):
    for item in v:
        if (not isinstance(item, list) or len(item) != 2 or not isinstance(item[0], str)
                or not isinstance(item[1], (int, float)) or isinstance(item[1], bool)
                or not 0 <= item[1] <= 1):
            return "must be a list of [label, transmission in [0, 1]] pairs"
    return None


SCHEMA: Dict[str, Field] = {
    "scenario": Field("str", "jsi", _one_of(*SCENARIOS)),
    "seed": Field("int", 0, lambda v: None if 0 <= v < 2**64 else "must be a 64-bit unsigned integer"),
    "output_dir": Field("str", "sagnacsim-out"),
    # spectra
    "grid_points": Field("int", 256, _min(16)),
    "pump_wavelength": Field("float", 770.0, _positive, "nm"),
    "pump_fwhm": Field("float", 1.8, _positive, "nm"),
    "crystal_length": Field("float", 9.0, _positive, "mm"),
    "phasematch_shape": Field("str", "sinc", _one_of("sinc", "gaussian")),
    "filters": Field("bool", True),
    "filter_center": Field("float", 0.0, _nonneg, "nm; 0 means twice the pump wavelength"),
    "signal_filter_fwhm": Field("float", 8.0, _positive, "nm"),
    "signal_filter_order": Field("int", 2, _min(1)),
    "idler_filter_fwhm": Field("float", 12.0, _positive, "nm"),
    "idler_filter_order": Field("int", 1, _min(1)),
    # two-path state
    "phase": Field("float", math.pi, lambda v: None if math.isfinite(v) else "must be finite", "rad"),
    "tau_p": Field("float", 0.0, None, "fs"),
    "tau_s": Field("float", 0.0, None, "fs"),
    "tau_i": Field("float", 0.0, None, "fs"),
    "chirp_p": Field("float", 0.0, None, "fs^2, counter-clockwise pump chirp"),
    "chirp_s": Field("float", 0.0, None, "fs^2"),
    "chirp_i": Field("float", 0.0, None, "fs^2"),
    "reflectivity": Field("float", 0.02, _reflectivity, "per facet pass per photon"),
    "fringe_pump_wavelengths": Field("list", [768.0, 772.0], _positive_list, "nm"),
    # fidelity-vs-R
    "r_max": Field("float", 0.1, lambda v: None if 0 < v < 1 else "must lie in (0, 1)"),
    "points": Field("int", 101, _min(2)),
    # hom-scan
    "hwp_max_deg": Field("float", 90.0, _positive),
    "hwp_points": Field("int", 181, _min(5)),
    # counting statistics
    "rep_rate": Field("float", 76e6, _positive, "Hz"),
    "schmidt_modes": Field("float", 1.0, _min(1)),
    "eta_signal": Field("float", 0.38, _unit),
    "eta_idler": Field("float", 0.468, _unit),
    "dark_rate_signal": Field("float", 0.0, _nonneg, "Hz"),
    "dark_rate_idler": Field("float", 0.0, _nonneg, "Hz"),
    "dead_time_ns": Field("float", 25.0, _nonneg),
    "latching_threshold": Field("float", 0.0, _nonneg, "counts/s; 0 disables"),
    "brightness": Field("float", 3.5e6, _positive, "pairs/(s mW) inside the source"),
    "powers_mw": Field("list", [round(0.1 * k, 10) for k in range(1, 21)], _positive_list),
    "integration_s": Field("float", 1.0, _positive),
    "exclude_head": Field("int", 2, _nonneg),
    "exclude_tail": Field("int", 5, _nonneg),
    "mean_pairs": Field("float", 0.003, _nonneg),
    "n_pulses": Field("int", 10_000_000, _min(1)),
    # tomography
    "coincidence_rate": Field("float", 59000.0, _positive, "pairs/s per setting"),
    "accidental_rate": Field("float", 30.0, _nonneg, "coincidences/s per setting"),
    "n_resamples": Field("int", 100, _min(100)),
    # loss budgets
    "signal_budget": Field("budget", [["waveguide output coupling", 0.85], ["fiber coupling", 0.66],
                                      ["filter", 0.95], ["detector", 0.90]], _budget),
    "idler_budget": Field("budget", [["waveguide output coupling", 0.79], ["fiber coupling", 0.84],
                                     ["filter", 0.95], ["detector", 0.90]], _budget),
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "paper-chip1": {},
    "paper-fig2": {"tau_s": 300.0, "tau_i": -300.0, "chirp_p": 5800.0, "filters": False, "reflectivity": 0.0},
    "paper-chip2": {"reflectivity": 0.0006},
}
PRESET_HELP = {
    "paper-chip1": "9 mm waveguide, 1.8 nm pump, 8/12 nm filters, 2% facet reflectivity",
    "paper-fig2": "600 fs signal-idler delay and 5800 fs^2 pump chirp, unfiltered spectra",
    "paper-chip2": "chip-1 spectra with 0.06% facet reflectivity",
}


def _coerce(key: str, value, violations: List[str]):
    field = SCHEMA[key]
    kind = field.kind
    try:
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            value = float(value)
        elif kind == "int":
            if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
                raise TypeError
            value = int(value)
        elif kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
        elif kind == "str":
            if not isinstance(value, str):
                raise TypeError
        elif kind in ("list", "budget"):
            if not isinstance(value, list):
                raise TypeError
            if kind == "list":
                value = [float(x) if isinstance(x, (int, float)) and not isinstance(x, bool) else x for x in value]
    except TypeError:
        violations.append(f"{key}: expected {kind}, got {type(value).__name__}")
        return None
    if kind == "float" and not math.isfinite(value):
        violations.append(f"{key}: must be finite")
        return None
    if field.check is not None:
        msg = field.check(value)
        if msg:
            violations.append(f"{key}: {msg}")
            return None
    return value


def normalise_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def validate_config(doc: Dict[str, Any]) -> List[str]:
    """All schema and range violations in a (partial) config mapping."""
    violations: List[str] = []
    if not isinstance(doc, dict):
        return ["config: must be a JSON object"]
    for key, value in doc.items():
        norm = normalise_key(key)
        if norm == "preset":
            if value not in PRESETS:
                violations.append(f"preset: unknown preset {value!r}")
            continue
        if norm not in SCHEMA:
            violations.append(f"{key}: unknown key")
            continue
        _coerce(norm, value, violations)
    return violations


def resolve_config(preset: Optional[str] = None, file_doc: Optional[dict] = None,
                   overrides: Optional[dict] = None) -> Dict[str, Any]:
    """Merge defaults < preset < file < overrides and validate the result."""
    file_doc = dict(file_doc or {})
    overrides = dict(overrides or {})
    violations = validate_config(file_doc) + validate_config(overrides)
    if violations:
        raise ConfigError(violations)
    file_doc = {normalise_key(k): v for k, v in file_doc.items()}
    overrides = {normalise_key(k): v for k, v in overrides.items()}
    name = overrides.pop("preset", None) or preset or file_doc.pop("preset", None) or "paper-chip1"
    file_doc.pop("preset", None)
    if name not in PRESETS:
        raise ConfigError([f"preset: unknown preset {name!r}"])
    merged = {k: f.default for k, f in SCHEMA.items()}
    merged.update(PRESETS[name])
    merged.update(file_doc)
    merged.update(overrides)
    violations = []
    resolved = {k: _coerce(k, merged[k], violations) for k in SCHEMA}
    if resolved.get("exclude_head") is not None and resolved.get("powers_mw") is not None:
        if resolved["exclude_head"] + resolved["exclude_tail"] + 3 > len(resolved["powers_mw"]):
            violations.append("exclude_head: head and tail exclusions leave fewer than three powers")
    if violations:
        raise ConfigError(violations)
    resolved["preset"] = name
    return resolved


# -- scenario helpers -------------------------------------------------------

def substream_seed(seed: int, name: str) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(SUBSTREAMS[name],))
    return int(ss.generate_state(1, np.uint64)[0])


def _filters(cfg, pump_wavelength):
    if not cfg["filters"]:
        return []
    center = cfg["filter_center"] or 2.0 * pump_wavelength
    return [
        SpectralFilter(center, cfg["signal_filter_fwhm"], cfg["signal_filter_order"], "signal"),
        SpectralFilter(center, cfg["idler_filter_fwhm"], cfg["idler_filter_order"], "idler"),
    ]


def _phasematch(cfg):
    reference = PumpEnvelope(cfg["pump_wavelength"], cfg["pump_fwhm"])
    return PhasematchModel.matched_to_pump(reference, cfg["crystal_length"], cfg["phasematch_shape"])


def build_config_jsa(cfg, pump_wavelength=None):
    wl = cfg["pump_wavelength"] if pump_wavelength is None else pump_wavelength
    env = PumpEnvelope(wl, cfg["pump_fwhm"])
    pm = _phasematch(cfg)
    grid = default_grid(env, pm, cfg["grid_points"])
    return build_jsa(env, pm, grid, _filters(cfg, cfg["pump_wavelength"]))


def _delays(cfg) -> DelayChirpParams:
    return DelayChirpParams(cfg["tau_p"], cfg["tau_s"], cfg["tau_i"], cfg["chirp_p"], cfg["chirp_s"], cfg["chirp_i"])


def _chirp_reference(cfg):
    # chirps are referenced to degeneracy of the nominal pump
    center = float(wavelength_to_omega(cfg["pump_wavelength"])) / 2.0
    return (center, center)


class Outputs:
    """Collects rendered files, then writes them atomically in one go."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.files: Dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def grid(self, name: str, grid, values, comments=()):
        values = np.asarray(values)
        header = list(sio.GRID_HEADER) + list(comments)
        if np.iscomplexobj(values):
            self.add(f"{name}_re.csv", sio.grid_to_csv(grid.signal_axis, grid.idler_axis, values.real, header + ["part: real"]))
            self.add(f"{name}_im.csv", sio.grid_to_csv(grid.signal_axis, grid.idler_axis, values.imag, header + ["part: imaginary"]))
        else:
            self.add(f"{name}.csv", sio.grid_to_csv(grid.signal_axis, grid.idler_axis, values, header))

    def json(self, name: str, doc):
        self.add(name, sio.dumps_json(doc))

    def table(self, name: str, header, rows):
        self.add(name, sio.table_to_csv(header, rows))

    def write(self, manifest: dict) -> List[Path]:
        written = [sio.atomic_write(self.directory / n, t) for n, t in sorted(self.files.items())]
        manifest = dict(manifest)
        manifest["outputs"] = {n: hashlib.sha256(t.encode()).hexdigest() for n, t in sorted(self.files.items())}
        written.append(sio.write_json(self.directory / "manifest.json", manifest))
        return written


def scenario_jsi(cfg, out: Outputs, workers: int):
    jsa = build_config_jsa(cfg)
    spectrum = schmidt_decompose(jsa)
    out.grid("jsi", jsa.grid, jsi(jsa), ["joint spectral intensity, normalised to unit integral"])
    out.grid("jsa", jsa.grid, jsa.values, ["joint spectral amplitude"])
    out.table("schmidt.csv", ("k", "coefficient", "probability"),
              [(k, float(c), float(p)) for k, (c, p) in enumerate(zip(spectrum.coefficients, spectrum.probabilities))][:64])
    return {
        "purity": spectrum.purity,
        "schmidt_number": spectrum.schmidt_number,
        "filter_transmission": jsa.filter_transmission,
        "grid_points": cfg["grid_points"],
    }


def scenario_fringes(cfg, out: Outputs, workers: int):
    params = _delays(cfg)
    summary = {"panels": []}
    for wl in cfg["fringe_pump_wavelengths"]:
        jsa = build_config_jsa(cfg, wl)
        state = HybridState.from_jsa(jsa, params, cfg["phase"], _chirp_reference(cfg))
        hv = polarization_resolved_jsi(state, "H", "V")
        dd = polarization_resolved_jsi(state, "D", "D")
        tag = f"{wl:g}nm"
        out.grid(f"jsi_HV_{tag}", jsa.grid, hv, [f"|HV> projection, pump {wl:g} nm"])
        out.grid(f"jsi_DD_{tag}", jsa.grid, dd, [f"|DD> projection, pump {wl:g} nm"])
        # the pump chirp acts as an extra pump delay at the shifted pump centre
        dwp = float(wavelength_to_omega(wl)) - 2.0 * _chirp_reference(cfg)[0]
        effective = DelayChirpParams(params.tau_p + 2.0 * params.chirp_p * dwp, params.tau_s, params.tau_i)
        panel = {"pump_wavelength": wl, "p_DD": float(np.sum(dd) * jsa.grid.cell),
                 "overlap_abs": abs(state.overlap)}
        try:
            panel["angle_analytic_deg"] = math.degrees(fringe_angle_analytic(effective))
        except UndefinedAngleError:
            panel["angle_analytic_deg"] = None
        try:
            panel["angle_estimated_deg"] = math.degrees(
                estimate_fringe_angle(dd, (jsa.grid.d_signal, jsa.grid.d_idler), reference=hv))
        except NoFringeError:
            panel["angle_estimated_deg"] = None
        summary["panels"].append(panel)
    return summary


def scenario_fidelity_vs_r(cfg, out: Outputs, workers: int):
    rs = np.linspace(0.0, cfg["r_max"], cfg["points"])
    fs = fidelity_bound_vs_reflectivity(rs)
    out.table("fidelity_vs_R.csv", ("reflectivity", "fidelity_bound"), [(float(r), float(f)) for r, f in zip(rs, fs)])
    return {"fidelity_at_zero": float(fs[0]), "reflectivity": cfg["reflectivity"],
            "fidelity_at_reflectivity": fidelity_bound_vs_reflectivity(cfg["reflectivity"])}


def scenario_hom_scan(cfg, out: Outputs, workers: int):
    jsa = build_config_jsa(cfg)
    idler = heralded_idler_state(jsa)
    angles_deg = np.linspace(0.0, cfg["hwp_max_deg"], cfg["hwp_points"])
    refl = FacetReflection(cfg["reflectivity"])
    probs = hom_scan(idler, idler, np.radians(angles_deg), refl)
    out.table("hom_scan.csv", ("hwp_angle_deg", "coincidence_probability"),
              [(float(a), float(p)) for a, p in zip(angles_deg, probs)])
    n_max, n_min = hom_scan(idler, idler, [0.0, math.pi / 8.0], refl)
    return {"n_max": float(n_max), "n_min": float(n_min), "visibility": visibility_pol(n_max, n_min),
            "purity": idler.purity(), "reflectivity": cfg["reflectivity"],
            "facet_passes_per_heralded_idler": FACET_PASSES_PER_HERALDED_IDLER}


def _detector(cfg) -> DetectorModel:
    return DetectorModel(1.0, cfg["dead_time_ns"], cfg["latching_threshold"] or None)


def scenario_power_scan(cfg, out: Outputs, workers: int):
    rng = np.random.default_rng(substream_seed(cfg["seed"], "power-noise"))
    det = _detector(cfg)
    t = cfg["integration_s"]
    records, rows = [], []
    for power in cfg["powers_mw"]:
        mu = cfg["brightness"] * power / cfg["rep_rate"]
        op = SourceOperatingPoint(mu, cfg["rep_rate"], cfg["schmidt_modes"], cfg["eta_signal"], cfg["eta_idler"],
                                  cfg["dark_rate_signal"], cfg["dark_rate_idler"])
        exp = expected_rates(op, det, power)
        c = rng.poisson(exp.coincidences * t)
        s = max(rng.poisson(exp.singles_signal * t), c)
        i = max(rng.poisson(exp.singles_idler * t), c)
        rec = RateRecord(power, s / t, i / t, c / t)
        records.append(rec)
        eta_s, eta_i = klyshko(rec) if s > 0 and i > 0 else (0.0, 0.0)
        rows.append((float(power), float(rec.singles_signal), float(rec.singles_idler), float(rec.coincidences),
                     float(eta_s), float(eta_i)))
    out.table("power_scan.csv", ("power_mW", "singles_s", "singles_i", "coincidences", "eta_s", "eta_i"), rows)
    head, tail = cfg["exclude_head"], cfg["exclude_tail"]
    core = records[head:len(records) - tail]
    core_linear = linear_range(core, det)
    slope, err = brightness_fit(core, det)
    etas = np.array([klyshko(r) for r in core_linear])
    return {"brightness": slope, "brightness_sigma": err, "brightness_true": cfg["brightness"],
            "eta_s_mean": float(etas[:, 0].mean()), "eta_i_mean": float(etas[:, 1].mean()),
            "points_used": len(core_linear)}


def scenario_g2(cfg, out: Outputs, workers: int):
    op = SourceOperatingPoint(cfg["mean_pairs"], cfg["rep_rate"], cfg["schmidt_modes"], cfg["eta_signal"],
                              cfg["eta_idler"], cfg["dark_rate_signal"], cfg["dark_rate_idler"])
    g2, err = heralded_g2_monte_carlo(op, cfg["n_pulses"], substream_seed(cfg["seed"], "g2"), workers)
    analytic = heralded_g2_analytic(cfg["mean_pairs"], cfg["eta_signal"])
    mu = cfg["mean_pairs"]
    return {"g2": g2, "g2_sigma": err, "g2_analytic": analytic,
            "g2_over_mu": g2 / mu if mu else None, "g2_analytic_over_mu": analytic / mu if mu else None,
            "n_pulses": cfg["n_pulses"]}


def scenario_tomography(cfg, out: Outputs, workers: int):
    jsa = build_config_jsa(cfg)
    state = HybridState.from_jsa(jsa, _delays(cfg), cfg["phase"], _chirp_reference(cfg))
    rho_true = polarization_density_matrix(state, FacetReflection(cfg["reflectivity"]))
    t = cfg["integration_s"]
    settings = projector_set_overcomplete()
    # four outcomes of a product basis share the pair flux
    records = simulate_counts(rho_true, settings, 4.0 * cfg["coincidence_rate"] * t,
                              substream_seed(cfg["seed"], "tomography-counts"),
                              accidentals_per_setting=cfg["accidental_rate"] * t, integration_time=t)
    rho = mle_reconstruct(records)
    bars = error_bars_monte_carlo(records, cfg["n_resamples"], substream_seed(cfg["seed"], "tomography-resample"),
                                  workers=workers)
    out.add("counts.csv", sio.counts_to_csv(records))
    out.json("rho.json", sio.density_matrix_to_json(rho))
    out.json("rho_model.json", sio.density_matrix_to_json(rho_true))
    return {
        "fidelity": fidelity(rho), "fidelity_sigma": bars.fidelity_sigma,
        "tangle": tangle(rho), "tangle_sigma": bars.tangle_sigma,
        "v_rect": visibility_curve(rho, "rectilinear").visibility,
        "v_diag": visibility_curve(rho, "diagonal").visibility,
        "fidelity_model": fidelity(rho_true), "resample_failures": bars.failures,
    }


def scenario_loss_budget(cfg, out: Outputs, workers: int):
    summary = {}
    for arm in ("signal", "idler"):
        budget = LossBudget(tuple((label, t) for label, t in cfg[f"{arm}_budget"]))
        summary[f"{arm}_total"] = loss_budget_total(budget)
        summary[f"{arm}_components"] = [[label, t] for label, t in budget.components]
    summary["measured_klyshko"] = {"signal": cfg["eta_signal"], "idler": cfg["eta_idler"]}
    return summary


RUNNERS = {
    "jsi": scenario_jsi,
    "fringes": scenario_fringes,
    "fidelity-vs-R": scenario_fidelity_vs_r,
    "hom-scan": scenario_hom_scan,
    "power-scan": scenario_power_scan,
    "tomography": scenario_tomography,
    "g2": scenario_g2,
    "loss-budget": scenario_loss_budget,
}


def run(cfg: Dict[str, Any], workers: int = 1) -> List[Path]:
    """Run the resolved config and write outputs plus ``manifest.json``."""
    out = Outputs(Path(cfg["output_dir"]))
    summary = RUNNERS[cfg["scenario"]](cfg, out, workers)
    summary = {"scenario": cfg["scenario"], **summary}
    out.json("summary.json", summary)
    manifest = {
        "tool": "sagnacsim",
        "version": __version__,
        "config": cfg,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return out.write(manifest)


# -- argument handling ------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_overrides(extra: List[str]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    bad: List[str] = []
    k = 0
    while k < len(extra):
        token = extra[k]
        if not token.startswith("--"):
            bad.append(f"{token}: unexpected argument")
            k += 1
            continue
        if "=" in token:
            key, value = token[2:].split("=", 1)
            k += 1
        elif k + 1 < len(extra):
            key, value = token[2:], extra[k + 1]
            k += 2
        else:
            bad.append(f"{token}: missing value")
            k += 1
            continue
        overrides[normalise_key(key)] = _parse_value(value)
    if bad:
        raise ConfigError(bad)
    return overrides


def _read_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc.msg} at line {exc.lineno})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["config: must be a JSON object"])
    return doc


def _fail(kind: str, code: int, message: str, **extra) -> int:
    doc = {"error": kind, "exit_code": code, "message": message, **extra}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagnacsim", description="Hybrid Sagnac pair-source simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario", choices=SCENARIOS)
    p_run.add_argument("--preset")
    p_run.add_argument("--config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--output-dir")
    p_run.add_argument("--workers", type=int, default=1)
    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    p_pre = sub.add_parser("presets", help="preset management")
    p_pre.add_argument("action", choices=["list"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "presets":
            for name in PRESETS:
                print(f"{name}\t{PRESET_HELP[name]}")
            return EXIT_OK
        if args.command == "validate":
            doc = _read_config(args.config)
            violations = validate_config(doc)
            if not violations:
                try:
                    resolve_config(file_doc=doc)
                except ConfigError as exc:
                    violations = exc.violations
            print(json.dumps({"valid": not violations, "violations": violations}, sort_keys=True))
            return EXIT_SCHEMA if violations else EXIT_OK
        if extra and args.command != "run":
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        overrides = _parse_overrides(extra)
        overrides["scenario"] = args.scenario
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.output_dir is not None:
            overrides["output_dir"] = args.output_dir
        if args.workers < 1:
            raise ConfigError(["workers: must be >= 1"])
        file_doc = _read_config(args.config) if args.config else None
        cfg = resolve_config(args.preset, file_doc, overrides)
        run(cfg, args.workers)
        return EXIT_OK
    except ConfigError as exc:
        return _fail("schema", EXIT_SCHEMA, "; ".join(exc.violations), violations=exc.violations)
    except (DomainError, ResolutionError) as exc:
        return _fail("schema", EXIT_SCHEMA, str(exc))
    except (NumericalError, StatisticsError, NoFringeError, UndefinedAngleError) as exc:
        return _fail("numerical", EXIT_NUMERIC, str(exc))
    except OSError as exc:
        return _fail("io", EXIT_IO, f"{type(exc).__name__}: {exc}")
    except SagnacSimError as exc:
        return _fail("numerical", EXIT_NUMERIC, str(exc))


if __name__ == "__main__":
    sys.exit(main())
