"""
Built-in experiment scenarios, YAML config loading with strict validation, and
the runners that write each scenario's CSV outputs plus a replayable manifest.

A config file holds a ``scenarios`` list. Each entry names a scenario and
either a built-in ``base`` to start from or a ``kind``; any parameter group
given overrides the base values key by key::

    scenarios:
      - name: fig3-14pj
        base: fig3
        pulse:
          energy_pj: 14.1
"""

from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from . import detection, entanglement, nlse, nolm, pulse, qkd, quantum

QUANTUM_GRID = (256, 4.0)
NOLM_GRID = (256, 3.0)
QUANTUM_SOLVER = 1e-2


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


GROUP_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "grid": {"n_samples": 4096, "window_ps": 20.0},
    "fibre": {
        "gamma_per_w_m": 0.04,
        "beta2_ps2_per_m": None,
        "soliton_energy_pj": 9.0,
        "length_m": 1.0,
    },
    "pulse": {
        "shape": "sech",
        "fwhm_fs": 130.0,
        "energy_pj": 14.1,
        "chirp": 0.0,
        "center_offset_ps": 0.0,
    },
    "solver": {"max_nonlinear_phase": 1e-3, "max_step_m": 0.01},
    "detection": {
        "repetition_rate_hz": 82e6,
        "wavelength_nm": 810.0,
        "efficiency": 1.0,
        "electronic_noise": 0.0,
    },
    "scan": {"cutoff_min": None, "cutoff_max": None, "n_cutoffs": None, "n_bands": 8},
    "nolm": {"split_ratio": 0.9, "energies_pj": [float(e) for e in range(2, 31, 2)]},
    "entanglement": {"theta": math.pi / 2, "reference_ratio": 1.0},
    "channel": {"transmittance": 1.0, "excess_noise": 0.0, "tap": 1.0},
    "session": {
        "n_slots": 2000,
        "pulses_per_slot": 128,
        "block_size": 128,
        "repetition_rate_hz": 82e6,
        "overhead": 0.8,
        "detection_threshold": None,
    },
}

KIND_GROUPS = {
    "propagation": ["grid", "fibre", "pulse", "solver", "detection"],
    "squeezing": ["grid", "fibre", "pulse", "solver", "detection", "scan"],
    "nolm_scan": ["grid", "fibre", "pulse", "solver", "nolm"],
    "entangle": ["grid", "fibre", "pulse", "solver", "nolm", "entanglement"],
    "qkd": ["grid", "fibre", "pulse", "solver", "nolm", "entanglement", "channel", "session"],
}

SCENARIO_KEYS = {"name", "base", "kind", "description", "seed"}


@dataclass
class Scenario:
    name: str
    kind: str
    description: str
    params: Dict[str, Dict[str, Any]]
    seed: int = 0
    lines: Dict[Tuple[str, ...], int] = field(default_factory=dict, repr=False, compare=False)
    source: str = field(default="<builtin>", repr=False, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        out = {"name": self.name, "kind": self.kind, "description": self.description,
               "seed": self.seed}
        out.update(copy.deepcopy(self.params))
        return out


def _defaults_for(kind: str) -> Dict[str, Dict[str, Any]]:
    return {g: copy.deepcopy(GROUP_DEFAULTS[g]) for g in KIND_GROUPS[kind]}


def _builtin(name, kind, description, seed=0, **overrides) -> Scenario:
    params = _defaults_for(kind)
    for group, values in overrides.items():
        params[group].update(values)
    return Scenario(name, kind, description, params, seed)


def builtin_scenarios() -> Dict[str, Scenario]:
    qgrid = {"n_samples": QUANTUM_GRID[0], "window_ps": QUANTUM_GRID[1]}
    ngrid = {"n_samples": NOLM_GRID[0], "window_ps": NOLM_GRID[1]}
    qsolver = {"max_nonlinear_phase": QUANTUM_SOLVER}
    items = [
        _builtin("fig2", "propagation",
                 "14.1 pJ pulse through 1 m of fibre: spectra and autocorrelation traces",
                 pulse={"energy_pj": 14.1}),
        _builtin("fig3", "squeezing",
                 "15.8 pJ spectral-filtering squeezing versus knife-edge cutoff",
                 grid=qgrid, solver=qsolver, pulse={"energy_pj": 15.8}),
        _builtin("nolm-scan", "nolm_scan",
                 "loop-mirror amplitude noise of the bright port versus input energy",
                 grid=ngrid, solver=qsolver),
        _builtin("entangle", "entangle",
                 "two loop-mirror beams at 15.8 pJ combined into an entangled pair",
                 grid=ngrid, solver=qsolver, pulse={"energy_pj": 15.8},
                 nolm={"split_ratio": 0.95}),
        _builtin("qkd-clean", "qkd",
                 "key distribution over a clean channel with a 20 pJ loop-mirror pair",
                 seed=1, grid=ngrid, solver=qsolver, pulse={"energy_pj": 20.0}),
        _builtin("qkd-attack", "qkd",
                 "key distribution with a 50% beamsplitting eavesdropper",
                 seed=2, grid=ngrid, solver=qsolver, pulse={"energy_pj": 20.0},
                 channel={"tap": 0.5}),
    ]
    return {s.name: s for s in items}


# --- YAML loading ---------------------------------------------------------

def _construct(node, path, lines):
    """Plain Python value of a composed YAML node, recording key lines."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
            out[key] = _construct(value_node, path + (key,), lines)
            lines[path + (key,)] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def load_yaml(text: str, source: str = "<config>"):
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line, source) from None
    lines: Dict[Tuple, int] = {}
    if node is None:
        return None, lines
    try:
        data = _construct(node, (), lines)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[1], exc.line, source) from None
    return data, lines


def _check_value(value, default, where, line, source):
    if default is None or value is None:
        if value is not None and not isinstance(value, (int, float, list)):
            raise ConfigError(f"{where} must be a number", line, source)
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = [float(v) for v in value] if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{where} has the wrong type ({type(value).__name__})", line, source)
    return value


def parse_scenarios(text: str, source: str = "<config>",
                    registry: Optional[Dict[str, Scenario]] = None) -> List[Scenario]:
    """Validate a config document and resolve each scenario against its base."""
    registry = builtin_scenarios() if registry is None else registry
    data, lines = load_yaml(text, source)
    if data is None:
        return []
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping with a 'scenarios' list", 1, source)
    for key in data:
        if key != "scenarios":
            raise ConfigError(f"unknown top-level key {key!r}", lines.get((key,)), source)
    entries = data.get("scenarios") or []
    if not isinstance(entries, list):
        raise ConfigError("'scenarios' must be a list", lines.get(("scenarios",)), source)

    out, seen = [], set()
    for i, entry in enumerate(entries):
        base_path = ("scenarios", i)
        line = lines.get(base_path)
        if not isinstance(entry, dict):
            raise ConfigError("each scenario must be a mapping", line, source)
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError("scenario needs a non-empty 'name'", line, source)
        if name in seen:
            raise ConfigError(f"scenario {name!r} defined twice", lines.get(base_path + ("name",)), source)
        seen.add(name)

        base_name = entry.get("base")
        if base_name is not None:
            if base_name not in registry:
                raise ConfigError(f"unknown base scenario {base_name!r}",
                                  lines.get(base_path + ("base",)), source)
            base = registry[base_name]
            kind = base.kind
            params = copy.deepcopy(base.params)
            description = base.description
            seed = base.seed
        else:
            kind = entry.get("kind")
            if kind not in KIND_GROUPS:
                raise ConfigError(f"scenario {name!r} needs a base or a kind from "
                                  f"{sorted(KIND_GROUPS)}", line, source)
            params = _defaults_for(kind)
            description = ""
            seed = 0
        if "kind" in entry and entry["kind"] != kind:
            raise ConfigError(f"kind {entry['kind']!r} conflicts with base kind {kind!r}",
                              lines.get(base_path + ("kind",)), source)
        description = entry.get("description", description)
        if not isinstance(description, str):
            raise ConfigError("description must be text", lines.get(base_path + ("description",)), source)
        seed = entry.get("seed", seed)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a non-negative integer",
                              lines.get(base_path + ("seed",)), source)

        for key, values in entry.items():
            if key in SCENARIO_KEYS:
                continue
            key_line = lines.get(base_path + (key,))
            if key not in params:
                allowed = ", ".join(KIND_GROUPS[kind])
                raise ConfigError(f"unknown key {key!r} for a {kind} scenario (groups: {allowed})",
                                  key_line, source)
            if not isinstance(values, dict):
                raise ConfigError(f"group {key!r} must be a mapping", key_line, source)
            for pkey, pvalue in values.items():
                pline = lines.get(base_path + (key, pkey))
                if pkey not in GROUP_DEFAULTS[key]:
                    raise ConfigError(f"unknown key {pkey!r} in group {key!r}", pline, source)
                params[key][pkey] = _check_value(
                    pvalue, GROUP_DEFAULTS[key][pkey], f"{key}.{pkey}", pline, source)
        scenario = Scenario(name, kind, description, params, seed,
                            {k[2:]: v for k, v in lines.items() if k[:2] == base_path}, source)
        build_objects(scenario)  # validate against module types
        out.append(scenario)
    return out


def load_scenario_file(path: Path, registry=None) -> List[Scenario]:
    path = Path(path)
    return parse_scenarios(path.read_text(), str(path), registry)


def list_scenarios(config_dir: Optional[Path] = None) -> List[Tuple[str, str]]:
    """Sorted ``(name, description)`` of built-ins plus any user scenarios."""
    registry = dict(builtin_scenarios())
    if config_dir is not None:
        for path in sorted(Path(config_dir).glob("*.y*ml")):
            for s in load_scenario_file(path, builtin_scenarios()):
                if s.name in registry:
                    raise ConfigError(f"scenario name {s.name!r} collides with an existing scenario",
                                      s.lines.get(("name",)), str(path))
                registry[s.name] = s
    return sorted((name, s.description) for name, s in registry.items())


# --- object construction --------------------------------------------------

@dataclass
class Objects:
    grid: Optional[pulse.TimeGrid] = None
    fibre: Optional[pulse.FibreSpec] = None
    pulse: Optional[pulse.PulseSpec] = None
    solver: Optional[nlse.SolverConfig] = None


def build_objects(s: Scenario) -> Objects:
    """Turn parameter groups into module objects; errors point at the group."""
    p = s.params
    obj = Objects()

    def guard(group, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{group}: {exc}", s.lines.get((group,)), s.source) from None

    g, f, pu, so = p["grid"], p["fibre"], p["pulse"], p["solver"]
    obj.grid = guard("grid", lambda: pulse.TimeGrid(g["n_samples"], g["window_ps"]))
    obj.pulse = guard("pulse", lambda: pulse.PulseSpec(
        pu["shape"], pu["fwhm_fs"], energy=pu["energy_pj"], chirp=pu["chirp"],
        center_offset=pu["center_offset_ps"]))

    def fibre():
        if f["beta2_ps2_per_m"] is None:
            return nlse.calibrated_fibre(f["gamma_per_w_m"], f["soliton_energy_pj"],
                                         pu["fwhm_fs"], f["length_m"])
        return pulse.FibreSpec(f["beta2_ps2_per_m"], f["gamma_per_w_m"], f["length_m"])

    guard("pulse", lambda: pulse.make_pulse(obj.pulse, obj.grid))
    obj.fibre = guard("fibre", fibre)
    obj.solver = guard("solver", lambda: nlse.SolverConfig(so["max_nonlinear_phase"], so["max_step_m"]))
    if "nolm" in p:
        guard("nolm", lambda: nolm.NolmSpec(obj.fibre, obj.pulse, p["nolm"]["split_ratio"]))
        if s.kind == "nolm_scan" and len(p["nolm"]["energies_pj"]) < 4:
            raise ConfigError("nolm: energies_pj needs at least 4 entries", s.lines.get(("nolm",)), s.source)
    if "channel" in p:
        c = p["channel"]
        guard("channel", lambda: qkd.ChannelSpec(c["transmittance"], c["excess_noise"], c["tap"]))
    if "session" in p:
        se = p["session"]
        if se["n_slots"] < 1 or se["pulses_per_slot"] < 1:
            raise ConfigError("session: n_slots and pulses_per_slot must be positive",
                              s.lines.get(("session",)), s.source)
        if not qkd.MIN_BLOCK <= se["block_size"] <= se["pulses_per_slot"]:
            raise ConfigError(f"session: block_size must lie in [{qkd.MIN_BLOCK}, pulses_per_slot]",
                              s.lines.get(("session",)), s.source)
    if "detection" in p:
        d = p["detection"]
        if not 0 < d["efficiency"] <= 1:
            raise ConfigError("detection: efficiency must lie in (0, 1]",
                              s.lines.get(("detection",)), s.source)
    return obj


# --- runners ---------------------------------------------------------------

def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _run_propagation(s: Scenario, obj: Objects) -> Dict[str, str]:
    env = pulse.make_pulse(obj.pulse, obj.grid)
    out = nlse.propagate(env, obj.fibre, obj.solver)
    sp_in, sp_out = pulse.spectrum(env), pulse.spectrum(out)
    delay, ac_in = pulse.autocorrelation(env)
    _, ac_out = pulse.autocorrelation(out)
    rep = s.params["detection"]["repetition_rate_hz"]
    energy = pulse.pulse_energy(out)
    summary = [
        ("input_energy_pj", pulse.pulse_energy(env)),
        ("output_energy_pj", energy),
        ("average_power_mw", energy * 1e-12 * rep * 1e3),
        ("soliton_order", nlse.soliton_order(obj.pulse, obj.fibre)),
        ("input_fwhm_fs", pulse.fwhm(obj.grid.t, env.power) * 1e3),
        ("output_fwhm_fs", pulse.fwhm(obj.grid.t, out.power) * 1e3),
        ("input_autocorrelation_fwhm_fs", pulse.fwhm(delay, ac_in) * 1e3),
        ("output_autocorrelation_fwhm_fs", pulse.fwhm(delay, ac_out) * 1e3),
    ]
    return {
        "spectra.csv": _csv(["omega_rad_per_ps", "input_psd", "output_psd"],
                            zip(obj.grid.omega, sp_in.psd, sp_out.psd)),
        "autocorrelation.csv": _csv(["delay_ps", "input", "output"], zip(delay, ac_in, ac_out)),
        "summary.csv": _csv(["quantity", "value"], summary),
    }


def _cutoffs(grid, scan):
    lo = grid.omega[0] if scan["cutoff_min"] is None else scan["cutoff_min"]
    hi = grid.omega[-1] if scan["cutoff_max"] is None else scan["cutoff_max"]
    if scan["n_cutoffs"] is None:
        w = grid.omega
        return w[(w >= lo) & (w <= hi)]
    return np.linspace(lo, hi, int(scan["n_cutoffs"]))


def _run_squeezing(s: Scenario, obj: Objects) -> Dict[str, str]:
    env = pulse.make_pulse(obj.pulse, obj.grid)
    out, smap = quantum.propagate_with_noise(env, obj.fibre, obj.solver)
    cov = quantum.output_covariance(smap)
    d, scan = s.params["detection"], s.params["scan"]
    cutoffs = _cutoffs(obj.grid, scan)
    curve = detection.squeezing_scan(out, cov, cutoffs, d["efficiency"], d["electronic_noise"],
                                     energy_pj=obj.pulse.energy)
    noise_rows = []
    for cut in curve.cutoffs:
        try:
            rec = detection.balanced_detection(
                out, cov, detection.knife_edge(obj.grid, cut), d["efficiency"], d["electronic_noise"],
                correct=True, repetition_rate=d["repetition_rate_hz"], wavelength_nm=d["wavelength_nm"])
        except quantum.UndefinedError:
            continue
        noise_rows.append((cut, rec.sum_variance, rec.difference_variance))
    # equal-width bands across the central part of the spectrum
    occupied = pulse.spectrum(out).psd
    idx = np.flatnonzero(occupied > 1e-3 * occupied.max())
    edges = np.linspace(obj.grid.omega[idx[0]], obj.grid.omega[idx[-1]] + obj.grid.domega,
                        scan["n_bands"] + 1)
    bands = list(zip(edges[:-1], edges[1:]))
    corr = quantum.spectral_correlation_matrix(out, cov, bands)
    cut, depth = curve.minimum
    return {
        "squeezing_curve.csv": curve.to_csv(),
        "noise_powers.csv": _csv(["cutoff_rad_per_ps", "sum_variance", "difference_variance"], noise_rows),
        "band_correlations.csv": _csv(["band_lo_rad_per_ps", "band_hi_rad_per_ps"]
                                      + [f"band_{j}" for j in range(len(bands))],
                                      [(lo, hi, *row) for (lo, hi), row in zip(bands, corr)]),
        "summary.csv": _csv(["quantity", "value"], [("best_cutoff_rad_per_ps", cut),
                                                    ("best_ratio_db", depth)]),
    }


def _run_nolm_scan(s: Scenario, obj: Objects) -> Dict[str, str]:
    spec = nolm.NolmSpec(obj.fibre, obj.pulse, s.params["nolm"]["split_ratio"])
    rows = nolm.nolm_energy_scan(spec, s.params["nolm"]["energies_pj"], obj.grid, obj.solver)
    return {"nolm_scan.csv": _csv(["energy_pj", "ratio_db"], rows)}


def squeezed_pair(s: Scenario, obj: Objects) -> entanglement.TwoModeState:
    """Entangled pair from two independent, identically driven loop mirrors."""
    spec = nolm.NolmSpec(obj.fibre, obj.pulse, s.params["nolm"]["split_ratio"])
    out, cov = nolm.nolm_output(spec, obj.grid, obj.solver)
    mode = nolm.effective_single_mode(out, cov)
    return entanglement.combine_on_beamsplitter(mode, mode, s.params["entanglement"]["theta"])


def _run_entangle(s: Scenario, obj: Objects) -> Dict[str, str]:
    pair = squeezed_pair(s, obj)
    duan = entanglement.duan_criterion(pair)
    corr = entanglement.quadrature_correlations(pair)
    ref = s.params["entanglement"]["reference_ratio"] * abs(pair.alpha_a)
    stokes = entanglement.polarization_pair(pair, ref)
    header = ["duan_value", "corr_xx", "corr_pp", "cond_var_x", "cond_var_p",
              "var_s1", "var_s2", "var_s3", "corr_s1", "corr_s2", "corr_s3"]
    row = [duan.value, corr.corr_xx, corr.corr_pp, corr.cond_var_x, corr.cond_var_p,
           *[float(v) for v in stokes.variances[0] / stokes.means[0][0]],
           *[float(c) for c in stokes.correlations]]
    return {"entanglement.csv": _csv(header, [row])}


def _run_qkd(s: Scenario, obj: Objects) -> Dict[str, str]:
    pair = squeezed_pair(s, obj)
    c, se = s.params["channel"], s.params["session"]
    channel = qkd.ChannelSpec(c["transmittance"], c["excess_noise"], c["tap"])
    rec = qkd.run_session(pair, channel, se["n_slots"], s.seed, se["pulses_per_slot"])
    sift = qkd.sift_key(rec, se["block_size"])
    check = qkd.detect_eavesdropper(rec, se["detection_threshold"])
    rate = qkd.raw_bit_rate(se["repetition_rate_hz"], sift.sift_rate, se["overhead"])
    report = "\n".join([
        f"sift_rate: {sift.sift_rate!r}",
        f"key_length: {sift.key_length}",
        f"keys_agree: {sift.alice_key == sift.bob_key}",
        f"flag: {check.flag}",
        f"status: {check.status}",
        f"cond_var_x: {check.estimates[0]!r}",
        f"cond_var_p: {check.estimates[1]!r}",
        f"threshold: {check.threshold!r}",
        f"raw_bit_rate: {rate!r}",
    ]) + "\n"
    return {"session.csv": rec.to_csv(), "sift_report.txt": report}


RUNNERS = {
    "propagation": _run_propagation,
    "squeezing": _run_squeezing,
    "nolm_scan": _run_nolm_scan,
    "entangle": _run_entangle,
    "qkd": _run_qkd,
}


def manifest_text(s: Scenario) -> str:
    return yaml.safe_dump({"scenarios": [s.to_dict()]}, sort_keys=True)


def run_scenario(s: Scenario, out_dir: Path) -> Dict[str, Path]:
    """Run one scenario, write its files under ``out_dir / s.name``."""
    obj = build_objects(s)
    files = RUNNERS[s.kind](s, obj)
    target = Path(out_dir) / s.name
    target.mkdir(parents=True, exist_ok=True)
    written = {}
    for fname, text in sorted(files.items()):
        path = target / fname
        path.write_text(text)
        written[fname] = path
    manifest = target / "manifest.yaml"
    manifest.write_text(manifest_text(s))
    written["manifest.yaml"] = manifest
    return written
