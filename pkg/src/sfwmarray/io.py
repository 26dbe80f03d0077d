"""Run configuration, material library loading, and bit-stable CSV/JSON output.

Config files are TOML. Every section is optional except where a command needs
it; ``parse_config`` reports all violations at once. See ``data/reference.toml``
for a complete annotated example.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import tomli

from .coupler import CouplerSpec
from .errors import IoError, ParseError, ValidationError
from .jsa import PUMP_SHAPES, GridSpec, JsaGrid, PumpSpec
from .materials import MaterialModel, material_from_mapping
from .recipe import (
    DESIGN_NOMINAL,
    ROLES,
    ChannelNominal,
    RecipeInputs,
    energy_conserving_idler,
    fit_design_dispersion,
    waveguide_dispersion,
)

FLOAT_FMT = "%.17g"


# --- material library ------------------------------------------------------------


def _read_toml(path: Path | None, text: str | None = None) -> dict:
    try:
        if text is None:
            text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # tomli reports "message (at line L, column C)"
        raise ParseError(f"{path or '<string>'}: {exc}") from exc


def load_materials(path: str | os.PathLike | None = None) -> dict[str, MaterialModel]:
    """Named materials from a library file; the packaged default when ``path`` is None."""
    if path is None:
        text = resources.files("sfwmarray").joinpath("data/materials.toml").read_text(encoding="utf-8")
        doc = _read_toml(None, text)
    else:
        doc = _read_toml(Path(path))
    table = doc.get("materials")
    if not isinstance(table, dict) or not table:
        raise ParseError(f"{path or 'default library'}: no [materials.<name>] tables")
    return {name: material_from_mapping(name, spec) for name, spec in table.items()}


# --- run configuration -----------------------------------------------------------


@dataclass(frozen=True)
class MaterialsConfig:
    path: str | None = None
    core: str = "silicon"
    substrate: str = "silica"
    top: str = "air"
    lateral: str | None = None


@dataclass(frozen=True)
class GeometryConfig:
    height: float = 0.22
    width_main: float = 0.30
    polarization: str = "TE"


@dataclass(frozen=True)
class CouplerConfig:
    wavelength: float = 1.37
    gap: float = 0.4
    width_aux: float = 0.65
    width_sweep: tuple[float, float] = (0.55, 0.85)
    sweep_steps: int = 31
    main_order: int = 0
    aux_order: int = 1
    target_coupling_length: float = 500.0
    gap_bracket: tuple[float, float] = (0.1, 1.5)


@dataclass(frozen=True)
class ArrayConfig:
    n_guides: int = 20
    guide: int = 7
    excitation: tuple[complex, ...] = ()
    length: float | None = None  # None: first envelope zero after its peak
    coupling: float | None = None  # None: pi / achieved coupling length


@dataclass(frozen=True)
class PumpConfig:
    main_wavelength: float = 1.17
    aux_wavelength: float = 1.37
    bandwidth: float | None = None  # None: optimize
    bandwidth_bracket: tuple[float, float] | None = None
    shape: str = "gaussian"


@dataclass(frozen=True)
class DispersionConfig:
    source: str = "design"  # "design" table or "eim" from the geometry
    signal_wavelength: float = 1.54
    main_window: tuple[float, float] = (1.15, 1.19)
    window_fraction: float = 0.3
    channels: dict = field(default_factory=dict)  # role -> (wavelength | None, n_eff, n_group, gvd)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    materials: MaterialsConfig = MaterialsConfig()
    geometry: GeometryConfig = GeometryConfig()
    coupler: CouplerConfig = CouplerConfig()
    array: ArrayConfig = ArrayConfig()
    pump: PumpConfig = PumpConfig()
    dispersion: DispersionConfig = DispersionConfig()
    grid: GridSpec = GridSpec()
    method: str = "analytic"
    output: OutputConfig = OutputConfig()
    source: str | None = None


class _Collector:
    """Pulls typed values out of a TOML table, recording every problem."""

    def __init__(self):
        self.errors: list[str] = []

    def section(self, doc, name):
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            self.errors.append(f"[{name}] must be a table")
            return {}
        return sec

    def unknown(self, sec, name, allowed):
        for k in sec:
            if k not in allowed:
                self.errors.append(f"{name}.{k}: unknown key")

    def number(self, sec, name, key, default, positive=True, nonneg=False, allow_none=False):
        if key not in sec:
            return default
        v = sec[key]
        if allow_none and isinstance(v, str) and v == "auto":
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.errors.append(f"{name}.{key}: expected a finite number, got {v!r}")
            return default
        if positive and not v > 0:
            self.errors.append(f"{name}.{key}: must be > 0, got {v}")
        elif nonneg and v < 0:
            self.errors.append(f"{name}.{key}: must be >= 0, got {v}")
        return float(v)

    def integer(self, sec, name, key, default, minimum=0):
        if key not in sec:
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.errors.append(f"{name}.{key}: expected an integer, got {v!r}")
            return default
        if v < minimum:
            self.errors.append(f"{name}.{key}: must be >= {minimum}, got {v}")
        return v

    def pair(self, sec, name, key, default, allow_none=False):
        if key not in sec:
            return default
        v = sec[key]
        if allow_none and v == "auto":
            return None
        if (
            not isinstance(v, list)
            or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
        ):
            self.errors.append(f"{name}.{key}: expected [low, high], got {v!r}")
            return default
        lo, hi = float(v[0]), float(v[1])
        if not 0 < lo < hi:
            self.errors.append(f"{name}.{key}: need 0 < low < high, got {v}")
        return (lo, hi)

    def choice(self, sec, name, key, default, options):
        if key not in sec:
            return default
        v = sec[key]
        if v not in options:
            self.errors.append(f"{name}.{key}: must be one of {list(options)}, got {v!r}")
            return default
        return v

    def string(self, sec, name, key, default):
        if key not in sec:
            return default
        v = sec[key]
        if not isinstance(v, str) or not v:
            self.errors.append(f"{name}.{key}: expected a non-empty string, got {v!r}")
            return default
        return v


def _excitation(c: _Collector, sec, n_guides):
    has_vec, has_idx = "excitation" in sec, "excited_guide" in sec
    if has_vec and has_idx:
        c.errors.append("array.excitation and array.excited_guide are mutually exclusive")
        return ()
    if has_idx:
        g = c.integer(sec, "array", "excited_guide", 0)
        if not 0 <= g < n_guides:
            c.errors.append(f"array.excited_guide: {g} outside 0..{n_guides - 1} (array.n_guides = {n_guides})")
            return ()
        exc = [0j] * n_guides
        exc[g] = 1 + 0j
        return tuple(exc)
    if not has_vec:
        return ()
    raw = sec["excitation"]
    out = []
    if not isinstance(raw, list):
        c.errors.append("array.excitation: expected a list of numbers or [re, im] pairs")
        return ()
    for k, a in enumerate(raw):
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            out.append(complex(a))
        elif isinstance(a, list) and len(a) == 2 and all(isinstance(x, (int, float)) for x in a):
            out.append(complex(a[0], a[1]))
        else:
            c.errors.append(f"array.excitation[{k}]: expected a number or [re, im], got {a!r}")
            return ()
    if len(out) != n_guides:
        c.errors.append(f"array.excitation has {len(out)} entries but array.n_guides = {n_guides}")
    elif not any(out):
        c.errors.append("array.excitation: identically zero")
    return tuple(out)


def _channels(c: _Collector, sec):
    table = sec.get("channels", {})
    if not isinstance(table, dict):
        c.errors.append("dispersion.channels must be a table")
        return {}
    out = {}
    for role, spec in table.items():
        name = f"dispersion.channels.{role}"
        if role not in ROLES:
            c.errors.append(f"{name}: unknown channel (expected one of {list(ROLES)})")
            continue
        if not isinstance(spec, dict):
            c.errors.append(f"{name} must be a table")
            continue
        c.unknown(spec, name, ("wavelength", "n_eff", "n_group", "gvd"))
        lam = c.number(spec, name, "wavelength", None, allow_none=role == "idler")
        n_eff = c.number(spec, name, "n_eff", None)
        n_g = c.number(spec, name, "n_group", None)
        gvd = c.number(spec, name, "gvd", 0.0, positive=False)
        for key, v in (("n_eff", n_eff), ("n_group", n_g)):
            if v is None:
                c.errors.append(f"{name}.{key}: required")
        if lam is None and role != "idler":
            c.errors.append(f"{name}.wavelength: required")
        out[role] = (lam, n_eff, n_g, gvd)
    return out


def parse_config(path: str | os.PathLike | None = None, text: str | None = None) -> RunConfig:
    """Read and validate a run configuration.

    Raises ParseError for malformed TOML (message carries line and column) and
    ValidationError listing every invalid field.
    """
    doc = _read_toml(Path(path) if path is not None else None, text)
    base = Path(path).parent if path is not None else Path.cwd()
    c = _Collector()
    c.unknown(doc, "config", ("materials", "geometry", "coupler", "array", "pump", "dispersion", "grid", "output"))

    s = c.section(doc, "materials")
    c.unknown(s, "materials", ("path", "core", "substrate", "top", "lateral"))
    mpath = c.string(s, "materials", "path", None)
    if mpath is not None:
        p = Path(mpath)
        mpath = str(p if p.is_absolute() else base / p)
        if not Path(mpath).is_file():
            c.errors.append(f"materials.path: file not found: {mpath}")
    mats = MaterialsConfig(
        mpath,
        c.string(s, "materials", "core", "silicon"),
        c.string(s, "materials", "substrate", "silica"),
        c.string(s, "materials", "top", "air"),
        c.string(s, "materials", "lateral", None),
    )

    s = c.section(doc, "geometry")
    c.unknown(s, "geometry", ("height", "width_main", "polarization"))
    geom = GeometryConfig(
        c.number(s, "geometry", "height", 0.22),
        c.number(s, "geometry", "width_main", 0.30),
        c.choice(s, "geometry", "polarization", "TE", ("TE", "TM")),
    )

    s = c.section(doc, "coupler")
    keys = ("wavelength", "gap", "width_aux", "width_sweep", "sweep_steps", "main_order", "aux_order",
            "target_coupling_length", "gap_bracket")
    c.unknown(s, "coupler", keys)
    coup = CouplerConfig(
        c.number(s, "coupler", "wavelength", 1.37),
        c.number(s, "coupler", "gap", 0.4),
        c.number(s, "coupler", "width_aux", 0.65),
        c.pair(s, "coupler", "width_sweep", (0.55, 0.85)),
        c.integer(s, "coupler", "sweep_steps", 31, minimum=2),
        c.integer(s, "coupler", "main_order", 0),
        c.integer(s, "coupler", "aux_order", 1),
        c.number(s, "coupler", "target_coupling_length", 500.0),
        c.pair(s, "coupler", "gap_bracket", (0.1, 1.5)),
    )

    s = c.section(doc, "array")
    c.unknown(s, "array", ("n_guides", "guide", "excitation", "excited_guide", "length", "coupling"))
    n = c.integer(s, "array", "n_guides", 20, minimum=1)
    guide = c.integer(s, "array", "guide", 7)
    if not 0 <= guide < n:
        c.errors.append(f"array.guide: {guide} outside 0..{n - 1} (array.n_guides = {n})")
    arr = ArrayConfig(
        n,
        guide,
        _excitation(c, s, n),
        c.number(s, "array", "length", None, allow_none=True),
        c.number(s, "array", "coupling", None, positive=False, nonneg=True, allow_none=True),
    )

    s = c.section(doc, "pump")
    c.unknown(s, "pump", ("main_wavelength", "aux_wavelength", "bandwidth", "bandwidth_bracket", "shape"))
    pump = PumpConfig(
        c.number(s, "pump", "main_wavelength", 1.17),
        c.number(s, "pump", "aux_wavelength", 1.37),
        c.number(s, "pump", "bandwidth", None, allow_none=True),
        c.pair(s, "pump", "bandwidth_bracket", None, allow_none=True),
        c.choice(s, "pump", "shape", "gaussian", PUMP_SHAPES),
    )
    if pump.bandwidth_bracket is not None and pump.bandwidth_bracket[1] < 10 * pump.bandwidth_bracket[0]:
        c.errors.append("pump.bandwidth_bracket: must span at least a factor of 10")

    s = c.section(doc, "dispersion")
    c.unknown(s, "dispersion", ("source", "signal_wavelength", "main_window", "window_fraction", "channels"))
    src = c.choice(s, "dispersion", "source", "design", ("design", "eim"))
    chans = _channels(c, s)
    disp = DispersionConfig(
        src,
        c.number(s, "dispersion", "signal_wavelength", 1.54),
        c.pair(s, "dispersion", "main_window", (1.15, 1.19)),
        c.number(s, "dispersion", "window_fraction", 0.3),
        chans,
    )
    if not 0 < disp.window_fraction < 1:
        c.errors.append(f"dispersion.window_fraction: must lie in (0, 1), got {disp.window_fraction}")

    s = c.section(doc, "grid")
    c.unknown(s, "grid", ("n_signal", "n_idler", "pump_span", "mismatch_span", "method"))
    grid_args = dict(
        n_signal=c.integer(s, "grid", "n_signal", 256, minimum=2),
        n_idler=c.integer(s, "grid", "n_idler", 256, minimum=2),
        pump_span=c.number(s, "grid", "pump_span", 4.0),
        mismatch_span=c.number(s, "grid", "mismatch_span", 4.0),
    )
    method = c.choice(s, "grid", "method", "analytic", ("analytic", "quadrature"))

    s = c.section(doc, "output")
    c.unknown(s, "output", ("directory", "format"))
    out = OutputConfig(
        c.string(s, "output", "directory", "."),
        c.choice(s, "output", "format", "csv", ("csv", "json")),
    )

    if c.errors:
        raise ValidationError(c.errors)
    return RunConfig(mats, geom, coup, arr, pump, disp, GridSpec(**grid_args), method, out,
                     str(path) if path is not None else None)


def materials_for(cfg: RunConfig, override: str | None = None) -> dict[str, MaterialModel]:
    lib = load_materials(override or cfg.materials.path)
    m = cfg.materials
    missing = [n for n in (m.core, m.substrate, m.top, m.lateral) if n is not None and n not in lib]
    if missing:
        raise ValidationError([f"materials: {n!r} not in the library" for n in missing])
    return lib


def coupler_spec(cfg: RunConfig, lib: dict[str, MaterialModel]) -> CouplerSpec:
    m, g, c = cfg.materials, cfg.geometry, cfg.coupler
    return CouplerSpec(
        g.width_main, c.width_aux, c.gap, g.height, lib[m.core], lib[m.substrate], lib[m.top], c.wavelength,
        c.main_order, c.aux_order, 0, g.polarization, lib[m.lateral] if m.lateral else None,
    )


def nominal_dispersion(cfg: RunConfig, lib: dict[str, MaterialModel]) -> dict[str, ChannelNominal]:
    d, p = cfg.dispersion, cfg.pump
    idler = energy_conserving_idler(p.main_wavelength, p.aux_wavelength, d.signal_wavelength)
    if d.source == "design":
        # roles missing from the config keep the reference strip values
        out = dict(DESIGN_NOMINAL)
        if "idler" not in d.channels:
            out["idler"] = replace(out["idler"], wavelength=idler)
        for role, (lam, n_eff, n_g, gvd) in d.channels.items():
            out[role] = ChannelNominal(idler if lam is None else lam, n_eff, n_g, gvd)
        return out
    m, g = cfg.materials, cfg.geometry
    lat = lib[m.lateral] if m.lateral else None
    lams = {"main": p.main_wavelength, "aux": p.aux_wavelength, "signal": d.signal_wavelength, "idler": idler}
    return {
        r: waveguide_dispersion(g.height, g.width_main, lib[m.core], lib[m.substrate], lib[m.top], lam,
                                g.polarization, lat)
        for r, lam in lams.items()
    }


def recipe_inputs(cfg: RunConfig, lib: dict[str, MaterialModel]) -> RecipeInputs:
    channels = fit_design_dispersion(nominal_dispersion(cfg, lib), cfg.dispersion.window_fraction)
    a, p = cfg.array, cfg.pump
    if not a.excitation:
        raise ValidationError(["array.excitation or array.excited_guide: required for the design run"])
    pump = PumpSpec(p.main_wavelength, p.bandwidth or 1e-3, p.aux_wavelength, p.shape)
    return RecipeInputs(
        channels=channels,
        coupler=coupler_spec(cfg, lib),
        width_range=cfg.coupler.width_sweep,
        sweep_steps=cfg.coupler.sweep_steps,
        target_Lc=cfg.coupler.target_coupling_length,
        gap_bracket=cfg.coupler.gap_bracket,
        n_guides=a.n_guides,
        excitation=a.excitation,
        guide=a.guide,
        pump=pump,
        main_window=cfg.dispersion.main_window,
        grid=cfg.grid,
        length=a.length,
        bandwidth=p.bandwidth,
        bandwidth_bracket=p.bandwidth_bracket,
        method=cfg.method,
    )


def default_config_path() -> Path:
    return Path(str(resources.files("sfwmarray").joinpath("data/reference.toml")))


# --- writers ---------------------------------------------------------------------


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        if any(ch in x for ch in ',"\n'):
            return '"' + x.replace('"', '""') + '"'
        return x
    return FLOAT_FMT % float(x)


def _open(path, mode="w"):
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        return open(p, mode, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path) -> None:
    """CSV with a fixed header, ``%.17g`` floats and LF line endings."""
    try:
        with _open(path) as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(format_value(x) for x in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


GRID_HEADER = ("omega_s", "omega_i", "re_f", "im_f", "abs_f2")


def grid_rows(jsa: JsaGrid):
    """Row-major (signal outer, idler inner) rows of the grid CSV."""
    f = jsa.amplitude
    inten = jsa.intensity
    for a, ws in enumerate(jsa.signal_axis):
        for b, wi in enumerate(jsa.idler_axis):
            yield (ws, wi, f[a, b].real, f[a, b].imag, inten[a, b])


def write_grid_csv(jsa: JsaGrid, path) -> None:
    write_table_csv(GRID_HEADER, grid_rows(jsa), path)


def read_grid_csv(path) -> JsaGrid:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            header = f.readline().rstrip("\n").split(",")
            body = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if tuple(header) != GRID_HEADER:
        raise ParseError(f"{path}: unexpected header {header}")
    if not body.strip():
        return JsaGrid(np.zeros(0), np.zeros(0), np.zeros((0, 0), dtype=complex))
    data = np.array([[float(x) for x in line.split(",")] for line in body.splitlines()])
    ws = list(dict.fromkeys(data[:, 0]))
    wi = list(dict.fromkeys(data[:, 1]))
    if len(ws) * len(wi) != data.shape[0]:
        raise ParseError(f"{path}: rows do not form a full grid")
    amp = (data[:, 2] + 1j * data[:, 3]).reshape(len(ws), len(wi))
    return JsaGrid(np.array(ws), np.array(wi), amp)


def _json_value(x, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise IoError(f"cannot serialize non-finite value {x} to JSON")
        return FLOAT_FMT % float(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _json_value(v, indent, level + 1) for v in x) + "\n" + end + "]"
    raise IoError(f"cannot serialize {type(x).__name__} to JSON")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with ``%.17g`` floats and insertion-ordered keys."""
    return _json_value(obj, indent, 0) + "\n"


def write_json(obj, path) -> None:
    text = dumps_json(obj)
    try:
        with _open(path) as f:
            f.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_report_json(report, path) -> None:
    """DesignReport (or its dict form) as JSON, fields in declaration order."""
    write_json(report.to_dict() if hasattr(report, "to_dict") else report, path)


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def jsa_document(jsa: JsaGrid) -> dict:
    return {
        "signal_axis": jsa.signal_axis,
        "idler_axis": jsa.idler_axis,
        "normalized": jsa.normalized,
        "re_f": jsa.amplitude.real,
        "im_f": jsa.amplitude.imag,
    }


def jsa_from_document(doc: dict) -> JsaGrid:
    try:
        re, im = np.asarray(doc["re_f"], dtype=float), np.asarray(doc["im_f"], dtype=float)
        ws, wi = np.asarray(doc["signal_axis"], dtype=float), np.asarray(doc["idler_axis"], dtype=float)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed JSA document: {exc}") from exc
    amp = (re + 1j * im).reshape(ws.size, wi.size)
    return JsaGrid(ws, wi, amp, bool(doc.get("normalized", False)))


def report_schema() -> dict:
    return json.loads(resources.files("sfwmarray").joinpath("data/report.schema.json").read_text(encoding="utf-8"))

