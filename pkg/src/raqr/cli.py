"""Scenario-driven command-line front end.

Every figure-style dataset is described by a small INI *scenario* file::

    [scenario]
    command = snr
    preset  = cs_2c4l, cs_3c5l
    backend = analytic
    axis    = tx_power
    grid    = geomspace(1e-12, 1e-2, 21)

    [link]
    bandwidth_raqr = 100e3

Optional sections ``[overrides]``, ``[detector]``, ``[link]``,
``[classical]``, ``[modem]``, ``[capacity]`` and ``[access]`` refine the
defaults listed in :data:`SCHEMA`.  A parameter preset (``cs_3c5l``) can be
passed to ``--config`` directly; the subcommand's default sweep is used.

Results are written as CSV with a single ``#`` metadata line carrying the
tool version, scenario name, a SHA-256 hash of the resolved configuration,
the seed and the backend.  No timestamps are written, so reruns are
byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .atomdata import (
    AtomicParameterTable,
    ParameterError,
    RydbergState,
    _locate_keys,
    _parse_ini,
    dump_parameter_table,
    high_l_frequency,
    list_presets as _list_parameter_presets,
    load_parameter_table,
    load_quantum_defects,
    parse_parameter_table,
    transition_frequency,
)
from .link import (
    ClassicalReceiver,
    FadingModel,
    LinkScenario,
    ModemConfig,
    bler_simulation,
    butterworth_response,
    classical_snr,
    db,
    ergodic_capacity,
    from_db,
)
from .liouvillian import SolverError
from .pipeline import Receiver
from .receiver import DetectorChain

__all__ = [
    "ConfigError",
    "Scenario",
    "ResultTable",
    "SCHEMA",
    "COMMANDS",
    "load_scenario",
    "run_scenario",
    "list_presets",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    """Invalid scenario; ``field`` and ``lineno`` locate the offending entry."""

    def __init__(self, message: str, field: str | None = None, lineno: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if lineno:
            where.append(f"line {lineno}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
        self.field = field
        self.lineno = lineno


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

_AUTO = "auto"

#: Per-section keys with their type tag and default value.
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "scenario": {
        "name": ("str", None),
        "description": ("str", ""),
        "command": ("str", None),
        "preset": ("list", None),
        "backend": ("str", None),
        "seed": ("int", None),
        "axis": ("str", None),
        "grid": ("grid", None),
        "velocity_classes": ("int", None),
    },
    "overrides": {
        "temperature": ("float", None),
        "probe_power": ("float", None),
        "lo_field": ("float", None),
        "dephase_all": ("bool", False),
    },
    "detector": {
        "responsivity": ("float", 0.8),
        "gain_db": ("float", 30.0),
        "lo_power": ("float", 30e-3),
        "noise_temperature": ("float", 290.0),
        "load": ("float", 1.0),
    },
    "link": {
        "tx_power": ("float", 1e-3),
        "tx_gain_db": ("float", 10.0),
        "distance": ("float", 10.0),
        "carrier": ("float_or_auto", _AUTO),
        "bandwidth_raqr": ("float_or_auto", 100e3),
        "bandwidth_cl": ("float", 100e3),
        "t_env": ("float", 290.0),
        "margin": ("float", 0.1),
        "clamp": ("bool", True),
    },
    "classical": {
        "rx_gain_db": ("float", 5.5),
        "lna_gain_db": ("float", 60.0),
        "noise_factor": ("float", 6.0),
        "noise_figure_db": ("float", None),
        "filter_order": ("int", 4),
    },
    "modem": {
        "block_length": ("int", 256),
        "block_count": ("int", 800),
        "pilots": ("int", 1),
        "fading": ("str", "rayleigh"),
        "perfect_csi": ("bool", False),
    },
    "capacity": {
        "samples": ("int", 1_000_000),
    },
    "access": {
        "model": ("str", "constant"),
    },
}

#: Column label of each sweep axis (value unit included).
AXIS_COLUMNS = {
    "detuning": "detuning_Hz",
    "tx_power": "tx_power_W",
    "lo_field": "lo_field_V_per_m",
    "temperature": "temperature_K",
    "n": "n",
    "snr": "snr_dB",
}


@dataclass(frozen=True)
class _Command:
    axes: tuple[str, ...]
    default_grid: str
    single_preset: bool = False
    randomized: bool = False
    needs_preset: bool = True
    default_backend: str = "analytic"
    help: str = ""


COMMANDS: dict[str, _Command] = {
    "spectrum": _Command(("detuning",), "linspace(-10e6, 10e6, 401)", single_preset=True,
                         default_backend="exact", help="probe transmission vs coupling detuning"),
    "access": _Command(("n",), "linspace(30, 80, 51)", needs_preset=False,
                       help="accessible RF transition frequencies vs principal quantum number"),
    "noise": _Command(("tx_power", "temperature"), "geomspace(1e-12, 1e-3, 19)", single_preset=True,
                      help="signal and noise powers (QPN, PSN, ITN) along the sweep"),
    "tradeoff": _Command(("lo_field",), "geomspace(0.03, 0.3, 10)", single_preset=True,
                         help="instantaneous bandwidth and |chi'_s| vs RF LO field"),
    "filter": _Command(("detuning",), "linspace(-20e6, 20e6, 201)",
                       help="normalised baseband response vs RF offset (RAQR vs Butterworth)"),
    "snr": _Command(("tx_power",), "geomspace(1e-12, 1e-2, 21)", help="SNR vs transmit power"),
    "capacity": _Command(("tx_power",), "geomspace(1e-12, 1e-2, 21)", randomized=True,
                         help="ergodic capacity vs transmit power"),
    "bler": _Command(("tx_power", "snr"), "geomspace(1e-12, 1e-2, 11)", randomized=True,
                     help="Monte Carlo 16-QAM block error rate"),
}

# Default spectrum span per architecture: the 2C4L window is Doppler-wide.
_SPECTRUM_GRID = {"2C4L": "linspace(-200e6, 200e6, 401)", "3C5L": "linspace(-10e6, 10e6, 401)"}

_GRID_RE = re.compile(r"^\s*(linspace|geomspace)\s*\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)\s*$")


def _parse_value(kind: str, raw: str, key: str, lineno: int | None):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "list":
            items = tuple(x.strip() for x in raw.split(",") if x.strip())
            if not items:
                raise ValueError
            return items
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
        if kind == "float_or_auto":
            return _AUTO if raw.lower() == _AUTO else float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "grid":
            return parse_grid(raw)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(" (")[0], field=key, lineno=lineno) from None
    except ValueError:
        raise ConfigError(f"cannot interpret {raw!r} as {kind}", field=key, lineno=lineno) from None
    raise AssertionError(kind)


def parse_grid(text: str) -> np.ndarray:
    """Parse ``linspace(a, b, n)``, ``geomspace(a, b, n)`` or ``a, b, c``.

    The grid must be non-empty, finite and strictly monotone.
    """
    m = _GRID_RE.match(text)
    if m:
        kind, a, b, n = m.groups()
        a, b, n = float(a), float(b), int(n)
        if n < 1:
            raise ConfigError("grid needs at least one point", field="grid")
        if kind == "geomspace" and not (a > 0 and b > 0):
            raise ConfigError("geomspace endpoints must be positive", field="grid")
        grid = np.linspace(a, b, n) if kind == "linspace" else np.geomspace(a, b, n)
    else:
        try:
            grid = np.array([float(x) for x in text.split(",") if x.strip()])
        except ValueError:
            raise ConfigError(f"cannot parse grid {text!r}", field="grid") from None
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ConfigError("grid must be non-empty and finite", field="grid")
    d = np.diff(grid)
    if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ConfigError("grid must be strictly monotone", field="grid")
    return grid


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A fully resolved, validated scenario."""

    name: str
    description: str
    command: str
    presets: tuple[str, ...]
    tables: tuple[AtomicParameterTable, ...]
    backend: str
    seed: int | None
    axis: str
    grid: np.ndarray
    velocity_classes: int | None
    settings: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.settings[name]

    def semantic(self) -> dict:
        """Everything that influences the numbers (no name, output or job count)."""
        return {
            "command": self.command,
            "tables": [dump_parameter_table(t) for t in self.tables],
            "backend": self.backend,
            "seed": self.seed,
            "axis": self.axis,
            "grid": [float(x).hex() for x in self.grid],
            "velocity_classes": self.velocity_classes,
            "settings": {sec: {k: (float(v).hex() if isinstance(v, float) else v) for k, v in sorted(vals.items())}
                         for sec, vals in sorted(self.settings.items())},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def describe(self) -> str:
        """Human-readable echo of the resolved parameters."""
        lines = [
            f"scenario  {self.name}" + (f" -- {self.description}" if self.description else ""),
            f"command   {self.command}",
            f"presets   {', '.join(self.presets) or '-'}",
            f"backend   {self.backend}",
            f"seed      {self.seed if self.seed is not None else '-'}",
            f"axis      {self.axis} ({self.grid.size} points, {self.grid[0]:g} .. {self.grid[-1]:g})",
        ]
        if self.velocity_classes:
            lines.append(f"velocity classes  {self.velocity_classes}")
        for sec, vals in self.settings.items():
            lines.append(f"[{sec}]")
            for k, v in vals.items():
                lines.append(f"  {k} = {v}")
        for t in self.tables:
            lines.append(f"--- parameter table {t.name} ({t.architecture}) ---")
            lines.append(dump_parameter_table(t).rstrip())
        lines.append(f"config_sha256 {self.config_hash()}")
        return "\n".join(lines)


def _scenario_dir():
    return resources.files("raqr") / "data" / "scenarios"


def shipped_scenarios() -> dict[str, str]:
    """``{name: description}`` of the shipped figure scenarios."""
    out = {}
    for res in sorted(_scenario_dir().iterdir(), key=lambda r: r.name):
        if res.name.endswith(".ini"):
            cp = _parse_ini(res.read_text(encoding="utf-8"), res.name)
            out[res.name[:-4]] = cp.get("scenario", "description", fallback="").strip()
    return out


def list_presets() -> dict[str, str]:
    """Parameter presets and figure scenarios as ``{name: description}``."""
    out = dict(_list_parameter_presets())
    out.update(shipped_scenarios())
    return out


def _resolve_config(config: str) -> tuple[str, str, str]:
    """Return ``(kind, text, source)`` with kind ``"scenario"`` or ``"table"``."""
    p = Path(config)
    if p.is_file():
        text = p.read_text(encoding="utf-8")
        source = str(p)
    else:
        res = _scenario_dir() / f"{config}.ini"
        table_res = resources.files("raqr") / "data" / f"{config}.ini"
        if res.is_file():
            return "scenario", res.read_text(encoding="utf-8"), res.name
        if table_res.is_file() and config.startswith("cs_") and "quantum" not in config:
            return "table", table_res.read_text(encoding="utf-8"), table_res.name
        raise ConfigError(f"no scenario file or shipped scenario/preset named {config!r}", field="config")
    cp = _parse_ini(text, source)
    if cp.has_section("scenario"):
        return "scenario", text, source
    if cp.has_section("meta"):
        return "table", text, source
    raise ConfigError(f"{source}: neither a scenario ([scenario]) nor a parameter table ([meta])")


def load_scenario(config: str | None = None, command: str | None = None, seed: int | None = None,
                  backend: str | None = None) -> Scenario:
    """Read, merge defaults and validate a scenario.

    Parameters
    ----------
    config : str, optional
        Scenario file, shipped scenario name, or parameter preset/file.
        Without it, ``command`` runs on its defaults with ``cs_3c5l``.
    command : str, optional
        Subcommand; must agree with the scenario's ``command`` if both given.
    seed, backend : optional
        Command-line overrides.
    """
    raw: dict[str, dict[str, str]] = {}
    loc: dict = {}
    source = "<defaults>"
    tables_text: list[tuple[str, AtomicParameterTable]] = []
    if config is not None:
        kind, text, source = _resolve_config(config)
        if kind == "table":
            table = parse_parameter_table(text, source)
            tables_text.append((table.name, table))
        else:
            cp = _parse_ini(text, source)
            loc = _locate_keys(text)
            for sec in cp.sections():
                if sec not in SCHEMA:
                    raise ConfigError(f"{source}: unknown section [{sec}]", field=sec, lineno=loc.get((sec, "")))
                for key in cp[sec]:
                    if key not in SCHEMA[sec]:
                        raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]", field=key,
                                          lineno=loc.get((sec, key)))
                raw[sec] = dict(cp[sec])

    settings: dict[str, dict] = {}
    for sec, keys in SCHEMA.items():
        vals = {}
        for key, (kind, default) in keys.items():
            if key in raw.get(sec, {}):
                vals[key] = _parse_value(kind, raw[sec][key], key, loc.get((sec, key)))
            else:
                vals[key] = default
        settings[sec] = vals
    head = settings.pop("scenario")

    cmd = head["command"] or command
    if cmd is None:
        raise ConfigError("no command given", field="command", lineno=loc.get(("scenario", "command")))
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; choose from {sorted(COMMANDS)}", field="command",
                          lineno=loc.get(("scenario", "command")))
    if command is not None and command != cmd:
        raise ConfigError(f"scenario is for {cmd!r}, not {command!r}", field="command",
                          lineno=loc.get(("scenario", "command")))
    spec = COMMANDS[cmd]

    if head["preset"] is not None:
        tables_text = []
        for name in head["preset"]:
            try:
                tables_text.append((name, load_parameter_table(name)))
            except FileNotFoundError as exc:
                raise ConfigError(str(exc), field="preset", lineno=loc.get(("scenario", "preset"))) from None
    if not tables_text and spec.needs_preset:
        tables_text = [("cs_3c5l", load_parameter_table("cs_3c5l"))]
    if spec.single_preset and len(tables_text) > 1:
        raise ConfigError(f"{cmd} takes a single preset", field="preset", lineno=loc.get(("scenario", "preset")))
    names = tuple(n for n, _ in tables_text)
    tables = tuple(t for _, t in tables_text)

    axis = head["axis"] or spec.axes[0]
    if axis not in spec.axes:
        raise ConfigError(f"{cmd} sweeps {spec.axes}, not {axis!r}", field="axis", lineno=loc.get(("scenario", "axis")))
    grid = head["grid"]
    if grid is None:
        if cmd == "spectrum":
            grid = parse_grid(_SPECTRUM_GRID[tables[0].architecture])
        elif axis == spec.axes[0]:
            grid = parse_grid(spec.default_grid)
        else:
            raise ConfigError(f"axis {axis!r} needs an explicit grid", field="grid")
    if axis == "n":
        if not np.all(grid == np.round(grid)) or grid.min() < 5:
            raise ConfigError("n grid must hold integers >= 5", field="grid", lineno=loc.get(("scenario", "grid")))
    if axis in ("tx_power", "lo_field") and not np.all(grid > 0):
        raise ConfigError(f"{axis} grid must be positive", field="grid", lineno=loc.get(("scenario", "grid")))
    if axis == "temperature" and not np.all(grid >= 0):
        raise ConfigError("temperature grid must be non-negative", field="grid")

    be = backend or head["backend"] or spec.default_backend
    if be not in ("analytic", "exact"):
        raise ConfigError(f"backend must be 'analytic' or 'exact', got {be!r}", field="backend",
                          lineno=loc.get(("scenario", "backend")))
    sd = seed if seed is not None else head["seed"]
    if sd is not None and not 0 <= sd < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")
    if spec.randomized and sd is None:
        raise ConfigError(f"{cmd} is randomised and needs an explicit seed (--seed or [scenario] seed)",
                          field="seed")
    vc = head["velocity_classes"]
    if vc is not None and (vc < 1 or vc % 2 == 0):
        raise ConfigError("velocity_classes must be a positive odd integer", field="velocity_classes",
                          lineno=loc.get(("scenario", "velocity_classes")))

    if settings["modem"]["fading"] not in ("rayleigh", "awgn"):
        raise ConfigError("fading must be 'rayleigh' or 'awgn'", field="fading",
                          lineno=loc.get(("modem", "fading")))
    if settings["access"]["model"] not in ("constant", "ritz"):
        raise ConfigError("model must be 'constant' or 'ritz'", field="model", lineno=loc.get(("access", "model")))
    if settings["capacity"]["samples"] < 10_000:
        raise ConfigError("capacity needs at least 1e4 samples", field="samples",
                          lineno=loc.get(("capacity", "samples")))

    default_name = Path(source).stem if config is not None else cmd
    sc = Scenario(
        name=head["name"] or default_name,
        description=head["description"],
        command=cmd,
        presets=names,
        tables=tables,
        backend=be,
        seed=sd,
        axis=axis,
        grid=grid,
        velocity_classes=vc,
        settings=settings,
    )
    # Build every model object once so that invalid values fail here, with
    # the field name, rather than mid-run.
    for sec, build in (("detector", _chain), ("classical", _classical), ("modem", lambda s: _modem(s, 0))):
        try:
            build(sc)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}", field=sec) from None
    link = sc.section("link")
    for key in ("tx_power", "distance", "bandwidth_cl", "t_env"):
        if not link[key] > 0:
            raise ConfigError(f"{key} must be positive", field=key, lineno=loc.get(("link", key)))
    for key in ("carrier", "bandwidth_raqr"):
        if link[key] != _AUTO and not link[key] > 0:
            raise ConfigError(f"{key} must be positive or 'auto'", field=key, lineno=loc.get(("link", key)))
    if not 0 < link["margin"] < 1:
        raise ConfigError("margin must lie in (0, 1)", field="margin", lineno=loc.get(("link", "margin")))
    ov = sc.section("overrides")
    for key in ("probe_power", "lo_field"):
        if ov[key] is not None and not ov[key] > 0:
            raise ConfigError(f"{key} must be positive", field=key, lineno=loc.get(("overrides", key)))
    if ov["temperature"] is not None and ov["temperature"] < 0:
        raise ConfigError("temperature must be non-negative", field="temperature")
    return sc


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------


def _chain(sc: Scenario) -> DetectorChain:
    d = sc.section("detector")
    return DetectorChain(responsivity=d["responsivity"], gain=float(from_db(d["gain_db"])), lo_power=d["lo_power"],
                         noise_temperature=d["noise_temperature"], load=d["load"])


def _classical(sc: Scenario) -> ClassicalReceiver:
    c = sc.section("classical")
    F = c["noise_factor"] if c["noise_figure_db"] is None else float(from_db(c["noise_figure_db"]))
    return ClassicalReceiver(rx_gain=float(from_db(c["rx_gain_db"])), lna_gain=float(from_db(c["lna_gain_db"])),
                             noise_factor=F, filter_order=c["filter_order"])


def _modem(sc: Scenario, seed: int) -> ModemConfig:
    m = sc.section("modem")
    return ModemConfig(m["block_length"], m["block_count"], m["pilots"], seed)


def _receiver(sc: Scenario, table: AtomicParameterTable, **changes) -> Receiver:
    ov = sc.section("overrides")
    kw = dict(chain=_chain(sc), lo_field=ov["lo_field"], probe_power=ov["probe_power"],
              temperature=ov["temperature"], dephase_all=ov["dephase_all"])
    kw.update(changes)
    return Receiver(table, **kw)


def _grid(sc: Scenario, rx: Receiver):
    return rx.velocity_grid(sc.backend, sc.velocity_classes)


def _carrier(sc: Scenario, rx: Receiver) -> float:
    c = sc.section("link")["carrier"]
    if c != _AUTO:
        return c
    a, b = rx.table.rf_states
    return transition_frequency(a, b, rx.species, rx.defects)


def _link_scenario(sc: Scenario, rx: Receiver, tx_power: float, b_raqr: float) -> LinkScenario:
    lk = sc.section("link")
    return LinkScenario(tx_power=float(tx_power), tx_gain=float(from_db(lk["tx_gain_db"])), distance=lk["distance"],
                        carrier=_carrier(sc, rx), bandwidth_raqr=b_raqr, bandwidth_cl=lk["bandwidth_cl"],
                        T_env=lk["t_env"])


def _raqr_bandwidth(sc: Scenario, rx: Receiver) -> float:
    b = sc.section("link")["bandwidth_raqr"]
    return rx.bandwidth().bandwidth if b == _AUTO else b


def _raqr_snrs(sc: Scenario, table: AtomicParameterTable, jobs: int):
    """SNR (linear) of one preset along a transmit-power grid, plus the
    saturation flags and the RAQR bandwidth used."""
    rx = _receiver(sc, table)
    resp = rx.response(sc.backend, _grid(sc, rx), jobs=jobs)
    b = _raqr_bandwidth(sc, rx)
    lk = sc.section("link")
    res = [rx.link(_link_scenario(sc, rx, p, b), resp, margin=lk["margin"], clamp=lk["clamp"]) for p in sc.grid]
    return np.array([r.snr for r in res]), np.array([r.regime != "linear" for r in res], dtype=float), b


def _classical_snrs(sc: Scenario, rx: Receiver):
    cl = _classical(sc)
    b = sc.section("link")["bandwidth_raqr"]
    b = 1.0 if b == _AUTO else b  # not used by the classical SNR
    return np.array([classical_snr(_link_scenario(sc, rx, p, b), cl) for p in sc.grid])


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultTable:
    """Rectangular numeric table with unit-suffixed column names."""

    columns: tuple[str, ...]
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.shape[1] != len(self.columns):
            raise ValueError("table is not rectangular")
        object.__setattr__(self, "rows", rows)

    def to_csv(self) -> str:
        meta = " ".join(f"{k}={v}" for k, v in self.metadata.items())
        lines = [f"# {meta}", ",".join(self.columns)]
        lines += [",".join(_fmt(x) for x in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    if np.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.12e}"


def _columns(sc: Scenario, *cols) -> tuple[str, ...]:
    return (AXIS_COLUMNS[sc.axis],) + cols


def _run_spectrum(sc: Scenario, jobs: int):
    rx = _receiver(sc, sc.tables[0])
    tr = rx.spectrum(sc.grid, sc.backend, _grid(sc, rx), jobs=jobs)
    return _columns(sc, "transmission"), np.column_stack([sc.grid, tr])


def _run_access(sc: Scenario, jobs: int):
    species, defects = load_quantum_defects()
    model = sc.section("access")["model"]
    rows = []
    dF = defects.defect(RydbergState(50, 3, 3.5))
    dG = defects.defect(RydbergState(50, 4, 4.5))
    for n in sc.grid.astype(int):
        n = int(n)
        f = lambda a, b: transition_frequency(a, b, species, defects, model)
        rows.append([
            n,
            f(RydbergState(n, 2, 2.5), RydbergState(n + 1, 1, 1.5)),
            f(RydbergState(n, 2, 2.5), RydbergState(n, 3, 3.5)),
            f(RydbergState(n, 3, 3.5), RydbergState(n, 4, 4.5)),
            high_l_frequency(n, dF, dG, species),
        ])
    cols = _columns(sc, "f_nD52_n1P32_Hz", "f_nD52_nF72_Hz", "f_nF72_nG92_Hz", "f_nF_nG_asymptotic_Hz")
    return cols, np.array(rows)


def _run_noise(sc: Scenario, jobs: int):
    base = _receiver(sc, sc.tables[0])
    lk = sc.section("link")
    rows = []
    if sc.axis == "tx_power":
        resp = base.response(sc.backend, _grid(sc, base), jobs=jobs)
        b = _raqr_bandwidth(sc, base)
        points = [(base, resp, _link_scenario(sc, base, p, b)) for p in sc.grid]
    else:
        points = []
        for T in sc.grid:
            rx = base.with_(temperature=float(T))
            resp = rx.response(sc.backend, _grid(sc, rx), jobs=jobs)
            points.append((rx, resp, _link_scenario(sc, rx, lk["tx_power"], _raqr_bandwidth(sc, rx))))
    for x, (rx, resp, ls) in zip(sc.grid, points):
        r = rx.link(ls, resp, margin=lk["margin"], clamp=lk["clamp"])
        rows.append([x, r.signal_power, r.noise_qpn, r.noise_psn, r.noise_itn, db(r.snr), r.regime != "linear"])
    return _columns(sc, "signal_W", "qpn_W", "psn_W", "itn_W", "snr_dB", "saturated"), np.array(rows, dtype=float)


def _run_tradeoff(sc: Scenario, jobs: int):
    base = _receiver(sc, sc.tables[0])
    lk = sc.section("link")
    rows = []
    for E in sc.grid:
        rx = base.with_(lo_field=float(E))
        resp = rx.response(sc.backend, _grid(sc, rx), jobs=jobs)
        bw = rx.bandwidth().bandwidth
        r = rx.link(_link_scenario(sc, rx, lk["tx_power"], bw), resp, margin=lk["margin"], clamp=lk["clamp"])
        rows.append([E, bw, abs(resp.chi_prime), db(r.snr)])
    return _columns(sc, "bandwidth_Hz", "abs_chi_prime_s", "snr_dB"), np.array(rows)


def _run_filter(sc: Scenario, jobs: int):
    cols, data = [], [sc.grid]
    for name, table in zip(sc.presets, sc.tables):
        rx = _receiver(sc, table)
        det = [0.0] * (rx.n_levels - 2) + [2 * np.pi * sc.grid]
        mag = np.abs(rx.response(sc.backend, _grid(sc, rx), jobs=jobs, detunings=det).chi_prime)
        cols.append(f"raqr_{name}_norm")
        data.append(np.broadcast_to(mag, sc.grid.shape) / np.max(mag))
    cl = _classical(sc)
    cols.append("classical_norm")
    data.append(butterworth_response(sc.section("link")["bandwidth_cl"], cl.filter_order, sc.grid))
    return _columns(sc, *cols), np.column_stack(data)


def _run_snr(sc: Scenario, jobs: int):
    cols, data = [], [sc.grid]
    for name, table in zip(sc.presets, sc.tables):
        snr, sat, _ = _raqr_snrs(sc, table, jobs)
        cols += [f"snr_{name}_dB", f"saturated_{name}"]
        data += [db(snr), sat]
    cols.append("snr_classical_dB")
    data.append(db(_classical_snrs(sc, _receiver(sc, sc.tables[0]))))
    return _columns(sc, *cols), np.column_stack(data)


def _run_capacity(sc: Scenario, jobs: int):
    n = sc.section("capacity")["samples"]
    cols, data = [], [sc.grid]
    for name, table in zip(sc.presets, sc.tables):
        snr, _, b = _raqr_snrs(sc, table, jobs)
        cols += [f"capacity_{name}_bps", f"bandwidth_{name}_Hz"]
        data += [ergodic_capacity(snr, b, n, sc.seed), np.full(sc.grid.shape, b)]
    lk = sc.section("link")
    cols.append("capacity_classical_bps")
    data.append(ergodic_capacity(_classical_snrs(sc, _receiver(sc, sc.tables[0])), lk["bandwidth_cl"], n, sc.seed))
    return _columns(sc, *cols), np.column_stack(data)


def _run_bler(sc: Scenario, jobs: int):
    m = sc.section("modem")
    fading = FadingModel(m["fading"], m["perfect_csi"])
    modem = _modem(sc, sc.seed)
    run = lambda g: bler_simulation(modem, fading, float(g), jobs=jobs)
    if sc.axis == "snr":
        res = [run(from_db(g)) for g in sc.grid]
        rows = np.array([[g, r.bler, r.channel_power] for g, r in zip(sc.grid, res)])
        return _columns(sc, "bler", "channel_power"), rows
    cols, data = [], [sc.grid]
    for name, table in zip(sc.presets, sc.tables):
        snr, _, _ = _raqr_snrs(sc, table, jobs)
        cols.append(f"bler_{name}")
        data.append([run(g).bler for g in snr])
    cols.append("bler_classical")
    data.append([run(g).bler for g in _classical_snrs(sc, _receiver(sc, sc.tables[0]))])
    return _columns(sc, *cols), np.column_stack(data)


_RUNNERS = {
    "spectrum": _run_spectrum,
    "access": _run_access,
    "noise": _run_noise,
    "tradeoff": _run_tradeoff,
    "filter": _run_filter,
    "snr": _run_snr,
    "capacity": _run_capacity,
    "bler": _run_bler,
}


def run_scenario(scenario: Scenario, out: str | Path | None = None, jobs: int = 1) -> ResultTable:
    """Evaluate ``scenario`` and optionally write the CSV to ``out``.

    Sweep points are produced in grid order; ``jobs`` only parallelises
    inner kernels (velocity classes, BLER blocks) and never changes the
    numbers.
    """
    cols, rows = _RUNNERS[scenario.command](scenario, jobs)
    meta = {
        "raqr": __version__,
        "scenario": scenario.name,
        "command": scenario.command,
        "config_sha256": scenario.config_hash(),
        "seed": scenario.seed if scenario.seed is not None else "none",
        "backend": scenario.backend,
    }
    table = ResultTable(tuple(cols), rows, meta)
    if out is not None:
        Path(out).write_text(table.to_csv(), encoding="utf-8")
    return table


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raqr", description="Rydberg atomic receiver simulations.")
    ap.add_argument("--version", action="version", version=f"raqr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list parameter presets and figure scenarios")
    v = sub.add_parser("validate", help="validate a scenario and echo the resolved parameters")
    v.add_argument("--config", help="scenario/preset name or file; all shipped scenarios if omitted")
    v.add_argument("--seed", type=_u64)
    v.add_argument("--backend", choices=("analytic", "exact"))
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec.help)
        p.add_argument("--config", help="scenario file, shipped scenario name or parameter preset")
        p.add_argument("--seed", type=_u64, help="unsigned 64-bit RNG seed")
        p.add_argument("--out", help="output CSV path (stdout if omitted)")
        p.add_argument("--backend", choices=("analytic", "exact"))
        p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads for inner kernels")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for name, desc in list_presets().items():
                print(f"{name:28s} {desc}")
            return EXIT_OK
        if args.command == "validate":
            names = [args.config] if args.config else list(shipped_scenarios())
            for name in names:
                sc = load_scenario(name, seed=args.seed, backend=args.backend)
                print(sc.describe())
                print()
            return EXIT_OK
        sc = load_scenario(args.config, command=args.command, seed=args.seed, backend=args.backend)
        table = run_scenario(sc, args.out, jobs=args.jobs)
        if args.out is None:
            sys.stdout.write(table.to_csv())
        return EXIT_OK
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        print(f"raqr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"raqr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"raqr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
