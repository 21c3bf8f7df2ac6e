"""Atomic species data, quantum-defect energies and receiver parameter tables.

Two kinds of data file live in ``raqr/data``:

* ``cs_quantum_defects.ini`` -- species constants and per-orbital quantum
  defects ``delta(n) = d0 + d2 / (n - d0)**2``.
* ``cs_2c4l.ini`` / ``cs_3c5l.ini`` -- the receiver parameter presets.

Parameter files are written in laboratory units (rates as ``Gamma/2pi`` in Hz,
dipoles in units of ``e a0``) and converted to SI/angular units on load, so
that every :class:`AtomicParameterTable` holds rad/s and C m.
"""
from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from scipy.constants import (
    Rydberg,
    atomic_mass,
    c,
    electron_mass,
    h,
    hbar,
    physical_constants,
)

__all__ = [
    "ParameterError",
    "Species",
    "QuantumDefectTable",
    "RydbergState",
    "Laser",
    "AtomicParameterTable",
    "rydberg_energy",
    "transition_frequency",
    "high_l_frequency",
    "load_quantum_defects",
    "load_parameter_table",
    "parse_parameter_table",
    "dump_parameter_table",
    "list_presets",
    "preset_path",
    "DIPOLE_UNIT",
]

#: Atomic unit of electric dipole moment, e * a0 (C m).
DIPOLE_UNIT = physical_constants["atomic unit of electric dipole mom."][0]

_ORBITALS = "SPDFGHIK"
_TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised for malformed or unphysical data files.

    Attributes
    ----------
    field : str or None
        Name of the offending key, when one can be identified.
    lineno : int or None
        1-based line number in the source file, when known.
    """

    def __init__(self, message: str, field: str | None = None, lineno: int | None = None):
        where = f" (line {lineno})" if lineno is not None else ""
        super().__init__(f"{message}{where}")
        self.field = field
        self.lineno = lineno


# ---------------------------------------------------------------------------
# Species and states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Species:
    """Alkali species constants.

    Parameters
    ----------
    name : str
        Chemical symbol.
    mass : float
        Atomic mass in kg.
    rydberg_constant : float
        Reduced-mass corrected Rydberg energy ``R_y`` in J.
    fine_structure_constant : float
        Effective fine-structure constant used in the black-body rate.
    """

    name: str
    mass: float
    rydberg_constant: float
    fine_structure_constant: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ParameterError("species mass must be positive", field="mass")
        if not self.rydberg_constant > 0:
            raise ParameterError("Rydberg constant must be positive", field="rydberg_constant")

    @classmethod
    def from_mass(cls, name: str, mass_amu: float, fine_structure_constant: float) -> "Species":
        """Build a species, applying the reduced-mass correction to ``R_inf``."""
        mass = mass_amu * atomic_mass
        r_inf = Rydberg * h * c
        return cls(name, mass, r_inf * mass / (mass + electron_mass), fine_structure_constant)


_STATE_RE = re.compile(r"^\s*(\d+)\s*([A-Za-z])\s*(\d+)\s*/\s*2\s*$")


@dataclass(frozen=True)
class RydbergState:
    """A fine-structure state ``n l_j``.

    ``j`` is stored as a float (e.g. ``2.5`` for ``D5/2``).
    """

    n: int
    l: int
    j: float

    def __post_init__(self):
        if self.l < 0:
            raise ValueError(f"orbital quantum number must be >= 0, got {self.l}")
        if self.n < self.l + 1:
            raise ValueError(f"n={self.n} is not allowed for l={self.l}")
        if abs(self.j - self.l) != 0.5 and not (self.l == 0 and self.j == 0.5):
            raise ValueError(f"j={self.j} is incompatible with l={self.l}")

    @classmethod
    def parse(cls, label: str) -> "RydbergState":
        """Parse labels such as ``"47D5/2"`` or ``"48 P 3/2"``."""
        m = _STATE_RE.match(label)
        if m is None:
            raise ValueError(f"cannot parse state label {label!r}")
        n, orb, twoj = int(m.group(1)), m.group(2).upper(), int(m.group(3))
        if orb not in _ORBITALS:
            raise ValueError(f"unknown orbital letter {orb!r} in {label!r}")
        return cls(n, _ORBITALS.index(orb), twoj / 2.0)

    @property
    def term(self) -> str:
        """Spectroscopic term without ``n``, e.g. ``"D5/2"``."""
        return f"{_ORBITALS[self.l]}{int(round(2 * self.j))}/2"

    def __str__(self) -> str:
        return f"{self.n}{self.term}"


# ---------------------------------------------------------------------------
# Quantum defects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantumDefectTable:
    """Rydberg--Ritz quantum defects per fine-structure term.

    Parameters
    ----------
    coefficients : mapping
        ``{"D5/2": (d0, d2), ...}``.  The constant model uses ``d0`` only;
        the Ritz model uses ``d0 + d2/(n - d0)**2``.
    version : str
        Provenance tag of the data file.
    """

    coefficients: Mapping[str, tuple[float, float]]
    version: str = "unversioned"

    def __post_init__(self):
        for term, (d0, d2) in self.coefficients.items():
            if not (math.isfinite(d0) and math.isfinite(d2)):
                raise ParameterError(f"non-finite quantum defect for {term}", field=term)
        ordered = [self._orbital_defect(o) for o in "SPDFG" if self._has(o)]
        if any(a <= b for a, b in zip(ordered, ordered[1:])) or (ordered and ordered[-1] < 0):
            raise ParameterError("quantum defects must satisfy d_S > d_P > d_D > d_F > d_G >= 0")

    def _has(self, orbital: str) -> bool:
        return any(k.startswith(orbital) for k in self.coefficients)

    def _orbital_defect(self, orbital: str) -> float:
        vals = [v[0] for k, v in self.coefficients.items() if k.startswith(orbital)]
        return sum(vals) / len(vals)

    def defect(self, state: RydbergState, model: str = "constant") -> float:
        """Quantum defect of ``state``.

        Parameters
        ----------
        state : RydbergState
        model : {"constant", "ritz"}
            Constant ``d0`` or the two-term Rydberg--Ritz expansion.
        """
        term = state.term
        if term in self.coefficients:
            d0, d2 = self.coefficients[term]
        else:
            orbital = term[0]
            if not self._has(orbital):
                # Hydrogenic beyond the tabulated orbitals.
                return 0.0
            d0, d2 = self._orbital_defect(orbital), 0.0
        if model == "constant":
            return d0
        if model == "ritz":
            return d0 + d2 / (state.n - d0) ** 2
        raise ValueError(f"unknown quantum-defect model {model!r}")

    def orbital(self, letter: str) -> float:
        """j-averaged constant defect of an orbital (``"S"``, ``"P"``, ...)."""
        if not self._has(letter):
            raise KeyError(letter)
        return self._orbital_defect(letter)


def rydberg_energy(
    species: Species,
    defects: QuantumDefectTable,
    state: RydbergState,
    model: str = "constant",
) -> float:
    """Binding energy ``-R_y/(n - delta)**2`` in J."""
    n_eff = state.n - defects.defect(state, model)
    if n_eff <= 0:
        raise ValueError(f"effective quantum number {n_eff:.4g} <= 0 for {state}")
    return -species.rydberg_constant / n_eff**2


def transition_frequency(
    state_a: RydbergState,
    state_b: RydbergState,
    species: Species,
    defects: QuantumDefectTable,
    model: str = "constant",
) -> float:
    """Transition frequency ``|E_a - E_b| / h`` in Hz."""
    ea = rydberg_energy(species, defects, state_a, model)
    eb = rydberg_energy(species, defects, state_b, model)
    return abs(ea - eb) / (_TWO_PI * hbar)


def high_l_frequency(n, delta_f: float, delta_g: float, species: Species):
    """Asymptotic ``nF -> nG`` frequency ``R_y |dF - dG| / (pi hbar n^3)`` in Hz.

    Accepts scalar or array ``n``.
    """
    return species.rydberg_constant * abs(delta_f - delta_g) / (math.pi * hbar * n**3)


# ---------------------------------------------------------------------------
# INI helpers
# ---------------------------------------------------------------------------


def _data_dir():
    return resources.files("raqr") / "data"


def _locate_keys(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` to the 1-based line on which it is defined."""
    where: dict[tuple[str, str], int] = {}
    section = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where[(section, "")] = i
        elif "=" in line:
            where[(section, line.split("=", 1)[0].strip().lower())] = i
    return where


def _parse_ini(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ParameterError(f"{source}: duplicate key {exc.option!r}", field=exc.option, lineno=exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ParameterError(f"{source}: duplicate section {exc.section!r}", field=exc.section, lineno=exc.lineno) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ParameterError(f"{source}: key outside any section", lineno=exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParameterError(f"{source}: cannot parse line", lineno=lineno) from exc
    return cp


def load_quantum_defects(path: str | Path | None = None) -> tuple[Species, QuantumDefectTable]:
    """Load species constants and the quantum-defect table.

    Parameters
    ----------
    path : path-like, optional
        Defaults to the shipped caesium file.
    """
    if path is None:
        text = (_data_dir() / "cs_quantum_defects.ini").read_text(encoding="utf-8")
        source = "cs_quantum_defects.ini"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    cp = _parse_ini(text, source)
    sp = cp["species"]
    species = Species.from_mass(sp["name"], float(sp["mass_amu"]), float(sp["fine_structure_constant"]))
    coeffs = {}
    for sec in cp.sections():
        if sec in ("meta", "species"):
            continue
        coeffs[sec] = (float(cp[sec]["d0"]), float(cp[sec].get("d2", "0")))
    return species, QuantumDefectTable(coeffs, cp.get("meta", "version", fallback="unversioned"))


# ---------------------------------------------------------------------------
# Receiver parameter table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Laser:
    """One excitation beam of the ladder.

    ``direction`` is +1 for propagation along the probe axis and -1 for
    counter-propagation.
    """

    name: str
    wavelength: float
    power: float
    direction: int

    @property
    def wavenumber(self) -> float:
        return _TWO_PI / self.wavelength


_ARCHITECTURES = {"2C4L": ("probe", "coupling"), "3C5L": ("probe", "dressing", "coupling")}


@dataclass(frozen=True)
class AtomicParameterTable:
    """Immutable receiver parameter set in SI / angular units.

    Lasers are ordered along the ladder (probe first).  ``dipoles`` holds
    ``mu_12, mu_23, ...`` with the last entry the RF (Rydberg--Rydberg)
    dipole.  ``decay_rates`` holds ``Gamma_2 .. Gamma_N`` in rad/s.
    """

    name: str
    architecture: str
    species: str
    version: str
    cell_length: float
    atom_density: float
    beam_radius: float
    atom_temperature: float
    lasers: tuple[Laser, ...]
    dipoles: tuple[float, ...]
    decay_rates: tuple[float, ...]
    dephasing: float
    lo_field: float
    rf_lower: str
    rf_upper: str
    _lines: Mapping[tuple[str, str], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        loc = self._lines

        def fail(msg, sec, key):
            raise ParameterError(msg, field=key, lineno=loc.get((sec, key)))

        if self.architecture not in _ARCHITECTURES:
            fail(f"architecture must be one of {sorted(_ARCHITECTURES)}", "meta", "architecture")
        names = _ARCHITECTURES[self.architecture]
        if tuple(l.name for l in self.lasers) != names:
            fail(f"{self.architecture} needs lasers {names}", "meta", "architecture")
        n_levels = len(names) + 2
        for key, value in (
            ("length", self.cell_length),
            ("atom_density", self.atom_density),
            ("beam_radius", self.beam_radius),
        ):
            if not (math.isfinite(value) and value > 0):
                fail(f"{key} must be strictly positive, got {value}", "cell", key)
        if not (math.isfinite(self.atom_temperature) and self.atom_temperature >= 0):
            fail("atom_temperature must be non-negative", "cell", "atom_temperature")
        for las in self.lasers:
            sec = f"laser.{las.name}"
            if not 100e-9 < las.wavelength < 10e-6:
                fail(f"{las.name} wavelength {las.wavelength} m outside (100 nm, 10 um)", sec, "wavelength")
            if not las.power > 0:
                fail(f"{las.name} power must be strictly positive", sec, "power")
            if las.direction not in (1, -1):
                fail(f"{las.name} direction must be +1 or -1", sec, "direction")
        if len(self.dipoles) != n_levels - 1:
            fail(f"expected {n_levels - 1} dipole moments", "dipoles", "")
        for i, mu in enumerate(self.dipoles):
            if not mu > 0:
                fail("dipole moments must be strictly positive", "dipoles", f"mu{i + 1}{i + 2}")
        if len(self.decay_rates) != n_levels - 1:
            fail(f"expected {n_levels - 1} decay rates", "decay", "")
        for i, g in enumerate(self.decay_rates):
            if not g > 0:
                fail("decay rates must be strictly positive", "decay", f"gamma{i + 2}")
        if not self.dephasing > 0:
            fail("dephasing must be strictly positive", "decay", "dephasing")
        if not self.lo_field > 0:
            fail("lo_field must be strictly positive", "rf", "lo_field")
        for key in ("lower_state", "upper_state"):
            try:
                RydbergState.parse(getattr(self, "rf_" + key.split("_")[0]))
            except ValueError as exc:
                fail(str(exc), "rf", key)

    # Convenience views ----------------------------------------------------
    @property
    def n_levels(self) -> int:
        return len(self.lasers) + 2

    @property
    def wavelengths(self) -> tuple[float, ...]:
        return tuple(l.wavelength for l in self.lasers)

    @property
    def directions(self) -> tuple[int, ...]:
        return tuple(l.direction for l in self.lasers)

    @property
    def probe(self) -> Laser:
        return self.lasers[0]

    def laser(self, name: str) -> Laser:
        for las in self.lasers:
            if las.name == name:
                return las
        raise KeyError(name)

    @property
    def rf_dipole(self) -> float:
        return self.dipoles[-1]

    @property
    def rydberg_levels(self) -> tuple[int, ...]:
        """0-based indices of the two RF-coupled Rydberg levels."""
        return (self.n_levels - 2, self.n_levels - 1)

    @property
    def rf_states(self) -> tuple[RydbergState, RydbergState]:
        return RydbergState.parse(self.rf_lower), RydbergState.parse(self.rf_upper)


_SCHEMA: dict[str, set[str]] = {
    "meta": {"name", "architecture", "species", "version"},
    "cell": {"length", "atom_density", "beam_radius", "atom_temperature"},
    "laser.*": {"wavelength", "power", "direction"},
    "dipoles": {"mu12", "mu23", "mu34", "mu45"},
    "decay": {"gamma2", "gamma3", "gamma4", "gamma5", "dephasing"},
    "rf": {"lo_field", "lower_state", "upper_state"},
}


def _float(cp, loc, sec, key):
    try:
        raw = cp[sec][key]
    except KeyError:
        raise ParameterError(f"missing key [{sec}] {key}", field=key, lineno=loc.get((sec, ""))) from None
    try:
        return float(raw)
    except ValueError:
        raise ParameterError(f"[{sec}] {key}: not a number: {raw!r}", field=key, lineno=loc.get((sec, key))) from None


def parse_parameter_table(text: str, source: str = "<string>") -> AtomicParameterTable:
    """Parse parameter-file text; see :func:`load_parameter_table`."""
    cp = _parse_ini(text, source)
    loc = _locate_keys(text)
    for sec in cp.sections():
        allowed = _SCHEMA.get("laser.*" if sec.startswith("laser.") else sec)
        if allowed is None:
            raise ParameterError(f"{source}: unknown section [{sec}]", field=sec, lineno=loc.get((sec, "")))
        for key in cp[sec]:
            if key not in allowed:
                raise ParameterError(f"{source}: unknown key {key!r} in [{sec}]", field=key, lineno=loc.get((sec, key)))
    for sec in ("meta", "cell", "dipoles", "decay", "rf"):
        if sec not in cp:
            raise ParameterError(f"{source}: missing section [{sec}]", field=sec)
    arch = cp["meta"].get("architecture", "").strip().upper()
    if arch not in _ARCHITECTURES:
        raise ParameterError(
            f"{source}: architecture must be one of {sorted(_ARCHITECTURES)}",
            field="architecture",
            lineno=loc.get(("meta", "architecture")),
        )
    names = _ARCHITECTURES[arch]
    lasers = []
    for name in names:
        sec = f"laser.{name}"
        if sec not in cp:
            raise ParameterError(f"{source}: missing section [{sec}]", field=sec)
        direction = _float(cp, loc, sec, "direction")
        if direction != int(direction):
            raise ParameterError("direction must be +1 or -1", field="direction", lineno=loc.get((sec, "direction")))
        lasers.append(Laser(name, _float(cp, loc, sec, "wavelength"), _float(cp, loc, sec, "power"), int(direction)))
    extra = {s for s in cp.sections() if s.startswith("laser.")} - {f"laser.{n}" for n in names}
    if extra:
        sec = sorted(extra)[0]
        raise ParameterError(f"{source}: laser [{sec}] not used by {arch}", field=sec, lineno=loc.get((sec, "")))
    n_levels = len(names) + 2
    dipoles = tuple(_float(cp, loc, "dipoles", f"mu{i}{i + 1}") * DIPOLE_UNIT for i in range(1, n_levels))
    decay = tuple(_TWO_PI * _float(cp, loc, "decay", f"gamma{i}") for i in range(2, n_levels + 1))
    for sec, prefix, count in (("dipoles", "mu", n_levels - 1), ("decay", "gamma", n_levels - 1)):
        used = sum(1 for k in cp[sec] if k.startswith(prefix))
        if used != count:
            raise ParameterError(f"[{sec}] has {used} {prefix}* entries, {arch} needs {count}", field=sec, lineno=loc.get((sec, "")))
    meta = cp["meta"]
    return AtomicParameterTable(
        name=meta.get("name", Path(source).stem),
        architecture=arch,
        species=meta.get("species", "Cs"),
        version=meta.get("version", "1"),
        cell_length=_float(cp, loc, "cell", "length"),
        atom_density=_float(cp, loc, "cell", "atom_density"),
        beam_radius=_float(cp, loc, "cell", "beam_radius"),
        atom_temperature=_float(cp, loc, "cell", "atom_temperature"),
        lasers=tuple(lasers),
        dipoles=dipoles,
        decay_rates=decay,
        dephasing=_TWO_PI * _float(cp, loc, "decay", "dephasing"),
        lo_field=_float(cp, loc, "rf", "lo_field"),
        rf_lower=cp["rf"].get("lower_state", "").strip(),
        rf_upper=cp["rf"].get("upper_state", "").strip(),
        _lines=loc,
    )


def preset_path(name: str):
    """Path (traversable) of a shipped preset such as ``"cs_3c5l"``."""
    res = _data_dir() / f"{name}.ini"
    if not res.is_file():
        raise FileNotFoundError(f"no shipped preset named {name!r}")
    return res


def list_presets() -> dict[str, str]:
    """Shipped parameter presets as ``{name: description}``."""
    out = {}
    for res in sorted(_data_dir().iterdir(), key=lambda r: r.name):
        if res.name.endswith(".ini") and res.name.startswith("cs_") and "quantum" not in res.name:
            table = parse_parameter_table(res.read_text(encoding="utf-8"), res.name)
            out[res.name[:-4]] = f"{table.species} {table.architecture} receiver ({table.rf_lower} <-> {table.rf_upper})"
    return out


def load_parameter_table(path) -> AtomicParameterTable:
    """Load a receiver parameter file.

    Parameters
    ----------
    path : path-like or str
        A file path, or the name of a shipped preset (``"cs_2c4l"``,
        ``"cs_3c5l"``).

    Raises
    ------
    ParameterError
        On parse errors (with line number), unknown keys, or invariant
        violations (naming the field).
    """
    p = Path(path)
    if not p.exists() and not p.suffix and p.name == str(path):
        res = preset_path(str(path))
        return parse_parameter_table(res.read_text(encoding="utf-8"), res.name)
    if not p.is_file():
        raise FileNotFoundError(f"parameter file not found: {path}")
    return parse_parameter_table(p.read_text(encoding="utf-8"), str(p))


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def dump_parameter_table(table: AtomicParameterTable) -> str:
    """Serialise ``table`` back to the parameter-file format (lab units)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["meta"] = {
        "name": table.name,
        "architecture": table.architecture,
        "species": table.species,
        "version": table.version,
    }
    cp["cell"] = {
        "length": _fmt(table.cell_length),
        "atom_density": _fmt(table.atom_density),
        "beam_radius": _fmt(table.beam_radius),
        "atom_temperature": _fmt(table.atom_temperature),
    }
    for las in table.lasers:
        cp[f"laser.{las.name}"] = {
            "wavelength": _fmt(las.wavelength),
            "power": _fmt(las.power),
            "direction": str(las.direction),
        }
    cp["dipoles"] = {f"mu{i + 1}{i + 2}": _fmt(mu / DIPOLE_UNIT) for i, mu in enumerate(table.dipoles)}
    decay = {f"gamma{i + 2}": _fmt(g / _TWO_PI) for i, g in enumerate(table.decay_rates)}
    decay["dephasing"] = _fmt(table.dephasing / _TWO_PI)
    cp["decay"] = decay
    cp["rf"] = {"lo_field": _fmt(table.lo_field), "lower_state": table.rf_lower, "upper_state": table.rf_upper}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
