"""Parameters, unit conventions, detunings and the figure presets.

Every frequency, damping rate and coupling rate is stored as an angular
quantity in rad/s.  The radiation-pressure coupling ``chi`` is a force per
photon in newtons (J/m).  Caption-style values ("f/2pi = 5 GHz") are
converted by multiplying with 2*pi.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import yaml
from scipy import constants as _sc

from .errors import ConfigError, UnknownPresetError

TWO_PI = 2.0 * math.pi

#: Readings of the caption notation "chi/2pi = x J/m".
CHI_READINGS = ("literal", "two_pi")

#: Probe amplitude used by the presets, relative to the drive amplitude.
DEFAULT_PROBE_RATIO = 1e-3

#: epsilon/Omega above which the probe is no longer considered weak.
WEAK_PROBE_RATIO = 0.1


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    k_boltzmann: float = _sc.k


CONSTANTS = PhysicalConstants()
HBAR = CONSTANTS.hbar
K_B = CONSTANTS.k_boltzmann


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the cavity / mechanical resonator / qubit system.

    Attributes
    ----------
    omega_cavity, omega_qubit, omega_mech : float
        Cavity, qubit transition and mechanical frequencies [rad/s].
    gamma_cavity, gamma_qubit, gamma_mech : float
        Damping rates [rad/s].
    mass : float
        Mechanical mass [kg].
    chi : float
        Radiation-pressure force per photon [N].
    g_qubit : float
        Qubit-cavity coupling rate [rad/s].
    sigma_z_ss : float
        Frozen steady-state value of the qubit inversion, in [-1, 1].
    """

    omega_cavity: float
    omega_qubit: float
    omega_mech: float
    gamma_cavity: float
    gamma_qubit: float
    gamma_mech: float
    mass: float
    chi: float
    g_qubit: float
    sigma_z_ss: float = 1.0

    def replace(self, **changes: Any) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def kerr_shift(self) -> float:
        """Detuning shift per intracavity photon, chi^2 / (m hbar omega_m^2) [rad/s]."""
        return self.chi**2 / (self.mass * HBAR * self.omega_mech**2)

    @property
    def x_scale(self) -> float:
        """Length scale sqrt(hbar / (m omega_m)) used to condition linear systems."""
        return math.sqrt(HBAR / (self.mass * self.omega_mech))


@dataclass(frozen=True)
class DriveConfig:
    """Drive and probe tones plus the mechanical bath temperature.

    ``big_omega`` and ``epsilon`` are the (real, nonnegative) drive and probe
    amplitudes in rad/s; ``temperature`` is in kelvin.
    """

    omega_drive: float
    omega_probe: float
    big_omega: float
    epsilon: float
    temperature: float = 0.0

    def replace(self, **changes: Any) -> "DriveConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Detunings:
    """Detunings from the drive in the rotating frame [rad/s].

    ``delta`` may be a numpy array, in which case downstream probe-response
    functions evaluate on every entry.
    """

    delta1: float
    delta2: float
    delta: Any

    def with_delta(self, delta: Any) -> "Detunings":
        return Detunings(self.delta1, self.delta2, delta)


def derive_detunings(params: SystemParams, drive: DriveConfig) -> Detunings:
    """Cavity, qubit and probe detunings relative to the drive frequency."""
    return Detunings(
        delta1=params.omega_cavity - drive.omega_drive,
        delta2=params.omega_qubit - drive.omega_drive,
        delta=drive.omega_probe - drive.omega_drive,
    )


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


def validate_params(
    params: SystemParams, drive: DriveConfig, *, g2_request: bool = False
) -> list[Diagnostic]:
    """Check type invariants and soft physics warnings.

    Returns an empty list when everything is clean.  Diagnostics are data;
    nothing is raised here.
    """
    out: list[Diagnostic] = []

    def err(name: str, msg: str) -> None:
        out.append(Diagnostic("error", name, msg))

    for name in ("omega_cavity", "omega_qubit", "omega_mech"):
        if not getattr(params, name) > 0:
            err(name, f"{name} must be positive")
    for name in ("gamma_cavity", "gamma_qubit", "gamma_mech"):
        if not getattr(params, name) > 0:
            err(name, f"{name} must be positive")
    if not params.mass > 0:
        err("mass", "mass must be positive")
    if not params.chi >= 0:
        err("chi", "chi must be nonnegative")
    if not params.g_qubit >= 0:
        err("g_qubit", "g_qubit must be nonnegative")
    if not -1.0 <= params.sigma_z_ss <= 1.0:
        err("sigma_z_ss", "sigma_z_ss must lie in [-1, 1]")

    for name in ("omega_drive", "omega_probe"):
        if not getattr(drive, name) > 0:
            err(name, f"{name} must be positive")
    if not drive.big_omega >= 0:
        err("big_omega", "drive amplitude must be nonnegative")
    if not drive.epsilon >= 0:
        err("epsilon", "probe amplitude must be nonnegative")
    if not drive.temperature >= 0:
        err("temperature", "temperature must be nonnegative")

    if drive.epsilon > 0:
        if drive.big_omega == 0 or drive.epsilon / drive.big_omega > WEAK_PROBE_RATIO:
            out.append(Diagnostic("warning", "epsilon", "probe not weak relative to drive"))
    if g2_request and drive.epsilon != 0:
        out.append(
            Diagnostic("warning", "epsilon", "probe amplitude is ignored for g2 (probe off)")
        )
    return out


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.level == "error" for d in diagnostics)


# --- caption units ---------------------------------------------------------

# caption key -> (SystemParams/DriveConfig field, is an "X/2pi" frequency)
_CAPTION_FIELDS: dict[str, tuple[str, bool]] = {
    "f_cavity_hz": ("omega_cavity", True),
    "f_qubit_hz": ("omega_qubit", True),
    "f_mech_hz": ("omega_mech", True),
    "gamma_cavity_hz": ("gamma_cavity", True),
    "gamma_qubit_hz": ("gamma_qubit", True),
    "gamma_mech_hz": ("gamma_mech", True),
    "mass_kg": ("mass", False),
    "chi_jm": ("chi", False),
    "g_hz": ("g_qubit", True),
    "f_drive_hz": ("omega_drive", True),
    "f_probe_hz": ("omega_probe", True),
    "Omega_hz": ("big_omega", True),
    "epsilon_hz": ("epsilon", True),
    "temperature_k": ("temperature", False),
}

_SYSTEM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)}
_DRIVE_FIELDS = {f.name for f in dataclasses.fields(DriveConfig)}


def _check_chi_reading(chi_reading: str) -> None:
    if chi_reading not in CHI_READINGS:
        raise ConfigError(f"chi_reading must be one of {CHI_READINGS}, got {chi_reading!r}")


def from_caption(
    caption: Mapping[str, float], chi_reading: str = "literal"
) -> tuple[SystemParams, DriveConfig]:
    """Convert caption-style values (Hz, "X/2pi" notation) to internal units."""
    _check_chi_reading(chi_reading)
    values: dict[str, float] = {"sigma_z_ss": float(caption.get("sigma_z", 1.0))}
    for key, (name, is_freq) in _CAPTION_FIELDS.items():
        if key not in caption:
            continue
        v = float(caption[key])
        if is_freq or (name == "chi" and chi_reading == "two_pi"):
            v *= TWO_PI
        values[name] = v
    values.setdefault("temperature", 0.0)
    try:
        params = SystemParams(**{k: v for k, v in values.items() if k in _SYSTEM_FIELDS})
        drive = DriveConfig(**{k: v for k, v in values.items() if k in _DRIVE_FIELDS})
    except TypeError as exc:
        raise ConfigError(f"incomplete caption: {exc}") from None
    return params, drive


def to_caption(
    params: SystemParams, drive: DriveConfig, chi_reading: str = "literal"
) -> dict[str, float]:
    """Inverse of :func:`from_caption`."""
    _check_chi_reading(chi_reading)
    out: dict[str, float] = {}
    for key, (name, is_freq) in _CAPTION_FIELDS.items():
        src = params if name in _SYSTEM_FIELDS else drive
        v = float(getattr(src, name))
        if is_freq or (name == "chi" and chi_reading == "two_pi"):
            v /= TWO_PI
        out[key] = v
    out["sigma_z"] = params.sigma_z_ss
    return out


# --- presets ----------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform probe-detuning grid: ``npoints`` values spanning ``span`` around ``center`` [rad/s]."""

    center: float
    span: float
    npoints: int = 2001

    def grid(self) -> np.ndarray:
        if self.npoints < 1:
            raise ValueError("npoints must be >= 1")
        if self.npoints == 1:
            return np.array([self.center], dtype=float)
        return np.linspace(self.center - self.span / 2, self.center + self.span / 2, self.npoints)


@dataclass(frozen=True)
class Preset:
    """A named parameter set from one figure, with its curve variants.

    ``variants`` holds ``(label, overrides)`` pairs; overrides are in caption
    units (keys of the caption table, e.g. ``g_hz`` or ``chi_jm``).
    """

    name: str
    description: str
    caption: tuple[tuple[str, float], ...]
    variants: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    default_variant: str
    grid: GridSpec
    chi_reading: str = "literal"
    params: SystemParams = field(init=False, compare=False)
    drive: DriveConfig = field(init=False, compare=False)

    def __post_init__(self) -> None:
        p, d = self.resolve(self.default_variant)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "drive", d)

    @property
    def variant_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.variants)

    def variant_caption(self, variant: str | None = None) -> dict[str, float]:
        label = self.default_variant if variant is None else variant
        table = dict(self.variants)
        if label not in table:
            raise UnknownPresetError(
                f"preset {self.name!r} has no variant {label!r}; valid: {', '.join(table)}"
            )
        caption = dict(self.caption)
        caption.update(dict(table[label]))
        caption.setdefault("f_probe_hz", caption["f_drive_hz"] + caption["f_mech_hz"])
        caption.setdefault("epsilon_hz", DEFAULT_PROBE_RATIO * caption["Omega_hz"])
        return caption

    def resolve(self, variant: str | None = None) -> tuple[SystemParams, DriveConfig]:
        return from_caption(self.variant_caption(variant), self.chi_reading)


_FIG2 = {
    "f_cavity_hz": 5e9,
    "gamma_cavity_hz": 0.5e6,
    "f_qubit_hz": 4e9,
    "gamma_qubit_hz": 1e6,
    "f_mech_hz": 8.5e6,
    "gamma_mech_hz": 25.0,
    "mass_kg": 2e-15,
    "f_drive_hz": 4.99e9,
    "Omega_hz": 3.1e6,
    "temperature_k": 0.0,
}
_FIG2_VARIANTS = (
    ("i", (("g_hz", 0.0), ("chi_jm", 2.8e-14))),
    ("ii", (("g_hz", 41.7e6), ("chi_jm", 0.0))),
    ("iii", (("g_hz", 41.7e6), ("chi_jm", 2.8e-14))),
)
_FIG3 = {
    "f_cavity_hz": 5e9,
    "gamma_cavity_hz": 5e6,
    "f_qubit_hz": 4.9e9,
    "gamma_qubit_hz": 2e6,
    "f_mech_hz": 8.5e6,
    "gamma_mech_hz": 25.0,
    "mass_kg": 2e-15,
    "f_drive_hz": 4.965e9,
    "Omega_hz": 0.98e6,
    "temperature_k": 0.0,
}
_FM = TWO_PI * 8.5e6
_NORM_GRID = GridSpec(center=_FM, span=0.02 * _FM, npoints=2001)

_PRESET_TABLE: dict[str, dict[str, Any]] = {
    "fig2": dict(
        description="probe quadratures vs (Delta-omega_m)/omega_m; (i) g=0, (ii) chi=0, (iii) both",
        caption=_FIG2,
        variants=_FIG2_VARIANTS,
        default_variant="iii",
        grid=_NORM_GRID,
    ),
    "fig3": dict(
        description="probe quadratures vs Delta/2pi in 20-50 MHz with larger g^2/(w0-wq) and chi",
        caption=_FIG3,
        variants=(
            ("i", (("g_hz", 30e6), ("chi_jm", 0.0))),
            ("ii", (("g_hz", 0.0), ("chi_jm", 3.0e-13))),
            ("iii", (("g_hz", 30e6), ("chi_jm", 3.0e-13))),
        ),
        default_variant="iii",
        grid=GridSpec(center=TWO_PI * 35e6, span=TWO_PI * 30e6, npoints=2001),
    ),
    "fig4a": dict(
        description="mu_p for g/2pi = 21.7, 31.7, 41.7 MHz at fixed chi (Fig. 2 parameters)",
        caption={**_FIG2, "chi_jm": 2.8e-14},
        variants=(
            ("i", (("g_hz", 21.7e6),)),
            ("ii", (("g_hz", 31.7e6),)),
            ("iii", (("g_hz", 41.7e6),)),
        ),
        default_variant="iii",
        grid=_NORM_GRID,
    ),
    "fig4b": dict(
        description="mu_p for chi = 2.0, 2.4, 2.8 x 1e-14 J/m at fixed g (Fig. 2 parameters)",
        caption={**_FIG2, "g_hz": 41.7e6},
        variants=(
            ("i", (("chi_jm", 2.0e-14),)),
            ("ii", (("chi_jm", 2.4e-14),)),
            ("iii", (("chi_jm", 2.8e-14),)),
        ),
        default_variant="iii",
        grid=_NORM_GRID,
    ),
    "fig5": dict(
        description="g2(tau) at T=0, Omega/2pi = 3.1 MHz; variants as in fig2",
        caption=_FIG2,
        variants=_FIG2_VARIANTS,
        default_variant="iii",
        grid=_NORM_GRID,
    ),
    "fig6": dict(
        description="g2(tau) at T=0 with the weak drive Omega/2pi = 0.22 MHz; variants as in fig2",
        caption={**_FIG2, "Omega_hz": 0.22e6},
        variants=_FIG2_VARIANTS,
        default_variant="iii",
        grid=_NORM_GRID,
    ),
}

PRESET_NAMES: tuple[str, ...] = tuple(_PRESET_TABLE)


def load_preset(name: str, chi_reading: str = "literal") -> Preset:
    """Return the named figure preset.

    ``chi_reading="literal"`` stores the quoted "chi/2pi" number as chi in J/m;
    ``"two_pi"`` multiplies it by 2*pi like every other caption entry.
    """
    _check_chi_reading(chi_reading)
    if name not in _PRESET_TABLE:
        raise UnknownPresetError(
            f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}"
        )
    spec = _PRESET_TABLE[name]
    return Preset(
        name=name,
        description=spec["description"],
        caption=tuple(sorted(spec["caption"].items())),
        variants=spec["variants"],
        default_variant=spec["default_variant"],
        grid=spec["grid"],
        chi_reading=chi_reading,
    )


# --- configuration files ------------------------------------------------------

_FREQ_FIELDS = {
    "omega_cavity",
    "omega_qubit",
    "omega_mech",
    "gamma_cavity",
    "gamma_qubit",
    "gamma_mech",
    "g_qubit",
    "omega_drive",
    "omega_probe",
    "big_omega",
    "epsilon",
}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    drive: DriveConfig
    variants: tuple[tuple[str, SystemParams, DriveConfig], ...] = ()

    def resolve(self, variant: str | None = None) -> tuple[SystemParams, DriveConfig]:
        if variant is None:
            return self.params, self.drive
        for label, p, d in self.variants:
            if label == variant:
                return p, d
        valid = ", ".join(label for label, _, _ in self.variants) or "(none)"
        raise ConfigError(f"config has no variant {variant!r}; valid: {valid}")


def _convert_section(section: Mapping[str, Any], angular: bool, chi_two_pi: bool) -> dict[str, float]:
    out = {}
    for key, value in section.items():
        if key not in _SYSTEM_FIELDS | _DRIVE_FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
        v = float(value)
        if (key in _FREQ_FIELDS and not angular) or (key == "chi" and chi_two_pi):
            v *= TWO_PI
        out[key] = v
    return out


def parse_config(data: Mapping[str, Any], chi_reading: str | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a nested mapping.

    Recognised top-level keys: ``angular`` (bool; when false, frequencies are
    given as f = omega/2pi in Hz), ``chi_reading`` (``literal`` or
    ``two_pi``), ``system``, ``drive`` and ``variants`` (label -> overrides).
    """
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a mapping")
    unknown = set(data) - {"angular", "chi_reading", "system", "drive", "variants"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    angular = bool(data.get("angular", True))
    reading = chi_reading or data.get("chi_reading", "literal")
    _check_chi_reading(reading)
    chi_two_pi = reading == "two_pi"

    base = _convert_section(data.get("system", {}) or {}, angular, chi_two_pi)
    base.update(_convert_section(data.get("drive", {}) or {}, angular, chi_two_pi))

    def build(values: dict[str, float]) -> tuple[SystemParams, DriveConfig]:
        values = dict(values)
        if "omega_probe" not in values and {"omega_drive", "omega_mech"} <= set(values):
            values["omega_probe"] = values["omega_drive"] + values["omega_mech"]
        if "epsilon" not in values and "big_omega" in values:
            values["epsilon"] = DEFAULT_PROBE_RATIO * values["big_omega"]
        try:
            p = SystemParams(**{k: v for k, v in values.items() if k in _SYSTEM_FIELDS})
            d = DriveConfig(**{k: v for k, v in values.items() if k in _DRIVE_FIELDS})
        except TypeError as exc:
            raise ConfigError(f"incomplete configuration: {exc}") from None
        return p, d

    params, drive = build(base)
    variants = []
    for label, overrides in (data.get("variants", {}) or {}).items():
        merged = dict(base)
        merged.update(_convert_section(overrides or {}, angular, chi_two_pi))
        variants.append((str(label), *build(merged)))
    return RunConfig(params, drive, tuple(variants))


def load_config(path: str, chi_reading: str | None = None) -> RunConfig:
    """Read a YAML configuration file (see :func:`parse_config`)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return parse_config(data or {}, chi_reading)
