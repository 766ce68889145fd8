"""Scenario configuration loader for ringqed."""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields
from typing import Optional

import yaml

from ringqed.errors import ValidationError

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "data", "scenario.json")


@dataclass
class RingConfig:
    diameter_um: float
    n_g: float
    q_factor: float


@dataclass
class InjectionStep:
    pressure_pa: float
    volume_l: float
    repeat: int = 1


def _default_rings():
    return [
        {"diameter_um": 7.3, "n_g": 3.067, "q_factor": 1188},
        {"diameter_um": 7.7, "n_g": 3.031, "q_factor": 1218},
        {"diameter_um": 8.1, "n_g": 2.996, "q_factor": 1261},
        {"diameter_um": 8.5, "n_g": 2.960, "q_factor": 1181},
        {"diameter_um": 8.9, "n_g": 2.924, "q_factor": 943},
    ]


@dataclass
class CavityConfig:
    n_eff: float = 2.30
    reference_wavelength_nm: float = 1100.0
    rings: list = field(default_factory=_default_rings)
    tuned_diameter_um: float = 8.1
    spectrum_band_nm: list = field(default_factory=lambda: [1060.0, 1140.0])
    spectrum_step_nm: float = 0.05
    envelope_center_nm: float = 1100.0     # phonon-sideband envelope seen through the ring
    envelope_width_nm: float = 60.0
    background: float = 0.1
    q_target_nm: float = 1100.0            # Q is fitted on the mode nearest this wavelength
    q_window_fwhm: float = 5.0             # half-width of the single-mode window, in linewidths
    q_points_per_fwhm: int = 20
    fsr_wavelength_nm: float = 1100.0
    coarse_sweep_um: list = field(default_factory=lambda: [7.3, 8.9])
    coarse_step_um: float = 0.005


@dataclass
class EmitterConfig:
    zpl_nm: float = 1078.6
    tau_off_ns: float = 15.85
    xi_zpl: float = 0.031
    xi_zpl_theory: float = 0.038
    tau_0_ns: float = 14.94
    f_max: float = 5.23
    eta_ratio: float = 6.0
    zpl_fwhm_nm: float = 0.5
    psb_center_nm: float = 1160.0
    psb_sigma_nm: float = 20.0
    dwf_window_nm: float = 10.0            # half-width around the ZPL
    spectrum_band_nm: list = field(default_factory=lambda: [1000.0, 1250.0])
    spectrum_step_nm: float = 0.05
    other_lines: dict = field(default_factory=lambda: {
        "PL1": [1132.0, 0.15], "PL2": [1131.0, 0.15], "PL6": [1038.0, 0.15],
    })


def _default_schedule():
    return [
        {"pressure_pa": 100.0, "volume_l": 0.05, "repeat": 3},
        {"pressure_pa": 15.0, "volume_l": 0.05, "repeat": 9},
        {"pressure_pa": 50.0, "volume_l": 0.05, "repeat": 3},
    ]


@dataclass
class TuningConfig:
    schedule: list = field(default_factory=_default_schedule)
    sensitivity_nm_per_pa_l: Optional[float] = None   # None: calibrate onto the crossing point
    saturation_shift_nm: float = 10.0
    points: dict = field(default_factory=lambda: {"A": 0, "B": 3, "C": 6, "D": 8, "E": 10, "F": 12})
    crossing_point: str = "D"
    off_point: str = "A"
    map_band_nm: list = field(default_factory=lambda: [1065.0, 1095.0])
    map_step_nm: float = 0.05
    mode_amplitude: float = 0.5


@dataclass
class DecayConfig:
    total_counts: int = 1_000_000
    n_bins: int = 500
    rep_period_ns: float = 100.0
    background_fraction: float = 0.85


@dataclass
class SpinConfig:
    d_zfs_mhz: float = 1333.75
    e_zfs_mhz: float = 18.65
    intrinsic_contrast: float = 0.10
    odmr_linewidth_mhz: float = 10.0
    contrast_sign: float = 1.0
    path_fractions: dict = field(default_factory=lambda: {
        "confocal_off": 0.32, "grating_off": 0.48, "grating_on": 0.62,
    })
    odmr_start_mhz: float = 1280.0
    odmr_stop_mhz: float = 1390.0
    odmr_step_mhz: float = 0.5
    rabi_frequency_mhz: float = 5.0
    rabi_decay_ns: float = 500.0
    rabi_max_duration_ns: float = 1000.0
    rabi_points: int = 101
    rabi_paths: list = field(default_factory=lambda: ["grating_on", "confocal_off"])
    repetitions: int = 1_000_000
    bright_rate_per_ns: float = 0.003
    readout_ns: float = 300.0


@dataclass
class NoiseConfig:
    spectrum_snr: float = 20.0
    odmr_noise: float = 0.0015


@dataclass
class ScenarioConfig:
    cavity: CavityConfig
    emitter: EmitterConfig
    tuning: TuningConfig
    decay: DecayConfig
    spin: SpinConfig
    noise: NoiseConfig
    seed: int
    workers: int = 1
    config_hash: str = ""

    @property
    def ring_configs(self) -> list[RingConfig]:
        return [RingConfig(**r) for r in self.cavity.rings]

    @property
    def injection_steps(self) -> list[InjectionStep]:
        return [InjectionStep(**s) for s in self.tuning.schedule]

    @property
    def schedule_length(self) -> int:
        return sum(step.repeat for step in self.injection_steps)


SECTIONS = {
    "cavity": CavityConfig,
    "emitter": EmitterConfig,
    "tuning": TuningConfig,
    "decay": DecayConfig,
    "spin": SpinConfig,
    "noise": NoiseConfig,
}


def _build(section: str, cls, data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError(f"config section '{section}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"unknown key(s) in '{section}': {', '.join(unknown)}")
    return cls(**data)


def _check_nested(cls, items, where: str):
    known = {f.name for f in fields(cls)}
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ValidationError(f"{where}[{i}] must be a mapping")
        unknown = sorted(set(item) - known)
        if unknown:
            raise ValidationError(f"unknown key(s) in {where}[{i}]: {', '.join(unknown)}")
        try:
            cls(**item)
        except TypeError as e:
            raise ValidationError(f"{where}[{i}]: {e}") from e


def validate(config: ScenarioConfig) -> None:
    """Cross-field checks that single sections cannot do on their own."""
    if isinstance(config.seed, bool) or not isinstance(config.seed, int) or config.seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {config.seed!r}")
    if not isinstance(config.workers, int) or config.workers < 1:
        raise ValidationError(f"workers must be a positive integer, got {config.workers!r}")

    _check_nested(RingConfig, config.cavity.rings, "cavity.rings")
    if not config.cavity.rings:
        raise ValidationError("cavity.rings must not be empty")
    diameters = [r.diameter_um for r in config.ring_configs]
    if not any(math.isclose(d, config.cavity.tuned_diameter_um) for d in diameters):
        raise ValidationError(f"tuned ring {config.cavity.tuned_diameter_um} um is not in cavity.rings")

    _check_nested(InjectionStep, config.tuning.schedule, "tuning.schedule")
    if not config.tuning.schedule:
        raise ValidationError("tuning.schedule must not be empty")
    if any(s.repeat < 1 for s in config.injection_steps):
        raise ValidationError("tuning.schedule repeat counts must be >= 1")
    n_steps = config.schedule_length
    for label, step in config.tuning.points.items():
        if not isinstance(step, int) or not 0 <= step <= n_steps:
            raise ValidationError(f"tuning point '{label}' = {step!r} is not a step in 0..{n_steps}")
    for key in ("crossing_point", "off_point"):
        label = getattr(config.tuning, key)
        if label not in config.tuning.points:
            raise ValidationError(f"tuning.{key} '{label}' is not a labelled point")

    for path in list(config.spin.path_fractions) + list(config.spin.rabi_paths):
        if path not in ("confocal_off", "grating_off", "grating_on"):
            raise ValidationError(f"unknown collection path '{path}'")
    for band in (config.cavity.spectrum_band_nm, config.emitter.spectrum_band_nm, config.tuning.map_band_nm):
        if len(band) != 2 or not band[0] < band[1]:
            raise ValidationError(f"band {band} must be [low, high] with low < high")


def config_from_dict(data: dict, config_hash: str = "") -> ScenarioConfig:
    """Build a ScenarioConfig from parsed data, with defaults for missing sections."""
    if not isinstance(data, dict):
        raise ValidationError("config must be a mapping at the top level")
    unknown = sorted(set(data) - set(SECTIONS) - {"seed", "workers"})
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(unknown)}")
    if "seed" not in data:
        raise ValidationError("config is missing 'seed'")

    try:
        config = ScenarioConfig(
            **{name: _build(name, cls, data.get(name)) for name, cls in SECTIONS.items()},
            seed=data["seed"],
            workers=data.get("workers", 1),
            config_hash=config_hash,
        )
    except TypeError as e:
        raise ValidationError(str(e)) from e
    validate(config)
    return config


def config_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def load_config(path: str = DEFAULT_CONFIG_PATH) -> ScenarioConfig:
    """Load a scenario from a .json or .yaml file."""
    with open(path, "rb") as f:
        raw = f.read()
    try:
        if path.endswith((".yaml", ".yml")):
            data = yaml.safe_load(raw) or {}
        else:
            data = json.loads(raw)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ValidationError(f"cannot parse {path}: {e}") from e
    return config_from_dict(data, config_hash=config_hash(raw))
