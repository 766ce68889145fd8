"""Parametric micro-ring resonator model.

Mode positions follow the ring condition m * lambda_m = pi * d * n_eff(lambda_m)
with a linear effective-index dispersion. Units: diameters in um,
wavelengths in nm, pressures in Pa, volumes in L.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from ringqed.errors import SimulationError, ValidationError

log = logging.getLogger(__name__)

DISPERSION_TOL_NM = 1e-6
DISPERSION_MAX_ITER = 100
DEFAULT_SATURATION_NM = 10.0
DEFAULT_REFERENCE_NM = 1100.0
MAX_ORDERS = 100_000


@dataclass(frozen=True)
class RingGeometry:
    """Ring diameter plus a linear effective-index dispersion.

    n_eff is the effective index at ``reference_wavelength_nm``; the slope is
    stored implicitly through the group index, dn_eff/dlambda =
    (n_eff - n_g) / lambda_ref. Leaving ``n_g`` unset means no dispersion.
    """
    diameter_um: float
    n_eff: float
    n_g: Optional[float] = None
    reference_wavelength_nm: float = DEFAULT_REFERENCE_NM

    def __post_init__(self):
        if self.n_g is None:
            object.__setattr__(self, "n_g", float(self.n_eff))
        if not self.diameter_um > 0:
            raise ValidationError(f"diameter must be positive, got {self.diameter_um}")
        if not self.n_eff >= 1:
            raise ValidationError(f"n_eff must be >= 1, got {self.n_eff}")
        if self.n_g < self.n_eff - 1e-12:
            raise ValidationError(f"n_g ({self.n_g}) must not be below n_eff ({self.n_eff})")
        if not self.reference_wavelength_nm > 0:
            raise ValidationError("reference wavelength must be positive")

    @property
    def circumference_nm(self) -> float:
        return math.pi * self.diameter_um * 1e3

    @property
    def dispersion_slope(self) -> float:
        """dn_eff/dlambda in 1/nm."""
        return (self.n_eff - self.n_g) / self.reference_wavelength_nm

    def effective_index(self, wavelength_nm: float) -> float:
        return self.n_eff + self.dispersion_slope * (wavelength_nm - self.reference_wavelength_nm)

    def group_index(self, wavelength_nm: float) -> float:
        # Constant for a linear dispersion: n_eff(l) - l * slope.
        return self.effective_index(wavelength_nm) - wavelength_nm * self.dispersion_slope


@dataclass(frozen=True)
class CavityMode:
    azimuthal_order: int
    center_wavelength_nm: float
    q_factor: float
    tuning_offset_nm: float = 0.0

    def __post_init__(self):
        if self.azimuthal_order < 1:
            raise ValidationError(f"azimuthal order must be positive, got {self.azimuthal_order}")
        if not self.q_factor > 0:
            raise ValidationError(f"Q must be positive, got {self.q_factor}")
        if not self.center_wavelength_nm > 0:
            raise ValidationError("center wavelength must be positive")
        if self.tuning_offset_nm < 0:
            raise ValidationError("tuning offset must be >= 0 (condensation only redshifts)")

    @property
    def linewidth_nm(self) -> float:
        """FWHM of the untuned mode."""
        return self.center_wavelength_nm / self.q_factor

    @property
    def resonance_nm(self) -> float:
        """Center wavelength including the accumulated tuning offset."""
        return self.center_wavelength_nm + self.tuning_offset_nm

    @property
    def tuned_linewidth_nm(self) -> float:
        return self.resonance_nm / self.q_factor


@dataclass(frozen=True)
class Injection:
    pressure_pa: float
    volume_l: float

    @property
    def dose(self) -> float:
        return self.pressure_pa * self.volume_l


@dataclass(frozen=True)
class TuningState:
    """Gas-condensation tuning: a shift linear in injected P*V, capped."""
    sensitivity_nm_per_pa_l: float
    saturation_shift_nm: float = DEFAULT_SATURATION_NM
    injections: tuple[Injection, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.sensitivity_nm_per_pa_l < 0:
            raise ValidationError("tuning sensitivity must be >= 0")
        if self.saturation_shift_nm < 0:
            raise ValidationError("saturation shift must be >= 0")

    @property
    def total_dose(self) -> float:
        return sum(inj.dose for inj in self.injections)

    @property
    def shift_nm(self) -> float:
        return min(self.sensitivity_nm_per_pa_l * self.total_dose, self.saturation_shift_nm)


def _resonance_for_order(geom: RingGeometry, m: int) -> float:
    lam = geom.circumference_nm * geom.n_eff / m
    for _ in range(DISPERSION_MAX_ITER):
        new = geom.circumference_nm * geom.effective_index(lam) / m
        if not math.isfinite(new) or new <= 0:
            break
        if abs(new - lam) < DISPERSION_TOL_NM:
            return new
        lam = new
    raise SimulationError("dispersion iteration diverged")


def resonance_wavelengths(geom: RingGeometry, band: Sequence[float],
                          q_factor: float = 1000.0) -> list[CavityMode]:
    """Return every mode whose resonance lies inside ``band``, ascending.

    Each order is solved self-consistently with the dispersion by
    fixed-point iteration. A band with no modes gives an empty list.
    """
    lam_min, lam_max = float(band[0]), float(band[1])
    if not lam_min > 0:
        raise ValidationError(f"band lower edge must be positive, got {lam_min}")
    if lam_max < lam_min:
        raise ValidationError(f"empty band [{lam_min}, {lam_max}]")

    n_edges = (geom.effective_index(lam_min), geom.effective_index(lam_max))
    n_lo, n_hi = min(n_edges), max(n_edges)
    c = geom.circumference_nm
    m_lo = max(1, math.floor(c * max(n_lo, 0.0) / lam_max) - 1)
    m_hi = math.ceil(c * max(n_hi, 0.0) / lam_min) + 1
    if m_hi - m_lo > MAX_ORDERS:
        raise ValidationError("band spans too many azimuthal orders")

    modes = []
    for m in range(m_lo, m_hi + 1):
        lam = _resonance_for_order(geom, m)
        if lam_min - DISPERSION_TOL_NM <= lam <= lam_max + DISPERSION_TOL_NM:
            modes.append(CavityMode(azimuthal_order=m, center_wavelength_nm=lam, q_factor=q_factor))
    modes.sort(key=lambda mode: mode.center_wavelength_nm)
    log.debug("d=%.3f um: %d modes in [%.1f, %.1f] nm", geom.diameter_um, len(modes), lam_min, lam_max)
    return modes


def free_spectral_range(geom: RingGeometry, wavelength_nm: float) -> float:
    """FSR = lambda^2 / (pi * d * n_g), in nm."""
    if not wavelength_nm > 0:
        raise ValidationError(f"wavelength must be positive, got {wavelength_nm}")
    return wavelength_nm ** 2 / (geom.circumference_nm * geom.n_g)


def fit_group_index(pairs: Iterable[tuple[float, float]], wavelength_nm: float) -> float:
    """Single n_g reproducing several (diameter_um, FSR_nm) pairs.

    Minimizes the summed squared relative FSR error, which has the closed
    form 1/n_g = sum(a) / sum(a^2) with a_i the per-pair group index.
    """
    a = np.array([wavelength_nm ** 2 / (math.pi * d * 1e3 * fsr) for d, fsr in pairs])
    if a.size == 0:
        raise ValidationError("need at least one (diameter, FSR) pair")
    return float(np.sum(a ** 2) / np.sum(a))


def coarse_tuning_sweep(geometries: Iterable[RingGeometry], target_nm: float,
                        q_factor: float = 1000.0) -> list[CavityMode]:
    """Mode nearest ``target_nm`` for each geometry, in input order."""
    nearest = []
    for geom in geometries:
        fsr = free_spectral_range(geom, target_nm)
        modes = resonance_wavelengths(geom, (target_nm - fsr, target_nm + fsr), q_factor)
        if not modes:
            raise SimulationError(f"no mode within one FSR of {target_nm} nm for d={geom.diameter_um} um")
        nearest.append(min(modes, key=lambda mode: abs(mode.center_wavelength_nm - target_nm)))
    return nearest


def mode_lineshape(mode: CavityMode, grid_nm) -> np.ndarray:
    """Unit-peak Lorentzian of the (tuned) mode sampled on ``grid_nm``."""
    grid = np.asarray(grid_nm, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) < 0):
        raise ValidationError("wavelength grid must be sorted")
    u = 2.0 * (grid - mode.resonance_nm) / mode.tuned_linewidth_nm
    return 1.0 / (1.0 + u ** 2)


def multimode_spectrum(geom: RingGeometry, grid_nm, q_factor: float,
                       envelope_center_nm: float, envelope_width_nm: float,
                       peak_amplitude: float = 1.0,
                       background: float = 0.0) -> tuple[np.ndarray, list[CavityMode]]:
    """Phonon-sideband emission filtered by the ring, as seen at the grating.

    Modes inside the grid (padded by a few linewidths) are weighted by a
    Gaussian emission envelope and sit on a flat background.
    """
    grid = np.asarray(grid_nm, dtype=float)
    pad = 5 * grid[-1] / q_factor
    modes = resonance_wavelengths(geom, (max(grid[0] - pad, 1e-9), grid[-1] + pad), q_factor)
    spectrum = np.full_like(grid, background)
    for mode in modes:
        weight = math.exp(-0.5 * ((mode.center_wavelength_nm - envelope_center_nm) / envelope_width_nm) ** 2)
        spectrum += peak_amplitude * weight * mode_lineshape(mode, grid)
    in_band = [m for m in modes if grid[0] <= m.center_wavelength_nm <= grid[-1]]
    return spectrum, in_band


def apply_injection(state: TuningState, mode: CavityMode, pressure_pa: float,
                    volume_l: float) -> tuple[TuningState, CavityMode]:
    """Inject one gas dose; the mode redshifts by min(alpha*P*V, headroom)."""
    if not (pressure_pa >= 0 and volume_l >= 0):
        raise ValidationError(f"pressure and volume must be >= 0, got P={pressure_pa}, V={volume_l}")
    new_state = replace(state, injections=state.injections + (Injection(float(pressure_pa), float(volume_l)),))
    increment = new_state.shift_nm - state.shift_nm
    return new_state, replace(mode, tuning_offset_nm=mode.tuning_offset_nm + increment)


def reset_tuning(state: TuningState, mode: CavityMode) -> tuple[TuningState, CavityMode]:
    """Warm-up: clear the injection log and return the mode to its untuned position."""
    return replace(state, injections=()), replace(mode, tuning_offset_nm=0.0)


def replay_schedule(state: TuningState, mode: CavityMode,
                    schedule: Iterable[Injection]) -> list[CavityMode]:
    """Apply a schedule; returns the mode after 0, 1, ..., n injections."""
    modes = [mode]
    for inj in schedule:
        state, mode = apply_injection(state, mode, inj.pressure_pa, inj.volume_l)
        modes.append(mode)
    return modes


def calibrate_sensitivity(schedule: Sequence[Injection], initial_detuning_nm: float,
                          crossing_step: int,
                          saturation_shift_nm: float = DEFAULT_SATURATION_NM) -> float:
    """Sensitivity that brings the mode onto the target after ``crossing_step`` injections."""
    if not 1 <= crossing_step <= len(schedule):
        raise ValidationError(f"crossing step {crossing_step} outside 1..{len(schedule)}")
    if initial_detuning_nm >= 0:
        raise ValidationError("mode must start blue of the target to be tuned onto it")
    if -initial_detuning_nm > saturation_shift_nm:
        raise ValidationError(
            f"crossing needs {-initial_detuning_nm:.3f} nm, beyond the {saturation_shift_nm} nm saturation")
    dose = sum(inj.dose for inj in schedule[:crossing_step])
    if dose <= 0:
        raise ValidationError("no gas injected before the crossing step")
    return -initial_detuning_nm / dose


def detuning(mode: CavityMode, target_nm: float) -> float:
    """Signed offset of the tuned mode from the target wavelength (nm)."""
    return mode.resonance_nm - target_nm
