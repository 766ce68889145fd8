"""Purcell-modified emission of the PL4 ensemble.

Rates are in 1/ns, lifetimes in ns, wavelengths in nm.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ringqed.cavity import CavityMode
from ringqed.errors import SimulationError, ValidationError

log = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class EmitterParams:
    """Radiative channels of the emitter.

    tau_zpl and tau_psb are the channel lifetimes; tau_off and xi_zpl follow
    from them (1/tau_off = 1/tau_zpl + 1/tau_psb, xi_zpl = tau_off/tau_zpl).
    tau_0 is the lifetime measured in the unpatterned film, if known.
    """
    tau_zpl: float
    tau_psb: float
    tau_0: Optional[float] = None

    def __post_init__(self):
        if not (self.tau_zpl > 0 and self.tau_psb > 0):
            raise ValidationError(f"lifetimes must be positive, got tau_zpl={self.tau_zpl}, tau_psb={self.tau_psb}")
        if self.tau_0 is not None and not self.tau_0 > 0:
            raise ValidationError(f"tau_0 must be positive, got {self.tau_0}")

    @classmethod
    def from_off_resonance(cls, tau_off: float, xi_zpl: float, tau_0: Optional[float] = None) -> "EmitterParams":
        """Build from the measured off-resonance lifetime and ZPL branching ratio."""
        if not tau_off > 0:
            raise ValidationError(f"tau_off must be positive, got {tau_off}")
        if not 0 < xi_zpl < 1:
            raise ValidationError(f"xi_zpl must lie in (0, 1), got {xi_zpl}")
        return cls(tau_zpl=tau_off / xi_zpl, tau_psb=tau_off / (1.0 - xi_zpl), tau_0=tau_0)

    @property
    def tau_off(self) -> float:
        return 1.0 / rate_off(self)

    @property
    def xi_zpl(self) -> float:
        return self.tau_off / self.tau_zpl


class PurcellMethod(str, enum.Enum):
    LIFETIME_RATIO = "lifetime_ratio"
    REFERENCE_LIFETIME = "reference_lifetime"


@dataclass(frozen=True)
class PurcellResult:
    f: float
    method: PurcellMethod
    inputs: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class DecayTrace:
    """Time-resolved photon histogram over one laser repetition period."""
    bin_edges: np.ndarray
    counts: np.ndarray
    rep_period: float
    warnings: tuple[str, ...] = ()

    @property
    def bin_starts(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def total_counts(self) -> int:
        return int(self.counts.sum())


def rate_off(p: EmitterParams) -> float:
    """Uncoupled emission rate, 1/tau_zpl + 1/tau_psb."""
    return 1.0 / p.tau_zpl + 1.0 / p.tau_psb


def rate_on(p: EmitterParams, f: float) -> float:
    """Emission rate with the ZPL channel enhanced by Purcell factor f."""
    if not f >= 0:
        raise ValidationError(f"Purcell factor must be >= 0, got {f}")
    return (f + 1.0) / p.tau_zpl + 1.0 / p.tau_psb


def _require_positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise ValidationError(f"{name} must be positive, got {value}")


def _negative_warning(f: float) -> tuple[str, ...]:
    if f < 0:
        log.warning("Negative Purcell factor %.4f (tau_on > tau_off), likely noise", f)
        return ("negative purcell factor",)
    return ()


def purcell_from_lifetime_ratio(tau_off: float, tau_on: float, xi_zpl: float) -> PurcellResult:
    """F = (1/xi_zpl) * (tau_off/tau_on - 1)."""
    _require_positive(tau_off=tau_off, tau_on=tau_on)
    if not 0 < xi_zpl < 1:
        raise ValidationError(f"xi_zpl must lie in (0, 1), got {xi_zpl}")
    f = (tau_off / tau_on - 1.0) / xi_zpl
    return PurcellResult(
        f=f,
        method=PurcellMethod.LIFETIME_RATIO,
        inputs={"tau_off": tau_off, "tau_on": tau_on, "xi_zpl": xi_zpl},
        warnings=_negative_warning(f),
    )


def purcell_from_reference_lifetime(tau_0: float, dwf: float, tau_on: float, tau_off: float) -> PurcellResult:
    """F = (tau_0/DWF) * (1/tau_on - 1/tau_off)."""
    _require_positive(tau_0=tau_0, tau_on=tau_on, tau_off=tau_off)
    if not 0 < dwf < 1:
        raise ValidationError(f"DWF must lie in (0, 1), got {dwf}")
    f = tau_0 / dwf * (1.0 / tau_on - 1.0 / tau_off)
    return PurcellResult(
        f=f,
        method=PurcellMethod.REFERENCE_LIFETIME,
        inputs={"tau_0": tau_0, "dwf": dwf, "tau_on": tau_on, "tau_off": tau_off},
        warnings=_negative_warning(f),
    )


def dwf_from_spectrum(wavelengths_nm, intensity, zpl_window, baseline: float = 0.0) -> float:
    """Fraction of the spectrum's area inside the ZPL window.

    The flat ``baseline`` is subtracted and negative residue clipped before
    both trapezoidal integrals; window edges are interpolated.
    """
    x = np.asarray(wavelengths_nm, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValidationError("spectrum must be nonempty with matching wavelength and intensity arrays")
    if np.any(np.diff(x) <= 0):
        raise ValidationError("spectrum wavelengths must be strictly increasing")
    a, b = float(zpl_window[0]), float(zpl_window[1])
    if a < x[0] or b > x[-1]:
        raise ValidationError(f"ZPL window [{a}, {b}] outside spectrum domain [{x[0]}, {x[-1]}]")

    y = np.clip(y - baseline, 0.0, None)
    total = float(_trapezoid(y, x))
    if not total > 0:
        raise SimulationError("degenerate spectrum")
    if b <= a:
        return 0.0
    inside = (x > a) & (x < b)
    xw = np.concatenate(([a], x[inside], [b]))
    yw = np.interp(xw, x, y)
    return float(min(max(_trapezoid(yw, xw) / total, 0.0), 1.0))


def pl_spectrum(p: EmitterParams, grid_nm, zpl_nm: float, zpl_fwhm_nm: float,
                psb_center_nm: float, psb_sigma_nm: float, total_area: float = 100.0,
                other_lines: Optional[dict[str, tuple[float, float]]] = None,
                baseline: float = 0.0) -> np.ndarray:
    """Off-resonance PL: Lorentzian ZPL plus Gaussian sideband plus weak lines.

    The ZPL carries xi_zpl of ``total_area``, the sideband the rest.
    ``other_lines`` maps a label to (wavelength_nm, area); those lines share
    the ZPL width.
    """
    x = np.asarray(grid_nm, dtype=float)
    hwhm = zpl_fwhm_nm / 2.0

    def lorentz(center, area):
        return area * hwhm / math.pi / ((x - center) ** 2 + hwhm ** 2)

    xi = p.xi_zpl
    spectrum = lorentz(zpl_nm, xi * total_area)
    spectrum += ((1.0 - xi) * total_area / (psb_sigma_nm * math.sqrt(2 * math.pi))
                 * np.exp(-0.5 * ((x - psb_center_nm) / psb_sigma_nm) ** 2))
    for wavelength, area in (other_lines or {}).values():
        spectrum += lorentz(wavelength, area)
    return spectrum + baseline


def purcell_vs_detuning(f_max: float, mode: CavityMode, delta_nm: float) -> float:
    """Purcell factor filtered by the cavity Lorentzian at detuning delta."""
    if not f_max >= 0:
        raise ValidationError(f"f_max must be >= 0, got {f_max}")
    return f_max / (1.0 + (2.0 * delta_nm / mode.tuned_linewidth_nm) ** 2)


def zpl_output_enhancement(f: float, eta_ratio: float) -> float:
    """On/off ZPL intensity ratio at the output grating, (F + 1) * eta_ratio."""
    if not f >= 0:
        raise ValidationError(f"Purcell factor must be >= 0, got {f}")
    if not eta_ratio > 0:
        raise ValidationError(f"eta_ratio must be positive, got {eta_ratio}")
    return (f + 1.0) * eta_ratio


def enhancement_vs_detuning(f_max: float, eta_ratio: float, mode: CavityMode, delta_nm: float) -> float:
    """Grating-path ZPL enhancement at detuning delta.

    Both the Purcell factor and the waveguide redirection gain follow the
    cavity Lorentzian, so far off resonance the ratio tends to 1.
    """
    lorentz = 1.0 / (1.0 + (2.0 * delta_nm / mode.tuned_linewidth_nm) ** 2)
    eta = 1.0 + (eta_ratio - 1.0) * lorentz
    return zpl_output_enhancement(purcell_vs_detuning(f_max, mode, delta_nm), eta)


def simulate_decay_trace(p: EmitterParams, f: float, total_counts: int, n_bins: int,
                         rep_period: float, seed: int, background_fraction: float = 0.0) -> DecayTrace:
    """Photon arrival histogram for lifetime 1/rate_on(p, f).

    Arrivals are exponential, wrapped modulo the repetition period, mixed
    with a flat background; deterministic for a given seed.
    """
    if not total_counts > 0:
        raise ValidationError(f"total_counts must be positive, got {total_counts}")
    if not n_bins >= 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    if not rep_period > 0:
        raise ValidationError(f"rep_period must be positive, got {rep_period}")
    if not 0 <= background_fraction <= 1:
        raise ValidationError(f"background_fraction must lie in [0, 1], got {background_fraction}")

    tau = 1.0 / rate_on(p, f)
    warnings = ()
    if tau >= rep_period / 2:
        log.warning("Lifetime %.2f ns >= half the repetition period %.2f ns", tau, rep_period)
        warnings = ("pile-up regime",)

    rng = np.random.default_rng(seed)
    n_background = int(rng.binomial(int(total_counts), background_fraction))
    signal = np.mod(rng.exponential(tau, int(total_counts) - n_background), rep_period)
    background = rng.uniform(0.0, rep_period, n_background)
    edges = np.linspace(0.0, rep_period, int(n_bins) + 1)
    counts, _ = np.histogram(np.concatenate((signal, background)), bins=edges)
    return DecayTrace(bin_edges=edges, counts=counts.astype(np.int64), rep_period=float(rep_period),
                      warnings=warnings)
