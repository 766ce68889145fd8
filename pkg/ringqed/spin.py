"""PL4 spin-1 physics at zero magnetic field.

Frequencies in MHz, times in ns. H = D*Sz^2 + E*(Sx^2 - Sy^2) gives the two
zero-field transitions at D - E and D + E.
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from ringqed.errors import ValidationError
from ringqed.rng import task_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpinParams:
    d_zfs: float
    e_zfs: float
    intrinsic_contrast: float
    odmr_linewidth: float

    def __post_init__(self):
        if not self.d_zfs > self.e_zfs >= 0:
            raise ValidationError(f"need D > E >= 0, got D={self.d_zfs}, E={self.e_zfs}")
        if not 0 < self.intrinsic_contrast < 1:
            raise ValidationError(f"intrinsic contrast must lie in (0, 1), got {self.intrinsic_contrast}")
        if not self.odmr_linewidth > 0:
            raise ValidationError(f"ODMR linewidth must be positive, got {self.odmr_linewidth}")


class CollectionPath(str, enum.Enum):
    CONFOCAL_OFF = "confocal_off"
    GRATING_OFF = "grating_off"
    GRATING_ON = "grating_on"


@dataclass(frozen=True, eq=False)
class OdmrDataset:
    freq_mhz: np.ndarray
    contrast: np.ndarray
    collection_path: CollectionPath

    def __post_init__(self):
        if self.freq_mhz.size > 1 and np.any(np.diff(self.freq_mhz) <= 0):
            raise ValidationError("ODMR frequency grid must be strictly increasing")


class ZeroFieldSplitting(NamedTuple):
    d: float
    e: float
    swapped: bool = False


class SegmentKind(str, enum.Enum):
    LASER = "laser"
    MICROWAVE = "microwave"
    WAIT = "wait"
    READOUT = "readout"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    duration_ns: float
    mw_frequency_mhz: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        if not self.duration_ns > 0:
            raise ValidationError(f"{self.kind.value} segment duration must be positive, got {self.duration_ns}")
        if self.kind is SegmentKind.MICROWAVE and self.mw_frequency_mhz is None:
            raise ValidationError("microwave segment needs a frequency")


@dataclass(frozen=True)
class PulseSequence:
    """One repetition of a laser/microwave/readout sequence."""
    segments: tuple[Segment, ...]

    def __post_init__(self):
        readouts = sum(1 for s in self.segments if s.kind is SegmentKind.READOUT)
        if readouts == 0:
            raise ValidationError("pulse sequence is missing a readout segment")
        if readouts > 1:
            raise ValidationError(f"pulse sequence has {readouts} readout segments, expected one")

    @classmethod
    def rabi(cls, mw_frequency_mhz: float, mw_duration_ns: float = 100.0, init_ns: float = 3000.0,
             wait_ns: float = 1000.0, readout_ns: float = 300.0) -> "PulseSequence":
        """Laser init, wait, microwave pulse, laser readout."""
        return cls((
            Segment(SegmentKind.LASER, init_ns),
            Segment(SegmentKind.WAIT, wait_ns),
            Segment(SegmentKind.MICROWAVE, mw_duration_ns, mw_frequency_mhz),
            Segment(SegmentKind.READOUT, readout_ns),
        ))

    @property
    def readout(self) -> Segment:
        return next(s for s in self.segments if s.kind is SegmentKind.READOUT)

    @property
    def microwave(self) -> Segment:
        for s in self.segments:
            if s.kind is SegmentKind.MICROWAVE:
                return s
        raise ValidationError("pulse sequence has no microwave segment to sweep")

    def to_list(self) -> list[dict]:
        out = []
        for s in self.segments:
            item = {"kind": s.kind.value, "duration_ns": s.duration_ns}
            if s.mw_frequency_mhz is not None:
                item["mw_frequency_mhz"] = s.mw_frequency_mhz
            out.append(item)
        return out

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> "PulseSequence":
        return cls(tuple(Segment(**item) for item in items))


@dataclass(frozen=True)
class ReadoutRates:
    """Bright-state photon rate during readout, counts per ns per repetition."""
    bright_rate_per_ns: float

    def __post_init__(self):
        if not self.bright_rate_per_ns > 0:
            raise ValidationError("bright rate must be positive")


@dataclass(frozen=True)
class DriveParams:
    rabi_frequency_mhz: float
    decay_time_ns: float
    photon_fraction: float = 1.0

    def __post_init__(self):
        if not self.rabi_frequency_mhz > 0:
            raise ValidationError(f"Rabi frequency must be positive, got {self.rabi_frequency_mhz}")
        if not self.decay_time_ns > 0:
            raise ValidationError(f"decay time must be positive, got {self.decay_time_ns}")
        _validate_fraction("photon_fraction", self.photon_fraction)


@dataclass(frozen=True, eq=False)
class SweepCounts:
    parameter: str
    values: np.ndarray
    counts: np.ndarray
    expected: np.ndarray


def zero_field_transitions(p: SpinParams) -> tuple[float, float]:
    return p.d_zfs - p.e_zfs, p.d_zfs + p.e_zfs


def d_e_from_transitions(f1: float, f2: float) -> ZeroFieldSplitting:
    """Invert the transition pair into (D, E); an inverted pair is swapped and flagged."""
    swapped = f2 < f1
    if swapped:
        log.warning("Transition frequencies given high-first (%.3f, %.3f); swapping", f1, f2)
        f1, f2 = f2, f1
    if not f1 > 0:
        raise ValidationError(f"transition frequencies must be positive, got {f1}")
    return ZeroFieldSplitting(d=(f1 + f2) / 2.0, e=(f2 - f1) / 2.0, swapped=swapped)


def _unit_lorentzian(freq, center, fwhm):
    return 1.0 / (1.0 + (2.0 * (freq - center) / fwhm) ** 2)


def _validate_fraction(name: str, value: float):
    if not 0 < value <= 1:
        raise ValidationError(f"{name} must lie in (0, 1], got {value}")


def odmr_spectrum(p: SpinParams, photon_fraction: float, grid_mhz,
                  collection_path: CollectionPath = CollectionPath.GRATING_ON,
                  sign: float = 1.0) -> OdmrDataset:
    """Two equal Lorentzian peaks at D -/+ E scaled by the diluted contrast."""
    _validate_fraction("photon_fraction", photon_fraction)
    freq = np.asarray(grid_mhz, dtype=float)
    f_low, f_high = zero_field_transitions(p)
    w = p.odmr_linewidth
    shape = _unit_lorentzian(freq, f_low, w) + _unit_lorentzian(freq, f_high, w)
    contrast = sign * photon_fraction * p.intrinsic_contrast * shape
    return OdmrDataset(freq_mhz=freq, contrast=contrast, collection_path=CollectionPath(collection_path))


def contrast_dilution(intrinsic: float, path_fraction: float) -> float:
    """Observed contrast when only ``path_fraction`` of collected photons are PL4."""
    _validate_fraction("intrinsic contrast", intrinsic)
    _validate_fraction("path_fraction", path_fraction)
    return intrinsic * path_fraction


def observed_contrasts(intrinsic: float, path_fractions: Mapping[str, float]) -> dict[str, float]:
    return {path: contrast_dilution(intrinsic, frac) for path, frac in path_fractions.items()}


def rabi_trace(omega_mhz: float, contrast: float, decay_time_ns: float, t_ns) -> np.ndarray:
    """S(t) = 1 - (C/2)(1 - cos(2*pi*omega*t)) exp(-t/T); omega in MHz, t in ns."""
    if not omega_mhz > 0:
        raise ValidationError(f"Rabi frequency must be positive, got {omega_mhz}")
    if not decay_time_ns > 0:
        raise ValidationError(f"decay time must be positive, got {decay_time_ns}")
    t = np.asarray(t_ns, dtype=float)
    phase = 2.0 * math.pi * omega_mhz * 1e-3 * t
    return 1.0 - 0.5 * contrast * (1.0 - np.cos(phase)) * np.exp(-t / decay_time_ns)


def _drive_weight(p: SpinParams, mw_frequency_mhz: float) -> float:
    f_low, f_high = zero_field_transitions(p)
    return max(_unit_lorentzian(mw_frequency_mhz, f_low, p.odmr_linewidth),
               _unit_lorentzian(mw_frequency_mhz, f_high, p.odmr_linewidth))


def simulate_pulse_sequence(seq: PulseSequence, p: SpinParams, rates: ReadoutRates,
                            drive: DriveParams, sweep_values: Sequence[float],
                            repetitions: int, seed: int, parameter: str = "duration",
                            sign: float = 1.0, workers: int = 1) -> SweepCounts:
    """Poisson readout counts for each sweep point.

    ``parameter`` selects what the microwave segment sweeps: "duration"
    (Rabi, signal from rabi_trace) or "frequency" (pulsed ODMR, signal from
    odmr_spectrum). Each point draws from its own (seed, index) stream, so
    the result does not depend on ``workers``.
    """
    if not repetitions > 0:
        raise ValidationError(f"repetitions must be positive, got {repetitions}")
    if parameter not in ("duration", "frequency"):
        raise ValidationError(f"unknown sweep parameter '{parameter}'")
    mw = seq.microwave
    values = np.asarray(sweep_values, dtype=float)
    if np.any(values < 0):
        raise ValidationError("sweep values must be >= 0")
    observed = contrast_dilution(p.intrinsic_contrast, drive.photon_fraction)

    if parameter == "duration":
        signal = rabi_trace(drive.rabi_frequency_mhz, observed * _drive_weight(p, mw.mw_frequency_mhz),
                            drive.decay_time_ns, values)
    else:
        signal = 1.0 + odmr_spectrum(p, drive.photon_fraction, values, sign=sign).contrast

    expected = rates.bright_rate_per_ns * seq.readout.duration_ns * repetitions * signal

    def sample(i):
        return task_rng(seed, "sweep", i).poisson(expected[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(sample, range(values.size)))
    else:
        counts = [sample(i) for i in range(values.size)]
    return SweepCounts(parameter=parameter, values=values, counts=np.asarray(counts, dtype=np.int64),
                       expected=expected)
