"""Scenario orchestration: synthetic experiments, their analysis, and the report.

Stages run in a fixed order (cavity, tuning, lifetimes, spectrum, spin).
Independent tasks inside a stage may fan out over threads; each draws from
its own (seed, task) stream so the report bytes do not depend on ``workers``.
"""

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ringqed import __version__
from ringqed.cavity import (
    CavityMode,
    Injection,
    RingGeometry,
    TuningState,
    calibrate_sensitivity,
    coarse_tuning_sweep,
    detuning,
    fit_group_index,
    free_spectral_range,
    mode_lineshape,
    multimode_spectrum,
    replay_schedule,
    resonance_wavelengths,
)
from ringqed.config import RingConfig, ScenarioConfig
from ringqed.emitter import (
    DecayTrace,
    EmitterParams,
    dwf_from_spectrum,
    enhancement_vs_detuning,
    pl_spectrum,
    purcell_from_lifetime_ratio,
    purcell_from_reference_lifetime,
    purcell_vs_detuning,
    simulate_decay_trace,
    zpl_output_enhancement,
)
from ringqed.errors import SimulationError, StageError
from ringqed.fitting import (
    FitResult,
    Measurement,
    extract_fsr,
    extract_odmr_peaks,
    extract_q,
    fit,
    poisson_weights,
)
from ringqed.io import (
    DECAY_COLUMNS,
    ODMR_COLUMNS,
    RABI_COLUMNS,
    SPECTRUM_COLUMNS,
    write_columns,
    write_json,
    write_matrix,
)
from ringqed.models import damped_cosine, exp_decay, lorentzian, multi_lorentzian
from ringqed.report import Report
from ringqed.rng import derive_seed, task_rng
from ringqed.spin import (
    CollectionPath,
    DriveParams,
    OdmrDataset,
    PulseSequence,
    ReadoutRates,
    SpinParams,
    SweepCounts,
    d_e_from_transitions,
    observed_contrasts,
    odmr_spectrum,
    simulate_pulse_sequence,
    zero_field_transitions,
)

log = logging.getLogger(__name__)

STAGES = ("cavity", "tuning", "lifetimes", "spectrum", "spin")


class StageLog:
    """Structured begin/end records per stage, kept apart from the report."""

    def __init__(self, seed: int, config_hash: str):
        self._seed = seed
        self._config_hash = config_hash
        self._start = time.monotonic()
        self.records: list[dict] = []

    def begin(self, stage: str) -> None:
        self._append(stage, "begin")

    def end(self, stage: str, **extra) -> None:
        self._append(stage, "end", extra)

    def fail(self, stage: str, error: Exception) -> None:
        self._append(stage, "error", {"error": f"{type(error).__name__}: {error}"})

    def _append(self, stage: str, status: str, extra: Optional[dict] = None) -> None:
        record = {
            "stage": stage,
            "status": status,
            "seed": self._seed,
            "config_hash": self._config_hash,
            "elapsed_s": round(time.monotonic() - self._start, 6),
        }
        if extra:
            record["extra"] = extra
        self.records.append(record)
        log.info("stage %s %s", stage, status)

    def write(self, path: str) -> None:
        with open(path, "w") as f:
            for record in self.records:
                f.write(json.dumps(record, sort_keys=True) + "\n")


def _fan_out(fn: Callable, items, workers: int) -> list:
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def ring_label(diameter_um: float) -> str:
    return f"d{diameter_um:g}um"


def ring_geometry(config: ScenarioConfig, ring: RingConfig) -> RingGeometry:
    return RingGeometry(
        diameter_um=ring.diameter_um,
        n_eff=config.cavity.n_eff,
        n_g=ring.n_g,
        reference_wavelength_nm=config.cavity.reference_wavelength_nm,
    )


def find_ring(config: ScenarioConfig, diameter_um: float) -> RingConfig:
    for ring in config.ring_configs:
        if math.isclose(ring.diameter_um, diameter_um):
            return ring
    raise SimulationError(f"no ring with diameter {diameter_um} um in the scenario")


# -- Generators --

def simulate_ring_spectrum(config: ScenarioConfig, ring: RingConfig) -> tuple[np.ndarray, np.ndarray, list]:
    """Noisy cavity-filtered sideband spectrum of one ring over the FSR band."""
    c = config.cavity
    grid = _grid(c.spectrum_band_nm[0], c.spectrum_band_nm[1], c.spectrum_step_nm)
    clean, modes = multimode_spectrum(
        ring_geometry(config, ring), grid, ring.q_factor,
        c.envelope_center_nm, c.envelope_width_nm, peak_amplitude=1.0, background=c.background,
    )
    rng = task_rng(config.seed, "spectrum", ring_label(ring.diameter_um))
    return grid, clean + rng.normal(0.0, 1.0 / config.noise.spectrum_snr, grid.size), modes


def simulate_mode_window(config: ScenarioConfig, ring: RingConfig) -> tuple[np.ndarray, np.ndarray, CavityMode]:
    """Noisy single-mode transmission window around the mode nearest q_target_nm."""
    c = config.cavity
    mode = coarse_tuning_sweep([ring_geometry(config, ring)], c.q_target_nm, ring.q_factor)[0]
    half = c.q_window_fwhm * mode.linewidth_nm
    n_points = int(round(2 * c.q_window_fwhm * c.q_points_per_fwhm)) + 1
    grid = np.linspace(mode.center_wavelength_nm - half, mode.center_wavelength_nm + half, n_points)
    rng = task_rng(config.seed, "mode", ring_label(ring.diameter_um))
    return grid, mode_lineshape(mode, grid) + rng.normal(0.0, 1.0 / config.noise.spectrum_snr, n_points), mode


def emitter_params(config: ScenarioConfig) -> EmitterParams:
    e = config.emitter
    return EmitterParams.from_off_resonance(e.tau_off_ns, e.xi_zpl, e.tau_0_ns)


def simulate_decay(config: ScenarioConfig, purcell: float, task: str,
                   params: Optional[EmitterParams] = None) -> DecayTrace:
    d = config.decay
    return simulate_decay_trace(
        params or emitter_params(config), purcell, d.total_counts, d.n_bins, d.rep_period_ns,
        seed=derive_seed(config.seed, "decay", task), background_fraction=d.background_fraction,
    )


def spin_params(config: ScenarioConfig) -> SpinParams:
    s = config.spin
    return SpinParams(s.d_zfs_mhz, s.e_zfs_mhz, s.intrinsic_contrast, s.odmr_linewidth_mhz)


def simulate_odmr(config: ScenarioConfig, path: str) -> OdmrDataset:
    s = config.spin
    grid = _grid(s.odmr_start_mhz, s.odmr_stop_mhz, s.odmr_step_mhz)
    clean = odmr_spectrum(spin_params(config), s.path_fractions[path], grid, path, sign=s.contrast_sign)
    rng = task_rng(config.seed, "odmr", path)
    return OdmrDataset(
        freq_mhz=clean.freq_mhz,
        contrast=clean.contrast + rng.normal(0.0, config.noise.odmr_noise, grid.size),
        collection_path=clean.collection_path,
    )


def rabi_sequence(config: ScenarioConfig) -> PulseSequence:
    """Init, swept MW pulse on the lower transition, readout."""
    f_low, _ = zero_field_transitions(spin_params(config))
    return PulseSequence.rabi(mw_frequency_mhz=f_low, readout_ns=config.spin.readout_ns)


def simulate_rabi(config: ScenarioConfig, path: str, workers: int = 1) -> SweepCounts:
    s = config.spin
    p = spin_params(config)
    seq = rabi_sequence(config)
    durations = np.linspace(0.0, s.rabi_max_duration_ns, s.rabi_points)
    drive = DriveParams(s.rabi_frequency_mhz, s.rabi_decay_ns, photon_fraction=s.path_fractions[path])
    return simulate_pulse_sequence(
        seq, p, ReadoutRates(s.bright_rate_per_ns), drive, durations, s.repetitions,
        seed=derive_seed(config.seed, "rabi", path), workers=workers,
    )


# -- Tuning map --

@dataclass(frozen=True, eq=False)
class TuningMap:
    """Intensity versus wavelength after each injection (row k = k injections)."""
    wavelengths_nm: np.ndarray
    intensity: np.ndarray
    zpl_intensity: np.ndarray
    modes: tuple[CavityMode, ...]
    detunings_nm: np.ndarray
    points: dict = field(default_factory=dict)
    sensitivity_nm_per_pa_l: float = 0.0
    collection: str = "grating"

    @property
    def peak_step(self) -> int:
        return int(np.unravel_index(np.argmax(self.intensity), self.intensity.shape)[0])

    @property
    def enhancement_step(self) -> int:
        return int(np.argmax(self.zpl_intensity))

    def on_off_ratio(self, on_label: str, off_label: str) -> float:
        return float(self.zpl_intensity[self.points[on_label]] / self.zpl_intensity[self.points[off_label]])


def expand_schedule(config: ScenarioConfig) -> list[Injection]:
    return [Injection(s.pressure_pa, s.volume_l) for s in config.injection_steps for _ in range(s.repeat)]


def tuned_mode(config: ScenarioConfig) -> CavityMode:
    """Mode of the tuned ring nearest the ZPL on its blue side."""
    ring = find_ring(config, config.cavity.tuned_diameter_um)
    geom = ring_geometry(config, ring)
    zpl = config.emitter.zpl_nm
    modes = resonance_wavelengths(geom, (zpl - free_spectral_range(geom, zpl), zpl), ring.q_factor)
    if not modes:
        raise SimulationError(f"no mode of the {ring.diameter_um} um ring within one FSR blue of {zpl} nm")
    return modes[-1]


def generate_tuning_map(config: ScenarioConfig, collection: str = "grating") -> TuningMap:
    """Replay the injection schedule and build the intensity map.

    Grating rows hold the redshifting mode plus the ZPL line scaled by the
    output enhancement at the current detuning; confocal rows see the ZPL
    unchanged.
    """
    if collection not in ("grating", "confocal"):
        raise ValueError(f"unknown collection '{collection}'")
    t = config.tuning
    e = config.emitter
    schedule = expand_schedule(config)
    mode = tuned_mode(config)
    sensitivity = t.sensitivity_nm_per_pa_l
    if sensitivity is None:
        sensitivity = calibrate_sensitivity(
            schedule, detuning(mode, e.zpl_nm), t.points[t.crossing_point], t.saturation_shift_nm)
    modes = replay_schedule(TuningState(sensitivity, t.saturation_shift_nm), mode, schedule)

    grid = _grid(t.map_band_nm[0], t.map_band_nm[1], t.map_step_nm)
    zpl_line = 1.0 / (1.0 + (2.0 * (grid - e.zpl_nm) / e.zpl_fwhm_nm) ** 2)
    deltas = np.array([detuning(m, e.zpl_nm) for m in modes])
    rows = []
    zpl = []
    for m, delta in zip(modes, deltas):
        if collection == "grating":
            factor = enhancement_vs_detuning(e.f_max, e.eta_ratio, m, delta)
            rows.append(factor * zpl_line + t.mode_amplitude * mode_lineshape(m, grid))
        else:
            factor = 1.0
            rows.append(zpl_line.copy())
        zpl.append(factor)
    log.debug("tuning map (%s): %d rows, sensitivity %.4g nm/(Pa L)", collection, len(rows), sensitivity)
    return TuningMap(
        wavelengths_nm=grid,
        intensity=np.vstack(rows),
        zpl_intensity=np.array(zpl),
        modes=tuple(modes),
        detunings_nm=deltas,
        points=dict(t.points),
        sensitivity_nm_per_pa_l=float(sensitivity),
        collection=collection,
    )


# -- Analysis helpers --

def fit_decay(trace: DecayTrace) -> FitResult:
    return fit(exp_decay(), trace.bin_starts, trace.counts, weights=poisson_weights(trace.counts))


def _ratio_sigma(result, sigmas: dict) -> float:
    """First-order uncertainty of a lifetime-ratio Purcell factor."""
    i = result.inputs
    r = i["tau_off"] / i["tau_on"]
    rel = math.hypot(sigmas["tau_off"] / i["tau_off"], sigmas["tau_on"] / i["tau_on"])
    return r * rel / i["xi_zpl"]


def _reference_sigma(result, sigmas: dict) -> float:
    """First-order uncertainty of a reference-lifetime Purcell factor."""
    i = result.inputs
    k = i["tau_0"] / i["dwf"]
    return math.sqrt(
        (result.f / i["tau_0"] * sigmas["tau_0"]) ** 2
        + (k / i["tau_on"] ** 2 * sigmas["tau_on"]) ** 2
        + (k / i["tau_off"] ** 2 * sigmas["tau_off"]) ** 2
    )


def _rabi_amplitude(result: FitResult) -> Measurement:
    """Normalized Rabi swing amplitude/baseline with its propagated sigma."""
    a, b = result.value("amplitude"), result.value("baseline")
    ia, ib = result.param_names.index("amplitude"), result.param_names.index("baseline")
    grad = np.array([1.0 / b, -a / b ** 2])
    cov = result.covariance[np.ix_([ia, ib], [ia, ib])]
    return Measurement(a / b, float(np.sqrt(max(grad @ cov @ grad, 0.0))))


# -- Scenario --

class _Scenario:
    def __init__(self, config: ScenarioConfig, out_dir: Optional[str], workers: int):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers
        self.report = Report(provenance={
            "config_hash": config.config_hash,
            "seed": config.seed,
            "version": __version__,
        })
        self.stage_log = StageLog(config.seed, config.config_hash)
        self.fits: dict[str, dict] = {}
        self.tuning_map: Optional[TuningMap] = None

    def _path(self, name: str) -> Optional[str]:
        return os.path.join(self.out_dir, name) if self.out_dir else None

    def _save(self, name: str, columns, *arrays) -> None:
        path = self._path(name)
        if path:
            write_columns(path, columns, *arrays)

    def run_stage(self, name: str, fn: Callable[[], None]) -> None:
        self.stage_log.begin(name)
        n_before = len(self.report.records)
        try:
            fn()
        except Exception as e:
            self.stage_log.fail(name, e)
            raise StageError(name, e) from e
        self.stage_log.end(name, records=len(self.report.records) - n_before)

    # cavity: per-ring Q and FSR, group index, coarse diameter tuning
    def cavity(self) -> None:
        config = self.config
        rings = config.ring_configs

        def analyse(ring: RingConfig):
            label = ring_label(ring.diameter_um)
            w_grid, w_y, _ = simulate_mode_window(config, ring)
            q_fit = fit(lorentzian(), w_grid, w_y)
            s_grid, s_y, modes = simulate_ring_spectrum(config, ring)
            fsr_fit = fit(multi_lorentzian(len(modes)), s_grid, s_y)
            centers = [fsr_fit.value(f"center_{k + 1}") for k in range(len(modes))]
            return label, (w_grid, w_y), q_fit, (s_grid, s_y), fsr_fit, extract_fsr(centers)

        fsr_pairs = []
        for ring, (label, window, q_fit, spectrum, fsr_fit, fsr) in zip(rings, _fan_out(analyse, rings, self.workers)):
            self._save(f"mode_window_{label}.csv", SPECTRUM_COLUMNS, *window)
            self._save(f"spectrum_{label}.csv", SPECTRUM_COLUMNS, *spectrum)
            self.fits[f"q_{label}"] = q_fit.to_dict()
            self.fits[f"fsr_{label}"] = fsr_fit.to_dict()
            q = extract_q(q_fit)
            self.report.add(f"q_{label}", q.value, q.sigma, target=ring.q_factor)
            model_fsr = free_spectral_range(ring_geometry(config, ring), config.cavity.fsr_wavelength_nm)
            self.report.add(f"fsr_{label}", fsr.value, fsr.sigma, target=model_fsr)
            fsr_pairs.append((ring.diameter_um, fsr.value))

        self.report.add("group_index_fit", fit_group_index(fsr_pairs, config.cavity.fsr_wavelength_nm))

        lo, hi = config.cavity.coarse_sweep_um
        diameters = _grid(lo, hi, config.cavity.coarse_step_um)
        by_d = sorted(rings, key=lambda r: r.diameter_um)
        n_g = np.interp(diameters, [r.diameter_um for r in by_d], [r.n_g for r in by_d])
        q = float(np.mean([r.q_factor for r in rings]))
        geoms = [RingGeometry(float(d), config.cavity.n_eff, float(g), config.cavity.reference_wavelength_nm)
                 for d, g in zip(diameters, n_g)]
        nearest = [m.center_wavelength_nm for m in coarse_tuning_sweep(geoms, config.emitter.zpl_nm, q)]
        self._save("coarse_tuning.csv", ("diameter_um", "wavelength_nm"), diameters, nearest)
        self.report.add("coarse_tuning_excursion", max(nearest) - min(nearest))

    # tuning: intensity maps and the steps where the ZPL lights up
    def tuning(self) -> None:
        config = self.config
        t = config.tuning
        crossing = t.points[t.crossing_point]
        grating = generate_tuning_map(config, "grating")
        confocal = generate_tuning_map(config, "confocal")
        self.tuning_map = grating
        steps = np.arange(len(grating.modes))
        if self.out_dir:
            write_matrix(self._path("tuning_map_grating.csv"), "step", steps, grating.wavelengths_nm, grating.intensity)
            write_matrix(self._path("tuning_map_confocal.csv"), "step", steps, confocal.wavelengths_nm,
                         confocal.intensity)

        self.report.add("tuning_map_crossing_step", grating.peak_step, target=crossing)
        self.report.add("enhancement_max_step", grating.enhancement_step, target=crossing)
        self.report.add("tuning_map_on_off_ratio", grating.on_off_ratio(t.crossing_point, t.off_point))
        self.report.add("confocal_on_off_ratio", confocal.on_off_ratio(t.crossing_point, t.off_point))
        mode = grating.modes[crossing]
        f = purcell_vs_detuning(config.emitter.f_max, mode, grating.detunings_nm[crossing])
        self.report.add("zpl_output_enhancement", zpl_output_enhancement(f, config.emitter.eta_ratio))

    # lifetimes: decay traces at the labelled tuning points, then the Purcell factor
    def lifetimes(self) -> None:
        config = self.config
        e = config.emitter
        t = config.tuning
        tmap = self.tuning_map or generate_tuning_map(config, "grating")
        film = EmitterParams.from_off_resonance(e.tau_0_ns, e.xi_zpl)

        tasks = [("off", 0.0, None), ("film", 0.0, film)]
        for label, step in sorted(t.points.items()):
            tasks.append((f"point_{label}", purcell_vs_detuning(e.f_max, tmap.modes[step], tmap.detunings_nm[step]),
                          None))

        def measure(task):
            name, f, params = task
            trace = simulate_decay(config, f, name, params)
            return name, trace, fit_decay(trace)

        tau = {}
        for name, trace, result in _fan_out(measure, tasks, self.workers):
            self._save(f"decay_{name}.csv", DECAY_COLUMNS, trace.bin_starts, trace.counts)
            self.fits[f"decay_{name}"] = result.to_dict()
            tau[name] = Measurement(result.value("tau"), result.sigma("tau"))

        tau_off, tau_on, tau_0 = tau["off"], tau[f"point_{t.crossing_point}"], tau["film"]
        self.report.add("tau_off", tau_off.value, tau_off.sigma, target=e.tau_off_ns)
        self.report.add("tau_on", tau_on.value, tau_on.sigma)
        self.report.add("tau_0", tau_0.value, tau_0.sigma, target=e.tau_0_ns)

        shortest = min(t.points, key=lambda label: (tau[f"point_{label}"].value, label))
        self.report.add("lifetime_vs_tuning", t.points[shortest], target=t.points[t.crossing_point])

        sigmas = {"tau_off": tau_off.sigma, "tau_on": tau_on.sigma, "tau_0": tau_0.sigma}
        ratio = purcell_from_lifetime_ratio(tau_off.value, tau_on.value, e.xi_zpl)
        self.report.add("purcell_lifetime_ratio", ratio.f, _ratio_sigma(ratio, sigmas), target=e.f_max)
        reference = purcell_from_reference_lifetime(tau_0.value, e.xi_zpl, tau_on.value, tau_off.value)
        self.report.add("purcell_reference_lifetime", reference.f, _reference_sigma(reference, sigmas))
        theory = purcell_from_lifetime_ratio(tau_off.value, tau_on.value, e.xi_zpl_theory)
        self.report.add("purcell_lifetime_ratio_theory_dwf", theory.f, _ratio_sigma(theory, sigmas))

    # spectrum: Debye-Waller factor from the off-resonance PL spectrum
    def spectrum(self) -> None:
        e = self.config.emitter
        grid = _grid(e.spectrum_band_nm[0], e.spectrum_band_nm[1], e.spectrum_step_nm)
        lines = {label: (float(v[0]), float(v[1])) for label, v in e.other_lines.items()}
        intensity = pl_spectrum(emitter_params(self.config), grid, e.zpl_nm, e.zpl_fwhm_nm,
                                e.psb_center_nm, e.psb_sigma_nm, other_lines=lines)
        self._save("pl_spectrum.csv", SPECTRUM_COLUMNS, grid, intensity)
        window = (e.zpl_nm - e.dwf_window_nm, e.zpl_nm + e.dwf_window_nm)
        self.report.add("dwf_measured", dwf_from_spectrum(grid, intensity, window), target=e.xi_zpl)

    # spin: ODMR on every collection path, Rabi on the configured ones
    def spin(self) -> None:
        config = self.config
        s = config.spin
        paths = list(s.path_fractions)
        expected = observed_contrasts(s.intrinsic_contrast, s.path_fractions)

        def odmr(path):
            data = simulate_odmr(config, path)
            result = fit(multi_lorentzian(2), data.freq_mhz, s.contrast_sign * data.contrast)
            return path, data, result

        peaks = {}
        for path, data, result in _fan_out(odmr, paths, self.workers):
            self._save(f"odmr_{path}.csv", ODMR_COLUMNS, data.freq_mhz, data.contrast)
            self.fits[f"odmr_{path}"] = result.to_dict()
            found = extract_odmr_peaks(result)
            peaks[path] = found
            c1, c2 = found.contrasts
            self.report.add(f"odmr_contrast_{path}", 0.5 * (c1.value + c2.value), 0.5 * math.hypot(c1.sigma, c2.sigma),
                            target=expected[path])

        primary = peaks.get(CollectionPath.GRATING_ON.value) or peaks[paths[0]]
        self.report.add("odmr_f1", primary.low.value, primary.low.sigma)
        self.report.add("odmr_f2", primary.high.value, primary.high.sigma)
        zfs = d_e_from_transitions(primary.low.value, primary.high.value)
        sigma_de = 0.5 * math.hypot(primary.low.sigma, primary.high.sigma)
        self.report.add("zfs_d", zfs.d, sigma_de, target=s.d_zfs_mhz)
        self.report.add("zfs_e", zfs.e, sigma_de, target=s.e_zfs_mhz)
        if "grating_on" in peaks and "confocal_off" in peaks:
            on = self.report.record("odmr_contrast_grating_on").value
            off = self.report.record("odmr_contrast_confocal_off").value
            self.report.add("odmr_contrast_ratio", on / off)

        if s.rabi_paths and self.out_dir:
            write_json(self._path("rabi_sequence.json"), rabi_sequence(config).to_list())
        for path in s.rabi_paths:
            sweep = simulate_rabi(config, path, self.workers)
            self._save(f"rabi_{path}.csv", RABI_COLUMNS, sweep.values, sweep.counts)
            result = fit(damped_cosine(), sweep.values, sweep.counts, weights=poisson_weights(sweep.counts))
            self.fits[f"rabi_{path}"] = result.to_dict()
            amp = _rabi_amplitude(result)
            self.report.add(f"rabi_amplitude_{path}", amp.value, amp.sigma,
                            target=expected[path])

    def run(self) -> Report:
        for name in STAGES:
            self.run_stage(name, getattr(self, name))
        if self.out_dir:
            self.report.write(self._path("report.json"))
            write_json(self._path("fits.json"), self.fits)
        return self.report


def run_scenario(config: ScenarioConfig, out_dir: Optional[str] = None,
                 workers: Optional[int] = None) -> Report:
    """Run every stage and return the report.

    With ``out_dir`` the report, fits, stage log and every intermediate
    dataset are written there. A failing stage raises StageError naming it.
    """
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    scenario = _Scenario(config, out_dir, workers or config.workers)
    try:
        return scenario.run()
    finally:
        if out_dir:
            scenario.stage_log.write(os.path.join(out_dir, "stage_log.jsonl"))
