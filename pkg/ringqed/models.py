"""Built-in fit models with analytic Jacobians, and initial-guess helpers.

Parameter layouts:
    lorentzian          [amplitude, center, fwhm, baseline]
    multi_lorentzian(n) [amplitude_1, center_1, fwhm_1, ..., amplitude_n, center_n, fwhm_n, baseline]
    exp_decay           [amplitude, tau, baseline]
    damped_cosine       [amplitude, frequency, decay, baseline]

Lorentzians are unit-peak (amplitude is the peak height above baseline).
The damped cosine is baseline - amplitude/2 * (1 - cos(2 pi f x)) * exp(-x/decay),
so ``amplitude`` is the peak-to-trough swing at x -> 0 and ``frequency`` is
in inverse x units.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ringqed.errors import FitError

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """A model y = f(x; theta).

    ``positive`` lists parameter indices the fitter keeps positive by working
    with their logarithms. ``jacobian`` may be None, in which case the fitter
    falls back to central differences. ``ordering`` returns a permutation of
    parameter indices putting equivalent solutions in canonical order.
    """
    kind: str
    param_names: tuple[str, ...]
    evaluate: Evaluator
    jacobian: Optional[Evaluator] = None
    positive: tuple[int, ...] = ()
    ordering: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def n_params(self) -> int:
        return len(self.param_names)


def _lorentz_terms(x, amplitude, center, fwhm):
    u = 2.0 * (x - center) / fwhm
    denom = 1.0 + u * u
    value = amplitude / denom
    d_amp = 1.0 / denom
    d_center = 4.0 * amplitude * u / (fwhm * denom * denom)
    d_fwhm = 2.0 * amplitude * u * u / (fwhm * denom * denom)
    return value, d_amp, d_center, d_fwhm


def _multi_eval(n):
    def evaluate(x, theta):
        y = np.full(x.shape, theta[-1], dtype=float)
        for k in range(n):
            a, c, w = theta[3 * k:3 * k + 3]
            y += a / (1.0 + (2.0 * (x - c) / w) ** 2)
        return y
    return evaluate


def _multi_jac(n):
    def jacobian(x, theta):
        jac = np.empty((x.size, 3 * n + 1))
        for k in range(n):
            a, c, w = theta[3 * k:3 * k + 3]
            _, jac[:, 3 * k], jac[:, 3 * k + 1], jac[:, 3 * k + 2] = _lorentz_terms(x, a, c, w)
        jac[:, -1] = 1.0
        return jac
    return jacobian


def _peak_ordering(n):
    def ordering(theta):
        # ascending center, ties broken by larger amplitude first
        peaks = sorted(range(n), key=lambda k: (theta[3 * k + 1], -theta[3 * k]))
        perm = [3 * k + j for k in peaks for j in range(3)]
        return np.array(perm + [3 * n])
    return ordering


def multi_lorentzian(n: int) -> ModelSpec:
    if n < 1:
        raise ValueError(f"need at least one peak, got {n}")
    names = tuple(f"{p}_{k + 1}" for k in range(n) for p in ("amplitude", "center", "fwhm")) + ("baseline",)
    positive = tuple(i for k in range(n) for i in (3 * k, 3 * k + 2))
    return ModelSpec(
        kind="multi_lorentzian",
        param_names=names,
        evaluate=_multi_eval(n),
        jacobian=_multi_jac(n),
        positive=positive,
        ordering=_peak_ordering(n) if n > 1 else None,
    )


def lorentzian() -> ModelSpec:
    return ModelSpec(
        kind="lorentzian",
        param_names=("amplitude", "center", "fwhm", "baseline"),
        evaluate=_multi_eval(1),
        jacobian=_multi_jac(1),
        positive=(0, 2),
    )


def _exp_eval(x, theta):
    a, tau, b = theta
    return a * np.exp(-x / tau) + b


def _exp_jac(x, theta):
    a, tau, _ = theta
    e = np.exp(-x / tau)
    return np.column_stack((e, a * e * x / tau ** 2, np.ones_like(x)))


def exp_decay() -> ModelSpec:
    return ModelSpec(
        kind="exp_decay",
        param_names=("amplitude", "tau", "baseline"),
        evaluate=_exp_eval,
        jacobian=_exp_jac,
        positive=(0, 1),
    )


def _cos_eval(x, theta):
    a, f, decay, b = theta
    return b - 0.5 * a * (1.0 - np.cos(2 * math.pi * f * x)) * np.exp(-x / decay)


def _cos_jac(x, theta):
    a, f, decay, _ = theta
    phase = 2 * math.pi * f * x
    env = np.exp(-x / decay)
    swing = 1.0 - np.cos(phase)
    return np.column_stack((
        -0.5 * swing * env,
        -0.5 * a * np.sin(phase) * 2 * math.pi * x * env,
        -0.5 * a * swing * env * x / decay ** 2,
        np.ones_like(x),
    ))


def damped_cosine() -> ModelSpec:
    return ModelSpec(
        kind="damped_cosine",
        param_names=("amplitude", "frequency", "decay", "baseline"),
        evaluate=_cos_eval,
        jacobian=_cos_jac,
        positive=(0, 1, 2),
    )


def model_by_name(name: str, peaks: int = 1) -> ModelSpec:
    """Look up a built-in model by its kind name."""
    if name == "lorentzian":
        return lorentzian()
    if name == "multi_lorentzian":
        return multi_lorentzian(peaks)
    if name == "exp_decay":
        return exp_decay()
    if name == "damped_cosine":
        return damped_cosine()
    raise ValueError(f"unknown model '{name}'")


# -- Initial guesses --

def _smooth(y, width=5):
    if y.size < width:
        return y
    kernel = np.ones(width) / width
    return np.convolve(y, kernel, mode="same")


def pick_peaks(x, y, n: int, min_separation: Optional[float] = None) -> list[int]:
    """Indices of the ``n`` highest local maxima at least ``min_separation`` apart, ascending."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if min_separation is None:
        min_separation = (x[-1] - x[0]) / (2 * n)
    interior = np.arange(1, y.size - 1)
    is_max = (y[interior] >= y[interior - 1]) & (y[interior] >= y[interior + 1])
    candidates = sorted(interior[is_max].tolist(), key=lambda i: (-y[i], i))
    chosen: list[int] = []
    for i in candidates:
        if all(abs(x[i] - x[j]) >= min_separation for j in chosen):
            chosen.append(i)
            if len(chosen) == n:
                break
    if len(chosen) < n:
        raise FitError("insufficient peaks", f"found {len(chosen)} of {n} peaks")
    return sorted(chosen)


def _half_width(x, y, i, base):
    half = base + (y[i] - base) / 2.0
    left = i
    while left > 0 and y[left] > half:
        left -= 1
    right = i
    while right < y.size - 1 and y[right] > half:
        right += 1
    step = np.median(np.diff(x))
    return max(x[right] - x[left], 2 * step)


def guess_lorentzians(x, y, n: int, min_separation: Optional[float] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = float(np.median(y))
    smooth = _smooth(y)
    theta = []
    for i in pick_peaks(x, y, n, min_separation):
        height = max(float(smooth[i]) - base, 1e-12 * max(abs(base), 1.0))
        theta += [height, float(x[i]), float(_half_width(x, smooth, i, base))]
    return np.array(theta + [base])


def guess_exp_decay(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tail = max(y.size // 10, 1)
    base = float(np.median(y[-tail:]))
    above = y - base
    amp = max(float(above[:3].max()), 1e-12)
    keep = 0
    while keep < y.size and above[keep] > 0.2 * amp:
        keep += 1
    tau = (x[-1] - x[0]) / 5.0
    if keep >= 3:
        slope = np.polyfit(x[:keep], np.log(above[:keep]), 1)[0]
        if slope < 0:
            tau = -1.0 / slope
    return np.array([amp, tau, base])


def guess_damped_cosine(x, y) -> np.ndarray:
    """Baseline from the upper envelope, frequency from a zero-padded FFT.

    Assumes a uniform x grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = float(np.percentile(y, 90))
    amp = max(base - float(y.min()), 1e-12 * max(abs(base), 1.0))
    dx = float(np.median(np.diff(x)))
    n_fft = 8 * int(2 ** math.ceil(math.log2(y.size)))
    spectrum = np.abs(np.fft.rfft(y - y.mean(), n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, d=dx)
    # skip the decaying offset's low-frequency lobe: require two cycles in the window
    lowest = max(1, int(np.searchsorted(freqs, 2.0 / (x[-1] - x[0]))))
    k = int(np.argmax(spectrum[lowest:])) + lowest
    if 1 <= k < spectrum.size - 1:
        a, b, c = spectrum[k - 1:k + 2]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        freq = freqs[k] + shift * (freqs[1] - freqs[0])
    else:
        freq = freqs[k]
    decay = x[-1] - x[0]
    return np.array([amp, max(freq, freqs[1]), decay, base])


def initial_guess(model: ModelSpec, x, y) -> np.ndarray:
    """Starting parameters for a built-in model, so callers never hand-feed inits."""
    if model.kind == "lorentzian":
        return guess_lorentzians(x, y, 1)
    if model.kind == "multi_lorentzian":
        return guess_lorentzians(x, y, (model.n_params - 1) // 3)
    if model.kind == "exp_decay":
        return guess_exp_decay(x, y)
    if model.kind == "damped_cosine":
        return guess_damped_cosine(x, y)
    raise FitError("no initial guess", f"no initial guess for model kind '{model.kind}'")
