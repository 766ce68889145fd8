"""Damped least-squares (Levenberg-Marquardt) fitting and derived quantities.

Positive parameters (amplitudes, widths, lifetimes) are fitted through their
logarithms and reported linearly; the covariance is computed in the linear
parameters as inv(J^T W J) scaled by the reduced chi^2.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ringqed.errors import FitError, ValidationError
from ringqed.models import ModelSpec, initial_guess

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    ftol: float = 1e-10
    damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 10.0
    max_damping: float = 1e16


@dataclass(frozen=True, eq=False)
class FitResult:
    kind: str
    param_names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    sigmas: np.ndarray
    chi2: float
    reduced_chi2: float
    n_iterations: int
    converged: bool
    termination_reason: str
    chi2_history: tuple[float, ...] = field(default_factory=tuple)
    n_points: int = 0

    def value(self, name: str) -> float:
        return float(self.params[self.param_names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.param_names.index(name)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {n: float(v) for n, v in zip(self.param_names, self.params)},
            "sigmas": {n: float(s) for n, s in zip(self.param_names, self.sigmas)},
            "reduced_chi2": float(self.reduced_chi2),
            "n_iterations": int(self.n_iterations),
            "converged": bool(self.converged),
            "termination_reason": self.termination_reason,
        }


class Measurement(NamedTuple):
    value: float
    sigma: float


@dataclass(frozen=True)
class OdmrPeaks:
    low: Measurement
    high: Measurement
    contrasts: tuple[Measurement, Measurement]
    unresolved: bool = False


def poisson_weights(y) -> np.ndarray:
    """1/max(y, 1), the Poisson variance approximation for count data."""
    return 1.0 / np.maximum(np.asarray(y, dtype=float), 1.0)


def numeric_jacobian(model: ModelSpec, theta, x, rel_step: float = 1e-6, floor: float = 1e-3) -> np.ndarray:
    """Richardson-extrapolated central differences, step = rel_step * max(|theta_i|, floor).

    Combining steps h and h/2 cancels the h^2 term, so a narrow line on a
    large offset (a 0.3 nm cavity mode at 1078 nm) stays accurate to ~1e-10.
    """
    if not rel_step > 0:
        raise ValidationError(f"rel_step must be positive, got {rel_step}")
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)

    def central(i: int, h: float) -> np.ndarray:
        up = theta.copy()
        down = theta.copy()
        up[i] += h
        down[i] -= h
        return (model.evaluate(x, up) - model.evaluate(x, down)) / (2 * h)

    jac = np.empty((x.size, theta.size))
    for i in range(theta.size):
        h = rel_step * max(abs(theta[i]), floor)
        jac[:, i] = (4.0 * central(i, h / 2) - central(i, h)) / 3.0
    return jac


def _jacobian(model: ModelSpec, theta, x) -> np.ndarray:
    if model.jacobian is not None:
        return model.jacobian(x, theta)
    return numeric_jacobian(model, theta, x)


def fit(model: ModelSpec, x, y, p0=None, weights=None, options: Optional[FitOptions] = None) -> FitResult:
    """Minimize sum w_i (y_i - f(x_i; theta))^2 from ``p0``.

    Without ``p0`` the model's initial-guess helper is used. Hitting the
    iteration cap returns the best parameters so far with converged=False.
    """
    options = options or FitOptions()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_params = model.n_params
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-D arrays of equal length")
    if x.size < n_params:
        raise ValidationError(f"{x.size} points cannot constrain {n_params} parameters")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError("weights must be positive and finite")
    theta = np.array(initial_guess(model, x, y) if p0 is None else p0, dtype=float)
    if theta.size != n_params or np.any(~np.isfinite(theta)):
        raise ValidationError(f"initial parameters must be {n_params} finite values")
    pos = np.zeros(n_params, dtype=bool)
    pos[list(model.positive)] = True
    if np.any(theta[pos] <= 0):
        bad = [model.param_names[i] for i in np.flatnonzero(pos & (theta <= 0))]
        raise ValidationError(f"initial {', '.join(bad)} must be positive")

    def to_internal(t):
        phi = t.copy()
        phi[pos] = np.log(t[pos])
        return phi

    def to_external(phi):
        t = phi.copy()
        t[pos] = np.exp(phi[pos])
        return t

    def weighted_chi2(t):
        r = y - model.evaluate(x, t)
        return r, float(np.sum(w * r * r))

    phi = to_internal(theta)
    r, chi2 = weighted_chi2(theta)
    if not np.isfinite(chi2):
        raise FitError("non-finite model", "model is not finite at the initial parameters")

    history = [chi2]
    damping = options.damping
    iterations = 0
    converged = False
    reason = "iteration cap reached"
    if chi2 == 0.0:
        converged, reason = True, "exact fit"

    while not converged and iterations < options.max_iterations:
        iterations += 1
        jac = _jacobian(model, theta, x)
        jac[:, pos] *= theta[pos]
        jw = jac * w[:, None]
        normal = jac.T @ jw
        gradient = jw.T @ r
        diag = np.diag(normal)
        if np.any(~np.isfinite(normal)) or np.any(diag <= 0):
            raise FitError("degenerate fit", "a parameter has no influence on the model")

        accepted = False
        while damping <= options.max_damping:
            try:
                step = np.linalg.solve(normal + damping * np.diag(diag), gradient)
            except np.linalg.LinAlgError as e:
                raise FitError("degenerate fit", str(e)) from e
            trial = to_external(phi + step)
            r_trial, chi2_trial = weighted_chi2(trial)
            if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                accepted = True
                damping = damping / options.damping_down
                break
            damping *= options.damping_up

        if not accepted:
            converged, reason = True, "no further reduction in chi2"
            break

        relative = (chi2 - chi2_trial) / chi2
        phi, theta, r, chi2 = phi + step, trial, r_trial, chi2_trial
        history.append(chi2)
        if chi2 == 0.0 or relative < options.ftol:
            converged, reason = True, "relative chi2 change below tolerance"

    if not converged:
        log.warning("%s fit stopped at the iteration cap (%d)", model.kind, options.max_iterations)

    jac = _jacobian(model, theta, x)
    normal = jac.T @ (jac * w[:, None])
    try:
        inverse = np.linalg.inv(normal)
    except np.linalg.LinAlgError as e:
        raise FitError("degenerate fit", str(e)) from e
    if np.any(~np.isfinite(inverse)):
        raise FitError("degenerate fit", "normal matrix is singular")
    dof = max(x.size - n_params, 1)
    reduced = chi2 / dof
    covariance = 0.5 * (inverse + inverse.T) * reduced

    if model.ordering is not None:
        perm = model.ordering(theta)
        theta = theta[perm]
        covariance = covariance[np.ix_(perm, perm)]

    log.debug("%s fit: chi2=%.6g after %d iterations (%s)", model.kind, chi2, iterations, reason)
    return FitResult(
        kind=model.kind,
        param_names=model.param_names,
        params=theta,
        covariance=covariance,
        sigmas=np.sqrt(np.clip(np.diag(covariance), 0.0, None)),
        chi2=chi2,
        reduced_chi2=reduced,
        n_iterations=iterations,
        converged=converged,
        termination_reason=reason,
        chi2_history=tuple(history),
        n_points=int(x.size),
    )


def _peak_indices(result: FitResult, peak: int) -> tuple[int, int, int]:
    if result.kind not in ("lorentzian", "multi_lorentzian"):
        raise ValidationError(f"expected a Lorentzian fit, got '{result.kind}'")
    n_peaks = (len(result.params) - 1) // 3
    if not 0 <= peak < n_peaks:
        raise ValidationError(f"peak {peak} out of range for {n_peaks} fitted peaks")
    return 3 * peak, 3 * peak + 1, 3 * peak + 2


def extract_q(result: FitResult, peak: int = 0) -> Measurement:
    """Q = center / fwhm with first-order error propagation."""
    _, ic, iw = _peak_indices(result, peak)
    center, fwhm = result.params[ic], result.params[iw]
    if not fwhm > 0:
        raise ValidationError(f"fitted FWHM must be positive, got {fwhm}")
    grad = np.array([1.0 / fwhm, -center / fwhm ** 2])
    sub = result.covariance[np.ix_([ic, iw], [ic, iw])]
    variance = float(grad @ sub @ grad)
    return Measurement(float(center / fwhm), float(np.sqrt(max(variance, 0.0))))


def extract_fsr(centers: Sequence[float]) -> Measurement:
    """Mean and standard error of adjacent mode spacings."""
    c = np.asarray(centers, dtype=float)
    if c.size < 3:
        raise FitError("insufficient modes", f"need at least 3 mode centers, got {c.size}")
    if np.any(np.diff(c) < 0):
        raise ValidationError("mode centers must be sorted ascending")
    spacings = np.diff(c)
    return Measurement(float(spacings.mean()), float(spacings.std(ddof=1) / np.sqrt(spacings.size)))


def extract_odmr_peaks(result: FitResult, relative: bool = False) -> OdmrPeaks:
    """Ordered transition frequencies and per-peak contrasts of a two-peak fit.

    Contrast is the fitted peak height divided by a reference level: the
    fitted baseline when ``relative`` (count data), else 1 (contrast data).
    """
    if result.kind != "multi_lorentzian" or len(result.params) != 7:
        raise ValidationError("expected a two-peak multi_lorentzian fit")
    cov = result.covariance
    peaks = []
    for k in range(2):
        ia, ic, iw = _peak_indices(result, k)
        peaks.append((result.params[ic], ia, ic, iw))
    peaks.sort(key=lambda p: (p[0], -result.params[p[1]]))

    ib = len(result.params) - 1
    base = result.params[ib]
    contrasts = []
    for _, ia, _, _ in peaks:
        amp = result.params[ia]
        if relative:
            grad = np.array([1.0 / base, -amp / base ** 2])
            sub = cov[np.ix_([ia, ib], [ia, ib])]
            contrasts.append(Measurement(float(amp / base), float(np.sqrt(max(grad @ sub @ grad, 0.0)))))
        else:
            contrasts.append(Measurement(float(amp), float(np.sqrt(max(cov[ia, ia], 0.0)))))

    (c1, _, ic1, iw1), (c2, _, ic2, iw2) = peaks
    mean_width = 0.5 * (result.params[iw1] + result.params[iw2])
    unresolved = bool(abs(c2 - c1) < 0.5 * mean_width)
    if unresolved:
        log.warning("ODMR peaks %.3f and %.3f MHz are unresolved", c1, c2)
    return OdmrPeaks(
        low=Measurement(float(c1), float(np.sqrt(max(cov[ic1, ic1], 0.0)))),
        high=Measurement(float(c2), float(np.sqrt(max(cov[ic2, ic2], 0.0)))),
        contrasts=(contrasts[0], contrasts[1]),
        unresolved=unresolved,
    )
