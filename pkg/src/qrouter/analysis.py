"""Estimators turning coincidence counts into routing, fidelity and coherence figures.

Count uncertainties are Poissonian (``sigma_N = sqrt(N)``) and are carried to
derived quantities by first-order propagation. Fringe fitting and accidental
subtraction are also exposed as scikit-learn estimators so they can sit in a
``Pipeline`` or be cloned with ``get_params``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_counts, check_density, check_fringe

PROBE_STATES = ("H", "V", "D", "A", "R", "L")
CONTROLS = ("OFF", "ON")


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.sigma < 0 or math.isnan(self.sigma):
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    def __iter__(self):
        yield self.value
        yield self.sigma

    def __format__(self, spec):
        spec = spec or ".3f"
        return f"{self.value:{spec}} ± {self.sigma:{spec}}"


class FitError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


# -- routing ------------------------------------------------------------------

def _ratio(n_a: float, n_b: float, var_a: float, var_b: float) -> Estimate:
    # value n_b / (n_a + n_b) with independent variances on both counts
    total = n_a + n_b
    if total == 0:
        raise ZeroDivisionError("total count is zero")
    val = n_b / total
    var = (n_b ** 2 * var_a + n_a ** 2 * var_b) / total ** 4
    return Estimate(val, math.sqrt(max(var, 0.0)))


def routing_probability(cc1, cc2) -> Estimate:
    """Probability of the second port, ``cc2 / (cc1 + cc2)``.

    >>> routing_probability(50, 50).value
    0.5
    """
    (n1,), (n2,) = check_counts(cc1, cc2)
    if n1 + n2 <= 0:
        raise ValueError("routing probability needs a positive total count")
    return _ratio(n1, n2, n1, n2)


def complement(p: Estimate) -> Estimate:
    return Estimate(1.0 - p.value, p.sigma)


def subtract_accidentals(cc1, cc2, acc1, acc2, sigma_acc1=None, sigma_acc2=None) -> tuple[Estimate, Estimate]:
    """Accidental-corrected counts for both ports, not clamped at zero.

    The accidental estimate uncertainty defaults to ``sqrt(acc)`` and is added in
    quadrature to the raw Poisson error.
    """
    n1, n2, a1, a2 = (x.item() for x in check_counts(cc1, cc2, acc1, acc2))
    s1 = math.sqrt(a1) if sigma_acc1 is None else float(sigma_acc1)
    s2 = math.sqrt(a2) if sigma_acc2 is None else float(sigma_acc2)
    return (Estimate(n1 - a1, math.sqrt(n1 + s1 ** 2)),
            Estimate(n2 - a2, math.sqrt(n2 + s2 ** 2)))


def corrected_routing_probability(cc1, cc2, acc1, acc2, sigma_acc1=None, sigma_acc2=None) -> Estimate:
    c1, c2 = subtract_accidentals(cc1, cc2, acc1, acc2, sigma_acc1, sigma_acc2)
    return _ratio(c1.value, c2.value, c1.sigma ** 2, c2.sigma ** 2)


class AccidentalSubtractor(BaseEstimator, TransformerMixin):
    """Transform ``[cc1, cc2, acc1, acc2]`` rows into corrected P2 estimates.

    Output columns: ``p2, sigma_p2, p2_raw, sigma_p2_raw``.
    """

    def __init__(self, accidental_scale: float = 1.0):
        self.accidental_scale = accidental_scale

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 4:
            raise ValueError("expected rows of (cc1, cc2, acc1, acc2)")
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError("expected rows of (cc1, cc2, acc1, acc2)")
        out = np.empty((len(X), 4))
        for i, (n1, n2, a1, a2) in enumerate(X):
            a1, a2 = a1 * self.accidental_scale, a2 * self.accidental_scale
            out[i, :2] = tuple(corrected_routing_probability(n1, n2, a1, a2))
            out[i, 2:] = tuple(routing_probability(n1, n2))
        return out


# -- fidelity -----------------------------------------------------------------

def fidelity_from_counts(n_parallel, n_orthogonal) -> Estimate:
    """``F = R / (1 + R)`` with ``R = n_parallel / n_orthogonal``; ``F = 1`` when ``R`` is infinite."""
    (npar,), (nort,) = check_counts(n_parallel, n_orthogonal)
    if npar + nort <= 0:
        raise ValueError("fidelity needs at least one count")
    if nort == 0:
        return Estimate(1.0, 0.0)
    # R/(1+R) == npar/(npar+nort)
    return _ratio(nort, npar, nort, npar)


@dataclass(frozen=True)
class PolarizationDensity:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_density(self.matrix))

    @classmethod
    def pure(cls, qubit) -> "PolarizationDensity":
        v = np.asarray(qubit, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls) -> "PolarizationDensity":
        return cls(np.eye(2) / 2)

    def projection_probability(self, qubit) -> float:
        v = np.asarray(qubit, dtype=complex)
        return float(np.real(v.conj() @ self.matrix @ v))


def fidelity_from_state(rho: PolarizationDensity | np.ndarray, target) -> float:
    """``<psi| rho |psi>`` for a normalized target polarization."""
    if not isinstance(rho, PolarizationDensity):
        rho = PolarizationDensity(rho)
    psi = np.asarray(getattr(target, "vector", target), dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("target state is not normalized")
    return rho.projection_probability(psi)


def mean_fidelity(table: Mapping[tuple[str, str], Estimate | float] | Sequence, ddof: int = 0) -> Estimate:
    """Mean over the twelve (state, control) fidelities, spread = standard deviation."""
    values = list(table.values()) if isinstance(table, Mapping) else list(table)
    if isinstance(table, Mapping):
        missing = [(s, c) for s in PROBE_STATES for c in CONTROLS if (s, c) not in table]
        if missing:
            raise ValueError(f"fidelity table incomplete, missing {missing}")
    if len(values) != len(PROBE_STATES) * len(CONTROLS):
        raise ValueError(f"expected 12 fidelities, got {len(values)}")
    arr = np.array([float(getattr(v, "value", v)) for v in values])
    return Estimate(float(arr.mean()), float(arr.std(ddof=ddof)))


# -- contrast -----------------------------------------------------------------

@dataclass(frozen=True)
class ContrastSummary:
    port1: Estimate
    port2: Estimate
    per_state: dict[str, tuple[float, float]]
    unbounded: list[tuple[str, int]] = field(default_factory=list)


def contrast_summary(table: Mapping[str, Mapping[str, Estimate | float]], ddof: int = 0) -> ContrastSummary:
    """Mean routing contrast for both ports from per-state P2 under ON and OFF.

    Port 2 contrast is ``P2(ON) / P2(OFF)``, port 1 contrast is
    ``(1 - P2(OFF)) / (1 - P2(ON))``. Per-state contrasts with a vanishing
    denominator are reported as unbounded and left out of the mean.
    """
    per_state = {}
    unbounded = []
    c1s, c2s = [], []
    for state, row in table.items():
        try:
            on, off = (float(getattr(row[k], "value", row[k])) for k in ("ON", "OFF"))
        except KeyError:
            raise ValueError(f"state {state} lacks an ON or OFF entry") from None
        c2 = on / off if off > 0 else math.inf
        c1 = (1 - off) / (1 - on) if on < 1 else math.inf
        per_state[state] = (c1, c2)
        for port, c, bucket in ((1, c1, c1s), (2, c2, c2s)):
            if math.isfinite(c):
                bucket.append(c)
            else:
                unbounded.append((state, port))
    if unbounded:
        warnings.warn(f"unbounded contrast excluded from the mean: {unbounded}", RuntimeWarning)

    def summarize(vals):
        if not vals:
            return Estimate(math.inf, 0.0)
        arr = np.array(vals)
        return Estimate(float(arr.mean()), float(arr.std(ddof=ddof)) if len(arr) > ddof else 0.0)

    return ContrastSummary(summarize(c1s), summarize(c2s), per_state, unbounded)


# -- fringe fitting -----------------------------------------------------------

@dataclass(frozen=True)
class FringeFit:
    offset: float
    amplitude: float
    phase0: float
    frequency: float
    visibility: Estimate
    chi2: float
    covariance: np.ndarray
    residuals: np.ndarray

    def model(self, phases) -> np.ndarray:
        return fringe_model(np.asarray(phases, dtype=float), self.offset, self.amplitude,
                            self.phase0, self.frequency)


def fringe_model(x, offset, amplitude, phase0, frequency=1.0):
    return offset + amplitude * np.cos(frequency * x - phase0)


def _linear_fit(x, y, s, freq):
    # y = a + bc cos(fx) + bs sin(fx), weighted by 1/s
    design = np.column_stack([np.ones_like(x), np.cos(freq * x), np.sin(freq * x)]) / s[:, None]
    coef, *_ = np.linalg.lstsq(design, y / s, rcond=None)
    chi2 = float(np.sum((design @ coef - y / s) ** 2))
    return coef, chi2


def _polar(coef):
    a, bc, bs = coef
    b = math.hypot(bc, bs)
    return a, b, math.atan2(bs, bc) if b > 0 else 0.0


def fit_fringe(phases, counts, sigmas=None, frequency: float | None = 1.0,
               max_iter: int = 200, frequency_bounds=(0.2, 10.0), grid: int = 400) -> FringeFit:
    """Weighted least-squares fit of ``A + B cos(f x - phi0)``.

    With ``frequency`` fixed the model is linear in ``(A, B cos phi0, B sin phi0)``
    and is solved exactly. With ``frequency=None`` the fringe frequency is also
    fitted: a profile scan over ``frequency_bounds`` picks the start point for a
    bounded Levenberg-Marquardt refinement.
    """
    x, y, s = check_fringe(phases, counts, sigmas)
    if frequency is not None:
        if np.ptp(x) * frequency <= math.pi:
            raise ValueError("fringe samples must span more than pi of fringe phase")
        coef, chi2 = _linear_fit(x, y, s, frequency)
        a, b, p0 = _polar(coef)
        design = np.column_stack([np.ones_like(x), np.cos(frequency * x), np.sin(frequency * x)]) / s[:, None]
        cov_lin = np.linalg.pinv(design.T @ design)
        # Jacobian of (A, B, phi0, f) w.r.t. (a, bc, bs); f is fixed
        bc, bs = coef[1], coef[2]
        jac = np.zeros((4, 3))
        jac[0, 0] = 1
        if b > 0:
            jac[1, 1], jac[1, 2] = bc / b, bs / b
            jac[2, 1], jac[2, 2] = -bs / b ** 2, bc / b ** 2
        cov = jac @ cov_lin @ jac.T
        freq = float(frequency)
    else:
        freqs = np.linspace(*frequency_bounds, grid)
        chis = [_linear_fit(x, y, s, f)[1] for f in freqs]
        f0 = float(freqs[int(np.argmin(chis))])
        a, b, p0 = _polar(_linear_fit(x, y, s, f0)[0])
        if b == 0:
            b = 0.5 * float(np.ptp(y)) or 1.0
            p0 = float(x[int(np.argmax(y))]) * f0

        def resid(p):
            return (fringe_model(x, *p) - y) / s

        sol = optimize.least_squares(resid, [a, b, p0, f0], method="lm", max_nfev=max_iter * 5,
                                     x_scale="jac")
        if not sol.success:
            raise FitError(f"fringe fit did not converge: {sol.message}", sol.fun)
        a, b, p0, freq = (float(v) for v in sol.x)
        if b < 0:
            b, p0 = -b, p0 + math.pi
        chi2 = float(np.sum(sol.fun ** 2))
        cov = np.linalg.pinv(sol.jac.T @ sol.jac)
        if np.ptp(x) * abs(freq) <= math.pi:
            raise ValueError("fringe samples span less than pi of fitted fringe phase")
        if freq < 0:
            freq, p0 = -freq, -p0
    p0 = float(math.remainder(p0, 2 * math.pi))
    vis = _visibility(a, b, cov, 0.0)
    return FringeFit(a, b, p0, freq, vis, chi2, cov, y - fringe_model(x, a, b, p0, freq))


def _visibility(a, b, cov, floor):
    denom = a - floor
    if denom <= 0:
        raise ValueError("noise floor must lie below the fitted offset")
    v = b / denom
    var = (cov[1, 1] / denom ** 2 + cov[0, 0] * b ** 2 / denom ** 4
           - 2 * cov[0, 1] * b / denom ** 3)
    return Estimate(v, math.sqrt(max(var, 0.0)))


def corrected_visibility(fit: FringeFit, noise_floor: float) -> Estimate:
    """Visibility with the offset reduced by a constant accidental floor."""
    if noise_floor >= fit.offset:
        raise ValueError(f"noise floor {noise_floor} is not below the offset {fit.offset:.4g}")
    return _visibility(fit.offset, fit.amplitude, fit.covariance, noise_floor)


class FringeFitter(BaseEstimator, RegressorMixin):
    """Harmonic fringe regressor.

    ``fit(phases, counts, sigma=...)`` stores ``offset_``, ``amplitude_``,
    ``phase0_``, ``frequency_`` and ``visibility_``; ``predict`` evaluates the
    fitted harmonic. ``frequency=None`` fits the fringe frequency as well.
    """

    def __init__(self, frequency: float | None = 1.0, noise_floor: float = 0.0, max_iter: int = 200):
        self.frequency = frequency
        self.noise_floor = noise_floor
        self.max_iter = max_iter

    def fit(self, X, y, sigma=None):
        x = np.asarray(X, dtype=float).reshape(len(y), -1)
        if x.shape[1] != 1:
            raise ValueError("FringeFitter expects a single phase feature")
        self.n_features_in_ = 1
        self.fit_ = fit_fringe(x[:, 0], y, sigma, frequency=self.frequency, max_iter=self.max_iter)
        self.offset_ = self.fit_.offset
        self.amplitude_ = self.fit_.amplitude
        self.phase0_ = self.fit_.phase0
        self.frequency_ = self.fit_.frequency
        self.visibility_ = (corrected_visibility(self.fit_, self.noise_floor)
                            if self.noise_floor else self.fit_.visibility)
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        x = np.asarray(X, dtype=float).reshape(-1)
        return self.fit_.model(x)
