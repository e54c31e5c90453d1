"""Side-by-side reproduction of the reference numbers with pass/fail checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .analysis import contrast_summary, corrected_visibility, fit_fringe, mean_fidelity
from .circuit import ppg
from .router import Regime, RouterConfig, coherence_scan, run_router
from .source import SourceParams, accidental_fraction, calibrate_efficiency, distinguishable_coherence_scan


@dataclass(frozen=True)
class Check:
    name: str
    expected: str
    computed: float | str
    ok: bool

    def line(self) -> str:
        val = self.computed if isinstance(self.computed, str) else f"{self.computed:.6g}"
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: expected {self.expected}, got {val}"


def _within(name, value, target, tol) -> Check:
    return Check(name, f"{target:g} ± {tol:g}", value, abs(value - target) <= tol)


def _inside(name, value, lo, hi) -> Check:
    return Check(name, f"[{lo:g}, {hi:g}]", value, lo <= value <= hi)


def _guard(name, expected, fn) -> list[Check]:
    try:
        return fn()
    except Exception as exc:  # a broken table becomes a failing row, not a crash
        return [Check(name, expected, f"error: {exc}", False)]


def visibility_of(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities)
    return float((p.max() - p.min()) / (p.max() + p.min()))


def reproduce(data_dir: str | Path | None = None) -> list[Check]:
    data = Path(data_dir) if data_dir else None
    ref = io.load_reference()
    checks: list[Check] = []

    sp = ref["success_probability"]
    for regime in Regime:
        p = run_router("H", RouterConfig(control="OFF", regime=regime)).success_probability
        checks.append(_within(f"success probability {regime.value}", p, sp[regime.value], sp["tolerance"]))
    for regime, target in (("postselect_quarter", 0.25), ("feedforward_half", 0.5)):
        checks.append(_within(f"PPG {regime}", ppg((1, 0), 0.3, regime).probability, target, 1e-12))

    worst = 1.0
    for state in ("H", "V", "D", "A", "R", "L"):
        for ctrl, port in (("OFF", 1), ("ON", 2)):
            worst = min(worst, run_router(state, RouterConfig(control=ctrl)).port_fidelity(port))
    checks.append(_within("ideal output fidelity (worst of 12)", worst, 1.0, 1e-12))

    def fidelity_checks():
        raw, corr = io.load_fidelity_table(data / "fidelity.csv" if data else None)
        mf = ref["mean_fidelity"]
        out = []
        for label, table in (("raw", raw), ("corrected", corr)):
            est = mean_fidelity(table)
            out.append(_within(f"mean fidelity {label}", est.value, mf[label][0], mf["mean_tolerance"]))
            out.append(_within(f"fidelity spread {label}", est.sigma, mf[label][1], mf["spread_tolerance"]))
        return out

    checks += _guard("fidelity table", "readable table", fidelity_checks)

    def contrast_checks():
        raw, corr = io.load_routing_table(data / "routing.csv" if data else None)
        out = []
        for label, table in (("raw", raw), ("corrected", corr)):
            r = ref[f"contrast_{label}"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                cs = contrast_summary(table)
            out.append(_within(f"port-1 contrast {label}", cs.port1.value, r["port1"], r["tolerance"]))
            out.append(_within(f"port-2 contrast {label}", cs.port2.value, r["port2"], r["tolerance"]))
        return out

    checks += _guard("routing table", "readable table", contrast_checks)

    def fringe_checks():
        x, y, s = io.load_fringe_table(data / "fringe.csv" if data else None)
        fr = ref["fringe"]
        fit = fit_fringe(x, y, s, frequency=None)
        vc = corrected_visibility(fit, fr["noise_floor"])
        return [_inside("fringe visibility raw", fit.visibility.value, *fr["raw_visibility"]),
                _inside("fringe visibility corrected", vc.value, *fr["corrected_visibility"])]

    checks += _guard("fringe table", "readable table", fringe_checks)

    tilts = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    v_ideal = fit_fringe(tilts, coherence_scan("H", tilts)).visibility.value
    checks.append(_within("ideal coherence visibility", v_ideal, 1.0, 1e-10))
    v_det = fit_fringe(tilts, distinguishable_coherence_scan("H", tilts)).visibility.value
    checks.append(Check("detuned coherence visibility", "< 1e-9", v_det, v_det < 1e-9))

    acc = ref["accidental_fraction"]
    params = SourceParams()
    eta = calibrate_efficiency(params, acc["target"])
    frac = accidental_fraction(params.with_eta(eta))
    checks.append(_within(f"accidental fraction at eta*={eta:.4f}", frac, acc["target"], acc["tolerance"]))
    return checks
