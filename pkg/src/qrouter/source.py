"""Three-photon source statistics and accidental three-fold coincidences.

The signal comes from an attenuated coherent beam (Poissonian photon number),
the two controls from SPDC pairs (single-mode thermal pair number, one photon
of every pair in each control input). Accidental coincidences are three-fold
detections from any photon-number configuration other than one signal photon
plus one pair; they are propagated with photons treated as mutually
distinguishable and detected by bucket detectors with efficiency ``eta``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy import optimize, stats

from .circuit import DetectionPattern, Detector, feed_forward, named_polarization, postselect
from .fock import ModeLabel, Polarization
from .router import (REGISTRY, ControlSetting, RouterConfig, RouterResult, SignalQubit, Variant, build_router,
                     input_state, evolve)

CHANNELS = ("S", "C1", "C2", "OUT1", "OUT2")
DEFAULT_MU = 0.00125
DEFAULT_REP_RATE = 80e6
DEFAULT_PAIR_RATE = 2000.0
DEFAULT_CUTOFF = 4
TAIL_WARN = 1e-9


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SourceParams:
    mu_signal: float = DEFAULT_MU
    p_pair: float = DEFAULT_PAIR_RATE / DEFAULT_REP_RATE
    rep_rate: float = DEFAULT_REP_RATE
    eta: Mapping[str, float] = field(default_factory=lambda: dict.fromkeys(CHANNELS, 1.0))
    duration: float = 120.0
    distinguishable: bool = False

    def __post_init__(self):
        if self.mu_signal < 0:
            raise ValueError("mu_signal must be non-negative")
        if not 0 <= self.p_pair < 1:
            raise ValueError("p_pair must lie in [0, 1)")
        if self.rep_rate <= 0 or self.duration < 0:
            raise ValueError("rep_rate must be positive and duration non-negative")
        eta = dict.fromkeys(CHANNELS, 1.0)
        if isinstance(self.eta, (int, float)):
            eta = dict.fromkeys(CHANNELS, float(self.eta))
        else:
            unknown = set(self.eta) - set(CHANNELS)
            if unknown:
                raise ValueError(f"unknown efficiency channels {sorted(unknown)}")
            eta.update({k: float(v) for k, v in self.eta.items()})
        if not all(0 < v <= 1 for v in eta.values()):
            raise ValueError("efficiencies must lie in (0, 1]")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def from_pair_rate(cls, pair_rate: float, rep_rate: float = DEFAULT_REP_RATE, **kw) -> "SourceParams":
        return cls(p_pair=pair_rate / rep_rate, rep_rate=rep_rate, **kw)

    def with_eta(self, eta) -> "SourceParams":
        return replace(self, eta=eta)

    def to_dict(self) -> dict:
        return {"mu_signal": self.mu_signal, "p_pair": self.p_pair, "rep_rate": self.rep_rate,
                "eta": dict(self.eta), "duration": self.duration,
                "distinguishable": self.distinguishable}


@dataclass(frozen=True)
class PhotonNumberDistribution:
    probabilities: dict[tuple[int, int], float]
    tail: float
    cutoff: int

    @property
    def truncated(self) -> bool:
        return self.tail > TAIL_WARN


def thermal_pmf(n: int, mean: float) -> float:
    if mean == 0:
        return 1.0 if n == 0 else 0.0
    return mean ** n / (1 + mean) ** (n + 1)


def photon_number_distribution(params: SourceParams, cutoff: int = DEFAULT_CUTOFF) -> PhotonNumberDistribution:
    """Joint law of (signal photons, SPDC pairs) with ``n_s + 2 n_p <= cutoff``."""
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    probs = {}
    for n_p in range(cutoff // 2 + 1):
        pp = thermal_pmf(n_p, params.p_pair)
        for n_s in range(cutoff - 2 * n_p + 1):
            probs[(n_s, n_p)] = float(stats.poisson.pmf(n_s, params.mu_signal)) * pp
    tail = max(0.0, 1.0 - math.fsum(probs.values()))
    dist = PhotonNumberDistribution(probs, tail, cutoff)
    if dist.truncated:
        warnings.warn(f"cutoff {cutoff} leaves {tail:.3g} of the probability mass", RuntimeWarning)
    return dist


# -- classical (distinguishable) propagation ---------------------------------

@dataclass(frozen=True)
class _Channel:
    name: str
    path: str
    projection: tuple[complex, complex] | None
    eta: float


def _channels(config: RouterConfig, params: SourceParams, port: str,
              control: tuple[str, str], projection) -> list[_Channel]:
    eta = params.eta
    proj = None if projection is None else (
        named_polarization(projection) if isinstance(projection, str) else tuple(projection))
    return [_Channel("C1", "C1", named_polarization(control[0]), eta["C1"]),
            _Channel("C2", "C2", named_polarization(control[1]), eta["C2"]),
            _Channel(port, port, proj, eta[port])]


def _landing(u: np.ndarray, mode_in: int, pol: tuple[complex, complex], ch: _Channel) -> float:
    # probability that one photon entering (mode_in, mode_in+1) with polarization
    # pol reaches the detector of channel ch
    out = u[:, mode_in] * pol[0] + u[:, mode_in + 1] * pol[1]
    h = out[REGISTRY.index(ModeLabel(ch.path, Polarization.H))]
    v = out[REGISTRY.index(ModeLabel(ch.path, Polarization.V))]
    if ch.projection is None:
        p = abs(h) ** 2 + abs(v) ** 2
    else:
        e = ch.projection
        p = abs(e[0].conjugate() * h + e[1].conjugate() * v) ** 2
    return ch.eta * p


def fire_probability(q: np.ndarray) -> float:
    """P(every detector fires) for independent photons.

    ``q[i, d]`` is the probability that photon ``i`` is registered by detector
    ``d``; a photon is registered by at most one detector.
    """
    n_photons, n_det = q.shape
    total = 0.0
    for r in range(n_det + 1):
        for subset in itertools.combinations(range(n_det), r):
            miss = 1.0 - q[:, list(subset)].sum(axis=1) if subset else np.ones(n_photons)
            total += (-1) ** r * float(np.prod(miss))
    return max(total, 0.0)


def _photon_table(u, config: RouterConfig, signal: SignalQubit, params: SourceParams,
                  n_s: int, n_p: int, channels: list[_Channel]) -> np.ndarray:
    phi = config.control.phi
    s_in = REGISTRY.index(ModeLabel("S_IN", Polarization.H))
    c1 = REGISTRY.index(ModeLabel("C1", Polarization.H))
    c2 = REGISTRY.index(ModeLabel("C2", Polarization.H))
    r = 1 / math.sqrt(2)
    phi2 = phi + math.pi if config.control2_shift == "preparation" else phi
    sources = ([(s_in, (signal.alpha, signal.beta), params.eta["S"])] * n_s
               + [(c1, (r, r * np.exp(1j * phi)), 1.0)] * n_p
               + [(c2, (r, r * np.exp(1j * phi2)), 1.0)] * n_p)
    return np.array([[t * _landing(u, m, pol, ch) for ch in channels] for m, pol, t in sources])


def _accepted_controls(config: RouterConfig) -> list[tuple[str, str]]:
    return [(name[0], name[1]) for name in build_router(config).branches]


def classical_coincidence(config: RouterConfig, signal, params: SourceParams, n_s: int, n_p: int,
                          port: str = "OUT1", projection=None) -> float:
    """Three-fold bucket-coincidence probability for one photon-number configuration."""
    signal = SignalQubit.from_any(signal)
    u = build_router(config).circuit.single_particle_matrix()
    total = 0.0
    for ctrl in _accepted_controls(config):
        chans = _channels(config, params, port, ctrl, projection)
        total += fire_probability(_photon_table(u, config, signal, params, n_s, n_p, chans))
    return total


def genuine_coincidence(config: RouterConfig, signal, params: SourceParams,
                        port: str = "OUT1", projection=None) -> float:
    """Coincidence probability given exactly one signal photon and one pair."""
    signal = SignalQubit.from_any(signal)
    if params.distinguishable:
        return classical_coincidence(config, signal, params, 1, 1, port, projection)
    layout = build_router(config)
    state = evolve(input_state(signal, config.control.phi, config.control2_shift), layout.before)
    ff = feed_forward(state, layout.branches, after=layout.after)
    detect = DetectionPattern((Detector(port, projection),))
    total = sum(ff.branch_probabilities[name] * postselect(s, detect).probability
                for name, s in ff.branch_states.items())
    eta = params.eta
    return total * eta["S"] * eta["C1"] * eta["C2"] * eta[port]


@dataclass(frozen=True)
class AccidentalEstimate:
    accidental: dict[str, float]   # per pulse, per port
    genuine: dict[str, float]      # per pulse, per port
    by_configuration: dict[tuple[int, int], dict[str, float]]

    @property
    def fraction(self) -> float:
        acc = sum(self.accidental.values())
        tot = acc + sum(self.genuine.values())
        return acc / tot if tot > 0 else 0.0

    def port_fraction(self, port: str) -> float:
        tot = self.accidental[port] + self.genuine[port]
        return self.accidental[port] / tot if tot > 0 else 0.0


def accidental_rate(params: SourceParams, router: RouterConfig, signal="H", projections=None,
                    cutoff: int = DEFAULT_CUTOFF) -> AccidentalEstimate:
    """Per-pulse accidental and genuine three-fold probabilities for each port.

    ``projections`` maps a port name to the polarization analysed there
    (``None`` means no polarizer).
    """
    if router.variant is not Variant.FULL:
        raise ValueError("accidental estimates use the full router")
    projections = dict(projections or {})
    signal = SignalQubit.from_any(signal)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dist = photon_number_distribution(params, cutoff)
    u = build_router(router).circuit.single_particle_matrix()
    ports = ("OUT1", "OUT2")
    acc = dict.fromkeys(ports, 0.0)
    by_cfg = {}
    for (n_s, n_p), p in dist.probabilities.items():
        if (n_s, n_p) == (1, 1) or n_s + 2 * n_p < 3 or p == 0:
            continue
        hits = {}
        for port in ports:
            hit = 0.0
            for ctrl in _accepted_controls(router):
                chans = _channels(router, params, port, ctrl, projections.get(port))
                hit += fire_probability(_photon_table(u, router, signal, params, n_s, n_p, chans))
            hits[port] = p * hit
            acc[port] += p * hit
        by_cfg[(n_s, n_p)] = hits
    p11 = dist.probabilities.get((1, 1), 0.0)
    gen = {port: p11 * genuine_coincidence(router, signal, params, port, projections.get(port))
           for port in ports}
    return AccidentalEstimate(acc, gen, by_cfg)


def distinguishable_coherence_scan(signal, bd4_phases, control="BALANCED", projection="D",
                                   params: SourceParams | None = None):
    """CC1 probability per BD4 tilt when the three photons do not interfere.

    Every photon is propagated on its own and only detection probabilities
    combine, which is the detuned normalization regime.
    """
    params = params or SourceParams()
    out = []
    for tilt in bd4_phases:
        cfg = RouterConfig(control=ControlSetting.of(control), variant=Variant.COHERENCE_TEST,
                           bd4_tilt=float(tilt), coherence_projection=projection)
        out.append(classical_coincidence(cfg, signal, params, 1, 1, "OUT1", projection))
    return np.array(out)


def accidental_fraction(params: SourceParams, router: RouterConfig | None = None, signal="H",
                        projections=None) -> float:
    return accidental_rate(params, router or RouterConfig(), signal, projections).fraction


def calibrate_efficiency(params: SourceParams, target_accidental_fraction: float,
                         router: RouterConfig | None = None, signal="H",
                         channels=CHANNELS, bracket=(1e-3, 1.0), tol: float = 1e-4) -> float:
    """Efficiency ``eta`` (applied to ``channels``) giving the target accidental fraction.

    The fraction falls monotonically as the efficiency rises, because genuine
    events need one more detected photon than the dominant two-pair
    accidentals. Raises :class:`CalibrationError` when the target lies outside
    the bracket.
    """
    if not 0 < target_accidental_fraction < 1:
        raise ValueError("target fraction must lie in (0, 1)")
    router = router or RouterConfig()
    unknown = set(channels) - set(CHANNELS)
    if unknown:
        raise ValueError(f"unknown channels {sorted(unknown)}")

    def residual(eta: float) -> float:
        eff = dict(params.eta)
        eff.update(dict.fromkeys(channels, eta))
        return accidental_fraction(params.with_eta(eff), router, signal) - target_accidental_fraction

    lo, hi = bracket
    f_lo, f_hi = residual(lo), residual(hi)
    if abs(f_hi) <= tol:
        return hi
    if abs(f_lo) <= tol:
        return lo
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"target {target_accidental_fraction} unreachable: fraction spans "
            f"[{f_hi + target_accidental_fraction:.4g}, {f_lo + target_accidental_fraction:.4g}] "
            f"for eta in [{lo}, {hi}]")
    return float(optimize.brentq(residual, lo, hi, xtol=1e-12, rtol=1e-12))


# -- simulated count records -------------------------------------------------

@dataclass(frozen=True)
class CountRecord:
    cc1: int
    cc2: int
    accidental_cc1: float
    accidental_cc2: float
    duration: float
    regime: str = "interfering"

    def __post_init__(self):
        if self.regime not in ("interfering", "detuned"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.cc1 < 0 or self.cc2 < 0 or int(self.cc1) != self.cc1 or int(self.cc2) != self.cc2:
            raise ValueError("coincidence counts must be non-negative integers")
        if self.accidental_cc1 < 0 or self.accidental_cc2 < 0:
            raise ValueError("accidental estimates must be non-negative")

    CSV_COLUMNS = ("regime", "duration_s", "cc1", "cc2", "acc1", "acc2")

    def to_row(self) -> dict:
        return {"regime": self.regime, "duration_s": self.duration, "cc1": self.cc1,
                "cc2": self.cc2, "acc1": self.accidental_cc1, "acc2": self.accidental_cc2}


def _per_pulse(params: SourceParams, result: RouterResult, projections,
               include_accidentals: bool) -> tuple[dict[str, float], dict[str, float]]:
    projections = dict(projections or {})
    p11 = float(stats.poisson.pmf(1, params.mu_signal)) * thermal_pmf(1, params.p_pair)
    ports = ("OUT1", "OUT2")
    if params.distinguishable:
        genuine = {p: p11 * classical_coincidence(result.config, result.signal, params, 1, 1, p,
                                                  projections.get(p)) for p in ports}
    else:
        genuine = {}
        eta = params.eta
        for k, port in enumerate(ports, start=1):
            q = result.port_qubit(k)
            pk = result.p1 if k == 1 else result.p2
            proj = projections.get(port)
            if q is not None and proj is not None:
                e = named_polarization(proj) if isinstance(proj, str) else proj
                pk *= abs(e[0].conjugate() * q[0] + e[1].conjugate() * q[1]) ** 2
            genuine[port] = p11 * result.success_probability * pk * eta["S"] * eta["C1"] * eta["C2"] * eta[port]
    if include_accidentals:
        acc = accidental_rate(params, result.config, result.signal, projections).accidental
    else:
        acc = dict.fromkeys(ports, 0.0)
    return genuine, acc


def expected_counts(params: SourceParams, result: RouterResult, projections=None,
                    include_accidentals: bool = True) -> tuple[dict[str, float], dict[str, float]]:
    """Expected genuine and accidental three-folds per port over ``params.duration``."""
    genuine, acc = _per_pulse(params, result, projections, include_accidentals)
    pulses = params.rep_rate * params.duration
    return ({p: v * pulses for p, v in genuine.items()}, {p: v * pulses for p, v in acc.items()})


def _draw(genuine, acc, seed, duration: float, regime: str) -> CountRecord:
    rng = np.random.default_rng(seed)
    cc = [int(rng.poisson(genuine[p])) + int(rng.poisson(acc[p])) for p in ("OUT1", "OUT2")]
    return CountRecord(cc[0], cc[1], acc["OUT1"], acc["OUT2"], duration, regime)


def simulate_counts(params: SourceParams, result: RouterResult, projections=None, seed: int = 0,
                    include_accidentals: bool = True) -> CountRecord:
    """Poisson draw of genuine plus accidental three-folds; bit-reproducible per seed."""
    genuine, acc = expected_counts(params, result, projections, include_accidentals)
    return _draw(genuine, acc, seed, params.duration, "detuned" if params.distinguishable else "interfering")


def simulate_interleaved(params: SourceParams, result: RouterResult, total_duration: float,
                         interval: float = 120.0, projections=None, seed: int = 0,
                         include_accidentals: bool = True) -> list[CountRecord]:
    """Alternate interfering and detuned intervals, each with its own substream."""
    n = max(1, int(math.ceil(total_duration / interval)))
    streams = np.random.SeedSequence(seed).spawn(n)
    rates = {}
    for detuned in (False, True):
        rates[detuned] = _per_pulse(replace(params, distinguishable=detuned), result, projections,
                                    include_accidentals)
    records = []
    elapsed = 0.0
    for i, ss in enumerate(streams):
        dur = min(interval, total_duration - elapsed) if total_duration > 0 else 0.0
        elapsed += dur
        detuned = bool(i % 2)
        pulses = params.rep_rate * dur
        genuine, acc = ({p: v * pulses for p, v in d.items()} for d in rates[detuned])
        records.append(_draw(genuine, acc, ss, dur, "detuned" if detuned else "interfering"))
    return records
