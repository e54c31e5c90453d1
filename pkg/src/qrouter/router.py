"""Assembly of the beam-displacer router and its coherence-test variant.

Layout (paths in brackets)::

    [S_IN] --BD1--> [S1] H part, [S2] V part
    HG on S1 (22.5 deg), HG on S2 (67.5 deg): both arms enter their PPG as |D>
    PBS1 [S1|C1], PBS2 [S2|C2]; control plates at 157.5 deg; C1, C2 detected
    HG3 on S1, HG4 on S2 (22.5 deg)
    BD3 merges (S1,H) + (S2,V) into [OUT1]; M1 steers it to the OUT1 port
    HWP 45 deg on S1 and S2, BD4 merges (S1,H) + (S2,V) into [OUT2]

Coherence-test variant: BD3 and M1 are absent. Both routed components stay
on S1 and pass the tilted BD4, which adds a relative phase to the V ray before
the beam exits at the OUT1 port.
"""

from __future__ import annotations

import cmath
import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import (Branch, CircuitSpec, DetectionPattern, Detector, control_state, evolve,
                      feed_forward, named_polarization, postselect, ppg_elements, signal_qubit)
from .elements import beam_displacer, hadamard, hwp, mirror, phase_shifter
from .fock import PhotonicState, path_modes, tensor_all

PATHS = ("S_IN", "S1", "S2", "C1", "C2", "OUT1", "OUT2")
REGISTRY = path_modes(*PATHS)


class Regime(str, enum.Enum):
    BASIC = "basic_1_16"
    SWAP = "swap_1_8"
    FEEDFORWARD = "feedforward_1_4"


class Variant(str, enum.Enum):
    FULL = "full"
    COHERENCE_TEST = "coherence_test"


NAMED_PHASES = {"OFF": 0.0, "ON": math.pi, "BALANCED": math.pi / 2}


@dataclass(frozen=True)
class SignalQubit:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
            raise ValueError(f"signal qubit ({a}, {b}) is not normalized")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def named(cls, name: str) -> "SignalQubit":
        return cls(*named_polarization(name))

    @classmethod
    def from_any(cls, spec) -> "SignalQubit":
        if isinstance(spec, SignalQubit):
            return spec
        if isinstance(spec, str):
            return cls.named(spec)
        return cls(*spec)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])


@dataclass(frozen=True)
class ControlSetting:
    phi: float
    named: str | None = None

    def __post_init__(self):
        if self.named is not None:
            name = self.named.upper()
            if name not in NAMED_PHASES:
                raise ValueError(f"unknown control name {self.named!r}")
            if not math.isclose(self.phi, NAMED_PHASES[name], abs_tol=0):
                raise ValueError(f"{name} binds phi = {NAMED_PHASES[name]}, got {self.phi}")
            object.__setattr__(self, "named", name)

    @classmethod
    def of(cls, value) -> "ControlSetting":
        if isinstance(value, ControlSetting):
            return value
        if isinstance(value, str):
            return cls(NAMED_PHASES[value.upper()], value.upper())
        return cls(float(value))

    @property
    def label(self) -> str:
        return self.named or f"{self.phi:.6g}"


@dataclass(frozen=True)
class RouterConfig:
    control: ControlSetting = field(default_factory=lambda: ControlSetting.of("OFF"))
    regime: Regime = Regime.BASIC
    variant: Variant = Variant.FULL
    control2_shift: str = "preparation"  # or "waveplate"
    compensate_output_phase: bool = False
    bd4_tilt: float = 0.0
    coherence_projection: str | tuple[complex, complex] = "D"

    def __post_init__(self):
        object.__setattr__(self, "control", ControlSetting.of(self.control))
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.control2_shift not in ("preparation", "waveplate"):
            raise ValueError("control2_shift must be 'preparation' or 'waveplate'")
        if self.variant is Variant.COHERENCE_TEST and self.regime is not Regime.BASIC:
            raise ValueError("the coherence test runs in the basic post-selection regime")

    def to_dict(self) -> dict:
        return {"phi": self.control.phi, "control": self.control.named, "regime": self.regime.value,
                "variant": self.variant.value}


@dataclass(frozen=True)
class RouterLayout:
    """Circuit split at the control detection, plus the accepted branches."""

    before: CircuitSpec
    after: CircuitSpec
    branches: dict[str, Branch]
    port_patterns: dict[str, DetectionPattern]

    @property
    def circuit(self) -> CircuitSpec:
        return self.before.then(self.after)


def _control_branches(regime: Regime) -> dict[str, Branch]:
    def pattern(p1, p2):
        return DetectionPattern((Detector("C1", p1), Detector("C2", p2)), name=p1 + p2)

    branches = {"HH": Branch(pattern("H", "H"))}
    if regime is Regime.SWAP:
        swap = mirror("OUT1", "OUT2", label="fiber switch").unitary()
        branches["VV"] = Branch(pattern("V", "V"), output_correction=swap)
    elif regime is Regime.FEEDFORWARD:
        flip1 = phase_shifter("S1", "V", math.pi, label="FF[S1]").unitary()
        flip2 = phase_shifter("S2", "V", math.pi, label="FF[S2]").unitary()
        branches["HV"] = Branch(pattern("H", "V"), correction=flip2)
        branches["VH"] = Branch(pattern("V", "H"), correction=flip1)
        branches["VV"] = Branch(pattern("V", "V"), correction=flip1 @ flip2)
    return branches


def build_router(config: RouterConfig) -> RouterLayout:
    """Element layout and accepted branches; the control phase lives in the input state."""
    return _layout(replace(config, control=ControlSetting(0.0)))


@functools.lru_cache(maxsize=64)
def _layout(config: RouterConfig) -> RouterLayout:
    before = [beam_displacer("S_IN", "S1", "S2", label="BD1"),
              hadamard("S1", label="HG[S1]"),
              hadamard("S2", label="HG[S2]", deg=67.5)]
    if config.control2_shift == "waveplate":
        before.append(hwp("C2", 0.0, label="HWP[C2] phi+pi"))
    before += ppg_elements("S1", "C1") + ppg_elements("S2", "C2")
    after = [hadamard("S1", label="HG3[S1]"), hadamard("S2", label="HG4[S2]")]
    if config.variant is Variant.FULL:
        after += [beam_displacer("OUT1", "S1", "S2", label="BD3"),
                  mirror("OUT1", label="M1"),
                  hwp("S1", 45, label="HWP[S1]"), hwp("S2", 45, label="HWP[S2]"),
                  beam_displacer("OUT2", "S1", "S2", label="BD4")]
        if config.compensate_output_phase:
            after += [phase_shifter("OUT2", "H", math.pi / 2, label="PS[OUT2,H]"),
                      phase_shifter("OUT2", "V", math.pi / 2, label="PS[OUT2,V]")]
        ports = {"CC1": DetectionPattern((Detector("OUT1"),), name="CC1"),
                 "CC2": DetectionPattern((Detector("OUT2"),), name="CC2")}
    else:
        after += [phase_shifter("S1", "V", config.bd4_tilt, label="BD4 tilt"),
                  mirror("S1", "OUT1", label="BD4 exit")]
        ports = {"CC1": DetectionPattern((Detector("OUT1", config.coherence_projection),), name="CC1")}
    return RouterLayout(CircuitSpec(tuple(before), REGISTRY), CircuitSpec(tuple(after), REGISTRY),
                        _control_branches(config.regime), ports)


def input_state(signal: SignalQubit, phi: float, control2_shift: str = "preparation") -> PhotonicState:
    """Signal on S_IN, control 1 at phi on C1, control 2 at phi + pi on C2."""
    phi2 = phi + math.pi if control2_shift == "preparation" else phi
    state = tensor_all([PhotonicState.single_photon("S_IN", signal.alpha, signal.beta),
                        control_state("C1", phi), control_state("C2", phi2)])
    return state.embed(REGISTRY)


@dataclass(frozen=True)
class RouterResult:
    signal: SignalQubit
    config: RouterConfig
    out1_qubit: tuple[complex, complex]
    out2_qubit: tuple[complex, complex]
    routing_amplitudes: tuple[complex, complex]
    success_probability: float
    p1: float
    p2: float
    state: PhotonicState
    branch_probabilities: dict[str, float]
    consistent: bool

    def port_qubit(self, port: int) -> tuple[complex, complex] | None:
        q = self.out1_qubit if port == 1 else self.out2_qubit
        nrm = math.hypot(abs(q[0]), abs(q[1]))
        if nrm < 1e-12:
            return None
        return q[0] / nrm, q[1] / nrm

    def port_fidelity(self, port: int) -> float:
        q = self.port_qubit(port)
        if q is None:
            return float("nan")
        return abs(np.vdot(self.signal.vector, np.array(q))) ** 2

    def to_dict(self) -> dict:
        return {
            "alpha_re": self.signal.alpha.real,
            "alpha_im": self.signal.alpha.imag,
            "beta_re": self.signal.beta.real,
            "beta_im": self.signal.beta.imag,
            **self.config.to_dict(),
            "success_probability": self.success_probability,
            "p1": self.p1,
            "p2": self.p2,
            "fidelity_out1": self.port_fidelity(1),
            "fidelity_out2": self.port_fidelity(2),
            "consistent": self.consistent,
        }


def routing_amplitudes(phi: float) -> tuple[complex, complex]:
    return complex(math.cos(phi / 2)), -1j * math.sin(phi / 2)


def run_router(signal, config: RouterConfig, strict: bool = True) -> RouterResult:
    signal = SignalQubit.from_any(signal)
    if config.variant is not Variant.FULL:
        raise ValueError("run_router needs the full variant; use coherence_scan for the test variant")
    layout = build_router(config)
    state = evolve(input_state(signal, config.control.phi, config.control2_shift), layout.before)
    ff = feed_forward(state, layout.branches, after=layout.after, strict=strict)
    if ff.state is None:
        raise RuntimeError("no accepted control outcome has nonzero probability")
    cond = ff.state
    p_port = {k: postselect(cond, pat).probability for k, pat in layout.port_patterns.items()}
    in_ports = sum(p_port.values())
    out1, out2 = signal_qubit(cond, "OUT1"), signal_qubit(cond, "OUT2")
    return RouterResult(
        signal=signal, config=config, out1_qubit=out1, out2_qubit=out2,
        routing_amplitudes=routing_amplitudes(config.control.phi),
        success_probability=ff.probability * in_ports,
        p1=p_port["CC1"] / in_ports, p2=p_port["CC2"] / in_ports,
        state=cond, branch_probabilities=ff.branch_probabilities, consistent=ff.consistent)


def analytic_output(signal, phi: float) -> PhotonicState:
    """``cos(phi/2) psi_OUT1 - i sin(phi/2) psi_OUT2`` over the router registry."""
    s = SignalQubit.from_any(signal)
    c1, c2 = routing_amplitudes(phi)
    zero = [0] * len(REGISTRY)
    amps = {}
    for path, c in (("OUT1", c1), ("OUT2", c2)):
        for k, a in enumerate((s.alpha, s.beta)):
            occ = zero.copy()
            occ[REGISTRY.index(path_modes(path)[k])] = 1
            amps[tuple(occ)] = c * a
    return PhotonicState(REGISTRY, amps).pruned()


def intermediate_state(signal, phi: float, control2_shift: str = "preparation") -> PhotonicState:
    """Signal state after both PPGs (both controls found in H), renormalized."""
    s = SignalQubit.from_any(signal)
    layout = build_router(RouterConfig(control=ControlSetting(phi), control2_shift=control2_shift))
    state = evolve(input_state(s, phi, control2_shift), layout.before)
    res = postselect(state, layout.branches["HH"].pattern)
    return res.state


def analytic_intermediate(signal, phi: float) -> PhotonicState:
    """``alpha/sqrt2 (H + e^{i phi} V)_S1 + beta/sqrt2 (H - e^{i phi} V)_S2``."""
    s = SignalQubit.from_any(signal)
    e = cmath.exp(1j * phi)
    r = 1 / math.sqrt(2)
    coeffs = {("S1", 0): s.alpha * r, ("S1", 1): s.alpha * r * e,
              ("S2", 0): s.beta * r, ("S2", 1): -s.beta * r * e}
    amps = {}
    for (path, k), c in coeffs.items():
        occ = [0] * len(REGISTRY)
        occ[REGISTRY.index(path_modes(path)[k])] = 1
        amps[tuple(occ)] = c
    return PhotonicState(REGISTRY, amps).pruned()


def coherence_scan(signal, bd4_phases: Sequence[float], control="BALANCED",
                   projection="D") -> np.ndarray:
    """CC1 probability per BD4 tilt phase in the coherence-test variant."""
    s = SignalQubit.from_any(signal)
    ctrl = ControlSetting.of(control)
    probs = []
    base = None
    for tilt in bd4_phases:
        cfg = RouterConfig(control=ctrl, variant=Variant.COHERENCE_TEST, bd4_tilt=float(tilt),
                           coherence_projection=projection)
        layout = build_router(cfg)
        if base is None:
            base = evolve(input_state(s, ctrl.phi), layout.before)
        ff = feed_forward(base, layout.branches, after=layout.after)
        p = ff.probability * postselect(ff.state, layout.port_patterns["CC1"]).probability
        probs.append(p)
    return np.array(probs)
