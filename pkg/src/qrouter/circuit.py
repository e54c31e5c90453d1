"""Element-by-element evolution, post-selection and feed-forward branching."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .elements import ElementSpec, hadamard, pbs, phase_shifter
from .fock import (ModeLabel, ModeUnitary, PhotonicState, Polarization, apply_unitary,
                   inner_product, path_modes, tensor)

H, V = Polarization.H, Polarization.V

# Control-side Hadamard plate angle (deg). With the i-on-reflection PBS, a
# -22.5 deg plate followed by an H projection imprints +phi on the signal V
# component; a +22.5 deg plate would imprint phi + pi.
CONTROL_PLATE_DEG = 157.5

PHASE_TOL = 1e-9


class InconsistentCorrectionError(RuntimeError):
    """Feed-forward branches disagree after their corrections."""


@dataclass(frozen=True)
class CircuitSpec:
    elements: tuple[ElementSpec, ...]
    registry: tuple[ModeLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "registry", tuple(self.registry))
        known = set(self.registry)
        for el in self.elements:
            unknown = [str(m) for m in el.bound_modes if m not in known]
            if unknown:
                raise ValueError(f"element {el.label or el.kind.value} binds unregistered modes {unknown}")

    @cached_property
    def unitaries(self) -> tuple[ModeUnitary, ...]:
        return tuple(el.unitary() for el in self.elements)

    @cached_property
    def transfer(self) -> ModeUnitary:
        """The whole circuit as one unitary over the registry."""
        return ModeUnitary(self.registry, self.single_particle_matrix(), "circuit")

    def labels(self) -> list[str]:
        return [u.name for u in self.unitaries]

    def single_particle_matrix(self) -> np.ndarray:
        """Full registry-sized transfer matrix, columns are input modes."""
        n = len(self.registry)
        total = np.eye(n, dtype=complex)
        for u in self.unitaries:
            idx = [self.registry.index(m) for m in u.modes]
            step = np.eye(n, dtype=complex)
            step[np.ix_(idx, idx)] = u.matrix
            total = step @ total
        return total

    def then(self, other: "CircuitSpec") -> "CircuitSpec":
        if set(other.registry) != set(self.registry):
            raise ValueError("cannot chain circuits over different registries")
        return CircuitSpec(self.elements + other.elements, self.registry)

    def to_dict(self) -> dict:
        return {"registry": [str(m) for m in self.registry],
                "elements": [e.to_dict() for e in self.elements]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CircuitSpec":
        return cls(tuple(ElementSpec.from_dict(e) for e in d["elements"]),
                   tuple(ModeLabel.parse(m) for m in d["registry"]))


def evolve(state: PhotonicState, circuit: CircuitSpec) -> PhotonicState:
    if set(state.modes) != set(circuit.registry):
        raise ValueError("state registry does not match the circuit registry")
    if state.modes != circuit.registry:
        state = state.embed(circuit.registry)
    if not circuit.elements:
        return state
    return apply_unitary(state, circuit.transfer)


# -- detection ---------------------------------------------------------------

def _as_projection(proj) -> tuple[complex, complex] | None:
    if proj is None or (isinstance(proj, str) and proj.lower() == "any"):
        return None
    if isinstance(proj, str):
        return named_polarization(proj)
    h, v = (complex(x) for x in proj)
    nrm = math.hypot(abs(h), abs(v))
    if abs(nrm - 1) > 1e-12:
        raise ValueError(f"projection ({h}, {v}) is not normalized")
    return h, v


_S2 = 1 / math.sqrt(2)
POLARIZATION_STATES = {
    "H": (1 + 0j, 0j),
    "V": (0j, 1 + 0j),
    "D": (_S2 + 0j, _S2 + 0j),
    "A": (_S2 + 0j, -_S2 + 0j),
    "R": (_S2 + 0j, 1j * _S2),
    "L": (_S2 + 0j, -1j * _S2),
}


def named_polarization(name: str) -> tuple[complex, complex]:
    try:
        return POLARIZATION_STATES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown polarization {name!r}; expected one of {list(POLARIZATION_STATES)}") from None


def orthogonal(qubit: tuple[complex, complex]) -> tuple[complex, complex]:
    h, v = qubit
    return -v.conjugate(), h.conjugate()


@dataclass(frozen=True)
class Detector:
    """One detector on a spatial path.

    ``projection`` is a normalized ``(h, v)`` polarization (or a name like
    ``"D"``) selected by a polarizer in front of the detector, or ``None`` to
    count photons of any polarization. Photon-number-resolving detectors
    (``threshold=False``) require exactly one photon; bucket detectors fire on
    one or more.
    """

    path: str
    projection: tuple[complex, complex] | None = None
    threshold: bool = False

    def __post_init__(self):
        object.__setattr__(self, "projection", _as_projection(self.projection))

    def to_dict(self) -> dict:
        proj = None if self.projection is None else [[p.real, p.imag] for p in self.projection]
        return {"path": self.path, "projection": proj, "threshold": self.threshold}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Detector":
        proj = d.get("projection")
        if isinstance(proj, list):
            proj = tuple(complex(*p) if isinstance(p, list) else complex(p) for p in proj)
        return cls(d["path"], proj, bool(d.get("threshold", False)))


@dataclass(frozen=True)
class DetectionPattern:
    detectors: tuple[Detector, ...]
    vacuum_elsewhere: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        paths = [d.path for d in self.detectors]
        if len(set(paths)) != len(paths):
            raise ValueError("two detectors on the same path")

    @property
    def paths(self) -> list[str]:
        return [d.path for d in self.detectors]


@dataclass(frozen=True)
class PostselectResult:
    """Conditional state (normalized, ``None`` if impossible) and its probability."""

    state: PhotonicState | None
    probability: float


def _basis_change(projection: tuple[complex, complex]) -> np.ndarray:
    # maps the projection mode onto the H slot and its orthogonal onto V
    e = np.array(projection)
    f = np.array(orthogonal(projection))
    return np.vstack([e.conj(), f.conj()])


def project(state: PhotonicState, pattern: DetectionPattern) -> PhotonicState:
    """Unnormalized conditional state for ``pattern``.

    Polarization-projected exact detectors absorb their photon (the returned
    state has fewer photons); ``any``-polarization and bucket detectors leave
    the photons in place and only restrict the occupation.
    """
    for det in pattern.detectors:
        modes = path_modes(det.path)
        missing = [str(m) for m in modes if m not in state.modes]
        if missing:
            raise KeyError(f"detector on unknown modes {missing}")
    for det in pattern.detectors:
        ih, iv = state.index(ModeLabel(det.path, H)), state.index(ModeLabel(det.path, V))
        if det.projection is not None:
            w = ModeUnitary(path_modes(det.path), _basis_change(det.projection))
            state = apply_unitary(state, w)
        amps = {}
        for occ, a in state.amplitudes.items():
            nh, nv = occ[ih], occ[iv]
            if det.projection is not None:
                ok = nh >= 1 if det.threshold else (nh == 1 and nv == 0)
            else:
                ok = nh + nv >= 1 if det.threshold else nh + nv == 1
            if not ok:
                continue
            if det.projection is not None and not det.threshold:
                occ = list(occ)
                occ[ih] = 0
                occ = tuple(occ)
            amps[occ] = a
        state = PhotonicState(state.modes, amps, state.cutoff)
        if det.projection is not None and det.threshold:
            state = apply_unitary(state, w.inverse())
    if pattern.vacuum_elsewhere:
        watched = set(pattern.paths)
        free = [i for i, m in enumerate(state.modes) if m.path not in watched]
        state = PhotonicState(state.modes, {o: a for o, a in state.amplitudes.items()
                                            if all(o[i] == 0 for i in free)}, state.cutoff)
    return state


def postselect(state: PhotonicState, pattern: DetectionPattern) -> PostselectResult:
    cond = project(state, pattern)
    prob = cond.norm() ** 2
    if prob < 1e-24:
        return PostselectResult(None, 0.0)
    return PostselectResult(cond.normalize(), prob)


# -- feed-forward ------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """Accepted detector outcome with its corrections.

    ``correction`` acts right after the detection; ``output_correction`` acts
    after the continuation circuit (e.g. a classical swap of output fibers).
    """

    pattern: DetectionPattern
    correction: ModeUnitary | None = None
    output_correction: ModeUnitary | None = None


@dataclass(frozen=True)
class FeedForwardResult:
    state: PhotonicState | None
    probability: float
    branch_probabilities: dict[str, float] = field(default_factory=dict)
    branch_states: dict[str, PhotonicState] = field(default_factory=dict)
    consistent: bool = True
    worst_mismatch: float = 0.0


def same_up_to_phase(a: PhotonicState, b: PhotonicState, tol: float = PHASE_TOL) -> bool:
    return 1 - abs(inner_product(a, b)) / (a.norm() * b.norm()) < tol


def feed_forward(state: PhotonicState, branches: Mapping[str, Branch],
                 after: CircuitSpec | None = None, strict: bool = False) -> FeedForwardResult:
    """Evaluate every accepted outcome exactly and merge the corrected branches.

    The total probability is the sum over branches. The run is consistent when
    all corrected branch states coincide up to a global phase.
    """
    probs: dict[str, float] = {}
    states: dict[str, PhotonicState] = {}
    for name, br in branches.items():
        res = postselect(state, br.pattern)
        probs[name] = res.probability
        if res.state is None:
            continue
        s = res.state
        if br.correction is not None:
            s = apply_unitary(s, br.correction)
        if after is not None:
            s = evolve(s, after)
        if br.output_correction is not None:
            s = apply_unitary(s, br.output_correction)
        states[name] = s
    worst = 0.0
    ref = next(iter(states.values()), None)
    for s in states.values():
        worst = max(worst, 1 - abs(inner_product(ref, s)))
    consistent = worst < PHASE_TOL
    if strict and not consistent:
        raise InconsistentCorrectionError(f"branch states differ (1-|overlap| = {worst:.3g})")
    return FeedForwardResult(ref, float(sum(probs.values())), probs, states, consistent, worst)


# -- programmable phase gate -------------------------------------------------

PPG_REGIMES = ("postselect_quarter", "feedforward_half")


def control_state(path: str, phi: float, cutoff: int = 3) -> PhotonicState:
    """Control photon ``(|H> + exp(i phi)|V>)/sqrt(2)`` on ``path``."""
    return PhotonicState.single_photon(path, _S2, _S2 * np.exp(1j * phi), cutoff)


def ppg_elements(signal_path: str, control_path: str) -> list[ElementSpec]:
    return [pbs(signal_path, control_path, label=f"PBS[{signal_path}|{control_path}]"),
            hadamard(control_path, label=f"HG[{control_path}]", deg=CONTROL_PLATE_DEG)]


def ppg_branches(signal_path: str, control_path: str, regime: str) -> dict[str, Branch]:
    if regime not in PPG_REGIMES:
        raise ValueError(f"unknown PPG regime {regime!r}")
    out = {"H": Branch(DetectionPattern((Detector(control_path, "H"),)))}
    if regime == "feedforward_half":
        flip = phase_shifter(signal_path, "V", math.pi).unitary()
        out["V"] = Branch(DetectionPattern((Detector(control_path, "V"),)), correction=flip)
    return out


def ppg(signal: tuple[complex, complex], phi: float, regime: str = "postselect_quarter",
        signal_path: str = "S", control_path: str = "C") -> FeedForwardResult:
    """Programmable phase gate: imprints ``phi`` on the signal's V amplitude.

    Succeeds with probability 1/4 when only the H control outcome is kept, or
    1/2 when the V outcome is also kept and corrected by ``V -> -V``.
    """
    if control_path == signal_path:
        raise ValueError("signal and control paths must differ")
    sig = PhotonicState.single_photon(signal_path, *signal)
    state = tensor(sig, control_state(control_path, phi))
    circ = CircuitSpec(tuple(ppg_elements(signal_path, control_path)), state.modes)
    state = evolve(state, circ)
    return feed_forward(state, ppg_branches(signal_path, control_path, regime))


def signal_qubit(state: PhotonicState, path: str) -> tuple[complex, complex]:
    """(H, V) amplitudes of a single photon on ``path`` with every other mode empty."""
    ih, iv = state.index(ModeLabel(path, H)), state.index(ModeLabel(path, V))
    h = v = 0j
    for occ, a in state.amplitudes.items():
        rest = sum(occ) - occ[ih] - occ[iv]
        if rest == 0 and occ[ih] == 1 and occ[iv] == 0:
            h += a
        elif rest == 0 and occ[iv] == 1 and occ[ih] == 0:
            v += a
    return h, v
