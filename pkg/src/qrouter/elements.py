"""Optical elements compiled to :class:`~qrouter.fock.ModeUnitary`.

Conventions
-----------
* Jones vectors are ``(H, V)``; an element matrix column is the image of a mode.
* Half-wave plate at fast-axis angle ``t``: ``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``.
* Quarter-wave plate at ``t``: ``R(-t) diag(1, i) R(t)``, with the global phase
  ``exp(-i pi/4)`` dropped, so that ``QWP(t)**4 == I`` exactly.
* Polarizing beam splitter: H transmits (keeps its path), V swaps paths and
  picks up a factor ``i``.
* Beam displacer: a lossless relabeling ``(in, H) -> (out_h, H)``,
  ``(in, V) -> (out_v, V)`` completed to a permutation by the reverse map, so the
  same element recombines when the beams run backwards.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .fock import ModeLabel, ModeUnitary, Polarization, path_modes

H, V = Polarization.H, Polarization.V
HADAMARD_ANGLE = math.pi / 8


class PlateKind(str, enum.Enum):
    HALF = "half"
    QUARTER = "quarter"


@dataclass(frozen=True)
class WavePlateSetting:
    kind: PlateKind
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PlateKind(self.kind))
        angle = float(self.angle)
        if not math.isfinite(angle):
            raise ValueError("wave plate angle must be finite")
        object.__setattr__(self, "angle", angle % math.pi)

    @classmethod
    def hwp_deg(cls, deg: float) -> "WavePlateSetting":
        return cls(PlateKind.HALF, math.radians(deg))

    @classmethod
    def qwp_deg(cls, deg: float) -> "WavePlateSetting":
        return cls(PlateKind.QUARTER, math.radians(deg))


def jones_matrix(setting: WavePlateSetting) -> np.ndarray:
    t = setting.angle
    if setting.kind is PlateKind.HALF:
        c, s = math.cos(2 * t), math.sin(2 * t)
        return np.array([[c, s], [s, -c]], dtype=complex)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c * c + 1j * s * s, (1 - 1j) * s * c],
                     [(1 - 1j) * s * c, s * s + 1j * c * c]], dtype=complex)


def waveplate_unitary(setting: WavePlateSetting, path: str = "S") -> ModeUnitary:
    return ModeUnitary(path_modes(path), jones_matrix(setting),
                       f"{setting.kind.value}WP({math.degrees(setting.angle):g})@{path}")


def hadamard_plate_unitary(path: str, angle: float = HADAMARD_ANGLE) -> ModeUnitary:
    """Half-wave plate used as a Hadamard gate (22.5 deg by default)."""
    return waveplate_unitary(WavePlateSetting(PlateKind.HALF, angle), path)


def pbs_unitary(path_a: str, path_b: str) -> ModeUnitary:
    if path_a == path_b:
        raise ValueError("PBS needs two distinct paths")
    modes = path_modes(path_a, path_b)  # aH, aV, bH, bV
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[2, 2] = 1
    m[3, 1] = m[1, 3] = 1j
    return ModeUnitary(modes, m, f"PBS({path_a},{path_b})")


def beam_displacer_unitary(input_path: str, out_h: str, out_v: str) -> ModeUnitary:
    if out_h == out_v:
        raise ValueError("beam displacer outputs must be distinct paths")
    pairs = []
    if out_h != input_path:
        pairs.append((ModeLabel(input_path, H), ModeLabel(out_h, H)))
    if out_v != input_path:
        pairs.append((ModeLabel(input_path, V), ModeLabel(out_v, V)))
    paths = list(dict.fromkeys([input_path, out_h, out_v]))
    modes = path_modes(*paths)
    perm = np.eye(len(modes), dtype=complex)
    for x, y in pairs:
        i, j = modes.index(x), modes.index(y)
        perm[[i, j]] = perm[[j, i]]
    return ModeUnitary(modes, perm, f"BD({input_path}->{out_h},{out_v})")


def phase_shifter_unitary(path: str, polarization: Polarization | str, phi: float) -> ModeUnitary:
    mode = ModeLabel(path, Polarization(polarization))
    return ModeUnitary((mode,), np.array([[np.exp(1j * phi)]]), f"PS({mode},{phi:g})")


def mirror_unitary(path: str, to_path: str | None = None) -> ModeUnitary:
    """Mirror: identity on polarization; optionally steers ``path`` onto ``to_path``."""
    if to_path is None or to_path == path:
        return ModeUnitary(path_modes(path), np.eye(2), f"M({path})")
    modes = path_modes(path, to_path)
    swap = np.zeros((4, 4), dtype=complex)
    swap[2, 0] = swap[3, 1] = swap[0, 2] = swap[1, 3] = 1
    return ModeUnitary(modes, swap, f"M({path}->{to_path})")


class ElementKind(str, enum.Enum):
    WAVEPLATE = "waveplate"
    PBS = "pbs"
    BEAM_DISPLACER = "beam_displacer"
    PHASE_SHIFTER = "phase_shifter"
    MIRROR = "mirror"
    HADAMARD_PLATE = "hadamard_plate"


_PARAMS = {
    ElementKind.WAVEPLATE: ({"path", "plate", "angle"}, set()),
    ElementKind.PBS: ({"path_a", "path_b"}, set()),
    ElementKind.BEAM_DISPLACER: ({"input_path", "out_h", "out_v"}, set()),
    ElementKind.PHASE_SHIFTER: ({"path", "polarization", "phi"}, set()),
    ElementKind.MIRROR: ({"path"}, {"to_path"}),
    ElementKind.HADAMARD_PLATE: ({"path"}, {"angle"}),
}


@dataclass(frozen=True)
class ElementSpec:
    """Declarative element; angles and phases in radians."""

    kind: ElementKind
    params: Mapping[str, Any] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        kind = ElementKind(self.kind)
        object.__setattr__(self, "kind", kind)
        required, optional = _PARAMS[kind]
        keys = set(self.params)
        if not required <= keys:
            raise ValueError(f"{kind.value} element missing parameters {sorted(required - keys)}")
        if keys - required - optional:
            raise ValueError(f"{kind.value} element got unknown parameters {sorted(keys - required - optional)}")
        object.__setattr__(self, "params", dict(self.params))

    def unitary(self) -> ModeUnitary:
        p = self.params
        k = self.kind
        if k is ElementKind.WAVEPLATE:
            u = waveplate_unitary(WavePlateSetting(p["plate"], p["angle"]), p["path"])
        elif k is ElementKind.HADAMARD_PLATE:
            u = hadamard_plate_unitary(p["path"], p.get("angle", HADAMARD_ANGLE))
        elif k is ElementKind.PBS:
            u = pbs_unitary(p["path_a"], p["path_b"])
        elif k is ElementKind.BEAM_DISPLACER:
            u = beam_displacer_unitary(p["input_path"], p["out_h"], p["out_v"])
        elif k is ElementKind.PHASE_SHIFTER:
            u = phase_shifter_unitary(p["path"], p["polarization"], p["phi"])
        else:
            u = mirror_unitary(p["path"], p.get("to_path"))
        return ModeUnitary(u.modes, u.matrix, self.label or u.name)

    @property
    def bound_modes(self) -> tuple[ModeLabel, ...]:
        return self.unitary().modes

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, **self.params}
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ElementSpec":
        d = dict(d)
        kind = d.pop("kind")
        label = d.pop("label", "")
        return cls(kind, d, label)


# shorthand constructors used by the router assembly

def hwp(path: str, deg: float, label: str = "") -> ElementSpec:
    return ElementSpec(ElementKind.WAVEPLATE, {"path": path, "plate": "half", "angle": math.radians(deg)}, label)


def qwp(path: str, deg: float, label: str = "") -> ElementSpec:
    return ElementSpec(ElementKind.WAVEPLATE, {"path": path, "plate": "quarter", "angle": math.radians(deg)}, label)


def hadamard(path: str, label: str = "", deg: float | None = None) -> ElementSpec:
    params = {"path": path}
    if deg is not None:
        params["angle"] = math.radians(deg)
    return ElementSpec(ElementKind.HADAMARD_PLATE, params, label)


def pbs(path_a: str, path_b: str, label: str = "") -> ElementSpec:
    return ElementSpec(ElementKind.PBS, {"path_a": path_a, "path_b": path_b}, label)


def beam_displacer(input_path: str, out_h: str, out_v: str, label: str = "") -> ElementSpec:
    return ElementSpec(ElementKind.BEAM_DISPLACER,
                       {"input_path": input_path, "out_h": out_h, "out_v": out_v}, label)


def phase_shifter(path: str, polarization: str, phi: float, label: str = "") -> ElementSpec:
    return ElementSpec(ElementKind.PHASE_SHIFTER,
                       {"path": path, "polarization": Polarization(polarization).value, "phi": phi}, label)


def mirror(path: str, to_path: str | None = None, label: str = "") -> ElementSpec:
    params = {"path": path}
    if to_path is not None:
        params["to_path"] = to_path
    return ElementSpec(ElementKind.MIRROR, params, label)
