"""Few-photon Fock states over labeled (path, polarization) modes.

States are sparse maps from occupation tuples to complex amplitudes. The
occupation tuple is indexed by the state's mode registry, an ordered tuple of
:class:`ModeLabel`. Linear optics acts through creation-operator substitution
``a_i^dag -> sum_j U[j, i] a_j^dag``, which reproduces bosonic bunching exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_MODES = 32
DEFAULT_CUTOFF = 3
MAX_CUTOFF = 6
PRUNE_TOL = 1e-12
UNITARY_TOL = 1e-12


class Polarization(str, enum.Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True, order=True)
class ModeLabel:
    path: str
    pol: Polarization

    def __post_init__(self):
        object.__setattr__(self, "pol", Polarization(self.pol))

    def __str__(self):
        return f"{self.path}:{self.pol.value}"

    @classmethod
    def parse(cls, text: str) -> "ModeLabel":
        path, _, pol = text.rpartition(":")
        return cls(path, Polarization(pol))


def path_modes(*paths: str) -> tuple[ModeLabel, ...]:
    """H and V modes for each path, in order."""
    return tuple(ModeLabel(p, pol) for p in paths for pol in (Polarization.H, Polarization.V))


def _check_registry(modes: Sequence[ModeLabel]) -> tuple[ModeLabel, ...]:
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise ValueError("duplicate mode labels in registry")
    if len(modes) > MAX_MODES:
        raise ValueError(f"registry has {len(modes)} modes, limit is {MAX_MODES}")
    return modes


@dataclass(frozen=True)
class PhotonicState:
    """Pure state with a fixed total photon number.

    ``amplitudes`` maps occupation tuples (aligned with ``modes``) to complex
    amplitudes. Instances are immutable; every operation returns a new state.
    """

    modes: tuple[ModeLabel, ...]
    amplitudes: Mapping[tuple[int, ...], complex]
    cutoff: int = DEFAULT_CUTOFF
    photon_number: int = field(init=False)

    def __post_init__(self):
        modes = _check_registry(self.modes)
        object.__setattr__(self, "modes", modes)
        if not 0 < self.cutoff <= MAX_CUTOFF:
            raise ValueError(f"cutoff must be in [1, {MAX_CUTOFF}], got {self.cutoff}")
        amps = {}
        numbers = set()
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(modes):
                raise ValueError("occupation length does not match the mode registry")
            if any(n < 0 for n in occ):
                raise ValueError("negative occupation")
            numbers.add(sum(occ))
            amps[occ] = amps.get(occ, 0j) + complex(amp)
        if len(numbers) > 1:
            raise ValueError(f"mixed photon numbers {sorted(numbers)} in one state")
        n = numbers.pop() if numbers else 0
        if n > self.cutoff:
            raise ValueError(f"{n} photons exceed cutoff {self.cutoff}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "photon_number", n)

    # construction helpers

    @classmethod
    def _trusted(cls, modes, amplitudes, cutoff, photon_number) -> "PhotonicState":
        # skips validation for states built from an already valid one
        obj = object.__new__(cls)
        for name, value in (("modes", modes), ("amplitudes", amplitudes), ("cutoff", cutoff),
                            ("photon_number", photon_number)):
            object.__setattr__(obj, name, value)
        return obj

    @classmethod
    def vacuum(cls, modes: Sequence[ModeLabel], cutoff: int = DEFAULT_CUTOFF) -> "PhotonicState":
        modes = tuple(modes)
        return cls(modes, {(0,) * len(modes): 1.0}, cutoff)

    @classmethod
    def fock(cls, modes: Sequence[ModeLabel], counts: Mapping[ModeLabel, int],
             cutoff: int = DEFAULT_CUTOFF) -> "PhotonicState":
        """Single Fock basis state with the given per-mode counts."""
        modes = tuple(modes)
        index = {m: i for i, m in enumerate(modes)}
        occ = [0] * len(modes)
        for mode, n in counts.items():
            if mode not in index:
                raise KeyError(f"unknown mode {mode}")
            occ[index[mode]] = n
        return cls(modes, {tuple(occ): 1.0}, cutoff)

    @classmethod
    def single_photon(cls, path: str, h: complex, v: complex,
                      cutoff: int = DEFAULT_CUTOFF) -> "PhotonicState":
        """One photon on ``path`` with polarization ``h|H> + v|V>``."""
        return cls(path_modes(path), {(1, 0): h, (0, 1): v}, cutoff).pruned()

    # queries

    def index(self, mode: ModeLabel) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(f"unknown mode {mode}") from None

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, counts: Mapping[ModeLabel, int]) -> complex:
        occ = [0] * len(self.modes)
        for mode, n in counts.items():
            occ[self.index(mode)] = n
        return self.amplitudes.get(tuple(occ), 0j)

    def occupation_map(self, occ: tuple[int, ...]) -> dict[ModeLabel, int]:
        return {m: n for m, n in zip(self.modes, occ) if n}

    def paths(self) -> list[str]:
        seen = []
        for m in self.modes:
            if m.path not in seen:
                seen.append(m.path)
        return seen

    def __len__(self):
        return len(self.amplitudes)

    # transformations

    def pruned(self, tol: float = PRUNE_TOL) -> "PhotonicState":
        amps = {k: a for k, a in self.amplitudes.items() if abs(a) >= tol}
        if not amps:
            return _empty(self)
        return PhotonicState._trusted(self.modes, amps, self.cutoff, self.photon_number)

    def normalize(self) -> "PhotonicState":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return PhotonicState._trusted(self.modes, {k: a / nrm for k, a in self.amplitudes.items()},
                                      self.cutoff, self.photon_number)

    def scaled(self, factor: complex) -> "PhotonicState":
        return PhotonicState._trusted(self.modes, {k: a * complex(factor) for k, a in self.amplitudes.items()},
                                      self.cutoff, self.photon_number)

    def with_cutoff(self, cutoff: int) -> "PhotonicState":
        return PhotonicState(self.modes, self.amplitudes, cutoff)

    def embed(self, modes: Sequence[ModeLabel]) -> "PhotonicState":
        """Re-express the state over a larger registry, extra modes empty."""
        modes = _check_registry(modes)
        missing = set(self.modes) - set(modes)
        if missing:
            raise ValueError(f"target registry lacks modes {sorted(map(str, missing))}")
        pos = [modes.index(m) for m in self.modes]
        amps = {}
        for occ, a in self.amplitudes.items():
            new = [0] * len(modes)
            for p, n in zip(pos, occ):
                new[p] = n
            amps[tuple(new)] = a
        return PhotonicState(modes, amps, self.cutoff)

    def vector(self, basis: Sequence[tuple[int, ...]]) -> np.ndarray:
        return np.array([self.amplitudes.get(tuple(b), 0j) for b in basis], dtype=complex)


def _empty(state: PhotonicState) -> PhotonicState:
    # zero vector; photon number is kept only implicitly
    return PhotonicState(state.modes, {}, state.cutoff)


@dataclass(frozen=True)
class ModeUnitary:
    """Single-particle unitary acting on an ordered subset of modes.

    Column ``i`` of ``matrix`` is the image of ``modes[i]``.
    """

    modes: tuple[ModeLabel, ...]
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        modes = _check_registry(self.modes)
        mat = np.array(self.matrix, dtype=complex)
        mat.setflags(write=False)
        if mat.shape != (len(modes), len(modes)):
            raise ValueError(f"matrix shape {mat.shape} does not match {len(modes)} modes")
        err = np.max(np.abs(mat.conj().T @ mat - np.eye(len(modes)))) if len(modes) else 0.0
        if err >= UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max deviation {err:.3g})")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "matrix", mat)

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        """Composition ``self @ other``: apply ``other`` first."""
        modes = list(self.modes) + [m for m in other.modes if m not in self.modes]
        return ModeUnitary(tuple(modes), _lift(self, modes) @ _lift(other, modes),
                           f"{self.name}*{other.name}")

    def inverse(self) -> "ModeUnitary":
        return ModeUnitary(self.modes, self.matrix.conj().T, f"{self.name}^-1")


def _lift(u: ModeUnitary, modes: Sequence[ModeLabel]) -> np.ndarray:
    idx = [modes.index(m) for m in u.modes]
    full = np.eye(len(modes), dtype=complex)
    full[np.ix_(idx, idx)] = u.matrix
    return full


def tensor(a: PhotonicState, b: PhotonicState) -> PhotonicState:
    """Product state over the concatenated (disjoint) registries."""
    overlap = set(a.modes) & set(b.modes)
    if overlap:
        raise ValueError(f"registries overlap on {sorted(map(str, overlap))}")
    cutoff = max(a.cutoff, b.cutoff, a.photon_number + b.photon_number)
    if cutoff > MAX_CUTOFF:
        raise ValueError(f"product has {cutoff} photons, above the {MAX_CUTOFF} limit")
    amps = {oa + ob: xa * xb for oa, xa in a.amplitudes.items() for ob, xb in b.amplitudes.items()}
    return PhotonicState(a.modes + b.modes, amps, cutoff)


def tensor_all(states: Iterable[PhotonicState]) -> PhotonicState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def apply_unitary(state: PhotonicState, u: ModeUnitary) -> PhotonicState:
    """Evolve ``state`` under the multi-photon action of ``u``."""
    try:
        idx = [state.modes.index(m) for m in u.modes]
    except ValueError:
        unknown = [str(m) for m in u.modes if m not in state.modes]
        raise KeyError(f"unitary acts on unknown modes {unknown}") from None
    mat = u.matrix
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.amplitudes.items():
        local = [occ[i] for i in idx]
        # expand prod_i (sum_j U[j,i] a_j^dag)^{n_i} one photon at a time
        terms: dict[tuple[int, ...], complex] = {(0,) * len(idx): amp / _sqrt_fact(local)}
        for i, n in enumerate(local):
            col = mat[:, i]
            nz = [j for j in range(len(idx)) if abs(col[j]) > 0]
            for _ in range(n):
                nxt: dict[tuple[int, ...], complex] = {}
                for key, c in terms.items():
                    for j in nz:
                        k = list(key)
                        k[j] += 1
                        k = tuple(k)
                        nxt[k] = nxt.get(k, 0j) + c * col[j]
                terms = nxt
        for key, c in terms.items():
            new = list(occ)
            for pos, n in zip(idx, key):
                new[pos] = n
            new = tuple(new)
            out[new] = out.get(new, 0j) + c * _sqrt_fact(key)
    return PhotonicState._trusted(state.modes, out, state.cutoff, state.photon_number).pruned()


def _sqrt_fact(counts: Iterable[int]) -> float:
    return math.sqrt(math.prod(math.factorial(n) for n in counts))


def inner_product(a: PhotonicState, b: PhotonicState) -> complex:
    """Hermitian inner product <a|b>."""
    if a.modes != b.modes:
        raise ValueError("states live on different mode registries")
    if a.amplitudes and b.amplitudes and a.photon_number != b.photon_number:
        return 0j
    keys = a.amplitudes.keys() & b.amplitudes.keys()
    total = sum((a.amplitudes[k].conjugate() * b.amplitudes[k] for k in keys), 0j)
    return complex(total)


def overlap(a: PhotonicState, b: PhotonicState) -> float:
    """Phase-insensitive overlap |<a|b>| of the normalized states."""
    return abs(inner_product(a, b)) / (a.norm() * b.norm())
