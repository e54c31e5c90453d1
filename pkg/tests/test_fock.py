import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import compositions, permanent_amplitude, random_unitary
from qrouter.fock import (ModeLabel, ModeUnitary, PhotonicState, Polarization, apply_unitary,
                          inner_product, overlap, path_modes, tensor)

A, B = ModeLabel("a", "H"), ModeLabel("b", "H")


def beamsplitter(a=A, b=B):
    r = 1 / math.sqrt(2)
    return ModeUnitary((a, b), [[r, r], [r, -r]], "BS")


class TestModeLabel:
    def test_parse_round_trip(self):
        m = ModeLabel.parse("S1:V")
        assert m == ModeLabel("S1", Polarization.V)
        assert str(m) == "S1:V"

    def test_path_modes_order(self):
        assert path_modes("x") == (ModeLabel("x", "H"), ModeLabel("x", "V"))


class TestPhotonicState:
    def test_vacuum(self):
        v = PhotonicState.vacuum((A, B))
        assert v.photon_number == 0
        assert v.norm() == pytest.approx(1.0)

    def test_mixed_photon_number_rejected(self):
        with pytest.raises(ValueError, match="mixed photon numbers"):
            PhotonicState((A, B), {(1, 0): 1, (1, 1): 1})

    def test_cutoff_enforced(self):
        with pytest.raises(ValueError, match="exceed cutoff"):
            PhotonicState.fock((A, B), {A: 2, B: 2}, cutoff=3)
        with pytest.raises(ValueError):
            PhotonicState.vacuum((A,), cutoff=7)

    def test_duplicate_modes_rejected(self):
        with pytest.raises(ValueError):
            PhotonicState.vacuum((A, A))

    def test_inner_product_d_r(self):
        d = PhotonicState.single_photon("s", 1 / math.sqrt(2), 1 / math.sqrt(2))
        r = PhotonicState.single_photon("s", 1 / math.sqrt(2), 1j / math.sqrt(2))
        assert inner_product(d, r) == pytest.approx((1 + 1j) / 2)
        assert inner_product(r, d) == pytest.approx((1 - 1j) / 2)

    def test_inner_product_registry_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(PhotonicState.vacuum((A,)), PhotonicState.vacuum((B,)))

    def test_embed_preserves_amplitudes(self):
        s = PhotonicState.single_photon("s", 0.6, 0.8)
        big = s.embed(path_modes("t", "s"))
        assert big.amplitude({ModeLabel("s", "V"): 1}) == pytest.approx(0.8)

    def test_tensor_disjoint_only(self):
        a = PhotonicState.fock((A,), {A: 1})
        b = PhotonicState.fock((B,), {B: 1})
        ab = tensor(a, b)
        assert ab.photon_number == 2 and ab.modes == (A, B)
        with pytest.raises(ValueError):
            tensor(a, a)


class TestApplyUnitary:
    def test_hong_ou_mandel(self):
        out = apply_unitary(PhotonicState.fock((A, B), {A: 1, B: 1}), beamsplitter())
        assert out.amplitude({A: 1, B: 1}) == pytest.approx(0, abs=1e-15)
        assert abs(out.amplitude({A: 2})) ** 2 == pytest.approx(0.5)
        assert abs(out.amplitude({B: 2})) ** 2 == pytest.approx(0.5)

    def test_identity(self):
        s = PhotonicState((A, B), {(2, 1): 0.6, (1, 2): 0.8j})
        out = apply_unitary(s, ModeUnitary((A, B), np.eye(2)))
        assert inner_product(s, out) == pytest.approx(1.0)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError, match="not unitary"):
            ModeUnitary((A, B), [[1, 1], [0, 1]])

    def test_unknown_mode(self):
        with pytest.raises(KeyError):
            apply_unitary(PhotonicState.vacuum((A,)), beamsplitter())

    def test_composition_matches_sequence(self):
        rng = np.random.default_rng(3)
        modes = path_modes("p", "q")
        u1 = ModeUnitary(modes, random_unitary(4, rng))
        u2 = ModeUnitary(modes, random_unitary(4, rng))
        s = PhotonicState(modes, {(1, 1, 1, 0): 0.6, (0, 0, 2, 1): 0.8})
        seq = apply_unitary(apply_unitary(s, u1), u2)
        comp = apply_unitary(s, u2 @ u1)
        assert overlap(seq, comp) == pytest.approx(1.0, abs=1e-12)
        assert inner_product(seq, comp) == pytest.approx(1.0, abs=1e-12)

    def test_inverse_undoes(self):
        rng = np.random.default_rng(4)
        modes = path_modes("p", "q")
        u = ModeUnitary(modes, random_unitary(4, rng))
        s = PhotonicState(modes, {(2, 0, 1, 0): 1.0})
        back = apply_unitary(apply_unitary(s, u), u.inverse())
        assert inner_product(s, back) == pytest.approx(1.0, abs=1e-12)

    def test_partial_unitary_leaves_other_modes(self):
        modes = (A, B, ModeLabel("c", "H"))
        s = PhotonicState(modes, {(1, 0, 1): 1.0})
        out = apply_unitary(s, beamsplitter())
        assert all(occ[2] == 1 for occ in out.amplitudes)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_permanent_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n_modes = int(rng.integers(2, 7))
        n_ph = int(rng.integers(1, 4))
        modes = tuple(ModeLabel(f"m{i}", "H") for i in range(n_modes))
        u = random_unitary(n_modes, rng)
        basis = list(compositions(n_ph, n_modes))
        n_in = basis[rng.integers(len(basis))]
        out = apply_unitary(PhotonicState(modes, {n_in: 1.0}), ModeUnitary(modes, u))
        for n_out in basis:
            assert out.amplitudes.get(n_out, 0j) == pytest.approx(
                permanent_amplitude(u, n_in, n_out), abs=1e-9)


@st.composite
def states_and_unitaries(draw):
    n_modes = draw(st.integers(2, 4))
    n_ph = draw(st.integers(0, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    modes = tuple(ModeLabel(f"m{i}", "H") for i in range(n_modes))
    basis = list(compositions(n_ph, n_modes))
    amps = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    state = PhotonicState(modes, dict(zip(basis, amps))).normalize()
    return state, ModeUnitary(modes, random_unitary(n_modes, rng))


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(states_and_unitaries())
    def test_norm_preserved(self, su):
        state, u = su
        assert apply_unitary(state, u).norm() == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(states_and_unitaries(), states_and_unitaries())
    def test_inner_product_invariant(self, su1, su2):
        a, u = su1
        b, _ = su2
        if a.modes != b.modes or a.photon_number != b.photon_number:
            return
        before = inner_product(a, b)
        after = inner_product(apply_unitary(a, u), apply_unitary(b, u))
        assert cmath.isclose(before, after, abs_tol=1e-10)
