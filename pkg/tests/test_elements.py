import math

import numpy as np
import pytest

from qrouter.elements import (ElementKind, ElementSpec, WavePlateSetting, beam_displacer,
                              beam_displacer_unitary, hadamard_plate_unitary, hwp, jones_matrix,
                              mirror_unitary, pbs, pbs_unitary, phase_shifter_unitary, qwp)
from qrouter.fock import ModeLabel, PhotonicState, apply_unitary, inner_product, path_modes

R2 = 1 / math.sqrt(2)


def jones(setting, vec):
    return jones_matrix(setting) @ np.asarray(vec, dtype=complex)


class TestWavePlates:
    def test_hwp_22_5_makes_diagonal(self):
        np.testing.assert_allclose(jones(WavePlateSetting.hwp_deg(22.5), (1, 0)), (R2, R2), atol=1e-15)
        np.testing.assert_allclose(jones(WavePlateSetting.hwp_deg(22.5), (0, 1)), (R2, -R2), atol=1e-15)

    def test_hwp_45_swaps(self):
        np.testing.assert_allclose(jones(WavePlateSetting.hwp_deg(45), (1, 0)), (0, 1), atol=1e-15)

    def test_hadamard_squares_to_identity(self):
        h = hadamard_plate_unitary("s").matrix
        np.testing.assert_allclose(h @ h, np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("deg", [0, 13, 45, 100])
    def test_qwp_fourth_power_identity(self, deg):
        q = jones_matrix(WavePlateSetting.qwp_deg(deg))
        np.testing.assert_allclose(np.linalg.matrix_power(q, 4), np.eye(2), atol=1e-14)

    def test_qwp_zero_is_quarter_retarder(self):
        np.testing.assert_allclose(jones_matrix(WavePlateSetting.qwp_deg(0)), np.diag([1, 1j]), atol=1e-15)

    def test_qwp_diagonal_to_circular(self):
        out = jones(WavePlateSetting.qwp_deg(0), (R2, R2))
        np.testing.assert_allclose(out, (R2, 1j * R2), atol=1e-15)

    def test_angle_wraps_modulo_pi(self):
        a = jones_matrix(WavePlateSetting.hwp_deg(10))
        b = jones_matrix(WavePlateSetting.hwp_deg(190))
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestPBS:
    modes = path_modes("a", "b")

    def test_h_transmits_v_reflects(self):
        h_in = apply_unitary(PhotonicState.single_photon("a", 1, 0).embed(self.modes), pbs_unitary("a", "b"))
        assert h_in.amplitude({ModeLabel("a", "H"): 1}) == pytest.approx(1)
        v_in = apply_unitary(PhotonicState.single_photon("a", 0, 1).embed(self.modes), pbs_unitary("a", "b"))
        assert v_in.amplitude({ModeLabel("b", "V"): 1}) == pytest.approx(1j)

    def test_two_v_photons_pick_up_minus_sign(self):
        aV, bV = ModeLabel("a", "V"), ModeLabel("b", "V")
        out = apply_unitary(PhotonicState.fock(self.modes, {aV: 1, bV: 1}), pbs_unitary("a", "b"))
        assert out.amplitude({aV: 1, bV: 1}) == pytest.approx(-1)

    def test_hh_unchanged(self):
        aH, bH = ModeLabel("a", "H"), ModeLabel("b", "H")
        s = PhotonicState.fock(self.modes, {aH: 1, bH: 1})
        assert inner_product(s, apply_unitary(s, pbs_unitary("a", "b"))) == pytest.approx(1)

    def test_dd_coincidence_probability(self):
        # both photons diagonal: only HH and VV keep one photon per port
        s = PhotonicState.fock(self.modes, {ModeLabel("a", "H"): 1, ModeLabel("b", "H"): 1})
        plate = hadamard_plate_unitary("a") @ hadamard_plate_unitary("b")
        out = apply_unitary(apply_unitary(s, plate), pbs_unitary("a", "b"))
        p_coinc = sum(abs(c) ** 2 for occ, c in out.amplitudes.items() if occ[0] + occ[1] == 1)
        assert p_coinc == pytest.approx(0.5)

    def test_same_path_rejected(self):
        with pytest.raises(ValueError):
            pbs_unitary("a", "a")


class TestBeamDisplacer:
    def test_splits_polarizations(self):
        u = beam_displacer_unitary("in", "x", "y")
        d = PhotonicState.single_photon("in", R2, R2).embed(u.modes)
        out = apply_unitary(d, u)
        assert out.amplitude({ModeLabel("x", "H"): 1}) == pytest.approx(R2)
        assert out.amplitude({ModeLabel("y", "V"): 1}) == pytest.approx(R2)

    def test_involution(self):
        m = beam_displacer_unitary("in", "x", "y").matrix
        np.testing.assert_allclose(m @ m, np.eye(len(m)))

    def test_input_may_double_as_output(self):
        u = beam_displacer_unitary("in", "in", "y")
        assert len(u.modes) == 4

    def test_degenerate_outputs_rejected(self):
        with pytest.raises(ValueError):
            beam_displacer_unitary("in", "x", "x")


class TestPhaseAndMirror:
    def test_phase_shifter_only_touches_one_mode(self):
        u = phase_shifter_unitary("s", "V", math.pi / 3)
        assert u.modes == (ModeLabel("s", "V"),)
        assert u.matrix[0, 0] == pytest.approx(np.exp(1j * math.pi / 3))

    def test_mirror_identity_and_steering(self):
        np.testing.assert_allclose(mirror_unitary("s").matrix, np.eye(2))
        steer = mirror_unitary("s", "t")
        out = apply_unitary(PhotonicState.single_photon("s", 0.6, 0.8).embed(steer.modes), steer)
        assert out.amplitude({ModeLabel("t", "V"): 1}) == pytest.approx(0.8)


class TestElementSpec:
    def test_round_trip(self):
        for spec in (hwp("s", 22.5, "HG"), qwp("s", 45), pbs("a", "b"), beam_displacer("i", "x", "y")):
            again = ElementSpec.from_dict(spec.to_dict())
            assert again == spec
            np.testing.assert_allclose(again.unitary().matrix, spec.unitary().matrix)

    def test_missing_parameter(self):
        with pytest.raises(ValueError, match="missing"):
            ElementSpec(ElementKind.PBS, {"path_a": "a"})

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="unknown"):
            ElementSpec(ElementKind.MIRROR, {"path": "a", "tilt": 1})

    def test_bound_modes(self):
        assert set(pbs("a", "b").bound_modes) == set(path_modes("a", "b"))
