import cmath
import math

import numpy as np
import pytest

from qrouter.circuit import (Branch, CircuitSpec, DetectionPattern, Detector, InconsistentCorrectionError,
                             control_state, evolve, feed_forward, named_polarization, postselect, ppg,
                             ppg_branches, ppg_elements, project, signal_qubit)
from qrouter.elements import hadamard, hwp, pbs, phase_shifter
from qrouter.fock import ModeLabel, PhotonicState, inner_product, path_modes, tensor

R2 = 1 / math.sqrt(2)
D = (R2, R2)


def same_qubit(a, b, tol=1e-12):
    return abs(abs(np.vdot(a, b)) - 1) < tol


class TestCircuitSpec:
    def test_unknown_modes_rejected(self):
        with pytest.raises(ValueError):
            CircuitSpec((pbs("a", "z"),), path_modes("a", "b"))

    def test_round_trip_and_matrix(self):
        c = CircuitSpec((hwp("a", 22.5), pbs("a", "b")), path_modes("a", "b"))
        again = CircuitSpec.from_dict(c.to_dict())
        np.testing.assert_allclose(again.single_particle_matrix(), c.single_particle_matrix())

    def test_evolve_embeds_smaller_registry(self):
        c = CircuitSpec((hwp("a", 45),), path_modes("a"))
        out = evolve(PhotonicState.single_photon("a", 1, 0), c)
        assert out.amplitude({ModeLabel("a", "V"): 1}) == pytest.approx(1)


class TestPostselect:
    def test_projection_absorbs_photon(self):
        s = tensor(PhotonicState.single_photon("a", 1, 0), PhotonicState.single_photon("b", *D))
        res = postselect(s, DetectionPattern((Detector("b", "D"),)))
        assert res.probability == pytest.approx(1)
        assert res.state.photon_number == 1

    def test_orthogonal_projection_is_impossible(self):
        s = PhotonicState.single_photon("a", *D)
        res = postselect(s, DetectionPattern((Detector("a", "A"),)))
        assert res.state is None and res.probability == 0

    def test_any_polarization_keeps_photon(self):
        s = PhotonicState.single_photon("a", 0.6, 0.8)
        res = postselect(s, DetectionPattern((Detector("a"),)))
        assert res.state.photon_number == 1
        assert res.probability == pytest.approx(1)

    def test_threshold_detector_accepts_bunching(self):
        a = ModeLabel("a", "H")
        s = PhotonicState.fock(path_modes("a"), {a: 2})
        assert postselect(s, DetectionPattern((Detector("a", "H"),))).probability == 0
        assert postselect(s, DetectionPattern((Detector("a", "H", threshold=True),))).probability == pytest.approx(1)

    def test_vacuum_elsewhere(self):
        modes = path_modes("a", "b")
        s = PhotonicState(modes, {(1, 0, 0, 0): R2, (0, 0, 1, 0): R2})
        loose = postselect(s, DetectionPattern((Detector("a", threshold=True),)))
        strict = postselect(s, DetectionPattern((Detector("b"),), vacuum_elsewhere=True))
        assert loose.probability == pytest.approx(0.5)
        assert strict.probability == pytest.approx(0.5)

    def test_unknown_detector_path(self):
        with pytest.raises(KeyError):
            project(PhotonicState.single_photon("a", 1, 0), DetectionPattern((Detector("q", "H"),)))

    def test_duplicate_detectors(self):
        with pytest.raises(ValueError):
            DetectionPattern((Detector("a"), Detector("a", "H")))

    @pytest.mark.parametrize("basis", [("H", "V"), ("D", "A"), ("R", "L")])
    def test_outcomes_are_complete(self, basis):
        rng = np.random.default_rng(7)
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        b = rng.normal(size=2) + 1j * rng.normal(size=2)
        s = tensor(PhotonicState.single_photon("a", *(a / np.linalg.norm(a))),
                   PhotonicState.single_photon("b", *(b / np.linalg.norm(b))))
        total = sum(postselect(s, DetectionPattern((Detector("a", x), Detector("b", y)))).probability
                    for x in basis for y in basis)
        assert total == pytest.approx(1, abs=1e-12)

    def test_named_polarizations(self):
        assert named_polarization("R") == pytest.approx((R2, 1j * R2))
        with pytest.raises(ValueError):
            named_polarization("Q")


class TestPPG:
    def test_diagonal_phase_zero_and_pi(self):
        r0 = ppg(D, 0.0)
        assert r0.probability == pytest.approx(0.25)
        assert same_qubit(signal_qubit(r0.state, "S"), D)
        rpi = ppg(D, math.pi)
        assert same_qubit(signal_qubit(rpi.state, "S"), (R2, -R2))

    @pytest.mark.parametrize("phi", [0.0, 0.4, 1.9, math.pi, 5.0])
    def test_imprints_phase_on_v(self, phi):
        out = signal_qubit(ppg((0.6, 0.8), phi).state, "S")
        assert same_qubit(out, (0.6, 0.8 * cmath.exp(1j * phi)))

    def test_feedforward_doubles_success(self):
        res = ppg((0.6, 0.8j), 1.2, "feedforward_half")
        assert res.probability == pytest.approx(0.5)
        assert res.consistent
        assert res.branch_probabilities["H"] == pytest.approx(0.25)
        assert res.branch_probabilities["V"] == pytest.approx(0.25)

    @pytest.mark.parametrize("phi", [0.3, 2.2])
    def test_inverse_phase_restores_input(self, phi):
        q = (0.6, 0.8j)
        once = signal_qubit(ppg(q, phi).state, "S")
        back = signal_qubit(ppg(once, -phi).state, "S")
        assert same_qubit(back, q)

    def test_unknown_regime(self):
        with pytest.raises(ValueError):
            ppg(D, 0.0, "always")


class TestFeedForward:
    def _ppg_state(self, phi=0.9):
        sig = PhotonicState.single_photon("S", 0.6, 0.8)
        state = tensor(sig, control_state("C", phi))
        return evolve(state, CircuitSpec(tuple(ppg_elements("S", "C")), state.modes))

    def test_missing_correction_flagged(self):
        branches = ppg_branches("S", "C", "feedforward_half")
        bad = {"H": branches["H"], "V": Branch(branches["V"].pattern)}
        res = feed_forward(self._ppg_state(), bad)
        assert not res.consistent
        assert res.worst_mismatch > 1e-3
        with pytest.raises(InconsistentCorrectionError):
            feed_forward(self._ppg_state(), bad, strict=True)

    def test_output_correction_runs_after_continuation(self):
        branches = {"H": Branch(DetectionPattern((Detector("C", "H"),)),
                                output_correction=phase_shifter("S", "V", math.pi).unitary())}
        after = CircuitSpec((hadamard("S"),), path_modes("S", "C"))
        res = feed_forward(self._ppg_state(0.0), branches, after=after)
        # D-like input through HG becomes H-heavy; the flip afterwards only touches V
        plain = feed_forward(self._ppg_state(0.0), {"H": Branch(branches["H"].pattern)}, after=after)
        a, b = signal_qubit(res.state, "S"), signal_qubit(plain.state, "S")
        assert a[0] == pytest.approx(b[0]) and a[1] == pytest.approx(-b[1])

    def test_probabilities_sum_over_branches(self):
        res = feed_forward(self._ppg_state(), ppg_branches("S", "C", "feedforward_half"))
        assert res.probability == pytest.approx(sum(res.branch_probabilities.values()))
        assert inner_product(res.state, res.state) == pytest.approx(1)
