import math

import numpy as np
import pytest

from cvqt import gaussian
from cvqt.fock import annihilation, expectation, single_mode_operator
from cvqt.sources import tmsv_pure


@pytest.mark.parametrize("eta", [0.0, 0.2, 0.5, math.tanh(1), 0.9])
def test_unit_gain_fidelity_closed_form(eta):
    r = math.atanh(eta)
    f = gaussian.teleport_fidelity(1.0, 0.3, eta)
    assert abs(f - 1 / (1 + math.exp(-2 * r))) < 1e-12
    assert abs(f - (1 + eta) / 2) < 1e-12


@pytest.mark.parametrize("phase", [0.0, 1.0, math.pi, 4.0])
def test_matched_lo_makes_phase_irrelevant(phase):
    assert abs(gaussian.teleport_fidelity(1.0, 0.0, 0.5, phase) - 0.75) < 1e-12


def test_mismatched_lo_hurts():
    assert gaussian.teleport_fidelity(1.0, 0.0, 0.5, math.pi, lo_angle=-math.pi / 4) < 0.5


def test_tmsv_moments_match_fock_state():
    eta, phase = 0.5, 0.7
    psi = tmsv_pure(eta, phase, cutoff=40)
    a = annihilation(40)
    ops = []
    for mode in (0, 1):
        am = single_mode_operator(psi.system, a, mode)
        ops += [(am + am.conj().T) / math.sqrt(2), (am - am.conj().T) / (1j * math.sqrt(2))]
    fock_cov = np.array(
        [[expectation(psi, (p @ q + q @ p) / 2).real for q in ops] for p in ops]
    )
    _, cov = gaussian.tmsv_moments(eta, phase)
    assert np.allclose(fock_cov, cov, atol=1e-10)


def test_beam_splitter_map_is_symplectic():
    s = gaussian.beam_splitter_map(0.6, 0.8)
    omega = np.kron(np.eye(2), np.array([[0, 1], [-1, 0]]))
    assert np.allclose(s @ omega @ s.T, omega)


def test_overlap_of_identical_coherent_states():
    mu, cov = gaussian.coherent_moments(1.0, 0.2)
    assert abs(gaussian.overlap_fidelity(mu, cov, mu, cov) - 1) < 1e-14
    mu2, _ = gaussian.coherent_moments(1.5, 0.2)
    assert abs(gaussian.overlap_fidelity(mu, cov, mu2, cov) - math.exp(-0.25)) < 1e-14
