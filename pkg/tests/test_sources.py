import math

import numpy as np
import pytest
from scipy.stats import poisson

from cvqt.fock import (
    PureState,
    TruncationWarning,
    annihilation,
    expectation,
    mix_ensemble,
    number_operator,
    trace_distance,
)
from cvqt.sources import (
    LaserSpec,
    SqueezeSpec,
    coherent_cutoff,
    coherent_state,
    fock_ensemble,
    fock_state,
    laser_density,
    laser_ensemble,
    pump_traced_pair,
    squeezed_cutoff,
    tmsv_ensemble,
    tmsv_phase_averaged,
    tmsv_pure,
)


def test_cutoff_rules():
    assert coherent_cutoff(1.0) == 17
    assert coherent_cutoff(2.0) == 26
    assert squeezed_cutoff(math.tanh(1)) == 34
    assert squeezed_cutoff(0.8) == 42
    assert squeezed_cutoff(0.0) == 1
    assert LaserSpec(1.0).cutoff == 17
    assert SqueezeSpec(0.8).cutoff == 42


def test_coherent_state_moments():
    psi = coherent_state(1.3, 0.7)
    assert abs(psi.norm_squared - 1) < 1e-8
    a = annihilation(psi.system.cutoffs[0])
    assert abs(expectation(psi, a) - 1.3 * np.exp(0.7j)) < 1e-7
    assert abs(expectation(psi, number_operator(psi.system.cutoffs[0])).real - 1.69) < 1e-6


def test_coherent_state_photon_statistics_are_poisson():
    psi = coherent_state(2.0, 1.1)
    n = np.arange(psi.system.dims[0])
    assert np.allclose(np.abs(psi.amplitudes) ** 2, poisson.pmf(n, 4.0), atol=1e-15)


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        coherent_state(3.0, 0.0, cutoff=5)
    with pytest.warns(TruncationWarning):
        tmsv_pure(0.9, 0.0, cutoff=5)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        coherent_state(-1.0)
    with pytest.raises(ValueError):
        tmsv_pure(1.0)
    with pytest.raises(ValueError):
        fock_state(4, 3)


def test_laser_density_matches_poisson():
    rho = laser_density(1.5)
    n = np.arange(rho.system.dims[0])
    assert np.allclose(np.diag(rho.matrix).real, poisson.pmf(n, 2.25), atol=1e-15)
    assert rho.max_offdiagonal() == 0


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
def test_laser_ensembles_give_same_density(alpha):
    target = laser_density(alpha)
    assert trace_distance(mix_ensemble(laser_ensemble(alpha)), target) < 1e-12
    assert trace_distance(mix_ensemble(fock_ensemble(alpha)), target) < 1e-12


def test_too_few_phases_leave_coherences():
    rho = mix_ensemble(laser_ensemble(1.0, count=4))
    # phase steps of pi/2 keep coherences between n and n + 4
    assert rho.max_offdiagonal() > 1e-3


def test_tmsv_pure_structure():
    eta = 0.5
    psi = tmsv_pure(eta, 0.3, cutoff=20)
    for n in range(4):
        expected = math.sqrt(1 - eta**2) * eta**n * np.exp(0.3j * n)
        assert abs(psi.amplitude((n, n)) - expected) < 1e-15
    assert abs(psi.amplitude((1, 2))) == 0


def test_tmsv_phase_average():
    avg = tmsv_phase_averaged(0.6)
    assert trace_distance(mix_ensemble(tmsv_ensemble(0.6)), avg) < 1e-12
    assert avg.max_offdiagonal() == 0


def test_pump_traced_pair_is_diagonal():
    c = np.array([0.6, 0.8j, 0.0])
    rho = pump_traced_pair(c)
    assert rho.system.cutoffs == (2, 2)
    expected = np.zeros(9)
    for m, cm in enumerate(c):
        expected[rho.system.index((m, m))] = abs(cm) ** 2
    assert np.allclose(rho.matrix, np.diag(expected), atol=1e-15)
    with pytest.raises(ValueError):
        pump_traced_pair([0.6, 0.6])


def test_fock_ensemble_members_are_number_states():
    ens = fock_ensemble(1.0)
    for _, psi in ens.members:
        assert isinstance(psi, PureState)
        assert np.count_nonzero(psi.amplitudes) == 1
