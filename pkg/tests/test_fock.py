import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqt.fock import (
    DensityOperator,
    Ensemble,
    ModeSystem,
    NotPositiveSemidefiniteError,
    PureState,
    ResourceLimitError,
    TruncationWarning,
    apply_unitary,
    dephase_fock,
    embed,
    entanglement_entropy,
    log_negativity,
    mix_ensemble,
    mixture_components,
    partial_trace,
    restrict,
    tensor_product,
    trace_distance,
    uhlmann_fidelity,
    von_neumann_entropy,
)


def random_pure(system, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=system.dim) + 1j * rng.normal(size=system.dim)
    return PureState(system, v / np.linalg.norm(v))


def random_mixed(system, seed, rank=3):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(system.dim, rank)) + 1j * rng.normal(size=(system.dim, rank))
    rho = g @ g.conj().T
    return DensityOperator(system, rho / np.trace(rho).real)


def bell():
    system = ModeSystem((1, 1))
    amps = np.zeros(4, dtype=complex)
    amps[system.index((0, 0))] = amps[system.index((1, 1))] = 1 / np.sqrt(2)
    return PureState(system, amps)


cutoff_lists = st.lists(st.integers(0, 3), min_size=1, max_size=3)


@given(cutoff_lists, st.data())
def test_index_occupation_roundtrip(cutoffs, data):
    system = ModeSystem(tuple(cutoffs))
    i = data.draw(st.integers(0, system.dim - 1))
    assert system.index(system.occupation(i)) == i
    assert tuple(system.occupations[i]) == system.occupation(i)


def test_index_is_row_major():
    system = ModeSystem((2, 3))
    assert system.dim == 12
    assert system.index((1, 2)) == 1 * 4 + 2
    with pytest.raises(ValueError):
        system.index((3, 0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 10_000))
def test_partial_trace_recovers_factors(c1, c2, seed):
    a = random_mixed(ModeSystem((c1,)), seed, rank=2)
    b = random_mixed(ModeSystem((c2,)), seed + 1, rank=2)
    joint = tensor_product(a, b)
    assert np.allclose(partial_trace(joint, [0]).matrix, a.matrix, atol=1e-13)
    assert np.allclose(partial_trace(joint, [1]).matrix, b.matrix, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_pure_and_density_partial_traces_agree(cutoff, seed):
    psi = random_pure(ModeSystem((cutoff, 2, 1)), seed)
    for keep in ([0], [1], [0, 2], [1, 2]):
        fast = partial_trace(psi, keep)
        slow = partial_trace(psi.density(), keep)
        assert np.allclose(fast.matrix, slow.matrix, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_unitary_preserves_trace_and_purity(seed):
    system = ModeSystem((2, 2))
    rho = random_mixed(system, seed)
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u = scipy.linalg.expm(1j * (h + h.conj().T))
    out = apply_unitary(rho, u, [1])
    assert abs(out.trace - 1) < 1e-12
    assert abs(out.purity() - rho.purity()) < 1e-12
    # acting on the flattened space with kron(I, U) is the same map
    full = np.kron(np.eye(3), u)
    assert np.allclose(out.matrix, full @ rho.matrix @ full.conj().T, atol=1e-12)


def test_apply_unitary_target_order():
    system = ModeSystem((1, 2))
    psi = random_pure(system, 3)
    swap_dims = ModeSystem((2, 1))
    u = np.eye(6)[np.random.default_rng(0).permutation(6)]
    direct = apply_unitary(psi, u, [1, 0])
    moved = PureState(swap_dims, psi.tensor().T)
    via_swap = apply_unitary(moved, u, [0, 1])
    assert np.allclose(direct.tensor(), via_swap.tensor().T)


def test_apply_unitary_rejects_non_unitary():
    psi = random_pure(ModeSystem((1,)), 0)
    with pytest.raises(ValueError):
        apply_unitary(psi, np.array([[1, 1], [0, 1]]), [0])
    with pytest.raises(ValueError):
        apply_unitary(psi, np.eye(3), [0])


def test_embed_restrict_roundtrip():
    rho = random_mixed(ModeSystem((1, 2)), 7)
    big = embed(rho, (3, 4))
    assert big.system.cutoffs == (3, 4)
    assert abs(big.trace - 1) < 1e-12
    assert np.allclose(restrict(big, (1, 2)).matrix, rho.matrix)
    with pytest.raises(ValueError):
        embed(rho, (0, 2))


def test_fidelity_matches_sqrtm_formula():
    system = ModeSystem((3,))
    a, b = random_mixed(system, 1), random_mixed(system, 2)
    sa = scipy.linalg.sqrtm(a.matrix)
    oracle = np.trace(scipy.linalg.sqrtm(sa @ b.matrix @ sa)).real ** 2
    assert abs(uhlmann_fidelity(a, b) - oracle) < 1e-8
    assert abs(uhlmann_fidelity(a, b) - uhlmann_fidelity(b, a)) < 1e-8
    psi = random_pure(system, 4)
    assert abs(uhlmann_fidelity(psi, a) - uhlmann_fidelity(psi.density(), a)) < 1e-8
    assert abs(uhlmann_fidelity(psi, psi) - 1) < 1e-12


def test_fidelity_warns_on_unnormalized_input():
    psi = PureState(ModeSystem((1,)), [0.9, 0])
    with pytest.warns(TruncationWarning):
        uhlmann_fidelity(psi, psi)


def test_trace_distance_and_entropy():
    system = ModeSystem((2,))
    zero = PureState(system, [1, 0, 0])
    one = PureState(system, [0, 1, 0])
    assert abs(trace_distance(zero, one) - 1) < 1e-12
    assert trace_distance(zero, zero) < 1e-15
    mixed = DensityOperator(system, np.eye(3) / 3)
    assert abs(von_neumann_entropy(mixed) - np.log2(3)) < 1e-12
    assert von_neumann_entropy(zero.density()) < 1e-12


def test_bell_state_entanglement_measures():
    psi = bell()
    assert abs(log_negativity(psi, [0]) - 1) < 1e-12
    assert abs(entanglement_entropy(psi, [1]) - 1) < 1e-12
    product = tensor_product(random_pure(ModeSystem((2,)), 1), random_pure(ModeSystem((2,)), 2))
    assert log_negativity(product, [0]) < 1e-12
    assert entanglement_entropy(product, [0]) < 1e-10


def test_entanglement_entropy_rejects_mixed_state():
    mixed = dephase_fock(bell().density(), [0])
    with pytest.raises(ValueError):
        entanglement_entropy(mixed, [0])


def test_dephasing_modes():
    rho = bell().density()
    local = dephase_fock(rho, [0, 1])
    joint = dephase_fock(rho, [0, 1], joint=True)
    assert abs(local.element((0, 0), (1, 1))) == 0
    # |00><11| connects total photon numbers 0 and 2, so joint dephasing removes it too
    assert abs(joint.element((0, 0), (1, 1))) == 0
    system = ModeSystem((1, 1))
    v = np.zeros(4, dtype=complex)
    v[system.index((1, 0))] = v[system.index((0, 1))] = 1 / np.sqrt(2)
    swap = PureState(system, v).density()
    assert abs(dephase_fock(swap, [0, 1], joint=True).element((1, 0), (0, 1)) - 0.5) < 1e-15
    assert dephase_fock(swap, [0, 1]).element((1, 0), (0, 1)) == 0


def test_mixture_components_rebuild_state():
    rho = random_mixed(ModeSystem((3, 1)), 11, rank=4)
    comps = mixture_components(rho, floor=1e-14)
    assert len(comps) == 4
    rebuilt = sum(w * np.outer(v, v.conj()) for w, v in comps)
    assert np.allclose(rebuilt, rho.matrix, atol=1e-12)


def test_ensemble_validation():
    psi = random_pure(ModeSystem((1,)), 0)
    with pytest.raises(ValueError):
        Ensemble(((0.5, psi), (0.4, psi)))
    with pytest.raises(ValueError):
        Ensemble(((0.5, psi), (0.5, random_pure(ModeSystem((2,)), 0))))
    ens = Ensemble(((0.25, psi), (0.75, psi)))
    assert np.allclose(mix_ensemble(ens).matrix, psi.density().matrix)


def test_validate_catches_unphysical_matrices():
    system = ModeSystem((1,))
    with pytest.raises(NotPositiveSemidefiniteError):
        DensityOperator(system, np.diag([1.5, -0.5])).validate()
    with pytest.raises(ValueError):
        DensityOperator(system, [[0.5, 0.2], [0.1, 0.5]]).validate()
    DensityOperator(system, np.diag([0.5, 0.5])).validate()


def test_memory_budget_guard():
    psi = PureState(ModeSystem((200, 200)), np.zeros(201 * 201))
    with pytest.raises(ResourceLimitError):
        psi.density()


def test_states_are_immutable():
    psi = random_pure(ModeSystem((1,)), 0)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1
