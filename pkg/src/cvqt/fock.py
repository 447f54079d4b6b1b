"""Dense linear algebra over truncated multimode Fock spaces.

States are stored as flat complex arrays over the product basis
``|n_0, n_1, ..., n_{k-1}>`` in row-major (C) order, mode 0 being the most
significant index. A cutoff ``N`` on a mode means the basis ``|0>..|N>``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

#: Admissible probability weight discarded by a finite cutoff.
TRUNCATION_BUDGET = 1e-8
#: Eigenvalues in [-PSD_TOLERANCE, 0) are clamped to zero; below that is an error.
PSD_TOLERANCE = 1e-10
#: Upper bound on the bytes a single dense density matrix may occupy.
MEMORY_BUDGET_BYTES = 2 * 1024**3


class TruncationWarning(UserWarning):
    """A state or result lost more weight to the Fock cutoff than the budget allows."""


class ResourceLimitError(MemoryError):
    """A dense operator would exceed ``MEMORY_BUDGET_BYTES``."""


class NotPositiveSemidefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSystem:
    """Per-mode cutoffs of a truncated multimode Fock space."""

    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in np.atleast_1d(self.cutoffs))
        if len(cutoffs) < 1:
            raise ValueError("a mode system needs at least one mode")
        if any(c < 0 for c in cutoffs):
            raise ValueError(f"cutoffs must be non-negative, got {cutoffs}")
        object.__setattr__(self, "cutoffs", cutoffs)

    @classmethod
    def uniform(cls, num_modes: int, cutoff: int) -> "ModeSystem":
        return cls((cutoff,) * num_modes)

    @property
    def num_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, occupation: Sequence[int]) -> int:
        """Flat basis index of an occupation tuple."""
        if len(occupation) != self.num_modes:
            raise ValueError(f"expected {self.num_modes} occupations, got {len(occupation)}")
        for n, c in zip(occupation, self.cutoffs):
            if not 0 <= n <= c:
                raise ValueError(f"occupation {tuple(occupation)} outside cutoffs {self.cutoffs}")
        return int(np.ravel_multi_index(tuple(occupation), self.dims))

    def occupation(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside basis of dimension {self.dim}")
        return tuple(int(n) for n in np.unravel_index(index, self.dims))

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, num_modes)`` table of occupation numbers, row ``i`` for basis index ``i``."""
        occ = np.stack(np.unravel_index(np.arange(self.dim), self.dims), axis=1)
        occ.setflags(write=False)
        return occ

    def subsystem(self, modes: Iterable[int]) -> "ModeSystem":
        return ModeSystem(tuple(self.cutoffs[m] for m in modes))

    def concat(self, other: "ModeSystem") -> "ModeSystem":
        return ModeSystem(self.cutoffs + other.cutoffs)


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_density_budget(dim: int) -> None:
    if 16 * dim * dim > MEMORY_BUDGET_BYTES:
        raise ResourceLimitError(
            f"a {dim}x{dim} complex density matrix exceeds the memory budget "
            f"of {MEMORY_BUDGET_BYTES} bytes"
        )


@dataclass(frozen=True)
class PureState:
    system: ModeSystem
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape[0] != self.system.dim:
            raise ValueError(f"{amps.shape[0]} amplitudes for a basis of dimension {self.system.dim}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.system.dims)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.system.index(occupation)])

    def normalized(self) -> "PureState":
        return PureState(self.system, self.amplitudes / np.sqrt(self.norm_squared))

    def density(self) -> "DensityOperator":
        _check_density_budget(self.system.dim)
        return DensityOperator(self.system, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    system: ModeSystem
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        dim = self.system.dim
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix of shape {mat.shape} for a basis of dimension {dim}")
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def element(self, row: Sequence[int], col: Sequence[int]) -> complex:
        return complex(self.matrix[self.system.index(row), self.system.index(col)])

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to ``dims + dims`` (ket axes first, then bra axes)."""
        return self.matrix.reshape(self.system.dims * 2)

    def normalized(self) -> "DensityOperator":
        return DensityOperator(self.system, self.matrix / self.trace)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real) / self.trace**2

    def max_offdiagonal(self) -> float:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return float(np.abs(off).max()) if off.size else 0.0

    def validate(self, truncation_budget: float = TRUNCATION_BUDGET) -> None:
        """Raise ``ValueError`` unless the operator is a (possibly truncated) physical state."""
        herm = np.abs(self.matrix - self.matrix.conj().T).max()
        if herm >= 1e-12:
            raise ValueError(f"not Hermitian: max |rho - rho^dag| = {herm:.3g}")
        lowest = np.linalg.eigvalsh(self.matrix)[0]
        if lowest < -PSD_TOLERANCE:
            raise NotPositiveSemidefiniteError(f"smallest eigenvalue {lowest:.3g}")
        tr = self.trace
        if not 1 - truncation_budget <= tr <= 1 + 1e-12:
            raise ValueError(f"trace {tr!r} outside [1 - {truncation_budget}, 1]")


State = Union[PureState, DensityOperator]


@dataclass(frozen=True)
class Ensemble:
    """Weighted pure-state decomposition ``sum_i w_i |psi_i><psi_i|``."""

    members: tuple[tuple[float, PureState], ...] = field(default_factory=tuple)

    def __post_init__(self):
        members = tuple((float(w), psi) for w, psi in self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        weights = np.array([w for w, _ in members])
        if (weights < 0).any():
            raise ValueError("ensemble weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights sum to {weights.sum()!r}, not 1")
        system = members[0][1].system
        if any(psi.system != system for _, psi in members):
            raise ValueError("ensemble members live on different mode systems")
        object.__setattr__(self, "members", members)

    @property
    def system(self) -> ModeSystem:
        return self.members[0][1].system

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.members])

    def __len__(self):
        return len(self.members)


def as_density(state: State) -> DensityOperator:
    return state.density() if isinstance(state, PureState) else state


def embed(state: State, cutoffs: Sequence[int]) -> State:
    """Zero-pad ``state`` into a space with larger (or equal) per-mode cutoffs."""
    target = ModeSystem(tuple(cutoffs))
    if target.num_modes != state.system.num_modes:
        raise ValueError("embedding cannot change the number of modes")
    if any(new < old for new, old in zip(target.cutoffs, state.system.cutoffs)):
        raise ValueError(f"cannot embed cutoffs {state.system.cutoffs} into {target.cutoffs}")
    window = tuple(slice(0, d) for d in state.system.dims)
    if isinstance(state, PureState):
        out = np.zeros(target.dims, dtype=complex)
        out[window] = state.tensor()
        return PureState(target, out)
    _check_density_budget(target.dim)
    out = np.zeros(target.dims * 2, dtype=complex)
    out[window * 2] = state.tensor()
    return DensityOperator(target, out.reshape(target.dim, target.dim))


def restrict(state: State, cutoffs: Sequence[int]) -> State:
    """Principal block of ``state`` on the smaller box ``n_i <= cutoffs[i]`` (no renormalization)."""
    target = ModeSystem(tuple(cutoffs))
    if target.num_modes != state.system.num_modes:
        raise ValueError("restriction cannot change the number of modes")
    if any(new > old for new, old in zip(target.cutoffs, state.system.cutoffs)):
        raise ValueError(f"cannot restrict cutoffs {state.system.cutoffs} to {target.cutoffs}")
    window = tuple(slice(0, d) for d in target.dims)
    if isinstance(state, PureState):
        return PureState(target, state.tensor()[window])
    return DensityOperator(target, state.tensor()[window * 2].reshape(target.dim, target.dim))


def tensor_product(a: State, b: State) -> State:
    """Kronecker composition; the result's modes are ``a``'s followed by ``b``'s.

    Two pure states give a pure state; any mixed factor gives a density operator.
    """
    system = a.system.concat(b.system)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(system, np.kron(a.amplitudes, b.amplitudes))
    _check_density_budget(system.dim)
    a, b = as_density(a), as_density(b)
    return DensityOperator(system, np.kron(a.matrix, b.matrix))


def _normalize_modes(system: ModeSystem, modes: Iterable[int]) -> list[int]:
    modes = sorted({int(m) for m in modes})
    for m in modes:
        if not 0 <= m < system.num_modes:
            raise ValueError(f"mode {m} not in a {system.num_modes}-mode system")
    return modes


def partial_trace(state: State, keep: Iterable[int]) -> DensityOperator:
    """Reduced state on the modes in ``keep`` (kept in their original order)."""
    system = state.system
    keep = _normalize_modes(system, keep)
    if not keep:
        raise ValueError("partial trace needs a non-empty set of modes to keep")
    traced = [m for m in range(system.num_modes) if m not in keep]
    sub = system.subsystem(keep)
    _check_density_budget(sub.dim)
    if isinstance(state, PureState):
        psi = state.tensor()
        rho = np.tensordot(psi, psi.conj(), axes=(traced, traced))
        return DensityOperator(sub, rho.reshape(sub.dim, sub.dim))
    k = system.num_modes
    ket = list(range(k))
    bra = [i + k if i in keep else i for i in range(k)]
    out = keep + [m + k for m in keep]
    rho = np.einsum(state.tensor(), ket + bra, out)
    return DensityOperator(sub, rho.reshape(sub.dim, sub.dim))


def _apply_to_axes(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (acting on the flattened ``axes``) into ``tensor``."""
    moved = np.moveaxis(tensor, axes, range(len(axes)))
    lead = moved.shape[: len(axes)]
    flat = moved.reshape(int(np.prod(lead)), -1)
    result = (op @ flat).reshape(moved.shape)
    return np.moveaxis(result, range(len(axes)), axes)


def apply_unitary(state: State, unitary: np.ndarray, targets: Sequence[int], check: bool = True) -> State:
    """Apply ``unitary`` to the ``targets`` modes (in the given order) of ``state``."""
    system = state.system
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target modes {targets}")
    _normalize_modes(system, targets)
    dim = int(np.prod([system.dims[t] for t in targets]))
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != (dim, dim):
        raise ValueError(f"unitary of shape {unitary.shape} for target dimension {dim}")
    if check:
        err = np.abs(unitary.conj().T @ unitary - np.eye(dim)).max()
        if err > 1e-10:
            raise ValueError(f"operator is not unitary: max |U^dag U - 1| = {err:.3g}")
    if isinstance(state, PureState):
        return PureState(system, _apply_to_axes(state.tensor(), unitary, targets))
    k = system.num_modes
    rho = _apply_to_axes(state.tensor(), unitary, targets)
    rho = _apply_to_axes(rho, unitary.conj(), [t + k for t in targets])
    return DensityOperator(system, rho.reshape(system.dim, system.dim))


def mix_ensemble(ensemble: Ensemble) -> DensityOperator:
    system = ensemble.system
    _check_density_budget(system.dim)
    vecs = np.array([psi.amplitudes for _, psi in ensemble.members])
    weighted = vecs * ensemble.weights[:, None]
    return DensityOperator(system, weighted.T @ vecs.conj())


def dephase_fock(rho: DensityOperator, modes: Iterable[int], joint: bool = False) -> DensityOperator:
    """Remove Fock coherences on ``modes``.

    By default each listed mode is dephased separately: an element survives only
    if row and column carry the same occupation on every listed mode. With
    ``joint=True`` a common phase is averaged instead, so elements survive when
    the *total* occupation of the listed modes agrees.
    """
    modes = _normalize_modes(rho.system, modes)
    occ = rho.system.occupations[:, modes]
    if joint:
        total = occ.sum(axis=1)
        mask = total[:, None] == total[None, :]
    else:
        mask = (occ[:, None, :] == occ[None, :, :]).all(axis=2)
    return DensityOperator(rho.system, np.where(mask, rho.matrix, 0))


def _clamped_eigvalsh(matrix: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(matrix)
    if w.size and w[0] < -PSD_TOLERANCE:
        raise NotPositiveSemidefiniteError(f"eigenvalue {w[0]:.3g} below -{PSD_TOLERANCE}")
    return np.clip(w, 0.0, None)


def _check_same_system(a: State, b: State) -> None:
    if a.system != b.system:
        raise ValueError(f"states live on different systems: {a.system} vs {b.system}")


def uhlmann_fidelity(a: State, b: State) -> float:
    """Squared Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))**2``.

    Pure arguments short-circuit to overlaps. Issues a ``TruncationWarning``
    when either trace misses 1 by more than the truncation budget.
    """
    _check_same_system(a, b)
    for s in (a, b):
        tr = s.norm_squared if isinstance(s, PureState) else s.trace
        if abs(tr - 1) > TRUNCATION_BUDGET:
            warnings.warn(f"fidelity argument has trace {tr:.10g}", TruncationWarning, stacklevel=2)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
    if isinstance(a, PureState) or isinstance(b, PureState):
        psi, rho = (a, b) if isinstance(a, PureState) else (b, a)
        v = psi.amplitudes
        return float(np.clip(np.vdot(v, rho.matrix @ v).real, 0.0, 1.0))
    w, vecs = np.linalg.eigh(a.matrix)
    if w[0] < -PSD_TOLERANCE:
        raise NotPositiveSemidefiniteError(f"eigenvalue {w[0]:.3g} below -{PSD_TOLERANCE}")
    sqrt_a = (vecs * np.sqrt(np.clip(w, 0, None))) @ vecs.conj().T
    inner = sqrt_a @ b.matrix @ sqrt_a
    mu = _clamped_eigvalsh((inner + inner.conj().T) / 2)
    return float(np.clip(np.sqrt(mu).sum() ** 2, 0.0, 1.0))


def trace_distance(a: State, b: State) -> float:
    _check_same_system(a, b)
    diff = as_density(a).matrix - as_density(b).matrix
    w = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(min(1.0, 0.5 * np.abs(w).sum()))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def von_neumann_entropy(rho: DensityOperator) -> float:
    """Entropy in bits of the normalized state."""
    w = _clamped_eigvalsh(rho.matrix)
    return _entropy_bits(w / w.sum())


def partial_transpose(rho: DensityOperator, modes: Iterable[int]) -> np.ndarray:
    modes = _normalize_modes(rho.system, modes)
    k = rho.system.num_modes
    perm = list(range(2 * k))
    for m in modes:
        perm[m], perm[m + k] = perm[m + k], perm[m]
    dim = rho.system.dim
    return rho.tensor().transpose(perm).reshape(dim, dim)


def log_negativity(rho: State, part: Iterable[int]) -> float:
    """``log2`` of the trace norm of the partial transpose over ``part``.

    The state is normalized first so truncated separable states score 0.
    """
    rho = as_density(rho)
    part = _normalize_modes(rho.system, part)
    if not part or len(part) == rho.system.num_modes:
        raise ValueError("bipartition must leave modes on both sides")
    pt = partial_transpose(rho, part)
    w = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    return max(0.0, float(np.log2(np.abs(w).sum() / rho.trace)))


def entanglement_entropy(psi: State, part: Iterable[int]) -> float:
    """Entropy (bits) of the reduced state of ``part`` for a pure bipartite state."""
    if isinstance(psi, DensityOperator):
        w, vecs = np.linalg.eigh(psi.matrix)
        if w[-1] < (1 - TRUNCATION_BUDGET) * w.sum():
            raise ValueError("entanglement entropy needs a pure state; got a mixed density operator")
        psi = PureState(psi.system, vecs[:, -1] * np.sqrt(w[-1]))
    system = psi.system
    part = _normalize_modes(system, part)
    rest = [m for m in range(system.num_modes) if m not in part]
    if not part or not rest:
        raise ValueError("bipartition must leave modes on both sides")
    if abs(psi.norm_squared - 1) > TRUNCATION_BUDGET:
        raise ValueError(f"state norm^2 {psi.norm_squared!r} outside the truncation budget")
    mat = np.moveaxis(psi.tensor(), part, range(len(part)))
    mat = mat.reshape(int(np.prod([system.dims[m] for m in part])), -1)
    s = np.linalg.svd(mat, compute_uv=False) ** 2
    return _entropy_bits(s / s.sum())


def expectation(state: State, operator: np.ndarray) -> complex:
    """``tr(rho O)`` for an operator given on the full space."""
    if isinstance(state, PureState):
        v = state.amplitudes
        return complex(np.vdot(v, operator @ v))
    return complex(np.trace(state.matrix @ operator))


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)


def number_operator(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff + 1, dtype=float))


def single_mode_operator(system: ModeSystem, operator: np.ndarray, mode: int) -> np.ndarray:
    """Lift a single-mode operator to the full space (identity elsewhere)."""
    out = np.ones((1, 1))
    for m, d in enumerate(system.dims):
        out = np.kron(out, operator if m == mode else np.eye(d))
    return out


def mixture_components(state: State, floor: float = 0.0) -> list[tuple[float, np.ndarray]]:
    """Decompose a state into ``(weight, unit vector)`` pairs.

    Pure states give one component carrying their norm² as weight; density
    operators are diagonalized and eigenvalues ``<= floor`` dropped.
    """
    if isinstance(state, PureState):
        n2 = state.norm_squared
        return [(n2, state.amplitudes / np.sqrt(n2))]
    w, vecs = np.linalg.eigh(state.matrix)
    if w[0] < -PSD_TOLERANCE:
        raise NotPositiveSemidefiniteError(f"eigenvalue {w[0]:.3g} below -{PSD_TOLERANCE}")
    keep = w > floor
    return [(float(wi), vecs[:, i]) for i, wi in zip(np.flatnonzero(keep)[::-1], w[keep][::-1])]
