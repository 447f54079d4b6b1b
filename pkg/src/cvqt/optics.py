"""Linear-optical transformations and measurements on truncated Fock states.

Conventions
-----------
* Quadratures: ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``,
  so the vacuum has variance 1/2. The rotated quadrature measured with a
  local oscillator at phase ``theta`` is ``x_theta = x cos(theta) + p sin(theta)``
  and its eigenstates satisfy ``<x_theta|n> = exp(-i n theta) psi_n(x)``.
* Phase shift: ``R(theta) = exp(i theta n)``.
* Beam splitter on modes ``(j, k)``: ``|alpha>_j |0>_k -> |t alpha>_j |i r alpha>_k``;
  the reflected port picks up the factor ``i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import roots_legendre

from .fock import (
    DensityOperator,
    ModeSystem,
    PureState,
    State,
    TruncationWarning,
    annihilation,
    apply_unitary,
    partial_trace,
)


@dataclass(frozen=True)
class BeamSplitterSpec:
    r: float
    t: float

    def __post_init__(self):
        if self.r < 0 or self.t < 0:
            raise ValueError(f"r and t must be non-negative, got r={self.r}, t={self.t}")
        if abs(self.r**2 + self.t**2 - 1) > 1e-12:
            raise ValueError(f"lossless splitter needs r^2 + t^2 = 1, got {self.r**2 + self.t**2!r}")

    @classmethod
    def balanced(cls) -> "BeamSplitterSpec":
        return cls(math.sqrt(0.5), math.sqrt(0.5))

    @classmethod
    def from_reflectivity(cls, r: float) -> "BeamSplitterSpec":
        return cls(r, math.sqrt(1 - r * r))

    @property
    def angle(self) -> float:
        return math.atan2(self.r, self.t)


def beam_splitter(spec: BeamSplitterSpec, system: ModeSystem, modes: Sequence[int] = (0, 1)) -> np.ndarray:
    """Unitary ``exp(i theta (a_j^dag a_k + a_j a_k^dag))`` on modes ``(j, k)``.

    The matrix acts on the two target modes ordered ``(j, k)``; pass it to
    ``apply_unitary`` with the same ``modes``. It is built block by block in
    the total-photon-number sectors, which the generator preserves.
    """
    j, k = (int(m) for m in modes)
    if j == k:
        raise ValueError("beam splitter needs two distinct modes")
    nj, nk = system.cutoffs[j], system.cutoffs[k]
    dk = nk + 1
    theta = spec.angle
    unitary = np.zeros(((nj + 1) * dk,) * 2, dtype=complex)
    for total in range(nj + nk + 1):
        occ_j = np.arange(max(0, total - nk), min(nj, total) + 1)
        idx = occ_j * dk + (total - occ_j)
        gen = np.zeros((occ_j.size, occ_j.size))
        # a_j^dag a_k |n, s-n> = sqrt((n+1)(s-n)) |n+1, s-n-1>
        hop = np.sqrt((occ_j[:-1] + 1.0) * (total - occ_j[:-1]))
        gen[np.arange(1, occ_j.size), np.arange(occ_j.size - 1)] = hop
        gen = gen + gen.T
        unitary[np.ix_(idx, idx)] = expm(1j * theta * gen)
    return unitary


def rho_bs_closed_form(alpha: float, r: float, t: float, cutoffs: Sequence[int]) -> DensityOperator:
    """Phase-averaged laser light after a beam splitter, written term by term.

    Element ``<m, p| rho |n, s>`` (mode 0 = reflected port, mode 1 =
    transmitted port) equals
    ``exp(-alpha^2) i^(m-n) (r alpha)^(m+n) (t alpha)^(p+s) / sqrt(m! n! p! s!)``
    when ``m + p == n + s`` and vanishes otherwise.
    """
    BeamSplitterSpec(r, t)
    n1, n2 = (int(c) for c in cutoffs)
    system = ModeSystem((n1, n2))
    m = np.arange(n1 + 1)[:, None, None, None]
    p = np.arange(n2 + 1)[None, :, None, None]
    n = np.arange(n1 + 1)[None, None, :, None]
    s = np.arange(n2 + 1)[None, None, None, :]
    fact = np.vectorize(math.factorial, otypes=[float])
    coeff = (
        np.exp(-(alpha**2))
        * (1j ** ((m - n) % 4))
        * np.power(r * alpha, m + n)
        * np.power(t * alpha, p + s)
        / np.sqrt(fact(m) * fact(n) * fact(p) * fact(s))
    )
    rho = np.where(m + p == n + s, coeff, 0)
    return DensityOperator(system, rho.reshape(system.dim, system.dim))


def displacement(beta: complex, cutoff: int) -> np.ndarray:
    """``exp(beta a^dag - beta^* a)`` from the truncated generator."""
    a = annihilation(cutoff)
    return expm(beta * a.T - np.conj(beta) * a)


class Displacer:
    """Displacements on one truncated mode, vectorized over many amplitudes.

    Uses ``D(|b| e^{i t}) = R(t) D(|b|) R(t)^dag`` with ``D(r) = W exp(i r L) W^dag``
    from a single eigendecomposition of ``-i (a^dag - a)``; this reproduces
    the truncated-generator exponential exactly.
    """

    def __init__(self, cutoff: int):
        a = annihilation(cutoff)
        self.cutoff = cutoff
        self.levels = np.arange(cutoff + 1)
        self.eigvals, self.eigvecs = np.linalg.eigh(-1j * (a.T - a))

    def matrix(self, beta: complex) -> np.ndarray:
        rot = np.exp(1j * self.levels * np.angle(beta))
        core = (self.eigvecs * np.exp(1j * abs(beta) * self.eigvals)) @ self.eigvecs.conj().T
        return rot[:, None] * core * rot.conj()[None, :]

    def apply(self, vectors: np.ndarray, betas: np.ndarray) -> np.ndarray:
        """Rows of ``vectors`` (shape ``(..., d)``) displaced by matching ``betas``."""
        betas = np.asarray(betas)
        phase = np.exp(1j * np.angle(betas)[..., None] * self.levels)
        out = (vectors * phase.conj()) @ self.eigvecs.conj()
        out = out * np.exp(1j * np.abs(betas)[..., None] * self.eigvals)
        return (out @ self.eigvecs.T) * phase


def phase_shift(theta: float, cutoff: int) -> np.ndarray:
    return np.diag(np.exp(1j * theta * np.arange(cutoff + 1)))


def displace(state: State, beta: complex, mode: int) -> State:
    """Apply ``D(beta)`` to ``mode``, warning when the cutoff margin is too thin."""
    cutoff = state.system.cutoffs[mode]
    probs = photon_counting(state, mode)
    support = int(np.flatnonzero(probs > 1e-12).max(initial=0))
    margin = abs(beta) ** 2 + 6 * abs(beta)
    if support + margin > cutoff:
        warnings.warn(
            f"displacement |beta|={abs(beta):.3g} needs cutoff >= {support + margin:.1f}, have {cutoff}",
            TruncationWarning,
            stacklevel=2,
        )
    return apply_unitary(state, displacement(beta, cutoff), [mode])


def hermite_functions(nmax: int, x: np.ndarray) -> np.ndarray:
    """Normalized oscillator eigenfunctions ``psi_0..psi_nmax`` at ``x``.

    Returns shape ``(nmax + 1, len(x))``; evaluated by the three-term recurrence
    ``psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_kets(cutoff: int, theta: float, x: np.ndarray) -> np.ndarray:
    """``<x_theta|n>`` as an array of shape ``(len(x), cutoff + 1)``."""
    psi = hermite_functions(cutoff, x).T
    return psi * np.exp(-1j * theta * np.arange(cutoff + 1))


def minimum_half_width(cutoff: int) -> float:
    return math.sqrt(2 * cutoff) + 4


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid of bin centres ``step * k`` for ``|step * k| <= half_width``.

    ``half_width=None`` picks the narrowest admissible width for the cutoff.
    """

    step: float = 0.05
    half_width: float | None = None

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")

    def points(self, cutoff: int) -> np.ndarray:
        needed = minimum_half_width(cutoff)
        width = needed if self.half_width is None else self.half_width
        if width < needed - 1e-12:
            raise ValueError(f"grid half-width {width} below sqrt(2*cutoff)+4 = {needed:.4g} for cutoff {cutoff}")
        count = math.ceil(width / self.step - 1e-9)
        return self.step * np.arange(-count, count + 1)


@dataclass(frozen=True)
class HomodyneDistribution:
    grid: np.ndarray
    densities: np.ndarray
    lo_phase: float

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def probabilities(self) -> np.ndarray:
        return self.densities * self.step

    def total(self) -> float:
        return float(self.probabilities.sum())

    def mean(self) -> float:
        return float((self.grid * self.probabilities).sum() / self.total())

    def variance(self) -> float:
        mu = self.mean()
        return float(((self.grid - mu) ** 2 * self.probabilities).sum() / self.total())


def _single_mode(state: State, mode: int) -> DensityOperator:
    if state.system.num_modes == 1 and isinstance(state, DensityOperator):
        return state
    return partial_trace(state, [mode])


def homodyne_distribution(
    state: State, mode: int, theta: float, grid: QuadratureGrid = QuadratureGrid()
) -> HomodyneDistribution:
    """Density of ``x_theta`` on ``mode`` sampled at the grid points."""
    rho = _single_mode(state, mode)
    cutoff = rho.system.cutoffs[0]
    x = grid.points(cutoff)
    kets = quadrature_kets(cutoff, theta, x)
    dens = np.einsum("xm,mn,xn->x", kets, rho.matrix, kets.conj()).real
    return HomodyneDistribution(x, np.clip(dens, 0.0, None), float(theta))


def sample_homodyne(dist: HomodyneDistribution, seed=None, size: int | None = None):
    """Draw outcomes by inverting the piecewise-linear CDF of the binned density.

    ``seed`` may be an int, ``None`` or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(seed)
    h = dist.step
    edges = np.concatenate([dist.grid - h / 2, [dist.grid[-1] + h / 2]])
    cdf = np.concatenate([[0.0], np.cumsum(dist.probabilities)])
    u = rng.uniform(0.0, cdf[-1], size=size)
    return np.interp(u, cdf, edges)


def conditional_state(
    state: State,
    mode: int,
    theta: float,
    outcome: float,
    grid: QuadratureGrid = QuadratureGrid(),
    nodes: int = 1,
) -> tuple[DensityOperator, float]:
    """Post-measurement state of the remaining modes after an ``x_theta`` bin.

    The bin ``[outcome - step/2, outcome + step/2]`` is the POVM element
    ``int |x_theta><x_theta| dx``, integrated with ``nodes`` Gauss-Legendre
    points (``nodes=1`` is the midpoint projector ``step |x><x|``).
    """
    system = state.system
    if system.num_modes < 2:
        raise ValueError("conditioning needs at least one unmeasured mode")
    rest = [m for m in range(system.num_modes) if m != mode]
    rest_sys = system.subsystem(rest)
    cutoff = system.cutoffs[mode]
    u, w = roots_legendre(nodes)
    xs = outcome + 0.5 * grid.step * u
    ws = 0.5 * grid.step * w
    kets = quadrature_kets(cutoff, theta, xs)
    if isinstance(state, PureState):
        psi = np.moveaxis(state.tensor(), mode, 0).reshape(cutoff + 1, -1)
        branches = kets @ psi * np.sqrt(ws)[:, None]
        rho = branches.T @ branches.conj()
    else:
        k = system.num_modes
        t = np.moveaxis(state.tensor(), [mode, mode + k], [0, 1])
        t = t.reshape(cutoff + 1, cutoff + 1, rest_sys.dim, rest_sys.dim)
        rho = np.einsum("x,xm,mnij,xn->ij", ws, kets, t, kets.conj())
    prob = float(np.trace(rho).real)
    if prob < 1e-14:
        raise ValueError(f"bin at x={outcome} has probability {prob:.3g}; conditional state undefined")
    return DensityOperator(rest_sys, rho / prob), prob


def photon_counting(state: State, mode: int) -> np.ndarray:
    """Photon-number distribution of ``mode``."""
    return np.real(np.diag(_single_mode(state, mode).matrix)).copy()


def project_subsystem(state: State, mode: int, vector: Sequence[complex]) -> tuple[State, float]:
    """Project ``mode`` onto ``vector`` and renormalize what remains.

    Returns the conditional state of the other modes (pure in, pure out) and
    the Born-rule probability.
    """
    system = state.system
    v = np.asarray(vector, dtype=complex).reshape(-1)
    if v.size != system.dims[mode]:
        raise ValueError(f"basis vector of length {v.size} for a mode of dimension {system.dims[mode]}")
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValueError("projection vector must be normalized")
    if system.num_modes < 2:
        raise ValueError("projection needs at least one remaining mode")
    rest_sys = system.subsystem(m for m in range(system.num_modes) if m != mode)
    if isinstance(state, PureState):
        psi = np.moveaxis(state.tensor(), mode, 0).reshape(v.size, -1)
        out = v.conj() @ psi
        prob = float(np.vdot(out, out).real)
        if prob < 1e-14:
            raise ValueError(f"projection probability {prob:.3g} too small")
        return PureState(rest_sys, out / np.sqrt(prob)), prob
    k = system.num_modes
    t = np.moveaxis(state.tensor(), [mode, mode + k], [0, 1]).reshape(v.size, v.size, rest_sys.dim, rest_sys.dim)
    rho = np.einsum("m,mnij,n->ij", v.conj(), t, v)
    prob = float(np.trace(rho).real)
    if prob < 1e-14:
        raise ValueError(f"projection probability {prob:.3g} too small")
    return DensityOperator(rest_sys, rho / prob), prob
