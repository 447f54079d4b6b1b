"""Constructors for the optical states used throughout the package.

Every phase-averaged state has two independent constructions: a closed form
(``laser_density``, ``tmsv_phase_averaged``) and an explicit uniform-phase
ensemble (``laser_ensemble``, ``tmsv_ensemble``). The ensemble uses
``M = 2 * cutoff + 2`` equally spaced phases, for which the discrete phase
average of ``exp(i k phi)`` vanishes exactly for every ``0 < |k| < M``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .fock import (
    TRUNCATION_BUDGET,
    DensityOperator,
    Ensemble,
    ModeSystem,
    PureState,
    TruncationWarning,
    partial_trace,
)


def coherent_cutoff(alpha: float) -> int:
    """Smallest cutoff the budget rule allows for a coherent amplitude ``alpha``."""
    return math.ceil(alpha**2 + 6 * alpha + 10)


def squeezed_cutoff(eta: float) -> int:
    if eta == 0:
        return 1
    return max(1, math.ceil(math.log(TRUNCATION_BUDGET) / math.log(eta**2)))


def phase_nodes(count: int) -> np.ndarray:
    return 2 * np.pi * np.arange(count) / count


def default_phase_count(cutoff: int) -> int:
    return 2 * cutoff + 2


def _warn_tail(tail: float, what: str) -> None:
    if tail > TRUNCATION_BUDGET:
        warnings.warn(f"{what}: truncated tail weight {tail:.3g} exceeds budget", TruncationWarning, stacklevel=3)


def _check_alpha(alpha: float) -> None:
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0 (pass the phase separately), got {alpha}")


def _check_eta(eta: float) -> None:
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")


def poisson_weights(alpha: float, cutoff: int) -> np.ndarray:
    """``exp(-alpha^2) alpha^(2n) / n!`` for ``n = 0..cutoff``."""
    n = np.arange(cutoff + 1)
    if alpha == 0:
        return (n == 0).astype(float)
    return np.exp(-(alpha**2) + 2 * n * np.log(alpha) - gammaln(n + 1))


@dataclass(frozen=True)
class LaserSpec:
    """Phase-averaged single-mode laser output with mean photon number ``alpha**2``."""

    alpha: float
    cutoff: int | None = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", coherent_cutoff(self.alpha))

    def density(self) -> DensityOperator:
        return laser_density(self.alpha, self.cutoff)


@dataclass(frozen=True)
class SqueezeSpec:
    eta: float
    cutoff: int | None = None

    def __post_init__(self):
        _check_eta(self.eta)
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", squeezed_cutoff(self.eta))


def coherent_amplitudes(alpha: float, phi: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if alpha == 0:
        return (n == 0).astype(complex)
    log_mag = -(alpha**2) / 2 + n * np.log(alpha) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * phi)


def coherent_state(alpha: float, phi: float = 0.0, cutoff: int | None = None) -> PureState:
    """Truncated coherent state ``|alpha e^{i phi}>``."""
    _check_alpha(alpha)
    if cutoff is None:
        cutoff = coherent_cutoff(alpha)
    _warn_tail(float(poisson.sf(cutoff, alpha**2)), f"coherent state alpha={alpha}, cutoff={cutoff}")
    return PureState(ModeSystem((cutoff,)), coherent_amplitudes(alpha, phi, cutoff))


def fock_state(n: int, cutoff: int) -> PureState:
    if not 0 <= n <= cutoff:
        raise ValueError(f"Fock state |{n}> needs 0 <= n <= cutoff={cutoff}")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1
    return PureState(ModeSystem((cutoff,)), amps)


def laser_density(alpha: float, cutoff: int | None = None) -> DensityOperator:
    """Phase-averaged laser state: the Poisson diagonal in the Fock basis."""
    _check_alpha(alpha)
    if cutoff is None:
        cutoff = coherent_cutoff(alpha)
    _warn_tail(float(poisson.sf(cutoff, alpha**2)), f"laser state alpha={alpha}, cutoff={cutoff}")
    return DensityOperator(ModeSystem((cutoff,)), np.diag(poisson_weights(alpha, cutoff)))


def laser_ensemble(alpha: float, cutoff: int | None = None, count: int | None = None) -> Ensemble:
    """Equal-weight coherent states at ``count`` uniformly spaced phases."""
    _check_alpha(alpha)
    if cutoff is None:
        cutoff = coherent_cutoff(alpha)
    count = count or default_phase_count(cutoff)
    w = 1.0 / count
    return Ensemble(tuple((w, coherent_state(alpha, phi, cutoff)) for phi in phase_nodes(count)))


def _rescaled_basis_ensemble(system: ModeSystem, weights: np.ndarray, indices: Sequence[int]) -> Ensemble:
    # Members carry the truncated norm sqrt(sum p) so that weights sum to one
    # while the mixture still reproduces the truncated weights exactly.
    total = float(weights.sum())
    members = []
    for p, idx in zip(weights, indices):
        if p <= 0:
            continue
        amps = np.zeros(system.dim, dtype=complex)
        amps[idx] = np.sqrt(total)
        members.append((p / total, PureState(system, amps)))
    return Ensemble(tuple(members))


def fock_ensemble(alpha: float, cutoff: int | None = None) -> Ensemble:
    """Number-state decomposition of the laser state: ``|n>`` with Poisson weights."""
    _check_alpha(alpha)
    if cutoff is None:
        cutoff = coherent_cutoff(alpha)
    system = ModeSystem((cutoff,))
    return _rescaled_basis_ensemble(system, poisson_weights(alpha, cutoff), range(cutoff + 1))


def tmsv_weights(eta: float, cutoff: int) -> np.ndarray:
    return (1 - eta**2) * eta ** (2 * np.arange(cutoff + 1))


def tmsv_pure(eta: float, phi: float = 0.0, cutoff: int | None = None) -> PureState:
    """Two-mode squeezed vacuum ``sqrt(1-eta^2) sum_n eta^n e^{i n phi} |n n>``."""
    _check_eta(eta)
    if cutoff is None:
        cutoff = squeezed_cutoff(eta)
    _warn_tail(eta ** (2 * (cutoff + 1)), f"two-mode squeezed state eta={eta}, cutoff={cutoff}")
    system = ModeSystem((cutoff, cutoff))
    n = np.arange(cutoff + 1)
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amps[n, n] = np.sqrt(1 - eta**2) * eta**n * np.exp(1j * n * phi)
    return PureState(system, amps)


def tmsv_phase_averaged(eta: float, cutoff: int | None = None) -> DensityOperator:
    """Pump-phase average of ``tmsv_pure``: diagonal weights on ``|n n><n n|``."""
    _check_eta(eta)
    if cutoff is None:
        cutoff = squeezed_cutoff(eta)
    _warn_tail(eta ** (2 * (cutoff + 1)), f"two-mode squeezed state eta={eta}, cutoff={cutoff}")
    system = ModeSystem((cutoff, cutoff))
    diag = np.zeros((cutoff + 1, cutoff + 1))
    n = np.arange(cutoff + 1)
    diag[n, n] = tmsv_weights(eta, cutoff)
    return DensityOperator(system, np.diag(diag.reshape(-1)))


def tmsv_ensemble(eta: float, cutoff: int | None = None, count: int | None = None) -> Ensemble:
    """Equal-weight ``tmsv_pure`` members at uniformly spaced pump phases."""
    _check_eta(eta)
    if cutoff is None:
        cutoff = squeezed_cutoff(eta)
    count = count or default_phase_count(cutoff)
    w = 1.0 / count
    return Ensemble(tuple((w, tmsv_pure(eta, phi, cutoff)) for phi in phase_nodes(count)))


def pump_traced_pair(amplitudes: Sequence[complex]) -> DensityOperator:
    """Signal/idler state left after tracing out a number-state pump.

    Builds ``sum_m c_m |N-m>_P |m>|m>`` with ``N = len(amplitudes) - 1`` and
    traces the pump mode away.
    """
    c = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if c.size == 0:
        raise ValueError("need at least one amplitude")
    norm = float(np.vdot(c, c).real)
    if abs(norm - 1) > 1e-10:
        raise ValueError(f"amplitudes must be normalized, sum |c|^2 = {norm!r}")
    top = c.size - 1
    system = ModeSystem((top, top, top))
    psi = np.zeros(system.dims, dtype=complex)
    m = np.arange(c.size)
    psi[top - m, m, m] = c
    return partial_trace(PureState(system, psi), keep=(1, 2))
