"""Teleportation runs and the three success-criteria analyses.

Circuit conventions (mode 0 = input, 1 = Alice's half of the pair, 2 = Bob's):

* Alice mixes modes 0 and 1 on a balanced beam splitter (reflected port
  picks up ``i``) and reads ``x_theta`` on both output ports with the same
  local-oscillator angle ``theta``. For a pair state with pump phase ``phi_p``
  the EPR-correlated combinations are read at ``theta = phi_p/2 - pi/4``.
* With outcomes ``(u, v)`` Bob displaces mode 2 by
  ``beta = gain * exp(i theta) * (u - i v)``. In the infinite-squeezing limit
  ``u - i v`` tends to ``exp(-i theta) (a_0 - a_2)`` so unit gain restores the
  input on mode 2.
* Each detector bin of width ``step`` is the midpoint POVM element
  ``step * |x_theta><x_theta|``; averages are deterministic sums over the grid.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import gaussian
from .fock import (
    DensityOperator,
    Ensemble,
    ModeSystem,
    PureState,
    State,
    TruncationWarning,
    annihilation,
    apply_unitary,
    dephase_fock,
    embed,
    entanglement_entropy,
    expectation,
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
from .optics import (
    BeamSplitterSpec,
    Displacer,
    QuadratureGrid,
    beam_splitter,
    homodyne_distribution,
    phase_shift,
    quadrature_kets,
    rho_bs_closed_form,
    sample_homodyne,
)
from .sources import (
    coherent_cutoff,
    coherent_state,
    default_phase_count,
    fock_ensemble,
    fock_state,
    laser_density,
    laser_ensemble,
    phase_nodes,
    squeezed_cutoff,
    tmsv_ensemble,
    tmsv_phase_averaged,
    tmsv_pure,
)

RESOURCES = ("pure", "phase-averaged")


def lo_angle_for(resource_phase: float) -> float:
    """Alice's local-oscillator angle for a pair with the given pump phase."""
    return resource_phase / 2 - math.pi / 4


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: float = 1.0
    phi: float = 0.0
    eta: float = 0.5
    resource: str = "pure"
    resource_phase: float = 0.0
    gain: float = 1.0
    cutoff: int | None = None
    grid_step: float = 0.1
    half_width: float | None = None
    branches: int | None = None
    seed: int = 0
    #: Arbitrary single-mode input; overrides ``alpha``/``phi`` when given.
    input_state: PureState | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError(f"gain must be positive, got {self.gain}")
        if self.resource not in RESOURCES:
            raise ValueError(f"resource must be one of {RESOURCES}, got {self.resource!r}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 <= self.eta < 1:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.input_state is not None and self.input_state.system.num_modes != 1:
            raise ValueError("the input must be a single-mode state")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")

    def resolved_cutoff(self) -> int:
        if self.cutoff is not None:
            if self.input_state is not None and self.input_state.system.cutoffs[0] > self.cutoff:
                raise ValueError("input state cutoff exceeds the protocol cutoff")
            return self.cutoff
        source = (
            self.input_state.system.cutoffs[0] if self.input_state is not None else coherent_cutoff(self.alpha)
        )
        return max(source, squeezed_cutoff(self.eta))

    def resolved_branches(self) -> int:
        return self.branches or default_phase_count(self.resolved_cutoff())

    def grid(self) -> QuadratureGrid:
        return QuadratureGrid(self.grid_step, self.half_width)

    def replace(self, **changes) -> "ProtocolConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TeleportationRecord:
    """One outcome bin (or one laser-phase branch) of a run."""

    outcome: tuple[float, float] | None
    weight: float
    fidelity: float
    output: DensityOperator
    branch_phase: float | None = None


@dataclass
class TeleportationResult:
    """Grid-resolved outcome of one teleportation run.

    ``weights[i, j]`` and ``fidelities[i, j]`` belong to Alice's readings
    ``(outcomes[i], outcomes[j])``. Conditional output states are rebuilt on
    demand by ``record``.
    """

    outcomes: np.ndarray
    weights: np.ndarray
    fidelities: np.ndarray
    average_fidelity: float
    average_output: DensityOperator
    lo_angle: float
    gain: float
    bob_coherence: float
    warnings: tuple[str, ...] = ()
    _components: list = field(default_factory=list, repr=False)
    _kets: np.ndarray | None = field(default=None, repr=False)
    _displacer: Displacer | None = field(default=None, repr=False)

    @property
    def step(self) -> float:
        return float(self.outcomes[1] - self.outcomes[0])

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def beta(self, i: int, j: int) -> complex:
        u, v = self.outcomes[i], self.outcomes[j]
        return self.gain * np.exp(1j * self.lo_angle) * (u - 1j * v)

    def conditional_input(self, i: int, j: int) -> DensityOperator:
        """Bob's normalized state for bin ``(i, j)`` before his displacement."""
        vecs, weights = self._bin_vectors(i, j)
        return self._normalized(vecs, weights)

    def record(self, i: int, j: int) -> TeleportationRecord:
        vecs, weights = self._bin_vectors(i, j)
        shifted = vecs @ self._displacer.matrix(self.beta(i, j)).T
        return TeleportationRecord(
            outcome=(float(self.outcomes[i]), float(self.outcomes[j])),
            weight=float(self.weights[i, j]),
            fidelity=float(self.fidelities[i, j]),
            output=self._normalized(shifted, weights),
        )

    def records(self, min_weight: float = 0.0) -> Iterator[TeleportationRecord]:
        for i, j in zip(*np.nonzero(self.weights > min_weight)):
            yield self.record(int(i), int(j))

    def _bin_vectors(self, i: int, j: int):
        k = self._kets
        vecs = np.array([np.einsum("m,n,mnb->b", k[i], k[j], psi) * self.step for _, psi in self._components])
        return vecs, np.array([w for w, _ in self._components])

    def _normalized(self, vecs, weights) -> DensityOperator:
        rho = (vecs.T * weights) @ vecs.conj()
        d = rho.shape[0]
        return DensityOperator(ModeSystem((d - 1,)), rho / np.trace(rho).real)


def _collect_warnings(caught) -> tuple[str, ...]:
    return tuple(str(w.message) for w in caught if issubclass(w.category, TruncationWarning))


def teleport(
    input_state: State,
    resource: State,
    *,
    gain: float = 1.0,
    lo_angle: float,
    grid: QuadratureGrid,
    target: PureState | None = None,
    chunk_elements: int = 2_000_000,
) -> TeleportationResult:
    """Run the circuit on arbitrary input and pair states.

    ``target`` is used only for scoring: per-bin fidelities are
    ``<target| rho_out |target>``. Mixed inputs or resources are handled by
    diagonalizing them and summing the pure branches.
    """
    if input_state.system.num_modes != 1 or resource.system.num_modes != 2:
        raise ValueError("need a single-mode input and a two-mode resource")
    cutoff = max(input_state.system.cutoffs + resource.system.cutoffs)
    d = cutoff + 1
    input_state = embed(input_state, (cutoff,))
    resource = embed(resource, (cutoff, cutoff))
    if target is not None:
        if not isinstance(target, PureState):
            raise ValueError("per-bin scoring needs a pure target state")
        target_vec = embed(target, (cutoff,)).amplitudes
    else:
        target_vec = np.zeros(d)

    splitter = beam_splitter(BeamSplitterSpec.balanced(), ModeSystem((cutoff, cutoff)), (0, 1))
    components = []
    for w_in, v_in in mixture_components(input_state, floor=1e-18):
        for w_res, v_res in mixture_components(resource, floor=1e-18):
            psi = (splitter @ np.kron(v_in, v_res).reshape(d * d, d)).reshape(d, d, d)
            components.append((w_in * w_res, psi))

    x = grid.points(cutoff)
    step = grid.step
    kets = quadrature_kets(cutoff, lo_angle, x)
    betas = gain * np.exp(1j * lo_angle) * (x[:, None] - 1j * x[None, :])
    displacer = Displacer(cutoff)

    g = x.size
    weights = np.zeros((g, g))
    overlap = np.zeros((g, g))
    avg_out = np.zeros((d, d), dtype=complex)
    coherence = 0.0
    rows = max(1, chunk_elements // (g * d * d))
    partial = [np.tensordot(kets, psi, axes=(1, 0)) for _, psi in components]
    offdiag = ~np.eye(d, dtype=bool)
    for start in range(0, g, rows):
        sl = slice(start, min(g, start + rows))
        pre = np.zeros((sl.stop - start, g, d, d), dtype=complex)
        for (w, _), half in zip(components, partial):
            phi = np.einsum("xnb,yn->xyb", half[sl], kets) * step
            weights[sl] += w * np.einsum("xyb,xyb->xy", phi, phi.conj()).real
            pre += w * phi[..., :, None] * phi[..., None, :].conj()
            out = displacer.apply(phi, betas[sl])
            flat = out.reshape(-1, d)
            avg_out += w * flat.T @ flat.conj()
            overlap[sl] += w * np.abs(out @ target_vec.conj()) ** 2
        live = weights[sl] > 1e-10
        if live.any():
            scaled = np.abs(pre[live])[:, offdiag].max(axis=1) / weights[sl][live]
            coherence = max(coherence, float(scaled.max()))

    with np.errstate(divide="ignore", invalid="ignore"):
        fidelities = np.where(weights > 0, overlap / weights, 0.0)
    fidelities = np.clip(fidelities, 0.0, 1.0)
    return TeleportationResult(
        outcomes=x,
        weights=weights,
        fidelities=fidelities,
        average_fidelity=float((weights * fidelities).sum()),
        average_output=DensityOperator(ModeSystem((cutoff,)), avg_out),
        lo_angle=lo_angle,
        gain=gain,
        bob_coherence=coherence,
        _components=components,
        _kets=kets,
        _displacer=displacer,
    )


def _input_state(config: ProtocolConfig, cutoff: int, extra_phase: float = 0.0) -> PureState:
    if config.input_state is None:
        return coherent_state(config.alpha, config.phi + extra_phase, cutoff)
    psi = embed(config.input_state, (cutoff,))
    if extra_phase:
        psi = apply_unitary(psi, phase_shift(extra_phase, cutoff), [0])
    return psi


def _run(config: ProtocolConfig, resource_kind: str) -> TeleportationResult:
    cutoff = config.resolved_cutoff()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        psi_in = _input_state(config, cutoff)
        if resource_kind == "pure":
            resource = tmsv_pure(config.eta, config.resource_phase, cutoff)
        else:
            resource = tmsv_phase_averaged(config.eta, cutoff)
        result = teleport(
            psi_in,
            resource,
            gain=config.gain,
            lo_angle=lo_angle_for(config.resource_phase),
            grid=config.grid(),
            target=psi_in,
        )
    result.warnings = _collect_warnings(caught)
    return result


def ideal_cvqt_run(config: ProtocolConfig) -> TeleportationResult:
    """Teleport through a pure two-mode squeezed pair with a definite pump phase."""
    if config.resource != "pure":
        raise ValueError("the ideal run needs resource='pure'")
    return _run(config, "pure")


def phase_averaged_resource_run(config: ProtocolConfig) -> TeleportationResult:
    """Same circuit, but the pair is the pump-phase-averaged (Fock-diagonal) state.

    Alice's oscillator stays at the angle matched to ``config.resource_phase``.
    ``bob_coherence`` on the result is the largest normalized off-diagonal
    element of Bob's conditional states before his displacement.
    """
    return _run(config, "phase-averaged")


def run(config: ProtocolConfig) -> TeleportationResult:
    return _run(config, config.resource)


@dataclass
class SharedLaserResult:
    """Teleportation with every field derived from one phase-averaged laser."""

    branches: list[TeleportationResult]
    records: list[TeleportationRecord]
    averaged_output: DensityOperator
    conditional_fidelity: float
    fixed_coherent_fidelity: float
    laser_fidelity: float
    averaged_offdiagonal: float
    phases: np.ndarray
    warnings: tuple[str, ...] = ()


def shared_laser_cvqt_run(config: ProtocolConfig) -> SharedLaserResult:
    """Average the circuit over the unknown phase of a laser shared by all parties.

    In branch ``phi_k = 2 pi k / M`` the input acquires ``phi_k``, the pump
    (a frequency-doubled copy of the laser) ``2 phi_k`` and both local
    oscillators ``phi_k``, so each branch is an ideal run in a rotated frame.
    """
    cutoff = config.resolved_cutoff()
    count = config.resolved_branches()
    phases = phase_nodes(count)
    branches, records = [], []
    avg = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        for phi_k in phases:
            if config.input_state is None:
                branch_cfg = config.replace(phi=config.phi + phi_k)
            else:
                branch_cfg = config.replace(input_state=_input_state(config, cutoff, phi_k))
            branch_cfg = branch_cfg.replace(resource="pure", resource_phase=config.resource_phase + 2 * phi_k)
            res = ideal_cvqt_run(branch_cfg)
            branches.append(res)
            avg += res.average_output.matrix / count
            records.append(
                TeleportationRecord(
                    outcome=None,
                    weight=1.0 / count,
                    fidelity=res.average_fidelity,
                    output=res.average_output.normalized(),
                    branch_phase=float(phi_k),
                )
            )
        averaged = DensityOperator(ModeSystem((cutoff,)), avg)
        fixed = _input_state(config, cutoff)
        fixed_fid = uhlmann_fidelity(fixed, averaged.normalized())
        laser_fid = (
            uhlmann_fidelity(laser_density(config.alpha, cutoff), averaged.normalized())
            if config.input_state is None
            else float("nan")
        )
    return SharedLaserResult(
        branches=branches,
        records=records,
        averaged_output=averaged,
        conditional_fidelity=float(np.mean([r.fidelity for r in records])),
        fixed_coherent_fidelity=fixed_fid,
        laser_fidelity=laser_fid,
        averaged_offdiagonal=averaged.max_offdiagonal(),
        phases=phases,
        warnings=_collect_warnings(caught),
    )


@dataclass(frozen=True)
class QuadratureCheck:
    theta: float
    exact_mean: float
    ideal_mean: float
    sample_mean: float
    standard_error: float
    sample_variance: float


@dataclass(frozen=True)
class VerificationReport:
    lo_mode: str
    shots: int
    quadratures: tuple[QuadratureCheck, ...]
    fidelity_estimate: float
    exact_fidelity: float


def _gaussian_estimate(mean_x, var_x, mean_p, var_p, target: complex) -> float:
    mu = np.array([mean_x, mean_p])
    cov = np.diag([var_x, var_p])
    return gaussian.overlap_fidelity(mu, cov, *gaussian.coherent_moments(abs(target), np.angle(target)))


def victor_verification(
    result: SharedLaserResult,
    config: ProtocolConfig,
    lo_mode: str = "shared",
    shots: int = 20000,
    seed: int | None = None,
    thetas: Sequence[float] = (0.0, math.pi / 2),
    grid: QuadratureGrid = QuadratureGrid(0.05),
) -> VerificationReport:
    """Victor checks Bob's output with homodyne detection.

    With ``lo_mode='shared'`` his oscillator is split off the same laser, so in
    branch ``phi_k`` he measures ``x_{theta + phi_k}``. With ``'independent'``
    his oscillator phase is unrelated to the laser. The fidelity estimate
    fits a Gaussian to the ``theta = 0`` and ``pi/2`` samples and compares
    it with ``|alpha e^{i phi}>`` in his own oscillator frame.
    """
    if lo_mode not in ("shared", "independent"):
        raise ValueError(f"lo_mode must be 'shared' or 'independent', got {lo_mode!r}")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    outputs = [b.average_output.normalized() for b in result.branches]
    ideal = outputs[0]
    thetas = sorted({0.0, math.pi / 2, *map(float, thetas)})
    checks = []
    moments = {}
    for theta in thetas:
        if lo_mode == "shared":
            dists = [homodyne_distribution(o, 0, theta + phi, grid) for o, phi in zip(outputs, result.phases)]
        else:
            dists = [homodyne_distribution(o, 0, theta, grid) for o in outputs]
        choice = rng.integers(len(dists), size=shots)
        samples = np.empty(shots)
        for k, dist in enumerate(dists):
            hit = choice == k
            if hit.any():
                samples[hit] = sample_homodyne(dist, rng, size=int(hit.sum()))
        exact = float(np.mean([dist.mean() for dist in dists]))
        exact_second = float(np.mean([dist.variance() + dist.mean() ** 2 for dist in dists]))
        ideal_mean = homodyne_distribution(ideal, 0, theta, grid).mean()
        var = float(samples.var(ddof=1))
        checks.append(
            QuadratureCheck(theta, exact, ideal_mean, float(samples.mean()), math.sqrt(var / shots), var)
        )
        moments[theta] = (float(samples.mean()), var, exact, exact_second - exact**2)
    if config.input_state is None:
        target = config.alpha * np.exp(1j * config.phi)
    else:
        target = expectation(config.input_state, annihilation(config.input_state.system.cutoffs[0]))
    mx, vx, ex, evx = moments[0.0]
    mp, vp, ep, evp = moments[math.pi / 2]
    return VerificationReport(
        lo_mode=lo_mode,
        shots=shots,
        quadratures=tuple(checks),
        fidelity_estimate=_gaussian_estimate(mx, vx, mp, vp, target),
        exact_fidelity=_gaussian_estimate(ex, evx, ep, evp, target),
    )


# ----------------------------------------------------------------------------
# Criteria analyses


def split_laser(alpha: float, spec: BeamSplitterSpec, cutoff: int, coherent_phase: float | None = None) -> State:
    """Laser light (or, with ``coherent_phase``, a pure coherent state) split on ``spec``.

    Mode 0 is the reflected port, mode 1 the transmitted port.
    """
    vac = fock_state(0, cutoff)
    if coherent_phase is None:
        light = laser_density(alpha, cutoff)
    else:
        light = coherent_state(alpha, coherent_phase, cutoff)
    state = tensor_product(vac, light)
    return apply_unitary(state, beam_splitter(spec, state.system, (1, 0)), (1, 0))


def rho_bs_oracle_gap(alpha: float, r: float, t: float, cutoff: int) -> float:
    """Max entrywise gap between the simulated split laser and the term-by-term form.

    The simulation runs at cutoff ``2 * cutoff`` so that every sector the
    window can see is complete, then the ``cutoff`` window is compared.
    """
    big = split_laser(alpha, BeamSplitterSpec(r, t), 2 * cutoff)
    window = restrict(big, (cutoff, cutoff))
    closed = rho_bs_closed_form(alpha, r, t, (cutoff, cutoff))
    return float(np.abs(window.matrix - closed.matrix).max())


@dataclass(frozen=True)
class CriterionAReport:
    alpha: float
    product_distance: float
    mutual_information: float
    closed_form_gap: float


def criterion_a_check(
    alpha: float, r: float, t: float, cutoff: int | None = None, coherent_phase: float | None = None
) -> CriterionAReport:
    """How far the split laser field is from a product of its two marginals."""
    cutoff = cutoff or coherent_cutoff(alpha)
    rho = split_laser(alpha, BeamSplitterSpec(r, t), cutoff, coherent_phase)
    rho = rho.density() if isinstance(rho, PureState) else rho
    m0, m1 = partial_trace(rho, [0]), partial_trace(rho, [1])
    mutual = von_neumann_entropy(m0) + von_neumann_entropy(m1) - von_neumann_entropy(rho)
    return CriterionAReport(
        alpha=alpha,
        product_distance=trace_distance(rho, tensor_product(m0, m1)),
        mutual_information=max(0.0, mutual),
        closed_form_gap=rho_bs_oracle_gap(alpha, r, t, min(cutoff, 12)),
    )


@dataclass(frozen=True)
class CriterionBReport:
    alpha: float
    classical_residual: float
    joint_dephasing_residual: float
    witness: complex
    witness_expected: float


def criterion_b_check(alpha: float, r: float, t: float, cutoff: int | None = None) -> CriterionBReport:
    """Distance of the split laser field from the locally preparable Fock mixtures.

    The nearest state of the form ``sum c_ij |i><i| x |j><j|`` in the sense
    used here is the per-mode dephased projection; the witness element
    ``<1,0| rho |0,1>`` is exactly what that projection erases.
    """
    cutoff = cutoff or coherent_cutoff(alpha)
    rho = split_laser(alpha, BeamSplitterSpec(r, t), cutoff)
    return CriterionBReport(
        alpha=alpha,
        classical_residual=trace_distance(rho, dephase_fock(rho, [0, 1])),
        joint_dephasing_residual=trace_distance(rho, dephase_fock(rho, [0, 1], joint=True)),
        witness=rho.element((1, 0), (0, 1)) if cutoff >= 1 else 0j,
        witness_expected=math.exp(-(alpha**2)) * r * t * alpha**2,
    )


@dataclass(frozen=True)
class CriterionCReport:
    eta: float
    averaged_negativity: float
    pure_negativity: float
    averaged_offdiagonal: float
    ensemble_gap: float


def criterion_c_check(eta: float, cutoff: int | None = None) -> CriterionCReport:
    """Log-negativity of the pump-phase-averaged pair against the pure pair."""
    cutoff = cutoff or squeezed_cutoff(eta)
    averaged = tmsv_phase_averaged(eta, cutoff)
    pure = tmsv_pure(eta, 0.0, cutoff)
    mixed = mix_ensemble(tmsv_ensemble(eta, cutoff))
    return CriterionCReport(
        eta=eta,
        averaged_negativity=log_negativity(averaged, [0]),
        pure_negativity=log_negativity(pure, [0]),
        averaged_offdiagonal=averaged.max_offdiagonal(),
        ensemble_gap=trace_distance(mixed, averaged),
    )


# ----------------------------------------------------------------------------
# Partition-ensemble test


@dataclass(frozen=True)
class Povm:
    name: str
    probabilities: Callable[[PureState], np.ndarray]


def default_battery(
    system: ModeSystem,
    seed: int = 0,
    lo_phases: int = 8,
    random_projectors: int = 48,
    grid: QuadratureGrid = QuadratureGrid(0.05),
) -> list[Povm]:
    """Homodyne bins at random LO phases, photon counting and random rank-1 tests."""
    rng = np.random.default_rng(seed)
    battery = []
    for mode in range(system.num_modes):
        for theta in rng.uniform(0, 2 * np.pi, size=lo_phases):
            battery.append(
                Povm(
                    f"homodyne[mode={mode}, theta={theta:.6f}]",
                    lambda psi, m=mode, th=theta: homodyne_distribution(psi, m, th, grid).probabilities,
                )
            )
        battery.append(Povm(f"counting[mode={mode}]", lambda psi, m=mode: _counting(psi, m)))
    if system.num_modes > 1:
        battery.append(Povm("counting[joint]", lambda psi: np.abs(psi.amplitudes) ** 2))
    for k in range(random_projectors):
        u = rng.normal(size=system.dim) + 1j * rng.normal(size=system.dim)
        u /= np.linalg.norm(u)
        battery.append(Povm(f"projector[{k}]", lambda psi, u=u: np.array([abs(np.vdot(u, psi.amplitudes)) ** 2])))
    return battery


def _counting(psi: PureState, mode: int) -> np.ndarray:
    t = np.moveaxis(np.abs(psi.tensor()) ** 2, mode, 0)
    return t.reshape(t.shape[0], -1).sum(axis=1)


@dataclass(frozen=True)
class PefReport:
    state_distance: float
    povm_count: int
    max_discrepancy: float
    discrepancies: tuple[tuple[str, float], ...]


def ensemble_statistics(ensemble: Ensemble, povm: Povm) -> np.ndarray:
    """Outcome probabilities of ``povm`` computed member by member."""
    return sum(w * povm.probabilities(psi) for w, psi in ensemble.members)


def pef_equivalence_test(
    ensemble_a: Ensemble, ensemble_b: Ensemble, battery: Sequence[Povm] | None = None, seed: int = 0
) -> PefReport:
    """Compare two decompositions of one density operator across a measurement battery."""
    if ensemble_a.system != ensemble_b.system:
        raise ValueError("ensembles live on different mode systems")
    distance = trace_distance(mix_ensemble(ensemble_a), mix_ensemble(ensemble_b))
    if distance >= 1e-10:
        raise ValueError(f"ensembles describe different states (trace distance {distance:.3g})")
    battery = default_battery(ensemble_a.system, seed) if battery is None else battery
    found = []
    for povm in battery:
        diff = np.abs(ensemble_statistics(ensemble_a, povm) - ensemble_statistics(ensemble_b, povm))
        found.append((povm.name, float(diff.max())))
    return PefReport(distance, len(found), max(d for _, d in found), tuple(found))


def split_coherent_ensemble(alpha: float, spec: BeamSplitterSpec, cutoff: int, count: int | None = None) -> Ensemble:
    """Split laser as a uniform mixture of product coherent states (reflected, transmitted)."""
    count = count or default_phase_count(cutoff)
    members = []
    for phi in phase_nodes(count):
        refl = coherent_state(spec.r * alpha, phi + math.pi / 2, cutoff)
        trans = coherent_state(spec.t * alpha, phi, cutoff)
        members.append((1.0 / count, tensor_product(refl, trans)))
    return Ensemble(tuple(members))


def split_number_ensemble(alpha: float, spec: BeamSplitterSpec, cutoff: int) -> Ensemble:
    """Split laser as a Poisson mixture of split number states (entangled members)."""
    system = ModeSystem((cutoff, cutoff))
    unitary = beam_splitter(spec, system, (1, 0))
    members = []
    for w, n_state in fock_ensemble(alpha, cutoff).members:
        psi = tensor_product(fock_state(0, cutoff), n_state)
        members.append((w, apply_unitary(psi, unitary, (1, 0), check=False)))
    return Ensemble(tuple(members))


@dataclass(frozen=True)
class PefFlagshipReport:
    alpha: float
    laser: PefReport
    split: PefReport
    coherent_member_entropy: float
    number_member_entropy: float


def pef_flagship(alpha: float, cutoff: int | None = None, seed: int = 0) -> PefFlagshipReport:
    """Coherent-state and number-state pictures of the laser, alone and after a 50/50 split."""
    cutoff = cutoff or coherent_cutoff(alpha)
    laser = pef_equivalence_test(laser_ensemble(alpha, cutoff), fock_ensemble(alpha, cutoff), seed=seed)
    spec = BeamSplitterSpec.balanced()
    coh = split_coherent_ensemble(alpha, spec, cutoff)
    num = split_number_ensemble(alpha, spec, cutoff)
    split = pef_equivalence_test(coh, num, seed=seed)

    def mean_entropy(ens):
        return float(sum(w * entanglement_entropy(psi.normalized(), [0]) for w, psi in ens.members))

    return PefFlagshipReport(alpha, laser, split, mean_entropy(coh), mean_entropy(num))


# ----------------------------------------------------------------------------
# Sweeps


def _sweep_point(args) -> dict:
    config, name, value = args
    cfg = config.replace(**{name: value})
    res = run(cfg)
    row = {name: value, "cutoff": cfg.resolved_cutoff(), "fidelity": res.average_fidelity}
    if cfg.input_state is None and cfg.resource == "pure":
        row["oracle_fidelity"] = gaussian.teleport_fidelity(
            cfg.alpha, cfg.phi, cfg.eta, cfg.resource_phase, lo_angle_for(cfg.resource_phase), cfg.gain
        )
    row["total_weight"] = res.total_weight
    return row


def fidelity_sweep(config: ProtocolConfig, name: str, values: Sequence[float], jobs: int = 1) -> list[dict]:
    """Average fidelity as ``config.<name>`` runs over ``values`` (rows in input order)."""
    if name not in ("eta", "alpha", "gain"):
        raise ValueError(f"cannot sweep {name!r}")
    tasks = [(config, name, float(v)) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]
