"""Pulses, one-period Floquet operators and protocol runs

Time order inside a period: the H2I-interleaved evolution
[P+ U_H(T/n) P- U_H(T/n)]^(n/2) runs first and the Floquet pulse F closes the
period at t = (k + 1)T. Stored matrices are written in matrix order, F @ bracket.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .hilbert import (
    IDENTITY2,
    PAULI,
    HermitianOperator,
    StateVector,
    UnitaryOperator,
    build_hamiltonian,
    initial_state,
    propagator,
    site_operator_product,
    spin_vectors,
)
from .spinmodel import (
    Axis,
    ChainSpec,
    DisorderRealization,
    DriveProtocol,
    ErrorSense,
    GlobalRotation,
    InitialStateSpec,
    Model,
    ProtocolError,
    SetFloquetAxis,
    SetH2IAxis,
)

__all__ = [
    "PeriodAssembler",
    "PeriodOperator",
    "ProtocolError",
    "PulseUnitary",
    "SampleTag",
    "SampleTime",
    "SamplingMode",
    "Segment",
    "TrajectoryRecord",
    "assemble_period",
    "global_pulse",
    "rotation_unitary",
    "run_protocol",
]


class SamplingMode(str, Enum):
    """Which states run_protocol records"""

    STROBOSCOPIC_2T = "stroboscopic_2t"
    EVERY_PERIOD = "every_period"
    INTRA_PERIOD = "intra_period"

    def __str__(self):
        return self.value


class SampleTag(str, Enum):
    """Position of a sample relative to the Floquet pulse"""

    PRE_PULSE = "pre_pulse"
    POST_PULSE = "post_pulse"
    SEGMENT = "segment"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SampleTime:
    """Recorded instant

    Args:
        period (int): period boundary the sample belongs to, t = period * T
            for pulse samples
        tag (SampleTag): pre-pulse, post-pulse or inner segment boundary
        step (int): running segment-boundary counter, strictly increasing
        time (float): time in units of T
    """

    period: int
    tag: SampleTag
    step: int
    time: float


@dataclass(frozen=True)
class PulseUnitary:
    """exp(+i (nominal_angle - error) sum_targets sigma^axis)"""

    operator: UnitaryOperator
    axis: Axis
    nominal_angle: float
    error: float
    targets: Tuple[int, ...]

    @property
    def empty_targets(self) -> bool:
        """True when the pulse acts on no site and is the identity"""
        return not self.targets

    @property
    def net_angle(self) -> float:
        return self.nominal_angle - self.error


def global_pulse(
    n_sites: int,
    axis: Axis,
    nominal_angle: float,
    error: float,
    targets: Optional[Sequence[int]] = None,
) -> PulseUnitary:
    """Instantaneous rotation of the targeted spins

    Single-site factors commute, so the exponential is the Kronecker
    product of cos(phi) 1 + i sin(phi) sigma on every target.

    Args:
        n_sites (int): chain length
        axis (Axis): rotation axis
        nominal_angle (float): phi_0 in exp(+i (phi_0 - error) sigma)
        error (float): rotation error subtracted from the nominal angle
        targets (list, optional): 1-based sites. Defaults to all sites.

    Returns:
        PulseUnitary: the pulse
    """
    logger = logging.getLogger(__name__ + ".global_pulse")
    axis = Axis(axis)
    if targets is None:
        targets = range(1, n_sites + 1)
    targets = tuple(sorted(set(targets)))
    outside = [site for site in targets if not 1 <= site <= n_sites]
    if outside:
        raise ProtocolError(
            f"Pulse targets {outside} outside chain of {n_sites} sites"
        )
    if not targets:
        logger.warning("Pulse about %s has no target sites, using identity", axis)
    angle = nominal_angle - error
    single = math.cos(angle) * IDENTITY2 + 1j * math.sin(angle) * PAULI[axis]
    matrix = site_operator_product(n_sites, {site: single for site in targets})
    return PulseUnitary(
        operator=UnitaryOperator(matrix),
        axis=axis,
        nominal_angle=nominal_angle,
        error=error,
        targets=targets,
    )


def rotation_unitary(n_sites: int, rotation: GlobalRotation) -> UnitaryOperator:
    """Error-free exp(-i angle/2 sum sigma^axis) on every spin

    Args:
        n_sites (int): chain length
        rotation (GlobalRotation): axis and angle

    Returns:
        UnitaryOperator: the rotation
    """
    return global_pulse(n_sites, rotation.axis, -rotation.angle / 2, 0.0).operator


@dataclass(frozen=True)
class Segment:
    """One factor of a period, duration 0 for instantaneous pulses"""

    label: str
    unitary: UnitaryOperator
    duration: float


@dataclass(frozen=True)
class PeriodOperator:
    """Floquet operator of one period and the factors composing it

    Args:
        unitary (UnitaryOperator): the full period
        segments (tuple): factors in time order, first applied first
        evolution (UnitaryOperator): everything before the Floquet pulse
        floquet_pulse (PulseUnitary|None): the closing pulse, None if disabled
    """

    unitary: UnitaryOperator
    segments: Tuple[Segment, ...]
    evolution: UnitaryOperator
    floquet_pulse: Optional[PulseUnitary]

    def segment_product(self) -> np.ndarray:
        """Time-ordered product of the segments"""
        product = np.eye(len(self.unitary.matrix), dtype=complex)
        for segment in self.segments:
            product = segment.unitary.matrix @ product
        return product

    def segment_product_defect(self) -> float:
        """Max-norm between the stored operator and its segment product"""
        return float(np.max(np.abs(self.segment_product() - self.unitary.matrix)))


class PeriodAssembler:
    """Builds period operators for one realization

    The Hamiltonian and U_H(T/n) are computed once; period operators are
    cached per (floquet axis, h2i axis) pair.

    Args:
        model (Model): static interaction
        spec (ChainSpec): the chain
        real (DisorderRealization): couplings and fields
        protocol (DriveProtocol): pulse schedule
    """

    def __init__(
        self,
        model: Model,
        spec: ChainSpec,
        real: DisorderRealization,
        protocol: DriveProtocol,
    ):
        self._logger = logging.getLogger(__name__ + ".PeriodAssembler")
        self._spec = spec
        self._protocol = protocol
        self._hamiltonian = build_hamiltonian(model, spec, real)
        self._targets = protocol.targets_for(spec.n_sites)
        self._evolutions = {}
        self._periods = {}

    @property
    def hamiltonian(self) -> HermitianOperator:
        return self._hamiltonian

    @property
    def n_sites(self) -> int:
        return self._spec.n_sites

    def free_evolution(self, duration: float) -> UnitaryOperator:
        """U_H(duration), cached per duration"""
        if duration not in self._evolutions:
            self._evolutions[duration] = propagator(self._hamiltonian, duration)
        else:
            self._logger.debug("Reusing U_H(%s)", duration)
        return self._evolutions[duration]

    def period(self, floquet_axis: Axis, h2i_axis: Axis) -> PeriodOperator:
        """Period operator for the given axes

        Args:
            floquet_axis (Axis): axis of the closing Floquet pulse
            h2i_axis (Axis): axis of the H2I pulses

        Returns:
            PeriodOperator: the operator with its segments
        """
        key = (Axis(floquet_axis), Axis(h2i_axis))
        if key not in self._periods:
            self._logger.debug("Assembling period for axes %s", key)
            self._periods[key] = self._assemble(*key)
        return self._periods[key]

    def _assemble(self, floquet_axis: Axis, h2i_axis: Axis) -> PeriodOperator:
        protocol = self._protocol
        n_sites = self.n_sites
        count = protocol.h2i_count
        if count == 0:
            evolution = self.free_evolution(1.0)
            segments = [Segment("evolve", evolution, 1.0)]
        else:
            step = self.free_evolution(1.0 / count)
            plus = global_pulse(
                n_sites, h2i_axis, math.pi / 2, protocol.h2i_error, self._targets
            )
            # SAME: exp(-i(pi/2 + err) sigma) is -1 times the plus pulse per site
            minus_error = protocol.h2i_error
            if protocol.h2i_error_sense is ErrorSense.OPPOSED:
                minus_error = -minus_error
            minus = global_pulse(
                n_sites, h2i_axis, -math.pi / 2, minus_error, self._targets
            )
            block = plus.operator.matrix @ step.matrix @ minus.operator.matrix
            block = block @ step.matrix
            evolution = UnitaryOperator(np.linalg.matrix_power(block, count // 2))
            segments = [
                Segment("evolve", step, 1.0 / count),
                Segment("h2i_minus", minus.operator, 0.0),
                Segment("evolve", step, 1.0 / count),
                Segment("h2i_plus", plus.operator, 0.0),
            ] * (count // 2)
        pulse = None
        unitary = evolution
        if protocol.floquet_pulse:
            pulse = global_pulse(
                n_sites, floquet_axis, math.pi / 2, protocol.floquet_error
            )
            segments.append(Segment("floquet", pulse.operator, 0.0))
            unitary = pulse.operator @ evolution
        return PeriodOperator(
            unitary=unitary,
            segments=tuple(segments),
            evolution=evolution,
            floquet_pulse=pulse,
        )


def assemble_period(
    model: Model,
    spec: ChainSpec,
    real: DisorderRealization,
    protocol: DriveProtocol,
    floquet_axis: Optional[Axis] = None,
    h2i_axis: Optional[Axis] = None,
) -> PeriodOperator:
    """Floquet operator of one period

    Args:
        model (Model): static interaction
        spec (ChainSpec): the chain
        real (DisorderRealization): couplings and fields
        protocol (DriveProtocol): pulse schedule
        floquet_axis (Axis, optional): overrides protocol.floquet_axis
        h2i_axis (Axis, optional): overrides protocol.h2i_axis

    Returns:
        PeriodOperator: F @ [P+ U_H(T/n) P- U_H(T/n)]^(n/2)
    """
    assembler = PeriodAssembler(model, spec, real, protocol)
    return assembler.period(
        floquet_axis or protocol.floquet_axis, h2i_axis or protocol.h2i_axis
    )


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Per-site spin vectors at the recorded instants

    Args:
        times (tuple): SampleTime per sample, step strictly increasing
        spin_vectors (np.ndarray): (samples, sites, 3) array
        n_periods (int): number of simulated periods
    """

    times: Tuple[SampleTime, ...]
    spin_vectors: np.ndarray
    n_periods: int

    @property
    def n_sites(self) -> int:
        return self.spin_vectors.shape[1]

    @property
    def end_site_length(self) -> np.ndarray:
        """Spin-vector length of site 1 per sample"""
        return np.linalg.norm(self.spin_vectors[:, 0, :], axis=1)

    def site_lengths(self, site: int) -> np.ndarray:
        if not 1 <= site <= self.n_sites:
            raise ValueError(f"Site {site} outside chain of {self.n_sites} sites")
        return np.linalg.norm(self.spin_vectors[:, site - 1, :], axis=1)

    def select(self, tag: SampleTag) -> "TrajectoryRecord":
        """Samples with the given tag only"""
        keep = [index for index, time in enumerate(self.times) if time.tag is tag]
        return TrajectoryRecord(
            times=tuple(self.times[index] for index in keep),
            spin_vectors=self.spin_vectors[keep],
            n_periods=self.n_periods,
        )

    def stroboscopic(self, stride: int = 2) -> Dict[int, np.ndarray]:
        """Post-pulse spin vectors keyed by period, periods divisible by stride

        Returns:
            dict: period -> (sites, 3) array
        """
        return {
            time.period: self.spin_vectors[index]
            for index, time in enumerate(self.times)
            if time.tag is SampleTag.POST_PULSE and time.period % stride == 0
        }


class _Recorder:
    """Collects samples according to a sampling mode"""

    def __init__(self, mode: SamplingMode):
        self._mode = SamplingMode(mode)
        self._times: List[SampleTime] = []
        self._vectors: List[np.ndarray] = []
        self._step = 0

    @property
    def mode(self) -> SamplingMode:
        return self._mode

    def record(self, state: StateVector, period: int, tag: SampleTag, time: float):
        self._times.append(SampleTime(period, tag, self._step, time))
        self._vectors.append(spin_vectors(state))

    def advance(self):
        self._step += 1

    def wants_boundary(self, period: int, tag: SampleTag) -> bool:
        if self._mode is SamplingMode.INTRA_PERIOD:
            return True
        if self._mode is SamplingMode.EVERY_PERIOD:
            return tag is not SampleTag.SEGMENT
        return tag is SampleTag.POST_PULSE and period % 2 == 0

    def finish(self, n_periods: int) -> TrajectoryRecord:
        return TrajectoryRecord(
            times=tuple(self._times),
            spin_vectors=np.array(self._vectors).reshape(
                len(self._vectors), -1, 3
            ),
            n_periods=n_periods,
        )


def _boundary_tags(n_segments: int, floquet_pulse: bool) -> Iterator[SampleTag]:
    for index in range(n_segments):
        last = index == n_segments - 1
        if last:
            yield SampleTag.POST_PULSE
        elif floquet_pulse and index == n_segments - 2:
            yield SampleTag.PRE_PULSE
        else:
            yield SampleTag.SEGMENT


def run_protocol(
    model: Model,
    spec: ChainSpec,
    real: DisorderRealization,
    protocol: DriveProtocol,
    initial: InitialStateSpec,
    n_periods: int,
    sampling: SamplingMode = SamplingMode.STROBOSCOPIC_2T,
    assembler: Optional[PeriodAssembler] = None,
) -> TrajectoryRecord:
    """Evolve an initial state period by period and record spin vectors

    Events at period k fire at t = kT, after the sample at that boundary and
    before the period's first segment. The initial state is always recorded
    as the post-pulse sample of period 0.

    Args:
        model (Model): static interaction
        spec (ChainSpec): the chain
        real (DisorderRealization): couplings and fields
        protocol (DriveProtocol): pulse schedule and events
        initial (InitialStateSpec): starting product state
        n_periods (int): number of periods to simulate
        sampling (SamplingMode): what to record
        assembler (PeriodAssembler, optional): reuse cached operators

    Returns:
        TrajectoryRecord: the recorded samples
    """
    logger = logging.getLogger(__name__ + ".run_protocol")
    if n_periods < 1:
        raise ProtocolError(f"n_periods must be >= 1, got {n_periods}")
    late = [
        event.period_index
        for event in protocol.events
        if event.period_index > n_periods
    ]
    if late:
        raise ProtocolError(
            f"Events at periods {late} fall after the last period {n_periods}"
        )
    if assembler is None:
        assembler = PeriodAssembler(model, spec, real, protocol)
    n_sites = spec.n_sites
    state = initial_state(initial, n_sites)
    recorder = _Recorder(sampling)
    recorder.record(state, 0, SampleTag.POST_PULSE, 0.0)
    events = protocol.events_by_period()
    floquet_axis = protocol.floquet_axis
    h2i_axis = protocol.h2i_axis
    for period in range(n_periods):
        for action in events.get(period, ()):
            if isinstance(action, GlobalRotation):
                logger.debug("Period %s: rotating %s", period, action)
                state = state.evolve(rotation_unitary(n_sites, action))
            elif isinstance(action, SetFloquetAxis):
                floquet_axis = action.axis
            elif isinstance(action, SetH2IAxis):
                h2i_axis = action.axis
            else:
                raise ProtocolError(f"Unknown protocol action {action!r}")
        operator = assembler.period(floquet_axis, h2i_axis)
        end = period + 1
        if recorder.mode is SamplingMode.INTRA_PERIOD:
            state = _run_segments(state, operator, period, recorder)
            continue
        if recorder.wants_boundary(end, SampleTag.PRE_PULSE) and operator.floquet_pulse:
            recorder.advance()
            state = state.evolve(operator.evolution)
            recorder.record(state, end, SampleTag.PRE_PULSE, float(end))
            recorder.advance()
            state = state.evolve(operator.floquet_pulse.operator)
        else:
            recorder.advance()
            state = state.evolve(operator.unitary)
        if recorder.wants_boundary(end, SampleTag.POST_PULSE):
            recorder.record(state, end, SampleTag.POST_PULSE, float(end))
    for action in events.get(n_periods, ()):
        logger.debug("Ignoring %s at the final boundary %s", action, n_periods)
    return recorder.finish(n_periods)


def _run_segments(
    state: StateVector,
    operator: PeriodOperator,
    period: int,
    recorder: _Recorder,
) -> StateVector:
    time = float(period)
    tags = _boundary_tags(len(operator.segments), operator.floquet_pulse is not None)
    for segment, tag in zip(operator.segments, tags):
        recorder.advance()
        state = state.evolve(segment.unitary)
        time += segment.duration
        if tag is SampleTag.SEGMENT:
            recorder.record(state, period, tag, time)
        else:
            recorder.record(state, period + 1, tag, float(period + 1))
    return state
