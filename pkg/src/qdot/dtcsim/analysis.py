"""Order parameters and purity diagnostics on recorded trajectories"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .floquet import (
    PeriodAssembler,
    SampleTag,
    SamplingMode,
    TrajectoryRecord,
    run_protocol,
)
from .spinmodel import (
    Axis,
    ChainSpec,
    DisorderRealization,
    DriveProtocol,
    Model,
    ProductBloch,
)

DEFAULT_ELL = 100
DEFAULT_BLOCH_GRID = (8, 8)
RANGE_SLACK = 1e-10


class InsufficientSamplesError(ValueError):
    """Raised when a trajectory lacks the samples a diagnostic needs"""


class BlochMeasure(str, Enum):
    """Weighting of the initial states in a Bloch average

    SPHERE spreads the states evenly over the sphere, ANGLES spaces theta
    and chi evenly, which puts more weight near the poles.
    """

    SPHERE = "sphere"
    ANGLES = "angles"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TimeAverage:
    """Mean of a spin component over the samples at t = 2mT, m = 0..ell"""

    value: float
    ell: int
    site: int
    axis: Axis

    def __post_init__(self):
        if abs(self.value) > 1 + RANGE_SLACK:
            raise ValueError(f"Time average {self.value} outside [-1, 1]")


@dataclass(frozen=True)
class PurityAverage:
    """Bloch-sphere and disorder averaged end-spin purity

    Args:
        value (float): average spin-vector length in [0, 1]
        grid (tuple): (theta, chi) pairs of the initial states used
        n_periods (int): periods averaged over
        realizations (int): disorder realizations per grid point
        stderr (float): standard error over realizations
    """

    value: float
    grid: Tuple[Tuple[float, float], ...]
    n_periods: int
    realizations: int
    stderr: float = float("nan")

    def __post_init__(self):
        if not -RANGE_SLACK <= self.value <= 1 + RANGE_SLACK:
            raise ValueError(f"Purity {self.value} outside [0, 1]")


def stroboscopic_series(
    traj: TrajectoryRecord, site: int, axis: Axis, ell: int = DEFAULT_ELL
) -> np.ndarray:
    """Spin component at t = 2mT for m = 0..ell

    Args:
        traj (TrajectoryRecord): recorded trajectory, any sampling mode
        site (int): 1-based site
        axis (Axis): component
        ell (int): last m

    Returns:
        np.ndarray: ell + 1 values
    """
    if not 1 <= site <= traj.n_sites:
        raise ValueError(f"Site {site} outside chain of {traj.n_sites} sites")
    samples = traj.stroboscopic(stride=2)
    missing = [m for m in range(ell + 1) if 2 * m not in samples]
    if missing:
        raise InsufficientSamplesError(
            f"Trajectory over {traj.n_periods} periods lacks samples at"
            f" 2mT for m in {missing[:5]}{'...' if len(missing) > 5 else ''},"
            f" need m = 0..{ell}"
        )
    component = Axis(axis).index
    return np.array(
        [samples[2 * m][site - 1, component] for m in range(ell + 1)]
    )


def time_averaged_component(
    traj: TrajectoryRecord,
    site: int = 1,
    axis: Axis = Axis.Z,
    ell: int = DEFAULT_ELL,
) -> TimeAverage:
    """(1 / (ell + 1)) sum_m <sigma_site^axis(2mT)>

    Args:
        traj (TrajectoryRecord): trajectory of at least 2 * ell periods
        site (int): 1-based site. Defaults to 1.
        axis (Axis): component. Defaults to z.
        ell (int): number of double periods. Defaults to 100.

    Returns:
        TimeAverage: the order parameter
    """
    series = stroboscopic_series(traj, site, axis, ell)
    return TimeAverage(
        value=float(np.mean(series)), ell=ell, site=site, axis=Axis(axis)
    )


def end_spin_purity(traj: TrajectoryRecord, site: int = 1) -> np.ndarray:
    """Spin-vector length of one site at every recorded sample

    Args:
        traj (TrajectoryRecord): recorded trajectory
        site (int): 1-based site. Defaults to the chain end.

    Returns:
        np.ndarray: one length per sample
    """
    return traj.site_lengths(site)


def post_pulse_vectors(traj: TrajectoryRecord, site: int = 1) -> np.ndarray:
    """Spin vectors of a site after the pulse of every period 1..n

    Args:
        traj (TrajectoryRecord): trajectory recorded with every_period sampling
        site (int): 1-based site

    Returns:
        np.ndarray: (n_periods, 3) array
    """
    post = traj.select(SampleTag.POST_PULSE)
    periods = [time.period for time in post.times]
    wanted = list(range(1, traj.n_periods + 1))
    if periods[1:] != wanted:
        raise InsufficientSamplesError(
            f"Need post-pulse samples for every period 1..{traj.n_periods}"
        )
    return post.spin_vectors[1:, site - 1, :]


def ensemble_purity(vectors: np.ndarray) -> Tuple[float, float]:
    """Mean length of disorder-averaged spin vectors

    The first axis runs over realizations, the last over (x, y, z). Lengths
    are taken after averaging over realizations and then averaged over
    everything else. The standard error projects every realization onto
    the averaged directions.

    Args:
        vectors (np.ndarray): (realizations, ..., 3) array

    Returns:
        tuple: (value, stderr), stderr is NaN for a single realization
    """
    vectors = np.asarray(vectors, dtype=float)
    n_real = vectors.shape[0]
    mean = vectors.mean(axis=0)
    lengths = np.linalg.norm(mean, axis=-1)
    value = float(lengths.mean())
    if n_real < 2:
        return value, float("nan")
    unit = np.divide(
        mean,
        lengths[..., np.newaxis],
        out=np.zeros_like(mean),
        where=lengths[..., np.newaxis] > 0,
    )
    projections = (vectors * unit).sum(axis=-1).reshape(n_real, -1).mean(axis=1)
    return value, float(projections.std(ddof=1) / math.sqrt(n_real))


def bloch_grid(
    n_theta: int, n_chi: int, measure: BlochMeasure = BlochMeasure.SPHERE
) -> Tuple[ProductBloch, ...]:
    """Initial single-spin states for a Bloch average

    chi sits at 2 pi j / n_chi. With the sphere measure theta sits at
    midpoints of equal cos(2 theta) bins, with the angles measure at
    midpoints of equal theta bins on [0, pi/2].

    Args:
        n_theta (int): polar points, at least 2
        n_chi (int): azimuthal points, at least 2
        measure (BlochMeasure): state weighting. Defaults to the sphere.

    Returns:
        tuple: ProductBloch states, theta outer, chi inner
    """
    if n_theta < 2 or n_chi < 2:
        raise ValueError(
            f"Bloch grid needs at least 2 x 2 points, got {n_theta} x {n_chi}"
        )
    midpoints = (2 * np.arange(n_theta) + 1) / n_theta
    if BlochMeasure(measure) is BlochMeasure.ANGLES:
        thetas = midpoints * math.pi / 4
    else:
        thetas = np.arccos(1 - midpoints) / 2
    chis = 2 * math.pi * np.arange(n_chi) / n_chi
    return tuple(
        ProductBloch(float(theta), float(chi)) for theta in thetas for chi in chis
    )


def bloch_purity_vectors(
    model: Model,
    spec: ChainSpec,
    real: DisorderRealization,
    protocol: DriveProtocol,
    n_periods: int,
    grid: Tuple[ProductBloch, ...],
    site: int = 1,
) -> np.ndarray:
    """Post-pulse spin vectors of one site for every grid state

    Args:
        model (Model): static interaction
        spec (ChainSpec): the chain
        real (DisorderRealization): one disorder draw
        protocol (DriveProtocol): pulse schedule
        n_periods (int): periods per run
        grid (tuple): initial states
        site (int): tracked site

    Returns:
        np.ndarray: (len(grid), n_periods, 3) array
    """
    assembler = PeriodAssembler(model, spec, real, protocol)
    return np.array(
        [
            post_pulse_vectors(
                run_protocol(
                    model,
                    spec,
                    real,
                    protocol,
                    initial,
                    n_periods,
                    SamplingMode.EVERY_PERIOD,
                    assembler=assembler,
                ),
                site,
            )
            for initial in grid
        ]
    )


def bloch_averaged_purity(
    model: Model,
    spec: ChainSpec,
    protocol: DriveProtocol,
    n_periods: int = 2 * DEFAULT_ELL,
    bloch_grid_shape: Tuple[int, int] = DEFAULT_BLOCH_GRID,
    bloch_measure: BlochMeasure = BlochMeasure.SPHERE,
    realizations: int = 50,
    master_seed: int = 0,
    workers: int = 1,
) -> PurityAverage:
    """End-spin purity averaged over initial states, disorder and time

    Runs as a single-cell sweep so seeds follow the sweep contract.

    Args:
        model (Model): static interaction
        spec (ChainSpec): the chain ensemble
        protocol (DriveProtocol): pulse schedule
        n_periods (int): periods averaged over. Defaults to 200.
        bloch_grid_shape (tuple): (n_theta, n_chi). Defaults to (8, 8).
        bloch_measure (BlochMeasure): weighting of the initial states
        realizations (int): disorder draws. Defaults to 50.
        master_seed (int): sweep seed. Defaults to 0.
        workers (int): worker processes. Defaults to 1.

    Returns:
        PurityAverage: the average
    """
    # sweep imports this module
    from .sweep import (
        GridAxis,
        MissingCellsError,
        Observable,
        ObservableKind,
        SweepPlan,
        run_sweep,
    )

    logger = logging.getLogger(__name__ + ".bloch_averaged_purity")
    if n_periods < 2 or n_periods % 2:
        raise ValueError(f"n_periods must be even and >= 2, got {n_periods}")
    grid = bloch_grid(*bloch_grid_shape, bloch_measure)
    plan = SweepPlan(
        model=model,
        chain=spec,
        protocol=protocol,
        initial=grid[0],
        x_axis=GridAxis("j_mean", (spec.j_mean,)),
        y_axis=GridAxis("epsilon", (protocol.floquet_error,)),
        realizations=realizations,
        master_seed=master_seed,
        observable=Observable(ObservableKind.BLOCH_PURITY),
        ell=n_periods // 2,
        bloch_grid=tuple(bloch_grid_shape),
        bloch_measure=bloch_measure,
    )
    diagram = run_sweep(plan, workers=workers)
    if diagram.failures:
        logger.warning("%s realizations failed", len(diagram.failures))
    if np.isnan(diagram.values[0, 0]):
        raise MissingCellsError(diagram.failures)
    return PurityAverage(
        value=float(diagram.values[0, 0]),
        grid=tuple((state.theta, state.chi) for state in grid),
        n_periods=plan.n_periods,
        realizations=int(diagram.n_realizations[0, 0]),
        stderr=float(diagram.stderr[0, 0]),
    )
