"""Disorder-averaged parameter sweeps

Work units are (cell, realization) pairs. Every unit draws its disorder from
derive_seed(master_seed, cell_index, realization), so results depend on the
plan only. Units run in process or on a process pool; results come back in
unit order and are reduced in that order.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from enum import Enum
from functools import partial
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import psutil

from . import __version__
from .analysis import (
    DEFAULT_BLOCH_GRID,
    DEFAULT_ELL,
    BlochMeasure,
    bloch_grid,
    bloch_purity_vectors,
    ensemble_purity,
    post_pulse_vectors,
    time_averaged_component,
)
from .floquet import (
    PeriodAssembler,
    SamplingMode,
    TrajectoryRecord,
    run_protocol,
)
from .spinmodel import (
    Axis,
    ChainSpec,
    DriveProtocol,
    InitialStateSpec,
    Model,
    derive_seed,
    sample_disorder,
)

PARAMETERS = (
    "j_mean",
    "epsilon",
    "j_width",
    "field_width_x",
    "field_width_y",
    "field_width_z",
    "field_mean_z",
    "h2i_count",
    "h2i_error",
    "n_sites",
)
INTEGER_PARAMETERS = ("h2i_count", "n_sites")
DEFAULT_REALIZATIONS = 50
AREA_THRESHOLD = 0.9


class ObservableKind(str, Enum):
    """Quantity evaluated per unit"""

    TIME_AVERAGE_Z = "time_average_z"
    TIME_AVERAGE_X = "time_average_x"
    MEAN_END_PURITY = "mean_end_purity"
    BLOCH_PURITY = "bloch_purity"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Observable:
    kind: ObservableKind = ObservableKind.TIME_AVERAGE_Z
    site: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ObservableKind(self.kind))
        if self.site < 1:
            raise ValueError(f"Observable site must be >= 1, got {self.site}")

    @property
    def is_purity(self) -> bool:
        return self.kind in (
            ObservableKind.MEAN_END_PURITY,
            ObservableKind.BLOCH_PURITY,
        )

    @property
    def value_range(self) -> Tuple[float, float]:
        return (0.0, 1.0) if self.is_purity else (-1.0, 1.0)


@dataclass(frozen=True)
class GridAxis:
    """Named sweep parameter with strictly monotone values"""

    name: str
    values: Tuple[float, ...]

    def __post_init__(self):
        if self.name not in PARAMETERS:
            raise ValueError(
                f"Unknown sweep parameter {self.name!r}, choose from {PARAMETERS}"
            )
        cast = int if self.name in INTEGER_PARAMETERS else float
        values = tuple(cast(value) for value in self.values)
        if not values:
            raise ValueError(f"Grid for {self.name} is empty")
        steps = np.diff(values)
        if len(values) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError(f"Grid for {self.name} is not strictly monotone")
        object.__setattr__(self, "values", values)

    @classmethod
    def linspace(cls, name: str, start: float, stop: float, num: int) -> "GridAxis":
        """Evenly spaced grid including both ends

        Args:
            name (str): parameter name
            start (float): first value
            stop (float): last value
            num (int): number of points

        Returns:
            GridAxis: the axis
        """
        if num < 1:
            raise ValueError(f"Grid for {name} needs num >= 1, got {num}")
        return cls(name, tuple(float(value) for value in np.linspace(start, stop, num)))

    def __len__(self):
        return len(self.values)


def apply_parameter(
    chain: ChainSpec,
    protocol: DriveProtocol,
    initial: InitialStateSpec,
    name: str,
    value: Union[int, float],
) -> Tuple[ChainSpec, DriveProtocol, InitialStateSpec]:
    """Return copies with one catalog parameter set

    Args:
        chain (ChainSpec): base chain
        protocol (DriveProtocol): base protocol
        initial (InitialStateSpec): base initial state
        name (str): catalog name
        value (int|float): the new value

    Returns:
        tuple: (chain, protocol, initial)
    """
    if name == "j_mean":
        chain = replace(chain, j_mean=value)
    elif name == "j_width":
        chain = replace(chain, j_width=value)
    elif name.startswith("field_width_"):
        widths = list(chain.field_width)
        widths[Axis(name[-1]).index] = value
        chain = replace(chain, field_width=tuple(widths))
    elif name == "field_mean_z":
        means = list(chain.field_mean)
        means[Axis.Z.index] = value
        chain = replace(chain, field_mean=tuple(means))
    elif name == "epsilon":
        protocol = replace(protocol, floquet_error=value)
    elif name == "h2i_error":
        protocol = replace(protocol, h2i_error=value)
    elif name == "h2i_count":
        protocol = replace(protocol, h2i_count=int(value))
    elif name == "n_sites":
        n_sites = int(value)
        chain = replace(chain, n_sites=n_sites)
        initial = initial.resized(n_sites)
        if protocol.h2i_targets is not None:
            protocol = replace(
                protocol,
                h2i_targets=tuple(
                    site for site in protocol.h2i_targets if site <= n_sites
                ),
            )
    else:
        raise ValueError(f"Unknown sweep parameter {name!r}")
    return chain, protocol, initial


@dataclass(frozen=True)
class SweepPlan:
    """Everything needed to compute one phase diagram

    Args:
        model (Model): static interaction
        chain (ChainSpec): base ensemble
        protocol (DriveProtocol): base pulse schedule
        initial (InitialStateSpec): initial state, ignored for Bloch purity
        x_axis (GridAxis): column parameter
        y_axis (GridAxis): row parameter
        realizations (int): disorder draws per cell
        master_seed (int): seed of the sweep
        observable (Observable): what each unit evaluates
        ell (int): runs last 2 * ell periods
        bloch_grid (tuple): (n_theta, n_chi) for Bloch purity
        bloch_measure (BlochMeasure): weighting of the Bloch grid states
    """

    model: Model
    chain: ChainSpec
    protocol: DriveProtocol
    initial: InitialStateSpec
    x_axis: GridAxis
    y_axis: GridAxis
    realizations: int = DEFAULT_REALIZATIONS
    master_seed: int = 0
    observable: Observable = field(default_factory=Observable)
    ell: int = DEFAULT_ELL
    bloch_grid: Tuple[int, int] = DEFAULT_BLOCH_GRID
    bloch_measure: BlochMeasure = BlochMeasure.SPHERE

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "bloch_grid", tuple(self.bloch_grid))
        object.__setattr__(
            self, "bloch_measure", BlochMeasure(self.bloch_measure)
        )
        if self.x_axis.name == self.y_axis.name:
            raise ValueError(f"Both sweep axes set {self.x_axis.name}")
        if self.realizations < 1:
            raise ValueError(
                f"realizations must be >= 1, got {self.realizations}"
            )
        if self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")

    @property
    def shape(self) -> Tuple[int, int]:
        """(rows, columns) = (len(y), len(x))"""
        return len(self.y_axis), len(self.x_axis)

    @property
    def n_cells(self) -> int:
        return len(self.y_axis) * len(self.x_axis)

    @property
    def n_periods(self) -> int:
        return 2 * self.ell

    def cell_position(self, cell_index: int) -> Tuple[int, int]:
        """(row, column) of a flat cell index, row major"""
        return divmod(cell_index, len(self.x_axis))

    def configure(
        self, cell_index: int
    ) -> Tuple[ChainSpec, DriveProtocol, InitialStateSpec]:
        """Chain, protocol and initial state of one cell

        Args:
            cell_index (int): flat row-major index

        Returns:
            tuple: (chain, protocol, initial)
        """
        row, column = self.cell_position(cell_index)
        chain, protocol, initial = apply_parameter(
            self.chain,
            self.protocol,
            self.initial,
            self.x_axis.name,
            self.x_axis.values[column],
        )
        return apply_parameter(
            chain, protocol, initial, self.y_axis.name, self.y_axis.values[row]
        )

    def units(self) -> Iterator[Tuple[int, int]]:
        """(cell_index, realization) pairs in reduction order"""
        for cell_index in range(self.n_cells):
            for realization in range(1, self.realizations + 1):
                yield cell_index, realization

    def describe(self) -> Dict[str, Any]:
        """Plain-data description for provenance"""
        return plain(self)


def plain(obj: Any) -> Any:
    """Convert dataclasses, enums and numpy values to YAML-safe data

    Args:
        obj (Any): object to convert

    Returns:
        Any: dicts, lists, strings and numbers only
    """
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        data = {"type": type(obj).__name__}
        data.update(
            {key: plain(getattr(obj, key)) for key in asdict(obj)}
        )
        return data
    if isinstance(obj, dict):
        return {str(key): plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass(frozen=True)
class CellFailure:
    """A work unit that raised"""

    cell_index: int
    realization: int
    error_type: str
    message: str

    def __str__(self):
        return (
            f"cell {self.cell_index}, realization {self.realization}:"
            f" {self.error_type}: {self.message}"
        )


class MissingCellsError(RuntimeError):
    """Raised when a result needs cells that failed"""

    def __init__(self, failures: Sequence[CellFailure]):
        self.failures = tuple(failures)
        shown = "; ".join(str(failure) for failure in self.failures[:3])
        more = len(self.failures) - 3
        super().__init__(
            f"{len(self.failures)} failed units: {shown}"
            + (f" (and {more} more)" if more > 0 else "")
        )


def evaluate_unit(plan: SweepPlan, cell_index: int, realization: int):
    """Observable payload of one (cell, realization) unit

    Time averages give a float, purities a spin-vector array. Any exception
    is returned as a CellFailure.

    Args:
        plan (SweepPlan): the sweep
        cell_index (int): flat cell index
        realization (int): realization number, 1-based

    Returns:
        float|np.ndarray|CellFailure: the payload
    """
    logger = logging.getLogger(__name__ + ".evaluate_unit")
    try:
        chain, protocol, initial = plan.configure(cell_index)
        seed = derive_seed(plan.master_seed, cell_index, realization)
        real = sample_disorder(chain, seed)
        observable = plan.observable
        if observable.site > chain.n_sites:
            raise ValueError(
                f"Observable site {observable.site} outside chain of"
                f" {chain.n_sites} sites"
            )
        if observable.kind is ObservableKind.BLOCH_PURITY:
            return bloch_purity_vectors(
                plan.model,
                chain,
                real,
                protocol,
                plan.n_periods,
                bloch_grid(*plan.bloch_grid, plan.bloch_measure),
                observable.site,
            )
        if observable.kind is ObservableKind.MEAN_END_PURITY:
            traj = run_protocol(
                plan.model,
                chain,
                real,
                protocol,
                initial,
                plan.n_periods,
                SamplingMode.EVERY_PERIOD,
            )
            return post_pulse_vectors(traj, observable.site)
        traj = run_protocol(
            plan.model, chain, real, protocol, initial, plan.n_periods
        )
        axis = Axis.Z if observable.kind is ObservableKind.TIME_AVERAGE_Z else Axis.X
        return time_averaged_component(traj, observable.site, axis, plan.ell).value
    except Exception as err:
        logger.warning(
            "Unit (%s, %s) failed: %s: %s",
            cell_index,
            realization,
            type(err).__name__,
            err,
        )
        return CellFailure(cell_index, realization, type(err).__name__, str(err))


def unit_bytes(n_sites: int) -> int:
    """Rough peak memory of one work unit: a dozen dense 2**N matrices"""
    return 12 * 16 * 4**n_sites


class SweepDispatcher:
    """Runs work units in process or on a process pool

    The worker count is reduced when the estimated memory of all workers
    would exceed half of the available memory.

    Args:
        workers (int|None): requested worker count, None means one per cpu
        n_sites (int): largest chain length of the work, for the estimate
    """

    def __init__(self, workers: Optional[int] = 1, n_sites: int = 4):
        self._logger = logging.getLogger(__name__ + ".SweepDispatcher")
        self._limit_percent = 0.5
        self._mem_limit = psutil.virtual_memory().available * self._limit_percent
        self._unit_bytes = unit_bytes(n_sites)
        requested = workers if workers is not None else psutil.cpu_count() or 1
        if requested < 1:
            raise ValueError(f"workers must be >= 1, got {requested}")
        self._workers = self._fit(requested)
        self._count = 0
        self._logger.info(
            "Init, %s workers, mem frac is %.3f", self._workers, self.mem_frac
        )

    @property
    def workers(self) -> int:
        """Return the worker count in use"""
        return self._workers

    @property
    def mem_frac(self) -> float:
        """Estimated fraction of the memory limit used by all workers

        Returns:
            float: fraction of available memory
        """
        return self._workers * self._unit_bytes / self._mem_limit

    @property
    def count(self) -> int:
        """Units completed so far"""
        return self._count

    def _fit(self, requested: int) -> int:
        affordable = max(1, int(self._mem_limit // self._unit_bytes))
        if requested > affordable:
            self._logger.warning(
                "Reducing workers from %s to %s to stay within memory",
                requested,
                affordable,
            )
            return affordable
        return requested

    def map(self, func: Callable, *iterables: Iterable) -> Iterator[Any]:
        """Apply func to the zipped iterables, yielding results in order

        Args:
            func (Callable): picklable module-level callable
            iterables (Iterable): argument sequences

        Yields:
            Any: results in input order
        """
        if self._workers == 1:
            results = map(func, *iterables)
            for result in results:
                self._count += 1
                yield result
            return
        arguments = [list(iterable) for iterable in iterables]
        chunksize = max(1, len(arguments[0]) // (4 * self._workers)) if arguments else 1
        with ProcessPoolExecutor(max_workers=self._workers) as pool:
            for result in pool.map(func, *arguments, chunksize=chunksize):
                self._count += 1
                if self._count % 100 == 0:
                    self._logger.debug("%s units done", self._count)
                yield result


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    """Disorder-averaged observable over a two-parameter grid

    Args:
        plan (SweepPlan): the plan that produced it
        values (np.ndarray): (rows, columns) cell means, NaN for missing cells
        stderr (np.ndarray): per-cell standard error
        n_realizations (np.ndarray): successful realizations per cell
        failures (tuple): CellFailure for every failed unit
        provenance (dict): plan description, seed and version
    """

    plan: SweepPlan
    values: np.ndarray
    stderr: np.ndarray
    n_realizations: np.ndarray
    failures: Tuple[CellFailure, ...] = ()
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def x_values(self) -> Tuple[float, ...]:
        return self.plan.x_axis.values

    @property
    def y_values(self) -> Tuple[float, ...]:
        return self.plan.y_axis.values

    @property
    def missing_cells(self) -> List[int]:
        """Flat indices of cells without a value"""
        return [int(index) for index in np.flatnonzero(np.isnan(self.values))]

    def cell(self, x_value: float, y_value: float) -> Tuple[float, float]:
        """(value, stderr) of the cell nearest to a grid point"""
        column = int(np.argmin(np.abs(np.array(self.x_values) - x_value)))
        row = int(np.argmin(np.abs(np.array(self.y_values) - y_value)))
        return float(self.values[row, column]), float(self.stderr[row, column])


def _reduce_cell(observable: Observable, payloads: List[Any]) -> Tuple[float, float]:
    if observable.is_purity:
        return ensemble_purity(np.array(payloads))
    samples = np.array(payloads, dtype=float)
    if len(samples) < 2:
        return float(samples.mean()), float("nan")
    return (
        float(samples.mean()),
        float(samples.std(ddof=1) / math.sqrt(len(samples))),
    )


def _largest_chain(plan: SweepPlan) -> int:
    sizes = [plan.chain.n_sites]
    for axis in (plan.x_axis, plan.y_axis):
        if axis.name == "n_sites":
            sizes.extend(axis.values)
    return max(sizes)


def run_sweep(plan: SweepPlan, workers: Optional[int] = 1) -> PhaseDiagram:
    """Compute a phase diagram

    A cell with any failed unit is missing (NaN); the failures are kept on
    the diagram. The result does not depend on the worker count.

    Args:
        plan (SweepPlan): the sweep
        workers (int|None): worker processes. Defaults to 1.

    Returns:
        PhaseDiagram: the averaged diagram
    """
    logger = logging.getLogger(__name__ + ".run_sweep")
    dispatcher = SweepDispatcher(workers, _largest_chain(plan))
    logger.info(
        "Sweeping %s x %s over %s cells, %s realizations each, %s periods",
        plan.x_axis.name,
        plan.y_axis.name,
        plan.n_cells,
        plan.realizations,
        plan.n_periods,
    )
    values = np.full(plan.shape, np.nan)
    stderr = np.full(plan.shape, np.nan)
    n_realizations = np.zeros(plan.shape, dtype=int)
    failures: List[CellFailure] = []
    cells, realizations = zip(*plan.units())
    payloads: List[Any] = []
    cell_failed = False
    outcomes = dispatcher.map(partial(evaluate_unit, plan), cells, realizations)
    for (cell_index, realization), outcome in zip(plan.units(), outcomes):
        if isinstance(outcome, CellFailure):
            failures.append(outcome)
            cell_failed = True
        else:
            payloads.append(outcome)
        if realization < plan.realizations:
            continue
        position = plan.cell_position(cell_index)
        n_realizations[position] = len(payloads)
        if not cell_failed:
            values[position], stderr[position] = _reduce_cell(
                plan.observable, payloads
            )
        logger.debug("Cell %s done: %s", cell_index, values[position])
        payloads = []
        cell_failed = False
    if failures:
        logger.warning(
            "%s of %s units failed, %s cells missing",
            len(failures),
            plan.n_cells * plan.realizations,
            int(np.isnan(values).sum()),
        )
    logger.info("Sweep finished, %s units", dispatcher.count)
    return PhaseDiagram(
        plan=plan,
        values=values,
        stderr=stderr,
        n_realizations=n_realizations,
        failures=tuple(failures),
        provenance={
            "plan": plan.describe(),
            "master_seed": plan.master_seed,
            "version": __version__,
            "x_range": [min(plan.x_axis.values), max(plan.x_axis.values)],
            "y_range": [min(plan.y_axis.values), max(plan.y_axis.values)],
        },
    )


def area_fraction(diagram: PhaseDiagram, threshold: float = AREA_THRESHOLD) -> float:
    """Share of the available cells whose value exceeds the threshold

    Args:
        diagram (PhaseDiagram): the diagram
        threshold (float): time-crystal threshold. Defaults to 0.9.

    Returns:
        float: fraction in [0, 1], NaN if every cell is missing
    """
    valid = diagram.values[~np.isnan(diagram.values)]
    if valid.size == 0:
        return float("nan")
    return float(np.mean(valid > threshold))


def h2i_saturation_curve(
    plan: SweepPlan,
    n_values: Sequence[int],
    workers: Optional[int] = 1,
    threshold: float = AREA_THRESHOLD,
) -> Dict[int, float]:
    """Time-crystal area as a function of the number of H2I pulses

    Args:
        plan (SweepPlan): base plan, must not sweep h2i_count
        n_values (list): even, ascending pulse counts
        workers (int|None): worker processes
        threshold (float): area threshold. Defaults to 0.9.

    Returns:
        dict: n -> area fraction
    """
    logger = logging.getLogger(__name__ + ".h2i_saturation_curve")
    if "h2i_count" in (plan.x_axis.name, plan.y_axis.name):
        raise ValueError("The base plan must not sweep h2i_count")
    n_values = [int(count) for count in n_values]
    if any(count % 2 or count < 0 for count in n_values):
        raise ValueError(f"H2I counts must be even and >= 0, got {n_values}")
    if any(later <= earlier for earlier, later in zip(n_values, n_values[1:])):
        raise ValueError(f"H2I counts must be ascending, got {n_values}")
    curve = {}
    for count in n_values:
        diagram = run_sweep(
            replace(plan, protocol=replace(plan.protocol, h2i_count=count)),
            workers=workers,
        )
        curve[count] = area_fraction(diagram, threshold)
        logger.info("n = %s: area fraction %.3f", count, curve[count])
    return curve


@dataclass(frozen=True, eq=False)
class EnsembleTrace:
    """Disorder-averaged trajectory

    Args:
        record (TrajectoryRecord): sample times and averaged spin vectors
        stderr (np.ndarray): standard error of every averaged component
        realizations (int): number of averaged runs
        master_seed (int): seed the runs were drawn from
    """

    record: TrajectoryRecord
    stderr: np.ndarray
    realizations: int
    master_seed: int


def trajectory_unit(
    model: Model,
    chain: ChainSpec,
    protocol: DriveProtocol,
    initial: InitialStateSpec,
    n_periods: int,
    sampling: SamplingMode,
    master_seed: int,
    realization: int,
) -> TrajectoryRecord:
    """One realization of an ensemble trace"""
    real = sample_disorder(chain, derive_seed(master_seed, 0, realization))
    assembler = PeriodAssembler(model, chain, real, protocol)
    return run_protocol(
        model,
        chain,
        real,
        protocol,
        initial,
        n_periods,
        sampling,
        assembler=assembler,
    )


def run_trajectory_ensemble(
    model: Model,
    chain: ChainSpec,
    protocol: DriveProtocol,
    initial: InitialStateSpec,
    n_periods: int,
    sampling: SamplingMode = SamplingMode.STROBOSCOPIC_2T,
    realizations: int = DEFAULT_REALIZATIONS,
    master_seed: int = 0,
    workers: Optional[int] = 1,
) -> EnsembleTrace:
    """Average run_protocol over disorder realizations

    Seeds follow the sweep contract with cell index 0. The averaged
    record's end_site_length is the purity of the averaged spin vector.

    Args:
        model (Model): static interaction
        chain (ChainSpec): ensemble
        protocol (DriveProtocol): pulse schedule and events
        initial (InitialStateSpec): initial state
        n_periods (int): periods per run
        sampling (SamplingMode): recorded samples
        realizations (int): runs to average
        master_seed (int): seed of the ensemble
        workers (int|None): worker processes

    Returns:
        EnsembleTrace: the averaged trace
    """
    logger = logging.getLogger(__name__ + ".run_trajectory_ensemble")
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    dispatcher = SweepDispatcher(workers, chain.n_sites)
    unit = partial(
        trajectory_unit,
        model,
        chain,
        protocol,
        initial,
        n_periods,
        SamplingMode(sampling),
        master_seed,
    )
    records = list(dispatcher.map(unit, range(1, realizations + 1)))
    first = records[0]
    stacked = np.stack([record.spin_vectors for record in records])
    mean = stacked.mean(axis=0)
    if realizations > 1:
        stderr = stacked.std(axis=0, ddof=1) / np.sqrt(realizations)
    else:
        stderr = np.full(mean.shape, np.nan)
    logger.info(
        "Averaged %s runs of %s periods, %s samples each",
        realizations,
        n_periods,
        mean.shape[0],
    )
    return EnsembleTrace(
        record=TrajectoryRecord(
            times=first.times,
            spin_vectors=mean,
            n_periods=n_periods,
        ),
        stderr=stderr,
        realizations=realizations,
        master_seed=master_seed,
    )
