"""Chains, quasistatic disorder and drive protocols

All energies are stored as dimensionless products with the drive period
(J*T, h*T), so T = 1 everywhere in the package. Sites are numbered from 1.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np

MAX_SITES = 12


class Axis(str, Enum):
    """Pulse, field and measurement axis"""

    X = "x"
    Y = "y"
    Z = "z"

    def __str__(self):
        return self.value

    @property
    def index(self) -> int:
        """Position of the axis in an (x, y, z) triple"""
        return "xyz".index(self.value)


class Geometry(str, Enum):
    """Bond layout of the chain"""

    OPEN = "open"
    LOOP = "loop"

    def __str__(self):
        return self.value


class Model(str, Enum):
    """Static spin-spin interaction"""

    ISING = "ising"
    HEISENBERG = "heisenberg"

    def __str__(self):
        return self.value


class ErrorSense(str, Enum):
    """How the rotation error enters the two H2I pulse factors

    OPPOSED shortens both factors, so the minus pulse is the inverse of
    the plus pulse. SAME gives every H2I pulse one under-rotated pi
    rotation, so the error of a pair adds up.
    """

    OPPOSED = "opposed"
    SAME = "same"

    def __str__(self):
        return self.value


class ProtocolError(ValueError):
    """Raised for drive protocols that cannot be executed"""


def _triple(values, name):
    values = tuple(float(value) for value in values)
    if len(values) != 3:
        raise ValueError(f"{name} needs one value per axis (x, y, z)")
    return values


@dataclass(frozen=True)
class ChainSpec:
    """Ensemble definition of a disordered chain

    Args:
        n_sites (int): number of spins N
        geometry (Geometry): open chain or closed loop
        j_mean (float): mean coupling J*T
        j_width (float): coupling half width dJ*T
        field_mean (tuple): mean field h*T per axis (x, y, z)
        field_width (tuple): field half width dh*T per axis (x, y, z)
    """

    n_sites: int
    geometry: Geometry = Geometry.OPEN
    j_mean: float = 0.0
    j_width: float = 0.0
    field_mean: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    field_width: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        object.__setattr__(
            self, "field_mean", _triple(self.field_mean, "field_mean")
        )
        object.__setattr__(
            self, "field_width", _triple(self.field_width, "field_width")
        )
        if not 1 <= self.n_sites <= MAX_SITES:
            raise ValueError(
                f"n_sites must be between 1 and {MAX_SITES}, got {self.n_sites}"
            )
        if self.geometry is Geometry.LOOP and self.n_sites < 3:
            raise ValueError("A closed loop needs at least 3 sites")
        if self.j_width < 0:
            raise ValueError(f"j_width must be >= 0, got {self.j_width}")
        if any(width < 0 for width in self.field_width):
            raise ValueError(
                f"field widths must be >= 0, got {self.field_width}"
            )

    @property
    def bonds(self) -> Tuple[Tuple[int, int], ...]:
        """Bonds as (site, site) pairs, 1-based"""
        bonds = tuple((site, site + 1) for site in range(1, self.n_sites))
        if self.geometry is Geometry.LOOP:
            bonds += ((self.n_sites, 1),)
        return bonds

    @property
    def n_bonds(self) -> int:
        """Number of bonds, N - 1 open and N closed"""
        return len(self.bonds)


@dataclass(frozen=True)
class DisorderRealization:
    """One quasistatic draw of couplings and fields

    Args:
        couplings (tuple): J_i*T, one per bond in ChainSpec.bonds order
        fields (tuple): per-site (h^x, h^y, h^z)*T
        seed (int): seed the draw was generated from
    """

    couplings: Tuple[float, ...]
    fields: Tuple[Tuple[float, float, float], ...]
    seed: int

    @property
    def n_sites(self) -> int:
        return len(self.fields)

    @property
    def coupling_array(self) -> np.ndarray:
        return np.array(self.couplings, dtype=float)

    @property
    def field_array(self) -> np.ndarray:
        """Fields as an (N, 3) array"""
        return np.array(self.fields, dtype=float).reshape(-1, 3)

    def shifted(self, coupling_shift: float) -> "DisorderRealization":
        """Return the realization with every coupling shifted

        Args:
            coupling_shift (float): amount added to every J_i*T

        Returns:
            DisorderRealization: the shifted copy, same seed
        """
        return replace(
            self,
            couplings=tuple(
                coupling + coupling_shift for coupling in self.couplings
            ),
        )


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one disorder draw

    Args:
        seed (int): non-negative integer seed

    Returns:
        np.random.Generator: Philox backed generator
    """
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master_seed: int, cell_index: int, realization: int) -> int:
    """Seed for one (grid cell, realization) work unit

    The value depends only on the three keys, never on execution order.

    Args:
        master_seed (int): seed of the whole sweep
        cell_index (int): flat grid index
        realization (int): realization number inside the cell

    Returns:
        int: 64 bit seed
    """
    sequence = np.random.SeedSequence([master_seed, cell_index, realization])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(spec: ChainSpec, seed: int) -> DisorderRealization:
    """Draw couplings and fields uniformly from the ensemble

    Couplings are drawn first (one per bond), then an (N, 3) block of fields.

    Args:
        spec (ChainSpec): the ensemble
        seed (int): seed, identical seeds give identical realizations

    Returns:
        DisorderRealization: the draw
    """
    rng = make_rng(seed)
    couplings = rng.uniform(
        spec.j_mean - spec.j_width, spec.j_mean + spec.j_width, spec.n_bonds
    )
    mean = np.array(spec.field_mean)
    width = np.array(spec.field_width)
    fields = rng.uniform(mean - width, mean + width, (spec.n_sites, 3))
    return DisorderRealization(
        couplings=tuple(float(value) for value in couplings),
        fields=tuple(
            tuple(float(value) for value in row) for row in fields
        ),
        seed=seed,
    )


def estimate_pulse_error(pulse_duration: float, dephasing_time: float) -> float:
    """Rotation error of a pulse detuned by quasistatic field noise

    eps = (2 ln 2 / pi) * (tau / T2*)**2

    Args:
        pulse_duration (float): pulse duration tau
        dephasing_time (float): dephasing time T2*, same unit as tau

    Returns:
        float: dimensionless rotation error
    """
    if dephasing_time <= 0:
        raise ValueError(
            f"dephasing_time must be positive, got {dephasing_time}"
        )
    if pulse_duration < 0:
        raise ValueError(
            f"pulse_duration must be >= 0, got {pulse_duration}"
        )
    return 2 * math.log(2) / math.pi * (pulse_duration / dephasing_time) ** 2


@dataclass(frozen=True)
class GlobalRotation:
    """Instantaneous error-free rotation of every spin"""

    axis: Axis
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if not -math.pi < self.angle <= math.pi:
            raise ProtocolError(
                f"Rotation angle must lie in (-pi, pi], got {self.angle}"
            )


@dataclass(frozen=True)
class SetFloquetAxis:
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))


@dataclass(frozen=True)
class SetH2IAxis:
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))


ProtocolAction = Union[GlobalRotation, SetFloquetAxis, SetH2IAxis]


@dataclass(frozen=True)
class ProtocolEvent:
    """Action fired at t = period_index * T, before that period's segments"""

    period_index: int
    action: ProtocolAction

    def __post_init__(self):
        if self.period_index < 0:
            raise ProtocolError(
                f"Event period must be >= 0, got {self.period_index}"
            )


def odd_sites(n_sites: int) -> Tuple[int, ...]:
    """Sites 1, 3, 5, ... of the chain"""
    return tuple(range(1, n_sites + 1, 2))


@dataclass(frozen=True)
class DriveProtocol:
    """Pulse schedule of one period plus timed events

    Args:
        floquet_axis (Axis): axis of the once-per-period global pulse
        floquet_error (float): rotation error eps of that pulse
        h2i_count (int): even number n of H2I pulses per period
        h2i_axis (Axis): axis of the H2I pulses
        h2i_error (float): rotation error of the H2I pulses
        h2i_error_sense (ErrorSense): sign pattern of that error
        h2i_targets (tuple|None): pulsed sites, None means odd sites
        events (tuple): ProtocolEvent list, applied in order
        floquet_pulse (bool): False drops the Floquet pulse entirely
    """

    floquet_axis: Axis = Axis.X
    floquet_error: float = 0.0
    h2i_count: int = 0
    h2i_axis: Axis = Axis.Z
    h2i_error: float = 0.0
    h2i_error_sense: ErrorSense = ErrorSense.OPPOSED
    h2i_targets: Optional[Tuple[int, ...]] = None
    events: Tuple[ProtocolEvent, ...] = field(default_factory=tuple)
    floquet_pulse: bool = True

    def __post_init__(self):
        object.__setattr__(self, "floquet_axis", Axis(self.floquet_axis))
        object.__setattr__(self, "h2i_axis", Axis(self.h2i_axis))
        object.__setattr__(
            self, "h2i_error_sense", ErrorSense(self.h2i_error_sense)
        )
        object.__setattr__(self, "events", tuple(self.events))
        if self.h2i_targets is not None:
            object.__setattr__(
                self, "h2i_targets", tuple(sorted(set(self.h2i_targets)))
            )
        if self.h2i_count < 0 or self.h2i_count % 2:
            raise ProtocolError(
                f"h2i_count must be even and >= 0, got {self.h2i_count}"
            )
        periods = [event.period_index for event in self.events]
        if any(later < earlier for earlier, later in zip(periods, periods[1:])):
            raise ProtocolError(
                f"Event periods must be non-decreasing, got {periods}"
            )

    def targets_for(self, n_sites: int) -> Tuple[int, ...]:
        """H2I target sites for a chain of n_sites

        Args:
            n_sites (int): chain length

        Returns:
            tuple: sorted 1-based sites
        """
        targets = (
            odd_sites(n_sites) if self.h2i_targets is None else self.h2i_targets
        )
        outside = [site for site in targets if not 1 <= site <= n_sites]
        if outside:
            raise ProtocolError(
                f"H2I targets {outside} outside chain of {n_sites} sites"
            )
        return targets

    def events_by_period(self) -> Dict[int, Tuple[ProtocolAction, ...]]:
        """Group event actions by period index, keeping list order"""
        grouped = {}
        for event in self.events:
            grouped.setdefault(event.period_index, ())
            grouped[event.period_index] += (event.action,)
        return grouped


SPIN_LETTERS = {"u": 0, "d": 1}


@dataclass(frozen=True)
class ProductZ:
    """Product of z eigenstates, one letter per site, u = up, d = down"""

    spins: str

    def __post_init__(self):
        spins = "".join(self.spins).lower()
        unknown = set(spins) - set(SPIN_LETTERS)
        if not spins or unknown:
            raise ValueError(
                f"Spin pattern must contain only 'u' and 'd', got {self.spins!r}"
            )
        object.__setattr__(self, "spins", spins)

    def validate(self, n_sites: int):
        if len(self.spins) != n_sites:
            raise ValueError(
                f"Initial state {self.spins!r} has {len(self.spins)} sites,"
                f" chain has {n_sites}"
            )

    def resized(self, n_sites: int) -> "ProductZ":
        """Repeat the pattern cyclically to n_sites"""
        pattern = self.spins * (n_sites // len(self.spins) + 1)
        return ProductZ(pattern[:n_sites])

    def site_amplitudes(self, n_sites: int) -> Tuple[np.ndarray, ...]:
        self.validate(n_sites)
        basis = np.eye(2, dtype=complex)
        return tuple(basis[SPIN_LETTERS[letter]] for letter in self.spins)


@dataclass(frozen=True)
class ProductBloch:
    """Identical cos(theta)|u> + sin(theta) e^{i chi}|d> on every site"""

    theta: float
    chi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")
        if not 0.0 <= self.chi < 2 * math.pi:
            raise ValueError(f"chi must lie in [0, 2 pi), got {self.chi}")

    def validate(self, n_sites: int):
        """Any chain length fits a site-independent state"""

    def resized(self, n_sites: int) -> "ProductBloch":
        return self

    def site_amplitudes(self, n_sites: int) -> Tuple[np.ndarray, ...]:
        single = np.array(
            [
                math.cos(self.theta),
                math.sin(self.theta) * np.exp(1j * self.chi),
            ],
            dtype=complex,
        )
        return (single,) * n_sites


InitialStateSpec = Union[ProductZ, ProductBloch]


def neel_state(n_sites: int) -> ProductZ:
    """The alternating state |udud...>"""
    return ProductZ("ud").resized(n_sites)
