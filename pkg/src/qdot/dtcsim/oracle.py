"""Brute-force reference computations and the verification suite

Nothing here goes through the eigendecomposition propagators: exponentials
are Taylor series with scaling and squaring, operators are explicit
Kronecker products of locally defined Pauli matrices.
"""

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Optional, Sequence

import numpy as np

from .floquet import assemble_period, run_protocol
from .hilbert import (
    HermitianOperator,
    StateVector,
    UnitaryOperator,
    operator_distance,
    propagator,
    spin_vectors,
)
from .spinmodel import (
    Axis,
    ChainSpec,
    DisorderRealization,
    DriveProtocol,
    Geometry,
    Model,
    ProductZ,
    make_rng,
    sample_disorder,
)

_ONE = np.eye(2, dtype=complex)
_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
SERIES_TOL = 1e-18
SERIES_MAX_TERMS = 80
TROTTER_COUNTS = (2, 4, 8, 16, 32, 64, 128, 256)
TROTTER_JITTER = 1e-3


def series_expm(matrix: np.ndarray) -> np.ndarray:
    """exp(matrix) from a truncated Taylor series

    The matrix is scaled by 2**-s until its norm is below 1/2, summed, and
    squared back s times.

    Args:
        matrix (np.ndarray): square matrix

    Returns:
        np.ndarray: the exponential
    """
    matrix = np.asarray(matrix, dtype=complex)
    norm = float(np.max(np.sum(np.abs(matrix), axis=1))) if matrix.size else 0.0
    squarings = max(0, math.ceil(math.log2(norm)) + 1) if norm > 0 else 0
    scaled = matrix / 2**squarings
    result = np.eye(len(matrix), dtype=complex)
    term = np.eye(len(matrix), dtype=complex)
    for order in range(1, SERIES_MAX_TERMS):
        term = term @ scaled / order
        result = result + term
        if np.max(np.abs(term)) < SERIES_TOL:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _kron(*factors: np.ndarray) -> np.ndarray:
    return reduce(np.kron, factors)


def _site_sigma(n_sites: int, site: int, axis: str) -> np.ndarray:
    return _kron(
        *(_SIGMA[axis] if index == site else _ONE for index in range(1, n_sites + 1))
    )


def verify_h2i_identity(theta: float, axis: Axis) -> float:
    """Max deviation of the two-spin pulse-conjugation identity

    (s1 x 1) e^{i theta s.s} (s1 x 1) e^{i theta s.s} = e^{2 i theta s1 s2},
    with s1 the Pauli matrix of the given axis.

    Args:
        theta (float): exchange angle
        axis (Axis): pulse axis

    Returns:
        float: max-norm of LHS - RHS
    """
    beta = Axis(axis).value
    exchange = sum(_kron(_SIGMA[name], _SIGMA[name]) for name in "xyz")
    flip = _kron(_SIGMA[beta], _ONE)
    evolve = series_expm(1j * theta * exchange)
    lhs = flip @ evolve @ flip @ evolve
    rhs = series_expm(2j * theta * _kron(_SIGMA[beta], _SIGMA[beta]))
    return float(np.max(np.abs(lhs - rhs)))


def ising_energies(spec: ChainSpec, real: DisorderRealization) -> np.ndarray:
    """Diagonal of sum J s^z s^z + sum h^z s^z from the basis bit strings

    Args:
        spec (ChainSpec): chain, defines the bonds
        real (DisorderRealization): couplings and fields, x and y fields unused

    Returns:
        np.ndarray: 2**N energies
    """
    n_sites = spec.n_sites
    indices = np.arange(1 << n_sites)
    # site 1 is the most significant bit, bit 0 is spin up
    spins = np.array(
        [1 - 2 * ((indices >> (n_sites - site)) & 1) for site in range(1, n_sites + 1)]
    )
    energies = np.zeros(len(indices))
    for (first, second), coupling in zip(spec.bonds, real.couplings):
        energies += coupling * spins[first - 1] * spins[second - 1]
    for site, site_field in enumerate(real.fields, start=1):
        energies += site_field[2] * spins[site - 1]
    return energies


def reference_ising_period(
    spec: ChainSpec,
    real: DisorderRealization,
    epsilon: float,
    floquet_axis: Axis = Axis.X,
) -> UnitaryOperator:
    """Ising period built from scratch, Floquet pulse last

    F @ exp(-i (sum J s^z s^z + sum h^z s^z) T),
    F = exp(+i (pi/2 - epsilon) sum sigma^axis).

    Args:
        spec (ChainSpec): the chain
        real (DisorderRealization): couplings and z fields
        epsilon (float): Floquet pulse error
        floquet_axis (Axis): pulse axis. Defaults to x.

    Returns:
        UnitaryOperator: the period operator
    """
    n_sites = spec.n_sites
    axis = Axis(floquet_axis).value
    generator = sum(_site_sigma(n_sites, site, axis) for site in range(1, n_sites + 1))
    pulse = series_expm(1j * (math.pi / 2 - epsilon) * generator)
    evolution = np.diag(np.exp(-1j * ising_energies(spec, real)))
    return UnitaryOperator(pulse @ evolution)


def _z_only(real: DisorderRealization):
    if np.any(real.field_array[:, :2]):
        raise ValueError("The Ising reference needs z-only fields")


def trotter_distances(
    spec: ChainSpec,
    real: DisorderRealization,
    n_values: Sequence[int] = TROTTER_COUNTS,
    epsilon: float = 0.0,
) -> Dict[int, float]:
    """Distance between H2I Heisenberg periods and the Ising reference

    Args:
        spec (ChainSpec): the chain
        real (DisorderRealization): realization with z-only fields
        n_values (list): even H2I pulse counts
        epsilon (float): Floquet pulse error. Defaults to 0.

    Returns:
        dict: n -> phase-free spectral-norm distance
    """
    _z_only(real)
    reference = reference_ising_period(spec, real, epsilon)
    distances = {}
    for count in n_values:
        protocol = DriveProtocol(
            floquet_error=epsilon, h2i_count=count, h2i_axis=Axis.Z
        )
        period = assemble_period(Model.HEISENBERG, spec, real, protocol)
        distances[count] = operator_distance(period.unitary, reference)
    return distances


@dataclass(frozen=True)
class FlipSymmetryReport:
    """Largest observable change under a coupling shift"""

    shift: float
    deviation: float
    n_states: int
    n_periods: int


def _random_state(n_sites: int, rng: np.random.Generator) -> StateVector:
    amplitudes = rng.normal(size=1 << n_sites) + 1j * rng.normal(size=1 << n_sites)
    return StateVector(amplitudes / np.linalg.norm(amplitudes), n_sites)


def default_shift(spec: ChainSpec) -> float:
    """pi/2 for a four-site loop, pi otherwise"""
    if spec.geometry is Geometry.LOOP and spec.n_sites == 4:
        return math.pi / 2
    return math.pi


def verify_flip_symmetries(
    spec: ChainSpec,
    shift: Optional[float] = None,
    epsilon: float = 0.1,
    n_states: int = 3,
    n_periods: int = 20,
    seed: int = 0,
) -> FlipSymmetryReport:
    """Compare stroboscopic spin vectors of Ising chains with shifted couplings

    Args:
        spec (ChainSpec): chain with j_width = 0
        shift (float, optional): added to J*T. Defaults to default_shift(spec).
        epsilon (float): Floquet pulse error. Defaults to 0.1.
        n_states (int): random initial states
        n_periods (int): periods, sampled every second one
        seed (int): seed for disorder and states

    Returns:
        FlipSymmetryReport: max absolute difference over sites, axes, times
    """
    logger = logging.getLogger(__name__ + ".verify_flip_symmetries")
    if spec.j_width != 0:
        raise ValueError("Coupling shifts are symmetries only for j_width = 0")
    shift = default_shift(spec) if shift is None else shift
    real = sample_disorder(spec, seed)
    protocol = DriveProtocol(floquet_error=epsilon)
    plain = assemble_period(Model.ISING, spec, real, protocol).unitary
    shifted = assemble_period(
        Model.ISING, spec, real.shifted(shift), protocol
    ).unitary
    rng = make_rng(seed + 1)
    deviation = 0.0
    for _ in range(n_states):
        first = second = _random_state(spec.n_sites, rng)
        for period in range(1, n_periods + 1):
            first = first.evolve(plain)
            second = second.evolve(shifted)
            if period % 2 == 0:
                difference = spin_vectors(first) - spin_vectors(second)
                deviation = max(deviation, float(np.max(np.abs(difference))))
    logger.debug("Shift %.4f on %s: deviation %.3g", shift, spec.geometry, deviation)
    return FlipSymmetryReport(shift, deviation, n_states, n_periods)


def verify_propagator_agreement(dims: Sequence[int] = (2, 4, 8, 16), seed: int = 0) -> float:
    """Series exponentials against eigendecomposition propagators

    Args:
        dims (list): matrix dimensions
        seed (int): seed for the random Hermitian matrices

    Returns:
        float: max-norm deviation over all dimensions
    """
    rng = make_rng(seed)
    deviation = 0.0
    for dim in dims:
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        matrix = (raw + raw.conj().T) / 2
        duration = float(rng.uniform(0.1, 2.0))
        expected = series_expm(-1j * duration * matrix)
        actual = propagator(HermitianOperator(matrix), duration).matrix
        deviation = max(deviation, float(np.max(np.abs(expected - actual))))
    return deviation


@dataclass(frozen=True)
class VerificationResult:
    """One suite entry; passes below the tolerance, or above it for controls"""

    name: str
    deviation: float
    tolerance: float
    expect_above: bool = False

    @property
    def passed(self) -> bool:
        if self.expect_above:
            return self.deviation > self.tolerance
        return self.deviation < self.tolerance

    def __str__(self):
        relation = ">" if self.expect_above else "<"
        status = "ok" if self.passed else "FAILED"
        return (
            f"{self.name}: {self.deviation:.3e} {relation} {self.tolerance:.1e}"
            f" [{status}]"
        )


def _h2i_identity_check(rng: np.random.Generator, draws: int = 100) -> float:
    worst = 0.0
    for _ in range(draws):
        theta = float(rng.uniform(-math.pi, math.pi))
        axis = list(Axis)[int(rng.integers(3))]
        worst = max(worst, verify_h2i_identity(theta, axis))
    return worst


def _two_site_exactness() -> float:
    spec = ChainSpec(2, j_mean=0.7, field_mean=(0.0, 0.0, 0.3))
    real = sample_disorder(spec, 0)
    return trotter_distances(spec, real, (2,))[2]


def _trotter_checks(seed: int) -> Dict[str, float]:
    spec = ChainSpec(
        4, j_mean=0.6, field_mean=(0.0, 0.0, 0.05), field_width=(0.0, 0.0, 0.05)
    )
    real = sample_disorder(spec, seed)
    distances = trotter_distances(spec, real)
    counts = sorted(distances)
    jumps = [
        distances[later] - distances[earlier]
        for earlier, later in zip(counts, counts[1:])
    ]
    ratios = [distances[count] / distances[2 * count] for count in (32, 64, 128)]
    return {
        "trotter_monotone": max(0.0, max(jumps)),
        "trotter_first_order": max(abs(ratio - 2.0) for ratio in ratios),
    }


def _exact_return(seed: int, ell: int = 100) -> float:
    spec = ChainSpec(
        4,
        j_mean=0.6,
        j_width=0.2,
        field_mean=(0.0, 0.0, 0.05),
        field_width=(0.0, 0.0, 0.5),
    )
    real = sample_disorder(spec, seed)
    traj = run_protocol(
        Model.ISING, spec, real, DriveProtocol(), ProductZ("udud"), 2 * ell
    )
    values = np.array([vectors[0, 2] for vectors in traj.stroboscopic().values()])
    return float(np.max(np.abs(values - 1.0)))


def run_verification_suite(seed: int = 0) -> List[VerificationResult]:
    """Run every brute-force check

    Args:
        seed (int): seed for the random draws. Defaults to 0.

    Returns:
        list: VerificationResult per check
    """
    logger = logging.getLogger(__name__ + ".run_verification_suite")
    rng = make_rng(seed)
    open_chain = ChainSpec(4, j_mean=0.3, field_width=(0.0, 0.0, 0.5))
    results = [
        VerificationResult("h2i_identity", _h2i_identity_check(rng), 1e-10),
        VerificationResult(
            "propagator_agreement", verify_propagator_agreement(seed=seed), 1e-9
        ),
        VerificationResult("two_site_h2i_exactness", _two_site_exactness(), 1e-10),
    ]
    results += [
        VerificationResult(
            name, value, TROTTER_JITTER if name == "trotter_monotone" else 0.3
        )
        for name, value in _trotter_checks(seed).items()
    ]
    for j_mean in (0.3, 1.1):
        report = verify_flip_symmetries(
            ChainSpec(4, j_mean=j_mean, field_width=(0.0, 0.0, 0.5)), seed=seed
        )
        results.append(
            VerificationResult(f"pi_shift_open_j{j_mean}", report.deviation, 1e-8)
        )
    loop = ChainSpec(
        4, Geometry.LOOP, j_mean=0.3, field_width=(0.0, 0.0, 0.5)
    )
    results.append(
        VerificationResult(
            "half_pi_shift_loop", verify_flip_symmetries(loop, seed=seed).deviation, 1e-8
        )
    )
    results.append(
        VerificationResult(
            "half_pi_shift_open_control",
            verify_flip_symmetries(open_chain, math.pi / 2, seed=seed).deviation,
            1e-2,
            expect_above=True,
        )
    )
    results.append(VerificationResult("exact_ising_return", _exact_return(seed), 1e-8))
    for result in results:
        logger.info("%s", result)
    return results
