"""Dense product-basis algebra for spin-1/2 chains

Basis convention shared by every module: site 1 is the most significant bit
of the basis index, and a 0 bit is spin up (sigma^z eigenvalue +1).
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Mapping, Sequence, Tuple

import numpy as np

from .spinmodel import (
    Axis,
    ChainSpec,
    DisorderRealization,
    InitialStateSpec,
    Model,
)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = {
    Axis.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Axis.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Axis.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


class PropagatorError(RuntimeError):
    """Raised when an operator cannot be exponentiated"""


def _readonly(array) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=complex)
    array.setflags(write=False)
    return array


def _n_sites_of(dim: int) -> int:
    n_sites = dim.bit_length() - 1
    if dim < 2 or 1 << n_sites != dim:
        raise ValueError(f"Dimension {dim} is not a power of two")
    return n_sites


def _check_site(site: int, n_sites: int):
    if not 1 <= site <= n_sites:
        raise ValueError(f"Site {site} outside chain of {n_sites} sites")


def hermiticity_defect(matrix: np.ndarray) -> float:
    """Max-norm of M - M^dagger"""
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def unitarity_defect(matrix: np.ndarray) -> float:
    """Max-norm of U^dagger U - 1"""
    product = matrix.conj().T @ matrix
    return float(np.max(np.abs(product - np.eye(len(matrix)))))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian matrix on 2**N states

    The eigendecomposition is computed once and kept on the instance.
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = _readonly(self.matrix)
        object.__setattr__(self, "matrix", matrix)
        scale = max(1.0, float(np.max(np.abs(matrix))))
        defect = hermiticity_defect(matrix)
        if defect >= HERMITIAN_TOL * scale:
            raise ValueError(f"Operator is not Hermitian, defect {defect:.3g}")

    @property
    def n_sites(self) -> int:
        return _n_sites_of(len(self.matrix))

    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvectors, cached

        Returns:
            tuple: (values, vectors) as from numpy.linalg.eigh
        """
        logger = logging.getLogger(__name__ + ".HermitianOperator")
        cached = self.__dict__.get("_eigensystem")
        if cached is not None:
            logger.debug("Reusing eigendecomposition of dim %s", len(self.matrix))
            return cached
        try:
            values, vectors = np.linalg.eigh(self.matrix)
        except np.linalg.LinAlgError as err:
            raise PropagatorError(
                f"Eigensolver failed for dim {len(self.matrix)} operator,"
                f" max-norm {np.max(np.abs(self.matrix)):.6g},"
                f" hermiticity defect {hermiticity_defect(self.matrix):.3g}:"
                f" {err}"
            ) from err
        self.__dict__["_eigensystem"] = (values, vectors)
        return values, vectors


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """Dense unitary matrix on 2**N states"""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))
        defect = unitarity_defect(self.matrix)
        if defect >= UNITARY_TOL:
            raise ValueError(f"Operator is not unitary, defect {defect:.3g}")

    @property
    def n_sites(self) -> int:
        return _n_sites_of(len(self.matrix))

    @property
    def adjoint(self) -> "UnitaryOperator":
        return UnitaryOperator(self.matrix.conj().T)

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        return UnitaryOperator(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over the 2**N product basis"""

    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self):
        amplitudes = _readonly(self.amplitudes)
        object.__setattr__(self, "amplitudes", amplitudes)
        if amplitudes.shape != (1 << self.n_sites,):
            raise ValueError(
                f"State of shape {amplitudes.shape} does not fit"
                f" {self.n_sites} sites"
            )
        if abs(self.norm - 1.0) >= NORM_TOL:
            raise ValueError(f"State norm {self.norm!r} differs from 1")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def evolve(self, unitary: UnitaryOperator) -> "StateVector":
        """Apply a unitary

        Args:
            unitary (UnitaryOperator): the operator

        Returns:
            StateVector: the evolved state
        """
        return StateVector(unitary.matrix @ self.amplitudes, self.n_sites)

    def site_view(self, site: int) -> np.ndarray:
        """Amplitudes as (left, spin, right) with the site in the middle"""
        _check_site(site, self.n_sites)
        return self.amplitudes.reshape(
            1 << (site - 1), 2, 1 << (self.n_sites - site)
        )


@dataclass(frozen=True, eq=False)
class ReducedSpin:
    """2x2 density matrix of a single site"""

    matrix: np.ndarray

    @property
    def spin_vector(self) -> np.ndarray:
        """(<sx>, <sy>, <sz>) of the site"""
        off_diagonal = self.matrix[0, 1]
        return np.array(
            [
                2 * off_diagonal.real,
                -2 * off_diagonal.imag,
                (self.matrix[0, 0] - self.matrix[1, 1]).real,
            ]
        )

    @property
    def vector_length(self) -> float:
        return float(np.linalg.norm(self.spin_vector))

    @property
    def purity(self) -> float:
        """Tr(rho**2)"""
        return float(np.trace(self.matrix @ self.matrix).real)


def pauli_string(n_sites: int, factors: Mapping[int, Axis]) -> HermitianOperator:
    """Tensor product of Pauli matrices with identity elsewhere

    Args:
        n_sites (int): chain length
        factors (dict): site -> Axis for the non-identity sites

    Returns:
        HermitianOperator: the product operator
    """
    return HermitianOperator(_pauli_matrix(n_sites, factors))


def _pauli_matrix(n_sites, factors):
    for site in factors:
        _check_site(site, n_sites)
    return reduce(
        np.kron,
        [
            PAULI[Axis(factors[site])] if site in factors else IDENTITY2
            for site in range(1, n_sites + 1)
        ],
    )


def site_operator_product(n_sites: int, site_matrices: Mapping[int, np.ndarray]):
    """Kronecker product of 2x2 matrices, identity on unlisted sites

    Args:
        n_sites (int): chain length
        site_matrices (dict): site -> 2x2 matrix

    Returns:
        np.ndarray: the 2**N x 2**N matrix
    """
    for site in site_matrices:
        _check_site(site, n_sites)
    return reduce(
        np.kron,
        [
            site_matrices.get(site, IDENTITY2)
            for site in range(1, n_sites + 1)
        ],
    )


def build_hamiltonian(
    model: Model, spec: ChainSpec, real: DisorderRealization
) -> HermitianOperator:
    """Static Hamiltonian of one disorder realization

    Ising: sum J_i s^z s^z + sum h_i . s; Heisenberg: sum J_i (s.s) + sum h_i . s

    Args:
        model (Model): interaction type
        spec (ChainSpec): chain, defines the bond list
        real (DisorderRealization): couplings and fields

    Returns:
        HermitianOperator: the Hamiltonian in units of 1/T
    """
    if real.n_sites != spec.n_sites or len(real.couplings) != spec.n_bonds:
        raise ValueError(
            f"Realization with {real.n_sites} sites and {len(real.couplings)}"
            f" bonds does not match chain with {spec.n_sites} sites and"
            f" {spec.n_bonds} bonds"
        )
    n_sites = spec.n_sites
    dim = 1 << n_sites
    matrix = np.zeros((dim, dim), dtype=complex)
    bond_axes = (Axis.Z,) if Model(model) is Model.ISING else tuple(Axis)
    for (first, second), coupling in zip(spec.bonds, real.couplings):
        for axis in bond_axes:
            matrix += coupling * _pauli_matrix(
                n_sites, {first: axis, second: axis}
            )
    for site, site_field in enumerate(real.fields, start=1):
        for axis, value in zip(Axis, site_field):
            if value:
                matrix += value * _pauli_matrix(n_sites, {site: axis})
    return HermitianOperator(matrix)


def propagator(h: HermitianOperator, duration: float) -> UnitaryOperator:
    """exp(-i H duration) from the Hermitian eigendecomposition

    Args:
        h (HermitianOperator): the generator, eigensystem reused across calls
        duration (float): time in units of T

    Returns:
        UnitaryOperator: the propagator
    """
    values, vectors = h.eigensystem()
    phases = np.exp(-1j * values * duration)
    return UnitaryOperator((vectors * phases) @ vectors.conj().T)


def expectation(state: StateVector, site: int, axis: Axis) -> float:
    """<psi| sigma_site^axis |psi> without building the operator

    Args:
        state (StateVector): normalized state
        site (int): 1-based site
        axis (Axis): Pauli component

    Returns:
        float: value in [-1, 1]
    """
    view = state.site_view(site)
    up, down = view[:, 0, :], view[:, 1, :]
    axis = Axis(axis)
    if axis is Axis.Z:
        return float(np.sum(np.abs(up) ** 2) - np.sum(np.abs(down) ** 2))
    overlap = np.vdot(up, down)
    if axis is Axis.X:
        return float(2 * overlap.real)
    return float(2 * overlap.imag)


def reduce_to_site(state: StateVector, site: int) -> ReducedSpin:
    """Partial trace over every site except one

    Args:
        state (StateVector): normalized state
        site (int): 1-based site to keep

    Returns:
        ReducedSpin: the single-site density matrix
    """
    view = state.site_view(site)
    # rho_jk = sum over the rest of a_j conj(a_k)
    matrix = np.einsum("ajb,akb->jk", view, view.conj())
    return ReducedSpin(matrix)


def spin_vectors(state: StateVector) -> np.ndarray:
    """Spin vectors of every site

    Args:
        state (StateVector): normalized state

    Returns:
        np.ndarray: (N, 3) array of (<sx>, <sy>, <sz>)
    """
    return np.array(
        [
            reduce_to_site(state, site).spin_vector
            for site in range(1, state.n_sites + 1)
        ]
    )


def product_state(site_amplitudes: Sequence[np.ndarray]) -> StateVector:
    """Normalized tensor product of single-site states

    Args:
        site_amplitudes (list): one length-2 vector per site, site 1 first

    Returns:
        StateVector: the product state
    """
    normalized = [
        np.asarray(single, dtype=complex) / np.linalg.norm(single)
        for single in site_amplitudes
    ]
    return StateVector(reduce(np.kron, normalized), len(normalized))


def initial_state(initial: InitialStateSpec, n_sites: int) -> StateVector:
    """StateVector for an initial-state description

    Args:
        initial (InitialStateSpec): ProductZ or ProductBloch
        n_sites (int): chain length

    Returns:
        StateVector: the state
    """
    return product_state(initial.site_amplitudes(n_sites))


def operator_distance(first: UnitaryOperator, second: UnitaryOperator) -> float:
    """Spectral-norm distance with the global phase removed

    The phase is the one minimizing the Frobenius distance,
    arg Tr(second^dagger first).

    Args:
        first (UnitaryOperator): operator
        second (UnitaryOperator): operator of the same dimension

    Returns:
        float: ||first - e^{i phi} second||_2
    """
    overlap = np.trace(second.matrix.conj().T @ first.matrix)
    phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(first.matrix - phase * second.matrix, 2))
