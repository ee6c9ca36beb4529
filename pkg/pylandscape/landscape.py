"""
The control landscape F(c), the extended landscape J(c, φ), the optimal
extended unitary Φ_opt and the spectral (kinematic) picture of J.

    R(c)   = (W ⊗ I)^† U(c)
    Γ(c)   = Σ_a R(c)[aa]                     (sum of the N_A diagonal blocks)
    F(c)   = (||Γ(c)||_* / N)^2
    J(c,φ) = Re Tr (W ⊗ Φ(φ))^† U(c) = Σ_n cos ω_n
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Tuple, Union

import numpy as np

from .errors import DimensionError, InvalidDensityError
from .linalg import (
    HermitianBasis,
    assert_unitary,
    eig_unitary,
    hermitian_basis,
    is_hermitian,
    kron,
    log_unitary,
    svd,
)
from .model import ControlSystem, TargetSpec, as_controls
from .propagate import Propagation, propagate
from .types import ComplexMatrix, RealVector

__all__ = [
    "DEGENERACY_GAP",
    "Spectrum",
    "KinematicPoint",
    "LandscapeEval",
    "gamma",
    "fidelity",
    "phi_opt",
    "j_extended",
    "distance",
    "u_obj_and_omega",
    "channel_fidelity",
    "kinematic_point",
    "kinematic_critical_points",
    "evaluate",
]

logger = logging.getLogger(__name__)

DEGENERACY_GAP = 1e-8
"""Eigenphase gap below which a spectral decomposition is flagged degenerate."""

Target = Union[TargetSpec, np.ndarray]


def _target(sys: ControlSystem, w: Target) -> ComplexMatrix:
    w = w.w if isinstance(w, TargetSpec) else assert_unitary(w, "target")
    if w.shape != (sys.n_a, sys.n_a):
        raise DimensionError("target", (sys.n_a, sys.n_a), w.shape)
    return w


def _total(sys: ControlSystem, u_total) -> ComplexMatrix:
    u = np.asarray(u_total, dtype=np.complex128)
    if u.shape != (sys.n, sys.n):
        raise DimensionError("total unitary", (sys.n, sys.n), u.shape)
    return u


class Spectrum(NamedTuple):
    """
    The spectral decomposition U_obj = V e^{iΩ} V^†.

    Attributes:
        u_obj (ComplexMatrix): U_obj = (W ⊗ Φ)^† U(c).
        omega (RealVector):    The spectral frequencies ω in (-π, π], descending.
        v (ComplexMatrix):     The unitary eigenvector matrix V.
        degenerate (bool):     Whether two frequencies are closer than DEGENERACY_GAP.
        min_gap (float):       The smallest gap between frequencies on the circle.
    """

    u_obj: ComplexMatrix
    omega: RealVector
    v: ComplexMatrix
    degenerate: bool
    min_gap: float


@dataclass(frozen=True, eq=False)
class KinematicPoint:
    """
    The kinematic objective J(ω) = Σ cos ω_n with its gradient and the
    diagonal of its Hessian.

    Attributes:
        omega (RealVector):        The spectral frequencies.
        j (float):                 Σ cos ω.
        gradient (RealVector):     g(ω) = -sin ω.
        hessian_diag (RealVector): -cos ω.
    """

    omega: RealVector
    j: float
    gradient: RealVector
    hessian_diag: RealVector

    def is_critical(self, tol: float = 1e-12) -> bool:
        """Whether g(ω) vanishes, i.e. every sin ω_n is zero within tol."""
        return bool(np.max(np.abs(self.gradient), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class LandscapeEval:
    """
    LandscapeEval is an immutable snapshot of the landscape at controls c
    and the optimal extended parameter φ_opt(c).

    Attributes:
        gamma (ComplexMatrix):                 Γ(c), N_B x N_B.
        gamma_singular_values (RealVector):    Singular values of Γ, descending.
        fidelity (float):                      F(c) in [0, 1].
        j_value (float):                       J(c, φ_opt) = ||Γ||_* = N √F.
        phi_opt_matrix (ComplexMatrix):        Φ_opt = T_left T_right^†.
        phi_opt_vector (RealVector):           φ_opt, length N_B².
        u_obj (ComplexMatrix):                 U_obj(c, φ_opt).
        omega (RealVector):                    Spectral frequencies of U_obj.
        v (ComplexMatrix):                     Eigenvector matrix of U_obj.
        degenerate (bool):                     Whether an eigenphase gap is below DEGENERACY_GAP.
        propagation (Propagation):             The time evolution for c.
        fingerprint (str):                     Fingerprint of c.
    """

    gamma: ComplexMatrix
    gamma_singular_values: RealVector
    fidelity: float
    j_value: float
    phi_opt_matrix: ComplexMatrix
    phi_opt_vector: RealVector
    u_obj: ComplexMatrix
    omega: RealVector
    v: ComplexMatrix
    degenerate: bool
    propagation: Propagation
    fingerprint: str

    @property
    def gamma_rank(self) -> int:
        """
        The numerical rank of Γ. Φ_opt is unique only when Γ has full rank.
        """
        q = self.gamma_singular_values
        return int(np.sum(q > 1e-12 * max(1.0, float(q[0]))))

    def kinematic(self) -> KinematicPoint:
        return kinematic_point(self.omega)


def gamma(sys: ControlSystem, w: Target, u_total) -> ComplexMatrix:
    """
    Returns Γ = Σ_a R[aa], the sum of the N_A diagonal N_B x N_B blocks of
    R = (W ⊗ I)^† U.

    Examples:
        gamma(sys, W, kron(W, U_B)) == N_A U_B
        gamma(closed, W, U)         == [[Tr W^† U]]

    Raises:
        DimensionError: If W or U do not match the system.
    """
    w = _target(sys, w)
    u = _total(sys, u_total).reshape(sys.n_a, sys.n_b, sys.n_a, sys.n_b)
    # Γ_ij = Σ_a Σ_x conj(W_xa) U[x*N_B + i, a*N_B + j]
    return np.einsum("xa,xiaj->ij", w.conj(), u)


def fidelity(gamma_matrix, n: int) -> float:
    """
    Returns F = (Σ singular values of Γ / N)^2.
    """
    q = svd(gamma_matrix)[1]
    return float((np.sum(q) / n) ** 2)


def phi_opt(gamma_matrix, basis: Optional[HermitianBasis] = None) -> Tuple[ComplexMatrix, RealVector]:
    """
    Returns the B-side unitary maximizing Re Tr Φ^† Γ and its parameter
    vector.

    Φ_opt = T_left T_right^† from the SVD Γ = T_left Q T_right^†, and φ_opt
    holds the coordinates of the principal generator -i log Φ_opt in the
    operator basis, so that e^{iB(φ_opt)} = Φ_opt. When Γ is rank deficient
    Φ_opt is not unique and the SVD's choice is returned.

    Args:
        gamma_matrix: Γ, an N_B x N_B matrix.
        basis:        The operator basis; the generalized Gell-Mann basis by default.

    Returns:
        The pair (Φ_opt, φ_opt).
    """
    gamma_matrix = np.asarray(gamma_matrix, dtype=np.complex128)
    basis = basis or hermitian_basis(gamma_matrix.shape[0])
    t_left, _, t_right = svd(gamma_matrix)
    phi_matrix = t_left @ t_right.conj().T
    return phi_matrix, basis.coefficients(log_unitary(phi_matrix))


def j_extended(
    sys: ControlSystem,
    w: Target,
    u_total,
    phi_vector,
    basis: Optional[HermitianBasis] = None,
) -> float:
    """
    Returns the extended landscape J(c, φ) = Re Tr (W ⊗ Φ(φ))^† U(c),
    evaluated as Re Tr Φ(φ)^† Γ(c).

    Raises:
        DimensionError: If φ does not have N_B² entries.
    """
    basis = basis or hermitian_basis(sys.n_b)
    phi = basis.unitary(phi_vector)
    return float(np.real(np.vdot(phi, gamma(sys, w, u_total))))


def distance(
    sys: ControlSystem,
    w: Target,
    u_total,
    phi_vector,
    basis: Optional[HermitianBasis] = None,
) -> float:
    """
    Returns the squared Frobenius distance D = ||U(c) - W ⊗ Φ(φ)||² between
    the evolution and a decoupled target, which equals 2N - 2J(c, φ).
    """
    basis = basis or hermitian_basis(sys.n_b)
    diff = _total(sys, u_total) - kron(_target(sys, w), basis.unitary(phi_vector))
    return float(np.real(np.vdot(diff, diff)))


def _min_gap(omega: RealVector) -> float:
    if omega.shape[0] < 2:
        return float("inf")
    gaps = -np.diff(omega)  # omega is descending
    wrap = omega[-1] + 2 * np.pi - omega[0]
    return float(min(np.min(gaps), wrap))


def _spectrum(u_obj: ComplexMatrix) -> Spectrum:
    omega, v = eig_unitary(u_obj)
    gap = _min_gap(omega)
    if gap < DEGENERACY_GAP:
        logger.debug("degenerate spectral frequencies (min gap %.3g)", gap)
    return Spectrum(u_obj, omega, v, gap < DEGENERACY_GAP, gap)


def u_obj_and_omega(
    sys: ControlSystem,
    w: Target,
    u_total,
    phi_vector,
    basis: Optional[HermitianBasis] = None,
) -> Spectrum:
    """
    Returns U_obj = (W ⊗ Φ(φ))^† U(c) with its spectral decomposition
    U_obj = V e^{iΩ} V^†.

    Raises:
        DimensionError: If an operand does not match the system.
    """
    basis = basis or hermitian_basis(sys.n_b)
    target = kron(_target(sys, w), basis.unitary(phi_vector))
    return _spectrum(target.conj().T @ _total(sys, u_total))


def channel_fidelity(gamma_matrix, rho_bar, n_a: int) -> float:
    """
    Returns the channel fidelity F̂ = Tr(Γ ρ̄ Γ^†) / N_A².

    Args:
        gamma_matrix: Γ(c).
        rho_bar:      A density matrix on system B.
        n_a:          Dimension of system A.

    Raises:
        InvalidDensityError: If rho_bar is not Hermitian, positive
                             semidefinite and of unit trace.
    """
    gamma_matrix = np.asarray(gamma_matrix, dtype=np.complex128)
    rho = np.asarray(rho_bar, dtype=np.complex128)
    if rho.shape != gamma_matrix.shape:
        raise DimensionError("density matrix", gamma_matrix.shape, rho.shape)
    if not is_hermitian(rho):
        raise InvalidDensityError("not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise InvalidDensityError(f"trace is {np.real(np.trace(rho)):.12g}, not 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-12:
        raise InvalidDensityError("not positive semidefinite")
    return float(np.real(np.trace(gamma_matrix @ rho @ gamma_matrix.conj().T))) / n_a ** 2


def kinematic_point(omega) -> KinematicPoint:
    """
    Returns the kinematic objective, gradient and Hessian diagonal at ω.

    Examples:
        kinematic_point(zeros(N)).j == N
        kinematic_point([0, π]).j   == 0
    """
    omega = np.asarray(omega, dtype=np.float64)
    return KinematicPoint(omega, float(np.sum(np.cos(omega))), -np.sin(omega), -np.cos(omega))


def kinematic_critical_points(n: int) -> Iterator[KinematicPoint]:
    """
    Yields the kinematic critical points of J(ω) for every sign pattern
    cos ω_n = ±1 (ω_n in {0, π}), 2^n points in total. A pattern with p
    entries at 0 has critical value 2p - n.
    """
    for pattern in itertools.product((0.0, np.pi), repeat=n):
        yield kinematic_point(pattern)


def evaluate(
    sys: ControlSystem,
    w: Target,
    c,
    basis: Optional[HermitianBasis] = None,
) -> LandscapeEval:
    """
    Evaluates the landscape at controls c and the optimal extended
    parameter φ_opt(c).

    F is computed from the singular values of Γ and never from J, so that
    J(c, φ_opt) = N √F is an independent cross-check.

    Args:
        sys:   The control system.
        w:     The target on system A.
        c:     Control amplitudes, shape (L, M) or flat.
        basis: The operator basis for φ; generalized Gell-Mann by default.

    Returns:
        The LandscapeEval snapshot.
    """
    basis = basis or hermitian_basis(sys.n_b)
    c = as_controls(sys, c)
    prop = propagate(sys, c)
    g = gamma(sys, w, prop.total)
    q = svd(g)[1]
    phi_matrix, phi_vector = phi_opt(g, basis)
    spectrum = _spectrum(kron(_target(sys, w), phi_matrix).conj().T @ prop.total)
    return LandscapeEval(
        gamma=g,
        gamma_singular_values=q,
        fidelity=float((np.sum(q) / sys.n) ** 2),
        j_value=float(np.real(np.vdot(phi_matrix, g))),
        phi_opt_matrix=phi_matrix,
        phi_opt_vector=phi_vector,
        u_obj=spectrum.u_obj,
        omega=spectrum.omega,
        v=spectrum.v,
        degenerate=spectrum.degenerate,
        propagation=prop,
        fingerprint=prop.fingerprint,
    )
