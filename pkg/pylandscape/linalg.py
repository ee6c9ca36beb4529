"""
Dense complex linear algebra shared by every other module: Kronecker and vec
algebra, Hermitian and unitary eigendecompositions, exponentials and
logarithms of Hermitian generators, the SVD, spectral integrals and the
generalized Gell-Mann operator basis.

All functions are pure. Matrices are numpy arrays indexed [row, column].
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, NotHermitianError, NotUnitaryError, NumericalError
from .types import ComplexMatrix, ComplexVector, RealVector

__all__ = [
    "HERMITIAN_TOL",
    "UNITARY_TOL",
    "REAL_TOL",
    "HermitianBasis",
    "kron",
    "vec",
    "is_hermitian",
    "is_unitary",
    "assert_hermitian",
    "assert_unitary",
    "as_real",
    "eig_hermitian",
    "expm_i_hermitian",
    "eig_unitary",
    "log_unitary",
    "svd",
    "nuclear_norm",
    "spectral_integral",
    "hermitian_basis",
]

HERMITIAN_TOL = 1e-12
"""Relative tolerance of the Hermitian tag: max|X - X^†| <= tol * max(1, max|X|)."""

UNITARY_TOL = 1e-10
"""Absolute tolerance of the unitary tag: max|X^†X - I| <= tol."""

REAL_TOL = 1e-10
"""Relative bound on the imaginary residue of provably real quantities."""

_GAP_TOL = 1e-12  # eigenvalue gaps below this (relative) take the degenerate limit


def _square(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(what, "a square matrix", x.shape)
    if not np.all(np.isfinite(x)):
        raise NumericalError(what, float("nan"))
    return x


def kron(a, b) -> ComplexMatrix:
    """
    Returns the Kronecker product a ⊗ b, with
    (a⊗b)[i*p + k, j*q + l] = a[i, j] * b[k, l] for b of shape (p, q).
    """
    return np.kron(np.asarray(a), np.asarray(b))


def vec(a) -> ComplexVector:
    """
    Returns the columns of a stacked top-to-bottom into one vector, so that
    vec(A X B) == kron(B.T, A) @ vec(X).

    Examples:
        vec([[1, 0], [0, 1]])        == [1, 0, 0, 1]
        vec([[1, 2, 3], [4, 5, 6]])  == [1, 4, 2, 5, 3, 6]
    """
    return np.asarray(a).reshape(-1, order="F")


def is_hermitian(x, tol: float = HERMITIAN_TOL) -> bool:
    """
    Returns whether x satisfies max|x - x^†| <= tol * max(1, max|x|).
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(x))))
    return float(np.max(np.abs(x - x.conj().T))) <= tol * scale


def is_unitary(x, tol: float = UNITARY_TOL) -> bool:
    """
    Returns whether x satisfies max|x^†x - I| <= tol.
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        return False
    return float(np.max(np.abs(x.conj().T @ x - np.eye(x.shape[0])))) <= tol


def assert_hermitian(x, what: str = "matrix") -> ComplexMatrix:
    """
    Returns x as a complex array after checking that it is Hermitian.

    Raises:
        DimensionError:    If x is not square.
        NotHermitianError: If x is not Hermitian within HERMITIAN_TOL.
    """
    x = _square(x, what)
    if not is_hermitian(x):
        raise NotHermitianError(float(np.max(np.abs(x - x.conj().T))), what)
    return x


def assert_unitary(x, what: str = "matrix") -> ComplexMatrix:
    """
    Returns x as a complex array after checking that it is unitary.

    Raises:
        DimensionError:  If x is not square.
        NotUnitaryError: If x is not unitary within UNITARY_TOL.
    """
    x = _square(x, what)
    if not is_unitary(x):
        raise NotUnitaryError(float(np.max(np.abs(x.conj().T @ x - np.eye(x.shape[0])))), what)
    return x


def as_real(z, what: str, tol: float = REAL_TOL) -> np.ndarray:
    """
    Returns the real part of z after asserting that its imaginary part is
    negligible: max|Im z| <= tol * max(1, max|z|).

    Raises:
        NumericalError: If the imaginary residue exceeds the bound.
    """
    z = np.asarray(z)
    if z.size == 0:
        return np.real(z).astype(np.float64)
    residue = float(np.max(np.abs(np.imag(z))))
    if residue > tol * max(1.0, float(np.max(np.abs(z)))):
        raise NumericalError(f"imaginary residue of {what}", residue)
    return np.ascontiguousarray(np.real(z), dtype=np.float64)


def eig_hermitian(h) -> Tuple[RealVector, ComplexMatrix]:
    """
    Diagonalizes a Hermitian matrix, h = S diag(λ) S^†.

    Args:
        h: A Hermitian matrix.

    Returns:
        The eigenvalues λ in ascending order and the unitary matrix S whose
        columns are the corresponding eigenvectors.

    Raises:
        NotHermitianError: If h is not Hermitian.
    """
    h = assert_hermitian(h, "Hermitian operand")
    lam, s = sla.eigh(h)
    return lam, s


def expm_i_hermitian(h, t: float) -> ComplexMatrix:
    """
    Returns e^{-i t h} for a Hermitian h, computed from its
    eigendecomposition as S diag(e^{-i t λ}) S^†.

    Examples:
        expm_i_hermitian(zeros, t)           == I
        expm_i_hermitian(diag(1, -1), t)     == diag(e^{-it}, e^{it})
    """
    lam, s = eig_hermitian(h)
    return (s * np.exp(-1j * t * lam)) @ s.conj().T


def eig_unitary(u) -> Tuple[RealVector, ComplexMatrix]:
    """
    Diagonalizes a unitary matrix, u = V diag(e^{iω}) V^†.

    The decomposition is taken from the complex Schur form, which for a
    normal matrix is diagonal and always yields an orthonormal V, also for
    degenerate eigenvalues. Phases are principal arguments in (-π, π] and
    are returned in descending order.

    Args:
        u: A unitary matrix.

    Returns:
        The eigenphases ω (descending) and the unitary eigenvector matrix V.

    Raises:
        NotUnitaryError: If u is not unitary.
    """
    u = assert_unitary(u, "unitary operand")
    t, z = sla.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    phases[phases <= -np.pi] = np.pi
    order = np.argsort(-phases, kind="stable")
    return phases[order], z[:, order]


def log_unitary(u) -> ComplexMatrix:
    """
    Returns the principal Hermitian generator G with e^{iG} = u, whose
    eigenvalues lie in (-π, π].

    Raises:
        NotUnitaryError: If u is not unitary.
    """
    phases, v = eig_unitary(u)
    g = (v * phases) @ v.conj().T
    return 0.5 * (g + g.conj().T)


def svd(a) -> Tuple[ComplexMatrix, RealVector, ComplexMatrix]:
    """
    Returns (T_left, q, T_right) with a = T_left diag(q) T_right^† and the
    singular values q nonnegative in descending order.
    """
    a = np.asarray(a, dtype=np.complex128)
    t_left, q, t_right_h = sla.svd(a)
    return t_left, q, t_right_h.conj().T


def nuclear_norm(a) -> float:
    """
    Returns the sum of the singular values of a.
    """
    return float(np.sum(sla.svd(np.asarray(a, dtype=np.complex128), compute_uv=False)))


def spectral_integral(
    h,
    x,
    t_max: float,
    eig: Optional[Tuple[RealVector, ComplexMatrix]] = None,
) -> ComplexMatrix:
    """
    Returns the integral over τ in [0, t_max] of e^{iτh} x e^{-iτh}.

    With h = S diag(λ) S^† and Y = S^† x S the result is S (Y ∘ Ψ) S^†, where
    Ψ[j, k] = (e^{i t_max (λ_j - λ_k)} - 1) / (i (λ_j - λ_k)), evaluated as
    t_max e^{i t_max Δ/2} sinc(t_max Δ / 2), and Ψ[j, k] = t_max wherever
    |λ_j - λ_k| <= 1e-12 max(1, max|λ|).

    Args:
        h:     A Hermitian generator.
        x:     A square matrix of the same dimension as h.
        t_max: The upper integration limit, t_max > 0.
        eig:   Optionally the eigendecomposition (λ, S) of h, to reuse it
               across several integrands.

    Returns:
        The integral; Hermitian whenever x is Hermitian.

    Raises:
        DimensionError: If x and h differ in dimension.
        ValueError:     If t_max <= 0.
    """
    if t_max <= 0:
        raise ValueError(f"t_max must be positive (was {t_max})")
    lam, s = eig_hermitian(h) if eig is None else eig
    n = lam.shape[0]
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (n, n):
        raise DimensionError("integrand", (n, n), x.shape)

    gaps = lam[:, None] - lam[None, :]
    psi = t_max * np.exp(0.5j * t_max * gaps) * np.sinc(t_max * gaps / (2 * np.pi))
    degenerate = np.abs(gaps) <= _GAP_TOL * max(1.0, float(np.max(np.abs(lam))))
    psi[degenerate] = t_max

    y = s.conj().T @ x @ s
    return s @ (y * psi) @ s.conj().T


@dataclass(frozen=True)
class HermitianBasis:
    """
    An orthonormal Hermitian operator basis {B_b} of dimension n, with
    Tr(B_a B_b) = δ_ab and Σ_b vec(B_b) vec(B_b)^† = I.

    Attributes:
        dim (int):                The dimension n of the operators.
        elements (ComplexMatrix): The n² basis operators, shape (n², n, n).
                                  elements[0] is I/√n.
    """

    dim: int
    elements: ComplexMatrix

    def __len__(self) -> int:
        return self.elements.shape[0]

    def _check(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=np.float64).reshape(-1)
        if phi.shape[0] != len(self):
            raise DimensionError("extended landscape parameter", len(self), phi.shape[0])
        return phi

    def generator(self, phi) -> ComplexMatrix:
        """
        Returns B(φ) = Σ_b φ_b B_b.
        """
        return np.tensordot(self._check(phi), self.elements, axes=1)

    def coefficients(self, g) -> RealVector:
        """
        Returns the coordinates φ_b = Tr(B_b g) of a Hermitian g.
        """
        g = assert_hermitian(g, "generator")
        return as_real(np.einsum("bij,ji->b", self.elements, g), "basis coefficients")

    def unitary(self, phi) -> ComplexMatrix:
        """
        Returns Φ(φ) = e^{iB(φ)}.
        """
        return expm_i_hermitian(self.generator(phi), -1.0)


@lru_cache(maxsize=None)
def hermitian_basis(n: int) -> HermitianBasis:
    """
    Returns the normalized generalized Gell-Mann basis of dimension n.

    The first element is I/√n. It is followed by the symmetric matrices
    (E_jk + E_kj)/√2 and the antisymmetric matrices (-iE_jk + iE_kj)/√2 for
    j < k, then the diagonal matrices diag(1, ..., 1, -l, 0, ..., 0)/√(l(l+1))
    for l = 1, ..., n-1.

    Examples:
        hermitian_basis(1).elements == [[[1]]]
        hermitian_basis(2).elements == [I, σ_x, σ_y, σ_z] / √2

    Raises:
        ValueError: If n < 1.
    """
    if n < 1:
        raise ValueError(f"basis dimension must be at least 1 (was {n})")

    elements = [np.eye(n, dtype=np.complex128) / np.sqrt(n)]
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        sym = np.zeros((n, n), dtype=np.complex128)
        sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
        elements.append(sym)
    for j, k in pairs:
        anti = np.zeros((n, n), dtype=np.complex128)
        anti[j, k] = -1j / np.sqrt(2)
        anti[k, j] = 1j / np.sqrt(2)
        elements.append(anti)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        elements.append(np.diag(d / np.sqrt(l * (l + 1))).astype(np.complex128))

    stack = np.array(elements)
    stack.setflags(write=False)
    return HermitianBasis(n, stack)
