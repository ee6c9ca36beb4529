"""
Numerical rank estimation and the rank condition for a trap-free search.

The landscape F(c) is trap-free when the dynamic gradient G_{c,φ} at φ_opt(c)
has rank at least

    N        U_obj in U(N)
    N - 1    U_obj in SU(N)
    N / 2    U_obj in SU(N) with a spectrum symmetric about zero
    N        closed system (N_B = 1), where rank G_{c,φ} = min(rank G_c + 1, N)
"""
import collections
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np

from .gradients import GradientBundle
from .landscape import LandscapeEval
from .linalg import HermitianBasis, eig_unitary, hermitian_basis
from .model import ControlSystem
from .types import RealMatrix, RealVector

__all__ = [
    "DEFAULT_RANK_TOL",
    "CASE_TOL",
    "RankCase",
    "RankReport",
    "IdentityReport",
    "numerical_rank",
    "sum_omega",
    "is_antisymmetric",
    "classify_case",
    "required_rank",
    "rank_condition",
    "closed_rank_identity",
    "closed_rank_margin",
    "reduced_gradient",
    "trace_free_rows",
    "phiopt_identity_check",
    "modal_rank",
]

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-8
"""Singular values above DEFAULT_RANK_TOL * σ_1 count towards the numerical rank."""

CASE_TOL = 1e-8
"""Tolerance of the SU(N) and symmetric-spectrum tests."""


class RankCase(str, Enum):
    UN = "UN"
    SUN = "SUN"
    SYMMETRIC_SPECTRUM = "SYMMETRIC_SPECTRUM"
    CLOSED = "CLOSED"


@dataclass(frozen=True, eq=False)
class RankReport:
    """
    RankReport holds a numerical rank and, once a case is known, the rank
    condition evaluated for it.

    Attributes:
        singular_values (RealVector):       Singular values, descending.
        numerical_rank (int):               #{σ_i > threshold_used * σ_1}; 0 for a zero matrix.
        threshold_used (float):             The relative threshold.
        case (Optional[RankCase]):          The case of U_obj.
        required_rank (Optional[int]):      The rank the case requires.
        condition_met (Optional[bool]):     numerical_rank >= required_rank.
        sum_omega_mod_2pi (Optional[float]): Σω wrapped into (-π, π].
        spectrum_antisymmetric (Optional[bool]): Whether sorted ω equals -reversed(ω).
        alternative_case (Optional[RankCase]): The other candidate case for
                                               points within a decade of CASE_TOL.
        rank_c (Optional[int]):             Numerical rank of G_c alone.
    """

    singular_values: RealVector
    numerical_rank: int
    threshold_used: float
    case: Optional[RankCase] = None
    required_rank: Optional[int] = None
    condition_met: Optional[bool] = None
    sum_omega_mod_2pi: Optional[float] = None
    spectrum_antisymmetric: Optional[bool] = None
    alternative_case: Optional[RankCase] = None
    rank_c: Optional[int] = None


@dataclass(frozen=True)
class IdentityReport:
    """
    The identities that hold at φ_opt(c).

    Attributes:
        sum_sin (float):       |Σ_n sin ω_n|.
        grad_phi_norm (float): ||G_φ g(ω)||_∞.
        j_gap (float):         |J(c, φ_opt) - N √F|.
        tolerance (float):     The pass/fail bound.
        passed (bool):         Whether sum_sin and grad_phi_norm are within tolerance.
    """

    sum_sin: float
    grad_phi_norm: float
    j_gap: float
    tolerance: float
    passed: bool


def numerical_rank(m, rel_tol: float = DEFAULT_RANK_TOL) -> RankReport:
    """
    Returns the SVD-based numerical rank of a real matrix: the number of
    singular values above rel_tol * σ_1.

    Raises:
        ValueError: If rel_tol is not in (0, 1).
    """
    if not 0 < rel_tol < 1:
        raise ValueError(f"relative rank tolerance must be in (0, 1) (was {rel_tol})")
    m = np.asarray(m, dtype=np.float64)
    s = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
    rank = int(np.sum(s > rel_tol * s[0])) if s.size and s[0] > 0 else 0
    return RankReport(s, rank, rel_tol)


def sum_omega(omega) -> float:
    """Returns Σω wrapped into (-π, π]."""
    wrapped = float(np.angle(np.exp(1j * np.sum(omega))))
    return np.pi if wrapped <= -np.pi else wrapped


def is_antisymmetric(omega, tol: float = CASE_TOL) -> bool:
    """Returns whether the sorted spectrum satisfies ω = -reversed(ω) within tol."""
    a = np.sort(np.asarray(omega, dtype=np.float64))
    return bool(np.max(np.abs(a + a[::-1]), initial=0.0) <= tol)


def _antisymmetry(omega) -> float:
    a = np.sort(np.asarray(omega, dtype=np.float64))
    return float(np.max(np.abs(a + a[::-1]), initial=0.0))


def _classify(omega, n_b: Optional[int], tol: float) -> Tuple[RankCase, Optional[RankCase]]:
    if n_b == 1:
        return RankCase.CLOSED, None

    s = abs(sum_omega(omega))
    asym = _antisymmetry(omega)
    sun = s <= tol
    symmetric = sun and asym <= tol

    if symmetric:
        case = RankCase.SYMMETRIC_SPECTRUM
    elif sun:
        case = RankCase.SUN
    else:
        case = RankCase.UN

    alternative = None
    if tol / 10 < s <= 10 * tol:
        alternative = RankCase.UN if sun else RankCase.SUN
    elif sun and tol / 10 < asym <= 10 * tol:
        alternative = RankCase.SUN if symmetric else RankCase.SYMMETRIC_SPECTRUM
    return case, alternative


def classify_case(u_obj=None, omega=None, n_b: Optional[int] = None, tol: float = CASE_TOL) -> RankCase:
    """
    Classifies U_obj for the rank condition.

    CLOSED when N_B = 1; otherwise SUN when Σω ≡ 0 (mod 2π) within tol, i.e.
    det U_obj = 1; SYMMETRIC_SPECTRUM when additionally the sorted spectrum
    is antisymmetric within tol; UN otherwise.

    Args:
        u_obj: U_obj; only used to compute ω when omega is None.
        omega: The spectral frequencies of U_obj.
        n_b:   Dimension of system B, if known.
        tol:   The classification tolerance.
    """
    if omega is None:
        omega = eig_unitary(u_obj)[0]
    return _classify(omega, n_b, tol)[0]


def required_rank(case: RankCase, n: int) -> int:
    """Returns the rank of G_{c,φ} the rank condition requires for case."""
    if case is RankCase.SUN:
        return n - 1
    if case is RankCase.SYMMETRIC_SPECTRUM:
        return n // 2
    return n


def rank_condition(
    grads: GradientBundle,
    case: Optional[RankCase] = None,
    rel_tol: float = DEFAULT_RANK_TOL,
) -> RankReport:
    """
    Evaluates the rank condition for a GradientBundle computed at φ_opt.

    Args:
        grads:   The gradients at (c, φ_opt(c)).
        case:    The case; classified from the bundle's frequencies when None.
        rel_tol: The relative rank threshold.

    Returns:
        The full RankReport.
    """
    if not grads.at_phi_opt:
        logger.warning("rank condition evaluated away from φ_opt")
    n = grads.g_stack.shape[1]
    n_b = int(round(np.sqrt(grads.g_phi.shape[0])))
    auto_case, alternative = _classify(grads.omega, n_b, CASE_TOL)
    if case is None:
        case = auto_case
    elif case is not auto_case:
        alternative = auto_case

    stacked = numerical_rank(grads.g_stack, rel_tol)
    needed = required_rank(case, n)
    return RankReport(
        singular_values=stacked.singular_values,
        numerical_rank=stacked.numerical_rank,
        threshold_used=rel_tol,
        case=case,
        required_rank=needed,
        condition_met=stacked.numerical_rank >= needed,
        sum_omega_mod_2pi=sum_omega(grads.omega),
        spectrum_antisymmetric=is_antisymmetric(grads.omega),
        alternative_case=alternative,
        rank_c=numerical_rank(grads.g_c, rel_tol).numerical_rank,
    )


def closed_rank_identity(g_c_rank: int, n: int) -> int:
    """
    Returns rank G_{c,φ} = min(rank G_c + 1, N) for a closed system, where
    G_{c,φ} is G_c stacked on an all-ones row.
    """
    return min(g_c_rank + 1, n)


def closed_rank_margin(g_c, rel_tol: float = DEFAULT_RANK_TOL) -> float:
    """
    Returns v_1^T (S_r² + v_1 v_1^T)^{-1} v_1, where G_c = U_c diag(S_r, 0) V_c^T
    and v_1 holds the first r entries of V_c^T 1. The closed-system rank
    identity requires this scalar to be below 1.
    """
    g_c = np.asarray(g_c, dtype=np.float64)
    _, s, vh = np.linalg.svd(g_c, full_matrices=True)
    r = numerical_rank(g_c, rel_tol).numerical_rank
    if r == 0:
        return 0.0
    v1 = (vh @ np.ones(g_c.shape[1]))[:r]
    a = np.diag(s[:r] ** 2) + np.outer(v1, v1)
    return float(v1 @ np.linalg.solve(a, v1))


def reduced_gradient(g) -> RealMatrix:
    """
    Returns Ḡ [I_{N-1}, -1] built from the first N-1 columns Ḡ of g. Rows
    of g along which Σω is constant are left unchanged by this map.
    """
    g = np.asarray(g, dtype=np.float64)
    g_bar = g[:, :-1]
    return np.hstack([g_bar, -g_bar.sum(axis=1, keepdims=True)])


def trace_free_rows(sys: ControlSystem, basis: Optional[HermitianBasis] = None, tol: float = 1e-12) -> np.ndarray:
    """
    Returns a boolean mask over the rows of G_{c,φ} marking the parameters
    whose generator is traceless (H_m ⊗ I for the controls, B_b for φ); only
    along these is Σω constant.
    """
    basis = basis or hermitian_basis(sys.n_b)
    controls = np.abs(np.trace(sys.controls, axis1=1, axis2=2)) <= tol
    elements = np.abs(np.trace(basis.elements, axis1=1, axis2=2)) <= tol
    return np.concatenate([np.tile(controls, sys.intervals), elements])


def phiopt_identity_check(ev: LandscapeEval, grads: GradientBundle, tol: float = 1e-7) -> IdentityReport:
    """
    Checks the identities Σ sin ω = 0 and G_φ g(ω) = 0 at φ_opt(c) and
    reports |J - N√F|.
    """
    n = ev.omega.shape[0]
    sum_sin = abs(float(np.sum(np.sin(ev.omega))))
    grad_phi = float(np.max(np.abs(grads.grad_j_phi), initial=0.0))
    j_gap = abs(ev.j_value - n * np.sqrt(ev.fidelity))
    return IdentityReport(sum_sin, grad_phi, j_gap, tol, sum_sin <= tol and grad_phi <= tol)


def modal_rank(ranks: Iterable[int]) -> int:
    """
    Returns the most frequent rank; ties go to the larger rank.

    Raises:
        ValueError: If ranks is empty.
    """
    counts = collections.Counter(ranks)
    if not counts:
        raise ValueError("no ranks recorded")
    return max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]
