"""
Dynamic gradients of the spectral frequencies ω(c, φ) of U_obj.

    (G_c)_{lm,n} = -v_ln^† Q_lm v_ln,     Q_lm = ∫_0^δ e^{itH_l} (H_m ⊗ I) e^{-itH_l} dt
    (G_φ)_{b,n}  = -v_n^† (I_A ⊗ P_b) v_n, P_b  = ∫_0^1 e^{-iτB(φ)} B_b e^{iτB(φ)} dτ

where v_n are the columns of V, v_ln the columns of V_l = U_{l+1} ... U_L V,
and ∇J = G g(ω) with the kinematic gradient g(ω) = -sin ω. With this
orientation of P_b, ∂U_obj/∂φ_b = -i (I ⊗ P_b) U_obj for Φ(φ) = e^{iB(φ)}.

At φ_opt(c), J = N √F, hence ∇_c F = (2 √F / N) G_c g(ω).
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DimensionError, GradientFallbackWarning, StaleInputError
from .linalg import HermitianBasis, as_real, eig_hermitian, hermitian_basis, kron, spectral_integral, svd
from .landscape import LandscapeEval, Target, evaluate, fidelity, gamma, j_extended, u_obj_and_omega
from .model import ControlSystem, as_controls
from .model import fingerprint as control_fingerprint
from .propagate import Propagation, propagate
from .types import ComplexMatrix, RealMatrix, RealVector

__all__ = [
    "FALLBACK_FIDELITY",
    "GradientBundle",
    "q_integral",
    "g_c",
    "p_integral",
    "g_phi",
    "bundle",
    "grad_f",
    "landscape_gradient",
    "central_difference",
    "finite_diff_j",
    "finite_diff_f",
    "finite_diff_hessian",
    "phi_rank_bound",
]

logger = logging.getLogger(__name__)

FALLBACK_FIDELITY = 1e-12
"""Below this fidelity the analytic ∇F (which divides by √F) is replaced by finite differences."""


@dataclass(frozen=True, eq=False)
class GradientBundle:
    """
    GradientBundle holds the dynamic, kinematic and landscape gradients at
    one point (c, φ).

    Attributes:
        g_c (RealMatrix):                 G_c, shape (LM, N).
        g_phi (RealMatrix):               G_φ, shape (N_B², N).
        g_stack (RealMatrix):             G_{c,φ} = [G_c; G_φ], shape (LM + N_B², N).
        kinematic (RealVector):           g(ω) = -sin ω.
        grad_j_c (RealVector):            ∇_c J = G_c g(ω).
        grad_j_phi (RealVector):          ∇_φ J = G_φ g(ω).
        grad_f_c (Optional[RealVector]):  ∇_c F = (2√F/N) ∇_c J; only set at φ_opt.
        singular_values (RealVector):     Singular values of G_{c,φ}, descending.
        singular_values_c (RealVector):   Singular values of G_c, descending.
        omega (RealVector):               The spectral frequencies ω.
        v (ComplexMatrix):                The eigenvector matrix V of U_obj.
        fidelity (float):                 F(c).
        j_value (float):                  J(c, φ).
        at_phi_opt (bool):                Whether φ = φ_opt(c).
        degenerate (bool):                Whether the spectral decomposition was flagged degenerate.
    """

    g_c: RealMatrix
    g_phi: RealMatrix
    g_stack: RealMatrix
    kinematic: RealVector
    grad_j_c: RealVector
    grad_j_phi: RealVector
    grad_f_c: Optional[RealVector]
    singular_values: RealVector
    singular_values_c: RealVector
    omega: RealVector
    v: ComplexMatrix
    fidelity: float
    j_value: float
    at_phi_opt: bool
    degenerate: bool

    @property
    def grad_j(self) -> RealVector:
        """The stacked gradient ∇_{c,φ} J = G_{c,φ} g(ω)."""
        return np.concatenate([self.grad_j_c, self.grad_j_phi])


def q_integral(
    h_step,
    h_m,
    delta: float,
    eig: Optional[Tuple[RealVector, ComplexMatrix]] = None,
) -> ComplexMatrix:
    """
    Returns Q = ∫_0^δ e^{itH_l} (H_m ⊗ I_{N_B}) e^{-itH_l} dt.

    Args:
        h_step: The step Hamiltonian H_l of dimension N.
        h_m:    A control Hamiltonian, either on A (embedded as H_m ⊗ I) or
                already of dimension N.
        delta:  The interval width δ.
        eig:    Optionally the eigendecomposition of h_step.

    Raises:
        DimensionError: If N is not a multiple of the dimension of h_m.
    """
    h_step = np.asarray(h_step, dtype=np.complex128)
    h_m = np.asarray(h_m, dtype=np.complex128)
    n, n_a = h_step.shape[0], h_m.shape[0]
    if n_a == 0 or n % n_a != 0:
        raise DimensionError("control Hamiltonian", f"a divisor of {n}", n_a)
    x = h_m if n_a == n else kron(h_m, np.eye(n // n_a))
    return spectral_integral(h_step, x, delta, eig=eig)


def _check_fresh(prop: Propagation, expected: Optional[str]):
    if expected is not None and expected != prop.fingerprint:
        raise StaleInputError(expected, prop.fingerprint)


def g_c(
    sys: ControlSystem,
    prop: Propagation,
    v,
    fingerprint: Optional[str] = None,
) -> RealMatrix:
    """
    Returns G_c with rows ordered like the flattened control vector
    (interval-major, then control index).

    Args:
        sys:         The control system.
        prop:        The Propagation for c.
        v:           The eigenvector matrix V of U_obj for the same c.
        fingerprint: Fingerprint of the controls V was computed for; checked
                     against prop.

    Raises:
        StaleInputError: If fingerprint does not match prop.
        NumericalError:  If a diagonal element has a non-negligible imaginary part.
    """
    _check_fresh(prop, fingerprint)
    if not prop.has_suffix():
        prop = prop.with_suffix(v)

    rows = np.empty((sys.intervals, sys.m, sys.n), dtype=np.complex128)
    for l, (h, v_l) in enumerate(zip(prop.hamiltonians, prop.suffix)):
        eig = eig_hermitian(h)
        for m, x in enumerate(sys.embedded_controls):
            q = q_integral(h, x, sys.delta, eig=eig)
            rows[l, m] = np.einsum("in,ij,jn->n", v_l.conj(), q, v_l)
    return -as_real(rows.reshape(sys.intervals * sys.m, sys.n), "G_c")


def p_integral(basis: HermitianBasis, phi_vector) -> ComplexMatrix:
    """
    Returns P_b = ∫_0^1 e^{-iτB(φ)} B_b e^{iτB(φ)} dτ for every basis
    element, shape (N_B², N_B, N_B). At φ = 0, P_b = B_b.
    """
    generator = -basis.generator(phi_vector)
    eig = eig_hermitian(generator)
    return np.array([spectral_integral(generator, b, 1.0, eig=eig) for b in basis.elements])


def g_phi(v, p_list, n_a: int) -> RealMatrix:
    """
    Returns G_φ with (G_φ)_{b,n} = -v_n^† (I_A ⊗ P_b) v_n.

    Args:
        v:      The eigenvector matrix V of U_obj, dimension N = N_A N_B.
        p_list: The operators P_b, shape (N_B², N_B, N_B).
        n_a:    Dimension of system A.

    Raises:
        DimensionError: If V and P_b do not fit together.
    """
    v = np.asarray(v, dtype=np.complex128)
    p_list = np.asarray(p_list, dtype=np.complex128)
    n_b = p_list.shape[-1]
    if v.shape[0] != n_a * n_b:
        raise DimensionError("eigenvector matrix", n_a * n_b, v.shape[0])
    blocks = v.reshape(n_a, n_b, v.shape[1])
    return -as_real(np.einsum("ain,bij,ajn->bn", blocks.conj(), p_list, blocks), "G_phi")


def _assemble(
    sys: ControlSystem,
    prop: Propagation,
    v: ComplexMatrix,
    omega: RealVector,
    phi_vector: RealVector,
    basis: HermitianBasis,
    fingerprint: str,
    degenerate: bool,
    fid: float,
    at_phi_opt: bool,
) -> GradientBundle:
    gc = g_c(sys, prop, v, fingerprint)
    gp = g_phi(v, p_integral(basis, phi_vector), sys.n_a)
    stack = np.vstack([gc, gp])
    kinematic = -np.sin(omega)
    grad_j_c = gc @ kinematic

    grad_f_c = None
    if at_phi_opt:
        grad_f_c = (2 * np.sqrt(fid) / sys.n) * grad_j_c

    return GradientBundle(
        g_c=gc,
        g_phi=gp,
        g_stack=stack,
        kinematic=kinematic,
        grad_j_c=grad_j_c,
        grad_j_phi=gp @ kinematic,
        grad_f_c=grad_f_c,
        singular_values=svd(stack)[1],
        singular_values_c=svd(gc)[1],
        omega=omega,
        v=v,
        fidelity=fid,
        j_value=float(np.sum(np.cos(omega))),
        at_phi_opt=at_phi_opt,
        degenerate=degenerate,
    )


def bundle(
    sys: ControlSystem,
    w: Target,
    c,
    phi_vector=None,
    basis: Optional[HermitianBasis] = None,
    evaluation: Optional[LandscapeEval] = None,
) -> GradientBundle:
    """
    Computes every gradient quantity at (c, φ).

    Args:
        sys:        The control system.
        w:          The target on system A.
        c:          Control amplitudes, shape (L, M) or flat.
        phi_vector: The extended parameter φ; φ_opt(c) when None.
        basis:      The operator basis; generalized Gell-Mann by default.
        evaluation: A LandscapeEval for the same c to reuse when φ is None.

    Returns:
        The GradientBundle. grad_f_c is only set when φ = φ_opt(c).

    Raises:
        StaleInputError: If evaluation was computed for other controls.
    """
    basis = basis or hermitian_basis(sys.n_b)
    c = as_controls(sys, c)

    if phi_vector is None:
        ev = evaluation or evaluate(sys, w, c, basis)
        expected = control_fingerprint(c)
        if ev.fingerprint != expected:
            raise StaleInputError(expected, ev.fingerprint)
        return _assemble(sys, ev.propagation, ev.v, ev.omega, ev.phi_opt_vector, basis,
                         ev.fingerprint, ev.degenerate, ev.fidelity, True)

    prop = propagate(sys, c)
    spectrum = u_obj_and_omega(sys, w, prop.total, phi_vector, basis)
    fid = fidelity(gamma(sys, w, prop.total), sys.n)
    return _assemble(sys, prop, spectrum.v, spectrum.omega, np.asarray(phi_vector, dtype=np.float64),
                     basis, prop.fingerprint, spectrum.degenerate, fid, False)


def central_difference(func: Callable[[np.ndarray], float], x, step: float) -> RealVector:
    """
    Returns the central-difference gradient of func at x,
    (func(x + h e_j) - func(x - h e_j)) / 2h for every coordinate j.

    Raises:
        ValueError: If step <= 0.
    """
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive (was {step})")
    x0 = np.array(x, dtype=np.float64).reshape(-1)
    grad = np.empty_like(x0)
    for j in range(x0.shape[0]):
        x = x0.copy()
        x[j] = x0[j] + step
        f_plus = func(x)
        x[j] = x0[j] - step
        f_minus = func(x)
        grad[j] = (f_plus - f_minus) / (2 * step)
    return grad


def finite_diff_j(
    sys: ControlSystem,
    w: Target,
    c,
    phi_vector,
    step: float = 1e-5,
    basis: Optional[HermitianBasis] = None,
) -> RealVector:
    """
    Returns central differences of J(c, φ) over every coordinate of the
    stacked vector (c, φ), length LM + N_B².
    """
    basis = basis or hermitian_basis(sys.n_b)
    lm = sys.intervals * sys.m
    x0 = np.concatenate([as_controls(sys, c).reshape(-1), np.asarray(phi_vector, dtype=np.float64)])

    def j_of(x):
        return j_extended(sys, w, propagate(sys, x[:lm]).total, x[lm:], basis)

    return central_difference(j_of, x0, step)


def finite_diff_f(sys: ControlSystem, w: Target, c, step: float = 1e-5) -> RealVector:
    """
    Returns central differences of F(c) over every control amplitude.
    """
    def f_of(x):
        return fidelity(gamma(sys, w, propagate(sys, x).total), sys.n)

    return central_difference(f_of, as_controls(sys, c).reshape(-1), step)


def finite_diff_hessian(
    grad: Callable[[np.ndarray], np.ndarray],
    x,
    step: float = 1e-5,
    directions=None,
) -> RealMatrix:
    """
    Returns the symmetrized Hessian of a function from central differences of
    its gradient, H_jk = d_j^T (grad(x + h d_k) - grad(x - h d_k)) / 2h.

    Args:
        grad:       The gradient of the function, flat in and flat out.
        x:          The point.
        step:       The difference step h.
        directions: Columns d_k spanning the subspace the Hessian is restricted
                    to; the coordinate axes by default.

    Raises:
        ValueError: If step <= 0.
    """
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive (was {step})")
    x0 = np.array(x, dtype=np.float64).reshape(-1)
    d = np.eye(x0.shape[0]) if directions is None else np.asarray(directions, dtype=np.float64)
    columns = [(grad(x0 + step * d[:, k]) - grad(x0 - step * d[:, k])) / (2 * step) for k in range(d.shape[1])]
    h = d.T @ np.array(columns).T
    return 0.5 * (h + h.T)


def landscape_gradient(
    sys: ControlSystem,
    w: Target,
    c,
    evaluation: Optional[LandscapeEval] = None,
    step: float = 1e-5,
) -> Tuple[RealVector, bool]:
    """
    Returns (∇_c F, fallback). fallback is True when F(c) <= FALLBACK_FIDELITY
    and the gradient came from central differences with the given step.

    Warns:
        GradientFallbackWarning: When the fallback is taken.
    """
    ev = evaluation or evaluate(sys, w, c)
    if ev.fidelity <= FALLBACK_FIDELITY:
        warnings.warn(
            f"F(c) = {ev.fidelity:.3g} is too small for the analytic gradient; using finite differences",
            GradientFallbackWarning,
            stacklevel=3,
        )
        return finite_diff_f(sys, w, c, step), True
    return bundle(sys, w, c, evaluation=ev).grad_f_c, False


def grad_f(sys: ControlSystem, w: Target, c, evaluation: Optional[LandscapeEval] = None) -> RealVector:
    """
    Returns the landscape gradient ∇_c F = (2 √F / N) G_c(c, φ_opt) g(ω),
    flattened like the control vector.

    When F(c) <= FALLBACK_FIDELITY the formula is singular and a
    finite-difference gradient is returned instead, with a
    GradientFallbackWarning.

    Args:
        sys:        The control system.
        w:          The target on system A.
        c:          Control amplitudes.
        evaluation: A LandscapeEval for the same c to reuse.
    """
    return landscape_gradient(sys, w, c, evaluation)[0]


def phi_rank_bound(v, basis: HermitianBasis, n_a: int, rel_tol: float = 1e-8) -> Tuple[RealMatrix, int]:
    """
    Returns the matrix Σ_b z_b z_b^T with z_b[n] = v_n^† (I_A ⊗ B_b) v_n and
    its numerical rank. G_φ^T G_φ is bounded below by a positive multiple of
    this matrix; it is reported, no claim about rank G_φ is derived from it.
    """
    z = -g_phi(v, basis.elements, n_a)
    bound = z.T @ z
    s = np.linalg.svd(bound, compute_uv=False)
    rank = int(np.sum(s > rel_tol * s[0])) if s.size and s[0] > 0 else 0
    return bound, rank
