"""
Gradient ascent on the control landscape F(c) with accept/reject step-size
control:

    c^i = c^{i-1} + γ ∇_c F(c^{i-1})

A trial step is accepted when it raises F by more than the improvement
floor; γ then grows. Otherwise γ shrinks and the step is retried from the
previous controls.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from .diagnostics import numerical_rank, phiopt_identity_check
from .gradients import FALLBACK_FIDELITY, GradientBundle, bundle, finite_diff_hessian, grad_f, landscape_gradient
from .landscape import LandscapeEval, Target, evaluate
from .linalg import HermitianBasis, hermitian_basis
from .model import ControlSystem, as_controls, symmetrize_controls, time_symmetric_basis, zero_controls
from .types import ControlVector, RealVector

__all__ = [
    "Status",
    "AscentConfig",
    "TraceRecord",
    "OptimizerTrace",
    "ascend",
]

logger = logging.getLogger(__name__)

Callback = Callable[[int, ControlVector, LandscapeEval, GradientBundle], None]


class Status(str, Enum):
    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_ITERS = "max_iters"
    NON_FINITE = "non_finite"
    SADDLE_AT_BOTTOM = "saddle_at_bottom"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class AscentConfig:
    """
    AscentConfig holds the step-size policy and stopping rules.

    Attributes:
        gamma0 (float):                 Initial step size γ.
        grow (float):                   Factor applied to γ on acceptance, > 1.
        shrink (float):                 Factor applied to γ on rejection, in (0, 1).
        max_iters (int):                Maximum number of accepted iterations.
        max_rejects_in_row (int):       Consecutive rejections after which the run stalls.
        improvement_floor (float):      Minimum gain in F for a step to be accepted.
        convergence_tol (float):        The run has converged when 1 - F <= convergence_tol.
        record_gradient_spectra (bool): Record singular values of G_c and G_{c,φ} per
                                        iteration and re-check the φ_opt identities.
        rank_tolerance (float):         Relative threshold of the numerical ranks.
        gamma_bounds (Tuple[float, float]): γ is clamped to this interval.
        escape_stationary (bool):       Leave non-optimal stationary points along the
                                        direction of largest positive curvature.
        stationary_tol (float):         A point with ||∇_c F|| <= stationary_tol is stationary.
        curvature_tol (float):          Curvatures at or below this are not positive.
        hessian_step (float):           Difference step of the Hessian at stationary points.
        escape_radius (float):          First trial distance of an escape step.
        time_symmetric (bool):          Restrict controls, gradients and escape directions
                                        to time-symmetric controls, c_l = c_{L+1-l}.

    Raises:
        ValueError: If a field is out of range.
    """

    gamma0: float = 0.01
    grow: float = 2.0
    shrink: float = 0.5
    max_iters: int = 2000
    max_rejects_in_row: int = 60
    improvement_floor: float = 1e-12
    convergence_tol: float = 1e-8
    record_gradient_spectra: bool = False
    rank_tolerance: float = 1e-8
    gamma_bounds: Tuple[float, float] = (1e-12, 1e6)
    escape_stationary: bool = True
    stationary_tol: float = 1e-10
    curvature_tol: float = 1e-8
    hessian_step: float = 1e-5
    escape_radius: float = 0.1
    time_symmetric: bool = False

    def __post_init__(self):
        lo, hi = self.gamma_bounds
        if not 0 < lo <= hi:
            raise ValueError(f"invalid step-size bounds {self.gamma_bounds}")
        if not lo <= self.gamma0 <= hi:
            raise ValueError(f"gamma0 must be positive and within {self.gamma_bounds} (was {self.gamma0})")
        if not self.grow > 1:
            raise ValueError(f"grow must exceed 1 (was {self.grow})")
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must be in (0, 1) (was {self.shrink})")
        if self.max_iters < 0 or self.max_rejects_in_row < 1:
            raise ValueError("max_iters must be >= 0 and max_rejects_in_row >= 1")
        if not 0 < self.rank_tolerance < 1:
            raise ValueError(f"rank_tolerance must be in (0, 1) (was {self.rank_tolerance})")
        if self.stationary_tol < 0 or self.curvature_tol < 0:
            raise ValueError("stationary_tol and curvature_tol must be non-negative")
        if not (self.hessian_step > 0 and self.escape_radius > 0):
            raise ValueError("hessian_step and escape_radius must be positive")


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """
    One accepted iterate of an ascent.

    Attributes:
        iteration (int):        Index of the accepted iterate; 0 is the initial controls.
        fidelity (float):       F(c).
        j_value (float):        J(c, φ_opt(c)).
        gamma (float):          The step size at this iterate.
        grad_norm (float):      ||∇_c F||.
        rank_c (int):           Numerical rank of G_c at φ_opt.
        rank_stack (int):       Numerical rank of G_{c,φ} at φ_opt.
        degenerate (bool):      Whether the spectral frequencies were flagged degenerate.
        fallback (bool):        Whether ∇F came from finite differences.
        singular_values_c (Optional[RealVector]): Spectrum of G_c, if recorded.
        singular_values (Optional[RealVector]):   Spectrum of G_{c,φ}, if recorded.
        identities_ok (Optional[bool]):           φ_opt identity check, if recorded.
    """

    iteration: int
    fidelity: float
    j_value: float
    gamma: float
    grad_norm: float
    rank_c: int
    rank_stack: int
    degenerate: bool
    fallback: bool = False
    singular_values_c: Optional[RealVector] = None
    singular_values: Optional[RealVector] = None
    identities_ok: Optional[bool] = None

    @property
    def one_minus_f(self) -> float:
        return 1.0 - self.fidelity


@dataclass(eq=False)
class OptimizerTrace:
    """
    The record of an ascent run.

    Attributes:
        records (List[TraceRecord]): One record per accepted iterate.
        status (Status):             Why the run stopped.
        controls (ControlVector):    The final controls.
        evaluations (int):           Number of landscape evaluations.
        rejects (int):               Number of rejected trial steps.
        escapes (int):               Number of accepted escapes from stationary points.
    """

    records: List[TraceRecord] = field(default_factory=list)
    status: Optional[Status] = None
    controls: Optional[ControlVector] = None
    evaluations: int = 0
    rejects: int = 0
    escapes: int = 0

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def fidelities(self) -> RealVector:
        return np.array([r.fidelity for r in self.records])


def _finite(ev: LandscapeEval) -> bool:
    return bool(np.isfinite(ev.fidelity))


def _record(
    iteration: int,
    ev: LandscapeEval,
    grads: GradientBundle,
    grad: RealVector,
    gamma: float,
    fallback: bool,
    cfg: AscentConfig,
) -> TraceRecord:
    spectra = cfg.record_gradient_spectra
    identities_ok = None
    if spectra:
        check = phiopt_identity_check(ev, grads, 1e-7)
        identities_ok = check.passed
        if not check.passed:
            logger.warning("φ_opt identities violated at iteration %d: |Σ sin ω| = %.3g, ||G_φ g||_∞ = %.3g",
                           iteration, check.sum_sin, check.grad_phi_norm)
    return TraceRecord(
        iteration=iteration,
        fidelity=ev.fidelity,
        j_value=ev.j_value,
        gamma=gamma,
        grad_norm=float(np.linalg.norm(grad)),
        rank_c=numerical_rank(grads.g_c, cfg.rank_tolerance).numerical_rank,
        rank_stack=numerical_rank(grads.g_stack, cfg.rank_tolerance).numerical_rank,
        degenerate=ev.degenerate,
        fallback=fallback,
        singular_values_c=grads.singular_values_c if spectra else None,
        singular_values=grads.singular_values if spectra else None,
        identities_ok=identities_ok,
    )


def _curvature_direction(
    sys: ControlSystem,
    w: Target,
    c: ControlVector,
    cfg: AscentConfig,
) -> Tuple[float, Optional[ControlVector]]:
    """
    Returns the largest curvature of F at c and its unit direction, or
    (curvature, None) when no curvature exceeds cfg.curvature_tol.
    """
    directions = time_symmetric_basis(sys) if cfg.time_symmetric else None
    hessian = finite_diff_hessian(lambda x: grad_f(sys, w, x), c, cfg.hessian_step, directions)
    values, vectors = np.linalg.eigh(hessian)
    if values[-1] <= cfg.curvature_tol:
        return float(values[-1]), None
    v = vectors[:, -1] if directions is None else directions @ vectors[:, -1]
    v = v / np.linalg.norm(v)
    # Sign convention: the largest component is positive.
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return float(values[-1]), v.reshape(c.shape)


def _escape(
    sys: ControlSystem,
    w: Target,
    c: ControlVector,
    ev: LandscapeEval,
    basis: HermitianBasis,
    cfg: AscentConfig,
    trace: OptimizerTrace,
) -> Optional[Tuple[ControlVector, LandscapeEval]]:
    """
    Steps away from a stationary point along the direction of largest
    positive curvature, trying both signs and shrinking the distance until F
    increases. Returns None when F has no positive curvature at c or no
    trial step was accepted.
    """
    curvature, direction = _curvature_direction(sys, w, c, cfg)
    if direction is None:
        logger.info("stationary point at F = %.12g has no positive curvature (largest %.3g)", ev.fidelity, curvature)
        return None

    radius = cfg.escape_radius
    for _ in range(cfg.max_rejects_in_row):
        for sign in (1.0, -1.0):
            trial = c + sign * radius * direction
            trial_ev = evaluate(sys, w, trial, basis)
            trace.evaluations += 1
            if _finite(trial_ev) and trial_ev.fidelity - ev.fidelity > cfg.improvement_floor:
                logger.info("left stationary point at F = %.12g along curvature %.3g: F = %.12g",
                            ev.fidelity, curvature, trial_ev.fidelity)
                trace.escapes += 1
                return trial, trial_ev
            trace.rejects += 1
        radius *= cfg.shrink
    return None


def ascend(
    sys: ControlSystem,
    w: Target,
    c0=None,
    cfg: AscentConfig = AscentConfig(),
    callback: Optional[Callback] = None,
) -> OptimizerTrace:
    """
    Maximizes F(c) by gradient ascent.

    The gradient is the analytic ∇_c F at φ_opt(c); at F <= FALLBACK_FIDELITY,
    where that formula is singular, central differences are used. The
    analytic gradient is kept at degenerate spectral frequencies since
    G g(ω) does not depend on the eigenbasis chosen inside a degenerate
    eigenspace; such iterates are flagged in the trace.

    At a stationary point that is not optimal the finite-difference Hessian
    is diagonalized and the ascent steps along the direction of largest
    positive curvature. With cfg.time_symmetric the initial controls, every
    gradient and the escape direction are projected onto time-symmetric
    controls. On landscapes invariant under reversal of the intervals the
    projection only removes rounding.

    Args:
        sys:      The control system.
        w:        The target on system A.
        c0:       Initial controls; the zero vector by default.
        cfg:      Step-size policy and stopping rules.
        callback: Called as callback(iteration, c, evaluation, gradients) for
                  every accepted iterate.

    Returns:
        The OptimizerTrace. Its status is one of converged, stalled,
        max_iters, non_finite, saddle_at_bottom or trapped.
    """
    lo, hi = cfg.gamma_bounds
    basis = hermitian_basis(sys.n_b)
    c = zero_controls(sys) if c0 is None else as_controls(sys, c0)
    if cfg.time_symmetric:
        c = symmetrize_controls(c)
    gamma = cfg.gamma0

    trace = OptimizerTrace()
    ev = evaluate(sys, w, c, basis)
    trace.evaluations += 1
    rejects_in_row = 0
    iteration = 0
    warned_degenerate = False

    while True:
        if not _finite(ev):
            trace.status = Status.NON_FINITE
            break

        grads = bundle(sys, w, c, basis=basis, evaluation=ev)
        fallback = ev.fidelity <= FALLBACK_FIDELITY
        if fallback:
            grad, _ = landscape_gradient(sys, w, c, evaluation=ev)
        else:
            grad = grads.grad_f_c
        if cfg.time_symmetric:
            grad = symmetrize_controls(grad.reshape(c.shape)).reshape(-1)
        if not np.all(np.isfinite(grad)):
            trace.status = Status.NON_FINITE
            break

        trace.records.append(_record(iteration, ev, grads, grad, gamma, fallback, cfg))
        if ev.degenerate and not warned_degenerate:
            logger.warning("degenerate spectral frequencies at iteration %d, F = %.12g; later degenerate iterates are flagged in the trace",
                           iteration, ev.fidelity)
            warned_degenerate = True
        if callback is not None:
            callback(iteration, c, ev, grads)

        if 1.0 - ev.fidelity <= cfg.convergence_tol:
            trace.status = Status.CONVERGED
            break
        if fallback and np.linalg.norm(grad) <= FALLBACK_FIDELITY:
            trace.status = Status.SADDLE_AT_BOTTOM
            break
        if iteration >= cfg.max_iters:
            trace.status = Status.MAX_ITERS
            break

        if cfg.escape_stationary and np.linalg.norm(grad) <= cfg.stationary_tol:
            escaped = _escape(sys, w, c, ev, basis, cfg, trace)
            if escaped is None:
                trace.status = Status.TRAPPED
                break
            c, ev = escaped
            iteration += 1
            continue

        step = grad.reshape(c.shape)
        accepted = False
        while rejects_in_row < cfg.max_rejects_in_row:
            trial = c + gamma * step
            trial_ev = evaluate(sys, w, trial, basis)
            trace.evaluations += 1
            if not _finite(trial_ev):
                trace.status = Status.NON_FINITE
                break
            if trial_ev.fidelity - ev.fidelity > cfg.improvement_floor:
                logger.debug("iteration %d accepted: F = %.12g, γ = %.3g", iteration + 1, trial_ev.fidelity, gamma)
                c, ev = trial, trial_ev
                gamma = min(gamma * cfg.grow, hi)
                rejects_in_row = 0
                accepted = True
                break
            gamma = max(gamma * cfg.shrink, lo)
            rejects_in_row += 1
            trace.rejects += 1
            logger.debug("step rejected: F would be %.12g, γ -> %.3g", trial_ev.fidelity, gamma)

        if trace.status is not None:
            break
        if not accepted:
            trace.status = Status.STALLED
            break
        iteration += 1

    trace.controls = c
    final = trace.records[-1].fidelity if trace.records else float("nan")
    logger.info("ascent finished: %s after %d iterations, F = %.12g", trace.status.value, iteration, final)
    return trace
