"""
Piecewise-constant time evolution.

For controls c of shape (L, M) the step Hamiltonians are
H_l = H_0 + Σ_m c_lm (H_m ⊗ I), the step unitaries are U_l = e^{-iδH_l}, and
the total unitary is the ordered product U(c) = U_1 U_2 ... U_L with U_1 the
leftmost factor.
"""
import logging
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .linalg import expm_i_hermitian
from .model import ControlSystem, as_controls, fingerprint
from .types import ComplexMatrix, Placeholder, placeholder

__all__ = [
    "Propagation",
    "step_hamiltonians",
    "propagate",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Propagation:
    """
    Propagation holds the time evolution for one control vector.

    Attributes:
        hamiltonians (ComplexMatrix): The step Hamiltonians H_l, shape (L, N, N).
        steps (ComplexMatrix):        The step unitaries U_l, shape (L, N, N).
        total (ComplexMatrix):        The total unitary U(c) = U_1 ... U_L.
        fingerprint (str):            Fingerprint of the controls (see model.fingerprint).
        suffix:                       The suffix products V_l = U_{l+1} ... U_L V,
                                      shape (L, N, N), or placeholder until an
                                      eigenvector matrix V is supplied through
                                      with_suffix.
    """

    hamiltonians: ComplexMatrix
    steps: ComplexMatrix
    total: ComplexMatrix
    fingerprint: str
    suffix: Union[ComplexMatrix, Placeholder] = placeholder

    def has_suffix(self) -> bool:
        return self.suffix is not placeholder

    def with_suffix(self, v) -> "Propagation":
        """
        Returns a copy with the suffix products V_l = U_{l+1} ... U_L V filled
        in; V_L = V.

        Args:
            v: The eigenvector matrix V of U_obj for the same controls.

        Returns:
            A Propagation whose suffix field is populated.
        """
        acc = np.asarray(v, dtype=np.complex128)
        suffix = np.empty_like(self.steps)
        for l in range(self.steps.shape[0] - 1, -1, -1):
            suffix[l] = acc
            acc = self.steps[l] @ acc
        return replace(self, suffix=suffix)


def step_hamiltonians(sys: ControlSystem, c) -> ComplexMatrix:
    """
    Returns the step Hamiltonians H_l = H_0 + Σ_m c_lm (H_m ⊗ I_{N_B}),
    shape (L, N, N).

    Raises:
        DimensionError: If c does not hold L*M amplitudes.
    """
    c = as_controls(sys, c)
    return sys.h0[None] + np.einsum("lm,mij->lij", c, sys.embedded_controls)


def propagate(sys: ControlSystem, c) -> Propagation:
    """
    Propagates the system under piecewise-constant controls c.

    Args:
        sys: The control system.
        c:   Control amplitudes, shape (L, M) or flat of length L*M.

    Returns:
        The Propagation with U_l = e^{-iδH_l} and U(c) = U_1 ... U_L.

    Raises:
        DimensionError: If c does not hold L*M amplitudes.
    """
    c = as_controls(sys, c)
    hamiltonians = step_hamiltonians(sys, c)
    steps = np.array([expm_i_hermitian(h, sys.delta) for h in hamiltonians])

    # Accumulated right to left: total = U_1 (U_2 (... U_L)).
    total = np.eye(sys.n, dtype=np.complex128)
    for u in steps[::-1]:
        total = u @ total

    return Propagation(hamiltonians, steps, total, fingerprint(c))
