"""
Bipartite control systems: drift and control Hamiltonians, horizon, targets
and the builders for the central spin model, the random bath model and
random closed systems.

Tensor products are ordered with the controlled system A first throughout,
so the control Hamiltonians enter the dynamics as H_m ⊗ I_{N_B}.
"""
import hashlib
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NumericalError
from .linalg import assert_hermitian, assert_unitary, kron
from .types import ComplexMatrix, ControlVector, RealMatrix

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "ControlSystem",
    "TargetSpec",
    "make_rng",
    "random_hermitian",
    "build_central_spin",
    "build_random_bath",
    "build_random_closed",
    "build_custom",
    "random_target",
    "as_controls",
    "zero_controls",
    "time_reversed",
    "symmetrize_controls",
    "time_symmetric_basis",
    "fingerprint",
]

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
for _pauli in (PAULI_X, PAULI_Y, PAULI_Z):
    _pauli.setflags(write=False)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """
    ControlSystem is an immutable description of a bipartite system A⊗B with
    dynamics H_l = H_0 + Σ_m c_lm (H_m ⊗ I_{N_B}) on L uniform intervals of
    width δ = T/L.

    Attributes:
        n_a (int):                Dimension N_A of the controlled system A.
        n_b (int):                Dimension N_B of the uncontrolled system B.
        h0 (ComplexMatrix):       The Hermitian drift Hamiltonian of dimension N_A N_B.
        controls (ComplexMatrix): The M Hermitian control Hamiltonians on A, shape (M, N_A, N_A).
        intervals (int):          The number L of piecewise-constant intervals.
        t_final (float):          The final time T.

    Raises:
        DimensionError:    If h0 or a control Hamiltonian has the wrong dimension.
        NotHermitianError: If h0 or a control Hamiltonian is not Hermitian.
        ValueError:        If a dimension or the horizon is out of range.
    """

    n_a: int
    n_b: int
    h0: ComplexMatrix
    controls: ComplexMatrix
    intervals: int
    t_final: float

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError(f"dimensions must be positive (was N_A={self.n_a}, N_B={self.n_b})")
        if self.intervals < 1:
            raise ValueError(f"the horizon needs at least one interval (was L={self.intervals})")
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ValueError(f"the final time must be positive (was T={self.t_final})")

        n = self.n_a * self.n_b
        h0 = np.asarray(self.h0, dtype=np.complex128)
        if h0.shape != (n, n):
            raise DimensionError("drift Hamiltonian", (n, n), h0.shape)
        assert_hermitian(h0, "drift Hamiltonian")

        controls = np.asarray(self.controls, dtype=np.complex128)
        if controls.ndim == 2:
            controls = controls[None]
        if controls.ndim != 3 or controls.shape[0] < 1 or controls.shape[1:] != (self.n_a, self.n_a):
            raise DimensionError("control Hamiltonians", f"(M >= 1, {self.n_a}, {self.n_a})", controls.shape)
        for m, hm in enumerate(controls):
            assert_hermitian(hm, f"control Hamiltonian {m + 1}")

        # Frozen dataclass; fields are normalized once here.
        object.__setattr__(self, "h0", _frozen(h0))
        object.__setattr__(self, "controls", _frozen(controls))
        object.__setattr__(self, "t_final", float(self.t_final))

    @property
    def n(self) -> int:
        """The total dimension N = N_A N_B."""
        return self.n_a * self.n_b

    @property
    def m(self) -> int:
        """The number M of control Hamiltonians."""
        return self.controls.shape[0]

    @property
    def delta(self) -> float:
        """The interval width δ = T/L."""
        return self.t_final / self.intervals

    @property
    def horizon(self) -> Tuple[int, float]:
        """The horizon (L, T)."""
        return self.intervals, self.t_final

    @property
    def is_closed(self) -> bool:
        """Whether there is no B system, N_B = 1."""
        return self.n_b == 1

    @cached_property
    def embedded_controls(self) -> ComplexMatrix:
        """The control Hamiltonians on A⊗B, H_m ⊗ I_{N_B}, shape (M, N, N)."""
        eye = np.eye(self.n_b)
        return _frozen([kron(hm, eye) for hm in self.controls])

    def with_horizon(self, intervals: int, t_final: float) -> "ControlSystem":
        """
        Returns a copy of the system with another horizon (L, T).
        """
        return replace(self, intervals=intervals, t_final=t_final)


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """
    TargetSpec holds the desired unitary W on system A.

    Attributes:
        w (ComplexMatrix): A unitary matrix of dimension N_A.

    Raises:
        NotUnitaryError: If w is not unitary.
    """

    w: ComplexMatrix

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(assert_unitary(self.w, "target")))

    @property
    def n_a(self) -> int:
        return self.w.shape[0]

    @classmethod
    def identity(cls, n_a: int) -> "TargetSpec":
        return cls(np.eye(n_a))

    @classmethod
    def from_matrix(cls, w) -> "TargetSpec":
        return cls(np.asarray(w, dtype=np.complex128))


def make_rng(seed: int) -> np.random.Generator:
    """
    Returns the generator used for every random quantity in PyLandscape:
    numpy's PCG64 bit generator seeded with seed, which produces the same
    stream on every platform.
    """
    return np.random.Generator(np.random.PCG64(seed))


def random_hermitian(n: int, rng: np.random.Generator) -> ComplexMatrix:
    """
    Returns (A + A^†)/2 for A with standard complex Gaussian entries.
    """
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def _bath_operator(pauli: np.ndarray, q: int, q_b: int) -> np.ndarray:
    # σ acting on bath spin q (1-based, leftmost bath factor first)
    return kron(kron(np.eye(2 ** (q - 1)), pauli), np.eye(2 ** (q_b - q)))


def build_central_spin(
    q_b: int,
    couplings: Optional[Sequence[float]] = None,
    intervals: int = 100,
    t_final: float = 20.0,
) -> ControlSystem:
    """
    Builds the central spin model: a single spin (N_A = 2) coupled through a
    Heisenberg interaction to q_b bath spins (N_B = 2^q_b), controlled along z.

        H_0 = σ_y ⊗ I + Σ_q a_q Σ_{s=x,y,z} σ_s ⊗ σ_s^{(q)},    H_1 = σ_z

    where σ_s^{(q)} acts on bath spin q, the q-th tensor factor of B.

    Args:
        q_b:       The number of bath spins, q_b >= 1.
        couplings: The coupling constants a_q; all 1.0 by default.
        intervals: The number L of control intervals.
        t_final:   The final time T.

    Returns:
        The central spin ControlSystem.

    Raises:
        ValueError:     If q_b < 1.
        DimensionError: If the number of couplings differs from q_b.
    """
    if q_b < 1:
        raise ValueError(f"the central spin model needs at least one bath spin (was q_b={q_b})")
    a = np.ones(q_b) if couplings is None else np.asarray(couplings, dtype=np.float64).reshape(-1)
    if a.shape[0] != q_b:
        raise DimensionError("couplings", q_b, a.shape[0])

    n_b = 2 ** q_b
    h0 = kron(PAULI_Y, np.eye(n_b))
    for q in range(1, q_b + 1):
        for pauli in (PAULI_X, PAULI_Y, PAULI_Z):
            h0 = h0 + a[q - 1] * kron(pauli, _bath_operator(pauli, q, q_b))

    logger.debug("built central spin model with q_b=%d, couplings=%s", q_b, a)
    return ControlSystem(2, n_b, h0, PAULI_Z[None], intervals, t_final)


def build_random_bath(
    n_b: int,
    seed: int,
    intervals: int = 4,
    t_final: float = 1.0,
) -> ControlSystem:
    """
    Builds a spin dephased by a random bath,

        H_0 = σ_z ⊗ B_z,    H_1 = σ_x

    where B_z is a random Hermitian matrix (see random_hermitian) rescaled to
    unit spectral norm. The result is a deterministic function of seed.

    Raises:
        ValueError: If n_b < 1.
    """
    if n_b < 1:
        raise ValueError(f"bath dimension must be positive (was {n_b})")
    b_z = random_hermitian(n_b, make_rng(seed))
    b_z = b_z / np.linalg.norm(b_z, 2)
    return ControlSystem(2, n_b, kron(PAULI_Z, b_z), PAULI_X[None], intervals, t_final)


def build_random_closed(
    n_a: int,
    n_controls: int,
    seed: int,
    intervals: int = 4,
    t_final: float = 1.0,
) -> ControlSystem:
    """
    Builds a closed system (N_B = 1) with drift and control Hamiltonians
    drawn at random (see random_hermitian) and rescaled to unit spectral norm.

    Raises:
        ValueError: If n_a < 1 or n_controls < 1.
    """
    if n_controls < 1:
        raise ValueError(f"at least one control is needed (was {n_controls})")
    rng = make_rng(seed)
    ops = []
    for _ in range(n_controls + 1):
        h = random_hermitian(n_a, rng)
        ops.append(h / max(np.linalg.norm(h, 2), 1e-300))
    return ControlSystem(n_a, 1, ops[0], np.array(ops[1:]), intervals, t_final)


def build_custom(h0, controls, n_a: int, n_b: int, horizon: Tuple[int, float]) -> ControlSystem:
    """
    Builds a ControlSystem from explicit matrices.

    Args:
        h0:       The drift Hamiltonian of dimension N_A N_B.
        controls: The control Hamiltonians on A, a sequence of N_A x N_A matrices.
        n_a:      Dimension of system A.
        n_b:      Dimension of system B; 1 for a closed system.
        horizon:  The pair (L, T).

    Raises:
        DimensionError:    If a matrix has the wrong dimension.
        NotHermitianError: If a matrix is not Hermitian.
    """
    intervals, t_final = horizon
    return ControlSystem(n_a, n_b, np.asarray(h0), np.asarray(controls), int(intervals), float(t_final))


def random_target(n_a: int, seed: int) -> TargetSpec:
    """
    Returns a Haar-random unitary target on system A: the QR decomposition
    of a complex Gaussian matrix with the phases of R's diagonal moved into Q.
    """
    if n_a < 1:
        raise ValueError(f"target dimension must be positive (was {n_a})")
    rng = make_rng(seed)
    z = (rng.standard_normal((n_a, n_a)) + 1j * rng.standard_normal((n_a, n_a))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return TargetSpec(q * (d / np.abs(d)))


def as_controls(sys: ControlSystem, c) -> ControlVector:
    """
    Returns c as an (L, M) array of control amplitudes. A flat vector of
    length L*M is read interval-major, then control index.

    Raises:
        DimensionError: If c does not hold L*M amplitudes.
        NumericalError: If c has non-finite entries.
    """
    c = np.array(c, dtype=np.float64)
    if c.size != sys.intervals * sys.m:
        raise DimensionError("control vector", sys.intervals * sys.m, c.size)
    if not np.all(np.isfinite(c)):
        raise NumericalError("control vector", float("nan"))
    return c.reshape(sys.intervals, sys.m)


def zero_controls(sys: ControlSystem) -> ControlVector:
    """Returns the all-zero control vector of shape (L, M)."""
    return np.zeros((sys.intervals, sys.m))


def time_reversed(c) -> ControlVector:
    """Returns the control vector with the order of the intervals reversed."""
    return np.asarray(c)[::-1].copy()


def symmetrize_controls(c) -> ControlVector:
    """
    Returns the orthogonal projection of c onto the time-symmetric controls,
    c_l = c_{L+1-l}. c must be shaped (L, M).
    """
    c = np.asarray(c, dtype=np.float64)
    return 0.5 * (c + c[::-1])


def time_symmetric_basis(sys: ControlSystem) -> RealMatrix:
    """
    Returns an orthonormal basis of the time-symmetric controls as the
    columns of an (LM, ceil(L/2) M) matrix, in flattened control coordinates.
    """
    half = (sys.intervals + 1) // 2
    basis = np.zeros((sys.intervals, sys.m, half, sys.m))
    for l in range(half):
        mirror = sys.intervals - 1 - l
        for m in range(sys.m):
            basis[l, m, l, m] = 1.0
            basis[mirror, m, l, m] = 1.0
    basis = basis.reshape(sys.intervals * sys.m, half * sys.m)
    return basis / np.linalg.norm(basis, axis=0)


def fingerprint(c) -> str:
    """
    Returns a stable hash of the control amplitudes c, used to detect
    quantities computed for different controls being combined.
    """
    return hashlib.sha1(np.ascontiguousarray(c, dtype=np.float64).tobytes()).hexdigest()
