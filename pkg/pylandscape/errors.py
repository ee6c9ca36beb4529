from typing import Optional

__all__ = [
    "LandscapeError",
    "NotHermitianError",
    "NotUnitaryError",
    "DimensionError",
    "InvalidDensityError",
    "StaleInputError",
    "NumericalError",
    "ConfigError",
    "GradientFallbackWarning",
]


class LandscapeError(RuntimeError):
    """
    LandscapeError is used to communicate errors related to PyLandscape
    computations.
    """
    pass


class NotHermitianError(LandscapeError):
    """
    NotHermitianError is raised when a matrix required to be Hermitian is not.

    Attributes:
        deviation (float): The largest entry of |X - X^†|.
    """

    deviation: float

    def __init__(self, deviation: float, what: str = "matrix"):
        super(LandscapeError, self).__init__(f"{what} is not Hermitian (max |X - X^†| = {deviation:.3g})")
        self.deviation = deviation


class NotUnitaryError(LandscapeError):
    """
    NotUnitaryError is raised when a matrix required to be unitary is not.

    Attributes:
        deviation (float): The largest entry of |X^†X - I|.
    """

    deviation: float

    def __init__(self, deviation: float, what: str = "matrix"):
        super(LandscapeError, self).__init__(f"{what} is not unitary (max |X^†X - I| = {deviation:.3g})")
        self.deviation = deviation


class DimensionError(LandscapeError):
    """
    DimensionError is raised when an operand does not have the shape or
    length its context requires.

    Attributes:
        what (str):     Name of the offending operand.
        expected (Any): The required shape or length.
        actual (Any):   The shape or length that was supplied.
    """

    def __init__(self, what: str, expected, actual):
        super(LandscapeError, self).__init__(f"{what} has dimension {actual}; expected {expected}")
        self.what = what
        self.expected = expected
        self.actual = actual


class InvalidDensityError(LandscapeError):
    """
    InvalidDensityError is raised when a matrix is not a valid density
    matrix, i.e. not Hermitian, not positive semidefinite or not of unit trace.

    Attributes:
        reason (str): Which density matrix property was violated.
    """

    reason: str

    def __init__(self, reason: str):
        super(LandscapeError, self).__init__(f"invalid density matrix: {reason}")
        self.reason = reason


class StaleInputError(LandscapeError):
    """
    StaleInputError is raised when quantities computed for different control
    vectors are combined, e.g. a propagation for c with eigenvectors for c'.

    Attributes:
        expected (str): Fingerprint of the controls the operation was given.
        actual (str):   Fingerprint carried by the mismatching input.
    """

    def __init__(self, expected: str, actual: str):
        super(LandscapeError, self).__init__(
            f"inputs computed for different controls (fingerprint {actual[:12]} != {expected[:12]})")
        self.expected = expected
        self.actual = actual


class NumericalError(LandscapeError):
    """
    NumericalError is raised when a computed quantity violates a numerical
    guarantee, e.g. a provably real quantity with a large imaginary part or
    a non-finite fidelity.

    Attributes:
        quantity (str): Name of the offending quantity.
        value (float):  The offending value (residue or non-finite number).
    """

    def __init__(self, quantity: str, value: float):
        super(LandscapeError, self).__init__(f"numerical failure in {quantity} (value {value!r})")
        self.quantity = quantity
        self.value = value


class ConfigError(LandscapeError):
    """
    ConfigError is raised when an experiment configuration cannot be read,
    parsed or validated.

    Attributes:
        path (str):           The configuration file.
        line (Optional[int]): 1-based line of the offending entry, if known.
        message (str):        What is wrong.
    """

    path: str
    line: Optional[int]
    message: str

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        where = f"{path}:{line}" if line is not None else path
        super(LandscapeError, self).__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.message = message


class GradientFallbackWarning(RuntimeWarning):
    """
    Issued when the analytic landscape gradient is replaced by a
    finite-difference estimate because F(c) is too close to zero.
    """
    pass
