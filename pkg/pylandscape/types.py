from typing import NewType

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "ComplexMatrix",
    "ComplexVector",
    "RealVector",
    "RealMatrix",
    "ControlVector",
    "Placeholder",
    "placeholder",
]

ComplexMatrix = NDArray[np.complex128]
"""
A dense complex matrix indexed [row, column]. Stacks of matrices carry the
stack index first, e.g. the L step unitaries have shape (L, N, N).
Tensor products are ordered system A first, so row i*N_B + k of an operator
on A⊗B refers to basis state |i> on A and |k> on B.
"""

ComplexVector = NDArray[np.complex128]
"""
A one-dimensional complex array, e.g. vec(X) or a column of an eigenvector
matrix.
"""

RealVector = NDArray[np.float64]
"""
A one-dimensional real array, e.g. spectral frequencies or singular values.
"""

RealMatrix = NDArray[np.float64]
"""
A two-dimensional real array, e.g. a dynamic gradient matrix.
"""

ControlVector = NDArray[np.float64]
"""
Piecewise-constant control amplitudes c of shape (L, M): row l holds the M
amplitudes applied during interval l. Flattened (C order) it is the vector
c in R^{LM} ordered interval-major, then control index.
"""

Placeholder = NewType("Placeholder", object)
"""
A placeholder marks the lack of a value, just like None.
It is used for lazily populated fields Union[T, Placeholder] that either
hold a computed value of type T or the placeholder value that represents
the lack of a value.
"""

placeholder: Placeholder = Placeholder(object())
"""
The only value of Placeholder.
"""
