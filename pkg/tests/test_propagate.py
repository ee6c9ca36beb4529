import numpy as np
import scipy.linalg

from pylandscape.test import TestCase
from pylandscape import (
    PAULI_X,
    PAULI_Z,
    ControlSystem,
    DimensionError,
    build_central_spin,
    propagate,
    step_hamiltonians,
    zero_controls,
)


class TestPropagate(TestCase):

    def fixtureInit(self):
        self.sys = build_central_spin(3)
        self.c = self.rng.uniform(-1, 1, (self.sys.intervals, self.sys.m))

    def test_unitary_total(self):
        prop = propagate(self.sys, self.c)
        self.assertEqual(prop.steps.shape, (100, 16, 16))
        self.assertUnitary(prop.total)

    def test_zero_dynamics(self):
        sys = ControlSystem(2, 2, np.zeros((4, 4)), [PAULI_X], 5, 1.0)
        self.assertAllClose(propagate(sys, zero_controls(sys)).total, np.eye(4))

    def test_order(self):
        sys = ControlSystem(2, 1, PAULI_Z, [PAULI_X], 2, 1.0)
        c = np.array([[0.3], [-1.2]])
        h1, h2 = PAULI_Z + 0.3 * PAULI_X, PAULI_Z - 1.2 * PAULI_X
        expected = scipy.linalg.expm(-0.5j * h1) @ scipy.linalg.expm(-0.5j * h2)
        self.assertAllClose(propagate(sys, c).total, expected, atol=1e-12)

    def test_half_horizons_compose(self):
        half = self.sys.with_horizon(self.sys.intervals // 2, self.sys.t_final / 2)
        first = propagate(half, self.c[:half.intervals]).total
        second = propagate(half, self.c[half.intervals:]).total
        self.assertAllClose(propagate(self.sys, self.c).total, first @ second, atol=1e-10)

    def test_flat_controls(self):
        a = propagate(self.sys, self.c)
        b = propagate(self.sys, self.c.reshape(-1))
        self.assertEqual(a.fingerprint, b.fingerprint)
        self.assertAllClose(a.total, b.total, atol=0.0)

    def test_step_hamiltonians(self):
        h = step_hamiltonians(self.sys, self.c)
        self.assertEqual(h.shape, (100, 16, 16))
        self.assertAllClose(h[7], self.sys.h0 + self.c[7, 0] * self.sys.embedded_controls[0])
        self.assertHermitian(h[7])

    def test_wrong_controls(self):
        with self.assertRaises(DimensionError) as _:
            propagate(self.sys, np.zeros(99))

    def test_suffix(self):
        prop = propagate(self.sys, self.c)
        self.assertFalse(prop.has_suffix())
        v = self.randomUnitary(16)
        filled = prop.with_suffix(v)
        self.assertTrue(filled.has_suffix())
        self.assertAllClose(filled.suffix[-1], v)
        self.assertAllClose(filled.suffix[-2], prop.steps[-1] @ v)
        # U_1 V_1 = U_1 U_2 ... U_L V = U V
        self.assertAllClose(prop.steps[0] @ filled.suffix[0], prop.total @ v, atol=1e-10)
        for v_l in filled.suffix:
            self.assertUnitary(v_l)
