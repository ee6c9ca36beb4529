import numpy as np

from pylandscape.test import TestCase
from pylandscape import (
    PAULI_X,
    ControlSystem,
    DimensionError,
    InvalidDensityError,
    TargetSpec,
    build_central_spin,
    build_random_bath,
    build_random_closed,
    channel_fidelity,
    distance,
    evaluate,
    fidelity,
    gamma,
    hermitian_basis,
    j_extended,
    kinematic_critical_points,
    kinematic_point,
    kron,
    phi_opt,
    propagate,
    random_target,
    symmetrize_controls,
    time_reversed,
    u_obj_and_omega,
)


class TestGamma(TestCase):

    def test_decoupled_evolution(self):
        sys = build_random_bath(3, seed=0)
        w, u_b = self.randomUnitary(2), self.randomUnitary(3)
        g = gamma(sys, w, kron(w, u_b))
        self.assertAllClose(g, 2 * u_b)
        self.assertAlmostEqual(fidelity(g, sys.n), 1.0, places=12)

    def test_closed_system(self):
        sys = build_random_closed(3, 1, seed=0)
        w, u = self.randomUnitary(3), self.randomUnitary(3)
        self.assertAllClose(gamma(sys, w, u), np.array([[np.trace(w.conj().T @ u)]]))

    def test_target_dimension(self):
        sys = build_random_bath(3, seed=0)
        with self.assertRaises(DimensionError) as _:
            gamma(sys, np.eye(3), np.eye(6))

    def test_fidelity_range(self):
        sys = build_central_spin(2, intervals=5, t_final=2.0)
        for _ in range(10):
            u = propagate(sys, self.rng.uniform(-2, 2, (5, 1))).total
            f = fidelity(gamma(sys, self.randomUnitary(2), u), sys.n)
            self.assertTrue(0.0 <= f <= 1.0 + 1e-12)


class TestPhiOpt(TestCase):

    def fixtureInit(self):
        self.sys = build_central_spin(1, intervals=4, t_final=2.0)
        self.w = random_target(2, seed=5)
        self.basis = hermitian_basis(2)

    def draw(self):
        c = self.rng.uniform(-1, 1, (self.sys.intervals, 1))
        return c, propagate(self.sys, c).total

    def test_parameter_vector(self):
        _, u = self.draw()
        phi_matrix, phi_vector = phi_opt(gamma(self.sys, self.w, u), self.basis)
        self.assertUnitary(phi_matrix)
        self.assertAllClose(self.basis.unitary(phi_vector), phi_matrix)

    def test_maximal(self):
        for _ in range(20):
            _, u = self.draw()
            _, phi_vector = phi_opt(gamma(self.sys, self.w, u), self.basis)
            best = j_extended(self.sys, self.w, u, phi_vector, self.basis)
            for _ in range(200):
                phi = self.rng.uniform(-np.pi, np.pi, 4)
                self.assertGreaterEqual(best, j_extended(self.sys, self.w, u, phi, self.basis) - 1e-9)

    def test_j_equals_n_sqrt_f(self):
        for _ in range(20):
            _, u = self.draw()
            g = gamma(self.sys, self.w, u)
            _, phi_vector = phi_opt(g, self.basis)
            j = j_extended(self.sys, self.w, u, phi_vector, self.basis)
            self.assertAlmostEqual(j, self.sys.n * np.sqrt(fidelity(g, self.sys.n)), places=9)

    def test_distance(self):
        _, u = self.draw()
        phi = self.rng.uniform(-1, 1, 4)
        j = j_extended(self.sys, self.w, u, phi, self.basis)
        self.assertAlmostEqual(distance(self.sys, self.w, u, phi, self.basis), 2 * self.sys.n - 2 * j, places=10)


class TestSpectrum(TestCase):

    def test_j_is_sum_of_cosines(self):
        sys = build_random_bath(2, seed=1, intervals=3)
        w = self.randomUnitary(2)
        for _ in range(10):
            u = propagate(sys, self.rng.uniform(-1, 1, (3, 1))).total
            phi = self.rng.uniform(-1, 1, 4)
            spectrum = u_obj_and_omega(sys, w, u, phi)
            self.assertUnitary(spectrum.v)
            self.assertAlmostEqual(np.sum(np.cos(spectrum.omega)), j_extended(sys, w, u, phi), places=10)

    def test_identity_is_degenerate(self):
        sys = ControlSystem(2, 2, np.zeros((4, 4)), [PAULI_X], 2, 1.0)
        spectrum = u_obj_and_omega(sys, np.eye(2), np.eye(4), np.zeros(4))
        self.assertTrue(spectrum.degenerate)
        self.assertAllClose(spectrum.omega, np.zeros(4))

    def test_wrap_around_gap(self):
        sys = ControlSystem(2, 1, np.zeros((2, 2)), [PAULI_X], 2, 1.0)
        # Phases π - 1e-10 and -π + 1e-10 are neighbours on the circle.
        u = np.diag(np.exp(1j * np.array([np.pi - 1e-10, -np.pi + 1e-10])))
        self.assertTrue(u_obj_and_omega(sys, np.eye(2), u, np.zeros(1)).degenerate)


class TestEvaluate(TestCase):

    def test_identities(self):
        for sys in (build_central_spin(1, intervals=4, t_final=2.0), build_random_bath(4, seed=2), build_random_closed(3, 2, seed=4)):
            w = random_target(sys.n_a, seed=9)
            for _ in range(10):
                ev = evaluate(sys, w, self.rng.uniform(-1, 1, (sys.intervals, sys.m)))
                with self.subTest(n=sys.n):
                    self.assertLessEqual(abs(np.sum(np.sin(ev.omega))), 1e-9)
                    self.assertAlmostEqual(ev.j_value, sys.n * np.sqrt(ev.fidelity), places=9)
                    self.assertAlmostEqual(ev.j_value, np.sum(np.cos(ev.omega)), places=9)
                    self.assertAllClose(ev.u_obj, kron(w.w, ev.phi_opt_matrix).conj().T @ ev.propagation.total)
                    self.assertEqual(ev.fingerprint, ev.propagation.fingerprint)

    def test_perfect_control(self):
        sys = ControlSystem(2, 2, np.zeros((4, 4)), [PAULI_X], 3, 1.0)
        ev = evaluate(sys, TargetSpec.identity(2), np.zeros((3, 1)))
        self.assertAlmostEqual(ev.fidelity, 1.0, places=14)
        self.assertEqual(ev.gamma_rank, 2)
        self.assertTrue(ev.kinematic().is_critical())


class TestChannelFidelity(TestCase):

    def test_decoupled(self):
        u_b = self.randomUnitary(2)
        rho = np.diag([0.25, 0.75])
        self.assertAlmostEqual(channel_fidelity(2 * u_b, rho, 2), 1.0, places=12)

    def test_invalid_density(self):
        cases = {
            "not_hermitian": np.array([[0.5, 0.5], [0.0, 0.5]]),
            "trace": np.eye(2),
            "negative": np.diag([1.5, -0.5]),
        }
        for name, rho in cases.items():
            with self.subTest(name):
                with self.assertRaises(InvalidDensityError) as _:
                    channel_fidelity(np.eye(2), rho, 2)


class TestKinematic(TestCase):

    def test_point(self):
        cases = {
            "top": (np.zeros(3), 3.0),
            "bottom": (np.full(2, np.pi), -2.0),
            "mixed": (np.array([0.0, np.pi]), 0.0),
        }
        for name, (omega, j) in cases.items():
            with self.subTest(name):
                self.assertAlmostEqual(kinematic_point(omega).j, j, places=12)

    def test_critical_points(self):
        n = 4
        points = list(kinematic_critical_points(n))
        self.assertEqual(len(points), 2 ** n)
        values = sorted({round(p.j) for p in points})
        self.assertEqual(values, [2 * p - n for p in range(n + 1)])
        for p in points:
            self.assertTrue(p.is_critical())
            at_zero = np.isclose(p.omega, 0.0)
            # Hessian diag(-I_p, I_{N-p}): -1 where ω = 0, +1 where ω = π.
            self.assertAllClose(p.hessian_diag, np.where(at_zero, -1.0, 1.0))
            self.assertAlmostEqual(p.j, 2 * np.sum(at_zero) - n, places=12)


class TestRandomBathSymmetries(TestCase):
    """σ_z ⊗ B_z drift, σ_x control and the identity target."""

    def fixtureInit(self):
        self.sys = build_random_bath(8, seed=4)
        self.w = TargetSpec.identity(2)
        self.c = self.rng.uniform(-1, 1, (4, 1))

    def f(self, c):
        return fidelity(gamma(self.sys, self.w, propagate(self.sys, c).total), self.sys.n)

    def test_sign_flip(self):
        self.assertAlmostEqual(self.f(-self.c), self.f(self.c), places=12)

    def test_time_reversal(self):
        self.assertAlmostEqual(self.f(time_reversed(self.c)), self.f(self.c), places=12)

    def test_symmetric_controls_give_symmetric_spectrum(self):
        omega = evaluate(self.sys, self.w, symmetrize_controls(self.c)).omega
        self.assertAllClose(omega, -omega[::-1], atol=1e-9)
