import numpy as np
import scipy.integrate
import scipy.linalg

from pylandscape.test import TestCase
from pylandscape import (
    PAULI_X,
    PAULI_Z,
    ControlSystem,
    GradientFallbackWarning,
    StaleInputError,
    TargetSpec,
    build_central_spin,
    build_random_bath,
    build_random_closed,
    bundle,
    central_difference,
    evaluate,
    finite_diff_f,
    finite_diff_hessian,
    finite_diff_j,
    g_c,
    grad_f,
    hermitian_basis,
    kron,
    landscape_gradient,
    p_integral,
    phi_rank_bound,
    propagate,
    q_integral,
    random_target,
    vec,
)
from pylandscape.cli import relative_error


def small_systems():
    return [
        build_central_spin(1, intervals=4, t_final=2.0),
        build_random_bath(2, seed=3, intervals=3, t_final=1.0),
        build_random_closed(3, 2, seed=6, intervals=3, t_final=1.0),
    ]


class TestIntegrals(TestCase):

    def test_q_integral_zero_step(self):
        self.assertAllClose(q_integral(np.zeros((4, 4)), PAULI_X, 0.3), 0.3 * kron(PAULI_X, np.eye(2)))

    def test_q_integral_hermitian(self):
        self.assertHermitian(q_integral(self.randomHermitian(6), PAULI_Z, 0.2))

    def test_q_integral_embedded(self):
        h = self.randomHermitian(4)
        self.assertAllClose(q_integral(h, PAULI_X, 0.2), q_integral(h, kron(PAULI_X, np.eye(2)), 0.2))

    def test_p_integral_at_zero(self):
        basis = hermitian_basis(3)
        self.assertAllClose(p_integral(basis, np.zeros(9)), basis.elements)


class TestDynamicGradients(TestCase):

    def test_matches_finite_differences(self):
        for sys in small_systems():
            w = random_target(sys.n_a, seed=2)
            draws = 0
            for _ in range(17):
                c = self.rng.uniform(-1, 1, (sys.intervals, sys.m))
                phi = self.rng.uniform(-1, 1, sys.n_b ** 2)
                grads = bundle(sys, w, c, phi)
                if grads.degenerate:
                    continue
                draws += 1
                numeric = finite_diff_j(sys, w, c, phi, 1e-5)
                with self.subTest(n=sys.n):
                    self.assertLessEqual(relative_error(grads.grad_j, numeric), 1e-6)
            self.assertGreater(draws, 10)

    def test_grad_f_matches_finite_differences(self):
        for sys in small_systems():
            w = random_target(sys.n_a, seed=4)
            for _ in range(5):
                c = self.rng.uniform(-1, 1, (sys.intervals, sys.m))
                with self.subTest(n=sys.n):
                    self.assertLessEqual(relative_error(grad_f(sys, w, c), finite_diff_f(sys, w, c)), 1e-6)

    def test_stacked_gradient_at_phi_opt(self):
        for sys in small_systems():
            w = random_target(sys.n_a, seed=8)
            for _ in range(5):
                c = self.rng.uniform(-1, 1, (sys.intervals, sys.m))
                grads = bundle(sys, w, c)
                self.assertTrue(grads.at_phi_opt)
                scale = sys.n / (2 * np.sqrt(grads.fidelity))
                self.assertAllClose(grads.grad_j, np.concatenate([scale * grads.grad_f_c, np.zeros(sys.n_b ** 2)]), atol=1e-7)

    def test_away_from_phi_opt(self):
        sys = small_systems()[0]
        grads = bundle(sys, random_target(2, seed=1), np.zeros((4, 1)), np.full(4, 0.1))
        self.assertFalse(grads.at_phi_opt)
        self.assertIsNone(grads.grad_f_c)

    def test_shapes(self):
        sys = small_systems()[1]
        grads = bundle(sys, np.eye(2), self.rng.uniform(-1, 1, (3, 1)))
        self.assertEqual(grads.g_c.shape, (3, 4))
        self.assertEqual(grads.g_phi.shape, (4, 4))
        self.assertEqual(grads.g_stack.shape, (7, 4))
        self.assertAllClose(grads.kinematic, -np.sin(grads.omega))

    def test_richardson(self):
        sys = small_systems()[0]
        w = random_target(2, seed=3)
        c = self.rng.uniform(-1, 1, (4, 1))
        phi = self.rng.uniform(-1, 1, 4)
        exact = bundle(sys, w, c, phi).grad_j
        coarse = np.linalg.norm(finite_diff_j(sys, w, c, phi, 1e-2) - exact)
        fine = np.linalg.norm(finite_diff_j(sys, w, c, phi, 5e-3) - exact)
        self.assertTrue(3.5 < coarse / fine < 4.5, f"error ratio {coarse / fine:.3f}")

    def test_suffix_columns_normalized(self):
        sys = small_systems()[0]
        ev = evaluate(sys, random_target(2, seed=0), self.rng.uniform(-1, 1, (4, 1)))
        suffix = ev.propagation.with_suffix(ev.v).suffix
        norms = np.einsum("lin,lin->ln", suffix.conj(), suffix).real
        self.assertLessEqual(float(np.sum(np.abs(norms - 1))), 1e-10)

    def test_stale_evaluation(self):
        sys = small_systems()[0]
        w = random_target(2, seed=0)
        ev = evaluate(sys, w, np.zeros((4, 1)))
        with self.assertRaises(StaleInputError) as _:
            bundle(sys, w, np.ones((4, 1)), evaluation=ev)

    def test_stale_fingerprint(self):
        sys = small_systems()[0]
        ev = evaluate(sys, np.eye(2), np.zeros((4, 1)))
        prop = propagate(sys, np.ones((4, 1)))
        with self.assertRaises(StaleInputError) as _:
            g_c(sys, prop, ev.v, ev.fingerprint)

    def test_fallback_at_zero_fidelity(self):
        # Tr(σ_x e^{-iθσ_z}) = 0 for every θ, so F vanishes identically.
        sys = ControlSystem(2, 1, np.zeros((2, 2)), [PAULI_Z], 3, 1.0)
        with self.assertWarns(GradientFallbackWarning) as _:
            g = grad_f(sys, TargetSpec.from_matrix(PAULI_X), np.zeros((3, 1)))
        self.assertAllClose(g, np.zeros(3))

    def test_landscape_gradient_flag(self):
        sys = small_systems()[0]
        w = random_target(2, seed=4)
        c = self.rng.uniform(-1, 1, (4, 1))
        g, fallback = landscape_gradient(sys, w, c)
        self.assertFalse(fallback)
        self.assertAllClose(g, grad_f(sys, w, c), atol=0.0)

        closed = ControlSystem(2, 1, np.zeros((2, 2)), [PAULI_Z], 3, 1.0)
        with self.assertWarns(GradientFallbackWarning) as _:
            _, fallback = landscape_gradient(closed, TargetSpec.from_matrix(PAULI_X), np.zeros((3, 1)))
        self.assertTrue(fallback)

    def test_random_bath_stationary_at_zero(self):
        # F(c) = F(-c) for the identity target, so c = 0 is stationary.
        sys = build_random_bath(8, seed=0)
        g = grad_f(sys, TargetSpec.identity(2), np.zeros((4, 1)))
        self.assertLessEqual(np.linalg.norm(g), 1e-12)

    def test_phi_rank_bound(self):
        sys = small_systems()[1]
        ev = evaluate(sys, np.eye(2), self.rng.uniform(-1, 1, (3, 1)))
        bound, rank = phi_rank_bound(ev.v, hermitian_basis(2), 2)
        self.assertEqual(bound.shape, (4, 4))
        self.assertAllClose(bound, bound.T)
        self.assertTrue(1 <= rank <= 4)


class TestStackedForms(TestCase):
    """
    Cross-checks the element formulas for G_c and G_φ against the stacked
    vec/Kronecker forms

        G_c = -(I_L ⊗ H) C V_A,    G_φ = -P V_B,

    with the integrals C_l and K evaluated by adaptive quadrature.
    """

    def integral(self, z, t_max):
        # ∫_0^t_max e^{iτZ} dτ for a Hermitian generator Z
        result, _ = scipy.integrate.quad_vec(lambda t: scipy.linalg.expm(1j * t * z), 0.0, t_max,
                                             epsabs=1e-13, epsrel=1e-12)
        return result

    def test_equivalence(self):
        sys = build_central_spin(1, intervals=3, t_final=1.5)
        w = random_target(2, seed=12)
        basis = hermitian_basis(sys.n_b)
        n, n_b = sys.n, sys.n_b
        c = self.rng.uniform(-1, 1, (sys.intervals, sys.m))
        phi = self.rng.uniform(-0.5, 0.5, n_b ** 2)
        grads = bundle(sys, w, c, phi)

        prop = propagate(sys, c).with_suffix(grads.v)
        eye = np.eye(n)
        h_rows = np.array([vec(x).conj() for x in sys.embedded_controls])

        rows = []
        v_a_blocks = []
        for h_l, v_l in zip(prop.hamiltonians, prop.suffix):
            # C_l = ∫_0^δ e^{iτH^T} ⊗ e^{-iτH} dτ
            c_l = self.integral(kron(h_l.T, eye) - kron(eye, h_l), sys.delta)
            v_a = np.array([kron(v_l[:, k].conj(), v_l[:, k]) for k in range(n)]).T
            v_a_blocks.append(v_a)
            rows.append(-(h_rows @ c_l @ v_a))
        self.assertAllClose(grads.g_c, np.vstack(rows).real, atol=1e-9)

        v_a_all = np.vstack(v_a_blocks)
        self.assertAllClose(v_a_all.conj().T @ v_a_all, sys.intervals * eye, atol=1e-10)

        b = basis.generator(phi)
        eye_b = np.eye(n_b)
        # K = ∫_0^1 e^{iτB^T} ⊗ e^{-iτB} dτ maps vec B_b to vec P_b.
        k = self.integral(kron(b.T, eye_b) - kron(eye_b, b), 1.0)
        p = [(k @ vec(e)).reshape(n_b, n_b, order="F") for e in basis.elements]
        self.assertAllClose(np.array(p), p_integral(basis, phi), atol=1e-10)

        p_rows = np.array([vec(kron(np.eye(sys.n_a), p_b)).conj() for p_b in p])
        v_b = np.array([kron(grads.v[:, k].conj(), grads.v[:, k]) for k in range(n)]).T
        self.assertAllClose(grads.g_phi, -(p_rows @ v_b).real, atol=1e-9)


class TestCentralDifference(TestCase):

    def test_quadratic(self):
        a = self.rng.standard_normal((4, 4))
        a = a + a.T
        b = self.rng.standard_normal(4)
        x = self.rng.standard_normal(4)
        g = central_difference(lambda y: 0.5 * y @ a @ y + b @ y, x, 1e-3)
        self.assertAllClose(g, a @ x + b, atol=1e-8)

    def test_invalid_step(self):
        cases = {"zero": 0.0, "negative": -1e-5}
        for name, step in cases.items():
            with self.subTest(name):
                with self.assertRaises(ValueError) as _:
                    central_difference(np.sum, np.zeros(2), step)

    def test_finite_diff_shapes(self):
        sys = small_systems()[2]
        w = random_target(3, seed=1)
        c = np.zeros((3, 2))
        self.assertEqual(finite_diff_j(sys, w, c, np.zeros(1)).shape, (7,))
        self.assertEqual(finite_diff_f(sys, w, c).shape, (6,))


class TestFiniteDiffHessian(TestCase):

    def fixtureInit(self):
        a = self.rng.standard_normal((5, 5))
        self.a = a + a.T
        self.b = self.rng.standard_normal(5)
        self.x = self.rng.standard_normal(5)

    def grad(self, y):
        return self.a @ y + self.b

    def test_quadratic(self):
        self.assertAllClose(finite_diff_hessian(self.grad, self.x, 1e-3), self.a, atol=1e-9)

    def test_restricted(self):
        d, _ = np.linalg.qr(self.rng.standard_normal((5, 2)))
        h = finite_diff_hessian(self.grad, self.x, 1e-3, directions=d)
        self.assertEqual(h.shape, (2, 2))
        self.assertAllClose(h, d.T @ self.a @ d, atol=1e-9)

    def test_symmetric(self):
        h = finite_diff_hessian(lambda y: np.array([y[0] * y[1], 0.5 * y[0] ** 2]), np.array([0.3, -0.7]), 1e-4)
        self.assertAllClose(h, h.T, atol=0.0)

    def test_invalid_step(self):
        with self.assertRaises(ValueError) as _:
            finite_diff_hessian(self.grad, self.x, 0.0)

    def test_landscape_curvature_at_stationary_point(self):
        # F = cos²(δ Σc) / 2 for W = (I + iσ_x)/√2, so the Hessian is -δ² 11ᵀ at c = 0.
        sys = ControlSystem(2, 1, np.zeros((2, 2)), [PAULI_Z], 3, 1.0)
        w = TargetSpec.from_matrix((np.eye(2) + 1j * PAULI_X) / np.sqrt(2))
        h = finite_diff_hessian(lambda c: grad_f(sys, w, c), np.zeros(3), 1e-5)
        self.assertAllClose(h, -np.full((3, 3), 1.0 / 9.0), atol=1e-7)
