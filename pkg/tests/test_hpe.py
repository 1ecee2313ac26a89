import numpy as np
import pytest

from vmpadmm.hpe import (
    HpeIterate,
    HpeState,
    RateBounds,
    check_error_condition,
    transportation_check,
)
from vmpadmm.linalg import PsdOperator, identity


def affine_map(rng, dim):
    """Strongly monotone affine map T(z) = G z - c with its zero z*."""
    L = rng.normal(size=(dim, dim))
    G = L @ L.T + np.eye(dim)
    c = rng.normal(size=dim)
    return G, c, np.linalg.solve(G, c)


def exact_prox_run(G, c, M, z0, steps, sigma=0.0):
    """Exact proximal-point iterations: M(z_{k-1} - z_k) = T(z_k), z~ = z."""
    state = HpeState(z0, sigma, eta0=0.0, M0=M)
    z = z0.copy()
    for k in range(1, steps + 1):
        z_new = np.linalg.solve(M.matrix + G, M.matrix @ z + c)
        pre = z - z_new
        it = HpeIterate(k=k, z=z_new, z_tilde=z_new, r=M.apply(pre), preimage=pre, eta=0.0, M=M)
        check = state.add_iterate(it)
        assert check.ok
        z = z_new
    return state


class TestErrorCondition:
    def test_exact_resolvent_passes_with_zero_sigma(self):
        rng = np.random.default_rng(0)
        G, c, _ = affine_map(rng, 4)
        M = identity(4, 2.0)
        exact_prox_run(G, c, M, rng.normal(size=4), steps=20, sigma=0.0)

    def test_perturbed_step_fails(self):
        M = identity(2, 1.0)
        z_prev = np.array([1.0, 1.0])
        z = np.array([0.5, 0.5])
        z_tilde = z + np.array([10.0, 0.0])  # far from both endpoints
        it = HpeIterate(1, z, z_tilde, M.apply(z_prev - z), z_prev - z, eta=0.0, M=M)
        assert not check_error_condition(it, sigma=0.5, prev_eta=0.0).ok

    def test_eta_carries_between_iterations(self):
        # lhs uses eta_k, rhs uses eta_{k-1}: a large eta_0 can rescue step 1
        M = identity(1, 1.0)
        it = HpeIterate(
            1, np.array([0.0]), np.array([0.6]), np.array([1.0]), np.array([1.0]), eta=0.0, M=M
        )
        assert not check_error_condition(it, sigma=0.1, prev_eta=0.0).ok
        assert check_error_condition(it, sigma=0.1, prev_eta=10.0).ok

    def test_slack_tolerance_band(self):
        check = check_error_condition(
            HpeIterate(
                1, np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), eta=1e-9, M=identity(1)
            ),
            sigma=0.5,
            prev_eta=0.0,
            tol=1e-8,
        )
        assert check.slack < 0.0 and check.ok  # inside the roundoff band


class TestStateValidation:
    def setup_method(self):
        self.M = identity(2, 1.0)
        self.state = HpeState(np.zeros(2), sigma=0.5, eta0=0.0, M0=self.M)

    def _iterate(self, k, eta=0.0, r=None):
        pre = np.ones(2)
        return HpeIterate(
            k, -pre * k, -pre * k + pre, self.M.apply(pre) if r is None else r, pre, eta, self.M
        )

    def test_noncontiguous_index_rejected(self):
        with pytest.raises(ValueError, match="contiguous"):
            self.state.add_iterate(self._iterate(2))

    def test_negative_eta_rejected(self):
        with pytest.raises(ValueError, match="eta"):
            self.state.add_iterate(self._iterate(1, eta=-1e-3))

    def test_mismatched_residual_rejected(self):
        with pytest.raises(ValueError, match="does not equal"):
            self.state.add_iterate(self._iterate(1, r=np.array([5.0, 5.0])))

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            HpeState(np.zeros(2), sigma=1.0, eta0=0.0)


class TestProximalPointReduction:
    def test_distances_nonincreasing_and_certificates_hold(self):
        rng = np.random.default_rng(7)
        G, c, z_star = affine_map(rng, 5)
        M = identity(5, 3.0)
        z0 = z_star + rng.normal(size=5)
        state = exact_prox_run(G, c, M, z0, steps=60)
        d0 = M.seminorm(z0 - z_star)
        state.set_bounds(RateBounds(d0=d0, sigma=0.0, C_S=0.0, C_P=1.0))
        dists = [M.seminorm(it.z - z_star) for it in state.history]
        assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))
        for k in (1, 10, 60):
            _, best, bound = state.pointwise_certificate(k)
            assert best <= bound
            _, _, eps_a, dual, checks = state.ergodic_certificate(k)
            assert all(ch.ok for ch in checks.values())
            assert dual <= checks["ergodic_res"].rhs
            assert state.fejer_check(z_star, k).ok

    def test_pointwise_best_index_is_argmin(self):
        rng = np.random.default_rng(9)
        G, c, _ = affine_map(rng, 3)
        M = identity(3, 1.0)
        state = exact_prox_run(G, c, M, rng.normal(size=3), steps=15)
        state.set_bounds(RateBounds(d0=10.0, sigma=0.0, C_S=0.0, C_P=1.0))
        duals = [it.M.seminorm(it.preimage) for it in state.history]
        best_i, best, _ = state.pointwise_certificate(15)
        assert best_i == int(np.argmin(duals)) + 1
        assert best == pytest.approx(min(duals))


class TestErgodicAccumulators:
    def test_accumulator_matches_direct_eps(self):
        rng = np.random.default_rng(11)
        G, c, _ = affine_map(rng, 4)
        state = exact_prox_run(G, c, identity(4, 1.0), rng.normal(size=4), steps=25)
        for k in (1, 5, 25):
            _, _, eps_a = state.ergodic_point(k)
            assert eps_a == pytest.approx(state.eps_direct(k), abs=1e-12)

    def test_eps_nonnegative_for_monotone_map(self):
        rng = np.random.default_rng(13)
        G, c, _ = affine_map(rng, 4)
        state = exact_prox_run(G, c, identity(4, 1.0), rng.normal(size=4), steps=30)
        _, _, eps_a = state.ergodic_point()
        assert eps_a >= -1e-12


class TestRateBounds:
    def test_constant_formulas(self):
        b = RateBounds(d0=2.0, sigma=0.5, C_S=0.0, C_P=1.0)
        # E = (1+1)(1 + 0) + 0 = 2; E_hat = 2*1*1*(0.5/0.5 + 4) = 10
        assert b.E == pytest.approx(2.0)
        assert b.E_hat == pytest.approx(10.0)
        assert b.pointwise_rhs(4) == pytest.approx(np.sqrt(2 * 1.5 * 4.0 / (0.5 * 4)))
        assert b.ergodic_res_rhs(2) == pytest.approx(2.0 * 2.0 / 2.0)
        assert b.ergodic_eps_rhs(5) == pytest.approx(10.0 * 4.0 / 5.0)

    def test_drift_inflates_constants(self):
        flat = RateBounds(d0=1.0, sigma=0.3, C_S=0.0, C_P=1.0)
        drifted = RateBounds(d0=1.0, sigma=0.3, C_S=0.5, C_P=1.5)
        assert drifted.E > flat.E
        assert drifted.E_hat > flat.E_hat


class TestTransportation:
    def test_graph_pairs_accept_valid_certificate(self):
        rng = np.random.default_rng(17)
        G, c, _ = affine_map(rng, 3)
        state = exact_prox_run(G, c, identity(3, 1.0), rng.normal(size=3), steps=40)
        zt_a, r_a, eps_a = state.ergodic_point()

        def oracle(r):
            z = r.normal(size=3)
            return z, G @ z - c

        report = transportation_check(oracle, zt_a, r_a, eps_a, sample_count=500,
                                      rng=np.random.default_rng(0))
        assert report.ok

    def test_bogus_certificate_rejected(self):
        rng = np.random.default_rng(19)
        G, c, _ = affine_map(rng, 3)

        def oracle(r):
            z = r.normal(size=3)
            return z, G @ z - c

        report = transportation_check(
            oracle, np.zeros(3), np.full(3, 50.0), 0.0, sample_count=500,
            rng=np.random.default_rng(0),
        )
        assert not report.ok
        assert report.worst_margin < 0.0
