import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmpadmm.linalg import (
    BlockDiagOperator,
    PsdOperator,
    block_diag,
    dual_seminorm_general,
    identity,
    operator_leq,
    seminorm,
    zero_operator,
)


def random_psd(rng, dim, rank=None):
    rank = dim if rank is None else rank
    G = rng.normal(size=(dim, rank))
    return PsdOperator(G @ G.T)


def rng_and_dim(seed):
    rng = np.random.default_rng(seed)
    return rng, int(rng.integers(1, 9))


class TestPsdOperator:
    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError, match="square"):
            PsdOperator(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            PsdOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="not PSD"):
            PsdOperator(np.diag([1.0, -1.0]))

    def test_definite_flag_rejects_singular(self):
        with pytest.raises(ValueError, match="definite"):
            PsdOperator(np.diag([1.0, 0.0]), definite=True)

    def test_seminorm_identity(self):
        M = identity(3, 2.0)
        z = np.array([1.0, 2.0, 2.0])
        assert seminorm(M, z) == pytest.approx(np.sqrt(2.0) * 3.0)

    def test_zero_operator_seminorm(self):
        M = zero_operator(4)
        assert M.seminorm(np.ones(4)) == 0.0

    def test_inverse(self):
        rng = np.random.default_rng(0)
        M = random_psd(rng, 5)
        inv = M.inverse()
        np.testing.assert_allclose(inv.matrix @ M.matrix, np.eye(5), atol=1e-10)

    def test_inverse_rejects_singular(self):
        with pytest.raises(ValueError, match="ill-conditioned"):
            PsdOperator(np.diag([1.0, 0.0])).inverse()

    def test_dual_seminorm_off_range_is_inf(self):
        M = PsdOperator(np.diag([1.0, 0.0]))
        assert dual_seminorm_general(M, np.array([0.0, 1.0])) == np.inf
        assert dual_seminorm_general(M, np.array([1.0, 0.0])) == 1.0

    def test_dual_seminorm_zero_vector(self):
        M = PsdOperator(np.diag([1.0, 0.0]))
        assert dual_seminorm_general(M, np.zeros(2)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            identity(3).seminorm(np.ones(4))


class TestDualNormIdentity:
    """||Mw||*_M == ||w||_M on range(M), full-rank and rank-deficient."""

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.booleans())
    def test_identity(self, seed, deficient):
        rng, dim = rng_and_dim(seed)
        rank = max(1, dim // 2) if deficient else dim
        M = random_psd(rng, dim, rank)
        w = rng.normal(size=dim)
        lhs = M.dual_seminorm_general(M.apply(w))
        rhs = M.seminorm(w)
        assert abs(lhs - rhs) <= 1e-9 * (1.0 + rhs)

    def test_preimage_path_matches(self):
        rng = np.random.default_rng(3)
        M = random_psd(rng, 6, 3)
        w = rng.normal(size=6)
        assert M.dual_seminorm_of_image(w) == pytest.approx(M.seminorm(w))


class TestSeminormProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_cauchy_young(self, seed):
        rng, dim = rng_and_dim(seed)
        M = random_psd(rng, dim)
        z, w = rng.normal(size=dim), rng.normal(size=dim)
        scale = max(1.0, M.seminorm(z) * M.seminorm(w))
        assert abs(float(z @ M.apply(w))) <= M.seminorm(z) * M.seminorm(w) + 1e-10 * scale

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_triangle_square(self, seed):
        rng, dim = rng_and_dim(seed)
        M = random_psd(rng, dim, max(1, dim - 1))
        z, w = rng.normal(size=dim), rng.normal(size=dim)
        lhs = M.seminorm(z + w) ** 2
        rhs = 2.0 * M.seminorm(z) ** 2 + 2.0 * M.seminorm(w) ** 2
        assert lhs <= rhs * (1.0 + 1e-10) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.floats(-10.0, 10.0))
    def test_scaling(self, seed, alpha):
        rng, dim = rng_and_dim(seed)
        M = random_psd(rng, dim)
        z = rng.normal(size=dim)
        assert M.seminorm(alpha * z) == pytest.approx(abs(alpha) * M.seminorm(z), abs=1e-12)


class TestBlockDiag:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_block_decomposition(self, seed):
        rng = np.random.default_rng(seed)
        dims = [int(rng.integers(1, 5)) for _ in range(3)]
        blocks = [random_psd(rng, d) for d in dims]
        M = block_diag(blocks)
        z = rng.normal(size=sum(dims))
        parts = M.split(z)
        total = sum(b.seminorm(p) ** 2 for b, p in zip(blocks, parts))
        assert abs(M.seminorm(z) ** 2 - total) <= 1e-12 * (1.0 + total)

    def test_matrix_assembly(self):
        M = block_diag([identity(1, 2.0), identity(2, 3.0)])
        np.testing.assert_array_equal(M.matrix, np.diag([2.0, 3.0, 3.0]))

    def test_dual_seminorm_blockwise_inf(self):
        M = block_diag([identity(1, 1.0), zero_operator(1)])
        assert M.dual_seminorm_general(np.array([1.0, 1.0])) == np.inf
        assert M.dual_seminorm_general(np.array([2.0, 0.0])) == 2.0

    def test_apply_concatenates(self):
        M = block_diag([identity(2, 2.0), identity(1, 3.0)])
        np.testing.assert_allclose(M.apply(np.ones(3)), [2.0, 2.0, 3.0])

    def test_empty_blocks_rejected(self):
        with pytest.raises(ValueError):
            BlockDiagOperator(())


class TestOperatorOrder:
    def test_reflexive_and_scaled(self):
        rng = np.random.default_rng(1)
        M = random_psd(rng, 4)
        two = PsdOperator(2.0 * M.matrix)
        assert operator_leq(M, M)
        assert operator_leq(M, two)
        assert not operator_leq(two, M)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dims differ"):
            operator_leq(identity(2), identity(3))
