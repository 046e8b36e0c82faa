import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmkit.errors import DimensionError, SvdConvergenceError
from ssmkit.linalg import pinv, svd

from oracles import lstsq_normal_equations


def mp_condition_errors(a, a_pinv):
    """Max entrywise residual of each of the four Moore-Penrose conditions."""
    return (
        np.abs(a @ a_pinv @ a - a).max(),
        np.abs(a_pinv @ a @ a_pinv - a_pinv).max(),
        np.abs((a @ a_pinv).T - a @ a_pinv).max(),
        np.abs((a_pinv @ a).T - a_pinv @ a).max(),
    )


class TestSvd:
    def test_identity(self):
        u, s, v = svd(np.eye(3))
        assert np.allclose(s, [1.0, 1.0, 1.0])

    def test_diagonal(self):
        _, s, _ = svd(np.diag([3.0, 2.0, 0.0]))
        assert np.allclose(s, [3.0, 2.0, 0.0], atol=1e-14)

    def test_reconstruction_random(self):
        a = np.random.default_rng(3).standard_normal((20, 8))
        u, s, v = svd(a)
        err = np.linalg.norm(u @ np.diag(s) @ v.T - a) / np.linalg.norm(a)
        assert err < 1e-12

    def test_factor_properties(self):
        a = np.random.default_rng(4).standard_normal((7, 12))
        u, s, v = svd(a)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
        assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)
        assert np.allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-12)

    def test_rejects_non_matrix(self):
        with pytest.raises(DimensionError):
            svd(np.zeros(3))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_non_convergence_reports_dimensions(self, monkeypatch):
        def boom(*args, **kwargs):
            raise np.linalg.LinAlgError("SVD did not converge")

        monkeypatch.setattr(np.linalg, "svd", boom)
        with pytest.raises(SvdConvergenceError, match="5x4"):
            svd(np.ones((5, 4)))


class TestPinv:
    def test_identity(self):
        assert np.allclose(pinv(np.eye(4)), np.eye(4), atol=1e-14)

    def test_diagonal_with_zero(self):
        # closed form: invert the nonzero singular value, keep the zero
        expected = np.array([[0.5, 0.0], [0.0, 0.0]])
        assert np.allclose(pinv(np.diag([2.0, 0.0])), expected, atol=1e-15)

    def test_moore_penrose_conditions_full_rank(self):
        a = np.random.default_rng(5).standard_normal((12, 5))
        errors = mp_condition_errors(a, pinv(a))
        assert max(errors) <= 1e-9

    def test_double_pinv_roundtrip(self):
        a = np.random.default_rng(6).standard_normal((9, 4))
        back = pinv(pinv(a))
        assert np.abs(back - a).max() / np.abs(a).max() < 1e-8

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((30, 6))
        b = rng.standard_normal(30)
        x = pinv(a) @ b
        x_ref = lstsq_normal_equations(a, b)
        assert np.linalg.norm(x - x_ref) <= 1e-8 * np.linalg.norm(x_ref)

    def test_rcond_truncates_small_singular_values(self):
        rng = np.random.default_rng(8)
        q1, _ = np.linalg.qr(rng.standard_normal((6, 2)))
        q2, _ = np.linalg.qr(rng.standard_normal((4, 2)))
        a = q1 @ np.diag([1.0, 1e-12]) @ q2[:, :2].T
        # default cutoff 1e-10 drops the 1e-12 direction entirely
        assert np.linalg.norm(pinv(a), 2) < 10.0
        # a looser build keeps it and the inverse blows up accordingly
        assert np.linalg.norm(pinv(a, rcond=1e-15), 2) > 1e10

    def test_rcond_domain(self):
        for bad in (0.0, 1.0, -1e-3, 2.0):
            with pytest.raises(ValueError):
                pinv(np.eye(2), rcond=bad)

    def test_zero_matrix(self):
        assert np.array_equal(pinv(np.zeros((3, 2))), np.zeros((2, 3)))

    @settings(max_examples=40, deadline=None)
    @given(
        rows=st.integers(1, 8),
        cols=st.integers(1, 8),
        rank=st.integers(1, 8),
        seed=st.integers(0, 10_000),
    )
    def test_conditions_hold_for_random_rank(self, rows, cols, rank, seed):
        rng = np.random.default_rng(seed)
        r = min(rank, rows, cols)
        a = rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))
        a /= max(np.abs(a).max(), 1.0)
        errors = mp_condition_errors(a, pinv(a))
        assert max(errors) <= 1e-9
