import math

import numpy as np
import pytest
from hypothesis import given, settings, assume
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robinsdp import SymMatrix, lambda_max, loewner_leq, spectral_norm

EIG_TOL = 1e-12


def sym_arrays(dim):
    return arrays(
        np.float64,
        (dim, dim),
        elements=st.floats(min_value=-10.0, max_value=10.0),
    ).map(lambda a: 0.5 * (a + a.T))


class TestSymMatrix:
    def test_symmetrizes_exactly(self):
        raw = np.array([[1.0, 2.0], [0.0, 3.0]])
        mat = SymMatrix(raw)
        assert np.array_equal(mat.entries, mat.entries.T)
        assert mat.entries[0, 1] == 1.0

    def test_entries_read_only(self):
        mat = SymMatrix.identity(2)
        with pytest.raises(ValueError):
            mat.entries[0, 0] = 5.0

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros(3), np.zeros((0, 0))])
    def test_rejects_non_square(self, bad):
        with pytest.raises(ValueError):
            SymMatrix(bad)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SymMatrix(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_leading_block(self):
        mat = SymMatrix(np.arange(9.0).reshape(3, 3))
        block = mat.leading_block(2)
        assert block.dim == 2
        assert np.array_equal(block.entries, mat.entries[:2, :2])
        with pytest.raises(ValueError):
            mat.leading_block(4)

    def test_arithmetic(self):
        eye = SymMatrix.identity(2)
        two = 2.0 * eye
        assert np.array_equal((two - eye).entries, eye.entries)
        assert np.array_equal((-eye).entries, -np.eye(2))
        with pytest.raises(ValueError):
            eye + SymMatrix.identity(3)


class TestLambdaMax:
    def test_identity(self):
        assert lambda_max(SymMatrix.identity(3)) == pytest.approx(1.0, abs=EIG_TOL)

    def test_diagonal(self):
        assert lambda_max(np.diag([1.0, -2.0])) == pytest.approx(1.0, abs=EIG_TOL)

    def test_offdiagonal_pair(self):
        # characteristic polynomial x^2 - 1, roots +-1
        assert lambda_max(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(sym_arrays(4))
    def test_plus_reflection_nonnegative(self, a):
        scale = max(1.0, np.abs(a).max())
        assert lambda_max(a) + lambda_max(-a) >= -1e-10 * scale

    @pytest.mark.parametrize("c", [0.0, 1.5, -3.25])
    def test_reflection_equality_on_scaled_identity(self, c):
        a = c * np.eye(5)
        assert abs(lambda_max(a) + lambda_max(-a)) <= EIG_TOL * max(1.0, abs(c))

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)
    )
    def test_two_by_two_characteristic_roots(self, p, q, s):
        # largest root of x^2 - (p + s) x + (p s - q^2) by the quadratic formula
        mat = np.array([[p, q], [q, s]])
        root = 0.5 * ((p + s) + math.hypot(p - s, 2.0 * q))
        assert lambda_max(mat) == pytest.approx(root, abs=1e-10)


class TestSpectralNorm:
    def test_diagonal(self):
        assert spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0, abs=EIG_TOL)

    def test_zero(self):
        assert spectral_norm(SymMatrix.zeros(5)) == 0.0

    def test_offdiagonal_pair(self):
        # eigenvalues +-2
        assert spectral_norm(np.array([[0.0, 2.0], [2.0, 0.0]])) == pytest.approx(2.0, abs=1e-10)


class TestLoewnerLeq:
    def test_reflexive_on_zero(self):
        assert loewner_leq(SymMatrix.zeros(2), SymMatrix.zeros(2), 0.0)

    def test_negative_definite_below_zero(self):
        assert loewner_leq(np.diag([-1.0, -1.0]), SymMatrix.zeros(2), 0.0)

    def test_positive_eigenvalue_not_below_zero(self):
        assert not loewner_leq(np.diag([1.0, -5.0]), SymMatrix.zeros(2), 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loewner_leq(SymMatrix.zeros(2), SymMatrix.zeros(3), 0.0)

    def test_negative_slack_rejected(self):
        with pytest.raises(ValueError):
            loewner_leq(SymMatrix.zeros(2), SymMatrix.zeros(2), -1.0)

    @settings(max_examples=50, deadline=None)
    @given(sym_arrays(3), sym_arrays(3), sym_arrays(3))
    def test_transitivity_up_to_eig_tol(self, a, g1, g2):
        b = SymMatrix(a + g1 @ g1.T)
        c = SymMatrix(b.entries + g2 @ g2.T)
        a = SymMatrix(a)
        assume(loewner_leq(a, b, 0.0) and loewner_leq(b, c, 0.0))
        scale = max(1.0, spectral_norm(a), spectral_norm(c))
        assert loewner_leq(a, c, EIG_TOL * a.dim * scale)
