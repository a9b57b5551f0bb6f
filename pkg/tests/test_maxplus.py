"""Tests for max-plus arithmetic, noise matrices and the path oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxcons.errors import DomainError, InstanceTooLargeError, ShapeError
from maxcons.graph import GraphRealization, build_graph, erdos_renyi_graph, sample_realization
from maxcons.maxplus import (
    NEG_INF,
    MaxPlusMatrix,
    build_noise_matrix,
    from_csv,
    mp_identity,
    mp_multiply,
    mp_product,
    path_max_oracle,
    path_max_table,
    propagate,
    to_csv,
)
from maxcons.noise import GaussianNoise, LaplaceNoise, UniformNoise

PATH3 = build_graph(3, [(0, 1), (1, 2)])


def integer_matrices(n):
    """Small integers or -inf, so sums are exact in floating point."""
    entry = st.one_of(st.integers(-50, 50).map(float), st.just(-math.inf))
    return st.lists(entry, min_size=n * n, max_size=n * n).map(
        lambda vals: MaxPlusMatrix(np.array(vals).reshape(n, n))
    )


class TestMaxPlusMatrix:
    """Test the matrix value type."""

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            MaxPlusMatrix(np.zeros((2, 3)))

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            MaxPlusMatrix(np.array([[0.0, np.nan], [0.0, 0.0]]))

    def test_positive_infinity_rejected(self):
        with pytest.raises(DomainError):
            MaxPlusMatrix(np.array([[0.0, np.inf], [0.0, 0.0]]))

    def test_entries_are_read_only(self):
        m = mp_identity(2)
        with pytest.raises(ValueError):
            m.entries[0, 0] = 1.0

    def test_source_array_not_aliased(self):
        source = np.zeros((2, 2))
        m = MaxPlusMatrix(source)
        source[0, 0] = 5.0
        assert m.entries[0, 0] == 0.0

    def test_equality(self):
        assert mp_identity(3) == mp_identity(3)
        assert mp_identity(3) != mp_identity(2)


class TestSemiring:
    """Test products against worked examples and algebraic laws."""

    def test_two_by_two_example(self):
        x = MaxPlusMatrix(np.array([[0.0, 1.0], [NEG_INF, 2.0]]))
        y = MaxPlusMatrix(np.array([[3.0, NEG_INF], [0.0, -2.0]]))
        assert np.array_equal((x @ y).entries, np.array([[3.0, -1.0], [2.0, 0.0]]))

    def test_identity_is_neutral(self):
        x = MaxPlusMatrix(np.array([[1.5, NEG_INF], [-0.5, 2.0]]))
        assert mp_multiply(mp_identity(2), x) == x
        assert mp_multiply(x, mp_identity(2)) == x

    def test_all_neg_inf_absorbs(self):
        zero = MaxPlusMatrix(np.full((3, 3), NEG_INF))
        x = MaxPlusMatrix(np.arange(9.0).reshape(3, 3))
        assert np.isneginf((zero @ x).entries).all()

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            mp_multiply(mp_identity(2), mp_identity(3))

    @settings(max_examples=100, deadline=None)
    @given(integer_matrices(3), integer_matrices(3), integer_matrices(3))
    def test_associative(self, x, y, z):
        assert (x @ y) @ z == x @ (y @ z)

    @settings(max_examples=100, deadline=None)
    @given(integer_matrices(3), integer_matrices(3), integer_matrices(3))
    def test_distributes_over_max(self, x, y, z):
        union = MaxPlusMatrix(np.maximum(y.entries, z.entries))
        expected = np.maximum((x @ y).entries, (x @ z).entries)
        assert np.array_equal((x @ union).entries, expected)

    @settings(max_examples=100, deadline=None)
    @given(
        integer_matrices(3),
        integer_matrices(3),
        st.integers(0, 2),
        st.integers(0, 2),
        st.integers(0, 100).map(float),
    )
    def test_monotone_in_every_entry(self, x, y, i, j, raise_by):
        raised = x.entries.copy()
        raised[i, j] = raise_by if math.isinf(raised[i, j]) else raised[i, j] + raise_by
        bigger = MaxPlusMatrix(raised)
        assert (mp_multiply(bigger, y).entries >= mp_multiply(x, y).entries).all()
        assert (mp_multiply(y, bigger).entries >= mp_multiply(y, x).entries).all()

    def test_product_order(self):
        w0 = MaxPlusMatrix(np.array([[0.0, 1.0], [NEG_INF, 0.0]]))
        w1 = MaxPlusMatrix(np.array([[0.0, NEG_INF], [2.0, 0.0]]))
        assert mp_product([w0, w1]) == w1 @ w0

    def test_empty_product(self):
        with pytest.raises(DomainError):
            mp_product([])

    def test_propagate_example(self):
        w = MaxPlusMatrix(np.array([[0.0, 0.3], [NEG_INF, 0.0]]))
        assert np.allclose(propagate(w, np.array([4.0, 5.0])), [5.3, 5.0])

    def test_propagate_shape_mismatch(self):
        with pytest.raises(ShapeError):
            propagate(mp_identity(2), np.zeros(3))

    def test_propagate_matches_product(self):
        rng = np.random.default_rng(5)
        g = erdos_renyi_graph(6, 0.5, seed=5)
        model = GaussianNoise()
        ws = [build_noise_matrix(sample_realization(g, 0.3, rng), model, rng) for _ in range(5)]
        x = rng.normal(size=6)
        state = x
        for w in ws:
            state = propagate(w, state)
        assert np.allclose(state, propagate(mp_product(ws), x), rtol=0, atol=1e-12)


class TestNoiseMatrix:
    """Test the per-iteration noise matrix."""

    def test_pattern_follows_active_edges(self):
        real = GraphRealization(base=PATH3, active_mask=np.array([True, False]))
        w = build_noise_matrix(real, GaussianNoise(), np.random.default_rng(0)).entries
        assert np.isfinite(w[0, 1]) and np.isfinite(w[1, 0])
        assert np.isneginf(w[1, 2]) and np.isneginf(w[2, 1])
        assert np.isneginf(w[0, 2]) and np.isneginf(w[2, 0])
        assert (np.diag(w) == 0.0).all()

    def test_directions_draw_independently(self):
        real = sample_realization(PATH3, 0.0, np.random.default_rng(0))
        w = build_noise_matrix(real, LaplaceNoise(), np.random.default_rng(1)).entries
        assert w[0, 1] != w[1, 0]

    def test_self_loop_noise(self):
        real = sample_realization(PATH3, 0.0, np.random.default_rng(0))
        w = build_noise_matrix(real, UniformNoise(), np.random.default_rng(2), self_loop_noise=True).entries
        assert (np.diag(w) != 0.0).all()

    def test_stream_independent_of_erasures(self):
        # same draws land on the surviving edges whatever was erased
        full = sample_realization(PATH3, 0.0, np.random.default_rng(0))
        partial = GraphRealization(base=PATH3, active_mask=np.array([True, False]))
        a = build_noise_matrix(full, GaussianNoise(), np.random.default_rng(3)).entries
        b = build_noise_matrix(partial, GaussianNoise(), np.random.default_rng(3)).entries
        assert a[0, 1] == b[0, 1] and a[1, 0] == b[1, 0]

    def test_erasure_penalty(self):
        partial = GraphRealization(base=PATH3, active_mask=np.array([True, False]))
        w = build_noise_matrix(partial, GaussianNoise(), np.random.default_rng(0), erasure_penalty=50.0).entries
        assert w[1, 2] == -50.0 and w[2, 1] == -50.0
        assert np.isneginf(w[0, 2])

    def test_non_positive_penalty(self):
        real = sample_realization(PATH3, 0.0, np.random.default_rng(0))
        with pytest.raises(DomainError):
            build_noise_matrix(real, GaussianNoise(), np.random.default_rng(0), erasure_penalty=0.0)

    def test_degenerate_noise_gives_zero_weights(self):
        real = sample_realization(PATH3, 0.0, np.random.default_rng(0))
        w = build_noise_matrix(real, GaussianNoise(0.0), np.random.default_rng(0)).entries
        assert w[0, 1] == 0.0 and w[1, 2] == 0.0


class TestPathOracle:
    """Test that products equal best path sums found by enumeration."""

    @pytest.mark.parametrize("seed", range(25))
    def test_product_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        g = erdos_renyi_graph(n, 0.5, seed=seed)
        t = int(rng.integers(1, 5))
        model = [GaussianNoise(), LaplaceNoise(), UniformNoise()][seed % 3]
        ws = [build_noise_matrix(sample_realization(g, 0.25, rng), model, rng) for _ in range(t)]
        product = mp_product(ws).entries
        for j in range(n):
            table = path_max_table(g, ws, j)
            for i in range(n):
                assert product[i, j] == table[i]

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "g",
        [
            build_graph(6, [(i, i + 1) for i in range(5)]),
            build_graph(6, [(0, k) for k in range(1, 6)]),
            build_graph(6, [(i, (i + 1) % 6) for i in range(6)]),
            build_graph(6, [(i, j) for i in range(6) for j in range(i + 1, 6)]),
        ],
        ids=["path6", "star6", "cycle6", "complete6"],
    )
    def test_product_matches_oracle_at_full_depth(self, g):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            ws = [build_noise_matrix(sample_realization(g, 0.25, rng), LaplaceNoise(), rng) for _ in range(5)]
            product = mp_product(ws).entries
            for j in range(g.n_nodes):
                assert np.array_equal(path_max_table(g, ws, j), product[:, j])

    def test_single_step_is_the_matrix(self):
        rng = np.random.default_rng(7)
        w = build_noise_matrix(sample_realization(PATH3, 0.0, rng), GaussianNoise(), rng)
        assert path_max_oracle(PATH3, [w], 1, 0) == w.entries[1, 0]
        assert path_max_oracle(PATH3, [w], 2, 0) == NEG_INF

    def test_too_many_steps(self):
        ws = [mp_identity(3)] * 9
        with pytest.raises(InstanceTooLargeError):
            path_max_table(PATH3, ws, 0)

    def test_too_many_nodes(self):
        g = build_graph(9, [(i, i + 1) for i in range(8)])
        with pytest.raises(InstanceTooLargeError):
            path_max_table(g, [mp_identity(9)], 0)

    def test_no_matrices(self):
        with pytest.raises(DomainError):
            path_max_table(PATH3, [], 0)

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            path_max_table(PATH3, [mp_identity(2)], 0)


class TestCsv:
    """Test the text form used for inspection."""

    def test_neg_inf_survives(self):
        m = MaxPlusMatrix(np.array([[0.0, NEG_INF], [0.1, -2.5]]))
        assert from_csv(to_csv(m)) == m

    def test_full_precision(self):
        m = MaxPlusMatrix(np.array([[1 / 3]]))
        assert from_csv(to_csv(m)).entries[0, 0] == 1 / 3

    def test_malformed(self):
        with pytest.raises(DomainError):
            from_csv("0,abc\n1,2\n")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
