import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gravpanel.errors import PanelError
from gravpanel.panel import (
    DesignMatrix,
    PanelIndex,
    PanelSeries,
    lag,
    panel_variance_decomposition,
    quasi_demean,
    within_transform,
)


def make_design(N, T, k, rng, names=None):
    n = N * T
    names = names or [f"x{j}" for j in range(k)]
    return DesignMatrix(
        y=rng.normal(size=n),
        X=rng.normal(size=(n, k)),
        columns=names,
        entity_of_row=np.repeat(np.arange(N), T),
        period_of_row=np.tile(np.arange(2000, 2000 + T), N),
        entities=tuple(f"E{i}" for i in range(N)),
    )


def subtract_entity_means_oracle(values, N, T):
    # Two explicit passes, no vectorised grouping.
    out = np.empty_like(values)
    for i in range(N):
        rows = range(i * T, (i + 1) * T)
        total = 0.0
        for r in rows:
            total += values[r]
        mean = total / T
        for r in rows:
            out[r] = values[r] - mean
    return out


class TestPanelIndex:
    def test_counts(self):
        idx = PanelIndex.from_range(["AUT", "DEU", "NLD"], 2000, 2013)
        assert idx.n_entities == 3
        assert idx.n_periods == 14

    @pytest.mark.parametrize(
        "entities, periods",
        [
            (["A", "A"], [1, 2, 3]),
            (["A"], [1, 2, 3]),
            (["A", "B"], [1, 2]),
            (["A", "B"], [1, 2, 4]),
            (["A", ""], [1, 2, 3]),
        ],
    )
    def test_rejects_invalid(self, entities, periods):
        with pytest.raises(PanelError):
            PanelIndex(tuple(entities), tuple(periods))


class TestPanelSeries:
    def test_shape_mismatch(self):
        idx = PanelIndex.from_range(["A", "B"], 1, 3)
        with pytest.raises(PanelError):
            PanelSeries(idx, np.zeros((3, 2)))

    def test_complete_flag(self):
        idx = PanelIndex.from_range(["A", "B"], 1, 3)
        s = PanelSeries(idx, np.ones((2, 3)))
        assert s.complete
        v = np.ones((2, 3))
        v[1, 1] = np.nan
        s2 = PanelSeries(idx, v)
        assert not s2.complete
        assert s2.missing_cells() == [("B", 2)]

    def test_immutable(self):
        idx = PanelIndex.from_range(["A", "B"], 1, 3)
        s = PanelSeries(idx, np.ones((2, 3)))
        with pytest.raises(ValueError):
            s.values[0, 0] = 2.0

    def test_missing_propagates(self):
        idx = PanelIndex.from_range(["A", "B"], 1, 3)
        v = np.ones((2, 3))
        v[0, 0] = np.nan
        s = PanelSeries(idx, v)
        assert np.isnan(np.log(s.values)[0, 0])


class TestWithin:
    def test_demeaning_identity(self):
        m = DesignMatrix(
            y=[1.0, 2.0, 3.0, 5.0, 5.0, 5.0],
            X=np.array([[1.0, 2.0, 3.0, 4.0, 4.0, 7.0]]).T,
            columns=["x"],
            entity_of_row=[0, 0, 0, 1, 1, 1],
            period_of_row=[1, 2, 3, 1, 2, 3],
            entities=("a", "b"),
        )
        w = within_transform(m)
        np.testing.assert_array_equal(w.y[:3], [-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(w.X[:3, 0], [-1.0, 0.0, 1.0])

    def test_time_invariant_flagged(self):
        rng = np.random.default_rng(0)
        m = make_design(3, 4, 1, rng)
        dist = np.repeat([10.0, 20.0, 30.0], 4)
        m = DesignMatrix(m.y, np.column_stack([m.X, dist]), ("x0", "dist"), m.entity_of_row, m.period_of_row, m.entities)
        w = within_transform(m)
        assert w.degenerate == {"dist"}
        assert np.all(w.col("dist") == 0.0)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(123)
        m = make_design(3, 4, 2, rng)
        w = within_transform(m)
        np.testing.assert_allclose(w.y, subtract_entity_means_oracle(m.y, 3, 4), atol=1e-12)
        for j in range(2):
            np.testing.assert_allclose(w.X[:, j], subtract_entity_means_oracle(m.X[:, j], 3, 4), atol=1e-12)

    def test_single_row_entity_rejected(self):
        m = DesignMatrix([1.0, 2.0, 3.0], np.ones((3, 1)), ["x"], [0, 0, 1], [1, 2, 1], ("a", "b"))
        with pytest.raises(PanelError):
            within_transform(m)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 6), st.integers(3, 8), st.integers(0, 2**31 - 1))
    def test_idempotent_and_sums_to_zero(self, N, T, seed):
        m = make_design(N, T, 3, np.random.default_rng(seed))
        w1 = within_transform(m)
        w2 = within_transform(w1)
        np.testing.assert_allclose(w2.X, w1.X, atol=1e-10)
        np.testing.assert_allclose(w2.y, w1.y, atol=1e-10)
        sums = np.zeros((N, 3))
        np.add.at(sums, m.entity_of_row, w1.X)
        assert np.abs(sums).max() < 1e-10


class TestQuasiDemean:
    def test_theta_zero_is_identity(self):
        m = make_design(3, 5, 2, np.random.default_rng(1))
        q = quasi_demean(m, np.zeros(3))
        np.testing.assert_array_equal(q.X, m.X)
        np.testing.assert_array_equal(q.y, m.y)

    def test_theta_one_is_within(self):
        m = make_design(3, 5, 2, np.random.default_rng(2))
        q = quasi_demean(m, np.ones(3))
        w = within_transform(m)
        np.testing.assert_allclose(q.X, w.X, atol=1e-14)
        np.testing.assert_allclose(q.y, w.y, atol=1e-14)

    def test_hand_arithmetic(self):
        m = DesignMatrix([2.0, 4.0, 1.0, 1.0], np.array([[2.0, 4.0, 1.0, 1.0]]).T, ["x"], [0, 0, 1, 1], [1, 2, 1, 2], ("a", "b"))
        q = quasi_demean(m, [0.5, 0.0])
        np.testing.assert_allclose(q.X[:2, 0], [0.5, 2.5])

    @pytest.mark.parametrize("bad", [-0.1, 1.5, np.nan])
    def test_rejects_out_of_range(self, bad):
        m = make_design(2, 3, 1, np.random.default_rng(3))
        with pytest.raises(PanelError):
            quasi_demean(m, [0.5, bad])


class TestLag:
    def idx(self, T=3):
        return PanelIndex.from_range(["a", "b"], 1, T)

    def test_simple(self):
        s = PanelSeries(self.idx(), np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        out = lag(s, 1)
        assert np.isnan(out.values[:, 0]).all()
        np.testing.assert_array_equal(out.values[:, 1:], [[1.0, 2.0], [4.0, 5.0]])

    def test_max_lag(self):
        s = PanelSeries(self.idx(), np.arange(6.0).reshape(2, 3))
        out = lag(s, 2)
        assert np.isnan(out.values[:, :2]).all()
        np.testing.assert_array_equal(out.values[:, 2], [0.0, 3.0])

    @pytest.mark.parametrize("k", [0, 3, 4, -1])
    def test_bad_order(self, k):
        s = PanelSeries(self.idx(), np.zeros((2, 3)))
        with pytest.raises(PanelError):
            lag(s, k)

    def test_matches_reindexing_oracle(self):
        rng = np.random.default_rng(7)
        idx = PanelIndex.from_range(["a", "b", "c", "d"], 2000, 2009)
        s = PanelSeries(idx, rng.normal(size=(4, 10)))
        out = lag(s, 2)
        lookup = {(e, p): s.values[i, t] for i, e in enumerate(idx.entities) for t, p in enumerate(idx.periods)}
        for i, e in enumerate(idx.entities):
            for t, p in enumerate(idx.periods):
                expected = lookup.get((e, p - 2), np.nan)
                got = out.values[i, t]
                assert (np.isnan(expected) and np.isnan(got)) or got == expected

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (3, 7), elements=st.floats(-1e6, 1e6)))
    def test_lag_composition(self, values):
        s = PanelSeries(PanelIndex.from_range(["a", "b", "c"], 1, 7), values)
        twice = lag(lag(s, 1), 1).values
        once = lag(s, 2).values
        populated = ~np.isnan(once)
        np.testing.assert_array_equal(twice[populated], once[populated])
        assert np.isnan(twice[~populated]).all()


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(3, 10), st.integers(0, 2**31 - 1))
def test_variance_decomposition(N, T, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=N * T) * 10 + np.repeat(rng.normal(size=N) * 5, T)
    total, within, between = panel_variance_decomposition(x, np.repeat(np.arange(N), T), N)
    assert abs(total - (within + between)) < 1e-8


def test_from_series_stacks_entity_major():
    idx = PanelIndex.from_range(["a", "b"], 2000, 2002)
    y = PanelSeries(idx, [[1, 2, 3], [4, 5, 6]], "y")
    x = PanelSeries(idx, [[7, 8, 9], [10, 11, 12]], "x")
    m = DesignMatrix.from_series(y, {"x": x})
    np.testing.assert_array_equal(m.y, [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(m.entity_of_row, [0, 0, 0, 1, 1, 1])
    np.testing.assert_array_equal(m.period_of_row, [2000, 2001, 2002] * 2)


def test_from_series_missing():
    idx = PanelIndex.from_range(["a", "b"], 2000, 2002)
    y = PanelSeries(idx, [[1, 2, 3], [4, 5, 6]], "y")
    x = lag(PanelSeries(idx, [[7, 8, 9], [10, 11, 12]], "x"))
    with pytest.raises(PanelError):
        DesignMatrix.from_series(y, {"x": x})
    m = DesignMatrix.from_series(y, {"x": x}, drop_missing=True)
    assert m.n_obs == 4


def test_design_rejects_duplicate_columns():
    with pytest.raises(PanelError):
        DesignMatrix([1.0, 2.0], np.ones((2, 2)), ["x", "x"], [0, 1], [1, 1], ("a", "b"))
