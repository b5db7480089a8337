import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fqcast.timeseries import (
    IngestError,
    Panel,
    WindowSpec,
    demean,
    load_panel,
    rolling_windows,
    save_panel,
    to_stationary,
)


def days(k, start=dt.date(2020, 1, 1)):
    return tuple(start + dt.timedelta(days=i) for i in range(k))


def panel(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return Panel(days(values.shape[0]), tuple(f"c{i}" for i in range(values.shape[1])), values)


class TestLoadPanel:
    def test_three_rows(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n")
        out = load_panel(p)
        assert (out.T, out.n) == (3, 1)
        assert out.dates[0] == dt.date(2020, 1, 1)
        assert out.dropped == 0

    def test_duplicate_date(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x\n2020-01-01,1\n2020-01-01,2\n")
        with pytest.raises(IngestError, match="duplicate date"):
            load_panel(p)

    def test_blank_cell_dropped_and_counted(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x,y\n2020-01-01,1,2\n2020-01-02,,3\n2020-01-03,4,5\n")
        out = load_panel(p)
        assert out.T == 2
        assert out.dropped == 1

    def test_sorted_by_date(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n")
        assert load_panel(p).values[:, 0].tolist() == [1, 2, 3]

    def test_non_numeric_names_row_and_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x\n2020-01-01,1\n2020-01-02,abc\n")
        with pytest.raises(IngestError, match=r"row 3.*'x'"):
            load_panel(p)

    def test_bad_date_and_custom_format(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("when,x\n02/01/2020,1\n03/01/2020,2\n")
        with pytest.raises(IngestError, match="unparseable date"):
            load_panel(p)
        out = load_panel(p, date_column="when", date_format="%d/%m/%Y")
        assert out.dates == (dt.date(2020, 1, 2), dt.date(2020, 1, 3))

    def test_column_subset(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,x,y\n2020-01-01,1,2\n")
        out = load_panel(p, columns=["y"])
        assert out.names == ("y",) and out.values[0, 0] == 2
        with pytest.raises(IngestError, match="not found"):
            load_panel(p, columns=["z"])

    def test_round_trip(self, tmp_path, rng):
        a = panel(rng.standard_normal((5, 2)))
        save_panel(a, tmp_path / "p.csv")
        b = load_panel(tmp_path / "p.csv")
        assert b.dates == a.dates
        np.testing.assert_array_equal(b.values, a.values)


class TestToStationary:
    def test_log_returns(self):
        out = to_stationary(panel([1.0, np.e]), "log_returns")
        assert out.T == 1
        assert out.values[0, 0] == pytest.approx(1.0)

    def test_first_difference(self):
        out = to_stationary(panel([2.0, 2.5, 2.3]), "first_difference")
        np.testing.assert_allclose(out.values[:, 0], [0.5, -0.2])

    def test_simple_returns(self):
        out = to_stationary(panel([100.0, 110.0]), "simple_returns")
        assert out.values[0, 0] == pytest.approx(0.10)

    def test_non_positive_price(self):
        with pytest.raises(ValueError):
            to_stationary(panel([1.0, 0.0, 2.0]), "log_returns")

    def test_per_column_methods_and_multiplier(self):
        p = panel(np.array([[1.0, 2.0], [np.e, 2.5]]))
        out = to_stationary(p, {"c0": "log_returns", "c1": "first_difference"}, {"c1": 100.0})
        np.testing.assert_allclose(out.values[0], [1.0, 50.0])

    def test_output_dated_at_later_row(self):
        p = panel([1.0, 2.0, 3.0])
        assert to_stationary(p).dates == p.dates[1:]

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.integers(2, 40), elements=st.floats(0.01, 1e4)))
    def test_log_return_round_trip(self, prices):
        r = to_stationary(panel(prices), "log_returns").values[:, 0]
        rebuilt = prices[0] * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
        np.testing.assert_allclose(rebuilt, prices, rtol=1e-10)


class TestRollingWindows:
    def test_two_targets(self):
        pairs = list(rolling_windows(panel(np.arange(5.0)), WindowSpec(3)))
        assert [t for _, t in pairs] == [3, 4]
        assert pairs[0][0].values[:, 0].tolist() == [0, 1, 2]

    def test_no_target(self):
        with pytest.raises(ValueError):
            list(rolling_windows(panel(np.arange(5.0)), WindowSpec(5)))

    def test_long_window(self):
        assert len(list(rolling_windows(panel(np.zeros(2002)), WindowSpec(2000)))) == 2

    def test_step(self):
        targets = [t for _, t in rolling_windows(panel(np.arange(10.0)), WindowSpec(3, step=2))]
        assert targets == [3, 5, 7, 9]

    @given(st.integers(2, 60), st.integers(1, 59))
    def test_count(self, T, length):
        if length >= T:
            return
        assert sum(1 for _ in rolling_windows(panel(np.zeros(T)), WindowSpec(length))) == T - length

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            WindowSpec(0)
        with pytest.raises(ValueError):
            WindowSpec(3, step=0)


class TestDemean:
    def test_simple(self):
        c, m = demean(panel([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(c.values[:, 0], [-1, 0, 1])
        assert m[0] == 2

    def test_zero_column(self):
        c, m = demean(panel(np.zeros(4)))
        assert np.all(c.values == 0) and m[0] == 0

    def test_random(self, rng):
        c, _ = demean(panel(rng.standard_normal((100, 2)) * 50 + 7))
        assert np.all(np.abs(c.values.mean(axis=0)) < 1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (20, 3), elements=st.floats(-1e3, 1e3)))
    def test_idempotent(self, x):
        c1, _ = demean(panel(x))
        c2, m2 = demean(c1)
        np.testing.assert_allclose(c2.values, c1.values, atol=1e-9)
        assert np.all(np.abs(m2) < 1e-9)


class TestPanel:
    def test_invariants(self):
        with pytest.raises(ValueError, match="increasing"):
            Panel((dt.date(2020, 1, 2), dt.date(2020, 1, 1)), ("a",), [[1.0], [2.0]])
        with pytest.raises(ValueError):
            Panel((), ("a",), np.zeros((0, 1)))

    def test_read_only(self):
        p = panel([1.0, 2.0])
        with pytest.raises(ValueError):
            p.values[0, 0] = 5
