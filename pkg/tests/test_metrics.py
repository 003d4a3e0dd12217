import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtnn.kernels import ProblemShape
from mtnn.metrics import (
    EvalCase,
    aggregate,
    gow,
    histogram_csv_rows,
    lub,
    ratio_histogram,
    render_report,
    report_csv_rows,
)

perf = st.floats(min_value=1e-2, max_value=1e5, allow_nan=False, allow_infinity=False)


def case(p_nt, p_tnn, p_mtnn, shape=(8, 8, 8)):
    return EvalCase(shape=ProblemShape(*shape), p_nt=p_nt, p_tnn=p_tnn, p_mtnn=p_mtnn)


class TestGow:
    def test_equal_to_worst_is_zero(self):
        assert gow(100.0, 100.0, 200.0) == pytest.approx(0.0)

    def test_doubling_worst(self):
        assert gow(200.0, 100.0, 200.0) == pytest.approx(1.0)

    def test_picked_worse_branch(self):
        assert gow(100.0, 100.0, 200.0) == pytest.approx(0.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            gow(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            gow(1.0, -1.0, 1.0)


class TestLub:
    def test_equal_to_best_is_zero(self):
        assert lub(200.0, 100.0, 200.0) == pytest.approx(0.0)

    def test_picked_worse_branch(self):
        assert lub(100.0, 100.0, 200.0) == pytest.approx(-0.5)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            lub(1.0, 1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(p_nt=perf, p_tnn=perf, p_mtnn=perf)
def test_gow_lub_identity_roundtrip(p_nt, p_tnn, p_mtnn):
    # p_mtnn is recoverable from either metric
    low, high = min(p_nt, p_tnn), max(p_nt, p_tnn)
    from_gow = gow(p_mtnn, p_nt, p_tnn) * low + low
    from_lub = lub(p_mtnn, p_nt, p_tnn) * high + high
    # recovery cancels catastrophically when the magnitudes are far
    # apart, so the tolerance scales with the larger branch value
    assert from_gow == pytest.approx(p_mtnn, rel=1e-6, abs=1e-9 * high)
    assert from_lub == pytest.approx(p_mtnn, rel=1e-6, abs=1e-9 * high)


@settings(max_examples=200, deadline=None)
@given(p_nt=perf, p_tnn=perf, pick_nt=st.booleans())
def test_copied_mode_invariants(p_nt, p_tnn, pick_nt):
    # with p_mtnn copied from one branch: gow >= 0, lub <= 0, and
    # exactly one of them is zero unless the branches tie
    p_mtnn = p_nt if pick_nt else p_tnn
    g = gow(p_mtnn, p_nt, p_tnn)
    l = lub(p_mtnn, p_nt, p_tnn)
    assert g >= 0.0
    assert l <= 0.0
    if p_nt != p_tnn:
        assert (g == 0.0) != (l == 0.0)
    else:
        assert g == 0.0 and l == 0.0


class TestHistogram:
    def test_equal_case_lands_on_unity_bucket(self):
        report = aggregate([case(100.0, 100.0, 100.0)], p_mtnn_mode="copied")
        assert report.ratio_histogram[10] == 1  # [1.0, 1.1)
        assert sum(report.ratio_histogram) == 1

    def test_terminal_bucket(self):
        assert ratio_histogram([2.0])[20] == 1
        assert ratio_histogram([57.0])[20] == 1

    def test_bucket_edges(self):
        counts = ratio_histogram([0.0, 0.05, 0.1, 1.999])
        assert counts[0] == 2 and counts[1] == 1 and counts[19] == 1

    def test_totals_match_case_count(self):
        cases = [case(10.0, 20.0, 10.0 + i) for i in range(17)]
        report = aggregate(cases)
        assert sum(report.ratio_histogram) == report.n_cases == 17

    def test_rejects_negative_ratio(self):
        with pytest.raises(ValueError):
            ratio_histogram([-0.1])

    def test_csv_rows_labels(self):
        report = aggregate([case(100.0, 50.0, 100.0)], p_mtnn_mode="copied")
        rows = histogram_csv_rows(report)
        assert rows[0] == ("bucket", "count")
        assert rows[1][0] == "0.0"
        assert rows[-1][0] == "2.0+"
        assert len(rows) == 22


class TestAggregate:
    def test_ten_case_recomputation(self):
        # independent recomputation with plain Python sums
        rng = np.random.default_rng(5)
        cases = []
        for _ in range(10):
            p_nt, p_tnn = rng.uniform(10, 200, 2)
            p_mtnn = rng.uniform(10, 200)
            cases.append(case(p_nt, p_tnn, p_mtnn))
        report = aggregate(cases)
        vs_nt = sum((c.p_mtnn - c.p_nt) / c.p_nt for c in cases) / 10 * 100
        vs_tnn = sum((c.p_mtnn - c.p_tnn) / c.p_tnn for c in cases) / 10 * 100
        gows = [
            (c.p_mtnn - min(c.p_nt, c.p_tnn)) / min(c.p_nt, c.p_tnn) for c in cases
        ]
        lubs = [
            (c.p_mtnn - max(c.p_nt, c.p_tnn)) / max(c.p_nt, c.p_tnn) for c in cases
        ]
        assert report.mtnn_vs_nt == pytest.approx(vs_nt)
        assert report.mtnn_vs_tnn == pytest.approx(vs_tnn)
        assert report.gow_avg == pytest.approx(sum(gows) / 10 * 100)
        assert report.gow_max == pytest.approx(max(gows) * 100)
        assert report.lub_avg == pytest.approx(sum(lubs) / 10 * 100)
        assert report.lub_min == pytest.approx(min(lubs) * 100)

    def test_single_equal_case_all_zero(self):
        report = aggregate([case(10.0, 10.0, 10.0)], p_mtnn_mode="copied")
        assert report.mtnn_vs_nt == 0.0
        assert report.gow_avg == 0.0 and report.gow_max == 0.0
        assert report.lub_avg == 0.0 and report.lub_min == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(9)
        cases = [case(*rng.uniform(1, 100, 3)) for _ in range(12)]
        base = aggregate(cases)
        shuffled = list(cases)
        rng.shuffle(shuffled)
        got = aggregate(shuffled)
        assert got.ratio_histogram == base.ratio_histogram
        for attr in ("mtnn_vs_nt", "mtnn_vs_tnn", "gow_avg", "gow_max",
                     "lub_avg", "lub_min"):
            assert getattr(got, attr) == pytest.approx(getattr(base, attr))

    def test_copied_mode_report_bounds(self):
        rng = np.random.default_rng(2)
        cases = []
        for _ in range(30):
            p_nt, p_tnn = rng.uniform(5, 500, 2)
            p_mtnn = p_nt if rng.random() < 0.5 else p_tnn
            cases.append(case(p_nt, p_tnn, p_mtnn))
        report = aggregate(cases, p_mtnn_mode="copied")
        assert report.gow_avg >= 0.0
        assert report.gow_max >= report.gow_avg
        assert report.lub_avg <= 0.0
        assert report.lub_min <= report.lub_avg

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no cases"):
            aggregate([])

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="p_mtnn_mode"):
            aggregate([case(1.0, 1.0, 1.0)], p_mtnn_mode="imagined")


class TestRendering:
    def test_two_decimal_formatting(self):
        report = aggregate([case(100.0, 200.0, 200.0)], p_mtnn_mode="copied")
        text = render_report(report)
        assert "MTNN vs NT" in text and "100.00" in text
        assert "copied" in text

    def test_csv_rows_shape(self):
        report = aggregate([case(100.0, 200.0, 200.0)])
        rows = report_csv_rows(report)
        assert rows[0] == ("metric", "percent")
        names = [r[0] for r in rows]
        for metric in ("MTNN vs NT", "MTNN vs TNN", "GOW avg", "GOW max",
                       "LUB avg", "LUB min", "n_cases", "p_mtnn_mode"):
            assert metric in names
