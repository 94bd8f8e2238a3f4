import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from movclust import distances as di
from movclust.errors import DataError

from conftest import collection, sym, ts


# ---------------------------------------------------------------------------
# independent oracles


def levenshtein_oracle(p, q):
    """Exhaustive recursion straight from the textbook definition."""
    p, q = tuple(p), tuple(q)

    @functools.lru_cache(maxsize=None)
    def rec(a, b):
        if not b:
            return len(a)
        if not a:
            return len(b)
        if a[0] == b[0]:
            return rec(a[1:], b[1:])
        return 1 + min(rec(a[1:], b[1:]), rec(a, b[1:]), rec(a[1:], b))

    return rec(p, q)


def dtw_oracle(p, q):
    """Enumerate every monotone boundary-anchored warping path (tiny inputs only)."""
    n, m = len(p), len(q)
    best = [math.inf]

    def walk(i, j, acc):
        acc = acc + (p[i] - q[j]) ** 2
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        for di_, dj_ in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di_, j + dj_
            if ni < n and nj < m:
                walk(ni, nj, acc)

    walk(0, 0, 0.0)
    return math.sqrt(best[0])


def mpbd_oracle(p, q, omega=2.0):
    """Direct rule-by-rule translation of the movement cost."""
    total = 0.0
    for t in range(len(p) - 1):
        a = p[t] - p[t + 1]
        b = q[t] - q[t + 1]
        if a == b:
            continue
        if np.sign(a) == np.sign(b):
            total += abs(a - b)
        else:
            total += omega * abs(a - b)
    return total


# ---------------------------------------------------------------------------


class TestEuclidean:
    def test_identity(self):
        assert di.euclidean([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_3_4_5(self):
        assert di.euclidean([0, 0], [3, 4]) == 5.0

    def test_hand_value(self):
        got = di.euclidean([0.1, 0.1, 0.1], [1, 1, 1])
        assert got == pytest.approx(0.9 * math.sqrt(3), rel=1e-12)

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = rng.normal(size=13)
            q = rng.normal(size=13)
            naive = math.sqrt(sum((b - a) ** 2 for a, b in zip(p, q)))
            assert di.euclidean(p, q) == pytest.approx(naive, rel=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            di.euclidean([1.0], [1.0, 2.0])


class TestLevenshtein:
    def test_identical(self):
        assert di.levenshtein("ABBA", "ABBA") == 0

    def test_abbb_cdbb(self):
        assert di.levenshtein("ABBB", "CDBB") == 2

    def test_base_case_empty(self):
        assert di.levenshtein("A", "") == 1
        assert di.levenshtein("", "ABC") == 3

    def test_integer_levels(self):
        assert di.levenshtein([1, 2, 2], [1, 3, 2]) == 1

    @given(
        st.text(alphabet="ABCDE", max_size=6), st.text(alphabet="ABCDE", max_size=6)
    )
    def test_matches_exhaustive_recursion(self, p, q):
        assert di.levenshtein(p, q) == levenshtein_oracle(p, q)

    @given(
        st.text(alphabet="ABC", max_size=5),
        st.text(alphabet="ABC", max_size=5),
        st.text(alphabet="ABC", max_size=5),
    )
    def test_triangle_inequality(self, a, b, c):
        assert di.levenshtein(a, c) <= di.levenshtein(a, b) + di.levenshtein(b, c)

    def test_normalized_scenarios(self):
        a = [2] * 10
        b = [2] * 3 + [4] * 3 + [2] * 4
        assert di.normalized_levenshtein(a, b) == pytest.approx(0.30)
        assert di.normalized_levenshtein([1] * 10, [2] * 10) == 1.0
        assert di.normalized_levenshtein(a, a) == 0.0


class TestDtw:
    def test_identity(self):
        assert di.dtw([1, 2, 3], [1, 2, 3]) == 0.0

    def test_time_shift_absorbed(self):
        assert di.dtw([1, 2, 3], [1, 1, 2, 3]) == 0.0

    def test_forced_diagonal(self):
        assert di.dtw([0, 0], [1, 1], window=0) == pytest.approx(math.sqrt(2))

    def test_window_too_small(self):
        with pytest.raises(DataError):
            di.dtw([1, 2, 3, 4], [1], window=1)

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            p = rng.integers(0, 4, size=rng.integers(2, 6)).astype(float)
            q = rng.integers(0, 4, size=rng.integers(2, 6)).astype(float)
            assert di.dtw(p, q) == pytest.approx(dtw_oracle(p, q), abs=1e-12)

    def test_window_matches_full_when_wide(self):
        rng = np.random.default_rng(2)
        p = rng.normal(size=8)
        q = rng.normal(size=8)
        assert di.dtw(p, q, window=8) == pytest.approx(di.dtw(p, q))

    def test_at_most_euclidean_on_equal_lengths(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.normal(size=12)
            q = rng.normal(size=12)
            assert di.dtw(p, q) <= di.euclidean(p, q) + 1e-12


class TestMpbd:
    def test_shifted_copy_is_zero(self):
        p = [2, 3, 3, 2, 4]
        q = [v + 2 for v in p]
        assert di.mpbd(p, q) == 0.0

    def test_scenario2_raw_value(self):
        p = [2, 2, 2, 1, 1, 1, 2, 2, 2, 2]
        q = [4, 4, 4, 2, 2, 2, 4, 4, 4, 4]
        assert di.mpbd(p, q) == 2.0

    def test_opposite_unit_step_cost(self):
        # d_p = +1 vs d_q = -1 with omega 2 costs 4
        assert di.mpbd([2, 1], [1, 2], omega=2.0) == 4.0

    def test_flat_vs_move_is_weighted(self):
        # sign(0) differs from sign(1): weighted branch
        assert di.mpbd([1, 1], [2, 1], omega=2.0) == 2.0

    def test_matches_rule_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            p = rng.integers(1, 6, size=9).astype(float)
            q = rng.integers(1, 6, size=9).astype(float)
            assert di.mpbd(p, q) == pytest.approx(mpbd_oracle(p, q), abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.normal(size=7)
            q = rng.normal(size=7)
            c = float(rng.normal()) * 10
            assert di.mpbd(p + c, q) == pytest.approx(di.mpbd(p, q), rel=1e-9)

    def test_zero_law(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = rng.integers(1, 6, size=8).astype(float)
            q = rng.integers(1, 6, size=8).astype(float)
            zero = di.mpbd(p, q) == 0.0
            constant_gap = len(set(np.round(p - q, 12))) == 1
            assert zero == constant_gap

    def test_triangle_inequality_fails(self):
        eps = 0.01
        p = [2.0, 1.0]          # delta +1
        q = [1.0, 2.0]          # delta -1
        m = [1.0 + eps, 1.0]    # delta +eps
        direct = di.mpbd(p, q)
        via = di.mpbd(p, m) + di.mpbd(m, q)
        assert direct == 4.0
        assert via == pytest.approx((1 - eps) + 2 * (1 + eps))
        assert direct > via  # not a metric

    def test_errors(self):
        with pytest.raises(DataError):
            di.mpbd([1, 2], [1, 2, 3])
        with pytest.raises(DataError):
            di.mpbd([1], [2])


@settings(max_examples=200)
@given(
    st.lists(st.integers(1, 5), min_size=2, max_size=10),
    st.lists(st.integers(1, 5), min_size=2, max_size=10),
)
def test_metric_axioms_all_metrics(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for name, fn in [
        ("euclidean", di.euclidean),
        ("levenshtein", di.levenshtein),
        ("dtw", di.dtw),
        ("mpbd", di.mpbd),
    ]:
        if name in ("euclidean", "mpbd") and len(p) != len(q):
            continue
        assert fn(p, q) >= 0
        assert fn(p, q) == fn(q, p)
        assert fn(p, p) == 0


class TestDistanceMatrix:
    def test_two_identical_series(self):
        col = collection([sym("A", [1, 2, 3]), sym("B", [1, 2, 3])])
        matrix = di.distance_matrix(col, "mpbd")
        assert matrix.entries.tolist() == [[0, 0], [0, 0]]

    def test_entries_match_scalar_metric(self):
        col = collection([sym("A", [1, 2, 3]), sym("B", [3, 2, 1]), sym("C", [1, 1, 5])])
        for metric, fn in [
            ("mpbd", di.mpbd),
            ("euclidean", di.euclidean),
            ("levenshtein", lambda a, b: float(di.levenshtein(a, b))),
            ("dtw", di.dtw),
        ]:
            matrix = di.distance_matrix(col, metric)
            matrix.validate()
            seqs = [s.levels for s in col.series]
            for i in range(3):
                for j in range(3):
                    assert matrix.entries[i, j] == pytest.approx(
                        fn(seqs[i], seqs[j]), abs=1e-12
                    )

    def test_deterministic_across_worker_counts(self):
        rng = np.random.default_rng(7)
        col = collection([sym(f"S{i:02d}", rng.integers(1, 6, size=12)) for i in range(9)])
        byte_images = {
            di.distance_matrix(col, "mpbd", threads=t).entries.tobytes()
            for t in (1, 2, 5, 8)
        }
        assert len(byte_images) == 1

    def test_levenshtein_requires_symbolic(self):
        col = collection([ts("A", [0.1, 0.2]), ts("B", [0.3, 0.4])])
        with pytest.raises(DataError, match="discretized"):
            di.distance_matrix(col, "levenshtein")

    def test_too_small(self):
        with pytest.raises(DataError):
            di.distance_matrix(collection([sym("A", [1, 2])]), "mpbd")

    def test_params_recorded(self):
        col = collection([sym("A", [1, 2, 3]), sym("B", [2, 2, 2])])
        matrix = di.distance_matrix(col, "mpbd", omega=3.0)
        assert matrix.params == {"series_length": 3, "omega": 3.0}


class TestNormalizeMatrix:
    def scenario_pair(self, p, q):
        return di.distance_matrix(collection([sym("A", p), sym("B", q)]), "mpbd")

    def test_table1_scenario2(self):
        raw = self.scenario_pair(
            [2, 2, 2, 1, 1, 1, 2, 2, 2, 2], [4, 4, 4, 2, 2, 2, 4, 4, 4, 4]
        )
        assert raw.entries[0, 1] == 2.0
        norm = di.normalize_matrix(raw, "table1")
        assert norm.entries[0, 1] == pytest.approx(0.10)

    def test_table1_three_opposite_moves(self):
        raw = self.scenario_pair(
            [3, 3, 2, 2, 2, 3, 3, 2, 2, 2], [3, 3, 4, 4, 4, 3, 3, 4, 4, 4]
        )
        assert raw.entries[0, 1] == 12.0
        norm = di.normalize_matrix(raw, "table1")
        assert norm.entries[0, 1] == pytest.approx(0.60)

    def test_matrix_max(self):
        raw = self.scenario_pair([1, 2, 3], [3, 2, 1])
        norm = di.normalize_matrix(raw, "matrix_max")
        assert norm.entries.max() == 1.0

    def test_all_zero_matrix_unchanged(self):
        raw = self.scenario_pair([1, 2, 3], [2, 3, 4])
        norm = di.normalize_matrix(raw, "matrix_max")
        assert norm.entries.tolist() == [[0, 0], [0, 0]]

    def test_double_normalize_rejected(self):
        raw = self.scenario_pair([1, 2, 3], [3, 2, 1])
        norm = di.normalize_matrix(raw, "matrix_max")
        with pytest.raises(DataError):
            di.normalize_matrix(norm, "matrix_max")

    def test_table1_euclidean(self):
        col = collection([ts("A", [0.1, 0.1]), ts("B", [1.0, 1.0])])
        raw = di.distance_matrix(col, "euclidean")
        norm = di.normalize_matrix(raw, "table1", value_range=0.9)
        assert norm.entries[0, 1] == pytest.approx(1.0)

    def test_roundtrip_csv(self, tmp_path):
        raw = self.scenario_pair([1, 2, 3], [3, 2, 1])
        path = tmp_path / "m.csv"
        di.write_matrix_csv(raw, path)
        back = di.read_matrix_csv(path)
        assert back.ids == raw.ids
        assert back.metric == "mpbd"
        assert np.allclose(back.entries, raw.entries)
