import itertools
import math

import numpy as np
import pytest

from movclust import clustering as cl
from movclust.distances import DistanceMatrix
from movclust.errors import DataError


def partition_of(assignment):
    """Label-free view: frozenset of frozensets of member ids."""
    return frozenset(
        frozenset(assignment.members(c)) for c in range(1, assignment.k + 1)
    )


def wcss_of(X, groups):
    total = 0.0
    for g in groups:
        mu = X[list(g)].mean(axis=0)
        total += ((X[list(g)] - mu) ** 2).sum()
    return total


def best_two_partition(X):
    """Exhaustive minimum-WCSS split into two non-empty clusters."""
    n = len(X)
    best, best_groups = math.inf, None
    for bits in range(1, 2 ** (n - 1)):
        left = [i for i in range(n) if bits & (1 << i)]
        right = [i for i in range(n) if not bits & (1 << i)]
        if not left or not right:
            continue
        w = wcss_of(X, [left, right])
        if w < best:
            best, best_groups = w, (left, right)
    return best, best_groups


def matrix_from(D, ids=None):
    D = np.asarray(D, dtype=float)
    ids = ids or [f"S{i}" for i in range(len(D))]
    return DistanceMatrix(ids=ids, entries=D, metric="mpbd")


class TestKmeans:
    def test_two_separated_pairs(self):
        X = np.array([[0.0], [0.0], [10.0], [10.0]])
        out = cl.kmeans(X, list("abcd"), k=2, seed=0)
        assert partition_of(out) == {frozenset("ab"), frozenset("cd")}
        assert out.objective == 0.0

    def test_k_equals_n(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        out = cl.kmeans(X, list("abcd"), k=4, seed=0)
        assert out.objective == 0.0
        assert all(len(out.members(c)) == 1 for c in range(1, 5))

    def test_matches_exhaustive_two_blob(self):
        rng = np.random.default_rng(10)
        for trial in range(10):
            X = np.concatenate(
                [rng.normal(0, 0.3, size=(3, 2)), rng.normal(5, 0.3, size=(3, 2))]
            )
            ids = [f"p{i}" for i in range(6)]
            out = cl.kmeans(X, ids, k=2, seed=trial)
            best, (left, right) = best_two_partition(X)
            expect = {frozenset(ids[i] for i in left), frozenset(ids[i] for i in right)}
            assert partition_of(out) == expect
            assert out.objective == pytest.approx(best, rel=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(12, 4))
        ids = [f"p{i}" for i in range(12)]
        a = cl.kmeans(X, ids, k=3, seed=99)
        b = cl.kmeans(X, ids, k=3, seed=99)
        assert a.labels == b.labels
        assert a.objective == b.objective

    def test_k_out_of_range(self):
        X = np.zeros((3, 1))
        with pytest.raises(DataError):
            cl.kmeans(X, list("abc"), k=4, seed=0)
        with pytest.raises(DataError):
            cl.kmeans(X, list("abc"), k=1, seed=0)

    def test_no_empty_clusters(self):
        # 11 coincident points and one far away force empty-cluster repair
        X = np.array([[0.0]] * 11 + [[100.0]])
        out = cl.kmeans(X, [f"p{i}" for i in range(12)], k=3, seed=1)
        assert all(out.members(c) for c in range(1, 4))


class TestKmedoids:
    def test_two_zero_blocks(self):
        D = np.zeros((4, 4))
        D[:2, 2:] = 9.0
        D[2:, :2] = 9.0
        out = cl.kmedoids(matrix_from(D, list("abcd")), k=2, seed=0)
        assert partition_of(out) == {frozenset("ab"), frozenset("cd")}

    def test_k_equals_n(self):
        D = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0)))
        out = cl.kmedoids(matrix_from(D), k=4, seed=0)
        assert out.objective == 0.0

    def test_matches_exhaustive_medoid_search(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            points = np.concatenate(
                [rng.normal(0, 0.4, size=3), rng.normal(8, 0.4, size=3)]
            )
            D = np.abs(np.subtract.outer(points, points))
            out = cl.kmedoids(matrix_from(D), k=2, seed=trial)
            best = min(
                (
                    sum(min(D[i, a], D[i, b]) for i in range(6))
                    for a, b in itertools.combinations(range(6), 2)
                )
            )
            assert out.objective == pytest.approx(best, rel=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(13)
        points = rng.normal(size=10)
        D = np.abs(np.subtract.outer(points, points))
        a = cl.kmedoids(matrix_from(D), k=3, seed=5)
        b = cl.kmedoids(matrix_from(D), k=3, seed=5)
        assert a.labels == b.labels


class TestAgglomerative:
    def test_two_series(self):
        D = np.array([[0.0, 3.0], [3.0, 0.0]])
        dendrogram = cl.agglomerative(matrix_from(D, ["a", "b"]), "single")
        assert dendrogram.merges == [(("a",), ("b",), 3.0, 2)]

    def test_collinear_single_linkage(self):
        points = np.array([0.0, 1.0, 10.0])
        D = np.abs(np.subtract.outer(points, points))
        dendrogram = cl.agglomerative(matrix_from(D, ["a", "b", "c"]), "single")
        assert dendrogram.heights() == [1.0, 9.0]
        assert dendrogram.merges[0][:2] == (("a",), ("b",))
        assert dendrogram.merges[1][:2] == (("a", "b"), ("c",))

    def test_ward_hand_trace(self):
        # 1-D points a=0, b=1, c=5, d=7; Lance-Williams Ward distances by hand:
        # merge (a,b) at 1; then (c,d) at 2; final at sqrt(60.5)
        points = np.array([0.0, 1.0, 5.0, 7.0])
        D = np.abs(np.subtract.outer(points, points))
        dendrogram = cl.agglomerative(matrix_from(D, list("abcd")), "ward")
        assert [m[:2] for m in dendrogram.merges] == [
            (("a",), ("b",)),
            (("c",), ("d",)),
            (("a", "b"), ("c", "d")),
        ]
        assert dendrogram.heights() == pytest.approx([1.0, 2.0, math.sqrt(60.5)])

    def test_average_linkage_update(self):
        points = np.array([0.0, 2.0, 9.0])
        D = np.abs(np.subtract.outer(points, points))
        dendrogram = cl.agglomerative(matrix_from(D, list("abc")), "average")
        # after merging (a,b) at 2, average distance to c is (9 + 7) / 2 = 8
        assert dendrogram.heights() == [2.0, 8.0]

    @pytest.mark.parametrize("linkage", cl.LINKAGES)
    def test_heights_monotone(self, linkage):
        rng = np.random.default_rng(14)
        points = rng.normal(size=(12, 3))
        D = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))
        heights = cl.agglomerative(matrix_from(D), linkage).heights()
        assert all(a <= b + 1e-12 for a, b in zip(heights, heights[1:]))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(15)
        points = rng.normal(size=(8, 2))
        D = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))
        ids = [f"s{i}" for i in range(8)]
        base = cl.cut_dendrogram(cl.agglomerative(matrix_from(D, ids), "ward"), 3)
        perm = rng.permutation(8)
        shuffled = matrix_from(D[np.ix_(perm, perm)], [ids[i] for i in perm])
        other = cl.cut_dendrogram(cl.agglomerative(shuffled, "ward"), 3)
        assert partition_of(base) == partition_of(other)


class TestCutDendrogram:
    def small_dendrogram(self):
        points = np.array([0.0, 1.0, 10.0])
        D = np.abs(np.subtract.outer(points, points))
        return cl.agglomerative(matrix_from(D, list("abc")), "single")

    def test_k1_everything_together(self):
        out = cl.cut_dendrogram(self.small_dendrogram(), 1)
        assert partition_of(out) == {frozenset("abc")}

    def test_kn_singletons(self):
        out = cl.cut_dendrogram(self.small_dendrogram(), 3)
        assert partition_of(out) == {frozenset("a"), frozenset("b"), frozenset("c")}

    def test_k2_from_trace(self):
        out = cl.cut_dendrogram(self.small_dendrogram(), 2)
        assert partition_of(out) == {frozenset("ab"), frozenset("c")}

    def test_k_out_of_range(self):
        with pytest.raises(DataError):
            cl.cut_dendrogram(self.small_dendrogram(), 0)
        with pytest.raises(DataError):
            cl.cut_dendrogram(self.small_dendrogram(), 4)

    def test_nesting_refinement(self):
        rng = np.random.default_rng(16)
        points = rng.normal(size=(10, 2))
        D = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))
        dendrogram = cl.agglomerative(matrix_from(D), "ward")
        for k in range(2, 11):
            fine = partition_of(cl.cut_dendrogram(dendrogram, k))
            coarse = partition_of(cl.cut_dendrogram(dendrogram, k - 1))
            for fine_cluster in fine:
                assert any(fine_cluster <= c for c in coarse)

    def test_labels_by_decreasing_size(self):
        points = np.array([0.0, 0.1, 0.2, 9.0])
        D = np.abs(np.subtract.outer(points, points))
        out = cl.cut_dendrogram(cl.agglomerative(matrix_from(D, list("abcd")), "single"), 2)
        assert out.members(1) == ["a", "b", "c"]
        assert out.members(2) == ["d"]


class TestAssignmentContract:
    def test_nonempty_cluster_invariant(self):
        with pytest.raises(DataError):
            cl.ClusterAssignment(labels={"a": 1, "b": 1}, k=2, algorithm="x")

    def test_roundtrip_csv(self, tmp_path):
        X = np.array([[0.0], [0.0], [5.0], [5.0]])
        out = cl.kmeans(X, list("abcd"), k=2, seed=0)
        path = tmp_path / "assignment.csv"
        cl.write_assignment_csv(out, path, {"metric": "mpbd"})
        back = cl.read_assignment_csv(path)
        assert back.labels == out.labels
        assert back.k == out.k
        assert back.objective == out.objective

    def test_dendrogram_csv(self, tmp_path):
        D = np.array([[0.0, 2.0], [2.0, 0.0]])
        dendrogram = cl.agglomerative(matrix_from(D, ["a", "b"]), "single")
        path = tmp_path / "dendrogram.csv"
        cl.write_dendrogram_csv(dendrogram, path)
        assert path.read_text() == "step,left,right,height,size\n1,a,b,2,2\n"
