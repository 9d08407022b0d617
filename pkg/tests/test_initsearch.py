import numpy as np
import pytest

from clvq.arrangement import Arrangement
from clvq.initsearch import (
    CrossoverPolicy,
    GeneticParams,
    crossover,
    dissimilarity,
    genetic_init,
    mse_oracle,
    mutate,
    random_init,
)
from clvq.source import SampleStream, SourceModel

G2, G3 = SourceModel.gaussian(2), SourceModel.gaussian(3)


def rows_as_set(arr):
    return {tuple(np.round(r, 12)) for r in arr.coefficients}


class TestRandomInit:
    def test_shape_and_norms(self):
        arr = random_init(G3, 4, SampleStream(G3, 0))
        assert (arr.k, arr.d) == (4, 3)
        assert np.all(np.linalg.norm(arr.weights, axis=1) > 0)

    def test_generating_points_on_hyperplanes(self):
        stream = SampleStream(G2, 5)
        arr = random_init(G2, 1, stream)
        pts = SampleStream(G2, 5).sample(2)
        res = np.abs(arr.values(pts))
        assert np.all(res <= 1e-9 * np.linalg.norm(arr.weights[0]))

    def test_residuals_in_three_dimensions(self):
        arr = random_init(G3, 3, SampleStream(G3, 8))
        pts = SampleStream(G3, 8).sample(9).reshape(3, 3, 3)
        for j in range(3):
            assert np.all(np.abs(arr.values(pts[j])[:, j]) <= 1e-9)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            random_init(G2, 0, SampleStream(G2, 0))


class TestDissimilarity:
    def test_identical(self):
        assert dissimilarity(([1.0, 0.0], 0.3), ([1.0, 0.0], 0.3)) == 0.0

    def test_orthogonal_through_origin(self):
        assert dissimilarity(([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0)) == pytest.approx(0.0)

    def test_parallel_is_zero(self):
        assert dissimilarity(([1.0, 0.0], -1.0), ([1.0, 0.0], 1.0)) == pytest.approx(0.0)

    def test_angle_times_distance(self):
        # x1 = 1 and x2 = 1: nearest points (1,0) and (0,1)
        got = dissimilarity([1.0, 0.0, -1.0], [0.0, 1.0, -1.0])
        assert got == pytest.approx(np.pi / 2 * np.sqrt(2))

    def test_scale_invariant(self):
        a = dissimilarity([1.0, 2.0, 0.5], [-1.0, 0.3, 0.2])
        b = dissimilarity([3.0, 6.0, 1.5], [-2.0, 0.6, 0.4])
        assert a == pytest.approx(b)


class TestCrossover:
    def test_identical_parents(self):
        a = random_init(G2, 4, SampleStream(G2, 0))
        for seed in range(5):
            child = crossover(a, a, "dissimilarity_pairing", np.random.default_rng(seed))
            assert rows_as_set(child) == rows_as_set(a)

    def test_identical_central_parents(self):
        # every pair has zero dissimilarity; ties must still pair equal rows
        a = Arrangement([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [0.0, 0.0, 0.0])
        child = crossover(a, a, "dissimilarity_pairing", np.random.default_rng(0))
        assert rows_as_set(child) == rows_as_set(a)

    @pytest.mark.parametrize("policy", list(CrossoverPolicy))
    def test_rows_come_from_parents(self, policy):
        a = random_init(G2, 5, SampleStream(G2, 0))
        b = random_init(G2, 5, SampleStream(G2, 1))
        child = crossover(a, b, policy, np.random.default_rng(3))
        assert child.k == 5
        assert rows_as_set(child) <= rows_as_set(a) | rows_as_set(b)

    def test_dissimilarity_pairs_matching_rows(self):
        a = Arrangement([[1.0, 0.0], [0.0, 1.0]], [0.5, -0.5])
        b = Arrangement([[0.0, 1.0], [1.0, 0.0]], [-0.6, 0.4])
        for seed in range(10):
            child = crossover(a, b, "dissimilarity_pairing", np.random.default_rng(seed))
            normals = {tuple(np.abs(r)) for r in child.weights}
            assert normals == {(1.0, 0.0), (0.0, 1.0)}

    def test_shape_mismatch(self):
        a = random_init(G2, 2, SampleStream(G2, 0))
        b = random_init(G2, 3, SampleStream(G2, 0))
        with pytest.raises(ValueError):
            crossover(a, b, "random_pairing", np.random.default_rng(0))


class TestMutate:
    def test_small_sigma(self):
        a = random_init(G2, 3, SampleStream(G2, 0))
        sigma = 1e-6
        out = mutate(a, sigma, np.random.default_rng(0))
        assert np.all(np.abs(out.coefficients - a.coefficients) <= 5 * sigma * np.abs(a.coefficients) + 1e-15)

    def test_unbiased(self):
        a = Arrangement([[1.0, -2.0]], [0.5])
        rng = np.random.default_rng(1)
        n, sigma = 10_000, 0.2
        out = np.array([mutate(a, sigma, rng).coefficients for _ in range(n)])
        band = 3 * sigma * np.abs(a.coefficients) / np.sqrt(n)
        assert np.all(np.abs(out.mean(0) - a.coefficients) <= band)
        assert out.shape[1:] == (1, 3)

    def test_changes_coefficients(self):
        a = random_init(G2, 3, SampleStream(G2, 0))
        out = mutate(a, 0.2, np.random.default_rng(0))
        assert np.all(out.coefficients != a.coefficients)

    def test_bad_sigma(self):
        a = random_init(G2, 1, SampleStream(G2, 0))
        with pytest.raises(ValueError):
            mutate(a, 0.0, np.random.default_rng(0))


class TestGenetic:
    def test_params_validation(self):
        with pytest.raises(ValueError):
            GeneticParams(keep_fraction=0)
        with pytest.raises(ValueError):
            GeneticParams(pool_size=1)
        assert GeneticParams().n_keep == 8

    def test_small_run(self):
        params = GeneticParams(pool_size=6, generations=5)
        best, trace = genetic_init(G2, 2, params, None, SampleStream(G2, 0))
        assert (best.k, best.d) == (2, 2)
        assert len(trace) == 5
        assert np.all(np.diff(trace.best) <= 0)
        assert all(b <= m for b, m in zip(trace.best, trace.mean))
        assert trace.to_csv().splitlines()[0] == "generation,best_mse,mean_mse"

    def test_best_matches_trace(self):
        oracle = mse_oracle(G2)
        params = GeneticParams(pool_size=4, generations=3)
        seen = []

        def recording(arr, seed):
            v = oracle(arr, seed)
            seen.append((v, arr))
            return v

        best, trace = genetic_init(G2, 1, params, recording, SampleStream(G2, 2))
        v, arr = min(seen, key=lambda p: p[0])
        assert trace.best[-1] == v
        assert best == arr

    def test_deterministic(self):
        params = GeneticParams(pool_size=4, generations=3)
        a = genetic_init(G2, 2, params, None, SampleStream(G2, 7))
        b = genetic_init(G2, 2, params, None, SampleStream(G2, 7))
        assert a[0] == b[0]
        assert a[1].pool_hashes == b[1].pool_hashes

    def test_per_dimension_oracle(self):
        arr = random_init(G3, 2, SampleStream(G3, 0))
        total = mse_oracle(G3)(arr, 5)
        assert mse_oracle(G3, per_dimension=True)(arr, 5) == pytest.approx(total / 3)
