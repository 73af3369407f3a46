import numpy as np
import pytest
import scipy.sparse as sparse

import graphrf as gr
from graphrf.modulation import KernelSpec
from graphrf.walker import FeatureMatrix


class TestSampleFeatures:
    def test_lazy_walker_gives_identity(self, er_small):
        op = gr.normalized_adjacency(er_small)
        phi = gr.sample_features(op, gr.indicator_modulation(), 0.4, 9, sigma=1.0, seed=3)
        assert np.array_equal(phi.rows, np.eye(er_small.n))

    def test_isolated_node_row_is_f0_basis_vector(self):
        g = gr.Graph(3, [(0, 1, 1.0), (1, 0, 1.0)])
        f = gr.ModulationFn.from_table([2.5, 1.0, 0.5])
        for seed in (0, 1, 99):
            phi = gr.sample_features(g, f, 0.3, 11, sigma=1.0, seed=seed)
            assert np.array_equal(phi.rows[2], [0.0, 0.0, 2.5])

    def test_dead_end_mid_walk(self):
        # directed path 0 -> 1; walks from 0 deposit at 0 then possibly at 1, never crash
        g = gr.Graph(2, [(0, 1, 1.0)])
        f = gr.ModulationFn.from_table([1.0, 1.0, 1.0])
        phi = gr.sample_features(g, f, 0.5, 50, sigma=1.0, seed=7)
        assert phi.rows[0, 0] == 1.0  # every walk deposits f(0) at the start
        assert phi.rows[0, 1] > 0.0  # some walks reach the dead end
        assert np.array_equal(phi.rows[1], [0.0, 1.0])

    def test_lazy_pair_unbiased_for_coefficient_series(self):
        """Asymmetric (coefficients, indicator) pair: the Gram estimate's
        mean matches the truncated coefficient series entrywise, 4 SE."""
        g = gr.erdos_renyi(8, 0.45, seed=3)
        op = gr.normalized_adjacency(g)
        spec = KernelSpec.d_regularised(d=2, sigma=0.8)
        coeffs = gr.taylor_coeffs(spec, 60)
        f1 = gr.ModulationFn.from_table(coeffs.values)
        f2 = gr.indicator_modulation()
        exact = gr.exact_taylor_kernel(g, spec).matrix
        grams = []
        for s in range(200):
            p1, p2 = gr.feature_pair(op, f1, 0.5, 8, sigma=1.0, seed=s, f2=f2)
            grams.append(gr.estimate_gram(p1, p2))
        grams = np.array(grams)
        mean = grams.mean(axis=0)
        se = grams.std(axis=0, ddof=1) / np.sqrt(len(grams))
        assert np.all(np.abs(mean - exact) <= 4.0 * se + 1e-9)

    def test_expectation_matches_exponential_oracle(self, pair_graph):
        """Mean Gram estimate vs the exact matrix exponential, 3 SE."""
        op = gr.normalized_adjacency(pair_graph)
        f, _ = gr.walk_plan(KernelSpec.diffusion(sigma=1.0))
        sigma_walk = 0.5
        exact = gr.expm(sigma_walk * op.to_dense())
        grams = []
        for s in range(50):
            p1, p2 = gr.feature_pair(op, f, 0.1, 2000, sigma=sigma_walk, seed=s)
            grams.append(gr.estimate_gram(p1, p2))
        grams = np.array(grams)
        mean = grams.mean(axis=0)
        se = grams.std(axis=0, ddof=1) / np.sqrt(len(grams))
        assert np.all(np.abs(mean - exact) <= 3.0 * se + 1e-12)

    def test_validation(self, pair_graph):
        f = gr.indicator_modulation()
        with pytest.raises(ValueError):
            gr.sample_features(pair_graph, f, 0.0, 4)
        with pytest.raises(ValueError):
            gr.sample_features(pair_graph, f, 0.5, 0)
        with pytest.raises(ValueError):
            gr.sample_features(pair_graph, f, 0.5, 4, sigma=0.0)


class TestDeterminism:
    def test_thread_counts_agree(self, er_small):
        op = gr.normalized_adjacency(er_small)
        f, scale = gr.walk_plan(KernelSpec.diffusion(sigma=0.7))
        base = gr.sample_features(op, f, 0.3, 12, sigma=scale, seed=42, threads=None)
        for threads in (1, 2, 5):
            again = gr.sample_features(op, f, 0.3, 12, sigma=scale, seed=42, threads=threads)
            assert np.array_equal(base.rows, again.rows)

    def test_repeat_runs_identical(self, karate):
        op = gr.normalized_adjacency(karate)
        f = gr.heat_modulation(0.4)
        a = gr.sample_features(op, f, 0.2, 6, sigma=1.0, seed=11)
        b = gr.sample_features(op, f, 0.2, 6, sigma=1.0, seed=11)
        assert np.array_equal(a.rows, b.rows)

    def test_seeds_differ(self, karate):
        op = gr.normalized_adjacency(karate)
        f = gr.heat_modulation(0.4)
        a = gr.sample_features(op, f, 0.2, 6, sigma=1.0, seed=11)
        b = gr.sample_features(op, f, 0.2, 6, sigma=1.0, seed=12)
        assert not np.array_equal(a.rows, b.rows)


class TestScalingEquivalence:
    def test_power_of_two_scale_is_bit_exact(self, er_small):
        """Moving a power-of-two factor between the walked matrix and the
        modulation function does not change a single bit."""
        op = gr.normalized_adjacency(er_small)
        f, _ = gr.walk_plan(KernelSpec.diffusion(sigma=1.0))
        beta = 0.5
        a = gr.sample_features(op, f, 0.25, 15, sigma=0.75 * beta, seed=5)
        b = gr.sample_features(op, f.scaled(beta), 0.25, 15, sigma=0.75, seed=5)
        assert np.array_equal(a.rows, b.rows)

    def test_general_scale_matches_to_rounding(self, er_small):
        op = gr.normalized_adjacency(er_small)
        f, _ = gr.walk_plan(KernelSpec.diffusion(sigma=1.0))
        beta = 0.3
        a = gr.sample_features(op, f, 0.25, 15, sigma=beta, seed=5)
        b = gr.sample_features(op, f.scaled(beta), 0.25, 15, sigma=1.0, seed=5)
        assert np.allclose(a.rows, b.rows, rtol=1e-12, atol=1e-15)


class TestLengthFeatureTensor:
    def test_zeroth_slice_is_identity(self, karate):
        op = gr.normalized_adjacency(karate)
        t = gr.sample_length_features(op, 0.5, 5, sigma=1.0, seed=0, l_max=10)
        assert np.array_equal(t.per_length[0], np.eye(karate.n))

    def test_reconstruction_is_bit_exact(self, er_small):
        op = gr.normalized_adjacency(er_small)
        f, scale = gr.walk_plan(KernelSpec.d_regularised(d=2, sigma=0.8))
        direct = gr.sample_features(op, f, 0.3, 10, sigma=scale, seed=21)
        t = gr.sample_length_features(op, 0.3, 10, sigma=scale, seed=21, l_max=64)
        assert t.overflow_count == 0
        assert np.array_equal(t.contract(f).rows, direct.rows)

    def test_reconstruction_with_overflow_still_exact(self, er_small):
        # tiny l_max forces the overflow path; ascending-length contraction
        # keeps the arithmetic identical
        op = gr.normalized_adjacency(er_small)
        f = gr.heat_modulation(0.8)
        direct = gr.sample_features(op, f, 0.3, 10, sigma=1.0, seed=2)
        t = gr.sample_length_features(op, 0.3, 10, sigma=1.0, seed=2, l_max=2)
        assert t.overflow_count > 0
        assert t.max_length > 2
        assert np.array_equal(t.contract(f).rows, direct.rows)

    def test_identical_trajectories_with_sample_features(self, er_small):
        # indicator modulation reads only length-0 loads; both entry points
        # must see the same walks for the same seed
        op = gr.normalized_adjacency(er_small)
        t = gr.sample_length_features(op, 0.4, 7, sigma=1.0, seed=13, l_max=40)
        phi = gr.sample_features(op, gr.indicator_modulation(), 0.4, 7, sigma=1.0, seed=13)
        assert np.array_equal(t.per_length[0], phi.rows)

    def test_slice_expectation_matches_matrix_powers(self, pair_graph):
        """E[slice l] = (sigma W)^l entrywise, 3 SE over seeds."""
        op = gr.normalized_adjacency(pair_graph)
        sigma = 0.6
        w = sigma * op.to_dense()
        slices = []
        for s in range(60):
            t = gr.sample_length_features(op, 0.2, 200, sigma=sigma, seed=s, l_max=6)
            slices.append(t.per_length[:4])
        slices = np.array(slices)
        mean = slices.mean(axis=0)
        se = slices.std(axis=0, ddof=1) / np.sqrt(len(slices))
        for ell in range(4):
            expect = np.linalg.matrix_power(w, ell)
            assert np.all(np.abs(mean[ell] - expect) <= 3.0 * se[ell] + 1e-12)

    def test_contract_values_requires_tail_for_overflow(self, er_small):
        op = gr.normalized_adjacency(er_small)
        t = gr.sample_length_features(op, 0.3, 10, sigma=1.0, seed=2, l_max=1)
        assert t.overflow_count > 0
        with pytest.raises(ValueError, match="f_tail"):
            t.contract_values(np.ones(2))


class TestSparseRows:
    def test_large_graph_path_matches_dense(self, er_small, monkeypatch):
        """Above the dense cutoff rows switch to CSR with identical values."""
        import graphrf.walker as walker_mod

        op = gr.normalized_adjacency(er_small)
        f = gr.heat_modulation(0.4)
        dense = gr.sample_features(op, f, 0.3, 8, sigma=1.0, seed=6)
        monkeypatch.setattr(walker_mod, "DENSE_LIMIT", 4)
        sparse_phi = gr.sample_features(op, f, 0.3, 8, sigma=1.0, seed=6)
        assert not sparse_phi.is_dense
        assert np.array_equal(sparse_phi.toarray(), dense.rows)
        v = np.arange(er_small.n, dtype=float)
        assert np.allclose(sparse_phi.rows @ v, dense.rows @ v, rtol=1e-14)


class TestFeaturePair:
    def test_child_seeds_distinct(self, er_small):
        op = gr.normalized_adjacency(er_small)
        f = gr.heat_modulation(0.3)
        p1, p2 = gr.feature_pair(op, f, 0.5, 4, sigma=1.0, seed=0)
        assert p1.seed != p2.seed
        assert not np.array_equal(p1.rows, p2.rows)

    def test_asymmetric_pair_functions(self, er_small):
        op = gr.normalized_adjacency(er_small)
        f1 = gr.ModulationFn.from_table([1.0, 0.5, 0.25])
        f2 = gr.indicator_modulation()
        p1, p2 = gr.feature_pair(op, f1, 0.5, 4, sigma=1.0, seed=0, f2=f2)
        assert np.array_equal(p2.rows, np.eye(er_small.n))  # lazy side exact
        assert not np.array_equal(p1.rows, np.eye(er_small.n))


class TestSerialization:
    def test_dense_round_trip(self, tmp_path, er_small):
        op = gr.normalized_adjacency(er_small)
        f = gr.heat_modulation(0.4)
        phi = gr.sample_features(op, f, 0.3, 7, sigma=1.0, seed=9)
        path = tmp_path / "phi.bin"
        phi.save(path)
        back = FeatureMatrix.load(path)
        assert np.array_equal(back.rows, phi.rows)
        assert (back.m, back.p_halt, back.sigma, back.seed) == (
            phi.m,
            phi.p_halt,
            phi.sigma,
            phi.seed,
        )

    def test_sparse_round_trip(self, tmp_path):
        rows = sparse.csr_matrix(np.array([[0.0, 1.5], [2.0, 0.0]]))
        phi = FeatureMatrix(rows=rows, m=3, p_halt=0.5, sigma=1.0, seed=4)
        path = tmp_path / "phi.bin"
        phi.save(path)
        back = FeatureMatrix.load(path)
        assert not back.is_dense
        assert np.array_equal(back.toarray(), phi.toarray())

    def test_csv_export(self, tmp_path, pair_graph):
        phi = gr.sample_features(pair_graph, gr.indicator_modulation(), 0.5, 2, sigma=1.0, seed=0)
        path = tmp_path / "phi.csv"
        phi.to_csv(path)
        assert np.array_equal(np.loadtxt(path, delimiter=","), np.eye(2))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(ValueError, match="feature-matrix"):
            FeatureMatrix.load(path)
