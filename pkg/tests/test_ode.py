import math

import numpy as np
import pytest

import graphrf as gr
from graphrf.modulation import KernelSpec
from graphrf.ode import OdeProblem, simulate_exact, simulate_grf


def decaying_scalar_problem(n_samples=40):
    """dx/dt = -x + 1 on a single node; x(t) = 1 - e^-t."""
    g = gr.Graph(1, [(0, 0, -1.0)])
    return OdeProblem(operator=g, drive=np.array([1.0]), horizon=1.0, n_samples=n_samples)


class TestOdeProblem:
    def test_drive_length_checked(self, pair_graph):
        with pytest.raises(ValueError, match="length"):
            OdeProblem(operator=pair_graph, drive=np.ones(3), horizon=1.0)

    def test_horizon_positive(self, pair_graph):
        with pytest.raises(ValueError):
            OdeProblem(operator=pair_graph, drive=np.ones(2), horizon=0.0)

    def test_tabulated_drive_interpolates(self, pair_graph):
        times = np.array([0.0, 1.0])
        values = np.array([[0.0, 0.0], [2.0, 4.0]])
        p = OdeProblem(operator=pair_graph, drive=(times, values), horizon=1.0)
        assert np.allclose(p.drive_at(0.5), [1.0, 2.0])
        assert np.allclose(p.drive_at(2.0), [2.0, 4.0])  # clamped past the end

    def test_tabulated_must_increase(self, pair_graph):
        with pytest.raises(ValueError, match="increasing"):
            OdeProblem(
                operator=pair_graph,
                drive=(np.array([0.0, 0.0]), np.zeros((2, 2))),
                horizon=1.0,
            )


class TestSimulateExact:
    def test_null_drive_gives_zero(self, karate):
        op = gr.laplacian_graph(karate, negate=True)
        p = OdeProblem(operator=op, drive=np.zeros(karate.n), horizon=1.0)
        assert np.array_equal(simulate_exact(p, n_quad=50), np.zeros(karate.n))

    def test_scalar_analytic_solution(self):
        x = simulate_exact(decaying_scalar_problem(), n_quad=400)
        assert x[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-5)

    def test_steady_state_reached(self):
        # stable operator W = -(L + 0.2 I); at large t, W x + y -> 0
        g = gr.from_text("0 1\n1 2", directed=False)
        lap = gr.laplacian_graph(g, negate=True)
        w_edges = lap.edges()
        w = gr.Graph(3, [(i, j, wt - (0.2 if i == j else 0.0)) for i, j, wt in w_edges])
        y = np.array([1.0, 0.0, 0.5])
        p = OdeProblem(operator=w, drive=y, horizon=40.0)
        x = simulate_exact(p, n_quad=4000)
        residual = np.linalg.norm(w.to_dense() @ x + y)
        assert residual < 1e-3
        steady = np.linalg.solve(w.to_dense(), -y)
        assert np.allclose(x, steady, atol=1e-3)

    def test_quadrature_refines(self):
        p = decaying_scalar_problem()
        coarse = abs(simulate_exact(p, n_quad=20)[0] - (1 - math.exp(-1)))
        fine = abs(simulate_exact(p, n_quad=640)[0] - (1 - math.exp(-1)))
        assert fine < coarse


class TestSimulateGrf:
    def test_null_drive_exactly_zero(self, karate):
        op = gr.laplacian_graph(karate, negate=True)
        p = OdeProblem(operator=op, drive=np.zeros(karate.n), horizon=1.0, n_samples=5)
        x = simulate_grf(p, m=4, seed=0)
        assert np.array_equal(x, np.zeros(karate.n))

    def test_scalar_case_converges(self):
        p = decaying_scalar_problem(n_samples=40)
        estimates = [simulate_grf(p, m=30, seed=s)[0] for s in range(30)]
        mean = np.mean(estimates)
        se = np.std(estimates, ddof=1) / math.sqrt(len(estimates))
        assert abs(mean - (1 - math.exp(-1))) <= 4 * se + 1e-3

    def test_unbiased_against_exact(self):
        """Joint tau/walk randomness: mean estimate within 4 SE entrywise."""
        g = gr.erdos_renyi(10, 0.4, seed=2)
        op = gr.laplacian_graph(g, negate=True)
        drive = np.zeros(10)
        drive[0] = 1.0
        p = OdeProblem(operator=op, drive=drive, horizon=1.0, n_samples=3)
        exact = simulate_exact(p, n_quad=600)
        runs = np.array([simulate_grf(p, m=4, seed=s, p_halt=0.3) for s in range(200)])
        mean = runs.mean(axis=0)
        se = runs.std(axis=0, ddof=1) / math.sqrt(len(runs))
        assert np.all(np.abs(mean - exact) <= 4 * se + 1e-9)

    def test_variance_shrinks_with_samples_and_walks(self):
        g = gr.erdos_renyi(8, 0.5, seed=1)
        op = gr.laplacian_graph(g, negate=True)
        drive = np.zeros(8)
        drive[0] = 1.0

        def spread(n_samples, m, seeds=24):
            p = OdeProblem(operator=op, drive=drive, horizon=1.0, n_samples=n_samples)
            runs = np.array([simulate_grf(p, m=m, seed=900 + s, p_halt=0.3) for s in range(seeds)])
            return float(runs.var(axis=0, ddof=1).sum())

        assert spread(8, 4) < spread(2, 4)
        assert spread(2, 32) < spread(2, 4)

    def test_drive_kernel_route(self):
        """Drive premultiplied by a kernel decomposition, validated against
        the exact-kernel convolution reference."""
        g = gr.erdos_renyi(8, 0.5, seed=4)
        op = gr.normalized_adjacency(g).scaled(-0.5)
        drive = np.ones(8) / 4.0
        spec = KernelSpec.diffusion(sigma=0.9)
        p = OdeProblem(operator=op, drive=drive, horizon=0.8, n_samples=3)
        exact = simulate_exact(p, n_quad=600, drive_kernel=spec)
        runs = np.array(
            [simulate_grf(p, m=8, seed=s, drive_kernel=spec, p_halt=0.3) for s in range(150)]
        )
        mean = runs.mean(axis=0)
        se = runs.std(axis=0, ddof=1) / math.sqrt(len(runs))
        assert np.all(np.abs(mean - exact) <= 4 * se + 1e-9)

    def test_deterministic_given_seed(self):
        p = decaying_scalar_problem(n_samples=6)
        a = simulate_grf(p, m=5, seed=3)
        b = simulate_grf(p, m=5, seed=3)
        assert np.array_equal(a, b)
