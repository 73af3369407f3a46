import numpy as np
import pytest

import graphrf as gr


@pytest.fixture(scope="session")
def pair_graph():
    """Two nodes joined by a unit edge."""
    return gr.from_text("0 1 1.0", directed=False)


@pytest.fixture(scope="session")
def er_small():
    return gr.bundled_graph("er_small")


@pytest.fixture(scope="session")
def karate():
    return gr.bundled_graph("karate")


@pytest.fixture(scope="session")
def small_random_graphs():
    """Five seeded connected graphs with N <= 12 for unbiasedness checks."""
    out = []
    sizes = (8, 9, 10, 11, 12)
    for k, n in enumerate(sizes):
        seed = 101 + k
        while True:
            g = gr.erdos_renyi(n, 0.35, seed=seed)
            if min(g.unweighted_degree) > 0:
                break
            seed += 1000
        out.append(g)
    return out


def gram_mean_and_se(g, f, p_halt, m, sigma, n_seeds, seed0=0):
    """Empirical mean and standard error of the Gram estimate over seeds."""
    op = gr.normalized_adjacency(g)
    acc = np.zeros((g.n, g.n))
    acc2 = np.zeros((g.n, g.n))
    for s in range(n_seeds):
        p1, p2 = gr.feature_pair(op, f, p_halt, m, sigma=sigma, seed=seed0 + s)
        k = gr.estimate_gram(p1, p2)
        acc += k
        acc2 += k * k
    mean = acc / n_seeds
    var = np.maximum(acc2 / n_seeds - mean**2, 0.0)
    return mean, np.sqrt(var / n_seeds)
