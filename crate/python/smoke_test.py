"""Smoke test for the gfen_py extension module.

Build first:  pip install --no-build-isolation ./crates/py
"""
import math
import random

import gfen_py as g


def close(a, b, tol=1e-6):
    return abs(a - b) <= tol


def main():
    assert g.tv1_prox([1.0, 3.0], 1.0) == [2.0, 2.0]
    z = g.tv2_prox([0.0, 4.0], 1.0)
    assert close(z[0], 4 / 3, 1e-12) and close(z[1], 8 / 3, 1e-12)

    # Two Gaussian vertices: fused once l1 reaches half the gap.
    chain = g.EdgeGraph.chain(2)
    fit = g.fit_gaussian([0.0, 4.0], chain, g.Penalties(spatial_l1=0.5), tol=1e-10)
    assert fit.converged
    assert close(fit.beta[0], 0.5) and close(fit.beta[1], 3.5), fit.beta
    fused = g.fit_gaussian([0.0, 4.0], chain, g.Penalties(spatial_l1=3.0), tol=1e-10)
    assert close(fused.beta[0], 2.0) and close(fused.beta[1], 2.0), fused.beta

    graph = g.EdgeGraph.grid(4, 6, cyclic=True)
    assert graph.n_vertices == 24
    rng = random.Random(1)
    obs = []
    for s in range(4):
        for t in range(6):
            mu = 10.0 + 5.0 * (s >= 2)
            obs.append([] if rng.random() < 0.15 else [rng.gauss(mu, 2.0) for _ in range(20)])
    pooled = [y for ys in obs for y in ys]
    tree = g.DyadicTree.build(pooled, depth=3)
    assert tree.n_splits == 7
    model = g.DensityModel.fit(graph, tree, obs, g.Penalties(0.1, 1.0, 0.1, 1.0))
    for v in range(model.n_vertices):
        assert close(sum(model.masses(v)), 1.0, 1e-12)
        lo, hi = model.quantile(v, 0.1), model.quantile(v, 0.9)
        assert lo <= model.quantile(v, 0.5) <= hi
        assert 0.0 <= model.tail_probability(v, 12.5) <= 1.0
    assert model.mean(20) > model.mean(2)

    try:
        model.quantile(0, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("quantile level outside (0, 1) accepted")
    try:
        g.Penalties(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative penalty accepted")
    assert math.isfinite(model.iqr(0))
    print("gfen_py smoke test passed")


if __name__ == "__main__":
    main()
