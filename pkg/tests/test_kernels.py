import os
import subprocess
import sys

import numpy as np
import pytest

from gen2sat import _kernels, _pycore
from gen2sat.branching import FBranchingConfig
from gen2sat.digraph import build_digraph
from gen2sat.formula import ModelParams, sample_formula
from gen2sat.rng import derive_seed, make_rng

core = pytest.importorskip("gen2sat._core")


def same(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(5))
def test_scc_parity(seed):
    g = build_digraph(sample_formula(500, ModelParams(2, 1, 2), seed))
    assert same(core.scc(g.indptr, g.indices, 1000), _pycore.scc(g.indptr, g.indices, 1000))


@pytest.mark.parametrize("alphas", [(2, 2, 2), (4, 0, 4), (0.5, 3, 1)])
@pytest.mark.parametrize("coupled", [False, True])
def test_explore_parity(alphas, coupled):
    p = ModelParams(*alphas)
    n = 3000
    probs = p.probabilities(n)
    cdfs = None
    if coupled:
        c = FBranchingConfig.from_params(p)
        cdfs = (c.F0.cdf, c.F1.cdf, c.F2.cdf)
    alive = np.arange(1, n)
    for seed in range(5):
        for policy in (0, 1):
            a = core.explore(*probs, alive, n, 1, 54, policy, make_rng(seed), cdfs)
            b = _pycore.explore(*probs, alive, n, 1, 54, policy, make_rng(seed), cdfs)
            assert same(a, b)


def test_traverse_parity():
    c = FBranchingConfig.from_params(ModelParams(3, 3, 3))
    for seed in range(5):
        a = core.traverse(c.F0.cdf, c.F1.cdf, c.F2.cdf, seed % 2, 500, make_rng(seed))
        b = _pycore.traverse(c.F0.cdf, c.F1.cdf, c.F2.cdf, seed % 2, 500, make_rng(seed))
        assert same(a, b)


def test_inv_binomial_matches_scipy_quantiles():
    from scipy import stats
    for N, p in ((100, 0.03), (5000, 0.0002), (10, 0.5)):
        for u in np.linspace(0.001, 0.999, 41):
            k = core.inv_binomial(N, p, u)
            assert k == _pycore.inv_binomial(N, p, u)
            # smallest k with cdf(k) > u, up to rounding at the boundaries
            ref = int(stats.binom.ppf(u, N, p))
            assert abs(k - ref) <= 1


def test_inv_binomial_overflow():
    with pytest.raises(OverflowError):
        _pycore.inv_binomial(10**6, 0.9, 0.5)
    with pytest.raises(OverflowError):
        core.inv_binomial(10**6, 0.9, 0.5)


def test_rng_streams_independent_of_order():
    a = make_rng(5, 1, 2).random(3)
    make_rng(5, 0, 0).random(10)
    assert np.array_equal(a, make_rng(5, 1, 2).random(3))
    assert derive_seed(5, 1) != derive_seed(5, 2)


def test_pure_python_env_switch():
    code = "from gen2sat import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, GEN2SAT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
