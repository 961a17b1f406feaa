import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gen2sat.analysis import (
    branching_matrix, count_paths, enumerate_hooked_chains, estimate_path_counts, first_moment_bound,
    iter_hooked_chains, path_count_bound, rho_numeric_check,
)
from gen2sat.digraph import build_digraph, is_satisfiable
from gen2sat.formula import Formula, FormulaError, Literal, ModelParams


def test_matrix_entries():
    bm = branching_matrix(ModelParams(1, 2, 3))
    assert bm.entries == ((1.0, 0.5), (1.5, 1.0))
    assert bm.rho == pytest.approx(1 + math.sqrt(3) / 2)


@pytest.mark.parametrize("alphas,rho", [((1, 1, 1), 1.0), ((2, 0, 8), 2.0), ((0, 1.3, 5), 0.65)])
def test_rho_closed_form(alphas, rho):
    closed, numeric = rho_numeric_check(ModelParams(*alphas))
    assert closed == pytest.approx(rho, abs=1e-15)
    assert numeric == pytest.approx(rho, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 50))
def test_rho_matches_eigvals(a0, a1, a2):
    p = ModelParams(a0, a1, a2)
    closed, numeric = rho_numeric_check(p)
    ev = np.linalg.eigvals(branching_matrix(p).as_array()).real.max()
    assert closed == pytest.approx(numeric, rel=1e-12, abs=1e-12)
    assert closed == pytest.approx(ev, rel=1e-9, abs=1e-9)


def test_path_bound_powers():
    p = ModelParams(1, 2, 3)
    M = branching_matrix(p).as_array()
    for s in range(1, 8):
        ref = np.linalg.matrix_power(M, s - 1) @ np.ones(2)
        assert np.allclose(path_count_bound(p, s), ref, rtol=1e-13)


def test_first_moment_subcritical_decays():
    p = ModelParams(0.5, 0.5, 0.5)
    b1, b2 = first_moment_bound(p, 1000), first_moment_bound(p, 2000)
    assert b2 == pytest.approx(b1 / 2, rel=1e-9)
    assert first_moment_bound(ModelParams(0, 0, 0), 100) == 0.0


def test_first_moment_supercritical_grows():
    p = ModelParams(2, 2, 2)
    assert first_moment_bound(p, 500) > 1e100 or math.isinf(first_moment_bound(p, 500))


def test_hooked_chain_in_contradiction():
    f = Formula(2, [(1, 2), (-1, 2), (1, -2), (-1, -2)])
    chains = enumerate_hooked_chains(f)
    assert chains
    g = build_digraph(f)
    for ch in chains:
        lits = ch.literals()
        assert all(g.has_edge(a, b) for a, b in zip(lits, lits[1:]))
        ys = {y.variable for y in ch.y}
        assert len(ys) == len(ch.y)
        assert ch.u.variable in ys and ch.v.variable in ys
        assert ch.length >= 3


def test_no_hooked_chain_without_edges():
    assert next(iter_hooked_chains(Formula(4)), None) is None


def test_hooked_chain_limits():
    with pytest.raises(FormulaError):
        next(iter_hooked_chains(Formula(21)))


def test_count_paths_small():
    f = Formula(3, [(-1, 2), (-2, 3)])
    assert count_paths(f, Literal(1), 1) == 1
    assert count_paths(f, Literal(1), 2) == 1
    assert count_paths(f, Literal(1), 3) == 0


def test_estimate_within_bound():
    p = ModelParams(2, 1, 3)
    est = estimate_path_counts(p, 150, 4, 300, 1)
    bound = path_count_bound(p, 4)
    assert np.all(est.mean <= bound + 3 * est.stderr)
    with pytest.raises(FormulaError):
        estimate_path_counts(p, 150, 7, 10, 1)
