import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gen2sat.formula import (
    Clause, DimacsError, Formula, FormulaError, LazyFormula, Literal, ModelParams, Provenance,
    clause_space_sizes, evaluate, read_dimacs, sample_formula, write_dimacs,
)


def test_literal_roundtrip():
    for d in (1, -1, 7, -12):
        lit = Literal.from_int(d)
        assert int(lit) == d
        assert Literal.from_index(lit.index) == lit
        assert lit.complement().index == lit.index ^ 1
    assert str(Literal(3, False)) == "~x3"
    with pytest.raises(FormulaError):
        Literal.from_int(0)


def test_clause_canonical_and_type():
    c = Clause.of(-3, 1)
    assert c.as_ints() == (1, -3)
    assert c == Clause.of(1, -3)
    assert Clause.of(1, 2).clause_type == 2
    assert Clause.of(-1, 2).clause_type == 1
    assert Clause.of(-1, -2).clause_type == 0
    with pytest.raises(FormulaError):
        Clause.of(2, -2)


def test_params_validation():
    p = ModelParams(1, 2, 3)
    assert p.alphas == (1.0, 2.0, 3.0)
    assert p.alpha_max == 3.0
    assert p.rho == pytest.approx(0.5 * (2 + math.sqrt(3)))
    assert ModelParams.parse("0.5, 1,2") == ModelParams(0.5, 1, 2)
    for bad in ((-1, 0, 0), (math.inf, 0, 0), (math.nan, 1, 1)):
        with pytest.raises(FormulaError):
            ModelParams(*bad)
    with pytest.raises(FormulaError):
        ModelParams.parse("1,2")
    with pytest.raises(FormulaError):
        ModelParams(10, 0, 0).probabilities(2)
    assert ModelParams(2, 2, 2).probabilities(10) == (0.1, 0.1, 0.1)


def test_formula_dedup_and_validation():
    f = Formula(3, [(1, 2), (2, 1), (-1, 3)])
    assert f.m == 2
    assert Clause.of(2, 1) in f
    assert f.type_counts() == (0, 1, 1)
    with pytest.raises(FormulaError):
        Formula(2, [(1, 3)])
    with pytest.raises(FormulaError):
        Formula(2, [(1, -1)])
    with pytest.raises(FormulaError):
        Formula(2, [(0, 1)])
    assert not f.clause_array.flags.writeable


def test_evaluate():
    f = Formula(2, [(1, 2), (-1, 2)])
    assert evaluate(f, [False, True])
    assert not evaluate(f, [True, False])
    with pytest.raises(FormulaError):
        evaluate(f, [True])


def test_clause_space_sizes():
    assert clause_space_sizes(4) == (6, 12, 6)


def test_sample_deterministic_and_valid():
    p = ModelParams(1.0, 2.0, 3.0)
    a = sample_formula(200, p, 5)
    b = sample_formula(200, p, 5)
    assert a == b
    assert a != sample_formula(200, p, 6)
    cl = a.clause_array
    assert np.all(np.abs(cl[:, 0]) != np.abs(cl[:, 1]))
    assert np.all((np.abs(cl) >= 1) & (np.abs(cl) <= 200))


def test_sample_small_n_enumerates_all_clauses():
    # alpha_i = 2n makes every clause present
    f = sample_formula(4, ModelParams(8, 8, 8), 0)
    assert f.type_counts() == clause_space_sizes(4)


def test_sample_type_counts_match_expectation():
    n, p = 300, ModelParams(1.0, 0.5, 3.0)
    sizes = np.array(clause_space_sizes(n))
    probs = np.array(p.probabilities(n))
    counts = np.array([sample_formula(n, p, s).type_counts() for s in range(400)])
    mean = counts.mean(axis=0)
    se = np.sqrt(sizes * probs * (1 - probs) / len(counts))
    assert np.all(np.abs(mean - sizes * probs) < 4 * se)


def test_sample_pair_uniformity():
    # every one of the 12 type-1 clauses on 4 variables is equally likely
    n, p = 4, ModelParams(0.0, 2.0, 0.0)
    hits = {}
    for s in range(3000):
        for c in sample_formula(n, p, s):
            hits[c] = hits.get(c, 0) + 1
    assert len(hits) == 12
    freq = np.array(list(hits.values())) / 3000
    assert np.all(np.abs(freq - 0.25) < 0.04)


def test_dimacs_roundtrip():
    f = sample_formula(30, ModelParams(2, 2, 2), 3)
    g = read_dimacs(write_dimacs(f, comments=["hello"]))
    assert f == g


@pytest.mark.parametrize("text", [
    "1 2 0\n",
    "p cnf 2 1\np cnf 2 1\n1 2 0\n",
    "p cnf 2 1\n1 0\n",
    "p cnf 2 1\n1 1 0\n",
    "p cnf 2 1\n1 3 0\n",
    "p cnf 2 1\n1 2\n",
    "p cnf 2 2\n1 2 0\n",
    "p cnf 2 2\n1 2 0\n2 1 0\n",
])
def test_dimacs_rejects(text):
    with pytest.raises(DimacsError):
        read_dimacs(text)


def test_provenance_roundtrip():
    p = ModelParams(1, 2, 3)
    f = sample_formula(10, p, 9)
    pr = Provenance.of(f, p)
    assert Provenance.from_json(pr.to_json()) == pr
    assert pr.params == p
    assert sample_formula(pr.n, pr.params, pr.seed) == f


def test_lazy_formula_validates():
    with pytest.raises(FormulaError):
        LazyFormula(1, ModelParams(1, 1, 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8)), max_size=20))
def test_formula_canonical_property(n, pairs):
    pairs = [(a, b) for a, b in pairs if a and b and abs(a) <= n and abs(b) <= n and abs(a) != abs(b)]
    f = Formula(n, pairs)
    g = Formula(n, [(b, a) for a, b in reversed(pairs)])
    assert f == g and hash(f) == hash(g)
    assert f.m == len({Clause.of(a, b) for a, b in pairs})
