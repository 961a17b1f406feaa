"""Branching matrix spectra, the first-moment unsatisfiability bound and hooked chains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .digraph import build_digraph
from .formula import Formula, FormulaError, Literal, ModelParams, sample_formula
from .rng import derive_seed

HOOKED_MAX_N = 20
HOOKED_MAX_S = 8
PATH_COUNT_MAX_S = 6
PATH_COUNT_MAX_N = 200


@dataclass(frozen=True)
class BranchingMatrix:
    """M = 1/2 [[a1, a0], [a2, a1]] with its two real eigenvalues."""

    entries: tuple[tuple[float, float], tuple[float, float]]
    rho: float
    rho_minus: float

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)


def branching_matrix(params: ModelParams) -> BranchingMatrix:
    a0, a1, a2 = params.alphas
    root = math.sqrt(a0 * a2)
    return BranchingMatrix(
        entries=((a1 / 2, a0 / 2), (a2 / 2, a1 / 2)),
        rho=0.5 * (a1 + root),
        rho_minus=0.5 * (a1 - root),
    )


def rho_numeric_check(params: ModelParams) -> tuple[float, float]:
    """(closed-form rho, largest root of the characteristic polynomial of M).

    The numeric value only uses the matrix entries: for [[a, b], [c, d]] the
    roots are (a + d)/2 +- sqrt(((a - d)/2)^2 + b c).
    """
    (a, b), (c, d) = branching_matrix(params).entries
    half_gap = (a - d) / 2
    disc = half_gap * half_gap + b * c
    numeric = (a + d) / 2 + math.sqrt(disc)
    return params.rho, numeric


def path_count_bound(params: ModelParams, s: int) -> np.ndarray:
    """M^(s-1) (1, 1)^T by repeated multiplication."""
    if s < 1:
        raise ValueError("s must be >= 1")
    (a, b), (c, d) = branching_matrix(params).entries
    x, y = 1.0, 1.0
    for _ in range(s - 1):
        x, y = math.fsum((a * x, b * y)), math.fsum((c * x, d * y))
    return np.array([x, y])


def first_moment_bound(params: ModelParams, n: int, rel_cutoff: float = 1e-30) -> float:
    """C * sum_{s=2}^{n} ((2s)^2 / n) (T+_{s-1} + T-_{s-1}) with T from the matrix bound.

    C = max(alpha)^2. The sum stops early once the terms are decreasing and a
    term contributes less than ``rel_cutoff`` of the running total.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    C = params.alpha_max ** 2
    if C == 0:
        return 0.0
    (a, b), (c, d) = branching_matrix(params).entries
    x, y = 1.0, 1.0
    x, y = math.fsum((a * x, b * y)), math.fsum((c * x, d * y))  # s = 2
    terms: list[float] = []
    prev = -math.inf
    for s in range(2, n + 1):
        term = (2 * s) ** 2 / n * (x + y)
        terms.append(term)
        if math.isinf(term):
            return math.inf
        total = math.fsum(terms)
        if term < prev and term <= rel_cutoff * total:
            break
        prev = term
        x, y = math.fsum((a * x, b * y)), math.fsum((c * x, d * y))
    return C * math.fsum(terms)


@dataclass(frozen=True)
class HookedChain:
    u: Literal
    y: tuple[Literal, ...]
    v: Literal

    @property
    def length(self) -> int:
        return len(self.y) + 1

    def literals(self) -> tuple[Literal, ...]:
        return (self.u, *self.y, self.v)


def iter_hooked_chains(f: Formula, min_length: int = 3, max_s: int = HOOKED_MAX_S) -> Iterator[HookedChain]:
    """Yield hooked chains u -> y1 -> ... -> ys -> v of length s+1 >= min_length, s <= max_s."""
    if f.n > HOOKED_MAX_N:
        raise FormulaError(f"hooked-chain enumeration is limited to n <= {HOOKED_MAX_N}")
    if not 1 <= max_s <= HOOKED_MAX_S:
        raise FormulaError(f"hooked-chain enumeration is limited to s <= {HOOKED_MAX_S}")
    g = build_digraph(f)
    succ = [[int(w) for w in g.out_neighbors(i)] for i in range(g.num_vertices)]
    # by skew symmetry, u -> y iff ~y -> ~u
    pred = [[w ^ 1 for w in succ[i ^ 1]] for i in range(g.num_vertices)]
    s_min = max(1, min_length - 1)

    def extend(path: list[int], used: set[int]) -> Iterator[HookedChain]:
        if len(path) >= s_min:
            ys = tuple(Literal.from_index(i) for i in path)
            for u in pred[path[0]]:
                if u >> 1 in used:
                    for v in succ[path[-1]]:
                        if v >> 1 in used:
                            yield HookedChain(Literal.from_index(u), ys, Literal.from_index(v))
        if len(path) == max_s:
            return
        for w in succ[path[-1]]:
            if w >> 1 not in used:
                used.add(w >> 1)
                path.append(w)
                yield from extend(path, used)
                path.pop()
                used.discard(w >> 1)

    for start in range(g.num_vertices):
        yield from extend([start], {start >> 1})


def enumerate_hooked_chains(f: Formula, min_length: int = 3, max_s: int = HOOKED_MAX_S) -> list[HookedChain]:
    return list(iter_hooked_chains(f, min_length, max_s))


def count_paths(f: Formula, start: Literal, length: int) -> int:
    """Directed paths of ``length`` edges from ``start`` through strongly distinct literals."""
    g = build_digraph(f)
    succ = [[int(w) for w in g.out_neighbors(i)] for i in range(g.num_vertices)]

    def walk(v: int, left: int, used: set[int]) -> int:
        if left == 0:
            return 1
        total = 0
        for w in succ[v]:
            if w >> 1 not in used:
                used.add(w >> 1)
                total += walk(w, left - 1, used)
                used.discard(w >> 1)
        return total

    return walk(start.index, length, {start.variable - 1})


@dataclass(frozen=True)
class PathCountEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    trials: int


def estimate_path_counts(params: ModelParams, n: int, s: int, trials: int, seed: int) -> PathCountEstimate:
    """Monte Carlo means of the number of length-(s-1) strongly distinct paths from x1 and ~x1."""
    if not 1 <= s <= PATH_COUNT_MAX_S:
        raise FormulaError(f"path counting supports 1 <= s <= {PATH_COUNT_MAX_S}")
    if not 2 <= n <= PATH_COUNT_MAX_N:
        raise FormulaError(f"path counting supports 2 <= n <= {PATH_COUNT_MAX_N}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts = np.empty((trials, 2))
    for k in range(trials):
        f = sample_formula(n, params, derive_seed(seed, k))
        counts[k] = (count_paths(f, Literal(1, True), s - 1), count_paths(f, Literal(1, False), s - 1))
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(2)
    return PathCountEstimate(mean, se, trials)
