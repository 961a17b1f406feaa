"""Stack exploration of the implication digraph and two-exploration rounds.

An exploration keeps two stacks of active literals (positive / negative), an
exposed set and the alive variables. Each step pops a current literal ``l``,
moves every alive literal ``w`` with clause ``(~l v w)`` present onto the
stacks and exposes ``l``. Newly active literals are pushed in ascending
variable order, positives before negatives.

Explorations run either over a concrete :class:`Formula` or over a
:class:`LazyFormula`, where each examined clause's presence is drawn when it
is first looked at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import stats

from . import _kernels
from .digraph import ImplicationDigraph, build_digraph
from .formula import Clause, Formula, FormulaError, LazyFormula, Literal, ModelParams, sample_formula
from .rng import derive_seed, make_rng

PREFER_POSITIVE = "prefer-positive"
PREFER_NEGATIVE = "prefer-negative"
_POLICY = {PREFER_POSITIVE: _kernels.PREFER_POSITIVE, PREFER_NEGATIVE: _kernels.PREFER_NEGATIVE}
NEVER = np.iinfo(np.int64).max


class ExplorationError(ValueError):
    pass


def horizon(n: int) -> int:
    return math.isqrt(n)


@dataclass(frozen=True)
class ExplorationTrace:
    """Per-step record of one exploration.

    ``u``, ``a_pos`` and ``a_neg`` hold u_t, |A_t^+|, |A_t^-| for t = 0..T.
    ``current[t]`` is the type of the literal exposed at step t (0 positive,
    1 negative, -1 when the stacks were already empty) and ``exposed[t]`` its
    vertex index.
    """

    n: int
    start: Literal
    T: int
    alpha_max: float
    in_restriction: np.ndarray  # bool per variable (0-based)
    u: np.ndarray
    a_pos: np.ndarray
    a_neg: np.ndarray
    current: np.ndarray
    exposed: np.ndarray
    act_vertex: np.ndarray
    act_step: np.ndarray
    stack_pos: np.ndarray
    stack_neg: np.ndarray
    x1: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    x2: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def steps_run(self) -> int:
        return int(np.count_nonzero(self.current >= 0))

    @property
    def exhausted(self) -> bool:
        return self.a_pos[-1] + self.a_neg[-1] == 0

    @property
    def tau(self) -> int:
        """Last t <= T with u_t >= u_0 - 2 * alpha_max * T."""
        ok = np.flatnonzero(self.u >= self.u[0] - 2 * self.alpha_max * self.T)
        return int(ok[-1])

    @property
    def stopped_early(self) -> bool:
        return self.tau < self.T

    @property
    def exposed_set(self) -> frozenset[Literal]:
        return frozenset(Literal.from_index(i) for i in self.exposed if i >= 0)

    @property
    def active_set(self) -> frozenset[Literal]:
        return frozenset(Literal.from_index(i) for i in np.concatenate([self.stack_pos, self.stack_neg]))

    def active_indices(self) -> np.ndarray:
        return np.concatenate([self.stack_pos, self.stack_neg])

    def exposed_indices(self) -> np.ndarray:
        return self.exposed[self.exposed >= 0]

    def records(self) -> list[dict]:
        out = []
        for t in range(self.T + 1):
            kind = None
            if t < self.T and self.current[t] >= 0:
                kind = "positive" if self.current[t] == 0 else "negative"
            out.append({"t": t, "u": int(self.u[t]), "a_pos": int(self.a_pos[t]),
                        "a_neg": int(self.a_neg[t]), "current": kind})
        return out

    # -- variable bookkeeping -------------------------------------------------

    def first_activation(self) -> np.ndarray:
        """Time at which each variable first left the alive set (NEVER if it did not)."""
        first = np.full(self.n, NEVER, dtype=np.int64)
        if len(self.act_vertex):
            np.minimum.at(first, self.act_vertex >> 1, self.act_step)
        first[self.start.variable - 1] = 0
        return first

    def alive_mask(self, t: int) -> np.ndarray:
        """Alive variables at time t, i.e. U_t."""
        return self.in_restriction & (self.first_activation() > t)

    def sets_at(self, t: int) -> tuple[set[int], set[int]]:
        """Vertex sets (E_t, A_t)."""
        exposed = {int(i) for i in self.exposed[:t] if i >= 0}
        active = {self.start.index}
        active.update(int(v) for v, s in zip(self.act_vertex, self.act_step) if s <= t)
        return exposed, active - exposed

    def visited_variables(self) -> np.ndarray:
        """Variables of E_T and A_T (1-based)."""
        first = self.first_activation()
        return np.flatnonzero(first != NEVER) + 1

    # -- examined clauses -----------------------------------------------------

    def _expose_step(self) -> dict[int, int]:
        return {int(v): t for t, v in enumerate(self.exposed) if v >= 0}

    def is_examined(self, a: int, b: int, *, _cache=None) -> bool:
        """Whether clause {a, b} (vertex indices) was looked at by this exploration."""
        steps = _cache[0] if _cache else self._expose_step()
        first = _cache[1] if _cache else self.first_activation()
        for lit, other in ((a ^ 1, b), (b ^ 1, a)):
            s = steps.get(lit)
            if s is None:
                continue
            w = other >> 1
            if self.in_restriction[w] and first[w] > s:
                return True
        return False

    def examined_clauses(self) -> set[Clause]:
        """Materialized examined set; one clause per (current literal, alive literal) pair."""
        first = self.first_activation()
        out: set[Clause] = set()
        for t, lit in enumerate(self.exposed):
            if lit < 0:
                continue
            l = Literal.from_index(lit)
            for w in np.flatnonzero(self.in_restriction & (first > t)) + 1:
                for pos in (True, False):
                    out.add(Clause.of(l.complement(), Literal(int(w), pos)))
        return out

    def examined_count(self) -> int:
        first = self.first_activation()
        total = 0
        for t, lit in enumerate(self.exposed):
            if lit >= 0:
                total += 2 * int(np.count_nonzero(self.in_restriction & (first > t)))
        return total


def _restriction_mask(n: int, restriction: Iterable[int] | np.ndarray | None) -> np.ndarray:
    if restriction is None:
        return np.ones(n, dtype=bool)
    r = np.asarray(restriction)
    if r.dtype == bool:
        if r.shape != (n,):
            raise ExplorationError("boolean restriction must have one entry per variable")
        return r.copy()
    mask = np.zeros(n, dtype=bool)
    r = np.asarray(sorted(int(v) for v in restriction), dtype=np.int64)
    if len(r) and (r.min() < 1 or r.max() > n):
        raise ExplorationError("restriction variables must lie in [1, n]")
    mask[r - 1] = True
    return mask


def _explore_concrete(g: ImplicationDigraph, alive_init: np.ndarray, start: int, T: int, policy: int) -> dict:
    n = g.n
    alive = np.zeros(n, dtype=bool)
    alive[alive_init] = True
    u = len(alive_init)
    spos: list[int] = []
    sneg: list[int] = []
    (sneg if start & 1 else spos).append(start)
    U = np.empty(T + 1, dtype=np.int64)
    AP = np.empty(T + 1, dtype=np.int64)
    AN = np.empty(T + 1, dtype=np.int64)
    cur = np.full(T, -1, dtype=np.int8)
    exposed = np.full(T, -1, dtype=np.int64)
    act_v: list[int] = []
    act_t: list[int] = []
    U[0], AP[0], AN[0] = u, len(spos), len(sneg)
    for t in range(T):
        if policy == _kernels.PREFER_NEGATIVE:
            pop = 1 if sneg else (0 if spos else -1)
        else:
            pop = 0 if spos else (1 if sneg else -1)
        if pop >= 0:
            lit = (spos if pop == 0 else sneg).pop()
            cur[t] = pop
            exposed[t] = lit
            hits = [int(w) for w in g.out_neighbors(lit) if alive[w >> 1]]
            new_pos = sorted(w for w in hits if not w & 1)
            new_neg = sorted(w for w in hits if w & 1)
            for w in new_pos:
                spos.append(w)
            for w in new_neg:
                sneg.append(w)
            for w in new_pos + new_neg:
                act_v.append(w)
                act_t.append(t + 1)
            for w in hits:
                if alive[w >> 1]:
                    alive[w >> 1] = False
                    u -= 1
        U[t + 1], AP[t + 1], AN[t + 1] = u, len(spos), len(sneg)
    return {
        "u": U, "a_pos": AP, "a_neg": AN, "current": cur, "exposed": exposed,
        "act_vertex": np.array(act_v, dtype=np.int64), "act_step": np.array(act_t, dtype=np.int64),
        "stack_pos": np.array(spos, dtype=np.int64), "stack_neg": np.array(sneg, dtype=np.int64),
    }


def explore(
    f: Formula | LazyFormula,
    restriction: Iterable[int] | np.ndarray | None,
    start: Literal,
    T: int,
    policy: str = PREFER_POSITIVE,
    seed: int = 0,
    *,
    alpha_max: float | None = None,
    graph: ImplicationDigraph | None = None,
) -> ExplorationTrace:
    """Run one exploration from ``start`` on the variables in ``restriction`` for T steps.

    ``alpha_max`` sets the stopping threshold for tau; for a lazy formula it
    defaults to the model's max(alpha), for a concrete one it must be given
    unless 0 is intended.
    """
    if T < 1:
        raise ExplorationError("T must be >= 1")
    if policy not in _POLICY:
        raise ExplorationError(f"unknown pop policy {policy!r}")
    n = f.n
    if not 1 <= start.variable <= n:
        raise ExplorationError(f"start literal {start} outside the formula")
    mask = _restriction_mask(n, restriction)
    if not mask[start.variable - 1]:
        raise ExplorationError(f"start variable {start.variable} is not in the restriction")
    alive_init = np.flatnonzero(mask)
    alive_init = alive_init[alive_init != start.variable - 1]
    if isinstance(f, LazyFormula):
        p0, p1, p2 = f.params.probabilities(n)
        raw = _kernels.explore(p0, p1, p2, alive_init, n, start.index, T, _POLICY[policy], make_rng(seed))
        amax = f.params.alpha_max if alpha_max is None else alpha_max
    else:
        g = graph if graph is not None else build_digraph(f)
        raw = _explore_concrete(g, alive_init, start.index, T, _POLICY[policy])
        amax = 0.0 if alpha_max is None else alpha_max
    raw.pop("x1", None)
    raw.pop("x2", None)
    return ExplorationTrace(n=n, start=start, T=T, alpha_max=float(amax), in_restriction=mask, **raw)


# -- rounds ------------------------------------------------------------------


@dataclass(frozen=True)
class RoundConfig:
    """Horizon T = floor(sqrt n), slack delta and alpha_max for a round."""

    n: int
    T: int
    delta: float
    alpha_max: float
    rho: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ExplorationError("delta must lie in (0, 1)")
        if self.rho > 1 and (1 - self.delta) * self.rho <= 1:
            raise ExplorationError(f"(1 - delta) * rho = {(1 - self.delta) * self.rho} is not above 1")

    @classmethod
    def for_params(cls, n: int, params: ModelParams, delta: float | None = None) -> "RoundConfig":
        return cls(n=n, T=horizon(n), delta=default_delta(params.rho) if delta is None else delta,
                   alpha_max=params.alpha_max, rho=params.rho)

    @property
    def min_size(self) -> float:
        return (1 - self.delta / 2) * self.n


def default_delta(rho: float) -> float:
    """delta = (1 - 1/rho)/2 when rho > 1, else 1/2."""
    return (1 - 1 / rho) / 2 if rho > 1 else 0.5


@dataclass(frozen=True)
class RoundResult:
    first: ExplorationTrace
    second: ExplorationTrace | None
    verdict: str  # "stopped" or "completed"
    remaining: np.ndarray  # S' as a boolean variable mask, or S when stopped

    @property
    def completed(self) -> bool:
        return self.verdict == "completed"


def run_round(
    f: Formula | LazyFormula,
    S: Iterable[int] | np.ndarray | None,
    x: Literal,
    cfg: RoundConfig,
    seed: int = 0,
    *,
    graph: ImplicationDigraph | None = None,
) -> RoundResult:
    """Explore from x on S; if tau = T, explore from ~x on S minus the visited variables other than var(x)."""
    n = f.n
    if cfg.n != n:
        raise ExplorationError("round config was built for a different n")
    mask = _restriction_mask(n, S)
    if mask.sum() < cfg.min_size:
        raise ExplorationError(f"|S| = {int(mask.sum())} is below (1 - delta/2) n = {cfg.min_size}")
    if isinstance(f, Formula) and graph is None:
        graph = build_digraph(f)
    first = explore(f, mask, x, cfg.T, PREFER_POSITIVE, derive_seed(seed, 0),
                    alpha_max=cfg.alpha_max, graph=graph)
    if first.stopped_early:
        return RoundResult(first, None, "stopped", mask)
    reduced = mask.copy()
    visited = first.visited_variables()
    reduced[visited[visited != x.variable] - 1] = False
    second = explore(f, reduced, x.complement(), cfg.T, PREFER_POSITIVE, derive_seed(seed, 1),
                     alpha_max=cfg.alpha_max, graph=graph)
    verdict = "stopped" if second.stopped_early else "completed"
    return RoundResult(first, second, verdict, reduced)


def _pairs_examined(trace: ExplorationTrace, active: np.ndarray) -> bool:
    """Whether ``trace`` examined some clause (~u v ~v) with u, v in ``active``."""
    if len(active) < 2:
        return False
    steps = trace._expose_step()
    first = trace.first_activation()
    cache = (steps, first)
    # (~u v ~v) can only be examined by exposing u or v
    for u in active:
        if int(u) not in steps:
            continue
        for v in active:
            if (v >> 1) != (u >> 1) and trace.is_examined(int(u) ^ 1, int(v) ^ 1, _cache=cache):
                return True
    return False


def _traces_share_clause(t1: ExplorationTrace, t2: ExplorationTrace) -> bool:
    # A shared clause is {~l1, w1} = {~l2, w2} with l_i exposed in trace i: either
    # l1 = l2, or the clause is (~l1 v ~l2).
    s1, s2 = t1._expose_step(), t2._expose_step()
    f1, f2 = t1.first_activation(), t2.first_activation()
    for lit in set(s1) & set(s2):
        both = t1.in_restriction & (f1 > s1[lit]) & t2.in_restriction & (f2 > s2[lit])
        if both.any():
            return True
    c1, c2 = (s1, f1), (s2, f2)
    for l1 in s1:
        for l2 in s2:
            if (l1 >> 1) == (l2 >> 1):
                continue
            a, b = l1 ^ 1, l2 ^ 1
            if t1.is_examined(a, b, _cache=c1) and t2.is_examined(a, b, _cache=c2):
                return True
    return False


def check_clause_disjointness(trace1: ExplorationTrace, trace2: ExplorationTrace | None,
                              active: Iterable[Literal] | np.ndarray | None = None) -> bool:
    """Examined clauses of the two explorations of a round versus {(~u v ~v): u, v in A_T}.

    True iff trace1 examined none of those clauses, and trace2 examined none of
    them nor any clause trace1 examined.
    """
    if active is None:
        act = trace1.active_indices()
    else:
        act = np.array([a.index if isinstance(a, Literal) else int(a) for a in active], dtype=np.int64)
    if _pairs_examined(trace1, act):
        return False
    if trace2 is None:
        return True
    if _pairs_examined(trace2, act):
        return False
    return not _traces_share_clause(trace1, trace2)


# -- step-law check ----------------------------------------------------------


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float
    observations: int


def pooled_binomial_chisquare(observed: np.ndarray, trials: np.ndarray, p: float, min_expected: float = 5.0) -> ChiSquareResult:
    """Goodness of fit of observations k_j ~ Bin(trials_j, p) with varying trial counts."""
    observed = np.asarray(observed, dtype=np.int64)
    trials = np.asarray(trials, dtype=np.int64)
    nobs = len(observed)
    if nobs == 0:
        return ChiSquareResult(0.0, 0, 1.0, 0)
    kmax = int(max(observed.max(), 1)) + 1
    ks = np.arange(kmax)
    pmf = stats.binom.pmf(ks[None, :], trials[:, None], p)
    expected = np.append(pmf.sum(axis=0), nobs - pmf.sum())
    counts = np.append(np.bincount(observed, minlength=kmax)[:kmax], 0)
    # merge sparse tail bins
    while len(expected) > 1 and expected[-1] < min_expected:
        expected[-2] += expected[-1]
        counts[-2] += counts[-1]
        expected, counts = expected[:-1], counts[:-1]
    keep = expected > 0
    if np.any(counts[~keep]):
        return ChiSquareResult(math.inf, 0, 0.0, nobs)
    expected, counts = expected[keep], counts[keep]
    dof = len(expected) - 1
    if dof == 0:
        return ChiSquareResult(0.0, 0, 1.0, nobs)
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return ChiSquareResult(stat, dof, float(stats.chi2.sf(stat, dof)), nobs)


@dataclass(frozen=True)
class StepDistributionReport:
    positive: dict[str, ChiSquareResult]
    negative: dict[str, ChiSquareResult]

    def pvalues(self) -> dict[str, float]:
        out = {f"positive/{k}": r.pvalue for k, r in self.positive.items()}
        out.update({f"negative/{k}": r.pvalue for k, r in self.negative.items()})
        return out

    def passed(self, level: float = 0.01) -> bool:
        return all(p >= level for p in self.pvalues().values())


def step_distribution_check(params: ModelParams, n: int, trials: int, seed: int, steps: int | None = None) -> StepDistributionReport:
    """Compare one-step increments of explorations on sampled formulas with their binomial laws.

    Each trial samples a formula, explores from x1 or ~x1 (alternating) and
    records, per step, u_t, u_t - u_{t+1} and the two stack increments,
    grouped by the current literal's sign.
    """
    p0, p1, p2 = params.probabilities(n)
    T = steps or horizon(n)
    rec: dict[int, list[tuple[int, int, int, int]]] = {0: [], 1: []}
    for k in range(trials):
        f = sample_formula(n, params, derive_seed(seed, k))
        start = Literal(1, k % 2 == 0)
        tr = explore(f, None, start, T)
        for t in range(T):
            c = int(tr.current[t])
            if c < 0:
                break
            rec[c].append((int(tr.u[t]), int(tr.u[t] - tr.u[t + 1]),
                           int(tr.a_pos[t + 1] - tr.a_pos[t]), int(tr.a_neg[t + 1] - tr.a_neg[t])))

    def fit(rows, p_drop, p_pos, p_neg, pos_shift, neg_shift):
        if not rows:
            empty = ChiSquareResult(0.0, 0, 1.0, 0)
            return {"u_drop": empty, "a_pos": empty, "a_neg": empty}
        arr = np.array(rows, dtype=np.int64)
        return {
            "u_drop": pooled_binomial_chisquare(arr[:, 1], arr[:, 0], p_drop),
            "a_pos": pooled_binomial_chisquare(arr[:, 2] + pos_shift, arr[:, 0], p_pos),
            "a_neg": pooled_binomial_chisquare(arr[:, 3] + neg_shift, arr[:, 0], p_neg),
        }

    positive = fit(rec[0], p0 + p1 - p0 * p1, p1, p0, 1, 0)
    negative = fit(rec[1], p1 + p2 - p1 * p2, p2, p1, 0, 1)
    return StepDistributionReport(positive, negative)
