"""Monte Carlo experiments: satisfiability probability, sweeps, threshold search, round bootstrap."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .digraph import is_satisfiable
from .exploration import RoundConfig, default_delta, horizon, run_round
from .formula import FormulaError, LazyFormula, Literal, ModelParams, sample_formula
from .rng import derive_seed, make_rng
from .stats import wilson_interval

CSV_COLUMNS = ("n", "alpha0", "alpha1", "alpha2", "rho", "trials", "sat", "p_hat", "ci_lo", "ci_hi", "seconds")
CHUNK = 25


class ExperimentError(ValueError):
    pass


def fmt(x: float) -> str:
    """17 significant digits, so numbers round-trip exactly."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SweepRow:
    n: int
    params: ModelParams
    trials: int
    sat: int
    seconds: float = 0.0

    def __post_init__(self):
        if not 0 <= self.sat <= self.trials:
            raise ExperimentError("sat count out of range")

    @property
    def rho(self) -> float:
        return self.params.rho

    @property
    def p_hat(self) -> float:
        return self.sat / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.sat, self.trials)

    def as_csv_fields(self) -> list[str]:
        lo, hi = self.ci
        a0, a1, a2 = self.params.alphas
        return [fmt(self.n), fmt(a0), fmt(a1), fmt(a2), fmt(self.rho), fmt(self.trials), fmt(self.sat),
                fmt(self.p_hat), fmt(lo), fmt(hi), fmt(self.seconds)]


@dataclass(frozen=True)
class ExperimentConfig:
    n_values: tuple[int, ...]
    points: tuple[ModelParams, ...] = ()
    ray: ModelParams | None = None
    lambdas: tuple[float, ...] = ()
    trials: int = 100
    seed: int = 0
    out: str | None = None
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if not self.n_values or min(self.n_values) < 2:
            raise ExperimentError("n values must be >= 2")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")
        if self.ray is not None:
            if not self.lambdas:
                raise ExperimentError("a ray needs a lambda grid")
            if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
                raise ExperimentError("lambda grid must be strictly increasing")
        elif not self.points:
            raise ExperimentError("give parameter points or a ray")

    def parameter_points(self) -> list[ModelParams]:
        if self.ray is not None:
            return [self.ray.scaled(lam) for lam in self.lambdas]
        return list(self.points)


def _count_sat(task: tuple[int, float, float, float, int, int, int, int]) -> tuple[int, float]:
    n, a0, a1, a2, seed, row, lo, hi = task
    params = ModelParams(a0, a1, a2)
    t0 = time.perf_counter()
    sat = 0
    for k in range(lo, hi):
        f = sample_formula(n, params, derive_seed(seed, row, k))
        sat += is_satisfiable(f).satisfiable
    return sat, time.perf_counter() - t0


def _tasks(n: int, params: ModelParams, trials: int, seed: int, row: int) -> list[tuple]:
    params.probabilities(n)  # validate before dispatch
    a0, a1, a2 = params.alphas
    return [(n, a0, a1, a2, seed, row, lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]


def _run_tasks(tasks: list[tuple], workers: int) -> list[tuple[int, float]]:
    if workers == 1 or len(tasks) == 1:
        return [_count_sat(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_count_sat, tasks))


def estimate_sat_probability(n: int, params: ModelParams, trials: int, seed: int, *, row: int = 0,
                             workers: int = 1, timing: bool = True) -> SweepRow:
    """Share of satisfiable formulas among ``trials`` samples; trial k of row r uses seed (seed, r, k)."""
    if trials < 1:
        raise ExperimentError("trials must be >= 1")
    results = _run_tasks(_tasks(n, params, trials, seed, row), workers)
    sat = sum(r[0] for r in results)
    secs = math.fsum(r[1] for r in results) if timing else 0.0
    return SweepRow(n, params, trials, sat, secs)


def sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """One row per (n, parameter point) in that nested order."""
    points = cfg.parameter_points()
    keys = [(n, p) for n in cfg.n_values for p in points]
    tasks, owner = [], []
    for row, (n, p) in enumerate(keys):
        ts = _tasks(n, p, cfg.trials, cfg.seed, row)
        tasks += ts
        owner += [row] * len(ts)
    results = _run_tasks(tasks, cfg.workers)
    sat = [0] * len(keys)
    secs: list[list[float]] = [[] for _ in keys]
    for row, (s, dt) in zip(owner, results):
        sat[row] += s
        secs[row].append(dt)
    rows = [SweepRow(n, p, cfg.trials, sat[i], math.fsum(secs[i]) if cfg.timing else 0.0)
            for i, (n, p) in enumerate(keys)]
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
    return rows


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv_fields())
    return buf.getvalue()


# -- threshold location --------------------------------------------------------


def fit_logistic(lambdas: Sequence[float], sat: Sequence[int], trials: Sequence[int]) -> tuple[float, float]:
    """Maximum-likelihood fit of p(lam) = 1 / (1 + exp(k (lam - lam_star))); returns (lam_star, k)."""
    lam = np.asarray(lambdas, dtype=float)
    s = np.asarray(sat, dtype=float)
    m = np.asarray(trials, dtype=float)
    if len(lam) < 2:
        raise ExperimentError("need at least two points for a logistic fit")

    def nll(theta):
        centre, logk = theta
        z = np.exp(logk) * (lam - centre)
        # log p = -log(1 + e^z), log(1 - p) = z - log(1 + e^z)
        l1p = np.logaddexp(0.0, z)
        return float(np.sum(s * l1p + (m - s) * (l1p - z)))

    p = s / m
    inside = np.flatnonzero((p > 0) & (p < 1))
    centre0 = float(lam[inside].mean()) if len(inside) else float(lam.mean())
    span = float(lam.max() - lam.min()) or 1.0
    best = None
    for logk0 in (math.log(4 / span), math.log(20 / span), math.log(100 / span)):
        res = optimize.minimize(nll, x0=[centre0, logk0], method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 20_000})
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(math.exp(best.x[1]))


@dataclass(frozen=True)
class ThresholdResult:
    transition: bool
    lam_star: float | None = None
    rho_at_crossing: float | None = None
    bracket: tuple[float, float] | None = None
    lam_logistic: float | None = None
    evaluations: list[tuple[float, SweepRow]] = field(default_factory=list)

    def as_dict(self) -> dict:
        if not self.transition:
            return {"transition": False, "reason": "no transition: alpha0 * alpha2 = 0, always satisfiable"}
        return {
            "transition": True, "lambda_star": self.lam_star, "rho_at_crossing": self.rho_at_crossing,
            "bracket": list(self.bracket), "lambda_logistic": self.lam_logistic,
            "evaluations": [{"lambda": lam, "p_hat": r.p_hat, "sat": r.sat, "trials": r.trials}
                            for lam, r in self.evaluations],
        }


def find_threshold(direction: ModelParams, n: int, trials: int, tol: float, seed: int, *, workers: int = 1,
                   max_doublings: int = 30) -> ThresholdResult:
    """Bisection in lam for p_hat(lam * direction) = 1/2, to bracket width ``tol``."""
    if tol <= 0:
        raise ExperimentError("tol must be positive")
    a0, _, a2 = direction.alphas
    if a0 * a2 == 0:
        return ThresholdResult(False)
    evals: list[tuple[float, SweepRow]] = []

    def p_at(lam: float) -> float:
        row = estimate_sat_probability(n, direction.scaled(lam), trials, seed, row=len(evals),
                                       workers=workers, timing=False)
        evals.append((lam, row))
        return row.p_hat

    lo, hi = 0.0, 1.0
    lam_cap = 2 * n / direction.alpha_max
    for _ in range(max_doublings):
        if hi > lam_cap:
            raise ExperimentError("bisection bracket failure: p_hat stays above 1/2")
        if p_at(hi) < 0.5:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ExperimentError("bisection bracket failure")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if p_at(mid) >= 0.5:
            lo = mid
        else:
            hi = mid
    lam_star = (lo + hi) / 2
    lam_fit = None
    if len(evals) >= 2:
        lam_fit, _ = fit_logistic([e[0] for e in evals], [e[1].sat for e in evals], [e[1].trials for e in evals])
    return ThresholdResult(True, lam_star, direction.scaled(lam_star).rho, (lo, hi), lam_fit, evals)


# -- round bootstrap -----------------------------------------------------------


def round_budget(n: int, delta: float, alpha_max: float) -> int:
    """ceil(delta sqrt(n) / (9 alpha)), capped by floor(delta n / (2 (4 alpha T + 1)))."""
    T = horizon(n)
    want = math.ceil(delta * math.sqrt(n) / (9 * alpha_max))
    cap = math.floor(delta * n / (2 * (4 * alpha_max * T + 1)))
    return max(0, min(want, cap))


def reaches_complement(active: np.ndarray, params: ModelParams, n: int, u: float, same_parity: bool) -> bool:
    """Whether start ~> ~start through A_T: a complementary pair in A_T, or some clause
    (~u v ~v) with u, v in A_T present (decided by the uniform ``u``)."""
    var = active >> 1
    if len(np.unique(var)) < len(var):
        return True
    npos = int(np.count_nonzero((active & 1) == 0))
    nneg = len(active) - npos
    p0, p1, p2 = params.probabilities(n)
    # (~u v ~v) has type 0 for two positive u, v and type 2 for two negative ones
    log_none = math.comb(npos, 2) * math.log1p(-p0) if p0 < 1 else (-math.inf if npos >= 2 else 0.0)
    log_none += math.comb(nneg, 2) * math.log1p(-p2) if p2 < 1 else (-math.inf if nneg >= 2 else 0.0)
    if not same_parity:
        log_none += npos * nneg * math.log1p(-p1) if p1 < 1 else (-math.inf if npos * nneg else 0.0)
    return u < -math.expm1(log_none)


@dataclass
class BootstrapResult:
    verdict: str  # "contradictory-cycle", "round-stopped" or "exhausted"
    rounds_run: int
    budget: int
    found_in_round: int | None
    visited: list[np.ndarray]

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "rounds_run": self.rounds_run, "budget": self.budget,
                "found_in_round": self.found_in_round, "visited_per_round": [len(v) for v in self.visited]}


def bootstrap_rounds(n: int, params: ModelParams, seed: int, delta: float | None = None,
                     max_rounds: int | None = None) -> BootstrapResult:
    """Successive rounds on disjoint variable sets until one yields a contradictory cycle.

    The number of rounds is :func:`round_budget` unless ``max_rounds`` overrides
    it; rounds also stop once fewer than (1 - delta/2) n variables remain.

    A round succeeds when both explorations reach the complement of their start
    through their active sets; clause presence outside the examined set is drawn lazily.
    """
    if not params.rho > 1:
        raise ExperimentError("bootstrap needs rho > 1")
    a0, a1, a2 = params.alphas
    if a0 * a2 == 0:
        raise ExperimentError("bootstrap needs alpha0 * alpha2 > 0")
    cfg = RoundConfig.for_params(n, params, delta)
    budget = round_budget(n, cfg.delta, params.alpha_max) if max_rounds is None else max_rounds
    f = LazyFormula(n, params)
    S = np.ones(n, dtype=bool)
    used = np.zeros(n, dtype=bool)
    visited: list[np.ndarray] = []
    same_parity = a1 == 0
    for r in range(budget):
        if S.sum() < cfg.min_size:
            return BootstrapResult("exhausted", r, budget, None, visited)
        x = Literal(int(np.flatnonzero(S)[0]) + 1, True)
        res = run_round(f, S, x, cfg, derive_seed(seed, r))
        seen = set(res.first.visited_variables().tolist())
        if res.second is not None:
            seen.update(res.second.visited_variables().tolist())
        seen.add(x.variable)
        vs = np.array(sorted(seen), dtype=np.int64)
        if used[vs - 1].any():
            raise AssertionError("a variable was reused across rounds")
        used[vs - 1] = True
        visited.append(vs)
        if not res.completed:
            return BootstrapResult("round-stopped", r + 1, budget, None, visited)
        ur = make_rng(seed, r, 2).random(2)
        if (reaches_complement(res.first.active_indices(), params, n, ur[0], same_parity)
                and reaches_complement(res.second.active_indices(), params, n, ur[1], same_parity)):
            return BootstrapResult("contradictory-cycle", r + 1, budget, r, visited)
        S &= ~used
    return BootstrapResult("exhausted", budget, budget, None, visited)
