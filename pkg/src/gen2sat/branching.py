"""Two-type branching process with truncated Poisson offspring, and its coupling
to the exploration process.

Offspring law F_i: with gamma = (1 - delta) * alpha_i / 2, value k in 1..c has
mass (1 - beta/2) e^-gamma gamma^k / k!, value 0 takes the rest. A type-I node
begets (F1 type I, F0 type II) children and a type-II node (F2 type I, F1 type II).
The traversal visits a type-I node whenever one is waiting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats as sps

from . import _kernels
from .exploration import ExplorationError, ExplorationTrace, RoundConfig, _restriction_mask, default_delta, horizon
from .formula import LazyFormula, Literal, ModelParams
from .rng import derive_seed, make_rng
from .stats import wilson_interval

TYPE_I, TYPE_II = 0, 1
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100_000
MAX_CUTOFF = 10_000


class BranchingError(ValueError):
    pass


@dataclass(frozen=True)
class OffspringDist:
    gamma: float
    beta: float
    cutoff: int
    pmf: np.ndarray
    cdf: np.ndarray

    @property
    def mean(self) -> float:
        return float(math.fsum(k * p for k, p in enumerate(self.pmf)))

    def pgf(self, s: float) -> float:
        return float(math.fsum(p * s ** k for k, p in enumerate(self.pmf)))

    def sample(self, rng: np.random.Generator, size=None):
        return np.searchsorted(self.cdf, rng.random(size), side="right")


def _poisson_terms(gamma: float, c: int, beta: float) -> np.ndarray:
    k = np.arange(1, c + 1)
    logp = -gamma + k * math.log(gamma) - np.array([math.lgamma(i + 1) for i in k])
    return (1 - beta / 2) * np.exp(logp)


def make_offspring_dist(alpha_i: float, delta: float, beta: float) -> OffspringDist:
    """Smallest cutoff c with truncated mean above (1 - beta) * gamma."""
    if not 0 < beta < 1:
        raise BranchingError("beta must lie in (0, 1)")
    if not 0 < delta < 1:
        raise BranchingError("delta must lie in (0, 1)")
    if not alpha_i >= 0 or not math.isfinite(alpha_i):
        raise BranchingError("alpha_i must be finite and >= 0")
    gamma = (1 - delta) * alpha_i / 2
    if gamma == 0:
        return OffspringDist(0.0, beta, 0, np.array([1.0]), np.array([1.0]))
    target = (1 - beta) * gamma
    c, mean = 0, 0.0
    while mean <= target:
        c += 1
        if c > MAX_CUTOFF:
            raise BranchingError("cutoff search did not terminate")
        mean += c * float(_poisson_terms(gamma, c, beta)[-1])
    tail = _poisson_terms(gamma, c, beta)
    pmf = np.concatenate([[1.0 - math.fsum(tail)], tail])
    # cdf from tail sums so the last entry is exactly 1
    upper = np.concatenate([np.cumsum(tail[::-1])[::-1], [0.0]])
    cdf = 1.0 - upper
    cdf[-1] = 1.0
    return OffspringDist(gamma, beta, c, pmf, cdf)


def dominance_pmf_check(dist: OffspringDist, n: int, alpha_i: float, delta: float) -> bool:
    """P(Bin(floor(n(1-delta)), alpha_i/2n) = k) >= P(F_i = k) for every 1 <= k <= c."""
    if dist.cutoff == 0:
        return True
    p = alpha_i / (2 * n)
    if p > 1:
        return False
    N = math.floor(n * (1 - delta))
    k = np.arange(1, dist.cutoff + 1)
    return bool(np.all(sps.binom.pmf(k, N, p) >= dist.pmf[1:]))


def cdf_dominance_check(dist: OffspringDist, N: int, p: float) -> bool:
    """P(F >= k) <= P(Bin(N, p) >= k) for all k >= 1."""
    k = np.arange(1, dist.cutoff + 1)
    return bool(np.all(1.0 - dist.cdf[:-1] <= sps.binom.sf(k - 1, N, p)))


def dominance_threshold(dist: OffspringDist, alpha_i: float, delta: float, n_start: int = 2, n_max: int = 1 << 40) -> int:
    """Smallest n at which the pmf comparison holds, by doubling then bisection."""
    if dist.cutoff == 0:
        return n_start
    n = max(n_start, 2)
    while not dominance_pmf_check(dist, n, alpha_i, delta):
        n *= 2
        if n > n_max:
            raise BranchingError("no dominance threshold found below n_max")
    lo = n // 2
    if lo < n_start or dominance_pmf_check(dist, lo, alpha_i, delta):
        return n
    while n - lo > 1:
        mid = (lo + n) // 2
        if dominance_pmf_check(dist, mid, alpha_i, delta):
            n = mid
        else:
            lo = mid
    return n


@dataclass(frozen=True)
class SupercritParams:
    a: float
    b: float
    mu: float


@dataclass(frozen=True)
class FBranchingConfig:
    params: ModelParams
    delta: float
    beta: float
    F0: OffspringDist
    F1: OffspringDist
    F2: OffspringDist

    @classmethod
    def from_params(cls, params: ModelParams, delta: float | None = None, beta: float | None = None) -> "FBranchingConfig":
        rho = params.rho
        if delta is None:
            delta = default_delta(rho)
        if beta is None:
            x = (1 - delta) * rho
            beta = (1 - 1 / x) / 2 if x > 1 else 0.5
        dists = [make_offspring_dist(a, delta, beta) for a in params.alphas]
        return cls(params, float(delta), float(beta), *dists)

    @property
    def dists(self) -> tuple[OffspringDist, OffspringDist, OffspringDist]:
        return self.F0, self.F1, self.F2

    @property
    def means(self) -> tuple[float, float, float]:
        return self.F0.mean, self.F1.mean, self.F2.mean

    @property
    def M0(self) -> np.ndarray:
        m0, m1, m2 = self.means
        return np.array([[m1, m0], [m2, m1]])

    @property
    def rho0(self) -> float:
        m0, m1, m2 = self.means
        return m1 + math.sqrt(m0 * m2)

    @property
    def degenerate(self) -> bool:
        """Some gamma_i is zero, so the strict mean inequality cannot hold for it."""
        return any(d.gamma == 0 for d in self.dists)

    @property
    def cutoffs(self) -> tuple[int, int, int]:
        return self.F0.cutoff, self.F1.cutoff, self.F2.cutoff

    def supercrit(self) -> SupercritParams:
        """Top eigenvector (a, b) of M0 with a^2 + b^2 = 1 and mu = (rho0 - 1) min(a, b)."""
        m0, _, m2 = self.means
        if m0 == 0 and m2 == 0:
            a, b = 1 / math.sqrt(2), 1 / math.sqrt(2)
        elif m0 == 0:
            a, b = 0.0, 1.0
        elif m2 == 0:
            a, b = 1.0, 0.0
        else:
            # M0 (a, b) = rho0 (a, b) gives b / a = sqrt(m2 / m0)
            r = math.sqrt(m2 / m0)
            a = 1 / math.sqrt(1 + r * r)
            b = r * a
        return SupercritParams(a, b, (self.rho0 - 1) * min(a, b))

    @cached_property
    def n0(self) -> int:
        """Dominance threshold over the three offspring laws."""
        return max(dominance_threshold(d, a, self.delta) for d, a in zip(self.dists, self.params.alphas))

    def summary(self) -> dict:
        sc = self.supercrit()
        return {
            "alpha": list(self.params.alphas), "rho": self.params.rho, "delta": self.delta, "beta": self.beta,
            "cutoffs": list(self.cutoffs), "means": list(self.means), "rho0": self.rho0,
            "a": sc.a, "b": sc.b, "mu": sc.mu, "n0": self.n0,
        }


@dataclass(frozen=True)
class Trajectory:
    x1: np.ndarray
    x2: np.ndarray

    @property
    def absorbed(self) -> bool:
        return self.x1[-1] == 0 and self.x2[-1] == 0

    @property
    def total(self) -> np.ndarray:
        return self.x1 + self.x2


def simulate_traversal(cfg: FBranchingConfig, start_type: int, T: int, seed: int) -> Trajectory:
    if T < 1:
        raise BranchingError("T must be >= 1")
    if start_type not in (TYPE_I, TYPE_II):
        raise BranchingError("start_type must be TYPE_I or TYPE_II")
    x1, x2 = _kernels.traverse(cfg.F0.cdf, cfg.F1.cdf, cfg.F2.cdf, start_type, T, make_rng(seed))
    return Trajectory(x1, x2)


# -- extinction ----------------------------------------------------------------


def _pmf_pgf(pmf: np.ndarray, s: float) -> float:
    return float(np.polynomial.polynomial.polyval(s, pmf))


def extinction_fixed_point(cfg: FBranchingConfig, damping: float = 0.5, tol: float = FIXED_POINT_TOL,
                           max_iter: int = FIXED_POINT_MAX_ITER) -> tuple[float, float]:
    """Smallest fixed point of q1 = f1(q1) f0(q2), q2 = f2(q1) f1(q2), iterated from 0."""
    p0, p1, p2 = cfg.F0.pmf, cfg.F1.pmf, cfg.F2.pmf
    q1 = q2 = 0.0
    for _ in range(max_iter):
        g1 = _pmf_pgf(p1, q1) * _pmf_pgf(p0, q2)
        g2 = _pmf_pgf(p2, q1) * _pmf_pgf(p1, q2)
        n1 = (1 - damping) * q1 + damping * g1
        n2 = (1 - damping) * q2 + damping * g2
        if abs(n1 - q1) < tol and abs(n2 - q2) < tol:
            return n1, n2
        q1, q2 = n1, n2
    return q1, q2


def extinction_single_type(cfg: FBranchingConfig, tol: float = FIXED_POINT_TOL, max_iter: int = FIXED_POINT_MAX_ITER) -> tuple[float, float]:
    """alpha_1 = 0: type-I nodes two generations apart form a one-type process with pgf f0(f2(s))."""
    if cfg.F1.cutoff != 0:
        raise BranchingError("the even-step reduction needs F1 = point mass at 0")
    p0, p2 = cfg.F0.pmf, cfg.F2.pmf
    s = 0.0
    for _ in range(max_iter):
        nxt = _pmf_pgf(p0, _pmf_pgf(p2, s))
        if abs(nxt - s) < tol:
            s = nxt
            break
        s = nxt
    # a type-II ancestor has F2 type-I children
    return s, _pmf_pgf(p2, s)


@dataclass(frozen=True)
class ExtinctionEstimate:
    q: tuple[float, float]
    ci: tuple[tuple[float, float], tuple[float, float]]
    stderr: tuple[float, float]
    trials: int
    horizon: int
    fixed_point: tuple[float, float]


def estimate_extinction(cfg: FBranchingConfig, trials: int, horizon_steps: int, seed: int) -> ExtinctionEstimate:
    """Share of traversals absorbed within ``horizon_steps`` from each ancestor type."""
    if trials < 1:
        raise BranchingError("trials must be >= 1")
    counts = []
    for st in (TYPE_I, TYPE_II):
        dead = 0
        for k in range(trials):
            x1, x2 = _kernels.traverse(cfg.F0.cdf, cfg.F1.cdf, cfg.F2.cdf, st, horizon_steps, make_rng(seed, st, k))
            dead += x1[-1] == 0 and x2[-1] == 0
        counts.append(int(dead))
    q = tuple(c / trials for c in counts)
    ci = tuple(wilson_interval(c, trials) for c in counts)
    se = tuple(math.sqrt(p * (1 - p) / trials) for p in q)
    return ExtinctionEstimate(q, ci, se, trials, horizon_steps, extinction_fixed_point(cfg))  # type: ignore[arg-type]


def estimate_extinction_even_steps(cfg: FBranchingConfig, trials: int, generations: int, seed: int,
                                   survive_at: int = 10_000) -> tuple[float, float]:
    """Monte Carlo extinction of the even-generation type-I process (alpha_1 = 0).

    Returns (q1 estimate, standard error). A line counts as surviving once its
    generation size reaches ``survive_at``.
    """
    if cfg.F1.cutoff != 0:
        raise BranchingError("the even-step reduction needs F1 = point mass at 0")
    dead = 0
    for k in range(trials):
        rng = make_rng(seed, 2, k)
        z = 1
        for _ in range(generations):
            mid = int(cfg.F0.sample(rng, z).sum())
            z = int(cfg.F2.sample(rng, mid).sum()) if mid else 0
            if z == 0 or z >= survive_at:
                break
        dead += z == 0
    q = dead / trials
    return q, math.sqrt(q * (1 - q) / trials)


def linear_growth_check(cfg: FBranchingConfig, T: int, trials: int, seed: int, start_type: int = TYPE_I) -> tuple[float, tuple[float, float]]:
    """Estimate of P(X1(T) + X2(T) >= mu T / 2) with its Wilson interval.

    Extinct lines never count, which matters when mu <= 0.
    """
    mu = cfg.supercrit().mu
    level = mu * T / 2
    hits = 0
    for k in range(trials):
        x1, x2 = _kernels.traverse(cfg.F0.cdf, cfg.F1.cdf, cfg.F2.cdf, start_type, T, make_rng(seed, 3, k))
        total = x1[-1] + x2[-1]
        hits += total > 0 and total >= level
    return hits / trials, wilson_interval(int(hits), trials)


# -- coupling -----------------------------------------------------------------


@dataclass(frozen=True)
class CoupledRun:
    trace: ExplorationTrace
    traversal: Trajectory
    dominated: bool


def coupled_run(f: LazyFormula, S, x: Literal, cfg: FBranchingConfig, T: int | None = None, seed: int = 0,
                *, check_n0: bool = True) -> CoupledRun:
    """Exploration and traversal on shared uniforms; reports (a+, a-) >= X(t) for all t <= tau."""
    n = f.n
    if f.params != cfg.params:
        raise BranchingError("formula and branching config use different parameters")
    if T is None:
        T = horizon(n)
    mask = _restriction_mask(n, S)
    if mask.sum() < (1 - cfg.delta / 2) * n:
        raise ExplorationError("|S| is below (1 - delta/2) n")
    if not mask[x.variable - 1]:
        raise ExplorationError("start variable not in S")
    if check_n0:
        n0 = cfg.n0
        if n < n0:
            raise BranchingError(f"n = {n} is below the dominance threshold n0 = {n0}")
    alive_init = np.flatnonzero(mask)
    alive_init = alive_init[alive_init != x.variable - 1]
    p0, p1, p2 = f.params.probabilities(n)
    raw = _kernels.explore(p0, p1, p2, alive_init, n, x.index, T, _kernels.PREFER_POSITIVE,
                           make_rng(seed), (cfg.F0.cdf, cfg.F1.cdf, cfg.F2.cdf))
    x1, x2 = raw.pop("x1"), raw.pop("x2")
    trace = ExplorationTrace(n=n, start=x, T=T, alpha_max=f.params.alpha_max, in_restriction=mask, **raw)
    tau = trace.tau
    dom = bool(np.all(trace.a_pos[:tau + 1] >= x1[:tau + 1]) and np.all(trace.a_neg[:tau + 1] >= x2[:tau + 1]))
    return CoupledRun(trace, Trajectory(x1, x2), dom)


def round_config(n: int, cfg: FBranchingConfig) -> RoundConfig:
    return RoundConfig(n=n, T=horizon(n), delta=cfg.delta, alpha_max=cfg.params.alpha_max, rho=cfg.params.rho)
