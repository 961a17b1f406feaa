"""Acceptance suite. Each test prints one PASS/FAIL line; the lines are repeated
in the pytest terminal summary. Seeds and grids are fixed here."""

import math
import os
import subprocess
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from gen2sat.analysis import estimate_path_counts, iter_hooked_chains, path_count_bound
from gen2sat.branching import (
    FBranchingConfig, cdf_dominance_check, coupled_run, dominance_pmf_check, estimate_extinction,
    estimate_extinction_even_steps, extinction_fixed_point, extinction_single_type, linear_growth_check,
)
from gen2sat.digraph import brute_force_satisfiable, is_satisfiable
from gen2sat.experiments import ExperimentConfig, bootstrap_rounds, fit_logistic, sweep
from gen2sat.exploration import RoundConfig, run_round
from gen2sat.formula import LazyFormula, Literal, ModelParams, evaluate, sample_formula
from gen2sat.rng import derive_seed, make_rng

pytestmark = pytest.mark.acceptance

N_THRESHOLD = 20_000
TRIALS = 200
RHO_GRID = tuple(round(0.80 + 0.05 * i, 2) for i in range(9))  # 0.80 .. 1.20
RAYS = ((1, 1, 1), (4, 0, 4), (1, 2, 1), (0.25, 1.5, 0.25))


@lru_cache(maxsize=None)
def ray_sweep(ray):
    d = ModelParams(*ray)
    lams = tuple(r / d.rho for r in RHO_GRID)
    rows = sweep(ExperimentConfig((N_THRESHOLD,), ray=d, lambdas=lams, trials=TRIALS, seed=20_000, timing=False))
    lam_star, _ = fit_logistic(lams, [r.sat for r in rows], [r.trials for r in rows])
    return lams, rows, lam_star


def test_c01_oracle_equivalence(record_criterion):
    rng = make_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for k in range(10_000):
        n = int(rng.integers(2, 16))
        a = np.minimum(rng.uniform(0, 6, 3), 2 * n)
        f = sample_formula(n, ModelParams(*a), derive_seed(101, k))
        mismatches += is_satisfiable(f).satisfiable != brute_force_satisfiable(f)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 60
    record_criterion(1, ok, f"mismatches={mismatches}/10000 runtime={dt:.1f}s (limit 60s)")
    assert ok


def test_c02_standard_threshold(record_criterion):
    lams, rows, lam_star = ray_sweep((1, 1, 1))
    p = {round(l, 2): r.p_hat for l, r in zip(lams, rows)}
    ok = p[0.8] >= 0.95 and p[1.2] <= 0.30 and abs(lam_star - 1) <= 0.05
    record_criterion(2, ok, f"p(0.8)={p[0.8]:.3f} (>=0.95) p(1.2)={p[1.2]:.3f} (<=0.30) "
                            f"lambda*={lam_star:.4f} (|.-1|<=0.05); curve={[round(r.p_hat, 3) for r in rows]}")
    assert ok


def test_c03_generalized_threshold(record_criterion):
    parts, ok = [], True
    for ray in RAYS:
        _, _, lam_star = ray_sweep(ray)
        rho = ModelParams(*ray).scaled(lam_star).rho
        ok &= abs(rho - 1) <= 0.08
        parts.append(f"{ray}:rho*={rho:.4f}")
    record_criterion(3, ok, " ".join(parts) + " (|rho*-1|<=0.08)")
    assert ok


def test_c04_degenerate_satisfiable(record_criterion):
    rng = make_rng(104)
    bad = 0
    for k in range(1000):
        a1, a2 = rng.uniform(0, 20, 2)
        f = sample_formula(1000, ModelParams(0, a1, a2), derive_seed(104, 0, k))
        bad += not (is_satisfiable(f).satisfiable and evaluate(f, np.ones(1000, dtype=bool)))
        a0, a1 = rng.uniform(0, 20, 2)
        g = sample_formula(1000, ModelParams(a0, a1, 0), derive_seed(104, 1, k))
        bad += not (is_satisfiable(g).satisfiable and evaluate(g, np.zeros(1000, dtype=bool)))
    record_criterion(4, bad == 0, f"failures={bad}/2000 (alpha0=0 all-true, alpha2=0 all-false)")
    assert bad == 0


def test_c05_hooked_chain_necessity(record_criterion):
    rng = make_rng(105)
    unsat = missing = k = 0
    while unsat < 1000:
        n = int(rng.integers(3, 9))
        a = rng.uniform(2, 2 * n, 3)
        f = sample_formula(n, ModelParams(*a), derive_seed(105, k))
        k += 1
        if is_satisfiable(f).satisfiable:
            continue
        unsat += 1
        # strongly distinct y's number at most n, so s <= n covers every chain
        missing += next(iter_hooked_chains(f, 3, max_s=n), None) is None
    record_criterion(5, missing == 0, f"UNSAT formulas={unsat} without hooked chain={missing} (sampled {k})")
    assert missing == 0


def test_c06_first_moment(record_criterion):
    grid = [(0.5, 0.5, 0.5), (2, 1, 3), (1, 2, 1), (0, 2, 5), (3, 0, 3), (4, 1, 0)]
    worst, viol = -math.inf, []
    for i, a in enumerate(grid):
        p = ModelParams(*a)
        for s in range(1, 7):
            est = estimate_path_counts(p, 200, s, 300, derive_seed(106, i, s))
            bound = path_count_bound(p, s)
            z = (est.mean - bound) / np.where(est.stderr > 0, est.stderr, np.inf)
            z = np.where((est.stderr == 0) & (est.mean > bound), np.inf, z)
            worst = max(worst, float(np.max(np.nan_to_num(z, nan=-np.inf))))
            if np.any(est.mean > bound + 3 * est.stderr):
                viol.append((a, s))
    record_criterion(6, not viol, f"violations={viol} max z={worst:.2f} (<=3)")
    assert not viol


def test_c07_tau_tail(record_criterion):
    p = ModelParams(2, 2, 2)
    parts, ok = [], True
    for n in (10_000, 40_000):
        cfg = RoundConfig.for_params(n, p)
        f = LazyFormula(n, p)
        stopped = 0
        R = 10_000
        for k in range(R):
            r = run_round(f, None, Literal(1, k % 2 == 0), cfg, derive_seed(107, n, k))
            stopped += r.first.stopped_early or (r.second is not None and r.second.stopped_early)
        ph = stopped / R
        sigma = math.sqrt(ph * (1 - ph) / R)
        bound = 2 * math.exp(-p.alpha_max * cfg.T / 2)
        ok &= ph <= bound + 3 * sigma
        parts.append(f"n={n}: P(tau<T)={ph:.4g} bound={bound:.3g}+3sigma={3 * sigma:.3g}")
    record_criterion(7, ok, "; ".join(parts))
    assert ok


def test_c08_dominance_coupling(record_criterion):
    parts, ok = [], True
    for a in ((2, 2, 2), (4, 0, 4)):
        p = ModelParams(*a)
        cfg = FBranchingConfig.from_params(p)
        f = LazyFormula(10_000, p)
        good = sum(coupled_run(f, None, Literal(1, k % 2 == 0), cfg, seed=derive_seed(108, k)).dominated
                   for k in range(10_000))
        ok &= good == 10_000
        parts.append(f"{a}: {good}/10000")
    record_criterion(8, ok, " ".join(parts))
    assert ok


def test_c09_offspring_construction(record_criterion):
    levels = (0.5, 1, 2, 3, 5, 8)
    checked, fails = 0, []
    for a0 in levels:
        for a1 in (0, *levels):
            for a2 in levels:
                p = ModelParams(a0, a1, a2)
                if not p.rho > 1:
                    continue
                cfg = FBranchingConfig.from_params(p)
                checked += 1
                good = (1 - cfg.delta) * (1 - cfg.beta) * p.rho > 1 and cfg.rho0 >= (1 - cfg.delta) * (1 - cfg.beta) * p.rho
                for d, a in zip(cfg.dists, p.alphas):
                    good &= abs(math.fsum(d.pmf) - 1) <= 2 ** -52 and bool(np.all(d.pmf >= 0))
                    if d.gamma > 0:
                        good &= d.mean > (1 - cfg.beta) * d.gamma
                    good &= dominance_pmf_check(d, cfg.n0, a, cfg.delta)
                    good &= cdf_dominance_check(d, math.floor(cfg.n0 * (1 - cfg.delta)), a / (2 * cfg.n0))
                if not good:
                    fails.append(p.alphas)
    record_criterion(9, not fails, f"configs={checked} failures={fails}")
    assert not fails


def test_c10_linear_growth(record_criterion):
    parts, ok = [], True
    for a in ((3, 3, 3), (4, 0, 4)):
        cfg = FBranchingConfig.from_params(ModelParams(*a))
        ext = estimate_extinction(cfg, 2000, 1000, derive_seed(110, 0))
        qf = ext.fixed_point
        agree = all(abs(q - f) <= 3 * se for q, f, se in zip(ext.q, qf, ext.stderr))
        est, _ = linear_growth_check(cfg, 1000, 2000, derive_seed(110, 1))
        need = 0.9 * (1 - max(ext.q))
        good = agree and est >= need
        detail = f"{a}: growth={est:.3f} need>={need:.3f} q_hat={tuple(round(q, 3) for q in ext.q)} q_fp={tuple(round(q, 4) for q in qf)}"
        if a[1] == 0:
            q1s, q2s = extinction_single_type(cfg)
            qe, se = estimate_extinction_even_steps(cfg, 2000, 200, derive_seed(110, 2))
            joint = 3 * math.sqrt(se ** 2 + ext.stderr[0] ** 2)
            good &= abs(q1s - qf[0]) <= 1e-9 and abs(qe - q1s) <= 3 * se and abs(qe - ext.q[0]) <= joint
            detail += f" even-step q1={q1s:.4f} mc={qe:.3f}"
        ok &= good
        parts.append(detail)
    record_criterion(10, ok, "; ".join(parts))
    assert ok


def test_c11_round_bootstrap(record_criterion):
    p = ModelParams(3, 3, 3)
    res = [bootstrap_rounds(10_000, p, derive_seed(111, k)) for k in range(100)]
    found = sum(r.verdict == "contradictory-cycle" for r in res)
    budget = res[0].budget
    ok = found >= 99
    record_criterion(11, ok, f"cycles={found}/100 (need >=99) with round budget={budget}")
    assert ok


def _cli(*args):
    env = dict(os.environ, COLUMNS="80")
    r = subprocess.run([sys.executable, "-m", "gen2sat", *args], capture_output=True, env=env)
    assert r.returncode in (0, 10, 20), r.stderr
    return r.stdout


def test_c12_determinism(record_criterion):
    with_workers = {
        "sweep": ["sweep", "--n", "400,800", "--ray", "1,1,1", "--lambdas", "0.6,1,1.4", "--trials", "60",
                  "--seed", "12", "--no-timing"],
        "threshold": ["threshold", "--n", "2000", "--ray", "1,0.5,2", "--trials", "40", "--tol", "0.1", "--seed", "12"],
        "rounds": ["rounds", "--n", "10000", "--alphas", "4,0,4", "--reps", "12", "--max-rounds", "6", "--seed", "12"],
    }
    plain = {
        "gen": ["gen", "--n", "500", "--alphas", "1,2,3", "--seed", "12"],
        "explore": ["explore", "--n", "5000", "--alphas", "2,1,3", "--seed", "12"],
        "branch": ["branch", "--alphas", "3,1,3", "--trials", "300", "--T", "100,300", "--seed", "12"],
        "bounds": ["bounds", "--alphas", "1,2,3", "--n", "1000", "--s", "5"],
    }
    bad = []
    for name, args in with_workers.items():
        outs = {w: _cli(*args, "--workers", str(w)) for w in (1, 4, 16)}
        if len(set(outs.values())) != 1 or not outs[1]:
            bad.append(name)
    for name, args in plain.items():
        if _cli(*args) != _cli(*args):
            bad.append(name)
    record_criterion(12, not bad, f"non-identical={bad} (workers 1/4/16 for sweep, threshold, rounds; repeat for others)")
    assert not bad
