"""Literals, clauses, formulas and the generalized random 2-SAT generator.

A literal is stored in DIMACS form inside arrays (``+v`` / ``-v``) and as a
:class:`Literal` tuple at the API surface. Inside graph code a literal is a
vertex index ``2*(v-1) + neg`` so that complementing is ``i ^ 1``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .rng import make_rng


class FormulaError(ValueError):
    pass


class DimacsError(FormulaError):
    pass


class Literal(NamedTuple):
    variable: int
    positive: bool = True

    def complement(self) -> "Literal":
        return Literal(self.variable, not self.positive)

    @property
    def index(self) -> int:
        return 2 * (self.variable - 1) + (0 if self.positive else 1)

    @classmethod
    def from_index(cls, i: int) -> "Literal":
        return cls(int(i) // 2 + 1, not (int(i) & 1))

    @classmethod
    def from_int(cls, d: int) -> "Literal":
        d = int(d)
        if d == 0:
            raise FormulaError("literal 0 is not a literal")
        return cls(abs(d), d > 0)

    def __int__(self) -> int:
        return self.variable if self.positive else -self.variable

    def __str__(self) -> str:
        return f"x{self.variable}" if self.positive else f"~x{self.variable}"


def var(u: Literal) -> int:
    return u.variable


class Clause(NamedTuple):
    """Unordered 2-clause kept with the lower variable first."""

    first: Literal
    second: Literal

    @classmethod
    def of(cls, u, v) -> "Clause":
        u = u if isinstance(u, Literal) else Literal.from_int(u)
        v = v if isinstance(v, Literal) else Literal.from_int(v)
        if u.variable == v.variable:
            raise FormulaError(f"literals {u} and {v} are not strongly distinct")
        return cls(u, v) if u.variable < v.variable else cls(v, u)

    @property
    def clause_type(self) -> int:
        return int(self.first.positive) + int(self.second.positive)

    def as_ints(self) -> tuple[int, int]:
        return int(self.first), int(self.second)

    def __str__(self) -> str:
        return f"({self.first} v {self.second})"


def classify_clause(c: Clause) -> int:
    """Number of positive literals in ``c``."""
    return c.clause_type


@dataclass(frozen=True)
class ModelParams:
    alpha0: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "alpha2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name, a in zip(("alpha0", "alpha1", "alpha2"), self.alphas):
            if not (a >= 0 and math.isfinite(a)):
                raise FormulaError(f"{name} must be a finite nonnegative number, got {a!r}")

    @property
    def alphas(self) -> tuple[float, float, float]:
        return (self.alpha0, self.alpha1, self.alpha2)

    @property
    def alpha_max(self) -> float:
        return max(self.alphas)

    @property
    def rho(self) -> float:
        return 0.5 * (self.alpha1 + math.sqrt(self.alpha0 * self.alpha2))

    def scaled(self, lam: float) -> "ModelParams":
        return ModelParams(lam * self.alpha0, lam * self.alpha1, lam * self.alpha2)

    def probabilities(self, n: int) -> tuple[float, float, float]:
        """Per-clause presence probabilities ``alpha_i / 2n``; rejects values above 1."""
        probs = tuple(a / (2 * n) for a in self.alphas)
        if any(p > 1 for p in probs):
            raise FormulaError(f"alpha_i/2n exceeds 1 for n={n} and alphas={self.alphas}")
        return probs  # type: ignore[return-value]

    @classmethod
    def parse(cls, text: str) -> "ModelParams":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise FormulaError(f"expected three comma-separated alphas, got {text!r}")
        return cls(*(float(p) for p in parts))


@dataclass(frozen=True)
class LazyFormula:
    """A random formula from the generalized model whose clauses are revealed on demand.

    Explorations over a ``LazyFormula`` flip each clause's coin the first time
    the clause is examined, which is distribution-identical to exploring a
    fully sampled formula.
    """

    n: int
    params: ModelParams

    def __post_init__(self):
        if self.n < 2:
            raise FormulaError("n must be at least 2")
        self.params.probabilities(self.n)


def _canonical(arr: np.ndarray) -> np.ndarray:
    a, b = arr[:, 0], arr[:, 1]
    swap = np.abs(a) > np.abs(b)
    lo = np.where(swap, b, a)
    hi = np.where(swap, a, b)
    order = np.lexsort((hi, lo, np.abs(hi), np.abs(lo)))
    out = np.stack([lo[order], hi[order]], axis=1)
    if len(out) > 1:
        keep = np.ones(len(out), dtype=bool)
        keep[1:] = np.any(out[1:] != out[:-1], axis=1)
        out = out[keep]
    return np.ascontiguousarray(out)


class Formula:
    """A duplicate-free set of 2-clauses over variables ``1..n``.

    ``clause_array`` is an ``(m, 2)`` int64 array of DIMACS literals in canonical
    order (by lower variable, then higher variable, then signs).
    """

    __slots__ = ("n", "_clauses", "seed")

    def __init__(self, n: int, clauses=(), seed: int | None = None):
        n = int(n)
        if n < 1:
            raise FormulaError("a formula needs at least one variable")
        if isinstance(clauses, np.ndarray):
            arr = np.asarray(clauses, dtype=np.int64).reshape(-1, 2)
        else:
            rows = []
            for c in clauses:
                if isinstance(c, Clause):
                    rows.append(c.as_ints())
                else:
                    u, v = c
                    rows.append((int(u), int(v)))
            arr = np.array(rows, dtype=np.int64).reshape(-1, 2)
        if len(arr):
            va, vb = np.abs(arr[:, 0]), np.abs(arr[:, 1])
            if np.any(va == 0) or np.any(vb == 0):
                raise FormulaError("literal 0 is not a literal")
            if np.any(va > n) or np.any(vb > n):
                raise FormulaError(f"clause variable outside [1, {n}]")
            if np.any(va == vb):
                bad = arr[np.argmax(va == vb)]
                raise FormulaError(f"clause {tuple(bad)} repeats a variable")
        arr = _canonical(arr)
        arr.setflags(write=False)
        self.n = n
        self._clauses = arr
        self.seed = seed

    @property
    def clause_array(self) -> np.ndarray:
        return self._clauses

    @property
    def m(self) -> int:
        return len(self._clauses)

    def __len__(self) -> int:
        return len(self._clauses)

    def __iter__(self) -> Iterator[Clause]:
        for a, b in self._clauses:
            yield Clause(Literal.from_int(a), Literal.from_int(b))

    def __contains__(self, c) -> bool:
        c = c if isinstance(c, Clause) else Clause.of(*c)
        a, b = c.as_ints()
        return bool(np.any((self._clauses[:, 0] == a) & (self._clauses[:, 1] == b)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Formula):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._clauses, other._clauses)

    def __hash__(self):
        return hash((self.n, self._clauses.tobytes()))

    def __repr__(self) -> str:
        return f"Formula(n={self.n}, m={self.m}, seed={self.seed})"

    @property
    def clauses(self) -> frozenset[Clause]:
        return frozenset(self)

    def type_counts(self) -> tuple[int, int, int]:
        pos = (self._clauses > 0).sum(axis=1)
        return tuple(int(np.count_nonzero(pos == i)) for i in range(3))  # type: ignore[return-value]

    def with_clauses(self, extra: Iterable) -> "Formula":
        rows = [c.as_ints() if isinstance(c, Clause) else tuple(c) for c in extra]
        arr = np.concatenate([self._clauses, np.array(rows, dtype=np.int64).reshape(-1, 2)])
        return Formula(self.n, arr)

    def evaluate(self, assignment) -> bool:
        return evaluate(self, assignment)

    def to_dimacs(self) -> str:
        return write_dimacs(self)


def evaluate(f: Formula, assignment: Sequence[bool]) -> bool:
    """True iff every clause of ``f`` has a true literal under ``assignment``."""
    values = np.asarray(assignment, dtype=bool).ravel()
    if len(values) != f.n:
        raise FormulaError(f"assignment has length {len(values)}, formula has {f.n} variables")
    if f.m == 0:
        return True
    cl = f.clause_array
    sat = values[np.abs(cl) - 1] == (cl > 0)
    return bool(np.all(sat.any(axis=1)))


def clause_space_sizes(n: int) -> tuple[int, int, int]:
    """Number of possible clauses of type 0, 1 and 2 on ``n`` variables."""
    pairs = n * (n - 1) // 2
    return pairs, 2 * pairs, pairs


def _unrank_pairs(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # colex order: r = j*(j-1)/2 + i with 0 <= i < j
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * r.astype(np.float64))) / 2.0).astype(np.int64)
    for _ in range(2):
        j = np.where(j * (j - 1) // 2 > r, j - 1, j)
        j = np.where((j + 1) * j // 2 <= r, j + 1, j)
    i = r - j * (j - 1) // 2
    return i, j


def sample_formula(n: int, params: ModelParams, seed: int) -> Formula:
    """Draw a formula from the generalized model.

    Each type-i clause is present independently with probability
    ``alpha_i / 2n``. Per type, the number of present clauses is drawn from the
    matching binomial and that many clauses are picked uniformly without
    replacement through a bijective ranking of the type's clause space. Type
    ``i`` uses the stream ``(seed, i)``.
    """
    n = int(n)
    if n < 2:
        raise FormulaError("n must be at least 2")
    probs = params.probabilities(n)
    sizes = clause_space_sizes(n)
    blocks = []
    for ctype in range(3):
        p, size = probs[ctype], sizes[ctype]
        if p == 0 or size == 0:
            continue
        rng = make_rng(seed, ctype)
        k = int(rng.binomial(size, p))
        if k == 0:
            continue
        ranks = np.sort(rng.choice(size, size=k, replace=False))
        if ctype == 1:
            i, jj = np.divmod(ranks, n - 1)
            j = jj + (jj >= i)
            blocks.append(np.stack([i + 1, -(j + 1)], axis=1))
        else:
            i, j = _unrank_pairs(ranks)
            sign = 1 if ctype == 2 else -1
            blocks.append(np.stack([sign * (i + 1), sign * (j + 1)], axis=1))
    arr = np.concatenate(blocks) if blocks else np.zeros((0, 2), dtype=np.int64)
    return Formula(n, arr, seed=int(seed))


def write_dimacs(f: Formula, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"c {line}\n")
    buf.write(f"p cnf {f.n} {f.m}\n")
    for a, b in f.clause_array:
        buf.write(f"{a} {b} 0\n")
    return buf.getvalue()


def read_dimacs(text: str) -> Formula:
    """Parse a DIMACS CNF whose clauses all have two strongly distinct literals."""
    header = None
    tokens: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: bad problem line {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise DimacsError(f"line {lineno}: bad problem line {line!r}") from None
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before problem line")
        try:
            tokens.extend(int(t) for t in line.split())
        except ValueError:
            raise DimacsError(f"line {lineno}: non-integer token") from None
    if header is None:
        raise DimacsError("missing 'p cnf' problem line")
    n, m = header
    if tokens and tokens[-1] != 0:
        raise DimacsError("last clause is not terminated by 0")
    rows = []
    current: list[int] = []
    for t in tokens:
        if t != 0:
            current.append(t)
            continue
        if len(current) != 2:
            raise DimacsError(f"clause {current} has length {len(current)}, expected 2")
        a, b = current
        if abs(a) == abs(b):
            raise DimacsError(f"clause {current} repeats variable {abs(a)}")
        if abs(a) > n or abs(b) > n:
            raise DimacsError(f"clause {current} uses a variable above n={n}")
        rows.append((a, b))
        current = []
    if len(rows) != m:
        raise DimacsError(f"header announces {m} clauses, found {len(rows)}")
    f = Formula(n, np.array(rows, dtype=np.int64).reshape(-1, 2))
    if f.m != m:
        raise DimacsError(f"{m - f.m} duplicate clause(s)")
    return f


@dataclass(frozen=True)
class Provenance:
    n: int
    alpha0: float
    alpha1: float
    alpha2: float
    seed: int | None

    @classmethod
    def of(cls, f: Formula, params: ModelParams) -> "Provenance":
        return cls(f.n, params.alpha0, params.alpha1, params.alpha2, f.seed)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Provenance":
        return cls(**json.loads(text))

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.alpha0, self.alpha1, self.alpha2)
