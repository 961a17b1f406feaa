"""Implication digraph, linear-time satisfiability and contradictory cycles."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .formula import Formula, FormulaError, Literal

BRUTE_FORCE_MAX_N = 25


@dataclass(frozen=True)
class ImplicationDigraph:
    """CSR adjacency over the 2n literal vertices (vertex ``2*(v-1) + neg``)."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_vertices(self) -> int:
        return 2 * self.n

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    def out_neighbors(self, u: Literal | int) -> np.ndarray:
        i = u.index if isinstance(u, Literal) else int(u)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def successors(self, u: Literal) -> list[Literal]:
        return [Literal.from_index(j) for j in self.out_neighbors(u)]

    def has_edge(self, a: Literal | int, b: Literal | int) -> bool:
        j = b.index if isinstance(b, Literal) else int(b)
        return bool(np.any(self.out_neighbors(a) == j))

    def edge_array(self) -> np.ndarray:
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), np.diff(self.indptr))
        return np.stack([src, self.indices], axis=1)

    def edges(self) -> set[tuple[Literal, Literal]]:
        return {(Literal.from_index(a), Literal.from_index(b)) for a, b in self.edge_array()}

    def is_skew_symmetric(self) -> bool:
        e = self.edge_array()
        fwd = {(int(a), int(b)) for a, b in e}
        return all((b ^ 1, a ^ 1) in fwd for a, b in fwd)


def literal_indices(lits: np.ndarray) -> np.ndarray:
    lits = np.asarray(lits, dtype=np.int64)
    return 2 * (np.abs(lits) - 1) + (lits < 0)


def build_digraph(f: Formula) -> ImplicationDigraph:
    """Clause (u v v) contributes the edges ~u -> v and ~v -> u."""
    nv = 2 * f.n
    cl = f.clause_array
    a = literal_indices(cl[:, 0])
    b = literal_indices(cl[:, 1])
    src = np.concatenate([a ^ 1, b ^ 1])
    dst = np.concatenate([b, a])
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=nv), out=indptr[1:])
    return ImplicationDigraph(f.n, indptr, np.ascontiguousarray(dst[order], dtype=np.int64))


def strongly_connected_components(g: ImplicationDigraph) -> tuple[np.ndarray, int]:
    """Component id per vertex, numbered in reverse topological order."""
    return _kernels.scc(g.indptr, g.indices, g.num_vertices)


@dataclass(frozen=True)
class SatVerdict:
    satisfiable: bool
    witness: np.ndarray | None = None
    contradiction_variable: int | None = None

    def __bool__(self) -> bool:
        return self.satisfiable


def _verdict(g: ImplicationDigraph) -> tuple[SatVerdict, np.ndarray]:
    comp, _ = strongly_connected_components(g)
    cpos, cneg = comp[0::2], comp[1::2]
    clash = np.flatnonzero(cpos == cneg)
    if len(clash):
        return SatVerdict(False, contradiction_variable=int(clash[0]) + 1), comp
    # a literal is true when its component comes earlier in reverse topological order
    return SatVerdict(True, witness=cpos < cneg), comp


def is_satisfiable(f: Formula) -> SatVerdict:
    return _verdict(build_digraph(f))[0]


def _bfs_path(g: ImplicationDigraph, src: int, dst: int, allowed: np.ndarray) -> list[int]:
    parent = {src: -1}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v == dst:
            break
        for w in g.out_neighbors(v):
            w = int(w)
            if allowed[w] and w not in parent:
                parent[w] = v
                queue.append(w)
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    return path[::-1]


def find_contradictory_cycle(f: Formula) -> tuple[list[Literal], list[Literal]] | None:
    """Shortest paths x ~> ~x and ~x ~> x inside the offending component, or None."""
    g = build_digraph(f)
    verdict, comp = _verdict(g)
    if verdict.satisfiable:
        return None
    x = Literal(verdict.contradiction_variable, True).index
    allowed = comp == comp[x]
    there = _bfs_path(g, x, x ^ 1, allowed)
    back = _bfs_path(g, x ^ 1, x, allowed)
    return [Literal.from_index(i) for i in there], [Literal.from_index(i) for i in back]


def is_path(g: ImplicationDigraph, path: list[Literal]) -> bool:
    return all(g.has_edge(a, b) for a, b in zip(path, path[1:]))


def brute_force_satisfiable(f: Formula, chunk_bits: int = 20) -> bool:
    """Exhaustive search over all 2^n assignments (n <= 25)."""
    if f.n > BRUTE_FORCE_MAX_N:
        raise FormulaError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got {f.n}")
    if f.m == 0:
        return True
    cl = f.clause_array
    shifts = np.abs(cl) - 1
    want = (cl > 0).astype(np.int64)
    total = 1 << f.n
    step = 1 << min(chunk_bits, f.n)
    for lo in range(0, total, step):
        idx = np.arange(lo, lo + step, dtype=np.int64)
        ok = np.ones(step, dtype=bool)
        for (sa, sb), (wa, wb) in zip(shifts, want):
            ok &= (((idx >> sa) & 1) == wa) | (((idx >> sb) & 1) == wb)
            if not ok.any():
                break
        if ok.any():
            return True
    return False
