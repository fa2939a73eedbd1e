"""
diagrank reductions - instance compilers and the witness maps that go with them.

Graph gadgets turn a 3-coloring question into (P1), (P2), (P3) or perturbed (P2)
instances; reduce_p3_to_p2 turns a (P3) instance into a (P2) one; the polynomial
compiler turns a system of equations into a rank-3 completion instance. Each compiler
returns the instance together with a forward witness (certificate -> Decomposition)
and, where the construction allows it, a backward witness.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.linalg
from rich.console import Console

from charsys import P1, P2, P3
from decompose import Decomposition, Instance
from errors import (DimensionError, EpsOutOfRangeError, FormatError, InstanceError, SMallTooSmallError,
                    WitnessError)
from polysolve import Monomial, Poly, PolySystem
from settings import ReductionParams
from symcore import EXACT, FLOAT, MODES, SymMatrix, to_exact

console = Console(stderr=True)

Pair = Tuple[int, int]
Coloring = Dict[int, int]

PEETERS_EDGES = ("ia", "ib", "ab", "jc", "jd", "cd", "aj", "id", "bc")


# -- graphs ----------------------------------------------------------------------------

def make_graph(n: int, edges: Iterable[Pair]) -> nx.Graph:
    """Simple undirected graph on vertices 0..n-1."""
    G = nx.Graph()
    G.add_nodes_from(range(n))
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(f"Edge {(u + 1, v + 1)} is outside the vertex range 1..{n}")
        if u == v:
            raise FormatError(f"Graph has a self-loop at vertex {u + 1}")
        G.add_edge(u, v)
    return G


def normalize_graph(G: nx.Graph) -> nx.Graph:
    """Relabel to 0..n-1 (sorted order) and reject loops, multi-edges and directions."""
    if G.is_directed() or G.is_multigraph():
        raise FormatError("Graphs must be simple and undirected")
    loops = list(nx.selfloop_edges(G))
    if loops:
        raise FormatError(f"Graph has a self-loop at vertex {loops[0][0]}")
    if list(G.nodes) == list(range(G.number_of_nodes())):
        return G
    return nx.convert_node_labels_to_integers(G, ordering="sorted")


def nonedges(G: nx.Graph) -> List[Pair]:
    return [(p, q) for p, q in combinations(range(G.number_of_nodes()), 2) if not G.has_edge(p, q)]


def check_coloring(G: nx.Graph, coloring: Union[Coloring, Sequence[int]]) -> Coloring:
    """
    Validate a 3-coloring with colors 0, 1, 2.

    Raises:
        WitnessError: a vertex is uncolored, a color is out of range or an edge is
            monochromatic.
    """
    if not isinstance(coloring, dict):
        coloring = dict(enumerate(coloring))
    missing = [v + 1 for v in G.nodes if v not in coloring]
    if missing:
        raise WitnessError(f"Coloring misses vertices {missing[:5]}")
    bad = [v + 1 for v in G.nodes if coloring[v] not in (0, 1, 2)]
    if bad:
        raise WitnessError(f"Colors must be 1, 2 or 3; vertex {bad[0]} has another value")
    for u, v in G.edges:
        if coloring[u] == coloring[v]:
            raise WitnessError(f"Coloring is not proper: edge {(u + 1, v + 1)} is monochromatic")
    return {v: int(coloring[v]) for v in G.nodes}


def peeters_supergraph(G: nx.Graph) -> nx.Graph:
    """
    Add a triangular prism between every pair of vertices.

    For i < j the new vertices a, b, c, d get the edges i-a, i-b, a-b, j-c, j-d, c-d,
    a-j, i-d, b-c. The gadgets are recorded in ``graph["gadgets"]``.
    """
    G = normalize_graph(G)
    n = G.number_of_nodes()
    H = nx.Graph()
    H.add_nodes_from(range(n))
    H.add_edges_from(G.edges)
    gadgets: Dict[Pair, Tuple[int, int, int, int]] = {}
    nxt = n
    for i, j in combinations(range(n), 2):
        a, b, c, d = range(nxt, nxt + 4)
        nxt += 4
        names = {"i": i, "j": j, "a": a, "b": b, "c": c, "d": d}
        H.add_edges_from((names[e[0]], names[e[1]]) for e in PEETERS_EDGES)
        gadgets[(i, j)] = (a, b, c, d)
    H.graph["gadgets"] = gadgets
    H.graph["base_order"] = n
    return H


def extend_coloring_to_supergraph(H: nx.Graph, coloring: Union[Coloring, Sequence[int]]) -> Coloring:
    """Complete a coloring of the base vertices gadget by gadget."""
    if "gadgets" not in H.graph:
        raise WitnessError("Graph does not carry Peeters gadgets")
    n = H.graph["base_order"]
    base = nx.Graph(H.subgraph(range(n)))
    if not isinstance(coloring, dict):
        coloring = dict(enumerate(coloring))
    full = check_coloring(base, {v: coloring.get(v) for v in range(n)})
    for (i, j), gadget in H.graph["gadgets"].items():
        for colors in product(range(3), repeat=4):
            trial = dict(zip(gadget, colors))
            trial[i], trial[j] = full[i], full[j]
            if all(trial[u] != trial[v] for u, v in H.subgraph((i, j) + gadget).edges):
                full.update(zip(gadget, colors))
                break
        else:
            raise WitnessError(f"Gadget between {i + 1} and {j + 1} cannot be colored")
    return full


def robustify(G: nx.Graph, c: int) -> nx.Graph:
    """
    Replace each vertex by a complete 3-partite graph with parts of size c + 1.

    Part 0 of each gadget is exposed; every original edge becomes a complete bipartite
    graph between the two exposed parts.
    """
    if c < 0:
        raise ValueError(f"Robustness parameter must be nonnegative, got {c}")
    G = normalize_graph(G)
    size = c + 1
    n = G.number_of_nodes()
    H = nx.Graph()
    H.add_nodes_from(range(3 * size * n))
    parts = {v: [list(range(3 * size * v + p * size, 3 * size * v + (p + 1) * size)) for p in range(3)]
             for v in range(n)}
    for v in range(n):
        for p, q in combinations(range(3), 2):
            H.add_edges_from(product(parts[v][p], parts[v][q]))
    for u, v in G.edges:
        H.add_edges_from(product(parts[u][0], parts[v][0]))
    H.graph["exposed"] = {v: parts[v][0] for v in range(n)}
    H.graph["robust_c"] = c
    return H


def lift_robust_coloring(G: nx.Graph, coloring: Union[Coloring, Sequence[int]], c: int) -> Coloring:
    """Part p of vertex v gets color (color(v) + p) mod 3."""
    G = normalize_graph(G)
    col = check_coloring(G, coloring)
    size = c + 1
    return {3 * size * v + p * size + t: (col[v] + p) % 3
            for v in range(G.number_of_nodes()) for p in range(3) for t in range(size)}


def _staged(G: nx.Graph, peeters: bool, robust_c: Optional[int]) -> Tuple[nx.Graph, Callable[[Any], Coloring]]:
    """Apply the optional Peeters and robustify stages; return the graph and a coloring lift."""
    G = normalize_graph(G)
    H = G
    lifts: List[Callable[[Coloring], Coloring]] = []
    if peeters:
        H = peeters_supergraph(H)
        lifts.append(lambda col, H=H: extend_coloring_to_supergraph(H, col))
    if robust_c is not None:
        base = H
        H = robustify(base, robust_c)
        lifts.append(lambda col, base=base, c=robust_c: lift_robust_coloring(base, col, c))

    def lift(coloring: Any) -> Coloring:
        col = check_coloring(G, coloring)
        for step in lifts:
            col = step(col)
        return check_coloring(H, col)

    return H, lift


# -- compiled instances ------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionWitness:
    """
    Constructive directions of a reduction.

    ``forward`` maps a source certificate (coloring, solution vector, fill) to a
    Decomposition of the compiled instance; ``backward`` maps a Decomposition of the
    compiled instance back to a source certificate.
    """
    forward: Callable[[Any], Decomposition]
    backward: Optional[Callable[[Decomposition], Any]] = None
    source: str = ""


@dataclass(frozen=True)
class CompiledInstance:
    instance: Instance
    witness: ReductionWitness
    params: Dict[str, Any] = field(default_factory=dict)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise FormatError(f"Unknown mode: {mode}")


def _matrix(data: np.ndarray, mode: str) -> SymMatrix:
    if mode == EXACT:
        return SymMatrix(data, EXACT)
    return SymMatrix(np.array(data, dtype=float), FLOAT)


def _scalars(values: Iterable[Any], mode: str) -> List[Any]:
    if mode == EXACT:
        return [to_exact(v) for v in values]
    return [float(v) for v in values]


def _three_block_matrix(G: nx.Graph) -> Tuple[np.ndarray, List[Pair], List[Pair]]:
    """
    The 3n x 3n block matrix shared by the (P1), (P2) and perturbed constructions.

    Diagonal 0, 1 inside each vertex block, 2 on the nine positions of every nonedge,
    0 on the nine positions of every edge. Also returns the positions holding a 2 and
    the nonedges they come from.
    """
    n = G.number_of_nodes()
    A = np.zeros((3 * n, 3 * n), dtype=object)
    for v in range(n):
        for s, t in combinations(range(3), 2):
            A[3 * v + s, 3 * v + t] = A[3 * v + t, 3 * v + s] = 1
    positions: List[Pair] = []
    owners: List[Pair] = []
    for p, q in nonedges(G):
        for s, t in product(range(3), repeat=2):
            k, l = 3 * p + s, 3 * q + t
            A[k, l] = A[l, k] = 2
            positions.append((k, l))
            owners.append((p, q))
    return A, positions, owners


# -- (P3) from a graph -------------------------------------------------------------------

def build_p3_instance(G: nx.Graph, peeters: bool = True, mode: str = EXACT) -> CompiledInstance:
    """
    (P3) instance at rank 3 that is feasible iff G is 3-colorable.

    A = I kron (all-ones 3x3) - I over the vertices of the supergraph; the fixed pattern
    holds the nine pairs of every edge and the three pairs inside every vertex block.
    The forward witness puts 1 on the diagonal and on every pair of same-colored blocks.
    """
    _check_mode(mode)
    H, lift = _staged(G, peeters, None)
    N = H.number_of_nodes()
    A = np.zeros((3 * N, 3 * N), dtype=object)
    pattern = set()
    for v in range(N):
        for s, t in combinations(range(3), 2):
            A[3 * v + s, 3 * v + t] = A[3 * v + t, 3 * v + s] = 1
            pattern.add((3 * v + s, 3 * v + t))
    for p, q in H.edges:
        p, q = min(p, q), max(p, q)
        pattern.update((3 * p + s, 3 * q + t) for s, t in product(range(3), repeat=2))

    provenance = {"compiler": "p3", "peeters": peeters, "vertices": G.number_of_nodes(),
                  "edges": G.number_of_edges()}
    inst = Instance(kind=P3, A=_matrix(A, mode), r=3, pattern=frozenset(pattern), provenance=provenance)

    def forward(coloring: Any) -> Decomposition:
        col = lift(coloring)
        L = np.zeros((3 * N, 3 * N), dtype=object)
        for i in range(3 * N):
            L[i, i] = 1
        for p, q in combinations(range(N), 2):
            if col[p] == col[q]:
                L[3 * p:3 * p + 3, 3 * q:3 * q + 3] = 1
                L[3 * q:3 * q + 3, 3 * p:3 * p + 3] = 1
        return Decomposition(L=_matrix(L, mode))

    params = {"vertices": N, "edges": H.number_of_edges(), "pattern_size": len(pattern)}
    return CompiledInstance(inst, ReductionWitness(forward, source="3-coloring"), params)


# -- (P1) / (P2) from a graph ------------------------------------------------------------

def _build_incidence_instance(G: nx.Graph, kind: str, peeters: bool, mode: str) -> CompiledInstance:
    _check_mode(mode)
    H, lift = _staged(G, peeters, None)
    N = H.number_of_nodes()
    A, positions, _ = _three_block_matrix(H)
    m = len(positions)
    degree = [0] * (3 * N)
    for k, l in positions:
        degree[k] += 1
        degree[l] += 1
    shift = 2 * max(degree, default=0) + 1

    size = m + 3 * N
    B = np.zeros((size, size), dtype=object)
    B[m:, m:] = A
    for e, (k, l) in enumerate(positions):
        B[m + k, e] = B[e, m + k] = 1
        B[m + l, e] = B[e, m + l] = 1
    if kind == P1:
        for i in range(size):
            B[i, i] += shift

    provenance = {"compiler": kind.lower(), "peeters": peeters, "vertices": G.number_of_nodes(),
                  "edges": G.number_of_edges()}
    inst = Instance(kind=kind, A=_matrix(B, mode), r=m + 3, provenance=provenance)
    half = Fraction(1, 2)

    def forward(coloring: Any) -> Decomposition:
        col = lift(coloring)
        d_edge: List[Any] = []
        same = [0] * (3 * N)
        differ = [0] * (3 * N)
        for k, l in positions:
            agree = col[k // 3] == col[l // 3]
            counts = same if agree else differ
            counts[k] += 1
            counts[l] += 1
            if kind == P1:
                d_edge.append(shift - 1 if agree else shift - half)
            else:
                d_edge.append(1 if agree else half)
        if kind == P1:
            d_vertex = [shift - 1 - same[t] - 2 * differ[t] for t in range(3 * N)]
        else:
            d_vertex = [1 + same[t] + 2 * differ[t] for t in range(3 * N)]
        return Decomposition(d=_scalars(d_edge + d_vertex, mode))

    params = {"vertices": N, "edges": H.number_of_edges(), "m": m, "k": shift if kind == P1 else None}
    return CompiledInstance(inst, ReductionWitness(forward, source="3-coloring"), params)


def build_p1_instance(G: nx.Graph, peeters: bool = True, mode: str = EXACT) -> CompiledInstance:
    """
    (P1) instance B = [[0, K^T], [K, A]] + kI at rank m + 3.

    K is the node-edge incidence matrix of the graph of 2-entries of A (m edges) and
    k = 2 * max degree + 1. The forward witness uses d = k - 1 on same-colored
    incidence columns, k - 1/2 on the others, and k - 1 - n1 - 2 n2 on the vertex part.
    """
    return _build_incidence_instance(G, P1, peeters, mode)


def build_p2_instance(G: nx.Graph, peeters: bool = True, mode: str = EXACT) -> CompiledInstance:
    """(P2) version of build_p1_instance without the kI shift; witness entries 1 and 1/2."""
    return _build_incidence_instance(G, P2, peeters, mode)


# -- (P3) -> (P2) ------------------------------------------------------------------------

def reduce_p3_to_p2(inst: Instance) -> CompiledInstance:
    """
    Compile a (P3) instance with m free pairs into a (P2) instance of size 2m + n.

    B = [[0, 0, K^T], [0, 0, Kbar^T], [K, Kbar, A]] where K is the node-edge incidence
    matrix of the free pairs and Kbar the node-arc one (tail at the smaller index).
    rank(B + Diag([u; v; d])) = 2m + rank(A + R) whenever u, v > 0.
    """
    if inst.kind != P3:
        raise InstanceError(f"reduce_p3_to_p2 needs a (P3) instance, got {inst.kind}")
    pairs = inst.free_pairs
    m, n = len(pairs), inst.n
    exact = inst.A.is_exact
    mode = EXACT if exact else FLOAT
    size = 2 * m + n
    B = np.zeros((size, size), dtype=object)
    B[2 * m:, 2 * m:] = inst.A.array
    for e, (i, j) in enumerate(pairs):
        if i == j:
            raise InstanceError(f"Free pair {(i + 1, j + 1)} would give a zero incidence column")
        B[2 * m + i, e] = B[2 * m + j, e] = 1
        B[2 * m + i, m + e] = 1
        B[2 * m + j, m + e] = -1
    provenance = {"compiler": "p3-to-p2", "source_n": n, "free_pairs": [[i + 1, j + 1] for i, j in pairs]}
    target = Instance(kind=P2, A=_matrix(B, mode), r=2 * m + inst.r, provenance=provenance)

    def forward(dec: Decomposition) -> Decomposition:
        R = dec.L
        if R is None or R.n != n:
            raise WitnessError(f"Expected an {n}x{n} fill")
        stray = [(i + 1, j + 1) for i, j in sorted(inst.pattern) if R[i, j] != 0]
        if stray:
            raise WitnessError(f"Fill does not vanish on the fixed pattern at {stray[:5]}")
        use_exact = exact and R.is_exact
        one = Fraction(1) if use_exact else 1.0
        u, v = [], []
        d = list(R.diagonal()) if use_exact else [float(x) for x in R.diagonal()]
        for i, j in pairs:
            r_ij = R[i, j] if use_exact else float(R[i, j])
            v_e = one / (abs(r_ij) + 1)
            u_e = v_e / (1 - v_e * r_ij)
            u.append(u_e)
            v.append(v_e)
            d[i] += 1 / u_e + 1 / v_e
            d[j] += 1 / u_e + 1 / v_e
        return Decomposition(d=_scalars(u + v + d, EXACT if use_exact else FLOAT))

    def backward(dec: Decomposition) -> Decomposition:
        if dec.d is None or len(dec.d) != size:
            raise WitnessError(f"Expected a diagonal with {size} entries")
        use_exact = exact and not any(isinstance(x, float) for x in dec.d)
        values = _scalars(dec.d, EXACT if use_exact else FLOAT)
        u, v, d = values[:m], values[m:2 * m], values[2 * m:]
        if any(x <= 0 for x in u + v):
            raise WitnessError("Incidence diagonal entries must be positive")
        R = np.zeros((n, n), dtype=object)
        for i in range(n):
            R[i, i] = d[i]
        for (i, j), u_e, v_e in zip(pairs, u, v):
            R[i, i] -= 1 / u_e + 1 / v_e
            R[j, j] -= 1 / u_e + 1 / v_e
            R[i, j] = R[j, i] = -1 / u_e + 1 / v_e
        return Decomposition(L=_matrix(R, EXACT if use_exact else FLOAT))

    return CompiledInstance(target, ReductionWitness(forward, backward, source="(P3) fill"), {"m": m})


# -- partial matrices and the polynomial compiler ----------------------------------------

@dataclass(frozen=True)
class PartialMatrix:
    """
    Symmetric matrix with unspecified entries.

    ``values`` holds the specified entries (anything where ``mask`` is False is
    ignored); ``mask[i, j]`` is True when entry (i, j) is specified.
    """
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.mask.shape or self.values.ndim != 2 \
                or self.values.shape[0] != self.values.shape[1]:
            raise DimensionError(f"Values {self.values.shape} and mask {self.mask.shape} must be the same square shape")
        if not np.array_equal(self.mask, self.mask.T):
            raise FormatError("Specification mask is not symmetric")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]]) -> "PartialMatrix":
        """Build from rows where None or "*" marks an unspecified entry."""
        n = len(rows)
        values = np.zeros((n, n), dtype=object)
        mask = np.zeros((n, n), dtype=bool)
        for i, row in enumerate(rows):
            if len(row) != n:
                raise DimensionError(f"Row {i + 1} has {len(row)} entries, expected {n}")
            for j, x in enumerate(row):
                if x is None or x == "*":
                    continue
                values[i, j] = to_exact(x)
                mask[i, j] = True
        for i, j in zip(*np.nonzero(mask)):
            if not mask[j, i] or values[i, j] != values[j, i]:
                raise FormatError(f"Entries {(i + 1, j + 1)} and {(j + 1, i + 1)} disagree")
        return cls(values, mask)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def unspecified(self) -> List[Pair]:
        """Unspecified positions (i <= j), diagonal included."""
        return [(i, j) for i in range(self.n) for j in range(i, self.n) if not self.mask[i, j]]

    def pattern(self) -> frozenset:
        rows, cols = np.nonzero(np.triu(self.mask, 1))
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def fill(self, entries: Dict[Pair, Any]) -> SymMatrix:
        """Completion with the given values on unspecified positions."""
        exact = all(not isinstance(v, float) for v in entries.values())
        data = np.where(self.mask, self.values, 0).astype(object)
        for (i, j), v in entries.items():
            if self.mask[i, j]:
                raise WitnessError(f"Entry {(i + 1, j + 1)} is specified")
            data[i, j] = data[j, i] = v
        return SymMatrix.from_dense(data, mode=EXACT if exact else FLOAT, check=False)

    def agrees(self, M: SymMatrix, tol: float = 0.0) -> bool:
        """M matches every specified entry (exactly when tol is 0)."""
        if M.n != self.n:
            return False
        rows, cols = np.nonzero(self.mask)
        got = M.array[rows, cols]
        want = self.values[rows, cols]
        if tol == 0:
            return bool(np.all(got == want))
        return bool(np.all(np.abs(got.astype(float) - want.astype(float)) <= tol))

    def to_instance(self, r: int, provenance: Optional[Dict[str, Any]] = None) -> Instance:
        """(P3) instance: specified off-diagonal entries become the fixed pattern."""
        if self.mask.diagonal().any():
            raise InstanceError("A (P3) instance needs every diagonal entry unspecified")
        exact = self.values.dtype == object or np.issubdtype(self.values.dtype, np.integer)
        data = np.where(self.mask, self.values, 0)
        A = SymMatrix.from_dense(data.astype(object) if exact else data.astype(float),
                                 mode=EXACT if exact else FLOAT, check=False)
        return Instance(kind=P3, A=A, r=r, pattern=self.pattern(), provenance=provenance or {})


Terms = Tuple[Tuple[Monomial, Any], ...]


def _canon(terms: Dict[Monomial, Any]) -> Terms:
    return tuple(sorted((m, c) for m, c in terms.items() if c != 0))


def _mul(a: Terms, b: Terms) -> Dict[Monomial, Any]:
    out: Dict[Monomial, Any] = {}
    for ma, ca in a:
        for mb, cb in b:
            m = tuple(x + y for x, y in zip(ma, mb))
            out[m] = out.get(m, 0) + ca * cb
    return out


def _evaluate(terms: Terms, point: Sequence[Any]) -> Any:
    total: Any = 0
    for monom, coeff in terms:
        term = coeff
        for x, e in zip(point, monom):
            if e:
                term = term * x ** e
        total = total + term
    return total


class _ShitovTable:
    """sigma(F), the triples of H-bar and the specification of B-bar."""

    def __init__(self, system: PolySystem):
        for eq in system.equations:
            if any(isinstance(c, float) for _, c in eq.terms):
                console.print("[yellow]Float coefficients: the compiled instance is not exact[/yellow]")
                break
        self.system = system
        self.nvars = len(system.variables)
        self.zero_monomial = (0,) * self.nvars
        self._index: Dict[Terms, int] = {}
        self.sigma: List[Terms] = []
        self._build_sigma()
        one = self._add({self.zero_monomial: 1})
        minus_one = self._add({self.zero_monomial: -1})
        zero = self._add({})
        units = {one, minus_one}
        S = len(self.sigma)
        self.H = [t for t in product(range(S), repeat=3) if units & set(t)]
        self.identity = [(one, zero, zero), (zero, one, zero), (zero, zero, one)]
        self.H_bar = self.H + [e for e in self.identity for _ in range(2)]
        self.position = {t: k for k, t in enumerate(self.H)}
        self.anchor = [len(self.H) + 2 * i for i in range(3)]
        self.probes = [self.position[(self._index[_canon({self._unit(i): 1})], one, zero)]
                       for i in range(self.nvars)]

    def _unit(self, i: int) -> Monomial:
        return tuple(1 if k == i else 0 for k in range(self.nvars))

    def _add(self, terms: Dict[Monomial, Any]) -> int:
        key = _canon(terms)
        if key not in self._index:
            self._index[key] = len(self.sigma)
            self.sigma.append(key)
        return self._index[key]

    def _add_pm(self, terms: Dict[Monomial, Any]) -> None:
        self._add(terms)
        self._add({m: -c for m, c in terms.items()})

    def _build_sigma(self) -> None:
        z = self.zero_monomial
        for eq in self.system.equations:
            for monom, coeff in eq.terms:
                self._add_pm({z: 1})
                self._add_pm({z: coeff})
                prefix = [0] * self.nvars
                for i, e in enumerate(monom):
                    for _ in range(e):
                        prefix[i] += 1
                        self._add_pm({tuple(prefix): 1})
                self._add({monom: coeff})
            self._add({})
            partial: Dict[Monomial, Any] = {}
            for monom, coeff in eq.terms:
                partial[monom] = partial.get(monom, 0) + coeff
                self._add_pm(dict(partial))
            for i in range(self.nvars):
                self._add_pm({self._unit(i): 1})

    def polys(self) -> List[Poly]:
        return [Poly.from_terms(self.system.variables, dict(t)) for t in self.sigma]

    def specification(self) -> PartialMatrix:
        """
        B-bar: 0 where W-bar(u, v) is one of the equations, the constant where W-bar(u, v)
        has degree 0, unspecified elsewhere and on the whole diagonal.
        """
        S = len(self.sigma)
        products = [[_mul(self.sigma[a], self.sigma[b]) for b in range(S)] for a in range(S)]
        basis: Dict[Monomial, int] = {self.zero_monomial: 0}
        for row in products:
            for terms in row:
                for m in terms:
                    basis.setdefault(m, len(basis))
        coeffs = [c for row in products for terms in row for c in terms.values()]
        coeffs += [c for eq in self.system.equations for _, c in eq.terms]
        if all(isinstance(c, int) and abs(c) < 2 ** 40 for c in coeffs):
            dtype: Any = np.int64
        elif any(isinstance(c, float) for c in coeffs):
            dtype = float
        else:
            dtype = object
        table = np.zeros((S, S, len(basis)), dtype=dtype)
        for a, b in product(range(S), repeat=2):
            for m, c in products[a][b].items():
                table[a, b, basis[m]] = c
        targets = []
        for eq in self.system.equations:
            vec = np.zeros(len(basis), dtype=dtype)
            for m, c in eq.terms:
                vec[basis[m]] = c
            targets.append(vec)

        idx = np.array(self.H_bar, dtype=np.int64)
        N = len(idx)
        values = np.zeros((N, N), dtype=dtype)
        mask = np.zeros((N, N), dtype=bool)
        for u in range(N):
            a, b, c = idx[u]
            W = table[a, idx[:, 0]] + table[b, idx[:, 1]] + table[c, idx[:, 2]]
            constant = ~np.any(W[:, 1:] != 0, axis=1)
            in_system = np.zeros(N, dtype=bool)
            for vec in targets:
                in_system |= np.all(W == vec, axis=1)
            mask[u] = constant | in_system
            values[u] = np.where(in_system, 0, W[:, 0])
        np.fill_diagonal(mask, False)
        np.fill_diagonal(values, 0)
        return PartialMatrix(values, mask)

    def factor(self, xi: Sequence[Any]) -> np.ndarray:
        """U-bar[xi] as an N x 3 array."""
        vals = [_evaluate(t, xi) for t in self.sigma]
        exact = all(not isinstance(v, float) for v in vals)
        return np.array([[vals[a], vals[b], vals[c]] for a, b, c in self.H_bar],
                        dtype=object if exact else float)

    def residuals(self, xi: Sequence[Any]) -> List[Any]:
        return [eq.evaluate(list(xi)) for eq in self.system.equations]


@dataclass(frozen=True)
class PartialCompilation:
    """Compiled rank-3 completion instance of a polynomial system."""
    partial: PartialMatrix
    r: int
    witness: ReductionWitness
    table: Any = field(repr=False, compare=False)
    params: Dict[str, Any] = field(default_factory=dict)

    def completion(self, xi: Sequence[Any]) -> SymMatrix:
        """U-bar[xi]^T U-bar[xi]."""
        U = self.table.factor(xi)
        mode = EXACT if U.dtype == object else FLOAT
        return SymMatrix(U @ U.T, mode)

    def to_instance(self) -> Instance:
        return self.partial.to_instance(self.r, provenance={"compiler": "shitov", **self.params})


def shitov_sigma(system: PolySystem) -> List[Poly]:
    """The monomial/partial-sum set sigma(F), in first-appearance order."""
    return _ShitovTable(system).polys()


def build_H(system: PolySystem) -> List[Tuple[Poly, Poly, Poly]]:
    """Triples over sigma(F) with at least one entry equal to 1 or -1."""
    table = _ShitovTable(system)
    polys = table.polys()
    return [(polys[a], polys[b], polys[c]) for a, b, c in table.H]


def _solves(system: PolySystem, residuals: Sequence[Any], xi: Sequence[Any], tol: float) -> bool:
    scale = max([1.0] + [abs(float(x)) for x in xi])
    for eq, res in zip(system.equations, residuals):
        if isinstance(res, float) or any(isinstance(x, float) for x in xi):
            if abs(float(res)) > tol * max(1.0, eq.max_abs_coefficient()) * scale ** max(1, eq.degree()):
                return False
        elif res != 0:
            return False
    return True


def build_Bbar(system: PolySystem, tol: float = 1e-9) -> PartialCompilation:
    """
    Rank-3 completion instance of a polynomial system, every diagonal entry unspecified.

    The columns are the triples of H plus two extra copies of each identity column.
    Forward: a solution xi gives the fill of U-bar[xi]^T U-bar[xi]. Backward: a rank-3
    PSD completion is factored, normalized by the first extra identity copies, and xi_i is
    read off the column (x_i, 1, 0).
    """
    table = _ShitovTable(system)
    partial = table.specification()
    base = np.where(partial.mask, partial.values, 0)

    def forward(xi: Sequence[Any]) -> Decomposition:
        if len(xi) != table.nvars:
            raise WitnessError(f"Expected {table.nvars} values, got {len(xi)}")
        if not _solves(system, table.residuals(xi), xi, tol):
            raise WitnessError("The point does not solve the system")
        U = table.factor(xi)
        M = U @ U.T
        if U.dtype == object:
            return Decomposition(L=SymMatrix(M - base.astype(object), EXACT))
        return Decomposition(L=SymMatrix(M - base.astype(float), FLOAT))

    def backward(dec: Decomposition) -> Tuple[float, ...]:
        if dec.L is None or dec.L.n != partial.n:
            raise WitnessError(f"Expected a {partial.n}x{partial.n} fill")
        M = dec.L.to_float().array + base.astype(float)
        N = M.shape[0]
        w, V = scipy.linalg.eigh(M, subset_by_index=[N - 3, N - 1])
        R = (V * np.sqrt(np.clip(w, 0.0, None))).T
        C = R[:, table.anchor]
        try:
            U = scipy.linalg.solve(C, R)
        except (np.linalg.LinAlgError, ValueError):
            raise WitnessError("Identity columns of the completion are singular")
        xi = tuple(float(U[0, k]) for k in table.probes)
        if not _solves(system, table.residuals(xi), xi, math.sqrt(tol)):
            raise WitnessError("The completion does not decode to a solution")
        return xi

    params = {"sigma": len(table.sigma), "H": len(table.H), "size": partial.n,
              "variables": list(system.variables)}
    return PartialCompilation(partial, 3, ReductionWitness(forward, backward, source="real solution"),
                              table, params)


def chain_system(n: int) -> PolySystem:
    """x1 = 2 and x_t = x_(t-1)^2; the only real solution is x_t = 2^(2^(t-1))."""
    if n < 1:
        raise ValueError(f"Chain length must be at least 1, got {n}")
    names = [f"x{t}" for t in range(1, n + 1)]
    equations = [Poly.parse("x1 - 2", names)]
    equations += [Poly.parse(f"x{t} - x{t - 1}^2", names) for t in range(2, n + 1)]
    return PolySystem(variables=tuple(names), equations=tuple(equations), meta={"source": "chain", "n": n})


def chain_solution(n: int) -> List[int]:
    return [2 ** (2 ** (t - 1)) for t in range(1, n + 1)]


# -- perturbed (P2) -----------------------------------------------------------------------

def appendix_delta(eps: Any, mbar: int, n: int) -> float:
    """delta = eps / (10 * 3^4 * sqrt(6) * mbar^2 * sqrt(n))."""
    return float(eps) / (10 * 3 ** 4 * math.sqrt(6) * mbar ** 2 * math.sqrt(n))


def appendix_eps_bound(eps0: float, mbar: int, n: int, phat: Any) -> float:
    return float(eps0) / (600 * mbar ** 2 * n * float(phat))


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)


def validate_appendix(s: Any, eps: Any, delta: Any, mbar: int, n: int, phat: Any) -> List[BoundCheck]:
    """Inequalities the forward witness relies on, evaluated for concrete parameters."""
    s, eps, delta, phat = float(s), float(eps), float(delta), float(phat)
    k_large = math.sqrt(18 * mbar) * s
    k_small = math.sqrt(27 * mbar * n) * s * delta
    d_inv = 18 * mbar / s ** 2
    d_norm = 6 * mbar * phat * eps
    return [
        BoundCheck("||K_sm||_F <= ||K_lg||_F / 2", k_small, k_large / 2),
        BoundCheck("||D||_F ||Diag(d_E)^-1||_F <= 1/2", d_norm * d_inv, 0.5),
        BoundCheck("small-entry term <= eps/2", 3 ** 4 * 5 * math.sqrt(6) * mbar ** 2 * math.sqrt(n) * delta,
                   eps / 2),
        BoundCheck("scale term <= eps/2", 2 ** 3 * 3 ** 9 * mbar ** 4 * phat * eps / s ** 2, eps / 2),
        BoundCheck("(1,1) block diagonally dominant", (9 * mbar - 1) * 2 * phat * eps, s ** 2 / 2),
    ]


def appendix_p2tilde_instance(G: nx.Graph, eps: Any, phat: Any = 1, s: Any = None, eps0: Optional[float] = None,
                              peeters: bool = False, robust_c: Optional[int] = None, mode: str = EXACT,
                              strict: bool = True) -> CompiledInstance:
    """
    Perturbed (P2) instance B = [[D, K^T], [K, A]] at rank 9 mbar + 3.

    A is the three-block matrix of the graph (after the optional Peeters and robustify
    stages), K has one column per 2-entry of A with s on its two positions and s * delta
    elsewhere, D has -2 phat eps off the diagonal and 0 on it.

    Args:
        eps: Perturbation budget; must not exceed eps0 / (600 mbar^2 n phat).
        s: Scale of the large entries of K (defaults to ReductionParams.s).
        strict: Raise when an inequality the witness relies on fails; otherwise only warn.

    Raises:
        EpsOutOfRangeError: eps is not in (0, bound].
        SMallTooSmallError: s violates one of the checked inequalities (strict mode).
    """
    _check_mode(mode)
    defaults = ReductionParams()
    s = defaults.s if s is None else s
    eps0 = defaults.eps0 if eps0 is None else eps0
    H, lift = _staged(G, peeters, robust_c)
    n = H.number_of_nodes()
    A, positions, owners = _three_block_matrix(H)
    mbar = len(positions) // 9
    if mbar == 0:
        raise InstanceError("The construction needs a graph with at least one nonedge")
    bound = appendix_eps_bound(eps0, mbar, n, phat)
    if not 0 < float(eps) <= bound:
        raise EpsOutOfRangeError(f"eps = {float(eps):.3e} is outside (0, {bound:.3e}] for mbar={mbar}, n={n}")
    delta_f = appendix_delta(eps, mbar, n)
    checks = validate_appendix(s, eps, delta_f, mbar, n, phat)
    failed = [c for c in checks if not c.ok]
    if failed:
        text = "; ".join(f"{c.name} ({c.lhs:.3e} > {c.rhs:.3e})" for c in failed)
        if strict:
            raise SMallTooSmallError(f"s = {s} is too small: {text}")
        console.print(f"[yellow]Warning: s = {s} violates {text}[/yellow]")

    # Built exactly and converted at the end: the witness perturbation sits far below
    # float rounding of the Schur complement.
    s_v, eps_v, phat_v, delta = to_exact(s), to_exact(eps), to_exact(phat), to_exact(delta_f)
    cols = len(positions)
    K = np.full((3 * n, cols), s_v * delta, dtype=object)
    K_large = np.zeros((3 * n, cols), dtype=object)
    for u, (k, l) in enumerate(positions):
        K[k, u] = K[l, u] = s_v
        K_large[k, u] = K_large[l, u] = s_v
    coupling = Fraction(2 * phat_v * eps_v)
    size = cols + 3 * n
    B = np.zeros((size, size), dtype=object)
    for u, w in combinations(range(cols), 2):
        B[u, w] = B[w, u] = -coupling
    B[cols:, :cols] = K
    B[:cols, cols:] = K.T
    B[cols:, cols:] = A

    pi0 = float(eps0) / (27 * mbar * n * float(s) ** 2 * delta_f)
    pi1 = 2 * float(phat) * float(eps) / (float(s) ** 2 * delta_f ** 2)
    provenance = {"compiler": "appendix-p2tilde", "peeters": peeters, "robust_c": robust_c,
                  "vertices": G.number_of_nodes(), "edges": G.number_of_edges(), "s": str(s),
                  "phat": str(phat), "eps0": eps0}
    inst = Instance(kind=P2, A=_matrix(B, mode), r=cols + 3, eps=eps_v if mode == EXACT else float(eps),
                    provenance=provenance)

    def forward(coloring: Any) -> Decomposition:
        col = lift(coloring)
        big = Fraction(s_v * s_v)
        d_edge = np.array([big / 2 if col[p] != col[q] else big for p, q in owners], dtype=object)
        # D + Diag(d_E) = Diag(d_E + c) - c 11^T, inverted by Sherman-Morrison.
        w = 1 / (d_edge + coupling)
        g = K @ w
        denom = 1 - coupling * w.sum()
        S1 = A - (K * w) @ K.T - coupling * np.outer(g, g) / denom
        S2 = A - (K_large / d_edge) @ K_large.T
        H3 = S2 - S1
        for i in range(3 * n):
            H3[i, i] = 0
        d_vertex = [1 - S1[i, i] for i in range(3 * n)]
        Hfull = np.zeros((size, size), dtype=object)
        Hfull[cols:, cols:] = H3
        return Decomposition(d=_scalars(list(d_edge) + d_vertex, mode), H=_matrix(Hfull, mode))

    params = {"delta": delta_f, "pi0": pi0, "pi1": pi1, "mbar": mbar, "n": n, "s": float(s),
              "eps": float(eps), "phat": float(phat), "eps0": float(eps0), "eps_bound": bound,
              "validator": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "ok": c.ok} for c in checks]}
    return CompiledInstance(inst, ReductionWitness(forward, source="3-coloring"), params)
