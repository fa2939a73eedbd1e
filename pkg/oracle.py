"""
diagrank oracle - brute-force and randomized cross-checks for the solvers and compilers.

Nothing here proves infeasibility: rank_probe only reports the lowest rank it managed to
verify, and the lemma checks sample matrices that satisfy each hypothesis.
"""

import asyncio
import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.optimize
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

from charsys import P1, P2, P3
from decompose import Decomposition, Instance, verify
from errors import SizeCapError, TooManyUnknownsError
from reductions import BoundCheck, PartialMatrix, normalize_graph
from settings import ReductionParams
from symcore import EXACT, FLOAT, SymMatrix, numeric_rank, psd_check

console = Console(stderr=True)

Pair = Tuple[int, int]

DEFAULT_GRID = tuple(Fraction(x) for x in ("-2", "-1", "-1/2", "0", "1/2", "1", "2"))
MAX_COMPLETION_UNKNOWNS = 6


# -- 3-coloring --------------------------------------------------------------------------

@dataclass
class ColoringResult:
    colorable: bool
    coloring: Optional[Dict[int, int]] = None
    nodes_visited: int = 0


def brute_force_3color(G: nx.Graph, cap: Optional[int] = None) -> ColoringResult:
    """
    Exhaustive backtracking 3-coloring with colors 0, 1, 2.

    Vertices are colored in index order; the first vertex is fixed to color 0 and a vertex
    only tries colors up to one more than the largest color used so far.

    Raises:
        SizeCapError: the graph has more than ``cap`` vertices.
    """
    cap = ReductionParams().coloring_cap if cap is None else cap
    G = normalize_graph(G)
    n = G.number_of_nodes()
    if n > cap:
        raise SizeCapError(f"Graph has {n} vertices; brute-force coloring is capped at {cap}")
    earlier = [[u for u in G.neighbors(v) if u < v] for v in range(n)]
    colors = [-1] * n
    visited = 0

    def extend(v: int, top: int) -> bool:
        nonlocal visited
        if v == n:
            return True
        for c in range(min(3, top + 2)):
            visited += 1
            if all(colors[u] != c for u in earlier[v]):
                colors[v] = c
                if extend(v + 1, max(top, c)):
                    return True
        colors[v] = -1
        return False

    if extend(0, -1):
        return ColoringResult(True, dict(enumerate(colors)), visited)
    return ColoringResult(False, None, visited)


# -- planted instances -------------------------------------------------------------------

def planted_instance(kind: str, n: int, r: int, seed: int = 0, density: float = 0.6,
                     entry_range: int = 2) -> Tuple[Instance, Decomposition]:
    """
    Exact instance with a known rank-r decomposition.

    A Gram matrix G = U U^T with small integer U; (P2) zeroes its diagonal, (P1) adds a
    nonnegative integer diagonal, (P3) keeps a random subset of the off-diagonal pairs as
    the fixed pattern.
    """
    rng = np.random.default_rng(seed)
    U = np.array([[int(x) for x in row] for row in rng.integers(-entry_range, entry_range + 1, size=(n, r))],
                 dtype=object)
    for i in range(n):
        if not any(U[i]):
            U[i, int(rng.integers(r))] = 1
    G = U @ U.T
    provenance = {"compiler": "planted", "seed": seed, "n": n, "r": r}
    if kind == P2:
        A = G.copy()
        for i in range(n):
            A[i, i] = 0
        inst = Instance(kind=P2, A=SymMatrix(A, EXACT), r=r, provenance=provenance)
        dec = Decomposition(d=[G[i, i] for i in range(n)], U=U)
    elif kind == P1:
        noise = [int(x) for x in rng.integers(0, 3, size=n)]
        A = G.copy()
        for i in range(n):
            A[i, i] += noise[i]
        inst = Instance(kind=P1, A=SymMatrix(A, EXACT), r=r, provenance=provenance)
        dec = Decomposition(d=noise, U=U)
    elif kind == P3:
        pairs = list(combinations(range(n), 2))
        pattern = frozenset(p for p, keep in zip(pairs, rng.random(len(pairs)) < density) if keep)
        A = np.zeros((n, n), dtype=object)
        for i, j in pattern:
            A[i, j] = A[j, i] = G[i, j]
        inst = Instance(kind=P3, A=SymMatrix(A, EXACT), r=r, pattern=pattern, provenance=provenance)
        dec = Decomposition(L=SymMatrix(G - A, EXACT), U=U)
    else:
        raise ValueError(f"Unknown problem kind: {kind}")
    return inst, dec


# -- rank probing ------------------------------------------------------------------------

@dataclass
class ProbeReport:
    """
    Evidence from random low-rank searches. ``best_rank_found`` is the lowest rank a
    sample verified at, or None when no sample verified.
    """
    trials: int
    target_rank: int
    seed: int
    best_rank_found: Optional[int] = None
    samples: List[Dict[str, Any]] = field(default_factory=list)
    violations: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def verified_at_target(self) -> bool:
        return self.best_rank_found is not None and self.best_rank_found <= self.target_rank

    def to_dict(self) -> Dict[str, Any]:
        return {"trials": self.trials, "target_rank": self.target_rank, "seed": self.seed,
                "best_rank_found": self.best_rank_found, "evidence_only": True,
                "violations": self.violations, "samples": self.samples}


def _free(inst: Instance, i: int, j: int) -> bool:
    if i == j:
        return True
    return inst.kind == P3 and (min(i, j), max(i, j)) not in inst.pattern


def _attempt(inst: Instance, A: np.ndarray, k: int, rng: np.random.Generator, box: float,
             tol: float) -> Tuple[Optional[int], Dict[str, Any]]:
    """
    One randomized Schur-complement search at rank k.

    The entries of M = A + (free part) in the rows of a random J are optimized so that the
    fixed off-diagonal entries of the Schur complement of M(J, J) vanish; the free entries
    of the complement block are then set to cancel it.
    """
    n = inst.n
    J = sorted(int(x) for x in rng.choice(n, size=k, replace=False))
    Jbar = [i for i in range(n) if i not in J]
    in_J = set(J)
    variables = [(i, j) for i in range(n) for j in range(i, n)
                 if (i in in_J or j in in_J) and _free(inst, i, j)]
    fixed = [(a, b) for a, b in combinations(range(len(Jbar)), 2) if not _free(inst, Jbar[a], Jbar[b])]
    shift = max(0.0, -float(scipy.linalg.eigvalsh(A)[0])) if n else 0.0

    lo = np.full(len(variables), -np.inf)
    hi = np.full(len(variables), np.inf)
    x0 = np.zeros(len(variables))
    for t, (i, j) in enumerate(variables):
        if i == j and inst.kind == P1:
            hi[t] = A[i, i]
            x0[t] = A[i, i] - rng.uniform(0.0, min(box, max(A[i, i], 0.0)) + 1e-3)
        elif i == j:
            x0[t] = A[i, i] + shift + rng.uniform(0.1, box)
        else:
            x0[t] = rng.uniform(-box, box) / max(1, n)
    x0 = np.minimum(x0, hi)

    def assemble(x: np.ndarray) -> np.ndarray:
        M = A.copy()
        for (i, j), value in zip(variables, x):
            M[i, j] = M[j, i] = value
        return M

    def schur(M: np.ndarray) -> np.ndarray:
        if not Jbar:
            return np.zeros((0, 0))
        W = M[np.ix_(Jbar, J)]
        Y = scipy.linalg.solve(M[np.ix_(J, J)], W.T, assume_a="sym")
        return M[np.ix_(Jbar, Jbar)] - W @ Y

    def residual(x: np.ndarray) -> np.ndarray:
        try:
            S = schur(assemble(x))
        except (np.linalg.LinAlgError, ValueError):
            return np.full(len(fixed), 1e6)
        return np.array([S[a, b] for a, b in fixed])

    sample: Dict[str, Any] = {"rank": k, "J": [i + 1 for i in J]}
    x = x0
    if fixed:
        try:
            res = scipy.optimize.least_squares(residual, x0, bounds=(lo, hi), method="trf",
                                               xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        except ValueError as e:
            sample["error"] = str(e)
            return None, sample
        x = res.x
        sample["residual"] = float(np.linalg.norm(res.fun))
    M = assemble(x)
    try:
        if scipy.linalg.eigvalsh(M[np.ix_(J, J)])[0] <= 0:
            sample["verified_rank"] = None
            return None, sample
        S = schur(M)
    except (np.linalg.LinAlgError, ValueError):
        sample["verified_rank"] = None
        return None, sample
    for a in range(len(Jbar)):
        for b in range(a, len(Jbar)):
            if _free(inst, Jbar[a], Jbar[b]):
                M[Jbar[a], Jbar[b]] -= S[a, b]
                M[Jbar[b], Jbar[a]] = M[Jbar[a], Jbar[b]]

    if inst.kind == P3:
        dec = Decomposition(L=SymMatrix(M - A, FLOAT))
    elif inst.kind == P1:
        dec = Decomposition(d=[float(A[i, i] - M[i, i]) for i in range(n)])
    else:
        dec = Decomposition(d=[float(M[i, i] - A[i, i]) for i in range(n)])
    float_inst = dataclasses.replace(inst, A=SymMatrix(A, FLOAT), r=k, lower_bound=None)
    report = verify(float_inst, dec, tol=tol, equilibrate_first=True)
    sample["verified_rank"] = report.rank if report.passed else None
    return sample["verified_rank"], sample


def _probe_trial(inst: Instance, A: np.ndarray, r: int, max_rank: int, seed: int, t: int, box: float,
                 tol: float) -> Tuple[Optional[int], List[Dict[str, Any]]]:
    rng = np.random.default_rng([seed, t])
    log: List[Dict[str, Any]] = []
    for k in range(r, max_rank + 1):
        rank, sample = _attempt(inst, A, k, rng, box, tol)
        sample["trial"] = t
        log.append(sample)
        if rank is not None:
            return rank, log
    return None, log


async def rank_probe_async(inst: Instance, r: int, trials: int = 1000, seed: int = 0, max_rank: Optional[int] = None,
                           threads: int = 1, box: float = 10.0, tol: float = 1e-7,
                           show_progress: bool = False) -> ProbeReport:
    """
    Randomized search for decompositions of rank r and above.

    Each trial tries rank r first and moves up to ``max_rank`` (default n) until one of its
    samples verifies. Trials are seeded from (seed, trial index), so the report does not
    depend on scheduling.
    """
    if not 1 <= r <= inst.n:
        raise ValueError(f"Probe rank must be in [1, {inst.n}], got {r}")
    max_rank = inst.n if max_rank is None else min(max_rank, inst.n)
    A = inst.A.to_float().array.copy()
    semaphore = asyncio.Semaphore(max(1, threads))
    results: Dict[int, Tuple[Optional[int], List[Dict[str, Any]]]] = {}

    async def run_one(t: int):
        async with semaphore:
            results[t] = await asyncio.to_thread(_probe_trial, inst, A, r, max_rank, seed, t, box, tol)

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
        disable=not show_progress
    ) as progress:
        task = progress.add_task(f"Probing rank {r}...", total=trials)
        for coro in asyncio.as_completed([run_one(t) for t in range(trials)]):
            await coro
            progress.advance(task)

    report = ProbeReport(trials=trials, target_rank=r, seed=seed)
    for t in range(trials):
        rank, log = results[t]
        report.samples.extend(log)
        if rank is None:
            continue
        if inst.lower_bound is not None and rank < inst.lower_bound:
            report.violations.append({"trial": t, "rank": rank, "lower_bound": inst.lower_bound})
            continue
        if report.best_rank_found is None or rank < report.best_rank_found:
            report.best_rank_found = rank
    if report.violations:
        console.print(f"[red]{len(report.violations)} samples fell below the registered rank bound "
                      f"{inst.lower_bound}[/red]")
    return report


def rank_probe(inst: Instance, r: int, trials: int = 1000, seed: int = 0, **kwargs: Any) -> ProbeReport:
    return asyncio.run(rank_probe_async(inst, r, trials=trials, seed=seed, **kwargs))


# -- perturbation lemmas -----------------------------------------------------------------

def _fro(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, "fro"))


def inverse_perturbation_check(A: np.ndarray, B: np.ndarray) -> BoundCheck:
    """||(A + B)^-1 - A^-1||_F against ||B|| ||A^-1||^2 / (1 - ||B|| ||A^-1||)."""
    A_inv = np.linalg.inv(A)
    rho = _fro(B) * _fro(A_inv)
    if rho >= 1:
        raise ValueError(f"Hypothesis fails: ||B|| ||A^-1|| = {rho:.3g} >= 1")
    Z = np.linalg.inv(A + B) - A_inv
    return BoundCheck("inverse of a sum", _fro(Z), _fro(B) * _fro(A_inv) ** 2 / (1 - rho))


def kdk_check(K: np.ndarray, H: np.ndarray, D: np.ndarray, Delta: np.ndarray) -> BoundCheck:
    """Bound on ||(K + H)(D + Delta)^-1 (K + H)^T - K D^-1 K^T||_F."""
    D_inv = np.linalg.inv(D)
    if _fro(H) > _fro(K) / 2 or _fro(Delta) * _fro(D_inv) > 0.5:
        raise ValueError("Hypothesis fails: perturbations are too large")
    KH = K + H
    lhs = _fro(KH @ np.linalg.solve(D + Delta, KH.T) - K @ D_inv @ K.T)
    rhs = 0.5 * _fro(K) * _fro(D_inv) * (9 * _fro(K) * _fro(D_inv) * _fro(Delta) + 5 * _fro(H))
    return BoundCheck("KDK perturbation", lhs, rhs)


def negative_offdiagonal_check(A: np.ndarray, tol: float = 1e-9) -> List[str]:
    """
    Conclusions for a PSD matrix with negative off-diagonal entries; returns the ones
    that fail.
    """
    n = A.shape[0]
    w, V = scipy.linalg.eigh(A)
    scale = max(1.0, float(np.abs(w).max()))
    rank = int(np.sum(w > tol * scale))
    failures = []
    if rank < n - 1:
        failures.append(f"rank {rank} < n - 1")
    elif rank == n - 1:
        null = V[:, 0] * np.sign(V[:, 0].sum())
        if not np.all(null > 0):
            failures.append("null vector is not positive")
    elif not np.all(np.linalg.inv(A) > 0):
        failures.append("inverse is not positive")
    return failures


@dataclass
class LemmaStats:
    trials: int = 0
    violations: int = 0
    worst_ratio: float = 0.0
    messages: List[str] = field(default_factory=list)


@dataclass
class LemmaReport:
    seed: int
    lemmas: Dict[str, LemmaStats]

    @property
    def violations(self) -> int:
        return sum(s.violations for s in self.lemmas.values())

    def to_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "violations": self.violations,
                "lemmas": {k: dataclasses.asdict(v) for k, v in self.lemmas.items()}}


def _record(stats: LemmaStats, check: BoundCheck) -> None:
    stats.trials += 1
    if check.rhs > 0:
        stats.worst_ratio = max(stats.worst_ratio, check.lhs / check.rhs)
    if not check.ok:
        stats.violations += 1
        stats.messages.append(f"{check.name}: {check.lhs:.6g} > {check.rhs:.6g}")


def _random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    X = rng.standard_normal((n, n))
    return X @ X.T + rng.uniform(0.1, 2.0) * np.eye(n)


def _negative_offdiagonal_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    W = rng.uniform(0.1, 2.0, size=(n, n))
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    laplacian = np.diag(W.sum(axis=1)) - W
    S = np.diag(rng.uniform(0.5, 2.0, size=n))
    M = S @ laplacian @ S
    if rng.random() < 0.5:
        M = M + np.diag(rng.uniform(0.0, 1.0, size=n))
    return M


def check_perturbation_lemmas(trials: int = 100, seed: int = 0) -> LemmaReport:
    """Sample each lemma's hypotheses and check its conclusion."""
    rng = np.random.default_rng(seed)
    lemmas = {"inverse_of_sum": LemmaStats(), "kdk": LemmaStats(), "negative_offdiagonal": LemmaStats()}
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        A = _random_spd(rng, n) if rng.random() < 0.5 else rng.standard_normal((n, n)) + 3 * n * np.eye(n)
        B = rng.standard_normal((n, n))
        rho = rng.uniform(0.0, 0.95)
        B *= rho / (_fro(B) * _fro(np.linalg.inv(A)))
        _record(lemmas["inverse_of_sum"], inverse_perturbation_check(A, B))

        m = int(rng.integers(1, 6))
        K = rng.standard_normal((m, n))
        H = rng.standard_normal((m, n))
        H *= rng.uniform(0.0, 0.5) * _fro(K) / _fro(H)
        D = _random_spd(rng, n)
        Delta = rng.standard_normal((n, n))
        Delta = (Delta + Delta.T) / 2
        Delta *= rng.uniform(0.0, 0.5) / (_fro(Delta) * _fro(np.linalg.inv(D)))
        _record(lemmas["kdk"], kdk_check(K, H, D, Delta))

        stats = lemmas["negative_offdiagonal"]
        failures = negative_offdiagonal_check(_negative_offdiagonal_psd(rng, max(n, 2)))
        stats.trials += 1
        if failures:
            stats.violations += 1
            stats.messages.extend(failures)
    report = LemmaReport(seed, lemmas)
    colour = "green" if report.violations == 0 else "red"
    console.print(f"[{colour}]Lemma checks: {report.violations} violations over {trials} trials each[/{colour}]")
    return report


# -- small completion search -------------------------------------------------------------

@dataclass
class CompletionResult:
    matrix: SymMatrix
    rank: int
    psd: bool
    entries: Dict[Pair, Any]
    refined: bool = False


def _score(M: np.ndarray, tol: float) -> Tuple[bool, int, float]:
    w = scipy.linalg.eigvalsh(M)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    psd = bool(w[0] >= -tol * scale) if len(w) else True
    rank = int(np.sum(np.abs(w) > tol * scale))
    return psd, rank, float(-min(w[0], 0.0)) if len(w) else 0.0


def small_completion_search(pm: PartialMatrix, r: int, grid: Optional[Sequence[Any]] = None, tol: float = 1e-9,
                            refine: bool = True) -> CompletionResult:
    """
    Lowest-rank PSD completion over a grid of values for the unspecified entries.

    Every combination of grid values is tried; when the best grid point is above rank r,
    the best few points are refined with least squares on the eigenvalues beyond the r-th.

    Raises:
        TooManyUnknownsError: more than six unspecified entries.
    """
    unknowns = pm.unspecified()
    if len(unknowns) > MAX_COMPLETION_UNKNOWNS:
        raise TooManyUnknownsError(f"{len(unknowns)} unspecified entries; the search handles at most "
                                   f"{MAX_COMPLETION_UNKNOWNS}")
    grid = DEFAULT_GRID if grid is None else tuple(grid)
    base = np.where(pm.mask, pm.values, 0).astype(float)

    def fill(values: Sequence[float]) -> np.ndarray:
        M = base.copy()
        for (i, j), v in zip(unknowns, values):
            M[i, j] = M[j, i] = float(v)
        return M

    scored = []
    for values in product(grid, repeat=len(unknowns)):
        psd, rank, neg = _score(fill(values), tol)
        scored.append(((not psd, rank, neg), values))
    scored.sort(key=lambda item: item[0])
    (not_psd, rank, _), best = scored[0]
    refined = False

    if refine and unknowns and (not_psd or rank > r):
        def residual(x: np.ndarray) -> np.ndarray:
            w = scipy.linalg.eigvalsh(fill(x))
            return np.concatenate([w[:pm.n - r], np.minimum(w, 0.0)])

        for _, start in scored[:5]:
            res = scipy.optimize.least_squares(residual, np.array([float(v) for v in start]), xtol=1e-15,
                                               ftol=1e-15, gtol=1e-15)
            psd, cand_rank, _ = _score(fill(res.x), tol)
            if psd and cand_rank <= r:
                best, not_psd, rank, refined = tuple(float(v) for v in res.x), False, cand_rank, True
                break

    entries = dict(zip(unknowns, best))
    M = pm.fill(entries)
    if M.is_exact:
        return CompletionResult(M, numeric_rank(M).rank, psd_check(M, 0).psd, entries, refined)
    return CompletionResult(M, rank, not not_psd, entries, refined)
