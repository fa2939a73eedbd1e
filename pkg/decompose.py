"""
diagrank decompose - full solvers for (P1), (P2) and (P3) and the universal verifier.

The solvers enumerate candidate supports J of size r in lexicographic order, run the
linear phase on each and fall back to the polynomial phase when the linear equations
leave a family of V. Ranks are tried in ascending order and the first feasible rank wins.
"""

import asyncio
import dataclasses
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import sympy
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

from charsys import (KINDS, P1, P2, P3, CharSystem, InfeasibleForJ, RejectedForJ, Solved, Underdetermined,
                     algorithm1, check_candidate, reduce_rows)
from errors import (DimensionError, InconsistentSystemError, InstanceError, RouteCapError, SingularMatrixError,
                    VariableCapExceededError)
from polysolve import (NoneFoundComplete, NoneFoundIncomplete, Poly, PolySystem, algorithm2, solve_system,
                       v_from_solution, v_names)
from settings import SolverBudget
from symcore import EXACT, FLOAT, SymMatrix, equilibrate, numeric_rank, psd_check, svec_index, to_exact

console = Console(stderr=True)

Pair = Tuple[int, int]

AUTO = "auto"
DIRECT = "direct"
COMPILED = "compiled"
ROUTES = (AUTO, DIRECT, COMPILED)


def _pair(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


# -- instances and decompositions ------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """
    A decomposition problem.

    Args:
        kind: P1 (A - Diag(d) with d >= 0), P2 (A + Diag(d)) or P3 (A + L, L fits pattern).
        A: Input matrix; zero diagonal for P2 and P3.
        r: Target rank, 1 <= r <= n.
        pattern: (P3) off-diagonal pairs fixed to A; L must vanish there and A must
            vanish everywhere else.
        eps: Perturbation budget for ||H||_F; 0 means no perturbation.
        sparsity_constrained: H must vanish wherever A does.
        lower_bound: Known lower bound on the achievable rank, if one is registered.
        provenance: Which compiler or catalog entry produced the instance.
    """
    kind: str
    A: SymMatrix
    r: int
    pattern: FrozenSet[Pair] = frozenset()
    eps: Any = 0
    sparsity_constrained: bool = False
    lower_bound: Optional[int] = None
    provenance: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pattern", frozenset(_pair(i, j) for i, j in self.pattern))
        n = self.A.n
        if self.kind not in KINDS:
            raise InstanceError(f"Unknown problem kind: {self.kind}")
        if not 1 <= self.r <= n:
            raise InstanceError(f"Target rank must be in [1, {n}], got {self.r}")
        if self.kind in (P2, P3) and any(v != 0 for v in self.A.diagonal()):
            raise InstanceError(f"A ({self.kind}) instance needs a zero diagonal")
        for i, j in self.pattern:
            if i == j or i < 0 or j >= n:
                raise InstanceError(f"Pattern pair {(i + 1, j + 1)} is not an off-diagonal position")
        if self.kind != P3 and self.pattern:
            raise InstanceError("Only (P3) instances carry a fixed-zero pattern")
        if self.kind == P3:
            for i, j in self.free_pairs:
                if self.A[i, j] != 0:
                    raise InstanceError(f"A has a nonzero entry at free position {(i + 1, j + 1)}")
        if float(self.eps) < 0:
            raise InstanceError(f"Perturbation budget must be nonnegative, got {self.eps}")
        if self.lower_bound is not None and not 0 <= self.lower_bound <= n:
            raise InstanceError(f"Rank lower bound {self.lower_bound} is outside [0, {n}]")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def free_pairs(self) -> List[Pair]:
        """Off-diagonal pairs outside the pattern, sorted."""
        if self.kind != P3:
            return []
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if (i, j) not in self.pattern]

    @property
    def m(self) -> int:
        return len(self.free_pairs)

    def with_rank(self, r: int) -> "Instance":
        return dataclasses.replace(self, r=r)


@dataclass(frozen=True)
class Decomposition:
    """
    A candidate solution: ``d`` for P1/P2, the fill ``L`` (diagonal included) for P3,
    an optional factor U (n x rank) and an optional perturbation H.
    """
    d: Optional[List[Any]] = None
    L: Optional[SymMatrix] = None
    U: Optional[np.ndarray] = None
    H: Optional[SymMatrix] = None
    achieved_rank: Optional[int] = None
    residual: Any = 0
    J: Optional[Tuple[int, ...]] = None


@dataclass
class VerificationReport:
    passed: bool
    checks: Dict[str, bool]
    messages: List[str]
    rank: Optional[int] = None
    exact: bool = False

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class Feasible:
    decomposition: Decomposition
    rank: int
    report: Optional[VerificationReport] = None


@dataclass(frozen=True)
class Infeasible:
    rank: int
    certificates: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Unknown:
    rank: int
    incomplete: Tuple[str, ...] = ()


SolveResult = Union[Feasible, Infeasible, Unknown]


class MinRank(NamedTuple):
    d: List[Any]
    rank: int
    certified: bool


# -- verification ----------------------------------------------------------------------

def completed_matrix(inst: Instance, dec: Decomposition) -> SymMatrix:
    """A - Diag(d) (P1), A + Diag(d) (P2) or A + L (P3), plus H when present."""
    if inst.kind == P3:
        if dec.L is None:
            raise DimensionError("A (P3) decomposition needs the fill L")
        M = inst.A + dec.L
    else:
        if dec.d is None:
            raise DimensionError(f"A ({inst.kind}) decomposition needs the diagonal d")
        M = inst.A.add_diagonal(dec.d, sign=-1 if inst.kind == P1 else 1)
    if dec.H is not None:
        M = M + dec.H
    return M


def _close(value: Any, target: Any, exact: bool, tol: float) -> bool:
    if exact:
        return value == target
    return abs(float(value) - float(target)) <= tol


def verify(inst: Instance, dec: Decomposition, tol: float = 1e-9,
           equilibrate_first: bool = False) -> VerificationReport:
    """
    Check a decomposition against its instance.

    Runs the sign check (P1), the pattern check (P3), the perturbation budget and
    sparsity checks (when H is present), PSD and rank <= r. Exact inputs are checked
    exactly; float inputs use ``tol`` relative to the largest entry. Never raises on a
    bad decomposition: every failure is reported in the diagnostics.
    """
    checks: Dict[str, bool] = {}
    messages: List[str] = []
    n = inst.n

    def fail(name: str, message: str) -> VerificationReport:
        checks[name] = False
        messages.append(message)
        return VerificationReport(passed=False, checks=checks, messages=messages)

    if inst.kind == P3:
        if dec.L is None or dec.L.n != n:
            return fail("dimensions", f"L must be {n}x{n}")
    elif dec.d is None or len(dec.d) != n:
        return fail("dimensions", f"d must have {n} entries")
    if dec.H is not None and dec.H.n != n:
        return fail("dimensions", f"H must be {n}x{n}")
    checks["dimensions"] = True

    M = completed_matrix(inst, dec)
    exact = M.is_exact
    scale = max(1.0, float(np.abs(M.to_float().array).max(initial=0.0)))

    if inst.kind == P1:
        negative = [i + 1 for i, v in enumerate(dec.d) if (v < 0 if exact else float(v) < -tol * scale)]
        checks["sign"] = not negative
        if negative:
            messages.append(f"d is negative at {negative}")

    if inst.kind == P3:
        L = dec.L
        bad = [(i + 1, j + 1) for i, j in sorted(inst.pattern)
               if not _close(L[i, j], 0, L.is_exact, tol * scale)]
        checks["pattern"] = not bad
        if bad:
            messages.append(f"L is nonzero at fixed positions {bad[:5]}")

    if dec.H is not None:
        H = dec.H
        if H.is_exact and not isinstance(inst.eps, float):
            within = H.frobenius_norm_squared() <= to_exact(inst.eps) ** 2
        else:
            within = H.frobenius_norm() <= float(inst.eps) * (1 + 1e-12)
        checks["budget"] = bool(within)
        if not within:
            messages.append(f"||H||_F = {H.frobenius_norm():.6g} exceeds the budget {float(inst.eps):.6g}")
        if inst.sparsity_constrained:
            leaks = [(i + 1, j + 1) for i in range(n) for j in range(i + 1)
                     if inst.A[i, j] == 0 and not _close(H[i, j], 0, H.is_exact, tol)]
            checks["sparsity"] = not leaks
            if leaks:
                messages.append(f"H is nonzero where A vanishes at {leaks[:5]}")

    if exact:
        verdict = psd_check(M, tol=0)
    else:
        a = equilibrate(M.array) if equilibrate_first else M.array
        verdict = psd_check(SymMatrix(a, FLOAT), tol=tol * max(1.0, float(np.abs(a).max(initial=0.0))))
    checks["psd"] = verdict.psd
    if not verdict.psd:
        where = verdict.pivot_index + 1 if verdict.pivot_index is not None else "?"
        messages.append(f"completed matrix is not PSD (negative pivot at {where})")

    rank = numeric_rank(M, tol, equilibrate_first=equilibrate_first).rank
    checks["rank"] = rank <= inst.r
    if rank > inst.r:
        messages.append(f"rank {rank} exceeds target {inst.r}")

    return VerificationReport(passed=all(checks.values()), checks=checks, messages=messages,
                              rank=rank, exact=exact)


# -- per-J solvers ---------------------------------------------------------------------

@dataclass(frozen=True)
class FillSolved:
    """A (P3) hit for a given J: the fill L and the factor of A + L."""
    J: Tuple[int, ...]
    L: SymMatrix
    U: Optional[np.ndarray] = None


JOutcome = Union[Solved, FillSolved, InfeasibleForJ, RejectedForJ]


def _incomplete(J: Sequence[int], reason: str) -> RejectedForJ:
    return RejectedForJ(tuple(J), f"search incomplete: {reason}", complete=False)


def _append_independent(rows: List[List[Any]], rhs: List[Any], row: List[Any], value: Any, n_unknowns: int,
                        mode: str, tol: float) -> Optional[Tuple[List[List[Any]], List[Any]]]:
    """Rows with one more equation, or None when it is implied by or contradicts the rest."""
    try:
        lhs, b, _, _ = reduce_rows(rows + [row], rhs + [value], n_unknowns, mode, tol)
    except InconsistentSystemError:
        return None
    if lhs.shape[0] <= len(rows):
        return None
    return [list(r) for r in lhs], list(b)


def _p1_facet_search(A: SymMatrix, system: CharSystem, budget: SolverBudget) -> JOutcome:
    """
    Polynomial phase for (P1) with the nonnegativity recursion.

    When every solution has some d_i(V) < 0 for i outside J and the search was not
    exhaustive, the facet equations d_i(V) = 0 are appended one at a time (only when
    independent of the rows already present) and the smaller system is re-solved.
    """
    J = system.J
    n_unknowns = system.n_unknowns
    tol = budget.tolerances.linear
    root_rows = [list(r) for r in system.linear_lhs]
    root_rhs = list(system.linear_rhs)

    try:
        root = algorithm2(A, J, root_rows, root_rhs, budget, P1)
    except VariableCapExceededError as exc:
        return _incomplete(J, str(exc))
    if isinstance(root, (Solved, InfeasibleForJ)) or root.complete:
        return root

    stack = [((), root_rows, root_rhs, root.violated)]
    seen = {frozenset()}
    nodes = 0
    while stack:
        appended, rows, rhs, violated = stack.pop()
        for i in sorted((v for v in violated if v in system.diag_affine), reverse=True):
            key = frozenset(appended + (i,))
            if key in seen or len(key) > n_unknowns:
                continue
            seen.add(key)
            row, value = system.diag_affine[i]
            grown = _append_independent(rows, rhs, row, value, n_unknowns, A.mode, tol)
            if grown is None:
                continue
            nodes += 1
            if nodes > budget.max_facet_nodes:
                return _incomplete(J, f"facet recursion stopped after {budget.max_facet_nodes} nodes")
            try:
                outcome = algorithm2(A, J, grown[0], grown[1], budget, P1)
            except VariableCapExceededError:
                continue
            if isinstance(outcome, Solved):
                return outcome
            if isinstance(outcome, RejectedForJ):
                stack.append((appended + (i,), grown[0], grown[1], outcome.violated))
    return root


def solve_index_set(A: SymMatrix, J: Sequence[int], kind: str = P2,
                    budget: Optional[SolverBudget] = None) -> JOutcome:
    """Linear phase, then the polynomial phase when the linear phase leaves a family."""
    budget = budget or SolverBudget()
    tol = budget.tolerances
    outcome = algorithm1(A, J, tol.psd, kind, tol.linear)
    if not isinstance(outcome, Underdetermined):
        return outcome
    if kind == P1:
        return _p1_facet_search(A, outcome.system, budget)
    try:
        return algorithm2(A, outcome.J, outcome.linear_lhs, outcome.linear_rhs, budget, kind)
    except VariableCapExceededError as exc:
        return _incomplete(outcome.J, str(exc))


def assemble_fill_system(A: SymMatrix, J: Sequence[int], free_pairs: Sequence[Pair]) -> PolySystem:
    """
    Polynomial system of the direct (P3) route for a fixed J.

    Unknowns are svec(V), one value t_e per free pair and the positivity variables z_k.
    With M = A + T (T holding the t_e off the diagonal): c_i^T V c_j = M_ij for i < j
    outside J, M_ij det(V) = adj(V)_ij for i < j in J, det(V[:k,:k]) z_k^2 = 1.
    """
    J = tuple(sorted(J))
    r = len(J)
    Jbar = [i for i in range(A.n) if i not in J]
    names = v_names(r)
    t_names = [f"t{e + 1}" for e in range(len(free_pairs))]
    z_names = [f"z{k + 1}" for k in range(r)]
    vs = [sympy.Symbol(v) for v in names]
    ts = {pair: sympy.Symbol(t) for pair, t in zip(free_pairs, t_names)}
    zs = [sympy.Symbol(z) for z in z_names]
    V = sympy.Matrix(r, r, lambda p, q: vs[svec_index(p, q)])

    def entry(i: int, j: int) -> sympy.Expr:
        value = A[i, j]
        base = sympy.Float(value) if isinstance(value, float) else sympy.Rational(to_exact(value))
        return base + ts.get(_pair(i, j), 0)

    columns = {i: sympy.Matrix([entry(j, i) for j in J]) for i in Jbar}
    eqs = []
    for i, j in combinations(Jbar, 2):
        eqs.append(sympy.expand((columns[i].T * V * columns[j])[0, 0] - entry(i, j)))
    det_v = sympy.expand(V.det(method="berkowitz"))
    adj = V.adjugate(method="berkowitz")
    for a, b in combinations(range(r), 2):
        eqs.append(sympy.expand(entry(J[a], J[b]) * det_v - adj[a, b]))
    for k in range(r):
        eqs.append(V[:k + 1, :k + 1].det(method="berkowitz") * zs[k] ** 2 - 1)

    variables = tuple(names + t_names + z_names)
    return PolySystem(variables=variables,
                      equations=tuple(Poly.from_sympy(e, variables) for e in eqs),
                      auxiliary=frozenset(z_names),
                      meta={"J": J, "kind": P3, "v_names": tuple(names), "t_names": tuple(t_names),
                            "free_pairs": tuple(free_pairs)})


def _fill_matrix(A: SymMatrix, free_pairs: Sequence[Pair], values: Sequence[Any]) -> SymMatrix:
    exact = A.is_exact and not any(isinstance(v, float) for v in values)
    data = (A.array if exact else A.to_float().array).copy()
    for (i, j), v in zip(free_pairs, values):
        data[i, j] = data[j, i] = v
    return SymMatrix(data, EXACT if exact else FLOAT)


def solve_fill_index_set(inst: Instance, J: Sequence[int], budget: Optional[SolverBudget] = None) -> JOutcome:
    """Direct (P3) route for a fixed J."""
    budget = budget or SolverBudget()
    J = tuple(sorted(J))
    free_pairs = inst.free_pairs
    try:
        system = assemble_fill_system(inst.A, J, free_pairs)
        outcome = solve_system(system, budget)
    except VariableCapExceededError as exc:
        return _incomplete(J, str(exc))
    label = [j + 1 for j in J]
    if isinstance(outcome, NoneFoundComplete):
        return InfeasibleForJ(J, f"the fill system for J={label} has no real solution")
    if isinstance(outcome, NoneFoundIncomplete):
        return _incomplete(J, outcome.reason)
    for point in outcome.points:
        V = v_from_solution(system, point, exact=inst.A.is_exact)
        exact_t = [point.rational(t) for t in system.meta["t_names"]]
        if V.is_exact and all(t is not None for t in exact_t):
            t_values = exact_t
        else:
            V = V.to_float()
            t_values = [float(point.values[t]) for t in system.meta["t_names"]]
        M = _fill_matrix(inst.A, free_pairs, t_values)
        try:
            hit = check_candidate(M, J, V, P2, budget.tolerances.psd)
        except SingularMatrixError:
            continue
        if isinstance(hit, Solved):
            L = (M - inst.A).add_diagonal(hit.d)
            return FillSolved(J=J, L=L, U=hit.U)
    reason = "every real solution fails the positivity checks"
    if not outcome.complete:
        return _incomplete(J, reason)
    return RejectedForJ(J, reason)


# -- enumeration -----------------------------------------------------------------------

async def enumerate_index_sets(n: int, r: int, solve_one: Callable[[Tuple[int, ...]], JOutcome],
                               threads: int = 1, show_progress: bool = False,
                               description: str = "Enumerating index sets...",
                               accept: Optional[Callable[[Tuple[int, ...], JOutcome], bool]] = None
                               ) -> Dict[Tuple[int, ...], JOutcome]:
    """
    Run ``solve_one`` on every J of size r, concurrently in worker threads.

    A solved J counts as a hit only when ``accept`` (run in the same worker) agrees; without
    ``accept`` every solved J is a hit. Index sets lexicographically after the smallest hit
    so far are skipped. Earlier ones still run, so the smallest accepted J is the same for
    every schedule and every thread count.

    Returns:
        Outcome per J that ran, keyed by J.
    """
    index_sets = list(combinations(range(n), r))
    semaphore = asyncio.Semaphore(max(1, threads))
    best: List[Optional[Tuple[int, ...]]] = [None]
    outcomes: Dict[Tuple[int, ...], JOutcome] = {}

    def solve_and_accept(J: Tuple[int, ...]) -> Tuple[JOutcome, bool]:
        outcome = solve_one(J)
        hit = isinstance(outcome, (Solved, FillSolved)) and (accept is None or accept(J, outcome))
        return outcome, hit

    async def run_one(J: Tuple[int, ...]):
        async with semaphore:
            if best[0] is not None and J > best[0]:
                return J, None
            outcome, hit = await asyncio.to_thread(solve_and_accept, J)
            if hit and (best[0] is None or J < best[0]):
                best[0] = J
            return J, outcome

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
        disable=not show_progress
    ) as progress:
        task = progress.add_task(description, total=len(index_sets))
        # tasks enter the semaphore in creation order, i.e. lexicographically
        tasks = [asyncio.create_task(run_one(J)) for J in index_sets]
        completed = 0
        for fut in asyncio.as_completed(tasks):
            J, outcome = await fut
            if outcome is not None:
                outcomes[J] = outcome
            completed += 1
            progress.update(task, completed=completed)
    return outcomes


def _decomposition_from(outcome: Union[Solved, FillSolved]) -> Decomposition:
    if isinstance(outcome, FillSolved):
        return Decomposition(L=outcome.L, U=outcome.U, J=outcome.J)
    return Decomposition(d=list(outcome.d), U=outcome.U, J=outcome.J)


def _with_rank(dec: Decomposition, report: VerificationReport) -> Decomposition:
    residual = dec.H.frobenius_norm() if dec.H is not None else 0
    return dataclasses.replace(dec, achieved_rank=report.rank, residual=residual)


async def _solve_rank(inst: Instance, r: int, solve_one: Callable[[Tuple[int, ...]], JOutcome],
                      budget: SolverBudget, show_progress: bool) -> SolveResult:
    """Every J of size r; the smallest solved J that verifies gives the decomposition."""
    target = inst.with_rank(r)
    reports: Dict[Tuple[int, ...], Tuple[Decomposition, VerificationReport]] = {}

    def verifies(J: Tuple[int, ...], outcome: JOutcome) -> bool:
        dec = _decomposition_from(outcome)
        reports[J] = (dec, verify(target, dec, budget.tolerances.rank))
        return reports[J][1].passed

    outcomes = await enumerate_index_sets(inst.n, r, solve_one, budget.threads, show_progress,
                                          description=f"Rank {r}: enumerating index sets...",
                                          accept=verifies)
    incomplete: List[str] = []
    for J in sorted(J for J, o in outcomes.items() if isinstance(o, (Solved, FillSolved))):
        dec, report = reports[J]
        if report.passed:
            return Feasible(decomposition=_with_rank(dec, report), rank=r, report=report)
        incomplete.append(f"J={[j + 1 for j in J]}: candidate failed verification ({'; '.join(report.messages)})")

    certificates: List[str] = []
    for J in sorted(outcomes):
        outcome = outcomes[J]
        if isinstance(outcome, InfeasibleForJ):
            text = outcome.certificate
        elif isinstance(outcome, RejectedForJ):
            text = outcome.reason
        else:
            continue
        line = f"J={[j + 1 for j in J]}: {text}"
        (certificates if outcome.complete else incomplete).append(line)
    if incomplete:
        return Unknown(rank=r, incomplete=tuple(incomplete))
    return Infeasible(rank=r, certificates=tuple(certificates))


def _log_result(result: SolveResult, show_progress: bool) -> None:
    if not show_progress:
        return
    if isinstance(result, Feasible):
        console.print(f"[green]Feasible at rank {result.rank}[/green]")
    elif isinstance(result, Infeasible):
        console.print(f"[red]Infeasible at rank {result.rank}[/red]")
    else:
        console.print(f"[yellow]Unknown at rank {result.rank}: {len(result.incomplete)} incomplete searches[/yellow]")


async def _rank_loop(inst: Instance, ranks: Sequence[int], solve_one: Callable[[Tuple[int, ...]], JOutcome],
                     budget: SolverBudget, show_progress: bool) -> SolveResult:
    """Ascending ranks; stop at the first feasible one. Unknown poisons the final verdict."""
    incomplete: List[str] = []
    certificates: List[str] = []
    for r in ranks:
        result = await _solve_rank(inst, r, solve_one, budget, show_progress)
        _log_result(result, show_progress)
        if isinstance(result, Feasible):
            return result
        if isinstance(result, Unknown):
            incomplete.extend(f"rank {r}, {line}" for line in result.incomplete)
        else:
            certificates.extend(f"rank {r}, {line}" for line in result.certificates)
    if incomplete:
        return Unknown(rank=inst.r, incomplete=tuple(incomplete))
    return Infeasible(rank=inst.r, certificates=tuple(certificates))


def _direct_result(inst: Instance, dec: Decomposition, budget: SolverBudget) -> SolveResult:
    """Feasible when a closed-form candidate verifies at inst.r, Unknown otherwise."""
    report = verify(inst, dec, budget.tolerances.rank)
    if report.passed:
        return Feasible(decomposition=_with_rank(dec, report), rank=report.rank, report=report)
    return Unknown(rank=inst.r, incomplete=("closed-form candidate failed verification: "
                                            + "; ".join(report.messages),))


def _lambda_min_shift(A: SymMatrix) -> List[float]:
    lam = float(scipy.linalg.eigvalsh(A.to_float().array)[0])
    return [-lam] * A.n


# -- (P2) ------------------------------------------------------------------------------

async def solve_p2_async(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False,
                         start_rank: int = 1) -> SolveResult:
    budget = budget or SolverBudget()
    if inst.kind != P2:
        raise InstanceError(f"solve_p2 needs a (P2) instance, got {inst.kind}")
    A = inst.A
    if A.off_diagonal_is_zero():
        return _direct_result(inst, Decomposition(d=[0] * A.n), budget)

    def solve_one(J: Tuple[int, ...]) -> JOutcome:
        return solve_index_set(A, J, P2, budget)

    top = min(inst.r, A.n - 1)
    result = await _rank_loop(inst, range(max(1, start_rank), top + 1), solve_one, budget, show_progress)
    if not isinstance(result, Feasible) and inst.r >= A.n - 1:
        fallback = _direct_result(inst, Decomposition(d=_lambda_min_shift(A)), budget)
        if isinstance(fallback, Feasible):
            return fallback
    return result


def solve_p2(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False) -> SolveResult:
    """
    Solve (P2): find d with A + Diag(d) PSD of rank at most inst.r.

    Ranks 1..r are tried in order over every J of that size (linear phase, then the
    polynomial phase). Infeasible means every J at every rank ended with a complete
    certificate; any incomplete search gives Unknown.
    """
    return asyncio.run(solve_p2_async(inst, budget, show_progress))


async def solve_p2_min_async(A: SymMatrix, budget: Optional[SolverBudget] = None,
                             show_progress: bool = False) -> MinRank:
    budget = budget or SolverBudget()
    n = A.n
    if A.off_diagonal_is_zero():
        return MinRank(d=[0] * n, rank=0, certified=True)
    certified = True
    for r in range(1, n - 1):
        inst = Instance(kind=P2, A=A, r=r)
        result = await solve_p2_async(inst, budget, show_progress, start_rank=r)
        if isinstance(result, Feasible):
            return MinRank(d=result.decomposition.d, rank=r, certified=certified)
        if isinstance(result, Unknown):
            certified = False
            console.print(f"[yellow]Rank {r} left undecided; the minimum is not certified[/yellow]")
    inst = Instance(kind=P2, A=A, r=n - 1)
    result = await solve_p2_async(inst, budget, show_progress, start_rank=n - 1)
    if isinstance(result, Feasible):
        return MinRank(d=result.decomposition.d, rank=n - 1, certified=certified)
    d = _lambda_min_shift(A)
    rank = numeric_rank(A.add_diagonal(d), budget.tolerances.rank).rank
    return MinRank(d=d, rank=rank, certified=certified)


def solve_p2_min(A: SymMatrix, budget: Optional[SolverBudget] = None, show_progress: bool = False) -> MinRank:
    """
    Smallest rank reachable by A + Diag(d), with a diagonal reaching it.

    Ranks 1..n-2 are searched; at n-1 the shift d = -lambda_min(A) * 1 is used when the
    search does not find a diagonal itself. ``certified`` is False when some lower rank
    was left undecided.
    """
    return asyncio.run(solve_p2_min_async(A, budget, show_progress))


# -- (P1) ------------------------------------------------------------------------------

async def solve_p1_async(inst: Instance, budget: Optional[SolverBudget] = None,
                         show_progress: bool = False) -> SolveResult:
    budget = budget or SolverBudget()
    if inst.kind != P1:
        raise InstanceError(f"solve_p1 needs a (P1) instance, got {inst.kind}")
    A = inst.A
    if not psd_check(A, tol=0 if A.is_exact else budget.tolerances.psd).psd:
        raise InstanceError("A (P1) instance needs a positive semidefinite A")
    if A.off_diagonal_is_zero():
        return _direct_result(inst, Decomposition(d=list(A.diagonal())), budget)
    own_rank = numeric_rank(A, budget.tolerances.rank).rank

    def solve_one(J: Tuple[int, ...]) -> JOutcome:
        return solve_index_set(A, J, P1, budget)

    incomplete: List[str] = []
    certificates: List[str] = []
    for r in range(1, inst.r + 1):
        if own_rank <= r:
            result = _direct_result(inst.with_rank(r), Decomposition(d=[0] * A.n), budget)
            _log_result(result, show_progress)
            return result
        result = await _solve_rank(inst, r, solve_one, budget, show_progress)
        _log_result(result, show_progress)
        if isinstance(result, Feasible):
            return result
        if isinstance(result, Unknown):
            incomplete.extend(f"rank {r}, {line}" for line in result.incomplete)
        else:
            certificates.extend(f"rank {r}, {line}" for line in result.certificates)
    if incomplete:
        return Unknown(rank=inst.r, incomplete=tuple(incomplete))
    return Infeasible(rank=inst.r, certificates=tuple(certificates))


def solve_p1(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False) -> SolveResult:
    """
    Solve (P1): find d >= 0 with A - Diag(d) PSD of rank at most inst.r.

    d = 0 is used as soon as the rank of A itself is small enough; otherwise every J is
    searched with d_J kept nonnegative by construction and d_i(V) >= 0 outside J
    enforced by the facet recursion.
    """
    return asyncio.run(solve_p1_async(inst, budget, show_progress))


# -- (P3) ------------------------------------------------------------------------------

def _choose_route(inst: Instance, route: str, budget: SolverBudget) -> str:
    if route not in ROUTES:
        raise RouteCapError(f"Unknown route: {route}")
    m = inst.m
    if route == AUTO:
        if m <= budget.p3_direct_cap:
            return DIRECT
        route = COMPILED
    if route == DIRECT and m > budget.p3_direct_cap:
        raise RouteCapError(f"Direct route handles at most {budget.p3_direct_cap} free pairs, got {m}")
    if route == COMPILED and m > budget.p3_compiled_cap:
        raise RouteCapError(f"Compiled route handles at most {budget.p3_compiled_cap} free pairs, got {m}")
    return route


async def _solve_p3_compiled(inst: Instance, budget: SolverBudget, show_progress: bool) -> SolveResult:
    from reductions import reduce_p3_to_p2

    compiled = reduce_p3_to_p2(inst)
    m = inst.m
    target = compiled.instance.with_rank(2 * m + inst.r)
    if show_progress:
        console.print(f"[blue]Compiled to a {target.n}x{target.n} (P2) instance at rank {target.r}[/blue]")
    result = await solve_p2_async(target, budget, show_progress, start_rank=max(1, 2 * m))
    if not isinstance(result, Feasible):
        return dataclasses.replace(result, rank=inst.r)
    dec = compiled.witness.backward(result.decomposition)
    report = verify(inst, dec, budget.tolerances.rank)
    if not report.passed:
        return Unknown(rank=inst.r, incomplete=("the mapped-back fill failed verification: "
                                                + "; ".join(report.messages),))
    return Feasible(decomposition=_with_rank(dec, report), rank=report.rank, report=report)


async def solve_p3_async(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False,
                         route: str = AUTO) -> SolveResult:
    budget = budget or SolverBudget()
    if inst.kind != P3:
        raise InstanceError(f"solve_p3 needs a (P3) instance, got {inst.kind}")
    route = _choose_route(inst, route, budget)
    A = inst.A
    if A.off_diagonal_is_zero():
        return _direct_result(inst, Decomposition(L=SymMatrix.zeros(A.n, A.mode)), budget)
    if route == COMPILED:
        return await _solve_p3_compiled(inst, budget, show_progress)

    def solve_one(J: Tuple[int, ...]) -> JOutcome:
        return solve_fill_index_set(inst, J, budget)

    return await _rank_loop(inst, range(1, min(inst.r, A.n - 1) + 1), solve_one, budget, show_progress)


def solve_p3(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False,
             route: str = AUTO) -> SolveResult:
    """
    Solve (P3): find L vanishing on the pattern with A + L PSD of rank at most inst.r.

    The direct route solves for V and the free entries of L together (at most
    ``p3_direct_cap`` free pairs). The compiled route reduces to (P2) at rank 2m + r and
    maps the diagonal back; its enumeration grows like n^(2m+r), so it refuses more than
    ``p3_compiled_cap`` free pairs. ``auto`` picks direct when it applies.

    Raises:
        RouteCapError: the chosen route cannot take this many free pairs.
    """
    return asyncio.run(solve_p3_async(inst, budget, show_progress, route))


# -- dispatch --------------------------------------------------------------------------

async def solve_async(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False,
                      route: str = AUTO) -> SolveResult:
    if inst.kind == P1:
        return await solve_p1_async(inst, budget, show_progress)
    if inst.kind == P2:
        return await solve_p2_async(inst, budget, show_progress)
    return await solve_p3_async(inst, budget, show_progress, route)


def solve(inst: Instance, budget: Optional[SolverBudget] = None, show_progress: bool = False,
          route: str = AUTO) -> SolveResult:
    """Dispatch on ``inst.kind``."""
    return asyncio.run(solve_async(inst, budget, show_progress, route))
