"""
diagrank charsys - characterization system for a fixed index set J and the linear phase.

For a candidate support J (|J| = r) the completion A + Diag(d) = U U^T with U(J,:)
nonsingular is described by V = (U_J U_J^T)^-1: off-diagonal pairs i<j outside J give
linear equations A(J,i)^T V A(J,j) = A_ij, and the inverse of V must reproduce A on J.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from errors import DimensionError, InconsistentSystemError, InstanceError, SingularMatrixError
from symcore import (EXACT, FLOAT, SymMatrix, complement, echelon_exact, inverse, is_positive_definite,
                     smat, solve_exact, svec_length, sym_kron_row, to_exact)

P1 = "P1"
P2 = "P2"
P3 = "P3"
KINDS = (P1, P2, P3)


@dataclass(frozen=True)
class CharSystem:
    """
    Linear part of the characterization system, reduced to independent rows.

    ``diag_affine`` (P1 only) maps i in Jbar to (row, const) with
    d_i(V) = const - row . svec(V).
    """
    A: SymMatrix
    J: Tuple[int, ...]
    Jbar: Tuple[int, ...]
    linear_lhs: np.ndarray
    linear_rhs: np.ndarray
    kind: str
    pairs: Tuple[Tuple[int, int], ...] = ()
    solution: Optional[List] = None
    diag_affine: Dict[int, Tuple[List, object]] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.A.mode

    @property
    def r(self) -> int:
        return len(self.J)

    @property
    def n_unknowns(self) -> int:
        return svec_length(self.r)

    @property
    def rank(self) -> int:
        return self.linear_lhs.shape[0]

    @property
    def is_underdetermined(self) -> bool:
        return self.rank < self.n_unknowns


@dataclass(frozen=True)
class Solved:
    J: Tuple[int, ...]
    d: List
    V: SymMatrix
    U: Optional[np.ndarray] = None


@dataclass(frozen=True)
class InfeasibleForJ:
    J: Tuple[int, ...]
    certificate: str
    complete: bool = True


@dataclass(frozen=True)
class Underdetermined:
    J: Tuple[int, ...]
    system: CharSystem
    complete: bool = False

    @property
    def linear_lhs(self) -> np.ndarray:
        return self.system.linear_lhs

    @property
    def linear_rhs(self) -> np.ndarray:
        return self.system.linear_rhs


@dataclass(frozen=True)
class RejectedForJ:
    J: Tuple[int, ...]
    reason: str
    complete: bool = True
    violated: Tuple[int, ...] = ()


Alg1Outcome = Union[Solved, InfeasibleForJ, Underdetermined, RejectedForJ]


def _column(A: SymMatrix, J: Sequence[int], i: int) -> List:
    return [A[j, i] for j in J]


def _validate(A: SymMatrix, J: Sequence[int], kind: str) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if kind not in (P1, P2):
        raise InstanceError(f"Unknown kind for the characterization system: {kind}")
    J = tuple(sorted(set(J)))
    if not 1 <= len(J) <= A.n - 1:
        raise DimensionError(f"Index set size must be in [1, {A.n - 1}], got {len(J)}")
    if J[0] < 0 or J[-1] >= A.n:
        raise DimensionError(f"Index set {J} out of range for dimension {A.n}")
    if kind == P2 and any(v != 0 for v in A.diagonal()):
        raise InstanceError("A (P2) instance needs a zero diagonal")
    return J, tuple(complement(A.n, J))


def reduce_rows(rows: List[List], rhs: List, n_unknowns: int, mode: str, tol: float = 1e-10,
                pairs: Sequence = ()) -> Tuple[np.ndarray, np.ndarray, List[int], Optional[List]]:
    """
    Reduce a linear system to an independent basis of its rows.

    Exact mode uses fraction-free elimination; float mode a column-pivoted QR of the
    transposed system with threshold ``tol * max row norm``.

    Returns:
        (basis lhs, basis rhs, basis row indices, unique solution or None)

    Raises:
        InconsistentSystemError: the rows combine to 0 = c with c != 0.
    """
    label = (lambda k: f"pair {tuple(p + 1 for p in pairs[k])}") if pairs else (lambda k: f"row {k + 1}")
    if not rows:
        empty = np.zeros((0, n_unknowns), dtype=object if mode == EXACT else float)
        return empty, np.zeros(0, dtype=empty.dtype), [], None

    if mode == EXACT:
        augmented = [list(r) + [b] for r, b in zip(rows, rhs)]
        ech = echelon_exact(augmented, ncols=n_unknowns + 1, pivot_limit=n_unknowns)
        rank = ech.rank
        for t in range(rank, len(rows)):
            if ech.rows[t][n_unknowns] != 0:
                culprit = ech.row_order[t]
                basis = ", ".join(label(k) for k in sorted(ech.row_order[:rank]))
                raise InconsistentSystemError(
                    f"Linear system is inconsistent at {label(culprit)}",
                    certificate=f"the equation for {label(culprit)} contradicts {basis or 'itself'}: "
                                f"eliminating gives 0 = c with c != 0")
        basis_idx = sorted(ech.row_order[:rank])
        lhs = np.array([[to_exact(v) for v in rows[k]] for k in basis_idx], dtype=object).reshape(rank, n_unknowns)
        b = np.array([to_exact(rhs[k]) for k in basis_idx], dtype=object)
        solution = None
        if rank == n_unknowns:
            X = solve_exact(lhs, b)
            solution = [X[i, 0] for i in range(n_unknowns)]
        return lhs, b, basis_idx, solution

    M = np.array(rows, dtype=float)
    b_all = np.array(rhs, dtype=float)
    norms = np.linalg.norm(M, axis=1)
    scale = float(norms.max(initial=0.0))
    if scale == 0.0:
        rank, basis_idx = 0, []
    else:
        _, R, piv = scipy.linalg.qr(M.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > tol * scale))
        basis_idx = sorted(int(p) for p in piv[:rank])
    x, *_ = np.linalg.lstsq(M, b_all, rcond=None)
    residual = M @ x - b_all
    worst = int(np.argmax(np.abs(residual)))
    allowance = 1e3 * tol * max(1.0, float(np.abs(b_all).max(initial=0.0)), scale * float(np.abs(x).max(initial=0.0)))
    if abs(residual[worst]) > allowance:
        raise InconsistentSystemError(
            f"Linear system is inconsistent at {label(worst)}",
            certificate=f"least-squares residual {abs(residual[worst]):.3e} at {label(worst)} "
                        f"exceeds {allowance:.3e}")
    lhs = M[basis_idx, :].reshape(rank, n_unknowns)
    b = b_all[basis_idx]
    solution = x.tolist() if rank == n_unknowns else None
    return lhs, b, basis_idx, solution


def assemble_linear_system(A: SymMatrix, J: Sequence[int], kind: str = P2,
                           tol: float = 1e-10) -> CharSystem:
    """
    Build and reduce the linear equations [A(J,i) (x)s A(J,j)]^T svec(V) = A_ij, i<j in Jbar.

    Args:
        A: Instance matrix (zero diagonal for P2).
        J: Candidate index set, 0-based.
        kind: P2, or P1 which also records the affine maps d_i(V) for i in Jbar.
        tol: Float-mode row-rank threshold.

    Raises:
        InconsistentSystemError: the pairs outside J admit no V at all.
    """
    J, Jbar = _validate(A, J, kind)
    n_unknowns = svec_length(len(J))
    columns = {i: _column(A, J, i) for i in Jbar}

    pairs = list(combinations(Jbar, 2))
    rows = [sym_kron_row(columns[i], columns[j]) for i, j in pairs]
    rhs = [A[i, j] for i, j in pairs]
    lhs, b, basis_idx, solution = reduce_rows(rows, rhs, n_unknowns, A.mode, tol, pairs)

    diag_affine: Dict[int, Tuple[List, object]] = {}
    if kind == P1:
        for i in Jbar:
            diag_affine[i] = (sym_kron_row(columns[i], columns[i]), A[i, i])

    return CharSystem(A=A, J=J, Jbar=Jbar, linear_lhs=lhs, linear_rhs=b, kind=kind,
                      pairs=tuple(pairs[k] for k in basis_idx), solution=solution,
                      diag_affine=diag_affine)


def recover_d(A: SymMatrix, J: Sequence[int], V: SymMatrix, kind: str = P2,
              W: Optional[SymMatrix] = None) -> List:
    """
    Diagonal that completes A given V.

    w_i = (V^-1)_ii for i in J and w_i = A(J,i)^T V A(J,i) for i outside J; the (P2)
    diagonal is w, the (P1) diagonal is diag(A) - w.

    Raises:
        SingularMatrixError: V is singular.
    """
    J = tuple(sorted(J))
    if V.n != len(J):
        raise DimensionError(f"V is {V.n}x{V.n} but |J| = {len(J)}")
    W = W if W is not None else inverse(V)
    v = V.array
    pos = {j: k for k, j in enumerate(J)}
    w = []
    for i in range(A.n):
        if i in pos:
            w.append(W[pos[i], pos[i]])
        else:
            x = np.array(_column(A, J, i), dtype=object if V.is_exact else float)
            if not V.is_exact:
                x = x.astype(float)
            w.append(x.dot(v).dot(x))
    if not (V.is_exact and A.is_exact):
        w = [float(x) for x in w]
    if kind == P1:
        return [A[i, i] - w[i] if V.is_exact and A.is_exact else float(A[i, i]) - w[i] for i in range(A.n)]
    return w


def factor_from_v(A: SymMatrix, J: Sequence[int], V: SymMatrix) -> np.ndarray:
    """
    Factor U (n x r, float) of the completion: U_J is a Cholesky factor of V^-1 and the
    remaining rows are A(i,J) U_J^-T.
    """
    J = tuple(sorted(J))
    W = inverse(V.to_float()).array
    try:
        chol = scipy.linalg.cholesky(W, lower=True)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("V^-1 is not positive definite")
    U = np.zeros((A.n, len(J)))
    pos = {j: k for k, j in enumerate(J)}
    for i in range(A.n):
        if i in pos:
            U[i, :] = chol[pos[i], :]
        else:
            x = np.array([float(A[j, i]) for j in J])
            U[i, :] = scipy.linalg.solve_triangular(chol, x, lower=True)
    return U


def check_candidate(A: SymMatrix, J: Sequence[int], V: SymMatrix, kind: str = P2,
                    tol: float = 1e-9, match_tol: float = 1e-6) -> Union[Solved, RejectedForJ]:
    """
    Accept V when V > 0, V^-1 agrees with A off the diagonal on J and, for P1, d >= 0.
    """
    J = tuple(sorted(J))
    if not is_positive_definite(V, tol):
        return RejectedForJ(J, "V is not positive definite")
    W = inverse(V)
    exact = V.is_exact and A.is_exact
    for a, b in combinations(range(len(J)), 2):
        target = A[J[a], J[b]]
        got = W[a, b]
        if exact:
            if got != target:
                return RejectedForJ(J, f"V^-1 differs from A at {(J[a] + 1, J[b] + 1)}")
        elif abs(float(got) - float(target)) > match_tol * max(1.0, abs(float(target))):
            return RejectedForJ(J, f"V^-1 differs from A at {(J[a] + 1, J[b] + 1)}")
    d = recover_d(A, J, V, kind, W)
    violated = tuple(i for i, x in enumerate(d) if float(x) < -tol) if kind == P1 else ()
    if violated:
        return RejectedForJ(J, "nonnegativity of d fails", violated=violated)
    if kind == P1 and not exact:
        d = [max(float(x), 0.0) if float(x) < 0 else float(x) for x in d]
    return Solved(J=J, d=d, V=V, U=factor_from_v(A, J, V))


def algorithm1(A: SymMatrix, J: Sequence[int], tol: float = 1e-9, kind: str = P2,
               linear_tol: float = 1e-10) -> Alg1Outcome:
    """
    Linear phase for a fixed J.

    No V solves the pair equations -> InfeasibleForJ; a family of solutions ->
    Underdetermined (the caller moves on to the polynomial phase); a unique V -> Solved
    or RejectedForJ after the positivity, inverse-match and (P1) sign checks.
    """
    J, _ = _validate(A, J, kind)
    try:
        system = assemble_linear_system(A, J, kind, linear_tol)
    except InconsistentSystemError as exc:
        return InfeasibleForJ(J, f"no V for J={[j + 1 for j in J]} (either infeasible or U(J,:) is "
                                 f"singular in every solution): {exc.certificate}")
    if system.is_underdetermined:
        return Underdetermined(J, system)
    V = smat(system.solution, EXACT if A.is_exact else FLOAT)
    return check_candidate(A, J, V, kind, tol)
