"""
diagrank symcore - dense symmetric matrix kernel.

Every other module builds on the types here: SymMatrix in exact (Fraction) or float
(binary64) mode, PSD testing by pivoted LDL^T, numerical rank, Schur complements and
the svec/smat/adjugate plumbing of the characterization systems.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from errors import DimensionError, FormatError, NonFiniteError, SingularBlockError, SingularMatrixError

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

Scalar = Union[int, Fraction, float]


def to_exact(value: Any) -> Union[int, Fraction]:
    """
    Convert a scalar to an exact rational, keeping integers as int.

    Accepts int, Fraction, finite float (converted bit-exactly), numpy scalars, sympy
    rationals and strings such as ``"3"``, ``"-2/7"`` or ``"0.25"``.
    """
    if isinstance(value, bool):
        raise FormatError(f"Not a number: {value!r}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(float(value)):
            raise NonFiniteError(f"Non-finite entry: {value}")
        return to_exact(Fraction(float(value)))
    if isinstance(value, str):
        try:
            return to_exact(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise FormatError(f"Not a rational number: {value!r}")
    if hasattr(value, "p") and hasattr(value, "q"):
        return to_exact(Fraction(int(value.p), int(value.q)))
    raise FormatError(f"Not a number: {value!r}")


def to_float(value: Any) -> float:
    result = float(value)
    if not math.isfinite(result):
        raise NonFiniteError(f"Non-finite entry: {value}")
    return result


def _is_float_scalar(value: Any) -> bool:
    return isinstance(value, (float, np.floating))


def _exact_array(rows: Any) -> np.ndarray:
    arr = np.array(rows, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, value in np.ndenumerate(arr):
        out[idx] = to_exact(value)
    return out


def _float_array(rows: Any) -> np.ndarray:
    arr = np.array(rows, dtype=object).astype(float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("Matrix has non-finite entries")
    return arr


def as_array(M: Any, mode: str) -> np.ndarray:
    """Coerce a SymMatrix or nested sequence to an exact (object) or float array."""
    if isinstance(M, SymMatrix):
        M = M.array
    if mode == EXACT:
        return _exact_array(M)
    return _float_array(M)


def infer_mode(rows: Any) -> str:
    """Float if any entry is a float, exact otherwise."""
    for value in np.array(rows, dtype=object).ravel():
        if _is_float_scalar(value):
            return FLOAT
    return EXACT


class SymMatrix:
    """
    Immutable dense symmetric matrix.

    Built only from a lower triangle (or a dense array whose lower triangle is mirrored),
    so symmetry holds by construction. Exact mode stores Python ints/Fractions in an
    object array; float mode stores float64.
    """

    __slots__ = ("_data", "_mode")

    def __init__(self, data: np.ndarray, mode: str):
        if mode not in MODES:
            raise FormatError(f"Unknown mode: {mode}")
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"Expected a square matrix, got shape {data.shape}")
        if data.shape[0] < 1:
            raise DimensionError("Matrix dimension must be at least 1")
        n = data.shape[0]
        lower = np.tril_indices(n, -1)
        data = data.copy()
        data[(lower[1], lower[0])] = data[lower]
        data.setflags(write=False)
        self._data = data
        self._mode = mode

    # -- constructors -------------------------------------------------------------

    @classmethod
    def from_dense(cls, rows: Any, mode: Optional[str] = None, check: bool = True,
                   atol: float = 1e-12) -> "SymMatrix":
        """
        Build from a dense square array.

        Args:
            rows: Nested sequence or ndarray.
            mode: "exact" or "float"; inferred from the entries when omitted.
            check: Reject input that is not symmetric (exactly, or to ``atol`` in float mode).
        """
        if isinstance(rows, SymMatrix):
            rows = rows.array
        mode = mode or infer_mode(rows)
        arr = as_array(rows, mode)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"Expected a square matrix, got shape {arr.shape}")
        if check:
            if mode == EXACT:
                symmetric = all(arr[i, j] == arr[j, i] for i in range(arr.shape[0]) for j in range(i))
            else:
                symmetric = np.allclose(arr, arr.T, rtol=0.0, atol=atol * max(1.0, float(np.abs(arr).max(initial=0.0))))
            if not symmetric:
                raise FormatError("Matrix is not symmetric")
        return cls(arr, mode)

    @classmethod
    def from_lower(cls, n: int, entries: Sequence[Any], mode: str = EXACT) -> "SymMatrix":
        """Build from n(n+1)/2 lower-triangle entries in row-major order."""
        if len(entries) != n * (n + 1) // 2:
            raise DimensionError(f"Expected {n * (n + 1) // 2} lower-triangle entries, got {len(entries)}")
        data = np.empty((n, n), dtype=object if mode == EXACT else float)
        k = 0
        for i in range(n):
            for j in range(i + 1):
                data[i, j] = to_exact(entries[k]) if mode == EXACT else to_float(entries[k])
                k += 1
        return cls(data, mode)

    @classmethod
    def zeros(cls, n: int, mode: str = EXACT) -> "SymMatrix":
        if mode == EXACT:
            return cls(np.full((n, n), 0, dtype=object), mode)
        return cls(np.zeros((n, n)), mode)

    @classmethod
    def identity(cls, n: int, mode: str = EXACT) -> "SymMatrix":
        return cls.diagonal_matrix([1] * n, mode)

    @classmethod
    def diagonal_matrix(cls, values: Sequence[Any], mode: str = EXACT) -> "SymMatrix":
        n = len(values)
        base = cls.zeros(n, mode).array.copy()
        for i, v in enumerate(values):
            base[i, i] = to_exact(v) if mode == EXACT else to_float(v)
        return cls(base, mode)

    # -- accessors ----------------------------------------------------------------

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def is_exact(self) -> bool:
        return self._mode == EXACT

    @property
    def array(self) -> np.ndarray:
        """Read-only dense view."""
        return self._data

    def __getitem__(self, key: Tuple[int, int]) -> Scalar:
        return self._data[key]

    def lower(self) -> List[Scalar]:
        return [self._data[i, j] for i in range(self.n) for j in range(i + 1)]

    def diagonal(self) -> List[Scalar]:
        return [self._data[i, i] for i in range(self.n)]

    def principal(self, J: Sequence[int]) -> "SymMatrix":
        idx = list(J)
        return SymMatrix(self._data[np.ix_(idx, idx)], self._mode)

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return self._data[np.ix_(list(rows), list(cols))]

    def off_diagonal_is_zero(self) -> bool:
        n = self.n
        return all(self._data[i, j] == 0 for i in range(n) for j in range(i))

    # -- arithmetic ---------------------------------------------------------------

    def _coerce_other(self, other: "SymMatrix") -> Tuple[np.ndarray, np.ndarray, str]:
        if not isinstance(other, SymMatrix):
            raise TypeError("SymMatrix arithmetic needs another SymMatrix")
        if other.n != self.n:
            raise DimensionError(f"Dimension mismatch: {self.n} vs {other.n}")
        if self.is_exact and other.is_exact:
            return self._data, other._data, EXACT
        return self.to_float().array, other.to_float().array, FLOAT

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        a, b, mode = self._coerce_other(other)
        return SymMatrix(a + b, mode)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        a, b, mode = self._coerce_other(other)
        return SymMatrix(a - b, mode)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self._data, self._mode)

    def scale(self, factor: Any) -> "SymMatrix":
        if self.is_exact and not _is_float_scalar(factor):
            return SymMatrix(self._data * to_exact(factor), EXACT)
        return SymMatrix(self.to_float().array * float(factor), FLOAT)

    def add_diagonal(self, d: Sequence[Any], sign: int = 1) -> "SymMatrix":
        """Return self + sign * Diag(d); the result is float if either side is."""
        if len(d) != self.n:
            raise DimensionError(f"Diagonal length {len(d)} does not match dimension {self.n}")
        exact = self.is_exact and not any(_is_float_scalar(v) for v in d)
        data = (self._data if exact else self.to_float().array).copy()
        for i, v in enumerate(d):
            data[i, i] = data[i, i] + sign * (to_exact(v) if exact else to_float(v))
        return SymMatrix(data, EXACT if exact else FLOAT)

    def to_float(self) -> "SymMatrix":
        if not self.is_exact:
            return self
        return SymMatrix(np.array([[float(v) for v in row] for row in self._data], dtype=float), FLOAT)

    def to_exact(self) -> "SymMatrix":
        if self.is_exact:
            return self
        return SymMatrix(_exact_array(self._data), EXACT)

    def frobenius_norm_squared(self) -> Scalar:
        if self.is_exact:
            return sum((v * v for v in self._data.ravel()), 0)
        return float(np.sum(self._data * self._data))

    def frobenius_norm(self) -> float:
        return math.sqrt(float(self.frobenius_norm_squared()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymMatrix) or other.n != self.n or other.mode != self.mode:
            return False
        return bool(np.all(self._data == other._data))

    def __hash__(self) -> int:
        return hash((self._mode, tuple(self.lower())))

    def __repr__(self) -> str:
        return f"SymMatrix(n={self.n}, mode={self._mode})"


# -- exact elimination kernel --------------------------------------------------------

def _integer_row(row: Sequence[Any]) -> List[int]:
    """Scale a rational row by the lcm of its denominators."""
    values = [Fraction(to_exact(v)) for v in row]
    scale = 1
    for v in values:
        scale = scale * v.denominator // math.gcd(scale, v.denominator)
    return [int(v * scale) for v in values]


@dataclass
class Echelon:
    """Fraction-free row echelon form of an integer-scaled matrix."""
    rows: List[List[int]]
    pivot_cols: List[int]
    row_order: List[int]
    pivots: List[int]

    @property
    def rank(self) -> int:
        return len(self.pivot_cols)

    def gaussian_pivots(self) -> List[Fraction]:
        """Ordinary elimination pivots D_k / D_(k-1) of the Bareiss leading minors."""
        out, prev = [], 1
        for p in self.pivots:
            out.append(Fraction(p, prev))
            prev = p
        return out


def echelon_exact(matrix: Sequence[Sequence[Any]], ncols: Optional[int] = None,
                  pivot_limit: Optional[int] = None) -> Echelon:
    """
    Bareiss fraction-free elimination with row swaps.

    Each row is first scaled to integers (row scaling does not change rank or the row
    space). Columns without a pivot are skipped, so rank-deficient input is fine.

    Args:
        matrix: Rows of exact scalars.
        ncols: Column count, needed when ``matrix`` has no rows.
        pivot_limit: Only search pivots in the first ``pivot_limit`` columns (used to
            keep right-hand-side columns out of the pivot set).
    """
    rows = [_integer_row(r) for r in matrix]
    m = len(rows)
    n = len(rows[0]) if rows else (ncols or 0)
    limit = n if pivot_limit is None else pivot_limit
    order = list(range(m))
    prev = 1
    r = 0
    pivot_cols: List[int] = []
    pivots: List[int] = []
    for c in range(limit):
        if r == m:
            break
        p = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if p is None:
            continue
        if p != r:
            rows[r], rows[p] = rows[p], rows[r]
            order[r], order[p] = order[p], order[r]
        piv = rows[r][c]
        pivot_row = rows[r]
        for i in range(r + 1, m):
            a = rows[i][c]
            row_i = rows[i]
            rows[i] = [(piv * row_i[j] - a * pivot_row[j]) // prev for j in range(n)]
        prev = piv
        pivot_cols.append(c)
        pivots.append(piv)
        r += 1
    return Echelon(rows=rows, pivot_cols=pivot_cols, row_order=order, pivots=pivots)


def solve_exact(A: Sequence[Sequence[Any]], B: Sequence[Sequence[Any]]) -> Optional[np.ndarray]:
    """
    Solve A X = B exactly, returning a particular solution (free variables set to 0).

    Returns None when the system is inconsistent.
    """
    A = np.array(A, dtype=object)
    B = np.array(B, dtype=object)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    m, n = A.shape
    if B.shape[0] != m:
        raise DimensionError(f"Right-hand side has {B.shape[0]} rows, expected {m}")
    k = B.shape[1]
    augmented = [list(A[i]) + list(B[i]) for i in range(m)]
    ech = echelon_exact(augmented, ncols=n + k, pivot_limit=n)
    rank = ech.rank
    for i in range(rank, m):
        if any(ech.rows[i][n + c] != 0 for c in range(k)):
            return None
    X = np.full((n, k), 0, dtype=object)
    for c in range(k):
        for r in range(rank - 1, -1, -1):
            pc = ech.pivot_cols[r]
            row = ech.rows[r]
            s = Fraction(row[n + c])
            for j in range(pc + 1, n):
                if row[j]:
                    s -= row[j] * Fraction(X[j, c])
            X[pc, c] = to_exact(s / row[pc])
    return X


def inverse_exact(A: Any) -> np.ndarray:
    arr = as_array(A, EXACT)
    n = arr.shape[0]
    ident = np.array([[1 if i == j else 0 for j in range(n)] for i in range(n)], dtype=object)
    ech = echelon_exact(arr.tolist(), ncols=n)
    if ech.rank < n:
        raise SingularMatrixError("Matrix is singular")
    X = solve_exact(arr, ident)
    return X


def exact_rank(A: Any) -> Echelon:
    arr = as_array(A, EXACT)
    return echelon_exact(arr.tolist(), ncols=arr.shape[1])


# -- PSD testing ---------------------------------------------------------------------

@dataclass
class PsdVerdict:
    """Outcome of psd_check. ``vector`` is a certified negative direction when present."""
    psd: bool
    pivot_index: Optional[int] = None
    vector: Optional[List[Scalar]] = None
    value: Optional[Scalar] = None

    @property
    def witness(self) -> Any:
        if self.psd:
            return None
        return self.vector if self.vector is not None else self.pivot_index


def _lift(steps: List[Tuple[int, dict, Any]], y: dict) -> dict:
    """Carry a direction in Schur-complement coordinates back to the original ones."""
    x = dict(y)
    for p, coupling, piv in reversed(steps):
        x[p] = -sum((c * x.get(j, 0) for j, c in coupling.items()), 0) / Fraction(piv)
    return x


def _quadratic_form(M: np.ndarray, x: Sequence[Any]) -> Any:
    n = M.shape[0]
    return sum((x[i] * M[i, j] * x[j] for i in range(n) if x[i] for j in range(n) if x[j]), 0)


def _psd_exact(M: SymMatrix, tol: Scalar) -> PsdVerdict:
    n = M.n
    S = M.array.copy()
    active = list(range(n))
    steps: List[Tuple[int, dict, Any]] = []
    tol = to_exact(tol)

    while active:
        p = max(active, key=lambda i: S[i, i])
        piv = S[p, p]
        if piv > 0 and piv > tol:
            rest = [i for i in active if i != p]
            steps.append((p, {j: S[p, j] for j in rest}, piv))
            if rest:
                col = S[rest, p]
                S[np.ix_(rest, rest)] = S[np.ix_(rest, rest)] - np.outer(col, col) / Fraction(piv)
            active = rest
            continue

        q = min(active, key=lambda i: S[i, i])
        if S[q, q] < -tol:
            y = {q: 1}
        else:
            y = None
            for i, j in combinations(active, 2):
                b = S[i, j]
                if b != 0 and S[i, i] + S[j, j] - 2 * abs(b) < -tol:
                    y = {i: 1, j: -1 if b > 0 else 1}
                    break
            if y is None:
                return PsdVerdict(psd=True)
        x_map = _lift(steps, y)
        x = [to_exact(x_map.get(i, 0)) for i in range(n)]
        value = to_exact(_quadratic_form(M.array, x))
        return PsdVerdict(psd=False, pivot_index=q if len(y) == 1 else None, vector=x, value=value)

    return PsdVerdict(psd=True)


def _psd_float(M: SymMatrix, tol: float) -> PsdVerdict:
    a = M.array
    n = M.n
    lu, dblock, perm = scipy.linalg.ldl(a, lower=True)
    k = 0
    while k < n:
        if k + 1 < n and dblock[k + 1, k] != 0.0:
            block = dblock[k:k + 2, k:k + 2]
            evals, evecs = np.linalg.eigh(block)
            if evals[0] < -tol:
                y = np.zeros(n)
                y[k:k + 2] = evecs[:, 0]
                return _float_witness(a, lu, perm, y, k)
            k += 2
            continue
        if dblock[k, k] < -tol:
            y = np.zeros(n)
            y[k] = 1.0
            return _float_witness(a, lu, perm, y, k)
        k += 1
    return PsdVerdict(psd=True)


def _float_witness(a: np.ndarray, lu: np.ndarray, perm: np.ndarray, y: np.ndarray, k: int) -> PsdVerdict:
    """Solve lu^T x = y so that x^T a x = y^T D y < 0; fall back to an eigenvector."""
    tri = lu[perm, :]
    w = scipy.linalg.solve_triangular(tri, y, trans="T", lower=True, unit_diagonal=False)
    x = np.empty_like(w)
    x[perm] = w
    value = float(x @ a @ x)
    if value < 0:
        return PsdVerdict(psd=False, pivot_index=int(perm[k]), vector=x.tolist(), value=value)
    evals, evecs = np.linalg.eigh(a)
    vec = evecs[:, 0]
    value = float(vec @ a @ vec)
    if value < 0:
        return PsdVerdict(psd=False, pivot_index=int(perm[k]), vector=vec.tolist(), value=value)
    return PsdVerdict(psd=False, pivot_index=int(perm[k]))


def psd_check(M: SymMatrix, tol: Scalar = 1e-9) -> PsdVerdict:
    """
    Test M for positive semidefiniteness with a pivoted LDL^T factorization.

    Exact mode runs symmetric diagonal pivoting over the rationals and stops at the
    first negative pivot or indefinite 2x2 block; float mode uses LAPACK's
    Bunch-Kaufman factorization (scipy.linalg.ldl) and inspects the 1x1/2x2 blocks of D.

    Args:
        M: Matrix to test.
        tol: Absolute pivot threshold; 0 is only allowed in exact mode.

    Returns:
        PsdVerdict; when not PSD it carries x with x^T M x < 0 whenever one is certified.
    """
    if tol < 0:
        raise ValueError(f"Tolerance must be nonnegative, got {tol}")
    if M.is_exact:
        return _psd_exact(M, tol)
    if tol == 0:
        raise ValueError("Zero tolerance requires exact mode")
    return _psd_float(M, float(tol))


# -- rank ---------------------------------------------------------------------------

@dataclass
class RankReport:
    rank: int
    tolerance: Scalar
    smallest_accepted_pivot: Optional[Scalar]
    largest_rejected_pivot: Optional[Scalar]
    exact: bool = False


def equilibrate(a: np.ndarray) -> np.ndarray:
    """Symmetric Jacobi scaling D^-1/2 A D^-1/2 (zero diagonals left unscaled)."""
    d = np.sqrt(np.abs(np.diag(a)))
    d[d == 0.0] = 1.0
    return a / np.outer(d, d)


def numeric_rank(M: SymMatrix, tol: float = 1e-9, equilibrate_first: bool = False) -> RankReport:
    """
    Rank of M.

    Exact mode: exact rank by fraction-free elimination (``tol`` ignored).
    Float mode: number of singular values above ``tol * sigma_max``; with
    ``equilibrate_first`` the matrix is Jacobi-scaled first, which preserves rank and
    tames matrices whose entries span many orders of magnitude.
    """
    if M.is_exact:
        ech = exact_rank(M)
        pivots = [abs(p) for p in ech.gaussian_pivots()]
        return RankReport(rank=ech.rank, tolerance=0,
                          smallest_accepted_pivot=min(pivots) if pivots else None,
                          largest_rejected_pivot=None, exact=True)
    if tol <= 0:
        raise ValueError("Float-mode rank needs a positive tolerance")
    a = M.array
    if equilibrate_first:
        a = equilibrate(a)
    sv = scipy.linalg.svdvals(a)
    smax = float(sv[0]) if sv.size else 0.0
    threshold = tol * smax
    accepted = sv[sv > threshold] if smax > 0 else sv[:0]
    rejected = sv[sv <= threshold] if smax > 0 else sv
    return RankReport(
        rank=int(accepted.size),
        tolerance=threshold,
        smallest_accepted_pivot=float(accepted.min()) if accepted.size else None,
        largest_rejected_pivot=float(rejected.max()) if rejected.size else None,
    )


# -- Schur complements --------------------------------------------------------------

def complement(n: int, J: Iterable[int]) -> List[int]:
    js = set(J)
    return [i for i in range(n) if i not in js]


def schur_complement(M: SymMatrix, J: Sequence[int], tol: float = 1e-9) -> SymMatrix:
    """
    M(Jbar,Jbar) - M(Jbar,J) M(J,J)^+ M(J,Jbar).

    A singular M(J,J) is accepted when the range condition holds, i.e. the rows of
    M(Jbar,J) lie in the row space of M(J,J); otherwise SingularBlockError.
    """
    J = sorted(set(J))
    Jbar = complement(M.n, J)
    if not J or not Jbar:
        raise DimensionError("Both J and its complement must be nonempty")
    if any(j < 0 or j >= M.n for j in J):
        raise DimensionError(f"Index set {J} out of range for dimension {M.n}")

    A = M.block(J, J)
    W = M.block(Jbar, J)
    Bm = M.block(Jbar, Jbar)

    if M.is_exact:
        X = solve_exact(A, W.T)
        if X is None:
            raise SingularBlockError(f"M(J,J) is singular and the range condition fails for J={J}")
        return SymMatrix(Bm - W.dot(X), EXACT)

    sv = scipy.linalg.svdvals(A)
    if sv.size and sv.min() > tol * max(sv.max(), 1.0):
        X = scipy.linalg.solve(A, W.T, assume_a="sym")
    else:
        pinv = scipy.linalg.pinvh(A, atol=tol * max(float(sv.max(initial=0.0)), 1.0))
        X = pinv @ W.T
        residual = np.linalg.norm(W - (W @ pinv) @ A)
        if residual > tol * max(np.linalg.norm(W), tol):
            raise SingularBlockError(f"M(J,J) is singular and the range condition fails for J={J} "
                                     f"(residual {residual:.3e})")
    S = Bm - W @ X
    return SymMatrix((S + S.T) / 2.0, FLOAT)


# -- Kronecker / svec plumbing --------------------------------------------------------

def kron(A: Any, B: Any) -> np.ndarray:
    """Kronecker product of matrices or vectors (SymMatrix accepted)."""
    a = A.array if isinstance(A, SymMatrix) else np.asarray(A, dtype=object if _any_exact(A) else None)
    b = B.array if isinstance(B, SymMatrix) else np.asarray(B, dtype=object if _any_exact(B) else None)
    return np.kron(a, b)


def _any_exact(obj: Any) -> bool:
    return any(isinstance(v, Fraction) for v in np.asarray(obj, dtype=object).ravel())


def svec_length(r: int) -> int:
    return r * (r + 1) // 2


def svec_dim(length: int) -> int:
    r = (math.isqrt(8 * length + 1) - 1) // 2
    if svec_length(r) != length:
        raise DimensionError(f"{length} is not a triangular number")
    return r


def svec_index(p: int, q: int) -> int:
    """Position of V[p,q] (any order) in svec(V)."""
    if p < q:
        p, q = q, p
    return p * (p + 1) // 2 + q


def svec(V: SymMatrix) -> List[Scalar]:
    """Lower triangle of V, row-major: V11, V21, V22, V31, ..."""
    return V.lower()


def smat(v: Sequence[Any], mode: Optional[str] = None) -> SymMatrix:
    if mode is None:
        mode = FLOAT if any(_is_float_scalar(x) for x in v) else EXACT
    return SymMatrix.from_lower(svec_dim(len(v)), list(v), mode)


def sym_kron_row(x: Sequence[Any], y: Sequence[Any]) -> List[Any]:
    """
    Coefficients c with c . svec(V) = x^T V y for every symmetric V.

    Folds kron(x, y) onto the lower triangle: off-diagonal positions collect both
    x_p y_q and x_q y_p.
    """
    r = len(x)
    if len(y) != r:
        raise DimensionError(f"Vector lengths differ: {r} vs {len(y)}")
    full = kron(list(x), list(y)).ravel()
    row = []
    for p in range(r):
        for q in range(p + 1):
            row.append(full[p * r + q] if p == q else full[p * r + q] + full[q * r + p])
    return row


# -- determinants and adjugates -------------------------------------------------------

def det(V: Any) -> Scalar:
    if isinstance(V, SymMatrix):
        exact, arr = V.is_exact, V.array
    else:
        exact = infer_mode(V) == EXACT
        arr = as_array(V, EXACT if exact else FLOAT)
    n = arr.shape[0]
    if arr.shape != (n, n):
        raise DimensionError(f"Expected a square matrix, got shape {arr.shape}")
    if n == 0:
        return 1
    if not exact:
        return float(scipy.linalg.det(arr))
    # Bareiss on the scaled rows, then undo the row scaling and count swaps.
    scale = Fraction(1)
    for row in arr:
        ints = _integer_row(row)
        nz = next((i for i, v in enumerate(row) if v != 0), None)
        if nz is None:
            return 0
        scale *= Fraction(ints[nz]) / Fraction(to_exact(row[nz]))
    ech = echelon_exact(arr.tolist(), ncols=n)
    if ech.rank < n:
        return 0
    sign = _permutation_sign(ech.row_order)
    return to_exact(sign * Fraction(ech.pivots[-1]) / scale)


def _permutation_sign(order: Sequence[int]) -> int:
    seen = [False] * len(order)
    sign = 1
    for i in range(len(order)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def adjugate(V: SymMatrix) -> SymMatrix:
    """Transpose of the cofactor matrix; V @ adjugate(V) = det(V) I."""
    n = V.n
    arr = V.array
    if n == 1:
        return SymMatrix.from_lower(1, [1], V.mode)
    entries = []
    for i in range(n):
        for j in range(i + 1):
            rows = [k for k in range(n) if k != j]
            cols = [k for k in range(n) if k != i]
            minor = arr[np.ix_(rows, cols)]
            cof = det(minor if V.is_exact else minor.astype(float))
            entries.append(cof if (i + j) % 2 == 0 else -cof)
    return SymMatrix.from_lower(n, entries, V.mode)


def inverse(V: SymMatrix) -> SymMatrix:
    if V.is_exact:
        return SymMatrix(inverse_exact(V), EXACT)
    try:
        inv = scipy.linalg.inv(V.array)
    except (np.linalg.LinAlgError, ValueError):
        raise SingularMatrixError("Matrix is singular")
    if not np.all(np.isfinite(inv)):
        raise SingularMatrixError("Matrix is singular")
    return SymMatrix((inv + inv.T) / 2.0, FLOAT)


def is_positive_definite(V: SymMatrix, tol: float = 1e-9) -> bool:
    """Strict check: every leading pivot of the diagonal-pivoted LDL^T exceeds tol."""
    if V.is_exact:
        ech_tol = 0
        verdict = _psd_exact(V, ech_tol)
        return verdict.psd and exact_rank(V).rank == V.n
    try:
        evals = scipy.linalg.eigvalsh(V.array)
    except np.linalg.LinAlgError:
        return False
    return bool(evals.min() > tol)
