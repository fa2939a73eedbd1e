"""
diagrank polysolve - polynomial systems, the positivity-encoded system for a fixed J,
and a two-backend solver.

The exact backend eliminates linear equations (including linear combinations of the
input), sets aside auxiliary variables that only occur squared in a single equation,
and finishes with resultants and Sturm-checked real-root isolation when at most two
unknowns remain. Anything larger goes to a multistart damped Newton search whose
answers are labelled incomplete.
"""

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.optimize
import sympy
from sympy.parsing.sympy_parser import (convert_xor, parse_expr, rationalize,
                                        standard_transformations)
from sympy.polys.polyerrors import BasePolynomialError

from charsys import P1, P2, Alg1Outcome, InfeasibleForJ, RejectedForJ, Solved, check_candidate
from errors import DimensionError, FormatError, SingularMatrixError, VariableCapExceededError
from settings import SolverBudget
from symcore import EXACT, FLOAT, SymMatrix, echelon_exact, smat, svec_index, svec_length, to_exact

Coefficient = Union[int, Fraction, float]
Monomial = Tuple[int, ...]

_TRANSFORMS = standard_transformations + (convert_xor, rationalize)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ZERO_DIGITS = 60


# -- polynomials -----------------------------------------------------------------------

def _natural_key(name: str) -> Tuple:
    parts = re.split(r"(\d+)", name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def _coefficient(value: Any) -> Coefficient:
    """sympy/python number -> int, Fraction or float."""
    if isinstance(value, (int, np.integer, Fraction)):
        return to_exact(value)
    if isinstance(value, float):
        return value
    if getattr(value, "is_Rational", False):
        return to_exact(Fraction(int(value.p), int(value.q)))
    if getattr(value, "is_number", False):
        return float(sympy.re(sympy.N(value, 30)))
    raise FormatError(f"Not a numeric coefficient: {value}")


def _sympy_number(value: Coefficient) -> sympy.Expr:
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, (int, np.integer)):
        return sympy.Integer(int(value))
    return sympy.Float(float(value))


@dataclass(frozen=True)
class Poly:
    """Sparse polynomial over an ordered variable list; zero terms are never stored."""
    variables: Tuple[str, ...]
    terms: Tuple[Tuple[Monomial, Coefficient], ...]

    @classmethod
    def from_terms(cls, variables: Sequence[str], terms: Dict[Monomial, Any]) -> "Poly":
        variables = tuple(variables)
        clean = {}
        for monom, coeff in terms.items():
            if len(monom) != len(variables):
                raise DimensionError(f"Monomial {monom} does not match {len(variables)} variables")
            c = _coefficient(coeff)
            if c != 0:
                clean[tuple(int(e) for e in monom)] = c
        ordered = sorted(clean.items(), key=lambda kv: (-sum(kv[0]), tuple(-e for e in kv[0])))
        return cls(variables, tuple(ordered))

    @classmethod
    def from_sympy(cls, expr: Any, variables: Sequence[str]) -> "Poly":
        symbols = [sympy.Symbol(v) for v in variables]
        expr = sympy.expand(sympy.sympify(expr))
        stray = expr.free_symbols - set(symbols)
        if stray:
            raise FormatError(f"Unknown variables: {', '.join(sorted(str(s) for s in stray))}")
        if not symbols:
            return cls.from_terms((), {(): expr})
        try:
            p = sympy.Poly(expr, *symbols)
        except BasePolynomialError as exc:
            raise FormatError(f"Not a polynomial: {expr} ({exc})")
        return cls.from_terms(variables, dict(p.terms()))

    @classmethod
    def parse(cls, text: str, variables: Sequence[str]) -> "Poly":
        """Parse ``expr`` or ``lhs = rhs`` with ``^`` or ``**`` exponents."""
        local = {v: sympy.Symbol(v) for v in variables}
        sides = text.split("=")
        if len(sides) > 2:
            raise FormatError(f"More than one '=' in equation: {text!r}")
        try:
            parsed = [parse_expr(side, local_dict=local, transformations=_TRANSFORMS) for side in sides]
        except Exception as exc:
            raise FormatError(f"Cannot parse equation {text!r}: {exc}")
        expr = parsed[0] - parsed[1] if len(parsed) == 2 else parsed[0]
        return cls.from_sympy(expr, variables)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_exact(self) -> bool:
        return all(not isinstance(c, float) for _, c in self.terms)

    def degree(self) -> int:
        return max((sum(m) for m, _ in self.terms), default=0)

    def is_linear(self) -> bool:
        return self.degree() <= 1

    def free_variables(self) -> List[str]:
        used = set()
        for monom, _ in self.terms:
            used.update(v for v, e in zip(self.variables, monom) if e)
        return [v for v in self.variables if v in used]

    def max_abs_coefficient(self) -> float:
        return max((abs(float(c)) for _, c in self.terms), default=0.0)

    def evaluate(self, values: Union[Dict[str, Any], Sequence[Any]]) -> Any:
        point = [values[v] for v in self.variables] if isinstance(values, dict) else list(values)
        total: Any = 0
        for monom, coeff in self.terms:
            term: Any = coeff
            for x, e in zip(point, monom):
                if e:
                    term = term * x ** e
            total = total + term
        return total

    def to_sympy(self, symbols: Optional[Sequence[sympy.Symbol]] = None) -> sympy.Expr:
        symbols = symbols or [sympy.Symbol(v) for v in self.variables]
        return sympy.Add(*[_sympy_number(c) * sympy.Mul(*[s ** e for s, e in zip(symbols, m) if e])
                           for m, c in self.terms])

    def format(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for k, (monom, coeff) in enumerate(self.terms):
            factors = [v if e == 1 else f"{v}^{e}" for v, e in zip(self.variables, monom) if e]
            negative = coeff < 0
            mag = -coeff if negative else coeff
            if isinstance(mag, float):
                mag_text = repr(mag)
            else:
                mag_text = str(mag)
            if factors:
                body = "*".join(factors) if mag == 1 else f"{mag_text}*" + "*".join(factors)
            else:
                body = mag_text
            if k == 0:
                pieces.append(f"-{body}" if negative else body)
            else:
                pieces.append(f"- {body}" if negative else f"+ {body}")
        return " ".join(pieces)

    def __str__(self) -> str:
        return self.format()


@dataclass(frozen=True)
class PolySystem:
    """
    Equations over one shared variable list.

    ``auxiliary`` names variables that encode positivity (only nonnegative values are
    kept); ``meta`` carries assembly information such as the index set and the names of
    the svec(V) unknowns.
    """
    variables: Tuple[str, ...]
    equations: Tuple[Poly, ...]
    auxiliary: FrozenSet[str] = frozenset()
    meta: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for eq in self.equations:
            if eq.variables != self.variables:
                raise DimensionError("All equations must share the system's variable list")
        unknown = set(self.auxiliary) - set(self.variables)
        if unknown:
            raise DimensionError(f"Auxiliary names not in the system: {sorted(unknown)}")

    @property
    def var_count(self) -> int:
        return len(self.variables)

    @property
    def linear_flags(self) -> List[bool]:
        return [eq.is_linear() for eq in self.equations]

    @property
    def is_exact(self) -> bool:
        return all(eq.is_exact for eq in self.equations)

    def max_abs_coefficient(self) -> float:
        return max((eq.max_abs_coefficient() for eq in self.equations), default=0.0)

    def to_text(self) -> str:
        lines = [f"# variables: {' '.join(self.variables)}"]
        if self.auxiliary:
            aux = [v for v in self.variables if v in self.auxiliary]
            lines.append(f"# auxiliary: {' '.join(aux)}")
        lines.extend(f"{eq.format()} = 0" for eq in self.equations)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolySystem":
        """
        Parse one equation per line. Optional ``# variables:`` and ``# auxiliary:``
        header comments fix the variable order; otherwise identifiers are sorted
        naturally (x2 before x10).
        """
        variables: Optional[List[str]] = None
        auxiliary: List[str] = []
        bodies: List[str] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                header = line[1:].strip()
                if header.lower().startswith("variables:"):
                    variables = header.split(":", 1)[1].split()
                elif header.lower().startswith("auxiliary:"):
                    auxiliary = header.split(":", 1)[1].split()
                continue
            bodies.append(line)
        if not bodies:
            raise FormatError("No equations found")
        if variables is None:
            found = set()
            for body in bodies:
                found.update(_IDENT.findall(body))
            variables = sorted(found, key=_natural_key)
        equations = tuple(Poly.parse(body, variables) for body in bodies)
        return cls(tuple(variables), equations, frozenset(auxiliary))


# -- solve outcomes --------------------------------------------------------------------

@dataclass(frozen=True)
class Solution:
    """A real solution. ``exact`` holds sympy numbers when the exact backend produced it."""
    values: Dict[str, float]
    residual: float
    exact: Optional[Dict[str, Any]] = None

    def rational(self, name: str) -> Optional[Union[int, Fraction]]:
        """Exact rational value of a variable, or None if unavailable or irrational."""
        if self.exact is None:
            return None
        value = self.exact.get(name)
        if value is None or not getattr(value, "is_Rational", False):
            return None
        return to_exact(value)


@dataclass(frozen=True)
class Solutions:
    points: Tuple[Solution, ...]
    backend: str
    complete: bool


@dataclass(frozen=True)
class NoneFoundComplete:
    reason: str = "no real solution"
    backend: str = "exact"


@dataclass(frozen=True)
class NoneFoundIncomplete:
    starts: int
    reason: str
    backend: str = "numeric"


SolveOutcome = Union[Solutions, NoneFoundComplete, NoneFoundIncomplete]


class _NeedsNumeric(Exception):
    pass


class _PositiveDimensional(_NeedsNumeric):
    pass


# -- exact backend ---------------------------------------------------------------------

def _is_zero(value: sympy.Expr) -> bool:
    if value.is_Rational:
        return value == 0
    approx = sympy.N(value, _ZERO_DIGITS)
    return bool(abs(approx) < sympy.Float(10) ** (-40))


def _sign(value: sympy.Expr) -> int:
    if value.is_Rational:
        return bool(value > 0) - bool(value < 0)
    approx = sympy.re(sympy.N(value, _ZERO_DIGITS))
    if abs(approx) < sympy.Float(10) ** (-40):
        return 0
    return 1 if approx > 0 else -1


def _to_float(value: Any) -> float:
    if isinstance(value, (int, float, Fraction)):
        return float(value)
    return float(sympy.re(sympy.N(value, 30)))


def sturm_isolate(poly: sympy.Poly) -> List[Tuple[Fraction, Fraction]]:
    """
    Isolating intervals (a, b] for the distinct real roots of a rational univariate
    polynomial, by bisection on Sturm sequence sign variations.

    Kept as an independent cross-check of ``sympy.real_roots``: the exact backend falls
    back to the numeric search when the two root counts disagree.
    """
    p = sympy.Poly(poly).sqf_part()
    if p.degree() <= 0:
        return []
    chain = sympy.sturm(p)
    coeffs = [Fraction(_coefficient(c)) for c in p.all_coeffs()]
    bound = 1 + max(abs(c / coeffs[0]) for c in coeffs[1:]) if len(coeffs) > 1 else Fraction(1)

    def variations(x: Fraction) -> int:
        signs = []
        for q in chain:
            v = q.eval(sympy.Rational(x.numerator, x.denominator))
            if v != 0:
                signs.append(bool(v > 0))
        return sum(1 for s, t in zip(signs, signs[1:]) if s != t)

    intervals = []
    stack = [(-bound, bound)]
    while stack:
        a, b = stack.pop()
        count = variations(a) - variations(b)
        if count == 0:
            continue
        if count == 1:
            intervals.append((a, b))
            continue
        mid = (a + b) / 2
        stack.append((mid, b))
        stack.append((a, mid))
    return sorted(intervals)


def _radical_real_roots(p: sympy.Poly) -> Optional[List[sympy.Expr]]:
    """
    Real roots in radicals for algebraic coefficients of degree <= 4, or None when some
    root has no I-free closed form.
    """
    if p.degree() > 4:
        return None
    found = sympy.roots(p.as_expr(), *p.gens)
    if sum(found.values()) != p.degree():
        return None
    real = []
    for root in found:
        if abs(sympy.im(sympy.N(root, _ZERO_DIGITS))) > sympy.Float(10) ** (-40):
            continue
        if root.has(sympy.I):
            return None
        real.append(root)
    return sorted(real, key=_to_float)


def _numeric_real_roots(p: sympy.Poly) -> List[sympy.Expr]:
    coeffs = [sympy.N(c, 50) for c in p.all_coeffs()]
    approx = sympy.Poly(coeffs, sympy.Dummy("t"))
    roots = []
    for root in sympy.nroots(approx, n=30, maxsteps=500):
        if abs(sympy.im(root)) < sympy.Float(10) ** (-20):
            value = sympy.re(root)
            if not any(abs(value - r) < sympy.Float(10) ** (-20) for r in roots):
                roots.append(value)
    return sorted(roots)


def _span_reduce(eqs: List[sympy.Expr], symbols: List[sympy.Symbol]) -> List[sympy.Expr]:
    """
    Replace rational equations by an echelon basis of their span, nonlinear monomials
    eliminated first, so hidden linear relations surface.
    """
    polys = []
    for e in eqs:
        p = sympy.Poly(e, *symbols)
        if not (p.domain.is_ZZ or p.domain.is_QQ):
            return eqs
        polys.append(p)
    monoms = sorted({m for p in polys for m in p.monoms()},
                    key=lambda m: (-sum(m), tuple(-e for e in m)))
    column = {m: k for k, m in enumerate(monoms)}
    rows = []
    for p in polys:
        row = [0] * len(monoms)
        for m, c in p.terms():
            row[column[m]] = Fraction(int(c.p), int(c.q))
        rows.append(row)
    ech = echelon_exact(rows, ncols=len(monoms))
    basis = []
    for row in ech.rows[:ech.rank]:
        basis.append(sympy.Add(*[c * sympy.Mul(*[s ** e for s, e in zip(symbols, monoms[k]) if e])
                                 for k, c in enumerate(row) if c]))
    return basis


def _split_deferred(eqs: List[sympy.Expr], aux: Sequence[sympy.Symbol]):
    """Pull out equations c(x) + q(x) z^2 = 0 where aux z occurs nowhere else."""
    deferred = []
    taken = set()
    aux_set = set(aux)
    for z in aux:
        holders = [k for k, e in enumerate(eqs) if e.has(z)]
        if len(holders) != 1 or holders[0] in taken:
            continue
        e = sympy.expand(eqs[holders[0]])
        if (e.free_symbols & aux_set) - {z}:
            continue
        p = sympy.Poly(e, z)
        if p.degree() != 2 or p.coeff_monomial(z) != 0:
            continue
        deferred.append((z, p.coeff_monomial(1), p.coeff_monomial(z ** 2)))
        taken.add(holders[0])
    core = [e for k, e in enumerate(eqs) if k not in taken]
    return core, deferred


class _ExactSolver:
    """Single-use triangular solver over sympy expressions."""

    def __init__(self, system: PolySystem, budget: SolverBudget):
        self.symbols = [sympy.Symbol(v) for v in system.variables]
        self.order = {s: k for k, s in enumerate(self.symbols)}
        self.aux = [s for s in self.symbols if s.name in system.auxiliary]
        self.system = system
        self.max_branches = budget.max_branches
        self.free_cap = budget.exact_free_cap
        self.nodes = 0
        self.inexact = False
        self.results: List[Dict[sympy.Symbol, sympy.Expr]] = []
        self.deferred: List[Tuple[sympy.Symbol, sympy.Expr, sympy.Expr]] = []

    def run(self) -> List[Dict[sympy.Symbol, sympy.Expr]]:
        eqs = [eq.to_sympy(self.symbols) for eq in self.system.equations]
        core, self.deferred = _split_deferred(eqs, self.aux)
        deferred_syms = {z for z, _, _ in self.deferred}
        self.core_symbols = [s for s in self.symbols if s not in deferred_syms]
        self._solve(core, {}, [])
        return self.results

    def _ordered(self, syms) -> List[sympy.Symbol]:
        aux = set(self.aux)
        return sorted(syms, key=lambda s: (s in aux, self.order[s]))

    def _normalize(self, eqs: List[sympy.Expr]) -> Optional[List[sympy.Expr]]:
        out = []
        for e in eqs:
            e = sympy.expand(e)
            if e == 0:
                continue
            if not e.free_symbols:
                if _is_zero(e):
                    continue
                return None
            out.append(e)
        return out

    def _solve(self, eqs, assignment, definitions) -> None:
        self.nodes += 1
        if self.nodes > self.max_branches:
            raise _NeedsNumeric(f"exact search exceeded {self.max_branches} branches")
        eqs = self._normalize(eqs)
        if eqs is None:
            return
        if not eqs:
            self._finish(assignment, definitions)
            return
        free = self._ordered(set().union(*(e.free_symbols for e in eqs)))
        eqs = self._normalize(_span_reduce(eqs, free))
        if eqs is None:
            return
        if not eqs:
            self._finish(assignment, definitions)
            return

        pivot = self._linear_pivot(eqs)
        if pivot is not None:
            idx, s, value = pivot
            rest = [e.subs(s, value) for k, e in enumerate(eqs) if k != idx]
            self._solve(rest, assignment, definitions + [(s, value)])
            return

        univariate = [e for e in eqs if len(e.free_symbols) == 1]
        if univariate:
            e = min(univariate, key=lambda x: sympy.degree(x, next(iter(x.free_symbols))))
            s = next(iter(e.free_symbols))
            for root in self._roots(e, s):
                self._solve([x.subs(s, root) for x in eqs], {**assignment, s: root}, definitions)
            return

        free = self._ordered(set().union(*(e.free_symbols for e in eqs)))
        if len(free) > self.free_cap:
            raise _NeedsNumeric(f"{len(free)} unknowns remain after elimination")
        if len(free) < 2 or len(eqs) < 2:
            raise _PositiveDimensional("solution set is not zero-dimensional")
        x, y = free[0], free[1]
        for e1, e2 in combinations(eqs, 2):
            res = sympy.expand(sympy.resultant(e1, e2, x))
            if res == 0 or res.has(x):
                continue
            if not res.free_symbols:
                if _is_zero(res):
                    continue
                return
            for root in self._roots(res, y):
                self._solve([e.subs(y, root) for e in eqs], {**assignment, y: root}, definitions)
            return
        raise _PositiveDimensional("every resultant vanishes identically")

    def _linear_pivot(self, eqs):
        for idx, e in enumerate(eqs):
            for s in self._ordered(e.free_symbols):
                if sympy.degree(e, s) != 1:
                    continue
                c = e.coeff(s, 1)
                if c.free_symbols or _is_zero(c):
                    continue
                value = sympy.expand(-(e - c * s) / c)
                if value.has(s):
                    continue
                return idx, s, value
        return None

    def _roots(self, e: sympy.Expr, s: sympy.Symbol) -> List[sympy.Expr]:
        p = sympy.Poly(e, s)
        if p.domain.is_ZZ or p.domain.is_QQ:
            roots = list(dict.fromkeys(sympy.real_roots(p)))
            if len(sturm_isolate(p)) != len(roots):
                raise _NeedsNumeric("real-root isolation disagrees with the root list")
        else:
            roots = _radical_real_roots(p)
            if roots is None:
                self.inexact = True
                roots = _numeric_real_roots(p)
        if s in self.aux:
            roots = [r for r in roots if _sign(r) >= 0]
        return roots

    def _finish(self, assignment, definitions) -> None:
        values = dict(assignment)
        for s, expr in reversed(definitions):
            values[s] = sympy.expand(expr.subs(values))
        missing = [s for s in self.core_symbols if s not in values]
        if missing or any(v.free_symbols for v in values.values()):
            raise _PositiveDimensional(f"{', '.join(str(s) for s in missing) or 'some unknowns'} left free")
        for z, c, q in self.deferred:
            cv = sympy.expand(c.subs(values))
            qv = sympy.expand(q.subs(values))
            if _is_zero(qv):
                if _is_zero(cv):
                    raise _PositiveDimensional(f"{z} left free")
                return
            ratio = sympy.simplify(-cv / qv)
            if _sign(ratio) < 0:
                return
            values[z] = sympy.sqrt(ratio)
        self.results.append(values)


def _exact_solve(system: PolySystem, budget: SolverBudget) -> SolveOutcome:
    solver = _ExactSolver(system, budget)
    found = solver.run()
    points = []
    seen = set()
    for values in found:
        key = tuple(round(_to_float(values[s]), 9) for s in solver.symbols)
        if key in seen:
            continue
        seen.add(key)
        floats = {s.name: _to_float(values[s]) for s in solver.symbols}
        residual = max((abs(_to_float(eq.to_sympy(solver.symbols).subs(values))) for eq in system.equations),
                       default=0.0)
        exact = None if solver.inexact else {s.name: values[s] for s in solver.symbols}
        points.append(Solution(values=floats, residual=residual, exact=exact))
    if not points:
        if solver.inexact:
            return NoneFoundIncomplete(starts=0, reason="no real root survived numeric root finding", backend="exact")
        return NoneFoundComplete(reason="exact elimination found no real solution")
    points.sort(key=lambda pt: tuple(round(pt.values[v], 6) for v in system.variables))
    return Solutions(points=tuple(points), backend="exact", complete=not solver.inexact)


# -- numeric backend -------------------------------------------------------------------

def _lambdify(system: PolySystem):
    symbols = [sympy.Symbol(v) for v in system.variables]
    exprs = [eq.to_sympy(symbols) for eq in system.equations]
    F = sympy.Matrix(exprs)
    jacobian = F.jacobian(symbols)
    f = sympy.lambdify([symbols], F, modules="numpy")
    jac = sympy.lambdify([symbols], jacobian, modules="numpy")
    m, k = len(exprs), len(symbols)

    def fun(x: np.ndarray) -> np.ndarray:
        return np.asarray(f(x), dtype=float).reshape(m)

    def jfun(x: np.ndarray) -> np.ndarray:
        return np.asarray(jac(x), dtype=float).reshape(m, k)

    return fun, jfun, symbols, exprs


def _aux_seeders(symbols, exprs, auxiliary) -> List[Tuple[int, Callable, Callable]]:
    aux = [s for s in symbols if s.name in auxiliary]
    _, deferred = _split_deferred(exprs, aux)
    seeders = []
    for z, c, q in deferred:
        seeders.append((symbols.index(z), sympy.lambdify([symbols], c, modules="numpy"),
                        sympy.lambdify([symbols], q, modules="numpy")))
    return seeders


def _newton(fun, jfun, x0: np.ndarray, m: int, budget: SolverBudget) -> Optional[Tuple[np.ndarray, float]]:
    """Damped Gauss-Newton (Levenberg-Marquardt or trust region) plus a few plain Newton polish steps."""
    k = x0.size
    method = "lm" if m >= k else "trf"
    with np.errstate(all="ignore"):
        try:
            res = scipy.optimize.least_squares(fun, x0, jac=jfun, method=method, xtol=1e-12, ftol=1e-12,
                                               gtol=1e-12, max_nfev=budget.max_newton_iter * max(k, 1))
        except (ValueError, np.linalg.LinAlgError, FloatingPointError):
            return None
        x = res.x
        if not np.all(np.isfinite(x)):
            return None
        best_x, best_r = x, float(np.max(np.abs(fun(x)), initial=0.0))
        for _ in range(10):
            r = fun(x)
            if not np.all(np.isfinite(r)) or np.max(np.abs(r), initial=0.0) <= 1e-15:
                break
            try:
                dx = np.linalg.lstsq(jfun(x), -r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            x = x + dx
            if not np.all(np.isfinite(x)):
                break
            now = float(np.max(np.abs(fun(x)), initial=0.0))
            if now < best_r:
                best_x, best_r = x, now
    if not np.isfinite(best_r) or best_r > budget.tolerances.residual:
        return None
    return best_x, best_r


def _numeric_solve(system: PolySystem, budget: SolverBudget) -> SolveOutcome:
    fun, jfun, symbols, exprs = _lambdify(system)
    k = len(symbols)
    m = len(exprs)
    rng = np.random.default_rng(budget.seed)
    starts = [np.full(k, float(g)) for g in budget.newton_grid]
    starts += list(rng.uniform(-budget.random_box, budget.random_box, size=(budget.random_starts, k)))

    seeders = _aux_seeders(symbols, exprs, system.auxiliary)
    if seeders:
        with np.errstate(all="ignore"):
            for x0 in starts:
                for idx, c_fn, q_fn in seeders:
                    c, q = float(c_fn(x0)), float(q_fn(x0))
                    if np.isfinite(c) and np.isfinite(q) and abs(q) > 1e-12 and c != 0:
                        x0[idx] = np.sqrt(abs(c / q))

    with ThreadPoolExecutor(max_workers=max(1, budget.threads)) as pool:
        found = list(pool.map(lambda x0: _newton(fun, jfun, x0, m, budget), starts))

    aux_idx = [i for i, s in enumerate(symbols) if s.name in system.auxiliary]
    unique: List[Tuple[np.ndarray, float]] = []
    for hit in found:
        if hit is None:
            continue
        x, residual = hit
        x = x.copy()
        x[aux_idx] = np.abs(x[aux_idx])
        if any(np.max(np.abs(x - y)) <= budget.tolerances.dedupe for y, _ in unique):
            continue
        unique.append((x, residual))
    if not unique:
        return NoneFoundIncomplete(starts=len(starts),
                                   reason=f"no start out of {len(starts)} converged")
    unique.sort(key=lambda item: tuple(np.round(item[0], 6)))
    points = tuple(Solution(values={s.name: float(v) for s, v in zip(symbols, x)}, residual=r)
                   for x, r in unique)
    return Solutions(points=points, backend="numeric", complete=False)


def solve_system(system: PolySystem, budget: Optional[SolverBudget] = None) -> SolveOutcome:
    """
    Find the real solutions of a polynomial system.

    Rational systems first go to the exact backend; it returns every real solution or
    NoneFoundComplete. Systems it cannot finish (more than ``exact_free_cap`` unknowns
    after elimination, positive-dimensional pieces, branch budget) and float systems go
    to the multistart search, whose results are never complete.

    Raises:
        VariableCapExceededError: more unknowns than ``budget.max_vars``.
    """
    budget = budget or SolverBudget()
    if system.var_count > budget.max_vars:
        raise VariableCapExceededError(
            f"System has {system.var_count} unknowns, cap is {budget.max_vars}")
    if system.var_count == 0:
        if all(eq.is_zero for eq in system.equations):
            return Solutions(points=(Solution(values={}, residual=0.0, exact={}),), backend="exact", complete=True)
        return NoneFoundComplete(reason="a nonzero constant equation")
    if system.is_exact:
        try:
            return _exact_solve(system, budget)
        except _NeedsNumeric:
            pass
    return _numeric_solve(system, budget)


def count_real_roots_bruteforce(system: PolySystem, cells: Optional[int] = None,
                                bound: Optional[float] = None) -> int:
    """
    Count real solutions in the box [-B, B]^k (k <= 2, default B = 10 * max |coefficient|)
    by a bounded local solve from the centre of every grid cell.
    """
    k = system.var_count
    if not 1 <= k <= 2:
        raise DimensionError(f"Brute-force counting supports 1 or 2 unknowns, got {k}")
    bound = bound or 10.0 * max(1.0, system.max_abs_coefficient())
    cells = cells or (256 if k == 1 else 32)
    fun, jfun, _, _ = _lambdify(system)
    edges = np.linspace(-bound, bound, cells + 1)
    roots: List[np.ndarray] = []
    with np.errstate(all="ignore"):
        for cell in product(range(cells), repeat=k):
            lo = np.array([edges[i] for i in cell])
            hi = np.array([edges[i + 1] for i in cell])
            res = scipy.optimize.least_squares(fun, (lo + hi) / 2, jac=jfun, bounds=(lo, hi), method="trf",
                                               xtol=1e-14, ftol=1e-14, gtol=1e-14)
            if np.max(np.abs(fun(res.x)), initial=0.0) > 1e-9:
                continue
            if not any(np.max(np.abs(res.x - r)) <= 1e-6 * bound for r in roots):
                roots.append(res.x)
    return len(roots)


# -- positivity-encoded system for a fixed J ------------------------------------------

def v_names(r: int) -> List[str]:
    """Variable names of svec(V) in row-major lower-triangle order."""
    sep = "" if r < 10 else "_"
    return [f"V{p + 1}{sep}{q + 1}" for p in range(r) for q in range(p + 1)]


def assemble_inner2(A: SymMatrix, J: Sequence[int], lhs: Any, rhs: Sequence[Any],
                    kind: str = P2) -> PolySystem:
    """
    Polynomial system whose real solutions are exactly the V > 0 with the given linear
    constraints and (V^-1)(J,J) matching A off the diagonal.

    Equations: lhs . svec(V) = rhs; A_ij det(V) - adj(V)_ij = 0 for i < j in J;
    det(V[:k,:k]) z_k^2 = 1 for k = 1..r. For P1 also
    A_jj det(V) - adj(V)_jj - y_j^2 det(V) = 0, so d_j = y_j^2 >= 0.
    """
    J = tuple(sorted(J))
    r = len(J)
    length = svec_length(r)
    lhs = np.asarray(lhs, dtype=object)
    if lhs.size == 0:
        lhs = lhs.reshape(0, length)
    if lhs.ndim != 2 or lhs.shape[1] != length:
        raise DimensionError(f"Linear rows must have {length} columns for |J| = {r}, got shape {lhs.shape}")
    if len(rhs) != lhs.shape[0]:
        raise DimensionError(f"{lhs.shape[0]} linear rows but {len(rhs)} right-hand sides")
    if kind not in (P1, P2):
        raise DimensionError(f"Unsupported kind {kind}")

    names = v_names(r)
    z_names = [f"z{k + 1}" for k in range(r)]
    y_names = [f"y{k + 1}" for k in range(r)] if kind == P1 else []
    vs = [sympy.Symbol(v) for v in names]
    zs = [sympy.Symbol(z) for z in z_names]
    ys = [sympy.Symbol(y) for y in y_names]
    V = sympy.Matrix(r, r, lambda p, q: vs[svec_index(p, q)])
    num = lambda value: _sympy_number(value if isinstance(value, float) else to_exact(value))

    eqs = []
    for row, b in zip(lhs, rhs):
        eqs.append(sympy.Add(*[num(c) * v for c, v in zip(row, vs)]) - num(b))
    det_v = sympy.expand(V.det(method="berkowitz"))
    adj = V.adjugate(method="berkowitz")
    for a, b in combinations(range(r), 2):
        eqs.append(num(A[J[a], J[b]]) * det_v - adj[a, b])
    for k in range(r):
        eqs.append(V[:k + 1, :k + 1].det(method="berkowitz") * zs[k] ** 2 - 1)
    for a in range(len(ys)):
        eqs.append(num(A[J[a], J[a]]) * det_v - adj[a, a] - ys[a] ** 2 * det_v)

    variables = tuple(names + z_names + y_names)
    return PolySystem(variables=variables,
                      equations=tuple(Poly.from_sympy(e, variables) for e in eqs),
                      auxiliary=frozenset(z_names + y_names),
                      meta={"J": J, "kind": kind, "v_names": tuple(names)})


def v_from_solution(system: PolySystem, point: Solution, exact: bool = True) -> SymMatrix:
    """Rebuild V from a solution, exactly when every svec entry is rational."""
    names = system.meta["v_names"]
    if exact:
        values = [point.rational(v) for v in names]
        if all(v is not None for v in values):
            return smat(values, EXACT)
    return smat([float(point.values[v]) for v in names], FLOAT)


def algorithm2(A: SymMatrix, J: Sequence[int], lhs: Any, rhs: Sequence[Any],
               budget: Optional[SolverBudget] = None, kind: str = P2) -> Alg1Outcome:
    """
    Polynomial phase for a fixed J.

    Solutions are tried in their deterministic order and the first V that passes the
    positivity and inverse-match checks gives d. No solution from the exact backend is
    a certificate; an empty numeric search is reported as incomplete.
    """
    budget = budget or SolverBudget()
    J = tuple(sorted(J))
    system = assemble_inner2(A, J, lhs, rhs, kind)
    outcome = solve_system(system, budget)
    label = [j + 1 for j in J]
    if isinstance(outcome, NoneFoundComplete):
        return InfeasibleForJ(J, f"the positivity-encoded system for J={label} has no real solution")
    if isinstance(outcome, NoneFoundIncomplete):
        return RejectedForJ(J, f"search incomplete: {outcome.reason}", complete=False)
    violated = set()
    for point in outcome.points:
        V = v_from_solution(system, point, exact=A.is_exact)
        try:
            result = check_candidate(A, J, V, kind, budget.tolerances.psd)
        except SingularMatrixError:
            continue
        if isinstance(result, Solved):
            return result
        violated.update(result.violated)
    reason = "every real solution fails the positivity or sign checks"
    if not outcome.complete:
        reason = f"search incomplete: {reason}"
    return RejectedForJ(J, reason, complete=outcome.complete, violated=tuple(sorted(violated)))
