"""
Tests for polynomial systems and the two solver backends
"""

from fractions import Fraction

import numpy as np
import pytest
import sympy

from charsys import P1, Solved, algorithm1
from errors import DimensionError, FormatError, VariableCapExceededError
from polysolve import (NoneFoundComplete, NoneFoundIncomplete, Poly, PolySystem, Solutions, algorithm2,
                       assemble_inner2, count_real_roots_bruteforce, solve_system, sturm_isolate, v_from_solution)
from settings import SolverBudget
from symcore import SymMatrix, inverse, numeric_rank, psd_check

EXAMPLE1 = [[0, 1, 2, 1, 0],
            [1, 0, 2, 0, 1],
            [2, 2, 0, 0, 0],
            [1, 0, 0, 0, 1],
            [0, 1, 0, 1, 0]]

EXAMPLE1_6 = [[0, 1, 2, 1, 0, 1],
              [1, 0, 2, 0, 1, 1],
              [2, 2, 0, 0, 0, -1],
              [1, 0, 0, 0, 1, 5],
              [0, 1, 0, 1, 0, 5],
              [1, 1, -1, 5, 5, 0]]


def inner_system(rows, J):
    A = SymMatrix.from_dense(rows)
    outcome = algorithm1(A, J)
    return A, outcome, assemble_inner2(A, J, outcome.linear_lhs, outcome.linear_rhs)


class TestPoly:
    """Test polynomial parsing and formatting"""

    def test_parse_equation(self):
        """Test lhs = rhs parsing with caret exponents"""
        p = Poly.parse("x^2 = 4", ["x"])
        assert p.terms == (((2,), 1), ((0,), -4))
        assert p.degree() == 2
        assert not p.is_linear()

    def test_format_rationals(self):
        """Test formatting writes rational coefficients that parse back"""
        p = Poly.parse("1/2*x1^2 - x1*x2 + 3", ["x1", "x2"])
        assert p.format() == "1/2*x1^2 - x1*x2 + 3"
        assert Poly.parse(p.format(), ["x1", "x2"]) == p

    def test_decimal_input_is_rational(self):
        """Test decimal literals are read as exact rationals"""
        p = Poly.parse("0.25*x - 1", ["x"])
        assert p.terms[0][1] == Fraction(1, 4)
        assert p.is_exact

    def test_rejects_non_polynomial(self):
        """Test negative powers and functions are rejected"""
        with pytest.raises(FormatError):
            Poly.parse("1/x", ["x"])
        with pytest.raises(FormatError):
            Poly.parse("sin(x)", ["x"])
        with pytest.raises(FormatError):
            Poly.parse("x + y", ["x"])

    def test_evaluate(self):
        """Test evaluation by name and by position"""
        p = Poly.parse("x*y - 2*y^2", ["x", "y"])
        assert p.evaluate({"x": 3, "y": 1}) == 1
        assert p.evaluate([Fraction(1, 2), 1]) == Fraction(-3, 2)


class TestPolySystemText:
    """Test the text format"""

    def test_header_fixes_variable_order(self):
        """Test the variables header controls the order"""
        system = PolySystem.from_text("# variables: y x\n# auxiliary: y\nx - y^2\nx^2 = 4\n")
        assert system.variables == ("y", "x")
        assert system.auxiliary == frozenset({"y"})
        assert system.linear_flags == [False, False]

    def test_natural_order_without_header(self):
        """Test identifiers sort naturally when no header is given"""
        system = PolySystem.from_text("x10 - x2\nx2 = 1\n")
        assert system.variables == ("x2", "x10")

    def test_text_round_trip(self):
        """Test writing and reading keeps the equations"""
        system = PolySystem.from_text("x1 = 2\nx2 = x1^2\nx3 = x2^2\n")
        again = PolySystem.from_text(system.to_text())
        assert again.equations == system.equations
        assert again.linear_flags == [True, False, False]

    def test_empty_text_rejected(self):
        """Test a file with no equations is rejected"""
        with pytest.raises(FormatError):
            PolySystem.from_text("# nothing here\n")


class TestSolveSystem:
    """Test the exact and numeric backends"""

    def test_square_root_pair(self):
        """Test x^2 = 4 has the two exact solutions -2 and 2"""
        outcome = solve_system(PolySystem.from_text("x^2 = 4"))
        assert isinstance(outcome, Solutions)
        assert outcome.backend == "exact"
        assert outcome.complete
        assert [pt.rational("x") for pt in outcome.points] == [-2, 2]

    def test_chain_system(self):
        """Test the squaring chain has the unique solution (2, 4, 16)"""
        outcome = solve_system(PolySystem.from_text("x1 = 2\nx2 = x1^2\nx3 = x2^2\n"))
        assert isinstance(outcome, Solutions)
        assert len(outcome.points) == 1
        point = outcome.points[0]
        assert [point.rational(v) for v in ("x1", "x2", "x3")] == [2, 4, 16]
        assert point.residual == 0.0

    def test_no_real_solution_is_complete(self):
        """Test x^2 + 1 = 0 yields a complete negative answer"""
        outcome = solve_system(PolySystem.from_text("x^2 + 1"))
        assert isinstance(outcome, NoneFoundComplete)

    def test_numeric_roots_without_real_root_are_incomplete(self):
        """Test a sextic over sqrt(2) with no real root is not reported as proven empty"""
        outcome = solve_system(PolySystem.from_text("x^2 = 2\ny^6 + x*y^2 + 3 = 0\n"))
        assert isinstance(outcome, NoneFoundIncomplete)
        assert outcome.backend == "exact"

    def test_auxiliary_keeps_nonnegative_branch(self):
        """Test an auxiliary square root only admits x >= 0"""
        system = PolySystem.from_text("# variables: x z\n# auxiliary: z\nx - z^2\nx^2 - 4\n")
        outcome = solve_system(system)
        assert isinstance(outcome, Solutions)
        assert len(outcome.points) == 1
        point = outcome.points[0]
        assert point.rational("x") == 2
        assert point.rational("z") is None
        assert point.exact["z"] == sympy.sqrt(2)

    def test_two_unknowns_by_resultant(self):
        """Test a circle meeting a parabola is solved exactly"""
        outcome = solve_system(PolySystem.from_text("x^2 + y^2 = 5\ny = x^2 - 1\n"))
        assert isinstance(outcome, Solutions)
        assert outcome.complete
        assert len(outcome.points) == 2
        assert outcome.points[0].values["x"] < 0 < outcome.points[1].values["x"]
        for pt in outcome.points:
            assert abs(pt.values["x"] ** 2 + pt.values["y"] ** 2 - 5) < 1e-9
            assert abs(pt.values["y"] - pt.values["x"] ** 2 + 1) < 1e-9

    def test_many_unknowns_fall_back_to_search(self):
        """Test three coupled unknowns use the incomplete multistart search"""
        outcome = solve_system(PolySystem.from_text("x*y = 1\ny*z = 1\nx*z = 1\n"))
        assert isinstance(outcome, Solutions)
        assert outcome.backend == "numeric"
        assert not outcome.complete
        rounded = [tuple(round(pt.values[v], 6) for v in ("x", "y", "z")) for pt in outcome.points]
        assert rounded == [(-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)]
        assert all(pt.residual <= 1e-8 for pt in outcome.points)

    def test_float_coefficients_use_search(self):
        """Test a float system is solved numerically"""
        system = PolySystem(("x",), (Poly.from_terms(("x",), {(2,): 0.5, (0,): -2.0}),))
        outcome = solve_system(system)
        assert outcome.backend == "numeric"
        assert sorted(round(pt.values["x"], 6) for pt in outcome.points) == [-2.0, 2.0]

    def test_variable_cap(self):
        """Test systems above the unknown cap are refused"""
        names = " + ".join(f"x{k}" for k in range(13))
        with pytest.raises(VariableCapExceededError):
            solve_system(PolySystem.from_text(f"{names} = 1"), SolverBudget(max_vars=12))


class TestRootCounting:
    """Test root isolation against brute-force counting"""

    def test_sturm_isolation(self):
        """Test Sturm bisection isolates each distinct real root"""
        x = sympy.Symbol("x")
        intervals = sturm_isolate(sympy.Poly((x ** 2 - 2) * (x - 3) ** 2, x))
        assert len(intervals) == 3
        for (a, b), root in zip(intervals, (-2 ** 0.5, 2 ** 0.5, 3.0)):
            assert float(a) < root <= float(b)

    def test_bruteforce_matches_exact_univariate(self):
        """Test both counts agree on x^2 = 4"""
        system = PolySystem.from_text("x^2 = 4")
        assert count_real_roots_bruteforce(system) == len(solve_system(system).points) == 2

    def test_bruteforce_matches_exact_bivariate(self):
        """Test both counts agree on a circle and a line"""
        system = PolySystem.from_text("x^2 + y^2 = 5\nx = y - 1\n")
        exact = solve_system(system)
        assert exact.complete
        assert count_real_roots_bruteforce(system) == len(exact.points) == 2

    def test_bruteforce_needs_small_systems(self):
        """Test the brute-force counter refuses three unknowns"""
        with pytest.raises(DimensionError):
            count_real_roots_bruteforce(PolySystem.from_text("x + y + z"))


class TestAssembleInner2:
    """Test assembly of the positivity-encoded system"""

    def test_rank_one_structure(self):
        """Test r = 1 gives V11 z1^2 = 1 and no adjugate equations"""
        A = SymMatrix.from_dense([[0, 1], [1, 0]])
        outcome = algorithm1(A, [0])
        system = assemble_inner2(A, [0], outcome.linear_lhs, outcome.linear_rhs)
        assert system.variables == ("V11", "z1")
        assert len(system.equations) == 1
        assert system.equations[0] == Poly.parse("V11*z1^2 - 1", ["V11", "z1"])

    def test_example_unknowns(self):
        """Test the 5x5 example with J={1,2,3} has six V entries and three z"""
        _, _, system = inner_system(EXAMPLE1, [0, 1, 2])
        assert system.variables == ("V11", "V21", "V22", "V31", "V32", "V33", "z1", "z2", "z3")
        assert len(system.equations) == 1 + 3 + 3
        assert system.linear_flags[0]
        assert system.auxiliary == frozenset({"z1", "z2", "z3"})

    def test_p1_adds_square_unknowns(self):
        """Test the P1 variant adds one y per index in J"""
        A = SymMatrix.from_dense([[2, 1], [1, 2]])
        system = assemble_inner2(A, [0], np.zeros((0, 1), dtype=object), [], kind=P1)
        assert system.variables == ("V11", "z1", "y1")
        assert "y1" in system.auxiliary

    def test_dimension_mismatch(self):
        """Test linear rows must match svec(V)"""
        A = SymMatrix.from_dense(EXAMPLE1)
        with pytest.raises(DimensionError):
            assemble_inner2(A, [0, 1, 2], [[1, 0, 0]], [1])


class TestAlgorithm2:
    """Test the polynomial phase on the worked examples"""

    def test_six_by_six_has_two_solutions(self):
        """Test the 6x6 variant admits exactly alpha = beta in {2, 4}"""
        _, _, system = inner_system(EXAMPLE1_6, [0, 1, 2])
        outcome = solve_system(system)
        assert isinstance(outcome, Solutions)
        alphas = []
        for point in outcome.points:
            W = inverse(v_from_solution(system, point))
            assert abs(float(W[0, 0]) - float(W[1, 1])) < 1e-6
            alphas.append(round(float(W[0, 0]), 6))
        assert sorted(alphas) == [2.0, 4.0]

    def test_six_by_six_algorithm2(self):
        """Test the 6x6 variant solves to a rank-3 completion"""
        A, outcome, _ = inner_system(EXAMPLE1_6, [0, 1, 2])
        result = algorithm2(A, [0, 1, 2], outcome.linear_lhs, outcome.linear_rhs)
        assert isinstance(result, Solved)
        W = inverse(result.V)
        assert round(float(W[0, 0]), 6) in (2.0, 4.0)
        M = A.add_diagonal(result.d)
        assert psd_check(M.to_float(), tol=1e-9).psd
        assert numeric_rank(M.to_float(), tol=1e-9).rank == 3

    def test_example_family_member(self):
        """Test the 5x5 example with J={1,2,3} yields a member of the family"""
        A, outcome, _ = inner_system(EXAMPLE1, [0, 1, 2])
        result = algorithm2(A, [0, 1, 2], outcome.linear_lhs, outcome.linear_rhs)
        assert isinstance(result, Solved)
        W = inverse(result.V.to_float())
        alpha, beta, gamma = W[0, 0], W[1, 1], W[2, 2]
        assert alpha > 0 and alpha * beta > max(1.0, alpha + beta - 1)
        assert abs(gamma - 4 * (alpha + beta - 1) / (alpha * beta)) < 1e-6
        M = A.to_float().add_diagonal([float(x) for x in result.d])
        assert numeric_rank(M, tol=1e-9).rank == 3

    def test_p1_single_index(self):
        """Test the P1 variant threads d_J through the square unknowns"""
        A = SymMatrix.from_dense([[2, 1], [1, 2]])
        result = algorithm2(A, [0], np.zeros((0, 1), dtype=object), [], kind=P1)
        assert isinstance(result, Solved)
        assert all(float(x) >= -1e-9 for x in result.d)
        M = A.to_float().add_diagonal([float(x) for x in result.d], sign=-1)
        assert psd_check(M, tol=1e-9).psd
        assert numeric_rank(M, tol=1e-9).rank == 1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
