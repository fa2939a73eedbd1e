"""
Tests for the characterization system and the linear phase
"""

from fractions import Fraction

import numpy as np
import pytest

from charsys import (P1, P2, InfeasibleForJ, RejectedForJ, Solved, Underdetermined, algorithm1,
                     assemble_linear_system, factor_from_v, recover_d)
from errors import DimensionError, InstanceError
from symcore import (FLOAT, SymMatrix, inverse, numeric_rank, psd_check, svec, sym_kron_row)

EXAMPLE1 = [[0, 1, 2, 1, 0],
            [1, 0, 2, 0, 1],
            [2, 2, 0, 0, 0],
            [1, 0, 0, 0, 1],
            [0, 1, 0, 1, 0]]

# U_J = I and the three pair equations outside J have a unique solution V = I
GRAM_U = [[1, 0], [0, 1], [1, 1], [1, 2], [2, 1]]


def p2_from_factor(U):
    U = np.array(U, dtype=object)
    G = U.dot(U.T)
    n = G.shape[0]
    A = [[0 if i == j else G[i, j] for j in range(n)] for i in range(n)]
    return SymMatrix.from_dense(A), [G[i, i] for i in range(n)]


class TestAssembleLinearSystem:
    """Test assembly of the pair equations"""

    def test_example_underdetermined_family(self):
        """Test the 5x5 example with J={1,2,3} is satisfied by the alpha=beta=2 member"""
        A = SymMatrix.from_dense(EXAMPLE1)
        system = assemble_linear_system(A, [0, 1, 2])
        assert system.is_underdetermined
        assert system.rank == 1
        assert system.pairs == ((3, 4),)
        V = SymMatrix.from_dense([[2, 1, -2], [1, 2, -2], [-2, -2, 3]])
        W = inverse(V)
        assert W == SymMatrix.from_dense([[2, 1, 2], [1, 2, 2], [2, 2, 3]])
        row = system.linear_lhs[0]
        assert sum(c * v for c, v in zip(row, svec(V))) == system.linear_rhs[0]

    def test_no_pairs_outside_j(self):
        """Test [[0,1],[1,0]] with J={1} has no equations in one unknown"""
        A = SymMatrix.from_dense([[0, 1], [1, 0]])
        system = assemble_linear_system(A, [0])
        assert system.linear_lhs.shape == (0, 1)
        assert system.is_underdetermined

    def test_rows_reduced_to_basis(self):
        """Test dependent pair equations are dropped"""
        # every pair outside J gives V11 = 1
        A = SymMatrix.from_dense([[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]])
        system = assemble_linear_system(A, [0])
        assert system.rank == 1
        assert system.solution == [1]

    def test_p1_records_diagonal_maps(self):
        """Test the P1 variant records d_i(V) for indices outside J"""
        A = SymMatrix.from_dense([[1, 1, 1], [1, 1, 1], [1, 1, 1]])
        system = assemble_linear_system(A, [0], kind=P1)
        assert set(system.diag_affine) == {1, 2}
        row, const = system.diag_affine[1]
        assert row == sym_kron_row([1], [1])
        assert const == 1

    def test_float_mode_reduction(self):
        """Test the QR path finds the same rank in float mode"""
        A = SymMatrix.from_dense(EXAMPLE1, mode=FLOAT)
        system = assemble_linear_system(A, [0, 1, 2])
        assert system.rank == 1

    def test_invalid_index_sets(self):
        """Test empty, full and out-of-range J are rejected"""
        A = SymMatrix.from_dense(EXAMPLE1)
        with pytest.raises(DimensionError):
            assemble_linear_system(A, [])
        with pytest.raises(DimensionError):
            assemble_linear_system(A, [0, 1, 2, 3, 4])
        with pytest.raises(DimensionError):
            assemble_linear_system(A, [7])

    def test_p2_needs_zero_diagonal(self):
        """Test a P2 system rejects a nonzero diagonal"""
        A = SymMatrix.from_dense([[1, 1], [1, 0]])
        with pytest.raises(InstanceError):
            assemble_linear_system(A, [0], kind=P2)


class TestAlgorithm1:
    """Test the linear phase outcomes"""

    def test_example_underdetermined(self):
        """Test the 5x5 example with J={1,2,3} needs the polynomial phase"""
        outcome = algorithm1(SymMatrix.from_dense(EXAMPLE1), [0, 1, 2])
        assert isinstance(outcome, Underdetermined)
        assert outcome.linear_lhs.shape == (1, 6)

    def test_all_ones_rank_one(self):
        """Test off-diagonal ones with J={1} solve to d = [1,1,1]"""
        A = SymMatrix.from_dense([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        outcome = algorithm1(A, [0])
        assert isinstance(outcome, Solved)
        assert outcome.d == [1, 1, 1]
        assert A.add_diagonal(outcome.d) == SymMatrix.from_dense([[1] * 3] * 3)

    def test_gram_instance_recovers_diagonal(self):
        """Test a rank-2 Gram instance recovers its generating diagonal"""
        A, d_true = p2_from_factor(GRAM_U)
        outcome = algorithm1(A, [0, 1])
        assert isinstance(outcome, Solved)
        assert outcome.V == SymMatrix.identity(2)
        assert outcome.d == d_true
        U = factor_from_v(A, [0, 1], outcome.V)
        assert np.allclose(U @ U.T, A.add_diagonal(outcome.d).to_float().array)

    def test_random_float_gram(self):
        """Test a random float rank-2 instance solves with the generating diagonal"""
        rng = np.random.default_rng(4)
        U = rng.standard_normal((6, 2))
        G = U @ U.T
        A = SymMatrix.from_dense(G - np.diag(np.diag(G)), mode=FLOAT)
        outcome = algorithm1(A, [0, 1])
        assert isinstance(outcome, Solved)
        assert np.allclose(outcome.d, np.diag(G), atol=1e-8)

    def test_inconsistent_pairs(self):
        """Test contradictory pair equations give an infeasibility certificate"""
        A = SymMatrix.from_dense([[0, 1, 1, 1], [1, 0, 1, 2], [1, 1, 0, 1], [1, 2, 1, 0]])
        outcome = algorithm1(A, [0])
        assert isinstance(outcome, InfeasibleForJ)
        assert outcome.complete
        assert "pair" in outcome.certificate

    def test_unique_v_not_positive(self):
        """Test a unique but negative V is rejected"""
        A = SymMatrix.from_dense([[0, 1, 1], [1, 0, -1], [1, -1, 0]])
        outcome = algorithm1(A, [0])
        assert isinstance(outcome, RejectedForJ)
        assert outcome.complete

    def test_p1_zero_diagonal_completion(self):
        """Test P1 on all-ones with J={1} gives d = 0"""
        A = SymMatrix.from_dense([[1, 1, 1], [1, 1, 1], [1, 1, 1]])
        outcome = algorithm1(A, [0], kind=P1)
        assert isinstance(outcome, Solved)
        assert outcome.d == [0, 0, 0]

    def test_p1_negative_diagonal_rejected(self):
        """Test P1 rejects a candidate with a negative d entry"""
        A = SymMatrix.from_dense([[1, 1, 1], [1, 0, 1], [1, 1, 1]])
        outcome = algorithm1(A, [0], kind=P1)
        assert isinstance(outcome, RejectedForJ)
        assert "nonnegativity" in outcome.reason

    def test_round_trip_on_random_factors(self):
        """Test every Gram instance either solves feasibly or keeps the true V in its solution set"""
        rng = np.random.default_rng(8)
        tried = 0
        while tried < 15:
            U = rng.integers(-3, 4, size=(5, 2))
            if U[0, 0] * U[1, 1] - U[0, 1] * U[1, 0] == 0:
                continue
            tried += 1
            A, _ = p2_from_factor(U.tolist())
            outcome = algorithm1(A, [0, 1])
            if isinstance(outcome, Solved):
                M = A.add_diagonal(outcome.d)
                assert psd_check(M, tol=0).psd
                assert numeric_rank(M).rank == 2
            else:
                assert isinstance(outcome, Underdetermined)
                UJ = U[:2].astype(object)
                V_true = inverse(SymMatrix.from_dense(UJ.dot(UJ.T).tolist()))
                for row, b in zip(outcome.linear_lhs, outcome.linear_rhs):
                    assert sum(c * v for c, v in zip(row, svec(V_true))) == b


class TestRecoverD:
    """Test diagonal recovery"""

    def test_identity_v_zero_matrix(self):
        """Test V = I, A = 0 gives diag(V^-1) on J and 0 elsewhere"""
        A = SymMatrix.zeros(3)
        assert recover_d(A, [0, 1], SymMatrix.identity(2)) == [1, 1, 0]

    def test_fractional_v(self):
        """Test recovery stays exact with rational V"""
        A = SymMatrix.from_dense([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        d = recover_d(A, [0], SymMatrix.from_dense([[Fraction(1, 2)]]))
        assert d == [2, Fraction(1, 2), Fraction(1, 2)]

    def test_dimension_mismatch(self):
        """Test V must match |J|"""
        with pytest.raises(DimensionError):
            recover_d(SymMatrix.zeros(3), [0, 1], SymMatrix.identity(3))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
