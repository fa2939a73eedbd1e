"""
Tests for the instance compilers and their witness maps
"""

from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from charsys import P1, P2, P3
from decompose import Decomposition, Instance, verify
from errors import EpsOutOfRangeError, FormatError, InstanceError, SMallTooSmallError, WitnessError
from reductions import (PartialMatrix, appendix_delta, appendix_eps_bound, appendix_p2tilde_instance, build_Bbar,
                        build_H, build_p1_instance, build_p2_instance, build_p3_instance, chain_solution,
                        chain_system, check_coloring, extend_coloring_to_supergraph, lift_robust_coloring,
                        make_graph, nonedges, peeters_supergraph, reduce_p3_to_p2, robustify, shitov_sigma,
                        validate_appendix)
from symcore import EXACT, FLOAT, SymMatrix, numeric_rank

PATH3 = make_graph(3, [(0, 1), (1, 2)])
TRIANGLE = make_graph(3, [(0, 1), (1, 2), (0, 2)])
K4 = nx.complete_graph(4)

# Rank-2 Gram matrix with free pairs (1, 2) and (3, 4)
PLANTED_U = [[1, 0], [1, 1], [0, 1], [2, -1]]
PLANTED_PATTERN = {(0, 2), (0, 3), (1, 2), (1, 3)}


def gram(U):
    U = np.array(U, dtype=object)
    return U @ U.T


def planted_p3(U, pattern):
    M = gram(U)
    n = M.shape[0]
    A = np.zeros((n, n), dtype=object)
    for i, j in pattern:
        A[i, j] = A[j, i] = M[i, j]
    L = M - A
    inst = Instance(kind=P3, A=SymMatrix.from_dense(A.tolist()), r=len(U[0]), pattern=frozenset(pattern))
    return inst, SymMatrix.from_dense(L.tolist())


class TestGraphs:
    """Test graph helpers and gadgets"""

    def test_make_graph_rejects_loop(self):
        """Test a self-loop is a format error"""
        with pytest.raises(FormatError, match="self-loop"):
            make_graph(2, [(1, 1)])

    def test_make_graph_rejects_out_of_range(self):
        """Test edges must stay inside the vertex range"""
        with pytest.raises(FormatError, match="outside"):
            make_graph(2, [(0, 2)])

    def test_nonedges(self):
        """Test nonedges of the path on three vertices"""
        assert nonedges(PATH3) == [(0, 2)]

    def test_check_coloring_rejects_monochromatic_edge(self):
        """Test an improper coloring is a witness error"""
        with pytest.raises(WitnessError, match="monochromatic"):
            check_coloring(PATH3, [0, 0, 1])

    def test_check_coloring_rejects_bad_color(self):
        """Test colors outside 0..2"""
        with pytest.raises(WitnessError):
            check_coloring(PATH3, [0, 3, 1])

    def test_peeters_supergraph_size(self):
        """Test four new vertices and nine new edges per vertex pair"""
        H = peeters_supergraph(TRIANGLE)
        assert H.number_of_nodes() == 3 + 4 * 3
        assert H.number_of_edges() == 3 + 9 * 3
        assert set(H.graph["gadgets"]) == {(0, 1), (0, 2), (1, 2)}

    def test_extend_coloring_is_proper(self):
        """Test a base coloring extends to every gadget"""
        H = peeters_supergraph(PATH3)
        full = extend_coloring_to_supergraph(H, [0, 1, 0])
        assert check_coloring(H, full) == full
        assert [full[v] for v in range(3)] == [0, 1, 0]

    def test_robustify_sizes(self):
        """Test each vertex becomes a complete 3-partite graph with parts of size c + 1"""
        H = robustify(PATH3, 1)
        assert H.number_of_nodes() == 3 * 3 * 2
        assert H.number_of_edges() == 3 * 12 + 2 * 4
        assert H.graph["exposed"][1] == [6, 7]

    def test_robustify_negative(self):
        """Test a negative robustness parameter"""
        with pytest.raises(ValueError):
            robustify(PATH3, -1)

    def test_lift_robust_coloring(self):
        """Test the lifted coloring is proper"""
        H = robustify(PATH3, 2)
        col = lift_robust_coloring(PATH3, [0, 1, 2], 2)
        assert check_coloring(H, col) == col


class TestP3Construction:
    """Test the (P3) instance of a graph"""

    def test_triangle_without_gadgets(self):
        """Test sizes and a verified witness for the triangle"""
        compiled = build_p3_instance(TRIANGLE, peeters=False)
        inst = compiled.instance
        assert inst.kind == P3 and inst.n == 9 and inst.r == 3
        assert compiled.params["pattern_size"] == 9 + 27
        report = verify(inst, compiled.witness.forward([0, 1, 2]))
        assert report.passed
        assert report.rank == 3

    def test_path_with_gadgets(self):
        """Test a witness through the Peeters stage"""
        compiled = build_p3_instance(PATH3)
        assert compiled.instance.n == 3 * 15
        assert verify(compiled.instance, compiled.witness.forward([0, 1, 2])).passed

    def test_not_three_colorable(self):
        """Test K4 has no coloring to feed forward"""
        compiled = build_p3_instance(K4, peeters=False)
        with pytest.raises(WitnessError):
            compiled.witness.forward([0, 1, 2, 0])

    def test_unknown_mode(self):
        """Test the mode is validated"""
        with pytest.raises(FormatError):
            build_p3_instance(PATH3, mode="symbolic")


class TestP1P2:
    """Test the incidence constructions"""

    @pytest.mark.parametrize("builder,kind", [(build_p1_instance, P1), (build_p2_instance, P2)])
    def test_path_exact(self, builder, kind):
        """Test the raw path instance at rank m + 3 with an exact witness"""
        compiled = builder(PATH3, peeters=False)
        inst = compiled.instance
        assert inst.kind == kind
        assert compiled.params["m"] == 9
        assert inst.n == 18 and inst.r == 12
        for coloring in ([0, 1, 0], [0, 1, 2]):
            report = verify(inst, compiled.witness.forward(coloring))
            assert report.passed, report.messages
            assert report.exact
            assert report.rank <= 12

    def test_p1_shift_and_sign(self):
        """Test the shift is 2 * max degree + 1 and the witness is nonnegative"""
        compiled = build_p1_instance(PATH3, peeters=False)
        assert compiled.params["k"] == 2 * 3 + 1
        dec = compiled.witness.forward([0, 1, 2])
        assert all(x >= 0 for x in dec.d)
        assert dec.d[0] == Fraction(13, 2)
        assert dec.d[9:12] == [0, 0, 0]

    def test_p2_witness_values(self):
        """Test incidence entries 1 and 1/2"""
        compiled = build_p2_instance(PATH3, peeters=False)
        assert set(compiled.witness.forward([0, 1, 0]).d[:9]) == {1}
        assert set(compiled.witness.forward([0, 1, 2]).d[:9]) == {Fraction(1, 2)}

    def test_triangle_sizes_with_gadgets(self):
        """Test the K3 supergraph instance sizes"""
        compiled = build_p1_instance(TRIANGLE, mode=FLOAT)
        assert compiled.params["vertices"] == 15
        assert compiled.instance.n == 720
        assert compiled.instance.r == 678
        assert compiled.instance.A.mode == FLOAT

    @pytest.mark.slow
    def test_triangle_with_gadgets_verifies(self):
        """Test the K3 supergraph witness in float mode"""
        compiled = build_p1_instance(TRIANGLE, mode=FLOAT)
        report = verify(compiled.instance, compiled.witness.forward([0, 1, 2]), equilibrate_first=True)
        assert report.passed, report.messages


class TestReduceP3ToP2:
    """Test the (P3) to (P2) compiler and both witness directions"""

    def test_no_free_pairs(self):
        """Test an instance with no free pairs keeps its size and rank"""
        inst = build_p3_instance(TRIANGLE, peeters=False).instance
        compiled = reduce_p3_to_p2(inst)
        assert compiled.params["m"] == 0
        assert compiled.instance.n == 9
        assert compiled.instance.r == 3

    def test_planted_forward(self):
        """Test the forward witness of a planted rank-2 fill"""
        inst, L = planted_p3(PLANTED_U, PLANTED_PATTERN)
        compiled = reduce_p3_to_p2(inst)
        target = compiled.instance
        assert target.kind == P2 and target.n == 8 and target.r == 6
        dec = compiled.witness.forward(Decomposition(L=L))
        assert dec.d == [1, Fraction(1, 3), Fraction(1, 2), Fraction(1, 2), 4, 5, 6, 10]
        report = verify(target, dec)
        assert report.passed, report.messages
        assert report.rank == 6

    def test_planted_backward(self):
        """Test the backward witness recovers the fill"""
        inst, L = planted_p3(PLANTED_U, PLANTED_PATTERN)
        compiled = reduce_p3_to_p2(inst)
        back = compiled.witness.backward(compiled.witness.forward(Decomposition(L=L)))
        assert back.L == L
        assert verify(inst, back).passed

    @pytest.mark.parametrize("seed", range(20))
    def test_seeded_round_trip(self, seed):
        """Test forward then backward on random planted fills"""
        rng = np.random.default_rng(seed)
        n = 5
        U = [[int(x) for x in row] for row in rng.integers(-3, 4, size=(n, 2))]
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        keep = rng.random(len(pairs)) < 0.6
        pattern = {p for p, k in zip(pairs, keep) if k}
        inst, L = planted_p3(U, pattern)
        compiled = reduce_p3_to_p2(inst)
        dec = compiled.witness.forward(Decomposition(L=L))
        assert verify(compiled.instance, dec).passed
        assert compiled.witness.backward(dec).L == L

    def test_forward_rejects_pattern_leak(self):
        """Test a fill that is nonzero on the fixed pattern"""
        inst, L = planted_p3(PLANTED_U, PLANTED_PATTERN)
        bad = L + SymMatrix.from_dense([[0, 0, 1, 0], [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]])
        with pytest.raises(WitnessError, match="fixed pattern"):
            reduce_p3_to_p2(inst).witness.forward(Decomposition(L=bad))

    def test_backward_rejects_nonpositive(self):
        """Test the incidence part of the diagonal must be positive"""
        inst, _ = planted_p3(PLANTED_U, PLANTED_PATTERN)
        with pytest.raises(WitnessError, match="positive"):
            reduce_p3_to_p2(inst).witness.backward(Decomposition(d=[0, 1, 1, 1, 1, 1, 1, 1]))

    def test_needs_p3(self):
        """Test other kinds are rejected"""
        with pytest.raises(InstanceError):
            reduce_p3_to_p2(Instance(kind=P2, A=SymMatrix.zeros(2), r=1))


class TestShitov:
    """Test the polynomial compiler"""

    @pytest.mark.parametrize("n,sigma,H", [(1, 9, 386), (2, 15, 1178)])
    def test_counts(self, n, sigma, H):
        """Test sizes of sigma and of the triple set for the chain"""
        system = chain_system(n)
        assert len(shitov_sigma(system)) == sigma
        assert len(build_H(system)) == H
        compiled = build_Bbar(system)
        assert compiled.params["size"] == H + 6
        assert compiled.r == 3

    def test_single_equation_completion(self):
        """Test the completion at x1 = 2 matches and has rank 3"""
        compiled = build_Bbar(chain_system(1))
        M = compiled.completion([2])
        assert M.is_exact
        assert compiled.partial.agrees(M)
        assert numeric_rank(M.to_float()).rank == 3

    def test_diagonal_is_unspecified(self):
        """Test every diagonal entry is free"""
        partial = build_Bbar(chain_system(1)).partial
        assert not partial.mask.diagonal().any()
        assert partial.to_instance(3).kind == P3

    def test_identity_copies(self):
        """Test the pattern between the extra identity columns"""
        compiled = build_Bbar(chain_system(1))
        partial, anchor = compiled.partial, compiled.table.anchor
        assert anchor == [386, 388, 390]
        assert partial.mask[386, 387] and partial.values[386, 387] == 1
        assert partial.mask[386, 388] and partial.values[386, 388] == 0

    def test_forward_backward(self):
        """Test the backward witness decodes x1 = 2"""
        compiled = build_Bbar(chain_system(1))
        dec = compiled.witness.forward([2])
        xi = compiled.witness.backward(Decomposition(L=dec.L.to_float()))
        assert xi == pytest.approx((2.0,), abs=1e-6)

    def test_forward_rejects_non_solution(self):
        """Test a point that misses the equations"""
        with pytest.raises(WitnessError, match="does not solve"):
            build_Bbar(chain_system(1)).witness.forward([3])

    def test_forward_wrong_arity(self):
        """Test the number of values must match the variables"""
        with pytest.raises(WitnessError):
            build_Bbar(chain_system(1)).witness.forward([2, 4])

    def test_chain_two(self):
        """Test the squared chain shows up on the diagonal of the completion"""
        compiled = build_Bbar(chain_system(2))
        M = compiled.completion(chain_solution(2))
        assert 17 in M.diagonal()
        assert compiled.partial.agrees(M)

    @pytest.mark.slow
    def test_chain_three(self):
        """Test the 3-step chain"""
        compiled = build_Bbar(chain_system(3))
        assert compiled.params["sigma"] == 21
        assert compiled.params["H"] == 2402
        assert 257 in compiled.completion(chain_solution(3)).diagonal()


class TestChain:
    """Test the squaring chain"""

    def test_solution(self):
        """Test x_t = 2^(2^(t-1))"""
        assert chain_solution(4) == [2, 4, 16, 256]

    def test_system_solved(self):
        """Test the solution zeroes every equation"""
        system = chain_system(3)
        assert all(eq.evaluate(chain_solution(3)) == 0 for eq in system.equations)

    def test_empty_chain(self):
        """Test the chain needs at least one variable"""
        with pytest.raises(ValueError):
            chain_system(0)


class TestPartialMatrix:
    """Test partial matrices"""

    def test_from_rows(self):
        """Test stars mark unspecified entries"""
        pm = PartialMatrix.from_rows([["*", 1, None], [1, "*", 2], [None, 2, "*"]])
        assert pm.unspecified() == [(0, 0), (0, 2), (1, 1), (2, 2)]
        assert pm.pattern() == frozenset({(0, 1), (1, 2)})

    def test_disagreeing_entries(self):
        """Test asymmetric rows are rejected"""
        with pytest.raises(FormatError):
            PartialMatrix.from_rows([["*", 1], [2, "*"]])

    def test_fill_and_agrees(self):
        """Test a fill agrees with the specification"""
        pm = PartialMatrix.from_rows([["*", 1], [1, "*"]])
        M = pm.fill({(0, 0): 1, (1, 1): 1})
        assert pm.agrees(M)
        with pytest.raises(WitnessError):
            pm.fill({(0, 1): 3})

    def test_to_instance_needs_free_diagonal(self):
        """Test a specified diagonal entry cannot become a (P3) instance"""
        with pytest.raises(InstanceError):
            PartialMatrix.from_rows([[1, 1], [1, "*"]]).to_instance(1)


class TestAppendix:
    """Test the perturbed (P2) construction"""

    EPS = Fraction(1, 2 * 10 ** 15)

    def test_delta(self):
        """Test the delta formula"""
        assert appendix_delta(1.0, 1, 1) == pytest.approx(1 / (810 * 6 ** 0.5))

    def test_eps_bound(self):
        """Test the eps bound for the path"""
        assert appendix_eps_bound(1e-12, 1, 3, 1) == pytest.approx(1e-12 / 1800)
        assert float(self.EPS) <= appendix_eps_bound(1e-12, 1, 3, 1)

    def test_validator_accepts_defaults(self):
        """Test every inequality holds at s = 10^4"""
        delta = appendix_delta(self.EPS, 1, 3)
        assert all(check.ok for check in validate_appendix(10 ** 4, self.EPS, delta, 1, 3, 1))

    def test_exact_witness(self):
        """Test the path witness has rank 9 mbar + 3 and stays inside the budget"""
        compiled = appendix_p2tilde_instance(PATH3, self.EPS)
        inst = compiled.instance
        assert inst.n == 18 and inst.r == 12
        assert compiled.params["mbar"] == 1
        dec = compiled.witness.forward([0, 1, 2])
        report = verify(inst, dec)
        assert report.passed, report.messages
        assert report.checks["budget"]
        assert report.rank == 12

    def test_float_instance(self):
        """Test float output keeps the witness inside the budget"""
        compiled = appendix_p2tilde_instance(PATH3, self.EPS, mode=FLOAT)
        dec = compiled.witness.forward([0, 1, 2])
        assert compiled.instance.A.mode == FLOAT
        assert dec.H.frobenius_norm() <= float(self.EPS)

    def test_eps_out_of_range(self):
        """Test eps above the bound"""
        with pytest.raises(EpsOutOfRangeError):
            appendix_p2tilde_instance(PATH3, 1e-6)

    def test_small_s(self):
        """Test a scale too small for the inequalities"""
        with pytest.raises(SMallTooSmallError):
            appendix_p2tilde_instance(PATH3, self.EPS, s=10)

    def test_small_s_not_strict(self):
        """Test non-strict mode only warns"""
        compiled = appendix_p2tilde_instance(PATH3, self.EPS, s=10, strict=False)
        assert not all(check["ok"] for check in compiled.params["validator"])

    def test_needs_nonedge(self):
        """Test a complete graph has nothing to perturb"""
        with pytest.raises(InstanceError):
            appendix_p2tilde_instance(TRIANGLE, self.EPS)

    def test_exact_mode_default(self):
        """Test the default output is exact"""
        assert appendix_p2tilde_instance(PATH3, self.EPS).instance.A.mode == EXACT
