"""
Tests for file formats
"""

import json
from fractions import Fraction

import pytest

from catalog import get_instance, perturbed_rank2_witness
from charsys import P1, P2, P3
from decompose import Decomposition, Feasible, Infeasible, Instance, verify
from errors import FormatError
from formats import (content_hash, decode_scalar, decomposition_from_dict, decomposition_to_dict, encode_scalar,
                     format_coloring, format_edge_list, instance_from_dict, instance_from_matrix_text,
                     instance_to_dict, load_decomposition, load_instance, parse_coloring, parse_dimacs,
                     parse_edge_list, parse_matrix, parse_partial_matrix, parse_vector, partial_to_rows,
                     read_graph, result_to_dict, save_decomposition, save_instance)
from oracle import planted_instance
from symcore import EXACT, FLOAT, SymMatrix


class TestScalars:
    """Test scalar encoding"""

    def test_exact_as_strings(self):
        """Test rationals are written as strings"""
        assert encode_scalar(Fraction(-2, 7)) == "-2/7"
        assert encode_scalar(3) == "3"
        assert encode_scalar(0.5) == 0.5

    def test_decode_modes(self):
        """Test decoding in each mode"""
        assert decode_scalar("-2/7", EXACT) == Fraction(-2, 7)
        assert decode_scalar("1/4", FLOAT) == 0.25
        assert decode_scalar(2, EXACT) == 2

    def test_float_in_exact_document(self):
        """Test floats are refused in exact documents"""
        with pytest.raises(FormatError):
            decode_scalar(0.1, EXACT)

    def test_bool_rejected(self):
        """Test booleans are not numbers"""
        with pytest.raises(FormatError):
            decode_scalar(True, FLOAT)


class TestInstanceDocuments:
    """Test instance JSON"""

    def test_round_trip(self, tmp_path):
        """Test saving and loading keeps the instance"""
        inst = get_instance("example1")
        path = tmp_path / "inst.json"
        save_instance(inst, str(path))
        loaded = load_instance(str(path))
        assert loaded == inst
        assert loaded.provenance == {"catalog": "example1"}

    def test_lower_triangle_layout(self):
        """Test the matrix is stored row by row from the lower triangle"""
        doc = instance_to_dict(Instance(kind=P2, A=SymMatrix.from_dense([[0, 1], [1, 0]]), r=1))
        assert doc["matrix"] == ["0", "1", "0"]
        assert doc["format"] == "diagrank-instance" and doc["version"] == 1

    def test_pattern_is_one_based(self):
        """Test pattern pairs are written 1-based"""
        doc = instance_to_dict(get_instance("unique-completion-3"))
        assert doc["pattern"] == [[1, 2], [1, 3], [2, 3]]

    def test_wrong_entry_count(self):
        """Test a short matrix is refused"""
        doc = instance_to_dict(get_instance("swap-2"))
        doc["matrix"] = doc["matrix"][:2]
        with pytest.raises(FormatError, match="entries"):
            instance_from_dict(doc)

    def test_wrong_format(self):
        """Test documents of another format are refused"""
        doc = instance_to_dict(get_instance("swap-2"))
        doc["format"] = "something-else"
        with pytest.raises(FormatError):
            instance_from_dict(doc)

    def test_invalid_instance_wrapped(self):
        """Test instance invariants surface as format errors"""
        doc = instance_to_dict(get_instance("swap-2"))
        doc["matrix"] = ["1", "1", "0"]
        with pytest.raises(FormatError, match="zero diagonal"):
            instance_from_dict(doc)

    def test_pattern_out_of_range(self):
        """Test pattern pairs must lie inside 1..n"""
        doc = instance_to_dict(get_instance("unique-completion-3"))
        doc["pattern"].append([1, 4])
        with pytest.raises(FormatError):
            instance_from_dict(doc)

    def test_hash_ignores_provenance(self):
        """Test provenance does not change the content hash"""
        a = get_instance("swap-2")
        b = Instance(kind=P2, A=a.A, r=1, provenance={"source": "elsewhere"})
        assert content_hash(a) == content_hash(b)
        assert content_hash(a) != content_hash(a.with_rank(2))


class TestDecompositionDocuments:
    """Test decomposition JSON"""

    def test_round_trip(self, tmp_path):
        """Test a saved decomposition verifies after loading"""
        inst = get_instance("example1")
        path = tmp_path / "dec.json"
        save_decomposition(Decomposition(d=[2, 2, 3, 2, Fraction(2)], J=(0, 1, 2)), str(path), inst)
        dec = load_decomposition(str(path), inst)
        assert dec.d == [2, 2, 3, 2, 2]
        assert dec.J == (0, 1, 2)
        assert verify(inst, dec).passed

    def test_one_based_index_set(self):
        """Test J is written 1-based"""
        doc = decomposition_to_dict(Decomposition(d=[1, 1], J=(0,)))
        assert doc["J"] == [1]

    def test_hash_mismatch(self):
        """Test a decomposition for another instance is refused"""
        doc = decomposition_to_dict(Decomposition(d=[1, 1]), get_instance("swap-2"))
        with pytest.raises(FormatError, match="hash"):
            decomposition_from_dict(doc, get_instance("all-ones-offdiag-3"))

    def test_perturbation_matrix(self):
        """Test H survives a round trip"""
        inst = get_instance("perturbed-rank2", eps=Fraction(2, 100))
        doc = json.loads(json.dumps(decomposition_to_dict(
            perturbed_rank2_witness(), inst)))
        dec = decomposition_from_dict(doc, inst)
        assert dec.H[0, 4] == Fraction(1, 100)
        assert verify(inst, dec).passed

    def test_non_triangular_length(self):
        """Test L with a non-triangular entry count is refused"""
        with pytest.raises(FormatError, match="triangular"):
            decomposition_from_dict({"format": "diagrank-decomposition", "version": 1, "L": ["1", "2"]})

    def test_float_values(self):
        """Test float entries decode as floats"""
        doc = {"format": "diagrank-decomposition", "version": 1, "d": [0.5, 1]}
        assert decomposition_from_dict(doc).d == [0.5, 1.0]


class TestSeededRoundTrips:
    """Test documents of planted instances survive a save and load"""

    @pytest.mark.parametrize("seed", range(100))
    def test_instance_and_decomposition(self, seed, tmp_path):
        """Test the loaded instance hashes the same and the loaded decomposition still verifies"""
        kind = (P1, P2, P3)[seed % 3]
        inst, dec = planted_instance(kind, n=3 + seed % 5, r=1 + seed % 2, seed=seed)
        save_instance(inst, str(tmp_path / "inst.json"))
        loaded = load_instance(str(tmp_path / "inst.json"))
        assert loaded == inst
        assert content_hash(loaded) == content_hash(inst)
        save_decomposition(dec, str(tmp_path / "dec.json"), inst)
        back = load_decomposition(str(tmp_path / "dec.json"), loaded)
        assert decomposition_to_dict(back, loaded) == decomposition_to_dict(dec, inst)
        assert verify(loaded, back).passed


class TestResultDocuments:
    """Test result JSON"""

    def test_feasible(self):
        """Test a feasible result carries the decomposition and verification"""
        inst = get_instance("swap-2")
        dec = Decomposition(d=[1, 1], achieved_rank=1)
        doc = result_to_dict(Feasible(decomposition=dec, rank=1, report=verify(inst, dec)), inst, seed=3)
        assert doc["status"] == "feasible"
        assert doc["decomposition"]["d"] == ["1", "1"]
        assert doc["verification"]["passed"] is True
        assert doc["seed"] == 3

    def test_infeasible(self):
        """Test an infeasible result carries its certificates"""
        inst = get_instance("example1").with_rank(2)
        doc = result_to_dict(Infeasible(rank=2, certificates=["J = {1, 2}: inconsistent"]), inst)
        assert doc["status"] == "infeasible"
        assert doc["certificates"] == ["J = {1, 2}: inconsistent"]


class TestMatrixText:
    """Test plain-text matrices"""

    def test_parse(self):
        """Test comments and commas are accepted"""
        M = parse_matrix("# swap\n0, 1\n1 0\n")
        assert M == SymMatrix.from_dense([[0, 1], [1, 0]])

    def test_ragged(self):
        """Test rows of the wrong length are refused"""
        with pytest.raises(FormatError, match="Row 2"):
            parse_matrix("0 1\n1\n")

    def test_bad_entry(self):
        """Test non-numeric entries are refused"""
        with pytest.raises(FormatError):
            parse_matrix("0 x\nx 0\n")

    def test_instance_kinds(self):
        """Test (P1) and (P3) instances from text"""
        inst = instance_from_matrix_text("2 1\n1 2\n", P1, 1)
        assert inst.kind == P1 and inst.A[0, 0] == 2
        p3 = instance_from_matrix_text("* 1 1\n1 * 1\n1 1 *\n", P3, 1)
        assert p3.kind == P3 and p3.free_pairs == []

    def test_p2_nonzero_diagonal(self):
        """Test instance errors surface as format errors"""
        with pytest.raises(FormatError):
            instance_from_matrix_text("1 1\n1 0\n", P2, 1)

    def test_partial_rows(self):
        """Test stars survive conversion back to rows"""
        pm = parse_partial_matrix("* 1\n1 *\n")
        assert partial_to_rows(pm) == [["*", "1"], ["1", "*"]]


class TestGraphs:
    """Test graph files"""

    def test_edge_list(self):
        """Test 1-based edge lists with a vertex header"""
        G = parse_edge_list("# vertices: 5\n1 2\n2 3\n")
        assert G.number_of_nodes() == 5
        assert sorted(G.edges) == [(0, 1), (1, 2)]

    def test_edge_list_round_trip(self):
        """Test formatting and parsing agree"""
        G = parse_edge_list("# vertices: 4\n1 2\n3 4\n2 3\n")
        assert sorted(parse_edge_list(format_edge_list(G)).edges) == sorted(G.edges)

    def test_zero_vertex(self):
        """Test vertex 0 is refused"""
        with pytest.raises(FormatError):
            parse_edge_list("0 1\n")

    def test_self_loop(self):
        """Test loops are refused"""
        with pytest.raises(FormatError, match="self-loop"):
            parse_edge_list("1 1\n")

    def test_dimacs(self):
        """Test DIMACS files"""
        G = parse_dimacs("c triangle\np edge 3 3\ne 1 2\ne 2 3\ne 1 3\n")
        assert G.number_of_nodes() == 3 and G.number_of_edges() == 3

    def test_dimacs_missing_header(self):
        """Test a DIMACS file needs its problem line"""
        with pytest.raises(FormatError):
            parse_dimacs("e 1 2\n")

    def test_read_graph_by_extension(self, tmp_path):
        """Test .col files are read as DIMACS"""
        path = tmp_path / "g.col"
        path.write_text("p edge 2 1\ne 1 2\n")
        assert read_graph(str(path)).number_of_edges() == 1


class TestColoringsAndVectors:
    """Test coloring and vector files"""

    def test_pairs(self):
        """Test 'vertex color' lines become 0-based"""
        assert parse_coloring("1 1\n2 3\n") == {0: 0, 1: 2}

    def test_single_line(self):
        """Test a single line of colors"""
        assert parse_coloring("1 2 3\n") == {0: 0, 1: 1, 2: 2}

    def test_bad_color(self):
        """Test colors outside 1..3 are refused"""
        with pytest.raises(FormatError):
            parse_coloring("1 4\n")

    def test_format(self):
        """Test formatting back to 1-based"""
        assert format_coloring({0: 0, 1: 2}) == "1 1\n2 3\n"

    def test_vector(self):
        """Test whitespace and JSON vectors"""
        assert parse_vector("1 1/2, 3") == [1, Fraction(1, 2), 3]
        assert parse_vector("[1, 0.5]") == [1, 0.5]
