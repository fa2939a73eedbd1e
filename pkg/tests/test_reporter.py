"""
Tests for the HTML reporter
"""

import json

import pytest

from catalog import get_instance
from decompose import Decomposition, Feasible, verify
from errors import FormatError
from formats import result_to_dict, write_json
from reporter import generate_report, render_report


@pytest.fixture
def feasible_result(tmp_path):
    inst = get_instance("example1")
    dec = Decomposition(d=[2, 2, 3, 2, 2], achieved_rank=3, J=(0, 1, 2))
    doc = result_to_dict(Feasible(decomposition=dec, rank=3, report=verify(inst, dec)), inst, seed=0)
    path = tmp_path / "result.json"
    write_json(doc, str(path))
    return path


class TestReporter:
    """Test report rendering"""

    def test_feasible_result(self, feasible_result, tmp_path):
        """Test the diagonal, index set and checks are rendered"""
        output = tmp_path / "reports" / "result.html"
        assert generate_report(str(feasible_result), str(output)) == str(output)
        html = output.read_text()
        assert "feasible" in html
        assert "Index set J = 1, 2, 3" in html
        assert "result.json" in html
        assert html.count('class="ok"') >= 3

    def test_infeasible_certificates(self, tmp_path):
        """Test certificates are listed and escaped"""
        output = tmp_path / "r.html"
        render_report({"status": "infeasible", "certificates": ["J=[1, 2]: <inconsistent>"]}, str(output))
        html = output.read_text()
        assert "&lt;inconsistent&gt;" in html
        assert "red" in html

    def test_probe_samples(self, tmp_path):
        """Test probe samples are tabulated"""
        doc = {"trials": 2, "target_rank": 1, "seed": 0, "best_rank_found": 1, "violations": [],
               "samples": [{"rank": 1, "J": [1], "residual": 1e-12, "verified_rank": 1, "trial": 0},
                           {"rank": 1, "J": [2], "error": "bad start", "trial": 1}]}
        output = tmp_path / "probe.html"
        render_report(doc, str(output))
        html = output.read_text()
        assert "Samples (2 of 2)" in html
        assert "pass" in html

    def test_lemma_table(self, tmp_path):
        """Test lemma statistics are rendered"""
        doc = {"seed": 0, "violations": 0,
               "lemmas": {"kdk": {"trials": 5, "violations": 0, "worst_ratio": 0.25, "messages": []}}}
        output = tmp_path / "lemmas.html"
        render_report(doc, str(output))
        assert "kdk" in output.read_text()

    def test_invalid_json(self, tmp_path):
        """Test a broken result file"""
        path = tmp_path / "broken.json"
        path.write_text("[1, 2")
        with pytest.raises(FormatError):
            generate_report(str(path), str(tmp_path / "x.html"))

    def test_not_an_object(self, tmp_path):
        """Test a JSON list is refused"""
        path = tmp_path / "list.json"
        path.write_text(json.dumps([1, 2]))
        with pytest.raises(FormatError, match="JSON object"):
            generate_report(str(path), str(tmp_path / "x.html"))
