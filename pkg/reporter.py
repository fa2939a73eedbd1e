"""
diagrank reporter - HTML rendering of result JSON documents
"""

import json
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

from jinja2 import Environment, FileSystemLoader
from rich.console import Console

from errors import FormatError

console = Console(stderr=True)

STATUS_COLORS = {
    "feasible": "green",
    "pass": "green",
    "colorable": "green",
    "infeasible": "red",
    "fail": "red",
    "not colorable": "red",
    "unknown": "orange",
    "evidence": "gray",
}

MAX_ROWS = 50


def _status(data: Dict[str, Any]) -> str:
    if "status" in data:
        return str(data["status"])
    if "verification" in data and "passed" in data["verification"]:
        return "pass" if data["verification"]["passed"] else "fail"
    if "passed" in data:
        return "pass" if data["passed"] else "fail"
    if "colorable" in data:
        return "colorable" if data["colorable"] else "not colorable"
    if "violations" in data:
        return "pass" if not data["violations"] else "fail"
    return "evidence"


def _summary(data: Dict[str, Any]) -> List[Dict[str, Any]]:
    return [{"key": k, "value": v} for k, v in data.items()
            if isinstance(v, (str, int, float, bool)) or v is None]


def _lists(data: Dict[str, Any]) -> Dict[str, List[str]]:
    sections = {}
    for key in ("certificates", "incomplete", "messages"):
        if data.get(key):
            sections[key] = [str(x) for x in data[key]]
    verification = data.get("verification") or {}
    if verification.get("messages"):
        sections["verification messages"] = [str(x) for x in verification["messages"]]
    return sections


def generate_report(result_file: str, output_file: str, title: Optional[str] = None) -> str:
    """
    Render a result JSON (decompose, verify or oracle output) as an HTML page.

    Args:
        result_file: Path to the JSON document.
        output_file: Path of the HTML file to write; parent directories are created.

    Returns:
        The output path.

    Raises:
        FormatError: the result file is not a JSON object.
    """
    try:
        with open(result_file, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"Result file '{result_file}' is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise FormatError(f"Result file '{result_file}' must hold a JSON object")
    return render_report(data, output_file, source=os.path.basename(result_file), title=title)


def render_report(data: Dict[str, Any], output_file: str, source: str = "", title: Optional[str] = None) -> str:
    """Render an already loaded result document to ``output_file``."""
    status = _status(data)
    decomposition = data.get("decomposition") or {}
    checks = (data.get("verification") or {}).get("checks") or data.get("checks") or {}
    lemmas = data.get("lemmas") or {}

    env = Environment(
        loader=FileSystemLoader(os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")),
        autoescape=True
    )
    template = env.get_template("report_template.html")
    html_content = template.render(
        title=title or f"diagrank {data.get('format', 'result')}",
        source=source or "-",
        status=status,
        status_color=STATUS_COLORS.get(status.lower(), "gray"),
        summary=_summary(data),
        d=decomposition.get("d") or [],
        J=decomposition.get("J") or [],
        checks=[{"name": k, "ok": v} for k, v in checks.items()],
        lists=_lists(data),
        lemmas=[{"name": k, **v} for k, v in lemmas.items()],
        samples=(data.get("samples") or [])[:MAX_ROWS],
        sample_count=len(data.get("samples") or []),
        timestamp=datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    )

    output_dir = os.path.dirname(output_file)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(output_file, "w", encoding="utf-8") as f:
        f.write(html_content)

    console.print(f"[green]Report generated: {output_file}[/green]")
    return output_file
