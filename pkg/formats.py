"""
diagrank formats - JSON documents and plain-text files read and written by the CLI.

Indices are 1-based and colors are 1, 2, 3 in every file; the library uses 0-based
indices and colors 0, 1, 2. Exact scalars are written as strings ("3", "-2/7"); float
scalars as JSON numbers (shortest round-trip repr).
"""

import hashlib
import json
from typing import Any, Dict, List, Optional, Sequence, Union

import networkx as nx
import numpy as np

from charsys import KINDS, P3
from decompose import Decomposition, Feasible, Infeasible, Instance, SolveResult, Unknown, VerificationReport
from errors import DiagrankError, FormatError
from polysolve import PolySystem
from reductions import PartialMatrix, make_graph
from symcore import EXACT, FLOAT, MODES, SymMatrix, to_exact, to_float

INSTANCE_FORMAT = "diagrank-instance"
DECOMPOSITION_FORMAT = "diagrank-decomposition"
RESULT_FORMAT = "diagrank-result"
VERSION = 1


# -- scalars -----------------------------------------------------------------------------

def encode_scalar(value: Any) -> Union[str, float]:
    if isinstance(value, (float, np.floating)):
        return float(value)
    return str(to_exact(value))


def decode_scalar(value: Any, mode: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise FormatError(f"Not a number: {value!r}")
    if mode == EXACT:
        if isinstance(value, float):
            raise FormatError(f"Float {value!r} in an exact document; write rationals as strings")
        return to_exact(value)
    if isinstance(value, str):
        return to_float(to_exact(value))
    return to_float(value)


def _encode_matrix(M: SymMatrix) -> List[Any]:
    return [encode_scalar(x) for x in M.lower()]


def _decode_matrix(n: int, entries: Any, mode: str, name: str) -> SymMatrix:
    if not isinstance(entries, list):
        raise FormatError(f"'{name}' must be a list of lower-triangle entries")
    if len(entries) != n * (n + 1) // 2:
        raise FormatError(f"'{name}' has {len(entries)} entries, expected {n * (n + 1) // 2} for n = {n}")
    return SymMatrix.from_lower(n, [decode_scalar(x, mode) for x in entries], mode)


def _require(doc: Dict[str, Any], key: str, kind: Any) -> Any:
    if key not in doc:
        raise FormatError(f"Missing field '{key}'")
    if not isinstance(doc[key], kind) or isinstance(doc[key], bool) and kind is not bool:
        raise FormatError(f"Field '{key}' has the wrong type")
    return doc[key]


def _check_header(doc: Any, expected: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError("Document must be a JSON object")
    if doc.get("format") != expected:
        raise FormatError(f"Expected a '{expected}' document, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise FormatError(f"Unsupported {expected} version: {doc.get('version')!r}")


# -- instances ---------------------------------------------------------------------------

def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    return {
        "format": INSTANCE_FORMAT,
        "version": VERSION,
        "kind": inst.kind,
        "n": inst.n,
        "mode": inst.A.mode,
        "matrix": _encode_matrix(inst.A),
        "pattern": [[i + 1, j + 1] for i, j in sorted(inst.pattern)],
        "r": inst.r,
        "eps": encode_scalar(inst.eps),
        "sparsity_constrained": inst.sparsity_constrained,
        "lower_bound": inst.lower_bound,
        "provenance": inst.provenance,
    }


def instance_from_dict(doc: Any) -> Instance:
    """
    Raises:
        FormatError: schema violations, including instance invariants.
    """
    _check_header(doc, INSTANCE_FORMAT)
    kind = _require(doc, "kind", str)
    if kind not in KINDS:
        raise FormatError(f"Unknown problem kind: {kind}")
    n = _require(doc, "n", int)
    if n < 1:
        raise FormatError(f"Dimension must be positive, got {n}")
    mode = doc.get("mode", EXACT)
    if mode not in MODES:
        raise FormatError(f"Unknown mode: {mode}")
    A = _decode_matrix(n, _require(doc, "matrix", list), mode, "matrix")
    pattern = []
    for pair in doc.get("pattern", []):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, int) for x in pair)):
            raise FormatError(f"Pattern entries must be [i, j] pairs, got {pair!r}")
        i, j = pair
        if not (1 <= i <= n and 1 <= j <= n):
            raise FormatError(f"Pattern pair {pair} is outside 1..{n}")
        pattern.append((i - 1, j - 1))
    eps = doc.get("eps", "0")
    try:
        return Instance(kind=kind, A=A, r=_require(doc, "r", int), pattern=frozenset(pattern),
                        eps=decode_scalar(eps, EXACT if isinstance(eps, str) else FLOAT),
                        sparsity_constrained=bool(doc.get("sparsity_constrained", False)),
                        lower_bound=doc.get("lower_bound"), provenance=doc.get("provenance") or {})
    except FormatError:
        raise
    except DiagrankError as e:
        raise FormatError(f"Invalid instance: {e}")


def content_hash(inst: Instance) -> str:
    """sha256 of the canonical instance document without its provenance."""
    doc = instance_to_dict(inst)
    doc.pop("provenance")
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


# -- decompositions ----------------------------------------------------------------------

def decomposition_to_dict(dec: Decomposition, inst: Optional[Instance] = None) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"format": DECOMPOSITION_FORMAT, "version": VERSION}
    if inst is not None:
        doc["instance"] = content_hash(inst)
    if dec.d is not None:
        doc["d"] = [encode_scalar(x) for x in dec.d]
    if dec.L is not None:
        doc["L"] = _encode_matrix(dec.L)
    if dec.H is not None:
        doc["H"] = _encode_matrix(dec.H)
    if dec.U is not None:
        doc["U"] = [[encode_scalar(x) for x in row] for row in np.asarray(dec.U)]
    if dec.achieved_rank is not None:
        doc["achieved_rank"] = dec.achieved_rank
    if dec.J is not None:
        doc["J"] = [j + 1 for j in dec.J]
    return doc


def _entries_mode(values: Sequence[Any]) -> str:
    return FLOAT if any(isinstance(x, float) for x in values) else EXACT


def decomposition_from_dict(doc: Any, inst: Optional[Instance] = None) -> Decomposition:
    """
    Raises:
        FormatError: schema violations or an instance hash that does not match ``inst``.
    """
    _check_header(doc, DECOMPOSITION_FORMAT)
    if inst is not None and "instance" in doc and doc["instance"] != content_hash(inst):
        raise FormatError("Decomposition refers to a different instance (content hash mismatch)")
    d = None
    if "d" in doc:
        values = _require(doc, "d", list)
        mode = _entries_mode(values)
        d = [decode_scalar(x, mode) for x in values]
    matrices = {}
    for key in ("L", "H"):
        if key in doc:
            entries = _require(doc, key, list)
            k = len(entries)
            n = int(round(((8 * k + 1) ** 0.5 - 1) / 2))
            if n * (n + 1) // 2 != k:
                raise FormatError(f"'{key}' has {k} entries, which is not a triangular number")
            matrices[key] = _decode_matrix(n, entries, _entries_mode(entries), key)
    U = None
    if "U" in doc:
        rows = _require(doc, "U", list)
        mode = _entries_mode([x for row in rows for x in row])
        U = np.array([[decode_scalar(x, mode) for x in row] for row in rows],
                     dtype=object if mode == EXACT else float)
    J = tuple(j - 1 for j in doc["J"]) if "J" in doc else None
    return Decomposition(d=d, L=matrices.get("L"), U=U, H=matrices.get("H"),
                         achieved_rank=doc.get("achieved_rank"), J=J)


# -- results -----------------------------------------------------------------------------

def report_to_dict(report: VerificationReport) -> Dict[str, Any]:
    return {"passed": report.passed, "checks": report.checks, "messages": report.messages,
            "rank": report.rank, "exact": report.exact}


def result_to_dict(result: SolveResult, inst: Instance, **extra: Any) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"format": RESULT_FORMAT, "version": VERSION, "instance": content_hash(inst),
                           "kind": inst.kind, "n": inst.n, "rank": result.rank}
    if isinstance(result, Feasible):
        doc["status"] = "feasible"
        doc["decomposition"] = decomposition_to_dict(result.decomposition, inst)
        if result.report is not None:
            doc["verification"] = report_to_dict(result.report)
    elif isinstance(result, Infeasible):
        doc["status"] = "infeasible"
        doc["certificates"] = list(result.certificates)
    elif isinstance(result, Unknown):
        doc["status"] = "unknown"
        doc["incomplete"] = list(result.incomplete)
    doc.update(extra)
    return doc


# -- files -------------------------------------------------------------------------------

def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}")


def write_json(doc: Any, path: Optional[str] = None) -> str:
    """Write ``doc`` to ``path`` (or just return it) as indented JSON."""
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text


def load_instance(path: str) -> Instance:
    return instance_from_dict(read_json(path))


def save_instance(inst: Instance, path: str) -> None:
    write_json(instance_to_dict(inst), path)


def load_decomposition(path: str, inst: Optional[Instance] = None) -> Decomposition:
    return decomposition_from_dict(read_json(path), inst)


def save_decomposition(dec: Decomposition, path: str, inst: Optional[Instance] = None) -> None:
    write_json(decomposition_to_dict(dec, inst), path)


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _content_lines(text: str, comment: str = "#") -> List[str]:
    lines = []
    for raw in text.splitlines():
        line = raw.split(comment, 1)[0].strip()
        if line:
            lines.append(line)
    return lines


# -- matrices ----------------------------------------------------------------------------

def parse_matrix_rows(text: str) -> List[List[str]]:
    """Whitespace- or comma-separated rows; '#' starts a comment."""
    rows = [line.replace(",", " ").split() for line in _content_lines(text)]
    if not rows:
        raise FormatError("No matrix rows found")
    n = len(rows)
    for i, row in enumerate(rows, 1):
        if len(row) != n:
            raise FormatError(f"Row {i} has {len(row)} entries, expected {n}")
    return rows


def parse_matrix(text: str, mode: str = EXACT) -> SymMatrix:
    rows = parse_matrix_rows(text)
    try:
        values = [[to_exact(x) for x in row] for row in rows]
    except FormatError as e:
        raise FormatError(f"Bad matrix entry: {e}")
    return SymMatrix.from_dense(values, mode=mode)


def parse_partial_matrix(text: str) -> PartialMatrix:
    """Matrix rows where '*' marks an unspecified entry."""
    return PartialMatrix.from_rows([[None if x == "*" else x for x in row] for row in parse_matrix_rows(text)])


def format_matrix(M: SymMatrix) -> str:
    return "\n".join(" ".join(str(x) for x in M.array[i]) for i in range(M.n)) + "\n"


def instance_from_matrix_text(text: str, kind: str, r: int, mode: str = EXACT) -> Instance:
    """(P1)/(P2) from a plain matrix, or (P3) from a matrix with '*' on the free pairs."""
    if kind not in KINDS:
        raise FormatError(f"Unknown problem kind: {kind}")
    try:
        if kind == P3:
            return parse_partial_matrix(text).to_instance(r, provenance={"source": "matrix-text"})
        return Instance(kind=kind, A=parse_matrix(text, mode), r=r, provenance={"source": "matrix-text"})
    except FormatError:
        raise
    except DiagrankError as e:
        raise FormatError(f"Invalid instance: {e}")


# -- graphs ------------------------------------------------------------------------------

def parse_edge_list(text: str) -> nx.Graph:
    """
    One edge 'u v' per line with 1-based vertices. A '# vertices: N' header adds
    isolated vertices up to N.
    """
    n: Optional[int] = None
    for raw in text.splitlines():
        header = raw.strip().lstrip("#").strip().lower()
        if raw.strip().startswith("#") and header.startswith("vertices:"):
            try:
                n = int(header.split(":", 1)[1])
            except ValueError:
                raise FormatError(f"Bad vertex count header: {raw.strip()}")
    try:
        parsed = nx.parse_edgelist(_content_lines(text), nodetype=int, data=False)
    except (TypeError, ValueError) as e:
        raise FormatError(f"Bad edge list: {e}")
    labels = list(parsed.nodes)
    if any(v < 1 for v in labels):
        raise FormatError("Vertices are numbered from 1")
    n = max(labels + [n or 0])
    return make_graph(n, [(u - 1, v - 1) for u, v in parsed.edges])


def parse_dimacs(text: str) -> nx.Graph:
    """DIMACS .col: 'c' comments, one 'p edge N M' line, 'e u v' edges."""
    n: Optional[int] = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        try:
            if parts[0] == "p":
                n = int(parts[2])
            elif parts[0] == "e":
                edges.append((int(parts[1]) - 1, int(parts[2]) - 1))
            else:
                raise FormatError(f"Line {lineno}: unknown record '{parts[0]}'")
        except (IndexError, ValueError):
            raise FormatError(f"Line {lineno}: malformed record '{raw.strip()}'")
    if n is None:
        raise FormatError("DIMACS file has no 'p edge' line")
    return make_graph(n, edges)


def read_graph(path: str) -> nx.Graph:
    text = read_text(path)
    if path.endswith(".col") or any(line.startswith("p ") for line in text.splitlines()):
        return parse_dimacs(text)
    return parse_edge_list(text)


def format_edge_list(G: nx.Graph) -> str:
    lines = [f"# vertices: {G.number_of_nodes()}"]
    lines += [f"{min(u, v) + 1} {max(u, v) + 1}" for u, v in sorted(G.edges, key=lambda e: (min(e), max(e)))]
    return "\n".join(lines) + "\n"


# -- colorings and vectors ---------------------------------------------------------------

def parse_coloring(text: str) -> Dict[int, int]:
    """
    Either one 'vertex color' pair per line or a single line of colors; colors 1, 2, 3.
    """
    lines = _content_lines(text)
    try:
        if len(lines) == 1 and len(lines[0].split()) != 2:
            pairs = list(enumerate((int(x) for x in lines[0].replace(",", " ").split()), 1))
        else:
            pairs = [tuple(int(x) for x in line.split()) for line in lines]
    except ValueError:
        raise FormatError("Coloring entries must be integers")
    coloring = {}
    for pair in pairs:
        if len(pair) != 2:
            raise FormatError(f"Expected 'vertex color', got {' '.join(map(str, pair))}")
        v, c = pair
        if c not in (1, 2, 3):
            raise FormatError(f"Vertex {v} has color {c}; colors are 1, 2, 3")
        coloring[v - 1] = c - 1
    return coloring


def format_coloring(coloring: Dict[int, int]) -> str:
    return "".join(f"{v + 1} {c + 1}\n" for v, c in sorted(coloring.items()))


def parse_vector(text: str) -> List[Any]:
    """Whitespace- or comma-separated numbers (a JSON list also works)."""
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            values = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise FormatError(f"Bad vector: {e}")
    else:
        values = " ".join(_content_lines(text)).replace(",", " ").split()
    return [to_exact(x) if not isinstance(x, float) else x for x in values]


def load_polysystem(path: str) -> PolySystem:
    return PolySystem.from_text(read_text(path))


def partial_to_rows(pm: PartialMatrix) -> List[List[Any]]:
    return [[encode_scalar(pm.values[i, j]) if pm.mask[i, j] else "*" for j in range(pm.n)] for i in range(pm.n)]
