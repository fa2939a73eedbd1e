"""
diagrank catalog - named built-in instances
"""

from fractions import Fraction
from typing import Any, Dict, List

from charsys import P2, P3
from decompose import Decomposition, Instance
from symcore import SymMatrix, to_exact

# Each entry: matrix rows, problem kind, default rank, optional pattern / rank bound, note
CATALOG: Dict[str, Dict[str, Any]] = {
    "example1": {
        "rows": [[0, 1, 2, 1, 0],
                 [1, 0, 2, 0, 1],
                 [2, 2, 0, 0, 0],
                 [1, 0, 0, 0, 1],
                 [0, 1, 0, 1, 0]],
        "kind": P2, "r": 3, "lower_bound": 3,
        "note": "5x5 (P2) instance with minimum rank 3; d = [2, 2, 3, 2, 2] is one solution",
    },
    "example1-6x6": {
        "rows": [[0, 1, 2, 1, 0, 1],
                 [1, 0, 2, 0, 1, 1],
                 [2, 2, 0, 0, 0, -1],
                 [1, 0, 0, 0, 1, 5],
                 [0, 1, 0, 1, 0, 5],
                 [1, 1, -1, 5, 5, 0]],
        "kind": P2, "r": 3,
        "note": "6x6 extension whose inner system on J = {1, 2, 3} has exactly two solutions",
    },
    "all-ones-offdiag-3": {
        "rows": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
        "kind": P2, "r": 1,
        "note": "All-ones matrix with zeroed diagonal; d = 1 gives rank 1",
    },
    "swap-2": {
        "rows": [[0, 1], [1, 0]],
        "kind": P2, "r": 1,
        "note": "2x2 swap matrix; minimum rank 1 at d = [1, 1]",
    },
    "unique-completion-3": {
        "rows": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
        "kind": P3, "r": 1, "pattern": [(0, 1), (0, 2), (1, 2)],
        "note": "Ones block with a free diagonal; the only rank-1 PSD completion sets it to 1",
    },
    "perturbed-rank2": {
        "rows": [[0, 0, 1, 1, 0],
                 [0, 0, 1, -1, 0],
                 [1, 1, 0, 0, 1],
                 [1, -1, 0, 0, 1],
                 [0, 0, 1, 1, 0]],
        "kind": P2, "r": 2, "lower_bound": 3,
        "note": "No d reaches rank 2, but a perturbation of norm sqrt(2) eps does",
    },
}


def list_instances() -> List[Dict[str, str]]:
    return [{"name": name, "kind": entry["kind"], "note": entry["note"]} for name, entry in CATALOG.items()]


def get_instance(name: str, eps: Any = 0) -> Instance:
    """
    Build a catalog instance.

    Args:
        name: Catalog key.
        eps: Perturbation budget attached to the instance.

    Raises:
        ValueError: unknown name.
    """
    if name not in CATALOG:
        raise ValueError(f"Unknown instance: {name}")
    entry = CATALOG[name]
    return Instance(kind=entry["kind"], A=SymMatrix.from_dense(entry["rows"]), r=entry["r"],
                    pattern=frozenset(entry.get("pattern", ())), eps=eps,
                    lower_bound=entry.get("lower_bound") if not eps else None,
                    provenance={"catalog": name})


def perturbed_rank2_witness(eps: Any = Fraction(1, 100)) -> Decomposition:
    """
    d = (eps, eps, 2/eps, 2/eps, eps) with H_15 = H_51 = eps on the perturbed-rank2 matrix.

    A + Diag(d) + H = u u^T + v v^T with u = (a, 0, 1/a, 1/a, a), v = (0, a, 1/a, -1/a, 0)
    and a = sqrt(eps).
    """
    eps = to_exact(eps)
    d = [eps, eps, 2 / Fraction(eps), 2 / Fraction(eps), eps]
    H = [[0] * 5 for _ in range(5)]
    H[0][4] = H[4][0] = eps
    return Decomposition(d=[to_exact(x) for x in d], H=SymMatrix.from_dense(H))
