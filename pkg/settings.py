"""
diagrank settings - tolerances, solver budget and reduction parameters.

Defaults live in the dataclasses below; diagrank.cfg (next to this file) may override
them with ``key = value`` lines, and CLI flags override both.
"""

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from rich.console import Console

from errors import FormatError

console = Console(stderr=True)

DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "diagrank.cfg")


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used in float mode."""
    psd: float = 1e-9
    rank: float = 1e-9
    linear: float = 1e-10
    residual: float = 1e-8
    dedupe: float = 1e-6


@dataclass(frozen=True)
class SolverBudget:
    """Limits for the polynomial solver and the J-enumeration."""
    max_vars: int = 12
    exact_free_cap: int = 2
    newton_grid: Tuple[float, ...] = (-8.0, -4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0, 8.0)
    random_starts: int = 32
    random_box: float = 10.0
    max_newton_iter: int = 200
    threads: int = 1
    seed: int = 0
    max_facet_nodes: int = 64
    max_branches: int = 256
    p3_compiled_cap: int = 6
    p3_direct_cap: int = 2
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass(frozen=True)
class ReductionParams:
    """Parameters of the gadget compilers."""
    eps0: float = 1e-12
    s: int = 10 ** 4
    phat: int = 1
    coloring_cap: int = 25


@dataclass(frozen=True)
class Settings:
    budget: SolverBudget = field(default_factory=SolverBudget)
    reductions: ReductionParams = field(default_factory=ReductionParams)

    @property
    def tolerances(self) -> Tolerances:
        return self.budget.tolerances

    def with_overrides(self, **overrides: Any) -> "Settings":
        """
        Return a copy with the given flat keys replaced.

        Keys are looked up in Tolerances, SolverBudget and ReductionParams in that order;
        ``None`` values are skipped so argparse defaults can be passed straight through.
        """
        tol_kw: Dict[str, Any] = {}
        budget_kw: Dict[str, Any] = {}
        red_kw: Dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in _TOLERANCE_KEYS:
                tol_kw[key] = value
            elif key in _BUDGET_KEYS:
                budget_kw[key] = value
            elif key in _REDUCTION_KEYS:
                red_kw[key] = value
            else:
                raise FormatError(f"Unknown setting: {key}")
        tolerances = dataclasses.replace(self.budget.tolerances, **tol_kw)
        budget = dataclasses.replace(self.budget, tolerances=tolerances, **budget_kw)
        reductions = dataclasses.replace(self.reductions, **red_kw)
        return Settings(budget=budget, reductions=reductions)


_TOLERANCE_KEYS = {f.name: f.type for f in dataclasses.fields(Tolerances)}
_BUDGET_KEYS = {f.name: f.type for f in dataclasses.fields(SolverBudget) if f.name != "tolerances"}
_REDUCTION_KEYS = {f.name: f.type for f in dataclasses.fields(ReductionParams)}


def _coerce(key: str, raw: str) -> Any:
    """Convert a config-file string to the type of the field it overrides."""
    if key == "newton_grid":
        try:
            return tuple(float(part) for part in raw.replace(",", " ").split())
        except ValueError:
            raise FormatError(f"Invalid value for {key}: {raw}")
    kind = _TOLERANCE_KEYS.get(key) or _BUDGET_KEYS.get(key) or _REDUCTION_KEYS.get(key)
    if kind is None:
        raise FormatError(f"Unknown setting: {key}")
    try:
        if kind in (int, "int"):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        return float(raw)
    except ValueError:
        raise FormatError(f"Invalid value for {key}: {raw}")


def load_settings(path: Optional[str] = None) -> Settings:
    """
    Load settings from a ``key = value`` file.

    Args:
        path: Config file; defaults to diagrank.cfg beside this module.

    Returns:
        Settings with the file's overrides applied.
    """
    config_file = path or DEFAULT_CONFIG_FILE
    overrides: Dict[str, Any] = {}

    try:
        with open(config_file, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise FormatError(f"{config_file}:{lineno}: expected 'key = value'")
                key, raw = (part.strip() for part in line.split("=", 1))
                overrides[key] = _coerce(key, raw)
    except FileNotFoundError:
        console.print(f"[yellow]Warning: {config_file} not found. Using built-in defaults.[/yellow]")

    return Settings().with_overrides(**overrides)
