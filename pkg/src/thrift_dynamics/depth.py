"""Affine gate-depth registry and budget-to-step conversion."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

REGISTRY_FILE = "depth_registry.csv"

# fixed two-qubit budgets used for each model's algorithm landscape
TABLE_BUDGETS = {"tfim_1d": 31, "tfim_2d": 105, "heisenberg_1d": 31, "fermi_hubbard_1d": 61}


class UnregisteredError(KeyError):
    pass


@dataclass(frozen=True)
class DepthFormula:
    model: str
    formula: str
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a < 0 or self.c < 0:
            raise ValueError("slopes must be nonnegative")

    def two_qubit(self, N: int) -> int:
        return self.a * N + self.b

    def cnot(self, N: int) -> int:
        return self.c * N + self.d


@lru_cache(maxsize=1)
def load_registry() -> dict[tuple[str, str], DepthFormula]:
    text = resources.files(__package__).joinpath("data", REGISTRY_FILE).read_text()
    rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
    out = {}
    for r in rows:
        f = DepthFormula(r["model"], r["formula"], *(int(r[k]) for k in "abcd"))
        out[(f.model, f.formula)] = f
    return out


def lookup(model: str, formula: str) -> DepthFormula:
    try:
        return load_registry()[(model, formula)]
    except KeyError:
        raise UnregisteredError(f"no depth formula for ({model}, {formula})") from None


def registered_formulas(model: str) -> list[str]:
    return [f for (m, f) in load_registry() if m == model]


def depth(model: str, formula: str, N: int) -> tuple[int, int]:
    """``(two_qubit_depth, cnot_depth)`` for ``N`` steps."""
    if N < 1:
        raise ValueError("N must be at least 1")
    f = lookup(model, formula)
    return f.two_qubit(N), f.cnot(N)


def steps_for_budget(model: str, formula: str, budget: int) -> int:
    """Largest ``N`` whose two-qubit depth fits in ``budget``; 0 if even one step does not."""
    f = lookup(model, formula)
    if budget < f.two_qubit(1):
        return 0
    return (budget - f.b) // f.a


def budget_table(model: str, budget: int | None = None) -> list[dict]:
    budget = TABLE_BUDGETS[model] if budget is None else budget
    rows = []
    for name in registered_formulas(model):
        f = lookup(model, name)
        n = steps_for_budget(model, name, budget)
        rows.append(
            {
                "model": model,
                "formula": name,
                "two_qubit": f"{f.a}N+{f.b}" if f.b else f"{f.a}N",
                "cnot": f"{f.c}N+{f.d}" if f.d else f"{f.c}N",
                "budget": budget,
                "steps": n,
                "note": "" if n else "exceeds budget",
            }
        )
    return rows
