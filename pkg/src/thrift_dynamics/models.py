"""Benchmark lattice Hamiltonians split as ``H = H0 + alpha * sum_g H1^g``.

All lattices use open boundaries. On a 2D grid qubit ``x + Lx * y`` sits at
column ``x`` and row ``y``. The Fermi-Hubbard chain puts spin-up modes on
qubits ``0..L-1`` and spin-down modes on ``L..2L-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .pauli_core import PauliString, PauliSum, TermLayering, group_layers

MODEL_KINDS = ("tfim_1d", "tfim_2d", "heisenberg_1d", "fermi_hubbard_1d")
PRNG_NAME = "numpy.PCG64"

_RELEVANT = {
    "tfim_1d": {"h", "J"},
    "tfim_2d": {"h", "J"},
    "heisenberg_1d": {"h", "J"},
    "fermi_hubbard_1d": {"t_hop", "U"},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    dims: tuple[int, ...]
    h: float | None = None
    J: float | None = None
    t_hop: float | None = None
    U: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        want = 2 if self.kind == "tfim_2d" else 1
        if len(dims) != want:
            raise ValueError(f"{self.kind} needs {want} dimension(s), got {dims}")
        if any(d <= 0 for d in dims):
            raise ValueError("dimensions must be positive")
        given = {k for k in ("h", "J", "t_hop", "U") if getattr(self, k) is not None}
        if given != _RELEVANT[self.kind]:
            raise ValueError(
                f"{self.kind} takes couplings {sorted(_RELEVANT[self.kind])}, got {sorted(given)}"
            )

    @property
    def n_qubits(self) -> int:
        n = int(np.prod(self.dims))
        return 2 * n if self.kind == "fermi_hubbard_1d" else n

    @property
    def alpha(self) -> float:
        return -self.t_hop if self.kind == "fermi_hubbard_1d" else self.J

    def with_alpha(self, alpha: float) -> "ModelSpec":
        """Copy with the perturbation strength set to ``alpha``."""
        if self.kind == "fermi_hubbard_1d":
            return replace(self, t_hop=-float(alpha))
        return replace(self, J=float(alpha))

    def with_size(self, *dims: int) -> "ModelSpec":
        return replace(self, dims=tuple(dims))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dims": list(self.dims)}
        for k in sorted(_RELEVANT[self.kind]):
            out[k] = getattr(self, k)
        if self.kind == "heisenberg_1d":
            out["rng_seed"] = self.rng_seed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        allowed = {"kind", "dims", "h", "J", "t_hop", "U", "rng_seed"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown model keys {sorted(unknown)}")
        return cls(
            kind=d["kind"],
            dims=tuple(d["dims"]),
            h=d.get("h"),
            J=d.get("J"),
            t_hop=d.get("t_hop"),
            U=d.get("U"),
            rng_seed=int(d.get("rng_seed", 0)),
        )


@dataclass(frozen=True)
class PartitionedHamiltonian:
    spec: ModelSpec
    h0: PauliSum
    alpha: float
    h1_groups: tuple[tuple[str, PauliSum], ...]
    block_size_for_thrift: int
    fields: tuple[float, ...] = ()
    full: PauliSum = field(init=False)

    def __post_init__(self):
        acc = self.h0
        for _, g in self.h1_groups:
            acc = acc + g.scale(self.alpha)
        object.__setattr__(self, "full", acc)

    @property
    def n_qubits(self) -> int:
        return self.h0.n_qubits

    @property
    def n_groups(self) -> int:
        return len(self.h1_groups)

    @property
    def h1(self) -> PauliSum:
        acc = PauliSum.zero(self.n_qubits)
        for _, g in self.h1_groups:
            acc = acc + g
        return acc

    def scaled_groups(self) -> list[PauliSum]:
        return [g.scale(self.alpha) for _, g in self.h1_groups]

    def group_layering(self, label: str) -> TermLayering:
        """Blocks of ``H0 + alpha * H1^label`` at the THRIFT block size."""
        g = dict(self.h1_groups)[label]
        return group_layers(self.h0 + g.scale(self.alpha), self.block_size_for_thrift)

    def with_alpha(self, alpha: float) -> "PartitionedHamiltonian":
        return replace(self, spec=self.spec.with_alpha(alpha), alpha=float(alpha))


def random_fields(L: int, h: float, seed: int) -> list[float]:
    """On-site fields drawn uniformly from ``[-h, h]`` with a seeded PCG64 generator."""
    if h == 0:
        return [0.0] * L
    rng = np.random.default_rng(seed)
    return [float(v) for v in rng.uniform(-h, h, size=L)]


def _zz(n, i, j):
    return PauliString.from_ops({i: "Z", j: "Z"}, n)


def _pair(n, i, j, a, b):
    return PauliString.from_ops({i: a, j: b}, n)


def _bond_group(n, bonds, ops, weight=1.0) -> PauliSum:
    return PauliSum.from_terms(
        n, ((_pair(n, i, j, a, a), weight) for i, j in bonds for a in ops)
    )


def _drop_empty(groups):
    return tuple((lbl, g) for lbl, g in groups if len(g))


def build_model(spec: ModelSpec) -> PartitionedHamiltonian:
    n = spec.n_qubits
    if spec.kind == "tfim_1d":
        (L,) = spec.dims
        h0 = PauliSum.from_terms(n, ((PauliString.from_ops({j: "Z"}, n), spec.h) for j in range(L)))
        groups = (
            ("even", _bond_group(n, [(j, j + 1) for j in range(0, L - 1, 2)], "X")),
            ("odd", _bond_group(n, [(j, j + 1) for j in range(1, L - 1, 2)], "X")),
        )
        return PartitionedHamiltonian(spec, h0, spec.J, _drop_empty(groups), 2)

    if spec.kind == "tfim_2d":
        Lx, Ly = spec.dims
        q = lambda x, y: x + Lx * y  # noqa: E731
        h0 = PauliSum.from_terms(n, ((PauliString.from_ops({j: "Z"}, n), spec.h) for j in range(n)))
        h_even = [(q(x, y), q(x + 1, y)) for y in range(Ly) for x in range(0, Lx - 1, 2)]
        h_odd = [(q(x, y), q(x + 1, y)) for y in range(Ly) for x in range(1, Lx - 1, 2)]
        v_even = [(q(x, y), q(x, y + 1)) for y in range(0, Ly - 1, 2) for x in range(Lx)]
        v_odd = [(q(x, y), q(x, y + 1)) for y in range(1, Ly - 1, 2) for x in range(Lx)]
        groups = (
            ("h_even", _bond_group(n, h_even, "X")),
            ("h_odd", _bond_group(n, h_odd, "X")),
            ("v_even", _bond_group(n, v_even, "X")),
            ("v_odd", _bond_group(n, v_odd, "X")),
        )
        return PartitionedHamiltonian(spec, h0, spec.J, _drop_empty(groups), 2)

    if spec.kind == "heisenberg_1d":
        (L,) = spec.dims
        fields = random_fields(L, spec.h, spec.rng_seed)
        h0 = PauliSum.from_terms(
            n, ((PauliString.from_ops({j: "Z"}, n), fields[j]) for j in range(L))
        )
        groups = (
            ("even", _bond_group(n, [(j, j + 1) for j in range(0, L - 1, 2)], "XYZ")),
            ("odd", _bond_group(n, [(j, j + 1) for j in range(1, L - 1, 2)], "XYZ")),
        )
        return PartitionedHamiltonian(spec, h0, spec.J, _drop_empty(groups), 2, tuple(fields))

    (L,) = spec.dims  # fermi_hubbard_1d
    ident = PauliString.identity(n)
    items = []
    for i in range(L):
        a, b = i, i + L
        items += [
            (ident, spec.U / 4),
            (PauliString.from_ops({a: "Z"}, n), -spec.U / 4),
            (PauliString.from_ops({b: "Z"}, n), -spec.U / 4),
            (_zz(n, a, b), spec.U / 4),
        ]
    h0 = PauliSum.from_terms(n, items)

    def hop(start):
        bonds = []
        for i in range(start, L - 1, 2):
            bonds += [(i, i + 1), (i + L, i + 1 + L)]
        return _bond_group(n, bonds, "XY", 0.5)

    groups = (("even", hop(0)), ("odd", hop(1)))
    return PartitionedHamiltonian(spec, h0, -spec.t_hop, _drop_empty(groups), 4)


def number_operator(n_qubits: int) -> PauliSum:
    """Total occupation ``sum_j (I - Z_j) / 2``."""
    ident = PauliString.identity(n_qubits)
    items = [(ident, n_qubits / 2)]
    items += [(PauliString.from_ops({j: "Z"}, n_qubits), -0.5) for j in range(n_qubits)]
    return PauliSum.from_terms(n_qubits, items)
