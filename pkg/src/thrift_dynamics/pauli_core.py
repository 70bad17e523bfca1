"""Pauli-string algebra on a symplectic bitmask encoding.

A :class:`PauliString` on ``n`` qubits is stored as two integers ``x`` and ``z``;
bit ``j`` of ``x`` (``z``) marks an X (Z) action on qubit ``j`` and both bits set
mean Y. Strings always denote the Hermitian tensor product of single-qubit
Paulis, i.e. ``P = i^{|x & z|} X^x Z^z``.

Dense matrices use little-endian basis indexing: qubit ``j`` is bit ``j`` of the
computational-basis index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

PRUNE_TOL = 1e-14
DENSE_NORM_CAP = 12

_PHASES = (1, 1j, -1, -1j)
_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _parity_signs(cols: np.ndarray, z: int) -> np.ndarray:
    # (-1)^{popcount(c & z)} for each basis index c
    return 1 - 2 * (np.bitwise_count(cols & z) & 1).astype(np.int64)


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    x: int
    z: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if (self.x | self.z) >> self.n_qubits:
            raise ValueError("mask has bits beyond n_qubits")

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a label such as ``"XIZY"``; character ``j`` acts on qubit ``j``."""
        x = z = 0
        for j, ch in enumerate(label.upper()):
            try:
                bx, bz = _LABEL_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli label character {ch!r}") from None
            x |= bx << j
            z |= bz << j
        return cls(len(label), x, z)

    @classmethod
    def from_ops(cls, ops: Mapping[int, str], n_qubits: int) -> "PauliString":
        """Build from a sparse ``{qubit: "X"|"Y"|"Z"}`` mapping."""
        x = z = 0
        for q, ch in ops.items():
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range")
            bx, bz = _LABEL_BITS[ch.upper()]
            x |= bx << q
            z |= bz << q
        return cls(n_qubits, x, z)

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.support)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def is_diagonal(self) -> bool:
        return self.x == 0

    def qubits(self) -> list[int]:
        s = self.support
        return [j for j in range(self.n_qubits) if (s >> j) & 1]

    def commutes_with(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def label(self) -> str:
        chars = []
        for j in range(self.n_qubits):
            chars.append("IXZY"[((self.x >> j) & 1) | (((self.z >> j) & 1) << 1)])
        return "".join(chars)

    def __str__(self) -> str:
        return self.label()

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        cols = np.arange(dim, dtype=np.int64)
        rows = cols ^ self.x
        signs = _parity_signs(cols, self.z)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[rows, cols] = _PHASES[_popcount(self.x & self.z) % 4] * signs
        return mat


def pauli_mul(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a @ b == phase * c`` and phase in {±1, ±i}."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("qubit-count mismatch")
    x3 = a.x ^ b.x
    z3 = a.z ^ b.z
    k = (
        _popcount(a.x & a.z)
        + _popcount(b.x & b.z)
        + 2 * _popcount(a.z & b.x)
        - _popcount(x3 & z3)
    ) % 4
    return _PHASES[k], PauliString(a.n_qubits, x3, z3)


@dataclass(frozen=True)
class PauliSum:
    """Immutable weighted sum of Pauli strings.

    Coefficients with magnitude below ``tol`` are dropped on construction.
    """

    n_qubits: int
    terms: Mapping[PauliString, complex] = field(default_factory=dict)
    tol: float = PRUNE_TOL

    def __post_init__(self):
        clean = {}
        for p, c in self.terms.items():
            if p.n_qubits != self.n_qubits:
                raise ValueError("qubit-count mismatch")
            c = complex(c)
            if abs(c) >= self.tol:
                clean[p] = c
        object.__setattr__(self, "terms", MappingProxyType(clean))

    @classmethod
    def from_terms(
        cls, n_qubits: int, items: Iterable[tuple[PauliString, complex]], tol: float = PRUNE_TOL
    ) -> "PauliSum":
        acc: dict[PauliString, complex] = {}
        for p, c in items:
            acc[p] = acc.get(p, 0.0) + c
        return cls(n_qubits, acc, tol)

    @classmethod
    def from_labels(cls, items: Mapping[str, complex]) -> "PauliSum":
        items = dict(items)
        n = len(next(iter(items)))
        return cls.from_terms(n, ((PauliString.from_label(k), v) for k, v in items.items()))

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits, {})

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and dict(self.terms) == dict(other.terms)

    def __hash__(self) -> int:
        return hash((self.n_qubits, frozenset(self.terms.items())))

    def sorted_terms(self) -> list[tuple[PauliString, complex]]:
        return sorted(self.terms.items(), key=lambda kv: (kv[0].x, kv[0].z))

    def coefficient(self, p: PauliString) -> complex:
        return self.terms.get(p, 0.0)

    def _check(self, other: "PauliSum"):
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit-count mismatch")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc = dict(self.terms)
        for p, c in other.terms.items():
            acc[p] = acc.get(p, 0.0) + c
        return PauliSum(self.n_qubits, acc, self.tol)

    def __neg__(self) -> "PauliSum":
        return self.scale(-1.0)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def scale(self, s: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, {p: s * c for p, c in self.terms.items()}, self.tol)

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return self.matmul(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def matmul(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc: dict[PauliString, complex] = {}
        for pa, ca in self.terms.items():
            for pb, cb in other.terms.items():
                ph, pc = pauli_mul(pa, pb)
                acc[pc] = acc.get(pc, 0.0) + ph * ca * cb
        return PauliSum(self.n_qubits, acc, self.tol)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {p: c.conjugate() for p, c in self.terms.items()}, self.tol)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= atol for c in self.terms.values())

    def is_diagonal(self) -> bool:
        return all(p.is_diagonal() for p in self.terms)

    def real(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {p: c.real for p, c in self.terms.items()}, self.tol)

    def identity_coefficient(self) -> complex:
        return self.terms.get(PauliString.identity(self.n_qubits), 0.0)

    @property
    def support(self) -> int:
        s = 0
        for p in self.terms:
            s |= p.support
        return s

    def one_norm(self) -> float:
        return float(sum(abs(c) for c in self.terms.values()))

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        cols = np.arange(dim, dtype=np.int64)
        mat = np.zeros((dim, dim), dtype=complex)
        for p, c in self.terms.items():
            signs = _parity_signs(cols, p.z)
            mat[cols ^ p.x, cols] += c * _PHASES[_popcount(p.x & p.z) % 4] * signs
        return mat

    def diagonal(self) -> np.ndarray:
        """Diagonal of the dense image; exact for diagonal sums."""
        dim = 1 << self.n_qubits
        cols = np.arange(dim, dtype=np.int64)
        out = np.zeros(dim, dtype=complex)
        for p, c in self.terms.items():
            if p.x == 0:
                out += c * _parity_signs(cols, p.z)
        return out

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{p}" for p, c in self.sorted_terms())
        return f"PauliSum[{self.n_qubits}]({body or '0'})"


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``ab - ba``; only anticommuting string pairs contribute ``2 * phase * product``."""
    a._check(b)
    acc: dict[PauliString, complex] = {}
    for pa, ca in a.terms.items():
        for pb, cb in b.terms.items():
            if pa.commutes_with(pb):
                continue
            ph, pc = pauli_mul(pa, pb)
            acc[pc] = acc.get(pc, 0.0) + 2 * ph * ca * cb
    return PauliSum(a.n_qubits, acc, a.tol)


def spectral_norm(op: PauliSum, max_qubits: int = DENSE_NORM_CAP) -> float:
    """Spectral norm of a Hermitian or anti-Hermitian sum, computed densely."""
    if op.n_qubits > max_qubits:
        raise ValueError(f"{op.n_qubits} qubits exceeds dense cap {max_qubits}")
    if not op:
        return 0.0
    if op.is_hermitian():
        mat = op.to_dense()
    elif all(abs(c.real) <= 1e-12 for c in op.terms.values()):
        mat = (op.scale(1j)).to_dense()
    else:
        return float(np.linalg.norm(op.to_dense(), 2))
    return float(np.max(np.abs(np.linalg.eigvalsh(mat))))


@dataclass(frozen=True)
class TermLayering:
    """Ordered layers of Pauli strings grouped into disjoint qubit blocks.

    ``blocks[i]`` lists ``(support_mask, strings)`` pairs for layer ``i``; the
    supports inside one layer are pairwise disjoint and no wider than
    ``block_size`` qubits.
    """

    block_size: int
    blocks: tuple[tuple[tuple[int, tuple[PauliString, ...]], ...], ...]

    @property
    def layers(self) -> list[list[PauliString]]:
        return [[p for _, strings in layer for p in strings] for layer in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)

    def split(self, h: PauliSum) -> list[PauliSum]:
        """Restrict ``h`` to each layer's strings."""
        return [
            PauliSum(h.n_qubits, {p: h.terms[p] for p in layer if p in h.terms}, h.tol)
            for layer in self.layers
        ]


def group_layers(h: PauliSum, block_size: int) -> TermLayering:
    """Greedy colouring of the term-overlap graph into block-disjoint layers.

    Terms are visited in lexicographic ``(x, z)`` mask order. Each term joins the
    first layer where merging it with the blocks it overlaps keeps the merged
    support within ``block_size`` qubits. Identity terms are skipped.
    """
    if block_size < 1:
        raise ValueError("block_size must be positive")
    layers: list[list[list]] = []  # layer -> [[support, [strings]], ...]
    for p, _ in h.sorted_terms():
        if p.is_identity():
            continue
        if p.weight > block_size:
            raise ValueError(f"term {p} has support {p.weight} > block_size {block_size}")
        for layer in layers:
            hit = [blk for blk in layer if blk[0] & p.support]
            merged = p.support
            for blk in hit:
                merged |= blk[0]
            if _popcount(merged) <= block_size:
                strings = [p]
                for blk in hit:
                    strings = blk[1] + strings
                    layer.remove(blk)
                layer.append([merged, strings])
                break
        else:
            layers.append([[p.support, [p]]])
    frozen = tuple(
        tuple(sorted(((s, tuple(strs)) for s, strs in layer), key=lambda b: b[0]))
        for layer in layers
    )
    return TermLayering(block_size, frozen)


def nested_commutator_sum(parts: list[PauliSum], p: int, max_qubits: int = DENSE_NORM_CAP) -> float:
    """Sum of spectral norms of all ``p``-fold nested commutators of ``parts``.

    Every ordered index tuple ``(g_1, ..., g_{p+1})`` contributes
    ``||[H_{g_{p+1}}, ... [H_{g_2}, H_{g_1}] ...]||``.
    """
    if p < 1 or p > 2:
        raise ValueError("p must be 1 or 2")
    if not parts:
        return 0.0
    n = parts[0].n_qubits
    if any(q.n_qubits != n for q in parts):
        raise ValueError("qubit-count mismatch")
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds dense cap {max_qubits}")
    total = 0.0
    for idx in product(range(len(parts)), repeat=p + 1):
        acc = parts[idx[0]]
        for g in idx[1:]:
            acc = commutator(parts[g], acc)
            if not acc:
                break
        if acc:
            total += spectral_norm(acc, max_qubits)
    return total
