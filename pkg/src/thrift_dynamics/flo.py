"""Free-fermion (Majorana rotation) engine for quadratic qubit Hamiltonians.

Majorana operators follow ``g_{2j} = Z_0..Z_{j-1} Y_j`` and
``g_{2j+1} = Z_0..Z_{j-1} X_j``, so ``Z_j = i g_{2j} g_{2j+1}``. A quadratic
Hamiltonian is ``H = (i/4) sum m_ab g_a g_b + c0`` with real antisymmetric ``m``.
For ``U = exp(-i tau H)`` the Heisenberg action is ``U^dag g U = expm(tau m) g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .formulas import Schedule
from .models import PartitionedHamiltonian
from .pauli_core import PauliString, PauliSum, pauli_mul

ENUMERATE_MAX_MODES = 16


def majorana(L: int, k: int) -> PauliString:
    j, odd = divmod(k, 2)
    ops = {q: "Z" for q in range(j)}
    ops[j] = "X" if odd else "Y"
    return PauliString.from_ops(ops, L)


@lru_cache(maxsize=64)
def bilinear_table(L: int) -> dict[PauliString, tuple[int, int, int]]:
    """Map each string ``P = s * i g_a g_b`` (``a < b``) to ``(a, b, s)``."""
    gammas = [majorana(L, k) for k in range(2 * L)]
    table = {}
    for a in range(2 * L):
        for b in range(a + 1, 2 * L):
            ph, p = pauli_mul(gammas[a], gammas[b])
            s = 1j * ph
            table[p] = (a, b, int(round(s.real)))
    return table


def majorana_decompose(h: PauliSum) -> tuple[np.ndarray, float]:
    """Antisymmetric ``m`` and constant ``c0`` with ``h = (i/4) g^T m g + c0``."""
    L = h.n_qubits
    table = bilinear_table(L)
    m = np.zeros((2 * L, 2 * L))
    c0 = 0.0
    for p, c in h.terms.items():
        if abs(c.imag) > 1e-12:
            raise ValueError("generator must be Hermitian")
        if p.is_identity():
            c0 += c.real
            continue
        try:
            a, b, s = table[p]
        except KeyError:
            raise ValueError(f"term {p} is not quadratic in Majorana operators") from None
        m[a, b] += 2 * s * c.real
        m[b, a] -= 2 * s * c.real
    return m, c0


def quadratic_generator(h: PauliSum) -> np.ndarray:
    return majorana_decompose(h)[0]


@dataclass(frozen=True)
class GaussianUnitary:
    """Majorana rotation ``R`` plus the global phase from constant terms.

    ``parity_sign`` is the lift chosen for ``R``; products of exponentials are
    always lifted continuously from the identity, so it stays ``+1`` and the
    residual two-fold ambiguity is resolved when errors are computed.
    """

    L: int
    R: np.ndarray
    phase: float = 0.0
    parity_sign: int = 1

    @classmethod
    def identity(cls, L: int) -> "GaussianUnitary":
        return cls(L, np.eye(2 * L))

    def then(self, other: "GaussianUnitary") -> "GaussianUnitary":
        """Operator product ``self @ other``."""
        return GaussianUnitary(
            self.L, self.R @ other.R, self.phase + other.phase, self.parity_sign * other.parity_sign
        )

    def power(self, n: int) -> "GaussianUnitary":
        return GaussianUnitary(self.L, np.linalg.matrix_power(self.R, n), n * self.phase, self.parity_sign**n)


class _GeneratorCache:
    def __init__(self):
        self._store: dict[int, tuple[PauliSum, np.ndarray, float]] = {}

    def get(self, g: PauliSum):
        hit = self._store.get(id(g))
        if hit is None or hit[0] is not g:
            m, c0 = majorana_decompose(g)
            hit = (g, m, c0)
            self._store[id(g)] = hit
        return hit[1], hit[2]


def flo_exp(g: PauliSum, tau: float) -> GaussianUnitary:
    m, c0 = majorana_decompose(g)
    return GaussianUnitary(g.n_qubits, expm(tau * m), -tau * c0)


def flo_factors(factors: Sequence[tuple[PauliSum, float]]) -> GaussianUnitary:
    """Product of ``exp(-i tau G)`` factors, leftmost first."""
    if not factors:
        raise ValueError("empty factor list")
    L = factors[0][0].n_qubits
    cache = _GeneratorCache()
    R = np.eye(2 * L)
    phase = 0.0
    for g, tau in factors:
        m, c0 = cache.get(g)
        R = R @ expm(tau * m)
        phase -= tau * c0
    return GaussianUnitary(L, R, phase)


def flo_evaluate_schedule(s: Schedule, part: PartitionedHamiltonian | None, T: float, N: int) -> GaussianUnitary:
    """Rotation for ``step(T/N)^N``."""
    if N < 1:
        raise ValueError("N must be positive")
    if not s.steps:
        return GaussianUnitary.identity(s.n_qubits)
    return flo_factors(s.factors(T / N)).power(N)


def flo_exact(part: PartitionedHamiltonian, T: float) -> GaussianUnitary:
    return flo_exp(part.full, T)


def relative_angles(g_exact: GaussianUnitary, g_apx: GaussianUnitary) -> np.ndarray:
    """Canonical angles ``theta_k`` in ``[0, pi]`` of ``R_exact^T R_apx``."""
    if g_exact.L != g_apx.L:
        raise ValueError("mode-count mismatch")
    W = g_exact.R.T @ g_apx.R
    ang = np.sort(np.abs(np.angle(np.linalg.eigvals(W))))
    return ang[::2]


def _phase_set(theta: np.ndarray) -> np.ndarray:
    sums = np.zeros(1)
    for t in theta:
        sums = np.concatenate([sums + t / 2, sums - t / 2])
    return sums


def _greedy_phases(theta: np.ndarray, chi: float) -> np.ndarray:
    # candidate total phases chi + sum sigma_k theta_k / 2 that land nearest to pi and to 0
    out = []
    for target in (np.pi, 0.0, -np.pi):
        acc = chi - theta.sum() / 2
        for t in sorted(theta, reverse=True):
            if abs(acc + t - target) < abs(acc - target):
                acc += t
        out.append(acc - chi)
    out += [theta.sum() / 2, -theta.sum() / 2]
    return np.array(out)


def _sign_errors(theta: np.ndarray, chi: float) -> tuple[float, float]:
    if len(theta) <= ENUMERATE_MAX_MODES:
        phases = _phase_set(theta)
    else:
        phases = _greedy_phases(theta, chi)
    z = np.exp(1j * (chi + phases))
    return float(np.max(np.abs(1 - z))), float(np.max(np.abs(1 + z)))


def flo_spectral_error(g_exact: GaussianUnitary, g_apx: GaussianUnitary) -> float:
    """Worst-case error ``||U_exact - U_apx||`` from the relative Majorana rotation.

    The unitary is fixed by its rotation only up to an overall sign, so the
    smaller of the two candidates is returned. Whenever the true error is below
    ``sqrt(2)`` this is exact, since the other sign then gives a value above ``sqrt(2)``.
    """
    theta = relative_angles(g_exact, g_apx)
    chi = g_apx.phase - g_exact.phase
    return min(_sign_errors(theta, chi))


def flo_spectral_error_pessimistic(g_exact: GaussianUnitary, g_apx: GaussianUnitary) -> float:
    theta = relative_angles(g_exact, g_apx)
    chi = g_apx.phase - g_exact.phase
    return max(_sign_errors(theta, chi))


def check_flo_capable(part: PartitionedHamiltonian) -> None:
    if part.spec.kind != "tfim_1d":
        raise ValueError("the free-fermion engine supports only the 1D transverse-field Ising chain")
