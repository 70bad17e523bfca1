"""Dense exact evolution and the two error metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .pauli_core import DENSE_NORM_CAP, PauliSum

DENSE_CAP = DENSE_NORM_CAP


class CapabilityError(RuntimeError):
    """Raised when a computation exceeds what an engine can handle."""


def check_dense_cap(n_qubits: int, cap: int = DENSE_CAP) -> None:
    if n_qubits > cap:
        raise CapabilityError(f"{n_qubits} qubits exceeds dense cap {cap}")


def hermitian_eigh(h: PauliSum, cap: int = DENSE_CAP) -> tuple[np.ndarray, np.ndarray | None]:
    """Eigen-decomposition of ``h``; diagonal operators return ``(diag, None)``."""
    if not h.is_hermitian():
        raise ValueError("operator is not Hermitian")
    check_dense_cap(h.n_qubits, cap)
    if h.is_diagonal():
        return h.diagonal().real, None
    return np.linalg.eigh(h.to_dense())


def unitary_from_eigh(eig: tuple[np.ndarray, np.ndarray | None], t: float) -> np.ndarray:
    w, v = eig
    phases = np.exp(-1j * t * w)
    if v is None:
        return np.diag(phases)
    return (v * phases) @ v.conj().T


def expm_hermitian(h: PauliSum, t: float, cap: int = DENSE_CAP) -> np.ndarray:
    """``exp(-i t H)`` as a dense matrix."""
    return unitary_from_eigh(hermitian_eigh(h, cap), t)


def _check_pair(u, v):
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")


def spectral_error(u: np.ndarray, v: np.ndarray) -> float:
    """Operator-norm distance ``||u - v||`` for unitaries, from eigenvalues of ``u^dag v``."""
    _check_pair(u, v)
    lam = np.linalg.eigvals(u.conj().T @ v)
    return float(np.max(np.abs(1 - lam)))


def avg_infidelity(u_exact: np.ndarray, v: np.ndarray) -> float:
    """``1 - mean_x |<x|u_exact^dag v|x>|^2`` over computational basis states."""
    _check_pair(u_exact, v)
    diag = np.einsum("ij,ij->j", u_exact.conj(), v)
    return float(max(0.0, 1.0 - np.mean(np.abs(diag) ** 2)))


METRICS = {"worst_case": spectral_error, "avg_infidelity": avg_infidelity}


@dataclass(frozen=True)
class ErrorReport:
    metric: str
    value: float
    n_qubits: int
    wall_time: float


def error_report(metric: str, u_exact: np.ndarray, v: np.ndarray) -> ErrorReport:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    start = time.perf_counter()
    value = METRICS[metric](u_exact, v)
    n = int(round(np.log2(u_exact.shape[0])))
    return ErrorReport(metric, value, n, time.perf_counter() - start)
