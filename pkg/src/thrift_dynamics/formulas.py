"""Product formulas compiled to schedules, plus dense evaluation and THRIFT bounds.

A :class:`Schedule` is a list of ``(generator, multiplier)`` steps. The step at
time ``t`` is the operator product ``exp(-i m_1 t G_1) exp(-i m_2 t G_2) ...``
so the first entry is the leftmost factor and acts last on a state.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exact import DENSE_CAP, check_dense_cap, expm_hermitian, hermitian_eigh, unitary_from_eigh
from .models import PartitionedHamiltonian
from .pauli_core import PauliSum

FORMULA_KINDS = (
    "trotter1",
    "trotter2",
    "trotter4",
    "trotter8_opt",
    "omelyan_small_a4",
    "thrift1",
    "thrift2",
    "thrift4",
    "thrift8_opt",
    "magnus_thrift1",
    "magnus_thrift2",
)
SCHEDULE_KINDS = FORMULA_KINDS[:9]
ORDER8_KINDS = ("trotter8_opt", "thrift8_opt")
NOMINAL_ORDER = {
    "trotter1": 1, "trotter2": 2, "trotter4": 4, "trotter8_opt": 8,
    "omelyan_small_a4": 4, "thrift1": 1, "thrift2": 2, "thrift4": 4, "thrift8_opt": 8,
    "magnus_thrift1": 1, "magnus_thrift2": 2,
}

SUZUKI_S2 = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))

OMELYAN_A1 = 0.5316386245813512
OMELYAN_B1 = -0.04375142191737413
OMELYAN_A2 = -0.3086019704406066
OMELYAN_B2 = 0.5 - OMELYAN_B1
OMELYAN_A3 = 1.0 - 2.0 * (OMELYAN_A1 + OMELYAN_A2)

OMEGA8_ENV = "THRIFT_OMEGA8_FILE"
OMEGA8_DEFAULT = Path(__file__).with_name("data") / "omega8.txt"
_MERGE_TOL = 1e-15


class MissingCoefficientsError(LookupError):
    """The eighth-order composition coefficients are not available."""


@dataclass(frozen=True)
class Schedule:
    kind: str
    generators: tuple[PauliSum, ...]
    labels: tuple[str, ...]
    steps: tuple[tuple[int, float], ...]
    _eig_cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def n_qubits(self) -> int:
        return self.generators[0].n_qubits

    def __len__(self) -> int:
        return len(self.steps)

    def factors(self, dt: float) -> list[tuple[PauliSum, float]]:
        """Operator factors ``(G, tau)`` meaning ``exp(-i tau G)``, leftmost first."""
        return [(self.generators[g], m * dt) for g, m in self.steps]

    def total_duration(self, gen: int) -> float:
        return sum(m for g, m in self.steps if g == gen)

    def eig(self, gen: int, cap: int = DENSE_CAP):
        if gen not in self._eig_cache:
            self._eig_cache[gen] = hermitian_eigh(self.generators[gen], cap)
        return self._eig_cache[gen]

    def describe(self) -> list[tuple[str, float]]:
        return [(self.labels[g], m) for g, m in self.steps]


class _Builder:
    def __init__(self, kind: str):
        self.kind = kind
        self.gens: list[PauliSum] = []
        self.labels: list[str] = []

    def gen(self, label: str, op: PauliSum) -> int:
        if label in self.labels:
            return self.labels.index(label)
        self.gens.append(op)
        self.labels.append(label)
        return len(self.gens) - 1

    def build(self, steps: Sequence[tuple[int, float]]) -> Schedule:
        return Schedule(self.kind, tuple(self.gens), tuple(self.labels), tuple(merge_steps(steps)))


def merge_steps(steps: Sequence[tuple[int, float]]) -> list[tuple[int, float]]:
    """Fuse adjacent factors with equal generators and drop zero durations."""
    out: list[list] = []
    for g, m in steps:
        if out and out[-1][0] == g:
            out[-1][1] += m
            if abs(out[-1][1]) < _MERGE_TOL:
                out.pop()
        elif abs(m) >= _MERGE_TOL:
            out.append([g, m])
    return [(g, m) for g, m in out]


def _scaled(steps, s):
    return [(g, m * s) for g, m in steps]


def symmetrize(steps):
    """Second-order step from a first-order one: ``U(t/2) reverse(U)(t/2)``."""
    half = _scaled(steps, 0.5)
    return merge_steps(half + half[::-1])


def compose_order4(s2):
    s = SUZUKI_S2
    outer = _scaled(s2, s)
    return merge_steps(outer + outer + _scaled(s2, 1 - 4 * s) + outer + outer)


def compose_order8(s2, omega: Sequence[float]):
    w = list(omega)
    if len(w) != 8:
        raise ValueError("order-8 composition needs omega_0..omega_7")
    seq = []
    for wj in w[7:0:-1]:
        seq += _scaled(s2, wj)
    seq += _scaled(s2, w[0])
    for wj in w[1:]:
        seq += _scaled(s2, wj)
    return merge_steps(seq)


def load_omega8(path: str | os.PathLike | None = None) -> list[float]:
    """Read ``omega_0..omega_7`` from a text file, one number per line.

    The file may hold either the 8 distinct values or the 15-entry palindrome
    ``omega_7..omega_1, omega_0, omega_1..omega_7``. Lines starting with ``#`` are
    ignored. The path defaults to ``$THRIFT_OMEGA8_FILE`` and then to the
    packaged ``data/omega8.txt``.
    """
    if path is None:
        path = os.environ.get(OMEGA8_ENV) or OMEGA8_DEFAULT
    path = Path(path)
    if not path.is_file():
        raise MissingCoefficientsError(
            f"eighth-order coefficient file not found: {path} "
            f"(set {OMEGA8_ENV} or pass omega explicitly)"
        )
    vals = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            vals.append(float(line))
    if len(vals) == 15:
        if not np.allclose(vals[:7], vals[8:][::-1], atol=1e-14):
            raise ValueError("15-value omega table must be palindromic")
        vals = vals[7:]
    if len(vals) != 8:
        raise ValueError(f"omega table must hold 8 or 15 values, found {len(vals)}")
    return vals


def _resolve_omega(omega):
    return list(omega) if omega is not None else load_omega8()


def _check_order(order):
    if order not in (1, 2, 4, 8):
        raise ValueError(f"unsupported order {order}")


def _lift(order, first, omega):
    if order == 1:
        return first
    s2 = symmetrize(first)
    if order == 2:
        return s2
    if order == 4:
        return compose_order4(s2)
    return compose_order8(s2, _resolve_omega(omega))


def make_trotter(part: PartitionedHamiltonian, order: int, omega=None) -> Schedule:
    _check_order(order)
    if part.n_groups < 1:
        raise ValueError("need at least one perturbation group")
    if order == 8:
        omega = _resolve_omega(omega)
    b = _Builder(f"trotter{order}" if order < 8 else "trotter8_opt")
    h0 = b.gen("H0", part.h0)
    groups = [b.gen(f"a*H1[{lbl}]", g.scale(part.alpha)) for lbl, g in part.h1_groups]
    if order == 1:
        return b.build([(g, 1.0) for g in groups[::-1]] + [(h0, 1.0)])
    # symmetric base h_1 .. h_{K-1}, H0, h_K: the last group sits whole in the middle of
    # the palindrome and the first group merges across consecutive steps
    base = [(g, 1.0) for g in groups[:-1]] + [(h0, 1.0), (groups[-1], 1.0)]
    return b.build(_lift(order, base, omega))


def thrift_first_order(b: _Builder, part: PartitionedHamiltonian) -> list[tuple[int, float]]:
    h0 = b.gen("H0", part.h0)
    seq = [(h0, 1.0)]
    for lbl, g in part.h1_groups:
        seq += [(h0, -1.0), (b.gen(f"H0+a*H1[{lbl}]", part.h0 + g.scale(part.alpha)), 1.0)]
    return merge_steps(seq)


def make_thrift(part: PartitionedHamiltonian, order: int, omega=None) -> Schedule:
    _check_order(order)
    if part.n_groups < 1:
        raise ValueError("need at least one perturbation group")
    if order == 8:
        omega = _resolve_omega(omega)
    b = _Builder(f"thrift{order}" if order < 8 else "thrift8_opt")
    return b.build(_lift(order, thrift_first_order(b, part), omega))


def omelyan_coefficients() -> tuple[list[float], list[float]]:
    """The ``c_i`` and ``d_i`` sweeps of the multi-term small-A formula."""
    a = [OMELYAN_A1, OMELYAN_A2, OMELYAN_A3, OMELYAN_A2]
    bb = [OMELYAN_B1, OMELYAN_B2, OMELYAN_B2, OMELYAN_B1]
    c, d = [], []
    prev = 0.0
    for ai, bi in zip(a, bb):
        c.append(ai - prev)
        d.append(bi - c[-1])
        prev = d[-1]
    return c, d


def make_omelyan_small_a(part: PartitionedHamiltonian) -> Schedule:
    b = _Builder("omelyan_small_a4")
    terms = [b.gen("H0", part.h0)]
    terms += [b.gen(f"a*H1[{lbl}]", g.scale(part.alpha)) for lbl, g in part.h1_groups]
    c, d = omelyan_coefficients()
    seq = []
    for ci, di in zip(c, d):
        seq += [(k, ci) for k in terms]
        seq += [(k, di) for k in terms[::-1]]
    return b.build(seq)


def make_formula(part: PartitionedHamiltonian, kind: str, omega=None) -> Schedule:
    """Schedule for any non-Magnus formula kind."""
    if kind.startswith("trotter"):
        return make_trotter(part, NOMINAL_ORDER[kind], omega)
    if kind.startswith("thrift"):
        return make_thrift(part, NOMINAL_ORDER[kind], omega)
    if kind == "omelyan_small_a4":
        return make_omelyan_small_a(part)
    raise ValueError(f"{kind!r} does not compile to a static schedule")


def apply_factor(eig, tau: float, mat: np.ndarray) -> np.ndarray:
    """``exp(-i tau G) @ mat`` from a cached eigendecomposition of ``G``."""
    w, v = eig
    phases = np.exp(-1j * tau * w)
    if v is None:
        return phases[:, None] * mat
    return v @ (phases[:, None] * (v.conj().T @ mat))


def step_unitary(s: Schedule, dt: float, cap: int = DENSE_CAP) -> np.ndarray:
    check_dense_cap(s.n_qubits, cap)
    u = np.eye(1 << s.n_qubits, dtype=complex)
    for g, m in reversed(s.steps):
        u = apply_factor(s.eig(g, cap), m * dt, u)
    return u


def evaluate_schedule(
    s: Schedule, part: PartitionedHamiltonian | None, T: float, N: int, cap: int = DENSE_CAP
) -> np.ndarray:
    """Dense ``step(T/N)^N``."""
    if N < 1:
        raise ValueError("N must be positive")
    if part is not None and part.n_qubits != s.n_qubits:
        raise ValueError("schedule and Hamiltonian disagree on qubit count")
    return np.linalg.matrix_power(step_unitary(s, T / N, cap), N)


def evaluate_factors(factors: Sequence[tuple[PauliSum, float]], cap: int = DENSE_CAP) -> np.ndarray:
    """Dense product of explicit ``(G, tau)`` factors, leftmost first."""
    if not factors:
        raise ValueError("empty factor list")
    n = factors[0][0].n_qubits
    check_dense_cap(n, cap)
    u = np.eye(1 << n, dtype=complex)
    cache: dict = {}
    for g, tau in reversed(factors):
        key = id(g)
        if key not in cache:
            cache[key] = hermitian_eigh(g, cap)
        u = apply_factor(cache[key], tau, u)
    return u


def exact_unitary(part: PartitionedHamiltonian, T: float, cap: int = DENSE_CAP) -> np.ndarray:
    return expm_hermitian(part.full, T, cap)


def _rotating_frame(h0: PauliSum, cap: int):
    w, v = hermitian_eigh(h0, cap)
    if v is None:
        return w, lambda m: m
    return w, lambda m: v.conj().T @ m @ v


def thrift_error_bound(part: PartitionedHamiltonian, t: float, quadrature_points: int = 32,
                       cap: int = DENSE_CAP) -> float:
    """Double-integral commutator bound on the first-order THRIFT error.

    Integrates ``alpha^2 int_0^t dv int_0^v ds sum_{g1<g2} ||[H1^g1(s), H1^g2(v)]||``
    with ``H1^g(s) = e^{isH0} H1^g e^{-isH0}`` on a tensor Gauss-Legendre grid
    over the triangle (``s = u v``).
    """
    check_dense_cap(part.n_qubits, cap)
    if part.n_groups < 2 or t == 0 or part.alpha == 0:
        return 0.0
    w, to_frame = _rotating_frame(part.h0, cap)
    mats = [to_frame(g.to_dense()) for _, g in part.h1_groups]
    gap = w[:, None] - w[None, :]
    x, wq = np.polynomial.legendre.leggauss(quadrature_points)
    nodes = 0.5 * (x + 1)
    weights = 0.5 * wq
    total = 0.0
    for vi, wv in zip(nodes * t, weights * t):
        frame_v = np.exp(1j * vi * gap)
        inner = 0.0
        for ui, wu in zip(nodes, weights):
            si = ui * vi
            frame_s = np.exp(1j * si * gap)
            acc = 0.0
            for a in range(len(mats)):
                ma = mats[a] * frame_s
                for bidx in range(a + 1, len(mats)):
                    mb = mats[bidx] * frame_v
                    comm = ma @ mb - mb @ ma
                    acc += np.max(np.abs(np.linalg.eigvalsh(1j * comm)))
            inner += wu * acc
        total += wv * vi * inner
    return float(part.alpha**2 * total)


def verify_time_ordered_identity(h0: PauliSum, a: PauliSum, t_a: float, t_b: float, N: int,
                                 cap: int = DENSE_CAP) -> float:
    """Distance between the closed-form and sliced time-ordered exponentials of ``A(tau)``.

    The closed form is ``e^{i t_b H0} e^{-i (t_b - t_a)(H0 + A)} e^{-i t_a H0}``. The
    sliced form multiplies ``exp(-i dt A(tau_k))`` with ``A(tau) = e^{i tau H0} A e^{-i tau H0}``
    at left endpoints ``tau_k``, later slices on the left. The gap is ``O(1/N)``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    check_dense_cap(h0.n_qubits, cap)
    eh0 = hermitian_eigh(h0, cap)
    closed = (
        unitary_from_eigh(eh0, -t_b)
        @ expm_hermitian(h0 + a, t_b - t_a, cap)
        @ unitary_from_eigh(eh0, t_a)
    )
    a_eig = hermitian_eigh(a, cap)
    dt = (t_b - t_a) / N
    step = unitary_from_eigh(a_eig, dt)
    sliced = np.eye(1 << h0.n_qubits, dtype=complex)
    for k in range(N):
        tau = t_a + k * dt
        frame = unitary_from_eigh(eh0, -tau)
        sliced = frame @ step @ frame.conj().T @ sliced
    lam = np.linalg.eigvals(closed.conj().T @ sliced)
    return float(np.max(np.abs(1 - lam)))
