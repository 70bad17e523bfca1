"""Interaction-picture Magnus integrators with exact trigonometric coefficients.

With a diagonal ``H0`` every interaction-picture coefficient is a finite sum
``sum_w c_w e^{i w t}``, so all Magnus integrals are evaluated in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, pi

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from .exact import DENSE_CAP
from .formulas import evaluate_factors
from .models import PartitionedHamiltonian
from .pauli_core import PauliString, PauliSum, group_layers, pauli_mul

FREQ_TOL = 1e-12
AMP_TOL = 1e-14


def _fkey(w: float) -> float:
    # snap frequencies onto a 1e-12 grid so near-equal values share a key
    r = round(w / FREQ_TOL) * FREQ_TOL
    return 0.0 if r == 0 else r


@dataclass(frozen=True)
class TrigPoly:
    """``f(t) = sum_w c_w exp(i w t)``."""

    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[float, complex] = {}
        for w, c in self.terms.items():
            k = _fkey(float(w))
            clean[k] = clean.get(k, 0.0) + complex(c)
        object.__setattr__(self, "terms", {w: c for w, c in clean.items() if abs(c) >= AMP_TOL})

    @classmethod
    def constant(cls, c: complex) -> "TrigPoly":
        return cls({0.0: c})

    @classmethod
    def cos(cls, w: float, amp: complex = 1.0) -> "TrigPoly":
        return cls({w: amp / 2, -w: amp / 2}) if w else cls({0.0: amp})

    @classmethod
    def sin(cls, w: float, amp: complex = 1.0) -> "TrigPoly":
        return cls({w: amp / 2j, -w: -amp / 2j}) if w else cls({})

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        acc = dict(self.terms)
        for w, c in other.terms.items():
            acc[w] = acc.get(w, 0.0) + c
        return TrigPoly(acc)

    def scale(self, s: complex) -> "TrigPoly":
        return TrigPoly({w: s * c for w, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            return self.scale(other)
        acc: dict[float, complex] = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                k = _fkey(w1 + w2)
                acc[k] = acc.get(k, 0.0) + c1 * c2
        return TrigPoly(acc)

    __rmul__ = scale

    def conj(self) -> "TrigPoly":
        return TrigPoly({-w: c.conjugate() for w, c in self.terms.items()})

    def is_real(self, tol: float = 1e-12) -> bool:
        for w, c in self.terms.items():
            partner = self.terms.get(_fkey(-w), 0.0)
            if abs(partner - c.conjugate()) > tol:
                return False
        return True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for w, c in self.terms.items():
            out = out + c * np.exp(1j * w * t)
        return out

    def frequencies(self) -> list[float]:
        return sorted(self.terms)


def trig_integrate(f: TrigPoly, a: float, b: float) -> complex:
    """Exact ``int_a^b f(t) dt``."""
    width = b - a
    mid = 0.5 * (a + b)
    total = 0.0 + 0.0j
    for w, c in f.terms.items():
        # int_a^b e^{iwt} = e^{iw mid} * width * sinc(w width / 2)
        total += c * np.exp(1j * w * mid) * width * np.sinc(w * width / (2 * pi))
    return complex(total)


@dataclass(frozen=True)
class InteractionHamiltonian:
    """``H1(t) = e^{itH0} H1 e^{-itH0} = sum_q alpha_q(t) O_q`` (without the factor alpha)."""

    entries: tuple[tuple[PauliString, TrigPoly], ...]
    origin: PartitionedHamiltonian

    @property
    def n_qubits(self) -> int:
        return self.origin.n_qubits

    def at(self, t: float) -> PauliSum:
        return PauliSum.from_terms(self.n_qubits, ((p, complex(f(t))) for p, f in self.entries))

    def strings(self) -> list[PauliString]:
        return [p for p, _ in self.entries]


def interaction_picture(part: PartitionedHamiltonian) -> InteractionHamiltonian:
    h0 = part.h0
    if not h0.is_diagonal():
        raise ValueError("interaction picture requires a diagonal (Z-type) H0")
    z_terms = [(p, c.real) for p, c in h0.sorted_terms() if not p.is_identity()]
    acc: dict[PauliString, TrigPoly] = {}
    for _, group in part.h1_groups:
        for p, w in group.sorted_terms():
            # e^{itH0} P e^{-itH0} = prod_{k: {Z_k,P}=0} (cos 2h_k t + i sin 2h_k t Z_k) P
            expansion = {p: TrigPoly.constant(w)}
            for zk, hk in z_terms:
                if zk.commutes_with(p):
                    continue
                nxt: dict[PauliString, TrigPoly] = {}
                for q, f in expansion.items():
                    nxt[q] = nxt.get(q, TrigPoly()) + f * TrigPoly.cos(2 * hk)
                    ph, zq = pauli_mul(zk, q)
                    nxt[zq] = nxt.get(zq, TrigPoly()) + f * TrigPoly.sin(2 * hk, 1j * ph)
                expansion = nxt
            for q, f in expansion.items():
                acc[q] = acc.get(q, TrigPoly()) + f
    entries = tuple(
        (q, f) for q, f in sorted(acc.items(), key=lambda kv: (kv[0].x, kv[0].z)) if f
    )
    return InteractionHamiltonian(entries, part)


@lru_cache(maxsize=1 << 16)
def _ordered_kernel(w_late: float, w_early: float, delta: float) -> complex:
    """``int_{0<u2<u1<delta} e^{i w_late u1} e^{i w_early u2}``.

    Equals ``delta^2`` times the divided difference of ``exp`` at
    ``0, i w_late delta, i (w_late + w_early) delta``, read off a 3x3 exponential.
    """
    m = np.array(
        [[0, 1, 0], [0, 1j * w_late * delta, 1], [0, 0, 1j * (w_late + w_early) * delta]],
        dtype=complex,
    )
    return complex(delta**2 * expm(m)[0, 2])


def sign_kernel(w1: float, w2: float, t0: float, delta: float) -> complex:
    """``int int_{[t0, t0+delta]^2} e^{i w1 t1} e^{i w2 t2} sign(t1 - t2)``."""
    base = _ordered_kernel(w1, w2, delta) - _ordered_kernel(w2, w1, delta)
    return complex(np.exp(1j * (w1 + w2) * t0) * base)


def sign_integral(f: TrigPoly, g: TrigPoly, t0: float, delta: float) -> complex:
    """Closed-form ``int int f(t1) g(t2) sign(t1 - t2)`` over the square slice."""
    total = 0.0 + 0.0j
    for w1, c1 in f.terms.items():
        for w2, c2 in g.terms.items():
            total += c1 * c2 * sign_kernel(w1, w2, t0, delta)
    return complex(total)


@dataclass(frozen=True)
class MagnusTerm:
    order: int
    t0: float
    dt: float
    alpha: float
    effective_hamiltonian: PauliSum
    A: dict
    B: dict

    @property
    def a_part(self) -> PauliSum:
        """First-order part ``sum_q A_q O_q``."""
        n = self.effective_hamiltonian.n_qubits
        return _hermitian_part(PauliSum.from_terms(n, self.A.items()))

    def omega_dense(self) -> np.ndarray:
        """Dense ``Omega = -i alpha dt H_eff``."""
        return -1j * self.alpha * self.dt * self.effective_hamiltonian.to_dense()


def _hermitian_part(op: PauliSum, tol: float = 1e-10) -> PauliSum:
    bad = max((abs(c.imag) for c in op.terms.values()), default=0.0)
    if bad > tol * max(1.0, op.one_norm()):
        raise ArithmeticError(f"effective Hamiltonian not Hermitian (imag part {bad:.3g})")
    return op.real()


def magnus_term(ih: InteractionHamiltonian, alpha: float, t0: float, dt: float, order: int) -> MagnusTerm:
    if order not in (1, 2):
        raise ValueError("only Magnus orders 1 and 2 are supported")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = ih.n_qubits
    A = {p: trig_integrate(f, t0, t0 + dt) / dt for p, f in ih.entries}
    heff = PauliSum.from_terms(n, A.items())
    B = {}
    if order == 2 and alpha != 0:
        entries = ih.entries
        items = []
        for qi in range(len(entries)):
            oq, fq = entries[qi]
            for pi_ in range(qi):
                op, fp = entries[pi_]
                if oq.commutes_with(op):
                    continue
                bqp = -0.5j * alpha / dt * sign_integral(fq, fp, t0, dt)
                if abs(bqp) < AMP_TOL:
                    continue
                B[(oq, op)] = bqp
                # [O_q, O_p] = 2 * phase * (O_q O_p) for anticommuting strings
                ph, prod_ = pauli_mul(oq, op)
                items.append((prod_, 2 * ph * bqp))
        heff = heff + PauliSum.from_terms(n, items)
    return MagnusTerm(order, t0, dt, alpha, _hermitian_part(heff), A, B)


def magnus_block_size(part: PartitionedHamiltonian, order: int) -> int:
    """Qubit block size for layering the slice generators (order-2 terms are one qubit wider)."""
    return part.block_size_for_thrift + (order - 1)


def _layer_strang(op: PauliSum, tau: float, block_size: int) -> list[tuple[PauliSum, float]]:
    layers = [l for l in group_layers(op, block_size).split(op) if l]
    if len(layers) <= 1:
        return [(op, tau)] if op else []
    out = [(l, tau / 2) for l in layers[:-1]] + [(layers[-1], tau)]
    return out + [(l, tau / 2) for l in layers[-2::-1]]


def split_effective(
    term: MagnusTerm, split_order: int | None, layer_block: int | None = None
) -> list[tuple[PauliSum, float]]:
    """Factors approximating the slice exponential ``exp(-i alpha dt H_eff)``, leftmost first.

    ``H_eff = H_A + H_B`` with ``H_A = sum A_q O_q`` and ``H_B`` the commutator part.
    ``split_order`` 1 gives ``e^{-i tau H_A} e^{-i tau H_B}``, 2 the symmetric
    ``e^{-i tau H_A / 2} e^{-i tau H_B} e^{-i tau H_A / 2}`` and ``None`` the unsplit exponential.
    With ``layer_block`` set, each exponential is further split symmetrically over
    disjoint-block layers of that size.
    """
    tau = term.alpha * term.dt
    heff = term.effective_hamiltonian
    if split_order is None:
        pieces = [(heff, tau)]
    else:
        ha = term.a_part
        hb = _hermitian_part(heff - ha)
        if split_order == 1:
            pieces = [(ha, tau), (hb, tau)]
        elif split_order == 2:
            pieces = [(ha, tau / 2), (hb, tau), (ha, tau / 2)]
        else:
            raise ValueError("split_order must be 1, 2 or None")
    out = []
    for op, t in pieces:
        if not op:
            continue
        out += _layer_strang(op, t, layer_block) if layer_block else [(op, t)]
    return merge_factors(out)


def merge_factors(factors: list[tuple[PauliSum, float]]) -> list[tuple[PauliSum, float]]:
    """Fuse adjacent factors with the same generator."""
    out: list[tuple[PauliSum, float]] = []
    for op, t in factors:
        if out and out[-1][0] is op:
            out[-1] = (op, out[-1][1] + t)
        else:
            out.append((op, t))
    return out


def magnus_factors(
    part: PartitionedHamiltonian,
    T: float,
    N: int,
    order: int,
    split_order: int | None = 2,
    alpha: float | None = None,
    t0: float = 0.0,
    ih: InteractionHamiltonian | None = None,
    layer_block: int | None = None,
) -> list[tuple[PauliSum, float]]:
    """Operator factors of ``e^{-i(t0+T)H0} S_N ... S_1 e^{i t0 H0}``, leftmost first."""
    if N < 1:
        raise ValueError("N must be positive")
    alpha = part.alpha if alpha is None else alpha
    ih = ih or interaction_picture(part)
    dt = T / N
    slices = []
    if alpha != 0:
        for k in range(N):
            term = magnus_term(ih, alpha, t0 + k * dt, dt, order)
            slices.append(split_effective(term, split_order, layer_block))
    out = [(part.h0, t0 + T)]
    for sl in reversed(slices):
        out += sl
    if t0:
        out.append((part.h0, -t0))
    return out


def magnus_thrift_evolve(
    part: PartitionedHamiltonian,
    alpha: float | None,
    T: float,
    N: int,
    order: int,
    split_order: int | None = 2,
    t0: float = 0.0,
    cap: int = DENSE_CAP,
    layer_block: int | None = None,
) -> np.ndarray:
    """Dense Magnus-THRIFT evolution over ``[t0, t0 + T]`` in ``N`` slices.

    ``split_order`` picks how each slice exponential is realized (see ``split_effective``).
    """
    if alpha is not None and alpha != part.alpha:
        part = part.with_alpha(alpha)
    factors = magnus_factors(part, T, N, order, split_order, t0=t0, layer_block=layer_block)
    return evaluate_factors(factors, cap)


MAGNUS_LMAX = 20


def bernoulli_numbers(n: int) -> list[Fraction]:
    """``B_0..B_n`` with ``B_1 = -1/2``."""
    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, k) * b[k] for k in range(m)) / (m + 1))
    return b


def _g(x: float) -> float:
    # 2 + (x/2)(1 - cot(x/2)), with its series near the removable point x = 0
    if abs(x) < 1e-4:
        return 1 + x / 2 + x * x / 12
    return 2 + 0.5 * x * (1 - 1 / np.tan(0.5 * x))


@dataclass(frozen=True)
class ConvergenceSeries:
    x: tuple[float, ...]
    bernoulli: tuple[Fraction, ...]
    threshold: float
    x_exact: tuple[Fraction, ...] = ()

    @property
    def l_max(self) -> int:
        return len(self.x)


def convergence_series(l_max: int = MAGNUS_LMAX) -> ConvergenceSeries:
    """Taylor coefficients ``x_l`` of ``G^{-1}`` and the convergence threshold.

    ``G(s) = int_0^s dx / g(x)`` with ``g(z) = sum_j |B_j| z^j / j!``, so
    ``y = G^{-1}`` solves ``y' = g(y)``, ``y(0) = 0``; coefficients are matched
    order by order in exact rationals.
    """
    if not 1 <= l_max <= MAGNUS_LMAX:
        raise ValueError(f"l_max must be in 1..{MAGNUS_LMAX}")
    bern = bernoulli_numbers(l_max)
    gcoef = [abs(bern[j]) / factorial(j) for j in range(l_max + 1)]
    x = [Fraction(0)] * (l_max + 1)
    for l in range(1, l_max + 1):
        # coefficient of z^{l-1} in g(y) with y = sum_{m<l} x_m z^m
        acc = Fraction(0)
        power = [Fraction(1)] + [Fraction(0)] * (l - 1)  # y^0 truncated at z^{l-1}
        for j in range(0, l):
            acc += gcoef[j] * power[l - 1]
            power = _series_mul(power, x[: l], l)
        x[l] = acc / l
    threshold = 0.5 * quad(lambda s: 1 / _g(s), 0, 2 * pi, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    return ConvergenceSeries(
        tuple(float(v) for v in x[1:]), tuple(bern), threshold, tuple(x[1:])
    )


def _series_mul(a, b, n):
    out = [Fraction(0)] * n
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: n - i]):
            if bj:
                out[i + j] += ai * bj
    return out


@dataclass(frozen=True)
class RemainderBound:
    value: float
    k: int
    l_max: int
    argument: float
    note: str = "series truncated at l_max; terms beyond l_max are not included"

    def __float__(self) -> float:
        return self.value


def magnus_remainder_bound(
    k: int, alpha: float, t: float, h1_norm_integral: float, series: ConvergenceSeries
) -> RemainderBound:
    """``sum_{l=k+1}^{l_max} (1/2) x_l (2 alpha int ||H1||)^l``.

    ``t`` is recorded for reference; the integral is supplied directly.
    """
    s = 2 * abs(alpha) * h1_norm_integral
    if s >= 2 * series.threshold:
        raise ValueError(
            f"argument {s:.6g} outside the convergence region (< {2 * series.threshold:.6g})"
        )
    total = sum(0.5 * series.x[l - 1] * s**l for l in range(k + 1, series.l_max + 1))
    return RemainderBound(float(total), k, series.l_max, s)
