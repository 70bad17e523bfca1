import numpy as np
import pytest

from thrift_dynamics.models import (
    ModelSpec,
    build_model,
    number_operator,
    random_fields,
)
from thrift_dynamics.pauli_core import PauliString, PauliSum, commutator


def fock_annihilators(n_modes):
    """Fermionic annihilators on occupation bitstrings, signs counted from lower modes."""
    dim = 1 << n_modes
    ops = []
    for m in range(n_modes):
        c = np.zeros((dim, dim))
        for state in range(dim):
            if (state >> m) & 1:
                sign = (-1) ** bin(state & ((1 << m) - 1)).count("1")
                c[state ^ (1 << m), state] = sign
        ops.append(c)
    return ops


def fock_hubbard(L, t_hop, U):
    # interleaved ordering (site i up = 2i, down = 2i+1), unlike the qubit encoding
    c = fock_annihilators(2 * L)
    n = [ci.T @ ci for ci in c]
    dim = 1 << (2 * L)
    H = np.zeros((dim, dim))
    for i in range(L - 1):
        for s in (0, 1):
            a, b = 2 * i + s, 2 * (i + 1) + s
            H += -t_hop * (c[a].T @ c[b] + c[b].T @ c[a])
    for i in range(L):
        H += U * n[2 * i] @ n[2 * i + 1]
    return H


def test_tfim_two_sites():
    part = build_model(ModelSpec("tfim_1d", (2,), h=1.0, J=0.5))
    assert part.h0 == PauliSum.from_labels({"ZI": 1.0, "IZ": 1.0})
    assert part.n_groups == 1
    assert part.h1_groups[0][1] == PauliSum.from_labels({"XX": 1.0})
    assert part.alpha == 0.5


def test_tfim_sixteen_sites_group_sizes():
    part = build_model(ModelSpec("tfim_1d", (16,), h=1.0, J=0.1))
    assert part.n_groups == 2
    assert [len(g) for _, g in part.h1_groups] == [8, 7]


def test_tfim_2d_groups():
    part = build_model(ModelSpec("tfim_2d", (3, 3), h=1.0, J=0.1))
    assert [lbl for lbl, _ in part.h1_groups] == ["h_even", "h_odd", "v_even", "v_odd"]
    assert [len(g) for _, g in part.h1_groups] == [3, 3, 3, 3]
    assert part.n_qubits == 9


@pytest.mark.parametrize("L", [2, 3, 4, 5])
def test_fermi_hubbard_spectrum_matches_fock_space(L):
    t_hop, U = 0.7, 1.3
    part = build_model(ModelSpec("fermi_hubbard_1d", (L,), t_hop=t_hop, U=U))
    assert part.n_qubits == 2 * L
    ours = np.linalg.eigvalsh(part.full.to_dense())
    ref = np.linalg.eigvalsh(fock_hubbard(L, t_hop, U))
    np.testing.assert_allclose(ours, ref, atol=1e-10)


def test_fermi_hubbard_conserves_particle_number():
    part = build_model(ModelSpec("fermi_hubbard_1d", (4,), t_hop=1.0, U=2.0))
    c = commutator(part.full, number_operator(8))
    assert len(c) == 0
    h = part.full.to_dense()
    n = number_operator(8).to_dense()
    assert np.abs(h @ n - n @ h).max() <= 1e-10


def test_fermi_hubbard_block_size_and_alpha():
    part = build_model(ModelSpec("fermi_hubbard_1d", (3,), t_hop=0.25, U=1.0))
    assert part.block_size_for_thrift == 4
    assert part.alpha == -0.25


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec("tfim_1d", (5,), h=1.0, J=0.3),
        ModelSpec("tfim_2d", (2, 2), h=1.0, J=0.3),
        ModelSpec("heisenberg_1d", (6,), h=1.0, J=0.3, rng_seed=11),
        ModelSpec("fermi_hubbard_1d", (3,), t_hop=0.3, U=1.0),
    ],
)
def test_full_is_sum_of_parts_and_hermitian(spec):
    part = build_model(spec)
    acc = part.h0
    for _, g in part.h1_groups:
        acc = acc + g.scale(part.alpha)
    diff = acc - part.full
    assert all(abs(c) <= 1e-12 for c in diff.terms.values())
    assert part.full.is_hermitian()
    assert part.h0.is_diagonal()


def test_heisenberg_fields_and_groups():
    spec = ModelSpec("heisenberg_1d", (6,), h=1.0, J=0.5, rng_seed=7)
    part = build_model(spec)
    assert list(part.fields) == random_fields(6, 1.0, 7)
    for j, hj in enumerate(part.fields):
        assert part.h0.coefficient(PauliString.from_ops({j: "Z"}, 6)) == pytest.approx(hj)
    even = part.h1_groups[0][1]
    assert len(even) == 9
    assert even.coefficient(PauliString.from_label("YYIIII")) == 1.0


def test_random_fields_zero_and_deterministic():
    assert random_fields(5, 0.0, 3) == [0.0] * 5
    assert random_fields(8, 1.0, 42) == random_fields(8, 1.0, 42)
    assert random_fields(8, 1.0, 42) != random_fields(8, 1.0, 43)


def test_random_fields_range_and_mean():
    vals = random_fields(8, 1.0, 1)
    assert all(-1.0 <= v <= 1.0 for v in vals)
    assert -0.6 <= np.mean(vals) <= 0.6


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("tfim_1d", (0,), h=1.0, J=1.0)
    with pytest.raises(ValueError):
        ModelSpec("ising", (3,), h=1.0, J=1.0)
    with pytest.raises(ValueError):
        ModelSpec("tfim_1d", (3,), h=1.0, J=1.0, U=2.0)
    with pytest.raises(ValueError):
        ModelSpec("tfim_2d", (3,), h=1.0, J=1.0)


def test_spec_round_trip_and_alpha():
    spec = ModelSpec("fermi_hubbard_1d", (3,), t_hop=0.5, U=1.0)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_alpha(0.25).alpha == 0.25
    assert build_model(spec.with_alpha(0.25)).alpha == 0.25
    with pytest.raises(ValueError):
        ModelSpec.from_dict({"kind": "tfim_1d", "dims": [3], "h": 1, "J": 1, "bogus": 2})
