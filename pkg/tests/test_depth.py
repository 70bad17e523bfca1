import pytest

from thrift_dynamics.depth import (
    TABLE_BUDGETS,
    UnregisteredError,
    budget_table,
    depth,
    load_registry,
    lookup,
    registered_formulas,
    steps_for_budget,
)

# published step counts at each model's fixed budget, in registry order
EXPECTED_STEPS = {
    "tfim_1d": [15, 15, 3, 1, 15, 15, 3, 1, 15, 2, 2],
    "tfim_2d": [26, 17, 3, 1, 26, 17, 3, 1, 26, 1, 3],
    "heisenberg_1d": [15, 15, 3, 1, 15, 15, 3, 1, 2],
    "fermi_hubbard_1d": [20, 15, 3, 1, 8, 7, 1, 0, 3],
}


def test_worked_examples():
    assert depth("tfim_1d", "trotter2", 15) == (31, 62)
    assert depth("tfim_1d", "magnus_thrift2", 2) == (27, 81)
    assert depth("tfim_2d", "magnus_thrift2", 1) == (105, 315)
    assert depth("fermi_hubbard_1d", "omelyan_small_a4", 3) == (49, 98)


def test_registry_is_complete():
    assert len(load_registry()) == 40
    assert len(registered_formulas("tfim_1d")) == 11
    assert "magnus_thrift1" not in registered_formulas("heisenberg_1d")


@pytest.mark.parametrize("model", sorted(EXPECTED_STEPS))
def test_table_replay(model):
    rows = budget_table(model)
    assert [r["steps"] for r in rows] == EXPECTED_STEPS[model]
    assert all(r["budget"] == TABLE_BUDGETS[model] for r in rows)
    assert all((r["note"] == "exceeds budget") == (r["steps"] == 0) for r in rows)


def test_fh_thrift8_exceeds_budget():
    (row,) = [r for r in budget_table("fermi_hubbard_1d") if r["formula"] == "thrift8_opt"]
    assert row["steps"] == 0 and row["note"] == "exceeds budget"


@pytest.mark.parametrize("key", sorted(load_registry()))
def test_steps_for_budget_is_maximal(key):
    model, formula = key
    for budget in (0, 5, 31, 61, 105, 400):
        n = steps_for_budget(model, formula, budget)
        if n:
            assert depth(model, formula, n)[0] <= budget
        assert depth(model, formula, n + 1)[0] > budget


@pytest.mark.parametrize("key", sorted(load_registry()))
def test_depth_monotone(key):
    d = [depth(*key, n) for n in range(1, 20)]
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(d, d[1:]))


def test_unregistered_and_invalid():
    with pytest.raises(UnregisteredError):
        lookup("heisenberg_1d", "magnus_thrift2")
    with pytest.raises(KeyError):
        depth("tfim_3d", "trotter1", 1)
    with pytest.raises(ValueError):
        depth("tfim_1d", "trotter1", 0)
    assert steps_for_budget("tfim_1d", "trotter1", 0) == 0
