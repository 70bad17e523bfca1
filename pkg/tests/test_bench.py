import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import expm

from thrift_dynamics import bench
from thrift_dynamics.cli import main
from thrift_dynamics.exact import CapabilityError
from thrift_dynamics.models import ModelSpec, build_model


def cfg_dict(**kw):
    d = {"model": {"kind": "tfim_1d", "dims": [4], "h": 1.0, "J": 0.125}, "budget": 31,
         "alpha": [0.05, 0.125], "T": [0.5, 1.0], "formulas": ["trotter1", "trotter2", "thrift2"]}
    d.update(kw)
    return d


def body(text):
    return "\n".join(ln for ln in text.splitlines() if not ln.startswith("# created"))


def test_config_round_trip():
    cfg = bench.SweepConfig.from_dict(cfg_dict())
    again = bench.SweepConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


@pytest.mark.parametrize(
    "bad",
    [
        {"budgte": 31},
        {"metric": "frobenius"},
        {"epsilon": 0.0},
        {"budget": -1},
        {"engine": "gpu"},
        {"formulas": ["trotter3"]},
        {"alpha": {"min": 0.1, "max": 1.0}},
        {"alpha": {"min": 0.1, "max": 1.0, "count": 3, "step": 2}},
        {"T": {"min": 0.0, "max": 1.0, "count": 3}},
        {"model": {"kind": "tfim_1d", "dims": [4], "colour": 1}},
    ],
)
def test_config_errors(bad):
    with pytest.raises(bench.ConfigError):
        bench.SweepConfig.from_dict(cfg_dict(**bad))


def test_config_json_errors():
    with pytest.raises(bench.ConfigError):
        bench.SweepConfig.from_json("{not json")
    with pytest.raises(bench.ConfigError):
        bench.SweepConfig.from_json("[1, 2]")
    with pytest.raises(bench.ConfigError):
        bench.SweepConfig.from_dict({"budget": 3})


def test_grid_points():
    assert bench.Grid.from_json(0.5, "a").points() == [0.5]
    g = bench.Grid.from_json({"min": 1e-3, "max": 1e-1, "count": 3}, "a").points()
    np.testing.assert_allclose(g, [1e-3, 1e-2, 1e-1])
    lin = bench.Grid.from_json({"min": 0, "max": 1, "count": 5, "spacing": "linear"}, "a").points()
    np.testing.assert_allclose(lin, np.linspace(0, 1, 5))
    with pytest.raises(bench.ConfigError):
        bench.Grid(values=()).points()


def test_order8_requested_without_table(monkeypatch, tmp_path):
    monkeypatch.setenv("THRIFT_OMEGA8_FILE", str(tmp_path / "none.txt"))
    cfg = bench.SweepConfig.from_dict(cfg_dict(formulas=["trotter8_opt"]))
    with pytest.raises(bench.ConfigError):
        cfg.resolved_formulas()
    auto = bench.SweepConfig.from_dict(cfg_dict(formulas=None))
    assert not set(auto.resolved_formulas()) & {"trotter8_opt", "thrift8_opt"}


def test_unregistered_formula_for_model():
    cfg = bench.SweepConfig.from_dict(cfg_dict(model={"kind": "heisenberg_1d", "dims": [4], "h": 1.0, "J": 0.1},
                                               formulas=["magnus_thrift1"]))
    with pytest.raises(bench.ConfigError):
        cfg.resolved_formulas()


def test_engine_resolution():
    small = ModelSpec("tfim_1d", (6,), h=1.0, J=0.1)
    big = ModelSpec("tfim_1d", (16,), h=1.0, J=0.1)
    heis = ModelSpec("heisenberg_1d", (16,), h=1.0, J=0.1)
    assert bench.resolve_engine("auto", small, "worst_case") == "dense"
    assert bench.resolve_engine("auto", big, "worst_case") == "flo"
    assert bench.resolve_engine("flo", small, "worst_case") == "flo"
    with pytest.raises(CapabilityError):
        bench.resolve_engine("auto", big, "avg_infidelity")
    with pytest.raises(CapabilityError):
        bench.resolve_engine("auto", heis, "worst_case")
    with pytest.raises(CapabilityError):
        bench.resolve_engine("dense", big, "worst_case")
    with pytest.raises(CapabilityError):
        bench.resolve_engine("flo", ModelSpec("heisenberg_1d", (4,), h=1.0, J=0.1), "worst_case")


def test_landscape_rows_and_best_marker():
    cfg = bench.SweepConfig.from_dict(cfg_dict())
    rows = bench.landscape(cfg)
    assert len(rows) == 2 * 2 * 3
    for key in {(r.alpha, r.T) for r in rows}:
        pt = [r for r in rows if (r.alpha, r.T) == key]
        assert sum(r.is_best for r in pt) == 1
        best = [r for r in pt if r.is_best][0]
        assert best.error == min(r.error for r in pt)
        assert all(r.two_qubit_depth <= 31 for r in pt)
    # order of the requested formulas does not change the marker
    rev = bench.landscape(bench.SweepConfig.from_dict(cfg_dict(formulas=["thrift2", "trotter2", "trotter1"])))
    assert [(r.formula, r.is_best) for r in rev] == [(r.formula, r.is_best) for r in rows]


def test_landscape_csv_format():
    cfg = bench.SweepConfig.from_dict(cfg_dict())
    text = bench.landscape_csv(cfg, bench.landscape(cfg), timestamp=False)
    lines = text.splitlines()
    assert lines[0].startswith("# {")
    meta = json.loads(lines[0][2:])
    assert meta["prng"] == "numpy.PCG64" and meta["seed"] == 0
    assert lines[1] == bench.LANDSCAPE_HEADER
    assert len(lines) == 2 + 12
    assert all(len(ln.split(",")) == 13 for ln in lines[1:])


def test_best_index_tie_break():
    mk = lambda f, e, d: bench.LandscapeRow("m", "dense", 0, 0.1, 1.0, 31, f, 1, d, d, "worst_case", e)  # noqa: E731
    rows = [mk("b", 1e-3, 5), mk("a", 1e-3, 5), mk("c", 1e-3, 3), mk("d", 2e-3, 1)]
    assert bench.best_index(rows) == 2
    assert bench.best_index(rows[:2]) == 1


def test_budget_without_rows():
    assert bench.landscape(bench.SweepConfig.from_dict(cfg_dict(budget=0))) == []
    assert bench.landscape(bench.SweepConfig.from_dict(cfg_dict(budget=1))) == []


def test_landscape_determinism_and_workers():
    cfg = bench.SweepConfig.from_dict(cfg_dict(model={"kind": "heisenberg_1d", "dims": [4], "h": 1.0, "J": 0.1},
                                               rng_seed=7))
    a = bench.landscape_csv(cfg, bench.landscape(cfg))
    b = bench.landscape_csv(cfg, bench.landscape(cfg.__class__(**{**cfg.__dict__, "workers": 2})))
    assert body(a) == body(b)
    other = bench.SweepConfig.from_dict({**cfg_dict(model={"kind": "heisenberg_1d", "dims": [4], "h": 1.0, "J": 0.1}),
                                         "rng_seed": 8})
    assert body(bench.landscape_csv(other, bench.landscape(other))) != body(a)


def test_avg_infidelity_metric():
    cfg = bench.SweepConfig.from_dict(cfg_dict(metric="avg_infidelity"))
    rows = bench.landscape(cfg)
    assert all(0 <= r.error <= 1 for r in rows)
    assert "computational" in bench.landscape_csv(cfg, rows, timestamp=False).splitlines()[0]


def test_min_steps_frozen_value():
    part = build_model(ModelSpec("tfim_1d", (6,), h=1.0, J=0.125))
    assert bench.min_steps(part, "trotter2", None, 6.0, 0.01) == 28
    assert bench.min_steps(part, "trotter2", None, 6.0, 0.001) == 86


def test_min_steps_properties():
    part = build_model(ModelSpec("tfim_1d", (4,), h=1.0, J=0.3))
    ns = [bench.min_steps(part, "thrift2", None, 2.0, eps) for eps in (0.1, 0.03, 0.01, 0.003)]
    assert ns == sorted(ns)
    n = ns[2]
    ev = bench.Evaluator(part, "dense", "worst_case")
    assert ev.error("thrift2", 2.0, n) <= 0.01 < ev.error("thrift2", 2.0, n - 1)
    single = build_model(ModelSpec("tfim_1d", (2,), h=1.0, J=0.7))
    assert bench.min_steps(single, "thrift1", None, 3.0, 1e-9) == 1
    assert bench.min_steps(part, "trotter1", None, 2.0, 1e-9, N_max=8) is None
    with pytest.raises(ValueError):
        bench.min_steps(part, "trotter1", None, 1.0, 0.0)


def test_scaling_sweep():
    cfg = bench.SweepConfig.from_dict(cfg_dict(alpha=[0.125], formulas=["trotter2", "thrift2"], sizes=[4, 5, 6],
                                               T_per_L=1.0, epsilon=0.01))
    rows = bench.scaling(cfg)
    assert [(r.formula, r.L) for r in rows] == [(f, L) for f in ("thrift2", "trotter2") for L in (4, 5, 6)]
    assert all(r.error <= 0.01 and r.T == r.L for r in rows)
    text = bench.scaling_csv(cfg, rows, timestamp=False)
    assert text.splitlines()[1] == bench.SCALING_HEADER
    with pytest.raises(bench.ConfigError):
        bench.scaling(bench.SweepConfig.from_dict(cfg_dict()))


def test_powerlaw_fit_exact():
    pts = [(L, 3.0 * L**1.7, 1.0) for L in (4, 6, 8, 12)]
    f = bench.powerlaw_fit(pts)
    assert f.a == pytest.approx(3.0, rel=1e-12) and f.k == pytest.approx(1.7, rel=1e-12)
    np.testing.assert_allclose(f.predict([4, 8]), [3 * 4**1.7, 3 * 8**1.7])
    with pytest.raises(ValueError):
        bench.powerlaw_fit(pts[:2])
    with pytest.raises(ValueError):
        bench.powerlaw_fit([(4, 1, 1), (4, 2, 1), (4, 3, 1)])
    with pytest.raises(ValueError):
        bench.powerlaw_fit([(4, -1, 1), (5, 2, 1), (6, 3, 1)])


def test_powerlaw_stderr_is_calibrated():
    rng = np.random.default_rng(3)
    Ls = np.array([4, 5, 6, 8, 10, 14])
    sigma = 0.05
    ks, errs = [], []
    for _ in range(400):
        d = 2.0 * Ls**1.5 * np.exp(rng.normal(0, sigma, Ls.size))
        f = bench.powerlaw_fit([(L, v, 1 / sigma**2) for L, v in zip(Ls, d)])
        ks.append(f.k)
        errs.append(f.k_stderr)
    assert np.mean(ks) == pytest.approx(1.5, abs=0.01)
    assert np.std(ks) == pytest.approx(errs[0], rel=0.15)


def test_fit_scaling_rows():
    rows = [{"model": "tfim_1d", "formula": "trotter2", "alpha": "0.125", "L": str(L),
             "two_qubit_depth": str(2 * round(0.5 * L**2) + 1)} for L in (4, 6, 8, 10)]
    rows.append({"model": "tfim_1d", "formula": "trotter2", "alpha": "0.125", "L": "12", "two_qubit_depth": ""})
    (fit,) = bench.fit_scaling_rows(rows)
    assert fit["points_used"] == 4 and fit["L_max"] == 10
    assert fit["k"] == pytest.approx(2.0, abs=0.1)


def test_bounds_csv():
    cfg = bench.SweepConfig.from_dict(cfg_dict(alpha=[0.01, 2.0], T=[0.5]))
    lines = bench.bounds_csv(cfg).splitlines()
    assert lines[1] == bench.BOUNDS_HEADER
    small, large = (ln.split(",") for ln in lines[2:])
    assert float(small[5]) > float(small[6]) > 0
    assert large[5] == "" and large[6] == ""


def test_cli_tables(capsys):
    assert main(["tables", "--model", "tfim_1d"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "model,formula,two_qubit,cnot,budget,steps,note"
    assert [int(ln.split(",")[5]) for ln in out[1:]] == [15, 15, 3, 1, 15, 15, 3, 1, 15, 2, 2]


def test_cli_landscape_and_fit(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps(cfg_dict(alpha=[0.125], T=[1.0])))
    out = tmp_path / "l.csv"
    assert main(["landscape", str(conf), "-o", str(out)]) == 0
    assert bench.LANDSCAPE_HEADER in out.read_text()
    sconf = tmp_path / "s.json"
    sconf.write_text(json.dumps(cfg_dict(alpha=[0.125], formulas=["trotter2"], sizes=[4, 5, 6])))
    sout = tmp_path / "s.csv"
    assert main(["scaling", str(sconf), "-o", str(sout), "--no-timestamp"]) == 0
    assert main(["fit", str(sout), "--extrapolate", "5", "20"]) == 0
    text = capsys.readouterr().out
    assert "interpolation" in text and "extrapolation" in text


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg_dict(budgte=3)))
    assert main(["landscape", str(bad)]) == 2
    assert main(["landscape", str(tmp_path / "missing.json")]) == 2
    cap = tmp_path / "cap.json"
    cap.write_text(json.dumps(cfg_dict(model={"kind": "heisenberg_1d", "dims": [14], "h": 1.0, "J": 0.1})))
    assert main(["landscape", str(cap)]) == 3
    r = subprocess.run([sys.executable, "-m", "thrift_dynamics.cli", "landscape", str(bad)], capture_output=True)
    assert r.returncode == 2 and b"config error" in r.stderr


def test_evaluator_matches_direct_computation():
    part = build_model(ModelSpec("tfim_1d", (4,), h=1.0, J=0.2))
    ev = bench.Evaluator(part, "dense", "worst_case")
    u = expm(-1j * part.full.to_dense())
    from thrift_dynamics.exact import spectral_error
    from thrift_dynamics.formulas import evaluate_schedule, make_trotter

    ref = spectral_error(u, evaluate_schedule(make_trotter(part, 2), part, 1.0, 3))
    assert ev.error("trotter2", 1.0, 3) == pytest.approx(ref, abs=1e-13)
    flo_ev = bench.Evaluator(part, "flo", "worst_case")
    assert flo_ev.error("magnus_thrift2", 1.0, 2) == pytest.approx(ev.error("magnus_thrift2", 1.0, 2), abs=1e-10)


def test_pessimistic_column():
    model = {"kind": "tfim_1d", "dims": [16], "h": 1.0, "J": 0.01}
    cfg = bench.SweepConfig.from_dict(cfg_dict(model=model, alpha=[0.01], T=[1.0], report_pessimistic=True))
    rows = bench.landscape(cfg)
    assert all(r.engine == "flo" and r.error_pessimistic > np.sqrt(2) > r.error for r in rows)
    lines = bench.landscape_csv(cfg, rows, timestamp=False).splitlines()
    assert lines[1] == bench.LANDSCAPE_HEADER + ",error_pessimistic"
    assert all(len(ln.split(",")) == 14 for ln in lines[1:])
    dense = bench.SweepConfig.from_dict(cfg_dict(alpha=[0.1], T=[1.0], report_pessimistic=True))
    assert all(r.error_pessimistic == r.error for r in bench.landscape(dense))
    scal = bench.SweepConfig.from_dict(cfg_dict(alpha=[0.125], formulas=["trotter2"], sizes=[4, 5],
                                                report_pessimistic=True))
    text = bench.scaling_csv(scal, bench.scaling(scal), timestamp=False)
    assert text.splitlines()[1] == bench.SCALING_HEADER + ",error_pessimistic"
