import configparser
import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from icsfree.cli import PipelineConfig, main, parse_number_list


def _write_samples(path, units):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "value"])
        for uid, xs in units.items():
            for v in xs:
                w.writerow([uid, repr(float(v))])
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _toy_units(seed=0, n_in=60, n_out=4, size=120):
    rng = np.random.default_rng(seed)
    units = {f"u{i:03d}": np.clip(rng.normal(rng.normal(0, 0.2), 1.0, size), -4.5, 4.5) for i in range(n_in)}
    for j in range(n_out):
        units[f"planted{j}"] = np.clip(np.r_[rng.normal(0, 1, size - 40), rng.normal(3, 0.3, 40)], -4.5, 4.5)
    return units


def test_smooth_two_units(tmp_path):
    rng = np.random.default_rng(1)
    inp = _write_samples(tmp_path / "s.csv", {"a": rng.normal(size=50), "b": rng.normal(size=60)})
    out = tmp_path / "out"
    args = ["smooth", inp, "--kind", "sample", "--knots", "3", "--interval=-5,5", "--out-dir", str(out)]
    assert main(args) == 0
    assert sorted(p.name for p in (out / "densities").iterdir()) == ["a.json", "b.json"]
    rep = _read_csv(out / "fit_report.csv")
    assert [r["unit_id"] for r in rep] == ["a", "b"] and all(r["status"] == "ok" for r in rep)
    d = json.loads((out / "densities" / "a.json").read_text())
    assert d["schema"] == "density-spline/1" and d["interval"] == [-5.0, 5.0]
    first = (out / "densities" / "a.json").read_bytes()
    assert main(args) == 0
    assert (out / "densities" / "a.json").read_bytes() == first


def test_smooth_isolates_bad_unit(tmp_path, capsys):
    rng = np.random.default_rng(2)
    units = {"good": rng.uniform(0, 1, 40), "bad": np.r_[rng.uniform(0, 1, 39), 7.0], "also": rng.uniform(0, 1, 40)}
    inp = _write_samples(tmp_path / "s.csv", units)
    code = main(["smooth", inp, "--kind", "sample", "--knots", "2", "--interval", "0,1",
                 "--out-dir", str(tmp_path / "o")])
    assert code == 1
    rep = {r["unit_id"]: r for r in _read_csv(tmp_path / "o" / "fit_report.csv")}
    assert rep["bad"]["status"] == "error" and "outside" in rep["bad"]["error"]
    assert rep["good"]["status"] == rep["also"]["status"] == "ok"
    assert not (tmp_path / "o" / "densities" / "bad.json").exists()


def test_smooth_requires_sample_kind(tmp_path, capsys):
    inp = tmp_path / "x.csv"
    inp.write_text("a,b\n1,2\n")
    assert main(["smooth", str(inp), "--out-dir", str(tmp_path)]) == 2
    assert "kind = sample" in capsys.readouterr().err


def test_missing_input_exit_code(tmp_path, capsys):
    assert main(["outlier", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def _write_mixture(path, seed=3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((300, 4))
    x[:6, 0] += 7.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "a", "b", "c", "d"])
        for i, row in enumerate(x):
            w.writerow([f"obs{i}"] + [repr(float(v)) for v in row])
    return str(path)


def test_outlier_multivariate(tmp_path):
    inp = _write_mixture(tmp_path / "x.csv")
    out = tmp_path / "o"
    assert main(["outlier", inp, "--id-column", "id", "--kappa", "fixed:2", "--reps", "500",
                 "--out-dir", str(out)]) == 0
    rep = json.loads((out / "outlier_report.json").read_text())
    assert rep["kappa_rule"] == "fixed:2" and rep["selection_mode"] == "fixed" and rep["kappa"] == 2
    assert rep["mc_meta"]["reps"] == 500
    flagged = {u for u, f in zip(rep["unit_ids"], rep["flags"]) if f}
    assert {f"obs{i}" for i in range(6)} <= flagged
    dist = _read_csv(out / "distances.csv")
    assert list(dist[0]) == ["unit_id", "distance", "cutoff", "flagged"] and len(dist) == 300
    assert list(_read_csv(out / "scores.csv")[0]) == ["unit_id", "ic1", "ic2"]
    assert len(_read_csv(out / "scree.csv")) == 4
    assert not (out / "eigendensities.csv").exists()
    assert (out / "distances.png").exists() and (out / "scree.png").exists()
    meta = json.loads((out / "run.json").read_text())
    assert meta["config"]["level"] == 0.975 and meta["config"]["kappa"] == "fixed:2"


def test_outlier_density_kind_emits_eigendensities(tmp_path):
    inp = _write_samples(tmp_path / "s.csv", _toy_units())
    out = tmp_path / "o"
    assert main(["outlier", inp, "--kind", "sample", "--degree", "3", "--knots", "2",
                 "--interval=-5,5", "--reps", "300", "--no-plots", "--out-dir", str(out)]) == 0
    rows = _read_csv(out / "eigendensities.csv")
    assert len(rows) == 512 and list(rows[0]) == ["t"] + [f"h{j}" for j in range(1, 6)]
    assert not (out / "scree.png").exists()
    rep = json.loads((out / "outlier_report.json").read_text())
    flagged = {u for u, f in zip(rep["unit_ids"], rep["flags"]) if f}
    assert {f"planted{j}" for j in range(4)} <= flagged


def test_outlier_density_grid_and_compositional(tmp_path):
    rng = np.random.default_rng(6)
    t = np.linspace(0, 1, 50)
    with open(tmp_path / "g.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "t", "density"])
        for i in range(80):
            f = np.exp(rng.normal(0, 0.3) * t + rng.normal(0, 0.3) * t ** 2 + rng.normal(0, 0.2) * np.sin(6 * t)
                       + rng.normal(0, 0.2) * np.cos(9 * t))
            f /= np.trapezoid(f, t)
            for tt, v in zip(t, f):
                w.writerow([f"g{i}", repr(float(tt)), repr(float(v))])
    assert main(["outlier", str(tmp_path / "g.csv"), "--kind", "density_grid", "--degree", "2",
                 "--knots", "2", "--reps", "200", "--no-plots", "--out-dir", str(tmp_path / "og")]) == 0
    assert (tmp_path / "og" / "eigendensities.csv").exists()
    comp = np.exp(rng.normal(size=(60, 4)))
    comp /= comp.sum(axis=1, keepdims=True)
    np.savetxt(tmp_path / "c.csv", comp, delimiter=",", header="p1,p2,p3,p4", comments="")
    assert main(["outlier", str(tmp_path / "c.csv"), "--kind", "compositional", "--kappa", "fixed:1",
                 "--reps", "200", "--no-plots", "--out-dir", str(tmp_path / "oc")]) == 0
    assert len(_read_csv(tmp_path / "oc" / "scree.csv")) == 3
    assert not (tmp_path / "oc" / "eigendensities.csv").exists()


def test_ics_command(tmp_path):
    inp = _write_mixture(tmp_path / "x.csv")
    assert main(["ics", inp, "--id-column", "id", "--no-plots", "--out-dir", str(tmp_path / "o")]) == 0
    sol = json.loads((tmp_path / "o" / "ics_solution.json").read_text())
    assert sol["schema"] == "ics-solution/1"
    assert list(_read_csv(tmp_path / "o" / "scores.csv")[0]) == ["unit_id", "ic1", "ic2", "ic3", "ic4"]


def test_sweep_grid_cells(tmp_path):
    inp = _write_samples(tmp_path / "s.csv", _toy_units(n_in=40, n_out=3))
    out = tmp_path / "o"
    args = ["sweep", inp, "--kind", "sample", "--degree", "3", "--penalty-order", "2", "--interval=-5,5",
            "--kappa", "fixed:1", "--reps", "300", "--knot-grid", "1,2,25", "--log-lambda-grid=-2,0,8",
            "--placements", "quantile,equally_spaced", "--no-plots", "--out-dir", str(out)]
    assert main(args) == 0
    cells = _read_csv(out / "sweep_cells.csv")
    assert len(cells) == 18
    missing = [c for c in cells if c["status"] == "missing"]
    assert missing and all(c["error"] for c in missing) and all(c["kappa"] == "" for c in missing)
    flags = _read_csv(out / "sweep_flags.csv")
    assert len(flags) == 18 * 43
    assert all(r["flagged"] == "" for r in flags if (r["placement"], r["n_knots"], r["lambda"]) in
               {(c["placement"], c["n_knots"], c["lambda"]) for c in missing})
    freq = _read_csv(out / "frequency.csv")
    assert len(freq) == 43 and int(freq[0]["cells_run"]) == 18 - len(missing)
    first = (out / "frequency.csv").read_bytes()
    assert main(args) == 0
    assert (out / "frequency.csv").read_bytes() == first


def test_benchmark_smoke(tmp_path):
    out = tmp_path / "b"
    t0 = time.perf_counter()
    assert main(["benchmark", "--n-reps", "5", "--threads", "2", "--out-dir", str(out)]) == 0
    assert time.perf_counter() - t0 < 120
    roc = _read_csv(out / "roc_curves.csv")
    assert list(roc[0]) == ["scheme", "pp", "tpr_mean", "fpr_mean", "tpr_halfwidth"]
    assert len(roc) == 3 * 201
    auc = _read_csv(out / "auc_table.csv")
    assert list(auc[0]) == ["scheme", "auc_mean", "auc_sd"]
    assert [r["scheme"] for r in auc] == ["gp_clr", "gp_margin", "gumbel"]
    assert all(0 <= float(r["auc_mean"]) <= 1 for r in auc)
    assert (out / "roc.png").exists()


def test_benchmark_config_file(tmp_path):
    ini = tmp_path / "b.ini"
    ini.write_text("[pipeline]\nseed = 4\n\n[benchmark]\nschemes = gumbel\nn_reps = 3\nn = 80\n"
                   "outlier_rate = 0.05\n\n[scheme:gumbel]\ngumbel_outlier_mean = 0.7, 0.08\n")
    out = tmp_path / "o"
    assert main(["benchmark", "--config", str(ini), "--no-plots", "--out-dir", str(out)]) == 0
    meta = json.loads((out / "run.json").read_text())
    sch = meta["schemes"][0]
    assert sch["n"] == 80 and sch["seed"] == 4 and list(sch["gumbel_outlier_mean"]) == [0.7, 0.08]
    assert len(_read_csv(out / "roc_curves.csv")) == 81


def test_cutoff_table(tmp_path):
    out = tmp_path / "c"
    assert main(["cutoff", "--n", "100,200", "--p", "3", "--kappa-rules", "fixed:1;fixed:2;dagostino",
                 "--reps", "200", "--out-dir", str(out)]) == 0
    rows = _read_csv(out / "cutoff_table.csv")
    assert len(rows) == 6
    assert list(rows[0]) == ["n", "p", "kappa_rule", "level", "reps", "seed", "cutoff", "replicates_used"]
    assert float(rows[0]["cutoff"]) < float(rows[1]["cutoff"])


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(input="data.csv", kind="sample", knots=5, interval=(-1.5, 2.0), lam=0.3,
                         kappa="fixed:3", seed=11, plots=False, threads=4)
    ini = configparser.ConfigParser()
    ini["pipeline"] = cfg.to_ini_section()
    p = tmp_path / "c.ini"
    with open(p, "w") as fh:
        ini.write(fh)
    back = configparser.ConfigParser()
    back.read(p)
    assert PipelineConfig.from_mapping(dict(back["pipeline"])) == cfg
    assert PipelineConfig.from_mapping(cfg.to_ini_section()) == cfg
    with pytest.raises(ValueError):
        PipelineConfig(kind="images")
    with pytest.raises(ValueError):
        PipelineConfig(kappa="sometimes")


def test_cli_flags_override_config(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[pipeline]\nkappa = fixed:1\nreps = 200\nplots = false\n")
    inp = _write_mixture(tmp_path / "x.csv")
    out = tmp_path / "o"
    assert main(["outlier", inp, "--id-column", "id", "--config", str(ini), "--kappa", "fixed:3",
                 "--out-dir", str(out)]) == 0
    rep = json.loads((out / "outlier_report.json").read_text())
    assert rep["kappa"] == 3 and rep["mc_meta"]["reps"] == 200
    assert not (out / "scree.png").exists()


def test_parse_number_list():
    assert parse_number_list("1,2,5") == [1.0, 2.0, 5.0]
    assert parse_number_list("2:10:4", integer=True) == [2, 6, 10]
    assert parse_number_list("-2:2") == [-2.0, -1.0, 0.0, 1.0, 2.0]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "icsfree", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
