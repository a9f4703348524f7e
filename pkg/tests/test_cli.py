"""Config parsing, override precedence, and the four command verbs."""

import json
import os

import numpy as np
import pytest

from pcasmooth.cli import (
    ConfigError,
    _load_config,
    evaluate_estimates,
    main,
    parse_config,
    run,
)
from pcasmooth.experiments import replication_rng
from pcasmooth.hilbert import read_curves
from pcasmooth.synthetic import (
    generate_process,
    generate_regression,
    support_half_widths,
    true_projector,
)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    # main() reads os.environ; keep ambient overrides out of the tests
    for name in list(os.environ):
        if name.startswith("PCASMOOTH_"):
            monkeypatch.delenv(name)


def _write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _minimal(**extra):
    doc = {"seed": 7, "D": 3, "process": {"J": 6}}
    doc.update(extra)
    return doc


# parsing and defaults -----------------------------------------------------


def test_minimal_config_fills_documented_defaults(tmp_path):
    cfg = parse_config(_write_config(tmp_path, _minimal()))
    assert cfg.seed == 7
    assert cfg.D == 3
    assert cfg.process.J == 6
    assert cfg.process.seed == 7  # run seed flows into the process
    assert cfg.process.spectrum[0] == 1.0
    assert cfg.process.spectrum[1] == 0.5
    assert cfg.kernel.family == "naive"
    assert cfg.n_grid == (250, 500, 1000, 2000, 4000)
    assert cfg.replications == 100
    assert cfg.bandwidth_rule.kind == "stone" and cfg.bandwidth_rule.p == 2
    assert cfg.anchors_per_run == 20
    assert cfg.model.target == "sine_quad"
    assert cfg.model.noise_halfwidth == 0.25
    assert cfg.model.D_true == 3  # defaults to D


def test_explicit_spectrum_list(tmp_path):
    doc = _minimal(process={"J": 4, "spectrum": [4.0, 2.0, 1.0, 0.5]})
    doc["D"] = 3
    cfg = parse_config(_write_config(tmp_path, doc))
    assert cfg.process.spectrum == (4.0, 2.0, 1.0, 0.5)


def test_model_null_disables_regression(tmp_path):
    cfg = parse_config(_write_config(tmp_path, _minimal(model=None)))
    assert cfg.model is None


def test_override_precedence_file_env_set(tmp_path):
    path = _write_config(tmp_path, _minimal(replications=9))
    env = {"PCASMOOTH_REPLICATIONS": "7", "PCASMOOTH_D": "4",
           "PCASMOOTH_MODEL__NOISE_HALFWIDTH": "0.1"}
    cfg, _ = _load_config(path, overrides=["replications=5"], env=env)
    assert cfg.replications == 5  # --set beats the environment
    assert cfg.D == 4  # case-insensitive key canonicalization
    assert cfg.model.noise_halfwidth == 0.1  # double underscore nests
    cfg_env_only, _ = _load_config(path, env=env)
    assert cfg_env_only.replications == 7  # environment beats the file


# error reporting ----------------------------------------------------------


def test_config_error_paths(tmp_path):
    cases = [
        ({"seed": 7, "D": 3, "process": {"J": 6}, "extra": 1},
         "unknown key 'extra'"),
        ({"seed": 7, "D": 3, "process": {"J": 6, "shape": "flat"}},
         "process: unknown key 'shape'"),
        ({"D": 3, "process": {"J": 6}},
         "missing required key 'seed'"),
        ({"seed": 7, "D": 3, "process": {}},
         "process: missing required key 'J'"),
        (_minimal(process={"J": 4, "spectrum": [1.0, 1.0, 0.5, 0.25]}),
         "spectrum must be strictly decreasing; entry 1"),
        (_minimal(model={"D_true": 1}),
         "needs D_true >= 2"),
        (_minimal(kernel={"family": "box"}),
         "kernel.family: unknown kernel family 'box'"),
        (_minimal(bandwidth_rule={"kind": "fixed"}),
         "bandwidth_rule: missing required key 'h'"),
        (_minimal(n_grid=250),
         "expected a list of sample sizes"),
        (_minimal(n_grid=[250, "a"]),
         r"n_grid\[1\]: expected an integer"),
    ]
    for doc, pattern in cases:
        path = _write_config(tmp_path, doc)
        with pytest.raises(ConfigError, match=pattern):
            parse_config(path)


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(str(bad))
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config(str(tmp_path / "absent.json"))


def test_set_flag_requires_assignment(tmp_path):
    path = _write_config(tmp_path, _minimal())
    with pytest.raises(ConfigError, match="--set expects key=value"):
        run("validate-config", path, overrides=["replications"], env={})


def test_run_verb_guards(tmp_path):
    path = _write_config(tmp_path, _minimal())
    with pytest.raises(ValueError, match="unknown verb"):
        run("smooth", path, env={})
    with pytest.raises(ConfigError, match="verb 'rates' requires --out"):
        run("rates", path, env={})


# validate-config ----------------------------------------------------------


def test_validate_config_logs_summary_line(tmp_path):
    path = _write_config(tmp_path, _minimal())
    lines = []
    assert run("validate-config", path, env={}, log=lines.append) == 0
    assert len(lines) == 1
    assert lines[0].startswith("config OK:")
    assert "J=6 D=3" in lines[0]
    assert not list(tmp_path.glob("**/*.csv"))  # writes nothing


# simulate -----------------------------------------------------------------


def test_simulate_writes_parseable_curve_files(tmp_path):
    doc = _minimal(n_grid=[40, 80], replications=3)
    path = _write_config(tmp_path, doc)
    out = tmp_path / "sim"
    assert run("simulate", path, str(out), env={}, log=lambda m: None) == 0
    for n in (40, 80):
        points, curves = read_curves(out / f"sample_n{n}.csv")
        assert points.size == 256
        assert curves.shape == (n, 256)
        resp = (out / f"responses_n{n}.csv").read_text().strip().splitlines()
        assert len(resp) == n
        assert all(np.isfinite(float(v)) for v in resp)


# estimate -----------------------------------------------------------------


def test_estimate_generated_data_and_byte_identical_rerun(tmp_path):
    doc = _minimal(n_grid=[60, 120], replications=3, anchors_per_run=5,
                   bandwidth_rule={"kind": "fixed", "h": 0.5})
    path = _write_config(tmp_path, doc)
    out = tmp_path / "est"
    assert run("estimate", path, str(out), env={}, log=lambda m: None) == 0
    text = (out / "estimates.csv").read_text()
    lines = text.strip().splitlines()
    assert lines[0] == "anchor_index,n,bandwidth,density,regression,empty_window"
    assert len(lines) == 6  # header + one row per anchor
    assert all(line.split(",")[1] == "120" for line in lines[1:])  # last grid n
    run("estimate", path, str(out), env={}, log=lambda m: None)
    assert (out / "estimates.csv").read_text() == text


def test_estimate_round_trip_through_curve_files(tmp_path):
    # simulate exports curves; estimate ingests them; the results must match
    # an in-process evaluation of the same draws up to coefficient roundoff.
    doc = _minimal(n_grid=[300], replications=2, anchors_per_run=8,
                   bandwidth_rule={"kind": "fixed", "h": 0.5})
    sim_path = _write_config(tmp_path, doc, "sim.json")
    sim_out = tmp_path / "sim"
    run("simulate", sim_path, str(sim_out), env={}, log=lambda m: None)

    est_doc = dict(doc)
    est_doc["data"] = {"file": str(sim_out / "sample_n300.csv"),
                       "grid_rule": "periodic",
                       "responses": str(sim_out / "responses_n300.csv")}
    est_path = _write_config(tmp_path, est_doc, "est.json")
    est_out = tmp_path / "est"
    run("estimate", est_path, str(est_out), env={}, log=lambda m: None)

    cfg = parse_config(sim_path)
    rng = replication_rng(cfg.seed, 0)
    X = generate_process(cfg.process, 300, seed=rng)
    sample = generate_regression(X, cfg.model, true_projector(cfg.process, 3),
                                 seed=rng,
                                 support_half_widths=support_half_widths(cfg.process))
    expected = evaluate_estimates(cfg, X, sample.responses)

    lines = (est_out / "estimates.csv").read_text().strip().splitlines()[1:]
    assert len(lines) == 8
    for line, rec in zip(lines, expected):
        idx, n, h, dens, regr, empty = line.split(",")
        assert int(idx) == rec["anchor_index"]
        assert int(n) == 300
        assert float(h) == rec["bandwidth"]
        assert float(dens) == pytest.approx(rec["density"], rel=1e-8, abs=1e-12)
        assert float(regr) == pytest.approx(rec["regression"], rel=1e-8, abs=1e-12)
        assert int(empty) == int(rec["empty_window"])


def test_estimate_rejects_trapezoid_rule_on_periodic_export(tmp_path):
    # The exported grid omits the wrap-around endpoint, so trapezoid weights
    # break basis orthonormality; the mismatch must surface, not be absorbed.
    doc = _minimal(n_grid=[40], replications=2, model=None,
                   bandwidth_rule={"kind": "fixed", "h": 0.5})
    sim_path = _write_config(tmp_path, doc, "sim.json")
    sim_out = tmp_path / "sim"
    run("simulate", sim_path, str(sim_out), env={}, log=lambda m: None)
    est_doc = dict(doc)
    est_doc["data"] = {"file": str(sim_out / "sample_n40.csv"),
                       "grid_rule": "trapezoid"}
    est_path = _write_config(tmp_path, est_doc, "est.json")
    with pytest.raises(ValueError, match="deviates from identity"):
        run("estimate", est_path, str(tmp_path / "est"), env={}, log=lambda m: None)


def test_estimate_reports_response_file_problems(tmp_path):
    doc = _minimal(n_grid=[40], replications=2,
                   bandwidth_rule={"kind": "fixed", "h": 0.5})
    sim_path = _write_config(tmp_path, doc, "sim.json")
    sim_out = tmp_path / "sim"
    run("simulate", sim_path, str(sim_out), env={}, log=lambda m: None)

    bad = tmp_path / "bad_responses.csv"
    bad.write_text("1.0\nabc\n")
    est_doc = dict(doc)
    est_doc["data"] = {"file": str(sim_out / "sample_n40.csv"),
                       "grid_rule": "periodic", "responses": str(bad)}
    est_path = _write_config(tmp_path, est_doc, "est.json")
    with pytest.raises(ConfigError, match="line 2: could not parse 'abc'"):
        run("estimate", est_path, str(tmp_path / "e1"), env={}, log=lambda m: None)

    short = tmp_path / "short_responses.csv"
    short.write_text("1.0\n2.0\n3.0\n")
    est_doc["data"]["responses"] = str(short)
    est_path = _write_config(tmp_path, est_doc, "est2.json")
    with pytest.raises(ConfigError, match="has 3 values but the curve file has 40"):
        run("estimate", est_path, str(tmp_path / "e2"), env={}, log=lambda m: None)


def test_evaluate_estimates_validation(tmp_path):
    cfg = parse_config(_write_config(tmp_path, _minimal()))
    with pytest.raises(ValueError, match="dimension 4 but the config says J=6"):
        evaluate_estimates(cfg, np.zeros((5, 4)))
    with pytest.raises(ValueError, match="nonempty"):
        evaluate_estimates(cfg, np.zeros((0, 6)))


# rates --------------------------------------------------------------------


def test_rates_verb_byte_identical_serial_and_parallel(tmp_path):
    doc = _minimal(process={"J": 5}, n_grid=[150, 300, 600], replications=4,
                   anchors_per_run=4, model=None, seed=2024)
    doc["seed"] = 2024
    path = _write_config(tmp_path, doc)
    outs = [tmp_path / name for name in ("a", "b", "c")]
    assert run("rates", path, str(outs[0]), env={}, log=lambda m: None) == 0
    run("rates", path, str(outs[1]), env={}, log=lambda m: None)
    run("rates", path, str(outs[2]), workers=2, env={}, log=lambda m: None)
    names = sorted(os.listdir(outs[0]))
    assert names == ["density_equivalence.csv", "projector_convergence.csv",
                     "sum_equivalence.csv", "summary.json"]
    for name in names:
        first = (outs[0] / name).read_bytes()
        assert (outs[1] / name).read_bytes() == first
        assert (outs[2] / name).read_bytes() == first
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert sorted(summary["rate_fits"]) == ["density_equivalence",
                                            "projector_convergence",
                                            "sum_equivalence"]


# main entry point ---------------------------------------------------------


def test_main_validate_config_ok(tmp_path, capsys):
    path = _write_config(tmp_path, _minimal())
    assert main(["validate-config", "--config", path]) == 0
    assert "config OK:" in capsys.readouterr().err


def test_main_reports_errors_as_json(tmp_path, capsys):
    missing = str(tmp_path / "absent.json")
    assert main(["validate-config", "--config", missing]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "ConfigError"
    assert "cannot read config" in record["message"]


def test_main_rejects_unknown_verb(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x.json"])
    assert exc.value.code == 2
