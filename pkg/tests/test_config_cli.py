import json
import math

import pytest

from qemtools import csvio, experiments
from qemtools.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from qemtools.config import ConfigError, config_from_mapping, load_config
from qemtools.mitigation.extrapolation import FitDivergence

SMALL = """
[circuit]
lx = 1
ly = 2
layers = 2
seed = 3

[probes]
mu = [0.5, 1.0, 1.5, 2.0]

[methods]
mu = [0.0, 1.0]

[mc]
trajectories = 2000
layers = 2

[costs]
steps = 20
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run(cfg_file, out, *args):
    return main([args[0], "--config", str(cfg_file), "--out", str(out), "--no-plots", *args[1:]])


# -- configuration ---------------------------------------------------------------

def test_defaults_are_valid():
    cfg = load_config(None)
    assert cfg["probes"]["mu"] == [0.5, 1.0, 1.5, 2.0]
    assert cfg.seed == 0 and len(cfg.digest()) == 16


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": {}},
        {"circuit": {"colour": 1}},
        {"circuit": {"lx": 1.5}},
        {"probes": {"mu": []}},
        {"probes": {"mu": [1.0, 1.0]}},
        {"probes": {"mu": [-0.5]}},
        {"mc": {"trajectories": -1}},
        {"methods": {"names": ["QX"]}},
        {"noise": {"models": ["amplitude"]}},
        {"noise": {"custom": {"bad": {"weights": [["II", 1.2], ["XX", -0.2]]}}}},
        {"circuit": {"lx": 3, "ly": 3}},
        {"output": {"plots": "yes"}},
    ],
)
def test_invalid_configs_rejected(raw):
    with pytest.raises(ConfigError):
        config_from_mapping(raw)


def test_custom_channel_model():
    cfg = config_from_mapping({"noise": {"models": ["mine"], "custom": {"mine": {"preset": "depolarizing2", "p": 1.0}}}})
    assert "mine" in cfg.custom_channels()


def test_toml_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[circuit]\nlx = = 2\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_seed_override_changes_digest():
    cfg = load_config(None)
    assert cfg.with_seed(7).seed == 7 and cfg.with_seed(7).digest() != cfg.digest()
    assert cfg.with_seed(None) is cfg


# -- CSV helpers ------------------------------------------------------------------

def test_csv_round_trip_and_format(tmp_path):
    path = csvio.write_csv(tmp_path / "x.csv", ["a", "b", "c"], [{"a": 1 / 3, "b": True, "c": float("nan")}], "# m")
    text = path.read_text().splitlines()
    assert text == ["# m", "a,b,c", "0.333333333333,true,nan"]
    meta, rows = csvio.read_csv(path)
    assert meta == "# m" and rows == [{"a": "0.333333333333", "b": "true", "c": "nan"}]


def test_malformed_csv_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# m\na,b\n1,2,3\n")
    with pytest.raises(ValueError):
        csvio.read_csv(p)


# -- subcommands -------------------------------------------------------------------

def test_decay_scan_rows_and_determinism(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path / "a", "decay-scan") == EXIT_OK
    assert run(cfg_file, tmp_path / "b", "decay-scan", "--threads", "3") == EXIT_OK
    for model in ("depolarizing", "detectable"):
        a = (tmp_path / "a" / f"decay_{model}.csv").read_bytes()
        b = (tmp_path / "b" / f"decay_{model}.csv").read_bytes()
        assert a == b
        meta, rows = csvio.read_csv(tmp_path / "a" / f"decay_{model}.csv")
        assert meta.startswith("# qemtools=") and "seed=3" in meta
        assert len(rows) == len({r["observable"] for r in rows}) * 4


def test_seed_flag_changes_output(cfg_file, tmp_path):
    run(cfg_file, tmp_path / "a", "decay-scan")
    run(cfg_file, tmp_path / "b", "decay-scan", "--seed", "4")
    a = (tmp_path / "a" / "decay_depolarizing.csv").read_text()
    b = (tmp_path / "b" / "decay_depolarizing.csv").read_text()
    assert a != b and "seed=4" in b.splitlines()[0]


def test_fit_from_csv_with_audit(cfg_file, tmp_path):
    out = tmp_path / "o"
    run(cfg_file, out, "decay-scan")
    code = run(cfg_file, out, "fit", "--input", str(out / "decay_depolarizing.csv"), "--audit")
    assert code == EXIT_OK
    _, fits = csvio.read_csv(out / "fit.csv")
    _, summary = csvio.read_csv(out / "fit_summary.csv")
    assert {r["noise_model"] for r in fits} == {"depolarizing"}
    assert all(int(r["k_selected"]) in (1, 2) for r in fits)
    assert experiments.audit_fits(fits, summary, 10.0) == []


def test_fit_synthetic_single_exponential(tmp_path):
    rows = [
        {"noise_model": "syn", "observable": "ZZ", "mu": mu, "expectation": 0.8 * math.exp(-0.3 * mu), "noiseless": 0.8}
        for mu in (0.5, 1.0, 1.5, 2.0)
    ]
    fits, _ = experiments.fit_decays(rows)
    assert fits[0]["k_selected"] == 1
    assert fits[0]["eps1"] < 1e-9 and fits[0]["eps2"] < 1e-9


def test_fit_synthetic_sign_crossing():
    rows = [
        {"noise_model": "syn", "observable": "ZZ", "mu": mu,
         "expectation": 0.5 * math.exp(-0.9 * mu) - 0.3 * math.exp(-0.1 * mu), "noiseless": 0.2}
        for mu in (0.5, 1.0, 1.5, 2.0)
    ]
    fits, _ = experiments.fit_decays(rows)
    assert fits[0]["k_selected"] == 2


def test_fit_rejects_malformed_csv(cfg_file, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# m\nnoise_model,observable,mu,expectation\ndep,ZZ,0.5\n")
    assert run(cfg_file, tmp_path, "fit", "--input", str(bad)) == EXIT_CONFIG
    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    assert run(cfg_file, tmp_path, "fit", "--input", str(other)) == EXIT_CONFIG


def test_mitigate_zero_noise_and_audit(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "mitigate", "--audit") == EXIT_OK
    _, rows = csvio.read_csv(tmp_path / "mitigate.csv")
    zero = [r for r in rows if float(r["mu"]) == 0.0]
    assert {r["method"] for r in zero} == {"Q", "QE", "QH"}
    assert all(abs(float(r["bias"])) < 1e-12 for r in zero)
    _, summary = csvio.read_csv(tmp_path / "mitigate_summary.csv")
    assert experiments.audit_mitigation(rows, summary) == []
    assert {r["decay_class"] for r in summary} == {"1-exp", "2-exp", "all"}


def test_mitigate_single_method(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "mitigate", "--method", "Q") == EXIT_OK
    _, rows = csvio.read_csv(tmp_path / "mitigate.csv")
    assert {r["method"] for r in rows} == {"Q"}


def test_costs_outputs(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "costs") == EXIT_OK
    _, rows = csvio.read_csv(tmp_path / "costs.csv")
    assert len(rows) == 3 * 20
    assert list(rows[0]) == experiments.COST_COLUMNS
    _, crossings = csvio.read_csv(tmp_path / "crossings.csv")
    assert any(r["pair"] == "QE-QH" and abs(float(r["mu"]) - 3.917) < 0.01 for r in crossings)


def test_mc_validate_report(cfg_file, tmp_path):
    assert run(cfg_file, tmp_path, "mc-validate") == EXIT_OK
    report = json.loads((tmp_path / "mc_validate.json").read_text())
    assert report["trajectories"] == 2000 and report["seed"] == 3
    assert {"quasi", "zero_noise", "symmetry", "pass"} <= set(report)


def test_plots_written_next_to_csv(cfg_file, tmp_path):
    assert main(["costs", "--config", str(cfg_file), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "costs.png").stat().st_size > 0


def test_exit_codes(cfg_file, tmp_path, monkeypatch):
    assert main(["decay-scan", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG
    empty = tmp_path / "empty_mu.toml"
    empty.write_text("[probes]\nmu = []\n")
    assert main(["decay-scan", "--config", str(empty), "--out", str(tmp_path)]) == EXIT_CONFIG

    def diverge(*a, **k):
        raise FitDivergence("forced")

    monkeypatch.setattr(experiments, "fit_decays", diverge)
    src = tmp_path / "d"
    run(cfg_file, src, "decay-scan")
    assert run(cfg_file, tmp_path, "fit", "--input", str(src / "decay_depolarizing.csv")) == EXIT_NUMERICAL


def test_all_flagged_is_numerical_failure(cfg_file, tmp_path, monkeypatch):
    rows = [{"noise_model": "depolarizing", "observable": "ZZII", "method": "QH", "mu": 1.0, "estimate": float("nan"),
             "truth": 0.1, "bias": float("nan"), "cost_factor": 2.0, "decay_class": "1-exp", "flagged": "NonHyperbolicDecay"}]
    monkeypatch.setattr(experiments, "mitigate", lambda *a, **k: (rows, experiments.summarize_mitigation(rows)))
    assert run(cfg_file, tmp_path, "mitigate") == EXIT_NUMERICAL
