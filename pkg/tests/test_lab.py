import json
from fractions import Fraction

import pytest

from odoprime.lab.cli import EXIT_FAIL, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main
from odoprime.lab.config import (
    ConfigError,
    ExperimentConfig,
    InfeasibleConfig,
    check_seed,
    config_hash,
    load_config,
    parse_config,
    resolve,
)
from odoprime.lab.experiments import EXPERIMENTS, run_experiment
from odoprime.lab.report import SCHEMA, Report, jsonable
from odoprime.schedule import AlphabetSchedule

CUSTOM = """
experiment = "growth"
seed = 7

[schedule]
base = 8
depth = 9
E = [{pos = 3, kind = "empty", size = 5}, {pos = 6, kind = "W", size = 10}]

[params]
"""


# -- config ------------------------------------------------------------------

def test_parse_custom_schedule():
    cfg = parse_config(CUSTOM)
    assert cfg.experiment == "growth" and cfg.seed == 7
    s = cfg.build_schedule()
    assert s.sizes[3] == 5 and s.sizes[6] == 10 and s.depth == 9
    assert cfg.metric_config().theta == 0.5


def test_hash_is_order_free():
    a = config_hash({"x": 1, "y": [1, 2]})
    assert a == config_hash({"y": [1, 2], "x": 1})
    assert a != config_hash({"x": 2, "y": [1, 2]})
    assert parse_config(CUSTOM).digest() == parse_config(CUSTOM).digest()


@pytest.mark.parametrize("text", [
    "seed = -1",
    "seed = 18446744073709551616",
    "seed = true",
    "colour = 1",
    "schedule = 3",
    "this is not toml",
])
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_bad_schedule_and_metric():
    with pytest.raises(InfeasibleConfig):
        ExperimentConfig(schedule={"preset": "nope"}).build_schedule()
    with pytest.raises(ConfigError):
        ExperimentConfig(metric={"theta": 2.0}).metric_config()
    with pytest.raises(ConfigError):
        ExperimentConfig().build_schedule()
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.toml")
    assert check_seed(2**64 - 1) == 2**64 - 1


def test_resolve_merges_defaults():
    fn, defaults = EXPERIMENTS["barycenter"]
    out = resolve(ExperimentConfig(params={"eps": "1/4"}), "barycenter", defaults)
    assert out.params["eps"] == "1/4" and out.params["targets"] == [1, 2]
    assert out.schedule == defaults["schedule"]
    with pytest.raises(ConfigError):
        resolve(ExperimentConfig(params={"bogus": 1}), "barycenter", defaults)


def test_experiment_on_custom_schedule():
    rep = run_experiment("growth", parse_config(CUSTOM))
    assert rep.passed


# -- report ------------------------------------------------------------------

def test_jsonable_conversions():
    assert jsonable({1: Fraction(1, 3)}) == {"1": "1/3"}
    assert jsonable(2**60) == str(2**60)
    assert jsonable(float("nan")) is None
    assert jsonable((1, 2.5)) == [1, 2.5]


def _report():
    rep = Report("demo", ExperimentConfig(seed=3), [AlphabetSchedule.preset("desk")], "m")
    rep.check("ok", True, value=Fraction(1, 2))
    rep.table("t", [{"a": 1, "b": {"c": 2}}, {"a": 2, "d": [1]}])
    rep.add_series("s", [1, 2], {"y": [0.5, 0.25]}, logy=True)
    return rep


def test_report_json_is_deterministic():
    a, b = _report().to_json(), _report().to_json()
    assert a == b
    d = json.loads(a)
    assert d["schema"] == SCHEMA and d["passed"] and d["seed"] == 3
    assert d["checks"][0]["value"] == "1/2"


def test_report_csv_sections():
    text = _report().to_csv()
    lines = text.splitlines()
    assert lines[0] == "# table: checks"
    i = lines.index("# table: t")
    assert lines[i + 1] == "a,b,d"
    assert lines[i + 2].startswith('1,"{""c"": 2}"')


def test_failed_check_flips_passed():
    rep = _report()
    rep.check("bad", False)
    assert not rep.passed


# -- command line -------------------------------------------------------------

def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_info_and_rheights(capsys):
    code, out, _ = _run(capsys, "rheights", "--preset", "desk", "--upto", "6")
    assert code == EXIT_OK
    rows = json.loads(out)["tables"]["r"]
    assert [int(r["r_i"]) for r in rows] == [1, 7, 55, 274, 1647, 13175]
    assert _run(capsys, "info", "--preset", "paper", "--depth", "4")[0] == EXIT_OK


def test_cli_time_change_and_oracle(capsys):
    code, out, _ = _run(capsys, "zeta", "0", "7", "--preset", "desk", "--depth", "5", "--oracle")
    assert code == EXIT_OK
    assert json.loads(out)["passed"]
    code, out, _ = _run(capsys, "xi", "0", "8", "--preset", "desk")
    assert code == EXIT_OK


def test_cli_reduce_csv(capsys):
    code, out, _ = _run(capsys, "reduce", "274", "--preset", "desk", "--N", "0", "--format", "csv")
    assert code == EXIT_OK
    assert out.startswith("# table: checks")


@pytest.mark.parametrize("argv,expected", [
    (["frobnicate"], EXIT_USAGE),
    (["info", "--seed", "-3"], EXIT_USAGE),
    (["zeta", "7", "1", "--preset", "desk"], EXIT_USAGE),
    (["info", "--preset", "nope"], EXIT_INFEASIBLE),
    (["orbit", "0", "--oracle"], EXIT_INFEASIBLE),
    (["experiment", "barycenter", "--preset", "desk"], EXIT_INFEASIBLE),
])
def test_cli_exit_codes(capsys, argv, expected):
    assert main(argv) == expected


def test_cli_bad_config_file(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text("seed = 1\n[params]\nbogus = 2\n")
    assert main(["experiment", "growth", "--config", str(p)]) == EXIT_INFEASIBLE


def test_cli_plot_svg(tmp_path, capsys):
    out = tmp_path / "g.json"
    code = main(["experiment", "growth", "--out", str(out), "--plot", "svg"])
    assert code == EXIT_OK
    svgs = sorted(tmp_path.glob("g_*.svg"))
    assert svgs and svgs[0].read_text().lstrip().startswith("<?xml")


def test_cli_failed_check_exit(monkeypatch, capsys):
    from odoprime.lab import cli as cli_mod

    def failing(cfg, oracle=False):
        rep = Report("x", cfg)
        rep.check("always", False)
        return rep

    monkeypatch.setitem(EXPERIMENTS, "growth", (failing, EXPERIMENTS["growth"][1]))
    assert cli_mod.main(["experiment", "growth"]) == EXIT_FAIL
