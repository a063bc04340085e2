import json

import numpy as np
import pytest

from revpref.cli import main
from revpref.core import InvalidInstance
from revpref.exog import load_price_file
from revpref.harness import (
    SCHEMA,
    ExperimentConfig,
    GeneratorSpec,
    generate_instance,
    run_experiment,
    to_json,
    trial_rng,
)

TWO_GOODS = {"n": 2, "v": [1.0, 0.5], "c": [0.1, 0.2], "B": 1.0, "delta": 0.5}


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "two.json"
    path.write_text(json.dumps(TWO_GOODS))
    return path


def test_generator_is_seeded():
    a = generate_instance(4, 0.2, (0.5, 4), trial_rng(9, 3))
    b = generate_instance(4, 0.2, (0.5, 4), trial_rng(9, 3))
    assert a.to_dict() == b.to_dict()
    assert np.all(a.v * 5 == np.round(a.v * 5))


def test_generator_rejects_off_grid_delta():
    with pytest.raises(InvalidInstance):
        generate_instance(2, 0.3, (0.5, 2), trial_rng(0, 0))


def test_generator_spec_defaults():
    spec = GeneratorSpec.parse("n=3,delta=0.25")
    assert (spec.bmin, spec.bmax) == (0.5, 3.0)
    with pytest.raises(ValueError):
        GeneratorSpec.parse("n=3,delta=0.25,foo=1")


def test_price_file_skips_comments_and_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("# schema=1\np0,p1\n0.5,1\n0.25,0.75\n")
    rows = load_price_file(path, 2)
    assert [r.tolist() for r in rows] == [[0.5, 1.0], [0.25, 0.75]]


def test_price_file_rejects_zero_price(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("0.5,0\n")
    with pytest.raises(ValueError):
        load_price_file(path, 2)


def test_json_is_sorted_and_stable():
    assert to_json({"b": 1, "a": [0.1, 2]}) == to_json({"a": [0.1, 2], "b": 1})
    assert to_json({"b": 1, "a": 0.5}).index('"a"') < to_json({"b": 1, "a": 0.5}).index('"b"')


@pytest.mark.parametrize("sub", ["oracle", "optprice", "learnval", "profitmax", "exog"])
def test_every_subcommand_writes_reports(tmp_path, sub):
    cfg = ExperimentConfig(
        subcommand=sub, gen=GeneratorSpec(3, 0.25, 0.5, 3.0), rounds=50, trials=2, seed=1,
        out=tmp_path, trace=True,
    )
    summary, digest = run_experiment(cfg)
    assert digest.startswith(sub)
    assert len(summary["trials"]) == 2
    lines = (tmp_path / "trials.csv").read_text().splitlines()
    assert lines[0] == f"# schema={SCHEMA}"
    assert len(lines) == 2 + 2
    assert (tmp_path / "trace_1.csv").exists()


def test_gen_writes_instances(tmp_path):
    cfg = ExperimentConfig(subcommand="gen", gen=GeneratorSpec(2, 0.5, 0.5, 2.0), trials=3, out=tmp_path)
    run_experiment(cfg)
    saved = json.loads((tmp_path / "instance_2.json").read_text())
    assert saved["n"] == 2


def test_profitmax_two_goods(tmp_path, instance_file):
    cfg = ExperimentConfig(subcommand="profitmax", instance=str(instance_file), rounds=1000, out=tmp_path)
    summary, _ = run_experiment(cfg)
    trial = summary["trials"][0]
    assert trial["complete"]
    assert trial["per_round_regret"] <= 0.02


def test_exog_trials_table(tmp_path):
    cfg = ExperimentConfig(
        subcommand="exog", gen=GeneratorSpec(2, 0.2, 0.5, 2.0), rounds=100, trials=100, seed=4, out=tmp_path
    )
    run_experiment(cfg)
    lines = (tmp_path / "trials.csv").read_text().splitlines()
    assert len(lines) == 2 + 100


def test_config_needs_exactly_one_source(instance_file):
    with pytest.raises(ValueError):
        ExperimentConfig(subcommand="oracle")
    with pytest.raises(ValueError):
        ExperimentConfig(subcommand="oracle", instance=str(instance_file), gen=GeneratorSpec(2, 0.5, 0.5, 2))


def test_cli_reruns_are_identical(tmp_path, instance_file, capsys):
    for name in ("a", "b"):
        args = ["exog", "--instance", str(instance_file), "--rounds", "60", "--trials", "3",
                "--seed", "7", "--trace", "--out", str(tmp_path / name)]
        assert main(args) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == out[1]
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_cli_reports_missing_instance(tmp_path, capsys):
    code = main(["optprice", "--instance", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code != 0
    assert "revpref: error" in capsys.readouterr().err


def test_cli_reports_bad_delta(tmp_path, capsys):
    assert main(["gen", "--gen", "n=2,delta=0.3", "--out", str(tmp_path)]) != 0
    assert capsys.readouterr().err
