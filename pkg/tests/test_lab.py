import json
from fractions import Fraction

import pytest

from hdx import cochain as cc
from hdx import lab
from hdx.complex import complete_complex
from hdx.steiner import sample_model


def test_certificate_small_cases():
    assert lab.complete_expansion_certificate(5, 2) == (True, Fraction(0), Fraction(2))
    holds, slack, nontrivial = lab.complete_expansion_certificate(4, 1)
    assert holds and slack == 0 and nontrivial == 1


def test_certificate_budget():
    with pytest.raises(OverflowError):
        lab.complete_expansion_certificate(6, 2, budget=8)


def test_link_expansion_exhaustive_matches_expansion_constant():
    rec = lab.run_trial("link_expansion", {"n": 6, "d": 2, "k": 0, "rho_dim": -1, "c": 0}, 1)
    assert rec.values["method"] == "exhaustive"
    assert rec.values["min_ratio"] == cc.expansion_constant(complete_complex(6, 2), 1).h


def test_link_expansion_threshold_filters_classes():
    lo = lab.run_trial("link_expansion", {"n": 6, "d": 2, "k": 0, "rho_dim": -1, "c": 0}, 1)
    hi = lab.run_trial("link_expansion", {"n": 6, "d": 2, "k": 0, "rho_dim": -1, "c": "0.3"}, 1)
    assert hi.values["tested"] < lo.values["tested"]
    assert hi.values["min_ratio"] >= lo.values["min_ratio"]


def test_link_expansion_vacuous_above_one():
    rec = lab.run_trial("link_expansion", {"n": 5, "d": 2, "k": 0, "rho_dim": -1, "c": 1}, 1)
    assert rec.values["tested"] == 0 and "vacuous" in rec.flags


def test_link_expansion_sampled_model():
    rec = lab.run_trial("link_expansion", {"n": 9, "d": 3, "k": 4, "rho_dim": -1, "c": "0.05", "samples": 30}, 3)
    assert rec.values["method"] == "sampled" and rec.values["tested"] == 30
    assert rec.values["min_ratio"] > 0


@pytest.mark.parametrize("params", [
    {"n": 9, "d": 2, "k": 1},
    {"n": 9, "d": 2, "k": 4, "complete": True},
    {"n": 10, "d": 3, "k": 3, "rho_size": 1},
])
def test_intersection_facts(params):
    for seed in range(5):
        rec = lab.run_trial("intersection", params, seed)
        assert rec.passed is True


def test_forbidden_bound_trials_pass():
    for seed in range(5):
        assert lab.run_trial("forbidden_bound", {"n": 16, "d": 3, "rho_size": 1}, seed).passed


def test_link_lambda_single_system_links_are_matchings():
    rec = lab.run_trial("link_lambda", {"n": 13, "d": 2, "k": 1, "complete": True}, 4)
    assert rec.values["max_lambda"] == rec.values["min_lambda"] == 1.0


def test_codim2_links():
    s = sample_model(9, 2, 2, 5, completion=True)
    links = lab.codim2_links(9, 2, [b.blocks for b in s.systems])
    assert all(len(e) == 8 for e in links.values()) and len(links) == 9


def test_records_reproduce():
    p = {"n": 30, "d": 2, "k": 3}
    a, b = lab.run_trial("link_lambda", p, 8), lab.run_trial("link_lambda", p, 8)
    assert a.values == b.values


def test_report_empty():
    rep = lab.report([])
    assert rep.ok and rep.cells == [] and rep.csv().count("\n") == 1
    assert json.loads(rep.summary_json())["records"] == 0


def test_report_single_record_quantiles():
    rec = lab.run_trial("complete_h", {"n": 5, "d": 1}, 0)
    rep = lab.report([rec])
    q = rep.cells[0]["metrics"]["h"]
    assert len(set(q.values())) == 1 and q["median"] == 1.5


def test_report_is_deterministic(tmp_path):
    cfg = lab.ExperimentConfig("link_lambda", {"n": (20,), "d": (2,), "k": (2, 4)}, trials=3, seed=5)
    recs = lab.run_experiment(cfg, threads=1)
    again = lab.run_experiment(cfg, threads=1)
    assert lab.report(recs).csv() == lab.report(list(reversed(again))).csv()
    rep = lab.report(recs)
    assert rep.plots["lambda_vs_k"]
    paths = lab.write_outputs(rep, str(tmp_path))
    assert {p.rsplit("/", 1)[1] for p in paths} == {"records.csv", "summary.json", "lambda_vs_k.png"}
    assert rep.trends and rep.trends[0]["direction"] == "non_increasing"


def test_failures_reach_the_summary():
    bad = lab.TrialRecord("forbidden_bound", {"n": 1}, 0, {}, False)
    rep = lab.report([bad])
    assert not rep.ok and rep.summary()["hard_assertions"]["failed"] == 1


def test_config_loading(tmp_path):
    path = tmp_path / "e.toml"
    path.write_text(
        'seed = 4\noutput = "out"\n\n[[experiment]]\nname = "certificate"\nn = [4, 5]\nd = 2\n\n'
        '[[experiment]]\nname = "forbidden_bound"\nseed = 9\ntrials = 2\nn = 12\nd = 3\nrho_size = 1\n'
    )
    a, b = lab.load_configs(str(path))
    assert a.cells() == [{"d": 2, "n": 4}, {"d": 2, "n": 5}] and a.seed == 4 and a.output == "out"
    assert b.seed == 9 and b.trials == 2
    with pytest.raises(ValueError):
        lab.configs_from_dict({"experiment": [{"name": "nope"}]})


def test_trial_seeds_depend_on_cell():
    s1 = lab.trial_seed(1, "link_lambda", {"k": 3}, 0)
    assert s1 == lab.trial_seed(1, "link_lambda", {"k": 3}, 0)
    assert s1 != lab.trial_seed(1, "link_lambda", {"k": 4}, 0)
    assert s1 != lab.trial_seed(1, "link_lambda", {"k": 3}, 1)


@pytest.mark.parametrize("name", ["quick.toml", "desk.toml"])
def test_shipped_configs_load(name):
    from pathlib import Path

    configs = lab.load_configs(Path(__file__).parent.parent / "experiments" / name)
    assert configs and all(c.name in lab.EXPERIMENTS for c in configs)
    assert all(c.cells() for c in configs)


def test_quick_config_runs(tmp_path):
    from pathlib import Path

    from hdx.cli import main

    cfg = Path(__file__).parent.parent / "experiments" / "quick.toml"
    assert main(["experiment", str(cfg), "--seed", "1", "-o", str(tmp_path), "--no-figures"]) == 0
    assert (tmp_path / "records.csv").exists() and (tmp_path / "summary.json").exists()
