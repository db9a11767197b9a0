from __future__ import annotations

import csv
import json
from fractions import Fraction

import pytest

from uets.adversaries import gen_random_instance
from uets.algorithms import Alg1, Ignore, ListSingletons, SettingsMismatchError, SingleBatch, make_strategy
from uets.cli import main
from uets.core import SETTINGS, Instance, Job, ScheduleTrace
from uets.engine import simulate
from uets.harness import (
    LINEUP,
    ConfigError,
    CorpusSpec,
    Report,
    check_lineup,
    evaluate,
    reference_value,
    resolve_settings,
    run_adversary,
    run_experiment,
    sweep_corpus,
    thread_count,
)
from uets.instance_io import instance_from_json, instance_to_json, load_instance, save_instance
from uets.setup_models import ConstantSetup

FAMILIES = ["constant", "unweighted", "type_specific", "library_based", "tsp_based", "explicit"]
SMALL = {"draws": 12, "seed": 3, "n_max": 5}


@pytest.mark.parametrize("family", FAMILIES)
def test_instance_round_trip(family, tmp_path):
    inst = gen_random_instance(11, 5, 3, family, ("uniform", [0, "1/3", 2]))
    jobs = tuple(Job(j.id, j.exec_time, Fraction(j.id, 2), j.type_tag, j.libraries, j.point) for j in inst.jobs)
    inst = Instance(jobs, inst.machines, inst.setup)
    back = instance_from_json(json.loads(json.dumps(instance_to_json(inst))))
    assert back.jobs == inst.jobs and back.machines == inst.machines
    for s in ([], [0], [1, 3], range(5)):
        assert back.batch_cost(s) == inst.batch_cost(s)
    save_instance(inst, tmp_path / "i.json")
    assert load_instance(tmp_path / "i.json").jobs == inst.jobs


def test_malformed_instance():
    with pytest.raises(ValueError):
        instance_from_json({"jobs": []})


def test_reference_kinds():
    assert reference_value(gen_random_instance(0, 5, 2))[1] == "oracle"
    late = Instance((Job(0, 1), Job(1, 1, 2)), 2, ConstantSetup())
    assert reference_value(late) == (Fraction(4), "oracle_releases")
    assert reference_value(gen_random_instance(0, 13, 2))[1] == "lemma"


def test_evaluate_row():
    row = evaluate(gen_random_instance(5, 6, 2, "unweighted"), SingleBatch(), SETTINGS["suets-np"])
    assert row.valid and row.bound_kind == "oracle"
    assert row.ratio == row.makespan / row.opt_or_bound >= 1
    assert row.guarantee_satisfied is True and not row.failed
    assert row.to_json()["makespan"] == f"{row.makespan.numerator}/{row.makespan.denominator}"


def test_empty_instance_has_ratio_one():
    row = evaluate(Instance((), 2, ConstantSetup()), SingleBatch(), SETTINGS["suets-np"])
    assert row.makespan == 0 and row.ratio == 1 and row.guarantee_satisfied


def test_releases_without_ignore_are_not_judged():
    inst = Instance((Job(0, 1), Job(1, 1, 2)), 2, ConstantSetup())
    assert evaluate(inst, ListSingletons(), SETTINGS["suets-np"]).guarantee_satisfied is None
    assert evaluate(inst, Ignore(ListSingletons()), SETTINGS["suets-np"]).guarantee_satisfied is True


def test_conditional_rows_are_not_judged():
    row = evaluate(gen_random_instance(3, 14, 2, "type_specific", types=4), Alg1(), SETTINGS["suets-np"])
    assert row.conditional and row.guarantee_satisfied is None and row.bound_kind == "lemma"


def test_oracle_ratio_never_below_one():
    # an online schedule beating the offline optimum would mean a broken engine or oracle
    report = sweep_corpus(CorpusSpec(**SMALL), threads=1)
    assert all(r.ratio >= 1 for r in report.rows if r.bound_kind == "oracle" and r.ratio is not None)


def test_sweep_is_deterministic_and_thread_independent(monkeypatch):
    one = sweep_corpus(CorpusSpec(**SMALL), threads=1).to_jsonl()
    monkeypatch.setenv("UETS_THREADS", "4")
    assert thread_count() == 4
    four = sweep_corpus(CorpusSpec(**SMALL)).to_jsonl()
    assert one == four


def test_bad_thread_count(monkeypatch):
    monkeypatch.setenv("UETS_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count()


def test_report_rows_follow_lineup():
    report = sweep_corpus(CorpusSpec(draws=2, n_max=4), threads=1)
    assert [(r.strategy, r.setting) for r in report.rows[: len(LINEUP)]] == list(LINEUP)
    assert [r.index for r in report.rows] == [0] * len(LINEUP) + [1] * len(LINEUP)
    assert report.ok and report.summary()["rows"] == 2 * len(LINEUP)


def test_corpus_spec_checks():
    with pytest.raises(ConfigError):
        CorpusSpec(n_max=13)
    with pytest.raises(ConfigError):
        CorpusSpec.from_json({"bogus": 1})
    spec = CorpusSpec(**SMALL)
    assert CorpusSpec.from_json(spec.to_json()) == spec
    assert spec.draw(4)[0].jobs == spec.draw(4)[0].jobs


def test_lineup_mismatch_is_rejected():
    with pytest.raises(SettingsMismatchError):
        check_lineup([("alg3", "suets-np")])


def test_resolve_settings():
    assert resolve_settings("muets-p") == SETTINGS["muets-p"]
    assert resolve_settings({"allow_preemption": True}) == SETTINGS["suets-p"]
    with pytest.raises(ConfigError):
        resolve_settings("nope")


def test_run_adversary_row():
    row, con, trace = run_adversary("np_single", 2, make_strategy("list_singletons"))
    assert row.bound_kind == "witness" and row.valid
    assert row.extra["forced"] and row.extra["witness_ok"]
    assert trace.makespan == row.makespan >= con.forced_bound


def test_run_experiment_generator():
    config = {"strategy": "alg1", "setting": "suets-np", "instance": {"generator": {"seed": 2, "n": 6, "m": 2}}}
    a = run_experiment(config).to_jsonl()
    assert a == run_experiment(config).to_jsonl()
    assert json.loads(a.splitlines()[0])["seed"] == 2


def test_run_experiment_errors():
    with pytest.raises(ConfigError):
        run_experiment({"strategy": "alg1"})
    with pytest.raises(ConfigError):
        run_experiment({"strategy": "alg1", "instance": {"nothing": 1}})
    with pytest.raises(SettingsMismatchError):
        run_experiment({"strategy": "alg1", "setting": "suets-np", "instance": {"adversary": {"construction": "p_single", "m": 2}}})


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_cli_run_file(tmp_path, capsys):
    save_instance(gen_random_instance(1, 5, 2, "unweighted"), tmp_path / "inst.json")
    cfg = write_json(tmp_path / "cfg.json", {"strategy": "alg1", "setting": "suets-np", "instance": {"file": "inst.json"}, "trace_dir": "traces"})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    row = json.loads((tmp_path / "out" / "report.jsonl").read_text().splitlines()[1])
    assert row["bound_kind"] == "oracle" and row["valid"]
    trace = row["trace_path"]
    assert main(["validate", "--trace", trace, "--instance", str(tmp_path / "inst.json")]) == 0
    assert "valid" in capsys.readouterr().out


def test_cli_validate_rejects_wrong_instance(tmp_path, capsys):
    inst = gen_random_instance(1, 4, 2)
    trace = simulate(inst, SingleBatch(), SETTINGS["suets-np"])
    (tmp_path / "t.jsonl").write_text(trace.to_jsonl())
    save_instance(gen_random_instance(2, 5, 2), tmp_path / "other.json")
    assert main(["validate", "--trace", str(tmp_path / "t.jsonl"), "--instance", str(tmp_path / "other.json")]) == 1
    assert ScheduleTrace.from_jsonl(trace.to_jsonl()).to_jsonl() == trace.to_jsonl()


def test_cli_mismatch_exits_2(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", {"strategy": "alg3", "setting": "suets-np", "instance": {"generator": {"seed": 0, "n": 4, "m": 2}}})
    assert main(["run", "--config", cfg]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 2


def test_cli_sweep_and_plot(tmp_path, capsys):
    corpus = write_json(tmp_path / "corpus.json", SMALL)
    out = tmp_path / "sweep"
    assert main(["sweep", "--corpus", corpus, "--out", str(out)]) == 0
    with open(out / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == SMALL["draws"] * len(LINEUP)
    pytest.importorskip("matplotlib")
    assert main(["plot", "--csv", str(out / "report.csv"), "--out", str(tmp_path / "w.png")]) == 0
    assert (tmp_path / "w.png").stat().st_size > 0


def test_cli_sweep_overrides(tmp_path):
    assert main(["sweep", "--corpus", "default", "--draws", "3", "--seed", "9", "--out", str(tmp_path)]) == 0
    header = json.loads((tmp_path / "report.jsonl").read_text().splitlines()[0])
    assert header["seed"] == 9 and header["corpus"]["draws"] == 3


def test_cli_adversary(tmp_path, capsys):
    out = tmp_path / "adv"
    assert main(["adversary", "--construction", "np_multi", "--m", "4", "--strategy", "alg3", "--out", str(out)]) == 0
    assert (out / "realised_instance.json").exists() and (out / "witness_trace.jsonl").exists()
    printed = capsys.readouterr().out
    row = json.loads(printed[printed.index("{"):])
    assert row["bound_kind"] == "witness" and row["valid"]
    realised = load_instance(out / "realised_instance.json")
    assert main(["validate", "--trace", str(out / "witness_trace.jsonl"), "--instance", str(out / "realised_instance.json")]) == 0
    assert realised.n == 16


def test_cli_unknown_construction(capsys):
    assert main(["adversary", "--construction", "nope", "--m", "2", "--strategy", "alg1"]) == 2


def test_report_write(tmp_path):
    report = Report({"mode": "x"}, [evaluate(gen_random_instance(0, 3, 2), SingleBatch(), SETTINGS["suets-np"])])
    jsonl, csv_path = report.write(tmp_path / "r")
    kinds = [json.loads(line)["kind"] for line in jsonl.read_text().splitlines()]
    assert kinds == ["header", "row", "summary"]
    assert csv_path.read_text().startswith("strategy,setting")
