"""Acceptance suite: one PASS/FAIL line per criterion.

All comparisons are exact rationals; TOLERANCE pins the allowed slack at zero.
Each criterion checks the package against an independent computation from
``brute`` or against a formula restated here, never against itself alone.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest

import brute
from uets.adversaries import gen_random_instance
from uets.algorithms import Ignore, make_strategy
from uets.core import SETTINGS, EngineSettings, EventKind, Instance, Job
from uets.engine import simulate
from uets.harness import LINEUP, CorpusSpec, run_adversary, sweep_corpus
from uets.oracle import lemma_lower_bound, optimal_makespan, optimal_makespan_with_releases
from uets.partition import balanced_type_partition, exact_min_max_partition, partition_value, size_limited_partition
from uets.setup_models import ConstantSetup, ExplicitSetup, TypeSpecificSetup, is_monotone, is_subadditive, subadditive_closure
from uets.validation import validate_trace

TOLERANCE = Fraction(0)
CORPUS = CorpusSpec()  # 500 seeded draws, n <= 8, m in {2, 3}, constant or unweighted types, p in {0, 1, 2}
FAMILIES = ("constant", "type_specific", "unweighted", "library_based", "tsp_based", "explicit")


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def ceil_sqrt_frac(num: int, den: int) -> int:
    """Smallest c with c*c >= num/den."""
    c = math.isqrt(num // den)
    while c * c * den < num:
        c += 1
    return c


def expected_multipliers(name: str, n: int, m: int) -> set[Fraction]:
    """Guarantee multipliers restated from their closed forms."""
    if name == "single_batch":
        return {Fraction(m)}
    if name == "list_singletons":
        return {Fraction(n, m) + 1}
    if name == "alg1":
        k, cap = m + ceil_sqrt_frac(m * n, 1), ceil_sqrt_frac(n, m)
        return {Fraction(k, m) + 1 + cap}
    if name == "alg2":
        q = next(q for q in range(1, n + 2) if q ** q >= n)
        return {Fraction(6 * q + 1)}
    if name == "alg3":
        k = max(1, math.isqrt(m))
        return {Fraction(-(-m // k)) + Fraction(m, m // k) + 1}
    if name == "alg4":
        q = next(q for q in range(2, m + 2) if q ** q >= m)
        return {Fraction(9 * q - 2)}
    if name == "combined_suets_np":
        return expected_multipliers("single_batch", n, m) | expected_multipliers("alg1", n, m)
    if name == "combined_muets_np":
        return expected_multipliers("alg3", n, m) | expected_multipliers("alg1", n, m)
    raise KeyError(name)


@pytest.fixture(scope="module")
def corpus():
    return CORPUS.instances()


@pytest.fixture(scope="module")
def corpus_optima(corpus):
    return [brute.optimal_makespan(inst) for inst, _ in corpus]


@pytest.fixture(scope="module")
def sweep():
    return sweep_corpus(CORPUS, threads=1)


def test_criterion_1_guarantees(capsys, corpus, corpus_optima, sweep):
    shape_ok = (
        CORPUS.draws >= 500
        and all(inst.n <= 8 and inst.machines in (2, 3) for inst, _ in corpus)
        and all(j.exec_time in (0, 1, 2) for inst, _ in corpus for j in inst.jobs)
        and all(src.split(":")[0] in ("constant", "unweighted") for _, src in corpus)
        and all(len({j.type_tag for j in inst.jobs}) <= 4 for inst, _ in corpus)
    )
    bad = []
    for row in sweep.rows:
        opt = corpus_optima[row.index]
        checks = (
            row.valid,
            row.bound_kind == "oracle",
            row.opt_or_bound == opt,
            not row.conditional,
            row.guarantee_multiplier in expected_multipliers(row.strategy, row.n, row.m),
            row.makespan <= row.guarantee_multiplier * opt + TOLERANCE,
            row.guarantee_satisfied is True,
        )
        if not all(checks):
            bad.append((row.strategy, row.index, checks))
    names = {r.strategy for r in sweep.rows}
    detail = (
        f"{len(sweep.rows)} runs of {len(names)} strategies on {CORPUS.draws} draws; "
        f"{len(bad)} violations{'' if shape_ok else '; corpus shape wrong'}; first: {bad[:3]}"
    )
    verdict(capsys, 1, shape_ok and not bad and names == {s for s, _ in LINEUP}, detail)


def test_criterion_2_lower_bound_dominance(capsys, corpus, corpus_optima):
    bad = []
    for (inst, src), opt in zip(corpus, corpus_optima):
        if not lemma_lower_bound(inst) <= opt + TOLERANCE or optimal_makespan(inst)[0] != opt:
            bad.append(src)
    verdict(capsys, 2, not bad, f"{len(corpus)} instances, {len(bad)} violations {bad[:3]}")


def _adversary_case(construction, m, name, n=None):
    row, con, trace = run_adversary(construction, m, make_strategy(name), n)
    realised = con.realised_instance()
    witness = con.witness()
    ok = row.valid and validate_trace(realised, witness).valid
    return trace.makespan, witness.makespan, ok


def test_criterion_3_adversaries(capsys):
    failures = []
    lines = []
    for name in ("single_batch", "list_singletons", "alg1", "combined_suets_np"):
        ms, ws, ok = _adversary_case("np_single", 3, name)
        lines.append(f"np_single/{name} {ms}:{ws}")
        if not (ok and ms >= 3 and ws <= 2 and Fraction(ms) / ws >= Fraction(3, 2)):
            failures.append(("a", name, ms, ws))
    for name in ("single_batch", "list_singletons", "alg2"):
        ms, ws, ok = _adversary_case("p_single", 3, name, n=256)
        lines.append(f"p_single/{name} {ms}:{ws}")
        if not (ok and ms >= 3 and ws == 2):
            failures.append(("b", name, ms, ws))
    ms, ws, ok = _adversary_case("np_multi", 4, "alg3")
    lines.append(f"np_multi/alg3 {ms}:{ws}")
    if not (ok and ms >= 2 and ws <= 3):
        failures.append(("c", "alg3", ms, ws))
    ms, ws, ok = _adversary_case("p_multi", 4, "alg4")
    lines.append(f"p_multi/alg4 {ms}:{ws}")
    if not (ok and ms >= 3 and ws <= 3):
        failures.append(("d", "alg4", ms, ws))
    verdict(capsys, 3, not failures, f"makespan:witness {', '.join(lines)}; failures {failures}")


def two_wave_family() -> list[Instance]:
    out = []
    for seed in range(40):
        rng = random.Random(seed)
        first = rng.randint(1, 4)
        second = rng.randint(1, 6 - first)
        release = rng.choice([Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)])
        jobs = tuple(
            Job(i, rng.choice([0, 1, 2]), 0 if i < first else release) for i in range(first + second)
        )
        out.append(Instance(jobs, 2, ConstantSetup()))
    return out


def test_criterion_4_ignore_reduction(capsys):
    bad = []
    runs = 0
    for inst in two_wave_family():
        opt = brute.optimal_makespan_with_releases(inst)
        if optimal_makespan_with_releases(inst) != opt:
            bad.append(("oracle", inst))
        for inner in ("single_batch", "list_singletons", "alg1"):
            wrapped = Ignore(make_strategy(inner))
            trace = simulate(inst, wrapped, SETTINGS["suets-np"])
            rho = make_strategy(inner).guarantee(inst.n, inst.machines).multiplier
            runs += 1
            ok = validate_trace(inst, trace).valid and trace.makespan <= (2 * rho + 1) * opt + TOLERANCE
            if not ok:
                bad.append((inner, trace.makespan, rho, opt))
    verdict(capsys, 4, not bad, f"{runs} wrapped runs on two-wave instances, {len(bad)} violations {bad[:3]}")


RESTART_MULTI = EngineSettings(allow_multi_machine=True, allow_preemption=True, restart_from_scratch=True)
PER_TYPE_MULTI = EngineSettings(allow_multi_machine=True, allow_preemption=True, execution_order="per_type")
CONFIG_POOL = list(LINEUP) + [
    ("alg4", RESTART_MULTI),
    ("alg4", PER_TYPE_MULTI),
    ("ignore:list_singletons", "suets-np"),
    ("ignore:alg1", "suets-np"),
    ("ignore:alg3", "muets-np"),
]


def seeded_config(i: int) -> tuple[Instance, str, EngineSettings]:
    rng = random.Random(10_000 + i)
    name, setting = CONFIG_POOL[i % len(CONFIG_POOL)]
    settings = SETTINGS[setting] if isinstance(setting, str) else setting
    m = rng.choice([2, 3, 4, 5, 6, 8, 9])
    n = rng.randint(0, 12)
    family = FAMILIES[rng.randrange(len(FAMILIES))]
    if settings.execution_order == "per_type":
        family = rng.choice(["type_specific", "unweighted"])
    inst = gen_random_instance(10_000 + i, n, m, family, ("uniform", [0, 1, 2, "1/2"]), types=rng.randint(1, 6))
    if name.startswith("ignore"):
        jobs = tuple(Job(j.id, j.exec_time, rng.choice([0, 0, 1, 3]), j.type_tag, j.libraries, j.point) for j in inst.jobs)
        inst = Instance(jobs, m, inst.setup)
    return inst, name, settings


def raw_batches(trace):
    """Assignment, completions and preemption of every batch, read straight from the events."""
    batches: dict[int, dict] = {}
    for e in trace.events:
        if e.kind == EventKind.ASSIGN_BATCH:
            batches[e.batch] = {"start": e.time, "jobs": e.jobs, "k": len(e.machines), "done": {}, "preempt": None}
        elif e.kind == EventKind.JOB_COMPLETE:
            batches[e.batch]["done"][e.job] = e.time
        elif e.kind == EventKind.PREEMPT:
            batches[e.batch]["preempt"] = e
    return batches


def window_and_preemption_checks(inst, trace):
    """Independent per-batch completion windows and the preemption inequality."""
    p = trace.exec_times
    windows = preempts = 0
    bad = []
    for ref, b in raw_batches(trace).items():
        c = inst.batch_cost(b["jobs"])
        pmax = max((p[j] for j in b["jobs"] if p[j] is not None), default=Fraction(0))
        if b["preempt"] is not None:
            preempts += 1
            done = b["preempt"].jobs
            if b["preempt"].time - b["start"] > c + sum((p[j] for j in done), Fraction(0)) / b["k"] + pmax + TOLERANCE:
                bad.append(("preempt", ref))
        elif set(b["done"]) == set(b["jobs"]):
            windows += 1
            lower = c + sum((p[j] for j in b["jobs"]), Fraction(0)) / b["k"]
            end = max(b["done"].values()) - b["start"]
            if not lower - TOLERANCE <= end <= lower + pmax + TOLERANCE:
                bad.append(("window", ref, end, lower, pmax))
    return windows, preempts, bad


def test_criterion_5_engine_semantics(capsys):
    invalid, bad, differ = [], [], []
    windows = preempts = 0
    for i in range(100):
        inst, name, settings = seeded_config(i)
        first = simulate(inst, make_strategy(name), settings)
        second = simulate(inst, make_strategy(name), settings)
        if first.to_jsonl() != second.to_jsonl():
            differ.append(i)
        if not validate_trace(inst, first, settings).valid:
            invalid.append(i)
        w, p, b = window_and_preemption_checks(inst, first)
        windows, preempts, bad = windows + w, preempts + p, bad + [(i, name, x) for x in b]
    for construction, m, name, n in (
        ("np_single", 3, "alg1", None),
        ("p_single", 3, "alg2", 256),
        ("np_multi", 4, "alg3", None),
        ("p_multi", 4, "alg4", None),
    ):
        row, con, trace = run_adversary(construction, m, make_strategy(name), n)
        if not row.valid:
            invalid.append(construction)
        w, p, b = window_and_preemption_checks(con.realised_instance(), trace)
        windows, preempts, bad = windows + w, preempts + p, bad + [(construction, name, x) for x in b]
    ok = not invalid and not bad and not differ and preempts > 0
    detail = (
        f"104 traces, {windows} batch windows, {preempts} preemptions checked; "
        f"invalid {invalid[:5]}, window/preemption violations {bad[:3]}, nondeterministic {differ[:5]}"
    )
    verdict(capsys, 5, ok, detail)


def random_monotone_table(rng: random.Random, n: int) -> dict[frozenset[int], Fraction]:
    """Random values pushed up to the max over subsets, so monotone but usually not subadditive."""
    table: dict[frozenset[int], Fraction] = {frozenset(): Fraction(0)}
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            s = frozenset(combo)
            below = max(table[s - {j}] for j in s)
            table[s] = max(below, Fraction(rng.randint(0, 12), rng.choice([1, 2, 3])))
    return table


def test_criterion_6_set_functions(capsys):
    failures = []
    checked = crossed = 0
    for family in FAMILIES:
        for seed in range(200):
            inst = gen_random_instance(20_000 + seed, 1 + seed % 10, 2, family, types=1 + seed % 5)
            checked += 1
            if not (is_monotone(inst.setup, inst) and is_subadditive(inst.setup, inst)):
                failures.append((family, seed))
            if inst.n <= 6 and seed % 4 == 0:
                crossed += 1
                cost = lambda s, inst=inst: inst.batch_cost(sorted(s))  # noqa: E731
                if not (brute.monotone(inst.n, cost) and brute.subadditive(inst.n, cost)):
                    failures.append(("brute", family, seed))
    rng = random.Random(6)
    closures = 0
    for _ in range(50):
        table = random_monotone_table(rng, 5)
        model = ExplicitSetup.unchecked(table)
        inst = Instance(tuple(Job(i) for i in range(5)), 1, model)
        for batch in ([0, 1, 2, 3, 4], sorted(rng.sample(range(5), 3))):
            closures += 1
            if subadditive_closure(model, inst, batch) != brute.closure(batch, lambda s: table[frozenset(s)]):
                failures.append(("closure", batch))
    # tripwire: a table that breaks subadditivity must be caught
    broken = Instance((Job(0), Job(1)), 1, ExplicitSetup.unchecked({(0,): 1, (1,): 1, (0, 1): 3}))
    tripwire = not is_subadditive(broken.setup, broken) and brute.subadditive(2, lambda s: broken.batch_cost(sorted(s))) is False
    detail = (
        f"{checked} instances over {len(FAMILIES)} families ({crossed} re-checked by enumeration), "
        f"{closures} closures on 50 tables; failures {failures[:3]}; tripwire {'caught' if tripwire else 'missed'}"
    )
    verdict(capsys, 6, not failures and tripwire, detail)


def test_criterion_7_partition_oracles(capsys, corpus):
    failures = []
    balanced = 0
    for seed in range(150):
        rng = random.Random(30_000 + seed)
        n, types, k = rng.randint(1, 12), rng.randint(1, 6), rng.choice([2, 3])
        jobs = tuple(Job(i, type_tag=rng.randrange(types)) for i in range(n))
        model = TypeSpecificSetup.unweighted(range(types))
        value = partition_value(balanced_type_partition(jobs, k, model), jobs, model)
        exact = partition_value(exact_min_max_partition(jobs, k, model), jobs, model)
        balanced += 1
        if value != exact:
            failures.append(("balanced", seed, value, exact))
        if n <= 7:
            ref, _ = brute.min_max_labelling(n, k, n, lambda s: model.cost([jobs[j] for j in s]))
            if ref != exact:
                failures.append(("brute", seed, ref, exact))
    for idx, (inst, src) in enumerate(corpus):
        n, m = inst.n, inst.machines
        k, cap = m + ceil_sqrt_frac(m * n, 1), ceil_sqrt_frac(n, m)
        capped = partition_value(size_limited_partition(inst.jobs, k, cap, inst.setup, "exact"), inst.jobs, inst.setup)
        uncapped = partition_value(exact_min_max_partition(inst.jobs, m, inst.setup), inst.jobs, inst.setup)
        if not capped <= uncapped + TOLERANCE:
            failures.append(("capped", src, capped, uncapped))
        if n <= 6 and idx % 5 == 0:
            cost = lambda s, inst=inst: inst.batch_cost(sorted(s))  # noqa: E731
            if brute.min_max_labelling(n, k, cap, cost)[0] != capped:
                failures.append(("capped brute", src))
    detail = f"{balanced} unweighted instances, {len(corpus)} capped corpus instances; failures {failures[:3]}"
    verdict(capsys, 7, not failures, detail)
