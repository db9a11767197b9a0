from __future__ import annotations

from fractions import Fraction

import pytest

from uets.adversaries import (
    CONSTRUCTIONS,
    adv_np_multi,
    adv_np_single,
    adv_p_multi,
    adv_p_single,
    gen_random_instance,
)
from uets.algorithms import make_strategy
from uets.engine import simulate
from uets.setup_models import is_monotone, is_subadditive
from uets.validation import validate_trace

FAMILIES = ["constant", "unweighted", "type_specific", "library_based", "tsp_based", "explicit"]


def play(con, name):
    trace = simulate(con.instance, make_strategy(name), con.settings, oracle=con.adversary)
    realised = con.realised_instance()
    assert validate_trace(realised, trace, con.settings).valid
    witness = con.witness()
    assert validate_trace(realised, witness).valid
    return trace, witness


def test_construction_sizes():
    assert adv_np_single(3).instance.n == 27
    assert adv_p_single(2).instance.n == 9
    assert adv_p_single(3, 256).instance.n == 256
    assert adv_np_multi(4).instance.n == 16
    con = adv_p_multi(4)
    assert con.meta["q"] == 2 and con.instance.n == 4 * 16


def test_bad_parameters():
    with pytest.raises(ValueError):
        adv_p_single(3, 63)
    with pytest.raises(ValueError):
        adv_np_multi(5)
    with pytest.raises(ValueError):
        adv_p_multi(0)


@pytest.mark.parametrize("name", ["single_batch", "list_singletons", "alg1", "combined_suets_np"])
@pytest.mark.parametrize("m", [2, 3])
def test_np_single_forces_m(name, m):
    con = adv_np_single(m)
    trace, witness = play(con, name)
    assert trace.makespan >= m
    assert witness.makespan <= 2
    assert len(con.adversary.heavy) <= m


@pytest.mark.parametrize("name", ["single_batch", "list_singletons", "alg2"])
def test_p_single_forces_m(name):
    con = adv_p_single(2)
    trace, witness = play(con, name)
    assert trace.makespan >= 2
    assert witness.makespan == 2


def test_np_multi_against_group_strategy():
    con = adv_np_multi(4)
    trace, witness = play(con, "alg3")
    assert trace.makespan >= 2
    assert witness.makespan <= 3


def test_p_multi_against_phased_strategy():
    con = adv_p_multi(4)
    trace, witness = play(con, "alg4")
    assert trace.makespan >= 3
    assert witness.makespan <= 3


def test_adversary_times_are_zero_or_one():
    con = adv_np_single(2)
    play(con, "list_singletons")
    times = con.adversary.realised(con.instance.n)
    assert set(times) <= {Fraction(0), Fraction(1)}
    assert sum(times) == len(con.adversary.heavy)


def test_constructions_are_fresh():
    a = CONSTRUCTIONS["np_single"](2)
    play(a, "single_batch")
    b = CONSTRUCTIONS["np_single"](2)
    assert a.adversary is not b.adversary and not b.adversary.heavy


@pytest.mark.parametrize("family", FAMILIES)
def test_random_instances_are_seeded(family):
    a = gen_random_instance(7, 6, 2, family)
    b = gen_random_instance(7, 6, 2, family)
    assert a.jobs == b.jobs
    assert [a.batch_cost(s) for s in ([0], [1, 2], range(6))] == [b.batch_cost(s) for s in ([0], [1, 2], range(6))]


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("seed", range(5))
def test_random_models_are_valid(family, seed):
    inst = gen_random_instance(seed, 7, 2, family)
    assert is_monotone(inst.setup, inst)
    assert is_subadditive(inst.setup, inst)


def test_execution_time_distributions():
    inst = gen_random_instance(0, 5, 2, p_distribution=("constant", "3/2"))
    assert {j.exec_time for j in inst.jobs} == {Fraction(3, 2)}
    inst = gen_random_instance(0, 50, 2, p_distribution=("uniform", [0, 4]))
    assert {j.exec_time for j in inst.jobs} == {0, 4}
    with pytest.raises(ValueError):
        gen_random_instance(0, 5, 2, p_distribution=("normal", 1))
    with pytest.raises(ValueError):
        gen_random_instance(0, 5, 2, family="nope")
