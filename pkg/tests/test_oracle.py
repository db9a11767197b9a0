from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import brute
from uets.adversaries import gen_random_instance
from uets.core import Instance, Job
from uets.oracle import (
    lemma_lower_bound,
    lemma_lower_bound_info,
    optimal_makespan,
    optimal_makespan_with_releases,
    set_partitions,
)
from uets.setup_models import ConstantSetup, ExactLimitError, TypeSpecificSetup

FAMILIES = ["constant", "unweighted", "type_specific", "library_based", "tsp_based", "explicit"]
BELL = [1, 1, 2, 5, 15, 52, 203, 877]


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 10**6), n=st.integers(0, 6), m=st.integers(1, 3), family=st.sampled_from(FAMILIES))
def test_optimum_matches_assignment_enumeration(seed, n, m, family, backend):
    inst = gen_random_instance(seed, n, m, family, ("uniform", [0, 1, 2, "1/2"]))
    value, part = optimal_makespan(inst)
    assert value == brute.optimal_makespan(inst)
    assert part.is_partition_of(range(n)) and part.part_count == m
    assert max((inst.batch_cost(p) + inst.total_exec(p) for p in part.parts), default=0) == value


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(0, 8), m=st.integers(1, 3), family=st.sampled_from(FAMILIES))
def test_lower_bound_below_optimum(seed, n, m, family):
    inst = gen_random_instance(seed, n, m, family, ("uniform", [0, 1, 2]))
    info = lemma_lower_bound_info(inst)
    assert info.value == max(info.partition_term, info.average_term, info.singleton_term)
    assert not info.partial
    assert info.value <= optimal_makespan(inst)[0]


def test_lower_bound_terms():
    jobs = tuple(Job(i, p, type_tag=t) for i, (p, t) in enumerate([(3, 0), (1, 1), (1, 1), (0, 2)]))
    inst = Instance(jobs, 2, TypeSpecificSetup({0: 1, 1: 2, 2: 2}))
    info = lemma_lower_bound_info(inst)
    assert info.singleton_term == 4
    assert info.average_term == Fraction(5 + 5, 2)
    assert info.partition_term == 3
    assert lemma_lower_bound(inst) == 5


def test_lower_bound_above_exact_limit_is_partial():
    inst = gen_random_instance(0, 20, 3, "type_specific")
    info = lemma_lower_bound_info(inst)
    assert info.partial
    assert info.partition_term == max(inst.setup.weights[j.type_tag] for j in inst.jobs)


def test_empty_instance():
    inst = Instance((), 2, ConstantSetup())
    assert optimal_makespan(inst)[0] == 0
    assert lemma_lower_bound(inst) == 0
    assert optimal_makespan_with_releases(inst) == 0


def test_exact_limits():
    with pytest.raises(ExactLimitError):
        optimal_makespan(gen_random_instance(0, 13, 2))
    with pytest.raises(ExactLimitError):
        optimal_makespan_with_releases(gen_random_instance(0, 8, 2))


@pytest.mark.parametrize("n", range(8))
def test_set_partitions_counts(n):
    parts = list(set_partitions(range(n)))
    assert len(parts) == BELL[n]
    assert len({tuple(tuple(b) for b in p) for p in parts}) == BELL[n]


def _with_releases(seed, n, m):
    rng = random.Random(seed)
    inst = gen_random_instance(seed, n, m, rng.choice(["constant", "unweighted"]), ("uniform", [0, 1, 2]))
    jobs = tuple(Job(j.id, j.exec_time, rng.choice([0, 0, 1, 3]), j.type_tag) for j in inst.jobs)
    return Instance(jobs, m, inst.setup)


@pytest.mark.parametrize("seed", range(40))
def test_release_optimum_matches_full_enumeration(seed):
    inst = _with_releases(seed, 1 + seed % 5, 2)
    assert optimal_makespan_with_releases(inst) == brute.optimal_makespan_with_releases(inst)


@pytest.mark.parametrize("seed", range(10))
def test_release_optimum_reduces_without_releases(seed):
    inst = gen_random_instance(seed, 5, 2, "unweighted")
    assert optimal_makespan_with_releases(inst) == optimal_makespan(inst)[0]
