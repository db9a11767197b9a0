"""Offline optimum and lower bounds for small instances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from uets import kernels
from uets.core import Instance
from uets.partition import EXACT_LIMIT, Partition, exact_min_max_partition
from uets.setup_models import ExactLimitError, TypeSpecificSetup

__all__ = [
    "optimal_makespan",
    "LowerBound",
    "lemma_lower_bound",
    "lemma_lower_bound_info",
    "optimal_makespan_with_releases",
    "set_partitions",
    "RELEASE_ORACLE_LIMIT",
]

ZERO = Fraction(0)
RELEASE_ORACLE_LIMIT = 7


def optimal_makespan(instance: Instance) -> tuple[Fraction, Partition]:
    """Optimal makespan with all jobs released at 0: one batch per machine,
    minimising the largest ``c(X_i) + p(X_i)``."""
    n, m = instance.n, instance.machines
    if n > EXACT_LIMIT:
        raise ExactLimitError(f"optimal makespan is exact only up to {EXACT_LIMIT} jobs, got {n}")
    if n == 0:
        return ZERO, Partition(tuple(frozenset() for _ in range(m)))
    setup = instance.setup.table(instance.jobs)
    p = instance.exec_times()
    load = [ZERO] * (1 << n)
    for s in range(1, 1 << n):
        low = (s & -s).bit_length() - 1
        load[s] = load[s & (s - 1)] + p[low]
    ints, denom = kernels.scale([c + w for c, w in zip(setup, load)])
    value, labels = kernels.minmax_partition(ints, n, m, n)
    parts: list[set[int]] = [set() for _ in range(m)]
    for j, b in enumerate(labels):
        parts[b].add(j)
    return Fraction(value, denom), Partition.of(parts)


@dataclass(frozen=True)
class LowerBound:
    value: Fraction
    partition_term: Fraction
    average_term: Fraction
    singleton_term: Fraction
    partial: bool


def lemma_lower_bound_info(instance: Instance) -> LowerBound:
    """The three-term lower bound on the optimal makespan.

    The partition term needs the exact min-max partition; above the exact
    limit it falls back to the heaviest type weight for type-specific setups
    and to 0 otherwise, and the bound is marked partial.
    """
    jobs, m = instance.jobs, instance.machines
    if not jobs:
        return LowerBound(ZERO, ZERO, ZERO, ZERO, False)
    model = instance.setup
    partial = False
    if len(jobs) <= EXACT_LIMIT:
        part = exact_min_max_partition(jobs, m, model)
        partition_term = max(instance.batch_cost(p) for p in part.parts)
    else:
        partial = True
        if isinstance(model, TypeSpecificSetup):
            partition_term = max(model.weights[t] for t in {j.type_tag for j in jobs})  # type: ignore[index]
        else:
            partition_term = ZERO
    try:
        total_cost = model.cost(jobs)
    except ExactLimitError:
        total_cost, partial = ZERO, True
    average_term = (total_cost + sum((j.exec_time for j in jobs), ZERO)) / m
    singleton_term = max(model.cost([j]) + j.exec_time for j in jobs)
    value = max(partition_term, average_term, singleton_term)
    return LowerBound(value, partition_term, average_term, singleton_term, partial)


def lemma_lower_bound(instance: Instance) -> Fraction:
    return lemma_lower_bound_info(instance).value


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """All set partitions of ``items`` as lists of blocks (restricted growth order)."""
    items = list(items)
    if not items:
        yield []
        return
    n = len(items)
    labels = [0] * n

    def rec(i: int, used: int) -> Iterator[list[list[int]]]:
        if i == n:
            blocks: list[list[int]] = [[] for _ in range(used)]
            for x, b in zip(items, labels):
                blocks[b].append(x)
            yield blocks
            return
        for b in range(used + 1):
            labels[i] = b
            yield from rec(i + 1, max(used, b + 1))

    labels[0] = 0
    yield from rec(1, 1)


def optimal_makespan_with_releases(instance: Instance) -> Fraction:
    """Offline optimum when jobs arrive over time, by enumeration.

    A batch may start once its last job is released and occupies one machine
    for ``c(X) + p(X)``; each machine runs its batches in order of batch
    release, which is optimal for a fixed assignment. Spreading a batch over
    several machines is never better than splitting it, so single-machine
    batches suffice.
    """
    n, m = instance.n, instance.machines
    if n > RELEASE_ORACLE_LIMIT:
        raise ExactLimitError(f"release-aware optimum is limited to {RELEASE_ORACLE_LIMIT} jobs, got {n}")
    if n == 0:
        return ZERO
    best: Fraction | None = None
    for blocks in set_partitions(range(n)):
        info = []
        for b in blocks:
            ready = max(instance.jobs[j].release for j in b)
            info.append((ready, instance.batch_cost(b) + instance.total_exec(b)))
        info.sort()
        # machines are interchangeable: canonical assignment of blocks to machines
        for assign in _machine_strings(len(info), m):
            finish = [ZERO] * m
            for (ready, dur), mach in zip(info, assign):
                finish[mach] = max(finish[mach], ready) + dur
            span = max(finish)
            if best is None or span < best:
                best = span
    assert best is not None
    return best


def _machine_strings(length: int, m: int) -> Iterator[tuple[int, ...]]:
    """Assignments of ``length`` ordered blocks to ``m`` identical machines, up to relabelling."""
    for combo in itertools.product(range(m), repeat=length):
        seen = -1
        ok = True
        for c in combo:
            if c > seen + 1:
                ok = False
                break
            seen = max(seen, c)
        if ok:
            yield combo
