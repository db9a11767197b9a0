"""Min-max partition solvers: exact, balanced (unweighted types), greedy, size-capped."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from uets import kernels
from uets.setup_models import ExactLimitError, JobLike, SetupModel, TypeSpecificSetup

__all__ = [
    "Partition",
    "EXACT_LIMIT",
    "exact_min_max_partition",
    "balanced_type_partition",
    "greedy_lpt_partition",
    "size_limited_partition",
    "refine_into_q_subbatches",
    "spread_partition",
    "choose_partition",
    "partition_value",
    "near_equal_split",
    "ceil_sqrt",
    "ceil_sqrt_ratio",
]

EXACT_LIMIT = 12


@dataclass(frozen=True)
class Partition:
    parts: tuple[frozenset[int], ...]

    @classmethod
    def of(cls, parts: Iterable[Iterable[int]]) -> "Partition":
        return cls(tuple(frozenset(p) for p in parts))

    @property
    def part_count(self) -> int:
        return len(self.parts)

    def nonempty(self) -> list[frozenset[int]]:
        return [p for p in self.parts if p]

    def sizes(self) -> list[int]:
        return [len(p) for p in self.parts]

    def jobs(self) -> frozenset[int]:
        return frozenset().union(*self.parts) if self.parts else frozenset()

    def padded(self, count: int) -> "Partition":
        if len(self.parts) > count:
            raise ValueError(f"partition has {len(self.parts)} parts, cannot pad to {count}")
        return Partition(self.parts + (frozenset(),) * (count - len(self.parts)))

    def is_partition_of(self, ids: Iterable[int]) -> bool:
        seen: set[int] = set()
        for p in self.parts:
            if seen & p:
                return False
            seen |= p
        return seen == set(ids)


def partition_value(partition: Partition, jobs: Sequence[JobLike], model: SetupModel) -> Fraction:
    """Largest setup time over the parts."""
    by_id = {j.id: j for j in jobs}
    return max((model.cost(by_id[i] for i in p) for p in partition.parts), default=Fraction(0))


def ceil_sqrt(x: int) -> int:
    """Smallest integer ``r`` with ``r*r >= x``."""
    if x <= 0:
        return 0
    r = _isqrt(x)
    return r if r * r == x else r + 1


def _isqrt(x: int) -> int:
    import math

    return math.isqrt(x)


def ceil_sqrt_ratio(num: int, den: int) -> int:
    """Smallest integer ``r`` with ``r*r*den >= num``."""
    if num <= 0:
        return 0
    r = _isqrt(num // den)
    while r * r * den < num:
        r += 1
    while r > 0 and (r - 1) * (r - 1) * den >= num:
        r -= 1
    return r


def _sorted_jobs(jobs: Sequence[JobLike]) -> list[JobLike]:
    return sorted(jobs, key=lambda j: j.id)


def _exact(jobs: Sequence[JobLike], k: int, cap: int, model: SetupModel) -> Partition:
    ordered = _sorted_jobs(jobs)
    n = len(ordered)
    if n > EXACT_LIMIT:
        raise ExactLimitError(f"too many jobs for the exact solver: {n} > {EXACT_LIMIT}")
    if k * cap < n:
        raise ValueError(f"infeasible cap: {k} parts of size <= {cap} cannot hold {n} jobs")
    ints, _ = kernels.scale(model.table(ordered))
    _, labels = kernels.minmax_partition(ints, n, k, cap)
    parts: list[set[int]] = [set() for _ in range(k)]
    for job, label in zip(ordered, labels):
        parts[label].add(job.id)
    return Partition.of(parts)


def exact_min_max_partition(jobs: Sequence[JobLike], k: int, model: SetupModel) -> Partition:
    """Optimal ``k``-part partition for the max setup time.

    Ties go to the lexicographically smallest block labelling of the jobs in id
    order, with blocks numbered by first appearance.
    """
    if k < 1:
        raise ValueError("k must be positive")
    return _exact(jobs, k, max(len(jobs), 1), model)


def balanced_type_partition(jobs: Sequence[JobLike], k: int, model: SetupModel) -> Partition:
    """Deal whole types round-robin over ``k`` parts; optimal for unit type weights."""
    if not isinstance(model, TypeSpecificSetup):
        raise TypeError("balanced_type_partition needs a type-specific setup model")
    used = sorted({j.type_tag for j in jobs})
    if None in used or not model.is_unweighted(used):
        raise TypeError("balanced_type_partition needs unit weights on every used type")
    slot = {t: i % k for i, t in enumerate(used)}
    parts: list[set[int]] = [set() for _ in range(k)]
    for j in jobs:
        parts[slot[j.type_tag]].add(j.id)
    return Partition.of(parts)


def _atoms(jobs: Sequence[JobLike], model: SetupModel) -> list[list[JobLike]]:
    if isinstance(model, TypeSpecificSetup):
        groups: dict[int, list[JobLike]] = {}
        for j in _sorted_jobs(jobs):
            groups.setdefault(j.type_tag, []).append(j)  # type: ignore[arg-type]
        return list(groups.values())
    return [[j] for j in _sorted_jobs(jobs)]


def greedy_lpt_partition(jobs: Sequence[JobLike], k: int, model: SetupModel) -> Partition:
    """Largest atom first onto the part whose cost after adding it is smallest."""
    if k < 1:
        raise ValueError("k must be positive")
    atoms = _atoms(jobs, model)
    atoms.sort(key=lambda a: (-model.cost(a), a[0].id))
    parts: list[list[JobLike]] = [[] for _ in range(k)]
    for atom in atoms:
        best = min(range(k), key=lambda i: (model.cost(parts[i] + atom), i))
        parts[best].extend(atom)
    return Partition.of([j.id for j in p] for p in parts)


def near_equal_split(ids: Iterable[int], pieces: int) -> list[list[int]]:
    """Split sorted ids into ``pieces`` contiguous runs whose sizes differ by at most one."""
    ordered = sorted(ids)
    pieces = max(1, min(pieces, len(ordered)))
    base, extra = divmod(len(ordered), pieces)
    out = []
    pos = 0
    for i in range(pieces):
        size = base + (1 if i < extra else 0)
        out.append(ordered[pos:pos + size])
        pos += size
    return [p for p in out if p]


def size_limited_partition(
    jobs: Sequence[JobLike],
    k: int,
    size_cap: int,
    model: SetupModel,
    mode: str = "exact",
    base: Optional[Partition] = None,
) -> Partition:
    """``k``-part partition with every part holding at most ``size_cap`` jobs.

    ``exact`` minimises the max setup time under the cap. ``refine`` cuts each
    part of ``base`` into near-equal pieces no larger than the cap, which keeps
    the max setup time of ``base`` because setup times are monotone.
    """
    n = len(jobs)
    if size_cap < 1 or k * size_cap < n:
        raise ValueError(f"infeasible cap: {k} parts of size <= {size_cap} cannot hold {n} jobs")
    if mode == "exact":
        return _exact(jobs, k, size_cap, model)
    if mode != "refine":
        raise ValueError(f"unknown mode {mode!r}")
    if base is None:
        raise ValueError("refine mode requires a base partition")
    if not base.is_partition_of(j.id for j in jobs):
        raise ValueError("base partition does not cover the jobs")
    pieces: list[list[int]] = []
    for part in base.parts:
        if part:
            pieces.extend(near_equal_split(part, -(-len(part) // size_cap)))
    if len(pieces) > k:
        raise ValueError(f"refinement needs {len(pieces)} parts but only {k} are allowed")
    return Partition.of(pieces).padded(k)


def refine_into_q_subbatches(partition: Partition, q: int, size_cap: int, count: Optional[int] = None) -> Partition:
    """Cut every part into at most ``q`` near-equal contiguous pieces.

    The result is padded with empty parts to ``count`` (by default the larger
    of the input part count and the number of pieces).
    """
    if q < 1:
        raise ValueError("q must be positive")
    pieces: list[list[int]] = []
    for part in partition.parts:
        if not part:
            continue
        split = near_equal_split(part, q)
        if max(len(s) for s in split) > size_cap:
            raise ValueError(f"cap infeasible: a part of {len(part)} jobs cut {q} ways exceeds {size_cap}")
        pieces.extend(split)
    if count is None:
        count = max(partition.part_count, len(pieces))
    if len(pieces) > count:
        raise ValueError(f"{len(pieces)} pieces do not fit in {count} parts")
    return Partition.of(pieces).padded(count)


def spread_partition(partition: Partition, target: int) -> Partition:
    """Split the largest parts into empty slots until ``target`` parts are nonempty.

    Monotone setup times never increase under splitting, so an optimal
    min-max partition stays optimal.
    """
    parts = [sorted(p) for p in partition.parts]
    while True:
        filled = sum(1 for p in parts if p)
        if filled >= target:
            break
        empty = next((i for i, p in enumerate(parts) if not p), None)
        big = max(range(len(parts)), key=lambda i: (len(parts[i]), -i))
        if empty is None or len(parts[big]) < 2:
            break
        half = (len(parts[big]) + 1) // 2
        parts[big], parts[empty] = parts[big][:half], parts[big][half:]
    return Partition.of(parts)


def choose_partition(jobs: Sequence[JobLike], k: int, model: SetupModel) -> tuple[Partition, bool]:
    """Best available ``k``-partition for the max setup time and whether it is provably optimal."""
    if isinstance(model, TypeSpecificSetup):
        used = {j.type_tag for j in jobs}
        if None not in used and model.is_unweighted(used):
            return balanced_type_partition(jobs, k, model), True
    if len(jobs) <= EXACT_LIMIT:
        return exact_min_max_partition(jobs, k, model), True
    return greedy_lpt_partition(jobs, k, model), False
