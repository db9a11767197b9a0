"""Setup-time families and set-function property checks.

Every model maps a batch of jobs to an exact setup time. Models only read job
tags (type, library set, location), never execution times, so online code may
evaluate them freely on any batch.
"""

from __future__ import annotations

import itertools
import threading
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Protocol, Sequence

from uets import kernels
from uets.core import Instance, as_time, time_to_json

__all__ = [
    "SetupModel",
    "ConstantSetup",
    "TypeSpecificSetup",
    "LibraryBasedSetup",
    "TspSetup",
    "ExplicitSetup",
    "MissingTagError",
    "ExactLimitError",
    "setup_time",
    "tsp_optimal",
    "is_monotone",
    "is_subadditive",
    "subadditive_closure",
    "star_metric",
    "model_from_json",
]

ZERO = Fraction(0)
UNIVERSE_LIMIT = 12
TSP_EXACT_LIMIT = 13


class JobLike(Protocol):
    id: int
    type_tag: Optional[int]
    libraries: Optional[frozenset[int]]
    point: Optional[int]


class MissingTagError(ValueError):
    pass


class ExactLimitError(ValueError):
    pass


def _mask_jobs(jobs: Sequence[JobLike], mask: int) -> list[JobLike]:
    return [j for i, j in enumerate(jobs) if mask >> i & 1]


def _feature_table(feature_masks: Sequence[int], cost_of: Any) -> list[Fraction]:
    """Table over job masks where cost depends only on the union of per-job feature masks."""
    n = len(feature_masks)
    union = [0] * (1 << n)
    memo: dict[int, Fraction] = {0: ZERO}
    out = [ZERO] * (1 << n)
    for s in range(1, 1 << n):
        low = (s & -s).bit_length() - 1
        u = union[s & (s - 1)] | feature_masks[low]
        union[s] = u
        if u not in memo:
            memo[u] = cost_of(u)
        out[s] = memo[u]
    return out


class SetupModel:
    """Base class: a monotone subadditive set function over batches."""

    kind = "abstract"

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        raise NotImplementedError

    def table(self, jobs: Sequence[JobLike]) -> list[Fraction]:
        """Setup time of every sub-batch of ``jobs``, indexed by bitmask."""
        return [self.cost(_mask_jobs(jobs, s)) for s in range(1 << len(jobs))]

    def params(self) -> dict[str, Any]:
        return {}

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "parameters": self.params()}

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.params() == other.params()  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash((self.kind, repr(self.params())))


class ConstantSetup(SetupModel):
    kind = "constant"

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        for _ in jobs:
            return Fraction(1)
        return ZERO

    def table(self, jobs: Sequence[JobLike]) -> list[Fraction]:
        return [ZERO] + [Fraction(1)] * ((1 << len(jobs)) - 1)

    def __repr__(self) -> str:
        return "ConstantSetup()"


class TypeSpecificSetup(SetupModel):
    """Each type present in a batch contributes its weight once."""

    kind = "type_specific"

    def __init__(self, weights: Mapping[int, Any]):
        self.weights = {int(t): as_time(w) for t, w in weights.items()}

    @classmethod
    def unweighted(cls, types: Iterable[int]) -> "TypeSpecificSetup":
        return cls({t: 1 for t in types})

    def is_unweighted(self, types: Optional[Iterable[int]] = None) -> bool:
        keys = self.weights.keys() if types is None else types
        return all(self.weights[t] == 1 for t in keys)

    def _type(self, job: JobLike) -> int:
        if job.type_tag is None:
            raise MissingTagError(f"job {job.id} has no type tag")
        if job.type_tag not in self.weights:
            raise MissingTagError(f"job {job.id} has unknown type {job.type_tag}")
        return job.type_tag

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        return sum((self.weights[t] for t in {self._type(j) for j in jobs}), ZERO)

    def table(self, jobs: Sequence[JobLike]) -> list[Fraction]:
        types = sorted({self._type(j) for j in jobs})
        index = {t: i for i, t in enumerate(types)}
        masks = [1 << index[self._type(j)] for j in jobs]
        w = [self.weights[t] for t in types]
        return _feature_table(masks, lambda u: sum((w[i] for i in range(len(w)) if u >> i & 1), ZERO))

    def params(self) -> dict[str, Any]:
        return {"weights": {str(t): time_to_json(w) for t, w in sorted(self.weights.items())}}

    def __repr__(self) -> str:
        return f"TypeSpecificSetup({self.weights})"


class LibraryBasedSetup(SetupModel):
    """Weighted coverage: a batch pays for the union of the libraries its jobs need."""

    kind = "library_based"

    def __init__(self, weights: Mapping[int, Any]):
        self.weights = {int(lib): as_time(w) for lib, w in weights.items()}

    def _libs(self, job: JobLike) -> frozenset[int]:
        if job.libraries is None:
            raise MissingTagError(f"job {job.id} has no library set")
        unknown = job.libraries - self.weights.keys()
        if unknown:
            raise MissingTagError(f"job {job.id} needs unknown libraries {sorted(unknown)}")
        return job.libraries

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        libs: set[int] = set()
        for j in jobs:
            libs |= self._libs(j)
        return sum((self.weights[lib] for lib in libs), ZERO)

    def table(self, jobs: Sequence[JobLike]) -> list[Fraction]:
        libs = sorted(set().union(*(self._libs(j) for j in jobs))) if jobs else []
        index = {lib: i for i, lib in enumerate(libs)}
        masks = [sum(1 << index[lib] for lib in self._libs(j)) for j in jobs]
        w = [self.weights[lib] for lib in libs]
        return _feature_table(masks, lambda u: sum((w[i] for i in range(len(w)) if u >> i & 1), ZERO))

    def params(self) -> dict[str, Any]:
        return {"weights": {str(k): time_to_json(w) for k, w in sorted(self.weights.items())}}

    def __repr__(self) -> str:
        return f"LibraryBasedSetup({self.weights})"


def _check_metric(dist: Sequence[Sequence[Fraction]]) -> None:
    p = len(dist)
    for i in range(p):
        if len(dist[i]) != p:
            raise ValueError("distance matrix must be square")
        if dist[i][i] != 0:
            raise ValueError("distance matrix must have a zero diagonal")
        for j in range(p):
            if dist[i][j] != dist[j][i]:
                raise ValueError(f"distance matrix is not symmetric at ({i}, {j})")
    for i, j, k in itertools.product(range(p), repeat=3):
        if dist[i][k] > dist[i][j] + dist[j][k]:
            raise ValueError(f"triangle inequality fails for ({i}, {j}, {k})")


def tsp_optimal(distances: Sequence[Sequence[Fraction]], subset: Iterable[int], limit: int = TSP_EXACT_LIMIT) -> Fraction:
    """Shortest closed tour visiting every point of ``subset`` (Held-Karp)."""
    pts = sorted(set(subset))
    if len(pts) > limit:
        raise ExactLimitError(f"exact TSP limit exceeded: {len(pts)} points > {limit}")
    if len(pts) <= 1:
        return ZERO
    sub = [[distances[a][b] for b in pts] for a in pts]
    ints, denom = kernels.scale([v for row in sub for v in row])
    p = len(pts)
    grid = [ints[i * p:(i + 1) * p] for i in range(p)]
    return Fraction(kernels.held_karp_all(grid)[-1], denom)


class TspSetup(SetupModel):
    """A batch pays the optimal tour from the origin through the points of its jobs."""

    kind = "tsp_based"

    def __init__(self, distances: Sequence[Sequence[Any]], origin: int = 0, exact_limit: int = TSP_EXACT_LIMIT):
        self.distances = tuple(tuple(as_time(v) for v in row) for row in distances)
        if not 0 <= origin < len(self.distances):
            raise ValueError("origin must index a point of the distance matrix")
        _check_metric(self.distances)
        self.origin = origin
        self.exact_limit = exact_limit
        self._cache: dict[frozenset[int], Fraction] = {}
        self._lock = threading.Lock()

    def _point(self, job: JobLike) -> int:
        if job.point is None:
            raise MissingTagError(f"job {job.id} has no point")
        if not 0 <= job.point < len(self.distances):
            raise MissingTagError(f"job {job.id} has point {job.point} outside the metric")
        return job.point

    def _tour(self, points: frozenset[int]) -> Fraction:
        with self._lock:
            hit = self._cache.get(points)
        if hit is None:
            hit = tsp_optimal(self.distances, points | {self.origin}, self.exact_limit)
            with self._lock:
                self._cache[points] = hit
        return hit

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        points = frozenset(self._point(j) for j in jobs)
        if not points:
            return ZERO
        return self._tour(points)

    def table(self, jobs: Sequence[JobLike]) -> list[Fraction]:
        pts = sorted({self._point(j) for j in jobs} - {self.origin})
        if len(pts) + 1 > self.exact_limit:
            raise ExactLimitError(f"exact TSP limit exceeded: {len(pts) + 1} points > {self.exact_limit}")
        order = [self.origin] + pts
        flat = [self.distances[a][b] for a in order for b in order]
        ints, denom = kernels.scale(flat)
        p = len(order)
        tours = kernels.held_karp_all([ints[i * p:(i + 1) * p] for i in range(p)])
        index = {pt: i for i, pt in enumerate(pts)}
        # a job sitting on the origin adds no travel
        masks = [0 if self._point(j) == self.origin else 1 << index[self._point(j)] for j in jobs]
        return _feature_table(masks, lambda u: Fraction(tours[u], denom))

    def params(self) -> dict[str, Any]:
        return {
            "distances": [[time_to_json(v) for v in row] for row in self.distances],
            "origin": self.origin,
        }

    def __repr__(self) -> str:
        return f"TspSetup(points={len(self.distances)}, origin={self.origin})"


class ExplicitSetup(SetupModel):
    """Lookup table over frozensets of job ids; validated as monotone and subadditive."""

    kind = "explicit"

    def __init__(self, table: Mapping[Iterable[int], Any], validate: bool = True):
        self.entries = {frozenset(k): as_time(v) for k, v in table.items()}
        if self.entries.setdefault(frozenset(), ZERO) != 0:
            raise ValueError("the empty batch must cost 0")
        self.universe = tuple(sorted(set().union(*self.entries)))
        if validate:
            if len(self.universe) > UNIVERSE_LIMIT:
                raise ExactLimitError("explicit tables are limited to 12 jobs")
            vals = self._universe_table()
            ints, _ = kernels.scale(vals)
            n = len(self.universe)
            if kernels.monotone_violation(ints, n) is not None:
                raise ValueError("explicit setup table is not monotone")
            if kernels.subadditive_violation(ints, n) is not None:
                raise ValueError("explicit setup table is not subadditive")

    @classmethod
    def unchecked(cls, table: Mapping[Iterable[int], Any]) -> "ExplicitSetup":
        """Build without validation; for analysing functions that break the assumptions."""
        return cls(table, validate=False)

    def _lookup(self, ids: frozenset[int]) -> Fraction:
        try:
            return self.entries[ids]
        except KeyError:
            raise MissingTagError(f"explicit table has no entry for batch {sorted(ids)}") from None

    def _universe_table(self) -> list[Fraction]:
        u = self.universe
        return [self._lookup(frozenset(u[i] for i in range(len(u)) if s >> i & 1)) for s in range(1 << len(u))]

    def cost(self, jobs: Iterable[JobLike]) -> Fraction:
        return self._lookup(frozenset(j.id for j in jobs))

    def params(self) -> dict[str, Any]:
        rows = sorted(self.entries.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
        return {"table": [{"batch": sorted(k), "cost": time_to_json(v)} for k, v in rows]}

    def __repr__(self) -> str:
        return f"ExplicitSetup({len(self.entries)} entries)"


def model_from_json(data: Mapping[str, Any]) -> SetupModel:
    kind = data["kind"]
    params = data.get("parameters", {})
    if kind == "constant":
        return ConstantSetup()
    if kind == "type_specific":
        return TypeSpecificSetup({int(k): v for k, v in params["weights"].items()})
    if kind == "library_based":
        return LibraryBasedSetup({int(k): v for k, v in params["weights"].items()})
    if kind == "tsp_based":
        return TspSetup(params["distances"], params.get("origin", 0))
    if kind == "explicit":
        return ExplicitSetup({frozenset(r["batch"]): r["cost"] for r in params["table"]})
    raise ValueError(f"unknown setup model kind {kind!r}")


def star_metric(weights: Mapping[int, Any]) -> tuple[list[list[Fraction]], int, dict[int, int]]:
    """Star metric reproducing a type-specific model as a TSP model.

    Returns ``(distances, origin, point_of_type)``; the origin is point 0.
    """
    types = sorted(weights)
    w = {t: as_time(weights[t]) for t in types}
    point = {t: i + 1 for i, t in enumerate(types)}
    size = len(types) + 1
    dist = [[ZERO] * size for _ in range(size)]
    for t in types:
        dist[0][point[t]] = dist[point[t]][0] = w[t] / 2
        for u in types:
            if u != t:
                dist[point[t]][point[u]] = (w[t] + w[u]) / 2
    return dist, 0, point


def setup_time(model: SetupModel, instance: Instance, batch: Iterable[int]) -> Fraction:
    ids = list(batch)
    for j in ids:
        if not 0 <= j < instance.n:
            raise KeyError(f"job {j} is not in the instance")
    return model.cost(instance.jobs[j] for j in ids)


def _universe_ints(model: SetupModel, instance: Instance, universe_limit: int) -> list[int]:
    if instance.n > universe_limit:
        raise ExactLimitError(f"universe too large: {instance.n} jobs > {universe_limit}")
    ints, _ = kernels.scale(model.table(instance.jobs))
    return ints


def is_monotone(model: SetupModel, instance: Instance, universe_limit: int = UNIVERSE_LIMIT) -> bool:
    return kernels.monotone_violation(_universe_ints(model, instance, universe_limit), instance.n) is None


def is_subadditive(model: SetupModel, instance: Instance, universe_limit: int = UNIVERSE_LIMIT) -> bool:
    return kernels.subadditive_violation(_universe_ints(model, instance, universe_limit), instance.n) is None


def subadditive_closure(model: SetupModel, instance: Instance, batch: Iterable[int]) -> Fraction:
    """Cheapest total setup over all ways of splitting ``batch`` into sub-batches."""
    ids = sorted(set(batch))
    if len(ids) > UNIVERSE_LIMIT:
        raise ExactLimitError(f"batch too large: {len(ids)} jobs > {UNIVERSE_LIMIT}")
    jobs = [instance.jobs[j] for j in ids]
    ints, denom = kernels.scale(model.table(jobs))
    return Fraction(kernels.closure_table(ints, len(ids))[-1], denom)
