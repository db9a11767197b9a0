"""Adaptive execution-time adversaries and random instance generation.

Each construction exposes an instance template (execution times left at 0),
an oracle that fixes every execution time to 1 (heavy) or 0 (light) while the
simulation runs, and a witness schedule built from the realised times. The
witness is itself simulated on the engine so it goes through the same
validation as any online schedule.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from uets.core import EngineSettings, Instance, Job, ScheduleTrace
from uets.engine import Assign, ExecutionOracle, ObservableState, simulate
from uets.setup_models import (
    ConstantSetup,
    ExplicitSetup,
    LibraryBasedSetup,
    SetupModel,
    TspSetup,
    TypeSpecificSetup,
)

__all__ = [
    "Adversary",
    "NpSingleAdversary",
    "PSingleAdversary",
    "NpMultiAdversary",
    "PMultiAdversary",
    "Construction",
    "adv_np_single",
    "adv_p_single",
    "adv_np_multi",
    "adv_p_multi",
    "CONSTRUCTIONS",
    "witness_trace",
    "gen_random_instance",
]

ONE = Fraction(1)
ZERO = Fraction(0)


class Adversary(ExecutionOracle):
    """Base for oracles that choose heavy (1) or light (0) execution times."""

    construction = "adversary"

    def __init__(self, m: int):
        self.m = m
        self.decided: dict[int, Fraction] = {}
        self.heavy: set[int] = set()
        self.log: list[dict[str, Any]] = []

    def _note(self, state: ObservableState, what: str, **data: Any) -> None:
        self.log.append({"time": str(state.now), "event": what, **data})

    def _mark_heavy(self, jobs: Sequence[int]) -> None:
        for j in jobs:
            if j in self.decided:
                raise RuntimeError(f"job {j} was already decided")
            self.decided[j] = ONE
            self.heavy.add(j)
        if len(self.heavy) > self.m:
            raise RuntimeError(f"heavy budget exceeded: {len(self.heavy)} > {self.m}")

    def is_heavy_at_start(self, job: int, machine: int, ref: int, state: ObservableState) -> bool:
        return False

    def execution_time(self, job: int, machine: int, ref: int, state: ObservableState) -> Fraction:
        if job not in self.decided:
            heavy = self.is_heavy_at_start(job, machine, ref, state)
            if heavy:
                self._mark_heavy([job])
            else:
                self.decided[job] = ZERO
        return self.decided[job]

    def realised(self, n: int) -> tuple[Fraction, ...]:
        return tuple(self.decided.get(j, ZERO) for j in range(n))


class NpSingleAdversary(Adversary):
    """The first batch with more than ``m`` jobs receives ``m`` heavy jobs."""

    construction = "np_single"

    def __init__(self, m: int):
        super().__init__(m)
        self.triggered = False

    def on_assign(self, ref: int, state: ObservableState) -> None:
        a = state.assignment(ref)
        if self.triggered or len(a.jobs) <= self.m:
            return
        self.triggered = True
        chosen = sorted(a.jobs)[: self.m]
        self._mark_heavy(chosen)
        self._note(state, "heavy", batch=ref, jobs=chosen)


class PSingleAdversary(Adversary):
    """Keeps the heavy jobs inside the largest group of unstarted jobs.

    Just before each integer time ``t = 1..m`` the candidate set shrinks to
    the largest of its parts found in the pool or in one batch's unstarted
    queue. A candidate job that starts is heavy while budget lasts, and
    batches run their candidates first.
    """

    construction = "p_single"

    def __init__(self, m: int, n: int):
        super().__init__(m)
        self.candidates: set[int] = set(range(n))
        self.checkpoints = tuple(Fraction(t) for t in range(1, m + 1))

    def on_checkpoint(self, time: Fraction, state: ObservableState) -> None:
        pool = set(state.available) & self.candidates
        groups: list[tuple[str, set[int]]] = [("pool", pool)]
        for a in sorted(state.live_assignments, key=lambda a: a.machines):
            groups.append((f"machine {a.machines[0]}", set(a.unstarted) & self.candidates))
        label, best = max(groups, key=lambda g: len(g[1]))  # first maximum wins ties
        self.candidates = best
        self._note(state, "checkpoint", at=str(time), location=label, size=len(best))

    def is_heavy_at_start(self, job: int, machine: int, ref: int, state: ObservableState) -> bool:
        return job in self.candidates and len(self.heavy) < self.m

    def pick_next(self, ref: int, machine: int, candidates: Sequence[int], state: ObservableState) -> Optional[int]:
        if len(self.heavy) >= self.m:
            return None
        for j in candidates:
            if j in self.candidates:
                return j
        return None


class NpMultiAdversary(Adversary):
    """The first batch ``X`` on ``s`` machines with ``|X| > sqrt(m)*s`` and
    ``sqrt(m)*s <= m`` receives ``sqrt(m)*s`` heavy jobs."""

    construction = "np_multi"

    def __init__(self, m: int):
        super().__init__(m)
        r = math.isqrt(m)
        if r * r != m:
            raise ValueError("this construction needs a square machine count")
        self.root = r
        self.triggered = False

    def on_assign(self, ref: int, state: ObservableState) -> None:
        a = state.assignment(ref)
        s = len(a.machines)
        quota = self.root * s
        if self.triggered or len(a.jobs) <= quota or quota > self.m:
            return
        self.triggered = True
        chosen = sorted(a.jobs)[:quota]
        self._mark_heavy(chosen)
        self._note(state, "heavy", batch=ref, machines=s, jobs=chosen)


class PMultiAdversary(Adversary):
    """Groups are classified into stages just before times ``1..q`` by how
    many machines work on them; the last group left over forms stage ``q+1``.
    A job of a stage-``t`` group is heavy iff it starts before time ``t``."""

    construction = "p_multi"

    def __init__(self, m: int, q: int, group_of: Sequence[int]):
        super().__init__(m)
        self.q = q
        self.group_of = tuple(group_of)
        self.groups = q ** q
        self.stage_of: dict[int, int] = {}
        self.checkpoints = tuple(Fraction(t) for t in range(1, q + 1))

    def on_checkpoint(self, time: Fraction, state: ObservableState) -> None:
        t = int(time)
        kappa = [0] * self.groups
        for mv in state.machines:
            if mv.status in ("setup", "exec") and mv.type_tag is not None:
                kappa[mv.type_tag] += 1
        free = [i for i in range(self.groups) if i not in self.stage_of]
        size = self.q ** (self.q + 1 - t) - self.q ** (self.q - t)
        chosen = sorted(free, key=lambda i: (-kappa[i], i))[:size]
        for i in chosen:
            self.stage_of[i] = t
        self._note(state, "classify", stage=t, groups=chosen, kappa=kappa)

    def is_heavy_at_start(self, job: int, machine: int, ref: int, state: ObservableState) -> bool:
        stage = self.stage_of.get(self.group_of[job], self.q + 1)
        return state.now < stage


@dataclass
class Construction:
    name: str
    instance: Instance
    adversary: Adversary
    settings: EngineSettings
    witness_bound: Fraction
    witness_exact: bool  # witness makespan must equal the bound, not just stay below it
    forced_bound: Fraction
    meta: dict[str, Any] = field(default_factory=dict)

    def realised_instance(self) -> Instance:
        return self.instance.with_exec_times(self.adversary.realised(self.instance.n))

    def witness(self) -> ScheduleTrace:
        return witness_trace(self)


def adv_np_single(m: int) -> Construction:
    n = m ** 3
    inst = Instance(tuple(Job(i) for i in range(n)), m, ConstantSetup())
    return Construction("np_single", inst, NpSingleAdversary(m), EngineSettings(), Fraction(2), False, Fraction(m))


def adv_p_single(m: int, n: int | None = None) -> Construction:
    """Preemptive single-machine-batch construction; ``n`` defaults to ``(m+1)^m``."""
    if n is None:
        n = (m + 1) ** m
    if n < (m + 1) ** m:
        raise ValueError(f"p_single needs at least (m+1)^m = {(m + 1) ** m} jobs")
    inst = Instance(tuple(Job(i) for i in range(n)), m, ConstantSetup())
    return Construction(
        "p_single", inst, PSingleAdversary(m, n), EngineSettings(allow_preemption=True), Fraction(2), True, Fraction(m)
    )


def adv_np_multi(m: int) -> Construction:
    r = math.isqrt(m)
    if m < 1 or r * r != m:
        raise ValueError("np_multi needs a square machine count")
    jobs = tuple(Job(i * m + j, type_tag=i) for i in range(m) for j in range(m))
    inst = Instance(jobs, m, TypeSpecificSetup.unweighted(range(m)))
    return Construction(
        "np_multi", inst, NpMultiAdversary(m), EngineSettings(allow_multi_machine=True), Fraction(3), False, Fraction(r)
    )


def adv_p_multi(m: int) -> Construction:
    if m < 1:
        raise ValueError("machine count must be positive")
    q = 1
    while (q + 1) ** (q + 1) <= m:
        q += 1
    groups = q ** q
    size = m * m
    group_of = [g for g in range(groups) for _ in range(size)]
    jobs = tuple(Job(i, type_tag=group_of[i]) for i in range(groups * size))
    inst = Instance(jobs, m, TypeSpecificSetup.unweighted(range(groups)))
    settings = EngineSettings(allow_multi_machine=True, allow_preemption=True, execution_order="per_type")
    return Construction(
        "p_multi", inst, PMultiAdversary(m, q, group_of), settings, Fraction(3), False, Fraction(q + 1),
        meta={"q": q, "groups": groups, "first_stage_size": groups - q ** (q - 1)},
    )


CONSTRUCTIONS = {
    "np_single": adv_np_single,
    "p_single": adv_p_single,
    "np_multi": adv_np_multi,
    "p_multi": adv_p_multi,
}


class _Plan:
    """Strategy that replays a fixed one-batch-per-machine plan."""

    name = "witness"

    def __init__(self, batches: Sequence[frozenset[int]]):
        self.batches = batches
        self.sent = False

    def decide(self, state: Any) -> list[Assign]:
        if self.sent:
            return []
        self.sent = True
        return [Assign(b, i, label=i) for i, b in enumerate(self.batches) if b]


def witness_trace(con: Construction) -> ScheduleTrace:
    """Offline schedule for the realised execution times.

    Single-machine constructions put one heavy job on each machine and every
    light job on machine 0. Type-based constructions give machine ``i`` the
    light jobs of type ``i`` plus one heavy job.
    """
    inst = con.realised_instance()
    m = inst.machines
    heavy = sorted(j for j in range(inst.n) if inst.jobs[j].exec_time > 0)
    if len(heavy) > m:
        raise RuntimeError(f"{len(heavy)} heavy jobs cannot be spread over {m} machines")
    light = [j for j in range(inst.n) if inst.jobs[j].exec_time == 0]
    batches: list[set[int]] = [set() for _ in range(m)]
    for i, h in enumerate(heavy):
        batches[i].add(h)
    if con.name in ("np_single", "p_single"):
        batches[0].update(light)
    else:
        types = sorted({inst.jobs[j].type_tag for j in light})
        if len(types) > m:
            raise RuntimeError("more job types than machines")
        slot = {t: i for i, t in enumerate(types)}
        for j in light:
            batches[slot[inst.jobs[j].type_tag]].add(j)
    return simulate(inst, _Plan([frozenset(b) for b in batches]), EngineSettings())


def gen_random_instance(
    seed: int,
    n: int,
    m: int,
    family: str = "constant",
    p_distribution: Any = ("uniform", [0, 1, 2]),
    types: int = 3,
    libraries: int = 4,
    points: int = 5,
    weights: Sequence[Any] = (1, 2, 3),
) -> Instance:
    """Seeded random instance.

    ``p_distribution`` is ``("constant", v)`` or ``("uniform", values)``
    where values are exact rationals. ``family`` picks the setup model:
    constant, type_specific, unweighted, library_based, tsp_based or explicit.
    """
    rng = random.Random(seed)
    kind, arg = p_distribution
    if kind == "constant":
        draw = lambda: Fraction(arg)  # noqa: E731
    elif kind == "uniform":
        values = [Fraction(v) for v in arg]
        draw = lambda: rng.choice(values)  # noqa: E731
    else:
        raise ValueError(f"unknown execution-time distribution {kind!r}")
    wts = [Fraction(w) for w in weights]
    model: SetupModel
    tags: list[dict[str, Any]] = [{} for _ in range(n)]
    if family == "constant":
        model = ConstantSetup()
    elif family in ("type_specific", "unweighted"):
        model = (
            TypeSpecificSetup.unweighted(range(types))
            if family == "unweighted"
            else TypeSpecificSetup({t: rng.choice(wts) for t in range(types)})
        )
        for tg in tags:
            tg["type_tag"] = rng.randrange(types)
    elif family == "library_based":
        model = LibraryBasedSetup({lib: rng.choice(wts) for lib in range(libraries)})
        for tg in tags:
            size = rng.randint(1, libraries)
            tg["libraries"] = frozenset(rng.sample(range(libraries), size))
    elif family == "tsp_based":
        coords = [(rng.randint(0, 4), rng.randint(0, 4)) for _ in range(points)]
        # Manhattan distances are integral and metric
        dist = [[abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in coords] for a in coords]
        model = TspSetup(dist, 0)
        for tg in tags:
            tg["point"] = rng.randrange(points)
    elif family == "explicit":
        model = _random_explicit(rng, n, wts)
    else:
        raise ValueError(f"unknown setup family {family!r}")
    jobs = tuple(Job(i, draw(), **tags[i]) for i in range(n))
    return Instance(jobs, m, model)


def _random_explicit(rng: random.Random, n: int, wts: Sequence[Fraction]) -> ExplicitSetup:
    """A random coverage function written out as a table, so it is monotone and subadditive."""
    libs = {i: frozenset(rng.sample(range(4), rng.randint(1, 4))) for i in range(n)}
    w = [rng.choice(wts) for _ in range(4)]
    table = {}
    for s in range(1 << n):
        ids = frozenset(i for i in range(n) if s >> i & 1)
        used = set().union(*(libs[i] for i in ids)) if ids else set()
        table[ids] = sum((w[x] for x in used), ZERO)
    return ExplicitSetup(table)
