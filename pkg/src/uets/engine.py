"""Discrete-event simulator for batch scheduling with hidden execution times.

The engine owns the clock, the machines and the job pool. A strategy sees the
schedule only through :class:`ObservableState`, which never holds the
execution time of a job that has not completed. Execution times come from an
:class:`ExecutionOracle`, which fixes each value no later than the moment the
job starts running.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import TYPE_CHECKING, Any, Hashable, Iterable, Mapping, Optional, Protocol, Sequence, Union

from uets.core import EngineSettings, Event, EventKind, Instance, JobView, ScheduleTrace

if TYPE_CHECKING:
    from uets.setup_models import SetupModel

__all__ = [
    "Assign",
    "Preempt",
    "Wait",
    "Action",
    "Strategy",
    "ExecutionOracle",
    "FixedOracle",
    "MachineView",
    "AssignmentView",
    "ObservableState",
    "RestrictedState",
    "IllegalActionError",
    "LivelockError",
    "simulate",
]

ZERO = Fraction(0)
MAX_ROUNDS_PER_INSTANT = 100_000


class IllegalActionError(RuntimeError):
    pass


class LivelockError(RuntimeError):
    pass


@dataclass(frozen=True)
class Assign:
    batch: frozenset[int]
    machines: tuple[int, ...]
    label: Hashable = None

    def __init__(self, batch: Iterable[int], machines: Union[int, Iterable[int]], label: Hashable = None):
        object.__setattr__(self, "batch", frozenset(batch))
        ms = (machines,) if isinstance(machines, int) else tuple(machines)
        object.__setattr__(self, "machines", ms)
        object.__setattr__(self, "label", label)


@dataclass(frozen=True)
class Preempt:
    ref: int


@dataclass(frozen=True)
class Wait:
    pass


Action = Union[Assign, Preempt, Wait]


class Strategy(Protocol):
    name: str

    def decide(self, state: "ObservableState") -> Sequence[Action]: ...


@dataclass(frozen=True)
class MachineView:
    id: int
    status: str  # idle | setup | exec
    assignment: Optional[int]
    job: Optional[int]
    setup_remaining: Fraction
    type_tag: Optional[int]


@dataclass(frozen=True)
class AssignmentView:
    ref: int
    label: Hashable
    jobs: frozenset[int]
    machines: tuple[int, ...]
    start: Fraction
    cost: Fraction
    completed: frozenset[int]
    running: frozenset[int]
    unstarted: tuple[int, ...]
    status: str  # live | complete | preempted

    @property
    def live(self) -> bool:
        return self.status == "live"


class ExecutionOracle:
    """Source of execution times. The default hooks do nothing."""

    checkpoints: tuple[Fraction, ...] = ()

    def execution_time(self, job: int, machine: int, ref: int, state: "ObservableState") -> Fraction:
        raise NotImplementedError

    def on_assign(self, ref: int, state: "ObservableState") -> None:
        pass

    def on_checkpoint(self, time: Fraction, state: "ObservableState") -> None:
        pass

    def pick_next(self, ref: int, machine: int, candidates: Sequence[int], state: "ObservableState") -> Optional[int]:
        return None


class FixedOracle(ExecutionOracle):
    """Reads the execution times stored on the instance."""

    def __init__(self, instance: Instance):
        self._times = instance.exec_times()

    def execution_time(self, job: int, machine: int, ref: int, state: "ObservableState") -> Fraction:
        return self._times[job]


@dataclass
class _Machine:
    id: int
    status: str = "idle"
    ref: Optional[int] = None
    job: Optional[int] = None
    setup_until: Fraction = ZERO
    type_tag: Optional[int] = None
    type_pos: int = 0
    stopping: bool = False
    token: int = 0


@dataclass
class _Assignment:
    ref: int
    label: Hashable
    jobs: frozenset[int]
    machines: tuple[int, ...]
    start: Fraction
    cost: Fraction
    queues: dict[Optional[int], list[int]]
    type_order: tuple[Optional[int], ...]
    done: set[int] = field(default_factory=set)
    running: set[int] = field(default_factory=set)
    status: str = "live"

    def unstarted(self) -> tuple[int, ...]:
        return tuple(sorted(j for q in self.queues.values() for j in q))

    def view(self) -> AssignmentView:
        return AssignmentView(
            self.ref, self.label, self.jobs, self.machines, self.start, self.cost,
            frozenset(self.done), frozenset(self.running), self.unstarted(), self.status,
        )


# timer ranks among equal times: completions, then setup ends, then releases
_JOB_DONE, _SETUP_DONE, _RELEASE = 0, 1, 2


class ObservableState:
    """Read-only view of the simulation offered to strategies and adversaries."""

    __slots__ = ("_sim",)

    def __init__(self, sim: "_Simulation"):
        self._sim = sim

    @property
    def now(self) -> Fraction:
        return self._sim.now

    @property
    def machine_count(self) -> int:
        return len(self._sim.machines)

    @property
    def n(self) -> int:
        return self._sim.instance.n

    @property
    def settings(self) -> EngineSettings:
        return self._sim.settings

    @property
    def setup(self) -> "SetupModel":
        """The setup-time function; strategies may evaluate it on any batch."""
        return self._sim.instance.setup

    def job(self, job_id: int) -> JobView:
        return self._sim.views[job_id]

    @property
    def machines(self) -> tuple[MachineView, ...]:
        now = self._sim.now
        return tuple(
            MachineView(m.id, m.status, m.ref, m.job, m.setup_until - now if m.status == "setup" else ZERO, m.type_tag)
            for m in self._sim.machines
        )

    @property
    def idle_machines(self) -> list[int]:
        return [m.id for m in self._sim.machines if m.status == "idle"]

    @property
    def available(self) -> list[int]:
        """Released jobs that are neither completed nor assigned."""
        return sorted(self._sim.pool)

    @property
    def released(self) -> list[int]:
        return sorted(self._sim.released)

    @property
    def completed(self) -> Mapping[int, Fraction]:
        """Completed jobs with their (now revealed) execution times."""
        return MappingProxyType(dict(self._sim.completed))

    @property
    def uncompleted(self) -> list[int]:
        done = self._sim.completed
        return [j for j in range(self._sim.instance.n) if j not in done]

    def assignment(self, ref: int) -> AssignmentView:
        return self._sim.assignments[ref].view()

    @property
    def assignments(self) -> list[AssignmentView]:
        return [a.view() for a in self._sim.assignments]

    @property
    def live_assignments(self) -> list[AssignmentView]:
        return [a.view() for a in self._sim.live.values()]

    def cost(self, batch: Iterable[int]) -> Fraction:
        views = self._sim.views
        return self._sim.instance.setup.cost(views[j] for j in batch)

    def restricted(self, jobs: Iterable[int], origin: Fraction) -> "RestrictedState":
        return RestrictedState(self, frozenset(jobs), origin)


class RestrictedState:
    """The state as seen by a sub-schedule: a subset of jobs and a shifted clock."""

    def __init__(self, base: ObservableState, jobs: frozenset[int], origin: Fraction):
        self._base = base
        self.jobs = jobs
        self.origin = origin

    @property
    def now(self) -> Fraction:
        return self._base.now - self.origin

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def available(self) -> list[int]:
        return [j for j in self._base.available if j in self.jobs]

    @property
    def released(self) -> list[int]:
        return sorted(self.jobs)

    @property
    def completed(self) -> Mapping[int, Fraction]:
        return MappingProxyType({j: p for j, p in self._base.completed.items() if j in self.jobs})

    @property
    def uncompleted(self) -> list[int]:
        done = self._base.completed
        return [j for j in sorted(self.jobs) if j not in done]

    @property
    def assignments(self) -> list[AssignmentView]:
        return [a for a in self._base.assignments if a.jobs <= self.jobs]

    @property
    def live_assignments(self) -> list[AssignmentView]:
        return [a for a in self._base.live_assignments if a.jobs <= self.jobs]

    def __getattr__(self, name: str) -> Any:
        return getattr(self._base, name)


class _Simulation:
    def __init__(self, instance: Instance, strategy: Strategy, settings: EngineSettings, oracle: Optional[ExecutionOracle]):
        self.instance = instance
        self.strategy = strategy
        self.settings = settings
        self.oracle = oracle if oracle is not None else FixedOracle(instance)
        self.views = tuple(j.view() for j in instance.jobs)
        self.machines = [_Machine(i) for i in range(instance.machines)]
        self.assignments: list[_Assignment] = []
        self.live: dict[int, _Assignment] = {}
        self.pool: set[int] = set()
        self.released: set[int] = set()
        self.completed: dict[int, Fraction] = {}
        self.decided: dict[int, Fraction] = {}
        self.events: list[Event] = []
        self.now = ZERO
        self.timers: list[tuple] = []
        self.seq = 0
        self.state = ObservableState(self)
        self.checkpoints = sorted(set(self.oracle.checkpoints))
        if settings.execution_order == "per_type":
            from uets.setup_models import TypeSpecificSetup

            if not isinstance(instance.setup, TypeSpecificSetup):
                raise ValueError("per-type execution needs a type-specific setup model")

    # timers -------------------------------------------------------------

    def _push(self, time: Fraction, rank: int, machine: int, job: int, kind: str, payload: Any = None, token: int = 0) -> None:
        self.seq += 1
        heapq.heappush(self.timers, (time, rank, machine, job, self.seq, kind, payload, token))

    def _emit(self, kind: EventKind, ref: int, **kw: Any) -> None:
        self.events.append(Event(kind, self.now, ref, **kw))

    # machine behaviour --------------------------------------------------

    def _free(self, m: _Machine) -> None:
        ref = m.ref
        m.status, m.ref, m.job, m.type_tag, m.stopping = "idle", None, None, None, False
        m.token += 1
        self._emit(EventKind.MACHINE_FREE, ref, machine=m.id)

    def _start_setup(self, m: _Machine, a: _Assignment, type_tag: Optional[int], duration: Fraction) -> None:
        m.status, m.type_tag, m.setup_until = "setup", type_tag, self.now + duration
        m.token += 1
        self._emit(EventKind.SETUP_START, a.ref, machine=m.id, type_tag=type_tag)
        self._push(m.setup_until, _SETUP_DONE, m.id, -1, "setup", a.ref, m.token)

    def _pull(self, m: _Machine) -> None:
        """Machine ``m`` is ready for its next job."""
        a = self.assignments[m.ref]  # type: ignore[index]
        if m.stopping or a.status != "live":
            self._free(m)
            return
        if self.settings.execution_order == "per_type":
            queue = a.queues[m.type_tag]
            if not queue:
                order = a.type_order
                pos = m.type_pos + 1
                while pos < len(order) and not a.queues[order[pos]]:
                    pos += 1
                if pos >= len(order):
                    self._free(m)
                    return
                m.type_pos = pos
                tag = order[pos]
                self._start_setup(m, a, tag, self.instance.setup.weights[tag])  # type: ignore[attr-defined]
                return
        else:
            queue = a.queues[None]
            if not queue:
                self._free(m)
                return
        pick = self.oracle.pick_next(a.ref, m.id, tuple(queue), self.state)
        job = queue[0] if pick is None else pick
        queue.remove(job)
        if job not in self.decided:
            p = self.oracle.execution_time(job, m.id, a.ref, self.state)
            if not isinstance(p, Fraction) or p < 0:
                raise ValueError(f"oracle returned an invalid execution time for job {job}: {p!r}")
            self.decided[job] = p
        a.running.add(job)
        m.status, m.job = "exec", job
        m.token += 1
        self._emit(EventKind.JOB_START, a.ref, machine=m.id, job=job)
        self._push(self.now + self.decided[job], _JOB_DONE, m.id, job, "job", a.ref, m.token)

    def _job_done(self, m: _Machine, job: int) -> None:
        a = self.assignments[m.ref]  # type: ignore[index]
        a.running.discard(job)
        a.done.add(job)
        self.completed[job] = self.decided[job]
        self._emit(EventKind.JOB_COMPLETE, a.ref, machine=m.id, job=job)
        if a.status == "live" and len(a.done) == len(a.jobs):
            a.status = "complete"
            del self.live[a.ref]
        m.job = None
        self._pull(m)

    # actions -------------------------------------------------------------

    def _assign(self, act: Assign) -> None:
        batch, machines = act.batch, act.machines
        if not batch:
            raise IllegalActionError(f"{act}: empty batch")
        if not machines or len(set(machines)) != len(machines):
            raise IllegalActionError(f"{act}: machine set must be nonempty and distinct")
        if len(machines) > 1 and not self.settings.allow_multi_machine:
            raise IllegalActionError(f"{act}: multi-machine batches are disabled")
        for i in machines:
            if not 0 <= i < len(self.machines):
                raise IllegalActionError(f"{act}: machine {i} does not exist")
            if self.machines[i].status != "idle":
                raise IllegalActionError(f"{act}: machine {i} is busy")
        for j in batch:
            if j not in self.pool:
                if not 0 <= j < self.instance.n:
                    why = "does not exist"
                elif j in self.completed:
                    why = "is completed"
                elif j not in self.released:
                    why = "is not released"
                else:
                    why = "is assigned elsewhere"
                raise IllegalActionError(f"{act}: job {j} {why}")
        ref = len(self.assignments)
        ordered = sorted(batch)
        if self.settings.execution_order == "per_type":
            queues: dict[Optional[int], list[int]] = {}
            for j in ordered:
                queues.setdefault(self.views[j].type_tag, []).append(j)
            type_order: tuple[Optional[int], ...] = tuple(sorted(queues))  # type: ignore[type-var]
        else:
            queues = {None: ordered}
            type_order = (None,)
        cost = self.state.cost(ordered)
        a = _Assignment(ref, act.label, batch, tuple(sorted(machines)), self.now, cost, queues, type_order)
        self.assignments.append(a)
        self.live[ref] = a
        self.pool -= batch
        self._emit(EventKind.ASSIGN_BATCH, ref, jobs=tuple(ordered), machines=a.machines)
        self.oracle.on_assign(ref, self.state)
        for i in a.machines:
            m = self.machines[i]
            m.ref, m.stopping, m.type_pos = ref, False, 0
            if self.settings.execution_order == "per_type":
                tag = type_order[0]
                self._start_setup(m, a, tag, self.instance.setup.weights[tag])  # type: ignore[attr-defined]
            else:
                self._start_setup(m, a, None, cost)

    def _preempt(self, act: Preempt) -> None:
        if not self.settings.allow_preemption:
            raise IllegalActionError(f"{act}: preemption is disabled")
        if not 0 <= act.ref < len(self.assignments) or self.assignments[act.ref].status != "live":
            raise IllegalActionError(f"{act}: no live batch with this reference")
        a = self.assignments[act.ref]
        a.status = "preempted"
        del self.live[a.ref]
        self._emit(EventKind.PREEMPT, a.ref, jobs=tuple(sorted(a.done)), machines=a.machines)
        returned = set(a.unstarted())
        for q in a.queues.values():
            q.clear()
        restart = self.settings.restart_from_scratch
        if restart:
            returned |= a.done | a.running
            for j in a.done:
                self.completed.pop(j, None)
            a.running.clear()
        self.pool |= returned
        for i in a.machines:
            m = self.machines[i]
            if m.ref != a.ref:
                continue
            if m.status == "setup" or restart:
                self._free(m)
            else:
                m.stopping = True

    def _consult(self) -> None:
        for _ in range(MAX_ROUNDS_PER_INSTANT):
            actions = [a for a in self.strategy.decide(self.state) if not isinstance(a, Wait)]
            if not actions:
                return
            for act in actions:
                if isinstance(act, Assign):
                    self._assign(act)
                elif isinstance(act, Preempt):
                    self._preempt(act)
                else:
                    raise IllegalActionError(f"unknown action {act!r}")
        raise LivelockError(f"strategy kept acting without time advancing at t={self.now}")

    # main loop -------------------------------------------------------------

    def _fire_checkpoints(self, upto: Fraction) -> None:
        while self.checkpoints and self.checkpoints[0] <= upto:
            self.oracle.on_checkpoint(self.checkpoints.pop(0), self.state)

    def run(self) -> ScheduleTrace:
        n = self.instance.n
        for job in self.instance.jobs:
            if job.release == 0:
                self.released.add(job.id)
                self.pool.add(job.id)
            else:
                self._push(job.release, _RELEASE, -1, job.id, "release")
        if n:
            self._fire_checkpoints(ZERO)
            self._consult()
        while len(self.completed) < n or any(m.status != "idle" for m in self.machines):
            if not self.timers:
                missing = [j for j in range(n) if j not in self.completed]
                raise LivelockError(f"no pending event at t={self.now} but jobs {missing} are unfinished")
            time = self.timers[0][0]
            self._fire_checkpoints(time)
            _, _, mid, job, kind, payload, token = self._pop()
            self.now = time
            if kind == "release":
                self.released.add(job)
                self.pool.add(job)
            else:
                m = self.machines[mid]
                if token != m.token:
                    continue
                if kind == "setup":
                    self._pull(m)
                else:
                    self._job_done(m, job)
            self._consult()
        events = tuple(sorted(self.events, key=Event.sort_key))
        span = max((e.time for e in events if e.kind == EventKind.JOB_COMPLETE), default=ZERO)
        exec_times = tuple(self.decided.get(j) for j in range(n))
        return ScheduleTrace(events, exec_times, self.settings, span)

    def _pop(self) -> tuple:
        time, rank, mid, job, _seq, kind, payload, token = heapq.heappop(self.timers)
        return time, rank, mid, job, kind, payload, token


def simulate(
    instance: Instance,
    strategy: Strategy,
    settings: Optional[EngineSettings] = None,
    oracle: Optional[ExecutionOracle] = None,
) -> ScheduleTrace:
    """Run ``strategy`` on ``instance`` and return the full trace."""
    settings = settings or EngineSettings()
    check = getattr(strategy, "check_settings", None)
    if check is not None:
        check(settings)
    return _Simulation(instance, strategy, settings or EngineSettings(), oracle).run()
