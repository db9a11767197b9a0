"""Domain types: exact time values, jobs, instances, engine settings and traces."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Iterable, Iterator, Optional, Sequence

if TYPE_CHECKING:
    from uets.setup_models import SetupModel

__all__ = [
    "Time",
    "as_time",
    "fmt_time",
    "time_to_json",
    "sub_time",
    "Job",
    "JobView",
    "Instance",
    "EngineSettings",
    "SETTINGS",
    "EventKind",
    "Event",
    "ScheduleTrace",
    "makespan",
    "UnfinishedJobsError",
]

Time = Fraction
ZERO = Fraction(0)


def as_time(value: Any) -> Fraction:
    """Coerce ``value`` to a nonnegative exact time.

    Accepts ints, Fractions and strings of the form ``"num/den"`` or ``"num"``.
    Floats are rejected so that no rounding ever enters a schedule.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not time values")
    if isinstance(value, Fraction):
        t = value
    elif isinstance(value, int):
        t = Fraction(value)
    elif isinstance(value, str):
        t = Fraction(value.strip())
    else:
        raise TypeError(f"cannot interpret {value!r} as an exact time value")
    if t < 0:
        raise ValueError(f"time values must be nonnegative, got {t}")
    return t


def fmt_time(t: Fraction) -> str:
    return f"{t.numerator}/{t.denominator}"


def time_to_json(t: Fraction) -> int | str:
    return t.numerator if t.denominator == 1 else fmt_time(t)


def sub_time(a: Fraction, b: Fraction) -> Fraction:
    if b > a:
        raise ValueError(f"time subtraction would go negative: {a} - {b}")
    return a - b


@dataclass(frozen=True)
class JobView:
    """What an online algorithm may know about a job: everything but its execution time."""

    id: int
    release: Fraction = ZERO
    type_tag: Optional[int] = None
    libraries: Optional[frozenset[int]] = None
    point: Optional[int] = None


@dataclass(frozen=True)
class Job:
    id: int
    exec_time: Fraction = ZERO
    release: Fraction = ZERO
    type_tag: Optional[int] = None
    libraries: Optional[frozenset[int]] = None
    point: Optional[int] = None

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("job ids are nonnegative")
        object.__setattr__(self, "exec_time", as_time(self.exec_time))
        object.__setattr__(self, "release", as_time(self.release))
        if self.libraries is not None and not isinstance(self.libraries, frozenset):
            object.__setattr__(self, "libraries", frozenset(self.libraries))

    def view(self) -> JobView:
        return JobView(self.id, self.release, self.type_tag, self.libraries, self.point)

    def with_exec(self, exec_time: Fraction) -> "Job":
        return Job(self.id, exec_time, self.release, self.type_tag, self.libraries, self.point)


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    machines: int
    setup: "SetupModel"

    def __post_init__(self) -> None:
        object.__setattr__(self, "jobs", tuple(self.jobs))
        if self.machines < 1:
            raise ValueError("an instance needs at least one machine")
        for i, job in enumerate(self.jobs):
            if job.id != i:
                raise ValueError(f"job ids must be dense and ordered: position {i} holds id {job.id}")

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def degenerate(self) -> bool:
        """True for a single machine, which the analysis excludes."""
        return self.machines == 1

    def exec_times(self) -> tuple[Fraction, ...]:
        return tuple(j.exec_time for j in self.jobs)

    def with_exec_times(self, times: Sequence[Fraction]) -> "Instance":
        if len(times) != self.n:
            raise ValueError("one execution time per job is required")
        return Instance(tuple(j.with_exec(as_time(t)) for j, t in zip(self.jobs, times)), self.machines, self.setup)

    def with_machines(self, machines: int) -> "Instance":
        return Instance(self.jobs, machines, self.setup)

    def batch_cost(self, batch: Iterable[int]) -> Fraction:
        return self.setup.cost(self.jobs[j] for j in batch)

    def total_exec(self, batch: Iterable[int]) -> Fraction:
        return sum((self.jobs[j].exec_time for j in batch), ZERO)


@dataclass(frozen=True)
class EngineSettings:
    allow_multi_machine: bool = False
    allow_preemption: bool = False
    restart_from_scratch: bool = False
    execution_order: str = "fcfs"  # or "per_type"

    def __post_init__(self) -> None:
        if self.restart_from_scratch and not self.allow_preemption:
            raise ValueError("restart_from_scratch requires allow_preemption")
        if self.execution_order not in ("fcfs", "per_type"):
            raise ValueError(f"unknown execution order {self.execution_order!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "allow_multi_machine": self.allow_multi_machine,
            "allow_preemption": self.allow_preemption,
            "restart_from_scratch": self.restart_from_scratch,
            "execution_order": self.execution_order,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "EngineSettings":
        return cls(**data)


SETTINGS = {
    "suets-np": EngineSettings(),
    "suets-p": EngineSettings(allow_preemption=True),
    "muets-np": EngineSettings(allow_multi_machine=True),
    "muets-p": EngineSettings(allow_multi_machine=True, allow_preemption=True),
}


class EventKind(enum.IntEnum):
    # value doubles as the tie-break rank among events at equal times
    JOB_COMPLETE = 0
    PREEMPT = 1
    MACHINE_FREE = 2
    ASSIGN_BATCH = 3
    SETUP_START = 4
    JOB_START = 5


_KIND_NAMES = {
    EventKind.JOB_COMPLETE: "JobComplete",
    EventKind.PREEMPT: "Preempt",
    EventKind.MACHINE_FREE: "MachineFree",
    EventKind.ASSIGN_BATCH: "AssignBatch",
    EventKind.SETUP_START: "SetupStart",
    EventKind.JOB_START: "JobStart",
}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: Fraction
    batch: int
    machine: Optional[int] = None
    job: Optional[int] = None
    jobs: tuple[int, ...] = ()
    machines: tuple[int, ...] = ()
    type_tag: Optional[int] = None

    def sort_key(self) -> tuple:
        machine = self.machine if self.machine is not None else (min(self.machines) if self.machines else -1)
        job = self.job if self.job is not None else (min(self.jobs) if self.jobs else -1)
        return (self.time, int(self.kind), machine, job)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": _KIND_NAMES[self.kind], "time": fmt_time(self.time), "batch": self.batch}
        if self.machine is not None:
            out["machine"] = self.machine
        if self.job is not None:
            out["job"] = self.job
        if self.kind == EventKind.ASSIGN_BATCH:
            out["jobs"] = list(self.jobs)
            out["machines"] = list(self.machines)
        elif self.kind == EventKind.PREEMPT:
            out["completed"] = list(self.jobs)
            out["machines"] = list(self.machines)
        if self.type_tag is not None:
            out["type"] = self.type_tag
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Event":
        kind = _NAME_KINDS[data["kind"]]
        jobs = data.get("jobs", data.get("completed", ()))
        return cls(
            kind=kind,
            time=as_time(data["time"]),
            batch=int(data["batch"]),
            machine=data.get("machine"),
            job=data.get("job"),
            jobs=tuple(jobs),
            machines=tuple(data.get("machines", ())),
            type_tag=data.get("type"),
        )


class UnfinishedJobsError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleTrace:
    """Audit log of one schedule.

    ``exec_times`` holds the execution time each job ended up with (revealed at
    completion, or decided lazily by an adversary); ``None`` marks a job that
    never ran.
    """

    events: tuple[Event, ...]
    exec_times: tuple[Optional[Fraction], ...]
    settings: EngineSettings = field(default_factory=EngineSettings)
    makespan: Fraction = ZERO

    @property
    def n(self) -> int:
        return len(self.exec_times)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def of_kind(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def to_jsonl(self) -> str:
        header = {
            "kind": "header",
            "n": self.n,
            "makespan": fmt_time(self.makespan),
            "settings": self.settings.to_json(),
            "exec_times": [None if t is None else fmt_time(t) for t in self.exec_times],
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(e.to_json(), sort_keys=True) for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ScheduleTrace":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("kind") != "header":
            raise ValueError("trace file must start with a header line")
        head = rows[0]
        exec_times = tuple(None if t is None else as_time(t) for t in head["exec_times"])
        return cls(
            events=tuple(Event.from_json(r) for r in rows[1:]),
            exec_times=exec_times,
            settings=EngineSettings.from_json(head["settings"]),
            makespan=as_time(head["makespan"]),
        )


def makespan(trace: ScheduleTrace) -> Fraction:
    """Latest completion time; raises if some job never completed."""
    done: set[int] = set()
    last = ZERO
    for e in trace.events:
        if e.kind == EventKind.JOB_COMPLETE:
            done.add(e.job)
            last = max(last, e.time)
    missing = set(range(trace.n)) - done
    if missing:
        raise UnfinishedJobsError(f"unfinished jobs: {sorted(missing)}")
    return last
