"""Independent audit of a schedule trace against the scheduling rules.

The checks rebuild each batch, machine and job run from the event log alone.
Events sharing a timestamp are sorted by kind rank rather than causally, so
everything here is matched by key (batch, machine, job) instead of by
position.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from uets.core import EngineSettings, Event, EventKind, Instance, ScheduleTrace

__all__ = ["Violation", "ValidationReport", "validate_trace", "batch_windows"]

ZERO = Fraction(0)


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    makespan: Fraction = ZERO

    @property
    def valid(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def add(self, rule: str, detail: str) -> None:
        self.violations.append(Violation(rule, detail))

    def __bool__(self) -> bool:
        return self.valid


@dataclass
class _Batch:
    ref: int
    time: Fraction
    jobs: frozenset[int]
    machines: tuple[int, ...]
    preempt: Optional[Event] = None
    free: dict[int, Fraction] = field(default_factory=dict)
    setups: dict[int, list[Event]] = field(default_factory=lambda: defaultdict(list))
    starts: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    completes: dict[tuple[int, int], Fraction] = field(default_factory=dict)


def _collect(trace: ScheduleTrace, report: ValidationReport) -> dict[int, _Batch]:
    batches: dict[int, _Batch] = {}
    for e in trace.events:
        if e.kind == EventKind.ASSIGN_BATCH:
            if e.batch in batches:
                report.add("batch reference", f"batch {e.batch} assigned twice")
                continue
            batches[e.batch] = _Batch(e.batch, e.time, frozenset(e.jobs), tuple(e.machines))
    for e in trace.events:
        if e.kind == EventKind.ASSIGN_BATCH:
            continue
        b = batches.get(e.batch)
        if b is None:
            report.add("batch reference", f"{e.to_json()} refers to an unknown batch")
            continue
        if e.kind == EventKind.PREEMPT:
            if b.preempt is not None:
                report.add("preemption", f"batch {b.ref} preempted twice")
            b.preempt = e
        elif e.kind == EventKind.MACHINE_FREE:
            if e.machine in b.free:
                report.add("machine concurrency", f"machine {e.machine} freed twice from batch {b.ref}")
            b.free[e.machine] = e.time
        elif e.kind == EventKind.SETUP_START:
            b.setups[e.machine].append(e)
        elif e.kind == EventKind.JOB_START:
            key = (e.machine, e.job)
            if key in b.starts:
                report.add("re-execution", f"job {e.job} started twice on machine {e.machine} in batch {b.ref}")
            b.starts[key] = e.time
        elif e.kind == EventKind.JOB_COMPLETE:
            key = (e.machine, e.job)
            if key in b.completes:
                report.add("duplicate completion", f"job {e.job} completed twice in batch {b.ref}")
            b.completes[key] = e.time
    return batches


def validate_trace(instance: Instance, trace: ScheduleTrace, settings: Optional[EngineSettings] = None) -> ValidationReport:
    """List every rule the trace breaks; an empty list means the schedule is valid."""
    settings = settings or trace.settings
    report = ValidationReport()
    n = instance.n
    p = trace.exec_times
    if trace.n != n:
        report.add("instance mismatch", f"trace covers {trace.n} jobs, instance has {n}")
        return report
    for j, t in enumerate(p):
        if t is not None and t != instance.jobs[j].exec_time:
            report.add("execution time", f"trace records {t} for job {j}, the instance says {instance.jobs[j].exec_time}")

    keys = [e.sort_key() for e in trace.events]
    for i in range(1, len(keys)):
        if keys[i] < keys[i - 1]:
            report.add("ordering", f"event {i} at t={trace.events[i].time} is out of order")
            break

    batches = _collect(trace, report)
    restart = settings.restart_from_scratch
    per_type = settings.execution_order == "per_type"

    for b in batches.values():
        if not b.jobs:
            report.add("assignment", f"batch {b.ref} is empty")
        if not b.machines or len(set(b.machines)) != len(b.machines):
            report.add("assignment", f"batch {b.ref} has an invalid machine set")
        if len(b.machines) > 1 and not settings.allow_multi_machine:
            report.add("assignment", f"batch {b.ref} uses {len(b.machines)} machines without multi-machine batches")
        for j in b.jobs:
            if not 0 <= j < n:
                report.add("assignment", f"batch {b.ref} holds unknown job {j}")
            elif instance.jobs[j].release > b.time:
                report.add("release", f"job {j} assigned at {b.time} before its release {instance.jobs[j].release}")
        if b.preempt is not None and not settings.allow_preemption:
            report.add("preemption", f"batch {b.ref} preempted in a non-preemptive setting")
        for (mach, j) in b.starts:
            if mach not in b.machines:
                report.add("assignment", f"job {j} of batch {b.ref} ran on foreign machine {mach}")
            if j not in b.jobs:
                report.add("assignment", f"job {j} ran in batch {b.ref} without belonging to it")
        for mach in b.machines:
            if mach not in b.free:
                report.add("machine concurrency", f"machine {mach} never released batch {b.ref}")

    if any(j for b in batches.values() for j in b.jobs if not 0 <= j < n):
        return report
    cost = {ref: instance.batch_cost(b.jobs) for ref, b in batches.items()}

    # job runs: durations, releases, multiplicity
    runs: dict[int, list[tuple[Fraction, Fraction, int, int]]] = defaultdict(list)
    completions: dict[int, list[tuple[Fraction, int]]] = defaultdict(list)
    for b in batches.values():
        for (mach, j), s in b.starts.items():
            if s < instance.jobs[j].release:
                report.add("release", f"job {j} started at {s} before its release")
            end = b.completes.get((mach, j))
            if end is None:
                aborted = restart and b.preempt is not None and b.preempt.time <= b.free.get(mach, s)
                if not aborted:
                    report.add("job run", f"job {j} started in batch {b.ref} but never completed there")
                end = b.free.get(mach, s)
            elif p[j] is None or end - s != p[j]:
                report.add("duration", f"job {j} ran {end - s}, execution time is {p[j]}")
            else:
                completions[j].append((end, b.ref))
            runs[mach].append((s, end, j, b.ref))
        for (mach, j), t in b.completes.items():
            if (mach, j) not in b.starts:
                report.add("job run", f"job {j} completed at {t} without starting")

    last = ZERO
    for j in range(n):
        done = sorted(completions[j])
        if not done:
            report.add("unfinished", f"job {j} never completed")
            continue
        last = max(last, done[-1][0])
        if len(done) > 1:
            if not restart:
                report.add("duplicate completion", f"job {j} completed {len(done)} times")
            else:
                # only a restart of the earlier batch may undo a completion
                for (t0, r0), _ in zip(done, done[1:]):
                    pre = batches[r0].preempt
                    if pre is None or pre.time < t0:
                        report.add("duplicate completion", f"job {j} re-executed after batch {r0} finished it")
    report.makespan = last
    if trace.makespan != last:
        report.add("makespan", f"trace reports {trace.makespan}, last completion is {last}")

    # live-batch exclusivity: a job sits in one live batch at a time
    spans: dict[int, list[tuple[Fraction, Fraction, int]]] = defaultdict(list)
    horizon = max((e.time for e in trace.events), default=ZERO) + 1
    for b in batches.values():
        for j in b.jobs:
            ends = [t for (_, jj), t in b.completes.items() if jj == j]
            if ends and (b.preempt is None or not restart):
                stop = min(ends)
            elif b.preempt is not None:
                stop = b.preempt.time
            else:
                # never finished here and never released by a preemption
                report.add("incomplete batch", f"job {j} of batch {b.ref} never completed in it")
                stop = horizon
            spans[j].append((b.time, stop, b.ref))
    for j, sp in spans.items():
        sp.sort()
        for (a0, a1, r0), (b0, _, r1) in zip(sp, sp[1:]):
            if b0 < a1:
                report.add("live batch", f"job {j} assigned to batch {r1} while still live in batch {r0}")
            elif not restart and a1 <= b0 and any(jj == j for (_, jj) in batches[r0].completes):
                report.add("re-execution", f"completed job {j} assigned again in batch {r1}")

    # machines: one batch at a time, one activity at a time
    occupancy: dict[int, list[tuple[Fraction, Fraction, int]]] = defaultdict(list)
    for b in batches.values():
        for mach in b.machines:
            occupancy[mach].append((b.time, b.free.get(mach, b.time), b.ref))
            if b.free.get(mach, b.time) < b.time:
                report.add("machine concurrency", f"machine {mach} freed from batch {b.ref} before it was assigned")
    for mach, occ in occupancy.items():
        if not 0 <= mach < instance.machines:
            report.add("machine concurrency", f"machine {mach} does not exist")
        occ.sort()
        for (_, e0, r0), (s1, _, r1) in zip(occ, occ[1:]):
            if s1 < e0:
                report.add("machine concurrency", f"machine {mach} holds batches {r0} and {r1} at once")
    for mach, rs in runs.items():
        rs.sort()
        for (s0, e0, j0, _), (s1, _, j1, _) in zip(rs, rs[1:]):
            if s1 < e0:
                report.add("machine concurrency", f"machine {mach} runs jobs {j0} and {j1} at once")

    # setup accounting
    for b in batches.values():
        stop = b.preempt.time if b.preempt is not None else None
        for mach in b.machines:
            setups = sorted(b.setups.get(mach, []), key=lambda e: e.time)
            free = b.free.get(mach)
            mine = sorted((s, j) for (mm, j), s in b.starts.items() if mm == mach)
            if not setups:
                report.add("setup accounting", f"machine {mach} never set up for batch {b.ref}")
                continue
            if setups[0].time != b.time:
                report.add("setup accounting", f"machine {mach} began setting up batch {b.ref} at {setups[0].time}, assigned at {b.time}")
            if per_type:
                weights = instance.setup.weights  # type: ignore[attr-defined]
                types_present = {instance.jobs[j].type_tag for j in b.jobs}
                seen: set = set()
                for k, su in enumerate(setups):
                    if su.type_tag not in types_present or su.type_tag in seen:
                        report.add("setup accounting", f"machine {mach} set up type {su.type_tag} wrongly in batch {b.ref}")
                    seen.add(su.type_tag)
                    ready = su.time + weights.get(su.type_tag, ZERO)
                    nxt = setups[k + 1].time if k + 1 < len(setups) else None
                    typed = [s for s, j in mine if instance.jobs[j].type_tag == su.type_tag]
                    if typed and min(typed) < ready:
                        report.add("setup accounting", f"machine {mach} ran type {su.type_tag} before its setup finished")
                    cut = stop is not None and (free is not None and free <= ready) and stop <= ready
                    if nxt is not None and nxt < ready:
                        report.add("setup accounting", f"machine {mach} switched types mid-setup in batch {b.ref}")
                    if nxt is None and free is not None and free < ready and not cut:
                        report.add("setup accounting", f"machine {mach} left batch {b.ref} mid-setup")
                total = sum((weights.get(t, ZERO) for t in seen), ZERO)
                if total > cost[b.ref]:
                    report.add("setup accounting", f"machine {mach} spent {total} > c(X) = {cost[b.ref]} on setups")
            else:
                if len(setups) != 1:
                    report.add("setup accounting", f"machine {mach} set up batch {b.ref} {len(setups)} times")
                ready = b.time + cost[b.ref]
                cut = stop is not None and stop < ready
                if mine:
                    if mine[0][0] != ready:
                        report.add("setup accounting", f"machine {mach} began executing batch {b.ref} at {mine[0][0]}, setup ends at {ready}")
                elif free is not None and free != ready and not cut:
                    report.add("setup accounting", f"machine {mach} left batch {b.ref} at {free}, setup ends at {ready}")

    # preemption timing and freeing bound
    for b in batches.values():
        if b.preempt is None:
            continue
        t = b.preempt.time - b.time
        k = len(b.machines)
        done = set(b.preempt.jobs)
        pmax = max((p[j] or ZERO for j in b.jobs), default=ZERO)
        p_done = sum((p[j] or ZERO for j in done), ZERO)
        if cost[b.ref] + p_done / k + pmax < t:
            report.add("preemption inequality", f"batch {b.ref} preempted at offset {t} > c + p(X')/k + max p")
        for mach, free in b.free.items():
            if free - b.preempt.time > cost[b.ref] + pmax:
                report.add("preemption", f"machine {mach} freed {free - b.preempt.time} after preempting batch {b.ref}")
    return report


def batch_windows(instance: Instance, trace: ScheduleTrace) -> list[tuple[int, Fraction, Fraction, Fraction]]:
    """For every batch that ran to completion without preemption, return
    ``(ref, completion offset, lower, upper)`` with
    ``lower = c(X) + p(X)/k`` and ``upper = lower + max p``."""
    out = []
    p = trace.exec_times
    batches = _collect(trace, ValidationReport())
    for b in batches.values():
        if b.preempt is not None or not b.completes:
            continue
        k = len(b.machines)
        c = instance.batch_cost(b.jobs)
        total = sum((p[j] or ZERO for j in b.jobs), ZERO)
        pmax = max((p[j] or ZERO for j in b.jobs), default=ZERO)
        end = max(b.completes.values()) - b.time
        out.append((b.ref, end, c + total / k, c + total / k + pmax))
    return out
