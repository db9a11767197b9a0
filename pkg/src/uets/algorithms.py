"""Online strategies, each carrying the multiplier its analysis guarantees.

A strategy is a small state machine driven by the engine: ``decide`` is called
at time 0 and after every event and returns the actions to apply now. Every
strategy keeps per-run state, so use :meth:`BaseStrategy.fresh` to get a
clean copy for another simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence

from uets.core import EngineSettings
from uets.engine import Action, Assign, Preempt
from uets.partition import (
    EXACT_LIMIT,
    Partition,
    ceil_sqrt,
    ceil_sqrt_ratio,
    choose_partition,
    refine_into_q_subbatches,
    size_limited_partition,
    spread_partition,
)

__all__ = [
    "GuaranteeInfo",
    "SettingsMismatchError",
    "BaseStrategy",
    "SingleBatch",
    "ListSingletons",
    "Alg1",
    "Alg2",
    "Alg3",
    "Alg4",
    "CombinedSingleNP",
    "CombinedMultiNP",
    "Ignore",
    "STRATEGIES",
    "make_strategy",
    "phase_count",
    "machine_phase_base",
    "alg1_parameters",
]


class SettingsMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GuaranteeInfo:
    strategy: str
    multiplier: Fraction
    formula: str
    conditional: bool = False  # true when a heuristic partition voids the guarantee


def phase_count(n: int) -> int:
    """Smallest ``q >= 1`` with ``q**q >= n``."""
    q = 1
    while q ** q < n:
        q += 1
    return q


def machine_phase_base(m: int) -> int:
    """Smallest ``q >= 2`` with ``q**q >= m``."""
    q = 2
    while q ** q < m:
        q += 1
    return q


def _floor_log(m: int, q: int) -> int:
    e = 0
    while q ** (e + 1) <= m:
        e += 1
    return e


def alg1_parameters(n: int, m: int, alpha: Fraction = Fraction(1)) -> tuple[int, int]:
    """Batch count ``k`` and size cap for the size-limited partition."""
    k = m + ceil_sqrt_ratio((m * n * alpha.denominator), alpha.numerator)
    cap = ceil_sqrt_ratio(alpha.numerator * n, alpha.denominator * m)
    return k, max(cap, 1)


def _labels(parts: Sequence[frozenset[int]]) -> list[tuple[int, frozenset[int]]]:
    return [(i, p) for i, p in enumerate(parts) if p]


class BaseStrategy:
    name = "base"

    def __init__(self, **params: Any):
        self.params = params
        self.alpha_conditional = False

    def fresh(self) -> "BaseStrategy":
        return type(self)(**self.params)

    def check_settings(self, settings: EngineSettings) -> None:
        pass

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        raise NotImplementedError

    def decide(self, state: Any) -> Sequence[Action]:
        raise NotImplementedError

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class SingleBatch(BaseStrategy):
    """All jobs in one batch on one machine."""

    name = "single_batch"

    def __init__(self) -> None:
        super().__init__()
        self.assigned = False

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        return GuaranteeInfo(self.name, Fraction(m), "m")

    def decide(self, state: Any) -> Sequence[Action]:
        if self.assigned or not state.available:
            return []
        self.assigned = True
        return [Assign(state.available, min(state.idle_machines), label=0)]


class ListSingletons(BaseStrategy):
    """Next job in id order, alone, onto the lowest free machine."""

    name = "list_singletons"

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        return GuaranteeInfo(self.name, Fraction(n, m) + 1, "n/m + 1")

    def decide(self, state: Any) -> Sequence[Action]:
        return [Assign([j], i, label=j) for j, i in zip(state.available, state.idle_machines)]


class Alg1(BaseStrategy):
    """Size-capped min-max partition into ``m + ceil(sqrt(mn))`` batches, list-scheduled in index order."""

    name = "alg1"

    def __init__(self, partition_mode: str = "auto", alpha: Any = 1):
        super().__init__(partition_mode=partition_mode, alpha=alpha)
        if partition_mode not in ("auto", "exact", "refine"):
            raise ValueError(f"unknown partition mode {partition_mode!r}")
        self.mode = partition_mode
        self.alpha = Fraction(alpha)
        self.batches: Optional[list[tuple[int, frozenset[int]]]] = None
        self.k = 0
        self.cap = 0

    def check_settings(self, settings: EngineSettings) -> None:
        if settings.allow_preemption:
            raise SettingsMismatchError("alg1 is defined for non-preemptive settings")

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        k, cap = alg1_parameters(n, m)
        return GuaranteeInfo(self.name, Fraction(k, m) + 1 + cap, "k/m + 1 + ceil(sqrt(n/m))", self.alpha_conditional)

    def _plan(self, state: Any) -> None:
        jobs = [state.job(j) for j in state.available]
        n, m = len(jobs), state.machine_count
        model = state.setup
        mode = self.mode
        if mode == "auto":
            mode = "exact" if n <= EXACT_LIMIT else "refine"
        if mode == "exact":
            self.k, self.cap = alg1_parameters(n, m)
            part = size_limited_partition(jobs, self.k, self.cap, model, "exact")
        else:
            self.k, self.cap = alg1_parameters(n, m, self.alpha)
            base, exact = choose_partition(jobs, m, model)
            self.alpha_conditional = not exact
            part = size_limited_partition(jobs, self.k, self.cap, model, "refine", base=base)
        self.batches = _labels(part.parts)

    def decide(self, state: Any) -> Sequence[Action]:
        if self.batches is None:
            if not state.available:
                return []
            self._plan(state)
        assert self.batches is not None
        out: list[Action] = []
        for i in state.idle_machines:
            if not self.batches:
                break
            label, batch = self.batches.pop(0)
            out.append(Assign(batch, i, label=label))
        return out


def _done(batch: frozenset[int], completed: Any) -> bool:
    return all(j in completed for j in batch)


class Alg2(BaseStrategy):
    """Phased preemptive strategy: each phase cuts the surviving batches into ``q`` pieces."""

    name = "alg2"

    def __init__(self) -> None:
        super().__init__()
        self.stage = "init"
        self.delegate: Optional[SingleBatch] = None
        self.phase = 0
        self.parts: list[frozenset[int]] = []
        self.base: list[frozenset[int]] = []
        self.phase_log: list[dict[str, Any]] = []
        self.n = 0
        self.q = 1
        self.threshold = 0

    def check_settings(self, settings: EngineSettings) -> None:
        if not settings.allow_preemption:
            raise SettingsMismatchError("alg2 needs preemption")

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        q = phase_count(n)
        return GuaranteeInfo(self.name, Fraction(6 * q + 1), "6q + 1", self.alpha_conditional)

    def _init(self, state: Any) -> None:
        jobs = [state.job(j) for j in state.available]
        self.n, m = len(jobs), state.machine_count
        self.q = phase_count(self.n)
        if m < 2 * self.q:
            self.delegate = SingleBatch()
            self.stage = "delegate"
            return
        part, exact = choose_partition(jobs, m, state.setup)
        self.alpha_conditional = not exact
        part = spread_partition(part, min(self.n, m))
        self.base = list(part.parts)
        self.parts = list(part.parts)
        self.threshold = m // self.q
        self.stage = "between"

    def _cap(self, phase: int) -> int:
        den = self.q ** (phase - 1)
        return -(-self.n // den)

    def _start_next(self, state: Any) -> list[Action]:
        m = state.machine_count
        completed = state.completed
        while self.phase < self.q:
            self.phase += 1
            left = [frozenset(j for j in p if j not in completed) for p in self.parts]
            if self.phase == 1:
                parts = left
            else:
                parts = list(refine_into_q_subbatches(Partition(tuple(left)), self.q, self._cap(self.phase), count=m).parts)
            self.parts = parts
            live = sum(1 for p in parts if p)
            self.phase_log.append({
                "phase": self.phase,
                "sizes": [len(p) for p in parts],
                "cap": self._cap(self.phase),
                "nested": all(any(p <= b for b in self.base) for p in parts if p),
                "skipped": live <= self.threshold,
            })
            if live <= self.threshold:
                continue
            self.stage = "running"
            return [Assign(p, i, label=(self.phase, i)) for i, p in enumerate(parts) if p]
        # last phase: what is left fits one job per machine
        rest = [j for j in state.available]
        if len(rest) > m:
            raise RuntimeError(f"{len(rest)} jobs left for the final phase of {m} machines")
        self.phase = self.q + 1
        self.phase_log.append({"phase": self.phase, "sizes": [1] * len(rest), "cap": 1, "nested": True, "skipped": False})
        self.stage = "final"
        return [Assign([j], i, label=(self.phase, i)) for i, j in enumerate(rest)]

    def decide(self, state: Any) -> Sequence[Action]:
        if self.stage == "init":
            if not state.available:
                return []
            self._init(state)
        if self.stage == "delegate":
            assert self.delegate is not None
            return self.delegate.decide(state)
        if self.stage == "running":
            completed = state.completed
            open_ = sum(1 for p in self.parts if p and not _done(p, completed))
            if open_ > self.threshold:
                return []
            self.stage = "between"
            cuts = [Preempt(a.ref) for a in state.live_assignments]
            if cuts:
                return cuts
        if self.stage == "between":
            if len(state.idle_machines) < state.machine_count:
                return []
            return self._start_next(state)
        return []


class Alg3(BaseStrategy):
    """``floor(sqrt m)`` min-max batches, each spread over ``floor(m/k)`` machines."""

    name = "alg3"

    def __init__(self) -> None:
        super().__init__()
        self.assigned = False

    def check_settings(self, settings: EngineSettings) -> None:
        if not settings.allow_multi_machine:
            raise SettingsMismatchError("alg3 needs multi-machine batches")

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        k = max(1, math.isqrt(m))
        mult = Fraction(-(-m // k)) + Fraction(m, m // k) + 1
        return GuaranteeInfo(self.name, mult, "ceil(m/k) + m/floor(m/k) + 1", self.alpha_conditional)

    def decide(self, state: Any) -> Sequence[Action]:
        if self.assigned or not state.available:
            return []
        self.assigned = True
        jobs = [state.job(j) for j in state.available]
        m = state.machine_count
        k = max(1, math.isqrt(m))
        part, exact = choose_partition(jobs, k, state.setup)
        self.alpha_conditional = not exact
        part = spread_partition(part, min(len(jobs), k))
        g = m // k
        return [Assign(p, range(i * g, (i + 1) * g), label=i) for i, p in enumerate(part.parts) if p]


class Alg4(BaseStrategy):
    """Phased preemptive strategy: surviving batches get ``q`` times more machines each phase."""

    name = "alg4"

    def __init__(self) -> None:
        super().__init__()
        self.stage = "init"
        self.batches: list[frozenset[int]] = []
        self.open: list[int] = []
        self.phase = 0
        self.q = 2
        self.kstar = 1
        self.phase_log: list[dict[str, Any]] = []

    def check_settings(self, settings: EngineSettings) -> None:
        if not (settings.allow_preemption and settings.allow_multi_machine):
            raise SettingsMismatchError("alg4 needs preemption and multi-machine batches")

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        q = machine_phase_base(m)
        return GuaranteeInfo(self.name, Fraction(9 * q - 2), "9q - 2", self.alpha_conditional)

    def _init(self, state: Any) -> None:
        jobs = [state.job(j) for j in state.available]
        m = state.machine_count
        self.q = machine_phase_base(m)
        self.kstar = _floor_log(m, self.q) + 1
        part, exact = choose_partition(jobs, m, state.setup)
        self.alpha_conditional = not exact
        part = spread_partition(part, min(len(jobs), m))
        self.batches = list(part.parts)
        self.open = [i for i, b in enumerate(self.batches) if b]
        self.stage = "between"

    def _uncompleted(self, completed: Any) -> list[int]:
        return [i for i in self.open if not _done(self.batches[i], completed)]

    def decide(self, state: Any) -> Sequence[Action]:
        if self.stage == "init":
            if not state.available:
                return []
            self._init(state)
        m = state.machine_count
        completed = state.completed
        if self.stage == "running":
            threshold = m // self.q ** self.phase
            if len(self._uncompleted(completed)) > threshold:
                return []
            self.stage = "between"
            cuts = [Preempt(a.ref) for a in state.live_assignments]
            if cuts:
                return cuts
        if self.stage != "between" or len(state.idle_machines) < m:
            return []
        while self.phase < self.kstar:
            self.phase += 1
            self.open = self._uncompleted(completed)
            width = self.q ** (self.phase - 1)
            threshold = m // self.q ** self.phase
            self.phase_log.append({
                "phase": self.phase,
                "batches": len(self.open),
                "machines_each": width,
                "skipped": len(self.open) <= threshold,
            })
            if len(self.open) <= threshold:
                continue
            if len(self.open) * width > m:
                raise RuntimeError(f"phase {self.phase} needs {len(self.open) * width} machines, only {m} exist")
            self.stage = "running"
            out: list[Action] = []
            for r, i in enumerate(self.open):
                left = [j for j in self.batches[i] if j not in completed]
                out.append(Assign(left, range(r * width, (r + 1) * width), label=(self.phase, i)))
            return out
        self.stage = "done"
        return []


class _Combined(BaseStrategy):
    def __init__(self) -> None:
        super().__init__()
        self.delegate: Optional[BaseStrategy] = None

    def _pick(self, n: int, m: int) -> BaseStrategy:
        raise NotImplementedError

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        inner = self.delegate or self._pick(n, m)
        g = inner.guarantee(n, m)
        return GuaranteeInfo(self.name, g.multiplier, f"{inner.name}: {g.formula}", g.conditional)

    def decide(self, state: Any) -> Sequence[Action]:
        if self.delegate is None:
            if not state.available:
                return []
            self.delegate = self._pick(len(state.available), state.machine_count)
        out = self.delegate.decide(state)
        self.alpha_conditional = self.delegate.alpha_conditional
        return out


class CombinedSingleNP(_Combined):
    """Single batch when ``m**3 <= n``, otherwise the size-capped partition strategy."""

    name = "combined_suets_np"

    def check_settings(self, settings: EngineSettings) -> None:
        if settings.allow_preemption:
            raise SettingsMismatchError("combined_suets_np is defined for non-preemptive settings")

    def _pick(self, n: int, m: int) -> BaseStrategy:
        return SingleBatch() if m ** 3 <= n else Alg1()


class CombinedMultiNP(_Combined):
    """Multi-machine batches when ``m**2 <= n``, otherwise the size-capped partition strategy."""

    name = "combined_muets_np"

    def check_settings(self, settings: EngineSettings) -> None:
        if settings.allow_preemption or not settings.allow_multi_machine:
            raise SettingsMismatchError("combined_muets_np needs the non-preemptive multi-machine setting")

    def _pick(self, n: int, m: int) -> BaseStrategy:
        return Alg3() if m ** 2 <= n else Alg1()


class Ignore(BaseStrategy):
    """Release-time wrapper: run ``inner`` on the jobs present, buffer arrivals until it finishes."""

    def __init__(self, inner: BaseStrategy):
        super().__init__(inner=inner)
        self.inner_template = inner
        self.inner: Optional[BaseStrategy] = None
        self.subset: frozenset[int] = frozenset()
        self.origin = Fraction(0)
        self.rounds: list[tuple[Fraction, frozenset[int]]] = []

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"ignore({self.inner_template.name})"

    def fresh(self) -> "Ignore":
        return Ignore(self.inner_template.fresh())

    def check_settings(self, settings: EngineSettings) -> None:
        self.inner_template.check_settings(settings)

    def guarantee(self, n: int, m: int) -> GuaranteeInfo:
        g = self.inner_template.guarantee(n, m)
        return GuaranteeInfo(self.name, 2 * g.multiplier + 1, f"2*({g.formula}) + 1", g.conditional)

    def decide(self, state: Any) -> Sequence[Action]:
        finished = self.inner is None or (
            all(j in state.completed for j in self.subset) and len(state.idle_machines) == state.machine_count
        )
        if finished:
            if not state.available:
                return []
            self.subset = frozenset(state.available)
            self.origin = state.now
            self.inner = self.inner_template.fresh()
            self.rounds.append((self.origin, self.subset))
        assert self.inner is not None
        actions = self.inner.decide(state.restricted(self.subset, self.origin))
        for act in actions:
            if isinstance(act, Assign) and not act.batch <= self.subset:
                raise RuntimeError("inner strategy reached outside its sub-schedule")
        self.alpha_conditional = self.alpha_conditional or self.inner.alpha_conditional
        return actions


STRATEGIES: dict[str, Callable[..., BaseStrategy]] = {
    "single_batch": SingleBatch,
    "list_singletons": ListSingletons,
    "alg1": Alg1,
    "alg2": Alg2,
    "alg3": Alg3,
    "alg4": Alg4,
    "combined_suets_np": CombinedSingleNP,
    "combined_muets_np": CombinedMultiNP,
}


def make_strategy(name: str, **params: Any) -> BaseStrategy:
    """Build a strategy by name; ``ignore:<inner>`` wraps ``inner`` in the release-time wrapper."""
    if name.startswith("ignore:"):
        return Ignore(make_strategy(name.split(":", 1)[1], **params))
    try:
        factory = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    return factory(**params)
