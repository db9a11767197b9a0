"""Online scheduling with known batch setup times and hidden execution times."""

from __future__ import annotations

from uets.adversaries import CONSTRUCTIONS, Construction, adv_np_multi, adv_np_single, adv_p_multi, adv_p_single, gen_random_instance
from uets.algorithms import STRATEGIES, GuaranteeInfo, SettingsMismatchError, make_strategy
from uets.core import SETTINGS, EngineSettings, Event, EventKind, Instance, Job, ScheduleTrace, makespan
from uets.engine import Assign, Preempt, Wait, simulate
from uets.harness import CorpusSpec, Report, run_experiment, sweep_corpus
from uets.instance_io import load_instance, save_instance
from uets.kernels import BACKEND
from uets.oracle import lemma_lower_bound, optimal_makespan, optimal_makespan_with_releases
from uets.partition import (
    Partition,
    balanced_type_partition,
    exact_min_max_partition,
    refine_into_q_subbatches,
    size_limited_partition,
)
from uets.setup_models import (
    ConstantSetup,
    ExplicitSetup,
    LibraryBasedSetup,
    TspSetup,
    TypeSpecificSetup,
    is_monotone,
    is_subadditive,
    setup_time,
    subadditive_closure,
)
from uets.validation import validate_trace

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CONSTRUCTIONS",
    "SETTINGS",
    "STRATEGIES",
    "Assign",
    "ConstantSetup",
    "Construction",
    "CorpusSpec",
    "EngineSettings",
    "Event",
    "EventKind",
    "ExplicitSetup",
    "GuaranteeInfo",
    "Instance",
    "Job",
    "LibraryBasedSetup",
    "Partition",
    "Preempt",
    "Report",
    "ScheduleTrace",
    "SettingsMismatchError",
    "TspSetup",
    "TypeSpecificSetup",
    "Wait",
    "adv_np_multi",
    "adv_np_single",
    "adv_p_multi",
    "adv_p_single",
    "balanced_type_partition",
    "exact_min_max_partition",
    "gen_random_instance",
    "is_monotone",
    "is_subadditive",
    "lemma_lower_bound",
    "load_instance",
    "make_strategy",
    "makespan",
    "optimal_makespan",
    "optimal_makespan_with_releases",
    "refine_into_q_subbatches",
    "run_experiment",
    "save_instance",
    "setup_time",
    "simulate",
    "size_limited_partition",
    "subadditive_closure",
    "sweep_corpus",
    "validate_trace",
]
