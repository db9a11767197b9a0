"""Experiment driver: run strategies on instances, compare against optima or bounds, report.

A run pairs a strategy with an engine setting and an instance source (a
file, a seeded generator, or an adversarial construction). Each row records
the makespan, the reference value it is compared with and where that value
came from:

* ``oracle``: the exact offline optimum (all jobs released at 0, ``n <= 12``);
* ``oracle_releases``: the exact optimum respecting release times (``n <= 7``);
* ``witness``: an explicit offline schedule for an adversary's realised times;
* ``lemma``: the three-term lower bound when nothing exact is affordable.

``guarantee_satisfied`` is ``True``/``False`` only when it is decided by the
reference value: against an exact optimum it is a plain comparison, against
a lower bound only success is conclusive, against a witness only failure is.
Otherwise it is ``None``, as it is for heuristic (conditional) partitions and
for strategies without a guarantee on instances with release times.
"""

from __future__ import annotations

import csv
import io
import json
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from uets.adversaries import CONSTRUCTIONS, Construction, gen_random_instance
from uets.algorithms import BaseStrategy, Ignore, SettingsMismatchError, make_strategy
from uets.core import SETTINGS, EngineSettings, Instance, ScheduleTrace, fmt_time
from uets.engine import simulate
from uets.instance_io import instance_to_json, load_instance
from uets.oracle import RELEASE_ORACLE_LIMIT, lemma_lower_bound, optimal_makespan, optimal_makespan_with_releases
from uets.partition import EXACT_LIMIT
from uets.validation import validate_trace

__all__ = [
    "ConfigError",
    "CorpusSpec",
    "Row",
    "Report",
    "LINEUP",
    "thread_count",
    "resolve_settings",
    "reference_value",
    "evaluate",
    "run_experiment",
    "run_adversary",
    "sweep_corpus",
    "load_config",
    "check_lineup",
]

THREADS_ENV = "UETS_THREADS"

# every strategy paired with the settings it is analysed for
LINEUP: tuple[tuple[str, str], ...] = (
    ("single_batch", "suets-np"),
    ("single_batch", "suets-p"),
    ("list_singletons", "suets-np"),
    ("list_singletons", "suets-p"),
    ("alg1", "suets-np"),
    ("alg2", "suets-p"),
    ("alg3", "muets-np"),
    ("alg4", "muets-p"),
    ("combined_suets_np", "suets-np"),
    ("combined_muets_np", "muets-np"),
)


class ConfigError(ValueError):
    pass


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def resolve_settings(setting: Union[str, Mapping[str, Any], EngineSettings, None]) -> EngineSettings:
    if setting is None:
        return EngineSettings()
    if isinstance(setting, EngineSettings):
        return setting
    if isinstance(setting, str):
        try:
            return SETTINGS[setting]
        except KeyError:
            raise ConfigError(f"unknown setting {setting!r}; choose from {sorted(SETTINGS)}") from None
    return EngineSettings.from_json(dict(setting))


def _setting_name(settings: EngineSettings) -> str:
    for name, s in SETTINGS.items():
        if s == settings:
            return name
    return json.dumps(settings.to_json(), sort_keys=True)


def _fmt(value: Optional[Fraction]) -> Optional[str]:
    return None if value is None else fmt_time(value)


@dataclass
class Row:
    strategy: str
    setting: str
    index: int
    source: str
    n: int
    m: int
    makespan: Fraction
    opt_or_bound: Optional[Fraction]
    bound_kind: str
    ratio: Optional[Fraction]
    guarantee_multiplier: Optional[Fraction]
    conditional: bool
    guarantee_satisfied: Optional[bool]
    valid: bool
    trace_path: Optional[str] = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.guarantee_satisfied is False or not self.valid

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        for key in ("makespan", "opt_or_bound", "ratio", "guarantee_multiplier"):
            out[key] = _fmt(getattr(self, key))
        return out


CSV_FIELDS = (
    "strategy",
    "setting",
    "index",
    "source",
    "n",
    "m",
    "makespan",
    "opt_or_bound",
    "bound_kind",
    "ratio",
    "ratio_float",
    "guarantee_multiplier",
    "conditional",
    "guarantee_satisfied",
    "valid",
    "trace_path",
)


@dataclass
class Report:
    header: dict[str, Any]
    rows: list[Row]

    def failures(self) -> list[Row]:
        return [r for r in self.rows if r.failed]

    @property
    def ok(self) -> bool:
        return not self.failures()

    def worst_ratios(self) -> dict[tuple[str, int], Fraction]:
        """Largest observed ratio per (strategy, machine count)."""
        worst: dict[tuple[str, int], Fraction] = {}
        for r in self.rows:
            if r.ratio is None:
                continue
            key = (r.strategy, r.m)
            if key not in worst or r.ratio > worst[key]:
                worst[key] = r.ratio
        return dict(sorted(worst.items()))

    def summary(self) -> dict[str, Any]:
        return {
            "kind": "summary",
            "rows": len(self.rows),
            "failures": len(self.failures()),
            "worst_ratio": [
                {"strategy": s, "m": m, "ratio": fmt_time(v)} for (s, m), v in self.worst_ratios().items()
            ],
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        lines.extend(json.dumps({"kind": "row", **r.to_json()}, sort_keys=True) for r in self.rows)
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            rec = r.to_json()
            rec["ratio_float"] = "" if r.ratio is None else f"{float(r.ratio):.6f}"
            writer.writerow({k: "" if rec.get(k) is None else rec[k] for k in CSV_FIELDS})
        return buf.getvalue()

    def write(self, out_dir: Union[str, Path], stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jsonl, csv_path = out / f"{stem}.jsonl", out / f"{stem}.csv"
        jsonl.write_text(self.to_jsonl())
        csv_path.write_text(self.to_csv())
        return jsonl, csv_path


def _ratio(makespan: Fraction, bound: Optional[Fraction]) -> Optional[Fraction]:
    if bound is None:
        return None
    if bound == 0:
        # nothing to do offline: an online schedule that also takes no time is optimal
        return Fraction(1) if makespan == 0 else None
    return makespan / bound


def reference_value(instance: Instance) -> tuple[Fraction, str]:
    """Best affordable comparison value for ``instance`` and its kind."""
    released_late = any(j.release > 0 for j in instance.jobs)
    if not released_late and instance.n <= EXACT_LIMIT:
        return optimal_makespan(instance)[0], "oracle"
    if released_late and instance.n <= RELEASE_ORACLE_LIMIT:
        return optimal_makespan_with_releases(instance), "oracle_releases"
    # arrivals only delay the optimum, so the release-free bound stays valid
    return lemma_lower_bound(instance), "lemma"


def _judge(makespan: Fraction, bound: Fraction, kind: str, multiplier: Fraction) -> Optional[bool]:
    within = makespan <= multiplier * bound
    if kind in ("oracle", "oracle_releases"):
        return within
    if kind == "lemma":
        return True if within else None
    if kind == "witness":
        return False if not within else None
    return None


def evaluate(
    instance: Instance,
    strategy: BaseStrategy,
    settings: EngineSettings,
    reference: Optional[tuple[Fraction, str]] = None,
    index: int = 0,
    source: str = "instance",
    trace_dir: Optional[Path] = None,
) -> Row:
    """Simulate one strategy on one instance and judge it against ``reference``."""
    trace = simulate(instance, strategy, settings)
    bound, kind = reference if reference is not None else reference_value(instance)
    report = validate_trace(instance, trace, settings)
    info = strategy.guarantee(instance.n, instance.machines)
    conditional = info.conditional or strategy.alpha_conditional
    released_late = any(j.release > 0 for j in instance.jobs)
    applies = not conditional and (isinstance(strategy, Ignore) or not released_late)
    satisfied = _judge(trace.makespan, bound, kind, info.multiplier) if applies else None
    return Row(
        strategy=strategy.name,
        setting=_setting_name(settings),
        index=index,
        source=source,
        n=instance.n,
        m=instance.machines,
        makespan=trace.makespan,
        opt_or_bound=bound,
        bound_kind=kind,
        ratio=_ratio(trace.makespan, bound),
        guarantee_multiplier=info.multiplier,
        conditional=conditional,
        guarantee_satisfied=satisfied,
        valid=report.valid,
        trace_path=_save_trace(trace, trace_dir, f"{index:05d}_{strategy.name}_{_setting_name(settings)}"),
        extra={} if report.valid else {"violations": [str(v) for v in report.violations[:10]]},
    )


def _save_trace(trace: ScheduleTrace, trace_dir: Optional[Path], stem: str) -> Optional[str]:
    if trace_dir is None:
        return None
    trace_dir.mkdir(parents=True, exist_ok=True)
    path = trace_dir / f"{stem.replace(':', '_').replace('(', '_').replace(')', '')}.jsonl"
    path.write_text(trace.to_jsonl())
    return str(path)


def run_adversary(
    construction: str,
    m: int,
    strategy: BaseStrategy,
    n: Optional[int] = None,
    trace_dir: Optional[Path] = None,
) -> tuple[Row, Construction, ScheduleTrace]:
    """Play ``strategy`` against a fresh adversarial construction."""
    try:
        build = CONSTRUCTIONS[construction]
    except KeyError:
        raise ConfigError(f"unknown construction {construction!r}; choose from {sorted(CONSTRUCTIONS)}") from None
    con = build(m, n) if n is not None else build(m)
    trace = simulate(con.instance, strategy, con.settings, oracle=con.adversary)
    realised = con.realised_instance()
    report = validate_trace(realised, trace, con.settings)
    witness = con.witness()
    info = strategy.guarantee(realised.n, m)
    conditional = info.conditional or strategy.alpha_conditional
    satisfied = None if conditional else _judge(trace.makespan, witness.makespan, "witness", info.multiplier)
    extra: dict[str, Any] = {
        "construction": construction,
        "forced_bound": fmt_time(con.forced_bound),
        "witness_bound": fmt_time(con.witness_bound),
        "forced": trace.makespan >= con.forced_bound,
        "witness_ok": (witness.makespan == con.witness_bound)
        if con.witness_exact
        else (witness.makespan <= con.witness_bound),
        "heavy": sorted(con.adversary.heavy),
        **{k: v for k, v in con.meta.items()},
    }
    if not report.valid:
        extra["violations"] = [str(v) for v in report.violations[:10]]
    row = Row(
        strategy=strategy.name,
        setting=_setting_name(con.settings),
        index=0,
        source=f"adversary:{construction}",
        n=realised.n,
        m=m,
        makespan=trace.makespan,
        opt_or_bound=witness.makespan,
        bound_kind="witness",
        ratio=_ratio(trace.makespan, witness.makespan),
        guarantee_multiplier=info.multiplier,
        conditional=conditional,
        guarantee_satisfied=satisfied,
        valid=report.valid and validate_trace(realised, witness).valid,
        trace_path=_save_trace(trace, trace_dir, f"{construction}_m{m}_{strategy.name}"),
        extra=extra,
    )
    return row, con, trace


@dataclass(frozen=True)
class CorpusSpec:
    """Seeded random corpus of small instances.

    Draw ``i`` uses ``random.Random(seed + i)`` to pick ``n``, ``m``, the
    setup family and the type count, then builds the instance from the same
    seed, so any single draw can be regenerated on its own.
    """

    draws: int = 500
    seed: int = 0
    n_min: int = 1
    n_max: int = 8
    machines: tuple[int, ...] = (2, 3)
    families: tuple[str, ...] = ("constant", "unweighted")
    max_types: int = 4
    p_values: tuple[Any, ...] = (0, 1, 2)
    lineup: tuple[tuple[str, str], ...] = LINEUP
    trace_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n_max > EXACT_LIMIT:
            raise ConfigError(f"corpus instances are limited to n <= {EXACT_LIMIT}")
        if not 0 <= self.n_min <= self.n_max:
            raise ConfigError("need 0 <= n_min <= n_max")
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "p_values", tuple(Fraction(p) for p in self.p_values))
        object.__setattr__(self, "lineup", tuple((s, st) for s, st in self.lineup))

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "CorpusSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown corpus keys {sorted(unknown)}")
        return cls(**dict(data))

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["lineup"] = [list(p) for p in self.lineup]
        out["p_values"] = [str(Fraction(p)) for p in self.p_values]
        return out

    def draw(self, i: int) -> tuple[Instance, str]:
        seed = self.seed + i
        rng = random.Random(seed)
        n = rng.randint(self.n_min, self.n_max)
        m = rng.choice(self.machines)
        family = rng.choice(self.families)
        types = rng.randint(1, self.max_types)
        inst = gen_random_instance(seed, n, m, family, ("uniform", list(self.p_values)), types=types)
        return inst, f"{family}:seed={seed}"

    def instances(self) -> list[tuple[Instance, str]]:
        return [self.draw(i) for i in range(self.draws)]


def _sweep_one(spec: CorpusSpec, i: int) -> list[Row]:
    inst, source = spec.draw(i)
    reference = reference_value(inst)
    trace_dir = Path(spec.trace_dir) if spec.trace_dir else None
    rows = []
    for name, setting in spec.lineup:
        strategy = make_strategy(name)
        rows.append(evaluate(inst, strategy, resolve_settings(setting), reference, i, source, trace_dir))
    return rows


def sweep_corpus(spec: CorpusSpec, threads: Optional[int] = None) -> Report:
    """Every strategy of the lineup on every corpus draw, ordered by draw index."""
    check_lineup(spec.lineup)
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda i: _sweep_one(spec, i), range(spec.draws)))
    else:
        chunks = [_sweep_one(spec, i) for i in range(spec.draws)]
    rows = [r for chunk in chunks for r in chunk]
    return Report({"mode": "sweep", "seed": spec.seed, "corpus": spec.to_json()}, rows)


def _instance_from_source(source: Mapping[str, Any], base: Path) -> tuple[Instance, str]:
    if "file" in source:
        path = Path(source["file"])
        if not path.is_absolute():
            path = base / path
        return load_instance(path), f"file:{path.name}"
    if "generator" in source:
        g = dict(source["generator"])
        try:
            seed, n, m = int(g.pop("seed")), int(g.pop("n")), int(g.pop("m"))
        except KeyError as exc:
            raise ConfigError(f"generator needs seed, n and m (missing {exc})") from None
        family = g.pop("family", "constant")
        p_values = g.pop("p_values", [0, 1, 2])
        inst = gen_random_instance(seed, n, m, family, ("uniform", list(p_values)), **g)
        return inst, f"{family}:seed={seed}"
    raise ConfigError("instance source needs one of 'file', 'generator' or 'adversary'")


def run_experiment(config: Mapping[str, Any], base_dir: Union[str, Path, None] = None) -> Report:
    """Run the experiment a config describes.

    ``{"corpus": {...}}`` sweeps a :class:`CorpusSpec`. Otherwise the config
    names a ``strategy`` (with optional ``params``), a ``setting`` and an
    ``instance`` source: ``{"file": path}``, ``{"generator": {...}}`` or
    ``{"adversary": {"construction": name, "m": m}}``.
    """
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    trace_dir = config.get("trace_dir")
    trace_path = None if trace_dir is None else (base / trace_dir)
    if "corpus" in config:
        spec = dict(config["corpus"])
        if trace_path is not None:
            spec.setdefault("trace_dir", str(trace_path))
        return sweep_corpus(CorpusSpec.from_json(spec))
    for key in ("strategy", "instance"):
        if key not in config:
            raise ConfigError(f"config is missing {key!r}")
    strategy = make_strategy(config["strategy"], **config.get("params", {}))
    source = config["instance"]
    header: dict[str, Any] = {"mode": "run", "config": dict(config), "seed": config.get("seed")}
    if "adversary" in source:
        adv = source["adversary"]
        if "setting" in config:
            wanted = resolve_settings(config["setting"])
            con_settings = CONSTRUCTIONS[adv["construction"]](int(adv["m"])).settings
            if wanted != con_settings:
                raise SettingsMismatchError(
                    f"construction {adv['construction']} runs under {_setting_name(con_settings)}, "
                    f"not {config['setting']}"
                )
        row, _, _ = run_adversary(adv["construction"], int(adv["m"]), strategy, adv.get("n"), trace_path)
        return Report(header, [row])
    settings = resolve_settings(config.get("setting"))
    instance, label = _instance_from_source(source, base)
    if "generator" in source:
        header["seed"] = source["generator"].get("seed")
    header["instance"] = instance_to_json(instance)
    return Report(header, [evaluate(instance, strategy, settings, source=label, trace_dir=trace_path)])


def load_config(path: Union[str, Path]) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def check_lineup(names: Sequence[tuple[str, str]]) -> None:
    """Fail early when a lineup pairs a strategy with a setting it rejects."""
    for name, setting in names:
        make_strategy(name).check_settings(resolve_settings(setting))
