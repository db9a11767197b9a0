"""Instance files: JSON with machines, setup model and job records."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Union

from uets.core import Instance, Job, as_time, time_to_json
from uets.setup_models import model_from_json

__all__ = ["instance_to_json", "instance_from_json", "load_instance", "save_instance"]

PathLike = Union[str, Path]


def instance_to_json(instance: Instance) -> dict[str, Any]:
    jobs = []
    for j in instance.jobs:
        rec: dict[str, Any] = {"id": j.id, "release": time_to_json(j.release), "exec": time_to_json(j.exec_time)}
        if j.type_tag is not None:
            rec["type"] = j.type_tag
        if j.libraries is not None:
            rec["libraries"] = sorted(j.libraries)
        if j.point is not None:
            rec["point"] = j.point
        jobs.append(rec)
    return {"machines": instance.machines, "setup_model": instance.setup.to_json(), "jobs": jobs}


def instance_from_json(data: Mapping[str, Any]) -> Instance:
    try:
        machines = int(data["machines"])
        model = model_from_json(data["setup_model"])
        records = sorted(data.get("jobs", []), key=lambda r: int(r["id"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance: {exc}") from exc
    jobs = []
    for rec in records:
        libs = rec.get("libraries")
        jobs.append(
            Job(
                int(rec["id"]),
                as_time(rec.get("exec", 0)),
                as_time(rec.get("release", 0)),
                rec.get("type"),
                None if libs is None else frozenset(libs),
                rec.get("point"),
            )
        )
    return Instance(tuple(jobs), machines, model)


def load_instance(path: PathLike) -> Instance:
    return instance_from_json(json.loads(Path(path).read_text()))


def save_instance(instance: Instance, path: PathLike) -> None:
    Path(path).write_text(json.dumps(instance_to_json(instance), indent=2, sort_keys=True) + "\n")
