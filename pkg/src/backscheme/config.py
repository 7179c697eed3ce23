"""JSON run configurations.

One document per run.  Every number that touches the state space is kept
exact: JSON floats are intercepted at parse time and turned into rationals
before binary floating point can distort them, and string values such as
"2.01" or "1/3" go through the same conversion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .cftp import CftpConfig
from .core import (
    DrivingMap,
    FiniteCyclicSystem,
    ModelError,
    RandomSet,
    StateLattice,
    as_fraction,
)
from .queueing import (
    ImpatienceModel,
    ImpatienceParams,
    LossModel,
    LossParams,
    build_impatience,
    build_loss,
)


class ConfigError(ValueError):
    """The configuration document is malformed or incomplete."""


def _rational(raw: Any, where: str) -> Fraction:
    if isinstance(raw, bool) or not isinstance(raw, (int, str, Fraction)):
        raise ConfigError(f"{where}: expected an exact number, got {raw!r}")
    try:
        return as_fraction(raw)
    except ModelError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _positive_int(raw: Any, where: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < 1:
        raise ConfigError(f"{where}: expected a positive integer, got {raw!r}")
    return raw


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return raw


@dataclass(frozen=True)
class QueueJob:
    kind: str
    system: FiniteCyclicSystem
    model: LossModel | ImpatienceModel
    max_sweeps: int | None


@dataclass(frozen=True)
class AbstractJob:
    kind: str
    system: FiniteCyclicSystem
    map: DrivingMap
    start_sets: RandomSet
    max_sweeps: int | None


@dataclass(frozen=True)
class CftpJob:
    kind: str
    config: CftpConfig
    replications: int
    seed: int
    jobs: int


Job = QueueJob | AbstractJob | CftpJob


def _start_values(raw: dict, labels: tuple[str, ...]) -> dict[str, list[Fraction]] | None:
    if "start_sets" not in raw:
        return None
    block = raw["start_sets"]
    if not isinstance(block, dict):
        raise ConfigError("start_sets: expected an object keyed by sample label")
    out = {}
    for label, values in block.items():
        if label not in labels:
            raise ConfigError(f"start_sets: unknown sample label {label!r}")
        if not isinstance(values, list):
            raise ConfigError(f"start_sets[{label!r}]: expected a list of states")
        out[label] = [_rational(v, f"start_sets[{label!r}]") for v in values]
    return out


def _queue_job(raw: dict, kind: str) -> QueueJob:
    samples = raw.get("samples")
    if not isinstance(samples, list) or not samples:
        raise ConfigError("samples: expected a nonempty list")
    labels = []
    service = []
    gaps = []
    patience = []
    for n, entry in enumerate(samples):
        if not isinstance(entry, dict):
            raise ConfigError(f"samples[{n}]: expected an object")
        labels.append(entry.get("label", f"w{n + 1}"))
        for key, into in (("service", service), ("interarrival", gaps)):
            if key not in entry:
                raise ConfigError(f"samples[{n}]: missing {key!r}")
            into.append(_rational(entry[key], f"samples[{n}].{key}"))
        if kind == "impatience":
            if "patience" not in entry:
                raise ConfigError(f"samples[{n}]: missing 'patience'")
            patience.append(_rational(entry["patience"], f"samples[{n}].patience"))
        elif "patience" in entry:
            raise ConfigError(f"samples[{n}]: 'patience' only belongs to impatience models")

    system = FiniteCyclicSystem(tuple(labels))
    x_max = _rational(raw["x_max"], "x_max") if "x_max" in raw else None
    step = _rational(raw["step"], "step") if "step" in raw else None
    max_sweeps = _positive_int(raw["max_sweeps"], "max_sweeps") if "max_sweeps" in raw else None
    start = _start_values(raw, system.labels)

    if kind == "loss":
        params = LossParams(tuple(service), tuple(gaps))
        model: LossModel | ImpatienceModel = build_loss(
            system, params, x_max=x_max, start_values=start, step=step
        )
    else:
        params = ImpatienceParams(tuple(service), tuple(gaps), tuple(patience))
        model = build_impatience(system, params, x_max=x_max, start_values=start, step=step)
    return QueueJob(kind=kind, system=system, model=model, max_sweeps=max_sweeps)


def _abstract_job(raw: dict) -> AbstractJob:
    labels = raw.get("labels")
    if not isinstance(labels, list) or not labels or not all(isinstance(x, str) for x in labels):
        raise ConfigError("labels: expected a nonempty list of strings")
    if "step" not in raw or "x_max" not in raw:
        raise ConfigError("abstract models need 'step' and 'x_max'")
    system = FiniteCyclicSystem(tuple(labels))
    lattice = StateLattice(_rational(raw["step"], "step"), _rational(raw["x_max"], "x_max"))
    maps = raw.get("maps")
    if not isinstance(maps, dict):
        raise ConfigError("maps: expected an object keyed by sample label")
    tables = []
    for label in system.labels:
        if label not in maps:
            raise ConfigError(f"maps: missing sample {label!r}")
        row = maps[label]
        if not isinstance(row, list) or len(row) != lattice.size:
            raise ConfigError(
                f"maps[{label!r}]: expected one image per lattice state ({lattice.size})"
            )
        tables.append(
            tuple(lattice.index_of(_rational(v, f"maps[{label!r}]")) for v in row)
        )
    map = DrivingMap(system, lattice, tables)
    start = _start_values(raw, system.labels)
    if start is None:
        start_sets = RandomSet.full(system, lattice)
    else:
        start_sets = RandomSet.from_values(
            system, lattice, [start[label] for label in system.labels]
        )
    max_sweeps = _positive_int(raw["max_sweeps"], "max_sweeps") if "max_sweeps" in raw else None
    return AbstractJob(
        kind="abstract", system=system, map=map, start_sets=start_sets, max_sweeps=max_sweeps
    )


def _distribution(raw: dict, key: str, required: bool) -> dict[Fraction, Fraction] | None:
    if key not in raw:
        if required:
            raise ConfigError(f"cftp models need a {key!r} distribution")
        return None
    block = raw[key]
    if not isinstance(block, dict) or not block:
        raise ConfigError(f"{key}: expected a nonempty object of value: weight pairs")
    return {
        _rational(value, f"{key} value"): _rational(weight, f"{key} weight")
        for value, weight in block.items()
    }


def _cftp_job(raw: dict) -> CftpJob:
    service = _distribution(raw, "service", required=True)
    gaps = _distribution(raw, "interarrival", required=True)
    patience = _distribution(raw, "patience", required=False)
    horizon_cap = (
        _positive_int(raw["horizon_cap"], "horizon_cap") if "horizon_cap" in raw else 1 << 20
    )
    config = CftpConfig.from_tables(service, gaps, patience, horizon_cap=horizon_cap)
    replications = (
        _positive_int(raw["replications"], "replications") if "replications" in raw else 1000
    )
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: expected an integer, got {seed!r}")
    jobs = _positive_int(raw["jobs"], "jobs") if "jobs" in raw else 1
    return CftpJob(kind="cftp", config=config, replications=replications, seed=seed, jobs=jobs)


def build_job(raw: dict) -> Job:
    kind = raw.get("model")
    if kind == "loss" or kind == "impatience":
        return _queue_job(raw, kind)
    if kind == "abstract":
        return _abstract_job(raw)
    if kind == "cftp":
        return _cftp_job(raw)
    raise ConfigError(
        f"model: expected one of 'loss', 'impatience', 'abstract', 'cftp', got {kind!r}"
    )


def load_job(path: str) -> Job:
    return build_job(load_config(path))
