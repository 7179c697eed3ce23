"""Order-theoretic tools: monotonicity checks, pointwise domination, the
classical bottom-up fixed-point sweep for monotone maps, and a set-valued
certificate that late backwards images stay inside prescribed target sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import DrivingMap, ModelError, RandomSet, format_exact


@dataclass(frozen=True)
class OrderReport:
    monotone: bool
    per_sample: tuple[bool, ...]
    first_violation: tuple[str, Fraction, Fraction] | None


def order_checks(map: DrivingMap) -> OrderReport:
    """Scan adjacent lattice points at every sample.

    On a totally ordered finite lattice, f(x) <= f(next x) at every adjacent
    pair is equivalent to full monotonicity, so one linear pass per sample
    settles it.
    """
    lattice = map.lattice
    per_sample = []
    first_violation = None
    for s, label in enumerate(map.system.labels):
        ok = True
        for i in range(lattice.size - 1):
            if map.evaluate_index(s, i) > map.evaluate_index(s, i + 1):
                ok = False
                if first_violation is None:
                    first_violation = (label, lattice.value(i), lattice.value(i + 1))
                break
        per_sample.append(ok)
    return OrderReport(
        monotone=all(per_sample),
        per_sample=tuple(per_sample),
        first_violation=first_violation,
    )


def dominates(low: DrivingMap, high: DrivingMap) -> bool:
    """True when high(x) >= low(x) at every sample and lattice point."""
    if not low.same_shape(high):
        raise ModelError("maps must share a system and a lattice to be compared")
    size = low.lattice.size
    return all(
        low.evaluate_index(s, i) <= high.evaluate_index(s, i)
        for s in range(low.system.period)
        for i in range(size)
    )


@dataclass(frozen=True)
class MonotoneSolveResult:
    map: DrivingMap
    limit: tuple[Fraction, ...]
    stabilized: bool
    settle_index: int | None
    max_sweeps: int

    def value(self, label: str) -> Fraction:
        return self.limit[self.map.system.index_of(label)]

    def as_dict(self) -> dict[str, Fraction]:
        return {label: self.value(label) for label in self.map.system.labels}


def loynes_solve(map: DrivingMap, max_sweeps: int | None = None) -> MonotoneSolveResult:
    """Bottom-up fixed point of a monotone map.

    Starting every sample at zero and repeatedly replacing each sample's
    value by the image of its predecessor's value yields a nondecreasing
    sequence, which on a finite lattice settles at the least solution of
    value-after-shift = map(value).
    """
    report = order_checks(map)
    if not report.monotone:
        label, x, y = report.first_violation  # type: ignore[misc]
        raise ModelError(
            f"bottom-up sweep needs a monotone map, but at sample {label!r} the value "
            f"drops between {format_exact(x)} and {format_exact(y)}"
        )
    system, lattice = map.system, map.lattice
    k = system.period
    if max_sweeps is None:
        max_sweeps = 10 * (k + lattice.size)
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be positive")

    current = (0,) * k
    stabilized = False
    settle_index = None
    for sweep_count in range(max_sweeps):
        nxt = tuple(
            map.tables[(s - 1) % k][current[(s - 1) % k]] for s in range(k)
        )
        for s in range(k):
            assert nxt[s] >= current[s], "bottom-up sweep must be nondecreasing"
        if nxt == current:
            stabilized = True
            settle_index = sweep_count
            break
        current = nxt
    return MonotoneSolveResult(
        map=map,
        limit=tuple(lattice.value(i) for i in current),
        stabilized=stabilized,
        settle_index=settle_index,
        max_sweeps=max_sweeps,
    )


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    horizon: int
    checked_from: int
    checked_to: int
    failures: tuple[tuple[int, str, Fraction], ...]


def verify_condition_v(
    map: DrivingMap,
    start_sets: RandomSet,
    busy_values: dict[str, frozenset[Fraction] | set[Fraction]],
    event_labels: tuple[str, ...] | list[str],
    horizon: int,
    n_check: int | None = None,
) -> ConditionReport:
    """Certify that from `horizon` sweeps onwards, every backwards image of
    the start sets lands inside `busy_values` at each of the event samples.

    The image families decrease sweep by sweep and therefore settle, so it
    is enough to check up to a finite index past the settling point; the
    default covers one full lattice drain around the period.
    """
    system, lattice = map.system, map.lattice
    k = system.period
    if horizon < 1:
        raise ValueError("horizon must be positive")
    for label in event_labels:
        system.index_of(label)
        if label not in busy_values:
            raise ModelError(f"no target set supplied for sample {label!r}")
    if n_check is None:
        ceil_span = int(-(-lattice.bound // lattice.step))
        n_check = horizon + k * ceil_span + k
    if n_check < horizon:
        raise ValueError("n_check must be at least the horizon")

    targets = {
        label: frozenset(busy_values[label]) for label in event_labels
    }
    event_indices = {system.index_of(label): label for label in event_labels}

    family = start_sets.sets
    failures: list[tuple[int, str, Fraction]] = []
    for sweep_count in range(1, n_check + 1):
        family = tuple(
            map.image((s - 1) % k, family[(s - 1) % k]) for s in range(k)
        )
        if sweep_count < horizon:
            continue
        for s, label in event_indices.items():
            for i in sorted(family[s]):
                v = lattice.value(i)
                if v not in targets[label]:
                    failures.append((sweep_count, label, v))
    return ConditionReport(
        holds=not failures,
        horizon=horizon,
        checked_from=horizon,
        checked_to=n_check,
        failures=tuple(failures),
    )
