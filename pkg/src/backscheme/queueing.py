"""Single-server queue drivers: the loss model and the impatience model.

Both models move a workload across arrival instants on an exact rational
lattice.  The loss map adds a service requirement only when the arriving
customer finds the system empty; the impatience map adds it whenever the
backlog found on arrival does not exceed the customer's patience.  This
module derives the lattice, the driving maps, the default start families,
the per-sample window quantities, the cardinal bounds, the monotone
comparison envelopes, and an index-valued cross-check of the backwards
limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor
from typing import Iterable, Mapping, Sequence

from .backwards import BackwardsRun, backwards_run
from .core import (
    DrivingMap,
    FiniteCyclicSystem,
    ModelError,
    RandomSet,
    Rational,
    StateLattice,
    as_fraction,
    fraction_gcd,
)


@dataclass(frozen=True)
class LossParams:
    """Per-sample service requirements and interarrival gaps."""

    service: tuple[Fraction, ...]
    interarrival: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        service = tuple(as_fraction(v) for v in self.service)
        gaps = tuple(as_fraction(v) for v in self.interarrival)
        if not service or len(service) != len(gaps):
            raise ModelError("service and interarrival must list one value per sample")
        if any(v < 0 for v in service):
            raise ModelError("service times must be nonnegative")
        if any(v <= 0 for v in gaps):
            raise ModelError("interarrival times must be positive")
        object.__setattr__(self, "service", service)
        object.__setattr__(self, "interarrival", gaps)

    @property
    def period(self) -> int:
        return len(self.service)


@dataclass(frozen=True)
class ImpatienceParams(LossParams):
    """Loss parameters plus a per-sample patience budget."""

    patience: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        super().__post_init__()
        patience = tuple(as_fraction(v) for v in self.patience)
        if len(patience) != len(self.service):
            raise ModelError("patience must list one value per sample")
        if any(v < 0 for v in patience):
            raise ModelError("patience must be nonnegative")
        object.__setattr__(self, "patience", patience)


def lattice_step(params: LossParams) -> Fraction:
    """Coarsest exact grid closed under the workload updates.

    Patience values are excluded on purpose: they only enter comparisons,
    never the arithmetic, so the workload stays on the service/interarrival
    grid.
    """
    return fraction_gcd(params.service + params.interarrival)


def _check_period(system: FiniteCyclicSystem, params: LossParams) -> None:
    if params.period != system.period:
        raise ModelError("parameters must list one entry per sample of the system")


def _window(
    system: FiniteCyclicSystem,
    interarrival: tuple[Fraction, ...],
    heights: tuple[Fraction, ...],
    s: int,
) -> tuple[int, ...]:
    """Past indices i >= 1 with heights(i steps back) > cumulated gaps.

    The scan is finite: gaps are positive, so once their running sum reaches
    the largest height no further index can qualify.
    """
    k = system.period
    top = max(heights)
    picks: list[int] = []
    total = Fraction(0)
    i = 0
    while total < top:
        i += 1
        total += interarrival[(s - i) % k]
        if heights[(s - i) % k] > total:
            picks.append(i)
    return tuple(picks)


def _start_family(
    system: FiniteCyclicSystem,
    lattice: StateLattice,
    start_values: Mapping[str, Iterable[Rational]],
) -> RandomSet:
    families = []
    for label in system.labels:
        if label not in start_values:
            raise ModelError(f"start sets must cover sample {label!r}")
        families.append(start_values[label])
    return RandomSet.from_values(system, lattice, families)


@dataclass(frozen=True)
class LossReport:
    """Window quantities of the loss model.

    `in_service_candidates[w]` lists how many arrivals back a customer may
    sit that entered an empty system and is still being served now;
    `candidate_horizon` is the deepest such index (0 when none), and
    `shared_horizon` the smallest horizon that works for at least one
    sample.  `residual_workloads` holds the clamped leftover service values
    over that shared horizon.
    """

    step: Fraction
    in_service_candidates: dict[str, tuple[int, ...]]
    candidate_horizon: dict[str, int]
    shared_horizon: int
    residual_workloads: dict[str, tuple[Fraction, ...]]


@dataclass(frozen=True)
class LossModel:
    system: FiniteCyclicSystem
    params: LossParams
    lattice: StateLattice
    map: DrivingMap
    start_sets: RandomSet
    report: LossReport

    def run(self, max_sweeps: int | None = None) -> BackwardsRun:
        return backwards_run(self.map, self.start_sets, max_sweeps)


def build_loss(
    system: FiniteCyclicSystem,
    params: LossParams,
    x_max: Rational | None = None,
    start_values: Mapping[str, Iterable[Rational]] | None = None,
    step: Rational | None = None,
) -> LossModel:
    """Assemble the loss model on its exact lattice.

    The default bound max(service) is closed under the map: an empty system
    jumps to at most max(service) minus one gap, and a busy one only drains.
    The default start family is the full lattice.
    """
    _check_period(system, params)
    grid = lattice_step(params) if step is None else as_fraction(step)
    bound = max(params.service) if x_max is None else as_fraction(x_max)
    lattice = StateLattice(grid, bound)

    by_label = {
        label: (params.service[s], params.interarrival[s])
        for s, label in enumerate(system.labels)
    }

    def rule(label: str, x: Fraction) -> Fraction:
        svc, gap = by_label[label]
        load = x + svc if x == 0 else x
        return max(Fraction(0), load - gap)

    map = DrivingMap.from_function(system, lattice, rule)

    k = system.period
    candidates: dict[str, tuple[int, ...]] = {}
    horizon: dict[str, int] = {}
    for s, label in enumerate(system.labels):
        picks = _window(system, params.interarrival, params.service, s)
        candidates[label] = picks
        horizon[label] = max(picks) if picks else 0
    shared = max(1, min(horizon.values()))

    residuals: dict[str, tuple[Fraction, ...]] = {}
    for s, label in enumerate(system.labels):
        seen = set()
        total = Fraction(0)
        for i in range(1, shared + 1):
            total += params.interarrival[(s - i) % k]
            seen.add(max(Fraction(0), params.service[(s - i) % k] - total))
        residuals[label] = tuple(sorted(seen))

    report = LossReport(
        step=lattice.step,
        in_service_candidates=candidates,
        candidate_horizon=horizon,
        shared_horizon=shared,
        residual_workloads=residuals,
    )
    if start_values is None:
        start = RandomSet.full(system, lattice)
    else:
        start = _start_family(system, lattice, start_values)
    return LossModel(system, params, lattice, map, start, report)


def lower_envelope(system: FiniteCyclicSystem, params: ImpatienceParams) -> dict[str, Fraction]:
    """Least stationary workload of the minorizing monotone map, in closed
    form: the clamped best of service-capped-by-patience minus cumulated
    gaps over the past."""
    heights = tuple(min(s, d) for s, d in zip(params.service, params.patience))
    return _envelope(system, params, heights)


def upper_envelope(system: FiniteCyclicSystem, params: ImpatienceParams) -> dict[str, Fraction]:
    """Least stationary workload of the majorizing monotone map: same scan
    with service plus patience as the height."""
    heights = tuple(s + d for s, d in zip(params.service, params.patience))
    return _envelope(system, params, heights)


def _envelope(
    system: FiniteCyclicSystem,
    params: ImpatienceParams,
    heights: tuple[Fraction, ...],
) -> dict[str, Fraction]:
    _check_period(system, params)
    k = system.period
    target = max(heights)
    out: dict[str, Fraction] = {}
    for s, label in enumerate(system.labels):
        best = Fraction(0)
        total = Fraction(0)
        i = 0
        while total < target:
            i += 1
            total += params.interarrival[(s - i) % k]
            gain = heights[(s - i) % k] - total
            if gain > best:
                best = gain
        out[label] = best
    return out


@dataclass(frozen=True)
class CardinalBounds:
    """Ceilings on the limit cardinal, each one a lattice-point count.

    The three window bounds are evaluated on the samples where the
    qualifying event holds and are certified there; `best` is their
    minimum.  `time_units` drops the lattice step from the peak bound;
    it reproduces the classical numeric instances but is not order-safe
    in general, so it is excluded from `order_safe`.  `step_counts` is the
    same peak expressed in lattice steps.  `load_based` scales the service
    step count by the mean patience-plus-gap over the mean gap.
    """

    window_peak: int
    window_service_sum: int
    peak_plus_tail: int
    peak_plus_tail_fallback: bool
    best: int
    time_units: int
    step_counts: int
    load_based: int

    def order_safe(self) -> dict[str, int]:
        return {
            "window_peak": self.window_peak,
            "window_service_sum": self.window_service_sum,
            "peak_plus_tail": self.peak_plus_tail,
            "best": self.best,
            "step_counts": self.step_counts,
            "load_based": self.load_based,
        }

    def as_dict(self) -> dict[str, int]:
        out = self.order_safe()
        out["time_units"] = self.time_units
        return out


@dataclass(frozen=True)
class LoadCheck:
    """Exact comparison of mean patience against the mean patient-window
    drain (one gap per arrival still waiting)."""

    mean_patience: Fraction
    mean_drain: Fraction
    strictly_greater: bool


@dataclass(frozen=True)
class ImpatienceReport:
    step: Fraction
    lower_envelope: dict[str, Fraction]
    upper_envelope: dict[str, Fraction]
    waiting_candidates: dict[str, tuple[int, ...]]
    last_waiting: dict[str, int]
    expiry_count: dict[str, int]
    service_candidates: dict[str, tuple[int, ...]]
    service_reach: dict[str, int]
    reach_floor: int
    waiting_floor: int
    service_steps_min: int
    service_steps_max: int
    patience_steps_max: int
    workload_ceiling: dict[str, Fraction]
    bounds: CardinalBounds
    load_check: LoadCheck


@dataclass(frozen=True)
class ImpatienceModel:
    system: FiniteCyclicSystem
    params: ImpatienceParams
    lattice: StateLattice
    map: DrivingMap
    start_sets: RandomSet
    report: ImpatienceReport

    def run(self, max_sweeps: int | None = None) -> BackwardsRun:
        return backwards_run(self.map, self.start_sets, max_sweeps)


def patience_load_check(system: FiniteCyclicSystem, params: ImpatienceParams) -> LoadCheck:
    _check_period(system, params)
    k = system.period
    mean_patience = sum(params.patience, Fraction(0)) / k
    drain = Fraction(0)
    for s in range(k):
        waiting = _window(system, params.interarrival, params.patience, s)
        drain += params.interarrival[(s - 1) % k] * len(waiting)
    mean_drain = drain / k
    return LoadCheck(
        mean_patience=mean_patience,
        mean_drain=mean_drain,
        strictly_greater=mean_patience > mean_drain,
    )


def _impatience_bounds(
    system: FiniteCyclicSystem,
    params: ImpatienceParams,
    step: Fraction,
    service_sets: dict[str, tuple[int, ...]],
    waiting_sets: dict[str, tuple[int, ...]],
    reach_floor: int,
    waiting_floor: int,
) -> CardinalBounds:
    k = system.period
    service, gaps, patience = params.service, params.interarrival, params.patience
    labels = system.labels

    def peak(s: int, depth: int, values: tuple[Fraction, ...]) -> Fraction:
        return max(values[(s - i) % k] for i in range(1, depth + 1))

    def back_sum(s: int, depth: int, values: tuple[Fraction, ...]) -> Fraction:
        return sum((values[(s - j) % k] for j in range(1, depth + 1)), Fraction(0))

    reach = {label: (max(v) if v else 0) for label, v in service_sets.items()}
    waiting_depth = {label: (max(v) if v else 0) for label, v in waiting_sets.items()}
    blend = tuple(max(s_, d_) for s_, d_ in zip(service, patience))

    on_reach = [s for s, label in enumerate(labels) if reach[label] <= reach_floor]
    window_peak = min(
        floor(peak(s, reach_floor, blend) / step) + 1 for s in on_reach
    )
    window_service_sum = min(
        floor(back_sum(s, reach_floor, service) / step) + 1 for s in on_reach
    )

    on_waiting = [s for s, label in enumerate(labels) if waiting_depth[label] <= waiting_floor]
    joint = [s for s in on_reach if s in set(on_waiting)]
    if joint:
        fallback = False
        peak_plus_tail = min(
            floor(
                (peak(s, reach_floor, service) + back_sum(s, waiting_floor, service)) / step
            )
            + 1
            for s in joint
        )
    else:
        # The joint qualifying event can be empty on a finite base; fall
        # back to peaking over the actual service-candidate indices, which
        # is what the combined argument really uses.
        fallback = True
        peak_plus_tail = min(
            floor(
                (
                    max(
                        (service[(s - i) % k] for i in service_sets[labels[s]]),
                        default=Fraction(0),
                    )
                    + back_sum(s, waiting_floor, service)
                )
                / step
            )
            + 1
            for s in on_waiting
        )

    best = min(window_peak, window_service_sum, peak_plus_tail)
    max_service = max(service)
    max_patience = max(patience)
    time_units = floor(max(max_service, max_patience)) + 1
    service_steps_max = ceil(max_service / step)
    patience_steps_max = ceil(max_patience / step)
    step_counts = max(service_steps_max, patience_steps_max) + 1

    mean_gap = sum(gaps, Fraction(0)) / k
    mean_patience = sum(patience, Fraction(0)) / k
    # The product form degenerates to 0 when every service vanishes, yet the
    # limit family is never empty, so 1 is always a sound ceiling.
    load_based = max(ceil(service_steps_max * (mean_patience + mean_gap) / mean_gap), 1)

    return CardinalBounds(
        window_peak=window_peak,
        window_service_sum=window_service_sum,
        peak_plus_tail=peak_plus_tail,
        peak_plus_tail_fallback=fallback,
        best=best,
        time_units=time_units,
        step_counts=step_counts,
        load_based=load_based,
    )


def build_impatience(
    system: FiniteCyclicSystem,
    params: ImpatienceParams,
    x_max: Rational | None = None,
    start_values: Mapping[str, Iterable[Rational]] | None = None,
    step: Rational | None = None,
) -> ImpatienceModel:
    """Assemble the impatience model.

    The default bound max(service+patience) is closed under the map.  The
    default start family is the lattice slice between the two monotone
    envelopes, which the map provably keeps stable; pass `start_values` to
    override (the override is still checked for stability downstream).
    """
    _check_period(system, params)
    grid = lattice_step(params) if step is None else as_fraction(step)
    bound = (
        max(s + d for s, d in zip(params.service, params.patience))
        if x_max is None
        else as_fraction(x_max)
    )
    lattice = StateLattice(grid, bound)

    by_label = {
        label: (params.service[s], params.interarrival[s], params.patience[s])
        for s, label in enumerate(system.labels)
    }

    def rule(label: str, x: Fraction) -> Fraction:
        svc, gap, budget = by_label[label]
        load = x + svc if x <= budget else x
        return max(Fraction(0), load - gap)

    map = DrivingMap.from_function(system, lattice, rule)

    k = system.period
    lower = lower_envelope(system, params)
    upper = upper_envelope(system, params)

    waiting: dict[str, tuple[int, ...]] = {}
    serving: dict[str, tuple[int, ...]] = {}
    expiry: dict[str, int] = {}
    ceiling: dict[str, Fraction] = {}
    combined = tuple(s + d for s, d in zip(params.service, params.patience))
    for s, label in enumerate(system.labels):
        waiting[label] = _window(system, params.interarrival, params.patience, s)
        serving[label] = _window(system, params.interarrival, combined, s)
        total = Fraction(0)
        steps = 0
        while True:
            total += params.interarrival[(s + steps) % k]
            steps += 1
            if total >= params.patience[s]:
                break
        expiry[label] = steps
        reach = max(serving[label]) if serving[label] else 0
        ceiling[label] = params.service[(s - reach) % k] + sum(
            (params.service[(s - j) % k] for j in waiting[label]), Fraction(0)
        )

    last_waiting = {label: (max(v) if v else 0) for label, v in waiting.items()}
    service_reach = {label: (max(v) if v else 0) for label, v in serving.items()}
    reach_floor = max(1, min(service_reach.values()))
    waiting_floor = max(1, min(last_waiting.values()))

    bounds = _impatience_bounds(
        system, params, lattice.step, serving, waiting, reach_floor, waiting_floor
    )

    report = ImpatienceReport(
        step=lattice.step,
        lower_envelope=lower,
        upper_envelope=upper,
        waiting_candidates=waiting,
        last_waiting=last_waiting,
        expiry_count=expiry,
        service_candidates=serving,
        service_reach=service_reach,
        reach_floor=reach_floor,
        waiting_floor=waiting_floor,
        service_steps_min=ceil(min(params.service) / lattice.step),
        service_steps_max=ceil(max(params.service) / lattice.step),
        patience_steps_max=ceil(max(params.patience) / lattice.step),
        workload_ceiling=ceiling,
        bounds=bounds,
        load_check=patience_load_check(system, params),
    )

    if start_values is None:
        start = RandomSet.intervals(
            system,
            lattice,
            [lower[label] for label in system.labels],
            [upper[label] for label in system.labels],
        )
    else:
        start = _start_family(system, lattice, start_values)
    return ImpatienceModel(system, params, lattice, map, start, report)


@dataclass(frozen=True)
class ComparisonMaps:
    """The impatience map flanked by its two monotone envelopes.

    All three live on a refined lattice whose step also divides every
    patience value, because the envelope thresholds service-capped-by-
    patience and service-plus-patience fall off the workload grid.
    """

    lattice: StateLattice
    lower: DrivingMap
    exact: DrivingMap
    upper: DrivingMap


def comparison_maps(
    system: FiniteCyclicSystem,
    params: ImpatienceParams,
    x_max: Rational | None = None,
) -> ComparisonMaps:
    _check_period(system, params)
    grid = fraction_gcd((lattice_step(params),) + params.patience)
    bound = (
        max(s + d for s, d in zip(params.service, params.patience))
        if x_max is None
        else as_fraction(x_max)
    )
    lattice = StateLattice(grid, bound)

    by_label = {
        label: (params.service[s], params.interarrival[s], params.patience[s])
        for s, label in enumerate(system.labels)
    }

    def lower_rule(label: str, x: Fraction) -> Fraction:
        svc, gap, budget = by_label[label]
        return max(Fraction(0), max(x, min(svc, budget)) - gap)

    def exact_rule(label: str, x: Fraction) -> Fraction:
        svc, gap, budget = by_label[label]
        load = x + svc if x <= budget else x
        return max(Fraction(0), load - gap)

    def upper_rule(label: str, x: Fraction) -> Fraction:
        svc, gap, budget = by_label[label]
        return max(Fraction(0), max(x, svc + budget) - gap)

    return ComparisonMaps(
        lattice=lattice,
        lower=DrivingMap.from_function(system, lattice, lower_rule),
        exact=DrivingMap.from_function(system, lattice, exact_rule),
        upper=DrivingMap.from_function(system, lattice, upper_rule),
    )


@dataclass(frozen=True)
class IndexSchemeRun:
    """Backwards limit computed on arrival indices instead of workloads.

    The index state counts how many arrivals ago the customer now in
    service entered an empty system (0 when the server is idle); one
    arrival later the index advances by one if that customer is still
    present, else it drops to 0.  Projecting an index i through the
    workload recursion started at 0 exactly i steps back must cover the
    workload limit sample by sample.
    """

    index_lattice: StateLattice
    index_map: DrivingMap
    index_run: BackwardsRun
    workload_run: BackwardsRun
    projection: dict[str, dict[int, Fraction]]
    surjective: dict[str, bool]
    all_surjective: bool


def index_scheme_compare(model: LossModel, max_sweeps: int | None = None) -> IndexSchemeRun:
    workload_run = model.run(max_sweeps)
    system = model.system
    k = system.period
    horizon = model.report.candidate_horizon
    deepest = max(horizon.values())
    index_lattice = StateLattice(Fraction(1), Fraction(deepest + 1))

    tables = []
    for s, label in enumerate(system.labels):
        ahead = set(model.report.in_service_candidates[system.labels[(s + 1) % k]])
        tables.append(
            tuple(
                i + 1 if (i + 1) in ahead else 0
                for i in range(index_lattice.size)
            )
        )
    index_map = DrivingMap(system, index_lattice, tables)
    index_run = backwards_run(index_map, RandomSet.full(system, index_lattice), max_sweeps)

    projection: dict[str, dict[int, Fraction]] = {}
    surjective: dict[str, bool] = {}
    for s, label in enumerate(system.labels):
        values = {
            int(index_lattice.value(i)): model.map.backward_value(
                label, 0, int(index_lattice.value(i))
            )
            for i in index_run.limit[s]
        }
        projection[label] = values
        surjective[label] = frozenset(values.values()) == frozenset(
            workload_run.limit_values(label)
        )
    return IndexSchemeRun(
        index_lattice=index_lattice,
        index_map=index_map,
        index_run=index_run,
        workload_run=workload_run,
        projection=projection,
        surjective=surjective,
        all_surjective=all(surjective.values()),
    )
