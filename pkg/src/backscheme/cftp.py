"""Perfect sampling of the stationary workload when the drivers are drawn
independently at every arrival.

Coupling from the past: run the recursion from every lattice start over a
window reaching n steps into the past, and double n until all starts merge
into one value at time 0.  Noise drawn for a time index is kept and reused
when the window grows, which is what makes the merged value a sample of
the stationary law rather than of something horizon-dependent.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Mapping

from .core import ModelError, Rational, as_fraction, fraction_gcd

Table = tuple[tuple[Fraction, Fraction], ...]


def _normalize(table: Mapping[Rational, Rational], name: str, positive: bool) -> Table:
    if not table:
        raise ModelError(f"{name} distribution needs at least one value")
    rows = []
    total = Fraction(0)
    for raw_value, raw_weight in table.items():
        value = as_fraction(raw_value)
        weight = as_fraction(raw_weight)
        if weight <= 0:
            raise ModelError(f"{name} weights must be positive")
        if value < 0 or (positive and value == 0):
            bound = "positive" if positive else "nonnegative"
            raise ModelError(f"{name} values must be {bound}")
        rows.append((value, weight))
        total += weight
    rows.sort(key=lambda vw: vw[0])
    return tuple((value, weight / total) for value, weight in rows)


@dataclass(frozen=True)
class CftpConfig:
    """Bounded-support distributions for service, gap and patience values.

    Support is finite by construction, so the start set of every window is
    the full lattice up to max service plus max patience.
    """

    service: Table
    interarrival: Table
    patience: Table
    horizon_cap: int = 1 << 20

    @classmethod
    def from_tables(
        cls,
        service: Mapping[Rational, Rational],
        interarrival: Mapping[Rational, Rational],
        patience: Mapping[Rational, Rational] | None = None,
        horizon_cap: int = 1 << 20,
    ) -> "CftpConfig":
        if horizon_cap < 1:
            raise ModelError("horizon cap must be positive")
        return cls(
            service=_normalize(service, "service", positive=False),
            interarrival=_normalize(interarrival, "interarrival", positive=True),
            patience=_normalize(patience or {0: 1}, "patience", positive=False),
            horizon_cap=horizon_cap,
        )

    @property
    def step(self) -> Fraction:
        return fraction_gcd(
            tuple(v for v, _ in self.service) + tuple(v for v, _ in self.interarrival)
        )

    @property
    def top_value(self) -> Fraction:
        return max(v for v, _ in self.service) + max(v for v, _ in self.patience)

    def stability_warning(self) -> bool:
        """True when no service value undercuts any gap value, so merging to
        an empty system is never observed and coupling may stall."""
        smallest_service = min(v for v, _ in self.service)
        largest_gap = max(v for v, _ in self.interarrival)
        return not smallest_service < largest_gap


def _draw(rng: random.Random, table: Table) -> Fraction:
    # Degenerate tables consume no randomness.
    if len(table) == 1:
        return table[0][0]
    r = rng.random()
    total = Fraction(0)
    for value, weight in table:
        total += weight
        if r < total:
            return value
    return table[-1][0]


@dataclass(frozen=True)
class _StepUnits:
    """One time slot of noise in lattice steps: service increment, patience
    threshold index, gap decrement."""

    add: int
    threshold: int
    drop: int


def _draw_units(rng: random.Random, config: CftpConfig, step: Fraction) -> _StepUnits:
    service = _draw(rng, config.service)
    patience = _draw(rng, config.patience)
    gap = _draw(rng, config.interarrival)
    return _StepUnits(
        add=int(service / step),
        threshold=floor(patience / step),
        drop=int(gap / step),
    )


def _apply(units: _StepUnits, index: int) -> int:
    load = index + units.add if index <= units.threshold else index
    return max(0, load - units.drop)


@dataclass(frozen=True)
class CftpSample:
    value: Fraction | None
    coupled: bool
    horizon: int

    def __bool__(self) -> bool:
        return self.coupled


def cftp_sample(config: CftpConfig, seed: int) -> CftpSample:
    """One exact draw: doubles the window until every start merges.

    Returns an uncoupled sample (value None) once the window would pass the
    configured cap; that is a diagnosis of slow merging, not an exception.
    """
    rng = random.Random(seed)
    step = config.step
    top_index = floor(config.top_value / step)
    start = tuple(range(top_index + 1))
    noise: list[_StepUnits] = []
    horizon = 1
    while horizon <= config.horizon_cap:
        while len(noise) < horizon:
            noise.append(_draw_units(rng, config, step))
        states: set[int] = set(start)
        # noise[t-1] belongs to the slot t steps before time 0; apply oldest first.
        for t in range(horizon, 0, -1):
            units = noise[t - 1]
            states = {_apply(units, i) for i in states}
        if len(states) == 1:
            value = next(iter(states)) * step
            return CftpSample(value=value, coupled=True, horizon=horizon)
        horizon *= 2
    return CftpSample(value=None, coupled=False, horizon=horizon // 2)


@dataclass(frozen=True)
class CftpEstimate:
    replications: int
    coupled: int
    counts: dict[Fraction, int]
    max_horizon: int
    stability_warning: bool

    def distribution(self) -> dict[Fraction, Fraction]:
        """Empirical law over the coupled replications, exact rationals."""
        if self.coupled == 0:
            return {}
        return {
            value: Fraction(n, self.coupled) for value, n in sorted(self.counts.items())
        }


def _replicate(payload: tuple[CftpConfig, int]) -> CftpSample:
    config, seed = payload
    return cftp_sample(config, seed)


def cftp_estimate(
    config: CftpConfig,
    replications: int,
    seed: int = 0,
    jobs: int = 1,
) -> CftpEstimate:
    """Aggregate independent replications into an empirical distribution.

    Replication seeds are derived from the root seed up front, so the result
    does not depend on the number of workers.
    """
    if replications < 1:
        raise ModelError("need at least one replication")
    root = random.Random(seed)
    seeds = [root.getrandbits(64) for _ in range(replications)]
    if jobs > 1:
        chunk = max(1, replications // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            samples = list(
                pool.map(_replicate, [(config, s) for s in seeds], chunksize=chunk)
            )
    else:
        samples = [cftp_sample(config, s) for s in seeds]

    counts: dict[Fraction, int] = {}
    coupled = 0
    max_horizon = 0
    for sample in samples:
        max_horizon = max(max_horizon, sample.horizon)
        if sample.coupled:
            coupled += 1
            assert sample.value is not None
            counts[sample.value] = counts.get(sample.value, 0) + 1
    return CftpEstimate(
        replications=replications,
        coupled=coupled,
        counts=counts,
        max_horizon=max_horizon,
        stability_warning=config.stability_warning(),
    )


def _fast_rows(table: Table, units) -> int | tuple[list[float], list[int]]:
    # Singleton short-circuit mirrors _draw: no randomness consumed.
    if len(table) == 1:
        return units(table[0][0])
    cuts: list[float] = []
    outs: list[int] = []
    total = Fraction(0)
    for value, weight in table:
        total += weight
        cuts.append(float(total))
        outs.append(units(value))
    cuts[-1] = 1.0
    return cuts, outs


def forward_simulate(config: CftpConfig, steps: int, seed: int = 0) -> dict[Fraction, Fraction]:
    """Long forward run from an empty system; occupation frequencies of the
    visited workloads.  Independent of the backwards machinery, which makes
    it a usable cross-check for cftp_estimate."""
    if steps < 1:
        raise ModelError("need at least one step")
    rng = random.Random(seed)
    rand = rng.random
    step = config.step
    # Precomputed float cut points keep the per-step cost flat; the sampled
    # units and the returned frequencies stay exact.
    adds = _fast_rows(config.service, lambda v: int(v / step))
    thresholds = _fast_rows(config.patience, lambda v: floor(v / step))
    drops = _fast_rows(config.interarrival, lambda v: int(v / step))
    index = 0
    counts: dict[int, int] = {}
    for _ in range(steps):
        if isinstance(adds, int):
            add = adds
        else:
            cuts, outs = adds
            add = outs[bisect_right(cuts, rand())]
        if isinstance(thresholds, int):
            threshold = thresholds
        else:
            cuts, outs = thresholds
            threshold = outs[bisect_right(cuts, rand())]
        if isinstance(drops, int):
            drop = drops
        else:
            cuts, outs = drops
            drop = outs[bisect_right(cuts, rand())]
        load = index + add if index <= threshold else index
        index = load - drop if load > drop else 0
        counts[index] = counts.get(index, 0) + 1
    return {i * step: Fraction(n, steps) for i, n in sorted(counts.items())}


def ks_distance(
    first: Mapping[Fraction, Fraction],
    second: Mapping[Fraction, Fraction],
) -> Fraction:
    """Kolmogorov-Smirnov distance between two finitely supported laws,
    computed exactly."""
    support = sorted(set(first) | set(second))
    gap = Fraction(0)
    cum_first = Fraction(0)
    cum_second = Fraction(0)
    for value in support:
        cum_first += first.get(value, Fraction(0))
        cum_second += second.get(value, Fraction(0))
        gap = max(gap, abs(cum_first - cum_second))
    return gap
