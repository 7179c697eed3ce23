"""Shared builders for the suite: the four pinned systems and generators
for randomized structural sweeps."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from backscheme import (
    DrivingMap,
    FiniteCyclicSystem,
    ImpatienceParams,
    LossParams,
    RandomSet,
    StateLattice,
    build_impatience,
    build_loss,
)


@pytest.fixture
def loss_one() -> tuple:
    system = FiniteCyclicSystem.of_size(2)
    params = LossParams(service=("1", "5.5"), interarrival=("1", "1"))
    return system, params, build_loss(system, params)


@pytest.fixture
def loss_two() -> tuple:
    system = FiniteCyclicSystem.of_size(2)
    params = LossParams(service=("1.2", "1.7"), interarrival=("1", "1"))
    return system, params, build_loss(system, params)


@pytest.fixture
def impatience_one() -> tuple:
    system = FiniteCyclicSystem.of_size(2)
    params = ImpatienceParams(
        service=("0.5", "1.5"), interarrival=("1", "1"), patience=("1.51", "2.01")
    )
    return system, params, build_impatience(system, params)


@pytest.fixture
def impatience_two() -> tuple:
    system = FiniteCyclicSystem.of_size(2)
    params = ImpatienceParams(
        service=("3", "2"), interarrival=("1", "1"), patience=("3.01", "1.99")
    )
    return system, params, build_impatience(system, params)


def random_abstract_map(rng: random.Random, monotone: bool) -> DrivingMap:
    """Arbitrary lattice self-maps, optionally forced nondecreasing."""
    k = rng.randint(1, 4)
    size = rng.randint(2, 40)
    step = Fraction(1, rng.choice((1, 2, 3, 4)))
    system = FiniteCyclicSystem.of_size(k)
    lattice = StateLattice(step, step * (size - 1))
    tables = []
    for _ in range(k):
        if monotone:
            row = sorted(rng.randrange(size) for _ in range(size))
        else:
            row = [rng.randrange(size) for _ in range(size)]
        tables.append(tuple(row))
    return DrivingMap(system, lattice, tuple(tables))


def stable_start_sets(rng: random.Random, map: DrivingMap) -> RandomSet:
    """Either the full lattice or the forward closure of random seeds; both
    are stable under the map by construction."""
    system, lattice = map.system, map.lattice
    if rng.random() < 0.3:
        return RandomSet.full(system, lattice)
    k = system.period
    sets = [set() for _ in range(k)]
    for s in range(k):
        for _ in range(rng.randint(1, max(2, lattice.size // 4))):
            sets[s].add(rng.randrange(lattice.size))
    changed = True
    while changed:
        changed = False
        for s in range(k):
            pushed = map.image(s, frozenset(sets[s]))
            target = sets[(s + 1) % k]
            if not pushed <= target:
                target |= pushed
                changed = True
    return RandomSet(system, lattice, tuple(frozenset(s) for s in sets))


def refine_embedding(map: DrivingMap, start_sets: RandomSet) -> tuple[DrivingMap, RandomSet]:
    """The same dynamics on a lattice of half the step: original points keep
    their images, interleaved points project down."""
    system, lattice = map.system, map.lattice
    fine = StateLattice(lattice.step / 2, lattice.bound)
    tables = []
    for row in map.tables:
        fine_row = []
        for j in range(fine.size):
            fine_row.append(2 * row[j // 2])
        tables.append(tuple(fine_row))
    fine_map = DrivingMap(system, fine, tuple(tables))
    fine_sets = RandomSet(
        system,
        fine,
        tuple(frozenset(2 * i for i in member) for member in start_sets.sets),
    )
    return fine_map, fine_sets


def random_loss_params(rng: random.Random) -> tuple[FiniteCyclicSystem, LossParams]:
    k = rng.randint(1, 4)
    denom = rng.choice((1, 2, 4))
    service = tuple(Fraction(rng.randint(0, 12), denom) for _ in range(k))
    gaps = tuple(Fraction(rng.randint(1, 8), denom) for _ in range(k))
    return FiniteCyclicSystem.of_size(k), LossParams(service, gaps)


def random_impatience_params(rng: random.Random) -> tuple[FiniteCyclicSystem, ImpatienceParams]:
    k = rng.randint(1, 4)
    denom = rng.choice((1, 2, 4))
    service = tuple(Fraction(rng.randint(0, 10), denom) for _ in range(k))
    gaps = tuple(Fraction(rng.randint(1, 8), denom) for _ in range(k))
    patience = tuple(
        Fraction(rng.randint(0, 10 * denom), denom)
        + (Fraction(1, 100) if rng.random() < 0.5 else Fraction(0))
        for _ in range(k)
    )
    return FiniteCyclicSystem.of_size(k), ImpatienceParams(service, gaps, patience)
