"""Set-valued backwards iteration over a finite cyclic base.

Starting from a map-stable family of state sets, each sweep replaces the
set at a sample by the image of the set at its predecessor.  The families
decrease, so they settle on a limit family; when the per-sample maps act
bijectively between consecutive limit sets, the limit carries a natural
uniform measure on its graph, a permutation describing one full period,
and an enumeration of invariant sub-families and pointwise solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import (
    DrivingMap,
    FiniteCyclicSystem,
    NotStabilizedError,
    RandomSet,
    StartSetError,
    StateLattice,
    format_exact,
)

SetFamily = tuple[frozenset[int], ...]


@dataclass
class BackwardsRun:
    """Outcome of the backwards iteration.

    `history[n-1]` holds the family after n sweeps; `limit` is the settled
    family (equal to the last history entry once stabilized).  `settle_index`
    is the first sweep count whose successor family repeats it exactly.
    `cardinal` is the common limit-set size, or None when the sizes differ
    or the run did not stabilize.
    """

    map: DrivingMap
    start_sets: RandomSet
    history: list[SetFamily]
    limit: SetFamily
    stabilized: bool
    settle_index: int | None
    cardinal: int | None
    cardinal_constant: bool
    bijective: bool
    max_sweeps: int

    @property
    def system(self) -> FiniteCyclicSystem:
        return self.map.system

    @property
    def lattice(self) -> StateLattice:
        return self.map.lattice

    def limit_values(self, label: str) -> tuple[Fraction, ...]:
        s = self.system.index_of(label)
        return tuple(self.lattice.value(i) for i in sorted(self.limit[s]))

    def history_values(self, sweep: int, label: str) -> tuple[Fraction, ...]:
        """Family after `sweep` sweeps (1-based) at the given sample."""
        if not 1 <= sweep <= len(self.history):
            raise ValueError(f"no recorded sweep {sweep}")
        s = self.system.index_of(label)
        return tuple(self.lattice.value(i) for i in sorted(self.history[sweep - 1][s]))


def _sweep(map: DrivingMap, family: SetFamily) -> SetFamily:
    k = map.system.period
    return tuple(map.image((s - 1) % k, family[(s - 1) % k]) for s in range(k))


def backwards_run(
    map: DrivingMap,
    start_sets: RandomSet,
    max_sweeps: int | None = None,
) -> BackwardsRun:
    """Iterate predecessor images of `start_sets` until the family repeats.

    The start family must be nonempty at every sample and stable under the
    map (the image of each sample's set must sit inside the successor's
    set); otherwise the decreasing property is lost and StartSetError is
    raised.  A full sweep without change is a valid stopping rule: the next
    family is a pointwise image of the current one, so a fixed sweep stays
    fixed forever.
    """
    system, lattice = map.system, map.lattice
    if start_sets.system.labels != system.labels or (
        start_sets.lattice.step != lattice.step or start_sets.lattice.size != lattice.size
    ):
        raise StartSetError("start sets must live on the map's system and lattice")
    if not start_sets.nonempty():
        raise StartSetError("every sample needs a nonempty start set")

    k = system.period
    family: SetFamily = start_sets.sets
    for s in range(k):
        img = map.image(s, family[s])
        if not img <= family[(s + 1) % k]:
            stray = sorted(img - family[(s + 1) % k])[0]
            raise StartSetError(
                f"start sets are not stable under the map: sample {system.labels[s]!r} "
                f"sends a start state to {format_exact(lattice.value(stray))}, outside the "
                f"start set of sample {system.labels[(s + 1) % k]!r}"
            )

    if max_sweeps is None:
        max_sweeps = 10 * (k + start_sets.max_size())
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be positive")

    history: list[SetFamily] = []
    current = family
    stabilized = False
    settle_index: int | None = None
    for sweep_count in range(max_sweeps):
        nxt = _sweep(map, current)
        for s in range(k):
            assert nxt[s] <= current[s], "sweep must shrink each sample's set"
        if nxt == current:
            stabilized = True
            settle_index = sweep_count
            break
        history.append(nxt)
        current = nxt

    limit = current
    cards = tuple(len(s) for s in limit)
    cardinal_constant = stabilized and len(set(cards)) == 1
    cardinal = cards[0] if cardinal_constant else None
    bijective = stabilized and _bijective_between_limits(map, limit)
    return BackwardsRun(
        map=map,
        start_sets=start_sets,
        history=history,
        limit=limit,
        stabilized=stabilized,
        settle_index=settle_index,
        cardinal=cardinal,
        cardinal_constant=cardinal_constant,
        bijective=bijective,
        max_sweeps=max_sweeps,
    )


def _bijective_between_limits(map: DrivingMap, limit: SetFamily) -> bool:
    k = map.system.period
    for s in range(k):
        image = map.image(s, limit[s])
        if len(image) != len(limit[s]) or image != limit[(s + 1) % k]:
            return False
    return True


@dataclass(frozen=True)
class StructureReport:
    cardinal: int
    per_sample_cards: tuple[int, ...]
    bijective: bool


def verify_structure(run: BackwardsRun) -> StructureReport:
    """Check that the limit family has one constant cardinal and that each
    sample's map restricts to a bijection onto the successor's limit set."""
    if not run.stabilized:
        raise NotStabilizedError("backwards run did not stabilize; structure is undefined")
    cards = tuple(len(s) for s in run.limit)
    if any(c == 0 for c in cards):
        raise RuntimeError("internal error: stabilized limit family has an empty set")
    if len(set(cards)) != 1:
        raise RuntimeError(f"internal error: limit cardinals differ per sample: {cards}")
    if not _bijective_between_limits(run.map, run.limit):
        raise RuntimeError("internal error: map is not bijective between limit sets")
    return StructureReport(cardinal=cards[0], per_sample_cards=cards, bijective=True)


@dataclass(frozen=True)
class ExtensionMeasure:
    """Uniform probability on the graph {(sample, state): state in limit set}.

    Every atom weighs 1/(k*c).  The skew shift (sample, x) -> (next sample,
    map(x)) permutes the atoms, so the measure is invariant, and each
    sample's fibre adds up to the base probability 1/k.
    """

    run: BackwardsRun
    atoms: tuple[tuple[str, Fraction], ...]
    atom_weight: Fraction
    shift_invariant: bool
    marginal_uniform: bool


def extension_measure(run: BackwardsRun) -> ExtensionMeasure:
    structure = verify_structure(run)
    system, lattice = run.system, run.lattice
    k, c = system.period, structure.cardinal
    weight = Fraction(1, k * c)
    atoms = tuple(
        (system.labels[s], lattice.value(i))
        for s in range(k)
        for i in sorted(run.limit[s])
    )

    atom_set = set(atoms)
    pushed = set()
    for s in range(k):
        label_next = system.labels[(s + 1) % k]
        for i in run.limit[s]:
            pushed.add((label_next, lattice.value(run.map.evaluate_index(s, i))))
    shift_invariant = pushed == atom_set and len(pushed) == len(atoms)

    marginal_uniform = all(
        sum(1 for a in atoms if a[0] == label) * weight == system.probability
        for label in system.labels
    )
    if not shift_invariant or not marginal_uniform:
        raise RuntimeError("internal error: extension measure checks failed")
    return ExtensionMeasure(
        run=run,
        atoms=atoms,
        atom_weight=weight,
        shift_invariant=shift_invariant,
        marginal_uniform=marginal_uniform,
    )


@dataclass(frozen=True)
class PeriodPermutation:
    """Composition of the per-sample maps over one full period.

    Restricted to the base sample's limit set this composition is a
    permutation; its cycle structure classifies the invariant families and
    its fixed points are exactly the pointwise stationary solutions.
    """

    run: BackwardsRun
    base_label: str
    mapping: tuple[tuple[int, int], ...]
    cycles: tuple[tuple[int, ...], ...]

    def mapping_values(self) -> dict[Fraction, Fraction]:
        lat = self.run.lattice
        return {lat.value(i): lat.value(j) for i, j in self.mapping}

    def cycles_values(self) -> tuple[tuple[Fraction, ...], ...]:
        lat = self.run.lattice
        return tuple(tuple(lat.value(i) for i in cyc) for cyc in self.cycles)

    def fixed_points(self) -> tuple[int, ...]:
        return tuple(i for i, j in self.mapping if i == j)


def period_permutation(run: BackwardsRun, base_label: str | None = None) -> PeriodPermutation:
    verify_structure(run)
    system = run.system
    base = system.index_of(base_label) if base_label is not None else 0
    k = system.period
    domain = sorted(run.limit[base])
    mapping = []
    for i in domain:
        cur = i
        for j in range(k):
            cur = run.map.evaluate_index((base + j) % k, cur)
        mapping.append((i, cur))
    images = {j for _, j in mapping}
    if images != set(domain):
        raise RuntimeError("internal error: period composition is not a permutation")

    forward = dict(mapping)
    cycles = []
    seen: set[int] = set()
    for i in domain:
        if i in seen:
            continue
        cyc = [i]
        seen.add(i)
        cur = forward[i]
        while cur != i:
            cyc.append(cur)
            seen.add(cur)
            cur = forward[cur]
        cycles.append(tuple(cyc))
    return PeriodPermutation(
        run=run,
        base_label=system.labels[base],
        mapping=tuple(mapping),
        cycles=tuple(cycles),
    )


@dataclass(frozen=True)
class InvariantFamilies:
    """All sub-families closed under the dynamics, one per nonempty union of
    permutation cycles, lifted around the period.  `families` is None when
    the enumeration was truncated (large cardinal); the cycle structure is
    always reported."""

    ergodic: bool
    cycle_lengths: tuple[int, ...]
    families: tuple[dict[str, tuple[Fraction, ...]], ...] | None
    truncated: bool


# Past this cardinal the power set of cycles is summarised, not enumerated.
ENUMERATION_CARDINAL_CAP = 20
ENUMERATION_CYCLE_CAP = 12


def invariant_sets(perm: PeriodPermutation) -> InvariantFamilies:
    run = perm.run
    system, lattice = run.system, run.lattice
    k = system.period
    base = system.index_of(perm.base_label)
    cycles = perm.cycles
    ergodic = len(cycles) == 1

    cardinal = run.cardinal if run.cardinal is not None else 0
    if cardinal > ENUMERATION_CARDINAL_CAP or len(cycles) > ENUMERATION_CYCLE_CAP:
        return InvariantFamilies(
            ergodic=ergodic,
            cycle_lengths=tuple(len(c) for c in cycles),
            families=None,
            truncated=True,
        )

    families = []
    for mask in range(1, 1 << len(cycles)):
        seed = frozenset(
            i for b, cyc in enumerate(cycles) if mask >> b & 1 for i in cyc
        )
        family: dict[str, tuple[Fraction, ...]] = {}
        cur = seed
        for j in range(k):
            label = system.labels[(base + j) % k]
            family[label] = tuple(lattice.value(i) for i in sorted(cur))
            cur = run.map.image((base + j) % k, cur)
        assert cur == seed, "lifting an invariant union must close up around the period"
        families.append(family)
    return InvariantFamilies(
        ergodic=ergodic,
        cycle_lengths=tuple(len(c) for c in cycles),
        families=tuple(families),
        truncated=False,
    )


def stationary_solutions(run: BackwardsRun) -> list[dict[str, Fraction]]:
    """Pointwise solutions of state-after-shift = map(state), valued in the
    limit family: one per fixed point of the period permutation."""
    perm = period_permutation(run)
    system, lattice = run.system, run.lattice
    k = system.period
    base = system.index_of(perm.base_label)
    solutions = []
    for fix in perm.fixed_points():
        selection: dict[str, Fraction] = {}
        cur = fix
        for j in range(k):
            label = system.labels[(base + j) % k]
            selection[label] = lattice.value(cur)
            cur = run.map.evaluate_index((base + j) % k, cur)
        for label in system.labels:
            shifted = system.shift(label)
            assert run.map.evaluate(label, selection[label]) == selection[shifted]
        solutions.append(selection)
    solutions.sort(key=lambda sel: sel[system.labels[base]])
    return solutions
