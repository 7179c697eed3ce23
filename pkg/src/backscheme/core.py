"""Finite cyclic probability bases, exact lattice state spaces, driving maps.

States are integer multiples of a fixed rational step.  Internally every
computation works on integer lattice indices, so set operations downstream
can rely on exact equality; the public API speaks `fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, gcd
from typing import Callable, Iterable, Sequence, Union

Rational = Union[int, str, Fraction]


class ModelError(ValueError):
    """A model definition is structurally unusable (step, closure, labels)."""


class StartSetError(ModelError):
    """A start family is unusable: empty, off-lattice, or not map-stable."""


class NotStabilizedError(RuntimeError):
    """The requested operation needs a stabilized backwards run."""


def as_fraction(value: Rational) -> Fraction:
    """Convert to an exact rational.  Binary floats are refused outright."""
    if isinstance(value, bool) or isinstance(value, float):
        raise ModelError(
            f"refusing inexact value {value!r}; pass an int, a decimal string or a Fraction"
        )
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ModelError(f"not a rational number: {value!r}") from exc


def fraction_gcd(values: Iterable[Rational]) -> Fraction:
    """Greatest common divisor of a family of rationals (gcd(0, x) = x)."""
    result = Fraction(0)
    for raw in values:
        v = abs(as_fraction(raw))
        num = gcd(result.numerator * v.denominator, v.numerator * result.denominator)
        result = Fraction(num, result.denominator * v.denominator)
    return result


def format_exact(q: Fraction) -> str:
    """Render a rational without loss: terminating decimal if one exists, else n/d."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    digits = max(twos, fives)
    scaled = abs(q.numerator) * 10**digits // q.denominator
    whole, frac = divmod(scaled, 10**digits)
    sign = "-" if q < 0 else ""
    return f"{sign}{whole}.{str(frac).zfill(digits)}"


@dataclass(frozen=True)
class FiniteCyclicSystem:
    """Uniform probability on finitely many samples with the cyclic shift.

    The shift sends sample i to sample i+1 (mod k); its inverse steps
    backwards.  Every sample carries probability 1/k, which makes the
    system ergodic with period k.
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ModelError("a cyclic system needs at least one sample")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("sample labels must be distinct")

    @classmethod
    def of_size(cls, k: int) -> "FiniteCyclicSystem":
        if k < 1:
            raise ModelError("system size must be positive")
        return cls(tuple(f"s{i + 1}" for i in range(k)))

    @property
    def period(self) -> int:
        return len(self.labels)

    @property
    def probability(self) -> Fraction:
        return Fraction(1, self.period)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"unknown sample label {label!r}") from None

    def shift(self, label: str, n: int = 1) -> str:
        """Sample reached from `label` after n shift steps (n may be negative)."""
        return self.labels[(self.index_of(label) + n) % self.period]


@dataclass(frozen=True)
class StateLattice:
    """States {0, step, 2*step, ...} up to a bound, kept exact."""

    step: Fraction
    bound: Fraction

    def __post_init__(self) -> None:
        step = as_fraction(self.step)
        bound = as_fraction(self.bound)
        if step <= 0:
            raise ModelError(f"lattice step must be positive, got {step}")
        if bound < 0:
            raise ModelError(f"lattice bound must be nonnegative, got {bound}")
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "bound", bound)

    @property
    def size(self) -> int:
        return floor(self.bound / self.step) + 1

    def value(self, index: int) -> Fraction:
        if not 0 <= index < self.size:
            raise ModelError(f"lattice index {index} out of range [0, {self.size})")
        return index * self.step

    def index_of(self, value: Rational) -> int:
        v = as_fraction(value)
        q = v / self.step
        if q.denominator != 1 or not 0 <= q <= (self.size - 1):
            raise ModelError(
                f"value {format_exact(v)} is not a lattice state "
                f"(step {format_exact(self.step)}, bound {format_exact(self.bound)})"
            )
        return int(q)

    def contains(self, value: Rational) -> bool:
        v = as_fraction(value)
        q = v / self.step
        return q.denominator == 1 and 0 <= q <= (self.size - 1)

    def values(self) -> tuple[Fraction, ...]:
        return tuple(i * self.step for i in range(self.size))

    @property
    def top(self) -> Fraction:
        return (self.size - 1) * self.step


class DrivingMap:
    """One total map per sample on a shared lattice, stored as index tables.

    Closure is checked on construction: every image must land back on the
    lattice.  An image outside [0, bound] signals a mis-sized lattice and
    raises ModelError.
    """

    __slots__ = ("system", "lattice", "tables")

    def __init__(
        self,
        system: FiniteCyclicSystem,
        lattice: StateLattice,
        tables: Sequence[Sequence[int]],
    ) -> None:
        tables = tuple(tuple(row) for row in tables)
        if len(tables) != system.period:
            raise ModelError("need exactly one transition table per sample")
        for label, row in zip(system.labels, tables):
            if len(row) != lattice.size:
                raise ModelError(f"table for sample {label!r} must cover every lattice state")
            for i, j in enumerate(row):
                if not isinstance(j, int) or not 0 <= j < lattice.size:
                    raise ModelError(
                        f"map image for sample {label!r} at state "
                        f"{format_exact(lattice.value(i))} leaves the lattice"
                    )
        self.system = system
        self.lattice = lattice
        self.tables = tables

    @classmethod
    def from_function(
        cls,
        system: FiniteCyclicSystem,
        lattice: StateLattice,
        rule: Callable[[str, Fraction], Rational],
    ) -> "DrivingMap":
        tables = []
        for label in system.labels:
            row = []
            for i in range(lattice.size):
                x = lattice.value(i)
                y = as_fraction(rule(label, x))
                if not lattice.contains(y):
                    raise ModelError(
                        f"image {format_exact(y)} of state {format_exact(x)} under sample "
                        f"{label!r} falls outside the lattice; the lattice is mis-sized"
                    )
                row.append(lattice.index_of(y))
            tables.append(tuple(row))
        return cls(system, lattice, tuple(tables))

    def evaluate(self, label: str, x: Rational) -> Fraction:
        """Apply the sample's map to a lattice state."""
        s = self.system.index_of(label)
        return self.lattice.value(self.tables[s][self.lattice.index_of(x)])

    def evaluate_index(self, sample: int, index: int) -> int:
        return self.tables[sample][index]

    def image(self, sample: int, indices: frozenset[int]) -> frozenset[int]:
        row = self.tables[sample]
        return frozenset(row[i] for i in indices)

    def backward_value(self, label: str, x: Rational, n: int) -> Fraction:
        """Value at `label` after starting from x, n shifts in the past.

        Composes the maps of the n predecessor samples, oldest first: the
        map of the sample n steps back is applied to x first, the map of
        the immediate predecessor last.
        """
        if n < 0:
            raise ModelError("backward horizon must be nonnegative")
        k = self.system.period
        start = (self.system.index_of(label) - n) % k
        cur = self.lattice.index_of(x)
        for j in range(n):
            cur = self.tables[(start + j) % k][cur]
        return self.lattice.value(cur)

    def same_shape(self, other: "DrivingMap") -> bool:
        return (
            self.system.labels == other.system.labels
            and self.lattice.step == other.lattice.step
            and self.lattice.size == other.lattice.size
        )


@dataclass(frozen=True)
class RandomSet:
    """A finite set of lattice states attached to each sample."""

    system: FiniteCyclicSystem
    lattice: StateLattice
    sets: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        if len(self.sets) != self.system.period:
            raise ModelError("need exactly one state set per sample")
        for label, s in zip(self.system.labels, self.sets):
            for i in s:
                if not isinstance(i, int) or not 0 <= i < self.lattice.size:
                    raise ModelError(f"state set for sample {label!r} leaves the lattice")

    @classmethod
    def from_values(
        cls,
        system: FiniteCyclicSystem,
        lattice: StateLattice,
        families: Sequence[Iterable[Rational]],
    ) -> "RandomSet":
        if len(families) != system.period:
            raise ModelError("need exactly one value family per sample")
        sets = tuple(frozenset(lattice.index_of(v) for v in family) for family in families)
        return cls(system, lattice, sets)

    @classmethod
    def full(cls, system: FiniteCyclicSystem, lattice: StateLattice) -> "RandomSet":
        everything = frozenset(range(lattice.size))
        return cls(system, lattice, tuple(everything for _ in system.labels))

    @classmethod
    def intervals(
        cls,
        system: FiniteCyclicSystem,
        lattice: StateLattice,
        lower: Sequence[Rational],
        upper: Sequence[Rational],
    ) -> "RandomSet":
        """Lattice states inside [lower, upper], one interval per sample."""
        if len(lower) != system.period or len(upper) != system.period:
            raise ModelError("interval bounds must list one value per sample")
        sets = []
        for lo_raw, hi_raw in zip(lower, upper):
            lo, hi = as_fraction(lo_raw), as_fraction(hi_raw)
            first = max(0, ceil(lo / lattice.step))
            last = min(lattice.size - 1, floor(hi / lattice.step))
            sets.append(frozenset(range(first, last + 1)))
        return cls(system, lattice, tuple(sets))

    def values(self, label: str) -> tuple[Fraction, ...]:
        s = self.system.index_of(label)
        return tuple(self.lattice.value(i) for i in sorted(self.sets[s]))

    def max_size(self) -> int:
        return max((len(s) for s in self.sets), default=0)

    def nonempty(self) -> bool:
        return all(self.sets)
