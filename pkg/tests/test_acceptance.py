"""Acceptance gate: nine pinned criteria, one pass line each.

Criteria 1-4 pin the two-sample worked systems exactly (zero tolerance).
Criterion 5 sweeps randomized structural checks, 6 ties the monotone layer
to the backwards layer, 7 validates cardinal ceilings, 8 the index-scheme
comparison, 9 the perfect sampler against an independent forward oracle.
"""

import random
from fractions import Fraction

import pytest

from backscheme import (
    CftpConfig,
    FiniteCyclicSystem,
    ImpatienceParams,
    LossParams,
    RandomSet,
    backwards_run,
    build_impatience,
    build_loss,
    cftp_estimate,
    comparison_maps,
    extension_measure,
    forward_simulate,
    index_scheme_compare,
    invariant_sets,
    ks_distance,
    lower_envelope,
    loynes_solve,
    period_permutation,
    stationary_solutions,
    upper_envelope,
    verify_structure,
)
from conftest import (
    random_abstract_map,
    random_impatience_params,
    refine_embedding,
    stable_start_sets,
)


def F(x) -> Fraction:
    return Fraction(str(x))


def values(run, label):
    return tuple(map(str, run.limit_values(label)))


@pytest.fixture
def announce(capfd):
    def _announce(line: str) -> None:
        with capfd.disabled():
            print(line)

    return _announce


def two_sample(service, patience=None):
    system = FiniteCyclicSystem(("w1", "w2"))
    if patience is None:
        return system, LossParams(service=service, interarrival=("1", "1"))
    return system, ImpatienceParams(
        service=service, interarrival=("1", "1"), patience=patience
    )


def test_criterion_1_loss_closed_forms(announce):
    system, params = two_sample(("1", "5.5"))
    model = build_loss(system, params)
    run = model.run()
    assert values(run, "w1") == ("1/2", "5/2", "9/2")
    assert values(run, "w2") == ("0", "3/2", "7/2")
    # Closed form for gaps 1 and one long service y: {y-floor(y), ..., y-1}
    # every other step, and (floor(y)+1)/2 members.
    y = F("5.5")
    assert run.limit_values("w1") == tuple(y - j for j in (5, 3, 1))
    assert verify_structure(run).cardinal == 3 == (int(y) + 1) // 2
    assert stationary_solutions(run) == []
    assert invariant_sets(period_permutation(run)).ergodic
    announce("criterion 1: PASS - loss system (1, 5.5): limit sets, c=3, no solutions, ergodic")


def test_criterion_2_loss_two_solutions(announce):
    system, params = two_sample(("1.2", "1.7"))
    model = build_loss(system, params)
    run = model.run()
    assert values(run, "w1") == ("0", "7/10")
    assert values(run, "w2") == ("0", "1/5")
    assert verify_structure(run).cardinal == 2
    assert stationary_solutions(run) == [
        {"w1": F(0), "w2": F("0.2")},
        {"w1": F("0.7"), "w2": F(0)},
    ]
    announce("criterion 2: PASS - loss system (1.2, 1.7): c=2 and exactly two solutions")


def test_criterion_3_impatience_prefix_and_limit(announce):
    system, params = two_sample(("0.5", "1.5"), patience=("1.51", "2.01"))
    model = build_impatience(system, params)
    report = model.report
    assert report.lower_envelope == {"w1": F("0.5"), "w2": F(0)}
    assert report.upper_envelope == {"w1": F("2.51"), "w2": F("1.51")}
    assert model.start_sets.values("w1") == (F("0.5"), F(1), F("1.5"), F(2), F("2.5"))
    assert model.start_sets.values("w2") == (F(0), F("0.5"), F(1), F("1.5"))
    run = model.run()
    assert run.history_values(1, "w1") == (F("0.5"), F(1), F("1.5"), F(2))
    assert run.history_values(2, "w1") == (F("0.5"), F(1), F("1.5"), F(2))
    assert run.history_values(3, "w1") == (F("0.5"), F(1), F("1.5"))
    assert values(run, "w1") == ("1/2", "1", "3/2")
    assert values(run, "w2") == ("0", "1/2", "1")
    assert verify_structure(run).cardinal == 3
    assert stationary_solutions(run) == [
        {"w1": F("0.5"), "w2": F(0)},
        {"w1": F(1), "w2": F("0.5")},
        {"w1": F("1.5"), "w2": F(1)},
    ]
    assert not invariant_sets(period_permutation(run)).ergodic
    assert report.waiting_floor == 1
    assert report.reach_floor == 2
    assert report.bounds.time_units == 3
    announce("criterion 3: PASS - impatience system one: sweep prefix, c=3, three solutions")


def test_criterion_4_impatience_ergodic_no_solutions(announce):
    system, params = two_sample(("3", "2"), patience=("3.01", "1.99"))
    model = build_impatience(system, params)
    report = model.report
    assert report.lower_envelope == {"w1": F(1), "w2": F(2)}
    assert report.upper_envelope == {"w1": F("4.01"), "w2": F("5.01")}
    assert report.waiting_candidates == {"w1": (1, 2), "w2": (1, 3)}
    assert report.service_candidates == {"w1": (1, 2, 3, 4, 6), "w2": (1, 2, 3, 5)}
    assert report.waiting_floor == 2
    assert report.reach_floor == 5
    run = model.run()
    assert model.start_sets.values("w1") == (F(1), F(2), F(3), F(4))
    assert model.start_sets.values("w2") == (F(2), F(3), F(4), F(5))
    assert values(run, "w1") == ("2", "3", "4")
    assert values(run, "w2") == ("3", "4", "5")
    assert verify_structure(run).cardinal == 3
    assert stationary_solutions(run) == []
    assert invariant_sets(period_permutation(run)).ergodic
    assert report.bounds.time_units == 4
    announce("criterion 4: PASS - impatience system two: windows, c=3, ergodic, no solutions")


def test_criterion_5_randomized_structure(announce):
    rng = random.Random(20260815)
    instances = 0
    while instances < 210:
        map = random_abstract_map(rng, monotone=instances % 2 == 0)
        start = stable_start_sets(rng, map)
        run = backwards_run(map, start)
        assert run.stabilized
        k = map.system.period
        labels = map.system.labels
        lattice = map.lattice

        # Each sweep is the pointwise predecessor image and shrinks the family.
        chain = [start.sets] + run.history + [run.limit]
        for prev, cur in zip(chain, chain[1:]):
            for s in range(k):
                image = map.image((s - 1) % k, prev[(s - 1) % k])
                assert image == cur[s]
                assert cur[s] <= prev[s]

        # Spot-check sweeps against the raw backward compositions.
        depths = {1, 2, 4} | ({len(run.history)} if len(run.history) <= 60 else set())
        depths &= set(range(1, len(run.history) + 1))
        for n in depths:
            for s, label in enumerate(labels):
                composed = frozenset(
                    lattice.index_of(map.backward_value(label, lattice.value(j), n))
                    for j in start.sets[(s - n) % k]
                )
                assert composed == run.history[n - 1][s]

        structure = verify_structure(run)
        assert run.cardinal_constant
        assert structure.cardinal == len(run.limit[0]) >= 1
        assert structure.bijective
        for s in range(k):
            forward = map.image(s, run.limit[s])
            assert forward == run.limit[(s + 1) % k]
            assert len(forward) == len(run.limit[s])

        measure = extension_measure(run)
        assert measure.shift_invariant
        assert measure.marginal_uniform
        assert measure.atom_weight == Fraction(1, k * structure.cardinal)
        assert len(measure.atoms) == k * structure.cardinal

        for solution in stationary_solutions(run):
            for s, label in enumerate(labels):
                succ = labels[(s + 1) % k]
                assert map.backward_value(succ, solution[label], 1) == solution[succ]
                assert solution[label] in run.limit_values(label)

        fine_map, fine_sets = refine_embedding(map, start)
        fine_run = backwards_run(fine_map, fine_sets)
        assert fine_run.stabilized
        assert fine_run.cardinal == run.cardinal
        for label in labels:
            assert fine_run.limit_values(label) == run.limit_values(label)

        instances += 1
    assert instances >= 200
    announce(f"criterion 5: PASS - structural sweep over {instances} randomized instances")


def test_criterion_6_monotone_consistency(announce):
    for service, patience in (
        (("0.5", "1.5"), ("1.51", "2.01")),
        (("3", "2"), ("3.01", "1.99")),
    ):
        system, params = two_sample(service, patience=patience)
        trio = comparison_maps(system, params)
        lower_closed = lower_envelope(system, params)
        upper_closed = upper_envelope(system, params)
        assert loynes_solve(trio.lower).as_dict() == lower_closed
        assert loynes_solve(trio.upper).as_dict() == upper_closed

        zeros = [Fraction(0)] * system.period
        tops = [upper_closed[label] for label in system.labels]
        run = backwards_run(trio.upper, RandomSet.intervals(system, trio.lattice, zeros, tops))
        assert run.cardinal == 1
        for label in system.labels:
            assert run.limit_values(label) == (upper_closed[label],)
    announce("criterion 6: PASS - envelope fixed points match; upper map couples to its envelope")


def test_criterion_7_cardinal_bounds(announce):
    for service, patience in (
        (("0.5", "1.5"), ("1.51", "2.01")),
        (("3", "2"), ("3.01", "1.99")),
    ):
        system, params = two_sample(service, patience=patience)
        model = build_impatience(system, params)
        run = model.run()
        for name, bound in model.report.bounds.as_dict().items():
            assert run.cardinal <= bound, (name, run.cardinal, bound)

    rng = random.Random(77)
    checked = 0
    while checked < 50:
        system, params = random_impatience_params(rng)
        model = build_impatience(system, params)
        run = model.run()
        assert run.stabilized and run.cardinal is not None
        for name, bound in model.report.bounds.order_safe().items():
            assert run.cardinal <= bound, (name, run.cardinal, bound, params)
        checked += 1
    announce("criterion 7: PASS - c within every pinned bound; 50 random instances clean")


def test_criterion_8_index_scheme_surjective(announce):
    for service in (("1", "5.5"), ("1.2", "1.7")):
        system, params = two_sample(service)
        model = build_loss(system, params)
        scheme = index_scheme_compare(model)
        assert scheme.all_surjective
        assert all(scheme.surjective.values())
        run = model.run()
        for label in system.labels:
            projected = sorted(scheme.projection[label].values())
            assert tuple(projected) == run.limit_values(label)
    announce("criterion 8: PASS - index-scheme projection covers both loss limit families")


def test_criterion_9_cftp_statistics(announce):
    config = CftpConfig.from_tables(
        service={"0.5": "0.5", "1.5": "0.5"}, interarrival={"1": "1"}
    )
    batch = cftp_estimate(config, 1000, seed=20260815)
    assert batch.coupled == 1000
    law = batch.distribution()
    oracle = forward_simulate(config, 10**6, seed=5)
    assert ks_distance(law, oracle) < Fraction(5, 100)
    assert law.get(Fraction(0), Fraction(0)) > 0
    second = cftp_estimate(config, 1000, seed=918273645)
    assert second.coupled == 1000
    assert ks_distance(law, second.distribution()) < Fraction(5, 100)
    announce("criterion 9: PASS - 2000/2000 couplings; KS to forward oracle and across batches < 0.05")
