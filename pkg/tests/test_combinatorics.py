from __future__ import annotations

from collections import Counter
from fractions import Fraction
from itertools import product

import pytest

from qadr.combinatorics import (
    ResolutionAnalysis,
    RoundChain,
    ScaleExceededError,
    birthday_collision_probability,
    chain_probability,
    enumerate_structures,
    resolution_round_distribution,
    structure_probability,
)
from qadr.core import CollisionStructure, ConfigurationError


def brute_force_structure_frequencies(n: int, m: int) -> dict[CollisionStructure, Fraction]:
    """Independent oracle: tally collision structures over all m^n assignments."""
    tally: Counter[CollisionStructure] = Counter()
    for assignment in product(range(m), repeat=n):
        occupancy = Counter(assignment)
        tally[CollisionStructure.from_occupancies(occupancy.values())] += 1
    total = m**n
    return {structure: Fraction(count, total) for structure, count in tally.items()}


# -- birthday bound -------------------------------------------------------


def test_birthday_trivial_cases():
    assert birthday_collision_probability(1, 5) == 0
    assert birthday_collision_probability(2, 2) == Fraction(1, 2)


def test_birthday_5_of_10_matches_enumeration():
    p = birthday_collision_probability(5, 10)
    assert p == Fraction(6976, 10_000)
    collisions = sum(
        1 for a in product(range(10), repeat=5) if len(set(a)) < 5
    )
    assert p == Fraction(collisions, 10**5)


def test_birthday_rejects_more_choosers_than_slots():
    with pytest.raises(ConfigurationError):
        birthday_collision_probability(5, 4)


# -- single-round structure probability -----------------------------------


def test_worked_example_first_round():
    p = structure_probability((3, 1, 0, 0, 0), 5, 10)
    assert p == Fraction(63, 125)
    assert float(p) == pytest.approx(0.504, abs=1e-12)


def test_worked_example_second_round():
    p = structure_probability((2, 0), 2, 6)
    assert p == Fraction(5, 6)


def test_single_participant_single_slot():
    assert structure_probability((1,), 1, 1) == 1


def test_structure_probability_rejects_inconsistent_input():
    with pytest.raises(ConfigurationError):
        structure_probability((3,), 5, 10)  # accounts for 3 of 5 participants
    with pytest.raises(ConfigurationError):
        structure_probability((5,), 5, 4)  # 5 occupied slots of 4


def test_structure_probability_matches_brute_force_small():
    for n, m in [(2, 2), (3, 3), (4, 5), (5, 4)]:
        frequencies = brute_force_structure_frequencies(n, m)
        for structure, freq in frequencies.items():
            assert structure_probability(structure, n, m) == freq
        assert sum(frequencies.values()) == 1


def test_large_scale_falls_back_to_log_space():
    p = structure_probability((100,), 100, 1000)
    assert isinstance(p, float)
    exact_log_free = 1 - birthday_collision_probability(100, 1000)
    assert p == pytest.approx(float(exact_log_free), rel=1e-12)


# -- enumeration ----------------------------------------------------------


def test_enumeration_2_of_2():
    table = {sp.structure: sp.probability for sp in enumerate_structures(2, 2)}
    assert table == {
        CollisionStructure((2,)): Fraction(1, 2),
        CollisionStructure((0, 1)): Fraction(1, 2),
    }


def test_enumeration_total_probability_is_one():
    for n, m in [(3, 3), (5, 10), (8, 12), (6, 4)]:
        total = sum(sp.probability for sp in enumerate_structures(n, m))
        assert total == 1


def test_enumeration_full_success_matches_birthday_complement():
    table = {sp.structure: sp.probability for sp in enumerate_structures(5, 10)}
    assert table[CollisionStructure((5,))] == 1 - birthday_collision_probability(5, 10)
    assert float(table[CollisionStructure((5,))]) == pytest.approx(0.3024)


def test_enumeration_scale_guard():
    with pytest.raises(ScaleExceededError):
        enumerate_structures(13, 10)
    with pytest.raises(ScaleExceededError):
        enumerate_structures(5, 17)


# -- multi-round chains ---------------------------------------------------


def test_chain_worked_example():
    joint = chain_probability([(5, 10, (3, 1)), (2, 6, (2,))])
    assert joint == Fraction(21, 50)
    assert float(joint) == pytest.approx(0.42, abs=1e-12)


def test_chain_single_round_equals_structure_probability():
    assert chain_probability([(4, 9, (2, 1))]) == structure_probability((2, 1), 4, 9)


def test_chain_rejects_parameter_breaks():
    with pytest.raises(ConfigurationError):
        # after (3,1) at n=5, m=10 the follow-up must be n'=2, m'=6
        chain_probability([(5, 10, (3, 1)), (2, 7, (2,))])


def test_round_chain_record():
    chain = RoundChain.from_rounds([(5, 10, (3, 1)), (2, 6, (2,))])
    assert chain.joint_probability == Fraction(21, 50)
    assert chain.rounds[0][2] == CollisionStructure((3, 1))


# -- rounds-to-terminate distribution --------------------------------------


def test_resolution_single_participant():
    analysis = resolution_round_distribution(1, 3)
    assert analysis.rounds[0].p_terminate == 1
    assert analysis.unresolved_mass == 0


def test_resolution_round_one_is_birthday_complement():
    analysis = resolution_round_distribution(5, 15)
    assert analysis.p_terminate_at(1) == 1 - birthday_collision_probability(5, 15)
    assert analysis.p_terminate_at(1) == Fraction(8008, 16875)


def test_resolution_mass_conservation():
    for n, m in [(4, 8), (5, 10), (6, 12)]:
        analysis = resolution_round_distribution(n, m, max_rounds=12)
        total = sum((s.p_terminate for s in analysis.rounds), Fraction(0))
        assert total + analysis.unresolved_mass == 1


def test_resolution_detects_deadlock_at_tight_capacity():
    # Two participants, two slots: an initial collision cycles forever
    # because only one slot is ever empty for both to retry into.
    analysis = resolution_round_distribution(2, 2, max_rounds=30)
    assert analysis.p_terminate_at(1) == Fraction(1, 2)
    assert analysis.unresolved_mass == Fraction(1, 2)


def test_resolution_collision_expectations_round_one():
    # Round 1 colliding-participant expectation equals n * P(any given
    # participant collides) by symmetry: n * (1 - (1 - 1/m)^(n-1)).
    n, m = 4, 8
    analysis = resolution_round_distribution(n, m)
    expected = n * (1 - Fraction(m - 1, m) ** (n - 1))
    assert analysis.rounds[0].expected_colliding_participants == expected


def test_resolution_scale_guard():
    with pytest.raises(ScaleExceededError):
        resolution_round_distribution(11, 33)


def test_mean_rounds_reasonable():
    analysis = resolution_round_distribution(5, 15, max_rounds=20)
    assert 1.0 < float(analysis.mean_rounds()) < 2.5
