"""Exact occupancy analytics for uniform random slot choice.

Computes the probability of any collision structure when n participants each
pick one of m slots uniformly at random, chains those probabilities across
resolution rounds, and derives the distribution of rounds needed to reach a
collision-free state. Arithmetic is exact (big-integer rationals) up to
n, m <= 64 and falls back to log-gamma evaluation beyond, with relative error
below 1e-12 in the supported range.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import exp, factorial, lgamma, log
from typing import Iterator, Sequence, Union

from .core import CollisionStructure, ConfigurationError

Number = Union[Fraction, float]

# Largest (n, m) evaluated with exact rationals; factorial ratios above this
# switch to log-space floats.
EXACT_LIMIT = 64

# Documented oracle-scale bounds for the exhaustive public surfaces.
ENUMERATION_MAX_N = 12
ENUMERATION_MAX_M = 16
RESOLUTION_MAX_N = 10


class ScaleExceededError(ConfigurationError):
    """An exhaustive operation was asked to run beyond its oracle scale."""


@dataclass(frozen=True)
class StructureProbability:
    structure: CollisionStructure
    probability: Number

    def __post_init__(self) -> None:
        if not 0 <= self.probability <= 1:
            raise ConfigurationError(f"probability {self.probability} outside [0, 1]")


def birthday_collision_probability(n: int, m: int) -> Fraction:
    """Probability that at least two of n uniform choices among m slots agree.

    Evaluates the product form 1 - prod_{k=1}^{n-1} (1 - k/m) exactly.
    """
    if n < 1:
        raise ConfigurationError(f"need n >= 1, got {n}")
    if n > m:
        raise ConfigurationError(f"n={n} exceeds slot count m={m}")
    no_collision = Fraction(1)
    for k in range(1, n):
        no_collision *= Fraction(m - k, m)
    return 1 - no_collision


def _validate_structure(structure: CollisionStructure, n: int, m: int) -> int:
    if structure.participants != n:
        raise ConfigurationError(
            f"structure accounts for {structure.participants} participants, expected {n}"
        )
    j = structure.occupied_slots
    if j > m:
        raise ConfigurationError(f"structure occupies {j} slots but only {m} exist")
    return j


def structure_probability(
    structure: CollisionStructure | Sequence[int], n: int, m: int
) -> Number:
    """Probability of one specific collision structure for n choosers, m slots.

    Counts the ways to partition the n labeled participants into the
    structure's group sizes, times the ways to place those j groups into
    distinct slots, over the m^n equally likely assignments:

        n! * m! / (m^n * (m-j)! * prod_k (k!)^{c_k} * c_k!)
    """
    if not isinstance(structure, CollisionStructure):
        structure = CollisionStructure(tuple(structure))
    if n < 1 or m < 1:
        raise ConfigurationError("need n >= 1 and m >= 1")
    j = _validate_structure(structure, n, m)
    if max(n, m) <= EXACT_LIMIT:
        denominator = factorial(m - j)
        for k, ck in enumerate(structure.counts, start=1):
            denominator *= factorial(k) ** ck * factorial(ck)
        return Fraction(factorial(n) * factorial(m), denominator) / Fraction(m) ** n
    log_p = lgamma(n + 1) + lgamma(m + 1) - lgamma(m - j + 1) - n * log(m)
    for k, ck in enumerate(structure.counts, start=1):
        log_p -= ck * lgamma(k + 1) + lgamma(ck + 1)
    return exp(log_p)


def _partitions(total: int, max_part: int) -> Iterator[tuple[int, ...]]:
    """Weakly decreasing integer partitions of ``total`` with parts <= max_part."""
    if total == 0:
        yield ()
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in _partitions(total - first, first):
            yield (first,) + rest


def _structures(n: int, m: int) -> Iterator[CollisionStructure]:
    """All collision structures for n participants that fit in m slots."""
    for partition in _partitions(n, n):
        if len(partition) > m:
            continue
        counts = [0] * (partition[0] if partition else 0)
        for part in partition:
            counts[part - 1] += 1
        yield CollisionStructure(tuple(counts))


def enumerate_structures(n: int, m: int) -> list[StructureProbability]:
    """Every valid structure with its probability; probabilities sum to 1.

    Exhaustive oracle, deliberately capped at small scale.
    """
    if n > ENUMERATION_MAX_N or m > ENUMERATION_MAX_M:
        raise ScaleExceededError(
            f"enumeration supports n <= {ENUMERATION_MAX_N}, m <= {ENUMERATION_MAX_M}"
        )
    if n < 1 or m < 1:
        raise ConfigurationError("need n >= 1 and m >= 1")
    return [
        StructureProbability(structure, structure_probability(structure, n, m))
        for structure in _structures(n, m)
    ]


@dataclass(frozen=True)
class RoundChain:
    """A specific multi-round outcome: per-round (n_r, m_r, structure).

    Parameters must chain per the resolution rule: only colliding
    participants retry (n' = n - c_1) among the previously empty slots
    (m' = m - j).
    """

    rounds: tuple[tuple[int, int, CollisionStructure], ...]
    joint_probability: Number

    @classmethod
    def from_rounds(
        cls, rounds: Sequence[tuple[int, int, CollisionStructure | Sequence[int]]]
    ) -> "RoundChain":
        normalized = tuple(
            (n, m, c if isinstance(c, CollisionStructure) else CollisionStructure(tuple(c)))
            for n, m, c in rounds
        )
        return cls(rounds=normalized, joint_probability=chain_probability(normalized))


def chain_probability(
    rounds: Sequence[tuple[int, int, CollisionStructure | Sequence[int]]]
) -> Number:
    """Joint probability of a sequence of per-round structures.

    Each round's probability is the single-round formula at that round's
    (n_r, m_r); the chain rule for the protocol fixes n_{r+1} = n_r - c_1 and
    m_{r+1} = m_r - j.
    """
    if not rounds:
        raise ConfigurationError("chain must contain at least one round")
    joint: Number = Fraction(1)
    expected: tuple[int, int] | None = None
    for n_r, m_r, structure in rounds:
        if not isinstance(structure, CollisionStructure):
            structure = CollisionStructure(tuple(structure))
        if expected is not None and (n_r, m_r) != expected:
            raise ConfigurationError(
                f"round parameters ({n_r}, {m_r}) break the chain; expected {expected}"
            )
        joint = joint * structure_probability(structure, n_r, m_r)
        expected = (n_r - structure.singles, m_r - structure.occupied_slots)
    return joint


@dataclass(frozen=True)
class RoundStats:
    """Analytical per-round figures for the resolution process."""

    round_index: int
    p_terminate: Fraction
    expected_colliding_participants: Fraction
    expected_collision_slots: Fraction


@dataclass(frozen=True)
class ResolutionAnalysis:
    rounds: tuple[RoundStats, ...]
    unresolved_mass: Fraction

    def p_terminate_at(self, round_index: int) -> Fraction:
        return self.rounds[round_index - 1].p_terminate

    def mean_rounds(self) -> Fraction:
        """Expected round count, conditioned on resolving within the horizon."""
        resolved = 1 - self.unresolved_mass
        if resolved == 0:
            raise ConfigurationError("no probability mass resolves within the horizon")
        return (
            sum((Fraction(s.round_index) * s.p_terminate for s in self.rounds), Fraction(0))
            / resolved
        )


def resolution_round_distribution(n: int, m: int, max_rounds: int = 16) -> ResolutionAnalysis:
    """Exact distribution of rounds-to-terminate plus per-round collision
    expectations, by dynamic programming over collision structures.

    The state entering a round is (active retriers a, free slots b). Free
    slots follow the protocol's literal rerun rule: winners hold their slots
    forever, the current round's collision slots are unavailable next round,
    and collision slots abandoned in earlier rounds have already returned to
    the pool. Hence b' = (m - n) + a' - s with a' the remaining retriers and
    s the round's collision-slot count. (The simple chaining m' = m - j is
    exact only through round two, because it never returns abandoned slots.)

    Expectations are unconditional over all runs: a run already resolved
    before round r contributes zero collisions to that round.
    """
    if n > RESOLUTION_MAX_N:
        raise ScaleExceededError(f"resolution analysis supports n <= {RESOLUTION_MAX_N}")
    if n < 1 or m < n:
        raise ConfigurationError("need 1 <= n <= m")
    if max_rounds < 1:
        raise ConfigurationError("max_rounds must be >= 1")

    rounds: list[RoundStats] = []
    # Distribution over live sub-instances entering each round; terminated
    # mass leaves the pool, deadlocked mass keeps cycling until the horizon.
    states: dict[tuple[int, int], Fraction] = {(n, m): Fraction(1)}
    for round_index in range(1, max_rounds + 1):
        p_term = Fraction(0)
        exp_coll_participants = Fraction(0)
        exp_coll_slots = Fraction(0)
        next_states: dict[tuple[int, int], Fraction] = {}
        for (active, free), weight in states.items():
            for structure in _structures(active, free):
                p = structure_probability(structure, active, free)
                assert isinstance(p, Fraction)
                mass = weight * p
                exp_coll_participants += mass * structure.colliding_participants
                exp_coll_slots += mass * structure.collision_slots
                remaining = active - structure.singles
                if remaining == 0:
                    p_term += mass
                else:
                    key = (remaining, (m - n) + remaining - structure.collision_slots)
                    next_states[key] = next_states.get(key, Fraction(0)) + mass
        rounds.append(
            RoundStats(round_index, p_term, exp_coll_participants, exp_coll_slots)
        )
        states = next_states
        if not states:
            break
    unresolved = sum(states.values(), Fraction(0))
    return ResolutionAnalysis(rounds=tuple(rounds), unresolved_mass=unresolved)
