"""The adversary's view: anonymity-set partitioning from public transcripts.

The observer functions consume only what an external adversary sees, the
per-round occupied/empty slot sets. The rerun rules make those sets speak:
a slot that stays occupied from round r to round r+1 belongs to a single
successful participant (winners re-claim, colliders move to empty slots), so
the intersection of consecutive occupied sets reveals how many participants
had succeeded. The final round's count follows from the termination rule
itself: the stage ends exactly when the occupied count reaches n, which can
only happen when every slot holds one participant.

Ground truth, when supplied, is used solely to assert the inference correct;
no observer output is derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2
from typing import Callable, Optional, Sequence

from .core import CollisionStructure, ConfigurationError, ProtocolParams, RoundTranscript
from .reservation import (
    ParticipantReservationState,
    ReservationStatus,
    ReservationTimeout,
    run_reservation,
)


@dataclass(frozen=True)
class PartitionView:
    """One round's inferred split of the participant set into successful and
    colliding groups, derived from public slot sets only."""

    round_index: int
    succ_count: int
    coll_count: int
    derived_from: tuple[frozenset[int], frozenset[int]]

    def __post_init__(self) -> None:
        if self.succ_count < 0 or self.coll_count < 0:
            raise ConfigurationError("partition counts must be non-negative")


@dataclass(frozen=True)
class AnonymityMetrics:
    """Entropy accounting for the partition leak, in bits."""

    h_initial: float
    h_final: float
    i_gain: float

    def __post_init__(self) -> None:
        if self.i_gain < 0:
            raise ConfigurationError("information gain cannot be negative")


def observe_partition(
    transcripts: Sequence[RoundTranscript],
    ground_truth: Optional[Sequence[CollisionStructure]] = None,
    n: Optional[int] = None,
) -> list[PartitionView]:
    """Partition views per round, computed from occupied/empty sets alone.

    For rounds with a successor, the successful count is the number of
    occupied slots retained into the next round. For the final round of a
    terminated run it equals n by the termination rule. When ``n`` is not
    given it is inferred from the final round's occupied count (i.e. the
    transcript list is assumed to be a complete terminated run); for a
    truncated run pass ``n`` explicitly and the unterminated final round is
    omitted, since one round alone bounds the split only by the occupied
    count.
    """
    if not transcripts:
        raise ConfigurationError("need at least one transcript")
    if n is None:
        n = len(transcripts[-1].occupied_slot_indices)
    views: list[PartitionView] = []
    for idx, transcript in enumerate(transcripts):
        sets = (transcript.occupied_slot_indices, transcript.empty_slot_indices)
        if idx + 1 < len(transcripts):
            succ = len(
                transcript.occupied_slot_indices
                & transcripts[idx + 1].occupied_slot_indices
            )
        elif len(transcript.occupied_slot_indices) == n:
            succ = n
        else:
            break
        views.append(
            PartitionView(
                round_index=transcript.round_index,
                succ_count=succ,
                coll_count=n - succ,
                derived_from=sets,
            )
        )
    if ground_truth is not None:
        for view, structure in zip(views, ground_truth):
            if view.succ_count != structure.singles:
                raise AssertionError(
                    f"round {view.round_index}: observer inferred {view.succ_count} "
                    f"successes, ground truth says {structure.singles}"
                )
    return views


def entropy_metrics(n: int, c1: int) -> AnonymityMetrics:
    """Entropy before/after the first-round partition and the adversary's
    information gain log2(n / (n - c1)).

    Defined for 0 <= c1 < n; with no colliding group left (c1 = n) the
    final entropy is a log of zero, so the input is rejected.
    """
    if n < 1:
        raise ConfigurationError(f"need n >= 1, got {n}")
    if not 0 <= c1 < n:
        raise ConfigurationError(
            f"c1={c1} outside [0, {n}): the colliding group must be non-empty"
        )
    h_initial = log2(n)
    h_final = log2(n - c1)
    return AnonymityMetrics(
        h_initial=h_initial, h_final=h_final, i_gain=h_initial - h_final
    )


def partition_information_gain(
    transcripts: Sequence[RoundTranscript], n: Optional[int] = None
) -> float:
    """Adversary information gain from the first-round partition, in bits.

    A single-round run gives the observer no behavioral split to exploit:
    either the stage terminated immediately (every participant acted
    identically) or the variant is single-round by design. Gain is then zero
    by construction.
    """
    if len(transcripts) < 2:
        return 0.0
    views = observe_partition(transcripts, n=n)
    first = views[0]
    total = first.succ_count + first.coll_count
    if first.coll_count == 0:
        return 0.0
    return entropy_metrics(total, first.succ_count).i_gain


@dataclass(frozen=True)
class CoalitionRoundRecord:
    """Ground-truth anonymity-set sizes entering a round of a coalition run."""

    round_index: int
    honest_colliding: int
    coalition_colliding: int


# A coalition strategy maps (round_index, proposed_choices, states, honest
# ids, coalition ids) to the coalition's final slot choices.
CoalitionStrategy = Callable[
    [int, dict[int, int], Sequence[ParticipantReservationState], Sequence[int], Sequence[int]],
    dict[int, int],
]


def mirror_collision_strategy(
    round_index: int,
    choices: dict[int, int],
    states: Sequence[ParticipantReservationState],
    honest_ids: Sequence[int],
    coalition_ids: Sequence[int],
) -> dict[int, int]:
    """Baseline attack: every unresolved coalition member copies the slot
    choice of a still-unresolved honest participant (round-robin), forcing
    the targets to keep colliding."""
    del round_index
    by_id = {s.id: s for s in states}
    targets = [
        h for h in honest_ids if by_id[h].status is not ReservationStatus.SUCCESSFUL
    ]
    out = dict(choices)
    cursor = 0
    for member in coalition_ids:
        if by_id[member].status is ReservationStatus.SUCCESSFUL:
            continue
        if targets:
            out[member] = choices[targets[cursor % len(targets)]]
            cursor += 1
    return out


def coalition_attack_sim(
    params: ProtocolParams,
    master_seed: bytes,
    honest_count: int,
    strategy: CoalitionStrategy = mirror_collision_strategy,
) -> list[CoalitionRoundRecord]:
    """Run a reservation where the last n - k participants collude.

    Returns the ground-truth trajectory of the honest anonymity set: how many
    honest (and coalition) participants are still unresolved entering each
    round, plus a terminal record. A strategy that forces collisions forever
    runs into the round cap; the trajectory gathered up to that point is
    returned.
    """
    if not 2 <= honest_count <= params.n:
        raise ConfigurationError(
            f"honest_count={honest_count} must be in [2, {params.n}]"
        )
    honest_ids = tuple(range(honest_count))
    coalition_ids = tuple(range(honest_count, params.n))
    records: list[CoalitionRoundRecord] = []

    def hook(
        round_index: int,
        choices: dict[int, int],
        states: Sequence[ParticipantReservationState],
        prev_empty: Optional[frozenset],
    ) -> dict[int, int]:
        del prev_empty
        records.append(
            CoalitionRoundRecord(
                round_index=round_index,
                honest_colliding=sum(
                    1
                    for s in states
                    if s.id in honest_ids and s.status is not ReservationStatus.SUCCESSFUL
                ),
                coalition_colliding=sum(
                    1
                    for s in states
                    if s.id in coalition_ids
                    and s.status is not ReservationStatus.SUCCESSFUL
                ),
            )
        )
        return strategy(round_index, choices, states, honest_ids, coalition_ids)

    try:
        outcome = run_reservation(params, master_seed, slot_strategy=hook)
        records.append(
            CoalitionRoundRecord(
                round_index=outcome.rounds_used + 1,
                honest_colliding=0,
                coalition_colliding=0,
            )
        )
    except ReservationTimeout:
        pass
    return records
