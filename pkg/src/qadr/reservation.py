"""Iterative anonymous slot reservation.

Each round, every participant places a fresh reservation token in a chosen
slot, masks the whole vector with its pairwise pads, and sends it to the
aggregator. The pads cancel in the XOR of all vectors, so the published
aggregate shows only token values per slot. Participants privately check
whether their token survived (a colliding slot holds the XOR of several
tokens, matching none of them), then winners re-claim their slot and losers
retry on previously empty slots until every participant holds a unique slot.

The simulator additionally records per-round ground truth (who chose what)
that no protocol party sees; it exists so tests can validate the public
signals against reality.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

from .core import (
    CollisionStructure,
    ConfigurationError,
    DimensionMismatch,
    ProtocolError,
    ProtocolParams,
    RoundTranscript,
    SlotVector,
    Srm,
    place_in_slot,
)
from .keying import KeySchedule, PairwiseKeyTable, pair_pad


class ReservationStatus(Enum):
    PENDING = "pending"
    SUCCESSFUL = "successful"
    COLLIDING = "colliding"


@dataclass
class ParticipantReservationState:
    """Mutable per-participant view of the reservation stage.

    ``rng`` is a private deterministic stream pre-split from the session
    master seed, so runs replay identically regardless of scheduling.
    """

    id: int
    rng: random.Random
    current_srm: Optional[Srm] = None
    status: ReservationStatus = ReservationStatus.PENDING
    won_slot: Optional[int] = None

    def mark_successful(self, slot: int) -> None:
        self.status = ReservationStatus.SUCCESSFUL
        self.won_slot = slot

    def mark_colliding(self) -> None:
        self.status = ReservationStatus.COLLIDING
        self.won_slot = None

    def check_invariant(self) -> None:
        if (self.status is ReservationStatus.SUCCESSFUL) != (self.won_slot is not None):
            raise ConfigurationError(
                f"participant {self.id}: status {self.status} inconsistent with "
                f"won_slot {self.won_slot}"
            )


@dataclass(frozen=True)
class GhostMatchEvent:
    """A token-match anomaly: some slot's XOR sum coincided with a
    participant's token without being their genuine single reservation."""

    round_index: int
    participant: int
    matched_slots: tuple[int, ...]
    kind: str  # "multi_match" or "false_success"


@dataclass(frozen=True)
class VerifyResult:
    status: ReservationStatus
    won_slot: Optional[int]
    matched_slots: tuple[int, ...]

    @property
    def ambiguous(self) -> bool:
        return len(self.matched_slots) > 1


@dataclass(frozen=True)
class ReservationOutcome:
    """Result of a complete reservation stage.

    ``final_positions`` maps participant id to its compacted slot position
    (a bijection onto 0..n-1). ``ground_truth_structures`` holds the
    simulator-only occupancy profile of every round.
    """

    final_positions: Mapping[int, int]
    rounds_used: int
    transcripts: tuple[RoundTranscript, ...]
    ground_truth_structures: tuple[CollisionStructure, ...]
    ghost_events: tuple[GhostMatchEvent, ...] = ()

    @property
    def reservation_bits_sent(self) -> int:
        """Total bits all participants transmitted across all rounds."""
        n = len(self.final_positions)
        return sum(t.per_participant_bits_sent * n for t in self.transcripts)


class ReservationTimeout(ProtocolError):
    """The round cap was hit before reaching a collision-free aggregate."""

    def __init__(
        self,
        message: str,
        transcripts: tuple[RoundTranscript, ...],
        ground_truth_structures: tuple[CollisionStructure, ...],
    ) -> None:
        super().__init__(message)
        self.transcripts = transcripts
        self.ground_truth_structures = ground_truth_structures


# Hook for adversarial slot-choice experiments: receives the proposed honest
# choices and may override entries (e.g. a coalition forcing collisions).
SlotStrategy = Callable[
    [int, dict[int, int], Sequence[ParticipantReservationState], Optional[frozenset]],
    dict[int, int],
]


def participant_rng(master_seed: bytes, participant: int) -> random.Random:
    """Per-participant random stream, pre-split from the master seed."""
    from .keying import _derive

    seed = _derive(b"qadr.participant-rng", master_seed, participant).digest(16)
    return random.Random(int.from_bytes(seed, "big"))


def draw_srm(rng: random.Random, params: ProtocolParams) -> Srm:
    """Draw a fresh reservation token; the all-zero pseudonym is resampled
    because zero encodes an empty slot."""
    width = params.lambda_bits // 8
    while True:
        pseudonym = rng.getrandbits(params.lambda_bits).to_bytes(width, "big")
        if pseudonym != bytes(width):
            return Srm(pseudonym=pseudonym, width_bits=params.l_srm)


def build_masked_vector(
    state: ParticipantReservationState,
    chosen_slot: int,
    keys: PairwiseKeyTable,
    params: ProtocolParams,
) -> SlotVector:
    """The participant's transmitted vector: token placed in the chosen slot,
    XOR-masked with the pads of all n-1 pairs."""
    if state.current_srm is None:
        raise ConfigurationError(f"participant {state.id} has no current token")
    base = place_in_slot(state.current_srm.payload, chosen_slot, params.m)
    length_bits = params.reservation_vector_bits
    acc = int.from_bytes(base.data, "big")
    for j in range(params.n):
        if j != state.id:
            acc ^= int.from_bytes(pair_pad(keys, state.id, j, length_bits), "big")
    return SlotVector(acc.to_bytes(len(base.data), "big"), params.l_srm, params.m)


def aggregate(
    vectors: Sequence[SlotVector], expected_count: Optional[int] = None
) -> SlotVector:
    """XOR-fold of all submitted vectors; pad symmetry makes the result equal
    the XOR of the bare (unmasked) vectors."""
    if not vectors:
        raise ConfigurationError("cannot aggregate zero vectors")
    if expected_count is not None and len(vectors) != expected_count:
        raise ConfigurationError(
            f"expected {expected_count} vectors, got {len(vectors)}"
        )
    first = vectors[0]
    acc = 0
    for v in vectors:
        if not v.same_shape(first):
            raise DimensionMismatch("aggregation requires identically shaped vectors")
        acc ^= int.from_bytes(v.data, "big")
    return SlotVector(acc.to_bytes(len(first.data), "big"), first.slot_width, first.slot_count)


def classify_slots(aggregate_vector: SlotVector) -> tuple[frozenset[int], frozenset[int]]:
    """Split slot indices into (occupied, empty); empty means all-zero bits."""
    zero = bytes(aggregate_vector.slot_bytes)
    slots = aggregate_vector.slots()
    empty = frozenset(j for j, s in enumerate(slots) if s == zero)
    occupied = frozenset(range(aggregate_vector.slot_count)) - empty
    return occupied, empty


def _matches_in(slots: Sequence[bytes], payload: bytes) -> tuple[int, ...]:
    return tuple(j for j, s in enumerate(slots) if s == payload)


def private_verify(
    state: ParticipantReservationState, aggregate_vector: SlotVector
) -> VerifyResult:
    """Scan the public aggregate for the participant's own token.

    Exactly one matching slot is the normal success signal; no match means
    the token was absorbed into a collision sum. Multiple matches are a
    ghost-match anomaly: the lowest index wins and the ambiguity is surfaced
    in the result for the caller to record.
    """
    if state.current_srm is None:
        raise ConfigurationError(f"participant {state.id} has no current token")
    matches = _matches_in(aggregate_vector.slots(), state.current_srm.payload)
    if matches:
        state.mark_successful(matches[0])
    else:
        state.mark_colliding()
    return VerifyResult(state.status, state.won_slot, matches)


def rerun_choices(
    states: Sequence[ParticipantReservationState],
    empty_slots: frozenset[int],
    epoch: int,
    params: ProtocolParams,
) -> dict[int, int]:
    """Slot choices for a rerun round; also redraws every participant's token.

    Successful participants re-claim their won slot; colliding participants
    pick uniformly among the previous round's empty slots. ``epoch`` is
    bookkeeping only: token draws and choices come from each participant's
    own stream.
    """
    del epoch
    colliding = [s for s in states if s.status is ReservationStatus.COLLIDING]
    if colliding and not empty_slots:
        # Unreachable when m >= n: any collision leaves occupied < n <= m.
        raise ConfigurationError("colliding participants but no empty slots")
    pool = sorted(empty_slots)
    choices: dict[int, int] = {}
    for state in sorted(states, key=lambda s: s.id):
        state.current_srm = draw_srm(state.rng, params)
        if state.status is ReservationStatus.SUCCESSFUL:
            assert state.won_slot is not None
            choices[state.id] = state.won_slot
        else:
            choices[state.id] = pool[state.rng.randrange(len(pool))]
    return choices


def consolidate(final_aggregate: SlotVector, expected_n: int) -> list[bytes]:
    """Compact the terminal aggregate: occupied slot values in slot order.

    A participant's index in this list is its official position for the
    data-submission stage.
    """
    occupied, _ = classify_slots(final_aggregate)
    if len(occupied) != expected_n:
        raise ConfigurationError(
            f"consolidation requires exactly {expected_n} occupied slots, "
            f"found {len(occupied)}"
        )
    return [final_aggregate.slot(j) for j in sorted(occupied)]


def run_reservation(
    params: ProtocolParams,
    master_seed: bytes,
    key_schedule: Optional[KeySchedule] = None,
    slot_strategy: Optional[SlotStrategy] = None,
) -> ReservationOutcome:
    """Execute the full reservation stage and consolidate positions.

    Deterministic in (params, master_seed): every participant stream and all
    key material derive from the seed. Raises ReservationTimeout (carrying
    the transcripts gathered so far) if the round cap is exceeded.
    """
    schedule = key_schedule or KeySchedule(master_seed=master_seed, n=params.n)
    states = [
        ParticipantReservationState(id=i, rng=participant_rng(master_seed, i))
        for i in range(params.n)
    ]

    transcripts: list[RoundTranscript] = []
    structures: list[CollisionStructure] = []
    ghosts: list[GhostMatchEvent] = []
    prev_empty: Optional[frozenset[int]] = None
    agg: Optional[SlotVector] = None

    for round_index in range(1, params.max_rounds + 1):
        keys = schedule.table(epoch=round_index)
        if round_index == 1:
            choices = {}
            for state in states:
                state.current_srm = draw_srm(state.rng, params)
                choices[state.id] = state.rng.randrange(params.m)
        else:
            assert prev_empty is not None
            choices = rerun_choices(states, prev_empty, round_index, params)
        if slot_strategy is not None:
            choices = slot_strategy(round_index, choices, states, prev_empty)
            if choices.keys() != {s.id for s in states}:
                raise ConfigurationError("slot strategy must return a choice per participant")
            if any(not 0 <= c < params.m for c in choices.values()):
                raise ConfigurationError("slot strategy produced an out-of-range slot")

        vectors = [build_masked_vector(s, choices[s.id], keys, params) for s in states]
        agg = aggregate(vectors, expected_count=params.n)
        occupied, empty = classify_slots(agg)
        transcripts.append(
            RoundTranscript(
                round_index=round_index,
                public_aggregate=agg,
                per_participant_bits_sent=params.reservation_vector_bits,
                occupied_slot_indices=occupied,
                empty_slot_indices=empty,
            )
        )

        occupancy: dict[int, int] = {}
        for slot in choices.values():
            occupancy[slot] = occupancy.get(slot, 0) + 1
        structures.append(CollisionStructure.from_occupancies(occupancy.values()))

        slots = agg.slots()
        for state in states:
            matches = _matches_in(slots, state.current_srm.payload)  # type: ignore[union-attr]
            if matches:
                state.mark_successful(matches[0])
            else:
                state.mark_colliding()
            true_slot = choices[state.id]
            truly_single = occupancy[true_slot] == 1
            if len(matches) > 1:
                ghosts.append(
                    GhostMatchEvent(round_index, state.id, matches, "multi_match")
                )
            elif matches and not (truly_single and matches[0] == true_slot):
                ghosts.append(
                    GhostMatchEvent(round_index, state.id, matches, "false_success")
                )
            elif not matches and truly_single:
                raise AssertionError(
                    "a sole occupant's token must appear in its own slot"
                )
            state.check_invariant()

        prev_empty = empty
        if len(occupied) == params.n:
            break
    else:
        raise ReservationTimeout(
            f"no collision-free aggregate within {params.max_rounds} rounds",
            tuple(transcripts),
            tuple(structures),
        )

    assert agg is not None
    ordered_srms = consolidate(agg, params.n)
    positions = {
        state.id: ordered_srms.index(state.current_srm.payload)  # type: ignore[union-attr]
        for state in states
    }
    if sorted(positions.values()) != list(range(params.n)):
        raise ProtocolError("final positions do not form a bijection onto 0..n-1")
    return ReservationOutcome(
        final_positions=positions,
        rounds_used=transcripts[-1].round_index,
        transcripts=tuple(transcripts),
        ground_truth_structures=tuple(structures),
        ghost_events=tuple(ghosts),
    )
