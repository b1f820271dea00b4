"""Parallel data submission over the reserved slot positions.

All n participants transmit simultaneously: each places its message at its
reserved position in an n-slot vector, masks with the pairwise pads of a
fresh key epoch, and sends the result to the aggregator. The XOR of all
vectors is the exact concatenation of the messages in position order, which
is broadcast back so every participant can verify its own slot and return a
one-bit validation flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .core import ConfigurationError, ProtocolParams, SlotVector, place_in_slot
from .keying import PairwiseKeyTable, pair_pad
from .reservation import aggregate


@dataclass(frozen=True)
class SubmissionResult:
    """Outcome of one submission pass.

    ``accepted`` is true iff every flag is 1, i.e. every participant found
    its message intact at its position in the broadcast vector.
    """

    concatenated: SlotVector
    flags: tuple[int, ...]
    accepted: bool

    def __post_init__(self) -> None:
        if self.accepted != all(f == 1 for f in self.flags):
            raise ConfigurationError("accepted must equal the conjunction of flags")

    @property
    def bits_sent(self) -> int:
        """Total bits transmitted to the aggregator during this pass."""
        return len(self.flags) * self.concatenated.total_bits


def pad_message(msg: bytes, params: ProtocolParams) -> bytes:
    """Right-pad a message with zeros to the fixed per-session width."""
    width = params.l_msg // 8
    if len(msg) > width:
        raise ConfigurationError(
            f"message of {len(msg)} bytes exceeds the {width}-byte slot"
        )
    return msg + bytes(width - len(msg))


def build_message_vector(
    msg: bytes,
    pos: int,
    participant: int,
    keys: PairwiseKeyTable,
    params: ProtocolParams,
) -> SlotVector:
    """The participant's transmitted vector: message at offset pos * l_msg in
    an n-slot vector, masked with the n-1 pads of the submission epoch."""
    if not 0 <= pos < params.n:
        raise ConfigurationError(f"position {pos} out of range [0, {params.n})")
    base = place_in_slot(pad_message(msg, params), pos, params.n)
    length_bits = params.submission_vector_bits
    acc = int.from_bytes(base.data, "big")
    for j in range(params.n):
        if j != participant:
            acc ^= int.from_bytes(pair_pad(keys, participant, j, length_bits), "big")
    return SlotVector(acc.to_bytes(len(base.data), "big"), params.l_msg, params.n)


def aggregate_and_broadcast(
    vectors: Sequence[SlotVector], expected_count: Optional[int] = None
) -> SlotVector:
    """XOR-fold all submissions; the result is broadcast back to everyone."""
    return aggregate(vectors, expected_count=expected_count)


def verify_and_flag(pos: int, msg: bytes, broadcast: SlotVector, params: ProtocolParams) -> int:
    """The participant's validation flag: 1 iff its slot of the broadcast
    equals its message bit-exactly."""
    return 1 if broadcast.slot(pos) == pad_message(msg, params) else 0


def collect_flags(
    messages: Sequence[bytes],
    positions: Mapping[int, int],
    broadcast: SlotVector,
    params: ProtocolParams,
) -> tuple[int, ...]:
    return tuple(
        verify_and_flag(positions[i], messages[i], broadcast, params)
        for i in range(len(messages))
    )


def run_submission(
    messages: Sequence[bytes],
    positions: Mapping[int, int],
    keys: PairwiseKeyTable,
    params: ProtocolParams,
) -> SubmissionResult:
    """One full submission pass: build, aggregate, broadcast, verify."""
    if len(messages) != params.n or len(positions) != params.n:
        raise ConfigurationError("need exactly one message and position per participant")
    vectors = [
        build_message_vector(messages[i], positions[i], i, keys, params)
        for i in range(params.n)
    ]
    broadcast = aggregate_and_broadcast(vectors, expected_count=params.n)
    flags = collect_flags(messages, positions, broadcast, params)
    return SubmissionResult(
        concatenated=broadcast, flags=flags, accepted=all(f == 1 for f in flags)
    )


def recover(flags: Sequence[int]) -> frozenset[int]:
    """Retransmission plan: exactly the participants whose flag is 0."""
    if all(f == 1 for f in flags):
        raise ConfigurationError("recovery requires at least one zero flag")
    return frozenset(i for i, f in enumerate(flags) if f == 0)


def run_recovery(
    broadcast: SlotVector,
    flags: Sequence[int],
    messages: Sequence[bytes],
    positions: Mapping[int, int],
    keys: PairwiseKeyTable,
    params: ProtocolParams,
) -> SubmissionResult:
    """Rerun submission for the flag-0 participants under a fresh key epoch.

    Every participant transmits again so traffic stays uniform: faulty ones
    embed their message, honest ones embed the zero message. The rerun
    aggregate is therefore zero outside the repaired positions, and the
    aggregator splices its non-zero slots into the previous broadcast without
    learning which participant owns which slot.
    """
    plan = recover(flags)
    rerun_vectors = [
        build_message_vector(
            messages[i] if i in plan else b"", positions[i], i, keys, params
        )
        for i in range(params.n)
    ]
    rerun = aggregate_and_broadcast(rerun_vectors, expected_count=params.n)
    repaired = broadcast
    for j in range(params.n):
        if not rerun.is_slot_empty(j):
            repaired = repaired.replace_slot(j, rerun.slot(j))
    new_flags = collect_flags(messages, positions, repaired, params)
    return SubmissionResult(
        concatenated=repaired, flags=new_flags, accepted=all(f == 1 for f in new_flags)
    )
