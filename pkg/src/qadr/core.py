"""Shared domain types and bitstring arithmetic for the slot-vector protocol.

Everything here is an immutable value object: instances may be shared freely
between concurrent workers without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil
from typing import Iterable


class ProtocolError(Exception):
    """Base class for protocol-level failures."""


class DimensionMismatch(ProtocolError):
    """Two slot vectors of different shape were combined (caller bug)."""


class ConfigurationError(ProtocolError, ValueError):
    """A parameter set violates one of its invariants."""


# Minimum pseudonym width: keeps accidental pseudonym reuse and ghost matches
# negligible at desk scale (probability ~ 2^-64 per collision sum).
MIN_PSEUDONYM_BITS = 64


@dataclass(frozen=True)
class ProtocolParams:
    """Session-wide constants agreed by all participants and the aggregator.

    ``n`` participants contend for ``m`` slots of ``l_srm`` bits each during
    reservation; data submission uses ``n`` slots of ``l_msg`` bits.
    ``lambda_bits`` is the seed/pseudonym width, ``beta`` the security margin
    used only for cost comparison against the serial baseline protocol.
    """

    n: int
    m: int
    l_srm: int = 256
    l_msg: int = 1024
    lambda_bits: int = 256
    beta: int = 16
    max_rounds: int = 50

    def __post_init__(self) -> None:
        # n = 1 is a degenerate but well-defined single-participant session;
        # anonymity obviously requires n >= 2, which callers enforce.
        if self.n < 1:
            raise ConfigurationError(f"participant count must be >= 1, got {self.n}")
        if self.m < self.n:
            raise ConfigurationError(f"slot count m={self.m} must be >= n={self.n}")
        if self.lambda_bits < MIN_PSEUDONYM_BITS:
            raise ConfigurationError(
                f"lambda_bits={self.lambda_bits} below minimum {MIN_PSEUDONYM_BITS}"
            )
        if self.l_srm < self.lambda_bits:
            raise ConfigurationError(
                f"l_srm={self.l_srm} must hold a {self.lambda_bits}-bit pseudonym"
            )
        for name in ("l_srm", "l_msg", "lambda_bits"):
            value = getattr(self, name)
            if value % 8 != 0:
                raise ConfigurationError(f"{name}={value} must be a multiple of 8")
        if self.beta < 0:
            raise ConfigurationError("beta must be non-negative")
        if self.max_rounds < 1:
            raise ConfigurationError("max_rounds must be >= 1")

    @classmethod
    def from_gamma(cls, n: int, gamma: float | Fraction, **kwargs) -> "ProtocolParams":
        """Build params from a slot-to-participant ratio; m = ceil(gamma * n)."""
        m = int(ceil(Fraction(gamma) * n))
        return cls(n=n, m=m, **kwargs)

    @property
    def gamma(self) -> Fraction:
        """Exact slot-to-participant ratio m / n."""
        return Fraction(self.m, self.n)

    @property
    def reservation_vector_bits(self) -> int:
        return self.m * self.l_srm

    @property
    def submission_vector_bits(self) -> int:
        return self.n * self.l_msg


@dataclass(frozen=True)
class SlotVector:
    """A fixed-width bitstring partitioned into equal byte-aligned slots.

    This is the unit of all XOR traffic. Slot ``j`` occupies bits
    ``[j * slot_width, (j + 1) * slot_width)``; indices are 0-based.
    """

    data: bytes
    slot_width: int
    slot_count: int

    def __post_init__(self) -> None:
        if self.slot_width <= 0 or self.slot_width % 8 != 0:
            raise ConfigurationError(
                f"slot_width={self.slot_width} must be a positive multiple of 8"
            )
        if self.slot_count <= 0:
            raise ConfigurationError(f"slot_count={self.slot_count} must be positive")
        if len(self.data) * 8 != self.slot_count * self.slot_width:
            raise DimensionMismatch(
                f"vector holds {len(self.data) * 8} bits, expected "
                f"{self.slot_count} x {self.slot_width}"
            )

    @classmethod
    def zeros(cls, slot_width: int, slot_count: int) -> "SlotVector":
        return cls(bytes(slot_count * slot_width // 8), slot_width, slot_count)

    @property
    def total_bits(self) -> int:
        return self.slot_count * self.slot_width

    @property
    def slot_bytes(self) -> int:
        return self.slot_width // 8

    def slot(self, index: int) -> bytes:
        """Payload of slot ``index``."""
        if not 0 <= index < self.slot_count:
            raise IndexError(f"slot index {index} out of range [0, {self.slot_count})")
        w = self.slot_bytes
        return self.data[index * w : (index + 1) * w]

    def slots(self) -> tuple[bytes, ...]:
        w = self.slot_bytes
        return tuple(self.data[i * w : (i + 1) * w] for i in range(self.slot_count))

    def is_slot_empty(self, index: int) -> bool:
        """A slot is empty iff all of its bits are zero."""
        return self.slot(index) == bytes(self.slot_bytes)

    def replace_slot(self, index: int, payload: bytes) -> "SlotVector":
        """Copy of the vector with slot ``index`` overwritten by ``payload``."""
        if len(payload) != self.slot_bytes:
            raise DimensionMismatch(
                f"payload is {len(payload)} bytes, slot holds {self.slot_bytes}"
            )
        w = self.slot_bytes
        data = self.data[: index * w] + payload + self.data[(index + 1) * w :]
        return SlotVector(data, self.slot_width, self.slot_count)

    def same_shape(self, other: "SlotVector") -> bool:
        return (
            self.slot_width == other.slot_width
            and self.slot_count == other.slot_count
        )

    def __xor__(self, other: "SlotVector") -> "SlotVector":
        return xor_vectors(self, other)


def xor_vectors(a: SlotVector, b: SlotVector) -> SlotVector:
    """Bitwise XOR of two identically shaped slot vectors.

    Commutative, associative, and self-inverse; the all-zero vector is the
    identity element.
    """
    if not a.same_shape(b):
        raise DimensionMismatch(
            f"shape ({a.slot_count} x {a.slot_width}) != "
            f"({b.slot_count} x {b.slot_width})"
        )
    value = int.from_bytes(a.data, "big") ^ int.from_bytes(b.data, "big")
    return SlotVector(value.to_bytes(len(a.data), "big"), a.slot_width, a.slot_count)


def place_in_slot(payload: bytes, slot_index: int, slot_count: int) -> SlotVector:
    """Vector with ``payload`` at ``slot_index`` and every other slot zero.

    The slot width is the payload width; round-trips with ``SlotVector.slot``.
    """
    if not payload:
        raise ConfigurationError("payload must be non-empty")
    if not 0 <= slot_index < slot_count:
        raise IndexError(f"slot index {slot_index} out of range [0, {slot_count})")
    w = len(payload)
    data = bytes(slot_index * w) + payload + bytes((slot_count - slot_index - 1) * w)
    return SlotVector(data, w * 8, slot_count)


@dataclass(frozen=True)
class Srm:
    """One round's slot-reservation token: a nonzero pseudonym zero-padded
    to the agreed message width.

    The all-zero pseudonym is forbidden because an empty slot is encoded as
    the all-zero bitstring; drawing code resamples on the zero draw.
    """

    pseudonym: bytes
    width_bits: int

    def __post_init__(self) -> None:
        if self.pseudonym == bytes(len(self.pseudonym)):
            raise ConfigurationError("pseudonym must not be all-zero")
        if self.width_bits % 8 != 0 or self.width_bits < len(self.pseudonym) * 8:
            raise ConfigurationError(
                f"width_bits={self.width_bits} cannot hold a "
                f"{len(self.pseudonym) * 8}-bit pseudonym"
            )

    @property
    def payload(self) -> bytes:
        """Full token at the agreed width: pseudonym followed by zero padding."""
        return self.pseudonym + bytes(self.width_bits // 8 - len(self.pseudonym))


@dataclass(frozen=True)
class CollisionStructure:
    """Occupancy profile of one round: ``counts[k-1]`` slots hold exactly
    ``k`` participants.

    Stored in normalized form (trailing zero counts stripped), so
    ``(3, 1)`` and ``(3, 1, 0, 0, 0)`` compare equal.
    """

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ConfigurationError(f"negative occupancy count in {counts}")
        while counts and counts[-1] == 0:
            counts = counts[:-1]
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_occupancies(cls, occupancies: Iterable[int]) -> "CollisionStructure":
        """Build the structure from per-slot occupant counts (zeros ignored)."""
        sizes = [c for c in occupancies if c > 0]
        counts = [0] * (max(sizes) if sizes else 0)
        for c in sizes:
            counts[c - 1] += 1
        return cls(tuple(counts))

    @property
    def participants(self) -> int:
        """Total participants accounted for: sum of k * counts[k-1]."""
        return sum(k * c for k, c in enumerate(self.counts, start=1))

    @property
    def occupied_slots(self) -> int:
        return sum(self.counts)

    @property
    def singles(self) -> int:
        """Number of slots holding exactly one participant."""
        return self.counts[0] if self.counts else 0

    @property
    def colliding_participants(self) -> int:
        return self.participants - self.singles

    @property
    def collision_slots(self) -> int:
        """Number of slots holding two or more participants."""
        return sum(self.counts[1:])

    def padded(self, n: int) -> tuple[int, ...]:
        """Counts vector padded with zeros to length ``n``."""
        if len(self.counts) > n:
            raise ConfigurationError(f"structure {self.counts} exceeds length {n}")
        return self.counts + (0,) * (n - len(self.counts))


@dataclass(frozen=True)
class RoundTranscript:
    """Everything an external observer sees in one reservation round.

    The occupied/empty split is derivable from the public aggregate and is
    validated against it on construction; empty means the slot's bits are
    all zero.
    """

    round_index: int
    public_aggregate: SlotVector
    per_participant_bits_sent: int
    occupied_slot_indices: frozenset[int]
    empty_slot_indices: frozenset[int]

    def __post_init__(self) -> None:
        agg = self.public_aggregate
        all_slots = frozenset(range(agg.slot_count))
        if self.occupied_slot_indices | self.empty_slot_indices != all_slots:
            raise ConfigurationError("occupied and empty sets must cover all slots")
        if self.occupied_slot_indices & self.empty_slot_indices:
            raise ConfigurationError("occupied and empty sets must be disjoint")
        for j in range(agg.slot_count):
            if agg.is_slot_empty(j) != (j in self.empty_slot_indices):
                raise ConfigurationError(
                    f"slot {j} empty-flag disagrees with the aggregate bits"
                )
