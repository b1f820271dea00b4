"""Simulated pairwise key establishment and keyed pseudorandom pad expansion.

The pairwise key source stands in for an external key-agreement layer and the
pad expander for a keyed stream primitive. Both are deterministic functions of
their inputs so whole protocol runs replay bit-for-bit; neither carries a
cryptographic-strength claim. Fresh keys per round are modeled by mixing an
epoch counter into seed derivation instead of re-running establishment.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

from .core import ConfigurationError, ProtocolError

DEFAULT_SEED_BITS = 256


class MissingKeyError(ProtocolError, KeyError):
    """A pad was requested for a pair with no established key."""


class KeyMode(str, Enum):
    # PRF: short seeds expanded on demand. OTP: the stored "seed" is itself a
    # full-length pad and expansion is plain truncation.
    PRF = "prf"
    OTP = "otp"


def _derive(tag: bytes, *parts: bytes | int) -> "hashlib._Hash":
    """Domain-separated XOF over the given parts (lengths are encoded)."""
    h = hashlib.shake_256()
    h.update(len(tag).to_bytes(2, "big") + tag)
    for part in parts:
        if isinstance(part, int):
            part = part.to_bytes(8, "big", signed=True)
        h.update(len(part).to_bytes(4, "big") + part)
    return h


@dataclass(frozen=True)
class PairwiseKeyTable:
    """One epoch's symmetric key material: one seed per unordered pair.

    Lookup is symmetric, ``seed(i, j) == seed(j, i)``, and the table holds
    exactly n(n-1)/2 entries for n participants.
    """

    seeds: Mapping[tuple[int, int], bytes]
    epoch: int
    n: int
    mode: KeyMode = KeyMode.PRF

    def __post_init__(self) -> None:
        expected = self.n * (self.n - 1) // 2
        if len(self.seeds) != expected:
            raise ConfigurationError(
                f"table has {len(self.seeds)} entries, expected {expected} for n={self.n}"
            )
        object.__setattr__(self, "seeds", MappingProxyType(dict(self.seeds)))

    def seed(self, i: int, j: int) -> bytes:
        if i == j:
            raise MissingKeyError(f"no self-pair key for participant {i}")
        try:
            return self.seeds[(min(i, j), max(i, j))]
        except KeyError:
            raise MissingKeyError(f"no key for pair ({i}, {j})") from None

    @property
    def pair_count(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class PadRequest:
    """A request to expand the pad shared by ``pair`` at ``epoch`` to
    ``length_bits`` bits."""

    pair: tuple[int, int]
    epoch: int
    length_bits: int

    def __post_init__(self) -> None:
        i, j = self.pair
        if i == j:
            raise ConfigurationError("pad pair must be two distinct participants")
        object.__setattr__(self, "pair", (min(i, j), max(i, j)))
        if self.length_bits <= 0 or self.length_bits % 8 != 0:
            raise ConfigurationError(
                f"pad length must be a positive multiple of 8, got {self.length_bits}"
            )


def establish_keys(
    n: int,
    master_seed: bytes,
    epoch: int,
    seed_bits: int = DEFAULT_SEED_BITS,
    mode: KeyMode = KeyMode.PRF,
) -> PairwiseKeyTable:
    """Deterministically derive one epoch's pairwise key table.

    The same ``(master_seed, epoch)`` always yields the same table; distinct
    epochs share no seeds (up to XOF collisions).
    """
    if n < 1:
        raise ConfigurationError(f"participant count must be >= 1, got {n}")
    if seed_bits <= 0 or seed_bits % 8 != 0:
        raise ConfigurationError("seed_bits must be a positive multiple of 8")
    # One XOF stream per epoch, sliced per pair in (i, j) order: far cheaper
    # than a hash call per pair and just as deterministic.
    width = seed_bits // 8
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    stream = _derive(b"qadr.pairkey", master_seed, epoch).digest(width * len(pairs) or 1)
    seeds = {
        pair: stream[k * width : (k + 1) * width] for k, pair in enumerate(pairs)
    }
    return PairwiseKeyTable(seeds=seeds, epoch=epoch, n=n, mode=mode)


def establish_otp_pads(
    n: int, master_seed: bytes, epoch: int, pad_bits: int
) -> PairwiseKeyTable:
    """Direct one-time-pad key source: every pair's "seed" is a full pad."""
    return establish_keys(n, master_seed, epoch, seed_bits=pad_bits, mode=KeyMode.OTP)


@lru_cache(maxsize=4096)
def expand_pad(seed: bytes, length_bits: int) -> bytes:
    """Deterministic keyed expansion of ``seed`` to ``length_bits`` bits.

    Prefix-consistent: expanding the same seed to a shorter length yields a
    prefix of the longer expansion. Backed by an extendable-output hash; any
    keyed stream with the same contract may be swapped in.
    """
    if length_bits <= 0:
        raise ConfigurationError(f"pad length must be positive, got {length_bits}")
    if length_bits % 8 != 0:
        raise ConfigurationError(f"pad length must be a multiple of 8, got {length_bits}")
    return _derive(b"qadr.pad", seed).digest(length_bits // 8)


def pair_pad(table: PairwiseKeyTable, i: int, j: int, length_bits: int) -> bytes:
    """The pad both endpoints of pair ``{i, j}`` derive for this epoch.

    Symmetry of the underlying seed guarantees ``pair_pad(t, i, j, L) ==
    pair_pad(t, j, i, L)``, which is what makes pads cancel in aggregation.
    """
    seed = table.seed(i, j)
    if table.mode is KeyMode.OTP:
        if length_bits > len(seed) * 8:
            raise ConfigurationError(
                f"one-time pad of {len(seed) * 8} bits cannot supply {length_bits}"
            )
        return seed[: length_bits // 8]
    return expand_pad(seed, length_bits)


def fulfill(table: PairwiseKeyTable, request: PadRequest) -> bytes:
    """Serve a pad request against a table, checking the epoch matches."""
    if request.epoch != table.epoch:
        raise ConfigurationError(
            f"request epoch {request.epoch} does not match table epoch {table.epoch}"
        )
    return pair_pad(table, request.pair[0], request.pair[1], request.length_bits)


@dataclass(frozen=True)
class KeySchedule:
    """Deterministic per-epoch key source for one protocol session.

    Epoch 0 is the setup-stage exchange; reservation round r uses epoch r and
    the submission stage uses the next fresh epoch after the final round.
    """

    master_seed: bytes
    n: int
    mode: KeyMode = KeyMode.PRF
    seed_bits: int = DEFAULT_SEED_BITS
    otp_pad_bits: int | None = None

    def __post_init__(self) -> None:
        if self.mode is KeyMode.OTP and self.otp_pad_bits is None:
            raise ConfigurationError("OTP mode requires otp_pad_bits")

    def table(self, epoch: int) -> PairwiseKeyTable:
        if self.mode is KeyMode.OTP:
            assert self.otp_pad_bits is not None
            return establish_otp_pads(self.n, self.master_seed, epoch, self.otp_pad_bits)
        return establish_keys(self.n, self.master_seed, epoch, self.seed_bits)

    def key_bits_per_epoch(self) -> int:
        """Secret bits consumed by one epoch's exchange across all pairs."""
        per_pair = self.otp_pad_bits if self.mode is KeyMode.OTP else self.seed_bits
        assert per_pair is not None
        return per_pair * self.n * (self.n - 1) // 2
