"""Single-round reservation via an oblivious shuffle of encrypted pseudonyms.

Participants submit pseudonyms encrypted under the aggregator's key; the
aggregator decrypts, applies a uniform secret permutation, and publishes the
permuted pseudonym list together with a multiset-consistency commitment that
stands in for a real shuffle argument. Each participant locates its own
pseudonym in the published list to learn its slot position. One round, no
collisions, no round-over-round behavioral split to observe.

The "encryption" here is pad expansion keyed by the aggregator's key with a
per-submission nonce. It is simulation plumbing, not cryptography.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from math import ceil, log2
from typing import Sequence

from .core import (
    CollisionStructure,
    ConfigurationError,
    ProtocolError,
    ProtocolParams,
    RoundTranscript,
    SlotVector,
)
from .keying import _derive, expand_pad
from .reservation import ReservationOutcome, participant_rng

_NONCE_BYTES = 16


class ShuffleProtocolFailure(ProtocolError):
    """A participant could not locate a unique pseudonym in the published list."""


@dataclass(frozen=True)
class MockSpKeys:
    """Aggregator keypair for the mock encryption layer.

    Both halves are deterministic digests of the seed; "public" encryption
    and "secret" decryption use the same keystream, which is exactly as much
    security as a simulator needs.
    """

    public: bytes
    secret: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "MockSpKeys":
        secret = _derive(b"qadr.sp-secret", seed).digest(32)
        public = _derive(b"qadr.sp-public", secret).digest(32)
        return cls(public=public, secret=secret)


@dataclass(frozen=True)
class EncryptedPseudonym:
    """A pseudonym encrypted for the aggregator; the simulator withholds the
    submitter linkage except in ground-truth records."""

    ciphertext: bytes
    submitter_hidden: bool = True


@dataclass(frozen=True)
class ShuffleProofStub:
    """Multiset-consistency commitment standing in for a shuffle proof.

    Verification passes iff the published pseudonym list is, as a multiset,
    exactly what the commitment was computed over, and has the committed
    count. Any insertion, deletion, or substitution is rejected.
    """

    multiset_commitment: bytes
    count: int


def _keystream(public_key: bytes, nonce: bytes, length: int) -> bytes:
    return _derive(b"qadr.sp-encrypt", public_key, nonce).digest(length)


def encrypt_pseudonym(pseudonym: bytes, public_key: bytes, nonce: bytes) -> EncryptedPseudonym:
    if len(nonce) != _NONCE_BYTES:
        raise ConfigurationError(f"nonce must be {_NONCE_BYTES} bytes")
    stream = _keystream(public_key, nonce, len(pseudonym))
    body = bytes(a ^ b for a, b in zip(pseudonym, stream))
    return EncryptedPseudonym(ciphertext=nonce + body)


def decrypt_pseudonym(encrypted: EncryptedPseudonym, keys: MockSpKeys) -> bytes:
    nonce, body = encrypted.ciphertext[:_NONCE_BYTES], encrypted.ciphertext[_NONCE_BYTES:]
    stream = _keystream(keys.public, nonce, len(body))
    return bytes(a ^ b for a, b in zip(body, stream))


def submit_pseudonyms(
    n: int,
    master_seed: bytes,
    public_key: bytes | None = None,
    lambda_bits: int = 256,
) -> list[EncryptedPseudonym]:
    """Each participant's encrypted, distinct, nonzero pseudonym.

    Duplicate draws are resampled so the published list is collision-free by
    construction; with high-entropy pseudonyms this is a probability-1 event
    in all but name.
    """
    if n < 1:
        raise ConfigurationError(f"participant count must be >= 1, got {n}")
    if public_key is None:
        public_key = MockSpKeys.from_seed(master_seed).public
    width = lambda_bits // 8
    seen: set[bytes] = set()
    out: list[EncryptedPseudonym] = []
    for i in range(n):
        rng = participant_rng(master_seed, i)
        while True:
            pseudonym = rng.getrandbits(lambda_bits).to_bytes(width, "big")
            if pseudonym != bytes(width) and pseudonym not in seen:
                break
        seen.add(pseudonym)
        nonce = rng.getrandbits(_NONCE_BYTES * 8).to_bytes(_NONCE_BYTES, "big")
        out.append(encrypt_pseudonym(pseudonym, public_key, nonce))
    return out


def _pseudonym_tag(pseudonym: bytes) -> bytes:
    return _derive(b"qadr.shuffle-tag", pseudonym).digest(16)


def _commitment(pseudonyms: Sequence[bytes]) -> bytes:
    h = hashlib.shake_256()
    for tag in sorted(_pseudonym_tag(p) for p in pseudonyms):
        h.update(tag)
    h.update(len(pseudonyms).to_bytes(8, "big"))
    return h.digest(32)


def shuffle_and_publish(
    ciphertexts: Sequence[EncryptedPseudonym],
    sp_seed: bytes,
    keys: MockSpKeys,
) -> tuple[list[bytes], ShuffleProofStub]:
    """Decrypt, permute uniformly at random, and publish the pseudonym list
    with its consistency commitment."""
    if not ciphertexts:
        raise ConfigurationError("nothing to shuffle")
    pseudonyms = [decrypt_pseudonym(ct, keys) for ct in ciphertexts]
    stub = ShuffleProofStub(
        multiset_commitment=_commitment(pseudonyms), count=len(pseudonyms)
    )
    rng = random.Random(int.from_bytes(_derive(b"qadr.sp-shuffle", sp_seed).digest(16), "big"))
    permuted = list(pseudonyms)
    rng.shuffle(permuted)
    return permuted, stub


def verify_shuffle(published: Sequence[bytes], proof: ShuffleProofStub) -> bool:
    """Check the published list against the commitment: same multiset, same
    count."""
    return len(published) == proof.count and _commitment(published) == proof.multiset_commitment


def find_position(pseudonym: bytes, published: Sequence[bytes]) -> int:
    """The participant's assigned slot: the index of its pseudonym in the
    published list. Absence or duplication is a protocol failure."""
    hits = [i for i, p in enumerate(published) if p == pseudonym]
    if len(hits) != 1:
        raise ShuffleProtocolFailure(
            f"pseudonym appears {len(hits)} times in the published list"
        )
    return hits[0]


@dataclass(frozen=True)
class ShuffleCostFragment:
    """Shuffle-variant resource counters: pairwise key bits plus abstract
    work units for proof generation and verification."""

    key_bits: int
    proof_work_units: int
    verification_units: int


def shuffle_cost(params: ProtocolParams) -> ShuffleCostFragment:
    """Key consumption 2 * lambda * n(n-1)/2 (setup plus submission epochs
    only); prover work n * ceil(log2 n) units, verification n units."""
    n = params.n
    pairs = n * (n - 1) // 2
    log_term = ceil(log2(n)) if n > 1 else 0
    return ShuffleCostFragment(
        key_bits=2 * params.lambda_bits * pairs,
        proof_work_units=n * log_term,
        verification_units=n,
    )


def run_shuffle_reservation(params: ProtocolParams, master_seed: bytes) -> ReservationOutcome:
    """Full shuffle-based reservation, shaped like the default stage's outcome
    so the submission stage is variant-agnostic.

    The single transcript's public aggregate is the published pseudonym list
    laid out as an n-slot vector; all slots are occupied, so a partition
    observer has no round-over-round signal to exploit.
    """
    keys = MockSpKeys.from_seed(master_seed)
    ciphertexts = submit_pseudonyms(
        params.n, master_seed, keys.public, params.lambda_bits
    )
    published, proof = shuffle_and_publish(ciphertexts, master_seed, keys)
    if not verify_shuffle(published, proof):
        raise ShuffleProtocolFailure("published list fails multiset verification")

    # Ground truth: participant i drew the i-th submitted pseudonym.
    plaintexts = [decrypt_pseudonym(ct, keys) for ct in ciphertexts]
    positions = {i: find_position(pn, published) for i, pn in enumerate(plaintexts)}
    if sorted(positions.values()) != list(range(params.n)):
        raise ShuffleProtocolFailure("positions do not form a bijection onto 0..n-1")

    list_vector = SlotVector(
        b"".join(published), params.lambda_bits, params.n
    )
    occupied, empty = frozenset(range(params.n)), frozenset()
    ciphertext_bits = (len(ciphertexts[0].ciphertext)) * 8
    transcript = RoundTranscript(
        round_index=1,
        public_aggregate=list_vector,
        per_participant_bits_sent=ciphertext_bits,
        occupied_slot_indices=occupied,
        empty_slot_indices=empty,
    )
    return ReservationOutcome(
        final_positions=positions,
        rounds_used=1,
        transcripts=(transcript,),
        ground_truth_structures=(CollisionStructure((params.n,)),),
        ghost_events=(),
    )
