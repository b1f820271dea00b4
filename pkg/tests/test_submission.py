from __future__ import annotations

import pytest

from qadr.core import ConfigurationError, ProtocolParams, SlotVector, xor_vectors
from qadr.keying import establish_keys, pair_pad
from qadr.submission import (
    SubmissionResult,
    aggregate_and_broadcast,
    build_message_vector,
    collect_flags,
    pad_message,
    recover,
    run_recovery,
    run_submission,
    verify_and_flag,
)

SEED = b"submission-tests"


def params_for(n: int, l_msg: int = 64) -> ProtocolParams:
    return ProtocolParams(n=n, m=3 * n, l_srm=64, l_msg=l_msg, lambda_bits=64)


def messages_for(n: int, l_msg: int = 64) -> list[bytes]:
    return [bytes([0xA0 + i] * (l_msg // 8)) for i in range(n)]


def test_two_party_concatenation():
    params = params_for(2)
    keys = establish_keys(2, SEED, epoch=9)
    msgs = messages_for(2)
    combined = xor_vectors(
        build_message_vector(msgs[0], 0, 0, keys, params),
        build_message_vector(msgs[1], 1, 1, keys, params),
    )
    assert combined.slot(0) == msgs[0] and combined.slot(1) == msgs[1]


def test_unmask_with_own_pads():
    params = params_for(2)
    keys = establish_keys(2, SEED, epoch=9)
    masked = build_message_vector(b"\x55" * 8, 1, 0, keys, params)
    pad = pair_pad(keys, 0, 1, params.submission_vector_bits)
    bare = xor_vectors(masked, SlotVector(pad, params.l_msg, params.n))
    assert bare.slot(1) == b"\x55" * 8 and bare.is_slot_empty(0)


def test_five_party_aggregate_is_concatenation_in_position_order():
    params = params_for(5)
    keys = establish_keys(5, SEED, epoch=9)
    msgs = messages_for(5)
    positions = {0: 3, 1: 0, 2: 4, 3: 1, 4: 2}
    result = run_submission(msgs, positions, keys, params)
    assert result.accepted
    for i in range(5):
        assert result.concatenated.slot(positions[i]) == msgs[i]


def test_broadcast_byte_length():
    params = params_for(4, l_msg=128)
    keys = establish_keys(4, SEED, epoch=9)
    result = run_submission(
        messages_for(4, 128), {i: i for i in range(4)}, keys, params
    )
    assert len(result.concatenated.data) == 4 * 128 // 8


def test_corrupting_one_input_bit_flips_one_output_bit():
    params = params_for(3)
    keys = establish_keys(3, SEED, epoch=9)
    msgs = messages_for(3)
    vectors = [
        build_message_vector(msgs[i], i, i, keys, params) for i in range(3)
    ]
    flipped = SlotVector(
        bytes([vectors[1].data[0] ^ 0x01]) + vectors[1].data[1:],
        vectors[1].slot_width,
        vectors[1].slot_count,
    )
    clean = aggregate_and_broadcast(vectors)
    dirty = aggregate_and_broadcast([vectors[0], flipped, vectors[2]])
    delta = [a ^ b for a, b in zip(clean.data, dirty.data)]
    assert sum(bin(d).count("1") for d in delta) == 1


def test_message_padding():
    params = params_for(2)
    assert pad_message(b"\x01\x02", params) == b"\x01\x02" + bytes(6)
    with pytest.raises(ConfigurationError):
        pad_message(bytes(9), params)


def test_flag_soundness_single_corruption():
    params = params_for(4)
    keys = establish_keys(4, SEED, epoch=9)
    msgs = messages_for(4)
    positions = {0: 2, 1: 0, 2: 3, 3: 1}
    broadcast = run_submission(msgs, positions, keys, params).concatenated
    # flip one bit in slot 3 (owned by participant 2)
    corrupted = broadcast.replace_slot(
        3, bytes([broadcast.slot(3)[0] ^ 0x80]) + broadcast.slot(3)[1:]
    )
    flags = collect_flags(msgs, positions, corrupted, params)
    assert flags == (1, 1, 0, 1)


def test_swapping_two_slots_flips_both_flags():
    params = params_for(4)
    keys = establish_keys(4, SEED, epoch=9)
    msgs = messages_for(4)
    positions = {i: i for i in range(4)}
    broadcast = run_submission(msgs, positions, keys, params).concatenated
    swapped = broadcast.replace_slot(1, broadcast.slot(2)).replace_slot(
        2, broadcast.slot(1)
    )
    assert collect_flags(msgs, positions, swapped, params) == (1, 0, 0, 1)


def test_verify_and_flag_direct():
    params = params_for(2)
    keys = establish_keys(2, SEED, epoch=9)
    msgs = messages_for(2)
    broadcast = run_submission(msgs, {0: 0, 1: 1}, keys, params).concatenated
    assert verify_and_flag(0, msgs[0], broadcast, params) == 1
    assert verify_and_flag(1, msgs[0], broadcast, params) == 0


def test_recovery_plan_lists_zero_flags():
    assert recover([1, 0, 1]) == frozenset({1})
    assert recover([0, 0, 0]) == frozenset({0, 1, 2})
    with pytest.raises(ConfigurationError):
        recover([1, 1])


def test_recovery_end_to_end_after_fault():
    params = params_for(5)
    keys = establish_keys(5, SEED, epoch=9)
    fresh_keys = establish_keys(5, SEED, epoch=10)
    msgs = messages_for(5)
    positions = {0: 1, 1: 4, 2: 0, 3: 3, 4: 2}
    broadcast = run_submission(msgs, positions, keys, params).concatenated
    victim_slot = positions[3]
    corrupted = broadcast.replace_slot(victim_slot, b"\xde\xad" + bytes(6))
    flags = collect_flags(msgs, positions, corrupted, params)
    assert flags == (1, 1, 1, 0, 1)
    repaired = run_recovery(corrupted, flags, msgs, positions, fresh_keys, params)
    assert repaired.accepted
    assert repaired.concatenated.slot(victim_slot) == msgs[3]


def test_broadcast_depends_only_on_position_message_pairs():
    # Unlinkability surrogate: permuting which participant holds which
    # (position, message) pair leaves the broadcast byte-identical.
    params = params_for(4)
    keys = establish_keys(4, SEED, epoch=9)
    msgs = messages_for(4)
    positions = {0: 2, 1: 0, 2: 3, 3: 1}
    base = run_submission(msgs, positions, keys, params).concatenated
    permutation = [2, 3, 1, 0]  # participant i takes over pair pi(i)
    permuted_msgs = [msgs[permutation[i]] for i in range(4)]
    permuted_positions = {i: positions[permutation[i]] for i in range(4)}
    swapped = run_submission(permuted_msgs, permuted_positions, keys, params).concatenated
    assert swapped.data == base.data


def test_result_consistency_validated():
    params = params_for(2)
    keys = establish_keys(2, SEED, epoch=9)
    result = run_submission(messages_for(2), {0: 0, 1: 1}, keys, params)
    with pytest.raises(ConfigurationError):
        SubmissionResult(
            concatenated=result.concatenated, flags=(1, 0), accepted=True
        )
