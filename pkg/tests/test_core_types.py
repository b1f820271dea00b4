from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from qadr.core import (
    CollisionStructure,
    ConfigurationError,
    DimensionMismatch,
    ProtocolParams,
    RoundTranscript,
    SlotVector,
    Srm,
    place_in_slot,
    xor_vectors,
)


def vec(data: bytes, width: int = 8) -> SlotVector:
    return SlotVector(data, width, len(data) * 8 // width)


# -- slot vector XOR -----------------------------------------------------


def test_xor_self_inverse():
    a = vec(b"\xabT\x01")
    assert xor_vectors(a, a) == vec(b"\x00\x00\x00")


def test_xor_identity():
    a = vec(b"\xabT\x01")
    assert xor_vectors(a, SlotVector.zeros(8, 3)) == a


def test_xor_roundtrip_three_slots():
    a = vec(bytes([0x13, 0x99, 0xF0]))
    b = vec(bytes([0xEE, 0x01, 0x7C]))
    assert xor_vectors(xor_vectors(a, b), b) == a


def test_xor_shape_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        xor_vectors(vec(b"\x01\x02"), vec(b"\x01\x02\x03"))
    with pytest.raises(DimensionMismatch):
        xor_vectors(SlotVector(b"\x01\x02", 8, 2), SlotVector(b"\x01\x02", 16, 1))


bytes_3_slots = st.binary(min_size=6, max_size=6)


@given(bytes_3_slots, bytes_3_slots, bytes_3_slots)
def test_xor_group_laws(a_bytes, b_bytes, c_bytes):
    a, b, c = vec(a_bytes, 16), vec(b_bytes, 16), vec(c_bytes, 16)
    assert xor_vectors(a, b) == xor_vectors(b, a)
    assert xor_vectors(xor_vectors(a, b), c) == xor_vectors(a, xor_vectors(b, c))
    assert xor_vectors(a, a) == SlotVector.zeros(16, 3)


# -- slot placement ------------------------------------------------------


def test_place_in_slot_layout():
    payload = b"\xab\xcd"
    v = place_in_slot(payload, 0, 3)
    assert v.slot(0) == payload and v.slot(1) == b"\x00\x00" and v.slot(2) == b"\x00\x00"


@given(st.integers(min_value=0, max_value=4), st.binary(min_size=2, max_size=2))
def test_place_extract_roundtrip(index, payload):
    v = place_in_slot(payload, index, 5)
    assert v.slot(index) == payload
    for other in range(5):
        if other != index:
            assert v.slot(other) == b"\x00\x00"


def test_place_two_then_xor_keeps_both():
    a, b = b"\x11", b"\x22"
    v = xor_vectors(place_in_slot(a, 0, 3), place_in_slot(b, 2, 3))
    assert v.slot(0) == a and v.slot(1) == b"\x00" and v.slot(2) == b"\x22"


def test_place_in_slot_bad_index():
    with pytest.raises(IndexError):
        place_in_slot(b"\x01", 3, 3)
    with pytest.raises(IndexError):
        place_in_slot(b"\x01", -1, 3)


def test_replace_slot():
    v = vec(b"\x01\x02\x03")
    assert v.replace_slot(1, b"\xff").data == b"\x01\xff\x03"
    with pytest.raises(DimensionMismatch):
        v.replace_slot(1, b"\xff\xff")


# -- parameters ----------------------------------------------------------


def test_params_gamma_is_exact():
    p = ProtocolParams(n=6, m=15)
    assert p.gamma == pytest.approx(2.5)
    assert p.gamma.numerator == 5 and p.gamma.denominator == 2


def test_params_from_gamma_ceils():
    assert ProtocolParams.from_gamma(5, 3).m == 15
    assert ProtocolParams.from_gamma(3, 2.5).m == 8


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=0, m=5),
        dict(n=5, m=4),
        dict(n=2, m=4, l_srm=100),  # not a multiple of 8
        dict(n=2, m=4, l_msg=10),
        dict(n=2, m=4, lambda_bits=32),  # below the pseudonym floor
        dict(n=2, m=4, l_srm=64, lambda_bits=128),  # l_srm < lambda
        dict(n=2, m=4, beta=-1),
        dict(n=2, m=4, max_rounds=0),
    ],
)
def test_params_rejects_invariant_violations(kwargs):
    with pytest.raises(ConfigurationError):
        ProtocolParams(**kwargs)


def test_vector_length_must_match_shape():
    with pytest.raises(DimensionMismatch):
        SlotVector(b"\x00" * 3, 16, 2)


# -- reservation tokens --------------------------------------------------


def test_srm_payload_padded():
    srm = Srm(pseudonym=b"\x01" * 8, width_bits=128)
    assert len(srm.payload) == 16
    assert srm.payload[:8] == b"\x01" * 8 and srm.payload[8:] == bytes(8)


def test_srm_rejects_zero_pseudonym():
    with pytest.raises(ConfigurationError):
        Srm(pseudonym=bytes(8), width_bits=64)


# -- collision structures ------------------------------------------------


def test_structure_normalization_and_counts():
    c = CollisionStructure((3, 1, 0, 0, 0))
    assert c == CollisionStructure((3, 1))
    assert c.participants == 5
    assert c.occupied_slots == 4
    assert c.singles == 3
    assert c.colliding_participants == 2
    assert c.collision_slots == 1
    assert c.padded(5) == (3, 1, 0, 0, 0)


def test_structure_from_occupancies():
    # occupancies 1,1,2,1 over occupied slots -> three singles, one pair
    assert CollisionStructure.from_occupancies([1, 1, 2, 1]) == CollisionStructure((3, 1))
    assert CollisionStructure.from_occupancies([]) == CollisionStructure(())


def test_structure_rejects_negative():
    with pytest.raises(ConfigurationError):
        CollisionStructure((1, -1))


# -- transcripts ---------------------------------------------------------


def test_transcript_validates_against_aggregate():
    agg = place_in_slot(b"\xaa", 1, 3)
    t = RoundTranscript(
        round_index=1,
        public_aggregate=agg,
        per_participant_bits_sent=24,
        occupied_slot_indices=frozenset({1}),
        empty_slot_indices=frozenset({0, 2}),
    )
    assert t.occupied_slot_indices == {1}
    with pytest.raises(ConfigurationError):
        RoundTranscript(1, agg, 24, frozenset({0}), frozenset({1, 2}))
    with pytest.raises(ConfigurationError):
        RoundTranscript(1, agg, 24, frozenset({1}), frozenset({0}))
