from __future__ import annotations

import pytest

from qadr.core import ConfigurationError
from qadr.keying import (
    KeyMode,
    KeySchedule,
    MissingKeyError,
    PadRequest,
    establish_keys,
    establish_otp_pads,
    expand_pad,
    fulfill,
    pair_pad,
)

SEED = b"keying-test-master"


def test_table_has_one_entry_per_pair():
    table = establish_keys(3, SEED, epoch=0)
    assert table.pair_count == 3
    assert establish_keys(7, SEED, epoch=0).pair_count == 21


def test_symmetric_lookup():
    table = establish_keys(4, SEED, epoch=2)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert table.seed(i, j) == table.seed(j, i)


def test_missing_pair_raises():
    table = establish_keys(3, SEED, epoch=0)
    with pytest.raises(MissingKeyError):
        table.seed(0, 3)
    with pytest.raises(MissingKeyError):
        table.seed(1, 1)


def test_establishment_is_deterministic():
    a = establish_keys(5, SEED, epoch=3)
    b = establish_keys(5, SEED, epoch=3)
    assert a.seeds == b.seeds


def test_epochs_share_no_seeds():
    for trial in range(100):
        master = SEED + trial.to_bytes(2, "big")
        epoch0 = establish_keys(4, master, epoch=0)
        epoch1 = establish_keys(4, master, epoch=1)
        values0 = set(epoch0.seeds.values())
        values1 = set(epoch1.seeds.values())
        assert not values0 & values1


def test_expand_pad_deterministic_and_sized():
    assert expand_pad(b"s", 128) == expand_pad(b"s", 128)
    assert len(expand_pad(b"s", 128)) == 16


def test_expand_pad_prefix_consistency():
    assert expand_pad(b"seed", 64) == expand_pad(b"seed", 128)[:8]


def test_expand_pad_rejects_bad_lengths():
    with pytest.raises(ConfigurationError):
        expand_pad(b"s", 0)
    with pytest.raises(ConfigurationError):
        expand_pad(b"s", 12)


def test_avalanche_on_one_bit_seed_flip():
    seed = bytes(16)
    flipped = b"\x01" + bytes(15)
    a = expand_pad(seed, 10_000 - 10_000 % 8)  # 9992 bits
    b = expand_pad(flipped, 10_000 - 10_000 % 8)
    differing = sum(bin(x ^ y).count("1") for x, y in zip(a, b))
    fraction = differing / (len(a) * 8)
    assert 0.45 <= fraction <= 0.55


def test_monobit_balance():
    stream = expand_pad(b"balance-seed", 100_000)
    ones = sum(bin(byte).count("1") for byte in stream)
    assert 0.49 <= ones / 100_000 <= 0.51


def test_pair_pads_agree_across_endpoints():
    table = establish_keys(5, SEED, epoch=1)
    for i in range(5):
        for j in range(i + 1, 5):
            assert pair_pad(table, i, j, 256) == pair_pad(table, j, i, 256)


def test_pad_request_validation_and_fulfill():
    table = establish_keys(3, SEED, epoch=4)
    request = PadRequest(pair=(2, 0), epoch=4, length_bits=64)
    assert request.pair == (0, 2)
    assert fulfill(table, request) == pair_pad(table, 0, 2, 64)
    with pytest.raises(ConfigurationError):
        fulfill(table, PadRequest(pair=(0, 1), epoch=5, length_bits=64))
    with pytest.raises(ConfigurationError):
        PadRequest(pair=(1, 1), epoch=0, length_bits=64)
    with pytest.raises(ConfigurationError):
        PadRequest(pair=(0, 1), epoch=0, length_bits=63)


def test_otp_mode_truncates_full_length_pads():
    table = establish_otp_pads(3, SEED, epoch=0, pad_bits=256)
    pad = pair_pad(table, 0, 1, 128)
    assert pad == table.seed(0, 1)[:16]
    with pytest.raises(ConfigurationError):
        pair_pad(table, 0, 1, 512)


def test_key_schedule_modes_and_budget():
    prf = KeySchedule(master_seed=SEED, n=4)
    assert prf.table(0).mode is KeyMode.PRF
    assert prf.key_bits_per_epoch() == 256 * 6
    otp = KeySchedule(master_seed=SEED, n=4, mode=KeyMode.OTP, otp_pad_bits=1024)
    assert otp.table(0).mode is KeyMode.OTP
    assert otp.key_bits_per_epoch() == 1024 * 6
    with pytest.raises(ConfigurationError):
        KeySchedule(master_seed=SEED, n=4, mode=KeyMode.OTP)
