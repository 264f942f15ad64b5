import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossyckpt import huffman as hf
from lossyckpt.errors import IntegrityError, ParameterError


def roundtrip(symbols, alphabet):
    freqs = np.bincount(symbols, minlength=alphabet)
    lengths = hf.code_lengths(freqs)
    payload, bits = hf.encode(np.asarray(symbols), lengths)
    return hf.decode(payload, bits, lengths, len(symbols)), lengths, bits


def test_all_identical_symbols_pack_to_one_bit_each():
    symbols = np.full(1000, 7)
    decoded, lengths, bits = roundtrip(symbols, 8)
    assert bits == 1000
    assert np.array_equal(decoded, symbols)


def test_two_symbol_skew_mean_length():
    symbols = np.array([0] * 900 + [1] * 100)
    decoded, _, bits = roundtrip(symbols, 2)
    assert np.array_equal(decoded, symbols)
    assert bits / len(symbols) <= 1.5


def test_canonical_codes_frozen_case():
    # freqs {a:1, b:1, c:2} -> lengths (2, 2, 1), canonical codes c=0, a=10, b=11
    lengths = hf.code_lengths(np.array([1, 1, 2]))
    assert list(lengths) == [2, 2, 1]
    assert list(hf.canonical_codes(lengths)) == [0b10, 0b11, 0]


def test_deterministic_under_frequency_ties():
    freqs = np.array([5, 5, 5, 5])
    first = hf.code_lengths(freqs)
    assert np.array_equal(first, hf.code_lengths(freqs))
    assert np.array_equal(hf.canonical_codes(first), hf.canonical_codes(first))


def test_empty_input():
    payload, bits = hf.encode(np.array([], dtype=np.int64), np.array([], dtype=np.uint8))
    assert payload == b"" and bits == 0
    assert len(hf.decode(b"", 0, np.array([1], dtype=np.uint8), 0)) == 0


def test_mean_length_close_to_entropy(rng):
    probs = np.array([0.5, 0.25, 0.125, 0.0625, 0.0625])
    symbols = rng.choice(5, size=20000, p=probs)
    decoded, _, bits = roundtrip(symbols, 5)
    assert np.array_equal(decoded, symbols)
    entropy = -np.sum(probs * np.log2(probs))
    assert bits / len(symbols) <= entropy + 1.0


def test_wrong_codebook_detected(rng):
    symbols = rng.integers(0, 16, size=500)
    freqs = np.bincount(symbols, minlength=16)
    lengths = hf.code_lengths(freqs)
    payload, bits = hf.encode(symbols, lengths)
    wrong = hf.code_lengths(np.arange(1, 5))  # different alphabet entirely
    with pytest.raises(IntegrityError):
        hf.decode(payload, bits, wrong, len(symbols))


def test_truncated_payload_detected(rng):
    symbols = rng.integers(0, 16, size=500)
    freqs = np.bincount(symbols, minlength=16)
    lengths = hf.code_lengths(freqs)
    payload, bits = hf.encode(symbols, lengths)
    with pytest.raises(IntegrityError):
        hf.decode(payload[: len(payload) // 2], bits, lengths, len(symbols))


def test_encode_rejects_unknown_symbol():
    lengths = hf.code_lengths(np.array([3, 3]))
    with pytest.raises(ParameterError):
        hf.encode(np.array([0, 2]), lengths)


def test_negative_frequency_rejected():
    with pytest.raises(ParameterError):
        hf.code_lengths(np.array([1, -2]))


@settings(deadline=None, max_examples=50)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=2000))
def test_round_trip_random_symbols(symbol_list):
    symbols = np.array(symbol_list, dtype=np.int64)
    decoded, _, _ = roundtrip(symbols, 41)
    assert np.array_equal(decoded, symbols)
