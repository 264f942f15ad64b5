"""Canonical Huffman coding of integer symbols with a packed big-endian-bit stream.

Code assignment is fully determined by the code lengths (canonical order:
shorter codes first, ties broken by symbol value), so a decoder only needs
the (symbol, length) table. Tree construction breaks frequency ties by
insertion order, making the whole pipeline deterministic.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit

from .errors import IntegrityError, ParameterError

MAX_CODE_LEN = 64


def code_lengths(freqs: np.ndarray) -> np.ndarray:
    """Huffman code length per symbol (0 for unused symbols).

    A lone used symbol gets length 1 so the payload stays decodable.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    if np.any(freqs < 0):
        raise ParameterError("frequencies must be non-negative")
    lengths = np.zeros(len(freqs), dtype=np.uint8)
    used = np.flatnonzero(freqs > 0)
    if used.size == 0:
        return lengths
    if used.size == 1:
        lengths[used[0]] = 1
        return lengths
    counter = 0
    heap = []
    for sym in used:
        heap.append((int(freqs[sym]), counter, int(sym)))
        counter += 1
    heapq.heapify(heap)
    while len(heap) > 1:
        f1, _, left = heapq.heappop(heap)
        f2, _, right = heapq.heappop(heap)
        heapq.heappush(heap, (f1 + f2, counter, (left, right)))
        counter += 1
    stack = [(heap[0][2], 0)]
    while stack:
        node, depth = stack.pop()
        if isinstance(node, tuple):
            stack.append((node[0], depth + 1))
            stack.append((node[1], depth + 1))
        else:
            lengths[node] = depth
    return lengths


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Codeword per symbol in canonical order; unused symbols get 0."""
    lengths = np.asarray(lengths, dtype=np.uint8)
    if lengths.size and lengths.max() > MAX_CODE_LEN:
        raise ParameterError("code length exceeds 64 bits")
    codes = np.zeros(len(lengths), dtype=np.uint64)
    order = sorted((int(lengths[s]), s) for s in np.flatnonzero(lengths > 0))
    code = 0
    prev_len = 0
    for length, sym in order:
        code <<= length - prev_len
        codes[sym] = code
        code += 1
        prev_len = length
    return codes


def _decode_tables(lengths: np.ndarray):
    """Per-length (count, first_code, offset) tables plus symbols in canonical order."""
    lengths = np.asarray(lengths, dtype=np.uint8)
    max_len = int(lengths.max()) if lengths.size else 0
    counts = np.zeros(max_len + 1, dtype=np.int64)
    for length in lengths[lengths > 0]:
        counts[length] += 1
    first_code = np.zeros(max_len + 1, dtype=np.int64)
    offsets = np.zeros(max_len + 1, dtype=np.int64)
    code = 0
    offset = 0
    for length in range(1, max_len + 1):
        first_code[length] = code
        offsets[length] = offset
        code = (code + counts[length]) << 1
        offset += counts[length]
    order = sorted((int(lengths[s]), s) for s in np.flatnonzero(lengths > 0))
    symbols_sorted = np.array([s for _, s in order], dtype=np.int64)
    return counts, first_code, offsets, symbols_sorted


@njit(cache=True)
def _encode_kernel(symbols, codes, lengths, out):
    bitpos = 0
    for idx in range(symbols.shape[0]):
        sym = symbols[idx]
        code = codes[sym]
        length = lengths[sym]
        for k in range(length - 1, -1, -1):
            if (code >> np.uint64(k)) & np.uint64(1):
                out[bitpos >> 3] |= np.uint8(1 << (7 - (bitpos & 7)))
            bitpos += 1
    return bitpos


@njit(cache=True)
def _decode_kernel(payload, bit_length, counts, first_code, offsets, symbols_sorted, out):
    max_len = counts.shape[0] - 1
    bitpos = 0
    for idx in range(out.shape[0]):
        code = 0
        length = 0
        while True:
            if bitpos >= bit_length:
                return 2  # ran out of bits mid-symbol
            bit = (payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
            bitpos += 1
            code = (code << 1) | bit
            length += 1
            if length > max_len:
                return 1  # no codeword this long: wrong codebook
            rel = code - first_code[length]
            if 0 <= rel < counts[length]:
                out[idx] = symbols_sorted[offsets[length] + rel]
                break
    if bitpos != bit_length:
        return 3  # trailing bits beyond the last symbol
    return 0


def encode(symbols: np.ndarray, lengths: np.ndarray):
    """Pack symbols into a bitstream; returns (payload bytes, exact bit length)."""
    symbols = np.ascontiguousarray(symbols, dtype=np.int64)
    lengths = np.ascontiguousarray(lengths, dtype=np.uint8)
    if symbols.size == 0:
        return b"", 0
    if symbols.min() < 0 or symbols.max() >= len(lengths):
        raise ParameterError("symbol outside the codebook alphabet")
    per_symbol = lengths[symbols].astype(np.int64)
    if np.any(per_symbol == 0):
        raise ParameterError("symbol with zero frequency cannot be encoded")
    total_bits = int(per_symbol.sum())
    out = np.zeros((total_bits + 7) // 8, dtype=np.uint8)
    written = _encode_kernel(symbols, canonical_codes(lengths), lengths, out)
    assert written == total_bits
    return out.tobytes(), total_bits


def decode(payload: bytes, bit_length: int, lengths: np.ndarray, count: int) -> np.ndarray:
    """Recover `count` symbols; raises IntegrityError on codebook/payload mismatch."""
    if count == 0:
        if bit_length != 0:
            raise IntegrityError("payload bits present but zero symbols expected")
        return np.zeros(0, dtype=np.int64)
    if bit_length > 8 * len(payload):
        raise IntegrityError("payload shorter than its declared bit length")
    lengths = np.ascontiguousarray(lengths, dtype=np.uint8)
    if not np.any(lengths > 0):
        raise IntegrityError("empty codebook cannot decode symbols")
    counts, first_code, offsets, symbols_sorted = _decode_tables(lengths)
    out = np.empty(count, dtype=np.int64)
    status = _decode_kernel(np.frombuffer(payload, dtype=np.uint8), bit_length,
                            counts, first_code, offsets, symbols_sorted, out)
    if status != 0:
        reasons = {1: "invalid codeword", 2: "payload exhausted mid-symbol",
                   3: "trailing bits after last symbol"}
        raise IntegrityError(f"Huffman decode failed: {reasons[status]}")
    return out
