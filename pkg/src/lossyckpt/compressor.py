"""Error-bounded lossy compression of float64 vectors with PSNR estimation and control.

Pipeline: order-1 predecessor prediction over the *decompressed* stream,
uniform quantization of the prediction errors (bin width = 2 * eb_abs, bin 0
covering [-eb_abs, +eb_abs)), canonical Huffman coding of the bin indices.
Prediction errors outside bin coverage are escaped verbatim, so the
elementwise bound |original - decompressed| <= eb_abs holds unconditionally.

Because compression reconstructs each value exactly as decompression will,
the pointwise compression error equals the quantization error, and the
overall distortion is set entirely by the bin width: for a well-spread error
distribution, PSNR ~= 20*log10(vr/eb_abs) + 10*log10(3). Inverting that
estimate gives the fixed-PSNR mode: eb_rel = sqrt(3) * 10^(-PSNR/20).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import huffman
from .errors import IntegrityError, ParameterError, UndefinedPsnrError

BLOCK_MAGIC = b"LCKP0001"
BLOCK_VERSION = 1
ESCAPE_CODE = 0
DEFAULT_N_BINS_HALF = 32768  # 16-bit code space including the escape code

MODE_ABSOLUTE = "absolute"
MODE_RELATIVE = "value_range_relative"
MODE_FIXED_PSNR = "fixed_psnr"


def estimate_psnr_from_bound(eb_rel: float) -> float:
    """PSNR in dB predicted for a value-range-relative bound: -20*log10(eb_rel) + 10*log10(3)."""
    if eb_rel <= 0:
        raise ParameterError("eb_rel must be positive")
    return -20.0 * math.log10(eb_rel) + 10.0 * math.log10(3.0)


def bound_from_target_psnr(psnr_db: float) -> float:
    """Value-range-relative bound achieving a target PSNR: sqrt(3) * 10^(-PSNR/20)."""
    if psnr_db <= 0:
        raise ParameterError("target PSNR must be positive")
    return math.sqrt(3.0) * 10.0 ** (-psnr_db / 20.0)


def psnr_from_bin_width(bin_width: float, value_range: float) -> float:
    """General uniform-quantizer estimate: 20*log10(vr/delta) + 10*log10(12)."""
    if bin_width <= 0 or value_range <= 0:
        raise ParameterError("bin_width and value_range must be positive")
    return 20.0 * math.log10(value_range / bin_width) + 10.0 * math.log10(12.0)


def estimate_mse_general(bin_widths, densities) -> float:
    """MSE estimate (1/6) * sum(delta_i^3 * P(m_i)) over one symmetric half of the bins.

    For uniform bins whose densities sum to 1/(2*delta) this reduces to delta^2/12.
    """
    bin_widths = np.asarray(bin_widths, dtype=np.float64)
    densities = np.asarray(densities, dtype=np.float64)
    if bin_widths.shape != densities.shape:
        raise ParameterError("bin_widths and densities must have equal length")
    if np.any(bin_widths <= 0) or np.any(densities < 0):
        raise ParameterError("bin widths must be positive and densities non-negative")
    return float(np.sum(bin_widths ** 3 * densities) / 6.0)


@dataclass(frozen=True)
class DistortionStats:
    mse: float
    nrmse: float
    psnr_db: float


def measured_psnr(original, decompressed) -> DistortionStats:
    """Exact MSE/NRMSE/PSNR of a reconstruction; PSNR is +inf when MSE is zero."""
    original = np.asarray(original, dtype=np.float64)
    decompressed = np.asarray(decompressed, dtype=np.float64)
    if original.shape != decompressed.shape:
        raise ParameterError("arrays must have equal length")
    vr = float(original.max() - original.min()) if original.size else 0.0
    if vr == 0.0:
        raise UndefinedPsnrError("value range is zero; PSNR undefined")
    mse = float(np.mean((original - decompressed) ** 2))
    if mse == 0.0:
        return DistortionStats(0.0, 0.0, math.inf)
    nrmse = math.sqrt(mse) / vr
    return DistortionStats(mse, nrmse, -20.0 * math.log10(nrmse))


@dataclass(frozen=True)
class CompressorConfig:
    """Quantizer setup: one error-control mode plus the bin budget."""

    mode: str
    eb_abs: Optional[float] = None
    eb_rel: Optional[float] = None
    target_psnr_db: Optional[float] = None
    n_bins_half: int = DEFAULT_N_BINS_HALF
    predictor_order: int = 1
    record_traces: bool = False  # keep (pe, reconstructed pe) for the error-identity check

    def __post_init__(self):
        if self.mode == MODE_ABSOLUTE:
            if self.eb_abs is None or self.eb_abs <= 0 or not math.isfinite(self.eb_abs):
                raise ParameterError("absolute mode needs finite eb_abs > 0")
        elif self.mode == MODE_RELATIVE:
            if self.eb_rel is None or not 0.0 < self.eb_rel < 1.0:
                raise ParameterError("value_range_relative mode needs 0 < eb_rel < 1")
        elif self.mode == MODE_FIXED_PSNR:
            if self.target_psnr_db is None or self.target_psnr_db <= 0:
                raise ParameterError("fixed_psnr mode needs target_psnr_db > 0")
        else:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.n_bins_half < 1:
            raise ParameterError("n_bins_half must be >= 1")
        if self.predictor_order != 1:
            raise ParameterError("only the order-1 predecessor predictor is implemented")

    @classmethod
    def absolute(cls, eb_abs, **kw):
        return cls(MODE_ABSOLUTE, eb_abs=eb_abs, **kw)

    @classmethod
    def value_range_relative(cls, eb_rel, **kw):
        return cls(MODE_RELATIVE, eb_rel=eb_rel, **kw)

    @classmethod
    def fixed_psnr(cls, target_psnr_db, **kw):
        return cls(MODE_FIXED_PSNR, target_psnr_db=target_psnr_db, **kw)

    def resolve_bounds(self, value_range: float):
        """(eb_abs, eb_rel) for a concrete data range; fixed-PSNR inverts the estimate."""
        if self.mode == MODE_ABSOLUTE:
            eb_abs = float(self.eb_abs)
            eb_rel = eb_abs / value_range if value_range > 0 else math.nan
            return eb_abs, eb_rel
        if self.mode == MODE_RELATIVE:
            eb_rel = float(self.eb_rel)
        else:
            eb_rel = bound_from_target_psnr(self.target_psnr_db)
        return eb_rel * value_range, eb_rel


@dataclass(frozen=True)
class QuantizerModel:
    """Uniform midpoint quantizer over prediction errors.

    Bin m covers [(2m-1)*eb, (2m+1)*eb) where eb = bin_width/2; reconstruction
    uses the bin midpoint m * bin_width.
    """

    bin_width: float
    value_range: float
    n_bins_half: int = DEFAULT_N_BINS_HALF

    def __post_init__(self):
        if self.bin_width <= 0 or self.value_range < 0:
            raise ParameterError("bin_width must be positive and value_range non-negative")

    def bin_index(self, errors) -> np.ndarray:
        errors = np.asarray(errors, dtype=np.float64)
        return np.floor(errors / self.bin_width + 0.5).astype(np.int64)

    def midpoint(self, index) -> np.ndarray:
        return np.asarray(index, dtype=np.float64) * self.bin_width

    def quantize(self, errors) -> np.ndarray:
        """Reconstructed errors (bin midpoints); no escape handling."""
        return self.midpoint(self.bin_index(errors))


def _pack_codebook(code_lengths: np.ndarray) -> bytes:
    """u32 byte length + canonical codebook as per-length counts plus sorted symbols.

    Layout after the length prefix: u8 max code length, u16 symbol count per
    length (1..max), then the u16 symbols in canonical (length, symbol) order.
    Code lengths alone determine the canonical codewords.
    """
    used = np.flatnonzero(code_lengths > 0)
    if used.size == 0:
        return struct.pack("<I", 0)
    if used.max() >= 1 << 16:
        raise ParameterError("code symbol exceeds the 16-bit wire format")
    order = sorted((int(code_lengths[s]), int(s)) for s in used)
    max_len = order[-1][0]
    counts = np.zeros(max_len, dtype="<u2")
    for length, _ in order:
        counts[length - 1] += 1
    blob = struct.pack("<B", max_len) + counts.tobytes()
    blob += np.array([s for _, s in order], dtype="<u2").tobytes()
    return struct.pack("<I", len(blob)) + blob


def _unpack_codebook(blob: bytes) -> np.ndarray:
    if len(blob) == 0:
        return np.zeros(0, dtype=np.uint8)
    if len(blob) < 1:
        raise IntegrityError("malformed codebook header")
    (max_len,) = struct.unpack_from("<B", blob, 0)
    if max_len == 0 or len(blob) < 1 + 2 * max_len:
        raise IntegrityError("malformed codebook header")
    counts = np.frombuffer(blob, dtype="<u2", count=max_len, offset=1)
    n_symbols = int(counts.sum())
    if len(blob) != 1 + 2 * max_len + 2 * n_symbols:
        raise IntegrityError("codebook symbol list disagrees with counts")
    symbols = np.frombuffer(blob, dtype="<u2", offset=1 + 2 * max_len).astype(np.int64)
    lengths = np.zeros(int(symbols.max()) + 1 if n_symbols else 0, dtype=np.uint8)
    pos = 0
    for length in range(1, max_len + 1):
        group = symbols[pos:pos + int(counts[length - 1])]
        if group.size > 1 and np.any(np.diff(group) <= 0):
            raise IntegrityError("codebook symbols not in canonical order")
        if np.any(lengths[group] != 0):
            raise IntegrityError("codebook repeats a symbol")
        lengths[group] = length
        pos += group.size
    return lengths


@dataclass(frozen=True)
class CompressedBlock:
    """Self-describing compressed vector (see to_bytes for the wire layout).

    Code symbols are zigzag-mapped bin indices shifted by one (symbol 0 is the
    escape marker), so decoding needs no knowledge of the encoder's bin budget.
    """

    n: int
    eb_abs: float
    value_range: float
    first_value: float
    code_lengths: np.ndarray        # Huffman length per code symbol, 0 = unused
    payload: bytes
    payload_bits: int
    escape_indices: np.ndarray      # positions stored verbatim
    escape_values: np.ndarray
    version: int = BLOCK_VERSION
    traces: Optional[tuple] = field(default=None, compare=False)  # (pe, reconstructed pe)

    @property
    def nbytes(self) -> int:
        return len(self.to_bytes())

    def to_bytes(self) -> bytes:
        """Little-endian layout: magic, u32 version, u64 n, f64 eb_abs, f64 vr,
        f64 first_value, u32 codebook byte length + canonical codebook (see
        _pack_codebook), u64 escape count + (u64 index, f64 value) pairs,
        u64 payload bit length + payload bytes. Bit-exact across platforms.
        """
        out = bytearray()
        out += BLOCK_MAGIC
        out += struct.pack("<IQddd", self.version, self.n, self.eb_abs,
                           self.value_range, self.first_value)
        out += _pack_codebook(self.code_lengths)
        out += struct.pack("<Q", len(self.escape_indices))
        for idx, val in zip(self.escape_indices, self.escape_values):
            out += struct.pack("<Qd", int(idx), float(val))
        out += struct.pack("<Q", self.payload_bits)
        out += self.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CompressedBlock":
        if len(blob) < 8 or blob[:8] != BLOCK_MAGIC:
            raise IntegrityError("not a compressed block (bad magic)")
        off = 8
        try:
            version, n, eb_abs, vr, first_value = struct.unpack_from("<IQddd", blob, off)
            off += struct.calcsize("<IQddd")
            if version != BLOCK_VERSION:
                raise IntegrityError(f"unsupported block version {version}")
            (cb_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            if off + cb_len > len(blob):
                raise IntegrityError("codebook length inconsistent with payload")
            lengths = _unpack_codebook(blob[off:off + cb_len])
            off += cb_len
            (n_esc,) = struct.unpack_from("<Q", blob, off)
            off += 8
            esc_idx = np.empty(n_esc, dtype=np.int64)
            esc_val = np.empty(n_esc, dtype=np.float64)
            for e in range(n_esc):
                esc_idx[e], esc_val[e] = struct.unpack_from("<Qd", blob, off)
                off += 16
            (payload_bits,) = struct.unpack_from("<Q", blob, off)
            off += 8
        except struct.error as exc:
            raise IntegrityError(f"truncated block: {exc}") from None
        payload = blob[off:]
        if len(payload) != (payload_bits + 7) // 8:
            raise IntegrityError("payload byte count disagrees with bit length")
        return cls(n=n, eb_abs=eb_abs, value_range=vr, first_value=first_value,
                   code_lengths=lengths, payload=payload, payload_bits=payload_bits,
                   escape_indices=esc_idx, escape_values=esc_val, version=version)

    @property
    def compression_ratio(self) -> float:
        return 8.0 * self.n / self.nbytes


def predict_lorenzo1(decompressed_prefix, index: int) -> float:
    """Order-1 prediction: the decompressed value immediately before `index`.

    Compression and decompression share this rule, so predictions match exactly
    on both sides.
    """
    if index < 1:
        raise ParameterError("index 0 is stored verbatim and has no prediction")
    return float(decompressed_prefix[index - 1])


@njit(cache=True)
def _compress_kernel(data, eb_abs, n_bins_half, record, codes, recon,
                     pe_out, pe_rec_out, esc_idx_buf):
    n = data.shape[0]
    delta = 2.0 * eb_abs
    prev = data[0]
    recon[0] = prev
    n_esc = 0
    max_m = float(n_bins_half - 1)
    for i in range(1, n):
        v = data[i]
        pred = prev
        pe = v - pred
        q = pe / delta + 0.5
        escape = True
        m = 0
        cand = prev
        if q >= -max_m and q < max_m + 1.0:
            m = int(np.floor(q))
            cand = pred if m == 0 else pred + m * delta
            # guard: quantized reconstruction must honor the bound bit-for-bit
            if abs(v - cand) <= eb_abs:
                escape = False
        if escape:
            codes[i - 1] = ESCAPE_CODE
            esc_idx_buf[n_esc] = i
            n_esc += 1
            prev = v
        else:
            zz = 2 * m if m >= 0 else -2 * m - 1
            codes[i - 1] = zz + 1
            prev = cand
        recon[i] = prev
        if record:
            pe_out[i - 1] = pe
            pe_rec_out[i - 1] = prev - pred
    return n_esc


@njit(cache=True)
def _decompress_kernel(codes, first_value, delta, escape_values, out):
    prev = first_value
    out[0] = prev
    e = 0
    for i in range(1, out.shape[0]):
        c = codes[i - 1]
        if c == ESCAPE_CODE:
            if e >= escape_values.shape[0]:
                return -1
            prev = escape_values[e]
            e += 1
        else:
            zz = c - 1
            m = (zz >> 1) ^ -(zz & 1)
            if m != 0:
                prev = prev + m * delta
        out[i] = prev
    return e


def compress(data, config: CompressorConfig) -> CompressedBlock:
    """Compress a float64 vector under the configured error bound."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.size < 1:
        raise ParameterError("cannot compress an empty vector")
    if not np.all(np.isfinite(data)):
        raise ParameterError("input contains NaN or Inf")
    vr = float(data.max() - data.min())
    eb_abs, _ = config.resolve_bounds(vr)
    empty_i = np.zeros(0, dtype=np.int64)
    empty_f = np.zeros(0, dtype=np.float64)
    if vr == 0.0 or data.size == 1:
        # constant field / single value: the first value reproduces everything
        return CompressedBlock(n=int(data.size), eb_abs=eb_abs, value_range=vr,
                               first_value=float(data[0]),
                               code_lengths=np.zeros(0, dtype=np.uint8),
                               payload=b"", payload_bits=0,
                               escape_indices=empty_i, escape_values=empty_f,
                               traces=(empty_f, empty_f) if config.record_traces else None)
    if not math.isfinite(2.0 * eb_abs):
        raise ParameterError("error bound too large to quantize")
    n = data.size
    codes = np.empty(n - 1, dtype=np.int64)
    recon = np.empty(n, dtype=np.float64)
    trace_len = n - 1 if config.record_traces else 1
    pe = np.empty(trace_len, dtype=np.float64)
    pe_rec = np.empty(trace_len, dtype=np.float64)
    esc_buf = np.empty(n, dtype=np.int64)
    n_esc = _compress_kernel(data, eb_abs, config.n_bins_half,
                             config.record_traces, codes, recon, pe, pe_rec, esc_buf)
    esc_idx = esc_buf[:n_esc].copy()
    esc_val = data[esc_idx].copy() if n_esc else empty_f
    freqs = np.bincount(codes, minlength=2 * config.n_bins_half)
    lengths = huffman.code_lengths(freqs)
    payload, bits = huffman.encode(codes, lengths)
    return CompressedBlock(n=n, eb_abs=eb_abs, value_range=vr, first_value=float(data[0]),
                           code_lengths=lengths, payload=payload, payload_bits=bits,
                           escape_indices=esc_idx, escape_values=esc_val,
                           traces=(pe, pe_rec) if config.record_traces else None)


def decompress(block: CompressedBlock) -> np.ndarray:
    """Reconstruct the vector; every non-escaped value is within eb_abs of the original."""
    if block.n < 1:
        raise IntegrityError("block declares zero elements")
    out = np.empty(block.n, dtype=np.float64)
    if block.payload_bits == 0 and block.code_lengths.size == 0:
        if len(block.escape_indices):
            raise IntegrityError("constant block cannot carry escapes")
        out[:] = block.first_value
        return out
    codes = huffman.decode(block.payload, block.payload_bits, block.code_lengths,
                           block.n - 1)
    n_declared = len(block.escape_indices)
    used = _decompress_kernel(codes, block.first_value, 2.0 * block.eb_abs,
                              block.escape_values, out)
    if used < 0 or used != n_declared:
        raise IntegrityError(f"escape count mismatch: codes need {used}, header has {n_declared}")
    if n_declared and not np.array_equal(np.flatnonzero(codes == ESCAPE_CODE) + 1,
                                         block.escape_indices):
        raise IntegrityError("escape positions disagree with escape codes")
    return out


def error_identity_check(original, block: CompressedBlock) -> float:
    """Max |(X - X~) - (X_pe - X~_pe)|: how exactly compression error equals quantization error.

    Requires the block to have been compressed with record_traces=True.
    """
    if block.traces is None:
        raise ParameterError("block was compressed without record_traces=True")
    original = np.asarray(original, dtype=np.float64)
    if original.size != block.n:
        raise ParameterError("original length does not match block")
    reconstructed = decompress(block)
    overall = original - reconstructed
    pe, pe_rec = block.traces
    stage2 = pe - pe_rec
    if block.n == 1 or pe.size == 0:
        return float(np.max(np.abs(overall)))
    deviation = overall[1:] - stage2
    return float(max(np.max(np.abs(deviation)), abs(overall[0])))
