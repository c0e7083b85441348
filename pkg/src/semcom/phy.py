"""Traditional (syntactic) transmission chain.

Pipeline per packet: uniform fixed-point quantization of the semantic
coordinates, rate-1/2 convolutional coding (K=7, generators 133/171 octal,
flushed with 6 zero tail bits), Gray-mapped BPSK/16-QAM/256-QAM at unit
average symbol energy, an AWGN or Rician block-fading channel with perfect
CSI equalization, and full-traceback Viterbi decoding driven by max-log bit
LLRs (hard-decision demodulation is provided alongside for bit-level
accounting).

The default packet carries 20 semantic representations of 4 coordinates at
8 bits each: an 80-byte payload that codes into 160 bytes on the wire.

Everything is deterministic given the input bits and the supplied random
generator; batched helpers (prefixed ``_``) process many packets at once and
are exactly equivalent to the per-packet functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .space import SemanticPoint

__all__ = [
    "QuantizerSpec",
    "CodecSpec",
    "ModulationSpec",
    "ChannelSpec",
    "PacketSpec",
    "PhyConfig",
    "quantize",
    "dequantize",
    "conv_encode",
    "viterbi_decode",
    "modulate",
    "demodulate",
    "soft_demodulate",
    "channel_apply",
    "esn0_from_ebn0",
    "transmit_packet",
]

_BITS_PER_SYMBOL = {"BPSK": 1, "QAM16": 4, "QAM256": 8}


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform fixed-point quantizer over [0, 1] per coordinate."""

    bits_per_dim: int = 8

    def __post_init__(self):
        if not 1 <= self.bits_per_dim <= 16:
            raise ValueError(
                f"bits_per_dim must be in [1, 16], got {self.bits_per_dim}"
            )

    @property
    def levels(self) -> int:
        return (1 << self.bits_per_dim) - 1


@dataclass(frozen=True)
class CodecSpec:
    """Rate-1/2 convolutional code; defaults to the 802.11 K=7 133/171 code."""

    constraint_length: int = 7
    generators: tuple[int, int] = (0o133, 0o171)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(int(g) for g in self.generators))
        if len(self.generators) != 2:
            raise ValueError("rate-1/2 code needs exactly two generators")
        if self.constraint_length < 2:
            raise ValueError("constraint length must be at least 2")
        limit = 1 << self.constraint_length
        if any(not 0 < g < limit for g in self.generators):
            raise ValueError(
                f"generators must fit in {self.constraint_length} taps, "
                f"got {[oct(g) for g in self.generators]}"
            )

    @property
    def rate(self) -> float:
        return 0.5

    @property
    def tail_bits(self) -> int:
        return self.constraint_length - 1


@dataclass(frozen=True)
class ModulationSpec:
    """Gray-mapped square constellation at unit average symbol energy."""

    scheme: str = "BPSK"

    def __post_init__(self):
        if self.scheme not in _BITS_PER_SYMBOL:
            raise ValueError(
                f"unknown modulation {self.scheme!r}; "
                f"choose from {sorted(_BITS_PER_SYMBOL)}"
            )

    @property
    def bits_per_symbol(self) -> int:
        return _BITS_PER_SYMBOL[self.scheme]

    @property
    def order(self) -> int:
        return 1 << self.bits_per_symbol


@dataclass(frozen=True)
class ChannelSpec:
    """AWGN or Rician fading with perfect-CSI equalization at the receiver.

    Rician fading draws one coefficient per call in ``block`` mode (the packet
    pipeline calls once per packet) or one per symbol in ``symbol`` mode.
    """

    model: str = "awgn"
    k_db: float = 6.0
    fading: str = "block"

    def __post_init__(self):
        if self.model not in ("awgn", "rician"):
            raise ValueError(f"unknown channel model {self.model!r}")
        if self.fading not in ("block", "symbol"):
            raise ValueError(f"unknown fading granularity {self.fading!r}")
        if not math.isfinite(self.k_db):
            raise ValueError("Rician K factor must be finite (in dB)")


@dataclass(frozen=True)
class PacketSpec:
    """Packet geometry: how many representations ride in one codeword."""

    reps_per_packet: int = 20
    dims_per_rep: int = 4

    def __post_init__(self):
        if self.reps_per_packet < 1 or self.dims_per_rep < 1:
            raise ValueError("packet geometry fields must be positive")

    def payload_bits(self, bits_per_dim: int) -> int:
        return self.reps_per_packet * self.dims_per_rep * bits_per_dim


@dataclass(frozen=True)
class PhyConfig:
    """Bundle of all traditional-chain parameters."""

    quantizer: QuantizerSpec = field(default_factory=QuantizerSpec)
    codec: CodecSpec = field(default_factory=CodecSpec)
    modulation: ModulationSpec = field(default_factory=ModulationSpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    packet: PacketSpec = field(default_factory=PacketSpec)

    def __post_init__(self):
        if self.payload_bits % 8 != 0:
            raise ValueError(
                f"packet payload of {self.payload_bits} bits does not fill "
                f"whole bytes"
            )

    @property
    def payload_bits(self) -> int:
        return self.packet.payload_bits(self.quantizer.bits_per_dim)

    @property
    def payload_bytes(self) -> int:
        return self.payload_bits // 8


def esn0_from_ebn0(ebn0_db: float, m: ModulationSpec, code_rate: float) -> float:
    """Symbol SNR from information-bit SNR: Es/N0 = Eb/N0 + 10 log10(k * r)."""
    return ebn0_db + 10.0 * math.log10(m.bits_per_symbol * code_rate)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def _quantize_codes(values: np.ndarray, q: QuantizerSpec) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("quantizer input must lie in [0, 1] per coordinate")
    # round half up for a platform-independent rule
    return np.floor(v * q.levels + 0.5).astype(np.uint16)


def _codes_to_values(codes: np.ndarray, q: QuantizerSpec) -> np.ndarray:
    return codes.astype(float) / q.levels


def _codes_to_bits(codes: np.ndarray, bits: int) -> np.ndarray:
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint16)  # MSB first
    out = (codes[..., None] >> shifts) & 1
    return out.reshape(*codes.shape[:-1], codes.shape[-1] * bits).astype(np.uint8)

def _bits_to_codes(bits: np.ndarray, nbits: int) -> np.ndarray:
    b = bits.reshape(*bits.shape[:-1], -1, nbits).astype(np.uint16)
    weights = (1 << np.arange(nbits - 1, -1, -1, dtype=np.uint16))
    return b @ weights


def quantize(z: SemanticPoint, q: QuantizerSpec) -> bytes:
    """Pack a point into bytes: dimensions in order, MSB-first within codes,
    big-endian bit packing within bytes."""
    codes = _quantize_codes(z.flat(), q)
    bits = _codes_to_bits(codes, q.bits_per_dim)
    return np.packbits(bits).tobytes()


def dequantize(data: bytes, q: QuantizerSpec, space) -> SemanticPoint:
    """Inverse of :func:`quantize` for the given space's dimension count."""
    n = space.n_dims * q.bits_per_dim
    raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if raw.size < n:
        raise ValueError(
            f"need {n} bits for {space.n_dims} coordinates, got {raw.size}"
        )
    codes = _bits_to_codes(raw[:n], q.bits_per_dim)
    return SemanticPoint.from_flat(space, _codes_to_values(codes, q))


# ---------------------------------------------------------------------------
# convolutional code
# ---------------------------------------------------------------------------

_TRELLIS_CACHE: dict = {}


def _trellis(codec: CodecSpec):
    """Precomputed transition tables.

    State s holds the previous K-1 input bits, the most recent in the top
    bit.  For each next state: its two predecessor states, the input bit that
    reaches it, and the expected output dibit codes along both branches.
    """
    key = (codec.constraint_length, codec.generators)
    if key in _TRELLIS_CACHE:
        return _TRELLIS_CACHE[key]
    K = codec.constraint_length
    n_states = 1 << (K - 1)
    g0, g1 = codec.generators
    code = np.empty((n_states, 2), dtype=np.int64)
    for s in range(n_states):
        for b in (0, 1):
            window = (b << (K - 1)) | s
            o0 = bin(window & g0).count("1") & 1
            o1 = bin(window & g1).count("1") & 1
            code[s, b] = (o0 << 1) | o1
    nxt = np.arange(n_states)
    in_bit = nxt >> (K - 2)
    pred0 = (nxt & (n_states // 2 - 1)) << 1
    pred1 = pred0 | 1
    exp0 = code[pred0, in_bit]
    exp1 = code[pred1, in_bit]
    tables = (n_states, pred0, pred1, exp0, exp1)
    _TRELLIS_CACHE[key] = tables
    return tables


def _conv_encode_batch(payload: np.ndarray, codec: CodecSpec) -> np.ndarray:
    """Encode payload bit rows (B, L) -> (B, 2*(L + tail))."""
    payload = np.atleast_2d(np.asarray(payload, dtype=np.uint8))
    K = codec.constraint_length
    tail = codec.tail_bits
    B, L = payload.shape
    T = L + tail
    x = np.zeros((B, T + tail), dtype=np.uint8)
    x[:, tail : tail + L] = payload  # tail zeros flush the register
    out = np.zeros((B, 2 * T), dtype=np.uint8)
    for gi, g in enumerate(codec.generators):
        acc = np.zeros((B, T), dtype=np.uint8)
        for i in range(K):
            if (g >> (K - 1 - i)) & 1:  # tap i delays the input by i bits
                acc ^= x[:, tail - i : tail - i + T]
        out[:, gi::2] = acc
    return out


def conv_encode(bits: Sequence[int], codec: CodecSpec = CodecSpec()) -> np.ndarray:
    """Rate-1/2 convolutional encoding with internal zero tail flush.

    Input is the packet payload bit sequence; output has length
    2 * (len(bits) + K - 1).
    """
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("conv_encode expects a 1-d bit sequence")
    if np.any(arr > 1):
        raise ValueError("input must be binary")
    return _conv_encode_batch(arr[None, :], codec)[0]


def _viterbi_acs(bit_costs: np.ndarray, codec: CodecSpec) -> np.ndarray:
    """Viterbi add-compare-select over the full terminated trellis.

    ``bit_costs`` has shape (B, 2*T, 2): the cost of deciding each coded bit
    as 0 or 1.  Hard decisions are the special case of 0/1 costs; soft
    metrics supply per-bit reliabilities.  Returns decoded payload rows
    (B, T - tail).  Path metric ties resolve toward the even-numbered
    predecessor, which keeps results platform independent.
    """
    B, n, _ = bit_costs.shape
    if n % 2 != 0:
        raise ValueError(f"codeword length must be even, got {n}")
    K = codec.constraint_length
    tail = codec.tail_bits
    T = n // 2
    if T <= tail:
        raise ValueError(f"codeword too short: {n} bits decode to nothing")
    n_states, pred0, pred1, exp0, exp1 = _trellis(codec)

    # per-step cost of each expected dibit code (b0*2 + b1), laid out (T, B, 4)
    first = bit_costs[:, 0::2, :]
    second = bit_costs[:, 1::2, :]
    code_costs = np.empty((T, B, 4), dtype=np.float32)
    for c in range(4):
        code_costs[..., c] = (first[..., c >> 1] + second[..., c & 1]).T

    pm = np.full((B, n_states), np.float32(3.0e8), dtype=np.float32)
    pm[:, 0] = 0.0  # encoder starts flushed
    decisions = np.empty((T, B, n_states), dtype=bool)
    c0 = np.empty((B, n_states), dtype=np.float32)
    c1 = np.empty_like(c0)
    d0 = np.empty_like(c0)
    d1 = np.empty_like(c0)
    for t in range(T):
        d = code_costs[t]
        np.take(pm, pred0, axis=1, out=c0)
        np.take(pm, pred1, axis=1, out=c1)
        np.take(d, exp0, axis=1, out=d0)
        np.take(d, exp1, axis=1, out=d1)
        c0 += d0
        c1 += d1
        np.less(c1, c0, out=decisions[t])
        np.minimum(c0, c1, out=pm)

    # terminated trellis: survivor ending in the all-zero state
    state = np.zeros(B, dtype=np.int64)
    rows = np.arange(B)
    half_mask = (n_states >> 1) - 1
    out = np.empty((B, T), dtype=np.uint8)
    for t in range(T - 1, -1, -1):
        out[:, t] = (state >> (K - 2)).astype(np.uint8)
        lost = decisions[t, rows, state]
        state = ((state & half_mask) << 1) | lost
    return out[:, : T - tail]


def _hard_bit_costs(bits: np.ndarray) -> np.ndarray:
    """Unit cost for flipping a received hard bit: (B, n) -> (B, n, 2)."""
    costs = np.empty((*bits.shape, 2), dtype=np.float32)
    costs[..., 0] = bits  # deciding 0 costs 1 when a 1 was received
    costs[..., 1] = 1.0 - bits
    return costs


def _llr_bit_costs(llr: np.ndarray) -> np.ndarray:
    """Bit costs from log-likelihood ratios (positive llr favors bit 0)."""
    costs = np.empty((*llr.shape, 2), dtype=np.float32)
    np.maximum(-llr, 0.0, out=costs[..., 0])
    np.maximum(llr, 0.0, out=costs[..., 1])
    return costs


def _viterbi_decode_batch(bits: np.ndarray, codec: CodecSpec) -> np.ndarray:
    """Hard-decision Viterbi: rows of received codewords -> decoded payloads."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    return _viterbi_acs(_hard_bit_costs(bits), codec)


def viterbi_decode(bits: Sequence[int], codec: CodecSpec = CodecSpec()) -> np.ndarray:
    """Decode one received (hard-bit) codeword back to its payload bits."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("viterbi_decode expects a 1-d bit sequence")
    return _viterbi_decode_batch(arr[None, :], codec)[0]


# ---------------------------------------------------------------------------
# modulation
# ---------------------------------------------------------------------------

_CONSTELLATION_CACHE: dict = {}


def _gray_decode(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    b ^= b >> 1
    b ^= b >> 2
    b ^= b >> 4
    return b


def _axis_params(m: ModulationSpec) -> tuple[int, float]:
    # L levels per axis at +-1, +-3, ...; unit mean energy needs 2(M-1)/3
    L = 1 << (m.bits_per_symbol // 2)
    scale = 1.0 / math.sqrt(2.0 * (m.order - 1) / 3.0)
    return L, scale


def constellation(m: ModulationSpec) -> np.ndarray:
    """Unit-energy constellation indexed by the symbol's bit pattern (MSB first;
    the first half of the bits selects the I axis, the second half the Q axis)."""
    if m.scheme in _CONSTELLATION_CACHE:
        return _CONSTELLATION_CACHE[m.scheme]
    if m.scheme == "BPSK":
        points = np.array([1.0 + 0.0j, -1.0 + 0.0j])
    else:
        L, scale = _axis_params(m)
        half = m.bits_per_symbol // 2
        idx = np.arange(m.order)
        gi, gq = idx >> half, idx & (L - 1)
        amp_i = 2 * _gray_decode(gi) - (L - 1)
        amp_q = 2 * _gray_decode(gq) - (L - 1)
        points = scale * (amp_i + 1j * amp_q)
    points.flags.writeable = False
    _CONSTELLATION_CACHE[m.scheme] = points
    return points


def modulate(bits: Sequence[int], m: ModulationSpec) -> np.ndarray:
    """Map bits onto constellation symbols (bit count must fill whole symbols)."""
    arr = np.asarray(bits, dtype=np.uint8)
    k = m.bits_per_symbol
    if arr.ndim != 1 or arr.size % k != 0:
        raise ValueError(f"bit count {arr.size} is not a multiple of {k}")
    if np.any(arr > 1):
        raise ValueError("input must be binary")
    idx = _bits_to_codes(arr, k).astype(np.int64)
    return constellation(m)[idx]


def demodulate(symbols: Sequence[complex], m: ModulationSpec) -> np.ndarray:
    """Minimum-distance hard decisions back to bits.

    For these square constellations the nearest point factors into
    independent per-axis level slicing, which is what is implemented.
    """
    y = np.asarray(symbols, dtype=complex)
    if m.scheme == "BPSK":
        return (y.real < 0).astype(np.uint8)
    L, scale = _axis_params(m)
    half = m.bits_per_symbol // 2

    def slice_axis(a):
        lvl = np.clip(np.rint((a / scale + (L - 1)) / 2.0), 0, L - 1).astype(np.int64)
        return lvl ^ (lvl >> 1)  # gray-encode the level index

    gi, gq = slice_axis(y.real), slice_axis(y.imag)
    return _codes_to_bits((gi << half) | gq, m.bits_per_symbol)


_BITMASK_CACHE: dict = {}


def _bit_masks(m: ModulationSpec) -> np.ndarray:
    """(k, M) booleans: which constellation indices carry a 1 in each bit slot."""
    if m.scheme not in _BITMASK_CACHE:
        k = m.bits_per_symbol
        idx = np.arange(m.order)
        _BITMASK_CACHE[m.scheme] = np.array(
            [(idx >> (k - 1 - i)) & 1 == 1 for i in range(k)]
        )
    return _BITMASK_CACHE[m.scheme]


def soft_demodulate(symbols: Sequence[complex], m: ModulationSpec) -> np.ndarray:
    """Max-log bit LLRs, one row of ``bits_per_symbol`` values per symbol.

    Positive values favor bit 0.  The common 1/N0 factor is omitted: the
    Viterbi metric is invariant to positive scaling, and with one fading
    coefficient per codeword the same holds after equalization.
    """
    y = np.asarray(symbols, dtype=complex)
    points = constellation(m)
    if m.scheme == "BPSK":
        return 4.0 * y.real[:, None]
    d2 = np.abs(y[:, None] - points[None, :]) ** 2
    masks = _bit_masks(m)
    out = np.empty((y.size, m.bits_per_symbol))
    for i, mask in enumerate(masks):
        out[:, i] = d2[:, mask].min(axis=1) - d2[:, ~mask].min(axis=1)
    return out


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------

def _rician_coeff(ch: ChannelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    k = 10.0 ** (ch.k_db / 10.0)
    los = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(1.0 / (k + 1.0) / 2.0)  # per real component; E|h|^2 = 1
    return los + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def channel_apply(
    symbols: Sequence[complex], ch: ChannelSpec, esn0_db: float, rng: np.random.Generator
) -> np.ndarray:
    """Push symbols through the channel; fading output is already equalized.

    AWGN adds complex noise of total variance N0 = 10**(-esn0_db/10) (unit
    symbol energy).  Rician applies one fading coefficient per call (block
    mode) or per symbol, then divides it back out (perfect CSI), so the
    returned stream is directly sliceable.  ``esn0_db = inf`` is the
    noiseless limit.
    """
    x = np.asarray(symbols, dtype=complex)
    if math.isnan(esn0_db) or esn0_db == -math.inf:
        raise ValueError(f"Es/N0 must be a real value or +inf, got {esn0_db}")
    n0 = 10.0 ** (-esn0_db / 10.0)
    if ch.model == "rician":
        h = _rician_coeff(ch, x.size if ch.fading == "symbol" else 1, rng)
    noise_scale = math.sqrt(n0 / 2.0)
    w = noise_scale * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    if ch.model == "awgn":
        return x + w
    return x + w / h  # (h x + w) / h


# ---------------------------------------------------------------------------
# packet pipeline
# ---------------------------------------------------------------------------

def _points_to_payload(points: np.ndarray, phy: PhyConfig) -> np.ndarray:
    codes = _quantize_codes(points, phy.quantizer)  # (..., R, D)
    flat = codes.reshape(*codes.shape[:-2], -1)  # dims within rep, reps in order
    return _codes_to_bits(flat, phy.quantizer.bits_per_dim)


def _payload_to_points(bits: np.ndarray, phy: PhyConfig) -> np.ndarray:
    codes = _bits_to_codes(bits, phy.quantizer.bits_per_dim)
    vals = _codes_to_values(codes, phy.quantizer)
    r, d = phy.packet.reps_per_packet, phy.packet.dims_per_rep
    return vals.reshape(*bits.shape[:-1], r, d)


def _transmit_points(
    points: np.ndarray,
    phy: PhyConfig,
    ebn0_db: float,
    rngs: Sequence[np.random.Generator],
) -> tuple[np.ndarray, np.ndarray]:
    """Send packets (P, R, D) through the full chain; returns recovered points
    and per-packet error flags.  Each packet consumes exactly one generator
    from ``rngs`` (fading coefficient first, then noise).

    Decoding feeds max-log bit LLRs into the Viterbi metric; see
    :func:`transmit_packet` for why the soft metric is used here.
    """
    P = points.shape[0]
    if len(rngs) != P:
        raise ValueError("need one random generator per packet")
    payload = _points_to_payload(points, phy)
    coded = _conv_encode_batch(payload, phy.codec)
    k = phy.modulation.bits_per_symbol
    pad = (-coded.shape[1]) % k
    if pad:
        coded_tx = np.concatenate(
            [coded, np.zeros((P, pad), dtype=np.uint8)], axis=1
        )
    else:
        coded_tx = coded
    esn0 = esn0_from_ebn0(ebn0_db, phy.modulation, phy.codec.rate)
    syms = modulate(coded_tx.reshape(-1), phy.modulation).reshape(P, -1)
    rx = np.empty_like(syms)
    for i in range(P):
        rx[i] = channel_apply(syms[i], phy.channel, esn0, rngs[i])
    llr = soft_demodulate(rx.reshape(-1), phy.modulation).reshape(P, -1)
    if pad:
        llr = llr[:, :-pad]
    decoded = _viterbi_acs(_llr_bit_costs(llr), phy.codec)
    packet_error = np.any(decoded != payload, axis=1)
    return _payload_to_points(decoded, phy), packet_error


def transmit_packet(
    reps: Sequence[SemanticPoint],
    phy: PhyConfig,
    ebn0_db: float,
    rng: np.random.Generator,
) -> tuple[list[SemanticPoint], bool]:
    """Send one packet of semantic points end to end.

    Returns the recovered points (quantizer round trip of the inputs when the
    channel is clean) and whether any payload bit was decoded incorrectly.

    The receive side runs the Viterbi decoder on max-log bit LLRs rather
    than on sliced hard bits: hard decisions discard enough reliability
    information that the low-SNR semantic robustness this system is built to
    exhibit (packet errors near 1 with semantic errors still rare) disappears
    at the SNRs of interest.  :func:`demodulate` remains the hard-decision
    reference point for bit-level accounting.
    """
    if len(reps) != phy.packet.reps_per_packet:
        raise ValueError(
            f"packet needs {phy.packet.reps_per_packet} representations, "
            f"got {len(reps)}"
        )
    flats = np.stack([r.flat() for r in reps])
    if flats.shape[1] != phy.packet.dims_per_rep:
        raise ValueError(
            f"points have {flats.shape[1]} dims, packet expects "
            f"{phy.packet.dims_per_rep}"
        )
    out, perr = _transmit_points(flats[None, :, :], phy, ebn0_db, [rng])
    shape = [len(c) for c in reps[0].coords]
    points = []
    for row in out[0]:
        coords, col = [], 0
        for width in shape:
            coords.append(tuple(row[col : col + width]))
            col += width
        points.append(SemanticPoint(tuple(coords)))
    return points, bool(perr[0])
