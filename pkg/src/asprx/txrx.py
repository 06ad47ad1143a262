"""PRBS data, Gray symbol mapping, pulse shaping and optical IQ modulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    ComplexEnvelope,
    ParameterError,
    TimeGrid,
    require_same_grid,
    require_unit,
)

Modulation = Literal["QPSK", "16QAM"]
BITS_PER_SYMBOL = {"QPSK": 2, "16QAM": 4}
MIN_SPS = 8

# Per-axis Gray levels; bit 0 selects the sign (0 -> positive).
_QPSK_LEVELS = {(0,): 1.0, (1,): -1.0}
_QAM16_LEVELS = {(0, 0): 3.0, (0, 1): 1.0, (1, 1): -1.0, (1, 0): -3.0}


@dataclass(frozen=True)
class BitStream:
    bits: NDArray[np.uint8]
    generator_tag: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ParameterError("bits must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return self.bits.size


@dataclass(frozen=True)
class SymbolStream:
    symbols: NDArray[np.complex128]
    modulation: Modulation

    def __len__(self) -> int:
        return self.symbols.size


def normalize_modulation(modulation: str) -> Modulation:
    key = modulation.upper().replace("-", "")
    if key not in BITS_PER_SYMBOL:
        raise ParameterError(f"unsupported modulation {modulation!r}")
    return key  # type: ignore[return-value]


def prbs7(init_state: int = 0x7F, n: int = 127) -> BitStream:
    """PRBS-7 from the Fibonacci LFSR with polynomial x^7 + x^6 + 1."""
    state = int(init_state)
    if not 0 < state < 128:
        raise ParameterError("PRBS-7 state must be a nonzero 7-bit value")
    out = np.empty(int(n), dtype=np.uint8)
    for i in range(int(n)):
        bit = ((state >> 6) ^ (state >> 5)) & 1
        state = ((state << 1) | bit) & 0x7F
        out[i] = bit
    return BitStream(out, generator_tag=f"prbs7:{init_state:#04x}")


def constellation(modulation: str) -> tuple[NDArray[np.complex128], NDArray[np.uint8]]:
    """Alphabet and matching bit labels, ordered by the labels' integer value.

    Labels are (I bits, Q bits) per symbol, Gray coded per axis; the
    alphabet is scaled to unit mean energy.
    """
    mod = normalize_modulation(modulation)
    k = BITS_PER_SYMBOL[mod]
    levels = _QPSK_LEVELS if mod == "QPSK" else _QAM16_LEVELS
    half = k // 2
    labels = np.array([[(v >> (k - 1 - b)) & 1 for b in range(k)] for v in range(2**k)], dtype=np.uint8)
    points = np.array(
        [levels[tuple(lab[:half])] + 1j * levels[tuple(lab[half:])] for lab in labels]
    )
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return points, labels


def map_symbols(bits: BitStream | ArrayLike, modulation: str = "QPSK") -> SymbolStream:
    mod = normalize_modulation(modulation)
    raw = bits.bits if isinstance(bits, BitStream) else BitStream(np.asarray(bits)).bits
    k = BITS_PER_SYMBOL[mod]
    if raw.size % k:
        raise ParameterError(f"{raw.size} bits is not a multiple of {k} for {mod}")
    points, _ = constellation(mod)
    weights = 1 << np.arange(k - 1, -1, -1)
    index = raw.reshape(-1, k).astype(np.int64) @ weights
    return SymbolStream(points[index], mod)


def demap_symbols(symbols: ArrayLike, modulation: str = "QPSK") -> NDArray[np.uint8]:
    """Nearest-neighbour hard decisions back to bits."""
    points, labels = constellation(modulation)
    s = np.asarray(symbols, dtype=np.complex128)
    index = np.argmin(np.abs(s[:, None] - points[None, :]), axis=1)
    return labels[index].reshape(-1)


def mapping_table(modulation: str = "QPSK") -> list[tuple[str, complex]]:
    points, labels = constellation(modulation)
    return [("".join(str(b) for b in lab), complex(p)) for lab, p in zip(labels, points)]


def differential_encode(quadrants: ArrayLike) -> NDArray[np.int64]:
    """Cumulative mod-4 sum of quadrant increments (QPSK differential precoding)."""
    return np.cumsum(np.asarray(quadrants, dtype=np.int64)) % 4


def differential_decode(quadrants: ArrayLike) -> NDArray[np.int64]:
    q = np.asarray(quadrants, dtype=np.int64)
    return np.diff(q, prepend=0) % 4


def rrc_taps(rolloff: float, sps: int, span: int = 128) -> NDArray[np.float64]:
    """Root-raised-cosine impulse response, ``span`` symbols long, sum = sps."""
    if not 0 < rolloff <= 1:
        raise ParameterError("rolloff must be in (0, 1]")
    t = (np.arange(span * sps + 1) - span * sps / 2) / sps
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if np.isclose(ti, 0.0):
            h[i] = 1.0 - b + 4 * b / np.pi
        elif np.isclose(abs(ti), 1.0 / (4 * b)):
            h[i] = (b / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            h[i] = (np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b))) / (
                np.pi * ti * (1 - (4 * b * ti) ** 2)
            )
    return h * (sps / h.sum())


def pulse_shape(
    syms: SymbolStream | ArrayLike,
    sps: int,
    shape: str = "NRZ",
    rolloff: float = 0.2,
    baud: float = 1.0,
) -> ComplexEnvelope:
    """Upsample symbols to ``sps`` samples per symbol (volt-unit baseband).

    NRZ holds each symbol for ``sps`` samples. RRC applies a root-raised
    cosine whose group delay is removed so symbol ``k`` peaks at sample
    ``k*sps``.
    """
    if int(sps) < MIN_SPS:
        raise ParameterError(f"sps must be >= {MIN_SPS}, got {sps}")
    sps = int(sps)
    s = syms.symbols if isinstance(syms, SymbolStream) else np.asarray(syms, dtype=np.complex128)
    grid = TimeGrid(baud * sps, s.size * sps)
    kind = shape.upper()
    if kind == "NRZ":
        return ComplexEnvelope(grid, np.repeat(s, sps), "volt")
    if kind == "RRC":
        h = rrc_taps(rolloff, sps)
        up = np.zeros(s.size * sps, dtype=np.complex128)
        up[::sps] = s
        full = np.convolve(up, h)
        delay = (h.size - 1) // 2
        return ComplexEnvelope(grid, full[delay : delay + up.size], "volt")
    raise ParameterError(f"unknown pulse shape {shape!r}")


def rrc_matched_filter(x: ComplexEnvelope, rolloff: float = 0.2, sps: int = 16) -> ComplexEnvelope:
    """Receive-side RRC, scaled so the transmit/receive cascade has unit peak."""
    h = rrc_taps(rolloff, sps)
    h = h / np.dot(h, h)
    full = np.convolve(x.samples, h)
    delay = (h.size - 1) // 2
    return x.with_samples(full[delay : delay + len(x)])


def iq_modulate(
    carrier: ComplexEnvelope, baseband: ComplexEnvelope, constant_envelope: bool = True
) -> ComplexEnvelope:
    """Imprint the baseband on the optical carrier.

    With ``constant_envelope`` (QPSK) only the baseband phase is applied,
    ``S = carrier * bb/|bb|``; zero-magnitude baseband samples give zero field.
    Otherwise the baseband multiplies the carrier and amplitude is kept.
    """
    require_same_grid(carrier, baseband)
    require_unit(carrier, "sqrt-watt")
    bb = baseband.samples
    if constant_envelope:
        mag = np.abs(bb)
        phasor = np.divide(bb, mag, out=np.zeros_like(bb), where=mag > 0)
    else:
        phasor = bb
    return carrier.with_samples(carrier.samples * phasor)
