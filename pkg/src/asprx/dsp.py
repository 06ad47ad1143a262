"""Offline analysis: Viterbi-Viterbi phase recovery, LMS FFE, EVM, BER and eye openings."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from numba import njit
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from .core import ParameterError
from .txrx import BITS_PER_SYMBOL, constellation, demap_symbols, map_symbols, normalize_modulation

MIN_EVM_SYMBOLS = 100
MIN_EYE_TRACES = 200


@dataclass(frozen=True)
class MetricsRecord:
    evm_rms: float
    ber: float
    eye_vertical: float
    eye_horizontal: float
    n_symbols: int
    ambiguity_rotation: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.ber <= 1.0 and not math.isnan(self.ber):
            raise ParameterError("ber must lie in [0, 1]")
        if self.evm_rms < 0:
            raise ParameterError("evm must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


def vv_phase(symbols: ArrayLike, window: int = 64) -> NDArray[np.float64]:
    """Fourth-power phase estimate per symbol, centered moving window, unwrapped.

    QPSK points sit at pi/4 + k*pi/2, so ``-s**4`` is a positive real for an
    unrotated constellation; the estimate is unwrapped with period pi/2.
    """
    s = np.asarray(symbols, dtype=np.complex128)
    if window > s.size:
        raise ParameterError(f"CPR window {window} exceeds record length {s.size}")
    if window < 1:
        raise ParameterError("CPR window must be >= 1")
    p4 = -(s**4)
    avg = ndimage.uniform_filter1d(p4.real, window, mode="nearest") + 1j * ndimage.uniform_filter1d(
        p4.imag, window, mode="nearest"
    )
    theta = np.angle(avg) / 4.0
    return np.unwrap(theta, period=math.pi / 2)


def offline_cpr(symbols: ArrayLike, window: int = 64) -> NDArray[np.complex128]:
    """Remove the slowly varying carrier phase from QPSK symbols (mod pi/2)."""
    s = np.asarray(symbols, dtype=np.complex128)
    return s * np.exp(-1j * vv_phase(s, window))


def derotate_waveform(
    waveform: ArrayLike, symbol_phase: ArrayLike, sps: int, first_sample: int
) -> NDArray[np.complex128]:
    """Apply a per-symbol phase estimate to the full-rate waveform by interpolation."""
    w = np.asarray(waveform, dtype=np.complex128)
    ph = np.asarray(symbol_phase, dtype=float)
    centers = first_sample + sps * np.arange(ph.size)
    full = np.interp(np.arange(w.size), centers, ph)
    return w * np.exp(-1j * full)


@dataclass(frozen=True)
class EqualizerResult:
    symbols: NDArray[np.complex128]
    taps: NDArray[np.complex128]
    error: NDArray[np.float64]
    status: str
    input_scale: float
    tap_drift: float


@njit(cache=True)
def _lms(x2, start, stop, taps, step, train, n_train, points, err_out, y_out):
    n_taps = taps.size
    c = n_taps // 2
    for n in range(start, stop):
        y = 0j
        base = 2 * n + c
        for k in range(n_taps):
            idx = base - k
            if 0 <= idx < x2.size:
                y += taps[k] * x2[idx]
        if n < n_train:
            d = train[n]
        else:
            best = 0
            bd = 1e300
            for m in range(points.size):
                dd = abs(y - points[m])
                if dd < bd:
                    bd = dd
                    best = m
            d = points[best]
        e = d - y
        err_out[n] = e.real * e.real + e.imag * e.imag
        y_out[n] = y
        if not np.isfinite(err_out[n]):
            return n + 1
        for k in range(n_taps):
            idx = base - k
            if 0 <= idx < x2.size:
                taps[k] += step * e * np.conj(x2[idx])
    return stop


def lms_ffe(
    waveform: ArrayLike,
    sps: int,
    first_sample: int,
    training: ArrayLike,
    n_taps: int = 11,
    step: float = 0.01,
    n_train: int | None = None,
    modulation: str = "QPSK",
) -> EqualizerResult:
    """T/2-spaced LMS feed-forward equalizer, trained then decision directed.

    ``first_sample`` indexes the first symbol center in ``waveform``.
    ``training`` holds the known symbols aligned with the record; the first
    ``n_train`` of them (default a quarter of the record) drive the update
    and decisions drive the rest. Error energy that grows by more than 2x
    over each of three consecutive quarters, or goes non-finite, gives
    ``status="diverged"``.
    """
    if n_taps % 2 == 0 or n_taps < 1:
        raise ParameterError("n_taps must be odd")
    if step < 0:
        raise ParameterError("step must be >= 0")
    if sps % 2:
        raise ParameterError("T/2 spacing needs an even sps")
    w = np.asarray(waveform, dtype=np.complex128)
    train = np.asarray(training, dtype=np.complex128)
    x2 = w[first_sample :: sps // 2]
    n_sym = min(train.size, (x2.size + 1) // 2)
    if n_sym < 4:
        raise ParameterError("record too short for the equalizer")
    rms = math.sqrt(float(np.mean(np.abs(x2[: 2 * n_sym : 2]) ** 2)))
    if rms == 0:
        raise ParameterError("equalizer input has zero power")
    x2 = np.ascontiguousarray(x2 / rms)
    n_train = n_sym // 4 if n_train is None else min(int(n_train), n_sym)
    taps = np.zeros(n_taps, dtype=np.complex128)
    taps[n_taps // 2] = 1.0
    points = constellation(modulation)[0].astype(np.complex128)
    err = np.full(n_sym, np.nan)
    y = np.zeros(n_sym, dtype=np.complex128)
    q = n_sym // 4
    bounds = [0, q, 2 * q, 3 * q, n_sym]
    snapshots = []
    status = "converged"
    for a, b in zip(bounds[:-1], bounds[1:]):
        ran = _lms(x2, a, b, taps, float(step), train, n_train, points, err, y)
        snapshots.append(taps.copy())
        if ran < b:
            status = "diverged"
            break
    if status != "diverged":
        quarters = [float(np.mean(err[a:b])) for a, b in zip(bounds[:-1], bounds[1:])]
        if all(quarters[i + 1] > 2.0 * quarters[i] for i in range(3)):
            status = "diverged"
    drift = float("nan")
    if len(snapshots) == 4 and np.all(np.isfinite(taps)):
        drift = float(np.linalg.norm(snapshots[3] - snapshots[2]) / np.linalg.norm(snapshots[3]))
    return EqualizerResult(y, taps, err, status, rms, drift)


def apply_ffe(waveform: ArrayLike, taps: ArrayLike, sps: int, input_scale: float = 1.0) -> NDArray[np.complex128]:
    """Run fixed T/2-spaced taps over the full-rate waveform (for eye diagrams)."""
    w = np.asarray(waveform, dtype=np.complex128) / input_scale
    h = np.asarray(taps, dtype=np.complex128)
    half = sps // 2
    c = h.size // 2
    out = np.zeros_like(w)
    n = w.size
    for k, hk in enumerate(h):
        lag = (k - c) * half  # tap k reads x[t - lag]
        if lag >= 0:
            out[lag:] += hk * w[: n - lag]
        else:
            out[: n + lag] += hk * w[-lag:]
    return out


# ---------------------------------------------------------------- metrics


@dataclass(frozen=True)
class EvmResult:
    evm: float  # fraction
    gain: complex
    ambiguity_rotation: int


def evm_detail(symbols: ArrayLike, reference: ArrayLike) -> EvmResult:
    """Data-aided RMS EVM after the least-squares complex gain ``g``.

    ``EVM = ||g*y - x|| / ||x||`` with ``g = <y, x> / <y, y>``, so the figure is
    blind to any common scaling or rotation (including the pi/2 ambiguity).
    """
    y = np.asarray(symbols, dtype=np.complex128)
    x = np.asarray(reference, dtype=np.complex128)
    if y.size == 0:
        raise ParameterError("EVM of an empty record")
    if y.shape != x.shape:
        raise ParameterError("symbols and reference must have the same length")
    if y.size < MIN_EVM_SYMBOLS:
        raise ParameterError(f"EVM needs at least {MIN_EVM_SYMBOLS} symbols")
    yy = np.vdot(y, y).real
    if yy == 0:
        return EvmResult(1.0, 0j, 0)
    g = np.vdot(y, x) / yy
    evm = float(np.linalg.norm(g * y - x) / np.linalg.norm(x))
    k = int(np.round(np.angle(g) / (math.pi / 2))) % 4
    return EvmResult(evm, complex(g), k)


def evm_rms(symbols: ArrayLike, reference: ArrayLike) -> float:
    """RMS EVM in percent."""
    return 100.0 * evm_detail(symbols, reference).evm


@dataclass(frozen=True)
class BerResult:
    ber: float
    errors: int
    n_bits: int
    shift: int
    rotation: int
    status: str


def _rotate_bits(tx_bits: NDArray[np.uint8], k: int, modulation: str) -> NDArray[np.uint8]:
    """Bits carried by the TX symbols rotated by ``k*pi/2``."""
    syms = map_symbols(tx_bits, modulation).symbols * (1j**k)
    return demap_symbols(syms, modulation)


def ber(rx_bits: ArrayLike, tx_bits: ArrayLike, modulation: str = "QPSK", max_shift: int = 1) -> BerResult:
    """Bit error ratio after searching symbol shifts and the four-fold rotation.

    The best (shift, rotation) pair wins; a best BER of 0.4 or more is
    reported as ``status="alignment-failure"``.
    """
    mod = normalize_modulation(modulation)
    bps = BITS_PER_SYMBOL[mod]
    rx = np.asarray(rx_bits, dtype=np.uint8)
    tx = np.asarray(tx_bits, dtype=np.uint8)
    n_sym = min(rx.size, tx.size) // bps
    rx = rx[: n_sym * bps]
    tx = tx[: n_sym * bps]
    best = None
    for k in range(4):
        ref = _rotate_bits(tx, k, mod)
        for s in range(-max_shift, max_shift + 1):
            a, b = max(0, s), max(0, -s)
            m = n_sym - abs(s)
            if m <= 0:
                continue
            r = rx[a * bps : (a + m) * bps]
            t = ref[b * bps : (b + m) * bps]
            errors = int(np.count_nonzero(r != t))
            cand = (errors / r.size, errors, r.size, s, k)
            if best is None or cand[0] < best[0]:
                best = cand
    if best is None:
        raise ParameterError("no bits to compare")
    rate, errors, n_bits, s, k = best
    status = "alignment-failure" if rate >= 0.4 else "ok"
    return BerResult(rate, errors, n_bits, s, k, status)


def circular_variance(phi: ArrayLike) -> float:
    """``1 - |mean(exp(j*phi))|``, in [0, 1]."""
    return float(1.0 - abs(np.mean(np.exp(1j * np.asarray(phi, dtype=float)))))


@dataclass(frozen=True)
class EyeMetrics:
    vertical: float
    horizontal: float
    best_phase: int
    per_phase: NDArray[np.float64]


def _two_rails(v: NDArray[np.float64]) -> tuple[float, float, float, float]:
    """Split samples into two clusters (1-D k-means); return lower/upper extremes."""
    thr = float(np.mean(v))
    for _ in range(20):
        lo, hi = v[v <= thr], v[v > thr]
        if lo.size == 0 or hi.size == 0:
            break
        new = 0.5 * (lo.mean() + hi.mean())
        if new == thr:
            break
        thr = new
    lo, hi = v[v <= thr], v[v > thr]
    if lo.size == 0 or hi.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    return float(lo.min()), float(lo.max()), float(hi.min()), float(hi.max())


def eye_metrics(waveform: ArrayLike, sps: int, first_sample: int = 0) -> EyeMetrics:
    """Normalized vertical and horizontal eye openings of a binary rail.

    The waveform is folded into one-symbol traces starting at
    ``first_sample``. At each phase the samples are split into an upper and
    a lower rail; the vertical opening is ``(min upper - max lower) /
    (max upper - min lower)`` clipped at zero, maximized over phases.

    The horizontal opening is one minus the spread of the threshold
    crossing times (the shortest arc of the symbol period that holds every
    crossing), with the threshold midway between the rails at the best
    phase. A vertically closed eye has zero horizontal opening.
    """
    x = np.asarray(waveform, dtype=float)[first_sample:]
    n_tr = x.size // sps
    if n_tr < MIN_EYE_TRACES:
        raise ParameterError(f"eye needs at least {MIN_EYE_TRACES} symbol traces")
    x = x[: n_tr * sps]
    traces = x.reshape(n_tr, sps)
    opening = np.zeros(sps)
    thresholds = np.zeros(sps)
    for p in range(sps):
        lo_min, lo_max, hi_min, hi_max = _two_rails(traces[:, p])
        span = hi_max - lo_min
        opening[p] = max(0.0, (hi_min - lo_max) / span) if span > 0 else 0.0
        thresholds[p] = 0.5 * (hi_min + lo_max)
    best = int(np.argmax(opening))
    vertical = float(opening[best])
    if vertical <= 0.0:
        return EyeMetrics(0.0, 0.0, best, opening)
    d = x - thresholds[best]
    idx = np.flatnonzero(np.signbit(d[:-1]) != np.signbit(d[1:]))
    if idx.size == 0:
        return EyeMetrics(vertical, 1.0, best, opening)
    frac = d[idx] / (d[idx] - d[idx + 1])
    phase = np.sort((idx + frac) % sps)
    gaps = np.diff(np.concatenate([phase, [phase[0] + sps]]))
    arc = sps - float(gaps.max())
    return EyeMetrics(vertical, max(0.0, 1.0 - arc / sps), best, opening)
