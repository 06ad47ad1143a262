"""Bench characterizations of the phase shifter and the phase detector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import ComplexEnvelope, ParameterError, RngStream, TimeGrid
from .eic import EicParams, input_stage, phase_detector
from .loop import wrap_quarter
from .pic import PicParams, interferometer_power
from .txrx import map_symbols, pulse_shape


@dataclass(frozen=True)
class PsSweep:
    voltage: NDArray[np.float64]
    power: NDArray[np.float64]
    argmin: float
    power_at_3v: float


def characterize_ps(pic: PicParams, v_max: float = 12.0, step: float = 0.01) -> PsSweep:
    """Settled interferometer output versus shifter voltage over [0, v_max]."""
    if not v_max > 0 or not step > 0:
        raise ParameterError("v_max and step must be positive")
    v = np.round(np.arange(0.0, v_max + step / 2, step), 9)
    p = interferometer_power(v, pic)
    return PsSweep(v, p, float(v[np.argmin(p)]), float(interferometer_power(3.0, pic)))


@dataclass(frozen=True)
class PdCharacterization:
    phi: NDArray[np.float64]  # unwrapped ramp phase at each symbol center
    v_pd: NDArray[np.float64]
    slope: float
    period: float
    symmetry_residual: float
    zero_offset_rms: float


def _pd_capture(eic: EicParams, baud: float, sps: int, n_symbols: int, offset_hz: float,
                seed: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    bits = RngStream(seed, "characterize-pd/bits").generator().integers(0, 2, 2 * n_symbols, dtype=np.uint8)
    bb = pulse_shape(map_symbols(bits, "QPSK"), sps, "NRZ", baud=baud)
    t = bb.grid.times()
    ramp = 2 * math.pi * offset_hz * t
    iq = bb.samples * np.exp(1j * ramp)
    I = ComplexEnvelope(bb.grid, iq.real, "volt")
    Q = ComplexEnvelope(bb.grid, iq.imag, "volt")
    v = phase_detector(input_stage(I, eic), input_stage(Q, eic), eic).v_pd.real
    # sample late in each symbol so the detector's internal poles have settled
    idx = np.arange(n_symbols) * sps + (3 * sps) // 4
    return ramp[idx], v[idx]


def characterize_pd(
    eic: EicParams,
    baud: float = 1e9,
    sps: int = 32,
    n_symbols: int = 4000,
    offset_hz: float = 1e6,
    seed: int = 1,
    fit_range: float = 0.2,
) -> PdCharacterization:
    """Drive the detector with unit-amplitude QPSK whose phase ramps at ``offset_hz``.

    The slope is a least-squares line through (wrapped phase, v_pd) for
    ``|phase| < fit_range``; the period is the mean spacing of the upward
    zero crossings along the ramp; the symmetry residual is the largest
    ``|v(phi) + v(-phi)|`` over a grid inside one period, read off the
    measured curve by interpolation.
    """
    phi, v = _pd_capture(eic, baud, sps, n_symbols, offset_hz, seed)
    w = wrap_quarter(phi)
    sel = np.abs(w) < fit_range
    if sel.sum() < 10:
        raise ParameterError("too few samples near lock to fit a slope")
    slope = float(np.polyfit(w[sel], v[sel], 1)[0])
    up = np.flatnonzero((v[:-1] < 0) & (v[1:] >= 0))
    # keep one crossing per lock point: ignore re-crossings within a quarter period
    crossings = []
    for i in up:
        frac = -v[i] / (v[i + 1] - v[i])
        p = phi[i] + frac * (phi[i + 1] - phi[i])
        if not crossings or p - crossings[-1] > math.pi / 4:
            crossings.append(p)
    period = float(np.mean(np.diff(crossings))) if len(crossings) > 1 else float("nan")
    order = np.argsort(w)
    ws, vs = w[order], v[order]
    grid = np.linspace(0.0, math.pi / 4 * 0.9, 50)
    resid = np.interp(grid, ws, vs) + np.interp(-grid, ws, vs)
    _, v0 = _pd_capture(eic, baud, sps, min(n_symbols, 1000), 0.0, seed)
    return PdCharacterization(
        phi=phi,
        v_pd=v,
        slope=slope,
        period=period,
        symmetry_residual=float(np.max(np.abs(resid))),
        zero_offset_rms=float(np.sqrt(np.mean(v0**2))),
    )
