"""Behavioral model of the SiGe carrier-phase-recovery chip path used in the loop.

Signal flow for each rail (physical mode)::

    ICR -> frontend (amp + balun [+ bandwidth]) -> input stage pole
        -> delay cell ----------------> multiplier <- limiter (other rail)
        -> output buffer (I_O, Q_O)

and ``v_pd = kappa * adder(mult(Q_d * LA(I)) - mult(I_d * LA(Q)))``.
Every pole starts settled on its first input sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from .core import (
    ComplexEnvelope,
    ParameterError,
    db_to_amplitude,
    pole_coefficient,
    require_same_grid,
    require_unit,
    single_pole_lowpass,
)


@dataclass(frozen=True)
class EicParams:
    frontend_gain: float = 25.0
    balun_loss: float = 3.0
    frontend_bw: float | None = None
    input_bw: float = 38e9
    la_gain: float = 41.0
    la_bw: float = 27.5e9
    la_sat: float = 0.2
    la_delay: float = 28e-12
    delay: float = 28.1e-12
    delay_gain: float = 1.8
    mult_bw: float = 20.89e9
    mult_gain: float = 2.75
    adder_bw: float = 24e9
    adder_gain: float = 5.2
    out_bw: float = 36e9
    buffer_gain: float = 1.0
    pd_gain: float = 0.16
    min_input_swing: float = 0.05
    swing_window: int = 32
    mode: Literal["ideal", "physical"] = "physical"

    def __post_init__(self) -> None:
        if not self.la_sat > 0:
            raise ParameterError("la_sat must be positive")
        if not self.pd_gain > 0:
            raise ParameterError("pd_gain must be positive")
        gains = (self.frontend_gain, self.balun_loss, self.la_gain, self.delay_gain,
                 self.mult_gain, self.adder_gain, self.buffer_gain)
        if not all(math.isfinite(g) for g in gains):
            raise ParameterError("gains must be finite")
        if self.delay < 0 or self.la_delay < 0:
            raise ParameterError("delays must be >= 0")
        if self.frontend_bw is not None and not self.frontend_bw > 0:
            raise ParameterError("frontend_bw must be positive or None")
        if self.mode not in ("ideal", "physical"):
            raise ParameterError(f"unknown mode {self.mode!r}")

    @property
    def ideal(self) -> bool:
        return self.mode == "ideal"

    @property
    def frontend_linear_gain(self) -> float:
        return db_to_amplitude(self.frontend_gain - self.balun_loss)

    @property
    def la_linear_gain(self) -> float:
        return db_to_amplitude(self.la_gain)


@dataclass(frozen=True)
class PdOutput:
    v_pd: ComplexEnvelope
    valid: NDArray[np.bool_]


@dataclass(frozen=True)
class CprOutputs:
    I_O: ComplexEnvelope
    Q_O: ComplexEnvelope
    pd: PdOutput


def fractional_delay_taps(delay_samples: float, order: int = 3) -> tuple[int, NDArray[np.float64]]:
    """Causal Lagrange interpolator: ``y[n] = sum_k h[k] * x[n - start - k]``.

    Integer delays reduce to a single unit tap.
    """
    if delay_samples < 0:
        raise ParameterError("delay must be >= 0")
    d = float(delay_samples)
    if d == int(d):
        return int(d), np.ones(1)
    start = max(0, int(math.floor(d)) - (order - 1) // 2)
    nodes = np.arange(start, start + order + 1, dtype=float)
    h = np.ones(order + 1)
    for k, nk in enumerate(nodes):
        for m, nm in enumerate(nodes):
            if m != k:
                h[k] *= (d - nm) / (nk - nm)
    return start, h


def apply_fractional_delay(x: NDArray, start: int, taps: NDArray[np.float64]) -> NDArray:
    """Apply taps from :func:`fractional_delay_taps`; history before t=0 holds x[0]."""
    pad = start + taps.size - 1
    if pad == 0:
        return x * taps[0]
    ext = np.concatenate([np.full(pad, x[0], dtype=x.dtype), x])
    y = np.zeros_like(x)
    n = x.size
    for k, h in enumerate(taps):
        lag = start + k
        y += h * ext[pad - lag : pad - lag + n]
    return y


def _settled_pole(x: ComplexEnvelope, f3db: float) -> ComplexEnvelope:
    return single_pole_lowpass(x, f3db, initial=x.samples[0])


def swing_valid(x: NDArray[np.float64], min_swing: float, window: int) -> NDArray[np.bool_]:
    """True where the peak-to-peak swing over a centered window reaches ``min_swing``."""
    hi = ndimage.maximum_filter1d(x, size=window, mode="nearest")
    lo = ndimage.minimum_filter1d(x, size=window, mode="nearest")
    return (hi - lo) >= min_swing


def frontend(
    I: ComplexEnvelope, Q: ComplexEnvelope, params: EicParams, sps: int = 16
) -> tuple[ComplexEnvelope, ComplexEnvelope, NDArray[np.bool_]]:
    """Off-chip amplifier and balun feeding the CPR chip.

    Returns the scaled rails and a per-sample validity flag: False wherever
    either rail's peak-to-peak swing over ``params.swing_window`` symbols is
    below ``min_input_swing``. Low swing is reported, not raised.
    """
    require_same_grid(I, Q)
    require_unit(I, "volt")
    require_unit(Q, "volt")
    g = params.frontend_linear_gain
    out = []
    for x in (I, Q):
        y = x.with_samples(x.real * g)
        if params.frontend_bw is not None and not params.ideal:
            y = _settled_pole(y, params.frontend_bw)
        out.append(y)
    window = max(1, params.swing_window * int(sps))
    valid = swing_valid(out[0].real, params.min_input_swing, window) & swing_valid(
        out[1].real, params.min_input_swing, window
    )
    return out[0], out[1], valid


def input_stage(x: ComplexEnvelope, params: EicParams) -> ComplexEnvelope:
    return x if params.ideal else _settled_pole(x, params.input_bw)


def _limit(x: NDArray[np.float64], params: EicParams) -> NDArray[np.float64]:
    if params.ideal:
        return np.sign(x) * params.la_sat
    return params.la_sat * np.tanh(params.la_linear_gain * x / params.la_sat)


def limiting_amp(x: ComplexEnvelope, params: EicParams) -> ComplexEnvelope:
    """Limiter: ``la_sat*tanh(G*x/la_sat)``, then its pole and group delay.

    Ideal mode is a hard limiter ``sign(x)*la_sat``.
    """
    y = x.with_samples(_limit(x.real, params))
    if params.ideal:
        return y
    y = _settled_pole(y, params.la_bw)
    start, taps = fractional_delay_taps(params.la_delay * x.grid.sample_rate)
    return y.with_samples(apply_fractional_delay(y.real, start, taps))


def delay_cell(x: ComplexEnvelope, params: EicParams) -> ComplexEnvelope:
    """Fractional delay of ``params.delay`` with the cell's gain; identity in ideal mode."""
    if params.ideal:
        return x
    start, taps = fractional_delay_taps(params.delay * x.grid.sample_rate)
    return x.with_samples(db_to_amplitude(params.delay_gain) * apply_fractional_delay(x.real, start, taps))


def pd_kappa(params: EicParams) -> float:
    """Scale making the small-signal PD slope equal ``pd_gain`` for unit-circle inputs.

    At the lock point I = Q = c = 1/sqrt(2) the raw detector slope is
    ``G_post * (sqrt(2)*LA(c) - LA'(c))`` with ``G_post`` the product of the
    delay, multiplier and adder gains.
    """
    c = 1.0 / math.sqrt(2.0)
    if params.ideal:
        raw = math.sqrt(2.0) * params.la_sat
    else:
        g = params.la_linear_gain
        la = params.la_sat * math.tanh(g * c / params.la_sat)
        u = g * c / params.la_sat
        dla = 0.0 if u > 350 else g / math.cosh(u) ** 2
        post = db_to_amplitude(params.delay_gain + params.mult_gain + params.adder_gain)
        raw = post * (math.sqrt(2.0) * la - dla)
    return params.pd_gain / raw


def phase_detector(
    I: ComplexEnvelope,
    Q: ComplexEnvelope,
    params: EicParams,
    valid: NDArray[np.bool_] | None = None,
) -> PdOutput:
    """Cross-correlator QPSK detector, ``kappa*(Q_d*LA(I) - I_d*LA(Q))``.

    ``_d`` marks the delay-cell (linear) path. The output is pi/2 periodic
    in the I/Q phase, odd about each lock point, with slope ``pd_gain``
    V/rad there for unit-circle inputs.
    """
    require_same_grid(I, Q)
    i_d, q_d = delay_cell(I, params).real, delay_cell(Q, params).real
    la_i, la_q = limiting_amp(I, params).real, limiting_amp(Q, params).real
    m1 = I.with_samples(q_d * la_i)
    m2 = I.with_samples(i_d * la_q)
    if not params.ideal:
        gm = db_to_amplitude(params.mult_gain)
        m1 = _settled_pole(m1.with_samples(gm * m1.real), params.mult_bw)
        m2 = _settled_pole(m2.with_samples(gm * m2.real), params.mult_bw)
    v = I.with_samples(m1.real - m2.real)
    if not params.ideal:
        v = _settled_pole(v.with_samples(db_to_amplitude(params.adder_gain) * v.real), params.adder_bw)
    v_pd = v.with_samples(pd_kappa(params) * v.real)
    if valid is None:
        valid = np.ones(len(I), dtype=bool)
    return PdOutput(v_pd, np.asarray(valid, dtype=bool))


def cpr_buffer(
    I: ComplexEnvelope, Q: ComplexEnvelope, params: EicParams
) -> tuple[ComplexEnvelope, ComplexEnvelope]:
    """Output stage: gain, 36 GHz pole, and clipping at the 400 mVpp swing."""
    require_same_grid(I, Q)
    out = []
    for x in (I, Q):
        y = x.with_samples(params.buffer_gain * x.real)
        if not params.ideal:
            y = _settled_pole(y, params.out_bw)
        out.append(y.with_samples(np.clip(y.real, -params.la_sat, params.la_sat)))
    return out[0], out[1]


def cpr_chip(
    I_in: ComplexEnvelope,
    Q_in: ComplexEnvelope,
    params: EicParams,
    valid: NDArray[np.bool_] | None = None,
) -> CprOutputs:
    """Input stage, phase detector and buffered I/Q outputs."""
    i_s, q_s = input_stage(I_in, params), input_stage(Q_in, params)
    pd = phase_detector(i_s, q_s, params, valid)
    I_O, Q_O = cpr_buffer(delay_cell(i_s, params), delay_cell(q_s, params), params)
    return CprOutputs(I_O, Q_O, pd)


def static_pd_response(phi: NDArray[np.float64], params: EicParams, amplitude: float = 1.0) -> NDArray[np.float64]:
    """DC detector output for I/Q = amplitude*(cos, sin)(pi/4 + phi)."""
    I = amplitude * np.cos(np.pi / 4 + phi)
    Q = amplitude * np.sin(np.pi / 4 + phi)
    post = 1.0 if params.ideal else db_to_amplitude(params.delay_gain + params.mult_gain + params.adder_gain)
    return pd_kappa(params) * post * (Q * _limit(I, params) - I * _limit(Q, params))


def pole_or_unity(f3db: float | None, dt: float, ideal: bool) -> float:
    """Pole coefficient, or 0 (pass-through) when the block is ideal or unlimited."""
    if ideal or f3db is None:
        return 0.0
    return pole_coefficient(f3db, dt)
