"""Costas loop filter, lock detection and PI gain design."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import ParameterError


@dataclass(frozen=True)
class LoopConfig:
    """PI loop filter with level translation to the phase-shifter drive.

    ``kp``/``ki`` left as None are derived by :func:`design_pi` from the
    crossover ``bandwidth`` and the detector slope seen in the link.
    ``polarity=-1`` gives negative feedback with the shifter's phase-delay
    sign convention. ``prefilter_bw`` is a one-pole smoothing of ``v_pd``
    ahead of the PI stage (the loop amplifier's bandwidth); it keeps the
    symbol-rate pattern ripple of the detector away from the drive clamp.
    """

    kp: float | None = None
    ki: float | None = None
    polarity: int = -1
    v_ctrl_range: tuple[float, float] = (0.0, 12.0)
    v_ctrl_bias: float = 6.0
    closed: bool = True
    bandwidth: float = 2e6
    zero_ratio: float = 0.1
    prefilter_bw: float | None = 20e6
    extra_latency: float = 28.1e-12
    lock_threshold: float = 0.1
    lock_window: int = 256
    lock_hold: int = 4
    auto_polarity: bool = True

    def __post_init__(self) -> None:
        lo, hi = self.v_ctrl_range
        if not lo < hi:
            raise ParameterError("v_ctrl_range must satisfy V_min < V_max")
        object.__setattr__(self, "v_ctrl_range", (float(lo), float(hi)))
        if self.ki is not None and self.ki < 0:
            raise ParameterError("ki must be >= 0")
        if self.polarity not in (1, -1):
            raise ParameterError("polarity must be +1 or -1")
        if not lo <= self.v_ctrl_bias <= hi:
            raise ParameterError("v_ctrl_bias must lie inside v_ctrl_range")
        if self.prefilter_bw is not None and not self.prefilter_bw > 0:
            raise ParameterError("prefilter_bw must be positive or None")
        if self.extra_latency < 0:
            raise ParameterError("extra_latency must be >= 0")

    def with_gains(self, kp: float, ki: float) -> LoopConfig:
        return replace(self, kp=float(kp), ki=float(ki))


@dataclass(frozen=True)
class LoopState:
    v_pd: float = 0.0
    integrator: float = 0.0
    v_ctrl: float = 6.0
    phi_d: float = 0.0
    locked: bool = False
    phi_err_residual: float = 0.0


def loop_filter_step(state: LoopState, v_pd_sample: float, dt: float, cfg: LoopConfig) -> LoopState:
    """One PI update with output clamping and conditional-integration anti-windup.

    The integrator is frozen while the output sits on a clamp and the new
    increment would push it further out.
    """
    kp = cfg.kp or 0.0
    ki = cfg.ki or 0.0
    lo, hi = cfg.v_ctrl_range
    e = cfg.polarity * v_pd_sample
    step = ki * e * dt
    integ = state.integrator + step
    v = cfg.v_ctrl_bias + kp * e + integ
    if v > hi:
        if step > 0:
            integ = state.integrator
        v = hi
    elif v < lo:
        if step < 0:
            integ = state.integrator
        v = lo
    return replace(state, v_pd=v_pd_sample, integrator=integ, v_ctrl=v)


def design_pi(
    pd_slope: float,
    ps_gain: float,
    ps_pole: float,
    bandwidth: float,
    zero_ratio: float = 0.1,
) -> tuple[float, float]:
    """PI gains giving unity open-loop gain at ``bandwidth``.

    Plant: detector slope (V/rad) times shifter gain (rad/V) through the
    shifter's thermal pole at ``ps_pole`` Hz. The PI zero sits at
    ``zero_ratio * bandwidth``.
    """
    if pd_slope <= 0 or ps_gain <= 0:
        raise ParameterError("detector slope and shifter gain must be positive")
    wc = 2 * math.pi * bandwidth
    wp = 2 * math.pi * ps_pole
    wz = zero_ratio * wc
    k = pd_slope * ps_gain
    kp = math.sqrt(1 + (wc / wp) ** 2) / (k * math.sqrt(1 + (wz / wc) ** 2))
    return kp, kp * wz


def lock_detector(
    v_pd: ArrayLike, threshold: float, hold: int = 4, window: int = 256
) -> NDArray[np.bool_]:
    """Per-sample lock flag from windowed RMS of ``v_pd``.

    The record is cut into consecutive windows. A window is flagged locked
    once it completes a run of ``hold`` consecutive quiet windows (RMS
    below ``threshold``); samples past the last full window inherit the
    last flag.
    """
    x = np.asarray(v_pd, dtype=float)
    if window < 100:
        raise ParameterError("lock window must be >= 100 samples")
    n_win = x.size // window
    locked = np.zeros(x.size, dtype=bool)
    if n_win == 0:
        return locked
    rms = np.sqrt(np.mean(x[: n_win * window].reshape(n_win, window) ** 2, axis=1))
    run = 0
    for w in range(n_win):
        run = run + 1 if rms[w] < threshold else 0
        if run >= hold:
            locked[w * window : (w + 1) * window] = True
    if locked[n_win * window - 1]:
        locked[n_win * window :] = True
    return locked


def first_lock_index(locked: NDArray[np.bool_]) -> int | None:
    """Start of the final uninterrupted locked run, or None."""
    if not locked.size or not locked[-1]:
        return None
    off = np.flatnonzero(~locked)
    return 0 if off.size == 0 else int(off[-1]) + 1


def wrap_quarter(phi: ArrayLike) -> NDArray[np.float64]:
    """Fold a phase into [-pi/4, pi/4), the distance to the nearest QPSK lock point."""
    q = math.pi / 2
    return (np.asarray(phi, dtype=float) + q / 2) % q - q / 2
