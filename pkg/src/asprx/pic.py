"""Silicon-photonic coherent receiver: couplers, LO phase shifter, 90 degree hybrid, BPDs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    ComplexEnvelope,
    ParameterError,
    RngStream,
    pole_coefficient,
    require_same_grid,
    require_unit,
    single_pole_lowpass,
)

ELECTRON_CHARGE = 1.602176634e-19

Mode = Literal["ideal", "physical"]


@dataclass(frozen=True)
class PicParams:
    """ICR device parameters; defaults are the measured chip values.

    ``mode="ideal"`` keeps only the phase shifter dynamics and evaluates the
    normalized hybrid/photocurrent algebra exactly (unit responsivity
    scaled so unit fields give ``I1 = 1 + cos``).
    """

    vgc_insertion_loss: float = 4.0
    mmi_excess_loss: float = 0.04
    mmi_imbalance: float = 0.02
    ps_vpi: float = 6.0
    ps_speed: float = 50e3
    ps_law: Literal["linear", "quadratic"] = "linear"
    pd_responsivity: float = 0.45
    pd_bandwidth: float = 50e9
    pd_dark: float = 15e-9
    load: float = 50.0
    quadrature_error: float = 0.0
    shot_noise: bool = False
    mode: Mode = "physical"

    def __post_init__(self) -> None:
        if not self.ps_vpi > 0:
            raise ParameterError("ps_vpi must be positive")
        if not 0 < self.pd_responsivity <= 1.2:
            raise ParameterError("pd_responsivity must be in (0, 1.2] A/W")
        if min(self.vgc_insertion_loss, self.mmi_excess_loss, self.mmi_imbalance) < 0:
            raise ParameterError("losses must be >= 0")
        if self.mode not in ("ideal", "physical"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.ps_law not in ("linear", "quadratic"):
            raise ParameterError(f"unknown ps_law {self.ps_law!r}")

    @property
    def ideal(self) -> bool:
        return self.mode == "ideal"

    @property
    def pd_scale(self) -> float:
        """Photocurrent per unit optical power (A/W, or 2 in normalized units)."""
        return 2.0 if self.ideal else self.pd_responsivity

    @property
    def load_scale(self) -> float:
        """Balanced current to voltage factor (ohm, or 1/2 in normalized units)."""
        return 0.5 if self.ideal else self.load


@dataclass(frozen=True)
class HybridOutputs:
    E6: ComplexEnvelope
    E7: ComplexEnvelope
    E8: ComplexEnvelope
    E9: ComplexEnvelope

    def as_tuple(self) -> tuple[ComplexEnvelope, ...]:
        return (self.E6, self.E7, self.E8, self.E9)


@dataclass(frozen=True)
class BalancedOutputs:
    I_I: ComplexEnvelope
    Q_I: ComplexEnvelope
    raw_currents: tuple[ComplexEnvelope, ComplexEnvelope, ComplexEnvelope, ComplexEnvelope]
    phi_d: NDArray[np.float64]


def vgc_couple(x: ComplexEnvelope, params: PicParams) -> ComplexEnvelope:
    require_unit(x, "sqrt-watt")
    if params.ideal:
        return x
    return x.with_samples(x.samples * 10.0 ** (-params.vgc_insertion_loss / 20.0))


def ps_drive(v: ArrayLike, params: PicParams) -> NDArray[np.float64]:
    """Settled phase for control voltage ``v`` (before the thermal pole)."""
    r = np.asarray(v, dtype=float) / params.ps_vpi
    if params.ps_law == "quadratic":
        return math.pi * r * np.abs(r)
    return math.pi * r


def ps_phase(
    v_ctrl: ComplexEnvelope, params: PicParams, initial_voltage: float = 0.0
) -> NDArray[np.float64]:
    """Phase delay of the thermo-optic shifter, ``lowpass(drive(v))``.

    The thermal state starts settled at ``initial_voltage``.
    """
    require_unit(v_ctrl, "volt")
    drive = v_ctrl.with_samples(ps_drive(v_ctrl.real, params))
    init = float(ps_drive(initial_voltage, params))
    return single_pole_lowpass(drive, params.ps_speed, initial=init).real


def thermo_ps(
    x: ComplexEnvelope,
    v_ctrl: ComplexEnvelope,
    params: PicParams,
    initial_voltage: float = 0.0,
) -> ComplexEnvelope:
    """Delay the optical phase by ``phi_d(t)``: output ``x * exp(-j*phi_d)``."""
    require_same_grid(x, v_ctrl)
    phi = ps_phase(v_ctrl, params, initial_voltage)
    return x.with_samples(x.samples * np.exp(-1j * phi))


def hybrid_coefficients(params: PicParams) -> NDArray[np.complex128]:
    """4x2 matrix M with ``[E6, E7, E8, E9] = M @ [S, LO]``."""
    if params.ideal:
        loss = g_i = g_q = 1.0
        rot = 1j
    else:
        loss = 10.0 ** (-2.0 * params.mmi_excess_loss / 20.0)
        g_i = 10.0 ** (params.mmi_imbalance / 40.0)
        g_q = 10.0 ** (-params.mmi_imbalance / 40.0)
        rot = 1j * np.exp(1j * params.quadrature_error)
    return 0.5 * loss * np.array(
        [
            [g_i, g_i],
            [g_i, -g_i],
            [g_q, g_q * rot],
            [g_q, -g_q * rot],
        ],
        dtype=np.complex128,
    )


def hybrid90(S: ComplexEnvelope, LO: ComplexEnvelope, params: PicParams) -> HybridOutputs:
    """Ideal mode: E6=(S+LO)/2, E7=(S-LO)/2, E8=(S+jLO)/2, E9=(S-jLO)/2."""
    require_same_grid(S, LO)
    require_unit(S, "sqrt-watt")
    require_unit(LO, "sqrt-watt")
    m = hybrid_coefficients(params)
    if params.ideal:
        s, lo = S.samples, LO.samples
        outs = [(s + lo) / 2, (s - lo) / 2, (s + 1j * lo) / 2, (s - 1j * lo) / 2]
    else:
        outs = [m[k, 0] * S.samples + m[k, 1] * LO.samples for k in range(4)]
    return HybridOutputs(*(S.with_samples(o) for o in outs))


def photodetect(
    E: ComplexEnvelope, params: PicParams, rng: RngStream | None = None
) -> ComplexEnvelope:
    """Photocurrent of one Ge detector.

    Physical mode: ``lowpass(R*|E|^2 [+ shot noise]) + I_dark`` with the
    pole starting settled on the first sample. Ideal mode: ``2*|E|^2``.
    """
    require_unit(E, "sqrt-watt")
    p = E.power
    if params.ideal:
        return ComplexEnvelope(E.grid, params.pd_scale * p, "ampere")
    i = params.pd_responsivity * p
    if params.shot_noise and rng is not None:
        i = i + shot_noise_sigma(i + params.pd_dark, E.grid.sample_rate) * rng.generator().standard_normal(i.size)
    raw = ComplexEnvelope(E.grid, i, "ampere")
    out = single_pole_lowpass(raw, params.pd_bandwidth, initial=i[0])
    return out.with_samples(out.real + params.pd_dark)


def shot_noise_sigma(current: ArrayLike, sample_rate: float) -> NDArray[np.float64]:
    """Per-sample shot-noise std over the Nyquist bandwidth."""
    return np.sqrt(2.0 * ELECTRON_CHARGE * np.abs(current) * sample_rate / 2.0)


def icr_receive(
    S: ComplexEnvelope,
    LO: ComplexEnvelope,
    v_ctrl: ComplexEnvelope,
    params: PicParams,
    rng: RngStream | None = None,
    ps_initial: float | None = None,
) -> BalancedOutputs:
    """Full ICR: couplers, LO phase shifter, hybrid, four PDs, balanced 50 ohm loads.

    In ideal mode ``I_I = cos(dphi)`` and ``Q_I = sin(dphi)`` where ``dphi``
    is the phase of ``S`` relative to the shifted LO.
    """
    require_same_grid(S, LO, v_ctrl)
    s_in = vgc_couple(S, params)
    lo_in = vgc_couple(LO, params)
    init = float(v_ctrl.real[0]) if ps_initial is None else ps_initial
    phi = ps_phase(v_ctrl, params, initial_voltage=init)
    lo_shift = lo_in.with_samples(lo_in.samples * np.exp(-1j * phi))
    fields = hybrid90(s_in, lo_shift, params).as_tuple()
    currents = tuple(
        photodetect(e, params, None if rng is None else rng.child(f"pd{k}"))
        for k, e in enumerate(fields)
    )
    i1, i2, i3, i4 = (c.real for c in currents)
    scale = params.load_scale
    I_I = ComplexEnvelope(S.grid, (i1 - i2) * scale, "volt")
    Q_I = ComplexEnvelope(S.grid, (i3 - i4) * scale, "volt")
    return BalancedOutputs(I_I, Q_I, currents, phi)  # type: ignore[arg-type]


def interferometer_power(v: ArrayLike, params: PicParams) -> NDArray[np.float64]:
    """Normalized output of an MZI with the shifter in one arm, settled at DC voltage ``v``.

    Ideal mode gives ``cos^2(pi*v/(2*Vpi))``.
    """
    phi = ps_drive(v, params)
    if params.ideal:
        a1 = a2 = 1.0
    else:
        a1 = 10.0 ** (params.mmi_imbalance / 40.0)
        a2 = 10.0 ** (-params.mmi_imbalance / 40.0)
    out = np.abs(a1 + a2 * np.exp(-1j * phi)) ** 2
    return out / (a1 + a2) ** 2


def ps_pole(params: PicParams, dt: float) -> float:
    return pole_coefficient(params.ps_speed, dt)
