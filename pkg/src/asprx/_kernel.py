"""Sample-stepped receiver chain with the phase-shifter feedback closed.

The arithmetic mirrors the vectorized blocks in ``pic`` and ``eic``
operation for operation; ``tests/test_link.py`` checks the open-loop
output of this kernel against the vectorized chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import eic as eic_mod
from .eic import EicParams
from .pic import PicParams, hybrid_coefficients
from .core import db_to_amplitude, pole_coefficient
from .loop import LoopConfig


@dataclass(frozen=True)
class KernelOutputs:
    I_O: np.ndarray
    Q_O: np.ndarray
    v_pd: np.ndarray
    v_ctrl: np.ndarray
    phi_d: np.ndarray
    fe_I: np.ndarray
    fe_Q: np.ndarray
    pd_in_I: np.ndarray
    pd_in_Q: np.ndarray


# float parameter slots
(P_PD_SCALE, P_PD_A, P_PD_DARK, P_LOAD, P_SHOT, P_FE_GAIN, P_FE_A, P_IN_A, P_LA_SAT,
 P_LA_G, P_LA_A, P_D_GAIN, P_M_GAIN, P_M_A, P_ADD_GAIN, P_ADD_A, P_KAPPA, P_OUT_A,
 P_BUF_GAIN, P_KP, P_KI, P_POL, P_VMIN, P_VMAX, P_BIAS, P_PS_A, P_VPI, P_DT, P_LF_A) = range(29)
# int parameter slots
I_IDEAL_LA, I_CLOSED, I_LATENCY, I_PS_QUAD, I_D_START, I_LA_START = range(6)


def build_parameters(pic: PicParams, eic: EicParams, loop: LoopConfig, dt: float):
    fs = 1.0 / dt
    ideal = eic.ideal

    def pole(f, flag=False):
        return 0.0 if (flag or f is None) else pole_coefficient(f, dt)

    d_start, d_taps = (0, np.ones(1)) if ideal else eic_mod.fractional_delay_taps(eic.delay * fs)
    la_start, la_taps = (0, np.ones(1)) if ideal else eic_mod.fractional_delay_taps(eic.la_delay * fs)
    f = np.zeros(29)
    f[P_PD_SCALE] = pic.pd_scale
    f[P_PD_A] = pole(pic.pd_bandwidth, pic.ideal)
    f[P_PD_DARK] = 0.0 if pic.ideal else pic.pd_dark
    f[P_LOAD] = pic.load_scale
    f[P_SHOT] = 1.0 if (pic.shot_noise and not pic.ideal) else 0.0
    f[P_FE_GAIN] = eic.frontend_linear_gain
    f[P_FE_A] = pole(eic.frontend_bw, ideal)
    f[P_IN_A] = pole(eic.input_bw, ideal)
    f[P_LA_SAT] = eic.la_sat
    f[P_LA_G] = eic.la_linear_gain
    f[P_LA_A] = pole(eic.la_bw, ideal)
    f[P_D_GAIN] = 1.0 if ideal else db_to_amplitude(eic.delay_gain)
    f[P_M_GAIN] = 1.0 if ideal else db_to_amplitude(eic.mult_gain)
    f[P_M_A] = pole(eic.mult_bw, ideal)
    f[P_ADD_GAIN] = 1.0 if ideal else db_to_amplitude(eic.adder_gain)
    f[P_ADD_A] = pole(eic.adder_bw, ideal)
    f[P_KAPPA] = eic_mod.pd_kappa(eic)
    f[P_OUT_A] = pole(eic.out_bw, ideal)
    f[P_BUF_GAIN] = eic.buffer_gain
    f[P_KP] = loop.kp or 0.0
    f[P_KI] = loop.ki or 0.0
    f[P_POL] = loop.polarity
    f[P_VMIN], f[P_VMAX] = loop.v_ctrl_range
    f[P_BIAS] = loop.v_ctrl_bias
    f[P_PS_A] = pole_coefficient(pic.ps_speed, dt)
    f[P_VPI] = pic.ps_vpi
    f[P_DT] = dt
    f[P_LF_A] = pole(loop.prefilter_bw)
    ints = np.zeros(6, dtype=np.int64)
    ints[I_IDEAL_LA] = 1 if ideal else 0
    ints[I_CLOSED] = 1 if loop.closed else 0
    ints[I_LATENCY] = 1 + int(round(loop.extra_latency * fs))
    ints[I_PS_QUAD] = 1 if pic.ps_law == "quadratic" else 0
    ints[I_D_START] = d_start
    ints[I_LA_START] = la_start
    hyb = hybrid_coefficients(pic)
    return f, ints, hyb, np.asarray(d_taps, float), np.asarray(la_taps, float)


@njit(cache=True)
def _pole(y, x, a):
    return a * y + (1.0 - a) * x


@njit(cache=True)
def _ps_drive(v, vpi, quad):
    r = v / vpi
    if quad:
        return math.pi * r * abs(r)
    return math.pi * r


@njit(cache=True)
def _fir(hist, pos, size, start, taps):
    acc = 0.0
    for k in range(taps.size):
        acc += taps[k] * hist[(pos - start - k) % size]
    return acc


@njit(cache=True)
def _run(s, lo, noise_i, noise_q, shot_n, f, ints, hyb, d_taps, la_taps,
         out_io, out_qo, out_vpd, out_vctrl, out_phi, out_fei, out_feq, out_pdi, out_pdq):
    n = s.size
    ideal_la = ints[I_IDEAL_LA] == 1
    closed = ints[I_CLOSED] == 1
    latency = ints[I_LATENCY]
    quad = ints[I_PS_QUAD] == 1
    d_start = ints[I_D_START]
    la_start = ints[I_LA_START]
    hsize = 64
    while hsize <= max(d_start, la_start) + max(d_taps.size, la_taps.size) + 1:
        hsize *= 2
    h_i = np.zeros(hsize)
    h_q = np.zeros(hsize)
    h_lai = np.zeros(hsize)
    h_laq = np.zeros(hsize)
    vsize = latency + 1
    v_hist = np.full(vsize, f[P_BIAS])

    pd_a = f[P_PD_A]
    pd_scale = f[P_PD_SCALE]
    ps_a = f[P_PS_A]
    dt = f[P_DT]
    kp = f[P_KP]
    ki = f[P_KI]
    pol = f[P_POL]
    vmin = f[P_VMIN]
    vmax = f[P_VMAX]
    bias = f[P_BIAS]
    la_sat = f[P_LA_SAT]
    la_g = f[P_LA_G]
    shot = f[P_SHOT] > 0.0
    lf_a = f[P_LF_A]
    v_f = 0.0

    phi = _ps_drive(bias, f[P_VPI], quad)
    i_pd = np.zeros(4)
    fe_i = 0.0
    fe_q = 0.0
    in_i = 0.0
    in_q = 0.0
    la_i = 0.0
    la_q = 0.0
    m1 = 0.0
    m2 = 0.0
    add = 0.0
    o_i = 0.0
    o_q = 0.0
    integ = 0.0
    v_ctrl = bias
    e_fields = np.zeros(4, dtype=np.complex128)

    for t in range(n):
        v_app = v_hist[(t - latency) % vsize] if t >= latency else bias
        phi = _pole(phi, _ps_drive(v_app, f[P_VPI], quad), ps_a)
        lo_sh = lo[t] * complex(math.cos(phi), -math.sin(phi))
        for k in range(4):
            e_fields[k] = hyb[k, 0] * s[t] + hyb[k, 1] * lo_sh
        for k in range(4):
            p = pd_scale * (e_fields[k].real ** 2 + e_fields[k].imag ** 2)
            if shot:
                p += math.sqrt(2.0 * 1.602176634e-19 * abs(p + f[P_PD_DARK]) / (2.0 * dt)) * shot_n[k, t]
            if t == 0:
                i_pd[k] = p
            else:
                i_pd[k] = _pole(i_pd[k], p, pd_a)
        ii = ((i_pd[0] + f[P_PD_DARK]) - (i_pd[1] + f[P_PD_DARK])) * f[P_LOAD]
        qi = ((i_pd[2] + f[P_PD_DARK]) - (i_pd[3] + f[P_PD_DARK])) * f[P_LOAD]

        xi = (ii + noise_i[t]) * f[P_FE_GAIN]
        xq = (qi + noise_q[t]) * f[P_FE_GAIN]
        if t == 0:
            fe_i, fe_q, in_i, in_q = xi, xq, xi, xq
        else:
            fe_i = _pole(fe_i, xi, f[P_FE_A])
            fe_q = _pole(fe_q, xq, f[P_FE_A])
            in_i = _pole(in_i, fe_i, f[P_IN_A])
            in_q = _pole(in_q, fe_q, f[P_IN_A])
        out_fei[t] = fe_i
        out_feq[t] = fe_q
        out_pdi[t] = in_i
        out_pdq[t] = in_q

        pos = t % hsize
        if t == 0:
            for k in range(hsize):
                h_i[k] = in_i
                h_q[k] = in_q
        h_i[pos] = in_i
        h_q[pos] = in_q
        d_i = f[P_D_GAIN] * _fir(h_i, pos, hsize, d_start, d_taps)
        d_q = f[P_D_GAIN] * _fir(h_q, pos, hsize, d_start, d_taps)

        if ideal_la:
            li = la_sat * (1.0 if in_i > 0 else (-1.0 if in_i < 0 else 0.0))
            lq = la_sat * (1.0 if in_q > 0 else (-1.0 if in_q < 0 else 0.0))
        else:
            li = la_sat * math.tanh(la_g * in_i / la_sat)
            lq = la_sat * math.tanh(la_g * in_q / la_sat)
        if t == 0:
            la_i, la_q = li, lq
            for k in range(hsize):
                h_lai[k] = la_i
                h_laq[k] = la_q
        else:
            la_i = _pole(la_i, li, f[P_LA_A])
            la_q = _pole(la_q, lq, f[P_LA_A])
        h_lai[pos] = la_i
        h_laq[pos] = la_q
        lad_i = _fir(h_lai, pos, hsize, la_start, la_taps)
        lad_q = _fir(h_laq, pos, hsize, la_start, la_taps)

        p1 = f[P_M_GAIN] * (d_q * lad_i)
        p2 = f[P_M_GAIN] * (d_i * lad_q)
        if t == 0:
            m1, m2 = p1, p2
        else:
            m1 = _pole(m1, p1, f[P_M_A])
            m2 = _pole(m2, p2, f[P_M_A])
        a_in = f[P_ADD_GAIN] * (m1 - m2)
        if t == 0:
            add = a_in
        else:
            add = _pole(add, a_in, f[P_ADD_A])
        v_pd = f[P_KAPPA] * add

        bi = f[P_BUF_GAIN] * d_i
        bq = f[P_BUF_GAIN] * d_q
        if t == 0:
            o_i, o_q = bi, bq
        else:
            o_i = _pole(o_i, bi, f[P_OUT_A])
            o_q = _pole(o_q, bq, f[P_OUT_A])
        out_io[t] = min(max(o_i, -la_sat), la_sat)
        out_qo[t] = min(max(o_q, -la_sat), la_sat)
        out_vpd[t] = v_pd
        out_phi[t] = phi

        if t == 0:
            v_f = v_pd
        else:
            v_f = _pole(v_f, v_pd, lf_a)
        if closed:
            e = pol * v_f
            step = ki * e * dt
            new_integ = integ + step
            v = bias + kp * e + new_integ
            if v > vmax:
                if step <= 0:
                    integ = new_integ
                v = vmax
            elif v < vmin:
                if step >= 0:
                    integ = new_integ
                v = vmin
            else:
                integ = new_integ
            v_ctrl = v
        out_vctrl[t] = v_ctrl
        v_hist[t % vsize] = v_ctrl


def run_chain(
    s: np.ndarray,
    lo: np.ndarray,
    noise: np.ndarray,
    pic: PicParams,
    eic: EicParams,
    loop: LoopConfig,
    dt: float,
    shot_normals: np.ndarray | None = None,
) -> KernelOutputs:
    """Step the full receiver over pre-computed S and LO fields (after the couplers)."""
    n = s.size
    f, ints, hyb, d_taps, la_taps = build_parameters(pic, eic, loop, dt)
    if shot_normals is None:
        shot_normals = np.zeros((4, 1))
    outs = [np.empty(n) for _ in range(9)]
    _run(
        np.ascontiguousarray(s, dtype=np.complex128),
        np.ascontiguousarray(lo, dtype=np.complex128),
        np.ascontiguousarray(noise.real, dtype=np.float64),
        np.ascontiguousarray(noise.imag, dtype=np.float64),
        np.ascontiguousarray(shot_normals, dtype=np.float64),
        f, ints, np.ascontiguousarray(hyb), d_taps, la_taps, *outs,
    )
    return KernelOutputs(*outs)
