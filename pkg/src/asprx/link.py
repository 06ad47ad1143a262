"""End-to-end link: transmitter, fiber, receiver chip pair, loop and offline metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from . import dsp
from ._kernel import KernelOutputs, run_chain
from .core import ComplexEnvelope, ParameterError, RngStream, TimeGrid, awgn_samples
from .eic import EicParams, static_pd_response
from .loop import LoopConfig, design_pi, first_lock_index, lock_detector, wrap_quarter
from .optics import ChannelSpec, LaserSpec, channel_phase, laser_field, split_3db
from .pic import PicParams, icr_receive, vgc_couple
from .txrx import (
    BITS_PER_SYMBOL,
    BitStream,
    constellation,
    demap_symbols,
    differential_decode,
    differential_encode,
    map_symbols,
    normalize_modulation,
    prbs7,
    pulse_shape,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_LOCK = 2
EXIT_DIVERGED = 3

CLAMP_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class EqualizerSpec:
    enabled: bool = False
    offline_cpr: bool = False
    cpr_window: int = 64
    n_taps: int = 11
    step: float = 0.01
    train_fraction: float = 0.25

    def __post_init__(self) -> None:
        if self.n_taps < 1 or self.n_taps % 2 == 0:
            raise ParameterError("equalizer n_taps must be a positive odd number")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ParameterError("train_fraction must be in (0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one simulated capture."""

    name: str = "custom"
    modulation: str = "QPSK"
    baud: float = 2e9
    sps: int = 16
    n_symbols: int = 100_000
    pulse: str = "NRZ"
    rolloff: float = 0.2
    data: str = "random"
    differential: bool = False
    laser: LaserSpec = field(default_factory=LaserSpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    pic: PicParams = field(default_factory=PicParams)
    eic: EicParams = field(default_factory=EicParams)
    loop: LoopConfig = field(default_factory=LoopConfig)
    equalizer: EqualizerSpec = field(default_factory=EqualizerSpec)
    snr_db: float = math.inf
    seed: int = 1
    settle_symbols: int = 10_000
    lock_deadline: int = 10_000
    lock_smoothing: int = 64
    sample_offset: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "modulation", normalize_modulation(self.modulation))
        if self.n_symbols < 1:
            raise ParameterError("n_symbols must be positive")
        if not self.baud > 0:
            raise ParameterError("baud must be positive")
        if self.data not in ("random", "prbs7"):
            raise ParameterError(f"unknown data source {self.data!r}")
        if self.settle_symbols >= self.n_symbols:
            raise ParameterError("settle_symbols must be shorter than the record")
        if self.differential and self.modulation != "QPSK":
            raise ParameterError("differential coding is defined for QPSK only")
        if self.loop.closed and self.laser.center_frequency_offset != 0.0:
            raise ParameterError(
                "closed-loop runs need zero laser frequency offset: intradyne "
                "operation would require an SSB mixer, which is excluded from this model"
            )

    @property
    def sample_rate(self) -> float:
        return self.baud * self.sps


@dataclass(frozen=True)
class RunResult:
    config: ScenarioConfig
    status: str
    locked: bool
    lock_symbol: int | None
    polarity: int
    kp: float
    ki: float
    pd_slope: float
    sample_offset: int
    chain: KernelOutputs
    theta: NDArray[np.float64]
    phi_err: NDArray[np.float64]
    tx_symbols: NDArray[np.complex128]
    tx_bits: NDArray[np.uint8]
    rx_symbols: NDArray[np.complex128]
    eq_symbols: NDArray[np.complex128] | None
    eq_status: str | None
    metrics: dsp.MetricsRecord
    eye: dsp.EyeMetrics
    eye_waveform: NDArray[np.float64]
    evm_detail: dsp.EvmResult
    ber_detail: dsp.BerResult
    clamp_fraction: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "lock-failure": EXIT_LOCK, "diverged": EXIT_DIVERGED}.get(self.status, EXIT_OK)


def _tx_bits(cfg: ScenarioConfig, rng: RngStream) -> NDArray[np.uint8]:
    n_bits = cfg.n_symbols * BITS_PER_SYMBOL[cfg.modulation]
    if cfg.data == "prbs7":
        seq = prbs7(n=127).bits
        return np.resize(seq, n_bits).astype(np.uint8)
    return rng.generator().integers(0, 2, n_bits, dtype=np.uint8)


def _symbols_for(bits: NDArray[np.uint8], cfg: ScenarioConfig) -> NDArray[np.complex128]:
    if not cfg.differential:
        return map_symbols(bits, cfg.modulation).symbols
    # quadrant index k <-> QPSK point at pi/4 + k*pi/2; Gray labels map onto quadrant increments
    points, _ = constellation("QPSK")
    q_of_point = np.round((np.angle(points) - math.pi / 4) / (math.pi / 2)).astype(int) % 4
    inc = q_of_point[bits.reshape(-1, 2) @ np.array([2, 1])]
    q = differential_encode(inc)
    return np.exp(1j * (math.pi / 4 + q * math.pi / 2))


def _bits_from_symbols(sym: NDArray[np.complex128], cfg: ScenarioConfig) -> NDArray[np.uint8]:
    if not cfg.differential:
        return demap_symbols(sym, cfg.modulation)
    q = np.round((np.angle(sym) - math.pi / 4) / (math.pi / 2)).astype(int) % 4
    inc = differential_decode(q)
    points, labels = constellation("QPSK")
    q_of_point = np.round((np.angle(points) - math.pi / 4) / (math.pi / 2)).astype(int) % 4
    label_of_q = np.empty((4, 2), dtype=np.uint8)
    label_of_q[q_of_point] = labels
    return label_of_q[inc].reshape(-1)


def pd_slope_at(amplitude: float, eic: EicParams, h: float = 1e-4) -> float:
    """Small-signal detector slope (V/rad) for an I/Q amplitude ``amplitude``."""
    v = static_pd_response(np.array([-h, h]), eic, amplitude=amplitude)
    return float((v[1] - v[0]) / (2 * h))


def ps_small_signal_gain(pic: PicParams, v_bias: float) -> float:
    """d(phi)/dV of the shifter at the bias point (rad/V)."""
    if pic.ps_law == "quadratic":
        return max(2 * math.pi * abs(v_bias) / pic.ps_vpi**2, 1e-9)
    return math.pi / pic.ps_vpi


def chain_group_delay(cfg: ScenarioConfig) -> float:
    """Low-frequency group delay from the PD to the I/Q outputs, in samples."""
    if cfg.eic.ideal:
        gd = 0.0
    else:
        gd = cfg.eic.delay + sum(
            1.0 / (2 * math.pi * f) for f in (cfg.eic.input_bw, cfg.eic.out_bw) if f
        )
        if cfg.eic.frontend_bw:
            gd += 1.0 / (2 * math.pi * cfg.eic.frontend_bw)
    if not cfg.pic.ideal:
        gd += 1.0 / (2 * math.pi * cfg.pic.pd_bandwidth)
    return gd * cfg.sample_rate


def nominal_offset(cfg: ScenarioConfig) -> int:
    """Sample index within a symbol at which decisions are taken."""
    if cfg.sample_offset is not None:
        return int(cfg.sample_offset)
    return cfg.sps // 2 + int(round(chain_group_delay(cfg)))


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Simulate one capture and compute its metrics.

    Closed-loop runs that are not locked at the end of the record, or whose
    final lock run starts after ``lock_deadline`` symbols, are reported with
    ``status="lock-failure"``; an equalizer that diverges gives
    ``status="diverged"``.
    """
    grid = TimeGrid(cfg.sample_rate, cfg.n_symbols * cfg.sps)
    rng = RngStream(cfg.seed, "link")
    bits = _tx_bits(cfg, rng.child("bits"))
    tx = _symbols_for(bits, cfg)
    bb = pulse_shape(tx, cfg.sps, cfg.pulse, cfg.rolloff, cfg.baud)
    carrier = laser_field(cfg.laser, grid, rng.child("laser"))
    arm_s, arm_lo = split_3db(carrier)
    peak = np.max(np.abs(bb.samples))
    s_field = arm_s.with_samples(arm_s.samples * bb.samples / (peak if peak > 0 else 1.0))
    theta = channel_phase(grid, cfg.channel, rng.child("fiber"))
    s_field = s_field.with_samples(s_field.samples * cfg.channel.amplitude_scale * np.exp(1j * theta))
    s_in = vgc_couple(s_field, cfg.pic).samples
    lo_in = vgc_couple(arm_lo, cfg.pic).samples

    # nominal I/Q power at the frontend input sets the AWGN level and detector slope
    probe_n = min(grid.n_samples, 1 << 16)
    pg = TimeGrid(grid.sample_rate, probe_n)
    bias = cfg.loop.v_ctrl_bias
    probe = icr_receive(
        ComplexEnvelope(pg, s_field.samples[:probe_n], "sqrt-watt"),
        ComplexEnvelope(pg, arm_lo.samples[:probe_n], "sqrt-watt"),
        ComplexEnvelope(pg, np.full(probe_n, bias), "volt"),
        cfg.pic,
    )
    p_sig = float(np.mean(probe.I_I.real**2 + probe.Q_I.real**2))
    if math.isinf(cfg.snr_db):
        noise = np.zeros(grid.n_samples, dtype=np.complex128)
    else:
        noise = awgn_samples(grid.n_samples, p_sig * 10.0 ** (-cfg.snr_db / 10.0), rng.child("awgn"))
    amp = cfg.eic.frontend_linear_gain * math.sqrt(p_sig)
    slope = pd_slope_at(amp, cfg.eic)
    if slope <= 0:
        raise ParameterError("detector slope at the operating point is not positive")

    loop = cfg.loop
    kp, ki = loop.kp, loop.ki
    if kp is None or ki is None:
        dkp, dki = design_pi(slope, ps_small_signal_gain(cfg.pic, bias), cfg.pic.ps_speed,
                             loop.bandwidth, loop.zero_ratio)
        kp = dkp if kp is None else kp
        ki = dki if ki is None else ki
    loop = loop.with_gains(kp, ki)

    shot = None
    if cfg.pic.shot_noise and not cfg.pic.ideal:
        shot = np.stack([rng.child(f"pd{k}").generator().standard_normal(grid.n_samples) for k in range(4)])

    offset = nominal_offset(cfg)
    centers = np.arange(cfg.n_symbols) * cfg.sps + offset
    centers = centers[centers < grid.n_samples]

    def simulate(lp: LoopConfig):
        out = run_chain(s_in, lo_in, noise, cfg.pic, cfg.eic, lp, grid.dt, shot)
        if not lp.closed:
            return out, False, None
        v_sym = ndimage.uniform_filter1d(out.v_pd[centers], cfg.lock_smoothing, mode="nearest")
        flags = lock_detector(v_sym, loop.lock_threshold * slope, loop.lock_hold, loop.lock_window)
        idx = first_lock_index(flags)
        return out, idx is not None and idx <= cfg.lock_deadline, idx

    chain, locked, lock_idx = simulate(loop)
    if loop.closed and not locked and loop.auto_polarity:
        flipped = replace(loop, polarity=-loop.polarity)
        alt = simulate(flipped)
        if alt[1]:
            chain, locked, lock_idx = alt
            loop = flipped

    status = "ok"
    if loop.closed and not locked:
        status = "lock-failure"

    phi_err = wrap_quarter(theta + chain.phi_d)
    rx_all = chain.I_O[centers] + 1j * chain.Q_O[centers]
    n_c = centers.size
    start = cfg.settle_symbols
    rx = rx_all[start:n_c]
    ref = tx[start:n_c]

    eq_symbols = None
    eq_status = None
    eye_wave_c = chain.I_O + 1j * chain.Q_O
    eye_first = start * cfg.sps + offset - cfg.sps // 2
    meas_sym, meas_ref = rx, ref
    eqs = cfg.equalizer
    if eqs.enabled:
        first = start * cfg.sps + offset
        wave = eye_wave_c
        if eqs.offline_cpr:
            ph = dsp.vv_phase(rx_all, eqs.cpr_window)
            wave = dsp.derotate_waveform(wave, ph, cfg.sps, offset)
        n_train = int(eqs.train_fraction * ref.size)
        res = dsp.lms_ffe(wave, cfg.sps, first, ref, eqs.n_taps, eqs.step, n_train, cfg.modulation)
        eq_status = res.status
        if res.status == "diverged":
            status = "diverged"
        eq_symbols = res.symbols
        meas_sym, meas_ref = res.symbols[n_train:], ref[n_train : res.symbols.size]
        eye_wave_c = dsp.apply_ffe(wave, res.taps, cfg.sps, res.input_scale)
        eye_first = (start + n_train) * cfg.sps + offset - cfg.sps // 2

    if status == "diverged" or not np.all(np.isfinite(meas_sym)):
        evm = dsp.EvmResult(float("nan"), 0j, 0)
        ber_res = dsp.BerResult(float("nan"), 0, 0, 0, 0, "diverged")
    else:
        evm = dsp.evm_detail(meas_sym, meas_ref)
        # decisions on the gain-corrected symbols so amplitude scaling does not bias them
        scale = abs(evm.gain) if evm.gain != 0 else 1.0
        rx_bits = _bits_from_symbols(meas_sym * scale, cfg)
        tx_bits = _bits_from_symbols(meas_ref, cfg)
        if cfg.differential:
            # the first symbol of the segment only serves as the phase reference
            rx_bits, tx_bits = rx_bits[2:], tx_bits[2:]
        ber_res = dsp.ber(rx_bits, tx_bits, cfg.modulation)

    # a loop driven past its stability limit rails the drive (a limit cycle);
    # flag it instead of letting a tracking-but-chattering loop pass silently
    warnings: list[str] = []
    clamp_fraction = 0.0
    if loop.closed:
        lo, hi = loop.v_ctrl_range
        first_sym = lock_idx if lock_idx is not None else start
        v_tail = chain.v_ctrl[first_sym * cfg.sps :]
        if v_tail.size:
            clamp_fraction = float(np.mean((v_tail <= lo) | (v_tail >= hi)))
        if clamp_fraction > CLAMP_WARN_FRACTION:
            warnings.append(
                f"drive on its clamp {100 * clamp_fraction:.1f}% of the time after lock: "
                "loop gain beyond the stability limit (limit cycle)"
            )

    eye_rail = eye_wave_c.real
    eye = dsp.eye_metrics(eye_rail, cfg.sps, eye_first)
    metrics = dsp.MetricsRecord(
        evm_rms=100.0 * float(evm.evm) if math.isfinite(evm.evm) else float("inf"),
        ber=float(ber_res.ber) if math.isfinite(ber_res.ber) else float("nan"),
        eye_vertical=eye.vertical,
        eye_horizontal=eye.horizontal,
        n_symbols=int(meas_sym.size),
        ambiguity_rotation=int(evm.ambiguity_rotation),
    )
    return RunResult(
        config=cfg,
        status=status,
        locked=bool(locked),
        lock_symbol=lock_idx,
        polarity=loop.polarity,
        kp=float(kp),
        ki=float(ki),
        pd_slope=slope,
        sample_offset=offset,
        chain=chain,
        theta=theta,
        phi_err=phi_err,
        tx_symbols=tx,
        tx_bits=bits,
        rx_symbols=rx_all,
        eq_symbols=eq_symbols,
        eq_status=eq_status,
        metrics=metrics,
        eye=eye,
        eye_waveform=eye_rail[eye_first:],
        evm_detail=evm,
        ber_detail=ber_res,
        clamp_fraction=clamp_fraction,
        warnings=tuple(warnings),
    )


def locked_slice(result: RunResult) -> slice:
    """Sample range from lock acquisition (or the settle point in open loop) to the end."""
    cfg = result.config
    start_sym = result.lock_symbol if result.lock_symbol is not None else cfg.settle_symbols
    return slice(start_sym * cfg.sps, None)


def residual_phase_rms(result: RunResult) -> float:
    """RMS of the ground-truth phase error folded to the nearest QPSK lock point."""
    return float(np.sqrt(np.mean(result.phi_err[locked_slice(result)] ** 2)))


def io_correlation(result: RunResult) -> float:
    """Correlation of I_O with cos of the message phase, after ambiguity alignment.

    Evaluated at the decision instants of the locked segment; the rotation
    ``k*pi/2`` is estimated from the raw I_O/Q_O symbols themselves (the
    run's EVM may refer to equalizer output, which carries no rotation).
    """
    cfg = result.config
    start = result.lock_symbol if result.lock_symbol is not None else cfg.settle_symbols
    n = result.rx_symbols.size
    io = result.rx_symbols.real[start:n]
    phi_m = np.angle(result.tx_symbols[start:n])
    if io.size < dsp.MIN_EVM_SYMBOLS or np.std(io) == 0:
        return 0.0
    k = dsp.evm_detail(result.rx_symbols[start:n], result.tx_symbols[start:n]).ambiguity_rotation
    ref = np.cos(phi_m - k * math.pi / 2)
    return float(np.corrcoef(io, ref)[0, 1])


def rotation_spread(result: RunResult) -> float:
    """Circular variance of the modulation-stripped (fourth-power) symbol angle."""
    s = result.rx_symbols[result.config.settle_symbols :]
    return dsp.circular_variance(4.0 * np.angle(s))
