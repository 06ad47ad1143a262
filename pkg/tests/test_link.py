import math
from dataclasses import replace

import numpy as np
import pytest

from asprx.link import (
    ScenarioConfig,
    io_correlation,
    residual_phase_rms,
    rotation_spread,
    run_scenario,
)
from asprx.loop import LoopConfig
from asprx.optics import ChannelSpec, RandomWalkDrift, SinusoidDrift
from asprx.pic import PicParams

SHORT = ScenarioConfig(
    name="short", n_symbols=20_000, settle_symbols=5000,
    channel=ChannelSpec(drift=(RandomWalkDrift(math.pi**2 * 1e3),), initial_phase=0.6), snr_db=30.0,
)

# 1 kHz vibration tone over one full period: 100 MBaud x 1e5 symbols = 1 ms
TONE = ScenarioConfig(
    name="tone", baud=100e6, sps=16, n_symbols=100_000, settle_symbols=5000,
    channel=ChannelSpec(drift=(SinusoidDrift(1e3, 2.0),), initial_phase=0.3), snr_db=30.0,
)


@pytest.fixture(scope="module")
def tone_runs():
    return {c: run_scenario(replace(TONE, loop=LoopConfig(closed=c))) for c in (False, True)}


class TestToneTracking:
    def test_open_loop_rotates(self, tone_runs):
        r = tone_runs[False]
        assert r.status == "ok" and not r.locked
        assert rotation_spread(r) > 0.5

    def test_closed_loop_tracks(self, tone_runs):
        r = tone_runs[True]
        assert r.locked
        assert residual_phase_rms(r) < 0.05
        assert io_correlation(r) > 0.98
        assert rotation_spread(r) < 0.05

    def test_lock_point_ambiguity(self, tone_runs):
        r = tone_runs[True]
        sl = slice(r.lock_symbol * 16, None)
        resid = (r.theta[sl] + r.chain.phi_d[sl] + math.pi / 4) % (math.pi / 2) - math.pi / 4
        assert np.sqrt(np.mean(resid**2)) < 0.05


class TestRunScenario:
    def test_deterministic(self):
        a = run_scenario(SHORT)
        b = run_scenario(SHORT)
        for field in ("I_O", "Q_O", "v_pd", "v_ctrl", "phi_d"):
            assert np.array_equal(getattr(a.chain, field), getattr(b.chain, field))
        assert a.metrics == b.metrics

    def test_seed_changes_noise(self):
        a = run_scenario(SHORT)
        b = run_scenario(replace(SHORT, seed=2))
        assert not np.array_equal(a.chain.I_O, b.chain.I_O)

    def test_differential_prbs(self):
        r = run_scenario(replace(SHORT, differential=True, data="prbs7"))
        assert r.locked and r.metrics.ber == 0.0

    def test_shot_noise_and_quadratic_shifter(self):
        pic = PicParams(shot_noise=True, ps_law="quadratic")
        r = run_scenario(replace(SHORT, pic=pic))
        assert r.locked and r.metrics.evm_rms < 15.0

    def test_clamp_warning(self):
        r = run_scenario(replace(SHORT, loop=LoopConfig(bandwidth=100e6)))
        assert r.clamp_fraction > 0.05 and r.warnings
        quiet = run_scenario(SHORT)
        assert quiet.clamp_fraction == 0.0 and not quiet.warnings

    def test_lock_failure_status(self):
        r = run_scenario(replace(SHORT, loop=LoopConfig(bandwidth=2e4, auto_polarity=False)))
        assert r.status == "lock-failure" and r.exit_code == 2

    def test_residual_falls_with_loop_gain(self):
        res = [residual_phase_rms(run_scenario(replace(SHORT, loop=LoopConfig(bandwidth=bw))))
               for bw in (0.5e6, 1e6, 2e6, 4e6)]
        assert all(b < a for a, b in zip(res, res[1:]))

    def test_ideal_fidelity_decision_snr(self):
        cfg = replace(SHORT, pic=PicParams(mode="ideal"), snr_db=20.0, channel=ChannelSpec(loss=0.0),
                      loop=LoopConfig(closed=False))
        from asprx.eic import EicParams

        r = run_scenario(replace(cfg, eic=EicParams(mode="ideal")))
        # in ideal fidelity the buffer clips at la_sat, so compare the frontend rails instead
        centers = np.arange(SHORT.n_symbols) * 16 + r.sample_offset
        fe = r.chain.fe_I[centers] + 1j * r.chain.fe_Q[centers]
        from asprx.dsp import evm_rms

        assert evm_rms(fe[5000:], r.tx_symbols[5000:]) == pytest.approx(10.0, abs=1.0)
