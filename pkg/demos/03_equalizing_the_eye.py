"""
Opening the eye with a feed-forward equalizer
=============================================

The amplifier and balun between the two chips are band limited to 0.7 x the
symbol rate, so each symbol leaks into the next. A T/2-spaced LMS
equalizer behind the locked loop removes most of that smear.
"""

import numpy as np

from asprx.core import single_pole_lowpass
from asprx.dsp import apply_ffe, eye_metrics, lms_ffe
from asprx.link import run_scenario
from asprx.scenarios import get_scenario
from asprx.txrx import map_symbols, pulse_shape

###############################################################################
# On the full link the equalizer trains on the first quarter of the
# measured symbols and then runs decision-directed.

closed = run_scenario(get_scenario("fig7-closed"))
equalized = run_scenario(get_scenario("fig7-equalized"))
print(f"EVM closed {closed.metrics.evm_rms:.2f} %  ->  equalized {equalized.metrics.evm_rms:.2f} %")
print(f"eye vertical {closed.eye.vertical:.3f} -> {equalized.eye.vertical:.3f}")

# the taps the equalizer converged to, T/2 apart (magnitudes)
cfg = closed.config
first = cfg.settle_symbols * cfg.sps + closed.sample_offset
fit = lms_ffe(closed.chain.I_O + 1j * closed.chain.Q_O, cfg.sps, first, closed.tx_symbols[cfg.settle_symbols :])
print("tap magnitudes:", np.round(np.abs(fit.taps), 3))

###############################################################################
# The vertical opening of the link eye improves only a little, because what
# is left after the loop is mostly residual phase error, which an FFE cannot
# remove. A harsher pole (0.35 x baud) on a clean channel shows the
# equalizer opening the eye in both directions.

rng = np.random.default_rng(4)
sym = map_symbols(rng.integers(0, 2, 16000)).symbols
bb = pulse_shape(sym, 16, baud=2e9)
y = single_pole_lowpass(bb, 0.35 * 2e9, initial=bb.samples[0]).samples
offset = 15
res = lms_ffe(y, 16, offset, sym)
first = 2000 * 16 + offset - 8
pre = eye_metrics(y.real, 16, first)
post = eye_metrics(apply_ffe(y, res.taps, 16, res.input_scale).real, 16, first)
print(f"0.35 x baud pole: vertical {pre.vertical:.3f} -> {post.vertical:.3f}, "
      f"horizontal {pre.horizontal:.3f} -> {post.horizontal:.3f}")
