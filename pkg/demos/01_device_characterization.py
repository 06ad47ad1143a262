"""
Characterizing the phase shifter and the phase detector
=======================================================

Before closing any loop we look at the two devices that set its gain: the
thermo-optic phase shifter on the photonic chip and the cross-correlator
phase detector on the electronic chip.
"""

import math

import numpy as np

from asprx.characterize import characterize_pd, characterize_ps
from asprx.eic import EicParams, static_pd_response
from asprx.pic import PicParams

###############################################################################
# The phase shifter sits in one arm of an interferometer. Sweeping its DC
# voltage from 0 to 12 V traces a cos^2 curve; the first null is where the
# shifter has added pi of phase.

for mode in ("ideal", "physical"):
    sweep = characterize_ps(PicParams(mode=mode))
    print(f"{mode:9s} null at {sweep.argmin:.2f} V, P(3 V) = {sweep.power_at_3v:.6f}")

###############################################################################
# The physical curve does not reach zero because the MMI splitters are
# slightly unbalanced (0.02 dB). The extinction is still deep:

sweep = characterize_ps(PicParams())
print(f"extinction {10 * np.log10(sweep.power.max() / sweep.power.min()):.1f} dB")

###############################################################################
# The detector is driven with 1 GBaud QPSK whose phase ramps at 1 MHz, so the
# phase error sweeps through many lock points. Its output is a sawtooth with
# a period of pi/2 and a slope of about 0.16 V/rad at each stable point.

pd = characterize_pd(EicParams())
print(f"slope {pd.slope:.4f} V/rad, period {pd.period:.4f} rad (pi/2 = {math.pi / 2:.4f})")
print(f"odd-symmetry residual {pd.symmetry_residual:.1e} V, zero-offset rms {pd.zero_offset_rms:.1e} V")

###############################################################################
# The static law explains the shape. With an ideal hard limiter the detector
# reads ``Q*sgn(I) - I*sgn(Q)``: a sine arc between the axes, flipping sign
# every time the constellation crosses an I or Q axis.

phi = np.linspace(-math.pi / 2, math.pi / 2, 9)
for p, v in zip(phi, static_pd_response(phi, EicParams(mode="ideal"))):
    print(f"  phi {p:+.3f} rad -> v_pd {v:+.4f} V")
