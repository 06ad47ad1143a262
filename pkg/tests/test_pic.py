import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asprx.core import ComplexEnvelope, ParameterError, TimeGrid
from asprx.pic import (
    PicParams,
    hybrid90,
    icr_receive,
    interferometer_power,
    photodetect,
    ps_phase,
    thermo_ps,
    vgc_couple,
)

IDEAL = PicParams(mode="ideal")
PHYS = PicParams()


def env(values, fs=1e9, unit="sqrt-watt"):
    values = np.atleast_1d(np.asarray(values, dtype=complex))
    return ComplexEnvelope(TimeGrid(fs, values.size), values, unit)


class TestCoupler:
    def test_ideal_identity(self):
        x = env([0.1 + 0.2j, -0.3j])
        assert np.array_equal(vgc_couple(x, IDEAL).samples, x.samples)

    def test_insertion_loss(self):
        x = env(np.full(4, math.sqrt(1e-3) * np.exp(0.7j)))
        y = vgc_couple(x, PHYS)
        assert y.power[0] == pytest.approx(10**-0.4 * 1e-3, rel=1e-9)
        assert np.allclose(np.angle(y.samples), 0.7, atol=1e-15)


class TestPhaseShifter:
    def test_zero_volts_identity(self):
        x = env(np.exp(1j * np.linspace(0, 1, 16)))
        v = env(np.zeros(16), unit="volt")
        assert np.allclose(thermo_ps(x, v, PHYS).samples, x.samples, atol=0)

    def test_vpi(self):
        v = env(np.full(8, 6.0), unit="volt")
        assert ps_phase(v, PHYS, initial_voltage=6.0) == pytest.approx(np.full(8, math.pi))

    def test_step_rise_time(self):
        fs = 1e9
        n = 40_000
        v = env(np.r_[0.0, np.full(n - 1, 6.0)], fs, "volt")
        phi = ps_phase(v, PHYS, initial_voltage=0.0) / math.pi
        t10 = np.argmax(phi >= 0.1) / fs
        t90 = np.argmax(phi >= 0.9) / fs
        assert t90 - t10 == pytest.approx(math.log(9) / (2 * math.pi * 50e3), rel=0.02)
        assert t90 - t10 == pytest.approx(6.99e-6, rel=0.02)

    @settings(max_examples=30, deadline=None)
    @given(v=st.floats(-12, 12), a=st.floats(-2, 2))
    def test_linear_in_settled_voltage(self, v, a):
        p1 = ps_phase(env([v], unit="volt"), PHYS, v)[0]
        p2 = ps_phase(env([a * v], unit="volt"), PHYS, a * v)[0]
        assert p2 == pytest.approx(a * p1, abs=1e-12)

    def test_quadratic_law(self):
        p = PicParams(ps_law="quadratic")
        assert ps_phase(env([6.0], unit="volt"), p, 6.0)[0] == pytest.approx(math.pi)
        assert ps_phase(env([3.0], unit="volt"), p, 3.0)[0] == pytest.approx(math.pi / 4)

    def test_shifter_sign(self):
        x = env(np.ones(4))
        v = env(np.full(4, 3.0), unit="volt")
        y = thermo_ps(x, v, IDEAL, initial_voltage=3.0)
        assert np.allclose(y.samples, np.exp(-1j * math.pi / 2))

    def test_interferometer(self):
        v = np.array([0.0, 3.0, 6.0])
        assert interferometer_power(v, IDEAL) == pytest.approx([1.0, 0.5, 0.0], abs=1e-12)


class TestHybrid:
    def test_in_phase(self):
        h = hybrid90(env([1.0]), env([1.0]), IDEAL)
        assert [e.samples[0] for e in h.as_tuple()] == pytest.approx([1, 0, (1 + 1j) / 2, (1 - 1j) / 2])

    def test_quadrature(self):
        h = hybrid90(env([1.0]), env([1j]), IDEAL)
        assert [e.samples[0] for e in h.as_tuple()] == pytest.approx([(1 + 1j) / 2, (1 - 1j) / 2, 0, 1])

    def test_power_conservation(self):
        rng = np.random.default_rng(3)
        s = rng.normal(size=500) + 1j * rng.normal(size=500)
        lo = rng.normal(size=500) + 1j * rng.normal(size=500)
        h = hybrid90(env(s), env(lo), IDEAL)
        out = sum(e.power for e in h.as_tuple())
        assert np.max(np.abs(out - (np.abs(s) ** 2 + np.abs(lo) ** 2))) < 1e-12


class TestPhotodetector:
    def test_ideal_currents(self):
        h = hybrid90(env([1.0]), env([1.0]), IDEAL)
        i = [photodetect(e, IDEAL).real[0] for e in h.as_tuple()]
        assert i == pytest.approx([2.0, 0.0, 1.0, 1.0], abs=1e-15)

    def test_responsivity_and_dark(self):
        i = photodetect(env(np.full(10, math.sqrt(1e-3))), PHYS)
        assert np.allclose(i.real, 0.45e-3 + 15e-9, rtol=0, atol=1e-12 * 0.45e-3)
        assert i.unit == "ampere"

    def test_dark_only(self):
        i = photodetect(env(np.zeros(5)), PHYS)
        assert np.allclose(i.real, 15e-9, rtol=0, atol=1e-20)

    def test_responsivity_bounds(self):
        with pytest.raises(ParameterError):
            PicParams(pd_responsivity=2.0)


class TestIcr:
    def _sweep(self, params, n=720, s_amp=1.0, lo_amp=1.0):
        phase = np.linspace(0, 2 * math.pi, n, endpoint=False)
        S = env(s_amp * np.exp(1j * phase))
        LO = env(np.full(n, lo_amp))
        v = env(np.zeros(n), unit="volt")
        return phase, icr_receive(S, LO, v, params)

    def test_zero_phase(self):
        _, out = self._sweep(IDEAL, n=1)
        assert (out.I_I.real[0], out.Q_I.real[0]) == pytest.approx((1.0, 0.0), abs=1e-15)

    def test_unit_circle(self):
        phase, out = self._sweep(IDEAL)
        r = np.hypot(out.I_I.real, out.Q_I.real)
        assert np.max(np.abs(r - 1)) < 1e-9
        assert np.allclose(out.I_I.real, np.cos(phase), atol=1e-12)
        assert np.allclose(out.Q_I.real, np.sin(phase), atol=1e-12)

    @pytest.mark.parametrize("s_amp, lo_amp", [(1.0, 1.0), (0.3, 2.0), (3.0, 0.1)])
    def test_no_common_mode(self, s_amp, lo_amp):
        _, out = self._sweep(IDEAL, s_amp=s_amp, lo_amp=lo_amp)
        assert abs(np.mean(out.I_I.real)) < 1e-9
        assert abs(np.mean(out.Q_I.real)) < 1e-9

    def test_iq_uncorrelated(self):
        _, out = self._sweep(IDEAL)
        assert abs(np.mean(out.I_I.real * out.Q_I.real)) < 1e-9

    def test_physical_current_scale(self):
        _, out = self._sweep(PHYS, s_amp=math.sqrt(1e-3), lo_amp=math.sqrt(1e-3))
        i1, i2 = out.raw_currents[0].real, out.raw_currents[1].real
        peak = np.max(np.abs(i1 - i2))
        assert 150e-6 <= peak <= 600e-6
        assert 1e-3 < np.max(np.abs(out.I_I.real)) < 20e-3

    def test_lo_shifter_rotates_output(self):
        n = 8
        S = env(np.ones(n))
        LO = env(np.ones(n))
        v = env(np.full(n, 3.0), unit="volt")
        out = icr_receive(S, LO, v, IDEAL)
        # LO delayed by pi/2 => S leads the LO by pi/2
        assert out.I_I.real == pytest.approx(np.zeros(n), abs=1e-12)
        assert out.Q_I.real == pytest.approx(np.ones(n))
