"""End-to-end acceptance checks, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py`` (or ``python3
tests/test_acceptance.py``); a PASS/FAIL line per criterion is printed in
the terminal summary.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from asprx.cli import main
from asprx.core import ComplexEnvelope, RngStream, TimeGrid, wiener_phase
from asprx.eic import EicParams
from asprx.link import io_correlation, residual_phase_rms, rotation_spread, run_scenario
from asprx.pic import PicParams, hybrid90, icr_receive
from asprx.scenarios import get_scenario

from conftest import record


@pytest.fixture(scope="module")
def fig7():
    runs = {}
    for name in ("fig7-open", "fig7-closed", "fig7-equalized"):
        t0 = time.perf_counter()
        runs[name] = (run_scenario(get_scenario(name)), time.perf_counter() - t0)
    return runs


def test_criterion_01_hybrid_closed_forms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 10_000
    s = rng.normal(size=n) + 1j * rng.normal(size=n)
    lo = rng.normal(size=n) + 1j * rng.normal(size=n)
    g = TimeGrid(1e9, n)
    h = hybrid90(ComplexEnvelope(g, s, "sqrt-watt"), ComplexEnvelope(g, lo, "sqrt-watt"), PicParams(mode="ideal"))
    expected = [(s + lo) / 2, (s - lo) / 2, (s + 1j * lo) / 2, (s - 1j * lo) / 2]
    rel = max(float(np.max(np.abs(e.samples - x) / np.maximum(np.abs(x), 1e-300)))
              for e, x in zip(h.as_tuple(), expected))
    power = float(np.max(np.abs(sum(e.power for e in h.as_tuple()) - np.abs(s) ** 2 - np.abs(lo) ** 2)))
    elapsed = time.perf_counter() - t0
    ok = rel < 1e-12 and power < 1e-12 and elapsed < 1.0
    assert record(1, ok, f"max rel err {rel:.2e}, power residual {power:.2e}, {elapsed:.3f} s")


def test_criterion_02_photocurrent_forms():
    n = 3600
    dphi = np.linspace(0, 2 * math.pi, n, endpoint=False)
    g = TimeGrid(1e9, n)
    out = icr_receive(
        ComplexEnvelope(g, np.exp(1j * dphi), "sqrt-watt"),
        ComplexEnvelope(g, np.ones(n, complex), "sqrt-watt"),
        ComplexEnvelope(g, np.zeros(n, complex), "volt"),
        PicParams(mode="ideal"),
    )
    err = max(float(np.max(np.abs(out.I_I.real - np.cos(dphi)))),
              float(np.max(np.abs(out.Q_I.real - np.sin(dphi)))))
    assert record(2, err < 1e-9, f"max |I_I - cos|, |Q_I - sin| = {err:.2e}")


def test_criterion_03_ps_calibration(tmp_path):
    rc = main(["characterize-ps", "--out", str(tmp_path), "--emit", "csv,json"])
    doc = json.loads((tmp_path / "ps_sweep.json").read_text())
    argmin, p3 = doc["argmin_v"], doc["power_at_3v"]
    ok = rc == 0 and abs(argmin - 6.0) <= 0.05 and abs(p3 - 0.5) <= 1e-3
    assert record(3, ok, f"argmin {argmin:.3f} V, P(3 V) {p3:.6f}")


def test_criterion_04_pd_calibration(tmp_path):
    rc = main(["characterize-pd", "--out", str(tmp_path), "--emit", "json"])
    doc = json.loads((tmp_path / "pd_fit.json").read_text())
    slope, period, sym = doc["slope_v_per_rad"], doc["period_rad"], doc["symmetry_residual_v"]
    ok = (rc == 0 and abs(slope / 0.16 - 1) <= 0.05 and abs(period - math.pi / 2) <= 0.02 and sym < 1e-3)
    assert record(4, ok, f"slope {slope:.4f} V/rad, period {period:.4f} rad, odd residual {sym:.1e} V")


def test_criterion_05_closed_loop_lock(fig7):
    r, elapsed = fig7["fig7-closed"]
    resid = residual_phase_rms(r)
    corr = io_correlation(r)
    ok = (r.locked and r.lock_symbol is not None and r.lock_symbol <= 10_000 and resid < 0.05
          and corr > 0.98 and elapsed < 60)
    assert record(5, ok, f"lock at symbol {r.lock_symbol}, residual {resid:.4f} rad, corr {corr:.4f}, "
                         f"{elapsed:.1f} s")


def test_criterion_06_ordering(fig7):
    op, cl, eq = (fig7[n][0] for n in ("fig7-open", "fig7-closed", "fig7-equalized"))
    e_o, e_c, e_e = op.metrics.evm_rms, cl.metrics.evm_rms, eq.metrics.evm_rms
    v_o, v_c, v_e = op.eye.vertical, cl.eye.vertical, eq.eye.vertical
    ok = e_o > 50 and e_c < 15 and e_e <= 0.7 * e_c and v_o < v_c < v_e
    assert record(6, ok, f"EVM open/closed/eq {e_o:.1f}/{e_c:.2f}/{e_e:.2f} %, "
                         f"eye vertical {v_o:.3f}/{v_c:.3f}/{v_e:.3f}, open rotation var {rotation_spread(op):.2f}")


def _qpsk_oracle_ber(snr_db: float, n: int = 2_000_000, seed: int = 77) -> float:
    rng = np.random.default_rng(seed)
    b = rng.integers(0, 2, (n, 2)).astype(bool)
    s = ((1 - 2.0 * b[:, 0]) + 1j * (1 - 2.0 * b[:, 1])) / math.sqrt(2)
    y = s + (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(10 ** (-snr_db / 10) / 2)
    return float((np.sum((y.real < 0) != b[:, 0]) + np.sum((y.imag < 0) != b[:, 1])) / (2 * n))


def test_criterion_07_ber_sanity():
    base = replace(get_scenario("fig7-closed"), name="ber", pic=PicParams(mode="ideal"),
                   eic=EicParams(mode="ideal"))
    hi = run_scenario(replace(base, snr_db=20.0))
    lo = run_scenario(replace(base, snr_db=7.0))
    oracle = _qpsk_oracle_ber(7.0)
    ratio = lo.metrics.ber / oracle if oracle > 0 else math.inf
    ok = (hi.locked and hi.metrics.ber == 0.0 and lo.locked and 1 / 3 <= ratio <= 3)
    assert record(7, ok, f"BER@20 dB {hi.metrics.ber:g} ({hi.ber_detail.n_bits} bits), BER@7 dB "
                         f"{lo.metrics.ber:.5f} vs oracle {oracle:.5f} (x{ratio:.2f})")


def test_criterion_08_fig6_pipeline():
    r = run_scenario(get_scenario("fig6"))
    eq = r.eq_symbols[r.eq_symbols.size // 4 :]
    # four clusters: every quadrant populated and angular spread small
    quad = np.floor(np.angle(eq) / (math.pi / 2)) % 4
    counts = np.bincount(quad.astype(int), minlength=4)
    ok = r.metrics.evm_rms < 15 and r.eq_status == "converged" and counts.min() > 0.2 * eq.size
    assert record(8, ok, f"EVM {r.metrics.evm_rms:.2f} %, equalizer {r.eq_status}, quadrant counts {counts.tolist()}")


def test_criterion_09_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    rc = [main(["run-link", "--scenario", "fig7-closed", "--out", str(d)]) for d in (a, b)]
    names = sorted(p.name for p in a.iterdir() if p.suffix in (".csv", ".json"))
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    ok = rc == [0, 0] and same and len(names) >= 4
    assert record(9, ok, f"{len(names)} CSV/JSON files byte-identical across two runs: {same}")


def test_criterion_10_wiener():
    n = 1_000_000
    dt = 1e-9
    linewidth = 100e3
    phi = wiener_phase(TimeGrid(1 / dt, n + 1), linewidth, RngStream(10, "acceptance-wiener"))
    inc = np.diff(phi)
    target = 2 * math.pi * linewidth * dt
    # standard error of a Gaussian sample variance
    se = target * math.sqrt(2 / (n - 1))
    z = (np.var(inc, ddof=1) - target) / se
    assert record(10, abs(z) < 3, f"increment variance {np.var(inc, ddof=1):.4e} vs {target:.4e} ({z:+.2f} SE)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
