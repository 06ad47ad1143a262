"""Time grid, signal containers, seeded random streams and shared primitives."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal as sps_signal

Unit = Literal["sqrt-watt", "ampere", "volt"]
UNITS = ("sqrt-watt", "ampere", "volt")


class ParameterError(ValueError):
    """Invalid numerical parameter passed to an operation."""


class StructuralError(ValueError):
    """Incompatible signal containers (grid or unit mismatch)."""


@dataclass(frozen=True)
class TimeGrid:
    sample_rate: float
    n_samples: int

    def __post_init__(self) -> None:
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if int(self.n_samples) < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def times(self) -> NDArray[np.float64]:
        return np.arange(self.n_samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class ComplexEnvelope:
    """Uniformly sampled complex record with a fixed physical unit.

    Optical fields are carried in sqrt-watt so that ``abs(x)**2`` is power.
    Electrical records keep their payload in the real part.
    """

    grid: TimeGrid
    samples: NDArray[np.complex128]
    unit: Unit

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise StructuralError(f"unknown unit {self.unit!r}")
        arr = np.array(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size != self.grid.n_samples:
            raise StructuralError(
                f"expected {self.grid.n_samples} samples, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.grid.n_samples

    @property
    def real(self) -> NDArray[np.float64]:
        return self.samples.real

    @property
    def power(self) -> NDArray[np.float64]:
        return np.abs(self.samples) ** 2

    def mean_power(self) -> float:
        return float(np.mean(self.power))

    def with_samples(self, samples: ArrayLike, unit: Unit | None = None) -> ComplexEnvelope:
        return ComplexEnvelope(self.grid, np.asarray(samples), unit or self.unit)

    @classmethod
    def constant(cls, grid: TimeGrid, value: complex, unit: Unit) -> ComplexEnvelope:
        return cls(grid, np.full(grid.n_samples, value, dtype=np.complex128), unit)


def require_same_grid(*xs: ComplexEnvelope) -> TimeGrid:
    grid = xs[0].grid
    for x in xs[1:]:
        if x.grid != grid:
            raise StructuralError(f"grid mismatch: {x.grid} vs {grid}")
    return grid


def require_unit(x: ComplexEnvelope, unit: Unit) -> None:
    if x.unit != unit:
        raise StructuralError(f"expected unit {unit!r}, got {x.unit!r}")


@dataclass(frozen=True)
class RngStream:
    """Named, counter-indexed random stream derived from a master seed.

    The bit stream depends only on ``(master_seed, stream_label, counter)``;
    PCG64 output is platform independent, and the label is folded in with
    SHA-256 rather than Python's salted ``hash``.
    """

    master_seed: int
    stream_label: str
    counter: int = 0

    def _seed_sequence(self) -> np.random.SeedSequence:
        digest = hashlib.sha256(self.stream_label.encode("utf-8")).digest()
        label_words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        seed = int(self.master_seed) & 0xFFFFFFFFFFFFFFFF
        return np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, *label_words, self.counter])

    def generator(self) -> np.random.Generator:
        """A fresh generator; repeated calls replay the same sequence."""
        return np.random.Generator(np.random.PCG64(self._seed_sequence()))

    def child(self, label: str) -> RngStream:
        return RngStream(self.master_seed, f"{self.stream_label}/{label}", self.counter)

    def advance(self, n: int = 1) -> RngStream:
        return RngStream(self.master_seed, self.stream_label, self.counter + n)


def pole_coefficient(f3db: float, dt: float) -> float:
    """Feedback coefficient ``exp(-2*pi*f3db*dt)`` of the one-pole recursion."""
    if not f3db > 0:
        raise ParameterError(f"f3db must be positive, got {f3db}")
    return math.exp(-2.0 * math.pi * f3db * dt)


def single_pole_lowpass(
    x: ComplexEnvelope, f3db: float, initial: complex = 0.0
) -> ComplexEnvelope:
    """First-order low-pass ``y[n] = a*y[n-1] + (1-a)*x[n]`` with unity DC gain.

    ``initial`` is the filter output before the first sample; the default
    zero state gives the textbook step response.
    """
    a = pole_coefficient(f3db, x.grid.dt)
    b = np.array([1.0 - a])
    den = np.array([1.0, -a])
    zi = np.array([a * complex(initial)], dtype=np.complex128)
    y, _ = sps_signal.lfilter(b, den, x.samples, zi=zi)
    return x.with_samples(y)


def awgn_samples(
    n: int, noise_power: float, rng: RngStream
) -> NDArray[np.complex128]:
    """Circular complex Gaussian samples with ``E|n|^2 = noise_power``."""
    g = rng.generator()
    sigma = math.sqrt(noise_power / 2.0)
    return sigma * (g.standard_normal(n) + 1j * g.standard_normal(n))


def add_awgn(x: ComplexEnvelope, snr_db: float, rng: RngStream) -> ComplexEnvelope:
    """Add circular Gaussian noise at ``snr_db`` relative to the record's mean power.

    ``snr_db = inf`` disables the noise and returns ``x`` unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return x
    p = x.mean_power()
    if p <= 0:
        raise ParameterError("add_awgn needs an input with nonzero average power")
    noise = awgn_samples(len(x), p * 10.0 ** (-snr_db / 10.0), rng)
    return x.with_samples(x.samples + noise)


def wiener_phase(grid: TimeGrid, linewidth: float, rng: RngStream) -> NDArray[np.float64]:
    """Laser phase as a Gaussian random walk starting at zero.

    Each step has variance ``2*pi*linewidth*dt`` (Lorentzian linewidth model).
    """
    if linewidth < 0:
        raise ParameterError(f"linewidth must be >= 0, got {linewidth}")
    if linewidth == 0:
        return np.zeros(grid.n_samples)
    steps = rng.generator().standard_normal(grid.n_samples)
    steps *= math.sqrt(2.0 * math.pi * linewidth * grid.dt)
    steps[0] = 0.0
    return np.cumsum(steps)


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


def db_to_power(db: float) -> float:
    return 10.0 ** (db / 10.0)

