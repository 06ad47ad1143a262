"""Laser sources, the 3 dB splitter and the short-reach fiber phase channel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import (
    ComplexEnvelope,
    ParameterError,
    RngStream,
    TimeGrid,
    require_unit,
    wiener_phase,
)

MAX_FIBER_LENGTH = 1000.0


@dataclass(frozen=True)
class LaserSpec:
    power: float = 2e-3
    linewidth: float = 100e3
    center_frequency_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.power > 0:
            raise ParameterError(f"laser power must be positive, got {self.power}")
        if self.linewidth < 0:
            raise ParameterError(f"linewidth must be >= 0, got {self.linewidth}")


@dataclass(frozen=True)
class RandomWalkDrift:
    """Brownian phase drift; ``rate`` is the variance growth in rad^2/s."""

    rate: float

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ParameterError("random-walk rate must be >= 0")


@dataclass(frozen=True)
class SinusoidDrift:
    frequency: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class ChannelSpec:
    """Short single-mode fiber: loss plus a slowly varying phase.

    ``drift`` is a tuple of components that add; an empty tuple is the
    ``none`` model. ``initial_phase`` is a static offset present at t=0.
    """

    length: float = 10.0
    loss: float = 0.2
    drift: tuple[RandomWalkDrift | SinusoidDrift, ...] = ()
    initial_phase: float = 0.0

    def __post_init__(self) -> None:
        if self.length < 0 or self.loss < 0:
            raise ParameterError("fiber length and loss must be >= 0")
        if self.length > MAX_FIBER_LENGTH:
            raise ParameterError(
                f"fiber length {self.length} m exceeds {MAX_FIBER_LENGTH:g} m; chromatic "
                "dispersion is not modelled, so only short-reach links are accepted"
            )
        object.__setattr__(self, "drift", tuple(self.drift))

    @property
    def amplitude_scale(self) -> float:
        return 10.0 ** (-self.loss * self.length / 1000.0 / 20.0)


def laser_field(spec: LaserSpec, grid: TimeGrid, rng: RngStream) -> ComplexEnvelope:
    t = grid.times()
    phase = 2.0 * math.pi * spec.center_frequency_offset * t + wiener_phase(grid, spec.linewidth, rng)
    return ComplexEnvelope(grid, math.sqrt(spec.power) * np.exp(1j * phase), "sqrt-watt")


def split_3db(x: ComplexEnvelope) -> tuple[ComplexEnvelope, ComplexEnvelope]:
    require_unit(x, "sqrt-watt")
    half = x.samples / math.sqrt(2.0)
    return x.with_samples(half), x.with_samples(half.copy())


def channel_phase(grid: TimeGrid, spec: ChannelSpec, rng: RngStream) -> NDArray[np.float64]:
    """Phase imposed by the fiber, theta(t), in radians."""
    t = grid.times()
    theta = np.full(grid.n_samples, float(spec.initial_phase))
    for i, comp in enumerate(spec.drift):
        if isinstance(comp, SinusoidDrift):
            theta += comp.amplitude * np.sin(2.0 * math.pi * comp.frequency * t + comp.phase)
        elif isinstance(comp, RandomWalkDrift):
            if comp.rate > 0:
                steps = rng.child(f"drift{i}").generator().standard_normal(grid.n_samples)
                steps *= math.sqrt(comp.rate * grid.dt)
                steps[0] = 0.0
                theta += np.cumsum(steps)
        else:
            raise ParameterError(f"unknown drift component {comp!r}")
    return theta


def fiber(x: ComplexEnvelope, spec: ChannelSpec, rng: RngStream) -> ComplexEnvelope:
    require_unit(x, "sqrt-watt")
    theta = channel_phase(x.grid, spec, rng)
    return x.with_samples(x.samples * spec.amplitude_scale * np.exp(1j * theta))
