"""Built-in scenarios mirroring the bench setups.

The fig7 family shares one channel: a 10 m fiber whose phase wanders by a
random walk of roughly pi rad rms per millisecond plus a 20 kHz, 1.25 rad
sinusoid (vibration-like), from a 0.6 rad start. The amplifier and balun ahead of the chip are band limited
to 0.7 x baud so the equalizer has ISI to remove.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .core import ParameterError
from .eic import EicParams
from .link import EqualizerSpec, ScenarioConfig
from .loop import LoopConfig
from .optics import ChannelSpec, RandomWalkDrift, SinusoidDrift
from .pic import PicParams

FIG7_CHANNEL = ChannelSpec(
    length=10.0,
    loss=0.2,
    drift=(RandomWalkDrift(math.pi**2 * 1e3), SinusoidDrift(20e3, 1.25)),
    initial_phase=0.6,
)


def _fig7_closed() -> ScenarioConfig:
    return ScenarioConfig(
        name="fig7-closed",
        baud=2e9,
        sps=16,
        n_symbols=100_000,
        channel=FIG7_CHANNEL,
        eic=EicParams(frontend_bw=0.7 * 2e9),
        loop=LoopConfig(closed=True),
        snr_db=35.0,
    )


def _fig7_open() -> ScenarioConfig:
    c = _fig7_closed()
    return replace(c, name="fig7-open", loop=replace(c.loop, closed=False))


def _fig7_equalized() -> ScenarioConfig:
    return replace(_fig7_closed(), name="fig7-equalized", equalizer=EqualizerSpec(enabled=True))


def _fig6() -> ScenarioConfig:
    # 4 GBaud open-loop capture, shifter left unbiased, recovered offline
    baud = 4e9
    return ScenarioConfig(
        name="fig6",
        baud=baud,
        sps=16,
        n_symbols=100_000,
        channel=FIG7_CHANNEL,
        eic=EicParams(frontend_bw=0.7 * baud),
        loop=LoopConfig(closed=False, v_ctrl_bias=0.0),
        equalizer=EqualizerSpec(enabled=True, offline_cpr=True),
        snr_db=35.0,
    )


def _fig4a() -> ScenarioConfig:
    return ScenarioConfig(
        name="fig4a", n_symbols=1000, settle_symbols=0, pic=PicParams(mode="ideal"),
        loop=LoopConfig(closed=False),
    )


def _fig4b() -> ScenarioConfig:
    from .optics import LaserSpec

    return ScenarioConfig(
        name="fig4b",
        baud=1e9,
        sps=32,
        n_symbols=4000,
        settle_symbols=0,
        laser=LaserSpec(center_frequency_offset=1e6),
        loop=LoopConfig(closed=False),
    )


_BUILTIN = {
    "fig4a": _fig4a,
    "fig4b": _fig4b,
    "fig6": _fig6,
    "fig7-open": _fig7_open,
    "fig7-closed": _fig7_closed,
    "fig7-equalized": _fig7_equalized,
}

SCENARIO_NAMES = tuple(_BUILTIN)


def get_scenario(name: str) -> ScenarioConfig:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise ParameterError(
            f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}"
        ) from None
