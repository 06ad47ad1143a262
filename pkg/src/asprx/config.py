"""Scenario files (YAML or JSON) to :class:`ScenarioConfig` and back.

Unknown keys anywhere in the tree are rejected. ``base: <scenario>`` starts
from a built-in scenario and overrides only the keys given.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

import yaml

from .core import ParameterError
from .eic import EicParams
from .link import EqualizerSpec, ScenarioConfig
from .loop import LoopConfig
from .optics import ChannelSpec, LaserSpec, RandomWalkDrift, SinusoidDrift
from .pic import PicParams


class ConfigError(ParameterError):
    """Malformed or unknown configuration content."""


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e4``-style scalars as floats (YAML 1.2 behaviour)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def yaml_load(text: str):
    return yaml.load(text, Loader=_Loader)


@dataclass(frozen=True)
class OutputSpec:
    csv: bool = True
    json: bool = True
    svg: bool = True

    @classmethod
    def parse(cls, emit: str) -> OutputSpec:
        kinds = {k.strip().lower() for k in emit.split(",") if k.strip()}
        bad = kinds - {"csv", "json", "svg"}
        if bad:
            raise ConfigError(f"unknown emit kind(s): {', '.join(sorted(bad))}")
        return cls("csv" in kinds, "json" in kinds, "svg" in kinds)


_SECTIONS = {
    "laser": LaserSpec,
    "pic": PicParams,
    "eic": EicParams,
    "loop": LoopConfig,
    "equalizer": EqualizerSpec,
}
_ALIASES = {"laser": {"offset": "center_frequency_offset"}}
_TOP_ALIASES = {"duration_symbols": "n_symbols"}
_TOP_SKIP = {"base", "outputs", "channel", *_SECTIONS}


def _field_names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _number(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return value


def _build_section(cls, base, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    aliases = _ALIASES.get(section, {})
    allowed = _field_names(cls)
    kwargs = {}
    for key, value in data.items():
        name = aliases.get(key, key)
        if name not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")
        if name == "v_ctrl_range":
            value = tuple(value)
        kwargs[name] = _number(value)
    return replace(base, **kwargs)


def _parse_drift(items: Any) -> tuple:
    if items in (None, "none", []):
        return ()
    if not isinstance(items, list):
        raise ConfigError("channel.drift must be 'none' or a list of components")
    out = []
    for item in items:
        if not isinstance(item, dict) or "type" not in item:
            raise ConfigError("each drift component needs a 'type'")
        kind = item["type"]
        rest = {k: v for k, v in item.items() if k != "type"}
        cls = {"random_walk": RandomWalkDrift, "sinusoid": SinusoidDrift}.get(kind)
        if cls is None:
            raise ConfigError(f"unknown drift type {kind!r}")
        unknown = set(rest) - _field_names(cls)
        if unknown:
            raise ConfigError(f"unknown key(s) in {kind} drift: {', '.join(sorted(unknown))}")
        out.append(cls(**rest))
    return tuple(out)


def _build_channel(base: ChannelSpec, data: dict) -> ChannelSpec:
    if not isinstance(data, dict):
        raise ConfigError("section 'channel' must be a mapping")
    allowed = _field_names(ChannelSpec)
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"unknown key channel.{key}")
        kwargs[key] = _parse_drift(value) if key == "drift" else value
    return replace(base, **kwargs)


def config_from_dict(data: dict) -> tuple[ScenarioConfig, OutputSpec]:
    """Build a scenario from a parsed mapping; raises :class:`ConfigError` on bad keys."""
    from .scenarios import get_scenario

    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    base = get_scenario(data["base"]) if "base" in data else ScenarioConfig()
    top_allowed = _field_names(ScenarioConfig)
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _TOP_SKIP:
            continue
        name = _TOP_ALIASES.get(key, key)
        if name not in top_allowed:
            raise ConfigError(f"unknown key {key!r}")
        kwargs[name] = _number(value)
    for section, cls in _SECTIONS.items():
        if section in data:
            kwargs[section] = _build_section(cls, getattr(base, section), data[section], section)
    if "channel" in data:
        kwargs["channel"] = _build_channel(base.channel, data["channel"])
    outputs = OutputSpec()
    if "outputs" in data:
        out = data["outputs"]
        if not isinstance(out, dict) or set(out) - {"csv", "json", "svg"}:
            raise ConfigError("outputs takes only csv/json/svg booleans")
        outputs = replace(outputs, **{k: bool(v) for k, v in out.items()})
    try:
        cfg = replace(base, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, outputs


def load_config(path: str | Path) -> tuple[ScenarioConfig, OutputSpec]:
    """Read a ``.yaml``/``.yml`` or ``.json`` scenario file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = json.loads(text) if p.suffix.lower() == ".json" else yaml_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return config_from_dict(data or {})


def _plain(value: Any) -> Any:
    if is_dataclass(value):
        d = {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
        if isinstance(value, (RandomWalkDrift, SinusoidDrift)):
            d = {"type": "random_walk" if isinstance(value, RandomWalkDrift) else "sinusoid", **d}
        return d
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Full parameter echo; round-trips through :func:`config_from_dict`."""
    d = _plain(cfg)
    d["channel"]["drift"] = d["channel"]["drift"] or "none"
    return d


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def check_path(cfg: ScenarioConfig, path: str) -> None:
    """Raise :class:`ConfigError` unless ``path`` names a parameter of ``cfg``."""
    parts = path.split(".")
    obj: Any = cfg
    for i, key in enumerate(parts):
        if i == 0:
            key = _TOP_ALIASES.get(key, key)
        if isinstance(obj, LaserSpec):
            key = _ALIASES["laser"].get(key, key)
        if not is_dataclass(obj) or key not in _field_names(type(obj)):
            raise ConfigError(f"parameter path {path!r} does not resolve")
        obj = getattr(obj, key)


def set_path(cfg: ScenarioConfig, path: str, value: Any) -> ScenarioConfig:
    """Return ``cfg`` with the dotted parameter ``path`` replaced by ``value``."""
    parts = path.split(".")
    alias_top = _TOP_ALIASES.get(parts[0], parts[0])
    parts[0] = alias_top

    def rec(obj, keys):
        key = keys[0]
        if isinstance(obj, LaserSpec):
            key = _ALIASES["laser"].get(key, key)
        if not is_dataclass(obj) or key not in _field_names(type(obj)):
            raise ConfigError(f"parameter path {path!r} does not resolve")
        if len(keys) == 1:
            return replace(obj, **{key: _number(value)})
        return replace(obj, **{key: rec(getattr(obj, key), keys[1:])})

    try:
        return rec(cfg, parts)
    except (TypeError, dataclasses.FrozenInstanceError) as exc:
        raise ConfigError(str(exc)) from exc
