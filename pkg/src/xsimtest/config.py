"""Plain-text ``section.key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Recognised keys::

    campaign.backend        alpha | beta                       (alpha)
    campaign.algorithm      nsga2 | random                     (nsga2)
    campaign.runs           independent runs                   (40)
    campaign.seed           master seed                        (0)
    campaign.ttc_source     sensor | oracle                    (sensor)
    campaign.time_budget    seconds per run, 0 = off           (0)

    search.population_size | crossover_rate | mutation_rate | eta
    search.sigma_fraction  | budget

    scene.x0c | y0c | road_length | lane_width | car_length | car_width
    scene.car_center_offset | ped_radius

    space.v0c | x0p | y0p | theta_p | v0p    "lower, upper" (x0p, y0p relative to the car)

    detector.margin | ttc_threshold | headway | base_length | lane_width | lateral_offset

    channel.enabled | loss_probability | repeats | precision

    backend.<name>.<field>   override any field of a built-in backend, e.g.
                             backend.beta.latency = 2
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .adas import DetectorConfig
from .scene import GENES, InputSpace, SceneConfig
from .search import SearchConfig
from .simulator import BACKENDS, BackendConfig, ConfigurationError, LossyChannelConfig, get_backend


class ConfigError(ValueError):
    """Malformed configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class CampaignConfig:
    backend: str = "alpha"
    algorithm: str = "nsga2"
    runs: int = 40
    seed: int = 0
    ttc_source: str = "sensor"
    time_budget: float = 0.0
    search: SearchConfig = field(default_factory=SearchConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    space: tuple[tuple[float, float], ...] = tuple(
        (getattr(InputSpace(), g)) for g in GENES
    )
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    channel: LossyChannelConfig | None = None
    backends: dict = field(default_factory=lambda: dict(BACKENDS))

    def backend_config(self, name: str | None = None) -> BackendConfig:
        name = name or self.backend
        if name not in self.backends:
            get_backend(name)  # raises with the list of valid names
        return self.backends[name]

    def input_space(self) -> InputSpace:
        return self.scene.input_space(**dict(zip(GENES, self.space)))


def parse_lines(text: str, source: str = "<config>") -> list[tuple[int, str, str]]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key or not value:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno, source)
        entries.append((lineno, key, value))
    return entries


def _as_bool(value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _coerce(current, value: str):
    if isinstance(current, bool):
        return _as_bool(value)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def _set_field(obj, name: str, value: str):
    names = {f.name for f in fields(obj)}
    if name not in names:
        raise KeyError(name)
    return replace(obj, **{name: _coerce(getattr(obj, name), value)})


_CAMPAIGN_KEYS = ("backend", "algorithm", "runs", "seed", "ttc_source", "time_budget")


def build_config(entries, source: str = "<config>") -> CampaignConfig:
    cfg = CampaignConfig()
    channel_enabled = False
    channel = LossyChannelConfig()
    space = dict(zip(GENES, cfg.space))
    backends = dict(cfg.backends)
    for lineno, key, value in entries:
        section, _, name = key.partition(".")
        try:
            if section == "campaign" and name in _CAMPAIGN_KEYS:
                cfg = _set_field(cfg, name, value)
            elif section == "search":
                cfg = replace(cfg, search=_set_field(cfg.search, name, value))
            elif section == "scene":
                cfg = replace(cfg, scene=_set_field(cfg.scene, name, value))
            elif section == "detector":
                cfg = replace(cfg, detector=_set_field(cfg.detector, name, value))
            elif section == "channel":
                if name == "enabled":
                    channel_enabled = _as_bool(value)
                else:
                    channel = _set_field(channel, name, value)
            elif section == "space" and name in GENES:
                lo, hi = (float(v) for v in value.split(","))
                space[name] = (lo, hi)
            elif section == "backend" and "." in name:
                bname, _, bfield = name.partition(".")
                if bname not in backends:
                    raise ConfigurationError(
                        f"unknown backend {bname!r}; valid backends: {', '.join(sorted(backends))}"
                    )
                if bfield == "frame" or bfield == "name":
                    raise KeyError(bfield)
                backends[bname] = _set_field(backends[bname], bfield, value)
            else:
                raise KeyError(key)
        except KeyError:
            raise ConfigError(f"unknown key {key!r}", lineno, source) from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None

    cfg = replace(
        cfg,
        space=tuple(space[g] for g in GENES),
        channel=channel if channel_enabled else None,
        backends=backends,
    )
    try:
        validate(cfg)
    except (ValueError, ConfigurationError) as exc:
        raise ConfigError(str(exc), None, source) from None
    return cfg


def validate(cfg: CampaignConfig) -> None:
    if cfg.runs < 1:
        raise ConfigurationError("campaign.runs must be at least 1")
    if cfg.algorithm not in ("nsga2", "random"):
        raise ConfigurationError(f"unknown algorithm {cfg.algorithm!r}; valid: nsga2, random")
    if cfg.ttc_source not in ("sensor", "oracle"):
        raise ConfigurationError(f"unknown ttc_source {cfg.ttc_source!r}; valid: sensor, oracle")
    cfg.backend_config()
    for b in cfg.backends.values():
        b.validate()
    cfg.input_space()
    if cfg.algorithm == "nsga2" and cfg.search.budget < cfg.search.population_size:
        raise ConfigurationError("search.budget must be at least search.population_size")


def load_config(text: str = "", overrides=(), source: str = "<config>") -> CampaignConfig:
    """Parse a config text, then apply ``key=value`` overrides on top."""
    entries = parse_lines(text, source)
    extra = parse_lines("\n".join(overrides), "<override>")
    return build_config(entries + [(None, k, v) for _, k, v in extra], source)


def dump_config(cfg: CampaignConfig) -> str:
    """Render a fully resolved config; loading the result gives ``cfg`` back."""
    lines = [f"campaign.{k} = {getattr(cfg, k)}" for k in _CAMPAIGN_KEYS]
    for section, obj in (("search", cfg.search), ("scene", cfg.scene), ("detector", cfg.detector)):
        lines += [f"{section}.{f.name} = {getattr(obj, f.name)!r}" for f in fields(obj)]
    lines += [f"space.{g} = {lo!r}, {hi!r}" for g, (lo, hi) in zip(GENES, cfg.space)]
    lines.append(f"channel.enabled = {cfg.channel is not None}")
    channel = cfg.channel or LossyChannelConfig()
    lines += [f"channel.{f.name} = {getattr(channel, f.name)!r}" for f in fields(channel)]
    for name in sorted(cfg.backends):
        b = cfg.backends[name]
        lines += [
            f"backend.{name}.{f.name} = {getattr(b, f.name)}"
            for f in fields(b)
            if f.name not in ("name", "frame")
        ]
    return "\n".join(lines) + "\n"
