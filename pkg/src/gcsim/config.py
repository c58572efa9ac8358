"""Experiment configuration: JSON schema, validation and hashing.

A config is a JSON object::

    {"kind": "hom", "seed": 1, "emitter": {...}, "pulse": {...}, ...,
     "output": {"tags": "run.ptag"}}

Each parameter block maps onto a dataclass and only that dataclass's
fields are accepted. Blocks that the experiment kind does not use are
rejected too. Values are in SI units (seconds, rad/s) unless the field
name says otherwise (``_ps``, ``_dB``, nm for implant depths).

The config hash is the sha256 of the canonical JSON of the fully resolved
parameters (defaults filled in). Output paths do not enter the hash.
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

from .analysis.budget import REFERENCE_CHAIN
from .detection import DetectorParams
from .diffusion import AnnealSchedule, ImplantParams
from .emitter import EmitterParams, Metastable, PulseTrainParams
from .errors import ConfigError, GcsimError
from .optics import FpParams, MziParams
from .pipelines import CwOptions, HbtOptions, HomOptions, SaturationOptions, ScanOptions

CONFIG_VERSION = 1
SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class CorrelateOptions:
    """Histogram settings for ``correlate`` and ``report``.

    ``normalization`` is ``auto`` (pulsed for pulsed kinds, cw otherwise),
    ``pulsed``, ``cw`` or ``none``. ``log_decades`` switches to logarithmic
    bins between ``10**d0`` and ``10**d1`` seconds.
    """

    bin_width_ps: int = 100
    max_delay_ps: int = 200_000
    normalization: str = "auto"
    period_ps: int = 25_000
    half_window_ps: int = 12_500
    log_decades: Optional[tuple] = None
    points_per_decade: int = 10
    channels: tuple = (0, 1)

    def __post_init__(self):
        if self.bin_width_ps <= 0 or self.max_delay_ps < 0 or self.max_delay_ps % self.bin_width_ps:
            raise ConfigError("max_delay_ps must be a non-negative multiple of a positive bin_width_ps")
        if self.normalization not in ("auto", "pulsed", "cw", "none"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.log_decades is not None and len(self.log_decades) != 2:
            raise ConfigError("log_decades must be [d0, d1]")
        if len(self.channels) != 2:
            raise ConfigError("channels must name two channels")


BLOCKS = {
    "emitter": EmitterParams(),
    "pulse": PulseTrainParams(),
    "mzi": MziParams(),
    "fp": FpParams(),
    "detector": DetectorParams(),
    "hom": HomOptions(),
    "hbt": HbtOptions(),
    "cw": CwOptions(),
    "scan": ScanOptions(),
    "saturation": SaturationOptions(),
    "implant": ImplantParams(),
    "anneal": AnnealSchedule(),
    "budget": REFERENCE_CHAIN,
    "correlate": CorrelateOptions(),
}

KINDS = {
    "hom": ("emitter", "pulse", "mzi", "detector", "hom", "correlate"),
    "pulsed_g2": ("emitter", "pulse", "detector", "hbt", "correlate"),
    "cw_g2": ("emitter", "detector", "cw", "correlate"),
    "spectrum_scan": ("emitter", "fp", "detector", "scan"),
    "saturation": ("saturation",),
    "diffusion": ("implant", "anneal"),
    "budget": ("budget", "emitter"),
}
#: per-kind defaults layered over the dataclass defaults (still overridable)
KIND_DEFAULTS = {
    "hom": {"pulse": {"n_pulses": 1_000_000}},
    "pulsed_g2": {"pulse": {"n_pulses": 1_000_000}},
    "cw_g2": {"correlate": {"log_decades": (-8.0, -5.0)}},
}
STOCHASTIC = frozenset({"hom", "pulsed_g2", "cw_g2", "spectrum_scan", "saturation"})
TAG_KINDS = frozenset({"hom", "pulsed_g2", "cw_g2"})
OUTPUT_KEYS = ("tags", "histogram", "fit", "data", "profile", "budget", "manifest", "dir")


@dataclass
class ExperimentConfig:
    kind: str
    seed: Optional[int]
    blocks: dict
    output: dict

    def __getattr__(self, name):
        blocks = self.__dict__.get("blocks", {})
        if name in blocks:
            return blocks[name]
        raise AttributeError(name)

    @property
    def stochastic(self):
        return self.kind in STOCHASTIC

    def resolved(self):
        """Plain-JSON view of every resolved parameter (no output paths)."""
        d = {"config_version": CONFIG_VERSION, "kind": self.kind}
        if self.seed is not None:
            d["seed"] = self.seed
        for name in KINDS[self.kind]:
            d[name] = _plain(dataclasses.asdict(self.blocks[name]))
        return d

    @property
    def hash(self):
        return config_hash(self.resolved())

    def with_seed(self, seed):
        return ExperimentConfig(self.kind, _check_seed(seed, "seed"), dict(self.blocks), dict(self.output))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(resolved):
    return hashlib.sha256(canonical_json(resolved).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# validation


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(value, default, path, nullable=False):
    if value is None:
        if nullable or default is None:
            return None
        raise ConfigError("null is not allowed here", path)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", path)
        return value
    if isinstance(default, int):
        if not _is_number(value) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    if isinstance(default, float) or default is None:
        if isinstance(value, (list, tuple)) and default is None:
            return tuple(_coerce(v, 0.0, f"{path}[{i}]") for i, v in enumerate(value))
        if not _is_number(value):
            raise ConfigError(f"expected a number, got {value!r}", path)
        if isinstance(value, float) and math.isnan(value):
            raise ConfigError("NaN is not a valid parameter", path)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", path)
        proto = default[0] if default else 0.0
        return tuple(_coerce(v, proto, f"{path}[{i}]") for i, v in enumerate(value))
    raise ConfigError(f"unsupported field type {type(default).__name__}", path)


def _build_block(name, raw):
    proto = BLOCKS[name]
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", name)
    fields = {f.name: f for f in dataclasses.fields(proto)}
    kw = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in fields:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(fields))})", path)
        if name == "emitter" and key == "metastable":
            kw[key] = _build_metastable(value, path)
        else:
            f = fields[key]
            nullable = f.default is None or "Optional" in str(f.type)
            kw[key] = _coerce(value, getattr(proto, key), path, nullable)
    try:
        return dataclasses.replace(proto, **kw)
    except (GcsimError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), name) from None


def _build_metastable(value, path):
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError("expected an object or null", path)
    proto = Metastable()
    names = {f.name for f in dataclasses.fields(Metastable)}
    kw = {}
    for k, v in value.items():
        if k not in names:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(names))})", f"{path}.{k}")
        kw[k] = _coerce(v, getattr(proto, k), f"{path}.{k}")
    try:
        return Metastable(**kw)
    except (GcsimError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def _check_seed(seed, path):
    if seed is None:
        return None
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= SEED_MAX:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}", path)
    return int(seed)


def parse_config(raw, seed_override=None) -> ExperimentConfig:
    """Validate a decoded JSON object into an ``ExperimentConfig``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {sorted(KINDS)}, got {kind!r}", "kind")
    allowed = {"kind", "seed", "output", *KINDS[kind]}
    for key in raw:
        if key not in allowed:
            hint = "not used by this kind" if key in BLOCKS else "unknown key"
            raise ConfigError(hint, key)
    seed = _check_seed(raw.get("seed"), "seed")
    if seed_override is not None:
        seed = _check_seed(seed_override, "--seed")
    if kind in STOCHASTIC and seed is None:
        raise ConfigError(f"a seed is required for the stochastic kind {kind!r}", "seed")
    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("expected an object", "output")
    for k, v in output.items():
        if k not in OUTPUT_KEYS:
            raise ConfigError(f"unknown output (allowed: {', '.join(OUTPUT_KEYS)})", f"output.{k}")
        if not isinstance(v, str):
            raise ConfigError("expected a path string", f"output.{k}")
    blocks = {}
    for name in KINDS[kind]:
        user = raw.get(name, {})
        if not isinstance(user, dict):
            raise ConfigError("expected an object", name)
        blocks[name] = _build_block(name, {**KIND_DEFAULTS.get(kind, {}).get(name, {}), **user})
    return ExperimentConfig(kind, seed, blocks, dict(output))


def load_config(path, seed_override=None):
    """Read and validate a JSON config file (OSError propagates)."""
    with open(path) as f:
        text = f.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config(raw, seed_override)


def default_config(kind, seed=None):
    return parse_config({"kind": kind, **({"seed": seed} if seed is not None else {})})
