"""Shared domain types, experiment configuration and seeded random streams."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration file cannot be parsed or has a malformed field."""

    def __init__(self, message, field_name=None):
        super().__init__(message)
        self.field = field_name


class ValidationError(ConfigError):
    """Raised when a parsed configuration violates an invariant."""


@dataclass(frozen=True)
class SimConfig:
    n_users: int
    n_subcarriers: int
    bandwidth_hz: float
    noise_psd_dbm_hz: float
    model_bits: float
    local_epochs: int
    cycles_per_bit: float
    kappa: float
    f_min_hz: float
    f_max_hz: float
    p_max_w: float
    e0_range_j: tuple
    eh_mean_j: float
    e_max_j: float
    noniid_ratio: float
    samples_range: tuple
    target_accuracy: float
    max_rounds: int
    rng_seed: int
    # optional knobs with defaults
    shadowing_std_db: float = 6.0
    distance_range_m: tuple = (50.0, 500.0)
    harvest_quantum_j: float = 0.05
    model: str = "logreg"
    lr0: float = 0.1

    def __post_init__(self):
        validate(self)

    @property
    def noise_psd_w_hz(self):
        return 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0)

    @property
    def noise_power_w(self):
        """Noise power over one subcarrier, N0 * B."""
        return self.noise_psd_w_hz * self.bandwidth_hz

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_REQUIRED = [f.name for f in dataclasses.fields(SimConfig)
             if f.default is dataclasses.MISSING]
_ALL = {f.name: f for f in dataclasses.fields(SimConfig)}
_INT_FIELDS = {"n_users", "n_subcarriers", "local_epochs", "max_rounds", "rng_seed"}
_PAIR_FIELDS = {"e0_range_j", "samples_range", "distance_range_m"}
_STR_FIELDS = {"model"}


def validate(cfg: SimConfig) -> None:
    def bad(name, why):
        raise ValidationError(f"{name}: {why}", name)

    if cfg.n_users < 1:
        bad("n_users", "must be >= 1")
    if cfg.n_subcarriers < 1:
        bad("n_subcarriers", "must be >= 1")
    if not 0.0 <= cfg.noniid_ratio <= 1.0:
        bad("noniid_ratio", "must lie in [0, 1]")
    if cfg.f_min_hz > cfg.f_max_hz:
        bad("f_min_hz", "f_min_hz must not exceed f_max_hz")
    for name in ("bandwidth_hz", "model_bits", "cycles_per_bit", "kappa", "f_min_hz",
                 "f_max_hz", "p_max_w", "eh_mean_j", "e_max_j", "harvest_quantum_j",
                 "shadowing_std_db", "lr0"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            bad(name, "must be a finite positive number")
    if cfg.local_epochs < 1:
        bad("local_epochs", "must be >= 1")
    if cfg.max_rounds < 1:
        bad("max_rounds", "must be >= 1")
    lo, hi = cfg.e0_range_j
    if not (0 < lo <= hi <= cfg.e_max_j):
        bad("e0_range_j", "need 0 < low <= high <= e_max_j")
    lo, hi = cfg.samples_range
    if not (1 <= lo <= hi):
        bad("samples_range", "need 1 <= low <= high")
    lo, hi = cfg.distance_range_m
    if not (0 < lo <= hi):
        bad("distance_range_m", "need 0 < low <= high")
    if not 0.0 <= cfg.target_accuracy <= 1.0:
        bad("target_accuracy", "must lie in [0, 1]")
    if cfg.model not in ("logreg", "mlp"):
        bad("model", "must be 'logreg' or 'mlp'")


def _coerce(name, value):
    f = _ALL[name]
    try:
        if name in _PAIR_FIELDS:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise TypeError("expected a [low, high] pair")
            cast = int if name == "samples_range" else float
            pair = tuple(cast(v) for v in value)
            if cast is int and any(p != v for p, v in zip(pair, value)):
                raise TypeError("expected integers")
            return pair
        if name in _STR_FIELDS:
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        if name in _INT_FIELDS:
            if int(value) != value:
                raise TypeError("expected an integer")
            return int(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{f.name}: {exc}", f.name) from None


def config_from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(_ALL))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field", unknown[0])
    missing = [n for n in _REQUIRED if n not in data]
    if missing:
        raise ValidationError(f"{missing[0]}: required field missing", missing[0])
    kwargs = {k: _coerce(k, v) for k, v in data.items()}
    return SimConfig(**kwargs)


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def make_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Independent reproducible generator for ``(seed, stream_label)``."""
    digest = hashlib.sha256(stream_label.encode()).digest()
    words = np.frombuffer(digest, dtype="<u4").tolist()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words])))


STREAMS = ("channel", "energy", "data", "policy", "sgd")


@dataclass
class RngBundle:
    channel: np.random.Generator
    energy: np.random.Generator
    data: np.random.Generator
    policy: np.random.Generator
    sgd: np.random.Generator

    @classmethod
    def for_episode(cls, seed: int, tag: str = "") -> "RngBundle":
        return cls(**{s: make_rng(seed, f"{s}/{tag}") for s in STREAMS})


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    cycles_per_bit: float
    batch_bits: float
    f_min_hz: float
    f_max_hz: float
    p_max_w: float
    distance_m: float
    shadowing_db: float
    shard: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.batch_bits <= 0:
            raise ValueError("batch_bits must be positive")
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if self.f_min_hz > self.f_max_hz:
            raise ValueError("f_min_hz must not exceed f_max_hz")

    @property
    def pathloss_db(self) -> float:
        return 38.4 + 30.0 * math.log10(self.distance_m) + self.shadowing_db


def make_profiles(cfg: SimConfig, rng: np.random.Generator, batch_bits, shards=None):
    """Draw the static per-user topology: distance and one shadowing sample per user."""
    lo, hi = cfg.distance_range_m
    dist = rng.uniform(lo, hi, size=cfg.n_users)
    shadow = rng.normal(0.0, cfg.shadowing_std_db, size=cfg.n_users)
    bb = np.broadcast_to(np.asarray(batch_bits, dtype=float), (cfg.n_users,))
    return [
        UserProfile(
            user_id=n,
            cycles_per_bit=cfg.cycles_per_bit,
            batch_bits=float(bb[n]),
            f_min_hz=cfg.f_min_hz,
            f_max_hz=cfg.f_max_hz,
            p_max_w=cfg.p_max_w,
            distance_m=float(dist[n]),
            shadowing_db=float(shadow[n]),
            shard=None if shards is None else shards[n],
        )
        for n in range(cfg.n_users)
    ]
