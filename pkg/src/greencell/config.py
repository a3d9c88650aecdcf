"""Model parameters: loading, validation, unit conversion, derived constants."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import NamedTuple


class ConfigError(ValueError):
    """Malformed config file or parameter set violating a model invariant."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0) * 1e-3


def watts_to_dbm(value_w: float) -> float:
    return 10.0 * math.log10(value_w * 1e3)


# Fields that must be strictly positive.
_POSITIVE_FIELDS = (
    "p0_static",
    "delta_p",
    "p_trans",
    "lambda_b",
    "hotspot_radius",
    "noise_power",  # checked only for >= 0 below, see _validate
    "mu",
    "omega",
    "nu",
    "delta_t",
)

# Fields that must be >= 0 (zero is meaningful: no uniform users, no noise, ...).
_NONNEGATIVE_FIELDS = (
    "lambda_u1",
    "lambda_p",
    "lambda_u2",
    "noise_power",
    "tau",
    "xi_grid",
    "xi_re",
    "rate_scale",
    "arrival_scale",
    "arrival_offset",
)


@dataclass(frozen=True)
class NetworkConfig:
    """Full parameter set for one network scenario.

    Distances are in km, densities in km^-2, powers in watts, rates per unit
    time. ``noise_power`` and ``tau`` are stored linear; the JSON loader also
    accepts ``noise_power_dbm`` / ``tau_db`` and converts.
    """

    p0_static: float          # load-independent draw per BS, W
    delta_p: float            # amplifier slope, dimensionless
    p_trans: float            # total transmit power per BS, W
    n_channels: int           # channels per BS
    t_levels: int             # battery capacity in discrete energy units
    lambda_b: float           # BS density
    lambda_u1: float          # uniformly spread user density
    lambda_p: float           # hotspot center density
    lambda_u2: float          # clustered user density within a hotspot
    hotspot_radius: float     # hotspot disc radius, km
    alpha: float              # path-loss exponent, > 2
    noise_power: float        # receiver noise, W
    tau: float                # SINR threshold, linear
    mu: float                 # per-channel service rate
    omega: float              # battery drain per busy channel
    nu: float                 # renewable recharge rate
    delta_t: float = 1.0      # accounting interval
    static_drain_override: float | None = None
    xi_grid: float = 1.5842e-4  # grid carbon intensity, gCO2 per J
    xi_re: float = 0.0          # renewable carbon intensity
    p_req: float = 0.95         # success-probability floor for optimization
    rate_scale: float = 1.0     # bandwidth multiplier applied to per-user rates
    arrival_scale: float = 1.0  # arrival map rho = arrival_scale * U + arrival_offset
    arrival_offset: float = 0.0

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def p_t(self) -> float:
        """Per-channel transmit power."""
        return self.p_trans / self.n_channels

    @property
    def theta(self) -> float:
        """Energy drawn from the battery by one busy channel per unit time."""
        return self.delta_p * self.p_t * self.delta_t

    @property
    def static_drain(self) -> float:
        """Battery units consumed per unit time by the static load."""
        if self.static_drain_override is not None:
            return self.static_drain_override
        return self.p0_static / self.theta

    @property
    def mean_cluster_users(self) -> float:
        """Mean number of clustered users per hotspot."""
        return self.lambda_u2 * math.pi * self.hotspot_radius**2

    @property
    def user_arrival_density(self) -> float:
        """Total user density: clustered plus uniform."""
        return self.lambda_p * self.mean_cluster_users + self.lambda_u1


class DerivedConstants(NamedTuple):
    p_t: float
    theta: float
    static_drain: float


def derived_constants(cfg: NetworkConfig) -> DerivedConstants:
    return DerivedConstants(cfg.p_t, cfg.theta, cfg.static_drain)


def _validate(cfg: NetworkConfig) -> None:
    problems = []
    for name in _POSITIVE_FIELDS:
        if name == "noise_power":
            continue
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            problems.append(f"{name} must be positive, got {v!r}")
    for name in _NONNEGATIVE_FIELDS:
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            problems.append(f"{name} must be nonnegative, got {v!r}")
    if not (isinstance(cfg.n_channels, int) and cfg.n_channels >= 1):
        problems.append(f"n_channels must be an integer >= 1, got {cfg.n_channels!r}")
    if not (isinstance(cfg.t_levels, int) and cfg.t_levels >= 1):
        problems.append(f"t_levels must be an integer >= 1, got {cfg.t_levels!r}")
    if not (isinstance(cfg.alpha, (int, float)) and math.isfinite(cfg.alpha) and cfg.alpha > 2):
        problems.append(f"alpha must exceed 2, got {cfg.alpha!r}")
    if not (0 <= cfg.p_req < 1):
        problems.append(f"p_req must lie in [0, 1), got {cfg.p_req!r}")
    if cfg.static_drain_override is not None:
        v = cfg.static_drain_override
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            problems.append(f"static_drain_override must be nonnegative, got {v!r}")
    if problems:
        raise ConfigError("; ".join(problems))


_FIELD_NAMES = {f.name for f in dataclasses.fields(NetworkConfig)}
# JSON alternatives: value given on a dB scale instead of linear.
_DB_ALTERNATIVES = {"noise_power_dbm": "noise_power", "tau_db": "tau"}


def config_from_dict(raw: dict) -> NetworkConfig:
    """Build a validated config from a flat dict of JSON values."""
    data = dict(raw)
    for alt, target in _DB_ALTERNATIVES.items():
        if alt in data:
            if target in data:
                raise ConfigError(f"give either {target} or {alt}, not both")
            x = data.pop(alt)
            if not isinstance(x, (int, float)):
                raise ConfigError(f"{alt} must be a number, got {x!r}")
            data[target] = dbm_to_watts(x) if alt.endswith("_dbm") else db_to_linear(x)
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    missing = sorted(
        _FIELD_NAMES
        - set(data)
        - {f.name for f in dataclasses.fields(NetworkConfig) if f.default is not dataclasses.MISSING}
    )
    if missing:
        raise ConfigError("missing config keys: " + ", ".join(missing))
    try:
        return NetworkConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike) -> NetworkConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return config_from_dict(raw)


def canonical_json(cfg: NetworkConfig) -> str:
    """Canonical serialized form: sorted keys, linear units, full float repr."""
    return json.dumps(dataclasses.asdict(cfg), sort_keys=True, separators=(",", ":"))


def save_config(cfg: NetworkConfig, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, sort_keys=True, indent=2)
        fh.write("\n")


def config_hash(cfg: NetworkConfig) -> str:
    """sha256 over the canonical serialized form."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()
