"""Scenario configuration, validation and seeding policy.

Configs are flat ``key = value`` documents, one key per line, ``#`` starts a
comment. List-valued keys take comma-separated values::

    L = 2
    K = 4
    snr_db_list = 0, 5, 10
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised when a config document cannot be parsed or fails validation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class Modulation(str, enum.Enum):
    QPSK = "QPSK"
    QAM16 = "QAM16"
    GAUSSIAN = "GAUSSIAN"


class Receiver(str, enum.Enum):
    FR_MMSE = "FR_MMSE"
    FR_MMSE_SIC = "FR_MMSE_SIC"
    LRA_MMSE = "LRA_MMSE"
    LRA_MMSE_SIC = "LRA_MMSE_SIC"
    AGC_LRA_MMSE = "AGC_LRA_MMSE"
    AGC_LRA_MMSE_SIC = "AGC_LRA_MMSE_SIC"
    STD_AGC_MMSE = "STD_AGC_MMSE"

    @property
    def full_resolution(self) -> bool:
        return self.name.startswith("FR_")

    @property
    def sic(self) -> bool:
        return self.name.endswith("_SIC")


#: Bit depth that stands for the full-resolution (quantizer bypass) system.
FR_BITS = 16
MAX_QUANTIZED_BITS = 12


@dataclass(frozen=True)
class SystemConfig:
    L: int
    K: int
    N_T: int
    N_R: int
    b: int
    gamma: float
    sigma_shadow_db: float
    r_cell: float
    r_hole: float
    snr_db_list: tuple
    packets: int
    symbols_per_packet: int
    trials: int
    master_seed: int
    modulation: Modulation = Modulation.QPSK
    receiver: Receiver = Receiver.AGC_LRA_MMSE_SIC
    alt_iterations: int = 1
    # sweep axes; default to the single ``b`` / ``receiver`` values
    bits_list: tuple = ()
    receiver_list: tuple = ()

    def __post_init__(self):
        _validate(self)

    @property
    def n_streams(self) -> int:
        return self.L * self.K * self.N_T

    @property
    def n_antennas(self) -> int:
        return self.L * self.N_R

    @property
    def sweep_bits(self) -> tuple:
        return self.bits_list or (self.b,)

    @property
    def sweep_receivers(self) -> tuple:
        return self.receiver_list or (self.receiver,)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = [x.value if isinstance(x, enum.Enum) else x for x in v]
            out[f.name] = v
        return out

    def config_hash(self) -> str:
        return hashlib.sha256(dump_config(self).encode()).hexdigest()[:16]


_REQUIRED = ("L", "K", "N_T", "N_R", "b", "gamma", "sigma_shadow_db", "r_cell",
             "r_hole", "snr_db_list", "packets", "symbols_per_packet", "trials",
             "master_seed")

_INT_KEYS = {"L", "K", "N_T", "N_R", "b", "packets", "symbols_per_packet",
             "trials", "master_seed", "alt_iterations"}
_FLOAT_KEYS = {"gamma", "sigma_shadow_db", "r_cell", "r_hole"}


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        # allow "1e3"-style literals as long as they are integral
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}", key) from None
        if not v.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {text!r}", key)
        return int(v)


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", key) from None


def _parse_enum(key, cls, text):
    try:
        return cls(text.strip().upper())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"{key}: unknown value {text!r} (choices: {choices})", key) from None


def _split_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_value(key: str, text: str):
    """Convert the textual value of ``key`` to its typed form."""
    text = text.strip()
    if key in _INT_KEYS:
        return _parse_int(key, text)
    if key in _FLOAT_KEYS:
        return _parse_float(key, text)
    if key == "snr_db_list":
        return tuple(_parse_float(key, t) for t in _split_list(text))
    if key == "bits_list":
        return tuple(_parse_int(key, t) for t in _split_list(text))
    if key == "modulation":
        return _parse_enum(key, Modulation, text)
    if key == "receiver":
        return _parse_enum(key, Receiver, text)
    if key == "receiver_list":
        return tuple(_parse_enum(key, Receiver, t) for t in _split_list(text))
    raise ConfigError(f"unknown key {key!r}", key)


def parse_document(source: str) -> dict:
    """Parse a key-value document into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, text = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        values[key] = parse_value(key, text)
    return values


def config_from_dict(values: dict) -> SystemConfig:
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing),
                          missing[0])
    return SystemConfig(**values)


def load_config(source, overrides=None, base=None) -> SystemConfig:
    """Build a validated :class:`SystemConfig` from a key-value document.

    ``source`` is the document text or a :class:`~pathlib.Path` to it.
    ``base`` holds typed defaults (e.g. :func:`profile_values`) that the
    document may override.  ``overrides`` maps keys to textual values and is
    applied last.
    """
    if isinstance(source, Path):
        try:
            source = source.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    values = dict(base or {})
    values.update(parse_document(source))
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, str(text))
    return config_from_dict(values)


def _format(v):
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: SystemConfig) -> str:
    """Serialize ``cfg`` to the canonical key-value document."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple) and not v:
            continue
        lines.append(f"{f.name} = {_format(v)}")
    return "\n".join(lines) + "\n"


def _validate(cfg: SystemConfig):
    def fail(rule, key):
        raise ConfigError(f"{rule} violated", key)

    for key, val in (("modulation", cfg.modulation), ("receiver", cfg.receiver)):
        cls = Modulation if key == "modulation" else Receiver
        if not isinstance(val, cls):
            object.__setattr__(cfg, key, _parse_enum(key, cls, str(val)))
    object.__setattr__(cfg, "snr_db_list", tuple(float(s) for s in cfg.snr_db_list))
    object.__setattr__(cfg, "bits_list", tuple(int(b) for b in cfg.bits_list))
    object.__setattr__(cfg, "receiver_list",
                       tuple(r if isinstance(r, Receiver) else _parse_enum("receiver_list", Receiver, r)
                             for r in cfg.receiver_list))

    for key in ("L", "K", "N_T", "N_R"):
        if getattr(cfg, key) < 1:
            fail(f"{key} >= 1", key)
    for key in ("packets", "symbols_per_packet", "trials"):
        if getattr(cfg, key) < 1:
            fail(f"{key} >= 1", key)
    if not 0 <= cfg.master_seed < 2**64:
        fail("0 <= master_seed < 2**64", "master_seed")
    if cfg.alt_iterations < 0:
        fail("alt_iterations >= 0", "alt_iterations")
    if not cfg.r_hole < cfg.r_cell:
        fail("r_hole < r_cell", "r_hole")
    if cfg.r_hole <= 0:
        fail("r_hole > 0", "r_hole")
    if not cfg.gamma > 2:
        fail("gamma > 2", "gamma")
    if cfg.sigma_shadow_db < 0:
        fail("sigma_shadow_db >= 0", "sigma_shadow_db")
    if not cfg.snr_db_list:
        fail("snr_db_list non-empty", "snr_db_list")
    for b in cfg.sweep_bits:
        if not 1 <= b <= FR_BITS:
            fail("b in [1, 16]", "bits_list" if cfg.bits_list else "b")
    quantized = [r for r in cfg.sweep_receivers if not r.full_resolution]
    if quantized:
        for b in cfg.sweep_bits:
            if b > MAX_QUANTIZED_BITS:
                fail(f"b <= {MAX_QUANTIZED_BITS} for quantized receivers",
                     "bits_list" if cfg.bits_list else "b")


def trial_seed(cfg: SystemConfig, trial_index: int) -> int:
    """Deterministic 64-bit seed of trial ``trial_index``.

    Derived by hashing ``(master_seed, trial_index)`` through
    :class:`numpy.random.SeedSequence`, so there is no dependence on
    execution order or on any global RNG state.
    """
    if not 0 <= trial_index < cfg.trials:
        raise IndexError(f"trial_index {trial_index} out of range [0, {cfg.trials})")
    ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(trial_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# Desk-scale and paper-scale profiles.  Values not listed here come from the
# user's config file (or the profile's own defaults when none is given).
PROFILES = {
    "desk": dict(
        L=2, K=4, N_T=1, N_R=16, gamma=3.7, sigma_shadow_db=8.0,
        r_cell=1000.0, r_hole=200.0, trials=50, packets=20,
        symbols_per_packet=100,
    ),
    "paper": dict(
        L=4, K=8, N_T=2, N_R=64, gamma=3.7, sigma_shadow_db=8.0,
        r_cell=1000.0, r_hole=200.0, trials=50, packets=100,
        symbols_per_packet=100,
    ),
}

_PROFILE_DEFAULTS = dict(
    b=6, bits_list=(2, 3, 4, 5, 6),
    snr_db_list=(-5.0, 0.0, 5.0, 10.0, 15.0, 20.0),
    master_seed=20190101, modulation=Modulation.QPSK,
    receiver=Receiver.AGC_LRA_MMSE_SIC,
    receiver_list=tuple(Receiver),
)


def profile_values(name: str) -> dict:
    """Typed key values of the named built-in profile."""
    try:
        base = PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}") from None
    return {**_PROFILE_DEFAULTS, **base}


def profile_config(name: str, **overrides) -> SystemConfig:
    """Return the named built-in profile with ``overrides`` applied."""
    return SystemConfig(**{**profile_values(name), **overrides})
