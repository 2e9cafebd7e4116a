"""Run configuration: system defaults, run controls, sweep specs and the flat
``key = value`` config format.

All keys of ``SystemParams`` and ``RunConfig`` share one flat namespace, so a
config file or ``--set`` override never needs to say which group a key
belongs to. Numeric values accept SI suffixes ``k``, ``M`` and ``G``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigurationError
from ..transmitter import PilotKind

__all__ = [
    "SystemParams",
    "RunConfig",
    "SweepSpec",
    "SWEEP_AXES",
    "parse_value",
    "parse_config_text",
    "load_config",
    "load_sweep",
    "desk_profile",
]


@dataclass(frozen=True)
class SystemParams:
    """Hardware and DSP constants. Defaults follow the reference parameter table
    where it gives a value; the rest are modelling choices.
    """

    sample_rate: float = 2e9
    symbol_rate: float = 100e6
    f_uc_ep: float = 500e6
    f_uc_op: float = 400e6
    f_pilot_ep: float = 100e6
    rrc_span: int = 20
    roll_off: float = 0.65
    v_pi: float = 1.0
    extinction_ratio_db: float = 35.0
    iq_imbalance_db: float = 0.0
    responsivity: float = 1.0
    nep: float = 7e-12
    tia_gain: float = 3500.0
    pd_bandwidth: float = 800e6
    adc_bits: int = 12
    loss_db_per_km: float = 0.16
    wavelength: float = 1550e-9
    lo_power_w: float = 1.5e-3
    eta: float = 0.7
    beta: float = 0.95
    mean_photons: float = 1.25
    freq_offset_ep: float = 0.0
    freq_offset_op: float = 100e6
    pilot_bw: float = 25e6
    dac_clip_sigma: float = 4.0
    ep_full_scale_vpi: float = 0.15
    adc_clip_sigma: float = 4.0
    preamble_len: int = 256
    equalize_pd: bool = True

    @property
    def sps(self) -> int:
        ratio = self.sample_rate / self.symbol_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError(f"sample_rate/symbol_rate = {ratio:g} is not an integer")
        return int(round(ratio))


@dataclass(frozen=True)
class RunConfig:
    """One simulated operating point.

    ``delta_f`` (optional) sets the pilot-to-quantum spacing while keeping the
    quantum band at ``f_uc_ep`` at the receiver: EP moves the pilot, OP moves
    the upconversion frequency and the TX-LO offset together.
    """

    system: SystemParams = field(default_factory=SystemParams)
    pilot_mode: PilotKind = PilotKind.OPTICAL
    rho_db: float = 34.0
    n_dac: int = 12
    linewidth_hz: float = 200.0
    distance_km: float = 100.0
    maf_m: int = 2000
    n_sym: int = 100_000
    k_copies: int = 100
    n_workers: int = 1
    master_seed: int = 1
    sync: bool = True
    delta_f: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "pilot_mode", PilotKind.parse(self.pilot_mode))
        checks = [
            (self.k_copies >= 1, "k_copies must be >= 1"),
            (self.n_workers >= 1, "n_workers must be >= 1"),
            (self.n_sym >= 1, "n_sym must be >= 1"),
            (self.n_dac >= 1, "n_dac must be >= 1"),
            (self.maf_m >= 0, "maf_m must be >= 0"),
            (self.linewidth_hz >= 0, "linewidth_hz must be >= 0"),
            (self.distance_km >= 0, "distance_km must be >= 0"),
            (0 <= self.master_seed < 2**64, "master_seed must fit in an unsigned 64-bit integer"),
            (self.delta_f is None or self.delta_f > 0, "delta_f must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)

    # -- flat key access -------------------------------------------------
    @staticmethod
    def keys() -> list[str]:
        run = [f.name for f in fields(RunConfig) if f.name != "system"]
        return run + [f.name for f in fields(SystemParams)]

    def with_overrides(self, overrides: dict) -> "RunConfig":
        run_names = {f.name: f for f in fields(RunConfig) if f.name != "system"}
        sys_names = {f.name: f for f in fields(SystemParams)}
        run_kw, sys_kw = {}, {}
        for key, raw in overrides.items():
            if key in run_names:
                run_kw[key] = _coerce(key, raw, run_names[key].type)
            elif key in sys_names:
                sys_kw[key] = _coerce(key, raw, sys_names[key].type)
            else:
                raise ConfigurationError(f"unknown configuration key {key!r}")
        system = replace(self.system, **sys_kw) if sys_kw else self.system
        return replace(self, system=system, **run_kw)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        return cls().with_overrides(values)

    def as_flat_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "system"}
        out["pilot_mode"] = self.pilot_mode.value
        out.update(dataclasses.asdict(self.system))
        return out


def desk_profile(**overrides) -> RunConfig:
    """Desk-scale defaults: 10^5 symbols per copy, 100 copies."""
    return RunConfig(n_sym=100_000, k_copies=100).with_overrides(overrides)


SWEEP_AXES = ("n_dac", "rho_db", "linewidth_hz", "distance_km", "maf_m", "delta_f")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    fixed: RunConfig = field(default_factory=RunConfig)
    output_path: Path | None = None

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigurationError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            self.config_for(v)  # validates ranges eagerly

    def config_for(self, value) -> RunConfig:
        return self.fixed.with_overrides({self.axis: value})


# ---------------------------------------------------------------- parsing

_SUFFIX = {"k": 1e3, "M": 1e6, "G": 1e9}
_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([kMG]?)$")


def parse_value(text: str):
    """Parse a scalar: bool, number with optional k/M/G suffix, ``none``, or string."""
    s = text.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    m = _NUM.match(s)
    if m:
        num = float(m.group(1)) * _SUFFIX.get(m.group(2), 1.0)
        return num
    return s


def _coerce(key: str, value, annotation):
    ann = str(annotation)
    if isinstance(value, str):
        value = parse_value(value)
    try:
        if "PilotKind" in ann:
            return PilotKind.parse(value)
        if ann.startswith("bool"):
            if isinstance(value, bool):
                return value
            if isinstance(value, (int, float)) and value in (0, 1):
                return bool(value)
            raise ValueError(value)
        if value is None:
            if "None" in ann:
                return None
            raise ValueError("None")
        if ann.startswith("int"):
            f = float(value)
            if not math.isfinite(f) or f != int(f):
                raise ValueError(value)
            return int(f)
        if ann.startswith("float"):
            f = float(value)
            if not math.isfinite(f):
                raise ValueError(value)
            return f
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad value for {key!r}: {value!r}") from exc
    return value


def parse_config_text(text: str) -> dict:
    """``key = value`` lines with ``#`` comments into a dict of raw strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError:
        raise
    except UnicodeDecodeError as exc:
        raise ConfigurationError(f"{path}: not a text file") from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    raw = parse_config_text(_read(path)) if path is not None else {}
    raw.update(overrides or {})
    return RunConfig.from_mapping(raw)


def load_sweep(path, overrides: dict | None = None) -> SweepSpec:
    """Sweep file: run keys plus ``axis``, ``values`` (comma list) and ``output``."""
    raw = parse_config_text(_read(path))
    raw.update(overrides or {})
    try:
        axis = raw.pop("axis")
    except KeyError:
        raise ConfigurationError(f"{path}: sweep needs an 'axis' key") from None
    values_text = raw.pop("values", "")
    output = raw.pop("output", None)
    values = [parse_value(v) for v in values_text.split(",") if v.strip()]
    for v in values:
        if not isinstance(v, float):
            raise ConfigurationError(f"sweep value {v!r} is not numeric")
    fixed = RunConfig.from_mapping(raw)
    return SweepSpec(axis, tuple(values), fixed, Path(output) if output else None)
