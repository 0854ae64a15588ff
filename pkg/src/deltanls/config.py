"""Run configuration: defaults, validation, and a JSON round trip."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import UsageError

COMMANDS = (
    "soliton",
    "omega-crit",
    "spectrum",
    "resonance-scan",
    "resonance-table",
    "jost",
    "threshold",
    "dispersive-fit",
    "evolve",
    "modulate",
    "reproduce-table",
)


@dataclass
class RunConfig:
    command: str = "soliton"
    # physics
    q: float = -1.0
    p: float = 5.0
    sigma: int = -1
    omega: float = 1.0
    parity: str = "even"
    eta: float = 1e-2
    shape: str = "projected"
    alpha: float = 1.2
    r: float = 12.0
    xi: float = 1.0
    # numerics
    h: float | None = None
    X: float | None = None
    dt: float = 0.01
    x0: float = 50.0
    tmax: float = 20.0
    samples: int | None = None
    tol: float = 1e-5
    extrapolate: bool = False
    # ranges, stored as strings "lo:hi" or "lo:hi:n"
    omega_range: str | None = None
    p_list: str = "4.2:6.2:0.2"
    xi_range: str | None = None
    window: str | None = None
    # io
    out: str | None = None
    traj: str | None = None
    x_eval: float | None = None
    query: str = "mass"
    threads: int = 1
    verbose: bool = False
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command '{self.command}'")
        if not self.q < 0:
            raise UsageError(f"q must be negative (attractive defect), got {self.q}")
        if self.sigma not in (-1, 1):
            raise UsageError("sigma must be -1 (focusing) or +1 (defocusing)")
        if not self.p > 0:
            raise UsageError("p must be positive")
        if self.parity not in ("even", "odd"):
            raise UsageError("parity must be 'even' or 'odd'")
        for name in ("h", "X", "dt", "x0", "tmax"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise UsageError(f"{name} must be positive")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def _coerce(name: str, value):
    default = getattr(_DEFAULTS, name)
    if value is None:
        return None
    typ = _FIELDS[name].type
    try:
        if "bool" in typ:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if typ.startswith("int"):
            return int(value)
        if typ.startswith("float"):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for '{name}': {value!r} (default {default!r})") from exc


def parse_config(overrides: dict | None = None, path: str | Path | None = None) -> RunConfig:
    """Defaults, then keys from a JSON file, then ``overrides``; unknown keys are rejected."""
    data = {}
    if path is not None:
        try:
            data.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise UsageError(f"unknown configuration key(s): {', '.join(unknown)}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in data.items()})
    return cfg.validate()


def serialize(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)


def normalize(data: dict) -> str:
    """Canonical form of a partial configuration dict."""
    return serialize(parse_config(data))


def parse_range(text: str, with_count: bool = False):
    """'lo:hi' -> (lo, hi); 'lo:hi:n' -> (lo, hi, n) when ``with_count``."""
    parts = [s for s in str(text).split(":")]
    try:
        vals = [float(s) for s in parts]
    except ValueError as exc:
        raise UsageError(f"bad range '{text}'") from exc
    if with_count:
        if len(vals) != 3:
            raise UsageError(f"expected lo:hi:n, got '{text}'")
        return vals[0], vals[1], int(vals[2])
    if len(vals) != 2 or not vals[1] > vals[0]:
        raise UsageError(f"expected lo:hi with lo < hi, got '{text}'")
    return vals[0], vals[1]


def parse_p_list(text: str):
    """'a:b:step' (inclusive) or comma list."""
    if "," in text:
        return [float(s) for s in text.split(",")]
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"expected lo:hi:step or a comma list, got '{text}'")
    lo, hi, step = (float(s) for s in parts)
    if not step > 0 or hi < lo:
        raise UsageError(f"bad p list '{text}'")
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 10) for k in range(n + 1)]
