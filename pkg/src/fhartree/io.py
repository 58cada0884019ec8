"""Run configuration, binary checkpoints and table output."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import HartreeParams, Trajectory
from .errors import CheckpointError, ConfigError
from .spectral import Field, Grid

COMMANDS = ("evolve", "groundstate", "alpha-sweep", "meanfield", "dichotomy", "verify")

# physical and numerical keys shared by every command; "lambda" is stored as ``lam``
_COMMON = {"gamma": float, "sigma": float, "mu": int, "lambda": float, "alpha": float, "dt": float,
           "points": int, "half_width": float, "dim": int, "horizon": float, "values": list,
           "threads": int, "seed": int, "out": str, "command": str}

_OPTIONS = {
    "evolve": {"width": float, "stride": int, "sobolev_orders": list, "blowup_factor": float,
               "method": str, "lambda_critical": float, "force": bool, "checkpoint": bool},
    "groundstate": {"omega": float, "tol": float, "max_iter": int, "solver": str},
    "alpha-sweep": {"width": float, "method": str, "eps": float, "workers": int},
    "meanfield": {"width": float, "sample_every": int, "schedule_exponent": float,
                  "alpha0": float, "coupled": bool, "workers": int},
    "dichotomy": {"omega": float, "squeeze": float, "factor": float, "controls": bool,
                  "tol": float, "diag_every": int, "workers": int},
    "verify": {"quick": bool},
}

_COMMAND_DEFAULTS = {
    "evolve": {},
    "groundstate": {},
    "alpha-sweep": {"values": [0.4, 0.2, 0.1, 0.05], "horizon": 0.5},
    "meanfield": {"dim": 1, "points": 32, "half_width": 8.0, "dt": 0.02, "sigma": 1.0,
                  "alpha": 0.5, "values": [2, 3, 4, 5]},
    "dichotomy": {"mu": -1, "values": [0.5, 0.9, 1.1, 1.5], "horizon": 2.0},
    "verify": {},
}


@dataclass
class RunConfig:
    command: str
    gamma: float = 1.0
    sigma: float = 0.5
    mu: int = 1
    lam: float = 1.0
    alpha: float = 0.0
    dt: float = 2e-3
    points: int = 64
    half_width: float = 12.0
    dim: int = 3
    horizon: float = 1.0
    values: tuple = ()
    threads: int = 1
    seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def params(self, **kw) -> HartreeParams:
        base = dict(gamma=self.gamma, sigma=self.sigma, mu=self.mu, lam=self.lam,
                    alpha=self.alpha, dt=self.dt)
        for k in ("method", "lambda_critical", "force"):
            if k in self.options:
                base[k] = self.options[k]
        base.update(kw)
        return HartreeParams(**base)

    def grid(self) -> Grid:
        return Grid(self.dim, self.points, self.half_width)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        return d


def _coerce(key, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    raise ConfigError(f"key {key!r}: expected {kind.__name__}, got {type(value).__name__}")


def parse_config(text: str | bytes | None, command: str | None = None, **overrides) -> RunConfig:
    """Validated RunConfig from a JSON document; unknown keys are rejected."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text) if text and text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    cmd = raw.pop("command", None)
    if command is not None and cmd is not None and cmd != command:
        raise ConfigError(f"config command {cmd!r} does not match requested {command!r}")
    cmd = command or cmd
    if cmd not in COMMANDS:
        raise ConfigError(f"key 'command': {cmd!r} not in {COMMANDS}")
    allowed_opts = _OPTIONS[cmd]
    unknown = sorted(set(raw) - set(_COMMON) - set(allowed_opts))
    if unknown:
        raise ConfigError(f"unknown config keys for {cmd!r}: {', '.join(unknown)}")
    merged = dict(_COMMAND_DEFAULTS[cmd])
    for k, v in raw.items():
        merged[k] = _coerce(k, v, _COMMON.get(k) or allowed_opts[k])
    opts = {k: merged.pop(k) for k in list(merged) if k in allowed_opts}
    if "lambda" in merged:
        merged["lam"] = merged.pop("lambda")
    cfg = RunConfig(command=cmd, options=opts, **{k: v for k, v in merged.items() if k != "values"})
    cfg.values = tuple(merged.get("values", ()))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if not 0 < cfg.gamma < 1.5:
        raise ConfigError(f"key 'gamma' = {cfg.gamma}: admissible range is (0, 3/2)")
    if not cfg.gamma / 2 <= cfg.sigma <= 1:
        raise ConfigError(f"key 'sigma' = {cfg.sigma}: admissible range is [gamma/2, 1] "
                          f"= [{cfg.gamma / 2:g}, 1]")
    if cfg.mu not in (-1, 1):
        raise ConfigError(f"key 'mu' = {cfg.mu}: must be -1 or +1")
    if not cfg.lam > 0:
        raise ConfigError(f"key 'lambda' = {cfg.lam}: must be > 0")
    if cfg.alpha < 0:
        raise ConfigError(f"key 'alpha' = {cfg.alpha}: must be >= 0")
    if not (cfg.dt > 0 and math.isfinite(cfg.dt)):
        raise ConfigError(f"key 'dt' = {cfg.dt}: must be positive")
    if cfg.horizon < 0:
        raise ConfigError(f"key 'horizon' = {cfg.horizon}: must be >= 0")
    if cfg.threads < 1:
        raise ConfigError("key 'threads' must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("key 'seed' must be an unsigned 64-bit integer")
    if cfg.command == "meanfield" and cfg.alpha <= 0:
        raise ConfigError("key 'alpha': many-body runs need alpha > 0")
    if cfg.command == "dichotomy" and abs(cfg.sigma - cfg.gamma / 2) > 1e-12:
        raise ConfigError("key 'sigma': dichotomy needs sigma = gamma/2")
    try:
        cfg.grid()
        cfg.params()
    except ConfigError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


# --- checkpoints --------------------------------------------------------------------

MAGIC = b"FHRT"
VERSION = 1
_HEAD = struct.Struct("<4sHBB")


@dataclass
class Checkpoint:
    data: np.ndarray
    dim: int
    half_width: float
    time: float
    meta: dict

    @property
    def rank(self) -> int:
        return self.data.ndim // self.dim

    def grid(self) -> Grid:
        return Grid(self.dim, self.data.shape[0], self.half_width)

    def to_field(self) -> Field:
        if self.rank != 1:
            raise CheckpointError(f"checkpoint holds a rank-{self.rank} tensor, not a field")
        return Field(self.grid(), self.data)


def _checksum(b: bytes) -> bytes:
    return hashlib.blake2b(b, digest_size=8).digest()


def write_checkpoint(obj, path, time: float = 0.0, meta: dict | None = None,
                     overwrite: bool = False) -> Path:
    """Field, ManyBodyState or Checkpoint to the FHRT binary format."""
    if isinstance(obj, Field):
        data, grid = obj.values, obj.grid
    elif isinstance(obj, Checkpoint):
        data, grid, time, meta = obj.data, obj.grid(), obj.time, obj.meta
    elif hasattr(obj, "amplitudes"):
        data, grid = obj.amplitudes, obj.grid
        meta = {"N": obj.N, **(meta or {})}
    else:
        raise TypeError(f"cannot checkpoint {type(obj).__name__}")
    data = np.ascontiguousarray(data, dtype="<c16")
    rank = data.ndim // grid.dim
    mb = json.dumps(meta or {}, sort_keys=True).encode()
    body = bytearray(_HEAD.pack(MAGIC, VERSION, rank, grid.dim))
    body += struct.pack(f"<{data.ndim}I", *data.shape)
    body += struct.pack("<ddI", grid.half_width, time, len(mb))
    body += mb
    body += data.tobytes(order="C")
    body += _checksum(bytes(body))
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; outputs are write-once")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, path)
    return path


def read_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(buf):
            raise CheckpointError(f"{path}: truncated while reading {what}", offset=off)
        chunk = buf[off:off + n]
        off += n
        return chunk

    magic, version, rank, dim = _HEAD.unpack(take(_HEAD.size, "header"))
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}", offset=4)
    if dim not in (1, 2, 3) or rank < 1:
        raise CheckpointError(f"{path}: bad rank/dim {rank}/{dim}", offset=6)
    nd = rank * dim
    shape = struct.unpack(f"<{nd}I", take(4 * nd, "dims"))
    L, t, nmeta = struct.unpack("<ddI", take(20, "grid metadata"))
    meta_off = off
    try:
        meta = json.loads(take(nmeta, "metadata").decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt metadata", offset=meta_off) from exc
    count = int(np.prod(shape))
    raw = take(16 * count, "amplitudes")
    stored = take(8, "checksum")
    if off != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - off} trailing bytes", offset=off)
    if _checksum(buf[:off - 8]) != stored:
        raise CheckpointError(f"{path}: checksum mismatch", offset=off - 8)
    data = np.frombuffer(raw, dtype="<c16").reshape(shape).astype(complex)
    return Checkpoint(data, dim, L, t, meta)


# --- tables ------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path: Path, columns, rows):
    if path.exists():
        raise FileExistsError(f"{path} exists; outputs are write-once")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c, "")) for c in columns])
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    return repr(o)


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    if path.exists():
        raise FileExistsError(f"{path} exists; outputs are write-once")
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def emit_tables(result, directory, name: str | None = None, extra: dict | None = None) -> list:
    """CSV (one row per record) plus a JSON summary; returns the written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    if isinstance(result, Trajectory):
        name = name or "trajectory"
        cols = list(result.diagnostics)
        n = len(result.diagnostics[cols[0]]) if cols else 0
        rows = [{c: result.diagnostics[c][i] for c in cols} for i in range(n)]
        summary = {"params": asdict(result.params), "blowup": result.blowup,
                   "blowup_time": result.blowup_time}
    elif isinstance(result, dict) and "columns" in result:
        name = name or "table"
        cols, rows, summary = list(result["columns"]), result["rows"], result.get("summary", {})
    else:
        name = name or result.spec.kind
        cols, rows = result.columns(), result.records
        summary = result.summary()
        summary["status"] = {k: "PASS" if v else "FAIL" for k, v in result.passed.items()}
        if result.samples:
            scols = list(result.samples[0])
            paths.append(_write_csv(d / f"{name}_samples.csv", scols, result.samples))
    if extra:
        summary = {**summary, **extra}
    paths.append(_write_csv(d / f"{name}.csv", cols, rows))
    paths.append(write_json(d / f"{name}.json", summary))
    return paths
