"""Run configuration, report and table emission, and the binary spectral cache."""

from __future__ import annotations

import csv
import json
import math
import os
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastcrc import crc64

from .errors import ConfigError, CorruptCacheError, DomainError, InvalidModelError, StaleCacheError, SubheatError
from .geometry import DiscreteGeometry, DistanceField, ModelSpec
from .operators import OPERATOR_KINDS, KernelMatrix, SpectralData

REPORT_HEADER = ("suite", "param_json", "lhs", "rhs", "ratio", "pass")
CACHE_MAGIC = b"SUBHEAT1"
CACHE_VERSION = 1
_HEAD = struct.Struct("<8sIQ")
_CRC = struct.Struct("<Q")


def fmt(x) -> str:
    """Round-trip decimal text for a real number (17 significant digits)."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------- config

CONFIG_KEYS = ("model", "operator", "suites", "t_grid", "output_dir", "seed", "cache", "format", "t", "m")


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings; unset keys take the documented defaults."""

    model: str
    operator: str = "sublaplacian"
    suites: tuple[str, ...] = ("all",)
    t_grid: tuple[float, ...] | None = None
    output_dir: str = "."
    seed: int = 0
    cache: bool = True
    format: str = "csv"
    t: float | None = None
    m: str | None = None


def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _parse_float_list(v: str) -> tuple[float, ...]:
    if v.strip().lower() == "dyadic":
        return ()
    vals = tuple(float(x) for x in v.split(",") if x.strip())
    if not vals or any(not (math.isfinite(x) and x > 0) for x in vals):
        raise ValueError("expected 'dyadic' or a comma-separated list of positive times")
    return vals


def _parse_seed(v: str) -> int:
    s = int(v)
    if not 0 <= s < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return s


def _parse_model(v: str) -> str:
    return str(ModelSpec.parse(v))


def _parse_operator(v: str) -> str:
    if v not in OPERATOR_KINDS:
        raise ValueError(f"operator must be one of {OPERATOR_KINDS}")
    return v


def _parse_suites(v: str) -> tuple[str, ...]:
    from .verify import parse_suites

    names = tuple(parse_suites(v))
    return ("all",) if v.strip() == "all" else names


def _parse_format(v: str) -> str:
    if v not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    return v


_PARSERS = {
    "model": _parse_model,
    "operator": _parse_operator,
    "suites": _parse_suites,
    "t_grid": _parse_float_list,
    "output_dir": str,
    "seed": _parse_seed,
    "cache": _parse_bool,
    "format": _parse_format,
    "t": float,
    "m": str,
}


def validate_value(key: str, value: str, line: int | None = None):
    """Parse one config value, raising ConfigError tagged with ``line``."""
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}; allowed keys: {', '.join(CONFIG_KEYS)}", line)
    try:
        out = _PARSERS[key](value)
    except (ValueError, InvalidModelError, DomainError) as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", line) from exc
    return out


def parse_config_values(text: str) -> dict:
    """Parsed ``key = value`` pairs of a config text, without defaults."""
    values = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)", line)
        if m is None:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, value = m.group(1), m.group(2).strip()
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", no)
        values[key] = validate_value(key, value, no)
    return values


def build_config(values: dict) -> RunConfig:
    if "model" not in values:
        raise ConfigError("missing required key 'model'")
    values = dict(values)
    if values.get("t_grid") == ():
        values["t_grid"] = None
    return RunConfig(**values)


def parse_config(text: str) -> RunConfig:
    """Parse a line-oriented ``key = value`` config (``#`` starts a comment).

    Defaults: operator = sublaplacian, suites = all, t_grid = dyadic,
    output_dir = ., seed = 0, cache = true, format = csv.
    """
    return build_config(parse_config_values(text))


# ---------------------------------------------------------------- reports


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _jsonable(obj):
    """Coerce dict keys to strings and numpy scalars to Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _param_json(params: dict) -> str:
    return json.dumps(_jsonable(params), sort_keys=True, separators=(",", ":"))


def report_summary(report) -> dict:
    w = report.witness
    out = {
        "suite": report.suite,
        "C_fit": report.C_fit,
        "witness": None if w is None else {"params": w.params, "lhs": w.lhs, "rhs": w.rhs, "ratio": w.ratio},
        "pass": bool(report.passed),
        "inequality": report.inequality,
        "threshold": report.threshold_doc,
        "constants": report.constants,
    }
    if report.stability is not None:
        out["stability"] = report.stability
    return _jsonable(out)


def _dump_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")


def write_report(report, directory) -> Path:
    """Write ``<suite>.csv`` (one row per sample) and ``<suite>.json``; return the CSV path."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{report.suite}.csv"
        flag = "true" if report.passed else "false"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for s in report.samples:
                w.writerow([report.suite, _param_json(s.params), fmt(s.lhs), fmt(s.rhs), fmt(s.ratio), flag])
        _dump_json(report_summary(report), d / f"{report.suite}.json")
    except OSError as exc:
        raise SubheatError(f"cannot write report to {directory}: {exc}") from exc
    return path


def write_summary(reports, directory) -> Path:
    """``summary.json``: one {suite, C_fit, witness, pass} object per suite."""
    d = Path(directory)
    path = d / "summary.json"
    try:
        d.mkdir(parents=True, exist_ok=True)
        _dump_json([report_summary(r) for r in reports], path)
    except OSError as exc:
        raise SubheatError(f"cannot write summary to {path}: {exc}") from exc
    return path


@dataclass
class ParsedReport:
    suite: str
    rows: list[dict] = field(default_factory=list)
    passed: bool = False

    @property
    def C_fit(self) -> float:
        return max((r["ratio"] for r in self.rows), default=0.0)


def read_report(path) -> ParsedReport:
    """Parse a report CSV written by :func:`write_report`; ``passed`` comes from the sibling JSON."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != REPORT_HEADER:
            raise SubheatError(f"{path}: unexpected header {header}")
        rows = [
            {"suite": r[0], "params": json.loads(r[1]), "lhs": float(r[2]), "rhs": float(r[3]),
             "ratio": float(r[4]), "pass": r[5] == "true"}
            for r in reader
        ]
    summary = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return ParsedReport(summary["suite"], rows, bool(summary["pass"]))


# ---------------------------------------------------------------- tables


def write_distance_csv(dist: DistanceField, path) -> Path:
    """``x_index,y_index,rho``, row-major over all pairs."""
    path = Path(path)
    n = dist.hops.shape[0]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x_index", "y_index", "rho"))
        rho = dist.rho
        for x in range(n):
            for y in range(n):
                w.writerow((x, y, fmt(rho[x, y])))
    return path


def kernel_rows(K: KernelMatrix, dist: DistanceField):
    """(x, y, rho, re, im) tuples of a kernel table, row-major."""
    n = K.K.shape[0]
    rho = dist.rho
    for x in range(n):
        for y in range(n):
            v = complex(K.K[x, y])
            yield x, y, float(rho[x, y]), v.real, v.imag


def write_kernel(K: KernelMatrix, dist: DistanceField, stream, format: str = "csv") -> None:
    """Kernel table as CSV ``x_index,y_index,rho,value_re,value_im`` or as JSON records."""
    if format == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("x_index", "y_index", "rho", "value_re", "value_im"))
        for x, y, r, re_, im_ in kernel_rows(K, dist):
            w.writerow((x, y, fmt(r), fmt(re_), fmt(im_)))
    elif format == "json":
        recs = [{"x_index": x, "y_index": y, "rho": r, "value_re": a, "value_im": b} for x, y, r, a, b in kernel_rows(K, dist)]
        stream.write(json.dumps(recs) + "\n")
    else:
        raise DomainError(f"unknown format {format!r}")


def write_frame_csv(frame, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("j", "lambda_lo", "lambda_hi", "active"))
    for j, lo, hi, active in frame.rows():
        w.writerow((j, fmt(lo), fmt(hi), "true" if active else "false"))


def write_field_csv(values: np.ndarray, stream) -> None:
    """``x_index,value`` for a real node field such as a square function."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("x_index", "value"))
    for x, v in enumerate(np.asarray(values, dtype=float)):
        w.writerow((x, fmt(v)))


# ---------------------------------------------------------------- spectral cache


def cache_dir() -> Path:
    """$SUBHEAT_CACHE_DIR, else ~/.cache/subheat."""
    env = os.environ.get("SUBHEAT_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "subheat"


def cache_path(model: ModelSpec | str, kind: str, eps_ker: float | None, directory=None) -> Path:
    """File for the cache key (model string, operator kind, eps_ker)."""
    eps = "default" if eps_ker is None else fmt(eps_ker)
    name = f"{model}-{kind}-{eps}".replace(":", "_").replace("=", "")
    return Path(directory or cache_dir()) / f"{name}.bin"


def encode_spectral(spec: SpectralData) -> bytes:
    n = spec.values.size
    vecs = np.asarray(spec.vectors, dtype="<c16")
    body = (
        _HEAD.pack(CACHE_MAGIC, CACHE_VERSION, n)
        + np.asarray(spec.values, dtype="<f8").tobytes()
        + vecs.tobytes(order="F")
    )
    return body + _CRC.pack(crc64.xz(body))


def decode_spectral(data: bytes, geom: DiscreteGeometry, kind: str, eps_ker: float | None = None) -> SpectralData:
    if len(data) < _HEAD.size:
        raise CorruptCacheError(f"cache file truncated: {len(data)} bytes")
    magic, version, n = _HEAD.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise StaleCacheError(f"bad magic bytes {magic!r}")
    if version != CACHE_VERSION:
        raise StaleCacheError(f"cache version {version}, expected {CACHE_VERSION}")
    expected = _HEAD.size + 8 * n + 16 * n * n + _CRC.size
    if len(data) != expected:
        raise CorruptCacheError(f"cache file has {len(data)} bytes, expected {expected}")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if crc64.xz(body) != crc:
        raise CorruptCacheError("cache checksum mismatch")
    if n != geom.size:
        raise StaleCacheError(f"cache holds {n} eigenpairs, geometry has {geom.size} nodes")
    off = _HEAD.size
    values = np.frombuffer(body, dtype="<f8", count=n, offset=off).astype(float)
    vecs = np.frombuffer(body, dtype="<c16", count=n * n, offset=off + 8 * n).reshape((n, n), order="F").copy()
    if not np.any(vecs.imag):
        vecs = np.ascontiguousarray(vecs.real)
    if eps_ker is None:
        eps_ker = 1e-10 * float(values[-1])
    return SpectralData(values, vecs, float(eps_ker), geom, kind)


def save_spectral(spec: SpectralData, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(encode_spectral(spec))
    tmp.replace(path)
    return path


def load_spectral(path, geom: DiscreteGeometry, kind: str, eps_ker: float | None = None) -> SpectralData:
    return decode_spectral(Path(path).read_bytes(), geom, kind, eps_ker)


def cache_roundtrip(spec: SpectralData, directory) -> SpectralData:
    """Write ``spec`` to the cache in ``directory`` and read it back."""
    path = cache_path(spec.geom.spec, spec.kind, spec.eps_ker, directory)
    save_spectral(spec, path)
    return load_spectral(path, spec.geom, spec.kind, spec.eps_ker)


def cached_spectral(geom: DiscreteGeometry, kind: str, eps_ker: float | None = None, directory=None,
                    use_cache: bool = True) -> SpectralData:
    """Spectral data from the cache, recomputing (and rewriting) on a miss or a bad file."""
    import logging

    from .operators import assemble_operator, spectral_decompose

    path = cache_path(geom.spec, kind, eps_ker, directory)
    if use_cache and path.exists():
        try:
            return load_spectral(path, geom, kind, eps_ker)
        except (CorruptCacheError, StaleCacheError) as exc:
            logging.getLogger(__name__).warning("discarding cache %s: %s", path, exc)
    spec = spectral_decompose(assemble_operator(geom, kind), eps_ker)
    if use_cache:
        try:
            save_spectral(spec, path)
        except OSError as exc:
            logging.getLogger(__name__).warning("cannot write cache %s: %s", path, exc)
    return spec
