"""Command-line driver: ``subheat {model,heat,wave,multiplier,verify,report}``.

Exit codes: 0 success, 1 a suite failed, 2 usage or domain error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import io
from .calculus import heat_multiplier, multiplier_operator, parse_multiplier, wave_kernel
from .errors import (
    ConfigError,
    DomainError,
    InsufficientScalesError,
    InvalidModelError,
    InvalidMultiIndexError,
    MultiplierDomainError,
    PreconditionError,
    SubheatError,
)
from .geometry import ModelSpec, build_model, cc_distance_matrix, fit_doubling_exponents

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
_USAGE_ERRORS = (ConfigError, DomainError, InvalidModelError, InvalidMultiIndexError, MultiplierDomainError,
                 PreconditionError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


class _Usage(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--model", help="e.g. heisenberg:n=6 or flat_torus:n=16")
    p.add_argument("--operator", help="sublaplacian (default) or boxb")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="unsigned 64-bit seed (default 0)")
    p.add_argument("--no-cache", dest="no_cache", action="store_true", help="do not read or write the spectral cache")
    p.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subheat", description="Heat kernels and spectral multipliers on discrete sub-Riemannian models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("model", help="print the geometry summary")
    _common(p)
    for name, flag, help_ in (("heat", "--t", "kernel of exp(-tL)"), ("wave", "--t", "kernel of cos(t sqrt L)")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument(flag, dest="t", type=float, help="time")
    p = sub.add_parser("multiplier", help="kernel of m(L)")
    _common(p)
    p.add_argument("--m", help="heat:t=.., wave:t=.., bump:[lo,hi], riesz_like:a=.., log_oscillation:tau=..")
    p = sub.add_parser("verify", help="run verification suites and write reports")
    _common(p)
    p.add_argument("--suites", help="comma-separated suite ids or 'all'")
    p.add_argument("--t-grid", dest="t_grid", help="comma-separated times or 'dyadic'")
    p = sub.add_parser("report", help="summarize reports in a directory")
    p.add_argument("--out", required=True, help="directory holding <suite>.csv files")
    return parser


def _settings(args) -> dict:
    """Config-file values overridden by explicit flags, then validated."""
    values = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        values = io.parse_config_values(text)
    flags = {
        "model": args.model,
        "operator": args.operator,
        "output_dir": args.out,
        "seed": args.seed,
        "format": args.format,
        "suites": getattr(args, "suites", None),
        "t_grid": getattr(args, "t_grid", None),
        "m": getattr(args, "m", None),
    }
    for key, raw in flags.items():
        if raw is not None:
            values[key] = io.validate_value(key, raw)
    t = getattr(args, "t", None)
    if t is not None:
        values["t"] = t
    if args.no_cache:
        values["cache"] = False
    return values


def _spectral(cfg: io.RunConfig, ms: ModelSpec | None = None):
    geom = build_model(ms or ModelSpec.parse(cfg.model))
    return io.cached_spectral(geom, cfg.operator, use_cache=cfg.cache)


def _emit(cfg: io.RunConfig, name: str, write) -> None:
    """Send a table to ``<out>/<name>.<fmt>`` when --out is given, else stdout."""
    if cfg.output_dir == ".":
        write(sys.stdout)
        return
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{name}.{cfg.format}"
    with path.open("w", newline="", encoding="utf-8") as fh:
        write(fh)
    print(path)


def cmd_model(cfg: io.RunConfig) -> int:
    geom = build_model(ModelSpec.parse(cfg.model))
    dist = cc_distance_matrix(geom)
    try:
        dbl = fit_doubling_exponents(geom, dist)
        Q, q = dbl.Q_fit, dbl.q_fit
    except InsufficientScalesError as exc:
        # too few radii on tiny models; the rest of the summary is still meaningful
        logging.getLogger(__name__).warning("%s", exc)
        Q = q = None
    summary = {
        "model": str(geom.spec),
        "nodes": geom.size,
        "edges": len(geom.edges),
        "diameter": dist.diameter,
        "Q_fit": Q,
        "q_fit": q,
    }
    if cfg.format == "json":
        print(json.dumps(summary, sort_keys=True))
    else:
        for k, v in summary.items():
            print(f"{k}: {io.fmt(v) if isinstance(v, float) else 'unavailable' if v is None else v}")
    if cfg.output_dir != ".":
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        io.write_distance_csv(dist, Path(cfg.output_dir) / "distance.csv")
    return EXIT_OK


def _kernel_command(cfg: io.RunConfig, label: str, make) -> int:
    spec = _spectral(cfg)
    dist = cc_distance_matrix(spec.geom)
    K = make(spec)
    _emit(cfg, label, lambda fh: io.write_kernel(K, dist, fh, cfg.format))
    return EXIT_OK


def _require_t(cfg: io.RunConfig, command: str) -> float:
    if cfg.t is None:
        raise DomainError(f"{command} requires --t")
    if not math.isfinite(cfg.t):
        raise DomainError(f"time must be finite, got {cfg.t}")
    if command == "heat" and cfg.t < 0:
        raise DomainError(f"heat time must be >= 0, got {cfg.t}")
    return cfg.t


def cmd_verify(cfg: io.RunConfig) -> int:
    from .verify import run_suites

    def loader(ms, kind):
        return io.cached_spectral(build_model(ms), kind, use_cache=cfg.cache)

    reports = run_suites(cfg.model, cfg.operator, ",".join(cfg.suites), cfg.seed, spectral_loader=loader,
                         t_grid=cfg.t_grid)
    out = Path(cfg.output_dir)
    for r in reports:
        io.write_report(r, out)
        print(f"{r.suite}: {'PASS' if r.passed else 'FAIL'} C_fit={io.fmt(r.C_fit)}")
    io.write_summary(reports, out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_report(directory: str) -> int:
    d = Path(directory)
    paths = sorted(p for p in d.glob("*.csv") if p.with_suffix(".json").exists())
    if not paths:
        raise DomainError(f"no reports found in {d}")
    ok = True
    for p in paths:
        r = io.read_report(p)
        ok &= r.passed
        print(f"{r.suite}: {'PASS' if r.passed else 'FAIL'} C_fit={io.fmt(r.C_fit)} samples={len(r.rows)}")
    return EXIT_OK if ok else EXIT_FAIL


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _Usage as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.out)
        values = _settings(args)
        if args.command in ("heat", "wave"):
            t = _require_t(io.RunConfig(model="", t=values.get("t")), args.command)
        cfg = io.build_config(values)
        if args.command == "model":
            return cmd_model(cfg)
        if args.command == "heat":
            return _kernel_command(cfg, f"heat_t={t!r}", lambda s: multiplier_operator(s, heat_multiplier(t)))
        if args.command == "wave":
            return _kernel_command(cfg, f"wave_t={t!r}", lambda s: wave_kernel(s, t))
        if args.command == "multiplier":
            if cfg.m is None:
                raise DomainError("multiplier requires --m")
            m = parse_multiplier(cfg.m)
            return _kernel_command(cfg, "multiplier", lambda s: multiplier_operator(s, m))
        return cmd_verify(cfg)
    except _USAGE_ERRORS as exc:
        print(f"subheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SubheatError as exc:
        print(f"subheat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader closed stdout early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        print(f"subheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
