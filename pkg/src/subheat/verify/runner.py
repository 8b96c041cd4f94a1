"""Suite registry and the cross-resolution runner."""

from __future__ import annotations

import dataclasses
import logging
import math

from ..calculus import heat_kernel
from ..errors import DomainError
from ..geometry import ModelSpec
from .core import BoundReport, SuiteContext, build_context, stable_within
from .kernel_suites import (
    check_heat_decomposition,
    check_kernel_factorization,
    check_nis_kernel_properties,
    check_off_diagonal,
    check_on_diagonal,
    check_scaled_estimate,
    merge_reports,
    nis_operators,
    random_hermitian_kernel,
)
from .multiplier_suites import (
    check_elementary_summation,
    check_maximal_domination,
    check_multiplier_kernel_bound,
    check_multiplier_lp,
    check_square_function_equivalence,
    check_wave_energy,
)

log = logging.getLogger(__name__)

STABILITY_TOL = 0.5


def _factorization(ctx: SuiteContext) -> BoundReport:
    """Heat half-time factorization over the t grid plus one random self-adjoint pair."""
    reports = []
    for t in ctx.cfg.t_grid:
        half = heat_kernel(ctx.spec, t / 2, reduced=True)
        reports.append(check_kernel_factorization(half, half))
    rng = ctx.rng("kernel_factorization")
    cplx = ctx.spec.kind == "boxb"
    reports.append(check_kernel_factorization(random_hermitian_kernel(ctx.geom, rng, cplx),
                                              random_hermitian_kernel(ctx.geom, rng, cplx)))
    out = merge_reports("kernel_factorization", reports)
    out.threshold_doc = reports[0].threshold_doc
    return out


def _nis(ctx: SuiteContext) -> BoundReport:
    reports = [check_nis_kernel_properties(ctx, T, r, label) for label, T, r in nis_operators(ctx)]
    return merge_reports("nis_kernel_properties", reports)


SUITES = {
    "kernel_factorization": _factorization,
    "on_diagonal": check_on_diagonal,
    "off_diagonal": check_off_diagonal,
    "heat_decomposition": check_heat_decomposition,
    "scaled_estimate": check_scaled_estimate,
    "nis_kernel_properties": _nis,
    "multiplier_kernel_bound": check_multiplier_kernel_bound,
    "elementary_summation": check_elementary_summation,
    "maximal_domination": check_maximal_domination,
    "square_function_equivalence": check_square_function_equivalence,
    "multiplier_lp": check_multiplier_lp,
    "wave_energy": check_wave_energy,
}

# suites whose pass rule includes stability of their constants across resolutions
CROSS_RESOLUTION = frozenset(
    {"off_diagonal", "scaled_estimate", "nis_kernel_properties", "square_function_equivalence", "multiplier_lp"}
)


def parse_suites(text: str | list[str]) -> list[str]:
    """Comma-separated suite ids, or ``all``."""
    names = [s.strip() for s in text.split(",")] if isinstance(text, str) else list(text)
    names = [s for s in names if s]
    if names == ["all"]:
        return list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown or not names:
        raise DomainError(f"unknown suite(s) {unknown or names}; choose from {', '.join(SUITES)} or 'all'")
    return names


def companion_model(ms: ModelSpec) -> ModelSpec:
    """Resolution compared against: n - 2 when that is at least 4, else n + 2."""
    return ModelSpec(ms.kind, ms.n - 2 if ms.n - 2 >= 4 else ms.n + 2)


def run_suite(name: str, ctx: SuiteContext) -> BoundReport:
    return SUITES[name](ctx)


def compare_resolutions(reports: list[BoundReport], tol: float = STABILITY_TOL) -> dict:
    """Check each named constant stays within +-tol of the coarsest model's value."""
    keys = sorted(set().union(*(r.constants for r in reports)))
    per_key = {}
    for k in keys:
        vals = [r.constants.get(k, math.nan) for r in reports]
        per_key[k] = {"values": vals, "stable": stable_within(vals, tol)}
    return {"tol": tol, "constants": per_key, "stable": all(v["stable"] for v in per_key.values())}


def with_config(ctx: SuiteContext, cfg) -> SuiteContext:
    return dataclasses.replace(ctx, cfg=cfg, _volumes=ctx._volumes, _propagation=ctx._propagation)


def run_suites(
    model: str | ModelSpec,
    kind: str = "sublaplacian",
    suites="all",
    seed: int = 0,
    spectral_loader=None,
    t_grid=None,
) -> list[BoundReport]:
    """Run suites on ``model``; stability suites also run on the companion resolution.

    Both resolutions of a stability suite share the coarser model's t grid, so
    the compared constants are sups over the same times.
    ``spectral_loader(model_spec, kind)`` may supply cached spectral data;
    ``t_grid`` replaces the dyadic default on every model.
    """
    ms = ModelSpec.parse(model) if isinstance(model, str) else model
    names = parse_suites(suites)

    def context(spec_model):
        spec = spectral_loader(spec_model, kind) if spectral_loader else None
        return build_context(spec_model, kind, seed, spec=spec, t_grid=t_grid)

    ctx = context(ms)
    other = None
    reports = []
    for name in names:
        log.info("running suite %s on %s", name, ms)
        if name not in CROSS_RESOLUTION:
            reports.append(run_suite(name, ctx))
            continue
        if other is None:
            other = context(companion_model(ms))
        coarse, fine = sorted([ctx, other], key=lambda c: c.geom.spec.n)
        cfg = coarse.cfg
        pair = {id(c): run_suite(name, with_config(c, cfg)) for c in (coarse, fine)}
        main = pair[id(ctx)]
        stab = compare_resolutions([pair[id(coarse)], pair[id(fine)]])
        stab["models"] = [str(coarse.geom.spec), str(fine.geom.spec)]
        main.stability = stab
        main.passed = bool(main.passed and stab["stable"])
        reports.append(main)
    return reports
