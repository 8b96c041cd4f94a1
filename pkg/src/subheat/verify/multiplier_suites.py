"""Suites for spectral multipliers, Littlewood-Paley pieces and wave energy."""

from __future__ import annotations

import math

import numpy as np

from ..calculus import bump_multiplier, multiplier_operator, multiplier_weights
from ..errors import DomainError, PreconditionError
from ..geometry import fit_doubling_exponents
from ..lpanalysis import (
    DyadicFrame,
    dyadic_frame,
    frame_weights,
    lp_norm,
    maximal_function,
    sloc_sobolev_norm,
    square_function,
)
from ..operators import KernelMatrix, apply_derivative, horizontal_derivative
from ..smooth import transition
from .core import BoundReport, Sample, SuiteContext, uniform_within
from .kernel_suites import FIRST_ORDER, _nis_property2, _worst

P_LIST = (1.5, 2.0, 3.0, 4.0)
SLOC_T_GRID = tuple(2.0 ** (k / 4) for k in range(-16, 17))


def doubling_Q(ctx: SuiteContext) -> float:
    return fit_doubling_exponents(ctx.geom, ctx.dist).Q_fit


def dyadic_r_grid(ctx: SuiteContext, points: int = 8) -> list[float]:
    """r with r^2 = 2^k, the largest ``points`` values where m(r^2 L) can be nonzero for supp m in [1/4, 4]."""
    k_hi = math.floor(math.log2(4.0 / ctx.spec.lambda_min_nonzero) - 1e-12)
    return [math.sqrt(2.0**k) for k in range(k_hi - points + 1, k_hi + 1)]


def _orders_upto(d: int):
    return FIRST_ORDER[: 1 + 2 * d] if d <= 1 else FIRST_ORDER


def check_multiplier_kernel_bound(ctx: SuiteContext, m=None, a: float = 4.0, b: float = 2.6, r_grid=None,
                                  Q: float | None = None, max_order: int = 0, factor: float = 3.0) -> BoundReport:
    """|D^a D^b K_{m(r^2 L)}(x,y)| <= C (1 + rho/r)^{-a+1/2+b} (r v rho)^{-|a|-|b|} / V(x, rho + r)."""
    if Q is None:
        Q = doubling_Q(ctx)
    d = max_order
    if not a > (Q + 1) / 2 + d:
        raise PreconditionError(f"need a > (Q+1)/2 + {d} with Q = {Q:g}; got a = {a:g}")
    if not Q / 2 + d < b <= a - 0.5:
        raise PreconditionError(f"need Q/2 + {d} < b <= a - 1/2 with Q = {Q:g}, a = {a:g}; got b = {b:g}")
    m = bump_multiplier() if m is None else m
    r_grid = dyadic_r_grid(ctx) if r_grid is None else list(r_grid)
    rho = ctx.dist.rho
    pairs = ctx.pair_mask()
    orders = _orders_upto(d)
    samples, per_r = [], {}
    for r in r_grid:
        K = multiplier_operator(ctx.spec, lambda lam: m(r * r * lam))
        Vr = ctx.volume_matrix(rho + r)
        best = 0.0
        for al in orders:
            Da = horizontal_derivative(K, al, "x")
            for be in orders:
                lhs = np.abs(horizontal_derivative(Da, be, "y").K)
                rhs = (1 + rho / r) ** (-a + 0.5 + b) * np.maximum(r, rho) ** (-(len(al) + len(be))) / Vr
                i, q = _worst(lhs, rhs, pairs)
                x, y = divmod(i, ctx.geom.size)
                samples.append(Sample({"r": r, "alpha": list(al), "beta": list(be), "x": x, "y": y},
                                      float(lhs.flat[i]), float(rhs.flat[i])))
                best = max(best, q)
        per_r[r] = best
    vals = list(per_r.values())
    return BoundReport(
        "multiplier_kernel_bound",
        "|D_x^a D_y^b K_{m(r^2 L)}(x,y)| <= C (1+rho/r)^(-a+1/2+b) (r v rho)^(-|a|-|b|) / V(x, rho+r), supp m in [1/4,4]",
        samples,
        uniform_within(vals, factor),
        f"max over r of per-r constants <= {factor:g} x median over r",
        constants={"C_fit": max(vals)},
        notes={"per_r": per_r, "Q": Q, "a": a, "b": b},
    )


def check_elementary_summation(ctx: SuiteContext, m=None, decay: float = 3.0, factor: float = 3.0,
                               orders=FIRST_ORDER) -> BoundReport:
    """Dyadic pieces m_j = psi_j m obey a j-uniform pre-elementary envelope and sum to an NIS kernel.

    Piece j lives at scale r_j = 2^{j/2}; the envelope is
    (1 + rho/r_j)^{-decay} r_j^{-|a|-|b|} / V(x, rho + r_j).
    """
    from ..calculus import riesz_like_multiplier

    m = riesz_like_multiplier(1.0) if m is None else m
    spec = ctx.spec
    frame = dyadic_frame(spec)
    W = frame_weights(frame, spec)
    mvals = multiplier_weights(spec, m, reduced=True)
    rho = ctx.dist.rho
    pairs = ctx.pair_mask()
    samples, per_j = [], {}
    active = []
    total = np.zeros((ctx.geom.size,) * 2, dtype=complex if np.iscomplexobj(mvals) or np.iscomplexobj(spec.vectors) else float)
    for j, w in zip(frame.j_range, W):
        wj = w * mvals
        if not np.any(wj):
            continue
        active.append(j)
        K = spec.kernel_of(wj)
        total = total + K.K
        rj = 2.0 ** (j / 2)
        Vr = ctx.volume_matrix(rho + rj)
        env = (1 + rho / rj) ** (-decay) / Vr
        best = 0.0
        for al in orders:
            Da = horizontal_derivative(K, al, "x")
            for be in orders:
                lhs = np.abs(horizontal_derivative(Da, be, "y").K)
                rhs = env * rj ** (-(len(al) + len(be)))
                i, q = _worst(lhs, rhs, pairs)
                x, y = divmod(i, ctx.geom.size)
                samples.append(Sample({"piece": j, "alpha": list(al), "beta": list(be), "x": x, "y": y},
                                      float(lhs.flat[i]), float(rhs.flat[i])))
                best = max(best, q)
        per_j[j] = best
    summed = KernelMatrix(total, ctx.geom)
    whole = multiplier_operator(spec, m, reduced=True)
    sum_residual = float(np.abs(summed.K - whole.K).max())
    nis = _nis_property2(ctx, summed, 0.0, orders, "summed")
    nis_C = max(s.ratio for s in nis)
    shells = [j for j in frame.j_range if frame.is_active(j)]
    cj = np.array(list(per_j.values()))
    uniform = bool(cj.size and cj.min() > 0 and cj.max() <= factor * cj.min())
    passed = bool(uniform and math.isfinite(nis_C) and sum_residual <= 1e-10 * max(1.0, np.abs(whole.K).max()))
    return BoundReport(
        "elementary_summation",
        "K_{psi_j m(L)} <= C (1+rho/r_j)^(-N) r_j^(-|a|-|b|) / V(x, rho+r_j), r_j^2 = 2^j; sum_j is NIS of order 0",
        samples + nis,
        passed,
        f"per-piece constants within a factor {factor:g} (max/min); summed kernel matches m(L~); summed NIS constant finite",
        constants={"C_fit": max(per_j.values(), default=0.0), "summed/property2": nis_C},
        notes={"per_j": per_j, "active": active, "frame_shells": shells, "sum_residual": sum_residual, "decay": decay},
    )


def maximal_test_functions(ctx: SuiteContext, suite: str) -> list[tuple[str, np.ndarray]]:
    """Constant, random nonnegative and single-node indicator fields."""
    n = ctx.geom.size
    rng = ctx.rng(suite)
    out = [("constant", np.ones(n))]
    out += [(f"nonneg{i}", rng.random(n)) for i in range(ctx.cfg.n_functions)]
    for x in ctx.sample_nodes(suite)[:4]:
        e = np.zeros(n)
        e[x] = 1.0
        out.append((f"node{int(x)}", e))
    return out


def _require_sloc(m, a: float, Q: float) -> float:
    if not a > (Q + 1) / 2:
        raise PreconditionError(f"need a > (Q+1)/2 with Q = {Q:g}; got a = {a:g}")
    norm = sloc_sobolev_norm(m, a, SLOC_T_GRID)
    if not math.isfinite(norm):
        raise PreconditionError(f"multiplier has infinite L^2_{a:g} sloc norm")
    return norm


def check_maximal_domination(ctx: SuiteContext, m=None, a: float = 4.0, r_grid=None, Q: float | None = None,
                             factor: float = 3.0, zero_tol: float = 1e-10) -> BoundReport:
    """|m(r^2 L) f(x)| <= C M(f)(x), uniformly in r, for supp m in [1/4, 4]."""
    if Q is None:
        Q = doubling_Q(ctx)
    m = bump_multiplier() if m is None else m
    norm = _require_sloc(m, a, Q)
    r_grid = dyadic_r_grid(ctx) if r_grid is None else list(r_grid)
    funcs = maximal_test_functions(ctx, "maximal_domination")
    F = np.stack([f for _, f in funcs], axis=1)
    MF = maximal_function(ctx.geom, ctx.dist, F)
    zero = MF == 0
    samples, per_r, zero_violations = [], {}, 0
    for r in r_grid:
        w = multiplier_weights(ctx.spec, lambda lam: m(r * r * lam))
        U = np.abs(ctx.spec.apply(w, F))
        zero_violations += int(np.sum(U[zero] > zero_tol))
        best = 0.0
        for c, (name, _) in enumerate(funcs):
            lhs, rhs = U[:, c], MF[:, c]
            i, q = _worst(lhs, rhs, ~zero[:, c])
            samples.append(Sample({"r": r, "f": name, "x": i}, float(lhs[i]), float(rhs[i])))
            best = max(best, q)
        per_r[r] = best
    vals = list(per_r.values())
    return BoundReport(
        "maximal_domination",
        "|m(r^2 L) f(x)| <= C M(f)(x), supp m in [1/4,4]",
        samples,
        bool(uniform_within(vals, factor) and zero_violations == 0),
        f"max over r of per-r constants <= {factor:g} x median over r; |m(r^2 L) f| <= {zero_tol:g} where Mf = 0",
        constants={"C_fit": max(vals)},
        notes={"per_r": per_r, "sloc_norm": norm, "zero_violations": zero_violations},
    )


def square_test_functions(ctx: SuiteContext, suite: str) -> list[tuple[str, np.ndarray]]:
    """Random signed fields, random nonnegative fields, a kernel vector and node indicators."""
    spec = ctx.spec
    n = ctx.geom.size
    rng = ctx.rng(suite)
    cplx = np.iscomplexobj(spec.vectors)
    out = []
    for i in range(ctx.cfg.n_functions):
        g = rng.standard_normal(n)
        if cplx:
            g = g + 1j * rng.standard_normal(n)
        out.append((f"random{i}", g))
        out.append((f"nonneg{i}", rng.random(n)))
    out.append(("kernel", spec.vectors[:, spec.kernel_indices[0]]))
    for x in ctx.sample_nodes(suite)[:4]:
        e = np.zeros(n)
        e[x] = 1.0
        out.append((f"node{int(x)}", e))
    return out


def frame_envelope(frame: DyadicFrame, spec) -> tuple[float, float]:
    """inf and sup of sum_j psi_j(lambda)^2 over the non-kernel spectrum."""
    E = np.sum(frame_weights(frame, spec) ** 2, axis=0)[spec.nonkernel_mask]
    return float(E.min()), float(E.max())


def check_square_function_equivalence(ctx: SuiteContext, frame: DyadicFrame | None = None, p_list=P_LIST) -> BoundReport:
    """||Lambda f||_p + ||pi f||_p is comparable to ||f||_p."""
    spec, geom = ctx.spec, ctx.geom
    frame = dyadic_frame(spec) if frame is None else frame
    lo, hi = frame_envelope(frame, spec)
    funcs = square_test_functions(ctx, "square_function_equivalence")
    samples, per_p = [], {}
    bracket_ok = True
    for name, f in funcs:
        lam_f = square_function(frame, spec, f)
        pf = spec.pi.apply(f)
        for p in p_list:
            lhs = lp_norm(geom, lam_f, p) + lp_norm(geom, pf, p)
            rhs = lp_norm(geom, f, p)
            samples.append(Sample({"p": p, "f": name}, lhs, rhs))
            q = lhs / rhs
            key = f"p={p:g}"
            per_p[key] = max(per_p.get(key, 1.0), q, 1.0 / q)
        # p = 2: ||Lambda f||^2 / ||(1 - pi) f||^2 lies in the scalar envelope
        rest = lp_norm(geom, f - pf, 2) ** 2
        if rest > 1e-20 * lp_norm(geom, f, 2) ** 2:
            e = lp_norm(geom, lam_f, 2) ** 2 / rest
            bracket_ok &= lo * (1 - 1e-10) <= e <= hi * (1 + 1e-10)
    return BoundReport(
        "square_function_equivalence",
        "||Lambda f||_p + ||pi f||_p ~ ||f||_p",
        samples,
        bool(bracket_ok and all(math.isfinite(v) for v in per_p.values())),
        "ratios in [1/C_p, C_p]; p = 2 ratios inside the scalar frame envelope; C_p stable within 50% across resolutions",
        constants=per_p,
        notes={"envelope": (lo, hi)},
    )


def _dual(v: np.ndarray, p: float, mu: np.ndarray) -> np.ndarray:
    """Norming functional of v in L^p(mu), as a unit vector of L^q(mu)."""
    a = np.abs(v)
    norm = float((a**p @ mu) ** (1 / p))
    if norm == 0:
        return np.zeros_like(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(a > 0, v / np.where(a > 0, a, 1), 0)
    return phase * (a / norm) ** (p - 1)


def lp_operator_norm(A: np.ndarray, mu: np.ndarray, p: float, rng: np.random.Generator,
                     n_random: int = 500, starts: int = 8, iters: int = 25) -> float:
    """Lower bound for the L^p(mu) norm of a coefficient matrix.

    Max over random unit vectors and Boyd power iterates (x <- dual_q(A* dual_p(A x))).
    """
    n = A.shape[0]
    cplx = np.iscomplexobj(A)

    def pnorm(v):
        return (np.abs(v) ** p).T @ mu if v.ndim == 2 else float((np.abs(v) ** p @ mu))

    X = rng.standard_normal((n, n_random))
    if cplx:
        X = X + 1j * rng.standard_normal((n, n_random))
    best = float(np.max((pnorm(A @ X) / pnorm(X)) ** (1 / p)))
    q = p / (p - 1)
    Astar = (A.conj().T * mu[None, :]) / mu[:, None]
    for s in range(starts):
        x = X[:, s]
        x = x / pnorm(x) ** (1 / p)
        for _ in range(iters):
            y = A @ x
            best = max(best, pnorm(y) ** (1 / p))
            z = Astar @ _dual(y, p, mu)
            x = _dual(z, q, mu)
            if not np.any(x):
                break
    return best


def check_multiplier_lp(ctx: SuiteContext, m=None, a: float = 4.0, p_list=P_LIST, Q: float | None = None) -> BoundReport:
    """L^p -> L^p norm of m(L~) for a multiplier of finite sloc Sobolev norm."""
    from ..calculus import log_oscillation

    if Q is None:
        Q = doubling_Q(ctx)
    m = log_oscillation(3.0) if m is None else m
    norm = _require_sloc(m, a, Q)
    spec, geom = ctx.spec, ctx.geom
    w = multiplier_weights(spec, m, reduced=True)
    A = spec.kernel_of(w).as_matrix()
    exact2 = float(np.abs(w).max())
    rng = ctx.rng("multiplier_lp")
    samples, per_p = [], {}
    for p in p_list:
        est = exact2 if p == 2 else lp_operator_norm(A, geom.mu, p, rng)
        samples.append(Sample({"p": p}, est, norm))
        per_p[f"p={p:g}"] = est
    finite = all(math.isfinite(v) for v in per_p.values())
    return BoundReport(
        "multiplier_lp",
        "||m(L~) f||_p <= C ||m||_{L^2_a,sloc} ||f||_p, a > (Q+1)/2",
        samples,
        bool(finite and exact2 <= float(np.abs(m(spec.values[spec.nonkernel_mask])).max()) + 1e-12),
        "norms finite; p = 2 norm equals max |m| on the spectrum; stable within 50% across resolutions",
        constants=per_p,
        notes={"sloc_norm": norm, "a": a, "Q": Q},
    )


def default_wave_time(ctx: SuiteContext, buffer: float | None = None) -> float:
    """Largest t0 <= 2h, in steps of h/4, whose cone kappa t0 + buffer stays inside the model."""
    h = ctx.h
    buffer = 4 * h if buffer is None else buffer
    for k in range(8, 0, -1):
        t0 = k * h / 4
        if ctx.kappa_hat * t0 + buffer < ctx.dist.diameter:
            return t0
    raise DomainError("model too small for a wave cone with a 4h buffer")


def wave_energy_setup(ctx: SuiteContext, x0: int, t0: float, buffer: float | None = None):
    """Radius R = kappa t0 + buffer and initial data vanishing on B(x0, R)."""
    h = ctx.h
    buffer = 4 * h if buffer is None else buffer
    if t0 <= 0 or t0 > ctx.dist.diameter / 2 + 1e-12:
        raise DomainError(f"need 0 < t0 <= diameter/2 = {ctx.dist.diameter / 2:g}, got {t0:g}")
    R = ctx.kappa_hat * t0 + buffer
    if R >= ctx.dist.diameter:
        raise DomainError(f"cone radius {R:g} reaches the model diameter {ctx.dist.diameter:g}")
    rho0 = ctx.dist.rho[x0]
    u0 = transition(rho0, R, R + 4 * h)
    return R, u0, np.zeros_like(u0)


def check_wave_energy(ctx: SuiteContext, x0: int = 0, t0: float | None = None, u0=None, u1=None,
                      tol: float = 1e-6, steps: int = 8) -> BoundReport:
    """Data vanishing on B(x0, kappa t0 + 4h) keep u = 0 and zero energy on B(x0, kappa (t0 - t))."""
    spec, geom = ctx.spec, ctx.geom
    h = ctx.h
    t0 = default_wave_time(ctx) if t0 is None else t0
    R, d0, d1 = wave_energy_setup(ctx, x0, t0)
    u0 = d0 if u0 is None else np.asarray(u0)
    u1 = d1 if u1 is None else np.asarray(u1)
    rho0 = ctx.dist.rho[x0]
    kap = ctx.kappa_hat
    mu = geom.mu
    root = np.sqrt(spec.values)
    c0 = spec.vectors.conj().T @ (u0 * mu)
    c1 = spec.vectors.conj().T @ (u1 * mu)
    total = 0.5 * float(np.sum(np.abs(c1) ** 2) + np.sum(spec.values * np.abs(c0) ** 2))
    V = spec.vectors

    def energy(u, ut, region):
        dens = np.abs(ut) ** 2 + sum(np.abs(apply_derivative(geom, u, (g,))) ** 2 for g in (0, 1))
        return 0.5 * float(dens[region] @ mu[region])

    samples = []
    E0 = energy(u0, u1, rho0 <= kap * t0 + 1e-12)
    resid, growth = 0.0, 0.0
    for t in np.linspace(0.0, t0, steps + 1):
        with np.errstate(invalid="ignore", divide="ignore"):
            sinc = np.where(root > 0, np.sin(t * root) / np.where(root > 0, root, 1), t)
        u = V @ (np.cos(t * root) * c0 + sinc * c1)
        ut = V @ (-root * np.sin(t * root) * c0 + np.cos(t * root) * c1)
        region = rho0 <= kap * (t0 - t) + 1e-12
        scale = float(np.abs(u).max())
        inside = float(np.abs(u[region]).max()) if region.any() else 0.0
        samples.append(Sample({"t": float(t), "kind": "interior"}, inside, scale))
        dE = energy(u, ut, region) - E0
        samples.append(Sample({"t": float(t), "kind": "energy"}, max(dE, 0.0), h * total))
        if scale > 0:
            resid = max(resid, inside / scale)
        if total > 0:
            growth = max(growth, dE / (h * total))
    return BoundReport(
        "wave_energy",
        "energy of u on B(x0, kappa (t0 - t)) does not grow; u vanishes there",
        samples,
        bool(resid <= tol and math.isfinite(growth)),
        f"interior residual <= {tol:g} x max|u|; energy growth <= C h E_total with C fitted",
        constants={"relative_residual": resid, "energy_C": growth},
        notes={"R": R, "t0": t0, "kappa_hat": kap, "E_total": total},
    )
