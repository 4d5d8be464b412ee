"""Forward evaluation of (d/dt - Lap)^s u by independent routes.

Routes:

* ``apply_kernel``: the two-variable kernel formula, reduced to the
  tau-singular integral of u(t,x) - e^{-tau H}u(t,x) with the heat action
  computed by Gauss-Weierstrass spatial quadrature;
* ``apply_semigroup``: the same integral with the heat action taken from
  the function's closed-form semigroup oracle when it carries one;
* ``apply_incremental``: the half-order semigroup formula
  (1/c_s) int ((P_tau - I)^{[2s]+1} u) tau^{-1-2s} dtau;
* ``apply_symbol``: exact values on plane waves from the Fourier symbol
  (i rho + |xi|^2)^s with the principal branch.

The separated-variable reductions (Marchaud derivative in time, fractional
Laplacian in space) reuse the same engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    AccuracyError,
    DomainError,
    EvalReport,
    ExpEnvelope,
    FracParams,
    ParameterError,
    PowerEnvelope,
    PreconditionError,
    QuadSpec,
    SpaceTimeFn,
    UnsupportedGrowthError,
    ZeroEnvelope,
    abs_gamma_neg,
    as_point,
)
from .quadrature import heat_diff_values, integrate_tau_singular, poisson_values

__all__ = [
    "apply_kernel",
    "apply_semigroup",
    "apply_incremental",
    "apply_symbol",
    "incremental_constant",
    "marchaud",
    "fractional_laplacian",
    "scaling_check",
    "scaled_function",
    "linear_combination",
    "MaxPrincipleDiagnosis",
    "max_principle_check",
]


def _scale_envelope(env, factor):
    if env is None or isinstance(env, ZeroEnvelope):
        return env
    return replace(env, coef=env.coef * factor)


def _check_point(u, p, x):
    if u.n != p.n:
        raise ParameterError(f"{u.name} lives in R^{u.n}, parameters in R^{p.n}")
    return as_point(x, p.n)


def _hs_route(u, p, t, x, spec, use_oracle):
    """Shared body of the kernel and semigroup routes."""
    s = p.s
    x = _check_point(u, p, x)
    uval = float(np.asarray(u.eval(t, x)))
    scale = max(1.0, abs(uval))
    heat_tol = 1e-15 * scale

    def g(taus):
        vals, _ = heat_diff_values(u, p, taus, t, x, spec, use_oracle=use_oracle, abs_tol=heat_tol)
        return vals

    kwargs = {}
    if u.hs_tail is not None:
        kwargs["tail_exact"] = lambda T: u.hs_tail(t, x, T, s)
    elif u.heat_decay is not None:
        kwargs["envelope"] = u.heat_decay
        kwargs["g_limit"] = uval - u.heat_limit_value(t, x)
    elif not math.isfinite(u.sup_bound):
        raise UnsupportedGrowthError(
            f"{u.name}: unbounded with no tail metadata; the tau integral cannot be truncated"
        )
    sup = (abs(uval) + u.sup_bound) if math.isfinite(u.sup_bound) else None
    rep = integrate_tau_singular(g, s, spec, sup_bound=sup, scale_hint=scale, **kwargs)
    gneg = abs_gamma_neg(s)
    return EvalReport(
        rep.value / gneg, rep.err_estimate / gneg, rep.panels_used, rep.truncation_radius
    )


def apply_kernel(u: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec) -> EvalReport:
    """H^s u(t,x) from the kernel formula, heat action by spatial quadrature."""
    return _hs_route(u, p, t, x, spec, use_oracle=False)


def apply_semigroup(u: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec) -> EvalReport:
    """H^s u(t,x) from the semigroup formula (oracle heat action when present)."""
    return _hs_route(u, p, t, x, spec, use_oracle=None)


_CS_CACHE: dict = {}


def incremental_constant(s: float, spec: QuadSpec | None = None) -> float:
    """c_s = int_0^inf (e^{-tau} - 1)^{[2s]+1} tau^{-1-2s} dtau, cached per order.

    Computed by the same singular integrator that the incremental route
    uses (no closed form is assumed).
    """
    m = 1 if s < 0.5 else 2
    key = round(float(s), 15)
    if key not in _CS_CACHE:
        tight = QuadSpec(abs_tol=1e-10, rel_tol=1e-10, max_panels=8000)

        def g(taus):
            return (np.exp(-np.asarray(taus, dtype=float)) - 1.0) ** m

        rep = integrate_tau_singular(
            g,
            2.0 * s,
            tight,
            g_limit=(-1.0) ** m,
            envelope=ExpEnvelope(coef=m * 2.0 ** (m - 1), rate=1.0),
            sup_bound=2.0**m,
        )
        _CS_CACHE[key] = rep.value
    return _CS_CACHE[key]


def apply_incremental(u: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec) -> EvalReport:
    """H^s u(t,x) from iterated differences of the subordinated semigroup.

    Uses first differences for s < 1/2 and second differences for
    s >= 1/2 (the integer part of 2s, with 1/2 grouped with the upper
    range).
    """
    s = p.s
    m = 1 if s < 0.5 else 2
    x = _check_point(u, p, x)
    uval = float(np.asarray(u.eval(t, x)))
    scale = max(1.0, abs(uval))
    coeffs = [math.comb(m, j) * (-1.0) ** (m - j) for j in range(m + 1)]

    if u.incr_oracle is not None:
        def g(taus):
            return np.asarray(u.incr_oracle(m, taus, t, x), dtype=float)
    else:
        def g(taus):
            taus = np.asarray(taus, dtype=float)
            total = coeffs[0] * uval * np.ones_like(taus)
            for j in range(1, m + 1):
                vals, _ = poisson_values(u, j * taus, t, x, spec)
                total += coeffs[j] * vals
            return total

    kwargs = {}
    if u.incr_tail is not None:
        kwargs["tail_exact"] = lambda T: u.incr_tail(t, x, T, s, m)
    elif u.poisson_decay is not None:
        kwargs["envelope"] = _scale_envelope(u.poisson_decay, float(2**m - 1))
        kwargs["g_limit"] = ((-1.0) ** m) * (uval - u.poisson_limit_value(t, x))
    elif not math.isfinite(u.sup_bound):
        raise UnsupportedGrowthError(f"{u.name}: unbounded with no subordinated tail metadata")
    sup = (2.0**m) * max(abs(uval), u.sup_bound) if math.isfinite(u.sup_bound) else None
    rep = integrate_tau_singular(g, 2.0 * s, spec, sup_bound=sup, scale_hint=scale, **kwargs)
    c_s = incremental_constant(s)
    return EvalReport(
        rep.value / c_s, rep.err_estimate / abs(c_s), rep.panels_used, rep.truncation_radius
    )


def apply_symbol(rho: float, xi, p: FracParams, t: float, x) -> float:
    """Exact H^s of cos(rho t + xi.x): Re[(i rho + |xi|^2)^s e^{i(rho t + xi.x)}].

    The principal branch of z^s on Re(z) > 0 (argument in (-pi/2, pi/2)).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = as_point(x, p.n) if xi.size == p.n else as_point(x, xi.size)
    mu = complex(float(xi @ xi), float(rho))
    if mu == 0:
        return 0.0
    theta = rho * t + float(x @ xi)
    return float((mu**p.s * np.exp(1j * theta)).real)


def marchaud(
    u_t,
    s: float,
    t: float,
    spec: QuadSpec,
    *,
    sup_bound: float | None = None,
    limit: float | None = None,
    envelope=None,
    tail_exact=None,
) -> EvalReport:
    """One-sided fractional derivative from the past:
    (1/|Gamma(-s)|) int_0^inf (u(t) - u(t-tau)) tau^{-1-s} dtau.

    ``u_t`` must accept numpy arrays.  ``limit``/``envelope`` describe
    u(t - tau) as tau -> inf; ``tail_exact(T)`` overrides them.
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"order must lie in (0, 1), got {s}")
    ut = float(u_t(np.asarray(t)))

    def g(taus):
        taus = np.asarray(taus, dtype=float)
        return ut - np.asarray(u_t(t - taus), dtype=float)

    kwargs = {}
    if tail_exact is not None:
        kwargs["tail_exact"] = tail_exact
    elif envelope is not None and limit is not None:
        kwargs["envelope"] = envelope
        kwargs["g_limit"] = ut - limit
    sup = (abs(ut) + sup_bound) if sup_bound is not None else None
    rep = integrate_tau_singular(g, s, spec, sup_bound=sup, scale_hint=max(1.0, abs(ut)), **kwargs)
    gneg = abs_gamma_neg(s)
    return EvalReport(
        rep.value / gneg, rep.err_estimate / gneg, rep.panels_used, rep.truncation_radius
    )


def fractional_laplacian(u_x, p: FracParams, x, spec: QuadSpec, **meta) -> EvalReport:
    """(-Lap)^s u(x) as H^s of the time-independent lift of u.

    ``u_x`` is either a SpaceTimeFn marked time-independent or a plain
    vectorized callable of x plus metadata keyword arguments
    (sup_bound, support_radius, l1_bound, space_breakpoints, ...).
    """
    if isinstance(u_x, SpaceTimeFn):
        lift = u_x
    else:
        sup = meta.pop("sup_bound", None)
        if sup is None:
            raise ParameterError("a bare callable needs an explicit sup_bound")
        fn = u_x

        def ev(t, xx):
            out = np.asarray(fn(xx), dtype=float)
            return out + 0.0 * np.asarray(t, dtype=float)

        l1 = meta.get("l1_bound")
        decay = None
        if l1 is not None:
            decay = PowerEnvelope(coef=l1 / (4.0 * math.pi) ** (p.n / 2.0), power=p.n / 2.0)
        lift = SpaceTimeFn(
            eval=ev,
            sup_bound=float(sup),
            growth_class="bounded",
            n=p.n,
            name="laplacian_probe",
            time_independent=True,
            heat_limit=0.0,
            heat_decay=decay,
            **meta,
        )
    return apply_kernel(lift, p, 0.0, x, spec)


def scaled_function(u: SpaceTimeFn, lam: float) -> SpaceTimeFn:
    """u_lam(t,x) = u(lam^2 t, lam x), with all metadata transported."""
    if lam <= 0.0:
        raise ParameterError("scaling factor must be positive")
    l2 = lam * lam

    def ev(t, x):
        return u.eval(l2 * np.asarray(t, dtype=float), lam * np.asarray(x, dtype=float))

    sg = None
    if u.semigroup_oracle is not None:
        sg = lambda tau, t, x: u.semigroup_oracle(
            l2 * np.asarray(tau, dtype=float), l2 * np.asarray(t, dtype=float), lam * np.asarray(x, dtype=float)
        )
    pg = None
    if u.poisson_oracle is not None:
        pg = lambda y, t, x: u.poisson_oracle(
            lam * np.asarray(y, dtype=float), l2 * np.asarray(t, dtype=float), lam * np.asarray(x, dtype=float)
        )
    hs_tail = None
    if u.hs_tail is not None:
        hs_tail = lambda t, x, T, s: lam ** (2.0 * s) * u.hs_tail(
            l2 * t, lam * np.asarray(x, dtype=float), l2 * T, s
        )
    incr_tail = None
    if u.incr_tail is not None:
        incr_tail = lambda t, x, T, s, m: lam ** (2.0 * s) * u.incr_tail(
            l2 * t, lam * np.asarray(x, dtype=float), lam * T, s, m
        )
    env = u.heat_decay
    if env is not None and not isinstance(env, ZeroEnvelope):
        if isinstance(env, ExpEnvelope):
            env = ExpEnvelope(
                coef=env.coef * l2 ** (-env.power), rate=env.rate * l2, power=env.power,
                tau_from=env.tau_from / l2,
            )
        elif isinstance(env, PowerEnvelope):
            env = PowerEnvelope(coef=env.coef * l2 ** (-env.power), power=env.power, tau_from=env.tau_from / l2)
    penv = u.poisson_decay
    if penv is not None and not isinstance(penv, ZeroEnvelope):
        if isinstance(penv, ExpEnvelope):
            penv = ExpEnvelope(
                coef=penv.coef * lam ** (-penv.power), rate=penv.rate * lam, power=penv.power,
                tau_from=penv.tau_from / lam,
            )
        elif isinstance(penv, PowerEnvelope):
            penv = PowerEnvelope(coef=penv.coef * lam ** (-penv.power), power=penv.power, tau_from=penv.tau_from / lam)
    return replace(
        u,
        eval=ev,
        name=f"{u.name}@lam={lam}",
        semigroup_oracle=sg,
        poisson_oracle=pg,
        poisson_dy_oracle=None,
        hs_tail=hs_tail,
        incr_tail=incr_tail,
        ext_tail=None,
        heat_decay=env,
        poisson_decay=penv,
        support_radius=(u.support_radius / lam if u.support_radius is not None else None),
        past_zero_time=(u.past_zero_time / l2 if u.past_zero_time is not None else None),
        space_exp_rate=u.space_exp_rate * lam,
        space_breakpoints=tuple(b / lam for b in u.space_breakpoints),
        l1_bound=(u.l1_bound / lam**u.n if u.l1_bound is not None else None),
    )


def scaling_check(u: SpaceTimeFn, p: FracParams, lam: float, t: float, x, spec: QuadSpec):
    """Both sides of the parabolic scaling law.

    Returns (lhs, rhs): lhs = H^s[u(lam^2 ., lam .)](t, x) and
    rhs = lam^{2s} (H^s u)(lam^2 t, lam x), as EvalReports.
    """
    x = _check_point(u, p, x)
    ul = scaled_function(u, lam)
    lhs = apply_semigroup(ul, p, t, x, spec)
    base = apply_semigroup(u, p, lam * lam * t, lam * x, spec)
    f = lam ** (2.0 * p.s)
    rhs = EvalReport(f * base.value, f * base.err_estimate, base.panels_used, base.truncation_radius)
    return lhs, rhs


def linear_combination(cu: float, u: SpaceTimeFn, cv: float, v: SpaceTimeFn) -> SpaceTimeFn:
    """cu*u + cv*v with metadata combined conservatively.

    Oracles/tails survive only when both summands carry them; envelopes
    are kept when both exist and share a type.
    """
    if u.n != v.n:
        raise ParameterError("cannot combine functions in different dimensions")

    def ev(t, x):
        return cu * np.asarray(u.eval(t, x), dtype=float) + cv * np.asarray(v.eval(t, x), dtype=float)

    def comb(fa, fb, wa, wb):
        if fa is None or fb is None:
            return None
        return lambda *args: wa * np.asarray(fa(*args), dtype=float) + wb * np.asarray(fb(*args), dtype=float)

    def comb_env(ea, eb, wa, wb):
        if ea is None or eb is None:
            return None
        if isinstance(ea, ZeroEnvelope):
            return _scale_envelope(eb, abs(wb)) if not isinstance(eb, ZeroEnvelope) else ea
        if isinstance(eb, ZeroEnvelope):
            return _scale_envelope(ea, abs(wa))
        if type(ea) is type(eb):
            slow = ea if (getattr(ea, "rate", 0.0), -ea.power if hasattr(ea, "power") else 0.0) <= (
                getattr(eb, "rate", 0.0), -eb.power if hasattr(eb, "power") else 0.0
            ) else eb
            return _scale_envelope(slow, abs(wa) + abs(wb))
        return None

    limit_u, limit_v = u.heat_limit, v.heat_limit
    if limit_u == "self" or limit_v == "self":
        heat_limit = "self" if (limit_u == "self" and limit_v == "self") else 0.0
        heat_env = u.heat_decay if heat_limit == "self" else None
        if heat_limit != "self":
            heat_env = None
    else:
        heat_limit = cu * float(limit_u) + cv * float(limit_v)
        heat_env = comb_env(u.heat_decay, v.heat_decay, cu, cv)
    return SpaceTimeFn(
        eval=ev,
        sup_bound=abs(cu) * u.sup_bound + abs(cv) * v.sup_bound,
        growth_class=u.growth_class if u.growth_class == v.growth_class else "exponential-in-t",
        n=u.n,
        name=f"{cu}*{u.name}+{cv}*{v.name}",
        semigroup_oracle=comb(u.semigroup_oracle, v.semigroup_oracle, cu, cv),
        poisson_oracle=comb(u.poisson_oracle, v.poisson_oracle, cu, cv),
        poisson_dy_oracle=comb(u.poisson_dy_oracle, v.poisson_dy_oracle, cu, cv),
        heat_limit=heat_limit,
        heat_decay=heat_env,
        hs_tail=comb(u.hs_tail, v.hs_tail, cu, cv),
        incr_tail=comb(u.incr_tail, v.incr_tail, cu, cv),
        ext_tail=comb(u.ext_tail, v.ext_tail, cu, cv),
        support_radius=(
            max(u.support_radius, v.support_radius)
            if (u.support_radius is not None and v.support_radius is not None)
            else None
        ),
        past_zero_time=(
            min(u.past_zero_time, v.past_zero_time)
            if (u.past_zero_time is not None and v.past_zero_time is not None)
            else None
        ),
        space_exp_rate=max(u.space_exp_rate, v.space_exp_rate),
        space_breakpoints=tuple(sorted(set(u.space_breakpoints) | set(v.space_breakpoints))),
        time_independent=u.time_independent and v.time_independent,
        l1_bound=(
            abs(cu) * u.l1_bound + abs(cv) * v.l1_bound
            if (u.l1_bound is not None and v.l1_bound is not None)
            else None
        ),
    )


@dataclass(frozen=True)
class MaxPrincipleDiagnosis:
    value: float
    err_estimate: float
    passes: bool
    zero_dichotomy_untestable: bool


def max_principle_check(
    u: SpaceTimeFn, p: FracParams, t0: float, x0, spec: QuadSpec, *, audit_points=None
) -> MaxPrincipleDiagnosis:
    """Sign check of H^s u at a zero of a past-nonnegative function.

    Audits the hypotheses by sampling (u(t0,x0) = 0, u >= 0 for t <= t0),
    then evaluates H^s u(t0,x0) and reports whether value <= +err.  When
    |value| <= err the vanishing-in-the-past dichotomy is flagged as
    untestable beyond sampling.
    """
    x0 = _check_point(u, p, x0)
    v0 = float(np.asarray(u.eval(t0, x0)))
    if abs(v0) > 1e-10:
        raise PreconditionError(f"u(t0,x0) = {v0:.3g} is not zero")
    if audit_points is None:
        ts = t0 - np.linspace(0.0, 5.0, 11)
        offs = np.linspace(-5.0, 5.0, 9)
        audit_points = [(tt, x0 + d) for tt in ts for d in offs]
    for (tt, xx) in audit_points:
        if tt > t0:
            continue
        val = float(np.asarray(u.eval(tt, np.asarray(xx, dtype=float))))
        if val < -1e-12:
            raise PreconditionError(f"u({tt}, {xx}) = {val:.3g} < 0 violates the past-positivity audit")
    rep = apply_semigroup(u, p, t0, x0, spec)
    return MaxPrincipleDiagnosis(
        value=rep.value,
        err_estimate=rep.err_estimate,
        passes=rep.value <= rep.err_estimate,
        zero_dichotomy_untestable=abs(rep.value) <= rep.err_estimate,
    )
