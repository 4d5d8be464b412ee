"""The global Poisson problem H^s u = f: inversion and round trip.

Two independent inversion routes: the fundamental-solution convolution,
reduced to (1/Gamma(s)) int e^{-tau H}f tau^{s-1} dtau, and the
subordinated form (1/Gamma(2s)) int e^{-tau H^{1/2}}f tau^{2s-1} dtau.
Both need decay of f at infinity; this is operationalized through the
function's decay metadata (envelope, L1 bound, or a causal past-zero
time), and functions carrying none of it are refused.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .core import (
    EvalReport,
    FracParams,
    ParameterError,
    PowerEnvelope,
    QuadSpec,
    SpaceTimeFn,
    UnsupportedGrowthError,
    as_point,
)
from .fields import hs_field_grid
from .quadrature import heat_values, integrate_tau_inverse, poisson_values

__all__ = ["invert_kernel", "invert_subordinated", "roundtrip"]


class _ErfcEnvelope:
    """|P_tau f| <= coef * erfc(tau / (2 sqrt(delta))): causal window under
    the subordinated semigroup (f vanishing before t - delta)."""

    def __init__(self, coef, delta):
        self.coef = coef
        self.delta = delta
        self.tau_from = 0.0

    def value(self, tau):
        return self.coef * math.erfc(tau / (2.0 * math.sqrt(self.delta)))

    def tail_integral(self, T, expo):
        # erfc(z) <= e^{-z^2}; int_T coef e^{-a tau^2} tau^{expo-1}
        #   = coef a^{-expo/2} Gamma(expo/2, a T^2) / 2, a = 1/(4 delta)
        import mpmath

        a = 1.0 / (4.0 * self.delta)
        val = mpmath.gammainc(expo / 2.0, a=a * T * T)
        return float(self.coef * a ** (-expo / 2.0) * val / 2.0)


def _decay_kwargs(f: SpaceTimeFn, t: float, route: str):
    """Tail controls for the inverse integral of a decaying function."""
    if route == "heat":
        env = f.heat_decay
        limit = f.heat_limit
    else:
        env = f.poisson_decay
        limit = f.poisson_limit
    kwargs = {}
    if f.past_zero_time is not None:
        delta = t - f.past_zero_time
        if delta <= 0.0:
            return {"causal_T": 1e-12}
        if route == "heat":
            kwargs["causal_T"] = delta
        else:
            sup = f.sup_bound if math.isfinite(f.sup_bound) else 1.0
            kwargs["envelope"] = _ErfcEnvelope(coef=sup, delta=delta)
        return kwargs
    if env is not None and limit == 0.0:
        kwargs["envelope"] = env
        return kwargs
    raise UnsupportedGrowthError(
        f"{f.name}: the inverse needs decay at infinity (envelope metadata, "
        "an L1-backed power envelope, or a causal past-zero time)"
    )


def invert_kernel(f: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec) -> EvalReport:
    """H^{-s} f(t,x) through the heat semigroup:
    (1/Gamma(s)) int_0^inf e^{-tau H}f(t,x) tau^{s-1} dtau."""
    x = as_point(x, p.n)
    if f.n != p.n:
        raise ParameterError(f"{f.name} lives in R^{f.n}, parameters in R^{p.n}")
    if not math.isfinite(f.sup_bound):
        raise UnsupportedGrowthError(f"{f.name} is unbounded; inversion undefined here")
    fval = float(np.asarray(f.eval(t, x)))
    kwargs = _decay_kwargs(f, t, "heat")

    def h(taus):
        vals, _ = heat_values(f, p, taus, t, x, spec, abs_tol=1e-13 * max(1.0, abs(fval)))
        return vals

    rep = integrate_tau_inverse(
        h, p.s, spec, h_zero=fval, scale_hint=max(1.0, abs(fval)), **kwargs
    )
    gs = math.gamma(p.s)
    return EvalReport(rep.value / gs, rep.err_estimate / gs, rep.panels_used, rep.truncation_radius)


def invert_subordinated(f: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec) -> EvalReport:
    """H^{-s} f(t,x) through the subordinated semigroup:
    (1/Gamma(2s)) int_0^inf e^{-tau H^{1/2}}f(t,x) tau^{2s-1} dtau."""
    x = as_point(x, p.n)
    if f.n != p.n:
        raise ParameterError(f"{f.name} lives in R^{f.n}, parameters in R^{p.n}")
    if not math.isfinite(f.sup_bound):
        raise UnsupportedGrowthError(f"{f.name} is unbounded; inversion undefined here")
    fval = float(np.asarray(f.eval(t, x)))
    kwargs = _decay_kwargs(f, t, "poisson")

    def h(taus):
        vals, _ = poisson_values(f, taus, t, x, spec)
        return vals

    rep = integrate_tau_inverse(
        h, 2.0 * p.s, spec, h_zero=fval, scale_hint=max(1.0, abs(fval)), **kwargs
    )
    g2s = math.gamma(2.0 * p.s)
    return EvalReport(
        rep.value / g2s, rep.err_estimate / g2s, rep.panels_used, rep.truncation_radius
    )


def roundtrip(u: SpaceTimeFn, p: FracParams, t: float, x, spec: QuadSpec, *, grid_nt=40, grid_nx=81):
    """(original, recovered) with recovered = H^{-s}(H^s u)(t, x).

    The intermediate field f = H^s u is tabulated on a causal space-time
    box and splined; u must be compactly supported in space and vanish
    before a declared time (the smooth-bump probe).  The truncation of
    f's power tails outside the box is far below the 1e-3 round-trip
    budget for the library probes.
    """
    x = as_point(x, p.n)
    if p.n != 1:
        raise ParameterError("round trip is implemented for n = 1")
    if u.past_zero_time is None or u.support_radius is None:
        raise ParameterError("round trip needs a compact, causally windowed probe")
    t0 = u.past_zero_time
    if t <= t0:
        return (float(np.asarray(u.eval(t, x))), 0.0)
    delta = t - t0
    logt = math.log(1.0 / spec.abs_tol)
    half = u.support_radius + math.sqrt(4.0 * delta * logt) + 2.0
    ts = np.linspace(t0, t, grid_nt)
    xs = np.linspace(float(x[0]) - half, float(x[0]) + half, grid_nx)
    field = hs_field_grid(u, p, ts, xs, spec)
    spline = RectBivariateSpline(ts, xs, field, kx=3, ky=3)
    sup_f = float(np.max(np.abs(field)))
    l1_f = float(np.max(np.trapezoid(np.abs(field), xs, axis=1)))

    def f_eval(tt, xx):
        tt = np.asarray(tt, dtype=float)
        xx = np.asarray(xx, dtype=float)
        tt_b, xx_b = np.broadcast_arrays(tt, xx)
        inside = (tt_b >= t0) & (tt_b <= t) & (np.abs(xx_b - x[0]) <= half)
        vals = spline.ev(np.clip(tt_b, t0, t), np.clip(xx_b, xs[0], xs[-1]))
        return np.where(inside, vals, 0.0)

    f_fn = SpaceTimeFn(
        eval=f_eval,
        sup_bound=sup_f,
        growth_class="bounded",
        n=1,
        name=f"hs[{u.name}]",
        heat_limit=0.0,
        heat_decay=PowerEnvelope(coef=l1_f / math.sqrt(4.0 * math.pi), power=0.5),
        support_radius=float(abs(x[0]) + half),
        past_zero_time=t0,
        l1_bound=l1_f,
    )
    rec = invert_kernel(f_fn, p, t, x, spec)
    return (float(np.asarray(u.eval(t, x))), rec.value)
