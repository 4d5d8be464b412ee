"""Singular and improper integration engine.

Three families of integrals drive everything in this package:

* ``integrate_tau_singular``: int_0^inf g(tau) tau^{-1-s} dtau with g(0) = 0,
  the backbone of the forward operator;
* ``integrate_tau_inverse``: int_0^inf h(tau) tau^{s-1} dtau with h bounded,
  the backbone of the inverse;
* Gaussian convolutions (heat semigroup) and weighted half-space integrals.

Strategy for the tau integrals: a power-law model fitted on a geometric
probe grid handles (0, tau_cut]; deterministic adaptive panels with an
order-matching substitution handle the midrange; beyond the truncation
point the analytic constant part limit * T^{-s}/s is added and the
remainder is bounded by the function's decay envelope (or computed by an
exact per-function tail when one is supplied).

Panel subdivision is deterministic (bisection of the worst panel, ties by
creation order, fixed embedded Gauss 10/20 node pairs) so that results are
bit-reproducible for a fixed spec.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import (
    AccuracyError,
    DomainError,
    EvalReport,
    FracParams,
    ParameterError,
    QuadSpec,
    SpaceTimeFn,
    UnsupportedGrowthError,
)

__all__ = [
    "PanelResult",
    "adaptive_panels",
    "integrate_tau_singular",
    "integrate_tau_inverse",
    "heat_semigroup",
    "heat_values",
    "heat_action_grid",
    "subordinated_action",
    "poisson_values",
    "integrate_halfspace_weighted",
]

_G10_X, _G10_W = np.polynomial.legendre.leggauss(10)
_G20_X, _G20_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class PanelResult:
    value: float
    err_estimate: float
    subdivisions: int


def _eval_panels(f, a, b):
    """Evaluate the embedded G20/G10 pair on panels [a_i, b_i] in one call."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    xs = np.concatenate([mid + half * _G20_X, mid + half * _G10_X], axis=1)
    vals = np.asarray(f(xs.ravel()), dtype=float).reshape(xs.shape)
    if not np.all(np.isfinite(vals)):
        raise AccuracyError("integrand returned a non-finite value")
    v20 = (vals[:, :20] @ _G20_W) * half[:, 0]
    v10 = (vals[:, 20:] @ _G10_W) * half[:, 0]
    return v20, np.abs(v20 - v10)


def adaptive_panels(f, edges, abs_tol, rel_tol, max_panels) -> PanelResult:
    """Deterministic adaptive quadrature of a vectorized integrand.

    ``edges`` fixes the initial subdivision; afterwards the panel with the
    largest error estimate is bisected (ties broken by creation order).
    Panels narrower than the relative noise floor are frozen, and the loop
    stops early when the total error estimate plateaus (rounding floor).
    """
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2:
        raise ParameterError("need at least two panel edges")
    v, e = _eval_panels(f, edges[:-1], edges[1:])
    counter = 0
    heap = []
    total_val = float(np.sum(v))
    total_err = float(np.sum(e))
    for i in range(edges.size - 1):
        heapq.heappush(heap, (-e[i], counter, edges[i], edges[i + 1], v[i], e[i]))
        counter += 1
    n_panels = edges.size - 1
    width_floor = 5e-15 * max(abs(edges[0]), abs(edges[-1]), 1e-30)
    err_checkpoint = math.inf
    since_checkpoint = 0
    while heap and total_err > max(abs_tol, rel_tol * abs(total_val)) and n_panels < max_panels:
        _, _, a, b, val, err = heapq.heappop(heap)
        if b - a <= width_floor:
            # too narrow to bisect further; its error estimate is final
            heapq.heappush(heap, (0.0, counter, a, b, val, err))
            counter += 1
            if heap[0][0] == 0.0:
                break
            continue
        m = 0.5 * (a + b)
        v2, e2 = _eval_panels(f, np.array([a, m]), np.array([m, b]))
        total_val += float(np.sum(v2)) - val
        total_err += float(np.sum(e2)) - err
        for k in range(2):
            heapq.heappush(heap, (-e2[k], counter, (a, m)[k], (m, b)[k], v2[k], e2[k]))
            counter += 1
        n_panels += 1
        since_checkpoint += 1
        if since_checkpoint >= 32:
            if total_err > 0.7 * err_checkpoint:
                break  # refinement no longer helps: rounding-noise plateau
            err_checkpoint = total_err
            since_checkpoint = 0
    return PanelResult(value=total_val, err_estimate=total_err, subdivisions=n_panels)


def _log_edges(lo, hi, per_decade=3):
    """Geometric panel edges covering [lo, hi]."""
    if hi <= lo:
        return np.array([lo, hi]) if hi > lo else np.array([lo, lo * (1 + 1e-12)])
    decades = math.log10(hi / lo)
    m = max(2, int(math.ceil(decades * per_decade)))
    return np.geomspace(lo, hi, m + 1)


def _fit_window(tt, vv):
    """Power-law fit c tau^q on one probe window; returns (c, q, mre)."""
    sign = math.copysign(1.0, float(np.sum(np.sign(vv))) or 1.0)
    logs = np.log(np.abs(vv))
    logt = np.log(tt)
    if tt.size >= 2:
        q, logc = np.polyfit(logt, logs, 1)
    else:
        q, logc = 1.0, logs[0] - logt[0]
    c = sign * math.exp(float(logc))
    model = c * tt ** float(q)
    mre = float(np.max(np.abs(vv - model) / np.maximum(np.abs(model), 1e-300)))
    if np.any(np.sign(vv) != np.sign(vv[-1])):
        mre = max(mre, 1.0)
    return float(c), float(q), mre


@dataclass(frozen=True)
class _SmallTauModel:
    q: float
    tau_cut: float
    block_value: float
    block_err: float


def _two_term_block(tt, vv, q0, shift):
    """Weighted two-term fit c1 tau^{q0} + c2 tau^{q0+1} on a window.

    Returns (block_value at the window bottom, spread-based error) for the
    weight exponent ``shift`` (block = int_0^cut model * tau^{shift-1}).
    """
    e1, e2 = q0 + shift, q0 + 1.0 + shift
    if e1 <= 0.02:
        return None
    cut = float(tt[-1])

    def solve(sel):
        ts, vs = tt[sel], vv[sel]
        w = ts ** (-q0)
        A = np.stack([ts**q0 * w, ts ** (q0 + 1.0) * w], axis=1)
        coef, *_ = np.linalg.lstsq(A, vs * w, rcond=None)
        return coef

    try:
        c1, c2 = solve(slice(None))
    except np.linalg.LinAlgError:
        return None
    model = c1 * tt**q0 + c2 * tt ** (q0 + 1.0)
    mre = float(np.max(np.abs(vv - model) / np.maximum(np.abs(model), 1e-300)))
    block = c1 * cut**e1 / e1 + c2 * cut**e2 / e2
    half = tt.size // 2
    spread = 0.0
    if half >= 4:
        for sel in (slice(0, half), slice(half, None)):
            try:
                d1, d2 = solve(sel)
            except np.linalg.LinAlgError:
                continue
            spread += abs((d1 - c1) * cut**e1 / e1 + (d2 - c2) * cut**e2 / e2)
    else:
        spread = abs(block)  # too short to validate: distrust
    err = spread + abs(block) * (mre + 1e-13)
    return block, err


def _fit_power(taus, vals, floor, block_shift):
    """Model the small-tau behaviour of the integrand and pick the cut
    minimizing the predicted model-block error.

    Single-term power fits c tau^q locate the order; a weighted two-term
    refinement (exponents q, q+1) beats the rounding-noise floor when the
    block carries significant mass (small q - s).  The window scan balances
    rounding noise (dominant at tiny tau, where vals suffer cancellation)
    against curvature of the true integrand (dominant at larger tau).
    Returns a _SmallTauModel or None when every probe sits below the noise
    floor.
    """
    absv = np.abs(vals)
    if not np.any(absv > 100.0 * floor):
        return None  # indistinguishable from zero at the declared noise scale
    # window candidates may dip far below the blanket floor: rounding noise
    # there inflates the measured misfit, which the selection then penalizes
    usable = absv > max(floor * 1e-5, 1e-305)
    idx = np.nonzero(usable)[0]
    best = None
    best_single = None
    for hi in range(idx[-1], idx[0] + 1, -2):
        lo = max(idx[0], hi - 11)
        take = np.arange(lo, hi + 1)
        take = take[usable[take]]
        if take.size < 3:
            continue
        c, q, mre = _fit_window(taus[take], vals[take])
        tau_cut = float(taus[take[-1]])
        expo = q + block_shift
        predicted = math.inf
        block = 0.0
        if expo > 0.02:
            block = c * tau_cut**expo / expo
            predicted = abs(block) * (1.5 * mre + 1e-12)
        cand = (predicted, q, tau_cut, block, predicted)
        if best is None or predicted < best[0]:
            best = cand
        if best_single is None or predicted < best_single[0]:
            best_single = cand
    if best_single is None:
        take = idx[-min(idx.size, 6):]
        c, q, mre = _fit_window(taus[take], vals[take])
        cut = float(taus[take[-1]])
        expo = q + block_shift
        block = c * cut**expo / expo if expo > 0.02 else 0.0
        return _SmallTauModel(q, cut, block, abs(block) * (mre + 1.0))
    q0 = best_single[1]
    # two-term refinement on longer windows, using the located order
    for hi in range(idx[-1], idx[0] + 1, -3):
        lo = max(idx[0], hi - 21)
        take = np.arange(lo, hi + 1)
        take = take[usable[take]]
        if take.size < 8:
            continue
        out = _two_term_block(taus[take], vals[take], q0, block_shift)
        if out is None:
            continue
        block, err = out
        if err < best[0]:
            best = (err, q0, float(taus[take[-1]]), block, err)
    return _SmallTauModel(best[1], best[2], best[3], best[4])


def _probe_small(g, t_hi, levels=46):
    taus = t_hi * 2.0 ** (-np.arange(levels, dtype=float))
    vals = np.asarray(g(taus), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise AccuracyError("integrand returned a non-finite value near tau = 0")
    return taus, vals


def integrate_tau_singular(
    g,
    s: float,
    spec: QuadSpec,
    *,
    sup_bound: float | None = None,
    g_limit: float | None = None,
    envelope=None,
    tail_exact=None,
    scale_hint: float = 1.0,
    order_hint: float | None = None,
) -> EvalReport:
    """int_0^inf g(tau) tau^{-1-s} dtau for g continuous with g(0) = 0.

    The caller asserts g(tau) = O(tau^beta) near zero with beta > s, and g
    bounded at infinity.  Optional metadata sharpens the tail: ``g_limit``
    is lim g(tau), ``envelope`` bounds |g - g_limit|, and ``tail_exact(T)``
    returns the exact tail integral beyond T.  ``scale_hint`` sets the
    magnitude against which rel_tol and noise floors are measured.

    Valid for 0 < s < 2 (the incremental formula uses the exponent 2s).
    """
    if not (0.0 < s < 2.0):
        raise ParameterError(f"exponent must lie in (0, 2), got {s}")
    split = spec.tau_split
    budget = max(spec.abs_tol, spec.rel_tol * abs(scale_hint))

    # ------------------------------------------------ small tau: model block
    t_hi = split * 1e-2
    taus_p, vals_p = _probe_small(g, t_hi)
    scale = max(abs(scale_hint), float(np.max(np.abs(vals_p))), 1e-300)
    floor = 1e-13 * scale
    fit = _fit_power(taus_p, vals_p, floor, -s)
    panels_used = 0
    if fit is None:
        # every probe below the noise floor: treat g as 0 up to t_hi with a
        # linear-growth bound (the asserted order is at least 1 > s here)
        tau_cut = t_hi
        block_val = 0.0
        block_err = floor * t_hi ** (-s) / max(1.0 - s, 0.05) if s < 1 else floor * t_hi ** (1.0 - s)
        q_hat = max(1.0, s + 0.75) if order_hint is None else order_hint
    else:
        q_hat, tau_cut = fit.q, fit.tau_cut
        if q_hat <= s + 0.02:
            raise AccuracyError(
                f"integrand order near 0 fitted as {q_hat:.3f} <= s = {s:.3f}; "
                "the singular integral is not resolvable"
            )
        block_val = fit.block_value
        block_err = fit.block_err + floor * tau_cut ** (1.0 - min(s, 0.95))

    # ------------------------------------------------ midrange [tau_cut, split]
    p = min(max(2.0 / (q_hat - s), 1.0), 16.0)

    def mid_integrand(sigma):
        sigma = np.asarray(sigma, dtype=float)
        return p * g(sigma**p) * sigma ** (-p * s - 1.0)

    lo, hi = tau_cut ** (1.0 / p), split ** (1.0 / p)
    res_mid = adaptive_panels(
        mid_integrand, _log_edges(lo, hi, per_decade=4), budget / 4.0, spec.rel_tol / 4.0, spec.max_panels
    )
    panels_used += res_mid.subdivisions

    # ------------------------------------------------ upper range and tail
    sup_est = sup_bound if (sup_bound is not None and math.isfinite(sup_bound)) else None
    if sup_est is None:
        sup_est = max(scale, float(np.max(np.abs(vals_p))))
    capped = False
    if tail_exact is not None:
        T = max(4.0 * split, 8.0)
        tail_val, tail_err = float(tail_exact(T)), 1e-14 * abs(scale)
    elif envelope is not None and g_limit is not None:
        T = max(4.0 * split, envelope.tau_from, 1.0)
        while envelope.tail_integral(T, -s) > budget / 4.0 and T < 1e30:
            T *= 4.0
        tail_val = g_limit * T ** (-s) / s
        tail_err = float(envelope.tail_integral(T, -s))
    else:
        T = (2.0 * max(sup_est, 1e-300) / (s * budget)) ** (1.0 / s)
        if T > 1e30:
            T = 1e30
            capped = True
        T = max(T, 4.0 * split)
        tail_val = 0.0
        tail_err = sup_est * T ** (-s) / s

    def upper_integrand(v):
        v = np.asarray(v, dtype=float)
        return g(np.exp(v)) * np.exp(-s * v)

    res_up = adaptive_panels(
        upper_integrand,
        np.linspace(math.log(split), math.log(T), max(2, int(3 * math.log10(T / split)) + 1) + 1),
        budget / 4.0,
        spec.rel_tol / 4.0,
        spec.max_panels,
    )
    panels_used += res_up.subdivisions

    value = block_val + res_mid.value + res_up.value + tail_val
    err = block_err + res_mid.err_estimate + res_up.err_estimate + tail_err
    report = EvalReport(value=value, err_estimate=err, panels_used=panels_used, truncation_radius=T)
    tol_final = max(spec.abs_tol, spec.rel_tol * max(abs(value), abs(scale_hint)))
    if err > tol_final * 1.000001 or (capped and tail_err > tol_final):
        raise AccuracyError(
            f"singular integral converged to err {err:.3g} > tolerance {tol_final:.3g}",
            report=report,
        )
    return report


def integrate_tau_inverse(
    h,
    s: float,
    spec: QuadSpec,
    *,
    h_zero: float,
    envelope=None,
    tail_exact=None,
    causal_T: float | None = None,
    scale_hint: float = 1.0,
) -> EvalReport:
    """int_0^inf h(tau) tau^{s-1} dtau for bounded h with h(0+) = h_zero.

    The integral converges at infinity only through decay of h; the caller
    must provide an envelope for |h|, an exact tail, or a causal cutoff
    (h identically zero beyond ``causal_T``).
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"order must lie in (0, 1), got {s}")
    split = spec.tau_split
    budget = max(spec.abs_tol, spec.rel_tol * abs(scale_hint))

    # small tau: h = h_zero + r(tau); model the remainder like the singular case
    t_hi = split * 1e-2

    def rem(tau):
        return h(tau) - h_zero

    taus_p, vals_p = _probe_small(rem, t_hi)
    scale = max(abs(scale_hint), abs(h_zero), float(np.max(np.abs(vals_p))), 1e-300)
    floor = 1e-13 * scale
    fit = _fit_power(taus_p, vals_p, floor, s)
    if fit is None:
        tau_cut = t_hi
        block_val = h_zero * tau_cut**s / s
        block_err = floor * tau_cut**s * 2.0
        q_hat = 1.0
    else:
        q_hat, tau_cut = fit.q, fit.tau_cut
        if q_hat <= 0.0:
            raise AccuracyError("h is not continuous at 0 (fitted remainder order <= 0)")
        block_val = h_zero * tau_cut**s / s + fit.block_value
        block_err = fit.block_err + floor * tau_cut**s

    p = min(max(2.0 / s, 1.0), 16.0)

    def mid_integrand(sigma):
        sigma = np.asarray(sigma, dtype=float)
        return p * h(sigma**p) * sigma ** (p * s - 1.0)

    res_mid = adaptive_panels(
        mid_integrand,
        _log_edges(tau_cut ** (1.0 / p), split ** (1.0 / p), per_decade=4),
        budget / 4.0,
        spec.rel_tol / 4.0,
        spec.max_panels,
    )

    if causal_T is not None:
        T = max(causal_T, split * (1 + 1e-9))
        tail_val, tail_err = 0.0, 0.0
    elif tail_exact is not None:
        T = max(4.0 * split, 8.0)
        tail_val, tail_err = float(tail_exact(T)), 1e-14 * scale
    elif envelope is not None:
        T = max(4.0 * split, envelope.tau_from, 1.0)
        while envelope.tail_integral(T, s) > budget / 4.0 and T < 1e30:
            T *= 4.0
        if envelope.tail_integral(T, s) > budget / 4.0:
            raise UnsupportedGrowthError("decay envelope too weak for the inverse integral")
        tail_val = 0.0
        tail_err = float(envelope.tail_integral(T, s))
    else:
        raise UnsupportedGrowthError(
            "inverse integral needs decay metadata (envelope, exact tail, or causal cutoff)"
        )

    def upper_integrand(v):
        v = np.asarray(v, dtype=float)
        return h(np.exp(v)) * np.exp(s * v)

    res_up = adaptive_panels(
        upper_integrand,
        np.linspace(math.log(split), math.log(T), max(2, int(4 * math.log10(T / split)) + 1) + 1),
        budget / 4.0,
        spec.rel_tol / 4.0,
        spec.max_panels,
    )

    value = block_val + res_mid.value + res_up.value + tail_val
    err = block_err + res_mid.err_estimate + res_up.err_estimate + tail_err
    report = EvalReport(
        value=value,
        err_estimate=err,
        panels_used=res_mid.subdivisions + res_up.subdivisions,
        truncation_radius=T,
    )
    tol_final = max(spec.abs_tol, spec.rel_tol * max(abs(value), abs(scale_hint)))
    if err > tol_final * 1.000001:
        raise AccuracyError(
            f"inverse integral converged to err {err:.3g} > tolerance {tol_final:.3g}", report=report
        )
    return report


# ---------------------------------------------------------------------------
# heat semigroup
# ---------------------------------------------------------------------------


def _gh_rule(m):
    x, w = np.polynomial.hermite.hermgauss(m)
    return x, w / math.sqrt(math.pi)


_GH_CACHE: dict = {}


def _gh(m):
    if m not in _GH_CACHE:
        _GH_CACHE[m] = _gh_rule(m)
    return _GH_CACHE[m]


def heat_semigroup(
    u: SpaceTimeFn,
    p: FracParams,
    tau: float,
    t: float,
    x,
    spec: QuadSpec,
    *,
    use_oracle: bool | None = None,
    abs_tol: float | None = None,
) -> EvalReport:
    """e^{-tau H}u(t,x): Gauss-Weierstrass average of u at time t - tau.

    With ``use_oracle`` unset the closed-form semigroup oracle is used when
    the function carries one; ``use_oracle=False`` forces the spatial
    quadrature route.
    """
    if tau <= 0.0:
        raise DomainError("tau must be positive")
    if p is not None and u.n != p.n:
        raise ParameterError(f"{u.name} lives in R^{u.n}, parameters in R^{p.n}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u.past_zero_time is not None and t - tau < u.past_zero_time:
        return EvalReport(0.0, 0.0, 0, 0.0)
    if use_oracle is None:
        use_oracle = u.semigroup_oracle is not None
    if use_oracle:
        if u.semigroup_oracle is None:
            raise ParameterError(f"{u.name} carries no semigroup oracle")
        val = float(np.asarray(u.semigroup_oracle(tau, t, x)))
        return EvalReport(val, 4e-16 * abs(val), 0, 0.0)

    if not math.isfinite(u.sup_bound) and u.support_radius is None and u.space_exp_rate == 0.0:
        raise UnsupportedGrowthError(
            f"{u.name}: unbounded without an oracle, support radius, or exponential rate"
        )
    tol = abs_tol if abs_tol is not None else spec.abs_tol
    n = u.n
    width = 2.0 * math.sqrt(tau)
    kappa = u.space_exp_rate
    logt = max(math.log(1.0 / max(tol, 1e-300)), 10.0)
    R = spec.tail_cutoff_factor * math.sqrt(4.0 * tau * logt) + 2.0 * kappa * tau

    if n == 1:
        # centered offset coordinate: the Gaussian argument is exact in v,
        # avoiding (z - x) cancellation at tiny tau
        xc = float(x[0])
        lo, hi = -R, R
        tail_mass_out = math.erfc(R / width + 1e-300) if R / width < 30 else 0.0
        if u.support_radius is not None:
            lo2, hi2 = max(lo, -u.support_radius - xc), min(hi, u.support_radius - xc)
            if lo2 >= hi2:
                # window entirely outside the truncation ball; bound by the
                # Gaussian mass over the support
                d = max(abs(xc) - u.support_radius, 0.0)
                mass = math.erfc(d / width) if d / width < 30 else 0.0
                return EvalReport(0.0, u.sup_bound * mass, 0, R)
            lo, hi = lo2, hi2
            tail_mass_out = 0.0  # u vanishes beyond the window

        cuts = [lo, hi]
        for mscale in (0.0, 1.0, -1.0, 2.0, -2.0, 3.5, -3.5, 5.5, -5.5):
            c = mscale * width
            if lo < c < hi:
                cuts.append(c)
        for b in u.space_breakpoints:
            c = b - xc  # u's features sit at absolute positions b
            if lo < c < hi:
                cuts.append(c)
        edges = np.unique(np.asarray(cuts, dtype=float))

        def integrand(vs):
            vs = np.asarray(vs, dtype=float)
            w = np.exp(-(vs * vs) / (4.0 * tau)) / math.sqrt(4.0 * math.pi * tau)
            return w * u.eval(t - tau, xc + vs)

        res = adaptive_panels(integrand, edges, tol, spec.rel_tol, spec.max_panels)
        # scale for the truncated Gaussian tail
        if tail_mass_out > 0.0:
            local = abs(float(np.asarray(u.eval(t - tau, np.array([xc]))))) + 1e-300
            m0 = max(local, u.sup_bound if math.isfinite(u.sup_bound) else local)
            if kappa > 0:
                arg = (R - 2.0 * kappa * tau) / width
                tail_mass_out = math.exp(kappa * abs(xc) + kappa**2 * tau) * (
                    math.erfc(arg) if arg < 30 else 0.0
                )
            tail_err = m0 * tail_mass_out
        else:
            tail_err = 0.0
        return EvalReport(res.value, res.err_estimate + tail_err, res.subdivisions, R)

    # n >= 2: tensor Gauss-Hermite with an embedded coarse rule
    if kappa > 0.0:
        raise UnsupportedGrowthError("exponential space growth is supported in one dimension only")
    vals = []
    for m in (24, 40):
        nodes, wts = _gh(m)
        grids = np.meshgrid(*([nodes] * n), indexing="ij")
        wgrids = np.meshgrid(*([wts] * n), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)  # (m^n, n)
        wprod = np.ones(pts.shape[0])
        for wg in wgrids:
            wprod *= wg.ravel()
        args = x[None, :] - width * pts
        fv = np.asarray(u.eval(t - tau, args), dtype=float)
        vals.append(float(fv @ wprod))
    err = abs(vals[1] - vals[0])
    sup = u.sup_bound if math.isfinite(u.sup_bound) else abs(vals[1])
    tail = sup * n * math.erfc(float(np.max(np.abs(_gh(40)[0]))))
    return EvalReport(vals[1], err + tail, 0, width * float(np.max(np.abs(_gh(40)[0]))))


def heat_difference(
    u: SpaceTimeFn,
    p: FracParams,
    tau: float,
    t: float,
    x,
    spec: QuadSpec,
    *,
    abs_tol: float | None = None,
) -> EvalReport:
    """u(t,x) - e^{-tau H}u(t,x) with the difference inside the average.

    Integrating W(tau, v) (u(t,x) - u(t-tau, x+v)) avoids the outer
    cancellation of two order-one values, so the result keeps absolute
    accuracy far below one ulp of u.  This is the integrand of the
    two-variable kernel formula, spatial part first.
    """
    if tau <= 0.0:
        raise DomainError("tau must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    uval = float(np.asarray(u.eval(t, x)))
    if u.past_zero_time is not None and t - tau < u.past_zero_time:
        return EvalReport(uval, 0.0, 0, 0.0)
    if not math.isfinite(u.sup_bound) and u.support_radius is None and u.space_exp_rate == 0.0:
        raise UnsupportedGrowthError(
            f"{u.name}: unbounded without an oracle, support radius, or exponential rate"
        )
    tol = abs_tol if abs_tol is not None else spec.abs_tol
    n = u.n
    width = 2.0 * math.sqrt(tau)
    kappa = u.space_exp_rate
    logt = max(math.log(1.0 / max(tol, 1e-300)), 10.0)
    R = spec.tail_cutoff_factor * math.sqrt(4.0 * tau * logt) + 2.0 * kappa * tau

    if n == 1:
        xc = float(x[0])
        lo, hi = -R, R
        u_outside = True
        if u.support_radius is not None:
            lo2, hi2 = max(lo, -u.support_radius - xc), min(hi, u.support_radius - xc)
            if lo2 >= hi2:
                return EvalReport(uval, 0.0, 0, R)
            lo, hi = lo2, hi2
            u_outside = False
        cuts = [lo, hi]
        for mscale in (0.0, 1.0, -1.0, 2.0, -2.0, 3.5, -3.5, 5.5, -5.5):
            c = mscale * width
            if lo < c < hi:
                cuts.append(c)
        for b in u.space_breakpoints:
            c = b - xc
            if lo < c < hi:
                cuts.append(c)
        edges = np.unique(np.asarray(cuts, dtype=float))

        def integrand(vs):
            vs = np.asarray(vs, dtype=float)
            w = np.exp(-(vs * vs) / (4.0 * tau)) / math.sqrt(4.0 * math.pi * tau)
            return w * (uval - np.asarray(u.eval(t - tau, xc + vs), dtype=float))

        res = adaptive_panels(integrand, edges, tol, spec.rel_tol, spec.max_panels)
        # the u(t,x)-part outside the window is exact Gaussian mass
        mass_win = 0.5 * (math.erf(hi / width) - math.erf(lo / width))
        value = res.value + uval * (1.0 - mass_win)
        tail_err = 0.0
        if u_outside:
            local = abs(float(np.asarray(u.eval(t - tau, np.array([xc]))))) + 1e-300
            m0 = max(local, u.sup_bound if math.isfinite(u.sup_bound) else local)
            if kappa > 0:
                arg = (R - 2.0 * kappa * tau) / width
                out_mass = math.exp(kappa * abs(xc) + kappa**2 * tau) * (
                    math.erfc(arg) if arg < 30 else 0.0
                )
            else:
                out_mass = math.erfc(R / width) if R / width < 30 else 0.0
            tail_err = m0 * out_mass
        return EvalReport(value, res.err_estimate + tail_err, res.subdivisions, R)

    if kappa > 0.0:
        raise UnsupportedGrowthError("exponential space growth is supported in one dimension only")
    vals = []
    for m in (24, 40):
        nodes, wts = _gh(m)
        grids = np.meshgrid(*([nodes] * n), indexing="ij")
        wgrids = np.meshgrid(*([wts] * n), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wprod = np.ones(pts.shape[0])
        for wg in wgrids:
            wprod *= wg.ravel()
        args = x[None, :] - width * pts
        fv = uval - np.asarray(u.eval(t - tau, args), dtype=float)
        vals.append(float(fv @ wprod))
    err = abs(vals[1] - vals[0])
    sup = u.sup_bound if math.isfinite(u.sup_bound) else abs(uval)
    tail = (abs(uval) + sup) * n * math.erfc(float(np.max(np.abs(_gh(40)[0]))))
    return EvalReport(vals[1], err + tail, 0, width * float(np.max(np.abs(_gh(40)[0]))))


def heat_diff_values(u, p, taus, t, x, spec, *, use_oracle=None, abs_tol=None):
    """u(t,x) - e^{-tau H}u(t,x) over an array of tau values."""
    taus = np.asarray(taus, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if use_oracle is None:
        use_oracle = u.semigroup_oracle is not None
    if use_oracle:
        if u.hs_increment_oracle is not None:
            vals = np.asarray(u.hs_increment_oracle(taus, t, x), dtype=float)
            return vals, 4e-16 * np.abs(vals)
        uval = float(np.asarray(u.eval(t, x)))
        vals = uval - np.asarray(u.semigroup_oracle(taus, t, x), dtype=float)
        return vals, 2e-16 * (abs(uval) + np.abs(vals)) + 0.0 * taus
    out = np.empty_like(taus)
    errs = np.empty_like(taus)
    for i, tv in np.ndenumerate(taus):
        rep = heat_difference(u, p, float(tv), t, x, spec, abs_tol=abs_tol)
        out[i] = rep.value
        errs[i] = rep.err_estimate
    return out, errs


def heat_values(u, p, taus, t, x, spec, *, use_oracle=None, abs_tol=None):
    """e^{-tau H}u(t,x) over an array of tau values.

    Returns (values, errs).  The oracle path is vectorized; the quadrature
    path loops (each spatial integral is itself vectorized).
    """
    taus = np.asarray(taus, dtype=float)
    if use_oracle is None:
        use_oracle = u.semigroup_oracle is not None
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if use_oracle:
        vals = np.asarray(u.semigroup_oracle(taus, t, x), dtype=float)
        return vals, 4e-16 * np.abs(vals)
    out = np.empty_like(taus)
    errs = np.empty_like(taus)
    for i, tv in np.ndenumerate(taus):
        rep = heat_semigroup(u, p, float(tv), t, x, spec, use_oracle=False, abs_tol=abs_tol)
        out[i] = rep.value
        errs[i] = rep.err_estimate
    return out, errs


def heat_action_grid(u, taus, ts, xs, *, m_nodes=64):
    """Fixed Gauss-Hermite heat action on a (point, tau) grid, n = 1 only.

    Returns a matrix of shape (len(ts), len(taus)).  A fixed rule trades
    per-tau adaptivity for one fully vectorized evaluation; adequate for
    sup-norm estimation and field tabulation (relative accuracy ~1e-3 even
    across integrable kinks), not for certified point values.
    """
    if u.n != 1:
        raise ParameterError("heat_action_grid supports n = 1")
    taus = np.asarray(taus, dtype=float)
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    nodes, wts = _gh(m_nodes)
    widths = 2.0 * np.sqrt(taus)  # (T,)
    args_x = xs[:, None, None] - widths[None, :, None] * nodes[None, None, :]  # (P,T,M)
    args_t = ts[:, None, None] - taus[None, :, None]
    vals = np.asarray(u.eval(args_t, args_x), dtype=float)
    out = vals @ wts
    if u.past_zero_time is not None:
        out = np.where(ts[:, None] - taus[None, :] < u.past_zero_time, 0.0, out)
    return out


# ---------------------------------------------------------------------------
# subordinated Poisson semigroup P_y = e^{-y H^{1/2}} and its y-derivatives
# ---------------------------------------------------------------------------


def _subordination_weight_dy(taus, y, k):
    """d^k/dy^k of the subordination weight q_y(tau) = y e^{-y^2/4tau} / (2 sqrt(pi) tau^{3/2})."""
    taus = np.asarray(taus, dtype=float)
    b = 1.0 / (4.0 * taus)
    sb = np.sqrt(b)
    arg = sb * y
    hk = np.polynomial.hermite.hermval(arg, [0.0] * k + [1.0]) if k >= 1 else 1.0
    hkm1 = np.polynomial.hermite.hermval(arg, [0.0] * (k - 1) + [1.0]) if k >= 1 else 0.0
    if k == 0:
        poly = y + 0.0 * taus
    else:
        poly = (y * hk + k * hkm1 / sb) * (-sb) ** k
    return poly * np.exp(-b * y * y) / (2.0 * math.sqrt(math.pi) * taus**1.5)


def _erf_dy(y, T, k):
    """d^k/dy^k of erf(y / (2 sqrt(T))), the subordination tail mass."""
    c = 1.0 / (2.0 * math.sqrt(T))
    if k == 0:
        return math.erf(c * y)
    # d^j/dz^j erf(z) = 2/sqrt(pi) (-1)^{j-1} H_{j-1}(z) e^{-z^2}
    z = c * y
    h = np.polynomial.hermite.hermval(z, [0.0] * (k - 1) + [1.0])
    return 2.0 / math.sqrt(math.pi) * (-1.0) ** (k - 1) * h * math.exp(-z * z) * c**k


def subordinated_action(
    u: SpaceTimeFn,
    y: float,
    t: float,
    x,
    spec: QuadSpec,
    *,
    k: int = 0,
    use_oracle: bool | None = None,
) -> EvalReport:
    """d^k/dy^k P_y u(t,x), the subordinated Poisson semigroup action.

    P_y u = int_0^inf q_y(tau) e^{-tau H}u(t,x) dtau with the explicit
    one-sided stable weight q_y; y-derivatives differentiate q_y in closed
    form under the integral sign.
    """
    if y <= 0.0:
        raise DomainError("y must be positive")
    if k < 0 or k > 5:
        raise ParameterError("derivative order must lie in 0..5")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if use_oracle is None:
        use_oracle = u.poisson_oracle is not None
    if use_oracle:
        if k == 0:
            val = float(np.asarray(u.poisson_oracle(y, t, x)))
        else:
            if u.poisson_dy_oracle is None:
                raise ParameterError(f"{u.name} carries no subordinated derivative oracle")
            val = float(np.asarray(u.poisson_dy_oracle(k, y, t, x)))
        return EvalReport(val, 4e-16 * abs(val), 0, 0.0)

    heat_oracle = u.semigroup_oracle is not None
    tol = spec.abs_tol

    # numeric window [tau_lo, T]: below tau_lo the weight mass is negligible,
    # beyond T the constant part of e^{-tau H}u is integrated analytically
    logt = max(math.log(1.0 / max(tol, 1e-300)), 10.0)
    tau_lo = y * y / (4.0 * (logt + 2.0 * k + 4.0))
    limit = u.heat_limit_value(t, x)
    env = u.heat_decay
    if u.past_zero_time is not None:
        limit = 0.0  # the semigroup value itself vanishes beyond the causal window
        T = max(t - u.past_zero_time, 2.0 * tau_lo)
        tail_val, tail_err = 0.0, 0.0
    elif env is not None:
        T = max(8.0, 16.0 * tau_lo, y * y, env.tau_from)
        while (
            _dyk_weight_bound(y, T, k) * env.tail_integral(T, -0.5) / (2.0 * math.sqrt(math.pi))
            > tol / 4.0
            and T < 1e26
        ):
            T *= 4.0
        tail_err = float(
            _dyk_weight_bound(y, T, k) * env.tail_integral(T, -0.5) / (2.0 * math.sqrt(math.pi))
        )
        tail_val = limit * _tail_mass_dy(y, T, k)
    else:
        sup = u.sup_bound if math.isfinite(u.sup_bound) else 1.0
        if k == 0:
            T = (4.0 * sup * y / (math.sqrt(math.pi) * tol)) ** 2.0
        else:
            T = 1e8
        T = min(max(T, 16.0 * tau_lo, 8.0), 1e26)
        tail_val = 0.0
        if k == 0:
            tail_err = sup * abs(_tail_mass_dy(y, T, 0))
        else:
            tail_err = sup * _dyk_weight_bound(y, T, k) * T ** (-0.5) / math.sqrt(math.pi)

    heat_errs: list = []

    def integrand(taus):
        taus = np.asarray(taus, dtype=float)
        w = _subordination_weight_dy(taus, y, k)
        if heat_oracle:
            hv = np.asarray(u.semigroup_oracle(taus, t, x), dtype=float)
        else:
            hv = np.empty_like(taus)
            for i, tv in np.ndenumerate(taus):
                rep = heat_semigroup(
                    u, None, float(tv), t, x, spec, use_oracle=False, abs_tol=tol * 1e-2
                )
                hv[i] = rep.value
                heat_errs.append(rep.err_estimate)
        return w * (hv - limit)

    edges = _log_edges(tau_lo, T, per_decade=4)
    res = adaptive_panels(integrand, edges, tol / 2.0, spec.rel_tol, spec.max_panels)
    # mass below tau_lo (weight is tiny there) and spatial-quadrature noise,
    # scaled by the L1 mass of the k-th kernel derivative (~ 1/y^k)
    sup_local = u.sup_bound if math.isfinite(u.sup_bound) else abs(limit) + 1.0
    below = abs(_tail_mass_dy(y, tau_lo, k) - _zero_mass_dy(y, k)) * (sup_local + abs(limit))
    noise = 3.0 * max(heat_errs) / y**k if heat_errs else 0.0
    value = res.value + limit * _zero_head_correction(y, tau_lo, T, k) + tail_val
    err = res.err_estimate + tail_err + below + noise
    return EvalReport(value, err, res.subdivisions, T)


def _tail_mass_dy(y, T, k):
    """d^k/dy^k of int_T^inf q_y = erf(y/(2 sqrt(T)))."""
    return float(_erf_dy(y, T, k))


def _zero_mass_dy(y, k):
    """d^k/dy^k of the full weight mass (1 for all y): nonzero only at k = 0."""
    return 1.0 if k == 0 else 0.0


def _zero_head_correction(y, tau_lo, T, k):
    """d^k/dy^k of int_{tau_lo}^{T} q_y dtau, the limit's numeric-window mass.

    The integrand above subtracts the limit, so its contribution over the
    numeric window is restored analytically here:
    int_{tau_lo}^{T} q_y = erf(y/(2 sqrt(tau_lo))) - erf(y/(2 sqrt(T))).
    """
    return float(_erf_dy(y, tau_lo, k) - _erf_dy(y, T, k))


def _dyk_weight_bound(y, T, k):
    """C with |d^k/dy^k q_y(tau)| <= C tau^{-3/2} / (2 sqrt(pi)) for tau >= T.

    Measured on a log grid (the closed-form derivative is cheap); a 1.5x
    safety factor covers the sampling.
    """
    taus = T * np.geomspace(1.0, 1e12, 25)
    w = np.abs(_subordination_weight_dy(taus, y, k)) * taus**1.5 * (2.0 * math.sqrt(math.pi))
    return 1.5 * float(np.max(w)) + 1e-300


def poisson_values(u, taus, t, x, spec, *, use_oracle=None):
    """P_tau u(t,x) over an array of tau values (vectorized oracle path)."""
    taus = np.asarray(taus, dtype=float)
    if use_oracle is None:
        use_oracle = u.poisson_oracle is not None
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if use_oracle:
        vals = np.asarray(u.poisson_oracle(taus, t, x), dtype=float)
        return vals, 4e-16 * np.abs(vals)
    out = np.empty_like(taus)
    errs = np.empty_like(taus)
    for i, tv in np.ndenumerate(taus):
        rep = subordinated_action(u, float(tv), t, x, spec, k=0, use_oracle=False)
        out[i] = rep.value
        errs[i] = rep.err_estimate
    return out, errs


# ---------------------------------------------------------------------------
# weighted half-space integrals (Almgren functionals)
# ---------------------------------------------------------------------------


def integrate_halfspace_weighted(
    F,
    a: float,
    spec: QuadSpec,
    *,
    n_space: int,
    half_width: float,
) -> EvalReport:
    """int_{R^n x (0,inf)} y^a F(x, y) dx dy for Gaussian-decaying F.

    F maps an array of points with last axis (x_1..x_n, y) to values.
    The y-integral substitutes y = w^{2/(a+1)} so the A_2 weight y^a turns
    into a linear factor; x-axes are truncated at ``half_width`` (declared
    Gaussian decay).  Tensor-product panels with an embedded coarse rule;
    refined by doubling until the error estimate meets the tolerance.
    """
    if not (-1.0 < a < 1.0):
        raise ParameterError(f"weight exponent must lie in (-1, 1), got {a}")
    if n_space + 1 > 3:
        raise ParameterError("tensor quadrature supports n + 1 <= 3 dimensions")
    L = half_width
    ex = 2.0 / (a + 1.0)
    W = L ** (1.0 / ex)

    def G(pts_xw):
        # pts_xw: (..., n_space+1), last coordinate is w
        w = pts_xw[..., -1]
        y = w**ex
        X = np.concatenate([pts_xw[..., :-1], y[..., None]], axis=-1)
        return ex * w * F(X)

    fracs = np.array([0.0, 0.12, 0.25, 0.4, 0.6, 0.8, 1.0])
    x_edges = np.concatenate([-L * fracs[::-1], L * fracs[1:]])
    w_edges = W * fracs

    def tensor_value(refine):
        axes = []
        for edges in [x_edges] * n_space + [w_edges]:
            e = edges
            for _ in range(refine):
                e = np.sort(np.concatenate([e, 0.5 * (e[:-1] + e[1:])]))
            axes.append(e)
        vals = {}
        for rule_x, rule_w in ((_G20_X, _G20_W), (_G10_X, _G10_W)):
            pts_1d = []
            wts_1d = []
            for e in axes:
                mid = 0.5 * (e[:-1] + e[1:])[:, None]
                half = 0.5 * (e[1:] - e[:-1])[:, None]
                pts_1d.append((mid + half * rule_x).ravel())
                wts_1d.append((np.broadcast_to(rule_w, (len(mid), len(rule_w))) * half).ravel())
            grids = np.meshgrid(*pts_1d, indexing="ij")
            stacked = np.stack([g.ravel() for g in grids], axis=-1)
            gv = np.asarray(G(stacked), dtype=float).reshape([len(q) for q in pts_1d])
            total = gv
            for axis in range(len(wts_1d) - 1, -1, -1):
                total = np.tensordot(total, wts_1d[axis], axes=([axis], [0]))
            vals[len(rule_x)] = float(total)
        return vals[20], abs(vals[20] - vals[10])

    value, err = tensor_value(0)
    refine = 0
    while err > max(spec.abs_tol, spec.rel_tol * abs(value)) and refine < 3:
        refine += 1
        value, err = tensor_value(refine)
    return EvalReport(value, err, panels_used=(len(x_edges) - 1) * 2**refine, truncation_radius=L)
