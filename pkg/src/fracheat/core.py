"""Domain types, derived constants and the test-function library.

Conventions used throughout the package: a space-time point is ``(t, x)``
with ``t`` a float (or array) and ``x`` an array whose last axis has
length ``n``; plain floats are accepted for ``x`` when ``n == 1``.
All evaluation maps are vectorized over leading axes and pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import mpmath
import numpy as np

__all__ = [
    "ParameterError",
    "DomainError",
    "AccuracyError",
    "UnsupportedGrowthError",
    "PreconditionError",
    "FracParams",
    "QuadSpec",
    "EvalReport",
    "SpaceTimeFn",
    "ZeroEnvelope",
    "ExpEnvelope",
    "PowerEnvelope",
    "abs_gamma_neg",
    "make_params",
    "as_point",
    "smooth_cutoff",
    "testlib_plane_wave",
    "testlib_constant",
    "testlib_caloric_exponential",
    "testlib_windowed_power",
    "testlib_bump",
    "testlib_gaussian_dip",
    "testlib_shifted_heat_kernel",
    "testlib_windowed_plane_wave",
    "audit_growth_class",
]

GROWTH_CLASSES = ("bounded", "gaussian-subcritical", "exponential-in-t")


class ParameterError(ValueError):
    """Invalid parameter (out of range order, bad dimension, ...)."""


class DomainError(ValueError):
    """Evaluation outside a kernel's domain (tau <= 0, y <= 0, ...)."""


class AccuracyError(RuntimeError):
    """Quadrature could not meet the requested tolerance.

    Carries the best-effort report in ``.report`` when one exists.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedGrowthError(ValueError):
    """Function growth/decay metadata rules out the requested integral."""


class PreconditionError(ValueError):
    """A sampled audit of a caller-asserted hypothesis failed."""


def abs_gamma_neg(s: float) -> float:
    """|Gamma(-s)| for 0 < s < 1, via Gamma(2-s)/(s(1-s)).

    The recurrence keeps the evaluation away from the poles at 0 and -1,
    so the result stays accurate as s -> 0+ or s -> 1-.
    """
    return math.gamma(2.0 - s) / (s * (1.0 - s))


@dataclass(frozen=True)
class FracParams:
    """Order/dimension pair (s, n) with the derived kernel constants."""

    s: float
    n: int
    c_ks: float        # 1 / ((4 pi)^{n/2} |Gamma(-s)|)
    c_kneg: float      # 1 / ((4 pi)^{n/2} Gamma(s))
    c_neumann1: float  # |Gamma(-s)| / (4^s Gamma(s))
    a: float           # extension weight exponent 1 - 2s


def make_params(s: float, n: int) -> FracParams:
    """Validate (s, n) and compute the derived constants."""
    if not (0.0 < s < 1.0):
        raise ParameterError(f"order s must lie in (0, 1), got {s}")
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= 3):
        raise ParameterError(f"dimension n must be an integer in 1..3, got {n}")
    gneg = abs_gamma_neg(s)
    four_pi = (4.0 * math.pi) ** (n / 2.0)
    return FracParams(
        s=float(s),
        n=int(n),
        c_ks=1.0 / (four_pi * gneg),
        c_kneg=1.0 / (four_pi * math.gamma(s)),
        c_neumann1=gneg / (4.0**s * math.gamma(s)),
        a=1.0 - 2.0 * s,
    )


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances and truncation controls for the integration engine."""

    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    tau_split: float = 1.0
    tail_cutoff_factor: float = 1.0
    max_panels: int = 4000

    def __post_init__(self):
        if not (0.0 < self.abs_tol < 1.0) or not (0.0 < self.rel_tol < 1.0):
            raise ParameterError("abs_tol and rel_tol must lie in (0, 1)")
        if self.tau_split <= 0.0:
            raise ParameterError("tau_split must be positive")
        if self.tail_cutoff_factor <= 0.0:
            raise ParameterError("tail_cutoff_factor must be positive")
        if self.max_panels < 8:
            raise ParameterError("max_panels must be at least 8")


@dataclass(frozen=True)
class EvalReport:
    """A computed value together with its accuracy bookkeeping."""

    value: float
    err_estimate: float
    panels_used: int = 0
    truncation_radius: float = 0.0


# ---------------------------------------------------------------------------
# decay envelopes: assert |e^{-tau H}u(t,x) - limit| <= value(tau) for
# tau >= tau_from, with value nonincreasing.  tail_integral(T, expo) bounds
# int_T^inf value(tau) tau^{expo-1} dtau.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroEnvelope:
    tau_from: float = 0.0

    def value(self, tau):
        return 0.0

    def tail_integral(self, T, expo):
        return 0.0


@dataclass(frozen=True)
class ExpEnvelope:
    coef: float
    rate: float
    power: float = 0.0
    tau_from: float = 0.0

    def value(self, tau):
        return self.coef * tau ** (-self.power) * math.exp(-self.rate * tau)

    def tail_integral(self, T, expo):
        # int_T^inf coef tau^{expo-1-power} e^{-rate tau} dtau
        #   = coef rate^{power-expo} Gamma(expo-power, rate T)
        a = expo - self.power
        val = mpmath.gammainc(a, a=self.rate * T)
        return float(self.coef * self.rate ** (-a) * val)


@dataclass(frozen=True)
class PowerEnvelope:
    coef: float
    power: float
    tau_from: float = 0.0

    def value(self, tau):
        return self.coef * tau ** (-self.power)

    def tail_integral(self, T, expo):
        if self.power <= expo:
            return math.inf
        return self.coef * T ** (expo - self.power) / (self.power - expo)


@dataclass(frozen=True)
class SpaceTimeFn:
    """An evaluatable function u(t, x) with growth/decay metadata.

    Required: ``eval``, a bound, and a growth class.  Everything else is
    optional metadata the integration engine exploits when present:
    closed-form semigroup actions, exact integral tails, decay envelopes,
    support information.  Oracles must be consistent with ``eval``
    (``semigroup_oracle(tau,.,.) -> eval`` as tau -> 0+); this is
    spot-checked by the test suite, and trusted elsewhere.
    """

    eval: Callable
    sup_bound: float
    growth_class: str
    n: int = 1
    name: str = "fn"
    # closed-form semigroup actions
    semigroup_oracle: Optional[Callable] = None    # (tau, t, x) -> e^{-tau H}u
    hs_increment_oracle: Optional[Callable] = None  # (tau,t,x) -> u - e^{-tau H}u, cancellation-free
    poisson_oracle: Optional[Callable] = None      # (y, t, x)  -> e^{-y H^{1/2}}u
    poisson_dy_oracle: Optional[Callable] = None   # (k, y, t, x) -> d^k/dy^k of the above
    # Hoelder metadata: (alpha, seminorm bound)
    holder_meta: Optional[tuple] = None
    # large-tau behaviour of e^{-tau H}u(t,x): limit (float or "self") + envelope
    heat_limit: object = 0.0
    heat_decay: Optional[object] = None
    poisson_limit: object = 0.0
    poisson_decay: Optional[object] = None
    # exact integral tails (override the envelope route when present)
    hs_tail: Optional[Callable] = None    # (t,x,T,s)   int_T^inf (u - e^{-tau H}u) tau^{-1-s} dtau
    incr_oracle: Optional[Callable] = None  # (m, tau, t, x) -> (P_tau - I)^m u, cancellation-free
    incr_tail: Optional[Callable] = None  # (t,x,T,s,m) int_T^inf ((P_tau - I)^m u) tau^{-1-2s} dtau
    ext_tail: Optional[Callable] = None   # (t,x,T,s,y) int_T^inf e^{-y^2/4tau} e^{-tau H}u tau^{-1-s} dtau
    # structural metadata
    support_radius: Optional[float] = None   # u(t,x) == 0 for |x| > radius
    past_zero_time: Optional[float] = None   # u(t,.) == 0 for t < this
    space_exp_rate: float = 0.0              # |u| <= local scale * e^{rate |x|}
    space_breakpoints: tuple = ()            # kink/edge locations (n == 1)
    time_independent: bool = False
    l1_bound: Optional[float] = None         # sup_t ||u(t,.)||_{L^1(dx)}

    def __call__(self, t, x):
        return self.eval(t, x)

    def with_(self, **kw):
        return replace(self, **kw)

    def heat_limit_value(self, t, x):
        if isinstance(self.heat_limit, str) and self.heat_limit == "self":
            return float(self.eval(t, x))
        return float(self.heat_limit)

    def poisson_limit_value(self, t, x):
        if isinstance(self.poisson_limit, str) and self.poisson_limit == "self":
            return float(self.eval(t, x))
        return float(self.poisson_limit)


def as_point(x, n: int) -> np.ndarray:
    """Coerce a scalar/sequence to a float vector of length n."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (n,):
        raise ParameterError(f"expected a point in R^{n}, got shape {arr.shape}")
    return arr


def _radii(x, n):
    """|x| over the last axis; accepts scalars for n == 1."""
    arr = np.asarray(x, dtype=float)
    if n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        return np.abs(arr)
    return np.sqrt(np.sum(arr * arr, axis=-1))


def _first_coord(x, n):
    arr = np.asarray(x, dtype=float)
    if n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        return arr
    return arr[..., 0]


def smooth_cutoff(r, w):
    """Quintic smoothstep cutoff: 1 on r <= w, 0 on r >= 2w, C^2 between.

    A fixed polynomial profile so that every implementation of the test
    library produces bit-comparable values.
    """
    r = np.asarray(r, dtype=float)
    q = np.clip((r - w) / w, 0.0, 1.0)
    step = q * q * q * (10.0 + q * (-15.0 + 6.0 * q))
    return 1.0 - step


# ---------------------------------------------------------------------------
# test-function library
# ---------------------------------------------------------------------------


def testlib_plane_wave(rho: float, xi, phase: float = 0.0) -> SpaceTimeFn:
    """u(t,x) = cos(rho t + xi.x + phase), with closed-form semigroup actions.

    The heat semigroup acts by e^{-tau|xi|^2} cos(rho(t-tau) + xi.x + phase);
    the subordinated semigroup multiplies by e^{-y nu} with nu = (i rho + |xi|^2)^{1/2}.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = xi.size
    sq = float(xi @ xi)
    rho = float(rho)
    mu = complex(sq, rho)
    nu = np.sqrt(complex(mu)) if mu != 0 else 0.0 + 0.0j

    def theta(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            dot = x * xi[0]
        else:
            dot = x @ xi
        return rho * t + dot + phase

    def ev(t, x):
        return np.cos(theta(t, x))

    def sg(tau, t, x):
        tau = np.asarray(tau, dtype=float)
        return np.exp(-tau * sq) * np.cos(theta(t, x) - rho * tau)

    def pg(y, t, x):
        y = np.asarray(y, dtype=float)
        return np.exp(-y * nu.real) * np.cos(theta(t, x) - y * nu.imag)

    def pg_dy(k, y, t, x):
        y = np.asarray(y, dtype=float)
        amp = (-nu) ** k
        z = amp * np.exp(-y * nu) * np.exp(1j * theta(t, x))
        return np.real(z)

    def incr(m, tau, t, x):
        # (e^{-tau nu} - 1)^m without cancellation: e^{-z}-1 = -2 e^{-z/2} sinh(z/2)
        tau = np.asarray(tau, dtype=float)
        z = tau * nu
        diff = -2.0 * np.exp(-z / 2.0) * np.sinh(z / 2.0)
        return np.real(np.exp(1j * theta(t, x)) * diff**m)

    def hs_incr(tau, t, x):
        # u - e^{-tau H}u = Re[e^{i theta} (1 - e^{-mu tau})], stable form
        tau = np.asarray(tau, dtype=float)
        z = tau * mu
        one_minus = 2.0 * np.exp(-z / 2.0) * np.sinh(z / 2.0)
        return np.real(np.exp(1j * theta(t, x)) * one_minus)

    def hs_tail(t, x, T, s):
        # int_T^inf (u - e^{-mu tau} style) tau^{-1-s} dtau for the wave phase
        th = float(theta(t, x))
        if mu == 0:
            return 0.0
        head = math.cos(th) * T ** (-s) / s
        g = complex(mpmath.gammainc(-s, a=mu * T))
        return head - (np.exp(1j * th) * mu**s * g).real

    def incr_tail(t, x, T, s, m):
        th = float(theta(t, x))
        total = ((-1.0) ** m) * math.cos(th) * T ** (-2 * s) / (2 * s)
        for j in range(1, m + 1):
            if mu == 0:
                continue
            coef = math.comb(m, j) * (-1.0) ** (m - j)
            g = complex(mpmath.gammainc(-2 * s, a=j * nu * T))
            total += coef * (np.exp(1j * th) * (j * nu) ** (2 * s) * g).real
        return total

    def ext_tail(t, x, T, s, y):
        th = float(theta(t, x))
        if mu == 0:
            from scipy.special import gammainc as reg_lower

            val = (4.0 / y**2) ** s * reg_lower(s, y**2 / (4.0 * T)) * math.gamma(s)
            return math.cos(th) * val
        total = 0.0 + 0.0j
        term_scale = 1.0
        for k in range(0, 40):
            g = complex(mpmath.gammainc(-s - k, a=mu * T))
            term = term_scale * mu ** (s + k) * g
            total += term
            if abs(term) < 1e-18:
                break
            term_scale *= -(y**2) / 4.0 / (k + 1)
        return (np.exp(1j * th) * total).real

    if sq > 0:
        decay = ExpEnvelope(coef=1.0, rate=sq)
    elif rho == 0.0:
        decay = ZeroEnvelope()
    else:
        decay = None  # oscillatory; the exact tails above take over
    return SpaceTimeFn(
        eval=ev,
        sup_bound=1.0,
        growth_class="bounded",
        n=n,
        name=f"plane_wave(rho={rho}, xi={list(xi)})",
        semigroup_oracle=sg,
        hs_increment_oracle=hs_incr,
        poisson_oracle=pg,
        poisson_dy_oracle=pg_dy,
        heat_limit="self" if mu == 0 else 0.0,
        heat_decay=decay,
        poisson_limit="self" if mu == 0 else 0.0,
        poisson_decay=ExpEnvelope(coef=1.0, rate=nu.real) if nu.real > 0 else (ZeroEnvelope() if mu == 0 else None),
        hs_tail=hs_tail,
        incr_oracle=incr,
        incr_tail=incr_tail,
        ext_tail=ext_tail,
        holder_meta=None,
    )


def testlib_constant(c: float = 1.0, n: int = 1) -> SpaceTimeFn:
    """The constant function c, a fixed point of every semigroup here."""
    c = float(c)

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        r = _radii(x, n)
        return np.full(np.broadcast_shapes(t.shape, np.shape(r)), c)

    return SpaceTimeFn(
        eval=ev,
        sup_bound=abs(c),
        growth_class="bounded",
        n=n,
        name=f"constant({c})",
        semigroup_oracle=lambda tau, t, x: ev(t, x),
        hs_increment_oracle=lambda tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        poisson_oracle=lambda y, t, x: ev(t, x),
        poisson_dy_oracle=lambda k, y, t, x: 0.0 * ev(t, x),
        heat_limit="self",
        heat_decay=ZeroEnvelope(),
        poisson_limit="self",
        poisson_decay=ZeroEnvelope(),
        hs_tail=lambda t, x, T, s: 0.0,
        incr_oracle=lambda m, tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        incr_tail=lambda t, x, T, s, m: 0.0,
        time_independent=True,
    )


def testlib_caloric_exponential() -> SpaceTimeFn:
    """u(t,x) = e^{x_1 + t} on R x R: globally caloric, a semigroup fixed point."""

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        x1 = _first_coord(x, 1)
        return np.exp(x1 + t)

    def ext_tail(t, x, T, s, y):
        from scipy.special import gammainc as reg_lower

        val = (4.0 / y**2) ** s * reg_lower(s, y**2 / (4.0 * T)) * math.gamma(s)
        return float(ev(t, x)) * val

    return SpaceTimeFn(
        eval=ev,
        sup_bound=math.inf,
        growth_class="exponential-in-t",
        n=1,
        name="caloric_exponential",
        semigroup_oracle=lambda tau, t, x: ev(t, x),
        hs_increment_oracle=lambda tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        poisson_oracle=lambda y, t, x: ev(t, x),
        poisson_dy_oracle=lambda k, y, t, x: 0.0 * ev(t, x),
        heat_limit="self",
        heat_decay=ZeroEnvelope(),
        poisson_limit="self",
        poisson_decay=ZeroEnvelope(),
        hs_tail=lambda t, x, T, s: 0.0,
        incr_oracle=lambda m, tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        incr_tail=lambda t, x, T, s, m: 0.0,
        ext_tail=ext_tail,
        space_exp_rate=1.0,
    )


def _ball_volume(n):
    return {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}[n]


def _sphere_area(n):
    # surface measure of the unit sphere in R^n
    return {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[n]


def testlib_windowed_power(alpha: float, window_radius: float = 1.0, n: int = 1) -> SpaceTimeFn:
    """u(t,x) = |x|^alpha eta(|x|): time-independent Hoelder probe of exponent alpha.

    eta is the fixed quintic cutoff, identically 1 on |x| <= window_radius and
    0 outside twice that.
    """
    if not (0.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha}")
    if window_radius <= 0.0:
        raise ParameterError("window_radius must be positive")
    w = float(window_radius)

    def ev(t, x):
        r = _radii(x, n)
        out = r**alpha * smooth_cutoff(r, w)
        return out + 0.0 * np.asarray(t, dtype=float)

    # sup of r^alpha eta(r) on a fine fixed grid (profile is smooth, peak near r = w..2w)
    rr = np.linspace(0.0, 2.0 * w, 4097)
    sup = float(np.max(rr**alpha * smooth_cutoff(rr, w)))
    l1 = float(np.trapezoid(rr ** (alpha + n - 1) * smooth_cutoff(rr, w), rr) * _sphere_area(n))
    four_pi = (4.0 * math.pi) ** (n / 2.0)
    bps = (-2.0 * w, -w, 0.0, w, 2.0 * w) if n == 1 else ()
    return SpaceTimeFn(
        eval=ev,
        sup_bound=sup,
        growth_class="bounded",
        n=n,
        name=f"windowed_power(alpha={alpha}, w={w})",
        heat_limit=0.0,
        heat_decay=PowerEnvelope(coef=l1 / four_pi, power=n / 2.0),
        poisson_limit=0.0,
        poisson_decay=PowerEnvelope(
            coef=l1 * math.gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0), power=float(n)
        ),
        support_radius=2.0 * w,
        space_breakpoints=bps,
        time_independent=True,
        l1_bound=l1,
        holder_meta=(min(alpha, 2.0), 1.0),
    )


def testlib_bump(
    center_t: float = 0.0,
    center_x: float = 0.0,
    radius_t: float = 1.0,
    radius_x: float = 1.0,
    n: int = 1,
) -> SpaceTimeFn:
    """A C^2 compactly supported bump in space-time (product of quintic cutoffs)."""

    ct, rt, rx = float(center_t), float(radius_t), float(radius_x)
    cx = as_point(center_x, n)

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        r = _radii(np.asarray(x, dtype=float) - (cx[0] if n == 1 else cx), n)
        return smooth_cutoff(np.abs(t - ct), rt / 2.0) * smooth_cutoff(r, rx / 2.0)

    # L1 bound in x at the fattest time slice
    rr = np.linspace(0.0, rx, 2049)
    l1 = float(np.trapezoid(rr ** (n - 1) * smooth_cutoff(rr, rx / 2.0), rr) * _sphere_area(n))
    four_pi = (4.0 * math.pi) ** (n / 2.0)
    bps = tuple(float(cx[0]) + d for d in (-rx, -rx / 2.0, 0.0, rx / 2.0, rx)) if n == 1 else ()
    return SpaceTimeFn(
        eval=ev,
        sup_bound=1.0,
        growth_class="bounded",
        n=n,
        name=f"bump(ct={ct}, rt={rt}, rx={rx})",
        heat_limit=0.0,
        heat_decay=PowerEnvelope(coef=l1 / four_pi, power=n / 2.0),
        poisson_limit=0.0,
        poisson_decay=PowerEnvelope(
            coef=l1 * math.gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0), power=float(n)
        ),
        support_radius=float(_radii(cx, n)) + rx,
        past_zero_time=ct - rt,
        space_breakpoints=bps,
        l1_bound=l1,
    )


def testlib_gaussian_dip(t0: float, x0, at: float = 1.0, ax: float = 1.0, n: int = 1) -> SpaceTimeFn:
    """u = 1 - exp(-at (t-t0)^2 - ax|x-x0|^2): nonnegative, zero exactly at (t0, x0).

    The maximum-principle probe: u >= 0 everywhere with u(t0, x0) = 0.
    """
    x0 = as_point(x0, n)
    t0, at, ax = float(t0), float(at), float(ax)

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        dx = np.asarray(x, dtype=float) - (x0[0] if n == 1 else x0)
        r2 = _radii(dx, n) ** 2
        return 1.0 - np.exp(-at * (t - t0) ** 2 - ax * r2)

    # |e^{-tau H}u - 1| <= sup_z e^{-at (t0 - tau - t0)^2} = e^{-at tau^2} <= e^{at/4} e^{-at tau}
    return SpaceTimeFn(
        eval=ev,
        sup_bound=1.0,
        growth_class="bounded",
        n=n,
        name=f"gaussian_dip(t0={t0}, x0={list(x0)})",
        heat_limit=1.0,
        heat_decay=ExpEnvelope(coef=math.exp(at / 4.0), rate=at),
        poisson_limit=1.0,
        poisson_decay=ExpEnvelope(coef=2.0 * math.exp(at / 4.0), rate=min(at, 1.0) / 2.0, tau_from=1.0),
    )


def testlib_shifted_heat_kernel(x0=0.0, t_shift: float = 5.0, c0: float = 0.0, n: int = 1) -> SpaceTimeFn:
    """u = W(t + t_shift, x - x0) + c0: a positive caloric semigroup fixed point.

    Valid for t > -t_shift (evaluations below the kernel birth time return c0);
    intended for sampling on t <= 1 with a comfortable shift.
    """
    x0 = as_point(x0, n)
    t_shift, c0 = float(t_shift), float(c0)

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        sigma = t + t_shift
        dx = np.asarray(x, dtype=float) - (x0[0] if n == 1 else x0)
        r2 = _radii(dx, n) ** 2
        good = sigma > 0
        sig = np.where(good, sigma, 1.0)
        vals = (4.0 * math.pi * sig) ** (-n / 2.0) * np.exp(-r2 / (4.0 * sig))
        return np.where(good, vals, 0.0) + c0

    sup = c0 + (4.0 * math.pi * 0.5) ** (-n / 2.0)  # over t >= -t_shift + 1/2
    return SpaceTimeFn(
        eval=ev,
        sup_bound=sup,
        growth_class="bounded",
        n=n,
        name=f"shifted_heat_kernel(x0={list(x0)}, c0={c0})",
        semigroup_oracle=lambda tau, t, x: ev(t, x),
        hs_increment_oracle=lambda tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        poisson_oracle=lambda y, t, x: ev(t, x),
        poisson_dy_oracle=lambda k, y, t, x: 0.0 * ev(t, x),
        heat_limit="self",
        heat_decay=ZeroEnvelope(),
        poisson_limit="self",
        poisson_decay=ZeroEnvelope(),
        hs_tail=lambda t, x, T, s: 0.0,
        incr_oracle=lambda m, tau, t, x: 0.0 * np.asarray(tau, dtype=float) * ev(t, x),
        incr_tail=lambda t, x, T, s, m: 0.0,
    )


def testlib_windowed_plane_wave(
    rho: float,
    xi,
    t_radius: float = 8.0,
    x_radius: float = 8.0,
    center_t: float = 0.0,
) -> SpaceTimeFn:
    """A plane wave multiplied by a large space-time window: bounded with decay."""
    wave = testlib_plane_wave(rho, xi)
    n = wave.n

    def ev(t, x):
        t = np.asarray(t, dtype=float)
        r = _radii(x, n)
        win = smooth_cutoff(np.abs(t - center_t), t_radius / 2.0) * smooth_cutoff(r, x_radius / 2.0)
        return wave.eval(t, x) * win

    rr = np.linspace(0.0, x_radius, 4097)
    l1 = float(np.trapezoid(rr ** (n - 1) * smooth_cutoff(rr, x_radius / 2.0), rr) * _sphere_area(n))
    four_pi = (4.0 * math.pi) ** (n / 2.0)
    return SpaceTimeFn(
        eval=ev,
        sup_bound=1.0,
        growth_class="bounded",
        n=n,
        name=f"windowed_plane_wave(rho={rho})",
        heat_limit=0.0,
        heat_decay=PowerEnvelope(coef=l1 / four_pi, power=n / 2.0),
        poisson_limit=0.0,
        poisson_decay=PowerEnvelope(
            coef=l1 * math.gamma((n + 1) / 2.0) / math.pi ** ((n + 1) / 2.0), power=float(n)
        ),
        support_radius=x_radius,
        past_zero_time=center_t - t_radius,
        l1_bound=l1,
    )


def audit_growth_class(u: SpaceTimeFn, points) -> None:
    """Spot-check that the declared growth class dominates sampled values.

    Raises PreconditionError on the first violating sample.  This is a
    sampling audit, not a proof: the declared class is otherwise trusted.
    """
    if u.growth_class not in GROWTH_CLASSES:
        raise ParameterError(f"unknown growth class {u.growth_class!r}")
    for (t, x) in points:
        val = abs(float(np.asarray(u.eval(t, np.asarray(x, dtype=float))).reshape(-1)[0]))
        r = float(np.sqrt(np.sum(np.atleast_1d(np.asarray(x, dtype=float)) ** 2)))
        if u.growth_class == "bounded":
            env = u.sup_bound * (1.0 + 1e-12) + 1e-300
        elif u.growth_class == "gaussian-subcritical":
            base = u.sup_bound if math.isfinite(u.sup_bound) else 1.0
            env = base * math.exp(r**2 / 8.0 + abs(t))
        else:  # exponential-in-t
            base = u.sup_bound if math.isfinite(u.sup_bound) else 1.0
            env = base * math.exp(abs(t) + max(u.space_exp_rate, 1.0) * r)
        if val > env:
            raise PreconditionError(
                f"{u.name}: sample |u({t}, {x})| = {val:.3g} exceeds the "
                f"declared '{u.growth_class}' envelope {env:.3g}"
            )
