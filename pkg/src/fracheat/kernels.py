"""Closed-form space-time kernels and kernel-level identities.

Every kernel is evaluated in log-space (single exponentiation) so that the
power-of-tau prefactors cannot overflow before the Gaussian underflows.
All functions are vectorized over tau/z/y arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, FracParams, ParameterError

__all__ = [
    "eval_ks",
    "eval_kneg",
    "eval_w",
    "eval_poisson_kernel",
    "eval_g",
    "eval_g_dy",
    "eval_backward_g",
    "eval_backward_g_grad",
    "eval_subordinated_py",
    "eval_subordinated_py_dy",
    "conormal_from_g",
    "KernelBoundWitness",
    "kernel_bounds_witness",
]


def _sq_norm(z, n):
    z = np.asarray(z, dtype=float)
    if n == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        return z * z
    return np.sum(z * z, axis=-1)


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0):
        raise DomainError("tau must be positive")
    return tau


def eval_ks(p: FracParams, tau, z):
    """Kernel of the fractional heat operator:
    c_ks * exp(-|z|^2/(4 tau)) / tau^{n/2+1+s}."""
    tau = _check_tau(tau)
    r2 = _sq_norm(z, p.n)
    return np.exp(math.log(p.c_ks) - r2 / (4.0 * tau) - (p.n / 2.0 + 1.0 + p.s) * np.log(tau))


def eval_kneg(p: FracParams, tau, z):
    """Kernel of the inverse H^{-s}: c_kneg * exp(-|z|^2/(4 tau)) / tau^{n/2+1-s}."""
    tau = _check_tau(tau)
    r2 = _sq_norm(z, p.n)
    return np.exp(math.log(p.c_kneg) - r2 / (4.0 * tau) - (p.n / 2.0 + 1.0 - p.s) * np.log(tau))


def eval_w(n: int, tau, z):
    """Gauss-Weierstrass heat kernel (4 pi tau)^{-n/2} exp(-|z|^2/(4 tau))."""
    tau = _check_tau(tau)
    r2 = _sq_norm(z, n)
    return np.exp(-(n / 2.0) * np.log(4.0 * math.pi * tau) - r2 / (4.0 * tau))


def eval_poisson_kernel(p: FracParams, tau, z, y):
    """Fractional Poisson kernel of the extension problem.

    P_y^s(tau, z) = y^{2s} exp(-(y^2+|z|^2)/(4 tau))
                    / (4^{n/2+s} pi^{n/2} Gamma(s) tau^{n/2+1+s}),  tau, y > 0.
    """
    tau = _check_tau(tau)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("y must be positive")
    r2 = _sq_norm(z, p.n)
    logc = -((p.n / 2.0 + p.s) * math.log(4.0) + (p.n / 2.0) * math.log(math.pi)) - math.lgamma(p.s)
    return np.exp(
        logc
        + 2.0 * p.s * np.log(y)
        - (y * y + r2) / (4.0 * tau)
        - (p.n / 2.0 + 1.0 + p.s) * np.log(tau)
    )


def eval_g(p: FracParams, tau, z, y):
    """Fundamental solution of the extension equation:
    exp(-(|z|^2+y^2)/(4 tau)) / (Gamma(s) (4 pi)^{n/2} tau^{n/2+1-s}), y >= 0."""
    tau = _check_tau(tau)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0):
        raise DomainError("y must be nonnegative")
    r2 = _sq_norm(z, p.n)
    return np.exp(
        math.log(p.c_kneg) - (r2 + y * y) / (4.0 * tau) - (p.n / 2.0 + 1.0 - p.s) * np.log(tau)
    )


def eval_g_dy(p: FracParams, tau, z, y):
    """Closed-form d/dy of eval_g: the Gaussian factor brings down -y/(2 tau)."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    return -(y / (2.0 * tau)) * eval_g(p, tau, z, y)


def eval_backward_g(p: FracParams, t, X):
    """Backwards fundamental solution on the half space, zero for t >= 0.

    G(t, X) = exp(|X|^2/(4t)) (-t)^{-(n/2+1-s)} / (Gamma(s) (4 pi)^{n/2}),  t < 0,
    with X = (x, y) in R^{n+1}.
    """
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    r2 = np.sum(X * X, axis=-1)
    past = t < 0.0
    tt = np.where(past, -t, 1.0)
    vals = np.exp(math.log(p.c_kneg) - r2 / (4.0 * tt) - (p.n / 2.0 + 1.0 - p.s) * np.log(tt))
    return np.where(past, vals, 0.0)


def eval_backward_g_grad(p: FracParams, t, X):
    """Spatial gradient of eval_backward_g: (X/(2t)) G(t, X), zero for t >= 0."""
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    g = eval_backward_g(p, t, X)
    safe_t = np.where(t < 0.0, t, -1.0)
    return (X / (2.0 * safe_t[..., None])) * g[..., None]


def eval_subordinated_py(n: int, tau, z, y):
    """Kernel of the subordinated Poisson semigroup e^{-y H^{1/2}}.

    (y / (2 sqrt(pi))) exp(-(y^2+|z|^2)/(4 tau)) / ((4 pi tau)^{n/2} tau^{3/2})
    for tau > 0, and 0 for tau <= 0 (the indicator in tau).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("y must be positive")
    tau = np.asarray(tau, dtype=float)
    pos = tau > 0.0
    tt = np.where(pos, tau, 1.0)
    r2 = _sq_norm(z, n)
    vals = np.exp(
        np.log(y)
        - math.log(2.0 * math.sqrt(math.pi))
        - (y * y + r2) / (4.0 * tt)
        - (n / 2.0) * np.log(4.0 * math.pi * tt)
        - 1.5 * np.log(tt)
    )
    return np.where(pos, vals, 0.0)


def eval_subordinated_py_dy(n: int, tau, z, y, k: int = 1):
    """k-th y-derivative of the subordinated kernel, in closed form.

    d^k/dy^k [y e^{-b y^2}] = (y H_k + k H_{k-1}/sqrt(b)) (-sqrt(b))^k e^{-b y^2}
    with b = 1/(4 tau) and H_k the (physicists') Hermite polynomial at sqrt(b) y.
    """
    if k < 0:
        raise ParameterError("derivative order must be nonnegative")
    tau = np.asarray(tau, dtype=float)
    pos = tau > 0.0
    tt = np.where(pos, tau, 1.0)
    y = np.asarray(y, dtype=float)
    r2 = _sq_norm(z, n)
    b = 1.0 / (4.0 * tt)
    sb = np.sqrt(b)
    arg = sb * y
    hk = np.polynomial.hermite.hermval(arg, [0.0] * k + [1.0])
    hkm1 = np.polynomial.hermite.hermval(arg, [0.0] * (k - 1) + [1.0]) if k >= 1 else 0.0
    poly = (y * hk + (k * hkm1 / sb if k >= 1 else 0.0)) * (-sb) ** k
    base = np.exp(
        -math.log(2.0 * math.sqrt(math.pi))
        - (y * y + r2) / (4.0 * tt)
        - (n / 2.0) * np.log(4.0 * math.pi * tt)
        - 1.5 * np.log(tt)
    )
    return np.where(pos, poly * base, 0.0)


def conormal_from_g(p: FracParams, tau, z, y):
    """Poisson kernel reconstructed as the conormal derivative of the
    fundamental solution of order 1-s:

        -(Gamma(1-s) / (4^{s-1/2} Gamma(s))) y^{1-2(1-s)} d/dy G_{1-s}(tau, z, y).
    """
    from .core import make_params

    q = make_params(1.0 - p.s, p.n)
    pref = -math.gamma(1.0 - p.s) / (4.0 ** (p.s - 0.5) * math.gamma(p.s))
    y = np.asarray(y, dtype=float)
    return pref * y ** (2.0 * p.s - 1.0) * eval_g_dy(q, tau, z, y)


@dataclass(frozen=True)
class KernelBoundWitness:
    """Empirical witnesses for the two-sided kernel bounds.

    The sharp constants are existential; over a user-supplied sample this
    records min of K_s |z|^{n+2+2s} on the tau = |z|^2 subfamily and
    max of K_s (|z|^{n+2+2s} + tau^{(n+2+2s)/2}) over all samples.
    """

    sample_points: tuple
    lower_ratio_min: float
    upper_ratio_max: float


def kernel_bounds_witness(p: FracParams, samples) -> KernelBoundWitness:
    """Measure the kernel-bound ratios over samples of (tau, z).

    Samples must have tau > 0 and z != 0; the lower witness uses only the
    parabolic subfamily tau == |z|^2 (appended automatically for each z).
    """
    samples = list(samples)
    if not samples:
        raise ParameterError("need a nonempty sample set")
    expo = p.n + 2.0 + 2.0 * p.s
    lower = math.inf
    upper = 0.0
    for tau, z in samples:
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        r = float(np.sqrt(zz @ zz))
        if r == 0.0:
            raise ParameterError("witness samples must have z != 0")
        if tau <= 0.0:
            raise DomainError("tau must be positive")
        k_par = float(eval_ks(p, r * r, zz))
        lower = min(lower, k_par * r**expo)
        k = float(eval_ks(p, tau, zz))
        upper = max(upper, k * (r**expo + tau ** (expo / 2.0)))
    return KernelBoundWitness(
        sample_points=tuple((float(t), tuple(np.atleast_1d(np.asarray(z, float)))) for t, z in samples),
        lower_ratio_min=lower,
        upper_ratio_max=upper,
    )
