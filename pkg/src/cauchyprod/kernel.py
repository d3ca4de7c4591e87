"""Determinantal kernel of the product ensemble and its scaling limits.

Orthogonal polynomials of a radial weight are monomials, so the finite-N
kernel is a terminating nF_{n-1} series multiplied by sqrt(w(z_i) w(z_j)).
The series coefficients span hundreds of decades once N is a few dozen, so
the sum is carried as (log scale, mantissa) throughout.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericError
from .specfun import bessel_k, hypergeom_pFq, hypergeom_terminating_log
from .weight import (
    LOG_PI,
    EnsembleConfig,
    _log_moment,
    log_weight,
    log_weight_origin_limit,
    radial_integral,
)


@dataclass(frozen=True)
class KernelValue:
    """K(z_i, z_j) together with the weights and log shift used to build it."""

    value: complex
    weight_i: float
    weight_j: float
    stabilizer: float

    def __complex__(self) -> complex:
        return complex(self.value)


@dataclass(frozen=True)
class ScalingMap:
    """Microscopic rescaling around the bulk or the origin."""

    n: int
    N: int
    direction: str

    def __post_init__(self):
        if self.direction not in ("bulk", "origin"):
            raise DomainError("direction must be 'bulk' or 'origin'")

    def __call__(self, xi) -> tuple[complex, float]:
        if self.direction == "bulk":
            return bulk_rescale(xi, EnsembleConfig.square(self.n, self.N))
        return complex(xi) / self.N ** (self.n / 2.0), float(self.N) ** (-self.n)


# ---------------------------------------------------------------- finite N


def norm_h(k: int, cfg: EnsembleConfig) -> float:
    """Squared norm of the monomial z^k, the k-th radial moment of the weight."""
    if k != int(k) or k < 0:
        raise DomainError(f"k={k} must be a non-negative integer")
    if k >= cfg.N:
        raise DomainError(f"norm_h: k={k} >= N={cfg.N} is not normalizable")
    return math.exp(_log_moment(int(k), cfg))


def _log_kernel_prefactor(cfg: EnsembleConfig) -> float:
    N = cfg.N
    return (
        sum(special.gammaln(v + N + 1) - special.gammaln(v + 1) for v in cfg.nu)
        - cfg.n * LOG_PI
        - cfg.n * special.gammaln(N)
    )


def _kernel_from_logs(zi: complex, zj: complex, lw_i: float, lw_j: float, cfg: EnsembleConfig) -> KernelValue:
    if not (math.isfinite(lw_i) and math.isfinite(lw_j)):
        raise DomainError("kernel undefined: weight is infinite at one of the points")
    w = (-1) ** cfg.n * zi * complex(zj).conjugate()
    upper = [1.0 - cfg.N] * cfg.n
    lower = [1.0 + v for v in cfg.nu[1:]]
    shift, mant = hypergeom_terminating_log(upper, lower, w)
    log_mag = _log_kernel_prefactor(cfg) + 0.5 * (lw_i + lw_j) + shift
    if log_mag > 709:
        raise NumericError("kernel value overflows double precision")
    value = math.exp(log_mag) * mant
    return KernelValue(value=value, weight_i=math.exp(lw_i), weight_j=math.exp(lw_j), stabilizer=shift)


def kernel_finite(
    z_i, z_j, cfg: EnsembleConfig, weight_route: str = "meijer", contour=None
) -> KernelValue:
    """Finite-N correlation kernel K_{n,N}(z_i, z_j) as a terminating hypergeometric sum."""
    zi, zj = complex(z_i), complex(z_j)
    if weight_route == "closed" and cfg.n != 1:
        raise DomainError("closed-form weight exists only for n=1")
    lw_i = log_weight(abs(zi), cfg, weight_route, contour)
    lw_j = lw_i if abs(zj) == abs(zi) else log_weight(abs(zj), cfg, weight_route, contour)
    return _kernel_from_logs(zi, zj, lw_i, lw_j, cfg)


def finite_kernel_matrix(points: Sequence[complex], cfg: EnsembleConfig, weight_route: str = "meijer") -> np.ndarray:
    """Matrix [K(z_a, z_b)] with each weight evaluated once."""
    pts = [complex(p) for p in points]
    logs = [log_weight(abs(p), cfg, weight_route) for p in pts]
    k = len(pts)
    out = np.empty((k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            out[a, b] = _kernel_from_logs(pts[a], pts[b], logs[a], logs[b], cfg).value
    return out


def density_finite(z, cfg: EnsembleConfig, weight_route: str = "meijer") -> float:
    """One-point density K(z, z)/N, normalized to unit mass."""
    return kernel_finite(z, z, cfg, weight_route).value.real / cfg.N


def density_normalization(cfg: EnsembleConfig, weight_route: str = "meijer") -> float:
    """1 / (2 pi int r rho(r) dr): equals 1 up to quadrature error when the norms are consistent."""
    mass = radial_integral(lambda r: density_finite(r, cfg, weight_route), rel_tol=1e-9)
    return 1.0 / mass


def log_growth_series(x: float, cfg: EnsembleConfig) -> float:
    """log f_{n,N}(x) for the diagonal monomial sum f = sum_k prod_i G(nu_i+N+1)/(G(N-k) G(nu_i+k+1)) x^k."""
    if x < 0:
        raise DomainError("growth series is defined for x >= 0")
    N = cfg.N
    k = np.arange(N, dtype=float)
    logs = -cfg.n * special.gammaln(N - k)
    for v in cfg.nu:
        logs = logs + special.gammaln(v + N + 1) - special.gammaln(v + k + 1)
    if x == 0:
        return float(logs[0])
    logs = logs + k * math.log(x)
    return float(special.logsumexp(logs))


def growth_series(x: float, cfg: EnsembleConfig) -> float:
    return math.exp(log_growth_series(x, cfg))


def finite_mellin_moment(s: float, cfg: EnsembleConfig) -> float:
    """Exact int |z|^2s rho_{n,N}(z) d^2z for -1 < s < 1."""
    if not -1.0 < s < 1.0:
        raise DomainError(f"finite-N Mellin moment needs -1 < s < 1, got {s}")
    logs = _log_mellin_summand(np.arange(cfg.N, dtype=float), s, cfg)
    return float(np.exp(logs).sum() / cfg.N)


def _log_mellin_summand(t, s: float, cfg: EnsembleConfig):
    t = np.asarray(t, dtype=float)
    N = cfg.N
    out = cfg.n * (special.gammaln(N - t - s) - special.gammaln(N - t))
    for v in cfg.nu:
        out = out + special.gammaln(v + t + s + 1) - special.gammaln(v + t + 1)
    return out


def mellin_sandwich(s: float, cfg: EnsembleConfig) -> tuple[float, float]:
    """Integral bracket on finite_mellin_moment for -1 < s < 1/n.

    The summand f(t) is monotone on [0, N-1], so the sum over k = 0..N-1 lies
    between int_0^{N-1} f + min(f(0), f(N-1)) and the same integral plus the
    max. Integrating over [0, N] instead would cross the pole of
    Gamma(N - t - s) at t = N - s (s > 0) or of Gamma(t + s) at t = -s (s < 0).
    """
    n, N = cfg.n, cfg.N
    if not -1.0 < s < 1.0 / n:
        raise DomainError(f"the integral bracket needs -1 < s < 1/n, got s={s}")
    if N == 1:
        v = float(np.exp(_log_mellin_summand(0.0, s, cfg)))
        return v, v
    grid = _log_mellin_summand(np.linspace(0.0, N - 1.0, 8 * N + 1), s, cfg)
    steps = np.diff(grid)
    if not (np.all(steps >= -1e-12) or np.all(steps <= 1e-12)):
        raise DomainError(f"summand is not monotone on [0, N-1] for s={s}; the bracket does not apply")
    f = lambda t: float(np.exp(_log_mellin_summand(t, s, cfg)))
    integral = integrate.quad(f, 0.0, N - 1.0, limit=400, epsabs=0.0, epsrel=1e-12)[0]
    ends = (f(0.0), f(N - 1.0))
    return (integral + min(ends)) / N, (integral + max(ends)) / N


# ---------------------------------------------------------------- macroscopic


def density_macroscopic(z, n: int) -> float:
    """Large-N density of square products, (1/(pi n)) |z|^((2-2n)/n) / (1+|z|^(2/n))^2."""
    r = abs(complex(z))
    if r == 0:
        if n == 1:
            return 1.0 / math.pi
        raise DomainError("macroscopic density is singular at z=0 for n >= 2")
    return r ** ((2.0 - 2.0 * n) / n) / (1.0 + r ** (2.0 / n)) ** 2 / (math.pi * n)


def macroscopic_mellin(s: float, lambdas: Sequence[float]) -> float:
    """int_0^1 prod_i ((t + lambda_i)/(1 - t))^s dt.

    The algebraic endpoint factors t^(m s) (1-t)^(-n s), m = number of zero
    lambdas, are handed to QUADPACK as an exact Jacobi weight.
    """
    lambdas = [float(x) for x in lambdas]
    n = len(lambdas)
    if n == 0 or any(x < 0 for x in lambdas):
        raise DomainError("lambdas must be a non-empty list of non-negative reals")
    if n * s >= 1.0:
        raise DomainError(f"n*s = {n * s} must be < 1")
    zeros = sum(1 for x in lambdas if x == 0.0)
    if zeros * s <= -1.0:
        raise DomainError(f"integral diverges at t=0 for s={s}")
    if s == 0:
        return 1.0
    rest = [x for x in lambdas if x > 0.0]

    def g(t):
        return math.prod((t + x) ** s for x in rest)

    val, _ = integrate.quad(
        g, 0.0, 1.0, weight="alg", wvar=(zeros * s, -n * s), epsabs=0.0, epsrel=1e-13
    )
    return val


# ---------------------------------------------------------------- bulk


def bulk_rescale(xi, cfg: EnsembleConfig) -> tuple[complex, float]:
    """z = (xi / sqrt(nN))^n with the area Jacobian n^2/(nN)^n |xi|^(2n-2)."""
    n, N = cfg.n, cfg.N
    xi = complex(xi)
    rho, phi = abs(xi), cmath.phase(xi)
    z = cmath.rect((rho / math.sqrt(n * N)) ** n, n * phi)
    jac = n * n / (n * N) ** n * rho ** (2 * n - 2)
    return z, jac


def _phase_factor(xi: complex, gamma: float) -> complex:
    return cmath.exp(1j * gamma * cmath.phase(xi))


def kernel_bulk_limit(xi_i, xi_j, cfg: EnsembleConfig) -> complex:
    """Bulk-scaling limit kernel: Ginibre kernel conjugated by a per-point phase."""
    xi_i, xi_j = complex(xi_i), complex(xi_j)
    if xi_i == 0 or xi_j == 0:
        raise DomainError("bulk limit kernel needs nonzero arguments")
    gamma = (1.0 - cfg.n - 2.0 * cfg.alpha) / 2.0
    phase = _phase_factor(xi_i, gamma) * _phase_factor(xi_j, gamma).conjugate()
    return phase * ginibre_kernel(xi_i, xi_j)


def ginibre_kernel(xi_i, xi_j) -> complex:
    xi_i, xi_j = complex(xi_i), complex(xi_j)
    e = -0.5 * (abs(xi_i) ** 2 + abs(xi_j) ** 2) + xi_i * xi_j.conjugate()
    return cmath.exp(e) / math.pi


def two_point_bulk(xi_1, xi_2) -> float:
    d2 = abs(complex(xi_1) - complex(xi_2)) ** 2
    return -math.expm1(-d2) / math.pi**2


# ---------------------------------------------------------------- origin


def kernel_origin_limit(
    xi_i, xi_j, cfg: EnsembleConfig, contour=None, route: str = "integral"
) -> complex:
    """Origin-scaling limit kernel sqrt(W_i W_j)/(pi^n prod G(1+nu)) 0F_{n-1}(-; 1+nu_2..; xi_i xi_j*).

    W is weight_origin_limit; its pi^(n-1) factor makes the overall constant
    1/pi, so n=1 gives the Ginibre kernel.
    """
    xi_i, xi_j = complex(xi_i), complex(xi_j)
    lw_i = log_weight_origin_limit(abs(xi_i), cfg, contour, route)
    lw_j = lw_i if abs(xi_j) == abs(xi_i) else log_weight_origin_limit(abs(xi_j), cfg, contour, route)
    if not (math.isfinite(lw_i) and math.isfinite(lw_j)):
        raise DomainError("origin kernel undefined: limiting weight diverges at xi = 0")
    log_c = -cfg.n * LOG_PI - sum(special.gammaln(1.0 + v) for v in cfg.nu)
    series = hypergeom_pFq([], [1.0 + v for v in cfg.nu[1:]], xi_i * xi_j.conjugate())
    return math.exp(0.5 * (lw_i + lw_j) + log_c) * series


def kernel_origin_bessel_n2(xi_i, xi_j, nu2: int) -> complex:
    """n=2 origin kernel written with K_nu and the 0F1 (modified Bessel I) factor."""
    xi_i, xi_j = complex(xi_i), complex(xi_j)
    nu = int(nu2)
    if nu < 0 or nu != nu2:
        raise DomainError("nu2 must be a non-negative integer")
    if xi_i == 0 or xi_j == 0:
        raise DomainError("Bessel form of the origin kernel needs nonzero arguments")
    w = xi_i * xi_j.conjugate()
    arg = cmath.phase(w)
    phase = cmath.exp(-0.5j * nu * arg)
    bessel_i_like = (
        abs(w) ** (0.5 * nu)
        * cmath.exp(0.5j * nu * arg)
        * hypergeom_pFq([], [1.0 + nu], w)
        / math.gamma(1.0 + nu)
    )
    kk = math.sqrt(bessel_k(nu, 2.0 * abs(xi_i)) * bessel_k(nu, 2.0 * abs(xi_j)))
    return 2.0 / math.pi * phase * kk * bessel_i_like


# ---------------------------------------------------------------- correlations


def kernel_matrix(points: Sequence[complex], kernel_fn: Callable) -> np.ndarray:
    pts = [complex(p) for p in points]
    k = len(pts)
    out = np.empty((k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            out[a, b] = complex(kernel_fn(pts[a], pts[b]))
    return out


def correlation_det(points: Sequence[complex], kernel_fn: Callable) -> float:
    """k-point correlation det[K(z_a, z_b)] for 1 <= k <= 8."""
    k = len(points)
    if not 1 <= k <= 8:
        raise DomainError(f"correlation_det supports 1 <= k <= 8 points, got {k}")
    return det_real(kernel_matrix(points, kernel_fn))


def det_real(mat: np.ndarray) -> float:
    d = complex(np.linalg.det(mat))
    if abs(d.imag) > 1e-10 * max(1.0, abs(d.real)):
        raise NumericError(f"correlation determinant has imaginary residue {d.imag:.3e}")
    return d.real
