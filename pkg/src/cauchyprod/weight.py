"""Eigenvalue weight of a product of n Cauchy-Lorentz matrices.

The weight is radial, so every evaluator reduces its complex argument to
``r = |z|`` first. Three exact routes are provided (closed form for n=1,
Meijer-G via Mellin-Barnes, nested radial quadrature) together with the
moments, the Mellin transform in ``u = |z|**2`` and two large-N limits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError, UnsupportedError
from .specfun import ContourSpec, GammaProductSpec, MellinBarnesResult, mellin_barnes_eval

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)

WEIGHT_ROUTES = ("closed", "meijer", "quad")


@dataclass(frozen=True)
class EnsembleConfig:
    """Product of ``n`` matrices of sizes N_i x N_{i+1}, with N_1 <= ... <= N_{n+1}."""

    n: int
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if int(self.n) < 1:
            raise DomainError(f"n={self.n} must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if len(dims) != self.n + 1:
            raise DomainError(f"dims must have n+1={self.n + 1} entries, got {len(dims)}")
        if any(d < 1 for d in dims):
            raise DomainError(f"dims must be positive, got {dims}")
        if any(b < a for a, b in zip(dims, dims[1:])):
            raise DomainError(f"dims must be non-decreasing, got {dims}")

    @classmethod
    def square(cls, n: int, N: int) -> "EnsembleConfig":
        return cls(n, (N,) * (n + 1))

    @classmethod
    def from_nu(cls, N: int, nu: Sequence[int]) -> "EnsembleConfig":
        """Config with N_1 = N and offsets nu (nu[0] must be 0); N_{n+1} = N_n."""
        nu = [int(v) for v in nu]
        if not nu or nu[0] != 0:
            raise DomainError("nu must start with 0")
        dims = tuple(N + v for v in nu) + (N + nu[-1],)
        return cls(len(nu), dims)

    @property
    def N(self) -> int:
        return self.dims[0]

    @property
    def nu(self) -> tuple[int, ...]:
        return tuple(d - self.N for d in self.dims[: self.n])

    @property
    def alpha(self) -> int:
        return sum(self.nu)

    @property
    def is_square(self) -> bool:
        return len(set(self.dims)) == 1

    def to_dict(self) -> dict:
        return {"n": self.n, "dims": list(self.dims)}


PROFILE_KINDS = ("weight", "density", "cdf")


@dataclass(frozen=True)
class RadialProfile:
    """A radial function sampled on an increasing grid of radii."""

    radii: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        radii.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"profile kind must be one of {PROFILE_KINDS}")
        if radii.ndim != 1 or radii.shape != values.shape:
            raise DomainError("radii and values must be 1-D of equal length")
        if radii.size == 0:
            raise DomainError("profile grid is empty")
        if np.any(radii < 0) or np.any(np.diff(radii) <= 0):
            raise DomainError("radii must be non-negative and strictly increasing")
        if self.kind in ("weight", "density") and np.any(values < 0):
            raise DomainError(f"{self.kind} profile has negative values")
        if self.kind == "cdf":
            if np.any(np.diff(values) < 0) or values[-1] > 1 + 1e-9:
                raise DomainError("cdf profile must be non-decreasing and end <= 1")


def _radius(z) -> float:
    return abs(complex(z))


def _softplus(q: float) -> float:
    # log(1 + e^q) without overflow
    if q > 35.0:
        return q + math.exp(-q)
    return math.log1p(math.exp(q))


# ---------------------------------------------------------------- closed form


def weight_closed_n1(z, N: int) -> float:
    """Single-matrix weight (1 + |z|^2)^-(N+1)."""
    return math.exp(-(N + 1) * math.log1p(_radius(z) ** 2))


def weight_at_origin(cfg: EnsembleConfig) -> float:
    """Limit of the weight at z = 0.

    Finite when every nu_j (j >= 2) is positive; a repeated zero offset gives a
    logarithmic divergence and ``inf`` is returned.
    """
    if cfg.n == 1:
        return 1.0
    nus = cfg.nu[1:]
    if any(v == 0 for v in nus):
        return math.inf
    N = cfg.N
    log_val = (cfg.n - 1) * LOG_PI + sum(
        special.gammaln(v) + special.gammaln(N + 1) - special.gammaln(v + N + 1) for v in nus
    )
    return math.exp(log_val)


# ---------------------------------------------------------------- Meijer-G route


def weight_gamma_spec(cfg: EnsembleConfig) -> GammaProductSpec:
    """Gamma-product description of the weight as a function of u = |z|^2."""
    N = cfg.N
    return GammaProductSpec(
        ascending=cfg.nu,
        descending=(N + 1.0,) * cfg.n,
        log_prefactor=(cfg.n - 1) * LOG_PI - sum(special.gammaln(v + N + 1) for v in cfg.nu),
        power_shift=0.0,
    )


def _weight_meijer_eval(r: float, cfg: EnsembleConfig, contour=None) -> MellinBarnesResult:
    spec = weight_gamma_spec(cfg)
    if contour is not None and not spec.strip[0] < contour.abscissa < spec.strip[1]:
        raise DomainError(f"contour abscissa must lie in (0, N+1) = (0, {cfg.N + 1})")
    return mellin_barnes_eval(spec, r * r, contour)


def weight_meijer(z, cfg: EnsembleConfig, contour: ContourSpec | None = None) -> float:
    """Weight from its Meijer-G representation, evaluated by Mellin-Barnes quadrature."""
    r = _radius(z)
    if r * r == 0:
        return weight_at_origin(cfg)
    return _weight_meijer_eval(r, cfg, contour).value


# ---------------------------------------------------------------- nested quadrature


def _nested_quad(
    dim: int,
    coord_terms: Sequence[Callable[[float, float], float]],
    final_term: Callable[[float], float],
    shift: float,
    theta_peak: float,
    rel_tol: float,
) -> tuple[float, float]:
    """int_{(0,inf)^dim} exp(sum_j coord_terms[j](r_j, log r_j) + final_term(sum log r_j) - shift).

    Each axis uses r = tan(theta) and adaptive Gauss-Kronrod on (0, pi/2).
    Returns (value, outer error estimate).
    """
    if dim == 0:
        return math.exp(final_term(0.0) - shift), 0.0

    def level(j: int, log_sum: float, acc: float) -> float:
        term = coord_terms[j]

        def f(theta: float) -> float:
            c = math.cos(theta)
            if c <= 0.0 or theta <= 0.0:
                return 0.0
            r = math.tan(theta)
            lr = math.log(r)
            a = acc + term(r, lr) - 2.0 * math.log(c)
            if j + 1 == dim:
                e = a + final_term(log_sum + lr) - shift
                return math.exp(e) if e > -745.0 else 0.0
            return level(j + 1, log_sum + lr, a)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(
                f, 0.0, 0.5 * math.pi, points=[theta_peak], epsabs=0.0, epsrel=rel_tol, limit=200
            )
        return val

    # outer level is repeated here to keep its error estimate
    term0 = coord_terms[0]

    def outer(theta: float) -> float:
        c = math.cos(theta)
        if c <= 0.0 or theta <= 0.0:
            return 0.0
        r = math.tan(theta)
        lr = math.log(r)
        a = term0(r, lr) - 2.0 * math.log(c)
        if dim == 1:
            e = a + final_term(lr) - shift
            return math.exp(e) if e > -745.0 else 0.0
        return level(1, lr, a)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            outer, 0.0, 0.5 * math.pi, points=[theta_peak], epsabs=0.0, epsrel=rel_tol, limit=200
        )
    return val, err


def _check_quad_tol(val: float, err: float, rel_tol: float, what: str) -> None:
    if not val > 0 or err > max(100.0 * rel_tol, 1e-12) * val:
        raise ConvergenceError(
            f"{what}: quadrature error estimate {err:.3g} too large for value {val:.6g}",
            estimate=val,
        )


def log_weight_quadrature(r: float, cfg: EnsembleConfig, rel_tol: float = 1e-9) -> float:
    """Natural log of the weight at radius r > 0 from the (n-1)-fold radial integral."""
    if cfg.n > 4:
        raise UnsupportedError("nested quadrature is limited to n <= 4")
    r = float(r)
    if not r > 0:
        raise DomainError("log_weight_quadrature needs r > 0")
    N, n, nu = cfg.N, cfg.n, cfg.nu
    if n == 1:
        return -(N + 1) * math.log1p(r * r)
    nu_n = nu[-1]
    log_x = math.log(r)

    def make_term(v):
        p = 2.0 * v - 2.0 * nu_n - 1.0
        q = v + N + 1.0
        return lambda rr, lr: p * lr - q * math.log1p(rr * rr)

    terms = [make_term(v) for v in nu[:-1]]

    def final(log_p: float) -> float:
        return -(nu_n + N + 1.0) * _softplus(2.0 * log_x - 2.0 * log_p)

    const = (n - 1) * LOG_2PI + 2.0 * nu_n * log_x
    log_peak = log_x / n
    r_peak = math.exp(log_peak)
    shift = sum(t(r_peak, log_peak) for t in terms) + final((n - 1) * log_peak)
    val, err = _nested_quad(n - 1, terms, final, shift, math.atan(r_peak), rel_tol)
    _check_quad_tol(val, err, rel_tol, "weight_quadrature")
    return const + shift + math.log(val)


def weight_quadrature(z, cfg: EnsembleConfig, rel_tol: float = 1e-9) -> float:
    """Weight from its iterated radial integral representation (n <= 4)."""
    if cfg.n > 4:
        raise UnsupportedError("nested quadrature is limited to n <= 4")
    r = _radius(z)
    if r == 0:
        return weight_at_origin(cfg)
    return math.exp(log_weight_quadrature(r, cfg, rel_tol))


def log_weight(r: float, cfg: EnsembleConfig, route: str = "meijer", contour=None) -> float:
    """Log of the weight at radius r by the chosen route (closed needs n=1)."""
    r = float(r)
    if route not in WEIGHT_ROUTES:
        raise DomainError(f"unknown weight route {route!r}; expected one of {WEIGHT_ROUTES}")
    if r * r == 0:
        w0 = weight_at_origin(cfg)
        return math.log(w0) if math.isfinite(w0) else math.inf
    if route == "closed":
        if cfg.n != 1:
            raise DomainError("closed-form weight exists only for n=1")
        return -(cfg.N + 1) * math.log1p(r * r)
    if route == "quad":
        return log_weight_quadrature(r, cfg)
    return _weight_meijer_eval(r, cfg, contour).log_value


# ---------------------------------------------------------------- moments and Mellin


def _log_moment(k: float, cfg: EnsembleConfig) -> float:
    N = cfg.N
    return cfg.n * (LOG_PI + special.gammaln(N - k)) + sum(
        special.gammaln(v + k + 1) - special.gammaln(v + N + 1) for v in cfg.nu
    )


def weight_moment(k: int, cfg: EnsembleConfig) -> float:
    """m_2k = int |z|^2k w(z) d^2z, finite for 0 <= k <= N-1."""
    if k != int(k) or k < 0:
        raise DomainError(f"moment index k={k} must be a non-negative integer")
    if k >= cfg.N:
        raise DomainError(f"divergent moment: k={k} >= N={cfg.N}")
    return math.exp(_log_moment(int(k), cfg))


def weight_mellin(s: float, cfg: EnsembleConfig) -> float:
    """Mellin transform of the weight in u = |z|^2, valid for 0 < s < N+1.

    pi * weight_mellin(k+1) reproduces weight_moment(k).
    """
    s = float(s)
    if not 0 < s < cfg.N + 1:
        raise DomainError(f"s={s} outside the strip (0, {cfg.N + 1})")
    return math.exp(_log_moment(s - 1.0, cfg) - LOG_PI)


# ---------------------------------------------------------------- large-N forms


def log_weight_saddle_asymptotic(r: float, cfg: EnsembleConfig) -> float:
    n, N, a = cfg.n, cfg.N, cfg.alpha
    lr = math.log(r)
    log_pref = 1.5 * (n - 1) * LOG_2PI - (n - 1) * math.log(2.0) - 0.5 * (n - 1) * math.log(N) - 0.5 * math.log(n)
    return log_pref + (1 - n + 2 * a) / n * lr - (n * N + a + 1) * _softplus(2.0 * lr / n)


def weight_saddle_asymptotic(z, cfg: EnsembleConfig) -> float:
    """Leading large-N saddle-point approximation of the weight at fixed z != 0."""
    r = _radius(z)
    if r == 0:
        raise DomainError("saddle asymptotic is undefined at z = 0")
    if cfg.n > 1 and cfg.N < 2:
        raise DomainError("saddle asymptotic needs N >= 2")
    return math.exp(log_weight_saddle_asymptotic(r, cfg))


ORIGIN_ROUTES = ("integral", "mellin")


def origin_gamma_spec(cfg: EnsembleConfig) -> GammaProductSpec:
    """pi^(n-1) |xi|^(2 nu_n) G^{n,0}_{0,n}(-; nu_j - nu_n | u) as a Gamma product in u."""
    nu_n = cfg.nu[-1]
    return GammaProductSpec(
        ascending=tuple(v - nu_n for v in cfg.nu),
        descending=(),
        log_prefactor=(cfg.n - 1) * LOG_PI,
        power_shift=float(nu_n),
    )


def _log_origin_integral(x: float, cfg: EnsembleConfig, rel_tol: float) -> float:
    n, nu = cfg.n, cfg.nu
    nu_n = nu[-1]
    log_x = math.log(x)
    if n == 1:
        return -x * x

    def make_term(v):
        p = 2.0 * v - 2.0 * nu_n - 1.0
        return lambda rr, lr: p * lr - rr * rr

    terms = [make_term(v) for v in nu[:-1]]

    def final(log_p: float) -> float:
        e = 2.0 * log_x - 2.0 * log_p
        return -math.exp(e) if e < 700.0 else -math.inf

    log_peak = log_x / n
    r_peak = math.exp(log_peak)
    shift = sum(t(r_peak, log_peak) for t in terms) + final((n - 1) * log_peak)
    if cfg.n > 4:
        raise UnsupportedError("nested quadrature is limited to n <= 4")
    val, err = _nested_quad(n - 1, terms, final, shift, math.atan(r_peak), rel_tol)
    _check_quad_tol(val, err, rel_tol, "weight_origin_limit")
    return (n - 1) * LOG_2PI + 2.0 * nu_n * log_x + shift + math.log(val)


def weight_origin_at_zero(cfg: EnsembleConfig) -> float:
    """Value of the origin-scaling limit at xi = 0 (inf when it diverges)."""
    if cfg.n == 1:
        return 1.0
    nus = cfg.nu[1:]
    if any(v == 0 for v in nus):
        return math.inf
    return math.exp((cfg.n - 1) * LOG_PI + sum(special.gammaln(v) for v in nus))


def log_weight_origin_limit(
    r: float, cfg: EnsembleConfig, contour=None, route: str = "integral", rel_tol: float = 1e-10
) -> float:
    if route not in ORIGIN_ROUTES:
        raise DomainError(f"unknown origin route {route!r}; expected one of {ORIGIN_ROUTES}")
    if r == 0:
        w0 = weight_origin_at_zero(cfg)
        return math.log(w0) if math.isfinite(w0) else math.inf
    if route == "integral":
        return _log_origin_integral(r, cfg, rel_tol)
    return mellin_barnes_eval(origin_gamma_spec(cfg), r * r, contour).log_value


def weight_origin_limit(
    xi, cfg: EnsembleConfig, contour: ContourSpec | None = None, route: str = "integral"
) -> float:
    """N-free limit of N^alpha * w(xi / N^(n/2)).

    Equals (2 pi)^(n-1) |xi|^(2 nu_n) psi_n(|xi|) with psi_n the Gaussian
    (n-1)-fold integral; ``route="mellin"`` evaluates the equivalent
    G^{n,0}_{0,n} form instead. n=1 gives exp(-|xi|^2).
    """
    return math.exp(log_weight_origin_limit(_radius(xi), cfg, contour, route))


# ---------------------------------------------------------------- profiles


def radial_cdf(profile: RadialProfile) -> RadialProfile:
    """Cumulative 2 pi int_0^r s rho(s) ds by the trapezoid rule.

    The final value is the mass captured by the grid; it is not rescaled to 1.
    """
    if profile.kind != "density" and profile.kind != "weight":
        raise DomainError("radial_cdf needs a density profile")
    if profile.radii[0] != 0.0:
        raise DomainError("radial_cdf needs a grid starting at r = 0")
    r = profile.radii
    cdf = integrate.cumulative_trapezoid(2.0 * np.pi * r * profile.values, r, initial=0.0)
    cdf = np.maximum.accumulate(cdf)
    return RadialProfile(r, cdf, "cdf")


def radial_integral(fn: Callable[[float], float], power: float = 0.0, rel_tol: float = 1e-10) -> float:
    """2 pi int_0^inf r^(1+power) fn(r) dr for a radial function, via r = tan(theta)."""

    def g(theta):
        c = math.cos(theta)
        if c <= 0:
            return 0.0
        r = math.tan(theta)
        if r == 0:
            return 0.0
        return r ** (1.0 + power) * fn(r) / (c * c)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(g, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=rel_tol, limit=400)
    return 2.0 * math.pi * val


def weight_profile(radii, cfg: EnsembleConfig, method: str, contour=None) -> RadialProfile:
    """Weight sampled on ``radii`` by one of closed|meijer|quad|saddle|origin."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise DomainError("empty radial grid")
    if method == "closed":
        if cfg.n != 1:
            raise DomainError("closed-form weight exists only for n=1")
        vals = [weight_closed_n1(r, cfg.N) for r in radii]
    elif method == "meijer":
        vals = [weight_meijer(r, cfg, contour) for r in radii]
    elif method == "quad":
        vals = [weight_quadrature(r, cfg) for r in radii]
    elif method == "saddle":
        vals = [weight_saddle_asymptotic(r, cfg) for r in radii]
    elif method == "origin":
        vals = [weight_origin_limit(r, cfg, contour) for r in radii]
    else:
        raise DomainError(f"unknown weight method {method!r}")
    return RadialProfile(radii, np.asarray(vals, dtype=float), "weight")
