"""Scalar special functions used by the weight and kernel evaluators.

Everything here is pure: no caches, no module state. Log-space is used
wherever a Gamma product can leave double range, which happens quickly
(N ~ 50 with three factors already overflows by hundreds of decades).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .errors import AccuracyWarning, ConvergenceError, DomainError, NumericError

__all__ = [
    "log_gamma",
    "pochhammer",
    "hypergeom_pFq",
    "hypergeom_terminating_log",
    "GammaProductSpec",
    "ContourSpec",
    "MellinBarnesResult",
    "default_contour",
    "mellin_barnes",
    "mellin_barnes_eval",
    "bessel_j",
    "bessel_k",
]


def _is_nonpositive_integer(x: complex) -> bool:
    x = complex(x)
    return x.imag == 0.0 and x.real <= 0.0 and x.real == math.floor(x.real)


def log_gamma(z: complex) -> complex:
    """Principal branch of log Gamma(z).

    >>> abs(log_gamma(5) - math.log(24)) < 1e-14
    True
    """
    if _is_nonpositive_integer(z):
        raise DomainError(f"log_gamma: z={z!r} is a pole of Gamma")
    return complex(special.loggamma(complex(z)))


def pochhammer(a: float, k: int) -> float:
    """Rising factorial (a)_k = a (a+1) ... (a+k-1)."""
    k = int(k)
    if k < 0:
        raise DomainError(f"pochhammer: k={k} must be non-negative")
    if k == 0:
        return 1.0
    a = float(a)
    if a.is_integer() and k <= 2000:
        # exact integer product, converted once
        ai = int(a)
        prod = 1
        for j in range(k):
            prod *= ai + j
        try:
            return float(prod)
        except OverflowError:
            raise NumericError(f"pochhammer({a}, {k}) overflows double precision") from None
    if k <= 300:
        prod = 1.0
        for j in range(k):
            prod *= a + j
        if not math.isfinite(prod):
            raise NumericError(f"pochhammer({a}, {k}) overflows double precision")
        return prod
    if _is_nonpositive_integer(a + k - 1) or (a <= 0 and a.is_integer()):
        return 0.0
    sign = special.gammasgn(a + k) * special.gammasgn(a)
    log_mag = special.gammaln(a + k) - special.gammaln(a)
    if log_mag > 709.0:
        raise NumericError(f"pochhammer({a}, {k}) overflows double precision")
    return float(sign * math.exp(log_mag))


def _termination_order(upper: Sequence[float]) -> int | None:
    orders = [int(-round(a.real)) for a in map(complex, upper) if _is_nonpositive_integer(a)]
    return min(orders) if orders else None


def _check_hypergeom_params(upper, lower, z) -> int | None:
    m = _termination_order(upper)
    for b in lower:
        if _is_nonpositive_integer(b):
            mb = int(-round(complex(b).real))
            if m is None or m > mb:
                raise DomainError(
                    f"hypergeom: lower parameter {b} is a pole reached before termination"
                )
    if m is None:
        p, q = len(upper), len(lower)
        if p > q + 1:
            raise DomainError(f"hypergeom: {p}F{q} series diverges for z != 0")
        if p == q + 1 and abs(z) >= 1.0:
            raise DomainError(f"hypergeom: {p}F{q} needs |z| < 1, got |z|={abs(z):.6g}")
    return m


def hypergeom_pFq(
    upper: Sequence[float],
    lower: Sequence[float],
    z: complex,
    tol: float = 1e-16,
    max_terms: int = 100_000,
) -> complex:
    """Generalized hypergeometric series pFq(upper; lower; z).

    Terminating series (an upper parameter equal to -m) are summed exactly
    over m+1 terms. Otherwise summation stops once two consecutive terms fall
    below ``tol`` times the partial sum while the term ratio is below one.
    """
    upper = [float(a) for a in upper]
    lower = [float(b) for b in lower]
    z = complex(z)
    m = _check_hypergeom_params(upper, lower, z)
    if z == 0:
        return 1.0 + 0.0j

    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    n_terms = m + 1 if m is not None else max_terms
    small = 0
    for k in range(n_terms - 1):
        num = 1.0
        for a in upper:
            num *= a + k
        den = float(k + 1)
        for b in lower:
            den *= b + k
        ratio = num / den * z
        term = term * ratio
        total += term
        if m is not None:
            continue
        if abs(term) <= tol * abs(total) and abs(ratio) < 1.0:
            small += 1
            if small >= 2:
                return total
        else:
            small = 0
        if not np.isfinite(total):
            raise NumericError(f"hypergeom: partial sum overflowed at k={k}")
    if m is None:
        raise ConvergenceError(
            f"hypergeom: no convergence within {max_terms} terms", estimate=total
        )
    return total


def hypergeom_terminating_log(
    upper: Sequence[float], lower: Sequence[float], z: complex
) -> tuple[float, complex]:
    """Terminating pFq as ``(log_scale, mantissa)`` with value exp(log_scale)*mantissa.

    Terms are built from cumulative complex log-ratios and summed after
    shifting by the largest log-modulus, so coefficient ranges far beyond
    double precision are handled.
    """
    upper = [float(a) for a in upper]
    lower = [float(b) for b in lower]
    z = complex(z)
    m = _check_hypergeom_params(upper, lower, z)
    if m is None:
        raise DomainError("hypergeom_terminating_log: series does not terminate")
    if z == 0 or m == 0:
        return 0.0, 1.0 + 0.0j
    k = np.arange(m, dtype=float)
    log_ratio = np.full(m, np.log(z), dtype=complex) - np.log(k + 1.0)
    for a in upper:
        log_ratio += np.log((a + k).astype(complex))
    for b in lower:
        log_ratio -= np.log((b + k).astype(complex))
    log_terms = np.concatenate(([0.0 + 0.0j], np.cumsum(log_ratio)))
    shift = float(log_terms.real.max())
    mantissa = complex(np.exp(log_terms - shift).sum())
    return shift, mantissa


@dataclass(frozen=True)
class GammaProductSpec:
    """Mellin-Barnes integrand prod Gamma(b_j + s) prod Gamma(a_j - s) u^{-s}.

    The represented function of u > 0 is
    ``exp(log_prefactor) * u**power_shift * (1/2 pi i) int integrand ds``.
    """

    ascending: tuple[float, ...] = ()
    descending: tuple[float, ...] = ()
    log_prefactor: float = 0.0
    power_shift: float = 0.0

    def __post_init__(self):
        asc = tuple(float(b) for b in self.ascending)
        desc = tuple(float(a) for a in self.descending)
        object.__setattr__(self, "ascending", asc)
        object.__setattr__(self, "descending", desc)
        if not asc and not desc:
            raise DomainError("GammaProductSpec: at least one Gamma factor is required")
        values = asc + desc + (float(self.log_prefactor), float(self.power_shift))
        if not all(math.isfinite(v) for v in values):
            raise DomainError("GammaProductSpec: offsets and prefactor must be finite")
        lo, hi = self.strip
        if not lo < hi:
            raise DomainError(f"GammaProductSpec: empty fundamental strip ({lo}, {hi})")

    @property
    def strip(self) -> tuple[float, float]:
        lo = max((-b for b in self.ascending), default=-math.inf)
        hi = min(self.descending, default=math.inf)
        return lo, hi

    def log_integrand(self, s, log_u: float):
        s = np.asarray(s, dtype=complex)
        out = -s * log_u
        for b in self.ascending:
            out = out + special.loggamma(b + s)
        for a in self.descending:
            out = out + special.loggamma(a - s)
        return out

    def _log_integrand_real_axis(self, c: float, log_u: float) -> float:
        val = -c * log_u
        for b in self.ascending:
            val += special.gammaln(b + c)
        for a in self.descending:
            val += special.gammaln(a - c)
        return float(val)

    def _saddle_slope(self, c: float, log_u: float) -> float:
        val = -log_u
        for b in self.ascending:
            val += special.digamma(b + c)
        for a in self.descending:
            val -= special.digamma(a - c)
        return float(val)


@dataclass(frozen=True)
class ContourSpec:
    """Vertical contour Re s = abscissa truncated to |Im s| <= half_extent."""

    abscissa: float
    half_extent: float
    node_count: int = 2048

    def __post_init__(self):
        if not self.half_extent > 0:
            raise DomainError("ContourSpec: half_extent must be positive")
        if int(self.node_count) < 16:
            raise DomainError("ContourSpec: node_count must be >= 16")
        object.__setattr__(self, "node_count", int(self.node_count))

    def check_admissible(self, spec: GammaProductSpec) -> None:
        lo, hi = spec.strip
        if not lo < self.abscissa < hi:
            raise DomainError(
                f"contour abscissa {self.abscissa} outside admissible strip ({lo}, {hi})"
            )


@dataclass(frozen=True)
class MellinBarnesResult:
    """Raw outcome of a Mellin-Barnes quadrature.

    The integral equals ``exp(log_scale) * mantissa``; the returned function
    value is its real part.
    """

    log_scale: float
    mantissa: complex
    contour: ContourSpec

    @property
    def value(self) -> float:
        with np.errstate(over="ignore"):
            out = math.exp(self.log_scale) * self.mantissa.real if self.log_scale < 709 else math.inf
        if not math.isfinite(out):
            raise NumericError(f"Mellin-Barnes value overflows (log scale {self.log_scale:.1f})")
        return out

    @property
    def log_value(self) -> float:
        if not self.mantissa.real > 0:
            raise NumericError("Mellin-Barnes value is not positive; log undefined")
        return self.log_scale + math.log(self.mantissa.real)

    @property
    def imag_ratio(self) -> float:
        re = abs(self.mantissa.real)
        return abs(self.mantissa.imag) / re if re > 0 else math.inf


_DECAY_LOG_TOL = math.log(1e-18)
_MAX_NODES = 1 << 21


def _saddle_abscissa(spec: GammaProductSpec, log_u: float) -> float:
    lo, hi = spec.strip
    slope = lambda c: spec._saddle_slope(c, log_u)  # noqa: E731
    # slope is increasing (log-convexity of Gamma); bracket its root inside the strip
    if math.isfinite(lo) and math.isfinite(hi):
        eps = 1e-12 * max(1.0, abs(lo), abs(hi), hi - lo)
        a, b = lo + eps, hi - eps
    elif math.isfinite(lo):
        a = lo + 1e-12 * max(1.0, abs(lo))
        b = lo + 1.0
        while slope(b) < 0:
            b = lo + 2.0 * (b - lo)
    elif math.isfinite(hi):
        b = hi - 1e-12 * max(1.0, abs(hi))
        a = hi - 1.0
        while slope(a) > 0:
            a = hi - 2.0 * (hi - a)
    else:  # pragma: no cover - GammaProductSpec always has a factor
        a, b = -1.0, 1.0
    fa, fb = slope(a), slope(b)
    if fa >= 0:
        return a
    if fb <= 0:
        return b
    return float(optimize.brentq(slope, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def _decay_extent(spec: GammaProductSpec, c: float, log_u: float, peak: float) -> float:
    def drop(t):
        return float(spec.log_integrand(c + 1j * t, log_u).real) - peak

    t = 1.0
    while drop(t) > _DECAY_LOG_TOL:
        t *= 2.0
        if t > 1e7:
            raise NumericError("Mellin-Barnes integrand does not decay along the contour")
    lo, hi = t / 2.0, t
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if drop(mid) > _DECAY_LOG_TOL:
            lo = mid
        else:
            hi = mid
    return max(hi, 1.0)


def default_contour(spec: GammaProductSpec, u: float) -> ContourSpec:
    """Contour through the real saddle of the integrand for argument ``u``.

    The abscissa minimizes the integrand modulus on the real axis, which is
    where the inversion integral has the least cancellation. The truncation
    point is where the modulus has dropped 18 decades below its peak.
    """
    log_u = math.log(u)
    c = _saddle_abscissa(spec, log_u)
    peak = spec._log_integrand_real_axis(c, log_u)
    T = _decay_extent(spec, c, log_u, peak)
    return ContourSpec(abscissa=c, half_extent=T, node_count=2048)


def _trapezoid_log(spec, log_u, c, T, m, shift):
    t = np.linspace(-T, T, m)
    vals = np.exp(spec.log_integrand(c + 1j * t, log_u) - shift)
    vals[0] *= 0.5
    vals[-1] *= 0.5
    h = 2.0 * T / (m - 1)
    return complex(vals.sum() * h), float(np.abs(vals).sum() * h)


def _finish(spec, log_u, shift, raw, contour):
    log_scale = spec.log_prefactor + spec.power_shift * log_u + shift - math.log(2.0 * math.pi)
    if not (math.isfinite(log_scale) and np.isfinite(raw)):
        raise NumericError("Mellin-Barnes: non-finite intermediate")
    res = MellinBarnesResult(log_scale=log_scale, mantissa=raw, contour=contour)
    if res.imag_ratio > 1e-6:
        warnings.warn(
            f"Mellin-Barnes imaginary residue {res.imag_ratio:.2e} of the real part",
            AccuracyWarning,
            stacklevel=3,
        )
    return res


def mellin_barnes_eval(
    spec: GammaProductSpec,
    u: float,
    contour: ContourSpec | None = None,
    rtol: float = 1e-13,
) -> MellinBarnesResult:
    """Evaluate a Mellin-Barnes integral by the trapezoid rule on a vertical line.

    With an explicit ``contour`` a fixed rule with ``contour.node_count``
    nodes is used. Without one the contour from :func:`default_contour` is
    used and the step is halved until two successive sums agree to ``rtol``
    (the trapezoid rule converges geometrically for these analytic,
    exponentially decaying integrands).
    """
    u = float(u)
    if not u > 0 or not math.isfinite(u):
        raise DomainError(f"mellin_barnes: argument u={u} must be positive and finite")
    log_u = math.log(u)

    if contour is not None:
        contour.check_admissible(spec)
        c = contour.abscissa
        shift = spec._log_integrand_real_axis(c, log_u)
        raw, _ = _trapezoid_log(spec, log_u, c, contour.half_extent, contour.node_count, shift)
        return _finish(spec, log_u, shift, raw, contour)

    auto = default_contour(spec, u)
    c, T = auto.abscissa, auto.half_extent
    shift = spec._log_integrand_real_axis(c, log_u)
    lo, hi = spec.strip
    gap = min(c - lo, hi - c)
    h = min(gap / 4.0, T / 64.0)
    m = 2 * int(math.ceil(T / h)) + 1
    raw, absum = _trapezoid_log(spec, log_u, c, T, m, shift)
    while True:
        # halve the step by inserting midpoints
        t_mid = np.linspace(-T, T, m)[:-1] + T / (m - 1)
        mids = np.exp(spec.log_integrand(c + 1j * t_mid, log_u) - shift)
        h_new = T / (m - 1)
        refined = 0.5 * raw + complex(mids.sum() * h_new)
        absum = 0.5 * absum + float(np.abs(mids).sum() * h_new)
        m = 2 * m - 1
        diff = abs(refined - raw)
        raw = refined
        if diff <= rtol * abs(raw) + 1e-15 * absum:
            break
        if m > _MAX_NODES:
            warnings.warn(
                f"Mellin-Barnes refinement stopped at {m} nodes (last change {diff:.2e})",
                AccuracyWarning,
                stacklevel=2,
            )
            break
    return _finish(spec, log_u, shift, raw, ContourSpec(c, T, m))


def mellin_barnes(spec: GammaProductSpec, u: float, contour: ContourSpec | None = None) -> float:
    """Real value of the Mellin-Barnes integral described by ``spec`` at ``u``."""
    return mellin_barnes_eval(spec, u, contour).value


_J_SERIES_LIMIT = 20.0


def bessel_j(order: float, x: float) -> float:
    """Bessel J of non-negative order by its ascending (0F1) series, |x| <= 20."""
    order = float(order)
    x = float(x)
    if order < 0:
        raise DomainError("bessel_j: order must be >= 0")
    if abs(x) > _J_SERIES_LIMIT:
        raise DomainError(f"bessel_j: |x|={abs(x)} beyond the series range {_J_SERIES_LIMIT}")
    if x < 0:
        if not order.is_integer():
            raise DomainError("bessel_j: negative argument needs integer order")
        return (-1.0) ** int(order) * bessel_j(order, -x)
    if x == 0:
        return 1.0 if order == 0 else 0.0
    series = hypergeom_pFq([], [order + 1.0], -0.25 * x * x).real
    return math.exp(order * math.log(0.5 * x) - special.gammaln(order + 1.0)) * series


def bessel_k(order: float, x: float) -> float:
    """Modified Bessel K from K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.

    The integrand is entire and decays double-exponentially, so the
    trapezoid rule converges geometrically; the step is halved until stable.
    """
    order = abs(float(order))
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"bessel_k: x={x} must be positive and finite")
    if x > 700:
        raise DomainError("bessel_k: x > 700 underflows double precision")

    def log_integrand(t):
        # log of exp(-x (cosh t - 1)) cosh(nu t); the exp(-x) factor is applied at the end
        return -x * (np.cosh(t) - 1.0) + np.logaddexp(order * t, -order * t) - math.log(2.0)

    T = 1.0
    while log_integrand(T) > math.log(1e-18) or order * T > x * (math.cosh(T) - 1.0):
        T *= 1.5
    h = 0.25
    t = np.arange(0.0, T + h / 2, h)
    w = np.exp(log_integrand(t))
    w[0] *= 0.5
    est = w.sum() * h
    while True:
        h /= 2.0
        t_mid = np.arange(h, T, 2 * h)
        est_new = 0.5 * est + np.exp(log_integrand(t_mid)).sum() * h
        if abs(est_new - est) <= 1e-15 * abs(est_new):
            est = est_new
            break
        est = est_new
        if h < 1e-5:
            raise ConvergenceError("bessel_k: trapezoid refinement did not settle", estimate=est)
    return float(est * math.exp(-x))
