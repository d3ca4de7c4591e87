"""Verification checks binding the analytic routes to independent oracles.

Every check returns VerificationReport objects. Checks that compare a curve
report the worst error as ``computed`` against a reference of 0, so the
verdict rule |computed - reference| <= tol * max(1, |reference|) reads as
"worst error <= tol".
"""
from __future__ import annotations

import cmath
import json
import math
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special

from . import kernel as K
from . import mcsim
from . import weight as W
from .errors import DomainError
from .weight import EnsembleConfig

SUITES = ("weights", "kernels", "limits", "mc", "all")


@dataclass(frozen=True)
class VerificationReport:
    check_id: str
    computed: float
    reference: float
    tolerance: float
    note: str = ""
    verdict: bool = field(init=False)

    def __post_init__(self):
        ok = abs(self.computed - self.reference) <= self.tolerance * max(1.0, abs(self.reference))
        object.__setattr__(self, "verdict", bool(ok))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = "pass" if self.verdict else "fail"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def line(self) -> str:
        tag = "PASS" if self.verdict else "FAIL"
        return (
            f"{tag} {self.check_id}: computed={self.computed:.6g} reference={self.reference:.6g} "
            f"tol={self.tolerance:.3g}" + (f" ({self.note})" if self.note else "")
        )


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / abs(b)


def _tol(tolerances: dict | None, check_id: str, default: float) -> float:
    return (tolerances or {}).get(check_id, default)


# ---------------------------------------------------------------- weights


def check_n1_identity(Ns=(1, 3, 8), radii=None, rtol=1e-8, tolerances=None) -> list[VerificationReport]:
    radii = np.linspace(0.05, 5.0, 50) if radii is None else np.asarray(radii, float)
    err_m = err_q = 0.0
    for N in Ns:
        cfg = EnsembleConfig.square(1, N)
        for r in radii:
            ref = W.weight_closed_n1(r, N)
            err_m = max(err_m, _rel(W.weight_meijer(r, cfg), ref))
            err_q = max(err_q, _rel(W.weight_quadrature(r, cfg), ref))
    note = f"max relative error vs (1+r^2)^-(N+1), N in {tuple(Ns)}, {len(radii)} radii"
    return [
        VerificationReport("weights.n1_identity.meijer", err_m, 0.0, _tol(tolerances, "weights.n1_identity.meijer", rtol), note),
        VerificationReport("weights.n1_identity.quad", err_q, 0.0, _tol(tolerances, "weights.n1_identity.quad", rtol), note),
    ]


def check_moment_closure(cfg: EnsembleConfig, rtol=1e-5, tolerances=None) -> VerificationReport:
    worst, worst_k = 0.0, 0
    for k in range(cfg.N):
        num = W.radial_integral(lambda r: W.weight_meijer(r, cfg), power=2 * k, rel_tol=1e-10)
        e = _rel(num, W.weight_moment(k, cfg))
        if e >= worst:
            worst, worst_k = e, k
    cid = "weights.moment_closure"
    return VerificationReport(
        cid, worst, 0.0, _tol(tolerances, cid, rtol),
        f"quadrature of r^(2k+1) w vs Gamma-product moment, {cfg.to_dict()}, worst k={worst_k}",
    )


def check_mellin_numeric(cfg: EnsembleConfig, s_values=(0.5, 1.5), rtol=1e-7, tolerances=None) -> VerificationReport:
    worst = 0.0
    for s in s_values:
        if not 0 < s < cfg.N + 1:
            continue
        num = W.radial_integral(lambda r: W.weight_meijer(r, cfg), power=2 * s - 2, rel_tol=1e-10) / math.pi
        worst = max(worst, _rel(num, W.weight_mellin(s, cfg)))
    cid = "weights.mellin_numeric"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, rtol), f"numeric Mellin transform at s={tuple(s_values)}")


def check_route_agreement(cfg: EnsembleConfig, radii=None, rtol=1e-6, tolerances=None) -> VerificationReport:
    radii = np.linspace(0.1, 5.0, 25) if radii is None else np.asarray(radii, float)
    worst = 0.0
    for r in radii:
        if r <= 0:
            continue
        worst = max(worst, _rel(W.weight_meijer(r, cfg), W.weight_quadrature(r, cfg)))
    cid = "weights.route_agreement"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, rtol), f"meijer vs nested quadrature, {cfg.to_dict()}")


# ---------------------------------------------------------------- kernels


def check_kernel_trace(cfg: EnsembleConfig, tol=1e-4, tolerances=None) -> VerificationReport:
    trace = W.radial_integral(lambda r: K.kernel_finite(r, r, cfg).value.real, rel_tol=1e-9)
    cid = "kernels.trace"
    return VerificationReport(cid, trace, float(cfg.N), _tol(tolerances, cid, tol), f"int K(z,z) d^2z, {cfg.to_dict()}")


def projection_integral(z: complex, u: complex, cfg: EnsembleConfig) -> complex:
    """int K(z,w) K(w,u) d^2w in polar coordinates.

    The integrand is a trigonometric polynomial of degree < N in arg w, so an
    equispaced angular rule with 2N nodes is exact.
    """
    m = 2 * cfg.N
    phases = np.exp(2j * np.pi * np.arange(m) / m)
    lw_z = W.log_weight(abs(z), cfg)
    lw_u = W.log_weight(abs(u), cfg)

    def angular(r: float, part: str) -> float:
        if r == 0:
            return 0.0
        lw = W.log_weight(r, cfg)
        tot = 0j
        for p in phases:
            w = r * p
            tot += K._kernel_from_logs(z, w, lw_z, lw, cfg).value * K._kernel_from_logs(w, u, lw, lw_u, cfg).value
        tot *= 2.0 * math.pi / m
        return tot.real if part == "re" else tot.imag

    def radial(part):
        def g(theta):
            c = math.cos(theta)
            if c <= 0:
                return 0.0
            r = math.tan(theta)
            return r * angular(r, part) / (c * c)

        return integrate.quad(g, 0.0, 0.5 * math.pi, epsabs=1e-13, epsrel=1e-10, limit=200)[0]

    return complex(radial("re"), radial("im"))


def check_projection(cfg: EnsembleConfig, pairs=5, seed=7, tol=1e-4, tolerances=None) -> VerificationReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        z, u = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.8
        ref = K.kernel_finite(z, u, cfg).value
        worst = max(worst, abs(projection_integral(z, u, cfg) - ref) / max(1.0, abs(ref)))
    cid = "kernels.projection"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, tol), f"reproducing property at {pairs} random pairs, {cfg.to_dict()}")


def check_hermiticity(cfg: EnsembleConfig, points=6, seed=11, tol=1e-12, tolerances=None) -> VerificationReport:
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=points) + 1j * rng.normal(size=points)
    M = K.finite_kernel_matrix(pts, cfg)
    scale = max(1.0, float(np.abs(M).max()))
    cid = "kernels.hermiticity"
    return VerificationReport(cid, float(np.abs(M - M.conj().T).max()) / scale, 0.0, _tol(tolerances, cid, tol), "max |K - K^H| / max |K|")


def check_n_independence(Ns=(2, 5, 10), radii=None, tol=1e-10, tolerances=None) -> VerificationReport:
    radii = np.linspace(0.0, 5.0, 51) if radii is None else np.asarray(radii, float)
    worst = 0.0
    for N in Ns:
        cfg = EnsembleConfig.square(1, N)
        for r in radii:
            worst = max(worst, abs(K.density_finite(r, cfg) - 1.0 / (math.pi * (1.0 + r * r) ** 2)))
    cid = "kernels.n1_independence"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, tol), f"sup |rho_N - 1/(pi(1+r^2)^2)|, N in {tuple(Ns)}")


def random_kernel_determinants(cfg: EnsembleConfig, count: int, seed: int, max_k=4, radius=2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dets = np.empty(count)
    for i in range(count):
        k = int(rng.integers(1, max_k + 1))
        r = radius * np.sqrt(rng.uniform(size=k))
        pts = r * np.exp(2j * np.pi * rng.uniform(size=k))
        dets[i] = K.det_real(K.finite_kernel_matrix(pts, cfg))
    return dets


def check_dpp_positivity(cfgs: Sequence[EnsembleConfig], count=200, seed=3, tol=1e-10, tolerances=None) -> VerificationReport:
    per = [count // len(cfgs) + (1 if i < count % len(cfgs) else 0) for i in range(len(cfgs))]
    lo = math.inf
    for i, (cfg, c) in enumerate(zip(cfgs, per)):
        if c:
            lo = min(lo, float(random_kernel_determinants(cfg, c, seed + i).min()))
    cid = "kernels.dpp_positivity"
    return VerificationReport(
        cid, max(0.0, -lo), 0.0, _tol(tolerances, cid, tol),
        f"negative part of the smallest of {count} determinants (k <= 4); min det = {lo:.3e}",
    )


def check_growth(nu=(0, 0), xs=(0.5, 1.0, 2.0), Ns=range(4, 41), tolerances=None) -> VerificationReport:
    violations = 0
    for x in xs:
        logs = [K.log_growth_series(x, EnsembleConfig.from_nu(N, nu)) for N in Ns]
        violations += int(np.sum(np.diff(logs) <= 0))
    cid = "kernels.growth_monotone"
    return VerificationReport(
        cid, float(violations), 0.0, _tol(tolerances, cid, 0.0),
        f"count of non-increasing steps of f_N(x), nu={tuple(nu)}, x in {tuple(xs)}, N={Ns[0]}..{Ns[-1]}",
    )


# ---------------------------------------------------------------- limits


def check_finite_mellin(n=2, N=50, s=0.2, tol=0.02, tolerances=None) -> list[VerificationReport]:
    cfg = EnsembleConfig.square(n, N)
    numeric = W.radial_integral(lambda r: K.density_finite(r, cfg), power=2 * s, rel_tol=1e-8)
    ref = math.pi * n * s / math.sin(math.pi * n * s)
    exact = K.finite_mellin_moment(s, cfg)
    cid = "limits.finite_mellin"
    return [
        VerificationReport(
            cid, numeric, ref, _tol(tolerances, cid, tol),
            f"quadrature of |z|^2s rho_N at n={n}, N={N}, s={s} vs pi n s / sin(pi n s); exact finite-N sum {exact:.6f}",
        ),
        VerificationReport(
            "limits.finite_mellin_sum", _rel(numeric, exact), 0.0, _tol(tolerances, "limits.finite_mellin_sum", 1e-6),
            "quadrature vs exact Gamma-ratio sum",
        ),
    ]


def check_macroscopic_mellin(ns=(1, 2, 3), tol=1e-8, tolerances=None) -> VerificationReport:
    worst = 0.0
    for n in ns:
        for s in (0.1, 0.2, 0.4 / n):
            if n * s >= 1:
                continue
            ref = special.beta(1.0 + n * s, 1.0 - n * s)
            worst = max(worst, _rel(K.macroscopic_mellin(s, [0.0] * n), ref))
    cid = "limits.macroscopic_mellin"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, tol), "vs Beta(1+ns, 1-ns)")


def saddle_ratio(cfg: EnsembleConfig, r=1.0) -> float:
    return math.exp(W.log_weight(r, cfg) - W.log_weight_saddle_asymptotic(r, cfg))


def check_saddle(nu=(0, 0), Ns=(30, 60), r=1.0, tol=0.03, tolerances=None) -> list[VerificationReport]:
    lo, hi = Ns
    r_lo = saddle_ratio(EnsembleConfig.from_nu(lo, nu), r)
    r_hi = saddle_ratio(EnsembleConfig.from_nu(hi, nu), r)
    cid = "limits.saddle"
    return [
        VerificationReport(cid, r_hi, 1.0, _tol(tolerances, cid, tol), f"exact/asymptotic at |z|={r}, N={hi}"),
        VerificationReport(
            "limits.saddle_improves", float(abs(1 - r_hi) < abs(1 - r_lo)), 1.0, 0.0,
            f"ratio N={lo}: {r_lo:.6f}, N={hi}: {r_hi:.6f}",
        ),
    ]


def check_origin_weight(nu=(0, 0), N=200, xis=None, tol=0.02, tolerances=None) -> VerificationReport:
    xis = np.linspace(0.2, 2.0, 10) if xis is None else np.asarray(xis, float)
    cfg = EnsembleConfig.from_nu(N, nu)
    worst = 0.0
    for x in xis:
        z = x / N ** (cfg.n / 2.0)
        scaled = math.exp(cfg.alpha * math.log(N) + W.log_weight_quadrature(z, cfg))
        worst = max(worst, _rel(scaled, W.weight_origin_limit(x, cfg)))
    cid = "limits.origin_weight"
    return VerificationReport(
        cid, worst, 0.0, _tol(tolerances, cid, tol),
        f"N^alpha w(xi/N^(n/2)) vs limit, nu={tuple(nu)}, N={N}, |xi| in [{xis[0]:.2f}, {xis[-1]:.2f}]",
    )


def _pair_grid():
    vals = [0.4 + 0.3j, 1.1 - 0.6j, 1.7 + 0.2j, -0.9 + 1.3j, 0.25 - 1.8j]
    return [(a, b) for a in vals for b in vals]


def check_origin_bessel(nu2s=(0, 1), tol=1e-8, tolerances=None) -> VerificationReport:
    worst = 0.0
    for nu2 in nu2s:
        cfg = EnsembleConfig.from_nu(10, (0, nu2))
        for a, b in _pair_grid():
            ref = K.kernel_origin_bessel_n2(a, b, nu2)
            worst = max(worst, abs(K.kernel_origin_limit(a, b, cfg) - ref) / abs(ref))
    cid = "limits.origin_bessel"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, tol), f"generic 0F1 kernel vs K_nu Bessel form, nu2 in {tuple(nu2s)}")


def check_origin_ginibre(tol=1e-12, tolerances=None) -> VerificationReport:
    cfg = EnsembleConfig.square(1, 5)
    worst = 0.0
    for a, b in _pair_grid():
        ref = K.ginibre_kernel(a, b)
        worst = max(worst, abs(K.kernel_origin_limit(a, b, cfg) - ref) / max(1.0, abs(ref)))
    cid = "limits.origin_ginibre"
    return VerificationReport(cid, worst, 0.0, _tol(tolerances, cid, tol), "n=1 origin kernel vs Ginibre kernel")


def bulk_pairs(n: int) -> list[tuple[complex, complex]]:
    """Pairs with |xi| in [1,3], separation in [0.3, 2.5] and |arg xi_1 - arg xi_2| < pi/n.

    Under z = (xi/sqrt(nN))^n the angle between the two points is multiplied
    by n, so only pairs inside one sector of width pi/n map to nearby points.
    """
    out = []
    for x1 in (1.0, 1.5, 2.0, 2.5, 3.0):
        for ang in (0.0, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi, math.pi):
            for d in (0.3, 0.6, 1.0, 1.5, 2.0, 2.5):
                x2 = x1 + d * cmath.exp(1j * ang)
                if 1.0 <= abs(x2) <= 3.0 and abs(cmath.phase(x2)) < math.pi / n:
                    out.append((complex(x1), x2))
    return out


def bulk_ratio(x1: complex, x2: complex, cfg: EnsembleConfig) -> float:
    """rho_2 / (rho_1 rho_1) at the images of x1, x2; the weights cancel."""
    z1, _ = K.bulk_rescale(x1, cfg)
    z2, _ = K.bulk_rescale(x2, cfg)
    k11 = K.kernel_finite(z1, z1, cfg).value.real
    k22 = K.kernel_finite(z2, z2, cfg).value.real
    k12 = K.kernel_finite(z1, z2, cfg).value
    return 1.0 - abs(k12) ** 2 / (k11 * k22)


def check_bulk(n=2, N=100, tol=0.05, tolerances=None) -> VerificationReport:
    cfg = EnsembleConfig.square(n, N)
    worst_abs = worst_rel = 0.0
    pairs = bulk_pairs(n)
    for x1, x2 in pairs:
        ref = -math.expm1(-abs(x1 - x2) ** 2)
        got = bulk_ratio(x1, x2, cfg)
        worst_abs = max(worst_abs, abs(got - ref))
        worst_rel = max(worst_rel, abs(got - ref) / ref)
    cid = "limits.bulk_ratio"
    return VerificationReport(
        cid, worst_abs, 0.0, _tol(tolerances, cid, tol),
        f"max |ratio - (1 - exp(-d^2))| over {len(pairs)} pairs at n={n}, N={N}; max relative deviation {worst_rel:.3f}",
    )


# ---------------------------------------------------------------- Monte Carlo


def finite_radial_cdf(cfg: EnsembleConfig, r_lo=1e-4, r_hi=1e4, nodes=241):
    """Callable CDF of |z| under density_finite, interpolated in log r."""
    radii = np.geomspace(r_lo, r_hi, nodes)
    edges = np.concatenate([[0.0], radii])

    def f(r):
        return 2.0 * math.pi * r * K.density_finite(r, cfg)

    pieces = [integrate.quad(f, a, b, epsrel=1e-10, limit=100)[0] for a, b in zip(edges[:-1], edges[1:])]
    cdf = np.minimum(np.cumsum(pieces), 1.0)
    log_r = np.log(radii)

    def F(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, 1e-300))
        return np.interp(lx, log_r, cdf, left=0.0, right=1.0)

    return F


def ks_tolerance(count: int, floor: float = 0.02) -> float:
    """The 0.02 floor, widened to the 1% i.i.d. KS critical value for small samples."""
    return max(floor, 1.63 / math.sqrt(count))


def check_mc_radial_ks(batch: mcsim.EigenSampleBatch, tol=None, tolerances=None) -> VerificationReport:
    cfg = batch.cfg
    tol = ks_tolerance(batch.eigenvalues.size) if tol is None else tol
    cdf = mcsim.cauchy_radial_cdf if cfg.n == 1 else finite_radial_cdf(cfg)
    ks = mcsim.radial_ks(batch, cdf)
    cid = "mc.radial_ks"
    return VerificationReport(
        cid, ks, 0.0, _tol(tolerances, cid, tol),
        f"KS of {batch.eigenvalues.size} moduli vs analytic radial CDF, {cfg.to_dict()}",
    )


def check_mc_phase_ks(batch: mcsim.EigenSampleBatch, tol=None, tolerances=None) -> VerificationReport:
    tol = ks_tolerance(batch.eigenvalues.size) if tol is None else tol
    cid = "mc.phase_ks"
    return VerificationReport(cid, mcsim.phase_ks(batch), 0.0, _tol(tolerances, cid, tol), "KS of phases vs uniform on (-pi, pi]")


def check_mc_fractional_moment(batch: mcsim.EigenSampleBatch, s=0.2, sigmas=3.0, tolerances=None) -> VerificationReport:
    cfg = batch.cfg
    est, se = mcsim.fractional_moment(batch, s)
    ref = W.radial_integral(lambda r: K.density_finite(r, cfg), power=2 * s, rel_tol=1e-9)
    cid = "mc.fractional_moment"
    return VerificationReport(
        cid, abs(est - ref) / se, 0.0, _tol(tolerances, cid, sigmas),
        f"|estimate - analytic| in cluster standard errors; estimate {est:.5f} +- {se:.5f}, analytic {ref:.5f}",
    )


def batch_csv_bytes(batch: mcsim.EigenSampleBatch) -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "b.csv"
        batch.write(p)
        return p.read_bytes()


def check_mc_determinism(cfg: EnsembleConfig, matrices=50, seed=1, threads=(1, 4)) -> VerificationReport:
    blobs = [batch_csv_bytes(mcsim.product_eigenvalues(cfg, matrices, mcsim.RngStream(seed), t)) for t in threads]
    same = all(b == blobs[0] for b in blobs)
    return VerificationReport(
        "mc.determinism", float(same), 1.0, 0.0, f"batch CSV bytes identical for threads in {tuple(threads)}"
    )


# ---------------------------------------------------------------- suites


def suite_weights(rc) -> list[VerificationReport]:
    cfg, tols = rc.ensemble, rc.tolerances
    radii = [r for r in rc.grid.radii() if r > 0]
    out: list[VerificationReport] = []
    if cfg.n == 1:
        out += check_n1_identity((cfg.N,), radii, tolerances=tols)
    elif cfg.n <= 4:
        out.append(check_route_agreement(cfg, radii, tolerances=tols))
    out.append(check_moment_closure(cfg, tolerances=tols))
    out.append(check_mellin_numeric(cfg, tolerances=tols))
    return out


def suite_kernels(rc) -> list[VerificationReport]:
    cfg, tols = rc.ensemble, rc.tolerances
    out = [check_kernel_trace(cfg, tolerances=tols), check_hermiticity(cfg, tolerances=tols)]
    if cfg.N <= 8:
        out.append(check_projection(cfg, pairs=3, tolerances=tols))
    out.append(check_dpp_positivity([cfg], count=50, seed=rc.mc.seed, tolerances=tols))
    if cfg.n == 1:
        out.append(check_n_independence(tolerances=tols))
    out.append(check_growth(nu=cfg.nu, tolerances=tols))
    return out


def suite_limits(rc) -> list[VerificationReport]:
    cfg, tols = rc.ensemble, rc.tolerances
    out = [check_saddle(nu=cfg.nu, tolerances=tols)[0], check_macroscopic_mellin((cfg.n,), tolerances=tols)]
    out += check_finite_mellin(n=cfg.n, tolerances=tols)
    if cfg.n <= 4:
        out.append(check_origin_weight(nu=cfg.nu, tolerances=tols))
    if cfg.n == 1:
        out.append(check_origin_ginibre(tolerances=tols))
    if cfg.n == 2:
        out.append(check_origin_bessel((cfg.nu[1],), tolerances=tols))
    # n=1 needs a larger N for the curvature of the sphere to fade
    out.append(check_bulk(n=cfg.n, N=400 if cfg.n == 1 else 100, tolerances=tols))
    return out


def suite_mc(rc, threads: int = 1) -> list[VerificationReport]:
    cfg, tols = rc.ensemble, rc.tolerances
    if not cfg.is_square:
        raise DomainError("the mc suite needs a square ensemble (all dims equal)")
    batch = mcsim.product_eigenvalues(cfg, rc.mc.matrices, mcsim.RngStream(rc.mc.seed), threads)
    out = [check_mc_radial_ks(batch, tolerances=tols), check_mc_phase_ks(batch, tolerances=tols)]
    s = 0.2 if cfg.n < 5 else 0.5 / cfg.n
    out.append(check_mc_fractional_moment(batch, s=s, tolerances=tols))
    out.append(check_mc_determinism(cfg, matrices=min(rc.mc.matrices, 50), seed=rc.mc.seed))
    return out


def run_suite(rc, suite: str, threads: int = 1) -> list[VerificationReport]:
    if suite not in SUITES:
        raise DomainError(f"unknown suite {suite!r}; expected one of {SUITES}")
    names = ("weights", "kernels", "limits", "mc") if suite == "all" else (suite,)
    out: list[VerificationReport] = []
    for name in names:
        if name == "mc":
            out += suite_mc(rc, threads)
        else:
            out += {"weights": suite_weights, "kernels": suite_kernels, "limits": suite_limits}[name](rc)
    return out


def all_pass(reports: Iterable[VerificationReport]) -> bool:
    return all(r.verdict for r in reports)
