"""Monte-Carlo spectra of products of Cauchy-Lorentz matrices.

A Cauchy-Lorentz factor is drawn as X = A^{-1} B with A, B independent
Ginibre matrices (the spherical ensemble); its eigenvalue weight is
(1 + |z|^2)^-(N+1). Replica r of a batch draws from its own generator,
seeded by (seed, stream_id, r), so results do not depend on how replicas
are scheduled across threads.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, SamplingError
from .weight import EnsembleConfig, RadialProfile

_U64 = 1 << 64
COND_LIMIT = 1e12
MAX_RESAMPLES = 10
MAX_N = 64


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < _U64:
                raise DomainError(f"{name}={v} must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))))

    def replica_generator(self, replica: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(replica)))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


def sample_ginibre(rows: int, cols: int, rng) -> np.ndarray:
    """rows x cols matrix of standard complex Gaussians (E|g|^2 = 1)."""
    if rows < 1 or cols < 1:
        raise DomainError("matrix dimensions must be >= 1")
    gen = _as_generator(rng)
    g = gen.standard_normal((rows, cols, 2))
    return (g[..., 0] + 1j * g[..., 1]) * math.sqrt(0.5)


def _cauchy_draw(N: int, gen: np.random.Generator) -> tuple[np.ndarray, int]:
    resamples = 0
    A = sample_ginibre(N, N, gen)
    while np.linalg.cond(A) > COND_LIMIT:
        resamples += 1
        if resamples > MAX_RESAMPLES:
            raise SamplingError(f"A stayed ill-conditioned after {MAX_RESAMPLES} resamples")
        A = sample_ginibre(N, N, gen)
    B = sample_ginibre(N, N, gen)
    return np.linalg.solve(A, B), resamples


def sample_cauchy_matrix(N: int, rng) -> np.ndarray:
    """N x N Cauchy-Lorentz matrix A^{-1} B."""
    if N < 1:
        raise DomainError("N must be >= 1")
    return _cauchy_draw(N, _as_generator(rng))[0]


@dataclass
class EigenSampleBatch:
    """Eigenvalues of sampled product matrices with provenance."""

    cfg: EnsembleConfig
    eigenvalues: np.ndarray
    matrix_index: np.ndarray
    matrices_sampled: int
    seed: int
    stream_id: int = 0
    discarded: int = 0
    resamples: int = 0
    created: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex)
        self.matrix_index = np.asarray(self.matrix_index, dtype=np.int64)
        if self.eigenvalues.shape != self.matrix_index.shape:
            raise DomainError("eigenvalues and matrix_index must align")
        if self.eigenvalues.size != self.matrices_sampled * self.cfg.N:
            raise DomainError("eigenvalue count must equal matrices_sampled * N")
        if not np.all(np.isfinite(self.eigenvalues)):
            raise DomainError("batch contains non-finite eigenvalues")

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def metadata(self) -> dict:
        return {
            "ensemble": self.cfg.to_dict(),
            "seed": self.seed,
            "stream_id": self.stream_id,
            "matrices_sampled": self.matrices_sampled,
            "eigenvalue_count": int(self.eigenvalues.size),
            "discarded": self.discarded,
            "resamples": self.resamples,
            "created": self.created,
        }

    def write(self, csv_path: str | Path) -> tuple[Path, Path]:
        """Write ``re,im,matrix_index`` CSV plus a JSON metadata sidecar."""
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["re", "im", "matrix_index"])
            for z, idx in zip(self.eigenvalues, self.matrix_index):
                w.writerow([f"{z.real:.17g}", f"{z.imag:.17g}", int(idx)])
        meta_path = csv_path.with_suffix(".json")
        meta_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path

    @classmethod
    def read(cls, csv_path: str | Path) -> "EigenSampleBatch":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        cfg = EnsembleConfig(meta["ensemble"]["n"], tuple(meta["ensemble"]["dims"]))
        return cls(
            cfg=cfg,
            eigenvalues=data[:, 0] + 1j * data[:, 1],
            matrix_index=data[:, 2].astype(np.int64),
            matrices_sampled=meta["matrices_sampled"],
            seed=meta["seed"],
            stream_id=meta["stream_id"],
            discarded=meta["discarded"],
            resamples=meta["resamples"],
            created=meta["created"],
        )


def merge_batches(a: EigenSampleBatch, b: EigenSampleBatch) -> EigenSampleBatch:
    """Union of two batches of the same ensemble; b's matrix indices are offset."""
    if a.cfg != b.cfg:
        raise DomainError("cannot merge batches of different ensembles")
    offset = int(a.matrix_index.max()) + 1 if a.matrix_index.size else 0
    return EigenSampleBatch(
        cfg=a.cfg,
        eigenvalues=np.concatenate([a.eigenvalues, b.eigenvalues]),
        matrix_index=np.concatenate([a.matrix_index, b.matrix_index + offset]),
        matrices_sampled=a.matrices_sampled + b.matrices_sampled,
        seed=a.seed,
        stream_id=a.stream_id,
        discarded=a.discarded + b.discarded,
        resamples=a.resamples + b.resamples,
    )


CHUNK = 512


def _replica_factors(cfg: EnsembleConfig, stream: RngStream, r: int):
    """Factor draws of replica r: all A_i, then all B_i, then any A_i resamples."""
    gen = stream.replica_generator(r)
    n, N = cfg.n, cfg.N
    A = sample_ginibre(n * N, N, gen).reshape(n, N, N)
    B = sample_ginibre(n * N, N, gen).reshape(n, N, N)
    resamples = 0
    for i in np.flatnonzero(np.linalg.cond(A) > COND_LIMIT):
        while np.linalg.cond(A[i]) > COND_LIMIT:
            resamples += 1
            if resamples > MAX_RESAMPLES:
                raise SamplingError(f"A stayed ill-conditioned after {MAX_RESAMPLES} resamples")
            A[i] = sample_ginibre(N, N, gen)
    return A, B, resamples


def _accept(Y: np.ndarray, vals: np.ndarray, vecs: np.ndarray) -> bool:
    if not np.all(np.isfinite(vals)):
        return False
    # backward error of each eigenpair, relative to ||Y||
    resid = np.linalg.norm(Y @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    return bool(resid.max() <= 1e-10 * np.linalg.norm(Y, 2))


def _chunk(cfg: EnsembleConfig, stream: RngStream, start: int, stop: int):
    draws = [_replica_factors(cfg, stream, r) for r in range(start, stop)]
    A = np.stack([d[0] for d in draws])
    B = np.stack([d[1] for d in draws])
    X = np.linalg.solve(A, B)
    Y = X[:, 0]
    for i in range(1, cfg.n):
        Y = Y @ X[:, i]
    out = []
    try:
        vals, vecs = np.linalg.eig(Y)
    except np.linalg.LinAlgError:
        vals = vecs = None
    for k, d in enumerate(draws):
        if vals is None:
            try:
                ev, vec = np.linalg.eig(Y[k])
            except np.linalg.LinAlgError:
                out.append((None, d[2]))
                continue
        else:
            ev, vec = vals[k], vecs[k]
        out.append((ev if _accept(Y[k], ev, vec) else None, d[2]))
    return out


def product_eigenvalues(
    cfg: EnsembleConfig, matrices: int, stream: RngStream, threads: int = 1
) -> EigenSampleBatch:
    """Eigenvalues of ``matrices`` independent products X_1 ... X_n (square case)."""
    if not cfg.is_square:
        raise DomainError("Monte-Carlo sampling supports square products only (all nu_i = 0)")
    if cfg.N > MAX_N:
        raise DomainError(f"N={cfg.N} exceeds the supported {MAX_N}")
    if matrices < 1:
        raise DomainError("matrices must be >= 1")
    threads = max(1, int(threads))
    bounds = [(a, min(a + CHUNK, matrices)) for a in range(0, matrices, CHUNK)]
    if threads == 1:
        chunks = [_chunk(cfg, stream, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda ab: _chunk(cfg, stream, *ab), bounds))
    results = [res for c in chunks for res in c]
    vals, idx = [], []
    discarded = resamples = 0
    for r, (ev, k) in enumerate(results):
        resamples += k
        if ev is None:
            discarded += 1
            continue
        vals.append(ev)
        idx.append(np.full(cfg.N, r, dtype=np.int64))
    if discarded > 0.01 * matrices:
        raise SamplingError(f"eigensolver rejected {discarded} of {matrices} replicas")
    return EigenSampleBatch(
        cfg=cfg,
        eigenvalues=np.concatenate(vals),
        matrix_index=np.concatenate(idx),
        matrices_sampled=len(vals),
        seed=stream.seed,
        stream_id=stream.stream_id,
        discarded=discarded,
        resamples=resamples,
    )


def fractional_moment(batch: EigenSampleBatch, s: float, clustered: bool = True) -> tuple[float, float]:
    """Mean of |z|^2s and its standard error.

    The clustered error treats the eigenvalues of one matrix as a cluster
    (CR1 sandwich estimator); ``clustered=False`` gives the i.i.d. error.
    """
    if batch.eigenvalues.size == 0:
        raise DomainError("empty batch")
    if not 0 < s < 1.0 / batch.cfg.n:
        raise DomainError(f"s={s} outside (0, 1/n): the moment would be infinite")
    v = batch.moduli ** (2.0 * s)
    mean = float(v.mean())
    resid = v - mean
    total = v.size
    if not clustered:
        return mean, float(resid.std(ddof=1) / math.sqrt(total))
    _, inv = np.unique(batch.matrix_index, return_inverse=True)
    sums = np.bincount(inv, weights=resid)
    G = sums.size
    if G < 2:
        return mean, math.inf
    var = G / (G - 1) * float(np.sum(sums**2)) / total**2
    return mean, math.sqrt(var)


def radial_histogram(batch: EigenSampleBatch, grid: Sequence[float]) -> RadialProfile:
    """Area density of eigenvalues in annuli between consecutive grid radii.

    Values are placed at annulus mid-radii and normalized by the total count,
    so eigenvalues outside the grid lower the captured mass.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise DomainError("histogram grid needs >= 2 increasing non-negative radii")
    counts, _ = np.histogram(batch.moduli, bins=grid)
    area = np.pi * (grid[1:] ** 2 - grid[:-1] ** 2)
    dens = counts / (area * batch.eigenvalues.size)
    return RadialProfile(0.5 * (grid[1:] + grid[:-1]), dens, "density")


def empirical_cdf(batch: EigenSampleBatch, grid: Sequence[float]) -> RadialProfile:
    """Fraction of eigenvalues with |z| <= r at each grid radius."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("empty grid")
    mods = np.sort(batch.moduli)
    frac = np.searchsorted(mods, grid, side="right") / mods.size
    return RadialProfile(grid, frac, "cdf")


def ks_distance(empirical: RadialProfile, analytic: RadialProfile, interpolate: bool = False) -> float:
    """Sup-norm distance between two CDF profiles on the empirical grid."""
    if empirical.kind != "cdf" or analytic.kind != "cdf":
        raise DomainError("ks_distance compares cdf profiles")
    if np.array_equal(empirical.radii, analytic.radii):
        ref = analytic.values
    elif interpolate:
        ref = np.interp(empirical.radii, analytic.radii, analytic.values)
    else:
        raise DomainError("grids differ; pass interpolate=True to compare")
    return float(np.max(np.abs(empirical.values - ref)))


def radial_ks(batch: EigenSampleBatch, cdf) -> float:
    """Exact Kolmogorov-Smirnov statistic of the moduli against a radial CDF callable."""
    return float(stats.kstest(batch.moduli, cdf).statistic)


def phase_ks(batch: EigenSampleBatch) -> float:
    """KS statistic of eigenvalue phases against the uniform law on (-pi, pi]."""
    phases = np.angle(batch.eigenvalues)
    return float(stats.kstest(phases, stats.uniform(loc=-np.pi, scale=2 * np.pi).cdf).statistic)


def cauchy_radial_cdf(r):
    """Radial CDF r^2/(1+r^2) of the single-matrix eigenvalue density."""
    r = np.asarray(r, dtype=float)
    return r * r / (1.0 + r * r)
