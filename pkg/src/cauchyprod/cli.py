"""Command line interface: weight | density | kernel | sample | verify."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernel as K
from . import mcsim
from . import verify as V
from . import weight as W
from .config import OUT_ENV, ConfigError, RunConfig, parse_config
from .errors import ConvergenceError, DomainError, NumericError, SamplingError

WEIGHT_METHODS = ("closed", "meijer", "quad", "saddle", "origin")
DENSITY_KINDS = ("finite", "macroscopic")
KERNEL_MODES = ("finite", "bulk", "origin", "bessel")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def sweep(fn: Callable[[float], float], values: Sequence, threads: int = 1) -> list:
    """Map fn over values; results are index-ordered whatever the thread count."""
    if threads <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, values))


def write_table(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return path


def _radii(rc: RunConfig) -> np.ndarray:
    radii = rc.grid.radii()
    if radii.size == 0:
        raise DomainError("empty grid")
    return radii


def cmd_weight(rc: RunConfig, method: str, out: Path, threads: int = 1) -> Path:
    if method not in WEIGHT_METHODS:
        raise DomainError(f"unknown method {method!r}")
    cfg, contour = rc.ensemble, rc.contour_spec()
    fns = {
        "closed": lambda r: W.weight_profile([r], cfg, "closed").values[0],
        "meijer": lambda r: W.weight_meijer(r, cfg, contour),
        "quad": lambda r: W.weight_quadrature(r, cfg),
        "saddle": lambda r: W.weight_saddle_asymptotic(r, cfg),
        "origin": lambda r: W.weight_origin_limit(r, cfg, contour),
    }
    radii = _radii(rc)
    vals = sweep(lambda r: float(fns[method](float(r))), radii, threads)
    return write_table(out / f"weight_{method}.csv", ("r", "value"), zip(map(float, radii), vals))


def cmd_density(rc: RunConfig, kind: str, out: Path, threads: int = 1) -> tuple[Path, Path]:
    if kind not in DENSITY_KINDS:
        raise DomainError(f"unknown density kind {kind!r}")
    cfg = rc.ensemble
    radii = _radii(rc)
    if kind == "finite":
        fn = lambda r: K.density_finite(r, cfg)
    else:
        if not cfg.is_square:
            raise DomainError("macroscopic density is implemented for square products")
        fn = lambda r: K.density_macroscopic(r, cfg.n)
    vals = sweep(lambda r: float(fn(float(r))), radii, threads)
    csv_path = write_table(out / f"density_{kind}.csv", ("r", "value"), zip(map(float, radii), vals))
    mass = float(np.trapezoid(2.0 * np.pi * radii * np.asarray(vals), radii))
    diag = {"ensemble": cfg.to_dict(), "kind": kind, "grid_mass": mass}
    if kind == "finite":
        diag["total_mass"] = 1.0 / K.density_normalization(cfg)
    else:
        total = W.radial_integral(fn, rel_tol=1e-10)
        diag["total_mass"] = total
    side = out / f"density_{kind}.json"
    side.write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    return csv_path, side


def read_points(path: str | Path) -> list[tuple[complex, complex]]:
    """CSV with header zi_re,zi_im,zj_re,zj_im."""
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    need = {"zi_re", "zi_im", "zj_re", "zj_im"}
    if not rows or not need <= set(rows[0]):
        raise DomainError(f"points file needs columns {sorted(need)}")
    return [
        (complex(float(r["zi_re"]), float(r["zi_im"])), complex(float(r["zj_re"]), float(r["zj_im"])))
        for r in rows
    ]


def cmd_kernel(rc: RunConfig, mode: str, points: Path, out: Path, threads: int = 1) -> Path:
    if mode not in KERNEL_MODES:
        raise DomainError(f"unknown kernel mode {mode!r}")
    cfg, contour = rc.ensemble, rc.contour_spec()
    if mode == "bessel" and cfg.n != 2:
        raise DomainError("bessel mode exists for n=2 only")
    fns = {
        "finite": lambda a, b: K.kernel_finite(a, b, cfg, contour=contour).value,
        "bulk": lambda a, b: K.kernel_bulk_limit(a, b, cfg),
        "origin": lambda a, b: K.kernel_origin_limit(a, b, cfg, contour),
        "bessel": lambda a, b: K.kernel_origin_bessel_n2(a, b, cfg.nu[-1]),
    }
    pairs = read_points(points)
    vals = sweep(lambda p: complex(fns[mode](*p)), pairs, threads)
    rows = ((a.real, a.imag, b.real, b.imag, v.real, v.imag) for (a, b), v in zip(pairs, vals))
    return write_table(out / f"kernel_{mode}.csv", ("zi_re", "zi_im", "zj_re", "zj_im", "K_re", "K_im"), rows)


def cmd_sample(rc: RunConfig, out: Path, seed: int | None = None, threads: int = 1) -> tuple[mcsim.EigenSampleBatch, dict]:
    cfg = rc.ensemble
    stream = mcsim.RngStream(rc.mc.seed if seed is None else seed)
    batch = mcsim.product_eigenvalues(cfg, rc.mc.matrices, stream, threads)
    out.mkdir(parents=True, exist_ok=True)
    batch.write(out / "samples.csv")
    cdf = mcsim.cauchy_radial_cdf if cfg.n == 1 else V.finite_radial_cdf(cfg)
    summary = {
        "eigenvalues": int(batch.eigenvalues.size),
        "radial_ks": mcsim.radial_ks(batch, cdf),
        "phase_ks": mcsim.phase_ks(batch),
        "discarded": batch.discarded,
        "resamples": batch.resamples,
    }
    return batch, summary


def cmd_verify(rc: RunConfig, suite: str, out: Path, threads: int = 1) -> tuple[list[V.VerificationReport], Path]:
    reports = V.run_suite(rc, suite, threads)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"verify_{suite}.jsonl"
    path.write_text("".join(r.to_json() + "\n" for r in reports))
    return reports, path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cauchyprod",
        description="Eigenvalue statistics of products of Cauchy-Lorentz random matrices.",
        epilog=(
            "Config is JSON with keys n, dims (required), grid {r_min=0.05, r_max=5, points=50}, "
            "contour {abscissa, half_extent, node_count=2048} (optional), mc {seed=20240601, matrices=500}, "
            "tolerances {check_id: value}, output='out'. Unknown keys are rejected. "
            f"Output directory precedence: --out, ${OUT_ENV}, config 'output'."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the JSON run config")
    common.add_argument("--out", default=None, help="output directory (overrides config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes results (default 1)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("weight", parents=[common], help="weight function on the radial grid")
    s.add_argument("--method", choices=WEIGHT_METHODS, default="meijer")
    s = sub.add_parser("density", parents=[common], help="one-point density on the radial grid")
    s.add_argument("--kind", choices=DENSITY_KINDS, default="finite")
    s = sub.add_parser("kernel", parents=[common], help="kernel at point pairs from a CSV file")
    s.add_argument("--mode", choices=KERNEL_MODES, default="finite")
    s.add_argument("--points", required=True, help="CSV with columns zi_re,zi_im,zj_re,zj_im")
    s = sub.add_parser("sample", parents=[common], help="Monte-Carlo eigenvalues of the product")
    s.add_argument("--seed", type=int, default=None, help="override mc.seed")
    s = sub.add_parser("verify", parents=[common], help="run a verification suite")
    s.add_argument("--suite", choices=V.SUITES, default="all")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = parse_config(args.config)
        out = rc.output_dir(args.out)
        threads = max(1, args.threads)
        if args.command == "weight":
            print(cmd_weight(rc, args.method, out, threads))
        elif args.command == "density":
            for path in cmd_density(rc, args.kind, out, threads):
                print(path)
        elif args.command == "kernel":
            print(cmd_kernel(rc, args.mode, Path(args.points), out, threads))
        elif args.command == "sample":
            _, summary = cmd_sample(rc, out, args.seed, threads)
            print(json.dumps(summary, sort_keys=True))
        elif args.command == "verify":
            reports, path = cmd_verify(rc, args.suite, out, threads)
            for r in reports:
                print(r.to_json())
            failed = [r.check_id for r in reports if not r.verdict]
            if failed:
                print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
                return 1
    except (ConfigError, DomainError, ConvergenceError, NumericError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
