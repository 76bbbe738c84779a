"""Command-line entry point: certified segmentation runs and oracle checks.

    certseg run --input image.pgm --scheme fe-prime --nu 5e-3 --out results/
    certseg run --builtin two-gaussian --scheme fd --c1 0.495349 --c2 0.056845
    certseg verify --suite oracle

A run writes the binary segmentation, the relaxed field, both dual
components (PGM), the per-cycle certificate CSV and a key=value manifest
that suffices to reproduce the run.  Exit codes: 0 ok, 2 bad input,
3 step-size refusal, 4 non-convergence, 5 internal error.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import AdaptConfig, AdaptiveResult, finest_norm_bound, run_adaptive
from .errors import (
    CertsegError,
    InputError,
    NotConvergedError,
    StepSizeError,
)
from .estimator import CSV_HEADER, csv_row
from .fdgrid import FdScheme, Lattice, fd_divergence, fd_gradient
from .inputs import AnalyticInput, ImageInput, make_two_gaussian
from .model import ModelParams, compute_theta, lloyd_2means
from .oracle import (
    exhaustive_binary_min,
    reference_relaxed_solve,
    scalar_prox_oracle,
)
from .pdsolver import SolverConfig
from .pgmio import read_pgm, write_pgm

SCHEME_NAMES = {"fd": "fd", "fe": "fe", "fe-prime": "fe_prime"}


def load_image(path) -> ImageInput:
    """Read a grayscale PGM whose side is 2^L + 1; L becomes the max level."""
    values, _ = read_pgm(path)
    return ImageInput.from_array(values)


@dataclass
class RunSpec:
    """Fully resolved configuration of one segmentation run."""

    input_path: str | None
    builtin: str | None
    scheme: str
    c1: float | None
    c2: float | None
    auto_means: bool
    nu: float
    tau: float | None
    sigma: float | None
    threshold: float
    alpha: float
    cycles: int
    init_level: int
    max_level: int | None
    out: str
    seed: int


def _read_config(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line without '=': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="certseg", description="Certified two-phase segmentation."
    )
    sub = parser.add_subparsers(dest="command")

    # defaults stay None here so config-file values are distinguishable
    # from explicit flags; the documented defaults live in _spec_from_args
    run_p = sub.add_parser("run", help="segment an input and emit certificates")
    run_p.add_argument("--config", help="key = value file; flags override it")
    run_p.add_argument("--input", help="grayscale PGM, side 2^L+1")
    run_p.add_argument("--builtin", choices=["two-gaussian"], help="analytic input")
    run_p.add_argument("--scheme", choices=sorted(SCHEME_NAMES))
    run_p.add_argument("--nu", type=float, help="regularization weight (default 5e-3)")
    run_p.add_argument("--c1", type=float)
    run_p.add_argument("--c2", type=float)
    run_p.add_argument(
        "--auto-means", action="store_true", help="2-means gray values (default if c1/c2 absent)"
    )
    run_p.add_argument("--tau", type=float, help="primal step (default: from the norm bound)")
    run_p.add_argument("--sigma", type=float, help="dual step (default: from the norm bound)")
    run_p.add_argument("--threshold", type=float, help="stop tolerance (default 1e-7)")
    run_p.add_argument("--alpha", type=float, help="marking threshold (default 0.2)")
    run_p.add_argument("--cycles", type=int, help="adaptive cycles (default 10)")
    run_p.add_argument("--init-level", type=int, help="starting mesh level (default 3)")
    run_p.add_argument("--max-level", type=int, help="analytic inputs only; images infer it")
    run_p.add_argument("--out", help="output directory (default certseg-out)")
    run_p.add_argument("--seed", type=int, help="recorded; randomized tests only")

    ver_p = sub.add_parser("verify", help="run the brute-force oracle cross-checks")
    ver_p.add_argument("--suite", choices=["oracle"], default="oracle")
    ver_p.add_argument("--seed", type=int, default=0)
    return parser


def _spec_from_args(args) -> RunSpec:
    cfg = _read_config(args.config) if args.config else {}

    def pick(name, cast, default=None):
        flag = getattr(args, name)
        if flag is not None:
            return flag
        if name in cfg:
            return cast(cfg[name])
        return default

    spec = RunSpec(
        input_path=pick("input", str),
        builtin=pick("builtin", str),
        scheme=pick("scheme", str, "fe-prime"),
        c1=pick("c1", float),
        c2=pick("c2", float),
        auto_means=bool(args.auto_means or cfg.get("auto_means") == "true"),
        nu=pick("nu", float, 5e-3),
        tau=pick("tau", float),
        sigma=pick("sigma", float),
        threshold=pick("threshold", float, 1e-7),
        alpha=pick("alpha", float, 0.2),
        cycles=pick("cycles", int, 10),
        init_level=pick("init_level", int, 3),
        max_level=pick("max_level", int),
        out=pick("out", str, "certseg-out"),
        seed=pick("seed", int, 0),
    )
    if (spec.input_path is None) == (spec.builtin is None):
        raise InputError("give exactly one of --input or --builtin")
    if spec.scheme not in SCHEME_NAMES:
        raise InputError(f"unknown scheme {spec.scheme!r}")
    return spec


def _resolve(spec: RunSpec):
    """Turn a RunSpec into (source, params, solver_cfg, adapt_cfg)."""
    if spec.input_path is not None:
        if spec.max_level is not None:
            raise InputError("--max-level is inferred from the image resolution")
        source = load_image(spec.input_path)
        max_level = source.level
        u0_sample = source.values
    else:
        source = make_two_gaussian()
        max_level = spec.max_level if spec.max_level is not None else 6
        lat = Lattice.from_level(max_level)
        u0_sample = source.lattice_values(lat)

    if spec.auto_means or (spec.c1 is None and spec.c2 is None):
        c1, c2 = lloyd_2means(u0_sample)
    elif spec.c1 is None or spec.c2 is None:
        raise InputError("give both --c1 and --c2, or neither (2-means)")
    else:
        c1, c2 = spec.c1, spec.c2
    params = ModelParams(c1=c1, c2=c2, nu=spec.nu)

    kind = SCHEME_NAMES[spec.scheme]
    if spec.tau is None and spec.sigma is None:
        solver_cfg = SolverConfig.for_bound(
            finest_norm_bound(kind, max_level), threshold=spec.threshold
        )
    elif spec.tau is None or spec.sigma is None:
        raise InputError("give both --tau and --sigma, or neither")
    else:
        solver_cfg = SolverConfig(
            tau=spec.tau, sigma=spec.sigma, threshold=spec.threshold
        )
    init_level = min(spec.init_level, max_level)
    adapt_cfg = AdaptConfig(
        alpha=spec.alpha,
        cycles=spec.cycles,
        init_level=init_level,
        max_level=max_level,
    )
    return source, params, solver_cfg, adapt_cfg, kind


def _raster(result: AdaptiveResult, values) -> np.ndarray:
    """Nodal field -> full-resolution lattice array for image output."""
    if result.lattice is not None:
        return values
    mesh = result.mesh
    n = 2**mesh.max_level + 1
    xs = np.arange(n) / (n - 1)
    pts = np.stack(np.meshgrid(xs, xs, indexing="xy"), axis=-1).reshape(-1, 2)
    out = mesh.eval_P1(values, pts)
    return out.reshape(n, n) if out.ndim == 1 else out.reshape(n, n, -1)


def _write_outputs(out_dir: Path, spec: RunSpec, params, solver_cfg, adapt_cfg,
                   result: AdaptiveResult, wall_ms: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    chi = _raster(result, result.chi)
    u = _raster(result, result.u_post)
    if result.lattice is not None:
        p = result.p_post
    else:
        p = _raster(result, result.p_post)
    write_pgm(out_dir / "segmentation.pgm", chi, maxval=255)
    write_pgm(out_dir / "relaxed.pgm", u, maxval=65535)
    write_pgm(out_dir / "dual_x.pgm", (p[..., 0] + 1.0) / 2.0, maxval=65535)
    write_pgm(out_dir / "dual_y.pgm", (p[..., 1] + 1.0) / 2.0, maxval=65535)

    rows = [CSV_HEADER] + [csv_row(c) for c in result.certificates]
    (out_dir / "certificate.csv").write_text("\n".join(rows) + "\n")

    final = result.final
    manifest = {
        "tool": "certseg",
        "version": __version__,
        "input": spec.input_path or f"builtin:{spec.builtin}",
        "scheme": spec.scheme,
        "c1": repr(params.c1),
        "c2": repr(params.c2),
        "nu": repr(params.nu),
        "auto_means": str(spec.auto_means or (spec.c1 is None and spec.c2 is None)).lower(),
        "tau": repr(solver_cfg.tau),
        "sigma": repr(solver_cfg.sigma),
        "threshold": repr(solver_cfg.threshold),
        "alpha": repr(adapt_cfg.alpha),
        "cycles": str(adapt_cfg.cycles),
        "init_level": str(adapt_cfg.init_level),
        "max_level": str(adapt_cfg.max_level),
        "seed": str(spec.seed),
        "cycles_run": str(len(result.certificates)),
        "stalled": str(result.stalled).lower(),
        "dofs_final": str(final.dofs),
        "err_u_sq_final": repr(final.err_u_sq),
        "err_chi_final": repr(final.err_chi),
        "numpy": np.__version__,
        "python": sys.version.split()[0],
        "wall_ms_total": str(wall_ms),
    }
    lines = [f"{key} = {value}" for key, value in manifest.items()]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def parse_manifest(path) -> dict:
    """Round-trip parse of a run manifest back into a string dict."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        if not raw.strip():
            continue
        key, value = raw.split(" = ", 1)
        out[key] = value
    return out


def run(spec: RunSpec) -> int:
    source, params, solver_cfg, adapt_cfg, kind = _resolve(spec)
    start = time.perf_counter()
    result = run_adaptive(source, params, kind, solver_cfg, adapt_cfg)
    wall_ms = int(1000 * (time.perf_counter() - start))
    _write_outputs(Path(spec.out), spec, params, solver_cfg, adapt_cfg, result, wall_ms)
    final = result.final
    print(
        f"{spec.scheme}: {len(result.certificates)} cycle(s), {final.dofs} dofs, "
        f"err_u^2 = {final.err_u_sq:.6e}, err_chi = {final.err_chi:.6e} "
        f"(eta = {final.eta_opt:.4f})"
    )
    return 0


def verify_suite(seed: int = 0) -> int:
    """Brute-force cross-checks of the resolvents, adjointness and bounds."""
    rng = np.random.default_rng(seed)
    failures = 0

    worst = 0.0
    for v, tau, t1, t2 in rng.random((1000, 4)) * [2.0, 4.0, 5.0, 5.0] - [0.5, 0, 0, 0]:
        closed = (v + 2 * tau * t2) / (1 + 2 * tau * (t1 + t2))
        worst = max(worst, abs(closed - scalar_prox_oracle(v, tau, t1, t2)))
    ok = worst <= 1e-8
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] resolvent vs golden-section oracle: {worst:.2e}")

    lat = Lattice(9)
    worst = 0.0
    for _ in range(50):
        v = rng.random((9, 9))
        q = rng.random((9, 9, 2))
        lhs = float(np.sum(fd_gradient(v, lat) * q))
        rhs = -float(np.sum(v * fd_divergence(q, lat)))
        worst = max(worst, abs(lhs - rhs))
    ok = worst <= 1e-10
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] gradient/divergence adjointness: {worst:.2e}")

    from .estimator import estimate_chi, estimate_u_lattice, mismatch_area
    from .model import threshold as thresh

    bound_ok = True
    for trial in range(3):
        lat = Lattice(4)
        u0 = np.where(rng.random((4, 4)) > 0.5, 0.9, 0.1) + 0.05 * rng.random((4, 4))
        params = ModelParams(c1=1.0, c2=0.0, nu=0.2)
        theta = compute_theta(u0, params)
        scheme = FdScheme(lat, theta)
        chi_star, _ = exhaustive_binary_min(scheme)
        res = reference_relaxed_solve(scheme, u0=np.clip(u0, 0, 1))
        cert = estimate_u_lattice(lat, res.u, res.p, theta, params)
        err_chi, _, _ = estimate_chi(lat, res.u, cert.err_u_sq)
        w = np.full(lat.n_nodes, lat.node_weight)
        mm = mismatch_area(thresh(res.u), chi_star, w)
        if mm > err_chi + 1e-12:
            bound_ok = False
    failures += not bound_ok
    print(f"[{'PASS' if bound_ok else 'FAIL'}] mis-segmentation bound vs exhaustive minimizer")

    return 0 if failures == 0 else 5


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--verify" in argv:  # flag alias for the verify subcommand
        argv = ["verify"] + [a for a in argv if a != "--verify"]
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(_spec_from_args(args))
        if args.command == "verify":
            return verify_suite(args.seed)
        parser.print_help()
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StepSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except CertsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
