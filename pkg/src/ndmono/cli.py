"""Command line pipeline: ``gen-data``, ``reconstruct``, ``compare``, ``render``.

A run directory holds everything for one phantom::

    run/config.json          effective RunConfig
    run/phantom.json
    run/mesh.off             FEM mesh (when FEM data was simulated)
    run/data/manifest.json   datum files per noise level, with seeds
    run/data/*.bin           2N x 2N complex matrices, little-endian complex128
    run/results/<method>_d<delta>.{csv,json,svg}

Set ``NDMONO_CACHE_DIR`` (or pass ``--cache-dir``) to keep H matrices on disk
between runs.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import cache
from .compare import diff, write_difference_table
from .engine import MonotonicityReconstructor, read_result, write_result
from .fem import DEFAULT_H, mesh_disk, nd_matrix_fem_corrected
from .noise import NoiseSpec, make_noise, operator_norm
from .phantom import load_phantom
from .render import render_svg
from .spectral import TruncationPlan, background_nd, nd_ball, read_matrix, write_matrix, write_matrix_csv

log = logging.getLogger("ndmono")

METHODS = ("nonlinear", "linear")
DEFAULT_DELTAS = (0.0, 1e-5, 1e-4, 1e-3, 1e-2)


@dataclass
class RunConfig:
    phantom: str = "example-b"
    methods: list = field(default_factory=lambda: list(METHODS))
    deltas: list = field(default_factory=lambda: list(DEFAULT_DELTAS))
    seed: int = 0
    order: int = 16
    assembly_order: int = 200
    hex_radius: float = 0.025
    beta_lower: float = 4.0
    mu: float = 1.0
    precision_bits: int = 256
    mesh_h: float = DEFAULT_H
    out: str = "run"

    def __post_init__(self):
        self.methods = [self.methods] if isinstance(self.methods, str) else list(self.methods)
        self.deltas = [float(d) for d in (self.deltas if isinstance(self.deltas, (list, tuple)) else [self.deltas])]
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}")
        if any(d < 0 for d in self.deltas):
            raise ValueError("noise levels must be non-negative")
        if self.order < 1 or self.assembly_order < self.order:
            raise ValueError("need 1 <= order <= assembly_order")
        if not 0 < self.hex_radius < 1:
            raise ValueError("hex_radius must lie in (0, 1)")
        if not self.beta_lower > 0 or not self.mu > 0:
            raise ValueError("beta_lower and mu must be positive")
        if not self.mesh_h > 0:
            raise ValueError("mesh_h must be positive")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        d = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def seed_for(self, delta: float) -> int:
        """A distinct realization per noise level."""
        return self.seed + self.deltas.index(delta)


def delta_tag(delta: float) -> str:
    # no dots, so file suffixes stay unambiguous
    return "d" + f"{delta:g}".replace(".", "p")


# -- gen-data ------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    data_dir = out / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    phantom = load_phantom(cfg.phantom)
    phantom.save(out / "phantom.json")
    N = cfg.order
    info: dict = {"order": N, "phantom": phantom.name, "files": {}}

    fem = None
    if not phantom.is_empty:
        t0 = time.perf_counter()
        mesh = mesh_disk(phantom, cfg.mesh_h)
        mesh.write_off(out / "mesh.off")
        fem = nd_matrix_fem_corrected(mesh, phantom, N)
        info["fem"] = {"nodes": mesh.n_nodes, "seconds": time.perf_counter() - t0, **fem.meta}
        write_matrix(data_dir / "fem.bin", fem)

    ball = phantom.single_ball
    if phantom.is_empty:
        datum = background_nd(N)
        info["source"] = "background"
    elif ball is not None:
        datum = nd_ball(ball.ball, ball.contrast, TruncationPlan(N, cfg.assembly_order), precision_bits=cfg.precision_bits)
        write_matrix(data_dir / "exact.bin", datum)
        gap = operator_norm(datum.entries - fem.entries)
        info["source"] = "exact"
        info["exact_vs_fem"] = gap
        log.info("exact vs FEM datum: operator-norm gap %.3e (relative %.3e)", gap, gap / operator_norm(datum.entries))
    else:
        datum = fem
        info["source"] = "fem"
    write_matrix(data_dir / "noiseless.bin", datum)
    write_matrix_csv(data_dir / "noiseless.csv", datum)

    A = datum.entries
    for delta in cfg.deltas:
        seed = cfg.seed_for(delta)
        noisy = A + make_noise(A, NoiseSpec(delta, seed)).entries if delta > 0 else A
        name = f"data_{delta_tag(delta)}.bin"
        write_matrix(data_dir / name, noisy)
        info["files"][repr(delta)] = {"file": name, "delta": delta, "seed": seed}
    (data_dir / "manifest.json").write_text(json.dumps(info, indent=2, default=float) + "\n")
    return info


# -- reconstruct ----------------------------------------------------------------

def _manifest(cfg: RunConfig) -> dict:
    path = Path(cfg.out) / "data" / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run gen-data first")
    return json.loads(path.read_text())


def cmd_reconstruct(cfg: RunConfig) -> list[Path]:
    out = Path(cfg.out)
    manifest = _manifest(cfg)
    res_dir = out / "results"
    res_dir.mkdir(parents=True, exist_ok=True)
    phantom_file = out / "phantom.json"
    phantom = load_phantom(phantom_file) if phantom_file.exists() else None
    written = []
    for method in cfg.methods:
        est = MonotonicityReconstructor(
            method=method,
            beta_lower=cfg.beta_lower,
            mu=cfg.mu,
            order=cfg.order,
            assembly_order=cfg.assembly_order,
            hex_radius=cfg.hex_radius,
            precision_bits=cfg.precision_bits,
        )
        for delta in cfg.deltas:
            entry = manifest["files"].get(repr(delta))
            if entry is None:
                raise FileNotFoundError(f"no datum for delta={delta}; rerun gen-data with it")
            Rd = read_matrix(out / "data" / entry["file"])
            result = est.fit(Rd).result(delta=delta, seed=entry["seed"])
            stem = res_dir / f"{method}_{delta_tag(delta)}"
            write_result(result, stem.with_suffix(".csv"))
            render_svg(result, stem.with_suffix(".svg"), phantom, title=f"{method}, delta={delta:g}")
            log.info(
                "%s delta=%g: %d/%d cells, alpha=%.3e, %.2fs",
                method, delta, len(result.accepted_cells), len(result.tiling),
                result.alpha, sum(result.meta["timings"].values()),
            )
            written.append(stem.with_suffix(".csv"))
    return written


# -- compare ------------------------------------------------------------------

def cmd_compare(runs: list[str], out_csv, deltas=None) -> dict:
    """Linear vs non-linear differences for each run directory and noise level."""
    rows: dict = {}
    details = {}
    for run in runs:
        run = Path(run)
        res_dir = run / "results"
        name = run.name
        cfg_file = run / "config.json"
        levels = deltas if deltas is not None else (
            RunConfig.from_json(cfg_file.read_text()).deltas if cfg_file.exists() else DEFAULT_DELTAS
        )
        for delta in levels:
            paths = [res_dir / f"{m}_{delta_tag(delta)}.csv" for m in METHODS]
            missing = [str(p) for p in paths if not p.exists()]
            if missing:
                raise FileNotFoundError(f"missing results: {', '.join(missing)}")
            rep = diff(read_result(paths[0]), read_result(paths[1]))
            rows.setdefault(float(delta), {})[name] = rep
            details[f"{name}:{delta_tag(delta)}"] = rep.as_dict()
            log.info("%s delta=%g: e_abs=%d e_rel=%.3e (%d at machine precision)", name, delta, rep.e_abs, rep.e_rel, rep.n_rounding)
    write_difference_table(rows, out_csv)
    Path(out_csv).with_suffix(".json").write_text(json.dumps(details, indent=2) + "\n")
    return rows


# -- argument parsing ------------------------------------------------------------

def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON RunConfig; flags below override it")
    p.add_argument("--phantom", help="phantom JSON file or built-in name")
    p.add_argument("--method", action="append", choices=METHODS, help="repeatable; default both")
    p.add_argument("--delta", type=float, action="append", help="noise level, repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--beta-lower", type=float)
    p.add_argument("--hex-radius", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--assembly-order", type=int)
    p.add_argument("--precision-bits", type=int)
    p.add_argument("--mesh-h", type=float)
    p.add_argument("--out", help="run directory")


def _config_from_args(args, reuse_run: bool = False) -> RunConfig:
    """Defaults < --config (or, with reuse_run, the run's own config.json) < flags."""
    config = args.config
    if config is None and reuse_run:
        saved = Path(args.out or RunConfig().out) / "config.json"
        config = saved if saved.exists() else None
    base = RunConfig.from_json(Path(config).read_text()) if config else RunConfig()
    d = dataclasses.asdict(base)
    overrides = {
        "phantom": args.phantom,
        "methods": args.method,
        "deltas": args.delta,
        "seed": args.seed,
        "mu": args.mu,
        "beta_lower": args.beta_lower,
        "hex_radius": args.hex_radius,
        "order": args.order,
        "assembly_order": args.assembly_order,
        "precision_bits": args.precision_bits,
        "mesh_h": args.mesh_h,
        "out": args.out,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndmono", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--cache-dir", help=f"H matrix cache (sets {cache.ENV_VAR})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate noiseless and noisy ND matrices")
    _add_run_options(p)
    p = sub.add_parser("reconstruct", help="run the monotonicity reconstructions")
    _add_run_options(p)

    p = sub.add_parser("compare", help="linear vs non-linear difference table")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--delta", type=float, action="append")
    p.add_argument("--out", default="differences.csv")

    p = sub.add_parser("render", help="SVG of a result CSV")
    p.add_argument("result", help="result CSV written by reconstruct")
    p.add_argument("--phantom", help="phantom to outline")
    p.add_argument("--out", help="SVG path (default: next to the CSV)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.cache_dir:
        os.environ[cache.ENV_VAR] = args.cache_dir
    try:
        if args.command == "gen-data":
            cfg = _config_from_args(args)
            info = cmd_gen_data(cfg)
            print(f"wrote {len(info['files'])} data files to {Path(cfg.out) / 'data'} ({info['source']} datum)")
        elif args.command == "reconstruct":
            cfg = _config_from_args(args, reuse_run=True)
            for p in cmd_reconstruct(cfg):
                print(p)
        elif args.command == "compare":
            rows = cmd_compare(args.runs, args.out, args.delta)
            for delta in sorted(rows):
                cells = "  ".join(f"{k}: {r.e_abs} ({r.e_rel:.3e})" for k, r in sorted(rows[delta].items()))
                print(f"delta={delta:g}  {cells}")
        elif args.command == "render":
            result = read_result(args.result)
            phantom = load_phantom(args.phantom) if args.phantom else None
            out = args.out or str(Path(args.result).with_suffix(".svg"))
            render_svg(result, out, phantom)
            print(out)
    except (ValueError, FileNotFoundError) as exc:
        print(f"ndmono: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
