"""Command-line front end: run manifests, figure presets, scaling collapse of
sweep curves, and laser/atom unit conversions."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__, io, kernels, physunits, scaling
from .config import PRESETS, DEFAULT_PRESET_SCALE, RunManifest, parse_config, preset
from .ensemble import WORKERS_ENV, EnsembleSpec, resolve_workers, run_ensemble
from .errors import ConfigError, EnsembleFailedError, InvalidParameterError, NoOverlapError

log = logging.getLogger("danse")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NO_OVERLAP = 0, 1, 2, 3


def _progress(cell, n_cells):
    tty = sys.stderr.isatty()

    def report(done, total):
        if tty:
            end = "\n" if done == total else ""
            print(f"\rcell {cell}/{n_cells}: {done}/{total} realizations", end=end,
                  file=sys.stderr, flush=True)
    return report


def _cell_manifest(manifest: RunManifest, cfg, seed, stem) -> dict:
    single = replace(manifest, config=replace(cfg, seed=seed), sweep={}, zip_axes=(), name=stem)
    return single.to_dict()


def _header(cfg, seed, n) -> dict:
    return {"L": cfg.L, "L0": cfg.L0, "W": cfg.W, "g": cfg.g, "gamma": cfg.gamma,
            "t_max": cfg.t_max, "seed": seed, "n_realizations": n}


def execute(manifest: RunManifest, workers=None, checkpoint: bool = False) -> int:
    """Run every sweep cell and write its files; returns an exit code."""
    cells = manifest.cells()
    out = Path(manifest.out)
    ext = "." + manifest.format
    n_workers = resolve_workers(workers)
    log.info("%d cell(s) x %d realizations, %d worker(s), output in %s",
             len(cells), manifest.n_realizations, n_workers, out)
    finals = []
    status = EXIT_OK
    for k, (coords, cfg, seed) in enumerate(cells, 1):
        stem = io.cell_stem(manifest.name, coords)
        spec = EnsembleSpec(cfg, manifest.n_realizations, seed, manifest.freeze)
        ckpt = out / ".checkpoints" / f"{stem}.npz" if checkpoint else None
        if ckpt:
            ckpt.parent.mkdir(parents=True, exist_ok=True)
        started = datetime.now(timezone.utc).isoformat(timespec="seconds")
        t0 = time.perf_counter()
        try:
            res = run_ensemble(spec, n_workers, checkpoint=ckpt, progress=_progress(k, len(cells)))
        except EnsembleFailedError as exc:
            log.error("cell %s: %s", stem, exc)
            status = EXIT_FAILED
            continue
        wall = time.perf_counter() - t0
        header = _header(cfg, seed, manifest.n_realizations)
        files = [stem + ext]
        io.write_table(out / files[0], {"t": res.sample_times, "p_mean": res.p_mean,
                                        "p_sem": res.p_sem, "x2_mean": res.x2_mean,
                                        "x2_sem": res.x2_sem}, header, manifest.format)
        for t, rho in res.density_mean.items():
            name = f"{stem}__rho_t={io.format_value(t)}{ext}"
            sites = np.arange(rho.size) - (rho.size - 1) // 2
            io.write_table(out / name, {"n": sites, "rho_mean": rho}, dict(header, t=t),
                           manifest.format)
            files.append(name)
        meta = {k2: v for k2, v in res.meta.items() if k2 != "spec"}
        sidecar = {
            "manifest": _cell_manifest(manifest, cfg, seed, stem),
            "cell": coords,
            "master_seed": manifest.master_seed,
            "cell_seed": seed,
            "n_realizations": manifest.n_realizations,
            "grid": {a: list(v) for a, v in manifest.sweep.items()},
            "files": files,
            "result": meta,
            "runtime": {"wall_time_s": wall, "workers": n_workers, "started_utc": started,
                        "version": __version__, "backend": kernels.BACKEND},
        }
        io.write_sidecar(out / f"{stem}.meta.json", sidecar)
        finals.append((coords, cfg, res))
        log.info("cell %d/%d %s: p(t_max)=%.6g +- %.2g (%.1f s)", k, len(cells), stem,
                 res.p_mean[-1], res.p_sem[-1], wall)
    if "g" in manifest.sweep and "g" not in manifest.zip_axes:
        _write_curves(manifest, finals, out, ext)
    return status


def _write_curves(manifest, finals, out, ext):
    """One p(g) file per combination of the other axes, for collapse fits."""
    groups = {}
    for coords, cfg, res in finals:
        rest = tuple((a, v) for a, v in coords.items() if a != "g")
        groups.setdefault(rest, []).append((cfg, res))
    for rest, members in groups.items():
        members.sort(key=lambda m: m[0].g)
        cfg = members[0][0]
        meta = {"L0": cfg.L0, "W": cfg.W, "gamma": cfg.gamma, "t_max": cfg.t_max,
                "n_realizations": manifest.n_realizations}
        cols = {"g": [m[0].g for m in members], "p": [m[1].p_mean[-1] for m in members],
                "p_sem": [m[1].p_sem[-1] for m in members]}
        stem = io.cell_stem(manifest.name + "__curve", dict(rest))
        io.write_table(out / (stem + ext), cols, meta, manifest.format)


def _overrides(args) -> dict:
    out = {}
    for key in ("seed", "out", "format", "scale"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def cmd_run(args) -> int:
    if args.config is None:
        raise ConfigError("run needs --config PATH")
    manifest = parse_config(args.config, _overrides(args))
    print(manifest.echo(), end="", file=sys.stderr)
    log.info("total cells: %d", manifest.n_cells)
    if args.dry_run:
        return EXIT_OK
    return execute(manifest, args.threads, args.checkpoint)


def cmd_preset(args) -> int:
    scale = DEFAULT_PRESET_SCALE if args.scale is None else args.scale
    manifest = preset(args.name, scale=scale, seed=2012 if args.seed is None else args.seed,
                      out=args.out)
    if args.format:
        manifest = replace(manifest, format=args.format)
    text = manifest.echo()
    if args.emit:
        io.atomic_write(args.emit, text)
    print(text, end="", file=sys.stderr)
    log.info("total cells: %d", manifest.n_cells)
    if args.dry_run or args.emit:
        return EXIT_OK
    return execute(manifest, args.threads, args.checkpoint)


def _load_curves(paths):
    curves = []
    for p in paths:
        cols, meta = io.read_table(p)
        if "L0" not in meta or "g" not in cols or "p" not in cols:
            raise ConfigError("not a sweep-curve file (needs L0 metadata and g, p columns)",
                              source=str(p))
        curves.append(scaling.SweepCurve(int(meta["L0"]), cols["g"], cols["p"], cols.get("p_sem")))
    return curves


def cmd_collapse(args) -> int:
    curves = _load_curves(args.files)
    if len({c.L0 for c in curves}) < 2 or len(curves) != len({c.L0 for c in curves}):
        print("error: need ≥ 2 distinct L0", file=sys.stderr)
        return EXIT_USAGE
    curves.sort(key=lambda c: c.L0)
    report = {"target": args.target, "files": [str(p) for p in args.files],
              "L0": [c.L0 for c in curves]}
    gt_range = tuple(args.gt_range) if args.gt_range else None
    if args.regime:
        gt_range = scaling.REGIME_RANGES[args.regime]
    search = tuple(args.search) if args.search else None
    try:
        if args.target == "g":
            fit = scaling.fit_collapse_exponent(curves, search, "g", n_boot=args.n_boot, seed=args.seed)
            s = fit.s
        else:
            s = args.s
            if s is None:
                s = scaling.fit_collapse_exponent(curves, n_boot=0).s
            fit = scaling.fit_collapse_exponent(curves, search, "p", s=s, g_tilde_range=gt_range,
                                                n_boot=args.n_boot, seed=args.seed)
            report["s"] = s
            report["g_tilde_range"] = list(gt_range) if gt_range else None
    except NoOverlapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_OVERLAP
    zero = scaling.collapse_objective(curves, 0.0, args.target, s if args.target == "p" else None,
                                      gt_range if args.target == "p" else None)
    report.update({"exponent": fit.s, "stderr": fit.s_stderr, "objective": fit.objective,
                   "objective_at_zero": zero, "search": list(fit.search),
                   "scan": {"exponent": list(fit.scan[0]), "objective": list(fit.scan[1])}})
    nu = fit.s if args.target == "p" else 0.0
    rows = {"L0": [], "g": [], "g_tilde": [], "p": [], "p_tilde": []}
    for c in curves:
        rows["L0"].extend([c.L0] * c.g_values.size)
        rows["g"].extend(c.g_values)
        rows["g_tilde"].extend(scaling.scaled_g(c.g_values, c.L0, s))
        rows["p"].extend(c.p_values)
        rows["p_tilde"].extend(scaling.scaled_p(c.p_values, c.L0, nu))
    out = Path(args.out or ".")
    io.write_sidecar(out / f"collapse_{args.target}.json", report)
    io.write_csv(out / f"collapse_{args.target}_curves.csv", rows,
                 {"s": s, "nu": nu, "target": args.target})
    label = "s" if args.target == "g" else "nu"
    print(f"{label} = {fit.s:.6g} +- {fit.s_stderr:.2g}  (objective {fit.objective:.4g}, "
          f"at 0: {zero:.4g})")
    return EXIT_OK


def cmd_units(args) -> int:
    if args.op == "se-rate":
        params = physunits.LaserAtomParams(args.gamma0, args.omega, args.delta)
        value = physunits.se_rate(params, approximate=args.approx)
    elif args.op == "depth":
        value = physunits.potential_depth(args.omega, args.delta)
    else:
        value = physunits.reduced_gamma(args.gamma_se, args.t_over_hbar)
    print(repr(float(value)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="danse", description=__doc__)
    ap.add_argument("--version", action="version",
                    version=f"%(prog)s {__version__} ({kernels.BACKEND} kernels)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--scale", type=float, help="shrink t_max and realizations, raise gamma")
        p.add_argument("--threads", type=int,
                       help=f"worker processes (default ${WORKERS_ENV} or CPU count)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--dry-run", action="store_true", help="print the manifest and stop")
        p.add_argument("--checkpoint", action="store_true",
                       help="keep per-cell checkpoints under OUT/.checkpoints and resume from them")

    p = sub.add_parser("run", help="run a manifest (YAML, or a .meta.json sidecar)")
    p.add_argument("--config", help="manifest path")
    run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a figure preset")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--emit", help="write the manifest YAML here instead of running")
    run_flags(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("collapse", help="fit a scaling exponent to sweep-curve files")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--target", choices=("g", "p"), default="g")
    p.add_argument("--s", type=float, help="g exponent for --target p (fitted if omitted)")
    p.add_argument("--gt-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--regime", choices=tuple(scaling.REGIME_RANGES))
    p.add_argument("--search", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for the report and rescaled curves")
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("units", help="laser/atom unit conversions")
    usub = p.add_subparsers(dest="op", required=True)
    q = usub.add_parser("se-rate")
    q.add_argument("--gamma0", type=float, required=True)
    q.add_argument("--omega", type=float, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--approx", action="store_true", help="large-detuning form")
    q = usub.add_parser("depth")
    q.add_argument("--omega", type=float, required=True)
    q.add_argument("--delta", type=float, required=True)
    q = usub.add_parser("reduced-gamma")
    q.add_argument("--gamma-se", type=float, required=True)
    q.add_argument("--t-over-hbar", type=float, default=1.0e3)
    p.set_defaults(func=cmd_units)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
