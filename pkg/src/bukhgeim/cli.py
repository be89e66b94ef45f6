"""Command-line experiment runner.

Subcommands ``forward``, ``reconstruct``, ``roundtrip`` and ``diagnostics``
each take ``--config``, ``--out`` and ``--threads`` and write a
``manifest.json`` listing the resolved configuration, stage timings and
every output file with its SHA-1.

Exit codes: 0 success, 2 configuration error, 3 partial dataset,
4 non-contractive spectral point.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cgo import decay_diagnostics
from .config import ExperimentConfig, load_config
from .dirac import conductivity_to_potential
from .exceptions import BukhgeimError, ConfigError, NotContractive, PartialDataset
from .grid import write_cfld
from .reconstruction import reconstruct, reconstruct_weak, pairing, stationary_phase_check, w_grid
from .scattering import ScatteringDataset, compute_dataset, potential_hash, w_lattice

log = logging.getLogger("bukhgeim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_NOT_CONTRACTIVE = 4

ERROR_COLUMNS = ["preset", "N", "R", "n_r", "n_theta", "relL2_Q", "relL2_gamma",
                 "diag_noise_floor", "weak_rel_error"]


def _sha1(path: Path) -> str:
    return hashlib.sha1(path.read_bytes()).hexdigest()


class Run:
    """Collects timings and outputs for one command and writes the manifest."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.timings: dict[str, float] = {}
        self.outputs: list[Path] = []
        self.extra: dict = {}
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def stage(self, name: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = run.timings.get(name, 0.0) + time.perf_counter() - self.t
                return False

        return _Timer()

    def add(self, *paths) -> None:
        self.outputs.extend(Path(p) for p in paths)

    def write_manifest(self, status: str) -> Path:
        manifest = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "config": self.cfg.to_dict(),
            "wall_time_s": time.perf_counter() - self.t0,
            "timings_s": self.timings,
            "outputs": [
                {"path": os.path.relpath(p, self.out), "sha1": _sha1(p)} for p in self.outputs
            ],
            **self.extra,
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _threads(args, cfg: ExperimentConfig) -> int:
    if args.threads is not None:
        n = args.threads
    elif os.environ.get("BUKHGEIM_THREADS"):
        try:
            n = int(os.environ["BUKHGEIM_THREADS"])
        except ValueError:
            raise ConfigError(f"BUKHGEIM_THREADS={os.environ['BUKHGEIM_THREADS']!r} is not an integer") from None
    else:
        n = cfg.parallel_width
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.parallel_width = _threads(args, cfg)
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    cfg.output_dir = str(out)
    return cfg, out


def _potential(cfg: ExperimentConfig, kind: str | None = None):
    preset = cfg.conductivity(kind)
    gamma = preset.sample(cfg.grid)
    return preset, gamma, conductivity_to_potential(gamma)


def _forward(cfg: ExperimentConfig, run: Run, kind: str, R: float, stem: str):
    with run.stage("potential"):
        preset, gamma, Q = _potential(cfg, kind)
    with run.stage("dataset"):
        ds = compute_dataset(Q, cfg.annulus(R), w_lattice(cfg.grid, cfg.w_stride, cfg.w_radius),
                             tol=cfg.tol, max_iter=cfg.max_iter, parallel_width=cfg.parallel_width,
                             conj_mode=cfg.conj_mode, method=cfg.method, w_stride=cfg.w_stride)
    with run.stage("write"):
        path = ds.save(run.out / f"{stem}.bksd")
        csv_path = run.out / f"{stem}.csv"
        ds.to_csv(csv_path)
        run.add(path, csv_path)
    return preset, gamma, Q, ds


def _dataset_status(ds: ScatteringDataset) -> int:
    if ds.is_complete:
        return EXIT_OK
    return EXIT_NOT_CONTRACTIVE if ds.any_not_contractive else EXIT_PARTIAL


def _error_row(cfg, kind, ds, result, weak_err) -> list:
    eq = result.errors.get("Q")
    eg = result.errors.get("gamma")
    return [kind, cfg.points_per_side, ds.annulus.r_inner, ds.annulus.n_r, ds.annulus.n_theta,
            "" if eq is None else repr(float(eq.rel_l2)), "" if eg is None else repr(float(eg.rel_l2)),
            repr(float(result.diag_noise_floor)), "" if weak_err is None else repr(float(weak_err))]


def _reconstruct(cfg: ExperimentConfig, run: Run, ds: ScatteringDataset, stem: str,
                 kind: str | None = None) -> list:
    """Reconstruct, write fields, and return one error-table row.

    Ground truth is used only when the dataset was computed from this
    configuration's potential (matching provenance hash).
    """
    if ds.grid != cfg.grid:
        raise ConfigError(f"dataset grid {ds.grid} differs from the configured grid {cfg.grid}")
    kind = kind or cfg.preset
    with run.stage("truth"):
        preset, _, Q = _potential(cfg, kind)
    truth = Q if potential_hash(Q) == ds.potential_sha1 else None
    if truth is None:
        log.warning("dataset provenance does not match preset %s; errors not computed", kind)
    with run.stage("reconstruct"):
        coarse, _ = w_grid(ds)
        gamma_truth = preset.sample(coarse) if truth is not None else None
        result = reconstruct(ds, truth=truth, gamma_truth=gamma_truth)
        weak_err = None
        g = cfg.g()
        if truth is not None:
            try:
                ref = pairing(truth, g)
                weak_err = float(np.abs(reconstruct_weak(ds, g) - ref).max() / np.abs(ref).max())
            except BukhgeimError as exc:
                log.warning("weak pairing skipped: %s", exc)
    with run.stage("write"):
        run.add(*result.Q_recovered.save(run.out / f"{stem}_Q", {"dataset_sha1": ds.potential_sha1}))
        gpath = run.out / f"{stem}_gamma.cfld"
        write_cfld(result.gamma, gpath)
        run.add(gpath)
    return _error_row(cfg, kind, ds, result, weak_err)


def _write_table(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ERROR_COLUMNS)
        w.writerows(rows)


# -- subcommands ---------------------------------------------------------------

def cmd_forward(args) -> int:
    cfg, out = _resolve(args)
    run = Run("forward", cfg, out)
    *_, ds = _forward(cfg, run, cfg.preset, cfg.annulus_R, "dataset")
    run.extra["conj_mode"] = {"configured": cfg.conj_mode, **ds.agreement()}
    run.extra["failures"] = ds.failures
    code = _dataset_status(ds)
    run.write_manifest("ok" if code == EXIT_OK else "partial")
    return code


def cmd_reconstruct(args) -> int:
    if args.manifest:
        man = json.loads(Path(args.manifest).read_text())
        cfg = ExperimentConfig.from_dict(man["config"])
        base = Path(args.manifest).parent
        entries = [o["path"] for o in man["outputs"] if o["path"].endswith(".bksd")]
        if not entries:
            raise ConfigError(f"{args.manifest} lists no dataset")
        ds_path = base / entries[0]
        if args.config:
            cfg = load_config(args.config)
        cfg.parallel_width = _threads(args, cfg)
        out = Path(args.out) if args.out else base / "reconstruct"
        cfg.output_dir = str(out)
    else:
        if not args.dataset:
            raise ConfigError("reconstruct needs --dataset or --manifest")
        cfg, out = _resolve(args)
        ds_path = Path(args.dataset)
    run = Run("reconstruct", cfg, out)
    with run.stage("load"):
        ds = ScatteringDataset.load(ds_path)
    run.extra["dataset"] = {"path": str(ds_path), "sha1": _sha1(ds_path)}
    row = _reconstruct(cfg, run, ds, "recon")
    table = out / "errors.csv"
    _write_table(table, [row])
    run.add(table)
    run.write_manifest("ok")
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    cfg, out = _resolve(args)
    run = Run("roundtrip", cfg, out)
    rows, agreement, code = [], {}, EXIT_OK
    for kind in cfg.presets():
        for R in cfg.radii():
            stem = f"{kind}_R{R:g}"
            *_, ds = _forward(cfg, run, kind, R, stem)
            agreement[stem] = ds.agreement()
            status = _dataset_status(ds)
            if status != EXIT_OK:
                code = max(code, status)
                run.extra.setdefault("failures", {})[stem] = ds.failures
                continue
            rows.append(_reconstruct(cfg, run, ds, stem, kind))
    table = out / "summary.csv"
    _write_table(table, rows)
    run.add(table)
    modes = [a["winning_mode"] for a in agreement.values()]
    run.extra["conj_mode"] = {"configured": cfg.conj_mode, "per_dataset": agreement,
                              "winning_mode": max(set(modes), key=modes.count) if modes else None}
    run.write_manifest("ok" if code == EXIT_OK else "partial")
    return code


def cmd_diagnostics(args) -> int:
    cfg, out = _resolve(args)
    run = Run("diagnostics", cfg, out)
    with run.stage("potential"):
        _, _, Q = _potential(cfg)
    with run.stage("decay"):
        rep = decay_diagnostics(Q, [tuple(s) for s in cfg.diag_shells], cfg.diag_p,
                                [complex(*z) for z in cfg.diag_z], [complex(*w) for w in cfg.diag_w],
                                tol=cfg.tol, max_iter=cfg.max_iter)
    decay_path = out / "decay.csv"
    rep.to_csv(decay_path)
    with run.stage("stationary_phase"):
        table = stationary_phase_check(cfg.g(), complex(*cfg.stationary_z), cfg.stationary_lambdas)
    sp_path = out / "stationary_phase.csv"
    table.to_csv(sp_path)
    run.add(decay_path, sp_path)
    run.extra["decay"] = {"quadrature": rep.quadrature,
                          "strictly_decreasing": {q: rep.is_strictly_decreasing(q) for q in rep.norms}}
    run.extra["stationary_phase_slope"] = table.slope
    run.write_manifest("ok")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bukhgeim", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment JSON (defaults used when omitted)")
        sp.add_argument("--out", help="output directory (overrides config output_dir)")
        sp.add_argument("--threads", type=int, help="worker threads (else $BUKHGEIM_THREADS, else config)")

    sp = sub.add_parser("forward", help="compute a scattering dataset")
    common(sp)
    sp.set_defaults(func=cmd_forward)
    sp = sub.add_parser("reconstruct", help="reconstruct Q and gamma from a dataset")
    common(sp)
    sp.add_argument("--dataset", help="dataset file written by 'forward'")
    sp.add_argument("--manifest", help="manifest of a 'forward' run (config and dataset taken from it)")
    sp.set_defaults(func=cmd_reconstruct)
    sp = sub.add_parser("roundtrip", help="forward + reconstruct + compare for each preset and radius")
    common(sp)
    sp.set_defaults(func=cmd_roundtrip)
    sp = sub.add_parser("diagnostics", help="decay norms and the stationary-phase table")
    common(sp)
    sp.set_defaults(func=cmd_diagnostics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PartialDataset as exc:
        print(f"partial dataset: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except NotContractive as exc:
        print(f"not contractive: {exc}", file=sys.stderr)
        return EXIT_NOT_CONTRACTIVE
    except (BukhgeimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
