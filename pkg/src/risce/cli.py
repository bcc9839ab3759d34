"""Command line entry points: ``simulate`` sweeps, ``selftest`` battery."""

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .config import ConfigError, SystemConfig
from .experiment import (
    ExperimentSpec,
    emit_csv,
    emit_plotdata,
    emit_runs_csv,
    run_experiment,
)
from .selftest import run_selftest


def _parse_snr(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def load_spec(path):
    """Build an :class:`ExperimentSpec` from a JSON config document."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    sys_doc = dict(doc.get("system", {}))
    if "snr_db_grid" in sys_doc:
        sys_doc["snr_db_grid"] = [float(v) for v in sys_doc["snr_db_grid"]]
    cfg = SystemConfig(**sys_doc)
    return ExperimentSpec(
        system=cfg,
        methods=tuple(doc.get("methods", ("proposed", "fdd_ls", "fdd_lskrf"))),
        feedback_modes=tuple(doc.get("feedback_modes", ("noise_free", "awgn"))),
        workers=int(doc.get("workers", 1)),
    )


def _cmd_simulate(args):
    spec = load_spec(args.config)
    if args.seed is not None:
        spec.system.master_seed = args.seed
    if args.runs is not None:
        spec.system.mc_runs = args.runs
    if args.snr is not None:
        spec.system.snr_db_grid = _parse_snr(args.snr)
    if args.methods is not None:
        spec.methods = tuple(args.methods.split(","))
    if args.workers is not None:
        spec.workers = args.workers

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    start = time.time()
    table, records = run_experiment(spec, collect_runs=True)
    wall = time.time() - start

    csv_path = emit_csv(table, out_dir / "results.csv")
    plot_paths = emit_plotdata(table, str(out_dir))
    outputs = [str(csv_path)] + plot_paths
    if args.dump_runs:
        outputs.append(str(emit_runs_csv(records, spec, out_dir / "runs.csv")))

    failures = sum(len(r["failures"]) for r in records)
    manifest = {
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "system": {
            k: getattr(spec.system, k)
            for k in ("M", "L", "N", "T", "K", "P", "mc_runs", "master_seed",
                      "tals_tol", "tals_max_iters")
        },
        "snr_db_grid": [str(v) for v in spec.system.snr_db_grid],
        "methods": list(spec.methods),
        "feedback_modes": list(spec.feedback_modes),
        "workers": spec.workers,
        "run_failures": failures,
        "wall_time_s": wall,
        "outputs": outputs,
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {csv_path} and {len(plot_paths)} plot files in {wall:.1f}s")
    if failures:
        print(f"warning: {failures} per-run estimator failures (see runs column)",
              file=sys.stderr)
    return 0


def _cmd_selftest(_args):
    results = run_selftest()
    failed = []
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        if not ok:
            failed.append({"check": name, "detail": detail})
    if failed:
        print(json.dumps({"status": "fail", "failures": failed}))
        return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="risce",
        description="Closed-loop channel estimation experiments for "
                    "non-reciprocal RIS-assisted MIMO links",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an NMSE-versus-SNR campaign")
    sim.add_argument("--config", required=True, help="JSON experiment config")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument("--runs", type=int, default=None, help="override Monte Carlo runs")
    sim.add_argument("--snr", default=None, help="override SNR grid, e.g. 0,5,10,inf")
    sim.add_argument("--methods", default=None, help="comma list of methods to run")
    sim.add_argument("--out", default="results", help="output directory")
    sim.add_argument("--workers", type=int, default=None, help="parallel worker count")
    sim.add_argument("--dump-runs", action="store_true", help="also write per-run NMSE CSV")
    sim.set_defaults(func=_cmd_simulate)

    st = sub.add_parser("selftest", help="run the built-in invariant suites")
    st.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(json.dumps({"status": "error", "error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
