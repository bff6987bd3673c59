"""Command line: ``vacuumlab run|sweep|resume|accept``.

Outputs go below the output root: ``$VACUUMLAB_OUTPUT_ROOT`` when set,
otherwise ``./vacuumlab-out``.  Exit codes: 0 all checks pass, 1 some check
fails, 2 the config (or checkpoint) is invalid.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import CRITERIA, DETERMINISM, CriterionResult, fmt_line
from .config import ScenarioConfig, load_config, parse_values
from .errors import CheckpointError, ConfigError, VacuumLabError
from .io import atomic_write_bytes, csv_text, dumps, fmt, load_checkpoint, tree_digest
from .scenarios import RUNNERS, ScenarioResult, resume_euler1d

ENV_ROOT = "VACUUMLAB_OUTPUT_ROOT"
ENV_DETERMINISTIC = "VACUUMLAB_DETERMINISTIC"
DEFAULT_ROOT = "vacuumlab-out"

# sweep axes that are grid resolutions, with the metric whose decay is fitted
RESOLUTION_AXES = {("geom3d-suite", "piola_ns"): "piola_deviation"}


def output_root() -> Path:
    return Path(os.environ.get(ENV_ROOT) or DEFAULT_ROOT)


def _deterministic(flag: bool) -> bool:
    return flag or os.environ.get(ENV_DETERMINISTIC, "") not in ("", "0")


def run_dir_for(cfg: ScenarioConfig) -> Path:
    name = f"{cfg.kind}-{cfg.hash[:12]}"
    if cfg.output_dir:
        od = Path(cfg.output_dir)
        if od.is_absolute() and not os.environ.get(ENV_ROOT):
            return od
        name = od.name if od.is_absolute() else str(od)
    return output_root() / name


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_run(run_dir: Path, cfg: ScenarioConfig, produce, deterministic: bool,
              extra_manifest: dict | None = None) -> dict:
    """Run ``produce()`` and publish its files plus a manifest into ``run_dir``.

    Files are staged in a sibling directory that replaces ``run_dir`` only
    once everything, manifest last, has been written; on failure the staging
    directory is removed and no partial output remains.
    """
    run_dir = Path(run_dir)
    run_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(dir=run_dir.parent, prefix=f".{run_dir.name}.partial-"))
    try:
        started = _now()
        res: ScenarioResult = produce()
        atomic_write_bytes(stage / "config.yaml", cfg.dumps().encode())
        for name, data in sorted(res.files.items()):
            atomic_write_bytes(stage / name, data)
        manifest = {"kind": cfg.kind, "config_hash": cfg.hash, "code_version": __version__,
                    "verdict": res.verdict, "verdicts": res.verdicts, "metrics": res.metrics,
                    "outputs": sorted(["config.yaml", *res.files])}
        if extra_manifest:
            manifest.update(extra_manifest)
        if not deterministic:
            manifest["started_utc"] = started
            manifest["finished_utc"] = _now()
        atomic_write_bytes(stage / "manifest.json", dumps(manifest).encode())
        if run_dir.exists():
            shutil.rmtree(run_dir)
        os.replace(stage, run_dir)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    manifest["run_dir"] = str(run_dir)
    return manifest


def run(cfg: ScenarioConfig, run_dir: Path | None = None, deterministic: bool = False) -> dict:
    run_dir = Path(run_dir) if run_dir is not None else run_dir_for(cfg)
    return write_run(run_dir, cfg, lambda: RUNNERS[cfg.kind](cfg.params), deterministic)


def sweep(cfg: ScenarioConfig, axis: str, values: list, workers: int = 1,
          deterministic: bool = False) -> dict:
    """One run per value; failures are recorded and do not stop the sweep."""
    cfg.with_value(axis, cfg.value_of(axis))  # rejects unknown axes before any run
    root = output_root() / f"sweep-{cfg.kind}-{axis}-{cfg.hash[:8]}"

    def one(v):
        label = f"{axis}={fmt(v)}"
        try:
            c = cfg.with_value(axis, v)
            m = run(c, root / label, deterministic)
            return {"value": v, "verdict": m["verdict"], "run_dir": label, "metrics": m["metrics"]}
        except VacuumLabError as exc:
            return {"value": v, "verdict": "ERROR", "run_dir": label, "metrics": {}, "error": str(exc)}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, values))
    else:
        rows = [one(v) for v in values]
    keys = sorted({k for r in rows for k in r["metrics"]})
    header = ["value", "verdict", "run_dir", *keys]
    table = [[fmt(r["value"]), r["verdict"], r["run_dir"], *[r["metrics"].get(k) for k in keys]]
             for r in rows]
    summary = {"axis": axis, "base_config_hash": cfg.hash, "runs": rows}
    metric = RESOLUTION_AXES.get((cfg.kind, axis))
    if metric:
        pts = [(2.0 / (float(r["value"]) - 1.0), r["metrics"][metric])
               for r in rows if metric in r["metrics"] and r["metrics"][metric] > 0]
        if len(pts) >= 2:
            h, e = np.array(pts).T
            summary["fitted_order"] = float(np.polyfit(np.log(h), np.log(e), 1)[0])
    root.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(root / "summary.csv", csv_text(header, table).encode())
    atomic_write_bytes(root / "summary.json", dumps(summary).encode())
    summary["dir"] = str(root)
    return summary


def resume(ckpt, until: float, dt: float | None = None, deterministic: bool = False) -> dict:
    meta, arrays = load_checkpoint(ckpt)
    cfg = ScenarioConfig.from_dict({"kind": "euler1d", **meta["config"]})
    n_end = int(np.ceil(until / float(meta["dt"]) - 1e-9))
    cfg2 = cfg.with_value("T_end", n_end * float(meta["dt"]))
    ck = Path(ckpt).resolve()
    run_dir = output_root() / f"{ck.parent.name}-until-{fmt(float(until))}"
    return write_run(run_dir, cfg2, lambda: resume_euler1d(meta, arrays, until, dt), deterministic,
                     {"resumed_from": {"checkpoint": ck.name, "step_index": meta["step_index"],
                                       "t": meta["t"]}})


# --------------------------------------------------------------------------
# acceptance
# --------------------------------------------------------------------------
def _acceptance_tree(dest: Path, echo=None) -> list:
    results = []
    for fn in CRITERIA:
        t0 = time.perf_counter()
        r: CriterionResult = fn()
        if echo:
            echo(fmt_line(r.number, r.name, r.verdict, time.perf_counter() - t0))
        atomic_write_bytes(dest / f"criterion_{r.number}.json", dumps(r.to_dict()).encode())
        for name, data in r.files.items():
            atomic_write_bytes(dest / name, data)
        results.append(r)
    return results


def accept(echo=print) -> int:
    """Run criteria 1-8, then a second complete pass into a scratch directory;
    criterion 9 passes when both trees are byte-identical."""
    root = output_root()
    root.mkdir(parents=True, exist_ok=True)
    dest = root / "acceptance"
    stage = Path(tempfile.mkdtemp(dir=root, prefix=".acceptance.partial-"))
    try:
        results = _acceptance_tree(stage, echo)
        t0 = time.perf_counter()
        with tempfile.TemporaryDirectory(dir=root, prefix=".acceptance.rerun-") as other:
            _acceptance_tree(Path(other))
            a, b = tree_digest(stage), tree_digest(other)
        same = a == b
        diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
        r9 = CriterionResult(DETERMINISM[0], DETERMINISM[1], "PASS" if same else "FAIL",
                             {"files": a, "differing": diff})
        echo(fmt_line(r9.number, r9.name, r9.verdict, time.perf_counter() - t0))
        results.append(r9)
        atomic_write_bytes(stage / "criterion_9.json", dumps(r9.to_dict()).encode())
        table = [[r.number, r.name, r.verdict] for r in results]
        atomic_write_bytes(stage / "summary.csv",
                           csv_text(["criterion", "name", "verdict"], table).encode())
        if dest.exists():
            shutil.rmtree(dest)
        os.replace(stage, dest)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return 0 if all(r.verdict == "PASS" for r in results) else 1


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------
def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vacuumlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config")
    r.add_argument("--deterministic", action="store_true", help="omit timestamps from the manifest")
    s = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    s.add_argument("config")
    s.add_argument("--axis", required=True, help="parameter name, dotted for nested fields")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--deterministic", action="store_true")
    c = sub.add_parser("resume", help="continue a 1-d run from its checkpoint")
    c.add_argument("checkpoint")
    c.add_argument("--until", type=float, required=True)
    c.add_argument("--dt", type=float, default=None, help="must equal the checkpoint step")
    c.add_argument("--deterministic", action="store_true")
    sub.add_parser("accept", help="run the acceptance suite")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            m = run(load_config(args.config), deterministic=_deterministic(args.deterministic))
            print(f"{m['verdict']} {m['run_dir']}")
            for k, v in m["verdicts"].items():
                print(f"  {k}: {v}")
            return 0 if m["verdict"] == "PASS" else 1
        if args.verb == "sweep":
            cfg = load_config(args.config)
            values = parse_values(args.values)
            s = sweep(cfg, args.axis, values, args.workers, _deterministic(args.deterministic))
            for r in s["runs"]:
                print(f"{args.axis}={fmt(r['value'])}: {r['verdict']}")
            if "fitted_order" in s:
                print(f"fitted order: {s['fitted_order']:.3f}")
            print(s["dir"])
            return 0 if all(r["verdict"] == "PASS" for r in s["runs"]) else 1
        if args.verb == "resume":
            m = resume(args.checkpoint, args.until, args.dt, _deterministic(args.deterministic))
            print(f"{m['verdict']} {m['run_dir']}")
            return 0 if m["verdict"] == "PASS" else 1
        if args.verb == "accept":
            return accept()
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VacuumLabError as exc:
        print(f"FAIL: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
