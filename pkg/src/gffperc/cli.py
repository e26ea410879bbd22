"""Experiment runner: config ingestion, subcommand dispatch, persistence.

Configuration comes from an optional JSON document (--config); command-line
flags override config fields, and two environment variables provide
defaults: GFFPERC_OUTPUT_DIR (output directory) and GFFPERC_SEED (master
seed).  Data files are written atomically and never contain timestamps;
each run also writes a metadata JSON with the resolved config, a content
hash of it, and the wall-clock time.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numeric flag raised while
--strict was set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import renorm as renorm_mod
from .estimators import (
    boundary_connection_curve,
    estimate_critical_height,
    estimate_event,
    estimate_events_shared,
    fit_decay,
)
from .events import parse_event
from .field import build_green, green_to_csv, sample
from .inequalities import (
    check_coupling_bound,
    check_dual_decay,
    check_fkg,
    check_height_shift_bound,
)
from .lattice import build_box
from .results_io import (
    SCHEMA_VERSION,
    append_checks_jsonl,
    append_estimates_csv,
    write_estimates_json,
    write_json,
)
from .rng import StreamKey, derive

__all__ = ["main", "run", "ExperimentConfig", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved configuration for one run; flags override file fields."""

    command: str
    experiment_id: str
    out_dir: str
    seed: int
    strict: bool = False
    options: dict = field(default_factory=dict)

    def opt(self, key: str, default=None):
        return self.options.get(key, default)

    def require(self, key: str):
        if key not in self.options or self.options[key] is None:
            raise ConfigError(f"missing required option {key!r}")
        return self.options[key]

    def canonical(self) -> dict:
        return {
            "command": self.command,
            "experiment_id": self.experiment_id,
            "seed": self.seed,
            "strict": self.strict,
            "options": {k: self.options[k] for k in sorted(self.options)},
            "schema_version": SCHEMA_VERSION,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return doc


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg = _load_config_file(args.config)
    options = dict(file_cfg.get("options", {}))
    # flat config documents are accepted too
    for key, value in file_cfg.items():
        if key not in ("options", "command", "experiment_id", "seed", "strict",
                       "out_dir"):
            options.setdefault(key, value)
    for key, value in vars(args).items():
        if key in ("command", "config", "experiment_id", "seed", "strict",
                   "out", "func"):
            continue
        if value is not None:
            options[key] = value

    seed = args.seed
    if seed is None:
        seed = file_cfg.get("seed")
    if seed is None:
        seed = os.environ.get("GFFPERC_SEED")
    if seed is None:
        seed = 0
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad seed {seed!r}") from exc

    out_dir = args.out or file_cfg.get("out_dir") or \
        os.environ.get("GFFPERC_OUTPUT_DIR") or "."
    experiment_id = args.experiment_id or file_cfg.get("experiment_id") or \
        f"{args.command}-s{seed}"
    strict = bool(args.strict or file_cfg.get("strict", False))
    if "M" in options:
        options["M"] = int(options["M"])
        if options["M"] < 1:
            raise ConfigError("M must be >= 1")
    return ExperimentConfig(args.command, experiment_id, out_dir, seed,
                            strict, options)


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(";", ",").split(",") if t != ""]


def _h_grid(text: str) -> list[float]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError("h grid must be lo:hi:count")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ConfigError("h grid count must be >= 1")
    if count == 1:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _parse_vertices(text: str) -> frozenset:
    out = []
    for token in str(text).split(";"):
        token = token.strip()
        if token:
            a, b = token.split(",")
            out.append((int(a), int(b)))
    return frozenset(out)


# ---------------------------------------------------------------------------
# subcommands; each returns (artifacts dict, numeric flags list)


def _cmd_green(cfg: ExperimentConfig):
    n = int(cfg.require("n"))
    killed = _parse_vertices(cfg.opt("killed", ""))
    green = build_green(build_box(n), killed)
    path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.green.csv")
    green_to_csv(green, path)
    return {"green_csv": path, "dim": green.dim}, []


def _cmd_sample(cfg: ExperimentConfig):
    n = int(cfg.require("n"))
    count = int(cfg.opt("count", 1))
    if count < 1:
        raise ConfigError("count must be >= 1")
    green = build_green(build_box(n))
    path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.fields.csv")
    root = StreamKey(cfg.seed)
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replica", "x", "y", "phi", "seed", "schema_version"])
        for i in range(count):
            fs = sample(green, derive(root, i))
            for v, value in zip(fs.vertices, fs.values):
                writer.writerow([i, v[0], v[1], repr(float(value)),
                                 cfg.seed, SCHEMA_VERSION])
    os.replace(tmp, path)
    return {"fields_csv": path, "replicas": count,
            "boundary_condition": "zero"}, []


def _cmd_estimate(cfg: ExperimentConfig):
    box = build_box(int(cfg.require("n")))
    event = parse_event(str(cfg.require("event")), box)
    h = float(cfg.require("h"))
    M = int(cfg.require("M"))
    est = estimate_event(box, h, event, M, cfg.seed)
    csv_path = os.path.join(cfg.out_dir, "estimates.csv")
    append_estimates_csv(csv_path, cfg.experiment_id, [est])
    json_path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.json")
    write_estimates_json(json_path, cfg.experiment_id, [est])
    return {"estimates_csv": csv_path, "json": json_path,
            "p_hat": est.p_hat}, []


def _cmd_scan_h(cfg: ExperimentConfig):
    box = build_box(int(cfg.require("n")))
    event = parse_event(str(cfg.require("event")), box)
    h_list = _h_grid(cfg.require("h_grid"))
    M = int(cfg.require("M"))
    rows = estimate_events_shared(box, h_list, [event], M, cfg.seed)
    estimates = [row[0] for row in rows]
    csv_path = os.path.join(cfg.out_dir, "estimates.csv")
    append_estimates_csv(csv_path, cfg.experiment_id, estimates)
    json_path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.json")
    write_estimates_json(json_path, cfg.experiment_id, estimates)
    return {"estimates_csv": csv_path, "json": json_path}, []


def _cmd_curve(cfg: ExperimentConfig):
    h = float(cfg.require("h"))
    n_list = _int_list(cfg.require("n_list"))
    M = int(cfg.require("M"))
    curve = boundary_connection_curve(h, n_list, M, cfg.seed)
    estimates = [est for _, est in curve]
    csv_path = os.path.join(cfg.out_dir, "estimates.csv")
    append_estimates_csv(csv_path, cfg.experiment_id, estimates)
    flags = []
    fit_doc = None
    try:
        fit = fit_decay(curve)
        fit_doc = {"rate": fit.rate, "intercept": fit.intercept, "r2": fit.r2,
                   "degenerate": fit.degenerate}
        if fit.degenerate:
            flags.append("decay-fit-degenerate")
    except ValueError:
        flags.append("decay-fit-unavailable")
    json_path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.json")
    write_estimates_json(json_path, cfg.experiment_id, estimates,
                         extra={"decay_fit": fit_doc})
    return {"estimates_csv": csv_path, "json": json_path,
            "decay_fit": fit_doc}, flags


_CHECKERS = ("fkg", "height-shift", "coupling", "dual-decay")


def _cmd_check(cfg: ExperimentConfig):
    name = str(cfg.require("name"))
    M = int(cfg.require("M"))
    flags: list[str] = []
    if name == "fkg":
        box = build_box(int(cfg.opt("n", 8)))
        inner = box.n - 2
        default_a = f"crossing:vertical:1,{inner},1,{inner}"
        default_b = f"crossing:horizontal:1,{inner},1,{inner}"
        A = parse_event(str(cfg.opt("event_a", default_a)), box)
        B = parse_event(str(cfg.opt("event_b", default_b)), box)
        report = check_fkg(box, float(cfg.opt("h", 0.0)), A, B, M, cfg.seed)
    elif name == "height-shift":
        n = int(cfg.opt("n", 8))
        report = check_height_shift_bound(
            n, int(cfg.opt("N", 2 * n)), float(cfg.opt("h1", 0.5)),
            float(cfg.opt("h2", 0.0)), M, cfg.seed)
    elif name == "coupling":
        report = check_coupling_bound(
            int(cfg.opt("n", 16)), float(cfg.opt("h0", -1.0)),
            float(cfg.opt("h1", -0.5)), M, cfg.seed)
    elif name == "dual-decay":
        distances = _int_list(cfg.opt("distances", "2,4,6,8"))
        report, _fit = check_dual_decay(
            float(cfg.opt("h", -1.0)), distances, int(cfg.opt("n", 32)),
            M, cfg.seed)
    else:
        raise ConfigError(f"unknown checker {name!r}; pick one of {_CHECKERS}")
    flags.extend(report.flags)
    if report.verdict != "holds":
        flags.append(f"verdict-{report.verdict}")
    path = os.path.join(cfg.out_dir, "checks.jsonl")
    append_checks_jsonl(path, [report])
    return {"checks_jsonl": path, "verdict": report.verdict}, flags


def _cmd_renorm(cfg: ExperimentConfig):
    mode = str(cfg.opt("mode", "easy"))
    K = int(cfg.opt("K", 4))
    flags: list[str] = []
    if mode == "easy":
        seq = renorm_mod.easy_sequences(float(cfg.require("delta0")),
                                        float(cfg.require("n0")),
                                        float(cfg.opt("h0", 1.0)), K)
    elif mode == "hard":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            seq = renorm_mod.hard_sequences(float(cfg.require("n0")),
                                            float(cfg.require("h0")),
                                            float(cfg.require("h")), K)
        flags.extend(f"warning-{w.category.__name__}" for w in caught)
    else:
        raise ConfigError(f"unknown renorm mode {mode!r}")
    path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.renorm.csv")
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "delta_k", "n_k", "h_k", "schema_version"])
        for k in range(seq.K + 1):
            delta = repr(seq.deltas[k]) if seq.deltas else ""
            writer.writerow([k, delta, repr(seq.scales[k]),
                             repr(seq.heights[k]), SCHEMA_VERSION])
    os.replace(tmp, path)
    return {"renorm_csv": path, "mode": mode}, flags


def _cmd_critical(cfg: ExperimentConfig):
    criterion = str(cfg.opt("criterion", "crossing"))
    bracket = cfg.opt("bracket", "-8:8")
    lo, hi = (float(t) for t in str(bracket).split(":"))
    result = estimate_critical_height(
        criterion, int(cfg.require("n")), int(cfg.require("M")),
        float(cfg.opt("tol", 0.25)), cfg.seed, bracket=(lo, hi),
        decay_eps=float(cfg.opt("decay_eps", 0.02)))
    flags = []
    if result.one_sided:
        flags.append(f"one-sided-bracket-{result.one_sided}")
    doc = {
        "criterion": result.criterion,
        "h_lo": result.h_lo,
        "h_hi": result.h_hi,
        "n": result.n,
        "M": result.M,
        "tol": result.tol,
        "seed": result.seed,
        "one_sided": result.one_sided,
        "history": [list(x) for x in result.history],
        "schema_version": SCHEMA_VERSION,
    }
    path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.critical.json")
    write_json(path, doc)
    return {"critical_json": path, "h_lo": result.h_lo, "h_hi": result.h_hi}, flags


_COMMANDS = {
    "green": _cmd_green,
    "sample": _cmd_sample,
    "estimate": _cmd_estimate,
    "scan-h": _cmd_scan_h,
    "curve": _cmd_curve,
    "check": _cmd_check,
    "renorm": _cmd_renorm,
    "critical": _cmd_critical,
}


# accept scientific notation in negative numeric flag values (--h -1e6)
_NEGATIVE_NUMBER = re.compile(r"^-(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gffperc",
        description="Level-set percolation lab for the lattice Gaussian free field "
                    "(zero boundary condition).")
    parser._negative_number_matcher = _NEGATIVE_NUMBER
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p._negative_number_matcher = _NEGATIVE_NUMBER
        p.add_argument("--config", help="JSON config document; flags override it")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--experiment-id", default=None)
        p.add_argument("--strict", action="store_true",
                       help="exit 4 when any numeric flag is raised")

    p = sub.add_parser("green", help="export a Green matrix as CSV")
    p.add_argument("--n", type=int)
    p.add_argument("--killed", help="extra killed vertices, e.g. '1,2;2,2'")
    common(p)

    p = sub.add_parser("sample", help="draw fields and dump them as CSV")
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int)
    common(p)

    p = sub.add_parser("estimate", help="Monte Carlo estimate of one event")
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--event")
    p.add_argument("--M", type=int)
    common(p)

    p = sub.add_parser("scan-h", help="estimate one event over a height grid "
                                      "on shared replicas")
    p.add_argument("--n", type=int)
    p.add_argument("--h-grid", dest="h_grid", help="lo:hi:count")
    p.add_argument("--event")
    p.add_argument("--M", type=int)
    common(p)

    p = sub.add_parser("curve", help="origin-to-frame connection curve + decay fit")
    p.add_argument("--h", type=float)
    p.add_argument("--n-list", dest="n_list", help="comma-separated scales")
    p.add_argument("--M", type=int)
    common(p)

    p = sub.add_parser("check", help="run one inequality checker")
    p.add_argument("--name", choices=_CHECKERS)
    p.add_argument("--n", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--h1", type=float)
    p.add_argument("--h2", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--event-a", dest="event_a")
    p.add_argument("--event-b", dest="event_b")
    p.add_argument("--distances")
    common(p)

    p = sub.add_parser("renorm", help="print renormalization sequences as CSV")
    p.add_argument("--mode", choices=("easy", "hard"))
    p.add_argument("--delta0", type=float)
    p.add_argument("--n0", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--K", type=int)
    common(p)

    p = sub.add_parser("critical", help="bisection bracket for a critical height")
    p.add_argument("--criterion", choices=("crossing", "decay"))
    p.add_argument("--n", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--bracket", help="lo:hi")
    p.add_argument("--decay-eps", dest="decay_eps", type=float)
    common(p)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO

    numeric_flags: list[str] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            artifacts, flags = _COMMANDS[cfg.command](cfg)
        numeric_flags.extend(flags)
        numeric_flags.extend(f"warning-{w.category.__name__}" for w in caught)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO

    meta = {
        "config": cfg.canonical(),
        "config_sha256": cfg.content_hash(),
        "artifacts": artifacts,
        "numeric_flags": numeric_flags,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    meta_path = os.path.join(cfg.out_dir, f"{cfg.experiment_id}.meta.json")
    try:
        write_json(meta_path, meta)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"{cfg.command}: wrote {', '.join(sorted(artifacts))} "
          f"(id={cfg.experiment_id}, seed={cfg.seed})")
    if numeric_flags:
        print(f"numeric flags: {', '.join(numeric_flags)}")
        if cfg.strict:
            return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())
