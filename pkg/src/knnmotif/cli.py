"""``knnmotif`` command-line interface.

Subcommands: ``gen``, ``count``, ``estimate``, ``constants``, ``verify`` and
``replay``. Every file output gets a ``<output>.manifest.json`` sibling that
records the resolved arguments (including the seed); ``replay`` re-runs a
manifest and reproduces its outputs bit for bit.

Exit codes: 0 success, 2 usage, 3 data or format problem, 4 failed verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .closedform import known_constants, kissing_table, omega, q_limit_d1, r_limit
from .digraph import MarkVector, build_knn_digraph, count_marked_arcs, statistics_dict, write_arcs_csv
from .errors import KnnMotifError
from .geometry import Region, format_points_csv, read_points_csv
from .identities import run_identity_suite
from .montecarlo import ExperimentConfig, as_statistic, run_experiment
from .motifs import MotifPattern, StatisticSpec, evaluate_statistic
from .pointproc import ProcessSpec, sample
from .rng import fresh_seed

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _region(kind: str, d: int) -> Region:
    return Region.unit_cube(d) if kind == "cube" else Region.unit_volume_ball(d)


def _write_manifest(args, argv: list[str], outputs: list[str], config: dict) -> None:
    if not outputs:
        return
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    with open(outputs[0] + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _emit(text: str, out: str | None) -> list[str]:
    if out is None or out == "-":
        sys.stdout.write(text)
        return []
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return [out]


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _table_text(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return _dump_json(rows)
    buf = io.StringIO()
    cols = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _resolve_seed(args) -> None:
    if getattr(args, "seed", "absent") is None:
        args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)


def cmd_gen(args) -> tuple[list[str], dict]:
    spec = ProcessSpec(args.process, args.n, _region(args.region, args.dim), args.seed)
    ps = sample(spec, args.replicate)
    outputs = _emit(format_points_csv(ps), args.out)
    config = {"dim": args.dim, "n": args.n, "process": args.process, "region": args.region,
              "replicate": args.replicate}
    return outputs, config


def _read_marks(path: str, n: int) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["mark"]:
        raise UsageError(f"{path}: marks file needs a single 'mark' header column")
    marks = np.array([int(r[0]) for r in rows[1:] if r], dtype=np.int64)
    if len(marks) != n:
        raise UsageError(f"{path}: expected {n} marks, found {len(marks)}")
    return marks


def cmd_count(args) -> tuple[list[str], dict]:
    ps = read_points_csv(args.input)
    g = build_knn_digraph(ps, args.k)
    full = statistics_dict(g)
    head = {key: full[key] for key in ("n", "k", "d")}
    stat = args.stat
    if stat == "all":
        result = full
    elif stat in ("R", "Q", "Qj", "components"):
        result = {**head, stat: full[stat]}
    elif stat.startswith("motif:"):
        with open(stat[len("motif:"):], encoding="utf-8") as fh:
            data = json.load(fh)
        spec = StatisticSpec.from_dict(data) if "terms" in data else StatisticSpec.of(MotifPattern.from_dict(data))
        result = {**head, "motif": {"statistic": spec.to_dict(), "value": evaluate_statistic(g, spec)}}
    elif stat.startswith("Nij"):
        s = as_statistic(stat)
        if args.marks is None:
            raise UsageError("Nij needs --marks")
        marks = _read_marks(args.marks, g.n)
        classes = max(int(marks.max()), *s.args)
        value = count_marked_arcs(g, MarkVector(marks, classes), *s.args)
        result = {**head, "Nij": {"i": s.args[0], "j": s.args[1], "value": value}}
    else:
        raise UsageError(f"unknown --stat {stat!r}")
    outputs = _emit(_dump_json(result), args.out)
    if args.arcs:
        write_arcs_csv(g, args.arcs)
        outputs.append(args.arcs)
    return outputs, {"input": args.input, "k": args.k, "stat": stat, "marks": args.marks}


def _estimate_config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from exc
        if args.seed is not None:
            data.setdefault("process", {})["seed"] = args.seed
        elif "seed" not in data.get("process", {}):
            args.seed = fresh_seed()
            print(f"seed: {args.seed}", file=sys.stderr)
            data["process"]["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(data)
        args.seed = cfg.process.seed
        return cfg
    missing = [f for f in ("dim", "n", "k") if getattr(args, f) is None]
    if missing:
        raise UsageError("estimate needs --config or --dim, --n and --k (missing: " + ", ".join(missing) + ")")
    _resolve_seed(args)
    spec = ProcessSpec(args.process, args.n, _region(args.region, args.dim), args.seed)
    try:
        marks = tuple(float(p) for p in args.marks.split(",")) if args.marks else None
        return ExperimentConfig(spec, args.k, as_statistic(args.stat), args.replicates, marks, args.torus)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_estimate(args) -> tuple[list[str], dict]:
    cfg = _estimate_config(args)
    summary = run_experiment(cfg, workers=args.threads)
    result = summary.to_dict(per_replicate=args.per_replicate)
    outputs = _emit(_dump_json(result), args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", summary.statistic])
            for r, v in enumerate(summary.values):
                w.writerow([r, v.item() if hasattr(v, "item") else v])
        outputs.append(args.csv)
    return outputs, cfg.to_dict()


def cmd_constants(args) -> tuple[list[str], dict]:
    if args.kissing:
        rows = kissing_table()
    elif args.table == "r":
        rows = [{"d": d, "k": k, "r": float(r_limit(d, k))}
                for d in range(1, args.dmax + 1) for k in range(1, args.kmax + 1)]
    elif args.table == "q1":
        rows = [{"d": 1, "k": k, "q": q_limit_d1(k)} for k in range(1, args.kmax + 1)]
    elif args.table == "omega":
        rows = [{"d": d, "omega": float(omega(d))} for d in range(1, args.dmax + 1)]
    else:
        rows = []
        for d in range(1, args.dmax + 1):
            for k in range(1, args.kmax + 1):
                for c in known_constants(d, k):
                    rows.append({"name": c.name, "d": c.d, "k": c.k, "j": c.j, "value": c.value,
                                 "provenance": c.provenance, "source": c.source})
    outputs = _emit(_table_text(rows, args.format), args.out)
    return outputs, {"table": "kissing" if args.kissing else args.table, "dmax": args.dmax,
                     "kmax": args.kmax, "format": args.format}


def cmd_verify(args) -> tuple[list[str], dict]:
    instances, failures = run_identity_suite(args.seed, args.instances, dmax=args.dmax, kmax=args.kmax,
                                             nmin=args.nmin, nmax=args.nmax)
    failed = sorted({f.identity for f in failures})
    report = {
        "seed": args.seed,
        "instances": [{"index": i.index, "d": i.d, "k": i.k, "n": i.n} for i in instances],
        "failures": [{"identity": f.identity, "instance": f.instance.index, "detail": f.detail}
                     for f in failures],
        "passed": not failures,
    }
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    print(f"{len(instances)} instances, {len(failures)} identity failures")
    outputs = _emit(_dump_json(report), args.out) if args.out else []
    args.verify_failed = failed
    return outputs, {"instances": args.instances, "dmax": args.dmax, "kmax": args.kmax,
                     "nmin": args.nmin, "nmax": args.nmax}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knnmotif", description="Statistics of k-nearest-neighbor digraphs.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log tie and resampling events")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a point set")
    g.add_argument("--dim", type=_positive, required=True)
    g.add_argument("--n", type=_positive, required=True)
    g.add_argument("--process", choices=["binomial", "poisson"], default="binomial")
    g.add_argument("--region", choices=["cube", "ball"], default="cube")
    g.add_argument("--replicate", type=int, default=0)
    g.add_argument("--seed", type=_seed)
    g.add_argument("--out", default="points.csv", help="output CSV ('-' for stdout)")

    c = sub.add_parser("count", help="count statistics of the kNN digraph of a points file")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--k", type=_positive, required=True)
    c.add_argument("--stat", default="all", help="R, Q, Qj, components, all, motif:<file> or Nij:<i>,<j>")
    c.add_argument("--marks", help="CSV with a 'mark' column, one row per point")
    c.add_argument("--arcs", help="also write the arc list to this CSV")
    c.add_argument("--out", help="output JSON (stdout if omitted)")

    e = sub.add_parser("estimate", help="Monte Carlo estimates over random point sets")
    e.add_argument("--config", help="experiment JSON; overrides the process flags")
    e.add_argument("--dim", type=_positive)
    e.add_argument("--n", type=_positive)
    e.add_argument("--k", type=_positive)
    e.add_argument("--process", choices=["binomial", "poisson"], default="binomial")
    e.add_argument("--region", choices=["cube", "ball"], default="cube")
    e.add_argument("--stat", default="R")
    e.add_argument("--replicates", type=int, default=100)
    e.add_argument("--marks", help="comma-separated mark class probabilities")
    e.add_argument("--torus", action="store_true", help="periodic distance (diagnostic only)")
    e.add_argument("--seed", type=_seed)
    e.add_argument("--threads", type=_positive, default=os.cpu_count() or 1)
    e.add_argument("--per-replicate", action="store_true", help="include replicate values in the JSON")
    e.add_argument("--csv", help="write per-replicate values to this CSV")
    e.add_argument("--out", help="results JSON (stdout if omitted)")

    k = sub.add_parser("constants", help="tabulate closed-form and reference constants")
    k.add_argument("--table", choices=["r", "q1", "omega", "catalog"], default="catalog")
    k.add_argument("--kissing", action="store_true")
    k.add_argument("--dmax", type=_positive, default=2)
    k.add_argument("--kmax", type=_positive, default=5)
    k.add_argument("--format", choices=["csv", "json"], default="csv")
    k.add_argument("--out")

    v = sub.add_parser("verify", help="check deterministic identities on random instances")
    v.add_argument("--instances", type=_positive, default=200)
    v.add_argument("--dmax", type=_positive, default=3)
    v.add_argument("--kmax", type=_positive, default=3)
    v.add_argument("--nmin", type=_positive, default=50)
    v.add_argument("--nmax", type=_positive, default=500)
    v.add_argument("--seed", type=_seed)
    v.add_argument("--out")

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    return p


COMMANDS = {"gen": cmd_gen, "count": cmd_count, "estimate": cmd_estimate,
            "constants": cmd_constants, "verify": cmd_verify}


def _resolved_argv(argv: list[str], args) -> list[str]:
    """``argv`` with the seed made explicit."""
    seed = getattr(args, "seed", None)
    if seed is None or "--seed" in argv:
        return list(argv)
    return list(argv) + ["--seed", str(seed)]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if args.command == "replay":
        try:
            with open(args.manifest, encoding="utf-8") as fh:
                recorded = json.load(fh)["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return EXIT_DATA
        return main(recorded)
    if args.command != "estimate" or not args.config:
        _resolve_seed(args)
    if args.command == "verify" and (args.nmin > args.nmax):
        print("error: --nmin exceeds --nmax", file=sys.stderr)
        return EXIT_USAGE
    try:
        outputs, config = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KnnMotifError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    _write_manifest(args, _resolved_argv(argv, args), outputs, config)
    if getattr(args, "verify_failed", None):
        print("violated identities: " + "; ".join(args.verify_failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
