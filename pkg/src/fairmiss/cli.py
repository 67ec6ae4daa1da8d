"""Command-line entry point: ``fairmiss <command> ...``.

Exit codes
    0  success
    1  unexpected internal error
    2  I/O, schema or configuration error
    3  a privileged or unprivileged group is empty
    4  the MCAR test is undefined (no masked cells)
    5  more than 10% of experiment repetitions were discarded

Diagnostics go to standard error; standard output carries only the
requested payload.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cases import BUILTIN, data_path, file_digest, groups_for, load_builtin, verify_builtin
from .dataset import GroupSpec, read_csv
from .errors import EmptyGroup, FairMissError, NoMissingValues, TooManyDiscarded
from .experiments import (ExperimentConfig, emit_report, octagon_csv, points_csv,
                          render_audit_markdown, run_experiment, to_json)
from .metrics import subset_audit
from .missingness import INTEGER_CODES, ONE_HOT, little_mcar_test, missing_fraction_per_column, pattern_table
from .octagon import baseline_points, dataset_stats, octagon_vertices

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_EMPTY_GROUP, EXIT_MCAR_UNDEFINED, EXIT_DISCARDED = range(6)
JSON_SCHEMA_VERSION = 1

log = logging.getLogger("fairmiss")


class ConfigError(FairMissError):
    """Bad command-line or configuration input."""


# ---------------------------------------------------------------------------
# helpers


def _load(dataset, schema=None):
    """Load a bundled dataset by name or a CSV file (with its schema sidecar)."""
    if dataset in BUILTIN and not Path(dataset).exists():
        if not verify_builtin(dataset):
            log.warning("bundled %s data does not match its recorded digest", dataset)
        return load_builtin(dataset)
    return read_csv(dataset, schema=schema)


def _dataset_digest(dataset, schema=None):
    if dataset in BUILTIN and not Path(dataset).exists():
        path = data_path(dataset)
        out = {"name": dataset, "sha256": file_digest(path)}
        schema_path = data_path(dataset, ".schema.json")
    else:
        path = Path(dataset)
        out = {"path": str(path), "sha256": file_digest(path)}
        if schema is None:
            stem = path.name.removesuffix(".gz").removesuffix(".csv")
            schema_path = path.with_name(f"{stem}.schema.json")
        else:
            schema_path = Path(schema)
    if Path(str(schema_path)).exists():
        out["schema_sha256"] = file_digest(schema_path)
    return out


def _groups(args, dataset):
    """Groups from --group FILE, inline flags, or the bundled cases for that dataset."""
    if args.group:
        try:
            obj = json.loads(Path(args.group).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read group config {args.group}: {exc}") from None
        items = obj if isinstance(obj, list) else obj.get("groups", [obj])
        return [GroupSpec.from_dict(g) for g in items]
    if args.protected:
        if not args.privileged or args.favourable is None:
            raise ConfigError("--protected needs --privileged and --favourable")
        return [GroupSpec(args.protected, frozenset(args.privileged), args.favourable)]
    if dataset in BUILTIN:
        return groups_for(dataset)
    raise ConfigError("no group given: use --group FILE or --protected/--privileged/--favourable")


def _emit(text, out_dir=None, name=None):
    """Write ``text`` to standard output, and also to ``out_dir/name`` if given."""
    sys.stdout.write(text)
    if out_dir and name:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / name).write_text(text, encoding="utf-8")


def _versioned(payload):
    return {"schema_version": JSON_SCHEMA_VERSION, **payload}


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# commands


def cmd_inspect(args):
    d = _load(args.dataset, args.schema)
    fractions = missing_fraction_per_column(d)
    table = pattern_table(d)
    if args.format == "json":
        _emit(to_json(_versioned({
            "rows": d.n_rows, "columns": len(d.names), "label": d.label,
            "rows_with_missing": int(d.row_has_missing().sum()) if d.n_rows else 0,
            "missing_fraction": fractions,
            "patterns": {"columns": list(table.columns),
                         "rows": [{"missing": [c for c, b in zip(table.columns, p) if b],
                                   "count": k, "fraction": f} for p, k, f in table.rows]},
        })), args.out_dir, "inspect.json")
        return EXIT_OK
    if args.format == "csv":
        _emit(table.to_csv(), args.out_dir, "patterns.csv")
        return EXIT_OK
    lines = [f"# {args.dataset}", "", f"{d.n_rows} rows, {len(d.names)} columns "
             f"(label: {d.label})", "", "| column | kind | missing |", "|---|---|---|"]
    for c in d.columns:
        lines.append(f"| {c.name} | {c.kind} | {100 * fractions[c.name]:.2f}% |")
    lines += ["", "| missing columns | rows | share |", "|---|---|---|"]
    for p, k, f in table.rows:
        names = ", ".join(c for c, b in zip(table.columns, p) if b) or "(none)"
        lines.append(f"| {names} | {k} | {100 * f:.2f}% |")
    _emit("\n".join(lines) + "\n", args.out_dir, "inspect.md")
    return EXIT_OK


def _audit_payload(d, groups):
    audits = {}
    for g in groups:
        g.check_groups(d)
        audits[g.describe()] = subset_audit(d, g)
    return audits


def cmd_audit(args):
    d = _load(args.dataset, args.schema)
    audits = _audit_payload(d, _groups(args, args.dataset))
    as_json = to_json(_versioned({
        "dataset": args.dataset,
        "audit": {k: {s: (r.to_dict() if r else None) for s, r in v.items()} for k, v in audits.items()},
    }))
    markdown = render_audit_markdown(audits)
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.out_dir) / "audit.json").write_text(as_json, encoding="utf-8")
        (Path(args.out_dir) / "audit.md").write_text(markdown, encoding="utf-8")
    sys.stdout.write(as_json if args.format == "json" else markdown)
    return EXIT_OK


def cmd_mcar(args):
    d = _load(args.dataset, args.schema)
    result = little_mcar_test(d, encoding=args.encoding, include_label=not args.no_label)
    _emit(to_json(_versioned({"dataset": args.dataset, "encoding": args.encoding,
                              **result.to_dict()})), args.out_dir, "mcar.json")
    return EXIT_OK


def cmd_octagon(args):
    d = _load(args.dataset, args.schema)
    rows, payload = ["group,vertex,accuracy,spd"], {}
    for g in _groups(args, args.dataset):
        st = dataset_stats(d, g)
        o = octagon_vertices(st)
        for i, (a, s) in enumerate(o.vertices):
            rows.append(f"{g.describe()},{i},{a!r},{s!r}")
        majority, perfect = baseline_points(st)
        payload[g.describe()] = {"octagon": o.to_dict(),
                                 "baselines": [majority.to_dict(), perfect.to_dict()]}
    csv_text = "\n".join(rows) + "\n"
    as_json = to_json(_versioned({"dataset": args.dataset, "groups": payload}))
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.out_dir) / "octagon.csv").write_text(csv_text, encoding="utf-8")
        (Path(args.out_dir) / "baselines.json").write_text(as_json, encoding="utf-8")
    sys.stdout.write(csv_text if args.format == "csv" else as_json)
    return EXIT_OK


def _read_config(path):
    try:
        text = Path(path).read_bytes()
        obj = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    # a run manifest carries the fully resolved config
    if "config" in obj and obj.get("kind") == "fairmiss-run-manifest":
        obj = obj["config"]
    base = Path(path).resolve().parent
    for key in ("dataset", "schema"):
        value = obj.get(key)
        if value and value not in BUILTIN and not Path(value).is_absolute():
            obj[key] = str(base / value)
    return obj, text


def cmd_experiment(args):
    obj, raw = _read_config(args.config)
    if args.seed is not None:
        obj["master_seed"] = args.seed
    if args.repetitions is not None:
        obj["repetitions"] = args.repetitions
    try:
        cfg = ExperimentConfig.from_dict(obj)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from None
    run_dir = Path(args.out_dir or "runs") / f"{Path(cfg.dataset).name.split('.')[0]}-{cfg.protocol}-seed{cfg.master_seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": "fairmiss-run-manifest",
        "schema_version": JSON_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": sys.argv[:1] + list(args.argv),
        "config": cfg.to_dict(),
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "dataset": _dataset_digest(cfg.dataset, cfg.schema),
        "master_seed": cfg.master_seed,
        "threads": args.threads,
        "started_at": _now(),
        "finished_at": None,
        "status": "running",
    }
    manifest_path = run_dir / "manifest.json"
    manifest_path.write_text(to_json(manifest), encoding="utf-8")
    d = _load(cfg.dataset, cfg.schema)
    t0 = time.perf_counter()
    try:
        report = run_experiment(cfg, d, threads=args.threads)
    except FairMissError as exc:
        manifest.update(status=f"failed: {exc}", finished_at=_now())
        manifest_path.write_text(to_json(manifest), encoding="utf-8")
        raise
    (run_dir / "report.json").write_bytes(emit_report(report, "json"))
    (run_dir / "report.md").write_bytes(emit_report(report, "markdown"))
    (run_dir / "report.csv").write_bytes(emit_report(report, "csv"))
    (run_dir / "points.csv").write_text(points_csv(report), encoding="utf-8")
    (run_dir / "octagon.csv").write_text(octagon_csv(report), encoding="utf-8")
    manifest.update(status="ok", finished_at=_now(), elapsed_seconds=round(time.perf_counter() - t0, 3),
                    report_sha256=hashlib.sha256((run_dir / "report.json").read_bytes()).hexdigest())
    manifest_path.write_text(to_json(manifest), encoding="utf-8")
    log.info("run written to %s", run_dir)
    fmt = {"json": "json", "csv": "csv"}.get(args.format, "markdown")
    sys.stdout.buffer.write(emit_report(report, fmt))
    sys.stdout.flush()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="fairmiss", description=(
        "Audit how rows with missing values affect group fairness in tabular classification."))
    p.add_argument("--version", action="version", version=f"fairmiss {__version__}")

    def global_flags(parser, defaults):
        parser.add_argument("--seed", type=int, default=defaults and None,
                            help="master seed (overrides the config file)")
        parser.add_argument("--threads", type=int, default=defaults and 1,
                            help="worker threads for repetitions")
        parser.add_argument("--out-dir", default=defaults and None,
                            help="directory for written artifacts")
        parser.add_argument("--format", choices=("markdown", "json", "csv"),
                            default=defaults and None, help="standard-output format")
        parser.add_argument("-v", "--verbose", action="store_true", default=defaults and False)
        if not defaults:
            # flags repeated after the subcommand must not reset values given before it
            for action in parser._actions:
                action.default = argparse.SUPPRESS

    global_flags(p, True)
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, False)
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("dataset", help=f"CSV path (optionally .gz) or bundled name {BUILTIN}")
        sp.add_argument("--schema", default=None, help="schema JSON (default: <stem>.schema.json)")

    def group_args(sp):
        sp.add_argument("--group", help="JSON file with one group, a list, or {'groups': [...]}")
        sp.add_argument("--protected", help="protected attribute column")
        sp.add_argument("--privileged", nargs="+", help="privileged value(s)")
        sp.add_argument("--favourable", help="favourable class label")

    sp = sub.add_parser("inspect", parents=[common], help="row/column counts, missing fractions, pattern table")
    data_args(sp)
    sp.set_defaults(func=cmd_inspect, default_format="markdown")

    sp = sub.add_parser("audit", parents=[common], help="SPD over all rows, rows with and without masked cells")
    data_args(sp)
    group_args(sp)
    sp.set_defaults(func=cmd_audit, default_format="markdown")

    sp = sub.add_parser("mcar", parents=[common], help="Little's MCAR test (JSON)")
    data_args(sp)
    sp.add_argument("--encoding", choices=(INTEGER_CODES, ONE_HOT), default=INTEGER_CODES)
    sp.add_argument("--no-label", action="store_true", help="leave the label column out")
    sp.set_defaults(func=cmd_mcar, default_format="json")

    sp = sub.add_parser("octagon", parents=[common], help="accuracy/SPD feasibility octagon and baselines")
    data_args(sp)
    group_args(sp)
    sp.set_defaults(func=cmd_octagon, default_format="csv")

    sp = sub.add_parser("experiment", parents=[common], help="run a configured protocol into a run directory")
    sp.add_argument("config", help="experiment JSON config or a previous run's manifest.json")
    sp.add_argument("--repetitions", type=int, default=None, help="override the config value")
    sp.set_defaults(func=cmd_experiment, default_format="markdown")
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    if args.format is None:
        args.format = args.default_format
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="fairmiss: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("fairmiss: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except EmptyGroup as exc:
        print(f"fairmiss: empty group: {exc}", file=sys.stderr)
        return EXIT_EMPTY_GROUP
    except NoMissingValues as exc:
        print(f"fairmiss: MCAR test undefined: {exc}", file=sys.stderr)
        return EXIT_MCAR_UNDEFINED
    except TooManyDiscarded as exc:
        print(f"fairmiss: {exc}", file=sys.stderr)
        return EXIT_DISCARDED
    except (FairMissError, OSError, ValueError, KeyError) as exc:
        print(f"fairmiss: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
