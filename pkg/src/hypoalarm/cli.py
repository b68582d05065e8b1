"""Command-line pipeline: synthesize cohorts, ingest records, extract
features, train, evaluate, and report, with reproducible manifests.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 internal
invariant violation. Errors print a single ``error[kind]: message`` line
on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cart import (
    TreeDocumentError,
    grow_tree,
    parse_tree,
    predict,
    prune_to_depth,
    serialize_tree,
    tree_depth,
)
from .cgm_data import DataValidationError, PipelineConfig, parse_cgm_file, series_to_csv
from .evaluation import (
    cross_validate,
    evaluate_per_patient,
    instances_to_arrays,
    missed_event_analysis,
    one_way_anova,
    select_best_run,
)
from .features import build_instances, read_feature_csv, write_feature_csv
from .synth import SynthConfig, generate_cohort

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Bad command line beyond what argparse catches itself."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep 2 for data errors
        raise UsageError(message)


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(path: Path, command: str, config, inputs: dict,
                    seeds: list, outputs: dict) -> None:
    _write_json(path, {
        "command": command,
        "config": config,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "inputs": inputs,
        "outputs": outputs,
        "seeds": seeds,
        "version": __version__,
    })


def _load_synth_config(args) -> SynthConfig:
    fields = {}
    if args.config is not None:
        try:
            fields = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"bad synth config JSON: {exc}")
        if not isinstance(fields, dict):
            raise DataValidationError("synth config must be a JSON object")
    if args.seed is not None:
        fields["seed"] = args.seed
    try:
        return SynthConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise DataValidationError(f"bad synth config: {exc}")


def _cmd_synth(args) -> int:
    cfg = _load_synth_config(args)
    cohort = generate_cohort(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    patients = []
    for series in cohort:
        name = f"{series.patient_id}.csv"
        text = series_to_csv(series)
        (out / name).write_text(text)
        outputs[name] = _sha256_text(text)
        patients.append({"id": series.patient_id, "dm_type": series.dm_type, "file": name})
    cohort_doc = {"config": dataclasses.asdict(cfg), "patients": patients, "seed": cfg.seed}
    _write_json(out / "cohort.json", cohort_doc)
    outputs["cohort.json"] = _sha256_file(out / "cohort.json")
    _write_manifest(out / "manifest.json", "synth", dataclasses.asdict(cfg),
                    inputs={}, seeds=[cfg.seed], outputs=outputs)
    print(f"patients={len(cohort)} out={out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    path = Path(args.infile)
    series = parse_cgm_file(path.read_text(), patient_id=path.stem, unit=args.unit)
    print(f"patient={series.patient_id} samples={len(series.samples)} "
          f"meals={len(series.meal_times)} missing={series.missing_count}")
    return EXIT_OK


def _load_cohort(path: Path, unit: str):
    """Parse a cohort directory (or a single CSV) into series plus dm types."""
    if path.is_file():
        series = parse_cgm_file(path.read_text(), patient_id=path.stem, unit=unit)
        return [series], {series.patient_id: series.dm_type}, {str(path): _sha256_file(path)}
    if not path.is_dir():
        raise DataValidationError(f"no such file or directory: {path}")
    entries = []
    cohort_file = path / "cohort.json"
    if cohort_file.is_file():
        doc = json.loads(cohort_file.read_text())
        for pat in doc.get("patients", []):
            entries.append((pat["id"], pat.get("dm_type", "other"), path / pat["file"]))
    else:
        entries = [(f.stem, "other", f) for f in sorted(path.glob("*.csv"))]
    if not entries:
        raise DataValidationError(f"no patient CSV files under {path}")
    series_list = []
    dm_types = {}
    inputs = {}
    for pid, dm_type, file in entries:
        series_list.append(parse_cgm_file(file.read_text(), patient_id=pid,
                                          dm_type=dm_type, unit=unit))
        dm_types[pid] = dm_type
        inputs[str(file)] = _sha256_file(file)
    return series_list, dm_types, inputs


def _cmd_features(args) -> int:
    series_list, _, inputs = _load_cohort(Path(args.infile), args.unit)
    cfg = PipelineConfig()
    instances = []
    for series in series_list:
        instances.extend(build_instances(series, cfg))
    out = Path(args.out)
    write_feature_csv(instances, out)
    _write_manifest(out.with_suffix(".manifest.json"), "features",
                    {"unit": args.unit}, inputs=inputs, seeds=[],
                    outputs={out.name: _sha256_file(out)})
    hypo = sum(inst.label for inst in instances)
    print(f"instances={len(instances)} hypo={hypo} out={out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    instances = read_feature_csv(Path(args.features))
    if not instances:
        raise DataValidationError("feature table is empty")
    cfg = PipelineConfig()
    X, y = instances_to_arrays(instances)
    tree = prune_to_depth(grow_tree(X, y, cfg.costs), cfg.prune_depth, cfg.costs)
    out = Path(args.out)
    _write_json(out, serialize_tree(tree))
    _write_manifest(out.with_suffix(".manifest.json"), "train",
                    {"costs": dataclasses.asdict(cfg.costs), "depth": cfg.prune_depth},
                    inputs={args.features: _sha256_file(Path(args.features))},
                    seeds=[], outputs={out.name: _sha256_file(out)})
    print(f"instances={len(instances)} depth={tree_depth(tree)} out={out}")
    return EXIT_OK


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_report_tables(out: Path, summary: dict) -> dict:
    """The three CSV tables, derived from the summary document alone."""
    outputs = {}

    lines = ["allocation,fold,seed,tp,fn,fp,tn,accuracy,sensitivity,specificity"]
    for run in summary["per_run"]:
        lines.append(",".join(_fmt(run[k]) for k in (
            "allocation", "fold", "seed", "tp", "fn", "fp", "tn",
            "accuracy", "sensitivity", "specificity")))
    (out / "performance.csv").write_text("\n".join(lines) + "\n")
    outputs["performance.csv"] = _sha256_file(out / "performance.csv")

    lines = ["patient_id,dm_type,n_points,n_hypo,accuracy,sensitivity,specificity"]
    for row in summary["per_patient"]:
        lines.append(",".join(_fmt(row[k]) for k in (
            "patient_id", "dm_type", "n_points", "n_hypo",
            "accuracy", "sensitivity", "specificity")))
    (out / "per_patient.csv").write_text("\n".join(lines) + "\n")
    outputs["per_patient.csv"] = _sha256_file(out / "per_patient.csv")

    lines = ["patient_id,sensitivity,predicted_events,missed_events,lowest_bgs,severe_count"]
    for row in summary["missed_events"]["rows"]:
        lows = ";".join(repr(float(v)) for v in row["lows"])
        lines.append(",".join([
            row["patient_id"], _fmt(row["sensitivity"]), str(row["predicted_events"]),
            str(row["missed_events"]), lows, str(row["severe_count"])]))
    (out / "missed_events.csv").write_text("\n".join(lines) + "\n")
    outputs["missed_events.csv"] = _sha256_file(out / "missed_events.csv")
    return outputs


def _config_doc(cfg: PipelineConfig, seed: int) -> dict:
    return {
        "allocations": cfg.allocations,
        "costs": dataclasses.asdict(cfg.costs),
        "daytime": [f"{cfg.daytime_start:%H:%M}", f"{cfg.daytime_end:%H:%M}"],
        "decision_offsets_min": list(cfg.decision_offsets_min),
        "folds": cfg.folds,
        "horizon_offsets_min": list(cfg.horizon_offsets_min),
        "hypo_threshold": cfg.hypo_threshold,
        "lead_time_min": cfg.lead_time_min,
        "peak_window_min": cfg.peak_window_min,
        "prune_depth": cfg.prune_depth,
        "seed": seed,
        "snap_tolerance_min": cfg.snap_tolerance_min,
    }


def _cmd_evaluate(args) -> int:
    instances = read_feature_csv(Path(args.features))
    if not instances:
        raise DataValidationError("feature table is empty")
    try:
        cfg = dataclasses.replace(PipelineConfig(), folds=args.k, allocations=args.allocations)
    except ValueError as exc:
        raise UsageError(str(exc))

    dm_types = {}
    inputs = {args.features: _sha256_file(Path(args.features))}
    if args.cohort is not None:
        cohort_doc = json.loads(Path(args.cohort).read_text())
        dm_types = {pat["id"]: pat.get("dm_type", "other")
                    for pat in cohort_doc.get("patients", [])}
        inputs[args.cohort] = _sha256_file(Path(args.cohort))

    report = cross_validate(instances, cfg, seed=args.seed)
    best = select_best_run(report)
    per_patient = evaluate_per_patient(best.tree, instances, dm_types)
    severity = missed_event_analysis(best.tree, instances)

    summary = {
        "aggregate": report.aggregate,
        "allocations": report.allocations,
        "best_run": {"allocation": best.allocation, "fold": best.fold},
        "best_tree": serialize_tree(best.tree),
        "class_counts": {
            "hypo": int(sum(inst.label for inst in instances)),
            "non_hypo": int(sum(1 - inst.label for inst in instances)),
        },
        "config": _config_doc(cfg, args.seed),
        "fold_sizes": [[len(g) for g in plan.groups] for plan in report.fold_plans],
        "k": report.k,
        "missed_events": {
            "rows": [{
                "patient_id": row.patient_id,
                "sensitivity": row.sensitivity,
                "predicted_events": row.predicted_events,
                "missed_events": row.missed_events,
                "lows": list(row.lows),
                "severe_count": row.severe_count,
            } for row in severity.rows],
            "total_missed": severity.total_missed,
            "total_severe": severity.total_severe,
        },
        "n_instances": report.n_instances,
        "per_patient": [dataclasses.asdict(row) for row in per_patient],
        "per_run": [{
            "allocation": e.allocation,
            "fold": e.fold,
            "seed": e.seed,
            "tp": e.cm.tp, "fn": e.cm.fn, "fp": e.cm.fp, "tn": e.cm.tn,
            "accuracy": e.vector.accuracy,
            "sensitivity": e.vector.sensitivity,
            "specificity": e.vector.specificity,
            "tree": serialize_tree(e.tree),
        } for e in report.runs],
        "seed": report.seed,
        "seeds": [report.seed + r for r in range(report.allocations)],
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "summary.json", summary)
    outputs = {"summary.json": _sha256_file(out / "summary.json")}
    outputs.update(_write_report_tables(out, summary))
    _write_manifest(out / "manifest.json", "evaluate",
                    {"k": args.k, "allocations": args.allocations, "seed": args.seed},
                    inputs=inputs, seeds=summary["seeds"], outputs=outputs)
    agg = report.aggregate
    print(f"runs={len(report.runs)} accuracy={_fmt(agg['accuracy'])} "
          f"sensitivity={_fmt(agg['sensitivity'])} specificity={_fmt(agg['specificity'])}")
    return EXIT_OK


def _cmd_report(args) -> int:
    summary = json.loads(Path(args.summary).read_text())
    for key in ("per_run", "per_patient", "missed_events"):
        if key not in summary:
            raise DataValidationError(f"summary is missing {key!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = _write_report_tables(out, summary)
    _write_manifest(out / "manifest.json", "report", {},
                    inputs={args.summary: _sha256_file(Path(args.summary))},
                    seeds=summary.get("seeds", []), outputs=outputs)
    print(f"tables={len(outputs)} out={out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    try:
        doc = json.loads(Path(args.tree).read_text())
    except json.JSONDecodeError as exc:
        raise TreeDocumentError(f"$: not valid JSON ({exc})")
    tree = parse_tree(doc)
    print(predict(tree, args.xt, args.rate))
    return EXIT_OK


def _cmd_anova(args) -> int:
    summary = json.loads(Path(args.report).read_text())
    rows = summary.get("per_patient")
    if not rows:
        raise DataValidationError("summary has no per_patient table")
    groups: dict[str, list[float]] = {}
    for row in rows:
        value = row.get(args.metric)
        if value is None:
            continue
        groups.setdefault(row[args.group_by], []).append(float(value))
    if len(groups) < 2:
        raise DataValidationError(
            f"need at least two {args.group_by} groups with defined {args.metric}")
    f_stat, p_value = one_way_anova([groups[k] for k in sorted(groups)])
    print(f"F={f_stat} p={p_value}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="hypoalarm",
                     description="Daytime low-glucose alarm pipeline over CGM records.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic CGM cohort")
    p.add_argument("--config", help="SynthConfig JSON (defaults to the built-in cohort shape)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="validate a CGM CSV and print a summary")
    p.add_argument("--in", dest="infile", required=True, help="patient CSV file")
    p.add_argument("--unit", choices=("mmol", "mg"), default="mmol")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("features", help="extract decision instances to a CSV table")
    p.add_argument("--in", dest="infile", required=True,
                   help="cohort directory (or one patient CSV)")
    p.add_argument("--unit", choices=("mmol", "mg"), default="mmol")
    p.add_argument("--out", required=True, help="feature table CSV path")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="fit a pruned cost-weighted tree")
    p.add_argument("--features", required=True, help="feature table CSV")
    p.add_argument("--out", required=True, help="tree JSON path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="repeated k-fold cross-validation report")
    p.add_argument("--features", required=True, help="feature table CSV")
    p.add_argument("--k", type=int, default=5, help="folds per allocation")
    p.add_argument("--allocations", type=int, default=4, help="random allocations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cohort", help="cohort.json for patient dm_type metadata")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="regenerate CSV tables from a summary.json")
    p.add_argument("--summary", required=True, help="summary.json from evaluate")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("predict", help="classify one decision point")
    p.add_argument("--tree", required=True, help="tree JSON document")
    p.add_argument("--xt", type=float, required=True, help="current BG, mmol/L")
    p.add_argument("--rate", type=float, required=True,
                   help="rate of decrease from the peak, (mmol/L)/min")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("anova", help="one-way ANOVA of a per-patient metric")
    p.add_argument("--report", required=True, help="summary.json from evaluate")
    p.add_argument("--group-by", choices=("dm_type",), default="dm_type")
    p.add_argument("--metric", choices=("accuracy", "sensitivity", "specificity"),
                   default="sensitivity")
    p.set_defaults(func=_cmd_anova)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, TreeDocumentError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit:
        raise
    except Exception as exc:  # invariant violations and other surprises
        print(f"error[internal]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
