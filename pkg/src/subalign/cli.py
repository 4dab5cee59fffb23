"""Command-line entry point: featurize, run, baseline, analyze, synth, report.

Exit codes: 0 success, 2 user or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import metrics, pipeline, stats, synth
from .data_model import (
    DataError,
    FeatureSchema,
    load_featurized_csv,
    load_manifest,
    load_schema,
    reference_schema,
    write_featurized_csv,
    write_schema,
)
from .tsfeat import featurize_dataset

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
USER_ERRORS = (DataError, pipeline.ConfigError, synth.SpecError, metrics.MetricError, OSError)

RUN_FILES = ("config.echo", "predictions.csv", "metrics.csv", "significance.csv")
UNSCORED = "unscored"
CHANCE_NAME = "Chance (always deceptive)"

# display order within each family of the report table
_REPORT_ORDER = (
    "MFCC",
    "eGeMAPs",
    "Audio (MFCC + eGeMAPs)",
    "FAU",
    "Gaze",
    "Pose",
    "Visual (FAU + Gaze + Pose)",
    "Audio-Visual Early Fusion (EF)",
    "Audio-Visual Late Fusion (LF)",
)
FAMILIES = ("Audio", "Visual", "Audio-Visual")
MODES_ORDER = ("sa", "baseline_no_sa", "chance")


def _load_schema(path) -> FeatureSchema:
    return load_schema(path) if path else reference_schema()


# -- featurize ---------------------------------------------------------------------


def cmd_featurize(args) -> int:
    schema = _load_schema(args.schema)
    m = featurize_dataset(load_manifest(args.manifest), schema, domain_tag=args.domain)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_featurized_csv(m, args.out)
    print(f"wrote {m.n_rows} rows x {len(m.column_names)} columns to {args.out}")
    return EXIT_OK


# -- run / baseline ----------------------------------------------------------------

_RUN_FLAG_KEYS = {
    "source": "source",
    "target": "target",
    "schema": "schema",
    "out": "out",
    "mode": "mode",
    "modality": "modality",
    "groups": "groups",
    "audio_groups": "audio_groups",
    "visual_groups": "visual_groups",
    "k_min": "k_min",
    "k_max": "k_max",
    "D_min": "D_min",
    "D_max": "D_max",
    "seed": "seed",
    "baseline_variant": "baseline_variant",
    "matched_k": "matched_k",
    "matched_D": "matched_D",
}


def resolve_run_config(args) -> dict[str, str]:
    """Config file values overridden by explicit flags; paths made absolute."""
    d = pipeline.parse_config_text(Path(args.config).read_text()) if args.config else {}
    for attr, key in _RUN_FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            d[key] = str(v)
    for key in ("source", "target", "out"):
        if key not in d:
            raise pipeline.ConfigError(f"missing required setting {key!r} (flag or config file)")
    for key in ("source", "target", "schema", "out"):
        if key in d:
            d[key] = str(Path(d[key]).resolve())
    return d


def _predictions_csv(results: dict[str, pipeline.FitResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "video_id", "label", "probability_deceptive"])
    for model, r in results.items():
        for vid, lab, p in zip(r.video_ids, r.labels, r.proba):
            w.writerow([model, vid, "deceptive" if lab else "truthful", repr(float(p))])
    return buf.getvalue()


def _score(r: pipeline.FitResult, y: np.ndarray) -> metrics.MetricReport:
    return metrics.evaluate(metrics.ScoredPredictions(r.video_ids, y, r.labels, r.proba))


def _significance_csv(results: dict[str, pipeline.FitResult], y: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["comparison", "b", "c", "concordant", "chi2", "p"])
    if "sa" in results:
        sa_ok = results["sa"].labels == y
        for other in ("baseline_no_sa", "chance"):
            if other in results:
                t = stats.mcnemar(sa_ok, results[other].labels == y)
                w.writerow([f"sa_vs_{other}", t.b, t.c, t.concordant, repr(t.chi2), repr(t.p)])
    return buf.getvalue()


def _selection_lines(results: dict[str, pipeline.FitResult]) -> str:
    out = []
    for model, r in results.items():
        if r.chosen_k is not None:
            out.append(f"# chosen {model}: k={r.chosen_k} D={r.chosen_D} cv_score={r.cv_score}\n")
    return "".join(out)


def execute_run(d: dict[str, str]) -> dict[str, pipeline.FitResult]:
    """Run the configured model(s) and write the four run files into d['out']."""
    cfg = pipeline.config_from_dict(d)
    schema = _load_schema(d.get("schema"))
    source = load_featurized_csv(d["source"], "source")
    target = load_featurized_csv(d["target"], "target")
    if source.column_names != target.column_names:
        raise DataError("source and target do not share the same column schema")
    if cfg.mode == "sa":
        exp = pipeline.run_experiment(source, target, cfg, schema)
        results = {"sa": exp.sa, "baseline_no_sa": exp.baseline, "chance": exp.chance}
    elif cfg.mode == "baseline_no_sa":
        if "matched_k" not in d:
            raise pipeline.ConfigError("mode baseline_no_sa needs matched_k")
        k = int(d["matched_k"])
        D = int(d["matched_D"]) if "matched_D" in d else None
        branches = [
            pipeline.run_baseline(s, t, cfg, k, D)
            for s, t in pipeline.modality_views(source, target, cfg.modality, schema)
        ]
        bl = branches[0] if len(branches) == 1 else pipeline.fuse(tuple(branches))
        results = {"baseline_no_sa": bl}
    else:
        results = {"chance": pipeline.run_chance_baseline(target)}

    out = Path(d["out"])
    out.mkdir(parents=True, exist_ok=True)
    echo = dict(d)
    echo.update(pipeline.config_to_dict(cfg))
    (out / "config.echo").write_text(pipeline.format_config(echo) + _selection_lines(results))
    (out / "predictions.csv").write_text(_predictions_csv(results))
    if target.labels is None:
        (out / "metrics.csv").write_text(UNSCORED + "\n")
        (out / "significance.csv").write_text(UNSCORED + "\n")
    else:
        y = target.y
        rows = [(name, _score(r, y)) for name, r in results.items()]
        (out / "metrics.csv").write_text(metrics.report_rows_csv(rows))
        (out / "significance.csv").write_text(_significance_csv(results, y))
    return results


def cmd_run(args) -> int:
    d = resolve_run_config(args)
    results = execute_run(d)
    for name, r in results.items():
        print(f"{name}: {len(r.video_ids)} predictions (k={r.chosen_k}, D={r.chosen_D})")
    print(f"outputs in {d['out']}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    args.mode = "baseline_no_sa"
    return cmd_run(args)


# -- analyze -----------------------------------------------------------------------


def cmd_analyze(args) -> int:
    ranked = stats.rank_transferable_features(
        load_featurized_csv(args.source, "source"), load_featurized_csv(args.target, "target")
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["column", "t", "df", "p", "rank"])
    for r in ranked:
        w.writerow([r.column, repr(r.welch.t), repr(r.welch.df), repr(r.welch.p_two_tail), r.rank])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -- synth -------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = synth.ShiftSpec.from_dict(
        {f.name: getattr(args, f.name) for f in fields(synth.ShiftSpec) if getattr(args, f.name) is not None}
    )
    source, target = synth.generate(spec)
    if args.hide_target_labels:
        target = target.without_labels()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_featurized_csv(source, out / "source.csv")
    write_featurized_csv(target, out / "target.csv")
    write_schema(synth.synth_schema(spec), out / "schema.csv")
    (out / "spec.echo").write_text("".join(f"{k} = {v}\n" for k, v in spec.to_dict().items()))
    (out / "invariant_columns.txt").write_text("".join(c + "\n" for c in synth.invariant_columns(spec)))
    if args.frames:
        synth.emit_frames(source, out / "frames" / "source", n_frames=args.frames)
        synth.emit_frames(target, out / "frames" / "target", n_frames=args.frames)
    print(f"wrote synthetic pair to {out}")
    return EXIT_OK


# -- report ------------------------------------------------------------------------


def _read_csv(path: Path) -> list[dict[str, str]] | None:
    text = path.read_text()
    if text.strip() == UNSCORED:
        return None
    return list(csv.DictReader(io.StringIO(text)))


def _num(v: str | None) -> float | None:
    return float(v) if v not in (None, "") else None


def _stars(p: float | None) -> str:
    if p is None:
        return ""
    return "**" if p < 0.01 else "*" if p < 0.05 else ""


def collect_runs(runs_dir: Path) -> list[dict]:
    """One record per run directory (any depth) holding the four run files."""
    runs = []
    for echo in sorted(runs_dir.rglob("config.echo")):
        run = echo.parent
        if not all((run / f).is_file() for f in RUN_FILES):
            continue
        cfg_d = pipeline.parse_config_text(echo.read_text())
        cfg = pipeline.config_from_dict(cfg_d)
        mets = _read_csv(run / "metrics.csv")
        sig = _read_csv(run / "significance.csv")
        runs.append(
            {
                "dir": run,
                "cfg": cfg,
                "metrics": {r["model"]: r for r in mets} if mets is not None else None,
                "sig": {r["comparison"]: r for r in sig} if sig is not None else None,
            }
        )
    return runs


def _row(name, mrow, stars=""):
    if mrow is None:
        return (name, None, None, None)
    return (name + stars, _num(mrow["acc"]), _num(mrow["auc"]), _num(mrow["f1_binary"]))


def report_rows(runs: list[dict], with_baselines: bool = False):
    """Table rows plus section headings, grouped Audio / Visual / Audio-Visual."""

    def key(run):
        name = run["cfg"].modality.name
        fam = FAMILIES.index(run["cfg"].modality.family)
        pos = _REPORT_ORDER.index(name) if name in _REPORT_ORDER else len(_REPORT_ORDER)
        return (fam, pos, name, MODES_ORDER.index(run["cfg"].mode), str(run["dir"]))

    rows, sections, fig = [], {}, []
    family = None
    for run in sorted(runs, key=key):
        cfg = run["cfg"]
        if cfg.modality.family != family:
            family = cfg.modality.family
            sections[len(rows)] = family
        name = cfg.modality.name
        mets = run["metrics"]
        get = (lambda m: mets.get(m)) if mets is not None else (lambda m: None)
        if cfg.mode == "sa":
            p = None
            if run["sig"] and "sa_vs_baseline_no_sa" in run["sig"]:
                p = float(run["sig"]["sa_vs_baseline_no_sa"]["p"])
            rows.append(_row(name, get("sa"), _stars(p)))
            if with_baselines:
                rows.append(_row(f"{name} [no SA]", get("baseline_no_sa")))
                rows.append(_row(f"{name} [{CHANCE_NAME}]", get("chance")))
            if get("sa") is not None and get("baseline_no_sa") is not None:
                fig.append((name, get("sa"), get("baseline_no_sa")))
        elif cfg.mode == "baseline_no_sa":
            rows.append(_row(f"{name} [no SA]", get("baseline_no_sa")))
        else:
            rows.append(_row(CHANCE_NAME, get("chance")))
    return rows, sections, fig



def fig2_data(fig) -> str:
    """Gnuplot-ready columns: SA and no-SA ACC/AUC/F1 per model."""
    out = ["# model acc_sa acc_no_sa auc_sa auc_no_sa f1_sa f1_no_sa\n"]
    for name, sa, bl in fig:
        vals = []
        for col in ("acc", "auc", "f1_binary"):
            vals += [sa[col] or "NaN", bl[col] or "NaN"]
        out.append(f'"{name}" ' + " ".join(vals) + "\n")
    return "".join(out)


def cmd_report(args) -> int:
    runs_dir = Path(args.runs_dir)
    if not runs_dir.is_dir():
        raise DataError(f"{runs_dir} is not a directory")
    runs = collect_runs(runs_dir)
    if not runs:
        raise DataError(f"no runs found under {runs_dir}")
    rows, sections, fig = report_rows(runs, args.with_baselines)
    table = metrics.format_table(rows, sections) + "\n"
    table += "* p<0.05, ** p<0.01 (McNemar, SA vs matched no-SA baseline)\n"
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    if args.fig2:
        Path(args.fig2).write_text(fig2_data(fig))
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, baseline: bool) -> None:
    p.add_argument("--config", help="key = value experiment file; flags override its values")
    p.add_argument("--source", help="featurized source CSV (labeled)")
    p.add_argument("--target", help="featurized target CSV (labels optional)")
    p.add_argument("--schema", help="feature schema CSV (default: reference schema)")
    p.add_argument("--out", help="run output directory")
    if not baseline:
        p.add_argument("--mode", choices=pipeline.MODES)
    p.add_argument("--modality", choices=("groups", "early", "late"))
    p.add_argument("--groups", help="comma-separated groups for a unimodal model")
    p.add_argument("--audio-groups", dest="audio_groups")
    p.add_argument("--visual-groups", dest="visual_groups")
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--D-min", dest="D_min", type=int)
    p.add_argument("--D-max", dest="D_max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--baseline-variant", dest="baseline_variant", choices=pipeline.BASELINE_VARIANTS)
    p.add_argument("--matched-k", dest="matched_k", type=int, required=baseline)
    p.add_argument("--matched-D", dest="matched_D", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subalign", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="frame-level CSVs -> one featurized row per video")
    p.add_argument("--manifest", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.add_argument("--domain", default="source", choices=("source", "target"))
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("run", help="SA model, matched no-SA baseline and chance baseline")
    _add_run_flags(p, baseline=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="no-SA KNN baseline at a given k")
    _add_run_flags(p, baseline=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("analyze", help="rank columns by cross-domain Welch p-value")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write a synthetic source/target pair")
    p.add_argument("--out", required=True)
    for f in fields(synth.ShiftSpec):
        default = getattr(synth.ShiftSpec, f.name)
        kind = (lambda s: s.lower() in ("1", "true", "yes")) if isinstance(default, bool) else type(default)
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind, help=f"default {default}")
    p.add_argument("--hide-target-labels", action="store_true")
    p.add_argument("--frames", type=int, default=0, help="also emit N frames per row (even N >= 2)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="comparison table over a directory of runs")
    p.add_argument("runs_dir")
    p.add_argument("--with-baselines", action="store_true")
    p.add_argument("--out", help="also write the table here")
    p.add_argument("--fig2", help="write gnuplot bar-chart data here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
