"""Run the nine unimodal and multimodal SA models plus baselines, then print the comparison table.

With --source/--target/--schema the runs use those featurized CSVs. Otherwise a
synthetic pair is generated and its columns are dealt round-robin into the five
feature groups so that every model has columns to work with.

    python scripts/run_nine_models.py --out runs/
"""

from __future__ import annotations

import argparse
from pathlib import Path

from subalign import cli, synth
from subalign.data_model import GROUP_MODALITY, GROUPS, Feature, FeatureSchema, write_featurized_csv, write_schema

MODELS = {
    "mfcc": {"modality": "groups", "groups": "MFCC"},
    "egemaps": {"modality": "groups", "groups": "eGeMAPs"},
    "audio": {"modality": "groups", "groups": "MFCC,eGeMAPs"},
    "fau": {"modality": "groups", "groups": "FAU"},
    "gaze": {"modality": "groups", "groups": "gaze"},
    "pose": {"modality": "groups", "groups": "pose"},
    "visual": {"modality": "groups", "groups": "FAU,gaze,pose"},
    "early_fusion": {"modality": "early"},
    "late_fusion": {"modality": "late"},
}


def synthetic_inputs(out: Path, seed: int) -> tuple[Path, Path, Path]:
    spec = synth.ShiftSpec(seed=seed)
    src, tgt = synth.generate(spec)
    schema = FeatureSchema(
        tuple(
            Feature(name, GROUP_MODALITY[GROUPS[j % 5]], GROUPS[j % 5])
            for j, name in enumerate(synth.feature_names(spec))
        )
    )
    out.mkdir(parents=True, exist_ok=True)
    write_featurized_csv(src, out / "source.csv")
    write_featurized_csv(tgt, out / "target.csv")
    write_schema(schema, out / "schema.csv")
    return out / "source.csv", out / "target.csv", out / "schema.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--source")
    ap.add_argument("--target")
    ap.add_argument("--schema")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--with-baselines", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    if args.source and args.target:
        source, target, schema = Path(args.source), Path(args.target), args.schema
    else:
        source, target, schema = synthetic_inputs(out / "data", args.seed)

    for name, model in MODELS.items():
        d = {
            "source": str(Path(source).resolve()),
            "target": str(Path(target).resolve()),
            "out": str((out / name).resolve()),
            "seed": str(args.seed),
            **model,
        }
        if schema:
            d["schema"] = str(Path(schema).resolve())
        cli.execute_run(d)

    report = ["report", str(out), "--fig2", str(out / "fig2.dat")]
    if args.with_baselines:
        report.append("--with-baselines")
    raise SystemExit(cli.main(report))


if __name__ == "__main__":
    main()
