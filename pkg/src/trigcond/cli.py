"""Command-line driver.

Every stage of the analysis loop is a subcommand, so the expert annotation
round trip (export, edit, import) can happen between invocations::

    trigcond synth --config gen.yaml --out data/
    trigcond derive-fn --input data/records.csv --out data/instances.csv
    trigcond split --input data/instances.csv --seed 0 --out data/
    trigcond learn --structure fig2_initial.model --train data/train.csv --out learned.model
    trigcond test --model learned.model --train data/train.csv --test data/test.csv --out report.json
    trigcond report report.json

``trigcond run --config pipeline.yaml`` chains the stages.

Exit status: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

import yaml

from . import annotations as ann
from .bn import load_model, load_structure, save_model
from .dataset import (
    MatchConfig,
    build_dataset,
    ingest,
    read_instances,
    read_records,
    split,
    write_instances,
    write_records,
)
from .errors import ConfigError, DataError, MalformedReport
from .hypothesis import (
    REPORT_FORMAT,
    AnalysisConfig,
    load_report,
    save_report,
    score_scenes,
    summary_table,
)
from .learning import LearnConfig, learn_cbts
from .networks import model_path
from .refinement import (
    VALIDATION_FORMAT,
    ValidationReport,
    apply_refinement,
    load_refinements,
    rss_distribution,
    save_validation,
    validate_splits,
)
from .synthgen import load_generator_config, sample, truth_sidecar

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _need(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ConfigError(f"file not found: {p}")


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def _structure_arg(value: str) -> str:
    """Accept shipped model names ("initial", "refined") as paths."""
    if value in ("initial", "refined"):
        return str(model_path(value))
    return value


def _match_cfg(args) -> MatchConfig:
    return MatchConfig(args.cost_threshold, args.x_limit, args.y_limit)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- stage commands ----------------------------------------------------------

def cmd_synth(args):
    if not args.config:
        raise ConfigError("synth needs --config <generator.yaml>")
    _need(args.config)
    cfg = load_generator_config(args.config, seed=args.seed)
    out = _out(args, "synth")
    out.mkdir(parents=True, exist_ok=True)
    drawn = sample(cfg)
    write_records(drawn.records, out / "records.csv", cfg.visible_nodes)
    truth_sidecar(cfg, out / "truth.annotations.yaml", drawn)
    print(f"{len(drawn.scene_ids)} scenes, {int(drawn.sizes.sum())} objects -> {out}")


def cmd_ingest(args):
    path = _structure_arg(args.structure) if args.structure else None
    _need(args.input, path)
    structure = load_structure(path) if path else None
    gt, det = ingest(read_records(args.input), structure)
    scenes = list(dict.fromkeys([*gt, *det]))
    summary = {
        "n_scenes": len(scenes),
        "n_ground_truth": sum(map(len, gt.values())),
        "n_detections": sum(map(len, det.values())),
        "scenes": {s: [len(gt.get(s, [])), len(det.get(s, []))] for s in scenes},
    }
    print(f"{summary['n_scenes']} scenes, {summary['n_ground_truth']} ground-truth and "
          f"{summary['n_detections']} detection records")
    if args.out:
        _write_text(Path(args.out), json.dumps(summary, indent=1) + "\n")


def cmd_derive_fn(args):
    path = _structure_arg(args.structure) if args.structure else None
    _need(args.input, path)
    structure = load_structure(path) if path else None
    gt, det = ingest(read_records(args.input), structure)
    data = build_dataset(gt, det, _match_cfg(args))
    out = _out(args, "instances.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_instances(data, out)
    n_fn = sum(1 for i in data.instances() if i.attributes["FN"] == "Yes")
    print(f"{len(data)} scenes, {data.M} instances, {n_fn} FN, {data.fp_count} unmatched detections -> {out}")


def cmd_split(args):
    _need(args.input)
    data = read_instances(args.input)
    seed = args.seed if args.seed is not None else 0
    train, test = split(data, args.fraction, seed)
    out = _out(args, ".")
    out.mkdir(parents=True, exist_ok=True)
    write_instances(train, out / "train.csv", data.attribute_names())
    write_instances(test, out / "test.csv", data.attribute_names())
    _write_text(out / "split.json", json.dumps({
        "seed": seed, "train_fraction": args.fraction,
        "train": list(train.scene_ids), "test": list(test.scene_ids),
    }, indent=1) + "\n")
    print(f"{len(train)} train / {len(test)} test scenes (seed {seed}) -> {out}")


def cmd_learn(args):
    path = _structure_arg(args.structure)
    _need(path, args.train)
    model = learn_cbts(load_structure(path), read_instances(args.train), LearnConfig(args.policy))
    out = _out(args, "learned.model")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"learned {len(model.cbts)} CBTs -> {out}")


def cmd_test(args):
    _need(args.model, args.train, args.test)
    model = load_model(args.model)
    cfg = AnalysisConfig(args.alpha if args.alpha is not None else 0.05, tuple(args.target or ["FN"]))
    report = score_scenes(model, read_instances(args.train), read_instances(args.test), cfg, args.seed)
    out = _out(args, "report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_report(report, out)
    _write_text(out.with_suffix(".txt"), summary_table(report) + "\n")
    print(f"RSS = {report.rss} of {len(report.scenes)} scenes -> {out}")


def cmd_export_scenes(args):
    _need(args.report, args.test)
    report = load_report(args.report)
    data = read_instances(args.test) if args.test else None
    ids = [s.scene_id for s in report.scenes] if args.all else report.relevant_scene_ids()
    out = _out(args, "annotations.yaml")
    out.parent.mkdir(parents=True, exist_ok=True)
    ann.export_annotations(ids, out, data)
    print(f"{len(ids)} scenes exported -> {out}")


def cmd_import_annotations(args):
    _need(args.input, args.annotations)
    data = ann.import_annotations(args.annotations, read_instances(args.input))
    out = _out(args, "annotated.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_instances(data, out)
    print(f"{data.M} instances with {data.attribute_names()} -> {out}")


def cmd_refine(args):
    path = _structure_arg(args.structure)
    _need(path, args.ops)
    structure = load_structure(path)
    for op in load_refinements(args.ops):
        structure = apply_refinement(structure, op)
    out = _out(args, "refined.model")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(structure, out)
    print(f"refined structure with {len(structure.edges)} edges -> {out}")


def _seed_list(args, default=10):
    if args.seeds:
        return list(args.seeds)
    if args.seed is not None:
        return [args.seed]
    return list(range(default))


def cmd_validate(args):
    before_path, after_path = _structure_arg(args.before), _structure_arg(args.after)
    _need(before_path, after_path, args.data)
    cfg = AnalysisConfig(args.alpha if args.alpha is not None else 0.05, (args.eval_node,))
    report = validate_splits(load_structure(before_path), load_structure(after_path),
                             read_instances(args.data), args.eval_node, _seed_list(args),
                             args.fraction, cfg, LearnConfig(args.policy))
    out = _out(args, "validation.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_validation(report, out)
    print(render_validation(report))


def render_validation(report: ValidationReport) -> str:
    lines = [f"node {report.node}: RSS initial {report.rss_initial}, after {report.rss_after}, "
             f"relative change {report.relative_rss_change:+.2f}% -> proposition {report.proposition}"
             + (" (tie)" if report.tie else "")]
    if report.iterations:
        for label, vals in (("initial", [a for a, _ in report.iterations]),
                            ("after", [b for _, b in report.iterations])):
            lo, med, hi = rss_distribution(vals)
            lines.append(f"  RSS {label:<7} over {len(vals)} seeds: min {lo}  median {med}  max {hi}")
        lo, med, hi = rss_distribution(report.per_seed_changes())
        lines.append(f"  relative change (%) over {len(report.iterations)} seeds: "
                     f"min {lo:+.2f}  median {med:+.2f}  max {hi:+.2f}")
    return "\n".join(lines)


def cmd_report(args):
    run_reports = []
    for path in args.files:
        _need(path)
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise MalformedReport(f"{path}: {exc}") from None
        fmt = doc.get("format") if isinstance(doc, dict) else None
        if fmt == REPORT_FORMAT:
            report = load_report(path)
            run_reports.append(report)
            print(summary_table(report))
        elif fmt == VALIDATION_FORMAT and "node" in doc:
            print(render_validation(ValidationReport.from_dict(doc)))
        elif fmt == VALIDATION_FORMAT:
            print(f"new node {doc['new_node']}: confounder indicated = {doc['confounder_indicated']}")
            for key in ("child", "parent"):
                print(render_validation(ValidationReport.from_dict(doc[key])))
        else:
            raise MalformedReport(f"{path}: unrecognised report format {fmt!r}")
    if len(run_reports) > 1:
        lo, med, hi = rss_distribution(r.rss for r in run_reports)
        print(f"RSS over {len(run_reports)} runs: min {lo}  median {med}  max {hi}")


# -- full pipeline -----------------------------------------------------------

def load_pipeline_config(path) -> dict:
    _need(path)
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: pipeline configuration must be a mapping")
    base = Path(path).parent

    def resolve(p):
        if p in ("initial", "refined"):
            return str(model_path(p))
        return str(p if Path(p).is_absolute() else base / p)

    for key in ("input", "structure", "refinements", "out"):
        if doc.get(key):
            doc[key] = resolve(doc[key])
    doc["annotations"] = [resolve(p) for p in doc.get("annotations", [])]
    return doc


def _section(cls, conf, key):
    try:
        return cls(**(conf.get(key) or {}))
    except TypeError as exc:
        raise ConfigError(f"section {key!r}: {exc}") from None


def cmd_run(args):
    """Ingest, derive FN, split, learn, test and export for each seed; then
    import annotations, refine and validate when those are configured."""
    if not args.config:
        raise ConfigError("run needs --config <pipeline.yaml>")
    conf = load_pipeline_config(args.config)
    for key in ("input", "structure"):
        if not conf.get(key):
            raise ConfigError(f"pipeline configuration lacks {key!r}")
    _need(conf["input"], conf["structure"], conf.get("refinements"), *conf["annotations"])

    match = _section(MatchConfig, conf, "match")
    learn_cfg = _section(LearnConfig, conf, "learn")
    analysis = dict(conf.get("analysis", {}))
    if args.alpha is not None:
        analysis["alpha"] = args.alpha
    cfg = AnalysisConfig(analysis.get("alpha", 0.05), tuple(analysis.get("target_nodes", ["FN"])))
    split_conf = conf.get("split", {})
    fraction = split_conf.get("train_fraction", 0.8)
    seeds = [args.seed] if args.seed is not None else list(split_conf.get("seeds", [0]))
    structure = load_structure(conf["structure"])
    refinements = load_refinements(conf["refinements"]) if conf.get("refinements") else []
    out = Path(args.out or conf.get("out", "run"))

    gt, det = ingest(read_records(conf["input"]), structure)
    data = build_dataset(gt, det, match)
    for path in conf["annotations"]:
        data = ann.import_annotations(path, data)

    out.parent.mkdir(parents=True, exist_ok=True)
    # stage everything, so a failing step leaves no partial reports behind
    with tempfile.TemporaryDirectory(dir=out.parent, prefix=".trigcond-") as tmp:
        stage = Path(tmp)
        write_instances(data, stage / "instances.csv")
        manifest = {
            "config_sha256": hashlib.sha256(Path(args.config).read_bytes()).hexdigest(),
            "alpha": cfg.alpha, "target_nodes": list(cfg.target_nodes),
            "train_fraction": fraction, "seeds": seeds, "runs": [],
        }
        log = []
        for seed in seeds:
            train, test = split(data, fraction, seed)
            model = learn_cbts(structure, train, learn_cfg)
            report = score_scenes(model, train, test, cfg, seed)
            save_model(model, stage / f"learned_seed{seed}.model")
            save_report(report, stage / f"report_seed{seed}.json")
            (stage / f"report_seed{seed}.txt").write_text(summary_table(report) + "\n")
            ann.export_annotations(report.relevant_scene_ids(),
                                   stage / f"flagged_seed{seed}.annotations.yaml", test)
            manifest["runs"].append({"seed": seed, "rss": report.rss, "n_test_scenes": len(test)})
            log.append(f"seed {seed}: RSS = {report.rss} of {len(test)} test scenes")

        if refinements:
            refined = structure
            for op in refinements:
                refined = apply_refinement(refined, op)
            save_model(refined, stage / "refined.model")
            eval_node = conf.get("validate", {}).get("eval_node", cfg.target_nodes[0])
            vcfg = AnalysisConfig(cfg.alpha, (eval_node,))
            vreport = validate_splits(structure, refined, data, eval_node, seeds, fraction,
                                      vcfg, learn_cfg)
            save_validation(vreport, stage / "validation.json")
            manifest["validation"] = {"node": eval_node, "proposition": vreport.proposition}
            log.append(render_validation(vreport))

        (stage / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
        out.mkdir(parents=True, exist_ok=True)
        for f in sorted(stage.iterdir()):
            shutil.move(str(f), str(out / f.name))
    print("\n".join(log))
    print(f"outputs -> {out}")


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    common.add_argument("--out", help="output file or directory")

    match = argparse.ArgumentParser(add_help=False)
    match.add_argument("--cost-threshold", type=float, default=2.0, help="max MSE in m^2 for a match")
    match.add_argument("--x-limit", type=float, default=140.0)
    match.add_argument("--y-limit", type=float, default=50.0)

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument("--policy", choices=("uniform", "strict"), default="uniform",
                        help="handling of parent configurations without training support")

    parser = argparse.ArgumentParser(prog="trigcond", description=__doc__.split("\n")[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic raw object table")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="parse and check a raw object table")
    p.add_argument("--input", required=True)
    p.add_argument("--structure", help="model file whose state spaces the table must respect")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("derive-fn", parents=[common, match], help="label ground truth with FN")
    p.add_argument("--input", required=True)
    p.add_argument("--structure")
    p.set_defaults(func=cmd_derive_fn)

    p = sub.add_parser("split", parents=[common], help="scene-level train/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("learn", parents=[common, policy], help="learn CBTs by maximum likelihood")
    p.add_argument("--structure", required=True, help="model file, or 'initial'/'refined'")
    p.add_argument("--train", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("test", parents=[common], help="p-value test of the test scenes")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--target", action="append", help="target node (repeatable; default FN)")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("export-scenes", parents=[common], help="write an annotation file for flagged scenes")
    p.add_argument("--report", required=True)
    p.add_argument("--test", help="test instance table, for instance summaries")
    p.add_argument("--all", action="store_true", help="export every scene, not only relevant ones")
    p.set_defaults(func=cmd_export_scenes)

    p = sub.add_parser("import-annotations", parents=[common], help="merge an annotation file")
    p.add_argument("--input", required=True)
    p.add_argument("--annotations", required=True)
    p.set_defaults(func=cmd_import_annotations)

    p = sub.add_parser("refine", parents=[common], help="apply refinement declarations to a structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--ops", required=True, help="YAML list of refinements")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("validate", parents=[common, policy], help="compare RSS before and after a refinement")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--data", required=True, help="labelled instance table (all scenes)")
    p.add_argument("--eval-node", default="FN")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", parents=[common], help="render run or validation reports")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", parents=[common], help="run the configured pipeline")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"trigcond: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"trigcond: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"trigcond: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
