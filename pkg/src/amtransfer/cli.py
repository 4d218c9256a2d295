"""Command-line entry point.

Subcommands wire the library into reproducible batch experiments:

- ``analyze``   pre-transfer scoring + scenario/method selection
- ``synth``     generate a synthetic melt-pool stream
- ``structure`` turn a frame dataset into fixed-length windows
- ``train``     train the autoencoder on normal windows
- ``transfer``  fine-tune a source checkpoint on a target process
- ``evaluate``  score a checkpoint against a labeled test set
- ``report``    render the artifacts of a prior run as text
- ``recipe``    run the bundled desk-scale cross-process experiment

Conventions shared by every subcommand: relative output paths resolve
under ``$AMTRANSFER_OUTPUT_ROOT`` when that variable is set; existing
outputs are never overwritten without ``--force``; each artifact
directory gets a ``manifest.json`` echoing the resolved parameters,
input-file digests and the package version; validation failures exit
with status 2 and a machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, bundled_config_path
from .errors import AmTransferError, ValidationError
from .knowledge import bundled_context_path, load_context
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.model import AutoencoderModel
from .nn.training import TrainingConfig, train
from .pretransfer import pretransfer_score, rank_sources, render_report_table
from .recipe import run_desk_recipe, split_target
from .scenario import compare
from .scoring import (
    Normalization,
    ThresholdRule,
    plot_regularity,
    score_and_evaluate,
)
from .structuring import (
    WindowSet,
    filter_inactive,
    load_dataset,
    make_concatenations,
    save_dataset,
)
from .synth import ProcessProfile, default_profiles, generate_stream
from .transfer import (
    TransferConfig,
    append_knowledge_record,
    default_strategies,
    make_scratch_baseline,
    plot_loss_curves,
    post_transfer_validate,
    run_transfer,
)

OUTPUT_ROOT_ENV = "AMTRANSFER_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_VALIDATION = 2


def _resolve_out(path: str | Path) -> Path:
    """Relative outputs land under $AMTRANSFER_OUTPUT_ROOT when set."""
    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _ensure_fresh(path: Path, force: bool) -> Path:
    if path.exists() and not force:
        if path.is_dir() and not any(path.iterdir()):
            return path
        raise ValidationError(f"output {path} exists; pass --force to overwrite")
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _input_digests(paths: dict[str, Path]) -> dict:
    out = {}
    for role, path in paths.items():
        path = Path(path)
        entry: dict = {"path": str(path)}
        if path.is_file():
            entry["sha256"] = _sha256(path)
        out[role] = entry
    return out


def _manifest_doc(command: str, inputs: dict[str, Path], params: dict) -> dict:
    doc = {
        "schema_version": 1,
        "tool": {"name": "amtransfer", "version": __version__},
        "command": command,
        "inputs": _input_digests(inputs),
        "params": params,
    }
    doc["config_hash"] = hashlib.sha256(
        json.dumps(params, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]
    return doc


def _write_json(path: Path, doc: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _load_context_arg(spec: str):
    """A context argument is a JSON path or the name of a bundled context."""
    path = Path(spec)
    if path.is_file():
        return load_context(path), path
    if path.suffix == "" and path.name == spec:
        try:
            bundled = bundled_context_path(spec)
        except ValidationError:
            raise ValidationError(
                f"context {spec!r}: no such file and no bundled context by that name"
            ) from None
        return load_context(bundled), bundled
    raise ValidationError(f"context file {spec!r} not found")


def _parse_overrides(pairs: list[str] | None) -> dict[str, int] | None:
    if not pairs:
        return None
    overrides: dict[str, int] = {}
    for pair in pairs:
        level, eq, value = pair.partition("=")
        if not eq or value not in ("0", "1"):
            raise ValidationError(
                f"override {pair!r}: expected LEVEL=0 or LEVEL=1"
            )
        overrides[level.strip()] = int(value)
    return overrides


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args: argparse.Namespace) -> int:
    target, target_path = _load_context_arg(args.target)
    sources = []
    source_paths: dict[str, Path] = {"target": target_path}
    for i, spec in enumerate(args.source):
        ctx, path = _load_context_arg(spec)
        sources.append(ctx)
        source_paths[f"source_{i}"] = path
    overrides = _parse_overrides(args.override)

    out_dir = _ensure_fresh(_resolve_out(args.out), args.force)
    out_dir.mkdir(parents=True, exist_ok=True)

    if len(sources) == 1:
        reports = [pretransfer_score(sources[0], target, overrides)]
    else:
        per_source = {s.context_id: overrides for s in sources} if overrides else None
        reports = rank_sources(sources, target, per_source)
    best = reports[0]
    best_source = next(s for s in sources if s.context_id == best.source_id)
    plan = compare(best_source, target)

    _write_json(out_dir / "pretransfer_report.json", best.to_dict())
    _write_json(out_dir / "transfer_plan.json", plan.to_dict())
    if len(reports) > 1:
        _write_json(
            out_dir / "ranked_sources.json",
            {"schema_version": 1, "ranked": [r.to_dict() for r in reports]},
        )
    _write_json(
        out_dir / "manifest.json",
        _manifest_doc(
            "analyze",
            source_paths,
            {"overrides": overrides, "n_sources": len(sources)},
        ),
    )

    print(render_report_table(best, best_source, target))
    print()
    print(f"scenario:      {plan.scenario.value}")
    print(f"method family: {plan.method_family.value}")
    for note in plan.notes:
        print(f"  - {note}")
    if len(reports) > 1:
        print()
        print("ranked sources:")
        for rank, rep in enumerate(reports, start=1):
            print(
                f"  {rank}. {rep.source_id}  score "
                f"{rep.pre_transfer_score:.2f}  significant={rep.significant}"
            )
    print(f"\nartifacts: {out_dir}")
    return EXIT_OK


def _profile_from_args(args: argparse.Namespace) -> ProcessProfile:
    if args.profile_json is not None:
        path = Path(args.profile_json)
        if not path.is_file():
            raise ValidationError(f"profile file {path} not found")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"profile {path} is not valid JSON: {exc}") from exc
        return ProcessProfile.from_dict(doc)
    frame_hw = (args.frame_size, args.frame_size)
    lpbf_like, ded_like = default_profiles(frame_hw)
    return {"lpbf_like": lpbf_like, "ded_like": ded_like}[args.profile]


def _parse_anomaly_mix(text: str | None) -> dict[str, float] | None:
    """``"spatter=0.02,plume=0.01"`` or ``"none"``; None keeps the profile mix."""
    if text is None:
        return None
    if text == "none":
        return {}
    mix: dict[str, float] = {}
    for item in text.split(","):
        kind, eq, rate = item.partition("=")
        if not eq:
            raise ValidationError(f"anomaly mix entry {item!r}: expected KIND=RATE")
        try:
            mix[kind.strip()] = float(rate)
        except ValueError:
            raise ValidationError(f"anomaly mix rate {rate!r} is not a number") from None
    return mix


def cmd_synth(args: argparse.Namespace) -> int:
    profile = _profile_from_args(args)
    mix = _parse_anomaly_mix(args.anomaly_mix)
    if mix is not None:
        profile = replace(profile, anomaly_mix=mix)
    stream = generate_stream(profile, args.frames, args.seed)

    out_dir = _ensure_fresh(_resolve_out(args.out), args.force)
    save_dataset(stream, out_dir)
    _write_json(
        out_dir / "synth_manifest.json",
        _manifest_doc(
            "synth",
            {},
            {
                "profile": profile.to_dict(),
                "n_frames": args.frames,
                "seed": args.seed,
            },
        ),
    )

    counts = stream.label_counts()
    counted = ", ".join(f"{k}={v}" for k, v in counts.items() if v)
    print(
        f"wrote {len(stream.frames)} frames ({counted}) "
        f"for profile {profile.name!r} to {out_dir}"
    )
    return EXIT_OK


def cmd_structure(args: argparse.Namespace) -> int:
    splitting = bool(args.train_out or args.test_out or args.n_train is not None)
    if splitting and not (args.train_out and args.test_out and args.n_train is not None):
        raise ValidationError("splitting needs --train-out, --test-out and --n-train")
    if not splitting and args.out is None:
        raise ValidationError("pass --out, or --train-out/--test-out/--n-train")

    dataset = load_dataset(args.dataset)
    active = filter_inactive(dataset.frames, args.threshold)
    concats = make_concatenations(active, args.window, args.stride)
    if not concats:
        raise ValidationError(
            f"stream too short: {len(active)} active frames < window {args.window}"
        )
    windows = WindowSet.from_concatenations(concats, process_tag=dataset.process_tag)

    params = {
        "window": args.window,
        "stride": args.stride,
        "inactive_mean_threshold": args.threshold,
        "n_windows": len(windows),
    }
    inputs = {"dataset": Path(args.dataset) / "manifest.json"}
    written: list[Path] = []
    if splitting:
        train_set, test_set = split_target(windows, args.n_train)
        for part, out_arg in ((train_set, args.train_out), (test_set, args.test_out)):
            out = _ensure_fresh(_resolve_out(out_arg), args.force)
            part.save(out)
            written.append(out)
        _write_json(
            written[0].with_suffix(".manifest.json"),
            _manifest_doc("structure", inputs, {**params, "n_train": args.n_train}),
        )
        print(
            f"split {len(windows)} windows into {len(train_set)} train "
            f"(normal) and {len(test_set)} test "
            f"({len(test_set.anomalous_indices())} anomalous)"
        )
    else:
        out = _ensure_fresh(_resolve_out(args.out), args.force)
        windows.save(out)
        written.append(out)
        _write_json(
            out.with_suffix(".manifest.json"),
            _manifest_doc("structure", inputs, params),
        )

    labels = Counter(label.value for label in windows.labels)
    dropped = len(dataset.frames) - len(active)
    print(
        f"{len(windows)} windows from {len(active)} active frames "
        f"({dropped} inactive dropped): {dict(labels)}"
    )
    for out in written:
        print(f"wrote {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    windows = WindowSet.load(args.windows)
    normals = windows.subset(windows.normal_indices())
    if not len(normals):
        raise ValidationError("no normal windows to train on")

    t, h, w = normals.pixels.shape[1:]
    model = AutoencoderModel.build(input_shape=(t, h, w), seed=args.seed)
    config = TrainingConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    history = train(model, normals.to_concatenations(), config)

    out = _ensure_fresh(_resolve_out(args.out), args.force)
    save_checkpoint(model, out)
    _write_json(
        out.with_suffix(".manifest.json"),
        _manifest_doc(
            "train",
            {"windows": Path(args.windows)},
            {
                "epochs": args.epochs,
                "batch_size": args.batch_size,
                "learning_rate": args.learning_rate,
                "seed": args.seed,
                "n_train_windows": len(normals),
                "loss_history": history,
            },
        ),
    )

    final = history[-1] if history else float("nan")
    print(
        f"trained {args.epochs} epochs on {len(normals)} normal windows, "
        f"final loss {final:.6f}"
    )
    print(f"wrote {out}")
    return EXIT_OK


def _scoring_config(args: argparse.Namespace, seed: int) -> TransferConfig:
    return TransferConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=seed,
        threshold_rule=ThresholdRule(args.rule),
        k=args.k,
        percentile=args.percentile,
        normalization=Normalization(args.normalization),
    )


def cmd_transfer(args: argparse.Namespace) -> int:
    source_model = load_checkpoint(args.checkpoint)
    target_train = WindowSet.load(args.train).to_concatenations()
    target_test = WindowSet.load(args.test).to_concatenations()

    strategies = default_strategies(args.budget)
    if args.strategy != "all":
        strategies = {
            name: strat
            for name, strat in strategies.items()
            if name.value == args.strategy
        }

    out_dir = _ensure_fresh(_resolve_out(args.out), args.force)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _scoring_config(args, args.seed)

    scratch = None
    if args.scratch:
        scratch = make_scratch_baseline(
            source_model, target_train, target_test, args.budget, config
        )
        scratch.report.save(out_dir / "scratch_report.json")
        save_checkpoint(scratch.model, out_dir / "scratch_model.mpae")

    histories = {}
    if scratch is not None:
        histories["scratch"] = scratch.loss_history
    lines = []
    for name, strategy in strategies.items():
        tuned, report = run_transfer(
            source_model, target_train, target_test, strategy, config, scratch=scratch
        )
        if scratch is not None:
            verdict = post_transfer_validate(report, margin=args.margin)
        report.save(out_dir / f"transfer_{name.value}.json")
        save_checkpoint(tuned, out_dir / f"model_{name.value}.mpae")
        append_knowledge_record(report, out_dir / "knowledge_record.jsonl")
        histories[name.value] = [
            loss for row in report.phases for loss in row["loss_history"]
        ]
        line = (
            f"{name.value}: accuracy {report.pre_accuracy_pct:.1f} -> "
            f"{report.post_accuracy_pct:.1f}, final loss {report.final_loss:.6f}"
        )
        if report.verdict is not None:
            line += f", verdict {report.verdict}"
        lines.append(line)
    if args.plots:
        plot_loss_curves(histories, out_dir / "loss_curves.png")

    _write_json(
        out_dir / "manifest.json",
        _manifest_doc(
            "transfer",
            {
                "checkpoint": Path(args.checkpoint),
                "train": Path(args.train),
                "test": Path(args.test),
            },
            {
                "strategy": args.strategy,
                "epoch_budget": args.budget,
                "batch_size": args.batch_size,
                "learning_rate": args.learning_rate,
                "seed": args.seed,
                "scratch_baseline": bool(args.scratch),
                "margin": args.margin,
                "rule": args.rule,
            },
        ),
    )

    if scratch is not None:
        print(f"scratch baseline: accuracy {scratch.accuracy_pct:.1f}")
    for line in lines:
        print(line)
    print(f"artifacts: {out_dir}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    train_set = WindowSet.load(args.train)
    train_windows = train_set.subset(train_set.normal_indices()).to_concatenations()
    if not train_windows:
        raise ValidationError("no normal windows in the train set")
    test_windows = WindowSet.load(args.test).to_concatenations()

    report = score_and_evaluate(
        model,
        train_windows,
        test_windows,
        rule=ThresholdRule(args.rule),
        k=args.k,
        percentile=args.percentile,
        normalization=Normalization(args.normalization),
    )

    out = _ensure_fresh(_resolve_out(args.out), args.force)
    report.save(out)
    _write_json(
        out.with_suffix(".manifest.json"),
        _manifest_doc(
            "evaluate",
            {
                "checkpoint": Path(args.checkpoint),
                "train": Path(args.train),
                "test": Path(args.test),
            },
            {
                "rule": args.rule,
                "k": args.k,
                "percentile": args.percentile,
                "normalization": args.normalization,
            },
        ),
    )
    if args.plot:
        plot_regularity(report, _resolve_out(args.plot))

    fp = report.false_positive_pct
    fp_text = f", false positives {fp:.1f}%" if fp is not None else ""
    print(
        f"threshold {report.threshold:.6f} ({report.threshold_rule.value}), "
        f"detected {report.n_detected}/{report.n_anomalous} anomalies, "
        f"accuracy {report.accuracy_pct:.1f}%{fp_text}"
    )
    print(f"wrote {out}")
    return EXIT_OK


def _render_seed_summary(doc: dict, indent: str = "") -> list[str]:
    lines = [
        f"{indent}seed {doc['seed']}  (config {doc['config_hash']}, "
        f"{doc['n_source_train_windows']} source / "
        f"{doc['n_target_train_windows']} target train windows, "
        f"{doc['n_target_test_anomalous']} anomalous of "
        f"{doc['n_target_test_windows']} test)"
    ]
    scratch = doc["scratch"]
    lines.append(
        f"{indent}  scratch_baseline     accuracy {scratch['accuracy_pct']:6.1f}  "
        f"best loss {scratch['best_loss']:.6f}"
    )
    for name, row in doc["strategies"].items():
        lines.append(
            f"{indent}  {name:<20} accuracy {row['pre_accuracy_pct']:6.1f} -> "
            f"{row['post_accuracy_pct']:6.1f}  final loss {row['final_loss']:.6f}  "
            f"improved={row['improved']}  verdict={row['verdict']}"
        )
    return lines


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise ValidationError(f"run directory {run_dir} not found")

    lines: list[str] = []
    recipe_summary = run_dir / "recipe_summary.json"
    seed_summary = run_dir / "summary.json"
    if recipe_summary.is_file():
        doc = json.loads(recipe_summary.read_text())
        lines.append(f"recipe run {run_dir}  (config {doc['config_hash']})")
        for seed in doc["seeds"]:
            lines.extend(_render_seed_summary(doc["per_seed"][str(seed)], "  "))
    elif seed_summary.is_file():
        lines.extend(_render_seed_summary(json.loads(seed_summary.read_text())))
    else:
        for path in sorted(run_dir.glob("transfer_*.json")):
            doc = json.loads(path.read_text())
            name = doc["strategy"]["name"]
            lines.append(
                f"{name}: accuracy {doc['pre_accuracy_pct']:.1f} -> "
                f"{doc['post_accuracy_pct']:.1f}, final loss "
                f"{doc['final_loss']:.6f}, verdict {doc['verdict']}"
            )
        for path in sorted(run_dir.glob("pretransfer_report.json")):
            doc = json.loads(path.read_text())
            lines.append(
                f"pre-transfer {doc['source_id']} -> {doc['target_id']}: "
                f"score {doc['pre_transfer_score_display']:.2f} "
                f"(significant={doc['significant']})"
            )
    if not lines:
        raise ValidationError(f"no renderable artifacts found under {run_dir}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_recipe(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = ExperimentConfig.load(args.config)
        config_path = Path(args.config)
    else:
        config_path = bundled_config_path()
        config = ExperimentConfig.load(config_path)
    if args.seeds:
        config = config.with_overrides(seeds=tuple(args.seeds))
    if args.no_plots:
        config = config.with_overrides(make_plots=False)

    out_dir = _resolve_out(args.out if args.out is not None else config.output_dir)
    _ensure_fresh(out_dir, args.force)
    overall = run_desk_recipe(config, out_dir)
    _write_json(
        out_dir / "manifest.json",
        _manifest_doc("recipe", {"config": config_path}, config.to_dict()),
    )

    print(f"recipe complete: {len(overall['per_seed'])} seeds under {out_dir}")
    for seed, doc in overall["per_seed"].items():
        ok = all(
            row["improved"] and row["loss_below_scratch"]
            for row in doc["strategies"].values()
        )
        print(f"  seed {seed}: all strategies improved and beat scratch: {ok}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amtransfer",
        description="Knowledge-transfer toolkit for melt-pool anomaly detection.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="pre-transfer scoring and scenario selection")
    p.add_argument(
        "--source",
        action="append",
        required=True,
        help="source context JSON path or bundled name (repeatable)",
    )
    p.add_argument("--target", required=True, help="target context JSON path or bundled name")
    p.add_argument(
        "--override",
        action="append",
        metavar="LEVEL=0|1",
        help="force a component score (e.g. AM_MT=1)",
    )
    p.add_argument("--out", default="analysis", help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic melt-pool stream")
    p.add_argument("--profile", choices=("lpbf_like", "ded_like"), default="lpbf_like")
    p.add_argument("--profile-json", help="load a custom ProcessProfile JSON instead")
    p.add_argument("--frame-size", type=int, default=32)
    p.add_argument("--frames", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--anomaly-mix",
        metavar="KIND=RATE[,...]",
        help="override the profile's anomaly mix ('none' clears it)",
    )
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("structure", help="window a frame dataset into concatenations")
    p.add_argument("--dataset", required=True, help="dataset directory from synth/ingest")
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.02, help="inactive-frame mean threshold")
    p.add_argument("--out", help="output .npz window set")
    p.add_argument("--train-out", help="with --test-out/--n-train: normal-only train .npz")
    p.add_argument("--test-out", help="remaining normals plus all anomalous windows")
    p.add_argument("--n-train", type=int, help="number of normal windows for the train split")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("train", help="train the autoencoder on normal windows")
    p.add_argument("--windows", required=True, help="window set .npz")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="fine-tune a source checkpoint on a target")
    p.add_argument("--checkpoint", required=True, help="source model checkpoint")
    p.add_argument("--train", required=True, help="target train window set .npz")
    p.add_argument("--test", required=True, help="target test window set .npz")
    p.add_argument(
        "--strategy",
        choices=("retrain_all", "convlstm_then_cnn", "cnn_then_convlstm", "all"),
        default="all",
    )
    p.add_argument("--budget", type=int, default=12, help="total fine-tuning epochs")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=1.0, help="neutral verdict band")
    p.add_argument(
        "--no-scratch",
        dest="scratch",
        action="store_false",
        help="skip the scratch baseline (no verdicts)",
    )
    p.add_argument("--no-plots", dest="plots", action="store_false")
    p.add_argument("--rule", choices=[r.value for r in ThresholdRule], default="kth_min_regularity")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--percentile", type=float, default=99.0)
    p.add_argument("--normalization", choices=("paper", "range"), default="paper")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", help="score a checkpoint on a labeled test set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True, help="window set .npz for the threshold")
    p.add_argument("--test", required=True, help="labeled window set .npz")
    p.add_argument("--rule", choices=[r.value for r in ThresholdRule], default="kth_min_regularity")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--percentile", type=float, default=99.0)
    p.add_argument("--normalization", choices=("paper", "range"), default="paper")
    p.add_argument("--plot", help="optional regularity plot path")
    p.add_argument("--out", required=True, help="output report JSON path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a run directory as text")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("recipe", help="run the desk-scale cross-process experiment")
    p.add_argument("--config", help="experiment config JSON (default: bundled recipe)")
    p.add_argument("--seeds", type=int, nargs="+", help="override config seeds")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_recipe)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AmTransferError as exc:
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        error = {"error": {"type": "OSError", "message": str(exc)}}
        print(json.dumps(error), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
