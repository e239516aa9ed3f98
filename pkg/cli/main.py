#!/usr/bin/env python3
"""
Crisp edge detection toolkit: synthetic data, training, prediction and the
boundary benchmark.

Every stage reads the same JSON run config (sections synth, net, train,
loss, eval; see config/desk.json). Flags override config keys and
`--set section.key=value` overrides anything else.

Usage:
    python3 -m cli.main gen --config config/desk.json --out data/train
    python3 -m cli.main train --config config/desk.json --data data/train --out runs/cats \\
        --loss tracing --fusion cofusion
    python3 -m cli.main predict --model runs/cats/model.model --data data/test --out runs/cats/pred
    python3 -m cli.main eval --pred runs/cats/pred --labels data/test --protocol crisp
    python3 -m cli.main gradcheck --seed 0 --size 8
    python3 -m cli.main ablate --config config/desk.json --data data/train \\
        --test-data data/test --out runs/ablation

Outputs:
    gen       images/NNNN.pgm, labels/NNNN.pgm, manifest.json
    train     model.model, loss.csv, run_config.json (+ checkpoint_NNNN.model)
    predict   final/NAME.pgm, side{s}/NAME.pgm, weight{s}/NAME.pgm (cofusion)
    eval      pr.csv (pr_K.csv per run when --pred repeats), summary.json
    ablate    ablation.csv, row{R}/model.model, row{R}/loss.csv

Exit codes:
    0 - Success
    1 - Failure (including a failed gradient check)
    2 - Usage or configuration error
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from autodiff import Grid
from cli.run_config import RunConfig, build_run_config, with_overrides
from evaluation import EvalResult, evaluate, summarize_trials, write_pr_csv
from losses import EdgeLabel, derive_label
from model import EdgeNetConfig, ModelState, init_params, load_state, predict, save_state
from synth import generate, load_dataset, read_pgm, write_dataset, write_pgm
from synth.dataset import IMAGES_DIR, LABELS_DIR, list_maps
from training import TrainingSample, read_loss_csv, run_gradcheck_suite, train, write_loss_csv
from utils.config import ConfigError, apply_overrides, atomic_write_text, load_config, write_json
from utils.params import render_defaults

logger = logging.getLogger(__name__)
train_logger = logging.getLogger("train_debug")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

MODEL_FILE = "model.model"
LOSS_FILE = "loss.csv"
RUN_CONFIG_FILE = "run_config.json"
FINAL_DIR = "final"

# (bdry, tex, cofusion) per ablation row; row 1 is the CE + fixed-fusion baseline
ABLATION_ROWS = (
    (False, False, False),
    (True, False, False),
    (False, True, False),
    (False, False, True),
    (True, True, False),
    (True, False, True),
    (False, True, True),
    (True, True, True),
)
ABLATION_COLUMNS = ("row", "bdry", "tex", "cofusion", "seval_ods", "seval_ois", "ceval_ods", "ceval_ois")


def setup_logging(verbose: bool = False, train_debug: bool = False) -> None:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)

    if train_debug and not train_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter(
                "%(asctime)s.%(msecs)03d [TRAIN] %(message)s",
                datefmt="%H:%M:%S",
            )
        )
        train_logger.addHandler(handler)
        train_logger.setLevel(logging.DEBUG)
        train_logger.propagate = False
        train_logger.debug("Train debug mode active")


# =============================================================================
# Shared helpers
# =============================================================================


def load_raw_config(args: argparse.Namespace) -> dict:
    """The --config document with --set overrides applied."""
    raw: dict = {}
    if getattr(args, "config", None):
        try:
            raw = load_config(args.config)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from None
    return apply_overrides(raw, getattr(args, "set", None) or [])


def resolve_dir(path: str | Path, sub: str) -> Path:
    """`path/sub` when it exists (dataset or prediction root), else `path`."""
    path = Path(path)
    return path / sub if (path / sub).is_dir() else path


def load_labels(labels_dir: str | Path, delta: float, k_bdry: int) -> dict[str, EdgeLabel]:
    directory = resolve_dir(labels_dir, LABELS_DIR)
    paths = list_maps(directory)
    if not paths:
        raise ValueError(f"No label maps in {directory}")
    return {p.stem: derive_label(read_pgm(p), delta, k_bdry) for p in paths}


def load_predictions(pred_dir: str | Path, names: list[str]) -> list[Grid]:
    directory = resolve_dir(pred_dir, FINAL_DIR)
    preds = []
    for name in names:
        path = directory / f"{name}.pgm"
        if not path.exists():
            raise FileNotFoundError(f"Prediction missing for {name}: {path}")
        preds.append(read_pgm(path))
    return preds


def load_training_samples(data_dir: str | Path, run: RunConfig) -> list[TrainingSample]:
    return [
        TrainingSample(
            image=item.image,
            label=derive_label(item.consensus, run.delta, run.k_bdry),
            name=item.name,
        )
        for item in load_dataset(data_dir)
    ]


def resume_state(path: str | Path, run: RunConfig) -> tuple[ModelState, EdgeNetConfig]:
    """Load a checkpoint; its architecture wins over the config's."""
    state = load_state(path)
    if state.arch != run.net.architecture():
        logger.warning(f"Checkpoint architecture {state.arch} differs from config; using checkpoint")
    net = EdgeNetConfig.from_architecture(
        state.arch,
        init_sigma=run.net.init_sigma,
        level_groups=run.net.level_groups,
        final_loss=run.net.final_loss,
    )
    return state, net


def print_result(label: str, result: EvalResult) -> None:
    ods, ois = result.ods, result.ois
    print(
        f"{label}: ODS F={ods.f:.4f} (P={ods.precision:.4f} R={ods.recall:.4f} t={ods.threshold:.2f})  "
        f"OIS F={ois.f:.4f} (P={ois.precision:.4f} R={ois.recall:.4f})"
    )


# =============================================================================
# Subcommands
# =============================================================================


def cmd_gen(args: argparse.Namespace) -> int:
    run = build_run_config(load_raw_config(args))
    samples = generate(run.synth)
    write_dataset(samples, run.synth, args.out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    raw = with_overrides(
        load_raw_config(args),
        {
            "net.fusion_mode": args.fusion,
            "loss.mode": args.loss,
            "loss.bdry": args.bdry,
            "loss.tex": args.tex,
            "train.epochs": args.epochs,
            "train.seed": args.seed,
        },
    )
    run = build_run_config(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = load_training_samples(args.data, run)

    history = []
    if args.resume:
        state, net = resume_state(args.resume, run)
        previous = out / LOSS_FILE
        if previous.exists():
            history = [r for r in read_loss_csv(previous) if r.epoch <= state.epoch]
    else:
        state, net = init_params(run.net, run.train.seed), run.net

    write_json(out / RUN_CONFIG_FILE, run.sections)
    result = train(samples, net, run.train, state=state, checkpoint_dir=out)
    save_state(result.state, out / MODEL_FILE)
    write_loss_csv(out / LOSS_FILE, history + result.history)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    state = load_state(args.model)
    net = state.config
    out = Path(args.out)
    items = load_dataset(args.data, with_labels=False)
    for item in items:
        maps = predict(item.image, state, net)
        write_pgm(maps.final, out / FINAL_DIR / f"{item.name}.pgm")
        for s, side in enumerate(maps.sides, start=1):
            write_pgm(side, out / f"side{s}" / f"{item.name}.pgm")
        for s, weight in enumerate(maps.weights, start=1):
            write_pgm(weight, out / f"weight{s}" / f"{item.name}.pgm")
    logger.info(f"Wrote predictions for {len(items)} images to {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    raw = with_overrides(
        load_raw_config(args),
        {"eval.protocol": args.protocol, "eval.tolerance": args.tolerance, "loss.delta": args.delta},
    )
    run = build_run_config(raw)
    labels = load_labels(args.labels, run.delta, run.k_bdry)
    names = sorted(labels)
    gt = [labels[n] for n in names]

    results = []
    for k, pred_dir in enumerate(args.pred, start=1):
        result = evaluate(load_predictions(pred_dir, names), gt, run.eval, jobs=args.jobs)
        results.append(result)
        print_result(str(pred_dir), result)
        if args.out:
            name = "pr.csv" if len(args.pred) == 1 else f"pr_{k}.csv"
            write_pr_csv(Path(args.out) / name, result)

    summary = {
        "protocol": run.eval.protocol,
        "tolerance": run.eval.tolerance,
        "runs": [
            {"pred": str(p), "ods": r.ods.f, "ods_threshold": r.ods.threshold, "ois": r.ois.f}
            for p, r in zip(args.pred, results)
        ],
    }
    if len(results) > 1:
        trials = summarize_trials(results)
        print(
            f"{trials.trials} runs: ODS {trials.ods_mean:.4f} +- {trials.ods_std:.4f}  "
            f"OIS {trials.ois_mean:.4f} +- {trials.ois_std:.4f}"
        )
        summary["mean"] = {"ods": trials.ods_mean, "ods_std": trials.ods_std,
                           "ois": trials.ois_mean, "ois_std": trials.ois_std}
    if args.out:
        write_json(Path(args.out) / "summary.json", summary)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradcheck_suite(seed=args.seed, size=args.size)
    print(f"{'component':<18} {'max rel error':>14} {'checked':>8} {'skipped':>8}  status")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<18} {r.max_rel_error:>14.3e} {r.checked:>8} {r.skipped:>8}  {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Gradient check failed: {', '.join(failed)}")
        return EXIT_FAILURE
    return EXIT_OK


def parse_rows(text: str | None) -> list[int]:
    if not text:
        return list(range(1, len(ABLATION_ROWS) + 1))
    try:
        rows = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise ConfigError(f"--rows must be comma-separated integers, got '{text}'") from None
    bad = [r for r in rows if not 1 <= r <= len(ABLATION_ROWS)]
    if bad or not rows:
        raise ConfigError(f"--rows must name rows 1..{len(ABLATION_ROWS)}, got '{text}'")
    return rows


def format_ablation_csv(rows: list[list]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ABLATION_COLUMNS)
    writer.writerows(rows)
    return out.getvalue()


def cmd_ablate(args: argparse.Namespace) -> int:
    raw = with_overrides(load_raw_config(args), {"train.epochs": args.epochs, "train.seed": args.seed})
    rows = parse_rows(args.rows)
    base = build_run_config(raw)
    samples = load_training_samples(args.data, base)
    test_items = load_dataset(args.test_data)
    test_labels = [derive_label(item.consensus, base.delta, base.k_bdry) for item in test_items]
    out = Path(args.out)

    table = []
    for row in rows:
        bdry, tex, cofusion = ABLATION_ROWS[row - 1]
        run = build_run_config(
            with_overrides(
                raw,
                {
                    "loss.mode": "tracing",
                    "loss.bdry": bdry,
                    "loss.tex": tex,
                    "net.fusion_mode": "cofusion" if cofusion else "fixed",
                },
            )
        )
        logger.info(f"Ablation row {row}: bdry={bdry} tex={tex} cofusion={cofusion}")
        result = train(samples, run.net, run.train)
        save_state(result.state, out / f"row{row}" / MODEL_FILE)
        write_loss_csv(out / f"row{row}" / LOSS_FILE, result.history)

        preds = [predict(item.image, result.state, run.net).final for item in test_items]
        seval = evaluate(preds, test_labels, replace(run.eval, protocol="standard"), jobs=args.jobs)
        ceval = evaluate(preds, test_labels, replace(run.eval, protocol="crisp"), jobs=args.jobs)
        table.append(
            [row, int(bdry), int(tex), int(cofusion),
             f"{seval.ods.f:.6f}", f"{seval.ois.f:.6f}", f"{ceval.ods.f:.6f}", f"{ceval.ois.f:.6f}"]
        )
        print(f"row {row}: SEval ODS={seval.ods.f:.4f} OIS={seval.ois.f:.4f}  "
              f"CEval ODS={ceval.ods.f:.4f} OIS={ceval.ois.f:.4f}")

    atomic_write_text(out / "ablation.csv", format_ablation_csv(table))
    logger.info(f"Wrote {out / 'ablation.csv'}")
    return EXIT_OK


# =============================================================================
# Argument parsing
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    common.add_argument(
        "-j", "--jobs", type=int, default=1, help="Worker processes for evaluation (default: 1)"
    )
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override a config key (repeatable)",
    )

    parser = argparse.ArgumentParser(
        prog="cli.main",
        description="Crisp edge detection toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, sections: list[str] | None) -> argparse.ArgumentParser:
        return sub.add_parser(
            name,
            parents=[common],
            help=help_text,
            description=help_text,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=render_defaults(sections) if sections else None,
        )

    p = add("gen", "Generate a synthetic shape dataset", ["synth"])
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--out", required=True, help="Dataset directory to create")
    p.set_defaults(func=cmd_gen)

    p = add("train", "Train an edge network", ["net", "train", "loss"])
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--data", required=True, help="Training dataset directory")
    p.add_argument("--out", required=True, help="Run directory for the model and loss trace")
    p.add_argument("--fusion", choices=["fixed", "cofusion"], help="Override net.fusion_mode")
    p.add_argument("--loss", choices=["ce", "tracing"], help="Override loss.mode")
    p.add_argument("--bdry", action=argparse.BooleanOptionalAction, default=None,
                   help="Include the boundary tracing term")
    p.add_argument("--tex", action=argparse.BooleanOptionalAction, default=None,
                   help="Include the texture suppression term")
    p.add_argument("--epochs", type=int, help="Override train.epochs")
    p.add_argument("--seed", type=int, help="Override train.seed")
    p.add_argument("--resume", metavar="MODEL", help="Continue from a saved model or checkpoint")
    p.add_argument("--train-debug", action="store_true", help="Log per-batch loss components")
    p.set_defaults(func=cmd_train)

    p = add("predict", "Write prediction, side and weight maps", None)
    p.add_argument("--model", required=True, help="Model file written by train")
    p.add_argument("--data", required=True, help="Dataset directory (labels not needed)")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_predict)

    p = add("eval", "Score predictions (ODS/OIS, PR curve)", ["eval"])
    p.add_argument("--config", help="JSON run config (eval, plus loss.delta/k_bdry for the ground truth)")
    p.add_argument("--pred", required=True, action="append", help="Prediction directory (repeatable)")
    p.add_argument("--labels", required=True, help="Dataset or label-map directory")
    p.add_argument("--protocol", choices=["standard", "crisp"], help="Override eval.protocol")
    p.add_argument("--tolerance", type=float, help="Override eval.tolerance")
    p.add_argument(
        "--delta",
        type=float,
        help="Override loss.delta; consensus at or below it is not ground truth (default 0 without --config)",
    )
    p.add_argument("--out", help="Directory for pr.csv and summary.json")
    p.set_defaults(func=cmd_eval)

    p = add("gradcheck", "Finite-difference check of every gradient", None)
    p.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    p.add_argument("--size", type=int, default=8, help="Input side length (default: 8)")
    p.set_defaults(func=cmd_gradcheck)

    p = add("ablate", "Train and score the loss/fusion ablation rows", ["loss"])
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--data", required=True, help="Training dataset directory")
    p.add_argument("--test-data", required=True, help="Test dataset directory")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--rows", help="Comma-separated rows 1-8 (default: all)")
    p.add_argument("--epochs", type=int, help="Override train.epochs")
    p.add_argument("--seed", type=int, help="Override train.seed")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, getattr(args, "train_debug", False))
    if args.jobs < 1:
        logger.error(f"--jobs must be >= 1, got {args.jobs}")
        return EXIT_CONFIG

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError, FloatingPointError, RuntimeError) as e:
        logger.error(str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
