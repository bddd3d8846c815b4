import argparse
from typing import List, Optional

from kern_core import get_version
from kern_core.configuration.config import Config

LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")
DEFAULT_OUT_DIR = "kern-out"


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--schema", help="schema JSON file with categories and predicates")
    common.add_argument("--kb", help="knowledge base file")
    common.add_argument("--seed", type=int, help="random seed (overrides runtime.seed and synth.seed)")
    common.add_argument("--threads", type=int, help="worker threads for prediction and evaluation")
    common.add_argument("--out-dir", default=DEFAULT_OUT_DIR, help="directory for every output file")
    common.add_argument("--config", help="JSON config file; flags take precedence over it")
    common.add_argument("--log-level", default="INFO", type=str.upper, choices=LOG_LEVELS)
    common.add_argument("--debug", action="store_true", default=None,
                        help="check every tensor for non-finite values")

    return common


def _add_eval_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--ks", type=int, nargs="+", help="K values for R@K and mR@K")
    parser.add_argument("--pooling", choices=("image", "dataset"), help="mean recall pooling")
    parser.add_argument("--per-predicate", action="store_true", help="print per-predicate recall tables")


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()

    parser = argparse.ArgumentParser(prog="kern-sgg", description="Scene graph generation with "
                                                                  "knowledge-gated graph routing")
    parser.add_argument("--version", action="version", version=f"%(prog)s {get_version()}")
    commands = parser.add_subparsers(dest="command", required=True)

    stats = commands.add_parser("stats", parents=[common], help="count the knowledge base from annotations")
    stats.add_argument("--annotations", required=True, help="training annotation file (JSON lines)")
    stats.add_argument("--top-n", type=int, default=10, help="co-occurring pairs listed in the summary")

    synth = commands.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    synth.add_argument("--num-images", type=int)
    synth.add_argument("--num-categories", type=int)
    synth.add_argument("--num-predicates", type=int)
    synth.add_argument("--feature-dim", type=int)
    synth.add_argument("--feature-noise", type=float)
    synth.add_argument("--prior-temperature", type=float)

    train = commands.add_parser("train", parents=[common], help="train both routers")
    train.add_argument("--train", required=True, help="training annotation file")
    train.add_argument("--val", required=True, help="validation annotation file")
    train.add_argument("--epochs", type=int)
    train.add_argument("--learning-rate", type=float)
    train.add_argument("--batch-size", type=int)

    evaluate = commands.add_parser("eval", parents=[common], help="evaluate a checkpoint or a predictions file")
    evaluate.add_argument("--annotations", required=True, help="annotation file with the ground truth")
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="model checkpoint to run over the annotations")
    source.add_argument("--predictions", help="existing predictions file (JSON lines)")
    evaluate.add_argument("--task", choices=("predcls", "sgcls"), default="predcls",
                          help="task the --predictions file was produced for")
    evaluate.add_argument("--tasks", nargs="+", choices=("predcls", "sgcls"), help="tasks to run a checkpoint for")
    evaluate.add_argument("--match-mode", choices=("index", "iou"))
    _add_eval_arguments(evaluate)

    freq = commands.add_parser("freq", parents=[common], help="evaluate the FREQ baseline")
    freq.add_argument("--annotations", required=True, help="annotation file with the ground truth")
    freq.add_argument("--exclude-norel", action="store_true", default=None,
                      help="drop no-relationship from the prior before ranking")
    freq.add_argument("--process", help="synthetic process file for the Monte Carlo FREQ oracle")
    freq.add_argument("--oracle-k", type=int, default=50)
    _add_eval_arguments(freq)

    ablate = commands.add_parser("ablate", parents=[common], help="compare the full model with knowledge ablations")
    ablate.add_argument("--train", required=True)
    ablate.add_argument("--val", required=True)
    ablate.add_argument("--test", required=True)
    ablate.add_argument("--seeds", type=int, nargs="+", help="seeds to repeat the comparison with")
    ablate.add_argument("--epochs", type=int)
    ablate.add_argument("--learning-rate", type=float)

    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Checkpoint predictions reuse the annotated regions and carry no boxes of their own
    if getattr(args, "match_mode", None) == "iou" and getattr(args, "checkpoint", None):
        parser.error("--match-mode iou needs --predictions with boxes, not --checkpoint")

    return args


def apply_overrides(config: Config, args: argparse.Namespace):
    """Command-line flags win over the config file; unset flags leave it untouched."""
    def _flag(name: str):
        return getattr(args, name, None)

    config.runtime.update({"seed": _flag("seed"), "threads": _flag("threads"), "debug": _flag("debug")})
    config.train.update({"epochs": _flag("epochs"), "learning_rate": _flag("learning_rate"),
                         "batch_size": _flag("batch_size")})
    config.eval.update({"ks": _flag("ks"), "tasks": _flag("tasks"), "match_mode": _flag("match_mode"),
                        "mean_recall_pooling": _flag("pooling"), "exclude_norel": _flag("exclude_norel")})
    config.synth.update({"seed": _flag("seed"), "num_images": _flag("num_images"),
                         "num_categories": _flag("num_categories"), "num_predicates": _flag("num_predicates"),
                         "feature_dim": _flag("feature_dim"), "feature_noise": _flag("feature_noise"),
                         "prior_temperature": _flag("prior_temperature")})
