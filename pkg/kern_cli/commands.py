import argparse
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from loguru import logger

from kern_core import get_version
from kern_core.ablation_manager import AblationManager
from kern_core.app_paths import (BEST_CHECKPOINT_FILE_NAME, KNOWLEDGE_BASE_FILE_NAME, LAST_CHECKPOINT_FILE_NAME,
                                 MANIFEST_FILE_NAME, PROCESS_FILE_NAME, REPORT_FILE_NAME, REPORT_TABLE_FILE_NAME,
                                 SCHEMA_FILE_NAME, STATS_SUMMARY_FILE_NAME, TRAINING_LOG_FILE_NAME,
                                 VALIDATION_REPORTS_FILE_NAME, get_output_file_path, get_predictions_file_name,
                                 get_split_file_name)
from kern_core.configuration.config import Config
from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.domain.eval_report import EvalReport
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.run_manifest import RunManifest
from kern_core.domain.task import Task
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.kern_model import KernModel, feature_dim_of
from kern_core.knowledge_stats import build_knowledge_base, format_summary, summarize_knowledge
from kern_core.metrics import evaluate, evaluate_task, mean_over_tasks
from kern_core.prediction_manager import PredictionManager, freq_predictions
from kern_core.storage.annotation_storage import AnnotationStorage, SchemaStorage
from kern_core.storage.checkpoint_storage import CheckpointStorage
from kern_core.storage.knowledge_base_storage import KnowledgeBaseStorage
from kern_core.storage.prediction_storage import PredictionStorage
from kern_core.storage.process_storage import ProcessStorage
from kern_core.storage.report_storage import ReportStorage, save_text
from kern_core.synth_gen import analytic_freq_mr, build_process, generate, split_dataset
from kern_core.trainer import Trainer
from kern_core.utils.file_utils import atomic_write

ABLATION_REPORT_FILE_NAME = "ablation.json"
ABLATION_TABLE_FILE_NAME = "ablation.txt"
FREQ_PREDICTIONS_FILE_NAME = "predictions-freq.jsonl"


class CommandRun:
    """Collects the inputs and outputs of one command for its run manifest."""

    def __init__(self, command: str, args: argparse.Namespace, config: Config):
        self.args = args
        self.config = config
        self.out_dir = Path(args.out_dir)
        self.manifest = RunManifest(command, config.to_dict(), config.runtime.seed, get_version())

    def input(self, role: str, path) -> Path:
        if path is None:
            raise ValidationException(f"Missing required input --{role.replace('_', '-')}")

        path = Path(path)
        if not path.is_file():
            raise ValidationException(f"Input file '{path}' ({role}) does not exist")

        self.manifest.inputs[role] = str(path)
        return path

    def output(self, role: str, file_name: str) -> Path:
        path = get_output_file_path(self.out_dir, file_name)
        self.manifest.outputs[role] = str(path)
        return path

    def finish(self) -> RunManifest:
        self.manifest.finish()
        self.output("manifest", MANIFEST_FILE_NAME)
        return self.manifest


def _load_schema(run: CommandRun) -> DatasetSchema:
    return SchemaStorage(run.input("schema", run.args.schema)).load()


def _load_kb(run: CommandRun, schema: DatasetSchema) -> KnowledgeBase:
    kb = KnowledgeBaseStorage(run.input("kb", run.args.kb)).load()
    if kb.schema != schema:
        raise ValidationException(
            f"Knowledge base (C={kb.num_categories}, K={kb.num_predicates}) does not match the dataset schema "
            f"(C={schema.num_categories}, K={schema.num_predicates})")

    return kb


def _load_images(run: CommandRun, role: str, schema: DatasetSchema) -> List[AnnotatedImage]:
    return AnnotationStorage(run.input(role, getattr(run.args, role))).load(schema)


def _write_reports(run: CommandRun, reports: Sequence[EvalReport], schema: DatasetSchema,
                   extra: Optional[dict] = None, lines: Sequence[str] = ()):
    averages = mean_over_tasks(reports)
    document = dict(extra or {})
    document["mean_over_tasks"] = {("constraint" if constraint else "no_constraint"): values
                                   for constraint, values in averages.items()}

    ReportStorage(run.output("report", REPORT_FILE_NAME)).save(reports, document)

    tables = [r.format_table(schema.predicate_names, per_predicate=run.args.per_predicate) for r in reports]
    for constraint, values in averages.items():
        mode = "constraint" if constraint else "no constraint"
        tables.append(f"mean over tasks @50/@100 ({mode}): R {100 * values['recall']:.2f}, "
                      f"mR {100 * values['mean_recall']:.2f}")
    tables.extend(lines)

    text = "\n\n".join(tables)
    save_text(run.output("report_table", REPORT_TABLE_FILE_NAME), text)
    logger.info("\n" + text)


def cmd_stats(run: CommandRun):
    schema = _load_schema(run)
    images = _load_images(run, "annotations", schema)

    kb = build_knowledge_base(images, schema)
    kb_path = Path(run.args.kb) if run.args.kb else run.output("kb", KNOWLEDGE_BASE_FILE_NAME)
    run.manifest.outputs["kb"] = str(kb_path)
    KnowledgeBaseStorage(kb_path).save(kb)

    summary = summarize_knowledge(kb, images, top_n=run.args.top_n)
    with atomic_write(run.output("summary", STATS_SUMMARY_FILE_NAME)) as f:
        json.dump(summary, f, indent=2)

    logger.info("\n" + "\n".join(format_summary(summary)))


def cmd_synth(run: CommandRun):
    synth_config = run.config.synth

    process = build_process(synth_config)
    images = generate(process, synth_config)
    splits = dict(zip(("train", "val", "test"), split_dataset(images, synth_config.split_fractions)))

    SchemaStorage(run.output("schema", SCHEMA_FILE_NAME)).save(process.schema())
    ProcessStorage(run.output("process", PROCESS_FILE_NAME)).save(process)
    for split, split_images in splits.items():
        AnnotationStorage(run.output(split, get_split_file_name(split))).save(split_images)

    logger.info("Synthetic dataset: " + ", ".join(f"{name} {len(part)}" for name, part in splits.items()))


def cmd_train(run: CommandRun):
    schema = _load_schema(run)
    kb = _load_kb(run, schema)
    train_images = _load_images(run, "train", schema)
    val_images = _load_images(run, "val", schema)

    for role, file_name in (("best_checkpoint", BEST_CHECKPOINT_FILE_NAME),
                            ("last_checkpoint", LAST_CHECKPOINT_FILE_NAME),
                            ("training_log", TRAINING_LOG_FILE_NAME),
                            ("validation_reports", VALIDATION_REPORTS_FILE_NAME)):
        run.output(role, file_name)

    trainer = Trainer.create(kb, feature_dim_of(train_images), run.config, run.config.runtime.seed, run.out_dir)
    trainer.model.check_compatible(kb, val_images)
    result = trainer.train(train_images, val_images)

    logger.info(f"Best validation mR@{run.config.train.validation_k} {100 * result.best_metric:.2f} "
                f"at epoch {result.best_epoch}")


def cmd_eval(run: CommandRun):
    schema = _load_schema(run)
    images = _load_images(run, "annotations", schema)
    eval_config = run.config.eval
    threads = run.config.runtime.threads

    if run.args.predictions:
        task = Task.parse(run.args.task)
        predictions = {task: PredictionStorage(run.input("predictions", run.args.predictions)).load()}
    else:
        kb = _load_kb(run, schema)
        params = CheckpointStorage(run.input("checkpoint", run.args.checkpoint)).load()
        model = KernModel(params, schema, run.config.model)
        model.check_compatible(kb, images)

        tasks = [Task.parse(t) for t in eval_config.tasks]
        predictions = PredictionManager(model, kb, threads).predict_tasks(images, tasks)
        for task, task_predictions in predictions.items():
            PredictionStorage(run.output(f"predictions_{task.value}",
                                         get_predictions_file_name(task.value))).save(task_predictions)

    reports = evaluate(images, predictions, eval_config.ks, eval_config.match_mode, eval_config.iou_threshold,
                       eval_config.mean_recall_pooling, schema.num_predicates, threads,
                       num_categories=schema.num_categories)
    _write_reports(run, reports, schema)


def cmd_freq(run: CommandRun):
    schema = _load_schema(run)
    kb = _load_kb(run, schema)
    images = _load_images(run, "annotations", schema)
    eval_config = run.config.eval
    oracle_k = run.args.oracle_k

    predictions = freq_predictions(images, kb, eval_config.exclude_norel)
    PredictionStorage(run.output("predictions", FREQ_PREDICTIONS_FILE_NAME)).save(predictions)

    ks = sorted(set(eval_config.ks) | ({oracle_k} if run.args.process else set()))
    reports = evaluate_task(images, predictions, Task.PredCls, ks, eval_config.match_mode,
                            eval_config.iou_threshold, eval_config.mean_recall_pooling, schema.num_predicates,
                            run.config.runtime.threads, schema.num_categories)

    extra: Dict[str, dict] = {}
    lines: List[str] = []
    if run.args.process:
        process = ProcessStorage(run.input("process", run.args.process)).load()
        synth_config = run.config.synth
        oracle = analytic_freq_mr(process, process.config, oracle_k, samples=synth_config.oracle_samples,
                                  batches=synth_config.oracle_batches, pooling=eval_config.mean_recall_pooling)
        measured = reports[0].mean_recall[oracle_k]
        distance = abs(measured - oracle.mean_recall) / oracle.standard_error if oracle.standard_error > 0 else 0.0

        extra["freq_oracle"] = {"k": oracle_k, "expected_mean_recall": oracle.mean_recall,
                                "standard_error": oracle.standard_error, "samples": oracle.samples,
                                "measured_mean_recall": measured, "standard_errors_apart": distance}
        lines.append(f"FREQ oracle mR@{oracle_k}: {100 * oracle.mean_recall:.2f} +- "
                     f"{100 * oracle.standard_error:.2f}, measured {100 * measured:.2f} "
                     f"({distance:.2f} standard errors apart)")

    _write_reports(run, reports, schema, extra, lines)


def cmd_ablate(run: CommandRun):
    schema = _load_schema(run)
    kb = _load_kb(run, schema)
    train_images = _load_images(run, "train", schema)
    val_images = _load_images(run, "val", schema)
    test_images = _load_images(run, "test", schema)

    seeds = run.args.seeds or [run.config.runtime.seed]
    result = AblationManager(kb, run.config).run(seeds, train_images, val_images, test_images)

    with atomic_write(run.output("ablation", ABLATION_REPORT_FILE_NAME)) as f:
        json.dump(result.to_dict(), f, indent=2)

    table = result.format_table(schema.predicate_names)
    save_text(run.output("ablation_table", ABLATION_TABLE_FILE_NAME), table)
    logger.info("\n" + table)


COMMANDS = {
    "stats": cmd_stats,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "freq": cmd_freq,
    "ablate": cmd_ablate,
}
