"""
Core Orchestrator Module.
Central controller binding loaders, analyses and writers into the CLI pipelines.
"""

import logging
from pathlib import Path
from typing import Collection, List, Optional, Sequence

from services.confidence import TrainConfig, ablate, evaluate, train, tune_threshold
from services.corpus_io import (
    DatasetFormat,
    load_dataset,
    load_predictions,
    write_dataset,
    write_oracle_files,
    write_predictions,
)
from services.error_taxonomy import DEFAULT_OOD_PREFIX, ErrorType
from services.errors import FrameError, NotSchemaValid
from services.frame_core import is_schema_valid
from services.frame_generator import generate_dataset
from services.model_store import ModelStore
from services.oracle_builder import OracleKind, build_pair
from services.perturbation import ProbProfile, Variant, build_perturbed_corpus, scan_ontology
from services.reports import (
    Report,
    report_ce_eval,
    report_ce_results,
    report_em_tv_by_depth,
    report_error_distribution,
    report_stats,
    report_validity,
)
from services.utils import PathLike, write_lines

logger = logging.getLogger(__name__)

BANNER = "=" * 70


class Orchestrator:
    """
    Central orchestrator for the frameprobe pipelines.

    Every pipeline is a pure function of its input files, arguments and seed:
    it logs progress to stderr, writes its outputs, and returns True on
    success or False after logging an operational error.

    Usage Example:
        >>> orchestrator = Orchestrator()
        >>> orchestrator.validate("frames.txt")
        >>> orchestrator.perturb("dev.tsv", "pred.jsonl", [ErrorType.MODE], seed=7)
    """

    def __init__(self, echo=print):
        """
        Args:
            echo: Callable used for user-facing summaries on stdout
        """
        self.echo = echo
        logger.debug("Orchestrator initialized")

    def _emit(self, report: Report, out: Optional[PathLike]) -> None:
        """Print the markdown table, or write `<out>.json` and `<out>.md`."""
        if out is None:
            self.echo(report.to_markdown())
            return
        out = Path(out)
        json_path = out.parent / f"{out.name}.json"
        md_path = out.parent / f"{out.name}.md"
        write_lines(json_path, [report.to_json()])
        write_lines(md_path, [report.to_markdown()])
        logger.info(f"Wrote report to {json_path} and {md_path}")

    def validate(self, input_path: PathLike, fmt: Optional[DatasetFormat] = None,
                 out: Optional[PathLike] = None) -> bool:
        """
        Validity report for every frame of a file.

        Returns:
            True when every frame is schema-valid
        """
        logger.info(f"Validating frames in {input_path}")
        try:
            loaded = load_dataset(input_path, fmt)
            report = report_validity(loaded.records, loaded.failures)
        except FrameError as e:
            logger.error(f"Validation failed: {str(e)}")
            return False

        if out is not None:
            self._emit(report, out)
        valid, invalid = report.metadata["valid"], report.metadata["invalid"]
        self.echo(f"{valid} valid / {invalid} invalid")
        for row in report.rows:
            if not row["schema_valid"]:
                self.echo(f"  line {row['line']}: {row.get('error_reason') or 'unbalanced brackets'}")
        return invalid == 0

    def analyze(self, predictions_path: PathLike, bucket_by: str = "all", out: Optional[PathLike] = None,
                ood_prefix: str = DEFAULT_OOD_PREFIX,
                ood_labels: Optional[Collection[str]] = None) -> bool:
        """First-error distribution of a prediction file."""
        return self.report(predictions_path, "errors", bucket_by, out, ood_prefix, ood_labels)

    def report(self, predictions_path: PathLike, kind: str = "em-tv", bucket_by: str = "all",
               out: Optional[PathLike] = None, ood_prefix: str = DEFAULT_OOD_PREFIX,
               ood_labels: Optional[Collection[str]] = None) -> bool:
        """
        Build a report from a prediction file.

        Args:
            predictions_path: PredictionRecord JSONL
            kind: 'em-tv' (exact match and tree validity by depth) or 'errors'
            bucket_by: Bucket key for 'errors'
            out: Output prefix; markdown goes to stdout when omitted
        """
        logger.info(f"Building {kind} report from {predictions_path}")
        try:
            loaded = load_predictions(predictions_path)
            if kind == "em-tv":
                report = report_em_tv_by_depth(loaded.records, loaded.quarantined)
            elif kind == "errors":
                report = report_error_distribution(
                    loaded.records, bucket_by, loaded.quarantined, ood_labels, ood_prefix
                )
            else:
                raise ValueError(f"Unknown report kind '{kind}'. Expected em-tv or errors")
        except ValueError as e:
            logger.error(f"Report failed: {str(e)}")
            return False

        self._emit(report, out)
        logger.info(f"Report covers {len(loaded.records)} record(s), {loaded.quarantined} quarantined")
        return True

    def oracle(self, dataset_path: PathLike, out_dir: PathLike,
               kinds: Sequence[OracleKind] = (OracleKind.SPAN, OracleKind.STRUCT),
               fmt: Optional[DatasetFormat] = None) -> bool:
        """Write oracle pair files, one set per kind."""
        logger.info(BANNER)
        logger.info(f"Building oracle pairs from {dataset_path}")
        try:
            loaded = load_dataset(dataset_path, fmt)
        except FrameError as e:
            logger.error(f"Oracle build failed: {str(e)}")
            return False

        for kind in kinds:
            pairs = []
            skipped = 0
            for record in loaded.records:
                try:
                    pairs.append(build_pair(kind, record.utterance, record.frame))
                except NotSchemaValid as e:
                    skipped += 1
                    logger.warning(f"Line {record.line_number}: skipped for {kind.value} oracle: {e.reason}")
            write_oracle_files(out_dir, kind, pairs, skipped)
            self.echo(f"{kind.value}: {len(pairs)} pair(s), {skipped} skipped")
        logger.info(BANNER)
        return True

    def perturb(self, dataset_path: PathLike, out: PathLike, error_types: Sequence[ErrorType],
                seed: int, prob_profile: ProbProfile = ProbProfile(), correct_fraction: float = 0.0,
                variant: Optional[Variant] = None, ood_prefix: str = DEFAULT_OOD_PREFIX,
                fmt: Optional[DatasetFormat] = None) -> bool:
        """Write a synthetic PredictionRecord corpus with injected errors."""
        logger.info(BANNER)
        logger.info(f"Perturbing {dataset_path} (types: {', '.join(t.value for t in error_types)}, seed={seed})")
        try:
            loaded = load_dataset(dataset_path, fmt)
            valid = []
            for record in loaded.records:
                if not is_schema_valid(record.frame):
                    logger.warning(f"Line {record.line_number}: gold frame not schema-valid, skipped")
                    continue
                valid.append(record)
            ontology = scan_ontology([r.frame for r in valid], ood_prefix)
            records, skipped = build_perturbed_corpus(
                [r.as_sample() for r in valid], error_types, seed, ontology,
                prob_profile=prob_profile, correct_fraction=correct_fraction, variant=variant,
            )
        except FrameError as e:
            logger.error(f"Perturbation failed: {str(e)}")
            return False

        write_predictions(out, records)
        self.echo(f"Wrote {len(records)} record(s) to {out} ({skipped} not applicable)")
        logger.info(BANNER)
        return True

    def ce_train(self, predictions_path: PathLike, model_path: PathLike,
                 config: TrainConfig = TrainConfig(), mask: Optional[Collection[str]] = None,
                 tune_dev: Optional[PathLike] = None) -> bool:
        """Train the confidence classifier and save it."""
        logger.info(f"Training confidence classifier on {predictions_path}")
        try:
            loaded = load_predictions(predictions_path)
            model = train(loaded.records, config, mask)
            if tune_dev is not None:
                dev = load_predictions(tune_dev)
                model, dev_prf = tune_threshold(model, dev.records)
                self.echo(f"Tuned threshold {model.threshold:.4f} (dev F1 {100 * dev_prf.f1:.2f})")
            train_prf = evaluate(model, loaded.records)
        except ValueError as e:
            logger.error(f"Training failed: {str(e)}")
            return False

        ModelStore(model_path).save(model)
        self.echo(
            f"Trained on {len(loaded.records)} record(s): "
            f"P={100 * train_prf.precision:.2f} R={100 * train_prf.recall:.2f} F1={100 * train_prf.f1:.2f}"
        )
        return True

    def ce_eval(self, predictions_path: PathLike, model_path: PathLike, out: Optional[PathLike] = None) -> bool:
        """Evaluate a saved model on a prediction file."""
        logger.info(f"Evaluating {model_path} on {predictions_path}")
        try:
            model = ModelStore(model_path).load()
            loaded = load_predictions(predictions_path)
            prf = evaluate(model, loaded.records)
        except ValueError as e:
            logger.error(f"Evaluation failed: {str(e)}")
            return False

        self._emit(report_ce_eval(prf, loaded.quarantined, fingerprint=model.fingerprint), out)
        if out is not None:
            self.echo(f"P={100 * prf.precision:.2f} R={100 * prf.recall:.2f} F1={100 * prf.f1:.2f}")
        return True

    def ce_ablate(self, train_path: PathLike, test_path: PathLike, config: TrainConfig = TrainConfig(),
                  out: Optional[PathLike] = None) -> bool:
        """Ablation table: full model and one row per omitted feature."""
        logger.info(BANNER)
        logger.info(f"Feature ablation: train {train_path}, test {test_path}")
        try:
            train_set = load_predictions(train_path)
            test_set = load_predictions(test_path)
            rows = ablate(train_set.records, test_set.records, config)
        except ValueError as e:
            logger.error(f"Ablation failed: {str(e)}")
            return False

        self._emit(report_ce_results(rows, train_set.quarantined + test_set.quarantined,
                                     config=config.to_dict()), out)
        logger.info(BANNER)
        return True

    def synth(self, out: PathLike, n: int, seed: int, max_depth: int = 4, ood_rate: float = 0.05,
              depths: Optional[List[int]] = None) -> bool:
        """Write a synthetic gold dataset."""
        try:
            records = generate_dataset(n, seed, max_depth=max_depth, ood_rate=ood_rate, depths=depths)
        except ValueError as e:
            logger.error(f"Synthesis failed: {str(e)}")
            return False
        write_dataset(out, records)
        self.echo(f"Wrote {len(records)} record(s) to {out}")
        return True

    def stats(self, dataset_path: PathLike, out: Optional[PathLike] = None,
              fmt: Optional[DatasetFormat] = None) -> bool:
        """Dataset profile by language, domain, depth and label."""
        try:
            loaded = load_dataset(dataset_path, fmt)
        except FrameError as e:
            logger.error(f"Stats failed: {str(e)}")
            return False
        self._emit(report_stats(loaded.records, loaded.quarantined), out)
        return True
