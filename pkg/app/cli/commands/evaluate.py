import argparse
import logging

from app.cli.common import add_run_arguments, add_train_arguments, load_run_config, run_directory, write_json, write_text
from app.schemas.ontology import GraphMode
from app.services.evaluation_service import EvaluationService
from app.services.pipeline_service import PipelineService

logger = logging.getLogger(__name__)

HELP = "train and test on held-out tracks or pedestrians and write the report tables"


def register(parser: argparse.ArgumentParser) -> None:
    add_run_arguments(parser)
    add_train_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    resources = PipelineService.load_resources(cfg)
    records = PipelineService.read_records(cfg)
    out = run_directory(cfg)

    if cfg.mode == GraphMode.VEHICLE:
        results = PipelineService.horizon_sweep(records, cfg.horizons, cfg, resources)
        table = EvaluationService.format_horizon_table(results)
        write_json(out / "horizon_report.json", [r.model_dump(mode="json") for r in results])
        write_text(out / "horizon_report.tsv", table)
    else:
        report = PipelineService.pedestrian_evaluation(records, cfg, resources)
        table = report.format_table(title=cfg.variant.value)
        write_json(out / "report.json", report.model_dump(mode="json"))
        write_text(out / "report.tsv", table)
        if cfg.uses_rules:
            frames = PipelineService.discretize(records, resources)
            stats = PipelineService.triple_count_table(frames, resources, cfg.inject_reified)
            write_json(out / "triple_counts.json", [s.model_dump(mode="json") for s in stats])

    print(table)
    logger.info(f"✅ Evaluation reports written to {out}")
    return 0
