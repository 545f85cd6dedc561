import argparse
import logging
from pathlib import Path

from app.cli.common import add_run_arguments, add_train_arguments, load_run_config, run_directory, write_json
from app.services.checkpoint_service import save_checkpoint
from app.services.pipeline_service import PipelineService

logger = logging.getLogger(__name__)

HELP = "train knowledge graph embeddings on a labelled input table"


def register(parser: argparse.ArgumentParser) -> None:
    add_run_arguments(parser)
    add_train_arguments(parser)
    parser.add_argument("--checkpoint", type=Path, help="checkpoint path (default: model.rkge in the run directory)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    resources = PipelineService.load_resources(cfg)
    frames = PipelineService.discretize(PipelineService.read_records(cfg), resources)
    model = PipelineService.fit(frames, resources, cfg)

    out = run_directory(cfg)
    checkpoint = cfg.checkpoint_path or out / "model.rkge"
    save_checkpoint(model.table, checkpoint, cfg.train)
    write_json(out / "calibration.json", model.calibration.model_dump())
    write_json(
        out / "history.json",
        {
            "losses": model.trainer.losses,
            "validations": [r.model_dump() for r in model.trainer.history],
            "stopped_epoch": model.trainer.stopped_epoch,
        },
    )

    logger.info(f"✅ Checkpoint written to {checkpoint}")
    print(checkpoint)
    return 0
