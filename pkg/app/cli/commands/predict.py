import argparse
import json
import logging
from pathlib import Path

from app.cli.common import (
    add_rag_arguments,
    add_run_arguments,
    load_run_config,
    load_vector_store,
    make_backend,
    make_embedder,
    run_directory,
    system_prompt,
    write_text,
)
from app.clients.llm_client import generate_many
from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.prediction import Calibration
from app.services.checkpoint_service import load_checkpoint
from app.services.explanation_service import ExplanationService
from app.services.pipeline_service import PipelineService, TrainedModel
from app.services.retrieval_service import RetrievalService

logger = logging.getLogger(__name__)

HELP = "predict the behavior of every frame of an input table and explain it"


def register(parser: argparse.ArgumentParser) -> None:
    add_run_arguments(parser)
    parser.add_argument("--checkpoint", type=Path, help="trained checkpoint (required)")
    parser.add_argument("--calibration", type=Path, help="calibration JSON written by train")
    parser.add_argument("--rag", action="store_true", help="also explain each prediction through retrieval and the LLM backend")
    add_rag_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    if cfg.checkpoint_path is None:
        raise ConfigError("predict needs --checkpoint")
    if args.rag and cfg.corpus_path is None:
        raise ConfigError("--rag needs --corpus")

    resources = PipelineService.load_resources(cfg)
    table, _ = load_checkpoint(cfg.checkpoint_path)
    calibration = Calibration()
    if cfg.calibration_path is not None:
        calibration = Calibration(**json.loads(cfg.calibration_path.read_text(encoding="utf-8")))
    model = TrainedModel(resources, table, calibration)

    frames = PipelineService.discretize(PipelineService.read_records(cfg), resources)
    predictions = PipelineService.predict_frames(model, frames)
    explanations = [ExplanationService.render_template(p, f) for p, f in zip(predictions, frames)]

    out = run_directory(cfg)
    records = []
    for prediction, explanation in zip(predictions, explanations):
        record = prediction.model_dump(mode="json")
        record["explanation"] = explanation
        records.append(json.dumps(record, sort_keys=True))
    write_text(out / "predictions.jsonl", "\n".join(records))

    if args.rag:
        embedder = make_embedder(args.embedder)
        store = load_vector_store(cfg.corpus_path, embedder, args.chunk_size)
        prompt = system_prompt()
        bundles = [
            RetrievalService.build_prompt(store, embedder, ExplanationService.build_query(f, p), prompt, args.top_k)
            for p, f in zip(predictions, frames)
        ]
        answers = generate_many(bundles, make_backend(args.backend), settings.RAG_MAX_IN_FLIGHT)
        rag_records = [
            json.dumps({"frame_id": p.frame_id, "chunks": b.chunk_ids, "explanation": a}, sort_keys=True)
            for p, b, a in zip(predictions, bundles, answers)
        ]
        write_text(out / "rag_explanations.jsonl", "\n".join(rag_records))

    for explanation in explanations:
        print(explanation)
    logger.info(f"✅ {len(predictions)} predictions written to {out}")
    return 0
