import argparse
import logging

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
from app.clients.llm_client import generate
from app.core.errors import ConfigError
from app.services.explanation_service import ExplanationService
from app.services.pipeline_service import PipelineService
from app.services.retrieval_service import RetrievalService

logger = logging.getLogger(__name__)

HELP = "build the explanation corpus from labelled data and/or answer a question against it"


def register(parser: argparse.ArgumentParser) -> None:
    add_run_arguments(parser)
    add_rag_arguments(parser)
    parser.add_argument("--query", help="question answered from the corpus")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    if cfg.data_path is None and args.query is None:
        raise ConfigError("explain needs --data to build a corpus or --query to answer")

    out = run_directory(cfg)
    corpus_path = cfg.corpus_path
    if cfg.data_path is not None:
        resources = PipelineService.load_resources(cfg)
        frames = PipelineService.discretize(PipelineService.read_records(cfg), resources)
        corpus_path = out / "corpus.txt"
        ExplanationService.write_corpus(ExplanationService.build_corpus(frames, resources.ontology), corpus_path)
        print(corpus_path)

    if args.query is not None:
        embedder = make_embedder(args.embedder)
        store = load_vector_store(corpus_path, embedder, args.chunk_size)
        bundle = RetrievalService.build_prompt(store, embedder, args.query, system_prompt(), args.top_k)
        answer = generate(bundle, make_backend(args.backend))
        write_text(out / "answer.txt", answer)
        print(answer)
    return 0
