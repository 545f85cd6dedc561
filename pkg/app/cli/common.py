import argparse
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from app.clients.embedding_client import RemoteEmbedder
from app.clients.llm_client import HttpChatBackend, StubBackend
from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.graph import GraphVariant
from app.schemas.ontology import GraphMode
from app.schemas.run import RunConfig
from app.schemas.training import ScorerName
from app.services.retrieval_service import HashingEmbedder, VectorStore, chunk_corpus

logger = logging.getLogger(__name__)

# flag dest -> RunConfig field
RUN_FIELDS = {
    "mode": "mode",
    "variant": "variant",
    "seed": "seed",
    "data": "data_path",
    "ontology": "ontology_path",
    "thresholds": "thresholds_path",
    "rules": "rules_path",
    "checkpoint": "checkpoint_path",
    "calibration": "calibration_path",
    "corpus": "corpus_path",
    "output_dir": "output_dir",
    "horizons": "horizons",
    "frame_stride": "frame_stride",
    "inject_reified": "inject_reified",
    "calibrate": "calibrate",
}

# flag dest -> TrainConfig field
TRAIN_FIELDS = {
    "scorer": "scorer",
    "k": "k",
    "epochs": "max_epochs",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "negatives": "negatives",
    "patience": "patience",
    "burn_in": "burn_in",
    "frequency": "frequency",
    "valid_batch_size": "valid_batch_size",
    "margin": "margin",
    "temperature": "temperature",
    "progress": "progress",
}

# flag dest -> SplitSpec field
SPLIT_FIELDS = {
    "valid_triples": "valid_triples",
    "train_fraction": "train_fraction",
}


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run")
    group.add_argument("--config", type=Path, help="JSON run-config file; flags override its values")
    group.add_argument("--mode", choices=[m.value for m in GraphMode], help="vehicle or pedestrian use case")
    group.add_argument("--variant", choices=[v.value for v in GraphVariant], help="knowledge graph variant")
    group.add_argument("--seed", type=int, help="seed for every random choice of the run")
    group.add_argument("--data", type=Path, help="input CSV (HighD-shaped tracks or pedestrian features)")
    group.add_argument("--ontology", type=Path, help="ontology JSON file")
    group.add_argument("--thresholds", type=Path, help="discretization threshold JSON file")
    group.add_argument("--rules", type=Path, help="fuzzy rule file (PedFeatRulesKG)")
    group.add_argument("--output-dir", type=Path, help=f"parent of the run directory (default {settings.RUNS_DIR})")
    group.add_argument("--horizons", type=float, nargs="+", help="prediction horizons in seconds")
    group.add_argument("--frame-stride", type=int, help="keep every n-th pedestrian frame")
    group.add_argument(
        "--no-reified", dest="inject_reified", action="store_const", const=False,
        help="do not inject class-level reified triples",
    )


def add_train_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--scorer", choices=[s.value for s in ScorerName], help="embedding scoring function")
    group.add_argument("--k", type=int, help="embedding size")
    group.add_argument("--epochs", type=int, help="maximum number of epochs")
    group.add_argument("--lr", type=float, help="Adam learning rate")
    group.add_argument("--batch-size", type=int, help="positive triples per batch")
    group.add_argument("--negatives", type=int, help="corruptions per positive triple")
    group.add_argument("--patience", type=int, help="validations without improvement before stopping")
    group.add_argument("--burn-in", type=int, help="epochs before the first validation")
    group.add_argument("--frequency", type=int, help="epochs between validations")
    group.add_argument("--valid-batch-size", type=int, help="validation triples ranked per batch")
    group.add_argument("--margin", type=float, help="self-adversarial loss margin")
    group.add_argument("--temperature", type=float, help="self-adversarial sampling temperature")
    group.add_argument("--valid-triples", type=int, help="size of the validation split")
    group.add_argument("--train-fraction", type=float, help="share of tracks or pedestrians used for training")
    group.add_argument("--calibrate", action="store_const", const=True, help="fit Platt scaling after training")
    group.add_argument("--progress", action="store_const", const=True, help="show a progress bar per epoch")


def add_rag_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("retrieval")
    group.add_argument("--corpus", type=Path, help="explanation corpus text file")
    group.add_argument("--top-k", type=int, default=settings.RAG_TOP_K, help="chunks retrieved per query")
    group.add_argument("--chunk-size", type=int, default=settings.RAG_CHUNK_SIZE, help="whitespace tokens per chunk")
    group.add_argument(
        "--backend", choices=["stub", "http"], default="stub",
        help=f"completion backend; http reads its token from ${settings.LLM_API_KEY_ENV}",
    )
    group.add_argument(
        "--embedder", choices=["hashing", "remote"], default="hashing",
        help="query/chunk embedder; remote uses EMBEDDING_ENDPOINT",
    )


def _read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"cannot parse config file {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _override(target: Dict[str, Any], args: argparse.Namespace, fields: Dict[str, str]) -> None:
    for dest, field in fields.items():
        value = getattr(args, dest, None)
        if value is not None:
            target[field] = value


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Settings defaults, then the --config file, then the flags"""
    merged = _read_config_file(getattr(args, "config", None))
    _override(merged, args, RUN_FIELDS)
    train = dict(merged.get("train") or {})
    _override(train, args, TRAIN_FIELDS)
    merged["train"] = train
    split = dict(merged.get("split") or {})
    _override(split, args, SPLIT_FIELDS)
    merged["split"] = split
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {e}")


def run_directory(cfg: RunConfig) -> Path:
    """Fresh artifact directory named by timestamp and seed"""
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    path = Path(cfg.output_dir) / f"{stamp}-seed{cfg.effective_seed}"
    path.mkdir(parents=True, exist_ok=True)
    write_json(path / "run.json", cfg.model_dump(mode="json"))
    logger.info(f"Run directory: {path}")
    return path


def write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def make_embedder(name: str):
    if name == "remote":
        return RemoteEmbedder(dim=settings.RAG_EMBEDDING_DIM)
    return HashingEmbedder(settings.RAG_EMBEDDING_DIM)


def make_backend(name: str):
    return HttpChatBackend() if name == "http" else StubBackend()


def load_vector_store(corpus_path: Optional[Path], embedder, chunk_size: int) -> VectorStore:
    if corpus_path is None:
        raise ConfigError("retrieval needs --corpus")
    doc = Path(corpus_path).read_text(encoding="utf-8")
    chunks = chunk_corpus(doc, chunk_size, source=Path(corpus_path).name)
    return VectorStore.build(chunks, embedder)


def system_prompt() -> str:
    return settings.SYSTEM_PROMPT_PATH.read_text(encoding="utf-8").strip()
