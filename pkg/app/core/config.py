from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings

PACKAGE_DIR = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    # App
    PROJECT_NAME: str = "RoadKG"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Locations
    DATA_DIR: Path = PACKAGE_DIR / "data"
    RUNS_DIR: Path = Path("runs")

    # Shipped knowledge files
    VEHICLE_ONTOLOGY_PATH: Path = PACKAGE_DIR / "data" / "ontologies" / "vehicle.json"
    PEDESTRIAN_ONTOLOGY_PATH: Path = PACKAGE_DIR / "data" / "ontologies" / "pedestrian.json"
    VEHICLE_THRESHOLDS_PATH: Path = PACKAGE_DIR / "data" / "thresholds" / "vehicle.json"
    PEDESTRIAN_THRESHOLDS_PATH: Path = PACKAGE_DIR / "data" / "thresholds" / "pedestrian.json"
    PEDESTRIAN_RULES_PATH: Path = PACKAGE_DIR / "data" / "rules" / "jaad_rules.txt"
    PHRASES_PATH: Path = PACKAGE_DIR / "data" / "phrases.json"
    SYSTEM_PROMPT_PATH: Path = PACKAGE_DIR / "data" / "system_prompt.txt"

    # Dataset conventions
    HIGHD_FRAME_RATE: int = 25  # Hz
    PEDESTRIAN_FRAME_STRIDE: int = 2
    DEFAULT_SEED: int = 42

    # Knowledge graph embedding
    KGE_SCORER: str = "TransE"
    KGE_K: int = 100
    KGE_LEARNING_RATE: float = 0.0005
    KGE_BATCH_SIZE: int = 10000
    KGE_NEGATIVES: int = 5
    KGE_MAX_EPOCHS: int = 200
    KGE_PATIENCE: int = 5
    KGE_BURN_IN: int = 5
    KGE_FREQUENCY: int = 5
    KGE_VALID_BATCH_SIZE: int = 100
    KGE_MARGIN: float = 5.0
    KGE_TEMPERATURE: float = 1.0

    # Splits
    SPLIT_TRAIN_FRACTION: float = 0.8
    SPLIT_VALID_TRIPLES: int = 2000

    # RAG
    RAG_CHUNK_SIZE: int = 384  # whitespace tokens
    RAG_TOP_K: int = 4
    RAG_MAX_IN_FLIGHT: int = 4
    RAG_EMBEDDING_DIM: int = 256

    # LLM backend
    LLM_ENDPOINT: str = "https://api.openai.com/v1/chat/completions"
    LLM_MODEL: str = "gpt-4"
    LLM_API_KEY_ENV: str = "ROADKG_LLM_API_KEY"  # name of the env var holding the bearer token
    LLM_TIMEOUT_SECONDS: float = 30.0
    LLM_MAX_ATTEMPTS: int = 3
    LLM_BACKOFF_SECONDS: float = 0.5

    # Remote embedding backend (optional)
    EMBEDDING_ENDPOINT: Optional[str] = None
    EMBEDDING_MODEL: str = "all-MiniLM-L6-v2"

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


settings = Settings()
