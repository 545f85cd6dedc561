from typing import Optional


class RoadKGError(Exception):
    """Base class for every error raised by the library"""


class ConfigError(RoadKGError, ValueError):
    """Invalid configuration or command-line usage"""


class DataFormatError(RoadKGError, ValueError):
    """Malformed input file; carries the offending location when known"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None,
                 line: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        full = f"{', '.join(location)}: {message}" if location else message
        super().__init__(full)
        self.row = row
        self.column = column
        self.line = line


class OntologyError(RoadKGError, ValueError):
    """Ontology schema violation or triple outside the ontology"""


class UnknownIdError(RoadKGError, KeyError):
    """Entity or relation id missing from a store or embedding table"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown id"


class TrainingError(RoadKGError, RuntimeError):
    """Training could not proceed (empty store, numerical blow-up)"""


class CheckpointError(RoadKGError, ValueError):
    """Checkpoint file is corrupt or has an unsupported version"""


class BackendError(RoadKGError, RuntimeError):
    """Remote LLM or embedding backend failed after retries"""
