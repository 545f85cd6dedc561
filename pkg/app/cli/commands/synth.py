import argparse
import logging
from pathlib import Path
from typing import Dict

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.records import PEDESTRIAN_LABELS, VEHICLE_LABELS, ScenarioKind, ScenarioSpec
from app.services import ingest_service
from app.services.synthetic_service import generate_synthetic

logger = logging.getLogger(__name__)

HELP = "write a synthetic table with planted feature-to-label rules"


def parse_counts(text: str) -> Dict[str, int]:
    """LABEL=N pairs separated by commas, e.g. LLC=300,LK=300,RLC=300"""
    counts = {}
    for part in text.split(","):
        label, sep, value = part.partition("=")
        if not sep or not value.strip().isdigit():
            raise argparse.ArgumentTypeError(f"invalid count {part!r}, expected LABEL=N")
        counts[label.strip()] = int(value)
    return counts


def register(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", choices=[k.value for k in ScenarioKind], default=ScenarioKind.VEHICLE.value, help="scenario kind")
    parser.add_argument("--counts", type=parse_counts, help="records per label, e.g. LLC=300,LK=300,RLC=300 (default 300 each)")
    parser.add_argument("--noise", type=float, default=0.0, help="probability that a planted feature is replaced at random")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="generator seed")
    parser.add_argument("--horizons", type=float, nargs="+", help="prediction horizons of the vehicle records")
    parser.add_argument("--frames-per-pedestrian", type=int, help="frames generated per pedestrian")
    parser.add_argument("--output", type=Path, required=True, help="CSV file to write")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    kind = ScenarioKind(args.kind)
    labels = VEHICLE_LABELS if kind == ScenarioKind.VEHICLE else PEDESTRIAN_LABELS
    fields = {
        "kind": kind,
        "seed": args.seed,
        "counts": args.counts or {label: 300 for label in labels},
        "noise": args.noise,
    }
    if args.horizons:
        fields["horizons"] = args.horizons
    if args.frames_per_pedestrian:
        fields["frames_per_pedestrian"] = args.frames_per_pedestrian
    try:
        spec = ScenarioSpec(**fields)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario: {e}")

    records = generate_synthetic(spec)
    if kind == ScenarioKind.VEHICLE:
        ingest_service.write_vehicle_records(records, args.output)
    else:
        ingest_service.write_pedestrian_records(records, args.output)
    logger.info(f"✅ {len(records)} synthetic records written to {args.output}")
    print(args.output)
    return 0
