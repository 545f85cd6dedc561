import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError, DataFormatError
from app.schemas.records import PedestrianFrameRecord, VehicleFrameRecord

logger = logging.getLogger(__name__)

VEHICLE_COLUMNS = ["trackId", "frame", "latVelocity", "latAcceleration", "ttcP", "ttcLP", "ttcRP", "ttcLF", "ttcRF", "label"]
PEDESTRIAN_COLUMNS = ["pedId", "frame", "activity", "distEgo", "distCurb", "orientationDeg", "gaze", "crossLabel"]

# CSV suffix -> record field; optional gap{suffix}/closing{suffix} columns replace ttc{suffix}
TTC_FIELDS = {
    "P": "ttc_preceding",
    "LP": "ttc_left_preceding",
    "RP": "ttc_right_preceding",
    "LF": "ttc_left_following",
    "RF": "ttc_right_following",
}

TRUE_VALUES = {"1", "true", "True", "TRUE"}
FALSE_VALUES = {"0", "false", "False", "FALSE"}


def time_to_collision(gap: float, closing_speed: float) -> Optional[float]:
    """Longitudinal gap (m) over closing speed (m/s); None when the vehicles are not closing in"""
    if closing_speed <= 0:
        return None
    if gap <= 0:
        raise ValueError("gap must be positive")
    return gap / closing_speed


def _read_table(path: Union[str, Path], required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"cannot parse {path}: {e}")
    df.columns = [c.strip() for c in df.columns]
    for column in required:
        if column not in df.columns:
            raise DataFormatError(f"missing column: {column}")
    return df


def _cell(row: pd.Series, column: str) -> str:
    return str(row[column]).strip()


def _float(row: pd.Series, index: int, column: str, allow_empty: bool = False) -> Optional[float]:
    raw = _cell(row, column)
    if raw == "":
        if allow_empty:
            return None
        raise DataFormatError("empty cell", row=index, column=column, line=index + 2)
    try:
        return float(raw)
    except ValueError:
        raise DataFormatError(f"non-numeric cell {raw!r}", row=index, column=column, line=index + 2)


def _int(row: pd.Series, index: int, column: str) -> int:
    value = _float(row, index, column)
    if not value.is_integer():
        raise DataFormatError(f"non-integer cell {_cell(row, column)!r}", row=index, column=column, line=index + 2)
    return int(value)


def _bool(row: pd.Series, index: int, column: str, allow_empty: bool = False) -> Optional[bool]:
    raw = _cell(row, column)
    if raw == "" and allow_empty:
        return None
    if raw in TRUE_VALUES:
        return True
    if raw in FALSE_VALUES:
        return False
    raise DataFormatError(f"non-binary cell {raw!r}", row=index, column=column, line=index + 2)


def _ttc(row: pd.Series, index: int, suffix: str, columns: Sequence[str]) -> Optional[float]:
    gap_column, closing_column = f"gap{suffix}", f"closing{suffix}"
    if gap_column in columns and closing_column in columns:
        gap = _float(row, index, gap_column, allow_empty=True)
        closing = _float(row, index, closing_column, allow_empty=True)
        if gap is None or closing is None:
            return None
        try:
            return time_to_collision(gap, closing)
        except ValueError as e:
            raise DataFormatError(str(e), row=index, column=gap_column, line=index + 2)
    value = _float(row, index, f"ttc{suffix}", allow_empty=True)
    if value is not None and not math.isfinite(value):
        return None
    return value


def _vehicle_record(row: pd.Series, index: int, columns: Sequence[str], label: Optional[str], horizon: Optional[float]) -> VehicleFrameRecord:
    ttc = {field: _ttc(row, index, suffix, columns) for suffix, field in TTC_FIELDS.items()}
    try:
        return VehicleFrameRecord(
            track_id=_cell(row, "trackId"),
            frame=_int(row, index, "frame"),
            lat_velocity=_float(row, index, "latVelocity"),
            lat_acceleration=_float(row, index, "latAcceleration"),
            label=label,
            horizon=horizon,
            **ttc,
        )
    except ValidationError as e:
        raise DataFormatError(f"invalid vehicle record: {e.errors()[0]['msg']}", row=index, line=index + 2)


def read_vehicle_tracks(
    path: Union[str, Path],
    horizons: Optional[Sequence[float]] = None,
    frame_rate: int = settings.HIGHD_FRAME_RATE,
) -> List[VehicleFrameRecord]:
    """
    Read a HighD-shaped track table.

    Each track carries one maneuver label; its lane-marking crossing is its last
    frame. For every horizon h the row h * frame_rate frames before the crossing
    is sampled. Tables that already hold sampled points carry a `horizon` column
    and are filtered by it instead.
    """
    df = _read_table(path, VEHICLE_COLUMNS)
    columns = list(df.columns)

    if "horizon" in columns:
        records = []
        wanted = None if horizons is None else {float(h) for h in horizons}
        for index, row in df.iterrows():
            horizon = _float(row, index, "horizon", allow_empty=True)
            if wanted is not None and horizon not in wanted:
                continue
            records.append(_vehicle_record(row, index, columns, _cell(row, "label") or None, horizon))
        logger.info(f"Read {len(records)} sampled vehicle records from {path}")
        return records

    rows_by_track: Dict[str, List[int]] = defaultdict(list)
    for index, row in df.iterrows():
        rows_by_track[_cell(row, "trackId")].append(index)

    records: List[VehicleFrameRecord] = []
    for track_id, indexes in rows_by_track.items():
        labels = {_cell(df.loc[i], "label") for i in indexes} - {""}
        if len(labels) > 1:
            raise DataFormatError(f"track {track_id} has conflicting labels: {sorted(labels)}", row=indexes[0])
        label = labels.pop() if labels else None

        frames = sorted((_int(df.loc[i], i, "frame"), i) for i in indexes)
        if horizons is None:
            records.extend(_vehicle_record(df.loc[i], i, columns, label, None) for _, i in frames)
            continue

        first_frame, last_frame = frames[0][0], frames[-1][0]
        for horizon in horizons:
            target = last_frame - int(round(horizon * frame_rate))
            if target < first_frame:
                logger.warning(f"⚠️ Track {track_id}: horizon {horizon}s is beyond the track length, skipped")
                continue
            # latest row at or before the target frame
            index = [i for frame, i in frames if frame <= target][-1]
            records.append(_vehicle_record(df.loc[index], index, columns, label, float(horizon)))

    logger.info(f"Read {len(records)} vehicle records from {len(rows_by_track)} tracks in {path}")
    return records


def read_pedestrian_features(path: Union[str, Path]) -> List[PedestrianFrameRecord]:
    """Read a JAAD/PSI-shaped per-frame feature table, one record per row"""
    df = _read_table(path, PEDESTRIAN_COLUMNS)
    records: List[PedestrianFrameRecord] = []
    for index, row in df.iterrows():
        values = dict(
            ped_id=_cell(row, "pedId"),
            frame=_int(row, index, "frame"),
            activity=_cell(row, "activity"),
            dist_ego=_float(row, index, "distEgo"),
            dist_curb=_float(row, index, "distCurb"),
            orientation_deg=_float(row, index, "orientationDeg"),
            gaze=_bool(row, index, "gaze"),
            cross_label=_bool(row, index, "crossLabel", allow_empty=True),
        )
        try:
            records.append(PedestrianFrameRecord(**values))
        except ValidationError as e:
            error = e.errors()[0]
            column = {
                "orientation_deg": "orientationDeg",
                "dist_ego": "distEgo",
                "dist_curb": "distCurb",
                "ped_id": "pedId",
            }.get(str(error["loc"][0]) if error.get("loc") else "", None)
            raise DataFormatError(error["msg"], row=index, column=column, line=index + 2)
    logger.info(f"Read {len(records)} pedestrian records from {path}")
    return records


def sample_pedestrian_frames(records: Sequence[PedestrianFrameRecord], stride: int = settings.PEDESTRIAN_FRAME_STRIDE) -> List[PedestrianFrameRecord]:
    """Keep every `stride`-th frame of each pedestrian, counted from its first frame"""
    if stride < 1:
        raise ConfigError("frame stride must be >= 1")
    first_frame: Dict[str, int] = {}
    for rec in records:
        first_frame[rec.ped_id] = min(rec.frame, first_frame.get(rec.ped_id, rec.frame))
    return [rec for rec in records if (rec.frame - first_frame[rec.ped_id]) % stride == 0]


def write_vehicle_records(records: Sequence[VehicleFrameRecord], path: Union[str, Path]) -> None:
    """Write sampled vehicle records, horizon column included"""
    rows = [
        {
            "trackId": r.track_id,
            "frame": r.frame,
            "latVelocity": repr(r.lat_velocity),
            "latAcceleration": repr(r.lat_acceleration),
            **{f"ttc{suffix}": ("" if getattr(r, field) is None else repr(getattr(r, field))) for suffix, field in TTC_FIELDS.items()},
            "label": r.label or "",
            "horizon": "" if r.horizon is None else repr(r.horizon),
        }
        for r in records
    ]
    _write(pd.DataFrame(rows, columns=VEHICLE_COLUMNS + ["horizon"]), path)


def write_pedestrian_records(records: Sequence[PedestrianFrameRecord], path: Union[str, Path]) -> None:
    rows = [
        {
            "pedId": r.ped_id,
            "frame": r.frame,
            "activity": r.activity,
            "distEgo": repr(r.dist_ego),
            "distCurb": repr(r.dist_curb),
            "orientationDeg": repr(r.orientation_deg),
            "gaze": int(r.gaze),
            "crossLabel": "" if r.cross_label is None else int(r.cross_label),
        }
        for r in records
    ]
    _write(pd.DataFrame(rows, columns=PEDESTRIAN_COLUMNS), path)


def _write(df: pd.DataFrame, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"✅ Wrote {len(df)} rows to {path}")
