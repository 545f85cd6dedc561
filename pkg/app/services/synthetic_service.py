"""
Labelled synthetic scenarios with planted generative rules.

Vehicle (probability 1 - noise per planted feature, else drawn from the full range):
    LLC  lateral velocity in (0.25, 0.85) m/s, growing as the horizon shrinks;
         lateral acceleration in (0.12, 0.4); left-following TTC low risk (> 6 s or absent)
    LK   lateral velocity in (-0.15, 0.15); lateral acceleration in (-0.08, 0.08)
    RLC  mirror image of LLC; right-following TTC low risk
Pedestrian:
    crossRoad    curb distance < 1 m; orientation within 30 deg of 90 or 270; walking or running
    noCrossRoad  curb distance > 3.5 m; orientation within 30 deg of 0 or 180; standing

With noise 0 and the shipped thresholds both use cases are separable by a
naive Bayes classifier over the discretized features.
"""
import logging
from typing import List, Optional, Union

import numpy as np

from app.core.config import settings
from app.schemas.records import (
    PEDESTRIAN_LABELS,
    VEHICLE_LABELS,
    PedestrianFrameRecord,
    ScenarioKind,
    ScenarioSpec,
    VehicleFrameRecord,
)

logger = logging.getLogger(__name__)

ACTIVITIES = ("standing", "walking", "waving", "running", "na")


class SyntheticService:

    @staticmethod
    def _noisy(rng: np.random.Generator, noise: float) -> bool:
        return noise > 0 and rng.random() < noise

    @staticmethod
    def _random_ttc(rng: np.random.Generator) -> Optional[float]:
        if rng.random() < 0.25:
            return None
        return float(rng.uniform(0.5, 15.0))

    @staticmethod
    def _low_risk_ttc(rng: np.random.Generator) -> Optional[float]:
        if rng.random() < 0.25:
            return None
        return float(rng.uniform(6.5, 15.0))

    @staticmethod
    def _vehicle_record(rng: np.random.Generator, label: str, index: int, horizon: float, noise: float) -> VehicleFrameRecord:
        ramp = 1.0 / horizon
        sign = {"LLC": 1.0, "LK": 0.0, "RLC": -1.0}[label]

        if sign:
            lat_velocity = sign * (0.25 + rng.uniform(0.0, 0.6) * ramp)
            lat_acceleration = sign * rng.uniform(0.12, 0.4)
        else:
            lat_velocity = rng.uniform(-0.15, 0.15)
            lat_acceleration = rng.uniform(-0.08, 0.08)
        if SyntheticService._noisy(rng, noise):
            lat_velocity = rng.uniform(-0.85, 0.85)
        if SyntheticService._noisy(rng, noise):
            lat_acceleration = rng.uniform(-0.4, 0.4)

        ttc = {
            "ttc_preceding": SyntheticService._random_ttc(rng),
            "ttc_left_preceding": SyntheticService._random_ttc(rng),
            "ttc_right_preceding": SyntheticService._random_ttc(rng),
            "ttc_left_following": SyntheticService._random_ttc(rng),
            "ttc_right_following": SyntheticService._random_ttc(rng),
        }
        planted = {"LLC": "ttc_left_following", "RLC": "ttc_right_following"}.get(label)
        if planted and not SyntheticService._noisy(rng, noise):
            ttc[planted] = SyntheticService._low_risk_ttc(rng)

        frame_rate = settings.HIGHD_FRAME_RATE
        return VehicleFrameRecord(
            track_id=f"{label}_{index:05d}",
            frame=int(round((5.0 - min(horizon, 5.0)) * frame_rate)),
            lat_velocity=float(lat_velocity),
            lat_acceleration=float(lat_acceleration),
            label=label,
            horizon=float(horizon),
            **ttc,
        )

    @staticmethod
    def _pedestrian_record(rng: np.random.Generator, label: str, ped_id: str, frame: int, noise: float) -> PedestrianFrameRecord:
        crossing = label == "crossRoad"

        dist_curb = rng.uniform(0.0, 0.9) if crossing else rng.uniform(3.5, 8.0)
        if SyntheticService._noisy(rng, noise):
            dist_curb = rng.uniform(0.0, 8.0)

        center = rng.choice([90.0, 270.0]) if crossing else rng.choice([0.0, 180.0])
        orientation = (center + rng.uniform(-30.0, 30.0)) % 360.0
        if SyntheticService._noisy(rng, noise):
            orientation = rng.uniform(0.0, 360.0)

        activity = str(rng.choice(["walking", "running"])) if crossing else "standing"
        if SyntheticService._noisy(rng, noise):
            activity = str(rng.choice(ACTIVITIES))

        return PedestrianFrameRecord(
            ped_id=ped_id,
            frame=frame,
            activity=activity,
            dist_ego=float(rng.uniform(1.0, 60.0)),
            dist_curb=float(dist_curb),
            orientation_deg=float(orientation),
            gaze=bool(rng.random() < 0.5),
            cross_label=crossing,
        )

    @staticmethod
    def generate_synthetic(spec: ScenarioSpec) -> Union[List[VehicleFrameRecord], List[PedestrianFrameRecord]]:
        """Deterministic under spec.seed; label counts match spec.counts exactly"""
        rng = np.random.default_rng(spec.seed)

        if spec.kind == ScenarioKind.VEHICLE:
            records = []
            for label in VEHICLE_LABELS:
                for i in range(spec.counts.get(label, 0)):
                    horizon = spec.horizons[i % len(spec.horizons)]
                    records.append(SyntheticService._vehicle_record(rng, label, i, horizon, spec.noise))
            logger.info(f"Generated {len(records)} synthetic vehicle records (seed {spec.seed}, noise {spec.noise})")
            return records

        stride = settings.PEDESTRIAN_FRAME_STRIDE
        records = []
        for label in PEDESTRIAN_LABELS:
            for i in range(spec.counts.get(label, 0)):
                ped_index, position = divmod(i, spec.frames_per_pedestrian)
                ped_id = f"{label}_{ped_index:04d}"
                records.append(SyntheticService._pedestrian_record(rng, label, ped_id, position * stride, spec.noise))
        logger.info(f"Generated {len(records)} synthetic pedestrian records (seed {spec.seed}, noise {spec.noise})")
        return records


generate_synthetic = SyntheticService.generate_synthetic
