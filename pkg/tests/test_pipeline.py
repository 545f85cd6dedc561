import pytest

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.evaluation import SplitSpec
from app.schemas.graph import GraphVariant, Triple
from app.schemas.ontology import GraphMode
from app.schemas.records import ScenarioKind, ScenarioSpec
from app.schemas.run import RunConfig
from app.schemas.training import ScorerName, TrainConfig
from app.services.evaluation_service import EvaluationService
from app.services.graph_service import TripleStore
from app.services.pipeline_service import PipelineService
from app.services.synthetic_service import generate_synthetic

E2E_TRAIN = TrainConfig(
    scorer=ScorerName.TRANSE,
    k=32,
    learning_rate=0.01,
    batch_size=512,
    max_epochs=200,
    negatives=8,
    burn_in=20,
    frequency=10,
    patience=5,
    seed=17,
)


def run_config(mode=GraphMode.VEHICLE, **overrides):
    fields = {"mode": mode, "train": E2E_TRAIN, "split": SplitSpec(train_fraction=0.7, valid_triples=50, seed=17)}
    fields.update(overrides)
    return RunConfig(**fields)


class TestResources:

    def test_mode_must_match_ontology(self):
        cfg = run_config(mode=GraphMode.PEDESTRIAN, ontology_path=settings.VEHICLE_ONTOLOGY_PATH)
        with pytest.raises(ConfigError, match="run mode is pedestrian"):
            PipelineService.load_resources(cfg)

    def test_rules_extend_the_vocabulary(self):
        resources = PipelineService.load_resources(run_config(mode=GraphMode.PEDESTRIAN, variant=GraphVariant.PED_FEAT_RULES))
        assert len(resources.rules) == 51
        assert "R1-ante" in resources.vocabulary()
        assert resources.graph_ontology is not resources.ontology


class TestTrainingGraph:

    def test_unlabelled_frames_are_rejected(self, vehicle_frame):
        resources = PipelineService.load_resources(run_config())
        with pytest.raises(ConfigError, match="must be labelled"):
            PipelineService.training_graph([vehicle_frame.without_label()], resources)

    def test_reified_triples_are_reported(self, vehicle_frame):
        resources = PipelineService.load_resources(run_config())
        store, reified = PipelineService.training_graph([vehicle_frame], resources)
        assert Triple("vehicle", "INTENTION_IS", "LK") in reified
        assert reified <= store.as_set()
        plain, none = PipelineService.training_graph([vehicle_frame], resources, inject_reified=False)
        assert none == set()
        assert len(plain) == len(store) - len(reified)

    def test_validation_size_is_capped(self):
        store = TripleStore((f"e{i}", "r", f"e{i + 1}") for i in range(30))
        assert PipelineService.validation_size(store, 100) == 3
        assert PipelineService.validation_size(store, 2) == 2

    def test_triple_count_table(self, pedestrian_frame_044):
        resources = PipelineService.load_resources(run_config(mode=GraphMode.PEDESTRIAN, variant=GraphVariant.PED_FEAT_RULES))
        plain, rules = PipelineService.triple_count_table([pedestrian_frame_044], resources)
        assert (plain.variant, rules.variant) == (GraphVariant.PED_FEAT, GraphVariant.PED_FEAT_RULES)
        assert plain.triples < rules.triples


def synthetic_report(kind, counts, noise, cfg):
    records = generate_synthetic(ScenarioSpec(kind=kind, seed=23, counts=counts, noise=noise))
    key = (lambda r: r.track_id) if kind == ScenarioKind.VEHICLE else (lambda r: r.ped_id)
    train_recs, test_recs = EvaluationService.split_by_group(records, key, 0.7, 23)
    resources = PipelineService.load_resources(cfg)
    model = PipelineService.fit(PipelineService.discretize(train_recs, resources), resources, cfg)
    return PipelineService.evaluate_frames(model, PipelineService.discretize(test_recs, resources))


@pytest.mark.slow
class TestSyntheticEndToEnd:

    def test_noise_free_vehicles_are_separable(self):
        report = synthetic_report(ScenarioKind.VEHICLE, {"LLC": 300, "LK": 300, "RLC": 300}, 0.0, run_config())
        assert report.macro_f1 == pytest.approx(1.0)

    def test_noisy_vehicles(self):
        report = synthetic_report(ScenarioKind.VEHICLE, {"LLC": 300, "LK": 300, "RLC": 300}, 0.1, run_config())
        assert report.macro_f1 >= 0.90

    def test_noise_free_pedestrians(self):
        cfg = run_config(mode=GraphMode.PEDESTRIAN)
        report = synthetic_report(ScenarioKind.PEDESTRIAN, {"crossRoad": 300, "noCrossRoad": 300}, 0.0, cfg)
        assert report.macro_f1 == pytest.approx(1.0)

    def test_horizon_sweep_skips_missing_horizons(self):
        records = generate_synthetic(
            ScenarioSpec(kind=ScenarioKind.VEHICLE, seed=5, counts={"LLC": 40, "LK": 40, "RLC": 40}, horizons=[1.0, 2.0])
        )
        cfg = run_config(train=E2E_TRAIN.model_copy(update={"max_epochs": 30}))
        results = PipelineService.horizon_sweep(records, [1.0, 2.0, 6.0], cfg)
        assert [r.horizon for r in results] == [1.0, 2.0]
        assert all(r.train_records + r.test_records == 60 for r in results)
