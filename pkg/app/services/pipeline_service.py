import logging
from typing import Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from app.core.errors import ConfigError
from app.schemas.evaluation import ClassReport, HorizonResult
from app.schemas.frames import LinguisticFrame
from app.schemas.graph import GraphStats, GraphVariant, Triple
from app.schemas.ontology import ClassRole, GraphMode
from app.schemas.prediction import Calibration, Prediction
from app.schemas.records import PedestrianFrameRecord, VehicleFrameRecord
from app.schemas.rules import FuzzyRule
from app.schemas.run import RunConfig
from app.schemas.thresholds import ThresholdConfig
from app.schemas.training import CorruptSide
from app.services import ingest_service
from app.services.bayes_service import BayesService
from app.services.discretizer_service import DiscretizerService, load_thresholds
from app.services.embedding_service import EmbeddingTable
from app.services.evaluation_service import EvaluationService
from app.services.fuzzy_service import FuzzyService
from app.services.graph_service import GraphService, TripleStore
from app.services.ontology_service import Ontology, load_ontology
from app.services.training_service import EmbeddingTrainer, corrupt

logger = logging.getLogger(__name__)

Record = Union[VehicleFrameRecord, PedestrianFrameRecord]


class Resources:
    """Ontology, thresholds and fuzzy rules a run works with"""

    def __init__(
        self,
        ontology: Ontology,
        thresholds: ThresholdConfig,
        rules: Sequence[FuzzyRule] = (),
        rule_ontology: Optional[Ontology] = None,
    ):
        self.ontology = ontology
        self.thresholds = thresholds
        self.rules = list(rules)
        self.rule_ontology = rule_ontology

    @property
    def graph_ontology(self) -> Ontology:
        return self.rule_ontology or self.ontology

    def vocabulary(self) -> List[str]:
        """Every closed instance of the graph ontology; embedded even when no training triple uses it"""
        return self.graph_ontology.closed_instances(list(ClassRole))


class TrainedModel:
    def __init__(
        self,
        resources: Resources,
        table: EmbeddingTable,
        calibration: Optional[Calibration] = None,
        trainer: Optional[EmbeddingTrainer] = None,
        store: Optional[TripleStore] = None,
    ):
        self.resources = resources
        self.table = table
        self.calibration = calibration or Calibration()
        self.trainer = trainer
        self.store = store


class PipelineService:

    @staticmethod
    def load_resources(cfg: RunConfig) -> Resources:
        ontology = load_ontology(cfg.ontology_path)
        if ontology.mode != cfg.mode:
            raise ConfigError(f"ontology {ontology.name} is a {ontology.mode.value} ontology, run mode is {cfg.mode.value}")
        thresholds = load_thresholds(cfg.thresholds_path, ontology)
        if not cfg.uses_rules:
            return Resources(ontology, thresholds)
        rules = FuzzyService.parse_rules(cfg.rules_path, ontology)
        return Resources(ontology, thresholds, rules, FuzzyService.extend_ontology(ontology, rules))

    @staticmethod
    def read_records(cfg: RunConfig, path=None) -> List[Record]:
        path = path or cfg.data_path
        if path is None:
            raise ConfigError("no data file given")
        if cfg.mode == GraphMode.VEHICLE:
            return ingest_service.read_vehicle_tracks(path, cfg.horizons)
        records = ingest_service.read_pedestrian_features(path)
        return ingest_service.sample_pedestrian_frames(records, cfg.frame_stride)

    @staticmethod
    def discretize(records: Sequence[Record], resources: Resources) -> List[LinguisticFrame]:
        if resources.ontology.mode == GraphMode.VEHICLE:
            return [DiscretizerService.discretize_vehicle(r, resources.thresholds) for r in records]
        return [DiscretizerService.discretize_pedestrian(r, resources.thresholds) for r in records]

    @staticmethod
    def training_graph(
        frames: Sequence[LinguisticFrame],
        resources: Resources,
        inject_reified: bool = True,
    ) -> Tuple[TripleStore, Set[Triple]]:
        """
        Labelled frames as a frozen store, plus the class-level triples that were injected.

        Rule conversion triples and SATISFIES_RULE links are added when the run
        carries fuzzy rules.
        """
        unlabelled = [f.instance_id for f in frames if f.label is None]
        if unlabelled:
            raise ConfigError(f"training frames must be labelled, e.g. {unlabelled[0]}")

        ontology = resources.ontology
        store = GraphService.build_graph(frames, ontology)
        reified: Set[Triple] = set()
        if inject_reified:
            for frame in frames:
                reified.update(GraphService.reification_triples(frame, ontology))

        if resources.rules:
            store = FuzzyService.attach_rules(store, resources.rules, frames)
            if inject_reified:
                for frame in frames:
                    reified.update(FuzzyService.rule_reification_triples(frame, resources.rules, ontology))
            for triple in store:
                resources.graph_ontology.validate_triple(*triple)

        store.add_all(sorted(reified))
        return store.freeze(), reified

    @staticmethod
    def graph_stats(store: TripleStore, ontology: Ontology, variant: GraphVariant) -> GraphStats:
        return GraphStats(
            ontology=ontology.name,
            variant=variant,
            triples=len(store),
            entities=len(store.entities),
            relations=len(store.relations),
        )

    @staticmethod
    def triple_count_table(frames: Sequence[LinguisticFrame], resources: Resources, inject_reified: bool = True) -> List[GraphStats]:
        """Size of the pedestrian graph without and with the fuzzy rules"""
        if not resources.rules:
            raise ConfigError("triple counts need a rule file")
        plain = Resources(resources.ontology, resources.thresholds)
        plain_store, _ = PipelineService.training_graph(frames, plain, inject_reified)
        rule_store, _ = PipelineService.training_graph(frames, resources, inject_reified)
        return [
            PipelineService.graph_stats(plain_store, resources.ontology, GraphVariant.PED_FEAT),
            PipelineService.graph_stats(rule_store, resources.graph_ontology, GraphVariant.PED_FEAT_RULES),
        ]

    @staticmethod
    def validation_size(store: TripleStore, requested: int) -> int:
        n_valid = min(requested, max(1, len(store) // 10))
        if n_valid < requested:
            logger.info(f"Graph has {len(store)} triples; using {n_valid} validation triples instead of {requested}")
        return n_valid

    @staticmethod
    def calibrate(table: EmbeddingTable, store: TripleStore, valid: Sequence[Triple], seed: int) -> Calibration:
        """Platt scaling on validation triples against one corruption each"""
        rng = np.random.default_rng(seed)
        negatives = [corrupt(t, store, 1, rng, CorruptSide.BOTH)[0] for t in valid]
        scores = table.score_triples(list(valid) + negatives)
        targets = [1] * len(valid) + [0] * len(negatives)
        return BayesService.fit_platt(scores, targets)

    @staticmethod
    def fit(frames: Sequence[LinguisticFrame], resources: Resources, cfg: RunConfig) -> TrainedModel:
        store, reified = PipelineService.training_graph(frames, resources, cfg.inject_reified)
        n_valid = PipelineService.validation_size(store, cfg.split.valid_triples)
        train_store, valid = EvaluationService.split_no_unseen(store, n_valid, cfg.split.seed, exclude=reified)

        trainer = EmbeddingTrainer(train_store, cfg.train, valid, extra_entities=resources.vocabulary())
        table = trainer.train()
        calibration = Calibration()
        if cfg.calibrate:
            calibration = PipelineService.calibrate(table, train_store, valid, cfg.split.seed)
        return TrainedModel(resources, table, calibration, trainer, train_store)

    @staticmethod
    def predict_frames(model: TrainedModel, frames: Iterable[LinguisticFrame]) -> List[Prediction]:
        resources = model.resources
        return [
            BayesService.predict(
                frame.without_label(),
                resources.ontology,
                model.table,
                model.calibration,
                rules=resources.rules,
            )
            for frame in frames
        ]

    @staticmethod
    def evaluate_frames(model: TrainedModel, frames: Sequence[LinguisticFrame]) -> ClassReport:
        predictions = PipelineService.predict_frames(model, frames)
        return EvaluationService.classification_report(
            [f.label for f in frames],
            [p.chosen for p in predictions],
            model.resources.ontology.target_labels,
        )

    @staticmethod
    def horizon_sweep(
        records: Sequence[VehicleFrameRecord],
        horizons: Sequence[float],
        cfg: RunConfig,
        resources: Optional[Resources] = None,
    ) -> List[HorizonResult]:
        """Train and test one model per prediction horizon; tracks never straddle the split"""
        resources = resources or PipelineService.load_resources(cfg)
        results = []
        for horizon in horizons:
            subset = [r for r in records if r.horizon == horizon]
            if not subset:
                logger.warning(f"⚠️ No records at horizon {horizon:g}s, skipped")
                continue
            train_recs, test_recs = EvaluationService.split_by_group(
                subset, lambda r: r.track_id, cfg.split.train_fraction, cfg.split.seed
            )
            model = PipelineService.fit(PipelineService.discretize(train_recs, resources), resources, cfg)
            report = PipelineService.evaluate_frames(model, PipelineService.discretize(test_recs, resources))
            logger.info(f"✅ Horizon {horizon:g}s: macro F1 {report.macro_f1:.4f} on {len(test_recs)} records")
            results.append(
                HorizonResult(horizon=horizon, train_records=len(train_recs), test_records=len(test_recs), report=report)
            )
        return results

    @staticmethod
    def pedestrian_evaluation(
        records: Sequence[PedestrianFrameRecord],
        cfg: RunConfig,
        resources: Optional[Resources] = None,
    ) -> ClassReport:
        """Crossing-action report on pedestrians held out of training"""
        resources = resources or PipelineService.load_resources(cfg)
        train_recs, test_recs = EvaluationService.split_by_group(
            records, lambda r: r.ped_id, cfg.split.train_fraction, cfg.split.seed
        )
        model = PipelineService.fit(PipelineService.discretize(train_recs, resources), resources, cfg)
        report = PipelineService.evaluate_frames(model, PipelineService.discretize(test_recs, resources))
        logger.info(f"✅ {cfg.variant.value}: macro F1 {report.macro_f1:.4f} on {len(test_recs)} frames")
        return report


load_resources = PipelineService.load_resources
fit = PipelineService.fit
horizon_sweep = PipelineService.horizon_sweep
