import itertools

import numpy as np
import pytest

from app.core.errors import ConfigError
from app.schemas.evaluation import HorizonResult
from app.schemas.graph import Triple
from app.schemas.ontology import GraphMode
from app.schemas.records import ScenarioKind, ScenarioSpec
from app.schemas.run import RunConfig
from app.services.evaluation_service import EvaluationService, classification_report, split_no_unseen
from app.services.graph_service import TripleStore
from app.services.pipeline_service import PipelineService
from app.services.synthetic_service import generate_synthetic


def ring_store(n=20):
    triples = [(f"e{i}", "next", f"e{(i + 1) % n}") for i in range(n)]
    triples += [(f"e{i}", "prev", f"e{(i - 1) % n}") for i in range(n)]
    return TripleStore(triples).freeze()


def feasible(store, n_valid):
    """Whether any n_valid triples can leave the store with all their ids still in it"""
    triples = store.sorted_triples()
    for combo in itertools.combinations(triples, n_valid):
        rest = TripleStore(t for t in triples if t not in combo)
        if all(rest.has_entity(h) and rest.has_entity(t) and r in rest.relations for h, r, t in combo):
            return True
    return False


class TestSplitNoUnseen:

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_no_unseen_ids(self, seed):
        store = ring_store()
        train, valid = split_no_unseen(store, 8, seed)
        assert len(valid) == 8
        assert len(train) + len(valid) == len(store)
        assert not any(t in train for t in valid)
        for h, r, t in valid:
            assert train.has_entity(h) and train.has_entity(t)
            assert r in train.relations

    def test_deterministic(self):
        assert split_no_unseen(ring_store(), 5, 9)[1] == split_no_unseen(ring_store(), 5, 9)[1]

    def test_excluded_triples_stay_in_training(self):
        store = ring_store()
        exclude = [Triple(f"e{i}", "next", f"e{i + 1}") for i in range(10)]
        train, valid = split_no_unseen(store, 6, 0, exclude=exclude)
        assert all(t in train for t in exclude)
        assert not set(valid) & set(exclude)

    def test_infeasible(self):
        store = TripleStore([("a", "r", "b"), ("c", "s", "d")]).freeze()
        with pytest.raises(ConfigError, match="without unseen ids"):
            split_no_unseen(store, 1, 0)

    def test_too_many_requested(self):
        with pytest.raises(ConfigError):
            split_no_unseen(ring_store(), 40, 0)

    def test_finds_split_a_single_pass_misses(self):
        store = TripleStore([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d"), ("a", "s", "d")]).freeze()
        for seed in (0, 10, 12):
            train, valid = split_no_unseen(store, 2, seed)
            assert sorted(valid) == [Triple("a", "r", "b"), Triple("c", "r", "d")]
            assert sorted(train) == [Triple("a", "s", "d"), Triple("b", "r", "c")]

    @pytest.mark.parametrize("case", range(40))
    def test_agrees_with_brute_force(self, case):
        rng = np.random.default_rng(case)
        entities, relations = "abcde", "rs"
        store = TripleStore(
            (entities[rng.integers(5)], relations[rng.integers(2)], entities[rng.integers(5)]) for _ in range(7)
        ).freeze()
        n_valid = int(rng.integers(1, min(4, len(store))))
        if feasible(store, n_valid):
            train, valid = split_no_unseen(store, n_valid, case)
            assert len(valid) == n_valid
            EvaluationService.check_no_unseen(train, valid)
        else:
            with pytest.raises(ConfigError, match="without unseen ids"):
                split_no_unseen(store, n_valid, case)

    def test_two_thousand_triples_from_synthetic_tracks(self):
        records = generate_synthetic(
            ScenarioSpec(kind=ScenarioKind.VEHICLE, seed=3, counts={"LLC": 150, "LK": 150, "RLC": 150})
        )
        resources = PipelineService.load_resources(RunConfig(mode=GraphMode.VEHICLE))
        store, _ = PipelineService.training_graph(PipelineService.discretize(records, resources), resources)
        train, valid = split_no_unseen(store, 2000, 0)
        assert len(valid) == 2000
        assert len(train) + len(valid) == len(store)
        train_relations = set(train.relations)
        assert all(train.has_entity(h) and train.has_entity(t) and r in train_relations for h, r, t in valid)


class TestSplitByGroup:

    def test_groups_stay_together(self):
        items = [(f"track{i % 7}", i) for i in range(70)]
        train, test = EvaluationService.split_by_group(items, key=lambda item: item[0], train_fraction=0.7, seed=4)
        train_groups = {g for g, _ in train}
        test_groups = {g for g, _ in test}
        assert not train_groups & test_groups
        assert len(train_groups) == 5
        assert len(train) + len(test) == 70

    def test_needs_two_groups(self):
        with pytest.raises(ConfigError):
            EvaluationService.split_by_group([1, 2, 3], key=lambda _: "same", train_fraction=0.5, seed=0)


class TestClassificationReport:

    def test_values(self):
        y_true = ["LLC", "LLC", "LK", "LK", "RLC", "RLC"]
        y_pred = ["LLC", "LK", "LK", "LK", "RLC", "LLC"]
        report = classification_report(y_true, y_pred, ["LLC", "LK", "RLC"])
        assert report.per_class["LLC"].precision == pytest.approx(0.5)
        assert report.per_class["LLC"].recall == pytest.approx(0.5)
        assert report.per_class["LK"].precision == pytest.approx(2 / 3)
        assert report.per_class["LK"].f1 == pytest.approx(0.8)
        assert report.per_class["RLC"].precision == pytest.approx(1.0)
        assert report.per_class["RLC"].f1 == pytest.approx(2 / 3)
        assert report.macro_f1 == pytest.approx((0.5 + 0.8 + 2 / 3) / 3)
        assert report.accuracy == pytest.approx(4 / 6)
        assert report.per_class["RLC"].support == 2

    @pytest.mark.parametrize("mapping", list(itertools.permutations(["LLC", "LK", "RLC"])))
    def test_macro_f1_invariant_under_label_permutation(self, mapping):
        labels = ["LLC", "LK", "RLC"]
        rename = dict(zip(labels, mapping))
        y_true = ["LLC", "LLC", "LK", "LK", "LK", "RLC", "RLC"]
        y_pred = ["LLC", "LK", "LK", "RLC", "LK", "RLC", "LLC"]
        base = classification_report(y_true, y_pred, labels)
        renamed = classification_report([rename[y] for y in y_true], [rename[y] for y in y_pred], list(reversed(labels)))
        assert renamed.macro_f1 == pytest.approx(base.macro_f1)
        assert renamed.accuracy == pytest.approx(base.accuracy)
        for label in labels:
            assert renamed.per_class[rename[label]].f1 == pytest.approx(base.per_class[label].f1)

    def test_zero_support(self):
        report = classification_report(["LK", "LK"], ["LK", "LLC"], ["LLC", "LK", "RLC"])
        assert report.per_class["RLC"].support == 0
        assert report.per_class["RLC"].f1 == 0.0
        assert report.per_class["LLC"].precision == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            classification_report(["LK"], [], ["LK"])

    def test_format_table(self):
        report = classification_report(["crossRoad", "noCrossRoad"], ["crossRoad", "crossRoad"], ["crossRoad", "noCrossRoad"])
        lines = report.format_table(title="pedestrians").splitlines()
        assert lines[0] == "pedestrians"
        assert lines[1] == "class\tprecision\trecall\tf1-score\tsupport"
        assert lines[2] == "crossRoad\t50.00\t100.00\t66.67\t1"
        assert lines[3] == "noCrossRoad\t0.00\t0.00\t0.00\t1"
        assert lines[-1] == "accuracy\t\t\t50.00\t2"

    def test_horizon_table(self):
        report = classification_report(["LK"], ["LK"], ["LK"])
        results = [HorizonResult(horizon=h, train_records=4, test_records=1, report=report) for h in (1.0, 2.0)]
        table = EvaluationService.format_horizon_table(results)
        assert table.startswith("horizon 1s\n")
        assert "\n\nhorizon 2s\n" in table
