import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from app.core.errors import ConfigError, DataFormatError, OntologyError, UnknownIdError
from app.schemas.frames import LinguisticFrame
from app.schemas.graph import Triple
from app.schemas.ontology import GraphMode
from app.services.ontology_service import Ontology

logger = logging.getLogger(__name__)

HAS_CHILD = "HAS_CHILD"
INSTANCE_OF = "INSTANCE_OF"
PREVIOUS = "PREVIOUS"
NEXT = "NEXT"


class TripleStore:
    """
    Append-only, deduplicated set of triples with head/relation/(head, relation) indexes.

    Single writer while building; call freeze() once built and share freely.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: Set[Triple] = set()
        self._by_head: Dict[str, Set[Triple]] = defaultdict(set)
        self._by_relation: Dict[str, Set[Triple]] = defaultdict(set)
        self._by_head_relation: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
        self._entities: Dict[str, int] = {}
        self._relations: Dict[str, int] = {}
        self._frozen = False
        self.add_all(triples)

    def add(self, triple: Triple) -> bool:
        """Insert a triple; returns False if it was already present"""
        if self._frozen:
            raise RuntimeError("triple store is frozen")
        triple = Triple(*triple)
        if not all(triple):
            raise DataFormatError(f"triple has an empty field: {triple}")
        if triple in self._triples:
            return False
        self._triples.add(triple)
        self._by_head[triple.head].add(triple)
        self._by_relation[triple.relation].add(triple)
        self._by_head_relation[(triple.head, triple.relation)].add(triple.tail)
        for entity in (triple.head, triple.tail):
            if entity not in self._entities:
                self._entities[entity] = len(self._entities)
        if triple.relation not in self._relations:
            self._relations[triple.relation] = len(self._relations)
        return True

    def add_all(self, triples: Iterable[Triple]) -> int:
        return sum(1 for t in triples if self.add(t))

    def freeze(self) -> "TripleStore":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def copy(self) -> "TripleStore":
        return TripleStore(self.sorted_triples())

    def __contains__(self, triple) -> bool:
        return Triple(*triple) in self._triples

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.sorted_triples())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TripleStore):
            return NotImplemented
        return self._triples == other._triples

    def as_set(self) -> Set[Triple]:
        return set(self._triples)

    def sorted_triples(self) -> List[Triple]:
        return sorted(self._triples)

    @property
    def entities(self) -> List[str]:
        """Entity table in first-seen order"""
        return list(self._entities)

    @property
    def relations(self) -> List[str]:
        return list(self._relations)

    def has_entity(self, entity: str) -> bool:
        return entity in self._entities

    def with_head(self, head: str) -> Set[Triple]:
        return set(self._by_head.get(head, ()))

    def with_relation(self, relation: str) -> Set[Triple]:
        if relation not in self._relations:
            raise UnknownIdError(f"unknown relation: {relation}")
        return set(self._by_relation[relation])

    def tails(self, head: str, relation: str) -> Set[str]:
        return set(self._by_head_relation.get((head, relation), ()))


class GraphService:
    """Turns linguistic frames into knowledge graphs following an ontology"""

    @staticmethod
    def _check_mode(ontology: Ontology, mode: Optional[GraphMode]) -> GraphMode:
        mode = GraphMode(mode) if mode is not None else ontology.mode
        if mode != ontology.mode:
            raise ConfigError(f"mode {mode.value} does not match ontology {ontology.name} ({ontology.mode.value})")
        return mode

    @staticmethod
    def validate_frame(frame: LinguisticFrame, ontology: Ontology) -> None:
        feature_relations = ontology.feature_relations
        for relation, instance in frame.assignments.items():
            if relation not in feature_relations:
                raise OntologyError(f"frame {frame.instance_id}: unknown feature relation {relation}")
            if instance not in ontology.range_instances(relation):
                raise OntologyError(
                    f"frame {frame.instance_id}: feature instance outside ontology range: {relation}={instance}"
                )
        # a frame carries either no feature at all or one instance per feature class
        if frame.assignments:
            missing = [r for r in feature_relations if r not in frame.assignments]
            if missing:
                raise OntologyError(f"frame {frame.instance_id}: missing mandatory feature {', '.join(missing)}")
        if frame.label is not None and frame.label not in ontology.target_labels:
            raise OntologyError(f"frame {frame.instance_id}: label {frame.label} is not a prediction target")

    @staticmethod
    def frame_to_triples(
        frame: LinguisticFrame,
        ontology: Ontology,
        mode: Optional[GraphMode] = None,
        include_label: bool = True,
    ) -> List[Triple]:
        """Triples describing one road user at one frame (temporal links excluded)"""
        mode = GraphService._check_mode(ontology, mode)
        GraphService.validate_frame(frame, ontology)

        generic = ontology.generic_entity
        node = frame.instance_id
        if mode == GraphMode.VEHICLE:
            triples = [Triple(generic, HAS_CHILD, node)]
        else:
            triples = [
                Triple(generic, HAS_CHILD, frame.user_id),
                Triple(node, INSTANCE_OF, frame.user_id),
            ]

        for relation in ontology.feature_relations:
            instance = frame.assignments.get(relation)
            if instance is not None:
                triples.append(Triple(node, relation, instance))

        if include_label and frame.label is not None:
            triples.append(Triple(node, ontology.target_relation, frame.label))

        for triple in triples:
            ontology.validate_triple(*triple)
        return triples

    @staticmethod
    def temporal_links(frames: Sequence[LinguisticFrame]) -> List[Triple]:
        """NEXT/PREVIOUS chains between consecutive instances of each pedestrian"""
        frames_by_user: Dict[str, Set[int]] = defaultdict(set)
        for frame in frames:
            frames_by_user[frame.user_id].add(frame.frame)

        links: List[Triple] = []
        for user_id in sorted(frames_by_user):
            ordered = sorted(frames_by_user[user_id])
            for earlier, later in zip(ordered, ordered[1:]):
                earlier_id = f"{user_id}-{earlier}"
                later_id = f"{user_id}-{later}"
                links.append(Triple(earlier_id, NEXT, later_id))
                links.append(Triple(later_id, PREVIOUS, earlier_id))
        return links

    @staticmethod
    def reification_triples(frame: LinguisticFrame, ontology: Ontology) -> List[Triple]:
        """
        Class-level triples scored during Bayesian inference, derived from a labelled frame:
        <generic, FEATURE, instance>, <instance, TARGET, label> and <generic, TARGET, label>.
        """
        if frame.label is None:
            return []
        generic = ontology.generic_entity
        target = ontology.target_relation
        triples = [Triple(generic, target, frame.label)]
        for relation in ontology.feature_relations:
            instance = frame.assignments.get(relation)
            if instance is None:
                continue
            triples.append(Triple(generic, relation, instance))
            triples.append(Triple(instance, target, frame.label))
        for triple in triples:
            ontology.validate_triple(*triple)
        return triples

    @staticmethod
    def build_graph(
        frames: Sequence[LinguisticFrame],
        ontology: Ontology,
        mode: Optional[GraphMode] = None,
        include_labels: bool = True,
        inject_reified: bool = False,
    ) -> TripleStore:
        if not frames:
            raise ConfigError("build_graph needs at least one frame")
        mode = GraphService._check_mode(ontology, mode)

        store = TripleStore()
        for frame in frames:
            store.add_all(GraphService.frame_to_triples(frame, ontology, mode, include_label=include_labels))
            if inject_reified and include_labels:
                store.add_all(GraphService.reification_triples(frame, ontology))

        if mode == GraphMode.PEDESTRIAN:
            store.add_all(GraphService.temporal_links(frames))

        logger.info(
            f"Built {ontology.name} graph from {len(frames)} frames: "
            f"{len(store)} triples, {len(store.entities)} entities, {len(store.relations)} relations"
        )
        return store

    @staticmethod
    def export_triples(store: TripleStore, path: Union[str, Path]) -> None:
        """Write head<TAB>relation<TAB>tail lines, sorted lexicographically"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for triple in store.sorted_triples():
                fh.write("\t".join(triple) + "\n")
        logger.info(f"✅ Exported {len(store)} triples to {path}")

    @staticmethod
    def import_triples(path: Union[str, Path]) -> TripleStore:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"triple file not found: {path}")
        store = TripleStore()
        with path.open("rb") as fh:
            for line_number, raw in enumerate(fh, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    raise DataFormatError(f"invalid UTF-8 at byte {e.start}: {e.reason}", line=line_number)
                line = line.rstrip("\n")
                if line.endswith("\r"):
                    line = line[:-1]
                fields = line.split("\t")
                if len(fields) != 3 or not all(fields):
                    raise DataFormatError(f"expected 3 tab-separated fields, got {len(fields)}", line=line_number)
                store.add(Triple(*fields))
        logger.info(f"Imported {len(store)} triples from {path}")
        return store
