import json
import logging
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from pydantic import ValidationError

from app.core.errors import ConfigError, OntologyError
from app.schemas.ontology import ClassRole, GraphMode, OntologyClassSchema, OntologyDocument, RelationSchema

logger = logging.getLogger(__name__)

ANY_RELATION = "Any"


class Ontology:
    """
    Class/instance/relation schema of a behavior knowledge graph.

    Closed classes enumerate their instances (linguistic categories, labels,
    generic entities). Open classes (vehicle ids, pedestrian ids, rule
    entities) accept any run-time id that is not a member of a closed class.
    """

    def __init__(
        self,
        name: str,
        mode: GraphMode,
        classes: List[OntologyClassSchema],
        relations: Dict[str, RelationSchema],
    ):
        if not classes:
            raise OntologyError("ontology must declare at least one class")

        self.name = name
        self.mode = GraphMode(mode)
        self.classes: List[OntologyClassSchema] = list(classes)
        self._by_name: Dict[str, OntologyClassSchema] = {}
        self._instance_class: Dict[str, str] = {}

        for cls in self.classes:
            if cls.name in self._by_name:
                raise OntologyError(f"duplicate class: {cls.name}")
            self._by_name[cls.name] = cls
            for instance in cls.instances or []:
                owner = self._instance_class.get(instance)
                if owner is not None:
                    raise OntologyError(
                        f"duplicate instance across classes: {instance} in {owner} and {cls.name}"
                    )
                self._instance_class[instance] = cls.name

        self.relations: Dict[str, Tuple[FrozenSet[str], FrozenSet[str]]] = {}
        for relation, spec in relations.items():
            if not relation or any(ch.isspace() for ch in relation):
                raise OntologyError(f"invalid relation name: {relation!r}")
            for class_name in list(spec.domain) + list(spec.range):
                if class_name not in self._by_name:
                    raise OntologyError(f"relation {relation} references undeclared class: {class_name}")
            self.relations[relation] = (frozenset(spec.domain), frozenset(spec.range))

        for cls in self.classes:
            if cls.relation == ANY_RELATION:
                continue
            if cls.relation not in self.relations:
                raise OntologyError(f"class {cls.name} points to undeclared relation {cls.relation}")
            domain, range_ = self.relations[cls.relation]
            # per-frame instances are the head of their linking relation
            if cls.role == ClassRole.INSTANCE and cls.name in domain:
                continue
            if cls.name not in range_:
                raise OntologyError(f"class {cls.name} is not in the range of {cls.relation}")

        targets = self.classes_with_role(ClassRole.TARGET)
        if len(targets) != 1:
            raise OntologyError("ontology must flag exactly one prediction-target class")
        if not self.classes_with_role(ClassRole.GENERIC):
            raise OntologyError("ontology must declare a generic entity")
        if len(self.classes_with_role(ClassRole.INSTANCE)) != 1:
            raise OntologyError("ontology must declare exactly one per-frame instance class")

        self._open_classes = frozenset(c.name for c in self.classes if c.instances is None)

    # -- lookups -----------------------------------------------------------------

    def classes_with_role(self, role: ClassRole) -> List[OntologyClassSchema]:
        return [c for c in self.classes if c.role == role]

    def get_class(self, name: str) -> OntologyClassSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise OntologyError(f"unknown class: {name}")

    @property
    def class_names(self) -> List[str]:
        return [c.name for c in self.classes]

    @property
    def instances(self) -> Dict[str, Optional[FrozenSet[str]]]:
        return {c.name: (frozenset(c.instances) if c.instances is not None else None) for c in self.classes}

    @property
    def generic_entities(self) -> List[str]:
        return [i for c in self.classes_with_role(ClassRole.GENERIC) for i in (c.instances or [])]

    @property
    def generic_entity(self) -> str:
        return self.generic_entities[0]

    @property
    def target_class(self) -> OntologyClassSchema:
        return self.classes_with_role(ClassRole.TARGET)[0]

    @property
    def target_relation(self) -> str:
        return self.target_class.relation

    @property
    def target_labels(self) -> List[str]:
        return list(self.target_class.instances or [])

    @property
    def feature_classes(self) -> List[OntologyClassSchema]:
        return self.classes_with_role(ClassRole.FEATURE)

    @property
    def feature_relations(self) -> List[str]:
        """Feature relations in declaration order; this is the fixed evidence order"""
        return [c.relation for c in self.feature_classes]

    def is_target_class(self, class_name: str) -> bool:
        return self.get_class(class_name).role == ClassRole.TARGET

    def instance_class(self, entity: str) -> Optional[str]:
        return self._instance_class.get(entity)

    def classes_of(self, entity: str) -> FrozenSet[str]:
        owner = self._instance_class.get(entity)
        if owner is not None:
            return frozenset([owner])
        return self._open_classes

    def range_instances(self, relation: str) -> List[str]:
        """Closed instances a relation may point to, in declaration order"""
        if relation not in self.relations:
            raise OntologyError(f"undeclared relation: {relation}")
        range_classes = self.relations[relation][1]
        return [i for c in self.classes if c.name in range_classes for i in (c.instances or [])]

    def class_for_relation(self, relation: str) -> OntologyClassSchema:
        for cls in self.classes:
            if cls.relation == relation:
                return cls
        raise OntologyError(f"no class is pointed to by relation {relation}")

    def closed_instances(self, roles: Iterable[ClassRole] = (ClassRole.FEATURE, ClassRole.TARGET, ClassRole.GENERIC)) -> List[str]:
        wanted = set(roles)
        return [i for c in self.classes if c.role in wanted for i in (c.instances or [])]

    # -- validation --------------------------------------------------------------

    def validate_triple(self, head: str, relation: str, tail: str) -> None:
        if relation not in self.relations:
            raise OntologyError(f"undeclared relation: {relation}")
        domain, range_ = self.relations[relation]
        if not (self.classes_of(head) & domain):
            raise OntologyError(f"<{head}, {relation}, {tail}>: head outside domain of {relation}")
        if not (self.classes_of(tail) & range_):
            raise OntologyError(f"<{head}, {relation}, {tail}>: tail outside range of {relation}")

    def extend(
        self,
        name: str,
        classes: List[OntologyClassSchema],
        relations: Dict[str, RelationSchema],
    ) -> "Ontology":
        """Return a new ontology with extra classes and relations appended"""
        merged = {r: RelationSchema(domain=sorted(d), range=sorted(rg)) for r, (d, rg) in self.relations.items()}
        merged.update(relations)
        return Ontology(name=name, mode=self.mode, classes=self.classes + list(classes), relations=merged)


def load_ontology(path: Union[str, Path]) -> Ontology:
    """Load and validate an ontology file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"ontology file not found: {path}")

    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise OntologyError(f"cannot parse ontology {path}: {e}")

    if isinstance(raw, dict) and not raw.get("classes"):
        raise OntologyError("ontology must declare at least one class")

    try:
        document = OntologyDocument(**raw)
    except (ValidationError, TypeError) as e:
        raise OntologyError(f"invalid ontology {path}: {e}")

    ontology = Ontology(
        name=document.name,
        mode=document.mode,
        classes=document.classes,
        relations=document.relations,
    )
    logger.info(f"Loaded ontology {ontology.name}: {len(ontology.classes)} classes, {len(ontology.relations)} relations")
    return ontology
