import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from pydantic import ValidationError

from app.core.errors import ConfigError, DataFormatError
from app.schemas.frames import LinguisticFrame
from app.schemas.graph import GraphVariant, Triple
from app.schemas.ontology import ClassRole, OntologyClassSchema, RelationSchema
from app.schemas.rules import FuzzyRule, RuleTripleBundle
from app.services.graph_service import TripleStore
from app.services.ontology_service import Ontology

logger = logging.getLogger(__name__)

ANTECEDENT_OF = "ANTECEDENT_OF"
IMPLIES = "IMPLIES"
CONSEQUENT_IS = "CONSEQUENT_IS"
RULE_WEIGHT_IS = "RULE_WEIGHT_IS"
SATISFIES_RULE = "SATISFIES_RULE"

ANTECEDENT_CLASS = "Rule antecedent"
CONSEQUENT_CLASS = "Rule consequent"
WEIGHT_CLASS = "Rule weight"

# weight bands, half-open like the feature thresholds
WEIGHT_BREAKPOINTS = (0.33, 0.66)
WEIGHT_BANDS = ("lowRW", "midRW", "highRW")

RULE_PATTERN = re.compile(
    r"^(?P<id>[^:\s]+)\s*:\s*IF\b(?P<antecedents>.*?)\bTHEN\s+(?P<relation>[^=\s]+)\s*=\s*(?P<label>\S+)\s+WITH\s+(?P<weight>\S+)\s*$"
)
CONDITION_PATTERN = re.compile(r"^(?P<relation>[^=\s]+)\s*=\s*(?P<instance>\S+)$")


def weight_band(weight: float) -> str:
    for breakpoint, band in zip(WEIGHT_BREAKPOINTS, WEIGHT_BANDS):
        if weight < breakpoint:
            return band
    return WEIGHT_BANDS[-1]


class FuzzyService:

    @staticmethod
    def parse_line(line: str, line_number: int) -> FuzzyRule:
        match = RULE_PATTERN.match(line.strip())
        if match is None:
            raise DataFormatError(f"cannot parse rule: {line.strip()!r}", line=line_number)

        antecedents: Dict[str, str] = {}
        text = match.group("antecedents").strip()
        conditions = re.split(r"\s+AND\s+", text) if text else []
        for condition in conditions:
            cond = CONDITION_PATTERN.match(condition.strip())
            if cond is None:
                raise DataFormatError(f"cannot parse condition {condition!r}", line=line_number)
            relation = cond.group("relation")
            if relation in antecedents:
                raise DataFormatError(f"feature {relation} appears twice in rule {match.group('id')}", line=line_number)
            antecedents[relation] = cond.group("instance")

        try:
            weight = float(match.group("weight"))
        except ValueError:
            raise DataFormatError(f"non-numeric weight {match.group('weight')!r}", line=line_number)

        try:
            return FuzzyRule(
                id=match.group("id"),
                antecedents=antecedents,
                consequent_relation=match.group("relation"),
                consequent=match.group("label"),
                weight=weight,
            )
        except ValidationError as e:
            raise DataFormatError(e.errors()[0]["msg"], line=line_number)

    @staticmethod
    def validate_rule(rule: FuzzyRule, ontology: Ontology) -> None:
        feature_relations = ontology.feature_relations
        for relation, instance in rule.antecedents.items():
            if relation not in feature_relations:
                raise ConfigError(f"rule {rule.id}: unknown feature relation {relation}")
            if instance not in ontology.range_instances(relation):
                raise ConfigError(f"rule {rule.id}: unknown instance name {instance} for {relation}")
        if rule.consequent_relation != ontology.target_relation:
            raise ConfigError(f"rule {rule.id}: consequent must use {ontology.target_relation}")
        if rule.consequent not in ontology.target_labels:
            raise ConfigError(f"rule {rule.id}: consequent {rule.consequent} is not a prediction target")

    @staticmethod
    def parse_rules(path: Union[str, Path], ontology: Optional[Ontology] = None) -> List[FuzzyRule]:
        """
        Parse a rule file; blank lines and lines starting with '#' are ignored.

        When an ontology is given every feature, instance and consequent is checked against it.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"rule file not found: {path}")

        rules: List[FuzzyRule] = []
        seen = set()
        for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rule = FuzzyService.parse_line(line, line_number)
            if rule.id in seen:
                raise DataFormatError(f"duplicate rule id: {rule.id}", line=line_number)
            seen.add(rule.id)
            if ontology is not None:
                try:
                    FuzzyService.validate_rule(rule, ontology)
                except ConfigError as e:
                    raise DataFormatError(str(e), line=line_number)
            rules.append(rule)

        logger.info(f"Parsed {len(rules)} fuzzy rules from {path}")
        return rules

    @staticmethod
    def rule_to_triples(rule: FuzzyRule) -> RuleTripleBundle:
        ante, cons = rule.antecedent_entity, rule.consequent_entity
        triples = [Triple(instance, ANTECEDENT_OF, ante) for instance in rule.antecedents.values()]
        triples.append(Triple(ante, IMPLIES, cons))
        triples.append(Triple(cons, CONSEQUENT_IS, rule.consequent))
        triples.append(Triple(cons, RULE_WEIGHT_IS, weight_band(rule.weight)))
        return RuleTripleBundle(rule_id=rule.id, antecedent_entity=ante, consequent_entity=cons, triples=triples)

    @staticmethod
    def matches(rule: FuzzyRule, frame: LinguisticFrame) -> bool:
        return all(frame.assignments.get(relation) == instance for relation, instance in rule.antecedents.items())

    @staticmethod
    def matching_rules(rules: Sequence[FuzzyRule], frame: LinguisticFrame) -> List[FuzzyRule]:
        return [rule for rule in rules if FuzzyService.matches(rule, frame)]

    @staticmethod
    def attach_rules(store: TripleStore, rules: Sequence[FuzzyRule], frames: Sequence[LinguisticFrame]) -> TripleStore:
        """
        Link every frame instance to the rules its assignments satisfy.

        Returns a new store holding the input triples, one SATISFIES_RULE link per
        (frame, matching rule) and the conversion bundle of each rule that matched.
        """
        enriched = store.copy()
        links = 0
        for frame in frames:
            for rule in FuzzyService.matching_rules(rules, frame):
                enriched.add_all(FuzzyService.rule_to_triples(rule).triples)
                if enriched.add(Triple(frame.instance_id, SATISFIES_RULE, rule.antecedent_entity)):
                    links += 1
        logger.info(f"Attached {links} rule links; store grew from {len(store)} to {len(enriched)} triples")
        return enriched.freeze() if store.frozen else enriched

    @staticmethod
    def extend_ontology(ontology: Ontology, rules: Sequence[FuzzyRule]) -> Ontology:
        """Ontology with the rule antecedent/consequent/weight classes and their relations"""
        instance_class = ontology.classes_with_role(ClassRole.INSTANCE)[0].name
        generic_classes = [c.name for c in ontology.classes_with_role(ClassRole.GENERIC)]
        feature_classes = [c.name for c in ontology.feature_classes]
        target_class = ontology.target_class.name

        classes = [
            OntologyClassSchema(
                name=ANTECEDENT_CLASS,
                description="Combination of feature values required by a fuzzy rule",
                instances=[r.antecedent_entity for r in rules] or None,
                relation=ANTECEDENT_OF,
                role=ClassRole.RULE,
            ),
            OntologyClassSchema(
                name=CONSEQUENT_CLASS,
                description="Crossing action and weight concluded by a fuzzy rule",
                instances=[r.consequent_entity for r in rules] or None,
                relation=IMPLIES,
                role=ClassRole.RULE,
            ),
            OntologyClassSchema(
                name=WEIGHT_CLASS,
                description="Rule weight band",
                instances=list(WEIGHT_BANDS),
                relation=RULE_WEIGHT_IS,
                role=ClassRole.RULE,
            ),
        ]
        domain, range_ = ontology.relations[ontology.target_relation]
        relations = {
            ANTECEDENT_OF: RelationSchema(domain=feature_classes, range=[ANTECEDENT_CLASS]),
            IMPLIES: RelationSchema(domain=[ANTECEDENT_CLASS], range=[CONSEQUENT_CLASS]),
            CONSEQUENT_IS: RelationSchema(domain=[CONSEQUENT_CLASS], range=[target_class]),
            RULE_WEIGHT_IS: RelationSchema(domain=[CONSEQUENT_CLASS], range=[WEIGHT_CLASS]),
            SATISFIES_RULE: RelationSchema(domain=[instance_class] + generic_classes, range=[ANTECEDENT_CLASS]),
            # rule antecedents may be reified as evidence for the target
            ontology.target_relation: RelationSchema(domain=sorted(domain) + [ANTECEDENT_CLASS], range=sorted(range_)),
        }
        return ontology.extend(GraphVariant.PED_FEAT_RULES.value, classes, relations)

    @staticmethod
    def rule_reification_triples(frame: LinguisticFrame, rules: Sequence[FuzzyRule], ontology: Ontology) -> List[Triple]:
        """Class-level rule evidence of a labelled frame: <generic, SATISFIES_RULE, ante> and <ante, TARGET, label>"""
        if frame.label is None:
            return []
        triples = []
        for rule in FuzzyService.matching_rules(rules, frame):
            triples.append(Triple(ontology.generic_entity, SATISFIES_RULE, rule.antecedent_entity))
            triples.append(Triple(rule.antecedent_entity, ontology.target_relation, frame.label))
        return triples


parse_rules = FuzzyService.parse_rules
rule_to_triples = FuzzyService.rule_to_triples
attach_rules = FuzzyService.attach_rules
extend_ontology = FuzzyService.extend_ontology
