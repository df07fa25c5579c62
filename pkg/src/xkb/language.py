"""Rule language: schemas, formula trees, rules, canonical forms and rendering.

Formulas are immutable trees. Two rules are "the same rule" exactly when
their canonical forms (negation normal form, flattened, operands sorted,
duplicates dropped) coincide; ids and origins never participate in identity.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import SchemaError, ValidationError

MAX_UNIVERSE = 2**63

_ID_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_VALUE_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")
KEYWORDS = frozenset({"schema", "feature", "classes", "data", "rule", "true", "false"})

ORIGINS = ("data", "explanation", "feedback", "derived")


# ---------------------------------------------------------------------------
# Formula trees


@dataclass(frozen=True)
class FeatureAtom:
    feature: str
    value: str


@dataclass(frozen=True)
class ClassAtom:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


TRUE = Top()
FALSE = Bottom()

Formula = Union[FeatureAtom, ClassAtom, Not, And, Or, Top, Bottom]


def conj(parts: Iterable[Formula]) -> Formula:
    """Conjunction that flattens nested Ands and collapses trivial arity."""
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(parts: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


# ---------------------------------------------------------------------------
# Rendering

_PREC_OR = 0
_PREC_AND = 1
_PREC_NOT = 2
_PREC_ATOM = 3


def render_formula(formula: Formula) -> str:
    return _render(formula, _PREC_OR)


def _render(f: Formula, ctx: int) -> str:
    if isinstance(f, FeatureAtom):
        return f"{f.feature}={f.value}"
    if isinstance(f, ClassAtom):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Not):
        text = "!" + _render(f.child, _PREC_NOT)
        return text if ctx <= _PREC_NOT else f"({text})"
    if isinstance(f, And):
        text = " & ".join(_render(p, _PREC_AND + 1) for p in f.parts)
        return text if ctx <= _PREC_AND else f"({text})"
    if isinstance(f, Or):
        text = " | ".join(_render(p, _PREC_OR + 1) for p in f.parts)
        return text if ctx <= _PREC_OR else f"({text})"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Canonical form


def canonical_formula(formula: Formula) -> Formula:
    """NNF, flatten, sort operands by rendering, drop duplicate operands.

    Purely syntactic: `x & !x` survives, constants are not folded.
    """
    return _sort_flat(_nnf(formula, False))


def _nnf(f: Formula, negated: bool) -> Formula:
    if isinstance(f, Not):
        return _nnf(f.child, not negated)
    if isinstance(f, And):
        parts = tuple(_nnf(p, negated) for p in f.parts)
        return Or(parts) if negated else And(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(p, negated) for p in f.parts)
        return And(parts) if negated else Or(parts)
    if isinstance(f, Top):
        return FALSE if negated else TRUE
    if isinstance(f, Bottom):
        return TRUE if negated else FALSE
    return Not(f) if negated else f


def _sort_flat(f: Formula) -> Formula:
    if isinstance(f, (And, Or)):
        same = And if isinstance(f, And) else Or
        flat: list[Formula] = []
        for p in f.parts:
            q = _sort_flat(p)
            if isinstance(q, same):
                flat.extend(q.parts)
            else:
                flat.append(q)
        seen: dict[str, Formula] = {}
        for q in flat:
            seen.setdefault(render_formula(q), q)
        ordered = [seen[k] for k in sorted(seen)]
        if len(ordered) == 1:
            return ordered[0]
        return same(tuple(ordered))
    if isinstance(f, Not):
        return Not(_sort_flat(f.child))
    return f


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class Schema:
    features: tuple[Feature, ...]
    classes: tuple[str, ...]
    _index: dict = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema declares no features")
        if len(self.classes) < 2:
            raise SchemaError("schema must declare at least two classes")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature name")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError("duplicate class name")
        for name in names:
            if not _ID_RE.match(name) or name in KEYWORDS:
                raise SchemaError(f"invalid feature name {name!r}")
        for cls in self.classes:
            if not _ID_RE.match(cls) or cls in KEYWORDS:
                raise SchemaError(f"invalid class name {cls!r}")
        size = 1
        for f in self.features:
            if len(f.values) < 2:
                raise SchemaError(f"feature {f.name!r} needs at least two domain values")
            if len(set(f.values)) != len(f.values):
                raise SchemaError(f"duplicate domain value in feature {f.name!r}")
            for v in f.values:
                if not _VALUE_RE.match(v):
                    raise SchemaError(f"invalid domain value {v!r} for feature {f.name!r}")
            size *= len(f.values)
            if size > MAX_UNIVERSE:
                raise SchemaError(
                    f"universe size exceeds 2^63 after feature {f.name!r}"
                )
        object.__setattr__(self, "_index", {f.name: i for i, f in enumerate(self.features)})

    def feature_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def feature(self, name: str) -> Feature:
        return self.features[self.feature_index(name)]

    def has_feature(self, name: str) -> bool:
        return name in self._index

    def universe_size(self) -> int:
        size = 1
        for f in self.features:
            size *= len(f.values)
        return size

    def point(self, assignment: dict[str, str]) -> tuple[str, ...]:
        """Build a data point (value tuple in feature order) from a mapping."""
        missing = [f.name for f in self.features if f.name not in assignment]
        if missing:
            raise ValidationError(f"point misses features: {', '.join(missing)}")
        extra = set(assignment) - set(self._index)
        if extra:
            raise ValidationError(f"point assigns unknown features: {', '.join(sorted(extra))}")
        values = []
        for f in self.features:
            v = assignment[f.name]
            if v not in f.values:
                raise ValidationError(f"value {v!r} not in domain of feature {f.name!r}")
            values.append(v)
        return tuple(values)

    def point_dict(self, point: tuple[str, ...]) -> dict[str, str]:
        return {f.name: v for f, v in zip(self.features, point)}

    def to_json(self) -> dict:
        return {
            "features": [{"name": f.name, "domain": list(f.values)} for f in self.features],
            "classes": list(self.classes),
        }

    @staticmethod
    def from_json(obj: dict) -> "Schema":
        try:
            feats = tuple(
                Feature(d["name"], tuple(str(v) for v in d["domain"]))
                for d in obj["features"]
            )
            classes = tuple(obj["classes"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema object: {exc}") from exc
        return Schema(feats, classes)


DataPoint = tuple[str, ...]


# ---------------------------------------------------------------------------
# Rules and documents


@dataclass(frozen=True, eq=False)
class Rule:
    id: str
    body: Formula
    head: Formula
    origin: str = "feedback"

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValidationError(f"unknown rule origin {self.origin!r}")
        ckey = (canonical_formula(self.body), canonical_formula(self.head))
        object.__setattr__(self, "_ckey", ckey)
        object.__setattr__(self, "_chash", hash(ckey))

    @property
    def canonical_body(self) -> Formula:
        return self._ckey[0]  # type: ignore[attr-defined]

    @property
    def canonical_head(self) -> Formula:
        return self._ckey[1]  # type: ignore[attr-defined]

    def canonical_key(self) -> tuple[Formula, Formula]:
        return self._ckey  # type: ignore[attr-defined]

    def __eq__(self, other):
        if not isinstance(other, Rule):
            return NotImplemented
        return self._ckey == other._ckey  # type: ignore[attr-defined]

    def __hash__(self):
        return self._chash  # type: ignore[attr-defined]

    def __repr__(self):
        return f"Rule({render_rule(self)!r})"


def canonicalize(rule: Rule) -> Rule:
    """Rule with body and head replaced by their canonical forms."""
    return Rule(rule.id, rule.canonical_body, rule.canonical_head, rule.origin)


def render_rule(rule: Rule) -> str:
    keyword = "data" if rule.origin == "data" else "rule"
    return f"{keyword} {rule.id}: {render_formula(rule.body)} => {render_formula(rule.head)};"


def rule_text(rule: Rule) -> str:
    """Bare `body => head` text, without keyword, id or terminator."""
    return f"{render_formula(rule.body)} => {render_formula(rule.head)}"


def fresh_rule_id(body: Formula, head: Formula) -> str:
    canonical = (
        render_formula(canonical_formula(body))
        + " => "
        + render_formula(canonical_formula(head))
    )
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:8]
    return f"fb_{digest}"


@dataclass(frozen=True)
class Document:
    schema: Schema
    rules: tuple[Rule, ...]

    def __post_init__(self):
        seen = set()
        for r in self.rules:
            if r.id in seen:
                raise ValidationError(f"duplicate rule id {r.id!r}")
            seen.add(r.id)


def render_document(doc: Document) -> str:
    lines = ["schema {"]
    for f in doc.schema.features:
        lines.append(f"  feature {f.name}: {{{', '.join(f.values)}}};")
    lines.append(f"  classes {{{', '.join(doc.schema.classes)}}};")
    lines.append("}")
    if doc.rules:
        lines.append("")
        for r in doc.rules:
            lines.append(render_rule(r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation against a schema


def atoms(formula: Formula):
    """Yield all atoms in the tree."""
    stack = [formula]
    while stack:
        f = stack.pop()
        if isinstance(f, (FeatureAtom, ClassAtom)):
            yield f
        elif isinstance(f, Not):
            stack.append(f.child)
        elif isinstance(f, (And, Or)):
            stack.extend(f.parts)


def validate_feature_formula(schema: Schema, formula: Formula) -> None:
    for a in atoms(formula):
        if isinstance(a, ClassAtom):
            raise ValidationError(f"class atom {a.name!r} in a feature formula")
        if not schema.has_feature(a.feature):
            raise ValidationError(f"unknown feature {a.feature!r}")
        if a.value not in schema.feature(a.feature).values:
            raise ValidationError(
                f"unknown value {a.value!r} for feature {a.feature!r}"
            )


def validate_class_formula(schema: Schema, formula: Formula) -> None:
    for a in atoms(formula):
        if isinstance(a, FeatureAtom):
            raise ValidationError(f"feature atom in a class formula")
        if a.name not in schema.classes:
            raise ValidationError(f"unknown class {a.name!r}")


def is_instance_body(schema: Schema, body: Formula) -> bool:
    """True when the canonical body assigns every feature exactly once, positively."""
    canonical = canonical_formula(body)
    if isinstance(canonical, FeatureAtom):
        parts: tuple[Formula, ...] = (canonical,)
    elif isinstance(canonical, And):
        parts = canonical.parts
    else:
        return False
    seen: set[str] = set()
    for p in parts:
        if not isinstance(p, FeatureAtom):
            return False
        if p.feature in seen:
            return False
        seen.add(p.feature)
    return seen == {f.name for f in schema.features}


def is_instance_rule(schema: Schema, rule: Rule) -> bool:
    return is_instance_body(schema, rule.body) and isinstance(
        canonical_formula(rule.head), ClassAtom
    )


def instance_point(schema: Schema, rule: Rule) -> DataPoint:
    """The unique data point of an instance rule's body."""
    if not is_instance_rule(schema, rule):
        raise ValidationError(f"rule {rule.id!r} is not an instance rule")
    assignment = {
        a.feature: a.value for a in atoms(rule.canonical_body) if isinstance(a, FeatureAtom)
    }
    return schema.point(assignment)


def validate_rule(schema: Schema, rule: Rule) -> None:
    """Structural validation: atoms declared, data rules are instance rules."""
    validate_feature_formula(schema, rule.body)
    validate_class_formula(schema, rule.head)
    if rule.origin == "data" and not is_instance_rule(schema, rule):
        raise ValidationError(
            f"data rule {rule.id!r} must assign every feature exactly once "
            "and map to a single class"
        )
