"""Interpretations of formulas and rules, conflict detection, coherence.

Feature formulas denote sets of data points, class formulas denote sets of
classes. Every set-valued question is asked in a *scope*:

* ``FULL_UNIVERSE`` quantifies over the whole combinatorial product space of
  the schema (only features actually mentioned in a formula are enumerated;
  unmentioned features contribute a count multiplier).
* ``DatasetScope(table)`` restricts every extent to the table's known points.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import GridTooLargeError, ValidationError
from .language import (
    And,
    Bottom,
    ClassAtom,
    DataPoint,
    FeatureAtom,
    Formula,
    Not,
    Or,
    Rule,
    Schema,
    Top,
    atoms,
    conj,
    disj,
)
from .table import ClassifierTable

CELL_LIMIT = 2**20


@dataclass(frozen=True)
class FullUniverse:
    pass


@dataclass(frozen=True, eq=False)
class DatasetScope:
    table: ClassifierTable


Scope = Union[FullUniverse, DatasetScope]
FULL_UNIVERSE = FullUniverse()


def scope_table(scope: Scope) -> Optional[ClassifierTable]:
    return scope.table if isinstance(scope, DatasetScope) else None


# ---------------------------------------------------------------------------
# Pointwise evaluation


def evaluate(schema: Schema, formula: Formula, point: DataPoint) -> bool:
    if len(point) != len(schema.features):
        raise ValidationError(f"point {point!r} does not match schema arity")
    return _eval(schema, formula, point)


def _eval(schema: Schema, f: Formula, point: DataPoint) -> bool:
    if isinstance(f, FeatureAtom):
        return point[schema.feature_index(f.feature)] == f.value
    if isinstance(f, Not):
        return not _eval(schema, f.child, point)
    if isinstance(f, And):
        return all(_eval(schema, p, point) for p in f.parts)
    if isinstance(f, Or):
        return any(_eval(schema, p, point) for p in f.parts)
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    raise ValidationError(f"not a feature formula: {f!r}")


def _eval_partial(f: Formula, assign: dict[str, str]) -> Optional[bool]:
    """Three-valued evaluation under a partial assignment (None = undecided)."""
    if isinstance(f, FeatureAtom):
        v = assign.get(f.feature)
        return None if v is None else v == f.value
    if isinstance(f, Not):
        inner = _eval_partial(f.child, assign)
        return None if inner is None else not inner
    if isinstance(f, And):
        decided_true = True
        for p in f.parts:
            sub = _eval_partial(p, assign)
            if sub is False:
                return False
            if sub is None:
                decided_true = False
        return True if decided_true else None
    if isinstance(f, Or):
        decided_false = True
        for p in f.parts:
            sub = _eval_partial(p, assign)
            if sub is True:
                return True
            if sub is None:
                decided_false = False
        return False if decided_false else None
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    raise ValidationError(f"not a feature formula: {f!r}")


def mentioned_features(schema: Schema, formula: Formula) -> tuple[str, ...]:
    names = {a.feature for a in atoms(formula) if isinstance(a, FeatureAtom)}
    return tuple(f.name for f in schema.features if f.name in names)


# ---------------------------------------------------------------------------
# Extents


@dataclass(frozen=True)
class Extent:
    """A set of data points, possibly factored over unmentioned features.

    ``cells`` are assignments to ``features`` only; each cell stands for
    ``multiplier`` concrete points (the product of the unmentioned domains).
    Dataset-scope extents always use all features with multiplier 1.
    """

    schema: Schema
    features: tuple[str, ...]
    cells: frozenset[tuple[str, ...]]
    multiplier: int

    @property
    def count(self) -> int:
        return len(self.cells) * self.multiplier

    @property
    def is_empty(self) -> bool:
        return not self.cells

    def points(self, limit: int = CELL_LIMIT) -> frozenset[DataPoint]:
        """Expand to full data points (errors if the expansion exceeds `limit`)."""
        if self.count > limit:
            raise GridTooLargeError(self.features, self.count, limit)
        mentioned = set(self.features)
        free = [f for f in self.schema.features if f.name not in mentioned]
        index = {name: i for i, name in enumerate(self.features)}
        result = set()
        for cell in self.cells:
            for combo in itertools.product(*(f.values for f in free)):
                free_iter = iter(combo)
                point = tuple(
                    cell[index[f.name]] if f.name in index else next(free_iter)
                    for f in self.schema.features
                )
                result.add(point)
        return frozenset(result)


def extent(
    schema: Schema, formula: Formula, scope: Scope, cell_limit: int = CELL_LIMIT
) -> Extent:
    if isinstance(scope, DatasetScope):
        table = scope.table
        if table.schema != schema:
            raise ValidationError("table schema differs from formula schema")
        cells = frozenset(p for p in table.points if _eval(schema, formula, p))
        return Extent(schema, tuple(f.name for f in schema.features), cells, 1)
    names = mentioned_features(schema, formula)
    size = 1
    for name in names:
        size *= len(schema.feature(name).values)
    if size > cell_limit:
        raise GridTooLargeError(names, size, cell_limit)
    multiplier = 1
    mentioned = set(names)
    for f in schema.features:
        if f.name not in mentioned:
            multiplier *= len(f.values)
    domains = [schema.feature(name).values for name in names]
    cells = set()
    for combo in itertools.product(*domains):
        assign = dict(zip(names, combo))
        if _eval_partial(formula, assign):
            cells.add(combo)
    return Extent(schema, names, frozenset(cells), multiplier)


def class_extent(schema: Schema, formula: Formula) -> frozenset[str]:
    if isinstance(formula, ClassAtom):
        if formula.name not in schema.classes:
            raise ValidationError(f"unknown class {formula.name!r}")
        return frozenset((formula.name,))
    if isinstance(formula, Not):
        return frozenset(schema.classes) - class_extent(schema, formula.child)
    if isinstance(formula, And):
        result = frozenset(schema.classes)
        for p in formula.parts:
            result &= class_extent(schema, p)
        return result
    if isinstance(formula, Or):
        result: frozenset[str] = frozenset()
        for p in formula.parts:
            result |= class_extent(schema, p)
        return result
    if isinstance(formula, Top):
        return frozenset(schema.classes)
    if isinstance(formula, Bottom):
        return frozenset()
    raise ValidationError(f"not a class formula: {formula!r}")


# ---------------------------------------------------------------------------
# Satisfiability


def satisfiable(schema: Schema, formula: Formula) -> Optional[DataPoint]:
    """First satisfying point in domain order, or None.

    Backtracking over mentioned features only; the witness extends to a full
    point by giving every unmentioned feature its first domain value.
    """
    names = mentioned_features(schema, formula)
    assign: dict[str, str] = {}

    def search(i: int) -> bool:
        verdict = _eval_partial(formula, assign)
        if verdict is True:
            return True
        if verdict is False:
            return False
        for value in schema.feature(names[i]).values:
            assign[names[i]] = value
            if search(i + 1):
                return True
            del assign[names[i]]
        return False

    if not search(0):
        return None
    return tuple(
        assign.get(f.name, f.values[0]) for f in schema.features
    )


def satisfiable_in_scope(schema: Schema, formula: Formula, scope: Scope) -> Optional[DataPoint]:
    """First point of the scope satisfying the formula, or None."""
    if isinstance(scope, DatasetScope):
        for p in scope.table.points:
            if _eval(schema, formula, p):
                return p
        return None
    return satisfiable(schema, formula)


# ---------------------------------------------------------------------------
# Conflicts and consistency


@dataclass(frozen=True)
class ConflictWitness:
    rule_a: str
    rule_b: str
    point: DataPoint
    heads_a: frozenset[str]
    heads_b: frozenset[str]


ConflictCache = dict


def conflict(
    schema: Schema,
    a: Rule,
    b: Rule,
    scope: Scope,
    cache: Optional[ConflictCache] = None,
) -> Optional[ConflictWitness]:
    """Witness that `a` and `b` assign disjoint class sets to a shared point."""
    if cache is not None:
        key = (a.canonical_key(), b.canonical_key())
        rev = (key[1], key[0])
        if key in cache or rev in cache:
            hit = cache.get(key)
            flipped = key not in cache
            hit = cache[rev] if flipped else hit
            if hit is None:
                return None
            point = hit
            return ConflictWitness(
                a.id,
                b.id,
                point,
                class_extent(schema, a.head),
                class_extent(schema, b.head),
            )
    heads_a = class_extent(schema, a.head)
    heads_b = class_extent(schema, b.head)
    point = None
    if not (heads_a & heads_b):
        point = satisfiable_in_scope(schema, conj([a.body, b.body]), scope)
    if cache is not None:
        cache[(a.canonical_key(), b.canonical_key())] = point
    if point is None:
        return None
    return ConflictWitness(a.id, b.id, point, heads_a, heads_b)


def self_conflict(
    schema: Schema, rule: Rule, scope: Scope
) -> Optional[DataPoint]:
    """Point covered by the body while the head denotes no class at all."""
    if class_extent(schema, rule.head):
        return None
    return satisfiable_in_scope(schema, rule.body, scope)


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    edges: tuple[ConflictWitness, ...]
    self_loops: tuple[str, ...]

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def check_consistency(
    schema: Schema,
    rules: Iterable[Rule],
    scope: Scope,
    cache: Optional[ConflictCache] = None,
) -> ConsistencyReport:
    """Enumerate all conflicting pairs and self-conflicting rules.

    A set is consistent iff it has no conflicting pair and no rule whose body
    is satisfiable in scope while its head denotes the empty class set.
    """
    unique: list[Rule] = []
    seen = set()
    for r in rules:
        if r not in seen:
            seen.add(r)
            unique.append(r)
    ordered = sorted(unique, key=lambda r: r.id)
    edges = []
    loops = []
    for i, a in enumerate(ordered):
        if self_conflict(schema, a, scope) is not None:
            loops.append(a.id)
        for b in ordered[i + 1 :]:
            w = conflict(schema, a, b, scope, cache)
            if w is not None:
                edges.append(w)
    return ConsistencyReport(not edges and not loops, tuple(edges), tuple(loops))


# ---------------------------------------------------------------------------
# Enforcement


@dataclass(frozen=True)
class EnforcementReport:
    holds: bool
    counterexample: Optional[tuple[str, DataPoint]] = None


def enforces(
    schema: Schema,
    enforcing: Iterable[Rule],
    enforced: Iterable[Rule],
    scope: Scope,
) -> EnforcementReport:
    """Every point-to-class-set assignment of `enforced` is covered, at least
    as specifically, by `enforcing`.

    For each enforced rule the uncovered region is
    ``body(r_j) ∧ ¬(⋁ bodies of rules with head ⊆ head(r_j))``; the report
    carries the first uncovered point found.
    """
    enforcing = list(enforcing)
    for r_j in enforced:
        target = class_extent(schema, r_j.head)
        qualifying = [
            r_i for r_i in enforcing if class_extent(schema, r_i.head) <= target
        ]
        parts: list[Formula] = [r_j.body]
        if qualifying:
            parts.append(Not(disj([r_i.body for r_i in qualifying])))
        gap = satisfiable_in_scope(schema, conj(parts), scope)
        if gap is not None:
            return EnforcementReport(False, (r_j.id, gap))
    return EnforcementReport(True)


# ---------------------------------------------------------------------------
# Coherence with a classifier


@dataclass(frozen=True)
class CoherenceValue:
    """Fraction of the rule's dataset extent that the classifier agrees with.

    ``denominator == 0`` encodes the vacuous case (no known point matches the
    body); a vacuous rule is coherent by definition.
    """

    numerator: int
    denominator: int

    @property
    def vacuous(self) -> bool:
        return self.denominator == 0

    @property
    def ratio(self) -> Optional[float]:
        return None if self.vacuous else self.numerator / self.denominator

    @property
    def coherent(self) -> bool:
        return self.vacuous or self.numerator == self.denominator

    def meets(self, tau: float) -> bool:
        return self.vacuous or self.numerator >= tau * self.denominator

    def to_json(self) -> dict:
        if self.vacuous:
            return {"kind": "vacuous"}
        return {"kind": "ratio", "numerator": self.numerator, "denominator": self.denominator}


VACUOUS = CoherenceValue(0, 0)


def tau_coherence(rule: Rule, table: ClassifierTable) -> CoherenceValue:
    schema = table.schema
    heads = class_extent(schema, rule.head)
    covered = [p for p in table.points if _eval(schema, rule.body, p)]
    if not covered:
        return VACUOUS
    agreeing = sum(1 for p in covered if table.label(p) in heads)
    return CoherenceValue(agreeing, len(covered))


def is_coherent(rule: Rule, table: ClassifierTable) -> bool:
    return tau_coherence(rule, table).coherent


def set_coherent(rules: Iterable[Rule], table: ClassifierTable) -> bool:
    return all(is_coherent(r, table) for r in rules)


# ---------------------------------------------------------------------------
# Completeness


@dataclass(frozen=True)
class CompletenessReport:
    complete: bool
    missing: tuple[DataPoint, ...]
    extras: tuple[str, ...]


def check_complete(rules: Iterable[Rule], table: ClassifierTable) -> CompletenessReport:
    """The rule set represents exactly the table: one instance rule per point,
    mapping it to the predicted class. Canonically equal duplicates count once.
    """
    from .language import instance_point, is_instance_rule

    schema = table.schema
    wanted: dict[DataPoint, str] = {
        p: label for p, label in zip(table.points, table.labels)
    }
    matched: set[DataPoint] = set()
    extras: list[str] = []
    seen_canonical = set()
    for r in rules:
        if r in seen_canonical:
            extras.append(r.id)
            continue
        seen_canonical.add(r)
        if not is_instance_rule(schema, r):
            extras.append(r.id)
            continue
        point = instance_point(schema, r)
        heads = class_extent(schema, r.head)
        if point in wanted and heads == {wanted[point]}:
            matched.add(point)
        else:
            extras.append(r.id)
    missing = tuple(p for p in table.points if p not in matched)
    return CompletenessReport(not missing and not extras, missing, tuple(extras))


def ensure_feedback_rule(schema: Schema, rule: Rule, scope: Scope = FULL_UNIVERSE) -> None:
    """Raise unless the rule is usable as revision input: schema-valid and
    not self-conflicting (satisfiable body with an empty head extent)."""
    from .language import validate_rule

    validate_rule(schema, rule)
    point = self_conflict(schema, rule, FULL_UNIVERSE)
    if point is not None:
        raise ValidationError(
            f"rule {rule.id!r} is self-inconsistent: its head denotes no class "
            f"but its body covers {point!r}"
        )
