"""Tokenizer and recursive-descent parser for the `.xkb` rule DSL.

Grammar:
    doc    := schema_block stmt*
    schema_block := "schema" "{" feat+ cls "}"
    feat   := "feature" ID ":" "{" VAL ("," VAL)* "}" ";"
    cls    := "classes" "{" ID ("," ID)* "}" ";"
    stmt   := ("data" | "rule") ID ":" ff "=>" cf ";"
    ff     := fand ("|" fand)*
    fand   := fneg ("&" fneg)*
    fneg   := "!" fneg | "(" ff ")" | ID "=" VAL | "true" | "false"
    cf     mirrors ff with bare class identifiers as atoms

`#` starts a line comment. Precedence: `!` > `&` > `|`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, SchemaError, ValidationError
from .language import (
    And,
    ClassAtom,
    Document,
    FALSE,
    Feature,
    FeatureAtom,
    Formula,
    KEYWORDS,
    Not,
    Or,
    Rule,
    Schema,
    TRUE,
    _ID_RE,
    fresh_rule_id,
    is_instance_body,
    canonical_formula,
)

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<arrow>=>)
      | (?P<punct>[{}():;,=!&|])
      | (?P<word>[A-Za-z0-9_.\-]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "word" | "punct" | "arrow" | "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, line, col))  # type: ignore[arg-type]
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, expected: tuple[str, ...] = ()) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.column, expected)

    def expect_punct(self, char: str) -> Token:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == char:
            return self.advance()
        raise self.fail(f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
                        expected=(f"'{char}'",))

    def expect_keyword(self, *words: str) -> Token:
        tok = self.peek()
        if tok.kind == "word" and tok.text in words:
            return self.advance()
        raise self.fail(
            f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            expected=tuple(f"'{w}'" for w in words),
        )

    def expect_identifier(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind == "word" and _ID_RE.match(tok.text) and tok.text not in KEYWORDS:
            return self.advance()
        raise self.fail(
            f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            expected=(what,),
        )

    def expect_value(self) -> Token:
        tok = self.peek()
        if tok.kind == "word":
            return self.advance()
        raise self.fail(
            f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            expected=("value",),
        )

    def at_punct(self, char: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == char

    # -- schema block --------------------------------------------------------

    def parse_schema_block(self) -> Schema:
        self.expect_keyword("schema")
        self.expect_punct("{")
        features: list[Feature] = []
        seen_features: set[str] = set()
        while True:
            tok = self.peek()
            if tok.kind == "word" and tok.text == "feature":
                self.advance()
                name_tok = self.expect_identifier("feature name")
                if name_tok.text in seen_features:
                    raise ValidationError(
                        f"duplicate feature {name_tok.text!r}", name_tok.line, name_tok.column
                    )
                seen_features.add(name_tok.text)
                self.expect_punct(":")
                self.expect_punct("{")
                values = [self.expect_value().text]
                while self.at_punct(","):
                    self.advance()
                    values.append(self.expect_value().text)
                self.expect_punct("}")
                self.expect_punct(";")
                if len(set(values)) != len(values):
                    raise ValidationError(
                        f"duplicate domain value in feature {name_tok.text!r}",
                        name_tok.line,
                        name_tok.column,
                    )
                features.append(Feature(name_tok.text, tuple(values)))
            elif tok.kind == "word" and tok.text == "classes":
                break
            else:
                raise self.fail(
                    f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
                    expected=("'feature'", "'classes'"),
                )
        cls_tok = self.expect_keyword("classes")
        self.expect_punct("{")
        classes = [self.expect_identifier("class name").text]
        while self.at_punct(","):
            self.advance()
            classes.append(self.expect_identifier("class name").text)
        self.expect_punct("}")
        self.expect_punct(";")
        self.expect_punct("}")
        if not features:
            raise ValidationError("schema declares no features", cls_tok.line, cls_tok.column)
        try:
            return Schema(tuple(features), tuple(classes))
        except SchemaError as exc:
            raise ValidationError(str(exc), cls_tok.line, cls_tok.column) from exc

    # -- formulas ------------------------------------------------------------

    def parse_feature_formula(self, schema: Schema) -> Formula:
        return self._parse_or(schema, class_side=False)

    def parse_class_formula(self, schema: Schema) -> Formula:
        return self._parse_or(schema, class_side=True)

    def _parse_or(self, schema: Schema, class_side: bool) -> Formula:
        parts = [self._parse_and(schema, class_side)]
        while self.at_punct("|"):
            self.advance()
            parts.append(self._parse_and(schema, class_side))
        if len(parts) == 1:
            return parts[0]
        flat: list[Formula] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, Or) else (p,))
        return Or(tuple(flat))

    def _parse_and(self, schema: Schema, class_side: bool) -> Formula:
        parts = [self._parse_neg(schema, class_side)]
        while self.at_punct("&"):
            self.advance()
            parts.append(self._parse_neg(schema, class_side))
        if len(parts) == 1:
            return parts[0]
        flat: list[Formula] = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, And) else (p,))
        return And(tuple(flat))

    def _parse_neg(self, schema: Schema, class_side: bool) -> Formula:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == "!":
            self.advance()
            return Not(self._parse_neg(schema, class_side))
        if tok.kind == "punct" and tok.text == "(":
            self.advance()
            inner = self._parse_or(schema, class_side)
            self.expect_punct(")")
            return inner
        if tok.kind == "word":
            if tok.text == "true":
                self.advance()
                return TRUE
            if tok.text == "false":
                self.advance()
                return FALSE
            return self._parse_atom(schema, class_side)
        raise self.fail(
            f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            expected=("'!'", "'('", "atom", "'true'", "'false'"),
        )

    def _parse_atom(self, schema: Schema, class_side: bool) -> Formula:
        tok = self.expect_value()
        if class_side:
            if tok.text not in schema.classes:
                raise ValidationError(f"unknown class {tok.text!r}", tok.line, tok.column)
            return ClassAtom(tok.text)
        if not schema.has_feature(tok.text):
            raise ValidationError(f"unknown feature {tok.text!r}", tok.line, tok.column)
        self.expect_punct("=")
        val = self.expect_value()
        if val.text not in schema.feature(tok.text).values:
            raise ValidationError(
                f"unknown value {val.text!r} for feature {tok.text!r}", val.line, val.column
            )
        return FeatureAtom(tok.text, val.text)

    # -- statements ------------------------------------------------------------

    def parse_statement(self, schema: Schema) -> Rule:
        kw = self.expect_keyword("data", "rule")
        id_tok = self.expect_identifier("rule id")
        self.expect_punct(":")
        body = self.parse_feature_formula(schema)
        tok = self.peek()
        if tok.kind != "arrow":
            raise self.fail(
                f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
                expected=("'=>'",),
            )
        self.advance()
        head = self.parse_class_formula(schema)
        self.expect_punct(";")
        origin = "data" if kw.text == "data" else "explanation"
        if origin == "data":
            self._check_data_rule(schema, id_tok, body, head)
        return Rule(id_tok.text, body, head, origin)

    def _check_data_rule(self, schema: Schema, id_tok: Token, body: Formula, head: Formula):
        seen: set[str] = set()
        parts = body.parts if isinstance(body, And) else (body,)
        for p in parts:
            if not isinstance(p, FeatureAtom):
                raise ValidationError(
                    f"data rule {id_tok.text!r} body must be a conjunction of feature atoms",
                    id_tok.line,
                    id_tok.column,
                )
            if p.feature in seen:
                raise ValidationError(
                    f"feature {p.feature!r} repeated in data rule {id_tok.text!r}",
                    id_tok.line,
                    id_tok.column,
                )
            seen.add(p.feature)
        missing = [f.name for f in schema.features if f.name not in seen]
        if missing:
            raise ValidationError(
                f"data rule {id_tok.text!r} must assign every feature exactly once "
                f"(missing: {', '.join(missing)})",
                id_tok.line,
                id_tok.column,
            )
        if not isinstance(head, ClassAtom):
            raise ValidationError(
                f"data rule {id_tok.text!r} head must be a single class atom",
                id_tok.line,
                id_tok.column,
            )


def parse_document(text: str) -> Document:
    p = _Parser(text)
    schema = p.parse_schema_block()
    rules: list[Rule] = []
    seen_ids: set[str] = set()
    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind != "word" or tok.text not in ("data", "rule"):
            raise p.fail(
                f"found {tok.text!r}",
                expected=("'data'", "'rule'"),
            )
        id_tok = p.tokens[p.pos + 1]
        rule = p.parse_statement(schema)
        if rule.id in seen_ids:
            raise ValidationError(f"duplicate rule id {rule.id!r}", id_tok.line, id_tok.column)
        seen_ids.add(rule.id)
        rules.append(rule)
    return Document(schema, tuple(rules))


def parse_rule(schema: Schema, text: str) -> Rule:
    """Parse a single feedback rule.

    Accepts `body => head`, optionally wrapped as `rule id: body => head;`
    (the terminator is optional in both forms). Rules without an explicit id
    get a deterministic content-derived one. Origin is always `feedback`.
    """
    p = _Parser(text)
    tok = p.peek()
    if tok.kind == "eof":
        raise ParseError("empty rule", tok.line, tok.column, expected=("rule",))
    rule_id = None
    if tok.kind == "word" and tok.text == "rule":
        p.advance()
        rule_id = p.expect_identifier("rule id").text
        p.expect_punct(":")
    body = p.parse_feature_formula(schema)
    arrow = p.peek()
    if arrow.kind != "arrow":
        raise p.fail(
            f"found {arrow.text!r}" if arrow.kind != "eof" else "unexpected end of input",
            expected=("'=>'",),
        )
    p.advance()
    head = p.parse_class_formula(schema)
    if p.at_punct(";"):
        p.advance()
    end = p.peek()
    if end.kind != "eof":
        raise p.fail(f"trailing input {end.text!r}", expected=("end of input",))
    if rule_id is None:
        rule_id = fresh_rule_id(body, head)
    return Rule(rule_id, body, head, origin="feedback")
