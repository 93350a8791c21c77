"""Turtle subset reader/writer for policies.

Supported productions: ``@prefix`` directives, prefixed names, absolute IRIs
in angle brackets, labeled blank nodes (``_:x``), anonymous blank nodes
(``[...]``), object lists (comma), predicate lists (semicolon), plain and
typed (``^^``) string literals, the ``a`` keyword, and ``#`` comments.
Collections, ``@base``, language tags, and multiline literals are out of
scope. All failures raise :class:`ParseError` with a source location; the
parser never raises anything else, regardless of input.

Serialization is canonical: fixed prefix block, rules ordered permissions <
prohibitions < duties then by target, constraints ordered by left operand,
and anonymous blank nodes for all nested structure. Serializing the same
policy twice yields byte-identical text, and parsing the output yields a
policy that is ``semantic_equals`` to the input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from . import vocab
from .model import (
    ActionExpression,
    Annotation,
    Asset,
    Constraint,
    Iri,
    Policy,
    PolicyKind,
    Rule,
    RuleKind,
    TypedLiteral,
    XSD_STRING,
    literal_is_valid,
    rule_key,
    constraint_key,
)

_MAX_NESTING = 100

_PNAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_LOCAL_OK_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}
_ESCAPES_OUT = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


@dataclass(frozen=True)
class SourceLocation:
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError("source locations are 1-based")


class ParseError(Exception):
    """Raised for any malformed input, with the offending location."""

    def __init__(self, location: SourceLocation, message: str, snippet: str = "") -> None:
        if not message:
            raise ValueError("message must be non-empty")
        self.location = location
        self.message = message
        self.snippet = snippet
        detail = f" (near {snippet!r})" if snippet else ""
        super().__init__(f"line {location.line}, column {location.column}: {message}{detail}")


@dataclass(frozen=True)
class BlankNode:
    label: str


Node = Union[Iri, BlankNode]
Term = Union[Iri, BlankNode, TypedLiteral]


@dataclass(frozen=True)
class _Token:
    type: str
    value: str
    line: int
    col: int

    @property
    def location(self) -> SourceLocation:
        return SourceLocation(self.line, self.col)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i, n = 1, 1, 0, len(text)

    def err(msg: str, snippet: str = "") -> ParseError:
        return ParseError(SourceLocation(line, col), msg, snippet)

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col

        def tok(type_: str, value: str) -> None:
            tokens.append(_Token(type_, value, start_line, start_col))

        if ch == "<":
            j = i + 1
            while j < n and text[j] not in ">\n":
                j += 1
            if j >= n or text[j] != ">":
                raise err("unterminated IRI", text[i : min(i + 20, n)])
            tok("iriref", text[i + 1 : j])
            col += j + 1 - i
            i = j + 1
            continue
        if ch == '"':
            j = i + 1
            out: list[str] = []
            while j < n:
                c = text[j]
                if c == "\n":
                    raise err("unterminated string literal")
                if c == "\\":
                    if j + 1 >= n:
                        raise err("unterminated escape")
                    esc = text[j + 1]
                    if esc not in _ESCAPES:
                        raise err(f"unsupported escape \\{esc}")
                    out.append(_ESCAPES[esc])
                    j += 2
                    continue
                if c == '"':
                    break
                out.append(c)
                j += 1
            if j >= n:
                raise err("unterminated string literal")
            tok("string", "".join(out))
            col += j + 1 - i
            i = j + 1
            continue
        if text.startswith("^^", i):
            tok("carets", "^^")
            i += 2
            col += 2
            continue
        if text.startswith("_:", i):
            m = _PNAME_RE.match(text, i + 2)
            if m is None:
                raise err("malformed blank node label", text[i : i + 10])
            tok("blank", m.group(0))
            col += m.end() - i
            i = m.end()
            continue
        if text.startswith("@prefix", i):
            tok("prefix_kw", "@prefix")
            i += 7
            col += 7
            continue
        if ch == "@":
            raise err("unsupported directive", text[i : i + 10])
        if ch in ".;,[]":
            tok({".": "dot", ";": "semi", ",": "comma", "[": "lbracket", "]": "rbracket"}[ch], ch)
            i += 1
            col += 1
            continue
        m = _PNAME_RE.match(text, i)
        if m is not None:
            name = m.group(0)
            j = m.end()
            if j < n and text[j] == ":":
                # prefixed name: prefix ':' local
                k = j + 1
                k2 = k
                while k2 < n and (text[k2].isalnum() or text[k2] in "_-.%"):
                    k2 += 1
                # a trailing dot belongs to the statement terminator
                while k2 > k and text[k2 - 1] == ".":
                    k2 -= 1
                tok("pname", name + ":" + text[k:k2])
                col += k2 - i
                i = k2
                continue
            if name == "a":
                tok("a", "a")
                col += j - i
                i = j
                continue
            raise err(f"bare word {name!r} is not valid here", name)
        if ch == ":":
            # empty-prefix name, e.g. ":local"
            k = i + 1
            while k < n and (text[k].isalnum() or text[k] in "_-.%"):
                k += 1
            while k > i + 1 and text[k - 1] == ".":
                k -= 1
            tok("pname", text[i:k])
            col += k - i
            i = k
            continue
        raise err(f"unexpected character {ch!r}", ch)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class TurtleGraph:
    """Triples grouped by subject, with prefix map and first-seen locations."""

    def __init__(self) -> None:
        self.prefixes: dict[str, str] = {}
        self.statements: dict[Node, list[tuple[Iri, Term]]] = {}
        self.order: list[Node] = []
        self.locations: dict[Node, SourceLocation] = {}

    def note(self, node: Node, location: SourceLocation) -> None:
        self.locations.setdefault(node, location)

    def add(self, subject: Node, predicate: Iri, obj: Term) -> None:
        if subject not in self.statements:
            self.statements[subject] = []
            self.order.append(subject)
        self.statements[subject].append((predicate, obj))

    def props(self, node: Node) -> list[tuple[Iri, Term]]:
        return self.statements.get(node, [])

    def objects(self, node: Node, predicate: Iri) -> list[Term]:
        return [o for p, o in self.props(node) if p == predicate]

    def location_of(self, node: Node) -> SourceLocation:
        return self.locations.get(node, SourceLocation(1, 1))

    def subjects_of_type(self, *types: Iri) -> list[Node]:
        wanted = set(types)
        return [
            s
            for s in self.order
            if any(p == vocab.RDF_TYPE and o in wanted for p, o in self.statements[s])
        ]


class _Parser:
    def __init__(self, tokens: list[_Token]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.graph = TurtleGraph()
        self._blank_counter = 0
        self._depth = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, type_: str, what: str) -> _Token:
        tok = self.next()
        if tok.type != type_:
            raise ParseError(tok.location, f"expected {what}", tok.value)
        return tok

    def fresh_blank(self) -> BlankNode:
        self._blank_counter += 1
        return BlankNode(f"anon{self._blank_counter}")

    def resolve_pname(self, tok: _Token) -> Iri:
        prefix, _, local = tok.value.partition(":")
        if prefix not in self.graph.prefixes:
            raise ParseError(tok.location, f"undefined prefix {prefix!r}", tok.value)
        try:
            return Iri(self.graph.prefixes[prefix] + local)
        except ValueError as exc:
            raise ParseError(tok.location, str(exc), tok.value) from None

    def parse_document(self) -> TurtleGraph:
        while True:
            tok = self.peek()
            if tok.type == "eof":
                return self.graph
            if tok.type == "prefix_kw":
                self._parse_prefix()
            else:
                self._parse_triples()

    def _parse_prefix(self) -> None:
        self.next()
        name = self.expect("pname", "prefix name")
        prefix, _, local = name.value.partition(":")
        if local:
            raise ParseError(name.location, "prefix declaration must end with ':'", name.value)
        iri = self.expect("iriref", "namespace IRI")
        self.expect("dot", "'.' after @prefix")
        self.graph.prefixes[prefix] = iri.value

    def _parse_triples(self) -> None:
        subject = self._parse_subject()
        self._parse_predicate_object_list(subject)
        self.expect("dot", "'.' at end of statement")

    def _parse_subject(self) -> Node:
        tok = self.next()
        if tok.type == "iriref":
            node = self._iri_from_token(tok)
        elif tok.type == "pname":
            node = self.resolve_pname(tok)
        elif tok.type == "blank":
            node = BlankNode(tok.value)
        elif tok.type == "lbracket":
            node = self.fresh_blank()
            self.graph.note(node, tok.location)
            self._parse_anon_body(node, tok)
        else:
            raise ParseError(tok.location, "expected a subject", tok.value)
        self.graph.note(node, tok.location)
        return node

    def _iri_from_token(self, tok: _Token) -> Iri:
        try:
            return Iri(tok.value)
        except ValueError as exc:
            raise ParseError(tok.location, str(exc), tok.value) from None

    def _parse_predicate_object_list(self, subject: Node) -> None:
        while True:
            tok = self.peek()
            if tok.type in ("dot", "rbracket", "eof"):
                return
            predicate = self._parse_predicate()
            self._parse_object(subject, predicate)
            while self.peek().type == "comma":
                self.next()
                self._parse_object(subject, predicate)
            if self.peek().type == "semi":
                while self.peek().type == "semi":
                    self.next()
                continue
            return

    def _parse_predicate(self) -> Iri:
        tok = self.next()
        if tok.type == "a":
            return vocab.RDF_TYPE
        if tok.type == "iriref":
            return self._iri_from_token(tok)
        if tok.type == "pname":
            return self.resolve_pname(tok)
        raise ParseError(tok.location, "expected a predicate", tok.value)

    def _parse_object(self, subject: Node, predicate: Iri) -> None:
        tok = self.next()
        if tok.type == "iriref":
            obj: Term = self._iri_from_token(tok)
        elif tok.type == "pname":
            obj = self.resolve_pname(tok)
        elif tok.type == "blank":
            obj = BlankNode(tok.value)
            self.graph.note(obj, tok.location)
        elif tok.type == "lbracket":
            node = self.fresh_blank()
            self.graph.note(node, tok.location)
            self._parse_anon_body(node, tok)
            obj = node
        elif tok.type == "string":
            obj = self._parse_literal(tok)
        else:
            raise ParseError(tok.location, "expected an object", tok.value)
        self.graph.add(subject, predicate, obj)

    def _parse_anon_body(self, node: BlankNode, open_tok: _Token) -> None:
        self._depth += 1
        if self._depth > _MAX_NESTING:
            raise ParseError(open_tok.location, "blank node nesting too deep")
        # register even when empty so [] counts as defined
        self.graph.statements.setdefault(node, [])
        self.graph.order.append(node)
        if self.peek().type != "rbracket":
            self._parse_predicate_object_list(node)
        self.expect("rbracket", "']'")
        self._depth -= 1

    def _parse_literal(self, tok: _Token) -> TypedLiteral:
        if self.peek().type == "carets":
            self.next()
            dt_tok = self.next()
            if dt_tok.type == "iriref":
                datatype = self._iri_from_token(dt_tok)
            elif dt_tok.type == "pname":
                datatype = self.resolve_pname(dt_tok)
            else:
                raise ParseError(dt_tok.location, "expected a datatype IRI", dt_tok.value)
            lit = TypedLiteral(tok.value, datatype)
            if not literal_is_valid(lit):
                raise ParseError(
                    tok.location,
                    f"malformed {datatype.value.rsplit('#', 1)[-1]} literal",
                    tok.value,
                )
            return lit
        return TypedLiteral(tok.value, XSD_STRING)


def parse_graph(text: str) -> TurtleGraph:
    """Tokenize and parse into a raw triple graph without interpretation."""
    parser = _Parser(_tokenize(text))
    return parser.parse_document()


_RULE_PREDICATES = {
    vocab.ODRL_PERMISSION: RuleKind.PERMISSION,
    vocab.ODRL_PROHIBITION: RuleKind.PROHIBITION,
    vocab.ODRL_OBLIGATION: RuleKind.DUTY,
    vocab.ODRL_DUTY: RuleKind.DUTY,
}

_KNOWN_RULE_PROPS = {
    vocab.RDF_TYPE,
    vocab.ODRL_TARGET,
    vocab.ODRL_ASSIGNER,
    vocab.ODRL_ASSIGNEE,
    vocab.ODRL_ACTION,
    vocab.ODRL_CONSTRAINT,
    vocab.ODRL_OBLIGATION,
    vocab.ODRL_DUTY,
}

_KNOWN_POLICY_PROPS = {
    vocab.RDF_TYPE,
    vocab.ODRL_PROFILE_PROP,
    vocab.ODRL_PERMISSION,
    vocab.ODRL_PROHIBITION,
    vocab.ODRL_OBLIGATION,
    vocab.ODRL_DUTY,
}


class _Extractor:
    def __init__(self, graph: TurtleGraph) -> None:
        self.graph = graph

    def fail(self, node: Node, message: str) -> ParseError:
        loc = self.graph.location_of(node)
        label = node.value if isinstance(node, Iri) else f"_:{node.label}"
        return ParseError(loc, message, label)

    def require_defined(self, node: Term, role: str) -> Node:
        if isinstance(node, TypedLiteral):
            raise ParseError(SourceLocation(1, 1), f"{role} must not be a literal", node.lexical)
        if isinstance(node, BlankNode) and node not in self.graph.statements:
            raise self.fail(node, f"blank node used as {role} is never defined")
        return node

    def single(self, node: Node, predicate: Iri, what: str) -> Term | None:
        objs = self.graph.objects(node, predicate)
        if not objs:
            return None
        if len(objs) > 1:
            raise self.fail(node, f"multiple values for {what}")
        return objs[0]

    def single_iri(self, node: Node, predicate: Iri, what: str) -> Iri | None:
        obj = self.single(node, predicate, what)
        if obj is None:
            return None
        if not isinstance(obj, Iri):
            raise self.fail(node, f"{what} must be an IRI")
        return obj

    def policies(self) -> list[Policy]:
        out = []
        for subject in self.graph.subjects_of_type(*vocab.POLICY_CLASS_KINDS):
            if not isinstance(subject, Iri):
                raise self.fail(subject, "policy subject must be an IRI")
            out.append(self.policy(subject))
        return out

    def policy(self, subject: Iri) -> Policy:
        kind = PolicyKind.SET
        for t in self.graph.objects(subject, vocab.RDF_TYPE):
            name = vocab.POLICY_CLASS_KINDS.get(t) if isinstance(t, Iri) else None
            if name:
                kind = PolicyKind(name)
        profiles = []
        for obj in self.graph.objects(subject, vocab.ODRL_PROFILE_PROP):
            if not isinstance(obj, Iri):
                raise self.fail(subject, "odrl:profile must be an IRI")
            profiles.append(obj)
        rules = []
        for predicate, rule_kind in _RULE_PREDICATES.items():
            for obj in self.graph.objects(subject, predicate):
                node = self.require_defined(obj, "a rule")
                rules.append(self.rule(node, rule_kind))
        annotations = self.annotations(subject, _KNOWN_POLICY_PROPS)
        return Policy(
            uid=subject,
            kind=kind,
            profiles=tuple(profiles),
            rules=tuple(rules),
            annotations=annotations,
        )

    def rule(self, node: Node, kind: RuleKind, nested: bool = False) -> Rule:
        if isinstance(node, Iri) and node not in self.graph.statements:
            raise self.fail(node, "rule is never defined")
        action_obj = self.single(node, vocab.ODRL_ACTION, "odrl:action")
        if action_obj is None:
            raise self.fail(node, "rule has no odrl:action")
        action = self.action(node, action_obj)
        constraints = tuple(
            self.constraint(self.require_defined(o, "a constraint"))
            for o in self.graph.objects(node, vocab.ODRL_CONSTRAINT)
        )
        duties = []
        for predicate in (vocab.ODRL_OBLIGATION, vocab.ODRL_DUTY):
            for obj in self.graph.objects(node, predicate):
                duty_node = self.require_defined(obj, "a duty")
                duties.append(self.rule(duty_node, RuleKind.DUTY, nested=True))
        try:
            return Rule(
                kind=kind,
                action=action,
                target=self.single_iri(node, vocab.ODRL_TARGET, "odrl:target"),
                assigner=self.single_iri(node, vocab.ODRL_ASSIGNER, "odrl:assigner"),
                assignee=self.single_iri(node, vocab.ODRL_ASSIGNEE, "odrl:assignee"),
                constraints=constraints,
                duties=tuple(duties),
                annotations=self.annotations(node, _KNOWN_RULE_PROPS),
            )
        except ValueError as exc:
            raise self.fail(node, str(exc)) from None

    def action(self, rule_node: Node, obj: Term) -> ActionExpression:
        if isinstance(obj, Iri) and obj not in self.graph.statements:
            return ActionExpression(obj)
        node = self.require_defined(obj, "an action")
        if not self.graph.props(node):
            raise self.fail(node, "action expression is empty")
        value = self.single_iri(node, vocab.RDF_VALUE, "rdf:value")
        if value is None:
            if isinstance(node, Iri):
                return ActionExpression(node)
            raise self.fail(node, "action expression has no rdf:value")
        refinements = tuple(
            self.constraint(self.require_defined(o, "a refinement"))
            for o in self.graph.objects(node, vocab.ODRL_REFINEMENT)
        )
        return ActionExpression(value, refinements)

    def constraint(self, node: Node) -> Constraint:
        left = self.single_iri(node, vocab.ODRL_LEFT_OPERAND, "odrl:leftOperand")
        if left is None:
            raise self.fail(node, "constraint has no odrl:leftOperand")
        op_iri = self.single_iri(node, vocab.ODRL_OPERATOR, "odrl:operator")
        if op_iri is None:
            raise self.fail(node, "constraint has no odrl:operator")
        operator = vocab.OPERATOR_IRIS.get(op_iri)
        if operator is None:
            raise self.fail(node, f"unknown operator {op_iri.value}")
        right = self.single(node, vocab.ODRL_RIGHT_OPERAND, "odrl:rightOperand")
        if right is None:
            raise self.fail(node, "constraint has no odrl:rightOperand")
        if isinstance(right, BlankNode):
            raise self.fail(node, "odrl:rightOperand must be an IRI or literal")
        return Constraint(left, operator, right)

    def annotations(self, node: Node, known: set[Iri]) -> tuple[Annotation, ...]:
        out = []
        for predicate, obj in self.graph.props(node):
            if predicate in known or predicate == vocab.ODRL_REFINEMENT:
                continue
            if predicate in (vocab.ODRL_LEFT_OPERAND, vocab.ODRL_OPERATOR, vocab.ODRL_RIGHT_OPERAND):
                continue
            if isinstance(obj, BlankNode):
                continue  # structured unknown content is dropped, not rejected
            out.append(Annotation(predicate, obj))
        return tuple(out)


def parse(text: str) -> list[Policy]:
    """Parse every policy subject in the text, in document order."""
    graph = parse_graph(text)
    return _Extractor(graph).policies()


def parse_assets(text: str) -> list[Asset]:
    graph = parse_graph(text)
    extractor = _Extractor(graph)
    out = []
    for subject in graph.subjects_of_type(vocab.ODRL_ASSET_CLASS):
        if not isinstance(subject, Iri):
            raise extractor.fail(subject, "asset subject must be an IRI")
        title_obj = extractor.single(subject, vocab.DC11_TITLE, "dc11:title")
        title = title_obj.lexical if isinstance(title_obj, TypedLiteral) else None
        out.append(Asset(uid=subject, title=title))
    return out


# ---------------------------------------------------------------------------
# canonical serialization

_PREFIX_BLOCK = (
    f"@prefix odrl: <{vocab.ODRL}> .\n"
    f"@prefix dc11: <{vocab.DC11}> .\n"
    f"@prefix xsd: <{vocab.XSD}> .\n"
    f"@prefix rdf: <{vocab.RDF}> .\n"
    f"@prefix dsp: <{vocab.DSP}> .\n"
)

_NAMESPACES = (
    ("odrl", vocab.ODRL),
    ("dc11", vocab.DC11),
    ("xsd", vocab.XSD),
    ("rdf", vocab.RDF),
    ("dsp", vocab.DSP),
)

_KIND_CLASS = {
    PolicyKind.SET: "odrl:Set",
    PolicyKind.OFFER: "odrl:Offer",
    PolicyKind.AGREEMENT: "odrl:Agreement",
}

_RULE_CLASS = {
    RuleKind.PERMISSION: ("odrl:permission", "odrl:Permission"),
    RuleKind.PROHIBITION: ("odrl:prohibition", "odrl:Prohibition"),
    RuleKind.DUTY: ("odrl:obligation", "odrl:Obligation"),
}


def _compress(iri: Iri) -> str:
    for prefix, ns in _NAMESPACES:
        if iri.value.startswith(ns):
            local = iri.value[len(ns):]
            if local == "" or _LOCAL_OK_RE.match(local):
                return f"{prefix}:{local}"
    return f"<{iri.value}>"


def _escape(text: str) -> str:
    return "".join(_ESCAPES_OUT.get(ch, ch) for ch in text)


def _operand_text(operand: Iri | TypedLiteral) -> str:
    if isinstance(operand, Iri):
        return _compress(operand)
    if operand.datatype == XSD_STRING:
        return f'"{_escape(operand.lexical)}"'
    return f'"{_escape(operand.lexical)}"^^{_compress(operand.datatype)}'


def _constraint_lines(c: Constraint, indent: str) -> list[str]:
    pad = indent + "  "
    return [
        indent + "[",
        f"{pad}odrl:leftOperand {_compress(c.left_operand)} ;",
        f"{pad}odrl:operator odrl:{c.operator.value} ;",
        f"{pad}odrl:rightOperand {_operand_text(c.right_operand)}",
        indent + "]",
    ]


def _sorted_constraints(constraints: Iterable[Constraint]) -> list[Constraint]:
    return sorted(constraints, key=constraint_key)


def _action_text(action: ActionExpression, indent: str) -> list[str]:
    if not action.refinements:
        return [_compress(action.action)]
    pad = indent + "  "
    lines = ["[", f"{pad}a odrl:Action ;", f"{pad}rdf:value {_compress(action.action)} ;"]
    refs = _sorted_constraints(action.refinements)
    for i, ref in enumerate(refs):
        block = _constraint_lines(ref, pad)
        block[0] = f"{pad}odrl:refinement ["
        sep = " ;" if i < len(refs) - 1 else ""
        block[-1] = f"{pad}]{sep}"
        lines.extend(block)
    lines.append(indent + "]")
    return lines


def _rule_lines(rule: Rule, indent: str) -> list[str]:
    pad = indent + "  "
    parts: list[str] = [f"{pad}a {_RULE_CLASS[rule.kind][1]}"]
    if rule.target is not None:
        parts.append(f"{pad}odrl:target {_compress(rule.target)}")
    if rule.assigner is not None:
        parts.append(f"{pad}odrl:assigner {_compress(rule.assigner)}")
    if rule.assignee is not None:
        parts.append(f"{pad}odrl:assignee {_compress(rule.assignee)}")

    action_lines = _action_text(rule.action, pad)
    if len(action_lines) == 1:
        parts.append(f"{pad}odrl:action {action_lines[0]}")
    else:
        joined = [f"{pad}odrl:action " + action_lines[0]] + action_lines[1:]
        parts.append("\n".join(joined))

    for c in _sorted_constraints(rule.constraints):
        block = _constraint_lines(c, pad)
        block[0] = f"{pad}odrl:constraint ["
        parts.append("\n".join(block))
    for duty in sorted(rule.duties, key=rule_key):
        block = _rule_lines(duty, pad)
        block[0] = f"{pad}odrl:obligation ["
        parts.append("\n".join(block))
    for ann in sorted(rule.annotations, key=lambda a: (a.predicate.value, _operand_text(a.value))):
        parts.append(f"{pad}{_compress(ann.predicate)} {_operand_text(ann.value)}")

    lines = [indent + "["]
    for i, part in enumerate(parts):
        sep = " ;" if i < len(parts) - 1 else ""
        lines.append(part + sep)
    lines.append(indent + "]")
    return lines


def _rule_sort_key(rule: Rule) -> tuple:
    kind_order = {RuleKind.PERMISSION: 0, RuleKind.PROHIBITION: 1, RuleKind.DUTY: 2}
    return (kind_order[rule.kind], rule.target.value if rule.target else "", rule_key(rule))


def _policy_lines(policy: Policy) -> list[str]:
    parts: list[str] = [f"  a {_KIND_CLASS[policy.kind]}"]
    for profile in sorted(policy.profiles, key=lambda p: p.value):
        parts.append(f"  odrl:profile {_compress(profile)}")
    for rule in sorted(policy.rules, key=_rule_sort_key):
        block = _rule_lines(rule, "  ")
        block[0] = f"  {_RULE_CLASS[rule.kind][0]} ["
        parts.append("\n".join(block))
    for ann in sorted(policy.annotations, key=lambda a: (a.predicate.value, _operand_text(a.value))):
        parts.append(f"  {_compress(ann.predicate)} {_operand_text(ann.value)}")

    lines = [f"<{policy.uid.value}>"]
    for i, part in enumerate(parts):
        sep = " ;" if i < len(parts) - 1 else " ."
        lines.append(part + sep)
    return lines


def serialize_document(policies: Iterable[Policy]) -> str:
    """Canonical text for several policies: prefix block, then policies
    sorted by uid, blank-line separated."""
    chunks = [_PREFIX_BLOCK]
    for policy in sorted(policies, key=lambda p: p.uid.value):
        chunks.append("\n".join(_policy_lines(policy)) + "\n")
    return "\n".join(chunks)


def serialize(policy: Policy) -> str:
    return serialize_document([policy])
