"""AMR graphs: Penman/JSONL ingestion and question-rooted shortest paths."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

QUESTION_CONCEPT = "question"

# Bare symbols of this shape are treated as variables, anything else as a constant.
_VARIABLE_RE = re.compile(r"^[a-z][a-z]?[0-9]*$")
_TOKEN_RE = re.compile(r'\s*(?:("(?:[^"\\]|\\.)*")|([()/])|(:[^\s()"]*)|([^\s()/"]+))')


class AmrError(ValueError):
    """Base class for AMR ingestion errors."""


class UnbalancedParens(AmrError):
    pass


class DuplicateVariableDefinition(AmrError):
    pass


class EmptyGraph(AmrError):
    pass


class DanglingReentrancy(AmrError):
    pass


class InvalidGraph(AmrError):
    """Graph violates a structural invariant (self-loop, unknown endpoint, ...)."""


class MalformedLine(AmrError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed JSON{': ' + reason if reason else ''}")


class SchemaViolation(AmrError):
    def __init__(self, line_no: int, field_name: str, reason: str = ""):
        self.line_no = line_no
        self.field = field_name
        super().__init__(f"line {line_no}: field {field_name!r}{': ' + reason if reason else ''}")


@dataclass(frozen=True)
class AmrGraph:
    """One parsed AMR for a question-document pair.

    ``nodes`` holds ``(node_id, concept)`` pairs, ``edges`` holds
    ``(src, relation, dst)`` triples over node ids.
    """

    question_id: str
    doc_id: str
    nodes: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(tuple(n) for n in self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        validate(self)

    @property
    def concepts(self) -> dict[str, str]:
        return dict(self.nodes)

    def concept_set(self) -> set[str]:
        return {c for _, c in self.nodes}

    def triple_set(self) -> set[tuple[str, str, str]]:
        c = self.concepts
        return {(c[s], r, c[d]) for s, r, d in self.edges}

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "doc_id": self.doc_id,
            "nodes": [{"id": i, "concept": c} for i, c in self.nodes],
            "edges": [{"src": s, "rel": r, "dst": d} for s, r, d in self.edges],
        }


def validate(g: AmrGraph) -> None:
    ids = [i for i, _ in g.nodes]
    if len(set(ids)) != len(ids):
        raise InvalidGraph(f"duplicate node ids in {g.question_id}/{g.doc_id}")
    for i, c in g.nodes:
        if not isinstance(c, str) or not c:
            raise InvalidGraph(f"node {i!r} has an empty concept")
    known = set(ids)
    for s, r, d in g.edges:
        if s not in known or d not in known:
            raise InvalidGraph(f"edge ({s}, {r}, {d}) references an unknown node")
        if not r:
            raise InvalidGraph(f"edge ({s}, {d}) has an empty relation")
        if s == d:
            raise InvalidGraph(f"self-loop on node {s!r}")


# --------------------------------------------------------------------- Penman


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise AmrError(f"cannot tokenize Penman text at offset {pos}")
        tokens.append(next(g for g in m.groups() if g is not None))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return tokens


def parse_penman(text: str, question_id: str = "", doc_id: str = "") -> AmrGraph:
    """Parse a single Penman s-expression into an :class:`AmrGraph`.

    Reentrant variables may be referenced before their definition. Constants
    (numbers, quoted strings, other bare symbols) become their own nodes with
    synthesized ids ``_c0, _c1, ...``. Relations keep their name without the
    leading colon; ``-of`` inverses are stored as written.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise EmptyGraph("no Penman content")
    depth = 0
    for t in tokens:
        if t == "(":
            depth += 1
        elif t == ")":
            depth -= 1
            if depth < 0:
                raise UnbalancedParens("unexpected ')'")
    if depth != 0:
        raise UnbalancedParens(f"{depth} unclosed '('")
    if tokens[0] != "(":
        raise AmrError("Penman graph must start with '('")

    concepts: dict[str, str] = {}
    order: list[str] = []
    # (src, rel, target, kind) with kind in {"var", "const"}
    raw_edges: list[tuple[str, str, str, str]] = []
    pos = 0

    def parse_node() -> str:
        nonlocal pos
        assert tokens[pos] == "("
        pos += 1
        if pos + 2 >= len(tokens) or tokens[pos + 1] != "/":
            raise AmrError(f"expected '(var / concept' at token {pos}")
        var, concept = tokens[pos], tokens[pos + 2]
        if concept in ("(", ")", "/") or concept.startswith(":"):
            raise AmrError(f"missing concept for variable {var!r}")
        if var in concepts:
            raise DuplicateVariableDefinition(
                f"variable {var!r} bound to {concepts[var]!r} and {concept!r}"
            )
        concepts[var] = _unquote(concept)
        order.append(var)
        pos += 3
        while tokens[pos] != ")":
            role = tokens[pos]
            if not role.startswith(":") or len(role) < 2:
                raise AmrError(f"expected a role at token {pos}, got {role!r}")
            pos += 1
            tgt = tokens[pos]
            if tgt == "(":
                raw_edges.append((var, role[1:], parse_node(), "var"))
            elif tgt in (")", "/") or tgt.startswith(":"):
                raise AmrError(f"role {role} has no target")
            else:
                raw_edges.append((var, role[1:], tgt, "sym"))
                pos += 1
        pos += 1
        return var

    parse_node()
    if pos != len(tokens):
        raise AmrError("trailing content after the top-level graph")

    nodes = [(v, concepts[v]) for v in order]
    edges = []
    n_const = 0
    for src, rel, tgt, kind in raw_edges:
        if kind == "sym" and tgt in concepts:
            kind = "var"
        if kind == "var":
            edges.append((src, rel, tgt))
            continue
        if not tgt.startswith('"') and _VARIABLE_RE.match(tgt):
            raise DanglingReentrancy(f"variable {tgt!r} is used but never defined")
        cid = f"_c{n_const}"
        while cid in concepts:
            n_const += 1
            cid = f"_c{n_const}"
        n_const += 1
        nodes.append((cid, _unquote(tgt)))
        edges.append((src, rel, cid))
    try:
        return AmrGraph(question_id, doc_id, tuple(nodes), tuple(edges))
    except InvalidGraph as exc:
        raise AmrError(str(exc)) from exc


def _unquote(tok: str) -> str:
    if len(tok) >= 2 and tok[0] == tok[-1] == '"':
        return tok[1:-1].replace('\\"', '"')
    return tok


def iter_penman_blocks(text: str) -> Iterator[tuple[str | None, str]]:
    """Split a Penman file into ``(id, graph_text)`` blocks.

    Blocks start at ``# ::id`` lines; other ``#`` comment lines are dropped.
    A file without any ``::id`` line yields a single block with id ``None``.
    """
    current_id = None
    buf: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            m = re.match(r"#\s*::id\s+(.*?)(?:\s+::\S.*)?$", stripped)
            if m:
                if "".join(buf).strip():
                    yield current_id, "\n".join(buf)
                current_id, buf = m.group(1).strip(), []
            continue
        buf.append(line)
    if "".join(buf).strip():
        yield current_id, "\n".join(buf)


def to_penman(g: AmrGraph) -> str:
    """Serialize a graph back to Penman. Requires every node to be reachable
    from the first node along edge direction (one rooted graph)."""
    out_edges: dict[str, list[tuple[str, str]]] = {i: [] for i, _ in g.nodes}
    for s, r, d in g.edges:
        out_edges[s].append((r, d))
    concepts = g.concepts
    seen: set[str] = set()

    def is_const(i: str) -> bool:
        return i.startswith("_c")

    def fmt_const(c: str) -> str:
        if re.fullmatch(r"-?\d+(\.\d+)?|[-+]", c):
            return c
        return '"' + c.replace('"', '\\"') + '"'

    def emit(i: str) -> str:
        seen.add(i)
        parts = [f"({i} / {concepts[i]}"]
        for r, d in out_edges[i]:
            if is_const(d):
                parts.append(f":{r} {fmt_const(concepts[d])}")
                seen.add(d)
            elif d in seen:
                parts.append(f":{r} {d}")
            else:
                parts.append(f":{r} {emit(d)}")
        return " ".join(parts) + ")"

    root = g.nodes[0][0]
    text = emit(root)
    if len(seen) != len(g.nodes):
        raise InvalidGraph("graph is not rooted at its first node; cannot serialize to Penman")
    return text


# ---------------------------------------------------------------------- JSONL


def _require(obj: dict, key: str, typ, line_no: int):
    if key not in obj:
        raise SchemaViolation(line_no, key, "missing")
    if not isinstance(obj[key], typ):
        raise SchemaViolation(line_no, key, f"expected {typ.__name__}")
    return obj[key]


def graph_from_json(obj, line_no: int = 0) -> AmrGraph:
    if not isinstance(obj, dict):
        raise SchemaViolation(line_no, "<root>", "expected an object")
    qid = _require(obj, "question_id", str, line_no)
    did = _require(obj, "doc_id", str, line_no)
    nodes, edges = [], []
    for n in _require(obj, "nodes", list, line_no):
        if not isinstance(n, dict):
            raise SchemaViolation(line_no, "nodes", "entries must be objects")
        nid = _require(n, "id", str, line_no)
        concept = _require(n, "concept", str, line_no)
        if not concept:
            raise SchemaViolation(line_no, "nodes.concept", "empty concept")
        nodes.append((nid, concept))
    if len({i for i, _ in nodes}) != len(nodes):
        raise SchemaViolation(line_no, "nodes.id", "duplicate node id")
    known = {i for i, _ in nodes}
    for e in _require(obj, "edges", list, line_no):
        if not isinstance(e, dict):
            raise SchemaViolation(line_no, "edges", "entries must be objects")
        s = _require(e, "src", str, line_no)
        r = _require(e, "rel", str, line_no)
        d = _require(e, "dst", str, line_no)
        for name, v in (("edges.src", s), ("edges.dst", d)):
            if v not in known:
                raise SchemaViolation(line_no, name, f"unknown node id {v!r}")
        if not r:
            raise SchemaViolation(line_no, "edges.rel", "empty relation")
        if s == d:
            raise SchemaViolation(line_no, "edges", f"self-loop on {s!r}")
        edges.append((s, r, d))
    return AmrGraph(qid, did, tuple(nodes), tuple(edges))


def load_amr_jsonl(stream: IO[str] | Iterable[str]) -> list[AmrGraph]:
    graphs = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, exc.msg) from None
        graphs.append(graph_from_json(obj, line_no))
    return graphs


def dump_amr_jsonl(graphs: Iterable[AmrGraph], stream: IO[str]) -> None:
    for g in graphs:
        stream.write(json.dumps(g.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


# ----------------------------------------------------------------------- SSSP


@dataclass(frozen=True)
class SsspPathSet:
    paths: tuple[tuple[str, ...], ...] = ()
    node_paths: tuple[tuple[str, ...], ...] = field(default=(), compare=False)
    source_concept: str = QUESTION_CONCEPT

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class AmrAugmentedText:
    tokens: tuple[str, ...] = ()

    @property
    def rendered(self) -> str:
        return " ".join(self.tokens)

    def __str__(self) -> str:
        return self.rendered


def bfs_distances(adj: dict[str, list[str]], source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def undirected_adjacency(g: AmrGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {i: [] for i, _ in g.nodes}
    for s, _, d in g.edges:
        if d not in adj[s]:
            adj[s].append(d)
        if s not in adj[d]:
            adj[d].append(s)
    return adj


def sssp_from_question(g: AmrGraph) -> SsspPathSet:
    """Maximal shortest paths from the ``question`` node, edges taken as undirected.

    Each reachable node keeps one shortest path whose predecessor is the
    lexicographically smallest node id at the previous BFS level. Paths whose
    node-id set is contained in another kept path are dropped. Paths are
    ordered by a depth-first walk of the shortest-path tree that visits
    children in node-list order.
    """
    sources = sorted(i for i, c in g.nodes if c == QUESTION_CONCEPT)
    if not sources:
        return SsspPathSet()
    source = sources[0]
    adj = undirected_adjacency(g)
    dist = bfs_distances(adj, source)

    parent: dict[str, str] = {}
    for v, d in dist.items():
        if d > 0:
            parent[v] = min(u for u in adj[v] if dist.get(u) == d - 1)

    position = {i: k for k, (i, _) in enumerate(g.nodes)}
    children: dict[str, list[str]] = {v: [] for v in dist}
    for v, p in parent.items():
        children[p].append(v)
    for kids in children.values():
        kids.sort(key=position.__getitem__)

    candidates: list[tuple[str, ...]] = []
    stack = [(source, (source,))]
    while stack:
        v, path = stack.pop()
        candidates.append(path)
        for c in reversed(children[v]):
            stack.append((c, path + (c,)))

    sets = [frozenset(p) for p in candidates]
    kept = []
    for k, p in enumerate(candidates):
        dominated = any(
            sets[k] < sets[m] or (sets[k] == sets[m] and m < k)
            for m in range(len(candidates))
            if m != k
        )
        if not dominated:
            kept.append(p)

    concepts = g.concepts
    return SsspPathSet(
        paths=tuple(tuple(concepts[i] for i in p) for p in kept),
        node_paths=tuple(kept),
    )


def amr_text(paths: SsspPathSet) -> AmrAugmentedText:
    """Concept words along the paths, in path order, each concept emitted once."""
    seen: set[str] = set()
    tokens = []
    for path in paths.paths:
        for c in path:
            if c not in seen:
                seen.add(c)
                tokens.append(c)
    return AmrAugmentedText(tuple(tokens))
