import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_amr
from grag.amr import (
    AmrGraph,
    DanglingReentrancy,
    DuplicateVariableDefinition,
    EmptyGraph,
    MalformedLine,
    SchemaViolation,
    UnbalancedParens,
    amr_text,
    dump_amr_jsonl,
    iter_penman_blocks,
    load_amr_jsonl,
    parse_penman,
    sssp_from_question,
    to_penman,
)
from oracles import all_shortest_paths_maximal, floyd_warshall

CRUCIFIX_TEXT = ("question cross world-region crucifix number be-located-at country Spain "
                 "religion Catholicism belief worship")


def crucifix_graph():
    chain_a = ["question", "cross", "world-region", "crucifix", "number", "be-located-at", "country", "Spain"]
    chain_b = ["religion", "Catholicism", "belief", "worship"]
    nodes = [(f"a{k}", c) for k, c in enumerate(chain_a)] + [(f"b{k}", c) for k, c in enumerate(chain_b)]
    edges = [(f"a{k}", "ARG1", f"a{k + 1}") for k in range(len(chain_a) - 1)]
    edges += [("a1", "mod", "b0")] + [(f"b{k}", "ARG0", f"b{k + 1}") for k in range(len(chain_b) - 1)]
    return AmrGraph("q1", "p1", tuple(nodes), tuple(edges))


class TestParsePenman:
    def test_two_nodes(self):
        g = parse_penman("(q / question :mod (c / cross))", "q1", "d1")
        assert g.nodes == (("q", "question"), ("c", "cross"))
        assert g.edges == (("q", "mod", "c"),)
        assert (g.question_id, g.doc_id) == ("q1", "d1")

    def test_reentrancy_before_definition(self):
        # hand trace: a-op1->b, b-ARG0->p, a-op2->w, w-ARG0->p
        g = parse_penman("(a / and :op1 (b / believe-01 :ARG0 p) :op2 (w / worship-01 :ARG0 (p / person)))")
        assert sorted(c for _, c in g.nodes) == ["and", "believe-01", "person", "worship-01"]
        assert set(g.edges) == {("a", "op1", "b"), ("b", "ARG0", "p"), ("a", "op2", "w"), ("w", "ARG0", "p")}
        assert len(g.edges) == 4

    def test_duplicate_variable(self):
        with pytest.raises(DuplicateVariableDefinition):
            parse_penman("(q / question :mod (q / other))")

    @pytest.mark.parametrize("text", ["(q / question :mod (c / cross)", "(q / question))"])
    def test_unbalanced(self, text):
        with pytest.raises(UnbalancedParens):
            parse_penman(text)

    @pytest.mark.parametrize("text", ["", "   \n"])
    def test_empty(self, text):
        with pytest.raises(EmptyGraph):
            parse_penman(text)

    def test_dangling(self):
        with pytest.raises(DanglingReentrancy):
            parse_penman("(a / and :op1 p)")

    def test_constants_become_nodes(self):
        g = parse_penman('(c / country :name (n / name :op1 "Spain") :quant 3 :polarity -)')
        concepts = dict(g.nodes)
        consts = {concepts[i] for i, _ in g.nodes if i.startswith("_c")}
        assert consts == {"Spain", "3", "-"}
        assert len({i for i, _ in g.nodes}) == len(g.nodes)

    def test_inverse_role_kept(self):
        g = parse_penman("(p / person :ARG0-of (w / work-01))")
        assert g.edges == (("p", "ARG0-of", "w"),)

    def test_blocks(self):
        text = "# ::id q1 d1\n# ::snt hello\n(a / b)\n\n# ::id q1 d2\n(c / d :mod (e / f))\n"
        blocks = list(iter_penman_blocks(text))
        assert [b[0] for b in blocks] == ["q1 d1", "q1 d2"]
        assert parse_penman(blocks[1][1]).edges == (("c", "mod", "e"),)

    def test_penman_roundtrip(self):
        text = '(a / and :op1 (b / believe-01 :ARG0 (p / person)) :op2 (w / worship-01 :ARG0 p) :quant 4)'
        g = parse_penman(text)
        assert parse_penman(to_penman(g)) == g


class TestJsonl:
    def test_one_line(self):
        line = json.dumps({"question_id": "q", "doc_id": "d", "nodes": [{"id": "a", "concept": "x"}], "edges": []})
        assert len(load_amr_jsonl(io.StringIO(line + "\n"))) == 1

    def test_empty_stream(self):
        assert load_amr_jsonl(io.StringIO("")) == []

    def test_unknown_edge_endpoint(self):
        line = json.dumps({"question_id": "q", "doc_id": "d", "nodes": [{"id": "a", "concept": "x"}],
                           "edges": [{"src": "a", "rel": "mod", "dst": "zz"}]})
        with pytest.raises(SchemaViolation) as err:
            load_amr_jsonl(io.StringIO(line))
        assert err.value.line_no == 1

    def test_malformed(self):
        with pytest.raises(MalformedLine) as err:
            load_amr_jsonl(io.StringIO('{"question_id": "q", "doc_id": "d", "nodes": [], "edges": []}\n{oops\n'))
        assert err.value.line_no == 2

    def test_missing_field(self):
        with pytest.raises(SchemaViolation) as err:
            load_amr_jsonl(io.StringIO('{"question_id": "q", "nodes": [], "edges": []}'))
        assert err.value.field == "doc_id"

    @given(st.integers(0, 2**32 - 1), st.integers(1, 25))
    def test_roundtrip_up_to_renaming(self, seed, n):
        g = random_amr(np.random.default_rng(seed), n, ["a", "b", "c", "d", "e"])
        rename = {i: f"x{k}" for k, (i, _) in enumerate(reversed(g.nodes))}
        renamed = AmrGraph(g.question_id, g.doc_id, tuple((rename[i], c) for i, c in g.nodes),
                           tuple((rename[s], r, rename[d]) for s, r, d in g.edges))
        buf = io.StringIO()
        dump_amr_jsonl([renamed], buf)
        (back,) = load_amr_jsonl(io.StringIO(buf.getvalue()))
        inverse = {v: k for k, v in rename.items()}
        assert AmrGraph(back.question_id, back.doc_id, tuple((inverse[i], c) for i, c in back.nodes),
                        tuple((inverse[s], r, inverse[d]) for s, r, d in back.edges)) == g


class TestSssp:
    def test_worked_example(self):
        paths = sssp_from_question(crucifix_graph())
        assert paths.paths == (
            ("question", "cross", "world-region", "crucifix", "number", "be-located-at", "country", "Spain"),
            ("question", "cross", "religion", "Catholicism", "belief", "worship"),
        )
        assert amr_text(paths).rendered == CRUCIFIX_TEXT

    def test_star(self):
        g = AmrGraph("q", "d", (("q", "question"), ("a", "x"), ("b", "y"), ("c", "z")),
                     (("q", "ARG0", "a"), ("b", "mod", "q"), ("q", "ARG1", "c")))
        paths = sssp_from_question(g).paths
        assert sorted(paths) == [("question", "x"), ("question", "y"), ("question", "z")]

    def test_chain_suppresses_prefix(self):
        g = AmrGraph("q", "d", (("q", "question"), ("a", "a"), ("b", "b")), (("q", "r", "a"), ("a", "r", "b")))
        assert sssp_from_question(g).paths == (("question", "a", "b"),)
        oracle = all_shortest_paths_maximal(["q", "a", "b"], g.edges, "q")
        assert oracle == {frozenset({"q", "a", "b"})}

    def test_no_question(self):
        g = AmrGraph("q", "d", (("a", "x"),), ())
        paths = sssp_from_question(g)
        assert paths.paths == ()
        assert amr_text(paths).rendered == ""

    def test_isolated_question(self):
        g = AmrGraph("q", "d", (("q", "question"), ("a", "x")), ())
        assert sssp_from_question(g).paths == (("question",),)

    def test_multiple_question_nodes_pick_smallest_id(self):
        g = AmrGraph("q", "d", (("z", "question"), ("b", "question"), ("x", "leaf")), (("z", "r", "x"),))
        assert sssp_from_question(g).node_paths == (("b",),)

    def test_tie_break_on_predecessor_id(self):
        # t is reachable through m1 and m2 at equal depth; m1 < m2
        g = AmrGraph("q", "d", (("q", "question"), ("m2", "m"), ("m1", "m"), ("t", "t")),
                     (("q", "r", "m2"), ("q", "r", "m1"), ("m2", "r", "t"), ("m1", "r", "t")))
        assert ("q", "m1", "t") in sssp_from_question(g).node_paths

    def test_single_path_text(self):
        g = AmrGraph("q", "d", (("q", "question"), ("x", "x")), (("q", "r", "x"),))
        assert amr_text(sssp_from_question(g)).rendered == "question x"

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30))
    def test_paths_are_shortest_and_maximal(self, seed, n):
        g = random_amr(np.random.default_rng(seed), n, [f"c{k}" for k in range(6)], connected=seed % 2 == 0)
        ps = sssp_from_question(g)
        ids = [i for i, _ in g.nodes]
        dist = floyd_warshall(ids, g.edges)
        for p in ps.node_paths:
            assert len(p) == dist[(p[0], p[-1])] + 1
            assert g.concepts[p[0]] == "question"
        sets = [frozenset(p) for p in ps.node_paths]
        for a in range(len(sets)):
            for b in range(len(sets)):
                if a != b:
                    assert not sets[a] <= sets[b]
        # every reachable node lies on some kept path
        reachable = {v for v in ids if dist[(ids[0], v)] < np.inf}
        assert reachable == set().union(*sets)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 14))
    def test_tree_matches_enumeration(self, seed, n):
        # on a tree every shortest path is unique, so the kept sets must match exactly
        vocab = [f"c{k}" for k in range(6)]
        g = random_amr(np.random.default_rng(seed), n, vocab, connected=True, edge_prob=0.0)
        ids = [i for i, _ in g.nodes]
        kept = {frozenset(p) for p in sssp_from_question(g).node_paths}
        assert kept == all_shortest_paths_maximal(ids, g.edges, ids[0])

    @given(st.integers(0, 2**32 - 1))
    def test_amr_text_deterministic(self, seed):
        g = random_amr(np.random.default_rng(seed), 15, ["a", "b", "c", "d"])
        first = amr_text(sssp_from_question(g)).rendered
        again = amr_text(sssp_from_question(AmrGraph(g.question_id, g.doc_id, g.nodes, g.edges))).rendered
        assert first.encode() == again.encode()
        if first:
            assert first.split()[0] == "question"
            assert len(set(first.split())) == len(first.split())
