import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.automata import Fsa, concat, star
from services.errors import EpsilonInLanguage, ImageInconsistent, NotCnf, RankInconsistent
from services.grammars import (
    Cfg,
    FreshNames,
    Production,
    apply_transduction,
    binarize,
    cyk_member,
    enumerate_cfg,
    intersect_regular,
    nullable,
    parse_tree,
    prune,
    pumping_pairs,
    rank_analysis,
    shortest_words,
    to_cnf,
)
from services.groups import builtin_group
from services.transducers import Transducer
from services.words import InvolutiveAlphabet

ALPHABET = InvolutiveAlphabet.from_generators("ab")
P = ALPHABET.parse

# a^n b^n, n >= 1
BALANCED = Cfg.parse(ALPHABET, "S -> a S b\nS -> a b")


def balanced(n):
    return P("a" * n + "b" * n)


def test_parse_and_text():
    assert BALANCED.start == "S"
    assert BALANCED.nonterminals == {"S"}
    again = Cfg.parse(ALPHABET, BALANCED.to_text())
    assert again == BALANCED


def test_parse_rejects_malformed_lines():
    with pytest.raises(ValueError):
        Cfg.parse(ALPHABET, "S a b")
    with pytest.raises(ValueError):
        Cfg.parse(ALPHABET, "S -> a eps")


def test_fresh_names_avoid_collisions():
    fresh = FreshNames({"X"})
    assert fresh.make("X") == "X'1"
    assert fresh.make("X") == "X'2"
    assert fresh.make("Y") == "Y"


def test_prune_drops_useless_nonterminals():
    G = Cfg.parse(ALPHABET, "S -> a\nS -> X\nX -> X b\nY -> a")
    assert prune(G).productions == (Production("S", (0,)),)


def test_nullable():
    G = Cfg.parse(ALPHABET, "S -> X Y\nX -> eps\nY -> X X\nZ -> a")
    assert nullable(G) == {"S", "X", "Y"}


def test_binarize_keeps_the_language():
    G = Cfg.parse(ALPHABET, "S -> a b a S\nS -> b")
    B = binarize(G)
    assert all(len(p.rhs) <= 2 for p in B.productions)
    assert enumerate_cfg(B, 9) == enumerate_cfg(G, 9)


def test_enumeration_is_sorted_by_length_then_code():
    assert enumerate_cfg(BALANCED, 6) == [balanced(1), balanced(2), balanced(3)]
    G = Cfg.parse(ALPHABET, "S -> b\nS -> a\nS -> a a")
    assert enumerate_cfg(G, 2) == [P("a"), P("b"), P("aa")]


def test_to_cnf():
    G = to_cnf(BALANCED)
    assert G.is_cnf
    assert enumerate_cfg(G, 8) == enumerate_cfg(BALANCED, 8)


def test_to_cnf_and_the_empty_word():
    G = Cfg.parse(ALPHABET, "S -> a S\nS -> eps")
    with pytest.raises(EpsilonInLanguage):
        to_cnf(G)
    dropped = to_cnf(G, drop_epsilon=True)
    assert dropped.is_cnf
    assert enumerate_cfg(dropped, 3) == [P("a"), P("aa"), P("aaa")]


def test_cyk_membership():
    G = to_cnf(BALANCED)
    assert cyk_member(G, balanced(2))
    assert not cyk_member(G, P("abab"))
    assert not cyk_member(G, ())
    with pytest.raises(NotCnf):
        cyk_member(BALANCED, balanced(1))


def test_parse_tree_spells_the_word():
    G = to_cnf(BALANCED)
    w = balanced(3)
    tree = parse_tree(G, w)
    assert tree.symbol == G.start
    assert (tree.start, tree.end) == (0, len(w))
    leaves = [node.symbol for node in tree.walk() if not isinstance(node.symbol, str)]
    assert tuple(leaves) == w
    assert parse_tree(G, P("ba")) is None


def test_intersect_with_an_acceptor():
    a_pairs = star(Fsa.from_words(ALPHABET, [P("aa")]))
    b_star = star(Fsa.from_words(ALPHABET, [P("b")]))
    G = intersect_regular(BALANCED, concat(a_pairs, b_star))
    assert enumerate_cfg(G, 8) == [balanced(2), balanced(4)]


def test_intersect_with_the_empty_language():
    G = intersect_regular(BALANCED, Fsa.empty(ALPHABET))
    assert enumerate_cfg(G, 6) == []


def test_apply_transduction():
    a, b, big_b = P("a")[0], P("b")[0], P("B")[0]
    T = Transducer(ALPHABET, 1, {0}, {0}, [(0, ((a,), (a,)), 0), (0, ((b,), (big_b,)), 0)])
    G = apply_transduction(BALANCED, T)
    assert enumerate_cfg(G, 4) == [P("aB"), P("aaBB")]


def test_shortest_words():
    G = Cfg.parse(ALPHABET, "S -> X X\nX -> a X\nX -> b")
    assert shortest_words(G) == {"S": P("bb"), "X": P("b")}


def test_rank_analysis():
    f2 = builtin_group("f2")
    G = Cfg.parse(f2.alphabet, "S -> X # X # X\nX -> a X A\nX -> b B")
    ranks = rank_analysis(G, f2)
    assert ranks.rank("S") == 2
    assert ranks.rank("X") == 0
    assert ranks.entries["X"].image == f2.identity
    assert ranks.k == 1 + len("bB#bB#bB")


def test_rank_analysis_without_a_group_checks_markers_only():
    G = Cfg.parse(ALPHABET, "S -> X\nX -> a\nX -> b")
    ranks = rank_analysis(G)
    assert ranks.ranks() == {0}
    assert ranks.entries["X"].image is None


def test_rank_analysis_failures():
    with pytest.raises(RankInconsistent):
        rank_analysis(Cfg.parse(ALPHABET, "S -> X\nX -> a\nX -> #"))
    with pytest.raises(ImageInconsistent):
        rank_analysis(Cfg.parse(ALPHABET, "S -> X\nX -> a\nX -> b"), builtin_group("f2"))


def test_pumping_pairs():
    G = Cfg.parse(ALPHABET, "S -> Y S\nS -> a\nY -> b")
    assert pumping_pairs(G) == [(P("ba"), P("a"))]
    with pytest.raises(NotCnf):
        pumping_pairs(BALANCED)


def test_pumping_pairs_never_pump_a_marker():
    # S has a marker-free witness but also embeds through # S
    G = Cfg.parse(ALPHABET, "S -> Y S\nS -> H S\nS -> a\nY -> b\nH -> #")
    assert pumping_pairs(G) == [(P("ba"), P("a"))]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from("ab"), max_size=8).map("".join))
def test_cnf_membership_matches_enumeration(text):
    G = to_cnf(BALANCED)
    w = P(text) if text else ()
    assert cyk_member(G, w) == (w in set(enumerate_cfg(BALANCED, 8)))
