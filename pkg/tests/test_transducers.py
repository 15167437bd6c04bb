import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from services.automata import Fsa
from services.errors import NotLinearNormalForm, SearchBudgetExceeded, StateBudgetExceeded
from services.grammars import Cfg, enumerate_cfg
from services.transducers import (
    Transducer,
    apply_to_regular,
    bounded_equal,
    compose,
    context_embed,
    diagonal,
    enumerate_pairs,
    from_linear_grammar,
    image_of_word,
    inverse_relation,
    invert_both,
    product,
    relate,
    restrict,
    single_pair,
    split_labels,
    star,
    to_linear_grammar,
    union,
)
from services.words import EPSILON, InvolutiveAlphabet, formal_inverse

ALPHABET = InvolutiveAlphabet.from_generators("ab")
P = ALPHABET.parse

letters = st.lists(st.integers(min_value=0, max_value=3), max_size=8).map(tuple)


def random_transducer(rng):
    """At most 4 states and labels of at most 2 letters on each tape"""
    n = rng.randint(1, 4)

    def label():
        return tuple(rng.choice(ALPHABET.letters) for _ in range(rng.randint(0, 2)))

    edges = [(rng.randrange(n), (label(), label()), rng.randrange(n)) for _ in range(rng.randint(1, 6))]
    return Transducer(ALPHABET, n, {0}, {rng.randrange(n)}, edges)


def test_single_pair_and_diagonal():
    T = single_pair(ALPHABET, P("a"), P("bb"))
    assert relate(T, P("a"), P("bb"))
    assert not relate(T, P("a"), P("b"))
    D = diagonal(ALPHABET)
    assert relate(D, P("a#B"), P("a#B"))
    assert not relate(diagonal(ALPHABET, with_hash=False), P("a#B"), P("a#B"))


def test_image_and_pair_enumeration():
    T = union(single_pair(ALPHABET, P("a"), P("b")), single_pair(ALPHABET, P("a"), P("bb")))
    assert image_of_word(T, P("a"), 5) == {P("b"), P("bb")}
    assert image_of_word(T, P("a"), 1) == {P("b")}
    assert enumerate_pairs(T, 2) == [(P("a"), P("b")), (P("a"), P("bb"))]


def test_product_and_star():
    T = single_pair(ALPHABET, P("a"), P("b"))
    assert relate(product(T, T), P("aa"), P("bb"))
    starred = star(T)
    assert relate(starred, EPSILON, EPSILON)
    assert relate(starred, P("aaa"), P("bbb"))
    assert not relate(starred, P("aa"), P("b"))


def test_inverse_relation_swaps_tapes():
    T = single_pair(ALPHABET, P("a"), P("bB"))
    assert relate(inverse_relation(T), P("bB"), P("a"))


def test_invert_both_inverts_each_side():
    T = single_pair(ALPHABET, P("aB"), P("b"))
    assert relate(invert_both(T), P("bA"), P("B"))


def test_compose_applies_the_right_factor_first():
    T = single_pair(ALPHABET, P("a"), P("b"))
    S = single_pair(ALPHABET, P("b"), P("B"))
    assert relate(compose(S, T), P("a"), P("B"))
    assert not relate(compose(T, S), P("a"), P("B"))


def test_compose_respects_the_budget():
    T = single_pair(ALPHABET, P("a"), P("b"))
    S = single_pair(ALPHABET, P("b"), P("B"))
    with pytest.raises(StateBudgetExceeded):
        compose(S, T, budget=1)


def test_relate_respects_the_search_budget():
    with pytest.raises(SearchBudgetExceeded):
        relate(diagonal(ALPHABET), P("aaaa"), P("aaaa"), budget=2)


def test_restrict_to_regular_sides():
    R = Fsa.from_words(ALPHABET, [P("a"), P("ab")])
    S = Fsa.from_words(ALPHABET, [P("ab")])
    T = restrict(diagonal(ALPHABET), R, S)
    assert enumerate_pairs(T, 4) == [(P("ab"), P("ab"))]


def test_split_labels_keeps_the_relation():
    T = single_pair(ALPHABET, P("aab"), P("B"))
    split = split_labels(T)
    assert all(len(x) <= 1 and len(y) <= 1 for _, (x, y), _ in split.edges)
    assert bounded_equal(T, split, 4)


def test_context_embed_rewrites_anywhere():
    rho = context_embed(ALPHABET, P("aA"), EPSILON)
    assert relate(rho, P("baAb"), P("bb"))
    assert relate(rho, P("#aA"), P("#"))
    assert not relate(rho, P("bb"), P("bb"))


def test_apply_to_regular():
    rho = context_embed(ALPHABET, P("aA"), EPSILON)
    A = Fsa.from_words(ALPHABET, [P("baAb"), P("ab")])
    image = apply_to_regular(rho, A)
    assert image.accepts(P("bb"))
    assert not image.accepts(P("ab"))


def test_linear_grammar_round_trip():
    T = single_pair(ALPHABET, P("a"), P("b"))
    G = to_linear_grammar(T)
    assert enumerate_cfg(G, 5) == [P("a#B")]
    assert relate(from_linear_grammar(G), P("a"), P("b"))


def test_from_linear_grammar_rejects_other_shapes():
    G = Cfg.parse(ALPHABET, "S -> X Y\nX -> a\nY -> #")
    with pytest.raises(NotLinearNormalForm):
        from_linear_grammar(G)


def test_text_format_round_trip():
    T = union(single_pair(ALPHABET, P("ab"), EPSILON), single_pair(ALPHABET, P("#"), P("B")))
    assert Transducer.from_text(ALPHABET, T.to_text()) == T


@given(letters)
def test_diagonal_relates_only_equal_words(u):
    D = diagonal(ALPHABET)
    assert relate(D, u, u)
    assert not relate(D, u, u + (0,))


@given(letters, letters)
def test_invert_both_on_single_pairs(u, v):
    T = single_pair(ALPHABET, u, v)
    assert relate(invert_both(T), formal_inverse(u), formal_inverse(v))


@pytest.mark.parametrize("seed", range(50))
def test_random_transducers_invert_and_linearize(seed):
    T = random_transducer(random.Random(seed))
    pairs = enumerate_pairs(T, 4)
    assert enumerate_pairs(invert_both(T), 4) == sorted((formal_inverse(u), formal_inverse(v)) for u, v in pairs)
    assert enumerate_pairs(from_linear_grammar(to_linear_grammar(T)), 4) == pairs
