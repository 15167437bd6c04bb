import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from services.automata import (
    Fsa,
    complement,
    concat,
    determinize_letterize,
    difference,
    enumerate_words,
    equivalent,
    image_homomorphism_hash,
    intersect,
    inverse_homomorphism_hash,
    letterize,
    minimize,
    reverse_invert,
    star,
    trim,
    union,
)
from services.errors import MarkerInInput, StateBudgetExceeded
from services.words import EPSILON, HASH, InvolutiveAlphabet, formal_inverse, hash_erase

ALPHABET = InvolutiveAlphabet.from_generators("a")
P = ALPHABET.parse

marked = st.lists(st.sampled_from(ALPHABET.symbols), max_size=8).map(tuple)


def all_words(max_len):
    for n in range(max_len + 1):
        yield from itertools.product(ALPHABET.symbols, repeat=n)


def test_from_words_accepts_exactly_its_words():
    A = Fsa.from_words(ALPHABET, [P("aA"), P("a#"), EPSILON])
    assert A.accepts(P("aA"))
    assert A.accepts(P("a#"))
    assert A.accepts(EPSILON)
    assert not A.accepts(P("a"))
    assert not A.is_letterized


def test_marker_patterns():
    two = Fsa.marker_pattern(ALPHABET, 2)
    assert two.accepts(P("a#A#"))
    assert two.accepts(P("##"))
    assert not two.accepts(P("a#A"))
    suffix = Fsa.hash_suffix(ALPHABET)
    assert suffix.accepts(P("aA##"))
    assert not suffix.accepts(P("a#A#"))


def test_table_shape_is_three_combing_words():
    R = Fsa.from_words(ALPHABET, [EPSILON, P("a")])
    shape = Fsa.table_shape(R)
    assert shape.accepts(P("a##a"))
    assert shape.accepts(P("##"))
    assert not shape.accepts(P("A##"))
    assert not shape.accepts(P("a#a"))


def test_trim_drops_dead_states():
    A = Fsa(ALPHABET, 4, {0}, {1}, [(0, (0,), 1), (0, (1,), 2), (3, (0,), 1)])
    trimmed = trim(A)
    assert trimmed.num_states == 2
    assert equivalent(A, trimmed)


def test_trim_of_an_empty_language():
    A = Fsa(ALPHABET, 2, {0}, set(), [(0, (0,), 1)])
    assert trim(A) == Fsa.empty(ALPHABET)


def test_letterize_removes_long_and_empty_labels():
    A = Fsa(ALPHABET, 3, {0}, {2}, [(0, P("aa"), 1), (1, EPSILON, 2), (2, P("A"), 2)])
    L = letterize(A)
    assert L.is_letterized
    for w in all_words(4):
        assert L.accepts(w) == A.accepts(w)


def test_determinize_gives_one_successor_per_symbol():
    A = union(Fsa.from_words(ALPHABET, [P("aa")]), Fsa.from_words(ALPHABET, [P("aA")]))
    D = determinize_letterize(A)
    assert D.is_deterministic
    assert equivalent(A, D)


def test_determinize_respects_the_budget():
    A = union(Fsa.from_words(ALPHABET, [P("aa")]), Fsa.from_words(ALPHABET, [P("aA")]))
    with pytest.raises(StateBudgetExceeded):
        determinize_letterize(A, budget=1)


def test_minimize_is_canonical():
    sigma = Fsa.sigma_star(ALPHABET)
    doubled = concat(sigma, sigma)
    assert minimize(sigma) == minimize(doubled)
    # accepting loop plus a sink for the marker
    assert minimize(sigma).num_states == 2


def test_boolean_operations_agree_with_membership():
    A = Fsa.marker_pattern(ALPHABET, 1)
    B = star(Fsa.from_words(ALPHABET, [P("a"), P("#")]))
    for w in all_words(4):
        assert intersect(A, B).accepts(w) == (A.accepts(w) and B.accepts(w))
        assert union(A, B).accepts(w) == (A.accepts(w) or B.accepts(w))
        assert difference(A, B).accepts(w) == (A.accepts(w) and not B.accepts(w))
        assert complement(A).accepts(w) != A.accepts(w)


def test_equivalence_needs_the_same_alphabet():
    other = InvolutiveAlphabet.from_generators("b")
    with pytest.raises(ValueError):
        equivalent(Fsa.epsilon(ALPHABET), Fsa.epsilon(other))


def test_reverse_invert_accepts_formal_inverses():
    A = Fsa.from_words(ALPHABET, [P("aaA"), P("A")])
    R = reverse_invert(A)
    assert R.accepts(formal_inverse(P("aaA")))
    assert R.accepts(P("a"))
    assert not R.accepts(P("aaA"))


def test_hash_homomorphisms():
    A = Fsa.from_words(ALPHABET, [P("aA")])
    preimage = inverse_homomorphism_hash(A)
    assert preimage.accepts(P("#a##A#"))
    assert not preimage.accepts(P("a#a"))
    assert equivalent(image_homomorphism_hash(preimage), A)
    with pytest.raises(MarkerInInput):
        inverse_homomorphism_hash(preimage)


def test_markers_land_inside_multi_letter_labels():
    A = Fsa(ALPHABET, 2, {0}, {1}, [(0, P("aAa"), 1)])
    preimage = inverse_homomorphism_hash(A)
    assert preimage.accepts(P("a#Aa"))
    assert preimage.accepts(P("aA#a#"))
    assert preimage.accepts(P("#a#A#a#"))
    assert not preimage.accepts(P("aA#"))


def test_enumerate_words_in_code_order():
    words = enumerate_words(Fsa.sigma_star(ALPHABET), 2)
    assert words == [(), (0,), (0, 0), (0, 1), (1,), (1, 0), (1, 1)]
    assert enumerate_words(Fsa.empty(ALPHABET), 5) == []


def test_text_format_round_trip():
    A = Fsa(ALPHABET, 3, {0}, {2}, [(0, P("aa"), 1), (1, EPSILON, 2), (2, P("#"), 0)])
    again = Fsa.from_text(ALPHABET, A.to_text())
    assert again == A


def test_text_format_rejects_garbage():
    with pytest.raises(ValueError):
        Fsa.from_text(ALPHABET, "state 0 initial\nnode 0 1\n")


@given(marked)
def test_sigma_star_with_marker_accepts_everything(w):
    assert Fsa.sigma_star(ALPHABET, with_hash=True).accepts(w)
    assert Fsa.sigma_star(ALPHABET).accepts(w) == (HASH not in w)


@given(marked)
def test_preimage_under_marker_erasure(w):
    A = Fsa.from_words(ALPHABET, [EPSILON, P("a"), P("aA")])
    assert inverse_homomorphism_hash(A).accepts(w) == A.accepts(hash_erase(w))
