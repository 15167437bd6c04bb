import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import geodesic, words
from models import Diagonal, PolygonTriangulation
from routers.experiments import random_cycle
from services.automata import Fsa, enumerate_words, equivalent
from services.errors import EndpointMismatch, InvalidPair, NotACycle, NotATableWord, NotCnf
from services.grammars import enumerate_cfg, intersect_regular, pumping_pairs, to_cnf
from services.groups import Free, builtin_group, cayley_ball, evaluate, is_surjective_at_radius
from services.hyperbolicity import (
    DIAGONAL_SLOPE,
    bk_sequence,
    combing_proximity,
    flabby_check,
    is_valid_triangulation,
    refine_subcombing,
    synthesize_table_grammar,
    thinness_certificate,
    triangle_from_table_word,
    triangle_width,
    triangulate_cycle,
)
from services.tables import TableSpec, enumerate_table


def square_triangle(n):
    return "a" * n + "#" + "b" * n + "#" + "A" * n + "B" * n


def test_triangle_from_table_word(z_squared):
    (t,) = words(z_squared, "aa#bb#AABB")
    T = triangle_from_table_word(z_squared, t)
    assert T.perimeter == 8
    assert T.vertices[0] == z_squared.identity
    assert T.vertices[2] == evaluate(z_squared, z_squared.alphabet.parse("aabb"))


def test_table_words_must_close_up(z_squared):
    with pytest.raises(NotATableWord):
        triangle_from_table_word(z_squared, z_squared.alphabet.parse("a#b#A"))
    with pytest.raises(NotATableWord):
        triangle_from_table_word(z_squared, z_squared.alphabet.parse("aA#"))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_square_triangles_are_fat(z_squared, n):
    (t,) = words(z_squared, square_triangle(n))
    metrics = triangle_width(z_squared, triangle_from_table_word(z_squared, t))
    assert metrics.width == n
    assert metrics.norm == 2 * n


def test_free_group_triangles_are_tripods(f2):
    report = flabby_check(f2, geodesic(f2), 6)
    assert report.count == len(enumerate_table(TableSpec(f2, geodesic(f2)), 6))
    assert report.max_width == 0
    assert report.c_emp == 0.0


def test_flabby_constant_grows_for_the_plane(z_squared):
    small = flabby_check(z_squared, geodesic(z_squared), 4)
    large = flabby_check(z_squared, geodesic(z_squared), 8)
    assert large.c_emp > small.c_emp
    assert all(r.length <= 8 for r in large.triangles)


def test_triangulating_a_square(z_squared):
    (cycle,) = words(z_squared, "abAB")
    tri = triangulate_cycle(z_squared, cycle)
    assert tri.diagonals == [Diagonal(i=2, j=4, length=2)]
    assert is_valid_triangulation(tri)


def test_short_cycles_need_no_diagonals(f2):
    (cycle,) = words(f2, "aA")
    assert triangulate_cycle(f2, cycle).diagonals == []


def test_triangulate_rejects_non_cycles(f2):
    for text in ["ab", "a#A", ""]:
        with pytest.raises(NotACycle):
            triangulate_cycle(f2, f2.alphabet.parse(text))


def test_triangulation_validity():
    assert is_valid_triangulation(PolygonTriangulation(n=5, diagonals=[Diagonal(i=2, j=5, length=1), Diagonal(i=2, j=4, length=1)]))
    # crossing
    assert not is_valid_triangulation(PolygonTriangulation(n=5, diagonals=[Diagonal(i=1, j=3, length=1), Diagonal(i=2, j=4, length=1)]))
    # an edge, not a diagonal
    assert not is_valid_triangulation(PolygonTriangulation(n=4, diagonals=[Diagonal(i=1, j=4, length=1)]))
    assert not is_valid_triangulation(PolygonTriangulation(n=5, diagonals=[Diagonal(i=2, j=5, length=1)]))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6), st.integers(min_value=2, max_value=10), st.sampled_from(["greedy", "paper"]))
def test_random_cycles_triangulate(seed, half, policy):
    spec = builtin_group("f2")
    cycle = random_cycle(spec, random.Random(seed), 2 * half)
    tri = triangulate_cycle(spec, cycle, policy)
    assert is_valid_triangulation(tri)
    assert any(dg.i == 2 and dg.j == 2 * half for dg in tri.diagonals)
    for dg in tri.diagonals:
        assert dg.length - Fraction(2 * half, 6) <= 3


def test_combing_proximity(f2):
    w, v0 = words(f2, "bBab", "ab")
    report = combing_proximity(f2, w, v0)
    assert report.n == 4
    assert report.v0_to_w == 0
    assert report.w_to_v0 == 1
    assert report.d_emp_v0 == pytest.approx(-4 / 36)
    assert report.d_emp_w == pytest.approx((1 - 4 / 18) / 2)


def test_combing_proximity_needs_equal_endpoints(f2):
    w, v0 = words(f2, "ab", "ba")
    with pytest.raises(EndpointMismatch):
        combing_proximity(f2, w, v0)


def test_bk_sequence():
    assert bk_sequence(8) == [Fraction(8), Fraction(9, 2), Fraction(11, 4), Fraction(15, 8)]
    assert bk_sequence(2) == [Fraction(2)]
    assert bk_sequence(0) == [Fraction(0)]
    assert bk_sequence(-1) == []


@given(st.integers(min_value=0, max_value=2 ** 16))
def test_bk_sequence_stays_under_the_halving_bound(n):
    sequence = bk_sequence(n)
    assert sequence[-1] <= max(2, n)
    for k, b in enumerate(sequence):
        assert b <= 1 + Fraction(n, 2 ** k)


@pytest.mark.parametrize("name", ["z2", "z3"])
def test_synthesized_grammar_words_are_trivial(name):
    spec = builtin_group(name)
    L = synthesize_table_grammar(spec, 1, compact=True)
    assert L.start == "X<>"
    for w in enumerate_cfg(L, 6):
        assert evaluate(spec, w) == spec.identity


def test_compact_grammar_keeps_the_language(z2):
    exact = synthesize_table_grammar(z2, 1)
    compact = synthesize_table_grammar(z2, 1, compact=True)
    assert len(compact.productions) < len(exact.productions)
    assert enumerate_cfg(compact, 6) == enumerate_cfg(exact, 6)


def test_synthesis_needs_positive_delta(z2):
    with pytest.raises(ValueError):
        synthesize_table_grammar(z2, 0)


@pytest.mark.parametrize("name", ["z2", "z3", "d_inf"])
def test_grammar_cut_down_to_the_combing_is_the_table(name):
    spec = builtin_group(name)
    R = geodesic(spec)
    L = synthesize_table_grammar(spec, 1, compact=True)
    M = intersect_regular(L, Fsa.table_shape(R))
    assert enumerate_cfg(M, 6) == enumerate_table(TableSpec(spec, R), 6)


def test_refine_removes_shortenable_words():
    spec = Free(1)
    sigma = Fsa.sigma_star(spec.alphabet)
    pairs = [tuple(words(spec, "aA", "")), tuple(words(spec, "Aa", ""))]
    refined = refine_subcombing(sigma, pairs)
    assert equivalent(refined, geodesic(spec))
    assert is_surjective_at_radius(spec, refined, 3)
    assert refine_subcombing(sigma, []) is sigma


def test_refine_needs_shortening_pairs(f2):
    with pytest.raises(InvalidPair):
        refine_subcombing(geodesic(f2), [words(f2, "a", "b")])


def test_thinness_certificate(z2):
    R = geodesic(z2)
    L = synthesize_table_grammar(z2, 1, compact=True)
    G = to_cnf(intersect_regular(L, Fsa.table_shape(R)), drop_epsilon=True)
    report = thinness_certificate(z2, G, R, 5)
    assert report.passed
    assert len(report.triangles) == 4
    assert all(t.certified_bound >= t.width for t in report.triangles)
    with pytest.raises(NotCnf):
        thinness_certificate(z2, L, R, 5)


def test_combing_words_are_geodesic(d_inf):
    ball = cayley_ball(d_inf, 4)
    for w in enumerate_words(geodesic(d_inf), 4):
        assert ball.table[evaluate(d_inf, w)] == len(w)


@pytest.mark.slow
def test_infinite_cyclic_table_is_context_free():
    spec = builtin_group("f1")
    R = geodesic(spec)
    L = synthesize_table_grammar(spec, 1, compact=True)
    M = intersect_regular(L, Fsa.table_shape(R))
    assert enumerate_cfg(M, 12) == enumerate_table(TableSpec(spec, R), 12)


@pytest.mark.slow
def test_free_group_triangles_stay_thin(f2):
    report = flabby_check(f2, geodesic(f2), 12)
    assert report.max_width == 0
    by_maxlen = [
        max(Fraction(r.width) - Fraction(r.norm, 75) for r in report.triangles if r.length <= m)
        for m in range(8, 13)
    ]
    assert by_maxlen == sorted(by_maxlen, reverse=True)


def test_flabby_constant_settles_for_a_finite_group(z3):
    R = geodesic(z3)
    c_emp = [flabby_check(z3, R, m).c_emp for m in range(8, 13)]
    assert c_emp == sorted(c_emp, reverse=True)


@pytest.mark.slow
def test_two_hundred_random_cycles_triangulate(f2):
    rng = random.Random(0)
    k_emp = Fraction(0)
    for _ in range(200):
        n = 4 + 2 * rng.randrange(11)
        cycle = random_cycle(f2, rng, n)
        for policy in ("greedy", "paper"):
            tri = triangulate_cycle(f2, cycle, policy)
            assert is_valid_triangulation(tri)
            assert len(tri.diagonals) == n - 3
            if n == 4:
                assert tri.diagonals[0].length <= 2
            for dg in tri.diagonals:
                k_emp = max(k_emp, dg.length - DIAGONAL_SLOPE * n)
    assert k_emp <= 3


def shortest_representatives(spec, R, radius):
    best = {}
    for w in enumerate_words(R, radius):
        g = evaluate(spec, w)
        best[g] = min(best.get(g, len(w)), len(w))
    return best


@pytest.mark.slow
def test_refining_the_free_group_combing_keeps_it_geodesic(f2):
    R = geodesic(f2)
    L = synthesize_table_grammar(f2, 1, compact=True)
    G = to_cnf(intersect_regular(L, Fsa.table_shape(R)), drop_epsilon=True)
    pairs = pumping_pairs(G)
    # distinct reduced words never evaluate alike, so nothing pumps
    assert pairs == []
    refined = refine_subcombing(R, pairs)
    assert is_surjective_at_radius(f2, refined, 3)
    ball = cayley_ball(f2, 3)
    assert shortest_representatives(f2, refined, 3) == ball.table
    assert shortest_representatives(f2, refined, 3) == shortest_representatives(f2, R, 3)
