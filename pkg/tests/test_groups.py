import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import geodesic, words
from services.automata import Fsa
from services.errors import BudgetExceeded, ConfigError, GroupFileError, UnknownSymbol
from services.groups import (
    FiniteTable,
    build_combing,
    builtin_group,
    cayley_ball,
    distance,
    evaluate,
    geodesic_word,
    is_surjective_at_radius,
    load_group,
    resolve_group,
)
from services.words import EPSILON, InvolutiveAlphabet, formal_inverse, free_reduce

f2_words = st.lists(st.integers(min_value=0, max_value=3), max_size=10).map(tuple)


def test_free_group_elements_are_reduced_words(f2):
    assert evaluate(f2, f2.alphabet.parse("aAb")) == f2.alphabet.parse("b")
    assert evaluate(f2, f2.alphabet.parse("a#A")) == f2.identity
    assert f2.order is None


def test_finite_tables(z3, s3):
    assert z3.order == 3
    assert evaluate(z3, z3.alphabet.parse("aaa")) == z3.identity
    assert evaluate(z3, z3.alphabet.parse("A")) == evaluate(z3, z3.alphabet.parse("aa"))
    assert s3.order == 6
    ab, ba = words(s3, "ab", "ba")
    assert evaluate(s3, ab) != evaluate(s3, ba)


def test_products(d_inf, z_squared):
    assert d_inf.order is None
    assert evaluate(d_inf, d_inf.alphabet.parse("aA")) == d_inf.identity
    assert evaluate(d_inf, d_inf.alphabet.parse("abba")) == d_inf.identity
    assert z_squared.order is None
    ab, ba = words(z_squared, "ab", "ba")
    assert evaluate(z_squared, ab) == evaluate(z_squared, ba)


def test_evaluate_rejects_foreign_codes(z3):
    with pytest.raises(UnknownSymbol):
        evaluate(z3, (5,))


def test_table_validation():
    alphabet = InvolutiveAlphabet.from_generators("a")
    with pytest.raises(ValueError):
        FiniteTable(alphabet, [[0, 1], [1, 1]], [1, 1])
    with pytest.raises(ValueError):
        # images of a and A must be inverse
        FiniteTable(alphabet, [[0, 1, 2], [1, 2, 0], [2, 0, 1]], [1, 1])
    with pytest.raises(ValueError):
        # a generates only the identity
        FiniteTable(alphabet, [[0, 1], [1, 0]], [0, 0])


def test_distance_and_cap(f2):
    g = evaluate(f2, f2.alphabet.parse("ab"))
    assert distance(f2, f2.identity, g, 5) == 2
    assert distance(f2, g, g, 0) == 0
    far = evaluate(f2, f2.alphabet.parse("aaaa"))
    assert distance(f2, f2.identity, far, 3) is None


@pytest.mark.parametrize(
    "name, radius, size",
    [("f2", 2, 17), ("z_squared", 2, 13), ("d_inf", 2, 5), ("z3", 5, 3), ("s3", 3, 6)],
)
def test_ball_sizes(name, radius, size):
    assert len(cayley_ball(builtin_group(name), radius)) == size


def test_ball_lookups(z_squared):
    g = evaluate(z_squared, z_squared.alphabet.parse("ab"))
    h = evaluate(z_squared, z_squared.alphabet.parse("AB"))
    assert cayley_ball(z_squared, 4).between(z_squared, g, h) == 4
    with pytest.raises(BudgetExceeded):
        cayley_ball(z_squared, 3).between(z_squared, g, h)


def test_geodesic_word_reads_the_reduced_form(f2):
    ball = cayley_ball(f2, 3)
    g = evaluate(f2, f2.alphabet.parse("aBa"))
    assert geodesic_word(f2, ball, g) == f2.alphabet.parse("aBa")


def test_geodesic_combings(f2, z3, d_inf, z_squared):
    R = geodesic(f2)
    assert R.accepts(f2.alphabet.parse("abA"))
    assert not R.accepts(f2.alphabet.parse("aA"))
    R = geodesic(z3)
    assert R.accepts(z3.alphabet.parse("A"))
    assert not R.accepts(z3.alphabet.parse("aa"))
    R = geodesic(d_inf)
    assert R.accepts(d_inf.alphabet.parse("abAB"))
    assert not R.accepts(d_inf.alphabet.parse("aA"))
    R = geodesic(z_squared)
    assert R.accepts(z_squared.alphabet.parse("aaB"))
    assert not R.accepts(z_squared.alphabet.parse("ba"))


def test_build_combing_reports_properties(f2, d_inf):
    _, info = build_combing(f2, "geodesic")
    assert info.geodesic_complete and info.unique_representatives
    _, info = build_combing(d_inf, "geodesic")
    assert info.geodesic_complete and not info.unique_representatives
    R, info = build_combing(f2, "sigma-star")
    assert R.accepts(f2.alphabet.parse("aA"))
    with pytest.raises(ConfigError):
        build_combing(f2, "lexicographic")


def test_combing_from_acceptor_file(tmp_path, z2):
    path = tmp_path / "r.fsa"
    path.write_text("state 0 initial terminal\nstate 1 terminal\nedge 0 a 1\n")
    R, info = build_combing(z2, str(path))
    assert info.name == str(path)
    assert R.accepts(z2.alphabet.parse("a"))
    assert is_surjective_at_radius(z2, R, 2)


def test_surjectivity(f2):
    assert is_surjective_at_radius(f2, geodesic(f2), 3)
    assert not is_surjective_at_radius(f2, Fsa.epsilon(f2.alphabet), 1)


def test_builtin_names():
    with pytest.raises(ConfigError):
        builtin_group("z7")
    assert resolve_group("s3").order == 6


@pytest.mark.parametrize(
    "file_name, order",
    [("trivial.toml", 1), ("z2.toml", 2), ("z3.toml", 3), ("f2.toml", None), ("d_inf.toml", None), ("z_squared.toml", None)],
)
def test_bundled_group_files(group_dir, file_name, order):
    spec = load_group(group_dir / file_name)
    assert spec.order == order
    assert spec.name == file_name[:-len(".toml")]


def test_group_file_errors(tmp_path):
    missing_table = tmp_path / "bad.toml"
    missing_table.write_text('[alphabet]\ngenerators = ["a"]\n\n[backend]\nkind = "finite_table"\n')
    with pytest.raises(GroupFileError):
        load_group(missing_table)
    broken = tmp_path / "broken.toml"
    broken.write_text("[alphabet\n")
    with pytest.raises(GroupFileError):
        load_group(broken)
    with pytest.raises(ConfigError):
        load_group(tmp_path / "absent.toml")


@given(f2_words)
def test_free_evaluation_is_free_reduction(w):
    f2 = builtin_group("f2")
    assert evaluate(f2, w) == free_reduce(w)
    assert f2.multiply(evaluate(f2, w), evaluate(f2, formal_inverse(w))) == EPSILON
