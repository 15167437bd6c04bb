"""
Group backends: the surjective homomorphism Σ_#* -> G, distances, balls and combings.

Element encodings are backend specific and always canonical, so elements can be
hashed and compared directly:

  FiniteTable    element id (int)
  Free           freely reduced word
  FreeProduct    tuple of (factor index, factor element) syllables, alternating factors
  DirectProduct  tuple of factor elements
"""
import itertools
import logging
import sys
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, Hashable, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from models import AlphabetSection, CombingInfo, GroupFile
from .automata import Fsa, concat, determinize_letterize, map_labels
from .errors import BudgetExceeded, ConfigError, GroupFileError, UnknownSymbol, UnsupportedBackend
from .settings import settings
from .words import EPSILON, HASH, InvolutiveAlphabet, Word, formal_inverse

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

Element = Hashable


class GroupSpec(ABC):
    """A finitely generated group together with its choice of generators"""

    kind = "abstract"

    def __init__(self, alphabet: InvolutiveAlphabet, name: str):
        self.alphabet = alphabet
        self.name = name

    @property
    @abstractmethod
    def identity(self) -> Element:
        ...

    @property
    def order(self) -> Optional[int]:
        """Number of elements, None when infinite"""
        return None

    @abstractmethod
    def act(self, g: Element, x: int) -> Element:
        """g times the image of letter x"""

    @abstractmethod
    def multiply(self, g: Element, h: Element) -> Element:
        ...

    @abstractmethod
    def inverse(self, g: Element) -> Element:
        ...

    def generator(self, x: int) -> Element:
        return self.act(self.identity, x)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class FiniteTable(GroupSpec):
    kind = "finite_table"

    def __init__(
        self,
        alphabet: InvolutiveAlphabet,
        rows: Sequence[Sequence[int]],
        generators: Sequence[int],
        name: str = "finite",
    ):
        super().__init__(alphabet, name)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise ValueError("multiplication table must be square and non-empty")
        if any(not 0 <= e < n for row in rows for e in row):
            raise ValueError("table entries must be element ids")
        self.rows = tuple(tuple(row) for row in rows)

        identities = [e for e in range(n) if all(rows[e][g] == g and rows[g][e] == g for g in range(n))]
        if not identities:
            raise ValueError("table has no identity element")
        self._identity = identities[0]

        inverses = []
        for g in range(n):
            found = [h for h in range(n) if rows[g][h] == self._identity and rows[h][g] == self._identity]
            if not found:
                raise ValueError(f"element {g} has no inverse")
            inverses.append(found[0])
        self._inverses = tuple(inverses)

        for a, b, c in itertools.product(range(n), repeat=3):
            if rows[rows[a][b]][c] != rows[a][rows[b][c]]:
                raise ValueError(f"table is not associative at ({a}, {b}, {c})")

        if len(generators) != alphabet.size:
            raise ValueError("every letter needs a generator image")
        if any(not 0 <= e < n for e in generators):
            raise ValueError("generator images must be element ids")
        for x in alphabet.letters:
            if generators[x ^ 1] != self._inverses[generators[x]]:
                raise ValueError(f"images of {alphabet.name(x)} and its formal inverse are not inverse")
        self.generators = tuple(generators)
        if len(self.distances) != n:
            raise ValueError("generators do not generate the whole table")

    @property
    def identity(self) -> int:
        return self._identity

    @property
    def order(self) -> int:
        return len(self.rows)

    def act(self, g: int, x: int) -> int:
        return self.rows[g][self.generators[x]]

    def multiply(self, g: int, h: int) -> int:
        return self.rows[g][h]

    def inverse(self, g: int) -> int:
        return self._inverses[g]

    @cached_property
    def shortlex_forms(self) -> Dict[int, Word]:
        """Shortlex-least representative of every element"""
        forms: Dict[int, Word] = {self._identity: EPSILON}
        queue = deque([self._identity])
        while queue:
            g = queue.popleft()
            for x in self.alphabet.letters:
                h = self.act(g, x)
                if h not in forms:
                    forms[h] = forms[g] + (x,)
                    queue.append(h)
        return forms

    @cached_property
    def distances(self) -> Dict[int, int]:
        return {g: len(w) for g, w in self.shortlex_forms.items()}

    @cached_property
    def unique_geodesics(self) -> bool:
        counts = {self._identity: 1}
        for g in sorted(self.distances, key=self.distances.get):
            for x in self.alphabet.letters:
                h = self.act(g, x)
                if self.distances[h] == self.distances[g] + 1:
                    counts[h] = counts.get(h, 0) + counts[g]
        return all(c == 1 for c in counts.values())


class Free(GroupSpec):
    kind = "free"

    def __init__(self, rank: int, alphabet: Optional[InvolutiveAlphabet] = None, name: Optional[str] = None):
        if alphabet is None:
            alphabet = InvolutiveAlphabet.from_generators("abcdefghijklmnopqrstuvwxyz"[:rank])
        if alphabet.size != 2 * rank:
            raise ValueError(f"free group of rank {rank} needs {2 * rank} letters")
        super().__init__(alphabet, name or f"f{rank}")
        self.rank = rank

    @property
    def identity(self) -> Word:
        return EPSILON

    @property
    def order(self) -> Optional[int]:
        return 1 if self.rank == 0 else None

    def act(self, g: Word, x: int) -> Word:
        if g and g[-1] == x ^ 1:
            return g[:-1]
        return g + (x,)

    def multiply(self, g: Word, h: Word) -> Word:
        for x in h:
            g = self.act(g, x)
        return g

    def inverse(self, g: Word) -> Word:
        return formal_inverse(g)


class FreeProduct(GroupSpec):
    kind = "free_product"

    def __init__(self, factors: Sequence[FiniteTable], name: str = "free_product"):
        if not factors:
            raise ValueError("a free product needs at least one factor")
        super().__init__(InvolutiveAlphabet.concat([f.alphabet for f in factors]), name)
        self.factors = tuple(factors)
        self.locate: List[Tuple[int, int]] = []
        for i, factor in enumerate(self.factors):
            self.locate.extend((i, x) for x in factor.alphabet.letters)

    @property
    def identity(self) -> tuple:
        return ()

    @property
    def order(self) -> Optional[int]:
        nontrivial = [f.order for f in self.factors if f.order > 1]
        if len(nontrivial) >= 2:
            return None
        return nontrivial[0] if nontrivial else 1

    def _push(self, g: tuple, i: int, e: int) -> tuple:
        factor = self.factors[i]
        if g and g[-1][0] == i:
            merged = factor.multiply(g[-1][1], e)
            return g[:-1] if merged == factor.identity else g[:-1] + ((i, merged),)
        if e == factor.identity:
            return g
        return g + ((i, e),)

    def act(self, g: tuple, x: int) -> tuple:
        i, local = self.locate[x]
        return self._push(g, i, self.factors[i].generators[local])

    def multiply(self, g: tuple, h: tuple) -> tuple:
        for i, e in h:
            g = self._push(g, i, e)
        return g

    def inverse(self, g: tuple) -> tuple:
        return tuple((i, self.factors[i].inverse(e)) for i, e in reversed(g))


class DirectProduct(GroupSpec):
    kind = "direct_product"

    def __init__(self, factors: Sequence[GroupSpec], name: str = "direct_product"):
        if not factors:
            raise ValueError("a direct product needs at least one factor")
        super().__init__(InvolutiveAlphabet.concat([f.alphabet for f in factors]), name)
        self.factors = tuple(factors)
        self.locate: List[Tuple[int, int]] = []
        self.offsets: List[int] = []
        offset = 0
        for i, factor in enumerate(self.factors):
            self.offsets.append(offset)
            self.locate.extend((i, x) for x in factor.alphabet.letters)
            offset += factor.alphabet.size

    @property
    def identity(self) -> tuple:
        return tuple(f.identity for f in self.factors)

    @property
    def order(self) -> Optional[int]:
        total = 1
        for factor in self.factors:
            if factor.order is None:
                return None
            total *= factor.order
        return total

    def act(self, g: tuple, x: int) -> tuple:
        i, local = self.locate[x]
        return g[:i] + (self.factors[i].act(g[i], local),) + g[i + 1:]

    def multiply(self, g: tuple, h: tuple) -> tuple:
        return tuple(f.multiply(a, b) for f, a, b in zip(self.factors, g, h))

    def inverse(self, g: tuple) -> tuple:
        return tuple(f.inverse(a) for f, a in zip(self.factors, g))


# Evaluation and metric

def evaluate(spec: GroupSpec, w: Word) -> Element:
    """Image of w in G; the marker maps to the identity"""
    g = spec.identity
    size = spec.alphabet.size
    for x in w:
        if x == HASH:
            continue
        if not 0 <= x < size:
            raise UnknownSymbol(f"symbol code {x} is not in the alphabet of {spec.name}")
        g = spec.act(g, x)
    return g


def distance(spec: GroupSpec, g: Element, h: Element, radius_cap: int) -> Optional[int]:
    """d(g, h) when it is at most radius_cap, otherwise None"""
    target = spec.multiply(spec.inverse(g), h)
    if target == spec.identity:
        return 0
    seen = {spec.identity}
    frontier = [spec.identity]
    for d in range(1, radius_cap + 1):
        nxt = []
        for e in frontier:
            for x in spec.alphabet.letters:
                f = spec.act(e, x)
                if f == target:
                    return d
                if f not in seen:
                    seen.add(f)
                    nxt.append(f)
        if len(seen) > settings.budget_elements:
            raise BudgetExceeded("distance search", settings.budget_elements)
        frontier = nxt
    return None


@dataclass(frozen=True)
class CayleyBall:
    center: Element
    radius: int
    table: Dict[Element, int]

    def __len__(self) -> int:
        return len(self.table)

    def __contains__(self, g: Element) -> bool:
        return g in self.table

    def between(self, spec: GroupSpec, g: Element, h: Element) -> int:
        """d(g, h) read from the ball around the identity via left invariance"""
        d = self.table.get(spec.multiply(spec.inverse(g), h))
        if d is None:
            raise BudgetExceeded(f"distance lookup outside the radius-{self.radius} ball", self.radius)
        return d


@lru_cache(maxsize=32)
def _ball(spec: GroupSpec, radius: int, budget: int) -> CayleyBall:
    table = {spec.identity: 0}
    frontier = [spec.identity]
    for d in range(radius):
        nxt = []
        for g in frontier:
            for x in spec.alphabet.letters:
                h = spec.act(g, x)
                if h not in table:
                    table[h] = d + 1
                    nxt.append(h)
            if len(table) > budget:
                raise BudgetExceeded(f"Cayley ball of radius {radius}", budget)
        if not nxt:
            break
        frontier = nxt
    logger.debug(f"ball of radius {radius} in {spec.name}: {len(table)} elements")
    return CayleyBall(spec.identity, radius, table)


def cayley_ball(spec: GroupSpec, radius: int, budget: Optional[int] = None) -> CayleyBall:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return _ball(spec, radius, budget or settings.budget_elements)


def geodesic_word(spec: GroupSpec, ball: CayleyBall, g: Element) -> Word:
    """Lexicographically first geodesic read backwards from g"""
    d = ball.table[g]
    letters: List[int] = []
    current = g
    while d > 0:
        for x in spec.alphabet.letters:
            previous = spec.act(current, x ^ 1)
            if ball.table.get(previous) == d - 1:
                letters.append(x)
                current = previous
                d -= 1
                break
    return tuple(reversed(letters))


# Combings

def _reduced_words(alphabet: InvolutiveAlphabet) -> Fsa:
    """Freely reduced words: one state per last letter plus the start"""
    edges = [(0, (x,), 1 + x) for x in alphabet.letters]
    edges += [(1 + y, (x,), 1 + x) for y in alphabet.letters for x in alphabet.letters if x != y ^ 1]
    return Fsa(alphabet, alphabet.size + 1, {0}, range(alphabet.size + 1), edges)


def _shortlex_tree(spec: FiniteTable) -> Fsa:
    forms = spec.shortlex_forms
    index = {g: i for i, g in enumerate(forms)}
    edges = []
    for g, word in forms.items():
        for x in spec.alphabet.letters:
            h = spec.act(g, x)
            if forms[h] == word + (x,):
                edges.append((index[g], (x,), index[h]))
    return Fsa(spec.alphabet, len(forms), {index[spec.identity]}, range(len(forms)), edges)


def _syllable_acceptor(spec: FreeProduct, shortlex: bool) -> Fsa:
    """Words whose maximal one-factor blocks are geodesic (or shortlex) in their factor"""
    states: Dict[Tuple[int, int], int] = {}
    for i, factor in enumerate(spec.factors):
        for g in factor.shortlex_forms:
            if g != factor.identity:
                states[(i, g)] = len(states) + 1
    edges = []
    for source in [None] + list(states):
        for x in spec.alphabet.letters:
            j, local = spec.locate[x]
            factor = spec.factors[j]
            g = source[1] if source is not None and source[0] == j else factor.identity
            h = factor.act(g, local)
            if shortlex:
                ok = factor.shortlex_forms[h] == factor.shortlex_forms[g] + (local,)
            else:
                ok = factor.distances[h] == factor.distances[g] + 1
            if ok:
                edges.append((0 if source is None else states[source], (x,), states[(j, h)]))
    return Fsa(spec.alphabet, len(states) + 1, {0}, range(len(states) + 1), edges)


def _factor_concat(spec: DirectProduct, shortlex: bool) -> Fsa:
    pick = shortlex_combing if shortlex else geodesic_combing
    result = Fsa.epsilon(spec.alphabet)
    for factor, offset in zip(spec.factors, spec.offsets):
        result = concat(result, map_labels(pick(factor), spec.alphabet, offset))
    return result


def geodesic_combing(spec: GroupSpec) -> Fsa:
    if isinstance(spec, Free):
        return _reduced_words(spec.alphabet)
    if isinstance(spec, FiniteTable):
        return _shortlex_tree(spec)
    if isinstance(spec, FreeProduct):
        return _syllable_acceptor(spec, shortlex=False)
    if isinstance(spec, DirectProduct):
        return _factor_concat(spec, shortlex=False)
    raise UnsupportedBackend(f"no geodesic combing for {spec!r}")


def shortlex_combing(spec: GroupSpec) -> Fsa:
    if isinstance(spec, Free):
        return _reduced_words(spec.alphabet)
    if isinstance(spec, FiniteTable):
        return _shortlex_tree(spec)
    if isinstance(spec, FreeProduct):
        return _syllable_acceptor(spec, shortlex=True)
    if isinstance(spec, DirectProduct):
        return _factor_concat(spec, shortlex=True)
    raise UnsupportedBackend(f"no shortlex combing for {spec!r}")


def build_combing(spec: GroupSpec, selector: str) -> Tuple[Fsa, CombingInfo]:
    """Resolve a combing selector: geodesic, shortlex, sigma-star or an acceptor file"""
    if selector == "geodesic":
        R = geodesic_combing(spec)
        complete = isinstance(spec, (Free, FreeProduct))
        unique = not isinstance(spec, FreeProduct) or all(f.unique_geodesics for f in spec.factors)
    elif selector == "shortlex":
        R = shortlex_combing(spec)
        complete = isinstance(spec, Free)
        unique = True
    elif selector == "sigma-star":
        R = Fsa.sigma_star(spec.alphabet)
        complete = False
        unique = False
    else:
        path = Path(selector)
        if not path.is_file():
            raise ConfigError(f"unknown combing selector {selector!r}")
        try:
            R = Fsa.from_text(spec.alphabet, path.read_text())
        except (ValueError, UnknownSymbol) as e:
            raise ConfigError(f"cannot read acceptor {selector}: {e}") from e
        complete = False
        unique = False
    info = CombingInfo(name=selector, geodesic_complete=complete, unique_representatives=unique, states=R.num_states)
    return R, info


def is_surjective_at_radius(
    spec: GroupSpec,
    R: Fsa,
    radius: int,
    slack: Optional[int] = None,
    budget: Optional[int] = None,
) -> bool:
    """Every element of the radius ball is the image of an R-word of length <= radius + slack"""
    ball = cayley_ball(spec, radius, budget)
    limit = budget or settings.budget_elements
    D = determinize_letterize(R)
    max_len = radius + (2 * radius if slack is None else slack)
    hit = set()
    start = (D.start, spec.identity)
    seen = {start}
    frontier = [start]
    if D.start in D.terminal:
        hit.add(spec.identity)
    for _ in range(max_len):
        nxt = []
        for q, g in frontier:
            for label, t in D.out_edges[q]:
                x = label[0]
                if x == HASH:
                    continue
                key = (t, spec.act(g, x))
                if key not in seen:
                    seen.add(key)
                    nxt.append(key)
                    if t in D.terminal:
                        hit.add(key[1])
        if len(seen) > limit:
            raise BudgetExceeded("surjectivity search", limit)
        frontier = nxt
    missing = [g for g in ball.table if g not in hit]
    if missing:
        logger.debug(f"combing misses {len(missing)} elements of the radius-{radius} ball")
    return not missing


# Group definitions

def _alphabet(section: AlphabetSection) -> InvolutiveAlphabet:
    if section.generators is not None:
        names = InvolutiveAlphabet.from_generators(section.generators).names
    else:
        names = InvolutiveAlphabet.from_pairs(section.pairs).names
    return InvolutiveAlphabet(names, section.marker)


def build_group(definition: GroupFile) -> GroupSpec:
    kind = definition.backend.kind
    try:
        if kind == "finite_table":
            alphabet = _alphabet(definition.alphabet)
            mapping = definition.table.generators
            missing = [n for n in alphabet.names if n not in mapping]
            if missing:
                raise ValueError(f"no generator image for {missing}")
            images = [mapping[n] for n in alphabet.names]
            return FiniteTable(alphabet, definition.table.rows, images, definition.name)
        if kind == "free":
            return Free(definition.backend.rank, _alphabet(definition.alphabet), definition.name)
        factors = [build_group(f) for f in definition.factors]
        if kind == "free_product":
            return FreeProduct(factors, definition.name)
        return DirectProduct(factors, definition.name)
    except ValueError as e:
        raise GroupFileError(f"group {definition.name!r}: {e}") from e


def load_group(path: Union[str, Path]) -> GroupSpec:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"group file {path} does not exist") from None
    except tomllib.TOMLDecodeError as e:
        raise GroupFileError(f"{path}: {e}") from e
    raw.setdefault("name", path.stem)
    try:
        definition = GroupFile.model_validate(raw)
    except ValidationError as e:
        raise GroupFileError(f"{path}: {e}") from e
    spec = build_group(definition)
    logger.info(f"📁 Loaded group {spec.name} ({spec.kind}) from {path}")
    return spec


def _cyclic(n: int, generators: Sequence[str], name: str) -> FiniteTable:
    rows = [[(i + j) % n for j in range(n)] for i in range(n)]
    alphabet = InvolutiveAlphabet.from_generators(generators)
    images = []
    for _ in generators:
        images.extend([1 % n, (n - 1) % n])
    return FiniteTable(alphabet, rows, images, name)


def _symmetric3() -> FiniteTable:
    perms = sorted(itertools.permutations(range(3)))
    index = {p: i for i, p in enumerate(perms)}

    def compose(p, q):
        # apply p first, then q
        return tuple(q[p[k]] for k in range(3))

    rows = [[index[compose(p, q)] for q in perms] for p in perms]
    swap, cycle = index[(1, 0, 2)], index[(1, 2, 0)]
    cycle_inverse = index[(2, 0, 1)]
    alphabet = InvolutiveAlphabet.from_generators("ab")
    return FiniteTable(alphabet, rows, [swap, swap, cycle, cycle_inverse], "s3")


def _z2(letter: str) -> FiniteTable:
    return FiniteTable(InvolutiveAlphabet.from_generators(letter), [[0, 1], [1, 0]], [1, 1], f"z2_{letter}")


BUILTIN_GROUPS = ("trivial", "z2", "z3", "s3", "f1", "f2", "d_inf", "z_squared")


def builtin_group(name: str) -> GroupSpec:
    if name == "trivial":
        return _cyclic(1, "a", "trivial")
    if name == "z2":
        return _cyclic(2, "a", "z2")
    if name == "z3":
        return _cyclic(3, "a", "z3")
    if name == "s3":
        return _symmetric3()
    if name == "f1":
        return Free(1, name="f1")
    if name == "f2":
        return Free(2, name="f2")
    if name == "d_inf":
        return FreeProduct([_z2("a"), _z2("b")], "d_inf")
    if name == "z_squared":
        a = Free(1, InvolutiveAlphabet.from_generators("a"), "z_a")
        b = Free(1, InvolutiveAlphabet.from_generators("b"), "z_b")
        return DirectProduct([a, b], "z_squared")
    raise ConfigError(f"unknown builtin group {name!r}; choose from {', '.join(BUILTIN_GROUPS)}")


def resolve_group(selector: str) -> GroupSpec:
    """Builtin name or path to a TOML group definition"""
    if selector in BUILTIN_GROUPS:
        return builtin_group(selector)
    if Path(selector).suffix:
        return load_group(selector)
    return builtin_group(selector)
