"""
Alphabets with formal inverses and the elementary word maps.

Letters are small integers paired so that the formal inverse flips the low bit
(0 <-> 1, 2 <-> 3, ...). The marker # is the shared code HASH. Words are plain
tuples of codes, so they are immutable and hashable.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import HashNotInvertible, UnknownSymbol

HASH = -1

Word = Tuple[int, ...]
EPSILON: Word = ()

_EPSILON_SPELLINGS = ("", "-", "ε", "eps")


@dataclass(frozen=True)
class InvolutiveAlphabet:
    names: Tuple[str, ...]
    hash_name: str = "#"

    def __post_init__(self):
        if len(self.names) % 2:
            raise ValueError("letters must come in inverse pairs")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate letter names in {self.names}")
        if self.hash_name in self.names:
            raise ValueError(f"marker {self.hash_name!r} is also a letter")
        for name in self.names:
            if not name or any(c.isspace() for c in name) or name in _EPSILON_SPELLINGS or "|" in name or "," in name:
                raise ValueError(f"invalid letter name {name!r}")

    @classmethod
    def from_generators(cls, generators: Iterable[str]) -> "InvolutiveAlphabet":
        """Pair each generator with its case-swapped name: a <-> A"""
        names: List[str] = []
        for gen in generators:
            inverse = gen.swapcase()
            if inverse == gen:
                inverse = gen + "'"
            names.extend([gen, inverse])
        return cls(tuple(names))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[str]]) -> "InvolutiveAlphabet":
        names: List[str] = []
        for pair in pairs:
            if len(pair) != 2:
                raise ValueError(f"inverse pair must have two names, got {pair!r}")
            names.extend(pair)
        return cls(tuple(names))

    @classmethod
    def concat(cls, alphabets: Sequence["InvolutiveAlphabet"]) -> "InvolutiveAlphabet":
        names: List[str] = []
        for alphabet in alphabets:
            names.extend(alphabet.names)
        return cls(tuple(names))

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def letters(self) -> range:
        return range(len(self.names))

    @property
    def symbols(self) -> Tuple[int, ...]:
        """Σ_#, in code order (marker first)"""
        return (HASH,) + tuple(self.letters)

    def inv(self, x: int) -> int:
        if x == HASH:
            raise HashNotInvertible("the marker has no formal inverse")
        return x ^ 1

    def name(self, x: int) -> str:
        return self.hash_name if x == HASH else self.names[x]

    @property
    def _codes(self) -> Dict[str, int]:
        codes = {name: i for i, name in enumerate(self.names)}
        codes[self.hash_name] = HASH
        return codes

    @property
    def _single_char(self) -> bool:
        return all(len(n) == 1 for n in self.names) and len(self.hash_name) == 1

    def code(self, name: str) -> int:
        try:
            return self._codes[name]
        except KeyError:
            raise UnknownSymbol(f"unknown symbol {name!r}") from None

    def parse(self, text: str) -> Word:
        text = text.strip()
        if text in _EPSILON_SPELLINGS:
            return EPSILON
        codes = self._codes
        if any(c.isspace() for c in text):
            tokens = text.split()
        elif self._single_char:
            tokens = list(text)
        else:
            # greedy longest match
            tokens = []
            longest = max(len(n) for n in codes)
            i = 0
            while i < len(text):
                for size in range(min(longest, len(text) - i), 0, -1):
                    if text[i:i + size] in codes:
                        tokens.append(text[i:i + size])
                        i += size
                        break
                else:
                    raise UnknownSymbol(f"cannot tokenize {text!r} at position {i}")
        word = []
        for token in tokens:
            if token not in codes:
                raise UnknownSymbol(f"unknown symbol {token!r}")
            word.append(codes[token])
        return tuple(word)

    def render(self, w: Word, human: bool = False) -> str:
        if not w:
            return "ε" if human else ""
        sep = "" if self._single_char else " "
        return sep.join(self.name(x) for x in w)

    def check(self, w: Word) -> None:
        for x in w:
            if x != HASH and not 0 <= x < self.size:
                raise UnknownSymbol(f"symbol code {x} is not in the alphabet")


def formal_inverse(w: Word) -> Word:
    if HASH in w:
        raise HashNotInvertible(f"word {w} contains the marker")
    return tuple(x ^ 1 for x in reversed(w))


def free_reduce(w: Word) -> Word:
    if HASH in w:
        raise HashNotInvertible(f"word {w} contains the marker")
    stack: List[int] = []
    for x in w:
        if stack and stack[-1] == x ^ 1:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def hash_erase(w: Word) -> Word:
    return tuple(x for x in w if x != HASH)


def split_on_hash(w: Word) -> List[Word]:
    parts: List[Word] = []
    current: List[int] = []
    for x in w:
        if x == HASH:
            parts.append(tuple(current))
            current = []
        else:
            current.append(x)
    parts.append(tuple(current))
    return parts


def join_on_hash(parts: Sequence[Word]) -> Word:
    word: List[int] = []
    for i, part in enumerate(parts):
        if i:
            word.append(HASH)
        word.extend(part)
    return tuple(word)
