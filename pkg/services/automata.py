"""
Finite-state acceptors over Σ_#.

An Fsa is immutable. Edge labels are whole words (possibly ε, possibly longer
than one symbol) and several initial states are allowed; letterize() and
determinize_letterize() bring a machine into single-symbol form when a
construction needs it. Every operation returns a new machine.
"""
import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .errors import HashNotInvertible, MarkerInInput, OutputBudgetExceeded, StateBudgetExceeded
from .settings import settings
from .words import EPSILON, HASH, InvolutiveAlphabet, Word, formal_inverse, hash_erase

logger = logging.getLogger(__name__)

Edge = Tuple[int, Word, int]


@dataclass(frozen=True)
class Fsa:
    alphabet: InvolutiveAlphabet
    num_states: int
    initial: FrozenSet[int]
    terminal: FrozenSet[int]
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "initial", frozenset(self.initial))
        object.__setattr__(self, "terminal", frozenset(self.terminal))
        object.__setattr__(self, "edges", tuple(sorted(set((p, tuple(l), q) for p, l, q in self.edges))))
        if self.num_states < 1:
            raise ValueError("an acceptor needs at least one state")
        if not self.initial:
            raise ValueError("an acceptor needs at least one initial state")
        states = range(self.num_states)
        if not (self.initial <= set(states) and self.terminal <= set(states)):
            raise ValueError("initial/terminal states out of range")
        for p, label, q in self.edges:
            if p not in states or q not in states:
                raise ValueError(f"edge {p} -> {q} out of range")
            self.alphabet.check(label)

    # Constructors

    @classmethod
    def empty(cls, alphabet: InvolutiveAlphabet) -> "Fsa":
        return cls(alphabet, 1, {0}, set(), ())

    @classmethod
    def epsilon(cls, alphabet: InvolutiveAlphabet) -> "Fsa":
        return cls(alphabet, 1, {0}, {0}, ())

    @classmethod
    def from_words(cls, alphabet: InvolutiveAlphabet, words: Iterable[Word]) -> "Fsa":
        """One edge per word, labelled with the whole word"""
        edges = [(0, tuple(w), 1) for w in words]
        return cls(alphabet, 2, {0}, {1}, edges)

    @classmethod
    def sigma_star(cls, alphabet: InvolutiveAlphabet, with_hash: bool = False) -> "Fsa":
        symbols = alphabet.symbols if with_hash else tuple(alphabet.letters)
        return cls(alphabet, 1, {0}, {0}, [(0, (x,), 0) for x in symbols])

    @classmethod
    def marker_pattern(cls, alphabet: InvolutiveAlphabet, markers: int) -> "Fsa":
        """Σ*(#Σ*)^k: words with exactly k markers"""
        edges = []
        for phase in range(markers + 1):
            edges.extend((phase, (x,), phase) for x in alphabet.letters)
            if phase < markers:
                edges.append((phase, (HASH,), phase + 1))
        return cls(alphabet, markers + 1, {0}, {markers}, edges)

    @classmethod
    def hash_suffix(cls, alphabet: InvolutiveAlphabet) -> "Fsa":
        """Σ*##"""
        edges = [(0, (x,), 0) for x in alphabet.letters] + [(0, (HASH, HASH), 1)]
        return cls(alphabet, 2, {0}, {1}, edges)

    @classmethod
    def table_shape(cls, combing: "Fsa") -> "Fsa":
        """R#R#R"""
        marker = cls.from_words(combing.alphabet, [(HASH,)])
        return concat(concat(concat(concat(combing, marker), combing), marker), combing)

    # Views

    @cached_property
    def out_edges(self) -> List[List[Tuple[Word, int]]]:
        out: List[List[Tuple[Word, int]]] = [[] for _ in range(self.num_states)]
        for p, label, q in self.edges:
            out[p].append((label, q))
        return out

    @cached_property
    def in_edges(self) -> List[List[Tuple[Word, int]]]:
        inc: List[List[Tuple[Word, int]]] = [[] for _ in range(self.num_states)]
        for p, label, q in self.edges:
            inc[q].append((label, p))
        return inc

    @cached_property
    def successors(self) -> Dict[Tuple[int, int], Tuple[int, ...]]:
        """(state, symbol) -> targets, for single-symbol edges"""
        table: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for p, label, q in self.edges:
            if len(label) == 1:
                table[(p, label[0])].append(q)
        return {k: tuple(v) for k, v in table.items()}

    @property
    def is_letterized(self) -> bool:
        return all(len(label) == 1 for _, label, _ in self.edges)

    @property
    def is_deterministic(self) -> bool:
        return (
            len(self.initial) == 1
            and self.is_letterized
            and len(self.successors) == len(self.edges)
        )

    @property
    def start(self) -> int:
        if len(self.initial) != 1:
            raise ValueError("acceptor has several initial states")
        return next(iter(self.initial))

    @cached_property
    def letterized(self) -> "Fsa":
        return letterize(self)

    def accepts(self, w: Word) -> bool:
        machine = self.letterized
        current = set(machine.initial)
        for x in w:
            current = {q for p in current for q in machine.successors.get((p, x), ())}
            if not current:
                return False
        return bool(current & machine.terminal)

    # Exchange format

    def _label_text(self, label: Word) -> str:
        if not label:
            return "-"
        if all(len(n) == 1 for n in self.alphabet.names):
            return self.alphabet.render(label)
        return ",".join(self.alphabet.name(x) for x in label)

    def to_text(self) -> str:
        lines = []
        for q in range(self.num_states):
            flags = (" initial" if q in self.initial else "") + (" terminal" if q in self.terminal else "")
            lines.append(f"state {q}{flags}")
        for p, label, q in self.edges:
            lines.append(f"edge {p} {self._label_text(label)} {q}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, alphabet: InvolutiveAlphabet, text: str) -> "Fsa":
        initial: Set[int] = set()
        terminal: Set[int] = set()
        edges: List[Edge] = []
        highest = 0
        for number, raw in enumerate(text.splitlines(), 1):
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "state" and len(parts) >= 2:
                q = int(parts[1])
                highest = max(highest, q)
                flags = set(parts[2:])
                if flags - {"initial", "terminal"}:
                    raise ValueError(f"line {number}: unknown state flags {sorted(flags)}")
                if "initial" in flags:
                    initial.add(q)
                if "terminal" in flags:
                    terminal.add(q)
            elif parts[0] == "edge" and len(parts) == 4:
                p, q = int(parts[1]), int(parts[3])
                highest = max(highest, p, q)
                edges.append((p, parse_label(alphabet, parts[2]), q))
            else:
                raise ValueError(f"line {number}: cannot parse {raw!r}")
        return cls(alphabet, highest + 1, initial, terminal, edges)


def parse_label(alphabet: InvolutiveAlphabet, token: str) -> Word:
    if token == "-":
        return EPSILON
    if "," in token:
        return tuple(alphabet.code(name) for name in token.split(","))
    return alphabet.parse(token)


def _check_budget(count: int, budget: Optional[int], what: str) -> None:
    limit = budget or settings.budget_states
    if count > limit:
        raise StateBudgetExceeded(what, limit)


def _same_alphabet(a: Fsa, b: Fsa) -> None:
    if a.alphabet != b.alphabet:
        raise ValueError("acceptors are over different alphabets")


def trim(A: Fsa) -> Fsa:
    """Keep only states on some initial -> terminal path, renumbered in order"""
    forward = set(A.initial)
    stack = list(A.initial)
    while stack:
        p = stack.pop()
        for _, q in A.out_edges[p]:
            if q not in forward:
                forward.add(q)
                stack.append(q)
    backward = set(A.terminal)
    stack = list(A.terminal)
    while stack:
        q = stack.pop()
        for _, p in A.in_edges[q]:
            if p not in backward:
                backward.add(p)
                stack.append(p)
    live = sorted(forward & backward)
    if not live:
        return Fsa.empty(A.alphabet)
    index = {q: i for i, q in enumerate(live)}
    return Fsa(
        A.alphabet,
        len(live),
        {index[q] for q in A.initial if q in index},
        {index[q] for q in A.terminal if q in index},
        [(index[p], l, index[q]) for p, l, q in A.edges if p in index and q in index],
    )


def letterize(A: Fsa) -> Fsa:
    """Equivalent trimmed acceptor with single-symbol labels and no ε edges"""
    count = A.num_states
    split: List[Edge] = []
    for p, label, q in A.edges:
        if len(label) <= 1:
            split.append((p, label, q))
            continue
        prev = p
        for x in label[:-1]:
            split.append((prev, (x,), count))
            prev = count
            count += 1
        split.append((prev, (label[-1],), q))

    eps: Dict[int, List[int]] = defaultdict(list)
    moves: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for p, label, q in split:
        if label:
            moves[p].append((label[0], q))
        else:
            eps[p].append(q)

    edges: Set[Edge] = set()
    terminal: Set[int] = set()
    for p in range(count):
        closure = {p}
        stack = [p]
        while stack:
            s = stack.pop()
            for t in eps.get(s, ()):
                if t not in closure:
                    closure.add(t)
                    stack.append(t)
        for c in closure:
            if c in A.terminal:
                terminal.add(p)
            for x, q in moves.get(c, ()):
                edges.add((p, (x,), q))
    return trim(Fsa(A.alphabet, count, A.initial, terminal, edges))


def determinize_letterize(A: Fsa, budget: Optional[int] = None) -> Fsa:
    """Subset construction on the letterized machine; states numbered in discovery order"""
    if A.is_deterministic:
        return A
    L = letterize(A)
    start = frozenset(L.initial)
    index: Dict[FrozenSet[int], int] = {start: 0}
    order = [start]
    edges: List[Edge] = []
    i = 0
    while i < len(order):
        subset = order[i]
        moves: Dict[int, Set[int]] = defaultdict(set)
        for s in subset:
            for label, t in L.out_edges[s]:
                moves[label[0]].add(t)
        for x in sorted(moves):
            target = frozenset(moves[x])
            if target not in index:
                index[target] = len(order)
                order.append(target)
                _check_budget(len(order), budget, "determinization")
            edges.append((i, (x,), index[target]))
        i += 1
    terminal = {index[s] for s in order if s & L.terminal}
    return Fsa(A.alphabet, len(order), {0}, terminal, edges)


def complete(D: Fsa) -> Fsa:
    """Add a sink so every (state, symbol of Σ_#) has a transition"""
    symbols = D.alphabet.symbols
    missing = [(q, x) for q in range(D.num_states) for x in symbols if (q, x) not in D.successors]
    if not missing:
        return D
    sink = D.num_states
    edges = list(D.edges) + [(q, (x,), sink) for q, x in missing] + [(sink, (x,), sink) for x in symbols]
    return Fsa(D.alphabet, D.num_states + 1, D.initial, D.terminal, edges)


def complement(A: Fsa, budget: Optional[int] = None) -> Fsa:
    """Complement with respect to Σ_#*"""
    D = complete(determinize_letterize(A, budget))
    return Fsa(D.alphabet, D.num_states, D.initial, set(range(D.num_states)) - D.terminal, D.edges)


def minimize(A: Fsa, budget: Optional[int] = None) -> Fsa:
    """Minimal complete DFA with states numbered breadth-first from the start state"""
    D = complete(determinize_letterize(A, budget))
    symbols = D.alphabet.symbols
    delta = {k: v[0] for k, v in D.successors.items()}
    block = [1 if q in D.terminal else 0 for q in range(D.num_states)]
    count = len(set(block))
    while True:
        signatures = [(block[q],) + tuple(block[delta[(q, x)]] for x in symbols) for q in range(D.num_states)]
        ids: Dict[tuple, int] = {}
        refined = [ids.setdefault(sig, len(ids)) for sig in signatures]
        block = refined
        if len(ids) == count:
            break
        count = len(ids)

    representative: Dict[int, int] = {}
    for q in range(D.num_states):
        representative.setdefault(block[q], q)
    numbering = {block[D.start]: 0}
    queue = deque([block[D.start]])
    edges: List[Edge] = []
    while queue:
        b = queue.popleft()
        q = representative[b]
        for x in symbols:
            target = block[delta[(q, x)]]
            if target not in numbering:
                numbering[target] = len(numbering)
                queue.append(target)
            edges.append((numbering[b], (x,), numbering[target]))
    terminal = {numbering[block[q]] for q in D.terminal if block[q] in numbering}
    return Fsa(D.alphabet, len(numbering), {0}, terminal, edges)


def canonical_form(A: Fsa, budget: Optional[int] = None) -> Tuple[int, Tuple[int, ...], Tuple[Edge, ...]]:
    m = minimize(A, budget)
    return m.num_states, tuple(sorted(m.terminal)), m.edges


def equivalent(A: Fsa, B: Fsa, budget: Optional[int] = None) -> bool:
    _same_alphabet(A, B)
    return canonical_form(A, budget) == canonical_form(B, budget)


def intersect(A: Fsa, B: Fsa, budget: Optional[int] = None) -> Fsa:
    _same_alphabet(A, B)
    LA, LB = A.letterized, B.letterized
    index: Dict[Tuple[int, int], int] = {}
    queue: deque = deque()
    for p in sorted(LA.initial):
        for q in sorted(LB.initial):
            index[(p, q)] = len(index)
            queue.append((p, q))
    edges: List[Edge] = []
    while queue:
        p, q = queue.popleft()
        for label, p2 in LA.out_edges[p]:
            for q2 in LB.successors.get((q, label[0]), ()):
                if (p2, q2) not in index:
                    index[(p2, q2)] = len(index)
                    _check_budget(len(index), budget, "intersection")
                    queue.append((p2, q2))
                edges.append((index[(p, q)], label, index[(p2, q2)]))
    starts = len(LA.initial) * len(LB.initial)
    terminal = {i for (p, q), i in index.items() if p in LA.terminal and q in LB.terminal}
    return trim(Fsa(A.alphabet, len(index), set(range(starts)), terminal, edges))


def _disjoint(A: Fsa, B: Fsa) -> Tuple[int, List[Edge]]:
    offset = A.num_states
    return offset, list(A.edges) + [(p + offset, l, q + offset) for p, l, q in B.edges]


def union(A: Fsa, B: Fsa) -> Fsa:
    _same_alphabet(A, B)
    offset, edges = _disjoint(A, B)
    return Fsa(
        A.alphabet,
        A.num_states + B.num_states,
        set(A.initial) | {q + offset for q in B.initial},
        set(A.terminal) | {q + offset for q in B.terminal},
        edges,
    )


def concat(A: Fsa, B: Fsa) -> Fsa:
    _same_alphabet(A, B)
    offset, edges = _disjoint(A, B)
    edges += [(t, EPSILON, i + offset) for t in A.terminal for i in B.initial]
    return Fsa(
        A.alphabet,
        A.num_states + B.num_states,
        A.initial,
        {q + offset for q in B.terminal},
        edges,
    )


def star(A: Fsa) -> Fsa:
    hub = A.num_states
    edges = list(A.edges)
    edges += [(hub, EPSILON, i) for i in A.initial]
    edges += [(t, EPSILON, hub) for t in A.terminal]
    return Fsa(A.alphabet, A.num_states + 1, {hub}, {hub}, edges)


def difference(A: Fsa, B: Fsa, budget: Optional[int] = None) -> Fsa:
    return intersect(A, complement(B, budget), budget)


def map_labels(A: Fsa, alphabet: InvolutiveAlphabet, shift: int) -> Fsa:
    """Re-home A onto a larger alphabet, shifting letter codes by an even offset"""
    if shift % 2:
        raise ValueError("letter shifts must be even to keep inverse pairs")
    edges = [(p, tuple(x if x == HASH else x + shift for x in l), q) for p, l, q in A.edges]
    return Fsa(alphabet, A.num_states, A.initial, A.terminal, edges)


def inverse_homomorphism_hash(A: Fsa) -> Fsa:
    """f⁻¹(L(A)) where f erases the marker: a marker loop at every state"""
    if any(HASH in label for _, label, _ in A.edges):
        raise MarkerInInput("acceptor already reads the marker")
    A = letterize(A)
    edges = list(A.edges) + [(q, (HASH,), q) for q in range(A.num_states)]
    return Fsa(A.alphabet, A.num_states, A.initial, A.terminal, edges)


def image_homomorphism_hash(A: Fsa) -> Fsa:
    """f(L(A)): marker labels become ε"""
    return Fsa(A.alphabet, A.num_states, A.initial, A.terminal, [(p, hash_erase(l), q) for p, l, q in A.edges])


def reverse_invert(A: Fsa) -> Fsa:
    """{w⁻¹ | w ∈ L(A)}"""
    A = trim(A)
    if not A.terminal:
        return A
    try:
        edges = [(q, formal_inverse(l), p) for p, l, q in A.edges]
    except HashNotInvertible:
        raise HashNotInvertible("cannot invert an acceptor whose language uses the marker") from None
    return Fsa(A.alphabet, A.num_states, A.terminal, A.initial, edges)


def enumerate_words(A: Fsa, max_len: int, budget: Optional[int] = None) -> List[Word]:
    """Accepted words of length <= max_len in lexicographic code order"""
    limit = budget or settings.budget_output
    D = determinize_letterize(A)
    to_terminal: Dict[int, int] = {q: 0 for q in D.terminal}
    queue = deque(D.terminal)
    while queue:
        q = queue.popleft()
        for _, p in D.in_edges[q]:
            if p not in to_terminal:
                to_terminal[p] = to_terminal[q] + 1
                queue.append(p)

    found: List[Word] = []
    stack: List[Tuple[int, Word]] = [(D.start, EPSILON)]
    while stack:
        q, prefix = stack.pop()
        if q in D.terminal:
            found.append(prefix)
            if len(found) > limit:
                raise OutputBudgetExceeded("acceptor enumeration", limit)
        for label, t in reversed(D.out_edges[q]):
            if t in to_terminal and len(prefix) + 1 + to_terminal[t] <= max_len:
                stack.append((t, prefix + label))
    return found

