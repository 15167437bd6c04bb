"""
Rational transductions: finite automata whose edges carry pairs of words.

Relations are read input-first: an edge (p, (x, y), q) consumes x on the input
tape and writes y on the output tape. Composition follows relation
composition, so compose(S, T) applies T first.
"""
import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .automata import Fsa, parse_label
from .automata import trim as trim_fsa
from .errors import HashNotInvertible, NotLinearNormalForm, SearchBudgetExceeded, StateBudgetExceeded
from .grammars import Cfg, Production, is_nonterminal
from .settings import settings
from .words import EPSILON, HASH, InvolutiveAlphabet, Word, formal_inverse

logger = logging.getLogger(__name__)

PairLabel = Tuple[Word, Word]
PairEdge = Tuple[int, PairLabel, int]


@dataclass(frozen=True)
class Transducer:
    alphabet: InvolutiveAlphabet
    num_states: int
    initial: FrozenSet[int]
    terminal: FrozenSet[int]
    edges: Tuple[PairEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, "initial", frozenset(self.initial))
        object.__setattr__(self, "terminal", frozenset(self.terminal))
        normalized = set((p, (tuple(x), tuple(y)), q) for p, (x, y), q in self.edges)
        object.__setattr__(self, "edges", tuple(sorted(normalized)))
        if self.num_states < 1 or not self.initial:
            raise ValueError("a transducer needs a state and an initial state")
        states = range(self.num_states)
        if not (self.initial <= set(states) and self.terminal <= set(states)):
            raise ValueError("initial/terminal states out of range")
        for p, (x, y), q in self.edges:
            if p not in states or q not in states:
                raise ValueError(f"edge {p} -> {q} out of range")
            self.alphabet.check(x)
            self.alphabet.check(y)

    @classmethod
    def empty(cls, alphabet: InvolutiveAlphabet) -> "Transducer":
        return cls(alphabet, 1, {0}, set(), ())

    @cached_property
    def out_edges(self) -> List[List[Tuple[PairLabel, int]]]:
        out: List[List[Tuple[PairLabel, int]]] = [[] for _ in range(self.num_states)]
        for p, label, q in self.edges:
            out[p].append((label, q))
        return out

    @cached_property
    def in_edges(self) -> List[List[Tuple[PairLabel, int]]]:
        inc: List[List[Tuple[PairLabel, int]]] = [[] for _ in range(self.num_states)]
        for p, label, q in self.edges:
            inc[q].append((label, p))
        return inc

    def to_text(self) -> str:
        def side(w: Word) -> str:
            if not w:
                return "-"
            if all(len(n) == 1 for n in self.alphabet.names):
                return self.alphabet.render(w)
            return ",".join(self.alphabet.name(x) for x in w)

        lines = []
        for q in range(self.num_states):
            flags = (" initial" if q in self.initial else "") + (" terminal" if q in self.terminal else "")
            lines.append(f"state {q}{flags}")
        for p, (x, y), q in self.edges:
            lines.append(f"edge {p} {side(x)}|{side(y)} {q}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, alphabet: InvolutiveAlphabet, text: str) -> "Transducer":
        initial: Set[int] = set()
        terminal: Set[int] = set()
        edges: List[PairEdge] = []
        highest = 0
        for number, raw in enumerate(text.splitlines(), 1):
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "state" and len(parts) >= 2:
                q = int(parts[1])
                highest = max(highest, q)
                if "initial" in parts[2:]:
                    initial.add(q)
                if "terminal" in parts[2:]:
                    terminal.add(q)
            elif parts[0] == "edge" and len(parts) == 4 and parts[2].count("|") == 1:
                p, q = int(parts[1]), int(parts[3])
                highest = max(highest, p, q)
                x, y = parts[2].split("|")
                edges.append((p, (parse_label(alphabet, x), parse_label(alphabet, y)), q))
            else:
                raise ValueError(f"line {number}: cannot parse {raw!r}")
        return cls(alphabet, highest + 1, initial, terminal, edges)


def _check_budget(count: int, budget: Optional[int], what: str) -> None:
    limit = budget or settings.budget_states
    if count > limit:
        raise StateBudgetExceeded(what, limit)


def diagonal(alphabet: InvolutiveAlphabet, with_hash: bool = True) -> Transducer:
    """{(w, w)} over Σ_# (or Σ)"""
    symbols = alphabet.symbols if with_hash else tuple(alphabet.letters)
    return Transducer(alphabet, 1, {0}, {0}, [(0, ((x,), (x,)), 0) for x in symbols])


def single_pair(alphabet: InvolutiveAlphabet, u: Word, v: Word) -> Transducer:
    return Transducer(alphabet, 2, {0}, {1}, [(0, (u, v), 1)])


def trim(T: Transducer) -> Transducer:
    forward = set(T.initial)
    stack = list(T.initial)
    while stack:
        p = stack.pop()
        for _, q in T.out_edges[p]:
            if q not in forward:
                forward.add(q)
                stack.append(q)
    backward = set(T.terminal)
    stack = list(T.terminal)
    while stack:
        q = stack.pop()
        for _, p in T.in_edges[q]:
            if p not in backward:
                backward.add(p)
                stack.append(p)
    live = sorted(forward & backward)
    if not live:
        return Transducer.empty(T.alphabet)
    index = {q: i for i, q in enumerate(live)}
    return Transducer(
        T.alphabet,
        len(live),
        {index[q] for q in T.initial if q in index},
        {index[q] for q in T.terminal if q in index},
        [(index[p], l, index[q]) for p, l, q in T.edges if p in index and q in index],
    )


# Membership and bounded enumeration

def relate(T: Transducer, u: Word, v: Word, budget: Optional[int] = None) -> bool:
    """(u, v) ∈ ρ, by breadth-first search over (state, input cursor, output cursor)"""
    limit = budget or settings.budget_search
    start = [(p, 0, 0) for p in sorted(T.initial)]
    seen = set(start)
    queue = deque(start)
    while queue:
        p, i, j = queue.popleft()
        if i == len(u) and j == len(v) and p in T.terminal:
            return True
        for (x, y), q in T.out_edges[p]:
            if u[i:i + len(x)] != x or v[j:j + len(y)] != y:
                continue
            config = (q, i + len(x), j + len(y))
            if config not in seen:
                seen.add(config)
                if len(seen) > limit:
                    raise SearchBudgetExceeded("relate search", limit)
                queue.append(config)
    return False


def image_of_word(T: Transducer, u: Word, max_out: int, budget: Optional[int] = None) -> Set[Word]:
    """All v with (u, v) ∈ ρ and |v| <= max_out"""
    limit = budget or settings.budget_search
    start = [(p, 0, EPSILON) for p in sorted(T.initial)]
    seen = set(start)
    queue = deque(start)
    found: Set[Word] = set()
    while queue:
        p, i, out = queue.popleft()
        if i == len(u) and p in T.terminal:
            found.add(out)
        for (x, y), q in T.out_edges[p]:
            if u[i:i + len(x)] != x or len(out) + len(y) > max_out:
                continue
            config = (q, i + len(x), out + y)
            if config not in seen:
                seen.add(config)
                if len(seen) > limit:
                    raise SearchBudgetExceeded("image search", limit)
                queue.append(config)
    return found


def enumerate_pairs(T: Transducer, max_len: int, budget: Optional[int] = None) -> List[Tuple[Word, Word]]:
    """Pairs of ρ with both sides of length <= max_len, sorted"""
    limit = budget or settings.budget_search
    start = [(p, EPSILON, EPSILON) for p in sorted(T.initial)]
    seen = set(start)
    queue = deque(start)
    found: Set[Tuple[Word, Word]] = set()
    while queue:
        p, u, v = queue.popleft()
        if p in T.terminal:
            found.add((u, v))
        for (x, y), q in T.out_edges[p]:
            if len(u) + len(x) > max_len or len(v) + len(y) > max_len:
                continue
            config = (q, u + x, v + y)
            if config not in seen:
                seen.add(config)
                if len(seen) > limit:
                    raise SearchBudgetExceeded("pair enumeration", limit)
                queue.append(config)
    return sorted(found)


def bounded_equal(S: Transducer, T: Transducer, bound: int = 5) -> bool:
    return enumerate_pairs(S, bound) == enumerate_pairs(T, bound)


# Rational operations

def _disjoint(S: Transducer, T: Transducer) -> Tuple[int, List[PairEdge]]:
    if S.alphabet != T.alphabet:
        raise ValueError("transducers are over different alphabets")
    offset = S.num_states
    return offset, list(S.edges) + [(p + offset, l, q + offset) for p, l, q in T.edges]


def union(S: Transducer, T: Transducer) -> Transducer:
    offset, edges = _disjoint(S, T)
    return trim(Transducer(
        S.alphabet,
        S.num_states + T.num_states,
        set(S.initial) | {q + offset for q in T.initial},
        set(S.terminal) | {q + offset for q in T.terminal},
        edges,
    ))


def product(S: Transducer, T: Transducer) -> Transducer:
    """Componentwise concatenation {(u1 u2, v1 v2)}"""
    offset, edges = _disjoint(S, T)
    edges += [(t, (EPSILON, EPSILON), i + offset) for t in S.terminal for i in T.initial]
    return trim(Transducer(S.alphabet, S.num_states + T.num_states, S.initial, {q + offset for q in T.terminal}, edges))


def star(T: Transducer) -> Transducer:
    hub = T.num_states
    edges = list(T.edges)
    edges += [(hub, (EPSILON, EPSILON), i) for i in T.initial]
    edges += [(t, (EPSILON, EPSILON), hub) for t in T.terminal]
    return trim(Transducer(T.alphabet, T.num_states + 1, {hub}, {hub}, edges))


def inverse_relation(T: Transducer) -> Transducer:
    return Transducer(T.alphabet, T.num_states, T.initial, T.terminal, [(p, (y, x), q) for p, (x, y), q in T.edges])


def invert_both(T: Transducer) -> Transducer:
    """{(w, v) | (w⁻¹, v⁻¹) ∈ ρ}: reverse every edge and invert both labels"""
    T = trim(T)
    if not T.terminal:
        return T
    try:
        edges = [(q, (formal_inverse(x), formal_inverse(y)), p) for p, (x, y), q in T.edges]
    except HashNotInvertible:
        raise HashNotInvertible("transducer labels use the marker") from None
    return Transducer(T.alphabet, T.num_states, T.terminal, T.initial, edges)


def split_labels(T: Transducer) -> Transducer:
    """Equivalent transducer whose labels have |x| <= 1 and |y| <= 1"""
    count = T.num_states
    edges: List[PairEdge] = []
    for p, (x, y), q in T.edges:
        steps = max(len(x), len(y), 1)
        if steps == 1:
            edges.append((p, (x, y), q))
            continue
        prev = p
        for k in range(steps):
            target = q if k == steps - 1 else count
            edges.append((prev, (x[k:k + 1], y[k:k + 1]), target))
            if k < steps - 1:
                prev = count
                count += 1
    return Transducer(T.alphabet, count, T.initial, T.terminal, edges)


def compose(S: Transducer, T: Transducer, budget: Optional[int] = None) -> Transducer:
    """S∘T = {(u, w) | (u, v) ∈ T, (v, w) ∈ S}"""
    T1, S1 = split_labels(T), split_labels(S)
    reads: Dict[Tuple[int, int], List[Tuple[Word, int]]] = defaultdict(list)
    silent: Dict[int, List[Tuple[Word, int]]] = defaultdict(list)
    for p, (x, y), q in S1.edges:
        if x:
            reads[(p, x[0])].append((y, q))
        else:
            silent[p].append((y, q))

    index: Dict[Tuple[int, int], int] = {}
    queue: deque = deque()

    def state(t: int, s: int) -> int:
        if (t, s) not in index:
            index[(t, s)] = len(index)
            _check_budget(len(index), budget, "composition")
            queue.append((t, s))
        return index[(t, s)]

    initial = {state(t, s) for t in sorted(T1.initial) for s in sorted(S1.initial)}
    edges: List[PairEdge] = []
    while queue:
        t, s = queue.popleft()
        here = index[(t, s)]
        for (x, y), t2 in T1.out_edges[t]:
            if not y:
                edges.append((here, (x, EPSILON), state(t2, s)))
                continue
            for z, s2 in reads.get((s, y[0]), ()):
                edges.append((here, (x, z), state(t2, s2)))
        for z, s2 in silent.get(s, ()):
            edges.append((here, (EPSILON, z), state(t, s2)))
    terminal = {i for (t, s), i in index.items() if t in T1.terminal and s in S1.terminal}
    result = trim(Transducer(T.alphabet, len(index), initial, terminal, edges))
    logger.debug(f"composition: {len(index)} product states, {result.num_states} after trim")
    return result


def restrict(T: Transducer, R: Fsa, S: Fsa, budget: Optional[int] = None) -> Transducer:
    """ρ ∩ (L(R) × L(S))"""
    T1 = split_labels(T)
    LR, LS = R.letterized, S.letterized
    index: Dict[Tuple[int, int, int], int] = {}
    queue: deque = deque()

    def state(key: Tuple[int, int, int]) -> int:
        if key not in index:
            index[key] = len(index)
            _check_budget(len(index), budget, "restriction")
            queue.append(key)
        return index[key]

    initial = {state((t, r, s)) for t in sorted(T1.initial) for r in sorted(LR.initial) for s in sorted(LS.initial)}
    edges: List[PairEdge] = []
    while queue:
        t, r, s = queue.popleft()
        here = index[(t, r, s)]
        for (x, y), t2 in T1.out_edges[t]:
            r_next = [r] if not x else LR.successors.get((r, x[0]), ())
            s_next = [s] if not y else LS.successors.get((s, y[0]), ())
            for r2 in r_next:
                for s2 in s_next:
                    edges.append((here, (x, y), state((t2, r2, s2))))
    terminal = {
        i for (t, r, s), i in index.items() if t in T1.terminal and r in LR.terminal and s in LS.terminal
    }
    return trim(Transducer(T.alphabet, len(index), initial, terminal, edges))


def apply_to_regular(T: Transducer, A: Fsa, budget: Optional[int] = None) -> Fsa:
    """Acceptor of ρ(L(A))"""
    T1 = split_labels(T)
    LA = A.letterized
    index: Dict[Tuple[int, int], int] = {}
    queue: deque = deque()

    def state(key: Tuple[int, int]) -> int:
        if key not in index:
            index[key] = len(index)
            _check_budget(len(index), budget, "image acceptor")
            queue.append(key)
        return index[key]

    initial = {state((t, a)) for t in sorted(T1.initial) for a in sorted(LA.initial)}
    edges = []
    while queue:
        t, a = queue.popleft()
        here = index[(t, a)]
        for (x, y), t2 in T1.out_edges[t]:
            for a2 in ([a] if not x else LA.successors.get((a, x[0]), ())):
                edges.append((here, y, state((t2, a2))))
    terminal = {i for (t, a), i in index.items() if t in T1.terminal and a in LA.terminal}
    return trim_fsa(Fsa(A.alphabet, len(index), initial, terminal, edges))


def context_embed(alphabet: InvolutiveAlphabet, w: Word, v: Word) -> Transducer:
    """{(x w y, x v y) | x, y ∈ Σ_#*} = D (w, v) D with D the diagonal"""
    D = diagonal(alphabet)
    return product(product(D, single_pair(alphabet, w, v)), D)


# Linear grammars

def to_linear_grammar(T: Transducer) -> Cfg:
    """Grammar for {u#w | (u, w⁻¹) ∈ ρ}: A_p -> x A_q y⁻¹ per edge, A_q -> # per terminal state"""
    T = trim(T)
    productions = []
    for p, (x, y), q in T.edges:
        if HASH in x or HASH in y:
            raise HashNotInvertible("linear grammars need marker-free transducer labels")
        productions.append(Production(f"A{p}", x + (f"A{q}",) + formal_inverse(y)))
    for q in sorted(T.terminal):
        productions.append(Production(f"A{q}", (HASH,)))
    if len(T.initial) == 1:
        start = f"A{next(iter(T.initial))}"
    else:
        start = "S"
        productions.extend(Production("S", (f"A{p}",)) for p in sorted(T.initial))
    return Cfg(T.alphabet, start, productions)


def from_linear_grammar(G: Cfg) -> Transducer:
    """Inverse of to_linear_grammar for grammars in the A -> xBy / A -> x#y shapes"""
    names = sorted(G.nonterminals - {G.start})
    index = {name: i for i, name in enumerate([G.start] + names)}
    final = len(index)
    edges: List[PairEdge] = []
    for production in G.productions:
        rhs = production.rhs
        positions = [k for k, s in enumerate(rhs) if is_nonterminal(s)]
        if len(positions) == 1:
            k = positions[0]
            target = index[rhs[k]]
        elif not positions and rhs.count(HASH) == 1:
            k = rhs.index(HASH)
            target = final
        else:
            raise NotLinearNormalForm(f"production {production} is not of the form A -> xBy or A -> x#y")
        x, y = rhs[:k], rhs[k + 1:]
        if HASH in x or HASH in y:
            raise NotLinearNormalForm(f"production {production} has a marker outside the centre")
        edges.append((index[production.lhs], (x, formal_inverse(y)), target))
    return trim(Transducer(G.alphabet, final + 1, {index[G.start]}, {final}, edges))
