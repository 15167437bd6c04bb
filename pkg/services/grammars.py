"""
Context-free grammars over Σ_#.

Symbols on right-hand sides are either terminal codes (int, the marker is
HASH) or nonterminal names (str). A grammar is immutable; every transformation
returns a new one. Products with automata and transducers go through boolean
state-relation matrices: for each nonterminal A, rel[A][p, q] is true when some
word derived from A drives the machine from p to q.
"""
import heapq
import logging
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

from .automata import Fsa, determinize_letterize
from .errors import (
    EpsilonInLanguage,
    ImageInconsistent,
    NotCnf,
    OutputBudgetExceeded,
    RankInconsistent,
    StateBudgetExceeded,
)
from .settings import settings
from .words import EPSILON, HASH, InvolutiveAlphabet, Word

logger = logging.getLogger(__name__)

Symbol = Union[int, str]


def is_nonterminal(symbol: Symbol) -> bool:
    return isinstance(symbol, str)


def _symbol_key(symbol: Symbol) -> tuple:
    return (1, 0, symbol) if isinstance(symbol, str) else (0, symbol, "")


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: Tuple[Symbol, ...]

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(self.rhs))

    def sort_key(self) -> tuple:
        return (self.lhs, tuple(_symbol_key(s) for s in self.rhs))

    def __str__(self) -> str:
        body = " ".join(s if isinstance(s, str) else str(s) for s in self.rhs) or "eps"
        return f"{self.lhs} -> {body}"


@dataclass(frozen=True)
class Cfg:
    alphabet: InvolutiveAlphabet
    start: str
    productions: Tuple[Production, ...]
    provenance: Mapping[str, str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        unique = {p.sort_key(): p for p in self.productions}
        object.__setattr__(self, "productions", tuple(unique[k] for k in sorted(unique)))
        for p in self.productions:
            self.alphabet.check(tuple(s for s in p.rhs if not isinstance(s, str)))

    @cached_property
    def nonterminals(self) -> FrozenSet[str]:
        names = {self.start}
        for p in self.productions:
            names.add(p.lhs)
            names.update(s for s in p.rhs if isinstance(s, str))
        return frozenset(names)

    @cached_property
    def by_lhs(self) -> Dict[str, List[Tuple[Symbol, ...]]]:
        table: Dict[str, List[Tuple[Symbol, ...]]] = defaultdict(list)
        for p in self.productions:
            table[p.lhs].append(p.rhs)
        return dict(table)

    @property
    def is_empty(self) -> bool:
        return not self.productions

    @property
    def is_cnf(self) -> bool:
        for p in self.productions:
            rhs = p.rhs
            if len(rhs) == 1 and not is_nonterminal(rhs[0]):
                continue
            if len(rhs) == 2 and all(is_nonterminal(s) for s in rhs):
                continue
            return False
        return True

    def to_text(self) -> str:
        lines = []
        for p in self.productions:
            body = " ".join(s if is_nonterminal(s) else self.alphabet.name(s) for s in p.rhs) or "eps"
            lines.append(f"{p.lhs} -> {body}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, alphabet: InvolutiveAlphabet, text: str, start: Optional[str] = None) -> "Cfg":
        """One production per line, symbols separated by whitespace; letter names are terminals"""
        productions = []
        for number, raw in enumerate(text.splitlines(), 1):
            if not raw.strip():
                continue
            if "->" not in raw:
                raise ValueError(f"line {number}: expected 'A -> α'")
            lhs, body = (part.strip() for part in raw.split("->", 1))
            tokens = body.split()
            if tokens == ["eps"]:
                tokens = []
            elif "eps" in tokens:
                raise ValueError(f"line {number}: 'eps' must stand alone")
            rhs = tuple(alphabet.code(t) if t in alphabet.names or t == alphabet.hash_name else t for t in tokens)
            productions.append(Production(lhs, rhs))
        if not productions and start is None:
            raise ValueError("empty grammar needs an explicit start symbol")
        return cls(alphabet, start or productions[0].lhs, productions)


class FreshNames:
    """Nonterminal names that collide with nothing already in use"""

    def __init__(self, taken: Iterable[str]):
        self.taken: Set[str] = set(taken)

    def make(self, base: str) -> str:
        name = base
        k = 1
        while name in self.taken:
            name = f"{base}'{k}"
            k += 1
        self.taken.add(name)
        return name


def _with(G: Cfg, productions: Iterable[Production], start: Optional[str] = None, provenance=None) -> Cfg:
    return Cfg(G.alphabet, start or G.start, tuple(productions), dict(G.provenance if provenance is None else provenance))


# Normal forms

def nullable(G: Cfg) -> Set[str]:
    result: Set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in G.productions:
            if p.lhs not in result and all(is_nonterminal(s) and s in result for s in p.rhs):
                result.add(p.lhs)
                changed = True
    return result


def prune(G: Cfg) -> Cfg:
    """Drop nonproductive, then unreachable, nonterminals"""
    productive: Set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in G.productions:
            if p.lhs not in productive and all(not is_nonterminal(s) or s in productive for s in p.rhs):
                productive.add(p.lhs)
                changed = True
    kept = [p for p in G.productions if p.lhs in productive and all(not is_nonterminal(s) or s in productive for s in p.rhs)]

    by_lhs: Dict[str, List[Production]] = defaultdict(list)
    for p in kept:
        by_lhs[p.lhs].append(p)
    reachable = {G.start} if G.start in productive else set()
    stack = list(reachable)
    while stack:
        a = stack.pop()
        for p in by_lhs.get(a, ()):
            for s in p.rhs:
                if is_nonterminal(s) and s not in reachable:
                    reachable.add(s)
                    stack.append(s)
    return _with(G, [p for p in kept if p.lhs in reachable])


def binarize(G: Cfg) -> Cfg:
    """Right-hand sides of length <= 2; suffixes are shared, ε and unit productions kept"""
    fresh = FreshNames(G.nonterminals)
    provenance = dict(G.provenance)
    suffix_names: Dict[Tuple[Symbol, ...], str] = {}
    out: List[Production] = []

    def name_for(suffix: Tuple[Symbol, ...], owner: str) -> Symbol:
        if len(suffix) == 1:
            return suffix[0]
        if suffix not in suffix_names:
            name = fresh.make(f"<{owner}>")
            suffix_names[suffix] = name
            provenance[name] = provenance.get(owner, owner)
            out.append(Production(name, (suffix[0], name_for(suffix[1:], owner))))
        return suffix_names[suffix]

    for p in G.productions:
        if len(p.rhs) <= 2:
            out.append(p)
        else:
            out.append(Production(p.lhs, (p.rhs[0], name_for(p.rhs[1:], p.lhs))))
    return _with(G, out, provenance=provenance)


def to_cnf(G: Cfg, drop_epsilon: bool = False) -> Cfg:
    """Chomsky normal form; with drop_epsilon the result generates L(G) - {ε}"""
    G = prune(G)
    if G.is_empty:
        return G
    fresh = FreshNames(set(G.nonterminals) | set(G.alphabet.names))
    provenance = dict(G.provenance)

    # TERM: terminals inside long right-hand sides get their own nonterminal
    wrappers: Dict[int, str] = {}
    stage: List[Production] = []

    def wrap(t: int) -> str:
        if t not in wrappers:
            wrappers[t] = fresh.make(f"A_{G.alphabet.name(t)}")
            stage.append(Production(wrappers[t], (t,)))
        return wrappers[t]

    for p in G.productions:
        if len(p.rhs) >= 2:
            stage.append(Production(p.lhs, tuple(s if is_nonterminal(s) else wrap(s) for s in p.rhs)))
        else:
            stage.append(p)

    # BIN
    binary: List[Production] = []
    for p in stage:
        rhs = p.rhs
        lhs = p.lhs
        k = 1
        while len(rhs) > 2:
            name = fresh.make(f"{p.lhs}_{k}")
            provenance[name] = provenance.get(p.lhs, p.lhs)
            binary.append(Production(lhs, (rhs[0], name)))
            lhs, rhs = name, rhs[1:]
            k += 1
        binary.append(Production(lhs, rhs))

    # DEL
    empty = nullable(Cfg(G.alphabet, G.start, tuple(binary)))
    if G.start in empty and not drop_epsilon:
        raise EpsilonInLanguage(f"start symbol {G.start} derives ε")
    expanded: Set[Production] = set()
    for p in binary:
        if not p.rhs:
            continue
        expanded.add(p)
        if len(p.rhs) == 2:
            left, right = p.rhs
            if is_nonterminal(left) and left in empty:
                expanded.add(Production(p.lhs, (right,)))
            if is_nonterminal(right) and right in empty:
                expanded.add(Production(p.lhs, (left,)))

    # UNIT
    units: Dict[str, Set[str]] = defaultdict(set)
    proper: Dict[str, List[Tuple[Symbol, ...]]] = defaultdict(list)
    for p in expanded:
        if len(p.rhs) == 1 and is_nonterminal(p.rhs[0]):
            units[p.lhs].add(p.rhs[0])
        else:
            proper[p.lhs].append(p.rhs)
    names = {p.lhs for p in expanded} | {G.start}
    final: List[Production] = []
    for a in names:
        closure = {a}
        stack = [a]
        while stack:
            b = stack.pop()
            for c in units.get(b, ()):
                if c not in closure:
                    closure.add(c)
                    stack.append(c)
        for b in closure:
            final.extend(Production(a, rhs) for rhs in proper.get(b, ()))
    result = prune(Cfg(G.alphabet, G.start, tuple(final), provenance))
    logger.debug(f"CNF: {len(G.productions)} -> {len(result.productions)} productions")
    return result


# Membership

@dataclass(frozen=True)
class ParseNode:
    symbol: Symbol
    start: int
    end: int
    children: Tuple["ParseNode", ...] = ()

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def _cyk_chart(G: Cfg, w: Word) -> Dict[Tuple[int, int], Dict[str, Any]]:
    if not G.is_cnf:
        raise NotCnf("CYK needs a grammar in Chomsky normal form")
    by_terminal: Dict[int, List[str]] = defaultdict(list)
    by_pair: Dict[Tuple[str, str], List[str]] = defaultdict(list)
    for p in G.productions:
        if len(p.rhs) == 1:
            by_terminal[p.rhs[0]].append(p.lhs)
        else:
            by_pair[p.rhs].append(p.lhs)
    n = len(w)
    chart: Dict[Tuple[int, int], Dict[str, Any]] = {}
    for i, x in enumerate(w):
        chart[(i, i + 1)] = {a: None for a in by_terminal.get(x, ())}
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length
            cell: Dict[str, Any] = {}
            for k in range(i + 1, j):
                left, right = chart[(i, k)], chart[(k, j)]
                if not left or not right:
                    continue
                for b in left:
                    for c in right:
                        for a in by_pair.get((b, c), ()):
                            if a not in cell:
                                cell[a] = (k, b, c)
            chart[(i, j)] = cell
    return chart


def cyk_member(G: Cfg, w: Word) -> bool:
    if not G.is_cnf:
        raise NotCnf("CYK needs a grammar in Chomsky normal form")
    if not w:
        return False
    return G.start in _cyk_chart(G, w)[(0, len(w))]


def parse_tree(G: Cfg, w: Word) -> Optional[ParseNode]:
    """First CYK derivation of w from the start symbol, None if w ∉ L(G)"""
    if not w:
        if not G.is_cnf:
            raise NotCnf("CYK needs a grammar in Chomsky normal form")
        return None
    chart = _cyk_chart(G, w)

    def build(a: str, i: int, j: int) -> ParseNode:
        back = chart[(i, j)][a]
        if back is None:
            return ParseNode(a, i, j, (ParseNode(w[i], i, j),))
        k, b, c = back
        return ParseNode(a, i, j, (build(b, i, k), build(c, k, j)))

    if G.start not in chart[(0, len(w))]:
        return None
    return build(G.start, 0, len(w))


# Products with machines

def _relations(
    B: Cfg,
    n: int,
    step: Mapping[int, np.ndarray],
    eps: np.ndarray,
) -> Dict[str, np.ndarray]:
    zero = np.zeros((n, n), dtype=bool)
    rel = {a: zero.copy() for a in B.nonterminals}

    def of(s: Symbol) -> np.ndarray:
        return rel[s] if is_nonterminal(s) else step.get(s, zero)

    changed = True
    while changed:
        changed = False
        for p in B.productions:
            if not p.rhs:
                m = eps
            elif len(p.rhs) == 1:
                m = of(p.rhs[0])
            else:
                m = of(p.rhs[0]) @ of(p.rhs[1])
            current = rel[p.lhs]
            if (m & ~current).any():
                rel[p.lhs] = current | m
                changed = True
    return rel


def _check_size(count: int, budget: Optional[int], what: str) -> None:
    limit = budget or settings.budget_output
    if count > limit:
        raise StateBudgetExceeded(what, limit)


def intersect_regular(G: Cfg, A: Fsa, budget: Optional[int] = None) -> Cfg:
    """Bar-Hillel product: L(G) ∩ L(A), nonterminals named 'p:X:q'"""
    D = determinize_letterize(A)
    n = D.num_states
    B = prune(binarize(G))
    if B.is_empty:
        return B
    step: Dict[int, np.ndarray] = {}
    for (p, x), targets in D.successors.items():
        step.setdefault(x, np.zeros((n, n), dtype=bool))[p, targets[0]] = True
    eps = np.eye(n, dtype=bool)
    rel = _relations(B, n, step, eps)

    def name(p: int, s: Symbol, q: int) -> Symbol:
        return f"{p}:{s}:{q}" if is_nonterminal(s) else s

    def of(s: Symbol) -> np.ndarray:
        return rel[s] if is_nonterminal(s) else step.get(s, np.zeros((n, n), dtype=bool))

    out: List[Production] = []
    for prod in B.productions:
        a = prod.lhs
        if not prod.rhs:
            out.extend(Production(name(p, a, p), ()) for p in range(n))
        elif len(prod.rhs) == 1:
            s = prod.rhs[0]
            for p, q in zip(*np.nonzero(of(s))):
                out.append(Production(name(p, a, q), (name(p, s, q),)))
        else:
            y, z = prod.rhs
            my, mz = of(y), of(z)
            for m in range(n):
                for p in np.nonzero(my[:, m])[0]:
                    for q in np.nonzero(mz[m, :])[0]:
                        out.append(Production(name(p, a, q), (name(p, y, m), name(m, z, q))))
        _check_size(len(out), budget, "grammar intersection")
    start = "S"
    out.extend(Production(start, (name(D.start, B.start, f),)) for f in sorted(D.terminal) if rel[B.start][D.start, f])
    result = prune(Cfg(G.alphabet, start, tuple(_native(out))))
    logger.info(f"intersection with a {n}-state acceptor: {len(result.productions)} productions")
    return result


def _native(productions: Iterable[Production]) -> Iterable[Production]:
    """Convert numpy integer indices inside generated names/symbols to plain ints"""
    for p in productions:
        yield Production(p.lhs, tuple(s if isinstance(s, str) else int(s) for s in p.rhs))


def apply_transduction(G: Cfg, T, budget: Optional[int] = None) -> Cfg:
    """Grammar for ρ(L(G))"""
    from .transducers import split_labels

    T1 = split_labels(T)
    n = T1.num_states
    B = prune(binarize(G))
    if B.is_empty or not T1.terminal:
        return Cfg(G.alphabet, "S", ())

    eps = np.eye(n, dtype=bool)
    silent: List[Tuple[int, Word, int]] = []
    reading: Dict[int, List[Tuple[int, Word, int]]] = defaultdict(list)
    for p, (x, y), q in T1.edges:
        if x:
            reading[x[0]].append((p, y, q))
        else:
            silent.append((p, y, q))
            eps[p, q] = True
    # reflexive-transitive closure of the ε-input moves
    while True:
        closed = eps | ((eps.astype(np.int32) @ eps.astype(np.int32)) > 0)
        if (closed == eps).all():
            break
        eps = closed

    step: Dict[int, np.ndarray] = {}
    for t, moves in reading.items():
        single = np.zeros((n, n), dtype=bool)
        for p, _, q in moves:
            single[p, q] = True
        step[t] = ((eps.astype(np.int32) @ single.astype(np.int32) @ eps.astype(np.int32)) > 0)
    rel = _relations(B, n, step, eps)

    def e_name(p: int, q: int) -> str:
        return f"E:{p}:{q}"

    def t_name(p: int, t: int, q: int) -> str:
        return f"T:{p}:{t}:{q}"

    def name(p: int, s: Symbol, q: int) -> str:
        return f"{p}:{s}:{q}" if is_nonterminal(s) else t_name(p, s, q)

    out: List[Production] = []
    # ε-input paths from p to q write the label sequence of the path
    for p, q in zip(*np.nonzero(eps)):
        if p == q:
            out.append(Production(e_name(p, q), ()))
        for p1, y, p2 in silent:
            if p1 == p and eps[p2, q]:
                out.append(Production(e_name(p, q), y + (e_name(p2, q),)))
    # one input terminal t between ε-paths
    for t, moves in reading.items():
        for p, q in zip(*np.nonzero(step[t])):
            for p1, y, p2 in moves:
                if eps[p, p1] and eps[p2, q]:
                    out.append(Production(t_name(p, t, q), (e_name(p, p1),) + y + (e_name(p2, q),)))

    def of(s: Symbol) -> np.ndarray:
        return rel[s] if is_nonterminal(s) else step.get(s, np.zeros((n, n), dtype=bool))

    for prod in B.productions:
        a = prod.lhs
        if not prod.rhs:
            out.extend(Production(name(p, a, q), (e_name(p, q),)) for p, q in zip(*np.nonzero(eps)))
        elif len(prod.rhs) == 1:
            s = prod.rhs[0]
            for p, q in zip(*np.nonzero(of(s))):
                out.append(Production(name(p, a, q), (name(p, s, q),)))
        else:
            y, z = prod.rhs
            my, mz = of(y), of(z)
            for m in range(n):
                for p in np.nonzero(my[:, m])[0]:
                    for q in np.nonzero(mz[m, :])[0]:
                        out.append(Production(name(p, a, q), (name(p, y, m), name(m, z, q))))
        _check_size(len(out), budget, "grammar transduction")
    start = "S"
    for i in sorted(T1.initial):
        for f in sorted(T1.terminal):
            if rel[B.start][i, f]:
                out.append(Production(start, (name(i, B.start, f),)))
    return prune(Cfg(G.alphabet, start, tuple(_native(out))))


# Bounded enumeration

def enumerate_cfg(G: Cfg, max_len: int, budget: Optional[int] = None) -> List[Word]:
    """L(G) restricted to words of length <= max_len, sorted by length then code order"""
    limit = budget or settings.budget_output
    B = prune(binarize(G))
    if B.is_empty:
        return []
    empty = nullable(B)
    words: Dict[str, List[Set[Word]]] = {a: [set() for _ in range(max_len + 1)] for a in B.nonterminals}
    for a in empty:
        words[a][0].add(EPSILON)

    # same-length propagation: unit productions and binary ones with a nullable sibling
    lifts: Dict[str, Set[str]] = defaultdict(set)
    for p in B.productions:
        if len(p.rhs) == 1 and is_nonterminal(p.rhs[0]):
            lifts[p.rhs[0]].add(p.lhs)
        elif len(p.rhs) == 2:
            y, z = p.rhs
            if is_nonterminal(y) and is_nonterminal(z) and z in empty:
                lifts[y].add(p.lhs)
            if is_nonterminal(y) and is_nonterminal(z) and y in empty:
                lifts[z].add(p.lhs)

    total = 0

    def of(s: Symbol, length: int) -> Iterable[Word]:
        if is_nonterminal(s):
            return words[s][length]
        return [(s,)] if length == 1 else []

    for length in range(1, max_len + 1):
        pending: deque = deque()

        def add(a: str, w: Word) -> None:
            nonlocal total
            if w not in words[a][length]:
                words[a][length].add(w)
                total += 1
                if total > limit:
                    raise OutputBudgetExceeded("grammar enumeration", limit)
                pending.append((a, w))

        for p in B.productions:
            rhs = p.rhs
            if len(rhs) == 1 and not is_nonterminal(rhs[0]) and length == 1:
                add(p.lhs, rhs)
            elif len(rhs) == 2:
                y, z = rhs
                for i in range(1, length):
                    for u in of(y, i):
                        for v in of(z, length - i):
                            add(p.lhs, u + v)
                if length == 1:
                    if not is_nonterminal(y) and is_nonterminal(z) and z in empty:
                        add(p.lhs, (y,))
                    if not is_nonterminal(z) and is_nonterminal(y) and y in empty:
                        add(p.lhs, (z,))
        while pending:
            b, w = pending.popleft()
            for a in lifts.get(b, ()):
                add(a, w)

    result: List[Word] = []
    for length in range(max_len + 1):
        result.extend(sorted(words[B.start][length]))
    return result


# Rank analysis

def shortest_words(G: Cfg) -> Dict[str, Word]:
    """A shortest derivable word u_A for every productive nonterminal (Knuth's generalization of Dijkstra)"""
    productions = list(G.productions)
    remaining = [sum(1 for s in p.rhs if is_nonterminal(s)) for p in productions]
    partial = [sum(1 for s in p.rhs if not is_nonterminal(s)) for p in productions]
    uses: Dict[str, List[int]] = defaultdict(list)
    for i, p in enumerate(productions):
        for s in p.rhs:
            if is_nonterminal(s):
                uses[s].append(i)
    heap = [(partial[i], i) for i in range(len(productions)) if remaining[i] == 0]
    heapq.heapify(heap)
    best: Dict[str, int] = {}
    while heap:
        length, i = heapq.heappop(heap)
        a = productions[i].lhs
        if a in best:
            continue
        best[a] = i
        for j in uses.get(a, ()):
            remaining[j] -= 1
            partial[j] += length
            if remaining[j] == 0:
                heapq.heappush(heap, (partial[j], j))

    words: Dict[str, Word] = {}

    def build(a: str) -> Word:
        if a not in words:
            out: List[int] = []
            for s in productions[best[a]].rhs:
                out.extend(build(s) if is_nonterminal(s) else (s,))
            words[a] = tuple(out)
        return words[a]

    for a in sorted(best):
        build(a)
    return words


@dataclass
class RankEntry:
    rank: int
    witness: Word
    image: Any


@dataclass
class RankTable:
    entries: Dict[str, RankEntry]
    k: int
    provenance: Dict[str, str] = field(default_factory=dict)

    def rank(self, a: str) -> int:
        return self.entries[a].rank

    def ranks(self) -> Set[int]:
        return {e.rank for e in self.entries.values()}


def _sample_word(G: Cfg, a: str, rng: random.Random, witnesses: Dict[str, Word], expansions: int = 64) -> Word:
    """Random derivation from a; once the expansion allowance is spent, shortest words finish it"""
    out: List[int] = []
    stack: List[Symbol] = [a]
    while stack:
        s = stack.pop()
        if not is_nonterminal(s):
            out.append(s)
        elif expansions > 0:
            expansions -= 1
            choices = [rhs for rhs in G.by_lhs.get(s, ()) if all(not is_nonterminal(t) or t in witnesses for t in rhs)]
            stack.extend(reversed(rng.choice(choices)))
        else:
            out.extend(witnesses[s])
    return tuple(out)


def rank_analysis(G: Cfg, spec=None, samples: int = 8, seed: Optional[int] = None) -> RankTable:
    """Marker count and common image of every nonterminal, checked along every production.

    Without a group only marker counts are checked; images are then left as None.
    """
    from .groups import evaluate

    def image_of(w: Word) -> Any:
        return None if spec is None else evaluate(spec, w)

    witnesses = shortest_words(G)
    missing = G.nonterminals - set(witnesses)
    if missing:
        raise RankInconsistent(f"nonproductive nonterminals {sorted(missing)}; prune the grammar first")
    entries = {
        a: RankEntry(rank=w.count(HASH), witness=w, image=image_of(w)) for a, w in witnesses.items()
    }

    for p in G.productions:
        rank = 0
        image = None if spec is None else spec.identity
        for s in p.rhs:
            if is_nonterminal(s):
                rank += entries[s].rank
                if spec is not None:
                    image = spec.multiply(image, entries[s].image)
            else:
                rank += s == HASH
                if spec is not None:
                    image = spec.multiply(image, evaluate(spec, (s,)))
        if rank != entries[p.lhs].rank:
            raise RankInconsistent(f"{p}: rank {rank} on the right, {entries[p.lhs].rank} on the left")
        if image != entries[p.lhs].image:
            raise ImageInconsistent(f"{p}: right-hand side evaluates differently from {p.lhs}")

    rng = random.Random(settings.seed if seed is None else seed)
    for a in sorted(entries):
        for _ in range(samples):
            w = _sample_word(G, a, rng, witnesses)
            if w.count(HASH) != entries[a].rank:
                raise RankInconsistent(f"sampled word of {a} has {w.count(HASH)} markers")
            if image_of(w) != entries[a].image:
                raise ImageInconsistent(f"sampled word of {a} evaluates differently")

    k = 1 + max((len(e.witness) for e in entries.values()), default=0)
    return RankTable(entries, k, dict(G.provenance))


def pumping_pairs(G: Cfg, k_prime: Optional[int] = None) -> List[Tuple[Word, Word]]:
    """Marker-free substitution pairs (p u_A q, u_A) from self-embeddings A =>* pAq of rank-zero nonterminals"""
    if not G.is_cnf:
        raise NotCnf("pumping pairs need a grammar in Chomsky normal form")
    witnesses = shortest_words(G)
    if k_prime is None:
        k_prime = 2 ** (len(G.nonterminals) + 1)
    depth_limit = 2 * len(G.nonterminals)
    pairs: Set[Tuple[Word, Word]] = set()
    for a in sorted(witnesses):
        u = witnesses[a]
        if HASH in u:
            continue
        seen = {a}
        queue = deque([(a, EPSILON, EPSILON, 0)])
        while queue:
            b, left, right, depth = queue.popleft()
            if depth >= depth_limit:
                continue
            for rhs in G.by_lhs.get(b, ()):
                if len(rhs) != 2:
                    continue
                y, z = rhs
                for child, l2, r2 in ((y, left, witnesses[z] + right), (z, left + witnesses[y], right)):
                    if child == a:
                        x = l2 + u + r2
                        if len(x) <= k_prime and HASH not in x:
                            pairs.add((x, u))
                    elif child not in seen:
                        seen.add(child)
                        queue.append((child, l2, r2, depth + 1))
    return sorted(pairs)
