"""
Multiplication tables, columns and comparators of a combing.

  M     = {u#v#w | u, v, w ∈ R, ū v̄ w̄ = 1}
  C(g)  = {u#w | u, w ∈ R, ū g w̄ = 1}
  ρ_a   = {(u, w) | u, w ∈ R, ū ā = w̄}

Letters are codes; None stands for the empty letter ε.
"""
import itertools
import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Dict, Hashable, List, Mapping, Optional, Set, Tuple

from models import PipelineLetterResult, PipelineReport, RoundtripReport
from .automata import (
    Fsa,
    determinize_letterize,
    enumerate_words,
    equivalent,
    image_homomorphism_hash,
    intersect,
    inverse_homomorphism_hash,
    minimize,
    reverse_invert,
    trim,
)
from .automata import union as union_fsa
from .errors import (
    NotACombing,
    NotFinite,
    NotInverseClosed,
    OutputBudgetExceeded,
    RankInconsistent,
    StateBudgetExceeded,
    UnsupportedBackend,
    VerificationFailed,
)
from .grammars import Cfg, Production, RankTable, enumerate_cfg, pumping_pairs, rank_analysis, to_cnf
from .groups import Element, FiniteTable, Free, FreeProduct, GroupSpec, evaluate, is_surjective_at_radius
from .settings import settings
from .transducers import (
    Transducer,
    compose,
    from_linear_grammar,
    image_of_word,
    inverse_relation,
    restrict,
    to_linear_grammar,
    union,
)
from .words import EPSILON, HASH, InvolutiveAlphabet, Word

logger = logging.getLogger(__name__)

Letter = Optional[int]


@dataclass(frozen=True)
class TableSpec:
    group: GroupSpec
    combing: Fsa
    closed_under_inverses: bool = False
    combing_name: str = "custom"

    @classmethod
    def checked(cls, group: GroupSpec, combing: Fsa, combing_name: str = "custom", radius: int = 2) -> "TableSpec":
        """Validate surjectivity at the radius and detect closure under formal inverses"""
        if not is_surjective_at_radius(group, combing, radius):
            raise NotACombing(f"{combing_name} misses elements of the radius-{radius} ball of {group.name}")
        closed = equivalent(reverse_invert(combing), combing)
        return cls(group, combing, closed, combing_name)


@dataclass(frozen=True)
class ColumnSpec:
    table: TableSpec
    g: Element


def letter_name(alphabet: InvolutiveAlphabet, a: Letter) -> str:
    return "ε" if a is None else alphabet.name(a)


def _letter_image(spec: GroupSpec, a: Letter) -> Element:
    return spec.identity if a is None else spec.generator(a)


def _by_image(spec: GroupSpec, words: List[Word]) -> Dict[Element, List[Word]]:
    index: Dict[Element, List[Word]] = defaultdict(list)
    for w in words:
        index[evaluate(spec, w)].append(w)
    return index


def _sorted_words(words) -> List[Word]:
    return sorted(words, key=lambda w: (len(w), w))


# Bounded enumerations

def enumerate_table(ts: TableSpec, maxlen: int) -> List[Word]:
    """Table words of total length <= maxlen, by length then code order"""
    if maxlen < 2:
        raise ValueError("table words have length at least 2")
    spec = ts.group
    budget = settings.budget_output
    words = enumerate_words(ts.combing, maxlen - 2)
    images = {w: evaluate(spec, w) for w in words}
    index = _by_image(spec, words)
    found: List[Word] = []
    for u in words:
        for v in words:
            room = maxlen - 2 - len(u) - len(v)
            if room < 0:
                continue
            need = spec.inverse(spec.multiply(images[u], images[v]))
            for w in index.get(need, ()):
                if len(w) <= room:
                    found.append(u + (HASH,) + v + (HASH,) + w)
            if len(found) > budget:
                raise OutputBudgetExceeded("table enumeration", budget)
    return _sorted_words(found)


def column_language(cs: ColumnSpec, maxlen: int) -> List[Word]:
    spec = cs.table.group
    words = enumerate_words(cs.table.combing, maxlen - 1) if maxlen >= 1 else []
    index = _by_image(spec, words)
    found = []
    for u in words:
        need = spec.inverse(spec.multiply(evaluate(spec, u), cs.g))
        found.extend(u + (HASH,) + w for w in index.get(need, ()) if len(u) + len(w) < maxlen)
        if len(found) > settings.budget_output:
            raise OutputBudgetExceeded("column enumeration", settings.budget_output)
    return _sorted_words(found)


def comparator(ts: TableSpec, a: Letter, maxlen: int) -> List[Tuple[Word, Word]]:
    """Pairs of ρ_a with both sides of length <= maxlen"""
    spec = ts.group
    step = _letter_image(spec, a)
    words = enumerate_words(ts.combing, maxlen)
    index = _by_image(spec, words)
    pairs = []
    for u in words:
        pairs.extend((u, w) for w in index.get(spec.multiply(evaluate(spec, u), step), ()))
        if len(pairs) > settings.budget_output:
            raise OutputBudgetExceeded("comparator enumeration", settings.budget_output)
    return sorted(pairs)


# Finite backends

def _require_finite(spec: GroupSpec) -> None:
    if spec.order is None:
        raise NotFinite(f"{spec.name} is infinite")


class _StateIndex:
    """Breadth-first numbering of product states, checked against the state budget"""

    def __init__(self, what: str):
        self.what = what
        self.index: Dict[Hashable, int] = {}
        self.queue: deque = deque()

    def __call__(self, key: Hashable) -> int:
        if key not in self.index:
            self.index[key] = len(self.index)
            if len(self.index) > settings.budget_states:
                raise StateBudgetExceeded(self.what, settings.budget_states)
            self.queue.append(key)
        return self.index[key]

    def __len__(self) -> int:
        return len(self.index)


def finite_table_fsa(spec: GroupSpec, R: Fsa) -> Fsa:
    """Acceptor of M over states (R-state, element, markers read so far)"""
    _require_finite(spec)
    D = determinize_letterize(R)
    state = _StateIndex("table acceptor")
    start = state((D.start, spec.identity, 0))
    edges = []
    while state.queue:
        r, g, phase = key = state.queue.popleft()
        here = state.index[key]
        for label, r2 in D.out_edges[r]:
            x = label[0]
            if x != HASH:
                edges.append((here, (x,), state((r2, spec.act(g, x), phase))))
        if r in D.terminal and phase < 2:
            edges.append((here, (HASH,), state((D.start, g, phase + 1))))
    terminal = {
        i for (r, g, phase), i in state.index.items() if phase == 2 and r in D.terminal and g == spec.identity
    }
    A = trim(Fsa(spec.alphabet, len(state), {start}, terminal, edges))
    logger.info(f"table acceptor for {spec.name}: {len(state)} product states, {A.num_states} after trim")
    return A


def word_problem_fsa(spec: GroupSpec, with_hash: bool = False) -> Fsa:
    """W = words evaluating to 1; with_hash reads the marker as the identity"""
    _require_finite(spec)
    state = _StateIndex("word problem acceptor")
    start = state(spec.identity)
    edges = []
    while state.queue:
        g = state.queue.popleft()
        here = state.index[g]
        for x in spec.alphabet.letters:
            edges.append((here, (x,), state(spec.act(g, x))))
        if with_hash:
            edges.append((here, (HASH,), here))
    return Fsa(spec.alphabet, len(state), {start}, {start}, edges)


def sigma_star_roundtrip(spec: GroupSpec) -> RoundtripReport:
    """M from W and W from M, for the combing Σ*"""
    alphabet = spec.alphabet
    W = word_problem_fsa(spec)
    W1 = word_problem_fsa(spec, with_hash=True)
    W1_preimage = inverse_homomorphism_hash(W)
    M_direct = finite_table_fsa(spec, Fsa.sigma_star(alphabet))
    M_preimage = intersect(W1_preimage, Fsa.marker_pattern(alphabet, 2))
    W_recovered = image_homomorphism_hash(intersect(M_direct, Fsa.hash_suffix(alphabet)))

    report = RoundtripReport(
        group=spec.name,
        m_direct_equals_preimage=equivalent(M_direct, M_preimage),
        w_recovered=equivalent(W_recovered, W),
        w1_equals_preimage=equivalent(W1, W1_preimage),
        states={
            "W": minimize(W).num_states,
            "W1": minimize(W1).num_states,
            "M": minimize(M_direct).num_states,
        },
    )
    logger.info(f"Σ* round trip on {spec.name}: {report.states}")
    return report


# Comparator machines

def free_comparator_transducer(rank: int, a: Letter, alphabet: Optional[InvolutiveAlphabet] = None) -> Transducer:
    """{(u, reduce(u a)) | u reduced}: copy the input one letter late, settle the last letter at the end"""
    alphabet = alphabet or Free(rank).alphabet
    final = 1 + alphabet.size
    edges = []
    for x in alphabet.letters:
        edges.append((0, ((x,), EPSILON), 1 + x))
        for y in alphabet.letters:
            if x != y ^ 1:
                edges.append((1 + y, ((x,), (y,)), 1 + x))
    edges.append((0, (EPSILON, EPSILON if a is None else (a,)), final))
    for y in alphabet.letters:
        if a is None:
            tail: Word = (y,)
        elif a == y ^ 1:
            tail = EPSILON
        else:
            tail = (y, a)
        edges.append((1 + y, (EPSILON, tail), final))
    return Transducer(alphabet, final + 1, {0}, {final}, edges)


def _geodesic_words(factor: FiniteTable, codes: List[int]) -> Dict[int, List[Word]]:
    """Every geodesic word of every element, in the product's letter codes"""
    found: Dict[int, List[Word]] = {factor.identity: [EPSILON]}
    layer = {factor.identity: [EPSILON]}
    for d in range(1, max(factor.distances.values()) + 1):
        nxt: Dict[int, List[Word]] = defaultdict(list)
        for g, words in layer.items():
            for local in factor.alphabet.letters:
                h = factor.act(g, local)
                if factor.distances[h] == d:
                    nxt[h].extend(w + (codes[local],) for w in words)
        layer = {h: sorted(ws) for h, ws in nxt.items()}
        found.update(layer)
    return found


def free_product_comparator_transducer(spec: FreeProduct, a: Letter) -> Transducer:
    """ρ_a on block-geodesic words; the last syllable stays buffered until the input ends"""
    codes = [[x for x in spec.alphabet.letters if spec.locate[x][0] == i] for i in range(len(spec.factors))]
    reps = [_geodesic_words(f, codes[i]) for i, f in enumerate(spec.factors)]
    syllables: Dict[Tuple[int, int], int] = {}
    for i, factor in enumerate(spec.factors):
        for g in factor.distances:
            if g != factor.identity:
                syllables[(i, g)] = len(syllables) + 1
    final = len(syllables) + 1

    def outputs(i: int, g: int) -> List[Word]:
        factor = spec.factors[i]
        return [EPSILON] if g == factor.identity else reps[i][g]

    def tails(block: Optional[Tuple[int, int]]) -> List[Word]:
        if a is None:
            return outputs(*block) if block else [EPSILON]
        j, local = spec.locate[a]
        step = spec.factors[j].generators[local]
        if block and block[0] == j:
            return outputs(j, spec.factors[j].multiply(block[1], step))
        head = outputs(*block) if block else [EPSILON]
        return [x + y for x, y in itertools.product(head, outputs(j, step))]

    edges = []
    for source in [None] + list(syllables):
        here = 0 if source is None else syllables[source]
        for x in spec.alphabet.letters:
            j, local = spec.locate[x]
            factor = spec.factors[j]
            if source is not None and source[0] == j:
                h = factor.act(source[1], local)
                if factor.distances[h] == factor.distances[source[1]] + 1:
                    edges.append((here, ((x,), EPSILON), syllables[(j, h)]))
                continue
            h = factor.act(factor.identity, local)
            if factor.distances[h] != 1:
                continue
            flushed = [EPSILON] if source is None else outputs(*source)
            edges.extend((here, ((x,), r), syllables[(j, h)]) for r in flushed)
        edges.extend((here, (EPSILON, t), final) for t in tails(source))
    return Transducer(spec.alphabet, final + 1, {0}, {final}, edges)


def finite_comparator_transducer(spec: GroupSpec, R: Fsa, a: Letter) -> Transducer:
    """Read u tracking ū, then write any R-word w with w̄ = ū ā"""
    _require_finite(spec)
    D = determinize_letterize(R)
    step = _letter_image(spec, a)
    state = _StateIndex("finite comparator")
    start = state(("read", D.start, spec.identity))
    edges = []
    while state.queue:
        key = state.queue.popleft()
        here = state.index[key]
        phase, r, g = key
        for label, r2 in D.out_edges[r]:
            x = label[0]
            if x == HASH:
                continue
            if phase == "read":
                edges.append((here, ((x,), EPSILON), state(("read", r2, spec.act(g, x)))))
            else:
                # g is what the rest of the output still has to evaluate to
                rest = spec.multiply(spec.generator(x ^ 1), g)
                edges.append((here, (EPSILON, (x,)), state(("write", r2, rest))))
        if phase == "read" and r in D.terminal:
            edges.append((here, (EPSILON, EPSILON), state(("write", D.start, spec.multiply(g, step)))))
    terminal = {
        i for (phase, r, g), i in state.index.items()
        if phase == "write" and r in D.terminal and g == spec.identity
    }
    return Transducer(spec.alphabet, len(state), {start}, terminal, edges)


def comparator_transducer(ts: TableSpec, a: Letter) -> Transducer:
    """Rational transducer for ρ_a on the table's combing"""
    spec = ts.group
    if isinstance(spec, Free):
        raw = free_comparator_transducer(spec.rank, a, spec.alphabet)
    elif isinstance(spec, FreeProduct):
        raw = free_product_comparator_transducer(spec, a)
    elif spec.order is not None:
        return finite_comparator_transducer(spec, ts.combing, a)
    else:
        raise UnsupportedBackend(f"no comparator machine for {spec!r}")
    return restrict(raw, ts.combing, ts.combing)


def column_cfg_from_comparator(T: Transducer, R: Fsa) -> Cfg:
    """Linear grammar for {u#w | (u, w⁻¹) ∈ ρ}; with T = ρ_a this is the column C(ā)"""
    if not equivalent(reverse_invert(R), R):
        raise NotInverseClosed("columns from comparators need a combing closed under formal inverses")
    return to_linear_grammar(restrict(T, R, R))


def build_column_grammars(ts: TableSpec, letters: Optional[List[Letter]] = None) -> Dict[Letter, Cfg]:
    if letters is None:
        letters = [None] + list(ts.group.alphabet.letters)
    return {a: column_cfg_from_comparator(comparator_transducer(ts, a), ts.combing) for a in letters}


# Comparators from column grammars

def _check_ranks(G: Cfg, ranks: RankTable) -> None:
    if ranks.ranks() - {0, 1}:
        raise RankInconsistent(f"column grammar has ranks {sorted(ranks.ranks())}")
    if ranks.rank(G.start) != 1:
        raise RankInconsistent("column grammar start symbol must have rank one")


def _linearize(G: Cfg, ranks: RankTable) -> Cfg:
    """Replace A -> BC by A -> xC (B rank zero) or A -> By (C rank zero) with |x|, |y| <= K; drop rank zero"""
    short: Dict[str, List[Word]] = {}

    def words_of(b: str) -> List[Word]:
        if b not in short:
            short[b] = enumerate_cfg(Cfg(G.alphabet, b, G.productions), ranks.k)
        return short[b]

    out: List[Production] = []
    for p in G.productions:
        if ranks.rank(p.lhs) != 1:
            continue
        if len(p.rhs) == 1:
            out.append(p)
            continue
        b, c = p.rhs
        if ranks.rank(b) == 0:
            out.extend(Production(p.lhs, x + (c,)) for x in words_of(b))
        else:
            out.extend(Production(p.lhs, (b,) + y) for y in words_of(c))
    return Cfg(G.alphabet, G.start, tuple(out))


def theorem_bi_pipeline(
    ts: TableSpec,
    column_grammars: Mapping[Letter, Cfg],
    maxlen: int,
    refine: bool = False,
    strict: bool = True,
) -> PipelineReport:
    """Rebuild every comparator from its column grammar and check it against the group.

    Each column grammar is linearized into a transducer τ_a on R₁ × R₁⁻¹; with
    μ = τ_ε⁻¹ the combined relation τ_a ∪ μ∘τ_a ∪ τ_a∘μ ∪ μ∘τ_a∘μ must relate
    exactly the pairs (u, v) of R₁ ∪ R₁⁻¹ with ū ā = v̄. Without `refine`, R₁ is R itself
    and the domain is R ∪ R⁻¹; refinement shrinks R₁ ⊆ R and the check covers R₁ ∪ R₁⁻¹.
    """
    spec, R = ts.group, ts.combing
    alphabet = spec.alphabet
    letters = sorted(column_grammars, key=lambda a: -1 if a is None else a)

    prepared: Dict[Letter, Tuple[Cfg, Optional[RankTable]]] = {}
    for a in letters:
        cnf = to_cnf(column_grammars[a])
        ranks = None
        if not cnf.is_empty:
            ranks = rank_analysis(cnf)
            _check_ranks(cnf, ranks)
        prepared[a] = (cnf, ranks)

    R1 = R
    if refine:
        from .hyperbolicity import refine_subcombing

        for a in letters:
            cnf, ranks = prepared[a]
            if ranks is None:
                continue
            R1 = intersect(R1, refine_subcombing(R, pumping_pairs(cnf)))
        R1 = trim(minimize(R1))
    r1_surjective = is_surjective_at_radius(spec, R1, 2)
    R1_inv = reverse_invert(R1)

    taus: Dict[Letter, Tuple[Transducer, int, int]] = {}
    for a in letters:
        cnf, ranks = prepared[a]
        linear = Cfg(alphabet, cnf.start, ()) if ranks is None else _linearize(cnf, ranks)
        tau = restrict(from_linear_grammar(linear), R1, R1_inv)
        taus[a] = (tau, len(linear.productions), 0 if ranks is None else ranks.k)
    mu = inverse_relation(taus[None][0]) if None in taus else Transducer.empty(alphabet)

    domain = enumerate_words(union_fsa(R1, R1_inv), maxlen)
    index = _by_image(spec, domain)
    report = PipelineReport(maxlen=maxlen, combing=ts.combing_name, refined=refine, r1_surjective=r1_surjective)
    for a in letters:
        tau, productions, k = taus[a]
        combined = union(
            union(tau, compose(mu, tau)),
            union(compose(tau, mu), compose(mu, compose(tau, mu))),
        )
        step = _letter_image(spec, a)
        bad: Set[Tuple[Word, Word]] = set()
        for u in domain:
            expected = set(index.get(spec.multiply(evaluate(spec, u), step), ()))
            got = image_of_word(combined, u, maxlen)
            bad.update((u, v) for v in expected ^ got)
        result = PipelineLetterResult(
            letter=letter_name(alphabet, a),
            k=k,
            linear_productions=productions,
            tau_states=tau.num_states,
            combined_states=combined.num_states,
            checked_words=len(domain),
            counterexamples=[(alphabet.render(u), alphabet.render(v)) for u, v in sorted(bad)],
        )
        report.letters.append(result)
        logger.info(f"comparator for {result.letter} on {spec.name}: {combined.num_states} states, "
                    f"{len(bad)} counterexamples over {len(domain)} words")

    if strict and report.counterexamples:
        raise VerificationFailed(
            f"rebuilt comparators disagree with {spec.name} on {len(report.counterexamples)} pairs",
            report.counterexamples,
        )
    return report
