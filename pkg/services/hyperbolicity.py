"""
Triangles, widths and the hyperbolicity experiments.

Points on a side are the group elements visited by the side's path. Distances
come from one Cayley ball per sweep: two points on a closed path of total
length n are never more than n/2 apart, so a ball of radius ceil(n/2) answers
every lookup inside a triangle or cycle.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from models import Diagonal, FlabbyReport, PolygonTriangulation, ProximityReport, ThinnessReport, TriangleMetrics, TriangleRecord
from .automata import Fsa, difference, minimize, trim
from .errors import (
    EndpointMismatch,
    InvalidPair,
    NotACycle,
    NotATableWord,
    NotCnf,
    OutputBudgetExceeded,
    StateBudgetExceeded,
    VerificationFailed,
)
from .grammars import Cfg, ParseNode, Production, RankTable, parse_tree, rank_analysis
from .groups import CayleyBall, Element, GroupSpec, cayley_ball, evaluate, geodesic_word
from .settings import settings
from .tables import TableSpec, enumerate_table
from .transducers import apply_to_regular, context_embed, inverse_relation, union
from .words import EPSILON, HASH, Word, split_on_hash

logger = logging.getLogger(__name__)

FLABBY_SLOPE = Fraction(1, 75)
PROXIMITY_SLOPES = (Fraction(1, 36), Fraction(1, 18))
DIAGONAL_SLOPE = Fraction(1, 6)


@dataclass(frozen=True)
class Triangle:
    vertices: Tuple[Element, Element, Element]
    sides: Tuple[Word, Word, Word]

    @property
    def perimeter(self) -> int:
        return sum(len(s) for s in self.sides)


def path_points(spec: GroupSpec, start: Element, w: Word) -> List[Element]:
    points = [start]
    for x in w:
        if x != HASH:
            points.append(spec.act(points[-1], x))
    return points


def triangle_from_table_word(spec: GroupSpec, t: Word) -> Triangle:
    """u#v#w with trivial image, based at the identity"""
    if t.count(HASH) != 2:
        raise NotATableWord(f"table words have exactly two markers, got {t.count(HASH)}")
    if evaluate(spec, t) != spec.identity:
        raise NotATableWord("word does not evaluate to the identity")
    u, v, w = split_on_hash(t)
    g1 = spec.identity
    g2 = evaluate(spec, u)
    g3 = spec.multiply(g2, evaluate(spec, v))
    return Triangle((g1, g2, g3), (u, v, w))


def triangle_width(spec: GroupSpec, T: Triangle, ball: Optional[CayleyBall] = None) -> TriangleMetrics:
    """Width: worst distance from a point of one side to the other two sides. Norm: max vertex distance"""
    if ball is None:
        ball = cayley_ball(spec, (T.perimeter + 1) // 2)
    sides = [path_points(spec, T.vertices[i], T.sides[i]) for i in range(3)]
    width = 0
    for i in range(3):
        others = set(sides[(i + 1) % 3]) | set(sides[(i + 2) % 3])
        for p in set(sides[i]):
            if p in others:
                continue
            p_inv = spec.inverse(p)
            nearest = None
            for q in others:
                d = ball.table.get(spec.multiply(p_inv, q))
                if d is not None and (nearest is None or d < nearest):
                    nearest = d
            if nearest is None:
                nearest = ball.between(spec, p, next(iter(others)))
            width = max(width, nearest)
    a, b, c = T.vertices
    norm = max(ball.between(spec, a, b), ball.between(spec, b, c), ball.between(spec, a, c))
    return TriangleMetrics(width=width, norm=norm)


def flabby_check(spec: GroupSpec, R: Fsa, maxlen: int, slope: Fraction = FLABBY_SLOPE) -> FlabbyReport:
    """C_emp = max over R-triangles of width - slope * norm, plus the scatter"""
    words = enumerate_table(TableSpec(spec, R), maxlen)
    ball = cayley_ball(spec, (maxlen + 1) // 2)
    records = []
    c_emp: Optional[Fraction] = None
    for t in words:
        metrics = triangle_width(spec, triangle_from_table_word(spec, t), ball)
        value = metrics.width - slope * metrics.norm
        c_emp = value if c_emp is None else max(c_emp, value)
        records.append(TriangleRecord(word=spec.alphabet.render(t), length=len(t), norm=metrics.norm, width=metrics.width))
    logger.info(f"flabby check on {spec.name}: {len(records)} triangles up to length {maxlen}")
    return FlabbyReport(
        slope=float(slope),
        maxlen=maxlen,
        count=len(records),
        max_width=max((r.width for r in records), default=0),
        c_emp=float(c_emp or 0),
        triangles=records,
    )


# Triangulating cycles

def _choose_greedy(d, i: int, j: int) -> int:
    return min(range(i + 1, j), key=lambda k: (max(d(i, k), d(k, j)), k))


def triangulate_cycle(spec: GroupSpec, cycle: Word, policy: str = "greedy") -> PolygonTriangulation:
    """Diagonals of the n-gon traced by a cycle: first (n, 2), then split each remaining polygon"""
    n = len(cycle)
    if n < 1 or HASH in cycle or evaluate(spec, cycle) != spec.identity:
        raise NotACycle("a cycle is a non-empty marker-free word evaluating to the identity")
    if policy not in ("greedy", "paper"):
        raise ValueError(f"unknown triangulation policy {policy!r}")
    if n <= 3:
        return PolygonTriangulation(n=n, diagonals=[])

    ball = cayley_ball(spec, (n + 1) // 2)
    g = {i: evaluate(spec, cycle[:i]) for i in range(1, n + 1)}

    def d(i: int, j: int) -> int:
        return ball.between(spec, g[i], g[j])

    def choose_paper(i: int, j: int) -> int:
        # h: midpoint of a geodesic from g_i to g_j
        step = spec.multiply(spec.inverse(g[i]), g[j])
        path = geodesic_word(spec, ball, step)
        h = evaluate(spec, path[: len(path) // 2])
        h = spec.multiply(g[i], h)
        h_inv = spec.inverse(h)

        def gap(k: int) -> Tuple[float, int]:
            dist = ball.table.get(spec.multiply(h_inv, g[k]))
            return (float("inf") if dist is None else dist, k)

        return min(range(i + 1, j), key=gap)

    choose = choose_paper if policy == "paper" else (lambda i, j: _choose_greedy(d, i, j))
    diagonals = [Diagonal(i=2, j=n, length=d(2, n))]
    stack = [(2, n)]
    while stack:
        i, j = stack.pop()
        if j - i < 3:
            continue
        k = choose(i, j)
        if k == i + 1:
            diagonals.append(Diagonal(i=i + 1, j=j, length=d(i + 1, j)))
            stack.append((i + 1, j))
        elif k == j - 1:
            diagonals.append(Diagonal(i=i, j=j - 1, length=d(i, j - 1)))
            stack.append((i, j - 1))
        else:
            diagonals.append(Diagonal(i=i, j=k, length=d(i, k)))
            diagonals.append(Diagonal(i=k, j=j, length=d(k, j)))
            stack.extend([(k, j), (i, k)])
    diagonals.sort(key=lambda dg: (dg.i, dg.j))
    return PolygonTriangulation(n=n, diagonals=diagonals)


def is_valid_triangulation(tri: PolygonTriangulation) -> bool:
    """Non-crossing proper diagonals, n - 3 of them"""
    n = tri.n
    pairs = [(min(dg.i, dg.j), max(dg.i, dg.j)) for dg in tri.diagonals]
    if len(pairs) != max(n - 3, 0) or len(set(pairs)) != len(pairs):
        return False
    for a, b in pairs:
        if not (1 <= a and b <= n) or b - a < 2 or (a, b) == (1, n):
            return False
    for a, b in pairs:
        for c, e in pairs:
            if a < c < b < e:
                return False
    return True


def combing_proximity(spec: GroupSpec, w: Word, v0: Word) -> ProximityReport:
    """How far the path w strays from v0 and back, for paths with the same endpoints"""
    if evaluate(spec, w) != evaluate(spec, v0):
        raise EndpointMismatch("paths end at different elements")
    ball = cayley_ball(spec, (len(w) + len(v0) + 1) // 2)
    pw = path_points(spec, spec.identity, w)
    pv = path_points(spec, spec.identity, v0)

    def reach(sources: Sequence[Element], targets: Sequence[Element]) -> int:
        worst = 0
        for p in set(sources):
            p_inv = spec.inverse(p)
            worst = max(worst, min(ball.table.get(spec.multiply(p_inv, q), ball.radius + 1) for q in targets))
        return worst

    n = len(w)
    v0_to_w = reach(pv, pw)
    w_to_v0 = reach(pw, pv)
    slope_v0, slope_w = PROXIMITY_SLOPES
    return ProximityReport(
        n=n,
        v0_to_w=v0_to_w,
        w_to_v0=w_to_v0,
        d_emp_v0=float(v0_to_w - slope_v0 * n),
        d_emp_w=float((w_to_v0 - slope_w * n) / 2),
    )


def bk_sequence(n: int) -> List[Fraction]:
    """b_0 = n, b_{k+1} = (1 + b_k)/2 until b_k <= 2, checking b_k <= 1 + n/2^k"""
    if n < 0:
        return []
    b = Fraction(n)
    sequence = [b]
    k = 0
    while b > 2:
        b = (1 + b) / 2
        k += 1
        if b > 1 + Fraction(n, 2 ** k):
            raise VerificationFailed(f"b_{k} = {b} exceeds 1 + {n}/2^{k}", [(n, k)])
        sequence.append(b)
    steps_allowed = (n - 1).bit_length() + 1 if n >= 1 else 1
    if k > steps_allowed:
        raise VerificationFailed(f"{k} halving steps for n = {n}", [(n, k)])
    return sequence


# Grammar synthesis

def _nonterminal_name(spec: GroupSpec, w: Word) -> str:
    return f"X<{spec.alphabet.render(w)}>"


def _table_symbols(spec: GroupSpec, delta: int) -> Tuple[List[Tuple[Any, Element]], List[Tuple[str, Element]]]:
    alphabet = spec.alphabet
    count = sum(len(alphabet.symbols) ** k for k in range(delta + 1))
    if count > settings.budget_states:
        raise StateBudgetExceeded(f"{count} nonterminals for delta {delta}", settings.budget_states)
    words: List[Word] = [EPSILON]
    layer: List[Word] = [EPSILON]
    for _ in range(delta):
        layer = [w + (x,) for w in layer for x in alphabet.symbols]
        words.extend(layer)
    nonterminals = [(_nonterminal_name(spec, w), evaluate(spec, w)) for w in words]
    terminals = [(x, evaluate(spec, (x,))) for x in alphabet.symbols]
    return terminals + nonterminals, nonterminals


def synthesize_table_grammar(spec: GroupSpec, delta: int, compact: bool = False, budget: Optional[int] = None) -> Cfg:
    """Nonterminals X_w (|w| <= delta), productions X -> α with |α| <= 5 and equal images, start X_ε.

    compact=True skips every α containing a proper subword γ, 2 <= |γ|, whose image is
    the image of some nonterminal: X -> α then follows from shorter kept productions,
    so the language does not change.
    """
    if delta < 1:
        raise ValueError("delta must be at least 1")
    limit = budget or settings.budget_output
    vocabulary, nonterminals = _table_symbols(spec, delta)
    by_image: Dict[Element, List[str]] = {}
    for name, image in nonterminals:
        by_image.setdefault(image, []).append(name)
    productions: List[Production] = []

    def emit(alpha: Tuple, image: Element) -> None:
        for name in by_image.get(image, ()):
            productions.append(Production(name, alpha))
        if len(productions) > limit:
            raise OutputBudgetExceeded("grammar synthesis", limit)

    if compact:
        def extend(alpha: Tuple, images: List[Element]) -> None:
            # images[k] is the image of alpha[:k]
            emit(alpha, images[-1])
            if len(alpha) == 5:
                return
            for symbol, image in vocabulary:
                nxt = alpha + (symbol,)
                prefix_images = images + [spec.multiply(images[-1], image)]
                m = len(nxt)
                blocked = False
                whole = False
                for start in range(m - 1):
                    sub = spec.multiply(spec.inverse(prefix_images[start]), prefix_images[m])
                    if sub in by_image:
                        if start == 0:
                            whole = True
                        else:
                            blocked = True
                            break
                if blocked:
                    continue
                if whole:
                    emit(nxt, prefix_images[m])
                else:
                    extend(nxt, prefix_images)

        extend((), [spec.identity])
    else:
        halves: List[Dict[Element, List[Tuple]]] = [{spec.identity: [()]}]
        for _ in range(3):
            layer: Dict[Element, List[Tuple]] = {}
            for image, seqs in halves[-1].items():
                for symbol, s_image in vocabulary:
                    key = spec.multiply(image, s_image)
                    layer.setdefault(key, []).extend(seq + (symbol,) for seq in seqs)
            halves.append(layer)
        for length in range(6):
            left_len = length // 2
            right = halves[length - left_len]
            for image in by_image:
                for h, lefts in halves[left_len].items():
                    need = spec.multiply(spec.inverse(h), image)
                    for tail in right.get(need, ()):
                        for head in lefts:
                            emit(head + tail, image)

    start = _nonterminal_name(spec, EPSILON)
    grammar = Cfg(spec.alphabet, start, tuple(productions))
    logger.info(f"synthesized table grammar for {spec.name} (delta {delta}, compact={compact}): "
                f"{len(grammar.nonterminals)} nonterminals, {len(grammar.productions)} productions")
    return grammar


def refine_subcombing(R: Fsa, pairs: Sequence[Tuple[Word, Word]], budget: Optional[int] = None) -> Fsa:
    """R' = R - ρ⁻¹(R) with ρ the union of the context rewrites x -> y"""
    if not pairs:
        return R
    rho = None
    for x, y in pairs:
        if len(y) >= len(x):
            raise InvalidPair(f"pair ({x}, {y}) does not shorten")
        embed = context_embed(R.alphabet, x, y)
        rho = embed if rho is None else union(rho, embed)
    shortenable = apply_to_regular(inverse_relation(rho), R, budget)
    refined = trim(minimize(difference(R, shortenable, budget), budget))
    logger.info(f"refined combing with {len(pairs)} pairs: {refined.num_states} states")
    return refined


# Certified widths from parse trees

def _certified_bound(tree: ParseNode, ranks: RankTable) -> int:
    bound = 0

    def visit(node: ParseNode, deepest: Optional[ParseNode]) -> None:
        nonlocal bound
        if not isinstance(node.symbol, str):
            return
        if ranks.rank(node.symbol) >= 1:
            deepest = node
        for child in node.children:
            if not isinstance(child.symbol, str):
                # leaf: only letters count, markers sit on the sides' ends
                if child.symbol != HASH and deepest is not None:
                    holder = next(c for c in deepest.children if c.start <= child.start < c.end)
                    bound = max(bound, (holder.end - holder.start) + len(ranks.entries[deepest.symbol].witness))
            else:
                visit(child, deepest)

    visit(tree, None)
    return bound


def thinness_certificate(spec: GroupSpec, G: Cfg, R: Fsa, maxlen: int) -> ThinnessReport:
    """Width bounds read off derivations, compared with true widths"""
    if not G.is_cnf:
        raise NotCnf("thinness certificates need a grammar in Chomsky normal form")
    ranks = rank_analysis(G, spec)
    words = enumerate_table(TableSpec(spec, R), maxlen)
    ball = cayley_ball(spec, (maxlen + 1) // 2)
    report = ThinnessReport(maxlen=maxlen, k=ranks.k)
    for t in words:
        rendered = spec.alphabet.render(t)
        metrics = triangle_width(spec, triangle_from_table_word(spec, t), ball)
        tree = parse_tree(G, t)
        if tree is None:
            report.unparsed.append(rendered)
            continue
        bound = _certified_bound(tree, ranks)
        report.triangles.append(
            TriangleRecord(word=rendered, length=len(t), norm=metrics.norm, width=metrics.width, certified_bound=bound)
        )
        if bound < metrics.width:
            report.violations.append(rendered)
    logger.info(f"thinness certificate on {spec.name}: {len(report.triangles)} parsed, "
                f"{len(report.unparsed)} unparsed, {len(report.violations)} violations")
    return report
