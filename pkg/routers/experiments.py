import itertools
import logging
import random
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from models import ExperimentConfig, ExperimentReport
from services.automata import Fsa, enumerate_words
from services.errors import ConfigError, VerificationFailed
from services.grammars import enumerate_cfg, intersect_regular, to_cnf
from services.groups import GroupSpec, build_combing, evaluate, resolve_group
from services.hyperbolicity import (
    DIAGONAL_SLOPE,
    bk_sequence,
    flabby_check,
    is_valid_triangulation,
    synthesize_table_grammar,
    thinness_certificate,
    triangulate_cycle,
)
from services.report_store import report_store
from services.tables import (
    ColumnSpec,
    Letter,
    TableSpec,
    build_column_grammars,
    column_cfg_from_comparator,
    column_language,
    comparator,
    comparator_transducer,
    enumerate_table,
    finite_table_fsa,
    letter_name,
    sigma_star_roundtrip,
    theorem_bi_pipeline,
)
from services.transducers import enumerate_pairs
from services.words import HASH, Word, split_on_hash

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentConfig], ExperimentReport]


class ExperimentRouter:
    """
    Registry of experiments; handlers register with @router.experiment(name)
    """
    def __init__(self, tags: Optional[List[str]] = None):
        self.tags = tags or []
        self.routes: Dict[str, Handler] = {}

    def experiment(self, name: str) -> Callable[[Handler], Handler]:
        def register(handler: Handler) -> Handler:
            if name in self.routes:
                raise ValueError(f"experiment {name!r} registered twice")
            self.routes[name] = handler
            return handler
        return register

    def run(self, config: ExperimentConfig) -> ExperimentReport:
        handler = self.routes.get(config.experiment)
        if handler is None:
            raise ConfigError(f"unknown experiment {config.experiment!r}")
        logger.info(f"🚀 Running {config.experiment} on {config.group} (combing {config.combing}, maxlen {config.maxlen})")
        report = handler(config)
        status = "✅ passed" if report.passed else "❌ failed"
        logger.info(f"{status}: {config.experiment} ({len(report.counterexamples)} counterexamples)")
        return report


router = ExperimentRouter(tags=["experiments"])


def _setup(config: ExperimentConfig) -> Tuple[GroupSpec, TableSpec, dict]:
    spec = resolve_group(config.group)
    R, info = build_combing(spec, config.combing)
    ts = TableSpec(spec, R, combing_name=info.name)
    return spec, ts, info.model_dump()


def _report(config: ExperimentConfig, spec: GroupSpec, anchor: str, passed: bool, **fields) -> ExperimentReport:
    return ExperimentReport(
        experiment=config.experiment,
        anchor=anchor,
        group=spec.name,
        combing=config.combing,
        maxlen=config.maxlen,
        seed=config.seed,
        passed=passed,
        **fields,
    )


def _letters(config: ExperimentConfig, spec: GroupSpec) -> List[Letter]:
    if config.letter is None:
        return [None] + list(spec.alphabet.letters)
    if config.letter in ("-", "ε"):
        return [None]
    return [spec.alphabet.code(config.letter)]


def _is_table_word(spec: GroupSpec, R: Fsa, t: Word) -> bool:
    if t.count(HASH) != 2:
        return False
    return all(R.accepts(part) for part in split_on_hash(t)) and evaluate(spec, t) == spec.identity


@router.experiment("table-enum")
def table_enum(config: ExperimentConfig) -> ExperimentReport:
    """Enumerate the multiplication table and re-check every word against its definition"""
    spec, ts, info = _setup(config)
    words = enumerate_table(ts, config.maxlen)
    render = spec.alphabet.render
    bad = [render(t) for t in words if not _is_table_word(spec, ts.combing, t)]
    path = report_store.save_words(f"{config.experiment}-{spec.name}", (render(t) for t in words))
    return _report(
        config, spec, "multiplication table of a combing",
        passed=not bad,
        results={"combing": info, "count": len(words), "words_file": path},
        counterexamples=bad,
    )


@router.experiment("table-fsa-check")
def table_fsa_check(config: ExperimentConfig) -> ExperimentReport:
    """Acceptor membership against the definition on every word of Σ_# up to maxlen"""
    spec, ts, info = _setup(config)
    A = finite_table_fsa(spec, ts.combing)
    mismatches = []
    checked = 0
    for n in range(config.maxlen + 1):
        for t in itertools.product(spec.alphabet.symbols, repeat=n):
            checked += 1
            if A.accepts(t) != _is_table_word(spec, ts.combing, t):
                mismatches.append(spec.alphabet.render(t))
    return _report(
        config, spec, "finite groups have regular multiplication tables",
        direction="finite ⇒ regular",
        passed=not mismatches,
        results={"combing": info, "states": A.num_states, "checked_words": checked},
        counterexamples=mismatches,
    )


@router.experiment("flabby")
def flabby(config: ExperimentConfig) -> ExperimentReport:
    """C_emp = max(width - norm/75) per maxlen; constant for hyperbolic groups, growing otherwise"""
    spec, ts, info = _setup(config)
    result = flabby_check(spec, ts.combing, config.maxlen)
    first = min(8, config.maxlen)
    series = {}
    for m in range(first, config.maxlen + 1):
        values = [Fraction(r.width) - Fraction(r.norm, 75) for r in result.triangles if r.length <= m]
        series[m] = float(max(values, default=0))
    if config.expect_nonhyperbolic:
        passed = series[config.maxlen] > series[first]
        direction = "widths outgrow every flabby bound"
    else:
        passed = series[config.maxlen] == series[first]
        direction = "widths stay within a flabby bound"
    path = report_store.save_scatter(f"{config.experiment}-{spec.name}", result.triangles)
    return _report(
        config, spec, "hyperbolic groups have flabby triangles",
        direction=direction,
        passed=passed,
        results={
            "combing": info,
            "count": result.count,
            "max_width": result.max_width,
            "c_emp": result.c_emp,
            "c_emp_by_maxlen": series,
            "scatter_file": path,
        },
    )


def random_cycle(spec: GroupSpec, rng: random.Random, n: int) -> Word:
    """Random freely trivial word of even length n, rotated at random"""
    letters = list(spec.alphabet.letters)
    word: List[int] = []
    stack: List[int] = []
    for remaining in range(n, 0, -1):
        if stack and (len(stack) == remaining or rng.random() < 0.5):
            word.append(stack.pop() ^ 1)
        else:
            x = rng.choice(letters)
            stack.append(x)
            word.append(x)
    shift = rng.randrange(n)
    return tuple(word[shift:] + word[:shift])


@router.experiment("triangulate")
def triangulate(config: ExperimentConfig) -> ExperimentReport:
    """Triangulate seeded random cycles; diagonals stay within n/6 + K_emp"""
    spec = resolve_group(config.group)
    rng = random.Random(config.seed)
    failures = []
    k_emp = {"greedy": Fraction(0), "paper": Fraction(0)}
    first_diagonal_ok = True
    for _ in range(config.cycles):
        n = 4 + 2 * rng.randrange(11)
        cycle = random_cycle(spec, rng, n)
        for policy in k_emp:
            tri = triangulate_cycle(spec, cycle, policy)
            if not is_valid_triangulation(tri):
                failures.append(f"{policy}: invalid triangulation of {spec.alphabet.render(cycle)}")
                continue
            for dg in tri.diagonals:
                k_emp[policy] = max(k_emp[policy], dg.length - DIAGONAL_SLOPE * n)
            if n == 4 and tri.diagonals[0].length > 2:
                first_diagonal_ok = False
                failures.append(f"{policy}: first diagonal of {spec.alphabet.render(cycle)} is longer than 2")
    passed = not failures and all(k <= 3 for k in k_emp.values())
    return _report(
        config, spec, "cycles triangulate with short diagonals",
        passed=passed,
        results={
            "cycles": config.cycles,
            "k_emp": {p: float(k) for p, k in k_emp.items()},
            "first_diagonal_bound": first_diagonal_ok,
        },
        counterexamples=failures,
    )


@router.experiment("synthesize-grammar")
def synthesize_grammar(config: ExperimentConfig) -> ExperimentReport:
    """Synthesize the table grammar and check that every short word evaluates to 1"""
    spec = resolve_group(config.group)
    L = synthesize_table_grammar(spec, config.delta, compact=True)
    words = enumerate_cfg(L, config.maxlen)
    bad = [spec.alphabet.render(w) for w in words if evaluate(spec, w) != spec.identity]
    path = report_store.save_words(f"{config.experiment}-{spec.name}", L.to_text().splitlines())
    return _report(
        config, spec, "grammar words project to the identity",
        passed=not bad,
        results={
            "delta": config.delta,
            "nonterminals": len(L.nonterminals),
            "productions": len(L.productions),
            "checked_words": len(words),
            "grammar_file": path,
        },
        counterexamples=bad,
    )


@router.experiment("theorem1-check")
def theorem1_check(config: ExperimentConfig) -> ExperimentReport:
    """L ∩ R#R#R against the enumerated table"""
    spec, ts, info = _setup(config)
    L = synthesize_table_grammar(spec, config.delta, compact=True)
    M = intersect_regular(L, Fsa.table_shape(ts.combing))
    generated = set(enumerate_cfg(M, config.maxlen))
    table = set(enumerate_table(ts, config.maxlen))
    render = spec.alphabet.render
    missing = sorted(table - generated)
    extra = sorted(generated - table)
    return _report(
        config, spec, "hyperbolic groups have context-free multiplication tables",
        direction="hyperbolic ⇒ M = L ∩ R#R#R (bounded)",
        passed=not missing and not extra,
        results={
            "combing": info,
            "delta": config.delta,
            "table_words": len(table),
            "grammar_productions": len(M.productions),
        },
        counterexamples=[f"missing {render(t)}" for t in missing] + [f"extra {render(t)}" for t in extra],
    )


@router.experiment("theorem2-check")
def theorem2_check(config: ExperimentConfig) -> ExperimentReport:
    """The finite-group acceptor generates exactly the enumerated table"""
    spec, ts, info = _setup(config)
    A = finite_table_fsa(spec, ts.combing)
    accepted = set(enumerate_words(A, config.maxlen))
    table = set(enumerate_table(ts, config.maxlen))
    render = spec.alphabet.render
    diff = sorted(accepted ^ table)
    return _report(
        config, spec, "finite groups have regular multiplication tables",
        direction="finite ⇒ regular",
        passed=not diff,
        results={"combing": info, "states": A.num_states, "table_words": len(table)},
        counterexamples=[render(t) for t in diff],
    )


@router.experiment("columns")
def columns(config: ExperimentConfig) -> ExperimentReport:
    """Column grammars built from comparators against the enumerated columns"""
    spec, ts, info = _setup(config)
    render = spec.alphabet.render
    if config.element is not None:
        g = evaluate(spec, spec.alphabet.parse(config.element))
        words = column_language(ColumnSpec(ts, g), config.maxlen)
        path = report_store.save_words(f"{config.experiment}-{spec.name}", (render(w) for w in words))
        return _report(
            config, spec, "columns of the multiplication table",
            passed=True,
            results={"element": config.element, "count": len(words), "words_file": path},
        )
    ts = TableSpec.checked(spec, ts.combing, ts.combing_name)
    results = {"combing": info}
    bad = []
    for a in _letters(config, spec):
        G = column_cfg_from_comparator(comparator_transducer(ts, a), ts.combing)
        generated = set(enumerate_cfg(G, config.maxlen))
        expected = set(column_language(ColumnSpec(ts, spec.identity if a is None else spec.generator(a)), config.maxlen))
        name = letter_name(spec.alphabet, a)
        results[name] = {"productions": len(G.productions), "words": len(expected)}
        bad.extend(f"{name}: {render(w)}" for w in sorted(generated ^ expected))
    return _report(
        config, spec, "columns are linear languages for asynchronously automatic groups",
        direction="comparator ⇒ column grammar",
        passed=not bad,
        results=results,
        counterexamples=bad,
    )


@router.experiment("comparator")
def comparator_check(config: ExperimentConfig) -> ExperimentReport:
    """Comparator transducers against the enumerated comparator relations"""
    spec, ts, info = _setup(config)
    render = spec.alphabet.render
    results = {"combing": info}
    bad = []
    for a in _letters(config, spec):
        T = comparator_transducer(ts, a)
        machine = enumerate_pairs(T, config.maxlen)
        oracle = comparator(ts, a, config.maxlen)
        name = letter_name(spec.alphabet, a)
        path = report_store.save_pairs(
            f"{config.experiment}-{spec.name}-{'eps' if a is None else name}",
            ((render(u), render(v)) for u, v in oracle),
        )
        results[name] = {"states": T.num_states, "pairs": len(oracle), "pairs_file": path}
        bad.extend(f"{name}: ({render(u)}, {render(v)})" for u, v in sorted(set(machine) ^ set(oracle)))
    return _report(
        config, spec, "comparators are rational transductions",
        passed=not bad,
        results=results,
        counterexamples=bad,
    )


@router.experiment("theorem3-pipeline")
def theorem3_pipeline(config: ExperimentConfig) -> ExperimentReport:
    """Comparators rebuilt from column grammars"""
    spec, ts, info = _setup(config)
    ts = TableSpec.checked(spec, ts.combing, ts.combing_name)
    grammars = build_column_grammars(ts)
    result = theorem_bi_pipeline(ts, grammars, config.maxlen, refine=config.refine, strict=False)
    return _report(
        config, spec, "context-free columns give asynchronous automaticity",
        direction="column grammars ⇒ rational comparators",
        passed=result.passed,
        results={"combing": info, **result.model_dump()},
        counterexamples=[list(c) for c in result.counterexamples],
    )


@router.experiment("sigma-star-roundtrip")
def sigma_star(config: ExperimentConfig) -> ExperimentReport:
    """M and the word problem W determine each other for the combing Σ*"""
    spec = resolve_group(config.group)
    result = sigma_star_roundtrip(spec)
    return _report(
        config, spec, "the combing Σ*: M = f⁻¹(W) ∩ Σ*#Σ*#Σ*, W = f(M ∩ Σ*##)",
        direction="both",
        passed=result.passed,
        results=result.model_dump(),
    )


@router.experiment("thinness")
def thinness(config: ExperimentConfig) -> ExperimentReport:
    """Width bounds read off derivations never undercut the true widths"""
    spec, ts, info = _setup(config)
    L = synthesize_table_grammar(spec, config.delta, compact=True)
    G = to_cnf(intersect_regular(L, Fsa.table_shape(ts.combing)), drop_epsilon=True)
    result = thinness_certificate(spec, G, ts.combing, config.maxlen)
    path = report_store.save_scatter(f"{config.experiment}-{spec.name}", result.triangles)
    return _report(
        config, spec, "context-free tables force thin triangles",
        direction="context-free ⇒ thin (bounded)",
        passed=result.passed,
        results={
            "combing": info,
            "k": result.k,
            "triangles": len(result.triangles),
            "max_width": max((t.width for t in result.triangles), default=0),
            "max_bound": max((t.certified_bound or 0 for t in result.triangles), default=0),
            "scatter_file": path,
        },
        counterexamples=result.unparsed + result.violations,
    )


@router.experiment("bk-check")
def bk_check(config: ExperimentConfig) -> ExperimentReport:
    """b_k <= 1 + n/2^k for every n up to 2^16"""
    bad = []
    longest = 0
    for n in range(2 ** 16 + 1):
        try:
            longest = max(longest, len(bk_sequence(n)) - 1)
        except VerificationFailed as e:
            bad.extend(e.counterexamples)
    example = [str(b) for b in bk_sequence(config.maxlen)]
    return ExperimentReport(
        experiment=config.experiment,
        anchor="halving the polygon: b_k <= 1 + n/2^k",
        group=config.group,
        combing=config.combing,
        maxlen=config.maxlen,
        seed=config.seed,
        passed=not bad,
        results={"checked": 2 ** 16 + 1, "most_steps": longest, f"sequence_{config.maxlen}": example},
        counterexamples=[list(c) for c in bad],
    )
