import random

import pytest

from gepoisson.expr import parse
from gepoisson.grammar import (
    GrammarError,
    default_grammar,
    map_genotype,
    parse_bnf,
)

GOLDEN_CODONS = [10, 4, 8, 15, 3, 6, 19, 21, 9]


def test_default_grammar_alternative_counts():
    g = default_grammar(strict=True)
    assert len(g.productions["expr"]) == 4
    assert len(g.productions["operand"]) == 11
    assert len(g.productions["op"]) == 4
    assert len(g.productions["func"]) == 9
    assert len(g.productions["var"]) == 3
    assert g.start == "expr"


def test_default_grammar_pi_extension():
    g = default_grammar()
    assert len(g.productions["operand"]) == 12
    assert g.productions["operand"][11] == (("pi", False),)
    # strict mode: alternative 10 of operand is <var>
    strict = default_grammar(strict=True)
    assert strict.productions["operand"][10] == (("var", True),)
    assert strict.productions["func"][5] == (("BRF1", False),)


def test_parse_bnf_single_rule():
    g = parse_bnf("<a> ::= x")
    assert g.start == "a"
    assert g.productions == {"a": ((("x", False),),)}


def test_parse_bnf_undefined_nonterminal():
    with pytest.raises(GrammarError):
        parse_bnf("<a> ::= <b>")


def test_parse_bnf_duplicate_definition():
    with pytest.raises(GrammarError):
        parse_bnf("<a> ::= x\n<a> ::= y")


def test_parse_bnf_empty_alternative():
    with pytest.raises(GrammarError):
        parse_bnf("<a> ::= x | | y")


def test_parse_bnf_continuation_lines_and_comments():
    g = parse_bnf("""
# toy grammar
<s> ::= <a><a>
<a> ::= u   # first
      | v
""")
    assert len(g.productions["a"]) == 2
    assert g.terminals == frozenset({"u", "v"})


def test_mapping_golden_trace():
    g = default_grammar(strict=True)
    result = map_genotype(GOLDEN_CODONS, g)
    assert result.mapped
    assert result.phenotype == "sqrt(3*x)"
    assert result.codons_consumed == 9
    assert result.wraps_used == 0
    assert result.rule_history == [
        ("expr", 2), ("func", 4), ("expr", 0), ("expr", 3), ("operand", 3),
        ("op", 2), ("expr", 3), ("operand", 10), ("var", 0),
    ]


def test_mapping_two_codons_to_digit():
    result = map_genotype([3, 5], default_grammar(strict=True))
    assert result.phenotype == "5"
    assert result.codons_consumed == 2
    assert result.rule_history == [("expr", 3), ("operand", 5)]


def test_single_zero_codon_is_rejected():
    # 0 mod 4 = 0 expands <expr> -> <expr><op><expr> forever
    result = map_genotype([0], default_grammar(strict=True))
    assert result.status == "rejected"
    assert result.phenotype is None
    assert not result.mapped


def test_wrap_accounting():
    # [3, 0]: <expr>-><operand> (3), digit 0; no wrap
    r = map_genotype([3, 0], default_grammar(strict=True))
    assert r.wraps_used == 0
    # a genotype that must re-read: [2, 4, 3] gives <func>(<expr>) then
    # sqrt? 4 mod 9 = 4 -> sqrt, 3 mod 4 = 3 -> <operand>, wrap, 2 mod 11 = 2
    r = map_genotype([2, 4, 3], default_grammar(strict=True))
    assert r.mapped
    assert r.phenotype == "sqrt(2)"
    assert r.codons_consumed == 4
    assert r.wraps_used == 1


def test_empty_genotype_is_a_usage_error():
    with pytest.raises(ValueError):
        map_genotype([], default_grammar())


def test_mapping_is_deterministic():
    g = default_grammar()
    rng = random.Random(0)
    for _ in range(50):
        codons = [rng.randint(0, 255) for _ in range(25)]
        first = map_genotype(codons, g)
        second = map_genotype(codons, g)
        assert first == second


def test_shared_prefix_gives_shared_history_prefix():
    g = default_grammar()
    rng = random.Random(5)
    checked = 0
    while checked < 40:
        base = [rng.randint(0, 255) for _ in range(30)]
        other = list(base)
        k = rng.randrange(1, 30)
        for i in range(k, 30):
            other[i] = rng.randint(0, 255)
        ra, rb = map_genotype(base, g), map_genotype(other, g)
        shared = min(k, len(ra.rule_history), len(rb.rule_history))
        assert ra.rule_history[:shared] == rb.rule_history[:shared]
        checked += 1


def test_mapped_phenotypes_parse_and_use_grammar_terminals():
    g = default_grammar()
    rng = random.Random(9)
    seen = 0
    while seen < 100:
        codons = [rng.randint(0, 255) for _ in range(40)]
        result = map_genotype(codons, g)
        if not result.mapped:
            continue
        parse(result.phenotype)  # must not raise
        assert result.wraps_used <= 2
        seen += 1


def test_rejection_happens_exactly_when_wraps_run_out():
    g = default_grammar()
    rng = random.Random(13)
    rejected = 0
    for _ in range(400):
        codons = [rng.randint(0, 255) for _ in range(8)]
        result = map_genotype(codons, g, wrap_threshold=2)
        if result.mapped:
            # consumed codons never reach the forbidden fourth pass
            assert result.codons_consumed <= 3 * len(codons)
        else:
            rejected += 1
            assert result.codons_consumed == 3 * len(codons)
    assert rejected > 0
