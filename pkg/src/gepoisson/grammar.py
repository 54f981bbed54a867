"""BNF grammars and the codon-to-expression mapping.

A genotype is a fixed-length sequence of non-negative integer codons.  The
mapping performs a leftmost derivation from the start symbol: each
nonterminal reached consumes one codon V and rewrites using alternative
``V mod R`` of its R alternatives.  Reading past the end of the sequence
wraps to the front; a genotype still holding nonterminals when the wrap
budget is spent is rejected.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

__all__ = [
    "Grammar",
    "GrammarError",
    "MappingResult",
    "MAPPED",
    "REJECTED",
    "parse_bnf",
    "default_grammar",
    "map_genotype",
    "DEFAULT_GRAMMAR_TEXT",
    "STRICT_GRAMMAR_TEXT",
]


class GrammarError(ValueError):
    """Malformed grammar text or inconsistent rule set."""


# a grammar symbol is (text, is_nonterminal)
Symbol = tuple[str, bool]


@dataclass(frozen=True)
class Grammar:
    """Nonterminals, terminals, start symbol and ordered production alternatives.

    Alternatives keep their file order; the alternative chosen for codon V is
    ``V mod len(alternatives)``.
    """

    start: str
    productions: dict[str, tuple[tuple[Symbol, ...], ...]]

    @property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(self.productions)

    @property
    def terminals(self) -> frozenset[str]:
        out = set()
        for alts in self.productions.values():
            for alt in alts:
                out.update(text for text, is_nt in alt if not is_nt)
        return frozenset(out)


_NT_PATTERN = re.compile(r"<([^<>\s]+)>")


def parse_bnf(text: str) -> Grammar:
    """Parse grammar text: ``<name> ::= alt | alt ...``.

    Rules may span lines (continuation lines start with ``|``); ``#`` starts
    a comment.  The first rule's left-hand side is the start symbol.
    """
    # join continuation lines onto their rule
    logical: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith("|"):
            if not logical:
                raise GrammarError("continuation '|' before any rule")
            logical[-1] += " " + line.strip()
        else:
            logical.append(line.strip())

    productions: dict[str, tuple[tuple[Symbol, ...], ...]] = {}
    start = None
    for line in logical:
        if "::=" not in line:
            raise GrammarError(f"missing '::=' in rule: {line!r}")
        lhs_text, rhs_text = line.split("::=", 1)
        lhs_match = _NT_PATTERN.fullmatch(lhs_text.strip())
        if not lhs_match:
            raise GrammarError(f"left-hand side is not a <nonterminal>: {lhs_text.strip()!r}")
        lhs = lhs_match.group(1)
        if lhs in productions:
            raise GrammarError(f"duplicate definition of <{lhs}>")
        alts = []
        for alt_text in rhs_text.split("|"):
            if not alt_text.strip():
                raise GrammarError(f"empty alternative in rule for <{lhs}>")
            alts.append(_parse_alternative(alt_text))
        productions[lhs] = tuple(alts)
        if start is None:
            start = lhs
    if start is None:
        raise GrammarError("grammar has no rules")

    for lhs, alts in productions.items():
        for alt in alts:
            for text, is_nt in alt:
                if is_nt and text not in productions:
                    raise GrammarError(f"rule for <{lhs}> references undefined <{text}>")
    return Grammar(start=start, productions=productions)


def _parse_alternative(text: str) -> tuple[Symbol, ...]:
    """Split one alternative into nonterminal and terminal symbols.

    Text between nonterminals is split on whitespace; each piece is one
    terminal, concatenated without spaces in the phenotype.
    """
    symbols: list[Symbol] = []
    pos = 0
    for m in _NT_PATTERN.finditer(text):
        symbols.extend((t, False) for t in text[pos:m.start()].split())
        symbols.append((m.group(1), True))
        pos = m.end()
    symbols.extend((t, False) for t in text[pos:].split())
    return tuple(symbols)


# The expression grammar used throughout ships as grammar files; the
# non-strict variant appends the constant pi as a twelfth operand
# alternative so that solutions with pi factors stay reachable.
STRICT_GRAMMAR_TEXT = (
    resources.files("gepoisson") / "grammars" / "strict.bnf").read_text()
DEFAULT_GRAMMAR_TEXT = (
    resources.files("gepoisson") / "grammars" / "default.bnf").read_text()


def default_grammar(strict: bool = False) -> Grammar:
    """The built-in expression grammar; ``strict=True`` drops the pi extension."""
    return parse_bnf(STRICT_GRAMMAR_TEXT if strict else DEFAULT_GRAMMAR_TEXT)


MAPPED = "mapped"
REJECTED = "rejected"


@dataclass
class MappingResult:
    """Outcome of decoding one genotype.

    ``rule_history`` records (nonterminal, chosen alternative index) for every
    codon consulted, in leftmost-derivation order; codons re-read after a wrap
    append further entries.  ``phenotype`` is None exactly when rejected.
    """

    status: str
    phenotype: str | None
    rule_history: list[tuple[str, int]] = field(default_factory=list)
    codons_consumed: int = 0
    wraps_used: int = 0

    @property
    def mapped(self) -> bool:
        return self.status == MAPPED


def map_genotype(
    codons: Sequence[int], grammar: Grammar, wrap_threshold: int = 2
) -> MappingResult:
    """Decode a genotype into expression text via the mod rule.

    Every nonterminal consumes a codon, including nonterminals with a single
    alternative (V mod 1 = 0).  When the sequence is exhausted reading
    continues from the first codon and ``wraps_used`` increments; if the
    derivation still holds a nonterminal when wrap number
    ``wrap_threshold + 1`` would begin, the genotype is rejected.
    """
    if len(codons) == 0:
        raise ValueError("genotype must be non-empty")
    length = len(codons)
    pending: deque[Symbol] = deque([(grammar.start, True)])
    output: list[str] = []
    history: list[tuple[str, int]] = []
    consumed = 0
    wraps = 0
    while pending:
        text, is_nt = pending.popleft()
        if not is_nt:
            output.append(text)
            continue
        if consumed > 0 and consumed % length == 0:
            wraps = consumed // length
            if wraps > wrap_threshold:
                return MappingResult(REJECTED, None, history, consumed, wrap_threshold)
        alternatives = grammar.productions[text]
        choice = codons[consumed % length] % len(alternatives)
        history.append((text, choice))
        consumed += 1
        pending.extendleft(reversed(alternatives[choice]))
    return MappingResult(MAPPED, "".join(output), history, consumed, wraps)
