"""The genetic algorithm: tournament selection with elitism, homologous
crossover over rule histories, inversion mutation, and the run loop.

All randomness flows through one ``random.Random`` stream per run, consumed
in a fixed order (initialisation, then per generation: selection, crossover,
mutation) so runs are fully reproducible from the seed and candidate
evaluation can be parallelised without perturbing the stream.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import pde
from .expr import ExpressionError, parse
from .grammar import Grammar, MappingResult, map_genotype
from .pde import FitnessReport, Grid, Problem

__all__ = [
    "GaConfig",
    "Individual",
    "GenerationRecord",
    "RunResult",
    "init_population",
    "select",
    "crossover_homologous",
    "crossover_two_point",
    "mutate_inversion",
    "run",
]

Genotype = list[int]

TERMINATION_MAX_GENERATIONS = "reached-max"
TERMINATION_TARGET = "target-fitness"


@dataclass
class GaConfig:
    population_size: int = 500
    chromosome_length: int = 50
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1
    max_generations: int = 1000
    wrap_threshold: int = 2
    tournament_size: int = 2
    elite_count: int = 1
    codon_max: int = 255
    sentinel_fitness: float = pde.DEFAULT_SENTINEL
    rng_seed: int = 0
    target_fitness: float = 1e-7
    penalty_weight: float = 1.0
    rbf_shape: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.chromosome_length < 1:
            raise ValueError("chromosome_length must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")
        if not 2 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [2, population_size]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be smaller than population_size")
        if self.codon_max < 0:
            raise ValueError("codon_max must be non-negative")
        if self.max_generations < 0:
            raise ValueError("max_generations must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class Individual:
    """A genotype with its cached mapping and fitness."""

    genotype: Genotype
    mapping: MappingResult
    fitness: FitnessReport


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float          # mean total over feasible individuals
    best_phenotype: str


@dataclass
class RunResult:
    best: Individual
    trace: list[GenerationRecord]
    generations_run: int
    termination: str


class _Evaluator:
    """Maps genotypes and scores phenotypes, memoising fitness per phenotype.

    Fitness is a pure function of the phenotype text, so the cache cannot
    change results, only skip repeated work as the population converges.
    """

    def __init__(self, problem: Problem, grammar: Grammar, config: GaConfig,
                 grid: Grid):
        self.problem = problem
        self.grammar = grammar
        self.config = config
        self.grid = grid
        self._cache: dict[str, FitnessReport] = {}
        self._rejected = FitnessReport.infeasible(config.sentinel_fitness)

    def evaluate(self, genotype: Genotype) -> Individual:
        mapping = map_genotype(genotype, self.grammar, self.config.wrap_threshold)
        if not mapping.mapped:
            return Individual(genotype, mapping, self._rejected)
        report = self._cache.get(mapping.phenotype)
        if report is None:
            report = self._score(mapping.phenotype)
            self._cache[mapping.phenotype] = report
        return Individual(genotype, mapping, report)

    def _score(self, phenotype: str) -> FitnessReport:
        try:
            candidate = parse(phenotype, rbf_shape=self.config.rbf_shape)
        except ExpressionError:
            # only reachable with user grammars that emit non-expression text
            return self._rejected
        return pde.fitness(candidate, self.problem,
                           penalty_weight=self.config.penalty_weight,
                           sentinel=self.config.sentinel_fitness,
                           grid=self.grid)


def init_population(config: GaConfig, grammar: Grammar, problem: Problem,
                    rng: random.Random | None = None,
                    evaluator: _Evaluator | None = None) -> list[Individual]:
    """Uniform random codons, mapped and evaluated; deterministic per seed."""
    if rng is None:
        rng = random.Random(config.rng_seed)
    if evaluator is None:
        evaluator = _Evaluator(problem, grammar, config, pde.make_grid(problem))
    genotypes = [
        [rng.randint(0, config.codon_max) for _ in range(config.chromosome_length)]
        for _ in range(config.population_size)
    ]
    return _evaluate_all(genotypes, evaluator, config.threads)


def _evaluate_all(genotypes, evaluator, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(evaluator.evaluate, genotypes))
    return [evaluator.evaluate(g) for g in genotypes]


def _total(ind: Individual) -> float:
    return ind.fitness.total


def select(population: list[Individual], config: GaConfig,
           rng: random.Random) -> list[Individual]:
    """Fill a parent pool of size population_size - elite_count by size-k
    tournaments; ties go to the first-sampled contender."""
    pool = []
    for _ in range(config.population_size - config.elite_count):
        contenders = rng.sample(population, config.tournament_size)
        pool.append(min(contenders, key=_total))
    return pool


def crossover_two_point(g1: Genotype, g2: Genotype,
                        rng: random.Random) -> tuple[Genotype, Genotype]:
    """Plain two-point crossover with the same cut positions on both parents."""
    length = len(g1)
    a, b = sorted(rng.sample(range(length + 1), 2))
    c1 = g1[:a] + g2[a:b] + g1[b:]
    c2 = g2[:a] + g1[a:b] + g2[b:]
    return c1, c2


def crossover_homologous(p1: Individual, p2: Individual,
                         rng: random.Random) -> tuple[Genotype, Genotype]:
    """Homologous crossover: align derivation histories, cut inside the
    dissimilarity region at positions expanding the same nonterminal.

    The two parents' rule histories share a maximal common prefix (the
    region of similarity); the first crossover point sits at its end on
    both parents.  The second point is drawn uniformly on the first parent;
    on the second parent the nearest position expanding the same
    nonterminal is located by searching outward (both directions, nearer
    first, lower index on ties) from a uniformly drawn start.  The
    delimited segments, second point included, are then exchanged.

    Exchanged segments may differ in length; offspring are rebalanced to
    the fixed chromosome length by moving the overlong child's tail
    overflow onto the short child, so the pair's combined codon multiset is
    exactly the parents' combined multiset.  Ten failed searches for a
    compatible second point make the crossover a no-op; a parent without a
    rule history (rejected genotype) falls back to plain two-point
    crossover.
    """
    g1, g2 = p1.genotype, p2.genotype
    if not (p1.mapping.mapped and p2.mapping.mapped):
        return crossover_two_point(g1, g2, rng)
    length = len(g1)
    # entries past the chromosome length come from wrapped re-reads and do
    # not correspond to fresh codon positions
    h1 = p1.mapping.rule_history[:min(p1.mapping.codons_consumed, length)]
    h2 = p2.mapping.rule_history[:min(p2.mapping.codons_consumed, length)]
    prefix = 0
    for a, b in zip(h1, h2):
        if a != b:
            break
        prefix += 1
    if prefix >= len(h1) or prefix >= len(h2):
        return list(g1), list(g2)

    for _ in range(10):
        b1 = rng.randrange(prefix, len(h1))
        kind = h1[b1][0]
        start = rng.randrange(prefix, len(h2))
        b2 = _nearest_matching(h2, start, prefix, kind)
        if b2 is not None:
            break
    else:
        return list(g1), list(g2)

    child1 = g1[:prefix] + g2[prefix:b2 + 1] + g1[b1 + 1:]
    child2 = g2[:prefix] + g1[prefix:b1 + 1] + g2[b2 + 1:]
    if len(child1) > length:
        child1, child2 = child1[:length], child2 + child1[length:]
    elif len(child2) > length:
        child2, child1 = child2[:length], child1 + child2[length:]
    return child1, child2


def _nearest_matching(history, start, lower, kind):
    """Index nearest to start in [lower, len(history)) whose entry expands
    ``kind``; smaller index wins ties."""
    upper = len(history)
    for distance in range(max(start - lower, upper - 1 - start) + 1):
        below = start - distance
        if lower <= below and history[below][0] == kind:
            return below
        above = start + distance
        if distance > 0 and above < upper and history[above][0] == kind:
            return above
    return None


def mutate_inversion(genotype: Genotype, rng: random.Random,
                     rate: float) -> Genotype:
    """With probability ``rate``: cut a random codon substring, reverse it,
    and reinsert it at a random position.  The codon multiset is preserved."""
    if rng.random() >= rate:
        return list(genotype)
    return _invert_segment(genotype, rng)


def run(problem: Problem, grammar: Grammar, config: GaConfig) -> RunResult:
    """Evolve until the best total reaches target_fitness or max_generations
    pass.  Each generation: elites survive untouched, tournament winners are
    paired for crossover, children are mutated, then mapped and scored."""
    rng = random.Random(config.rng_seed)
    grid = pde.make_grid(problem)
    evaluator = _Evaluator(problem, grammar, config, grid)
    population = init_population(config, grammar, problem, rng, evaluator)

    trace = [_record(0, population, config.sentinel_fitness)]
    generation = 0
    termination = TERMINATION_MAX_GENERATIONS
    while True:
        best = min(population, key=_total)
        if best.fitness.total <= config.target_fitness:
            termination = TERMINATION_TARGET
            break
        if generation >= config.max_generations:
            break

        elites = sorted(population, key=_total)[:config.elite_count]
        pool = select(population, config, rng)

        offspring_genotypes: list[Genotype | None] = []  # None: inherit parent
        parents: list[Individual] = []
        for k in range(0, len(pool) - 1, 2):
            pa, pb = pool[k], pool[k + 1]
            parents.extend((pa, pb))
            if rng.random() < config.crossover_rate:
                ca, cb = crossover_homologous(pa, pb, rng)
                offspring_genotypes.extend((ca, cb))
            else:
                offspring_genotypes.extend((None, None))
        if len(pool) % 2:  # leftover parent passes through unpaired
            parents.append(pool[-1])
            offspring_genotypes.append(None)

        mutated: list[Genotype | None] = []
        for parent, genotype in zip(parents, offspring_genotypes):
            source = parent.genotype if genotype is None else genotype
            if rng.random() < config.mutation_rate:
                mutated.append(_invert_segment(source, rng))
            else:
                mutated.append(genotype)  # still None if untouched by both

        to_score = [(i, g) for i, g in enumerate(mutated) if g is not None]
        scored = _evaluate_all([g for _, g in to_score], evaluator, config.threads)
        offspring: list[Individual] = [None] * len(mutated)
        for (i, _), ind in zip(to_score, scored):
            offspring[i] = ind
        for i, g in enumerate(mutated):
            if g is None:  # unchanged: reuse the parent's cached individual
                offspring[i] = parents[i]

        population = elites + offspring
        generation += 1
        trace.append(_record(generation, population, config.sentinel_fitness))

    return RunResult(best=min(population, key=_total), trace=trace,
                     generations_run=generation, termination=termination)


def _invert_segment(genotype: Genotype, rng: random.Random) -> Genotype:
    """Unconditional inversion move (the rate draw happens at the call site
    to keep the stream order fixed)."""
    length = len(genotype)
    i, j = sorted((rng.randrange(length), rng.randrange(length)))
    segment = genotype[i:j + 1]
    rest = genotype[:i] + genotype[j + 1:]
    pos = rng.randint(0, len(rest))
    return rest[:pos] + segment[::-1] + rest[pos:]


def _record(generation: int, population: list[Individual],
            sentinel: float) -> GenerationRecord:
    best = min(population, key=_total)
    feasible = [ind.fitness.total for ind in population if ind.fitness.feasible]
    mean = sum(feasible) / len(feasible) if feasible else sentinel
    return GenerationRecord(
        generation=generation,
        best_fitness=best.fitness.total,
        mean_fitness=mean,
        best_phenotype=best.mapping.phenotype or "",
    )
