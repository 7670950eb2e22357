"""Evolutionary architecture pruning: asynchronous aging evolution over
31-bit codes with teacher-student objectives against a trained oracle.

The oracle is the trained all-ones network; every candidate trains its
own decoder (transfers disabled), stylizes the validation pairs, and is
scored by similarity to the oracle's outputs plus an operator-count
penalty. Steady-state evolution inserts a mutated tournament winner and
evicts the population member with the smallest generation index.

Candidate evaluation is deterministic in the code alone: every candidate
shares one evaluation seed, and decoder parameters are initialized
per-name, so architectures train under common random numbers. Repeated
evaluations of one code agree bit-for-bit (exhaustive enumeration of a
subspace is well-defined) and single-bit neighbors differ by their
architecture rather than by reshuffled initialization draws.
"""

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import arch, metrics, train
from .errors import PreconditionError, TrainingDivergedError
from .metrics import ObjectiveWeights
from .transfer import TransferConfig, prepare_style_side

FAILED_LOSS = math.inf


@dataclass
class SearchConfig:
    population: int = 20
    budget: int = 40
    tournament: int = None  # ceil(population / 4), floor 2
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    seed: int = 0
    workers: int = 1
    strict: bool = False
    base_width: int = 8
    image_size: int = 64
    corpus_size: int = 16
    corpus_seed: int = 1
    val_pairs: int = 4
    val_seed: int = 2
    epsilon: float = 0.3
    train_steps: int = 60
    train_batch: int = 2
    train_lr: float = 1e-3
    eval_seed: int = 7
    oracle_seed: int = 11
    encoder_seed: int = arch.DEFAULT_ENCODER_SEED
    # restricting the space to a frozen-base + free-bit subset supports
    # subspace experiments; the default is the full 31-bit space
    base_code: str = "0" * arch.CODE_LENGTH
    free_bits: tuple = tuple(range(arch.CODE_LENGTH))

    def __post_init__(self):
        if self.population < 2:
            raise PreconditionError("population must be >= 2")
        if self.budget < self.population:
            raise PreconditionError("budget must be >= population")
        if self.tournament is None:
            self.tournament = max(2, math.ceil(self.population / 4))
        if not 2 <= self.tournament <= self.population:
            raise PreconditionError("tournament size must be in [2, population]")
        if self.workers < 1:
            raise PreconditionError("workers must be >= 1")
        if not self.free_bits:
            raise PreconditionError("free_bits must not be empty")


@dataclass
class Candidate:
    code: arch.ArchCode
    loss: float = FAILED_LOSS
    gen: int = 0
    status: str = "pending"
    recon_error: float = FAILED_LOSS
    perceptual: float = FAILED_LOSS
    op_fraction: float = 0.0
    seq: int = -1  # insertion order, breaks generation ties on eviction


@dataclass
class OracleBundle:
    """Trained all-ones network plus everything candidate evaluation reuses."""

    graph: object
    corpus: object
    pairs: list
    outputs: list
    config: SearchConfig


def _transfer_config(config):
    return TransferConfig(epsilon=config.epsilon, blend=1.0, module_kind="wct")


def _train_config(config, seed):
    return train.TrainConfig(
        steps=config.train_steps,
        batch=config.train_batch,
        learning_rate=config.train_lr,
        seed=seed,
        image_size=config.image_size,
    )


def stylize_pairs(graph, pairs, config):
    tc = _transfer_config(config)
    return [arch.forward(graph, content, style, tc) for content, style in pairs]


def train_oracle(config):
    """Train the supervisory all-ones network and cache its stylized
    validation outputs."""
    encoder = arch.Encoder.seeded(config.base_width, config.encoder_seed)
    corpus = train.procedural_corpus(
        config.corpus_size, size=config.image_size, seed=config.corpus_seed
    )
    pairs = train.validation_pairs(config.val_pairs, size=config.image_size, seed=config.val_seed)
    graph = arch.build_graph(
        arch.ArchCode(bits=(True,) * arch.CODE_LENGTH),
        config.base_width,
        encoder,
        decoder_seed=config.oracle_seed,
    )
    train.train_decoder(graph, corpus, _train_config(config, config.oracle_seed))
    outputs = stylize_pairs(graph, pairs, config)
    return OracleBundle(graph=graph, corpus=corpus, pairs=pairs, outputs=outputs, config=config)


class Evaluator:
    """Callable (code, gen) -> Candidate with the per-run caches shared."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.config = oracle.config
        self.encoder = oracle.graph.encoder
        # encoder taps are identical for every candidate: same fixed encoder
        self._corpus_taps = [self.encoder.encode(img) for img in oracle.corpus.images]
        self._pair_taps = [
            (self.encoder.encode(c), self.encoder.encode(s)) for c, s in oracle.pairs
        ]

    def _stylize(self, graph):
        tc = _transfer_config(self.config)
        outputs = []
        for taps_c, taps_s in self._pair_taps:
            if graph.transfer_sites:
                site_feats = arch.run_decoder(graph, taps_s, record_sites=True)
                sides = [prepare_style_side(f, tc) for f in site_feats]
            else:
                sides = None
            outputs.append(arch.run_decoder(graph, taps_c, style_sides=sides, config=tc))
        return outputs

    def __call__(self, code, gen=0):
        config = self.config
        seed = config.eval_seed  # shared by all codes: common random numbers
        graph = arch.build_graph(code, config.base_width, self.encoder, decoder_seed=seed)
        try:
            train.train_decoder_cached(
                graph, self.oracle.corpus, self._corpus_taps, _train_config(config, seed)
            )
        except TrainingDivergedError:
            return Candidate(
                code=code, loss=FAILED_LOSS, gen=gen, status="failed",
                op_fraction=arch.op_fraction(code),
            )
        outputs = self._stylize(graph)
        report = metrics.objective(outputs, self.oracle.outputs, code, config.weights, self.encoder)
        return Candidate(
            code=code,
            loss=report.overall,
            gen=gen,
            status="trained",
            recon_error=report.recon_error,
            perceptual=report.perceptual,
            op_fraction=report.op_fraction,
        )


def evaluate_candidate(code, oracle, gen=0):
    """Train and score one architecture against the oracle cache."""
    return Evaluator(oracle)(code, gen)


def mutate(parent, history_codes, rng, positions=None, max_retries=100):
    """Flip one uniformly random bit; retry while the child was already
    explored, accepting a duplicate after ``max_retries`` draws."""
    positions = tuple(range(arch.CODE_LENGTH)) if positions is None else tuple(positions)
    child = parent.flip(positions[int(rng.integers(len(positions)))])
    for _ in range(max_retries - 1):
        if str(child) not in history_codes:
            break
        child = parent.flip(positions[int(rng.integers(len(positions)))])
    return child


def _draw_code(rng, config):
    bits = list(arch.parse_code(config.base_code).bits)
    for i in config.free_bits:
        bits[i] = bool(rng.integers(0, 2))
    return arch.ArchCode(bits=tuple(bits))


def tournament_select(population, tournament_size, rng):
    """Uniform subset without replacement; lowest loss wins, ties broken by
    generation index then code string."""
    if len(population) < tournament_size:
        raise PreconditionError(
            f"population of {len(population)} cannot host a tournament of {tournament_size}"
        )
    picks = rng.choice(len(population), size=tournament_size, replace=False)
    return min((population[i] for i in picks), key=lambda c: (c.loss, c.gen, str(c.code)))


class SearchState:
    """Population/history bookkeeping; mutations serialize through a lock."""

    def __init__(self, population_size):
        self.population_size = population_size
        self.population = []
        self.history = []
        self.history_codes = set()
        self.gen = 0
        self._lock = threading.Lock()

    def snapshot(self):
        with self._lock:
            return list(self.population), set(self.history_codes)

    def next_gen(self):
        with self._lock:
            self.gen += 1
            return self.gen

    def commit(self, candidate, evict):
        with self._lock:
            candidate.seq = len(self.history)
            self.history.append(candidate)
            self.history_codes.add(str(candidate.code))
            self.population.append(candidate)
            if evict:
                oldest = min(self.population, key=lambda c: (c.gen, c.seq))
                self.population.remove(oldest)
            return len(self.history)

    def best(self):
        return min(self.history, key=lambda c: (c.loss, c.seq))


@dataclass
class SearchResult:
    best: Candidate
    history: list
    config: SearchConfig

    def telemetry_rows(self):
        rows = []
        for i, cand in enumerate(self.history):
            rows.append(
                {
                    "index": i,
                    "code": str(cand.code),
                    "loss": cand.loss,
                    "recon_error": cand.recon_error,
                    "perceptual": cand.perceptual,
                    "op_fraction": cand.op_fraction,
                    "gen": cand.gen,
                    "status": cand.status,
                    "hamming_to_best": arch.hamming(cand.code, self.best.code),
                }
            )
        return rows


def write_telemetry(result, path):
    rows = result.telemetry_rows()
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _spawned_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def search(config, oracle, evaluate_fn=None):
    """Aging evolution per the parallel steady-state scheme.

    Phase 1 seeds ``population`` random codes; phase 2 repeats
    tournament -> single-bit mutation -> evaluation -> insert + evict-oldest
    until ``budget`` architectures are in the history. ``evaluate_fn``
    defaults to the real trained objective and exists so tests can inject
    cached or synthetic objectives.
    """
    evaluate_fn = evaluate_fn or Evaluator(oracle)
    state = SearchState(config.population)

    if config.strict:
        _run_strict(config, state, evaluate_fn)
    elif config.workers == 1:
        _run_sequential(config, state, evaluate_fn)
    else:
        _run_free(config, state, evaluate_fn)

    return SearchResult(best=state.best(), history=state.history, config=config)


def _run_sequential(config, state, evaluate_fn):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    for _ in range(config.population):
        code = _draw_code(rng, config)
        state.commit(evaluate_fn(code, 0), evict=False)
    while len(state.history) < config.budget:
        state.gen += 1
        population, seen = state.snapshot()
        parent = tournament_select(population, config.tournament, rng)
        child = mutate(parent.code, seen, rng, positions=config.free_bits)
        state.commit(evaluate_fn(child, state.gen), evict=True)


def _run_free(config, state, evaluate_fn):
    """Free-running asynchronous loop: workers claim budget slots and
    update the shared state as they finish."""
    claim_lock = threading.Lock()
    claimed = 0

    def claim():
        nonlocal claimed
        with claim_lock:
            if claimed >= config.budget:
                return None
            claimed += 1
            return claimed - 1

    def worker():
        while True:
            slot = claim()
            if slot is None:
                return
            rng = _spawned_rng(config.seed, slot)
            if slot < config.population:
                code = _draw_code(rng, config)
                state.commit(evaluate_fn(code, 0), evict=False)
            else:
                population, seen = state.snapshot()
                gen = state.next_gen()
                parent = tournament_select(population, config.tournament, rng)
                child = mutate(parent.code, seen, rng, positions=config.free_bits)
                state.commit(evaluate_fn(child, gen), evict=True)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(worker) for _ in range(config.workers)]
        for fut in futures:
            fut.result()


def _run_strict(config, state, evaluate_fn):
    """Generational barriers: every round selects all children from one
    population snapshot, evaluates them (possibly in parallel) and applies
    the updates in candidate order. The explored-code set is reproducible
    for any worker count."""

    def eval_many(jobs):
        if config.workers == 1 or len(jobs) == 1:
            return [evaluate_fn(code, gen) for code, gen in jobs]
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(lambda j: evaluate_fn(j[0], j[1]), jobs))

    seeds = [_spawned_rng(config.seed, 0, i) for i in range(config.population)]
    jobs = [(_draw_code(r, config), 0) for r in seeds]
    for cand in eval_many(jobs):
        state.commit(cand, evict=False)

    while len(state.history) < config.budget:
        state.gen += 1
        round_size = min(config.population, config.budget - len(state.history))
        population, seen = state.snapshot()
        jobs = []
        for i in range(round_size):
            rng = _spawned_rng(config.seed, state.gen, i)
            parent = tournament_select(population, config.tournament, rng)
            jobs.append((mutate(parent.code, seen, rng, positions=config.free_bits), state.gen))
        for cand in eval_many(jobs):
            state.commit(cand, evict=True)


def random_search(config, oracle, evaluate_fn=None):
    """Uniform i.i.d. codes at the same budget and evaluation."""
    evaluate_fn = evaluate_fn or Evaluator(oracle)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    codes = [_draw_code(rng, config) for _ in range(config.budget)]
    state = SearchState(config.budget)
    if config.workers == 1:
        results = [evaluate_fn(code, 0) for code in codes]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda c: evaluate_fn(c, 0), codes))
    for cand in results:
        state.commit(cand, evict=False)
    return SearchResult(best=state.best(), history=state.history, config=config)
