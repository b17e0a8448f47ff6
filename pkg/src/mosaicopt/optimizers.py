"""Solvers for the constrained tile-assignment problem.

``cep_solve`` is the cluster-guided evolutionary search: blocks are picked by
fitness-proportional roulette, and the proposed replacement tile is drawn
inside or outside the incumbent tile's histogram cluster with a probability
that adapts to whether the block is doing better or worse than average.
``rii_solve`` is the plain randomized-improvement baseline, ``greedy_solve``
a row-major best-fit pass, and ``exhaustive_oracle`` an exact reference for
tiny instances.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel
from .problem import Assignment, MosaicProblem

# A run aborts if this many proposal iterations pass without exhausting the
# evaluation budget (every iteration rejected by the usage cap costs nothing).
_SAFETY_ITERATIONS_PER_EVALUATION = 100


@dataclass
class CepParams:
    """Knobs for the budgeted solvers.

    ``alpha`` is the probability of mutating within the incumbent's cluster
    when the block is fitter than average (and of leaving the cluster when it
    is not). ``max_evaluations`` caps the number of block/tile MAE
    computations, including the ones spent on initialization.
    """

    alpha: float = 0.75
    max_evaluations: int = 1_600_000
    seed: int = 0
    log_stride: int = 1000

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_evaluations < 0:
            raise ValueError("max_evaluations must be non-negative")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")


@dataclass
class ConvergenceLog:
    """(evaluations, overall fitness, wall ms) samples along one run."""

    stride: int = 1000
    samples: list[tuple[int, float, int]] = field(default_factory=list)

    def record(self, evaluations: int, fitness: float, wall_ms: int) -> None:
        if self.samples and self.samples[-1][0] == evaluations:
            self.samples[-1] = (evaluations, fitness, wall_ms)
        else:
            self.samples.append((evaluations, fitness, wall_ms))

    @property
    def final_fitness(self) -> float:
        return self.samples[-1][1]

    @property
    def final_evaluations(self) -> int:
        return self.samples[-1][0]


@dataclass
class SolveResult:
    assignment: Assignment
    log: ConvergenceLog
    evaluations_used: int
    wall_time: float


def mutation_threshold(block_fitness: float, mean_fitness: float, alpha: float) -> float:
    """Probability that the proposal is drawn inside the incumbent's cluster."""
    return alpha if block_fitness < mean_fitness else 1.0 - alpha


def initialize_assignment(problem: MosaicProblem, rng: random.Random) -> Assignment:
    """Random starting assignment; costs one evaluation per block.

    Draws distinct tile ids when there are at least as many tiles as blocks;
    otherwise falls back to shuffled round-robin ids, which keeps every usage
    count within the reuse cap.
    """
    n_tiles, n_blocks = problem.n_tiles, problem.n_blocks
    if n_tiles * problem.n_redu < n_blocks:
        raise ValueError("infeasible problem: n_tiles * n_redu < n_blocks")
    if n_tiles >= n_blocks:
        ids = rng.sample(range(n_tiles), n_blocks)
    else:
        repeats = -(-n_blocks // n_tiles)
        ids = (list(range(n_tiles)) * repeats)[:n_blocks]
        rng.shuffle(ids)
    mae = problem.block_tile_mae
    fitness = [mae(block, tile) for block, tile in enumerate(ids)]
    return Assignment(problem, ids, fitness)


def _cluster_tables(model: ClusterModel):
    """Per-tile cluster ids plus, per cluster, member and complement id lists."""
    cluster_ids = [int(c) for c in model.assignment]
    members = [[int(t) for t in mem] for mem in model.members]
    position = [0] * len(cluster_ids)
    for mem in members:
        for pos, tile_id in enumerate(mem):
            position[tile_id] = pos
    all_ids = np.arange(len(cluster_ids))
    complements = [
        [int(t) for t in all_ids[model.assignment != c]]
        for c in range(len(members))
    ]
    return cluster_ids, members, position, complements


def _propose_tile(rand, incumbent, cluster_id, members, position, complements, within):
    """Draw a replacement tile id, or None when no candidate exists.

    Within-cluster draws are uniform over the incumbent's cluster excluding
    the incumbent itself; a singleton cluster falls back to an out-of-cluster
    draw (and vice versa when one cluster holds every tile).
    """
    if within:
        mem = members[cluster_id]
        last = len(mem) - 1
        if last > 0:
            j = int(rand() * last)
            if j >= last:
                j = last - 1
            if j >= position[incumbent]:
                j += 1
            return mem[j]
    pool = complements[cluster_id]
    if pool:
        j = int(rand() * len(pool))
        if j >= len(pool):
            j = len(pool) - 1
        return pool[j]
    # the cluster spans the whole database: retry inside it
    mem = members[cluster_id]
    last = len(mem) - 1
    if last > 0:
        j = int(rand() * last)
        if j >= last:
            j = last - 1
        if j >= position[incumbent]:
            j += 1
        return mem[j]
    return None


def cep_solve(problem: MosaicProblem, cluster_model: ClusterModel,
              params: CepParams, rng: random.Random | None = None) -> SolveResult:
    """Cluster-guided evolutionary search under the tile-reuse cap.

    Per iteration: sample a block g proportionally to its fitness; draw the
    replacement tile within the incumbent's cluster with probability alpha if
    the block beats the mean fitness (1 - alpha otherwise), else outside it;
    if the tile is below its usage cap, spend one evaluation on its MAE and
    accept only strict improvements. Stops when the evaluation budget is
    spent or the mosaic is exact.
    """
    if len(cluster_model.assignment) != problem.n_tiles:
        raise ValueError("cluster model does not cover the tile database")
    if rng is None:
        rng = random.Random(params.seed)
    start = time.perf_counter()
    assignment = initialize_assignment(problem, rng)
    evaluations = problem.n_blocks
    log = ConvergenceLog(stride=params.log_stride)
    log.record(evaluations, assignment.overall_fitness, 0)

    cluster_ids, members, position, complements = _cluster_tables(cluster_model)
    x = assignment.x
    usage = assignment.usage
    fitness = assignment.per_block_fitness
    mae = problem.block_tile_mae
    sample_block = assignment.sample_block
    apply_mutation = assignment.apply_mutation
    rand = rng.random
    cap = problem.n_redu
    alpha = params.alpha
    inv_blocks = 1.0 / problem.n_blocks
    max_evaluations = params.max_evaluations
    iteration_cap = _SAFETY_ITERATIONS_PER_EVALUATION * max(1, max_evaluations)
    next_log = evaluations + params.log_stride
    iterations = 0

    while evaluations < max_evaluations:
        if assignment.fitness_sum <= 0.0:
            break
        iterations += 1
        if iterations > iteration_cap:
            raise RuntimeError(
                f"no evaluations possible after {iterations - 1} iterations; "
                "every proposal hits the usage cap"
            )
        g = sample_block(rng)
        block_fitness = fitness[g]
        threshold = alpha if block_fitness < assignment.fitness_sum * inv_blocks else 1.0 - alpha
        incumbent = x[g]
        k = _propose_tile(
            rand, incumbent, cluster_ids[incumbent],
            members, position, complements, rand() < threshold,
        )
        if k is None or usage[k] >= cap:
            continue
        value = mae(g, k)
        evaluations += 1
        if value < block_fitness:
            apply_mutation(g, k, value)
            log.record(
                evaluations,
                assignment.overall_fitness,
                int((time.perf_counter() - start) * 1000),
            )
        if evaluations >= next_log:
            log.record(
                evaluations,
                assignment.overall_fitness,
                int((time.perf_counter() - start) * 1000),
            )
            next_log = evaluations + params.log_stride

    wall = time.perf_counter() - start
    log.record(evaluations, assignment.overall_fitness, int(wall * 1000))
    return SolveResult(assignment, log, evaluations, wall)


def rii_solve(problem: MosaicProblem, params: CepParams,
              rng: random.Random | None = None) -> SolveResult:
    """Randomized iterative improvement: uniform block, uniform tile, accept
    strict improvements that respect the usage cap."""
    if rng is None:
        rng = random.Random(params.seed)
    start = time.perf_counter()
    assignment = initialize_assignment(problem, rng)
    evaluations = problem.n_blocks
    log = ConvergenceLog(stride=params.log_stride)
    log.record(evaluations, assignment.overall_fitness, 0)

    x = assignment.x
    usage = assignment.usage
    fitness = assignment.per_block_fitness
    mae = problem.block_tile_mae
    apply_mutation = assignment.apply_mutation
    rand = rng.random
    cap = problem.n_redu
    n_blocks = problem.n_blocks
    n_tiles = problem.n_tiles
    inv_blocks = 1.0 / n_blocks
    max_evaluations = params.max_evaluations
    iteration_cap = _SAFETY_ITERATIONS_PER_EVALUATION * max(1, max_evaluations)
    next_log = evaluations + params.log_stride
    iterations = 0

    while evaluations < max_evaluations:
        if assignment.fitness_sum <= 0.0:
            break
        iterations += 1
        if iterations > iteration_cap:
            raise RuntimeError(
                f"no evaluations possible after {iterations - 1} iterations; "
                "every proposal hits the usage cap"
            )
        g = int(rand() * n_blocks)
        if g >= n_blocks:
            g = n_blocks - 1
        k = int(rand() * n_tiles)
        if k >= n_tiles:
            k = n_tiles - 1
        if usage[k] >= cap:
            continue
        block_fitness = fitness[g]
        value = mae(g, k)
        evaluations += 1
        if value < block_fitness:
            apply_mutation(g, k, value)
            log.record(
                evaluations,
                assignment.overall_fitness,
                int((time.perf_counter() - start) * 1000),
            )
        if evaluations >= next_log:
            log.record(
                evaluations,
                assignment.overall_fitness,
                int((time.perf_counter() - start) * 1000),
            )
            next_log = evaluations + params.log_stride

    wall = time.perf_counter() - start
    log.record(evaluations, assignment.overall_fitness, int(wall * 1000))
    return SolveResult(assignment, log, evaluations, wall)


def greedy_solve(problem: MosaicProblem) -> SolveResult:
    """Row-major best-fit pass: each block takes its minimum-MAE tile among
    tiles still below the usage cap (lowest id on ties). Deterministic;
    always costs n_blocks * n_tiles evaluations."""
    start = time.perf_counter()
    usage = np.zeros(problem.n_tiles, dtype=np.int64)
    cap = problem.n_redu
    x = []
    fitness = []
    for block in range(problem.n_blocks):
        row = problem.block_tile_mae_row(block)
        candidates = np.where(usage < cap, row, np.inf)
        k = int(np.argmin(candidates))
        x.append(k)
        fitness.append(float(row[k]))
        usage[k] += 1
    evaluations = problem.n_blocks * problem.n_tiles
    assignment = Assignment(problem, x, fitness)
    wall = time.perf_counter() - start
    log = ConvergenceLog()
    log.record(evaluations, assignment.overall_fitness, int(wall * 1000))
    return SolveResult(assignment, log, evaluations, wall)


def exhaustive_oracle(problem: MosaicProblem) -> Assignment:
    """Exact optimum for tiny instances by depth-first enumeration.

    Walks every cap-respecting assignment in lexicographic order (with a
    sum-of-row-minima bound to prune hopeless branches, which cannot change
    the result) and keeps the first assignment achieving the minimum, so ties
    break toward the lexicographically smallest vector. Guarded to at most
    9 blocks and 12 tiles.
    """
    n_blocks, n_tiles = problem.n_blocks, problem.n_tiles
    if n_blocks > 9 or n_tiles > 12:
        raise ValueError(
            f"exhaustive oracle is limited to 9 blocks and 12 tiles, "
            f"got {n_blocks} and {n_tiles}"
        )
    mae = problem.block_tile_mae
    costs = [[mae(block, tile) for tile in range(n_tiles)] for block in range(n_blocks)]
    suffix_min = [0.0] * (n_blocks + 1)
    for block in range(n_blocks - 1, -1, -1):
        suffix_min[block] = suffix_min[block + 1] + min(costs[block])

    cap = problem.n_redu
    usage = [0] * n_tiles
    current = [0] * n_blocks
    best_cost = float("inf")
    best_x = None

    def descend(block: int, partial: float) -> None:
        nonlocal best_cost, best_x
        if block == n_blocks:
            best_cost = partial
            best_x = current.copy()
            return
        row = costs[block]
        bound = suffix_min[block + 1]
        for tile in range(n_tiles):
            if usage[tile] >= cap:
                continue
            cost = partial + row[tile]
            if cost + bound >= best_cost:
                continue
            usage[tile] += 1
            current[block] = tile
            descend(block + 1, cost)
            usage[tile] -= 1

    descend(0, 0.0)
    assert best_x is not None  # feasibility is checked at problem construction
    return Assignment(problem, best_x, [costs[b][best_x[b]] for b in range(n_blocks)])
