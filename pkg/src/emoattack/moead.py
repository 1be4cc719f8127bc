"""Constrained MOEA/D engine.

Decomposes a multi-objective problem into Tchebycheff-scalarized
subproblems, evolves one incumbent per subproblem with DE crossover and
polynomial mutation, and replaces neighbors under feasibility-first
rules.  Subproblems are scheduled by utility-driven tournament
selection; an external archive keeps every feasible non-dominated
candidate seen.
"""
from __future__ import annotations

import math
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import ConfigurationError

TOURNAMENT_SIZE = 10
UTILITY_THRESHOLD = 0.001


@dataclass
class RunConfig:
    population_size: int
    generations: int
    neighborhood_size: int = 10
    delta: float = 0.8
    n_r: int = 1
    cr: float = 0.9
    f: float = 0.5
    p_m: float | None = None  # defaults to 1 / genotype length
    eta_m: float = 20.0
    seed: int = 0
    evaluation_budget: int | None = None

    def validate(self, n_objectives: int) -> None:
        if self.population_size <= 0 or self.generations < 0:
            raise ConfigurationError("population_size > 0 and generations >= 0 required")
        if self.neighborhood_size > self.population_size:
            raise ConfigurationError("neighborhood_size must be <= population_size")
        if not (0.0 <= self.delta <= 1.0 and 0.0 <= self.cr <= 1.0):
            raise ConfigurationError("delta and cr must be probabilities")
        if self.p_m is not None and not (0.0 <= self.p_m <= 1.0):
            raise ConfigurationError("p_m must be a probability")
        if self.eta_m <= 0:
            raise ConfigurationError("eta_m must be positive")
        if self.population_size // 5 - n_objectives < 1:
            raise ConfigurationError(
                "population_size too small: floor(N/5) - n_objectives must be >= 1"
            )


@dataclass
class Individual:
    genotype: np.ndarray
    objectives: np.ndarray
    violation: float
    evaluated: bool = True

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


def generate_weights(n_objectives: int, count: int, seed: int) -> np.ndarray:
    """`count` weight vectors on the simplex, unit vectors included."""
    if n_objectives < 2 or count < n_objectives:
        raise ConfigurationError("need count >= n_objectives >= 2")
    if n_objectives == 2:
        t = np.linspace(0.0, 1.0, count)
        return np.column_stack([1.0 - t, t])
    rng = np.random.default_rng(seed)
    if n_objectives == 3:
        h = 1
        while (h + 2) * (h + 3) // 2 <= count:
            h += 1
        pts = [
            (i, j, h - i - j)
            for i in range(h, -1, -1)
            for j in range(h - i, -1, -1)
        ]
        base = np.array(pts, dtype=np.float64) / h
    else:
        base = np.eye(n_objectives)
    rows = [tuple(row) for row in base]
    seen = set(rows)
    while len(rows) < count:
        cand = rng.dirichlet(np.ones(n_objectives))
        key = tuple(cand)
        if key in seen:
            continue
        rows.append(key)
        seen.add(key)
    return np.array(rows[:count], dtype=np.float64)


def tchebycheff(f: np.ndarray, lam: np.ndarray, z: np.ndarray) -> float:
    """Weighted worst-case distance to the reference point."""
    f = np.asarray(f, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not (f.shape == lam.shape == z.shape):
        raise ValueError("objective, weight, and reference lengths must match")
    return float(np.max(lam * np.abs(f - z)))


def update_reference(z: np.ndarray, f: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if z.shape != f.shape:
        raise ValueError("reference and objective lengths must match")
    return np.minimum(z, f)


def neighbor_table(weights: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Index table of the n_neighbors nearest weight vectors (self included)."""
    diff = weights[:, np.newaxis, :] - weights[np.newaxis, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :n_neighbors].astype(np.int64)


def boundary_indices(weights: np.ndarray) -> list[int]:
    """One subproblem per objective: the weight closest to each unit vector."""
    n_obj = weights.shape[1]
    out = []
    for i in range(n_obj):
        unit = np.zeros(n_obj)
        unit[i] = 1.0
        d = np.abs(weights - unit).sum(axis=1)
        out.append(int(np.argmin(d)))
    return out


def select_subproblems(utilities: np.ndarray, boundary: list[int],
                       n_select: int, rng) -> list[int]:
    """Tournament selection of subproblem indices by utility.

    Tie-breaking: the earliest drawn candidate among the maximal
    utilities wins, which keeps the winner distribution uniform when
    all utilities are equal.
    """
    chosen: list[int] = []
    taken = set(boundary)
    n = len(utilities)
    while len(chosen) < n_select:
        cands = rng.integers(0, n, size=TOURNAMENT_SIZE)
        winner = int(cands[np.argmax(utilities[cands])])
        if winner in taken:
            continue
        chosen.append(winner)
        taken.add(winner)
    return chosen


def choose_mating_pool(i: int, neighbors: np.ndarray, n_total: int,
                       delta: float, rng) -> np.ndarray:
    if rng.random() < delta:
        return np.array(neighbors[i], dtype=np.int64)
    return np.arange(n_total, dtype=np.int64)


def de_crossover(x_r1, x_r2, x_r3, cr, f, rng, lower, upper) -> np.ndarray:
    x_r1 = np.asarray(x_r1, dtype=np.float64)
    if x_r1.shape != np.shape(x_r2) or x_r1.shape != np.shape(x_r3):
        raise ValueError("genotype layouts must match")
    mask = rng.random(x_r1.shape[0]) < cr
    y = np.where(mask, x_r1 + f * (np.asarray(x_r2) - np.asarray(x_r3)), x_r1)
    return np.clip(y, lower, upper)


def mutation_delta(u, eta: float):
    """Polynomial-mutation normalized step for uniform u in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    lo = (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0
    hi = 1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0))
    return np.where(u < 0.5, lo, hi)


def polynomial_mutation(y, p_m, eta, rng, lower, upper) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ConfigurationError("polynomial mutation needs finite bounds")
    mask = rng.random(y.shape[0]) < p_m
    u = rng.random(y.shape[0])
    step = mutation_delta(u, eta) * (upper - lower)
    return np.clip(np.where(mask, y + step, y), lower, upper)


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def update_archive(archive: list[Individual], candidate: Individual) -> bool:
    """Insert a feasible candidate, keeping the archive mutually non-dominated."""
    if not candidate.feasible:
        return False
    if archive:
        c = candidate.objectives
        front = np.array([m.objectives for m in archive])
        if bool(np.any((front <= c).all(axis=1) & (front < c).any(axis=1))):
            return False
        beaten = (c <= front).all(axis=1) & (c < front).any(axis=1)
        if beaten.any():
            archive[:] = [m for m, d in zip(archive, beaten) if not d]
    archive.append(candidate)
    return True


def replace_neighbors(candidate: Individual, pool: np.ndarray, n_r: int,
                      z: np.ndarray, weights: np.ndarray,
                      population: list[Individual], rng) -> int:
    """Feasibility-first neighborhood replacement; at most n_r swaps."""
    order = rng.permutation(len(pool))
    count = 0
    for oi in order:
        if count >= n_r:
            break
        k = int(pool[oi])
        incumbent = population[k]
        accept = False
        if candidate.feasible:
            if not incumbent.feasible:
                accept = True
            else:
                accept = tchebycheff(candidate.objectives, weights[k], z) <= \
                    tchebycheff(incumbent.objectives, weights[k], z)
        elif not incumbent.feasible:
            accept = candidate.violation < incumbent.violation
        if accept:
            population[k] = candidate
            count += 1
    return count


@dataclass
class EngineState:
    config: RunConfig
    weights: np.ndarray
    neighbors: np.ndarray
    boundary: list[int]
    utilities: np.ndarray
    population: list[Individual]
    archive: list[Individual]
    z: np.ndarray
    rng: np.random.Generator
    generation: int = 0
    evaluations: int = 0
    stopped_early: bool = False


@dataclass
class MoeadResult:
    population: list[Individual]
    archive: list[Individual]
    reference: np.ndarray
    utilities: np.ndarray
    generations: int
    evaluations: int
    stopped_early: bool

    @property
    def feasible_archive(self) -> list[Individual]:
        return [ind for ind in self.archive if ind.feasible]


def save_checkpoint(state: EngineState, path) -> None:
    Path(path).write_bytes(pickle.dumps(state, protocol=pickle.HIGHEST_PROTOCOL))


def load_checkpoint(path) -> EngineState:
    return pickle.loads(Path(path).read_bytes())


class MoeadEngine:
    """Drives one optimization run of a scenario problem."""

    def __init__(self, config: RunConfig, problem):
        config.validate(problem.n_objectives)
        self.config = config
        self.problem = problem
        self.lower = np.asarray(problem.lower, dtype=np.float64)
        self.upper = np.asarray(problem.upper, dtype=np.float64)
        self.dim = self.lower.shape[0]
        self.p_m = config.p_m if config.p_m is not None else 1.0 / self.dim
        self.queries_per_eval = int(getattr(problem, "queries_per_eval", 1))

    # -- evaluation ----------------------------------------------------

    def _evaluate(self, state: EngineState, genotype: np.ndarray) -> Individual:
        f, vio = self.problem.evaluate(genotype)
        f = np.asarray(f, dtype=np.float64)
        if not np.all(np.isfinite(f)) or not math.isfinite(vio) or vio < 0:
            raise ValueError("problem returned non-finite objectives or violation")
        state.evaluations += self.queries_per_eval
        return Individual(genotype=genotype, objectives=f, violation=float(vio))

    def _budget_left(self, state: EngineState) -> bool:
        budget = self.config.evaluation_budget
        if budget is None:
            return True
        return state.evaluations + self.queries_per_eval <= budget

    # -- initialization (Step 1) ----------------------------------------

    def _initialize(self) -> EngineState:
        cfg = self.config
        n = cfg.population_size
        rng = np.random.default_rng(cfg.seed)
        weights = generate_weights(self.problem.n_objectives, n, cfg.seed)
        neighbors = neighbor_table(weights, cfg.neighborhood_size)
        boundary = boundary_indices(weights)

        if hasattr(self.problem, "initial_population"):
            genos = np.asarray(
                self.problem.initial_population(n - 1, rng), dtype=np.float64
            )
        else:
            genos = rng.uniform(self.lower, self.upper, size=(n - 1, self.dim))
        zero = np.clip(np.zeros(self.dim), self.lower, self.upper)
        genos = np.vstack([genos, zero[np.newaxis, :]])

        state = EngineState(
            config=cfg,
            weights=weights,
            neighbors=neighbors,
            boundary=boundary,
            utilities=np.ones(n),
            population=[],
            archive=[],
            z=np.full(self.problem.n_objectives, np.inf),
            rng=rng,
        )
        for row in genos:
            ind = self._evaluate(state, row.copy())
            state.population.append(ind)
            state.z = update_reference(state.z, ind.objectives)
            update_archive(state.archive, ind)
        return state

    # -- one generation (Steps 2-3) -------------------------------------

    def _run_generation(self, state: EngineState) -> None:
        cfg = self.config
        n = cfg.population_size
        n_select = n // 5 - self.problem.n_objectives
        start_f = np.array([ind.objectives for ind in state.population])

        selected = select_subproblems(
            state.utilities, state.boundary, n_select, state.rng
        )
        processed = list(state.boundary) + selected
        for i in processed:
            if not self._budget_left(state):
                state.stopped_early = True
                break
            pool = choose_mating_pool(
                i, state.neighbors, n, cfg.delta, state.rng
            )
            others = pool[pool != i]
            if others.shape[0] < 2:
                others = np.setdiff1d(np.arange(n), [i])
            picks = state.rng.choice(others.shape[0], size=2, replace=False)
            r2, r3 = int(others[picks[0]]), int(others[picks[1]])
            trial = de_crossover(
                state.population[i].genotype,
                state.population[r2].genotype,
                state.population[r3].genotype,
                cfg.cr, cfg.f, state.rng, self.lower, self.upper,
            )
            trial = polynomial_mutation(
                trial, self.p_m, cfg.eta_m, state.rng, self.lower, self.upper
            )
            candidate = self._evaluate(state, trial)
            state.z = update_reference(state.z, candidate.objectives)
            update_archive(state.archive, candidate)
            replace_neighbors(
                candidate, pool, cfg.n_r, state.z, state.weights,
                state.population, state.rng,
            )

        # utility update from relative scalarized improvement
        for i in processed:
            old = tchebycheff(start_f[i], state.weights[i], state.z)
            new = tchebycheff(
                state.population[i].objectives, state.weights[i], state.z
            )
            ratio = max(0.0, (old - new) / old) if old > 0 else 0.0
            if ratio > UTILITY_THRESHOLD:
                state.utilities[i] = 1.0
            else:
                state.utilities[i] *= 0.95 + 0.05 * ratio / UTILITY_THRESHOLD

    # -- full run --------------------------------------------------------

    def run(self, resume_state: EngineState | None = None,
            checkpoint_path=None, checkpoint_every: int = 1) -> MoeadResult:
        state = resume_state if resume_state is not None else self._initialize()
        boundary_blob = None
        if checkpoint_path is not None:
            boundary_blob = pickle.dumps(state, protocol=pickle.HIGHEST_PROTOCOL)
        try:
            while state.generation < self.config.generations and not state.stopped_early:
                self._run_generation(state)
                state.generation += 1
                if checkpoint_path is not None:
                    boundary_blob = pickle.dumps(
                        state, protocol=pickle.HIGHEST_PROTOCOL
                    )
                    if state.generation % checkpoint_every == 0:
                        Path(checkpoint_path).write_bytes(boundary_blob)
        except Exception:
            # preserve the last completed-generation state for resume
            if checkpoint_path is not None and boundary_blob is not None:
                Path(checkpoint_path).write_bytes(boundary_blob)
            raise
        if checkpoint_path is not None:
            Path(checkpoint_path).write_bytes(boundary_blob)
        return MoeadResult(
            population=state.population,
            archive=state.archive,
            reference=state.z,
            utilities=state.utilities,
            generations=state.generation,
            evaluations=state.evaluations,
            stopped_early=state.stopped_early,
        )
