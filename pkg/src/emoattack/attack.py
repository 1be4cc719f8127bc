"""Top-level attack estimator.

EvolutionaryAttack wraps encoding + scenario + engine behind a
scikit-learn style interface: configure in the constructor, fit on a
clean image, then read the archive / front attributes or transform the
image into its best adversarial example.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .encoding import ConfigurationError, DctEncoding, DirectEncoding
from .imaging import Image, apply_perturbation
from .moead import MoeadEngine, RunConfig
from .scenarios import AttackProblem


def _as_image(image) -> Image:
    if isinstance(image, Image):
        return image
    return Image(np.asarray(image))


class EvolutionaryAttack(BaseEstimator):
    """Black-box adversarial example search as a fit/transform estimator.

    Parameters mirror the run configuration: the scenario block
    (scenario, norm_order, correct_labels, constraints, angles), the
    encoding block (encoding, block_size, bounds, luma, n_patterns,
    dct_block, coeff_bound), and the optimizer block.
    """

    def __init__(self, oracle=None, scenario="accuracy_vs_amount",
                 encoding="direct", norm_order=2, correct_labels=None,
                 constraints=None, angles=None, l1_normalized=True,
                 block_size=1, bounds=(-200.0, 200.0), luma=False,
                 n_patterns=5, dct_block=8, coeff_bound=30.0,
                 init="uniform", population_size=100, generations=200,
                 neighborhood_size=10, delta=0.8, n_r=1, cr=0.9, f=0.5,
                 p_m=None, eta_m=20.0, evaluation_budget=None, seed=0):
        self.oracle = oracle
        self.scenario = scenario
        self.encoding = encoding
        self.norm_order = norm_order
        self.correct_labels = correct_labels
        self.constraints = constraints
        self.angles = angles
        self.l1_normalized = l1_normalized
        self.block_size = block_size
        self.bounds = bounds
        self.luma = luma
        self.n_patterns = n_patterns
        self.dct_block = dct_block
        self.coeff_bound = coeff_bound
        self.init = init
        self.population_size = population_size
        self.generations = generations
        self.neighborhood_size = neighborhood_size
        self.delta = delta
        self.n_r = n_r
        self.cr = cr
        self.f = f
        self.p_m = p_m
        self.eta_m = eta_m
        self.evaluation_budget = evaluation_budget
        self.seed = seed

    def _build_encoding(self, image: Image):
        if self.encoding == "direct":
            return DirectEncoding(
                width=image.width, height=image.height,
                channels=1 if self.luma else image.channels,
                block_size=self.block_size, bounds=self.bounds,
                image_channels=image.channels,
            )
        if self.encoding == "dct":
            return DctEncoding(
                width=image.width, height=image.height,
                n_patterns=self.n_patterns, dct_block=self.dct_block,
                coeff_bound=self.coeff_bound,
                image_channels=image.channels,
            )
        raise ConfigurationError(f"unknown encoding {self.encoding!r}")

    def _resolve_labels(self, image: Image) -> list[str]:
        if self.correct_labels:
            return list(self.correct_labels)
        return [self.oracle.classify(image).top1()[0]]

    def build_problem(self, image) -> AttackProblem:
        if self.oracle is None:
            raise ConfigurationError("an oracle is required")
        image = _as_image(image)
        return AttackProblem(
            kind=self.scenario,
            encoding=self._build_encoding(image),
            clean=image,
            oracle=self.oracle,
            correct_labels=self._resolve_labels(image),
            norm_order=self.norm_order,
            constraints=self.constraints,
            angles=self.angles,
            init=self.init,
            l1_normalized=self.l1_normalized,
        )

    def run_config(self) -> RunConfig:
        return RunConfig(
            population_size=self.population_size,
            generations=self.generations,
            neighborhood_size=self.neighborhood_size,
            delta=self.delta, n_r=self.n_r, cr=self.cr, f=self.f,
            p_m=self.p_m, eta_m=self.eta_m, seed=self.seed,
            evaluation_budget=self.evaluation_budget,
        )

    def fit(self, image, y=None, checkpoint_path=None, checkpoint_every=1):
        """Run the attack against the clean image; returns self."""
        problem = self.build_problem(image)
        engine = MoeadEngine(self.run_config(), problem)
        result = engine.run(
            checkpoint_path=checkpoint_path, checkpoint_every=checkpoint_every
        )
        self.problem_ = problem
        self.result_ = result
        self.archive_ = result.archive
        self.population_ = result.population
        self.reference_ = result.reference
        self.front_ = np.array([ind.objectives for ind in result.archive])
        self.evaluations_ = result.evaluations
        return self

    def best_(self):
        """Feasible archive member with the lowest first objective."""
        feasible = [ind for ind in self.archive_ if ind.feasible]
        if not feasible:
            return None
        return min(feasible, key=lambda ind: tuple(ind.objectives))

    def transform(self, image) -> Image:
        """Apply the best found perturbation to the given image."""
        best = self.best_()
        if best is None:
            raise RuntimeError("no feasible adversarial example was found")
        image = _as_image(image)
        rho = self.problem_.encoding.decode(best.genotype, image)
        return apply_perturbation(image, rho)
