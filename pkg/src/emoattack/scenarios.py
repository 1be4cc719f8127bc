"""Multi-objective attack problem formulations.

Three scenarios are supported:

* accuracy_vs_amount -- minimize correct-class confidence and the
  perturbation norm;
* l0_vs_l1 -- minimize perturbed-pixel count and mean absolute delta
  subject to a confidence-threshold constraint;
* robust -- minimize mean and standard deviation of correct-class
  confidence over a rotation ensemble, plus the perturbation norm.
"""
from __future__ import annotations

import math

import numpy as np

from .encoding import ConfigurationError
from .imaging import Image, apply_perturbation, rotate

STRICT_EPS = 1e-12

DEFAULT_T_ACC = 0.2
DEFAULT_ANGLES = tuple(range(-60, 61, 15))

# eight-group stratified initialization: fraction of variables allowed
# to be nonzero, maximum magnitude, and minimum magnitude per group
STRATIFIED_GROUPS = (
    (0.005, 200.0, 150.0),
    (0.05, 200.0, 100.0),
    (0.20, 100.0, 0.0),
    (0.35, 50.0, 0.0),
    (0.50, 33.0, 0.0),
    (0.65, 25.0, 0.0),
    (0.80, 20.0, 0.0),
    (0.95, 16.0, 0.0),
)

SCENARIO_KINDS = ("accuracy_vs_amount", "l0_vs_l1", "robust")


def perturbation_norm(rho: np.ndarray, order, normalized: bool = True) -> float:
    """Perturbation magnitude under the given norm order.

    order 0 counts pixels with any nonzero channel delta; order 1 is
    the mean absolute delta per pixel-channel (raw sum when
    normalized=False); order 2 is the RMS delta; inf is the max
    absolute delta.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if order == 0:
        if rho.ndim == 3:
            return float(np.count_nonzero(np.any(rho != 0.0, axis=2)))
        return float(np.count_nonzero(rho))
    if order == 1:
        total = float(np.abs(rho).sum())
        return total / rho.size if normalized else total
    if order == 2:
        return float(np.sqrt(np.mean(rho * rho)))
    if order == math.inf or order == "inf":
        return float(np.abs(rho).max()) if rho.size else 0.0
    raise ValueError(f"unsupported norm order {order!r}")


class Constraint:
    """A <= / < bound on an evaluation metric."""

    METRICS = ("correct_confidence", "expected_correct_confidence", "norm")

    def __init__(self, metric, comparator, threshold):
        if metric not in self.METRICS:
            raise ConfigurationError(f"unknown constraint metric {metric!r}")
        if comparator not in ("<=", "<"):
            raise ConfigurationError(f"unsupported comparator {comparator!r}")
        if not math.isfinite(threshold):
            raise ConfigurationError("constraint threshold must be finite")
        self.metric = metric
        self.comparator = comparator
        self.threshold = float(threshold)

    @property
    def effective_threshold(self) -> float:
        # strict '<' is realized as '<= threshold - eps'
        if self.comparator == "<":
            return self.threshold - STRICT_EPS
        return self.threshold

    def excess(self, value: float) -> float:
        return max(0.0, value - self.effective_threshold)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "comparator": self.comparator,
            "threshold": self.threshold,
        }


def default_constraints(kind: str) -> list[Constraint]:
    if kind == "l0_vs_l1":
        return [Constraint("correct_confidence", "<", DEFAULT_T_ACC)]
    if kind == "robust":
        return [
            Constraint("correct_confidence", "<", 0.1),
            Constraint("expected_correct_confidence", "<", 0.5),
        ]
    return []


def stratified_population(count, length, rng, lower, upper):
    """Eight-group sparse initial genotypes for the direct encoding."""
    if count < len(STRATIFIED_GROUPS):
        raise ConfigurationError(
            f"stratified init needs >= {len(STRATIFIED_GROUPS)} individuals"
        )
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    sizes = [count // 8 + (1 if g < count % 8 else 0) for g in range(8)]
    pop = np.zeros((count, length))
    row = 0
    for (frac, max_mag, min_mag), size in zip(STRATIFIED_GROUPS, sizes):
        cap = max(1, math.ceil(frac * length))
        for _ in range(size):
            k = int(rng.integers(1, cap + 1))
            idx = rng.choice(length, size=k, replace=False)
            mags = rng.uniform(min_mag, max_mag, size=k)
            signs = rng.choice([-1.0, 1.0], size=k)
            pop[row, idx] = mags * signs
            row += 1
    return np.clip(pop, lower, upper)


class AttackProblem:
    """Adapts a scenario + encoding + oracle to the engine's contract."""

    def __init__(self, kind, encoding, clean: Image, oracle, correct_labels,
                 norm_order=2, constraints=None, angles=None,
                 init="uniform", l1_normalized=True):
        if kind not in SCENARIO_KINDS:
            raise ConfigurationError(f"unknown scenario kind {kind!r}")
        if not correct_labels:
            raise ConfigurationError("correct_labels must be non-empty")
        if init not in ("uniform", "stratified"):
            raise ConfigurationError(f"unknown init kind {init!r}")
        if init == "stratified" and encoding.kind != "direct":
            raise ConfigurationError("stratified init requires the direct encoding")
        self.kind = kind
        self.encoding = encoding
        self.clean = clean
        self.oracle = oracle
        self.correct_labels = list(correct_labels)
        self.norm_order = norm_order
        self.constraints = (
            default_constraints(kind) if constraints is None else list(constraints)
        )
        self.init = init
        self.l1_normalized = l1_normalized
        if kind == "robust":
            self.angles = list(DEFAULT_ANGLES if angles is None else angles)
            if not self.angles:
                raise ConfigurationError("robust scenario needs a rotation set")
        else:
            self.angles = []

    @property
    def n_objectives(self) -> int:
        return 3 if self.kind == "robust" else 2

    @property
    def lower(self) -> np.ndarray:
        return self.encoding.lower

    @property
    def upper(self) -> np.ndarray:
        return self.encoding.upper

    @property
    def genotype_length(self) -> int:
        return self.encoding.length

    @property
    def queries_per_eval(self) -> int:
        if self.kind != "robust":
            return 1
        return len(self.angles) + (0 if 0 in self.angles else 1)

    @property
    def queries_used(self) -> int:
        return self.oracle.stats.queries

    def objective_names(self) -> list[str]:
        if self.kind == "accuracy_vs_amount":
            return ["correct_confidence", f"l{self.norm_order}_norm"]
        if self.kind == "l0_vs_l1":
            return ["l0_norm", "l1_norm"]
        return ["mean_confidence", "std_confidence", f"l{self.norm_order}_norm"]

    def correct_confidence(self, result) -> float:
        return sum(result.confidence(label) for label in self.correct_labels)

    def decode(self, genotype: np.ndarray) -> np.ndarray:
        return self.encoding.decode(genotype, self.clean)

    def perturbed(self, genotype: np.ndarray) -> Image:
        return apply_perturbation(self.clean, self.decode(genotype))

    def _norm(self, rho, order):
        return perturbation_norm(rho, order, normalized=self.l1_normalized)

    def evaluate(self, genotype: np.ndarray):
        rho = self.decode(genotype)
        ae = apply_perturbation(self.clean, rho)
        metrics = {"norm": self._norm(rho, self.norm_order)}
        if self.kind == "robust":
            images = [rotate(ae, a) for a in self.angles]
            results = self.oracle.classify_batch(images)
            confs = np.array([self.correct_confidence(r) for r in results])
            if 0 in self.angles:
                unrotated = float(confs[self.angles.index(0)])
            else:
                unrotated = self.correct_confidence(self.oracle.classify(ae))
            metrics["correct_confidence"] = unrotated
            metrics["expected_correct_confidence"] = float(confs.mean())
            f = np.array([confs.mean(), confs.std(), metrics["norm"]])
        else:
            conf = self.correct_confidence(self.oracle.classify(ae))
            metrics["correct_confidence"] = conf
            if self.kind == "accuracy_vs_amount":
                f = np.array([conf, metrics["norm"]])
            else:
                f = np.array([
                    self._norm(rho, 0),
                    self._norm(rho, 1),
                ])
        vio = sum(c.excess(metrics[c.metric]) for c in self.constraints)
        return f, float(vio)

    def initial_population(self, count, rng):
        if self.init == "stratified":
            return stratified_population(
                count, self.genotype_length, rng, self.lower, self.upper
            )
        return rng.uniform(
            self.lower, self.upper, size=(count, self.genotype_length)
        )
