"""Black-box adversarial example generation via decomposition-based
evolutionary multi-objective optimization."""

from .attack import EvolutionaryAttack
from .encoding import ConfigurationError, DctEncoding, DirectEncoding, dct_dims
from .imaging import Image, apply_perturbation, read_image, rotate, write_image
from .moead import Individual, MoeadEngine, MoeadResult, RunConfig
from .oracle import (
    BuiltinOracle,
    ClassificationResult,
    RemoteOracle,
    load_builtin,
)
from .scenarios import AttackProblem, Constraint, perturbation_norm

__all__ = [
    "AttackProblem",
    "BuiltinOracle",
    "ClassificationResult",
    "ConfigurationError",
    "Constraint",
    "DctEncoding",
    "DirectEncoding",
    "EvolutionaryAttack",
    "Image",
    "Individual",
    "MoeadEngine",
    "MoeadResult",
    "RemoteOracle",
    "RunConfig",
    "apply_perturbation",
    "dct_dims",
    "load_builtin",
    "perturbation_norm",
    "read_image",
    "rotate",
    "write_image",
]

__version__ = "0.1.0"
