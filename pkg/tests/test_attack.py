import numpy as np
import pytest
from sklearn.base import clone

from emoattack.attack import EvolutionaryAttack
from emoattack.encoding import ConfigurationError
from emoattack.imaging import apply_perturbation
from emoattack.moead import load_checkpoint


def small_attack(oracle, **overrides):
    kwargs = dict(oracle=oracle, bounds=(-64.0, 64.0), population_size=16,
                  generations=3, seed=0, correct_labels=["frog"])
    kwargs.update(overrides)
    return EvolutionaryAttack(**kwargs)


class TestEstimatorContract:
    def test_get_params_exposes_configuration(self, oracle):
        attack = small_attack(oracle)
        params = attack.get_params()
        assert params["population_size"] == 16
        assert params["scenario"] == "accuracy_vs_amount"
        assert params["bounds"] == (-64.0, 64.0)

    def test_set_params_round_trip(self, oracle):
        attack = small_attack(oracle)
        attack.set_params(generations=7, cr=0.5)
        assert attack.generations == 7
        assert attack.cr == 0.5

    def test_clone_preserves_configuration(self, oracle):
        attack = small_attack(oracle, n_patterns=3)
        dup = clone(attack)
        a, b = attack.get_params(), dup.get_params()
        # the oracle itself is deep-copied, so compare it by type only
        assert type(a.pop("oracle")) is type(b.pop("oracle"))
        assert a == b

    def test_missing_oracle_rejected(self, clean_image):
        with pytest.raises(ConfigurationError):
            EvolutionaryAttack().build_problem(clean_image)

    def test_unknown_encoding_rejected(self, oracle, clean_image):
        with pytest.raises(ConfigurationError):
            small_attack(oracle, encoding="wavelet").build_problem(clean_image)


class TestFit:
    def test_fit_exposes_run_attributes(self, oracle, clean_image):
        attack = small_attack(oracle).fit(clean_image)
        assert attack.front_.shape[1] == 2
        assert len(attack.archive_) == attack.front_.shape[0]
        assert len(attack.population_) == 16
        assert attack.evaluations_ > 0
        assert attack.reference_.shape == (2,)

    def test_default_labels_resolve_to_clean_top1(self, oracle, clean_image):
        attack = EvolutionaryAttack(oracle=oracle, population_size=16,
                                    generations=0, seed=0)
        attack.fit(clean_image)
        assert attack.problem_.correct_labels == ["frog"]

    def test_transform_applies_best_feasible_member(self, oracle, clean_image):
        attack = small_attack(oracle).fit(clean_image)
        best = attack.best_()
        assert best is not None
        out = attack.transform(clean_image)
        rho = attack.problem_.encoding.decode(best.genotype, clean_image)
        expected = apply_perturbation(clean_image, rho)
        assert np.array_equal(out.data, expected.data)

    def test_transform_without_feasible_member_raises(self, oracle,
                                                      clean_image):
        from emoattack.scenarios import Constraint

        attack = small_attack(
            oracle, generations=0,
            constraints=[Constraint("norm", "<", -1.0)],
        ).fit(clean_image)
        assert attack.best_() is None
        with pytest.raises(RuntimeError):
            attack.transform(clean_image)

    def test_checkpoint_file_written_during_fit(self, oracle, clean_image,
                                                tmp_path):
        path = tmp_path / "attack.ckpt"
        small_attack(oracle).fit(clean_image, checkpoint_path=path)
        state = load_checkpoint(path)
        assert state.generation == 3

    def test_robust_scenario_produces_three_objectives(self, oracle,
                                                       clean_image):
        attack = small_attack(oracle, scenario="robust", generations=1,
                              population_size=20)
        attack.fit(clean_image)
        assert attack.problem_.n_objectives == 3
        assert attack.reference_.shape == (3,)
        for ind in attack.population_:
            assert ind.objectives.shape == (3,)

    def test_dct_encoding_genotype_length(self, oracle, clean_image):
        attack = small_attack(oracle, encoding="dct", n_patterns=2,
                              generations=0)
        attack.fit(clean_image)
        assert attack.problem_.genotype_length == 4 + 2 * 64
