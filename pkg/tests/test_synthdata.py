import numpy as np

from bnft import ConfigurationError, InputError
from bnft.synthdata import SynthConfig, generate_cohort, community_strength, ThresholdOracle
from tests import BNFTestCase


def welch_t(first, second):
    first, second = np.asarray(first), np.asarray(second)
    spread = np.sqrt(first.var(ddof=1) / len(first) + second.var(ddof=1) / len(second))
    return (first.mean() - second.mean()) / spread


class TestSynthConfig(BNFTestCase):
    def test_validation(self):
        self.assertRaises(ConfigurationError, SynthConfig, regions=10, n_communities=4)
        self.assertRaises(ConfigurationError, SynthConfig, inter_class_shift=1.5)
        self.assertRaises(ConfigurationError, SynthConfig, noise_std=0.0)
        self.assertRaises(ConfigurationError, SynthConfig, labels=["NC", "NC"])
        self.assertRaises(ConfigurationError, SynthConfig, perturbed_community=4)

    def test_from_settings(self):
        config = SynthConfig.from_settings({"regions": 8, "communities": 2, "n-per-class": 3,
                                            "labels": ["NC", "MCI", "AD"]})
        self.assertEqual(8, config.regions)
        self.assertEqual([0, 1, 2, 3], list(config.community_members(0)))
        self.assertEqual(config.to_dict(), SynthConfig.from_settings(config.to_dict()).to_dict())

    def test_class_scales(self):
        config = SynthConfig(labels=["NC", "MCI", "AD"], inter_class_shift=0.8)
        self.assertAlmostEqual(1.0, config.class_scale(0))
        self.assertAlmostEqual(0.6, config.class_scale(1))
        self.assertAlmostEqual(0.2, config.class_scale(2))


class TestGenerate(BNFTestCase):
    def test_deterministic(self):
        config = SynthConfig(regions=8, timepoints=30, n_per_class=3, seed=5)
        first, second = generate_cohort(config), generate_cohort(config)
        for one, two in zip(first, second):
            self.assertEqual(one.subject_id, two.subject_id)
            np.testing.assert_array_equal(one.signal, two.signal)
        other = generate_cohort(SynthConfig(regions=8, timepoints=30, n_per_class=3, seed=6))
        self.assertFalse(np.array_equal(first[0].signal, other[0].signal))

    def test_layout(self):
        cohort = generate_cohort(SynthConfig(regions=12, timepoints=50, n_per_class=4, n_communities=3))
        self.assertEqual(8, len(cohort))
        self.assertEqual(["NC"] * 4 + ["AD"] * 4, cohort.labels())
        self.assertEqual((12, 50), cohort[0].signal.shape)

    def test_perturbed_block_separates(self):
        config = SynthConfig(n_per_class=30, inter_class_shift=0.9, noise_std=0.1, seed=2)
        matrices = generate_cohort(config).connectomes()
        controls = [community_strength(mtx, config) for mtx in matrices if mtx.label == "NC"]
        patients = [community_strength(mtx, config) for mtx in matrices if mtx.label == "AD"]
        self.assertGreater(welch_t(controls, patients), 5)

    def test_threshold_oracle(self):
        config = SynthConfig(n_per_class=60, inter_class_shift=0.8, noise_std=0.2, seed=3)
        cohort = generate_cohort(config)
        train, test = cohort.stratified_split(0.7, seed=3)
        oracle = ThresholdOracle(config, "AD", "NC").fit(train.connectomes())
        self.assertTrue(oracle.positive_below)
        self.assertGreaterEqual(oracle.accuracy(test.connectomes()), 0.95)

    def test_oracle_needs_both_classes(self):
        config = SynthConfig(regions=8, n_per_class=2)
        matrices = [mtx for mtx in generate_cohort(config).connectomes() if mtx.label == "NC"]
        self.assertRaises(InputError, ThresholdOracle(config, "AD", "NC").fit, matrices)
