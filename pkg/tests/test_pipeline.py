""" end-to-end learning signal on a synthetic cohort """
import logging

from bnft.classifier import extract_latents, svm_train, evaluate, repeat_and_average
from bnft.encoder import EncoderConfig
from bnft.objectives import LossWeights
from bnft.synthdata import SynthConfig, generate_cohort, ThresholdOracle
from bnft.trainer import ModelBundle, TrainConfig, pretrain, finetune
from tests import BNFTestCase


def trained_latents(synth):
    """
    Pretrain, freeze, finetune on the whole cohort, then read out latents

    :rtype: (bnft.connectome.Cohort, dict)
    """
    cohort = generate_cohort(synth)
    encoder = EncoderConfig(depth=1, heads=2, embed=32, ffn_hidden=64)
    bundle = ModelBundle.create(synth.regions, encoder, adapter_hidden=64, latent=32, seed=1)
    weights = LossWeights(lambda_c=0.2, lambda_r=5.0, tau=0.07)
    pretrain(cohort, bundle, TrainConfig(lr=3e-3, epochs=20, batch_size=16, loss_weights=weights,
                                         phase="pretrain", seed=1))
    bundle.encoder.freeze()
    finetune(cohort, bundle, TrainConfig(lr=3e-3, epochs=20, batch_size=16, loss_weights=weights,
                                         phase="finetune", seed=2))
    features = {item.subject_id: item for item in extract_latents(cohort.connectomes(), bundle)}
    return cohort, features


def split_report(cohort, features, seed):
    train, test = cohort.stratified_split(0.7, seed=seed)
    model = svm_train([features[rec.subject_id] for rec in train], train.labels(), seed=seed, positive="AD")
    return evaluate(model, [features[rec.subject_id] for rec in test], test.labels())


class TestPipeline(BNFTestCase):
    def test_pretrain_finetune_svm(self):
        synth = SynthConfig(regions=16, timepoints=120, n_per_class=60, inter_class_shift=0.8, noise_std=0.2, seed=1)
        cohort, features = trained_latents(synth)
        report = split_report(cohort, features, seed=1)

        train, test = cohort.stratified_split(0.7, seed=1)
        oracle = ThresholdOracle(synth, "AD", "NC").fit(train.connectomes())
        baseline = oracle.accuracy(test.connectomes())
        logging.info("Pipeline accuracy %.4f, threshold rule %.4f", report.acc, baseline)
        self.assertGreaterEqual(report.acc, 0.9)
        self.assertGreaterEqual(report.acc, baseline - 0.1)

    def test_null_cohort_stays_at_chance(self):
        synth = SynthConfig(regions=16, timepoints=120, n_per_class=60, inter_class_shift=0.0, noise_std=0.2, seed=5)
        cohort, features = trained_latents(synth)
        report = repeat_and_average(lambda seed: split_report(cohort, features, seed), list(range(10)))
        logging.info("Null cohort accuracy %.4f over %s splits", report.acc, len(report.runs))
        self.assertGreaterEqual(report.acc, 0.4)
        self.assertLessEqual(report.acc, 0.6)
