"""
Downstream diagnosis: SVM on latent readouts, repeated over seeds, and the
loss-term ablation built on top of it

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

   http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
from bnft import ConfigurationError
from bnft.checkpoint import dumps, loads
from bnft.classifier import extract_latents, svm_train, evaluate, repeat_and_average, render_table
from bnft.engine import CommandModule
from bnft.objectives import LossWeights
from bnft.trainer import TrainConfig, Trainer
from bnft.utils import to_json


class DiagnosisTask(object):
    """
    Binary task settings: labels, split, SVM parameters and repeats
    """

    def __init__(self, settings, seed):
        self.positive = str(settings.get("positive", "AD"))
        self.negative = str(settings.get("negative", "NC"))
        self.repeats = int(settings.get("repeats", 3))
        self.train_fraction = float(settings.get("train-fraction", 0.7))
        self.svm_c = float(settings.get("svm-c", 1.0))
        self.svm_epochs = int(settings.get("svm-epochs", 200))
        self.seed = seed
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train-fraction must lie in (0, 1), got %s" % self.train_fraction)
        if self.positive == self.negative:
            raise ConfigurationError("Positive and negative labels must differ")

    def seeds(self):
        return [self.seed + idx for idx in range(self.repeats)]

    def run(self, cohort, bundle):
        """
        Readout once, then split, fit and score per seed

        :type cohort: bnft.connectome.Cohort
        :type bundle: bnft.trainer.ModelBundle
        :rtype: bnft.classifier.AveragedReport
        """
        cohort = cohort.select_labels(self.positive, self.negative)
        features = {item.subject_id: item for item in extract_latents(cohort.connectomes(), bundle)}

        def pipeline(seed):
            train, test = cohort.stratified_split(self.train_fraction, seed)
            train_feats = [features[rec.subject_id] for rec in train]
            test_feats = [features[rec.subject_id] for rec in test]
            model = svm_train(train_feats, train.labels(), C=self.svm_c, epochs=self.svm_epochs, seed=seed,
                              positive=self.positive)
            return evaluate(model, test_feats, test.labels())

        return repeat_and_average(pipeline, self.seeds())


class Evaluator(CommandModule):
    """
    SVM diagnosis on the latent readout of --checkpoint
    """

    def __init__(self):
        super(Evaluator, self).__init__()
        self.task = None
        self.cohort = None
        self.bundle = None
        self.report = None

    def prepare(self):
        self.task = DiagnosisTask(self.section("evaluation"), self.seed)
        self.cohort = self.load_dataset()
        self.bundle = self.load_bundle()

    def check(self):
        self.report = self.task.run(self.cohort, self.bundle)
        return True

    def post_process(self):
        if self.report is None:
            return
        title = "%s vs %s" % (self.task.positive, self.task.negative)
        table = render_table([(title, self.report)])
        self.log.info("Averaged over %s runs:\n%s", len(self.report.runs), table)

        json_file = self.output_path("eval-report", ".json")
        with open(json_file, "w") as fds:
            fds.write(to_json(self.report.to_dict()))
        with open(self.engine.create_artifact("eval-report", ".txt"), "w") as fds:
            fds.write(table + "\n")


class Ablation(CommandModule):
    """
    Fine-tunes the same checkpoint once per loss configuration with shared
    seeds and evaluates each result, one configuration per check
    """

    def __init__(self):
        super(Ablation, self).__init__()
        self.task = None
        self.cohort = None
        self.payload = None
        self.configs = []
        self.rows = []

    def prepare(self):
        self.task = DiagnosisTask(self.section("evaluation"), self.seed)
        self.cohort = self.load_dataset()
        self.payload = dumps(self.load_bundle())
        training = self.section("training")
        for item in self.settings.get("configs", []):
            weights = LossWeights(lambda_c=item.get("lambda-c", 0.0), lambda_r=item.get("lambda-r", 0.0),
                                  tau=training.get("tau", 0.07))
            self.configs.append((item.get("title", "lambda-c=%s lambda-r=%s" % (weights.lambda_c, weights.lambda_r)),
                                 weights))
        if not self.configs:
            raise ConfigurationError("No ablation configs in modules.ablate.configs")

    def check(self):
        title, weights = self.configs[len(self.rows)]
        params = dict(self.section("training"))
        params["seed"] = self.seed
        config = TrainConfig.from_settings(params, "finetune")
        config.loss_weights = weights
        config.validate()

        bundle = loads(self.payload)
        bundle.encoder.freeze()
        self.log.info("Ablation row '%s': fine-tuning for %s epochs", title, config.epochs)
        Trainer(bundle, self.cohort, config).run()
        report = self.task.run(self.cohort, bundle)
        self.rows.append((title, weights, report))
        self.log.info("Ablation row '%s': ACC=%.4f", title, report.acc)
        return len(self.rows) == len(self.configs)

    def post_process(self):
        if not self.rows:
            return
        table = render_table([(title, report) for title, _, report in self.rows])
        self.log.info("Ablation:\n%s", table)
        result = [{"title": title, "lambda_c": weights.lambda_c, "lambda_r": weights.lambda_r,
                   "report": report.to_dict()} for title, weights, report in self.rows]
        json_file = self.output_path("ablation", ".json")
        with open(json_file, "w") as fds:
            fds.write(to_json(result))
        with open(self.engine.create_artifact("ablation", ".txt"), "w") as fds:
            fds.write(table + "\n")
