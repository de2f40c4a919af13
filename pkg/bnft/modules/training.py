"""
Pretraining and fine-tuning commands, one epoch per engine check

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
from bnft.checkpoint import save_checkpoint
from bnft.encoder import EncoderConfig
from bnft.engine import CommandModule
from bnft.trainer import ModelBundle, TrainConfig, Trainer


def encoder_config_from(settings):
    """
    :type settings: bnft.utils.BetterDict
    :rtype: EncoderConfig
    """
    return EncoderConfig(depth=settings.get("depth", 2),
                         heads=settings.get("heads", 4),
                         embed=settings.get("embed", 64),
                         use_ffn=settings.get("use-ffn", True),
                         use_norm=settings.get("use-norm", True),
                         ffn_hidden=settings.get("ffn-hidden", 128))


class TrainingModule(CommandModule):
    """
    Base for both phases: builds a Trainer in prepare, runs one epoch per
    check, saves the checkpoint once every epoch is done

    :type trainer: Trainer
    """
    PHASE = None
    CHECKPOINT_NAME = "model"

    def __init__(self):
        super(TrainingModule, self).__init__()
        self.trainer = None
        self.last_record = None

    def create_bundle(self, cohort):
        """
        :rtype: ModelBundle
        """
        raise NotImplementedError()

    def train_config(self):
        params = dict(self.section("training"))
        params["seed"] = self.seed
        return TrainConfig.from_settings(params, self.PHASE)

    def prepare(self):
        config = self.train_config()
        cohort = self.load_dataset()
        bundle = self.create_bundle(cohort)
        self.trainer = Trainer(bundle, cohort, config)
        self.log.info("%s: %s subjects, %s epochs, lambda-c=%s lambda-r=%s tau=%s",
                      config.phase, len(cohort), config.epochs, config.loss_weights.lambda_c,
                      config.loss_weights.lambda_r, config.loss_weights.tau)

    def startup(self):
        for listener in self.engine.epoch_listeners:
            self.trainer.add_listener(listener)

    def check(self):
        record = self.trainer.run_epoch()
        self.last_record = record
        self.log.info("Epoch %s/%s: l_c=%s l_r=%s combined=%.6f", record["epoch"], self.trainer.config.epochs,
                      _fmt(record["l_c"]), _fmt(record["l_r"]), record["combined"])
        return self.trainer.finished()

    def post_process(self):
        if self.trainer is None or not self.trainer.finished():
            self.log.warning("Training did not complete, no checkpoint written")
            return
        self.trainer.bundle.zero_grad()
        filename = self.output_path(self.CHECKPOINT_NAME, ".ckpt")
        save_checkpoint(self.trainer.bundle, filename)
        self.log.info("Checkpoint saved: %s", filename)


def _fmt(value):
    return "-" if value is None else "%.6f" % value


class Pretrainer(TrainingModule):
    """
    Self-supervised training of a fresh model, every parameter trainable
    """
    PHASE = "pretrain"
    CHECKPOINT_NAME = "pretrained"

    def create_bundle(self, cohort):
        model = self.section("model")
        return ModelBundle.create(regions=cohort.regions,
                                  encoder_config=encoder_config_from(model.get("encoder")),
                                  adapter_hidden=model.get("adapter-hidden", 1024),
                                  latent=model.get("latent", 32),
                                  seed=self.seed,
                                  activation=model.get("activation", "relu"))


class Finetuner(TrainingModule):
    """
    Adapter and heads trained in front of the frozen encoder of --checkpoint
    """
    PHASE = "finetune"
    CHECKPOINT_NAME = "finetuned"

    def create_bundle(self, cohort):
        bundle = self.load_bundle()
        bundle.encoder.freeze()
        self.log.info("Encoder frozen, digest %s", bundle.encoder.digest())
        return bundle
