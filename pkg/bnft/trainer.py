"""
Optimization loops: local self-supervised pretraining of the whole model,
then adapter fine-tuning in front of a frozen encoder

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
import logging

import numpy as np

from bnft import ConfigurationError, ContractError, DimensionError, InputError, NumericalFailure
from bnft.adapter import AdapterParams, adapter_forward
from bnft.autodiff import GradTape, Tensor
from bnft.connectome import Cohort, ConnectivityMatrix
from bnft.encoder import EncoderConfig, EncoderParams, encoder_forward
from bnft.objectives import HeadParams, LossWeights, reconstruction_head, classification_head, mse_loss, \
    batch_infonce, combined_loss, make_views
from bnft.utils import make_rng

PHASES = ("pretrain", "finetune")


class ModelBundle(object):
    """
    Adapter, encoder and both heads with their frozen flags

    :type adapter: AdapterParams
    :type encoder: EncoderParams
    :type heads: HeadParams
    """

    def __init__(self, adapter, encoder, heads, rng_seed=0):
        self.adapter = adapter
        self.encoder = encoder
        self.heads = heads
        self.rng_seed = int(rng_seed)
        self.validate()

    @classmethod
    def create(cls, regions, encoder_config, adapter_hidden=1024, latent=32, seed=0, activation="relu"):
        """
        Fresh bundle, every weight drawn from one generator seeded with seed

        :type encoder_config: EncoderConfig
        :rtype: ModelBundle
        """
        rng = make_rng(seed)
        adapter = AdapterParams.init(regions, adapter_hidden, encoder_config.embed, rng, activation)
        encoder = EncoderParams.init(encoder_config, rng)
        heads = HeadParams.init(encoder_config.embed, regions, latent, rng)
        return cls(adapter, encoder, heads, seed)

    @classmethod
    def from_config(cls, config):
        """
        Bundle of zero weights shaped after a config() dict
        """
        try:
            adapter_cfg = config["adapter"]
            heads_cfg = config["heads"]
            adapter = AdapterParams(adapter_cfg["regions"], adapter_cfg["hidden"], adapter_cfg["output"],
                                    adapter_cfg["activation"])
            encoder = EncoderParams(EncoderConfig.from_dict(config["encoder"]))
            heads = HeadParams(heads_cfg["embed"], heads_cfg["regions"], heads_cfg["latent"])
            bundle = cls(adapter, encoder, heads, config["rng_seed"])
            frozen = set(config.get("frozen", []))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError("Incomplete model config, missing %s" % exc)

        for name, tensor in bundle.named_tensors():
            tensor.requires_grad = name not in frozen
        return bundle

    @property
    def regions(self):
        return self.adapter.regions

    @property
    def encoder_config(self):
        return self.encoder.config

    def validate(self):
        if self.adapter.output != self.encoder.config.embed:
            raise DimensionError("Adapter output %s differs from encoder embed %s"
                                 % (self.adapter.output, self.encoder.config.embed))
        if self.heads.embed != self.encoder.config.embed:
            raise DimensionError("Head input %s differs from encoder embed %s"
                                 % (self.heads.embed, self.encoder.config.embed))
        if self.heads.regions != self.adapter.regions:
            raise DimensionError("Reconstruction head emits %s regions, adapter takes %s"
                                 % (self.heads.regions, self.adapter.regions))

    def groups(self):
        return [("adapter", self.adapter), ("encoder", self.encoder), ("heads", self.heads)]

    def named_tensors(self):
        """
        :rtype: list[(str, bnft.autodiff.Tensor)]
        """
        result = []
        for prefix, group in self.groups():
            result.extend(("%s.%s" % (prefix, name), tensor) for name, tensor in group.named_tensors())
        return result

    def zero_grad(self):
        for _, group in self.groups():
            group.zero_grad()

    def config(self):
        return {
            "adapter": self.adapter.config(),
            "encoder": self.encoder.config.to_dict(),
            "heads": self.heads.config(),
            "rng_seed": self.rng_seed,
            "frozen": [name for name, tensor in self.named_tensors() if not tensor.requires_grad],
        }

    def check_input(self, values):
        if values.shape[-2:] != (self.regions, self.regions):
            raise DimensionError("Model expects %sx%s connectivity, got shape %s"
                                 % (self.regions, self.regions, values.shape))

    def tokens(self, x):
        """
        Adapter then encoder, V x V -> V x B (stacks allowed)

        :type x: Tensor
        :rtype: Tensor
        """
        self.check_input(x.data)
        return encoder_forward(adapter_forward(x, self.adapter), self.encoder, self.encoder.config)


class TrainConfig(object):
    def __init__(self, lr=3e-4, weight_decay=5e-5, epochs=500, batch_size=16, loss_weights=None,
                 phase="finetune", mask_fraction=0.1, seed=0):
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.loss_weights = loss_weights if loss_weights is not None else LossWeights()
        self.phase = phase
        self.mask_fraction = float(mask_fraction)
        self.seed = int(seed)
        self.validate()

    @classmethod
    def from_settings(cls, settings, phase):
        """
        :type settings: dict
        :rtype: TrainConfig
        """
        weights = LossWeights(lambda_c=settings.get("lambda-c", 0.2),
                              lambda_r=settings.get("lambda-r", 5.0),
                              tau=settings.get("tau", 0.07))
        return cls(lr=settings.get("lr", 3e-4),
                   weight_decay=settings.get("weight-decay", 5e-5),
                   epochs=settings.get("epochs", 500),
                   batch_size=settings.get("batch-size", 16),
                   loss_weights=weights,
                   phase=phase,
                   mask_fraction=settings.get("mask-fraction", 0.1),
                   seed=settings.get("seed", 0))

    def validate(self):
        if self.lr <= 0:
            raise ConfigurationError("Learning rate must be positive, got %s" % self.lr)
        if self.weight_decay < 0:
            raise ConfigurationError("Weight decay cannot be negative, got %s" % self.weight_decay)
        if self.epochs < 1:
            raise ConfigurationError("Need at least one epoch, got %s" % self.epochs)
        if self.batch_size < 1:
            raise ConfigurationError("Batch size must be positive, got %s" % self.batch_size)
        if self.batch_size < 2 and self.loss_weights.lambda_c > 0:
            raise ConfigurationError("Contrastive loss needs batch-size of at least 2, got %s" % self.batch_size)
        if self.phase not in PHASES:
            raise ConfigurationError("Unknown training phase '%s', use one of %s" % (self.phase, PHASES))
        if not 0.0 <= self.mask_fraction < 1.0:
            raise ConfigurationError("mask-fraction must lie in [0, 1), got %s" % self.mask_fraction)
        self.loss_weights.validate()

    def to_dict(self):
        return {"lr": self.lr, "weight_decay": self.weight_decay, "epochs": self.epochs,
                "batch_size": self.batch_size, "loss_weights": self.loss_weights.to_dict(),
                "phase": self.phase, "mask_fraction": self.mask_fraction, "seed": self.seed}


class AdamState(object):
    """
    First and second moments per parameter name, shared step counter
    """

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.moments = {}

    def moments_for(self, name, tensor):
        if name not in self.moments:
            self.moments[name] = (np.zeros_like(tensor.data), np.zeros_like(tensor.data))
        first, second = self.moments[name]
        if first.shape != tensor.shape:
            raise ContractError("Optimizer state for %s has shape %s, parameter has %s"
                                % (name, first.shape, tensor.shape))
        return first, second


def adam_step(params, grads, state, lr, weight_decay):
    """
    Decoupled weight decay, then bias-corrected Adam update, in place.
    Frozen parameters are skipped.

    :type params: list[(str, bnft.autodiff.Tensor)]
    :type grads: dict[str, numpy.ndarray]
    :type state: AdamState
    """
    trainable = [(name, tensor) for name, tensor in params if tensor.requires_grad]
    for name, _ in trainable:
        if grads.get(name) is None:
            raise ContractError("No gradient for trainable parameter %s" % name)

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, tensor in trainable:
        grad = grads[name]
        first, second = state.moments_for(name, tensor)
        if weight_decay:
            tensor.data -= lr * weight_decay * tensor.data
        first *= state.beta1
        first += (1.0 - state.beta1) * grad
        second *= state.beta2
        second += (1.0 - state.beta2) * grad * grad
        tensor.data -= lr * (first / correction1) / (np.sqrt(second / correction2) + state.eps)


def _stack_values(matrices):
    return np.stack([mtx.values for mtx in matrices])


def _as_matrices(data):
    if isinstance(data, Cohort):
        return data.connectomes()
    return list(data)


class Trainer(object):
    """
    Runs the weighted reconstruction + contrastive objective one epoch at a
    time. Each batch reconstructs the unmasked networks and contrasts two
    masked views of every subject against the other subjects of the batch.

    :type bundle: ModelBundle
    :type config: TrainConfig
    """

    def __init__(self, bundle, matrices, config):
        self.log = logging.getLogger(__name__).getChild(self.__class__.__name__)
        self.bundle = bundle
        self.config = config
        self.matrices = _as_matrices(matrices)
        if not self.matrices:
            raise InputError("Cannot train on an empty cohort")
        for mtx in self.matrices:
            bundle.check_input(mtx.values)
        if config.loss_weights.lambda_c > 0 and len(self.matrices) < 2:
            raise InputError("Contrastive term needs at least two subjects")

        self._check_phase()
        self.values = _stack_values(self.matrices)
        self.rng = make_rng(config.seed)
        self.state = AdamState()
        self.epoch = 0
        self.listeners = []

    def _check_phase(self):
        bundle = self.bundle
        if self.config.phase == "finetune":
            if not bundle.encoder.frozen:
                raise ConfigurationError("Encoder must be frozen for fine-tuning")
            bundle.adapter.set_trainable(True)
            bundle.heads.set_trainable(True)
        elif any(group.frozen for _, group in bundle.groups()):
            raise ConfigurationError("Pretraining needs every parameter trainable")

    def add_listener(self, listener):
        """
        :type listener: bnft.engine.EpochListener
        """
        self.listeners.append(listener)

    def batches(self):
        order = self.rng.permutation(len(self.matrices))
        size = self.config.batch_size
        batches = [order[idx:idx + size] for idx in range(0, len(order), size)]
        if len(batches) > 1 and len(batches[-1]) == 1 and self.config.loss_weights.lambda_c > 0:
            tail = batches.pop()
            batches[-1] = np.concatenate([batches[-1], tail])
        return batches

    def batch_loss(self, values):
        """
        :type values: numpy.ndarray
        :rtype: (Tensor, Tensor or None, Tensor or None)
        """
        weights = self.config.loss_weights
        l_c = l_r = None
        if weights.lambda_r > 0:
            restored = reconstruction_head(self.bundle.tokens(Tensor(values)), self.bundle.heads)
            l_r = mse_loss(restored, values)
        if weights.lambda_c > 0:
            views = []
            for _ in range(2):
                masked = np.stack([make_views(item, self.config.mask_fraction, self.rng) for item in values])
                views.append(classification_head(self.bundle.tokens(Tensor(masked)), self.bundle.heads))
            l_c = batch_infonce(views[0], views[1], weights.tau)
        total = combined_loss(l_c if l_c is not None else 0.0, l_r if l_r is not None else 0.0, weights)
        return total, l_c, l_r

    def run_epoch(self):
        """
        :rtype: dict
        """
        self.epoch += 1
        sums = {"l_c": 0.0, "l_r": 0.0, "combined": 0.0}
        params = self.bundle.named_tensors()
        for batch in self.batches():
            self.bundle.zero_grad()
            with GradTape() as tape:
                total, l_c, l_r = self.batch_loss(self.values[batch])
            if not np.isfinite(total.item()):
                raise NumericalFailure("Loss became %s at epoch %s" % (total.item(), self.epoch), self.epoch)
            tape.backward(total)
            # a head unused by the active loss terms gets no gradient and stays as is
            used = [(name, tensor) for name, tensor in params if tensor.grad is not None]
            adam_step(used, {name: tensor.grad for name, tensor in used}, self.state,
                      self.config.lr, self.config.weight_decay)
            tape.reset()

            share = len(batch) / float(len(self.matrices))
            sums["combined"] += share * total.item()
            sums["l_c"] += share * (l_c.item() if l_c is not None else 0.0)
            sums["l_r"] += share * (l_r.item() if l_r is not None else 0.0)

        weights = self.config.loss_weights
        record = {
            "epoch": self.epoch,
            "l_c": sums["l_c"] if weights.lambda_c > 0 else None,
            "l_r": sums["l_r"] if weights.lambda_r > 0 else None,
            "combined": sums["combined"],
        }
        self.log.debug("Epoch %s: %s", self.epoch, record)
        for listener in self.listeners:
            listener.epoch_finished(record)
        return record

    def finished(self):
        return self.epoch >= self.config.epochs

    def run(self):
        while not self.finished():
            self.run_epoch()
        self.bundle.zero_grad()
        return self.bundle


def pretrain(cohort, bundle, config):
    """
    Train adapter, encoder and heads jointly on an unlabeled cohort

    :type bundle: ModelBundle
    :type config: TrainConfig
    :rtype: ModelBundle
    """
    if config.phase != "pretrain":
        raise ConfigurationError("pretrain needs phase 'pretrain', got '%s'" % config.phase)
    return Trainer(bundle, cohort, config).run()


def finetune(cohort, bundle, config):
    """
    Train adapter and heads in front of the frozen encoder

    :type bundle: ModelBundle
    :type config: TrainConfig
    :rtype: ModelBundle
    """
    if config.phase != "finetune":
        raise ConfigurationError("finetune needs phase 'finetune', got '%s'" % config.phase)
    return Trainer(bundle, cohort, config).run()


def reconstruct(matrix, bundle):
    """
    Reconstruction head output for one network, no symmetry imposed

    :type matrix: ConnectivityMatrix
    :type bundle: ModelBundle
    :rtype: numpy.ndarray
    """
    values = matrix.values if isinstance(matrix, ConnectivityMatrix) else np.asarray(matrix, dtype=np.float64)
    return reconstruction_head(bundle.tokens(Tensor(values)), bundle.heads).numpy()
