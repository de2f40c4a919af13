"""
Reconstruction and classification heads with their losses

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
import numpy as np

from bnft import ConfigurationError, DimensionError, InputError
from bnft.autodiff import Tensor, ParameterGroup, uniform_init, matmul, add_bias, mean_rows, l2_normalize, \
    mean, square, sub, add, mul, mul_scalar, sum as tensor_sum, stack, cosine_similarity, log_softmax_rows, \
    transpose, concat_lastdim, reshape

MASK_VALUE = -1e9


class HeadParams(ParameterGroup):
    """
    recon_W: B x V with bias recon_b (V), cls_W: B x E
    """

    def __init__(self, embed, regions, latent=32):
        super(HeadParams, self).__init__()
        if embed < 1 or regions < 1 or latent < 1:
            raise ConfigurationError("Head sizes must be positive: %s, %s, %s" % (embed, regions, latent))
        self.embed = int(embed)
        self.regions = int(regions)
        self.latent = int(latent)
        self.recon_W = self.add("recon_W", np.zeros((self.embed, self.regions)))
        self.recon_b = self.add("recon_b", np.zeros(self.regions))
        self.cls_W = self.add("cls_W", np.zeros((self.embed, self.latent)))

    @classmethod
    def init(cls, embed, regions, latent, rng):
        params = cls(embed, regions, latent)
        params.recon_W.data[...] = uniform_init(rng, embed, (embed, regions))
        params.cls_W.data[...] = uniform_init(rng, embed, (embed, latent))
        return params

    def config(self):
        return {"embed": self.embed, "regions": self.regions, "latent": self.latent}


class LossWeights(object):
    def __init__(self, lambda_c=0.2, lambda_r=5.0, tau=0.07):
        self.lambda_c = float(lambda_c)
        self.lambda_r = float(lambda_r)
        self.tau = float(tau)
        self.validate()

    def validate(self):
        if self.lambda_c < 0 or self.lambda_r < 0:
            raise ConfigurationError("Loss weights must be nonnegative: lambda-c=%s lambda-r=%s"
                                     % (self.lambda_c, self.lambda_r))
        if self.lambda_c == 0 and self.lambda_r == 0:
            raise ConfigurationError("lambda-c and lambda-r cannot both be zero")
        if self.tau <= 0:
            raise ConfigurationError("Temperature tau must be positive, got %s" % self.tau)

    def to_dict(self):
        return {"lambda_c": self.lambda_c, "lambda_r": self.lambda_r, "tau": self.tau}

    def __repr__(self):
        return "LossWeights(%s)" % self.to_dict()


def reconstruction_head(tokens, heads):
    """
    Encoder output V x B back to a V x V network
    """
    return add_bias(matmul(tokens, heads.recon_W), heads.recon_b)


def classification_head(tokens, heads):
    """
    Mean over tokens, projection to E, unit norm: V x B -> 1 x E
    """
    return l2_normalize(matmul(mean_rows(tokens), heads.cls_W))


def mse_loss(pred, target):
    """
    :type pred: Tensor
    :type target: Tensor or numpy.ndarray
    :rtype: Tensor
    """
    if not isinstance(target, Tensor):
        target = Tensor(target)
    if pred.shape != target.shape:
        raise DimensionError("MSE between shapes %s and %s" % (pred.shape, target.shape))
    return mean(square(sub(pred, target)))


def infonce_loss(query, positive, negatives, tau):
    """
    -log(exp(sim(q, k+)/tau) / sum_j exp(sim(q, k_j)/tau)) over the candidate
    set made of the positive and all negatives, sim being cosine similarity

    :type query: Tensor
    :type positive: Tensor
    :type negatives: list[Tensor]
    :type tau: float
    :rtype: Tensor
    """
    negatives = list(negatives)
    if not negatives:
        raise InputError("InfoNCE needs at least one negative")
    if tau <= 0:
        raise ConfigurationError("Temperature tau must be positive, got %s" % tau)
    sims = [cosine_similarity(query, positive)] + [cosine_similarity(query, item) for item in negatives]
    log_probs = log_softmax_rows(mul_scalar(stack(sims), 1.0 / tau))
    pick = np.zeros(len(sims))
    pick[0] = 1.0
    return mul_scalar(tensor_sum(mul(Tensor(pick), log_probs)), -1.0)


def batch_infonce(first, second, tau):
    """
    InfoNCE over N subjects with two views each. Every one of the 2N view
    embeddings is an anchor, its positive is the other view of the same
    subject and the negatives are both views of every other subject.
    Equals the mean of infonce_loss over all anchors.

    :type first: Tensor
    :type second: Tensor
    :rtype: Tensor
    """
    if first.shape != second.shape:
        raise DimensionError("View embeddings differ in shape: %s vs %s" % (first.shape, second.shape))
    count = first.shape[0]
    if count < 2:
        raise InputError("Batch InfoNCE needs at least two subjects, got %s" % count)
    first = l2_normalize(reshape(first, (count, first.size // count)))
    second = l2_normalize(reshape(second, (count, second.size // count)))

    self_mask = Tensor(np.hstack([np.zeros((count, count)), np.eye(count) * MASK_VALUE]))
    pick = Tensor(np.hstack([np.eye(count), np.zeros((count, count))]))
    scale = 1.0 / tau

    total = None
    for anchor, other in ((first, second), (second, first)):
        logits = concat_lastdim([matmul(anchor, transpose(other)), matmul(anchor, transpose(anchor))])
        logits = add(mul_scalar(logits, scale), self_mask)
        picked = tensor_sum(mul(pick, log_softmax_rows(logits)))
        total = picked if total is None else add(total, picked)
    return mul_scalar(total, -1.0 / (2 * count))


def combined_loss(l_c, l_r, weights):
    """
    lambda_c * l_c + lambda_r * l_r

    :type weights: LossWeights
    :rtype: Tensor
    """
    if not isinstance(l_c, Tensor):
        l_c = Tensor(l_c)
    if not isinstance(l_r, Tensor):
        l_r = Tensor(l_r)
    return add(mul_scalar(l_c, weights.lambda_c), mul_scalar(l_r, weights.lambda_r))


def make_views(values, mask_fraction, rng):
    """
    Copy of a connectivity matrix with a random share of off-diagonal pairs
    zeroed, symmetrically

    :type values: numpy.ndarray
    :type mask_fraction: float
    :type rng: numpy.random.Generator
    :rtype: numpy.ndarray
    """
    view = np.array(values, dtype=np.float64)
    rows, cols = np.triu_indices(view.shape[0], k=1)
    count = int(round(mask_fraction * len(rows)))
    if count:
        chosen = rng.choice(len(rows), size=count, replace=False)
        view[rows[chosen], cols[chosen]] = 0.0
        view[cols[chosen], rows[chosen]] = 0.0
    return view
