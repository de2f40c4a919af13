"""
Multi-head self-attention encoder over ROI tokens

Input is V x B (or a stack N x V x B): V tokens, one per region, each B
wide. Every layer runs H heads on the previous layer output, concatenates
them along features, projects with W_o, then optionally adds the residual
and layer-normalizes, and optionally runs a position-wise feed-forward
sub-block the same way. There are no positional encodings, so the encoder
is equivariant to token permutations.

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

from bnft import ConfigurationError, DimensionError, DegenerateInputError
from bnft.autodiff import ParameterGroup, uniform_init, matmul, transpose, mul_scalar, softmax_rows, \
    concat_lastdim, add, add_bias, relu, layer_norm


class EncoderConfig(object):
    """
    depth D, heads H, embed B; head width d_k = B / H
    """

    def __init__(self, depth=2, heads=4, embed=64, use_ffn=True, use_norm=True, ffn_hidden=128):
        self.depth = int(depth)
        self.heads = int(heads)
        self.embed = int(embed)
        self.use_ffn = bool(use_ffn)
        self.use_norm = bool(use_norm)
        self.ffn_hidden = int(ffn_hidden)
        self.validate()

    @property
    def head_dim(self):
        return self.embed // self.heads

    def validate(self):
        if self.depth < 0:
            raise ConfigurationError("Encoder depth cannot be negative")
        if self.heads < 1 or self.embed < 1 or self.ffn_hidden < 1:
            raise ConfigurationError("Encoder heads, embed and ffn-hidden must be positive")
        if self.embed % self.heads:
            raise ConfigurationError("Embed width %s is not divisible by %s heads" % (self.embed, self.heads))

    def to_dict(self):
        return {"depth": self.depth, "heads": self.heads, "embed": self.embed,
                "use_ffn": self.use_ffn, "use_norm": self.use_norm, "ffn_hidden": self.ffn_hidden}

    @classmethod
    def from_dict(cls, data):
        return cls(depth=data["depth"], heads=data["heads"], embed=data["embed"],
                   use_ffn=data["use_ffn"], use_norm=data["use_norm"], ffn_hidden=data["ffn_hidden"])

    def __eq__(self, other):
        return isinstance(other, EncoderConfig) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "EncoderConfig(%s)" % self.to_dict()


class EncoderParams(ParameterGroup):
    """
    Per layer d and head h: Wq, Wk, Wv (B x d_k); per layer: Wo (B x B),
    norm scale/shift and feed-forward weights when enabled
    """

    def __init__(self, config):
        super(EncoderParams, self).__init__()
        self.config = config
        embed, dk, hidden = config.embed, config.head_dim, config.ffn_hidden
        for layer in range(config.depth):
            for head in range(config.heads):
                for role in ("Wq", "Wk", "Wv"):
                    self.add(self.name(layer, "head%s.%s" % (head, role)), np.zeros((embed, dk)))
            self.add(self.name(layer, "Wo"), np.zeros((embed, embed)))
            if config.use_norm:
                self.add(self.name(layer, "norm1.gamma"), np.ones(embed))
                self.add(self.name(layer, "norm1.beta"), np.zeros(embed))
            if config.use_ffn:
                self.add(self.name(layer, "ffn.W1"), np.zeros((embed, hidden)))
                self.add(self.name(layer, "ffn.b1"), np.zeros(hidden))
                self.add(self.name(layer, "ffn.W2"), np.zeros((hidden, embed)))
                self.add(self.name(layer, "ffn.b2"), np.zeros(embed))
                if config.use_norm:
                    self.add(self.name(layer, "norm2.gamma"), np.ones(embed))
                    self.add(self.name(layer, "norm2.beta"), np.zeros(embed))

    @staticmethod
    def name(layer, part):
        return "layer%s.%s" % (layer, part)

    @classmethod
    def init(cls, config, rng):
        """
        Weights uniform in +-1/sqrt(fan_in), biases zero, norms identity

        :type config: EncoderConfig
        :type rng: numpy.random.Generator
        """
        params = cls(config)
        for name, tensor in params.named_tensors():
            if tensor.data.ndim == 2:
                tensor.data[...] = uniform_init(rng, tensor.shape[0], tensor.shape)
        return params

    def head(self, layer, head):
        return tuple(self.tensor(self.name(layer, "head%s.%s" % (head, role))) for role in ("Wq", "Wk", "Wv"))

    def freeze(self):
        self.set_trainable(False)


def attention_weights(x, Wq, Wk):
    """
    softmax_rows(Q K^T / sqrt(d_k)), V x V per stacked item
    """
    query = matmul(x, Wq)
    key = matmul(x, Wk)
    scores = mul_scalar(matmul(query, transpose(key)), 1.0 / np.sqrt(Wq.shape[-1]))
    return softmax_rows(scores)


def attention_head(x, Wq, Wk, Wv):
    """
    One head: softmax(Q K^T / sqrt(d_k)) V with Q, K, V = x Wq, x Wk, x Wv

    :type x: bnft.autodiff.Tensor
    :rtype: bnft.autodiff.Tensor
    """
    for weight in (Wq, Wk, Wv):
        if weight.data.ndim != 2 or weight.shape[0] != x.shape[-1]:
            raise DimensionError("Head weight of shape %s does not fit tokens of shape %s" % (weight.shape, x.shape))
    if Wq.shape != Wk.shape:
        raise DimensionError("Query and key weights differ: %s vs %s" % (Wq.shape, Wk.shape))
    return matmul(attention_weights(x, Wq, Wk), matmul(x, Wv))


def encoder_forward(x, params, config):
    """
    :type x: bnft.autodiff.Tensor
    :type params: EncoderParams
    :type config: EncoderConfig
    :rtype: bnft.autodiff.Tensor
    """
    if x.data.ndim < 2 or x.shape[-1] != config.embed:
        raise DimensionError("Encoder expects tokens %s wide, got shape %s" % (config.embed, x.shape))
    if not x.is_finite():
        raise DegenerateInputError("Encoder input contains NaN or Inf")

    tokens = x
    for layer in range(config.depth):
        heads = [attention_head(tokens, *params.head(layer, head)) for head in range(config.heads)]
        attended = matmul(concat_lastdim(heads), params.tensor(params.name(layer, "Wo")))
        if config.use_norm:
            tokens = layer_norm(add(tokens, attended),
                                params.tensor(params.name(layer, "norm1.gamma")),
                                params.tensor(params.name(layer, "norm1.beta")))
        else:
            tokens = attended

        if config.use_ffn:
            hidden = relu(add_bias(matmul(tokens, params.tensor(params.name(layer, "ffn.W1"))),
                                   params.tensor(params.name(layer, "ffn.b1"))))
            fed = add_bias(matmul(hidden, params.tensor(params.name(layer, "ffn.W2"))),
                           params.tensor(params.name(layer, "ffn.b2")))
            if config.use_norm:
                tokens = layer_norm(add(tokens, fed),
                                    params.tensor(params.name(layer, "norm2.gamma")),
                                    params.tensor(params.name(layer, "norm2.beta")))
            else:
                tokens = fed
    return tokens
