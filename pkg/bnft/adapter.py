"""
Adapter: two linear projections mapping every connectivity row (V wide)
to a B wide token embedding, V x V -> V x B

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

from bnft import ConfigurationError, DimensionError
from bnft.autodiff import ParameterGroup, uniform_init, matmul, add_bias, relu

ACTIVATIONS = ("relu", "identity")


class AdapterParams(ParameterGroup):
    """
    W1: V x hidden, b1: hidden, W2: hidden x B, b2: B
    """

    def __init__(self, regions, hidden, output, activation="relu"):
        super(AdapterParams, self).__init__()
        if regions < 1 or hidden < 1 or output < 1:
            raise ConfigurationError("Adapter sizes must be positive: %s, %s, %s" % (regions, hidden, output))
        if activation not in ACTIVATIONS:
            raise ConfigurationError("Unknown adapter activation '%s', use one of %s" % (activation, ACTIVATIONS))
        self.regions = int(regions)
        self.hidden = int(hidden)
        self.output = int(output)
        self.activation = activation
        self.W1 = self.add("W1", np.zeros((self.regions, self.hidden)))
        self.b1 = self.add("b1", np.zeros(self.hidden))
        self.W2 = self.add("W2", np.zeros((self.hidden, self.output)))
        self.b2 = self.add("b2", np.zeros(self.output))

    @classmethod
    def init(cls, regions, hidden, output, rng, activation="relu"):
        """
        :type rng: numpy.random.Generator
        :rtype: AdapterParams
        """
        params = cls(regions, hidden, output, activation)
        params.W1.data[...] = uniform_init(rng, regions, (regions, hidden))
        params.W2.data[...] = uniform_init(rng, hidden, (hidden, output))
        return params

    def config(self):
        return {"regions": self.regions, "hidden": self.hidden, "output": self.output,
                "activation": self.activation}


def adapter_forward(x, params):
    """
    relu(x W1 + b1) W2 + b2, each row of x projected on its own.
    x is V x V or a stack N x V x V.

    :type x: bnft.autodiff.Tensor
    :type params: AdapterParams
    :rtype: bnft.autodiff.Tensor
    """
    if x.data.ndim < 2 or x.shape[-1] != params.regions or x.shape[-2] != params.regions:
        raise DimensionError("Adapter expects %sx%s connectivity, got shape %s"
                             % (params.regions, params.regions, x.shape))
    hidden = add_bias(matmul(x, params.W1), params.b1)
    if params.activation == "relu":
        hidden = relu(hidden)
    return add_bias(matmul(hidden, params.W2), params.b2)
