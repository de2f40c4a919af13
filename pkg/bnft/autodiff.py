"""
Dense float64 tensors with reverse-mode automatic differentiation

Operations are recorded on the innermost active ``GradTape`` (define-by-run).
Without an active tape they compute values only, which is how inference
paths run. Tensors follow numpy semantics for storage: ``data`` is a
row-major float64 ndarray. Operations work on the last one or two axes and
accept leading stack axes where noted; no other broadcasting is done.

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
import hashlib
import logging
import threading

import numpy as np

from bnft import ContractError, DimensionError, DegenerateInputError

LOG_FLOOR = 1e-12
NORM_EPS = 1e-5


class Tensor(object):
    """
    n-dimensional float64 array that may take part in gradient tapes

    :type data: numpy.ndarray
    :type grad: numpy.ndarray or None
    """

    def __init__(self, data, requires_grad=False, name=""):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def tracked(self):
        """
        True if gradient may flow through this tensor
        """
        return self.requires_grad or self._node is not None

    def item(self):
        if self.data.size != 1:
            raise ContractError("Only single-element tensors convert to scalars, got shape %s" % (self.shape,))
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data.copy()

    def zero_grad(self):
        self.grad = None

    def is_finite(self):
        return bool(np.all(np.isfinite(self.data)))

    def __repr__(self):
        label = " %s" % self.name if self.name else ""
        return "Tensor%s(shape=%s, requires_grad=%s)" % (label, self.shape, self.requires_grad)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, other)

    def __rmul__(self, other):
        return mul_scalar(self, other)

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        backward(self)


class _Node(object):
    """
    One recorded operation: output, inputs and the rule mapping the output
    gradient to input gradients
    """

    def __init__(self, tape, output, inputs, rule):
        self.tape = tape
        self.output = output
        self.inputs = inputs
        self.rule = rule


class GradTape(object):
    """
    Ordered record of operations. Used as a context manager::

        with GradTape() as tape:
            loss = ...
        tape.backward(loss)

    A tape can run backward once; ``reset()`` makes it usable again.

    :type nodes: list[_Node]
    """
    _local = threading.local()

    def __init__(self):
        self.nodes = []
        self.consumed = False
        self.log = logging.getLogger(__name__)

    def __enter__(self):
        self._stack().append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._stack().remove(self)

    @classmethod
    def _stack(cls):
        if not hasattr(cls._local, "stack"):
            cls._local.stack = []
        return cls._local.stack

    @classmethod
    def active(cls):
        """
        :rtype: GradTape or None
        """
        stack = cls._stack()
        return stack[-1] if stack else None

    def record(self, output, inputs, rule):
        node = _Node(self, output, inputs, rule)
        output._node = node
        self.nodes.append(node)

    def reset(self):
        for node in self.nodes:
            node.output._node = None
        self.nodes = []
        self.consumed = False

    def backward(self, loss):
        """
        Populate ``grad`` of every requires_grad leaf reachable from loss.
        Leaves seen on the tape but not influencing the loss get zero grads.

        :type loss: Tensor
        """
        if self.consumed:
            raise ContractError("Backward already called on this tape, reset it first")
        if loss.size != 1:
            raise ContractError("Backward needs a scalar loss, got shape %s" % (loss.shape,))
        if loss._node is None or loss._node.tape is not self:
            raise ContractError("Loss was not produced on this tape")

        for node in self.nodes:
            for inp in node.inputs:
                if inp.requires_grad and inp._node is None and inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)

        pending = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            grad_out = pending.pop(id(node.output), None)
            if grad_out is None:
                continue
            grads_in = node.rule(grad_out)
            for inp, grad_in in zip(node.inputs, grads_in):
                if grad_in is None or not inp.tracked:
                    continue
                if inp._node is not None:
                    key = id(inp)
                    if key in pending:
                        pending[key] = pending[key] + grad_in
                    else:
                        pending[key] = grad_in
                else:
                    inp.grad = inp.grad + grad_in

        self.consumed = True
        self.log.debug("Backward done over %s nodes", len(self.nodes))


def backward(loss):
    """
    Run backward on the tape that produced loss

    :type loss: Tensor
    """
    if not isinstance(loss, Tensor):
        raise ContractError("Backward needs a Tensor, got %s" % type(loss).__name__)
    if loss.size != 1:
        raise ContractError("Backward needs a scalar loss, got shape %s" % (loss.shape,))
    if loss._node is None:
        raise ContractError("Loss was not produced on an active tape")
    loss._node.tape.backward(loss)


def _result(data, inputs, rule):
    out = Tensor(data)
    tape = GradTape.active()
    if tape is not None and any(inp.tracked for inp in inputs):
        tape.record(out, inputs, rule)
    return out


def _swap(arr):
    return np.swapaxes(arr, -1, -2)


def _ensure_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def matmul(a, b):
    """
    Matrix product over the last two axes. ``a`` may carry leading stack
    axes, then ``b`` is either a plain matrix shared by the stack or has the
    same stack axes.

    :type a: Tensor
    :type b: Tensor
    :rtype: Tensor
    """
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("Cannot multiply shapes %s and %s" % (a.shape, b.shape))
    shared = b.data.ndim == 2
    if not shared and b.shape[:-2] != a.shape[:-2]:
        raise DimensionError("Cannot multiply shapes %s and %s" % (a.shape, b.shape))

    def rule(grad):
        grad_a = grad @ _swap(b.data)
        if shared:
            grad_b = a.data.reshape(-1, a.shape[-1]).T @ grad.reshape(-1, grad.shape[-1])
        else:
            grad_b = _swap(a.data) @ grad
        return grad_a, grad_b

    return _result(a.data @ b.data, (a, b), rule)


def add(a, b):
    """
    Elementwise sum of same-shaped tensors, or tensor plus a python scalar
    """
    if not isinstance(b, Tensor):
        return add_scalar(a, b)
    if a.shape != b.shape:
        raise DimensionError("Cannot add shapes %s and %s" % (a.shape, b.shape))
    return _result(a.data + b.data, (a, b), lambda grad: (grad, grad))


def sub(a, b):
    if not isinstance(b, Tensor):
        return add_scalar(a, -b)
    if a.shape != b.shape:
        raise DimensionError("Cannot subtract shapes %s and %s" % (a.shape, b.shape))
    return _result(a.data - b.data, (a, b), lambda grad: (grad, -grad))


def mul(a, b):
    if a.shape != b.shape:
        raise DimensionError("Cannot multiply elementwise shapes %s and %s" % (a.shape, b.shape))
    return _result(a.data * b.data, (a, b), lambda grad: (grad * b.data, grad * a.data))


def add_scalar(x, value):
    value = float(value)
    return _result(x.data + value, (x,), lambda grad: (grad,))


def mul_scalar(x, value):
    value = float(value)
    return _result(x.data * value, (x,), lambda grad: (grad * value,))


def add_bias(x, bias):
    """
    Add a vector to every row of x (the bias of a linear layer)

    :type x: Tensor
    :type bias: Tensor
    """
    if bias.data.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise DimensionError("Cannot add bias of shape %s to rows of %s" % (bias.shape, x.shape))

    def rule(grad):
        return grad, grad.reshape(-1, bias.shape[0]).sum(axis=0)

    return _result(x.data + bias.data, (x, bias), rule)


def relu(x):
    mask = x.data > 0
    return _result(np.where(mask, x.data, 0.0), (x,), lambda grad: (grad * mask,))


def transpose(x):
    """
    Swap the last two axes
    """
    if x.data.ndim < 2:
        raise DimensionError("Cannot transpose shape %s" % (x.shape,))
    return _result(_swap(x.data), (x,), lambda grad: (_swap(grad),))


def reshape(x, shape):
    """
    Same entries in row-major order, new shape
    """
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError("Cannot reshape %s into %s" % (x.shape, shape))
    return _result(x.data.reshape(shape), (x,), lambda grad: (grad.reshape(x.shape),))


def concat_lastdim(tensors):
    """
    :type tensors: list[Tensor]
    """
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("Nothing to concatenate")
    lead = tensors[0].shape[:-1]
    for item in tensors:
        if item.shape[:-1] != lead:
            raise DimensionError("Cannot concatenate shapes %s" % [t.shape for t in tensors])
    widths = [item.shape[-1] for item in tensors]
    bounds = np.cumsum(widths)[:-1]

    def rule(grad):
        return tuple(np.split(grad, bounds, axis=-1))

    return _result(np.concatenate([t.data for t in tensors], axis=-1), tuple(tensors), rule)


def mean_rows(x):
    """
    Average over rows (axis -2), keeping it: (..., m, n) -> (..., 1, n)
    """
    if x.data.ndim < 2:
        raise DimensionError("mean_rows needs a matrix, got shape %s" % (x.shape,))
    rows = x.shape[-2]

    def rule(grad):
        return (np.broadcast_to(grad / rows, x.shape).copy(),)

    return _result(x.data.mean(axis=-2, keepdims=True), (x,), rule)


def sum(x):  # pylint: disable=redefined-builtin
    """
    Sum of all entries, scalar result
    """
    return _result(np.array(x.data.sum()), (x,), lambda grad: (np.full(x.shape, float(grad)),))


def mean(x):
    count = float(x.size)
    return _result(np.array(x.data.mean()), (x,), lambda grad: (np.full(x.shape, float(grad) / count),))


def square(x):
    return _result(x.data * x.data, (x,), lambda grad: (2.0 * x.data * grad,))


def sqrt(x):
    out = np.sqrt(x.data)
    return _result(out, (x,), lambda grad: (grad * 0.5 / out,))


def exp(x):
    out = np.exp(x.data)
    return _result(out, (x,), lambda grad: (grad * out,))


def log(x):
    """
    Natural log with inputs floored at 1e-12; no gradient below the floor
    """
    floored = np.maximum(x.data, LOG_FLOOR)
    live = x.data > LOG_FLOOR
    return _result(np.log(floored), (x,), lambda grad: (np.where(live, grad / floored, 0.0),))


def softmax_rows(x):
    """
    Softmax over the last axis with max-subtraction
    """
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    out = expd / expd.sum(axis=-1, keepdims=True)

    def rule(grad):
        return (out * (grad - (grad * out).sum(axis=-1, keepdims=True)),)

    return _result(out, (x,), rule)


def log_softmax_rows(x):
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def rule(grad):
        return (grad - probs * grad.sum(axis=-1, keepdims=True),)

    return _result(out, (x,), rule)


def cosine_similarity(a, b):
    """
    Cosine of the angle between two tensors read as flat vectors

    :type a: Tensor
    :type b: Tensor
    :rtype: Tensor
    """
    if a.size != b.size:
        raise DimensionError("Cannot compare shapes %s and %s" % (a.shape, b.shape))
    norm_a = np.linalg.norm(a.data)
    norm_b = np.linalg.norm(b.data)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("Cosine similarity of a zero-norm vector")
    dot = float(np.sum(a.data * b.data))
    cos = dot / (norm_a * norm_b)

    def rule(grad):
        grad = float(grad)
        grad_a = grad * (b.data / (norm_a * norm_b) - cos * a.data / (norm_a * norm_a))
        grad_b = grad * (a.data / (norm_a * norm_b) - cos * b.data / (norm_b * norm_b))
        return grad_a, grad_b

    return _result(np.array(cos), (a, b), rule)


def l2_normalize(x):
    """
    Scale each row (last axis) to unit Euclidean norm
    """
    norms = np.linalg.norm(x.data, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("Cannot normalize a zero-norm vector")
    out = x.data / norms

    def rule(grad):
        return ((grad - out * (grad * out).sum(axis=-1, keepdims=True)) / norms,)

    return _result(out, (x,), rule)


def layer_norm(x, gamma, beta, eps=NORM_EPS):
    """
    Normalize each row (last axis) to zero mean and unit variance, then
    scale by gamma and shift by beta

    :type x: Tensor
    :type gamma: Tensor
    :type beta: Tensor
    """
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError("Layer norm of rows %s with gamma %s and beta %s" % (x.shape, gamma.shape, beta.shape))
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std

    def rule(grad):
        grad_normed = grad * gamma.data
        grad_x = inv_std * (grad_normed
                            - grad_normed.mean(axis=-1, keepdims=True)
                            - normed * (grad_normed * normed).mean(axis=-1, keepdims=True))
        flat = grad.reshape(-1, width)
        return grad_x, (flat * normed.reshape(-1, width)).sum(axis=0), flat.sum(axis=0)

    return _result(normed * gamma.data + beta.data, (x, gamma, beta), rule)


def stack(scalars):
    """
    Collect scalar tensors into a vector

    :type scalars: list[Tensor]
    """
    scalars = [_ensure_tensor(item) for item in scalars]
    for item in scalars:
        if item.size != 1:
            raise DimensionError("stack takes scalars, got shape %s" % (item.shape,))

    def rule(grad):
        return tuple(np.array(val).reshape(item.shape) for val, item in zip(grad, scalars))

    return _result(np.array([item.data.reshape(-1)[0] for item in scalars]), tuple(scalars), rule)


def uniform_init(rng, fan_in, shape):
    """
    Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]

    :type rng: numpy.random.Generator
    """
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class ParameterGroup(object):
    """
    Named, ordered set of learnable tensors with a shared frozen flag
    """

    def __init__(self):
        self._tensors = {}

    def add(self, name, data):
        tensor = Tensor(data, requires_grad=True, name=name)
        self._tensors[name] = tensor
        return tensor

    def named_tensors(self):
        """
        :rtype: list[(str, Tensor)]
        """
        return list(self._tensors.items())

    def tensor(self, name):
        return self._tensors[name]

    @property
    def frozen(self):
        return not any(item.requires_grad for item in self._tensors.values())

    def set_trainable(self, flag):
        for item in self._tensors.values():
            item.requires_grad = bool(flag)
            if not flag:
                item.grad = None

    def zero_grad(self):
        for item in self._tensors.values():
            item.grad = None

    def digest(self):
        """
        SHA-256 over names, shapes and little-endian float64 bytes
        """
        digest = hashlib.sha256()
        for name, item in self.named_tensors():
            digest.update(name.encode("utf-8"))
            digest.update(np.asarray(item.shape, dtype="<u4").tobytes())
            digest.update(item.data.astype("<f8").tobytes())
        return digest.hexdigest()
