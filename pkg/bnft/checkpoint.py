"""
Versioned binary checkpoint container

Layout, all integers little-endian::

    magic      4 bytes  b"BNFT"
    version    uint16
    config     uint32 length + UTF-8 JSON, sorted keys
    count      uint32
    tensors    count x (uint16 name length, name, uint8 ndim,
                        ndim x uint32 dims, float64 data row-major)

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
import json
import logging
import struct

import numpy as np

from bnft import ConfigurationError, DataFormatError
from bnft.trainer import ModelBundle

MAGIC = b"BNFT"
VERSION = 1


def _encode_config(bundle):
    return json.dumps(bundle.config(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def dumps(bundle):
    """
    :type bundle: ModelBundle
    :rtype: bytes
    """
    chunks = [MAGIC, struct.pack("<H", VERSION)]
    config = _encode_config(bundle)
    chunks.append(struct.pack("<I", len(config)))
    chunks.append(config)

    tensors = bundle.named_tensors()
    chunks.append(struct.pack("<I", len(tensors)))
    for name, tensor in tensors:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.data.ndim))
        chunks.append(struct.pack("<%sI" % tensor.data.ndim, *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(bundle, path):
    """
    :type bundle: ModelBundle
    :type path: str
    """
    payload = dumps(bundle)
    with open(path, "wb") as fds:
        fds.write(payload)
    logging.getLogger(__name__).debug("Saved checkpoint with %s tensors to %s", len(bundle.named_tensors()), path)


class _Reader(object):
    def __init__(self, payload):
        self.payload = payload
        self.offset = 0

    def take(self, size, field):
        if self.offset + size > len(self.payload):
            raise DataFormatError("Truncated checkpoint while reading %s" % field)
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt, field):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))


def loads(payload):
    """
    :type payload: bytes
    :rtype: ModelBundle
    """
    reader = _Reader(payload)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise DataFormatError("Not a checkpoint: bad magic")
    version, = reader.unpack("H", "version")
    if version != VERSION:
        raise DataFormatError("Unsupported checkpoint version %s, expected %s" % (version, VERSION))

    length, = reader.unpack("I", "config length")
    try:
        config = json.loads(reader.take(length, "config").decode("utf-8"))
        bundle = ModelBundle.from_config(config)
    except ValueError as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise DataFormatError("Malformed checkpoint config: %s" % exc)

    expected = dict(bundle.named_tensors())
    count, = reader.unpack("I", "tensor count")
    if count != len(expected):
        raise DataFormatError("Checkpoint holds %s tensors, config implies %s" % (count, len(expected)))

    seen = set()
    for _ in range(count):
        name_len, = reader.unpack("H", "tensor name length")
        name = reader.take(name_len, "tensor name").decode("utf-8")
        if name not in expected or name in seen:
            raise DataFormatError("Unexpected tensor in checkpoint: %s" % name)
        seen.add(name)
        ndim, = reader.unpack("B", "ndim of %s" % name)
        shape = reader.unpack("%sI" % ndim, "shape of %s" % name)
        target = expected[name]
        if tuple(shape) != target.shape:
            raise DataFormatError("Shape mismatch for tensor %s: file has %s, config implies %s"
                                  % (name, tuple(shape), target.shape))
        raw = reader.take(8 * target.size, "data of %s" % name)
        target.data[...] = np.frombuffer(raw, dtype="<f8").reshape(shape)

    if reader.offset != len(payload):
        raise DataFormatError("Trailing %s bytes after last tensor" % (len(payload) - reader.offset))
    return bundle


def load_checkpoint(path):
    """
    :type path: str
    :rtype: ModelBundle
    """
    try:
        with open(path, "rb") as fds:
            payload = fds.read()
    except IOError as exc:
        raise ConfigurationError("Cannot read checkpoint %s: %s" % (path, exc))
    bundle = loads(payload)
    logging.getLogger(__name__).debug("Loaded checkpoint %s", path)
    return bundle
