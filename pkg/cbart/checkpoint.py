# Checkpoint file format
# Copyright (C) 2026 cbart contributors
#
#    This program is free software; you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation; either version 2 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program; if not, write to the Free Software
#    Foundation, Inc., 51 Franklin St, Fifth Floor, Boston, MA  02110-1301 USA

"""Little-endian layout::

    "CBK1"  u8 version  u32 count
    count x ( u16 namelen, name, u8 rank, u32 dims[rank], payload )
    u64 FNV-1a of every preceding byte

Tensors carry row-major float32 payloads. The pseudo tensor "__meta__"
has rank 1, its single dimension is the byte length of the UTF-8 JSON
metadata that follows as payload."""

import io
import json
import os
import struct
from collections import OrderedDict
from sys import exc_info

import numpy as np
import six
import torch

from cbart.error import CbartError

MAGIC = b"CBK1"
cur_version = 1
META_NAME = "__meta__"

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
_MASK64 = 0xffffffffffffffff


def fnv1a64(data, h=FNV_OFFSET):
    """Byte at a time in the interpreter, roughly a fifth of a second per
    megabyte: a 50k word base size model spends seconds here on every
    save and load."""

    for byte in bytearray(data):
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def _tensor_record(name, array):
    encoded = name.encode('utf-8')
    out = [struct.pack('<H', len(encoded)), encoded,
           struct.pack('<B', array.ndim)]
    out.append(struct.pack('<%dI'% array.ndim, *array.shape))
    out.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(out)


def dumps(params, meta):
    """Serialize an ordered name -> tensor mapping and a JSON-able dict."""

    meta_bytes = json.dumps(meta, sort_keys=True).encode('utf-8')
    chunks = [MAGIC, struct.pack('<BI', cur_version, len(params) + 1)]
    encoded = META_NAME.encode('utf-8')
    chunks.append(struct.pack('<H', len(encoded)) + encoded +
                  struct.pack('<BI', 1, len(meta_bytes)) + meta_bytes)
    for name, tensor in params.items():
        if name == META_NAME:
            raise CbartError("'%s' is a reserved tensor name"% META_NAME,
                             CbartError.ERROR.RUNTIME)
        array = tensor.detach().cpu().numpy() if torch.is_tensor(tensor) \
            else np.asarray(tensor)
        chunks.append(_tensor_record(name, array))
    body = b''.join(chunks)
    return body + struct.pack('<Q', fnv1a64(body))


class _Reader(object):
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CbartError("truncated checkpoint", CbartError.ERROR.RUNTIME)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data):
    """:returns: (OrderedDict name -> float32 tensor, meta dict)"""

    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CbartError("bad checkpoint magic", CbartError.ERROR.RUNTIME)
    reader = _Reader(data)
    reader.take(len(MAGIC))
    version, = reader.unpack('<B')
    if version != cur_version:
        raise CbartError("unsupported version %d"% version,
                         CbartError.ERROR.RUNTIME)
    count, = reader.unpack('<I')
    params = OrderedDict()
    meta = None
    for _ in range(count):
        namelen, = reader.unpack('<H')
        try:
            name = reader.take(namelen).decode('utf-8')
        except UnicodeDecodeError as e:
            six.reraise(CbartError,
                        CbartError("corrupt checkpoint tensor name: %s"% e,
                                   CbartError.ERROR.RUNTIME),
                        exc_info()[2])
        rank, = reader.unpack('<B')
        dims = reader.unpack('<%dI'% rank) if rank else ()
        if name == META_NAME:
            try:
                meta = json.loads(reader.take(dims[0]).decode('utf-8'))
            except (ValueError, IndexError) as e:
                six.reraise(CbartError,
                            CbartError("corrupt checkpoint metadata: %s"% e,
                                       CbartError.ERROR.RUNTIME),
                            exc_info()[2])
            continue
        n = 1
        for d in dims:
            n *= d
        array = np.frombuffer(reader.take(4 * n), dtype='<f4').reshape(dims)
        params[name] = torch.from_numpy(array.astype(np.float32))
    stored, = reader.unpack('<Q')
    if reader.pos != len(data):
        raise CbartError("trailing bytes after checkpoint checksum",
                         CbartError.ERROR.RUNTIME)
    if stored != fnv1a64(data[:reader.pos - 8]):
        raise CbartError("checkpoint checksum mismatch",
                         CbartError.ERROR.RUNTIME)
    return params, meta or {}


def save_checkpoint(path, params, meta):
    """Write atomically: a temporary file renamed over path."""

    data = dumps(params, meta)
    tmp = "%s.tmp"% path
    try:
        with io.open(tmp, 'wb') as fd:
            fd.write(data)
        os.replace(tmp, path)
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not write checkpoint '%s': %s"%
                               (path, e), CbartError.ERROR.RUNTIME),
                    exc_info()[2])
    return path


def load_checkpoint(path):
    try:
        with io.open(path, 'rb') as fd:
            data = fd.read()
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read checkpoint '%s': %s"%
                               (path, e), CbartError.ERROR.RUNTIME),
                    exc_info()[2])
    return loads(data)
