"""Binary checkpoint format for trained networks.

Layout: magic "DANW", eleven little-endian int32 config fields, the
parameter count, then per parameter: name length + utf-8 name, ndim +
dims (int32), and the values as little-endian float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .networks import DAN, DanConfig

__all__ = ["save_checkpoint", "load_checkpoint"]

_MAGIC = b"DANW"
_CONFIG_FIELDS = (
    "scale",
    "iterations",
    "m",
    "img_channels",
    "est_blocks",
    "est_basic",
    "est_cond",
    "res_blocks",
    "res_basic",
    "res_cond",
    "attention_reduction",
)


def save_checkpoint(dan: DAN, path: str) -> None:
    params = dan.named_parameters()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<11i", *(getattr(dan.cfg, f) for f in _CONFIG_FIELDS)))
        fh.write(struct.pack("<i", len(params)))
        for name, p in params:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<i", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<i", p.data.ndim))
            fh.write(struct.pack(f"<{p.data.ndim}i", *p.data.shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path: str, dtype=np.float64) -> DAN:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise IOError(f"{path!r}: not a checkpoint file (bad magic)")
        values = struct.unpack("<11i", fh.read(44))
        cfg = DanConfig(**dict(zip(_CONFIG_FIELDS, values)))
        (count,) = struct.unpack("<i", fh.read(4))
        dan = DAN(cfg, rng=0, dtype=dtype)
        params = dict(dan.named_parameters())
        if count != len(params):
            raise IOError(f"{path!r}: has {count} parameters, model expects {len(params)}")
        for _ in range(count):
            (name_len,) = struct.unpack("<i", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<i", fh.read(4))
            shape = struct.unpack(f"<{ndim}i", fh.read(4 * ndim))
            blob = np.frombuffer(fh.read(8 * int(np.prod(shape))), dtype="<f8")
            if name not in params:
                raise IOError(f"{path!r}: unknown parameter {name!r}")
            if tuple(params[name].data.shape) != shape:
                raise IOError(
                    f"{path!r}: parameter {name!r} has shape {shape}, "
                    f"model expects {params[name].data.shape}"
                )
            params[name].data = blob.reshape(shape).astype(dtype)
    return dan
