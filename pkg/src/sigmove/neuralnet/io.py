"""Model files.

Layout::

    SIGMOVE-NN 1\\n
    <one-line JSON header: kind, input_window, units, kernel_size, dropout,
     seed, arrays=[[name, shape], ...] in declared order>\\n
    <every array as little-endian float64, C order, concatenated>

Round trips are bit-exact.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .network import NetworkSpec, Params

MAGIC = b"SIGMOVE-NN 1\n"


def save_network(spec: NetworkSpec, params: Params, path) -> None:
    header = {
        "kind": spec.kind,
        "input_window": spec.input_window,
        "units": list(spec.units),
        "kernel_size": spec.kernel_size,
        "dropout": spec.dropout,
        "seed": params.seed,
        "arrays": [[name, list(a.shape)] for name, a in params.arrays.items()],
    }
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        for a in params.arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_network(path) -> tuple[NetworkSpec, Params]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not a network file")
    rest = raw[len(MAGIC):]
    line_end = rest.index(b"\n")
    header = json.loads(rest[:line_end])
    body = rest[line_end + 1:]
    spec = NetworkSpec(header["kind"], header["input_window"], tuple(header["units"]),
                       header["kernel_size"], header["dropout"])
    arrays = {}
    offset = 0
    for name, shape in header["arrays"]:
        size = math.prod(shape)
        chunk = body[offset:offset + 8 * size]
        if len(chunk) != 8 * size:
            raise ValueError(f"{path}: truncated at array {name}")
        arrays[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        offset += 8 * size
    if offset != len(body):
        raise ValueError(f"{path}: {len(body) - offset} trailing bytes")
    expected = spec.param_shapes()
    if {k: tuple(v.shape) for k, v in arrays.items()} != expected:
        raise ValueError(f"{path}: arrays do not match a {spec.kind} network")
    return spec, Params(arrays, header["seed"])
