"""Low-level helpers for the binary artifact formats.

All formats share the layout: 4-byte magic, little-endian u16 version, a
fixed header, then a raw C-order payload. Numeric fields are little-endian;
floats are IEEE 754. Round-trips are bit-exact because payloads are stored
in their in-file dtype verbatim.
"""

import struct

import numpy as np

from .errors import FormatError
from .geometry import Datum, GridSpec

MAGIC_TILE = b"PLTL"
MAGIC_NEURAL_MAP = b"PLNM"
MAGIC_POSE_VOLUME = b"PLPV"
MAGIC_COLUMN_FEATURES = b"PLCF"
MAGIC_BEV = b"PLBV"

FORMAT_VERSION = 1


def read_exact(f, n):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated stream: expected {n - len(data)} more bytes")
    return data


def write_magic(f, magic):
    f.write(magic)
    f.write(struct.pack("<H", FORMAT_VERSION))


def read_magic(f, expected):
    magic = read_exact(f, 4)
    if magic != expected:
        raise FormatError(f"bad magic {magic!r}, expected {expected!r}")
    (version,) = struct.unpack("<H", read_exact(f, 2))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    return version


def pack_values(f, fmt, *values):
    f.write(struct.pack("<" + fmt, *values))


def unpack_values(f, fmt):
    size = struct.calcsize("<" + fmt)
    return struct.unpack("<" + fmt, read_exact(f, size))


def write_grid_spec(f, spec):
    pack_values(f, "dddII", spec.origin_x, spec.origin_y, spec.delta, spec.width, spec.height)


def read_grid_spec(f):
    ox, oy, delta, w, h = unpack_values(f, "dddII")
    return GridSpec(ox, oy, delta, w, h)


def write_datum(f, datum):
    if datum is None:
        pack_values(f, "Bdd", 0, 0.0, 0.0)
    else:
        pack_values(f, "Bdd", 1, datum.lon0, datum.lat0)


def read_datum(f):
    present, lon0, lat0 = unpack_values(f, "Bdd")
    return Datum(lon0, lat0) if present else None


def write_array(f, arr, dtype):
    f.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_array(f, shape, dtype):
    count = int(np.prod(shape))
    nbytes = count * np.dtype(dtype).itemsize
    data = read_exact(f, nbytes)
    return np.frombuffer(data, dtype=dtype, count=count).reshape(shape).copy()
