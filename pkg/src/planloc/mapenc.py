"""Map encoding: class embeddings and raster -> feature map + location prior.

An encoder maps (embedded grid, raster) to a NeuralMap: an unnormalized
W x H x N feature grid F plus a per-cell location prior omega (large
negative where a camera cannot be, 0 elsewhere). The analytic encoder
computes truncated distance fields per class, so the full pipeline is
testable without any trained weights; externally trained encoders
interoperate through the PLNM exchange format.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import formats
from .errors import ConfigurationError, FormatError
from .geometry import GridSpec
from .osm.classes import KIND_AREA, KIND_LINE, KIND_NODE, ClassTable, load_class_table
from .raster import MapRaster

OMEGA_PENALTY = -1.0e4


@dataclass
class Embeddings:
    """Per-channel class embedding tables; index 0 (void) is all zero."""

    tables: list  # three arrays (class_count, N)

    def __post_init__(self):
        if len(self.tables) != 3:
            raise ConfigurationError("need one embedding table per raster channel")
        self.tables = [np.asarray(t, dtype=np.float64) for t in self.tables]
        n = {t.shape[1] for t in self.tables}
        if len(n) != 1:
            raise ConfigurationError("embedding tables disagree on channel count")
        for t in self.tables:
            if np.any(t[0] != 0.0):
                raise ConfigurationError("void (index 0) must embed to the zero vector")

    @property
    def n(self) -> int:
        return self.tables[0].shape[1]


def random_embeddings(class_counts, n: int, seed: int = 0) -> Embeddings:
    """Seeded unit-norm embeddings (void rows zero)."""
    rng = np.random.default_rng(seed)
    tables = []
    for count in class_counts:
        t = rng.standard_normal((count, n))
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        t[0] = 0.0
        tables.append(t)
    return Embeddings(tables)


def embed_classes(raster: MapRaster, emb: Embeddings) -> np.ndarray:
    """Concatenate per-channel class embeddings into a (H, W, 3N) grid."""
    planes = []
    for ch in range(3):
        table = emb.tables[ch]
        idx = raster.channels[ch]
        if idx.max(initial=0) >= table.shape[0]:
            raise ConfigurationError(
                f"channel {ch} contains class index {int(idx.max())} "
                f"but its embedding table has {table.shape[0]} rows"
            )
        planes.append(table[idx])
    return np.concatenate(planes, axis=-1)


@dataclass
class NeuralMap:
    F: np.ndarray  # (H, W, N) float32
    omega: np.ndarray  # (H, W) float32
    spec: GridSpec

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=np.float32)
        self.omega = np.asarray(self.omega, dtype=np.float32)
        shape = (self.spec.height, self.spec.width)
        if self.F.shape[:2] != shape or self.omega.shape != shape:
            raise FormatError("neural map arrays do not match the grid spec")
        if not (np.all(np.isfinite(self.F)) and np.all(np.isfinite(self.omega))):
            raise FormatError("neural map contains non-finite values")

    @property
    def n(self) -> int:
        return self.F.shape[2]


@dataclass
class AnalyticEncoderParams:
    n: int = 8
    rho_m: float = 4.0
    seed: int = 0
    projection: str = "orthonormal"  # or "identity"
    omega_penalty: float = OMEGA_PENALTY
    blocked_area_classes: tuple = ("building", "water")


def _distance_stack(raster: MapRaster, class_counts, rho_m: float) -> np.ndarray:
    """Truncated distance features, one plane per (channel, class)."""
    delta = raster.spec.delta
    planes = []
    for ch in range(3):
        for cls in range(1, class_counts[ch]):
            mask = raster.channels[ch] == cls
            if mask.any():
                dist = distance_transform_edt(~mask) * delta
                planes.append(np.maximum(0.0, 1.0 - dist / rho_m))
            else:
                planes.append(np.zeros(raster.spec.shape))
    return np.stack(planes, axis=-1)


def encode_analytic(embedded: Optional[np.ndarray], raster: MapRaster,
                    params: Optional[AnalyticEncoderParams] = None,
                    table: Optional[ClassTable] = None) -> NeuralMap:
    """Distance-field encoder.

    Per nonzero class: Euclidean distance transform to the nearest cell of
    that class, truncated at rho and mapped to [0,1] as 1 - dist/rho. The
    per-class stack is projected to n channels by a seeded random
    orthonormal matrix ("identity" keeps the stack, requiring n = class
    count). The embedded grid is accepted for interface compatibility with
    learned encoders; this encoder derives everything from the raster.
    """
    params = params or AnalyticEncoderParams()
    table = table or load_class_table()
    class_counts = tuple(table.class_count(k) for k in (KIND_AREA, KIND_LINE, KIND_NODE))
    stack = _distance_stack(raster, class_counts, params.rho_m)
    n_classes = stack.shape[-1]
    if params.projection == "identity":
        if params.n != n_classes:
            raise ConfigurationError(
                f"identity projection needs n == {n_classes}, got {params.n}"
            )
        F = stack
    elif params.projection == "orthonormal":
        rng = np.random.default_rng(params.seed)
        gauss = rng.standard_normal((n_classes, n_classes))
        q, _ = np.linalg.qr(gauss)
        F = stack @ q[:, : params.n]
    else:
        raise ConfigurationError(f"unknown projection {params.projection!r}")

    omega = np.zeros(raster.spec.shape)
    for name in params.blocked_area_classes:
        idx = table.class_index(KIND_AREA, name)
        omega[raster.channels[0] == idx] = params.omega_penalty

    return NeuralMap(F.astype(np.float32), omega.astype(np.float32), raster.spec)


def save_neural_map(nmap: NeuralMap, f):
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "wb")
        close = True
    try:
        formats.write_magic(f, formats.MAGIC_NEURAL_MAP)
        formats.write_grid_spec(f, nmap.spec)
        formats.pack_values(f, "I", nmap.n)
        formats.write_array(f, nmap.F, "<f4")
        formats.write_array(f, nmap.omega, "<f4")
    finally:
        if close:
            f.close()


def load_neural_map(f) -> NeuralMap:
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "rb")
        close = True
    try:
        formats.read_magic(f, formats.MAGIC_NEURAL_MAP)
        spec = formats.read_grid_spec(f)
        (n,) = formats.unpack_values(f, "I")
        if n < 1:
            raise FormatError(f"invalid channel count {n}")
        F = formats.read_array(f, (spec.height, spec.width, n), "<f4")
        omega = formats.read_array(f, (spec.height, spec.width), "<f4")
        return NeuralMap(F, omega, spec)
    finally:
        if close:
            f.close()
