"""Task construction: IDX ingestion, split-task slicing, synthetic tasks.

Split tasks follow the usual benchmark layout: each task is a binary (or
small-K) classification over a disjoint subset of classes, with labels
remapped to the local range [0, D_tau). All inputs live in [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataFormatError
from .seeding import derive_rng

IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_MAGIC = 0x00000803

DEFAULT_SPLIT_PAIRS = ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9))


@dataclass
class TaskBundle:
    """One task's data with locally remapped labels."""

    task_id: int
    classes: Tuple[int, ...]
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_outputs(self) -> int:
        return len(self.classes)

    def __post_init__(self):
        for x in (self.x_train, self.x_test):
            if x.size and (x.min() < 0 or x.max() > 1):
                raise ValueError("task inputs must lie in [0, 1]")
        for y, x in ((self.y_train, self.x_train), (self.y_test, self.x_test)):
            if len(y) != len(x):
                raise ValueError("label/input length mismatch")
            if y.size and (y.min() < 0 or y.max() >= self.n_outputs):
                raise ValueError("labels must be local indices in [0, n_outputs)")


# -- IDX format ---------------------------------------------------------------

def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX byte payload into a uint8 array (big-endian header)."""
    if len(data) < 4:
        raise DataFormatError("idx", "truncated header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != 0x08:
        raise DataFormatError("idx", f"bad magic 0x{magic:08x} (expected ubyte IDX)")
    ndim = magic & 0xFF
    if ndim < 1 or ndim > 3:
        raise DataFormatError("idx", f"unsupported rank {ndim}")
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise DataFormatError("idx", "truncated dimension header")
    shape = struct.unpack(f">{ndim}I", data[4:header_len])
    count = int(np.prod([int(s) for s in shape], dtype=np.int64))
    if count < 0 or count > 1 << 33:
        raise DataFormatError("idx", f"dimension overflow: {shape}")
    payload = data[header_len:]
    if len(payload) != count:
        raise DataFormatError(
            "idx", f"payload length {len(payload)} != expected {count}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def write_idx(array: np.ndarray) -> bytes:
    """Encode a uint8 array back into IDX bytes (inverse of parse_idx)."""
    array = np.asarray(array, dtype=np.uint8)
    if array.ndim < 1 or array.ndim > 3:
        raise DataFormatError("idx", f"unsupported rank {array.ndim}")
    header = struct.pack(">I", 0x0800 | array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.tobytes()


def load_idx_images(data: bytes) -> np.ndarray:
    """Images as (N, rows*cols) float64 in [0, 1]."""
    arr = parse_idx(data)
    if arr.ndim != 3:
        raise DataFormatError("idx", f"expected image magic (rank 3), got rank {arr.ndim}")
    return arr.reshape(arr.shape[0], -1).astype(np.float64) / 255.0


def load_idx_labels(data: bytes) -> np.ndarray:
    arr = parse_idx(data)
    if arr.ndim != 1:
        raise DataFormatError("idx", f"expected label magic (rank 1), got rank {arr.ndim}")
    return arr.astype(np.int64)


# -- split tasks --------------------------------------------------------------

def make_split_tasks(x_train: np.ndarray, y_train: np.ndarray,
                     x_test: np.ndarray, y_test: np.ndarray,
                     class_pairs: Sequence[Sequence[int]] = DEFAULT_SPLIT_PAIRS,
                     max_train_per_task: Optional[int] = None,
                     seed: int = 0) -> List[TaskBundle]:
    """Slice a labelled dataset into disjoint-class tasks with local labels."""
    flat = [c for pair in class_pairs for c in pair]
    if len(set(flat)) != len(flat):
        raise ValueError(f"overlapping class pairs: {class_pairs}")
    bundles = []
    for tau, classes in enumerate(class_pairs):
        classes = tuple(int(c) for c in classes)
        tr = np.isin(y_train, classes)
        te = np.isin(y_test, classes)
        if not tr.any() or not te.any():
            raise ValueError(f"no samples for classes {classes}")
        remap = {c: i for i, c in enumerate(classes)}
        xt, yt = x_train[tr], np.array([remap[c] for c in y_train[tr]])
        if max_train_per_task is not None and len(xt) > max_train_per_task:
            keep = derive_rng(seed, "split-subsample", tau).choice(
                len(xt), size=max_train_per_task, replace=False)
            keep.sort()
            xt, yt = xt[keep], yt[keep]
        bundles.append(TaskBundle(
            task_id=tau, classes=classes,
            x_train=xt, y_train=yt,
            x_test=x_test[te],
            y_test=np.array([remap[c] for c in y_test[te]])))
    return bundles


# -- synthetic tasks ----------------------------------------------------------

@dataclass
class SyntheticSpec:
    """Gaussian-cluster binary tasks with rotating decision boundaries.

    Each task occupies its own region of the shared input square and
    separates its classes along a task-specific direction. Because all
    tasks are scaled jointly into [0, 1], a network trained sequentially
    without regularisation repurposes the same input space for every new
    task and interferes strongly with earlier ones.
    """

    n_tasks: int = 3
    dim: int = 2
    train_per_task: int = 500
    test_per_task: int = 500
    clusters_per_class: int = 1
    class_separation: float = 0.3
    spread: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 1 or self.dim < 2 or self.dim > 16:
            raise ValueError("need n_tasks >= 1 and 2 <= dim <= 16")
        if self.spread <= 0 and self.class_separation <= 0:
            raise ValueError("degenerate spec: coincident centers with zero spread")


REGION_RADIUS = 0.28


def _task_centers(spec: SyntheticSpec, tau: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Per-class cluster centers; classes oppose along a task-specific angle.

    Task regions sit on a circle in the first two input dimensions so that
    tasks are spatially separated before the joint rescaling.
    """
    region_angle = 2.0 * np.pi * tau / spec.n_tasks
    region = np.full(spec.dim, 0.5)
    region[0] += REGION_RADIUS * np.cos(region_angle)
    region[1] += REGION_RADIUS * np.sin(region_angle)
    angle = np.pi * tau / spec.n_tasks + 0.3
    direction = np.zeros(spec.dim)
    direction[0], direction[1] = np.cos(angle), np.sin(angle)
    centers = np.zeros((2, spec.clusters_per_class, spec.dim))
    for cls, sign in enumerate((1.0, -1.0)):
        base = region + sign * 0.5 * spec.class_separation * direction
        jitter = rng.normal(0.0, 0.05 * spec.class_separation,
                            size=(spec.clusters_per_class, spec.dim))
        centers[cls] = base + jitter
    return centers


def _draw_split(spec: SyntheticSpec, centers: np.ndarray, n: int,
                rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    labels = rng.integers(0, 2, size=n)
    clusters = rng.integers(0, spec.clusters_per_class, size=n)
    x = centers[labels, clusters] + rng.normal(0.0, spec.spread, size=(n, spec.dim))
    return x, labels


def make_synthetic_split(spec: SyntheticSpec) -> List[TaskBundle]:
    raw = []
    for tau in range(spec.n_tasks):
        rng = derive_rng(spec.seed, "synthetic", tau)
        centers = _task_centers(spec, tau, rng)
        raw.append((_draw_split(spec, centers, spec.train_per_task, rng),
                    _draw_split(spec, centers, spec.test_per_task, rng)))
    # joint min-max scaling keeps the tasks' relative placement intact
    everything = np.concatenate(
        [x for (x, _), (xt, _) in raw for x in (x, xt)])
    lo, hi = everything.min(axis=0), everything.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    bundles = []
    for tau, ((x_train, y_train), (x_test, y_test)) in enumerate(raw):
        bundles.append(TaskBundle(
            task_id=tau, classes=(2 * tau, 2 * tau + 1),
            x_train=(x_train - lo) / span, y_train=y_train,
            x_test=(x_test - lo) / span, y_test=y_test))
    return bundles


def sample_uniform_context(dim: int, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Uniform[0,1] context inputs (first-task functional prior)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return rng.uniform(0.0, 1.0, size=(count, dim))
