"""Synthetic toy datasets (sine wave, two moons, concentric circles) and a
bit-exact loader for the MNIST/Fashion-MNIST IDX binary format.

All generators are seeded and exactly reproducible; with noise_sd=0 the
points lie exactly on the stated manifolds.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .tensor import tensor


class DataConfigError(ValueError):
    """Invalid generator parameters."""


class IdxParseError(ValueError):
    """An IDX file failed to parse; the message carries the byte offset."""


@dataclass
class Dataset:
    """Feature matrix plus either regression targets or class indices."""

    features: np.ndarray            # (n, d) float64
    targets: np.ndarray | None = None   # (n, c) float64 regression targets
    labels: np.ndarray | None = None    # (n,) int class indices
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    note: str = ""

    def __post_init__(self):
        n = self.features.shape[0]
        if self.targets is not None and self.targets.shape[0] != n:
            raise DataConfigError("target row count does not match features")
        if self.labels is not None and self.labels.shape[0] != n:
            raise DataConfigError("label count does not match features")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def split(self, test_fraction: float, rng: np.random.Generator) -> "Dataset":
        """Attach a seeded disjoint train/test split covering all rows."""
        order = rng.permutation(self.n)
        n_test = int(round(self.n * test_fraction))
        self.test_idx = np.sort(order[:n_test])
        self.train_idx = np.sort(order[n_test:])
        return self


def sample_sine(n: int, x_range=(-np.pi, np.pi), noise_sd: float = 0.0,
                rng: np.random.Generator | None = None) -> Dataset:
    """x uniform on [lo, hi], y = sin(x) + Gaussian(0, noise_sd)."""
    lo, hi = x_range
    if n < 1:
        raise DataConfigError("n must be >= 1")
    if not lo < hi:
        raise DataConfigError(f"invalid x range [{lo}, {hi}]")
    if noise_sd < 0:
        raise DataConfigError("noise_sd must be >= 0")
    if rng is None:
        raise DataConfigError("a seeded rng is required")
    x = rng.uniform(lo, hi, size=(n, 1))
    y = np.sin(x)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, size=y.shape)
    return Dataset(features=tensor(x), targets=tensor(y),
                   note=f"sine n={n} range=[{lo:g},{hi:g}] noise={noise_sd:g}")


def make_moons(n: int, noise_sd: float = 0.0,
               rng: np.random.Generator | None = None) -> Dataset:
    """Two interleaved half-circle arcs.

    Class 0: (cos t, sin t), class 1: (1 - cos t, 0.5 - sin t), t uniform on
    [0, pi]; Gaussian noise of scale noise_sd on both coordinates.
    """
    if n < 2:
        raise DataConfigError("n must be >= 2")
    if rng is None:
        raise DataConfigError("a seeded rng is required")
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = rng.uniform(0.0, np.pi, size=n0)
    t1 = rng.uniform(0.0, np.pi, size=n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([upper, lower])
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    if noise_sd > 0:
        x = x + rng.normal(0.0, noise_sd, size=x.shape)
    return Dataset(features=tensor(x), labels=labels,
                   note=f"moons n={n} noise={noise_sd:g}")


def make_circles(n: int, noise_sd: float = 0.0, factor: float = 0.5,
                 rng: np.random.Generator | None = None) -> Dataset:
    """Outer unit circle (class 0) and inner circle of radius `factor`
    (class 1), angles uniform, Gaussian noise on both coordinates."""
    if n < 2:
        raise DataConfigError("n must be >= 2")
    if not 0.0 < factor < 1.0:
        raise DataConfigError(f"factor must be in (0, 1), got {factor}")
    if rng is None:
        raise DataConfigError("a seeded rng is required")
    n0 = (n + 1) // 2
    n1 = n - n0
    a0 = rng.uniform(0.0, 2.0 * np.pi, size=n0)
    a1 = rng.uniform(0.0, 2.0 * np.pi, size=n1)
    outer = np.column_stack([np.cos(a0), np.sin(a0)])
    inner = factor * np.column_stack([np.cos(a1), np.sin(a1)])
    x = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    if noise_sd > 0:
        x = x + rng.normal(0.0, noise_sd, size=x.shape)
    return Dataset(features=tensor(x), labels=labels,
                   note=f"circles n={n} noise={noise_sd:g} factor={factor:g}")


# ---------------------------------------------------------------------------
# IDX binary format: big-endian, magic 0x00000803 for image files
# (count x rows x cols of unsigned bytes) and 0x00000801 for label files.
# ---------------------------------------------------------------------------

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


def _read_u32(buf: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(buf):
        raise IdxParseError(f"{path}: truncated at byte {offset}, expected 4-byte field")
    return struct.unpack_from(">I", buf, offset)[0]


def _load_idx_images(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_u32(buf, 0, str(path))
    if magic != IDX_IMAGE_MAGIC:
        raise IdxParseError(
            f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_IMAGE_MAGIC:08x}")
    count = _read_u32(buf, 4, str(path))
    rows = _read_u32(buf, 8, str(path))
    cols = _read_u32(buf, 12, str(path))
    expected = 16 + count * rows * cols
    if len(buf) != expected:
        raise IdxParseError(
            f"{path}: size {len(buf)} bytes, expected {expected} "
            f"(truncated after byte {min(len(buf), expected)})")
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols)


def _load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_u32(buf, 0, str(path))
    if magic != IDX_LABEL_MAGIC:
        raise IdxParseError(
            f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_LABEL_MAGIC:08x}")
    count = _read_u32(buf, 4, str(path))
    if len(buf) != 8 + count:
        raise IdxParseError(
            f"{path}: size {len(buf)} bytes, expected {8 + count} "
            f"(truncated after byte {min(len(buf), 8 + count)})")
    return np.frombuffer(buf, dtype=np.uint8, offset=8).astype(np.int64)


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair; pixels scaled to [0, 1], images
    flattened row-major."""
    images = _load_idx_images(images_path)
    labels = _load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxParseError(
            f"item count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels")
    features = images.astype(np.float64) / 255.0
    digest = hashlib.sha256()
    with open(images_path, "rb") as f:
        digest.update(f.read())
    return Dataset(features=tensor(features), labels=labels,
                   note=f"idx sha256={digest.hexdigest()[:16]}")


def write_idx_images(path, images: np.ndarray):
    """Write (n, rows, cols) or (n, rows*cols) uint8 pixels as an IDX image
    file; used for fixtures and round-trip checks."""
    arr = np.asarray(images, dtype=np.uint8)
    if arr.ndim == 2:
        side = int(round(np.sqrt(arr.shape[1])))
        if side * side != arr.shape[1]:
            raise DataConfigError("flattened images must be square")
        arr = arr.reshape(arr.shape[0], side, side)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, arr.shape[0], arr.shape[1], arr.shape[2]))
        f.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, arr.shape[0]))
        f.write(arr.tobytes())


def subsample(ds: Dataset, n_train: int, n_test: int, stratified: bool = False,
              rng: np.random.Generator | None = None) -> Dataset:
    """Seeded subset of `ds` with a recorded train/test split.

    With stratified=True the per-class proportions of `ds` are preserved in
    both partitions (requires class labels).
    """
    if rng is None:
        raise DataConfigError("a seeded rng is required")
    if n_train + n_test > ds.n:
        raise DataConfigError(
            f"requested {n_train}+{n_test} rows but dataset has {ds.n}")
    if stratified:
        if ds.labels is None:
            raise DataConfigError("stratified subsample requires class labels")
        train_parts, test_parts = [], []
        classes = np.unique(ds.labels)
        remaining_train, remaining_test = n_train, n_test
        for i, cls in enumerate(classes):
            cls_idx = np.flatnonzero(ds.labels == cls)
            cls_idx = cls_idx[rng.permutation(len(cls_idx))]
            left = len(classes) - i
            take_train = remaining_train // left
            take_test = remaining_test // left
            train_parts.append(cls_idx[:take_train])
            test_parts.append(cls_idx[take_train:take_train + take_test])
            remaining_train -= take_train
            remaining_test -= take_test
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        order = rng.permutation(ds.n)
        train_idx = np.sort(order[:n_train])
        test_idx = np.sort(order[n_train:n_train + n_test])
    keep = np.concatenate([train_idx, test_idx])
    remap = {old: new for new, old in enumerate(keep)}
    out = Dataset(
        features=ds.features[keep].copy(),
        targets=ds.targets[keep].copy() if ds.targets is not None else None,
        labels=ds.labels[keep].copy() if ds.labels is not None else None,
        train_idx=np.array([remap[i] for i in train_idx], dtype=np.int64),
        test_idx=np.array([remap[i] for i in test_idx], dtype=np.int64),
        note=ds.note + f" | subsample train={n_train} test={n_test} stratified={stratified}",
    )
    return out
