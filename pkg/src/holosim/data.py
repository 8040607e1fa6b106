"""Datasets: container, synthetic generators, IDX-format ingestion, and the
three partition regimes (IID, EqNIID, UEqNIID) used to shard data across
terminal holons.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np


class PartitionError(ValueError):
    """Requested partition cannot be satisfied by the source dataset."""


class IdxFormatError(ValueError):
    """IDX file is malformed (bad magic, truncated, or inconsistent counts)."""


@dataclass
class Dataset:
    """Feature matrix plus aligned labels. Labels are floats for regression
    targets and integer class indices for classification."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: Optional[int] = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        self.labels = np.asarray(self.labels)
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        if self.num_classes is not None:
            labels = self.labels.astype(np.int64)
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ValueError("class labels out of range")
            self.labels = labels

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


# ---------------------------------------------------------------------------
# Partition schemes


@dataclass(frozen=True)
class IID:
    """Uniform random shards of near-equal size (sizes differ by at most 1)."""


@dataclass(frozen=True)
class EqNIID:
    """Equal-size shards restricted to a fixed number of class labels each."""

    labels_per_holon: int
    samples_per_holon: int


@dataclass(frozen=True)
class UEqNIID:
    """Unequal-size shards sliced contiguously from the label-sorted dataset."""

    profile: tuple[int, ...]


PartitionScheme = Union[IID, EqNIID, UEqNIID]


def linear_profile(n_holons: int, total: int) -> tuple[int, ...]:
    """Linearly increasing shard sizes that sum to `total`, each at least 1."""
    if n_holons < 1 or total < n_holons:
        raise PartitionError(f"cannot spread {total} samples over {n_holons} holons")
    raw = np.arange(1, n_holons + 1, dtype=np.float64)
    sizes = np.maximum(1, np.floor(raw / raw.sum() * total).astype(int))
    # Distribute the rounding remainder to the largest shards.
    leftover = total - int(sizes.sum())
    for i in range(abs(leftover)):
        sizes[-(i % n_holons) - 1] += 1 if leftover > 0 else -1
    return tuple(int(s) for s in sizes)


def _partition_iid(data: Dataset, n_holons: int, rng: np.random.Generator) -> list[Dataset]:
    if len(data) < n_holons:
        raise PartitionError(f"{len(data)} samples cannot fill {n_holons} shards")
    perm = rng.permutation(len(data))
    return [data.subset(np.sort(chunk)) for chunk in np.array_split(perm, n_holons)]


def _partition_eqniid(
    data: Dataset, scheme: EqNIID, n_holons: int, rng: np.random.Generator
) -> list[Dataset]:
    labels = data.labels.astype(np.int64)
    num_classes = data.num_classes if data.num_classes is not None else int(labels.max()) + 1
    if scheme.labels_per_holon < 1 or scheme.labels_per_holon > num_classes:
        raise PartitionError(
            f"labels_per_holon={scheme.labels_per_holon} outside [1, {num_classes}]"
        )
    # Deal sorted labels round-robin so coverage across holons is maximal.
    assignments = [
        [(h * scheme.labels_per_holon + j) % num_classes for j in range(scheme.labels_per_holon)]
        for h in range(n_holons)
    ]
    pools = {
        c: list(rng.permutation(np.flatnonzero(labels == c))) for c in range(num_classes)
    }
    base = scheme.samples_per_holon // scheme.labels_per_holon
    extra = scheme.samples_per_holon % scheme.labels_per_holon
    shards = []
    for h, classes in enumerate(assignments):
        take: list[int] = []
        for j, c in enumerate(classes):
            want = base + (1 if j < extra else 0)
            pool = pools[c]
            if len(pool) < want:
                raise PartitionError(
                    f"class {c} exhausted: holon {h} wants {want}, {len(pool)} left"
                )
            take.extend(int(pool.pop()) for _ in range(want))
        shards.append(data.subset(np.sort(np.asarray(take, dtype=np.int64))))
    return shards


def _partition_ueqniid(
    data: Dataset, scheme: UEqNIID, n_holons: int
) -> list[Dataset]:
    if len(scheme.profile) != n_holons:
        raise PartitionError(
            f"size profile has {len(scheme.profile)} entries for {n_holons} holons"
        )
    if any(s < 1 for s in scheme.profile):
        raise PartitionError("every shard size in the profile must be >= 1")
    total = sum(scheme.profile)
    if total > len(data):
        raise PartitionError(f"profile needs {total} samples, dataset has {len(data)}")
    order = np.argsort(data.labels, kind="stable")
    shards = []
    offset = 0
    for size in scheme.profile:
        shards.append(data.subset(order[offset : offset + size]))
        offset += size
    return shards


def partition(
    data: Dataset,
    scheme: PartitionScheme,
    n_holons: int,
    rng: np.random.Generator,
) -> list[Dataset]:
    """Split `data` into `n_holons` pairwise-disjoint shards.

    Shards are drawn without replacement; leftover samples are discarded.
    Deterministic for a fixed generator state.
    """
    if n_holons < 1:
        raise PartitionError("n_holons must be >= 1")
    if isinstance(scheme, IID):
        return _partition_iid(data, n_holons, rng)
    if isinstance(scheme, EqNIID):
        return _partition_eqniid(data, scheme, n_holons, rng)
    if isinstance(scheme, UEqNIID):
        return _partition_ueqniid(data, scheme, n_holons)
    raise TypeError(f"unknown partition scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Synthetic data


def synthetic_dataset(
    kind: str,
    n: int,
    dim: int,
    rng: np.random.Generator,
    noise: float = 0.0,
    num_classes: int = 3,
    center_spread: float = 4.0,
) -> tuple[Dataset, np.ndarray]:
    """Generate a synthetic dataset plus its ground truth.

    regression: y = w.x + b + noise, returns the flat true parameters
    [w..., b] (the layout a linear model trains).
    classification: balanced Gaussian blobs, returns the (num_classes, dim)
    center matrix.
    """
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    if kind == "regression":
        true = rng.normal(size=dim + 1)
        x = rng.normal(size=(n, dim))
        y = x @ true[:dim] + true[dim]
        if noise > 0:
            y = y + noise * rng.normal(size=n)
        return Dataset(x, y), true
    if kind == "classification":
        centers = center_spread * rng.normal(size=(num_classes, dim))
        reps = -(-n // num_classes)
        labels = np.tile(np.arange(num_classes), reps)[:n]
        rng.shuffle(labels)
        x = centers[labels] + rng.normal(size=(n, dim))
        return Dataset(x, labels, num_classes=num_classes), centers
    raise ValueError(f"unknown synthetic kind {kind!r}")


def split_dataset(
    data: Dataset, test_fraction: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Random train/test split; the test shard gets floor(n * test_fraction)."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must be in [0, 1)")
    n_test = int(len(data) * test_fraction)
    perm = rng.permutation(len(data))
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


# ---------------------------------------------------------------------------
# IDX ingestion (MNIST-style binary files)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


def _read_header(buf: bytes, n_fields: int, path: str) -> tuple[int, ...]:
    need = 4 * n_fields
    if len(buf) < need:
        raise IdxFormatError(f"{path}: truncated header ({len(buf)} bytes, need {need})")
    return struct.unpack(f">{n_fields}I", buf[:need])


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path]) -> Dataset:
    """Load an IDX image/label file pair into a flat-feature dataset.

    Pixels are scaled to [0, 1]; labels are digits 0 to 9.
    """
    images_path, labels_path = str(images_path), str(labels_path)
    img_buf = Path(images_path).read_bytes()
    magic, count, rows, cols = _read_header(img_buf, 4, images_path)
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")
    body = img_buf[16:]
    if len(body) != count * rows * cols:
        raise IdxFormatError(
            f"{images_path}: truncated pixel data ({len(body)} bytes for {count}x{rows}x{cols})"
        )
    features = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols) / 255.0

    lbl_buf = Path(labels_path).read_bytes()
    lbl_magic, lbl_count = _read_header(lbl_buf, 2, labels_path)
    if lbl_magic != IDX_LABEL_MAGIC:
        raise IdxFormatError(f"{labels_path}: bad magic 0x{lbl_magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}")
    lbl_body = lbl_buf[8:]
    if len(lbl_body) != lbl_count:
        raise IdxFormatError(f"{labels_path}: truncated label data ({len(lbl_body)} of {lbl_count})")
    if lbl_count != count:
        raise IdxFormatError(f"image/label count mismatch: {count} images, {lbl_count} labels")
    labels = np.frombuffer(lbl_body, dtype=np.uint8).astype(np.int64)
    return Dataset(features, labels, num_classes=10)


def digits_dataset() -> Dataset:
    """The small 8x8 handwritten-digit set (1797 samples), scaled to [0, 1]."""
    from sklearn.datasets import load_digits

    raw = load_digits()
    return Dataset(raw.data / 16.0, raw.target.astype(np.int64), num_classes=10)
