"""Datasets, synthetic generators, file loaders and labeled/unlabeled pools."""

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InputError, StateError

IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_MAGIC = 0x00000803


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.labels) != len(self.features):
            raise InputError("features must be 2-D with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise InputError("labels must lie in [0, num_classes)")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, indices, name=None):
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.features[indices], self.labels[indices], self.num_classes,
                       name or self.name)

    def imbalance_ratio(self):
        counts = np.bincount(self.labels, minlength=self.num_classes)
        counts = counts[counts > 0]
        return counts.max() / counts.min()


def make_blobs(num_classes, counts, dim=2, spread=3.0, noise=1.0, seed=0, clusters_per_class=1):
    """Isotropic Gaussian clusters around distinct centers.

    With one cluster per class the centers sit evenly on a circle of radius
    ``spread`` in the first two coordinates. With several clusters per class
    the ``num_classes * clusters_per_class`` centers fill a square grid of
    pitch ``spread`` and grid cells are dealt to classes in a seeded random
    order, so every class is multi-modal. Extra dimensions get a random
    center offset of scale ``spread / 4``.
    """
    if num_classes < 2:
        raise InputError("need at least two classes")
    counts = [int(c) for c in counts]
    if len(counts) != num_classes or min(counts) < 1:
        raise InputError("one positive count per class required")
    if clusters_per_class < 1:
        raise InputError("clusters_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    n_centers = num_classes * clusters_per_class
    centers = np.zeros((n_centers, dim))
    owner = np.arange(n_centers) % num_classes
    if clusters_per_class == 1:
        angles = 2 * np.pi * np.arange(num_classes) / num_classes
        if dim == 1:
            centers[:, 0] = spread * np.arange(num_classes)
        else:
            centers[:, 0] = spread * np.cos(angles)
            centers[:, 1] = spread * np.sin(angles)
    else:
        side = math.ceil(math.sqrt(n_centers))
        cells = rng.permutation(side * side)[:n_centers]
        centers[:, 0] = spread * (cells % side - (side - 1) / 2)
        if dim > 1:
            centers[:, 1] = spread * (cells // side - (side - 1) / 2)
    if dim > 2:
        centers[:, 2:] = rng.normal(scale=spread / 4, size=(n_centers, dim - 2))

    feats, labels = [], []
    for c, n in enumerate(counts):
        mine = np.flatnonzero(owner == c)
        which = mine[np.arange(n) % len(mine)]
        feats.append(centers[which] + noise * rng.normal(size=(n, dim)))
        labels.append(np.full(n, c))
    x = np.concatenate(feats)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return Dataset(x[order], y[order], num_classes, "blobs")


def make_two_moons(n, noise=0.1, seed=0):
    """Two interleaving unit half-circles; class 0 gets the extra point for odd n."""
    rng = np.random.default_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = np.linspace(0, np.pi, n0)
    t1 = np.linspace(0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.concatenate([upper, lower])
    x = x + noise * rng.normal(size=x.shape)
    y = np.concatenate([np.zeros(n0, int), np.ones(n1, int)])
    order = rng.permutation(n)
    return Dataset(x[order], y[order], 2, "moons")


def _read_idx(path, magic):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise FormatError(f"{path}: file too short for IDX header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise FormatError(f"{path}: truncated dimension header")
    shape = struct.unpack(f">{ndim}I", data[4:header])
    expected = math.prod(shape)
    if len(data) - header != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape)


def load_idx_pair(images_path, labels_path, name="idx"):
    """Read an IDX image/label file pair; images are flattened and scaled to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC).astype(int)
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    feats = images.reshape(len(images), -1).astype(float) / 255.0
    return Dataset(feats, labels, int(labels.max()) + 1 if len(labels) else 0, name)


def load_csv(path, name="csv"):
    """CSV with a header row, a ``label`` column and numeric feature columns."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if "label" not in header:
            raise FormatError(f"{path}: no 'label' column")
        li = header.index("label")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                labels.append(int(row[li]))
                feats.append([float(v) for i, v in enumerate(row) if i != li])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not labels:
        raise FormatError(f"{path}: no data rows")
    labels = np.array(labels)
    return Dataset(np.array(feats), labels, int(labels.max()) + 1, name)


@dataclass(frozen=True)
class SplitPair:
    train: np.ndarray
    validation: np.ndarray


class DataPool:
    """Index bookkeeping for the labeled set L and the unlabeled set U.

    Ground-truth labels are only reachable through :meth:`labels_of`, which
    refuses indices outside L.
    """

    def __init__(self, dataset, labeled):
        self.dataset = dataset
        labeled = [int(i) for i in labeled]
        if len(set(labeled)) != len(labeled):
            raise InputError("duplicate labeled indices")
        self._labeled = labeled
        lab = set(labeled)
        self._unlabeled = [i for i in range(len(dataset)) if i not in lab]

    @property
    def labeled(self):
        return np.array(self._labeled, dtype=int)

    @property
    def unlabeled(self):
        return np.array(self._unlabeled, dtype=int)

    @property
    def n_labeled(self):
        return len(self._labeled)

    @property
    def n_unlabeled(self):
        return len(self._unlabeled)

    def features(self, indices):
        return self.dataset.features[np.asarray(indices, dtype=int)]

    def labels_of(self, indices):
        indices = np.asarray(indices, dtype=int)
        lab = set(self._labeled)
        hidden = [int(i) for i in indices if int(i) not in lab]
        if hidden:
            raise InputError(f"labels of unlabeled indices are not visible: {hidden[:5]}")
        return self.dataset.labels[indices]

    def labeled_data(self):
        idx = self.labeled
        return self.dataset.features[idx], self.dataset.labels[idx]

    def commit(self, indices):
        """Move queried indices from U to L (Q* is revealed)."""
        indices = [int(i) for i in indices]
        if len(set(indices)) != len(indices):
            raise InputError("duplicate indices in query")
        unl = set(self._unlabeled)
        missing = [i for i in indices if i not in unl]
        if missing:
            raise InputError(f"indices not in the unlabeled pool: {missing[:5]}")
        chosen = set(indices)
        self._labeled.extend(indices)
        self._unlabeled = [i for i in self._unlabeled if i not in chosen]
        return self

    def snapshot(self):
        return tuple(self._labeled), tuple(self._unlabeled)

    def standardizer(self):
        """Per-feature mean/std computed on L only."""
        x = self.features(self.labeled)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std < 1e-12] = 1.0
        return mean, std


def init_pool(dataset, seed_size, seed=0, stratified=False):
    n = len(dataset)
    if not 0 < seed_size < n:
        raise InputError(f"seed size must lie in (0, {n})")
    rng = np.random.default_rng(seed)
    if not stratified:
        return DataPool(dataset, rng.choice(n, size=seed_size, replace=False))
    classes = np.unique(dataset.labels)
    per_class = seed_size // len(classes)
    chosen = []
    for c in classes:
        members = np.flatnonzero(dataset.labels == c)
        take = min(per_class, len(members))
        chosen.extend(rng.choice(members, size=take, replace=False).tolist())
    rest = np.setdiff1d(np.arange(n), chosen)
    short = seed_size - len(chosen)
    if short:
        chosen.extend(rng.choice(rest, size=short, replace=False).tolist())
    return DataPool(dataset, chosen)


def split_labeled(pool, rng):
    """Random halving of L into train/validation parts (sizes differ by at most one)."""
    if pool.n_labeled < 2:
        raise StateError("need at least two labeled samples to split")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    perm = rng.permutation(pool.labeled)
    half = (len(perm) + 1) // 2
    return SplitPair(perm[:half], perm[half:])


def commit_query(pool, indices):
    return pool.commit(indices)
