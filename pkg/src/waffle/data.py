"""Datasets and the non-IID partitions used by the benchmark.

Each benchmark distribution is a ten-entry label-share template. Agent ``i``
receives the template cyclically shifted right ``i`` times, so with
distribution B agent 0 holds labels 0-3, agent 1 labels 1-4 and so on.
Concept shift relabels every non-Alice agent through its own random
permutation of the classes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .params import MiniBatch

NUM_LABELS = 10

TEMPLATES: dict[str, tuple[float, ...]] = {
    "A": (0.1,) * 10,
    "B": (0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    "C": (0.0, 0.0, 0.0, 0.1, 0.2, 0.4, 0.2, 0.1, 0.0, 0.0),
}
# concept-shifted variants reuse the label-skew template of their base
DISTRIBUTIONS: dict[str, tuple[tuple[float, ...], bool]] = {
    "A": (TEMPLATES["A"], False),
    "B": (TEMPLATES["B"], False),
    "C": (TEMPLATES["C"], False),
    "A_star": (TEMPLATES["A"], True),
    "B_star": (TEMPLATES["B"], True),
}


class IDXFormatError(ValueError):
    pass


class TruncatedIDXError(IDXFormatError):
    pass


class CountMismatchError(IDXFormatError):
    pass


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int = NUM_LABELS

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != labels.shape[0]:
            raise ValueError("features/labels row counts differ")
        if labels.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def as_batch(self) -> MiniBatch:
        return MiniBatch(self.features, self.labels)

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)

    def label_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class PartitionSpec:
    proportions: tuple[float, ...]
    num_agents: int = 10
    alice_index: int = 0
    concept_shift: bool = False
    seed: int = 0
    samples_per_agent: int = 100
    test_fraction: float = 0.2

    def __post_init__(self):
        props = tuple(float(p) for p in self.proportions)
        object.__setattr__(self, "proportions", props)
        if len(props) != NUM_LABELS:
            raise ValueError(f"proportions must have {NUM_LABELS} entries, got {len(props)}")
        if any(p < 0 for p in props) or abs(sum(props) - 1.0) > 1e-9:
            raise ValueError("proportions must be non-negative and sum to 1")
        if self.num_agents < 1:
            raise ValueError("num_agents must be positive")
        if not 0 <= self.alice_index < self.num_agents:
            raise ValueError("alice_index must lie in [0, num_agents)")
        if self.samples_per_agent < 1:
            raise ValueError("samples_per_agent must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")

    @classmethod
    def named(cls, name: str, **kwargs) -> "PartitionSpec":
        try:
            props, shifted = DISTRIBUTIONS[name]
        except KeyError:
            raise ValueError(
                f"unknown distribution {name!r}; expected one of {sorted(DISTRIBUTIONS)}"
            ) from None
        return cls(proportions=props, concept_shift=shifted, **kwargs)

    def agent_proportions(self, agent: int) -> np.ndarray:
        return np.roll(np.asarray(self.proportions), agent)


@dataclass(frozen=True)
class AgentDataBundle:
    train: LabeledDataset
    test: LabeledDataset
    label_permutation: tuple[int, ...] = field(default_factory=lambda: tuple(range(NUM_LABELS)))
    # row indices into the source dataset, kept for conservation checks
    source_rows: np.ndarray | None = None


def generate_synthetic(
    num_classes: int = NUM_LABELS,
    input_dim: int = 8,
    per_class: int = 100,
    spread: float = 0.5,
    seed: int = 0,
) -> LabeledDataset:
    """Balanced isotropic Gaussian blobs, one standard-normal mean per class."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if spread <= 0:
        raise ValueError("spread must be > 0")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_classes, input_dim))
    labels = np.repeat(np.arange(num_classes), per_class)
    noise = rng.standard_normal((labels.shape[0], input_dim))
    return LabeledDataset(means[labels] + spread * noise, labels, num_classes)


def _apportion(shares: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of ``shares * total`` to integers summing to ``total``."""
    raw = shares * total
    counts = np.floor(raw + 1e-9).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        remainders = raw - counts
        # stable sort keeps ties deterministic (lowest class first)
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    return counts


def partition_by_shift(data: LabeledDataset, spec: PartitionSpec) -> list[AgentDataBundle]:
    if data.num_classes != NUM_LABELS:
        raise PartitionError(f"shift partitioning needs {NUM_LABELS} classes, got {data.num_classes}")
    rng = np.random.default_rng(spec.seed)
    pools = []
    for k in range(NUM_LABELS):
        rows = np.flatnonzero(data.labels == k)
        pools.append(rng.permutation(rows))

    wanted = np.stack(
        [_apportion(spec.agent_proportions(i), spec.samples_per_agent) for i in range(spec.num_agents)]
    )
    available = np.array([len(p) for p in pools])
    need = wanted.sum(axis=0)
    for k in range(NUM_LABELS):
        if need[k] > available[k]:
            raise PartitionError(
                f"class {k}: agents request {need[k]} rows but only {available[k]} are available"
            )

    cursor = np.zeros(NUM_LABELS, dtype=np.int64)
    bundles = []
    for i in range(spec.num_agents):
        train_rows, test_rows = [], []
        for k in range(NUM_LABELS):
            n = wanted[i, k]
            if n == 0:
                continue
            take = pools[k][cursor[k] : cursor[k] + n]
            cursor[k] += n
            n_test = int(np.floor(n * spec.test_fraction + 0.5))
            if n > 1:
                n_test = min(max(n_test, 0), n - 1)
            test_rows.append(take[:n_test])
            train_rows.append(take[n_test:])
        train_idx = np.concatenate(train_rows) if train_rows else np.array([], dtype=np.int64)
        test_idx = np.concatenate(test_rows) if test_rows else np.array([], dtype=np.int64)
        if train_idx.size == 0 or test_idx.size == 0:
            raise PartitionError(
                f"agent {i} would receive an empty train or test split; raise samples_per_agent"
            )
        bundles.append(
            AgentDataBundle(
                train=data.subset(train_idx),
                test=data.subset(test_idx),
                source_rows=np.concatenate([train_idx, test_idx]),
            )
        )
    return bundles


def _relabel(ds: LabeledDataset, perm: np.ndarray) -> LabeledDataset:
    return LabeledDataset(ds.features, perm[ds.labels], ds.num_classes)


def apply_concept_shift(
    bundles: list[AgentDataBundle], alice_index: int, seed: int
) -> list[AgentDataBundle]:
    """Remap labels of every agent except Alice through an independent random permutation."""
    if not bundles:
        raise ValueError("no bundles to shift")
    out = []
    for i, bundle in enumerate(bundles):
        if i == alice_index:
            out.append(bundle)
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        perm = rng.permutation(NUM_LABELS)
        # compose with any permutation already applied
        total = perm[np.asarray(bundle.label_permutation)]
        out.append(
            replace(
                bundle,
                train=_relabel(bundle.train, perm),
                test=_relabel(bundle.test, perm),
                label_permutation=tuple(int(v) for v in total),
            )
        )
    return out


def build_partition(data: LabeledDataset, spec: PartitionSpec) -> list[AgentDataBundle]:
    bundles = partition_by_shift(data, spec)
    if spec.concept_shift:
        bundles = apply_concept_shift(bundles, spec.alice_index, spec.seed + 1)
    return bundles


def partition_hash(bundles: list[AgentDataBundle]) -> str:
    h = hashlib.sha256()
    for b in bundles:
        for ds in (b.train, b.test):
            h.update(np.ascontiguousarray(ds.features).tobytes())
            h.update(np.ascontiguousarray(ds.labels).tobytes())
        h.update(bytes(b.label_permutation))
    return h.hexdigest()[:16]


IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def _read_idx(path: Path, magic: int, header_dims: int) -> tuple[tuple[int, ...], bytes]:
    raw = Path(path).read_bytes()
    header_len = 4 + 4 * header_dims
    if len(raw) < 4:
        raise TruncatedIDXError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IDXFormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header_len:
        raise TruncatedIDXError(f"{path}: truncated header")
    dims = struct.unpack(f">{header_dims}I", raw[4:header_len])
    body = raw[header_len:]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise TruncatedIDXError(f"{path}: truncated body ({len(body)} of {expected} bytes)")
    return dims, body[:expected]


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Read an IDX image/label pair (MNIST layout) with pixels scaled to [0, 1]."""
    (n_img, rows, cols), pixels = _read_idx(images_path, IMAGE_MAGIC, 3)
    (n_lab,), labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if n_img != n_lab:
        raise CountMismatchError(f"count mismatch: {n_img} images vs {n_lab} labels")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(n_img, rows * cols)
    y = np.frombuffer(labels, dtype=np.uint8).astype(np.int64)
    return LabeledDataset(images.astype(np.float64) / 255.0, y, NUM_LABELS)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``[n, rows, cols]`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes())


def required_per_class(spec: PartitionSpec) -> int:
    """Smallest balanced per-class row count that satisfies ``spec``."""
    wanted = sum(
        _apportion(spec.agent_proportions(i), spec.samples_per_agent) for i in range(spec.num_agents)
    )
    return int(max(wanted.max(), 1))
