"""Dataset loading, splitting, and interchange.

Parsers for the two binary benchmark formats (IDX image/label pairs and
the 3073-byte-record CIFAR-10 batches), deterministic stratified
subsampling and k-fold index splits, a CSV interchange format, and a
deterministic synthetic digit generator used for the bundled fixture and
for offline runs.

All pixel features are scaled into [0, 1].
"""

from __future__ import annotations

import gzip
import hashlib
import shutil
import struct
import tarfile
import tempfile
import urllib.request
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .numeric import Rng, as_matrix

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes

MNIST_FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)
# canonical host first, stable mirror second
MNIST_URLS = (
    "http://yann.lecun.com/exdb/mnist/",
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
)
MNIST_MD5 = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}
CIFAR10_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"
CIFAR10_MD5 = "c32a1d4ab5d03f1284b67883e8d87530"


class DataError(ValueError):
    """Raised for unreadable, malformed, or inconsistent dataset files."""


@dataclass
class Dataset:
    features: np.ndarray  # n x m, float64 in [0, 1]
    labels: np.ndarray  # n int64 class ids in [0, 9]
    name: str = "dataset"

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or len(self.labels) != self.features.shape[0]:
            raise DataError(
                f"{self.name}: {len(self.labels)} labels for "
                f"{self.features.shape[0]} samples"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() > 9):
            raise DataError(f"{self.name}: labels outside [0, 9]")
        if self.features.size and (
            self.features.min() < 0.0 or self.features.max() > 1.0
        ):
            raise DataError(f"{self.name}: features outside [0, 1]")

    def __len__(self) -> int:
        return self.features.shape[0]


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_mnist(images_path, labels_path, name: str = "mnist") -> Dataset:
    """Parse an IDX image/label file pair (gzipped or raw)."""
    img = _read_bytes(images_path)
    lbl = _read_bytes(labels_path)
    if len(img) < 16 or len(lbl) < 8:
        raise DataError(f"truncated IDX header in {images_path} / {labels_path}")

    magic, n_img, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataError(f"bad image magic 0x{magic:08x} in {images_path}")
    lmagic, n_lbl = struct.unpack(">II", lbl[:8])
    if lmagic != IDX_LABEL_MAGIC:
        raise DataError(f"bad label magic 0x{lmagic:08x} in {labels_path}")
    if n_img != n_lbl:
        raise DataError(f"{n_img} images but {n_lbl} labels")
    if len(img) - 16 != n_img * rows * cols:
        raise DataError(f"truncated image data in {images_path}")
    if len(lbl) - 8 != n_lbl:
        raise DataError(f"truncated label data in {labels_path}")

    pixels = np.frombuffer(img, np.uint8, n_img * rows * cols, 16)
    features = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lbl, np.uint8, n_lbl, 8).astype(np.int64)
    return Dataset(features, labels, name)


def load_cifar10(batch_paths, name: str = "cifar10") -> Dataset:
    """Parse CIFAR-10 binary batches (label byte + 3072 pixel bytes each)."""
    feats, labels = [], []
    for path in batch_paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise DataError(
                f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(raw, np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels.append(records[:, 0].astype(np.int64))
        feats.append(records[:, 1:].astype(np.float64) / 255.0)
    if not feats:
        raise DataError("no CIFAR-10 batch files given")
    return Dataset(np.concatenate(feats), np.concatenate(labels), name)


def subset(ds: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic stratified sample preserving class proportions.

    Per-class counts follow the largest-remainder rule, so they differ
    from exact proportionality by at most one sample per class.
    """
    if n > len(ds):
        raise DataError(f"requested {n} samples but only {len(ds)} available")
    rng = Rng(seed)
    classes, counts = np.unique(ds.labels, return_counts=True)
    quotas = n * counts / len(ds)
    alloc = np.floor(quotas).astype(np.int64)
    remainder = n - int(alloc.sum())
    if remainder > 0:
        order = np.argsort(-(quotas - alloc), kind="stable")
        for idx in order[:remainder]:
            alloc[idx] += 1
    # cap at availability and backfill (only matters for tiny classes)
    over = alloc - counts
    if (over > 0).any():
        spare = int(over[over > 0].sum())
        alloc = np.minimum(alloc, counts)
        room = counts - alloc
        for idx in np.argsort(-room, kind="stable"):
            take = min(spare, int(room[idx]))
            alloc[idx] += take
            spare -= take
            if spare == 0:
                break

    picked = []
    for cls, k in zip(classes, alloc):
        pool = np.flatnonzero(ds.labels == cls)
        perm = rng.derive(int(cls)).permutation(len(pool))
        picked.append(pool[perm[:k]])
    idx = np.concatenate(picked)
    idx = idx[rng.derive(len(classes)).permutation(len(idx))]
    return Dataset(ds.features[idx].copy(), ds.labels[idx].copy(), ds.name)


def kfold_splits(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """k disjoint (train, test) index pairs; fold sizes differ by <= 1."""
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if n < k:
        raise DataError(f"cannot make {k} folds from {n} samples")
    perm = Rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    splits = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        splits.append((train, test))
    return splits


# --- CSV interchange -----------------------------------------------------------


def save_csv(ds: Dataset, path) -> None:
    """Write `label,f0,...,f{m-1}` rows with round-trippable floats."""
    m = ds.features.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("label," + ",".join(f"f{j}" for j in range(m)) + "\n")
        for label, row in zip(ds.labels, ds.features):
            f.write(str(int(label)) + "," + ",".join(repr(v) for v in row) + "\n")


def load_csv(path, name: str | None = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if not header or header[0] != "label":
            raise DataError(f"{path}: expected header starting with 'label'")
        m = len(header) - 1
        labels, rows = [], []
        for ln, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != m + 1:
                raise DataError(f"{path}:{ln}: expected {m + 1} fields, got {len(parts)}")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    return Dataset(np.array(rows), np.array(labels), name or path.stem)


# --- synthetic digits and the bundled fixture ----------------------------------


def _stroke_template(rng: Rng, side: int) -> np.ndarray:
    """Sparse stroke-like pattern: Gaussian bumps along a random path.

    Mimics handwritten-digit statistics: a localized bright stroke on a
    dark background, covering roughly 10-20% of the image.
    """
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    n_bumps = 5
    lo, hi = side * 0.2, side * 0.8
    points = rng.uniform(lo, hi, n_bumps, 2)
    # order bumps along one axis so they form a connected-looking stroke
    points = points[np.argsort(points[:, 0])]
    img = np.zeros((side, side))
    width = side / 9.0
    for k in range(n_bumps - 1):
        for frac in np.linspace(0.0, 1.0, 6):
            cy, cx = points[k] * (1 - frac) + points[k + 1] * frac
            img += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
    peak = img.max()
    return img / peak if peak > 0 else img


def make_synthetic_digits(
    n: int, seed: int, side: int = 28, classes: int = 10, name: str = "synthetic"
) -> Dataset:
    """Clustered digit-like images: two stroke factors per class plus noise.

    Samples of a class mix that class's primary and secondary stroke
    templates with random intensities and add light pixel noise, giving
    each class a low-dimensional cluster of sparse bright-on-dark images
    with strong within-class pairwise similarity.
    """
    rng = Rng(seed)
    primary = [_stroke_template(rng.derive(10 + c), side) for c in range(classes)]
    secondary = [_stroke_template(rng.derive(100 + c), side) for c in range(classes)]

    per = [n // classes + (1 if c < n % classes else 0) for c in range(classes)]
    feats = np.empty((n, side * side))
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for c in range(classes):
        k = per[c]
        if k == 0:
            continue
        crng = rng.derive(200 + c)
        u1 = crng.uniform(0.55, 1.0, k, 1)
        u2 = crng.uniform(0.0, 0.45, k, 1)
        noise = crng.gaussian(0.0, 0.03, k, side * side)
        block = (
            u1 * primary[c].ravel()[None, :]
            + u2 * secondary[c].ravel()[None, :]
            + noise
        )
        feats[row : row + k] = np.clip(block, 0.0, 1.0)
        labels[row : row + k] = c
        row += k
    order = rng.derive(999).permutation(n)
    return Dataset(feats[order], labels[order], name)


def write_idx_files(ds: Dataset, images_path, labels_path, side: int = 28) -> None:
    """Serialize a dataset into the IDX image/label binary pair."""
    n, m = ds.features.shape
    if m != side * side:
        raise DataError(f"features are {m}-dimensional, not {side}x{side}")
    pixels = np.clip(np.rint(ds.features * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, side, side))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, n))
        f.write(ds.labels.astype(np.uint8).tobytes())


FIXTURE_SEED = 727
FIXTURE_SIZE = 200


def fixture_paths() -> tuple[Path, Path]:
    """Paths of the bundled 200-image IDX fixture."""
    root = resources.files("relae") / "fixtures"
    return (
        Path(str(root / "fixture-images-idx3-ubyte")),
        Path(str(root / "fixture-labels-idx1-ubyte")),
    )


def load_fixture() -> Dataset:
    images, labels = fixture_paths()
    return load_mnist(images, labels, name="fixture")


# --- fetch helpers --------------------------------------------------------------


def _md5(path: Path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _download(url: str, dest: Path) -> None:
    with urllib.request.urlopen(url, timeout=60) as resp, open(dest, "wb") as out:
        shutil.copyfileobj(resp, out)


def fetch_mnist(dest_dir) -> list[Path]:
    """Download and checksum the four MNIST archives into dest_dir."""
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    fetched = []
    for fname in MNIST_FILES:
        dest = dest_dir / fname
        if not dest.exists():
            last_err = None
            for base in MNIST_URLS:
                try:
                    _download(base + fname, dest)
                    break
                except OSError as exc:
                    last_err = exc
            else:
                raise DataError(f"could not download {fname}: {last_err}")
        if _md5(dest) != MNIST_MD5[fname]:
            raise DataError(f"checksum mismatch for {dest}")
        fetched.append(dest)
    return fetched


def fetch_cifar10(dest_dir) -> list[Path]:
    """Download the CIFAR-10 binary archive and unpack its batch files."""
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    names = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    existing = [dest_dir / n for n in names]
    if all(p.exists() for p in existing):
        return existing
    archive = dest_dir / "cifar-10-binary.tar.gz"
    if not archive.exists():
        try:
            _download(CIFAR10_URL, archive)
        except OSError as exc:
            raise DataError(f"could not download CIFAR-10: {exc}") from exc
    if _md5(archive) != CIFAR10_MD5:
        raise DataError(f"checksum mismatch for {archive}")
    with tarfile.open(archive, "r:gz") as tar, tempfile.TemporaryDirectory() as tmp:
        tar.extractall(tmp, filter="data")
        for name in names:
            hits = list(Path(tmp).rglob(name))
            if not hits:
                raise DataError(f"{name} missing from CIFAR-10 archive")
            shutil.copy(hits[0], dest_dir / name)
    return [dest_dir / n for n in names]


def mnist_paths(data_dir) -> dict[str, Path]:
    """Resolve train/test IDX files under data_dir, raw or gzipped."""
    data_dir = Path(data_dir)
    out = {}
    for key, stem in (
        ("train_images", "train-images-idx3-ubyte"),
        ("train_labels", "train-labels-idx1-ubyte"),
        ("test_images", "t10k-images-idx3-ubyte"),
        ("test_labels", "t10k-labels-idx1-ubyte"),
    ):
        raw, gz = data_dir / stem, data_dir / (stem + ".gz")
        if raw.exists():
            out[key] = raw
        elif gz.exists():
            out[key] = gz
        else:
            raise DataError(f"dataset file not found: {raw} (or .gz)")
    return out


def cifar10_paths(data_dir, train: bool = True) -> list[Path]:
    data_dir = Path(data_dir)
    names = [f"data_batch_{i}.bin" for i in range(1, 6)] if train else ["test_batch.bin"]
    paths = [data_dir / n for n in names]
    for p in paths:
        if not p.exists():
            raise DataError(f"dataset file not found: {p}")
    return paths
