"""Dataset parsers (IDX, CIFAR binary batches, FCT1 containers),
pixel normalization, and PGM/PPM image-grid export."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import Tensor, load_tensor

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801
CIFAR_RECORD = 3073                      # 1 label byte + 3*32*32 pixels
GRID_SEPARATOR = 2                       # pixels between tiles
GRID_SEPARATOR_VALUE = 128               # mid-gray

CANONICAL_SHAPES = {
    "mnist": (1, 28, 28),
    "cifar10": (3, 32, 32),
    "svhn": (3, 32, 32),
    "celeba": (3, 64, 64),
}
CLASS_COUNTS = {"mnist": 10, "cifar10": 10, "svhn": 10}


class ParseError(IOError):
    pass


@dataclass
class Dataset:
    images: Tensor                      # uint8, [N,C,H,W]
    labels: Tensor | None               # uint8, [N]
    name: str
    split: str

    def __post_init__(self):
        img = self.images.data
        if img.dtype != np.uint8 or img.ndim != 4:
            raise ParseError(f"dataset images must be uint8 NCHW, got {img.dtype} {img.shape}")
        canonical = CANONICAL_SHAPES.get(_base_name(self.name))
        if canonical is not None and img.shape[1:] != canonical:
            raise ParseError(f"{self.name}: images {img.shape[1:]} != canonical {canonical}")
        if self.labels is not None:
            lab = self.labels.data
            if lab.shape != (img.shape[0],):
                raise ParseError(f"{self.name}: {lab.shape[0]} labels for {img.shape[0]} images")
            k = CLASS_COUNTS.get(_base_name(self.name))
            if k is not None and lab.size and int(lab.max()) >= k:
                raise ParseError(f"{self.name}: label {int(lab.max())} >= class count {k}")

    def __len__(self):
        return self.images.shape[0]


def _base_name(name):
    # "synth_mnist" and friends follow their target dataset's canon
    for key in CANONICAL_SHAPES:
        if name == key or name.endswith("_" + key):
            return key
    return name


# ---------------------------------------------------------------------------
# IDX (big-endian, as publicly specified)

def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(path):
    """Parse one IDX file into a uint8 Tensor (rank 3 images or rank 1 labels)."""
    with _open_maybe_gzip(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ParseError(f"{path}: truncated magic: file has {len(raw)} bytes at offset 0")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic == IDX_MAGIC_IMAGES:
        rank = 3
    elif magic == IDX_MAGIC_LABELS:
        rank = 1
    else:
        raise ParseError(f"{path}: bad IDX magic 0x{magic:08x} at offset 0 "
                         f"(expected 0x{IDX_MAGIC_IMAGES:08x} or 0x{IDX_MAGIC_LABELS:08x})")
    need = 4 + 4 * rank
    if len(raw) < need:
        raise ParseError(f"{path}: truncated dims at offset 4: expected {4 * rank} bytes, got {len(raw) - 4}")
    dims = struct.unpack(f">{rank}I", raw[4:need])
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - need != count:
        raise ParseError(f"{path}: payload at offset {need}: expected {count} bytes, got {len(raw) - need}")
    return Tensor(np.frombuffer(raw, dtype=np.uint8, offset=need).reshape(dims))


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(data_dir, split="train"):
    d = Path(data_dir)
    img_name, lab_name = MNIST_FILES[split]
    img_path = _first_existing(d, img_name)
    lab_path = _first_existing(d, lab_name)
    images = load_idx(img_path)
    labels = load_idx(lab_path)
    imgs = images.data[:, None, :, :]    # N,28,28 -> N,1,28,28
    return Dataset(Tensor(imgs), labels, "mnist", split)


def _first_existing(d, stem):
    for cand in (d / stem, d / (stem + ".gz")):
        if cand.exists():
            return cand
    raise ParseError(f"missing dataset file {d / stem}[.gz]")


# ---------------------------------------------------------------------------
# CIFAR-10 binary batches

def load_cifar_bin(paths, split="train"):
    """Canonical binary batches: records of 1 label byte + 3072 RGB-planar bytes."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    chunks_img, chunks_lab = [], []
    for path in paths:
        raw = Path(path).read_bytes()
        if len(raw) % CIFAR_RECORD:
            raise ParseError(f"{path}: length {len(raw)} not divisible by record size {CIFAR_RECORD}")
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        chunks_lab.append(rec[:, 0].copy())
        chunks_img.append(rec[:, 1:].reshape(-1, 3, 32, 32).copy())
    images = np.concatenate(chunks_img) if len(chunks_img) > 1 else chunks_img[0]
    labels = np.concatenate(chunks_lab) if len(chunks_lab) > 1 else chunks_lab[0]
    return Dataset(Tensor(images), Tensor(labels), "cifar10", split)


def load_cifar10(data_dir, split="train"):
    d = Path(data_dir)
    if split == "train":
        paths = sorted(d.glob("data_batch_*.bin")) or sorted(d.glob("data_batch_*"))
    else:
        paths = list(d.glob("test_batch.bin")) or list(d.glob("test_batch"))
    if not paths:
        raise ParseError(f"no CIFAR-10 batch files under {d}")
    return load_cifar_bin(paths, split)


# ---------------------------------------------------------------------------
# converted datasets (FCT1 containers; see README for the converter contract)

def load_fct_dataset(images_path, labels_path=None, name="converted", split="train"):
    images = load_tensor(images_path)
    labels = load_tensor(labels_path) if labels_path else None
    return Dataset(Tensor(images), Tensor(labels) if labels is not None else None, name, split)


# ---------------------------------------------------------------------------
# normalization

def normalize(images, layout="nchw", dtype=np.float32):
    """uint8 pixels -> float in [-1, 1], NCHW."""
    arr = images.data if isinstance(images, Tensor) else np.asarray(images)
    if arr.dtype != np.uint8:
        raise ParseError(f"normalize expects uint8 input, got {arr.dtype}")
    if layout == "nhwc":
        arr = arr.transpose(0, 3, 1, 2)
    elif layout != "nchw":
        raise ParseError(f"unknown layout {layout!r}")
    out = arr.astype(dtype) / dtype(127.5) - dtype(1.0)
    return Tensor(np.ascontiguousarray(out))


def denormalize(images):
    """float in [-1, 1] -> uint8 pixels (round-to-nearest, clipped;
    non-finite values, e.g. in abort diagnostics, map to black)."""
    arr = images.data if isinstance(images, Tensor) else np.asarray(images)
    x = np.nan_to_num(arr.astype(np.float64), nan=-1.0, posinf=1.0, neginf=-1.0)
    x = (x + 1.0) * 127.5
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM/PPM image grids

def write_image_grid(images, rows, cols, path):
    """Tile n=rows*cols images row-major with 2px mid-gray separators and
    write binary PGM (1 channel) or PPM (3 channels)."""
    arr = images.data if isinstance(images, Tensor) else np.asarray(images)
    if arr.ndim != 4:
        raise ParseError(f"grid expects [n,C,H,W], got {arr.shape}")
    n, c, h, w = arr.shape
    if n != rows * cols:
        raise ParseError(f"{n} images cannot fill a {rows}x{cols} grid")
    if c not in (1, 3):
        raise ParseError(f"grids support 1 or 3 channels, got {c}")
    pix = denormalize(arr)
    gh = rows * h + (rows - 1) * GRID_SEPARATOR
    gw = cols * w + (cols - 1) * GRID_SEPARATOR
    canvas = np.full((gh, gw, c), GRID_SEPARATOR_VALUE, dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            tile = pix[i * cols + j].transpose(1, 2, 0)
            y0 = i * (h + GRID_SEPARATOR)
            x0 = j * (w + GRID_SEPARATOR)
            canvas[y0:y0 + h, x0:x0 + w] = tile
    path = Path(path)
    with open(path, "wb") as fh:
        code = b"P5" if c == 1 else b"P6"
        fh.write(code + b"\n%d %d\n255\n" % (gw, gh))
        fh.write(canvas.tobytes())
    return path


def read_pnm(path):
    """Parse binary P5/P6 back into uint8 [H,W] or [H,W,3] (test oracle aid)."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"P5", b"P6"):
        raise ParseError(f"{path}: not a binary PGM/PPM")
    w, h = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise ParseError(f"{path}: unsupported maxval {parts[2]!r}")
    c = 1 if parts[0] == b"P5" else 3
    data = np.frombuffer(parts[3], dtype=np.uint8, count=h * w * c)
    return data.reshape((h, w) if c == 1 else (h, w, c))
