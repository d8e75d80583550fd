"""FCT1 raw tensor container.

Layout: magic b"FCT1", u8 dtype code {0: uint8, 1: float32, 2: float64},
u8 rank, rank little-endian u32 dims, then the raw little-endian payload.
Round-trips bit-exactly; rank 0 (scalars) is allowed.
"""

import struct

import numpy as np

MAGIC = b"FCT1"

_CODE_OF = {np.dtype(np.uint8): 0, np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_DTYPE_OF = {0: np.dtype("u1"), 1: np.dtype("<f4"), 2: np.dtype("<f8")}


class ContainerError(IOError):
    pass


def write_array(fh, arr):
    a = np.ascontiguousarray(arr)
    if a.dtype not in _CODE_OF:
        raise ContainerError(f"dtype {a.dtype} not storable (use uint8/float32/float64)")
    if a.ndim > 255:
        raise ContainerError("rank > 255")
    fh.write(MAGIC)
    fh.write(struct.pack("<BB", _CODE_OF[a.dtype], a.ndim))
    for d in a.shape:
        fh.write(struct.pack("<I", d))
    fh.write(a.astype(_DTYPE_OF[_CODE_OF[a.dtype]], copy=False).tobytes())


def read_array(fh):
    start = fh.tell()
    head = fh.read(6)
    if len(head) < 6 or head[:4] != MAGIC:
        raise ContainerError(f"bad FCT1 magic at byte {start}: {head[:4]!r}")
    code, rank = head[4], head[5]
    if code not in _DTYPE_OF:
        raise ContainerError(f"unknown dtype code {code} at byte {start + 4}")
    dims_raw = fh.read(4 * rank)
    if len(dims_raw) != 4 * rank:
        raise ContainerError(f"truncated dims at byte {start + 6}: expected {4 * rank} bytes, got {len(dims_raw)}")
    dims = struct.unpack(f"<{rank}I", dims_raw) if rank else ()
    dt = _DTYPE_OF[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = fh.read(count * dt.itemsize)
    if len(payload) != count * dt.itemsize:
        raise ContainerError(
            f"truncated payload at byte {start + 6 + 4 * rank}: expected {count * dt.itemsize} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=dt).reshape(dims)
    return np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("="), copy=False)


def save_tensor(path, arr):
    with open(path, "wb") as fh:
        write_array(fh, arr)


def load_tensor(path):
    with open(path, "rb") as fh:
        return read_array(fh)
