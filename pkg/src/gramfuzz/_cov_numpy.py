"""Pure-numpy coverage kernels. Fallback backend; see _cov_numba for the fast path."""

import numpy as np

NAME = "numpy"

MAP_SIZE = 65536

# Hit counts collapse into 9 classes: 0, 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128-255.
_BOUNDS = [(0, 0), (1, 1), (2, 2), (3, 3), (4, 7), (8, 15), (16, 31), (32, 127), (128, 255)]

BUCKET_LUT = np.zeros(256, dtype=np.uint8)
for _cls, (_lo, _hi) in enumerate(_BOUNDS):
    BUCKET_LUT[_lo : _hi + 1] = _cls

# One virgin-map bit per nonzero class.
BITMASK_LUT = np.zeros(256, dtype=np.uint8)
BITMASK_LUT[1:] = 1 << (BUCKET_LUT[1:] - 1)

SIGNATURE_SEED = np.uint64(0x5851F42D4C957F2D)

_MIX0 = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def accumulate(cov: np.ndarray, blocks: np.ndarray) -> None:
    """Fold a block trace into an edge-count map, saturating at 255."""
    if blocks.size == 0:
        return
    shifted = np.empty_like(blocks)
    shifted[0] = 0
    shifted[1:] = blocks[:-1] >> 1
    idx = (blocks ^ shifted) & 0xFFFF
    counts = np.bincount(idx, minlength=MAP_SIZE)
    total = counts + cov
    np.minimum(total, 255, out=total)
    cov[:] = total


def classify_update(virgin: np.ndarray, cov: np.ndarray) -> int:
    """0 = nothing new, 1 = new bucket on a known edge, 2 = new edge.

    Side effect: all observed (edge, bucket) pairs are marked in virgin.
    """
    nz = np.flatnonzero(cov)
    if nz.size == 0:
        return 0
    bits = BITMASK_LUT[cov[nz]]
    v = virgin[nz]
    if not np.all(v):
        res = 2
    elif np.any(bits & ~v):
        res = 1
    else:
        res = 0
    virgin[nz] = v | bits
    return res


def digest(cov: np.ndarray) -> np.uint64:
    """Order-insensitive 64-bit digest of the bucketized map."""
    nz = np.flatnonzero(cov)
    if nz.size == 0:
        return SIGNATURE_SEED
    with np.errstate(over="ignore"):
        x = (nz.astype(np.uint64) << np.uint64(8)) | BUCKET_LUT[cov[nz]]
        z = x + _MIX0
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
        return np.bitwise_xor.reduce(z) ^ SIGNATURE_SEED


def warmup() -> None:
    cov = np.zeros(MAP_SIZE, dtype=np.uint8)
    accumulate(cov, np.arange(4, dtype=np.uint32))
    classify_update(np.zeros(MAP_SIZE, dtype=np.uint8), cov)
    digest(cov)
