"""Numba-compiled coverage kernels.

Same contract as _cov_numpy; the classify/digest loops view the map as
uint64 words so runs of zero cells are skipped eight at a time.
"""

import numpy as np
from numba import njit

from ._cov_numpy import BITMASK_LUT, BUCKET_LUT, MAP_SIZE, SIGNATURE_SEED

NAME = "numba"

_WORDS = MAP_SIZE // 8

_MIX0 = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _accumulate(cov, blocks):
    prev = np.uint32(0)
    for i in range(blocks.shape[0]):
        cur = blocks[i]
        e = (cur ^ (prev >> np.uint32(1))) & np.uint32(0xFFFF)
        c = cov[e]
        if c < 255:
            cov[e] = c + 1
        prev = cur


@njit(cache=True)
def _classify_update(virgin, cov, cov64):
    res = 0
    for w in range(_WORDS):
        if cov64[w] == 0:
            continue
        for i in range(w * 8, w * 8 + 8):
            c = cov[i]
            if c == 0:
                continue
            bit = BITMASK_LUT[c]
            v = virgin[i]
            if v == 0:
                res = 2
            elif res == 0 and (bit & v) == 0:
                res = 1
            virgin[i] = v | bit
    return res


@njit(cache=True)
def _digest(cov, cov64):
    h = SIGNATURE_SEED
    for w in range(_WORDS):
        if cov64[w] == 0:
            continue
        for i in range(w * 8, w * 8 + 8):
            c = cov[i]
            if c == 0:
                continue
            z = (np.uint64(i) << np.uint64(8)) | np.uint64(BUCKET_LUT[c])
            z = z + _MIX0
            z ^= z >> np.uint64(30)
            z *= _MIX1
            z ^= z >> np.uint64(27)
            z *= _MIX2
            z ^= z >> np.uint64(31)
            h ^= z
    return h


def accumulate(cov: np.ndarray, blocks: np.ndarray) -> None:
    _accumulate(cov, blocks)


def classify_update(virgin: np.ndarray, cov: np.ndarray) -> int:
    return _classify_update(virgin, cov, cov.view(np.uint64))


def digest(cov: np.ndarray) -> np.uint64:
    return _digest(cov, cov.view(np.uint64))


def warmup() -> None:
    cov = np.zeros(MAP_SIZE, dtype=np.uint8)
    accumulate(cov, np.arange(4, dtype=np.uint32))
    classify_update(np.zeros(MAP_SIZE, dtype=np.uint8), cov)
    digest(cov)
