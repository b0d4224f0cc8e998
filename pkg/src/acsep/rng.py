"""Counter-based random numbers for reproducible parallel Monte Carlo.

Every Gaussian increment in this package is addressed by the tuple
``(seed, path_id, step_index, mode)``.  Addressability is what makes
ensembles schedule-independent: a worker can produce the increments of
any path at any step without generating anything else first.

The generator is Philox-4x64 with 10 rounds, the same keyed block
cipher that backs ``numpy.random.Philox``.  We evaluate the cipher
ourselves on vectorized uint64 arrays because numpy's bit-generator
API only walks a single counter stream at a time, while a batched
solver step needs one stream per path.  The block function is checked
word-for-word against ``numpy.random.Philox`` in the test suite.

Uniforms are mapped to Gaussians with the inverse normal CDF so that
one 64-bit word yields exactly one Gaussian (rejection samplers would
destroy counter addressability).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
_PHILOX_M1 = np.uint64(0xCA5A826395121157)
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_ROUNDS = 10

_LO32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_MASK64 = (1 << 64) - 1


def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product, returned as (hi, lo) uint64 arrays."""
    lo = a * b  # wrapping product
    a_lo = a & _LO32
    a_hi = a >> _SH32
    b_lo = b & _LO32
    b_hi = b >> _SH32
    t = a_lo * b_lo
    carry = t >> _SH32
    t1 = a_hi * b_lo + carry
    w1 = t1 & _LO32
    w2 = t1 >> _SH32
    t2 = a_lo * b_hi + w1
    hi = a_hi * b_hi + w2 + (t2 >> _SH32)
    return hi, lo


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox-4x64-10 block function on broadcastable uint64 arrays.

    Returns the four output words for each counter ``(c0, c1, c2, c3)``
    under key ``(k0, k1)``.  This is the bare cipher: numpy's Philox
    bit generator emits the block for counter+1 first because it
    pre-increments, which the parity test accounts for.
    """
    c0 = np.atleast_1d(np.asarray(c0, dtype=np.uint64))
    c1 = np.atleast_1d(np.asarray(c1, dtype=np.uint64))
    c2 = np.atleast_1d(np.asarray(c2, dtype=np.uint64))
    c3 = np.atleast_1d(np.asarray(c3, dtype=np.uint64))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    x0, x1, x2, x3 = c0.copy(), c1.copy(), c2.copy(), c3.copy()
    k0 = int(k0) & _MASK64
    k1 = int(k1) & _MASK64
    for _ in range(_ROUNDS):
        hi0, lo0 = _mulhilo(_PHILOX_M0, x0)
        hi1, lo1 = _mulhilo(_PHILOX_M1, x2)
        x0 = hi1 ^ x1 ^ np.uint64(k0)
        x1 = lo1
        x2 = hi0 ^ x3 ^ np.uint64(k1)
        x3 = lo0
        k0 = (k0 + int(_PHILOX_W0)) & _MASK64
        k1 = (k1 + int(_PHILOX_W1)) & _MASK64
    return x0, x1, x2, x3


def _uniform_open01(words):
    """Map uint64 words to doubles in the open interval (0, 1).

    52-bit resolution with a half-step offset: the extremes map to
    2^-53 and 1 - 2^-53 exactly, so ndtri never sees 0 or 1.
    """
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def raw_words(seed, path_ids, step_index, n_words):
    """uint64 words for each path id; layout (len(path_ids), n_words).

    Counter layout: word0 = block index, word1 = step index,
    word2 = path id, word3 = 0; key = (seed, 0).
    """
    path_ids = np.asarray(path_ids, dtype=np.uint64).reshape(-1, 1)
    n_blocks = -(-int(n_words) // 4)
    blocks = np.arange(n_blocks, dtype=np.uint64).reshape(1, -1)
    out = philox4x64(
        blocks,
        np.uint64(int(step_index) & _MASK64),
        path_ids,
        np.uint64(0),
        np.uint64(int(seed) & _MASK64),
        np.uint64(0),
    )
    words = np.stack(out, axis=-1).reshape(path_ids.shape[0], 4 * n_blocks)
    return words[:, : int(n_words)]


def normal_matrix(seed, path_ids, step_index, n_modes, scale=1.0):
    """Standard-normal draws of shape (len(path_ids), n_modes), times scale.

    The entry at (i, k) depends only on (seed, path_ids[i], step_index, k),
    so any partition of the path set reproduces the same numbers.
    """
    words = raw_words(seed, path_ids, step_index, n_modes)
    gauss = ndtri(_uniform_open01(words))
    if scale != 1.0:
        gauss *= scale
    return gauss
