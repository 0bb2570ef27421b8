"""Counter-based random streams.

Every draw is addressed by (seed, stream, index), so batches can be
generated in any order, in parallel, and concatenated by index without
changing a single bit. Philox hands out 4 uint64 words per counter tick,
which `Generator.random` turns into 4 doubles, so a logical draw of
dimension d is padded to whole ticks: stride = ceil(d / 4) * 4 uniforms.
"""

import numpy as np
from scipy.special import ndtri

_WORDS_PER_TICK = 4
# smallest uniform Generator.random can emit is 0; ndtri(0) = -inf
_U_FLOOR = 2.0 ** -53

STREAM_NOISE = 0
STREAM_MIXING = 1


def _block_stride(dim):
    return -(-dim // _WORDS_PER_TICK) * _WORDS_PER_TICK


def generator(seed, stream=0):
    """A plain Generator on the (seed, stream) Philox key, counter at 0."""
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniforms(seed, count, dim, stream=0, start=0):
    """`count` rows of `dim` uniforms, draws numbered start..start+count-1.

    uniforms(s, a, d)[i] == uniforms(s, 1, d, start=i)[0] bit for bit,
    for any batching of the index range.
    """
    stride = _block_stride(dim)
    key = np.array([seed, stream], dtype=np.uint64)
    bg = np.random.Philox(key=key)
    bg.advance(start * (stride // _WORDS_PER_TICK))
    u = np.random.Generator(bg).random((count, stride))
    return u[:, :dim]


def normals(seed, count, dim, stream=0, start=0):
    """Standard normal rows via the inverse CDF, same indexing as uniforms."""
    u = uniforms(seed, count, dim, stream=stream, start=start)
    return ndtri(np.maximum(u, _U_FLOOR))


def spawn_seed(seed, *path):
    """Derive a child seed for a labelled work unit (e.g. a sweep cell)."""
    return np.random.SeedSequence((seed,) + tuple(path)).generate_state(1)[0]
