"""Compiled access loops for the native backend.

numba-compiled loops run without the GIL so pinned workers really run in
parallel. Without numba the numpy fallbacks still produce correct byte
counts, but timings include interpreter overhead.
"""

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

HAVE_NUMBA = numba is not None

if HAVE_NUMBA:
    _jit = numba.njit(nogil=True, cache=False)

    @_jit
    def read_words(words):
        s = words.dtype.type(0)
        for i in range(words.size):
            s += words[i]
        return s

    @_jit
    def write_words(words, value):
        for i in range(words.size):
            words[i] = value

    @_jit
    def chase(words, start, words_per_line):
        p = np.int64(start)
        n = 0
        while True:
            p = np.int64(words[p * words_per_line])
            n += 1
            if p == start:
                return n

    @_jit
    def spin(n):
        x = 0
        for i in range(n):
            x = (x * 1103515245 + 12345 + i) & 0xFFFFFFFF
        return x

else:  # pragma: no cover

    def read_words(words):
        return words.sum()

    def write_words(words, value):
        words.fill(value)

    def chase(words, start, words_per_line):
        p = start
        n = 0
        while True:
            p = int(words[p * words_per_line])
            n += 1
            if p == start:
                return n

    def spin(n):
        x = 0
        for i in range(n):
            x = (x * 1103515245 + 12345 + i) & 0xFFFFFFFF
        return x


def warm_up():
    """Trigger compilation outside any timed region."""
    w = np.zeros(16, dtype=np.uint64)
    read_words(w)
    write_words(w, np.uint64(1))
    w[0] = 0
    chase(w, 0, 8)
    w32 = np.zeros(16, dtype=np.uint32)
    read_words(w32)
    write_words(w32, np.uint32(1))
    w32[0] = 0
    chase(w32, 0, 16)
    spin(10)
