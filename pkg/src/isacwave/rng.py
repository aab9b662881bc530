"""Deterministic random streams.

Every stochastic quantity in the package is drawn from a named
counter-based stream so that a (config, seed) pair reproduces results
bit for bit regardless of call interleaving.  Streams are Philox
generators keyed by ``(seed, stream_id << 32 | index)``:

====================  ==========  ============================================
stream                stream_id   used for
====================  ==========  ============================================
``channel``           1           user distances and multipath taps
``symbols``           2           PSK data symbols
``noise``             3           receiver noise in single-shot synthesis
``trial``             4           Monte Carlo noise batches (ROC, SER, RMSE)
``init``              5           waveform initializations
``power_iter``        6           power-iteration start vectors
====================  ==========  ============================================

``index`` selects a substream (for example one per Monte Carlo batch);
draw order within a stream is part of the documented contract of the
function doing the drawing.
"""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "channel": 1,
    "symbols": 2,
    "noise": 3,
    "trial": 4,
    "init": 5,
    "power_iter": 6,
}

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """Return the Generator for ``stream`` under the given master seed."""
    if stream not in _STREAMS:
        raise KeyError(f"unknown stream {stream!r}; known: {sorted(_STREAMS)}")
    if index < 0:
        raise ValueError("substream index must be nonnegative")
    word = (_STREAMS[stream] << 32) | (index & 0xFFFFFFFF)
    key = np.array([seed & _MASK64, word & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex normal draws with total variance ``var``.

    Real and imaginary parts are drawn in that order, each N(0, var/2),
    so the draw order is stable across shapes.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(var / 2.0) * (re + 1j * im)
