"""Counter-based random streams keyed by (seed, sample, step).

Scheme: the uniform driving sample s at step k is the first double of
counter block s of a Philox stream keyed (seed, k).  Every variate the
samplers need is produced from that single uniform by inverse transform, so
the value depends on nothing but the (seed, sample, step) triple.  Workers
holding any slice of the sample range reproduce identical output by
advancing the counter to their slice start.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_BLOCK = 4  # doubles per Philox counter block


def step_uniforms(seed: int, step_index: int, start: int, count: int) -> np.ndarray:
    """Uniforms for samples start..start+count-1 at one step."""
    bg = np.random.Philox(key=np.array([seed & _MASK64, step_index & _MASK64],
                                       dtype=np.uint64))
    if start:
        bg.advance(start)
    raw = np.random.Generator(bg).random(_BLOCK * count)
    return np.ascontiguousarray(raw[::_BLOCK])


def sample_uniform(seed: int, sample_index: int, step_index: int) -> float:
    """The single uniform for one (seed, sample, step) triple."""
    return float(step_uniforms(seed, step_index, sample_index, 1)[0])


def check_stream(seed: int, tag: int) -> np.random.Generator:
    """A plain deterministic stream for Monte Carlo checks that are not part
    of the per-sample contract (tag separates independent uses)."""
    bg = np.random.Philox(key=np.array([seed & _MASK64, (0xC0FFEE ^ tag) & _MASK64],
                                       dtype=np.uint64))
    return np.random.Generator(bg)
