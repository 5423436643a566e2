"""LLR-domain primitives shared by the decoder and the demappers."""

import numpy as np

LLR_CLIP = 40.0

# Keeps arctanh finite; caps box-plus output near 2*atanh(1 - eps) ~ 37.4
_TANH_GUARD = float(np.nextafter(1.0, 0.0))


def boxplus(a, b):
    """Exact check-node combine 2*atanh(tanh(a/2) * tanh(b/2))."""
    t = np.tanh(np.asarray(a) / 2.0) * np.tanh(np.asarray(b) / 2.0)
    return 2.0 * np.arctanh(np.clip(t, -_TANH_GUARD, _TANH_GUARD))


def clip_llr(x):
    return np.clip(x, -LLR_CLIP, LLR_CLIP)
