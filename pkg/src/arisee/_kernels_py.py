"""Pure numpy implementation of the batched channel/SINR kernels."""
from __future__ import annotations

import numpy as np


def effective_channels(direct, cascade, coeffs):
    """``eff[b, k, :] = direct[k, :] + sum_e coeffs[b, e] * cascade[e, k, :]``.

    Parameters
    ----------
    direct : (K, M) complex
    cascade : (E, K, M) complex
    coeffs : (B, E) complex
    """
    direct = np.asarray(direct, dtype=complex)
    cascade = np.asarray(cascade, dtype=complex)
    coeffs = np.asarray(coeffs, dtype=complex)
    e, k, m = cascade.shape
    summed = (coeffs @ cascade.reshape(e, k * m)).reshape(coeffs.shape[0], k, m)
    return direct[None] + summed


def sinr_from_effective(eff, g, sigma2):
    """SINR per batch entry and UE; ``eff`` (B1, K, M), ``g`` (B2, K, M), B1 or B2 may be 1."""
    eff = np.asarray(eff, dtype=complex)
    g = np.asarray(g, dtype=complex)
    gains = np.abs(np.einsum("bkm,blm->bkl", eff, g)) ** 2
    signal = np.diagonal(gains, axis1=1, axis2=2)
    interference = gains.sum(axis=2) - signal
    return signal / (interference + sigma2)


def batch_sinr(direct, cascade, coeffs, g, sigma2):
    """Fused effective channel + SINR evaluation, shape ``(B, K)``."""
    return sinr_from_effective(effective_channels(direct, cascade, coeffs), g, sigma2)
