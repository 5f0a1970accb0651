"""Pseudo-spectral differentiation on the periodic grids."""
from __future__ import annotations

import numpy as np


def fft(a, m):
    return np.fft.fftn(a, axes=m.axes)


def ifft(a_hat, m):
    return np.fft.ifftn(a_hat, axes=m.axes).real


def _odd_symbol(m, axis):
    """``i k`` along one axis with the Nyquist mode removed."""
    k = m.wavenumbers[axis].copy()
    n = m.shape[axis]
    k[np.abs(k) == n // 2] = 0.0
    return 1j * k


def partial(a, m, axis):
    """Derivative of grid data ``a[..., *grid]`` along coordinate ``axis``."""
    return ifft(_odd_symbol(m, axis) * fft(a, m), m)


def gradient_stack(a, m):
    """``out[j] = ∂_j a`` stacked on a new leading axis."""
    a_hat = fft(a, m)
    return np.stack([ifft(_odd_symbol(m, j) * a_hat, m) for j in range(m.dim)])


def laplacian(a, m):
    return ifft(-m.k2 * fft(a, m), m)


def inverse_symbol(a, m, symbol, zero_mode=0.0):
    """Divide the spectrum by ``symbol``; the constant mode is set to ``zero_mode``."""
    a_hat = fft(a, m)
    sym = np.where(symbol == 0, 1.0, symbol)
    out = a_hat / sym
    idx = (Ellipsis,) + (0,) * len(m.shape)
    out[idx] = zero_mode
    return ifft(out, m)


def dealias_mask(m, fraction=2.0 / 3.0):
    """Boolean mask keeping |k_a| <= fraction * n_a / 2 on every axis."""
    mask = np.ones(m.shape, dtype=bool)
    for k, n in zip(m.wavenumbers, m.shape):
        mask = mask & (np.abs(k) <= fraction * (n // 2))
    return mask
