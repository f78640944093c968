"""Deterministic numerical kernels.

Magnitude spectra, Pearson correlation, symmetric eigenvalues (cyclic
Jacobi) and linear resampling.  Every kernel has a batched form operating
on a leading axis, since featurization evaluates thousands of windows at
once.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 64
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray
    resolution: float


def _finite(x, what="input"):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")
    return x


def fft_magnitude(samples, fs):
    """One-sided magnitude spectrum ``|X_k|`` for ``k = 0..n//2``.

    Bin ``k`` sits at ``k * fs / n`` Hz.  No taper is applied.
    """
    x = _finite(samples, "samples")
    if x.ndim != 1 or x.size < 2:
        raise ValueError("fft_magnitude needs a 1-D vector of at least 2 samples")
    if not fs > 0:
        raise ValueError("fs must be positive")
    n = x.size
    mags = np.abs(np.fft.rfft(x))
    freqs = np.arange(mags.size) * (fs / n)
    return Spectrum(freqs=freqs, magnitudes=mags, resolution=fs / n)


def fft_magnitudes(windows):
    """Batched ``|rfft|`` along the last axis."""
    return np.abs(np.fft.rfft(np.asarray(windows, dtype=np.float64), axis=-1))


def _degenerate_rows(x):
    # std below 1e-12 of the row's scale counts as flat
    scale = np.maximum(np.max(np.abs(x), axis=-1), 1.0)
    return np.std(x, axis=-1) <= 1e-12 * scale


def pearson_correlation(X):
    """Correlation matrix between the rows of ``X`` (channels x samples).

    Zero-variance rows get a zero row/column and a unit diagonal entry.
    """
    X = _finite(X, "matrix")
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("pearson_correlation needs a 2-D matrix with >= 2 columns")
    return pearson_correlation_batch(X[None])[0]


def pearson_correlation_batch(X):
    """Row correlation for a stack of matrices, shape ``(B, N, T)``."""
    X = np.asarray(X, dtype=np.float64)
    flat = _degenerate_rows(X)
    centered = X - X.mean(axis=-1, keepdims=True)
    centered[flat] = 0.0
    norms = np.sqrt(np.einsum("bnt,bnt->bn", centered, centered))
    norms[flat] = 1.0
    unit = centered / norms[..., None]
    corr = np.einsum("bnt,bmt->bnm", unit, unit)
    np.clip(corr, -1.0, 1.0, out=corr)
    corr = 0.5 * (corr + np.swapaxes(corr, -1, -2))
    n = X.shape[1]
    idx = np.arange(n)
    corr[:, idx, idx] = 1.0
    return corr


def _off_norm(a):
    n = a.shape[-1]
    off = a.copy()
    off[..., np.arange(n), np.arange(n)] = 0.0
    return np.sqrt(np.sum(off * off, axis=(-2, -1)))


def sym_eigenvalues(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized by averaging with its transpose; an asymmetry
    larger than ``SYMMETRY_TOL`` is rejected.  Results are unsorted.
    """
    A = _finite(A, "matrix")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("sym_eigenvalues needs a square matrix")
    return sym_eigenvalues_batch(A[None], tol=tol, max_sweeps=max_sweeps)[0]


def sym_eigenvalues_batch(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Jacobi eigenvalues for a stack of symmetric matrices ``(B, N, N)``.

    The same rotation schedule runs on every matrix; a matrix whose pivot is
    already zero gets the identity rotation.  Convergence is declared when
    the off-diagonal Frobenius norm of every matrix drops below
    ``tol * max(1, ||A||_F)``.
    """
    a = np.array(A, dtype=np.float64)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError("expected a stack of square matrices")
    asym = np.max(np.abs(a - np.swapaxes(a, 1, 2)), initial=0.0)
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max deviation {asym:.3e})")
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    n = a.shape[1]
    if n == 1 or a.shape[0] == 0:
        return np.diagonal(a, axis1=1, axis2=2).copy()

    limit = tol * np.maximum(1.0, np.sqrt(np.sum(a * a, axis=(1, 2))))
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    off = _off_norm(a)
    sweeps = 0
    while np.any(off >= limit):
        if sweeps >= max_sweeps:
            raise NonConvergenceError(float(np.max(off)), sweeps)
        for p, q in pairs:
            apq = a[:, p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            app = a[:, p, p]
            aqq = a[:, q, q]
            safe = np.where(active, apq, 1.0)
            theta = (aqq - app) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            t[~active] = 0.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cc = c[:, None]
            ss = s[:, None]
            col_p = a[:, :, p].copy()
            col_q = a[:, :, q]
            a[:, :, p] = cc * col_p - ss * col_q
            a[:, :, q] = ss * col_p + cc * col_q
            row_p = a[:, p, :].copy()
            row_q = a[:, q, :]
            a[:, p, :] = cc * row_p - ss * row_q
            a[:, q, :] = ss * row_p + cc * row_q
            a[:, p, q] = 0.0
            a[:, q, p] = 0.0
        sweeps += 1
        off = _off_norm(a)
    return np.diagonal(a, axis1=1, axis2=2).copy()


def resample_linear(samples, fs_in, fs_out):
    """Linear-interpolation resampling.

    Output length is ``round(n * fs_out / fs_in)``; sample ``i`` is the
    input interpolated at time ``i / fs_out``, clamped at the last input
    sample.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot resample an empty signal")
    if not (fs_in > 0 and fs_out > 0):
        raise ValueError("sampling rates must be positive")
    if fs_in == fs_out:
        return x.copy()
    n_out = int(round(x.size * fs_out / fs_in))
    t_out = np.arange(n_out) * (fs_in / fs_out)
    return np.interp(t_out, np.arange(x.size, dtype=np.float64), x)
